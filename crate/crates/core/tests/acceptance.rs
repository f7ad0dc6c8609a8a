//! Acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
//! on any failure outside the documented gaps.
//!
//! Each criterion also returns its report artifact (JSON lines without timing
//! fields); the last criterion re-runs all of them and compares bytes.

use std::f64::consts::TAU;
use std::sync::Arc;
use std::time::{Duration, Instant};

use pavlab::c64;
use pavlab::finite_vn::{conditional_expectation, perpendicular_frame, MasaFrame, TracedMatrix};
use pavlab::free_model::{
    conjugation_bound, conjugation_paving_experiment, half_split_bound, half_split_experiment, kesten_norm_oracle,
    projection_bound, projection_paving_experiment, sample, EnsembleKind, EnsembleSpec,
};
use pavlab::independence::{build_independent_partition, check_block_conditions, k_independence_residual};
use pavlab::paving::{
    arc_partition, compress, dixmier_average, pave_search, paving_defect, paving_number_exact, refine,
    roots_of_unity_blocks, sign_split, w_tuple, Partition, SearchConfig, Strategy,
};
use pavlab::random::{permutation, random_hermitian, random_matrix, stream};
use pavlab::reduction::{
    band_slices, conjugation_paver, dilate_to_projection, flatten, four_way_split, normalize_selfadjoint,
    reduce_and_pave, split_real_imag,
};
use rand::Rng;
use serde::Serialize;

struct Outcome {
    pass: bool,
    /// Set when only a documented, analysed part of the criterion failed.
    gap: Option<&'static str>,
    summary: String,
    artifact: String,
}

impl Outcome {
    fn new(pass: bool, summary: String, artifact: Artifact) -> Self {
        Self { pass, gap: None, summary, artifact: artifact.0 }
    }
}

#[derive(Default)]
struct Artifact(String);

impl Artifact {
    fn push<T: Serialize>(&mut self, item: &T) {
        self.0.push_str(&serde_json::to_string(item).expect("report serializes"));
        self.0.push('\n');
    }
}

fn diag_frame(dim: usize) -> Arc<MasaFrame> {
    Arc::new(MasaFrame::diagonal(dim))
}

/// `sum_i p_i x p_i` from explicit projection matrices.
fn block_sum(x: &TracedMatrix, part: &Partition) -> TracedMatrix {
    let mut out = TracedMatrix::zeros(x.dim());
    for p in part.projections() {
        out = &out + &(&(&p * x) * &p);
    }
    out
}

/// Entries of `x` with row and column in the same block (diagonal frame).
fn mask_blocks(x: &TracedMatrix, labels: &[usize]) -> TracedMatrix {
    TracedMatrix::from_fn(x.dim(), |i, j| if labels[i] == labels[j] { x[(i, j)] } else { c64::new(0.0, 0.0) })
}

fn balanced_signs(dim: usize, seed: u64, key: u64) -> TracedMatrix {
    let perm = permutation(dim, &mut stream(seed, key));
    let d: Vec<f64> = (0..dim).map(|i| if perm[i] < dim / 2 { 1.0 } else { -1.0 }).collect();
    TracedMatrix::from_real_diagonal(&d)
}

/// `|tau(xi* u xi u*)| / ||xi||_2^2`.
fn measured_c(xi: &TracedMatrix, u: &TracedMatrix) -> f64 {
    let w = &(&(&xi.adjoint() * u) * xi) * &u.adjoint();
    w.trace().norm() / xi.l2_norm().powi(2)
}

fn criterion_1() -> Outcome {
    let mut art = Artifact::default();
    let mut worst = 0.0f64;
    for n in [2usize, 3, 5, 8] {
        for dim in [8usize, 16] {
            let mut case_worst = 0.0f64;
            for s in 0..50u64 {
                let frame = if s % 2 == 0 { diag_frame(dim) } else { Arc::new(perpendicular_frame(dim).unwrap()) };
                let x = random_matrix(dim, 1000 * n as u64 + s);
                let labels = roots_of_unity_blocks(dim, n, &mut stream(s, 11));
                let part = Partition::new(labels, n, frame.clone()).unwrap();
                let avg = dixmier_average(&x, &w_tuple(&part), &frame).unwrap();
                case_worst = case_worst.max(avg.max_abs_diff(&block_sum(&x, &part)));
            }
            art.push(&serde_json::json!({"n": n, "dim": dim, "max_error": case_worst}));
            worst = worst.max(case_worst);
        }
    }
    Outcome::new(worst <= 1e-12, format!("max |T_W(x) - sum p x p| = {worst:.2e} (tol 1e-12) over 400 instances"), art)
}

fn criterion_2() -> Outcome {
    let dim = 32;
    let mut art = Artifact::default();
    let mut violations = 0;
    let mut worst_slack = f64::NEG_INFINITY;
    for s in 0..200u64 {
        let xi = random_matrix(dim, 2000 + s).off_diagonal();
        let u = balanced_signs(dim, s, 21);
        let part = sign_split(&u, diag_frame(dim)).unwrap();
        let lhs = compress(&xi, &part).unwrap().l2_norm();
        let c = measured_c(&xi, &u);
        let rhs = ((1.0 + c) / 2.0).sqrt() * xi.l2_norm();
        // rounding slack only: the inequality is an identity bound
        if lhs > rhs * (1.0 + 1e-12) {
            violations += 1;
        }
        worst_slack = worst_slack.max(lhs - rhs);
        art.push(&[lhs, c, rhs]);
    }
    Outcome::new(
        violations == 0,
        format!("{violations} violations in 200 trials; max lhs - rhs = {worst_slack:.3e}"),
        art,
    )
}

fn criterion_3() -> Outcome {
    let (dim, n) = (512usize, 128usize);
    let hyp = 2f64.powi(-7);
    let mut art = Artifact::default();
    let (mut kept, mut tried, mut violations) = (0, 0u64, 0);
    let mut worst = 0.0f64;
    while kept < 50 && tried < 500 {
        let s = tried;
        tried += 1;
        let xi = sample(&EnsembleSpec::new(EnsembleKind::ZeroDiagHaar, dim, 3000 + s)).unwrap();
        let mut rng = stream(s, 31);
        let d: Vec<c64> = (0..dim).map(|_| c64::from_polar(1.0, TAU * rng.random::<f64>())).collect();
        let u = TracedMatrix::from_diagonal(&d);
        let c = measured_c(&xi, &u);
        if c > hyp {
            continue;
        }
        kept += 1;
        let part = arc_partition(&u, n, diag_frame(dim)).unwrap();
        let ratio = compress(&xi, &part).unwrap().l2_norm() / xi.l2_norm();
        if ratio > 0.75 {
            violations += 1;
        }
        worst = worst.max(ratio);
        art.push(&[s as f64, c, ratio]);
    }
    Outcome::new(
        kept == 50 && violations == 0,
        format!("{kept} instances with c <= 2^-7 ({tried} drawn); {violations} violations; max ratio {worst:.4} (bound 0.75)"),
        art,
    )
}

fn criterion_4() -> Outcome {
    let (dim, n) = (512usize, 4u32);
    let mut art = Artifact::default();
    let mut failures = Vec::new();
    let mut worst_alpha = 0.0f64;
    for s in 0..20u64 {
        let x = sample(&EnsembleSpec::new(EnsembleKind::ZeroDiagHaar, dim, 4000 + s)).unwrap();
        let (part, report) =
            build_independent_partition(std::slice::from_ref(&x), &[], n, 0.05, diag_frame(dim), 20_000, s).unwrap();
        let cond = check_block_conditions(&part, std::slice::from_ref(&x), &[]).unwrap();
        let alpha = cond.alpha;
        worst_alpha = worst_alpha.max(alpha);
        // the compression inequality for x itself, ||x||_2 <= 1
        let lhs = mask_blocks(&x, part.assignment()).l2_norm().powi(2);
        let rhs = 2f64.powi(-(n as i32)) * x.l2_norm().powi(2) + 3.0 * alpha;
        let equal = part.block_sizes().iter().all(|&b| b == dim >> n);
        if !cond.all_hold || lhs > rhs || !equal || part.n_blocks() != 1 << n {
            failures.push(s);
        }
        art.push(&serde_json::json!({"seed": s, "report": report, "conditions": cond, "direct": [lhs, rhs]}));
    }
    Outcome::new(
        failures.is_empty(),
        format!("20 builds; failing seeds {failures:?}; max achieved alpha {worst_alpha:.4}"),
        art,
    )
}

/// Circulant with `c_0 = 0` and random symbols rescaled to unit energy on
/// every residue class mod `b`.
fn balanced_circulant(m: usize, b: usize, seed: u64) -> TracedMatrix {
    let mut rng = stream(seed, 51);
    let mut c: Vec<c64> =
        (0..m)
            .map(|k| {
                if k == 0 {
                    c64::new(0.0, 0.0)
                } else {
                    c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                }
            })
            .collect();
    for r in 0..b {
        let e: f64 = (0..m).filter(|k| k % b == r).map(|k| c[k].norm_sqr()).sum();
        for k in (0..m).filter(|k| k % b == r) {
            c[k] /= e.sqrt();
        }
    }
    TracedMatrix::from_fn(m, |i, j| c[(j + m - i) % m])
}

fn criterion_5() -> Outcome {
    let mut art = Artifact::default();
    let mut worst_res = 0.0f64;
    for m in [2usize, 4, 8, 16] {
        let f = perpendicular_frame(m).unwrap();
        let mut rng = stream(m as u64, 52);
        let d: Vec<c64> = (0..m)
            .map(|k| if k == 0 { c64::new(0.0, 0.0) } else { c64::new(rng.random::<f64>(), rng.random::<f64>()) })
            .collect();
        let x = f.element(&d);
        let part = Partition::singletons(diag_frame(m));
        let r = k_independence_residual(&part, &[x], 1, 10_000, 0).unwrap();
        worst_res = worst_res.max(r.residual_per_level[0]);
        art.push(&r);
    }
    let mut worst_id = 0.0f64;
    for (m, b) in [(4usize, 2usize), (8, 2), (8, 4), (16, 2), (16, 4), (16, 8)] {
        let x = balanced_circulant(m, b, (m * b) as u64);
        // dual check that x lies in the Fourier MASA
        perpendicular_frame(m).unwrap().masa_coordinates(&x, 1e-12).expect("circulant is Fourier-diagonal");
        let norm2 = x.l2_norm().powi(2);
        for i in 0..b {
            for j in 0..b {
                let piece: f64 = (0..m)
                    .filter(|r| r % b == i)
                    .flat_map(|r| (0..m).filter(move |s| s % b == j).map(move |s| (r, s)))
                    .map(|(r, s)| x[(r, s)].norm_sqr())
                    .sum::<f64>()
                    / m as f64;
                let target = norm2 / (b * b) as f64;
                worst_id = worst_id.max((piece - target).abs());
            }
        }
        art.push(&[m as f64, b as f64, worst_id]);
    }
    Outcome::new(
        worst_res <= 1e-12 && worst_id <= 1e-12,
        format!("level-1 residual max {worst_res:.2e}; block identity max error {worst_id:.2e} (tol 1e-12)"),
        art,
    )
}

fn criterion_6() -> Outcome {
    let mut art = Artifact::default();
    let mut misses = Vec::new();
    for i in 0..100u64 {
        let dim = 2 + (i % 5) as usize;
        let x = random_matrix(dim, 6000 + i);
        for eps in [0.3, 0.5, 0.7] {
            let frame = diag_frame(dim);
            let exact = paving_number_exact(&x, eps, frame.clone(), dim).unwrap();
            let n_exact = exact.n.expect("singletons always pave");
            let (_, rep) = pave_search(&x, frame, eps, &SearchConfig::new(Strategy::Anneal, 10_000, i)).unwrap();
            if rep.n_blocks != n_exact || rep.ratio > eps {
                misses.push((i, eps));
            }
            art.push(&serde_json::json!({"i": i, "eps": eps, "exact_n": n_exact, "search": rep.without_timing()}));
        }
    }
    Outcome::new(misses.is_empty(), format!("300 cases; search missed the exact n on {misses:?}"), art)
}

fn criterion_7() -> Outcome {
    let mut art = Artifact::default();
    let mut id_ok = true;
    let mut bound_ok = true;
    let mut parts = Vec::new();
    for n in [2usize, 4, 8] {
        let bound = conjugation_bound(n) + 0.06;
        let mut within = 0;
        let mut worst_id = 0.0f64;
        let mut norms = Vec::new();
        for s in 0..100u64 {
            let r = conjugation_paving_experiment(n, 1024, s).unwrap();
            let e = r.identity_error.expect("conjugation reports the identity gap");
            worst_id = worst_id.max(e);
            if r.measured_norm <= bound {
                within += 1;
            }
            norms.push(r.measured_norm);
            art.push(&r);
        }
        norms.sort_by(f64::total_cmp);
        id_ok &= worst_id <= 1e-12;
        bound_ok &= within >= 95;
        parts.push(format!("n={n}: {within}/100 <= {bound:.4} (median {:.4}), identity {worst_id:.1e}", norms[50]));
    }
    let mut o = Outcome::new(id_ok && bound_ok, parts.join("; "), art);
    if id_ok && !bound_ok {
        o.gap = Some("measured norms follow 2 sqrt(n-1)/n, above the bound for n >= 4 (see the ledger)");
    }
    o
}

fn criterion_8() -> Outcome {
    let mut art = Artifact::default();
    let bound = projection_bound(64) + 0.05;
    let mut within = 0;
    let mut slacks = Vec::new();
    for s in 0..50u64 {
        let r = projection_paving_experiment(0.5, 64, 2048, s).unwrap();
        if r.measured_norm <= bound {
            within += 1;
        }
        art.push(&r);
        let h = half_split_experiment(0.1, 2048, s).unwrap();
        slacks.push(h.measured_norm - half_split_bound(0.1));
        art.push(&h);
    }
    let lo = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = slacks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Outcome::new(
        within >= 48,
        format!(
            "{within}/50 <= {bound:.2}; half split at t = 0.1 against {:.4}: slack in [{lo:.4}, {hi:.4}]",
            half_split_bound(0.1)
        ),
        art,
    )
}

fn criterion_9() -> Outcome {
    let mut art = Artifact::default();
    let mut within = 0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut sqrt_m = 0.0;
    for s in 0..20u64 {
        let r = kesten_norm_oracle(2, 2048, s).unwrap();
        if (1.90..=2.10).contains(&r.measured) {
            within += 1;
        }
        lo = lo.min(r.measured);
        hi = hi.max(r.measured);
        sqrt_m = r.sqrt_m_value;
        art.push(&r);
    }
    Outcome::new(
        within == 20,
        format!("{within}/20 in [1.90, 2.10], range [{lo:.4}, {hi:.4}]; the sqrt(m) value {sqrt_m:.4} is not attained"),
        art,
    )
}

fn criterion_10() -> Outcome {
    let (dim, eps) = (64usize, 0.6);
    let mut art = Artifact::default();
    let mut bad = Vec::new();
    let mut worst = [0.0f64; 5];
    for s in 0..20u64 {
        let x = if s % 2 == 0 {
            random_hermitian(dim, 10_000 + s)
        } else {
            let z = sample(&EnsembleSpec::new(EnsembleKind::ZeroDiagHaar, dim, 10_000 + s)).unwrap();
            (&z + &z.adjoint()).scale_real(0.5)
        };
        let frame = MasaFrame::diagonal(dim);
        let mut ok = true;

        // steps rebuilt from the public operations and checked against direct oracles
        let (re, _) = split_real_imag(&x.off_diagonal());
        let unit = re.scale_real(1.0 / re.op_norm());
        let y0 = normalize_selfadjoint(&unit, &frame).unwrap();
        let sv = y0.singular_values();
        let (smin, smax) = (sv.iter().copied().fold(f64::INFINITY, f64::min), sv.iter().copied().fold(0.0, f64::max));
        let spec_err = (1.0 / 3.0 - smin).max(smax - 0.5).max(0.0);
        worst[0] = worst[0].max(spec_err);
        ok &= spec_err <= 1e-10;
        let bands = band_slices(&conditional_expectation(&y0, &frame).unwrap(), eps, &frame).unwrap();
        ok &= bands.count() as f64 <= 1.0 / eps + 1.0;
        let flat = flatten(&y0, &bands, &frame).unwrap();
        let dist = (&y0 - &flat.y).op_norm();
        worst[1] = worst[1].max(dist);
        ok &= dist <= eps / 4.0;
        for band in &bands.bands {
            for quarter in four_way_split(&band.indices) {
                let inside: Vec<bool> = (0..dim).map(|i| quarter.contains(&i)).collect();
                let corner = TracedMatrix::from_fn(dim, |i, j| {
                    if inside[i] && inside[j] {
                        flat.y[(i, j)]
                    } else {
                        c64::new(0.0, 0.0)
                    }
                });
                let d = dilate_to_projection(&corner, &quarter, band.anchor, &frame).unwrap();
                let g = d.embed(&frame);
                let idem = (&g * &g).max_abs_diff(&g);
                let diag = g.diagonal();
                let spread = d.support.iter().map(|&i| (diag[i].re - band.anchor).abs()).fold(0.0, f64::max);
                worst[2] = worst[2].max(idem);
                worst[3] = worst[3].max(spread);
                ok &= idem <= 1e-8 && spread <= 1e-8;
            }
        }

        // the full pipeline with its own stage checks
        let mut paver = conjugation_paver(8, s);
        let (part, trace, report) = reduce_and_pave(&x, eps, &mut paver, Arc::new(frame.clone())).unwrap();
        ok &= trace.all_hold() && report.ratio <= eps;

        // translation, scale and perturbation on the output partition
        let base = paving_defect(&x, &part).unwrap();
        let shifted = paving_defect(&x.shift(c64::new(2.5, -1.0)), &part).unwrap();
        let scaled = paving_defect(&x.scale_real(-1.7), &part).unwrap();
        let inv = (shifted.defect - base.defect).abs().max((scaled.defect - 1.7 * base.defect).abs());
        worst[4] = worst[4].max(inv);
        ok &= inv <= 1e-12;
        let delta = 0.1;
        let h = random_hermitian(dim, 20_000 + s);
        let gap = x.off_diagonal().op_norm();
        let target = 0.5 * delta / (1.0 + base.ratio) * gap;
        let y = &x + &h.scale_real(target / h.op_norm());
        let ry = paving_defect(&y, &part).unwrap().ratio;
        let rx = base.ratio;
        // y plays the paved element and x its perturbation
        let ok_pert = rx <= ry + delta + 1e-9;
        ok &= ok_pert;

        if !ok {
            bad.push(s);
        }
        art.push(&serde_json::json!({"seed": s, "report": report.without_timing(), "trace": trace,
            "checks": [spec_err, dist, inv, rx, ry]}));
    }
    Outcome::new(
        bad.is_empty(),
        format!(
            "20 instances, failing {bad:?}; spectrum excess {:.1e}, max ||y0 - y|| {:.4} (<= {:.2}), idempotency {:.1e}, diagonal {:.1e}, invariance {:.1e}",
            worst[0],
            worst[1],
            eps / 4.0,
            worst[2],
            worst[3],
            worst[4]
        ),
        art,
    )
}

fn criterion_11() -> Outcome {
    let dim = 16;
    let mut art = Artifact::default();
    let mut bad = Vec::new();
    for s in 0..50u64 {
        let x = random_matrix(dim, 11_000 + s);
        let frame = diag_frame(dim);
        let cfg = SearchConfig::new(Strategy::Anneal, 500, s);
        let (p, r1) = pave_search(&x, frame.clone(), 0.8, &cfg).unwrap();
        let y = compress(&x, &p).unwrap();
        let (q, r2) = pave_search(&y, frame, 0.8, &cfg).unwrap();
        let r = paving_defect(&x, &refine(&p, &q).unwrap()).unwrap();
        if r.ratio > r1.ratio * r2.ratio + 1e-9 {
            bad.push(s);
        }
        art.push(&[r1.ratio, r2.ratio, r.ratio]);
    }
    Outcome::new(bad.is_empty(), format!("50 instances; composition violated on {bad:?}"), art)
}

fn criterion_12() -> Outcome {
    let (dim, seeds, budget) = (1024usize, 10u64, 4usize);
    let grid = [0.6, 0.5, 0.4, 0.3];
    let mut art = Artifact::default();
    let mut mean = Vec::new();
    for &eps in &grid {
        let mut total = 0.0;
        for s in 0..seeds {
            let x = sample(&EnsembleSpec::new(EnsembleKind::ZeroDiagHaar, dim, 12_000 + s)).unwrap();
            let cfg = SearchConfig::new(Strategy::RootsOfUnity, budget, s);
            let (_, r) = pave_search(&x, diag_frame(dim), eps, &cfg).unwrap();
            total += r.n_blocks as f64;
            art.push(&r.without_timing());
        }
        mean.push(total / seeds as f64);
    }
    let c = mean[0] * grid[0].powi(6);
    let below = grid.iter().zip(&mean).all(|(&e, &m)| m <= c * e.powi(-6) * (1.0 + 1e-12));
    let xs: Vec<f64> = grid.iter().map(|e| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = mean.iter().map(|m| m.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    art.push(&serde_json::json!({"mean_n": mean, "c": c, "exponent": slope}));
    Outcome::new(
        below,
        format!("mean n(eps) = {mean:?} for eps {grid:?}; C = {c:.4}; fitted exponent {slope:.3} (reported)"),
        art,
    )
}

type Criterion = (usize, &'static str, fn() -> Outcome, Duration);

fn criteria() -> Vec<Criterion> {
    let s = Duration::from_secs;
    vec![
        (1, "W-tuple averaging identity", criterion_1 as fn() -> Outcome, s(5)),
        (2, "sign split L2 inequality", criterion_2, s(10)),
        (3, "arc partition L2 bound", criterion_3, s(120)),
        (4, "independent partition certificate chain", criterion_4, s(300)),
        (5, "perpendicular frame independence", criterion_5, s(5)),
        (6, "brute-force paving oracle", criterion_6, s(120)),
        (7, "conjugation paving norm", criterion_7, s(600)),
        (8, "projection paving norm", criterion_8, s(900)),
        (9, "Kesten norm oracle", criterion_9, s(300)),
        (10, "reduction mechanics", criterion_10, s(120)),
        (11, "composition law", criterion_11, s(60)),
        (12, "paving size envelope", criterion_12, s(1800)),
    ]
}

fn main() {
    let mut hard_failures = 0;
    let mut artifacts = Vec::new();
    let only: Option<Vec<usize>> = std::env::var("PAVLAB_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let list: Vec<_> = criteria().into_iter().filter(|c| only.as_ref().map_or(true, |o| o.contains(&c.0))).collect();
    for (id, name, run, limit) in &list {
        let watch = Instant::now();
        let o = run();
        let elapsed = watch.elapsed();
        let in_time = elapsed < *limit;
        let verdict = match (o.pass && in_time, o.gap) {
            (true, _) => "PASS".to_string(),
            (false, Some(gap)) if in_time => format!("FAIL (documented gap: {gap})"),
            _ => {
                hard_failures += 1;
                "FAIL".to_string()
            }
        };
        println!(
            "criterion {id:2} [{name}]: {verdict}: {} [{:.1} s, limit {} s]",
            o.summary,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
        artifacts.push(o.artifact);
    }

    let watch = Instant::now();
    let mut differing = Vec::new();
    for ((id, _, run, _), first) in list.iter().zip(&artifacts) {
        if run().artifact != *first {
            differing.push(*id);
        }
    }
    let pass = differing.is_empty();
    if !pass {
        hard_failures += 1;
    }
    println!(
        "criterion 13 [reproducibility]: {}: re-ran {} criteria with the same seeds; artifacts differing: {differing:?} [{:.1} s]",
        if pass { "PASS" } else { "FAIL" },
        list.len(),
        watch.elapsed().as_secs_f64()
    );

    if hard_failures > 0 {
        println!("{hard_failures} criteria failed");
        std::process::exit(1);
    }
}

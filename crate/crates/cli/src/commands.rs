use std::sync::Arc;

use anyhow::Result;
use pavlab::free_model::{
    calibration_targets, conjugation_bound, conjugation_paving_experiment, freeness_residual, half_split_bound,
    half_split_experiment, kesten_free_value, kesten_norm_oracle, power_conjugation_growth, projection_bound,
    projection_paving_experiment, run_calibration_target, sample, EnsembleKind, EnsembleSpec, NormExperimentReport,
};
use pavlab::independence::{build_independent_partition, check_block_conditions};
use pavlab::paving::{
    compress, dixmier_average, pave_search, paving_number_exact, roots_of_unity_blocks, w_tuple, SearchConfig,
};
use pavlab::reduction::{conjugation_paver, reduce_and_pave};
use pavlab::report::{fmt_f64, CsvRow, CSV_HEADER};
use pavlab::{finite_vn::io, perpendicular_frame, MasaFrame, Partition, TracedMatrix};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::args::*;
use crate::output::{Run, Table};

/// Absolute tolerance of the exact identities checked on every run.
const IDENTITY_TOL: f64 = 1e-12;

const DIXMIER_STREAM: u64 = 0xd1;

fn pre(msg: impl Into<String>) -> anyhow::Error {
    pavlab::Error::Precondition(msg.into()).into()
}

fn check_seeds(s: &SeedArgs) -> Result<Vec<u64>> {
    if s.seed_count == 0 {
        return Err(pre("seed count must be at least 1"));
    }
    s.seed.checked_add(s.seed_count as u64 - 1).ok_or_else(|| pre("seed range overflows u64"))?;
    Ok(s.seeds())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(pre(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

/// `value` with `seed` as its first field.
fn with_seed<T: Serialize>(seed: u64, value: &T) -> Result<Value> {
    let mut m = Map::new();
    m.insert("seed".into(), seed.into());
    match serde_json::to_value(value)? {
        Value::Object(rest) => m.extend(rest),
        other => {
            m.insert("value".into(), other);
        }
    }
    Ok(Value::Object(m))
}

fn sweep<T: Send>(seeds: &[u64], f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    seeds.par_iter().map(|&s| f(s)).collect()
}

fn element(e: &ElementArgs, seed: u64) -> Result<TracedMatrix> {
    if let Some(path) = &e.input {
        return io::read_matrix_file(path).map_err(|e| match e {
            pavlab::Error::Io(io) => pre(format!("cannot read {}: {io}", path.display())),
            other => other.into(),
        });
    }
    let kind = match e.ensemble {
        Ensemble::Haar => EnsembleKind::HaarUnitary,
        Ensemble::ZeroDiagHaar | Ensemble::SaZeroDiagHaar => EnsembleKind::ZeroDiagHaar,
        Ensemble::Projection => EnsembleKind::RandomProjection { t: e.t },
        Ensemble::Roots => EnsembleKind::RootsOfUnityDiag { n: e.order },
    };
    let x = sample(&EnsembleSpec::new(kind, e.dim, seed))?;
    if e.ensemble == Ensemble::SaZeroDiagHaar {
        let h = (&x + &x.adjoint()).scale_real(0.5);
        let norm = h.op_norm();
        return Ok(if norm > 0.0 { h.scale_real(1.0 / norm) } else { h });
    }
    Ok(x)
}

fn frame(kind: FrameKind, dim: usize) -> Result<Arc<MasaFrame>> {
    Ok(Arc::new(match kind {
        FrameKind::Diagonal => MasaFrame::diagonal(dim),
        FrameKind::Fourier => perpendicular_frame(dim)?,
    }))
}

pub fn pave(a: &PaveArgs) -> Result<Run> {
    let seeds = check_seeds(&a.seeds)?;
    check_eps(a.eps)?;
    let records = sweep(&seeds, |s| {
        let x = element(&a.element, s)?;
        let f = frame(a.element.frame, x.dim())?;
        let mut cfg = SearchConfig::new(a.strategy, a.budget, s);
        cfg.max_blocks = a.max_blocks;
        let (part, report) = pave_search(&x, f, a.eps, &cfg)?;
        Ok(json!({"seed": s, "dim": x.dim(), "eps": a.eps, "report": report, "partition": part}))
    })?;
    Ok(Run::new(records, seeds))
}

pub fn pave_exact(a: &PaveExactArgs) -> Result<Run> {
    let seeds = check_seeds(&a.seeds)?;
    check_eps(a.eps)?;
    let records = sweep(&seeds, |s| {
        let x = element(&a.element, s)?;
        let f = frame(a.element.frame, x.dim())?;
        let ex = paving_number_exact(&x, a.eps, f, a.max_n.unwrap_or(x.dim()))?;
        with_seed(s, &json!({"dim": x.dim(), "result": ex}))
    })?;
    // flatten the result object one level for readability
    let records = records
        .into_iter()
        .map(|mut r| {
            let inner = r["result"].take();
            let m = r.as_object_mut().expect("record is an object");
            m.remove("result");
            if let Value::Object(inner) = inner {
                m.extend(inner);
            }
            r
        })
        .collect();
    Ok(Run::new(records, seeds))
}

/// Least-squares slope of `ln n` against `ln(1/eps)`.
fn log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(e, n)| ((1.0 / e).ln(), n.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        f64::NAN
    }
}

pub fn curve(a: &CurveArgs) -> Result<Run> {
    let seeds = check_seeds(&a.seeds)?;
    if a.eps.is_empty() {
        return Err(pre("eps grid is empty"));
    }
    for &e in &a.eps {
        check_eps(e)?;
    }
    let jobs: Vec<(f64, u64)> = a.eps.iter().flat_map(|&e| seeds.iter().map(move |&s| (e, s))).collect();
    let runs: Vec<(usize, usize, f64)> = jobs
        .par_iter()
        .map(|&(e, s)| {
            let x = element(&a.element, s)?;
            let f = frame(a.element.frame, x.dim())?;
            let (_, r) = pave_search(&x, f, e, &SearchConfig::new(a.strategy, a.budget, s))?;
            Ok((x.dim(), r.n_blocks, r.ratio))
        })
        .collect::<Result<_>>()?;
    let mean_n: Vec<f64> = a
        .eps
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let chunk = &runs[i * seeds.len()..(i + 1) * seeds.len()];
            chunk.iter().map(|r| r.1 as f64).sum::<f64>() / seeds.len() as f64
        })
        .collect();
    let fit_idx =
        a.eps.iter().position(|&e| e == a.fit_eps).unwrap_or_else(|| {
            (0..a.eps.len()).max_by(|&i, &j| a.eps[i].total_cmp(&a.eps[j])).expect("grid is nonempty")
        });
    let fit_eps = a.eps[fit_idx];
    let c = mean_n[fit_idx] * fit_eps.powi(6);
    let points: Vec<(f64, f64)> = a.eps.iter().copied().zip(mean_n.iter().copied()).collect();
    let exponent = log_slope(&points);

    let header = ["eps", "seed", "dim", "n", "ratio", "mean_n", "envelope", "below_envelope", "fitted_exponent"];
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for (i, &(e, s)) in jobs.iter().enumerate() {
        let (dim, n, ratio) = runs[i];
        let m = mean_n[i / seeds.len()];
        let envelope = c * e.powi(-6);
        let below = m <= envelope * (1.0 + 1e-12);
        records.push(json!({
            "eps": e, "seed": s, "dim": dim, "n": n, "ratio": ratio, "mean_n": m,
            "envelope": envelope, "below_envelope": below, "fitted_exponent": exponent, "fit_eps": fit_eps,
        }));
        rows.push(vec![
            fmt_f64(e),
            s.to_string(),
            dim.to_string(),
            n.to_string(),
            fmt_f64(ratio),
            fmt_f64(m),
            fmt_f64(envelope),
            below.to_string(),
            fmt_f64(exponent),
        ]);
    }
    let mut run = Run::new(records, seeds);
    run.table = Some(Table { header: header.iter().map(|h| h.to_string()).collect(), rows });
    Ok(run)
}

pub fn indep(a: &IndepArgs) -> Result<Run> {
    let seeds = check_seeds(&a.seeds)?;
    if a.x_count + a.y_count == 0 {
        return Err(pre("need at least one test element"));
    }
    let f = frame(FrameKind::Diagonal, a.dim)?;
    let runs = sweep(&seeds, |s| {
        let xs = (0..a.x_count)
            .map(|i| sample(&EnsembleSpec::new(EnsembleKind::ZeroDiagHaar, a.dim, s * 1000 + i as u64)))
            .collect::<pavlab::Result<Vec<_>>>()?;
        let ys = (0..a.y_count)
            .map(|i| sample(&EnsembleSpec::new(EnsembleKind::RootsOfUnityDiag { n: 2 }, a.dim, s * 1000 + i as u64)))
            .collect::<pavlab::Result<Vec<_>>>()?;
        let (part, report) = build_independent_partition(&xs, &ys, a.n, a.alpha, f.clone(), a.budget, s)?;
        let cond = check_block_conditions(&part, &xs, &ys)?;
        let ok = cond.all_hold;
        let rec = json!({"seed": s, "dim": a.dim, "n": a.n, "alpha_target": a.alpha,
            "report": report, "conditions": cond, "partition": part});
        Ok((rec, ok))
    })?;
    let violations =
        runs.iter().filter(|r| !r.1).map(|r| format!("block conditions fail for seed {}", r.0["seed"])).collect();
    let mut run = Run::new(runs.into_iter().map(|r| r.0).collect(), seeds);
    run.violations = violations;
    Ok(run)
}

fn row(param: &str, n: usize, dim: usize, seed: u64, measured: f64, bound: f64) -> CsvRow {
    CsvRow { param: param.into(), n, dim, seed, measured, bound, slack: measured - bound }
}

fn norm_row(r: &NormExperimentReport, param: &str, bound: f64) -> CsvRow {
    row(param, r.n, r.dim, r.seed, r.measured_norm, bound)
}

pub fn free(a: &FreeArgs) -> Result<Run> {
    let seeds = check_seeds(&a.seeds)?;
    let out = sweep(&seeds, |s| -> Result<(Value, CsvRow, Option<String>)> {
        Ok(match a.op {
            FreeOp::Conj => {
                let r = conjugation_paving_experiment(a.n, a.dim, s)?;
                let bad = r
                    .identity_error
                    .filter(|&e| !(e <= IDENTITY_TOL))
                    .map(|e| format!("averaging identity off by {e:e} at seed {s}"));
                (serde_json::to_value(&r)?, norm_row(&r, "conj", conjugation_bound(a.n)), bad)
            }
            FreeOp::Proj => {
                let r = projection_paving_experiment(a.t, a.n, a.dim, s)?;
                (serde_json::to_value(&r)?, norm_row(&r, "proj", projection_bound(a.n)), None)
            }
            FreeOp::HalfSplit => {
                let r = half_split_experiment(a.t, a.dim, s)?;
                let bound = half_split_bound(r.t.unwrap_or(a.t));
                (serde_json::to_value(&r)?, norm_row(&r, "half_split", bound), None)
            }
            FreeOp::Kesten => {
                let r = kesten_norm_oracle(a.m, a.dim, s)?;
                let csv = row("kesten", a.m, a.dim, s, r.measured, kesten_free_value(a.m));
                (serde_json::to_value(&r)?, csv, None)
            }
            FreeOp::Growth => {
                let r = power_conjugation_growth(a.dim, a.n_max, s)?;
                // reference exponent: growth of order sqrt(n)
                let csv = row("growth", a.n_max, a.dim, s, r.beta, 0.5);
                (serde_json::to_value(&r)?, csv, None)
            }
            FreeOp::Freeness => {
                let els = (0..a.m)
                    .map(|i| {
                        let seed = s.wrapping_mul(1_000_003).wrapping_add(i as u64);
                        sample(&EnsembleSpec::new(EnsembleKind::HaarUnitary, a.dim, seed))
                    })
                    .collect::<pavlab::Result<Vec<_>>>()?;
                let r = freeness_residual(&els, a.k, a.budget, s)?;
                let csv = row("freeness", a.k, a.dim, s, r.residual, 0.0);
                (with_seed(s, &r)?, csv, None)
            }
        })
    })?;
    let mut records = Vec::new();
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for (rec, csv, bad) in out {
        records.push(rec);
        rows.push(csv.to_csv().split(',').map(String::from).collect());
        violations.extend(bad);
    }
    let mut run = Run::new(records, seeds);
    run.table = Some(Table { header: CSV_HEADER.split(',').map(String::from).collect(), rows });
    run.violations = violations;
    Ok(run)
}

pub fn reduce(a: &ReduceArgs) -> Result<Run> {
    let seeds = check_seeds(&a.seeds)?;
    let runs = sweep(&seeds, |s| {
        let x = element(&a.element, s)?;
        let f = frame(a.element.frame, x.dim())?;
        let mut paver = conjugation_paver(a.budget, s);
        let (part, trace, report) = reduce_and_pave(&x, a.eps, &mut paver, f)?;
        let dumped = match &a.dump {
            Some(dir) => trace.dump_matrices(&dir.join(format!("seed-{s}")))?,
            None => Vec::new(),
        };
        let rec = json!({"seed": s, "dim": x.dim(), "eps": a.eps, "report": report,
            "trace": trace, "partition": part});
        Ok((rec, dumped))
    })?;
    let mut records = Vec::new();
    let mut artifacts = Vec::new();
    for (rec, dumped) in runs {
        records.push(rec);
        artifacts.extend(dumped);
    }
    let mut run = Run::new(records, seeds);
    run.artifacts = artifacts;
    Ok(run)
}

pub fn dixmier(a: &DixmierArgs) -> Result<Run> {
    let seeds = check_seeds(&a.seeds)?;
    let runs = sweep(&seeds, |s| {
        let x = element(&a.element, s)?;
        let dim = x.dim();
        if a.n == 0 || a.n > dim {
            return Err(pre(format!("block count must lie in 1..={dim}")));
        }
        let f = frame(a.element.frame, dim)?;
        let mut rng = pavlab::random::stream(s, DIXMIER_STREAM);
        let part = Partition::new(roots_of_unity_blocks(dim, a.n, &mut rng), a.n, f.clone())?;
        let avg = dixmier_average(&x, &w_tuple(&part), &f)?;
        let err = avg.max_abs_diff(&compress(&x, &part)?);
        let tol = IDENTITY_TOL * x.max_abs().max(1.0);
        let bad = (!(err <= tol)).then(|| format!("W-tuple average off by {err:e} at seed {s}"));
        let rec = json!({"seed": s, "dim": dim, "n": a.n, "identity_error": err,
            "input_norm": x.op_norm(), "average_norm": avg.op_norm(), "partition": part});
        Ok((rec, bad))
    })?;
    let mut run = Run::new(Vec::new(), seeds);
    for (rec, bad) in runs {
        run.records.push(rec);
        run.violations.extend(bad);
    }
    Ok(run)
}

pub fn calibrate(a: &CalibrateArgs) -> Result<Run> {
    let mut targets = calibration_targets();
    for name in &a.only {
        if !targets.iter().any(|t| &t.name == name) {
            return Err(pre(format!("unknown calibration target `{name}`")));
        }
    }
    if !a.only.is_empty() {
        targets.retain(|t| a.only.contains(&t.name));
    }
    if a.seeds == Some(0) {
        return Err(pre("seed count must be at least 1"));
    }
    for t in &mut targets {
        if let Some(n) = a.seeds {
            t.seed_count = n;
        }
        if let Some(d) = a.max_dim {
            t.dim = t.dim.min(d);
        }
    }
    let max_seeds = targets.iter().map(|t| t.seed_count).max().unwrap_or(0);
    let mut records = Vec::new();
    for t in &targets {
        records.push(serde_json::to_value(run_calibration_target(t)?)?);
    }
    Ok(Run::new(records, (0..max_seeds as u64).collect()))
}

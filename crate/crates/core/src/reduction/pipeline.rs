use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use super::dilation::{dilate_local, DILATION_TOL};
use super::steps::{
    bands_of, check_eps, flatten, four_way_split, normalize_selfadjoint, split_real_imag, FLAT_TOL, STEP_TOL,
};
use crate::error::{check_dim, Error, Result};
use crate::finite_vn::{io, MasaFrame, TracedMatrix};
use crate::linalg;
use crate::paving::{pave_search, refine, Partition, PavingProblem, PavingReport, SearchConfig, Strategy};
use crate::paving::{DEFAULT_TAIL_EPS, DEGENERATE_NORM};
use crate::report::Stopwatch;

/// Below this dimension the pipeline paves by singletons: a band split into
/// quarters leaves no room for the dilations.
pub const MIN_REDUCTION_DIM: usize = 8;

/// Slack of the inequality checks between measured ratios.
pub const CHAIN_TOL: f64 = 1e-9;

/// Paves a projection given in the coordinates of its diagonal MASA at the
/// given ratio, returning a partition of its indices.
pub type ProjectionPaver<'a> = dyn FnMut(&TracedMatrix, f64) -> Result<Partition> + 'a;

/// The default projection paver: [`pave_search`] with the roots-of-unity
/// strategy, i.e. conjugation by a scrambled roots-of-unity unitary.
pub fn conjugation_paver(budget: usize, seed: u64) -> impl FnMut(&TracedMatrix, f64) -> Result<Partition> {
    move |g: &TracedMatrix, target: f64| {
        let cfg = SearchConfig::new(Strategy::RootsOfUnity, budget, seed);
        pave_search(g, Arc::new(MasaFrame::diagonal(g.dim())), target, &cfg).map(|(p, _)| p)
    }
}

/// One checked step of the reduction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stage {
    pub label: String,
    /// `"re"`, `"im"`, or `"x"` for the whole element.
    pub component: String,
    /// `(k, j)`: band number and quarter, both 1-based.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub piece: Option<[usize; 2]>,
    pub measured: f64,
    pub bound: f64,
    pub holds: bool,
    /// Index into [`ReductionTrace::matrices`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub handle: Option<usize>,
}

/// Every intermediate of [`reduce_and_pave`] with its numerically checked bound.
#[derive(Clone, Debug, Serialize)]
pub struct ReductionTrace {
    pub eps: f64,
    /// Largest band count over the two components.
    pub band_count: usize,
    /// Band anchors `t_k` per component.
    pub anchors: Vec<Vec<f64>>,
    /// Largest block count returned by the projection paver.
    pub projection_blocks: usize,
    pub stages: Vec<Stage>,
    /// Stage matrices in frame coordinates: `y0`, `y` per component and the
    /// local `g` per piece.
    #[serde(skip)]
    pub matrices: Vec<(String, TracedMatrix)>,
}

impl ReductionTrace {
    fn new(eps: f64) -> Self {
        Self { eps, band_count: 0, anchors: Vec::new(), projection_blocks: 0, stages: Vec::new(), matrices: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn stages_named<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a Stage> + 'a {
        self.stages.iter().filter(move |s| s.label == label)
    }

    pub fn all_hold(&self) -> bool {
        self.stages.iter().all(|s| s.holds)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }

    /// Writes each stage matrix to `dir` in the binary matrix format.
    pub fn dump_matrices(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for (i, (name, m)) in self.matrices.iter().enumerate() {
            let path = dir.join(format!("{i:03}_{name}.bin"));
            io::write_binary(m, std::io::BufWriter::new(std::fs::File::create(&path)?))?;
            paths.push(path);
        }
        Ok(paths)
    }

    fn keep(&mut self, name: String, m: TracedMatrix) -> usize {
        self.matrices.push((name, m));
        self.matrices.len() - 1
    }

    /// Records a stage; a failed `hard` stage is an invariant violation.
    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        label: &str,
        component: &str,
        piece: Option<[usize; 2]>,
        measured: f64,
        bound: f64,
        handle: Option<usize>,
        hard: bool,
    ) -> Result<()> {
        let holds = measured <= bound;
        self.stages.push(Stage {
            label: label.into(),
            component: component.into(),
            piece,
            measured,
            bound,
            holds,
            handle,
        });
        if hard && !holds {
            return Err(Error::invariant(format!("{label} ({component}): {measured} exceeds {bound}")));
        }
        Ok(())
    }
}

/// `2 (1 + eps) ||x - y|| / ||x - E(x)||`: paving `y` at ratio `eps` paves
/// `x` at ratio `eps + delta` for this `delta`.
pub fn perturbation_delta(x: &TracedMatrix, y: &TracedMatrix, eps: f64, frame: &MasaFrame) -> Result<f64> {
    check_dim(x.dim(), y.dim())?;
    let base = PavingProblem::new(x, Arc::new(frame.clone()))?.base_norm();
    if base < DEGENERATE_NORM {
        return Err(Error::pre("x lies in the MASA"));
    }
    Ok(2.0 * (1.0 + eps) * x.try_sub(y)?.op_norm() / base)
}

fn ratio_of(problem: &PavingProblem, part: &Partition) -> f64 {
    problem.ratio(problem.defect(part.assignment(), part.n_blocks()))
}

struct ComponentPaving {
    part: Partition,
    ratio: f64,
    norm: f64,
}

/// Paves one self-adjoint component `h` (frame coordinates, zero diagonal)
/// at ratio `eps`.
fn pave_component(
    h: &TracedMatrix,
    name: &str,
    eps: f64,
    paver: &mut ProjectionPaver<'_>,
    trace: &mut ReductionTrace,
) -> Result<ComponentPaving> {
    let m = h.dim();
    let local = Arc::new(MasaFrame::diagonal(m));
    let norm = linalg::hermitian_op_norm(h);
    let y0 = normalize_selfadjoint(&h.scale_real(1.0 / norm), &local)?;
    let ev = linalg::hermitian_eigenvalues(&y0);
    let excursion = (1.0 / 3.0 - ev[0]).max(ev[m - 1] - 0.5).max(0.0);
    let handle = trace.keep(format!("{name}_y0"), y0.clone());
    trace.record("normalize", name, None, excursion, STEP_TOL, Some(handle), true)?;

    let bands = bands_of(&y0, eps, &local)?;
    trace.record("bands", name, None, bands.count() as f64, bands.count_bound(), None, true)?;
    trace.band_count = trace.band_count.max(bands.count());
    trace.anchors.push(bands.anchors());

    let fl = flatten(&y0, &bands, &local)?;
    let handle = trace.keep(format!("{name}_y"), fl.y.clone());
    trace.record("flatten", name, None, fl.distance, eps / 4.0, Some(handle), true)?;
    trace.record("flat_diagonal", name, None, fl.diagonal_error, FLAT_TOL, None, true)?;
    let y = fl.y;
    let y_problem = PavingProblem::new(&y, local.clone())?;
    let y_norm = y_problem.base_norm();

    let mut assignment = vec![usize::MAX; m];
    let mut labels = 0;
    // max over pieces of ratio(g) ||g - E(g)||: bounds the defect on y
    let mut piece_defect: f64 = 0.0;
    for band in &bands.bands {
        let quarters = four_way_split(&band.indices);
        let ideal = band.indices.len() as f64 / 4.0;
        let uneven = quarters.iter().map(|q| (q.len() as f64 - ideal).abs()).fold(0.0, f64::max) / m as f64;
        trace.record("quarters", name, Some([band.k, 0]), uneven, 1.0 / m as f64, None, true)?;
        for (j, q) in quarters.iter().enumerate() {
            if q.is_empty() {
                continue;
            }
            let piece = Some([band.k, j + 1]);
            let mut inside = vec![false; m];
            q.iter().for_each(|&i| inside[i] = true);
            let room: Vec<usize> = (0..m).filter(|&i| !inside[i]).collect();
            let dil = dilate_local(&y.principal_submatrix(q), q, &room, band.anchor, m)?;
            let handle = trace.keep(format!("{name}_g_{}_{}", band.k, j + 1), dil.g.clone());
            trace.record("dilate", name, piece, dil.idempotency_error, DILATION_TOL, Some(handle), true)?;
            trace.record("dilation_spread", name, piece, dil.diagonal_spread, DILATION_TOL, None, true)?;
            trace.record(
                "dilation_rounding",
                name,
                piece,
                dil.anchor_gap,
                band.anchor / dil.rank_p() as f64,
                None,
                true,
            )?;
            trace.record("dilation_anchor", name, piece, dil.anchor_error(), DILATION_TOL, None, false)?;

            let g_problem = PavingProblem::new(&dil.g, Arc::new(MasaFrame::diagonal(dil.g.dim())))?;
            let g_norm = g_problem.base_norm();
            let target = if g_norm < DEGENERATE_NORM { 1.0 } else { eps * y_norm / g_norm };
            let gp = paver(&dil.g, target)?;
            check_dim(dil.g.dim(), gp.dim())?;
            let g_ratio = ratio_of(&g_problem, &gp);
            trace.record("pave_projection", name, piece, g_ratio, target, None, false)?;
            piece_defect = piece_defect.max(g_ratio * g_norm);
            trace.projection_blocks = trace.projection_blocks.max(gp.n_blocks());
            for (a, &i) in q.iter().enumerate() {
                assignment[i] = labels + gp.assignment()[a];
            }
            labels += gp.n_blocks();
        }
    }
    let part = Partition::new(assignment, labels.max(1), local.clone())?.canonical();

    let y_ratio = ratio_of(&y_problem, &part);
    let corner_bound = if y_norm < DEGENERATE_NORM { 0.0 } else { piece_defect / y_norm };
    trace.record("corner", name, None, y_ratio, corner_bound + CHAIN_TOL, None, true)?;
    trace.record("pave_y", name, None, y_ratio, eps, None, false)?;

    let y0_problem = PavingProblem::new(&y0, local.clone())?;
    let y0_ratio = ratio_of(&y0_problem, &part);
    let delta = 2.0 * (1.0 + y_ratio) * fl.distance / y0_problem.base_norm();
    trace.record("perturbation", name, None, y0_ratio, y_ratio + delta + CHAIN_TOL, None, true)?;

    let h_problem = PavingProblem::new(h, local)?;
    let ratio = ratio_of(&h_problem, &part);
    trace.record("affine", name, None, (ratio - y0_ratio).abs(), CHAIN_TOL, None, true)?;
    Ok(ComponentPaving { part, ratio, norm })
}

/// Paves `x` at ratio `eps` through projections with constant diagonal.
///
/// `x - E_A(x)` is split into its real and imaginary parts; each nonzero part
/// is scaled to norm 1, mapped to `y0 = (x + 5) / 12`, flattened band by band
/// so that its diagonal is constant on each band, cut into quarters, and
/// every quarter corner is dilated to a projection which `paver` paves at the
/// ratio that carries over to `y`. The pavings of the pieces are joined per
/// component and the two components are combined by [`refine`].
///
/// Each part gets ratio `eps / 2` (all of `eps` when the other part is zero).
/// Every inequality of the chain is re-measured on the instance and recorded
/// in the trace; broken identities are reported as invariant errors, while a
/// paver missing its target only shows as a failed stage.
pub fn reduce_and_pave(
    x: &TracedMatrix,
    eps: f64,
    paver: &mut ProjectionPaver<'_>,
    frame: Arc<MasaFrame>,
) -> Result<(Partition, ReductionTrace, PavingReport)> {
    let watch = Stopwatch::start();
    check_eps(eps)?;
    let problem = PavingProblem::new(x, frame.clone())?;
    let mut trace = ReductionTrace::new(eps);
    let dim = problem.dim();
    let finish = |part: Partition, trace: ReductionTrace| {
        let report = problem.report(&part, "reduction", 0, DEFAULT_TAIL_EPS, watch.elapsed_ms());
        Ok((part, trace, report))
    };
    if problem.is_degenerate() {
        return finish(Partition::one_block(frame), trace);
    }
    if dim < MIN_REDUCTION_DIM {
        return finish(Partition::singletons(frame), trace);
    }
    let base = problem.base_norm();
    let (re, im) = split_real_imag(problem.offdiag());
    let parts: Vec<(&str, TracedMatrix)> =
        [("re", re), ("im", im)].into_iter().filter(|(_, h)| h.max_abs() > DEGENERATE_NORM).collect();
    let largest = parts.iter().map(|(_, h)| linalg::hermitian_op_norm(h)).fold(0.0, f64::max);
    trace.record("split", "x", None, largest, base * (1.0 + 1e-12), None, true)?;

    let each = if parts.len() == 2 { eps / 2.0 } else { eps };
    let mut done = Vec::new();
    for (name, h) in &parts {
        done.push(pave_component(h, name, each, paver, &mut trace)?);
    }
    let mut local = done[0].part.clone();
    for c in &done[1..] {
        local = refine(&local, &c.part)?;
    }
    let part = Partition::new(local.assignment().to_vec(), local.n_blocks(), frame)?;

    let ratio = ratio_of(&problem, &part);
    let chain: f64 = done.iter().map(|c| c.ratio * c.norm).sum::<f64>() / base;
    trace.record("recombine", "x", None, ratio, chain + CHAIN_TOL, None, true)?;
    let n_proj = trace.projection_blocks as f64;
    let count_bound = n_proj * n_proj * (1.0 / eps + 1.0).powi(2);
    trace.record("block_count", "x", None, part.effective_blocks() as f64, count_bound, None, true)?;
    trace.record("ratio", "x", None, ratio, eps, None, false)?;
    finish(part, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::finite_vn::perpendicular_frame;
    use crate::free_model::{sample, EnsembleKind, EnsembleSpec};
    use crate::paving::paving_defect;
    use crate::testing::{random_hermitian, random_matrix};

    fn diag(m: usize) -> Arc<MasaFrame> {
        Arc::new(MasaFrame::diagonal(m))
    }

    #[test]
    fn diagonal_input_is_trivial() {
        let x = TracedMatrix::from_real_diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let mut paver = conjugation_paver(8, 0);
        let (p, t, r) = reduce_and_pave(&x, 0.5, &mut paver, diag(9)).unwrap();
        assert_eq!(p.n_blocks(), 1);
        assert_eq!(r.ratio, 0.0);
        assert!(t.is_empty());
    }

    #[test]
    fn small_input_is_paved_by_singletons() {
        let x = TracedMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let mut paver = conjugation_paver(8, 0);
        let (p, t, r) = reduce_and_pave(&x, 0.5, &mut paver, diag(2)).unwrap();
        assert_eq!(p.n_blocks(), 2);
        assert_eq!(r.ratio, 0.0);
        assert!(t.is_empty());
    }

    #[test]
    fn rejects_bad_eps() {
        let mut paver = conjugation_paver(8, 0);
        let x = random_matrix(8, 1);
        assert!(reduce_and_pave(&x, 1.0, &mut paver, diag(8)).is_err());
        assert!(reduce_and_pave(&x, 0.0, &mut paver, diag(8)).is_err());
    }

    #[test]
    fn callback_failure_propagates() {
        let mut paver = |_: &TracedMatrix, _: f64| -> Result<Partition> { Err(Error::pre("no paving")) };
        let x = random_hermitian(16, 1);
        assert!(matches!(reduce_and_pave(&x, 0.5, &mut paver, diag(16)), Err(Error::Precondition(_))));
    }

    #[test]
    fn haar_model_self_adjoint_end_to_end() {
        let m = 128;
        let u = sample(&EnsembleSpec::new(EnsembleKind::ZeroDiagHaar, m, 3)).unwrap();
        let x = split_real_imag(&u).0;
        let mut paver = conjugation_paver(8, 1);
        let (p, t, r) = reduce_and_pave(&x, 0.6, &mut paver, diag(m)).unwrap();
        assert!(r.ratio <= 0.6, "{}", r.ratio);
        let n_proj = t.projection_blocks as f64;
        assert!(p.effective_blocks() as f64 <= n_proj * n_proj * (1.0 / 0.6 + 1.0_f64).powi(2));
        assert_eq!(t.band_count, 1);
        assert_eq!(t.stages_named("dilate").count(), 4);
        // eps > 1/2 puts 5/12 in the first band, and s (1 - t) / t = 2s is exact
        assert!(t.stages_named("dilation_anchor").all(|s| s.holds));
        assert!(t.all_hold());
        assert_eq!(paving_defect(&x, &p).unwrap().ratio, r.ratio);
    }

    #[test]
    fn complex_input_in_a_fourier_frame() {
        let m = 16;
        let f = Arc::new(perpendicular_frame(m).unwrap());
        let x = random_matrix(m, 5);
        let mut paver = conjugation_paver(8, 2);
        let (p, t, r) = reduce_and_pave(&x, 0.5, &mut paver, f.clone()).unwrap();
        assert!(r.ratio <= 0.5);
        assert!(t.stages_named("split").count() == 1);
        assert_eq!(t.anchors.len(), 2);
        assert!(p.same_frame(&Partition::one_block(f)));
        let n_proj = t.projection_blocks as f64;
        assert!(p.effective_blocks() as f64 <= n_proj * n_proj * 9.0);
    }

    #[test]
    fn coarse_paver_still_satisfies_the_chain() {
        // a paver that always returns one block: the projection targets fail
        // while the chain inequalities still hold
        let mut paver = |g: &TracedMatrix, _: f64| Ok(Partition::one_block(diag(g.dim())));
        let x = random_hermitian(32, 9);
        let (_, t, r) = reduce_and_pave(&x, 0.5, &mut paver, diag(32)).unwrap();
        // one block per quarter
        assert_eq!(r.effective_blocks, 4);
        assert!(!t.stages_named("pave_projection").all(|s| s.holds));
        for label in ["corner", "perturbation", "affine", "recombine"] {
            assert!(t.stages_named(label).all(|s| s.holds), "{label}");
        }
    }

    #[test]
    fn translation_and_scale_invariance() {
        let x = random_matrix(12, 4);
        let part = Partition::diagonal(vec![0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2], 3).unwrap();
        let base = paving_defect(&x, &part).unwrap().defect;
        let shifted = paving_defect(&x.shift(c64::new(3.0, -2.0)), &part).unwrap().defect;
        assert!((shifted - base).abs() < 1e-12);
        let alpha = c64::new(-1.5, 2.0);
        let scaled = paving_defect(&x.scale(alpha), &part).unwrap().defect;
        assert!((scaled - alpha.norm() * base).abs() < 1e-12);
    }

    #[test]
    fn perturbation_delta_bounds_the_ratio_change() {
        let x = random_matrix(12, 6);
        let y = x.try_add(&random_matrix(12, 7).scale_real(0.01)).unwrap();
        let part = Partition::diagonal((0..12).map(|i| i % 4).collect(), 4).unwrap();
        let ry = paving_defect(&y, &part).unwrap().ratio;
        let delta = perturbation_delta(&x, &y, ry, &MasaFrame::diagonal(12)).unwrap();
        let rx = paving_defect(&x, &part).unwrap().ratio;
        assert!(rx <= ry + delta + 1e-9);
    }

    #[test]
    fn trace_serializes_and_dumps() {
        let x = random_hermitian(8, 2);
        let mut paver = conjugation_paver(4, 0);
        let (_, t, _) = reduce_and_pave(&x, 0.7, &mut paver, diag(8)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["stages"].as_array().unwrap().len(), t.stages.len());
        let dir = std::env::temp_dir().join(format!("reduction_dump_{}", std::process::id()));
        let paths = t.dump_matrices(&dir).unwrap();
        assert_eq!(paths.len(), t.matrices.len());
        let back = io::read_matrix_file(&paths[0]).unwrap();
        assert_eq!(back, t.matrices[0].1);
        std::fs::remove_dir_all(dir).unwrap();
    }
}

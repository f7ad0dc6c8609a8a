use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::c64;
use crate::error::{check_dim, Error, Result};
use crate::finite_vn::{MasaFrame, TracedMatrix};
use crate::paving::problem::{mask_blocks, PavingProblem, DEFAULT_TAIL_EPS};
use crate::paving::Partition;

/// Tolerance for membership of unitaries in a MASA and for `u^2 = 1`.
pub const MASA_UNITARY_TOL: f64 = 1e-10;

/// Outcome of paving one element by one partition.
///
/// Field order is the serialization order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PavingReport {
    pub n_blocks: usize,
    pub effective_blocks: usize,
    /// `||compress(x) - E(x)||`.
    pub defect: f64,
    /// `defect / ||x - E(x)||`, or 0 when `x` lies in the MASA.
    pub ratio: f64,
    pub spectral_tail: f64,
    pub strategy: String,
    pub seed: u64,
    pub elapsed_ms: f64,
}

impl PavingReport {
    /// The same report with the timing field zeroed, for byte comparisons.
    pub fn without_timing(mut self) -> Self {
        self.elapsed_ms = 0.0;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialization cannot fail")
    }
}

/// `sum_i p_i x p_i`.
pub fn compress(x: &TracedMatrix, part: &Partition) -> Result<TracedMatrix> {
    check_dim(part.dim(), x.dim())?;
    let frame = part.frame();
    let y = frame.to_frame(x);
    Ok(frame.from_frame(&mask_blocks(&y, part.assignment())))
}

/// Paving defect of `x` under `part`; the spectral tail uses threshold
/// `0.5 * ||x - E(x)||`.
pub fn paving_defect(x: &TracedMatrix, part: &Partition) -> Result<PavingReport> {
    paving_defect_with_tail(x, part, DEFAULT_TAIL_EPS)
}

pub fn paving_defect_with_tail(x: &TracedMatrix, part: &Partition, tail_eps: f64) -> Result<PavingReport> {
    let problem = PavingProblem::new(x, Arc::clone(part.frame()))?;
    Ok(problem.report(part, "given", 0, tail_eps, 0.0))
}

/// Normalized trace of the spectral projection of `|y|` on `(eps, inf)`.
pub fn spectral_tail_mass(y: &TracedMatrix, eps: f64) -> f64 {
    let above = y.singular_values().iter().filter(|&&s| s > eps).count();
    above as f64 / y.dim() as f64
}

fn unitary_coordinates(u: &TracedMatrix, frame: &MasaFrame) -> Result<Vec<c64>> {
    let d = frame.masa_coordinates(u, MASA_UNITARY_TOL)?;
    if d.iter().any(|z| (z.norm() - 1.0).abs() > MASA_UNITARY_TOL) {
        return Err(Error::pre("element is not unitary"));
    }
    Ok(d)
}

/// Dixmier average `T_V(x) = n^{-1} sum_i v_i x v_i*` over unitaries of the MASA.
pub fn dixmier_average(x: &TracedMatrix, unitaries: &[TracedMatrix], frame: &MasaFrame) -> Result<TracedMatrix> {
    check_dim(frame.dim(), x.dim())?;
    if unitaries.is_empty() {
        return Err(Error::pre("Dixmier average needs at least one unitary"));
    }
    let coords = unitaries
        .iter()
        .map(|v| {
            check_dim(frame.dim(), v.dim())?;
            unitary_coordinates(v, frame)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(frame.from_frame(&dixmier_in_frame(&frame.to_frame(x), &coords)))
}

/// `T_V` acting on frame coordinates, with unitaries given by their diagonals.
pub(crate) fn dixmier_in_frame(y: &TracedMatrix, diagonals: &[Vec<c64>]) -> TracedMatrix {
    let n = y.dim();
    let k = diagonals.len() as f64;
    TracedMatrix::from_fn(n, |i, j| {
        let w: c64 = diagonals.iter().map(|d| d[i] * d[j].conj()).sum();
        y[(i, j)] * w / k
    })
}

/// Frame diagonals of `W = (w^0, ..., w^{n-1})` with `w = sum_i lambda^i p_i`,
/// `lambda = exp(2 pi i / n)`, for the labels `i` of `part`.
pub fn w_tuple_diagonals(part: &Partition) -> Vec<Vec<c64>> {
    let n = part.n_blocks();
    (0..n)
        .map(|j| {
            part.assignment().iter().map(|&i| c64::from_polar(1.0, TAU * ((i * j) % n) as f64 / n as f64)).collect()
        })
        .collect()
}

/// The unitaries `w^j`, `j = 0..n`, whose Dixmier average is the compression
/// by `part`.
pub fn w_tuple(part: &Partition) -> Vec<TracedMatrix> {
    w_tuple_diagonals(part).iter().map(|d| part.frame().element(d)).collect()
}

/// Two-block partition into the `+1` and `-1` eigenspaces of a period-2
/// unitary `u` of the MASA. Block 0 is the `+1` eigenspace.
pub fn sign_split(u: &TracedMatrix, frame: Arc<MasaFrame>) -> Result<Partition> {
    check_dim(frame.dim(), u.dim())?;
    let d = frame.masa_coordinates(u, MASA_UNITARY_TOL)?;
    let assignment = d
        .iter()
        .map(|z| {
            if (z - 1.0).norm() <= MASA_UNITARY_TOL {
                Ok(0)
            } else if (z + 1.0).norm() <= MASA_UNITARY_TOL {
                Ok(1)
            } else {
                Err(Error::pre("u is not of period 2"))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Partition::new(assignment, 2, frame)
}

/// Arc index in `0..n` of a unit complex number: block `k` holds angles in
/// `[2 pi k / n, 2 pi (k+1) / n)`, angles measured in `[0, 2 pi)`.
pub fn arc_index(z: c64, n: usize) -> usize {
    let mut a = z.arg();
    if a < 0.0 {
        a += TAU;
    }
    ((a / TAU * n as f64).floor() as usize).min(n - 1)
}

/// Spectral projections of a MASA unitary on `n` half-open arcs of the circle.
pub fn arc_partition(u: &TracedMatrix, n: usize, frame: Arc<MasaFrame>) -> Result<Partition> {
    check_dim(frame.dim(), u.dim())?;
    if n == 0 {
        return Err(Error::pre("arc partition needs n >= 1"));
    }
    let d = unitary_coordinates(u, &frame)?;
    Partition::new(d.iter().map(|&z| arc_index(z, n)).collect(), n, frame)
}

/// Common refinement; its blocks are the nonempty intersections, labelled in
/// lexicographic order of `(block of p, block of q)`.
pub fn refine(p: &Partition, q: &Partition) -> Result<Partition> {
    check_dim(p.dim(), q.dim())?;
    if !p.same_frame(q) {
        return Err(Error::pre("partitions live over different frames"));
    }
    let nq = q.n_blocks();
    let pairs: Vec<usize> = p.assignment().iter().zip(q.assignment()).map(|(&a, &b)| a * nq + b).collect();
    let mut used: Vec<usize> = pairs.clone();
    used.sort_unstable();
    used.dedup();
    let assignment = pairs.iter().map(|k| used.binary_search(k).unwrap()).collect();
    Partition::new(assignment, used.len(), Arc::clone(p.frame()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_vn::{conditional_expectation, perpendicular_frame};
    use crate::testing::random_matrix;
    use proptest::prelude::*;

    fn diag_frame(n: usize) -> Arc<MasaFrame> {
        Arc::new(MasaFrame::diagonal(n))
    }

    fn flip() -> TracedMatrix {
        TracedMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    #[test]
    fn compress_examples() {
        let x = random_matrix(6, 1);
        let f = diag_frame(6);
        let singles = compress(&x, &Partition::singletons(f.clone())).unwrap();
        assert!(singles.max_abs_diff(&conditional_expectation(&x, &f).unwrap()) < 1e-15);
        assert_eq!(compress(&x, &Partition::one_block(f)).unwrap(), x);
        let z = compress(&flip(), &Partition::singletons(diag_frame(2))).unwrap();
        assert_eq!(z, TracedMatrix::zeros(2));
    }

    #[test]
    fn defect_examples() {
        let d = TracedMatrix::from_real_diagonal(&[1.0, -2.0, 3.0]);
        let r = paving_defect(&d, &Partition::diagonal(vec![0, 1, 0], 2).unwrap()).unwrap();
        assert_eq!((r.defect, r.ratio), (0.0, 0.0));
        let r = paving_defect(&flip(), &Partition::singletons(diag_frame(2))).unwrap();
        assert_eq!((r.defect, r.ratio), (0.0, 0.0));
    }

    #[test]
    fn defect_of_all_ones_against_dense_norm() {
        let x = TracedMatrix::from_fn(4, |i, j| c64::new(if i == j { 0.0 } else { 1.0 }, 0.0));
        let p = Partition::diagonal(vec![0, 0, 1, 1], 2).unwrap();
        let r = paving_defect(&x, &p).unwrap();
        // dense oracle: norm of the compressed matrix, built entry by entry
        let c = TracedMatrix::from_fn(4, |i, j| c64::new(if i != j && i / 2 == j / 2 { 1.0 } else { 0.0 }, 0.0));
        assert!((r.defect - c.op_norm()).abs() < 1e-12);
        assert!((r.defect - 1.0).abs() < 1e-12);
        assert!((r.ratio - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.ratio * x.op_norm() - r.defect).abs() < 1e-9);
    }

    #[test]
    fn report_json_key_order() {
        let r = paving_defect(&flip(), &Partition::one_block(diag_frame(2))).unwrap();
        assert_eq!(
            r.to_json(),
            r#"{"n_blocks":1,"effective_blocks":1,"defect":1.0,"ratio":1.0,"spectral_tail":1.0,"strategy":"given","seed":0,"elapsed_ms":0.0}"#
        );
    }

    #[test]
    fn spectral_tail_examples() {
        assert_eq!(spectral_tail_mass(&TracedMatrix::zeros(3), 0.5), 0.0);
        assert_eq!(spectral_tail_mass(&TracedMatrix::identity(3), 0.5), 1.0);
        assert_eq!(spectral_tail_mass(&TracedMatrix::from_real_diagonal(&[0.1, 0.9]), 0.5), 0.5);
    }

    #[test]
    fn dixmier_examples() {
        let f = MasaFrame::diagonal(2);
        let x = flip();
        assert_eq!(dixmier_average(&x, &[TracedMatrix::identity(2)], &f).unwrap(), x);
        let u = TracedMatrix::from_real_diagonal(&[1.0, -1.0]);
        let avg = dixmier_average(&x, &[TracedMatrix::identity(2), u], &f).unwrap();
        assert!(avg.max_abs() < 1e-15);
        assert!(dixmier_average(&x, std::slice::from_ref(&x), &f).is_err());
        let not_unitary = TracedMatrix::from_real_diagonal(&[1.0, 0.5]);
        assert!(dixmier_average(&x, &[not_unitary], &f).is_err());
    }

    #[test]
    fn w_tuple_reproduces_compression() {
        for dim in [8, 16] {
            let fr = Arc::new(perpendicular_frame(dim).unwrap());
            for n in [2, 3, 5, 8] {
                let x = random_matrix(dim, (dim * 10 + n) as u64);
                let p = Partition::new((0..dim).map(|i| (i * 7 + 3) % n).collect(), n, fr.clone()).unwrap();
                let avg = dixmier_average(&x, &w_tuple(&p), &fr).unwrap();
                assert!(avg.max_abs_diff(&compress(&x, &p).unwrap()) <= 1e-12);
            }
        }
    }

    #[test]
    fn sign_split_examples() {
        let f = diag_frame(3);
        let p = sign_split(&TracedMatrix::identity(3), f.clone()).unwrap();
        assert_eq!(p.block_sizes(), vec![3, 0]);
        assert_eq!(p.effective_blocks(), 1);
        assert!(sign_split(&TracedMatrix::from_real_diagonal(&[1.0, 0.0, 1.0]), f).is_err());
        let u = TracedMatrix::from_real_diagonal(&[1.0, -1.0]);
        let p = sign_split(&u, diag_frame(2)).unwrap();
        assert_eq!(compress(&flip(), &p).unwrap(), TracedMatrix::zeros(2));
    }

    #[test]
    fn arc_examples() {
        let f = diag_frame(4);
        for n in [1, 3, 16] {
            let p = arc_partition(&TracedMatrix::identity(4), n, f.clone()).unwrap();
            assert_eq!(p.effective_blocks(), 1);
            assert!(p.assignment().iter().all(|&b| b == 0));
        }
        let d: Vec<c64> = [0.0, 0.25, 0.5, 0.75].iter().map(|t| c64::from_polar(1.0, TAU * t)).collect();
        let p = arc_partition(&TracedMatrix::from_diagonal(&d), 4, f.clone()).unwrap();
        assert_eq!(p.assignment(), &[0, 1, 2, 3]);
        assert!(arc_partition(&TracedMatrix::from_real_diagonal(&[1.0, 1.0, 2.0, 1.0]), 2, f).is_err());
    }

    #[test]
    fn refine_examples() {
        let f = diag_frame(5);
        let p = Partition::new(vec![2, 0, 2, 1, 0], 3, f.clone()).unwrap();
        assert!(refine(&p, &Partition::one_block(f.clone())).unwrap().same_blocks(&p));
        assert!(refine(&p, &p).unwrap().same_blocks(&p));
        let other = Partition::one_block(Arc::new(perpendicular_frame(5).unwrap()));
        assert!(refine(&p, &other).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn refinement_composes_compressions(seed in any::<u64>(), np in 1usize..5, nq in 1usize..5) {
            let dim = 16;
            let f = diag_frame(dim);
            let mut rng = crate::random::stream(seed, 0);
            use rand::Rng;
            let p = Partition::new((0..dim).map(|_| rng.random_range(0..np)).collect(), np, f.clone()).unwrap();
            let q = Partition::new((0..dim).map(|_| rng.random_range(0..nq)).collect(), nq, f.clone()).unwrap();
            let x = random_matrix(dim, seed);
            let r = refine(&p, &q).unwrap();
            let direct = compress(&x, &r).unwrap();
            let twice = compress(&compress(&x, &p).unwrap(), &q).unwrap();
            prop_assert!(direct.max_abs_diff(&twice) <= 1e-12);
            let dp = paving_defect(&x, &p).unwrap().defect;
            let dr = paving_defect(&x, &r).unwrap().defect;
            prop_assert!(dr <= dp + 1e-12);
        }

        #[test]
        fn compression_is_an_expectation_fixing_contraction(seed in any::<u64>(), n in 1usize..6) {
            let dim = 12;
            let fr = Arc::new(perpendicular_frame(dim).unwrap());
            let x = random_matrix(dim, seed);
            let p = Partition::new((0..dim).map(|i| (i * 5 + seed as usize) % n).collect(), n, fr.clone()).unwrap();
            let c = compress(&x, &p).unwrap();
            let ex = conditional_expectation(&x, &fr).unwrap();
            prop_assert!(conditional_expectation(&c, &fr).unwrap().max_abs_diff(&ex) < 1e-12);
            prop_assert!((c.trace() - x.trace()).norm() < 1e-12);
            let (a, b) = (c.norms(), x.norms());
            prop_assert!(a.op <= b.op + 1e-12 && a.l2 <= b.l2 + 1e-12 && a.l1 <= b.l1 + 1e-12);
        }
    }
}

//! Exact bounds for the bilinear and linear trace conditions on the algebra
//! generated by a partition, and the block inequalities they imply.

use serde::Serialize;

use super::residual::{unit_offdiag, ZERO_NORM};
use crate::error::{check_dim, Error, Result};
use crate::finite_vn::TracedMatrix;
use crate::paving::Partition;
use crate::{c64, par};

/// Slack granted to each block inequality for rounding.
pub const CONDITION_TOL: f64 = 1e-12;

const WEISZFELD_STEPS: usize = 200;

/// `alpha = max(alpha_bilinear, alpha_linear)` where, over centered `a_i` in
/// the block algebra and unit test vectors `xi`,
/// `alpha_bilinear = sup |tau(a_1 xi_1 a_2 xi_2)| / (||a_1||_2 ||a_2||_2)` and
/// `alpha_linear` bounds `sup |tau(eta a)| / ||a||` from above.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlphaCertificate {
    pub alpha: f64,
    pub alpha_bilinear: f64,
    pub alpha_linear: f64,
}

/// Frame data shared by the certificate and the block checks.
pub(crate) struct BlockData {
    pub blocks: Vec<Vec<usize>>,
    pub traces: Vec<f64>,
    /// Unit `L2` off-diagonal parts of `X`, then adjoints that differ.
    pub xi: Vec<TracedMatrix>,
    /// Number of leading entries of `xi` that come from `X` itself.
    pub n_x: usize,
    /// Frame diagonals of the linear test elements, unit `L1` norm.
    pub eta: Vec<Vec<c64>>,
}

impl BlockData {
    pub fn new(part: &Partition, xs: &[TracedMatrix], ys: &[TracedMatrix]) -> Result<Self> {
        let frame = part.frame();
        let blocks: Vec<Vec<usize>> = part.blocks().into_iter().filter(|b| !b.is_empty()).collect();
        let m = part.dim() as f64;
        let traces = blocks.iter().map(|b| b.len() as f64 / m).collect();
        let mut xi = Vec::new();
        for x in xs {
            if let Some(y) = unit_offdiag(x, frame)? {
                xi.push(y);
            }
        }
        let n_x = xi.len();
        for i in 0..n_x {
            let a = xi[i].adjoint();
            if a.max_abs_diff(&xi[i]) > 0.0 {
                xi.push(a);
            }
        }
        let mut eta = Vec::new();
        for y in ys {
            check_dim(part.dim(), y.dim())?;
            let n1 = y.l1_norm();
            if n1 > ZERO_NORM {
                eta.push(frame.to_frame(y).diagonal().into_iter().map(|z| z / n1).collect());
            }
        }
        // xi xi* has unit L1 norm
        for x in &xi {
            eta.push((0..x.dim()).map(|r| c64::new(x.row(r).iter().map(|z| z.norm_sqr()).sum(), 0.0)).collect());
        }
        Ok(Self { blocks, traces, xi, n_x, eta })
    }

    fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    /// `G_ij = tau(q_i xi_1 q_j xi_2)`.
    fn gram(&self, x1: &TracedMatrix, x2: &TracedMatrix) -> TracedMatrix {
        let nb = self.blocks.len();
        let mut g = TracedMatrix::zeros(nb);
        let inv = 1.0 / self.dim() as f64;
        for (i, bi) in self.blocks.iter().enumerate() {
            for (j, bj) in self.blocks.iter().enumerate() {
                let mut s = c64::new(0.0, 0.0);
                for &r in bi {
                    let row = x1.row(r);
                    for &t in bj {
                        s += row[t] * x2[(t, r)];
                    }
                }
                g[(i, j)] = s * inv;
            }
        }
        g
    }

    /// `sup |c^T G d|` over unit-`L2` centered block elements: the top
    /// singular value of `P D^-1/2 G D^-1/2 P` with `P` projecting off
    /// `(sqrt(tau_i))_i`.
    fn bilinear_sup(&self, g: &TracedMatrix) -> f64 {
        let nb = self.blocks.len();
        if nb < 2 {
            return 0.0;
        }
        let s: Vec<f64> = self.traces.iter().map(|t| t.sqrt()).collect();
        let p = TracedMatrix::from_fn(nb, |i, j| c64::new(if i == j { 1.0 } else { 0.0 } - s[i] * s[j], 0.0));
        let scaled = TracedMatrix::from_fn(nb, |i, j| g[(i, j)] / (s[i] * s[j]));
        (&(&p * &scaled) * &p).op_norm()
    }

    /// Upper bound for `sup |tau(eta a)|` over centered block elements with
    /// `||a|| <= 1`: `min_s sum_i |h_i - s tau_i|`, `h_i = tau(eta q_i)`.
    fn linear_sup(&self, eta: &[c64]) -> f64 {
        let inv = 1.0 / self.dim() as f64;
        let h: Vec<c64> = self.blocks.iter().map(|b| b.iter().map(|&r| eta[r]).sum::<c64>() * inv).collect();
        let cost = |s: c64| h.iter().zip(&self.traces).map(|(hi, &t)| (hi - s * t).norm()).sum::<f64>();
        // weighted geometric median of h_i / tau_i by Weiszfeld steps
        let z: Vec<c64> = h.iter().zip(&self.traces).map(|(hi, &t)| hi / t).collect();
        let mut s: c64 = h.iter().sum();
        let mut best = cost(s);
        for _ in 0..WEISZFELD_STEPS {
            let mut num = c64::new(0.0, 0.0);
            let mut den = 0.0;
            for (zi, &t) in z.iter().zip(&self.traces) {
                let d = (zi - s).norm();
                if d < 1e-300 {
                    continue;
                }
                num += zi * (t / d);
                den += t / d;
            }
            if den == 0.0 {
                break;
            }
            let next = num / den;
            let c = cost(next);
            best = best.min(c);
            if (next - s).norm() <= 1e-15 * (1.0 + s.norm()) {
                break;
            }
            s = next;
        }
        best
    }

    pub fn certificate(&self) -> AlphaCertificate {
        let pairs: Vec<(usize, usize)> =
            (0..self.xi.len()).flat_map(|i| (i..self.xi.len()).map(move |j| (i, j))).collect();
        let bil = par::map(pairs.len(), |p| {
            let (i, j) = pairs[p];
            self.bilinear_sup(&self.gram(&self.xi[i], &self.xi[j]))
        });
        let alpha_bilinear = bil.into_iter().fold(0.0, f64::max);
        let alpha_linear = self.eta.iter().map(|e| self.linear_sup(e)).fold(0.0, f64::max);
        AlphaCertificate { alpha: alpha_bilinear.max(alpha_linear), alpha_bilinear, alpha_linear }
    }
}

/// Certified `alpha` for the partition against the test sets: `X` enters
/// through unit-`L2` off-diagonal parts and their adjoints, `Y` through
/// unit-`L1` normalizations together with `xi xi*`.
pub fn certify_alpha(part: &Partition, xs: &[TracedMatrix], ys: &[TracedMatrix]) -> Result<AlphaCertificate> {
    Ok(BlockData::new(part, xs, ys)?.certificate())
}

/// One block inequality `lhs <= bound`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub lhs: f64,
    pub bound: f64,
    pub margin: f64,
    pub holds: bool,
}

impl ConditionCheck {
    fn new(name: &str, lhs: f64, bound: f64) -> Self {
        Self { name: name.into(), lhs, bound, margin: bound - lhs, holds: lhs <= bound + CONDITION_TOL }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    /// The partition has `2^n` blocks.
    pub n: u32,
    pub alpha: f64,
    pub certificate: AlphaCertificate,
    pub conditions: Vec<ConditionCheck>,
    pub all_hold: bool,
}

impl ConditionReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionCheck> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Checks the consequences of the two trace conditions on a partition into
/// `2^n` equal-trace blocks `q_i`, using the certified `alpha`. Every `x` is
/// taken as `xi = (x - E_A(x)) / ||x - E_A(x)||_2`; the inequalities are
/// homogeneous of degree two in `xi`, with `alpha` scaling alongside.
///
/// * `bilinear`: certified bilinear sup `<= alpha`
/// * `linear`: certified linear bound `<= alpha`
/// * `cross_block_l2`: `| ||q_i xi q_j||_2^2 - tau(q_i) tau(q_j) | <= 3 2^-n alpha`
/// * `block_trace`: `|tau(eta q_i) - tau(eta) tau(q_i)| <= alpha`
/// * `diagonal_block_l2`: `||q_i xi q_i||_2 <= (2^-n/2 + 2 alpha^1/2) ||q_i||_2`
/// * `compression_l2`: `||sum_i q_i xi q_i||_2^2 <= 2^-n + 3 alpha`
/// * `diagonal_block_l1`: `||q_i xi q_i||_1 <= (2^-n/2 + 2 alpha^1/2) tau(q_i)`
pub fn check_block_conditions(part: &Partition, xs: &[TracedMatrix], ys: &[TracedMatrix]) -> Result<ConditionReport> {
    let data = checked_data(part, xs, ys)?;
    let cert = data.certificate();
    Ok(conditions(&data, cert, cert.alpha))
}

/// As [`check_block_conditions`] with a caller-supplied `alpha`.
pub fn check_block_conditions_with_alpha(
    part: &Partition,
    xs: &[TracedMatrix],
    ys: &[TracedMatrix],
    alpha: f64,
) -> Result<ConditionReport> {
    if !(alpha >= 0.0) {
        return Err(Error::pre("alpha must be nonnegative"));
    }
    let data = checked_data(part, xs, ys)?;
    let cert = data.certificate();
    Ok(conditions(&data, cert, alpha))
}

fn checked_data(part: &Partition, xs: &[TracedMatrix], ys: &[TracedMatrix]) -> Result<BlockData> {
    let nb = part.n_blocks();
    let sizes = part.block_sizes();
    if !nb.is_power_of_two() || sizes.iter().any(|&s| s != sizes[0]) {
        return Err(Error::pre("partition must have 2^n blocks of equal trace"));
    }
    BlockData::new(part, xs, ys)
}

fn conditions(data: &BlockData, cert: AlphaCertificate, alpha: f64) -> ConditionReport {
    let nb = data.blocks.len();
    let n = nb.trailing_zeros();
    let m = data.dim();
    let inv = 1.0 / m as f64;
    let tq = 1.0 / nb as f64;
    let root = tq.sqrt();
    let xs = &data.xi[..data.n_x];

    let mut cross = 0.0f64;
    let mut diag_l2 = 0.0f64;
    let mut diag_l1 = 0.0f64;
    let mut compress = 0.0f64;
    for x in xs {
        let mut diag_mass = 0.0;
        for (i, bi) in data.blocks.iter().enumerate() {
            for (j, bj) in data.blocks.iter().enumerate() {
                let mass: f64 =
                    bi.iter().map(|&r| bj.iter().map(|&t| x[(r, t)].norm_sqr()).sum::<f64>()).sum::<f64>() * inv;
                cross = cross.max((mass - tq * tq).abs());
                if i == j {
                    diag_mass += mass;
                    diag_l2 = diag_l2.max(mass.sqrt());
                }
            }
        }
        compress = compress.max(diag_mass);
        for b in &data.blocks {
            let sv = x.principal_submatrix(b).singular_values();
            diag_l1 = diag_l1.max(sv.iter().sum::<f64>() * inv);
        }
    }
    let mut block_trace = 0.0f64;
    for e in &data.eta {
        let total: c64 = e.iter().sum::<c64>() * inv;
        for b in &data.blocks {
            let h: c64 = b.iter().map(|&r| e[r]).sum::<c64>() * inv;
            block_trace = block_trace.max((h - total * tq).norm());
        }
    }
    let sa = alpha.sqrt();
    let conditions = vec![
        ConditionCheck::new("bilinear", cert.alpha_bilinear, alpha),
        ConditionCheck::new("linear", cert.alpha_linear, alpha),
        ConditionCheck::new("cross_block_l2", cross, 3.0 * tq * alpha),
        ConditionCheck::new("block_trace", block_trace, alpha),
        ConditionCheck::new("diagonal_block_l2", diag_l2, (root + 2.0 * sa) * root),
        ConditionCheck::new("compression_l2", compress, tq + 3.0 * alpha),
        ConditionCheck::new("diagonal_block_l1", diag_l1, (root + 2.0 * sa) * tq),
    ];
    let all_hold = conditions.iter().all(|c| c.holds);
    ConditionReport { n, alpha, certificate: cert, conditions, all_hold }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::finite_vn::{MasaFrame, TracedMatrix};
    use crate::testing::random_matrix;

    #[test]
    fn zero_test_element_passes_with_full_margin() {
        let part = Partition::diagonal(vec![0, 1, 2, 3, 0, 1, 2, 3], 4).unwrap();
        let r = check_block_conditions(&part, &[TracedMatrix::zeros(8)], &[]).unwrap();
        assert!(r.all_hold);
        assert_eq!(r.alpha, 0.0);
        for c in &r.conditions {
            assert_eq!(c.lhs, 0.0);
            assert_eq!(c.margin, c.bound);
        }
    }

    #[test]
    fn rejects_unequal_blocks() {
        let part = Partition::diagonal(vec![0, 0, 0, 1], 2).unwrap();
        assert!(check_block_conditions(&part, &[], &[]).is_err());
        let three = Partition::diagonal(vec![0, 1, 2], 3).unwrap();
        assert!(check_block_conditions(&three, &[], &[]).is_err());
    }

    #[test]
    fn circulant_with_balanced_residues_is_exact() {
        // residue classes mod 4 against a circulant whose nonzero symbols
        // c_1..c_4 hit each class once
        let m = 16;
        let c = |k: usize| if (1..=4).contains(&k) { 1.0 } else { 0.0 };
        let x = TracedMatrix::from_fn(m, |r, s| c64::new(c((s + m - r) % m), 0.0));
        let part = Partition::diagonal((0..m).map(|r| r % 4).collect(), 4).unwrap();
        let r = check_block_conditions_with_alpha(&part, &[x], &[], 0.0).unwrap();
        assert!(r.condition("cross_block_l2").unwrap().lhs <= 1e-15);
    }

    #[test]
    fn bilinear_sup_matches_brute_force_at_dim_two() {
        // two singleton blocks: the only centered letter is q0 - q1
        let x = random_matrix(2, 3);
        let part = Partition::diagonal(vec![0, 1], 2).unwrap();
        let cert = certify_alpha(&part, std::slice::from_ref(&x), &[]).unwrap();
        let xi = x.off_diagonal().scale_real(1.0 / x.off_diagonal().l2_norm());
        let a = TracedMatrix::from_real_diagonal(&[1.0, -1.0]);
        let mut best = 0.0f64;
        for (p, q) in [(&xi, &xi), (&xi, &xi.adjoint()), (&xi.adjoint(), &xi.adjoint())] {
            best = best.max((&(&(&a * p) * &a) * q).trace().norm());
        }
        assert!((cert.alpha_bilinear - best).abs() < 1e-12, "{} vs {best}", cert.alpha_bilinear);
    }

    #[test]
    fn linear_bound_is_exact_for_two_blocks() {
        let part = Partition::diagonal(vec![0, 0, 1, 1], 2).unwrap();
        let y = TracedMatrix::from_real_diagonal(&[1.0, 3.0, -1.0, 0.0]);
        let cert = certify_alpha(&part, &[], std::slice::from_ref(&y)).unwrap();
        // a = q0 - q1 is the only centered direction with ||a|| = 1
        let a = TracedMatrix::from_real_diagonal(&[1.0, 1.0, -1.0, -1.0]);
        let exact = (&y * &a).trace().norm() / y.l1_norm();
        assert!((cert.alpha_linear - exact).abs() < 1e-9, "{} vs {exact}", cert.alpha_linear);
    }

    #[test]
    fn random_partition_conditions_hold_with_certified_alpha() {
        let frame = Arc::new(MasaFrame::diagonal(32));
        for seed in 0..5 {
            let x = random_matrix(32, seed);
            let labels: Vec<usize> = (0..32).map(|r| (r * 7 + seed as usize) % 4).collect();
            let part = Partition::new(labels, 4, frame.clone()).unwrap();
            let r = check_block_conditions(&part, &[x], &[random_matrix(32, 100 + seed)]).unwrap();
            assert!(r.all_hold, "{:?}", r.conditions);
        }
    }
}

use serde::Serialize;

use crate::error::{Error, Result};
use crate::finite_vn::TracedMatrix;
use crate::free_model::ensemble::{projection_rank, root_of_unity, roots_of_unity_exponents};
use crate::free_model::{sample, EnsembleKind, EnsembleSpec};
use crate::paving::{dixmier_in_frame, roots_of_unity_blocks};
use crate::{linalg, random};

/// Measured norm against a closed-form bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormExperimentReport {
    pub experiment: String,
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    pub measured_norm: f64,
    pub bound: f64,
    /// `measured_norm - bound`.
    pub slack: f64,
    /// Trace of the projection, for projection experiments.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Max entry gap between the two computations of the same compression.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identity_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_split_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_split_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_split_slack: Option<f64>,
}

impl NormExperimentReport {
    fn new(experiment: &str, n: usize, dim: usize, seed: u64, measured: f64, bound: f64) -> Self {
        Self {
            experiment: experiment.into(),
            n,
            dim,
            seed,
            measured_norm: measured,
            bound,
            slack: measured - bound,
            t: None,
            identity_error: None,
            half_split_norm: None,
            half_split_bound: None,
            half_split_slack: None,
        }
    }
}

/// `(sqrt(n - 1) + 1) / n`.
pub fn conjugation_bound(n: usize) -> f64 {
    (((n - 1) as f64).sqrt() + 1.0) / n as f64
}

/// `2 / sqrt(n)`.
pub fn projection_bound(n: usize) -> f64 {
    2.0 / (n as f64).sqrt()
}

/// `(t (1 - t))^{1/2} + 1/2`.
pub fn half_split_bound(t: f64) -> f64 {
    (t * (1.0 - t)).sqrt() + 0.5
}

/// Operator norm of the block-diagonal matrix given by the blocks of `labels`.
fn block_diagonal_norm(x: &TracedMatrix, labels: &[usize], n: usize, hermitian: bool) -> f64 {
    let mut blocks = vec![Vec::new(); n];
    for (i, &b) in labels.iter().enumerate() {
        blocks[b].push(i);
    }
    blocks
        .iter()
        .filter(|b| !b.is_empty())
        .map(|b| {
            let s = x.principal_submatrix(b);
            if hermitian {
                linalg::hermitian_op_norm(&s)
            } else {
                s.op_norm()
            }
        })
        .fold(0.0, f64::max)
}

/// Compression of a zero-diagonal Haar element `u` by the eigenblocks `e_k`
/// of a scrambled roots-of-unity unitary `v` of order `n`.
///
/// Both `sum_k e_k u e_k` and `n^{-1} sum_j v^j u v^{-j}` are computed and
/// their largest entry gap recorded.
pub fn conjugation_paving_experiment(n: usize, dim: usize, seed: u64) -> Result<NormExperimentReport> {
    if n == 0 || dim % n != 0 {
        return Err(Error::pre(format!("n = {n} must divide dim = {dim}")));
    }
    let u = sample(&EnsembleSpec::new(EnsembleKind::ZeroDiagHaar, dim, seed))?;
    let exps = roots_of_unity_exponents(n, dim, seed)?;
    let masked = TracedMatrix::from_fn(dim, |i, j| if exps[i] == exps[j] { u[(i, j)] } else { Default::default() });
    let powers: Vec<Vec<_>> = (0..n).map(|j| exps.iter().map(|&k| root_of_unity(j * k, n)).collect()).collect();
    let averaged = dixmier_in_frame(&u, &powers);
    let gap = masked.max_abs_diff(&averaged);
    let measured = block_diagonal_norm(&masked, &exps, n, false);
    let mut r = NormExperimentReport::new("conj", n, dim, seed, measured, conjugation_bound(n));
    r.identity_error = Some(gap);
    Ok(r)
}

fn half_split_norm(e: &TracedMatrix, seed: u64) -> f64 {
    let dim = e.dim();
    let mut rng = random::stream(seed, 5);
    let labels = roots_of_unity_blocks(dim, 2, &mut rng);
    block_diagonal_norm(e, &labels, 2, true)
}

/// Compression of a Haar-rotated projection `e` of trace `t` by `n` equal
/// blocks of a scrambled diagonal frame, measured as `||sum q_i e q_i - t||`
/// against `2 / sqrt(n)`; also the half split `||p e p + p' e p'||` against
/// `(t(1-t))^{1/2} + 1/2`.
pub fn projection_paving_experiment(t: f64, n: usize, dim: usize, seed: u64) -> Result<NormExperimentReport> {
    if !(t > 0.0 && t <= 0.5) {
        return Err(Error::pre("projection trace must lie in (0, 1/2]"));
    }
    if (n as f64) * t < 1.0 - 1e-12 {
        return Err(Error::pre("need n >= 1/t"));
    }
    if n == 0 || dim % n != 0 {
        return Err(Error::pre(format!("n = {n} must divide dim = {dim}")));
    }
    let e = sample(&EnsembleSpec::new(EnsembleKind::RandomProjection { t }, dim, seed))?;
    let tr = projection_rank(t, dim) as f64 / dim as f64;
    let mut rng = random::stream(seed, 4);
    let labels = roots_of_unity_blocks(dim, n, &mut rng);
    let measured = block_diagonal_norm(&e.shift((-tr).into()), &labels, n, true);
    let mut r = NormExperimentReport::new("proj", n, dim, seed, measured, projection_bound(n));
    r.t = Some(tr);
    let h = half_split_norm(&e, seed);
    let hb = half_split_bound(tr);
    r.half_split_norm = Some(h);
    r.half_split_bound = Some(hb);
    r.half_split_slack = Some(h - hb);
    Ok(r)
}

/// Only the half-split part of [`projection_paving_experiment`].
pub fn half_split_experiment(t: f64, dim: usize, seed: u64) -> Result<NormExperimentReport> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::pre("projection trace must lie in (0, 1)"));
    }
    let e = sample(&EnsembleSpec::new(EnsembleKind::RandomProjection { t }, dim, seed))?;
    let tr = projection_rank(t, dim) as f64 / dim as f64;
    let h = half_split_norm(&e, seed);
    let mut r = NormExperimentReport::new("half_split", 2, dim, seed, h, half_split_bound(tr));
    r.t = Some(tr);
    Ok(r)
}

/// Norm of a sum of `m` independent Haar unitaries, with the two reference
/// values for the free limit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KestenReport {
    pub m: usize,
    pub dim: usize,
    pub seed: u64,
    pub measured: f64,
    /// `2 sqrt(m - 1)` for `m >= 2`, 1 for `m = 1`.
    pub free_value: f64,
    /// `sqrt(m)`, for comparison with the free value.
    pub sqrt_m_value: f64,
}

pub fn kesten_free_value(m: usize) -> f64 {
    if m == 1 {
        1.0
    } else {
        2.0 * ((m - 1) as f64).sqrt()
    }
}

pub fn kesten_norm_oracle(m: usize, dim: usize, seed: u64) -> Result<KestenReport> {
    if m == 0 {
        return Err(Error::pre("need at least one unitary"));
    }
    let mut sum = TracedMatrix::zeros(dim);
    for i in 0..m {
        let s = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        sum = &sum + &sample(&EnsembleSpec::new(EnsembleKind::HaarUnitary, dim, s))?;
    }
    Ok(KestenReport {
        m,
        dim,
        seed,
        measured: sum.op_norm(),
        free_value: kesten_free_value(m),
        sqrt_m_value: (m as f64).sqrt(),
    })
}

/// `g(n) = ||sum_{i=1}^n u^i x u^{-i}||` and the least-squares exponent of
/// `g(n) ~ n^beta`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    pub dim: usize,
    pub n_max: usize,
    pub seed: u64,
    pub series: Vec<f64>,
    pub beta: f64,
}

/// Growth series for a given unitary `u` and self-adjoint `x`.
pub fn growth_series(u: &TracedMatrix, x: &TracedMatrix, n_max: usize) -> Result<Vec<f64>> {
    crate::error::check_dim(u.dim(), x.dim())?;
    let ua = u.adjoint();
    let mut term = x.clone();
    let mut sum = TracedMatrix::zeros(x.dim());
    let mut out = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        term = &(u * &term) * &ua;
        sum = &sum + &term;
        let h = (&sum + &sum.adjoint()).scale_real(0.5);
        out.push(linalg::hermitian_op_norm(&h));
    }
    Ok(out)
}

/// Slope of `ln g` against `ln n` over the positive entries.
pub fn fitted_exponent(series: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        series.iter().enumerate().filter(|(_, &g)| g > 0.0).map(|(i, &g)| (((i + 1) as f64).ln(), g.ln())).collect();
    least_squares_slope(&pts)
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Haar `u` and an independent zero-diagonal self-adjoint `x` with `||x|| = 1`.
pub fn power_conjugation_growth(dim: usize, n_max: usize, seed: u64) -> Result<GrowthReport> {
    if n_max < 2 {
        return Err(Error::pre("growth series needs N >= 2"));
    }
    let u = sample(&EnsembleSpec::new(EnsembleKind::HaarUnitary, dim, seed))?;
    let w = sample(&EnsembleSpec::new(EnsembleKind::ZeroDiagHaar, dim, seed))?;
    let h = (&w + &w.adjoint()).scale_real(0.5);
    let x = h.scale_real(1.0 / linalg::hermitian_op_norm(&h));
    let series = growth_series(&u, &x, n_max)?;
    let beta = fitted_exponent(&series);
    Ok(GrowthReport { dim, n_max, seed, series, beta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugation_single_block_is_u_itself() {
        let r = conjugation_paving_experiment(1, 32, 3).unwrap();
        assert!((r.measured_norm - 1.0).abs() < 1e-12);
        assert_eq!(r.bound, 1.0);
        assert!(r.slack <= 1e-12);
        assert!(conjugation_paving_experiment(3, 32, 3).is_err());
    }

    #[test]
    fn conjugation_identity_holds() {
        for (n, dim) in [(2, 16), (4, 64), (8, 64), (16, 128)] {
            let r = conjugation_paving_experiment(n, dim, 7).unwrap();
            assert!(r.identity_error.unwrap() <= 1e-12, "{r:?}");
            assert_eq!(r.bound, conjugation_bound(n));
        }
    }

    #[test]
    fn projection_bounds() {
        assert_eq!(half_split_bound(0.1), 0.8);
        let r = projection_paving_experiment(0.5, 8, 64, 1).unwrap();
        assert_eq!(r.bound, 2.0 / 8f64.sqrt());
        assert!(projection_paving_experiment(0.6, 8, 64, 1).is_err());
        assert!(projection_paving_experiment(0.1, 8, 64, 1).is_err());
    }

    #[test]
    fn commuting_projection_control() {
        // e diagonal in the frame of the blocks: compression leaves e unchanged
        let dim = 16;
        let t = 0.25;
        let e = TracedMatrix::from_real_diagonal(&(0..dim).map(|i| if i < 4 { 1.0 } else { 0.0 }).collect::<Vec<_>>());
        let labels: Vec<usize> = (0..dim).map(|i| i % 4).collect();
        let measured = block_diagonal_norm(&e.shift((-t).into()), &labels, 4, true);
        assert!((measured - 0.75).abs() < 1e-14);
    }

    #[test]
    fn kesten_single_unitary() {
        let r = kesten_norm_oracle(1, 32, 0).unwrap();
        assert!((r.measured - 1.0).abs() < 1e-12);
        assert_eq!(kesten_free_value(4), 2.0 * 3f64.sqrt());
    }

    #[test]
    fn growth_examples() {
        let u = sample(&EnsembleSpec::new(EnsembleKind::HaarUnitary, 16, 1)).unwrap();
        let zero = growth_series(&u, &TracedMatrix::zeros(16), 4).unwrap();
        assert!(zero.iter().all(|&g| g == 0.0));
        let r = power_conjugation_growth(32, 4, 2).unwrap();
        assert!((r.series[0] - 1.0).abs() < 1e-12);
        assert!(power_conjugation_growth(32, 1, 2).is_err());
        assert!((fitted_exponent(&[1.0, 2f64.sqrt(), 3f64.sqrt(), 2.0]) - 0.5).abs() < 1e-12);
    }
}

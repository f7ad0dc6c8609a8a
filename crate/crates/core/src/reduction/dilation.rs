use std::f64::consts::TAU;

use serde::Serialize;

use super::steps::STEP_TOL;
use crate::error::{check_dim, Error, Result};
use crate::finite_vn::{MasaFrame, TracedMatrix};
use crate::{c64, linalg};

/// Tolerance of `g^2 = g` and of the constant diagonal of a dilation.
pub const DILATION_TOL: f64 = 1e-8;

/// A projection `g` on `e + p'` whose `e`-corner is a given `y`, with
/// constant diagonal `t` on `e` and `t'` on `p'`.
#[derive(Clone, Debug, Serialize)]
pub struct Dilation {
    pub dim: usize,
    /// Frame indices of `e` followed by those of `p'`.
    pub support: Vec<usize>,
    /// Number of leading `support` entries that belong to `e`.
    pub corner: usize,
    /// Frame coordinates of `g` restricted to `support`, in `support` order.
    #[serde(skip)]
    pub g: TracedMatrix,
    pub t: f64,
    /// `tau(e - y) / tau(p')`.
    pub t_prime: f64,
    /// `t - t'`: the rank of `p'` is rounded up, so `0 <= t - t' < t / rank(p')`.
    pub anchor_gap: f64,
    /// Max entry of `g^2 - g`.
    pub idempotency_error: f64,
    /// Max deviation of the diagonal from `t` on `e` and from `t'` on `p'`.
    pub diagonal_spread: f64,
}

impl Dilation {
    pub fn rank_p(&self) -> usize {
        self.support.len() - self.corner
    }

    /// Max over the support of `|E_A(g) - t|`.
    pub fn anchor_error(&self) -> f64 {
        self.g.diagonal().iter().map(|z| (z.re - self.t).abs()).fold(0.0, f64::max)
    }

    /// `g` as an element of the ambient algebra.
    pub fn embed(&self, frame: &MasaFrame) -> TracedMatrix {
        let mut full = TracedMatrix::zeros(self.dim);
        for (a, &i) in self.support.iter().enumerate() {
            for (b, &j) in self.support.iter().enumerate() {
                full.as_mut_slice()[i * self.dim + j] = self.g[(a, b)];
            }
        }
        frame.from_frame(&full)
    }
}

fn fourier_entry(j: usize, k: usize, r: usize) -> c64 {
    c64::from_polar((r as f64).powf(-0.5), TAU * ((j * k) % r) as f64 / r as f64)
}

/// Rank of `p'`: the least `r` with `r t >= s (1 - t)`, forgiving rounding noise.
fn room_rank(s: usize, t: f64) -> usize {
    let q = s as f64 * (1.0 - t) / t;
    ((q - 1e-9).ceil() as usize).max(1)
}

/// Dilation of the corner element `y_local` (frame coordinates on `e`)
/// using the first indices of `room`.
pub(crate) fn dilate_local(
    y_local: &TracedMatrix,
    e: &[usize],
    room: &[usize],
    t: f64,
    dim: usize,
) -> Result<Dilation> {
    let s = y_local.dim();
    check_dim(e.len(), s)?;
    if !(t > 0.0 && t <= 0.5 + STEP_TOL) {
        return Err(Error::pre("anchor t must lie in (0, 1/2]"));
    }
    let diag_gap = y_local.diagonal().iter().map(|z| (z.re - t).abs()).fold(0.0, f64::max);
    if diag_gap > DILATION_TOL {
        return Err(Error::pre(format!("corner diagonal differs from t by {diag_gap}")));
    }
    let r = room_rank(s, t).max(s);
    if r > room.len() {
        return Err(Error::pre(format!("insufficient room: need {r} free indices, {} available", room.len())));
    }
    let (lam, w) = linalg::hermitian_eigen(y_local);
    if lam[0] < -STEP_TOL || lam[s - 1] > 1.0 + STEP_TOL {
        return Err(Error::pre("corner element must satisfy 0 <= y <= e"));
    }
    let lam: Vec<f64> = lam.iter().map(|l| l.clamp(0.0, 1.0)).collect();
    let amp: Vec<f64> = lam.iter().map(|l| (l * (1.0 - l)).sqrt()).collect();
    // v = F_r[:, ..s] W*, so v (e - y) v* = F diag(1 - lam) F* is Fourier-diagonal
    let v0: Vec<c64> = (0..r).flat_map(|a| (0..s).map(move |k| fourier_entry(a, k, r))).collect();
    let n = s + r;
    let mut g = TracedMatrix::zeros(n);
    {
        let data = g.as_mut_slice();
        for a in 0..s {
            for b in 0..s {
                data[a * n + b] = y_local[(a, b)];
            }
        }
        for a in 0..r {
            for b in 0..s {
                let z: c64 = (0..s).map(|k| v0[a * s + k] * amp[k] * w[(b, k)].conj()).sum();
                data[(s + a) * n + b] = z;
                data[b * n + s + a] = z.conj();
            }
            for c in 0..r {
                let z: c64 = (0..s).map(|k| v0[a * s + k] * (1.0 - lam[k]) * v0[c * s + k].conj()).sum();
                data[(s + a) * n + s + c] = z;
            }
        }
    }
    let idempotency_error = (&g * &g).max_abs_diff(&g);
    let trace_c: f64 = s as f64 - y_local.diagonal().iter().map(|z| z.re).sum::<f64>();
    let t_prime = trace_c / r as f64;
    let d = g.diagonal();
    let diagonal_spread =
        d.iter().enumerate().map(|(i, z)| (z.re - if i < s { t } else { t_prime }).abs()).fold(0.0, f64::max);
    if idempotency_error > DILATION_TOL {
        return Err(Error::invariant(format!("dilation is not a projection: ||g^2 - g|| = {idempotency_error}")));
    }
    if diagonal_spread > DILATION_TOL {
        return Err(Error::invariant(format!("dilation diagonal is not constant: spread {diagonal_spread}")));
    }
    let anchor_gap = t - t_prime;
    if anchor_gap < -DILATION_TOL || anchor_gap >= t / r as f64 + DILATION_TOL {
        return Err(Error::invariant(format!("trace matching misses the rounding slack: t - t' = {anchor_gap}")));
    }
    let mut support = e.to_vec();
    support.extend_from_slice(&room[..r]);
    Ok(Dilation { dim, support, corner: s, g, t, t_prime, anchor_gap, idempotency_error, diagonal_spread })
}

/// Dilates the corner element `y` (supported on the frame indices `e`, with
/// diagonal `t` there) to a projection `g` with `e g e = y`, using a corner
/// `p'` of the complement of `e` whose rank is `tau(e - y) / t` rounded up.
/// On `p'` the partial isometry is a Fourier sub-corner, so the diagonal of
/// `g` there is the constant `t' = tau(e - y) / tau(p')`.
pub fn dilate_to_projection(y: &TracedMatrix, e: &[usize], t: f64, frame: &MasaFrame) -> Result<Dilation> {
    let dim = frame.dim();
    check_dim(dim, y.dim())?;
    let mut inside = vec![false; dim];
    for &i in e {
        if i >= dim || inside[i] {
            return Err(Error::pre("corner indices must be distinct and in range"));
        }
        inside[i] = true;
    }
    if e.is_empty() {
        return Err(Error::pre("corner must be nonempty"));
    }
    let f = frame.to_frame(y);
    let outside = (0..dim)
        .flat_map(|i| (0..dim).map(move |j| (i, j)))
        .filter(|&(i, j)| !(inside[i] && inside[j]))
        .map(|(i, j)| f[(i, j)].norm())
        .fold(0.0, f64::max);
    if outside > STEP_TOL {
        return Err(Error::pre("element is not supported in the corner"));
    }
    if !f.is_hermitian(STEP_TOL) {
        return Err(Error::pre("element is not self-adjoint"));
    }
    let room: Vec<usize> = (0..dim).filter(|&i| !inside[i]).collect();
    dilate_local(&f.principal_submatrix(e), e, &room, t, dim)
}

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::finite_vn::{MasaFrame, TracedMatrix};
use crate::{c64, linalg};

/// Spectral and diagonal checks of the normalization steps.
pub const STEP_TOL: f64 = 1e-10;

/// Tolerance of `E_A(y) = t_k` on each band after flattening.
pub const FLAT_TOL: f64 = 1e-9;

/// `((x + x*) / 2, (x - x*) / 2i)`.
pub fn split_real_imag(x: &TracedMatrix) -> (TracedMatrix, TracedMatrix) {
    let xa = x.adjoint();
    let half = c64::new(0.5, 0.0);
    let re = TracedMatrix::from_fn(x.dim(), |i, j| (x[(i, j)] + xa[(i, j)]) * half);
    let im = TracedMatrix::from_fn(x.dim(), |i, j| (x[(i, j)] - xa[(i, j)]) * c64::new(0.0, -0.5));
    (re, im)
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::pre("eps must lie in (0, 1)"));
    }
    Ok(())
}

/// `y_0 = (x + 5) / 12` for a self-adjoint `x` with `E_A(x) = 0` and
/// `||x|| <= 1`, so that `1/3 <= y_0 <= 1/2`. The spectrum is checked.
pub fn normalize_selfadjoint(x: &TracedMatrix, frame: &MasaFrame) -> Result<TracedMatrix> {
    check_dim(frame.dim(), x.dim())?;
    let scale = x.max_abs().max(1.0);
    if !x.is_hermitian(STEP_TOL * scale) {
        return Err(Error::pre("element is not self-adjoint"));
    }
    let d = frame.to_frame(x).diagonal();
    if d.iter().any(|z| z.norm() > STEP_TOL) {
        return Err(Error::pre("element has a nonzero diagonal in the frame"));
    }
    let y0 = x.shift(c64::new(5.0, 0.0)).scale_real(1.0 / 12.0);
    let ev = linalg::hermitian_eigenvalues(&y0);
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if lo < 1.0 / 3.0 - STEP_TOL || hi > 0.5 + STEP_TOL {
        return Err(Error::pre(format!("operator norm exceeds 1: spectrum of y0 is [{lo}, {hi}]")));
    }
    Ok(y0)
}

/// One nonzero spectral projection of `a`: the frame indices where `a` lies
/// in `[t, t + eps/6)` with `t = 1/3 + (k - 1) eps / 6`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Band {
    /// 1-based band number `k`.
    pub k: usize,
    /// Lower endpoint `t_k`.
    pub anchor: f64,
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandSlices {
    pub eps: f64,
    pub dim: usize,
    /// Nonzero bands in increasing order of `k`.
    pub bands: Vec<Band>,
}

impl BandSlices {
    pub fn count(&self) -> usize {
        self.bands.len()
    }

    /// `eps^-1 + 1`.
    pub fn count_bound(&self) -> f64 {
        1.0 / self.eps + 1.0
    }

    pub fn anchors(&self) -> Vec<f64> {
        self.bands.iter().map(|b| b.anchor).collect()
    }

    /// `e_k` for the `i`-th nonzero band.
    pub fn projection(&self, i: usize, frame: &MasaFrame) -> TracedMatrix {
        let mut d = vec![c64::new(0.0, 0.0); self.dim];
        for &r in &self.bands[i].indices {
            d[r] = c64::new(1.0, 0.0);
        }
        frame.element(&d)
    }

    /// Anchor of every frame index.
    fn anchor_of_index(&self) -> Vec<f64> {
        let mut t = vec![f64::NAN; self.dim];
        for b in &self.bands {
            for &r in &b.indices {
                t[r] = b.anchor;
            }
        }
        t
    }
}

fn band_number(a: f64, eps: f64) -> usize {
    ((a - 1.0 / 3.0) / (eps / 6.0)).floor().max(0.0) as usize
}

fn band_anchor(k0: usize, eps: f64) -> f64 {
    1.0 / 3.0 + k0 as f64 * eps / 6.0
}

fn band_slices_of(a: &[f64], eps: f64) -> Result<BandSlices> {
    check_eps(eps)?;
    let mut by_band: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (r, &v) in a.iter().enumerate() {
        if !(1.0 / 3.0 - STEP_TOL..=0.5 + STEP_TOL).contains(&v) {
            return Err(Error::pre(format!("diagonal value {v} lies outside [1/3, 1/2]")));
        }
        by_band.entry(band_number(v, eps)).or_default().push(r);
    }
    let bands =
        by_band.into_iter().map(|(k0, indices)| Band { k: k0 + 1, anchor: band_anchor(k0, eps), indices }).collect();
    Ok(BandSlices { eps, dim: a.len(), bands })
}

/// Spectral projections of the MASA element `a` (with `1/3 <= a <= 1/2`) on
/// the bands `[1/3 + (k-1) eps/6, 1/3 + k eps/6)`.
pub fn band_slices(a: &TracedMatrix, eps: f64, frame: &MasaFrame) -> Result<BandSlices> {
    let coords = frame.masa_coordinates(a, STEP_TOL)?;
    if coords.iter().any(|z| z.im.abs() > STEP_TOL) {
        return Err(Error::pre("element is not self-adjoint"));
    }
    let re: Vec<f64> = coords.iter().map(|z| z.re).collect();
    band_slices_of(&re, eps)
}

/// Bands of `E_A(y0)`.
pub(crate) fn bands_of(y0: &TracedMatrix, eps: f64, frame: &MasaFrame) -> Result<BandSlices> {
    let d: Vec<f64> = frame.to_frame(y0).diagonal().iter().map(|z| z.re).collect();
    band_slices_of(&d, eps)
}

/// Result of [`flatten`].
#[derive(Clone, Debug)]
pub struct Flattened {
    /// `b^{-1/2} y0 b^{-1/2}`.
    pub y: TracedMatrix,
    /// Frame coordinates of `b = sum_k a_k / t_k`.
    pub b: Vec<f64>,
    /// `||y0 - y||`.
    pub distance: f64,
    /// Max over frame indices of `|E_A(y) - t_k|`.
    pub diagonal_error: f64,
}

/// Rescales `y0` so that its diagonal equals the band anchor on each band.
/// Checks `||y0 - y|| <= eps / 4` and the flat diagonal.
pub fn flatten(y0: &TracedMatrix, bands: &BandSlices, frame: &MasaFrame) -> Result<Flattened> {
    check_dim(frame.dim(), y0.dim())?;
    check_dim(bands.dim, y0.dim())?;
    let f = frame.to_frame(y0);
    let a: Vec<f64> = f.diagonal().iter().map(|z| z.re).collect();
    let t = bands.anchor_of_index();
    for (r, (&ar, &tr)) in a.iter().zip(&t).enumerate() {
        if tr.is_nan() || band_number(ar, bands.eps) != band_number(tr + bands.eps / 12.0, bands.eps) {
            return Err(Error::pre(format!("diagonal entry {r} does not lie in its band")));
        }
    }
    let b: Vec<f64> = a.iter().zip(&t).map(|(ar, tr)| ar / tr).collect();
    let s: Vec<c64> = b.iter().map(|v| c64::new(v.powf(-0.5), 0.0)).collect();
    let yf = f.scale_rows_cols(&s, &s);
    let diagonal_error = yf.diagonal().iter().zip(&t).map(|(z, tr)| (z.re - tr).abs()).fold(0.0, f64::max);
    let distance = linalg::hermitian_op_norm(&f.try_sub(&yf)?);
    if distance > bands.eps / 4.0 + STEP_TOL {
        return Err(Error::invariant(format!("||y0 - y|| = {distance} exceeds eps/4")));
    }
    if diagonal_error > FLAT_TOL {
        return Err(Error::invariant(format!("flattened diagonal misses the anchors by {diagonal_error}")));
    }
    Ok(Flattened { y: frame.from_frame(&yf), b, distance, diagonal_error })
}

/// Splits a band into four contiguous quarters; the `len % 4` remainder
/// indices go one each to the first quarters.
pub fn four_way_split(indices: &[usize]) -> [Vec<usize>; 4] {
    let base = indices.len() / 4;
    let extra = indices.len() % 4;
    let mut out: [Vec<usize>; 4] = Default::default();
    let mut at = 0;
    for (j, q) in out.iter_mut().enumerate() {
        let len = base + usize::from(j < extra);
        q.extend_from_slice(&indices[at..at + len]);
        at += len;
    }
    out
}

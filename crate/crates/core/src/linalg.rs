//! Dense kernels behind the tracial-algebra types. Everything heavy goes
//! through `faer`; the rest of the crate only sees [`TracedMatrix`].

use faer::{Col, Mat, Side};
use num_complex::Complex64 as c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::finite_vn::TracedMatrix;

/// Above this dimension the operator norm is computed iteratively.
pub const DENSE_NORM_MAX_DIM: usize = 2048;

/// Above this dimension a dense operator norm is the top eigenvalue of `x* x`,
/// about twice as fast as a full SVD and accurate to a few ulps at the top.
const GRAM_NORM_MIN_DIM: usize = 256;

const SMALL_MATMUL: usize = 24;

pub(crate) fn matmul(a: &TracedMatrix, b: &TracedMatrix) -> TracedMatrix {
    let n = a.dim();
    if n <= SMALL_MATMUL {
        let (x, y) = (a.as_slice(), b.as_slice());
        let mut out = TracedMatrix::zeros(n);
        let o = out.as_mut_slice();
        for i in 0..n {
            for k in 0..n {
                let xik = x[i * n + k];
                if xik.re == 0.0 && xik.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    o[i * n + j] += xik * y[k * n + j];
                }
            }
        }
        return out;
    }
    let p = a.to_faer() * b.to_faer();
    TracedMatrix::from_faer(p.as_ref())
}

pub(crate) fn singular_values(x: &TracedMatrix) -> Vec<f64> {
    match x.dim() {
        1 => vec![x[(0, 0)].norm()],
        _ => x.to_faer().singular_values().unwrap_or_else(|_| singular_values_via_gram(x)),
    }
}

/// Singular values from the spectrum of `x* x`, non-increasing.
pub(crate) fn singular_values_via_gram(x: &TracedMatrix) -> Vec<f64> {
    let g = matmul(&x.adjoint(), x);
    let mut ev: Vec<f64> = hermitian_eigenvalues(&g).into_iter().map(|l| l.max(0.0).sqrt()).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

pub(crate) fn op_norm(x: &TracedMatrix) -> f64 {
    let n = x.dim();
    if n == 1 {
        return x[(0, 0)].norm();
    }
    if n <= GRAM_NORM_MIN_DIM {
        return singular_values(x).first().copied().unwrap_or(0.0);
    }
    if n <= DENSE_NORM_MAX_DIM {
        let xf = x.to_faer();
        let g = xf.adjoint() * &xf;
        return match g.self_adjoint_eigenvalues(Side::Lower) {
            Ok(ev) => ev.last().copied().unwrap_or(0.0).max(0.0).sqrt(),
            Err(_) => singular_values(x).first().copied().unwrap_or(0.0),
        };
    }
    let xf = x.to_faer();
    let apply = |v: &[c64], out: &mut [c64]| {
        let w = &xf * Col::<c64>::from_fn(n, |i| v[i]);
        let g = xf.adjoint() * &w;
        for (i, o) in out.iter_mut().enumerate() {
            *o = g[i];
        }
    };
    lanczos_largest(n, apply, LANCZOS_MAX_STEPS, LANCZOS_REL_TOL).max(0.0).sqrt()
}

/// Eigenvalues of a Hermitian matrix (lower triangle is read), non-decreasing.
pub(crate) fn hermitian_eigenvalues(h: &TracedMatrix) -> Vec<f64> {
    if h.dim() == 1 {
        return vec![h[(0, 0)].re];
    }
    h.to_faer().self_adjoint_eigenvalues(Side::Lower).expect("self-adjoint eigenvalue iteration did not converge")
}

/// Eigen-decomposition of a Hermitian matrix: eigenvalues non-decreasing and
/// the matrix whose columns are the corresponding eigenvectors.
pub(crate) fn hermitian_eigen(h: &TracedMatrix) -> (Vec<f64>, TracedMatrix) {
    let evd = h.to_faer().self_adjoint_eigen(Side::Lower).expect("self-adjoint eigen-decomposition did not converge");
    let s = evd.S().column_vector();
    let vals = (0..h.dim()).map(|i| s[i].re).collect();
    (vals, TracedMatrix::from_faer(evd.U()))
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub(crate) fn hermitian_fn(h: &TracedMatrix, f: impl Fn(f64) -> f64) -> TracedMatrix {
    let n = h.dim();
    let (vals, vecs) = hermitian_eigen(h);
    let ones = vec![c64::new(1.0, 0.0); n];
    let fv: Vec<c64> = vals.iter().map(|&l| c64::new(f(l), 0.0)).collect();
    matmul(&vecs.scale_rows_cols(&ones, &fv), &vecs.adjoint())
}

pub(crate) fn psd_sqrt(h: &TracedMatrix) -> TracedMatrix {
    hermitian_fn(h, |l| l.max(0.0).sqrt())
}

/// Haar unitary from a square Ginibre matrix: `Q diag(R_jj / |R_jj|)` of its QR
/// decomposition.
pub(crate) fn haar_from_ginibre(g: &TracedMatrix) -> TracedMatrix {
    let n = g.dim();
    let qr = g.to_faer().qr();
    let q = qr.compute_Q();
    let r = qr.R();
    let phases: Vec<c64> = (0..n)
        .map(|j| {
            let d = r[(j, j)];
            if d.norm() == 0.0 {
                c64::new(1.0, 0.0)
            } else {
                d / d.norm()
            }
        })
        .collect();
    TracedMatrix::from_fn(n, |i, j| q[(i, j)] * phases[j])
}

/// Orthogonal projection onto the column space of a `dim x rank` Ginibre
/// matrix (row-major entries): `Q Q*` from its thin QR decomposition.
pub(crate) fn projection_from_ginibre(dim: usize, rank: usize, entries: &[c64]) -> TracedMatrix {
    let g = Mat::<c64>::from_fn(dim, rank, |i, j| entries[i * rank + j]);
    let q = g.qr().compute_thin_Q();
    let p = &q * q.adjoint();
    TracedMatrix::from_faer(p.as_ref())
}

/// Operator norm of a Hermitian matrix: the largest absolute eigenvalue.
pub(crate) fn hermitian_op_norm(h: &TracedMatrix) -> f64 {
    let ev = hermitian_eigenvalues(h);
    ev.first().map_or(0.0, |a| a.abs()).max(ev.last().map_or(0.0, |b| b.abs()))
}

#[cfg(test)]
pub(crate) fn matvec(x: &TracedMatrix, v: &[c64]) -> Vec<c64> {
    let n = x.dim();
    (0..n).map(|i| x.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

const LANCZOS_MAX_STEPS: usize = 400;

/// Relative change of the top Ritz value, over 8 steps, at which Lanczos stops.
const LANCZOS_REL_TOL: f64 = 1e-11;

/// Largest eigenvalue of a Hermitian operator given by its action, via
/// Lanczos with full re-orthogonalization. The start vector is a fixed
/// pseudo-random vector so results are reproducible.
pub(crate) fn lanczos_largest(n: usize, apply: impl Fn(&[c64], &mut [c64]), max_steps: usize, rel_tol: f64) -> f64 {
    let steps = max_steps.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c_05e5 ^ n as u64);
    let mut q: Vec<c64> = (0..n).map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    normalize(&mut q);
    let mut basis: Vec<Vec<c64>> = Vec::with_capacity(steps);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![c64::new(0.0, 0.0); n];
    let mut last = f64::NEG_INFINITY;
    for k in 0..steps {
        apply(&q, &mut w);
        let a = dot(&q, &w).re;
        alpha.push(a);
        basis.push(q.clone());
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let bnorm = norm(&w);
        let check = k + 1 == steps || bnorm <= 1e-13 * a.abs().max(1e-300) || (k + 1) % 8 == 0;
        if check {
            let top = tridiagonal_max(&alpha, &beta);
            if bnorm <= 1e-13 * a.abs().max(1e-300) || (top - last).abs() <= rel_tol * top.abs() {
                return top;
            }
            last = top;
            if k + 1 == steps {
                return top;
            }
        }
        beta.push(bnorm);
        for (qi, wi) in q.iter_mut().zip(&w) {
            *qi = wi / bnorm;
        }
    }
    last
}

fn tridiagonal_max(alpha: &[f64], beta: &[f64]) -> f64 {
    let k = alpha.len();
    if k == 1 {
        return alpha[0];
    }
    let t = Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let ev = t.self_adjoint_eigenvalues(Side::Lower).expect("tridiagonal eigenvalues");
    ev.last().copied().unwrap_or(0.0)
}

fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[c64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(a: &mut [c64]) {
    let s = norm(a);
    for z in a {
        *z /= s;
    }
}

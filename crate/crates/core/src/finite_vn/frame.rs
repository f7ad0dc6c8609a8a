use std::f64::consts::PI;

use num_complex::Complex64 as c64;

use crate::error::{check_dim, Error, Result};
use crate::finite_vn::TracedMatrix;

/// Unitarity tolerance for frame bases (max entry deviation of `U*U - 1`).
pub const FRAME_UNITARY_TOL: f64 = 1e-10;

/// A maximal abelian subalgebra `A = U Diag U*` of `M_dim(C)`, stored through
/// its unitary change of basis `U`. The diagonal MASA uses `U = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MasaFrame {
    basis: TracedMatrix,
    identity: bool,
}

impl MasaFrame {
    pub fn new(basis: TracedMatrix) -> Result<Self> {
        if !basis.is_unitary(FRAME_UNITARY_TOL) {
            return Err(Error::pre("frame basis is not unitary within 1e-10"));
        }
        let identity = basis.max_abs_diff(&TracedMatrix::identity(basis.dim())) == 0.0;
        Ok(Self { basis, identity })
    }

    /// The diagonal MASA.
    pub fn diagonal(dim: usize) -> Self {
        Self { basis: TracedMatrix::identity(dim), identity: true }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &TracedMatrix {
        &self.basis
    }

    pub fn is_diagonal_frame(&self) -> bool {
        self.identity
    }

    /// Coordinates of `x` in the frame: `U* x U`.
    pub fn to_frame(&self, x: &TracedMatrix) -> TracedMatrix {
        if self.identity {
            return x.clone();
        }
        &(&self.basis.adjoint() * x) * &self.basis
    }

    /// Inverse of [`MasaFrame::to_frame`]: `U y U*`.
    pub fn from_frame(&self, y: &TracedMatrix) -> TracedMatrix {
        if self.identity {
            return y.clone();
        }
        &(&self.basis * y) * &self.basis.adjoint()
    }

    /// The MASA element whose frame coordinates are `diag(d)`.
    pub fn element(&self, d: &[c64]) -> TracedMatrix {
        self.from_frame(&TracedMatrix::from_diagonal(d))
    }

    /// Frame-diagonal entries of a MASA element, failing if `x` is not in the MASA.
    pub fn masa_coordinates(&self, x: &TracedMatrix, tol: f64) -> Result<Vec<c64>> {
        check_dim(self.dim(), x.dim())?;
        let y = self.to_frame(x);
        if !y.is_diagonal(tol) {
            return Err(Error::pre("element does not lie in the MASA of this frame"));
        }
        Ok(y.diagonal())
    }
}

/// Discrete-Fourier frame `F[j][k] = dim^{-1/2} exp(2 pi i jk / dim)`.
///
/// Its MASA is perpendicular to the diagonal one: every Fourier-diagonal
/// element has constant diagonal, so `E_diag(b) = tau(b) 1`.
pub fn perpendicular_frame(dim: usize) -> Result<MasaFrame> {
    if dim < 2 {
        return Err(Error::pre("perpendicular frame needs dim >= 2"));
    }
    let s = (dim as f64).powf(-0.5);
    let basis = TracedMatrix::from_fn(dim, |j, k| {
        let phase = 2.0 * PI * ((j * k) % dim) as f64 / dim as f64;
        c64::from_polar(s, phase)
    });
    MasaFrame::new(basis)
}

/// `E_A(x) = U diag(U* x U) U*`.
pub fn conditional_expectation(x: &TracedMatrix, frame: &MasaFrame) -> Result<TracedMatrix> {
    check_dim(frame.dim(), x.dim())?;
    let d = frame.to_frame(x).diagonal();
    Ok(frame.element(&d))
}

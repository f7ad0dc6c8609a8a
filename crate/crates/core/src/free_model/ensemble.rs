use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_vn::TracedMatrix;
use crate::{c64, linalg, random};

/// Random-matrix ensembles standing in for free elements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Haar-distributed unitary.
    HaarUnitary,
    /// Haar unitary minus its diagonal, scaled to unit operator norm.
    ZeroDiagHaar,
    /// Haar-rotated projection of trace `round(t dim) / dim`.
    RandomProjection { t: f64 },
    /// Diagonal unitary with each `n`-th root of unity repeated `dim / n`
    /// times, in seeded-shuffled order.
    RootsOfUnityDiag { n: usize },
}

impl EnsembleKind {
    /// Stream index, so the same seed gives independent draws across kinds.
    fn stream_key(&self) -> u64 {
        match self {
            EnsembleKind::HaarUnitary => 0,
            EnsembleKind::ZeroDiagHaar => 1,
            EnsembleKind::RandomProjection { .. } => 2,
            EnsembleKind::RootsOfUnityDiag { .. } => 3,
        }
    }
}

/// A reproducible ensemble draw: identical specs give bit-identical samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    #[serde(flatten)]
    pub kind: EnsembleKind,
    pub dim: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, dim: usize, seed: u64) -> Self {
        Self { kind, dim, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::pre("ensemble dimension must be at least 2"));
        }
        match self.kind {
            EnsembleKind::RandomProjection { t } => {
                if !(t > 0.0 && t < 1.0) {
                    return Err(Error::pre("projection trace must lie in (0, 1)"));
                }
                if projection_rank(t, self.dim) < 1 {
                    return Err(Error::pre("projection trace rounds to zero at this dimension"));
                }
            }
            EnsembleKind::RootsOfUnityDiag { n } if (n == 0 || self.dim % n != 0) => {
                return Err(Error::pre(format!("root order {n} must divide dim {}", self.dim)));
            }
            _ => {}
        }
        Ok(())
    }
}

pub(crate) fn projection_rank(t: f64, dim: usize) -> usize {
    ((t * dim as f64).round() as usize).min(dim)
}

/// Exponents `k` of the diagonal entries `exp(2 pi i k / n)` of a
/// roots-of-unity sample, in slot order.
pub fn roots_of_unity_exponents(n: usize, dim: usize, seed: u64) -> Result<Vec<usize>> {
    let spec = EnsembleSpec::new(EnsembleKind::RootsOfUnityDiag { n }, dim, seed);
    spec.validate()?;
    let mut rng = random::stream(seed, spec.kind.stream_key());
    let perm = random::permutation(dim, &mut rng);
    let mut exps = vec![0; dim];
    for (k, &slot) in perm.iter().enumerate() {
        exps[slot] = k % n;
    }
    Ok(exps)
}

pub fn root_of_unity(k: usize, n: usize) -> c64 {
    c64::from_polar(1.0, TAU * (k % n) as f64 / n as f64)
}

/// Draws a sample.
pub fn sample(spec: &EnsembleSpec) -> Result<TracedMatrix> {
    spec.validate()?;
    let dim = spec.dim;
    let mut rng = random::stream(spec.seed, spec.kind.stream_key());
    Ok(match spec.kind {
        EnsembleKind::HaarUnitary => linalg::haar_from_ginibre(&random::ginibre(dim, &mut rng)),
        EnsembleKind::ZeroDiagHaar => {
            let u = linalg::haar_from_ginibre(&random::ginibre(dim, &mut rng)).off_diagonal();
            let norm = u.op_norm();
            u.scale_real(1.0 / norm)
        }
        EnsembleKind::RandomProjection { t } => {
            let r = projection_rank(t, dim);
            if r == dim {
                TracedMatrix::identity(dim)
            } else {
                let g = random::ginibre_entries(dim, r, &mut rng);
                linalg::projection_from_ginibre(dim, r, &g)
            }
        }
        EnsembleKind::RootsOfUnityDiag { n } => {
            let exps = roots_of_unity_exponents(n, dim, spec.seed)?;
            let d: Vec<c64> = exps.iter().map(|&k| root_of_unity(k, n)).collect();
            TracedMatrix::from_diagonal(&d)
        }
    })
}

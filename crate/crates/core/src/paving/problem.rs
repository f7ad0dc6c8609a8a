use std::sync::Arc;

use crate::c64;
use crate::error::{check_dim, Result};
use crate::finite_vn::{MasaFrame, TracedMatrix};
use crate::paving::{Partition, PavingReport};

/// Below this, `||x - E(x)||` is treated as zero: ratio 0, paving number 1.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Threshold, relative to `||x - E(x)||`, of the spectral tail in default reports.
pub const DEFAULT_TAIL_EPS: f64 = 0.5;

/// An element prepared for repeated defect evaluation.
///
/// In frame coordinates `compress(x) - E(x)` is block diagonal with zero
/// diagonal, so its operator norm is the largest operator norm of the
/// principal blocks of the off-diagonal part of `U* x U`.
#[derive(Clone, Debug)]
pub struct PavingProblem {
    frame: Arc<MasaFrame>,
    offdiag: TracedMatrix,
    base: f64,
}

impl PavingProblem {
    pub fn new(x: &TracedMatrix, frame: Arc<MasaFrame>) -> Result<Self> {
        check_dim(frame.dim(), x.dim())?;
        let offdiag = frame.to_frame(x).off_diagonal();
        let base = offdiag.op_norm();
        Ok(Self { frame, offdiag, base })
    }

    pub fn dim(&self) -> usize {
        self.offdiag.dim()
    }

    pub fn frame(&self) -> &Arc<MasaFrame> {
        &self.frame
    }

    /// `||x - E(x)||`.
    pub fn base_norm(&self) -> f64 {
        self.base
    }

    pub fn is_degenerate(&self) -> bool {
        self.base < DEGENERATE_NORM
    }

    /// Frame coordinates of `x - E(x)`.
    pub fn offdiag(&self) -> &TracedMatrix {
        &self.offdiag
    }

    pub fn block_matrix(&self, idx: &[usize]) -> TracedMatrix {
        self.offdiag.principal_submatrix(idx)
    }

    /// Operator norm of one diagonal block of `compress(x) - E(x)`.
    pub fn block_norm(&self, idx: &[usize]) -> f64 {
        match idx.len() {
            0 | 1 => 0.0,
            2 => {
                let (a, b) = (idx[0], idx[1]);
                self.offdiag[(a, b)].norm().max(self.offdiag[(b, a)].norm())
            }
            _ => self.block_matrix(idx).op_norm(),
        }
    }

    pub fn block_norms(&self, assignment: &[usize], n_blocks: usize) -> Vec<f64> {
        blocks_of(assignment, n_blocks).iter().map(|b| self.block_norm(b)).collect()
    }

    /// `||compress(x) - E(x)||`.
    pub fn defect(&self, assignment: &[usize], n_blocks: usize) -> f64 {
        self.block_norms(assignment, n_blocks).into_iter().fold(0.0, f64::max)
    }

    pub fn ratio(&self, defect: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            defect / self.base
        }
    }

    /// Fraction of singular values of `compress(x) - E(x)` above
    /// `tail_eps * ||x - E(x)||`.
    pub fn spectral_tail(&self, assignment: &[usize], n_blocks: usize, tail_eps: f64) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        let thr = tail_eps * self.base;
        let count: usize = blocks_of(assignment, n_blocks)
            .iter()
            .filter(|b| b.len() > 1)
            .map(|b| self.block_matrix(b).singular_values().iter().filter(|&&s| s > thr).count())
            .sum();
        count as f64 / self.dim() as f64
    }

    pub fn report(&self, part: &Partition, strategy: &str, seed: u64, tail_eps: f64, elapsed_ms: f64) -> PavingReport {
        let defect = self.defect(part.assignment(), part.n_blocks());
        PavingReport {
            n_blocks: part.n_blocks(),
            effective_blocks: part.effective_blocks(),
            defect,
            ratio: self.ratio(defect),
            spectral_tail: self.spectral_tail(part.assignment(), part.n_blocks(), tail_eps),
            strategy: strategy.to_string(),
            seed,
            elapsed_ms,
        }
    }

    /// Frame coordinates of `compress(x) - E(x)`.
    pub fn compressed_offdiag(&self, assignment: &[usize]) -> TracedMatrix {
        mask_blocks(&self.offdiag, assignment)
    }
}

pub(crate) fn blocks_of(assignment: &[usize], n_blocks: usize) -> Vec<Vec<usize>> {
    let mut blocks = vec![Vec::new(); n_blocks];
    for (i, &b) in assignment.iter().enumerate() {
        blocks[b].push(i);
    }
    blocks
}

/// Zeroes the entries of `y` joining different blocks.
pub(crate) fn mask_blocks(y: &TracedMatrix, assignment: &[usize]) -> TracedMatrix {
    let n = y.dim();
    let mut out = y.clone();
    let data = out.as_mut_slice();
    for i in 0..n {
        for j in 0..n {
            if assignment[i] != assignment[j] {
                data[i * n + j] = c64::new(0.0, 0.0);
            }
        }
    }
    out
}

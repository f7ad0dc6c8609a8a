use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::c64;
use crate::error::{Error, Result};
use crate::finite_vn::{MasaFrame, TracedMatrix};

/// An assignment of the frame's basis indices to blocks `0..n_blocks`.
///
/// Block `i` defines the projection `p_i = U diag(1_{block i}) U*` in the MASA
/// of the frame. Empty blocks are allowed; [`Partition::effective_blocks`]
/// counts the nonempty ones.
#[derive(Clone, Debug)]
pub struct Partition {
    assignment: Vec<usize>,
    n_blocks: usize,
    frame: Arc<MasaFrame>,
}

impl Partition {
    pub fn new(assignment: Vec<usize>, n_blocks: usize, frame: Arc<MasaFrame>) -> Result<Self> {
        if assignment.len() != frame.dim() {
            return Err(Error::DimensionMismatch { expected: frame.dim(), found: assignment.len() });
        }
        if n_blocks == 0 {
            return Err(Error::pre("a partition needs at least one block"));
        }
        if let Some(&b) = assignment.iter().find(|&&b| b >= n_blocks) {
            return Err(Error::pre(format!("block label {b} out of range for {n_blocks} blocks")));
        }
        Ok(Self { assignment, n_blocks, frame })
    }

    /// Partition over the diagonal MASA of `M_dim`.
    pub fn diagonal(assignment: Vec<usize>, n_blocks: usize) -> Result<Self> {
        let frame = Arc::new(MasaFrame::diagonal(assignment.len().max(1)));
        Self::new(assignment, n_blocks, frame)
    }

    /// Labels are taken as given; `n_blocks` is one more than the largest label.
    pub fn from_labels(assignment: Vec<usize>, frame: Arc<MasaFrame>) -> Result<Self> {
        let n = assignment.iter().copied().max().map_or(1, |m| m + 1);
        Self::new(assignment, n, frame)
    }

    pub fn from_blocks(blocks: &[Vec<usize>], frame: Arc<MasaFrame>) -> Result<Self> {
        let dim = frame.dim();
        let mut assignment = vec![usize::MAX; dim];
        for (b, block) in blocks.iter().enumerate() {
            for &i in block {
                if i >= dim {
                    return Err(Error::pre(format!("index {i} out of range for dim {dim}")));
                }
                if assignment[i] != usize::MAX {
                    return Err(Error::pre(format!("index {i} appears in two blocks")));
                }
                assignment[i] = b;
            }
        }
        if assignment.contains(&usize::MAX) {
            return Err(Error::pre("blocks do not cover every index"));
        }
        Self::new(assignment, blocks.len().max(1), frame)
    }

    pub fn one_block(frame: Arc<MasaFrame>) -> Self {
        let dim = frame.dim();
        Self { assignment: vec![0; dim], n_blocks: 1, frame }
    }

    pub fn singletons(frame: Arc<MasaFrame>) -> Self {
        let dim = frame.dim();
        Self { assignment: (0..dim).collect(), n_blocks: dim, frame }
    }

    pub fn dim(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn frame(&self) -> &Arc<MasaFrame> {
        &self.frame
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_blocks];
        for &b in &self.assignment {
            sizes[b] += 1;
        }
        sizes
    }

    pub fn effective_blocks(&self) -> usize {
        self.block_sizes().iter().filter(|&&s| s > 0).count()
    }

    /// Index sets of all blocks (empty ones included), each sorted.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.n_blocks];
        for (i, &b) in self.assignment.iter().enumerate() {
            blocks[b].push(i);
        }
        blocks
    }

    /// Normalized traces `tau(p_i)`.
    pub fn block_traces(&self) -> Vec<f64> {
        let d = self.dim() as f64;
        self.block_sizes().into_iter().map(|s| s as f64 / d).collect()
    }

    /// Frame coordinates of `p_i` (0/1 indicator).
    pub fn indicator(&self, block: usize) -> Vec<c64> {
        self.assignment.iter().map(|&b| c64::new(if b == block { 1.0 } else { 0.0 }, 0.0)).collect()
    }

    pub fn projection(&self, block: usize) -> TracedMatrix {
        self.frame.element(&self.indicator(block))
    }

    pub fn projections(&self) -> Vec<TracedMatrix> {
        (0..self.n_blocks).map(|b| self.projection(b)).collect()
    }

    /// Both partitions live over the same MASA frame.
    pub fn same_frame(&self, other: &Partition) -> bool {
        Arc::ptr_eq(&self.frame, &other.frame) || *self.frame == *other.frame
    }

    /// Equal as set partitions: same nonempty blocks, labels ignored.
    pub fn same_blocks(&self, other: &Partition) -> bool {
        if self.dim() != other.dim() || !self.same_frame(other) {
            return false;
        }
        let mut fwd = vec![usize::MAX; self.n_blocks];
        let mut bwd = vec![usize::MAX; other.n_blocks];
        for (&a, &b) in self.assignment.iter().zip(&other.assignment) {
            if fwd[a] == usize::MAX && bwd[b] == usize::MAX {
                fwd[a] = b;
                bwd[b] = a;
            } else if fwd[a] != b || bwd[b] != a {
                return false;
            }
        }
        true
    }

    /// Relabels nonempty blocks `0..k` in order of first appearance.
    pub fn canonical(&self) -> Partition {
        let mut map = vec![usize::MAX; self.n_blocks];
        let mut next = 0;
        let assignment = self
            .assignment
            .iter()
            .map(|&b| {
                if map[b] == usize::MAX {
                    map[b] = next;
                    next += 1;
                }
                map[b]
            })
            .collect();
        Partition { assignment, n_blocks: next.max(1), frame: Arc::clone(&self.frame) }
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.assignment.serialize(s)
    }
}

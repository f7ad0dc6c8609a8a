use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::finite_vn::{MasaFrame, TracedMatrix};
use crate::paving::problem::PavingProblem;
use crate::paving::Partition;

/// Largest dimension accepted by exhaustive enumeration (Bell(12) ~ 4.2e6).
pub const EXHAUSTIVE_MAX_DIM: usize = 12;

/// Result of exhaustive paving-number computation.
#[derive(Clone, Debug, Serialize)]
pub struct ExactPaving {
    /// Smallest `n <= max_n` achieving ratio `<= eps`; `None` if there is none.
    pub n: Option<usize>,
    pub max_n: usize,
    pub eps: f64,
    /// Entry `k - 1`: smallest ratio over partitions with at most `k` blocks.
    pub best_ratio: Vec<f64>,
    /// A partition attaining `best_ratio[n - 1]` when `n` exists.
    pub witness: Option<Partition>,
}

/// Calls `f` on every restricted-growth string of length `dim` using at most
/// `max_blocks` labels, with the number of labels used.
pub fn for_each_set_partition(dim: usize, max_blocks: usize, mut f: impl FnMut(&[usize], usize)) {
    if dim == 0 || max_blocks == 0 {
        return;
    }
    let mut a = vec![0usize; dim];
    // m[i] = 1 + max(a[0..=i])
    let mut m = vec![1usize; dim];
    loop {
        f(&a, m[dim - 1]);
        // rightmost position that can still be incremented
        let mut i = dim - 1;
        loop {
            if i == 0 {
                return;
            }
            let prev_max = m[i - 1];
            if a[i] < prev_max && a[i] + 1 < max_blocks {
                break;
            }
            i -= 1;
        }
        a[i] += 1;
        m[i] = m[i - 1].max(a[i] + 1);
        for j in i + 1..dim {
            a[j] = 0;
            m[j] = m[i];
        }
    }
}

/// Paving number `n(x, eps)` over the MASA of `frame` by enumerating all set
/// partitions with at most `max_n` blocks.
pub fn paving_number_exact(x: &TracedMatrix, eps: f64, frame: Arc<MasaFrame>, max_n: usize) -> Result<ExactPaving> {
    if x.dim() > EXHAUSTIVE_MAX_DIM {
        return Err(Error::pre(format!(
            "exhaustive paving is limited to dim <= {EXHAUSTIVE_MAX_DIM}, got {}",
            x.dim()
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::pre("eps must lie in (0, 1)"));
    }
    if max_n == 0 {
        return Err(Error::pre("max_n must be at least 1"));
    }
    let problem = PavingProblem::new(x, Arc::clone(&frame))?;
    let max_n = max_n.min(x.dim());
    if problem.is_degenerate() {
        return Ok(ExactPaving {
            n: Some(1),
            max_n,
            eps,
            best_ratio: vec![0.0; max_n],
            witness: Some(Partition::one_block(frame)),
        });
    }
    let mut best = vec![f64::INFINITY; max_n];
    let mut best_at: Vec<Vec<usize>> = vec![Vec::new(); max_n];
    for_each_set_partition(x.dim(), max_n, |a, used| {
        let r = problem.ratio(problem.defect(a, used));
        if r < best[used - 1] {
            best[used - 1] = r;
            best_at[used - 1] = a.to_vec();
        }
    });
    // at most k blocks: running minimum, keeping the smallest witness
    let mut witness_idx = vec![0; max_n];
    for k in 0..max_n {
        witness_idx[k] = k;
        if k > 0 && best[k - 1] <= best[k] {
            best[k] = best[k - 1];
            witness_idx[k] = witness_idx[k - 1];
        }
    }
    let n = best.iter().position(|&r| r <= eps).map(|k| k + 1);
    let witness = n
        .map(|n| {
            let a = best_at[witness_idx[n - 1]].clone();
            Partition::from_labels(a, frame)
        })
        .transpose()?;
    Ok(ExactPaving { n, max_n, eps, best_ratio: best, witness })
}

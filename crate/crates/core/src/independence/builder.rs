use std::sync::Arc;

use super::certificate::{certify_alpha, BlockData};
use super::mixing::{search, LinTerm, MixingObjective, QuadTerm};
use super::residual::{k_independence_residual, IndependenceReport};
use super::words::LevelScan;
use crate::c64;
use crate::error::{check_dim, Error, Result};
use crate::finite_vn::{MasaFrame, TracedMatrix};
use crate::paving::Partition;

/// Words up to this level are scanned in the builder's report.
pub const BUILDER_WORD_LEVEL: usize = 2;

/// Word budget of the builder's report.
pub const BUILDER_WORD_BUDGET: usize = 100_000;

const PIECE_FLOOR: f64 = 1e-14;

/// Mixing terms for one halving round: for each block pair `(i, j)` the
/// pieces `q_i xi q_j` of the test vectors (quadratic terms between pieces
/// on the same pair, linear terms `q_i xi q_j xi* q_i`), and the diagonal
/// of each `Y` element cut to each block.
fn round_objective(data: &BlockData, blocks: &[Vec<usize>]) -> MixingObjective {
    let dim = blocks.iter().map(|b| b.len()).sum::<usize>();
    let inv = 1.0 / dim as f64;
    let mut quad = Vec::new();
    let mut lin = Vec::new();
    for bi in blocks {
        for bj in blocks {
            let mass: Vec<f64> = data
                .xi
                .iter()
                .map(|x| bi.iter().map(|&r| bj.iter().map(|&t| x[(r, t)].norm_sqr()).sum::<f64>()).sum::<f64>() * inv)
                .collect();
            for a in 0..data.xi.len() {
                for b in a..data.xi.len() {
                    let norm = (mass[a] * mass[b]).sqrt();
                    if norm <= PIECE_FLOOR {
                        continue;
                    }
                    let (x1, x2) = (&data.xi[a], &data.xi[b]);
                    let k = bi.iter().flat_map(|&r| bj.iter().map(move |&t| x1[(r, t)].conj() * x2[(r, t)])).collect();
                    quad.push(QuadTerm { rows: bi.clone(), cols: bj.clone(), k, norm });
                }
            }
            for (x, &mass) in data.xi.iter().zip(&mass) {
                if mass <= PIECE_FLOOR {
                    continue;
                }
                let w = bi.iter().map(|&r| c64::new(bj.iter().map(|&t| x[(r, t)].norm_sqr()).sum(), 0.0)).collect();
                lin.push(LinTerm { idx: bi.clone(), w, norm: mass });
            }
        }
    }
    // the data's eta holds Y first; the xi xi* entries are covered by pieces
    let n_y = data.eta.len() - data.xi.len();
    for e in &data.eta[..n_y] {
        for b in blocks {
            let w: Vec<c64> = b.iter().map(|&r| e[r]).collect();
            let norm = w.iter().map(|z| z.norm()).sum::<f64>() * inv;
            if norm > PIECE_FLOOR {
                lin.push(LinTerm { idx: b.clone(), w, norm });
            }
        }
    }
    MixingObjective { dim, quad, lin }
}

/// Builds an equal-trace partition into `2^n` blocks by `n` halving rounds.
/// Round `r` runs the mixing search within the current blocks, with stopping
/// level `alpha_target 2^-(r+2)` and `budget` proposals, and splits block
/// `b` into `2b` (sign `+1`) and `2b + 1` (sign `-1`). The report carries
/// the level-1 and level-2 word residuals, the certified `alpha` of the
/// result and each round's mixing objective. The target is not enforced.
pub fn build_independent_partition(
    xs: &[TracedMatrix],
    ys: &[TracedMatrix],
    n: u32,
    alpha_target: f64,
    frame: Arc<MasaFrame>,
    budget: usize,
    seed: u64,
) -> Result<(Partition, IndependenceReport)> {
    let dim = frame.dim();
    if n >= usize::BITS || dim % (1usize << n) != 0 {
        return Err(Error::pre(format!("dimension {dim} is not divisible by 2^{n}")));
    }
    if !(alpha_target >= 0.0) {
        return Err(Error::pre("alpha target must be nonnegative"));
    }
    for x in xs.iter().chain(ys) {
        check_dim(dim, x.dim())?;
    }
    let mut part = Partition::one_block(frame.clone());
    let mut objectives = Vec::new();
    for r in 0..n {
        let data = BlockData::new(&part, xs, ys)?;
        let blocks = part.blocks();
        let obj = round_objective(&data, &blocks);
        let delta = alpha_target * 0.5f64.powi(r as i32 + 2);
        let out = search(&obj, &part, delta, budget, seed ^ ((r as u64 + 1) << 40))?;
        objectives.push(out.objective);
        let labels = part.assignment().iter().zip(&out.signs).map(|(&b, &s)| 2 * b + usize::from(s < 0)).collect();
        part = Partition::new(labels, 1 << (r + 1), frame.clone())?;
    }
    let mut report = if xs.is_empty() {
        let empty = vec![LevelScan::default(); BUILDER_WORD_LEVEL];
        IndependenceReport::from_scans(empty)
    } else {
        k_independence_residual(&part, xs, BUILDER_WORD_LEVEL, BUILDER_WORD_BUDGET, seed)?
    };
    report.certified_alpha = Some(certify_alpha(&part, xs, ys)?.alpha);
    report.round_objectives = objectives;
    Ok((part, report))
}

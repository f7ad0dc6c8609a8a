use std::f64::consts::PI;

use serde::Serialize;

use super::words::{Alphabet, LevelScan};
use crate::c64;
use crate::error::{check_dim, Error, Result};
use crate::finite_vn::{MasaFrame, TracedMatrix};
use crate::paving::Partition;

/// Largest word level accepted by the residual scans.
pub const MAX_WORD_LEVEL: usize = 4;

/// Letters whose `L2` norm falls below this are dropped as zero.
pub(crate) const ZERO_NORM: f64 = 1e-12;

/// Max `|tau(word)|` per level for alternating words `a_1 x_1 ... a_j x_j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub max_k: usize,
    /// Entry `j - 1` holds level `j`.
    pub residual_per_level: Vec<f64>,
    pub word_count: u64,
    pub evaluated: u64,
    pub coverage: f64,
    /// Max over levels.
    pub achieved_alpha: f64,
    /// Exact supremum bound from [`certify_alpha`](super::certify_alpha), when computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified_alpha: Option<f64>,
    /// Worst word per level, e.g. `"q1.x0.w3.x0"`.
    pub worst_words: Vec<String>,
    /// Mixing objective reached in each halving round of a builder.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub round_objectives: Vec<f64>,
}

impl IndependenceReport {
    pub(crate) fn from_scans(scans: Vec<LevelScan>) -> Self {
        let word_count = scans.iter().map(|s| s.count).fold(0u64, u64::saturating_add);
        let evaluated: u64 = scans.iter().map(|s| s.evaluated).sum();
        let residual_per_level: Vec<f64> = scans.iter().map(|s| s.max).collect();
        Self {
            max_k: scans.len(),
            achieved_alpha: residual_per_level.iter().copied().fold(0.0, f64::max),
            residual_per_level,
            word_count,
            evaluated,
            coverage: if word_count == 0 { 1.0 } else { (evaluated as f64 / word_count as f64).min(1.0) },
            certified_alpha: None,
            worst_words: scans.into_iter().map(|s| s.worst).collect(),
            round_objectives: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn l2(d: &[c64]) -> f64 {
    (d.iter().map(|z| z.norm_sqr()).sum::<f64>() / d.len() as f64).sqrt()
}

/// Centers a frame-diagonal vector and scales it to unit `L2` norm; `None`
/// when nothing is left.
pub(crate) fn unit_centered(d: &[c64]) -> Option<Vec<c64>> {
    let mean = d.iter().sum::<c64>() / d.len() as f64;
    let c: Vec<c64> = d.iter().map(|z| z - mean).collect();
    let n = l2(&c);
    (n > ZERO_NORM).then(|| c.into_iter().map(|z| z / n).collect())
}

/// Frame coordinates of `x - E_A(x)` scaled to unit `L2` norm, or `None` for
/// a MASA element.
pub(crate) fn unit_offdiag(x: &TracedMatrix, frame: &MasaFrame) -> Result<Option<TracedMatrix>> {
    check_dim(frame.dim(), x.dim())?;
    let y = frame.to_frame(x).off_diagonal();
    let n = y.l2_norm();
    Ok((n > ZERO_NORM).then(|| y.scale_real(1.0 / n)))
}

/// Block letters of a partition: `q_i - tau(q_i)` for every block and the
/// powers `w^j`, `1 <= j < N`, of `w = sum_i exp(2 pi i k / N) q_k`, each
/// centered and at unit `L2` norm.
pub(crate) fn block_letters(part: &Partition) -> (Vec<String>, Vec<Vec<c64>>) {
    let nb = part.n_blocks();
    let mut labels = Vec::new();
    let mut diags = Vec::new();
    for b in 0..nb {
        if let Some(d) = unit_centered(&part.indicator(b)) {
            labels.push(format!("q{b}"));
            diags.push(d);
        }
    }
    for j in 1..nb {
        let d: Vec<c64> = part
            .assignment()
            .iter()
            .map(|&b| c64::from_polar(1.0, 2.0 * PI * ((j * b) % nb) as f64 / nb as f64))
            .collect();
        if let Some(d) = unit_centered(&d) {
            labels.push(format!("w{j}"));
            diags.push(d);
        }
    }
    (labels, diags)
}

fn x_letters(xs: &[TracedMatrix], frame: &MasaFrame) -> Result<(Vec<String>, Vec<TracedMatrix>)> {
    let mut labels = Vec::new();
    let mut mats = Vec::new();
    for (i, x) in xs.iter().enumerate() {
        if let Some(y) = unit_offdiag(x, frame)? {
            labels.push(format!("x{i}"));
            mats.push(y);
        }
    }
    Ok((labels, mats))
}

fn check_level(k: usize, xs: &[TracedMatrix]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::pre("independence residual needs a non-empty test set"));
    }
    if k == 0 || k > MAX_WORD_LEVEL {
        return Err(Error::pre(format!("word level must lie in 1..={MAX_WORD_LEVEL}")));
    }
    Ok(())
}

/// Residuals of the alternating words built from the block letters of `part`
/// and the test elements `xs`. Each `x` is replaced by `x - E_A(x)` and every
/// letter is scaled to unit `L2` norm, so level-2 values are directly
/// comparable with the bilinear bound of [`certify_alpha`](super::certify_alpha).
pub fn k_independence_residual(
    part: &Partition,
    xs: &[TracedMatrix],
    k: usize,
    budget: usize,
    seed: u64,
) -> Result<IndependenceReport> {
    check_level(k, xs)?;
    let (d_labels, diags) = block_letters(part);
    let (x_labels, mats) = x_letters(xs, part.frame())?;
    let alphabet = Alphabet { d_labels, diags, x_labels, xs: mats };
    Ok(IndependenceReport::from_scans(alphabet.scan(k, budget, seed)))
}

/// As [`k_independence_residual`], with explicit MASA letters instead of
/// the letters of a partition. Each letter is centered and normalized.
pub fn k_independence_residual_with_letters(
    frame: &MasaFrame,
    letters: &[TracedMatrix],
    xs: &[TracedMatrix],
    k: usize,
    budget: usize,
    seed: u64,
) -> Result<IndependenceReport> {
    check_level(k, xs)?;
    let mut d_labels = Vec::new();
    let mut diags = Vec::new();
    for (i, a) in letters.iter().enumerate() {
        let coords = frame.masa_coordinates(a, 1e-9)?;
        if let Some(d) = unit_centered(&coords) {
            d_labels.push(format!("a{i}"));
            diags.push(d);
        }
    }
    let (x_labels, mats) = x_letters(xs, frame)?;
    let alphabet = Alphabet { d_labels, diags, x_labels, xs: mats };
    Ok(IndependenceReport::from_scans(alphabet.scan(k, budget, seed)))
}

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::finite_vn::TracedMatrix;
use crate::{c64, random};

/// Largest pair level accepted by [`freeness_residual`].
pub const MAX_FREENESS_LEVEL: usize = 4;

/// Trace residuals of centered alternating words.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreenessReport {
    /// Words have between 2 and `2k` letters.
    pub k: usize,
    /// Entry `j - 1`: max `|tau(word)|` over words of `2j - 1` or `2j` letters
    /// (`j = 1` holds only 2-letter words).
    pub residual_per_level: Vec<f64>,
    pub word_count: u64,
    pub evaluated: u64,
    pub coverage: f64,
    pub residual: f64,
    pub worst_word: String,
}

struct Letter {
    set: usize,
    label: String,
    mat: TracedMatrix,
}

fn letters(elements: &[TracedMatrix]) -> Vec<Letter> {
    let center = |x: &TracedMatrix| x.shift(-x.trace());
    let mut out = Vec::new();
    for (i, x) in elements.iter().enumerate() {
        let a = center(x);
        let b = center(&x.adjoint());
        // one element: x and x* play the two sets
        let set_b = if elements.len() == 1 { 1 } else { i };
        let same = a.max_abs_diff(&b) == 0.0;
        out.push(Letter { set: i, label: format!("e{i}"), mat: a });
        if !same || elements.len() == 1 {
            out.push(Letter { set: set_b, label: format!("e{i}*"), mat: b });
        }
    }
    out
}

/// Max `|tau(a_1 a_2 ... a_L)|` over words of centered letters with adjacent
/// letters from different elements, `2 <= L <= 2k`. The letters of element
/// `x` are `x - tau(x)` and `x* - tau(x*)`; a single element alternates with
/// its own adjoint. Exhaustive when the word count is at most `budget`,
/// otherwise `budget` words sampled uniformly within each length.
pub fn freeness_residual(elements: &[TracedMatrix], k: usize, budget: usize, seed: u64) -> Result<FreenessReport> {
    if elements.is_empty() {
        return Err(Error::pre("freeness residual needs at least one element"));
    }
    if k == 0 || k > MAX_FREENESS_LEVEL {
        return Err(Error::pre(format!("level must lie in 1..={MAX_FREENESS_LEVEL}")));
    }
    if budget == 0 {
        return Err(Error::pre("word budget must be positive"));
    }
    let dim = elements[0].dim();
    if elements.iter().any(|e| e.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: elements.iter().map(|e| e.dim()).find(|&d| d != dim).unwrap(),
        });
    }
    let letters = letters(elements);
    let nl = letters.len();
    let max_len = 2 * k;
    // count[len][a]: alternating words of length len starting with letter a
    let mut count = vec![vec![0u64; nl]; max_len + 1];
    for a in 0..nl {
        count[1][a] = 1;
    }
    for len in 2..=max_len {
        for a in 0..nl {
            count[len][a] = (0..nl).filter(|&b| letters[b].set != letters[a].set).map(|b| count[len - 1][b]).sum();
        }
    }
    let total: u64 = (2..=max_len).map(|len| count[len].iter().sum::<u64>()).sum();
    let words: Vec<Vec<usize>> = if total <= budget as u64 {
        let mut all = Vec::new();
        for len in 2..=max_len {
            enumerate(&letters, len, &mut Vec::new(), &mut all);
        }
        all
    } else {
        let mut rng = random::stream(seed, 0xf4ee);
        let per_len = (budget / (max_len - 1)).max(1);
        let mut out = Vec::new();
        for len in 2..=max_len {
            for _ in 0..per_len {
                let mut w = Vec::with_capacity(len);
                let mut prev: Option<usize> = None;
                for pos in 0..len {
                    let rem = len - pos;
                    let allowed = |b: usize| prev.map_or(true, |p| letters[b].set != letters[p].set);
                    let tot: u64 = (0..nl).filter(|&b| allowed(b)).map(|b| count[rem][b]).sum();
                    let mut pick = rng.random_range(0..tot);
                    let b = (0..nl)
                        .filter(|&b| allowed(b))
                        .find(|&b| {
                            if pick < count[rem][b] {
                                true
                            } else {
                                pick -= count[rem][b];
                                false
                            }
                        })
                        .unwrap();
                    w.push(b);
                    prev = Some(b);
                }
                out.push(w);
            }
        }
        out
    };

    let mut cache: HashMap<Vec<usize>, TracedMatrix> = HashMap::new();
    let mut per_level = vec![0.0f64; k];
    let mut worst = (0.0f64, String::new());
    for w in &words {
        let h = w.len().div_ceil(2);
        let p = segment(&letters, &w[..h], &mut cache);
        let q = segment(&letters, &w[h..], &mut cache);
        let v = trace_of_product(&p, &q).norm();
        let level = w.len().div_ceil(2) - 1;
        per_level[level] = per_level[level].max(v);
        if v > worst.0 || worst.1.is_empty() {
            worst = (v.max(worst.0), w.iter().map(|&i| letters[i].label.as_str()).collect::<Vec<_>>().join("."));
        }
    }
    let residual = per_level.iter().copied().fold(0.0, f64::max);
    Ok(FreenessReport {
        k,
        residual_per_level: per_level,
        word_count: total,
        evaluated: words.len() as u64,
        coverage: (words.len() as f64 / total as f64).min(1.0),
        residual,
        worst_word: worst.1,
    })
}

fn enumerate(letters: &[Letter], len: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if prefix.len() == len {
        out.push(prefix.clone());
        return;
    }
    for b in 0..letters.len() {
        if prefix.last().map_or(true, |&p| letters[p].set != letters[b].set) {
            prefix.push(b);
            enumerate(letters, len, prefix, out);
            prefix.pop();
        }
    }
}

fn segment(letters: &[Letter], s: &[usize], cache: &mut HashMap<Vec<usize>, TracedMatrix>) -> TracedMatrix {
    if s.len() == 1 {
        return letters[s[0]].mat.clone();
    }
    if let Some(m) = cache.get(s) {
        return m.clone();
    }
    let head = segment(letters, &s[..s.len() - 1], cache);
    let m = &head * &letters[s[s.len() - 1]].mat;
    cache.insert(s.to_vec(), m.clone());
    m
}

/// `tau(p q)` without forming the product.
pub(crate) fn trace_of_product(p: &TracedMatrix, q: &TracedMatrix) -> c64 {
    let n = p.dim();
    let mut s = c64::new(0.0, 0.0);
    for r in 0..n {
        for t in 0..n {
            s += p[(r, t)] * q[(t, r)];
        }
    }
    s / n as f64
}

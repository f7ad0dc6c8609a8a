//! Trace evaluation of alternating words `d_1 x_1 d_2 x_2 ... d_j x_j` where
//! the `d` letters are diagonal in frame coordinates and the `x` letters are
//! dense. A word splits as `d_1 P d_mid Q` with `P`, `Q` dense segments, so
//! `tau = m^-1 d_1^T (P o Q^T) d_mid` and words sharing `(P, Q)` share work.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::finite_vn::TracedMatrix;
use crate::{c64, par, random};

/// Hard cap on words evaluated per level.
pub const MAX_WORDS_PER_LEVEL: usize = 100_000;

pub(crate) struct Alphabet {
    pub d_labels: Vec<String>,
    /// Frame-diagonal entries of each diagonal letter.
    pub diags: Vec<Vec<c64>>,
    pub x_labels: Vec<String>,
    /// Frame coordinates of each dense letter.
    pub xs: Vec<TracedMatrix>,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct LevelScan {
    pub max: f64,
    pub worst: String,
    pub count: u64,
    pub evaluated: u64,
}

impl Alphabet {
    fn dim(&self) -> usize {
        self.xs.first().map_or(0, |x| x.dim())
    }

    /// Word count of level `j`, saturating.
    fn count(&self, j: usize) -> u64 {
        let base = (self.diags.len() as u64).saturating_mul(self.xs.len() as u64);
        (0..j).fold(1u64, |acc, _| acc.saturating_mul(base))
    }

    fn label(&self, w: &[usize]) -> String {
        w.iter()
            .enumerate()
            .map(|(pos, &i)| if pos % 2 == 0 { self.d_labels[i].as_str() } else { self.x_labels[i].as_str() })
            .collect::<Vec<_>>()
            .join(".")
    }

    /// Scans levels `1..=k`. A level is exhaustive when its word count is at
    /// most `min(budget, MAX_WORDS_PER_LEVEL)`, otherwise that many words
    /// are drawn uniformly.
    pub fn scan(&self, k: usize, budget: usize, seed: u64) -> Vec<LevelScan> {
        let cap = budget.min(MAX_WORDS_PER_LEVEL).max(1);
        (1..=k)
            .map(|j| {
                let count = self.count(j);
                if self.diags.is_empty() || self.xs.is_empty() {
                    return LevelScan { count: 0, ..Default::default() };
                }
                let words = if count <= cap as u64 { self.all_words(j) } else { self.sample_words(j, cap, seed) };
                let mut scan = self.evaluate(j, &words);
                scan.count = count;
                scan
            })
            .collect()
    }

    fn all_words(&self, j: usize) -> Vec<Vec<usize>> {
        let radix = |pos: usize| if pos % 2 == 0 { self.diags.len() } else { self.xs.len() };
        let mut out = Vec::new();
        let mut w = vec![0usize; 2 * j];
        loop {
            out.push(w.clone());
            let mut pos = 2 * j;
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                w[pos] += 1;
                if w[pos] < radix(pos) {
                    break;
                }
                w[pos] = 0;
            }
        }
    }

    fn sample_words(&self, j: usize, n: usize, seed: u64) -> Vec<Vec<usize>> {
        let mut rng = random::stream(seed, 0x3070_0000 + j as u64);
        (0..n)
            .map(|_| {
                (0..2 * j)
                    .map(|pos| rng.random_range(0..if pos % 2 == 0 { self.diags.len() } else { self.xs.len() }))
                    .collect()
            })
            .collect()
    }

    fn evaluate(&self, j: usize, words: &[Vec<usize>]) -> LevelScan {
        let m = self.dim();
        let inv = 1.0 / m as f64;
        let mut scan = LevelScan { evaluated: words.len() as u64, ..Default::default() };
        let mut record = |v: f64, w: &[usize]| {
            if v > scan.max || scan.worst.is_empty() {
                scan.max = scan.max.max(v);
                scan.worst = self.label(w);
            }
        };
        if j == 1 {
            let xdiag: Vec<Vec<c64>> = self.xs.iter().map(|x| x.diagonal()).collect();
            for w in words {
                let t: c64 = self.diags[w[0]].iter().zip(&xdiag[w[1]]).map(|(a, b)| a * b).sum();
                record((t * inv).norm(), w);
            }
            return scan;
        }
        let h = j.div_ceil(2);
        // group by (P, Q); within a group, by middle letter
        let mut groups: BTreeMap<(&[usize], &[usize]), BTreeMap<usize, Vec<usize>>> = BTreeMap::new();
        for (i, w) in words.iter().enumerate() {
            groups.entry((&w[1..2 * h], &w[2 * h + 1..])).or_default().entry(w[2 * h]).or_default().push(i);
        }
        let mut needed: Vec<&[usize]> = groups.keys().flat_map(|(p, q)| [*p, *q]).collect();
        needed.sort();
        needed.dedup();
        let segments = self.segments(&needed);
        let groups: Vec<_> = groups.into_iter().collect();
        let values: Vec<Vec<(usize, f64)>> = par::map(groups.len(), |g| {
            let ((pk, qk), mids) = &groups[g];
            let p = &segments[*pk];
            let q = &segments[*qk];
            // H = P o Q^T, read through rows of Q*
            let qa = q.adjoint();
            let hmat: Vec<c64> = (0..m)
                .flat_map(|r| p.row(r).iter().zip(qa.row(r)).map(|(a, b)| a * b.conj()).collect::<Vec<_>>())
                .collect();
            let mut out = Vec::new();
            for (&mid, members) in mids {
                let d = &self.diags[mid];
                let v: Vec<c64> = hmat.chunks(m).map(|hr| hr.iter().zip(d).map(|(a, b)| a * b).sum()).collect();
                for &i in members {
                    let d1 = &self.diags[words[i][0]];
                    let t: c64 = d1.iter().zip(&v).map(|(a, b)| a * b).sum();
                    out.push((i, (t * inv).norm()));
                }
            }
            out
        });
        let mut flat: Vec<(usize, f64)> = values.into_iter().flatten().collect();
        flat.sort_by_key(|&(i, _)| i);
        for (i, v) in flat {
            record(v, &words[i]);
        }
        scan
    }

    /// Dense products `x_a diag(d_b) x_c ...` for each key, computed once.
    fn segments(&self, keys: &[&[usize]]) -> HashMap<Vec<usize>, TracedMatrix> {
        let mut out: HashMap<Vec<usize>, TracedMatrix> = HashMap::new();
        let mut by_len: Vec<&[usize]> = keys.to_vec();
        by_len.sort_by_key(|k| k.len());
        for k in by_len {
            self.segment(k, &mut out);
        }
        out
    }

    fn segment(&self, key: &[usize], cache: &mut HashMap<Vec<usize>, TracedMatrix>) {
        if cache.contains_key(key) {
            return;
        }
        let m = if key.len() == 1 {
            self.xs[key[0]].clone()
        } else {
            let n = key.len();
            self.segment(&key[..n - 2], cache);
            let head = &cache[&key[..n - 2]];
            let ones = vec![c64::new(1.0, 0.0); head.dim()];
            let scaled = head.scale_rows_cols(&ones, &self.diags[key[n - 2]]);
            &scaled * &self.xs[key[n - 1]]
        };
        cache.insert(key.to_vec(), m);
    }
}

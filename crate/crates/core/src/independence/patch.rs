//! Greedy construction of a diagonal unitary `v` with entries `L`-th roots of
//! unity whose low powers have small trace and whose alternating words with a
//! test set have small trace.

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use super::words::Alphabet;
use crate::error::{check_dim, Error, Result};
use crate::finite_vn::TracedMatrix;
use crate::{c64, par, random};

/// Candidate phase chunks tried per chunk.
pub const PATCH_CANDIDATES: usize = 64;

/// Word levels measured in the final report.
pub const PATCH_WORD_LEVEL: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatchReport {
    pub dim: usize,
    pub n: usize,
    pub order_l: usize,
    pub chunk_size: usize,
    /// Max `|tau(v^k)|` over `1 <= k <= n`.
    pub eta: f64,
    /// Max `|tau(w)|` over the scanned words `v^i1 x_1 ... v^ij x_j`, `j <= 3`.
    pub delta_prime: f64,
    pub residual_per_level: Vec<f64>,
    pub word_count: u64,
    pub evaluated: u64,
    pub coverage: f64,
    pub worst_word: String,
    /// Final value of the greedy objective (moments and level-2 words).
    pub greedy_objective: f64,
    pub target_delta: f64,
    pub met: bool,
}

impl PatchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn exponents(n: usize) -> Vec<i64> {
    (1..=n as i64).chain((1..=n as i64).map(|k| -k)).collect()
}

fn root(phase: usize, e: i64, l: usize) -> c64 {
    let k = (phase as i64 * e).rem_euclid(l as i64);
    c64::from_polar(1.0, 2.0 * PI * k as f64 / l as f64)
}

/// Running sums for one ordered pair `(x_a, x_b)`: `K_rs = x_a[r,s] x_b[s,r]`,
/// `g[j][r] = sum_s K_rs v_s^j` and `h[i][s] = sum_r v_r^i K_rs` over the
/// assigned indices, and `S[i][j] = m^-1 sum v_r^i K_rs v_s^j`.
struct PairState {
    k: Vec<c64>,
    g: Vec<Vec<c64>>,
    h: Vec<Vec<c64>>,
    s: Vec<c64>,
}

struct Greedy {
    m: usize,
    l: usize,
    ex: Vec<i64>,
    n: usize,
    pairs: Vec<PairState>,
    /// `sum_r v_r^k` over assigned indices, `k = 1..n`.
    moments: Vec<c64>,
}

impl Greedy {
    fn new(xs: &[TracedMatrix], n: usize, l: usize) -> Self {
        let m = xs.first().map_or(0, |x| x.dim());
        let ex = exponents(n);
        let zero = c64::new(0.0, 0.0);
        let mut pairs = Vec::new();
        for a in xs {
            for b in xs {
                let k = (0..m * m).map(|i| a.as_slice()[i] * b[(i % m, i / m)]).collect();
                pairs.push(PairState {
                    k,
                    g: vec![vec![zero; m]; ex.len()],
                    h: vec![vec![zero; m]; ex.len()],
                    s: vec![zero; ex.len() * ex.len()],
                });
            }
        }
        Self { m, l, ex, n, pairs, moments: vec![zero; n] }
    }

    /// Objective and updated pair values if `chunk` gets `phases`.
    fn try_chunk(&self, chunk: &[usize], phases: &[usize]) -> (f64, Vec<Vec<c64>>) {
        let inv = 1.0 / self.m as f64;
        let ne = self.ex.len();
        let e: Vec<Vec<c64>> = self.ex.iter().map(|&x| phases.iter().map(|&p| root(p, x, self.l)).collect()).collect();
        let mut obj = 0.0f64;
        for k in 0..self.n {
            let mu: c64 = self.moments[k] + e[k].iter().sum::<c64>();
            obj = obj.max((mu * inv).norm());
        }
        let mut vals = Vec::with_capacity(self.pairs.len());
        for p in &self.pairs {
            // t[j][r] = sum_{s in chunk} K_rs e_j[s], r in chunk
            let t: Vec<Vec<c64>> = (0..ne)
                .map(|j| {
                    chunk
                        .iter()
                        .map(|&r| chunk.iter().zip(&e[j]).map(|(&s, es)| p.k[r * self.m + s] * es).sum())
                        .collect()
                })
                .collect();
            let mut s = p.s.clone();
            for i in 0..ne {
                for j in 0..ne {
                    let mut d = c64::new(0.0, 0.0);
                    for (ci, &r) in chunk.iter().enumerate() {
                        d += e[i][ci] * (p.g[j][r] + t[j][ci]) + p.h[i][r] * e[j][ci];
                    }
                    let v = s[i * ne + j] + d * inv;
                    obj = obj.max(v.norm());
                    s[i * ne + j] = v;
                }
            }
            vals.push(s);
        }
        (obj, vals)
    }

    fn commit(&mut self, chunk: &[usize], phases: &[usize], vals: Vec<Vec<c64>>) {
        let m = self.m;
        let e: Vec<Vec<c64>> = self.ex.iter().map(|&x| phases.iter().map(|&p| root(p, x, self.l)).collect()).collect();
        for k in 0..self.n {
            self.moments[k] += e[k].iter().sum::<c64>();
        }
        for (p, s) in self.pairs.iter_mut().zip(vals) {
            for (j, ej) in e.iter().enumerate() {
                for r in 0..m {
                    let row = &p.k[r * m..(r + 1) * m];
                    p.g[j][r] += chunk.iter().zip(ej).map(|(&c, z)| row[c] * z).sum::<c64>();
                }
                for (&c, z) in chunk.iter().zip(ej) {
                    let row = &p.k[c * m..(c + 1) * m];
                    for (hs, k) in p.h[j].iter_mut().zip(row) {
                        *hs += z * k;
                    }
                }
            }
            p.s = s;
        }
    }
}

/// Greedy phase exponents, one chunk at a time; returns the exponents and
/// the final objective.
pub(crate) fn greedy_phases(xs: &[TracedMatrix], n: usize, l: usize, seed: u64) -> (Vec<usize>, f64) {
    let m = xs[0].dim();
    let c = (m / 32).max(1);
    let mut g = Greedy::new(xs, n, l);
    let mut phases = vec![0usize; m];
    let mut objective = 0.0;
    for (ci, start) in (0..m).step_by(c).enumerate() {
        let chunk: Vec<usize> = (start..(start + c).min(m)).collect();
        let width = chunk.len();
        let exhaustive = (l as f64).powi(width as i32) <= PATCH_CANDIDATES as f64;
        let cands: Vec<Vec<usize>> = if exhaustive {
            (0..l.pow(width as u32))
                .map(|mut code| {
                    (0..width)
                        .map(|_| {
                            let d = code % l;
                            code /= l;
                            d
                        })
                        .collect()
                })
                .collect()
        } else {
            let mut rng = random::stream(seed, 0x5a7c_0000 + ci as u64);
            (0..PATCH_CANDIDATES).map(|_| (0..width).map(|_| rng.random_range(0..l)).collect()).collect()
        };
        let tried = par::map(cands.len(), |i| g.try_chunk(&chunk, &cands[i]));
        let (best, _) = tried
            .iter()
            .enumerate()
            .min_by(|(i, a), (j, b)| a.0.total_cmp(&b.0).then(i.cmp(j)))
            .expect("at least one candidate");
        let (obj, vals) = tried.into_iter().nth(best).unwrap();
        g.commit(&chunk, &cands[best], vals);
        for (&r, &p) in chunk.iter().zip(&cands[best]) {
            phases[r] = p;
        }
        objective = obj;
    }
    (phases, objective)
}

/// Diagonal unitary `v` with `L`-th root of unity entries. With an empty test
/// set, `v` runs through all `dim`-th roots of unity in scrambled order.
/// Otherwise phases are fixed in chunks of `max(1, dim/32)` indices, each
/// chunk taking the best of [`PATCH_CANDIDATES`] random phase choices (all
/// choices when there are at most that many) for the running objective
/// `max(|tau(v^k)|, |tau(v^i x_a v^j x_b)|)`, `1 <= |i|, |j|, k <= n`.
/// Test elements are centered on the diagonal and scaled to operator norm
/// at most one. The report scans words `v^i1 x_1 ... v^ij x_j` for `j <= 3`.
pub fn incremental_patch_haar(
    xs: &[TracedMatrix],
    n: usize,
    delta: f64,
    order_l: Option<usize>,
    budget: usize,
    seed: u64,
) -> Result<(TracedMatrix, PatchReport)> {
    let Some(m) = xs.first().map(|x| x.dim()) else {
        return Err(Error::pre("patching needs a test element to fix the dimension; see patch_with_dim"));
    };
    patch_with_dim(m, xs, n, delta, order_l, budget, seed)
}

/// As [`incremental_patch_haar`] with the dimension given explicitly, which
/// also allows an empty test set.
pub fn patch_with_dim(
    dim: usize,
    xs: &[TracedMatrix],
    n: usize,
    delta: f64,
    order_l: Option<usize>,
    budget: usize,
    seed: u64,
) -> Result<(TracedMatrix, PatchReport)> {
    if dim == 0 {
        return Err(Error::pre("dimension must be positive"));
    }
    for x in xs {
        check_dim(dim, x.dim())?;
    }
    if n == 0 {
        return Err(Error::pre("power range n must be positive"));
    }
    let l = order_l.unwrap_or(8 * dim);
    if l == 0 || l % dim != 0 {
        return Err(Error::pre(format!("root order {l} must be a positive multiple of dim {dim}")));
    }
    let centered: Vec<TracedMatrix> = xs
        .iter()
        .filter_map(|x| {
            let y = x.off_diagonal();
            let norm = y.op_norm();
            (norm > 0.0).then(|| y.scale_real(1.0 / norm.max(1.0)))
        })
        .collect();
    let (phases, greedy_objective) = if centered.is_empty() {
        let mut rng = random::stream(seed, 0x5a7c_ffff);
        let perm = random::permutation(dim, &mut rng);
        (perm.into_iter().map(|p| p * (l / dim)).collect::<Vec<_>>(), 0.0)
    } else {
        greedy_phases(&centered, n, l, seed)
    };
    let ex = exponents(n);
    let inv = 1.0 / dim as f64;
    let eta =
        (1..=n as i64).map(|k| (phases.iter().map(|&p| root(p, k, l)).sum::<c64>() * inv).norm()).fold(0.0, f64::max);
    let alphabet = Alphabet {
        d_labels: ex.iter().map(|e| format!("v{e}")).collect(),
        diags: ex.iter().map(|&e| phases.iter().map(|&p| root(p, e, l)).collect()).collect(),
        x_labels: (0..centered.len()).map(|i| format!("x{i}")).collect(),
        xs: centered,
    };
    let scans = alphabet.scan(PATCH_WORD_LEVEL, budget, seed);
    let residual_per_level: Vec<f64> = scans.iter().map(|s| s.max).collect();
    let delta_prime = residual_per_level.iter().copied().fold(0.0, f64::max);
    let worst = scans.iter().max_by(|a, b| a.max.total_cmp(&b.max)).map(|s| s.worst.clone()).unwrap_or_default();
    let word_count = scans.iter().map(|s| s.count).fold(0u64, u64::saturating_add);
    let evaluated: u64 = scans.iter().map(|s| s.evaluated).sum();
    let v = TracedMatrix::from_diagonal(&phases.iter().map(|&p| root(p, 1, l)).collect::<Vec<_>>());
    let report = PatchReport {
        dim,
        n,
        order_l: l,
        chunk_size: (dim / 32).max(1),
        eta,
        delta_prime,
        residual_per_level,
        word_count,
        evaluated,
        coverage: if word_count == 0 { 1.0 } else { (evaluated as f64 / word_count as f64).min(1.0) },
        worst_word: worst,
        greedy_objective,
        target_delta: delta,
        met: eta.max(delta_prime) <= delta,
    };
    Ok((v, report))
}

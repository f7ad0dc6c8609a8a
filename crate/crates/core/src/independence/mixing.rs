//! Local search for a period-2 unitary `u` in the MASA, balanced within every
//! block, that makes the quadratic moments `tau(u xi_1* u xi_2)` and the
//! linear moments `tau(u eta)` small.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::finite_vn::{MasaFrame, TracedMatrix};
use crate::paving::Partition;
use crate::{c64, par, random};

/// Independent restarts of the local search.
pub const MIXING_RESTARTS: usize = 20;

/// Quadratic moment `m^-1 sum_{b in rows, a in cols} s_b s_a k_ba`, divided by `norm`.
pub(crate) struct QuadTerm {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// Row-major `rows.len() x cols.len()`.
    pub k: Vec<c64>,
    pub norm: f64,
}

/// Linear moment `m^-1 sum_a s_a w_a`, divided by `norm`.
pub(crate) struct LinTerm {
    pub idx: Vec<usize>,
    pub w: Vec<c64>,
    pub norm: f64,
}

pub(crate) struct MixingObjective {
    pub dim: usize,
    pub quad: Vec<QuadTerm>,
    pub lin: Vec<LinTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingOutcome {
    /// Frame-diagonal signs of `u`.
    pub signs: Vec<i8>,
    pub objective: f64,
    pub restarts: usize,
    pub proposals: usize,
    pub accepted: usize,
}

impl MixingOutcome {
    /// `u` in the standard basis.
    pub fn unitary(&self, frame: &MasaFrame) -> TracedMatrix {
        let d: Vec<c64> = self.signs.iter().map(|&s| c64::new(s as f64, 0.0)).collect();
        frame.element(&d)
    }
}

impl MixingObjective {
    /// Whole-element terms: every unordered pair from `xs` and every `ys`
    /// element, in frame coordinates.
    pub fn from_elements(frame: &MasaFrame, xs: &[TracedMatrix], ys: &[TracedMatrix]) -> Result<Self> {
        let m = frame.dim();
        let all: Vec<usize> = (0..m).collect();
        let mut fx = Vec::new();
        for x in xs {
            check_dim(m, x.dim())?;
            let y = frame.to_frame(x);
            let n = y.l2_norm();
            if n > 0.0 {
                fx.push((y, n));
            }
        }
        let mut quad = Vec::new();
        for i in 0..fx.len() {
            for j in i..fx.len() {
                let (a, na) = &fx[i];
                let (b, nb) = &fx[j];
                let k = a.as_slice().iter().zip(b.as_slice()).map(|(p, q)| p.conj() * q).collect();
                quad.push(QuadTerm { rows: all.clone(), cols: all.clone(), k, norm: na * nb });
            }
        }
        let mut lin = Vec::new();
        for y in ys {
            check_dim(m, y.dim())?;
            let n = y.l1_norm();
            if n > 0.0 {
                lin.push(LinTerm { idx: all.clone(), w: frame.to_frame(y).diagonal(), norm: n });
            }
        }
        Ok(Self { dim: m, quad, lin })
    }

    fn value(&self, s: &[i8]) -> (Vec<c64>, Vec<c64>) {
        let inv = 1.0 / self.dim as f64;
        let q = self
            .quad
            .iter()
            .map(|t| {
                let nc = t.cols.len();
                let mut acc = c64::new(0.0, 0.0);
                for (bi, &b) in t.rows.iter().enumerate() {
                    let row: c64 = t.cols.iter().enumerate().map(|(ai, &a)| t.k[bi * nc + ai] * s[a] as f64).sum();
                    acc += row * s[b] as f64;
                }
                acc * inv
            })
            .collect();
        let l =
            self.lin.iter().map(|t| t.idx.iter().zip(&t.w).map(|(&a, w)| w * s[a] as f64).sum::<c64>() * inv).collect();
        (q, l)
    }

    /// Normalized max term of `signs`.
    pub fn evaluate(&self, signs: &[i8]) -> f64 {
        let (q, l) = self.value(signs);
        score(self, &q, &l).0
    }
}

/// `(max, sum of squares)` over the normalized terms.
fn score(obj: &MixingObjective, q: &[c64], l: &[c64]) -> (f64, f64) {
    let mut mx = 0.0f64;
    let mut ss = 0.0;
    for (t, v) in obj.quad.iter().zip(q) {
        let r = v.norm() / t.norm;
        mx = mx.max(r);
        ss += r * r;
    }
    for (t, v) in obj.lin.iter().zip(l) {
        let r = v.norm() / t.norm;
        mx = mx.max(r);
        ss += r * r;
    }
    (mx, ss)
}

/// Position of each global index within a term's rows and columns.
struct Positions {
    rows: Vec<Vec<u32>>,
    cols: Vec<Vec<u32>>,
    lin: Vec<Vec<u32>>,
}

const NONE: u32 = u32::MAX;

impl Positions {
    fn new(obj: &MixingObjective) -> Self {
        let map = |idx: &[usize]| {
            let mut p = vec![NONE; obj.dim];
            for (i, &g) in idx.iter().enumerate() {
                p[g] = i as u32;
            }
            p
        };
        Self {
            rows: obj.quad.iter().map(|t| map(&t.rows)).collect(),
            cols: obj.quad.iter().map(|t| map(&t.cols)).collect(),
            lin: obj.lin.iter().map(|t| map(&t.idx)).collect(),
        }
    }
}

struct Walker<'a> {
    obj: &'a MixingObjective,
    pos: &'a Positions,
    s: Vec<i8>,
    /// Per quad term: `R_b = sum_a k_ba s_a`, `C_a = sum_b s_b k_ba`.
    r: Vec<Vec<c64>>,
    c: Vec<Vec<c64>>,
    q: Vec<c64>,
    l: Vec<c64>,
}

impl<'a> Walker<'a> {
    fn new(obj: &'a MixingObjective, pos: &'a Positions, s: Vec<i8>) -> Self {
        let mut r = Vec::with_capacity(obj.quad.len());
        let mut c = Vec::with_capacity(obj.quad.len());
        for t in &obj.quad {
            let nc = t.cols.len();
            let mut rt = vec![c64::new(0.0, 0.0); t.rows.len()];
            let mut ct = vec![c64::new(0.0, 0.0); nc];
            for (bi, &b) in t.rows.iter().enumerate() {
                for (ai, &a) in t.cols.iter().enumerate() {
                    let k = t.k[bi * nc + ai];
                    rt[bi] += k * s[a] as f64;
                    ct[ai] += k * s[b] as f64;
                }
            }
            r.push(rt);
            c.push(ct);
        }
        let (q, l) = obj.value(&s);
        Self { obj, pos, s, r, c, q, l }
    }

    /// Term values after flipping the signs at `f`.
    fn propose(&self, f: [usize; 2], q: &mut [c64], l: &mut [c64]) {
        let inv = 1.0 / self.obj.dim as f64;
        for (ti, t) in self.obj.quad.iter().enumerate() {
            let (pr, pc) = (&self.pos.rows[ti], &self.pos.cols[ti]);
            let nc = t.cols.len();
            let mut d = c64::new(0.0, 0.0);
            for &g in &f {
                let sg = self.s[g] as f64;
                if pr[g] != NONE {
                    d -= self.r[ti][pr[g] as usize] * (2.0 * sg);
                }
                if pc[g] != NONE {
                    d -= self.c[ti][pc[g] as usize] * (2.0 * sg);
                }
            }
            for &b in &f {
                if pr[b] == NONE {
                    continue;
                }
                for &a in &f {
                    if pc[a] != NONE {
                        d += t.k[pr[b] as usize * nc + pc[a] as usize] * (4.0 * self.s[b] as f64 * self.s[a] as f64);
                    }
                }
            }
            q[ti] = self.q[ti] + d * inv;
        }
        for (ti, t) in self.obj.lin.iter().enumerate() {
            let p = &self.pos.lin[ti];
            let mut d = c64::new(0.0, 0.0);
            for &g in &f {
                if p[g] != NONE {
                    d -= t.w[p[g] as usize] * (2.0 * self.s[g] as f64);
                }
            }
            l[ti] = self.l[ti] + d * inv;
        }
    }

    fn commit(&mut self, f: [usize; 2], q: &[c64], l: &[c64]) {
        for (ti, t) in self.obj.quad.iter().enumerate() {
            let (pr, pc) = (&self.pos.rows[ti], &self.pos.cols[ti]);
            let nc = t.cols.len();
            for &g in &f {
                let sg = self.s[g] as f64;
                if pc[g] != NONE {
                    let ai = pc[g] as usize;
                    for (bi, rb) in self.r[ti].iter_mut().enumerate() {
                        *rb -= t.k[bi * nc + ai] * (2.0 * sg);
                    }
                }
                if pr[g] != NONE {
                    let bi = pr[g] as usize;
                    let row = &t.k[bi * nc..(bi + 1) * nc];
                    for (ca, k) in self.c[ti].iter_mut().zip(row) {
                        *ca -= k * (2.0 * sg);
                    }
                }
            }
        }
        for &g in &f {
            self.s[g] = -self.s[g];
        }
        self.q.copy_from_slice(q);
        self.l.copy_from_slice(l);
    }
}

/// Balanced random signs: in every block half the indices get `+1`.
fn balanced_start(blocks: &[Vec<usize>], dim: usize, rng: &mut impl Rng) -> Vec<i8> {
    let mut s = vec![1i8; dim];
    for b in blocks {
        let mut idx = b.clone();
        idx.shuffle(rng);
        for &i in &idx[b.len() / 2..] {
            s[i] = -1;
        }
    }
    s
}

/// Greedy swap search over balanced signs with [`MIXING_RESTARTS`] restarts
/// sharing `budget` proposals. A proposal swaps one `+1` and one `-1` inside
/// a block; it is kept when it lowers the max term, or keeps the max and
/// lowers the sum of squares. Restarts stop early once the max is at most
/// `delta`. The lowest objective wins, ties to the lowest restart.
pub(crate) fn search(
    obj: &MixingObjective,
    part: &Partition,
    delta: f64,
    budget: usize,
    seed: u64,
) -> Result<MixingOutcome> {
    let blocks: Vec<Vec<usize>> = part.blocks().into_iter().filter(|b| !b.is_empty()).collect();
    if blocks.iter().any(|b| b.len() % 2 == 1) {
        return Err(Error::pre("every block must have even size"));
    }
    if budget == 0 {
        return Err(Error::pre("proposal budget must be positive"));
    }
    let movable: Vec<usize> = (0..blocks.len()).filter(|&i| blocks[i].len() >= 2).collect();
    let per = budget.div_ceil(MIXING_RESTARTS);
    let pos = Positions::new(obj);
    let runs = par::map(MIXING_RESTARTS, |restart| {
        let mut rng = random::stream(seed, 0x4d1c_0000 + restart as u64);
        let s = balanced_start(&blocks, obj.dim, &mut rng);
        let mut w = Walker::new(obj, &pos, s);
        let mut cur = score(obj, &w.q, &w.l);
        let mut q = w.q.clone();
        let mut l = w.l.clone();
        let mut used = 0;
        let mut accepted = 0;
        // +1 and -1 members per block, kept in sync with the signs
        let mut plus: Vec<Vec<usize>> =
            blocks.iter().map(|b| b.iter().copied().filter(|&i| w.s[i] > 0).collect()).collect();
        let mut minus: Vec<Vec<usize>> =
            blocks.iter().map(|b| b.iter().copied().filter(|&i| w.s[i] < 0).collect()).collect();
        while used < per && cur.0 > delta && !movable.is_empty() {
            used += 1;
            let b = movable[rng.random_range(0..movable.len())];
            let pi = rng.random_range(0..plus[b].len());
            let mi = rng.random_range(0..minus[b].len());
            let f = [plus[b][pi], minus[b][mi]];
            w.propose(f, &mut q, &mut l);
            let next = score(obj, &q, &l);
            if next.0 < cur.0 || (next.0 <= cur.0 && next.1 < cur.1) {
                w.commit(f, &q, &l);
                std::mem::swap(&mut plus[b][pi], &mut minus[b][mi]);
                cur = next;
                accepted += 1;
            }
        }
        (cur.0, w.s, used, accepted)
    });
    let proposals = runs.iter().map(|r| r.2).sum();
    let accepted = runs.iter().map(|r| r.3).sum();
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.0.total_cmp(&b.0).then(i.cmp(j)))
        .map(|(_, r)| r)
        .expect("at least one restart");
    // recompute from scratch so incremental drift never reaches the report
    let objective = obj.evaluate(&best.1);
    Ok(MixingOutcome { signs: best.1, objective, restarts: MIXING_RESTARTS, proposals, accepted })
}

/// Period-2 unitary in the MASA of `blocks`, balanced in each block, found by
/// local search to make
/// `max(max |tau(u xi_1* u xi_2)| / (||xi_1||_2 ||xi_2||_2), max |tau(u eta)| / ||eta||_1)`
/// small over pairs from `xs` and elements of `ys`. The achieved value is
/// reported, never enforced.
pub fn find_mixing_sign_unitary(
    xs: &[TracedMatrix],
    ys: &[TracedMatrix],
    frame: &MasaFrame,
    blocks: &Partition,
    delta: f64,
    budget: usize,
    seed: u64,
) -> Result<MixingOutcome> {
    check_dim(frame.dim(), blocks.dim())?;
    let obj = MixingObjective::from_elements(frame, xs, ys)?;
    search(&obj, blocks, delta, budget, seed)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::testing::random_matrix;

    #[test]
    fn empty_sets_give_zero_objective() {
        let frame = MasaFrame::diagonal(8);
        let part = Partition::one_block(Arc::new(frame.clone()));
        let out = find_mixing_sign_unitary(&[], &[], &frame, &part, 0.0, 10, 1).unwrap();
        assert_eq!(out.objective, 0.0);
        assert_eq!(out.signs.iter().map(|&s| s as i32).sum::<i32>(), 0);
    }

    #[test]
    fn dim_two_flip_is_forced() {
        let frame = MasaFrame::diagonal(2);
        let part = Partition::one_block(Arc::new(frame.clone()));
        let x = TracedMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let out = find_mixing_sign_unitary(std::slice::from_ref(&x), &[], &frame, &part, 0.0, 100, 3).unwrap();
        // both balanced sign vectors give tau(u x u x) = -1
        for s in [[1.0, -1.0], [-1.0, 1.0]] {
            let u = TracedMatrix::from_real_diagonal(&s);
            assert_eq!((&(&(&u * &x) * &u) * &x).trace(), c64::new(-1.0, 0.0));
        }
        assert!((out.objective - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_odd_blocks_and_zero_budget() {
        let frame = MasaFrame::diagonal(3);
        let part = Partition::one_block(Arc::new(frame.clone()));
        assert!(find_mixing_sign_unitary(&[], &[], &frame, &part, 0.1, 10, 0).is_err());
        let frame = MasaFrame::diagonal(4);
        let part = Partition::one_block(Arc::new(frame.clone()));
        assert!(find_mixing_sign_unitary(&[], &[], &frame, &part, 0.1, 0, 0).is_err());
    }

    #[test]
    fn incremental_values_match_direct_evaluation() {
        let m = 12;
        let frame = MasaFrame::diagonal(m);
        let part = Partition::diagonal((0..m).map(|i| i % 3).collect(), 3).unwrap();
        let xs = [random_matrix(m, 1), random_matrix(m, 2)];
        let obj = MixingObjective::from_elements(&frame, &xs, &[random_matrix(m, 3)]).unwrap();
        let pos = Positions::new(&obj);
        let mut rng = random::stream(5, 0);
        let mut w = Walker::new(&obj, &pos, balanced_start(&part.blocks(), m, &mut rng));
        let mut q = w.q.clone();
        let mut l = w.l.clone();
        for step in 0..40 {
            let b = step % 3;
            let blk: Vec<usize> = (0..m).filter(|i| i % 3 == b).collect();
            let p = *blk.iter().find(|&&i| w.s[i] > 0).unwrap();
            let n = *blk.iter().rev().find(|&&i| w.s[i] < 0).unwrap();
            w.propose([p, n], &mut q, &mut l);
            w.commit([p, n], &q.clone(), &l.clone());
            let (dq, dl) = obj.value(&w.s);
            for (a, b) in dq.iter().zip(&w.q).chain(dl.iter().zip(&w.l)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn search_is_deterministic_and_improves_on_start() {
        let m = 64;
        let frame = MasaFrame::diagonal(m);
        let part = Partition::one_block(Arc::new(frame.clone()));
        let x = random_matrix(m, 11);
        let a = find_mixing_sign_unitary(std::slice::from_ref(&x), &[], &frame, &part, 0.0, 4000, 2).unwrap();
        let b = find_mixing_sign_unitary(std::slice::from_ref(&x), &[], &frame, &part, 0.0, 4000, 2).unwrap();
        assert_eq!(a, b);
        let obj = MixingObjective::from_elements(&frame, &[x], &[]).unwrap();
        let start = balanced_start(&part.blocks(), m, &mut random::stream(2, 0x4d1c_0000));
        assert!(a.objective <= obj.evaluate(&start));
        let u = a.unitary(&frame);
        assert!((&u * &u).max_abs_diff(&TracedMatrix::identity(m)) < 1e-15);
    }
}

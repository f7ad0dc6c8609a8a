use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_vn::{MasaFrame, TracedMatrix};
use crate::paving::exact::{for_each_set_partition, EXHAUSTIVE_MAX_DIM};
use crate::paving::ops::arc_index;
use crate::paving::problem::{PavingProblem, DEFAULT_TAIL_EPS};
use crate::paving::{Partition, PavingReport};
use crate::report::Stopwatch;
use crate::{c64, par, random};

/// Partition search strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// All set partitions (restricted-growth strings); dim <= 12.
    Exhaustive,
    /// Recursive halving of the largest block by random balanced signs.
    SignSplit,
    /// Arcs of a unitary with i.i.d. uniform random phases.
    Arc,
    /// Simulated annealing over assignments.
    Anneal,
    /// Near-equal blocks of a seeded shuffle: the eigenblocks of a scrambled
    /// roots-of-unity unitary.
    RootsOfUnity,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::Exhaustive, Strategy::SignSplit, Strategy::Arc, Strategy::Anneal, Strategy::RootsOfUnity];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::Exhaustive => "exhaustive",
            Strategy::SignSplit => "sign_split",
            Strategy::Arc => "arc",
            Strategy::Anneal => "anneal",
            Strategy::RootsOfUnity => "roots_of_unity",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(Strategy::RootsOfUnity),
            _ => Strategy::ALL
                .into_iter()
                .find(|st| st.label() == s || st.label().replace('_', "-") == s)
                .ok_or_else(|| Error::pre(format!("unknown strategy `{s}`"))),
        }
    }
}

/// Independent annealing chains per block count; the budget is shared.
pub const ANNEAL_RESTARTS: usize = 4;
/// Geometric cooling factor per annealing move.
pub const ANNEAL_COOLING: f64 = 0.995;
const CANDIDATE_BATCH: usize = 64;

/// Best partition found with at most `n` blocks.
#[derive(Clone, Debug)]
pub struct FixedSearch {
    pub assignment: Vec<usize>,
    pub defect: f64,
}

impl PavingProblem {
    /// Searches partitions with at most `n` blocks, stopping early once the
    /// ratio is at most `stop_ratio`. Deterministic in `(strategy, budget, seed)`.
    pub fn search(
        &self,
        n: usize,
        strategy: Strategy,
        budget: usize,
        seed: u64,
        stop_ratio: f64,
    ) -> Result<FixedSearch> {
        if budget == 0 {
            return Err(Error::pre("search budget must be positive"));
        }
        let dim = self.dim();
        if n == 0 {
            return Err(Error::pre("block count must be positive"));
        }
        if n == 1 {
            let a = vec![0; dim];
            return Ok(FixedSearch { defect: self.defect(&a, 1), assignment: a });
        }
        if n >= dim {
            return Ok(FixedSearch { assignment: (0..dim).collect(), defect: 0.0 });
        }
        let stop_defect = if self.is_degenerate() { f64::INFINITY } else { stop_ratio * self.base_norm() };
        let key = |idx: usize| ((n as u64) << 32) | idx as u64;
        match strategy {
            Strategy::Exhaustive => self.search_exhaustive(n, stop_defect),
            Strategy::Anneal => {
                let per = (budget / ANNEAL_RESTARTS).max(1);
                let runs = par::map(ANNEAL_RESTARTS, |w| {
                    let mut rng = random::stream(seed, key(w));
                    self.anneal(n, per, stop_defect, &mut rng)
                });
                Ok(pick_best(runs))
            }
            Strategy::SignSplit | Strategy::Arc | Strategy::RootsOfUnity => {
                let mut best: Option<FixedSearch> = None;
                let mut start = 0;
                while start < budget {
                    let count = CANDIDATE_BATCH.min(budget - start);
                    let batch = par::map(count, |c| {
                        let mut rng = random::stream(seed, key(start + c));
                        let a = candidate(strategy, dim, n, &mut rng);
                        FixedSearch { defect: self.defect(&a, n), assignment: a }
                    });
                    let b = pick_best(batch);
                    if best.as_ref().map_or(true, |cur| b.defect < cur.defect) {
                        best = Some(b);
                    }
                    if best.as_ref().unwrap().defect <= stop_defect {
                        break;
                    }
                    start += count;
                }
                Ok(best.unwrap())
            }
        }
    }

    fn search_exhaustive(&self, n: usize, stop_defect: f64) -> Result<FixedSearch> {
        if self.dim() > EXHAUSTIVE_MAX_DIM {
            return Err(Error::pre(format!("exhaustive search is limited to dim <= {EXHAUSTIVE_MAX_DIM}")));
        }
        let mut best = FixedSearch { assignment: vec![0; self.dim()], defect: f64::INFINITY };
        let mut done = false;
        for_each_set_partition(self.dim(), n, |a, used| {
            if done {
                return;
            }
            let d = self.defect(a, used);
            if d < best.defect {
                best = FixedSearch { assignment: a.to_vec(), defect: d };
                done = d <= stop_defect;
            }
        });
        Ok(best)
    }

    fn anneal(&self, n: usize, moves: usize, stop_defect: f64, rng: &mut ChaCha8Rng) -> FixedSearch {
        let dim = self.dim();
        let mut a: Vec<usize> = (0..dim).map(|_| rng.random_range(0..n)).collect();
        let mut blocks = crate::paving::problem::blocks_of(&a, n);
        let mut norms: Vec<f64> = blocks.iter().map(|b| self.block_norm(b)).collect();
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        let mut cur = max(&norms);
        let mut best = FixedSearch { assignment: a.clone(), defect: cur };
        let mut temp = cur;
        for _ in 0..moves {
            if best.defect <= stop_defect {
                break;
            }
            // proposal: either move one index or swap two indices of different blocks
            let i = rng.random_range(0..dim);
            let (bi, target, j) = if rng.random::<bool>() {
                let mut t = rng.random_range(0..n - 1);
                if t >= a[i] {
                    t += 1;
                }
                (a[i], t, None)
            } else {
                let j = rng.random_range(0..dim);
                if a[j] == a[i] {
                    temp *= ANNEAL_COOLING;
                    continue;
                }
                (a[i], a[j], Some(j))
            };
            let mut new_src: Vec<usize> = blocks[bi].iter().copied().filter(|&k| k != i).collect();
            let mut new_dst: Vec<usize> = blocks[target].iter().copied().filter(|&k| Some(k) != j).collect();
            new_dst.push(i);
            if let Some(j) = j {
                new_src.push(j);
            }
            new_src.sort_unstable();
            new_dst.sort_unstable();
            let (ns, nd) = (self.block_norm(&new_src), self.block_norm(&new_dst));
            let (os, od) = (norms[bi], norms[target]);
            norms[bi] = ns;
            norms[target] = nd;
            let proposed = max(&norms);
            let delta = proposed - cur;
            let accept = delta <= 0.0 || (temp > 0.0 && rng.random::<f64>() < (-delta / temp).exp());
            if accept {
                a[i] = target;
                if let Some(j) = j {
                    a[j] = bi;
                }
                blocks[bi] = new_src;
                blocks[target] = new_dst;
                cur = proposed;
                if cur < best.defect {
                    best = FixedSearch { assignment: a.clone(), defect: cur };
                }
            } else {
                norms[bi] = os;
                norms[target] = od;
            }
            temp *= ANNEAL_COOLING;
        }
        best
    }
}

/// Lowest defect wins; ties go to the lowest index.
fn pick_best(runs: Vec<FixedSearch>) -> FixedSearch {
    let mut it = runs.into_iter();
    let mut best = it.next().expect("at least one run");
    for r in it {
        if r.defect < best.defect {
            best = r;
        }
    }
    best
}

fn candidate(strategy: Strategy, dim: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match strategy {
        Strategy::SignSplit => {
            let mut blocks: Vec<Vec<usize>> = vec![(0..dim).collect()];
            while blocks.len() < n {
                let (k, _) = blocks
                    .iter()
                    .enumerate()
                    .fold((0, 0), |acc, (k, b)| if b.len() > acc.1 { (k, b.len()) } else { acc });
                if blocks[k].len() < 2 {
                    break;
                }
                let perm = random::permutation(blocks[k].len(), rng);
                let half = blocks[k].len() / 2;
                let old = std::mem::take(&mut blocks[k]);
                let (mut lo, mut hi) = (Vec::new(), Vec::new());
                for (pos, &p) in perm.iter().enumerate() {
                    if pos < half {
                        lo.push(old[p])
                    } else {
                        hi.push(old[p])
                    }
                }
                blocks[k] = lo;
                blocks.push(hi);
            }
            let mut a = vec![0; dim];
            for (b, block) in blocks.iter().enumerate() {
                for &i in block {
                    a[i] = b;
                }
            }
            a
        }
        Strategy::Arc => {
            (0..dim).map(|_| arc_index(c64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU), n)).collect()
        }
        Strategy::RootsOfUnity => roots_of_unity_blocks(dim, n, rng),
        Strategy::Exhaustive | Strategy::Anneal => unreachable!("not a sampling strategy"),
    }
}

/// Seeded near-equal split: position `k` of a random permutation goes to
/// block `floor(k n / dim)`.
pub fn roots_of_unity_blocks(dim: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let perm = random::permutation(dim, rng);
    let mut a = vec![0; dim];
    for (pos, &i) in perm.iter().enumerate() {
        a[i] = pos * n / dim;
    }
    a
}

/// Options of [`pave_search`] beyond the paving target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub strategy: Strategy,
    /// Candidates per block count (moves for annealing).
    pub budget: usize,
    pub seed: u64,
    /// Largest block count tried before falling back to singletons.
    pub max_blocks: Option<usize>,
    /// Spectral-tail threshold relative to `||x - E(x)||`.
    pub tail_eps: f64,
}

impl SearchConfig {
    pub fn new(strategy: Strategy, budget: usize, seed: u64) -> Self {
        Self { strategy, budget, seed, max_blocks: None, tail_eps: DEFAULT_TAIL_EPS }
    }
}

/// Finds a paving of `x` at ratio `eps` with as few blocks as the strategy
/// manages: block counts `n = 1, 2, ...` are tried in turn and the first
/// success is returned. Singletons always succeed.
pub fn pave_search(
    x: &TracedMatrix,
    frame: Arc<MasaFrame>,
    eps: f64,
    cfg: &SearchConfig,
) -> Result<(Partition, PavingReport)> {
    let problem = PavingProblem::new(x, frame)?;
    pave_problem(&problem, eps, cfg)
}

pub fn pave_problem(problem: &PavingProblem, eps: f64, cfg: &SearchConfig) -> Result<(Partition, PavingReport)> {
    let watch = Stopwatch::start();
    if !(eps > 0.0) {
        return Err(Error::pre("eps must be positive"));
    }
    if cfg.budget == 0 {
        return Err(Error::pre("search budget must be positive"));
    }
    let dim = problem.dim();
    if cfg.strategy == Strategy::Exhaustive && dim > EXHAUSTIVE_MAX_DIM {
        return Err(Error::pre(format!("exhaustive search is limited to dim <= {EXHAUSTIVE_MAX_DIM}, got {dim}")));
    }
    let frame = Arc::clone(problem.frame());
    let finish = |a: Vec<usize>, n: usize| -> Result<(Partition, PavingReport)> {
        let part = Partition::new(a, n, Arc::clone(&frame))?;
        let report = problem.report(&part, cfg.strategy.label(), cfg.seed, cfg.tail_eps, watch.elapsed_ms());
        Ok((part, report))
    };
    if problem.is_degenerate() {
        return finish(vec![0; dim], 1);
    }
    let cap = cfg.max_blocks.unwrap_or(dim).clamp(1, dim);
    for n in 1..=cap {
        let found = problem.search(n, cfg.strategy, cfg.budget, cfg.seed, eps)?;
        if problem.ratio(found.defect) <= eps {
            return finish(found.assignment, n);
        }
        if n == cap && cap < dim {
            return finish(found.assignment, n);
        }
    }
    finish((0..dim).collect(), dim)
}

use serde::Serialize;

use crate::error::{Error, Result};
use crate::free_model::freeness::trace_of_product;
use crate::free_model::{
    conjugation_paving_experiment, freeness_residual, kesten_norm_oracle, power_conjugation_growth,
    projection_paving_experiment, sample, EnsembleKind, EnsembleSpec,
};

/// Word budget of the freeness calibration; covers every word at level 3.
const FREENESS_BUDGET: usize = 10_000;

/// The measured quantity of one calibration target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "quantity", rename_all = "snake_case")]
pub enum Quantity {
    /// `|tau(U)|` of a Haar unitary.
    HaarTrace,
    /// `max_{k <= 4} |tau(U^k)| sqrt(dim)` of a Haar unitary.
    HaarMoments,
    /// Freeness residual of two independent Haar unitaries.
    Freeness { k: usize },
    /// Norm of a sum of `m` independent Haar unitaries.
    Kesten { m: usize },
    /// Norm of the compression of a zero-diagonal Haar element by `n` roots-of-unity eigenblocks.
    Conjugation { n: usize },
    /// `||sum q_i e q_i - t||` for a Haar-rotated projection.
    Projection { t: f64, n: usize },
    /// Fitted growth exponent of `||sum_{i <= n} u^i x u^-i||`.
    Growth { n_max: usize },
}

impl Quantity {
    pub fn measure(&self, dim: usize, seed: u64) -> Result<f64> {
        Ok(match *self {
            Quantity::HaarTrace => sample(&EnsembleSpec::new(EnsembleKind::HaarUnitary, dim, seed))?.trace().norm(),
            Quantity::HaarMoments => {
                let u = sample(&EnsembleSpec::new(EnsembleKind::HaarUnitary, dim, seed))?;
                let u2 = &u * &u;
                let m = [u.trace(), u2.trace(), trace_of_product(&u2, &u), trace_of_product(&u2, &u2)];
                m.iter().map(|z| z.norm()).fold(0.0, f64::max) * (dim as f64).sqrt()
            }
            Quantity::Freeness { k } => {
                let u = sample(&EnsembleSpec::new(EnsembleKind::HaarUnitary, dim, 2 * seed))?;
                let v = sample(&EnsembleSpec::new(EnsembleKind::HaarUnitary, dim, 2 * seed + 1))?;
                freeness_residual(&[u, v], k, FREENESS_BUDGET, seed)?.residual
            }
            Quantity::Kesten { m } => kesten_norm_oracle(m, dim, seed)?.measured,
            Quantity::Conjugation { n } => conjugation_paving_experiment(n, dim, seed)?.measured_norm,
            Quantity::Projection { t, n } => projection_paving_experiment(t, n, dim, seed)?.measured_norm,
            Quantity::Growth { n_max } => power_conjugation_growth(dim, n_max, seed)?.beta,
        })
    }
}

/// A tolerance interval to be confirmed over a block of reference seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationTarget {
    pub name: String,
    #[serde(flatten)]
    pub quantity: Quantity,
    pub dim: usize,
    pub seed_count: usize,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    /// Fraction of seeds that must land in `[lo, hi]`.
    pub required_fraction: f64,
}

impl CalibrationTarget {
    fn new(
        name: &str,
        quantity: Quantity,
        dim: usize,
        seeds: usize,
        lo: Option<f64>,
        hi: Option<f64>,
        frac: f64,
    ) -> Self {
        Self { name: name.into(), quantity, dim, seed_count: seeds, lo, hi, required_fraction: frac }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo.map_or(true, |lo| v >= lo) && self.hi.map_or(true, |hi| v <= hi)
    }
}

/// The reference targets of the free-model tolerances.
pub fn calibration_targets() -> Vec<CalibrationTarget> {
    let sqrt3 = 3f64.sqrt();
    vec![
        CalibrationTarget::new("haar_trace", Quantity::HaarTrace, 1024, 100, None, Some(0.1), 0.99),
        CalibrationTarget::new("haar_moments", Quantity::HaarMoments, 1024, 100, None, Some(3.0), 0.95),
        CalibrationTarget::new("freeness_k3", Quantity::Freeness { k: 3 }, 1024, 20, None, Some(0.05), 1.0),
        CalibrationTarget::new("kesten_m2", Quantity::Kesten { m: 2 }, 2048, 20, Some(1.90), Some(2.10), 1.0),
        CalibrationTarget::new(
            "kesten_m4",
            Quantity::Kesten { m: 4 },
            2048,
            20,
            Some(2.0 * sqrt3 - 0.15),
            Some(2.0 * sqrt3 + 0.15),
            1.0,
        ),
        CalibrationTarget::new(
            "conj_n4",
            Quantity::Conjugation { n: 4 },
            1024,
            100,
            None,
            Some((sqrt3 + 1.0) / 4.0 + 0.06),
            0.95,
        ),
        CalibrationTarget::new("proj_n64", Quantity::Projection { t: 0.5, n: 64 }, 2048, 50, None, Some(0.30), 0.95),
        CalibrationTarget::new("growth_n32", Quantity::Growth { n_max: 32 }, 1024, 10, Some(0.4), Some(0.7), 0.9),
    ]
}

/// Measured values of one target, seeds `0..seed_count` in order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationEntry {
    #[serde(flatten)]
    pub target: CalibrationTarget,
    pub values: Vec<f64>,
    pub within: usize,
    pub fraction: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub pass: bool,
    pub elapsed_ms: f64,
}

pub fn run_calibration_target(target: &CalibrationTarget) -> Result<CalibrationEntry> {
    if target.seed_count == 0 {
        return Err(Error::pre("calibration needs at least one seed"));
    }
    let watch = crate::report::Stopwatch::start();
    let values = crate::par::map(target.seed_count, |s| target.quantity.measure(target.dim, s as u64))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let within = values.iter().filter(|&&v| target.contains(v)).count();
    let fraction = within as f64 / values.len() as f64;
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(CalibrationEntry {
        target: target.clone(),
        within,
        fraction,
        min: sorted[0],
        median: sorted[sorted.len() / 2],
        max: sorted[sorted.len() - 1],
        pass: fraction >= target.required_fraction,
        values,
        elapsed_ms: watch.elapsed_ms(),
    })
}

//! Timing and serialization helpers shared by all reports.

use serde::Serialize;

/// Wall-clock timer. Reads zero on targets without a monotonic clock.
pub struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub fn elapsed_ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64() * 1e3
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

/// One JSON document per line.
pub fn json_lines<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("report serialization cannot fail"));
        out.push('\n');
    }
    out
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Sweep summary row: `param, n, dim, seed, measured, bound, slack`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvRow {
    pub param: String,
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    pub measured: f64,
    pub bound: f64,
    pub slack: f64,
}

pub const CSV_HEADER: &str = "param,n,dim,seed,measured,bound,slack";

impl CsvRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.param,
            self.n,
            self.dim,
            self.seed,
            fmt_f64(self.measured),
            fmt_f64(self.bound),
            fmt_f64(self.slack)
        )
    }
}

pub fn csv_table(rows: &[CsvRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

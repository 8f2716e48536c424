//! Wall-clock timing of complete runs over a step size by scheme grid.
//!
//! Cells run strictly one after another. Only the step loop is timed.

use std::fmt::Write as _;
use std::time::Duration;

use crate::engine::{self, Scheme};
use crate::error::{Result, SimError};
use crate::metrics::{grid_axes, same_step, HasCell};
use crate::scenario::Scenario;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchCell {
    pub scheme: Scheme,
    pub h: f64,
    /// Step-loop wall time of every repetition; empty when the run diverged.
    pub timings: Vec<Duration>,
    /// Failure message of a diverged run.
    pub diverged: Option<String>,
}

impl BenchCell {
    pub fn median(&self) -> Option<Duration> {
        median(&self.timings)
    }
}

impl HasCell for BenchCell {
    fn step(&self) -> f64 {
        self.h
    }
    fn scheme_id(&self) -> Option<Scheme> {
        Some(self.scheme)
    }
}

pub fn median(timings: &[Duration]) -> Option<Duration> {
    let mut t = timings.to_vec();
    t.sort();
    let n = t.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(t[n / 2]),
        _ => Some((t[n / 2 - 1] + t[n / 2]) / 2),
    }
}

/// Times `repetitions` runs of `scenario` under `scheme` at step `h`.
///
/// Divergence is recorded in the cell; other errors propagate.
pub fn bench(scenario: &Scenario, scheme: Scheme, h: f64, repetitions: usize) -> Result<BenchCell> {
    if repetitions == 0 {
        return Err(SimError::Validation(
            "repetitions must be at least 1".into(),
        ));
    }
    let sc = scenario.clone().with_scheme(scheme).with_step_size(h);
    sc.validate()?;
    let mut cell = BenchCell {
        scheme,
        h,
        timings: Vec::with_capacity(repetitions),
        diverged: None,
    };
    for _ in 0..repetitions {
        match engine::run(&sc) {
            Ok(sim) => cell.timings.push(sim.stats.wall),
            Err(e @ (SimError::Divergence { .. } | SimError::Singular { .. })) => {
                cell.timings.clear();
                cell.diverged = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(cell)
}

/// Runs every (scheme, h) cell on `copies` replicas of the scenario.
pub fn bench_grid(
    scenario: &Scenario,
    schemes: &[Scheme],
    steps: &[f64],
    copies: usize,
    repetitions: usize,
) -> Result<Vec<BenchCell>> {
    let sc = if copies > 1 {
        scenario.replicate(copies)
    } else {
        scenario.clone()
    };
    let mut cells = Vec::with_capacity(schemes.len() * steps.len());
    for &scheme in schemes {
        for &h in steps {
            cells.push(bench(&sc, scheme, h, repetitions)?);
        }
    }
    Ok(cells)
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Median times in milliseconds, step sizes down and schemes across.
pub fn bench_table(cells: &[BenchCell]) -> String {
    let (steps, schemes) = grid_axes(cells);
    let mut out = String::new();
    let _ = write!(out, "{:>10}", "h (us)");
    for s in schemes.iter().flatten() {
        let _ = write!(out, " {:>12}", format!("{} ms", s.name()));
    }
    out.push('\n');
    for h in &steps {
        let _ = write!(out, "{:>10}", format!("{}", (h * 1e12).round() / 1e6));
        for s in &schemes {
            let cell = cells
                .iter()
                .find(|c| Some(c.scheme) == *s && same_step(c.h, *h));
            let text = match cell {
                Some(c) => c
                    .median()
                    .map_or_else(|| "diverged".into(), |m| format!("{:.2}", ms(m))),
                None => "-".into(),
            };
            let _ = write!(out, " {text:>12}");
        }
        out.push('\n');
    }
    out
}

/// One CSV line per cell.
pub fn bench_csv(cells: &[BenchCell]) -> String {
    let mut out = String::from("scheme,h,median_ms,repetitions,diverged\n");
    for c in cells {
        let median = c.median().map(|m| ms(m).to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.scheme.name(),
            c.h,
            median,
            c.timings.len(),
            c.diverged.is_some()
        );
    }
    out
}

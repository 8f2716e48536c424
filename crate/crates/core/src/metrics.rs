//! Waveform error measures against a fine-step reference run.
//!
//! `err(x) = 100 * ||x_com - x_ref|| / ||x_ref||` with 2-norms taken over the
//! time instants both series share. The reference step must divide the
//! compared step so every compared sample has an exact reference partner.

use std::fmt::Write as _;

use crate::engine::{Scheme, TimeSeries, BUS_COLUMNS};
use crate::error::{Result, SimError};

/// Relative error in percent between two aligned sample vectors.
pub fn relative_error(x_com: &[f64], x_ref: &[f64]) -> Result<f64> {
    if x_com.len() != x_ref.len() {
        return Err(SimError::Incompatible(format!(
            "{} compared samples against {} reference samples",
            x_com.len(),
            x_ref.len()
        )));
    }
    if x_com.is_empty() {
        return Err(SimError::Incompatible("no common time instants".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (c, r) in x_com.iter().zip(x_ref) {
        num += (c - r) * (c - r);
        den += r * r;
    }
    if den == 0.0 {
        return Err(SimError::Incompatible(
            "reference signal has zero norm".into(),
        ));
    }
    Ok(100.0 * (num / den).sqrt())
}

/// Number of reference steps per compared step.
pub fn step_ratio(com: &TimeSeries, reference: &TimeSeries) -> Result<usize> {
    let ratio = com.h / reference.h;
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-6 * k {
        return Err(SimError::Incompatible(format!(
            "reference step {} s does not divide compared step {} s",
            reference.h, com.h
        )));
    }
    let k = k as usize;
    if com.is_empty() || (com.len() - 1) * k + 1 != reference.len() {
        return Err(SimError::Incompatible(format!(
            "durations differ: {} s compared against {} s",
            com.duration(),
            reference.duration()
        )));
    }
    Ok(k)
}

/// A column of both series at their common instants.
pub fn common_samples(
    com: &TimeSeries,
    reference: &TimeSeries,
    column: &str,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = step_ratio(com, reference)?;
    let missing =
        |which: &str| SimError::Incompatible(format!("{which} series has no column '{column}'"));
    let c = com.column(column).ok_or_else(|| missing("compared"))?;
    let r = reference
        .column(column)
        .ok_or_else(|| missing("reference"))?;
    Ok((c.to_vec(), r.iter().step_by(k).copied().collect()))
}

pub fn column_error(com: &TimeSeries, reference: &TimeSeries, column: &str) -> Result<f64> {
    let (c, r) = common_samples(com, reference, column)?;
    relative_error(&c, &r)
}

/// Mean of the three phase voltage errors, and the per-phase values.
pub fn voltage_error(com: &TimeSeries, reference: &TimeSeries) -> Result<(f64, [f64; 3])> {
    let mut per = [0.0; 3];
    for (slot, col) in per.iter_mut().zip(BUS_COLUMNS) {
        *slot = column_error(com, reference, col)?;
    }
    Ok((per.iter().sum::<f64>() / 3.0, per))
}

/// Error of the converter's phasor angle relative to the synchronous frame.
pub fn phase_error(com: &TimeSeries, reference: &TimeSeries) -> Result<f64> {
    column_error(com, reference, "delta")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub scheme: Option<Scheme>,
    pub h: f64,
    /// `None` when the compared run diverged.
    pub errors: Option<Errors>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Errors {
    pub voltage_error: f64,
    pub phase_error: f64,
    pub per_phase: [f64; 3],
}

impl ErrorReport {
    pub fn diverged(scheme: Option<Scheme>, h: f64) -> Self {
        Self {
            scheme,
            h,
            errors: None,
        }
    }

    pub fn is_diverged(&self) -> bool {
        self.errors.is_none()
    }

    pub fn voltage_error(&self) -> Option<f64> {
        self.errors.map(|e| e.voltage_error)
    }

    pub fn phase_error(&self) -> Option<f64> {
        self.errors.map(|e| e.phase_error)
    }
}

/// Voltage and phase errors of `com` against `reference`.
pub fn compare(
    com: &TimeSeries,
    reference: &TimeSeries,
    scheme: Option<Scheme>,
) -> Result<ErrorReport> {
    let (voltage_error, per_phase) = voltage_error(com, reference)?;
    let phase_error = phase_error(com, reference)?;
    Ok(ErrorReport {
        scheme,
        h: com.h,
        errors: Some(Errors {
            voltage_error,
            phase_error,
            per_phase,
        }),
    })
}

fn micros(h: f64) -> String {
    format!("{}", (h * 1e6 * 1e6).round() / 1e6)
}

/// Step size by scheme grid of voltage and phase errors, as aligned text.
pub fn error_table(reports: &[ErrorReport]) -> String {
    let (steps, schemes) = grid_axes(reports);
    let mut out = String::new();
    let _ = write!(out, "{:>10}", "h (us)");
    for s in &schemes {
        let _ = write!(
            out,
            " {:>12} {:>12}",
            format!("{} V%", name(*s)),
            format!("{} ph%", name(*s))
        );
    }
    out.push('\n');
    for h in &steps {
        let _ = write!(out, "{:>10}", micros(*h));
        for s in &schemes {
            let cell = reports
                .iter()
                .find(|r| r.scheme == *s && same_step(r.h, *h));
            let (v, p) = match cell.and_then(|r| r.errors) {
                Some(e) => (
                    format!("{:.4}", e.voltage_error),
                    format!("{:.4}", e.phase_error),
                ),
                None if cell.is_some() => ("diverged".into(), "diverged".into()),
                None => ("-".into(), "-".into()),
            };
            let _ = write!(out, " {v:>12} {p:>12}");
        }
        out.push('\n');
    }
    out
}

/// One CSV line per report.
pub fn error_csv(reports: &[ErrorReport]) -> String {
    let mut out = String::from("scheme,h,voltage_error,phase_error,err_a,err_b,err_c,diverged\n");
    for r in reports {
        let _ = match r.errors {
            Some(e) => writeln!(
                out,
                "{},{},{},{},{},{},{},false",
                name(r.scheme),
                r.h,
                e.voltage_error,
                e.phase_error,
                e.per_phase[0],
                e.per_phase[1],
                e.per_phase[2]
            ),
            None => writeln!(out, "{},{},,,,,,true", name(r.scheme), r.h),
        };
    }
    out
}

fn name(s: Option<Scheme>) -> &'static str {
    s.map_or("trace", Scheme::name)
}

pub(crate) fn same_step(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

pub(crate) fn grid_axes<T: HasCell>(cells: &[T]) -> (Vec<f64>, Vec<Option<Scheme>>) {
    let mut steps: Vec<f64> = Vec::new();
    let mut schemes: Vec<Option<Scheme>> = Vec::new();
    for c in cells {
        if !steps.iter().any(|h| same_step(*h, c.step())) {
            steps.push(c.step());
        }
        if !schemes.contains(&c.scheme_id()) {
            schemes.push(c.scheme_id());
        }
    }
    steps.sort_by(f64::total_cmp);
    (steps, schemes)
}

pub(crate) trait HasCell {
    fn step(&self) -> f64;
    fn scheme_id(&self) -> Option<Scheme>;
}

impl HasCell for ErrorReport {
    fn step(&self) -> f64 {
        self.h
    }
    fn scheme_id(&self) -> Option<Scheme> {
        self.scheme
    }
}

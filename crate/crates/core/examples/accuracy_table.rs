//! Voltage and phase errors of every scheme against a 5 us reference run.

use froi::metrics::{self, ErrorReport};
use froi::{Scenario, Scheme};

fn main() -> froi::Result<()> {
    let reference = froi::engine::run(&Scenario::two_bus().with_step_size(5e-6))?.series;
    let mut reports = Vec::new();
    for h in [125e-6, 250e-6, 500e-6, 1e-3, 2e-3, 4e-3] {
        for scheme in Scheme::ALL {
            let sc = Scenario::two_bus().with_scheme(scheme).with_step_size(h);
            reports.push(match froi::engine::run(&sc) {
                Ok(sim) => metrics::compare(&sim.series, &reference, Some(scheme))?,
                Err(_) => ErrorReport::diverged(Some(scheme), h),
            });
        }
    }
    print!("{}", metrics::error_table(&reports));
    Ok(())
}

//! Median step-loop wall time on ten disconnected copies of the test system.
//!
//! Timings are only comparable on an otherwise idle machine.

use froi::{bench, Scenario, Scheme};

fn main() -> froi::Result<()> {
    let steps = [125e-6, 250e-6, 500e-6, 1e-3, 2e-3, 4e-3];
    let cells = bench::bench_grid(&Scenario::two_bus(), &Scheme::ALL, &steps, 10, 3)?;
    print!("{}", bench::bench_table(&cells));
    Ok(())
}

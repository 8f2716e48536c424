//! The grid-feeding converter regulating its power before the fault.

use froi::{Scenario, Scheme};

fn main() -> froi::Result<()> {
    let sc = Scenario::two_bus()
        .with_scheme(Scheme::Scheme1)
        .with_step_size(5e-4)
        .with_duration(0.2);
    let sim = froi::engine::run(&sc)?;
    let s = &sim.series;
    let col = |name| s.column(name).expect("recorded column");
    let (p, q, v, d) = (col("p_meas"), col("q_meas"), col("v_om_meas"), col("delta"));
    println!(
        "{:>6} {:>8} {:>8} {:>8} {:>9}",
        "t (s)", "p_meas", "q_meas", "v_meas", "delta"
    );
    for k in (0..s.len()).step_by(40) {
        println!(
            "{:>6.3} {:>8.4} {:>8.4} {:>8.4} {:>9.5}",
            s.time()[k],
            p[k],
            q[k],
            v[k],
            d[k]
        );
    }
    println!(
        "{} steps, at most {} Newton solves per step",
        sim.stats.steps.len(),
        sim.stats.max_iterations()
    );
    Ok(())
}

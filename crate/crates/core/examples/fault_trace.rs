//! Runs the phase-B fault scenario and writes the CSV trace.
//!
//! Usage: `cargo run --release --example fault_trace [output.csv]`

use froi::{trace, Scenario, Scheme};

fn main() -> froi::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fault_trace.csv".into());
    let sc = Scenario::two_bus()
        .with_scheme(Scheme::Scheme1)
        .with_step_size(5e-4)
        .with_duration(0.5);
    let sim = froi::engine::run(&sc)?;
    trace::save(&sim.series, &path)?;

    let s = &sim.series;
    let vb = s.column("v_b").expect("bus voltage");
    let ib = s.column("i_b").expect("filter current");
    for (label, t0) in [("fault applied", 0.2), ("fault cleared", 0.4)] {
        println!("{label} at {t0} s");
        let k0 = (t0 / s.h).round() as usize;
        for k in k0 - 2..k0 + 5 {
            println!(
                "  t {:.4}  v_b {:+.4}  i_b {:+.4}",
                s.time()[k],
                vb[k],
                ib[k]
            );
        }
    }
    println!("wrote {} rows to {path}", s.len());
    Ok(())
}

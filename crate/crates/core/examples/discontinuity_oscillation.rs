//! Trapezoidal ringing after fault clearing, with and without switching to
//! backward Euler for the steps that follow the event.
//!
//! With series R-L loads the bus is purely inductive, so clearing the fault
//! forces a current step that the trapezoidal rule turns into a voltage that
//! alternates sign every step.

use froi::network::LoadModel;
use froi::Scenario;

fn main() -> froi::Result<()> {
    let h: f64 = 1e-4;
    let clear = (0.4 / h).round() as usize;
    for swap_steps in [2, 0] {
        let mut sc = Scenario::two_bus()
            .with_step_size(h)
            .with_duration(0.41)
            .with_swap_steps(swap_steps);
        sc.network.load_model = LoadModel::Series;
        let sim = froi::engine::run(&sc)?;
        let vb = sim.series.column("v_b").expect("bus voltage");
        let shown: Vec<String> = vb[clear - 1..clear + 8]
            .iter()
            .map(|v| format!("{v:+.3}"))
            .collect();
        println!("swap_steps = {swap_steps}: v_b {}", shown.join(" "));
    }
    Ok(())
}

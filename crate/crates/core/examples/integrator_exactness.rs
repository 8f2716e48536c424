//! Per-step error of every integrator on a 60 Hz rotation `x'' = -w^2 x`.
//!
//! Integrators A and B are exact at the selected frequency for any step size.

use froi::integrators::{coefficients, IntegratorKind, LinearOde, OMEGA_60HZ};
use nalgebra::{dmatrix, dvector};

fn main() -> froi::Result<()> {
    let ode = LinearOde::new(dmatrix![0.0, -OMEGA_60HZ; OMEGA_60HZ, 0.0]);
    print!("{:>8}", "h (ms)");
    for kind in IntegratorKind::ALL {
        print!(" {:>15}", kind.to_string());
    }
    println!();
    for ms in [0.125, 0.25, 0.5, 1.0, 2.0, 4.0] {
        let h = ms * 1e-3;
        let x = dvector![1.0, 0.0];
        let (s, c) = (OMEGA_60HZ * h).sin_cos();
        let exact = dvector![c, s];
        print!("{ms:>8}");
        for kind in IntegratorKind::ALL {
            let next = ode.step(&coefficients(kind, h, OMEGA_60HZ)?, &x)?;
            print!(" {:>15.3e}", (next - &exact).norm());
        }
        println!();
    }
    Ok(())
}

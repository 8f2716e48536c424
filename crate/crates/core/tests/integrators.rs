use froi::integrators::{coefficients, IntegratorKind, LinearOde, StatePoint, OMEGA_60HZ};
use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use proptest::prelude::*;

const STEPS_MS: [f64; 5] = [0.125, 0.25, 0.5, 1.0, 2.0];

fn rotation(w: f64) -> LinearOde {
    LinearOde::new(dmatrix![0.0, -w; w, 0.0])
}

fn exact_rotation(w: f64, h: f64, x: &DVector<f64>) -> DVector<f64> {
    let (s, c) = (w * h).sin_cos();
    dvector![c * x[0] - s * x[1], s * x[0] + c * x[1]]
}

#[test]
fn a_and_b_are_exact_at_the_selected_frequency() {
    let ode = rotation(OMEGA_60HZ);
    for ms in STEPS_MS {
        let h = ms * 1e-3;
        for kind in [IntegratorKind::A, IntegratorKind::B] {
            let c = coefficients(kind, h, OMEGA_60HZ).unwrap();
            let mut x = dvector![1.0, 0.0];
            for _ in 0..50 {
                let next = ode.step(&c, &x).unwrap();
                let exact = exact_rotation(OMEGA_60HZ, h, &x);
                let rel = (&next - &exact).norm() / exact.norm();
                assert!(rel <= 1e-10, "{kind} h={h}: {rel:e}");
                x = exact;
            }
        }
    }
}

#[test]
fn other_integrators_are_not_exact_on_rotation() {
    let ode = rotation(OMEGA_60HZ);
    let h = 1e-3;
    let x = dvector![1.0, 0.0];
    for kind in [
        IntegratorKind::C,
        IntegratorKind::Trapezoidal,
        IntegratorKind::BackwardEuler,
    ] {
        let c = coefficients(kind, h, OMEGA_60HZ).unwrap();
        let rel = (ode.step(&c, &x).unwrap() - exact_rotation(OMEGA_60HZ, h, &x)).norm();
        assert!(rel > 1e-9, "{kind}: {rel:e}");
    }
}

/// Largest residual of the discretized equation on `x = t^k` over a few steps,
/// relative to the size of `x`.
fn monomial_defect(kind: IntegratorKind, k: i32, h: f64) -> f64 {
    let point = |t: f64| {
        let kf = f64::from(k);
        let xd = if k >= 1 { kf * t.powi(k - 1) } else { 0.0 };
        let xdd = if k >= 2 {
            kf * (kf - 1.0) * t.powi(k - 2)
        } else {
            0.0
        };
        StatePoint::new(t.powi(k), xd, xdd)
    };
    let c = coefficients(kind, h, OMEGA_60HZ).unwrap();
    (1..=10)
        .map(|i| {
            let t = 0.5 + f64::from(i) * h;
            c.residual(point(t), point(t - h)).abs() / t.powi(k).max(1.0)
        })
        .fold(0.0, f64::max)
}

#[test]
fn polynomial_exactness_orders() {
    let h = 0.05;
    let cases = [
        (IntegratorKind::C, 4),
        (IntegratorKind::Trapezoidal, 2),
        (IntegratorKind::BackwardEuler, 1),
    ];
    for (kind, degree) in cases {
        for k in 0..=degree {
            let d = monomial_defect(kind, k, h);
            assert!(d <= 1e-12, "{kind} t^{k}: {d:e}");
        }
        let d = monomial_defect(kind, degree + 1, h);
        assert!(d > 1e-9, "{kind} should miss t^{}: {d:e}", degree + 1);
    }
}

fn decay_error(kind: IntegratorKind, h: f64) -> f64 {
    let ode = LinearOde::new(DMatrix::from_element(1, 1, -1.0));
    let c = coefficients(kind, h, OMEGA_60HZ).unwrap();
    let n = (1.0 / h).round() as usize;
    let mut x = dvector![1.0];
    for _ in 0..n {
        x = ode.step(&c, &x).unwrap();
    }
    (x[0] - (-1.0f64).exp()).abs()
}

#[test]
fn observed_convergence_orders() {
    let cases = [
        (IntegratorKind::BackwardEuler, 1.0),
        (IntegratorKind::Trapezoidal, 2.0),
        (IntegratorKind::C, 4.0),
    ];
    for (kind, nominal) in cases {
        let steps = [0.1, 0.05, 0.025];
        let errs: Vec<f64> = steps.iter().map(|h| decay_error(kind, *h)).collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(
                (order - nominal).abs() <= 0.2,
                "{kind}: order {order:.3}, nominal {nominal}"
            );
        }
    }
}

#[test]
fn replacements_are_one_step() {
    for kind in IntegratorKind::ALL {
        let r = coefficients(kind.replacement(), 1e-3, OMEGA_60HZ).unwrap();
        assert_eq!((r.b_m1, r.c_m1), (0.0, 0.0), "{kind}");
    }
}

proptest! {
    #[test]
    fn constants_are_integrated_exactly(k in -1e3f64..1e3, ms in 0.01f64..2.5, which in 0usize..6) {
        let kind = IntegratorKind::ALL[which];
        let c = coefficients(kind, ms * 1e-3, OMEGA_60HZ).unwrap();
        let p = StatePoint::new(k, 0.0, 0.0);
        prop_assert_eq!(c.residual(p, p), 0.0);
        prop_assert_eq!(c.residual(StatePoint::default(), StatePoint::default()), 0.0);
    }

    #[test]
    fn a_tracks_any_rotation_phase(phase in 0.0f64..std::f64::consts::TAU, ms in 0.05f64..2.0) {
        let h = ms * 1e-3;
        let c = coefficients(IntegratorKind::A, h, OMEGA_60HZ).unwrap();
        let x = dvector![phase.cos(), phase.sin()];
        let next = rotation(OMEGA_60HZ).step(&c, &x).unwrap();
        prop_assert!((next - exact_rotation(OMEGA_60HZ, h, &x)).norm() <= 1e-10);
    }

    #[test]
    fn first_derivative_weights_sum_to_h(ms in 0.01f64..2.5, which in 0usize..6) {
        // B trades this consistency condition for exactness at omega_select.
        let kind = IntegratorKind::ALL[which];
        prop_assume!(kind != IntegratorKind::B);
        let h = ms * 1e-3;
        let c = coefficients(kind, h, OMEGA_60HZ).unwrap();
        prop_assert!(((c.b0 + c.b_m1) - h).abs() <= 1e-15);
    }
}

//! Discretization coefficients for one- and two-derivative integrators.
//!
//! Every integrator is expressed in the single implicit form
//!
//! ```text
//! x(t) = x(t-h) + b0 x'(t) + b_m1 x'(t-h) + c0 x''(t) + c_m1 x''(t-h)
//! ```
//!
//! Integrators A and B are exact for sinusoids at `omega_select` (and for
//! constants); C and D are Obreshkov-type rules accurate for slowly varying
//! signals. Trapezoidal and backward Euler use only the first derivative.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SimError};

/// Default selected angular frequency (60 Hz utility frequency).
pub const OMEGA_60HZ: f64 = 2.0 * PI * 60.0;

/// Below this value of `omega_select * h`, Integrator A uses a series for its
/// second-derivative coefficients instead of the cotangent form.
const A_SERIES_THRESHOLD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntegratorKind {
    A,
    B,
    C,
    D,
    Trapezoidal,
    BackwardEuler,
}

impl IntegratorKind {
    pub const ALL: [IntegratorKind; 6] = [
        IntegratorKind::A,
        IntegratorKind::B,
        IntegratorKind::C,
        IntegratorKind::D,
        IntegratorKind::Trapezoidal,
        IntegratorKind::BackwardEuler,
    ];

    /// Single-step integrator used right after a discontinuity.
    pub fn replacement(self) -> IntegratorKind {
        match self {
            IntegratorKind::A | IntegratorKind::B => IntegratorKind::B,
            IntegratorKind::C | IntegratorKind::D => IntegratorKind::D,
            IntegratorKind::Trapezoidal | IntegratorKind::BackwardEuler => {
                IntegratorKind::BackwardEuler
            }
        }
    }

    pub fn uses_second_derivative(self) -> bool {
        !matches!(
            self,
            IntegratorKind::Trapezoidal | IntegratorKind::BackwardEuler
        )
    }

    pub fn needs_omega(self) -> bool {
        matches!(self, IntegratorKind::A | IntegratorKind::B)
    }

    fn index(self) -> usize {
        match self {
            IntegratorKind::A => 0,
            IntegratorKind::B => 1,
            IntegratorKind::C => 2,
            IntegratorKind::D => 3,
            IntegratorKind::Trapezoidal => 4,
            IntegratorKind::BackwardEuler => 5,
        }
    }
}

impl fmt::Display for IntegratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IntegratorKind::A => "A",
            IntegratorKind::B => "B",
            IntegratorKind::C => "C",
            IntegratorKind::D => "D",
            IntegratorKind::Trapezoidal => "trapezoidal",
            IntegratorKind::BackwardEuler => "backward-euler",
        };
        f.write_str(s)
    }
}

/// Value, first and second time derivative of a state at one time point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StatePoint {
    pub x: f64,
    pub xd: f64,
    pub xdd: f64,
}

impl StatePoint {
    pub const fn new(x: f64, xd: f64, xdd: f64) -> Self {
        Self { x, xd, xdd }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Coefficients4 {
    pub b0: f64,
    pub b_m1: f64,
    pub c0: f64,
    pub c_m1: f64,
}

impl Coefficients4 {
    /// `x_t - x_prev - b0 xd_t - b_m1 xd_prev - c0 xdd_t - c_m1 xdd_prev`;
    /// zero exactly when the discretized equation holds.
    #[inline]
    pub fn residual(&self, now: StatePoint, prev: StatePoint) -> f64 {
        now.x
            - prev.x
            - self.b0 * now.xd
            - self.b_m1 * prev.xd
            - self.c0 * now.xdd
            - self.c_m1 * prev.xdd
    }

    /// Everything in the residual that depends only on the previous point.
    #[inline]
    pub fn history(&self, prev: StatePoint) -> f64 {
        prev.x + self.b_m1 * prev.xd + self.c_m1 * prev.xdd
    }

    pub fn uses_history_derivatives(&self) -> bool {
        self.b_m1 != 0.0 || self.c_m1 != 0.0
    }
}

/// Closed-form coefficients for `kind` at step size `h`.
///
/// `omega_select` is only consulted for Integrators A and B, which require
/// `0 < omega_select * h < pi`.
pub fn coefficients(kind: IntegratorKind, h: f64, omega_select: f64) -> Result<Coefficients4> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(SimError::Domain(format!(
            "step size must be positive, got {h}"
        )));
    }
    if kind.needs_omega() {
        let wh = omega_select * h;
        if !(omega_select > 0.0 && wh < PI) {
            return Err(SimError::Domain(format!(
                "integrator {kind} needs 0 < omega_select*h < pi, got {wh}"
            )));
        }
    }
    let w = omega_select;
    let c = match kind {
        IntegratorKind::A => {
            let c0 = a_second_coefficient(w, h);
            Coefficients4 {
                b0: h / 2.0,
                b_m1: h / 2.0,
                c0,
                c_m1: -c0,
            }
        }
        IntegratorKind::B => {
            let half = (w * h / 2.0).sin();
            Coefficients4 {
                b0: (w * h).sin() / w,
                b_m1: 0.0,
                // (cos(wh) - 1) / w^2 without the cancellation
                c0: -2.0 * half * half / (w * w),
                c_m1: 0.0,
            }
        }
        IntegratorKind::C => Coefficients4 {
            b0: h / 2.0,
            b_m1: h / 2.0,
            c0: -h * h / 12.0,
            c_m1: h * h / 12.0,
        },
        IntegratorKind::D => Coefficients4 {
            b0: h,
            b_m1: 0.0,
            c0: -h * h / 2.0,
            c_m1: 0.0,
        },
        IntegratorKind::Trapezoidal => Coefficients4 {
            b0: h / 2.0,
            b_m1: h / 2.0,
            c0: 0.0,
            c_m1: 0.0,
        },
        IntegratorKind::BackwardEuler => Coefficients4 {
            b0: h,
            b_m1: 0.0,
            c0: 0.0,
            c_m1: 0.0,
        },
    };
    Ok(c)
}

/// `-1/w^2 + h/(2w) cot(wh/2)`.
fn a_second_coefficient(w: f64, h: f64) -> f64 {
    let wh = w * h;
    if wh < A_SERIES_THRESHOLD {
        // th cot(th) = 1 - th^2/3 - th^4/45 - 2th^6/945 - th^8/4725 - 2th^10/93555 - ...
        let th2 = (wh / 2.0) * (wh / 2.0);
        let tail = 1.0 / 3.0
            + th2
                * (1.0 / 45.0
                    + th2
                        * (2.0 / 945.0
                            + th2
                                * (1.0 / 4725.0
                                    + th2 * (2.0 / 93555.0 + th2 * 1382.0 / 638_512_875.0))));
        -(h * h / 4.0) * tail
    } else {
        -1.0 / (w * w) + h / (2.0 * w) / (wh / 2.0).tan()
    }
}

/// When the Newton Jacobian is rebuilt and factorized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum JacobianPolicy {
    /// At the start of every step, then reused within the step while the
    /// iteration contracts.
    #[default]
    PerStep,
    /// Reused across steps until an event, a coefficient change or slow
    /// contraction forces a rebuild. Cheaper, but cost grows sublinearly in
    /// the number of steps.
    Adaptive,
}

impl std::str::FromStr for JacobianPolicy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_step" => Ok(Self::PerStep),
            "adaptive" => Ok(Self::Adaptive),
            _ => Err(SimError::Parse(format!(
                "unknown jacobian policy '{s}', expected per_step or adaptive"
            ))),
        }
    }
}

/// Fixed-step solver settings shared by a whole run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub h: f64,
    pub omega_select: f64,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub jacobian: JacobianPolicy,
}

impl SolverConfig {
    pub fn new(h: f64) -> Self {
        Self {
            h,
            omega_select: OMEGA_60HZ,
            newton_tol: 1e-8,
            max_iter: 50,
            jacobian: JacobianPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(SimError::Domain(format!(
                "step size must be positive, got {}",
                self.h
            )));
        }
        if !(self.omega_select > 0.0) {
            return Err(SimError::Domain("omega_select must be positive".into()));
        }
        if self.omega_select * self.h >= PI {
            return Err(SimError::Domain(format!(
                "omega_select*h = {} must stay below pi",
                self.omega_select * self.h
            )));
        }
        if !(self.newton_tol > 0.0) || self.max_iter == 0 {
            return Err(SimError::Domain(
                "newton_tol and max_iter must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Coefficients of all six integrators for one `(h, omega_select)`, computed
/// once per run.
#[derive(Clone, Debug)]
pub struct CoefficientTable {
    table: [Coefficients4; 6],
}

impl CoefficientTable {
    pub fn new(h: f64, omega_select: f64) -> Result<Self> {
        let mut table = [Coefficients4 {
            b0: 0.0,
            b_m1: 0.0,
            c0: 0.0,
            c_m1: 0.0,
        }; 6];
        for kind in IntegratorKind::ALL {
            table[kind.index()] = coefficients(kind, h, omega_select)?;
        }
        Ok(Self { table })
    }

    #[inline]
    pub fn get(&self, kind: IntegratorKind) -> &Coefficients4 {
        &self.table[kind.index()]
    }
}

/// Steps the linear system `x' = M x` with any of the integrators. Used by the
/// examples and tests to study the integrators in isolation.
#[derive(Clone, Debug)]
pub struct LinearOde {
    m: DMatrix<f64>,
    m2: DMatrix<f64>,
}

impl LinearOde {
    pub fn new(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "system matrix must be square");
        let m2 = &m * &m;
        Self { m, m2 }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// One step from `x_prev`; with `x'' = M x' = M^2 x` the discretized
    /// equation is linear in `x_t`.
    pub fn step(&self, coeffs: &Coefficients4, x_prev: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        let lhs = DMatrix::identity(n, n) - &self.m * coeffs.b0 - &self.m2 * coeffs.c0;
        let rhs = x_prev + &self.m * x_prev * coeffs.b_m1 + &self.m2 * x_prev * coeffs.c_m1;
        lhs.lu()
            .solve(&rhs)
            .ok_or(SimError::Singular { time: f64::NAN })
    }
}

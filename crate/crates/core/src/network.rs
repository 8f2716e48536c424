//! Unbalanced three-phase network in the instantaneous domain (per unit).
//!
//! Branches and loads are series R-L elements whose currents are states.
//! Ideal sources impose node voltages; faults are switchable resistors to
//! ground. Everything is wye-grounded.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dual::Scalar;
use crate::error::{Result, SimError};

pub type ThreePhase<T = f64> = [T; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        match self {
            Phase::A => 0,
            Phase::B => 1,
            Phase::C => 2,
        }
    }

    pub fn from_index(i: usize) -> Phase {
        Phase::ALL[i]
    }

    /// Positive-sequence displacement: 0, -2pi/3, +2pi/3.
    pub fn displacement(self) -> f64 {
        -2.0 * PI / 3.0 * self.index() as f64
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::A => "A",
            Phase::B => "B",
            Phase::C => "C",
        })
    }
}

impl FromStr for Phase {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Phase::A),
            "B" => Ok(Phase::B),
            "C" => Ok(Phase::C),
            _ => Err(SimError::Parse(format!("unknown phase '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    pub id: String,
}

/// Balanced series R-L branch. `x` is the reactance at the base frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub from: String,
    pub to: String,
    pub r: f64,
    pub x: f64,
}

/// Constant impedance load specified by its per-phase powers at 1.0 p.u.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantImpedanceLoad {
    pub bus: String,
    pub p: ThreePhase,
    pub q: ThreePhase,
}

/// Series resistance and inductance of one load phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesRl {
    pub r: f64,
    pub l: f64,
}

/// How a constant impedance load phase is realized as circuit elements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LoadModel {
    /// Conductance `P` in parallel with an inductor of reactance `1/Q`.
    #[default]
    Parallel,
    /// Resistance and inductance in series.
    Series,
}

impl FromStr for LoadModel {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parallel" => Ok(LoadModel::Parallel),
            "series" => Ok(LoadModel::Series),
            _ => Err(SimError::Parse(format!(
                "unknown load model '{s}' (expected parallel or series)"
            ))),
        }
    }
}

/// Elements of one load phase, all connected to ground.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseLoad {
    pub conductance: f64,
    pub inductor: Option<SeriesRl>,
}

impl ConstantImpedanceLoad {
    /// Admittance `conj(S) / |V|^2` at |V| = 1 and the base frequency.
    pub fn phase_admittance(&self, phase: Phase) -> Complex64 {
        Complex64::new(self.p[phase.index()], -self.q[phase.index()])
    }

    /// Circuit realization of one phase. `None` for a phase that draws no
    /// power.
    pub fn phase_elements(
        &self,
        phase: Phase,
        omega_base: f64,
        model: LoadModel,
    ) -> Option<PhaseLoad> {
        let p = self.p[phase.index()];
        let q = self.q[phase.index()];
        let s2 = p * p + q * q;
        if s2 == 0.0 {
            return None;
        }
        let load = match model {
            LoadModel::Parallel => PhaseLoad {
                conductance: p,
                inductor: (q > 0.0).then(|| SeriesRl {
                    r: 0.0,
                    l: 1.0 / (omega_base * q),
                }),
            },
            LoadModel::Series if q > 0.0 => PhaseLoad {
                conductance: 0.0,
                inductor: Some(SeriesRl {
                    r: p / s2,
                    l: q / s2 / omega_base,
                }),
            },
            LoadModel::Series => PhaseLoad {
                conductance: 1.0 / (p / s2),
                inductor: None,
            },
        };
        Some(load)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdealSource {
    pub bus: String,
    pub magnitude: ThreePhase,
    pub angle_deg: ThreePhase,
}

impl IdealSource {
    pub fn phasor(&self, phase: Phase) -> Complex64 {
        let i = phase.index();
        Complex64::from_polar(self.magnitude[i], self.angle_deg[i].to_radians())
    }

    /// Instantaneous voltage and its time derivative.
    pub fn voltage(&self, phase: Phase, t: f64, omega: f64) -> (f64, f64) {
        let i = phase.index();
        let arg = omega * t + self.angle_deg[i].to_radians();
        let (s, c) = arg.sin_cos();
        (self.magnitude[i] * c, -omega * self.magnitude[i] * s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub omega_base: f64,
    pub load_model: LoadModel,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub loads: Vec<ConstantImpedanceLoad>,
    pub sources: Vec<IdealSource>,
}

impl Network {
    pub fn new(omega_base: f64) -> Self {
        Self {
            omega_base,
            load_model: LoadModel::default(),
            buses: Vec::new(),
            branches: Vec::new(),
            loads: Vec::new(),
            sources: Vec::new(),
        }
    }

    pub fn bus_index(&self) -> HashMap<&str, usize> {
        self.buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id.as_str(), i))
            .collect()
    }

    /// Structural checks that do not depend on converters or events.
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_base > 0.0) {
            return Err(SimError::Validation("omega_base must be positive".into()));
        }
        let index = self.bus_index();
        if index.len() != self.buses.len() {
            return Err(SimError::Validation("bus ids must be unique".into()));
        }
        let known = |id: &str, what: &str| -> Result<()> {
            if index.contains_key(id) {
                Ok(())
            } else {
                Err(SimError::Validation(format!(
                    "{what} refers to unknown bus '{id}'"
                )))
            }
        };
        for b in &self.branches {
            known(&b.from, "branch")?;
            known(&b.to, "branch")?;
            if b.from == b.to {
                return Err(SimError::Validation(format!(
                    "branch connects '{}' to itself",
                    b.from
                )));
            }
            if !(b.r >= 0.0 && b.x >= 0.0 && b.r + b.x > 0.0) {
                return Err(SimError::Validation(format!(
                    "branch {}-{} needs non-negative r and x, not both zero",
                    b.from, b.to
                )));
            }
        }
        for l in &self.loads {
            known(&l.bus, "load")?;
            if l.p
                .iter()
                .chain(l.q.iter())
                .any(|v| *v < 0.0 || !v.is_finite())
            {
                return Err(SimError::Validation(format!(
                    "load at '{}' must have non-negative finite p and q",
                    l.bus
                )));
            }
        }
        let mut sourced = HashMap::new();
        for s in &self.sources {
            known(&s.bus, "source")?;
            if sourced.insert(s.bus.as_str(), ()).is_some() {
                return Err(SimError::Validation(format!(
                    "bus '{}' has two sources",
                    s.bus
                )));
            }
        }
        Ok(())
    }
}

/// Series R-L dynamics for one phase: `di/dt` and, given the terminal
/// voltage derivatives, `d2i/dt2`.
#[inline]
pub fn branch_dynamics<S: Scalar>(r: f64, l: f64, v_from: S, v_to: S, i: S) -> S {
    (v_from - v_to - i * r) * (1.0 / l)
}

/// The chain-rule second derivative of [`branch_dynamics`].
#[inline]
pub fn branch_second_derivative(r: f64, l: f64, vd_from: f64, vd_to: f64, di: f64) -> f64 {
    (vd_from - vd_to - r * di) / l
}

/// How a node's residual rows are formed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeKind {
    /// Kirchhoff current law.
    Free,
    /// Voltage imposed by an ideal source: `mag * cos(omega t + angle)`.
    Source { magnitude: f64, angle: f64 },
}

impl NodeKind {
    #[inline]
    pub fn source_voltage(&self, t: f64, omega: f64) -> Option<(f64, f64)> {
        match *self {
            NodeKind::Free => None,
            NodeKind::Source { magnitude, angle } => {
                let (s, c) = (omega * t + angle).sin_cos();
                Some((magnitude * c, -omega * magnitude * s))
            }
        }
    }
}

/// Network rows of the step equations.
///
/// `leaving[i]` is the sum of the instantaneous currents flowing out of node
/// `i` into devices. Free nodes get their KCL residual; source nodes get
/// `v - v_source(t)`. With derivative rows, `leaving_dot` and `vd` give the
/// time-differentiated counterparts (scaled by `h` so every row is in p.u.).
#[allow(clippy::too_many_arguments)]
pub fn assemble_network_equations(
    nodes: &[NodeKind],
    t: f64,
    omega: f64,
    h: f64,
    v: &[f64],
    leaving: &[f64],
    derivative_rows: Option<(&[f64], &[f64])>,
    residual: &mut [f64],
) {
    let n = nodes.len();
    for (i, node) in nodes.iter().enumerate() {
        let src = node.source_voltage(t, omega);
        residual[i] = match src {
            None => leaving[i],
            Some((vs, _)) => v[i] - vs,
        };
        if let Some((vd, leaving_dot)) = derivative_rows {
            residual[n + i] = match src {
                None => h * leaving_dot[i],
                Some((_, vsd)) => h * (vd[i] - vsd),
            };
        }
    }
}

/// Phasor-domain steady state at the base frequency.
///
/// Converters are represented by fixed current injections (phasors, flowing
/// into the bus). Returns the voltage phasor of every bus.
pub fn steady_state_voltages(
    network: &Network,
    injections: &[(usize, ThreePhase<Complex64>)],
) -> Result<Vec<ThreePhase<Complex64>>> {
    let nb = network.buses.len();
    let index = network.bus_index();
    let n = 3 * nb;
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    let mut rhs = DVector::<Complex64>::zeros(n);
    let mut fixed: Vec<Option<Complex64>> = vec![None; n];

    for s in &network.sources {
        let b = index[s.bus.as_str()];
        for p in Phase::ALL {
            fixed[3 * b + p.index()] = Some(s.phasor(p));
        }
    }
    for br in &network.branches {
        let f = index[br.from.as_str()];
        let to = index[br.to.as_str()];
        let yb = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        for p in 0..3 {
            let (i, j) = (3 * f + p, 3 * to + p);
            y[(i, i)] += yb;
            y[(j, j)] += yb;
            y[(i, j)] -= yb;
            y[(j, i)] -= yb;
        }
    }
    for ld in &network.loads {
        let b = index[ld.bus.as_str()];
        for p in Phase::ALL {
            y[(3 * b + p.index(), 3 * b + p.index())] += ld.phase_admittance(p);
        }
    }
    for (b, cur) in injections {
        for p in 0..3 {
            rhs[3 * b + p] += cur[p];
        }
    }
    // Eliminate imposed voltages.
    let free: Vec<usize> = (0..n).filter(|i| fixed[*i].is_none()).collect();
    let mut volts = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        if let Some(v) = fixed[i] {
            volts[i] = v;
        }
    }
    if !free.is_empty() {
        let m = free.len();
        let mut a = DMatrix::<Complex64>::zeros(m, m);
        let mut b = DVector::<Complex64>::zeros(m);
        for (r, &i) in free.iter().enumerate() {
            b[r] = rhs[i];
            for j in 0..n {
                if let Some(v) = fixed[j] {
                    b[r] -= y[(i, j)] * v;
                }
            }
            for (c, &j) in free.iter().enumerate() {
                a[(r, c)] = y[(i, j)];
            }
        }
        let sol = a
            .lu()
            .solve(&b)
            .ok_or_else(|| SimError::Validation("network admittance matrix is singular".into()))?;
        for (r, &i) in free.iter().enumerate() {
            volts[i] = sol[r];
        }
    }
    Ok((0..nb)
        .map(|b| [volts[3 * b], volts[3 * b + 1], volts[3 * b + 2]])
        .collect())
}

/// Positive-sequence component as seen by the in-phase/quadrature transform:
/// the constant part of `x_in + j x_qu` for steady sinusoids.
pub fn positive_sequence(x: &ThreePhase<Complex64>) -> Complex64 {
    let m = (x[0] - 0.5 * x[1] - 0.5 * x[2]) * (2.0 / 3.0);
    let n = (x[1] - x[2]) * (1.0 / 3.0f64.sqrt());
    (m + Complex64::i() * n) * 0.5
}

/// `Re(X e^{j w t})` and its time derivative.
#[inline]
pub fn instantaneous(x: Complex64, omega: f64, t: f64) -> (f64, f64) {
    let r = x * Complex64::from_polar(1.0, omega * t);
    (r.re, (Complex64::i() * omega * r).re)
}

//! Grid-feeding converter: L filter, averaged VSC, power controller, current
//! controller, and the measurement and synchronization chain with its PLL.
//!
//! All blocks are written generic over [`Scalar`] so the engine can evaluate
//! them either for state derivatives (`f64`) or for their total time
//! derivatives ([`Dual`](crate::dual::Dual)).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dual::Scalar;
use crate::network::{positive_sequence, ThreePhase};

const SQRT3_OVER_2: f64 = 0.866_025_403_784_438_6;
const TWO_THIRDS: f64 = 2.0 / 3.0;

/// Dynamic parameters of the converter, named after the usual controller
/// gains: `k_p_iod` is the proportional gain of the d-axis power loop, etc.
#[derive(Clone, Debug, PartialEq)]
pub struct ConverterParams {
    pub l_f: f64,
    pub p_ref: f64,
    pub q_ref: f64,
    pub t_pcon: f64,
    pub t_qcon: f64,
    pub k_p_iod: f64,
    pub k_i_iod: f64,
    pub k_p_ioq: f64,
    pub k_i_ioq: f64,
    pub k_p_vid: f64,
    pub k_i_vid: f64,
    pub k_p_viq: f64,
    pub k_i_viq: f64,
    pub k_p_pll: f64,
    pub k_i_pll: f64,
    pub t_p: f64,
    pub t_q: f64,
    pub t_v: f64,
}

impl Default for ConverterParams {
    /// The two-bus test case tuning: P = 1.0, Q = 0.35.
    fn default() -> Self {
        Self {
            l_f: 4.2441e-4,
            p_ref: 1.0,
            q_ref: 0.35,
            t_pcon: 0.1,
            t_qcon: 0.1,
            k_p_iod: 1.3,
            k_i_iod: 10.0,
            k_p_ioq: 1.3,
            k_i_ioq: 10.0,
            k_p_vid: 0.25,
            k_i_vid: 0.01,
            k_p_viq: 0.25,
            k_i_viq: 0.01,
            k_p_pll: 150.0,
            k_i_pll: 9000.0,
            t_p: 0.02,
            t_q: 0.02,
            t_v: 0.02,
        }
    }
}

impl ConverterParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("L_f", self.l_f),
            ("T_Pcon", self.t_pcon),
            ("T_Qcon", self.t_qcon),
            ("T_p", self.t_p),
            ("T_Q", self.t_q),
            ("T_V", self.t_v),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Complex quantity in the device reference frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Phasor<S = f64> {
    pub d: S,
    pub q: S,
}

impl<S: Scalar> Phasor<S> {
    pub fn new(d: S, q: S) -> Self {
        Self { d, q }
    }
}

impl Phasor<f64> {
    pub fn magnitude(&self) -> f64 {
        self.d.hypot(self.q)
    }

    pub fn angle(&self) -> f64 {
        self.q.atan2(self.d)
    }
}

/// Which integrator family a state belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StateRole {
    /// Dominated by the utility frequency (inductor currents).
    UtilityFrequency,
    /// Slow controller, PLL, and measurement states.
    Control,
    /// Slow states of the power controller.
    PowerControl,
}

/// Named view of the converter states. The engine stores them flat in the
/// order of the `*_IDX` constants.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConverterState {
    pub i_filter: ThreePhase,
    pub p_ref_lag: f64,
    pub q_ref_lag: f64,
    /// Power controller integrators (d, q).
    pub pc_int: [f64; 2],
    /// Current controller integrators (d, q).
    pub cc_int: [f64; 2],
    pub pll_int: f64,
    /// Phasor angle relative to the synchronous frame.
    pub pll_delta: f64,
    pub p_meas: f64,
    pub q_meas: f64,
    pub v_om_meas: f64,
}

pub const I_FILTER_IDX: usize = 0;
pub const P_LAG_IDX: usize = 3;
pub const Q_LAG_IDX: usize = 4;
pub const PC_INT_IDX: usize = 5;
pub const CC_INT_IDX: usize = 7;
pub const PLL_INT_IDX: usize = 9;
pub const PLL_DELTA_IDX: usize = 10;
pub const P_MEAS_IDX: usize = 11;
pub const Q_MEAS_IDX: usize = 12;
pub const V_MEAS_IDX: usize = 13;
pub const N_STATES: usize = 14;

pub const STATE_ROLES: [StateRole; N_STATES] = [
    StateRole::UtilityFrequency,
    StateRole::UtilityFrequency,
    StateRole::UtilityFrequency,
    StateRole::PowerControl,
    StateRole::PowerControl,
    StateRole::PowerControl,
    StateRole::PowerControl,
    StateRole::Control,
    StateRole::Control,
    StateRole::Control,
    StateRole::Control,
    StateRole::Control,
    StateRole::Control,
    StateRole::Control,
];

pub const STATE_NAMES: [&str; N_STATES] = [
    "i_a",
    "i_b",
    "i_c",
    "p_ref_lag",
    "q_ref_lag",
    "pc_int_d",
    "pc_int_q",
    "cc_int_d",
    "cc_int_q",
    "pll_int",
    "delta",
    "p_meas",
    "q_meas",
    "v_om_meas",
];

impl ConverterState {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut x = vec![0.0; N_STATES];
        x[..3].copy_from_slice(&self.i_filter);
        x[P_LAG_IDX] = self.p_ref_lag;
        x[Q_LAG_IDX] = self.q_ref_lag;
        x[PC_INT_IDX..PC_INT_IDX + 2].copy_from_slice(&self.pc_int);
        x[CC_INT_IDX..CC_INT_IDX + 2].copy_from_slice(&self.cc_int);
        x[PLL_INT_IDX] = self.pll_int;
        x[PLL_DELTA_IDX] = self.pll_delta;
        x[P_MEAS_IDX] = self.p_meas;
        x[Q_MEAS_IDX] = self.q_meas;
        x[V_MEAS_IDX] = self.v_om_meas;
        x
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            i_filter: [x[0], x[1], x[2]],
            p_ref_lag: x[P_LAG_IDX],
            q_ref_lag: x[Q_LAG_IDX],
            pc_int: [x[PC_INT_IDX], x[PC_INT_IDX + 1]],
            cc_int: [x[CC_INT_IDX], x[CC_INT_IDX + 1]],
            pll_int: x[PLL_INT_IDX],
            pll_delta: x[PLL_DELTA_IDX],
            p_meas: x[P_MEAS_IDX],
            q_meas: x[Q_MEAS_IDX],
            v_om_meas: x[V_MEAS_IDX],
        }
    }
}

/// In-phase and quadrature signals of a three-phase quantity (amplitude
/// invariant; the zero-sequence part is discarded).
#[inline]
pub fn clarke<S: Scalar>(x: ThreePhase<S>) -> (S, S) {
    let x_in = (x[0] - (x[1] + x[2]) * 0.5) * TWO_THIRDS;
    let x_qu = (x[1] - x[2]) * (TWO_THIRDS * SQRT3_OVER_2);
    (x_in, x_qu)
}

/// `e^{-j delta_bar} (x_in + j x_qu)`.
pub fn phase_shift<S: Scalar>(x_in: S, x_qu: S, delta_bar: S) -> Phasor<S> {
    let (s, c) = delta_bar.sin_cos();
    rotate_to_device(x_in, x_qu, s, c)
}

#[inline]
fn rotate_to_device<S: Scalar>(x_in: S, x_qu: S, s: S, c: S) -> Phasor<S> {
    Phasor::new(c * x_in + s * x_qu, c * x_qu - s * x_in)
}

/// Balanced positive-sequence VSC voltages for a voltage order phasor:
/// `v_k = Re(V_ord e^{j(delta_bar - 2 pi k / 3)})`.
pub fn vsc_waveforms<S: Scalar>(v_ord: Phasor<S>, delta_bar: S) -> ThreePhase<S> {
    let (s, c) = delta_bar.sin_cos();
    vsc_from_trig(v_ord, s, c)
}

#[inline]
fn vsc_from_trig<S: Scalar>(v_ord: Phasor<S>, s: S, c: S) -> ThreePhase<S> {
    // cos(a - 2pi/3) = -c/2 + s*sqrt3/2, sin(a - 2pi/3) = -s/2 - c*sqrt3/2
    let cb = c * -0.5 + s * SQRT3_OVER_2;
    let sb = s * -0.5 - c * SQRT3_OVER_2;
    let cc = c * -0.5 - s * SQRT3_OVER_2;
    let sc = s * -0.5 + c * SQRT3_OVER_2;
    [
        v_ord.d * c - v_ord.q * s,
        v_ord.d * cb - v_ord.q * sb,
        v_ord.d * cc - v_ord.q * sc,
    ]
}

/// Reference lags followed by PI regulators on real and reactive power.
///
/// `states` = [p_ref_lag, q_ref_lag, pc_int_d, pc_int_q]; returns the current
/// order and the derivatives of those states. The q axis is negated so that a
/// positive reactive power reference asks for a lagging current.
pub fn power_controller_step<S: Scalar>(
    params: &ConverterParams,
    p_meas: S,
    q_meas: S,
    states: [S; 4],
) -> (Phasor<S>, [S; 4]) {
    let [p_lag, q_lag, int_d, int_q] = states;
    let d_p_lag = (S::cst(params.p_ref) - p_lag) * (1.0 / params.t_pcon);
    let d_q_lag = (S::cst(params.q_ref) - q_lag) * (1.0 / params.t_qcon);
    let e_d = p_lag - p_meas;
    let e_q = q_lag - q_meas;
    let i_ord = Phasor::new(
        e_d * params.k_p_iod + int_d * params.k_i_iod,
        -(e_q * params.k_p_ioq + int_q * params.k_i_ioq),
    );
    (i_ord, [d_p_lag, d_q_lag, e_d, e_q])
}

/// PI current regulators with terminal-voltage feed-forward and `omega L`
/// decoupling. `states` = [cc_int_d, cc_int_q].
pub fn current_controller_step<S: Scalar>(
    params: &ConverterParams,
    omega_base: f64,
    i_ord: Phasor<S>,
    i_meas: Phasor<S>,
    v_term: Phasor<S>,
    states: [S; 2],
) -> (Phasor<S>, [S; 2]) {
    let e_d = i_ord.d - i_meas.d;
    let e_q = i_ord.q - i_meas.q;
    let u_d = e_d * params.k_p_vid + states[0] * params.k_i_vid;
    let u_q = e_q * params.k_p_viq + states[1] * params.k_i_viq;
    let wl = omega_base * params.l_f;
    let v_ord = Phasor::new(
        v_term.d - i_meas.q * wl + u_d,
        v_term.q + i_meas.d * wl + u_q,
    );
    (v_ord, [e_d, e_q])
}

/// PI-driven phasor angle. Returns the cumulative angle
/// `omega_syn t + delta` and the derivatives of `[pll_int, delta]`.
pub fn pll_step<S: Scalar>(
    params: &ConverterParams,
    omega_syn: f64,
    v_oq: S,
    pll_int: S,
    delta: S,
    t: S,
) -> (S, [S; 2]) {
    let delta_bar = t * omega_syn + delta;
    (
        delta_bar,
        [v_oq * params.k_i_pll, v_oq * params.k_p_pll + pll_int],
    )
}

/// Instantaneous power and voltage magnitude from the terminal phasors.
#[inline]
pub fn power_precalc<S: Scalar>(v_o: Phasor<S>, i_o: Phasor<S>) -> [S; 3] {
    [
        v_o.d * i_o.d + v_o.q * i_o.q,
        v_o.q * i_o.d - v_o.d * i_o.q,
        (v_o.d * v_o.d + v_o.q * v_o.q).sqrt(),
    ]
}

/// Low-pass filtered power and voltage measurements. `meas` = [P, Q, V].
/// Returns the pre-filter values and the derivatives of the filter states.
pub fn measurement_step<S: Scalar>(
    params: &ConverterParams,
    v_o: Phasor<S>,
    i_o: Phasor<S>,
    meas: [S; 3],
) -> ([S; 3], [S; 3]) {
    let pre = power_precalc(v_o, i_o);
    let d = [
        (pre[0] - meas[0]) * (1.0 / params.t_p),
        (pre[1] - meas[1]) * (1.0 / params.t_q),
        (pre[2] - meas[2]) * (1.0 / params.t_v),
    ];
    (pre, d)
}

/// Per-phase filter current derivative `(v_vsc - v_term) / l_f`.
#[inline]
pub fn l_filter_dynamics<S: Scalar>(
    v_vsc: ThreePhase<S>,
    v_term: ThreePhase<S>,
    l_f: f64,
) -> ThreePhase<S> {
    let k = 1.0 / l_f;
    [
        (v_vsc[0] - v_term[0]) * k,
        (v_vsc[1] - v_term[1]) * k,
        (v_vsc[2] - v_term[2]) * k,
    ]
}

/// Signals computed inside the converter at one time point.
#[derive(Clone, Copy, Debug)]
pub struct ConverterSignals<S> {
    pub delta_bar: S,
    pub v_o: Phasor<S>,
    pub i_o: Phasor<S>,
    pub i_ord: Phasor<S>,
    pub v_ord: Phasor<S>,
    pub v_vsc: ThreePhase<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Converter {
    pub id: String,
    pub bus: String,
    pub params: ConverterParams,
}

impl Converter {
    pub fn new(id: impl Into<String>, bus: impl Into<String>, params: ConverterParams) -> Self {
        Self {
            id: id.into(),
            bus: bus.into(),
            params,
        }
    }

    /// Evaluates the whole converter. `x` holds the states in `*_IDX` order,
    /// `v_term` the terminal node voltages; derivatives go to `dx`.
    ///
    /// The VSC neutral floats (three-wire converter), so the filter sees the
    /// terminal voltages without their zero-sequence part.
    pub fn evaluate<S: Scalar>(
        &self,
        omega_base: f64,
        t: S,
        x: &[S],
        v_term: ThreePhase<S>,
        dx: &mut [S],
    ) -> ConverterSignals<S> {
        let p = &self.params;
        let delta_bar = t * omega_base + x[PLL_DELTA_IDX];
        let (s, c) = delta_bar.sin_cos();

        let (v_in, v_qu) = clarke(v_term);
        let v_o = rotate_to_device(v_in, v_qu, s, c);
        let (i_in, i_qu) = clarke([x[0], x[1], x[2]]);
        let i_o = rotate_to_device(i_in, i_qu, s, c);

        // PLL driven by the raw terminal-voltage quadrature component
        let (_, pll_d) = pll_step(p, omega_base, v_o.q, x[PLL_INT_IDX], x[PLL_DELTA_IDX], t);
        dx[PLL_INT_IDX] = pll_d[0];
        dx[PLL_DELTA_IDX] = pll_d[1];

        let (_, meas_d) =
            measurement_step(p, v_o, i_o, [x[P_MEAS_IDX], x[Q_MEAS_IDX], x[V_MEAS_IDX]]);
        dx[P_MEAS_IDX] = meas_d[0];
        dx[Q_MEAS_IDX] = meas_d[1];
        dx[V_MEAS_IDX] = meas_d[2];

        let (i_ord, pc_d) = power_controller_step(
            p,
            x[P_MEAS_IDX],
            x[Q_MEAS_IDX],
            [x[P_LAG_IDX], x[Q_LAG_IDX], x[PC_INT_IDX], x[PC_INT_IDX + 1]],
        );
        dx[P_LAG_IDX] = pc_d[0];
        dx[Q_LAG_IDX] = pc_d[1];
        dx[PC_INT_IDX] = pc_d[2];
        dx[PC_INT_IDX + 1] = pc_d[3];

        let (v_ord, cc_d) = current_controller_step(
            p,
            omega_base,
            i_ord,
            i_o,
            v_o,
            [x[CC_INT_IDX], x[CC_INT_IDX + 1]],
        );
        dx[CC_INT_IDX] = cc_d[0];
        dx[CC_INT_IDX + 1] = cc_d[1];

        let v_vsc = vsc_from_trig(v_ord, s, c);
        let v0 = (v_term[0] + v_term[1] + v_term[2]) * (1.0 / 3.0);
        let di = l_filter_dynamics(
            v_vsc,
            [v_term[0] - v0, v_term[1] - v0, v_term[2] - v0],
            p.l_f,
        );
        dx[..3].copy_from_slice(&di);

        ConverterSignals {
            delta_bar,
            v_o,
            i_o,
            i_ord,
            v_ord,
            v_vsc,
        }
    }

    /// Filter current phasor (phase A) injected at steady state when the
    /// terminal positive-sequence voltage is `v_pos`.
    pub fn ordered_injection(&self, v_pos: Complex64) -> Complex64 {
        let vm = v_pos.norm();
        let i_dev = Complex64::new(self.params.p_ref / vm, -self.params.q_ref / vm);
        i_dev * Complex64::from_polar(1.0, v_pos.arg())
    }

    /// Steady-state controller states for the terminal voltage phasors.
    pub fn initial_state(&self, v_term: &ThreePhase<Complex64>) -> ConverterState {
        let p = &self.params;
        let v_pos = positive_sequence(v_term);
        let vm = v_pos.norm();
        let i_a = self.ordered_injection(v_pos);
        let i_d = p.p_ref / vm;
        let i_q = -p.q_ref / vm;
        let mut i_filter = [0.0; 3];
        for (k, slot) in i_filter.iter_mut().enumerate() {
            let ph = i_a * Complex64::from_polar(1.0, -2.0 * PI / 3.0 * k as f64);
            *slot = ph.re;
        }
        ConverterState {
            i_filter,
            p_ref_lag: p.p_ref,
            q_ref_lag: p.q_ref,
            pc_int: [i_d / p.k_i_iod, -i_q / p.k_i_ioq],
            cc_int: [0.0, 0.0],
            pll_int: 0.0,
            pll_delta: v_pos.arg(),
            p_meas: p.p_ref,
            q_meas: p.q_ref,
            v_om_meas: vm,
        }
    }

    /// Per-phase filter current phasors for [`Converter::initial_state`].
    pub fn initial_filter_phasors(&self, v_term: &ThreePhase<Complex64>) -> ThreePhase<Complex64> {
        let i_a = self.ordered_injection(positive_sequence(v_term));
        [
            i_a,
            i_a * Complex64::from_polar(1.0, -2.0 * PI / 3.0),
            i_a * Complex64::from_polar(1.0, 2.0 * PI / 3.0),
        ]
    }
}

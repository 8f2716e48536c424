//! One electrically connected part of the system and its Newton solver.
//!
//! Unknown layout: node voltages, then (in derivative mode) node voltage time
//! derivatives, then device states. Residual rows follow the same layout:
//! KCL (or source constraint) per node, the time-differentiated KCL scaled by
//! `h` per node, and one discretization residual per state.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::converter::{Converter, N_STATES as CONV_STATES};
use crate::dual::Dual;
use crate::error::{Result, SimError};
use crate::integrators::Coefficients4;
use crate::network::{
    assemble_network_equations, branch_dynamics, branch_second_derivative, NodeKind,
};

/// Values above this are treated as a numerical blow-up.
pub(crate) const BLOWUP: f64 = 1e6;

/// Refresh the Jacobian when a reused one contracts the residual worse
/// than this per iteration.
const SLOW_CONTRACTION: f64 = 0.2;

/// Shortest fraction of a fresh Newton step tried before accepting it anyway.
const MIN_DAMPING: f64 = 1.0 / 64.0;

#[derive(Clone, Debug)]
pub(crate) enum Device {
    /// Series R-L element; `None` terminals are ground.
    Inductor {
        p: Option<usize>,
        n: Option<usize>,
        r: f64,
        l: f64,
        state: usize,
    },
    Conductance {
        p: Option<usize>,
        n: Option<usize>,
        g: f64,
        active: bool,
    },
    Converter {
        model: usize,
        nodes: [usize; 3],
        state: usize,
    },
}

#[derive(Clone, Debug)]
pub(crate) struct Island {
    pub kinds: Vec<NodeKind>,
    pub devices: Vec<Device>,
    pub converters: Vec<Converter>,
    pub n_states: usize,
    pub deriv: bool,
    pub omega_base: f64,
    pub h: f64,
    /// Current unknowns.
    pub z: Vec<f64>,
    /// Derivatives of the states at the last accepted step.
    pub xd_prev: Vec<f64>,
    pub xdd_prev: Vec<f64>,
    coeffs: Vec<Coefficients4>,
    hist: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    res: Vec<f64>,
    leaving: Vec<f64>,
    leaving_dot: Vec<f64>,
    lu: Option<LU<f64, Dyn, Dyn>>,
    need_jac: bool,
    /// Jacobian factorizations so far.
    pub factorizations: usize,
}

#[inline]
fn at(v: &[f64], node: Option<usize>) -> f64 {
    node.map_or(0.0, |i| v[i])
}

impl Island {
    pub fn new(
        kinds: Vec<NodeKind>,
        devices: Vec<Device>,
        converters: Vec<Converter>,
        n_states: usize,
        deriv: bool,
        omega_base: f64,
        h: f64,
    ) -> Self {
        let n = kinds.len();
        let dim = n * (1 + deriv as usize) + n_states;
        Self {
            kinds,
            devices,
            converters,
            n_states,
            deriv,
            omega_base,
            h,
            z: vec![0.0; dim],
            xd_prev: vec![0.0; n_states],
            xdd_prev: vec![0.0; n_states],
            coeffs: vec![
                Coefficients4 {
                    b0: 0.0,
                    b_m1: 0.0,
                    c0: 0.0,
                    c_m1: 0.0
                };
                n_states
            ],
            hist: vec![0.0; n_states],
            f: vec![0.0; n_states],
            g: vec![0.0; n_states],
            res: vec![0.0; dim],
            leaving: vec![0.0; n],
            leaving_dot: vec![0.0; n],
            lu: None,
            need_jac: true,
            factorizations: 0,
        }
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.kinds.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.x_offset() + self.n_states
    }

    #[inline]
    pub fn vd_offset(&self) -> usize {
        self.n_nodes()
    }

    #[inline]
    pub fn x_offset(&self) -> usize {
        self.n_nodes() * (1 + self.deriv as usize)
    }

    pub fn states(&self) -> &[f64] {
        &self.z[self.x_offset()..]
    }

    pub fn invalidate_jacobian(&mut self) {
        self.need_jac = true;
    }

    /// Installs the per-state coefficients for the coming steps.
    pub fn set_coefficients(&mut self, coeffs: &[Coefficients4]) {
        if self.coeffs != coeffs {
            self.coeffs.copy_from_slice(coeffs);
            self.need_jac = true;
        }
    }

    /// Evaluates `f` and (in derivative mode) `g` at the current unknowns
    /// without touching the residual; used to seed derivative history.
    pub fn evaluate_derivatives(&mut self, t: f64) -> (&[f64], &[f64]) {
        let z = std::mem::take(&mut self.z);
        self.device_derivatives(t, &z);
        self.z = z;
        (&self.f, &self.g)
    }

    pub fn accept_history(&mut self) {
        self.xd_prev.copy_from_slice(&self.f);
        self.xdd_prev.copy_from_slice(&self.g);
    }

    fn device_derivatives(&mut self, t: f64, z: &[f64]) {
        let n = self.n_nodes();
        let (xo, vdo) = (self.x_offset(), self.vd_offset());
        let v = &z[..n];
        let x = &z[xo..];
        let vd = if self.deriv {
            &z[vdo..vdo + n]
        } else {
            &z[..0]
        };
        for dev in &self.devices {
            match *dev {
                Device::Inductor {
                    p,
                    n: q,
                    r,
                    l,
                    state,
                } => {
                    let f = branch_dynamics(r, l, at(v, p), at(v, q), x[state]);
                    self.f[state] = f;
                    if self.deriv {
                        self.g[state] = branch_second_derivative(r, l, at(vd, p), at(vd, q), f);
                    }
                }
                Device::Conductance { .. } => {}
                Device::Converter {
                    model,
                    nodes,
                    state,
                } => {
                    let conv = &self.converters[model];
                    let xs = &x[state..state + CONV_STATES];
                    let vt = [v[nodes[0]], v[nodes[1]], v[nodes[2]]];
                    let f = &mut self.f[state..state + CONV_STATES];
                    conv.evaluate(self.omega_base, t, xs, vt, f);
                    if self.deriv {
                        let vdt = [vd[nodes[0]], vd[nodes[1]], vd[nodes[2]]];
                        converter_second_derivative(
                            conv,
                            self.omega_base,
                            t,
                            xs,
                            f,
                            vt,
                            vdt,
                            &mut self.g[state..state + CONV_STATES],
                        );
                    }
                }
            }
        }
    }

    /// Fills `self.res` for unknowns `z` and returns the max-norm.
    fn residual(&mut self, t: f64, z: &[f64]) -> f64 {
        let n = self.n_nodes();
        let (xo, vdo) = (self.x_offset(), self.vd_offset());
        self.device_derivatives(t, z);
        self.leaving.iter_mut().for_each(|v| *v = 0.0);
        self.leaving_dot.iter_mut().for_each(|v| *v = 0.0);
        let v = &z[..n];
        let vd = if self.deriv {
            &z[vdo..vdo + n]
        } else {
            &z[..0]
        };
        let x = &z[xo..];
        for dev in &self.devices {
            match *dev {
                Device::Inductor { p, n: q, state, .. } => {
                    if let Some(p) = p {
                        self.leaving[p] += x[state];
                        self.leaving_dot[p] += self.f[state];
                    }
                    if let Some(q) = q {
                        self.leaving[q] -= x[state];
                        self.leaving_dot[q] -= self.f[state];
                    }
                }
                Device::Conductance { p, n: q, g, active } => {
                    if !active {
                        continue;
                    }
                    let i = g * (at(v, p) - at(v, q));
                    let di = if self.deriv {
                        g * (at(vd, p) - at(vd, q))
                    } else {
                        0.0
                    };
                    if let Some(p) = p {
                        self.leaving[p] += i;
                        self.leaving_dot[p] += di;
                    }
                    if let Some(q) = q {
                        self.leaving[q] -= i;
                        self.leaving_dot[q] -= di;
                    }
                }
                Device::Converter { nodes, state, .. } => {
                    for k in 0..3 {
                        self.leaving[nodes[k]] -= x[state + k];
                        self.leaving_dot[nodes[k]] -= self.f[state + k];
                    }
                }
            }
        }
        let derivative_rows = self.deriv.then_some((vd, self.leaving_dot.as_slice()));
        assemble_network_equations(
            &self.kinds,
            t,
            self.omega_base,
            self.h,
            v,
            &self.leaving,
            derivative_rows,
            &mut self.res,
        );
        for s in 0..self.n_states {
            let c = &self.coeffs[s];
            self.res[xo + s] = x[s] - self.hist[s] - c.b0 * self.f[s] - c.c0 * self.g[s];
        }
        self.res.iter().fold(0.0, |m, r| {
            if r.abs() > m || r.is_nan() {
                r.abs()
            } else {
                m
            }
        })
    }

    fn jacobian(&mut self, t: f64, z: &[f64]) -> DMatrix<f64> {
        let n = self.n_nodes();
        let dim = self.dim();
        let (xo, vdo) = (self.x_offset(), self.vd_offset());
        let h = self.h;
        let deriv = self.deriv;
        let mut j = DMatrix::<f64>::zeros(dim, dim);
        for s in 0..self.n_states {
            j[(xo + s, xo + s)] = 1.0;
        }
        for dev in &self.devices {
            match *dev {
                Device::Inductor {
                    p,
                    n: q,
                    r,
                    l,
                    state,
                } => {
                    let c = self.coeffs[state];
                    let row = xo + state;
                    let col = xo + state;
                    j[(row, col)] += c.b0 * r / l - c.c0 * r * r / (l * l);
                    let dv = -c.b0 / l + c.c0 * r / (l * l);
                    let dvd = -c.c0 / l;
                    for (node, sign) in [(p, 1.0), (q, -1.0)] {
                        let Some(k) = node else { continue };
                        j[(row, k)] += sign * dv;
                        if deriv {
                            j[(row, vdo + k)] += sign * dvd;
                        }
                        // this terminal's KCL rows
                        j[(k, col)] += sign;
                        if deriv {
                            j[(n + k, col)] += -sign * h * r / l;
                            for (other, s2) in [(p, 1.0), (q, -1.0)] {
                                if let Some(m) = other {
                                    j[(n + k, m)] += sign * s2 * h / l;
                                }
                            }
                        }
                    }
                }
                Device::Conductance { p, n: q, g, active } => {
                    if !active {
                        continue;
                    }
                    for (node, sign) in [(p, 1.0), (q, -1.0)] {
                        let Some(k) = node else { continue };
                        for (other, s2) in [(p, 1.0), (q, -1.0)] {
                            if let Some(m) = other {
                                j[(k, m)] += sign * s2 * g;
                                if deriv {
                                    j[(n + k, vdo + m)] += sign * s2 * h * g;
                                }
                            }
                        }
                    }
                }
                Device::Converter {
                    model,
                    nodes,
                    state,
                } => {
                    for k in 0..3 {
                        j[(nodes[k], xo + state + k)] -= 1.0;
                    }
                    self.converter_jacobian(t, z, model, nodes, state, &mut j);
                }
            }
        }
        for (i, kind) in self.kinds.iter().enumerate() {
            if matches!(kind, NodeKind::Source { .. }) {
                j.row_mut(i).fill(0.0);
                j[(i, i)] = 1.0;
                if deriv {
                    j.row_mut(n + i).fill(0.0);
                    j[(n + i, vdo + i)] = h;
                }
            }
        }
        j
    }

    /// Finite-difference columns of the converter's rows with respect to its
    /// states and terminal voltages (and voltage derivatives).
    #[allow(clippy::needless_range_loop)]
    fn converter_jacobian(
        &self,
        t: f64,
        z: &[f64],
        model: usize,
        nodes: [usize; 3],
        state: usize,
        j: &mut DMatrix<f64>,
    ) {
        let n = self.n_nodes();
        let (xo, vdo) = (self.x_offset(), self.vd_offset());
        let conv = &self.converters[model];
        let eval = |x: &[f64],
                    v: [f64; 3],
                    vd: [f64; 3],
                    f: &mut [f64; CONV_STATES],
                    g: &mut [f64; CONV_STATES]| {
            conv.evaluate(self.omega_base, t, x, v, f);
            if self.deriv {
                converter_second_derivative(conv, self.omega_base, t, x, f, v, vd, g);
            }
        };
        let mut x: [f64; CONV_STATES] = z[xo + state..xo + state + CONV_STATES].try_into().unwrap();
        let mut v = [z[nodes[0]], z[nodes[1]], z[nodes[2]]];
        let mut vd = if self.deriv {
            [z[vdo + nodes[0]], z[vdo + nodes[1]], z[vdo + nodes[2]]]
        } else {
            [0.0; 3]
        };
        let (mut f0, mut g0) = ([0.0; CONV_STATES], [0.0; CONV_STATES]);
        eval(&x, v, vd, &mut f0, &mut g0);
        let (mut f1, mut g1) = ([0.0; CONV_STATES], [0.0; CONV_STATES]);

        let n_cols = CONV_STATES + 3 + if self.deriv { 3 } else { 0 };
        for col in 0..n_cols {
            let (slot, global): (&mut f64, usize) = if col < CONV_STATES {
                (&mut x[col], xo + state + col)
            } else if col < CONV_STATES + 3 {
                (&mut v[col - CONV_STATES], nodes[col - CONV_STATES])
            } else {
                (
                    &mut vd[col - CONV_STATES - 3],
                    vdo + nodes[col - CONV_STATES - 3],
                )
            };
            let orig = *slot;
            let eps = 1e-7 * orig.abs().max(1.0);
            *slot = orig + eps;
            eval(&x, v, vd, &mut f1, &mut g1);
            // restore
            if col < CONV_STATES {
                x[col] = orig;
            } else if col < CONV_STATES + 3 {
                v[col - CONV_STATES] = orig;
            } else {
                vd[col - CONV_STATES - 3] = orig;
            }
            for s in 0..CONV_STATES {
                let c = &self.coeffs[state + s];
                let df = (f1[s] - f0[s]) / eps;
                let dg = (g1[s] - g0[s]) / eps;
                j[(xo + state + s, global)] += -c.b0 * df - c.c0 * dg;
            }
            if self.deriv {
                for k in 0..3 {
                    j[(n + nodes[k], global)] -= self.h * (f1[k] - f0[k]) / eps;
                }
            }
        }
    }

    /// Prepares the history terms for the step after the current values.
    pub fn begin_step(&mut self) {
        let xo = self.x_offset();
        for s in 0..self.n_states {
            let c = &self.coeffs[s];
            self.hist[s] = self.z[xo + s] + c.b_m1 * self.xd_prev[s] + c.c_m1 * self.xdd_prev[s];
        }
    }

    /// Newton iteration at time `t`. Returns the number of linear solves and
    /// the final residual max-norm.
    pub fn solve(&mut self, t: f64, tol: f64, max_iter: usize) -> Result<(usize, f64)> {
        let mut z = std::mem::take(&mut self.z);
        let out = self.newton(t, &mut z, tol, max_iter);
        self.z = z;
        out
    }

    fn newton(&mut self, t: f64, z: &mut [f64], tol: f64, max_iter: usize) -> Result<(usize, f64)> {
        let mut norm = self.residual(t, z);
        let mut iters = 0;
        let mut z_prev = z.to_vec();
        while !(norm < tol) {
            if iters >= max_iter || !norm.is_finite() {
                return Err(SimError::Divergence {
                    time: t,
                    residual: norm,
                });
            }
            let fresh = self.need_jac || self.lu.is_none();
            if fresh {
                self.lu = Some(self.jacobian(t, z).lu());
                self.need_jac = false;
                self.factorizations += 1;
            }
            let rhs = DVector::from_iterator(z.len(), self.res.iter().map(|r| -r));
            let dz = self
                .lu
                .as_ref()
                .and_then(|lu| lu.solve(&rhs))
                .ok_or(SimError::Singular { time: t })?;
            iters += 1;
            z_prev.copy_from_slice(z);
            let mut lambda = 1.0;
            let next = loop {
                for ((zi, z0), d) in z.iter_mut().zip(&z_prev).zip(dz.iter()) {
                    *zi = z0 + lambda * d;
                }
                if self.blown(z) {
                    return Err(SimError::Divergence {
                        time: t,
                        residual: self.residual(t, z),
                    });
                }
                let next = self.residual(t, z);
                // A reused Jacobian that fails to reduce the residual is
                // replaced rather than trusted with a shorter step.
                if next < norm || !fresh || lambda < MIN_DAMPING {
                    break next;
                }
                lambda *= 0.5;
            };
            if !fresh && !(next < norm) {
                z.copy_from_slice(&z_prev);
                norm = self.residual(t, z);
                self.need_jac = true;
                continue;
            }
            if !fresh && next > SLOW_CONTRACTION * norm {
                self.need_jac = true;
            }
            norm = next;
        }
        Ok((iters, norm))
    }

    fn blown(&self, z: &[f64]) -> bool {
        let (n, xo) = (self.n_nodes(), self.x_offset());
        z[..n].iter().chain(&z[xo..]).any(|v| !(v.abs() < BLOWUP))
    }
}

/// `g = d f / dt` along the trajectory: states move with `f`, terminal
/// voltages with `vd`, and time with unit rate.
#[allow(clippy::too_many_arguments)]
pub(crate) fn converter_second_derivative(
    conv: &Converter,
    omega_base: f64,
    t: f64,
    x: &[f64],
    f: &[f64],
    v: [f64; 3],
    vd: [f64; 3],
    g: &mut [f64],
) {
    let mut xs = [Dual::default(); CONV_STATES];
    for k in 0..CONV_STATES {
        xs[k] = Dual::new(x[k], f[k]);
    }
    let vs = [
        Dual::new(v[0], vd[0]),
        Dual::new(v[1], vd[1]),
        Dual::new(v[2], vd[2]),
    ];
    let mut dx = [Dual::default(); CONV_STATES];
    conv.evaluate(omega_base, Dual::new(t, 1.0), &xs, vs, &mut dx);
    for k in 0..CONV_STATES {
        g[k] = dx[k].dot;
    }
}

//! Fixed-step simultaneous solution of device and network equations.
//!
//! Every step solves one nonlinear system per electrically connected island
//! by Newton's method. Each device state is discretized with the integrator
//! its [`Scheme`] assigns to the state's [`StateRole`]. For a few steps after
//! a topology change the integrators are replaced by their single-step
//! variants to suppress numerical oscillation.

mod island;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_complex::Complex64;

pub use crate::converter::StateRole;
use crate::converter::{
    ConverterState, N_STATES as CONV_STATES, PLL_DELTA_IDX, P_MEAS_IDX, Q_MEAS_IDX, STATE_NAMES,
    STATE_ROLES, V_MEAS_IDX,
};
use crate::error::{Result, SimError};
use crate::integrators::{
    CoefficientTable, Coefficients4, IntegratorKind, JacobianPolicy, StatePoint,
};
use crate::network::{instantaneous, steady_state_voltages, NodeKind, Phase, ThreePhase};
use crate::scenario::Scenario;
use island::{Device, Island};

/// Integrator assignment policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Integrator A for utility-frequency states, C for all others.
    Scheme1,
    /// As `Scheme1` but the power controller uses the trapezoidal rule.
    Scheme2,
    /// Trapezoidal rule everywhere.
    EmtReference,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Scheme1, Scheme::Scheme2, Scheme::EmtReference];

    pub fn kind_for(self, role: StateRole) -> IntegratorKind {
        use IntegratorKind::*;
        match (self, role) {
            (Scheme::EmtReference, _) => Trapezoidal,
            (_, StateRole::UtilityFrequency) => A,
            (Scheme::Scheme1, _) => C,
            (Scheme::Scheme2, StateRole::PowerControl) => Trapezoidal,
            (Scheme::Scheme2, StateRole::Control) => C,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Scheme1 => "scheme1",
            Scheme::Scheme2 => "scheme2",
            Scheme::EmtReference => "emt",
        }
    }

    /// Whether any integrator used by the scheme, including the post-event
    /// replacements, needs second state derivatives.
    pub fn uses_second_derivative(self) -> bool {
        [
            StateRole::UtilityFrequency,
            StateRole::Control,
            StateRole::PowerControl,
        ]
        .iter()
        .map(|r| self.kind_for(*r))
        .any(|k| k.uses_second_derivative() || k.replacement().uses_second_derivative())
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scheme1" => Ok(Scheme::Scheme1),
            "scheme2" => Ok(Scheme::Scheme2),
            "emt" | "emtreference" | "emt_reference" => Ok(Scheme::EmtReference),
            _ => Err(SimError::Parse(format!(
                "unknown scheme '{s}' (expected scheme1, scheme2 or emt)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EventAction {
    FaultApply {
        bus: String,
        phase: Phase,
        r_fault: f64,
    },
    FaultClear {
        bus: String,
        phase: Phase,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub action: EventAction,
}

impl Event {
    pub fn bus(&self) -> &str {
        match &self.action {
            EventAction::FaultApply { bus, .. } | EventAction::FaultClear { bus, .. } => bus,
        }
    }

    pub fn phase(&self) -> Phase {
        match self.action {
            EventAction::FaultApply { phase, .. } | EventAction::FaultClear { phase, .. } => phase,
        }
    }
}

/// Uniformly sampled output signals, stored column-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub h: f64,
    pub columns: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(h: f64, columns: Vec<String>) -> Self {
        let data = vec![Vec::new(); columns.len()];
        Self { h, columns, data }
    }

    pub fn len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        for (col, v) in self.data.iter_mut().zip(row) {
            col.push(*v);
        }
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|i| self.data[i].as_slice())
    }

    pub fn time(&self) -> &[f64] {
        self.column("t").expect("time column")
    }

    /// Last time stamp.
    pub fn duration(&self) -> f64 {
        self.time().last().copied().unwrap_or(0.0)
    }
}

/// Telemetry of one accepted step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    /// Linear solves summed over all islands.
    pub iterations: usize,
    /// Final residual max-norm over all equations.
    pub max_residual: f64,
    /// Jacobian factorizations summed over all islands.
    pub factorizations: usize,
    /// Whether the replacement integrators were in use.
    pub swapped: bool,
}

#[derive(Clone, Debug, Default)]
pub struct RunStats {
    pub steps: Vec<StepRecord>,
    /// Wall time of the step loop only.
    pub wall: Duration,
}

impl RunStats {
    pub fn max_residual(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.max_residual)
            .fold(0.0, f64::max)
    }

    pub fn max_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub series: TimeSeries,
    pub stats: RunStats,
}

/// Column names of the recorded outputs.
pub const BUS_COLUMNS: [&str; 3] = ["v_a", "v_b", "v_c"];
pub const CONVERTER_COLUMNS: [&str; 7] = [
    "p_meas",
    "q_meas",
    "v_om_meas",
    "delta",
    "i_a",
    "i_b",
    "i_c",
];

struct ScheduledEvent {
    step: usize,
    island: usize,
    device: usize,
    apply: Option<f64>,
}

struct StateInfo {
    island: usize,
    local: usize,
    role: StateRole,
    label: String,
}

pub struct Engine {
    scheme: Scheme,
    h: f64,
    newton_tol: f64,
    max_iter: usize,
    jacobian: JacobianPolicy,
    n_steps: usize,
    k: usize,
    islands: Vec<Island>,
    base_coeffs: Vec<Vec<Coefficients4>>,
    swap_coeffs: Vec<Vec<Coefficients4>>,
    states: Vec<StateInfo>,
    events: Vec<ScheduledEvent>,
    swap_steps: usize,
    swap_remaining: usize,
    out_bus: [(usize, usize); 3],
    out_converter: Option<(usize, usize)>,
    columns: Vec<String>,
    /// Global node (3 * bus + phase) of every island-local node.
    island_nodes: Vec<Vec<usize>>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// A device before it is assigned to an island; nodes are global.
struct Staged {
    device: Device,
    roles: Vec<(StateRole, String)>,
}

impl Engine {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let net = &scenario.network;
        let solver = scenario.solver;
        let h = solver.h;
        let w = net.omega_base;
        let index = net.bus_index();
        let node = |bus: &str, p: usize| 3 * index[bus] + p;
        let n_nodes = 3 * net.buses.len();

        let mut kinds = vec![NodeKind::Free; n_nodes];
        for s in &net.sources {
            for p in Phase::ALL {
                kinds[node(&s.bus, p.index())] = NodeKind::Source {
                    magnitude: s.magnitude[p.index()],
                    angle: s.angle_deg[p.index()].to_radians(),
                };
            }
        }

        let mut staged: Vec<Staged> = Vec::new();
        let two_terminal = |p: Option<usize>, n: Option<usize>, r: f64, l: f64, label: String| {
            if l > 0.0 {
                Staged {
                    device: Device::Inductor {
                        p,
                        n,
                        r,
                        l,
                        state: 0,
                    },
                    roles: vec![(StateRole::UtilityFrequency, label)],
                }
            } else {
                Staged {
                    device: Device::Conductance {
                        p,
                        n,
                        g: 1.0 / r,
                        active: true,
                    },
                    roles: vec![],
                }
            }
        };
        for br in &net.branches {
            for p in Phase::ALL {
                staged.push(two_terminal(
                    Some(node(&br.from, p.index())),
                    Some(node(&br.to, p.index())),
                    br.r,
                    br.x / w,
                    format!("branch {}-{} {p}", br.from, br.to),
                ));
            }
        }
        for ld in &net.loads {
            for p in Phase::ALL {
                let Some(el) = ld.phase_elements(p, w, net.load_model) else {
                    continue;
                };
                let nd = Some(node(&ld.bus, p.index()));
                if el.conductance > 0.0 {
                    staged.push(Staged {
                        device: Device::Conductance {
                            p: nd,
                            n: None,
                            g: el.conductance,
                            active: true,
                        },
                        roles: vec![],
                    });
                }
                if let Some(z) = el.inductor {
                    staged.push(two_terminal(
                        nd,
                        None,
                        z.r,
                        z.l,
                        format!("load {} {p}", ld.bus),
                    ));
                }
            }
        }
        let mut fault_device: HashMap<(String, Phase), usize> = HashMap::new();
        for ev in &scenario.events {
            let key = (ev.bus().to_string(), ev.phase());
            if let std::collections::hash_map::Entry::Vacant(slot) = fault_device.entry(key) {
                slot.insert(staged.len());
                staged.push(Staged {
                    device: Device::Conductance {
                        p: Some(node(ev.bus(), ev.phase().index())),
                        n: None,
                        g: 0.0,
                        active: false,
                    },
                    roles: vec![],
                });
            }
        }
        let mut converter_device = HashMap::new();
        for (ci, conv) in scenario.converters.iter().enumerate() {
            converter_device.insert(conv.id.as_str(), staged.len());
            staged.push(Staged {
                device: Device::Converter {
                    model: ci,
                    nodes: [node(&conv.bus, 0), node(&conv.bus, 1), node(&conv.bus, 2)],
                    state: 0,
                },
                roles: STATE_ROLES
                    .iter()
                    .zip(STATE_NAMES)
                    .map(|(r, n)| (*r, format!("{} {n}", conv.id)))
                    .collect(),
            });
        }

        // Islands
        let mut uf = UnionFind((0..n_nodes).collect());
        for st in &staged {
            match st.device {
                Device::Inductor {
                    p: Some(a),
                    n: Some(b),
                    ..
                }
                | Device::Conductance {
                    p: Some(a),
                    n: Some(b),
                    ..
                } => uf.union(a, b),
                Device::Converter { nodes, .. } => {
                    uf.union(nodes[0], nodes[1]);
                    uf.union(nodes[0], nodes[2]);
                }
                _ => {}
            }
        }
        let mut island_of_root: HashMap<usize, usize> = HashMap::new();
        let mut island_nodes: Vec<Vec<usize>> = Vec::new();
        let mut local = vec![0usize; n_nodes];
        for nd in 0..n_nodes {
            let r = uf.find(nd);
            let isl = *island_of_root.entry(r).or_insert_with(|| {
                island_nodes.push(Vec::new());
                island_nodes.len() - 1
            });
            local[nd] = island_nodes[isl].len();
            island_nodes[isl].push(nd);
        }
        let root_island: Vec<usize> = (0..n_nodes)
            .map(|nd| island_of_root[&uf.find(nd)])
            .collect();

        let deriv = scenario.scheme.uses_second_derivative();
        let mut devices: Vec<Vec<Device>> = vec![Vec::new(); island_nodes.len()];
        let mut n_states = vec![0usize; island_nodes.len()];
        let mut grounded = vec![false; island_nodes.len()];
        let mut converters: Vec<Vec<crate::converter::Converter>> =
            vec![Vec::new(); island_nodes.len()];
        let mut states: Vec<StateInfo> = Vec::new();
        let mut placed: Vec<(usize, usize)> = Vec::with_capacity(staged.len());
        for st in staged {
            let anchor = match &st.device {
                Device::Inductor { p, .. } | Device::Conductance { p, .. } => {
                    p.expect("first terminal")
                }
                Device::Converter { nodes, .. } => nodes[0],
            };
            let isl = root_island[anchor];
            let loc = |o: Option<usize>| o.map(|g| local[g]);
            let base = n_states[isl];
            let dev = match st.device {
                Device::Inductor { p, n, r, l, .. } => {
                    if n.is_none() {
                        grounded[isl] = true;
                    }
                    Device::Inductor {
                        p: loc(p),
                        n: loc(n),
                        r,
                        l,
                        state: base,
                    }
                }
                Device::Conductance { p, n, g, active } => {
                    if n.is_none() && active {
                        grounded[isl] = true;
                    }
                    Device::Conductance {
                        p: loc(p),
                        n: loc(n),
                        g,
                        active,
                    }
                }
                Device::Converter { model, nodes, .. } => {
                    converters[isl].push(scenario.converters[model].clone());
                    Device::Converter {
                        model: converters[isl].len() - 1,
                        nodes: nodes.map(|g| local[g]),
                        state: base,
                    }
                }
            };
            n_states[isl] += st.roles.len();
            for (i, (role, label)) in st.roles.into_iter().enumerate() {
                states.push(StateInfo {
                    island: isl,
                    local: base + i,
                    role,
                    label,
                });
            }
            placed.push((isl, devices[isl].len()));
            devices[isl].push(dev);
        }

        let mut islands = Vec::with_capacity(island_nodes.len());
        for (i, nodes) in island_nodes.iter().enumerate() {
            let node_kinds: Vec<NodeKind> = nodes.iter().map(|g| kinds[*g]).collect();
            let has_source = node_kinds
                .iter()
                .any(|k| matches!(k, NodeKind::Source { .. }));
            if !has_source && !grounded[i] {
                let (b, p) = (nodes[0] / 3, Phase::from_index(nodes[0] % 3));
                return Err(SimError::Validation(format!(
                    "node {} phase {p} has no path to a source or ground",
                    net.buses[b].id
                )));
            }
            islands.push(Island::new(
                node_kinds,
                std::mem::take(&mut devices[i]),
                std::mem::take(&mut converters[i]),
                n_states[i],
                deriv,
                w,
                h,
            ));
        }

        let table = CoefficientTable::new(h, solver.omega_select)?;
        let mut base_coeffs: Vec<Vec<Coefficients4>> = islands
            .iter()
            .map(|is| vec![Coefficients4::default(); is.n_states])
            .collect();
        let mut swap_coeffs = base_coeffs.clone();
        for s in &states {
            let kind = scenario.scheme.kind_for(s.role);
            base_coeffs[s.island][s.local] = *table.get(kind);
            swap_coeffs[s.island][s.local] = *table.get(kind.replacement());
        }

        let n_steps = (scenario.duration / h).round() as usize;
        let mut events = Vec::new();
        for ev in &scenario.events {
            let step = (ev.time / h).round();
            if step < 0.0 || step as usize >= n_steps {
                continue;
            }
            let (isl, dev) = placed[fault_device[&(ev.bus().to_string(), ev.phase())]];
            let apply = match ev.action {
                EventAction::FaultApply { r_fault, .. } => Some(1.0 / r_fault),
                EventAction::FaultClear { .. } => None,
            };
            events.push(ScheduledEvent {
                step: step as usize,
                island: isl,
                device: dev,
                apply,
            });
        }
        // stable: file order breaks ties
        events.sort_by_key(|e| e.step);

        let ob = &scenario.outputs.bus;
        let out_bus = [0, 1, 2].map(|p| {
            let g = node(ob, p);
            (root_island[g], local[g])
        });
        let mut columns: Vec<String> = std::iter::once("t")
            .chain(BUS_COLUMNS)
            .map(String::from)
            .collect();
        let out_converter = match &scenario.outputs.converter {
            Some(id) => {
                let (isl, dev) = placed[converter_device[id.as_str()]];
                let Device::Converter { state, .. } = islands[isl].devices[dev] else {
                    unreachable!("converter device")
                };
                columns.extend(CONVERTER_COLUMNS.iter().map(|s| s.to_string()));
                Some((isl, state))
            }
            None => None,
        };

        let mut engine = Self {
            scheme: scenario.scheme,
            h,
            newton_tol: solver.newton_tol,
            max_iter: solver.max_iter,
            jacobian: solver.jacobian,
            n_steps,
            k: 0,
            islands,
            base_coeffs,
            swap_coeffs,
            states,
            events,
            swap_steps: scenario.swap_steps,
            swap_remaining: 0,
            out_bus,
            out_converter,
            columns,
            island_nodes,
        };
        engine.initialize(scenario)?;
        Ok(engine)
    }

    /// Phasor-domain steady state at `t = 0` with converters replaced by
    /// their ordered current injections.
    fn initialize(&mut self, scenario: &Scenario) -> Result<()> {
        let net = &scenario.network;
        let w = net.omega_base;
        let index = net.bus_index();
        let conv_bus: Vec<usize> = scenario
            .converters
            .iter()
            .map(|c| index[c.bus.as_str()])
            .collect();
        let mut volts = steady_state_voltages(net, &[])?;
        for _ in 0..200 {
            let inj: Vec<(usize, ThreePhase<Complex64>)> = scenario
                .converters
                .iter()
                .zip(&conv_bus)
                .map(|(c, b)| (*b, c.initial_filter_phasors(&volts[*b])))
                .collect();
            let next = steady_state_voltages(net, &inj)?;
            let change = next
                .iter()
                .zip(&volts)
                .flat_map(|(a, b)| (0..3).map(move |p| (a[p] - b[p]).norm()))
                .fold(0.0, f64::max);
            volts = next;
            if change < 1e-14 {
                break;
            }
        }
        let phasor = |g: usize| volts[g / 3][g % 3];

        for (isl, island) in self.islands.iter_mut().enumerate() {
            let n = island.n_nodes();
            let xo = island.x_offset();
            let nodes = &self.island_nodes[isl];
            let node_phasor =
                |o: Option<usize>| o.map_or(Complex64::new(0.0, 0.0), |l| phasor(nodes[l]));
            for (l, g) in nodes.iter().enumerate() {
                let (v, vd) = instantaneous(phasor(*g), w, 0.0);
                island.z[l] = v;
                if island.deriv {
                    island.z[n + l] = vd;
                }
            }
            let devices = island.devices.clone();
            for dev in &devices {
                match *dev {
                    Device::Inductor {
                        p,
                        n: q,
                        r,
                        l,
                        state,
                    } => {
                        let i = (node_phasor(p) - node_phasor(q)) / Complex64::new(r, w * l);
                        island.z[xo + state] = i.re;
                    }
                    Device::Conductance { .. } => {}
                    Device::Converter {
                        model,
                        nodes: cn,
                        state,
                    } => {
                        let vt = cn.map(|l| phasor(nodes[l]));
                        let x = island.converters[model].initial_state(&vt).to_vec();
                        island.z[xo + state..xo + state + CONV_STATES].copy_from_slice(&x);
                    }
                }
            }
            island.set_coefficients(&self.base_coeffs[isl]);
            island.evaluate_derivatives(0.0);
            island.accept_history();
        }
        Ok(())
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Index of the last accepted step (0 before the first step).
    pub fn step_index(&self) -> usize {
        self.k
    }

    pub fn time(&self) -> f64 {
        self.k as f64 * self.h
    }

    pub fn island_count(&self) -> usize {
        self.islands.len()
    }

    pub fn state_labels(&self) -> Vec<&str> {
        self.states.iter().map(|s| s.label.as_str()).collect()
    }

    /// Value and time derivatives of every state at the current step, in
    /// [`Engine::state_labels`] order. Second derivatives are zero unless the
    /// scheme uses them.
    pub fn state_points(&self) -> Vec<StatePoint> {
        self.states
            .iter()
            .map(|s| {
                let isl = &self.islands[s.island];
                StatePoint::new(
                    isl.states()[s.local],
                    isl.xd_prev[s.local],
                    isl.xdd_prev[s.local],
                )
            })
            .collect()
    }

    /// Integrator each state will use in the next step.
    pub fn next_assignment(&self) -> Vec<IntegratorKind> {
        let swapped = self.swap_remaining > 0 || self.event_due(self.k + 1) && self.swap_steps > 0;
        self.states
            .iter()
            .map(|s| {
                let k = self.scheme.kind_for(s.role);
                if swapped {
                    k.replacement()
                } else {
                    k
                }
            })
            .collect()
    }

    fn event_due(&self, step: usize) -> bool {
        self.events.iter().any(|e| e.step + 1 == step)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// Current values of the recorded outputs, in [`Engine::columns`] order.
    pub fn output_row(&self) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.columns.len());
        row.push(self.time());
        for (isl, l) in self.out_bus {
            row.push(self.islands[isl].z[l]);
        }
        if let Some((isl, off)) = self.out_converter {
            let x = &self.islands[isl].states()[off..off + CONV_STATES];
            row.extend([
                x[P_MEAS_IDX],
                x[Q_MEAS_IDX],
                x[V_MEAS_IDX],
                x[PLL_DELTA_IDX],
                x[0],
                x[1],
                x[2],
            ]);
        }
        row
    }

    /// State of the output converter.
    pub fn converter_state(&self) -> Option<ConverterState> {
        self.out_converter.map(|(isl, off)| {
            ConverterState::from_slice(&self.islands[isl].states()[off..off + CONV_STATES])
        })
    }

    /// Advances one step.
    pub fn step(&mut self) -> Result<StepRecord> {
        let k = self.k + 1;
        let t = k as f64 * self.h;
        let mut switched = false;
        for ev in self.events.iter().filter(|e| e.step + 1 == k) {
            let island = &mut self.islands[ev.island];
            if let Device::Conductance { g, active, .. } = &mut island.devices[ev.device] {
                match ev.apply {
                    Some(conductance) => {
                        *g = conductance;
                        *active = true;
                    }
                    None => *active = false,
                }
            }
            island.invalidate_jacobian();
            switched = true;
        }
        if switched && self.swap_steps > 0 {
            self.swap_remaining = self.swap_steps;
        }
        let swapped = self.swap_remaining > 0;
        let mut iterations = 0;
        let mut max_residual: f64 = 0.0;
        let before: usize = self.islands.iter().map(|i| i.factorizations).sum();
        for (i, island) in self.islands.iter_mut().enumerate() {
            let coeffs = if swapped {
                &self.swap_coeffs[i]
            } else {
                &self.base_coeffs[i]
            };
            island.set_coefficients(coeffs);
            if self.jacobian == JacobianPolicy::PerStep {
                island.invalidate_jacobian();
            }
            island.begin_step();
            let (it, res) = island.solve(t, self.newton_tol, self.max_iter)?;
            island.accept_history();
            iterations += it;
            max_residual = max_residual.max(res);
        }
        if swapped {
            self.swap_remaining -= 1;
        }
        self.k = k;
        let factorizations = self.islands.iter().map(|i| i.factorizations).sum::<usize>() - before;
        Ok(StepRecord {
            t,
            iterations,
            max_residual,
            factorizations,
            swapped,
        })
    }

    /// Runs to the end of the scenario, recording outputs at every step.
    pub fn run(mut self) -> Result<Simulation> {
        let mut series = TimeSeries::new(self.h, self.columns.clone());
        series.push_row(&self.output_row());
        let mut stats = RunStats {
            steps: Vec::with_capacity(self.n_steps),
            wall: Duration::ZERO,
        };
        let start = Instant::now();
        while self.k < self.n_steps {
            let rec = self.step()?;
            series.push_row(&self.output_row());
            stats.steps.push(rec);
        }
        stats.wall = start.elapsed();
        Ok(Simulation { series, stats })
    }
}

/// Builds the engine and runs the scenario to completion.
pub fn run(scenario: &Scenario) -> Result<Simulation> {
    Engine::new(scenario)?.run()
}

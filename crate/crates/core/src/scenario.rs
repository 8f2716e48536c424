//! Scenario files: a TOML description of the network, converters, events,
//! solver settings and recorded outputs.
//!
//! ```toml
//! [system]
//! omega_base = 376.99111843077515     # rad/s, default 2*pi*60
//! load_model = "parallel"             # or "series": how load P, Q become R and L
//! buses = [{ id = "bus1" }, { id = "bus2" }]
//! branches = [{ from = "bus1", to = "bus2", r = 0.1038, x = 0.8416 }]
//! loads = [{ bus = "bus1", p = [0.24, 0.3, 0.36], q = [0.072, 0.09, 0.108] }]
//! sources = [{ bus = "bus2", magnitude = [1.03, 1.0, 0.98], angle_deg = [0.0, -121.0, 118.0] }]
//!
//! [[system.converters]]
//! id = "conv1"
//! bus = "bus1"
//! P_ref = 1.0        # every parameter is optional and defaults to the
//! Q_ref = 0.35       # two-bus tuning of `ConverterParams::default()`
//!
//! [[events]]
//! time = 0.2                  # s, snapped to the step grid
//! action = "fault_apply"      # or "fault_clear"
//! bus = "bus1"
//! phase = "B"
//! r_fault = 0.1               # p.u., fault_apply only
//!
//! [solver]
//! scheme = "emt"              # scheme1 | scheme2 | emt
//! step_size = 5e-6            # s
//! duration = 2.0              # s
//! omega_select = 376.99111843077515
//! newton_tol = 1e-8
//! max_iter = 50
//! swap_steps = 2              # steps with replacement integrators after an event; 0 disables
//! jacobian = "per_step"       # or "adaptive": reuse the Newton Jacobian across steps
//!
//! [outputs]
//! bus = "bus1"
//! converter = "conv1"
//! ```
//!
//! Unknown keys are rejected.

use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;

use crate::converter::{Converter, ConverterParams};
use crate::engine::{Event, EventAction, Scheme};
use crate::error::{Result, SimError};
use crate::integrators::{SolverConfig, OMEGA_60HZ};
use crate::network::{Branch, Bus, ConstantImpedanceLoad, IdealSource, Network, Phase};

/// The bundled two-bus test system with a phase-B-to-ground fault.
pub const TWO_BUS: &str = include_str!("../scenarios/two_bus.scenario");

/// A validated, ready-to-run simulation description.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub network: Network,
    pub converters: Vec<Converter>,
    pub events: Vec<Event>,
    pub scheme: Scheme,
    pub solver: SolverConfig,
    pub duration: f64,
    /// Steps that use the replacement integrators after each event.
    pub swap_steps: usize,
    pub outputs: Outputs,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outputs {
    pub bus: String,
    pub converter: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    system: SystemSection,
    #[serde(default)]
    events: Vec<EventEntry>,
    solver: SolverSection,
    outputs: OutputsSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    #[serde(default = "default_omega")]
    omega_base: f64,
    #[serde(default = "default_load_model")]
    load_model: String,
    buses: Vec<BusEntry>,
    #[serde(default)]
    branches: Vec<BranchEntry>,
    #[serde(default)]
    loads: Vec<LoadEntry>,
    #[serde(default)]
    sources: Vec<SourceEntry>,
    #[serde(default)]
    converters: Vec<ConverterEntry>,
}

fn default_omega() -> f64 {
    OMEGA_60HZ
}

fn default_load_model() -> String {
    "parallel".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusEntry {
    id: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchEntry {
    from: String,
    to: String,
    r: f64,
    x: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadEntry {
    bus: String,
    p: [f64; 3],
    q: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceEntry {
    bus: String,
    magnitude: [f64; 3],
    angle_deg: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConverterEntry {
    id: String,
    bus: String,
    #[serde(flatten)]
    params: ParamsEntry,
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct ParamsEntry {
    #[serde(rename = "L_f")]
    l_f: f64,
    #[serde(rename = "P_ref")]
    p_ref: f64,
    #[serde(rename = "Q_ref")]
    q_ref: f64,
    #[serde(rename = "T_Pcon")]
    t_pcon: f64,
    #[serde(rename = "K_i_iod")]
    k_i_iod: f64,
    #[serde(rename = "K_p_iod")]
    k_p_iod: f64,
    #[serde(rename = "T_Qcon")]
    t_qcon: f64,
    #[serde(rename = "K_i_ioq")]
    k_i_ioq: f64,
    #[serde(rename = "K_p_ioq")]
    k_p_ioq: f64,
    #[serde(rename = "K_i_vid")]
    k_i_vid: f64,
    #[serde(rename = "K_p_vid")]
    k_p_vid: f64,
    #[serde(rename = "K_i_viq")]
    k_i_viq: f64,
    #[serde(rename = "K_p_viq")]
    k_p_viq: f64,
    #[serde(rename = "K_i_pll")]
    k_i_pll: f64,
    #[serde(rename = "K_p_pll")]
    k_p_pll: f64,
    #[serde(rename = "T_p")]
    t_p: f64,
    #[serde(rename = "T_Q")]
    t_q: f64,
    #[serde(rename = "T_V")]
    t_v: f64,
}

impl Default for ParamsEntry {
    fn default() -> Self {
        let d = ConverterParams::default();
        Self {
            l_f: d.l_f,
            p_ref: d.p_ref,
            q_ref: d.q_ref,
            t_pcon: d.t_pcon,
            k_i_iod: d.k_i_iod,
            k_p_iod: d.k_p_iod,
            t_qcon: d.t_qcon,
            k_i_ioq: d.k_i_ioq,
            k_p_ioq: d.k_p_ioq,
            k_i_vid: d.k_i_vid,
            k_p_vid: d.k_p_vid,
            k_i_viq: d.k_i_viq,
            k_p_viq: d.k_p_viq,
            k_i_pll: d.k_i_pll,
            k_p_pll: d.k_p_pll,
            t_p: d.t_p,
            t_q: d.t_q,
            t_v: d.t_v,
        }
    }
}

impl From<ParamsEntry> for ConverterParams {
    fn from(e: ParamsEntry) -> Self {
        Self {
            l_f: e.l_f,
            p_ref: e.p_ref,
            q_ref: e.q_ref,
            t_pcon: e.t_pcon,
            t_qcon: e.t_qcon,
            k_p_iod: e.k_p_iod,
            k_i_iod: e.k_i_iod,
            k_p_ioq: e.k_p_ioq,
            k_i_ioq: e.k_i_ioq,
            k_p_vid: e.k_p_vid,
            k_i_vid: e.k_i_vid,
            k_p_viq: e.k_p_viq,
            k_i_viq: e.k_i_viq,
            k_p_pll: e.k_p_pll,
            k_i_pll: e.k_i_pll,
            t_p: e.t_p,
            t_q: e.t_q,
            t_v: e.t_v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum ActionName {
    FaultApply,
    FaultClear,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventEntry {
    time: f64,
    action: ActionName,
    bus: String,
    phase: String,
    r_fault: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    scheme: String,
    step_size: f64,
    duration: f64,
    #[serde(default = "default_omega")]
    omega_select: f64,
    #[serde(default = "default_tol")]
    newton_tol: f64,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
    #[serde(default = "default_swap_steps")]
    swap_steps: usize,
    #[serde(default = "default_jacobian")]
    jacobian: String,
}

fn default_jacobian() -> String {
    "per_step".into()
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    50
}

fn default_swap_steps() -> usize {
    2
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputsSection {
    bus: String,
    converter: Option<String>,
}

impl Scenario {
    /// Parses and validates scenario text.
    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        let sys = file.system;
        let network = Network {
            omega_base: sys.omega_base,
            load_model: sys.load_model.parse()?,
            buses: sys.buses.into_iter().map(|b| Bus { id: b.id }).collect(),
            branches: sys
                .branches
                .into_iter()
                .map(|b| Branch {
                    from: b.from,
                    to: b.to,
                    r: b.r,
                    x: b.x,
                })
                .collect(),
            loads: sys
                .loads
                .into_iter()
                .map(|l| ConstantImpedanceLoad {
                    bus: l.bus,
                    p: l.p,
                    q: l.q,
                })
                .collect(),
            sources: sys
                .sources
                .into_iter()
                .map(|s| IdealSource {
                    bus: s.bus,
                    magnitude: s.magnitude,
                    angle_deg: s.angle_deg,
                })
                .collect(),
        };
        let converters = sys
            .converters
            .into_iter()
            .map(|c| Converter::new(c.id, c.bus, c.params.into()))
            .collect();
        let mut events = Vec::with_capacity(file.events.len());
        for (i, e) in file.events.into_iter().enumerate() {
            let phase: Phase = e.phase.parse()?;
            let action = match e.action {
                ActionName::FaultApply => EventAction::FaultApply {
                    bus: e.bus,
                    phase,
                    r_fault: e.r_fault.ok_or_else(|| {
                        SimError::Parse(format!("events[{i}]: fault_apply needs r_fault"))
                    })?,
                },
                ActionName::FaultClear => {
                    if e.r_fault.is_some() {
                        return Err(SimError::Parse(format!(
                            "events[{i}]: fault_clear takes no r_fault"
                        )));
                    }
                    EventAction::FaultClear { bus: e.bus, phase }
                }
            };
            events.push(Event {
                time: e.time,
                action,
            });
        }
        let s = file.solver;
        let scenario = Scenario {
            network,
            converters,
            events,
            scheme: s.scheme.parse()?,
            solver: SolverConfig {
                h: s.step_size,
                omega_select: s.omega_select,
                newton_tol: s.newton_tol,
                max_iter: s.max_iter,
                jacobian: s.jacobian.parse()?,
            },
            duration: s.duration,
            swap_steps: s.swap_steps,
            outputs: Outputs {
                bus: file.outputs.bus,
                converter: file.outputs.converter,
            },
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            SimError::Parse(m) => SimError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The bundled two-bus system.
    pub fn two_bus() -> Self {
        Self::parse(TWO_BUS).expect("bundled scenario is valid")
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_step_size(mut self, h: f64) -> Self {
        self.solver.h = h;
        self
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    pub fn with_swap_steps(mut self, n: usize) -> Self {
        self.swap_steps = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let v = |m: String| Err(SimError::Validation(m));
        self.network.validate()?;
        self.solver
            .validate()
            .map_err(|e| SimError::Validation(e.to_string()))?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return v(format!("duration must be positive, got {}", self.duration));
        }
        let steps = self.duration / self.solver.h;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return v(format!(
                "duration {} is not a whole number of {} s steps",
                self.duration, self.solver.h
            ));
        }
        let buses: HashSet<&str> = self.network.buses.iter().map(|b| b.id.as_str()).collect();
        let mut ids = HashSet::new();
        let mut conv_buses = HashSet::new();
        for c in &self.converters {
            if !ids.insert(c.id.as_str()) {
                return v(format!("duplicate converter id '{}'", c.id));
            }
            if !buses.contains(c.bus.as_str()) {
                return v(format!(
                    "converter '{}' refers to unknown bus '{}'",
                    c.id, c.bus
                ));
            }
            if !conv_buses.insert(c.bus.as_str()) {
                return v(format!("bus '{}' has two converters", c.bus));
            }
            if self.network.sources.iter().any(|s| s.bus == c.bus) {
                return v(format!("converter '{}' sits on a source bus", c.id));
            }
            c.params
                .validate()
                .map_err(|m| SimError::Validation(format!("converter '{}': {m}", c.id)))?;
        }
        for e in &self.events {
            if !(e.time >= 0.0 && e.time.is_finite()) {
                return v(format!("event time {} must be non-negative", e.time));
            }
            if !buses.contains(e.bus()) {
                return v(format!("event refers to unknown bus '{}'", e.bus()));
            }
            if let EventAction::FaultApply { r_fault, .. } = e.action {
                if !(r_fault > 0.0 && r_fault.is_finite()) {
                    return v(format!("r_fault must be positive, got {r_fault}"));
                }
            }
        }
        if !buses.contains(self.outputs.bus.as_str()) {
            return v(format!(
                "outputs refer to unknown bus '{}'",
                self.outputs.bus
            ));
        }
        if let Some(id) = &self.outputs.converter {
            if !ids.contains(id.as_str()) {
                return v(format!("outputs refer to unknown converter '{id}'"));
            }
        }
        Ok(())
    }

    /// `n` independent copies of the system; copy `k > 0` gets the suffix
    /// `#k` on every bus and converter id. Outputs stay on copy 0.
    pub fn replicate(&self, n: usize) -> Self {
        assert!(n >= 1, "need at least one copy");
        let mut out = self.clone();
        let rename = |id: &str, k: usize| format!("{id}#{k}");
        for k in 1..n {
            let net = &self.network;
            out.network.buses.extend(net.buses.iter().map(|b| Bus {
                id: rename(&b.id, k),
            }));
            out.network
                .branches
                .extend(net.branches.iter().map(|b| Branch {
                    from: rename(&b.from, k),
                    to: rename(&b.to, k),
                    ..b.clone()
                }));
            out.network
                .loads
                .extend(net.loads.iter().map(|l| ConstantImpedanceLoad {
                    bus: rename(&l.bus, k),
                    ..l.clone()
                }));
            out.network
                .sources
                .extend(net.sources.iter().map(|s| IdealSource {
                    bus: rename(&s.bus, k),
                    ..s.clone()
                }));
            out.converters
                .extend(self.converters.iter().map(|c| Converter {
                    id: rename(&c.id, k),
                    bus: rename(&c.bus, k),
                    params: c.params.clone(),
                }));
            out.events.extend(self.events.iter().map(|e| Event {
                time: e.time,
                action: match &e.action {
                    EventAction::FaultApply {
                        bus,
                        phase,
                        r_fault,
                    } => EventAction::FaultApply {
                        bus: rename(bus, k),
                        phase: *phase,
                        r_fault: *r_fault,
                    },
                    EventAction::FaultClear { bus, phase } => EventAction::FaultClear {
                        bus: rename(bus, k),
                        phase: *phase,
                    },
                },
            }));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenario_encodes_the_test_system() {
        let s = Scenario::two_bus();
        assert_eq!(s.network.branches[0].r, 0.1038);
        assert_eq!(s.network.branches[0].x, 0.8416);
        assert_eq!(s.network.load_model, crate::network::LoadModel::Parallel);
        assert_eq!(s.network.loads[0].p, [0.24, 0.3, 0.36]);
        assert_eq!(s.network.loads[0].q, [0.072, 0.09, 0.108]);
        assert_eq!(s.network.sources[0].magnitude, [1.03, 1.0, 0.98]);
        assert_eq!(s.network.sources[0].angle_deg, [0.0, -121.0, 118.0]);
        assert_eq!(s.converters[0].params, ConverterParams::default());
        assert_eq!(s.duration, 2.0);
        assert_eq!(s.solver.h, 5e-6);
        assert_eq!(s.scheme, Scheme::EmtReference);
        assert_eq!(s.events.len(), 2);
        assert_eq!(s.events[0].time, 0.2);
        assert_eq!(
            s.events[0].action,
            EventAction::FaultApply {
                bus: "bus1".into(),
                phase: Phase::B,
                r_fault: 0.1
            }
        );
        assert_eq!(s.events[1].time, 0.4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = TWO_BUS.replace("[outputs]", "[outputs]\ncolour = \"red\"");
        let err = Scenario::parse(&text).unwrap_err();
        assert!(matches!(err, SimError::Parse(_)), "{err}");
        assert!(err.to_string().contains("colour"));
    }

    #[test]
    fn unknown_bus_is_a_validation_error() {
        let text = TWO_BUS.replace("bus = \"bus1\"\nconverter", "bus = \"bus9\"\nconverter");
        let err = Scenario::parse(&text).unwrap_err();
        assert!(matches!(err, SimError::Validation(_)), "{err}");
    }

    #[test]
    fn replicate_renames_everything() {
        let s = Scenario::two_bus().replicate(3);
        assert_eq!(s.network.buses.len(), 6);
        assert_eq!(s.converters.len(), 3);
        assert_eq!(s.events.len(), 6);
        assert!(s.network.buses.iter().any(|b| b.id == "bus2#2"));
        s.validate().unwrap();
    }
}

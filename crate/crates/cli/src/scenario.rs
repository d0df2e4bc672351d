//! Scenario documents: one JSON file per experiment.
//!
//! Bus numbers are one-based. Line susceptances are in MW/rad and are
//! converted to MW per cycle, the unit the agents use.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use nyqscale_core::lti::TransferFunction;
use nyqscale_core::network::{build_laplacian, kron_reduce, Line, OperatingPoint, PowerNetwork};
use nyqscale_core::nyquist::{ContourKind, Hyperplane};
use nyqscale_core::powerplant::{
    assemble_agent, inertia_from_kinetic_energy, make_fdes, make_ffr_controller, make_hydro_actuator,
    make_wind_turbine, Agent, FreqActuator, HydroParams, WindParams, C_08,
};
use nyqscale_core::simkit::{Disturbance, Pulse};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

const BUNDLED: [(&str, &str); 3] = [
    ("n5_hydro", include_str!("../scenarios/n5_hydro.json")),
    ("n5_hydro_loads", include_str!("../scenarios/n5_hydro_loads.json")),
    ("n5_hydro_wind", include_str!("../scenarios/n5_hydro_wind.json")),
];

const SHARE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub network: NetworkSpec,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub reserves: ReserveSpec,
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default)]
    pub disturbance: Vec<PulseSpec>,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub buses: usize,
    pub lines: Vec<LineSpec>,
    /// Per-unit magnitudes, default 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltages: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles_rad: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub from: usize,
    pub to: usize,
    pub b_mw_per_rad: f64,
}

/// Buses without an agent entry are algebraic and removed by Kron reduction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub bus: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia_mw_s_per_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinetic_energy_gws: Option<f64>,
    #[serde(default)]
    pub load_damping_mw_per_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hydro: Option<HydroSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wind: Option<WindSpec>,
    /// Extra frequency actuators in MW/Hz.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub freq_actuators: Vec<TransferFunction>,
    /// Angle feedback in MW per cycle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_actuator: Option<TransferFunction>,
    /// Agent given directly as `g(s)` in cycles per MW; excludes all other fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer_function: Option<TransferFunction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroSpec {
    #[serde(rename = "T_y")]
    pub t_y: f64,
    #[serde(rename = "T_w")]
    pub t_w: f64,
    pub g0: f64,
    /// FCR share.
    pub share: f64,
    /// Servo rate limit per unit of `rating_mw` per second.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating_mw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindSpec {
    pub v: f64,
    #[serde(rename = "P_nom")]
    pub p_nom: f64,
    #[serde(rename = "P_MPP")]
    pub p_mpp: f64,
    /// FFR share.
    pub share: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_stab: Option<f64>,
    /// Communication delay; defaults to the reserve-wide value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReserveSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fcr_gain_mw_per_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ffr_gain_mw_per_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ffr_delay_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour: Option<ContourKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub outer_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperplane: Option<HyperplaneSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<f64>,
    /// Per-agent γ bounds for the decentralized check, MW per cycle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_bounds: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pade_order: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperplaneSpec {
    pub point: [f64; 2],
    pub normal: [f64; 2],
}

impl HyperplaneSpec {
    pub fn to_hyperplane(self) -> Result<Hyperplane, nyqscale_core::Error> {
        Hyperplane::new(
            Complex64::new(self.point[0], self.point[1]),
            Complex64::new(self.normal[0], self.normal[1]),
        )
    }
}

/// Rectangular power pulse; a missing `end` means the step is sustained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub bus: usize,
    pub start: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
    pub mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub rate_limit: bool,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_t_end() -> f64 {
    60.0
}

fn default_dt() -> f64 {
    1e-3
}

fn default_stride() -> usize {
    10
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            t_end: default_t_end(),
            dt: default_dt(),
            rate_limit: false,
            stride: default_stride(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

/// Network and agents ready for analysis.
pub struct Model {
    pub network: PowerNetwork,
    pub agents: Vec<Agent>,
    /// One-based bus number of each retained row.
    pub buses: Vec<usize>,
    /// One-based numbers of buses removed by Kron reduction.
    pub eliminated: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Loads a scenario from a path or a `bundled:<name>` reference.
pub fn load(reference: &str) -> Result<Scenario, CliError> {
    let text = if let Some(name) = reference.strip_prefix("bundled:") {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| t.to_string())
            .ok_or_else(|| {
                let names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
                CliError::Input(vec![format!("unknown bundled scenario {name:?}; available: {}", names.join(", "))])
            })?
    } else {
        std::fs::read_to_string(Path::new(reference))
            .map_err(|e| CliError::Input(vec![format!("cannot read {reference}: {e}")]))?
    };
    parse(&text)
}

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

/// Parses and validates a scenario document.
pub fn parse(text: &str) -> Result<Scenario, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let sc: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = json_pointer(&e.path().to_string());
        CliError::Input(vec![format!("{pointer}: {}", e.inner())])
    })?;
    let errors = sc.validate();
    if errors.is_empty() {
        Ok(sc)
    } else {
        Err(CliError::Input(errors))
    }
}

/// Converts a `a.b[0].c` path into `/a/b/0/c`.
fn json_pointer(path: &str) -> String {
    if path == "." || path.is_empty() {
        return "/".into();
    }
    let mut out = String::new();
    for part in path.split('.') {
        let mut rest = part;
        if let Some(i) = rest.find('[') {
            out.push('/');
            out.push_str(&rest[..i]);
            rest = &rest[i..];
            while let Some(end) = rest.find(']') {
                out.push('/');
                out.push_str(&rest[1..end]);
                rest = &rest[end + 1..];
            }
        } else {
            out.push('/');
            out.push_str(rest);
        }
    }
    out
}

impl Scenario {
    /// Schema-level checks that serde cannot express. Every message starts
    /// with the JSON pointer of the offending value.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let n = self.network.buses;
        if n == 0 {
            errs.push("/network/buses: must be at least 1".into());
        }
        let bus_ok = |b: usize| (1..=n).contains(&b);
        for (k, l) in self.network.lines.iter().enumerate() {
            for (field, b) in [("from", l.from), ("to", l.to)] {
                if !bus_ok(b) {
                    errs.push(format!("/network/lines/{k}/{field}: bus {b} does not exist"));
                }
            }
            if l.from == l.to {
                errs.push(format!("/network/lines/{k}: line connects bus {} to itself", l.from));
            }
            if !(l.b_mw_per_rad > 0.0 && l.b_mw_per_rad.is_finite()) {
                errs.push(format!("/network/lines/{k}/b_mw_per_rad: must be positive"));
            }
        }
        for (field, v) in [("voltages", &self.network.voltages), ("angles_rad", &self.network.angles_rad)] {
            if let Some(v) = v {
                if v.len() != n {
                    errs.push(format!("/network/{field}: expected {n} entries, got {}", v.len()));
                }
            }
        }
        if self.agents.is_empty() {
            errs.push("/agents: at least one agent is required".into());
        }
        let mut seen = vec![false; n + 1];
        let (mut fcr, mut ffr) = (0.0, 0.0);
        let (mut has_fcr, mut has_ffr) = (false, false);
        for (k, a) in self.agents.iter().enumerate() {
            let p = format!("/agents/{k}");
            if !bus_ok(a.bus) {
                errs.push(format!("{p}/bus: bus {} does not exist", a.bus));
            } else if seen[a.bus] {
                errs.push(format!("{p}/bus: bus {} has more than one agent", a.bus));
            } else {
                seen[a.bus] = true;
            }
            if a.transfer_function.is_some() {
                let other = a.inertia_mw_s_per_hz.is_some()
                    || a.kinetic_energy_gws.is_some()
                    || a.load_damping_mw_per_hz != 0.0
                    || a.hydro.is_some()
                    || a.wind.is_some()
                    || !a.freq_actuators.is_empty()
                    || a.angle_actuator.is_some();
                if other {
                    errs.push(format!("{p}/transfer_function: cannot be combined with swing-equation fields"));
                }
                continue;
            }
            if a.inertia_mw_s_per_hz.is_some() && a.kinetic_energy_gws.is_some() {
                errs.push(format!("{p}: give either inertia_mw_s_per_hz or kinetic_energy_gws"));
            }
            if let Some(h) = &a.hydro {
                has_fcr = true;
                fcr += h.share;
                if !(h.share > 0.0 && h.share <= 1.0) {
                    errs.push(format!("{p}/hydro/share: must be in (0, 1]"));
                }
            }
            if let Some(w) = &a.wind {
                has_ffr = true;
                ffr += w.share;
                if !(w.share > 0.0 && w.share <= 1.0) {
                    errs.push(format!("{p}/wind/share: must be in (0, 1]"));
                }
                if w.delay_s.is_none() && self.reserves.ffr_delay_s.is_none() {
                    errs.push(format!("{p}/wind/delay_s: missing and /reserves/ffr_delay_s is not set"));
                }
            }
        }
        if has_fcr {
            if (fcr - 1.0).abs() > SHARE_TOL {
                errs.push(format!("/agents: hydro FCR shares sum to {fcr}, expected 1"));
            }
            if self.reserves.fcr_gain_mw_per_hz.is_none() {
                errs.push("/reserves/fcr_gain_mw_per_hz: required when hydro units are present".into());
            }
        }
        if has_ffr {
            if (ffr - 1.0).abs() > SHARE_TOL {
                errs.push(format!("/agents: wind FFR shares sum to {ffr}, expected 1"));
            }
            if self.reserves.ffr_gain_mw_per_hz.is_none() {
                errs.push("/reserves/ffr_gain_mw_per_hz: required when wind units are present".into());
            }
        }
        for (k, d) in self.disturbance.iter().enumerate() {
            if !bus_ok(d.bus) {
                errs.push(format!("/disturbance/{k}/bus: bus {} does not exist", d.bus));
            } else if !seen[d.bus] {
                errs.push(format!("/disturbance/{k}/bus: bus {} is algebraic (no agent)", d.bus));
            }
            if d.end.is_some_and(|e| e <= d.start) {
                errs.push(format!("/disturbance/{k}/end: must exceed start"));
            }
        }
        if let Some(g) = &self.policy.gamma_bounds {
            let m = self.agents.len();
            if g.len() != m {
                errs.push(format!("/policy/gamma_bounds: expected {m} entries, got {}", g.len()));
            }
        }
        if let Some(r) = self.policy.r {
            if !(r > 0.0) {
                errs.push("/policy/r: must be positive".into());
            }
        }
        errs
    }

    /// Builds the network and agents; buses without agents are eliminated.
    pub fn build(&self) -> Result<Model, CliError> {
        let n = self.network.buses;
        let lines: Vec<Line> = self
            .network
            .lines
            .iter()
            .map(|l| Line { from: l.from - 1, to: l.to - 1, b: l.b_mw_per_rad })
            .collect();
        let voltages = self.network.voltages.clone().unwrap_or_else(|| vec![1.0; n]);
        let op = match &self.network.angles_rad {
            Some(a) => OperatingPoint { angles: a.clone() },
            None => OperatingPoint::flat(n),
        };
        let full = build_laplacian(&lines, &voltages, &op, n)
            .map_err(|e| CliError::Input(vec![format!("/network: {e}")]))?
            .scaled(2.0 * PI);
        let mut warnings: Vec<String> = full.warnings().to_vec();

        let mut by_bus: Vec<Option<(usize, &AgentSpec)>> = vec![None; n];
        for (k, a) in self.agents.iter().enumerate() {
            by_bus[a.bus - 1] = Some((k, a));
        }
        let algebraic: Vec<usize> = (0..n).filter(|i| by_bus[*i].is_none()).collect();
        let network = if algebraic.is_empty() {
            full
        } else {
            warnings.push(format!(
                "buses {:?} have no agent and were eliminated by Kron reduction",
                algebraic.iter().map(|i| i + 1).collect::<Vec<_>>()
            ));
            kron_reduce(&full, &algebraic).map_err(|e| CliError::Input(vec![format!("/network: {e}")]))?
        };
        let mut agents = Vec::new();
        let mut buses = Vec::new();
        for &b in network.bus_ids() {
            let (k, spec) = by_bus[b].expect("retained buses have agents");
            agents.push(self.build_agent(spec).map_err(|e| CliError::Input(vec![format!("/agents/{k}: {e}")]))?);
            buses.push(b + 1);
        }
        Ok(Model {
            network,
            agents,
            buses,
            eliminated: algebraic.iter().map(|i| i + 1).collect(),
            warnings,
        })
    }

    fn build_agent(&self, a: &AgentSpec) -> Result<Agent, nyqscale_core::Error> {
        if let Some(g) = &a.transfer_function {
            return Agent::rational(g.clone());
        }
        let m = match (a.inertia_mw_s_per_hz, a.kinetic_energy_gws) {
            (Some(m), _) => m,
            (None, Some(w)) => inertia_from_kinetic_energy(w),
            (None, None) => 0.0,
        };
        let mut parts = Vec::new();
        if let Some(h) = &a.hydro {
            let mut hp = HydroParams::new(h.t_y, h.t_w, h.g0)?;
            if let Some(rl) = h.rate_limit {
                hp.rate_limit = rl;
            }
            let f_des = make_fdes(self.reserves.fcr_gain_mw_per_hz.unwrap_or_default())?;
            parts.push(make_hydro_actuator(&hp, h.share, &f_des, h.rating_mw)?);
        }
        if let Some(w) = &a.wind {
            let mut wp = WindParams::new(w.v, w.p_nom, w.p_mpp);
            wp.c_omega = w.c_omega.unwrap_or(C_08);
            wp.k_stab = w.k_stab;
            let turbine = make_wind_turbine(&wp)?;
            let tau = w.delay_s.or(self.reserves.ffr_delay_s).unwrap_or_default();
            let gain = self.reserves.ffr_gain_mw_per_hz.unwrap_or_default();
            parts.push(FreqActuator::Linear(make_ffr_controller(w.share, gain, tau, &turbine)?));
        }
        parts.extend(a.freq_actuators.iter().cloned().map(FreqActuator::Linear));
        assemble_agent(m, parts, a.load_damping_mw_per_hz, a.angle_actuator.clone())
    }

    /// Disturbance on the retained buses, reindexed to model rows.
    pub fn disturbance(&self, model: &Model) -> Disturbance {
        Disturbance {
            pulses: self
                .disturbance
                .iter()
                .filter_map(|p| {
                    let row = model.buses.iter().position(|b| *b == p.bus)?;
                    Some(Pulse {
                        bus: row,
                        start: p.start,
                        end: p.end.unwrap_or(f64::INFINITY),
                        mw: p.mw,
                    })
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointer_conversion() {
        assert_eq!(json_pointer("agents[2].hydro.T_y"), "/agents/2/hydro/T_y");
        assert_eq!(json_pointer("network.lines[0][1]"), "/network/lines/0/1");
        assert_eq!(json_pointer("."), "/");
    }

    #[test]
    fn bundled_scenarios_parse() {
        for name in bundled_names() {
            let sc = load(&format!("bundled:{name}")).unwrap();
            let m = sc.build().unwrap();
            assert_eq!(m.agents.len(), 5);
        }
    }

    #[test]
    fn bundled_agents_match_library_case() {
        use nyqscale_core::powerplant::{n5, DEFAULT_TAU};
        for (name, case) in [
            ("n5_hydro", n5::Case::HydroOnly),
            ("n5_hydro_loads", n5::Case::HydroLoads),
            ("n5_hydro_wind", n5::Case::HydroWind),
        ] {
            let m = load(&format!("bundled:{name}")).unwrap().build().unwrap();
            assert_eq!(m.agents, n5::agents(case, DEFAULT_TAU).unwrap(), "{name}");
            assert_eq!(m.network.laplacian(), n5::network().unwrap().laplacian(), "{name}");
        }
    }

    #[test]
    fn round_trip_is_identity() {
        for name in bundled_names() {
            let sc = load(&format!("bundled:{name}")).unwrap();
            let text = serde_json::to_string(&sc).unwrap();
            assert_eq!(parse(&text).unwrap(), sc);
        }
    }

    #[test]
    fn agentless_bus_is_eliminated() {
        let mut sc = load("bundled:n5_hydro_loads").unwrap();
        sc.network.buses = 6;
        sc.network.lines.push(LineSpec { from: 5, to: 6, b_mw_per_rad: 500.0 });
        sc.network.lines.push(LineSpec { from: 4, to: 6, b_mw_per_rad: 500.0 });
        let m = sc.build().unwrap();
        assert_eq!(m.eliminated, vec![6]);
        assert_eq!(m.buses, vec![1, 2, 3, 4, 5]);
        assert_eq!(m.network.n(), 5);
    }

    #[test]
    fn semantic_errors_carry_pointers() {
        let mut sc = load("bundled:n5_hydro").unwrap();
        sc.agents[1].bus = 9;
        sc.disturbance[0].bus = 0;
        let errs = sc.validate();
        assert!(errs.iter().any(|e| e.starts_with("/agents/1/bus")));
        assert!(errs.iter().any(|e| e.starts_with("/disturbance/0/bus")));
    }
}

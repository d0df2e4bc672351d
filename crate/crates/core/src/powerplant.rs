//! Actuator and controller constructors and per-bus agent assembly.
//!
//! Units: power in MW, frequency in Hz, inertia in MW·s/Hz. An agent maps a
//! power disturbance in MW to a phase angle in cycles (integrated Hz).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{self, combine, mp_mirror, Combination, Polynomial, TransferFunction};

/// Conservative rotor-speed sensitivity bound for operation down to 80% of the MPP speed.
pub const C_08: f64 = 5.8e-3;

/// Default actuator delay in seconds.
pub const DEFAULT_TAU: f64 = 0.1;

/// Default hydro servo rate limit in pu/s.
pub const DEFAULT_RATE_LIMIT: f64 = 0.1;

/// Nominal-frequency inertia constant `M = 2·W_kin/50`, in MW·s/Hz for `W_kin` in GWs.
pub fn inertia_from_kinetic_energy(w_kin_gws: f64) -> f64 {
    2.0 * w_kin_gws * 1000.0 / 50.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HydroParams {
    #[serde(rename = "T_y")]
    pub t_y: f64,
    #[serde(rename = "T_w")]
    pub t_w: f64,
    pub g0: f64,
    #[serde(default = "default_rate_limit")]
    pub rate_limit: f64,
}

fn default_rate_limit() -> f64 {
    DEFAULT_RATE_LIMIT
}

impl HydroParams {
    pub fn new(t_y: f64, t_w: f64, g0: f64) -> Result<Self> {
        let p = Self {
            t_y,
            t_w,
            g0,
            rate_limit: DEFAULT_RATE_LIMIT,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_y > 0.0 && self.t_w > 0.0 && self.g0 > 0.0 && self.g0 <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "hydro parameters need T_y > 0, T_w > 0, 0 < g0 <= 1 (got {}, {}, {})",
                self.t_y, self.t_w, self.g0
            )));
        }
        if !(self.rate_limit > 0.0) {
            return Err(Error::InvalidInput("hydro rate limit must be positive".into()));
        }
        Ok(())
    }

    /// Turbine zero `z = 1/(g0·T_w)` in rad/s.
    pub fn zero(&self) -> f64 {
        1.0 / (self.g0 * self.t_w)
    }

    /// Water column part `2(z - s)/(s + 2z)`.
    pub fn penstock(&self) -> TransferFunction {
        let z = self.zero();
        TransferFunction::new(Polynomial::linear(2.0 * z, -2.0), Polynomial::linear(2.0 * z, 1.0))
            .expect("nonzero denominator")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindParams {
    pub v: f64,
    #[serde(default = "default_c_omega")]
    pub c_omega: f64,
    /// Defaults to `2·v·C_0.8`.
    #[serde(default)]
    pub k_stab: Option<f64>,
    #[serde(rename = "P_nom", default)]
    pub p_nom: f64,
    #[serde(rename = "P_MPP", default)]
    pub p_mpp: f64,
}

fn default_c_omega() -> f64 {
    C_08
}

impl WindParams {
    pub fn new(v: f64, p_nom: f64, p_mpp: f64) -> Self {
        Self {
            v,
            c_omega: C_08,
            k_stab: None,
            p_nom,
            p_mpp,
        }
    }

    pub fn zero(&self) -> f64 {
        self.v * self.c_omega
    }

    pub fn k_stab(&self) -> f64 {
        self.k_stab.unwrap_or(2.0 * self.v * C_08)
    }
}

/// FCR design target `k(6.5s + 1)/((2s + 1)(17s + 1))`.
pub fn make_fdes(k: f64) -> Result<TransferFunction> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidInput(format!("F_des gain must be positive, got {k}")));
    }
    TransferFunction::new(
        Polynomial::linear(1.0, 6.5).scale(k),
        &Polynomial::linear(1.0, 2.0) * &Polynomial::linear(1.0, 17.0),
    )
}

/// Linear hydro turbine with servo, `2(z - s)/((s + 2z)(s·T_y + 1))`.
pub fn make_hydro_turbine(p: &HydroParams) -> Result<TransferFunction> {
    p.validate()?;
    let z = p.zero();
    TransferFunction::new(
        Polynomial::linear(2.0 * z, -2.0),
        &Polynomial::linear(2.0 * z, 1.0) * &Polynomial::linear(1.0, p.t_y),
    )
}

/// Model-matching FCR controller for a hydro unit.
#[derive(Debug, Clone, PartialEq)]
pub struct FcrController {
    /// `K = c·F_des·Ĥ⁻¹`
    pub controller: TransferFunction,
    /// `K·H`, reduced to `c·F_des·(z - s)/(z + s)`
    pub actuator: TransferFunction,
    /// The turbine's right-half-plane zero.
    pub z: f64,
}

/// Builds `K = c·F_des·Ĥ⁻¹` where `Ĥ` is the minimum-phase mirror of `h_hydro`,
/// and the closed actuator `K·H_hydro`, cancelling the mirrored dynamics by
/// polynomial division.
pub fn make_fcr_controller(c: f64, f_des: &TransferFunction, h_hydro: &TransferFunction) -> Result<FcrController> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidInput(format!("FCR share must be in (0, 1], got {c}")));
    }
    let rhp: Vec<Complex64> = h_hydro.zeros()?.into_iter().filter(|z| z.re > 0.0).collect();
    if rhp.len() != 1 || rhp[0].im.abs() > lti::AXIS_TOL * rhp[0].norm().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "hydro model must have exactly one real RHP zero, found {rhp:?}"
        )));
    }
    let z = rhp[0].re;
    let h_hat = mp_mirror(h_hydro)?;
    let controller = combine(Combination::Series, &f_des.scale(c), &h_hat.inverse()?)?;
    if !controller.is_proper() {
        return Err(Error::Improper(format!("FCR controller {controller}")));
    }

    // K·H = c·F_des·(num_H/num_Ĥ): the shared denominator of H and Ĥ cancels exactly.
    let (num, rem) = (controller.num() * h_hydro.num()).div_rem(h_hydro.den())?;
    let scale = controller.num().max_abs_coeff() * h_hydro.num().max_abs_coeff();
    if rem.max_abs_coeff() > 1e-9 * scale {
        return Err(Error::ModelMatching(rem.max_abs_coeff() / scale));
    }
    let (den, rem) = (controller.den() * h_hydro.den()).div_rem(h_hydro.den())?;
    if rem.max_abs_coeff() > 1e-9 * den.max_abs_coeff() {
        return Err(Error::ModelMatching(rem.max_abs_coeff() / den.max_abs_coeff()));
    }
    let actuator = TransferFunction::new(num, den)?;

    let target = combine(Combination::Series, &f_des.scale(c), &all_pass(z))?;
    let residual = actuator.mismatch(&target);
    if residual > 1e-9 {
        return Err(Error::ModelMatching(residual));
    }
    Ok(FcrController { controller, actuator, z })
}

/// `(z - s)/(z + s)`
pub fn all_pass(z: f64) -> TransferFunction {
    TransferFunction::new(Polynomial::linear(z, -1.0), Polynomial::linear(z, 1.0)).expect("nonzero denominator")
}

/// Linearized wind turbine `(s - z)/(s + k_stab - z)`, `z = v·C_Ω`.
pub fn make_wind_turbine(p: &WindParams) -> Result<TransferFunction> {
    if !(p.v > 0.0 && p.c_omega > 0.0) {
        return Err(Error::InvalidInput(format!(
            "wind speed and C_omega must be positive (got {}, {})",
            p.v, p.c_omega
        )));
    }
    let z = p.zero();
    let k_stab = p.k_stab();
    if k_stab <= z {
        return Err(Error::UnstableTurbineModel { k_stab, z });
    }
    TransferFunction::new(Polynomial::linear(-z, 1.0), Polynomial::linear(k_stab - z, 1.0))
}

/// FFR actuator `c·k_ffr·5s·e^{-sτ}/(5s + 1)·H_wind`.
pub fn make_ffr_controller(c: f64, k_ffr: f64, tau: f64, h_wind: &TransferFunction) -> Result<TransferFunction> {
    if !(c > 0.0) {
        return Err(Error::InvalidInput(format!("FFR share must be positive, got {c}")));
    }
    let washout = TransferFunction::with_delay(
        Polynomial::new(vec![0.0, 5.0 * c * k_ffr]),
        Polynomial::linear(1.0, 5.0),
        tau,
    )?;
    combine(Combination::Series, &washout, h_wind)
}

/// Hydro actuator kept as a cascade so that the servo rate limit can be
/// applied in simulation: controller `K`, servo `1/(s·T_y + 1)`, penstock.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroActuator {
    pub controller: TransferFunction,
    pub servo_time_constant: f64,
    pub penstock: TransferFunction,
    /// Servo rate limit in MW/s.
    pub rate_limit_mw_per_s: Option<f64>,
    /// Exact composition of the cascade.
    pub combined: TransferFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FreqActuator {
    Linear(TransferFunction),
    Hydro(HydroActuator),
}

impl FreqActuator {
    pub fn transfer_function(&self) -> &TransferFunction {
        match self {
            FreqActuator::Linear(tf) => tf,
            FreqActuator::Hydro(h) => &h.combined,
        }
    }
}

/// Hydro FCR actuator from turbine parameters, FCR share and design target.
/// `rating_mw` sets the base of the servo rate limit.
pub fn make_hydro_actuator(p: &HydroParams, share: f64, f_des: &TransferFunction, rating_mw: Option<f64>) -> Result<FreqActuator> {
    let h = make_hydro_turbine(p)?;
    let fcr = make_fcr_controller(share, f_des, &h)?;
    Ok(FreqActuator::Hydro(HydroActuator {
        controller: fcr.controller,
        servo_time_constant: p.t_y,
        penstock: p.penstock(),
        rate_limit_mw_per_s: rating_mw.map(|r| p.rate_limit * r),
        combined: fcr.actuator,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwingAgent {
    /// MW·s/Hz
    pub inertia: f64,
    pub freq_actuators: Vec<FreqActuator>,
    /// Angle feedback, MW per cycle.
    pub angle_actuator: TransferFunction,
    /// MW/Hz
    pub load_damping: f64,
}

/// Per-bus dynamics from power disturbance to phase angle.
#[derive(Debug, Clone, PartialEq)]
pub enum Agent {
    Swing(SwingAgent),
    /// Agent given directly by its transfer function.
    Rational(TransferFunction),
}

/// `g = 1/(s(s·M + ΣF + D) + R)`.
pub fn assemble_agent(
    inertia: f64,
    freq_actuators: Vec<FreqActuator>,
    load_damping: f64,
    angle_actuator: Option<TransferFunction>,
) -> Result<Agent> {
    if !(inertia >= 0.0 && inertia.is_finite()) {
        return Err(Error::InvalidInput(format!("inertia must be finite and >= 0, got {inertia}")));
    }
    if !(load_damping >= 0.0 && load_damping.is_finite()) {
        return Err(Error::InvalidInput(format!("load damping must be finite and >= 0, got {load_damping}")));
    }
    let angle_actuator = angle_actuator.unwrap_or_else(TransferFunction::zero);
    let no_f = freq_actuators.iter().all(|f| f.transfer_function().is_zero());
    if inertia == 0.0 && no_f && load_damping == 0.0 && angle_actuator.is_zero() {
        return Err(Error::DegenerateModel("algebraic node: M, F, D and R are all zero".into()));
    }
    for f in &freq_actuators {
        if !f.transfer_function().is_proper() {
            return Err(Error::Improper(format!("frequency actuator {}", f.transfer_function())));
        }
    }
    if !angle_actuator.is_proper() {
        return Err(Error::Improper(format!("angle actuator {angle_actuator}")));
    }
    Ok(Agent::Swing(SwingAgent {
        inertia,
        freq_actuators,
        angle_actuator,
        load_damping,
    }))
}

impl SwingAgent {
    /// `ΣF(s) + D`
    pub fn freq_response(&self, s: Complex64) -> Result<Complex64> {
        let mut acc = Complex64::new(self.load_damping, 0.0);
        for f in &self.freq_actuators {
            acc += f.transfer_function().evaluate(s)?;
        }
        Ok(acc)
    }

    /// Sum of the frequency actuators plus load damping as one rational function.
    pub fn freq_rational(&self, pade_order: usize) -> Result<TransferFunction> {
        let mut acc = TransferFunction::gain(self.load_damping);
        for f in &self.freq_actuators {
            let part = f.transfer_function().rationalized(pade_order)?;
            acc = combine(Combination::Parallel, &acc, &part)?;
        }
        Ok(acc)
    }

    pub fn max_delay(&self) -> f64 {
        self.freq_actuators
            .iter()
            .map(|f| f.transfer_function().delay_s())
            .chain(std::iter::once(self.angle_actuator.delay_s()))
            .fold(0.0, f64::max)
    }
}

impl Agent {
    pub fn rational(g: TransferFunction) -> Result<Self> {
        if g.is_zero() {
            return Err(Error::DegenerateModel("agent transfer function is identically zero".into()));
        }
        if !g.is_proper() {
            return Err(Error::Improper(format!("agent {g}")));
        }
        Ok(Agent::Rational(g))
    }

    pub fn inertia(&self) -> Option<f64> {
        match self {
            Agent::Swing(a) => Some(a.inertia),
            Agent::Rational(_) => None,
        }
    }

    pub fn max_delay(&self) -> f64 {
        match self {
            Agent::Swing(a) => a.max_delay(),
            Agent::Rational(g) => g.delay_s(),
        }
    }

    /// `g(s)` with delays evaluated exactly.
    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        match self {
            Agent::Rational(g) => g.evaluate(s),
            Agent::Swing(a) => {
                let inner = s * a.inertia + a.freq_response(s)?;
                let den = s * inner + a.angle_actuator.evaluate(s)?;
                let scale = (s.norm() * (s.norm() * a.inertia + inner.norm())).max(f64::MIN_POSITIVE);
                if den.norm() <= 1e-14 * scale || den.norm() == 0.0 {
                    return Err(Error::PoleHit(s));
                }
                Ok(den.inv())
            }
        }
    }

    /// Rational `g(s)` with every delay replaced by its diagonal Padé approximant.
    pub fn rational_g(&self, pade_order: usize) -> Result<TransferFunction> {
        match self {
            Agent::Rational(g) => g.rationalized(pade_order),
            Agent::Swing(a) => {
                let f = a.freq_rational(pade_order)?;
                let r = a.angle_actuator.rationalized(pade_order)?;
                let (nf, df) = (f.num(), f.den());
                let (nr, dr) = (r.num(), r.den());
                let inner = &(&Polynomial::s() * df).scale(a.inertia) + nf;
                let den = &(&(&Polynomial::s() * &inner) * dr) + &(nr * df);
                if den.is_zero() {
                    return Err(Error::DegenerateModel("agent denominator vanishes".into()));
                }
                TransferFunction::new(df * dr, den)
            }
        }
    }

    /// Poles of the rationalized agent.
    pub fn poles(&self, pade_order: usize) -> Result<Vec<Complex64>> {
        self.rational_g(pade_order)?.poles()
    }

    /// Poles enclosed by a contour with inner radius `r`.
    pub fn rhp_poles_in_region(&self, r: f64, pade_order: usize) -> Result<Vec<Complex64>> {
        lti::rhp_poles_in_region(&self.rational_g(pade_order)?, r)
    }
}

/// Data of the five-bus Nordic test system at 110 GWs kinetic energy.
pub mod n5 {
    use super::*;
    use crate::network::{build_laplacian, Line, OperatingPoint, PowerNetwork};

    pub const BUSES: usize = 5;
    pub const W_KIN_GWS: [f64; 5] = [34.0, 22.5, 7.5, 33.0, 13.0];
    pub const D_MW_PER_HZ: [f64; 5] = [150.0, 60.0, 20.0, 120.0, 50.0];
    /// `γ/2π` per bus in GW/rad.
    pub const GAMMA_OVER_2PI_GW: [f64; 5] = [6.2, 10.2, 5.2, 7.5, 3.0];
    pub const P_GEN_MW: [f64; 5] = [9000.0, 6000.0, 2000.0, 5000.0, 2000.0];
    pub const FCR_SHARE: [f64; 3] = [0.6, 0.3, 0.1];
    /// `(T_y, T_w, g0)` for the hydro units at buses 1–3.
    pub const HYDRO: [(f64, f64, f64); 3] = [(0.2, 0.7, 0.8), (0.2, 1.4, 0.8), (0.2, 1.4, 0.8)];
    /// `(P_nom, FFR share, v, P_MPP)` for the wind farms at buses 1–3.
    pub const WIND: [(f64, f64, f64, f64); 3] =
        [(1000.0, 0.6, 10.0, 695.0), (1000.0, 0.3, 6.0, 150.0), (500.0, 0.1, 7.0, 120.0)];
    pub const K_FCR: f64 = 3100.0;
    pub const K_FFR: f64 = 1000.0;
    pub const DC_LINK_LOSS_MW: f64 = 1400.0;
    /// Importing dc-link bus, zero-based.
    pub const DC_LINK_BUS: usize = 4;
    /// Reconstructed line set `(from, to, b)` in GW/rad, zero-based buses.
    pub const LINES_GW_PER_RAD: [(usize, usize, f64); 7] = [
        (0, 1, 0.525),
        (0, 3, 2.575),
        (1, 2, 2.4),
        (1, 4, 1.15),
        (2, 4, 0.2),
        (3, 4, 0.15),
        (1, 3, 1.025),
    ];

    /// Line set in MW/rad at flat angles and unit voltages.
    pub fn lines() -> Vec<Line> {
        LINES_GW_PER_RAD
            .iter()
            .map(|&(from, to, b)| Line { from, to, b: 1000.0 * b })
            .collect()
    }

    /// Network in MW per cycle, the unit the agents expect.
    pub fn network() -> Result<PowerNetwork> {
        let net = build_laplacian(&lines(), &[1.0; BUSES], &OperatingPoint::flat(BUSES), BUSES)?;
        Ok(net.scaled(2.0 * std::f64::consts::PI))
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Case {
        /// Hydro FCR, no load damping.
        HydroOnly,
        /// Hydro FCR with the tabulated load damping.
        HydroLoads,
        /// Hydro FCR with wind FFR, no load damping.
        HydroWind,
    }

    pub fn agents(case: Case, tau: f64) -> Result<Vec<Agent>> {
        let f_des = make_fdes(K_FCR)?;
        let mut out = Vec::with_capacity(BUSES);
        for i in 0..BUSES {
            let m = inertia_from_kinetic_energy(W_KIN_GWS[i]);
            let mut parts = Vec::new();
            if i < 3 {
                let (t_y, t_w, g0) = HYDRO[i];
                let hp = HydroParams::new(t_y, t_w, g0)?;
                parts.push(make_hydro_actuator(&hp, FCR_SHARE[i], &f_des, Some(P_GEN_MW[i]))?);
                if case == Case::HydroWind {
                    let (p_nom, share, v, p_mpp) = WIND[i];
                    let h = make_wind_turbine(&WindParams::new(v, p_nom, p_mpp))?;
                    parts.push(FreqActuator::Linear(make_ffr_controller(share, K_FFR, tau, &h)?));
                }
            }
            let d = if case == Case::HydroLoads { D_MW_PER_HZ[i] } else { 0.0 };
            out.push(assemble_agent(m, parts, d, None)?);
        }
        Ok(out)
    }
}

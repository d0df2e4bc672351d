//! Closed-loop state-space realization and fixed-step simulation of the
//! network, used as an independent oracle for the frequency-domain checks.

use nalgebra::{DMatrix, DVector, RowDVector, Schur};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lti::TransferFunction;
use crate::network::PowerNetwork;
use crate::powerplant::{Agent, FreqActuator, SwingAgent};

/// States whose magnitude exceeds this are treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Largest allowed `dt·|λ_max|`.
pub const STEP_MARGIN: f64 = 0.1;

/// SISO state-space realization `ẋ = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ss {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
}

impl Ss {
    /// Balanced controllable canonical form of a proper, delay-free transfer function.
    pub fn from_tf(tf: &TransferFunction) -> Result<Self> {
        if tf.delay_s() != 0.0 {
            return Err(Error::Realization(format!("transfer function {tf} has a delay; rationalize it first")));
        }
        if !tf.is_proper() {
            return Err(Error::Realization(format!("improper transfer function {tf}")));
        }
        let den = tf.den();
        let n = den.degree();
        let lead = den.leading();
        let a_coef: Vec<f64> = den.coeffs().iter().map(|c| c / lead).collect();
        let mut b_coef: Vec<f64> = tf.num().coeffs().iter().map(|c| c / lead).collect();
        b_coef.resize(n + 1, 0.0);
        let d = b_coef[n];

        let mut a = DMatrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            a[(i, i + 1)] = 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = -a_coef[j];
        }
        let mut b = DVector::zeros(n);
        if n > 0 {
            b[n - 1] = 1.0;
        }
        let c = RowDVector::from_fn(n, |_, j| b_coef[j] - d * a_coef[j]);

        if n > 1 {
            let scale = nalgebra::balancing::balance_parlett_reinsch(&mut a);
            for i in 0..n {
                b[i] /= scale[i];
            }
            let c = RowDVector::from_fn(n, |_, j| c[j] * scale[j]);
            return Ok(Self { a, b, c, d });
        }
        Ok(Self { a, b, c, d })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `C(sI - A)⁻¹B + D`
    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let n = self.order();
        if n == 0 {
            return Ok(Complex64::new(self.d, 0.0));
        }
        let m = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - Complex64::new(self.a[(i, j)], 0.0)
        });
        let rhs = DVector::from_fn(n, |i, _| Complex64::new(self.b[i], 0.0));
        let x = m.lu().solve(&rhs).ok_or(Error::PoleHit(s))?;
        let y: Complex64 = (0..n).map(|i| x[i] * self.c[i]).sum();
        Ok(y + self.d)
    }
}

/// Meaning of a state in the closed-loop model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum StateRole {
    Angle { bus: usize },
    Frequency { bus: usize },
    Actuator { bus: usize, actuator: usize },
    Servo { bus: usize, actuator: usize },
    Penstock { bus: usize, actuator: usize },
    AngleFeedback { bus: usize },
    /// Internal state of an agent realized from its transfer function.
    Agent { bus: usize },
}

/// Servo rate limit as a clamp on one state derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateLimit {
    pub state: usize,
    pub bus: usize,
    pub limit: f64,
}

/// Closed-loop model `ẋ = Ax + Bd`, `y = Cx + Dd` with `d` the per-bus power
/// disturbance in MW. Output rows are all angles (cycles), then all
/// frequencies (Hz), then actuator powers (MW) in the order of `actuators`.
#[derive(Debug, Clone)]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Nonzero only for frequency outputs of agents with relative degree one.
    pub d: DMatrix<f64>,
    pub roles: Vec<StateRole>,
    /// `(bus, actuator index)` per actuator output row.
    pub actuators: Vec<(usize, usize)>,
    pub rate_limits: Vec<RateLimit>,
    pub inertias: Vec<Option<f64>>,
    /// `(i, k, w)` with `w` in MW per cycle.
    pub lines: Vec<(usize, usize, f64)>,
    eigenvalues: Vec<Complex64>,
}

struct Block {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c_delta: RowDVector<f64>,
    c_omega: RowDVector<f64>,
    d_omega: f64,
    act_rows: Vec<(usize, RowDVector<f64>)>,
    roles: Vec<StateRole>,
    rate_limits: Vec<(usize, f64)>,
}

struct Sub {
    ss: Ss,
    offset: usize,
}

fn swing_block(bus: usize, ag: &SwingAgent, pade_order: usize) -> Result<Block> {
    let m = ag.inertia;
    let mut roles = vec![StateRole::Angle { bus }, StateRole::Frequency { bus }];
    let mut next = 2;
    let mut take = |ss: Ss, role: StateRole, roles: &mut Vec<StateRole>| {
        let sub = Sub { offset: next, ss };
        next += sub.ss.order();
        roles.extend(std::iter::repeat(role).take(sub.ss.order()));
        sub
    };

    enum Part {
        Linear(Sub),
        Hydro { k: Sub, servo: usize, t_y: f64, pen: Sub, limit: Option<f64> },
    }
    let mut parts = Vec::new();
    for (j, f) in ag.freq_actuators.iter().enumerate() {
        match f {
            FreqActuator::Linear(tf) => {
                let ss = Ss::from_tf(&tf.rationalized(pade_order)?)?;
                parts.push(Part::Linear(take(ss, StateRole::Actuator { bus, actuator: j }, &mut roles)));
            }
            FreqActuator::Hydro(h) => {
                let k = take(
                    Ss::from_tf(&h.controller.rationalized(pade_order)?)?,
                    StateRole::Actuator { bus, actuator: j },
                    &mut roles,
                );
                let servo_ss = Ss {
                    a: DMatrix::from_element(1, 1, -1.0 / h.servo_time_constant),
                    b: DVector::from_element(1, 1.0 / h.servo_time_constant),
                    c: RowDVector::from_element(1, 1.0),
                    d: 0.0,
                };
                let servo = take(servo_ss, StateRole::Servo { bus, actuator: j }, &mut roles).offset;
                let pen = take(
                    Ss::from_tf(&h.penstock.rationalized(pade_order)?)?,
                    StateRole::Penstock { bus, actuator: j },
                    &mut roles,
                );
                parts.push(Part::Hydro { k, servo, t_y: h.servo_time_constant, pen, limit: h.rate_limit_mw_per_s });
            }
        }
    }
    let r = if ag.angle_actuator.is_zero() {
        None
    } else {
        Some(take(
            Ss::from_tf(&ag.angle_actuator.rationalized(pade_order)?)?,
            StateRole::AngleFeedback { bus },
            &mut roles,
        ))
    };

    let dim = next;
    let mut a = DMatrix::zeros(dim, dim);
    let mut b = DVector::zeros(dim);
    let mut act_rows = Vec::new();
    let mut rate_limits = Vec::new();
    a[(0, 1)] = 1.0;
    b[1] = 1.0 / m;
    a[(1, 1)] -= ag.load_damping / m;

    // places a subsystem driven by the state `input`; returns its output row
    let place = |a: &mut DMatrix<f64>, sub: &Sub, input: &RowDVector<f64>| -> RowDVector<f64> {
        let o = sub.offset;
        let n = sub.ss.order();
        a.view_mut((o, o), (n, n)).copy_from(&sub.ss.a);
        for i in 0..n {
            for j in 0..dim {
                a[(o + i, j)] += sub.ss.b[i] * input[j];
            }
        }
        let mut y = input * sub.ss.d;
        for i in 0..n {
            y[o + i] += sub.ss.c[i];
        }
        y
    };
    let unit = |k: usize| RowDVector::from_fn(dim, |_, j| if j == k { 1.0 } else { 0.0 });

    for (j, part) in parts.iter().enumerate() {
        let p = match part {
            Part::Linear(sub) => place(&mut a, sub, &unit(1)),
            Part::Hydro { k, servo, t_y, pen, limit } => {
                let cmd = place(&mut a, k, &unit(1));
                for col in 0..dim {
                    a[(*servo, col)] += cmd[col] / t_y;
                }
                a[(*servo, *servo)] -= 1.0 / t_y;
                if let Some(l) = limit {
                    rate_limits.push((*servo, *l));
                }
                place(&mut a, pen, &unit(*servo))
            }
        };
        for col in 0..dim {
            a[(1, col)] -= p[col] / m;
        }
        act_rows.push((j, p));
    }
    if let Some(sub) = &r {
        let y = place(&mut a, sub, &unit(0));
        for col in 0..dim {
            a[(1, col)] -= y[col] / m;
        }
    }

    Ok(Block {
        a,
        b,
        c_delta: unit(0),
        c_omega: unit(1),
        d_omega: 0.0,
        act_rows,
        roles,
        rate_limits,
    })
}

fn rational_block(bus: usize, agent: &Agent, pade_order: usize) -> Result<Block> {
    let g = agent.rational_g(pade_order)?;
    if !g.is_strictly_proper() {
        return Err(Error::Realization(format!(
            "agent {bus} is not strictly proper ({g}); its angle would respond instantly to power"
        )));
    }
    let ss = Ss::from_tf(&g)?;
    let n = ss.order();
    let c_omega = &ss.c * &ss.a;
    let d_omega = (&ss.c * &ss.b)[0];
    Ok(Block {
        a: ss.a,
        b: ss.b,
        c_delta: ss.c,
        c_omega,
        d_omega,
        act_rows: Vec::new(),
        roles: vec![StateRole::Agent { bus }; n],
        rate_limits: Vec::new(),
    })
}

/// Realizes the closed loop `δ = G(s)(d - Lδ)` with every delay replaced by its
/// diagonal Padé approximant. The Laplacian must be in MW per cycle.
pub fn realize_state_space(net: &PowerNetwork, agents: &[Agent], pade_order: usize) -> Result<StateSpaceModel> {
    let n = net.n();
    if agents.len() != n {
        return Err(Error::InvalidInput(format!("{} agents for {} buses", agents.len(), n)));
    }
    let blocks = agents
        .iter()
        .enumerate()
        .map(|(i, ag)| match ag {
            Agent::Swing(s) if s.inertia > 0.0 => swing_block(i, s, pade_order),
            _ => rational_block(i, ag, pade_order),
        })
        .collect::<Result<Vec<_>>>()?;

    let dim: usize = blocks.iter().map(|b| b.a.nrows()).sum();
    if dim == 0 {
        return Err(Error::Realization("closed loop has no states".into()));
    }
    let n_act: usize = blocks.iter().map(|b| b.act_rows.len()).sum();
    let mut a_open = DMatrix::zeros(dim, dim);
    let mut b = DMatrix::zeros(dim, n);
    let mut c = DMatrix::zeros(2 * n + n_act, dim);
    let mut d = DMatrix::zeros(2 * n + n_act, n);
    let mut roles = Vec::with_capacity(dim);
    let mut actuators = Vec::with_capacity(n_act);
    let mut rate_limits = Vec::new();

    let mut off = 0;
    let mut row = 2 * n;
    for (i, blk) in blocks.iter().enumerate() {
        let k = blk.a.nrows();
        a_open.view_mut((off, off), (k, k)).copy_from(&blk.a);
        b.view_mut((off, i), (k, 1)).copy_from(&blk.b);
        c.view_mut((i, off), (1, k)).copy_from(&blk.c_delta);
        c.view_mut((n + i, off), (1, k)).copy_from(&blk.c_omega);
        d[(n + i, i)] = blk.d_omega;
        for (j, p) in &blk.act_rows {
            c.view_mut((row, off), (1, k)).copy_from(p);
            actuators.push((i, *j));
            row += 1;
        }
        for &(s, limit) in &blk.rate_limits {
            rate_limits.push(RateLimit { state: off + s, bus: i, limit });
        }
        roles.extend(blk.roles.iter().copied());
        off += k;
    }

    // u = d - Lδ
    let c_delta = c.rows(0, n).into_owned();
    let feedback = net.laplacian() * &c_delta;
    let a = &a_open - &b * &feedback;
    let c = &c - &d * &feedback;

    let eigenvalues = eigenvalues_of(&a)?;
    Ok(StateSpaceModel {
        a,
        b,
        c,
        d,
        roles,
        actuators,
        rate_limits,
        inertias: agents.iter().map(Agent::inertia).collect(),
        lines: net.edges(),
        eigenvalues,
    })
}

/// Eigenvalues of a real square matrix. Tries the balanced matrix first and
/// falls back to the raw one and to looser deflation tolerances.
pub fn eigenvalues_of(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let mut balanced = a.clone();
    if balanced.nrows() > 1 {
        nalgebra::balancing::balance_parlett_reinsch(&mut balanced);
    }
    for eps in [f64::EPSILON, 1e-14, 1e-12] {
        for m in [&balanced, a] {
            if let Some(schur) = Schur::try_new(m.clone(), eps, 100_000) {
                return Ok(schur.complex_eigenvalues().iter().copied().collect());
            }
        }
    }
    Err(Error::Realization("Schur iteration did not converge".into()))
}

impl StateSpaceModel {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn buses(&self) -> usize {
        self.b.ncols()
    }

    /// Closed-loop poles.
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max)
    }

    /// Number of eigenvalues with `|λ| <= tol`.
    pub fn zero_eigenvalue_count(&self, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|l| l.norm() <= tol).count()
    }

    /// Initial state with the given bus angles in cycles and all else at rest.
    /// Agents realized from transfer functions get the least-norm state that
    /// produces the angle.
    pub fn angle_offset_state(&self, angles: &[f64]) -> Result<DVector<f64>> {
        let n = self.buses();
        if angles.len() != n {
            return Err(Error::InvalidInput(format!("{} angles for {} buses", angles.len(), n)));
        }
        let mut x = DVector::zeros(self.dim());
        for bus in 0..n {
            let row = self.c.row(bus);
            let nrm = row.norm_squared();
            if nrm == 0.0 {
                return Err(Error::Realization(format!("angle of bus {bus} is not observable")));
            }
            for (j, role) in self.roles.iter().enumerate() {
                match role {
                    StateRole::Angle { bus: b } if *b == bus => x[j] = angles[bus],
                    StateRole::Agent { bus: b } if *b == bus => x[j] += angles[bus] * row[j] / nrm,
                    _ => {}
                }
            }
        }
        Ok(x)
    }
}

/// Rectangular power pulse on one bus; `mw` is added to `d` for `start <= t < end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Pulse {
    pub bus: usize,
    pub start: f64,
    pub end: f64,
    pub mw: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, serde::Deserialize)]
pub struct Disturbance {
    pub pulses: Vec<Pulse>,
}

impl Disturbance {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn step(bus: usize, mw: f64) -> Self {
        Self {
            pulses: vec![Pulse { bus, start: 0.0, end: f64::INFINITY, mw }],
        }
    }

    pub fn at(&self, t: f64, n: usize) -> DVector<f64> {
        let mut d = DVector::zeros(n);
        for p in &self.pulses {
            if t >= p.start && t < p.end && p.bus < n {
                d[p.bus] += p.mw;
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub t_end: f64,
    pub dt: f64,
    pub rate_limit: bool,
    /// Record every `stride`-th step.
    pub stride: usize,
    pub initial_state: Option<DVector<f64>>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            t_end: 60.0,
            dt: 1e-3,
            rate_limit: false,
            stride: 10,
            initial_state: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    /// Seconds.
    pub time: Vec<f64>,
    /// Per bus, Hz.
    pub frequency_hz: Vec<Vec<f64>>,
    /// Per bus, cycles.
    pub angle_cycles: Vec<Vec<f64>>,
    /// `(from, to)` per tie line.
    pub tie_lines: Vec<(usize, usize)>,
    /// Per tie line, MW from `from` to `to`.
    pub tie_flow_mw: Vec<Vec<f64>>,
    pub actuators: Vec<(usize, usize)>,
    /// Per actuator, MW.
    pub actuator_power_mw: Vec<Vec<f64>>,
    pub omega_avg_hz: Vec<f64>,
    /// Absent when the center of inertia is undefined.
    pub omega_coi_hz: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimSummary {
    /// `ω_avg` at the final time, Hz.
    pub settling_value_hz: f64,
    /// Largest `|ω_avg|`, Hz.
    pub peak_deviation_hz: f64,
    /// Time of the largest `|ω_avg|`, s.
    pub peak_time_s: f64,
    pub max_abs_tie_flow_mw: f64,
    /// `|ω_avg - ω_COI|` at the final time, Hz.
    pub final_avg_coi_gap_hz: Option<f64>,
}

fn derivative(model: &StateSpaceModel, x: &DVector<f64>, d: &DVector<f64>, clamp: bool) -> DVector<f64> {
    let mut dx = &model.a * x + &model.b * d;
    if clamp {
        for rl in &model.rate_limits {
            dx[rl.state] = dx[rl.state].clamp(-rl.limit, rl.limit);
        }
    }
    dx
}

/// Fixed-step RK4 simulation. The step must satisfy `dt·|λ_max| <= 0.1`.
pub fn simulate(model: &StateSpaceModel, disturbance: &Disturbance, opts: &SimOptions) -> Result<SimulationResult> {
    let dt = opts.dt;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::IntegratorConfig(format!("dt must be positive, got {dt}")));
    }
    if !(opts.t_end > 0.0 && opts.t_end.is_finite()) {
        return Err(Error::IntegratorConfig(format!("t_end must be positive, got {}", opts.t_end)));
    }
    if opts.stride == 0 {
        return Err(Error::IntegratorConfig("record stride must be at least 1".into()));
    }
    let rho = model.spectral_radius();
    if dt * rho > STEP_MARGIN {
        return Err(Error::IntegratorConfig(format!(
            "dt = {dt} s exceeds {STEP_MARGIN}/|λ_max| = {} s",
            STEP_MARGIN / rho
        )));
    }
    let n = model.buses();
    for p in &disturbance.pulses {
        if p.bus >= n {
            return Err(Error::InvalidInput(format!("disturbance on bus {} of {n}", p.bus)));
        }
    }
    let mut x = match &opts.initial_state {
        Some(x0) if x0.len() != model.dim() => {
            return Err(Error::InvalidInput(format!(
                "initial state has {} entries, model has {}",
                x0.len(),
                model.dim()
            )))
        }
        Some(x0) => x0.clone(),
        None => DVector::zeros(model.dim()),
    };

    let steps = (opts.t_end / dt).round() as usize;
    let clamp = opts.rate_limit;
    let mut rec = Recorder::new(model);
    rec.push(model, 0.0, &x, &disturbance.at(0.0, n));
    for k in 0..steps {
        let t = k as f64 * dt;
        let d0 = disturbance.at(t, n);
        let dh = disturbance.at(t + 0.5 * dt, n);
        let d1 = disturbance.at(t + dt, n);
        let k1 = derivative(model, &x, &d0, clamp);
        let k2 = derivative(model, &(&x + &k1 * (0.5 * dt)), &dh, clamp);
        let k3 = derivative(model, &(&x + &k2 * (0.5 * dt)), &dh, clamp);
        let k4 = derivative(model, &(&x + &k3 * dt), &d1, clamp);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let t1 = (k + 1) as f64 * dt;
        if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
            return Err(Error::Divergence { time: t1 });
        }
        if (k + 1) % opts.stride == 0 || k + 1 == steps {
            rec.push(model, t1, &x, &d1);
        }
    }
    rec.finish(model)
}

struct Recorder {
    out: SimulationResult,
}

impl Recorder {
    fn new(model: &StateSpaceModel) -> Self {
        let n = model.buses();
        Self {
            out: SimulationResult {
                time: Vec::new(),
                frequency_hz: vec![Vec::new(); n],
                angle_cycles: vec![Vec::new(); n],
                tie_lines: model.lines.iter().map(|&(i, k, _)| (i, k)).collect(),
                tie_flow_mw: vec![Vec::new(); model.lines.len()],
                actuators: model.actuators.clone(),
                actuator_power_mw: vec![Vec::new(); model.actuators.len()],
                omega_avg_hz: Vec::new(),
                omega_coi_hz: None,
            },
        }
    }

    fn push(&mut self, model: &StateSpaceModel, t: f64, x: &DVector<f64>, d: &DVector<f64>) {
        let n = model.buses();
        let y = &model.c * x + &model.d * d;
        self.out.time.push(t);
        for i in 0..n {
            self.out.angle_cycles[i].push(y[i]);
            self.out.frequency_hz[i].push(y[n + i]);
        }
        for (l, &(i, k, w)) in model.lines.iter().enumerate() {
            self.out.tie_flow_mw[l].push(w * (y[i] - y[k]));
        }
        for a in 0..model.actuators.len() {
            self.out.actuator_power_mw[a].push(y[2 * n + a]);
        }
    }

    fn finish(mut self, model: &StateSpaceModel) -> Result<SimulationResult> {
        self.out.omega_avg_hz = average(&self.out.frequency_hz);
        self.out.omega_coi_hz = match model.inertias.iter().copied().collect::<Option<Vec<f64>>>() {
            Some(m) => coi(&self.out.frequency_hz, &m).ok(),
            None => None,
        };
        Ok(self.out)
    }
}

fn average(traces: &[Vec<f64>]) -> Vec<f64> {
    let n = traces.len() as f64;
    let len = traces.first().map_or(0, Vec::len);
    (0..len).map(|k| traces.iter().map(|tr| tr[k]).sum::<f64>() / n).collect()
}

fn coi(traces: &[Vec<f64>], inertias: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = inertias.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateModel("total inertia is zero; center-of-inertia frequency is undefined".into()));
    }
    let len = traces.first().map_or(0, Vec::len);
    Ok((0..len)
        .map(|k| traces.iter().zip(inertias).map(|(tr, m)| tr[k] * m).sum::<f64>() / total)
        .collect())
}

/// `(ω_avg, ω_COI)` traces in Hz.
pub fn compute_aggregates(result: &SimulationResult, agents: &[Agent]) -> Result<(Vec<f64>, Vec<f64>)> {
    if agents.len() != result.frequency_hz.len() {
        return Err(Error::InvalidInput(format!(
            "{} agents for {} frequency traces",
            agents.len(),
            result.frequency_hz.len()
        )));
    }
    let m = agents
        .iter()
        .enumerate()
        .map(|(i, a)| a.inertia().ok_or_else(|| Error::InvalidInput(format!("inertia of agent {i} is unknown"))))
        .collect::<Result<Vec<f64>>>()?;
    Ok((average(&result.frequency_hz), coi(&result.frequency_hz, &m)?))
}

impl SimulationResult {
    pub fn summary(&self) -> SimSummary {
        let (mut peak, mut peak_t) = (0.0, 0.0);
        for (t, w) in self.time.iter().zip(&self.omega_avg_hz) {
            if w.abs() > peak {
                peak = w.abs();
                peak_t = *t;
            }
        }
        let tie = self.tie_flow_mw.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        let gap = self
            .omega_coi_hz
            .as_ref()
            .and_then(|c| Some((c.last()? - self.omega_avg_hz.last()?).abs()));
        SimSummary {
            settling_value_hz: self.omega_avg_hz.last().copied().unwrap_or(0.0),
            peak_deviation_hz: peak,
            peak_time_s: peak_t,
            max_abs_tie_flow_mw: tie,
            final_avg_coi_gap_hz: gap,
        }
    }

    /// Time series as CSV with one column per bus frequency, tie line and actuator.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["time_s".to_string()];
        header.extend((0..self.frequency_hz.len()).map(|i| format!("f{}_hz", i + 1)));
        header.extend(self.tie_lines.iter().map(|(i, k)| format!("flow_{}_{}_mw", i + 1, k + 1)));
        header.extend(self.actuators.iter().map(|(i, j)| format!("p{}_{}_mw", i + 1, j + 1)));
        header.push("omega_avg_hz".into());
        if self.omega_coi_hz.is_some() {
            header.push("omega_coi_hz".into());
        }
        let mut out = header.join(",");
        out.push('\n');
        for k in 0..self.time.len() {
            let mut row = vec![self.time[k]];
            row.extend(self.frequency_hz.iter().map(|tr| tr[k]));
            row.extend(self.tie_flow_mw.iter().map(|tr| tr[k]));
            row.extend(self.actuator_power_mw.iter().map(|tr| tr[k]));
            row.push(self.omega_avg_hz[k]);
            if let Some(c) = &self.omega_coi_hz {
                row.push(c[k]);
            }
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.9e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

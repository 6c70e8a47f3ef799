//! One-degree-of-freedom manipulator/target contact model.
//!
//! The end-effector (mass `m_ri`) is held by the arm's passive compliance
//! (`k_ri`, `b_ri`) around a reference that advances at the commanded approach
//! speed. It presses on a free-floating target (mass `m_t`) through a
//! penalty contact with stiffness `k_c` and damping `b_c`:
//!
//! ```text
//! y   = x_t - x_i                    (penetration, negative while pressing)
//! F_c = -k_c y - b_c y'
//! m_ri x_i'' = -F_c - b_ri (x_i' - v_cmd) - k_ri (x_i - v_cmd t)
//! m_t  x_t'' =  F_c - F_f
//! ```
//!
//! The contact force is deliberately not clamped at zero; a negative value is
//! read as separation by [`detect_contact_breaks`].

use std::io::{self, Write};

use crate::error::{Result, SimError};
use crate::fmt::sci;
use crate::parallel::ordered_map;

/// Any state component above this magnitude is treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sim1dParams {
    pub m_ri: f64,
    pub b_ri: f64,
    pub k_ri: f64,
    pub m_t: f64,
    pub k_c: f64,
    pub b_c: f64,
    /// Coulomb friction magnitude acting on the target.
    pub f_f: f64,
    /// Speed of the arm's reference trajectory.
    pub v_cmd: f64,
}

impl Sim1dParams {
    pub fn new(
        m_ri: f64,
        b_ri: f64,
        k_ri: f64,
        m_t: f64,
        k_c: f64,
        b_c: f64,
        f_f: f64,
        v_cmd: f64,
    ) -> Result<Self> {
        let p = Self {
            m_ri,
            b_ri,
            k_ri,
            m_t,
            k_c,
            b_c,
            f_f,
            v_cmd,
        };
        p.validate()?;
        Ok(p)
    }

    /// Base set for the arm stiffness study (`k_ri` starts at 0).
    pub fn table_sim2() -> Self {
        Self {
            m_ri: 7.5,
            b_ri: 100.0,
            k_ri: 0.0,
            m_t: 15.0,
            k_c: 250.0,
            b_c: 20.0,
            f_f: 0.0,
            v_cmd: 0.5,
        }
    }

    /// Base set for the arm damping study.
    pub fn table_sim3() -> Self {
        Self {
            m_t: 25.0,
            ..Self::table_sim2()
        }
    }

    /// Base set for the mass ratio study around `m_ri = 7.5`.
    pub fn table_sim1() -> Self {
        Self {
            m_t: 15.0,
            ..Self::table_sim2()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("m_ri", self.m_ri), ("m_t", self.m_t), ("k_c", self.k_c)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::param(name, format!("must be > 0, got {v}")));
            }
        }
        let nonneg = [
            ("b_ri", self.b_ri),
            ("k_ri", self.k_ri),
            ("b_c", self.b_c),
            ("f_f", self.f_f),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::param(name, format!("must be >= 0, got {v}")));
            }
        }
        if !self.v_cmd.is_finite() {
            return Err(SimError::param("v_cmd", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Sim1dState {
    pub x_i: f64,
    pub v_i: f64,
    pub x_t: f64,
    pub v_t: f64,
    pub t: f64,
}

impl Sim1dState {
    /// Bodies touching (`y = 0`), target at rest, manipulator at `v_approach`.
    pub fn initial_contact(v_approach: f64) -> Self {
        Self {
            v_i: v_approach,
            ..Self::default()
        }
    }

    pub fn penetration(&self) -> f64 {
        self.x_t - self.x_i
    }

    pub fn penetration_rate(&self) -> f64 {
        self.v_t - self.v_i
    }

    pub fn contact_force(&self, p: &Sim1dParams) -> f64 {
        contact_force_1d(self.penetration(), self.penetration_rate(), p.k_c, p.b_c)
    }

    pub fn momentum(&self, p: &Sim1dParams) -> f64 {
        p.m_ri * self.v_i + p.m_t * self.v_t
    }

    fn max_abs(&self) -> f64 {
        [self.x_i, self.v_i, self.x_t, self.v_t]
            .iter()
            .fold(0.0f64, |m, v| {
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    m.max(v.abs())
                }
            })
    }
}

/// Time derivative `(x_i', v_i', x_t', v_t')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sim1dRate {
    pub v_i: f64,
    pub a_i: f64,
    pub v_t: f64,
    pub a_t: f64,
}

pub fn contact_force_1d(y: f64, y_dot: f64, k_c: f64, b_c: f64) -> f64 {
    -k_c * y - b_c * y_dot
}

/// Coulomb friction on the target with static hold; never adds energy.
fn target_friction(v_t: f64, f_c: f64, f_f: f64) -> f64 {
    if f_f == 0.0 {
        0.0
    } else if v_t != 0.0 {
        f_f * v_t.signum()
    } else if f_c.abs() <= f_f {
        f_c
    } else {
        f_f * f_c.signum()
    }
}

pub fn derivatives_1d(state: &Sim1dState, params: &Sim1dParams) -> Sim1dRate {
    let f_c = state.contact_force(params);
    let deflection = state.x_i - params.v_cmd * state.t;
    let deflection_rate = state.v_i - params.v_cmd;
    let a_i = (-f_c - params.b_ri * deflection_rate - params.k_ri * deflection) / params.m_ri;
    let a_t = (f_c - target_friction(state.v_t, f_c, params.f_f)) / params.m_t;
    Sim1dRate {
        v_i: state.v_i,
        a_i,
        v_t: state.v_t,
        a_t,
    }
}

fn advance(s: &Sim1dState, r: &Sim1dRate, h: f64) -> Sim1dState {
    Sim1dState {
        x_i: s.x_i + h * r.v_i,
        v_i: s.v_i + h * r.a_i,
        x_t: s.x_t + h * r.v_t,
        v_t: s.v_t + h * r.a_t,
        t: s.t + h,
    }
}

/// One classical RK4 step.
pub fn step_1dof(state: &Sim1dState, params: &Sim1dParams, dt: f64) -> Result<Sim1dState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::param("dt", format!("must be > 0, got {dt}")));
    }
    let k1 = derivatives_1d(state, params);
    let k2 = derivatives_1d(&advance(state, &k1, 0.5 * dt), params);
    let k3 = derivatives_1d(&advance(state, &k2, 0.5 * dt), params);
    let k4 = derivatives_1d(&advance(state, &k3, dt), params);
    let w = dt / 6.0;
    let next = Sim1dState {
        x_i: state.x_i + w * (k1.v_i + 2.0 * k2.v_i + 2.0 * k3.v_i + k4.v_i),
        v_i: state.v_i + w * (k1.a_i + 2.0 * k2.a_i + 2.0 * k3.a_i + k4.a_i),
        x_t: state.x_t + w * (k1.v_t + 2.0 * k2.v_t + 2.0 * k3.v_t + k4.v_t),
        v_t: state.v_t + w * (k1.a_t + 2.0 * k2.a_t + 2.0 * k3.a_t + k4.a_t),
        t: state.t + dt,
    };
    if next.max_abs() > DIVERGENCE_LIMIT {
        return Err(SimError::Divergence {
            step: (next.t / dt).round() as u64,
            t: next.t,
            detail: format!("state magnitude exceeded {DIVERGENCE_LIMIT:e}: {next:?}"),
        });
    }
    Ok(next)
}

/// Integrates from `initial` for `n_steps`, returning all `n_steps + 1` samples.
pub fn simulate(
    initial: Sim1dState,
    params: &Sim1dParams,
    dt: f64,
    n_steps: usize,
) -> Result<Vec<Sim1dState>> {
    params.validate()?;
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(initial);
    let mut s = initial;
    for _ in 0..n_steps {
        s = step_1dof(&s, params, dt)?;
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariedField {
    /// `m_ri / m_t`, varied through `m_t` at fixed `m_ri`.
    MassRatio,
    ManipStiffness,
    ManipDamping,
}

impl VariedField {
    pub fn name(&self) -> &'static str {
        match self {
            VariedField::MassRatio => "mass_ratio",
            VariedField::ManipStiffness => "k_ri",
            VariedField::ManipDamping => "b_ri",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mass_ratio" | "MassRatio" => Some(VariedField::MassRatio),
            "k_ri" | "ManipStiffness" => Some(VariedField::ManipStiffness),
            "b_ri" | "ManipDamping" => Some(VariedField::ManipDamping),
            _ => None,
        }
    }

    pub fn apply(&self, base: &Sim1dParams, value: f64) -> Sim1dParams {
        let mut p = *base;
        match self {
            VariedField::MassRatio => p.m_t = base.m_ri / value,
            VariedField::ManipStiffness => p.k_ri = value,
            VariedField::ManipDamping => p.b_ri = value,
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: Sim1dParams,
    pub varied_field: VariedField,
    pub values: Vec<f64>,
    pub duration: f64,
    pub dt: f64,
    pub v_approach: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.values.is_empty() {
            return Err(SimError::param("values", "must not be empty"));
        }
        let increasing = self.values.windows(2).all(|w| w[1] > w[0]);
        let decreasing = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(SimError::param("values", "must be strictly monotone"));
        }
        if self.varied_field == VariedField::MassRatio && self.values.iter().any(|&v| !(v > 0.0)) {
            return Err(SimError::param("values", "mass ratios must be > 0"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::param("dt", "must be > 0"));
        }
        if !(self.duration >= 10.0 * self.dt) {
            return Err(SimError::param("duration", "must be at least 10 dt"));
        }
        for &v in &self.values {
            self.varied_field.apply(&self.base, v).validate()?;
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Parameters used for one entry of `values`; the arm reference moves at
    /// the approach speed.
    pub fn params_for(&self, value: f64) -> Sim1dParams {
        let mut p = self.varied_field.apply(&self.base, value);
        p.v_cmd = self.v_approach;
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTrace {
    pub value: f64,
    pub params: Sim1dParams,
    pub dt: f64,
    pub states: Vec<Sim1dState>,
    pub forces: Vec<f64>,
}

impl SweepTrace {
    pub fn peak_force(&self) -> f64 {
        self.forces
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_force(&self) -> f64 {
        self.forces.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn breaks(&self) -> Vec<(f64, f64)> {
        detect_contact_breaks(&self.forces, self.dt)
    }

    pub fn log_decrement(&self) -> Option<f64> {
        log_decrement(&self.forces)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,x_i,v_i,x_t,v_t,F_c")?;
        for (s, f) in self.states.iter().zip(&self.forces) {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                sci(s.t),
                sci(s.x_i),
                sci(s.v_i),
                sci(s.x_t),
                sci(s.v_t),
                sci(*f)
            )?;
        }
        Ok(())
    }
}

fn run_one(spec: &SweepSpec, value: f64) -> Result<SweepTrace> {
    let params = spec.params_for(value);
    let states = simulate(
        Sim1dState::initial_contact(spec.v_approach),
        &params,
        spec.dt,
        spec.n_steps(),
    )
    .map_err(|e| SimError::SweepDivergence {
        value,
        source: Box::new(e),
    })?;
    let forces = states.iter().map(|s| s.contact_force(&params)).collect();
    Ok(SweepTrace {
        value,
        params,
        dt: spec.dt,
        states,
        forces,
    })
}

/// Runs every value of the sweep; output order follows `spec.values`.
/// `threads == 0` runs sequentially.
pub fn run_sweep(spec: &SweepSpec, threads: usize) -> Result<Vec<SweepTrace>> {
    spec.validate()?;
    ordered_map(&spec.values, threads, |&v| run_one(spec, v))
        .into_iter()
        .collect()
}

/// Maximal runs of negative force, as `[t_first, t_last]` sample times.
pub fn detect_contact_breaks(forces: &[f64], dt: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &f) in forces.iter().enumerate() {
        match (f < 0.0, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s as f64 * dt, (i - 1) as f64 * dt));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s as f64 * dt, (forces.len() - 1) as f64 * dt));
    }
    out
}

/// Positive local maxima of a force trace. The first sample counts as a peak
/// when the trace starts out decreasing.
pub fn positive_peaks(forces: &[f64]) -> Vec<(usize, f64)> {
    let mut peaks = Vec::new();
    if forces.len() >= 2 && forces[0] > forces[1] && forces[0] > 0.0 {
        peaks.push((0, forces[0]));
    }
    for i in 1..forces.len().saturating_sub(1) {
        let f = forces[i];
        if f > 0.0 && f > forces[i - 1] && f >= forces[i + 1] {
            peaks.push((i, f));
        }
    }
    peaks
}

/// `ln(P1 / P2)` over the first two positive peaks; `None` when the trace
/// has no second positive peak (no measurable oscillation).
pub fn log_decrement(forces: &[f64]) -> Option<f64> {
    let peaks = positive_peaks(forces);
    match peaks.as_slice() {
        [(_, p1), (_, p2), ..] => Some((p1 / p2).ln()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_pair() -> Sim1dParams {
        Sim1dParams {
            b_ri: 0.0,
            k_ri: 0.0,
            ..Sim1dParams::table_sim2()
        }
    }

    #[test]
    fn contact_force_examples() {
        assert_eq!(contact_force_1d(0.0, 0.0, 250.0, 20.0), 0.0);
        assert!((contact_force_1d(-0.01, 0.0, 250.0, 20.0) - 2.5).abs() < 1e-12);
        assert!((contact_force_1d(0.0, -0.5, 250.0, 20.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_has_zero_rate() {
        let p = Sim1dParams {
            v_cmd: 0.0,
            ..Sim1dParams::table_sim2()
        };
        let r = derivatives_1d(&Sim1dState::default(), &p);
        assert_eq!((r.v_i, r.a_i, r.v_t, r.a_t), (0.0, 0.0, 0.0, 0.0));

        let s = step_1dof(&Sim1dState::default(), &p, 1e-3).unwrap();
        assert_eq!(
            s,
            Sim1dState {
                t: 1e-3,
                ..Default::default()
            }
        );
    }

    #[test]
    fn initial_target_acceleration() {
        let p = free_pair();
        let s = Sim1dState::initial_contact(0.5);
        let r = derivatives_1d(&s, &p);
        assert_eq!(r.a_t, contact_force_1d(0.0, -0.5, p.k_c, p.b_c) / p.m_t);
    }

    #[test]
    fn internal_forces_cancel() {
        let p = free_pair();
        let s = Sim1dState {
            x_i: 0.01,
            v_i: 0.3,
            x_t: 0.004,
            v_t: 0.1,
            t: 0.2,
        };
        let r = derivatives_1d(&s, &p);
        assert!((p.m_ri * r.a_i + p.m_t * r.a_t).abs() < 1e-12);
    }

    #[test]
    fn friction_holds_target_at_rest() {
        let p = Sim1dParams {
            f_f: 5.0,
            ..free_pair()
        };
        // F_c = 2.5 N, below the friction bound
        let s = Sim1dState {
            x_i: 0.01,
            ..Default::default()
        };
        assert_eq!(derivatives_1d(&s, &p).a_t, 0.0);
        // moving target: friction opposes the motion
        let s = Sim1dState {
            v_t: -0.1,
            v_i: -0.1,
            ..s
        };
        let a = derivatives_1d(&s, &p).a_t;
        assert!((a - (2.5 + 5.0) / p.m_t).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_params_and_dt() {
        assert!(Sim1dParams::new(0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.5).is_err());
        assert!(Sim1dParams::new(1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.5).is_err());
        let p = Sim1dParams::table_sim2();
        assert!(step_1dof(&Sim1dState::default(), &p, 0.0).is_err());
    }

    #[test]
    fn divergence_is_signalled() {
        let s = Sim1dState {
            x_i: 2e6,
            ..Default::default()
        };
        let err = step_1dof(&s, &Sim1dParams::table_sim2(), 1e-3).unwrap_err();
        assert!(err.is_divergence());
    }

    #[test]
    fn break_intervals() {
        assert!(detect_contact_breaks(&[1.0, 2.0, 0.5], 0.01).is_empty());
        let b = detect_contact_breaks(&[1.0, -1.0, -1.0, 2.0], 0.01);
        assert_eq!(b, vec![(0.01, 0.02)]);
        let b = detect_contact_breaks(&[-1.0, 1.0, -1.0], 0.5);
        assert_eq!(b, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn log_decrement_of_sampled_decay() {
        // sine with envelope exp(-0.5 t), period 1 s: delta = 0.5
        let dt = 1e-3;
        let f: Vec<f64> = (0..5000)
            .map(|i| {
                let t = i as f64 * dt;
                (-0.5 * t).exp() * (2.0 * std::f64::consts::PI * t).sin()
            })
            .collect();
        let d = log_decrement(&f).unwrap();
        assert!((d - 0.5).abs() < 1e-3, "{d}");
        assert_eq!(log_decrement(&[3.0, 2.0, 1.0]), None);
    }

    #[test]
    fn sweep_spec_validation() {
        let mut spec = SweepSpec {
            base: Sim1dParams::table_sim2(),
            varied_field: VariedField::ManipStiffness,
            values: vec![0.0, 500.0, 2000.0],
            duration: 1.0,
            dt: 1e-3,
            v_approach: 0.5,
        };
        assert!(spec.validate().is_ok());
        spec.values = vec![];
        assert!(matches!(
            spec.validate(),
            Err(SimError::InvalidParam {
                field: "values",
                ..
            })
        ));
        spec.values = vec![1.0, 1.0];
        assert!(spec.validate().is_err());
        spec.values = vec![3.0, 2.0];
        spec.duration = 5e-3;
        assert!(matches!(
            spec.validate(),
            Err(SimError::InvalidParam {
                field: "duration",
                ..
            })
        ));
    }

    #[test]
    fn single_value_sweep_matches_direct_run() {
        let spec = SweepSpec {
            base: Sim1dParams::table_sim3(),
            varied_field: VariedField::ManipDamping,
            values: vec![100.0],
            duration: 0.5,
            dt: 1e-3,
            v_approach: 0.5,
        };
        let traces = run_sweep(&spec, 0).unwrap();
        let direct = simulate(
            Sim1dState::initial_contact(0.5),
            &spec.params_for(100.0),
            1e-3,
            500,
        )
        .unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].states, direct);
    }
}

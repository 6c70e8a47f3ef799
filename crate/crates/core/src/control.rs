//! Impedance chase, force PI with apparent inertia reduction, operational
//! space decoupling and contact-triggered mode switching.
//!
//! All diagonal gains use the `(z, y, x)` wrench layout. The controller
//! works in the tool frame; [`controller_step`] returns a world-frame
//! actuator wrench.
//!
//! Sign conventions: the measured wrench is the contact wrench acting on the
//! end-effector, so pressing on the target reads as `f_z > 0`. The force PI
//! output is a pressing magnitude; it is applied along the tool's approach
//! direction, tool -Z.

use crate::error::{Result, SimError};
use crate::types::{
    rotate_wrench, wrench_project, DiagonalSelector, PlanarPose, PlanarTwist, PlanarWrench,
};

fn check_nonneg(field: &'static str, vals: &[f64]) -> Result<()> {
    if vals.iter().all(|v| v.is_finite() && *v >= 0.0) {
        Ok(())
    } else {
        Err(SimError::param(
            field,
            format!("entries must be >= 0, got {vals:?}"),
        ))
    }
}

fn check_pos(field: &'static str, vals: &[f64]) -> Result<()> {
    if vals.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(())
    } else {
        Err(SimError::param(
            field,
            format!("entries must be > 0, got {vals:?}"),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpedanceGains {
    pub k_e: [f64; 3],
    pub b_e: [f64; 3],
}

impl Default for ImpedanceGains {
    fn default() -> Self {
        Self {
            k_e: [500.0, 0.0, 0.0],
            b_e: [1.0, 1.0, 1.0],
        }
    }
}

impl ImpedanceGains {
    pub fn validate(&self) -> Result<()> {
        check_nonneg("k_e", &self.k_e)?;
        check_nonneg("b_e", &self.b_e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceControllerGains {
    pub k_zp: f64,
    pub k_zi: f64,
    pub f_z_ref: f64,
    pub integral_limit: f64,
}

impl Default for ForceControllerGains {
    fn default() -> Self {
        Self {
            k_zp: 1.0,
            k_zi: 0.07,
            f_z_ref: 0.8,
            integral_limit: 10.0,
        }
    }
}

impl ForceControllerGains {
    pub fn validate(&self) -> Result<()> {
        check_nonneg("k_zp", &[self.k_zp])?;
        check_nonneg("k_zi", &[self.k_zi])?;
        check_pos("integral_limit", &[self.integral_limit])?;
        if !self.f_z_ref.is_finite() {
            return Err(SimError::param("f_z_ref", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InertiaReductionGains {
    pub k_yp: f64,
    pub k_xp: f64,
}

impl InertiaReductionGains {
    pub fn validate(&self) -> Result<()> {
        check_nonneg("k_yp", &[self.k_yp])?;
        check_nonneg("k_xp", &[self.k_xp])
    }

    pub fn is_zero(&self) -> bool {
        self.k_yp == 0.0 && self.k_xp == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecouplingModel {
    pub m_hat: [f64; 3],
    pub m_d: [f64; 3],
    /// Estimated bias wrench (Coriolis and gravity); zero for the planar plant.
    pub bias: PlanarWrench,
    pub compensation_enabled: bool,
    /// Axes on which the measured contact wrench is fed forward.
    pub compensated_axes: DiagonalSelector,
}

impl DecouplingModel {
    pub fn identity(m_hat: [f64; 3]) -> Self {
        Self {
            m_hat,
            m_d: m_hat,
            bias: PlanarWrench::ZERO,
            compensation_enabled: false,
            compensated_axes: DiagonalSelector::from_bools([true; 3]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_pos("m_hat", &self.m_hat)?;
        check_pos("m_d", &self.m_d)?;
        if !self.bias.is_finite() {
            return Err(SimError::param("bias", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeThresholds {
    pub force: f64,
    pub torque: f64,
    pub enter_ticks: u32,
    pub exit_ticks: u32,
}

impl Default for ModeThresholds {
    fn default() -> Self {
        Self {
            force: 0.1,
            torque: 0.01,
            enter_ticks: 2,
            exit_ticks: 10,
        }
    }
}

impl ModeThresholds {
    pub fn validate(&self) -> Result<()> {
        check_pos("threshold", &[self.force, self.torque])?;
        if self.enter_ticks == 0 || self.exit_ticks == 0 {
            return Err(SimError::param(
                "ticks",
                "hysteresis tick counts must be >= 1",
            ));
        }
        Ok(())
    }

    pub fn in_contact(&self, w: &PlanarWrench) -> bool {
        w.f_z.abs() > self.force || w.f_y.abs() > self.force || w.tau_x.abs() > self.torque
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub impedance: ImpedanceGains,
    pub force: ForceControllerGains,
    pub reduction: InertiaReductionGains,
    /// Force-controlled subspace `W`; the reduction acts on its complement.
    pub selector: DiagonalSelector,
    pub decoupling: DecouplingModel,
    pub thresholds: ModeThresholds,
    /// Speed of the straight-line chase setpoint along world -Z.
    pub chase_speed: f64,
    /// When false the impedance law is used throughout.
    pub force_control: bool,
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        self.impedance.validate()?;
        self.force.validate()?;
        self.reduction.validate()?;
        self.decoupling.validate()?;
        self.thresholds.validate()?;
        if !self.chase_speed.is_finite() {
            return Err(SimError::param("chase_speed", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerMode {
    FreeSpaceImpedance,
    ContactForceControl,
}

impl ControllerMode {
    pub fn code(&self) -> u8 {
        match self {
            ControllerMode::FreeSpaceImpedance => 0,
            ControllerMode::ContactForceControl => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub mode: ControllerMode,
    pub ticks_above: u32,
    pub ticks_below: u32,
    pub integral: f64,
    /// Start of the current straight-line chase and the time it began.
    pub line_start: PlanarPose,
    pub line_t0: f64,
    pub tick: u64,
}

impl ControllerState {
    pub fn new(start: PlanarPose) -> Self {
        Self {
            mode: ControllerMode::FreeSpaceImpedance,
            ticks_above: 0,
            ticks_below: 0,
            integral: 0.0,
            line_start: start,
            line_t0: 0.0,
            tick: 0,
        }
    }

    pub fn setpoint(&self, t: f64, chase_speed: f64) -> PlanarPose {
        let s = self.line_start;
        PlanarPose::new(s.y, s.z - chase_speed * (t - self.line_t0), s.theta())
    }
}

/// `K_e (x_setpoint - x_current) - B_e xdot`, world frame.
pub fn impedance_cmd(
    x_current: &PlanarPose,
    x_setpoint: &PlanarPose,
    xdot: &PlanarTwist,
    gains: &ImpedanceGains,
) -> PlanarWrench {
    let e = x_setpoint.error_from(x_current);
    let v = [xdot.v_z, xdot.v_y, xdot.omega_x];
    let k = gains.k_e;
    let b = gains.b_e;
    PlanarWrench::new(
        k[0] * e[0] - b[0] * v[0],
        k[1] * e[1] - b[1] * v[1],
        k[2] * e[2] - b[2] * v[2],
    )
}

/// Returns `(command, integral')` with anti-windup clamping.
pub fn force_pi_cmd(
    f_z_meas: f64,
    gains: &ForceControllerGains,
    integral: f64,
    dt: f64,
) -> (f64, f64) {
    let e = f_z_meas - gains.f_z_ref;
    let lim = gains.integral_limit;
    let i = (integral + e * dt).clamp(-lim, lim);
    (-(gains.k_zp * e + gains.k_zi * i), i)
}

/// Positive feedback of the measured wrench on the Y and X axes.
pub fn inertia_reduction_cmd(w_meas: &PlanarWrench, gains: &InertiaReductionGains) -> PlanarWrench {
    PlanarWrench::new(0.0, gains.k_yp * w_meas.f_y, gains.k_xp * w_meas.tau_x)
}

pub fn compose_control(
    force_part: PlanarWrench,
    inertia_part: PlanarWrench,
    w: DiagonalSelector,
    i_minus_w: DiagonalSelector,
) -> Result<PlanarWrench> {
    if !w.is_complement_of(&i_minus_w) {
        return Err(SimError::NonComplementarySelectors);
    }
    Ok(wrench_project(force_part, w) + wrench_project(inertia_part, i_minus_w))
}

/// `F = M_hat M_d^-1 F* + bias - w_meas` on the compensated axes; the
/// measured wrench is the reaction on the end-effector, hence the minus.
/// Without compensation `F*` passes through unchanged.
pub fn decouple_cmd(
    f_star: PlanarWrench,
    model: &DecouplingModel,
    w_meas: &PlanarWrench,
) -> PlanarWrench {
    if !model.compensation_enabled {
        return f_star;
    }
    let ratio = [
        model.m_hat[0] / model.m_d[0],
        model.m_hat[1] / model.m_d[1],
        model.m_hat[2] / model.m_d[2],
    ];
    f_star.scale(ratio) + model.bias - wrench_project(*w_meas, model.compensated_axes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Actuator wrench in the world frame, torque about the end-effector origin.
    pub wrench: PlanarWrench,
    /// The same command in the tool frame.
    pub tool_wrench: PlanarWrench,
    /// `F*` in contact mode; zero otherwise.
    pub f_star: PlanarWrench,
}

/// One control tick: mode update, then the law of the resulting mode.
pub fn controller_step(
    state: &ControllerState,
    w_meas: &PlanarWrench,
    pose: &PlanarPose,
    twist: &PlanarTwist,
    config: &ControllerConfig,
    dt: f64,
) -> (ControlOutput, ControllerState) {
    let mut s = *state;
    let t = s.tick as f64 * dt;
    let th = &config.thresholds;
    let entering = if config.thresholds.in_contact(w_meas) {
        s.ticks_above += 1;
        s.ticks_below = 0;
        config.force_control
            && s.mode == ControllerMode::FreeSpaceImpedance
            && s.ticks_above >= th.enter_ticks
    } else {
        s.ticks_below += 1;
        s.ticks_above = 0;
        if s.mode == ControllerMode::ContactForceControl && s.ticks_below >= th.exit_ticks {
            s.mode = ControllerMode::FreeSpaceImpedance;
            s.line_start = *pose;
            s.line_t0 = t;
        }
        false
    };
    if entering {
        s.mode = ControllerMode::ContactForceControl;
        s.integral = 0.0;
    }

    let out = match s.mode {
        ControllerMode::FreeSpaceImpedance => {
            let sp = s.setpoint(t, config.chase_speed);
            let w = impedance_cmd(pose, &sp, twist, &config.impedance);
            ControlOutput {
                wrench: w,
                tool_wrench: rotate_wrench(w, -pose.theta()),
                f_star: PlanarWrench::ZERO,
            }
        }
        ControllerMode::ContactForceControl => {
            let push = if entering {
                -config.force.k_zp * (w_meas.f_z - config.force.f_z_ref)
            } else {
                let (cmd, i) = force_pi_cmd(w_meas.f_z, &config.force, s.integral, dt);
                s.integral = i;
                cmd
            };
            let force_part = PlanarWrench::new(-push, 0.0, 0.0);
            let reduction = inertia_reduction_cmd(w_meas, &config.reduction);
            let w = config.selector;
            let f_star = compose_control(force_part, reduction, w, w.complement())
                .expect("selector and its complement");
            let tool = decouple_cmd(f_star, &config.decoupling, w_meas);
            ControlOutput {
                wrench: rotate_wrench(tool, pose.theta()),
                tool_wrench: tool,
                f_star,
            }
        }
    };
    s.tick += 1;
    (out, s)
}

//! The planar chase / contact / alignment experiment.
//!
//! The end-effector starts above the free-floating target, laterally offset
//! from the groove axis, and follows a straight line along -Z under
//! impedance control. Force-controlled methods switch to the force PI (with
//! or without inertia reduction) once contact is detected.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::control::{
    controller_step, ControllerConfig, ControllerMode, ControllerState, DecouplingModel,
    ForceControllerGains, ImpedanceGains, InertiaReductionGains, ModeThresholds,
};
use crate::error::{Result, SimError};
use crate::fmt::sci;
use crate::parallel::ordered_map;
use crate::plant2d::{
    step_plant, BodyKind, ContactParams, FunnelGeometry, PlanarBody, Plant, WrenchSensor,
};
use crate::types::{normalize_angle, DiagonalSelector, PlanarPose, PlanarTwist, PlanarWrench};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Force PI plus apparent inertia reduction.
    ForceWithInertiaReduction,
    /// Force PI only.
    ForceOnly,
    /// Impedance law throughout.
    ImpedanceOnly,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::ForceWithInertiaReduction => "ForceWithInertiaReduction",
            Method::ForceOnly => "ForceOnly",
            Method::ImpedanceOnly => "ImpedanceOnly",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ForceWithInertiaReduction" | "I" | "1" => Some(Method::ForceWithInertiaReduction),
            "ForceOnly" | "II" | "2" => Some(Method::ForceOnly),
            "ImpedanceOnly" | "III" | "3" => Some(Method::ImpedanceOnly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    pub ee_mass: f64,
    pub ee_inertia: f64,
    pub target_mass: f64,
    pub target_inertia: f64,
    pub ee_geom: FunnelGeometry,
    pub target_geom: FunnelGeometry,
    pub contact: ContactParams,
    pub mu_airbed: f64,
    pub groove_offset: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            ee_mass: 2.0,
            ee_inertia: 1.0,
            target_mass: 12.0,
            target_inertia: 0.125,
            ee_geom: FunnelGeometry {
                depth: 0.1,
                ..FunnelGeometry::default()
            },
            target_geom: FunnelGeometry::default(),
            contact: ContactParams::default(),
            mu_airbed: 0.0,
            groove_offset: 0.0,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ee_mass", self.ee_mass),
            ("ee_inertia", self.ee_inertia),
            ("target_mass", self.target_mass),
            ("target_inertia", self.target_inertia),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::param(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.mu_airbed.is_finite() && self.mu_airbed >= 0.0) {
            return Err(SimError::param("mu_airbed", "must be >= 0"));
        }
        if !self.groove_offset.is_finite() {
            return Err(SimError::param("groove_offset", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorParams {
    pub noise_std: f64,
    pub latency: bool,
    pub seed: u64,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            noise_std: 0.0,
            latency: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub label: String,
    pub method: Method,
    pub controller: ControllerConfig,
    pub plant: PlantParams,
    pub sensor: SensorParams,
    /// Lateral offset of the tip from the groove axis at start [m].
    pub initial_offset: f64,
    /// Vertical clearance between tip and the near wall at start [m].
    pub initial_distance: f64,
    pub duration: f64,
    pub control_period: f64,
    pub substeps: u32,
    pub tol_lateral: f64,
    pub tol_angle: f64,
    /// Alignment must hold continuously for this long to count [s].
    pub align_dwell: f64,
}

pub fn default_controller(method: Method) -> ControllerConfig {
    let (m, i) = (
        PlantParams::default().ee_mass,
        PlantParams::default().ee_inertia,
    );
    ControllerConfig {
        impedance: ImpedanceGains::default(),
        force: ForceControllerGains::default(),
        reduction: match method {
            Method::ForceWithInertiaReduction => InertiaReductionGains {
                k_yp: 0.2,
                k_xp: 0.5,
            },
            _ => InertiaReductionGains::default(),
        },
        selector: DiagonalSelector::force_axis(),
        decoupling: DecouplingModel {
            m_hat: [m, m, i],
            m_d: [m / 4.0, m, i],
            bias: PlanarWrench::ZERO,
            compensation_enabled: true,
            compensated_axes: DiagonalSelector::force_axis(),
        },
        thresholds: ModeThresholds::default(),
        chase_speed: 0.05,
        force_control: method != Method::ImpedanceOnly,
    }
}

impl ScenarioConfig {
    pub fn new(method: Method) -> Self {
        Self {
            label: method.name().to_string(),
            method,
            controller: default_controller(method),
            plant: PlantParams::default(),
            sensor: SensorParams::default(),
            initial_offset: 0.02,
            initial_distance: 0.05,
            duration: 4.0,
            control_period: 0.005,
            substeps: 5,
            tol_lateral: 1e-3,
            tol_angle: 0.02,
            align_dwell: 0.0,
        }
    }

    pub fn with_force_ref(mut self, f: f64) -> Self {
        self.controller.force.f_z_ref = f;
        self
    }

    pub fn with_reduction(mut self, k_xp: f64, k_yp: f64) -> Self {
        self.controller.reduction = InertiaReductionGains { k_yp, k_xp };
        self
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    /// The four compared configurations: Method I with rotational and
    /// translational reduction, Method I with translational reduction only,
    /// Method II and Method III.
    pub fn comparison_set() -> Vec<ScenarioConfig> {
        vec![
            ScenarioConfig::new(Method::ForceWithInertiaReduction)
                .with_force_ref(0.8)
                .with_reduction(0.5, 0.2)
                .with_label("method1_case1"),
            ScenarioConfig::new(Method::ForceWithInertiaReduction)
                .with_force_ref(0.8)
                .with_reduction(0.0, 1.0)
                .with_label("method1_case2"),
            ScenarioConfig::new(Method::ForceOnly)
                .with_force_ref(1.5)
                .with_label("method2"),
            ScenarioConfig::new(Method::ImpedanceOnly).with_label("method3"),
        ]
    }

    pub fn n_ticks(&self) -> usize {
        (self.duration / self.control_period).round() as usize
    }

    pub fn physics_dt(&self) -> f64 {
        self.control_period / self.substeps as f64
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.controller.validate()?;
        if !(self.control_period > 0.0 && self.control_period.is_finite()) {
            return Err(SimError::param("control_period", "must be > 0"));
        }
        if self.substeps == 0 {
            return Err(SimError::param("substeps", "must be >= 1"));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(SimError::param("duration", "must be >= 0"));
        }
        let n = self.duration / self.control_period;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(SimError::param(
                "duration",
                "must be a whole number of control periods",
            ));
        }
        if !(self.tol_lateral > 0.0 && self.tol_angle > 0.0) {
            return Err(SimError::param(
                "tolerance",
                "alignment tolerances must be > 0",
            ));
        }
        if !(self.align_dwell >= 0.0 && self.align_dwell.is_finite()) {
            return Err(SimError::param("align_dwell", "must be >= 0"));
        }
        if !(self.initial_distance >= 0.0 && self.initial_distance.is_finite()) {
            return Err(SimError::param("initial_distance", "must be >= 0"));
        }
        let g = &self.plant.target_geom;
        if !(self.initial_offset.abs() < g.mouth_half_width) {
            return Err(SimError::param(
                "initial_offset",
                "tip must start above the groove mouth",
            ));
        }
        if self.sensor.noise_std < 0.0 || !self.sensor.noise_std.is_finite() {
            return Err(SimError::param("noise_std", "must be >= 0"));
        }
        match self.method {
            Method::ForceOnly if !self.controller.reduction.is_zero() => {
                return Err(SimError::param(
                    "k_xp",
                    "ForceOnly requires k_xp = k_yp = 0",
                ))
            }
            Method::ImpedanceOnly if self.controller.force_control => {
                return Err(SimError::param(
                    "force_control",
                    "ImpedanceOnly never switches to force control",
                ))
            }
            Method::ForceOnly | Method::ForceWithInertiaReduction
                if !self.controller.force_control =>
            {
                return Err(SimError::param(
                    "force_control",
                    "force-controlled methods must enable force control",
                ))
            }
            _ => {}
        }
        self.initial_plant()?.validate()
    }

    /// Target at the origin, tip offset laterally by `initial_offset` and
    /// lifted `initial_distance` above first contact with the near wall.
    pub fn initial_plant(&self) -> Result<Plant> {
        let p = &self.plant;
        let g = &p.target_geom;
        let (sa, _) = g.half_angle.sin_cos();
        let wall =
            p.groove_offset + g.apex_height() + self.initial_offset.abs() / g.half_angle.tan();
        let tip_z = wall + p.ee_geom.tip_radius / sa + self.initial_distance;
        let ee_pose = PlanarPose::new(self.initial_offset, tip_z + p.ee_geom.depth, 0.0);
        Ok(Plant {
            ee: PlanarBody::new(p.ee_mass, p.ee_inertia, ee_pose, BodyKind::Actuated)?,
            target: PlanarBody::new(
                p.target_mass,
                p.target_inertia,
                PlanarPose::default(),
                BodyKind::FreeFloating,
            )?,
            ee_geom: p.ee_geom,
            target_geom: p.target_geom,
            contact: p.contact,
            mu_airbed: p.mu_airbed,
            groove_offset: p.groove_offset,
            t: 0.0,
            step: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub tick: u64,
    pub t: f64,
    pub mode: ControllerMode,
    pub ee_pose: PlanarPose,
    pub ee_twist: PlanarTwist,
    pub target_pose: PlanarPose,
    pub target_twist: PlanarTwist,
    pub measured: PlanarWrench,
    /// Actuator command in the tool frame.
    pub command: PlanarWrench,
    pub n_contacts: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
}

pub const TRACE_HEADER: &str = "tick,t,mode,ee_y,ee_z,ee_th,t_y,t_z,t_th,fz_meas,fy_meas,tx_meas,fz_cmd,fy_cmd,tx_cmd,n_contacts";

impl RunTrace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.tick,
                sci(r.t),
                r.mode.code(),
                sci(r.ee_pose.y),
                sci(r.ee_pose.z),
                sci(r.ee_pose.theta()),
                sci(r.target_pose.y),
                sci(r.target_pose.z),
                sci(r.target_pose.theta()),
                sci(r.measured.f_z),
                sci(r.measured.f_y),
                sci(r.measured.tau_x),
                sci(r.command.f_z),
                sci(r.command.f_y),
                sci(r.command.tau_x),
                r.n_contacts
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub contact_break_count: u32,
    pub first_contact_time: Option<f64>,
    pub alignment_time: Option<f64>,
    pub peak_abs_fz: f64,
    /// Mean measured `f_z` over the final 30% of the contact phase.
    pub steady_mean_fz: Option<f64>,
    /// Mean `|f_z - f_z_ref|` over the same window.
    pub steady_abs_error: Option<f64>,
    /// Half the peak-to-peak `f_z` over the same window.
    pub ripple: Option<f64>,
    /// Largest target speed after first contact.
    pub max_target_speed: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_else(|| "none".into())
}

impl RunMetrics {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "contact_break_count={}", self.contact_break_count);
        let _ = writeln!(s, "first_contact_time={}", opt(self.first_contact_time));
        let _ = writeln!(s, "alignment_time={}", opt(self.alignment_time));
        let _ = writeln!(s, "peak_abs_fz={}", sci(self.peak_abs_fz));
        let _ = writeln!(s, "steady_mean_fz={}", opt(self.steady_mean_fz));
        let _ = writeln!(s, "steady_abs_error={}", opt(self.steady_abs_error));
        let _ = writeln!(s, "ripple={}", opt(self.ripple));
        let _ = writeln!(s, "max_target_speed={}", sci(self.max_target_speed));
        s
    }

    pub fn aligned(&self) -> bool {
        self.alignment_time.is_some()
    }
}

/// Tip on the groove axis within `tol_lateral` and funnels parallel within
/// `tol_angle`; both bounds inclusive.
pub fn alignment_check(
    ee_pose: &PlanarPose,
    target_pose: &PlanarPose,
    ee_geom: &FunnelGeometry,
    tol_lateral: f64,
    tol_angle: f64,
) -> bool {
    let tip = crate::plant2d::tip_position(ee_pose, ee_geom);
    let local = target_pose.inverse_transform_point(tip);
    // the groove axis is the target's local z axis, whatever its offset
    let rel = normalize_angle(ee_pose.theta() - target_pose.theta());
    local[0].abs() <= tol_lateral && rel.abs() <= tol_angle
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: RunTrace,
    pub metrics: RunMetrics,
}

/// An end-effector farther than this from the target [m] has been thrown
/// off by the controller; the run is reported as diverged.
pub const WORKSPACE_RADIUS: f64 = 1.0;

pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut plant = config.initial_plant()?;
    let mut sensor = WrenchSensor::new(
        config.sensor.noise_std,
        config.sensor.latency,
        config.sensor.seed,
    )?;
    let mut ctrl = ControllerState::new(plant.ee.pose);
    let n_ticks = config.n_ticks();
    let period = config.control_period;
    let dt = config.physics_dt();
    let f_ref = config.controller.force.f_z_ref;

    let mut trace = RunTrace {
        records: Vec::with_capacity(n_ticks),
    };
    let mut metrics = RunMetrics::default();
    let mut was_touching = false;
    let mut aligned_since: Option<f64> = None;
    let mut forces = plant.forces()?;

    for tick in 0..n_ticks as u64 {
        let t = tick as f64 * period;
        let truth = plant.tool_frame_contact_wrench(&forces);
        let measured = sensor.sample(truth);
        let (out, next) = controller_step(
            &ctrl,
            &measured,
            &plant.ee.pose,
            &plant.ee.twist,
            &config.controller,
            period,
        );
        ctrl = next;
        let n_contacts = forces.contacts.len();
        trace.records.push(TraceRecord {
            tick,
            t,
            mode: ctrl.mode,
            ee_pose: plant.ee.pose,
            ee_twist: plant.ee.twist,
            target_pose: plant.target.pose,
            target_twist: plant.target.twist,
            measured,
            command: out.tool_wrench,
            n_contacts,
        });
        if metrics.first_contact_time.is_some() && metrics.alignment_time.is_none() {
            let ok = n_contacts > 0
                && alignment_check(
                    &plant.ee.pose,
                    &plant.target.pose,
                    &plant.ee_geom,
                    config.tol_lateral,
                    config.tol_angle,
                );
            aligned_since = if ok { aligned_since.or(Some(t)) } else { None };
            if let Some(t0) = aligned_since {
                if t - t0 >= config.align_dwell - 1e-12 {
                    metrics.alignment_time = Some(t0);
                }
            }
        }

        for _ in 0..config.substeps {
            let f = step_plant(&mut plant, out.wrench, dt).map_err(|e| match e {
                SimError::Divergence { detail, .. } => SimError::Divergence {
                    step: tick,
                    t,
                    detail: format!("{detail}; last record {:?}", trace.records.last()),
                },
                other => other,
            })?;
            let touching = !f.contacts.is_empty();
            if touching && metrics.first_contact_time.is_none() {
                metrics.first_contact_time = Some(plant.t - dt);
            } else if touching && !was_touching {
                metrics.contact_break_count += 1;
            }
            was_touching = touching;
            if metrics.first_contact_time.is_some() {
                let v = plant.target.twist;
                metrics.max_target_speed = metrics.max_target_speed.max(v.v_y.hypot(v.v_z));
            }
        }
        let sep = [
            plant.ee.pose.y - plant.target.pose.y,
            plant.ee.pose.z - plant.target.pose.z,
        ];
        if sep[0].hypot(sep[1]) > WORKSPACE_RADIUS {
            return Err(SimError::Divergence {
                step: tick,
                t: plant.t,
                detail: format!("end-effector left the workspace: {sep:?} from the target"),
            });
        }
        forces = plant.forces()?;
    }

    metrics.peak_abs_fz = trace
        .records
        .iter()
        .map(|r| r.measured.f_z.abs())
        .fold(0.0, f64::max);
    if let Some(t0) = metrics.first_contact_time {
        let contact: Vec<&TraceRecord> = trace.records.iter().filter(|r| r.t >= t0).collect();
        let start = contact.len() - (contact.len() * 3) / 10;
        let window = &contact[start..];
        if !window.is_empty() {
            let n = window.len() as f64;
            let mean = window.iter().map(|r| r.measured.f_z).sum::<f64>() / n;
            let err = window
                .iter()
                .map(|r| (r.measured.f_z - f_ref).abs())
                .sum::<f64>()
                / n;
            let (lo, hi) = window
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r.measured.f_z), hi.max(r.measured.f_z))
                });
            metrics.steady_mean_fz = Some(mean);
            metrics.steady_abs_error = Some(err);
            metrics.ripple = Some(0.5 * (hi - lo));
        }
    }
    Ok(RunOutput { trace, metrics })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdProbe {
    pub f_z_ref: f64,
    pub aligned: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    /// Bisection probes in evaluation order (endpoint checks excluded).
    pub probes: Vec<ThresholdProbe>,
    /// Largest failing and smallest succeeding reference force.
    pub bracket: (f64, f64),
}

impl ThresholdResult {
    pub fn log(&self) -> String {
        let mut s = String::from("step,f_z_ref,aligned\n");
        for (i, p) in self.probes.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", i + 1, sci(p.f_z_ref), p.aligned as u8);
        }
        let _ = writeln!(s, "bracket_lo={}", sci(self.bracket.0));
        let _ = writeln!(s, "bracket_hi={}", sci(self.bracket.1));
        s
    }
}

fn aligns(template: &ScenarioConfig, f: f64) -> Result<bool> {
    let cfg = template.clone().with_force_ref(f);
    Ok(run_scenario(&cfg)?.metrics.aligned())
}

/// Bisection on `f_z_ref` for the smallest force that still aligns. At
/// least one bisection probe is always made.
pub fn min_sliding_force_search(
    template: &ScenarioConfig,
    f_lo: f64,
    f_hi: f64,
    resolution: f64,
) -> Result<ThresholdResult> {
    if !(f_lo.is_finite() && f_hi.is_finite() && f_lo < f_hi) {
        return Err(SimError::InvalidBracket(format!(
            "need f_lo < f_hi, got [{f_lo}, {f_hi}]"
        )));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(SimError::InvalidBracket(format!(
            "resolution must be > 0, got {resolution}"
        )));
    }
    if !aligns(template, f_hi)? {
        return Err(SimError::InvalidBracket(format!(
            "no alignment at f_hi = {f_hi}"
        )));
    }
    if aligns(template, f_lo)? {
        return Err(SimError::InvalidBracket(format!(
            "already aligns at f_lo = {f_lo}"
        )));
    }
    let (mut lo, mut hi) = (f_lo, f_hi);
    let mut probes = Vec::new();
    loop {
        let mid = 0.5 * (lo + hi);
        let ok = aligns(template, mid)?;
        probes.push(ThresholdProbe {
            f_z_ref: mid,
            aligned: ok,
        });
        if ok {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= resolution {
            break;
        }
    }
    Ok(ThresholdResult {
        probes,
        bracket: (lo, hi),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub method: Method,
    pub result: Result<RunMetrics>,
}

/// Runs every configuration; failures are reported per row.
pub fn compare_methods(configs: &[ScenarioConfig], threads: usize) -> Result<Vec<ComparisonRow>> {
    if configs.len() < 2 {
        return Err(SimError::param(
            "configs",
            "need at least two configurations",
        ));
    }
    Ok(ordered_map(configs, threads, |c| ComparisonRow {
        label: c.label.clone(),
        method: c.method,
        result: run_scenario(c).map(|o| o.metrics),
    }))
}

pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut s = String::from(
        "label,method,contact_break_count,first_contact_time,alignment_time,peak_abs_fz,steady_mean_fz,steady_abs_error,ripple,error\n",
    );
    for r in rows {
        match &r.result {
            Ok(m) => {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},",
                    r.label,
                    r.method.name(),
                    m.contact_break_count,
                    opt(m.first_contact_time),
                    opt(m.alignment_time),
                    sci(m.peak_abs_fz),
                    opt(m.steady_mean_fz),
                    opt(m.steady_abs_error),
                    opt(m.ripple)
                );
            }
            Err(e) => {
                let _ = writeln!(s, "{},{},,,,,,,,\"{}\"", r.label, r.method.name(), e);
            }
        }
    }
    s
}

//! Planar (Y, Z, theta about X) plant: an actuated end-effector carrying a
//! male funnel tip and a free-floating target carrying a V-groove.
//!
//! World wrenches returned by [`penalty_wrench`] carry their torque about the
//! world origin, so the two bodies' wrenches are exact negatives of each other.
//! [`step_plant`] shifts them to each body's own origin before integrating.
//!
//! Frames: the target groove opens toward its local +Z with its bottom plane
//! at the target origin. The end-effector tip sits at `(0, -depth)` in the
//! end-effector frame, so the tool points along its local -Z.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, SimError};
use crate::types::{rotate_wrench, PlanarPose, PlanarTwist, PlanarWrench};

pub const GRAVITY: f64 = 9.81;
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyKind {
    Actuated,
    FreeFloating,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarBody {
    pub mass: f64,
    pub inertia: f64,
    pub pose: PlanarPose,
    pub twist: PlanarTwist,
    pub kind: BodyKind,
}

impl PlanarBody {
    pub fn new(mass: f64, inertia: f64, pose: PlanarPose, kind: BodyKind) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(SimError::param("mass", format!("must be > 0, got {mass}")));
        }
        if !(inertia.is_finite() && inertia > 0.0) {
            return Err(SimError::param(
                "inertia",
                format!("must be > 0, got {inertia}"),
            ));
        }
        Ok(Self {
            mass,
            inertia,
            pose,
            twist: PlanarTwist::ZERO,
            kind,
        })
    }

    /// World velocity of a world point rigidly attached to this body.
    pub fn point_velocity(&self, p: [f64; 2]) -> [f64; 2] {
        let r = [p[0] - self.pose.y, p[1] - self.pose.z];
        let w = self.twist.omega_x;
        [self.twist.v_y - w * r[1], self.twist.v_z + w * r[0]]
    }

    /// Semi-implicit Euler: velocities from the wrench (about the body
    /// origin), then the pose from the new velocities.
    pub fn advance(&mut self, w: PlanarWrench, dt: f64) {
        let tw = &mut self.twist;
        tw.v_y += w.f_y / self.mass * dt;
        tw.v_z += w.f_z / self.mass * dt;
        tw.omega_x += w.tau_x / self.inertia * dt;
        self.pose.y += tw.v_y * dt;
        self.pose.z += tw.v_z * dt;
        let th = self.pose.theta() + tw.omega_x * dt;
        self.pose.set_theta(th);
    }

    pub fn kinetic_energy(&self) -> f64 {
        let t = &self.twist;
        0.5 * self.mass * (t.v_y * t.v_y + t.v_z * t.v_z)
            + 0.5 * self.inertia * t.omega_x * t.omega_x
    }

    /// Linear momentum `(p_y, p_z)`.
    pub fn momentum(&self) -> [f64; 2] {
        [self.mass * self.twist.v_y, self.mass * self.twist.v_z]
    }
}

/// A V-groove (target) or a male tip (end-effector).
///
/// The groove walls run from the mouth corners `(+-mouth_half_width, depth)`
/// toward the axis at `half_angle` from it and meet at the apex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunnelGeometry {
    pub half_angle: f64,
    pub mouth_half_width: f64,
    pub depth: f64,
    pub tip_radius: f64,
}

impl Default for FunnelGeometry {
    fn default() -> Self {
        Self {
            half_angle: 30f64.to_radians(),
            mouth_half_width: 0.05,
            depth: 0.09,
            tip_radius: 0.015,
        }
    }
}

impl FunnelGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_angle > 0.0 && self.half_angle < std::f64::consts::FRAC_PI_2) {
            return Err(SimError::param("half_angle", "must lie in (0, pi/2)"));
        }
        if !(self.mouth_half_width > 0.0 && self.mouth_half_width.is_finite()) {
            return Err(SimError::param("mouth_half_width", "must be > 0"));
        }
        if !(self.depth > 0.0 && self.depth.is_finite()) {
            return Err(SimError::param("depth", "must be > 0"));
        }
        if !(self.tip_radius >= 0.0 && self.tip_radius.is_finite()) {
            return Err(SimError::param("tip_radius", "must be >= 0"));
        }
        if self.depth * self.half_angle.tan() < self.mouth_half_width * (1.0 - 1e-12) {
            return Err(SimError::param(
                "depth",
                "walls must meet at the apex: depth * tan(half_angle) >= mouth_half_width",
            ));
        }
        Ok(())
    }

    /// Height of the apex above the groove bottom, in the groove frame.
    pub fn apex_height(&self) -> f64 {
        self.depth - self.mouth_half_width / self.half_angle.tan()
    }

    /// Tip centre height above the groove frame origin when a tip of
    /// `radius` rests on both walls.
    pub fn seated_height(&self, radius: f64) -> f64 {
        self.apex_height() + radius / self.half_angle.sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPoint {
    /// World position, on the target wall.
    pub position: [f64; 2],
    /// Unit normal pointing from the target toward the end-effector.
    pub normal: [f64; 2],
    pub depth: f64,
    /// End-effector point velocity minus target point velocity.
    pub rel_velocity: [f64; 2],
}

impl ContactPoint {
    /// Rate of increase of the penetration depth.
    pub fn penetration_rate(&self) -> f64 {
        -(self.rel_velocity[0] * self.normal[0] + self.rel_velocity[1] * self.normal[1])
    }

    /// Unit tangent, normal rotated by +90 degrees.
    pub fn tangent(&self) -> [f64; 2] {
        [-self.normal[1], self.normal[0]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionModel {
    pub mu: f64,
    pub eps_v: f64,
}

impl FrictionModel {
    pub fn new(mu: f64, eps_v: f64) -> Result<Self> {
        let f = Self { mu, eps_v };
        f.validate()?;
        Ok(f)
    }

    pub fn frictionless() -> Self {
        Self {
            mu: 0.0,
            eps_v: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(SimError::param(
                "mu",
                format!("must lie in [0, 1], got {}", self.mu),
            ));
        }
        if !(self.eps_v > 0.0 && self.eps_v.is_finite()) {
            return Err(SimError::param("eps_v", "must be > 0"));
        }
        Ok(())
    }

    /// Tangential force for slip speed `v` under normal load `n >= 0`.
    pub fn force(&self, n: f64, v: f64) -> f64 {
        -self.mu * n * (v / self.eps_v).clamp(-1.0, 1.0)
    }
}

/// World position of the end-effector tip centre; `ee_geom.depth` is the tool
/// length from the end-effector origin.
pub fn tip_position(ee_pose: &PlanarPose, ee_geom: &FunnelGeometry) -> [f64; 2] {
    ee_pose.transform_point([0.0, -ee_geom.depth])
}

/// Geometric contacts between the end-effector tip disk and the two groove
/// walls. Relative velocities are left at zero; see [`Plant::contacts`].
pub fn funnel_contact(
    ee_pose: &PlanarPose,
    target_pose: &PlanarPose,
    ee_geom: &FunnelGeometry,
    target_geom: &FunnelGeometry,
) -> Result<Vec<ContactPoint>> {
    if (ee_pose.y - target_pose.y).abs() < 1e-9 && (ee_pose.z - target_pose.z).abs() < 1e-9 {
        return Err(SimError::DegenerateGeometry(
            "end-effector and target origins coincide".into(),
        ));
    }
    let c = target_pose.inverse_transform_point(tip_position(ee_pose, ee_geom));
    let r = ee_geom.tip_radius;
    let (sa, ca) = target_geom.half_angle.sin_cos();
    let apex = [0.0, target_geom.apex_height()];
    let (st, ct) = target_pose.theta().sin_cos();
    let to_world = |v: [f64; 2]| [ct * v[0] - st * v[1], st * v[0] + ct * v[1]];
    let mut out = Vec::with_capacity(2);
    for side in [-1.0, 1.0] {
        // side -1: left wall (y < 0); inward normal points toward the axis
        let n = [-side * ca, sa];
        let along = [side * sa, ca];
        let len = (target_geom.depth - apex[1]) / ca;
        let rel = [c[0] - apex[0], c[1] - apex[1]];
        let s = rel[0] * along[0] + rel[1] * along[1];
        if s < 0.0 {
            // below the apex: the other wall owns this region
            continue;
        }
        let (q, normal, dist) = if s <= len {
            let signed = rel[0] * n[0] + rel[1] * n[1];
            ([c[0] - signed * n[0], c[1] - signed * n[1]], n, signed)
        } else {
            let corner = [side * target_geom.mouth_half_width, target_geom.depth];
            let v = [c[0] - corner[0], c[1] - corner[1]];
            let dist = v[0].hypot(v[1]);
            if dist < 1e-12 {
                continue;
            }
            (corner, [v[0] / dist, v[1] / dist], dist)
        };
        let depth = r - dist;
        if depth > 0.0 {
            out.push(ContactPoint {
                position: target_pose.transform_point(q),
                normal: to_world(normal),
                depth,
                rel_velocity: [0.0, 0.0],
            });
        }
    }
    Ok(out)
}

/// Normal and tangential force magnitudes of one contact.
pub fn contact_forces(
    c: &ContactPoint,
    k_c: f64,
    b_c: f64,
    friction: &FrictionModel,
) -> (f64, f64) {
    let n = (k_c * c.depth + b_c * c.penetration_rate()).max(0.0);
    let t = c.tangent();
    let slip = c.rel_velocity[0] * t[0] + c.rel_velocity[1] * t[1];
    let ft = friction.force(n, slip);
    debug_assert!(ft.abs() <= friction.mu * n + 1e-15);
    (n, ft)
}

fn torque_about(origin: [f64; 2], p: [f64; 2], f: [f64; 2]) -> f64 {
    (p[0] - origin[0]) * f[1] - (p[1] - origin[1]) * f[0]
}

/// World-frame wrenches `(on end-effector, on target)`, torques about the
/// world origin.
pub fn penalty_wrench(
    contacts: &[ContactPoint],
    k_c: f64,
    b_c: f64,
    friction: &FrictionModel,
) -> (PlanarWrench, PlanarWrench) {
    let mut on_ee = PlanarWrench::ZERO;
    for c in contacts {
        let (n, ft) = contact_forces(c, k_c, b_c, friction);
        let t = c.tangent();
        let f = [n * c.normal[0] + ft * t[0], n * c.normal[1] + ft * t[1]];
        on_ee += PlanarWrench::new(f[1], f[0], torque_about([0.0, 0.0], c.position, f));
    }
    (on_ee, -on_ee)
}

/// Moves the torque reference of a world wrench from the world origin to `p`.
pub fn shift_to(w: PlanarWrench, p: [f64; 2]) -> PlanarWrench {
    PlanarWrench::new(w.f_z, w.f_y, w.tau_x - (p[0] * w.f_z - p[1] * w.f_y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactParams {
    pub k_c: f64,
    pub b_c: f64,
    pub friction: FrictionModel,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            k_c: 250.0,
            b_c: 20.0,
            friction: FrictionModel {
                mu: 0.3,
                eps_v: 1e-3,
            },
        }
    }
}

/// Both bodies plus everything needed to integrate them.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub ee: PlanarBody,
    pub target: PlanarBody,
    pub ee_geom: FunnelGeometry,
    pub target_geom: FunnelGeometry,
    pub contact: ContactParams,
    /// Air-bed Coulomb coefficient on the target (normal load `m g`).
    pub mu_airbed: f64,
    /// Height of the groove bottom in the target body frame [m].
    pub groove_offset: f64,
    pub t: f64,
    pub step: u64,
}

/// Wrenches acting during one physics substep, each about its body's origin.
#[derive(Debug, Clone, PartialEq)]
pub struct StepForces {
    pub contacts: Vec<ContactPoint>,
    pub contact_on_ee: PlanarWrench,
    pub contact_on_target: PlanarWrench,
    pub airbed_on_target: PlanarWrench,
}

impl Plant {
    pub fn validate(&self) -> Result<()> {
        self.ee_geom.validate()?;
        self.target_geom.validate()?;
        self.contact.friction.validate()?;
        if !(self.contact.k_c > 0.0 && self.contact.k_c.is_finite()) {
            return Err(SimError::param("k_c", "must be > 0"));
        }
        if !(self.contact.b_c >= 0.0 && self.contact.b_c.is_finite()) {
            return Err(SimError::param("b_c", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.mu_airbed) {
            return Err(SimError::param("mu_airbed", "must lie in [0, 1]"));
        }
        if self.ee.kind != BodyKind::Actuated || self.target.kind != BodyKind::FreeFloating {
            return Err(SimError::param(
                "kind",
                "expected an actuated ee and a free-floating target",
            ));
        }
        Ok(())
    }

    /// Pose of the groove frame in the world.
    pub fn groove_pose(&self) -> PlanarPose {
        let p = self.target.pose.transform_point([0.0, self.groove_offset]);
        PlanarPose::new(p[0], p[1], self.target.pose.theta())
    }

    pub fn contacts(&self) -> Result<Vec<ContactPoint>> {
        let mut contacts = funnel_contact(
            &self.ee.pose,
            &self.groove_pose(),
            &self.ee_geom,
            &self.target_geom,
        )?;
        for c in &mut contacts {
            let ve = self.ee.point_velocity(c.position);
            let vt = self.target.point_velocity(c.position);
            c.rel_velocity = [ve[0] - vt[0], ve[1] - vt[1]];
        }
        Ok(contacts)
    }

    pub fn forces(&self) -> Result<StepForces> {
        let contacts = self.contacts()?;
        let (on_ee, on_t) = penalty_wrench(
            &contacts,
            self.contact.k_c,
            self.contact.b_c,
            &self.contact.friction,
        );
        let ee_o = [self.ee.pose.y, self.ee.pose.z];
        let t_o = [self.target.pose.y, self.target.pose.z];
        Ok(StepForces {
            contacts,
            contact_on_ee: shift_to(on_ee, ee_o),
            contact_on_target: shift_to(on_t, t_o),
            airbed_on_target: self.airbed_friction(),
        })
    }

    fn airbed_friction(&self) -> PlanarWrench {
        if self.mu_airbed == 0.0 {
            return PlanarWrench::ZERO;
        }
        let eps = self.contact.friction.eps_v;
        let v = &self.target.twist;
        let speed = v.v_y.hypot(v.v_z);
        let bound = self.mu_airbed * self.target.mass * GRAVITY;
        let mag = bound * (speed / eps).min(1.0);
        if speed == 0.0 {
            return PlanarWrench::ZERO;
        }
        PlanarWrench::new(-mag * v.v_z / speed, -mag * v.v_y / speed, 0.0)
    }

    /// Kinetic energy of both bodies plus stored contact spring energy.
    pub fn energy(&self) -> Result<f64> {
        let spring: f64 = self
            .contacts()?
            .iter()
            .map(|c| 0.5 * self.contact.k_c * c.depth * c.depth)
            .sum();
        Ok(self.ee.kinetic_energy() + self.target.kinetic_energy() + spring)
    }

    /// Contact wrench on the end-effector in its own frame, torque about
    /// the end-effector origin.
    pub fn tool_frame_contact_wrench(&self, forces: &StepForces) -> PlanarWrench {
        rotate_wrench(forces.contact_on_ee, -self.ee.pose.theta())
    }
}

fn check(body: &PlanarBody, step: u64, t: f64, name: &str) -> Result<()> {
    let vals = [
        body.pose.y,
        body.pose.z,
        body.twist.v_y,
        body.twist.v_z,
        body.twist.omega_x,
    ];
    if vals.iter().any(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
        return Err(SimError::Divergence {
            step,
            t,
            detail: format!("{name} state out of range: {body:?}"),
        });
    }
    Ok(())
}

/// One semi-implicit Euler substep. `actuation` is a world-frame wrench on
/// the end-effector about its origin. Returns the forces that acted.
pub fn step_plant(plant: &mut Plant, actuation: PlanarWrench, dt: f64) -> Result<StepForces> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::param("dt", "must be > 0"));
    }
    if !actuation.is_finite() {
        return Err(SimError::Divergence {
            step: plant.step,
            t: plant.t,
            detail: format!("non-finite actuation {actuation:?}"),
        });
    }
    let forces = plant.forces()?;
    plant.ee.advance(forces.contact_on_ee + actuation, dt);
    plant
        .target
        .advance(forces.contact_on_target + forces.airbed_on_target, dt);
    plant.step += 1;
    plant.t = plant.step as f64 * dt;
    check(&plant.ee, plant.step, plant.t, "end-effector")?;
    check(&plant.target, plant.step, plant.t, "target")?;
    Ok(forces)
}

/// Force/torque sensor between flange and tool: optional Gaussian noise and
/// a one-sample delay.
#[derive(Debug, Clone)]
pub struct WrenchSensor {
    pub noise_std: f64,
    pub latency: bool,
    rng: ChaCha8Rng,
    held: PlanarWrench,
}

impl WrenchSensor {
    pub fn new(noise_std: f64, latency: bool, seed: u64) -> Result<Self> {
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(SimError::param("noise_std", "must be >= 0"));
        }
        Ok(Self {
            noise_std,
            latency,
            rng: ChaCha8Rng::seed_from_u64(seed),
            held: PlanarWrench::ZERO,
        })
    }

    pub fn ideal() -> Self {
        Self::new(0.0, false, 0).expect("valid")
    }

    /// Samples the sensor once per control tick.
    pub fn sample(&mut self, truth: PlanarWrench) -> PlanarWrench {
        let noisy = if self.noise_std > 0.0 {
            let n = Normal::new(0.0, self.noise_std).expect("finite std");
            truth
                + PlanarWrench::new(
                    n.sample(&mut self.rng),
                    n.sample(&mut self.rng),
                    n.sample(&mut self.rng),
                )
        } else {
            truth
        };
        if self.latency {
            std::mem::replace(&mut self.held, noisy)
        } else {
            noisy
        }
    }
}

/// Exact contact wrench on the end-effector in the tool frame.
pub fn measure_wrench(plant: &Plant) -> Result<PlanarWrench> {
    let forces = plant.forces()?;
    Ok(plant.tool_frame_contact_wrench(&forces))
}

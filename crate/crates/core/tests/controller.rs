use floatsim::control::*;
use floatsim::plant2d::{BodyKind, PlanarBody};
use floatsim::scenario::{default_controller, run_scenario, Method, ScenarioConfig};
use floatsim::{DiagonalSelector, PlanarPose, PlanarTwist, PlanarWrench};
use proptest::prelude::*;

const PERIOD: f64 = 0.005;
const SUBSTEPS: usize = 5;

/// End-effector of mass `m` pressed down onto a fixed penalty wall at z = 0.
struct PressedWall {
    ee: PlanarBody,
    k_c: f64,
    b_c: f64,
}

impl PressedWall {
    fn new(m: f64) -> Self {
        let ee = PlanarBody::new(
            m,
            1.0,
            PlanarPose::new(0.0, 0.0, 0.0),
            BodyKind::FreeFloating,
        )
        .unwrap();
        Self {
            ee,
            k_c: 250.0,
            b_c: 20.0,
        }
    }

    /// Contact wrench on the end-effector; pressing reads as `f_z > 0`.
    fn contact(&self) -> PlanarWrench {
        let depth = -self.ee.pose.z;
        if depth <= 0.0 {
            return PlanarWrench::ZERO;
        }
        PlanarWrench::new(
            (self.k_c * depth - self.b_c * self.ee.twist.v_z).max(0.0),
            0.0,
            0.0,
        )
    }

    /// Runs the controller for `secs` and returns the measured force per tick.
    fn run(&mut self, config: &ControllerConfig, secs: f64) -> (Vec<f64>, Vec<ControllerState>) {
        let mut state = ControllerState::new(self.ee.pose);
        let (mut forces, mut states) = (Vec::new(), Vec::new());
        let h = PERIOD / SUBSTEPS as f64;
        for _ in 0..(secs / PERIOD).round() as usize {
            let w = self.contact();
            let (out, next) =
                controller_step(&state, &w, &self.ee.pose, &self.ee.twist, config, PERIOD);
            state = next;
            for _ in 0..SUBSTEPS {
                let c = self.contact();
                self.ee.advance(out.wrench + c, h);
            }
            forces.push(w.f_z);
            states.push(state);
        }
        (forces, states)
    }
}

#[test]
fn pi_settles_on_the_reference_against_a_wall() {
    for f_ref in [0.5, 0.8, 1.5] {
        let mut c = default_controller(Method::ForceOnly);
        c.force.f_z_ref = f_ref;
        let mut plant = PressedWall::new(2.0);
        plant.ee.twist = PlanarTwist::new(0.0, -0.02, 0.0);
        let (f, states) = plant.run(&c, 10.0);
        assert_eq!(
            states.last().unwrap().mode,
            ControllerMode::ContactForceControl
        );
        let tail = &f[f.len() - 200..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        assert!(
            (mean - f_ref).abs() <= 0.05 * f_ref,
            "ref {f_ref}: mean {mean}"
        );
    }
}

#[test]
fn integral_never_exceeds_its_limit() {
    let mut c = default_controller(Method::ForceOnly);
    c.force.f_z_ref = 50.0;
    c.force.integral_limit = 0.5;
    let mut plant = PressedWall::new(2.0);
    plant.ee.twist = PlanarTwist::new(0.0, -0.02, 0.0);
    let (_, states) = plant.run(&c, 5.0);
    assert!(states.iter().all(|s| s.integral.abs() <= 0.5));
    assert!(states.iter().any(|s| s.integral.abs() == 0.5));
}

#[test]
fn entry_tick_has_no_integral_term() {
    let c = default_controller(Method::ForceOnly);
    let w = PlanarWrench::new(0.3, 0.0, 0.0);
    let mut s = ControllerState::new(PlanarPose::default());
    s.integral = 7.0;
    let mut entered = None;
    for _ in 0..c.thresholds.enter_ticks {
        let (out, next) = controller_step(
            &s,
            &w,
            &PlanarPose::default(),
            &PlanarTwist::default(),
            &c,
            PERIOD,
        );
        if next.mode == ControllerMode::ContactForceControl
            && s.mode == ControllerMode::FreeSpaceImpedance
        {
            entered = Some(out);
        }
        s = next;
    }
    let out = entered.expect("entered contact mode");
    assert_eq!(s.integral, 0.0);
    let p_only = -c.force.k_zp * (w.f_z - c.force.f_z_ref);
    assert_eq!(out.f_star.f_z, -p_only);
}

#[test]
fn decoupled_command_sets_the_desired_inertia() {
    let m = 2.0;
    let mut model = DecouplingModel::identity([m, m, 1.0]);
    model.compensation_enabled = true;
    model.compensated_axes = DiagonalSelector::force_axis();
    model.m_d = [0.5 * m, m, 1.0];
    let f_star = PlanarWrench::new(1.0, 0.0, 0.0);
    for contact in [0.0, 0.7, 3.0] {
        // the contact pushes on the body and is measured; compensation cancels it
        let w = PlanarWrench::new(contact, 0.0, 0.0);
        let mut b = PlanarBody::new(m, 1.0, PlanarPose::default(), BodyKind::FreeFloating).unwrap();
        b.advance(decouple_cmd(f_star, &model, &w) + w, PERIOD);
        let a = b.twist.v_z / PERIOD;
        assert!(
            (a - 2.0 / m).abs() <= 0.02 * 2.0 / m,
            "contact {contact}: {a}"
        );
        assert_eq!(b.twist.v_y, 0.0);
    }
}

#[test]
fn force_only_is_the_zero_gain_reduction() {
    for f_ref in [0.8, 1.5] {
        let base = ScenarioConfig::new(Method::ForceOnly).with_force_ref(f_ref);
        let nested = ScenarioConfig::new(Method::ForceWithInertiaReduction)
            .with_force_ref(f_ref)
            .with_reduction(0.0, 0.0);
        let a = run_scenario(&base).unwrap();
        let b = run_scenario(&nested).unwrap();
        assert_eq!(a.trace.records, b.trace.records);
        assert_eq!(a.metrics, b.metrics);
    }
}

#[test]
fn lateral_feedback_has_a_stability_limit() {
    let diverges = |k_yp: f64| {
        let c = ScenarioConfig::new(Method::ForceWithInertiaReduction).with_reduction(0.0, k_yp);
        match run_scenario(&c) {
            Ok(o) => {
                assert!(o.trace.records.iter().all(|r| r.ee_pose.y.abs() < 1.0));
                false
            }
            Err(e) => {
                assert!(e.is_divergence(), "{e}");
                true
            }
        }
    };
    let mut hi = 1.0;
    while !diverges(hi) {
        hi *= 2.0;
        assert!(hi < 1e4, "no divergence up to {hi}");
    }
    let mut lo = hi / 2.0;
    while lo > 1e-3 && diverges(lo) {
        lo /= 2.0;
    }
    for _ in 0..8 {
        let mid = 0.5 * (lo + hi);
        if diverges(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    for k in [0.0, 0.1, 0.25, 0.4, 0.5].map(|s| s * lo) {
        assert!(!diverges(k), "k_yp {k} below half of the limit {lo}");
    }
}

fn wrench() -> impl Strategy<Value = PlanarWrench> {
    prop::array::uniform3(-5.0f64..5.0).prop_map(PlanarWrench::from_array)
}

fn force_gains() -> impl Strategy<Value = ForceControllerGains> {
    (0.0f64..5.0, 0.0f64..1.0, 0.0f64..3.0).prop_map(|(k_zp, k_zi, f_z_ref)| ForceControllerGains {
        k_zp,
        k_zi,
        f_z_ref,
        integral_limit: 10.0,
    })
}

fn reduction_gains() -> impl Strategy<Value = InertiaReductionGains> {
    (0.0f64..3.0, 0.0f64..3.0).prop_map(|(k_yp, k_xp)| InertiaReductionGains { k_yp, k_xp })
}

/// Contact-mode `F*` after a few ticks of steady contact.
fn f_star(c: &ControllerConfig, w: &PlanarWrench) -> PlanarWrench {
    let mut s = ControllerState::new(PlanarPose::default());
    let mut out = None;
    for _ in 0..6 {
        let (o, next) = controller_step(
            &s,
            w,
            &PlanarPose::default(),
            &PlanarTwist::default(),
            c,
            PERIOD,
        );
        s = next;
        out = Some(o);
    }
    out.unwrap().f_star
}

proptest! {
    #[test]
    fn force_and_reduction_gains_act_on_separate_axes(
        w in wrench(),
        (f1, f2) in (force_gains(), force_gains()),
        (r1, r2) in (reduction_gains(), reduction_gains()),
    ) {
        let w = PlanarWrench::new(w.f_z.abs() + 0.2, w.f_y, w.tau_x);
        let cfg = |f: ForceControllerGains, r: InertiaReductionGains| {
            let mut c = default_controller(Method::ForceWithInertiaReduction);
            c.force = f;
            c.reduction = r;
            c
        };
        let a = f_star(&cfg(f1, r1), &w);
        let b = f_star(&cfg(f1, r2), &w);
        let c = f_star(&cfg(f2, r1), &w);
        prop_assert_eq!(a.f_z, b.f_z);
        prop_assert_eq!((a.f_y, a.tau_x), (c.f_y, c.tau_x));
    }

    #[test]
    fn force_only_has_no_lateral_command(w in wrench(), f in force_gains()) {
        let w = PlanarWrench::new(w.f_z.abs() + 0.2, w.f_y, w.tau_x);
        let mut c = default_controller(Method::ForceOnly);
        c.force = f;
        let s = f_star(&c, &w);
        prop_assert_eq!((s.f_y, s.tau_x), (0.0, 0.0));
    }

    #[test]
    fn integral_stays_clamped(errors in prop::collection::vec(-20.0f64..20.0, 1..200), lim in 0.01f64..5.0) {
        let g = ForceControllerGains { integral_limit: lim, ..ForceControllerGains::default() };
        let mut i = 0.0;
        for e in errors {
            i = force_pi_cmd(e, &g, i, PERIOD).1;
            prop_assert!(i.abs() <= lim);
        }
    }
}

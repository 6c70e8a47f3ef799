use floatsim::rotate_wrench;
use floatsim::scenario::*;

fn aligns(c: &ScenarioConfig, f: f64) -> bool {
    run_scenario(&c.clone().with_force_ref(f))
        .unwrap()
        .metrics
        .aligned()
}

#[test]
fn more_force_still_aligns() {
    for c in ScenarioConfig::comparison_set().into_iter().take(3) {
        for a in [0.4, 0.8, 1.5] {
            if aligns(&c, a) {
                assert!(
                    aligns(&c, a + 0.1),
                    "{} aligns at {a} but not at {}",
                    c.label,
                    a + 0.1
                );
            }
        }
    }
}

#[test]
fn method_one_tracks_its_reference() {
    for c in ScenarioConfig::comparison_set().into_iter().take(2) {
        let m = run_scenario(&c).unwrap().metrics;
        assert!(m.aligned(), "{}", c.label);
        let mean = m.steady_mean_fz.unwrap();
        assert!((mean - 0.8).abs() <= 0.08, "{}: {mean}", c.label);
        assert!(m.alignment_time.unwrap() >= m.first_contact_time.unwrap());
    }
}

#[test]
fn one_record_per_tick() {
    let c = ScenarioConfig::new(Method::ForceOnly);
    let trace = run_scenario(&c).unwrap().trace;
    assert_eq!(trace.records.len(), c.n_ticks());
    for (i, r) in trace.records.iter().enumerate() {
        assert_eq!(r.tick, i as u64);
        assert_eq!(r.t, i as f64 * c.control_period);
    }
}

#[test]
fn chased_target_moves_only_with_the_delivered_momentum() {
    for c in ScenarioConfig::comparison_set() {
        let out = run_scenario(&c).unwrap();
        let (m_ee, m_t) = (c.plant.ee_mass, c.plant.target_mass);
        let r0 = &out.trace.records[0];
        let momentum = |r: &TraceRecord| {
            [
                m_ee * r.ee_twist.v_y + m_t * r.target_twist.v_y,
                m_ee * r.ee_twist.v_z + m_t * r.target_twist.v_z,
            ]
        };
        let mut p = momentum(r0);
        let mut applied = p[0].hypot(p[1]);
        for w in out.trace.records.windows(2) {
            let f = rotate_wrench(w[0].command, w[0].ee_pose.theta());
            p[0] += f.f_y * c.control_period;
            p[1] += f.f_z * c.control_period;
            applied += f.f_y.hypot(f.f_z) * c.control_period;
            let q = momentum(&w[1]);
            assert!(
                (q[0] - p[0]).abs() < 1e-9 && (q[1] - p[1]).abs() < 1e-9,
                "{}: {q:?} vs {p:?}",
                c.label
            );
        }
        let speed = out.metrics.max_target_speed;
        assert!(speed > 0.0, "{}", c.label);
        assert!(
            speed * m_t <= applied,
            "{}: {} > {applied}",
            c.label,
            speed * m_t
        );
    }
}

#[test]
fn impedance_only_keeps_bouncing() {
    let c = ScenarioConfig::new(Method::ImpedanceOnly);
    let m = run_scenario(&c).unwrap().metrics;
    assert!(m.contact_break_count >= 2, "{m:?}");
}

//! Plain-text run configuration: `key = value` lines grouped under
//! `[section]` headers. `#` and `;` start comments.
//!
//! Sections: `[sweep]`, `[plant]`, `[sensor]`, `[controller]`,
//! `[scenario]`, `[threshold]` and any number of `[run.<label>]`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::control::{DecouplingModel, InertiaReductionGains};
use crate::error::{Result, SimError};
use crate::scenario::{Method, PlantParams, ScenarioConfig};
use crate::sim1d::{Sim1dParams, SweepSpec, VariedField};
use crate::types::{DiagonalSelector, PlanarWrench};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub label: String,
    pub method: Method,
    pub f_z_ref: Option<f64>,
    pub k_xp: Option<f64>,
    pub k_yp: Option<f64>,
}

impl RunSpec {
    fn new(label: &str, method: Method, f_z_ref: f64) -> Self {
        Self {
            label: label.to_string(),
            method,
            f_z_ref: Some(f_z_ref),
            k_xp: None,
            k_yp: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSpec {
    pub f_lo: f64,
    pub f_hi: f64,
    pub resolution: f64,
    /// Labels of the runs to search; empty means every force-controlled run.
    pub runs: Vec<String>,
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        Self {
            f_lo: 0.2,
            f_hi: 2.0,
            resolution: 0.05,
            runs: Vec::new(),
        }
    }
}

/// Everything a command line run can set. Sections that are absent keep
/// their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub sweep: SweepSpec,
    /// Shared plant, sensor, controller and scenario settings; the method
    /// and per-run gains come from `runs`.
    pub base: ScenarioConfig,
    pub runs: Vec<RunSpec>,
    pub threshold: ThresholdSpec,
    /// False until the file sets `m_hat` or `m_d`; until then the
    /// decoupling model follows the plant's end-effector inertia.
    pub explicit_decoupling: bool,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            sweep: default_sweep(),
            base: ScenarioConfig::new(Method::ForceWithInertiaReduction),
            runs: vec![
                RunSpec {
                    k_xp: Some(0.5),
                    k_yp: Some(0.2),
                    ..RunSpec::new("method1_case1", Method::ForceWithInertiaReduction, 0.8)
                },
                RunSpec {
                    k_xp: Some(0.0),
                    k_yp: Some(1.0),
                    ..RunSpec::new("method1_case2", Method::ForceWithInertiaReduction, 0.8)
                },
                RunSpec::new("method2", Method::ForceOnly, 1.5),
                RunSpec::new("method3", Method::ImpedanceOnly, 0.8),
            ],
            threshold: ThresholdSpec {
                runs: vec!["method1_case1".into(), "method2".into()],
                ..ThresholdSpec::default()
            },
            explicit_decoupling: false,
        }
    }
}

pub fn default_sweep() -> SweepSpec {
    SweepSpec {
        base: Sim1dParams::table_sim2(),
        varied_field: VariedField::ManipStiffness,
        values: vec![0.0, 500.0, 2000.0],
        duration: 1.0,
        dt: 1e-3,
        v_approach: 0.5,
    }
}

fn err(line: usize, message: impl Into<String>) -> SimError {
    SimError::Config {
        line,
        message: message.into(),
    }
}

fn num(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| err(line, format!("`{key}`: `{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(err(line, format!("`{key}` must be finite")));
    }
    Ok(x)
}

fn list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| num(line, key, s.trim())).collect()
}

fn triple(line: usize, key: &str, v: &str) -> Result<[f64; 3]> {
    let xs = list(line, key, v)?;
    <[f64; 3]>::try_from(xs)
        .map_err(|xs| err(line, format!("`{key}` needs 3 values, got {}", xs.len())))
}

fn flag(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "on" | "yes" => Ok(true),
        "false" | "0" | "off" | "no" => Ok(false),
        _ => Err(err(line, format!("`{key}`: `{v}` is not a boolean"))),
    }
}

fn count<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| {
        err(
            line,
            format!("`{key}`: `{v}` is not a non-negative integer"),
        )
    })
}

fn selector(line: usize, key: &str, v: &str) -> Result<DiagonalSelector> {
    DiagonalSelector::new(triple(line, key, v)?).map_err(|e| err(line, format!("`{key}`: {e}")))
}

fn join(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

struct Section {
    name: String,
    line: usize,
    entries: Vec<(String, String, usize)>,
}

fn split_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split(['#', ';']).next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line, "unterminated section header"))?
                .trim()
                .to_string();
            if !seen.insert(name.clone()) {
                return Err(err(line, format!("duplicate section [{name}]")));
            }
            sections.push(Section {
                name,
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, got `{s}`")))?;
        let sec = sections
            .last_mut()
            .ok_or_else(|| err(line, "key outside of any section"))?;
        let k = k.trim().to_string();
        if sec.entries.iter().any(|(e, _, _)| *e == k) {
            return Err(err(line, format!("duplicate key `{k}` in [{}]", sec.name)));
        }
        sec.entries.push((k, v.trim().to_string(), line));
    }
    Ok(sections)
}

fn require(sec: &Section, keys: &[&str]) {
    for k in keys {
        if !sec.entries.iter().any(|(e, _, _)| e == k) {
            log::warn!(
                "[{}] (line {}) has no `{k}`; using the default",
                sec.name,
                sec.line
            );
        }
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(0, format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ConfigFile::default();
        let mut runs = Vec::new();
        let mut runs_set = false;
        for sec in split_sections(text)? {
            match sec.name.as_str() {
                "sweep" => {
                    require(&sec, &["varied", "values"]);
                    for (k, v, l) in &sec.entries {
                        cfg.set_sweep(k, v, *l)?;
                    }
                }
                "plant" => {
                    for (k, v, l) in &sec.entries {
                        cfg.set_plant(k, v, *l)?;
                    }
                }
                "sensor" => {
                    for (k, v, l) in &sec.entries {
                        cfg.set_sensor(k, v, *l)?;
                    }
                }
                "controller" => {
                    for (k, v, l) in &sec.entries {
                        cfg.set_controller(k, v, *l)?;
                    }
                }
                "scenario" => {
                    for (k, v, l) in &sec.entries {
                        cfg.set_scenario(k, v, *l)?;
                    }
                }
                "threshold" => {
                    require(&sec, &["f_lo", "f_hi"]);
                    for (k, v, l) in &sec.entries {
                        let t = &mut cfg.threshold;
                        match k.as_str() {
                            "f_lo" => t.f_lo = num(*l, k, v)?,
                            "f_hi" => t.f_hi = num(*l, k, v)?,
                            "resolution" => t.resolution = num(*l, k, v)?,
                            "runs" => {
                                t.runs = v
                                    .split(',')
                                    .map(|s| s.trim().to_string())
                                    .filter(|s| !s.is_empty())
                                    .collect();
                                runs_set = true;
                            }
                            _ => return Err(err(*l, format!("unknown key `{k}` in [threshold]"))),
                        }
                    }
                }
                name => match name.strip_prefix("run.") {
                    Some(label) if !label.is_empty() => runs.push(parse_run(label, &sec)?),
                    _ => return Err(err(sec.line, format!("unknown section [{name}]"))),
                },
            }
        }
        if !runs.is_empty() {
            cfg.runs = runs;
            if !runs_set {
                cfg.threshold.runs.clear();
            }
        }
        for name in &cfg.threshold.runs {
            if !cfg.runs.iter().any(|r| &r.label == name) {
                return Err(err(
                    0,
                    format!("[threshold] runs: no run labelled `{name}`"),
                ));
            }
        }
        Ok(cfg)
    }

    fn set_sweep(&mut self, k: &str, v: &str, l: usize) -> Result<()> {
        let s = &mut self.sweep;
        let p = &mut s.base;
        match k {
            "varied" => {
                s.varied_field = VariedField::parse(v)
                    .ok_or_else(|| err(l, format!("`varied`: unknown field `{v}`")))?
            }
            "values" => {
                s.values = list(l, k, v)?;
                if s.values.is_empty() {
                    return Err(err(l, "`values` must list at least one value"));
                }
            }
            "duration" => s.duration = num(l, k, v)?,
            "dt" => s.dt = num(l, k, v)?,
            "v_approach" => s.v_approach = num(l, k, v)?,
            "m_ri" => p.m_ri = num(l, k, v)?,
            "b_ri" => p.b_ri = num(l, k, v)?,
            "k_ri" => p.k_ri = num(l, k, v)?,
            "m_t" => p.m_t = num(l, k, v)?,
            "k_c" => p.k_c = num(l, k, v)?,
            "b_c" => p.b_c = num(l, k, v)?,
            "f_f" => p.f_f = num(l, k, v)?,
            _ => return Err(err(l, format!("unknown key `{k}` in [sweep]"))),
        }
        Ok(())
    }

    fn set_plant(&mut self, k: &str, v: &str, l: usize) -> Result<()> {
        let p = &mut self.base.plant;
        let x = num(l, k, v)?;
        match k {
            "ee_mass" => p.ee_mass = x,
            "ee_inertia" => p.ee_inertia = x,
            "target_mass" => p.target_mass = x,
            "target_inertia" => p.target_inertia = x,
            "half_angle" => p.target_geom.half_angle = x,
            "mouth_half_width" => p.target_geom.mouth_half_width = x,
            "depth" => p.target_geom.depth = x,
            "tip_radius" => p.target_geom.tip_radius = x,
            "ee_half_angle" => p.ee_geom.half_angle = x,
            "ee_mouth_half_width" => p.ee_geom.mouth_half_width = x,
            "tool_length" => p.ee_geom.depth = x,
            "ee_tip_radius" => p.ee_geom.tip_radius = x,
            "k_c" => p.contact.k_c = x,
            "b_c" => p.contact.b_c = x,
            "mu_funnel" => p.contact.friction.mu = x,
            "eps_v" => p.contact.friction.eps_v = x,
            "mu_airbed" => p.mu_airbed = x,
            "groove_offset" => p.groove_offset = x,
            _ => return Err(err(l, format!("unknown key `{k}` in [plant]"))),
        }
        Ok(())
    }

    fn set_sensor(&mut self, k: &str, v: &str, l: usize) -> Result<()> {
        let s = &mut self.base.sensor;
        match k {
            "noise_std" => s.noise_std = num(l, k, v)?,
            "latency" => s.latency = flag(l, k, v)?,
            "seed" => s.seed = count(l, k, v)?,
            _ => return Err(err(l, format!("unknown key `{k}` in [sensor]"))),
        }
        Ok(())
    }

    fn set_controller(&mut self, k: &str, v: &str, l: usize) -> Result<()> {
        let c = &mut self.base.controller;
        match k {
            "k_e" => c.impedance.k_e = triple(l, k, v)?,
            "b_e" => c.impedance.b_e = triple(l, k, v)?,
            "k_zp" => c.force.k_zp = num(l, k, v)?,
            "k_zi" => c.force.k_zi = num(l, k, v)?,
            "f_z_ref" => c.force.f_z_ref = num(l, k, v)?,
            "integral_limit" => c.force.integral_limit = num(l, k, v)?,
            "selector" => c.selector = selector(l, k, v)?,
            "m_hat" => {
                c.decoupling.m_hat = triple(l, k, v)?;
                self.explicit_decoupling = true;
            }
            "m_d" => {
                c.decoupling.m_d = triple(l, k, v)?;
                self.explicit_decoupling = true;
            }
            "bias" => c.decoupling.bias = PlanarWrench::from_array(triple(l, k, v)?),
            "compensation" => c.decoupling.compensation_enabled = flag(l, k, v)?,
            "compensated_axes" => c.decoupling.compensated_axes = selector(l, k, v)?,
            "contact_force" => c.thresholds.force = num(l, k, v)?,
            "contact_torque" => c.thresholds.torque = num(l, k, v)?,
            "enter_ticks" => c.thresholds.enter_ticks = count(l, k, v)?,
            "exit_ticks" => c.thresholds.exit_ticks = count(l, k, v)?,
            "chase_speed" => c.chase_speed = num(l, k, v)?,
            _ => return Err(err(l, format!("unknown key `{k}` in [controller]"))),
        }
        Ok(())
    }

    fn set_scenario(&mut self, k: &str, v: &str, l: usize) -> Result<()> {
        let s = &mut self.base;
        match k {
            "initial_offset" => s.initial_offset = num(l, k, v)?,
            "initial_distance" => s.initial_distance = num(l, k, v)?,
            "duration" => s.duration = num(l, k, v)?,
            "control_period" => s.control_period = num(l, k, v)?,
            "substeps" => s.substeps = count(l, k, v)?,
            "tol_lateral" => s.tol_lateral = num(l, k, v)?,
            "tol_angle" => s.tol_angle = num(l, k, v)?,
            "align_dwell" => s.align_dwell = num(l, k, v)?,
            _ => return Err(err(l, format!("unknown key `{k}` in [scenario]"))),
        }
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.base.sensor.seed = seed;
    }

    fn decoupling(&self) -> DecouplingModel {
        let mut d = self.base.controller.decoupling;
        if !self.explicit_decoupling {
            let PlantParams {
                ee_mass: m,
                ee_inertia: i,
                ..
            } = self.base.plant;
            d.m_hat = [m, m, i];
            d.m_d = [m / 4.0, m, i];
        }
        d
    }

    /// One complete scenario per `[run.*]` section, in file order.
    pub fn scenarios(&self) -> Vec<ScenarioConfig> {
        self.runs
            .iter()
            .map(|r| {
                let mut c = self.base.clone().with_label(&r.label);
                c.method = r.method;
                c.controller.decoupling = self.decoupling();
                c.controller.force_control = r.method != Method::ImpedanceOnly;
                let d = match r.method {
                    Method::ForceWithInertiaReduction => InertiaReductionGains {
                        k_yp: 0.2,
                        k_xp: 0.5,
                    },
                    _ => InertiaReductionGains::default(),
                };
                c.controller.reduction = InertiaReductionGains {
                    k_yp: r.k_yp.unwrap_or(d.k_yp),
                    k_xp: r.k_xp.unwrap_or(d.k_xp),
                };
                if let Some(f) = r.f_z_ref {
                    c.controller.force.f_z_ref = f;
                }
                c
            })
            .collect()
    }

    /// The effective configuration in the same format `parse` reads.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let sw = &self.sweep;
        let b = &sw.base;
        let _ = writeln!(s, "[sweep]");
        let _ = writeln!(s, "varied = {}", sw.varied_field.name());
        let _ = writeln!(s, "values = {}", join(&sw.values));
        for (k, v) in [
            ("duration", sw.duration),
            ("dt", sw.dt),
            ("v_approach", sw.v_approach),
            ("m_ri", b.m_ri),
            ("b_ri", b.b_ri),
            ("k_ri", b.k_ri),
            ("m_t", b.m_t),
            ("k_c", b.k_c),
            ("b_c", b.b_c),
            ("f_f", b.f_f),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }

        let p = &self.base.plant;
        let _ = writeln!(s, "\n[plant]");
        for (k, v) in [
            ("ee_mass", p.ee_mass),
            ("ee_inertia", p.ee_inertia),
            ("target_mass", p.target_mass),
            ("target_inertia", p.target_inertia),
            ("half_angle", p.target_geom.half_angle),
            ("mouth_half_width", p.target_geom.mouth_half_width),
            ("depth", p.target_geom.depth),
            ("tip_radius", p.target_geom.tip_radius),
            ("ee_half_angle", p.ee_geom.half_angle),
            ("ee_mouth_half_width", p.ee_geom.mouth_half_width),
            ("tool_length", p.ee_geom.depth),
            ("ee_tip_radius", p.ee_geom.tip_radius),
            ("k_c", p.contact.k_c),
            ("b_c", p.contact.b_c),
            ("mu_funnel", p.contact.friction.mu),
            ("eps_v", p.contact.friction.eps_v),
            ("mu_airbed", p.mu_airbed),
            ("groove_offset", p.groove_offset),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }

        let se = &self.base.sensor;
        let _ = writeln!(s, "\n[sensor]");
        let _ = writeln!(s, "noise_std = {}", se.noise_std);
        let _ = writeln!(s, "latency = {}", se.latency);
        let _ = writeln!(s, "seed = {}", se.seed);

        let c = &self.base.controller;
        let d = self.decoupling();
        let _ = writeln!(s, "\n[controller]");
        let _ = writeln!(s, "k_e = {}", join(&c.impedance.k_e));
        let _ = writeln!(s, "b_e = {}", join(&c.impedance.b_e));
        let _ = writeln!(s, "k_zp = {}", c.force.k_zp);
        let _ = writeln!(s, "k_zi = {}", c.force.k_zi);
        let _ = writeln!(s, "f_z_ref = {}", c.force.f_z_ref);
        let _ = writeln!(s, "integral_limit = {}", c.force.integral_limit);
        let _ = writeln!(s, "selector = {}", join(&c.selector.diag()));
        let _ = writeln!(s, "m_hat = {}", join(&d.m_hat));
        let _ = writeln!(s, "m_d = {}", join(&d.m_d));
        let _ = writeln!(s, "bias = {}", join(&d.bias.as_array()));
        let _ = writeln!(s, "compensation = {}", d.compensation_enabled);
        let _ = writeln!(s, "compensated_axes = {}", join(&d.compensated_axes.diag()));
        let _ = writeln!(s, "contact_force = {}", c.thresholds.force);
        let _ = writeln!(s, "contact_torque = {}", c.thresholds.torque);
        let _ = writeln!(s, "enter_ticks = {}", c.thresholds.enter_ticks);
        let _ = writeln!(s, "exit_ticks = {}", c.thresholds.exit_ticks);
        let _ = writeln!(s, "chase_speed = {}", c.chase_speed);

        let sc = &self.base;
        let _ = writeln!(s, "\n[scenario]");
        for (k, v) in [
            ("initial_offset", sc.initial_offset),
            ("initial_distance", sc.initial_distance),
            ("duration", sc.duration),
            ("control_period", sc.control_period),
            ("tol_lateral", sc.tol_lateral),
            ("tol_angle", sc.tol_angle),
            ("align_dwell", sc.align_dwell),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "substeps = {}", sc.substeps);

        let t = &self.threshold;
        let _ = writeln!(s, "\n[threshold]");
        let _ = writeln!(s, "runs = {}", t.runs.join(", "));
        let _ = writeln!(s, "f_lo = {}", t.f_lo);
        let _ = writeln!(s, "f_hi = {}", t.f_hi);
        let _ = writeln!(s, "resolution = {}", t.resolution);

        for (r, c) in self.runs.iter().zip(self.scenarios()) {
            let _ = writeln!(s, "\n[run.{}]", r.label);
            let _ = writeln!(s, "method = {}", r.method.name());
            let _ = writeln!(s, "f_z_ref = {}", c.controller.force.f_z_ref);
            let _ = writeln!(s, "k_xp = {}", c.controller.reduction.k_xp);
            let _ = writeln!(s, "k_yp = {}", c.controller.reduction.k_yp);
        }
        s
    }
}

fn parse_run(label: &str, sec: &Section) -> Result<RunSpec> {
    require(sec, &["method"]);
    let mut r = RunSpec {
        label: label.to_string(),
        method: Method::ForceWithInertiaReduction,
        f_z_ref: None,
        k_xp: None,
        k_yp: None,
    };
    for (k, v, l) in &sec.entries {
        match k.as_str() {
            "method" => {
                r.method = Method::parse(v)
                    .ok_or_else(|| err(*l, format!("`method`: unknown method `{v}`")))?
            }
            "f_z_ref" => r.f_z_ref = Some(num(*l, k, v)?),
            "k_xp" => r.k_xp = Some(num(*l, k, v)?),
            "k_yp" => r.k_yp = Some(num(*l, k, v)?),
            _ => return Err(err(*l, format!("unknown key `{k}` in [run.{label}]"))),
        }
    }
    Ok(r)
}

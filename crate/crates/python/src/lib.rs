//! Python bindings for `floatsim`.
//!
//! ```python
//! import floatsim_py as fs
//! traces = fs.run_sweep(fs.Sim1dParams.table_sim2(), "k_ri", [0, 500, 2000])
//! out = fs.run_scenario(fs.ScenarioConfig.comparison_set()[0])
//! ```

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use floatsim::config::ConfigFile;
use floatsim::plant2d::FunnelGeometry;
use floatsim::scenario::{self as sc, Method};
use floatsim::sim1d::{self, SweepSpec, VariedField};
use floatsim::{PlanarPose, SimError};

create_exception!(floatsim_py, SimulationError, PyException);
create_exception!(floatsim_py, DivergenceError, SimulationError);
create_exception!(floatsim_py, BracketError, SimulationError);

fn to_py(e: SimError) -> PyErr {
    let msg = e.to_string();
    match e {
        e if e.is_divergence() => DivergenceError::new_err(msg),
        SimError::InvalidBracket(_) => BracketError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn parse_method(s: &str) -> PyResult<Method> {
    Method::parse(s).ok_or_else(|| PyValueError::new_err(format!("unknown method `{s}`")))
}

/// Contact, manipulator and target parameters of the 1-DOF model.
#[pyclass(module = "floatsim_py", skip_from_py_object)]
#[derive(Clone)]
struct Sim1dParams {
    #[pyo3(get, set)]
    m_ri: f64,
    #[pyo3(get, set)]
    b_ri: f64,
    #[pyo3(get, set)]
    k_ri: f64,
    #[pyo3(get, set)]
    m_t: f64,
    #[pyo3(get, set)]
    k_c: f64,
    #[pyo3(get, set)]
    b_c: f64,
    #[pyo3(get, set)]
    f_f: f64,
    #[pyo3(get, set)]
    v_cmd: f64,
}

impl From<sim1d::Sim1dParams> for Sim1dParams {
    fn from(p: sim1d::Sim1dParams) -> Self {
        Self {
            m_ri: p.m_ri,
            b_ri: p.b_ri,
            k_ri: p.k_ri,
            m_t: p.m_t,
            k_c: p.k_c,
            b_c: p.b_c,
            f_f: p.f_f,
            v_cmd: p.v_cmd,
        }
    }
}

impl Sim1dParams {
    fn core(&self) -> sim1d::Sim1dParams {
        sim1d::Sim1dParams {
            m_ri: self.m_ri,
            b_ri: self.b_ri,
            k_ri: self.k_ri,
            m_t: self.m_t,
            k_c: self.k_c,
            b_c: self.b_c,
            f_f: self.f_f,
            v_cmd: self.v_cmd,
        }
    }
}

#[pymethods]
impl Sim1dParams {
    #[new]
    #[pyo3(signature = (m_ri, b_ri, k_ri, m_t, k_c, b_c, f_f=0.0, v_cmd=0.5))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        m_ri: f64,
        b_ri: f64,
        k_ri: f64,
        m_t: f64,
        k_c: f64,
        b_c: f64,
        f_f: f64,
        v_cmd: f64,
    ) -> PyResult<Self> {
        sim1d::Sim1dParams::new(m_ri, b_ri, k_ri, m_t, k_c, b_c, f_f, v_cmd)
            .map(Into::into)
            .map_err(to_py)
    }

    #[staticmethod]
    fn table_sim1() -> Self {
        sim1d::Sim1dParams::table_sim1().into()
    }

    #[staticmethod]
    fn table_sim2() -> Self {
        sim1d::Sim1dParams::table_sim2().into()
    }

    #[staticmethod]
    fn table_sim3() -> Self {
        sim1d::Sim1dParams::table_sim3().into()
    }

    fn __repr__(&self) -> String {
        format!(
            "Sim1dParams(m_ri={}, b_ri={}, k_ri={}, m_t={}, k_c={}, b_c={}, f_f={}, v_cmd={})",
            self.m_ri, self.b_ri, self.k_ri, self.m_t, self.k_c, self.b_c, self.f_f, self.v_cmd
        )
    }
}

/// Penalty contact force for penetration `y` and its rate.
#[pyfunction]
fn contact_force_1d(y: f64, y_dot: f64, k_c: f64, b_c: f64) -> f64 {
    sim1d::contact_force_1d(y, y_dot, k_c, b_c)
}

/// RK4 run from first contact. Rows are `(t, x_i, v_i, x_t, v_t, F_c)`.
#[pyfunction]
#[pyo3(signature = (params, dt, n_steps, v_approach=0.5))]
fn simulate_1d(
    params: PyRef<'_, Sim1dParams>,
    dt: f64,
    n_steps: usize,
    v_approach: f64,
) -> PyResult<Vec<(f64, f64, f64, f64, f64, f64)>> {
    let p = params.core();
    let states = sim1d::simulate(
        sim1d::Sim1dState::initial_contact(v_approach),
        &p,
        dt,
        n_steps,
    )
    .map_err(to_py)?;
    Ok(states
        .iter()
        .map(|s| (s.t, s.x_i, s.v_i, s.x_t, s.v_t, s.contact_force(&p)))
        .collect())
}

/// Sweep one field (`mass_ratio`, `k_ri` or `b_ri`); one dict per value.
#[pyfunction]
#[pyo3(signature = (base, varied, values, duration=1.0, dt=1e-4, v_approach=0.5, threads=0))]
#[allow(clippy::too_many_arguments)]
fn run_sweep<'py>(
    py: Python<'py>,
    base: PyRef<'_, Sim1dParams>,
    varied: &str,
    values: Vec<f64>,
    duration: f64,
    dt: f64,
    v_approach: f64,
    threads: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let varied_field = VariedField::parse(varied)
        .ok_or_else(|| PyValueError::new_err(format!("unknown sweep field `{varied}`")))?;
    let spec = SweepSpec {
        base: base.core(),
        varied_field,
        values,
        duration,
        dt,
        v_approach,
    };
    let traces = py
        .detach(|| sim1d::run_sweep(&spec, threads))
        .map_err(to_py)?;
    traces
        .iter()
        .map(|tr| {
            let d = PyDict::new(py);
            d.set_item("value", tr.value)?;
            d.set_item("peak_force", tr.peak_force())?;
            d.set_item("min_force", tr.min_force())?;
            d.set_item("breaks", tr.breaks())?;
            d.set_item("log_decrement", tr.log_decrement())?;
            d.set_item("t", tr.states.iter().map(|s| s.t).collect::<Vec<_>>())?;
            d.set_item("forces", &tr.forces)?;
            Ok(d)
        })
        .collect()
}

/// One planar alignment experiment.
#[pyclass(module = "floatsim_py", skip_from_py_object)]
#[derive(Clone)]
struct ScenarioConfig {
    inner: sc::ScenarioConfig,
}

#[pymethods]
impl ScenarioConfig {
    /// `method` is `I`, `II`, `III` or the full method name.
    #[new]
    #[pyo3(signature = (method, f_z_ref=None, k_xp=None, k_yp=None, label=None))]
    fn new(
        method: &str,
        f_z_ref: Option<f64>,
        k_xp: Option<f64>,
        k_yp: Option<f64>,
        label: Option<&str>,
    ) -> PyResult<Self> {
        let mut c = sc::ScenarioConfig::new(parse_method(method)?);
        if let Some(f) = f_z_ref {
            c.controller.force.f_z_ref = f;
        }
        if let Some(k) = k_xp {
            c.controller.reduction.k_xp = k;
        }
        if let Some(k) = k_yp {
            c.controller.reduction.k_yp = k;
        }
        if let Some(l) = label {
            c.label = l.to_string();
        }
        Ok(Self { inner: c })
    }

    /// The four reference configurations, one per compared case.
    #[staticmethod]
    fn comparison_set() -> Vec<Self> {
        sc::ScenarioConfig::comparison_set()
            .into_iter()
            .map(|inner| Self { inner })
            .collect()
    }

    /// Every run defined in a configuration file.
    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Vec<Self>> {
        let cfg = ConfigFile::load(&path).map_err(to_py)?;
        Ok(cfg
            .scenarios()
            .into_iter()
            .map(|inner| Self { inner })
            .collect())
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    #[getter]
    fn label(&self) -> &str {
        &self.inner.label
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.name()
    }

    #[getter]
    fn f_z_ref(&self) -> f64 {
        self.inner.controller.force.f_z_ref
    }

    #[setter]
    fn set_f_z_ref(&mut self, v: f64) {
        self.inner.controller.force.f_z_ref = v;
    }

    #[getter]
    fn k_xp(&self) -> f64 {
        self.inner.controller.reduction.k_xp
    }

    #[getter]
    fn k_yp(&self) -> f64 {
        self.inner.controller.reduction.k_yp
    }

    #[getter]
    fn mu_funnel(&self) -> f64 {
        self.inner.plant.contact.friction.mu
    }

    #[setter]
    fn set_mu_funnel(&mut self, v: f64) {
        self.inner.plant.contact.friction.mu = v;
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration
    }

    #[setter]
    fn set_duration(&mut self, v: f64) {
        self.inner.duration = v;
    }

    #[getter]
    fn noise_std(&self) -> f64 {
        self.inner.sensor.noise_std
    }

    #[setter]
    fn set_noise_std(&mut self, v: f64) {
        self.inner.sensor.noise_std = v;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.sensor.seed
    }

    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.sensor.seed = v;
    }

    fn __repr__(&self) -> String {
        format!(
            "ScenarioConfig(label={:?}, method={}, f_z_ref={}, k_xp={}, k_yp={})",
            self.inner.label,
            self.inner.method.name(),
            self.f_z_ref(),
            self.k_xp(),
            self.k_yp()
        )
    }
}

/// Scalar outcome of one scenario run.
#[pyclass(module = "floatsim_py", get_all, skip_from_py_object)]
#[derive(Clone)]
struct RunMetrics {
    contact_break_count: u32,
    first_contact_time: Option<f64>,
    alignment_time: Option<f64>,
    peak_abs_fz: f64,
    steady_mean_fz: Option<f64>,
    steady_abs_error: Option<f64>,
    ripple: Option<f64>,
    max_target_speed: f64,
}

impl From<&sc::RunMetrics> for RunMetrics {
    fn from(m: &sc::RunMetrics) -> Self {
        Self {
            contact_break_count: m.contact_break_count,
            first_contact_time: m.first_contact_time,
            alignment_time: m.alignment_time,
            peak_abs_fz: m.peak_abs_fz,
            steady_mean_fz: m.steady_mean_fz,
            steady_abs_error: m.steady_abs_error,
            ripple: m.ripple,
            max_target_speed: m.max_target_speed,
        }
    }
}

#[pymethods]
impl RunMetrics {
    #[getter]
    fn aligned(&self) -> bool {
        self.alignment_time.is_some()
    }

    fn __repr__(&self) -> String {
        format!(
            "RunMetrics(breaks={}, alignment_time={:?}, steady_mean_fz={:?})",
            self.contact_break_count, self.alignment_time, self.steady_mean_fz
        )
    }
}

/// Runs one scenario. Returns `(metrics, trace)` where `trace` maps column
/// names to lists.
#[pyfunction]
fn run_scenario<'py>(
    py: Python<'py>,
    config: PyRef<'_, ScenarioConfig>,
) -> PyResult<(RunMetrics, Bound<'py, PyDict>)> {
    let c = config.inner.clone();
    let out = py.detach(|| sc::run_scenario(&c)).map_err(to_py)?;
    let r = &out.trace.records;
    let col = |f: &dyn Fn(&sc::TraceRecord) -> f64| r.iter().map(f).collect::<Vec<f64>>();
    let d = PyDict::new(py);
    d.set_item("t", col(&|x| x.t))?;
    d.set_item("mode", r.iter().map(|x| x.mode.code()).collect::<Vec<_>>())?;
    d.set_item("ee_y", col(&|x| x.ee_pose.y))?;
    d.set_item("ee_z", col(&|x| x.ee_pose.z))?;
    d.set_item("ee_theta", col(&|x| x.ee_pose.theta()))?;
    d.set_item("target_y", col(&|x| x.target_pose.y))?;
    d.set_item("target_z", col(&|x| x.target_pose.z))?;
    d.set_item("target_theta", col(&|x| x.target_pose.theta()))?;
    d.set_item("fz_meas", col(&|x| x.measured.f_z))?;
    d.set_item("fy_meas", col(&|x| x.measured.f_y))?;
    d.set_item("tx_meas", col(&|x| x.measured.tau_x))?;
    d.set_item(
        "n_contacts",
        r.iter().map(|x| x.n_contacts).collect::<Vec<_>>(),
    )?;
    Ok(((&out.metrics).into(), d))
}

/// Runs every configuration; one `(label, metrics, error)` per row with
/// exactly one of `metrics` and `error` set.
#[pyfunction]
#[pyo3(signature = (configs, threads=0))]
fn compare_methods(
    py: Python<'_>,
    configs: Vec<PyRef<'_, ScenarioConfig>>,
    threads: usize,
) -> PyResult<Vec<(String, Option<RunMetrics>, Option<String>)>> {
    let cs: Vec<_> = configs.iter().map(|c| c.inner.clone()).collect();
    let rows = py
        .detach(|| sc::compare_methods(&cs, threads))
        .map_err(to_py)?;
    Ok(rows
        .into_iter()
        .map(|r| match &r.result {
            Ok(m) => (r.label, Some(m.into()), None),
            Err(e) => (r.label, None, Some(e.to_string())),
        })
        .collect())
}

/// Bisection for the smallest aligning `f_z_ref`. Returns
/// `((lo, hi), [(f_z_ref, aligned), ...])`.
#[pyfunction]
fn min_sliding_force_search(
    py: Python<'_>,
    config: PyRef<'_, ScenarioConfig>,
    f_lo: f64,
    f_hi: f64,
    resolution: f64,
) -> PyResult<((f64, f64), Vec<(f64, bool)>)> {
    let c = config.inner.clone();
    let r = py
        .detach(|| sc::min_sliding_force_search(&c, f_lo, f_hi, resolution))
        .map_err(to_py)?;
    Ok((
        r.bracket,
        r.probes.iter().map(|p| (p.f_z_ref, p.aligned)).collect(),
    ))
}

/// Poses are `(y, z, theta)`; the tip sits `tool_length` below the
/// end-effector origin.
#[pyfunction]
#[pyo3(signature = (ee_pose, target_pose, tol_lateral=1e-3, tol_angle=0.02, tool_length=0.1))]
fn alignment_check(
    ee_pose: (f64, f64, f64),
    target_pose: (f64, f64, f64),
    tol_lateral: f64,
    tol_angle: f64,
    tool_length: f64,
) -> bool {
    let g = FunnelGeometry {
        depth: tool_length,
        ..FunnelGeometry::default()
    };
    sc::alignment_check(
        &PlanarPose::new(ee_pose.0, ee_pose.1, ee_pose.2),
        &PlanarPose::new(target_pose.0, target_pose.1, target_pose.2),
        &g,
        tol_lateral,
        tol_angle,
    )
}

#[pymodule]
fn floatsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SimulationError", m.py().get_type::<SimulationError>())?;
    m.add("DivergenceError", m.py().get_type::<DivergenceError>())?;
    m.add("BracketError", m.py().get_type::<BracketError>())?;
    m.add_class::<Sim1dParams>()?;
    m.add_class::<ScenarioConfig>()?;
    m.add_class::<RunMetrics>()?;
    m.add_function(wrap_pyfunction!(contact_force_1d, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_1d, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(compare_methods, m)?)?;
    m.add_function(wrap_pyfunction!(min_sliding_force_search, m)?)?;
    m.add_function(wrap_pyfunction!(alignment_check, m)?)?;
    Ok(())
}

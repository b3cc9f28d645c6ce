//! Python bindings: weights, conjugates, pair conditions, the reduction,
//! jets, the jet pipeline and the command-line entry point.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ultradiff::cli::resolve_weight;
use ultradiff::conditions::{self, DiscreteSearch, GrowthIndex, IntegralOutcome, PairVerdict, DEFAULT_TOL};
use ultradiff::conjugate;
use ultradiff::jets::{self, MultiIndex, PipelineConfig};
use ultradiff::reduction::{self, DiscreteConstants, ReductionInput, ReductionResult, Which};
use ultradiff::{GeometricGrid, Weight as _};

create_exception!(ultradiff_py, UltradiffError, PyException);

type ClaimRow = (String, bool, f64);

fn err(e: ultradiff::Error) -> PyErr {
    UltradiffError::new_err(e.to_string())
}

fn grid_of(grid: Option<(f64, f64, usize)>) -> PyResult<GeometricGrid> {
    match grid {
        Some((lo, hi, n)) => GeometricGrid::new(lo, hi, n).map_err(err),
        None => Ok(GeometricGrid::default()),
    }
}

/// A weight function given by an expression in `t`.
#[pyclass(module = "ultradiff_py", frozen)]
struct Weight {
    inner: ultradiff::WeightFunction,
}

#[pymethods]
impl Weight {
    #[new]
    #[pyo3(signature = (expr, t_min = None))]
    fn new(expr: &str, t_min: Option<f64>) -> PyResult<Self> {
        Ok(Weight { inner: resolve_weight(expr, t_min).map_err(err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn t_min(&self) -> f64 {
        self.inner.t_min
    }

    fn __call__(&self, t: f64) -> PyResult<f64> {
        self.inner.eval(t).map_err(err)
    }

    fn derivative(&self, t: f64) -> PyResult<f64> {
        self.inner.derivative(t).map_err(err)
    }

    /// `(φ*(y), argmax)` for the normalized weight.
    fn conjugate(&self, y: f64) -> PyResult<(f64, f64)> {
        let p = conjugate::weight_conjugate(&self.inner, y).map_err(err)?;
        Ok((p.value, p.argmax))
    }

    fn weight_matrix(&self, x: f64, k_max: usize) -> PyResult<Vec<f64>> {
        let m = conjugate::weight_matrix(&self.inner, x, k_max).map_err(err)?;
        Ok(m.log_entries.iter().map(|l| l.exp()).collect())
    }

    /// Axiom verdicts keyed by check name.
    #[pyo3(signature = (grid = None))]
    fn check_axioms<'py>(&self, py: Python<'py>, grid: Option<(f64, f64, usize)>) -> PyResult<Bound<'py, PyDict>> {
        let r = ultradiff::check_weight_axioms(&self.inner, &grid_of(grid)?).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("increasing", r.increasing.verdict.as_str())?;
        d.set_item("moderate_growth", r.moderate_growth.check.verdict.as_str())?;
        d.set_item("c2", r.moderate_growth.c2)?;
        d.set_item("log_small", r.log_small.verdict.as_str())?;
        d.set_item("phi_convex", r.phi_convex.verdict.as_str())?;
        d.set_item("concave", r.concave.verdict.as_str())?;
        d.set_item("is_weight", r.is_weight().as_str())?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Weight({:?}, t_min={})", self.inner.name, self.inner.t_min)
    }
}

fn verdict_dict<'py>(py: Python<'py>, pv: &PairVerdict) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("condition", pv.condition.to_string())?;
    d.set_item("verdict", pv.verdict.as_str())?;
    if let Some(c) = pv.constants {
        d.set_item("C", c.c)?;
        d.set_item("K", c.k)?;
        d.set_item("H", c.h)?;
        d.set_item("t0", c.t0)?;
    }
    let witnesses: Vec<(f64, u32, f64)> = pv.witnesses.iter().map(|w| (w.t, w.j, w.value)).collect();
    d.set_item("witnesses", witnesses)?;
    for (k, v) in &pv.details {
        d.set_item(k, *v)?;
    }
    Ok(d)
}

#[pyfunction]
fn parse_expression(text: &str) -> PyResult<String> {
    ultradiff::expr::parse_expression(text).map(|e| e.to_string()).map_err(|e| err(e.into()))
}

#[pyfunction]
fn check_nonquasianalytic<'py>(py: Python<'py>, w: &Weight) -> PyResult<Bound<'py, PyDict>> {
    verdict_dict(py, &conditions::check_nonquasianalytic(&w.inner, DEFAULT_TOL).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (w, sigma, r, grid = None))]
fn check_r_strong<'py>(
    py: Python<'py>,
    w: &Weight,
    sigma: &Weight,
    r: f64,
    grid: Option<(f64, f64, usize)>,
) -> PyResult<Bound<'py, PyDict>> {
    let pv = conditions::check_r_strong(&w.inner, &sigma.inner, r, &grid_of(grid)?, DEFAULT_TOL).map_err(err)?;
    verdict_dict(py, &pv)
}

#[pyfunction]
fn check_discrete_condition<'py>(py: Python<'py>, w: &Weight, sigma: &Weight) -> PyResult<Bound<'py, PyDict>> {
    let pv = conditions::check_discrete_condition(&w.inner, &sigma.inner, &DiscreteSearch::default()).map_err(err)?;
    verdict_dict(py, &pv)
}

/// `(gamma, lo, hi)`; `hi` is infinite for a lower bound only and the result
/// is `None` when the pair is not even 1-strong.
#[pyfunction]
#[pyo3(signature = (sigma, w, tol = 0.02))]
fn growth_index(sigma: &Weight, w: &Weight, tol: f64) -> PyResult<Option<(f64, f64, f64)>> {
    Ok(match conditions::growth_index(&sigma.inner, &w.inner, tol, &conditions::growth_index_grid()).map_err(err)? {
        GrowthIndex::Estimate { gamma, lo, hi } => Some((gamma, lo, hi)),
        GrowthIndex::AtLeast(g) => Some((g, g, f64::INFINITY)),
        GrowthIndex::BelowOne => None,
    })
}

/// `κ(t)`, or `None` if the integral diverges or is inconclusive.
#[pyfunction]
fn kappa(w: &Weight, t: f64) -> PyResult<Option<f64>> {
    Ok(match conditions::kappa(&w.inner, t, DEFAULT_TOL).map_err(err)? {
        IntegralOutcome::Converged { value, .. } => Some(value),
        _ => None,
    })
}

/// The weights `ω̃`, `σ̃` built from `(ω, σ, f)`.
#[pyclass(module = "ultradiff_py", frozen)]
struct Reduction {
    inner: ReductionResult,
}

fn which(name: &str) -> PyResult<Which> {
    match name {
        "omega" => Ok(Which::Omega),
        "sigma" => Ok(Which::Sigma),
        other => Err(UltradiffError::new_err(format!("expected 'omega' or 'sigma', got {other:?}"))),
    }
}

#[pymethods]
impl Reduction {
    #[new]
    #[pyo3(signature = (w, sigma, f, n_max, nq = false))]
    fn new(w: &Weight, sigma: &Weight, f: &Weight, n_max: usize, nq: bool) -> PyResult<Self> {
        let pv = conditions::check_discrete_condition(&w.inner, &sigma.inner, &DiscreteSearch::default()).map_err(err)?;
        let constants = DiscreteConstants::from_verdict(&pv)
            .filter(|_| pv.verdict.holds())
            .ok_or_else(|| UltradiffError::new_err(format!("discrete condition is {}", pv.verdict)))?;
        let input = ReductionInput {
            w: Arc::new(w.inner.clone()),
            sigma: Arc::new(sigma.inner.clone()),
            f: Arc::new(f.inner.clone()),
            constants,
            n_max,
            enforce_nq: nq,
        };
        Ok(Reduction { inner: reduction::build_reduction(input).map_err(err)? })
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.x.clone()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y.clone()
    }

    #[getter]
    fn z(&self) -> Vec<f64> {
        self.inner.z.clone()
    }

    /// Evaluates `ω̃` (`"omega"`) or `σ̃` (`"sigma"`) on `[x_2, x_N]`.
    fn eval(&self, which_name: &str, t: f64) -> PyResult<f64> {
        self.inner.eval_tilde(which(which_name)?, t).map_err(err)
    }

    /// `(all_hold, [(claim, holds, min_margin), ...])`.
    #[pyo3(signature = (grid_per_segment = 32))]
    fn validate(&self, grid_per_segment: usize) -> PyResult<(bool, Vec<ClaimRow>)> {
        let v = reduction::validate_reduction(&self.inner, grid_per_segment).map_err(err)?;
        Ok((v.all_hold(), v.claims.iter().map(|c| (c.name.clone(), c.holds, c.min_margin)).collect()))
    }

    fn sequence_csv(&self) -> String {
        self.inner.sequence_csv()
    }
}

/// Whitney jet on a finite point set, read from the line-based text format.
#[pyclass(module = "ultradiff_py", frozen)]
struct Jet {
    inner: jets::Jet,
}

#[pymethods]
impl Jet {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Jet { inner: jets::parse_jet(text).map_err(err)? })
    }

    /// One-dimensional jet with `values[i][k] = F^k(points[i])`.
    #[staticmethod]
    fn from_values(points: Vec<f64>, values: Vec<Vec<f64>>) -> PyResult<Self> {
        let pcap = values.first().map_or(0, |r| r.len().saturating_sub(1)) as u32;
        let entries: Vec<(usize, MultiIndex, f64)> = values
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(k, v)| (i, MultiIndex(vec![k as u32]), *v)))
            .collect();
        let pts = points.into_iter().map(|p| vec![p]).collect();
        Ok(Jet { inner: jets::Jet::from_entries(1, pts, pcap, entries).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn pcap(&self) -> u32 {
        self.inner.pcap()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn remainder(&self, x: usize, y: usize, alpha: Vec<u32>, p: u32) -> PyResult<f64> {
        self.inner.remainder(x, y, &MultiIndex(alpha), p).map_err(err)
    }

    /// `(norm, seminorm)` for the Beurling parameter `m`.
    fn beurling_seminorms(&self, w: &Weight, m: u32, p_max: u32) -> PyResult<(f64, f64)> {
        let s = jets::beurling_seminorms(&self.inner, &w.inner, m, p_max).map_err(err)?;
        Ok((s.norm, s.seminorm))
    }

    /// `(a, b, g)` sequences of the growth profile.
    fn growth_profile(&self, p_max: u32) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let g = jets::jet_growth_profile(&self.inner, p_max, false).map_err(err)?;
        Ok((g.a, g.b, g.g))
    }

    /// Smallest `x` in the grid with stable Roumieu sups, if any.
    fn roumieu_membership(&self, w: &Weight, x_grid: Vec<f64>, p_max: u32) -> PyResult<Option<f64>> {
        Ok(jets::roumieu_membership(&self.inner, &w.inner, &x_grid, p_max).map_err(err)?.x)
    }
}

/// Runs the jet pipeline. Returns a dict with `passed`, `stages` and `b`;
/// a failed hypothesis gives `passed = False` with `failed_stage` and
/// `witness`.
#[pyfunction]
#[pyo3(signature = (jet, w, sigma, j_max = 24, p_max = 30, n_max = 4))]
fn pipeline<'py>(
    py: Python<'py>,
    jet: &Jet,
    w: &Weight,
    sigma: &Weight,
    j_max: usize,
    p_max: u32,
    n_max: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = PipelineConfig { j_max, p_max, n_max, ..PipelineConfig::default() };
    let d = PyDict::new(py);
    match jets::beurling_to_roumieu_pipeline(&jet.inner, &w.inner, &sigma.inner, &cfg) {
        Ok(rep) => {
            d.set_item("passed", rep.passed())?;
            let stages: Vec<(&str, bool, String)> = rep.stages.iter().map(|s| (s.name, s.passed, s.detail.clone())).collect();
            d.set_item("stages", stages)?;
            d.set_item("b", rep.b)?;
            d.set_item("membership_x", rep.membership_sigma.x)?;
        }
        Err(ultradiff::Error::Stage { stage, witness }) => {
            d.set_item("passed", false)?;
            d.set_item("failed_stage", stage)?;
            d.set_item("witness", witness)?;
        }
        Err(e) => return Err(err(e)),
    }
    Ok(d)
}

/// Runs the command line with `args` (without the program name) and returns
/// `(exit_code, stdout, stderr)`.
#[pyfunction]
fn run_cli(args: Vec<String>) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut errs = Vec::new();
    let code = ultradiff::cli::run(std::iter::once("ultradiff".to_string()).chain(args), &mut out, &mut errs);
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&errs).into_owned())
}

#[pymodule]
fn ultradiff_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("UltradiffError", m.py().get_type::<UltradiffError>())?;
    m.add_class::<Weight>()?;
    m.add_class::<Reduction>()?;
    m.add_class::<Jet>()?;
    m.add_function(wrap_pyfunction!(parse_expression, m)?)?;
    m.add_function(wrap_pyfunction!(check_nonquasianalytic, m)?)?;
    m.add_function(wrap_pyfunction!(check_r_strong, m)?)?;
    m.add_function(wrap_pyfunction!(check_discrete_condition, m)?)?;
    m.add_function(wrap_pyfunction!(growth_index, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}

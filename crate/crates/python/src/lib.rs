//! Python bindings. Potentials and gap sets are opaque handles built from
//! keyword constructors or from the same JSON accepted by the CLI.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use schreg::martin::{self, CriticalPoints};
use schreg::propagation::{self, DEFAULT_STEP};
use schreg::{periodic, regularity, PotentialSpec, RegularityConfig, SpectralPoint};

create_exception!(pyschreg, SchregError, PyException);

fn py_err(e: impl std::fmt::Display) -> PyErr {
    SchregError::new_err(e.to_string())
}

#[pyclass(name = "Potential", frozen, module = "pyschreg")]
struct PyPotential {
    inner: PotentialSpec,
}

impl PyPotential {
    fn checked(inner: PotentialSpec) -> PyResult<Self> {
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }
}

#[pymethods]
impl PyPotential {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::checked(serde_json::from_str(text).map_err(py_err)?)
    }

    #[staticmethod]
    fn constant(value: f64) -> PyResult<Self> {
        Self::checked(PotentialSpec::Constant { value })
    }

    #[staticmethod]
    fn decaying(amplitude: f64, rate: f64) -> PyResult<Self> {
        Self::checked(PotentialSpec::decaying(amplitude, rate))
    }

    #[staticmethod]
    fn periodic_square(delta: f64) -> PyResult<Self> {
        Self::checked(PotentialSpec::periodic_square(delta))
    }

    #[staticmethod]
    fn oscillating_example() -> Self {
        Self {
            inner: PotentialSpec::OscillatingExample,
        }
    }

    #[staticmethod]
    fn sparse_squares(width: f64) -> PyResult<Self> {
        Self::checked(PotentialSpec::sparse_squares(width))
    }

    #[staticmethod]
    fn piecewise_constant(breakpoints: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        Self::checked(PotentialSpec::PiecewiseConstant { breakpoints, values })
    }

    #[staticmethod]
    fn random(seed: u64, cell_width: f64, low: f64, high: f64) -> PyResult<Self> {
        Self::checked(PotentialSpec::Random {
            seed,
            cell_width,
            low,
            high,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(py_err)
    }

    fn __call__(&self, x: f64) -> f64 {
        self.inner.evaluate(x)
    }

    /// `(∫ V, ∫ |V|)` over `[a, b]`.
    fn integrals(&self, a: f64, b: f64) -> (f64, f64) {
        self.inner.integrals(a, b)
    }

    /// `(averages, abs_averages)` of the running Cesàro means.
    fn cesaro(&self, x_grid: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let c = self.inner.cesaro_trace(&x_grid).map_err(py_err)?;
        Ok((c.averages, c.abs_averages))
    }

    /// The spectrum the regularity report compares against.
    fn stated_spectrum(&self) -> PyResult<PyGapSet> {
        let (gs, _) = regularity::stated_spectrum(&self.inner).map_err(py_err)?;
        PyGapSet::build(gs)
    }

    fn __repr__(&self) -> String {
        format!("Potential({:?})", self.inner)
    }
}

/// A finite-gap set together with its solved critical points.
#[pyclass(name = "GapSet", frozen, module = "pyschreg")]
struct PyGapSet {
    inner: schreg::GapSet,
    cp: CriticalPoints,
}

impl PyGapSet {
    fn build(inner: schreg::GapSet) -> PyResult<Self> {
        let cp = martin::solve_critical_points(&inner).map_err(py_err)?;
        Ok(Self { inner, cp })
    }
}

#[pymethods]
impl PyGapSet {
    #[new]
    #[pyo3(signature = (b0, gaps = Vec::new()))]
    fn new(b0: f64, gaps: Vec<(f64, f64)>) -> PyResult<Self> {
        let gaps = gaps.into_iter().map(|(a, b)| [a, b]).collect();
        Self::build(schreg::GapSet::new(b0, gaps).map_err(py_err)?)
    }

    #[getter]
    fn b0(&self) -> f64 {
        self.inner.b0
    }

    #[getter]
    fn gaps(&self) -> Vec<(f64, f64)> {
        self.inner.gaps.iter().map(|g| (g[0], g[1])).collect()
    }

    #[getter]
    fn critical_points(&self) -> Vec<f64> {
        self.cp.c.clone()
    }

    fn __contains__(&self, x: f64) -> bool {
        self.inner.contains(x)
    }

    fn martin(&self, z: Complex64) -> PyResult<f64> {
        Ok(martin::martin_function(&self.inner, &self.cp, z).map_err(py_err)?.m)
    }

    /// `iΘ′(z)`
    fn theta_prime(&self, z: Complex64) -> PyResult<Complex64> {
        martin::theta_prime(&self.inner, &self.cp, z).map_err(py_err)
    }

    fn a_constant(&self) -> f64 {
        martin::a_constant(&self.inner, &self.cp)
    }

    fn measure_cdf(&self, lambda_grid: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(martin::martin_measure_cdf(&self.inner, &self.cp, &lambda_grid)
            .map_err(py_err)?
            .cdf)
    }

    fn __repr__(&self) -> String {
        format!("GapSet(b0={}, gaps={:?})", self.inner.b0, self.inner.gaps)
    }
}

/// `(m, log_scale)` with `T = e^{log_scale} m` acting on `(u′, u)`.
#[pyfunction]
#[pyo3(signature = (potential, x, z, step = DEFAULT_STEP))]
fn transfer_matrix(
    potential: &PyPotential,
    x: f64,
    z: Complex64,
    step: f64,
) -> PyResult<([[Complex64; 2]; 2], f64)> {
    let t = propagation::transfer_matrix(&potential.inner, x, SpectralPoint::new(z), step).map_err(py_err)?;
    Ok((t.m, t.log_scale))
}

/// `(u, u′, log_scale)` for the solution with `u(0) = 0`, `u′(0) = 1`.
#[pyfunction]
#[pyo3(signature = (potential, x, z, step = DEFAULT_STEP))]
fn dirichlet_solution(
    potential: &PyPotential,
    x: f64,
    z: Complex64,
    step: f64,
) -> PyResult<(Complex64, Complex64, f64)> {
    propagation::dirichlet_solution(&potential.inner, x, SpectralPoint::new(z), step).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (potential, x, z, step = DEFAULT_STEP))]
fn log_growth(potential: &PyPotential, x: f64, z: Complex64, step: f64) -> PyResult<f64> {
    propagation::log_growth(&potential.inner, x, SpectralPoint::new(z), step).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (potential, x, z, step = DEFAULT_STEP))]
fn lyapunov_estimate(potential: &PyPotential, x: f64, z: Complex64, step: f64) -> PyResult<f64> {
    propagation::lyapunov_estimate(&potential.inner, x, SpectralPoint::new(z), step).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (potential, x, lam, step = DEFAULT_STEP))]
fn eigenvalue_count(potential: &PyPotential, x: f64, lam: f64, step: f64) -> PyResult<u64> {
    propagation::eigenvalue_count(&potential.inner, x, lam, step).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (potential, x, lambda_grid, step = DEFAULT_STEP))]
fn zero_counting_cdf(potential: &PyPotential, x: f64, lambda_grid: Vec<f64>, step: f64) -> PyResult<Vec<f64>> {
    Ok(propagation::zero_counting_cdf(&potential.inner, x, &lambda_grid, step)
        .map_err(py_err)?
        .cdf)
}

#[pyfunction]
#[pyo3(signature = (potential, period, lam, step = DEFAULT_STEP))]
fn discriminant(potential: &PyPotential, period: f64, lam: f64, step: f64) -> PyResult<f64> {
    periodic::discriminant(&potential.inner, period, lam, step).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (potential, period, window, resolution = 2000, step = DEFAULT_STEP))]
fn band_spectrum(
    potential: &PyPotential,
    period: f64,
    window: (f64, f64),
    resolution: usize,
    step: f64,
) -> PyResult<Vec<(f64, f64)>> {
    let b = periodic::band_spectrum(&potential.inner, period, window, resolution, step).map_err(py_err)?;
    Ok(b.bands.iter().map(|e| (e[0], e[1])).collect())
}

/// The full report as a JSON string. `config` is a JSON object in the format
/// of the CLI's `regularity` section; omitted fields take their defaults.
#[pyfunction]
#[pyo3(signature = (potential, spectrum, config = None))]
fn regularity_report(py: Python<'_>, potential: &PyPotential, spectrum: &PyGapSet, config: Option<&str>) -> PyResult<String> {
    let config: RegularityConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(py_err)?,
        None => RegularityConfig::default(),
    };
    let (p, e) = (potential.inner.clone(), spectrum.inner.clone());
    let report = py
        .detach(move || regularity::regularity_report(&p, &e, &config))
        .map_err(py_err)?;
    serde_json::to_string(&report).map_err(py_err)
}

#[pymodule]
fn pyschreg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SchregError", m.py().get_type::<SchregError>())?;
    m.add("DEFAULT_STEP", DEFAULT_STEP)?;
    m.add_class::<PyPotential>()?;
    m.add_class::<PyGapSet>()?;
    m.add_function(wrap_pyfunction!(transfer_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(dirichlet_solution, m)?)?;
    m.add_function(wrap_pyfunction!(log_growth, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalue_count, m)?)?;
    m.add_function(wrap_pyfunction!(zero_counting_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(discriminant, m)?)?;
    m.add_function(wrap_pyfunction!(band_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(regularity_report, m)?)?;
    Ok(())
}

//! Python bindings: integrals, qubit Hamiltonians, end-to-end runs and the
//! surrogate refinement step.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qdmet::dmet::{build_bath, build_embedded_hamiltonian, qubit_problem, BathCount, FragmentSpec};
use qdmet::integrals::{run_rhf, to_fcidump};
use qdmet::operators::group_qubitwise;
use qdmet::oracle::exact_ground_energy;
use qdmet::pipeline::{self, Pipeline, RunSpec};
use qdmet::refine::{refine_parameters, GpModel, Kernel, KernelFamily, RefinementConfig};
use qdmet::vqe::OptHistory;

create_exception!(qdmet_py, QdmetError, PyException);

fn err(e: qdmet::Error) -> PyErr {
    QdmetError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = qdmet::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// One- and two-electron integrals read from an FCIDUMP file.
#[pyclass(module = "qdmet_py", name = "IntegralSet", frozen)]
struct PyIntegralSet {
    inner: qdmet::integrals::IntegralSet,
}

#[pymethods]
impl PyIntegralSet {
    #[new]
    fn new(path: &str) -> PyResult<Self> {
        qdmet::integrals::IntegralSet::from_fcidump_path(path).map(|inner| Self { inner }).map_err(err)
    }

    #[getter]
    fn n_orbitals(&self) -> usize {
        self.inner.n_orbitals
    }

    #[getter]
    fn n_electrons(&self) -> usize {
        self.inner.n_electrons
    }

    #[getter]
    fn e_core(&self) -> f64 {
        self.inner.e_core
    }

    #[getter]
    fn distance(&self) -> Option<f64> {
        self.inner.metadata.distance
    }

    fn h1(&self) -> Vec<Vec<f64>> {
        let h = &self.inner.h1;
        (0..h.nrows()).map(|r| h.row(r).iter().copied().collect()).collect()
    }

    fn rhf_energy(&self) -> PyResult<f64> {
        run_rhf(&self.inner, 500, 1e-10).map(|mf| mf.scf_energy).map_err(err)
    }

    /// Golden FCI energy when available, exact diagonalization otherwise.
    fn fci_energy(&self) -> PyResult<f64> {
        pipeline::reference_energy(&self.inner).map_err(err)
    }

    fn to_fcidump(&self) -> String {
        to_fcidump(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("IntegralSet(n_orbitals={}, n_electrons={})", self.inner.n_orbitals, self.inner.n_electrons)
    }
}

/// Qubit Hamiltonian as weighted Pauli strings.
#[pyclass(module = "qdmet_py", name = "PauliSum", frozen)]
struct PyPauliSum {
    inner: qdmet::operators::PauliSum,
}

#[pymethods]
impl PyPauliSum {
    /// Parses `coefficient LABEL` lines.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        qdmet::operators::PauliSum::from_text(text).map(|inner| Self { inner }).map_err(err)
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn terms(&self) -> Vec<(String, f64)> {
        self.inner.iter().map(|(p, c)| (p.label(), c)).collect()
    }

    /// Qubit-wise commuting measurement groups of the non-identity strings.
    fn groups(&self) -> Vec<Vec<String>> {
        group_qubitwise(&self.inner)
            .iter()
            .map(|g| g.strings.iter().map(|s| s.label()).collect())
            .collect()
    }

    #[pyo3(signature = (n_electrons=None))]
    fn ground_energy(&self, n_electrons: Option<usize>) -> PyResult<f64> {
        exact_ground_energy(&self.inner, n_electrons).map(|r| r.ground_energy()).map_err(err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!("PauliSum(n_qubits={}, terms={})", self.inner.n_qubits(), self.inner.len())
    }
}

/// Jordan-Wigner Hamiltonian of one embedded fragment, tapered by default.
#[pyfunction]
#[pyo3(signature = (ints, fragments, bath_count="auto", index=0, taper=true, mu=0.0))]
fn fragment_hamiltonian(
    ints: &PyIntegralSet,
    fragments: &str,
    bath_count: &str,
    index: usize,
    taper: bool,
    mu: f64,
) -> PyResult<PyPauliSum> {
    let frags = FragmentSpec::parse_list(fragments).map_err(err)?;
    FragmentSpec::validate_partition(&frags, ints.inner.n_orbitals).map_err(err)?;
    let frag = frags
        .get(index)
        .ok_or_else(|| QdmetError::new_err(format!("fragment {index} does not exist")))?;
    let mf = run_rhf(&ints.inner, 500, 1e-10).map_err(err)?;
    let bath = build_bath(&mf, frag, parse::<BathCount>(bath_count)?).map_err(err)?;
    let problem = build_embedded_hamiltonian(&ints.inner, &bath, mu).map_err(err)?;
    let qp = qubit_problem(&problem, taper).map_err(err)?;
    Ok(PyPauliSum { inner: qp.tapered })
}

/// Runs a pipeline on one fixture and returns the result row as a dict.
#[pyfunction]
#[pyo3(signature = (
    fcidump, pipeline="dmet-vqe", fragments=None, bath_count="auto", noise="none", shots="exact", seed=0,
    rdm_backend="noisy", refine=false, nu=5.5, regularizer=1e-4, c=1.0, max_dmet_cycles=10, spsa_iterations=200,
))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    fcidump: &str,
    pipeline: &str,
    fragments: Option<&str>,
    bath_count: &str,
    noise: &str,
    shots: &str,
    seed: u64,
    rdm_backend: &str,
    refine: bool,
    nu: f64,
    regularizer: f64,
    c: f64,
    max_dmet_cycles: usize,
    spsa_iterations: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = RunSpec {
        fragments: fragments.map(FragmentSpec::parse_list).transpose().map_err(err)?,
        bath: parse(bath_count)?,
        noise: noise.to_string(),
        shots: parse(shots)?,
        seed,
        rdm_backend: parse(rdm_backend)?,
        refine,
        nu,
        lambda: regularizer,
        c,
        max_cycles: max_dmet_cycles,
        spsa_iterations,
        ..RunSpec::new(fcidump, parse::<Pipeline>(pipeline)?)
    };
    let out = py.detach(|| pipeline::run(&spec)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("distance", out.distance)?;
    d.set_item("method", &out.method)?;
    d.set_item("energy", out.energy)?;
    d.set_item("abs_error", out.abs_error())?;
    d.set_item("e_fci", out.e_fci)?;
    d.set_item("wall_time_s", out.wall_time)?;
    d.set_item("seed", out.seed)?;
    d.set_item("config_hash", &out.config_hash)?;
    d.set_item("cycles", out.cycles)?;
    d.set_item("mu", out.mu)?;
    let qubits: Vec<(usize, usize)> = out.fragments.iter().map(|f| (f.n_qubits, f.n_qubits_tapered)).collect();
    d.set_item("qubits", qubits)?;
    Ok(d)
}

/// Posterior mean and standard deviation of a Matern surrogate at `theta`.
#[pyfunction]
#[pyo3(signature = (x, y, theta, nu=5.5, length_scale=1.0, regularizer=1e-4))]
fn gp_posterior(x: Vec<Vec<f64>>, y: Vec<f64>, theta: Vec<f64>, nu: f64, length_scale: f64, regularizer: f64) -> PyResult<(f64, f64)> {
    let kernel = Kernel { family: KernelFamily::matern(nu).map_err(err)?, length_scale };
    let gp = GpModel::new(kernel, regularizer, x, y).map_err(err)?;
    gp.posterior(&theta).map_err(err)
}

/// Refines the parameters recorded in an optimizer-history CSV.
#[pyfunction]
#[pyo3(signature = (path, nu=5.5, regularizer=1e-4, c=1.0, seed=0))]
fn refine_history<'py>(py: Python<'py>, path: &str, nu: f64, regularizer: f64, c: f64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let file = std::fs::File::open(path).map_err(|e| err(e.into()))?;
    let history = OptHistory::read_csv(file).map_err(err)?;
    let cfg = RefinementConfig { c, seed, ..Default::default() };
    let r = refine_parameters(&history, KernelFamily::matern(nu).map_err(err)?, regularizer, &cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("theta", r.theta)?;
    d.set_item("mu", r.mu)?;
    d.set_item("sigma", r.sigma)?;
    d.set_item("length_scale", r.kernel.length_scale)?;
    Ok(d)
}

#[pymodule]
pub fn qdmet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QdmetError", m.py().get_type::<QdmetError>())?;
    m.add_class::<PyIntegralSet>()?;
    m.add_class::<PyPauliSum>()?;
    m.add_function(wrap_pyfunction!(fragment_hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(gp_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(refine_history, m)?)?;
    Ok(())
}

//! Python bindings: lattices, states, circuits, gate evolution, BP
//! diagnostics, boundary-MPS contraction and sampling.

use std::path::PathBuf;

use planartn::boundary::{self, FitOptions, Partitioning, PauliString, Strategy};
use planartn::bp::{self, BpOptions};
use planartn::circuit::{self, BpPolicy, RunOptions};
use planartn::network::{Bitstring, NetworkGraph, TensorNetworkState};
use planartn::sampler::{self, SamplerConfig};
use planartn::C64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: planartn::Error) -> PyErr {
    use planartn::Error as E;
    match e {
        E::Io(e) => PyIOError::new_err(e.to_string()),
        E::Numerical(_) | E::Degenerate(_) | E::NotPsd(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for planartn::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Serialize through JSON into plain Python dicts and lists.
fn to_object<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse<T: std::str::FromStr<Err = planartn::Error>>(s: &str) -> PyResult<T> {
    s.parse().py_err()
}

/// Undirected planar graph with optional 2D coordinates.
#[pyclass(name = "Graph", module = "planartn", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGraph(NetworkGraph);

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (n, edges, coords=None))]
    fn new(n: usize, edges: Vec<(usize, usize)>, coords: Option<Vec<[f64; 2]>>) -> PyResult<Self> {
        NetworkGraph::new(n, edges, coords).py_err().map(PyGraph)
    }

    #[staticmethod]
    fn chain(n: usize) -> PyResult<Self> {
        NetworkGraph::chain(n).py_err().map(PyGraph)
    }

    #[staticmethod]
    fn grid(rows: usize, cols: usize) -> PyResult<Self> {
        NetworkGraph::grid(rows, cols).py_err().map(PyGraph)
    }

    #[staticmethod]
    fn rotated_square(rows: usize, cols: usize) -> PyResult<Self> {
        NetworkGraph::rotated_square(rows, cols).py_err().map(PyGraph)
    }

    #[staticmethod]
    fn heavy_hex(cell_rows: usize, cell_cols: usize) -> PyResult<Self> {
        NetworkGraph::heavy_hex(cell_rows, cell_cols).py_err().map(PyGraph)
    }

    /// One of the bundled processor and molecule lattices.
    #[staticmethod]
    fn bundled(name: &str) -> PyResult<Self> {
        NetworkGraph::bundled(name)
            .map(PyGraph)
            .ok_or_else(|| PyValueError::new_err(format!("unknown lattice {name:?}")))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        NetworkGraph::from_json(text).py_err().map(PyGraph)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        NetworkGraph::load(&path).py_err().map(PyGraph)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).py_err()
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.0.num_vertices()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges().to_vec()
    }

    #[getter]
    fn coords(&self) -> Option<Vec<[f64; 2]>> {
        self.0.coords().map(<[_]>::to_vec)
    }

    fn neighbors(&self, v: usize) -> PyResult<Vec<usize>> {
        if v >= self.0.num_vertices() {
            return Err(PyValueError::new_err(format!("vertex {v} out of range")));
        }
        Ok(self.0.neighbors(v).to_vec())
    }

    fn coordination_number(&self) -> usize {
        self.0.coordination_number()
    }

    /// Vertex cycles of the primitive loops.
    fn primitive_loops(&self) -> Vec<Vec<usize>> {
        self.0.primitive_loops().into_iter().map(|l| l.vertices).collect()
    }

    fn domain_wall_bits(&self) -> String {
        self.0.domain_wall_bits().iter().map(|b| char::from(b'0' + b)).collect()
    }

    fn __repr__(&self) -> String {
        format!("Graph(num_vertices={}, num_edges={})", self.0.num_vertices(), self.0.edges().len())
    }
}

/// Tensor network state: one tensor per qubit on the graph.
#[pyclass(name = "State", module = "planartn", skip_from_py_object)]
#[derive(Clone)]
struct PyState(TensorNetworkState);

#[pymethods]
impl PyState {
    /// Computational basis state from a bitstring such as "0110".
    #[staticmethod]
    fn product(graph: &PyGraph, bits: &str) -> PyResult<Self> {
        TensorNetworkState::product_state(&graph.0, &parse(bits)?).py_err().map(PyState)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        TensorNetworkState::load(&path).py_err().map(PyState)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).py_err()
    }

    #[getter]
    fn graph(&self) -> PyGraph {
        PyGraph(self.0.graph().clone())
    }

    #[getter]
    fn num_qubits(&self) -> usize {
        self.0.num_qubits()
    }

    #[getter]
    fn max_bond_dim(&self) -> usize {
        self.0.max_bond_dim()
    }

    /// Bytes held by the site tensors.
    #[getter]
    fn memory_footprint(&self) -> usize {
        self.0.memory_footprint()
    }

    fn bond_dim(&self, u: usize, v: usize) -> Option<usize> {
        self.0.bond_dim(u, v)
    }

    /// Dense statevector; qubit 0 is the most significant bit.
    fn to_dense(&self, py: Python<'_>) -> PyResult<Vec<C64>> {
        py.detach(|| self.0.to_dense()).py_err()
    }

    fn amplitude_exact(&self, py: Python<'_>, bits: &str) -> PyResult<C64> {
        let x: Bitstring = parse(bits)?;
        py.detach(|| self.0.amplitude_exact(&x)).py_err()
    }

    fn norm_sqr_exact(&self, py: Python<'_>) -> PyResult<f64> {
        py.detach(|| self.0.norm_sqr_exact()).py_err()
    }

    /// Rescale to unit norm, given `<psi|psi>` (computed exactly if omitted).
    #[pyo3(signature = (norm_sqr=None))]
    fn normalize(&mut self, py: Python<'_>, norm_sqr: Option<f64>) -> PyResult<()> {
        let z = match norm_sqr {
            Some(z) => z,
            None => py.detach(|| self.0.norm_sqr_exact()).py_err()?,
        };
        self.0.normalize_with(z).py_err()
    }

    fn __repr__(&self) -> String {
        format!("State(num_qubits={}, max_bond_dim={})", self.0.num_qubits(), self.0.max_bond_dim())
    }
}

/// Layered gate sequence.
#[pyclass(name = "Circuit", module = "planartn", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCircuit(circuit::Circuit);

#[pymethods]
impl PyCircuit {
    /// First-order Trotter circuit for the Heisenberg model on the graph.
    #[staticmethod]
    #[pyo3(signature = (graph, steps, j=1.0, dt=0.1))]
    fn heisenberg(graph: &PyGraph, steps: usize, j: f64, dt: f64) -> PyResult<Self> {
        circuit::heisenberg_trotter_circuit(&graph.0, j, dt, steps).py_err().map(PyCircuit)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        circuit::Circuit::from_json(text).py_err().map(PyCircuit)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        circuit::Circuit::load(&path).py_err().map(PyCircuit)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn num_qubits(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn num_gates(&self) -> usize {
        self.0.num_gates()
    }

    #[getter]
    fn num_layers(&self) -> usize {
        self.0.layers.len()
    }
}

fn run_options(chi: usize, cutoff: Option<f64>, bp_policy: &str) -> PyResult<RunOptions> {
    let mut opts = RunOptions::with_chi(chi);
    if let Some(c) = cutoff {
        opts.cutoff = c;
    }
    opts.bp_policy = parse::<BpPolicy>(bp_policy)?;
    Ok(opts)
}

fn partitioning(state: &TensorNetworkState, partition: &str) -> PyResult<Partitioning> {
    Partitioning::new(state.graph(), parse::<Strategy>(partition)?).py_err()
}

/// Evolve `state` through `circuit` at bond dimension `chi`.
///
/// Returns the new state and the gate log as a dict with per-gate errors,
/// BP runs and the fidelity estimate.
#[pyfunction]
#[pyo3(signature = (state, circuit, chi=16, cutoff=None, bp_policy="per-layer"))]
fn run<'py>(
    py: Python<'py>,
    state: &PyState,
    circuit: &PyCircuit,
    chi: usize,
    cutoff: Option<f64>,
    bp_policy: &str,
) -> PyResult<(PyState, Bound<'py, PyAny>)> {
    let opts = run_options(chi, cutoff, bp_policy)?;
    let (out, log) = py.detach(|| circuit::run_circuit(state.0.clone(), &circuit.0, &opts)).py_err()?;
    Ok((PyState(out), to_object(py, &log)?))
}

/// BP estimate of `<psi|psi>`.
#[pyfunction]
fn bp_norm(py: Python<'_>, state: &PyState) -> PyResult<f64> {
    py.detach(|| {
        let env = bp::run_bp(&state.0, &BpOptions::default())?;
        bp::bp_norm(&state.0, &env).map(|n| n.value)
    })
    .py_err()
}

/// Per-loop BP errors and their mean.
#[pyfunction]
fn loop_error<'py>(py: Python<'py>, state: &PyState) -> PyResult<Bound<'py, PyAny>> {
    let rep = py
        .detach(|| {
            let env = bp::run_bp(&state.0, &BpOptions::default())?;
            bp::loop_error(&state.0, &env)
        })
        .py_err()?;
    to_object(py, &rep)
}

/// `<psi|psi>` from boundary MPS of rank `rank`.
#[pyfunction]
#[pyo3(signature = (state, rank, partition="columns"))]
fn norm_sqr(py: Python<'_>, state: &PyState, rank: usize, partition: &str) -> PyResult<f64> {
    let part = partitioning(&state.0, partition)?;
    py.detach(|| boundary::norm_environments(&state.0, &part, rank, &FitOptions::default()))
        .py_err()
        .map(|env| env.norm_sqr())
}

/// `<x|psi>` from boundary MPS of rank `rank`.
#[pyfunction]
#[pyo3(signature = (state, bits, rank, partition="columns"))]
fn amplitude(py: Python<'_>, state: &PyState, bits: &str, rank: usize, partition: &str) -> PyResult<C64> {
    let x: Bitstring = parse(bits)?;
    let part = partitioning(&state.0, partition)?;
    py.detach(|| boundary::amplitude(&state.0, &x, &part, rank, &FitOptions::default())).py_err()
}

/// Normalized expectation of a Pauli string such as "Z5" or "X0 X1".
#[pyfunction]
#[pyo3(signature = (state, observable, rank, partition="columns"))]
fn expectation(py: Python<'_>, state: &PyState, observable: &str, rank: usize, partition: &str) -> PyResult<f64> {
    let obs: PauliString = parse(observable)?;
    let part = partitioning(&state.0, partition)?;
    py.detach(|| boundary::expectation(&state.0, &obs, &part, rank, &FitOptions::default())).py_err()
}

/// Draw `n` bitstrings with boundary-MPS ranks `rank_x` (amplitude side) and
/// `rank` (norm side).
///
/// Returns `(records, report)`: a list of dicts with `x`, `q`, `p`, `ratio`,
/// and a dict with the KLD, the norm estimate and diagnostics.
#[pyfunction]
#[pyo3(signature = (state, rank, n=1000, seed=0, rank_x=None, verify_rank=None, partition="columns", magnetization=None))]
#[allow(clippy::too_many_arguments)]
fn sample<'py>(
    py: Python<'py>,
    state: &PyState,
    rank: usize,
    n: usize,
    seed: u64,
    rank_x: Option<usize>,
    verify_rank: Option<usize>,
    partition: &str,
    magnetization: Option<i64>,
) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let part = partitioning(&state.0, partition)?;
    let mut cfg = SamplerConfig::new(rank, state.0.max_bond_dim(), n, seed);
    if let Some(r) = rank_x {
        cfg.rank_x = r;
    }
    if let Some(r) = verify_rank {
        cfg.verify_rank = r;
    }
    cfg.expected_magnetization = magnetization;
    let rep = py
        .detach(|| {
            let env = boundary::norm_environments(&state.0, &part, rank, &cfg.fit)?;
            sampler::draw_samples(&state.0, &env, &cfg)
        })
        .py_err()?;
    let report = to_object(py, &rep)?;
    let records = to_object(py, &rep.records)?;
    Ok((records, report))
}

#[pymodule(name = "planartn")]
fn planartn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PyCircuit>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(bp_norm, m)?)?;
    m.add_function(wrap_pyfunction!(loop_error, m)?)?;
    m.add_function(wrap_pyfunction!(norm_sqr, m)?)?;
    m.add_function(wrap_pyfunction!(amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(expectation, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    Ok(())
}

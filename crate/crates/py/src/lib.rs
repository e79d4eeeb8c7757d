//! Python bindings: distributions, transport values, distance tensors and
//! their audits, hash audits, constructions, graph signatures, and
//! clustering error.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mmot::clustering::{clustering_error as cluster_err, ClusteringSolution};
use mmot::constructions::{min_positive_area, theorem2_instance, triangle_area_cost};
use mmot::graphs::{signature, Graph};
use mmot::hash::{audit_big_h, audit_big_h_prime};
use mmot::metric::{check_w_tensor, inject_violations, InjectionParams};
use mmot::transport::{mmot as solve_mmot, pairwise_mmot as solve_pairwise, wasserstein as solve_wd, PairwiseCost};
use mmot::verify::{cmd_verify, Mutation};
use mmot::{Atom, DiscreteDistribution, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Shape(_)
        | Error::InvalidMass(_)
        | Error::InvalidArgument(_)
        | Error::Unsupported(_)
        | Error::Config { .. }
        | Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Parses a JSON document into Python objects.
fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn json<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(json_to_py(py, &s)?.unbind())
}

/// Finite distribution over real numbers or planar points.
#[pyclass(name = "Distribution", module = "mmot_py", from_py_object)]
#[derive(Clone)]
struct PyDistribution {
    inner: DiscreteDistribution,
}

fn atom_of(x: &Bound<'_, PyAny>) -> PyResult<Atom> {
    if let Ok(v) = x.extract::<f64>() {
        return Ok(Atom::Real(v));
    }
    if let Ok((a, b)) = x.extract::<(f64, f64)>() {
        return Ok(Atom::Point(a, b));
    }
    Err(PyValueError::new_err("atoms must be floats or (x, y) pairs"))
}

#[pymethods]
impl PyDistribution {
    #[new]
    #[pyo3(signature = (atoms, masses=None))]
    fn new(atoms: Vec<Bound<'_, PyAny>>, masses: Option<Vec<f64>>) -> PyResult<Self> {
        let atoms: Vec<Atom> = atoms.iter().map(atom_of).collect::<PyResult<_>>()?;
        let inner = match masses {
            Some(m) => DiscreteDistribution::new(atoms, m),
            None => DiscreteDistribution::uniform(atoms),
        }
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn masses(&self) -> Vec<f64> {
        self.inner.masses().to_vec()
    }

    /// Atoms as `(x, y)` pairs; reals have `y = 0`.
    #[getter]
    fn atoms(&self) -> Vec<(f64, f64)> {
        self.inner.atoms().iter().filter_map(Atom::coords).collect()
    }

    fn __repr__(&self) -> String {
        format!("Distribution({} atoms)", self.inner.len())
    }
}

fn inners(dists: &[PyDistribution]) -> Vec<DiscreteDistribution> {
    dists.iter().map(|d| d.inner.clone()).collect()
}

/// Wasserstein distance under the Euclidean ground cost.
#[pyfunction]
#[pyo3(signature = (p, q, ell=1))]
fn wasserstein(p: PyDistribution, q: PyDistribution, ell: u32) -> PyResult<f64> {
    let d = PairwiseCost::euclidean(&[p.inner.clone(), q.inner.clone()]).map_err(to_py)?;
    Ok(solve_wd(&p.inner, &q.inner, d.pair(0, 1).map_err(to_py)?, ell).map_err(to_py)?.value)
}

/// Pairwise multi-marginal value under Euclidean costs, with its per-pair terms.
#[pyfunction]
fn pairwise_mmot(py: Python<'_>, dists: Vec<PyDistribution>) -> PyResult<Py<PyAny>> {
    let ds = inners(&dists);
    let r = solve_pairwise(&ds, &PairwiseCost::euclidean(&ds).map_err(to_py)?, 1).map_err(to_py)?;
    Ok(json_to_py(py, &r.to_json(false).map_err(to_py)?)?.unbind())
}

/// Three-marginal value under the triangle-area cost; `gamma` defaults to
/// the smallest positive triangle area among the atoms.
#[pyfunction]
#[pyo3(signature = (p1, p2, p3, gamma=None))]
fn area_mmot(p1: PyDistribution, p2: PyDistribution, p3: PyDistribution, gamma: Option<f64>) -> PyResult<f64> {
    let ds = [p1.inner, p2.inner, p3.inner];
    let gamma = gamma.unwrap_or_else(|| {
        let all: Vec<Atom> = ds.iter().flat_map(|d| d.atoms().iter().cloned()).collect();
        min_positive_area(&all).unwrap_or(1.0)
    });
    let cost = triangle_area_cost([&ds[0], &ds[1], &ds[2]], gamma).map_err(to_py)?;
    Ok(solve_mmot(&ds, &cost, 1).map_err(to_py)?.value)
}

/// Sampled symmetric distances of order 2 or 3.
#[pyclass(name = "DistanceTensor", module = "mmot_py")]
struct PyDistanceTensor {
    inner: mmot::metric::DistanceTensor,
}

#[pymethods]
impl PyDistanceTensor {
    #[new]
    fn new(order: usize, n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: mmot::metric::DistanceTensor::new(order, n).map_err(to_py)?,
        })
    }

    fn set(&mut self, tuple: Vec<usize>, value: f64) -> PyResult<()> {
        self.inner.set(&tuple, value).map_err(to_py)
    }

    /// Stored value, or the sentinel for unsampled tuples.
    fn get(&self, tuple: Vec<usize>) -> f64 {
        self.inner.get(&tuple)
    }

    fn sampled_count(&self) -> usize {
        self.inner.sampled_count()
    }

    fn to_csv(&self) -> PyResult<String> {
        self.inner.to_csv_string().map_err(to_py)
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: mmot::metric::DistanceTensor::read_csv(text.as_bytes()).map_err(to_py)?,
        })
    }

    /// Generalized-triangle audit over fully sampled subsets.
    #[pyo3(signature = (c=1.0))]
    fn audit(&self, py: Python<'_>, c: f64) -> PyResult<Py<PyAny>> {
        json(py, &check_w_tensor(&self.inner, c))
    }

    /// Copy with `ceil(fraction * sampled)` entries raised into violations.
    #[pyo3(signature = (seed, fraction=0.2, factor=1.3))]
    fn inject(&self, seed: u64, fraction: f64, factor: f64) -> PyResult<Self> {
        let params = InjectionParams {
            fraction,
            factor,
            ..InjectionParams::default()
        };
        let inj = inject_violations(&self.inner, &params, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(to_py)?;
        Ok(Self { inner: inj.tensor })
    }
}

#[pyfunction]
fn hash_audit(py: Python<'_>, n: usize) -> PyResult<Py<PyAny>> {
    let pair = audit_big_h(n).map_err(to_py)?;
    let triple = audit_big_h_prime(n).map_err(to_py)?;
    json(py, &serde_json::json!({ "pair_map": pair, "triple_map": triple }))
}

#[pyfunction]
#[pyo3(signature = (epsilon=0.01))]
fn planar_values(py: Python<'_>, epsilon: f64) -> PyResult<Py<PyAny>> {
    json(py, &theorem2_instance(epsilon).and_then(|i| i.values()).map_err(to_py)?)
}

/// Leading non-backtracking eigenvalues of the graph on `(u, v, weight)` edges.
#[pyfunction]
#[pyo3(signature = (n, edges, top_k=16))]
fn graph_signature(n: usize, edges: Vec<(usize, usize, u8)>, top_k: usize) -> PyResult<Vec<(f64, f64)>> {
    let mut g = Graph::empty(n);
    for (u, v, w) in edges {
        g.set_edge(u, v, w).map_err(to_py)?;
    }
    let s = signature(&g, top_k).map_err(to_py)?;
    Ok(s.values().iter().map(|z| (z.re, z.im)).collect())
}

#[pyfunction]
fn clustering_error(pred: Vec<usize>, truth: Vec<usize>) -> PyResult<f64> {
    let k = |l: &[usize]| l.iter().max().map_or(1, |m| m + 1);
    let p = ClusteringSolution::new(pred.clone(), k(&pred)).map_err(to_py)?;
    let t = ClusteringSolution::new(truth.clone(), k(&truth)).map_err(to_py)?;
    cluster_err(&p, &t).map_err(to_py)
}

/// The self-check suite as a dictionary.
#[pyfunction]
fn verify(py: Python<'_>) -> PyResult<Py<PyAny>> {
    json(py, &cmd_verify(Mutation::None))
}

#[pymodule]
fn mmot_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyDistanceTensor>()?;
    m.add_function(wrap_pyfunction!(wasserstein, m)?)?;
    m.add_function(wrap_pyfunction!(pairwise_mmot, m)?)?;
    m.add_function(wrap_pyfunction!(area_mmot, m)?)?;
    m.add_function(wrap_pyfunction!(hash_audit, m)?)?;
    m.add_function(wrap_pyfunction!(planar_values, m)?)?;
    m.add_function(wrap_pyfunction!(graph_signature, m)?)?;
    m.add_function(wrap_pyfunction!(clustering_error, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}

use jbstar::isometry::{self, NonExtendableExample, OneParameterFamily, StructuredIsometry};
use jbstar::model::{self as jmodel, ModelDescriptor};
use jbstar::report::{self, RunConfig};
use jbstar::unitary::{self, UChainFactorization};
use jbstar::{spectral, Element, Tolerances};
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use std::cell::RefCell;
use std::sync::Arc;

create_exception!(jbstar_py, JbStarError, PyException);

fn err(e: jbstar::Error) -> PyErr {
    JbStarError::new_err(e.to_string())
}

fn tol() -> Tolerances {
    Tolerances::default()
}

#[pyclass(name = "Model", frozen, from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: Arc<jbstar::Model>,
}

#[pymethods]
impl PyModel {
    /// Builds a model from its JSON descriptor.
    #[new]
    fn new(descriptor: &str) -> PyResult<Self> {
        let d = report::parse_model_arg(descriptor).map_err(err)?;
        Self::build(d)
    }

    #[staticmethod]
    fn full(n: usize) -> PyResult<Self> {
        Self::build(ModelDescriptor::full(n))
    }

    #[staticmethod]
    fn symmetric(n: usize) -> PyResult<Self> {
        Self::build(ModelDescriptor::symmetric(n))
    }

    #[staticmethod]
    #[pyo3(signature = (fiber, grid=256))]
    fn circle(fiber: &PyModel, grid: usize) -> PyResult<Self> {
        Self::build(ModelDescriptor::circle(grid, fiber.inner.descriptor().clone()))
    }

    #[staticmethod]
    fn direct_sum(parts: Vec<PyModel>) -> PyResult<Self> {
        Self::build(ModelDescriptor::direct_sum(parts.iter().map(|p| p.inner.descriptor().clone()).collect()))
    }

    #[getter]
    fn descriptor(&self) -> String {
        serde_json::to_string(self.inner.descriptor()).expect("descriptor serializes")
    }

    #[getter]
    fn complex_dim(&self) -> usize {
        self.inner.complex_dim()
    }

    fn unit(&self) -> PyElement {
        self.inner.unit().into()
    }

    fn zero(&self) -> PyElement {
        self.inner.zero().into()
    }

    #[pyo3(signature = (seed, scale=1.0))]
    fn random_element(&self, seed: u64, scale: f64) -> PyElement {
        jmodel::random_element(&self.inner, seed, scale).into()
    }

    #[pyo3(signature = (seed, scale=1.0))]
    fn random_selfadjoint(&self, seed: u64, scale: f64) -> PyElement {
        jmodel::random_selfadjoint(&self.inner, seed, scale).into()
    }

    #[pyo3(signature = (seed, scale=std::f64::consts::PI))]
    fn random_unitary(&self, seed: u64, scale: f64) -> PyElement {
        jmodel::random_unitary_scaled(&self.inner, seed, scale).into()
    }

    /// `λ ↦ diag(λ^k, 1, …)` in a circle model.
    fn winding_witness(&self, k: i32) -> PyResult<PyElement> {
        Ok(report::winding_witness(&self.inner, k).map_err(err)?.into())
    }

    fn __repr__(&self) -> String {
        format!("Model({})", self.descriptor())
    }
}

impl PyModel {
    fn build(d: ModelDescriptor) -> PyResult<Self> {
        Ok(PyModel { inner: jbstar::Model::build(&d).map_err(err)? })
    }
}

#[pyclass(name = "Element", frozen, from_py_object)]
#[derive(Clone)]
struct PyElement {
    inner: Element,
}

impl From<Element> for PyElement {
    fn from(inner: Element) -> Self {
        PyElement { inner }
    }
}

#[pymethods]
impl PyElement {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Element::from_json(text, tol().symmetric).map_err(err)?.into())
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn model(&self) -> PyModel {
        PyModel { inner: self.inner.model().clone() }
    }

    /// Blocks as nested lists of complex numbers (row-major).
    fn blocks(&self) -> Vec<Vec<Vec<Complex64>>> {
        self.inner
            .blocks()
            .iter()
            .map(|b| b.row_iter().map(|r| r.iter().copied().collect()).collect())
            .collect()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn distance(&self, other: &PyElement) -> PyResult<f64> {
        self.inner.check_same_model(&other.inner).map_err(err)?;
        Ok(self.inner.distance(&other.inner))
    }

    fn adjoint(&self) -> PyElement {
        self.inner.adjoint().into()
    }

    fn jordan(&self, other: &PyElement) -> PyResult<PyElement> {
        Ok(jbstar::algebra::jordan_product(&self.inner, &other.inner).map_err(err)?.into())
    }

    fn u_op(&self, x: &PyElement) -> PyResult<PyElement> {
        Ok(jbstar::algebra::u_quadratic(&self.inner, &x.inner).map_err(err)?.into())
    }

    fn triple(&self, y: &PyElement, z: &PyElement) -> PyResult<PyElement> {
        Ok(jbstar::algebra::triple_product(&self.inner, &y.inner, &z.inner).map_err(err)?.into())
    }

    fn exp(&self) -> PyElement {
        jbstar::algebra::exponential(&self.inner).into()
    }

    fn exp_i(&self) -> PyElement {
        self.inner.exp_i().into()
    }

    fn __add__(&self, other: &PyElement) -> PyResult<PyElement> {
        self.inner.check_same_model(&other.inner).map_err(err)?;
        Ok((&self.inner + &other.inner).into())
    }

    fn __sub__(&self, other: &PyElement) -> PyResult<PyElement> {
        self.inner.check_same_model(&other.inner).map_err(err)?;
        Ok((&self.inner - &other.inner).into())
    }

    fn __mul__(&self, z: Complex64) -> PyElement {
        self.inner.scale_complex(z).into()
    }

    fn __rmul__(&self, z: Complex64) -> PyElement {
        self.inner.scale_complex(z).into()
    }

    fn __neg__(&self) -> PyElement {
        self.inner.scale(-1.0).into()
    }

    fn __repr__(&self) -> String {
        format!("Element(model={}, norm={:.6})", serde_json::to_string(self.inner.model().descriptor()).unwrap_or_default(), self.inner.norm())
    }
}

#[pyclass(name = "UChain", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyUChain {
    inner: UChainFactorization,
}

#[pymethods]
impl PyUChain {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyUChain { inner: UChainFactorization::from_json(text, &tol()).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn hs(&self) -> Vec<PyElement> {
        self.inner.hs.iter().cloned().map(Into::into).collect()
    }

    fn evaluate(&self) -> PyElement {
        self.inner.evaluate().into()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "Membership", frozen, get_all)]
struct PyMembership {
    verdict: String,
    winding: Option<i64>,
    certificate: Option<PyUChain>,
    residual: Option<f64>,
    justification: String,
}

#[pyfunction]
fn winding_number(u: &PyElement) -> PyResult<i64> {
    unitary::winding_number(&u.inner, &tol()).map_err(err)
}

#[pyfunction]
fn in_principal_component(u: &PyElement) -> PyResult<PyMembership> {
    let m = unitary::in_principal_component(&u.inner, &tol()).map_err(err)?;
    let verdict = serde_json::to_value(m.verdict).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    Ok(PyMembership {
        verdict,
        winding: m.winding,
        certificate: m.certificate.map(|inner| PyUChain { inner }),
        residual: m.residual,
        justification: m.justification,
    })
}

#[pyfunction]
fn factor_step(u: &PyElement, v: &PyElement) -> PyResult<PyElement> {
    Ok(unitary::factor_step(&u.inner, &v.inner, &tol()).map_err(err)?.into())
}

#[pyfunction]
fn factor_path(path: Vec<PyElement>) -> PyResult<PyUChain> {
    let path: Vec<Element> = path.into_iter().map(|p| p.inner).collect();
    Ok(PyUChain { inner: unitary::factor_path(&path, &tol()).map_err(err)? })
}

#[pyfunction]
fn generalized_inverse(a: &PyElement) -> PyResult<PyElement> {
    Ok(spectral::generalized_inverse(&a.inner, &tol()).map_err(err)?.into())
}

#[pyfunction]
fn range_tripotent(a: &PyElement) -> PyResult<PyElement> {
    Ok(spectral::range_tripotent(&a.inner, &tol()).map_err(err)?.into_element().into())
}

/// Sorted nonzero singular values over all blocks.
#[pyfunction]
fn triple_spectrum(a: &PyElement) -> Vec<f64> {
    spectral::triple_spectrum(&a.inner).values().to_vec()
}

/// `f_t(a)` for a Python callable `f: float -> complex`.
#[pyfunction]
fn functional_calculus(f: &Bound<'_, PyAny>, a: &PyElement) -> PyResult<PyElement> {
    let failure = RefCell::new(None);
    let result = spectral::triple_functional_calculus(
        |t| match f.call1((t,)).and_then(|v| v.extract::<Complex64>()) {
            Ok(z) => z,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                Complex64::new(f64::NAN, 0.0)
            }
        },
        &a.inner,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(result.map_err(err)?.into())
}

/// Wraps a Python callable `Element -> Element` as a black-box map. The first
/// Python error is kept and re-raised after the computation.
struct Callback<'a, 'py> {
    f: &'a Bound<'py, PyAny>,
    failure: RefCell<Option<PyErr>>,
}

impl<'a, 'py> Callback<'a, 'py> {
    fn new(f: &'a Bound<'py, PyAny>) -> Self {
        Callback { f, failure: RefCell::new(None) }
    }

    fn call(&self, x: &Element) -> Element {
        let out = self
            .f
            .call1((PyElement::from(x.clone()),))
            .and_then(|v| v.extract::<PyElement>().map_err(PyErr::from));
        match out {
            Ok(e) => e.inner,
            Err(e) => {
                self.failure.borrow_mut().get_or_insert(e);
                x.model().zero()
            }
        }
    }

    fn finish<T>(self, result: jbstar::Result<T>) -> PyResult<T> {
        if let Some(e) = self.failure.into_inner() {
            return Err(e);
        }
        result.map_err(err)
    }
}

#[pyclass(name = "StructuredIsometry", frozen)]
struct PyIsometry {
    inner: StructuredIsometry,
}

#[pymethods]
impl PyIsometry {
    #[staticmethod]
    fn identity(model: &PyModel) -> Self {
        PyIsometry { inner: StructuredIsometry::identity(&model.inner) }
    }

    #[staticmethod]
    fn conjugation(model: &PyModel) -> Self {
        PyIsometry { inner: StructuredIsometry::conjugation(&model.inner) }
    }

    #[staticmethod]
    #[pyo3(signature = (model, seed, max_prefactors=3))]
    fn random(model: &PyModel, seed: u64, max_prefactors: usize) -> PyResult<Self> {
        let inner = isometry::random_structured_isometry(&model.inner, seed, max_prefactors, &tol()).map_err(err)?;
        Ok(PyIsometry { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyIsometry { inner: StructuredIsometry::from_json(text, &tol()).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn p(&self) -> PyElement {
        self.inner.p().clone().into()
    }

    #[getter]
    fn prefactors(&self) -> Vec<PyElement> {
        self.inner.prefactors().iter().cloned().map(Into::into).collect()
    }

    fn __call__(&self, u: &PyElement) -> PyResult<PyElement> {
        u.inner.check_same_model(&self.inner.source().unit()).map_err(err)?;
        Ok(self.inner.apply(&u.inner).into())
    }
}

/// Structured form of an isometry given as a Python callable on unitaries.
#[pyfunction]
fn decompose(delta: &Bound<'_, PyAny>, model: &PyModel) -> PyResult<PyIsometry> {
    let cb = Callback::new(delta);
    let result = isometry::decompose(&|u: &Element| cb.call(u), &model.inner, &tol());
    Ok(PyIsometry { inner: cb.finish(result)? })
}

/// Generator `h` of a one-parameter unitary family `t ↦ u(t) = e^{ith}`.
#[pyfunction]
fn stone_parameter(family: &Bound<'_, PyAny>) -> PyResult<PyElement> {
    let failure = RefCell::new(None);
    let fallback = RefCell::new(None::<Element>);
    let sampler = |t: f64| match family.call1((t,)).and_then(|v| v.extract::<PyElement>().map_err(PyErr::from)) {
        Ok(e) => {
            fallback.borrow_mut().get_or_insert_with(|| e.inner.model().zero());
            e.inner
        }
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            fallback.borrow().clone().expect("the family must be evaluable at 0")
        }
    };
    let probe = sampler(0.0);
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    drop(probe);
    let result = isometry::stone_parameter(&OneParameterFamily::with_default_samples(sampler), &tol());
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(result.map_err(err)?.into())
}

#[pyclass(name = "NonExtendableExample", frozen)]
struct PyNonExtendable {
    inner: NonExtendableExample,
}

#[pymethods]
impl PyNonExtendable {
    fn __call__(&self, u: &PyElement) -> PyResult<PyElement> {
        Ok(self.inner.apply(&u.inner).map_err(err)?.into())
    }

    #[getter]
    fn witness(&self) -> PyElement {
        self.inner.witness().clone().into()
    }

    /// `(max |d(Δx,Δy) − d(x,y)|, max |d − 2| over cross-component pairs)`.
    #[pyo3(signature = (pairs=200, seed=0))]
    fn check_pairs(&self, pairs: usize, seed: u64) -> PyResult<(f64, f64)> {
        let c = self.inner.check_pairs(pairs, seed).map_err(err)?;
        Ok((c.max_defect, c.max_cross_gap))
    }

    fn is_extendable(&self) -> PyResult<bool> {
        self.inner.is_extendable().map_err(err)
    }
}

#[pyfunction]
fn build_nonextendable_example(model: &PyModel) -> PyResult<PyNonExtendable> {
    Ok(PyNonExtendable { inner: isometry::build_nonextendable_example(&model.inner, &tol()).map_err(err)? })
}

/// Runs the identity suites and returns the JSON report.
#[pyfunction]
#[pyo3(signature = (model, seed=0, samples=200))]
fn verify(model: &PyModel, seed: u64, samples: usize) -> PyResult<String> {
    let config = RunConfig { seed, samples, ..RunConfig::new(model.inner.descriptor().clone()) };
    Ok(report::cmd_verify(&config).map_err(err)?.to_json())
}

#[pymodule]
fn jbstar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("JbStarError", m.py().get_type::<JbStarError>())?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyElement>()?;
    m.add_class::<PyUChain>()?;
    m.add_class::<PyMembership>()?;
    m.add_class::<PyIsometry>()?;
    m.add_class::<PyNonExtendable>()?;
    m.add_function(wrap_pyfunction!(winding_number, m)?)?;
    m.add_function(wrap_pyfunction!(in_principal_component, m)?)?;
    m.add_function(wrap_pyfunction!(factor_step, m)?)?;
    m.add_function(wrap_pyfunction!(factor_path, m)?)?;
    m.add_function(wrap_pyfunction!(generalized_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(range_tripotent, m)?)?;
    m.add_function(wrap_pyfunction!(triple_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(functional_calculus, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(stone_parameter, m)?)?;
    m.add_function(wrap_pyfunction!(build_nonextendable_example, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}

//! Python bindings: the closed-form Schwarzschild oracle, flat harmonic
//! test fields, the level-set functionals, and the check suites.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use statpot::inequalities::{Evaluator, Provenance, WillmoreMode};
use statpot::levelset::{
    extract, u_p, up_derivative_formula, w_p, wp_derivative_formula, Backend, ExtractOptions,
    Field,
};
use statpot::{MultiCenterField, SchwarzschildModel, SearchBox, StaticConfig};

fn err(e: statpot::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Hypersurface area of the unit sphere in n-space.
#[pyfunction]
fn unit_sphere_area(n: u32) -> PyResult<f64> {
    statpot::unit_sphere_area(n).map_err(err)
}

/// Conformal change of variable, `phi = log((1+u)/(1-u))`.
#[pyfunction]
fn to_phi(u: f64) -> PyResult<f64> {
    statpot::conformal::to_phi(u).map_err(err)
}

/// Inverse change of variable, `u = tanh(phi/2)`.
#[pyfunction]
fn from_phi(phi: f64) -> f64 {
    statpot::conformal::from_phi(phi)
}

#[pyclass]
struct Schwarzschild {
    model: SchwarzschildModel,
    config: StaticConfig,
}

#[pymethods]
impl Schwarzschild {
    #[new]
    fn new(n: u32, m: f64) -> PyResult<Self> {
        let model = SchwarzschildModel::new(n, m).map_err(err)?;
        let config = *model.config();
        Ok(Self { model, config })
    }

    #[getter]
    fn horizon_radius(&self) -> f64 {
        self.model.horizon_radius()
    }

    fn radius_of_level(&self, t: f64) -> PyResult<f64> {
        self.model.radius_of_level(t).map_err(err)
    }

    /// Exact renormalized p-capacity `m^p (n-2)^p |S^{n-1}|`.
    fn up_exact(&self, t: f64, p: f64) -> PyResult<f64> {
        self.model.up_exact(t, p).map_err(err)
    }

    fn level_quantities<'py>(&self, py: Python<'py>, t: f64) -> PyResult<Bound<'py, PyDict>> {
        let q = self.model.level_quantities(t).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("radius", q.radius)?;
        d.set_item("u", q.u)?;
        d.set_item("du", q.du)?;
        d.set_item("mean_curvature", q.mean_curvature)?;
        d.set_item("area", q.area)?;
        d.set_item("r_surface", q.r_surface)?;
        Ok(d)
    }

    fn conformal_exact<'py>(&self, py: Python<'py>, p: f64) -> PyResult<Bound<'py, PyDict>> {
        let c = self.model.conformal_exact(p).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("phi_gradient_norm", c.phi_gradient_norm)?;
        d.set_item("phi_p_value", c.phi_p_value)?;
        d.set_item("cross_section_area_g", c.cross_section_area_g)?;
        Ok(d)
    }

    /// U_p by surface quadrature on the exact level sphere.
    fn up(&self, t: f64, p: f64) -> PyResult<f64> {
        u_p(
            &Field::Schwarzschild(self.model),
            &self.config,
            t,
            p,
            &ExtractOptions::default(),
        )
        .map_err(err)
    }

    /// The monotonicity-formula derivative U_p'(t); zero on this model.
    fn up_derivative(&self, t: f64, p: f64) -> PyResult<f64> {
        up_derivative_formula(
            &Field::Schwarzschild(self.model),
            &self.config,
            t,
            p,
            &ExtractOptions::default(),
        )
        .map_err(err)
    }

    fn mass_sandwich<'py>(
        &self,
        py: Python<'py>,
        t: f64,
        p: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let surface = extract(
            &Field::Schwarzschild(self.model),
            t,
            &ExtractOptions::default(),
        )
        .map_err(err)?;
        let ms = Evaluator::new(self.config)
            .mass_sandwich(&surface, p)
            .map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("lower", ms.lower)?;
        d.set_item("mass", ms.mass)?;
        d.set_item("upper", ms.upper)?;
        Ok(d)
    }

    /// Relative residual of the first cylinder integral identity.
    #[pyo3(signature = (s, p, nodes=128))]
    fn cylinder_identity(&self, s: f64, p: f64, nodes: usize) -> PyResult<f64> {
        statpot::conformal::cylinder_identity_check(&self.model, s, p, nodes).map_err(err)
    }
}

#[pyclass]
struct MultiCenter {
    field: MultiCenterField,
}

#[pymethods]
impl MultiCenter {
    #[new]
    fn new(n: u32, centers: Vec<Vec<f64>>, weights: Vec<f64>) -> PyResult<Self> {
        if centers.len() != weights.len() {
            return Err(PyValueError::new_err(
                "centers and weights must have equal length",
            ));
        }
        let field = MultiCenterField::new(n, centers.into_iter().zip(weights).collect())
            .map_err(err)?;
        Ok(Self { field })
    }

    #[staticmethod]
    fn monopole(n: u32, m: f64) -> PyResult<Self> {
        Ok(Self {
            field: MultiCenterField::monopole(n, m).map_err(err)?,
        })
    }

    #[getter]
    fn total_mass(&self) -> f64 {
        self.field.total_mass()
    }

    fn value(&self, x: Vec<f64>) -> f64 {
        self.field.value(&x)
    }

    fn evaluate<'py>(&self, py: Python<'py>, x: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let jet = self.field.evaluate(&x).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("u", jet.u)?;
        d.set_item("gradient", jet.gradient.as_slice().to_vec())?;
        let n = x.len();
        let hessian: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| jet.hessian[(i, j)]).collect())
            .collect();
        d.set_item("hessian", hessian)?;
        d.set_item("laplacian", jet.laplacian())?;
        Ok(d)
    }

    #[pyo3(signature = (lo, hi, seeds_per_axis=7))]
    fn critical_points(
        &self,
        lo: Vec<f64>,
        hi: Vec<f64>,
        seeds_per_axis: usize,
    ) -> PyResult<Vec<Vec<f64>>> {
        statpot::critical_points(
            &self.field,
            &SearchBox {
                lo,
                hi,
                seeds_per_axis,
            },
        )
        .map_err(err)
    }

    /// Raw level-set integral `W_p(t) = int |Du|^p dsigma`.
    fn wp(&self, t: f64, p: f64) -> PyResult<f64> {
        w_p(
            &Field::MultiCenter(self.field.clone()),
            t,
            p,
            &star_or_radial(&self.field),
        )
        .map_err(err)
    }

    fn wp_derivative(&self, t: f64, p: f64) -> PyResult<f64> {
        wp_derivative_formula(
            &Field::MultiCenter(self.field.clone()),
            t,
            p,
            &star_or_radial(&self.field),
        )
        .map_err(err)
    }

    /// Classical flat Willmore data on the level set `{u = t}`.
    fn willmore<'py>(&self, py: Python<'py>, t: f64) -> PyResult<Bound<'py, PyDict>> {
        let config =
            StaticConfig::new(self.field.n(), self.field.total_mass(), 0.0).map_err(err)?;
        let surface = extract(
            &Field::MultiCenter(self.field.clone()),
            t,
            &star_or_radial(&self.field),
        )
        .map_err(err)?;
        let rep = Evaluator::new(config)
            .with_provenance(Provenance::FormalField)
            .willmore(&surface, WillmoreMode::Flat)
            .map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("lhs", rep.lhs)?;
        d.set_item("rhs", rep.rhs)?;
        d.set_item("slack", rep.slack)?;
        d.set_item("satisfied", rep.satisfied)?;
        d.set_item("rigidity", rep.rigidity)?;
        Ok(d)
    }
}

fn star_or_radial(field: &MultiCenterField) -> ExtractOptions {
    ExtractOptions {
        backend: if field.is_monopole() {
            Backend::RadialExact
        } else {
            Backend::StarShaped
        },
        ..Default::default()
    }
}

/// Runs a named check suite; returns (passed, text table).
#[pyfunction]
#[pyo3(signature = (suite, rhs_scale=1.0, tol=None))]
fn check_suite(suite: &str, rhs_scale: f64, tol: Option<f64>) -> PyResult<(bool, String)> {
    let outcome = statpot::runner::run_check_suite(suite, rhs_scale, tol).map_err(err)?;
    Ok((outcome.passed(), outcome.to_table()))
}

#[pymodule]
fn statpot_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(unit_sphere_area, m)?)?;
    m.add_function(wrap_pyfunction!(to_phi, m)?)?;
    m.add_function(wrap_pyfunction!(from_phi, m)?)?;
    m.add_function(wrap_pyfunction!(check_suite, m)?)?;
    m.add_class::<Schwarzschild>()?;
    m.add_class::<MultiCenter>()?;
    Ok(())
}

// Negated comparisons like `!(x > 0.0)` are deliberate throughout: they
// treat NaN as out of domain, which `x <= 0.0` would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Numerical toolkit for the level-set geometry of bounded static vacuum
//! potentials: renormalized p-capacities and their monotonicity formulas,
//! the conformal cylindrical ansatz, and the sharp geometric inequalities
//! they imply, with a closed-form rotationally symmetric oracle and
//! flat-background harmonic test fields.

pub mod config;
pub mod conformal;
pub mod error;
pub mod grid;
pub mod harmonic;
pub mod inequalities;
pub mod levelset;
pub mod runner;
pub mod schwarzschild;
pub mod sphere;
pub mod surface;

pub use config::{LevelValue, StaticConfig};
pub use error::{Error, Result};
pub use grid::{solve_dirichlet, Excision, GridField, GridSpec, OuterData, SolveReport};
pub use harmonic::{critical_points, Jet2, MultiCenterField, SearchBox};
pub use inequalities::{
    Evaluator, ExponentPolicy, InequalityReport, LpExponent, MassSandwich, Provenance,
    Tolerances, WillmoreMode,
};
pub use levelset::{
    extract, sweep, u_p, up_derivative_fd, up_derivative_formula, w_p, wp_derivative_fd,
    wp_derivative_formula, Backend, ExtractOptions, Field, FunctionalKind, FunctionalTable,
    SweepSpec,
};
pub use schwarzschild::SchwarzschildModel;
pub use sphere::{unit_sphere_area, SphereRule};
pub use surface::{LevelSurface, SurfaceSample};

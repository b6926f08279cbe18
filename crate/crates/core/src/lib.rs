//! Metric functionals on `L_p([0, 1])`, evaluated exactly on step functions.
//!
//! The crate represents points of the metric (horofunction) compactification of
//! `L_p` by random measures on the compactified real line, and reproduces the
//! standard convergence examples and two applications as experiments:
//!
//! * [`interval_space`]: step functions with exact integrals and norms;
//! * [`rbar_measures`]: the compactified line and atomic random measures;
//! * [`functionals`]: the four evaluable forms of metric functionals;
//! * [`limits_lab`]: convergence experiments and converse constructions;
//! * [`spectral`]: affine nonexpansive iterations and the mean ergodic limit;
//! * [`alspach`]: the fixed-point free isometry of `K` in `L_1`.

pub mod alspach;
pub mod error;
pub mod functionals;
pub mod interval_space;
pub mod limits_lab;
pub mod rbar_measures;
pub mod report;
pub mod sampling;
pub mod spectral;

pub use error::{Error, ErrorKind, Result};
pub use functionals::MetricFunctional;
pub use interval_space::{rademacher, IntervalSet, Partition, StepFunction};
pub use rbar_measures::{AtomicMeasure, Eta, RandomMeasureField};

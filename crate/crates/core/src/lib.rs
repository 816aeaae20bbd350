//! Numerical laboratory for weighted BMO spaces on bounded intervals.
//!
//! Functions and weights are step functions on uniform grids; every
//! supremum over intervals is an exact maximum over a finite family of
//! grid-aligned intervals.

pub mod acceptance;
pub mod bmo;
pub mod error;
pub mod family;
pub mod functions;
pub mod grid;
pub mod harness;
pub mod operators;
pub mod report;
pub mod run;
pub mod scenario;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
pub use family::{Family, IntervalFamilySpec, Window};
pub use functions::{FunctionSpec, TestFunction};
pub use grid::{make_grid, Grid, GridInterval, StepFunction};
pub use operators::{apply_operator, hypothesis_test, OperatorSpec};
pub use weights::{materialize_weight, Weight, WeightSpec};

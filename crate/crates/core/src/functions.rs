//! Test-function catalog. Every entry is piecewise constant with finitely
//! many breakpoints and is tabulated by exact cell averages, so the same
//! function can be placed on any grid.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, StepFunction};

/// Number of equal pieces of a random test function.
pub const RANDOM_PIECES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FunctionSpec {
    /// `sign(x)`.
    Sign,
    /// Indicator of `[lo, hi]`.
    Indicator { lo: f64, hi: f64 },
    Constant { c: f64 },
    /// `pieces` equal pieces of the domain with values uniform in `[-1, 1]`.
    Random { seed: u64, pieces: usize },
    /// Cell values on a grid whose cell count divides the target's.
    Custom { values: Vec<f64> },
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::Sign => write!(f, "sign"),
            FunctionSpec::Indicator { lo, hi } => write!(f, "indicator[{lo},{hi}]"),
            FunctionSpec::Constant { c } => write!(f, "constant({c})"),
            FunctionSpec::Random { seed, .. } => write!(f, "random:{seed}"),
            FunctionSpec::Custom { values } => write!(f, "custom[{}]", values.len()),
        }
    }
}

/// Mean of a function that equals `vals[k]` on `[breaks[k], breaks[k+1])`
/// and 0 elsewhere, over `[x0, x1]`.
fn piecewise_average(breaks: &[f64], vals: &[f64], x0: f64, x1: f64) -> f64 {
    let mut acc = 0.0;
    for (k, v) in vals.iter().enumerate() {
        let lo = breaks[k].max(x0);
        let hi = breaks[k + 1].min(x1);
        if hi > lo {
            acc += v * (hi - lo);
        }
    }
    acc / (x1 - x0)
}

impl FunctionSpec {
    pub fn id(&self) -> String {
        self.to_string()
    }

    fn pieces(&self, grid: &Grid) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let (a, b) = (grid.a(), grid.b());
        Ok(match self {
            FunctionSpec::Sign => Some((vec![a.min(0.0), 0.0, b.max(0.0)], vec![-1.0, 1.0])),
            FunctionSpec::Indicator { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::BadParameter { name: "indicator", value: *lo, reason: "needs lo < hi" });
                }
                Some((vec![*lo, *hi], vec![1.0]))
            }
            FunctionSpec::Constant { c } => {
                if !c.is_finite() {
                    return Err(Error::BadParameter { name: "c", value: *c, reason: "must be finite" });
                }
                Some((vec![a, b], vec![*c]))
            }
            FunctionSpec::Random { seed, pieces } => {
                if *pieces == 0 {
                    return Err(Error::BadParameter { name: "pieces", value: 0.0, reason: "must be positive" });
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let vals: Vec<f64> = (0..*pieces).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                let breaks = (0..=*pieces).map(|k| a + (b - a) * (k as f64 / *pieces as f64)).collect();
                Some((breaks, vals))
            }
            FunctionSpec::Custom { .. } => None,
        })
    }

    /// Exact cell averages on `grid`.
    pub fn materialize(&self, grid: &Grid) -> Result<StepFunction> {
        if let FunctionSpec::Custom { values } = self {
            let n = grid.n_cells();
            if values.is_empty() || !n.is_multiple_of(values.len()) {
                return Err(Error::LengthMismatch { expected: n, got: values.len() });
            }
            let k = n / values.len();
            return StepFunction::new(*grid, values.iter().flat_map(|v| std::iter::repeat_n(*v, k)).collect());
        }
        let (breaks, vals) = self.pieces(grid)?.expect("non-custom specs have pieces");
        let values = (0..grid.n_cells())
            .map(|c| {
                let (x0, x1) = grid.cell_bounds(c);
                piecewise_average(&breaks, &vals, x0, x1)
            })
            .collect();
        StepFunction::new(*grid, values)
    }
}

/// A materialized test function with its report id.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub id: String,
    pub f: StepFunction,
}

impl TestFunction {
    pub fn new(id: impl Into<String>, f: StepFunction) -> Self {
        Self { id: id.into(), f }
    }

    pub fn from_spec(spec: &FunctionSpec, grid: &Grid) -> Result<Self> {
        Ok(Self { id: spec.id(), f: spec.materialize(grid)? })
    }
}

/// Default test set: `sign`, indicator of `[0, 1]`, three random step
/// functions seeded `seed, seed+1, seed+2`, and `f ≡ 1`.
pub fn default_test_set(seed: u64) -> Vec<FunctionSpec> {
    vec![
        FunctionSpec::Sign,
        FunctionSpec::Indicator { lo: 0.0, hi: 1.0 },
        FunctionSpec::Random { seed, pieces: RANDOM_PIECES },
        FunctionSpec::Random { seed: seed + 1, pieces: RANDOM_PIECES },
        FunctionSpec::Random { seed: seed + 2, pieces: RANDOM_PIECES },
        FunctionSpec::Constant { c: 1.0 },
    ]
}

pub fn materialize_all(specs: &[FunctionSpec], grid: &Grid) -> Result<Vec<TestFunction>> {
    specs.iter().map(|s| TestFunction::from_spec(s, grid)).collect()
}

//! Mean oscillation, weighted BMO seminorms, the sharp maximal function and
//! weighted `L^p` diagnostics.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::Family;
use crate::grid::{GridInterval, StepFunction};
use crate::operators::{apply_operator, OperatorSpec};
use crate::report::extended;
use crate::stats::{abs_pow, compensated_sum, IntervalStats};
use crate::weights::Weight;

/// `(1/|I|) ∫_I |f − I(f)|`.
pub fn oscillation(f: &StepFunction, i: GridInterval) -> f64 {
    let cells = &f.values()[i.range()];
    let len = cells.len() as f64;
    let mean = compensated_sum(cells.iter().copied()) / len;
    compensated_sum(cells.iter().map(|v| (v - mean).abs())) / len
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BmoReport {
    #[serde(serialize_with = "extended")]
    pub seminorm: f64,
    pub witness: GridInterval,
    pub witness_coords: (f64, f64),
    pub family: String,
}

fn same_grid(f: &StepFunction, family: &Family) -> Result<()> {
    if f.grid().n_cells() != family.n_cells() {
        return Err(Error::GridMismatch("family resolved on a different grid than the function"));
    }
    Ok(())
}

/// `sup_I oscillation(f, I) / average(u, I)` over the family. Intervals on
/// which `u` has no mass give `+∞` (or `0` when `f` is constant there).
pub fn bmo_u_seminorm(f: &StepFunction, u: &Weight, family: &Family) -> Result<BmoReport> {
    same_grid(f, family)?;
    if u.grid() != f.grid() {
        return Err(Error::GridMismatch("weight and function live on different grids"));
    }
    family.check_oscillation_budget()?;
    let stats = IntervalStats::new(u.function());
    let e = family.argmax(|i| {
        let osc = oscillation(f, i);
        let avg = stats.average(i);
        if avg > 0.0 {
            osc / avg
        } else if osc > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    });
    Ok(BmoReport {
        seminorm: e.value,
        witness: e.witness,
        witness_coords: f.grid().coords(e.witness),
        family: family.label(),
    })
}

/// Classical (unweighted) BMO seminorm over the family.
pub fn bmo_seminorm(f: &StepFunction, family: &Family) -> Result<BmoReport> {
    same_grid(f, family)?;
    family.check_oscillation_budget()?;
    let e = family.argmax(|i| oscillation(f, i));
    Ok(BmoReport {
        seminorm: e.value,
        witness: e.witness,
        witness_coords: f.grid().coords(e.witness),
        family: family.label(),
    })
}

/// `f♯` restricted to a family: per cell, the largest oscillation over the
/// family's intervals covering that cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpFunction {
    pub f: StepFunction,
    pub family: String,
}

/// Evaluates every interval's oscillation once and scatters the maximum
/// into the covered cells.
pub fn sharp_maximal(f: &StepFunction, family: &Family) -> Result<SharpFunction> {
    same_grid(f, family)?;
    family.check_oscillation_budget()?;
    let n = f.grid().n_cells();
    let values = family
        .par_iter()
        .fold(
            || vec![0.0f64; n],
            |mut acc, i| {
                let osc = oscillation(f, i);
                for slot in &mut acc[i.range()] {
                    if osc > *slot {
                        *slot = osc;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0.0f64; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x = x.max(y);
                }
                a
            },
        );
    Ok(SharpFunction { f: StepFunction::new(*f.grid(), values)?, family: family.label() })
}

/// `(∫ |f|^p u)^{1/p}` over the whole grid.
pub fn weighted_lp_norm(f: &StepFunction, u: &Weight, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::ExponentBelowOne(p));
    }
    if u.grid() != f.grid() {
        return Err(Error::GridMismatch("weight and function live on different grids"));
    }
    let s = compensated_sum(f.values().iter().zip(u.values()).map(|(v, w)| abs_pow(*v, p) * w));
    Ok((f.grid().h() * s).powf(1.0 / p))
}

/// `‖f♯‖_p / ‖f‖_p` on the domain, as an empirical diagnostic.
pub fn sharp_norm_ratio(f: &StepFunction, p: f64, family: &Family) -> Result<f64> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::BadApExponent(p));
    }
    let full = f.grid().full();
    let denom = f.lq_norm_local(full, p)?;
    if denom == 0.0 {
        return Err(Error::DegenerateNorm("f has zero L^p norm"));
    }
    let sharp = sharp_maximal(f, family)?;
    let num = sharp.f.lq_norm_local(full, p)?;
    if num == 0.0 {
        return Err(Error::DegenerateNorm("f is constant, so its sharp function vanishes"));
    }
    Ok(num / denom)
}

/// `‖Tf‖_{L^p(u)} / ‖f‖_{L^p(u)}`.
pub fn operator_lpu_ratio(t: &OperatorSpec, f: &StepFunction, u: &Weight, p: f64) -> Result<f64> {
    let denom = weighted_lp_norm(f, u, p)?;
    if denom == 0.0 {
        return Err(Error::DegenerateNorm("f has zero L^p(u) norm"));
    }
    let tf = apply_operator(t, f)?;
    Ok(weighted_lp_norm(&tf, u, p)? / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::IntervalFamilySpec;
    use crate::functions::FunctionSpec;
    use crate::grid::make_grid;
    use crate::weights::{materialize_weight, WeightSpec};

    #[test]
    fn oscillation_examples() {
        let g = make_grid(-1.0, 1.0, 16).unwrap();
        let c = StepFunction::constant(g, 4.0).unwrap();
        assert_eq!(oscillation(&c, GridInterval { start: 2, end: 9 }), 0.0);
        let s = FunctionSpec::Sign.materialize(&g).unwrap();
        assert_eq!(oscillation(&s, g.full()), 1.0);
        let ind = FunctionSpec::Indicator { lo: 0.0, hi: 1.0 }.materialize(&g).unwrap();
        assert_eq!(oscillation(&ind, g.full()), 0.5);
    }

    #[test]
    fn constant_function_has_zero_seminorm() {
        let g = make_grid(-1.0, 1.0, 16).unwrap();
        let u = materialize_weight(&WeightSpec::Constant { c: 1.0 }, &g).unwrap();
        let fam = Family::new(&g, &IntervalFamilySpec::AllAligned).unwrap();
        let c = StepFunction::constant(g, -2.0).unwrap();
        assert_eq!(bmo_u_seminorm(&c, &u, &fam).unwrap().seminorm, 0.0);
        let sharp = sharp_maximal(&c, &fam).unwrap();
        assert!(sharp.f.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn massless_interval_gives_infinity() {
        let g = make_grid(-1.0, 1.0, 8).unwrap();
        let u = materialize_weight(&WeightSpec::Custom { values: vec![0.0, 1.0] }, &g).unwrap();
        let f = FunctionSpec::Random { seed: 1, pieces: 8 }.materialize(&g).unwrap();
        let fam = Family::new(&g, &IntervalFamilySpec::AllAligned).unwrap();
        let r = bmo_u_seminorm(&f, &u, &fam).unwrap();
        assert_eq!(r.seminorm, f64::INFINITY);
        assert!(r.witness.end <= 4);
    }

    #[test]
    fn oversized_all_aligned_is_rejected() {
        let g = make_grid(-1.0, 1.0, 2048).unwrap();
        let fam = Family::new(&g, &IntervalFamilySpec::AllAligned).unwrap();
        let f = StepFunction::constant(g, 1.0).unwrap();
        assert!(matches!(sharp_maximal(&f, &fam), Err(Error::FamilyTooLarge { .. })));
    }

    #[test]
    fn weighted_norms() {
        let g = make_grid(-1.0, 1.0, 64).unwrap();
        let one = materialize_weight(&WeightSpec::Constant { c: 1.0 }, &g).unwrap();
        let f1 = StepFunction::constant(g, 1.0).unwrap();
        assert!((weighted_lp_norm(&f1, &one, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let zero = StepFunction::constant(g, 0.0).unwrap();
        assert_eq!(weighted_lp_norm(&zero, &one, 3.0).unwrap(), 0.0);
        // ∫_{-1}^{1} |x|^{-1/2} = 4
        let u = materialize_weight(&WeightSpec::Power { alpha: -0.5 }, &g).unwrap();
        let s = FunctionSpec::Sign.materialize(&g).unwrap();
        assert!((weighted_lp_norm(&s, &u, 2.0).unwrap() - 2.0).abs() < 1e-13);
        assert_eq!(weighted_lp_norm(&s, &u, 0.5), Err(Error::ExponentBelowOne(0.5)));
    }

    #[test]
    fn sharp_ratio_rejects_constants() {
        let g = make_grid(-1.0, 1.0, 16).unwrap();
        let fam = Family::new(&g, &IntervalFamilySpec::AllAligned).unwrap();
        let c = StepFunction::constant(g, 3.0).unwrap();
        assert!(matches!(sharp_norm_ratio(&c, 2.0, &fam), Err(Error::DegenerateNorm(_))));
        let z = StepFunction::constant(g, 0.0).unwrap();
        assert!(matches!(sharp_norm_ratio(&z, 2.0, &fam), Err(Error::DegenerateNorm(_))));
    }

    #[test]
    fn lpu_ratio_of_isometries() {
        let g = make_grid(-1.0, 1.0, 32).unwrap();
        let u = materialize_weight(&WeightSpec::Power { alpha: -0.5 }, &g).unwrap();
        let f = FunctionSpec::Random { seed: 4, pieces: 16 }.materialize(&g).unwrap();
        assert_eq!(operator_lpu_ratio(&OperatorSpec::Identity, &f, &u, 2.0).unwrap(), 1.0);
        let m = OperatorSpec::Multiplier { symbol: FunctionSpec::Sign };
        let r = operator_lpu_ratio(&m, &f, &u, 3.0).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
        let z = StepFunction::constant(g, 0.0).unwrap();
        assert!(operator_lpu_ratio(&OperatorSpec::Identity, &z, &u, 2.0).is_err());
    }
}

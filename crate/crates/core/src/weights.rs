//! Weight catalog, exact cell-average materialization, Muckenhoupt
//! characteristics, the `A_∞` set condition and reverse Hölder constants.
//!
//! Closed-form weights are all of the shape `c · clip(|x|^β)`, where the
//! clip is an optional floor (`max`) or cap (`min`). That shape is closed
//! under `w ↦ w^s`, so dual weights `w^{-1/(p-1)}` and reverse Hölder powers
//! `w^{1+δ}` are materialized from their own closed form instead of by
//! powering cell averages.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{Extremum, Family};
use crate::grid::{Grid, GridInterval, StepFunction};
use crate::report::extended;
use crate::stats::{ExtendedSum, IntervalStats};

/// Grid refinement factor used by every stability / divergence check.
pub const REFINEMENT_FACTOR: usize = 4;
/// A quantity is stable when it changes by less than this fraction under
/// one refinement.
pub const STABILITY_TOL: f64 = 0.05;
/// A quantity diverges when it grows by at least this factor under one
/// refinement.
pub const DIVERGENCE_GROWTH: f64 = 1.5;
/// Search cap for [`rhi_max_delta`].
pub const DEFAULT_DELTA_HI: f64 = 4.0;
/// Bisection resolution for [`rhi_max_delta`].
pub const DELTA_RESOLUTION: f64 = 1e-3;

/// Closed-form or tabulated weight description.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightSpec {
    Constant { c: f64 },
    /// `|x|^alpha`, `alpha > -1`.
    Power { alpha: f64 },
    /// `max(|x|^alpha, floor)`.
    TruncatedPower { alpha: f64, floor: f64 },
    /// Cell values on a grid with `values.len()` cells (must divide the
    /// target grid's cell count).
    Custom { values: Vec<f64> },
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            WeightSpec::Constant { c } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(Error::BadParameter { name: "c", value: *c, reason: "must be positive" });
                }
            }
            WeightSpec::Power { alpha } => check_alpha(*alpha)?,
            WeightSpec::TruncatedPower { alpha, floor } => {
                check_alpha(*alpha)?;
                if !(floor.is_finite() && *floor > 0.0) {
                    return Err(Error::BadParameter { name: "floor", value: *floor, reason: "must be positive" });
                }
            }
            WeightSpec::Custom { values } => {
                if values.is_empty() {
                    return Err(Error::EmptyInput("custom weight values"));
                }
                for (cell, &value) in values.iter().enumerate() {
                    if !value.is_finite() {
                        return Err(Error::NonFiniteValue { cell, value });
                    }
                    if value < 0.0 {
                        return Err(Error::NegativeWeight { cell, value });
                    }
                }
            }
        }
        Ok(())
    }

    fn profile(&self) -> Option<PowerProfile> {
        match *self {
            WeightSpec::Constant { c } => Some(PowerProfile { coeff: c, exponent: 0.0, clip: Clip::None }),
            WeightSpec::Power { alpha } => Some(PowerProfile { coeff: 1.0, exponent: alpha, clip: Clip::None }),
            WeightSpec::TruncatedPower { alpha, floor } => {
                Some(PowerProfile { coeff: 1.0, exponent: alpha, clip: Clip::Floor(floor) })
            }
            WeightSpec::Custom { .. } => None,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() {
        return Err(Error::BadParameter { name: "alpha", value: alpha, reason: "must be finite" });
    }
    if alpha <= -1.0 {
        return Err(Error::NonIntegrable(alpha));
    }
    Ok(())
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Constant { c } => write!(f, "constant({c})"),
            WeightSpec::Power { alpha } => write!(f, "power({alpha})"),
            WeightSpec::TruncatedPower { alpha, floor } => write!(f, "truncated-power({alpha},{floor})"),
            WeightSpec::Custom { values } => write!(f, "custom[{}]", values.len()),
        }
    }
}

/// The weights exercised by the built-in suites: `1`, `|x|^{-1/2}`,
/// `|x|^{1/2}` and `max(|x|^{1/2}, 0.1)`.
pub fn weight_catalog() -> Vec<WeightSpec> {
    vec![
        WeightSpec::Constant { c: 1.0 },
        WeightSpec::Power { alpha: -0.5 },
        WeightSpec::Power { alpha: 0.5 },
        WeightSpec::TruncatedPower { alpha: 0.5, floor: 0.1 },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Clip {
    None,
    Floor(f64),
    Cap(f64),
}

/// `coeff · clip(|x|^exponent)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PowerProfile {
    coeff: f64,
    exponent: f64,
    clip: Clip,
}

/// `∫_{u0}^{u1} u^β du` for `0 ≤ u0 ≤ u1`, evaluated without cancellation.
fn power_integral(beta: f64, u0: f64, u1: f64) -> f64 {
    if u1 <= u0 {
        return 0.0;
    }
    if beta == 0.0 {
        return u1 - u0;
    }
    let k = beta + 1.0;
    if u0 == 0.0 {
        return if k > 0.0 { u1.powf(k) / k } else { f64::INFINITY };
    }
    let growth = ((u1 - u0) / u0).ln_1p();
    if k == 0.0 {
        growth
    } else {
        u0.powf(k) * (k * growth).exp_m1() / k
    }
}

impl PowerProfile {
    fn powered(&self, s: f64) -> Self {
        let clip = match self.clip {
            Clip::None => Clip::None,
            Clip::Floor(f) if s > 0.0 => Clip::Floor(f.powf(s)),
            Clip::Floor(f) => Clip::Cap(f.powf(s)),
            Clip::Cap(m) if s > 0.0 => Clip::Cap(m.powf(s)),
            Clip::Cap(m) => Clip::Floor(m.powf(s)),
        };
        Self { coeff: self.coeff.powf(s), exponent: self.exponent * s, clip }
    }

    fn scaled(&self, lambda: f64) -> Self {
        Self { coeff: self.coeff * lambda, ..*self }
    }

    /// `∫_{u0}^{u1} clip(u^β) du` on the half line.
    fn half_integral(&self, u0: f64, u1: f64) -> f64 {
        let beta = self.exponent;
        let (threshold, is_floor) = match self.clip {
            Clip::None => return power_integral(beta, u0, u1),
            Clip::Floor(f) => (f, true),
            Clip::Cap(m) => (m, false),
        };
        if beta == 0.0 {
            let level = if is_floor { threshold.max(1.0) } else { threshold.min(1.0) };
            return level * (u1 - u0);
        }
        // u^β crosses the threshold at r; below r the clip is active exactly
        // when (floor, β > 0) or (cap, β < 0).
        let r = threshold.powf(1.0 / beta);
        let clipped_below = is_floor == (beta > 0.0);
        let (lo0, lo1) = (u0, u1.min(r));
        let (hi0, hi1) = (u0.max(r), u1);
        let below = if lo1 > lo0 {
            if clipped_below { threshold * (lo1 - lo0) } else { power_integral(beta, lo0, lo1) }
        } else {
            0.0
        };
        let above = if hi1 > hi0 {
            if clipped_below { power_integral(beta, hi0, hi1) } else { threshold * (hi1 - hi0) }
        } else {
            0.0
        };
        below + above
    }

    /// `∫_{x0}^{x1} w` for `x0 < x1`; `w` is even.
    fn integral(&self, x0: f64, x1: f64) -> f64 {
        let raw = if x1 <= 0.0 {
            self.half_integral(-x1, -x0)
        } else if x0 >= 0.0 {
            self.half_integral(x0, x1)
        } else {
            self.half_integral(0.0, -x0) + self.half_integral(0.0, x1)
        };
        self.coeff * raw
    }

    fn cell_averages(&self, grid: &Grid) -> Vec<f64> {
        let h = grid.h();
        (0..grid.n_cells())
            .map(|c| {
                let (x0, x1) = grid.cell_bounds(c);
                self.integral(x0, x1) / h
            })
            .collect()
    }
}

/// How a power `w^s` of a weight is tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Materialization {
    /// Exact cell averages of the closed form of `w^s` when the weight has
    /// one; cell powering otherwise.
    ClosedForm,
    /// `(cell value)^s`: the step function itself is the weight.
    CellValues,
}

/// A weight materialized on a grid: exact cell averages of its closed form,
/// or the tabulated custom values.
#[derive(Debug, Clone)]
pub struct Weight {
    spec: WeightSpec,
    f: StepFunction,
    profile: Option<PowerProfile>,
    zero_cells: Vec<usize>,
}

/// Tabulates `spec` on `grid` by exact cell averages.
pub fn materialize_weight(spec: &WeightSpec, grid: &Grid) -> Result<Weight> {
    spec.validate()?;
    let profile = spec.profile();
    let values = match (spec, profile) {
        (_, Some(p)) => p.cell_averages(grid),
        (WeightSpec::Custom { values }, None) => {
            let n = grid.n_cells();
            if !n.is_multiple_of(values.len()) {
                return Err(Error::LengthMismatch { expected: n, got: values.len() });
            }
            let k = n / values.len();
            values.iter().flat_map(|v| std::iter::repeat_n(*v, k)).collect()
        }
        _ => unreachable!("closed-form specs always carry a profile"),
    };
    let f = StepFunction::new(*grid, values)?;
    Ok(Weight::from_parts(spec.clone(), f, profile))
}

impl Weight {
    fn from_parts(spec: WeightSpec, f: StepFunction, profile: Option<PowerProfile>) -> Self {
        let zero_cells = f.values().iter().enumerate().filter(|(_, v)| **v == 0.0).map(|(i, _)| i).collect();
        Self { spec, f, profile, zero_cells }
    }

    /// Wraps arbitrary nonnegative cell values as a tabulated weight.
    pub fn from_step(f: StepFunction) -> Result<Self> {
        let spec = WeightSpec::Custom { values: f.values().to_vec() };
        spec.validate()?;
        Ok(Self::from_parts(spec, f, None))
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn function(&self) -> &StepFunction {
        &self.f
    }

    pub fn grid(&self) -> &Grid {
        self.f.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.f.values()
    }

    /// Cells where the weight vanishes (the `A_1` ratio is infinite there).
    pub fn zero_cells(&self) -> &[usize] {
        &self.zero_cells
    }

    pub fn has_closed_form(&self) -> bool {
        self.profile.is_some()
    }

    /// `λ·w`, closed form included.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        let f = self.f.scale(lambda)?;
        Ok(Self::from_parts(self.spec.clone(), f, self.profile.map(|p| p.scaled(lambda))))
    }

    /// The same weight on a grid with `factor` times as many cells:
    /// re-materialized from the closed form, or by splitting cells.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let grid = self.grid().refined(factor)?;
        match self.profile {
            Some(p) => {
                let f = StepFunction::new(grid, p.cell_averages(&grid))?;
                Ok(Self::from_parts(self.spec.clone(), f, Some(p)))
            }
            None => Ok(Self::from_parts(self.spec.clone(), self.f.refined(factor)?, None)),
        }
    }

    /// Cell table of `w^s`; entries may be `+∞` where the closed form of
    /// `w^s` is not integrable or where a zero cell is raised to `s < 0`.
    pub fn powered_values(&self, s: f64, how: Materialization) -> Vec<f64> {
        match (how, self.profile) {
            (Materialization::ClosedForm, Some(p)) => p.powered(s).cell_averages(self.grid()),
            _ => self
                .values()
                .iter()
                .map(|&v| if v == 0.0 && s < 0.0 { f64::INFINITY } else { v.powf(s) })
                .collect(),
        }
    }
}

/// Supremum of a characteristic over a family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacteristicReport {
    #[serde(serialize_with = "extended")]
    pub value: f64,
    pub witness: GridInterval,
    pub witness_coords: (f64, f64),
    /// `1` for `A_1`.
    pub p: f64,
    pub family: String,
    pub materialization: Materialization,
}

impl CharacteristicReport {
    fn new(w: &Weight, e: Extremum, p: f64, family: &Family, how: Materialization) -> Self {
        Self {
            value: e.value,
            witness: e.witness,
            witness_coords: w.grid().coords(e.witness),
            p,
            family: family.label(),
            materialization: how,
        }
    }
}

fn check_family(w: &Weight, family: &Family) -> Result<()> {
    if family.n_cells() != w.grid().n_cells() {
        return Err(Error::GridMismatch("family resolved on a different grid than the weight"));
    }
    Ok(())
}

/// `sup_I average(w, I) / ess inf_I w` over the family; `+∞` where the
/// weight vanishes on part of an interval carrying positive mass.
pub fn a1_characteristic(w: &Weight, family: &Family) -> Result<CharacteristicReport> {
    check_family(w, family)?;
    let stats = IntervalStats::new(w.function());
    let e = family.argmax(|i| {
        let avg = stats.average(i);
        let inf = stats.min(i);
        if inf > 0.0 {
            avg / inf
        } else if avg > 0.0 {
            f64::INFINITY
        } else {
            // w ≡ 0 on I: every constant works.
            1.0
        }
    });
    Ok(CharacteristicReport::new(w, e, 1.0, family, Materialization::CellValues))
}

/// `A_p` characteristic with the dual weight `w^{-1/(p-1)}` taken from the
/// closed form.
pub fn ap_characteristic(w: &Weight, p: f64, family: &Family) -> Result<CharacteristicReport> {
    ap_characteristic_with(w, p, family, Materialization::ClosedForm)
}

/// `sup_I average(w, I) · average(w^{-1/(p-1)}, I)^{p-1}`.
pub fn ap_characteristic_with(
    w: &Weight,
    p: f64,
    family: &Family,
    how: Materialization,
) -> Result<CharacteristicReport> {
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::BadApExponent(p));
    }
    check_family(w, family)?;
    let stats = IntervalStats::new(w.function());
    let dual = ExtendedSum::new(&w.powered_values(-1.0 / (p - 1.0), how));
    let e = family.argmax(|i| {
        let d = dual.average(i);
        if d.is_infinite() {
            return f64::INFINITY;
        }
        stats.average(i) * d.powf(p - 1.0)
    });
    Ok(CharacteristicReport::new(w, e, p, family, how))
}

/// Worst admissible set `E ⊆ I` for the `A_∞` condition at `(δ, ε)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AinfReport {
    pub interval: GridInterval,
    pub delta: f64,
    pub epsilon: f64,
    /// Largest number of cells with `|E| < δ|I|`.
    pub budget_cells: usize,
    /// `max w(E)/w(I)` over unions of at most `budget_cells` cells.
    pub worst_fraction: f64,
    /// `(1 − ε) − worst_fraction`; positive means the condition holds.
    pub margin: f64,
    pub passes: bool,
}

/// Cell budget `k` with `k·h < δ·|I|` for an interval of `n_cells` cells.
pub fn ainf_budget(delta: f64, n_cells: usize) -> usize {
    let target = delta * n_cells as f64;
    // Decimal inputs like 0.1·30 should count as the exact product.
    let k = (target * (1.0 - 1e-12)).ceil() as usize;
    k.saturating_sub(1)
}

/// `A_∞` margin on one interval, `E` ranging over unions of grid cells. The
/// heaviest-cells set maximizes `w(E)` under the cardinality budget.
pub fn ainf_margin(w: &Weight, i: GridInterval, delta: f64, epsilon: f64) -> Result<AinfReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::BadParameter { name: "delta", value: delta, reason: "must lie in (0, 1)" });
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::BadParameter { name: "epsilon", value: epsilon, reason: "must lie in (0, 1)" });
    }
    let cells = &w.values()[i.range()];
    let total = crate::stats::compensated_sum(cells.iter().copied());
    if total <= 0.0 {
        return Err(Error::DegenerateInterval(i));
    }
    let budget = ainf_budget(delta, i.len());
    let mut sorted = cells.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let heavy = crate::stats::compensated_sum(sorted[..budget].iter().copied());
    let worst = heavy / total;
    let margin = (1.0 - epsilon) - worst;
    Ok(AinfReport {
        interval: i,
        delta,
        epsilon,
        budget_cells: budget,
        worst_fraction: worst,
        margin,
        passes: worst < 1.0 - epsilon,
    })
}

/// Uniform `(δ, ε)` check over a family: the interval with the smallest
/// margin, plus how many intervals fail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AinfFamilyReport {
    pub family: String,
    pub worst: AinfReport,
    pub failures: usize,
    pub intervals: usize,
    pub passes: bool,
}

pub fn ainf_family(w: &Weight, family: &Family, delta: f64, epsilon: f64) -> Result<AinfFamilyReport> {
    use rayon::prelude::*;
    check_family(w, family)?;
    let reports: Vec<AinfReport> = family
        .par_iter()
        .map(|i| ainf_margin(w, i, delta, epsilon))
        .collect::<Result<_>>()?;
    let failures = reports.iter().filter(|r| !r.passes).count();
    let worst = reports
        .iter()
        .min_by(|a, b| a.margin.total_cmp(&b.margin).then(a.interval.cmp(&b.interval)))
        .cloned()
        .expect("families are nonempty");
    Ok(AinfFamilyReport { family: family.label(), worst, failures, intervals: reports.len(), passes: failures == 0 })
}

/// Reverse Hölder constant at one exponent, with its refinement check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhiReport {
    pub delta: f64,
    #[serde(serialize_with = "extended")]
    pub constant: f64,
    pub witness: GridInterval,
    pub family: String,
    /// Constant on the grid refined by [`REFINEMENT_FACTOR`].
    #[serde(serialize_with = "extended")]
    pub refined_constant: f64,
    /// Finite, and changed by less than [`STABILITY_TOL`] under refinement.
    pub stable: bool,
}

impl RhiReport {
    /// `refined_constant / constant`; `+∞` once the refined value is.
    pub fn growth(&self) -> f64 {
        growth_ratio(self.constant, self.refined_constant)
    }
}

/// Ratio of a refined value to a coarse one, treating `+∞` as absorbing.
pub fn growth_ratio(coarse: f64, refined: f64) -> f64 {
    if refined.is_infinite() {
        f64::INFINITY
    } else {
        refined / coarse
    }
}

/// `true` when both values are finite and within [`STABILITY_TOL`].
pub fn is_stable(coarse: f64, refined: f64) -> bool {
    coarse.is_finite() && refined.is_finite() && (refined - coarse).abs() < STABILITY_TOL * coarse.abs()
}

fn rhi_sup(w: &Weight, delta: f64, family: &Family) -> Extremum {
    let e = 1.0 + delta;
    let stats = IntervalStats::new(w.function());
    let powered = ExtendedSum::new(&w.powered_values(e, Materialization::ClosedForm));
    family.argmax(|i| {
        let top = powered.average(i);
        let avg = stats.average(i);
        if top.is_infinite() {
            f64::INFINITY
        } else if avg > 0.0 {
            top.powf(1.0 / e) / avg
        } else {
            1.0
        }
    })
}

/// `sup_I (average(w^{1+δ}, I))^{1/(1+δ)} / average(w, I)`, with `w^{1+δ}`
/// taken from the closed form, and the same supremum after one refinement.
pub fn rhi_constant(w: &Weight, delta: f64, family: &Family) -> Result<RhiReport> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::BadParameter { name: "delta", value: delta, reason: "must be positive" });
    }
    check_family(w, family)?;
    let coarse = rhi_sup(w, delta, family);
    let fine_w = w.refined(REFINEMENT_FACTOR)?;
    let fine_family = Family::new(fine_w.grid(), &family.spec().refined(REFINEMENT_FACTOR))?;
    let fine = rhi_sup(&fine_w, delta, &fine_family);
    Ok(RhiReport {
        delta,
        constant: coarse.value,
        witness: coarse.witness,
        family: family.label(),
        refined_constant: fine.value,
        stable: is_stable(coarse.value, fine.value),
    })
}

/// Result of the largest-exponent search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxDeltaReport {
    /// Largest feasible `δ` found, or `0` when none is.
    pub delta: f64,
    pub c_max: f64,
    pub delta_hi: f64,
    pub family: String,
    /// `(δ, constant, stable)` for every probe, in probe order.
    pub probes: Vec<(f64, f64, bool)>,
    pub diagnostic: Option<String>,
}

/// Largest `δ ∈ (0, delta_hi]` whose reverse Hölder constant is at most
/// `c_max` and stable under refinement, by bisection to [`DELTA_RESOLUTION`].
pub fn rhi_max_delta(w: &Weight, family: &Family, c_max: f64) -> Result<MaxDeltaReport> {
    rhi_max_delta_capped(w, family, c_max, DEFAULT_DELTA_HI)
}

pub fn rhi_max_delta_capped(w: &Weight, family: &Family, c_max: f64, delta_hi: f64) -> Result<MaxDeltaReport> {
    if !(c_max.is_finite() && c_max > 1.0) {
        return Err(Error::BadParameter { name: "c_max", value: c_max, reason: "must exceed 1" });
    }
    if !(delta_hi.is_finite() && delta_hi > 0.0) {
        return Err(Error::BadParameter { name: "delta_hi", value: delta_hi, reason: "must be positive" });
    }
    let mut probes = Vec::new();
    let mut feasible = |delta: f64| -> Result<bool> {
        let r = rhi_constant(w, delta, family)?;
        probes.push((delta, r.constant, r.stable));
        Ok(r.stable && r.constant <= c_max)
    };
    let (delta, diagnostic) = if feasible(delta_hi)? {
        (delta_hi, None)
    } else {
        let (mut lo, mut hi) = (0.0, delta_hi);
        while hi - lo > DELTA_RESOLUTION {
            let mid = 0.5 * (lo + hi);
            if feasible(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo == 0.0 {
            let msg = format!(
                "no delta >= {hi:.6} keeps the reverse Hoelder constant <= {c_max} and stable under refinement"
            );
            (0.0, Some(msg))
        } else {
            (lo, None)
        }
    };
    Ok(MaxDeltaReport { delta, c_max, delta_hi, family: family.label(), probes, diagnostic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::IntervalFamilySpec;
    use crate::grid::make_grid;

    fn grid(n: usize) -> Grid {
        make_grid(-1.0, 1.0, n).unwrap()
    }

    #[test]
    fn power_integral_matches_antiderivative() {
        // ∫ x^{-1/2} = 2√x; ∫ x = x²/2; ∫ x^{-1} = ln x.
        assert!((power_integral(-0.5, 0.0, 0.25) - 1.0).abs() < 1e-15);
        assert!((power_integral(-0.5, 0.25, 1.0) - 1.0).abs() < 1e-15);
        assert!((power_integral(1.0, 0.5, 0.75) - (0.5625 - 0.25) / 2.0).abs() < 1e-15);
        assert!((power_integral(-1.0, 1.0, std::f64::consts::E) - 1.0).abs() < 1e-15);
        assert_eq!(power_integral(-1.0, 0.0, 1.0), f64::INFINITY);
        assert_eq!(power_integral(-1.5, 0.0, 1.0), f64::INFINITY);
    }

    #[test]
    fn materialized_cell_values() {
        let g = make_grid(-1.0, 1.0, 8).unwrap();
        let c = materialize_weight(&WeightSpec::Constant { c: 3.0 }, &g).unwrap();
        assert!(c.values().iter().all(|v| *v == 3.0));
        // (2·0.25^{1/2}) / 0.25 on [0, 0.25]
        let w = materialize_weight(&WeightSpec::Power { alpha: -0.5 }, &g).unwrap();
        assert!((w.values()[4] - 4.0).abs() < 1e-14);
        assert!((w.values()[3] - 4.0).abs() < 1e-14);
        let g01 = make_grid(0.0, 1.0, 4).unwrap();
        let lin = materialize_weight(&WeightSpec::Power { alpha: 1.0 }, &g01).unwrap();
        assert!((lin.values()[2] - 0.625).abs() < 1e-15);
    }

    #[test]
    fn straddling_cells_split_at_origin() {
        let g = make_grid(-0.5, 1.5, 2).unwrap();
        let w = materialize_weight(&WeightSpec::Power { alpha: -0.5 }, &g).unwrap();
        // cell [-0.5, 0.5]: 2·(2√0.5)/1
        assert!((w.values()[0] - 4.0 * 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn truncated_power_closed_form() {
        // max(|x|^{1/2}, 0.1) on [0, 1]: 0.1·0.01 + (2/3)(1 − 0.001)
        let g = make_grid(0.0, 1.0, 2).unwrap();
        let w = materialize_weight(&WeightSpec::TruncatedPower { alpha: 0.5, floor: 0.1 }, &g).unwrap();
        let total = w.function().integrate(g.full());
        let want = 0.1 * 0.01 + (2.0 / 3.0) * (1.0 - 0.001);
        assert!((total - want).abs() < 1e-15, "{total} vs {want}");
    }

    #[test]
    fn rejects_bad_specs() {
        let g = grid(8);
        assert_eq!(
            materialize_weight(&WeightSpec::Power { alpha: -1.0 }, &g).unwrap_err(),
            Error::NonIntegrable(-1.0)
        );
        assert!(materialize_weight(&WeightSpec::Constant { c: -2.0 }, &g).is_err());
        assert!(materialize_weight(&WeightSpec::Custom { values: vec![1.0, -1.0] }, &g).is_err());
        assert!(materialize_weight(&WeightSpec::Custom { values: vec![1.0; 3] }, &g).is_err());
    }

    #[test]
    fn dual_of_square_root_at_p_three_halves_is_not_integrable() {
        let g = grid(16);
        let w = materialize_weight(&WeightSpec::Power { alpha: 0.5 }, &g).unwrap();
        let dual = w.powered_values(-2.0, Materialization::ClosedForm);
        assert_eq!(dual[7], f64::INFINITY);
        assert_eq!(dual[8], f64::INFINITY);
        assert!(dual[9].is_finite());
        let cells = w.powered_values(-2.0, Materialization::CellValues);
        assert!(cells.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn constant_weight_characteristics() {
        let g = grid(32);
        let w = materialize_weight(&WeightSpec::Constant { c: 1.0 }, &g).unwrap();
        let fam = Family::new(&g, &IntervalFamilySpec::AllAligned).unwrap();
        let a1 = a1_characteristic(&w, &fam).unwrap();
        assert_eq!(a1.value, 1.0);
        assert_eq!(a1.witness, GridInterval { start: 0, end: 1 });
        assert_eq!(ap_characteristic(&w, 2.0, &fam).unwrap().value, 1.0);
        let c = materialize_weight(&WeightSpec::Constant { c: 7.5 }, &g).unwrap();
        assert!((ap_characteristic(&c, 2.0, &fam).unwrap().value - 1.0).abs() < 1e-15);
        assert_eq!(ap_characteristic(&w, 1.0, &fam).unwrap_err(), Error::BadApExponent(1.0));
    }

    #[test]
    fn zero_cells_make_a1_infinite() {
        let g = grid(8);
        let w = materialize_weight(&WeightSpec::Custom { values: vec![1.0, 0.0, 2.0, 2.0] }, &g).unwrap();
        assert_eq!(w.zero_cells(), &[2, 3]);
        let fam = Family::new(&g, &IntervalFamilySpec::dyadic()).unwrap();
        let a1 = a1_characteristic(&w, &fam).unwrap();
        assert_eq!(a1.value, f64::INFINITY);
        assert_eq!(a1.witness, GridInterval { start: 0, end: 4 });
    }

    #[test]
    fn ainf_budget_is_strict() {
        assert_eq!(ainf_budget(0.5, 8), 3);
        assert_eq!(ainf_budget(0.1, 30), 2);
        assert_eq!(ainf_budget(0.01, 4096), 40);
        assert_eq!(ainf_budget(0.01, 10), 0);
    }

    #[test]
    fn ainf_constant_weight_passes() {
        let g = grid(64);
        let w = materialize_weight(&WeightSpec::Constant { c: 1.0 }, &g).unwrap();
        for i in [g.full(), GridInterval { start: 3, end: 20 }] {
            let r = ainf_margin(&w, i, 0.5, 0.4).unwrap();
            assert!(r.worst_fraction < 0.5);
            assert!(r.passes);
        }
    }

    #[test]
    fn ainf_spike_fails() {
        let g = grid(64);
        let mut values = vec![0.01 / 63.0; 64];
        values[10] = 0.99;
        let w = materialize_weight(&WeightSpec::Custom { values }, &g).unwrap();
        let r = ainf_margin(&w, g.full(), 0.1, 0.5).unwrap();
        assert!((r.worst_fraction - (0.99 + 5.0 * 0.01 / 63.0)).abs() < 1e-12);
        assert!(!r.passes);
    }

    #[test]
    fn ainf_rejects_massless_interval() {
        let g = grid(8);
        let w = materialize_weight(&WeightSpec::Custom { values: vec![0.0, 1.0] }, &g).unwrap();
        let i = GridInterval { start: 0, end: 4 };
        assert_eq!(ainf_margin(&w, i, 0.5, 0.5).unwrap_err(), Error::DegenerateInterval(i));
    }

    #[test]
    fn rhi_constant_weight_is_one() {
        let g = grid(64);
        let w = materialize_weight(&WeightSpec::Constant { c: 2.0 }, &g).unwrap();
        let fam = Family::new(&g, &IntervalFamilySpec::dyadic()).unwrap();
        let r = rhi_constant(&w, 0.7, &fam).unwrap();
        assert!((r.constant - 1.0).abs() < 1e-14);
        assert!(r.stable);
        let m = rhi_max_delta(&w, &fam, 2.0).unwrap();
        assert_eq!(m.delta, DEFAULT_DELTA_HI);
        assert!(m.diagnostic.is_none());
    }
}

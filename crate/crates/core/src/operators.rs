//! Operator catalog acting on step functions, and the tester for uniform
//! local `L^q` bounds `‖Tf‖_{L^q(I)} ≤ C ‖f‖_{L^q(I)}`.
//!
//! Moving averages and the truncated Hilbert transform see `f` extended by
//! zero outside the grid's domain.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::Family;
use crate::functions::{FunctionSpec, TestFunction};
use crate::grid::{GridInterval, StepFunction};
use crate::report::extended;
use crate::stats::{IntervalStats, PrefixSum};

/// Ratios above this multiple of the median ratio are reported.
pub const VIOLATION_FACTOR: f64 = 10.0;
/// Length of the kept ratio and violation lists.
pub const KEEP_WORST: usize = 100;
/// Numerators at or below this count as zero when the denominator vanishes.
pub const ZERO_NUMERATOR: f64 = 1e-12;
/// Exponents probed when none are given.
pub const DEFAULT_QS: [f64; 5] = [1.01, 1.05, 1.1, 1.25, 1.5];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OperatorSpec {
    Identity,
    /// Pointwise multiplication by a bounded symbol.
    Multiplier { symbol: FunctionSpec },
    /// Conditional expectation onto aligned blocks of `2^level` cells.
    DyadicExpectation { level: u32 },
    /// Average over `[x − r, x + r]`.
    MovingAverage { halfwidth: f64 },
    /// Principal value of `(1/π)∫ f(y)/(x−y) dy` with `|x − y| < eps`
    /// excised; `eps` defaults to the cell width.
    TruncatedHilbert { eps: Option<f64> },
    /// Uncentered maximal average of `|f|` over grid-aligned intervals.
    HlMaximal,
}

impl fmt::Display for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorSpec::Identity => write!(f, "identity"),
            OperatorSpec::Multiplier { symbol } => write!(f, "multiplier({symbol})"),
            OperatorSpec::DyadicExpectation { level } => write!(f, "dyadic-expectation({level})"),
            OperatorSpec::MovingAverage { halfwidth } => write!(f, "moving-average({halfwidth})"),
            OperatorSpec::TruncatedHilbert { eps: Some(e) } => write!(f, "truncated-hilbert({e})"),
            OperatorSpec::TruncatedHilbert { eps: None } => write!(f, "truncated-hilbert"),
            OperatorSpec::HlMaximal => write!(f, "hl-maximal"),
        }
    }
}

impl OperatorSpec {
    /// `true` for operators that are linear on step functions.
    pub fn is_linear(&self) -> bool {
        !matches!(self, OperatorSpec::HlMaximal)
    }
}

/// Identity, multiplier by `sign`, dyadic expectation over 4-cell blocks,
/// moving average of half-width 1/8, truncated Hilbert, maximal function.
pub fn operator_catalog() -> Vec<OperatorSpec> {
    vec![
        OperatorSpec::Identity,
        OperatorSpec::Multiplier { symbol: FunctionSpec::Sign },
        OperatorSpec::DyadicExpectation { level: 2 },
        OperatorSpec::MovingAverage { halfwidth: 0.125 },
        OperatorSpec::TruncatedHilbert { eps: None },
        OperatorSpec::HlMaximal,
    ]
}

/// Applies `t` to `f` on `f`'s grid.
pub fn apply_operator(t: &OperatorSpec, f: &StepFunction) -> Result<StepFunction> {
    match t {
        OperatorSpec::Identity => Ok(f.clone()),
        OperatorSpec::Multiplier { symbol } => {
            let m = symbol.materialize(f.grid())?;
            m.mul(f)
        }
        OperatorSpec::DyadicExpectation { level } => dyadic_expectation(f, *level),
        OperatorSpec::MovingAverage { halfwidth } => moving_average(f, *halfwidth),
        OperatorSpec::TruncatedHilbert { eps } => truncated_hilbert(f, *eps),
        OperatorSpec::HlMaximal => hl_maximal(f),
    }
}

fn dyadic_expectation(f: &StepFunction, level: u32) -> Result<StepFunction> {
    let n = f.grid().n_cells();
    let block = 1usize.checked_shl(level).filter(|b| *b <= n).ok_or_else(|| {
        Error::IncompatibleOperator(format!("block of 2^{level} cells does not divide {n} cells"))
    })?;
    let mut out = Vec::with_capacity(n);
    for chunk in f.values().chunks(block) {
        let avg = crate::stats::compensated_sum(chunk.iter().copied()) / block as f64;
        out.extend(std::iter::repeat_n(avg, block));
    }
    StepFunction::new(*f.grid(), out)
}

/// `∫_lo^hi f` with `f` extended by zero.
fn integral_between(f: &StepFunction, prefix: &PrefixSum, lo: f64, hi: f64) -> f64 {
    let g = f.grid();
    let (lo, hi) = (lo.max(g.a()), hi.min(g.b()));
    if hi <= lo {
        return 0.0;
    }
    let n = g.n_cells();
    let h = g.h();
    let cell_of = |x: f64| (((x - g.a()) / h).floor() as usize).min(n - 1);
    let (cl, ch) = (cell_of(lo), cell_of(hi));
    let v = f.values();
    if cl == ch {
        return v[cl] * (hi - lo);
    }
    v[cl] * (g.point(cl + 1) - lo) + h * prefix.range(cl + 1, ch) + v[ch] * (hi - g.point(ch))
}

fn moving_average(f: &StepFunction, r: f64) -> Result<StepFunction> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::IncompatibleOperator(format!("moving-average half-width {r} must be positive")));
    }
    let prefix = PrefixSum::new(f.values().iter().copied());
    let g = *f.grid();
    let values = (0..g.n_cells())
        .map(|c| {
            let x = g.cell_mid(c);
            integral_between(f, &prefix, x - r, x + r) / (2.0 * r)
        })
        .collect();
    StepFunction::new(g, values)
}

/// `∫ dy/(x−y)` over cell `[−k−1/2, −k+1/2]` (in cell units, `x = 0`)
/// minus the excised window `(−e, e)`.
fn hilbert_cell_kernel(k: i64, e: f64) -> f64 {
    let k = k as f64;
    let (y0, y1) = (-k - 0.5, -k + 0.5);
    let mut acc = 0.0;
    // Part left of the window: distances d0 = −y0 > d1 = −min(y1, −e).
    let d0 = -y0;
    let d1 = (-y1).max(e);
    if d0 > d1 {
        acc += ((d0 - d1) / d1).ln_1p();
    }
    // Part right of the window: distances e0 = max(y0, e) < e1 = y1.
    let e0 = y0.max(e);
    let e1 = y1;
    if e1 > e0 {
        acc -= ((e1 - e0) / e0).ln_1p();
    }
    acc
}

fn truncated_hilbert(f: &StepFunction, eps: Option<f64>) -> Result<StepFunction> {
    let g = *f.grid();
    let h = g.h();
    let eps = match eps {
        None => h,
        Some(e) if e.is_finite() && e >= h * (1.0 - 1e-12) => e,
        Some(e) => {
            return Err(Error::IncompatibleOperator(format!("truncation eps {e} is below the cell width {h}")))
        }
    };
    let n = g.n_cells() as i64;
    let e = eps / h;
    // kernel[k + n - 1] for offsets k = c − j in −(n−1) ..= n−1
    let kernel: Vec<f64> = (-(n - 1)..n).map(|k| hilbert_cell_kernel(k, e)).collect();
    let v = f.values();
    let values = (0..n)
        .into_par_iter()
        .map(|c| {
            let s = crate::stats::compensated_sum(
                (0..n).map(|j| v[j as usize] * kernel[(c - j + n - 1) as usize]),
            );
            s / PI
        })
        .collect();
    StepFunction::new(g, values)
}

fn hl_maximal(f: &StepFunction) -> Result<StepFunction> {
    let n = f.grid().n_cells();
    let prefix = PrefixSum::new(f.values().iter().map(|v| v.abs()));
    let values = (0..n)
        .into_par_iter()
        .fold(
            || vec![0.0f64; n],
            |mut acc, s| {
                // Walking e downwards, `best` = max over e' ≥ e of avg[s, e'),
                // which is the best interval starting at s that covers e − 1.
                let mut best = 0.0f64;
                for e in (s + 1..=n).rev() {
                    best = best.max(prefix.range(s, e) / (e - s) as f64);
                    if best > acc[e - 1] {
                        acc[e - 1] = best;
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
    StepFunction::new(*f.grid(), values)
}

/// One `(q, function, interval)` ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioEntry {
    pub q: f64,
    pub function: String,
    pub interval: GridInterval,
    #[serde(serialize_with = "extended")]
    pub ratio: f64,
}

/// Hypothesis results at one exponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QHypothesis {
    pub q: f64,
    /// Max ratio over every recorded pair; `+∞` on any infinite ratio.
    #[serde(serialize_with = "extended")]
    pub best_constant: f64,
    pub witness: Option<(String, GridInterval)>,
    #[serde(serialize_with = "extended")]
    pub median_ratio: f64,
    /// Pairs with a defined ratio.
    pub pairs: usize,
    /// Pairs skipped because `f` and `Tf` both vanish on the interval.
    pub skipped: usize,
    pub violation_count: usize,
    /// Worst violations (infinite, or above 10× the median).
    pub violations: Vec<RatioEntry>,
    /// Worst ratios overall.
    pub worst: Vec<RatioEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub operator: String,
    pub family: String,
    pub functions: Vec<String>,
    pub per_q: Vec<QHypothesis>,
}

impl HypothesisReport {
    pub fn at(&self, q: f64) -> Option<&QHypothesis> {
        self.per_q.iter().find(|r| r.q == q)
    }

    pub fn best_constant(&self, q: f64) -> Option<f64> {
        self.at(q).map(|r| r.best_constant)
    }

    /// `true` when some exponent has a finite constant.
    pub fn any_finite(&self) -> bool {
        self.per_q.iter().any(|r| r.best_constant.is_finite())
    }
}

/// Ordering of kept entries: larger ratio first, then function order, then
/// interval order.
fn worse(a: &(f64, usize, GridInterval), b: &(f64, usize, GridInterval)) -> std::cmp::Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

/// Keeps the `k` worst entries seen so far.
struct TopK {
    k: usize,
    items: Vec<(f64, usize, GridInterval)>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self { k, items: Vec::new() }
    }

    fn push(&mut self, item: (f64, usize, GridInterval)) {
        self.items.push(item);
        if self.items.len() >= 4 * self.k {
            self.compact();
        }
    }

    fn compact(&mut self) {
        self.items.sort_by(worse);
        self.items.truncate(self.k);
    }

    fn finish(mut self) -> Vec<(f64, usize, GridInterval)> {
        self.compact();
        self.items
    }
}

fn lower_median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mid = (v.len() - 1) / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// Best constant `C(q) = max ‖Tf‖_{L^q(I)} / ‖f‖_{L^q(I)}` over test
/// functions and family intervals, per exponent.
pub fn hypothesis_test(
    t: &OperatorSpec,
    tests: &[TestFunction],
    qs: &[f64],
    family: &Family,
) -> Result<HypothesisReport> {
    if tests.is_empty() {
        return Err(Error::EmptyInput("hypothesis test functions"));
    }
    if qs.is_empty() {
        return Err(Error::EmptyInput("hypothesis exponents"));
    }
    if family.is_empty() {
        return Err(Error::EmptyInput("interval family"));
    }
    if let Some(q) = qs.iter().find(|q| !(q.is_finite() && **q > 1.0)) {
        return Err(Error::BadParameter { name: "q", value: *q, reason: "hypothesis exponents must exceed 1" });
    }
    for tf in tests {
        if tf.f.grid().n_cells() != family.n_cells() {
            return Err(Error::GridMismatch("test function and family live on different grids"));
        }
    }
    let stats: Vec<(IntervalStats, IntervalStats)> = tests
        .iter()
        .map(|tf| {
            let image = apply_operator(t, &tf.f)?;
            Ok((IntervalStats::with_powers(&tf.f, qs), IntervalStats::with_powers(&image, qs)))
        })
        .collect::<Result<_>>()?;

    let per_q = qs
        .iter()
        .map(|&q| {
            // NaN marks a skipped pair.
            let ratios: Vec<Vec<f64>> = stats
                .iter()
                .map(|(sf, st)| {
                    family
                        .par_iter()
                        .map(|i| {
                            let num = st.lq_norm(i, q).unwrap();
                            let den = sf.lq_norm(i, q).unwrap();
                            if den > 0.0 {
                                num / den
                            } else if num <= ZERO_NUMERATOR {
                                f64::NAN
                            } else {
                                f64::INFINITY
                            }
                        })
                        .collect()
                })
                .collect();
            summarize(q, tests, &ratios, family)
        })
        .collect();

    Ok(HypothesisReport {
        operator: t.to_string(),
        family: family.label(),
        functions: tests.iter().map(|t| t.id.clone()).collect(),
        per_q,
    })
}

fn summarize(q: f64, tests: &[TestFunction], ratios: &[Vec<f64>], family: &Family) -> QHypothesis {
    let finite: Vec<f64> = ratios.iter().flatten().copied().filter(|r| r.is_finite()).collect();
    let median = lower_median(finite);
    let threshold = if median.is_nan() { f64::INFINITY } else { VIOLATION_FACTOR * median };
    let mut worst = TopK::new(KEEP_WORST);
    let mut violations = TopK::new(KEEP_WORST);
    let mut violation_count = 0;
    let mut pairs = 0;
    let mut skipped = 0;
    let mut best: Option<(f64, usize, GridInterval)> = None;
    for (fi, rs) in ratios.iter().enumerate() {
        for (i, &r) in family.iter().zip(rs) {
            if r.is_nan() {
                skipped += 1;
                continue;
            }
            pairs += 1;
            let item = (r, fi, i);
            if best.is_none_or(|b| worse(&item, &b).is_lt()) {
                best = Some(item);
            }
            worst.push(item);
            if r.is_infinite() || r > threshold {
                violation_count += 1;
                violations.push(item);
            }
        }
    }
    let entry = |(r, fi, i): (f64, usize, GridInterval)| RatioEntry {
        q,
        function: tests[fi].id.clone(),
        interval: i,
        ratio: r,
    };
    QHypothesis {
        q,
        best_constant: best.map_or(0.0, |b| b.0),
        witness: best.map(|(_, fi, i)| (tests[fi].id.clone(), i)),
        median_ratio: median,
        pairs,
        skipped,
        violation_count,
        violations: violations.finish().into_iter().map(entry).collect(),
        worst: worst.finish().into_iter().map(entry).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::IntervalFamilySpec;
    use crate::grid::make_grid;

    #[test]
    fn kernel_is_antisymmetric_and_matches_log() {
        for k in 1..20 {
            assert_eq!(hilbert_cell_kernel(k, 1.0), -hilbert_cell_kernel(-k, 1.0));
        }
        // far cell: ln((k+1/2)/(k−1/2))
        let k = 7;
        let want = ((k as f64 + 0.5) / (k as f64 - 0.5)).ln();
        assert!((hilbert_cell_kernel(k, 1.0) - want).abs() < 1e-15);
        assert_eq!(hilbert_cell_kernel(0, 1.0), 0.0);
        // half excised: cell [−1.5, −0.5] with e = 1 keeps [−1.5, −1]
        assert!((hilbert_cell_kernel(1, 1.0) - 1.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn dyadic_expectation_rejects_oversized_blocks() {
        let g = make_grid(-1.0, 1.0, 8).unwrap();
        let f = StepFunction::constant(g, 1.0).unwrap();
        let t = OperatorSpec::DyadicExpectation { level: 4 };
        assert!(matches!(apply_operator(&t, &f), Err(Error::IncompatibleOperator(_))));
        let t = OperatorSpec::DyadicExpectation { level: 3 };
        assert!(apply_operator(&t, &f).is_ok());
    }

    #[test]
    fn hilbert_rejects_small_eps() {
        let g = make_grid(-1.0, 1.0, 8).unwrap();
        let f = StepFunction::constant(g, 1.0).unwrap();
        let t = OperatorSpec::TruncatedHilbert { eps: Some(0.1) };
        assert!(matches!(apply_operator(&t, &f), Err(Error::IncompatibleOperator(_))));
    }

    #[test]
    fn moving_average_of_constant_interior() {
        let g = make_grid(-1.0, 1.0, 16).unwrap();
        let f = StepFunction::constant(g, 2.0).unwrap();
        let t = apply_operator(&OperatorSpec::MovingAverage { halfwidth: 0.25 }, &f).unwrap();
        // interior cells see the full window; the edge cell loses a quarter... of it
        assert!((t.values()[8] - 2.0).abs() < 1e-15);
        // cell 0 midpoint −0.9375: window [−1.1875, −0.6875] keeps 0.3125 of 0.5
        assert!((t.values()[0] - 2.0 * 0.3125 / 0.5).abs() < 1e-15);
    }

    #[test]
    fn hl_maximal_matches_brute_force() {
        let g = make_grid(-1.0, 1.0, 16).unwrap();
        let f = FunctionSpec::Random { seed: 11, pieces: 16 }.materialize(&g).unwrap();
        let m = apply_operator(&OperatorSpec::HlMaximal, &f).unwrap();
        for c in 0..16 {
            let mut best = 0.0f64;
            for s in 0..=c {
                for e in c + 1..=16 {
                    let avg: f64 = f.values()[s..e].iter().map(|v| v.abs()).sum::<f64>() / (e - s) as f64;
                    best = best.max(avg);
                }
            }
            assert!((m.values()[c] - best).abs() < 1e-14, "cell {c}");
        }
    }

    #[test]
    fn identity_constant_is_exactly_one() {
        let g = make_grid(-1.0, 1.0, 32).unwrap();
        let tests = crate::functions::materialize_all(&crate::functions::default_test_set(1), &g).unwrap();
        let fam = Family::new(&g, &IntervalFamilySpec::standard()).unwrap();
        let r = hypothesis_test(&OperatorSpec::Identity, &tests, &DEFAULT_QS, &fam).unwrap();
        for q in &r.per_q {
            assert_eq!(q.best_constant, 1.0);
            assert_eq!(q.violation_count, 0);
        }
    }

    #[test]
    fn hypothesis_rejects_empty_inputs() {
        let g = make_grid(-1.0, 1.0, 8).unwrap();
        let fam = Family::new(&g, &IntervalFamilySpec::dyadic()).unwrap();
        assert!(matches!(
            hypothesis_test(&OperatorSpec::Identity, &[], &[1.5], &fam),
            Err(Error::EmptyInput(_))
        ));
        let tests = vec![TestFunction::new("one", StepFunction::constant(g, 1.0).unwrap())];
        assert!(matches!(
            hypothesis_test(&OperatorSpec::Identity, &tests, &[], &fam),
            Err(Error::EmptyInput(_))
        ));
        assert!(hypothesis_test(&OperatorSpec::Identity, &tests, &[1.0], &fam).is_err());
    }

    #[test]
    fn lower_median_picks_middle() {
        assert_eq!(lower_median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(lower_median(vec![4.0, 1.0, 2.0, 3.0]), 2.0);
        assert!(lower_median(vec![]).is_nan());
    }
}

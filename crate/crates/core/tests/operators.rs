use std::f64::consts::PI;

use bmolab::functions::{default_test_set, materialize_all, TestFunction};
use bmolab::operators::{hypothesis_test, operator_catalog, DEFAULT_QS};
use bmolab::{
    apply_operator, make_grid, Error, Family, FunctionSpec, Grid, GridInterval, IntervalFamilySpec, OperatorSpec,
    StepFunction, Window,
};
use proptest::prelude::*;

fn grid(n: usize) -> Grid {
    make_grid(-1.0, 1.0, n).unwrap()
}

/// `(1/π) Σ_J f_J ∫_{J \ (x−ε, x+ε)} dy/(x−y)`, splitting each cell at the
/// window edges and using `ln|x − l| − ln|x − r|` on each piece.
fn hilbert_oracle(f: &StepFunction, eps: f64) -> Vec<f64> {
    let g = f.grid();
    (0..g.n_cells())
        .map(|c| {
            let x = g.cell_mid(c);
            let mut acc = 0.0;
            for j in 0..g.n_cells() {
                let (y0, y1) = g.cell_bounds(j);
                let pieces = [(y0, y1.min(x - eps)), (y0.max(x + eps), y1)];
                for (l, r) in pieces {
                    if r > l {
                        acc += f.values()[j] * ((x - l).abs().ln() - (x - r).abs().ln());
                    }
                }
            }
            acc / PI
        })
        .collect()
}

/// Window average by explicit overlap lengths with every cell.
fn moving_average_oracle(f: &StepFunction, r: f64) -> Vec<f64> {
    let g = f.grid();
    (0..g.n_cells())
        .map(|c| {
            let x = g.cell_mid(c);
            let mut acc = 0.0;
            for j in 0..g.n_cells() {
                let (y0, y1) = g.cell_bounds(j);
                let overlap = (y1.min(x + r) - y0.max(x - r)).max(0.0);
                acc += f.values()[j] * overlap;
            }
            acc / (2.0 * r)
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn identity_and_dyadic_expectation_on_sign() {
    let g = grid(64);
    let sign = FunctionSpec::Sign.materialize(&g).unwrap();
    assert_eq!(apply_operator(&OperatorSpec::Identity, &sign).unwrap(), sign);
    for level in 0..6 {
        assert_eq!(apply_operator(&OperatorSpec::DyadicExpectation { level }, &sign).unwrap(), sign);
    }
    let flat = apply_operator(&OperatorSpec::DyadicExpectation { level: 6 }, &sign).unwrap();
    assert!(flat.values().iter().all(|v| *v == 0.0));
    assert!(matches!(
        apply_operator(&OperatorSpec::DyadicExpectation { level: 7 }, &sign),
        Err(Error::IncompatibleOperator(_))
    ));
}

#[test]
fn hilbert_matches_log_antiderivative() {
    let g = grid(32);
    let f = FunctionSpec::Random { seed: 5, pieces: 32 }.materialize(&g).unwrap();
    for eps in [None, Some(g.h()), Some(1.7 * g.h()), Some(0.3)] {
        let t = apply_operator(&OperatorSpec::TruncatedHilbert { eps }, &f).unwrap();
        let want = hilbert_oracle(&f, eps.unwrap_or(g.h()));
        assert!(max_abs_diff(t.values(), &want) < 1e-12, "eps {eps:?}");
    }
    assert!(matches!(
        apply_operator(&OperatorSpec::TruncatedHilbert { eps: Some(0.5 * g.h()) }, &f),
        Err(Error::IncompatibleOperator(_))
    ));
}

#[test]
fn hilbert_of_indicator_far_from_support() {
    // Outside the support, Tf(x) = (1/π) ln(|x|/|x − 1|); at x = −0.5 this is ln(1/3)/π.
    let g = grid(1024);
    let ind = FunctionSpec::Indicator { lo: 0.0, hi: 1.0 }.materialize(&g).unwrap();
    let t = apply_operator(&OperatorSpec::TruncatedHilbert { eps: None }, &ind).unwrap();
    for c in 0..400 {
        let x = g.cell_mid(c);
        let want = (x.abs() / (x - 1.0).abs()).ln() / PI;
        assert!((t.values()[c] - want).abs() < 1e-12, "cell {c}");
    }
    let c = g.point_index(-0.5).unwrap();
    let near = 0.5 * (t.values()[c - 1] + t.values()[c]);
    assert!((near - (1.0f64 / 3.0).ln() / PI).abs() < 1e-5);
    assert!((near + 0.3497).abs() < 1e-4);
}

#[test]
fn moving_average_matches_overlap_oracle() {
    let g = grid(64);
    let f = FunctionSpec::Random { seed: 9, pieces: 16 }.materialize(&g).unwrap();
    for r in [0.01, g.h(), 0.1, 0.125, 0.7, 3.0] {
        let t = apply_operator(&OperatorSpec::MovingAverage { halfwidth: r }, &f).unwrap();
        assert!(max_abs_diff(t.values(), &moving_average_oracle(&f, r)) < 1e-13, "r = {r}");
    }
    assert!(apply_operator(&OperatorSpec::MovingAverage { halfwidth: 0.0 }, &f).is_err());
}

#[test]
fn identity_hypothesis_constant_is_one() {
    let g = grid(128);
    let tests = materialize_all(&default_test_set(3), &g).unwrap();
    let fam = Family::new(&g, &IntervalFamilySpec::AllAligned).unwrap();
    let r = hypothesis_test(&OperatorSpec::Identity, &tests, &DEFAULT_QS, &fam).unwrap();
    assert_eq!(r.per_q.len(), 5);
    for q in &r.per_q {
        assert_eq!(q.best_constant, 1.0);
        assert!(q.worst.iter().all(|e| e.ratio <= q.best_constant));
    }
}

#[test]
fn dyadic_expectation_contracts_on_coarse_dyadic_intervals() {
    let g = grid(64);
    let specs: Vec<FunctionSpec> = (0..20).map(|s| FunctionSpec::Random { seed: s, pieces: 64 }).collect();
    let tests = materialize_all(&specs, &g).unwrap();
    for level in 0..=4u32 {
        let fam = Family::new(&g, &IntervalFamilySpec::Dyadic { min_cells: 1 << level }).unwrap();
        let r = hypothesis_test(&OperatorSpec::DyadicExpectation { level }, &tests, &DEFAULT_QS, &fam).unwrap();
        for q in &r.per_q {
            assert!(q.best_constant <= 1.0 + 1e-9, "level {level} q {}: {}", q.q, q.best_constant);
        }
    }
}

#[test]
fn hilbert_hypothesis_records_an_infinite_witness() {
    let g = grid(64);
    let f = TestFunction::from_spec(&FunctionSpec::Indicator { lo: 0.0, hi: 0.25 }, &g).unwrap();
    let i = g.interval_at(0.5, 0.75).unwrap();
    let tf = apply_operator(&OperatorSpec::TruncatedHilbert { eps: None }, &f.f).unwrap();
    // midpoint-rule oracle of (1/π)∫_0^{1/4} dy/(x−y) on I
    for c in i.range() {
        let x = g.cell_mid(c);
        let m = 4000;
        let direct: f64 = (0..m).map(|k| 0.25 / m as f64 / (x - 0.25 * (k as f64 + 0.5) / m as f64)).sum::<f64>() / PI;
        assert!((tf.values()[c] - direct).abs() < 1e-6);
        assert!(direct.abs() > 0.01);
    }
    let fam = Family::new(&g, &IntervalFamilySpec::sliding(vec![Window::Cells(i.len())], i.len())).unwrap();
    let r = hypothesis_test(&OperatorSpec::TruncatedHilbert { eps: None }, &[f], &[1.5], &fam).unwrap();
    let q = &r.per_q[0];
    assert_eq!(q.best_constant, f64::INFINITY);
    assert!(q.violations.iter().any(|v| v.interval == i && v.ratio == f64::INFINITY));
}

#[test]
fn hypothesis_rejects_bad_inputs() {
    let g = grid(16);
    let fam = Family::new(&g, &IntervalFamilySpec::dyadic()).unwrap();
    assert!(matches!(hypothesis_test(&OperatorSpec::Identity, &[], &[1.5], &fam), Err(Error::EmptyInput(_))));
    let tests = materialize_all(&default_test_set(1), &g).unwrap();
    assert!(hypothesis_test(&OperatorSpec::Identity, &tests, &[0.9], &fam).is_err());
    let other = Family::new(&grid(32), &IntervalFamilySpec::dyadic()).unwrap();
    assert!(matches!(hypothesis_test(&OperatorSpec::Identity, &tests, &[1.5], &other), Err(Error::GridMismatch(_))));
}

fn step_function(n: usize) -> impl Strategy<Value = StepFunction> {
    prop::collection::vec(-3.0f64..3.0, n).prop_map(move |v| StepFunction::new(grid(n), v).unwrap())
}

fn linear_operator() -> impl Strategy<Value = OperatorSpec> {
    prop::sample::select(operator_catalog().into_iter().filter(|t| t.is_linear()).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_operators_are_linear(t in linear_operator(), f in step_function(32), g in step_function(32), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let lhs = apply_operator(&t, &f.lin_comb(a, &g, b).unwrap()).unwrap();
        let rhs = apply_operator(&t, &f).unwrap().lin_comb(a, &apply_operator(&t, &g).unwrap(), b).unwrap();
        prop_assert!(max_abs_diff(lhs.values(), rhs.values()) <= 1e-9);
    }

    #[test]
    fn maximal_function_is_sublinear_and_dominating(f in step_function(16), g in step_function(16)) {
        let m = |x: &StepFunction| apply_operator(&OperatorSpec::HlMaximal, x).unwrap();
        let (mf, mg, mfg) = (m(&f), m(&g), m(&f.add(&g).unwrap()));
        for c in 0..16 {
            prop_assert!(mfg.values()[c] <= mf.values()[c] + mg.values()[c] + 1e-12);
        }
        for s in 0..16 {
            for e in s + 1..=16 {
                let avg = f.average(GridInterval { start: s, end: e }).abs();
                for c in s..e {
                    prop_assert!(mf.values()[c] >= avg - 1e-12);
                }
            }
        }
    }

    #[test]
    fn dyadic_expectation_is_idempotent(f in step_function(64), level in 0u32..7) {
        let t = OperatorSpec::DyadicExpectation { level };
        let once = apply_operator(&t, &f).unwrap();
        let twice = apply_operator(&t, &once).unwrap();
        prop_assert!(max_abs_diff(once.values(), twice.values()) <= 1e-14);
    }

    #[test]
    fn multiplier_constant_is_bounded_by_its_symbol(seed in 0u64..1000, fseed in 0u64..1000) {
        let g = grid(64);
        let symbol = FunctionSpec::Random { seed, pieces: 16 };
        let bound = symbol.materialize(&g).unwrap().sup_norm();
        let tests = materialize_all(&default_test_set(fseed), &g).unwrap();
        let fam = Family::new(&g, &IntervalFamilySpec::standard()).unwrap();
        let r = hypothesis_test(&OperatorSpec::Multiplier { symbol }, &tests, &DEFAULT_QS, &fam).unwrap();
        for q in &r.per_q {
            prop_assert!(q.best_constant <= bound * (1.0 + 1e-12));
        }
    }
}

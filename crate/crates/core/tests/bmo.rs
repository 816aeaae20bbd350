use bmolab::bmo::{
    bmo_seminorm, bmo_u_seminorm, operator_lpu_ratio, oscillation, sharp_maximal, sharp_norm_ratio, weighted_lp_norm,
};
use bmolab::functions::materialize_all;
use bmolab::{
    apply_operator, make_grid, materialize_weight, Error, Family, FunctionSpec, Grid, GridInterval, IntervalFamilySpec,
    OperatorSpec, StepFunction, Weight, WeightSpec, Window,
};
use proptest::prelude::*;

fn grid(n: usize) -> Grid {
    make_grid(-1.0, 1.0, n).unwrap()
}

fn all_aligned(g: &Grid) -> Family {
    Family::new(g, &IntervalFamilySpec::AllAligned).unwrap()
}

fn one(g: &Grid) -> Weight {
    materialize_weight(&WeightSpec::Constant { c: 1.0 }, g).unwrap()
}

#[test]
fn oscillation_closed_forms() {
    // sign on [−a, b]: 4ab/(a+b)²; indicator of [0, ·] on [−a, b]: 2ab/(a+b)²
    let g = grid(64);
    let sign = FunctionSpec::Sign.materialize(&g).unwrap();
    let ind = FunctionSpec::Indicator { lo: 0.0, hi: 1.0 }.materialize(&g).unwrap();
    for (s, e) in [(0, 64), (16, 64), (30, 40), (8, 33)] {
        let i = GridInterval { start: s, end: e };
        let (a, b) = ((32 - s) as f64, (e - 32) as f64);
        let want = 4.0 * a * b / ((a + b) * (a + b));
        assert!((oscillation(&sign, i) - want).abs() < 1e-15);
        assert!((oscillation(&ind, i) - want / 2.0).abs() < 1e-15);
    }
}

#[test]
fn sign_has_unit_bmo_norm_on_even_grids() {
    for n in [2, 8, 32, 128] {
        let g = grid(n);
        let sign = FunctionSpec::Sign.materialize(&g).unwrap();
        let r = bmo_seminorm(&sign, &all_aligned(&g)).unwrap();
        assert!((r.seminorm - 1.0).abs() < 1e-9);
        assert_eq!(r.witness, g.full());
        let u = bmo_u_seminorm(&sign, &one(&g), &all_aligned(&g)).unwrap();
        assert_eq!(u.seminorm, r.seminorm);
    }
}

#[test]
fn weighted_sign_norm_matches_brute_force() {
    let g = grid(256);
    let sign = FunctionSpec::Sign.materialize(&g).unwrap();
    let u = materialize_weight(&WeightSpec::Power { alpha: -0.5 }, &g).unwrap();
    let r = bmo_u_seminorm(&sign, &u, &all_aligned(&g)).unwrap();
    assert!((r.seminorm - 0.5).abs() < 1e-6);
    assert_eq!(r.witness, g.full());
    assert_eq!(r.witness_coords, (-1.0, 1.0));
    let v = sign.values();
    let mut best = 0.0f64;
    for s in 0..256 {
        for e in s + 1..=256 {
            let len = (e - s) as f64;
            let m: f64 = v[s..e].iter().sum::<f64>() / len;
            let osc: f64 = v[s..e].iter().map(|x| (x - m).abs()).sum::<f64>() / len;
            let avg: f64 = u.values()[s..e].iter().sum::<f64>() / len;
            best = best.max(osc / avg);
        }
    }
    assert!((r.seminorm - best).abs() < 1e-12);
}

#[test]
fn sharp_fields_of_sign_and_indicator() {
    let g = grid(256);
    let fam = all_aligned(&g);
    let s = sharp_maximal(&FunctionSpec::Sign.materialize(&g).unwrap(), &fam).unwrap();
    assert!(s.f.values().iter().all(|v| (v - 1.0).abs() < 0.01));
    let ind = FunctionSpec::Indicator { lo: 0.0, hi: 1.0 }.materialize(&g).unwrap();
    let s = sharp_maximal(&ind, &fam).unwrap();
    assert!(s.f.values().iter().all(|v| (v - 0.5).abs() < 0.005));
}

#[test]
fn sharp_norm_ratios() {
    let g = grid(256);
    let fam = all_aligned(&g);
    let sign = FunctionSpec::Sign.materialize(&g).unwrap();
    assert!((sharp_norm_ratio(&sign, 2.0, &fam).unwrap() - 1.0).abs() < 1e-12);
    // f♯ ≡ 1/2 on [−1, 1] while ‖1_{[0,1]}‖₂ = 1: ratio 0.5·√2
    let ind = FunctionSpec::Indicator { lo: 0.0, hi: 1.0 }.materialize(&g).unwrap();
    assert!((sharp_norm_ratio(&ind, 2.0, &fam).unwrap() - 0.5 * 2f64.sqrt()).abs() < 1e-12);
    let c = StepFunction::constant(g, 2.0).unwrap();
    assert!(matches!(sharp_norm_ratio(&c, 2.0, &fam), Err(Error::DegenerateNorm(_))));
    assert!(matches!(sharp_norm_ratio(&sign, 1.0, &fam), Err(Error::BadApExponent(_))));
}

#[test]
fn weighted_norm_examples() {
    let g = grid(128);
    let u = materialize_weight(&WeightSpec::Power { alpha: -0.5 }, &g).unwrap();
    let sign = FunctionSpec::Sign.materialize(&g).unwrap();
    assert!((weighted_lp_norm(&sign, &u, 2.0).unwrap() - 2.0).abs() < 1e-13);
    assert!((weighted_lp_norm(&StepFunction::constant(g, 1.0).unwrap(), &one(&g), 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn dyadic_expectation_contracts_l2() {
    let g = grid(64);
    let specs: Vec<FunctionSpec> = (0..20).map(|s| FunctionSpec::Random { seed: 100 + s, pieces: 64 }).collect();
    for f in materialize_all(&specs, &g).unwrap() {
        for level in 0..=6 {
            let r = operator_lpu_ratio(&OperatorSpec::DyadicExpectation { level }, &f.f, &one(&g), 2.0).unwrap();
            assert!(r <= 1.0 + 1e-12, "{} level {level}: {r}", f.id);
        }
    }
}

fn step_function() -> impl Strategy<Value = StepFunction> {
    (1u32..6).prop_flat_map(|k| {
        let n = 1usize << k;
        prop::collection::vec(-5.0f64..5.0, n).prop_map(move |v| StepFunction::new(grid(n), v).unwrap())
    })
}

fn with_interval() -> impl Strategy<Value = (StepFunction, GridInterval)> {
    step_function().prop_flat_map(|f| {
        let n = f.grid().n_cells();
        (Just(f), (0..n)).prop_flat_map(move |(f, s)| {
            (Just(f), (s + 1..=n).prop_map(move |e| GridInterval { start: s, end: e }))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oscillation_is_shift_invariant_and_homogeneous((f, i) in with_interval(), c in -50.0f64..50.0, lambda in -4.0f64..4.0) {
        let o = oscillation(&f, i);
        let shifted = f.map(|v| v + c).unwrap();
        prop_assert!((oscillation(&shifted, i) - o).abs() <= 1e-12 * (1.0 + c.abs()));
        let scaled = f.scale(lambda).unwrap();
        prop_assert!((oscillation(&scaled, i) - lambda.abs() * o).abs() <= 1e-12 * (1.0 + o));
    }

    #[test]
    fn mean_is_nearly_best_constant((f, i) in with_interval(), c in -10.0f64..10.0) {
        let dev = f.map(|v| (v - c).abs()).unwrap().average(i);
        prop_assert!(oscillation(&f, i) <= 2.0 * dev + 1e-12);
        prop_assert!(oscillation(&f, i) >= 0.0);
    }

    #[test]
    fn sharp_is_bounded_by_twice_the_maximal_average(f in step_function()) {
        let g = *f.grid();
        let fam = all_aligned(&g);
        let sharp = sharp_maximal(&f, &fam).unwrap();
        let hl = apply_operator(&OperatorSpec::HlMaximal, &f).unwrap();
        for (s, m) in sharp.f.values().iter().zip(hl.values()) {
            prop_assert!(*s >= 0.0);
            prop_assert!(*s <= 2.0 * m * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn larger_families_never_decrease(f in step_function(), w in prop::collection::vec(0.1f64..10.0, 2)) {
        let g = *f.grid();
        let n = g.n_cells();
        let u = materialize_weight(&WeightSpec::Custom { values: w }, &g).unwrap();
        let small = Family::new(&g, &IntervalFamilySpec::dyadic()).unwrap();
        let mid = Family::new(&g, &IntervalFamilySpec::Union(vec![
            IntervalFamilySpec::dyadic(),
            IntervalFamilySpec::sliding(vec![Window::Cells((n / 2).max(1))], 1),
        ])).unwrap();
        let big = all_aligned(&g);
        let b = |fam: &Family| bmo_u_seminorm(&f, &u, fam).unwrap().seminorm;
        prop_assert!(b(&small) <= b(&mid) && b(&mid) <= b(&big));
        let s_small = sharp_maximal(&f, &small).unwrap();
        let s_big = sharp_maximal(&f, &big).unwrap();
        for (a, c) in s_small.f.values().iter().zip(s_big.f.values()) {
            prop_assert!(a <= c);
        }
    }

    #[test]
    fn unit_weight_gives_classical_bmo(f in step_function()) {
        let g = *f.grid();
        let fam = all_aligned(&g);
        prop_assert_eq!(bmo_u_seminorm(&f, &one(&g), &fam).unwrap().seminorm, bmo_seminorm(&f, &fam).unwrap().seminorm);
    }
}

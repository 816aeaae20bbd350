//! Built-in acceptance suite: twelve criteria, each reported as one
//! pass/fail line.

use std::path::Path;
use std::time::Instant;

use crate::bmo::{bmo_seminorm, bmo_u_seminorm, sharp_maximal};
use crate::error::Result;
use crate::family::{Family, IntervalFamilySpec};
use crate::functions::{default_test_set, materialize_all, FunctionSpec, TestFunction};
use crate::grid::{make_grid, Grid};
use crate::harness::{a1_gate, audit_suite, convergence_study, theorem_verify, StudySubject, Verdict};
use crate::operators::{hypothesis_test, operator_catalog, OperatorSpec, DEFAULT_QS};
use crate::run::{execute, render_files};
use crate::scenario::Scenario;
use crate::weights::{
    a1_characteristic, ap_characteristic, ap_characteristic_with, materialize_weight, rhi_constant, weight_catalog,
    Materialization, Weight, WeightSpec,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        format!("criterion {:>2} {status}  {}: {}", self.id, self.name, self.detail)
    }
}

fn outcome(id: u32, name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> CriterionOutcome {
    match body() {
        Ok((passed, detail)) => CriterionOutcome { id, name, passed, detail },
        Err(e) => CriterionOutcome { id, name, passed: false, detail: format!("error: {e}") },
    }
}

fn grid(n: usize) -> Grid {
    make_grid(-1.0, 1.0, n).expect("valid grid")
}

fn weight(spec: WeightSpec, g: &Grid) -> Result<Weight> {
    materialize_weight(&spec, g)
}

pub fn constant_weight_exactness() -> CriterionOutcome {
    outcome(1, "constant-weight exactness", || {
        let start = Instant::now();
        let g = grid(1024);
        let fam = Family::new(&g, &IntervalFamilySpec::AllAligned)?;
        let u = weight(WeightSpec::Constant { c: 1.0 }, &g)?;
        let a1 = a1_characteristic(&u, &fam)?.value;
        let ap = ap_characteristic(&u, 2.0, &fam)?.value;
        let secs = start.elapsed().as_secs_f64();
        let ok = (a1 - 1.0).abs() <= 1e-12 && (ap - 1.0).abs() <= 1e-12 && secs < 1.0;
        Ok((ok, format!("a1 = {a1}, ap(2) = {ap}, {secs:.3} s")))
    })
}

pub fn singular_a1_constant() -> CriterionOutcome {
    outcome(2, "singular A_1 constant", || {
        let target = 1.0 + 2f64.sqrt();
        let err = |n: usize| -> Result<(f64, f64)> {
            let g = grid(n);
            let fam = Family::new(&g, &IntervalFamilySpec::standard())?;
            let v = a1_characteristic(&weight(WeightSpec::Power { alpha: -0.5 }, &g)?, &fam)?.value;
            Ok((v, (v - target).abs() / target))
        };
        let (v1, e1) = err(1024)?;
        let (v4, e4) = err(4096)?;
        let ok = e4 < 0.01 && e4 < e1;
        Ok((ok, format!("n=1024: {v1:.6} (err {e1:.2e}), n=4096: {v4:.6} (err {e4:.2e}), target {target:.6}")))
    })
}

pub fn non_a1_detection() -> CriterionOutcome {
    outcome(3, "non-A_1 detection", || {
        let subject = StudySubject { weight: WeightSpec::Power { alpha: 0.5 }, ..StudySubject::default() };
        let s = convergence_study("a1", &subject, &[256, 1024])?;
        let ratio = s.points[1].ratio.unwrap_or(f64::NAN);
        let ok = (ratio - 2.0).abs() <= 0.2 && s.divergent;
        Ok((
            ok,
            format!(
                "a1 {:.4} -> {:.4}, ratio {ratio:.4}, divergent = {}",
                s.points[0].value, s.points[1].value, s.divergent
            ),
        ))
    })
}

pub fn class_monotonicity() -> CriterionOutcome {
    outcome(4, "class monotonicity", || {
        let g = grid(1024);
        let fam = Family::new(&g, &IntervalFamilySpec::standard())?;
        let mut ok = true;
        let mut parts = Vec::new();
        for spec in weight_catalog() {
            let w = weight(spec.clone(), &g)?;
            let a1 = a1_characteristic(&w, &fam)?.value;
            let ap = |p: f64, how| ap_characteristic_with(&w, p, &fam, how).map(|r| r.value);
            let (c3, c2, c15) = (
                ap(3.0, Materialization::CellValues)?,
                ap(2.0, Materialization::CellValues)?,
                ap(1.5, Materialization::CellValues)?,
            );
            let chain = c3 <= c2 + 1e-9 && c2 <= c15 + 1e-9 && c15 <= a1 + 1e-9;
            let (k3, k2, k15) = (
                ap(3.0, Materialization::ClosedForm)?,
                ap(2.0, Materialization::ClosedForm)?,
                ap(1.5, Materialization::ClosedForm)?,
            );
            let closed_chain = k3 <= k2 + 1e-9 && k2 <= k15 + 1e-9;
            ok &= chain && closed_chain;
            parts.push(format!(
                "{spec}: {c3:.4} <= {c2:.4} <= {c15:.4} <= {a1:.4} (closed-form dual {k3:.4} <= {k2:.4} <= {k15:.4})"
            ));
        }
        Ok((ok, parts.join("; ")))
    })
}

pub fn reverse_holder() -> CriterionOutcome {
    outcome(5, "reverse Hoelder", || {
        let target = 2f64.cbrt();
        let w_on = |n: usize| -> Result<(Weight, Family)> {
            let g = grid(n);
            Ok((weight(WeightSpec::Power { alpha: -0.5 }, &g)?, Family::new(&g, &IntervalFamilySpec::Anchored { at: 0.0 })?))
        };
        let (w, fam) = w_on(4096)?;
        let half = rhi_constant(&w, 0.5, &fam)?;
        let (w1, fam1) = w_on(1024)?;
        let c1024 = rhi_constant(&w1, 1.2, &fam1)?.constant;
        let c4096 = rhi_constant(&w, 1.2, &fam)?.constant;
        let growth = crate::weights::growth_ratio(c1024, c4096);
        let stable = crate::weights::is_stable(c1024, c4096);
        let ok = (half.constant - target).abs() / target < 0.01 && growth >= 1.5 && !stable;
        Ok((
            ok,
            format!(
                "delta 0.5: {:.6} (target {target:.6}); delta 1.2: {c1024} -> {c4096}, growth {growth}, stable = {stable}",
                half.constant
            ),
        ))
    })
}

pub fn bmo_values() -> CriterionOutcome {
    outcome(6, "BMO values", || {
        let mut ok = true;
        let mut parts = Vec::new();
        for n in [16, 64, 256] {
            let g = grid(n);
            let fam = Family::new(&g, &IntervalFamilySpec::AllAligned)?;
            let s = FunctionSpec::Sign.materialize(&g)?;
            let v = bmo_seminorm(&s, &fam)?.seminorm;
            ok &= (v - 1.0).abs() <= 1e-9;
            parts.push(format!("n={n}: {v}"));
        }
        let g = grid(1024);
        let fam = Family::new(&g, &IntervalFamilySpec::AllAligned)?;
        let s = FunctionSpec::Sign.materialize(&g)?;
        let r = bmo_u_seminorm(&s, &weight(WeightSpec::Power { alpha: -0.5 }, &g)?, &fam)?;
        ok &= (r.seminorm - 0.5).abs() <= 1e-6 && r.witness == g.full();
        parts.push(format!("weighted: {} on [{}, {}]", r.seminorm, r.witness_coords.0, r.witness_coords.1));
        Ok((ok, parts.join(", ")))
    })
}

pub fn sharp_fields() -> CriterionOutcome {
    outcome(7, "sharp maximal fields", || {
        let g = grid(1024);
        let fam = Family::new(&g, &IntervalFamilySpec::AllAligned)?;
        let mut ok = true;
        let mut parts = Vec::new();
        for (spec, want) in [(FunctionSpec::Sign, 1.0), (FunctionSpec::Indicator { lo: 0.0, hi: 1.0 }, 0.5)] {
            let sharp = sharp_maximal(&spec.materialize(&g)?, &fam)?;
            let worst = sharp.f.values().iter().map(|v| (v - want).abs() / want).fold(0.0, f64::max);
            ok &= worst < 0.01;
            parts.push(format!("{spec}: max rel dev {worst:.2e}"));
        }
        Ok((ok, parts.join(", ")))
    })
}

pub fn hypothesis_tester() -> CriterionOutcome {
    outcome(8, "hypothesis tester", || {
        let g = grid(512);
        let fam = Family::new(&g, &IntervalFamilySpec::standard())?;
        let tests = materialize_all(&default_test_set(1), &g)?;
        let id = hypothesis_test(&OperatorSpec::Identity, &tests, &DEFAULT_QS, &fam)?;
        let id_ok = id.per_q.iter().all(|q| q.best_constant == 1.0);
        let h = hypothesis_test(&OperatorSpec::TruncatedHilbert { eps: None }, &tests, &DEFAULT_QS, &fam)?;
        let first = &h.per_q[0];
        let v = first.violations.first();
        let h_ok = h.per_q.iter().all(|q| q.violation_count > 0 && !q.violations.is_empty());
        let witness = v.map_or("none".to_string(), |v| {
            format!("{} on [{}, {}) ratio {}", v.function, v.interval.start, v.interval.end, v.ratio)
        });
        Ok((id_ok && h_ok, format!("identity exact = {id_ok}; hilbert witness {witness}")))
    })
}

pub fn chain_audit_soundness() -> CriterionOutcome {
    outcome(9, "chain audit soundness", || {
        let start = Instant::now();
        let g = grid(1024);
        let fam = Family::new(&g, &IntervalFamilySpec::standard())?;
        let tests = materialize_all(&default_test_set(1), &g)?;
        let (mut triples, mut uncond, mut cond, mut factor) = (0, 0, 0, 0);
        let mut min_uncond = f64::INFINITY;
        let mut gated = Vec::new();
        for spec in weight_catalog() {
            let u = weight(spec.clone(), &g)?;
            if !a1_gate(&u, &fam)?.passes {
                continue;
            }
            gated.push(spec.to_string());
            let c_rhi: Vec<f64> =
                DEFAULT_QS.iter().map(|q| rhi_constant(&u, q - 1.0, &fam).map(|r| r.constant)).collect::<Result<_>>()?;
            let mut hyp_set = tests.clone();
            for f in &tests {
                hyp_set.push(TestFunction::new(format!("{}*u", f.id), f.f.mul(u.function())?));
            }
            for t in operator_catalog() {
                let h = hypothesis_test(&t, &hyp_set, &DEFAULT_QS, &fam)?;
                let c_hyp: Vec<f64> = h.per_q.iter().map(|q| q.best_constant).collect();
                let a = audit_suite(&t, &u, &tests, &fam, &DEFAULT_QS, &c_hyp, &c_rhi)?;
                triples += a.triples;
                uncond += a.unconditional_failures;
                cond += a.conditional_failures;
                factor += a.factor_out_failures;
                min_uncond = min_uncond.min(a.min_margins[0]).min(a.min_margins[1]);
            }
        }
        let secs = start.elapsed().as_secs_f64();
        let ok = triples >= 10_000 && uncond == 0 && cond == 0 && factor == 0 && secs < 60.0;
        Ok((
            ok,
            format!(
                "{triples} triples over weights [{}]; failures: unconditional {uncond}, factor-out {factor}, conditional {cond}; min unconditional margin {min_uncond:.3e}; {secs:.1} s",
                gated.join(", ")
            ),
        ))
    })
}

pub fn theorem_end_to_end() -> CriterionOutcome {
    outcome(10, "theorem end-to-end", || {
        let g = grid(1024);
        let fam = Family::new(&g, &IntervalFamilySpec::standard())?;
        let tests = materialize_all(&default_test_set(1), &g)?;
        let cases = [
            (OperatorSpec::Identity, WeightSpec::Constant { c: 1.0 }, Verdict::Holds),
            (OperatorSpec::Multiplier { symbol: FunctionSpec::Sign }, WeightSpec::Power { alpha: -0.5 }, Verdict::Holds),
            (OperatorSpec::TruncatedHilbert { eps: None }, WeightSpec::Constant { c: 1.0 }, Verdict::HypothesisFailed),
            (OperatorSpec::TruncatedHilbert { eps: None }, WeightSpec::Power { alpha: -0.5 }, Verdict::HypothesisFailed),
        ];
        let mut ok = true;
        let mut parts = Vec::new();
        for (t, spec, want) in cases {
            let r = theorem_verify(&t, &weight(spec.clone(), &g)?, &tests, &fam, &DEFAULT_QS)?;
            let bound_ok = want != Verdict::Holds || r.empirical_constant <= r.predicted_bound + 1e-9;
            ok &= r.verdict == want && bound_ok;
            parts.push(format!(
                "{t} / {spec}: {} (empirical {:.6}, bound {:.6})",
                r.verdict.as_str(),
                r.empirical_constant,
                r.predicted_bound
            ));
        }
        Ok((ok, parts.join("; ")))
    })
}

/// Exhaustive reimplementations with direct loops.
mod brute {
    pub fn avg(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn osc(v: &[f64]) -> f64 {
        let m = avg(v);
        v.iter().map(|x| (x - m).abs()).sum::<f64>() / v.len() as f64
    }

    pub fn intervals(n: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..n).flat_map(move |s| (s + 1..=n).map(move |e| (s, e)))
    }

    pub fn sup(n: usize, f: impl Fn(usize, usize) -> f64) -> f64 {
        intervals(n).map(|(s, e)| f(s, e)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn a1(w: &[f64]) -> f64 {
        sup(w.len(), |s, e| {
            let c = &w[s..e];
            let m = c.iter().copied().fold(f64::INFINITY, f64::min);
            if m > 0.0 {
                avg(c) / m
            } else if avg(c) > 0.0 {
                f64::INFINITY
            } else {
                1.0
            }
        })
    }

    /// `A_p` with the dual given as cell values.
    pub fn ap(w: &[f64], dual: &[f64], p: f64) -> f64 {
        sup(w.len(), |s, e| avg(&w[s..e]) * avg(&dual[s..e]).powf(p - 1.0))
    }

    /// `∫_{x0}^{x1} |x|^s dx` from the antiderivative, splitting at 0.
    pub fn power_integral(s: f64, x0: f64, x1: f64) -> f64 {
        let prim = |x: f64| x.abs().powf(s + 1.0) / (s + 1.0);
        if x0 >= 0.0 {
            prim(x1) - prim(x0)
        } else if x1 <= 0.0 {
            prim(x0) - prim(x1)
        } else {
            prim(x0) + prim(x1)
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

pub fn brute_force_equivalence() -> CriterionOutcome {
    outcome(11, "brute-force equivalence", || {
        let n = 16;
        let g = grid(n);
        let h = g.h();
        let fam = Family::new(&g, &IntervalFamilySpec::AllAligned)?;
        let tests = materialize_all(&default_test_set(1), &g)?;
        let mut checks = 0;
        let mut mismatches = Vec::new();
        let mut check = |what: String, got: f64, want: f64| {
            checks += 1;
            if !close(got, want) {
                mismatches.push(format!("{what}: {got} vs {want}"));
            }
        };
        for spec in weight_catalog() {
            let u = weight(spec.clone(), &g)?;
            let w = u.values();
            check(format!("a1 {spec}"), a1_characteristic(&u, &fam)?.value, brute::a1(w));
            for p in [1.5, 2.0, 3.0] {
                let cell_dual: Vec<f64> = w.iter().map(|x| x.powf(-1.0 / (p - 1.0))).collect();
                let got = ap_characteristic_with(&u, p, &fam, Materialization::CellValues)?.value;
                check(format!("ap({p}) cells {spec}"), got, brute::ap(w, &cell_dual, p));
            }
            if let WeightSpec::Power { alpha } = spec {
                for p in [2.0, 3.0] {
                    let s = -alpha / (p - 1.0);
                    let dual: Vec<f64> = (0..n)
                        .map(|c| {
                            let (x0, x1) = g.cell_bounds(c);
                            brute::power_integral(s, x0, x1) / h
                        })
                        .collect();
                    check(format!("ap({p}) closed {spec}"), ap_characteristic(&u, p, &fam)?.value, brute::ap(w, &dual, p));
                }
                let e = 1.5;
                let powered: Vec<f64> = (0..n)
                    .map(|c| {
                        let (x0, x1) = g.cell_bounds(c);
                        brute::power_integral(alpha * e, x0, x1) / h
                    })
                    .collect();
                let want = brute::sup(n, |s, t| brute::avg(&powered[s..t]).powf(1.0 / e) / brute::avg(&w[s..t]));
                check(format!("rhi(0.5) {spec}"), rhi_constant(&u, 0.5, &fam)?.constant, want);
            }
            for f in &tests {
                let v = f.f.values();
                let want = brute::sup(n, |s, e| {
                    let o = brute::osc(&v[s..e]);
                    let a = brute::avg(&w[s..e]);
                    if a > 0.0 {
                        o / a
                    } else if o > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                });
                check(format!("bmo_u {} {spec}", f.id), bmo_u_seminorm(&f.f, &u, &fam)?.seminorm, want);
            }
        }
        for f in &tests {
            let v = f.f.values();
            check(format!("bmo {}", f.id), bmo_seminorm(&f.f, &fam)?.seminorm, brute::sup(n, |s, e| brute::osc(&v[s..e])));
            let sharp = sharp_maximal(&f.f, &fam)?;
            for c in 0..n {
                let want = brute::intervals(n)
                    .filter(|(s, e)| *s <= c && c < *e)
                    .map(|(s, e)| brute::osc(&v[s..e]))
                    .fold(0.0, f64::max);
                check(format!("sharp {} cell {c}", f.id), sharp.f.values()[c], want);
            }
        }
        let ok = mismatches.is_empty();
        let detail = if ok {
            format!("{checks} values match")
        } else {
            format!("{} of {checks} differ, first: {}", mismatches.len(), mismatches[0])
        };
        Ok((ok, detail))
    })
}

/// Scenarios whose report files make up the determinism check.
pub const REPORT_SCENARIOS: [(&str, &str); 4] = [
    (
        "characterize",
        "grid.n_cells = 512\nweight.kind = power\nweight.alpha = -0.5\noutputs = characterize-weight, rhi, bmo, sharp\nfamily.kind = standard\nrhi.c_max = 1.5\n",
    ),
    (
        "theorem-multiplier",
        "grid.n_cells = 256\nweight.kind = power\nweight.alpha = -0.5\noperator.kind = multiplier\noperator.symbol = sign\noutputs = theorem\n",
    ),
    ("theorem-hilbert", "grid.n_cells = 256\noperator.kind = truncated-hilbert\noutputs = hypothesis, theorem\n"),
    (
        "converge",
        "weight.kind = power\nweight.alpha = 0.5\noutputs = converge\nconverge.functional = a1\nconverge.sizes = 64, 256, 1024\n",
    ),
];

/// Renders every report scenario into `(relative path, contents)` pairs.
pub fn report_files() -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (name, text) in REPORT_SCENARIOS {
        let report = execute(&Scenario::parse(text)?)?;
        for (file, body) in render_files(&report)? {
            out.push((format!("{name}/{file}"), body));
        }
    }
    Ok(out)
}

pub fn determinism() -> CriterionOutcome {
    outcome(12, "determinism", || {
        let first = report_files()?;
        let second = report_files()?;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool");
        let single = pool.install(report_files)?;
        let same = first == second && first == single;
        let bytes: usize = first.iter().map(|(_, b)| b.len()).sum();
        Ok((same, format!("{} files, {bytes} bytes, identical across 2 runs and a 1-thread run: {same}", first.len())))
    })
}

/// Runs every criterion in order. With `out`, the determinism report files
/// are also written there.
pub fn run_all(out: Option<&Path>) -> Vec<CriterionOutcome> {
    let mut results = vec![
        constant_weight_exactness(),
        singular_a1_constant(),
        non_a1_detection(),
        class_monotonicity(),
        reverse_holder(),
        bmo_values(),
        sharp_fields(),
        hypothesis_tester(),
        chain_audit_soundness(),
        theorem_end_to_end(),
        brute_force_equivalence(),
        determinism(),
    ];
    if let Some(dir) = out {
        let written = report_files().and_then(|files| {
            files.iter().try_for_each(|(name, body)| crate::report::write_atomic(&dir.join(name), body.as_bytes()))
        });
        if let Err(e) = written {
            results.last_mut().expect("twelve criteria").detail.push_str(&format!("; writing reports failed: {e}"));
        }
    }
    results
}

//! Audits of the chain of inequalities behind `T: uL^∞ → BMO_u`, the
//! end-to-end theorem check, and grid-refinement studies.

use rayon::prelude::*;
use serde::Serialize;

use crate::bmo::{bmo_seminorm, bmo_u_seminorm, oscillation, sharp_norm_ratio};
use crate::error::{Error, Result};
use crate::family::{better, Extremum, Family, IntervalFamilySpec};
use crate::functions::{default_test_set, materialize_all, FunctionSpec, TestFunction};
use crate::grid::{make_grid, GridInterval, StepFunction};
use crate::operators::{apply_operator, hypothesis_test, HypothesisReport, OperatorSpec, KEEP_WORST};
use crate::report::extended;
use crate::stats::{le_tol, ExtendedSum, IntervalStats};
use crate::weights::{
    a1_characteristic, ap_characteristic, growth_ratio, is_stable, materialize_weight, rhi_constant,
    Materialization, Weight, WeightSpec, DIVERGENCE_GROWTH, REFINEMENT_FACTOR,
};

/// `a·b` with `0·∞ = ∞`, so an infinite constant never hides behind a zero
/// factor.
fn mul_inf(a: f64, b: f64) -> f64 {
    if a.is_infinite() || b.is_infinite() {
        f64::INFINITY
    } else {
        a * b
    }
}

/// One audited `(f, I, q)` triple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainAuditReport {
    pub function: String,
    pub interval: GridInterval,
    pub q: f64,
    #[serde(serialize_with = "extended")]
    pub c_hyp: f64,
    #[serde(serialize_with = "extended")]
    pub c_rhi: f64,
    /// `2·c_hyp·c_rhi`.
    #[serde(serialize_with = "extended")]
    pub c1: f64,
    /// `oscillation(T(fu), I)`.
    pub s0: f64,
    /// `2·average(|T(fu)|, I)`.
    pub s1: f64,
    /// `2·(average(|T(fu)|^q, I))^{1/q}`.
    pub s2: f64,
    /// `2·c_hyp·(average(|fu|^q, I))^{1/q}`.
    #[serde(serialize_with = "extended")]
    pub s3: f64,
    /// `2·c_hyp·‖f‖_∞·(average(u^q, I))^{1/q}`.
    #[serde(serialize_with = "extended")]
    pub s4: f64,
    /// `c1·‖f‖_∞·average(u, I)`.
    #[serde(serialize_with = "extended")]
    pub s5: f64,
    /// `s_{i+1} − s_i`; `+∞` once the larger side is.
    #[serde(serialize_with = "extended_array")]
    pub margins: [f64; 5],
    /// Every step within tolerance.
    pub pass: bool,
}

fn extended_array<S: serde::Serializer>(xs: &[f64; 5], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    #[derive(Serialize)]
    struct Ext(#[serde(serialize_with = "extended")] f64);
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&Ext(*x))?;
    }
    seq.end()
}

impl ChainAuditReport {
    pub fn steps(&self) -> [f64; 6] {
        [self.s0, self.s1, self.s2, self.s3, self.s4, self.s5]
    }

    /// Whether step `i` (`s_i ≤ s_{i+1}`) holds up to tolerance.
    pub fn step_ok(&self, i: usize) -> bool {
        let s = self.steps();
        le_tol(s[i], s[i + 1])
    }

    /// The triangle and power-mean steps, which hold for any operator.
    pub fn unconditional_ok(&self) -> bool {
        self.step_ok(0) && self.step_ok(1)
    }
}

/// Tables for auditing one test function at one exponent.
struct AuditTables {
    id: String,
    sup: f64,
    tfu: StepFunction,
    tfu_stats: IntervalStats,
    fu_stats: IntervalStats,
}

impl AuditTables {
    fn new(t: &OperatorSpec, u: &Weight, f: &TestFunction, qs: &[f64]) -> Result<Self> {
        let fu = f.f.mul(u.function())?;
        let tfu = apply_operator(t, &fu)?;
        let mut with_one = vec![1.0];
        with_one.extend_from_slice(qs);
        Ok(Self {
            id: f.id.clone(),
            sup: f.f.sup_norm(),
            tfu_stats: IntervalStats::with_powers(&tfu, &with_one),
            fu_stats: IntervalStats::with_powers(&fu, qs),
            tfu,
        })
    }
}

/// Weight tables shared by all audits at one exponent.
struct WeightTables {
    stats: IntervalStats,
    powered: ExtendedSum,
}

impl WeightTables {
    fn new(u: &Weight, q: f64) -> Self {
        Self {
            stats: IntervalStats::new(u.function()),
            powered: ExtendedSum::new(&u.powered_values(q, Materialization::ClosedForm)),
        }
    }
}

fn audit_one(
    tab: &AuditTables,
    wt: &WeightTables,
    i: GridInterval,
    q: f64,
    c_hyp: f64,
    c_rhi: f64,
    s0: f64,
) -> ChainAuditReport {
    let c1 = mul_inf(2.0 * c_hyp, c_rhi);
    let s1 = 2.0 * tab.tfu_stats.abs_power_sum(i, 1.0).unwrap() / i.len() as f64;
    let s2 = 2.0 * tab.tfu_stats.power_mean(i, q).unwrap();
    let s3 = mul_inf(2.0 * c_hyp, tab.fu_stats.power_mean(i, q).unwrap());
    let u_q = wt.powered.average(i).powf(1.0 / q);
    let s4 = mul_inf(2.0 * c_hyp, if tab.sup == 0.0 { 0.0 } else { tab.sup * u_q });
    let s5 = mul_inf(mul_inf(c1, tab.sup), wt.stats.average(i));
    let s = [s0, s1, s2, s3, s4, s5];
    let margins = std::array::from_fn(|k| if s[k + 1].is_infinite() { f64::INFINITY } else { s[k + 1] - s[k] });
    let pass = (0..5).all(|k| le_tol(s[k], s[k + 1]));
    ChainAuditReport {
        function: tab.id.clone(),
        interval: i,
        q,
        c_hyp,
        c_rhi,
        c1,
        s0,
        s1,
        s2,
        s3,
        s4,
        s5,
        margins,
        pass,
    }
}

/// Audits one `(f, I, q)` triple with constants `c_hyp` and `c_rhi` taken
/// from runs on the family that contains `I`. Failed steps are recorded in
/// the report, never raised.
pub fn chain_audit(
    t: &OperatorSpec,
    u: &Weight,
    f: &TestFunction,
    i: GridInterval,
    q: f64,
    c_hyp: f64,
    c_rhi: f64,
) -> Result<ChainAuditReport> {
    if !(q.is_finite() && q > 1.0) {
        return Err(Error::BadParameter { name: "q", value: q, reason: "must exceed 1" });
    }
    if i.is_empty() || i.end > u.grid().n_cells() {
        return Err(Error::BadInterval { start: i.start, end: i.end, n_cells: u.grid().n_cells() });
    }
    let tab = AuditTables::new(t, u, f, &[q])?;
    let wt = WeightTables::new(u, q);
    let s0 = oscillation(&tab.tfu, i);
    Ok(audit_one(&tab, &wt, i, q, c_hyp, c_rhi, s0))
}

/// Bulk audit over every test function, family interval and exponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditSummary {
    pub operator: String,
    pub weight: String,
    pub family: String,
    pub qs: Vec<f64>,
    pub triples: usize,
    /// Failures of `s0 ≤ s1` or `s1 ≤ s2`.
    pub unconditional_failures: usize,
    /// Failures of `s3 ≤ s4`.
    pub factor_out_failures: usize,
    /// Failures of `s2 ≤ s3` or `s4 ≤ s5` with finite constants.
    pub conditional_failures: usize,
    /// Smallest margin per step.
    #[serde(serialize_with = "extended_array")]
    pub min_margins: [f64; 5],
    pub pass: bool,
    /// Failing triples, worst first.
    pub failures: Vec<ChainAuditReport>,
}

/// Audits all `(f, I, q)` triples; `c_hyp[k]` and `c_rhi[k]` belong to
/// `qs[k]` and must come from runs on `family`.
pub fn audit_suite(
    t: &OperatorSpec,
    u: &Weight,
    tests: &[TestFunction],
    family: &Family,
    qs: &[f64],
    c_hyp: &[f64],
    c_rhi: &[f64],
) -> Result<AuditSummary> {
    if tests.is_empty() {
        return Err(Error::EmptyInput("audit test functions"));
    }
    if qs.is_empty() {
        return Err(Error::EmptyInput("audit exponents"));
    }
    if c_hyp.len() != qs.len() || c_rhi.len() != qs.len() {
        return Err(Error::LengthMismatch { expected: qs.len(), got: c_hyp.len().min(c_rhi.len()) });
    }
    if let Some(q) = qs.iter().find(|q| !(q.is_finite() && **q > 1.0)) {
        return Err(Error::BadParameter { name: "q", value: *q, reason: "must exceed 1" });
    }
    if family.n_cells() != u.grid().n_cells() {
        return Err(Error::GridMismatch("family resolved on a different grid than the weight"));
    }
    family.check_oscillation_budget()?;
    let tables: Vec<AuditTables> = tests.iter().map(|f| AuditTables::new(t, u, f, qs)).collect::<Result<_>>()?;
    let weights: Vec<WeightTables> = qs.iter().map(|&q| WeightTables::new(u, q)).collect();
    let intervals = family.to_vec();

    let reports: Vec<ChainAuditReport> = tables
        .iter()
        .flat_map(|tab| {
            let weights = &weights;
            intervals.par_iter().flat_map_iter(move |&i| {
                let s0 = oscillation(&tab.tfu, i);
                qs.iter()
                    .enumerate()
                    .map(move |(k, &q)| audit_one(tab, &weights[k], i, q, c_hyp[k], c_rhi[k], s0))
            })
            .collect::<Vec<_>>()
        })
        .collect();

    let mut summary = AuditSummary {
        operator: t.to_string(),
        weight: u.spec().to_string(),
        family: family.label(),
        qs: qs.to_vec(),
        triples: reports.len(),
        unconditional_failures: 0,
        factor_out_failures: 0,
        conditional_failures: 0,
        min_margins: [f64::INFINITY; 5],
        pass: true,
        failures: Vec::new(),
    };
    let mut failures = Vec::new();
    for r in reports {
        for (m, x) in summary.min_margins.iter_mut().zip(r.margins) {
            *m = m.min(x);
        }
        if !r.unconditional_ok() {
            summary.unconditional_failures += 1;
        }
        if !r.step_ok(3) {
            summary.factor_out_failures += 1;
        }
        let finite = r.c_hyp.is_finite() && r.c_rhi.is_finite();
        if finite && !(r.step_ok(2) && r.step_ok(4)) {
            summary.conditional_failures += 1;
        }
        if !r.pass {
            failures.push(r);
        }
    }
    let worst = |r: &ChainAuditReport| r.margins.iter().copied().fold(f64::INFINITY, f64::min);
    failures.sort_by(|a, b| worst(a).total_cmp(&worst(b)));
    failures.truncate(KEEP_WORST);
    summary.failures = failures;
    summary.pass =
        summary.unconditional_failures == 0 && summary.factor_out_failures == 0 && summary.conditional_failures == 0;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Violated,
    HypothesisFailed,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::HypothesisFailed => "hypothesis-failed",
        }
    }
}

/// `A_1` membership as checked on the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A1Gate {
    #[serde(serialize_with = "extended")]
    pub value: f64,
    #[serde(serialize_with = "extended")]
    pub refined: f64,
    pub n_cells: usize,
    pub passes: bool,
}

/// Finite `A_1` characteristic changing by less than 5% under refinement.
pub fn a1_gate(u: &Weight, family: &Family) -> Result<A1Gate> {
    let coarse = a1_characteristic(u, family)?.value;
    let fine_u = u.refined(REFINEMENT_FACTOR)?;
    let fine_family = Family::new(fine_u.grid(), &family.spec().refined(REFINEMENT_FACTOR))?;
    let fine = a1_characteristic(&fine_u, &fine_family)?.value;
    Ok(A1Gate { value: coarse, refined: fine, n_cells: u.grid().n_cells(), passes: is_stable(coarse, fine) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub operator: String,
    pub weight: String,
    pub family: String,
    pub a1_gate: A1Gate,
    /// Smallest exponent with a finite hypothesis constant and a stable
    /// reverse Hölder constant at `δ = q − 1`.
    pub q_used: Option<f64>,
    #[serde(serialize_with = "extended")]
    pub c_hyp: f64,
    #[serde(serialize_with = "extended")]
    pub c_rhi: f64,
    pub rhi_stable: bool,
    /// `2·c_hyp·c_rhi`.
    #[serde(serialize_with = "extended")]
    pub predicted_bound: f64,
    /// `max oscillation(T(fu), I) / (‖f‖_∞·average(u, I))`.
    #[serde(serialize_with = "extended")]
    pub empirical_constant: f64,
    pub witness: Option<(String, GridInterval)>,
    pub witness_coords: Option<(f64, f64)>,
    pub verdict: Verdict,
    pub hypothesis: HypothesisReport,
    pub audit: Option<AuditSummary>,
}

/// Largest `oscillation(T(fu), I) / (‖f‖_∞·average(u, I))`, ties broken by
/// function order then interval order. Zero test functions are skipped.
pub fn empirical_constant(
    t: &OperatorSpec,
    u: &Weight,
    tests: &[TestFunction],
    family: &Family,
) -> Result<Option<(f64, String, GridInterval)>> {
    family.check_oscillation_budget()?;
    let ustats = IntervalStats::new(u.function());
    let mut best: Option<(Extremum, usize)> = None;
    for (k, f) in tests.iter().enumerate() {
        let sup = f.f.sup_norm();
        if sup == 0.0 {
            continue;
        }
        let tfu = apply_operator(t, &f.f.mul(u.function())?)?;
        let e = family.argmax(|i| {
            let osc = oscillation(&tfu, i);
            let den = sup * ustats.average(i);
            if den > 0.0 {
                osc / den
            } else if osc > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        });
        if best.as_ref().is_none_or(|(b, _)| better(&e, b)) {
            best = Some((e, k));
        }
    }
    Ok(best.map(|(e, k)| (e.value, tests[k].id.clone(), e.witness)))
}

/// End-to-end check of `T: uL^∞ → BMO_u` on one weight.
///
/// The hypothesis is tested on the test functions together with their
/// products `f·u`, so that the audited step `s2 ≤ s3` is covered by the
/// constant.
pub fn theorem_verify(
    t: &OperatorSpec,
    u: &Weight,
    tests: &[TestFunction],
    family: &Family,
    qs: &[f64],
) -> Result<TheoremReport> {
    if tests.is_empty() {
        return Err(Error::EmptyInput("theorem test functions"));
    }
    if qs.is_empty() {
        return Err(Error::EmptyInput("theorem exponents"));
    }
    if family.n_cells() != u.grid().n_cells() {
        return Err(Error::GridMismatch("family resolved on a different grid than the weight"));
    }
    let gate = a1_gate(u, family)?;
    if !gate.passes {
        return Err(Error::NotA1 { value: gate.value, refined: gate.refined, n_cells: gate.n_cells });
    }
    let mut hyp_set = tests.to_vec();
    for f in tests {
        hyp_set.push(TestFunction::new(format!("{}*u", f.id), f.f.mul(u.function())?));
    }
    let mut sorted_qs = qs.to_vec();
    sorted_qs.sort_by(f64::total_cmp);
    sorted_qs.dedup();
    let hypothesis = hypothesis_test(t, &hyp_set, &sorted_qs, family)?;

    let mut chosen = None;
    let mut fallback = None;
    for h in &hypothesis.per_q {
        if !h.best_constant.is_finite() {
            continue;
        }
        let rhi = rhi_constant(u, h.q - 1.0, family)?;
        if rhi.stable {
            chosen = Some((h.q, h.best_constant, rhi.constant, true));
            break;
        }
        if fallback.is_none() && rhi.constant.is_finite() {
            fallback = Some((h.q, h.best_constant, rhi.constant, false));
        }
    }
    let emp = empirical_constant(t, u, tests, family)?;
    let (emp_value, emp_witness) = match &emp {
        Some((v, id, i)) => (*v, Some((id.clone(), *i))),
        None => (0.0, None),
    };

    let Some((q, c_hyp, c_rhi, rhi_stable)) = chosen.or(fallback) else {
        let first = &hypothesis.per_q[0];
        let witness = first
            .violations
            .first()
            .map(|v| (v.function.clone(), v.interval))
            .or_else(|| first.witness.clone());
        return Ok(TheoremReport {
            operator: t.to_string(),
            weight: u.spec().to_string(),
            family: family.label(),
            a1_gate: gate,
            q_used: None,
            c_hyp: first.best_constant,
            c_rhi: f64::NAN,
            rhi_stable: false,
            predicted_bound: f64::INFINITY,
            empirical_constant: emp_value,
            witness_coords: witness.as_ref().map(|(_, i)| u.grid().coords(*i)),
            witness,
            verdict: Verdict::HypothesisFailed,
            hypothesis,
            audit: None,
        });
    };

    let audit = audit_suite(t, u, tests, family, &[q], &[c_hyp], &[c_rhi])?;
    let predicted = 2.0 * c_hyp * c_rhi;
    let verdict = if le_tol(emp_value, predicted) { Verdict::Holds } else { Verdict::Violated };
    Ok(TheoremReport {
        operator: t.to_string(),
        weight: u.spec().to_string(),
        family: family.label(),
        a1_gate: gate,
        q_used: Some(q),
        c_hyp,
        c_rhi,
        rhi_stable,
        predicted_bound: predicted,
        empirical_constant: emp_value,
        witness_coords: emp_witness.as_ref().map(|(_, i)| u.grid().coords(*i)),
        witness: emp_witness,
        verdict,
        hypothesis,
        audit: Some(audit),
    })
}

/// Inputs of a refinement study; each functional reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySubject {
    pub a: f64,
    pub b: f64,
    pub weight: WeightSpec,
    pub function: FunctionSpec,
    pub operator: OperatorSpec,
    pub family: IntervalFamilySpec,
    pub p: f64,
    pub delta: f64,
    pub q: f64,
    pub seed: u64,
}

impl Default for StudySubject {
    fn default() -> Self {
        Self {
            a: -1.0,
            b: 1.0,
            weight: WeightSpec::Power { alpha: -0.5 },
            function: FunctionSpec::Sign,
            operator: OperatorSpec::Identity,
            family: IntervalFamilySpec::standard(),
            p: 2.0,
            delta: 0.5,
            q: 1.5,
            seed: 1,
        }
    }
}

/// Names accepted by [`convergence_study`].
pub const FUNCTIONALS: [&str; 7] = ["a1", "ap", "rhi", "bmo", "bmo-u", "sharp-ratio", "hypothesis"];

/// Value of a named functional on an `n`-cell grid.
pub fn evaluate_functional(name: &str, subject: &StudySubject, n: usize) -> Result<f64> {
    if !FUNCTIONALS.contains(&name) {
        return Err(Error::UnknownFunctional(name.to_string()));
    }
    let grid = make_grid(subject.a, subject.b, n)?;
    let family = Family::new(&grid, &subject.family)?;
    let weight = || materialize_weight(&subject.weight, &grid);
    let function = || subject.function.materialize(&grid);
    Ok(match name {
        "a1" => a1_characteristic(&weight()?, &family)?.value,
        "ap" => ap_characteristic(&weight()?, subject.p, &family)?.value,
        "rhi" => rhi_constant(&weight()?, subject.delta, &family)?.constant,
        "bmo" => bmo_seminorm(&function()?, &family)?.seminorm,
        "bmo-u" => bmo_u_seminorm(&function()?, &weight()?, &family)?.seminorm,
        "sharp-ratio" => sharp_norm_ratio(&function()?, subject.p, &family)?,
        "hypothesis" => {
            let tests = materialize_all(&default_test_set(subject.seed), &grid)?;
            let r = hypothesis_test(&subject.operator, &tests, &[subject.q], &family)?;
            r.per_q[0].best_constant
        }
        _ => unreachable!(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub size: usize,
    #[serde(serialize_with = "extended")]
    pub value: f64,
    /// `value / previous value`; absent for the first size.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesReport {
    pub functional: String,
    pub family: String,
    pub points: Vec<SeriesPoint>,
    /// Every successive ratio exceeds 1.
    pub monotone_growth: bool,
    /// Monotone growth with the last ratio at least ×1.5 (or an infinite
    /// value appearing).
    pub divergent: bool,
}

/// Evaluates `name` at each grid size and flags divergence.
pub fn convergence_study(name: &str, subject: &StudySubject, sizes: &[usize]) -> Result<SeriesReport> {
    if !FUNCTIONALS.contains(&name) {
        return Err(Error::UnknownFunctional(name.to_string()));
    }
    if sizes.len() < 2 {
        return Err(Error::EmptyInput("convergence study needs at least two grid sizes"));
    }
    let mut points: Vec<SeriesPoint> = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let value = evaluate_functional(name, subject, n)?;
        let ratio = points.last().map(|p| growth_ratio(p.value, value));
        points.push(SeriesPoint { size: n, value, ratio });
    }
    let ratios: Vec<f64> = points.iter().filter_map(|p| p.ratio).collect();
    let monotone_growth = ratios.iter().all(|r| *r > 1.0);
    let last = *ratios.last().expect("at least two sizes");
    Ok(SeriesReport {
        functional: name.to_string(),
        family: subject.family.to_string(),
        points,
        monotone_growth,
        divergent: monotone_growth && last >= DIVERGENCE_GROWTH,
    })
}

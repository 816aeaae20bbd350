//! Scenario execution and report emission.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bmo::{bmo_seminorm, bmo_u_seminorm, sharp_maximal, sharp_norm_ratio, BmoReport};
use crate::error::{Error, Result};
use crate::family::Family;
use crate::functions::materialize_all;
use crate::grid::{make_grid, Grid};
use crate::harness::{convergence_study, theorem_verify, SeriesReport, StudySubject, TheoremReport, Verdict};
use crate::operators::{hypothesis_test, HypothesisReport};
use crate::report::{csv_text, fmt_num, to_json, write_atomic};
use crate::scenario::{Output, RawScenario, Scenario};
use crate::weights::{
    a1_characteristic, ap_characteristic, materialize_weight, rhi_constant, rhi_max_delta, CharacteristicReport,
    MaxDeltaReport, RhiReport,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridEcho {
    pub a: f64,
    pub b: f64,
    pub n_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightSection {
    pub weight: String,
    pub a1: CharacteristicReport,
    pub ap: Vec<CharacteristicReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhiSection {
    pub weight: String,
    pub constant: RhiReport,
    pub max_delta: Option<MaxDeltaReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BmoSection {
    pub function: String,
    pub weight: String,
    pub classical: BmoReport,
    pub weighted: BmoReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpSection {
    pub function: String,
    pub family: String,
    pub p: f64,
    /// `‖f♯‖_p / ‖f‖_p`, absent for constant functions.
    pub norm_ratio: Option<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub version: String,
    pub scenario: BTreeMap<String, String>,
    pub grid: GridEcho,
    pub family: String,
    pub outputs: Vec<Output>,
    pub characteristics: Option<WeightSection>,
    pub rhi: Option<RhiSection>,
    pub bmo: Option<BmoSection>,
    pub sharp: Option<SharpSection>,
    pub hypothesis: Option<HypothesisReport>,
    pub theorem: Option<TheoremReport>,
    pub convergence: Option<SeriesReport>,
    pub exit_code: i32,
}

/// Runs every requested computation, in dependency order.
pub fn execute(s: &Scenario) -> Result<RunReport> {
    let grid = make_grid(s.a, s.b, s.n_cells)?;
    let family = Family::new(&grid, &s.family)?;
    let weight = materialize_weight(&s.weight, &grid)?;
    let wants = |o: Output| s.outputs.contains(&o);
    let mut report = RunReport {
        version: VERSION.to_string(),
        scenario: s.echo.clone(),
        grid: GridEcho { a: s.a, b: s.b, n_cells: s.n_cells },
        family: family.label(),
        outputs: s.outputs.clone(),
        characteristics: None,
        rhi: None,
        bmo: None,
        sharp: None,
        hypothesis: None,
        theorem: None,
        convergence: None,
        exit_code: 0,
    };

    if wants(Output::CharacterizeWeight) {
        let a1 = a1_characteristic(&weight, &family)?;
        let ap = s.ap_ps.iter().map(|&p| ap_characteristic(&weight, p, &family)).collect::<Result<_>>()?;
        report.characteristics = Some(WeightSection { weight: s.weight.to_string(), a1, ap });
    }
    if wants(Output::Rhi) {
        let constant = rhi_constant(&weight, s.rhi_delta, &family)?;
        let max_delta = s.rhi_c_max.map(|c| rhi_max_delta(&weight, &family, c)).transpose()?;
        report.rhi = Some(RhiSection { weight: s.weight.to_string(), constant, max_delta });
    }
    if wants(Output::Bmo) {
        let f = s.bmo_function.materialize(&grid)?;
        report.bmo = Some(BmoSection {
            function: s.bmo_function.to_string(),
            weight: s.weight.to_string(),
            classical: bmo_seminorm(&f, &family)?,
            weighted: bmo_u_seminorm(&f, &weight, &family)?,
        });
    }
    if wants(Output::Sharp) {
        let f = s.bmo_function.materialize(&grid)?;
        let sharp = sharp_maximal(&f, &family)?;
        let norm_ratio = match sharp_norm_ratio(&f, s.sharp_p, &family) {
            Ok(r) => Some(r),
            Err(Error::DegenerateNorm(_)) => None,
            Err(e) => return Err(e),
        };
        report.sharp = Some(SharpSection {
            function: s.bmo_function.to_string(),
            family: sharp.family,
            p: s.sharp_p,
            norm_ratio,
            values: sharp.f.into_values(),
        });
    }
    let tests = materialize_all(&s.functions, &grid)?;
    if wants(Output::Hypothesis) {
        report.hypothesis = Some(hypothesis_test(&s.operator, &tests, &s.qs, &family)?);
    }
    if wants(Output::Theorem) {
        let t = theorem_verify(&s.operator, &weight, &tests, &family, &s.qs)?;
        if t.verdict != Verdict::Holds {
            report.exit_code = 2;
        }
        report.theorem = Some(t);
    }
    if wants(Output::Converge) {
        let subject = StudySubject {
            a: s.a,
            b: s.b,
            weight: s.weight.clone(),
            function: s.bmo_function.clone(),
            operator: s.operator.clone(),
            family: s.family.clone(),
            p: s.ap_ps.first().copied().unwrap_or(2.0),
            delta: s.rhi_delta,
            q: s.qs[0],
            seed: s.seed,
        };
        report.convergence = Some(convergence_study(&s.converge_functional, &subject, &s.converge_sizes)?);
    }
    Ok(report)
}

fn witness_row(name: &str, r: &CharacteristicReport) -> Vec<String> {
    vec![
        name.to_string(),
        fmt_num(r.p),
        fmt_num(r.value),
        r.witness.start.to_string(),
        r.witness.end.to_string(),
        fmt_num(r.witness_coords.0),
        fmt_num(r.witness_coords.1),
        r.family.clone(),
    ]
}

fn hypothesis_rows(h: &HypothesisReport, grid: &Grid) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for q in &h.per_q {
        for e in &q.worst {
            let (x0, x1) = grid.coords(e.interval);
            rows.push(vec![
                fmt_num(e.q),
                e.function.clone(),
                e.interval.start.to_string(),
                e.interval.end.to_string(),
                fmt_num(x0),
                fmt_num(x1),
                fmt_num(e.ratio),
            ]);
        }
    }
    rows
}

/// File name and contents of every report file.
pub fn render_files(report: &RunReport) -> Result<Vec<(String, String)>> {
    let grid = make_grid(report.grid.a, report.grid.b, report.grid.n_cells)?;
    let mut files = vec![("report.json".to_string(), to_json(report)?)];
    if let Some(c) = &report.characteristics {
        let mut rows = vec![witness_row("a1", &c.a1)];
        rows.extend(c.ap.iter().map(|r| witness_row("ap", r)));
        let header = ["functional", "p", "value", "witness_start", "witness_end", "x0", "x1", "family"];
        files.push(("characteristics.csv".into(), csv_text(&header, &rows)?));
    }
    let hyp = report.hypothesis.as_ref().or(report.theorem.as_ref().map(|t| &t.hypothesis));
    if let Some(h) = hyp {
        let header = ["q", "function", "start", "end", "x0", "x1", "ratio"];
        files.push(("hypothesis.csv".into(), csv_text(&header, &hypothesis_rows(h, &grid))?));
    }
    if let Some(s) = &report.sharp {
        let rows: Vec<Vec<String>> = s
            .values
            .iter()
            .enumerate()
            .map(|(c, v)| {
                let (x0, x1) = grid.cell_bounds(c);
                vec![c.to_string(), fmt_num(x0), fmt_num(x1), fmt_num(*v)]
            })
            .collect();
        files.push(("sharp.csv".into(), csv_text(&["cell", "x0", "x1", "value"], &rows)?));
    }
    if let Some(t) = &report.theorem {
        if let Some(a) = &t.audit {
            let rows: Vec<Vec<String>> = a
                .failures
                .iter()
                .map(|r| {
                    let mut row = vec![r.function.clone(), r.interval.start.to_string(), r.interval.end.to_string(), fmt_num(r.q)];
                    row.extend(r.steps().iter().map(|x| fmt_num(*x)));
                    row
                })
                .collect();
            let header = ["function", "start", "end", "q", "s0", "s1", "s2", "s3", "s4", "s5"];
            files.push(("audit_failures.csv".into(), csv_text(&header, &rows)?));
        }
    }
    if let Some(c) = &report.convergence {
        let rows: Vec<Vec<String>> = c
            .points
            .iter()
            .map(|p| vec![p.size.to_string(), fmt_num(p.value), p.ratio.map(fmt_num).unwrap_or_default()])
            .collect();
        files.push(("convergence.csv".into(), csv_text(&["size", "value", "ratio"], &rows)?));
    }
    Ok(files)
}

/// Writes every report file into `dir`. On failure, files written by this
/// call are removed again.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let files = render_files(report)?;
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        if let Err(e) = write_atomic(&path, text.as_bytes()) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path);
    }
    Ok(written)
}

/// Result of running a scenario file.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: Option<RunReport>,
    pub written: Vec<PathBuf>,
    pub error: Option<Error>,
    /// 0: everything produced and every verdict holds; 2: a verdict failed;
    /// 1: configuration or runtime error.
    pub exit_code: i32,
}

impl RunOutcome {
    fn failed(e: Error) -> Self {
        Self { report: None, written: Vec::new(), error: Some(e), exit_code: 1 }
    }
}

/// Loads, runs and emits a scenario. `overrides` replace scenario keys.
pub fn run_scenario(path: Option<&Path>, overrides: &[(&str, String)]) -> RunOutcome {
    let mut raw = match path {
        Some(p) => match RawScenario::read(p) {
            Ok(r) => r,
            Err(e) => return RunOutcome::failed(e),
        },
        None => RawScenario::default(),
    };
    for (k, v) in overrides {
        raw.set(k, v.clone());
    }
    let scenario = match Scenario::from_raw(&raw) {
        Ok(s) => s,
        Err(e) => return RunOutcome::failed(e),
    };
    let report = match execute(&scenario) {
        Ok(r) => r,
        Err(e) => return RunOutcome::failed(e),
    };
    let written = match &scenario.out_dir {
        Some(dir) => match emit_report(&report, dir) {
            Ok(w) => w,
            Err(e) => return RunOutcome::failed(e),
        },
        None => Vec::new(),
    };
    let exit_code = report.exit_code;
    RunOutcome { report: Some(report), written, error: None, exit_code }
}

//! Scenario files: one `key = value` per line, dotted section prefixes,
//! `#` comments. Every key has a default, so an empty file is a valid
//! scenario.
//!
//! ```text
//! grid.n_cells = 1024
//! weight.kind = power
//! weight.alpha = -0.5
//! operator.kind = multiplier
//! operator.symbol = sign
//! family.kind = standard
//! outputs = characterize-weight, theorem
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{IntervalFamilySpec, Window};
use crate::functions::{default_test_set, FunctionSpec};
use crate::operators::{OperatorSpec, DEFAULT_QS};
use crate::weights::WeightSpec;

/// Computations a scenario can request, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Output {
    CharacterizeWeight,
    Rhi,
    Bmo,
    Sharp,
    Hypothesis,
    Theorem,
    Converge,
}

impl Output {
    pub const ALL: [Output; 7] = [
        Output::CharacterizeWeight,
        Output::Rhi,
        Output::Bmo,
        Output::Sharp,
        Output::Hypothesis,
        Output::Theorem,
        Output::Converge,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Output::CharacterizeWeight => "characterize-weight",
            Output::Rhi => "rhi",
            Output::Bmo => "bmo",
            Output::Sharp => "sharp",
            Output::Hypothesis => "hypothesis",
            Output::Theorem => "theorem",
            Output::Converge => "converge",
        }
    }
}

impl FromStr for Output {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Output::ALL.into_iter().find(|o| o.name() == s).ok_or_else(|| format!("unknown output `{s}`"))
    }
}

/// Raw key/value pairs with the line each came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawScenario {
    pub origin: String,
    entries: BTreeMap<String, (String, usize)>,
}

impl RawScenario {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let lineno = k + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(Error::scenario(format!("{origin}:{lineno}"), "expected `key = value`"));
            };
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c)) {
                return Err(Error::scenario(format!("{origin}:{lineno}"), format!("malformed key `{key}`")));
            }
            if entries.insert(key.to_string(), (value.trim().to_string(), lineno)).is_some() {
                return Err(Error::scenario(key, format!("duplicate key at {origin}:{lineno}")));
            }
        }
        Ok(Self { origin: origin.to_string(), entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Sets or replaces a key (command-line overrides).
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (value.into(), 0));
    }

    /// Every entry except `output.dir`, so reports do not depend on where they are written.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.entries
            .iter()
            .filter(|(k, _)| k.as_str() != "output.dir")
            .map(|(k, (v, _))| (k.clone(), v.clone()))
            .collect()
    }
}

/// Typed access that remembers which keys were read.
struct Reader<'a> {
    raw: &'a RawScenario,
    used: BTreeSet<&'a str>,
}

impl<'a> Reader<'a> {
    fn get(&mut self, key: &'a str) -> Option<&'a str> {
        self.used.insert(key);
        self.raw.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn parse<T: FromStr>(&mut self, key: &'a str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::scenario(key, format!("cannot parse `{v}`"))),
        }
    }

    fn required<T: FromStr>(&mut self, key: &'a str) -> Result<T> {
        match self.get(key) {
            None => Err(Error::scenario(key, "missing value")),
            Some(v) => v.parse().map_err(|_| Error::scenario(key, format!("cannot parse `{v}`"))),
        }
    }

    fn optional<T: FromStr>(&mut self, key: &'a str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Error::scenario(key, format!("cannot parse `{v}`"))),
        }
    }

    fn list<T: FromStr>(&mut self, key: &'a str) -> Result<Option<Vec<T>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => split_list(v)
                .iter()
                .map(|s| s.parse().map_err(|_| Error::scenario(key, format!("cannot parse `{s}`"))))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(k) = self.raw.entries.keys().find(|k| !self.used.contains(k.as_str())) {
            let line = self.raw.entries[k].1;
            return Err(Error::scenario(k.clone(), format!("unknown key (line {line})")));
        }
        Ok(())
    }
}

/// Splits on commas outside brackets, so `indicator[0,1]` stays whole.
fn split_list(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            _ => {}
        }
        if c == ',' && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(c);
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

/// Parses a test-function id: `sign`, `indicator[lo,hi]`, `constant(c)`,
/// `random:seed`.
pub fn parse_function_id(id: &str) -> Option<FunctionSpec> {
    let id = id.trim();
    if id == "sign" {
        return Some(FunctionSpec::Sign);
    }
    if let Some(rest) = id.strip_prefix("indicator[").and_then(|r| r.strip_suffix(']')) {
        let (lo, hi) = rest.split_once(',')?;
        return Some(FunctionSpec::Indicator { lo: lo.trim().parse().ok()?, hi: hi.trim().parse().ok()? });
    }
    if let Some(rest) = id.strip_prefix("constant(").and_then(|r| r.strip_suffix(')')) {
        return Some(FunctionSpec::Constant { c: rest.trim().parse().ok()? });
    }
    if let Some(rest) = id.strip_prefix("random:") {
        return Some(FunctionSpec::Random { seed: rest.trim().parse().ok()?, pieces: crate::functions::RANDOM_PIECES });
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub a: f64,
    pub b: f64,
    pub n_cells: usize,
    pub weight: WeightSpec,
    pub operator: OperatorSpec,
    pub functions: Vec<FunctionSpec>,
    pub family: IntervalFamilySpec,
    pub qs: Vec<f64>,
    pub seed: u64,
    pub outputs: Vec<Output>,
    /// Exponents for `A_p` characteristics.
    pub ap_ps: Vec<f64>,
    pub rhi_delta: f64,
    /// When set, also search the largest `δ` with constant `≤ c_max`.
    pub rhi_c_max: Option<f64>,
    pub bmo_function: FunctionSpec,
    /// Exponent of the sharp-function norm ratio.
    pub sharp_p: f64,
    pub converge_functional: String,
    pub converge_sizes: Vec<usize>,
    pub out_dir: Option<PathBuf>,
    pub echo: BTreeMap<String, String>,
}

fn weight_spec(r: &mut Reader) -> Result<WeightSpec> {
    let kind: String = r.parse("weight.kind", "constant".to_string())?;
    let spec = match kind.as_str() {
        "constant" => WeightSpec::Constant { c: r.parse("weight.c", 1.0)? },
        "power" => WeightSpec::Power { alpha: r.required("weight.alpha")? },
        "truncated-power" => {
            WeightSpec::TruncatedPower { alpha: r.required("weight.alpha")?, floor: r.required("weight.floor")? }
        }
        "custom" => WeightSpec::Custom {
            values: r.list("weight.values")?.ok_or_else(|| Error::scenario("weight.values", "missing value"))?,
        },
        other => return Err(Error::scenario("weight.kind", format!("unknown weight kind `{other}`"))),
    };
    spec.validate().map_err(|e| Error::scenario("weight", e.to_string()))?;
    Ok(spec)
}

fn operator_spec(r: &mut Reader) -> Result<OperatorSpec> {
    let kind: String = r.parse("operator.kind", "identity".to_string())?;
    Ok(match kind.as_str() {
        "identity" => OperatorSpec::Identity,
        "multiplier" => {
            let id: String = r.parse("operator.symbol", "sign".to_string())?;
            let symbol = parse_function_id(&id)
                .ok_or_else(|| Error::scenario("operator.symbol", format!("unknown function `{id}`")))?;
            OperatorSpec::Multiplier { symbol }
        }
        "dyadic-expectation" => OperatorSpec::DyadicExpectation { level: r.required("operator.level")? },
        "moving-average" => OperatorSpec::MovingAverage { halfwidth: r.required("operator.halfwidth")? },
        "truncated-hilbert" => OperatorSpec::TruncatedHilbert { eps: r.optional("operator.eps")? },
        "hl-maximal" => OperatorSpec::HlMaximal,
        other => return Err(Error::scenario("operator.kind", format!("unknown operator kind `{other}`"))),
    })
}

fn window(s: &str) -> Option<Window> {
    match s.strip_prefix("n/") {
        Some(d) => d.parse().ok().map(Window::Fraction),
        None => s.parse().ok().map(Window::Cells),
    }
}

fn family_spec(r: &mut Reader) -> Result<IntervalFamilySpec> {
    let kind: String = r.parse("family.kind", "standard".to_string())?;
    let mut parts = Vec::new();
    for part in kind.split('+').map(str::trim) {
        parts.push(match part {
            "all-aligned" => IntervalFamilySpec::AllAligned,
            "standard" => IntervalFamilySpec::standard(),
            "dyadic" => IntervalFamilySpec::Dyadic { min_cells: r.parse("family.min_cells", 1)? },
            "sliding" => {
                let raw: Vec<String> = r.list("family.windows")?.unwrap_or_else(|| vec!["n/4".into(), "n/16".into()]);
                let windows = raw
                    .iter()
                    .map(|w| window(w).ok_or_else(|| Error::scenario("family.windows", format!("bad window `{w}`"))))
                    .collect::<Result<_>>()?;
                IntervalFamilySpec::Sliding { windows, stride: r.parse("family.stride", 1)? }
            }
            "anchored" => IntervalFamilySpec::Anchored { at: r.parse("family.at", 0.0)? },
            other => return Err(Error::scenario("family.kind", format!("unknown family kind `{other}`"))),
        });
    }
    Ok(if parts.len() == 1 { parts.pop().unwrap() } else { IntervalFamilySpec::Union(parts) })
}

impl Scenario {
    pub fn from_raw(raw: &RawScenario) -> Result<Self> {
        let mut r = Reader { raw, used: BTreeSet::new() };
        let a = r.parse("grid.a", -1.0)?;
        let b = r.parse("grid.b", 1.0)?;
        let n_cells: usize = r.parse("grid.n_cells", 1024)?;
        crate::grid::make_grid(a, b, n_cells).map_err(|e| {
            let key = if matches!(e, Error::BadCellCount(_)) { "grid.n_cells" } else { "grid" };
            Error::scenario(key, e.to_string())
        })?;
        let seed = r.parse("seed", 1u64)?;
        let weight = weight_spec(&mut r)?;
        let operator = operator_spec(&mut r)?;
        let functions = match r.list::<String>("functions")? {
            None => default_test_set(seed),
            Some(ids) => {
                let mut out = Vec::new();
                for id in ids {
                    if id == "default" {
                        out.extend(default_test_set(seed));
                    } else {
                        out.push(
                            parse_function_id(&id)
                                .ok_or_else(|| Error::scenario("functions", format!("unknown function `{id}`")))?,
                        );
                    }
                }
                out
            }
        };
        if functions.is_empty() {
            return Err(Error::scenario("functions", "empty list"));
        }
        let family = family_spec(&mut r)?;
        let qs = r.list("qs")?.unwrap_or_else(|| DEFAULT_QS.to_vec());
        if let Some(q) = qs.iter().find(|q| !(q.is_finite() && **q > 1.0)) {
            return Err(Error::scenario("qs", format!("exponent {q} must exceed 1")));
        }
        let outputs = match r.list::<String>("outputs")? {
            None => vec![Output::CharacterizeWeight],
            Some(names) => {
                let mut set = BTreeSet::new();
                for n in names {
                    set.insert(n.parse::<Output>().map_err(|m| Error::scenario("outputs", m))?);
                }
                set.into_iter().collect()
            }
        };
        let ap_ps = r.list("ap.p")?.unwrap_or_else(|| vec![1.5, 2.0, 3.0]);
        let rhi_delta = r.parse("rhi.delta", 0.5)?;
        let rhi_c_max = r.optional("rhi.c_max")?;
        let bmo_id: String = r.parse("bmo.function", "sign".to_string())?;
        let bmo_function = parse_function_id(&bmo_id)
            .ok_or_else(|| Error::scenario("bmo.function", format!("unknown function `{bmo_id}`")))?;
        let sharp_p = r.parse("sharp.p", 2.0)?;
        let converge_functional: String = r.parse("converge.functional", "a1".to_string())?;
        if !crate::harness::FUNCTIONALS.contains(&converge_functional.as_str()) {
            return Err(Error::scenario(
                "converge.functional",
                format!("unknown functional `{converge_functional}`"),
            ));
        }
        let converge_sizes = r.list("converge.sizes")?.unwrap_or_else(|| vec![256, 1024]);
        let out_dir = r.get("output.dir").map(PathBuf::from);
        r.finish()?;
        Ok(Self {
            a,
            b,
            n_cells,
            weight,
            operator,
            functions,
            family,
            qs,
            seed,
            outputs,
            ap_ps,
            rhi_delta,
            rhi_c_max,
            bmo_function,
            sharp_p,
            converge_functional,
            converge_sizes,
            out_dir,
            echo: raw.echo(),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_raw(&RawScenario::parse(text, "<scenario>")?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_scenario_uses_defaults() {
        let s = Scenario::parse("# nothing\n\n").unwrap();
        assert_eq!(s.n_cells, 1024);
        assert_eq!(s.weight, WeightSpec::Constant { c: 1.0 });
        assert_eq!(s.functions.len(), 6);
        assert_eq!(s.qs, DEFAULT_QS.to_vec());
    }

    #[test]
    fn unknown_operator_names_the_key_and_kind() {
        let e = Scenario::parse("operator.kind = hilbertt").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("operator.kind") && msg.contains("hilbertt"), "{msg}");
    }

    #[test]
    fn unknown_key_is_reported_with_path() {
        let e = Scenario::parse("weight.kind = power\nweight.alpha = -0.5\nweight.alpah = 1").unwrap_err();
        assert_eq!(e, Error::scenario("weight.alpah", "unknown key (line 3)"));
    }

    #[test]
    fn non_power_of_two_grid() {
        let e = Scenario::parse("grid.n_cells = 1000").unwrap_err();
        assert!(matches!(e, Error::Scenario { ref path, .. } if path == "grid.n_cells"));
    }

    #[test]
    fn lists_keep_bracketed_ids() {
        let s = Scenario::parse("functions = sign, indicator[0,0.25], random:9\nfamily.kind = dyadic + sliding\nfamily.windows = n/8, 16").unwrap();
        assert_eq!(s.functions[1], FunctionSpec::Indicator { lo: 0.0, hi: 0.25 });
        assert_eq!(s.functions[2], FunctionSpec::Random { seed: 9, pieces: 16 });
        assert_eq!(
            s.family,
            IntervalFamilySpec::Union(vec![
                IntervalFamilySpec::dyadic(),
                IntervalFamilySpec::Sliding { windows: vec![Window::Fraction(8), Window::Cells(16)], stride: 1 }
            ])
        );
    }

    #[test]
    fn malformed_lines() {
        assert!(RawScenario::parse("just words", "s").is_err());
        assert!(RawScenario::parse("a = 1\na = 2", "s").is_err());
    }
}

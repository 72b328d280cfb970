//! Experiment configuration: JSON parsing, schema validation with
//! line-referenced diagnostics, and conversion into solver inputs.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;
use turnpike_core::{BetaField, DomainSpec, Grid1D, TailMode, Variant};

/// Version of the config and report schemas.
pub const SCHEMA_VERSION: u32 = 1;

/// Fractional orders above this are accepted but outside the validated range.
pub const VALIDATED_MAX_S: f64 = 0.8;

/// Largest interior node count accepted (dense factorizations).
pub const MAX_INTERIOR_NODES: u64 = 4096;

/// One schema violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Dotted field path such as `problem.s` or `sweep.T[2]`.
    pub path: String,
    /// 1-based line of the offending field (or its closest present parent).
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{} invalid field(s)", .0.len())]
    Invalid(Vec<Diagnostic>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    Robin,
    Dirichlet,
}

impl From<VariantName> for Variant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Robin => Variant::Robin,
            VariantName::Dirichlet => Variant::Dirichlet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TailConfig {
    Zero,
    Constant(f64),
}

impl From<TailConfig> for TailMode {
    fn from(t: TailConfig) -> Self {
        match t {
            TailConfig::Zero => TailMode::Zero,
            TailConfig::Constant(c) => TailMode::Constant(c),
        }
    }
}

/// `value` on collar nodes with `start ≤ x ≤ end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaSegment {
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TargetSpec {
    Constant {
        value: f64,
    },
    Gaussian {
        center: f64,
        width: f64,
        amplitude: f64,
    },
    /// `value` on `[start, end]`, zero elsewhere.
    Indicator {
        start: f64,
        end: f64,
        value: f64,
    },
}

impl TargetSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TargetSpec::Constant { value } => value,
            TargetSpec::Gaussian {
                center,
                width,
                amplitude,
            } => amplitude * (-(x - center).powi(2) / (2.0 * width * width)).exp(),
            TargetSpec::Indicator { start, end, value } => {
                if (start..=end).contains(&x) {
                    value
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemConfig {
    pub variant: VariantName,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "R")]
    pub collar_width: f64,
    pub s: f64,
    pub tail_mode: TailConfig,
    pub beta: Vec<BetaSegment>,
    pub target: TargetSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscretizationConfig {
    pub n: usize,
    /// Time steps per unit time.
    #[serde(rename = "K")]
    pub steps_per_unit: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlConfig {
    pub cg_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    #[serde(rename = "T")]
    pub horizons: Vec<f64>,
}

/// Solution-map probe; `samples = 0` disables it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeConfig {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub discretization: DiscretizationConfig,
    pub control: ControlConfig,
    pub sweep: SweepConfig,
    pub probe: ProbeConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn variant(&self) -> Variant {
        self.problem.variant.into()
    }

    pub fn domain(&self) -> turnpike_core::Result<DomainSpec> {
        let p = &self.problem;
        DomainSpec::new(p.a, p.b, p.collar_width, p.s, p.tail_mode.into())
    }

    pub fn beta_on(&self, grid: &Grid1D) -> turnpike_core::Result<BetaField> {
        BetaField::from_fn(grid, |x| {
            self.problem
                .beta
                .iter()
                .find(|seg| (seg.start..=seg.end).contains(&x))
                .map_or(0.0, |seg| seg.value)
        })
    }

    pub fn writes(&self, format: OutputFormat) -> bool {
        self.output.formats.contains(&format)
    }

    /// Non-fatal remarks about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.problem.s > VALIDATED_MAX_S {
            out.push(format!(
                "problem.s = {} lies above {VALIDATED_MAX_S}, outside the validated range of the quadrature",
                self.problem.s
            ));
        }
        out
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text).map_err(ConfigError::Invalid)
}

/// All violations in `path`; empty iff the file describes a runnable experiment.
pub fn validate_config(path: &Path) -> Result<Vec<Diagnostic>, ConfigError> {
    match load_config(path) {
        Ok(_) => Ok(Vec::new()),
        Err(ConfigError::Invalid(diags)) => Ok(diags),
        Err(e) => Err(e),
    }
}

/// Parses and validates config text, reporting every violation in schema order.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<Diagnostic>> {
    let root: Value = serde_json::from_str(text).map_err(|e| {
        vec![Diagnostic {
            path: "<root>".into(),
            line: Some(e.line()),
            message: format!("malformed JSON: {e}"),
        }]
    })?;
    let mut v = Validator {
        text,
        diags: Vec::new(),
    };
    let config = v.config(&root);
    match config {
        Some(c) if v.diags.is_empty() => Ok(c),
        _ => Err(v.diags),
    }
}

struct Validator<'a> {
    text: &'a str,
    diags: Vec<Diagnostic>,
}

const ROOT_KEYS: &[&str] = &[
    "schema_version",
    "problem",
    "discretization",
    "control",
    "sweep",
    "probe",
    "output",
];

impl Validator<'_> {
    fn report(&mut self, path: &str, message: impl Into<String>) {
        let line = self.locate(path);
        self.diags.push(Diagnostic {
            path: path.to_string(),
            line,
            message: message.into(),
        });
    }

    /// Line of the deepest key along `path` present in the text.
    fn locate(&self, path: &str) -> Option<usize> {
        let mut pos = None;
        let mut from = 0;
        for seg in path.split('.') {
            let key = seg.split('[').next().unwrap_or(seg);
            match find_key(self.text, key, from) {
                Some(p) => {
                    pos = Some(p);
                    from = p + key.len() + 2;
                }
                None => break,
            }
        }
        pos.map(|p| self.text[..p].matches('\n').count() + 1)
    }

    fn object(
        &mut self,
        parent: &Map<String, Value>,
        key: &str,
        path: &str,
        allowed: &[&str],
        required: bool,
    ) -> Option<Map<String, Value>> {
        match parent.get(key) {
            None if required => {
                self.report(path, "missing required block");
                None
            }
            None => Some(Map::new()),
            Some(Value::Object(m)) => {
                self.unknown_keys(m, path, allowed);
                Some(m.clone())
            }
            Some(_) => {
                self.report(path, "expected an object");
                None
            }
        }
    }

    fn unknown_keys(&mut self, m: &Map<String, Value>, path: &str, allowed: &[&str]) {
        for key in m.keys() {
            if !allowed.contains(&key.as_str()) {
                let p = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                self.report(&p, "unknown field");
            }
        }
    }

    fn number(
        &mut self,
        m: &Map<String, Value>,
        key: &str,
        path: &str,
        default: Option<f64>,
    ) -> Option<f64> {
        let p = format!("{path}.{key}");
        match m.get(key) {
            None => {
                if default.is_none() {
                    self.report(&p, "missing required field");
                }
                default
            }
            Some(Value::Number(x)) => x.as_f64(),
            Some(_) => {
                self.report(&p, "expected a number");
                None
            }
        }
    }

    fn integer(
        &mut self,
        m: &Map<String, Value>,
        key: &str,
        path: &str,
        default: Option<u64>,
    ) -> Option<u64> {
        let p = format!("{path}.{key}");
        match m.get(key) {
            None => {
                if default.is_none() {
                    self.report(&p, "missing required field");
                }
                default
            }
            Some(Value::Number(x)) if x.as_u64().is_some() => x.as_u64(),
            Some(_) => {
                self.report(&p, "expected a non-negative integer");
                None
            }
        }
    }

    fn check(&mut self, value: Option<f64>, ok: impl Fn(f64) -> bool, path: &str, what: &str) {
        if let Some(x) = value {
            if !ok(x) {
                self.report(path, format!("{what}, got {x}"));
            }
        }
    }

    fn config(&mut self, root: &Value) -> Option<ExperimentConfig> {
        let Some(root) = root.as_object() else {
            self.report("<root>", "expected a JSON object");
            return None;
        };
        self.unknown_keys(root, "", ROOT_KEYS);
        if let Some(v) = root.get("schema_version") {
            if v.as_u64() != Some(SCHEMA_VERSION as u64) {
                self.report(
                    "schema_version",
                    format!("unsupported schema version (expected {SCHEMA_VERSION})"),
                );
            }
        }
        let problem = self.problem(root);
        let discretization = self.discretization(root);
        let control = self.control(root);
        let sweep = self.sweep(root, discretization.as_ref());
        let probe = self.probe(root);
        let output = self.output(root);
        let config = ExperimentConfig {
            problem: problem?,
            discretization: discretization?,
            control: control?,
            sweep: sweep?,
            probe: probe?,
            output: output?,
        };
        if self.diags.is_empty() {
            self.cross_checks(&config);
        }
        Some(config)
    }

    fn problem(&mut self, root: &Map<String, Value>) -> Option<ProblemConfig> {
        const KEYS: &[&str] = &["variant", "a", "b", "R", "s", "tail_mode", "beta", "target"];
        let m = self.object(root, "problem", "problem", KEYS, true)?;
        let variant = match m.get("variant").and_then(Value::as_str) {
            Some("robin") => Some(VariantName::Robin),
            Some("dirichlet") => Some(VariantName::Dirichlet),
            None if !m.contains_key("variant") => {
                self.report("problem.variant", "missing required field");
                None
            }
            _ => {
                self.report("problem.variant", "expected \"robin\" or \"dirichlet\"");
                None
            }
        };
        let a = self.number(&m, "a", "problem", None);
        let b = self.number(&m, "b", "problem", None);
        if let (Some(a), Some(b)) = (a, b) {
            if a >= b {
                self.report("problem.b", format!("must exceed problem.a = {a}, got {b}"));
            }
        }
        let r = self.number(&m, "R", "problem", None);
        self.check(r, |x| x > 0.0, "problem.R", "must be positive");
        let s = self.number(&m, "s", "problem", None);
        self.check(s, |x| x > 0.0 && x < 1.0, "problem.s", "must lie in (0, 1)");
        let tail_mode = self.tail(&m);
        let beta = self.beta(&m, variant);
        let target = self.target(&m);
        Some(ProblemConfig {
            variant: variant?,
            a: a?,
            b: b?,
            collar_width: r?,
            s: s?,
            tail_mode: tail_mode?,
            beta: beta?,
            target: target?,
        })
    }

    fn tail(&mut self, m: &Map<String, Value>) -> Option<TailConfig> {
        let path = "problem.tail_mode";
        match m.get("tail_mode") {
            None => Some(TailConfig::Zero),
            Some(Value::String(s)) if s == "zero" => Some(TailConfig::Zero),
            Some(Value::Object(o)) if o.len() == 1 && o.contains_key("constant") => {
                match o["constant"].as_f64() {
                    Some(c) => Some(TailConfig::Constant(c)),
                    None => {
                        self.report(&format!("{path}.constant"), "expected a number");
                        None
                    }
                }
            }
            Some(_) => {
                self.report(path, "expected \"zero\" or {\"constant\": <number>}");
                None
            }
        }
    }

    fn beta(
        &mut self,
        m: &Map<String, Value>,
        variant: Option<VariantName>,
    ) -> Option<Vec<BetaSegment>> {
        let items = match m.get("beta") {
            None if variant == Some(VariantName::Robin) => {
                self.report(
                    "problem.beta",
                    "missing required field for the robin variant",
                );
                return None;
            }
            None => return Some(Vec::new()),
            Some(Value::Array(items)) => items,
            Some(_) => {
                self.report("problem.beta", "expected an array of segments");
                return None;
            }
        };
        let mut segs = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            let path = format!("problem.beta[{i}]");
            let Some(o) = item.as_object() else {
                self.report(&path, "expected an object");
                ok = false;
                continue;
            };
            self.unknown_keys(o, &path, &["start", "end", "value"]);
            let start = self.number(o, "start", &path, None);
            let end = self.number(o, "end", &path, None);
            let value = self.number(o, "value", &path, None);
            self.check(
                value,
                |x| x >= 0.0,
                &format!("{path}.value"),
                "must be non-negative",
            );
            match (start, end, value) {
                (Some(start), Some(end), Some(value)) if start < end => {
                    if let Some(j) = segs
                        .iter()
                        .position(|s: &BetaSegment| start <= s.end && s.start <= end)
                    {
                        self.report(&path, format!("overlaps problem.beta[{j}]"));
                        ok = false;
                    }
                    segs.push(BetaSegment { start, end, value });
                }
                (Some(start), Some(end), _) if start >= end => {
                    self.report(
                        &format!("{path}.end"),
                        format!("must exceed start = {start}"),
                    );
                    ok = false;
                }
                _ => ok = false,
            }
        }
        ok.then_some(segs)
    }

    fn target(&mut self, m: &Map<String, Value>) -> Option<TargetSpec> {
        let path = "problem.target";
        let o = match m.get("target") {
            None => {
                self.report(path, "missing required field");
                return None;
            }
            Some(Value::Object(o)) => o,
            Some(_) => {
                self.report(path, "expected an object");
                return None;
            }
        };
        match o.get("kind").and_then(Value::as_str) {
            Some("constant") => {
                self.unknown_keys(o, path, &["kind", "value"]);
                let value = self.number(o, "value", path, None)?;
                Some(TargetSpec::Constant { value })
            }
            Some("gaussian") => {
                self.unknown_keys(o, path, &["kind", "center", "width", "amplitude"]);
                let center = self.number(o, "center", path, Some(0.0));
                let width = self.number(o, "width", path, None);
                self.check(
                    width,
                    |x| x > 0.0,
                    "problem.target.width",
                    "must be positive",
                );
                let amplitude = self.number(o, "amplitude", path, Some(1.0));
                Some(TargetSpec::Gaussian {
                    center: center?,
                    width: width.filter(|w| *w > 0.0)?,
                    amplitude: amplitude?,
                })
            }
            Some("indicator") => {
                self.unknown_keys(o, path, &["kind", "start", "end", "value"]);
                let start = self.number(o, "start", path, None);
                let end = self.number(o, "end", path, None);
                let value = self.number(o, "value", path, Some(1.0));
                if let (Some(s), Some(e)) = (start, end) {
                    if s >= e {
                        self.report("problem.target.end", format!("must exceed start = {s}"));
                        return None;
                    }
                }
                Some(TargetSpec::Indicator {
                    start: start?,
                    end: end?,
                    value: value?,
                })
            }
            _ => {
                self.report(
                    "problem.target.kind",
                    "expected \"constant\", \"gaussian\" or \"indicator\"",
                );
                None
            }
        }
    }

    fn discretization(&mut self, root: &Map<String, Value>) -> Option<DiscretizationConfig> {
        let path = "discretization";
        let m = self.object(root, path, path, &["n", "K", "theta"], true)?;
        let n = self.integer(&m, "n", path, None);
        if let Some(n) = n {
            if !(8..=MAX_INTERIOR_NODES).contains(&n) {
                self.report(
                    "discretization.n",
                    format!("must lie in [8, {MAX_INTERIOR_NODES}], got {n}"),
                );
            }
        }
        let k = self.number(&m, "K", path, None);
        self.check(k, |x| x >= 2.0, "discretization.K", "must be at least 2");
        let theta = self.number(&m, "theta", path, Some(1.0));
        self.check(
            theta,
            |x| (0.5..=1.0).contains(&x),
            "discretization.theta",
            "must lie in [0.5, 1]",
        );
        Some(DiscretizationConfig {
            n: n.filter(|n| (8..=MAX_INTERIOR_NODES).contains(n))? as usize,
            steps_per_unit: k.filter(|k| *k >= 2.0)?,
            theta: theta.filter(|t| (0.5..=1.0).contains(t))?,
        })
    }

    fn control(&mut self, root: &Map<String, Value>) -> Option<ControlConfig> {
        let path = "control";
        let m = self.object(root, path, path, &["cg_tol", "max_iter"], false)?;
        let tol = self.number(&m, "cg_tol", path, Some(1e-10));
        self.check(tol, |x| x > 0.0, "control.cg_tol", "must be positive");
        let max_iter = self.integer(&m, "max_iter", path, Some(500));
        if max_iter == Some(0) {
            self.report("control.max_iter", "must be at least 1");
        }
        Some(ControlConfig {
            cg_tol: tol.filter(|t| *t > 0.0)?,
            max_iter: max_iter.filter(|m| *m > 0)? as usize,
        })
    }

    fn sweep(
        &mut self,
        root: &Map<String, Value>,
        disc: Option<&DiscretizationConfig>,
    ) -> Option<SweepConfig> {
        let m = self.object(root, "sweep", "sweep", &["T"], false)?;
        let items = match m.get("T") {
            None => {
                self.report("sweep.T", "missing required horizon list");
                return None;
            }
            Some(Value::Array(items)) if !items.is_empty() => items,
            Some(_) => {
                self.report("sweep.T", "expected a nonempty array of horizons");
                return None;
            }
        };
        let mut horizons = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            let path = format!("sweep.T[{i}]");
            match item.as_f64() {
                Some(t) if t > 0.0 => {
                    if horizons.contains(&t) {
                        self.report(&path, format!("duplicate horizon {t}"));
                        ok = false;
                    } else if let Some(d) = disc {
                        if (t * d.steps_per_unit).round() < 2.0 {
                            self.report(
                                &path,
                                format!("horizon {t} gives fewer than 2 steps at discretization.K"),
                            );
                            ok = false;
                        }
                    }
                    horizons.push(t);
                }
                Some(t) => {
                    self.report(&path, format!("must be positive, got {t}"));
                    ok = false;
                }
                None => {
                    self.report(&path, "expected a number");
                    ok = false;
                }
            }
        }
        ok.then_some(SweepConfig { horizons })
    }

    fn probe(&mut self, root: &Map<String, Value>) -> Option<ProbeConfig> {
        let m = self.object(root, "probe", "probe", &["samples", "seed"], false)?;
        let samples = self.integer(&m, "samples", "probe", Some(16));
        let seed = self.integer(&m, "seed", "probe", Some(0));
        Some(ProbeConfig {
            samples: samples? as usize,
            seed: seed?,
        })
    }

    fn output(&mut self, root: &Map<String, Value>) -> Option<OutputConfig> {
        let m = self.object(root, "output", "output", &["directory", "formats"], false)?;
        let directory = match m.get("directory") {
            None => Some(PathBuf::from("out")),
            Some(Value::String(s)) if !s.is_empty() => Some(PathBuf::from(s)),
            Some(_) => {
                self.report("output.directory", "expected a nonempty path");
                None
            }
        };
        let formats = match m.get("formats") {
            None => Some(vec![OutputFormat::Csv, OutputFormat::Json]),
            Some(Value::Array(items)) if !items.is_empty() => {
                let mut out = Vec::new();
                for (i, item) in items.iter().enumerate() {
                    match item.as_str() {
                        Some("csv") if !out.contains(&OutputFormat::Csv) => {
                            out.push(OutputFormat::Csv)
                        }
                        Some("json") if !out.contains(&OutputFormat::Json) => {
                            out.push(OutputFormat::Json)
                        }
                        _ => self.report(
                            &format!("output.formats[{i}]"),
                            "expected \"csv\" or \"json\" (each at most once)",
                        ),
                    }
                }
                (out.len() == items.len()).then_some(out)
            }
            Some(_) => {
                self.report("output.formats", "expected a nonempty array");
                None
            }
        };
        Some(OutputConfig {
            directory: directory?,
            formats: formats?,
        })
    }

    fn cross_checks(&mut self, c: &ExperimentConfig) {
        let spec = match c.domain() {
            Ok(spec) => spec,
            Err(e) => return self.report("problem", e.to_string()),
        };
        let grid = match Grid1D::new(&spec, c.discretization.n) {
            Ok(grid) => grid,
            Err(e) => return self.report("discretization.n", e.to_string()),
        };
        if c.problem.variant == VariantName::Robin {
            match c.beta_on(&grid) {
                Ok(beta) if beta.is_zero() => self.report(
                    "problem.beta",
                    "vanishes on every collar node, so the Robin problem carries no control",
                ),
                Ok(_) => {}
                Err(e) => self.report("problem.beta", e.to_string()),
            }
        }
    }
}

/// Byte offset of `"key"` followed by `:` at or after `from`.
fn find_key(text: &str, key: &str, from: usize) -> Option<usize> {
    let needle = format!("\"{key}\"");
    let mut start = from;
    while let Some(off) = text.get(start..)?.find(&needle) {
        let at = start + off;
        let rest = text[at + needle.len()..].trim_start();
        if rest.starts_with(':') {
            return Some(at);
        }
        start = at + needle.len();
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{
  "problem": {
    "variant": "robin",
    "a": -1, "b": 1, "R": 1, "s": 0.5,
    "tail_mode": "zero",
    "beta": [{"start": -2, "end": 2, "value": 1}],
    "target": {"kind": "gaussian", "center": 0, "width": 0.3, "amplitude": 1}
  },
  "discretization": {"n": 32, "K": 8, "theta": 1},
  "sweep": {"T": [1, 2]}
}"#;

    #[test]
    fn well_formed_config_parses_with_defaults() {
        let c = parse_config(GOOD).unwrap();
        assert_eq!(c.control.max_iter, 500);
        assert_eq!(c.control.cg_tol, 1e-10);
        assert_eq!(c.probe.samples, 16);
        assert_eq!(
            c.output.formats,
            vec![OutputFormat::Csv, OutputFormat::Json]
        );
        assert_eq!(c.sweep.horizons, vec![1.0, 2.0]);
        assert!(c.warnings().is_empty());
    }

    #[test]
    fn out_of_range_order_names_the_field_and_line() {
        let text = GOOD.replace("\"s\": 0.5", "\"s\": 1.5");
        let diags = parse_config(&text).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].path, "problem.s");
        assert_eq!(diags[0].line, Some(4));
    }

    #[test]
    fn missing_horizons_give_one_diagnostic() {
        let text = GOOD.replace("\"sweep\": {\"T\": [1, 2]}", "\"sweep\": {}");
        let diags = parse_config(&text).unwrap_err();
        assert_eq!(diags.len(), 1, "{diags:?}");
        assert_eq!(diags[0].path, "sweep.T");
    }

    #[test]
    fn malformed_json_reports_the_line() {
        let diags = parse_config("{\n  \"problem\": \n}").unwrap_err();
        assert_eq!(diags[0].line, Some(3));
    }

    #[test]
    fn robin_without_exterior_coefficient_is_rejected() {
        let text = GOOD.replace("\"value\": 1}]", "\"value\": 0}]");
        let diags = parse_config(&text).unwrap_err();
        assert_eq!(diags[0].path, "problem.beta");
    }

    #[test]
    fn overlapping_segments_and_bad_targets() {
        let text = GOOD
            .replace(
                "[{\"start\": -2, \"end\": 2, \"value\": 1}]",
                "[{\"start\": -2, \"end\": 0, \"value\": 1}, {\"start\": -0.5, \"end\": 2, \"value\": 1}]",
            )
            .replace("\"width\": 0.3", "\"width\": 0");
        let paths: Vec<String> = parse_config(&text)
            .unwrap_err()
            .into_iter()
            .map(|d| d.path)
            .collect();
        assert_eq!(paths, vec!["problem.beta[1]", "problem.target.width"]);
    }

    #[test]
    fn large_order_is_flagged() {
        let c = parse_config(&GOOD.replace("\"s\": 0.5", "\"s\": 0.9")).unwrap();
        assert_eq!(c.warnings().len(), 1);
    }

    #[test]
    fn targets_evaluate() {
        let ind = TargetSpec::Indicator {
            start: -0.5,
            end: 0.5,
            value: 2.0,
        };
        assert_eq!(ind.eval(0.0), 2.0);
        assert_eq!(ind.eval(0.7), 0.0);
        assert_eq!(TargetSpec::Constant { value: 3.0 }.eval(9.0), 3.0);
    }
}

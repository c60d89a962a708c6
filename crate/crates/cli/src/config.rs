//! Sectioned `key = value` configuration files.
//!
//! ```text
//! # quarter five-spot, desk-scale
//! [mesh]
//! nx = 50
//! ny = 50
//!
//! [stabilization]
//! scheme = supg-both
//! ```
//!
//! Keys are the [`SimulationConfig`] field names; each one lives in a fixed
//! section. Values are bare numbers, booleans or words, optionally quoted.

use std::collections::BTreeMap;
use std::fmt;

use fingering_core::coupling::InitialCondition;
use fingering_core::{Error as CoreError, SimulationConfig, StabilizationScheme};

pub const SECTIONS: [&str; 7] = ["mesh", "flow", "transport", "thermal", "time", "stabilization", "output"];

/// Where a resolved value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// Default taken from the benchmark definition.
    Benchmark,
    /// Default chosen by this implementation; the benchmark leaves it open.
    Default,
    File,
    CommandLine,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Benchmark => "benchmark",
            Source::Default => "default",
            Source::File => "config file",
            Source::CommandLine => "command line",
        })
    }
}

struct KeySpec {
    section: &'static str,
    key: &'static str,
    benchmark: bool,
}

const fn spec(section: &'static str, key: &'static str, benchmark: bool) -> KeySpec {
    KeySpec { section, key, benchmark }
}

const KEYS: &[KeySpec] = &[
    spec("mesh", "nx", true),
    spec("mesh", "ny", true),
    spec("mesh", "length", false),
    spec("mesh", "well_size", false),
    spec("flow", "permeability", false),
    spec("flow", "mu0", true),
    spec("flow", "r_c", true),
    spec("flow", "r_theta", true),
    spec("flow", "perturbation", false),
    spec("flow", "seed", false),
    spec("transport", "d_m", true),
    spec("transport", "phi_injection", true),
    spec("transport", "phi_production", true),
    spec("transport", "c0", false),
    spec("thermal", "kappa_theta", false),
    spec("thermal", "theta0", false),
    spec("time", "dt", false),
    spec("time", "t_end", true),
    spec("time", "picard", false),
    spec("time", "picard_max_iterations", false),
    spec("time", "picard_tolerance", false),
    spec("stabilization", "scheme", false),
    spec("stabilization", "grad_threshold", false),
    spec("stabilization", "sold_max_iterations", false),
    spec("stabilization", "sold_tolerance", false),
    spec("output", "snapshot_every", false),
    spec("output", "violation_tol", false),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "`{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct ProvenanceEntry {
    pub section: &'static str,
    pub key: &'static str,
    pub value: String,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: SimulationConfig,
    /// Line on which each key was set in the file.
    pub lines: BTreeMap<&'static str, usize>,
    overrides: Vec<&'static str>,
}

impl ParsedConfig {
    /// Every key with its resolved value and origin, in file order of the
    /// sections.
    pub fn provenance(&self) -> Vec<ProvenanceEntry> {
        KEYS.iter()
            .map(|k| {
                let source = if self.overrides.contains(&k.key) {
                    Source::CommandLine
                } else if self.lines.contains_key(k.key) {
                    Source::File
                } else if k.benchmark {
                    Source::Benchmark
                } else {
                    Source::Default
                };
                ProvenanceEntry { section: k.section, key: k.key, value: render_value(&self.config, k.key), source }
            })
            .collect()
    }

    /// Sets `key` from a command-line flag.
    pub fn override_value(&mut self, key: &str, raw: &str) -> Result<(), ConfigError> {
        let spec = KEYS.iter().find(|k| k.key == key).ok_or_else(|| ConfigError {
            line: None,
            key: Some(key.to_string()),
            message: "unknown key".into(),
        })?;
        assign(&mut self.config, spec.key, raw)
            .map_err(|message| ConfigError { line: None, key: Some(key.to_string()), message })?;
        if !self.overrides.contains(&spec.key) {
            self.overrides.push(spec.key);
        }
        Ok(())
    }

    /// Runs the core validation, attributing each failure to the line that
    /// set the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.config.validate() {
            Ok(()) => Ok(()),
            Err(CoreError::Validation(problems)) => {
                let first = &problems[0];
                let key = first.split(':').next().unwrap_or_default().trim().to_string();
                Err(ConfigError {
                    line: self.lines.get(key.as_str()).copied(),
                    message: problems.join("; "),
                    key: Some(key),
                })
            }
            Err(other) => Err(ConfigError { line: None, key: None, message: other.to_string() }),
        }
    }
}

fn unquote(raw: &str) -> &str {
    let raw = raw.trim();
    for q in ['"', '\''] {
        if raw.len() >= 2 && raw.starts_with(q) && raw.ends_with(q) {
            return &raw[1..raw.len() - 1];
        }
    }
    raw
}

fn parse_num<T: std::str::FromStr>(raw: &str, what: &str) -> Result<T, String> {
    raw.parse().map_err(|_| format!("expected {what}, got `{raw}`"))
}

fn parse_bool(raw: &str) -> Result<bool, String> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{raw}`")),
    }
}

fn assign(cfg: &mut SimulationConfig, key: &str, raw: &str) -> Result<(), String> {
    let raw = unquote(raw);
    let real = |raw: &str| parse_num::<f64>(raw, "a number");
    let count = |raw: &str| parse_num::<usize>(raw, "a non-negative integer");
    match key {
        "nx" => cfg.nx = count(raw)?,
        "ny" => cfg.ny = count(raw)?,
        "length" => cfg.length = real(raw)?,
        "well_size" => cfg.well_size = real(raw)?,
        "permeability" => cfg.permeability = real(raw)?,
        "mu0" => cfg.mu0 = real(raw)?,
        "r_c" => cfg.r_c = real(raw)?,
        "r_theta" => cfg.r_theta = real(raw)?,
        "perturbation" => cfg.perturbation = real(raw)?,
        "seed" => cfg.seed = parse_num(raw, "a non-negative integer")?,
        "d_m" => cfg.d_m = real(raw)?,
        "phi_injection" => cfg.phi_injection = real(raw)?,
        "phi_production" => cfg.phi_production = real(raw)?,
        "c0" => cfg.c0 = InitialCondition::Constant(real(raw)?),
        "kappa_theta" => cfg.kappa_theta = real(raw)?,
        "theta0" => cfg.theta0 = InitialCondition::Constant(real(raw)?),
        "dt" => cfg.dt = real(raw)?,
        "t_end" => cfg.t_end = real(raw)?,
        "picard" => cfg.picard.enabled = parse_bool(raw)?,
        "picard_max_iterations" => cfg.picard.max_iterations = count(raw)?,
        "picard_tolerance" => cfg.picard.tolerance = real(raw)?,
        "scheme" => {
            cfg.scheme = raw.parse::<StabilizationScheme>().map_err(|_| {
                let names: Vec<_> = StabilizationScheme::ALL.iter().map(|s| s.name()).collect();
                format!("expected one of {}, got `{raw}`", names.join(", "))
            })?
        }
        "grad_threshold" => cfg.grad_threshold = real(raw)?,
        "sold_max_iterations" => cfg.sold_iteration.max_iterations = count(raw)?,
        "sold_tolerance" => cfg.sold_iteration.tolerance = real(raw)?,
        "snapshot_every" => cfg.snapshot_every = count(raw)?,
        "violation_tol" => cfg.violation_tol = real(raw)?,
        _ => return Err("unknown key".into()),
    }
    Ok(())
}

fn render_ic(ic: &InitialCondition) -> String {
    match ic {
        InitialCondition::Constant(v) => v.to_string(),
        InitialCondition::Field(values) => format!("<nodal field, {} values>", values.len()),
    }
}

/// The value of `key` as it would be written in a config file.
pub fn render_value(cfg: &SimulationConfig, key: &str) -> String {
    match key {
        "nx" => cfg.nx.to_string(),
        "ny" => cfg.ny.to_string(),
        "length" => cfg.length.to_string(),
        "well_size" => cfg.well_size.to_string(),
        "permeability" => cfg.permeability.to_string(),
        "mu0" => cfg.mu0.to_string(),
        "r_c" => cfg.r_c.to_string(),
        "r_theta" => cfg.r_theta.to_string(),
        "perturbation" => cfg.perturbation.to_string(),
        "seed" => cfg.seed.to_string(),
        "d_m" => cfg.d_m.to_string(),
        "phi_injection" => cfg.phi_injection.to_string(),
        "phi_production" => cfg.phi_production.to_string(),
        "c0" => render_ic(&cfg.c0),
        "kappa_theta" => cfg.kappa_theta.to_string(),
        "theta0" => render_ic(&cfg.theta0),
        "dt" => cfg.dt.to_string(),
        "t_end" => cfg.t_end.to_string(),
        "picard" => cfg.picard.enabled.to_string(),
        "picard_max_iterations" => cfg.picard.max_iterations.to_string(),
        "picard_tolerance" => cfg.picard.tolerance.to_string(),
        "scheme" => cfg.scheme.name().to_string(),
        "grad_threshold" => cfg.grad_threshold.to_string(),
        "sold_max_iterations" => cfg.sold_iteration.max_iterations.to_string(),
        "sold_tolerance" => cfg.sold_iteration.tolerance.to_string(),
        "snapshot_every" => cfg.snapshot_every.to_string(),
        "violation_tol" => cfg.violation_tol.to_string(),
        _ => String::new(),
    }
}

/// Writes every key in config-file syntax. Parsing the result gives back the
/// same config.
pub fn render_config(cfg: &SimulationConfig) -> String {
    let mut out = String::new();
    for section in SECTIONS {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&format!("[{section}]\n"));
        for k in KEYS.iter().filter(|k| k.section == section) {
            out.push_str(&format!("{} = {}\n", k.key, render_value(cfg, k.key)));
        }
    }
    out
}

/// Parses config text without running the cross-field validation.
pub fn parse_document(text: &str) -> Result<ParsedConfig, ConfigError> {
    let mut config = SimulationConfig::default();
    let mut lines = BTreeMap::new();
    let mut section: Option<&'static str> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |key: Option<&str>, message: String| ConfigError { line: Some(line_no), key: key.map(str::to_string), message };
        let line = raw_line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| err(None, format!("malformed section header `{line}`")))?.trim();
            section = Some(
                SECTIONS.iter().copied().find(|s| *s == name).ok_or_else(|| err(None, format!("unknown section `[{name}]`")))?,
            );
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| err(None, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        let spec = KEYS.iter().find(|k| k.key == key).ok_or_else(|| err(Some(key), "unknown key".into()))?;
        let current = section.ok_or_else(|| err(Some(key), "key appears before any section header".into()))?;
        if spec.section != current {
            return Err(err(Some(key), format!("belongs in section [{}], found in [{current}]", spec.section)));
        }
        if lines.contains_key(spec.key) {
            return Err(err(Some(key), "set more than once".into()));
        }
        if value.is_empty() {
            return Err(err(Some(key), "missing value".into()));
        }
        assign(&mut config, spec.key, value).map_err(|m| err(Some(key), m))?;
        lines.insert(spec.key, line_no);
    }
    Ok(ParsedConfig { config, lines, overrides: Vec::new() })
}

/// Parses and validates config text.
pub fn parse_config(text: &str) -> Result<ParsedConfig, ConfigError> {
    let parsed = parse_document(text)?;
    parsed.validate()?;
    Ok(parsed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let p = parse_config("").unwrap();
        assert_eq!(p.config, SimulationConfig::default());
        assert_eq!(p.config.d_m, 1e-7);
        assert_eq!((p.config.r_c, p.config.r_theta, p.config.mu0), (2.0, 2.0, 1.0));
        assert_eq!((p.config.phi_injection, p.config.phi_production), (0.1, 0.1));
        let prov = p.provenance();
        let source = |key: &str| prov.iter().find(|e| e.key == key).unwrap().source;
        assert_eq!(source("d_m"), Source::Benchmark);
        assert_eq!(source("kappa_theta"), Source::Default);
        assert_eq!(source("dt"), Source::Default);
        assert_eq!(source("permeability"), Source::Default);
    }

    #[test]
    fn zero_dt_names_key_and_line() {
        let e = parse_config("[time]\ndt = 0").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("dt"));
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn scheme_word() {
        let p = parse_config("[stabilization]\nscheme = supg-both\n").unwrap();
        assert_eq!(p.config.scheme, StabilizationScheme::SupgBothSold);
        let p = parse_config("[stabilization]\nscheme = \"galerkin\"  # quoted\n").unwrap();
        assert_eq!(p.config.scheme, StabilizationScheme::Galerkin);
    }

    #[test]
    fn rejects_unknown_and_misplaced_keys() {
        let e = parse_config("[mesh]\nnx = 10\nbogus = 1\n").unwrap_err();
        assert_eq!((e.line, e.key.as_deref()), (Some(3), Some("bogus")));
        let e = parse_config("[flow]\nnx = 10\n").unwrap_err();
        assert_eq!((e.line, e.key.as_deref()), (Some(2), Some("nx")));
        let e = parse_config("nx = 10\n").unwrap_err();
        assert_eq!(e.line, Some(1));
        assert!(parse_config("[nope]\n").is_err());
        assert!(parse_config("[mesh]\nnx = 10\nnx = 20\n").is_err());
    }

    #[test]
    fn type_mismatch_names_key() {
        let e = parse_config("[mesh]\n\nnx = ten\n").unwrap_err();
        assert_eq!((e.line, e.key.as_deref()), (Some(3), Some("nx")));
        let e = parse_config("[time]\npicard = yes\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("picard"));
    }

    #[test]
    fn render_round_trips() {
        let mut cfg = SimulationConfig::default();
        cfg.nx = 37;
        cfg.dt = 0.1 + 0.2;
        cfg.d_m = 1.2345678901234567e-7;
        cfg.scheme = StabilizationScheme::SupgCrosswindSold;
        cfg.picard.enabled = true;
        cfg.seed = 99;
        cfg.perturbation = 0.01;
        let text = render_config(&cfg);
        assert_eq!(parse_config(&text).unwrap().config, cfg);
    }

    #[test]
    fn overrides_are_marked() {
        let mut p = parse_config("[time]\ndt = 1.0\n").unwrap();
        p.override_value("dt", "0.25").unwrap();
        assert_eq!(p.config.dt, 0.25);
        let prov = p.provenance();
        assert_eq!(prov.iter().find(|e| e.key == "dt").unwrap().source, Source::CommandLine);
        assert!(p.override_value("dt", "fast").is_err());
    }
}

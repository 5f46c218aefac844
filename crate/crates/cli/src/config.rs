//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Keys are grouped by prefix
//! (`model.`, `gibbs.`, `certificate.`, `grid.`, `thermo.`, `output.`) plus
//! the top-level `seed`. Unknown keys and duplicates are rejected. The
//! resolved form lists every key with a value, defaults included, in sorted
//! order, and parses back to the same configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

/// Every accepted key with its default (`None` when optional).
pub const KEYS: &[(&str, Option<&str>, &str)] = &[
    ("seed", Some("1"), "base seed for data, chains and thermodynamic integration"),
    ("model.family", Some("completion"), "completion | relu | null"),
    ("model.d1", Some("2"), "completion: rows"),
    ("model.d2", Some("2"), "completion: columns"),
    ("model.h", Some("2"), "completion: factor width H"),
    ("model.r", Some("1"), "completion: true rank"),
    ("model.truth", Some("0.6,0.3;0.4,0.2"), "completion: true matrix, rows separated by ';' (\"random\" draws one)"),
    ("model.truth_seed", Some("7"), "completion: seed for a random truth"),
    ("model.sigma", None, "noise standard deviation (default 0.5 completion, 0.1 relu)"),
    ("model.b0", None, "bound on predictions for the Bernstein constants (default H*a^2 for completion with box half-width a, 1 for relu)"),
    ("model.widths", Some("2,4,4,1"), "relu: fitted network widths"),
    ("model.true_widths", Some("2,2,1"), "relu: widths of the true network"),
    ("model.truth_params", Some("0.8,0.4,-0.4,0.8,0.2,0.2,0.3,0.2,0.28"), "relu: true parameters, per layer W row-major then b"),
    ("model.input_lo", Some("-1"), "relu: input box lower end"),
    ("model.input_hi", Some("1"), "relu: input box upper end"),
    ("model.grid", Some("24"), "relu: midpoint grid per axis for the population risk"),
    ("model.dim", Some("2"), "null: parameter dimension"),
    ("gibbs.omega", None, "learning rate; overrides gibbs.omega_fraction"),
    ("gibbs.omega_fraction", Some("0.5"), "learning rate as a fraction of omega_bar"),
    ("gibbs.n", Some("1000"), "sample size for certify and gibbs-run"),
    ("gibbs.box_lo", Some("-1"), "prior box lower end, every coordinate"),
    ("gibbs.box_hi", Some("1"), "prior box upper end, every coordinate"),
    ("gibbs.proposal_scale", None, "relative proposal scale (default 0.2/sqrt(dim))"),
    ("gibbs.chain_length", Some("20000"), "iterations per chain including burn-in"),
    ("gibbs.burn_in", Some("4000"), "burn-in iterations"),
    ("gibbs.thinning", Some("1"), "keep every k-th draw"),
    ("gibbs.chains", Some("2"), "independent chains"),
    ("certificate.delta", Some("0.05"), "confidence parameter in (0, 1)"),
    ("certificate.c0", None, "constant C0 (default C1 - log phi0 for completion, 0 otherwise)"),
    ("certificate.rlct_source", None, "discrete_min | closed_form | relu_upper_bound | half_dimension"),
    ("grid.n", Some("50,150,500,1500,5000"), "sample sizes for the scaling experiment"),
    ("grid.replicates", Some("3"), "replicates per sample size"),
    ("thermo.enabled", Some("false"), "estimate -log Z(n) per cell"),
    ("thermo.beta", Some("1"), "inverse temperature multiplier"),
    ("thermo.rungs", Some("64"), "rungs of the geometric schedule"),
    ("thermo.s_min", Some("1e-6"), "smallest positive rung"),
    ("thermo.chain_length", Some("20000"), "iterations per rung including burn-in"),
    ("thermo.burn_in", Some("4000"), "burn-in per rung"),
    ("thermo.loglog", Some("false"), "include -log log n in the fit"),
    ("output.dir", Some("out"), "output directory"),
    ("output.formats", Some("csv,svg,json"), "subset of csv, svg, json"),
];

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !known(key) {
                return Err(CliError::Usage(format!("line {}: unknown key '{key}'", lineno + 1)));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(CliError::Usage(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> CliResult<()> {
        if !known(key) {
            return Err(CliError::Usage(format!("unknown key '{key}'")));
        }
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&str> {
        debug_assert!(known(key), "unregistered key {key}");
        self.entries.get(key).map(String::as_str).or_else(|| {
            KEYS.iter().find(|(k, _, _)| *k == key).and_then(|(_, d, _)| *d)
        })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| CliError::Usage(format!("cannot parse {key} = '{v}'"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> CliResult<T> {
        self.get(key)?.ok_or_else(|| CliError::Usage(format!("missing required key {key}")))
    }

    pub fn string(&self, key: &str) -> CliResult<String> {
        self.require(key)
    }

    pub fn flag(&self, key: &str) -> CliResult<bool> {
        match self.string(key)?.as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(CliError::Usage(format!("{key} must be true or false, got '{other}'"))),
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> CliResult<Vec<T>> {
        self.string(key)?
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| CliError::Usage(format!("cannot parse element '{s}' of {key}"))))
            .collect()
    }

    /// Every key with a value, defaults included, sorted by key.
    pub fn resolved(&self) -> String {
        let mut keys: Vec<&str> = KEYS.iter().map(|(k, _, _)| *k).collect();
        keys.sort_unstable();
        let mut out = String::new();
        for k in keys {
            if let Some(v) = self.raw(k) {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    /// Documented template listing every key.
    pub fn template() -> String {
        let mut out = String::new();
        for (k, d, doc) in KEYS {
            let _ = writeln!(out, "# {doc}");
            match d {
                Some(v) => {
                    let _ = writeln!(out, "{k} = {v}");
                }
                None => {
                    let _ = writeln!(out, "# {k} =");
                }
            }
        }
        out
    }
}

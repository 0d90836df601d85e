//! The flat key-value experiment config format.
//!
//! One `key = value` pair per line, `#` starts a comment. Every key has a
//! default (depending on the selected experiment), parsing rejects unknown
//! or duplicate keys, and serialization echoes every key explicitly so that
//! parse -> serialize -> parse is the identity.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use tsrvlab_core::experiments::{ExperimentConfig, ExperimentKind, KernelKind};

use crate::{CliError, CliResult};

/// All recognized keys, in serialization order.
const KEYS: &[&str] = &[
    "experiment",
    "mu",
    "sigma",
    "x0",
    "horizon",
    "n",
    "kernel",
    "gamma",
    "alpha",
    "c",
    "k",
    "replications",
    "seed",
    "refine",
    "gamma_sweep",
    "n_sweep",
    "fig2_gamma_small",
    "fig2_gamma_large",
    "fig3_draws",
    "out",
    "timestamps",
    "thm1_mean_tol",
    "thm1_var_lo",
    "thm1_var_hi",
    "thm1_ks_tol",
    "thm2_rel_tol",
    "thm3_ratio_lo",
    "thm3_ratio_hi",
    "eq29_ratio_lo",
    "eq29_ratio_hi",
    "fig3_mid_gamma",
    "fig3_mid_lo",
    "fig3_mid_hi",
    "fig3_blowup_factor",
];

/// Raw `key = value` pairs read from a file or assembled from flags.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    pairs: Vec<(String, String)>,
}

impl KeyValues {
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.pairs.push((key.to_string(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Parse the text form, rejecting malformed lines, unknown keys and
    /// duplicates; diagnostics name the offending key or line.
    pub fn parse_text(text: &str) -> CliResult<Self> {
        let mut out = Self::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected 'key = value', got '{raw}'",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(CliError::Config(format!(
                    "line {}: unknown key '{key}'",
                    lineno + 1
                )));
            }
            if seen.insert(key.to_string(), ()).is_some() {
                return Err(CliError::Config(format!(
                    "line {}: duplicate key '{key}'",
                    lineno + 1
                )));
            }
            out.set(key, value);
        }
        Ok(out)
    }

    pub fn read_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_text(&text)
    }
}

fn parse_f64(key: &str, v: &str) -> CliResult<f64> {
    v.parse()
        .map_err(|_| CliError::Config(format!("{key}: '{v}' is not a number")))
}

fn parse_usize(key: &str, v: &str) -> CliResult<usize> {
    v.parse()
        .map_err(|_| CliError::Config(format!("{key}: '{v}' is not a non-negative integer")))
}

fn parse_u64(key: &str, v: &str) -> CliResult<u64> {
    v.parse()
        .map_err(|_| CliError::Config(format!("{key}: '{v}' is not a 64-bit seed")))
}

fn parse_bool(key: &str, v: &str) -> CliResult<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(CliError::Config(format!("{key}: expected true or false, got '{v}'"))),
    }
}

fn parse_opt_usize(key: &str, v: &str) -> CliResult<Option<usize>> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_usize(key, v).map(Some)
    }
}

fn parse_f64_list(key: &str, v: &str) -> CliResult<Vec<f64>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|s| parse_f64(key, s.trim()))
        .collect()
}

fn parse_usize_list(key: &str, v: &str) -> CliResult<Vec<usize>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|s| parse_usize(key, s.trim()))
        .collect()
}

/// Apply key-value pairs on top of a config.
fn apply(cfg: &mut ExperimentConfig, kv: &KeyValues) -> CliResult<()> {
    for (key, v) in &kv.pairs {
        match key.as_str() {
            "experiment" => cfg.experiment = ExperimentKind::parse(v)?,
            "mu" => cfg.mu = parse_f64(key, v)?,
            "sigma" => cfg.sigma = parse_f64(key, v)?,
            "x0" => cfg.x0 = parse_f64(key, v)?,
            "horizon" => cfg.horizon = parse_f64(key, v)?,
            "n" => cfg.n = parse_usize(key, v)?,
            "kernel" => cfg.kernel = KernelKind::parse(v)?,
            "gamma" => cfg.gamma = parse_f64(key, v)?,
            "alpha" => cfg.alpha = parse_f64(key, v)?,
            "c" => cfg.c = parse_f64(key, v)?,
            "k" => cfg.k = parse_opt_usize(key, v)?,
            "replications" => cfg.replications = parse_usize(key, v)?,
            "seed" => cfg.seed = parse_u64(key, v)?,
            "refine" => cfg.refine = parse_opt_usize(key, v)?,
            "gamma_sweep" => cfg.gamma_sweep = parse_f64_list(key, v)?,
            "n_sweep" => cfg.n_sweep = parse_usize_list(key, v)?,
            "fig2_gamma_small" => cfg.fig2_gamma_small = parse_f64(key, v)?,
            "fig2_gamma_large" => cfg.fig2_gamma_large = parse_f64(key, v)?,
            "fig3_draws" => cfg.fig3_draws = parse_usize(key, v)?,
            "out" => cfg.out = v.clone(),
            "timestamps" => cfg.timestamps = parse_bool(key, v)?,
            "thm1_mean_tol" => cfg.thresholds.thm1_mean_tol = parse_f64(key, v)?,
            "thm1_var_lo" => cfg.thresholds.thm1_var_lo = parse_f64(key, v)?,
            "thm1_var_hi" => cfg.thresholds.thm1_var_hi = parse_f64(key, v)?,
            "thm1_ks_tol" => cfg.thresholds.thm1_ks_tol = parse_f64(key, v)?,
            "thm2_rel_tol" => cfg.thresholds.thm2_rel_tol = parse_f64(key, v)?,
            "thm3_ratio_lo" => cfg.thresholds.thm3_ratio_lo = parse_f64(key, v)?,
            "thm3_ratio_hi" => cfg.thresholds.thm3_ratio_hi = parse_f64(key, v)?,
            "eq29_ratio_lo" => cfg.thresholds.eq29_ratio_lo = parse_f64(key, v)?,
            "eq29_ratio_hi" => cfg.thresholds.eq29_ratio_hi = parse_f64(key, v)?,
            "fig3_mid_gamma" => cfg.thresholds.fig3_mid_gamma = parse_f64(key, v)?,
            "fig3_mid_lo" => cfg.thresholds.fig3_mid_lo = parse_f64(key, v)?,
            "fig3_mid_hi" => cfg.thresholds.fig3_mid_hi = parse_f64(key, v)?,
            "fig3_blowup_factor" => cfg.thresholds.fig3_blowup_factor = parse_f64(key, v)?,
            _ => unreachable!("key list mismatch"),
        }
    }
    Ok(())
}

/// Assemble a validated config: experiment defaults, then file values, then
/// flag overrides.
pub fn parse_config(
    file: Option<&KeyValues>,
    flags: &KeyValues,
) -> CliResult<ExperimentConfig> {
    // the experiment kind decides the defaults; flags take precedence
    let kind_str = flags
        .get("experiment")
        .or_else(|| file.and_then(|f| f.get("experiment")))
        .ok_or_else(|| CliError::Config("experiment: no experiment selected".into()))?;
    let kind = ExperimentKind::parse(kind_str)?;
    let mut cfg = ExperimentConfig::defaults(kind);
    if let Some(file) = file {
        apply(&mut cfg, file)?;
    }
    apply(&mut cfg, flags)?;
    cfg.experiment = kind;
    cfg.validate()?;
    Ok(cfg)
}

fn f64_str(v: f64) -> String {
    // shortest representation that round-trips exactly
    format!("{v}")
}

fn f64_list_str(vs: &[f64]) -> String {
    vs.iter().map(|v| f64_str(*v)).collect::<Vec<_>>().join(",")
}

fn usize_list_str(vs: &[usize]) -> String {
    vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Canonical text form: every key echoed explicitly in a fixed order.
pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    let t = &cfg.thresholds;
    let mut s = String::new();
    let opt = |o: Option<usize>| o.map_or_else(|| "auto".to_string(), |v| v.to_string());
    let rows: Vec<(&str, String)> = vec![
        ("experiment", cfg.experiment.name().into()),
        ("mu", f64_str(cfg.mu)),
        ("sigma", f64_str(cfg.sigma)),
        ("x0", f64_str(cfg.x0)),
        ("horizon", f64_str(cfg.horizon)),
        ("n", cfg.n.to_string()),
        ("kernel", cfg.kernel.name().into()),
        ("gamma", f64_str(cfg.gamma)),
        ("alpha", f64_str(cfg.alpha)),
        ("c", f64_str(cfg.c)),
        ("k", opt(cfg.k)),
        ("replications", cfg.replications.to_string()),
        ("seed", cfg.seed.to_string()),
        ("refine", opt(cfg.refine)),
        ("gamma_sweep", f64_list_str(&cfg.gamma_sweep)),
        ("n_sweep", usize_list_str(&cfg.n_sweep)),
        ("fig2_gamma_small", f64_str(cfg.fig2_gamma_small)),
        ("fig2_gamma_large", f64_str(cfg.fig2_gamma_large)),
        ("fig3_draws", cfg.fig3_draws.to_string()),
        ("out", cfg.out.clone()),
        ("timestamps", cfg.timestamps.to_string()),
        ("thm1_mean_tol", f64_str(t.thm1_mean_tol)),
        ("thm1_var_lo", f64_str(t.thm1_var_lo)),
        ("thm1_var_hi", f64_str(t.thm1_var_hi)),
        ("thm1_ks_tol", f64_str(t.thm1_ks_tol)),
        ("thm2_rel_tol", f64_str(t.thm2_rel_tol)),
        ("thm3_ratio_lo", f64_str(t.thm3_ratio_lo)),
        ("thm3_ratio_hi", f64_str(t.thm3_ratio_hi)),
        ("eq29_ratio_lo", f64_str(t.eq29_ratio_lo)),
        ("eq29_ratio_hi", f64_str(t.eq29_ratio_hi)),
        ("fig3_mid_gamma", f64_str(t.fig3_mid_gamma)),
        ("fig3_mid_lo", f64_str(t.fig3_mid_lo)),
        ("fig3_mid_hi", f64_str(t.fig3_mid_hi)),
        ("fig3_blowup_factor", f64_str(t.fig3_blowup_factor)),
    ];
    debug_assert_eq!(rows.len(), KEYS.len());
    for (k, v) in rows {
        writeln!(s, "{k} = {v}").unwrap();
    }
    s
}

//! Flat `key = value` experiment files.
//!
//! ```text
//! # comments run to end of line
//! schemes = proposed_short, tdma_short
//! users   = 3
//! rate    = 1.0
//! snr_db  = 0, 10, 20, 30
//! alpha   = search        # or a number
//! trials  = 100000        # 0 disables Monte Carlo
//! seed    = 7
//! output  = fig1.csv
//! ```

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use noma1b_core::baselines::BaselineSpec;
use noma1b_core::GridOptions;

use crate::error::{config_err, CliError, CliResult};

pub const SEED_ENV: &str = "NOMA1B_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    ProposedShort,
    ProposedLong,
    Baseline(BaselineSpec),
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::ProposedShort => "proposed_short",
            Scheme::ProposedLong => "proposed_long",
            Scheme::Baseline(b) => b.name(),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "proposed_short" => Ok(Scheme::ProposedShort),
            "proposed_long" => Ok(Scheme::ProposedLong),
            other => other
                .parse::<BaselineSpec>()
                .map(Scheme::Baseline)
                .map_err(|_| format!("unknown scheme '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    Fixed(f64),
    Search,
}

impl FromStr for AlphaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "search" {
            return Ok(AlphaMode::Search);
        }
        match s.parse::<f64>() {
            Ok(a) if a > 0.0 => Ok(AlphaMode::Fixed(a)),
            _ => Err(format!(
                "alpha must be 'search' or a positive number, got '{s}'"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub schemes: Vec<Scheme>,
    pub users: Vec<usize>,
    pub rates: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub alpha: AlphaMode,
    pub grid: GridOptions,
    /// Monte Carlo trials per row; 0 disables simulation.
    pub trials: u64,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    /// Record per-row wall time (makes output run-dependent).
    pub timing: bool,
    /// Relative threshold perturbation applied to simulated allocations.
    pub perturb: f64,
    /// SNR window (dB) for diversity fits.
    pub fit_window: (f64, f64),
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schemes: vec![Scheme::ProposedShort],
            users: vec![3],
            rates: vec![1.0],
            snr_db: Vec::new(),
            alpha: AlphaMode::Search,
            grid: GridOptions::default(),
            trials: 0,
            seed: None,
            output: None,
            timing: false,
            perturb: 0.0,
            fit_window: (30.0, 45.0),
        }
    }
}

const KEYS: [&str; 16] = [
    "schemes",
    "users",
    "rate",
    "snr_db",
    "alpha",
    "alpha_lo",
    "alpha_hi",
    "alpha_points",
    "alpha_refine",
    "trials",
    "seed",
    "output",
    "timing",
    "perturb",
    "fit_lo_db",
    "fit_hi_db",
];

fn parse_one<T: FromStr>(line: usize, key: &str, raw: &str) -> CliResult<T> {
    raw.parse::<T>()
        .map_err(|_| CliError::Config(format!("line {line}: {key}: cannot parse '{raw}'")))
}

fn parse_list<T: FromStr>(line: usize, key: &str, raw: &str) -> CliResult<Vec<T>> {
    if raw.is_empty() {
        return config_err(format!("line {line}: {key}: list is empty"));
    }
    raw.split(',')
        .map(|item| parse_one(line, key, item.trim()))
        .collect()
}

fn parse_bool(line: usize, key: &str, raw: &str) -> CliResult<bool> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => config_err(format!(
            "line {line}: {key}: expected true or false, got '{raw}'"
        )),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return config_err(format!("line {line}: expected 'key = value'"));
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return config_err(format!("line {line}: unknown key '{key}'"));
            }
            if let Some(prev) = seen.insert(key.to_string(), line) {
                return config_err(format!("line {line}: '{key}' already set on line {prev}"));
            }
            match key {
                "schemes" => {
                    cfg.schemes = value
                        .split(',')
                        .map(|s| {
                            s.trim()
                                .parse::<Scheme>()
                                .map_err(|e| CliError::Config(format!("line {line}: {e}")))
                        })
                        .collect::<CliResult<_>>()?;
                }
                "users" => cfg.users = parse_list(line, key, value)?,
                "rate" => cfg.rates = parse_list(line, key, value)?,
                "snr_db" => cfg.snr_db = parse_list(line, key, value)?,
                "alpha" => {
                    cfg.alpha = value
                        .parse()
                        .map_err(|e| CliError::Config(format!("line {line}: {e}")))?
                }
                "alpha_lo" => cfg.grid.lo = parse_one(line, key, value)?,
                "alpha_hi" => cfg.grid.hi = parse_one(line, key, value)?,
                "alpha_points" => cfg.grid.points = parse_one(line, key, value)?,
                "alpha_refine" => cfg.grid.refine_width = parse_one(line, key, value)?,
                "trials" => cfg.trials = parse_one(line, key, value)?,
                "seed" => cfg.seed = Some(parse_one(line, key, value)?),
                "output" => cfg.output = Some(PathBuf::from(value)),
                "timing" => cfg.timing = parse_bool(line, key, value)?,
                "perturb" => cfg.perturb = parse_one(line, key, value)?,
                "fit_lo_db" => cfg.fit_window.0 = parse_one(line, key, value)?,
                "fit_hi_db" => cfg.fit_window.1 = parse_one(line, key, value)?,
                _ => unreachable!("key list checked above"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.snr_db.is_empty() {
            return config_err("snr_db: at least one value is required");
        }
        if self.schemes.is_empty() {
            return config_err("schemes: at least one scheme is required");
        }
        if let Some(u) = self
            .users
            .iter()
            .find(|u| **u == 0 || **u > noma1b_core::model::MAX_USERS)
        {
            return config_err(format!(
                "users: {u} outside 1..={}",
                noma1b_core::model::MAX_USERS
            ));
        }
        if let Some(r) = self.rates.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return config_err(format!("rate: {r} must be positive"));
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return config_err(format!("snr_db: {s} is not finite"));
        }
        if self
            .schemes
            .contains(&Scheme::Baseline(BaselineSpec::PerfectCsi))
            && self.trials == 0
        {
            return config_err("perfect_csi is evaluated by simulation: trials must be at least 1");
        }
        if !(self.perturb > -1.0 && self.perturb.is_finite()) {
            return config_err(format!("perturb: {} must exceed -1", self.perturb));
        }
        self.grid
            .validate()
            .map_err(|e| CliError::Config(format!("alpha grid: {e}")))?;
        Ok(())
    }

    /// Explicit seed, else the environment default, else 1.
    pub fn resolved_seed(&self) -> CliResult<u64> {
        match self.seed {
            Some(s) => Ok(s),
            None => default_seed(),
        }
    }
}

pub fn default_seed() -> CliResult<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}: cannot parse '{v}' as a seed"))),
        Err(_) => Ok(1),
    }
}

use noma1b_core::baselines::BaselineSpec;

use crate::config::{AlphaMode, ExperimentConfig, Scheme};
use crate::error::{CliError, CliResult};
use crate::sweep::{run_sweep, SweepRow};

/// Allowed gap between analytic and simulated COP, in standard errors.
pub const SIGMA_LIMIT: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct Check {
    pub row: SweepRow,
    /// `|analytic - mc| / stderr`.
    pub deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scheme,K,r0,snr_db,alpha_used,cop_analytic,cop_mc,mc_stderr,deviation,pass\n",
        );
        for c in &self.checks {
            let r = &c.row;
            let alpha = match r.alpha_used {
                Some(a) if a.is_infinite() => "inf".to_string(),
                Some(a) => format!("{a:.9e}"),
                None => String::new(),
            };
            out.push_str(&format!(
                "{},{},{:.9e},{:.9e},{},{:.9e},{:.9e},{:.9e},{:.3},{}\n",
                r.point.scheme,
                r.point.users,
                r.point.rate,
                r.point.snr_db,
                alpha,
                r.cop_analytic.unwrap_or(f64::NAN),
                r.cop_mc.unwrap_or(f64::NAN),
                r.mc_stderr.unwrap_or(f64::NAN),
                c.deviation,
                if c.pass { "pass" } else { "FAIL" }
            ));
        }
        out
    }
}

/// Suite used when no config file is given.
pub fn default_suite() -> ExperimentConfig {
    ExperimentConfig {
        schemes: vec![
            Scheme::ProposedShort,
            Scheme::ProposedLong,
            Scheme::Baseline(BaselineSpec::TdmaShort),
            Scheme::Baseline(BaselineSpec::FixedNomaShort),
            Scheme::Baseline(BaselineSpec::FixedNomaLong),
        ],
        users: vec![1, 2, 3],
        rates: vec![1.0],
        snr_db: vec![10.0, 20.0, 30.0],
        alpha: AlphaMode::Fixed(0.5),
        trials: 200_000,
        ..ExperimentConfig::default()
    }
}

fn check(row: SweepRow, trials: f64) -> Check {
    let (Some(a), Some(m), Some(se)) = (row.cop_analytic, row.cop_mc, row.mc_stderr) else {
        unreachable!("validated rows carry both estimates")
    };
    // No or all outages leave zero empirical spread: use the spread the
    // analytic value predicts, floored at one trial.
    let se = if se > 0.0 {
        se
    } else {
        (a * (1.0 - a) / trials).sqrt().max(1.0 / trials)
    };
    let deviation = (a - m).abs() / se;
    Check {
        pass: deviation <= SIGMA_LIMIT,
        deviation,
        row,
    }
}

/// Runs every point of `cfg` with simulation and compares against the analytic COP.
pub fn validate(cfg: &ExperimentConfig) -> CliResult<ValidationReport> {
    if cfg.trials == 0 {
        return Err(CliError::Config("validate needs trials >= 1".into()));
    }
    if cfg
        .schemes
        .contains(&Scheme::Baseline(BaselineSpec::PerfectCsi))
    {
        return Err(CliError::Config(
            "perfect_csi has no analytic COP and cannot be validated".into(),
        ));
    }
    let trials = cfg.trials as f64;
    let checks = run_sweep(cfg)?
        .into_iter()
        .map(|row| check(row, trials))
        .collect();
    Ok(ValidationReport { checks })
}

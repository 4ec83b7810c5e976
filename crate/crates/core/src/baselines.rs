//! Comparison schemes: fixed NOMA allocations, NOMA without feedback,
//! TDMA with one-bit feedback, and the perfect-CSI bound.

use std::fmt;
use std::str::FromStr;

use crate::analytic::Coupling;
use crate::error::{domain, Error, Result};
use crate::mc::{SimReport, Simulator};
use crate::model::{SystemConfig, ZetaMatrix};
use crate::optlong::{self, LongProblem, LongTermSolution};
use crate::optshort::{self, ShortTermSolution, SolverOptions};
use crate::search::GridOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineSpec {
    TdmaShort,
    TdmaLong,
    FixedNomaShort,
    FixedNomaLong,
    NoFeedback,
    PerfectCsi,
}

impl BaselineSpec {
    pub const ALL: [BaselineSpec; 6] = [
        BaselineSpec::TdmaShort,
        BaselineSpec::TdmaLong,
        BaselineSpec::FixedNomaShort,
        BaselineSpec::FixedNomaLong,
        BaselineSpec::NoFeedback,
        BaselineSpec::PerfectCsi,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BaselineSpec::TdmaShort => "tdma_short",
            BaselineSpec::TdmaLong => "tdma_long",
            BaselineSpec::FixedNomaShort => "fixed_noma_short",
            BaselineSpec::FixedNomaLong => "fixed_noma_long",
            BaselineSpec::NoFeedback => "no_feedback",
            BaselineSpec::PerfectCsi => "perfect_csi",
        }
    }

    /// Whether the scheme's outcome depends on the feedback threshold.
    pub fn uses_alpha(&self) -> bool {
        matches!(
            self,
            BaselineSpec::TdmaShort | BaselineSpec::TdmaLong | BaselineSpec::FixedNomaLong
        )
    }
}

impl fmt::Display for BaselineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown baseline '{s}'")))
    }
}

/// `mu_1 = (rhat0 + 1)^K - 1`: the total power-to-threshold factor of an
/// equal-threshold NOMA column.
pub fn mu1(config: &SystemConfig) -> f64 {
    (config.users() as f64 * config.rhat0().ln_1p()).exp_m1()
}

/// Every threshold equal to `mu_1 / P`; each event spends exactly `P`.
pub fn fixed_noma_short(config: &SystemConfig) -> Result<ZetaMatrix> {
    let z = mu1(config) / config.power();
    ZetaMatrix::from_fn(config.users(), |_, _| z)
}

/// `zeta_{k,n} = mu_1 (K + 1) P_n / P`: event `n` gets power `P / ((K + 1) P_n)`,
/// so the expected power is exactly `P`.
pub fn fixed_noma_long(config: &SystemConfig) -> Result<ZetaMatrix> {
    let alpha = config.alpha();
    if !(alpha > 0.0 && alpha.is_finite()) {
        return domain(format!(
            "fixed long-term allocation needs 0 < alpha < inf, got {alpha}"
        ));
    }
    let probs = config.event_probabilities();
    if let Some(n) = probs.iter().position(|p| !(*p > 0.0)) {
        return domain(format!("event {n} has zero probability at alpha = {alpha}"));
    }
    let scale = mu1(config) * (config.users() + 1) as f64 / config.power();
    ZetaMatrix::from_fn(config.users(), |_, n| scale * probs[n])
}

/// COP without feedback: a single random ordering, so the outage is
/// `1 - exp(-sum_k zeta_hat_k)` with the running maximum `zeta_hat`.
pub fn no_feedback_cop(column: &[f64]) -> Result<f64> {
    if column.is_empty() {
        return domain("empty threshold column");
    }
    if let Some(k) = column.iter().position(|z| !(*z > 0.0 && z.is_finite())) {
        return domain(format!(
            "zeta[{k}] = {} must be positive and finite",
            column[k]
        ));
    }
    let mut hat = 0.0f64;
    let total: f64 = column
        .iter()
        .map(|z| {
            hat = hat.max(*z);
            hat
        })
        .sum();
    Ok(-(-total).exp_m1())
}

/// The fixed column `mu_1 / P` used as the no-feedback reference scheme.
pub fn no_feedback_column(config: &SystemConfig) -> Vec<f64> {
    vec![mu1(config) / config.power(); config.users()]
}

/// The column minimizing `sum zeta_k` under the power budget:
/// `zeta_k = sqrt(c_k) S / P` with `S = sum_j sqrt(c_j)`.
pub fn no_feedback_optimal_column(config: &SystemConfig) -> Vec<f64> {
    let roots: Vec<f64> = config
        .noma_coefficients()
        .iter()
        .map(|c| c.sqrt())
        .collect();
    let s: f64 = roots.iter().sum();
    roots.iter().map(|r| r * s / config.power()).collect()
}

/// TDMA coefficient `(2^{K r0} - 1) / K`: per-slot power is `u / zeta` and
/// the budget averages over the `K` slots.
pub fn tdma_coefficients(config: &SystemConfig) -> Vec<f64> {
    let users = config.users() as f64;
    let u = (users * config.rate() * std::f64::consts::LN_2).exp_m1();
    vec![u / users; config.users()]
}

/// Equal TDMA allocation: every slot gets power `P`, `zeta = (2^{K r0} - 1) / P`.
pub fn tdma_equal(config: &SystemConfig) -> Result<ZetaMatrix> {
    let z = tdma_coefficients(config)[0] * config.users() as f64 / config.power();
    ZetaMatrix::from_fn(config.users(), |_, _| z)
}

/// Optimized TDMA under the per-block budget at `config.alpha()`.
pub fn tdma_short(config: &SystemConfig) -> Result<ShortTermSolution> {
    optshort::solve_events(
        config,
        &tdma_coefficients(config),
        Coupling::Independent,
        &SolverOptions::default(),
    )
}

/// Optimized TDMA under the average budget at `config.alpha()`.
pub fn tdma_long(config: &SystemConfig) -> Result<LongTermSolution> {
    LongProblem::new(config, tdma_coefficients(config))?.solve(config, Coupling::Independent)
}

pub fn tdma_search_short(config: &SystemConfig, grid: &GridOptions) -> Result<ShortTermSolution> {
    optshort::search_events(
        config,
        &tdma_coefficients(config),
        Coupling::Independent,
        grid,
    )
}

pub fn tdma_search_long(config: &SystemConfig, grid: &GridOptions) -> Result<LongTermSolution> {
    optlong::search_with(
        config,
        &tdma_coefficients(config),
        Coupling::Independent,
        grid,
    )
}

/// Monte Carlo COP with perfect CSI at the transmitter.
pub fn perfect_csi_outage(config: &SystemConfig, trials: u64, seed: u64) -> Result<SimReport> {
    Simulator::new(trials, seed).estimate_perfect_csi(config)
}

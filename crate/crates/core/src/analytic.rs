//! Exact common outage probability (COP).
//!
//! Conditioned on event `N = n` the ordered channels are independent, so the
//! conditional COP is `1 - prod_k (1 - P^indiv_{k,n})`, and the overall COP
//! averages it over the binomial event distribution.

use crate::error::{domain, Result};
use crate::model::{self, SystemConfig, ZetaMatrix};

/// How per-user outage thresholds couple across slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// SIC decoding: slot `k` must clear every threshold of slots `0..=k`,
    /// so the effective threshold is the running maximum.
    Sic,
    /// Orthogonal access (TDMA): each slot only needs its own threshold.
    Independent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventTerm {
    pub n: usize,
    pub probability: f64,
    pub conditional_cop: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CopBreakdown {
    pub total: f64,
    pub per_event: Vec<EventTerm>,
    /// `per_user[n][k]`: individual conditional outage of slot `k` in event `n`.
    pub per_user: Vec<Vec<f64>>,
}

impl CopBreakdown {
    fn from_parts(probabilities: &[f64], per_user: Vec<Vec<f64>>) -> Self {
        let per_event: Vec<EventTerm> = probabilities
            .iter()
            .zip(&per_user)
            .enumerate()
            .map(|(n, (p, users))| EventTerm {
                n,
                probability: *p,
                conditional_cop: common_from_individual(users),
            })
            .collect();
        let total = per_event
            .iter()
            .map(|t| t.probability * t.conditional_cop)
            .sum::<f64>()
            .clamp(0.0, 1.0);
        Self {
            total,
            per_event,
            per_user,
        }
    }
}

/// Individual conditional outage of slot `k` (0-based) in event `n` given its
/// effective threshold `zeta_hat`.
pub fn indiv_outage(slot: usize, n: usize, zeta_hat: f64, alpha: f64) -> Result<f64> {
    if !(zeta_hat > 0.0) {
        return domain(format!("threshold must be positive, got {zeta_hat}"));
    }
    if alpha.is_nan() || alpha < 0.0 {
        return domain(format!("alpha must be >= 0, got {alpha}"));
    }
    Ok(indiv_unchecked(slot, n, zeta_hat, alpha))
}

fn indiv_unchecked(slot: usize, n: usize, zeta_hat: f64, alpha: f64) -> f64 {
    if slot < n {
        model::truncated_cdf(zeta_hat, alpha)
    } else {
        model::shifted_cdf(zeta_hat, alpha)
    }
}

/// `1 - prod (1 - p_k)`, evaluated in the log domain so tiny outages keep
/// their relative precision.
pub fn common_from_individual(indiv: &[f64]) -> f64 {
    let log_success: f64 = indiv.iter().map(|p| (-p).ln_1p()).sum();
    (-log_success.exp_m1()).clamp(0.0, 1.0)
}

fn individual_outages(n: usize, zetas: &[f64], alpha: f64, coupling: Coupling) -> Vec<f64> {
    let mut hat = f64::NEG_INFINITY;
    zetas
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let threshold = match coupling {
                Coupling::Sic => {
                    hat = hat.max(*z);
                    hat
                }
                Coupling::Independent => *z,
            };
            indiv_unchecked(k, n, threshold, alpha)
        })
        .collect()
}

/// Conditional COP of event `n` for one column of thresholds (SIC coupling).
pub fn conditional_cop(n: usize, zetas: &[f64], alpha: f64) -> Result<f64> {
    conditional_cop_with(n, zetas, alpha, Coupling::Sic)
}

pub fn conditional_cop_with(
    n: usize,
    zetas: &[f64],
    alpha: f64,
    coupling: Coupling,
) -> Result<f64> {
    if n > zetas.len() {
        return domain(format!("event {n} exceeds column length {}", zetas.len()));
    }
    if let Some(k) = zetas.iter().position(|z| !(*z > 0.0)) {
        return domain(format!("zeta[{k}] = {} must be positive", zetas[k]));
    }
    if alpha.is_nan() || alpha < 0.0 {
        return domain(format!("alpha must be >= 0, got {alpha}"));
    }
    Ok(common_from_individual(&individual_outages(
        n, zetas, alpha, coupling,
    )))
}

/// Exact COP of a NOMA allocation with SIC decoding.
pub fn cop(config: &SystemConfig, zetas: &ZetaMatrix) -> Result<CopBreakdown> {
    cop_with(config, zetas, Coupling::Sic)
}

/// Exact COP of a TDMA allocation (`zetas` are per-slot TDMA thresholds).
pub fn tdma_cop(config: &SystemConfig, zetas: &ZetaMatrix) -> Result<CopBreakdown> {
    cop_with(config, zetas, Coupling::Independent)
}

pub fn cop_with(
    config: &SystemConfig,
    zetas: &ZetaMatrix,
    coupling: Coupling,
) -> Result<CopBreakdown> {
    if zetas.users() != config.users() {
        return domain(format!(
            "zeta matrix has {} users, config has {}",
            zetas.users(),
            config.users()
        ));
    }
    let alpha = config.alpha();
    let per_user = zetas
        .columns()
        .iter()
        .enumerate()
        .map(|(n, col)| individual_outages(n, col, alpha, coupling))
        .collect();
    Ok(CopBreakdown::from_parts(
        &config.event_probabilities(),
        per_user,
    ))
}

/// Whether event `n` admits any allocation without certain outage under a
/// per-block budget: `P >= ((rhat0 + 1)^n - 1) / alpha`.
pub fn event_feasible(n: usize, alpha: f64, power: f64, rhat0: f64) -> bool {
    if n == 0 {
        return true;
    }
    if !(alpha > 0.0) {
        return false;
    }
    let needed = (n as f64 * rhat0.ln_1p()).exp_m1() / alpha;
    power >= needed
}

/// Same test for a general coefficient vector: the below-threshold slots need
/// at least `sum_{k<n} c_k / alpha`.
pub(crate) fn event_feasible_with(n: usize, alpha: f64, power: f64, coeffs: &[f64]) -> bool {
    if n == 0 {
        return true;
    }
    if !(alpha > 0.0) {
        return false;
    }
    power >= coeffs[..n].iter().sum::<f64>() / alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn indiv_outage_examples() {
        let alpha = 0.8;
        assert_eq!(indiv_outage(0, 2, alpha, alpha).unwrap(), 1.0);
        assert!(indiv_outage(0, 2, 1e-12, alpha).unwrap() < 1e-11);
        assert_eq!(indiv_outage(2, 2, alpha * 0.9, alpha).unwrap(), 0.0);
        assert_eq!(indiv_outage(2, 2, alpha, alpha).unwrap(), 0.0);
        assert!(indiv_outage(0, 1, 0.0, alpha).is_err());
    }

    #[test]
    fn conditional_cop_examples() {
        assert_eq!(common_from_individual(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(common_from_individual(&[0.2, 1.0, 0.0]), 1.0);
        assert!((common_from_individual(&[0.5, 0.5]) - 0.75).abs() < 1e-15);
        // Slot 1 in the above group of event 0 sits exactly at alpha + ln2.
        let alpha = 0.4;
        let z = alpha + LN_2;
        assert!((conditional_cop(0, &[z, z], alpha).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn single_user_hand_value() {
        // K = 1, alpha = ln 2, zeta = 1/P, P = 10: only event 1 contributes.
        let cfg = SystemConfig::new(1, 1.0, 10.0, LN_2).unwrap();
        let z = ZetaMatrix::repeated(&[0.1]).unwrap();
        let b = cop(&cfg, &z).unwrap();
        let expected = 0.5 * (-(-0.1f64).exp_m1()) / 0.5;
        assert!((b.total - expected).abs() < 1e-15);
        assert!((b.total - 0.095_162_581_964_040_4).abs() < 1e-12);
        assert_eq!(b.per_event[0].conditional_cop, 0.0);
    }

    #[test]
    fn total_matches_stored_terms() {
        let cfg = SystemConfig::new(3, 1.0, 100.0, 0.5).unwrap();
        let z = ZetaMatrix::from_fn(3, |k, n| 0.05 + 0.1 * k as f64 + 0.07 * n as f64).unwrap();
        let b = cop(&cfg, &z).unwrap();
        let sum: f64 = b
            .per_event
            .iter()
            .map(|t| t.probability * t.conditional_cop)
            .sum();
        assert!((b.total - sum).abs() <= 1e-12);
        assert!(b.per_user.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn tiny_thresholds_give_tiny_cop() {
        let cfg = SystemConfig::new(3, 1.0, 100.0, 0.5).unwrap();
        let z = ZetaMatrix::from_fn(3, |_, _| 1e-13).unwrap();
        assert!(cop(&cfg, &z).unwrap().total < 1e-11);
    }

    #[test]
    fn running_max_absorbs_lower_thresholds() {
        let alpha = 0.3;
        let lowered = [0.2, 0.15, 0.9];
        let a = conditional_cop(1, &[0.2, 0.5, 0.9], alpha).unwrap();
        let b = conditional_cop(1, &[0.2, 0.4, 0.9], alpha).unwrap();
        assert!(b <= a);
        // Slot 1 at 0.15 < running max 0.2: lowering it further changes nothing.
        let c = conditional_cop(1, &lowered, alpha).unwrap();
        let d = conditional_cop(1, &[0.2, 0.01, 0.9], alpha).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn event_feasible_examples() {
        assert!(event_feasible(0, 0.0, 1e-9, 5.0));
        assert!(!event_feasible(2, 1.0, 2.0, 1.0));
        assert!(event_feasible(2, 1.0, 3.0, 1.0));
        assert!(!event_feasible(1, 0.0, 1e9, 1.0));
        assert!(event_feasible_with(2, 1.0, 3.0, &[1.0, 2.0, 4.0]));
        assert!(!event_feasible_with(2, 1.0, 2.9, &[1.0, 2.0, 4.0]));
    }
}

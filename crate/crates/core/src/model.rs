//! Domain types and the closed-form building blocks shared by every module.
//!
//! Indexing convention: ordering slots are zero-based in code. Slot `k`
//! (0-based) is the user with ordering index `k + 1`, so "slot `k` is in the
//! below-threshold group of event `n`" reads `k < n`.
//!
//! Channel power gains are unit-mean exponential variates; noise has unit
//! variance so the power budget doubles as the SNR.

use crate::error::{domain, Error, Result};

/// Largest user count accepted. Binomial coefficients and geometric power
/// coefficients are evaluated in floating point and stay exact well past this.
pub const MAX_USERS: usize = 64;

/// Converts an SNR in dB to the linear power budget (unit noise).
pub fn snr_db_to_linear(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

/// Per-user decoding threshold `2^r0 - 1`.
pub fn rate_threshold(rate: f64) -> f64 {
    (rate * std::f64::consts::LN_2).exp_m1()
}

/// System parameters: user count, target rate, power budget and feedback
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    users: usize,
    rate: f64,
    rhat0: f64,
    power: f64,
    alpha: f64,
}

impl SystemConfig {
    /// `alpha` may be `f64::INFINITY`, which models a system where every user
    /// always reports "0" (no usable feedback).
    pub fn new(users: usize, rate: f64, power: f64, alpha: f64) -> Result<Self> {
        if users == 0 || users > MAX_USERS {
            return domain(format!(
                "user count must be in 1..={MAX_USERS}, got {users}"
            ));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return domain(format!(
                "target rate must be positive and finite, got {rate}"
            ));
        }
        if !(power > 0.0 && power.is_finite()) {
            return domain(format!(
                "power budget must be positive and finite, got {power}"
            ));
        }
        if alpha.is_nan() || alpha < 0.0 {
            return domain(format!("feedback threshold must be >= 0, got {alpha}"));
        }
        Ok(Self {
            users,
            rate,
            rhat0: rate_threshold(rate),
            power,
            alpha,
        })
    }

    pub fn from_snr_db(users: usize, rate: f64, snr_db: f64, alpha: f64) -> Result<Self> {
        Self::new(users, rate, snr_db_to_linear(snr_db), alpha)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn rhat0(&self) -> f64 {
        self.rhat0
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.users, self.rate, self.power, alpha)
    }

    pub fn with_power(&self, power: f64) -> Result<Self> {
        Self::new(self.users, self.rate, power, self.alpha)
    }

    /// Sum-power coefficients `(rhat0 + 1)^k * rhat0` for slots `k = 0..K`.
    pub fn noma_coefficients(&self) -> Vec<f64> {
        noma_coefficients(self.users, self.rhat0)
    }

    /// Event probabilities `P_n(alpha)` for `n = 0..=K`.
    pub fn event_probabilities(&self) -> Vec<f64> {
        (0..=self.users)
            .map(|n| event_probability_unchecked(self.alpha, self.users, n))
            .collect()
    }
}

pub fn noma_coefficients(users: usize, rhat0: f64) -> Vec<f64> {
    let growth = 1.0 + rhat0;
    let mut out = Vec::with_capacity(users);
    let mut c = rhat0;
    for _ in 0..users {
        out.push(c);
        c *= growth;
    }
    out
}

/// Number of users reporting "0" in a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeedbackEvent(usize);

impl FeedbackEvent {
    pub fn new(n: usize, users: usize) -> Result<Self> {
        if n > users {
            return domain(format!("event index {n} exceeds user count {users}"));
        }
        Ok(Self(n))
    }

    pub fn below(&self) -> usize {
        self.0
    }
}

/// Decoding thresholds `zeta[k][n]`, stored column-wise: one column of `K`
/// entries for each event `n = 0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaMatrix {
    users: usize,
    columns: Vec<Vec<f64>>,
}

impl ZetaMatrix {
    pub fn new(columns: Vec<Vec<f64>>) -> Result<Self> {
        let users = columns.len().saturating_sub(1);
        if users == 0 {
            return domain("zeta matrix needs K + 1 >= 2 columns");
        }
        for (n, col) in columns.iter().enumerate() {
            if col.len() != users {
                return domain(format!(
                    "zeta column {n} has {} entries, expected {users}",
                    col.len()
                ));
            }
            if let Some(k) = col.iter().position(|z| !(*z > 0.0 && z.is_finite())) {
                return domain(format!(
                    "zeta[{k}][{n}] = {} is not a positive finite threshold",
                    col[k]
                ));
            }
        }
        Ok(Self { users, columns })
    }

    pub fn from_fn(users: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let columns = (0..=users)
            .map(|n| (0..users).map(|k| f(k, n)).collect())
            .collect();
        Self::new(columns)
    }

    /// The same column for every event.
    pub fn repeated(column: &[f64]) -> Result<Self> {
        Self::new(vec![column.to_vec(); column.len() + 1])
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn get(&self, slot: usize, event: usize) -> f64 {
        self.columns[event][slot]
    }

    pub fn column(&self, event: usize) -> &[f64] {
        &self.columns[event]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// `true` if every column is nondecreasing within `tol` (absolute).
    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        self.columns
            .iter()
            .all(|c| c.windows(2).all(|w| w[1] >= w[0] - tol))
    }

    /// Expected sum power `sum_n weights[n] * sum_k c_k / zeta[k][n]`.
    pub fn weighted_sum_power(&self, coeffs: &[f64], weights: &[f64]) -> f64 {
        self.columns
            .iter()
            .zip(weights)
            .map(|(col, w)| w * weighted_inverse_sum(col, coeffs))
            .sum()
    }
}

/// Transmit powers `power[k][n]`, column-wise like [`ZetaMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerMatrix {
    columns: Vec<Vec<f64>>,
}

impl PowerMatrix {
    /// Validates nonnegativity and the NOMA ordering constraint
    /// `P_k >= rhat0 * sum_{m>k} P_m` on every column.
    pub fn new(columns: Vec<Vec<f64>>, rhat0: f64) -> Result<Self> {
        for col in &columns {
            if let Some(k) = col.iter().position(|p| !(*p >= 0.0 && p.is_finite())) {
                return domain(format!("power entry {k} is {}", col[k]));
            }
            let mut tail = 0.0;
            for k in (0..col.len()).rev() {
                let denom = col[k] - rhat0 * tail;
                // Relative slack for round-off in the ordering check.
                if denom < -1e-12 * col[k].max(rhat0 * tail) {
                    return Err(Error::ConstraintViolation {
                        slot: k,
                        denominator: denom,
                    });
                }
                tail += col[k];
            }
        }
        Ok(Self { columns })
    }

    pub fn from_zetas(zetas: &ZetaMatrix, rhat0: f64) -> Result<Self> {
        let columns = zetas
            .columns()
            .iter()
            .map(|c| power_from_zeta(c, rhat0))
            .collect::<Result<Vec<_>>>()?;
        Self::new(columns, rhat0)
    }

    pub fn column(&self, event: usize) -> &[f64] {
        &self.columns[event]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn to_zetas(&self, rhat0: f64) -> Result<ZetaMatrix> {
        let columns = self
            .columns
            .iter()
            .map(|c| zeta_from_power(c, rhat0))
            .collect::<Result<Vec<_>>>()?;
        ZetaMatrix::new(columns)
    }
}

/// Binomial coefficient by multiplicative recurrence.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// `P(N = n) = C(K, n) (1 - e^-alpha)^n e^{-alpha (K - n)}`.
pub fn event_probability(alpha: f64, users: usize, n: usize) -> Result<f64> {
    if alpha.is_nan() || alpha < 0.0 {
        return domain(format!("alpha must be >= 0, got {alpha}"));
    }
    if n > users {
        return domain(format!("event index {n} exceeds user count {users}"));
    }
    Ok(event_probability_unchecked(alpha, users, n))
}

pub(crate) fn event_probability_unchecked(alpha: f64, users: usize, n: usize) -> f64 {
    let below = -(-alpha).exp_m1();
    let above = (-alpha).exp();
    let p = binomial(users, n) * below.powi(n as i32) * above.powi((users - n) as i32);
    p.clamp(0.0, 1.0)
}

/// Conditional CDF `P(|h_{pi_k}|^2 < x | N = n)` for slot `k` (0-based).
///
/// Slots `k < n` hold below-threshold users (truncated exponential); the
/// remaining slots hold above-threshold users (shifted exponential).
pub fn conditional_cdf(x: f64, slot: usize, n: usize, alpha: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return domain(format!("gain must be >= 0, got {x}"));
    }
    if alpha.is_nan() || alpha < 0.0 {
        return domain(format!("alpha must be >= 0, got {alpha}"));
    }
    if slot < n {
        Ok(truncated_cdf(x, alpha))
    } else {
        Ok(shifted_cdf(x, alpha))
    }
}

/// Same as [`conditional_cdf`] but also checks the slot against `K`, so that
/// the undefined branches (below group of event 0, above group of event K)
/// are reported.
pub fn conditional_cdf_checked(
    x: f64,
    slot: usize,
    n: usize,
    users: usize,
    alpha: f64,
) -> Result<f64> {
    if slot >= users || n > users {
        return domain(format!(
            "slot {slot} / event {n} out of range for K = {users}"
        ));
    }
    conditional_cdf(x, slot, n, alpha)
}

/// `min{(1 - e^-x) / (1 - e^-alpha), 1}`.
pub(crate) fn truncated_cdf(x: f64, alpha: f64) -> f64 {
    if x >= alpha {
        return 1.0;
    }
    // x < alpha implies alpha > 0.
    ((-x).exp_m1() / (-alpha).exp_m1()).min(1.0)
}

/// `[1 - e^{-(x - alpha)}]^+`.
pub(crate) fn shifted_cdf(x: f64, alpha: f64) -> f64 {
    if x <= alpha {
        0.0
    } else {
        -(alpha - x).exp_m1()
    }
}

/// Prefix maxima: element `k` is `max(values[0..=k])`.
pub fn running_max(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return domain("running_max of an empty sequence");
    }
    let mut acc = f64::NEG_INFINITY;
    Ok(values
        .iter()
        .map(|v| {
            acc = acc.max(*v);
            acc
        })
        .collect())
}

/// `zeta_k = rhat0 / (P_k - rhat0 * sum_{m>k} P_m)` for one event's powers.
pub fn zeta_from_power(powers: &[f64], rhat0: f64) -> Result<Vec<f64>> {
    if powers.is_empty() {
        return domain("empty power column");
    }
    let mut out = vec![0.0; powers.len()];
    let mut tail = 0.0;
    for k in (0..powers.len()).rev() {
        let denom = powers[k] - rhat0 * tail;
        if !(denom > 0.0) {
            return Err(Error::ConstraintViolation {
                slot: k,
                denominator: denom,
            });
        }
        out[k] = rhat0 / denom;
        tail += powers[k];
    }
    Ok(out)
}

/// Inverse of [`zeta_from_power`]:
/// `P_k = rhat0/zeta_k + rhat0 * sum_{m>k} (rhat0+1)^{m-k-1} rhat0/zeta_m`.
pub fn power_from_zeta(zetas: &[f64], rhat0: f64) -> Result<Vec<f64>> {
    check_zetas(zetas)?;
    let growth = 1.0 + rhat0;
    let k_len = zetas.len();
    let mut out = Vec::with_capacity(k_len);
    for k in 0..k_len {
        let mut tail = 0.0;
        let mut factor = 1.0;
        for z in &zetas[k + 1..] {
            tail += factor * rhat0 / z;
            factor *= growth;
        }
        out.push(rhat0 / zetas[k] + rhat0 * tail);
    }
    Ok(out)
}

/// Event sum power `sum_k (rhat0+1)^k rhat0 / zeta_k` (slots 0-based).
pub fn sum_power_from_zeta(zetas: &[f64], rhat0: f64) -> Result<f64> {
    check_zetas(zetas)?;
    Ok(weighted_inverse_sum(
        zetas,
        &noma_coefficients(zetas.len(), rhat0),
    ))
}

pub(crate) fn weighted_inverse_sum(zetas: &[f64], coeffs: &[f64]) -> f64 {
    zetas.iter().zip(coeffs).map(|(z, c)| c / z).sum()
}

fn check_zetas(zetas: &[f64]) -> Result<()> {
    if zetas.is_empty() {
        return domain("empty zeta column");
    }
    if let Some(k) = zetas.iter().position(|z| !(*z > 0.0)) {
        return domain(format!("zeta[{k}] = {} must be positive", zetas[k]));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn event_probability_examples() {
        assert!(close(
            event_probability(LN_2, 3, 1).unwrap(),
            3.0 / 8.0,
            1e-15
        ));
        assert_eq!(event_probability(0.0, 4, 0).unwrap(), 1.0);
        assert_eq!(event_probability(0.0, 4, 2).unwrap(), 0.0);
        assert!(event_probability(1.0, 3, 4).is_err());
        assert!(event_probability(-1.0, 3, 1).is_err());
    }

    #[test]
    fn event_probability_infinite_alpha_puts_all_mass_on_k() {
        for n in 0..3 {
            assert_eq!(event_probability(f64::INFINITY, 3, n).unwrap(), 0.0);
        }
        assert_eq!(event_probability(f64::INFINITY, 3, 3).unwrap(), 1.0);
    }

    #[test]
    fn event_probability_normalizes() {
        for users in 1..=12 {
            for &alpha in &[0.0, 1e-9, 1e-3, 0.3, LN_2, 2.0, 15.0] {
                let total: f64 = (0..=users)
                    .map(|n| event_probability(alpha, users, n).unwrap())
                    .sum();
                assert!(
                    (total - 1.0).abs() < 1e-12,
                    "K={users} alpha={alpha}: {total}"
                );
            }
        }
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(12, 6), 924.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert!((binomial(64, 32) / 1_832_624_140_942_590_534.0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn conditional_cdf_examples() {
        let alpha = 0.7;
        assert_eq!(conditional_cdf(alpha, 0, 2, alpha).unwrap(), 1.0);
        assert_eq!(conditional_cdf(alpha, 2, 2, alpha).unwrap(), 0.0);
        assert!(close(
            conditional_cdf(alpha + LN_2, 2, 1, alpha).unwrap(),
            0.5,
            1e-15
        ));
        assert!(conditional_cdf(-1.0, 0, 1, alpha).is_err());
        // Below group of event 0 and above group of event K are undefined.
        assert!(conditional_cdf_checked(0.1, 0, 3, 2, alpha).is_err());
        assert!(conditional_cdf_checked(0.1, 2, 1, 2, alpha).is_err());
    }

    #[test]
    fn truncated_cdf_small_arguments_are_accurate() {
        // (1 - e^-x)/(1 - e^-a) ~ x/a for tiny x, a.
        let v = truncated_cdf(1e-12, 2e-10);
        assert!(close(v, 1e-12 / 2e-10, 1e-8));
    }

    #[test]
    fn running_max_examples() {
        assert_eq!(running_max(&[3.0, 1.0, 2.0]).unwrap(), vec![3.0, 3.0, 3.0]);
        assert_eq!(running_max(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(running_max(&[4.5]).unwrap(), vec![4.5]);
        assert!(running_max(&[]).is_err());
    }

    #[test]
    fn transform_examples() {
        assert_eq!(zeta_from_power(&[2.0, 1.0], 1.0).unwrap(), vec![1.0, 1.0]);
        assert_eq!(zeta_from_power(&[5.0], 3.0).unwrap(), vec![0.6]);
        assert_eq!(
            zeta_from_power(&[1.0, 1.0], 1.0),
            Err(Error::ConstraintViolation {
                slot: 0,
                denominator: 0.0
            })
        );
        assert_eq!(power_from_zeta(&[1.0, 1.0], 1.0).unwrap(), vec![2.0, 1.0]);
        assert_eq!(power_from_zeta(&[0.5], 3.0).unwrap(), vec![6.0]);
        assert!(power_from_zeta(&[1.0, 0.0], 1.0).is_err());
        assert_eq!(sum_power_from_zeta(&[1.0, 1.0], 1.0).unwrap(), 3.0);
        let c = 0.37;
        assert!(close(
            sum_power_from_zeta(&[c, c, c], 1.0).unwrap(),
            7.0 / c,
            1e-14
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::new(0, 1.0, 10.0, 0.5).is_err());
        assert!(SystemConfig::new(3, 0.0, 10.0, 0.5).is_err());
        assert!(SystemConfig::new(3, 1.0, -1.0, 0.5).is_err());
        assert!(SystemConfig::new(3, 1.0, 10.0, -0.5).is_err());
        let cfg = SystemConfig::new(3, 1.0, 10.0, f64::INFINITY).unwrap();
        assert_eq!(cfg.rhat0(), 1.0);
        let cfg = SystemConfig::from_snr_db(2, 1.3, 20.0, 0.5).unwrap();
        assert!(close(cfg.power(), 100.0, 1e-14));
        assert!(close(cfg.rhat0(), 2f64.powf(1.3) - 1.0, 1e-14));
    }

    #[test]
    fn zeta_matrix_rejects_bad_shapes() {
        assert!(ZetaMatrix::new(vec![vec![1.0]]).is_err());
        assert!(ZetaMatrix::new(vec![vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(ZetaMatrix::new(vec![vec![1.0], vec![0.0]]).is_err());
        let z = ZetaMatrix::repeated(&[0.1, 0.2]).unwrap();
        assert_eq!(z.users(), 2);
        assert_eq!(z.get(1, 2), 0.2);
    }

    #[test]
    fn power_matrix_checks_ordering() {
        assert!(PowerMatrix::new(vec![vec![2.0, 1.0]], 1.0).is_ok());
        assert!(matches!(
            PowerMatrix::new(vec![vec![1.0, 2.0]], 1.0),
            Err(Error::ConstraintViolation { slot: 0, .. })
        ));
    }
}

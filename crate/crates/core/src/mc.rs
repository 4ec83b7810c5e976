//! Seeded Monte Carlo simulation of fading, one-bit feedback, random ordering
//! within the feedback groups, and SIC decoding.
//!
//! Trial `t` draws from ChaCha8 stream `t` under a key derived from the seed,
//! so every trial is a pure function of `(seed, t)`. Trials are processed in
//! fixed-size chunks and the integer counts are summed, which makes reports
//! independent of the number of worker threads.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::model::{self, SystemConfig, ZetaMatrix};

const CHUNK: u64 = 4096;

/// Channel access used when deciding outage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    /// Superposition coding with SIC at every receiver.
    Noma,
    /// One slot of length `1/K` per user; thresholds are per-slot TDMA thresholds.
    Tdma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub trials: u64,
    pub cop_estimate: f64,
    pub std_err: f64,
    /// `event_counts[n]`: trials in which exactly `n` users fed back "below".
    pub event_counts: Vec<u64>,
    pub seed: u64,
    /// Trials where the explicit rate test disagreed with the threshold test.
    pub decision_mismatches: u64,
}

impl SimReport {
    fn from_counts(counts: Counts, trials: u64, seed: u64) -> Self {
        let p = counts.outages as f64 / trials as f64;
        Self {
            trials,
            cop_estimate: p,
            std_err: (p * (1.0 - p) / trials as f64).sqrt(),
            event_counts: counts.events,
            seed,
            decision_mismatches: counts.mismatches,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub gains: Vec<f64>,
    pub event_n: usize,
    /// `permutation[slot]` is the index of the user decoded in that slot.
    pub permutation: Vec<usize>,
    /// Outage flag per slot.
    pub outage: Vec<bool>,
    pub common_outage: bool,
}

/// Outage decision for one ordered block.
#[derive(Debug, Clone, PartialEq)]
pub struct SicDecision {
    pub outage: Vec<bool>,
    pub common: bool,
    /// Whether the explicit SINR test agreed with `gain < running max of zeta`.
    pub agrees: bool,
}

/// `users` independent unit-mean exponential channel power gains.
pub fn draw_channels<R: Rng + ?Sized>(users: usize, rng: &mut R) -> Vec<f64> {
    (0..users).map(|_| rng.sample(Exp1)).collect()
}

/// One-bit feedback and ordering: users below `alpha` take the first `n`
/// slots in uniformly random order, the rest follow in uniformly random order.
pub fn feedback_and_order<R: Rng + ?Sized>(
    gains: &[f64],
    alpha: f64,
    rng: &mut R,
) -> (usize, Vec<usize>) {
    let (mut below, mut above): (Vec<usize>, Vec<usize>) =
        (0..gains.len()).partition(|&i| gains[i] < alpha);
    below.shuffle(rng);
    above.shuffle(rng);
    let n = below.len();
    below.extend(above);
    (n, below)
}

/// Per-column data reused across trials.
#[derive(Debug, Clone)]
struct Column {
    hat: Vec<f64>,
    powers: Vec<f64>,
    /// `tail[l] = sum_{m > l} powers[m]`.
    tail: Vec<f64>,
}

impl Column {
    fn new(zetas: &[f64], rhat0: f64) -> Result<Self> {
        let powers = model::power_from_zeta(zetas, rhat0)?;
        let mut tail = vec![0.0; powers.len()];
        for l in (0..powers.len().saturating_sub(1)).rev() {
            tail[l] = tail[l + 1] + powers[l + 1];
        }
        Ok(Self {
            hat: model::running_max(zetas)?,
            powers,
            tail,
        })
    }
}

/// SIC outage of ordered gains under one threshold column. Slot `k` fails if
/// any message `l <= k` arrives with SINR below `rhat0`.
pub fn sic_outage(ordered_gains: &[f64], zetas: &[f64], rhat0: f64) -> Result<SicDecision> {
    if ordered_gains.len() != zetas.len() {
        return domain("gain and threshold vectors differ in length");
    }
    let col = Column::new(zetas, rhat0)?;
    Ok(sic_decide(ordered_gains, &col, rhat0))
}

fn sic_decide(gains: &[f64], col: &Column, rhat0: f64) -> SicDecision {
    let mut outage = Vec::with_capacity(gains.len());
    let mut agrees = true;
    for (k, &g) in gains.iter().enumerate() {
        let explicit = (0..=k).any(|l| col.powers[l] * g / (g * col.tail[l] + 1.0) < rhat0);
        agrees &= explicit == (g < col.hat[k]);
        outage.push(explicit);
    }
    let common = outage.iter().any(|o| *o);
    SicDecision {
        outage,
        common,
        agrees,
    }
}

/// TDMA: slot `k` fails if `(1/K) log2(1 + P_k g) < r0` with `P_k = u / zeta_k`.
fn tdma_decide(gains: &[f64], zetas: &[f64], rate: f64) -> SicDecision {
    let users = gains.len() as f64;
    let u = (users * rate * std::f64::consts::LN_2).exp_m1();
    let mut agrees = true;
    let outage: Vec<bool> = gains
        .iter()
        .zip(zetas)
        .map(|(g, z)| {
            let explicit = (u / z * g).ln_1p() / std::f64::consts::LN_2 / users < rate;
            agrees &= explicit == (*g < *z);
            explicit
        })
        .collect();
    SicDecision {
        common: outage.iter().any(|o| *o),
        outage,
        agrees,
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Counts {
    outages: u64,
    events: Vec<u64>,
    mismatches: u64,
}

impl Counts {
    fn zero(users: usize) -> Self {
        Self {
            outages: 0,
            events: vec![0; users + 1],
            mismatches: 0,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.outages += other.outages;
        self.mismatches += other.mismatches;
        for (a, b) in self.events.iter_mut().zip(other.events) {
            *a += b;
        }
        self
    }
}

/// Seeded, parallel Monte Carlo runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Simulator {
    pub trials: u64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Simulator {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            workers: None,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    fn key(&self) -> [u8; 32] {
        ChaCha8Rng::seed_from_u64(self.seed).get_seed()
    }

    fn trial_rng(key: [u8; 32], t: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(t);
        rng
    }

    fn run<F>(&self, users: usize, trial: F) -> Result<SimReport>
    where
        F: Fn(&mut ChaCha8Rng, &mut Counts) + Sync,
    {
        if self.trials == 0 {
            return domain("trials must be at least 1");
        }
        let key = self.key();
        let chunks = self.trials.div_ceil(CHUNK);
        let total = self.trials;
        let work = || {
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut counts = Counts::zero(users);
                    for t in c * CHUNK..((c + 1) * CHUNK).min(total) {
                        trial(&mut Self::trial_rng(key, t), &mut counts);
                    }
                    counts
                })
                .reduce(|| Counts::zero(users), Counts::merge)
        };
        let counts = match self.workers {
            Some(w) => rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| crate::Error::Domain(format!("thread pool: {e}")))?
                .install(work),
            None => work(),
        };
        Ok(SimReport::from_counts(counts, self.trials, self.seed))
    }

    /// Empirical COP of `zetas` under `access`.
    pub fn estimate(
        &self,
        config: &SystemConfig,
        zetas: &ZetaMatrix,
        access: Access,
    ) -> Result<SimReport> {
        let users = config.users();
        if zetas.users() != users {
            return domain("zeta matrix and config disagree on the user count");
        }
        let columns = zetas
            .columns()
            .iter()
            .map(|c| Column::new(c, config.rhat0()))
            .collect::<Result<Vec<_>>>();
        // TDMA thresholds need not satisfy the NOMA power ordering.
        let columns = match access {
            Access::Noma => Some(columns?),
            Access::Tdma => None,
        };
        let (alpha, rhat0, rate) = (config.alpha(), config.rhat0(), config.rate());
        self.run(users, |rng, counts| {
            let gains = draw_channels(users, rng);
            let (n, perm) = feedback_and_order(&gains, alpha, rng);
            let ordered: Vec<f64> = perm.iter().map(|&i| gains[i]).collect();
            let d = match &columns {
                Some(cols) => sic_decide(&ordered, &cols[n], rhat0),
                None => tdma_decide(&ordered, zetas.column(n), rate),
            };
            counts.events[n] += 1;
            counts.outages += d.common as u64;
            counts.mismatches += (!d.agrees) as u64;
        })
    }

    /// Outage with perfect CSI at the transmitter: the minimal powers that
    /// serve every user exceed the budget.
    pub fn estimate_perfect_csi(&self, config: &SystemConfig) -> Result<SimReport> {
        let users = config.users();
        let (alpha, rhat0, power) = (config.alpha(), config.rhat0(), config.power());
        self.run(users, |rng, counts| {
            let gains = draw_channels(users, rng);
            let n = gains.iter().filter(|g| **g < alpha).count();
            counts.events[n] += 1;
            counts.outages += (perfect_csi_power(&gains, rhat0) > power) as u64;
        })
    }

    /// A full record of trial `t`, for inspection and tests.
    pub fn trace(&self, config: &SystemConfig, zetas: &ZetaMatrix, t: u64) -> Result<TrialOutcome> {
        let mut rng = Self::trial_rng(self.key(), t);
        let gains = draw_channels(config.users(), &mut rng);
        let (event_n, permutation) = feedback_and_order(&gains, config.alpha(), &mut rng);
        let ordered: Vec<f64> = permutation.iter().map(|&i| gains[i]).collect();
        let d = sic_outage(&ordered, zetas.column(event_n), config.rhat0())?;
        Ok(TrialOutcome {
            gains,
            event_n,
            permutation,
            outage: d.outage,
            common_outage: d.common,
        })
    }
}

/// Minimal total power serving every user at rate `rhat0` when the
/// transmitter knows all gains: sort ascending and allocate from the
/// strongest user down, `P_k = rhat0 (sum_{m>k} P_m + 1/g_k)`.
pub fn perfect_csi_power(gains: &[f64], rhat0: f64) -> f64 {
    let mut sorted = gains.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for g in sorted.iter().rev() {
        total += rhat0 * (total + 1.0 / g);
    }
    total
}

/// Convenience wrapper: [`Simulator::estimate`] with NOMA decoding.
pub fn estimate_cop(
    config: &SystemConfig,
    zetas: &ZetaMatrix,
    trials: u64,
    seed: u64,
) -> Result<SimReport> {
    Simulator::new(trials, seed).estimate(config, zetas, Access::Noma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;
    use crate::baselines;

    #[test]
    fn exponential_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = draw_channels(1_000_000, &mut rng);
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        let below =
            g.iter().filter(|x| **x < std::f64::consts::LN_2).count() as f64 / g.len() as f64;
        assert!((mean - 1.0).abs() < 0.004);
        assert!((below - 0.5).abs() < 0.002);
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(draw_channels(16, &mut a), draw_channels(16, &mut b));
    }

    #[test]
    fn ordering_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            feedback_and_order(&[0.1, 5.0], 1.0, &mut rng),
            (1, vec![0, 1])
        );
        assert_eq!(
            feedback_and_order(&[5.0, 0.1], 1.0, &mut rng),
            (1, vec![1, 0])
        );
        assert_eq!(feedback_and_order(&[0.0, 0.3, 2.0], 0.0, &mut rng).0, 0);
    }

    #[test]
    fn within_group_order_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = std::collections::HashMap::new();
        let trials = 100_000;
        for _ in 0..trials {
            let (n, p) = feedback_and_order(&[0.1, 0.2, 0.3, 4.0], 1.0, &mut rng);
            assert_eq!(n, 3);
            assert_eq!(p[3], 3);
            *counts.entry(p[..3].to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        for c in counts.values() {
            assert!((*c as f64 / trials as f64 - 1.0 / 6.0).abs() < 0.01);
        }
    }

    #[test]
    fn sic_examples() {
        let d = sic_outage(&[2.0, 3.0], &[1.0, 2.0], 1.0).unwrap();
        assert!(!d.common && d.agrees);
        let d = sic_outage(&[0.25], &[0.5], 1.0).unwrap();
        assert!(d.common && d.outage[0]);
        // Slot 1 fails on slot 0's message: its gain is below zeta_0.
        let d = sic_outage(&[2.0, 1.5], &[1.8, 0.5], 1.0).unwrap();
        assert_eq!(d.outage, vec![false, true]);
        assert!(d.agrees);
    }

    #[test]
    fn explicit_and_threshold_tests_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let zetas = [0.05, 0.2, 0.2, 0.9];
        let col = Column::new(&zetas, 1.0).unwrap();
        for _ in 0..1_000_000 {
            let g = draw_channels(4, &mut rng);
            assert!(sic_decide(&g, &col, 1.0).agrees, "{g:?}");
        }
    }

    #[test]
    fn matches_analytic_and_event_law() {
        let c = SystemConfig::from_snr_db(3, 1.0, 15.0, 0.5).unwrap();
        let z = baselines::fixed_noma_short(&c).unwrap();
        let r = estimate_cop(&c, &z, 200_000, 42).unwrap();
        let exact = analytic::cop(&c, &z).unwrap().total;
        assert!(
            (r.cop_estimate - exact).abs() <= 4.0 * r.std_err,
            "{r:?} vs {exact}"
        );
        assert_eq!(r.decision_mismatches, 0);
        assert_eq!(r.event_counts.iter().sum::<u64>(), r.trials);
        for (n, count) in r.event_counts.iter().enumerate() {
            let p = model::event_probability(0.5, 3, n).unwrap();
            let sd = (p * (1.0 - p) / r.trials as f64).sqrt();
            assert!((*count as f64 / r.trials as f64 - p).abs() <= 4.0 * sd);
        }
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let c = SystemConfig::from_snr_db(3, 1.0, 10.0, 0.5).unwrap();
        let z = baselines::fixed_noma_short(&c).unwrap();
        let sim = Simulator::new(30_000, 77);
        let a = sim.with_workers(1).estimate(&c, &z, Access::Noma).unwrap();
        let b = sim.with_workers(4).estimate(&c, &z, Access::Noma).unwrap();
        let d = sim.estimate(&c, &z, Access::Noma).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, d);
    }

    #[test]
    fn tiny_thresholds_never_fail() {
        let c = SystemConfig::new(2, 1.0, 1e12, 0.5).unwrap();
        let z = ZetaMatrix::from_fn(2, |_, _| 1e-12).unwrap();
        assert_eq!(estimate_cop(&c, &z, 10_000, 1).unwrap().cop_estimate, 0.0);
    }

    #[test]
    fn infinite_alpha_puts_everything_in_last_event() {
        let c = SystemConfig::new(3, 1.0, 100.0, f64::INFINITY).unwrap();
        let z = baselines::fixed_noma_short(&c).unwrap();
        let r = estimate_cop(&c, &z, 10_000, 2).unwrap();
        assert_eq!(r.event_counts[3], 10_000);
        let c2 = c.with_alpha(1e9).unwrap();
        assert_eq!(
            estimate_cop(&c2, &z, 10_000, 2).unwrap().cop_estimate,
            r.cop_estimate
        );
    }

    #[test]
    fn trace_is_consistent() {
        let c = SystemConfig::from_snr_db(3, 1.0, 5.0, 0.7).unwrap();
        let z = baselines::fixed_noma_short(&c).unwrap();
        let sim = Simulator::new(1, 8);
        for t in 0..200 {
            let o = sim.trace(&c, &z, t).unwrap();
            let mut sorted = o.permutation.clone();
            sorted.sort();
            assert_eq!(sorted, vec![0, 1, 2]);
            for (slot, &u) in o.permutation.iter().enumerate() {
                assert_eq!(slot < o.event_n, o.gains[u] < 0.7);
            }
            assert_eq!(o.common_outage, o.outage.iter().any(|x| *x));
        }
    }

    #[test]
    fn perfect_csi_examples() {
        assert!((perfect_csi_power(&[1.0, 1.0], 1.0) - 3.0).abs() < 1e-15);
        assert_eq!(
            perfect_csi_power(&[0.3, 2.0, 0.9], 1.5),
            perfect_csi_power(&[2.0, 0.9, 0.3], 1.5)
        );
        let c = SystemConfig::new(1, 1.0, 10.0, 0.5).unwrap();
        let r = Simulator::new(200_000, 4).estimate_perfect_csi(&c).unwrap();
        let exact = -(-0.1f64).exp_m1();
        assert!((r.cop_estimate - exact).abs() <= 4.0 * r.std_err);
    }
}

//! Long-term (average) power budget: high-SNR surrogate, closed-form
//! allocation for a given pinned band, and the iterative band search.
//!
//! For each event `n` the optimal column has three pieces: a geometric
//! progression `sqrt(omega c_k (1 - e^{-alpha}))` for the below-threshold
//! slots, `i_n` slots pinned at exactly `alpha`, and `sqrt(omega c_k)` for the
//! rest. The band lengths `i_n` are found by [`algorithm_i`].

use crate::analytic::{self, CopBreakdown, Coupling};
use crate::error::{domain, Error, Result};
use crate::model::{self, SystemConfig, ZetaMatrix};
use crate::search::{self, GridOptions};

#[derive(Debug, Clone)]
pub struct LongTermSolution {
    pub alpha: f64,
    /// `i_seq[n]`: number of slots pinned at `alpha` in event `n`.
    pub i_seq: Vec<usize>,
    pub omega: f64,
    /// `lambdas[n][j]`: multiplier of slot `n + j` (0-based) in the pinned band.
    pub lambdas: Vec<Vec<f64>>,
    pub zetas: ZetaMatrix,
    /// Exact COP of `zetas` (not the surrogate).
    pub cop: CopBreakdown,
    /// Value of the high-SNR surrogate objective at `zetas`.
    pub surrogate: f64,
    pub iterations: usize,
    /// `omega` after each iteration.
    pub omega_history: Vec<f64>,
}

/// Coefficients, event weights and threshold of one surrogate problem.
pub(crate) struct LongProblem {
    pub coeffs: Vec<f64>,
    pub probs: Vec<f64>,
    pub alpha: f64,
    pub power: f64,
}

impl LongProblem {
    pub(crate) fn new(config: &SystemConfig, coeffs: Vec<f64>) -> Result<Self> {
        let alpha = config.alpha();
        if !(alpha > 0.0 && alpha.is_finite()) {
            return domain(format!(
                "long-term solver needs 0 < alpha < inf, got {alpha}"
            ));
        }
        Ok(Self {
            coeffs,
            probs: config.event_probabilities(),
            alpha,
            power: config.power(),
        })
    }

    fn users(&self) -> usize {
        self.coeffs.len()
    }

    fn below_scale(&self) -> f64 {
        -(-self.alpha).exp_m1()
    }

    fn a(&self, n: usize, i_n: usize) -> f64 {
        let scale = self.below_scale();
        let below: f64 = self.coeffs[..n].iter().map(|c| (c / scale).sqrt()).sum();
        let above: f64 = self.coeffs[n + i_n..].iter().map(|c| c.sqrt()).sum();
        below + above
    }

    fn b(&self, n: usize, i_n: usize) -> f64 {
        self.coeffs[n..n + i_n].iter().sum::<f64>() / self.alpha
    }

    fn check_seq(&self, i_seq: &[usize]) -> Result<()> {
        let users = self.users();
        if i_seq.len() != users + 1 {
            return domain(format!(
                "need {} band lengths, got {}",
                users + 1,
                i_seq.len()
            ));
        }
        if let Some(n) = (0..=users).find(|&n| i_seq[n] > users - n) {
            return domain(format!("i_{n} = {} exceeds {}", i_seq[n], users - n));
        }
        Ok(())
    }

    pub(crate) fn omega(&self, i_seq: &[usize]) -> Result<f64> {
        self.check_seq(i_seq)?;
        let num: f64 = (0..=self.users())
            .map(|n| self.probs[n] * self.a(n, i_seq[n]))
            .sum();
        let pinned: f64 = (0..=self.users())
            .map(|n| self.probs[n] * self.b(n, i_seq[n]))
            .sum();
        let den = self.power - pinned;
        if !(den > 0.0) {
            return Err(Error::BudgetExhausted {
                alpha: self.alpha,
                pinned,
                budget: self.power,
            });
        }
        if !(num > 0.0) {
            return domain("every slot is pinned: multiplier is zero");
        }
        let root = num / den;
        Ok(root * root)
    }

    pub(crate) fn zetas(&self, i_seq: &[usize], omega: f64) -> Result<ZetaMatrix> {
        self.check_seq(i_seq)?;
        let scale = self.below_scale();
        ZetaMatrix::from_fn(self.users(), |k, n| {
            let c = self.coeffs[k];
            if k < n {
                (omega * c * scale).sqrt()
            } else if k < n + i_seq[n] {
                self.alpha
            } else {
                (omega * c).sqrt()
            }
        })
    }

    pub(crate) fn lambdas(&self, i_seq: &[usize], omega: f64) -> Result<Vec<Vec<f64>>> {
        self.check_seq(i_seq)?;
        let a2 = self.alpha * self.alpha;
        Ok((0..=self.users())
            .map(|n| {
                self.coeffs[n..n + i_seq[n]]
                    .iter()
                    .map(|c| self.probs[n] * (1.0 - omega * c / a2))
                    .collect()
            })
            .collect())
    }

    pub(crate) fn surrogate(&self, zetas: &ZetaMatrix) -> f64 {
        let scale = self.below_scale();
        zetas
            .columns()
            .iter()
            .enumerate()
            .map(|(n, col)| {
                let below: f64 = col[..n].iter().sum::<f64>() / scale;
                let above: f64 = col[n..].iter().map(|z| z - self.alpha).sum();
                self.probs[n] * (below + above)
            })
            .sum()
    }

    /// Band search. Returns `(i_seq, omega, omega_history)`.
    pub(crate) fn search_band(&self) -> Result<(Vec<usize>, f64, Vec<f64>)> {
        let users = self.users();
        let mut i_seq = vec![0usize; users + 1];
        let mut history = Vec::new();
        loop {
            let omega = self.omega(&i_seq)?;
            history.push(omega);
            // Above the band the thresholds are sqrt(omega c_k) whatever n is.
            let unpinned = |k: usize| (omega * self.coeffs[k]).sqrt();
            let mut changed = false;
            for n in 0..=users {
                let next = n + i_seq[n];
                if next < users && unpinned(next) <= self.alpha {
                    let mut i = i_seq[n] + 1;
                    while n + i < users && unpinned(n + i) <= self.alpha {
                        i += 1;
                    }
                    i_seq[n] = i;
                    changed = true;
                }
            }
            if !changed {
                return Ok((i_seq, omega, history));
            }
            if history.len() > users + 1 {
                return Err(Error::NonConvergence {
                    event: 0,
                    iterations: history.len(),
                    best: i_seq.iter().map(|i| *i as f64).collect(),
                });
            }
        }
    }

    pub(crate) fn solve(
        &self,
        config: &SystemConfig,
        coupling: Coupling,
    ) -> Result<LongTermSolution> {
        let (i_seq, omega, omega_history) = self.search_band()?;
        let zetas = self.zetas(&i_seq, omega)?;
        let lambdas = self.lambdas(&i_seq, omega)?;
        let cop = analytic::cop_with(config, &zetas, coupling)?;
        let surrogate = self.surrogate(&zetas);
        Ok(LongTermSolution {
            alpha: self.alpha,
            iterations: omega_history.len(),
            i_seq,
            omega,
            lambdas,
            zetas,
            cop,
            surrogate,
            omega_history,
        })
    }
}

fn noma_problem(config: &SystemConfig) -> Result<LongProblem> {
    LongProblem::new(config, config.noma_coefficients())
}

/// `A_n(i_n)`: the unpinned square-root weights of event `n`.
pub fn compute_a(n: usize, i_n: usize, alpha: f64, rhat0: f64, users: usize) -> Result<f64> {
    check_band(n, i_n, alpha, users)?;
    let coeffs = model::noma_coefficients(users, rhat0);
    let scale = -(-alpha).exp_m1();
    Ok(coeffs[..n].iter().map(|c| (c / scale).sqrt()).sum::<f64>()
        + coeffs[n + i_n..].iter().map(|c| c.sqrt()).sum::<f64>())
}

/// `B_n(i_n)`: power per unit probability spent on the pinned band of event `n`.
pub fn compute_b(n: usize, i_n: usize, alpha: f64, rhat0: f64, users: usize) -> Result<f64> {
    check_band(n, i_n, alpha, users)?;
    let coeffs = model::noma_coefficients(users, rhat0);
    Ok(coeffs[n..n + i_n].iter().sum::<f64>() / alpha)
}

fn check_band(n: usize, i_n: usize, alpha: f64, users: usize) -> Result<()> {
    if n > users || i_n > users - n {
        return domain(format!("band ({n}, {i_n}) out of range for {users} users"));
    }
    if !(alpha > 0.0) {
        return domain(format!("alpha must be positive, got {alpha}"));
    }
    Ok(())
}

/// Budget multiplier `omega` for band lengths `i_seq` at `config.alpha()`.
pub fn omega_from_i(i_seq: &[usize], config: &SystemConfig) -> Result<f64> {
    noma_problem(config)?.omega(i_seq)
}

pub fn zeta_from_i(i_seq: &[usize], omega: f64, config: &SystemConfig) -> Result<ZetaMatrix> {
    if !(omega > 0.0 && omega.is_finite()) {
        return domain(format!("omega must be positive, got {omega}"));
    }
    noma_problem(config)?.zetas(i_seq, omega)
}

/// Multipliers of the `zeta >= alpha` constraints on each pinned band.
pub fn lambda_from_i(i_seq: &[usize], omega: f64, config: &SystemConfig) -> Result<Vec<Vec<f64>>> {
    if !(omega > 0.0 && omega.is_finite()) {
        return domain(format!("omega must be positive, got {omega}"));
    }
    noma_problem(config)?.lambdas(i_seq, omega)
}

/// High-SNR surrogate objective of a NOMA allocation.
pub fn surrogate_objective(config: &SystemConfig, zetas: &ZetaMatrix) -> Result<f64> {
    if zetas.users() != config.users() {
        return domain("zeta matrix and config disagree on the user count");
    }
    Ok(noma_problem(config)?.surrogate(zetas))
}

/// Band search at `config.alpha()`; the result carries the exact COP.
pub fn algorithm_i(config: &SystemConfig) -> Result<LongTermSolution> {
    noma_problem(config)?.solve(config, Coupling::Sic)
}

/// Long-term NOMA allocation at `config.alpha()`.
pub fn solve_long(config: &SystemConfig) -> Result<LongTermSolution> {
    algorithm_i(config)
}

pub fn search_alpha_long(config: &SystemConfig, grid: &GridOptions) -> Result<LongTermSolution> {
    search_with(config, &config.noma_coefficients(), Coupling::Sic, grid)
}

pub(crate) fn search_with(
    config: &SystemConfig,
    coeffs: &[f64],
    coupling: Coupling,
    grid: &GridOptions,
) -> Result<LongTermSolution> {
    let r = search::minimize(grid, |alpha| {
        let cfg = config.with_alpha(alpha)?;
        let sol = LongProblem::new(&cfg, coeffs.to_vec())?.solve(&cfg, coupling)?;
        Ok((sol.cop.total, sol))
    })?;
    Ok(r.payload)
}

//! Optimal allocation under the short-term (per-block) power budget.
//!
//! For a fixed threshold the problem splits into one convex subproblem per
//! feedback event `n`:
//!
//! ```text
//! maximize   sum_{k<n} ln(e^{-zeta_k} - e^{-alpha}) - sum_{k>=n} zeta_k
//! subject to sum_k c_k / zeta_k <= P,
//!            0 < zeta_k < alpha  (k < n),   zeta_k >= alpha  (k >= n)
//! ```
//!
//! with `c_k = (rhat0 + 1)^k rhat0` for NOMA. The KKT conditions make the
//! optimum nondecreasing in `k` on their own, so the ordering constraint is
//! never active and is not imposed explicitly. Each subproblem is solved by
//! a log-barrier method with damped Newton steps.

use rayon::prelude::*;

use crate::analytic::{self, CopBreakdown, Coupling};
use crate::error::{domain, Error, Result};
use crate::linalg::solve_spd;
use crate::model::{SystemConfig, ZetaMatrix};
use crate::search::{self, GridOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Barrier weight at the first stage.
    pub t_start: f64,
    /// Barrier weight at the last stage.
    pub t_end: f64,
    /// Geometric reduction of the barrier weight between stages.
    pub t_factor: f64,
    /// Required KKT residual at the final stage.
    pub tol: f64,
    /// Newton steps allowed per barrier stage.
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            t_start: 1.0,
            t_end: 1e-9,
            t_factor: 10.0,
            tol: 1e-8,
            max_newton: 500,
        }
    }
}

/// Result of one event subproblem.
#[derive(Debug, Clone, PartialEq)]
pub enum EventSolution {
    Solved {
        zetas: Vec<f64>,
        kkt_residual: f64,
        /// Multiplier of the budget constraint (objective units per unit power).
        budget_multiplier: f64,
        newton_steps: usize,
    },
    /// The below-threshold users cannot all be served, or the best success
    /// probability is below machine precision: outage is certain.
    Infeasible,
}

impl EventSolution {
    pub fn zetas(&self) -> Option<&[f64]> {
        match self {
            EventSolution::Solved { zetas, .. } => Some(zetas),
            EventSolution::Infeasible => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShortTermSolution {
    pub alpha: f64,
    pub zetas: ZetaMatrix,
    pub cop: CopBreakdown,
    /// Per event; zero for infeasible events.
    pub kkt_residual: Vec<f64>,
    pub budget_multiplier: Vec<f64>,
    pub infeasible_events: Vec<usize>,
    pub newton_steps: usize,
}

/// Objective of the event subproblem at `zetas` (no barrier terms).
/// Returns `-inf` outside the below-group domain.
pub fn event_objective(n: usize, zetas: &[f64], alpha: f64) -> f64 {
    zetas
        .iter()
        .enumerate()
        .map(|(k, z)| {
            if k < n {
                if *z < alpha {
                    z_neg_log_gap(*z, alpha).map_or(f64::NEG_INFINITY, |v| -v)
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                -z
            }
        })
        .sum()
}

/// `-ln(e^{-z} - e^{-alpha}) = z - ln(1 - e^{z - alpha})`.
fn z_neg_log_gap(z: f64, alpha: f64) -> Option<f64> {
    let d = -(z - alpha).exp_m1();
    if d > 0.0 {
        Some(z - d.ln())
    } else {
        None
    }
}

pub(crate) struct EventProblem<'a> {
    pub below: usize,
    pub alpha: f64,
    pub budget: f64,
    pub coeffs: &'a [f64],
}

struct Derivatives {
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl EventProblem<'_> {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// Feasible with room for an interior start. A spare budget within
    /// rounding of zero leaves the above group no power, so such events are
    /// treated as infeasible.
    fn strictly_feasible(&self) -> bool {
        let floor = self.coeffs[..self.below].iter().sum::<f64>() / self.alpha;
        analytic::event_feasible_with(self.below, self.alpha, self.budget, self.coeffs)
            && self.budget - floor > 1e-12 * self.budget
    }

    /// Barrier objective `-objective - t * sum ln(slack)`; `None` outside the
    /// open feasible set.
    fn value(&self, z: &[f64], t: f64) -> Option<f64> {
        let mut f = 0.0;
        let mut used = 0.0;
        for (k, (&zk, &c)) in z.iter().zip(self.coeffs).enumerate() {
            if k < self.below {
                if !(zk > 0.0 && zk < self.alpha) {
                    return None;
                }
                f += z_neg_log_gap(zk, self.alpha)? - t * zk.ln();
            } else {
                let gap = zk - self.alpha;
                if !(gap > 0.0) {
                    return None;
                }
                f += zk - t * gap.ln();
            }
            used += c / zk;
        }
        let slack = self.budget - used;
        if !(slack > 0.0) {
            return None;
        }
        Some(f - t * slack.ln())
    }

    /// Log of the conditional success probability at `z`.
    fn log_success(&self, z: &[f64]) -> f64 {
        let n = self.below as f64;
        let above = (self.dim() - self.below) as f64;
        let norm = n * (-(-self.alpha).exp_m1()).ln() - self.alpha * above;
        -self.value(z, 0.0).unwrap_or(f64::INFINITY) - norm
    }

    fn budget_slack(&self, z: &[f64]) -> f64 {
        self.budget - z.iter().zip(self.coeffs).map(|(z, c)| c / z).sum::<f64>()
    }

    fn derivatives(&self, z: &[f64], t: f64) -> Derivatives {
        let dim = self.dim();
        let slack = self.budget_slack(z);
        let mut grad = vec![0.0; dim];
        let mut hess = vec![0.0; dim * dim];
        let mut dslack = vec![0.0; dim];
        for k in 0..dim {
            let zk = z[k];
            let (g, h) = if k < self.below {
                let q = (zk - self.alpha).exp();
                let d = -(zk - self.alpha).exp_m1();
                (1.0 / d - t / zk, q / (d * d) + t / (zk * zk))
            } else {
                let gap = zk - self.alpha;
                (1.0 - t / gap, t / (gap * gap))
            };
            dslack[k] = self.coeffs[k] / (zk * zk);
            grad[k] = g - t * dslack[k] / slack;
            hess[k * dim + k] = h + t * 2.0 * self.coeffs[k] / (zk * zk * zk) / slack;
        }
        for i in 0..dim {
            for j in 0..dim {
                hess[i * dim + j] += t * dslack[i] * dslack[j] / (slack * slack);
            }
        }
        Derivatives { grad, hess }
    }

    /// Strictly feasible start: below-group thresholds share a common factor
    /// under `alpha`; above-group thresholds follow `sqrt(c_k)` and sit above
    /// `alpha`. Together they use 90% of the spare budget.
    fn initial_point(&self) -> Vec<f64> {
        let n = self.below;
        let dim = self.dim();
        let floor: f64 = self.coeffs[..n].iter().sum::<f64>() / self.alpha;
        let spare = self.budget - floor;
        let (below_share, above_share) = match (n, dim - n) {
            (_, 0) => (0.9, 0.0),
            (0, _) => (0.0, 0.9),
            _ => (0.45, 0.45),
        };
        let mut z = vec![0.0; dim];
        if n > 0 {
            let shrink = floor / (floor + below_share * spare);
            for zk in z.iter_mut().take(n) {
                *zk = self.alpha * shrink;
            }
        }
        if dim > n {
            let roots: f64 = self.coeffs[n..].iter().map(|c| c.sqrt()).sum();
            let scale = roots / (above_share * spare);
            for k in n..dim {
                z[k] = (scale * self.coeffs[k].sqrt()).max(self.alpha * 1.01);
            }
        }
        z
    }

    /// KKT residual of the original problem at `z`, minimized over the
    /// multipliers. With `r_k = zeta_k (dF/dzeta_k - mu c_k / zeta_k^2)`, slot
    /// `k` contributes `r_k^-` plus `r_k^+ min(1, gap_k / zeta_k)`: a positive
    /// remainder is either a stationarity error or a bound multiplier times
    /// its gap, whichever is smaller. Slot terms are divided by
    /// `max(1, zeta_k dF/dzeta_k)`, so large thresholds are judged relative to
    /// their own scale. The budget contributes `mu * slack`. Each term is
    /// convex and piecewise linear in `mu`, so `mu` is found by golden-section
    /// search. Returns `(residual, mu)`.
    fn kkt(&self, z: &[f64]) -> (f64, f64) {
        let dim = z.len();
        let mut a = vec![0.0; dim];
        let mut weight = vec![1.0; dim];
        for (k, &zk) in z.iter().enumerate() {
            if k < self.below {
                a[k] = zk / -(zk - self.alpha).exp_m1();
            } else {
                a[k] = zk;
                weight[k] = ((zk - self.alpha) / zk).min(1.0);
            }
        }
        let b: Vec<f64> = z.iter().zip(self.coeffs).map(|(z, c)| c / z).collect();
        let slack = self.budget_slack(z).max(0.0);
        let residual = |mu: f64| {
            (0..dim).fold(mu * slack, |acc, k| {
                let r = a[k] - mu * b[k];
                acc.max(if r > 0.0 { r * weight[k] } else { -r } / a[k].max(1.0))
            })
        };
        let hi = (0..dim).map(|k| a[k] / b[k]).fold(0.0, f64::max) * 2.0;
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut up) = (0.0, hi);
        for _ in 0..200 {
            let m1 = up - inv_phi * (up - lo);
            let m2 = lo + inv_phi * (up - lo);
            if residual(m1) <= residual(m2) {
                up = m2;
            } else {
                lo = m1;
            }
        }
        let mu = 0.5 * (lo + up);
        (residual(mu), mu)
    }

    pub(crate) fn solve(
        &self,
        opts: &SolverOptions,
        event: usize,
    ) -> Result<Option<EventSolveRaw>> {
        if !self.strictly_feasible() {
            return Ok(None);
        }
        let mut z = self.initial_point();
        debug_assert!(self.value(&z, opts.t_start).is_some());
        // Centering from a far start costs steps in proportion to the
        // objective gap over t, so large objectives start with a larger t.
        let scale = self.value(&z, 0.0).map_or(0.0, f64::abs) / (self.dim() + 1) as f64;
        let mut t = opts.t_start.max(scale);
        let mut total_steps = 0;
        loop {
            let last_stage = t <= opts.t_end * (1.0 + 1e-12);
            let stop = if last_stage { 1e-22 } else { 1e-12 };
            let mut steps = 0;
            loop {
                let d = self.derivatives(&z, t);
                let neg_grad: Vec<f64> = d.grad.iter().map(|g| -g).collect();
                let Some(step) = solve_spd(&d.hess, &neg_grad) else {
                    return Err(non_convergence(event, total_steps, z));
                };
                let decrement2: f64 = -d.grad.iter().zip(&step).map(|(g, s)| g * s).sum::<f64>();
                if decrement2 <= stop {
                    break;
                }
                if steps >= opts.max_newton {
                    return Err(non_convergence(event, total_steps, z));
                }
                let f0 = self.value(&z, t).expect("iterate stays feasible");
                let mut s = 1.0;
                let mut accepted = None;
                while s >= 1e-20 {
                    let candidate: Vec<f64> = z.iter().zip(&step).map(|(z, d)| z + s * d).collect();
                    if let Some(f1) = self.value(&candidate, t) {
                        if f1 < f0 && f1 <= f0 - 0.01 * s * decrement2 {
                            accepted = Some(candidate);
                            break;
                        }
                    }
                    s *= 0.5;
                }
                // A stalled line search means the barrier value can no longer
                // resolve the predicted decrease; the KKT check decides.
                let Some(next) = accepted else { break };
                z = next;
                steps += 1;
                total_steps += 1;
            }
            if last_stage {
                break;
            }
            t = (t / opts.t_factor).max(opts.t_end);
        }
        let (kkt_residual, budget_multiplier) = self.kkt(&z);
        if kkt_residual > opts.tol {
            if self.log_success(&z) < f64::EPSILON.ln() {
                return Ok(None);
            }
            return Err(non_convergence(event, total_steps, z));
        }
        Ok(Some(EventSolveRaw {
            zetas: z,
            kkt_residual,
            budget_multiplier,
            newton_steps: total_steps,
        }))
    }
}

pub(crate) struct EventSolveRaw {
    pub zetas: Vec<f64>,
    pub kkt_residual: f64,
    pub budget_multiplier: f64,
    pub newton_steps: usize,
}

fn non_convergence(event: usize, iterations: usize, best: Vec<f64>) -> Error {
    Error::NonConvergence {
        event,
        iterations,
        best,
    }
}

/// Solves subproblem `n` at `config.alpha()`.
pub fn solve_event_short(
    n: usize,
    config: &SystemConfig,
    opts: &SolverOptions,
) -> Result<EventSolution> {
    let coeffs = config.noma_coefficients();
    solve_event_with(n, config, &coeffs, opts)
}

pub(crate) fn solve_event_with(
    n: usize,
    config: &SystemConfig,
    coeffs: &[f64],
    opts: &SolverOptions,
) -> Result<EventSolution> {
    let alpha = config.alpha();
    if !(alpha > 0.0 && alpha.is_finite()) {
        return domain(format!(
            "short-term solver needs 0 < alpha < inf, got {alpha}"
        ));
    }
    if n > config.users() {
        return domain(format!("event {n} exceeds user count {}", config.users()));
    }
    let problem = EventProblem {
        below: n,
        alpha,
        budget: config.power(),
        coeffs,
    };
    Ok(match problem.solve(opts, n)? {
        Some(raw) => EventSolution::Solved {
            zetas: raw.zetas,
            kkt_residual: raw.kkt_residual,
            budget_multiplier: raw.budget_multiplier,
            newton_steps: raw.newton_steps,
        },
        None => EventSolution::Infeasible,
    })
}

/// Solves all `K + 1` subproblems at `config.alpha()` and evaluates the exact COP.
pub fn solve_short(config: &SystemConfig) -> Result<ShortTermSolution> {
    solve_short_with(config, &SolverOptions::default())
}

pub fn solve_short_with(config: &SystemConfig, opts: &SolverOptions) -> Result<ShortTermSolution> {
    solve_events(config, &config.noma_coefficients(), Coupling::Sic, opts)
}

/// Shared by NOMA and TDMA: per-event solve with coefficients `coeffs`, COP
/// evaluated with the given coupling. Infeasible events get a uniform column
/// spending the whole budget; their conditional COP is 1 regardless.
pub(crate) fn solve_events(
    config: &SystemConfig,
    coeffs: &[f64],
    coupling: Coupling,
    opts: &SolverOptions,
) -> Result<ShortTermSolution> {
    let users = config.users();
    let solutions = (0..=users)
        .into_par_iter()
        .map(|n| solve_event_with(n, config, coeffs, opts))
        .collect::<Result<Vec<_>>>()?;
    let uniform = coeffs.iter().sum::<f64>() / config.power();
    let mut columns = Vec::with_capacity(users + 1);
    let mut kkt_residual = Vec::with_capacity(users + 1);
    let mut budget_multiplier = Vec::with_capacity(users + 1);
    let mut infeasible_events = Vec::new();
    let mut newton_steps = 0;
    for (n, sol) in solutions.into_iter().enumerate() {
        match sol {
            EventSolution::Solved {
                zetas,
                kkt_residual: r,
                budget_multiplier: m,
                newton_steps: s,
            } => {
                columns.push(zetas);
                kkt_residual.push(r);
                budget_multiplier.push(m);
                newton_steps += s;
            }
            EventSolution::Infeasible => {
                columns.push(vec![uniform; users]);
                kkt_residual.push(0.0);
                budget_multiplier.push(0.0);
                infeasible_events.push(n);
            }
        }
    }
    let zetas = ZetaMatrix::new(columns)?;
    let mut cop = analytic::cop_with(config, &zetas, coupling)?;
    for &n in &infeasible_events {
        // Already 1 analytically for every budget-feasible column; pin it.
        cop.per_event[n].conditional_cop = 1.0;
    }
    cop.total = cop
        .per_event
        .iter()
        .map(|t| t.probability * t.conditional_cop)
        .sum::<f64>()
        .clamp(0.0, 1.0);
    Ok(ShortTermSolution {
        alpha: config.alpha(),
        zetas,
        cop,
        kkt_residual,
        budget_multiplier,
        infeasible_events,
        newton_steps,
    })
}

/// Threshold search: grid over `alpha`, then golden-section refinement.
pub fn search_alpha_short(config: &SystemConfig, grid: &GridOptions) -> Result<ShortTermSolution> {
    let coeffs = config.noma_coefficients();
    search_events(config, &coeffs, Coupling::Sic, grid)
}

pub(crate) fn search_events(
    config: &SystemConfig,
    coeffs: &[f64],
    coupling: Coupling,
    grid: &GridOptions,
) -> Result<ShortTermSolution> {
    let opts = SolverOptions::default();
    let r = search::minimize(grid, |alpha| {
        let cfg = config.with_alpha(alpha)?;
        let sol = solve_events(&cfg, coeffs, coupling, &opts)?;
        Ok((sol.cop.total, sol))
    })?;
    Ok(r.payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines;

    fn cfg(users: usize, rate: f64, power: f64, alpha: f64) -> SystemConfig {
        SystemConfig::new(users, rate, power, alpha).unwrap()
    }

    fn solved(sol: EventSolution) -> Vec<f64> {
        match sol {
            EventSolution::Solved { zetas, .. } => zetas,
            EventSolution::Infeasible => panic!("expected a solution"),
        }
    }

    #[test]
    fn single_user_event_zero_hand_kkt() {
        for &(p, alpha) in &[(10.0, 0.05), (10.0, 0.5), (1000.0, 0.01)] {
            let c = cfg(1, 1.0, p, alpha);
            let z = solved(solve_event_short(0, &c, &SolverOptions::default()).unwrap());
            let expected = (c.rhat0() / p).max(alpha);
            assert!((z[0] - expected).abs() < 1e-8, "{z:?} vs {expected}");
        }
    }

    #[test]
    fn single_user_event_one_hand_kkt() {
        let c = cfg(1, 1.0, 10.0, 0.5);
        let z = solved(solve_event_short(1, &c, &SolverOptions::default()).unwrap());
        assert!((z[0] - 0.1).abs() < 1e-8, "{z:?}");
        // r^/P = 0.1 > alpha = 0.05: infeasible.
        let c = cfg(1, 1.0, 10.0, 0.05);
        assert_eq!(
            solve_event_short(1, &c, &SolverOptions::default()).unwrap(),
            EventSolution::Infeasible
        );
    }

    #[test]
    fn single_user_total_cop_composes_hand_solutions() {
        let (p, alpha) = (20.0, 0.3);
        let c = cfg(1, 1.0, p, alpha);
        let sol = solve_short(&c).unwrap();
        let z0 = (1.0 / p).max(alpha);
        let p0 = (-alpha).exp();
        let p1 = 1.0 - p0;
        let term0 = (1.0 - (-(z0 - alpha)).exp()).max(0.0);
        let term1 = ((1.0 - (-1.0 / p).exp()) / (1.0 - (-alpha).exp())).min(1.0);
        let expected = p0 * term0 + p1 * term1;
        assert!(
            (sol.cop.total - expected).abs() < 1e-8,
            "{} vs {expected}",
            sol.cop.total
        );
    }

    #[test]
    fn solutions_respect_box_order_and_budget() {
        for &(users, rate, snr, alpha) in &[
            (3, 1.0, 20.0, 0.5),
            (4, 0.7, 30.0, 0.05),
            (6, 1.0, 40.0, 0.02),
            (2, 2.0, 10.0, 1.5),
        ] {
            let c = SystemConfig::from_snr_db(users, rate, snr, alpha).unwrap();
            let sol = solve_short(&c).unwrap();
            let coeffs = c.noma_coefficients();
            for n in 0..=users {
                if sol.infeasible_events.contains(&n) {
                    continue;
                }
                let col = sol.zetas.column(n);
                for k in 0..users {
                    if k < n {
                        assert!(col[k] <= alpha + 1e-9);
                    } else {
                        assert!(col[k] >= alpha - 1e-9);
                    }
                }
                assert!(col.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{col:?}");
                let used: f64 = col.iter().zip(&coeffs).map(|(z, c)| c / z).sum();
                assert!(used <= c.power() * (1.0 + 1e-9));
                assert!(sol.kkt_residual[n] <= 1e-8);
                let slack = c.power() - used;
                if slack > 1e-6 * c.power() {
                    assert!(
                        sol.budget_multiplier[n] * slack <= 1e-8,
                        "n={n} slack={slack}"
                    );
                    assert!(sol.budget_multiplier[n] < 1e-3 / c.power(), "n={n}");
                }
            }
        }
    }

    #[test]
    fn beats_fixed_allocation() {
        for &alpha in &[0.05, 0.2, 0.8, 2.0] {
            let c = SystemConfig::from_snr_db(3, 1.0, 20.0, alpha).unwrap();
            let opt = solve_short(&c).unwrap().cop.total;
            let fixed = analytic::cop(&c, &baselines::fixed_noma_short(&c).unwrap())
                .unwrap()
                .total;
            assert!(opt <= fixed + 1e-8, "alpha={alpha}: {opt} > {fixed}");
        }
    }

    #[test]
    fn high_power_drives_cop_to_zero() {
        let c = SystemConfig::from_snr_db(3, 1.0, 60.0, 0.05).unwrap();
        assert!(solve_short(&c).unwrap().cop.total < 1e-3);
    }

    #[test]
    fn rejects_bad_alpha() {
        let c = cfg(2, 1.0, 10.0, 0.0);
        assert!(solve_event_short(0, &c, &SolverOptions::default()).is_err());
    }
}

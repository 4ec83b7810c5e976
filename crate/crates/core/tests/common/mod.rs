//! Independent reference solutions shared by the integration tests.
#![allow(dead_code)]

use noma1b_core::model::SystemConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Conditional COP straight from the definition: slot `k` fails when its
/// gain is below the largest threshold among slots `0..=k`.
pub fn direct_conditional_cop(n: usize, zetas: &[f64], alpha: f64) -> f64 {
    let mut hat = 0.0f64;
    let mut success = 1.0;
    for (k, z) in zetas.iter().enumerate() {
        hat = hat.max(*z);
        let p = if k < n {
            if hat >= alpha {
                1.0
            } else {
                (1.0 - (-hat).exp()) / (1.0 - (-alpha).exp())
            }
        } else {
            (1.0 - (-(hat - alpha)).exp()).max(0.0)
        };
        success *= 1.0 - p;
    }
    1.0 - success
}

fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
        .collect()
}

fn logspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), m)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// Candidate values for one slot of a two-user event.
fn axis(k: usize, n: usize, alpha: f64, power: f64, c: f64, m: usize) -> Vec<f64> {
    let floor = c / power;
    if k < n {
        logspace(floor, alpha * (1.0 - 1e-12), m)
    } else {
        let lo = floor.max(alpha);
        let mut v = vec![lo];
        v.extend(logspace(1e-9, 12.0, m - 1).into_iter().map(|g| lo + g));
        v
    }
}

/// Minimum conditional COP of a two-user event over a `m x m` grid of
/// threshold pairs meeting the budget, refined once on a `m x m` linear grid
/// spanning two cells around the coarse optimum. Returns 1 when no grid
/// point meets the budget.
pub fn brute_force_event_2(n: usize, alpha: f64, power: f64, coeffs: &[f64], m: usize) -> f64 {
    let feasible = |z0: f64, z1: f64| coeffs[0] / z0 + coeffs[1] / z1 <= power;
    let x = axis(0, n, alpha, power, coeffs[0], m);
    let y = axis(1, n, alpha, power, coeffs[1], m);
    let mut best = (1.0, None);
    for (i, &z0) in x.iter().enumerate() {
        for (j, &z1) in y.iter().enumerate() {
            if feasible(z0, z1) {
                let v = direct_conditional_cop(n, &[z0, z1], alpha);
                if v < best.0 {
                    best = (v, Some((i, j)));
                }
            }
        }
    }
    let Some((i, j)) = best.1 else {
        return 1.0;
    };
    let span =
        |axis: &[f64], i: usize| (axis[i.saturating_sub(2)], axis[(i + 2).min(axis.len() - 1)]);
    let (x0, x1) = span(&x, i);
    let (y0, y1) = span(&y, j);
    for z0 in linspace(x0, x1, m) {
        for z1 in linspace(y0, y1, m) {
            if feasible(z0, z1) {
                best.0 = f64::min(best.0, direct_conditional_cop(n, &[z0, z1], alpha));
            }
        }
    }
    best.0
}

/// Event solution from the optimality conditions: for a budget price `mu`
/// each slot minimizes its own convex cost, and `mu` is bisected until the
/// budget is met. Returns `None` when the event cannot be served.
pub fn water_fill_event(n: usize, alpha: f64, power: f64, coeffs: &[f64]) -> Option<Vec<f64>> {
    if coeffs[..n].iter().sum::<f64>() / alpha >= power {
        return None;
    }
    let slot = |k: usize, mu: f64| -> f64 {
        let c = coeffs[k];
        if k < n {
            // Root of 1 / (1 - e^{z - alpha}) - mu c / z^2 on (0, alpha).
            let (mut lo, mut hi) = (0.0f64, alpha);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let d = 1.0 / (1.0 - (mid - alpha).exp()) - mu * c / (mid * mid);
                if d > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        } else {
            (mu * c).sqrt().max(alpha)
        }
    };
    let used = |mu: f64| -> f64 { (0..coeffs.len()).map(|k| coeffs[k] / slot(k, mu)).sum() };
    if n == 0 && used(0.0) <= power {
        return Some(vec![alpha; coeffs.len()]);
    }
    let (mut lo, mut hi) = (1e-300f64.ln(), 1e300f64.ln());
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if used(mid.exp()) > power {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = hi.exp();
    Some((0..coeffs.len()).map(|k| slot(k, mu)).collect())
}

/// High-SNR surrogate of the long-term problem, written out directly.
pub fn surrogate(config: &SystemConfig, columns: &[Vec<f64>]) -> f64 {
    let alpha = config.alpha();
    let probs = config.event_probabilities();
    let scale = 1.0 - (-alpha).exp();
    columns
        .iter()
        .enumerate()
        .map(|(n, col)| {
            let below: f64 = col[..n].iter().map(|z| z / scale).sum();
            let above: f64 = col[n..].iter().map(|z| z - alpha).sum();
            probs[n] * (below + above)
        })
        .sum()
}

/// Closed-form candidate for band lengths `i_n = max(i0 - n, 0)`; `None` if
/// the budget cannot pay for the band or an unpinned slot falls below alpha.
pub fn band_candidate(config: &SystemConfig, i0: usize) -> Option<(f64, Vec<Vec<f64>>)> {
    let users = config.users();
    let alpha = config.alpha();
    let r = config.rhat0();
    let probs = config.event_probabilities();
    let coeff = |k: usize| (r + 1.0).powi(k as i32) * r;
    let scale = 1.0 - (-alpha).exp();
    let band = |n: usize| i0.saturating_sub(n);
    let mut num = 0.0;
    let mut pinned = 0.0;
    for n in 0..=users {
        for k in 0..users {
            if k < n {
                num += probs[n] * (coeff(k) / scale).sqrt();
            } else if k < n + band(n) {
                pinned += probs[n] * coeff(k) / alpha;
            } else {
                num += probs[n] * coeff(k).sqrt();
            }
        }
    }
    if config.power() - pinned <= 0.0 || num <= 0.0 {
        return None;
    }
    let omega = (num / (config.power() - pinned)).powi(2);
    let mut columns = Vec::new();
    for n in 0..=users {
        let mut col = Vec::new();
        for k in 0..users {
            let z = if k < n {
                (omega * coeff(k) * scale).sqrt()
            } else if k < n + band(n) {
                alpha
            } else {
                let z = (omega * coeff(k)).sqrt();
                if z < alpha * (1.0 - 1e-12) {
                    return None;
                }
                z
            };
            col.push(z);
        }
        columns.push(col);
    }
    Some((omega, columns))
}

/// Best feasible band candidate over every `i0 in 0..=K`.
pub fn enumerate_bands(config: &SystemConfig) -> Option<(usize, f64)> {
    (0..=config.users())
        .filter_map(|i0| band_candidate(config, i0).map(|(_, cols)| (i0, surrogate(config, &cols))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

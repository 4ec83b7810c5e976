//! One-dimensional search over the feedback threshold: a logarithmic grid,
//! then golden-section refinement inside the winning grid cell.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    /// Golden-section stops once the bracket spans less than this in `ln(alpha)`.
    pub refine_width: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            lo: 1e-4,
            hi: 10.0,
            points: 64,
            refine_width: 1e-4,
        }
    }
}

impl GridOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0 && self.hi > self.lo && self.hi.is_finite()) {
            return domain(format!(
                "alpha grid needs 0 < lo < hi < inf, got [{}, {}]",
                self.lo, self.hi
            ));
        }
        if self.points < 2 {
            return domain("alpha grid needs at least 2 points");
        }
        if !(self.refine_width > 0.0) {
            return domain("refine width must be positive");
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| (a + (b - a) * i as f64 / last).exp())
            .collect()
    }
}

/// Outcome of a threshold search.
#[derive(Debug, Clone)]
pub struct SearchResult<T> {
    pub alpha: f64,
    pub value: f64,
    pub payload: T,
    /// `(alpha, value)` for every grid point, in grid order. Failed points
    /// carry `f64::INFINITY`.
    pub curve: Vec<(f64, f64)>,
}

/// Minimizes `objective(alpha).0` over the grid and refines the best cell.
///
/// Grid points whose evaluation fails are skipped. If every grid point
/// fails, the first error is returned.
pub fn minimize<T, F>(grid: &GridOptions, objective: F) -> Result<SearchResult<T>>
where
    T: Send,
    F: Fn(f64) -> Result<(f64, T)> + Sync,
{
    grid.validate()?;
    let alphas = grid.grid();
    let evals: Vec<Result<(f64, T)>> = alphas.par_iter().map(|a| objective(*a)).collect();

    let curve: Vec<(f64, f64)> = alphas
        .iter()
        .zip(&evals)
        .map(|(a, e)| (*a, e.as_ref().map(|v| v.0).unwrap_or(f64::INFINITY)))
        .collect();

    let mut best: Option<(usize, f64, T)> = None;
    let mut first_err: Option<Error> = None;
    for (i, e) in evals.into_iter().enumerate() {
        match e {
            Ok((v, payload)) => {
                if best.as_ref().is_none_or(|b| v < b.1) {
                    best = Some((i, v, payload));
                }
            }
            Err(err) => {
                first_err.get_or_insert(err);
            }
        }
    }
    let Some((idx, mut best_value, mut best_payload)) = best else {
        return Err(first_err.expect("grid has at least two points"));
    };
    let mut best_alpha = alphas[idx];

    // Golden-section on ln(alpha) over the neighbouring cells.
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = alphas[idx.saturating_sub(1)].ln();
    let mut b = alphas[(idx + 1).min(alphas.len() - 1)].ln();
    let mut eval = |x: f64| -> f64 {
        match objective(x.exp()) {
            Ok((v, payload)) => {
                if v < best_value {
                    best_value = v;
                    best_alpha = x.exp();
                    best_payload = payload;
                }
                v
            }
            Err(_) => f64::INFINITY,
        }
    };
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    while b - a > grid.refine_width {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d);
        }
    }

    Ok(SearchResult {
        alpha: best_alpha,
        value: best_value,
        payload: best_payload,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_log_spaced() {
        let g = GridOptions {
            lo: 1e-3,
            hi: 10.0,
            points: 5,
            refine_width: 1e-4,
        }
        .grid();
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1e-3).abs() < 1e-15);
        assert!((g[2] - 0.1).abs() < 1e-12);
        assert!((g[4] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn finds_interior_minimum() {
        let r = minimize(&GridOptions::default(), |a| {
            let x = a.ln() - 0.3f64.ln();
            Ok((x * x, ()))
        })
        .unwrap();
        assert!((r.alpha / 0.3 - 1.0).abs() < 1e-3, "{}", r.alpha);
        assert!(r.curve.iter().all(|(_, v)| r.value <= *v));
    }

    #[test]
    fn skips_failed_points() {
        let r = minimize(&GridOptions::default(), |a| {
            if a < 1.0 {
                Err(Error::Domain("nope".into()))
            } else {
                Ok((a, a))
            }
        })
        .unwrap();
        assert!(r.alpha >= 1.0 && r.alpha < 1.2);
        assert!(minimize(&GridOptions::default(), |_| -> Result<(f64, ())> {
            Err(Error::Domain("all".into()))
        })
        .is_err());
    }

    #[test]
    fn rejects_bad_grid() {
        let g = GridOptions {
            lo: 0.0,
            ..GridOptions::default()
        };
        assert!(minimize(&g, |a| Ok((a, ()))).is_err());
    }
}

//! Diversity-order estimation: least-squares slope of `-log10(COP)` against
//! `log10(P)`.

use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Points used in the fit.
    pub used: usize,
    /// Points dropped because their COP was zero.
    pub excluded: usize,
}

/// Fits `-log10(cop) = slope * log10(power) + intercept` over `(power, cop)`
/// pairs. Pairs with `cop == 0` are skipped; at least two usable points with
/// distinct powers are required.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if let Some((p, c)) = points
        .iter()
        .find(|(p, c)| !(*p > 0.0) || !(0.0..=1.0).contains(c))
    {
        return domain(format!("invalid point (power {p}, cop {c})"));
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, c)| *c > 0.0)
        .map(|(p, c)| (p.log10(), -c.log10()))
        .collect();
    let excluded = points.len() - xy.len();
    if xy.len() < 2 {
        return domain(format!(
            "need two points with positive COP, have {}",
            xy.len()
        ));
    }
    let m = xy.len() as f64;
    let mx = xy.iter().map(|v| v.0).sum::<f64>() / m;
    let my = xy.iter().map(|v| v.1).sum::<f64>() / m;
    let sxx: f64 = xy.iter().map(|v| (v.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return domain("all powers are equal");
    }
    let sxy: f64 = xy.iter().map(|v| (v.0 - mx) * (v.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        used: xy.len(),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(order: i32) -> Vec<(f64, f64)> {
        [1e3, 3e3, 1e4, 3e4]
            .iter()
            .map(|p: &f64| (*p, 0.7 / p.powi(order)))
            .collect()
    }

    #[test]
    fn recovers_known_orders() {
        assert!((fit_slope(&synthetic(1)).unwrap().slope - 1.0).abs() < 1e-6);
        assert!((fit_slope(&synthetic(2)).unwrap().slope - 2.0).abs() < 1e-6);
    }

    #[test]
    fn skips_zero_cop() {
        let mut pts = synthetic(1);
        pts.push((1e5, 0.0));
        let f = fit_slope(&pts).unwrap();
        assert_eq!((f.used, f.excluded), (4, 1));
        assert!(fit_slope(&[(1.0, 0.1), (2.0, 0.0)]).is_err());
        assert!(fit_slope(&[(1.0, 0.1), (1.0, 0.2)]).is_err());
    }
}

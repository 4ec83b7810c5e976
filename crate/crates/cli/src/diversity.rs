use noma1b_core::diversity::{fit_slope, SlopeFit};
use noma1b_core::model::snr_db_to_linear;

use crate::error::{CliError, CliResult};
use crate::sweep::CsvRecord;

/// Fewest positive-COP rows a group needs inside the window.
pub const MIN_POINTS: usize = 3;

#[derive(Debug, Clone)]
pub struct DiversityFit {
    pub scheme: String,
    pub users: usize,
    pub rate: f64,
    pub fit: SlopeFit,
}

/// Groups rows by scheme, user count and rate, keeps SNRs inside `window`
/// (dB, inclusive) and fits the COP slope of each group. The analytic COP is
/// used when present, else the simulated one. Groups are returned in order
/// of first appearance.
pub fn fit_diversity(
    records: &[CsvRecord],
    window: (f64, f64),
    scheme: Option<&str>,
) -> CliResult<Vec<DiversityFit>> {
    let mut groups: Vec<(String, usize, f64, Vec<(f64, f64)>)> = Vec::new();
    for r in records {
        if scheme.is_some_and(|s| s != r.scheme) {
            continue;
        }
        if r.snr_db < window.0 || r.snr_db > window.1 {
            continue;
        }
        let Some(cop) = r.cop_analytic.or(r.cop_mc) else {
            continue;
        };
        let point = (snr_db_to_linear(r.snr_db), cop);
        match groups
            .iter_mut()
            .find(|g| g.0 == r.scheme && g.1 == r.users && g.2 == r.rate)
        {
            Some(g) => g.3.push(point),
            None => groups.push((r.scheme.clone(), r.users, r.rate, vec![point])),
        }
    }
    groups
        .into_iter()
        .map(|(scheme, users, rate, pts)| {
            let usable = pts.iter().filter(|p| p.1 > 0.0).count();
            if usable < MIN_POINTS {
                return Err(CliError::Config(format!(
                    "{scheme} K={users} r0={rate}: {usable} rows with positive COP in the window, need {MIN_POINTS}"
                )));
            }
            let fit = fit_slope(&pts).map_err(|e| CliError::Config(format!("{scheme} K={users} r0={rate}: {e}")))?;
            Ok(DiversityFit {
                fit,
                scheme,
                users,
                rate,
            })
        })
        .collect()
}

pub fn fits_to_csv(fits: &[DiversityFit]) -> String {
    let mut out = String::from("scheme,K,r0,slope,intercept,points,excluded\n");
    for f in fits {
        out.push_str(&format!(
            "{},{},{:.9e},{:.9e},{:.9e},{},{}\n",
            f.scheme, f.users, f.rate, f.fit.slope, f.fit.intercept, f.fit.used, f.fit.excluded
        ));
    }
    out
}

//! Data behind the seven COP figures.
//!
//! | file      | x axis       | fixed parameters      | schemes            |
//! |-----------|--------------|-----------------------|--------------------|
//! | fig1.csv  | SNR 0..40 dB | K = 3, r0 = 1         | short-term set     |
//! | fig2.csv  | r0 0.25..3   | K = 3, 20 dB          | short-term set     |
//! | fig3.csv  | K 1..8       | r0 = 1, 30 dB         | short-term set     |
//! | fig4.csv  | SNR 0..40 dB | K = 3, r0 = 1         | long-term set      |
//! | fig5.csv  | r0 0.25..3   | K = 3, 20 dB          | long-term set      |
//! | fig6.csv  | K 1..8       | r0 = 1, 30 dB         | long-term set      |
//! | fig7.csv  | K 1..8       | r0 = 1, 20 and 22 dB  | optimal thresholds |

use std::path::{Path, PathBuf};

use noma1b_core::baselines::BaselineSpec;
use noma1b_core::search::GridOptions;
use noma1b_core::{optlong, optshort, SystemConfig};
use rayon::prelude::*;

use crate::config::{AlphaMode, ExperimentConfig, Scheme};
use crate::error::{CliError, CliResult};
use crate::sweep::{rows_to_csv, run_sweep, write_atomic};

pub const FIGURES: [&str; 7] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"];

fn short_set() -> Vec<Scheme> {
    vec![
        Scheme::ProposedShort,
        Scheme::Baseline(BaselineSpec::TdmaShort),
        Scheme::Baseline(BaselineSpec::FixedNomaShort),
        Scheme::Baseline(BaselineSpec::NoFeedback),
        Scheme::Baseline(BaselineSpec::PerfectCsi),
    ]
}

fn long_set() -> Vec<Scheme> {
    vec![
        Scheme::ProposedLong,
        Scheme::Baseline(BaselineSpec::TdmaLong),
        Scheme::Baseline(BaselineSpec::FixedNomaLong),
        Scheme::ProposedShort,
    ]
}

fn snr_axis() -> Vec<f64> {
    (0..=8).map(|i| 5.0 * i as f64).collect()
}

fn rate_axis() -> Vec<f64> {
    (1..=12).map(|i| 0.25 * i as f64).collect()
}

fn user_axis() -> Vec<usize> {
    (1..=8).collect()
}

/// Sweep config behind `name` (figures 1 to 6).
pub fn figure_config(
    name: &str,
    trials: u64,
    seed: u64,
    grid: GridOptions,
) -> CliResult<ExperimentConfig> {
    let (schemes, users, rates, snr_db) = match name {
        "fig1" => (short_set(), vec![3], vec![1.0], snr_axis()),
        "fig2" => (short_set(), vec![3], rate_axis(), vec![20.0]),
        "fig3" => (short_set(), user_axis(), vec![1.0], vec![30.0]),
        "fig4" => (long_set(), vec![3], vec![1.0], snr_axis()),
        "fig5" => (long_set(), vec![3], rate_axis(), vec![20.0]),
        "fig6" => (long_set(), user_axis(), vec![1.0], vec![30.0]),
        other => return Err(CliError::Config(format!("no sweep figure named '{other}'"))),
    };
    let schemes = if trials == 0 {
        schemes
            .into_iter()
            .filter(|s| *s != Scheme::Baseline(BaselineSpec::PerfectCsi))
            .collect()
    } else {
        schemes
    };
    Ok(ExperimentConfig {
        schemes,
        users,
        rates,
        snr_db,
        alpha: AlphaMode::Search,
        grid,
        trials,
        seed: Some(seed),
        ..ExperimentConfig::default()
    })
}

/// Optimal thresholds and COPs against K at two SNRs.
pub fn threshold_table(grid: &GridOptions) -> CliResult<String> {
    let points: Vec<(f64, usize)> = [20.0, 22.0]
        .iter()
        .flat_map(|s| user_axis().into_iter().map(move |k| (*s, k)))
        .collect();
    let rows: Vec<String> = points
        .par_iter()
        .map(|&(snr, users)| -> CliResult<String> {
            let c = SystemConfig::from_snr_db(users, 1.0, snr, 1.0)?;
            let s = optshort::search_alpha_short(&c, grid)?;
            let l = optlong::search_alpha_long(&c, grid)?;
            Ok(format!(
                "{users},{snr:.9e},{:.9e},{:.9e},{:.9e},{:.9e}\n",
                s.alpha, s.cop.total, l.alpha, l.cop.total
            ))
        })
        .collect::<CliResult<_>>()?;
    let mut out = String::from("K,snr_db,alpha_short,cop_short,alpha_long,cop_long\n");
    out.extend(rows);
    Ok(out)
}

/// Writes `<name>.csv` into `dir` for every requested figure and returns the paths.
pub fn write_figures(
    dir: &Path,
    names: &[&str],
    trials: u64,
    seed: u64,
    grid: GridOptions,
) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    for name in names {
        let body = if *name == "fig7" {
            threshold_table(&grid)?
        } else {
            rows_to_csv(&run_sweep(&figure_config(name, trials, seed, grid)?)?)
        };
        let path = dir.join(format!("{name}.csv"));
        write_atomic(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}

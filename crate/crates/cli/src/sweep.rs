use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use noma1b_core::baselines::{self, BaselineSpec};
use noma1b_core::search::{self, GridOptions};
use noma1b_core::{analytic, optlong, optshort, Access, Simulator, SystemConfig, ZetaMatrix};
use rayon::prelude::*;

use crate::config::{AlphaMode, ExperimentConfig, Scheme};
use crate::error::{CliError, CliResult};

pub const CSV_HEADER: &str =
    "scheme,K,r0,snr_db,alpha_used,cop_analytic,cop_mc,mc_stderr,solver_iterations,wall_time";

/// Threshold used to simulate schemes whose COP does not depend on it.
const NOMINAL_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub scheme: Scheme,
    pub users: usize,
    pub rate: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: SweepPoint,
    /// `None` when the scheme has no threshold; `inf` for no feedback.
    pub alpha_used: Option<f64>,
    pub cop_analytic: Option<f64>,
    pub cop_mc: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub solver_iterations: Option<usize>,
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub alpha: AlphaMode,
    pub grid: GridOptions,
    pub trials: u64,
    pub seed: u64,
    /// Simulated thresholds are scaled by `1 + perturb`.
    pub perturb: f64,
    pub timing: bool,
}

impl EvalOptions {
    pub fn from_config(cfg: &ExperimentConfig) -> CliResult<Self> {
        Ok(Self {
            alpha: cfg.alpha,
            grid: cfg.grid,
            trials: cfg.trials,
            seed: cfg.resolved_seed()?,
            perturb: cfg.perturb,
            timing: cfg.timing,
        })
    }
}

/// Points in output order: scheme, then users, then rate, then SNR.
pub fn sweep_points(cfg: &ExperimentConfig) -> Vec<SweepPoint> {
    let mut out = Vec::new();
    for &scheme in &cfg.schemes {
        for &users in &cfg.users {
            for &rate in &cfg.rates {
                for &snr_db in &cfg.snr_db {
                    out.push(SweepPoint {
                        scheme,
                        users,
                        rate,
                        snr_db,
                    });
                }
            }
        }
    }
    out
}

/// Seed for the simulation at position `index` of a sweep.
pub fn row_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64)
        .wrapping_add(1)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct Allocation {
    alpha: Option<f64>,
    sim_alpha: f64,
    zetas: Option<ZetaMatrix>,
    access: Access,
    cop: Option<f64>,
    iterations: Option<usize>,
}

fn allocate(point: &SweepPoint, opts: &EvalOptions) -> noma1b_core::Result<Allocation> {
    let fixed = match opts.alpha {
        AlphaMode::Fixed(a) => Some(a),
        AlphaMode::Search => None,
    };
    let base = SystemConfig::from_snr_db(
        point.users,
        point.rate,
        point.snr_db,
        fixed.unwrap_or(NOMINAL_ALPHA),
    )?;
    let short = |s: optshort::ShortTermSolution, access| Allocation {
        alpha: Some(s.alpha),
        sim_alpha: s.alpha,
        zetas: Some(s.zetas),
        access,
        cop: Some(s.cop.total),
        iterations: Some(s.newton_steps),
    };
    let long = |s: optlong::LongTermSolution, access| Allocation {
        alpha: Some(s.alpha),
        sim_alpha: s.alpha,
        zetas: Some(s.zetas),
        access,
        cop: Some(s.cop.total),
        iterations: Some(s.iterations),
    };
    let alloc = match point.scheme {
        Scheme::ProposedShort => short(
            match fixed {
                Some(_) => optshort::solve_short(&base)?,
                None => optshort::search_alpha_short(&base, &opts.grid)?,
            },
            Access::Noma,
        ),
        Scheme::ProposedLong => long(
            match fixed {
                Some(_) => optlong::solve_long(&base)?,
                None => optlong::search_alpha_long(&base, &opts.grid)?,
            },
            Access::Noma,
        ),
        Scheme::Baseline(BaselineSpec::TdmaShort) => short(
            match fixed {
                Some(_) => baselines::tdma_short(&base)?,
                None => baselines::tdma_search_short(&base, &opts.grid)?,
            },
            Access::Tdma,
        ),
        Scheme::Baseline(BaselineSpec::TdmaLong) => long(
            match fixed {
                Some(_) => baselines::tdma_long(&base)?,
                None => baselines::tdma_search_long(&base, &opts.grid)?,
            },
            Access::Tdma,
        ),
        Scheme::Baseline(BaselineSpec::FixedNomaShort) => {
            let zetas = baselines::fixed_noma_short(&base)?;
            let cop = analytic::cop(&base, &zetas)?.total;
            Allocation {
                alpha: fixed,
                sim_alpha: base.alpha(),
                zetas: Some(zetas),
                access: Access::Noma,
                cop: Some(cop),
                iterations: None,
            }
        }
        Scheme::Baseline(BaselineSpec::FixedNomaLong) => {
            let cfg = match fixed {
                Some(_) => base,
                None => {
                    let found = search::minimize(&opts.grid, |a| {
                        let c = base.with_alpha(a)?;
                        let z = baselines::fixed_noma_long(&c)?;
                        Ok((analytic::cop(&c, &z)?.total, ()))
                    })?;
                    base.with_alpha(found.alpha)?
                }
            };
            let zetas = baselines::fixed_noma_long(&cfg)?;
            let cop = analytic::cop(&cfg, &zetas)?.total;
            Allocation {
                alpha: Some(cfg.alpha()),
                sim_alpha: cfg.alpha(),
                zetas: Some(zetas),
                access: Access::Noma,
                cop: Some(cop),
                iterations: None,
            }
        }
        Scheme::Baseline(BaselineSpec::NoFeedback) => {
            let column = baselines::no_feedback_column(&base);
            let cop = baselines::no_feedback_cop(&column)?;
            Allocation {
                alpha: Some(f64::INFINITY),
                sim_alpha: f64::INFINITY,
                zetas: Some(ZetaMatrix::repeated(&column)?),
                access: Access::Noma,
                cop: Some(cop),
                iterations: None,
            }
        }
        Scheme::Baseline(BaselineSpec::PerfectCsi) => Allocation {
            alpha: None,
            sim_alpha: base.alpha(),
            zetas: None,
            access: Access::Noma,
            cop: None,
            iterations: None,
        },
    };
    Ok(alloc)
}

/// Evaluates one point. `seed` drives the simulation (ignored when `opts.trials == 0`).
pub fn evaluate(point: &SweepPoint, opts: &EvalOptions, seed: u64) -> CliResult<SweepRow> {
    let start = Instant::now();
    let alloc = allocate(point, opts)?;
    let (mut cop_mc, mut mc_stderr) = (None, None);
    if opts.trials > 0 || alloc.zetas.is_none() {
        if opts.trials == 0 {
            return Err(CliError::Config(format!(
                "{} needs Monte Carlo trials",
                point.scheme
            )));
        }
        let cfg =
            SystemConfig::from_snr_db(point.users, point.rate, point.snr_db, alloc.sim_alpha)?;
        let sim = Simulator::new(opts.trials, seed);
        let report = match &alloc.zetas {
            Some(z) => {
                let scaled = if opts.perturb != 0.0 {
                    ZetaMatrix::from_fn(z.users(), |k, n| z.get(k, n) * (1.0 + opts.perturb))?
                } else {
                    z.clone()
                };
                sim.estimate(&cfg, &scaled, alloc.access)?
            }
            None => sim.estimate_perfect_csi(&cfg)?,
        };
        cop_mc = Some(report.cop_estimate);
        mc_stderr = Some(report.std_err);
    }
    Ok(SweepRow {
        point: *point,
        alpha_used: alloc.alpha,
        cop_analytic: alloc.cop,
        cop_mc,
        mc_stderr,
        solver_iterations: alloc.iterations,
        wall_time: opts.timing.then(|| start.elapsed().as_secs_f64()),
    })
}

/// Evaluates every point of `cfg` in parallel; rows come back in point order.
pub fn run_sweep(cfg: &ExperimentConfig) -> CliResult<Vec<SweepRow>> {
    cfg.validate()?;
    let opts = EvalOptions::from_config(cfg)?;
    let points = sweep_points(cfg);
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| evaluate(p, &opts, row_seed(opts.seed, i)))
        .collect()
}

fn float_field(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.to_string(),
        Some(v) => format!("{v:.9e}"),
    }
}

impl SweepRow {
    /// Fields in header order; absent values are empty.
    pub fn fields(&self) -> [String; 10] {
        let p = &self.point;
        [
            p.scheme.to_string(),
            p.users.to_string(),
            float_field(Some(p.rate)),
            float_field(Some(p.snr_db)),
            float_field(self.alpha_used),
            float_field(self.cop_analytic),
            float_field(self.cop_mc),
            float_field(self.mc_stderr),
            self.solver_iterations
                .map_or_else(String::new, |n| n.to_string()),
            float_field(self.wall_time),
        ]
    }

    pub fn to_csv(&self) -> String {
        self.fields().join(",")
    }
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::with_capacity(96 * (rows.len() + 1)));
    let written = (|| -> csv::Result<Vec<u8>> {
        w.write_record(CSV_HEADER.split(','))?;
        for r in rows {
            w.write_record(r.fields())?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    })();
    String::from_utf8(written.expect("writing to memory cannot fail")).expect("fields are ascii")
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

/// Parsed data row of a sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRecord {
    pub scheme: String,
    pub users: usize,
    pub rate: f64,
    pub snr_db: f64,
    pub cop_analytic: Option<f64>,
    pub cop_mc: Option<f64>,
}

pub fn parse_csv(text: &str) -> CliResult<Vec<CsvRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::Config(format!("line 1: {e}")))?;
    if header.iter().ne(CSV_HEADER.split(',')) {
        return Err(CliError::Config("line 1: not a sweep CSV header".into()));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Config(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |what: &str, s: &str| CliError::Config(format!("line {line}: bad {what} '{s}'"));
        let opt = |i: usize| -> CliResult<Option<f64>> {
            match &record[i] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad("number", s)),
            }
        };
        let need = |i: usize| opt(i)?.ok_or_else(|| bad("number", ""));
        out.push(CsvRecord {
            scheme: record[0].to_string(),
            users: record[1]
                .parse()
                .map_err(|_| bad("user count", &record[1]))?,
            rate: need(2)?,
            snr_db: need(3)?,
            cop_analytic: opt(5)?,
            cop_mc: opt(6)?,
        });
    }
    Ok(out)
}

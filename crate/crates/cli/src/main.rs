use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, Parser, Subcommand};
use noma1b_cli::config::{default_seed, SEED_ENV};
use noma1b_cli::diversity::{fit_diversity, fits_to_csv};
use noma1b_cli::sweep::{evaluate, parse_csv, rows_to_csv, write_atomic, EvalOptions, SweepPoint};
use noma1b_cli::validate::{default_suite, validate};
use noma1b_cli::{figures, run_sweep, AlphaMode, CliError, CliResult, ExperimentConfig, Scheme};
use noma1b_core::search::GridOptions;
use noma1b_core::{optlong, optshort, SystemConfig};

#[derive(Parser)]
#[command(
    name = "noma1b",
    version,
    about = "Outage studies for NOMA with one-bit feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Lower end of the threshold search grid.
    #[arg(long)]
    alpha_lo: Option<f64>,
    /// Upper end of the threshold search grid.
    #[arg(long)]
    alpha_hi: Option<f64>,
    /// Number of logarithmically spaced grid points.
    #[arg(long)]
    alpha_points: Option<usize>,
    /// Refinement stops below this bracket width in ln(alpha).
    #[arg(long)]
    alpha_refine: Option<f64>,
}

impl GridArgs {
    fn apply(&self, mut g: GridOptions) -> GridOptions {
        g.lo = self.alpha_lo.unwrap_or(g.lo);
        g.hi = self.alpha_hi.unwrap_or(g.hi);
        g.points = self.alpha_points.unwrap_or(g.points);
        g.refine_width = self.alpha_refine.unwrap_or(g.refine_width);
        g
    }
}

#[derive(Args, Clone)]
struct PointArgs {
    #[arg(long, default_value_t = 3)]
    users: usize,
    /// Target rate r0 in bit/s/Hz.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    #[arg(long, allow_hyphen_values = true)]
    snr_db: f64,
    /// Feedback threshold, or `search` to optimize it.
    #[arg(long, default_value = "search")]
    alpha: AlphaMode,
    #[command(flatten)]
    grid: GridArgs,
}

/// Experiment settings: a config file, with any key overridable by flag.
#[derive(Args, Clone)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    schemes: Vec<Scheme>,
    #[arg(long, value_delimiter = ',')]
    users: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    rate: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Vec<f64>,
    /// Feedback threshold, or `search`.
    #[arg(long)]
    alpha: Option<AlphaMode>,
    #[command(flatten)]
    grid: GridArgs,
    /// Monte Carlo trials per row (0 disables simulation).
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, help = format!("Simulation seed [default: ${SEED_ENV} or 1]"))]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Record per-row wall time.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    fit_lo_db: Option<f64>,
    #[arg(long)]
    fit_hi_db: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self, fallback: impl FnOnce() -> ExperimentConfig) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => fallback(),
        };
        if !self.schemes.is_empty() {
            cfg.schemes = self.schemes.clone();
        }
        if !self.users.is_empty() {
            cfg.users = self.users.clone();
        }
        if !self.rate.is_empty() {
            cfg.rates = self.rate.clone();
        }
        if !self.snr_db.is_empty() {
            cfg.snr_db = self.snr_db.clone();
        }
        cfg.alpha = self.alpha.unwrap_or(cfg.alpha);
        cfg.grid = self.grid.apply(cfg.grid);
        cfg.trials = self.trials.unwrap_or(cfg.trials);
        cfg.seed = self.seed.or(cfg.seed);
        cfg.output = self.output.clone().or(cfg.output);
        cfg.timing |= self.timing;
        cfg.fit_window.0 = self.fit_lo_db.unwrap_or(cfg.fit_window.0);
        cfg.fit_window.1 = self.fit_hi_db.unwrap_or(cfg.fit_window.1);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// COP of one scheme at one operating point, as a one-row CSV.
    CopEval {
        #[arg(long, default_value = "proposed_short")]
        scheme: Scheme,
        #[command(flatten)]
        point: PointArgs,
        /// Monte Carlo trials (0 skips simulation).
        #[arg(long, default_value_t = 0)]
        trials: u64,
        #[arg(long, help = format!("Simulation seed [default: ${SEED_ENV} or 1]"))]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Short-term (per-block) power optimization.
    OptimizeShort {
        #[command(flatten)]
        point: PointArgs,
    },
    /// Long-term (average) power optimization.
    OptimizeLong {
        #[command(flatten)]
        point: PointArgs,
    },
    /// Evaluate every point of a config file.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// COP slope against SNR from a sweep CSV, or from a sweep run on the spot.
    DiversityFit {
        /// Sweep CSV to read instead of running a sweep.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Only fit rows of this scheme.
        #[arg(long)]
        scheme: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Compare analytic COP with simulation; exit 3 on any 4-sigma mismatch.
    Validate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Scale simulated thresholds by 1 + perturb.
        #[arg(long, allow_hyphen_values = true)]
        perturb: Option<f64>,
    },
    /// Write fig1.csv .. fig7.csv.
    Figures {
        #[arg(long, default_value = "figures")]
        out_dir: PathBuf,
        /// Monte Carlo trials per row (0 drops perfect CSI).
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated subset, e.g. fig1,fig7.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[command(flatten)]
        grid: GridArgs,
    },
}

fn emit(output: Option<&Path>, body: &str) -> CliResult<()> {
    match output {
        Some(p) => write_atomic(p, body),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Io {
                path: "stdout".into(),
                source: e,
            }),
    }
}

fn system(point: &PointArgs) -> CliResult<SystemConfig> {
    let alpha = match point.alpha {
        AlphaMode::Fixed(a) => a,
        AlphaMode::Search => 1.0,
    };
    SystemConfig::from_snr_db(point.users, point.rate, point.snr_db, alpha)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn fmt_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.9e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::CopEval {
            scheme,
            point,
            trials,
            seed,
            output,
        } => {
            system(&point)?;
            let opts = EvalOptions {
                alpha: point.alpha,
                grid: point.grid.apply(GridOptions::default()),
                trials,
                seed: seed.map_or_else(default_seed, Ok)?,
                perturb: 0.0,
                timing: false,
            };
            let p = SweepPoint {
                scheme,
                users: point.users,
                rate: point.rate,
                snr_db: point.snr_db,
            };
            let row = evaluate(&p, &opts, opts.seed)?;
            emit(output.as_deref(), &rows_to_csv(&[row]))
        }
        Command::OptimizeShort { point } => {
            let c = system(&point)?;
            let s = match point.alpha {
                AlphaMode::Fixed(_) => optshort::solve_short(&c)?,
                AlphaMode::Search => {
                    optshort::search_alpha_short(&c, &point.grid.apply(GridOptions::default()))?
                }
            };
            let mut out = format!(
                "alpha = {:.9e}\ncop = {:.9e}\nnewton_steps = {}\ninfeasible_events = {:?}\n",
                s.alpha, s.cop.total, s.newton_steps, s.infeasible_events
            );
            for (n, col) in s.zetas.columns().iter().enumerate() {
                out.push_str(&format!(
                    "event {n}: p = {:.9e} kkt = {:.3e} zeta = {}\n",
                    s.cop.per_event[n].probability,
                    s.kkt_residual[n],
                    fmt_list(col)
                ));
            }
            emit(None, &out)
        }
        Command::OptimizeLong { point } => {
            let c = system(&point)?;
            let s = match point.alpha {
                AlphaMode::Fixed(_) => optlong::solve_long(&c)?,
                AlphaMode::Search => {
                    optlong::search_alpha_long(&c, &point.grid.apply(GridOptions::default()))?
                }
            };
            let mut out = format!(
                "alpha = {:.9e}\ncop = {:.9e}\nsurrogate = {:.9e}\nomega = {:.9e}\niterations = {}\ni_seq = {:?}\n",
                s.alpha, s.cop.total, s.surrogate, s.omega, s.iterations, s.i_seq
            );
            for (n, col) in s.zetas.columns().iter().enumerate() {
                out.push_str(&format!("event {n}: zeta = {}\n", fmt_list(col)));
            }
            emit(None, &out)
        }
        Command::Sweep { cfg } => {
            let cfg = cfg.resolve(ExperimentConfig::default)?;
            let rows = run_sweep(&cfg)?;
            emit(cfg.output.as_deref(), &rows_to_csv(&rows))
        }
        Command::DiversityFit { input, scheme, cfg } => {
            let (records, window, output) = match input {
                Some(path) => {
                    let text =
                        std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                    let recs = parse_csv(&text).map_err(|e| match e {
                        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
                        other => other,
                    })?;
                    let defaults = ExperimentConfig::default().fit_window;
                    let window = (
                        cfg.fit_lo_db.unwrap_or(defaults.0),
                        cfg.fit_hi_db.unwrap_or(defaults.1),
                    );
                    (recs, window, cfg.output)
                }
                None => {
                    let mut c = cfg.resolve(ExperimentConfig::default)?;
                    let output = c.output.take();
                    let csv = rows_to_csv(&run_sweep(&c)?);
                    (parse_csv(&csv)?, c.fit_window, output)
                }
            };
            let fits = fit_diversity(&records, window, scheme.as_deref())?;
            if fits.is_empty() {
                return Err(CliError::Config("no rows inside the SNR window".into()));
            }
            for f in fits.iter().filter(|f| f.fit.excluded > 0) {
                eprintln!(
                    "warning: {} K={} r0={}: {} zero-COP points excluded",
                    f.scheme, f.users, f.rate, f.fit.excluded
                );
            }
            emit(output.as_deref(), &fits_to_csv(&fits))
        }
        Command::Validate { cfg, perturb } => {
            let mut cfg = cfg.resolve(default_suite)?;
            cfg.perturb = perturb.unwrap_or(cfg.perturb);
            cfg.validate()?;
            let report = validate(&cfg)?;
            emit(cfg.output.as_deref(), &report.to_csv())?;
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::Validation(format!(
                    "{} of {} points beyond {} standard errors",
                    report.failures(),
                    report.checks.len(),
                    noma1b_cli::validate::SIGMA_LIMIT
                )))
            }
        }
        Command::Figures {
            out_dir,
            trials,
            seed,
            only,
            grid,
        } => {
            let names: Vec<&str> = if only.is_empty() {
                figures::FIGURES.to_vec()
            } else {
                only.iter().map(String::as_str).collect()
            };
            if let Some(bad) = names.iter().find(|n| !figures::FIGURES.contains(n)) {
                return Err(CliError::Config(format!("unknown figure '{bad}'")));
            }
            let seed = seed.map_or_else(default_seed, Ok)?;
            let grid = grid.apply(GridOptions::default());
            for path in figures::write_figures(&out_dir, &names, trials, seed, grid)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

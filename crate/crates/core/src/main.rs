use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use tomolab::experiments::{
    bounds_stream, chi2_bound_rows, haar_moment_rows, run_all, run_bound_suite, run_lower_bound_table, run_packing_suite,
    run_risk_curve, run_scaling_fit, run_shadow_discrimination, run_shadow_end_to_end, second_moment_rows,
    write_outputs, EstimatorKind, ExperimentConfig, ExperimentReport, RunMetadata, Verdict,
};
use tomolab::Result;

#[derive(Parser)]
#[command(name = "tomolab", version, about = "Single-copy tomography and classical shadows lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for report.json and the CSVs.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Start from the small preset instead of the defaults (ignored with --config).
    #[arg(long, global = true)]
    quick: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Frobenius risk curves for the configured estimators.
    #[command(alias = "tomography")]
    Risk {
        #[arg(long, value_enum)]
        estimator: Option<Estimator>,
    },
    /// n*(d) bisection and slope fit.
    Scaling {
        #[arg(long, value_enum)]
        estimator: Option<Estimator>,
    },
    /// Every Monte Carlo check against a closed form.
    Bounds,
    /// Haar moment checks only.
    Moments,
    /// Chi-squared functional checks only.
    Chi2,
    /// Greedy packings with exhaustive re-verification.
    Packing,
    /// Sample-mean shadows at the planned sample size.
    Shadows,
    /// Hidden-state identification on the shadow packing.
    Discriminate,
    /// Lower-bound tables.
    Tables,
    /// Every experiment in order.
    Selftest,
    /// Prints the effective config as TOML.
    Config,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Estimator {
    RandomBasis,
    Pauli,
}

impl From<Estimator> for EstimatorKind {
    fn from(e: Estimator) -> Self {
        match e {
            Estimator::RandomBasis => EstimatorKind::RandomBasis,
            Estimator::Pauli => EstimatorKind::Pauli,
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None if cli.quick => ExperimentConfig::quick(),
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn rows_report(name: &str, cfg: &ExperimentConfig, rows: Vec<tomolab::experiments::ReportRow>) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new(name, cfg.seed, &cfg.bounds)?;
    rows.into_iter().for_each(|r| rep.push(r));
    Ok(rep)
}

fn run(cli: &Cli, cfg: &ExperimentConfig, meta: &mut RunMetadata) -> Result<Vec<ExperimentReport>> {
    let kinds = |chosen: Option<Estimator>, configured: &[EstimatorKind]| match chosen {
        Some(e) => vec![e.into()],
        None => configured.to_vec(),
    };
    let mut reports = Vec::new();
    let mut timed = |name: &str, f: &mut dyn FnMut() -> Result<Vec<ExperimentReport>>| -> Result<()> {
        let t = Instant::now();
        let r = f()?;
        meta.wall_clock_s.insert(name.to_string(), t.elapsed().as_secs_f64());
        reports.extend(r);
        Ok(())
    };
    match &cli.command {
        Command::Risk { estimator } => {
            for kind in kinds(*estimator, &cfg.risk.estimators) {
                timed(&format!("risk-{}", kind.name()), &mut || Ok(vec![run_risk_curve(kind, cfg)?]))?;
            }
        }
        Command::Scaling { estimator } => {
            for kind in kinds(*estimator, &cfg.scaling.estimators) {
                let d_list = match kind {
                    EstimatorKind::RandomBasis => &cfg.scaling.random_basis_d,
                    EstimatorKind::Pauli => &cfg.scaling.pauli_d,
                };
                timed(&format!("scaling-{}", kind.name()), &mut || {
                    Ok(vec![run_scaling_fit(kind, cfg.scaling.eps, d_list, cfg)?])
                })?;
            }
        }
        Command::Bounds => timed("bounds", &mut || Ok(vec![run_bound_suite(cfg)?]))?,
        Command::Moments => timed("moments", &mut || {
            let b = &cfg.bounds;
            let s = bounds_stream(cfg.seed).child(0);
            Ok(vec![rows_report("moments", cfg, haar_moment_rows(&b.moment_d, b.moment_samples, b.moment_tol, &s)?)?])
        })?,
        Command::Chi2 => timed("chi2", &mut || {
            let b = &cfg.bounds;
            let mut rows = second_moment_rows(b, &bounds_stream(cfg.seed).child(1))?;
            rows.extend(chi2_bound_rows(b, &bounds_stream(cfg.seed).child(2))?);
            Ok(vec![rows_report("chi2", cfg, rows)?])
        })?,
        Command::Packing => timed("packing", &mut || Ok(vec![run_packing_suite(cfg)?]))?,
        Command::Shadows => timed("shadows", &mut || Ok(vec![run_shadow_end_to_end(cfg)?]))?,
        Command::Discriminate => timed("discriminate", &mut || {
            let dc = &cfg.discriminate;
            Ok(vec![run_shadow_discrimination(dc.d, dc.states, dc.eps, cfg)?])
        })?,
        Command::Tables => timed("tables", &mut || Ok(vec![run_lower_bound_table(cfg)?]))?,
        Command::Selftest => timed("selftest", &mut || run_all(cfg))?,
        Command::Config => unreachable!("handled before running"),
    }
    Ok(reports)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Command::Config = cli.command {
        return match cfg.to_toml_string() {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        };
    }
    let mut meta = RunMetadata::start();
    let reports = match run(&cli, &cfg, &mut meta) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut failed = 0;
    for rep in &reports {
        for row in &rep.rows {
            if row.verdict != Verdict::Info {
                println!("{:<5} {:<40} {}", format!("{:?}", row.verdict).to_uppercase(), row.claim_id, row.params);
            }
        }
        failed += rep.failures().count();
    }
    match write_outputs(&cli.out, &meta, &reports) {
        Ok(paths) => paths.iter().for_each(|p| eprintln!("wrote {}", p.display())),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if failed > 0 {
        eprintln!("{failed} check(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

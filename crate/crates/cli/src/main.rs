use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nonlocal_kpp::config::ExperimentConfig;
use nonlocal_kpp::experiment::{self, Experiment, TrajectoryFormat};
use nonlocal_kpp::validation;

#[derive(Parser)]
#[command(name = "nlkpp", version, about = "Fronts and speed bounds for nonlocal Fisher-KPP equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the ramp initial state and write trajectory snapshots.
    Simulate {
        #[arg(long, value_enum, default_value_t = Format::Bin)]
        format: Format,
    },
    /// Track level sets and fit front speeds.
    Speed,
    /// Formula speeds and the existence verdict.
    Bounds,
    /// Bisect the recursion for the spreading speed.
    Weinberger,
    /// Run the property suites; exit code 2 on failure.
    Validate,
    /// Run the sweep grid into results.csv.
    Sweep,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Bin,
    Csv,
}

fn load(cli: &Cli, fallback: Option<&str>) -> nonlocal_kpp::Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, fallback) {
        (Some(p), _) => ExperimentConfig::from_path(p)?,
        (None, Some(id)) => ExperimentConfig::for_gallery(id),
        (None, None) => {
            return Err(nonlocal_kpp::Error::Config {
                path: "<none>".into(),
                message: "this subcommand needs --config".into(),
            })
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn experiment(cli: &Cli) -> nonlocal_kpp::Result<Experiment> {
    let exp = Experiment::new(load(cli, None)?)?;
    for w in exp.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(exp)
}

fn run(cli: &Cli, out: &Path) -> nonlocal_kpp::Result<bool> {
    match &cli.command {
        Command::Simulate { format } => {
            let format = match format {
                Format::Bin => TrajectoryFormat::Binary,
                Format::Csv => TrajectoryFormat::Csv,
            };
            for p in experiment(cli)?.simulate(out, format)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Speed => {
            let exp = experiment(cli)?;
            let run = exp.fronts()?;
            let report = exp.write_speed(&run, out)?;
            for (tr, fit) in run.traces.iter().zip(&run.fits) {
                match fit {
                    Some(f) => println!("level {}: c = {:.5} +- {:.1e}", tr.level, f.c_measured, f.stderr),
                    None => println!("level {}: too few samples in the fit window", tr.level),
                }
                for w in &tr.window_warnings {
                    eprintln!("warning: {w}");
                }
            }
            println!("sandwich: {:?}", report.sandwich_holds(0.02));
        }
        Command::Bounds => {
            let report = experiment(cli)?.write_bounds(out)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Weinberger => {
            let exp = experiment(cli)?;
            let bracket = exp.weinberger()?;
            exp.write_weinberger(&bracket, out)?;
            println!("spreading speed in [{:.4}, {:.4}]", bracket.lo, bracket.hi);
        }
        Command::Validate => {
            let cfg = load(cli, Some("two_atom"))?;
            let v = &cfg.validate;
            let report = validation::run_suite(v.pairs, v.comparison_t, v.invariance_t, cfg.seed);
            for c in &report.checks {
                println!("{} {:<24} {:>7.2}s  {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.seconds, c.detail);
            }
            experiment::write_json(
                &out.join("validate.json"),
                &serde_json::json!({ "config_sha256": cfg.sha256(), "report": report }),
            )?;
            return Ok(report.passed);
        }
        Command::Sweep => {
            let cfg = load(cli, Some("two_atom"))?;
            let rows = experiment::sweep(&cfg, cli.jobs)?;
            let path = out.join("results.csv");
            experiment::write_results_csv(BufWriter::new(File::create(&path)?), &rows, &cfg.sha256())?;
            println!("wrote {} rows to {}", rows.len(), path.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // sweep builds its own pool; this covers the convolution inside single runs
        let _ = nonlocal_kpp::set_global_threads(jobs);
    }
    if let Err(e) = std::fs::create_dir_all(&cli.out) {
        eprintln!("error: cannot create {}: {e}", cli.out.display());
        return ExitCode::from(1);
    }
    match run(&cli, &cli.out) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

//! `rydex`: run one experiment from a TOML config and write its tables,
//! report and plots.

mod config;
mod output;
mod plot;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rydex::experiments::{self, Engine, ExperimentReport};

use config::{parse_config, parse_config_str, Experiment, Format, Resolved};

#[derive(Parser)]
#[command(name = "rydex", version, about = "Exciton transport in dressed Rydberg chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entanglement transfer over a designed chain.
    Transfer(RunArgs),
    /// Thouless pump of one exciton.
    Pump(RunArgs),
    /// Dimer and next-nearest bound-pair transport.
    Bound(RunArgs),
    /// Ballistic-to-diffusive crossover and the decay factorization check.
    Hrs(RunArgs),
    /// Band Chern numbers of the modulated chain.
    Chern(RunArgs),
    /// Dump effective-model coefficients.
    Derive(RunArgs),
    /// Run the invariant suite.
    Validate(RunArgs),
    /// Run whichever experiment the config file names.
    Run(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed of every ensemble.
    #[arg(long)]
    seed: Option<u64>,
    /// Ensemble size (disorder members or trajectories).
    #[arg(long, value_name = "K")]
    ensemble: Option<usize>,
    /// Engines to run; repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    engine: Vec<Engine>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Write SVG plots even when the config leaves them out.
    #[arg(long, overrides_with = "no_plot")]
    plot: bool,
    /// Skip SVG plots.
    #[arg(long)]
    no_plot: bool,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn load(experiment: Option<Experiment>, args: &RunArgs) -> Result<Resolved, String> {
    let mut r = match &args.config {
        Some(p) => parse_config(p).map_err(|e| e.to_string())?,
        None => {
            let exp = experiment.ok_or("`run` needs --config")?;
            parse_config_str(&format!("experiment = \"{}\"\n", exp.name())).map_err(|e| e.to_string())?
        }
    };
    if let Some(exp) = experiment {
        if r.config.experiment != exp {
            return Err(format!("config is for `{}`, not `{}`", r.config.experiment.name(), exp.name()));
        }
    }
    let mut overridden: Vec<String> = Vec::new();
    let c = &mut r.config;
    if let Some(s) = args.seed {
        c.seed = s;
        overridden.push("seed".into());
    }
    if !args.engine.is_empty() {
        c.engines = Some(args.engine.clone());
        overridden.push("engines".into());
    }
    if let Some(dir) = &args.out {
        c.output.dir = dir.clone();
        overridden.push("output.dir".into());
    }
    if let Some(t) = args.threads {
        c.threads = Some(t);
        overridden.push("threads".into());
    }
    if args.plot && !c.output.formats.contains(&Format::Svg) {
        c.output.formats.push(Format::Svg);
    }
    if args.no_plot {
        c.output.formats.retain(|f| *f != Format::Svg);
    }
    if let Some(k) = args.ensemble {
        if let Some(t) = c.transfer.as_mut() {
            t.ensemble = k;
            t.exact_ensemble = k;
            overridden.extend(["transfer.ensemble".into(), "transfer.exact_ensemble".into()]);
        } else if let Some(b) = c.bound.as_mut() {
            b.trajectories = k;
            overridden.push("bound.trajectories".into());
        } else if let Some(h) = c.hrs.as_mut() {
            h.trajectories = k;
            overridden.push("hrs.trajectories".into());
        } else {
            return Err(format!("`{}` has no ensemble to resize", c.experiment.name()));
        }
    }
    r.config = r.config.clone().resolve().map_err(|e| e.to_string())?;
    r.defaulted.retain(|k| !overridden.contains(k));
    Ok(r)
}

fn execute(r: &Resolved) -> rydex::Result<ExperimentReport> {
    let c = &r.config;
    let engines = c.engines.as_deref();
    match c.experiment {
        Experiment::Transfer => experiments::run_entanglement_transfer(&c.transfer.as_ref().expect("resolved").to_core(c.seed)),
        Experiment::Pump => experiments::run_thouless_pump(&c.pump.as_ref().expect("resolved").to_core(engines)),
        Experiment::Bound => experiments::run_bound_state_transport(&c.bound.as_ref().expect("resolved").to_core(c.seed, engines)),
        Experiment::Hrs => experiments::run_hrs_crossover(&c.hrs.as_ref().expect("resolved").to_core(c.seed, engines)),
        Experiment::Chern => experiments::run_chern(&c.chern.as_ref().expect("resolved").to_core()),
        Experiment::Derive => experiments::run_derive(&c.derive.as_ref().expect("resolved").to_core()),
        Experiment::Validate => experiments::run_invariant_suite(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Transfer(a) => (Some(Experiment::Transfer), a),
        Command::Pump(a) => (Some(Experiment::Pump), a),
        Command::Bound(a) => (Some(Experiment::Bound), a),
        Command::Hrs(a) => (Some(Experiment::Hrs), a),
        Command::Chern(a) => (Some(Experiment::Chern), a),
        Command::Derive(a) => (Some(Experiment::Derive), a),
        Command::Validate(a) => (Some(Experiment::Validate), a),
        Command::Run(a) => (None, a),
    };
    let resolved = match load(experiment, &args) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    if args.print_config {
        print!("{}", output::resolved_toml(&resolved));
        return ExitCode::SUCCESS;
    }
    if let Some(n) = resolved.config.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(format!("thread pool: {e}"));
        }
    }
    let report = match execute(&resolved) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };

    let fmt = &resolved.config.output.formats;
    let dir = &resolved.config.output.dir;
    if let Err(e) = output::write_data(dir, &resolved, &report, fmt.contains(&Format::Csv), fmt.contains(&Format::Json)) {
        return fail(format!("{}: {e}", dir.display()));
    }
    if fmt.contains(&Format::Svg) {
        for (name, svg) in plot::render(&report) {
            if let Err(e) = std::fs::write(dir.join(&name), svg) {
                return fail(format!("{name}: {e}"));
            }
        }
    }

    for c in &report.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    println!("wrote {}", dir.display());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

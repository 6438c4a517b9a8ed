//! Command-line driver: config-driven runs, convergence studies, config
//! validation and default printing. Exit codes: 0 success, 2 config error,
//! 3 solver failure, 4 I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use erosim_core::analysis::{front_positions, FrontLog};
use erosim_core::config::{config_hash, Config};
use erosim_core::error::Error as CoreError;
use erosim_core::output::{
    unix_now, write_front_log, write_snapshot, write_study_table, RunManifest,
};
use erosim_core::physics::{LawChoice, ScenarioKind};
use erosim_core::solver::{Simulation, StepOutcome};

#[derive(Parser)]
#[command(name = "erosim", version, about = "Carbonate-stone erosion simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LawArg {
    Symmetric,
    Asymmetric,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Standard1d,
    Standard2d,
    Catastrophic1d,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a config file and write snapshots and front logs.
    Run {
        config: PathBuf,
        /// Output directory (overrides config; EROSIM_OUT_DIR overrides both).
        #[arg(short, long)]
        out_dir: Option<PathBuf>,
        /// Absorption-law override.
        #[arg(long)]
        law: Option<LawArg>,
        /// Snapshot times in seconds, comma separated (overrides config).
        #[arg(long, value_delimiter = ',')]
        snapshot_times: Option<Vec<f64>>,
        /// Worker threads for internal parallel sections (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a grid-refinement convergence study and write the order table.
    Study {
        config: PathBuf,
        #[arg(short, long)]
        out_dir: Option<PathBuf>,
        /// Number of refinement levels (overrides config).
        #[arg(long)]
        refinements: Option<usize>,
        /// Use the manufactured-solution variant.
        #[arg(long)]
        mms: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and validate a config file.
    ValidateConfig { config: PathBuf },
    /// Print a complete default config to stdout.
    PrintDefaults {
        #[arg(long, default_value = "standard-1d")]
        kind: KindArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            out_dir,
            law,
            snapshot_times,
            threads,
        } => cmd_run(&config, out_dir, law, snapshot_times, threads),
        Command::Study {
            config,
            out_dir,
            refinements,
            mms,
            threads,
        } => cmd_study(&config, out_dir, refinements, mms, threads),
        Command::ValidateConfig { config } => cmd_validate(&config),
        Command::PrintDefaults { kind } => {
            let kind = match kind {
                KindArg::Standard1d => ScenarioKind::Standard1d,
                KindArg::Standard2d => ScenarioKind::Standard2d,
                KindArg::Catastrophic1d => ScenarioKind::Catastrophic1d,
            };
            print!("{}", Config::default_for(kind).to_toml());
            0
        }
    };
    ExitCode::from(code)
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_IO: u8 = 4;

fn report(err: &anyhow::Error, code: u8) -> u8 {
    eprintln!("error: {err:#}");
    code
}

fn setup_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn resolve_out_dir(cfg: &Config, flag: Option<PathBuf>) -> PathBuf {
    if let Ok(env) = std::env::var("EROSIM_OUT_DIR") {
        return PathBuf::from(env);
    }
    flag.unwrap_or_else(|| PathBuf::from(&cfg.output.dir))
}

fn load_config(path: &Path) -> Result<(Config, String), u8> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return Err(EXIT_IO);
        }
    };
    let hash = config_hash(&bytes);
    let text = String::from_utf8_lossy(&bytes);
    match Config::from_toml(&text) {
        Ok(cfg) => Ok((cfg, hash)),
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            Err(EXIT_CONFIG)
        }
    }
}

fn cmd_validate(path: &Path) -> u8 {
    match load_config(path) {
        Ok(_) => {
            println!("ok: {}", path.display());
            0
        }
        Err(code) => code,
    }
}

fn cmd_run(
    path: &Path,
    out_dir: Option<PathBuf>,
    law: Option<LawArg>,
    snapshot_times: Option<Vec<f64>>,
    threads: Option<usize>,
) -> u8 {
    setup_threads(threads);
    let (mut cfg, hash) = match load_config(path) {
        Ok(v) => v,
        Err(code) => return code,
    };
    if let Some(law) = law {
        cfg.absorption.law = match law {
            LawArg::Symmetric => LawChoice::Symmetric,
            LawArg::Asymmetric => LawChoice::Asymmetric,
        };
    }
    if let Some(times) = snapshot_times {
        cfg.output.snapshot_times = times;
    }
    let dir = resolve_out_dir(&cfg, out_dir);
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("error: cannot create {}: {e}", dir.display());
        return EXIT_IO;
    }

    let scenario = match cfg.scenario() {
        Ok(s) => s,
        Err(e) => return report(&anyhow::Error::new(e).context("building scenario"), EXIT_CONFIG),
    };
    let started = unix_now();
    let mut manifest = RunManifest {
        config_hash: hash,
        scenario: scenario.name.clone(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        started,
        finished: started,
        outputs: Vec::new(),
        status: "failed".into(),
        error: None,
    };

    let result = run_scenario(&cfg, &scenario, &dir, &mut manifest);
    manifest.finished = unix_now();
    let code = match result {
        Ok(()) => {
            manifest.status = "ok".into();
            0
        }
        Err((code, e)) => {
            manifest.error = Some(format!("{e:#}"));
            report(&e, code)
        }
    };
    manifest.outputs.push("manifest.json".into());
    if let Err(e) = manifest.write(&dir.join("manifest.json")) {
        eprintln!("error: cannot write manifest: {e}");
        return EXIT_IO;
    }
    code
}

fn run_scenario(
    cfg: &Config,
    scenario: &erosim_core::ScenarioF64,
    dir: &Path,
    manifest: &mut RunManifest,
) -> Result<(), (u8, anyhow::Error)> {
    let opts = cfg.solver_options();
    let mut sim = Simulation::from_scenario(scenario, opts)
        .map_err(|e| (EXIT_CONFIG, anyhow::Error::new(e).context("initializing simulation")))?;

    let mut log = FrontLog::<f64>::default();
    log.record(0.0, front_positions(&sim.grid, &sim.lsf, &sim.cls));

    let mut snapshots: Vec<f64> = cfg.output.snapshot_times.clone();
    snapshots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    snapshots.retain(|&t| t <= scenario.duration + 0.5 * scenario.dt);
    let mut next_snapshot = 0usize;
    let diag = cfg.output.co2_diagnostic.then_some(scenario.params.k_c);

    let mut step_index = 0usize;
    let io_err = |e: CoreError| (EXIT_IO, anyhow::Error::new(e).context("writing outputs"));
    loop {
        if sim.state.t >= scenario.duration - 0.5 * sim.dt_current() {
            break;
        }
        let outcome = sim.step().map_err(|e| {
            (
                EXIT_SOLVER,
                anyhow::Error::new(e).context(format!("step at t = {}", sim.state.t)),
            )
        });
        let outcome = match outcome {
            Ok(o) => o,
            Err(err) => {
                // keep partial outputs
                let _ = write_front_log(&dir.join("front.dat"), &log, sim.grid.dim);
                manifest.outputs.push("front.dat".into());
                return Err(err);
            }
        };
        step_index += 1;
        if step_index % cfg.output.front_log_every == 0 {
            log.record(sim.state.t, front_positions(&sim.grid, &sim.lsf, &sim.cls));
        }
        while next_snapshot < snapshots.len()
            && sim.state.t >= snapshots[next_snapshot] - 0.5 * sim.dt_current()
        {
            let name = format!("snapshot_t{:.0}.dat", snapshots[next_snapshot]);
            write_snapshot(&dir.join(&name), &sim.grid, &sim.state, diag).map_err(io_err)?;
            manifest.outputs.push(name);
            next_snapshot += 1;
        }
        if matches!(outcome, StepOutcome::Complete) {
            break;
        }
    }

    let name = "snapshot_final.dat".to_string();
    write_snapshot(&dir.join(&name), &sim.grid, &sim.state, diag).map_err(io_err)?;
    manifest.outputs.push(name);
    write_front_log(&dir.join("front.dat"), &log, sim.grid.dim).map_err(io_err)?;
    manifest.outputs.push("front.dat".into());

    // headline numbers for scripted use
    for (side, k) in [("left", 0usize), ("right", 1usize)] {
        let side_enum = erosim_core::analysis::SIDES[k];
        if let Some(e) = log.erosion(side_enum, log.len() - 1) {
            println!("eroded_{side}_cm = {e:.13}");
        }
        if let Some(r) = log.mean_recession_rate(side_enum) {
            println!("mean_rate_{side}_cm_per_h = {r:.6e}");
        }
    }
    Ok(())
}

fn cmd_study(
    path: &Path,
    out_dir: Option<PathBuf>,
    refinements: Option<usize>,
    mms: bool,
    threads: Option<usize>,
) -> u8 {
    setup_threads(threads);
    let (mut cfg, _hash) = match load_config(path) {
        Ok(v) => v,
        Err(code) => return code,
    };
    if let Some(r) = refinements {
        cfg.study.refinements = r;
    }
    if mms {
        cfg.study.mms = true;
    }
    if cfg.study.refinements < 3 {
        eprintln!("error: a study needs at least 3 refinement levels");
        return EXIT_CONFIG;
    }
    let dir = resolve_out_dir(&cfg, out_dir);
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("error: cannot create {}: {e}", dir.display());
        return EXIT_IO;
    }
    let opts = cfg.solver_options();
    let (rows, err) = if cfg.study.mms {
        erosim_core::analysis::mms_study::<f64>(
            100,
            60.0,
            cfg.study.refinements,
            cfg.study.horizon,
            &opts,
        )
    } else {
        let scenario = match cfg.scenario() {
            Ok(s) => s,
            Err(e) => {
                return report(&anyhow::Error::new(e).context("building scenario"), EXIT_CONFIG)
            }
        };
        erosim_core::analysis::convergence_study(
            &scenario,
            cfg.study.refinements,
            cfg.study.horizon,
            &opts,
        )
    };
    let table = dir.join("order.dat");
    if let Err(e) = write_study_table(&table, &rows)
        .with_context(|| format!("writing {}", table.display()))
    {
        return report(&e, EXIT_IO);
    }
    for r in &rows {
        println!(
            "N={} dx={:.4e} dt={:.4e} err_theta={:.4e} order_theta={} err_ca={:.4e} order_ca={}",
            r.cells,
            r.dx,
            r.dt,
            r.err_theta,
            r.order_theta.map_or("-".into(), |o| format!("{o:.3}")),
            r.err_acid,
            r.order_acid.map_or("-".into(), |o| format!("{o:.3}")),
        );
    }
    match err {
        Some(e) => report(
            &anyhow::Error::new(e).context("study aborted; partial table kept"),
            EXIT_SOLVER,
        ),
        None => 0,
    }
}

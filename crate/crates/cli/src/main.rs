use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use xagent_core::agent::{
    run_baseline_sweep, run_mission_algorithm1, run_mission_algorithm2, trajectory_svg, MissionReport,
};
use xagent_core::causal::{run_experiment, Description, DEFAULT_DESCRIPTION};
use xagent_core::control::{Outcome, PController};
use xagent_core::demo::{run_demonstrator, DemoConfig, DemoError, Demonstration};
use xagent_core::optimize::SearchSpec;
use xagent_core::scaling::{scaling_row, ScalingSetup};
use xagent_core::{Kernel, WorldState};

mod config;

use config::{CausalArgs, CommonArgs, RunConfig};

/// Exit code for a run that completed but whose task failed.
const EXIT_TASK_FAIL: u8 = 1;
/// Exit code for usage, configuration and I/O errors.
const EXIT_ERROR: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "xagent", version, about = "Video-demonstration agents and causal transfer experiments")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drive the scripted demonstrator through a map and save its frames.
    RecordDemo,
    /// Infer waypoints from a demonstration and track them.
    RunMission {
        /// Demonstration directory written by `record-demo`.
        #[arg(long)]
        demo: PathBuf,
        /// 2 teleports to search candidates; 1 drives to them.
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
        alg: u8,
        /// Run the exhaustive tile sweep instead of the video agent.
        #[arg(long, conflicts_with = "alg")]
        baseline: bool,
    },
    /// Compare agent and sweep interaction counts across demonstration lengths.
    Scaling {
        /// Demonstration lengths, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        sizes: Option<Vec<usize>>,
    },
    /// Learn the road force from source cars and transfer it to a new car.
    Causal {
        #[command(flatten)]
        args: CausalArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::RecordDemo => record_demo(&RunConfig::resolve(&cli.common, None)?),
        Command::RunMission { demo, alg, baseline } => {
            run_mission(&RunConfig::resolve(&cli.common, None)?, &demo, alg, baseline)
        }
        Command::Scaling { sizes } => scaling(
            &RunConfig::resolve(&cli.common, None)?,
            sizes.unwrap_or_else(|| vec![10, 20, 40]),
        ),
        Command::Causal { args } => causal(&RunConfig::resolve(&cli.common, Some(&args))?),
    }
}

fn demo_config(cfg: &RunConfig) -> Result<DemoConfig> {
    Ok(DemoConfig {
        stride: cfg.stride,
        noise: cfg.noise,
        extra_sigma: cfg.demo_noise_sigma,
        time_limit: cfg.time_limit,
        ctl: PController::new(cfg.kp, cfg.eps_wp)?,
    })
}

fn record_demo(cfg: &RunConfig) -> Result<u8> {
    let (map, id) = cfg.load_map(None)?;
    anyhow::ensure!(!map.path().is_empty(), "map {id} has no `wp` lines to demonstrate");
    let out = cfg.out_dir("demo");
    let mut world = WorldState::new(map.clone());
    let demo = match run_demonstrator(&mut world, map.path(), &demo_config(cfg)?, &id) {
        Ok(d) => d,
        Err(DemoError::DemonstratorFailed(msg)) => {
            eprintln!("demonstrator failed: {msg}");
            return Ok(EXIT_TASK_FAIL);
        }
        Err(e) => return Err(e.into()),
    };
    demo.save(&out).with_context(|| format!("writing demonstration to {}", out.display()))?;
    println!("recorded {} frames (L = {}) to {}", demo.frames.len(), demo.len_l(), out.display());
    Ok(0)
}

fn run_mission(cfg: &RunConfig, demo_dir: &Path, alg: u8, baseline: bool) -> Result<u8> {
    let demo = Demonstration::load(demo_dir)
        .with_context(|| format!("loading demonstration from {}", demo_dir.display()))?;
    let (map, _) = cfg.load_map(Some(&demo.map_id))?;
    let mut world = WorldState::new(map.clone());
    let report: MissionReport = if baseline {
        let budget = 4 * (map.width() * map.height()) as u64;
        let mut r = run_baseline_sweep(&mut world, budget)?;
        r.map_id = demo.map_id.clone();
        r.demo_trajectory = demo.positions.clone();
        r
    } else {
        let spec = SearchSpec {
            radius: cfg.radius,
            step: cfg.step,
            n_avg: cfg.n_avg,
            noise: cfg.noise,
        };
        let kernel = Kernel::gaussian(cfg.sigma)?;
        let ctl = PController::new(cfg.kp, cfg.eps_wp)?;
        let run = if alg == 1 { run_mission_algorithm1 } else { run_mission_algorithm2 };
        run(&mut world, &demo, &spec, &kernel, &ctl, cfg.time_limit)?
    };

    let out = cfg.out_dir("mission");
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("report.json"), report.to_json() + "\n")?;
    fs::write(out.join("trajectory.svg"), trajectory_svg(&map, &report))?;

    let outcome = match report.outcome {
        Outcome::Success => "success",
        Outcome::Fail => "fail",
    };
    println!(
        "{outcome}: {} interactions, max waypoint error {:.3}, report in {}",
        report.interactions_total,
        report.max_waypoint_error(),
        out.display()
    );
    Ok(if report.outcome == Outcome::Success { 0 } else { EXIT_TASK_FAIL })
}

fn scaling(cfg: &RunConfig, sizes: Vec<usize>) -> Result<u8> {
    let params = match &cfg.map {
        Some(_) => cfg.load_map(None)?.0.params(),
        None => {
            let mut p = xagent_core::world::MapParams::default();
            if let Some(seed) = cfg.seed {
                p.seed = seed;
            }
            p
        }
    };
    let setup = ScalingSetup {
        params,
        demo: demo_config(cfg)?,
        spec: SearchSpec {
            radius: cfg.radius,
            step: cfg.step,
            n_avg: cfg.n_avg,
            noise: cfg.noise,
        },
        kernel: Kernel::gaussian(cfg.sigma)?,
        ctl: PController::new(cfg.kp, cfg.eps_wp)?,
        time_limit: cfg.time_limit,
    };
    let mut csv = String::from("l,side,agent_interactions,baseline_interactions,ratio\n");
    for l in sizes {
        let row = scaling_row(l, &setup).with_context(|| format!("scaling run for L = {l}"))?;
        writeln!(
            csv,
            "{},{},{},{},{:.6}",
            row.l,
            row.side,
            row.agent_interactions,
            row.baseline_interactions,
            row.ratio()
        )?;
    }
    let out = cfg.out_dir("scaling");
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("scaling.csv");
    fs::write(&path, &csv)?;
    print!("{csv}");
    Ok(0)
}

fn causal(cfg: &RunConfig) -> Result<u8> {
    let text = match &cfg.description {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        None => DEFAULT_DESCRIPTION.to_string(),
    };
    let description: Description = text.parse().context("parsing description")?;
    let exp = run_experiment(&description, &cfg.causal)?;

    let out = cfg.out_dir("causal");
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(
        out.join("causal_report.json"),
        serde_json::to_string_pretty(&exp.report)? + "\n",
    )?;
    for (i, (_, log)) in exp.source_logs.iter().enumerate() {
        log.save(&out.join(format!("source_{}.csv", i + 1)))?;
    }
    exp.target_log.save(&out.join("target.csv"))?;
    exp.naive_log.save(&out.join("naive.csv"))?;

    let r = &exp.report;
    println!(
        "recovery {:.4}, prediction {:.4}, rms transfer {:.4} vs naive {:.4} (ratio {:.3})",
        r.recovery_rel_l2, r.prediction_rel_l2, r.rms_transfer, r.rms_naive, r.rms_ratio
    );
    Ok(0)
}

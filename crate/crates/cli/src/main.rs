use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rtsc_core::cases;
use rtsc_core::dynamics::{classify_stability, run_tds, write_trajectory, OperatingPoint, DEFAULT_INSTABILITY_SPREAD};
use rtsc_core::grid::{parse_case, NetworkCase};
use rtsc_core::opf::DispatchSolution;
use rtsc_core::pipeline::{
    estimate_cct_cmd, evaluate_robustness, offline_build, online_dispatch, reduce_scenarios, solve_base_opf, write_cct_report,
    write_robustness_report, write_run_report, write_scenario_scatter, OfflineDatabase, PipelineConfig,
};
use rtsc_core::scenario::{write_scenarios, Horizon, PredictionInterval, Scenario};
use rtsc_core::sime::{build_omib, compute_margin, identify_critical_machines};

#[derive(Parser)]
#[command(name = "rtsc", version, about = "Robust transient-stability-constrained OPF with power flow routers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Case file, or `desk9` / `smib` for the shipped cases.
    #[arg(long, default_value = "desk9")]
    case: String,
    /// Pipeline TOML; the shipped settings for `smib`, else the desk
    /// settings, when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct DispatchArg {
    /// Dispatch JSON (as written by online-dispatch); the base OPF when absent.
    #[arg(long)]
    dispatch: Option<PathBuf>,
    /// Contingency index in the config.
    #[arg(long, default_value_t = 0)]
    contingency: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntervalKind {
    DayAhead,
    ShortTerm,
}

#[derive(Subcommand)]
enum Command {
    /// Sample, reduce, solve the base OPF and store stability cuts.
    OfflineBuild(Common),
    /// Dispatch from a stored database without any simulation.
    OnlineDispatch {
        #[command(flatten)]
        common: Common,
        /// Database directory from offline-build.
        #[arg(long)]
        db: PathBuf,
    },
    /// One fault simulation with OMIB margin.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dispatch: DispatchArg,
        /// Clearing time override, s.
        #[arg(long)]
        t_clear: Option<f64>,
    },
    /// Critical clearing time from OMIB margins.
    Cct {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dispatch: DispatchArg,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        bracket: Option<Vec<f64>>,
    },
    /// Monte-Carlo robustness degree of a dispatch.
    EvaluateRobustness {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dispatch: DispatchArg,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, value_enum, default_value = "short-term")]
        interval: IntervalKind,
    },
    /// Sample and reduce wind scenarios.
    ReduceScenarios(Common),
}

fn load_case(spec: &str) -> Result<NetworkCase> {
    let text = match spec {
        "desk9" if !Path::new(spec).is_file() => cases::DESK9.to_string(),
        "smib" if !Path::new(spec).is_file() => cases::SMIB.to_string(),
        path => fs::read_to_string(path).with_context(|| format!("reading case {path}"))?,
    };
    Ok(parse_case(&text)?)
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::from_toml(&fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?)?,
        None if common.case == "smib" => PipelineConfig::from_toml(cases::SMIB_CONFIG)?,
        None => PipelineConfig::from_toml(cases::DESK9_CONFIG)?,
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_dispatch(case: &NetworkCase, cfg: &PipelineConfig, arg: &DispatchArg) -> Result<DispatchSolution> {
    match &arg.dispatch {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("reading dispatch {}", p.display()))?)?),
        None => {
            let (_, reduced, _) = reduce_scenarios(case, cfg)?;
            Ok(solve_base_opf(case, &reduced, cfg)?)
        }
    }
}

fn forecast(case: &NetworkCase) -> Scenario {
    Scenario {
        p_w: case.wind_forecast(),
        probability: 1.0,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::OfflineBuild(common) => {
            let case = load_case(&common.case)?;
            let cfg = load_config(&common)?;
            let db = offline_build(&case, &cfg)?;
            db.save(&common.out)?;
            println!(
                "{} records ({} failed) over {} scenarios reduced from {}",
                db.records.len(),
                db.failures().count(),
                db.scenarios.len(),
                db.metadata.samples
            );
        }
        Command::OnlineDispatch { common, db } => {
            let cfg = load_config(&common)?;
            let db = OfflineDatabase::load(&db)?;
            let short_term = cfg.short_term_interval(&db.case);
            let report = online_dispatch(&db, &short_term, &cfg)?;
            if report.tds_calls != 0 {
                bail!("online stage ran {} simulations", report.tds_calls);
            }
            write_run_report(&common.out, &report)?;
            write_scenario_scatter(&common.out.join("scenarios.dat"), &db.scenarios, &report.selected)?;
            println!(
                "cost {:.2} $/h ({:+.3}% vs base), {} scenarios, {} cuts{}",
                report.fuel_cost,
                report.cost_delta_pct,
                report.selected.len(),
                report.active_cuts,
                if report.fallback { ", nearest-scenario fallback" } else { "" }
            );
        }
        Command::Simulate { common, dispatch, t_clear } => {
            let case = load_case(&common.case)?;
            let cfg = load_config(&common)?;
            let sol = load_dispatch(&case, &cfg, &dispatch)?;
            let mut fault = cfg.contingencies.get(dispatch.contingency).context("no such contingency")?.event();
            if let Some(t) = t_clear {
                fault = fault.with_clearing(t);
            }
            let op = OperatingPoint::from_dispatch(&sol);
            let traj = run_tds(&case, &op, &forecast(&case), &fault, &cfg.simulation)?;
            let stability = classify_stability(&traj, DEFAULT_INSTABILITY_SPREAD);
            let grouping = identify_critical_machines(&traj)?;
            let margin = compute_margin(&build_omib(&traj, &grouping)?);
            fs::create_dir_all(&common.out)?;
            fs::write(common.out.join("trajectory.dat"), write_trajectory(&traj))?;
            fs::write(common.out.join("trajectory.bin"), traj.to_bytes()?)?;
            let summary = serde_json::json!({ "fault": fault, "stability": stability, "grouping": grouping, "margin": margin });
            fs::write(common.out.join("simulation.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
            println!("{stability:?}, margin {:.4} ({:?})", margin.eta, margin.class);
        }
        Command::Cct { common, dispatch, bracket } => {
            let case = load_case(&common.case)?;
            let cfg = load_config(&common)?;
            let sol = load_dispatch(&case, &cfg, &dispatch)?;
            let cont = cfg.contingencies.get(dispatch.contingency).context("no such contingency")?;
            let bracket = bracket.map_or(cfg.robustness.cct_bracket, |b| (b[0], b[1]));
            let op = OperatingPoint::from_dispatch(&sol);
            let report = estimate_cct_cmd(&case, &op, &forecast(&case), cont, bracket, &cfg.simulation)?;
            write_cct_report(&common.out, &report)?;
            println!("cct {:.4} s", report.cct);
        }
        Command::EvaluateRobustness {
            common,
            dispatch,
            count,
            interval,
        } => {
            let case = load_case(&common.case)?;
            let cfg = load_config(&common)?;
            let sol = load_dispatch(&case, &cfg, &dispatch)?;
            let iv = match interval {
                IntervalKind::DayAhead => PredictionInterval::from_case(&case, Horizon::DayAhead),
                IntervalKind::ShortTerm => cfg.short_term_interval(&case),
            };
            let op = OperatingPoint::from_dispatch(&sol);
            let report = evaluate_robustness(
                &case,
                &op,
                &iv,
                &cfg.contingencies,
                count.unwrap_or(cfg.robustness.count),
                cfg.robustness_seed(),
                &cfg.simulation,
                Some(cfg.robustness.cct_bracket),
            )?;
            write_robustness_report(&common.out, &report)?;
            println!("robustness {:.4} ({} of {})", report.robustness, report.stable_count, report.scenario_count);
        }
        Command::ReduceScenarios(common) => {
            let case = load_case(&common.case)?;
            let cfg = load_config(&common)?;
            let (sampled, reduced, bound) = reduce_scenarios(&case, &cfg)?;
            fs::create_dir_all(&common.out)?;
            fs::write(common.out.join("sampled.txt"), write_scenarios(&sampled))?;
            fs::write(common.out.join("reduced.txt"), write_scenarios(&reduced))?;
            write_scenario_scatter(&common.out.join("sampled.dat"), &sampled, &reduced.parent_indices)?;
            println!("{} sampled (bound {bound}), {} kept", sampled.len(), reduced.len());
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    run(Cli::parse())
}

//! `multipath`: plan, generate workloads, simulate and report.
//!
//! Exit codes: 0 on success, 2 when configuration or inputs fail to load or
//! validate, 3 when a run fails.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use multipath::config::{preset, RunConfig};
use multipath::experiment::{plan_config, Experiment, PolicyRun, MULTI_PATH_POLICY};
use multipath::hardware::{fit_affine, read_measurements_csv};
use multipath::metrics::{scaling_estimate, write_reports_csv, SimulationReport};
use multipath::planner::{achievable_accuracy, MappingSet};
use multipath::scheduler::write_records_jsonl;
use multipath::workload::{
    gen_id_trace, gen_queries, read_queries_jsonl, write_ids_jsonl, write_queries_jsonl,
};

#[derive(Parser)]
#[command(
    name = "multipath",
    version,
    about = "Multi-path embedding serving planner and simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Map representations onto platforms and write the mapping as JSON.
    Plan {
        /// Run config path, or `preset:<name>` for a shipped preset.
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a query trace through a mapping and write records and reports.
    Simulate {
        #[arg(long)]
        config: String,
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Also run every mapped path on its own and write a comparison table.
        #[arg(long)]
        baselines: bool,
    },
    /// Generate the query trace (and optionally the id-access trace).
    GenWorkload {
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ids: Option<PathBuf>,
    },
    /// Fit an affine latency model to `n,latency_ms` measurements.
    Profile {
        #[arg(long)]
        csv: PathBuf,
    },
    /// Execution-time reduction from removing inter-node communication.
    Scaling {
        /// Fraction of run time spent communicating.
        #[arg(long)]
        comm: f64,
        /// Compute added to replace it, as a fraction of run time.
        #[arg(long)]
        overhead: f64,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn invalid<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure {
        code: 2,
        error: e.into(),
    }
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure {
        code: 3,
        error: e.into(),
    }
}

type CmdResult = Result<(), Failure>;

fn load_config(spec: &str) -> anyhow::Result<RunConfig> {
    match spec.strip_prefix("preset:") {
        Some(name) => Ok(preset(name)?),
        None => RunConfig::load(Path::new(spec)).with_context(|| format!("config `{spec}`")),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(runtime)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(runtime)
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", path.display()))
        .map_err(runtime)
}

fn mb(bytes: u64) -> f64 {
    bytes as f64 / 1e6
}

fn cmd_plan(config: &str, out: &Path) -> CmdResult {
    let cfg = load_config(config).map_err(invalid)?;
    if cfg.platforms.is_empty() {
        log::warn!("config has no platforms; the mapping will be empty");
    }
    let mapping = plan_config(&cfg);
    let json = serde_json::to_string_pretty(&mapping).map_err(runtime)?;
    write_text(out, &(json + "\n"))?;
    for p in &mapping.platforms {
        let held: Vec<&str> = mapping
            .entries_on(&p.name)
            .map(|e| e.rep_id.as_str())
            .collect();
        println!(
            "{}: {:.3} / {:.3} MB used [{}]",
            p.name,
            mb(p.used_bytes),
            mb(p.capacity_bytes),
            held.join(", ")
        );
    }
    match achievable_accuracy(&mapping) {
        Ok(acc) => println!("achievable accuracy: {:.3}%", acc * 100.0),
        Err(_) => println!("achievable accuracy: n/a (no paths)"),
    }
    Ok(())
}

fn print_table(runs: &[&SimulationReport]) {
    println!(
        "{:<28} {:>14} {:>10} {:>10} {:>10}",
        "policy", "correct/s", "sla_viol", "p99_ms", "span_s"
    );
    for r in runs {
        println!(
            "{:<28} {:>14.1} {:>10.4} {:>10.3} {:>10.3}",
            r.policy,
            r.throughput_correct_predictions,
            r.sla_violation_rate,
            r.p99_latency_ms,
            r.span_seconds
        );
    }
}

fn cmd_simulate(
    config: &str,
    mapping: &Path,
    trace: &Path,
    out: &Path,
    baselines: bool,
) -> CmdResult {
    let cfg = load_config(config).map_err(invalid)?;
    let mapping: MappingSet = File::open(mapping)
        .map_err(anyhow::Error::from)
        .and_then(|f| Ok(serde_json::from_reader(BufReader::new(f))?))
        .with_context(|| format!("mapping `{}`", mapping.display()))
        .map_err(invalid)?;
    let queries = File::open(trace)
        .map_err(anyhow::Error::from)
        .and_then(|f| Ok(read_queries_jsonl(BufReader::new(f))?))
        .with_context(|| format!("trace `{}`", trace.display()))
        .map_err(invalid)?;
    multipath::experiment::check_inputs(&cfg, &mapping, &queries)
        .context("mapping and trace do not match the config")
        .map_err(invalid)?;

    let experiment = Experiment::new(&cfg).map_err(runtime)?;
    let main = experiment
        .run(MULTI_PATH_POLICY, &mapping, &queries)
        .map_err(runtime)?;
    let names = &cfg.outputs;
    let mut w = create(&out.join(&names.records))?;
    write_records_jsonl(&mut w, &main.records).map_err(runtime)?;
    w.flush().map_err(runtime)?;
    write_text(
        &out.join(&names.report),
        &(main.report.to_json_pretty().map_err(runtime)? + "\n"),
    )?;
    let mut w = create(&out.join(&names.report_csv))?;
    write_reports_csv(&mut w, std::slice::from_ref(&main.report)).map_err(runtime)?;

    let mut shown = vec![&main.report];
    let extra: Vec<PolicyRun>;
    if baselines {
        extra = experiment.baselines(&mapping, &queries).map_err(runtime)?;
        shown.extend(extra.iter().map(|r| &r.report));
        let all: Vec<SimulationReport> = shown.iter().map(|r| (*r).clone()).collect();
        let mut w = create(&out.join(&names.baselines_csv))?;
        write_reports_csv(&mut w, &all).map_err(runtime)?;
    }
    print_table(&shown);
    Ok(())
}

fn cmd_gen_workload(config: &str, out: &Path, ids: Option<&Path>) -> CmdResult {
    let cfg = load_config(config).map_err(invalid)?;
    let queries = gen_queries(&cfg.workload).map_err(runtime)?;
    let mut w = create(out)?;
    write_queries_jsonl(&mut w, &queries).map_err(runtime)?;
    w.flush().map_err(runtime)?;
    println!("{} queries -> {}", queries.len(), out.display());
    if let Some(path) = ids {
        let trace = gen_id_trace(&cfg.workload).map_err(runtime)?;
        let mut w = create(path)?;
        write_ids_jsonl(&mut w, &trace).map_err(runtime)?;
        w.flush().map_err(runtime)?;
        println!("{} ids -> {}", trace.len(), path.display());
    }
    Ok(())
}

fn cmd_profile(csv: &Path) -> CmdResult {
    let points = File::open(csv)
        .map_err(anyhow::Error::from)
        .and_then(|f| Ok(read_measurements_csv(f)?))
        .with_context(|| format!("measurements `{}`", csv.display()))
        .map_err(invalid)?;
    let model = fit_affine(&points).map_err(invalid)?;
    println!("{}", serde_json::to_string_pretty(&model).map_err(runtime)?);
    Ok(())
}

fn cmd_scaling(comm: f64, overhead: f64) -> CmdResult {
    let reduction = scaling_estimate(comm, overhead).map_err(invalid)?;
    println!("{reduction}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan { config, out } => cmd_plan(config, out),
        Command::Simulate {
            config,
            mapping,
            trace,
            out,
            baselines,
        } => cmd_simulate(config, mapping, trace, out, *baselines),
        Command::GenWorkload { config, out, ids } => cmd_gen_workload(config, out, ids.as_deref()),
        Command::Profile { csv } => cmd_profile(csv),
        Command::Scaling { comm, overhead } => cmd_scaling(*comm, *overhead),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

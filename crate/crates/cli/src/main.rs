use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use uavnoma::baselines::FdmaModel;
use uavnoma::experiment::{
    compare, generate, run_algorithm, run_sweep, run_trace, write_results, write_trace, Algorithm, GenerateSpec,
    RunOptions, SweepParam, SweepSpec, DEFAULT_REGION_M,
};
use uavnoma::model::{evaluate, ScenarioFile};
use uavnoma::par::Execution;
use uavnoma::sca::ScaOptions;
use uavnoma::{PlacementSolution, Scenario};

/// Lifetime-maximizing UAV placement and power control for cognitive NOMA
/// uplinks.
#[derive(Debug, Parser)]
#[command(name = "uavnoma", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a random scenario and write it as JSON.
    Generate(GenerateArgs),
    /// Solve one scenario with one algorithm and write the solution JSON.
    Solve(SolveArgs),
    /// Run a parameter sweep and write one CSV row per cell.
    Sweep(SweepArgs),
    /// Write the per-iteration convergence trace of the SCA solver.
    Trace(TraceArgs),
    /// Run several algorithms on one scenario and report lifetime ratios.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct Placement {
    /// Side of the square deployment region (m).
    #[arg(long = "region-m", default_value_t = DEFAULT_REGION_M)]
    region_m: f64,
    /// UAV altitude (m).
    #[arg(long = "altitude-m", default_value_t = ScenarioFile::DEFAULT_ALTITUDE_M)]
    altitude_m: f64,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    seed: u64,
    /// Number of devices.
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    placement: Placement,
    /// QoS rate r* (bits/s/Hz).
    #[arg(long = "qos-rate")]
    qos_rate: Option<f64>,
    /// Interference threshold at the primary receiver (dBm).
    #[arg(long = "interference-dbm")]
    interference_dbm: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A scenario file, or a seed and device count to draw one.
#[derive(Debug, Args)]
struct ScenarioSource {
    /// Scenario JSON file.
    scenario: Option<PathBuf>,
    /// Seed for an on-the-fly scenario (used when no file is given).
    #[arg(long)]
    seed: Option<u64>,
    /// Device count for an on-the-fly scenario.
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    placement: Placement,
}

impl ScenarioSource {
    fn load(&self) -> Result<Scenario> {
        match (&self.scenario, self.seed, self.k) {
            (Some(path), None, None) => {
                Scenario::load(path).with_context(|| format!("reading scenario {}", path.display()))
            }
            (Some(_), _, _) => bail!("give either a scenario file or --seed/--k, not both"),
            (None, Some(seed), Some(k)) => Ok(generate(&GenerateSpec {
                region_m: self.placement.region_m,
                altitude_m: self.placement.altitude_m,
                ..GenerateSpec::new(seed, k)
            })?),
            (None, _, _) => bail!("a scenario file or both --seed and --k are required"),
        }
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    source: ScenarioSource,
    #[arg(long, default_value = "op-noma-j")]
    algorithm: Algorithm,
    /// Dual-gap tolerance (op-noma-j) or kernel tolerance (fdma).
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Solution JSON file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// qos_rate, interference_threshold_dbm or device_count.
    #[arg(long)]
    param: SweepParam,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Algorithms to run; all four when omitted.
    #[arg(long, value_delimiter = ',')]
    algorithm: Vec<Algorithm>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seed: Vec<u64>,
    /// Device count when it is not the swept parameter.
    #[arg(long, default_value_t = 6)]
    k: usize,
    #[command(flatten)]
    placement: Placement,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Results CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fill the solve_ms column (makes output run-dependent).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[command(flatten)]
    source: ScenarioSource,
    /// Trace CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    source: ScenarioSource,
    #[arg(long, value_delimiter = ',')]
    algorithm: Vec<Algorithm>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Comparison CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    sequential: bool,
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn algorithms_or_all(list: Vec<Algorithm>) -> Vec<Algorithm> {
    if list.is_empty() {
        Algorithm::ALL.to_vec()
    } else {
        list
    }
}

/// Re-runs the model checks on a returned allocation and fails on mismatch.
fn reverify(sol: &PlacementSolution, s: &Scenario) -> Result<()> {
    let report = match &sol.order {
        Some(order) => evaluate(sol.q, &sol.powers, order, s),
        None => FdmaModel::new(s.num_devices()).evaluate(sol.q, &sol.powers, s),
    };
    if report != sol.report {
        bail!("solver report disagrees with re-evaluation");
    }
    Ok(())
}

fn summary(alg: Algorithm, sol: &PlacementSolution) -> String {
    let order = match &sol.order {
        Some(o) => format!("{:?}", o.as_slice()),
        None => "none".into(),
    };
    let mut text = format!(
        "{alg}: lifetime {:.6} s, q = ({:.3}, {:.3}) m, order {order}, verified {}",
        sol.lifetime, sol.q.x, sol.q.y, sol.report.feasible
    );
    for f in &sol.flags {
        text.push_str(&format!("\n  note: {f}"));
    }
    text
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => {
            let spec = GenerateSpec {
                seed: a.seed,
                k: a.k,
                region_m: a.placement.region_m,
                altitude_m: a.placement.altitude_m,
                qos_rate: a.qos_rate,
                interference_threshold_dbm: a.interference_dbm,
            };
            let s = generate(&spec)?;
            let mut out = output(a.out.as_deref())?;
            out.write_all(s.to_json().as_bytes())?;
            out.flush()?;
        }
        Command::Solve(a) => {
            let s = a.source.load()?;
            let opts = RunOptions { tol: a.tol, execution: execution(a.sequential), ..RunOptions::default() };
            let sol = run_algorithm(a.algorithm, &s, &opts)
                .with_context(|| format!("{} failed", a.algorithm))?;
            reverify(&sol, &s)?;
            let mut out = output(a.out.as_deref())?;
            out.write_all(sol.to_json().as_bytes())?;
            out.flush()?;
            eprintln!("{}", summary(a.algorithm, &sol));
        }
        Command::Sweep(a) => {
            let spec = SweepSpec {
                param: a.param,
                values: a.values,
                algorithms: algorithms_or_all(a.algorithm),
                seeds: a.seed,
                k: a.k,
                region_m: a.placement.region_m,
                altitude_m: a.placement.altitude_m,
                run: RunOptions { tol: a.tol, execution: execution(a.sequential), ..RunOptions::default() },
                timing: a.timing,
            };
            let rows = run_sweep(&spec)?;
            write_results(output(a.out.as_deref())?, &rows)?;
        }
        Command::Trace(a) => {
            let s = a.source.load()?;
            let run = run_trace(&s, &ScaOptions::default())?;
            write_trace(output(a.out.as_deref())?, &run.trace)?;
            eprintln!(
                "outer iterations {}, converged {}, lifetime {:.6} s",
                run.outer_iterations, run.converged, run.solution.lifetime
            );
        }
        Command::Compare(a) => {
            let s = a.source.load()?;
            let opts = RunOptions { tol: a.tol, execution: execution(a.sequential), ..RunOptions::default() };
            let algs = algorithms_or_all(a.algorithm);
            let c = compare(&s, &algs, &opts, a.timing);
            c.write(output(a.out.as_deref())?)?;
            for (row, ratio) in c.rows.iter().zip(&c.ratios) {
                let r = ratio.map_or("-".to_string(), |r| format!("{r:.6}"));
                eprintln!("{:<11} {:<16} lifetime {:>14.6} s  ratio {r}", row.algorithm.name(), row.status.as_str(), row.lifetime_s);
            }
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

//! `waitsee`: evaluate polling-delay formulas, optimize credits, compute the
//! delay lower bound, run simulations, and sweep parameters into plot-ready
//! CSV or JSON.

mod sweep;

use std::fmt::Write as _;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use waitsee::*;

/// Exit status conventions: 0 success, 2 invalid configuration, 3 result
/// carries a non-convergence flag, 64 usage error, 74 file I/O error.
pub enum Failure {
    Usage(String),
    Io(String),
    Invalid(String),
}

impl Failure {
    fn report(&self) -> ExitCode {
        let (message, code) = match self {
            Failure::Usage(m) => (m, 64),
            Failure::Io(m) => (m, 74),
            Failure::Invalid(m) => (m, 2),
        };
        eprintln!("error: {message}");
        ExitCode::from(code)
    }
}

#[derive(Parser)]
#[command(name = "waitsee", version, about = "Cyclic polling systems with an idling server: delay formulas, credit optimization, bounds, and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct CommonArgs {
    /// Path to the JSON configuration document.
    #[arg(long, value_name = "PATH")]
    pub config: String,
    /// Emit JSON instead of tables.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct SimArgs {
    /// Service strategy: wait_and_see | total_timer | boxma_timer | exhaustive.
    #[arg(long)]
    pub strategy: Option<String>,
    /// RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Measured arrivals.
    #[arg(long)]
    pub arrivals: Option<u64>,
    /// Batch count for the batch-means intervals.
    #[arg(long)]
    pub batches: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the delay formulas with their term breakdowns.
    Evaluate(CommonArgs),
    /// Find the credits minimizing the mean delay.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
        /// Convergence tolerance of the numerical minimizer.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Iteration cap of the numerical minimizer.
        #[arg(long)]
        max_iters: Option<usize>,
        /// Extra random starting points.
        #[arg(long)]
        multistart: Option<usize>,
    },
    /// Minimize the delay lower bound over waiting allocations.
    Bound(CommonArgs),
    /// Run the discrete-event simulator.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Evaluate delay columns over a swept parameter, emitting CSV.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Swept variable: `T<i>`, `lambda<i>`, `r<i>`, or `rho<i>` (1-based).
        #[arg(long)]
        variable: String,
        /// Grid as start:stop:steps with steps >= 2.
        #[arg(long)]
        range: String,
        /// Comma-separated columns: analytic_ws, exhaustive, lower_bound,
        /// sim_wait_and_see, sim_total_timer, sim_boxma_timer, sim_exhaustive.
        #[arg(long, default_value = "analytic_ws,exhaustive")]
        outputs: String,
        #[command(flatten)]
        sim: SimArgs,
        /// Write to a file instead of stdout.
        #[arg(long, value_name = "PATH")]
        out: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) =>
        {
            print!("{err}");
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            eprint!("{err}");
            return ExitCode::from(64);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(failure) => failure.report(),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Evaluate(common) => evaluate(&common),
        Command::Optimize { common, tolerance, max_iters, multistart } => {
            let mut opts = OptimizeOptions::default();
            if let Some(t) = tolerance {
                opts.tolerance = t;
            }
            if let Some(m) = max_iters {
                opts.max_iters = m;
            }
            if let Some(m) = multistart {
                opts.multistart = m;
            }
            optimize_cmd(&common, &opts)
        }
        Command::Bound(common) => bound_cmd(&common),
        Command::Simulate { common, sim } => simulate_cmd(&common, &sim),
        Command::Sweep { common, variable, range, outputs, sim, out } => {
            sweep::run(&load_scenario(&common.config)?, &common, &variable, &range, &outputs, &sim, out.as_deref())
        }
    }
}

pub fn load_scenario(path: &str) -> Result<Scenario, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|err| Failure::Io(format!("cannot read {path}: {err}")))?;
    Scenario::from_json(&text)
        .map_err(|err| Failure::Invalid(format!("cannot parse {path}: {err}")))
}

pub fn check(scenario: &Scenario) -> Result<CheckedConfig, Failure> {
    validate(scenario.config.clone()).map_err(|err| Failure::Invalid(err.to_string()))
}

fn format_terms(report: &DelayReport) -> String {
    let mut line = String::new();
    for term in &report.terms {
        let _ = write!(line, "  {} = {}", term.name, term.value);
    }
    if let Some(flag) = report.degeneracy {
        let _ = write!(line, "  [degenerate: {flag:?}]");
    }
    line
}

fn evaluate(common: &CommonArgs) -> Result<ExitCode, Failure> {
    let scenario = load_scenario(&common.config)?;
    let config = check(&scenario)?;
    let loads = config.loads();
    let n = config.len();

    let ws = wait_and_see_delay(&config);
    let ex = exhaustive_delay(&config);
    let decomposed = delay_via_workload_decomposition(&config);

    if common.json {
        let mut doc = serde_json::json!({
            "loads": loads,
            "mean_cycle_time": mean_cycle_time(&config),
            "wait_and_see": ws,
            "exhaustive": ex,
            "decomposition": decomposed,
        });
        if n == 2 {
            doc["two_station"] = serde_json::to_value(two_station_delay(&config).unwrap())
                .expect("serializable");
            doc["coefficients"] =
                serde_json::to_value(coefficients_two_station(&config).unwrap())
                    .expect("serializable");
            doc["delay_via_cs"] =
                serde_json::to_value(delay_via_cs(&config).unwrap()).expect("serializable");
        }
        if n == 1 {
            doc["single_station"] =
                serde_json::to_value(single_station_delay(&config).unwrap())
                    .expect("serializable");
        }
        println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
        return Ok(ExitCode::SUCCESS);
    }

    println!(
        "system: N={n}  rho0={}  r0={}  T0={}  E[cycle]={}",
        loads.rho0,
        loads.r0,
        loads.t0,
        mean_cycle_time(&config)
    );
    println!("wait_and_see   D = {}", ws.weighted_mean);
    println!("{}", format_terms(&ws));
    println!("exhaustive     D = {}", ex.weighted_mean);
    println!("{}", format_terms(&ex));
    println!("decomposition  D = {}", decomposed.weighted_mean);
    println!("{}", format_terms(&decomposed));
    if n == 2 {
        let specialized = two_station_delay(&config).unwrap();
        let via_cs = delay_via_cs(&config).unwrap();
        println!("two_station    D = {}", specialized.weighted_mean);
        println!("{}", format_terms(&specialized));
        println!("via_cs         D = {}", via_cs.weighted_mean);
        let cs = coefficients_two_station(&config).unwrap();
        println!(
            "  c1={} c2={} c3={} c4={} c5={} c6={} c7={}",
            cs.c1, cs.c2, cs.c3, cs.c4, cs.c5, cs.c6, cs.c7
        );
    }
    if n == 1 {
        let single = single_station_delay(&config).unwrap();
        println!("single_station D = {}", single.weighted_mean);
        println!("{}", format_terms(&single));
    }
    Ok(ExitCode::SUCCESS)
}

fn optimize_cmd(common: &CommonArgs, opts: &OptimizeOptions) -> Result<ExitCode, Failure> {
    let scenario = load_scenario(&common.config)?;
    let config = check(&scenario)?;

    if config.len() == 2 {
        let decision =
            optimal_credits_two_station(&config).map_err(|err| Failure::Invalid(err.to_string()))?;
        let heuristic = strategy_ii_heuristic_credit(&config)
            .map_err(|err| Failure::Invalid(err.to_string()))?;
        if common.json {
            let mut doc = serde_json::to_value(&decision).expect("serializable");
            doc["total_timer_heuristic_credit"] = serde_json::json!(heuristic);
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
        } else {
            println!("route: {:?}  symmetric: {}", decision.route, decision.symmetric);
            if let Some(cond) = decision.condition {
                println!(
                    "condition: lhs={} rhs={} satisfied={}",
                    cond.lhs, cond.rhs, cond.satisfied
                );
            }
            for (i, (&worth, &credit)) in
                decision.worth_waiting.iter().zip(&decision.t_opt).enumerate()
            {
                if worth {
                    println!("station {}: worth waiting, T* = {credit}", i + 1);
                } else {
                    println!("station {}: no gain from waiting, T* = 0", i + 1);
                }
            }
            if decision.worth_waiting == [false, false] {
                println!("no gain from waiting at either station");
            }
            println!("optimal delay = {}", decision.delay_opt);
            println!(
                "exhaustive delay = {}",
                exhaustive_delay(&config).weighted_mean
            );
            println!("total-timer heuristic credit (station 1) = {heuristic}");
        }
        return Ok(if decision.converged { ExitCode::SUCCESS } else { ExitCode::from(3) });
    }

    let result = optimal_credits_general(&config, opts);
    if common.json {
        println!("{}", serde_json::to_string_pretty(&result).expect("serializable"));
    } else {
        println!("optimal credits: {:?}", result.credits);
        println!("optimal delay  = {}", result.delay);
        println!("exhaustive delay = {}", exhaustive_delay(&config).weighted_mean);
        println!("kkt residual = {}  converged = {}", result.kkt_residual, result.converged);
    }
    Ok(if result.converged { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn bound_cmd(common: &CommonArgs) -> Result<ExitCode, Failure> {
    let scenario = load_scenario(&common.config)?;
    let config = check(&scenario)?;
    let result = delay_lower_bound(&config, &OptimizeOptions::default());
    if common.json {
        println!("{}", serde_json::to_string_pretty(&result).expect("serializable"));
    } else {
        println!("lower bound = {}", result.point.objective);
        println!("allocation f* = {:?}", result.point.f);
        if result.unbounded {
            println!("minimizer unbounded: the bound is an infimum along a growing allocation");
        }
        println!("converged = {}", result.converged);
    }
    Ok(if result.converged { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

pub fn resolve_sim_config(
    scenario: &Scenario,
    args: &SimArgs,
    default_strategy: Strategy,
) -> Result<SimConfig, Failure> {
    let mut sim = scenario.sim.clone().unwrap_or_else(|| SimConfig::new(default_strategy));
    if let Some(text) = &args.strategy {
        sim.strategy = text.parse().map_err(Failure::Usage)?;
    }
    if let Some(seed) = args.seed {
        sim.seed = seed;
    }
    if let Some(arrivals) = args.arrivals {
        sim.measured_arrivals = arrivals;
    }
    if let Some(batches) = args.batches {
        sim.batches = batches;
    }
    Ok(sim)
}

fn simulate_cmd(common: &CommonArgs, args: &SimArgs) -> Result<ExitCode, Failure> {
    let scenario = load_scenario(&common.config)?;
    let config = check(&scenario)?;
    let sim = resolve_sim_config(&scenario, args, Strategy::WaitAndSee)?;
    let estimate =
        simulate(&config, &sim).map_err(|err| Failure::Invalid(err.to_string()))?;
    if common.json {
        println!("{}", serde_json::to_string_pretty(&estimate).expect("serializable"));
        return Ok(ExitCode::SUCCESS);
    }
    println!(
        "strategy {}  seed {}  arrivals {}  batches {}",
        sim.strategy, sim.seed, sim.measured_arrivals, sim.batches
    );
    println!(
        "weighted delay = {} +- {} (99% CI)",
        estimate.weighted_delay.mean, estimate.weighted_delay.half_width
    );
    for (i, est) in estimate.per_station_delay.iter().enumerate() {
        println!("station {} delay = {} +- {}", i + 1, est.mean, est.half_width);
    }
    println!("mean cycle = {}", estimate.mean_cycle);
    println!(
        "state fractions: working {}  switching {}  waiting {}",
        estimate.state_fractions.working,
        estimate.state_fractions.switching,
        estimate.state_fractions.waiting
    );
    if estimate.unstable {
        println!("warning: queue guard tripped; partial data only");
    }
    Ok(ExitCode::SUCCESS)
}

//! Command-line driver: solve instances, emit candidate sets, compare the
//! nearness pipelines, run random batches, and run the matrix flows.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tspflow::candidates::distance_candidates;
use tspflow::error::Error;
use tspflow::flows::{
    best_tour, h_flow_restarts, p_flow_constrained_restarts, p_flow_restarts, FlowConfig,
    FlowReport,
};
use tspflow::harness::{
    compare_nearness, export_report, random_batch, solve_to_convergence, BatchReport,
    ComparisonRow, ReportFormat,
};
use tspflow::instance::{
    build_distance_matrix, parse_tsplib, tour_cost, DistanceMatrix, Instance, TourMatrix,
};
use tspflow::localsearch::{initial_tour, k_opt_search, SearchConfig};
use tspflow::procrustes::{candidates_at_lambda, homotopy_candidates, solve_procrustes};
use tspflow::spanning::alpha_candidates;

#[derive(Parser)]
#[command(name = "tspflow", version, about = "TSP heuristics from continuous relaxations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolveMethod {
    Alpha,
    Pnear,
    FlowP,
    FlowH,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CandidateMethod {
    Alpha,
    Pnear,
    Distance,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FlowVariant {
    P,
    H,
    PConstrained,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct ProtocolArgs {
    /// Candidate-set size per city.
    #[arg(long, default_value_t = 5)]
    m: usize,
    /// Attempted-move budget as a multiple of the city count.
    #[arg(long, default_value_t = 8)]
    budget_factor: usize,
    /// Seed for initial tours and restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance with a chosen candidate method or flow.
    Solve {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = SolveMethod::Pnear)]
        method: SolveMethod,
        #[command(flatten)]
        protocol: ProtocolArgs,
        /// Ignore the move budget and run to joint 2/3-opt local optimality.
        #[arg(long)]
        converge: bool,
        /// Restarts for --converge and the flow methods.
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        /// Print the tour as 1-based city indices.
        #[arg(long)]
        print_tour: bool,
    },
    /// Emit candidate sets in the one-line-per-city text format.
    Candidates {
        file: PathBuf,
        #[arg(long, value_enum)]
        method: CandidateMethod,
        #[arg(long, default_value_t = 5)]
        m: usize,
        /// Homotopy weight for --method pnear: "auto" or a number.
        #[arg(long, default_value = "auto")]
        lambda: String,
    },
    /// Compare α-nearness and P-nearness on TSPLIB files.
    Compare {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[command(flatten)]
        protocol: ProtocolArgs,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
    },
    /// Compare the pipelines on seeded random unit-square instances.
    RandomBatch {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long, default_value_t = 8)]
        budget_factor: usize,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
    },
    /// Run a matrix flow and print the report as JSON.
    Flow {
        file: PathBuf,
        #[arg(long, value_enum)]
        variant: FlowVariant,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial multiplier for --variant p-constrained.
        #[arg(long, default_value_t = 500.0)]
        lambda0: f64,
    },
}

fn load_instance(path: &PathBuf) -> Result<Instance, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::MalformedInput(format!("{}: {e}", path.display())))?;
    parse_tsplib(&text)
}

fn print_tour_line(tour: &tspflow::instance::Tour) {
    let cities: Vec<String> = tour.order().iter().map(|c| (c + 1).to_string()).collect();
    println!("tour: {}", cities.join(" "));
}

fn run_solve(
    file: PathBuf,
    method: SolveMethod,
    protocol: ProtocolArgs,
    converge: bool,
    restarts: usize,
    print_tour: bool,
) -> Result<(), Error> {
    let inst = load_instance(&file)?;
    let d = build_distance_matrix(&inst)?;

    let search_with = |cands: &tspflow::candidates::CandidateSets| -> Result<_, Error> {
        if converge {
            solve_to_convergence(&d, cands, protocol.seed, restarts)
        } else {
            let start = initial_tour(&d, cands, protocol.seed)?;
            let config = SearchConfig {
                move_budget: Some((protocol.budget_factor * inst.n) as u64),
                max_k: 3,
                rng_seed: protocol.seed,
            };
            k_opt_search(&d, &start, cands, &config)
        }
    };

    match method {
        SolveMethod::Alpha | SolveMethod::Pnear => {
            let cands = match method {
                SolveMethod::Alpha => alpha_candidates(&d, protocol.m)?,
                _ => {
                    let t = TourMatrix::undirected_cycle(inst.n)?;
                    let sol = solve_procrustes(&d, &t)?;
                    homotopy_candidates(&sol.t_star, &d, protocol.m)?
                }
            };
            let stats = search_with(&cands)?;
            let cost = tour_cost(&d, &stats.final_tour)?;
            println!(
                "instance={} n={} method={} cost={} attempted={} accepted={}",
                inst.name,
                inst.n,
                match method {
                    SolveMethod::Alpha => "alpha",
                    _ => "pnear",
                },
                format_cost(cost, &inst),
                stats.attempted_moves,
                stats.accepted_moves
            );
            if print_tour {
                print_tour_line(&stats.final_tour);
            }
        }
        SolveMethod::FlowP | SolveMethod::FlowH => {
            let config = FlowConfig {
                restarts,
                seed: protocol.seed,
                ..FlowConfig::default()
            };
            let reports = flow_reports(&d, inst.n, method, &config)?;
            let converged = reports.iter().filter(|r| r.converged).count();
            match best_tour(&reports) {
                Some(tour) => {
                    println!(
                        "instance={} n={} method={} cost={} converged_runs={}/{}",
                        inst.name,
                        inst.n,
                        if method == SolveMethod::FlowP { "flow-p" } else { "flow-h" },
                        format_cost(tour.cached_cost().unwrap_or(f64::NAN), &inst),
                        converged,
                        reports.len()
                    );
                    if print_tour {
                        print_tour_line(tour);
                    }
                }
                None => {
                    return Err(Error::NonConvergence(format!(
                        "no flow restart of {} produced a tour",
                        reports.len()
                    )))
                }
            }
        }
    }
    Ok(())
}

fn flow_reports(
    d: &DistanceMatrix,
    n: usize,
    method: SolveMethod,
    config: &FlowConfig,
) -> Result<Vec<FlowReport>, Error> {
    match method {
        SolveMethod::FlowP => {
            let t = TourMatrix::undirected_cycle(n)?;
            p_flow_restarts(d, &t, config)
        }
        SolveMethod::FlowH => h_flow_restarts(d, config),
        _ => unreachable!(),
    }
}

fn format_cost(cost: f64, inst: &Instance) -> String {
    if inst.integral_weights() {
        format!("{cost:.0}")
    } else {
        format!("{cost:.6}")
    }
}

fn run_candidates(file: PathBuf, method: CandidateMethod, m: usize, lambda: String) -> Result<(), Error> {
    let inst = load_instance(&file)?;
    let d = build_distance_matrix(&inst)?;
    let sets = match method {
        CandidateMethod::Alpha => alpha_candidates(&d, m)?,
        CandidateMethod::Distance => distance_candidates(&d, m)?,
        CandidateMethod::Pnear => {
            let t = TourMatrix::undirected_cycle(inst.n)?;
            let sol = solve_procrustes(&d, &t)?;
            match lambda.as_str() {
                "auto" => homotopy_candidates(&sol.t_star, &d, m)?,
                text => {
                    let value: f64 = text.parse().map_err(|_| {
                        Error::InvalidParameter(format!("lambda must be 'auto' or a number: {text}"))
                    })?;
                    candidates_at_lambda(&sol.t_star, &d, m, value)?
                }
            }
        }
    };
    print!("{}", sets.to_text());
    Ok(())
}

fn run_compare(files: Vec<PathBuf>, protocol: ProtocolArgs, format: OutputFormat) -> Result<(), Error> {
    let mut rows: Vec<ComparisonRow> = Vec::new();
    for file in &files {
        let inst = load_instance(file)?;
        rows.push(compare_nearness(&inst, protocol.m, protocol.budget_factor, protocol.seed)?);
    }
    let report = BatchReport::from_rows(rows, protocol.m, protocol.budget_factor, protocol.seed);
    emit_report(&report, format)
}

fn emit_report(report: &BatchReport, format: OutputFormat) -> Result<(), Error> {
    let fmt = match format {
        OutputFormat::Csv => ReportFormat::Csv,
        OutputFormat::Json => ReportFormat::Json,
    };
    let bytes = export_report(report, fmt)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    if format == OutputFormat::Csv {
        println!("# wins: {}/{}", report.win_count, report.total);
    }
    Ok(())
}

fn run_flow(
    file: PathBuf,
    variant: FlowVariant,
    restarts: usize,
    seed: u64,
    lambda0: f64,
) -> Result<(), Error> {
    let inst = load_instance(&file)?;
    let d = build_distance_matrix(&inst)?;
    let config = FlowConfig {
        restarts,
        seed,
        ..FlowConfig::default()
    };
    let reports = match variant {
        FlowVariant::P => {
            let t = TourMatrix::undirected_cycle(inst.n)?;
            p_flow_restarts(&d, &t, &config)
        }
        FlowVariant::H => h_flow_restarts(&d, &config),
        FlowVariant::PConstrained => {
            let t = TourMatrix::undirected_cycle(inst.n)?;
            p_flow_constrained_restarts(&d, &t, lambda0, &config)
        }
    }?;
    let json = serde_json::to_string_pretty(&reports)
        .map_err(|e| Error::NumericalFailure(format!("serialize: {e}")))?;
    println!("{json}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve {
            file,
            method,
            protocol,
            converge,
            restarts,
            print_tour,
        } => run_solve(file, method, protocol, converge, restarts, print_tour),
        Command::Candidates {
            file,
            method,
            m,
            lambda,
        } => run_candidates(file, method, m, lambda),
        Command::Compare {
            files,
            protocol,
            format,
        } => run_compare(files, protocol, format),
        Command::RandomBatch {
            count,
            n,
            m,
            budget_factor,
            base_seed,
            format,
        } => random_batch(count, n, m, budget_factor, base_seed)
            .and_then(|report| emit_report(&report, format)),
        Command::Flow {
            file,
            variant,
            restarts,
            seed,
            lambda0,
        } => run_flow(file, variant, restarts, seed, lambda0),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

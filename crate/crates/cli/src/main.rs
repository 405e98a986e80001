use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use l0bnb::bench::{aggregate, run_bench_with, BenchRecord, BenchSpec};
use l0bnb::datagen::{generate, GenSpec, Setup};
use l0bnb::io::{read_instance, write_generated};
use l0bnb::model::support;
use l0bnb::{solve_with_trace, Exploration, SolverConfig};

const EXIT_TIMED_OUT: u8 = 2;

#[derive(Parser)]
#[command(name = "l0bnb", version, about = "Exact l0-penalized least squares by branch-and-bound")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic instance and write it to a file.
    Gen {
        #[arg(long, value_enum)]
        setup: SetupArg,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: u64,
        /// Sinc width of the Toeplitz kernel, in samples (default m/50).
        #[arg(long)]
        sinc_width: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve an instance file to global optimality.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Switch::On)]
        screening: Switch,
        #[arg(long, default_value_t = 1000.0)]
        time_limit: f64,
        /// Absolute optimality tolerance on the objective.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = Order::DepthFirst)]
        exploration: Order,
        /// Print one line per node to standard error.
        #[arg(long)]
        trace: bool,
    },
    /// Run the benchmark protocol and write per-solve records as CSV.
    Bench {
        #[arg(long, value_enum)]
        setup: SetupArg,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        /// Comma-separated sparsity levels.
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed0: u64,
        #[arg(long, default_value_t = 1000.0)]
        time_limit: f64,
        #[arg(long)]
        out: PathBuf,
        /// Run trials concurrently (each solve stays single-threaded).
        #[arg(long)]
        parallel: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SetupArg {
    Gaussian,
    Toeplitz,
}

impl From<SetupArg> for Setup {
    fn from(s: SetupArg) -> Self {
        match s {
            SetupArg::Gaussian => Setup::Gaussian,
            SetupArg::Toeplitz => Setup::Toeplitz,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    DepthFirst,
    BestBound,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Gen {
            setup,
            m,
            n,
            k,
            seed,
            sinc_width,
            out,
        } => {
            let spec = GenSpec {
                sinc_width,
                ..GenSpec::new(setup.into(), m, n, k, seed)
            };
            cmd_gen(&spec, &out)
        }
        Command::Solve {
            instance,
            screening,
            time_limit,
            tol,
            exploration,
            trace,
        } => {
            let config = SolverConfig {
                exploration: match exploration {
                    Order::DepthFirst => Exploration::DepthFirst,
                    Order::BestBound => Exploration::BestBound,
                },
                screening_enabled: screening == Switch::On,
                time_limit_seconds: time_limit,
                gap_tolerance: tol,
                ..SolverConfig::default()
            };
            cmd_solve(&instance, &config, trace)
        }
        Command::Bench {
            setup,
            m,
            n,
            k,
            trials,
            seed0,
            time_limit,
            out,
            parallel,
        } => {
            let spec = BenchSpec {
                setup: setup.into(),
                m,
                n,
                ks: k,
                trials,
                seed0,
                time_limit_seconds: time_limit,
                parallel,
            };
            cmd_bench(&spec, &out)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_gen(spec: &GenSpec, out: &Path) -> Result<ExitCode> {
    let generated = generate(spec)?;
    write_generated(out, &generated).with_context(|| format!("writing {}", out.display()))?;
    println!("lambda {:.16e}", generated.instance.lambda());
    println!("M {:.16e}", generated.instance.big_m());
    println!("sigma {:.16e}", generated.sigma);
    Ok(ExitCode::SUCCESS)
}

fn cmd_solve(path: &Path, config: &SolverConfig, trace: bool) -> Result<ExitCode> {
    let (instance, _) = read_instance(path).with_context(|| format!("reading {}", path.display()))?;
    let mut observer = |t: &l0bnb::NodeTrace| {
        if trace {
            eprintln!("{t}");
        }
    };
    let (solution, stats) = solve_with_trace(&instance, config, &mut observer)?;
    let support: Vec<String> = support(&solution.x).iter().map(|i| (i + 1).to_string()).collect();
    println!("objective {:.16e}", solution.objective);
    println!("optimal {}", solution.optimal);
    println!("nodes_processed {}", stats.nodes_processed);
    println!("nodes_screened_out {}", stats.nodes_screened_out);
    println!("variables_fixed_by_screening {}", stats.variables_fixed_by_screening);
    println!("wall_time_seconds {:.6}", stats.wall_time_seconds);
    println!("support {}", support.join(" "));
    Ok(if stats.timed_out {
        ExitCode::from(EXIT_TIMED_OUT)
    } else {
        ExitCode::SUCCESS
    })
}

const CSV_HEADER: [&str; 10] = [
    "setup",
    "m",
    "n",
    "k",
    "seed",
    "method",
    "nodes",
    "time_seconds",
    "failed",
    "objective",
];

fn cmd_bench(spec: &BenchSpec, out: &Path) -> Result<ExitCode> {
    let records = run_bench_with(spec, |rs: &[BenchRecord]| {
        for r in rs {
            eprintln!(
                "k={} seed={} {}: nodes {} time {:.3}s{}",
                r.k,
                r.seed,
                r.method,
                r.nodes,
                r.time_seconds,
                if r.failed { " (time limit)" } else { "" }
            );
        }
    })?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(CSV_HEADER)?;
    for r in &records {
        w.write_record([
            r.setup.to_string(),
            r.m.to_string(),
            r.n.to_string(),
            r.k.to_string(),
            r.seed.to_string(),
            r.method.to_string(),
            r.nodes.to_string(),
            format!("{:.6}", r.time_seconds),
            r.failed.to_string(),
            format!("{:.16e}", r.objective),
        ])?;
    }
    // Footer rows: seed column reads "mean", failed holds the failure count.
    let summary = aggregate(&records);
    for a in &summary {
        w.write_record([
            spec.setup.to_string(),
            spec.m.to_string(),
            spec.n.to_string(),
            a.k.to_string(),
            "mean".to_string(),
            a.method.to_string(),
            format!("{}", a.mean_nodes),
            format!("{:.6}", a.mean_time_seconds),
            a.failures.to_string(),
            String::new(),
        ])?;
        println!(
            "k={} {:<7} mean nodes {:>10.1}  mean time {:>9.3}s  failures {}",
            a.k, a.method, a.mean_nodes, a.mean_time_seconds, a.failures
        );
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

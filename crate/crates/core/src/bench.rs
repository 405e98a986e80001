//! The benchmark protocol: seeded instances solved with and without
//! screening, one record per (instance, method), averaged per sparsity level.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::bnb::{solve, SolverConfig};
use crate::datagen::{generate, GenSpec, Setup};
use crate::error::{Error, Result};

/// Solver variant under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Plain branch-and-bound.
    Bnb,
    /// Branch-and-bound with node screening.
    BnbScr,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Bnb, Method::BnbScr];

    pub fn screening(self) -> bool {
        matches!(self, Method::BnbScr)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Bnb => "bnb",
            Method::BnbScr => "bnb_scr",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bnb" => Ok(Method::Bnb),
            "bnb_scr" => Ok(Method::BnbScr),
            other => Err(Error::InvalidSpec(format!("unknown method {other:?}"))),
        }
    }
}

/// One solve of one generated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub setup: Setup,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub method: Method,
    pub nodes: usize,
    pub time_seconds: f64,
    /// The time limit was hit; `objective` is then the incumbent's value.
    pub failed: bool,
    pub objective: f64,
}

/// Parameters of a benchmark run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub setup: Setup,
    pub m: usize,
    pub n: usize,
    pub ks: Vec<usize>,
    pub trials: usize,
    pub seed0: u64,
    pub time_limit_seconds: f64,
    /// Run trials concurrently. Each solve stays single-threaded.
    pub parallel: bool,
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() {
            return Err(Error::InvalidSpec("no sparsity level given".into()));
        }
        if !(self.time_limit_seconds > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "time limit must be positive, got {}",
                self.time_limit_seconds
            )));
        }
        for &k in &self.ks {
            GenSpec::new(self.setup, self.m, self.n, k, self.seed0).validate()?;
        }
        Ok(())
    }
}

/// Generates the instance for (`k`, `seed`) and solves it with both methods.
pub fn run_trial(
    setup: Setup,
    m: usize,
    n: usize,
    k: usize,
    seed: u64,
    time_limit_seconds: f64,
) -> Result<Vec<BenchRecord>> {
    let generated = generate(&GenSpec::new(setup, m, n, k, seed))?;
    Method::ALL
        .iter()
        .map(|&method| {
            let config = SolverConfig {
                screening_enabled: method.screening(),
                time_limit_seconds,
                ..SolverConfig::default()
            };
            let (solution, stats) = solve(&generated.instance, &config)?;
            let time_seconds = if stats.timed_out {
                stats.wall_time_seconds.max(time_limit_seconds)
            } else {
                stats.wall_time_seconds
            };
            Ok(BenchRecord {
                setup,
                m,
                n,
                k,
                seed,
                method,
                nodes: stats.nodes_processed,
                time_seconds,
                failed: stats.timed_out,
                objective: solution.objective,
            })
        })
        .collect()
}

/// Runs every (k, trial) pair. Records come back in protocol order:
/// k-major, then trial, then [`Method::ALL`] order.
pub fn run_bench(spec: &BenchSpec) -> Result<Vec<BenchRecord>> {
    run_bench_with(spec, |_| {})
}

/// [`run_bench`], calling `progress` after each finished trial.
pub fn run_bench_with(spec: &BenchSpec, progress: impl Fn(&[BenchRecord]) + Sync) -> Result<Vec<BenchRecord>> {
    spec.validate()?;
    let jobs: Vec<(usize, u64)> = spec
        .ks
        .iter()
        .flat_map(|&k| (0..spec.trials as u64).map(move |t| (k, spec.seed0 + t)))
        .collect();
    let one = |&(k, seed): &(usize, u64)| {
        let records = run_trial(spec.setup, spec.m, spec.n, k, seed, spec.time_limit_seconds)?;
        progress(&records);
        Ok(records)
    };
    let per_trial: Result<Vec<Vec<BenchRecord>>> = if spec.parallel {
        jobs.par_iter().map(one).collect()
    } else {
        jobs.iter().map(one).collect()
    };
    Ok(per_trial?.into_iter().flatten().collect())
}

/// Per-(k, method) summary, the shape of one cell group of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub k: usize,
    pub method: Method,
    pub trials: usize,
    pub mean_nodes: f64,
    pub mean_time_seconds: f64,
    pub failures: usize,
}

/// Groups records by (k, method), in order of first appearance.
pub fn aggregate(records: &[BenchRecord]) -> Vec<Aggregate> {
    let mut out: Vec<Aggregate> = Vec::new();
    for r in records {
        let idx = match out.iter().position(|a| a.k == r.k && a.method == r.method) {
            Some(i) => i,
            None => {
                out.push(Aggregate {
                    k: r.k,
                    method: r.method,
                    trials: 0,
                    mean_nodes: 0.0,
                    mean_time_seconds: 0.0,
                    failures: 0,
                });
                out.len() - 1
            }
        };
        let a = &mut out[idx];
        a.trials += 1;
        a.mean_nodes += r.nodes as f64;
        a.mean_time_seconds += r.time_seconds;
        a.failures += usize::from(r.failed);
    }
    for a in &mut out {
        a.mean_nodes /= a.trials as f64;
        a.mean_time_seconds /= a.trials as f64;
    }
    out
}

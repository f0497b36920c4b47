//! Seeded Monte Carlo benchmark: sweeps over channel counts and sparsity
//! levels, tallying support-exact recovery rates per algorithm.
//!
//! Every trial owns an RNG substream derived from
//! `(master_seed, l, k, tau, trial)`, so rates are reproducible regardless
//! of execution order or thread count. All algorithms of a sweep see the
//! same instances, which pairs their success indicators. The
//! `MMVBENCH_THREADS` environment variable caps the worker count.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::problem::{
    derive_stream, gen_dictionary, gen_signal, measure, recovery_success, Dictionary,
};
use crate::solvers::{self, Algorithm, QNorm};
use crate::{Error, Result, DEFAULT_REL_TOL};

const TAG_TRIAL: u64 = 1;
const TAG_RETRY: u64 = 2;
const TAG_DICT: u64 = 3;

/// Retries for the probability-zero degenerate signal draw.
const MAX_SIGNAL_RETRIES: u64 = 8;

/// How the signal rank is chosen for each `(k, l)` cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TauRule {
    /// `tau = min(k, l)`: the i.i.d. Gaussian protocol, full rank with
    /// probability one.
    Full,
    /// Explicit rank values; entries exceeding `min(k, l)` are skipped for
    /// that cell.
    Explicit(Vec<usize>),
}

impl TauRule {
    fn taus_for(&self, k: usize, l: usize) -> Vec<usize> {
        match self {
            TauRule::Full => vec![k.min(l)],
            TauRule::Explicit(list) => list
                .iter()
                .copied()
                .filter(|&tau| tau >= 1 && tau <= k.min(l))
                .collect(),
        }
    }
}

/// Full description of a benchmark sweep.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub n: usize,
    pub m: usize,
    pub l_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub tau_rule: TauRule,
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    pub master_seed: u64,
    pub success_rel_tol: f64,
    /// Draw one dictionary for the whole sweep instead of one per trial.
    pub fix_dictionary: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::param("n and m must be positive"));
        }
        if self.trials == 0 {
            return Err(Error::param("at least one trial is required"));
        }
        if self.l_values.is_empty() || self.l_values.iter().any(|&l| l == 0) {
            return Err(Error::param("l values must be nonempty and positive"));
        }
        if self.k_values.is_empty() {
            return Err(Error::param("k values must be nonempty"));
        }
        if let Some(&bad) = self
            .k_values
            .iter()
            .find(|&&k| k == 0 || k > self.m || k > self.n)
        {
            return Err(Error::param(format!(
                "sparsity k = {bad} must satisfy 1 <= k <= min(m, n) = {}",
                self.m.min(self.n)
            )));
        }
        if self.algorithms.is_empty() {
            return Err(Error::param("at least one algorithm is required"));
        }
        if self.success_rel_tol < 0.0 {
            return Err(Error::param("success_rel_tol must be nonnegative"));
        }
        if let TauRule::Explicit(list) = &self.tau_rule {
            if list.is_empty() || list.iter().any(|&t| t == 0) {
                return Err(Error::param("explicit tau list must be nonempty and positive"));
            }
        }
        Ok(())
    }
}

/// Aggregated outcome of one `(algorithm, l, k, tau)` cell.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    #[serde(serialize_with = "serialize_algorithm")]
    pub algorithm: Algorithm,
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub k: usize,
    pub tau: usize,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub wall_time_ms: u64,
}

fn serialize_algorithm<S: Serializer>(algo: &Algorithm, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(algo.name())
}

/// Failures caused by solver errors rather than wrong answers; kept out of
/// the result rows but available for reporting.
#[derive(Debug, Clone)]
pub struct CellDiagnostics {
    pub algorithm: Algorithm,
    pub l: usize,
    pub k: usize,
    pub tau: usize,
    pub solver_errors: usize,
}

/// Output format for [`emit_results`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::param(format!(
                "unknown output format {other:?}; expected csv or json"
            ))),
        }
    }
}

struct TrialOutcome {
    success: bool,
    solver_error: bool,
    nanos: u64,
}

fn solve_one(
    algorithm: Algorithm,
    phi: &Dictionary,
    y: &nalgebra::DMatrix<f64>,
    k: usize,
) -> Result<solvers::RecoveryResult> {
    match algorithm {
        Algorithm::QThresholding => solvers::q_thresholding(phi, y, k, QNorm::Two),
        Algorithm::Somp => solvers::somp(phi, y, k, QNorm::Two),
        Algorithm::RaThresholding => solvers::ra_thresholding(phi, y, k, DEFAULT_REL_TOL),
        Algorithm::RaOmp => solvers::ra_omp(phi, y, k, DEFAULT_REL_TOL),
        Algorithm::RaOrmp => solvers::ra_ormp(phi, y, k, DEFAULT_REL_TOL),
        Algorithm::ExhaustiveOracle => solvers::exhaustive_oracle(phi, y, k),
        Algorithm::ReducedRankSearch => solvers::reduced_rank_search(phi, y, k, DEFAULT_REL_TOL),
    }
}

fn run_trial(
    spec: &ExperimentSpec,
    fixed_dict: Option<&Dictionary>,
    l: usize,
    k: usize,
    tau: usize,
    trial: u64,
) -> Vec<TrialOutcome> {
    let cell_tags = [TAG_TRIAL, l as u64, k as u64, tau as u64, trial];
    let mut rng = derive_stream(spec.master_seed, &cell_tags);

    let owned_dict;
    let phi = match fixed_dict {
        Some(d) => d,
        None => match gen_dictionary(spec.m, spec.n, &mut rng) {
            Ok(d) => {
                owned_dict = d;
                &owned_dict
            }
            Err(_) => return error_outcomes(spec.algorithms.len()),
        },
    };

    let mut signal = None;
    for attempt in 0..MAX_SIGNAL_RETRIES {
        let drawn = if attempt == 0 {
            gen_signal(spec.n, l, k, tau, &mut rng)
        } else {
            let retry_tags = [TAG_RETRY, l as u64, k as u64, tau as u64, trial, attempt];
            let mut retry_rng = derive_stream(spec.master_seed, &retry_tags);
            gen_signal(spec.n, l, k, tau, &mut retry_rng)
        };
        match drawn {
            Ok(s) => {
                signal = Some(s);
                break;
            }
            Err(Error::DegenerateRandomDraw) => continue,
            Err(_) => break,
        }
    }
    let Some(x) = signal else {
        return error_outcomes(spec.algorithms.len());
    };
    let Ok(y) = measure(phi, &x) else {
        return error_outcomes(spec.algorithms.len());
    };

    spec.algorithms
        .iter()
        .map(|&algorithm| {
            let start = Instant::now();
            let solved = solve_one(algorithm, phi, y.entries(), k);
            let nanos = start.elapsed().as_nanos() as u64;
            match solved {
                Ok(result) => TrialOutcome {
                    success: recovery_success(&x, &result, spec.success_rel_tol),
                    solver_error: false,
                    nanos,
                },
                Err(_) => TrialOutcome {
                    success: false,
                    solver_error: true,
                    nanos,
                },
            }
        })
        .collect()
}

fn error_outcomes(count: usize) -> Vec<TrialOutcome> {
    (0..count)
        .map(|_| TrialOutcome {
            success: false,
            solver_error: true,
            nanos: 0,
        })
        .collect()
}

/// Thread cap from `MMVBENCH_THREADS`, when set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("MMVBENCH_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t >= 1)
}

/// Runs the sweep and returns one row per `(algorithm, l, k, tau)` cell, in
/// that order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    run_experiment_with_diagnostics(spec).map(|(rows, _)| rows)
}

/// [`run_experiment`] plus per-cell solver-error tallies.
pub fn run_experiment_with_diagnostics(
    spec: &ExperimentSpec,
) -> Result<(Vec<ResultRow>, Vec<CellDiagnostics>)> {
    spec.validate()?;
    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(cap) = thread_cap() {
            builder = builder.num_threads(cap);
        }
        builder
            .build()
            .map_err(|e| Error::param(format!("thread pool: {e}")))?
    };

    let fixed_dict = if spec.fix_dictionary {
        let mut rng = derive_stream(spec.master_seed, &[TAG_DICT]);
        Some(gen_dictionary(spec.m, spec.n, &mut rng)?)
    } else {
        None
    };

    let mut cells: Vec<(usize, usize, usize)> = Vec::new();
    for &l in &spec.l_values {
        for &k in &spec.k_values {
            for tau in spec.tau_rule.taus_for(k, l) {
                cells.push((l, k, tau));
            }
        }
    }

    // (algorithm index, cell) -> (successes, errors, nanos)
    let mut tallies: HashMap<(usize, usize, usize, usize), (usize, usize, u64)> = HashMap::new();
    for &(l, k, tau) in &cells {
        let per_trial: Vec<Vec<TrialOutcome>> = pool.install(|| {
            (0..spec.trials as u64)
                .into_par_iter()
                .map(|trial| run_trial(spec, fixed_dict.as_ref(), l, k, tau, trial))
                .collect()
        });
        for (a, _) in spec.algorithms.iter().enumerate() {
            let mut successes = 0;
            let mut errors = 0;
            let mut nanos = 0u64;
            for outcomes in &per_trial {
                let o = &outcomes[a];
                successes += usize::from(o.success);
                errors += usize::from(o.solver_error);
                nanos += o.nanos;
            }
            tallies.insert((a, l, k, tau), (successes, errors, nanos));
        }
    }

    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    for (a, &algorithm) in spec.algorithms.iter().enumerate() {
        for &(l, k, tau) in &cells {
            let (successes, errors, nanos) = tallies[&(a, l, k, tau)];
            rows.push(ResultRow {
                algorithm,
                n: spec.n,
                m: spec.m,
                l,
                k,
                tau,
                trials: spec.trials,
                successes,
                rate: successes as f64 / spec.trials as f64,
                wall_time_ms: (nanos + 500_000) / 1_000_000,
            });
            diagnostics.push(CellDiagnostics {
                algorithm,
                l,
                k,
                tau,
                solver_errors: errors,
            });
        }
    }
    Ok((rows, diagnostics))
}

/// Renders rows in the requested format.
///
/// The CSV header is fixed (`algorithm,n,m,l,k,tau,trials,successes,rate,
/// wall_time_ms`) with rates at six decimal places; JSON is an array of
/// objects with the same field names.
pub fn render_results(rows: &[ResultRow], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::from("algorithm,n,m,l,k,tau,trials,successes,rate,wall_time_ms\n");
            for row in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{:.6},{}\n",
                    row.algorithm.name(),
                    row.n,
                    row.m,
                    row.l,
                    row.k,
                    row.tau,
                    row.trials,
                    row.successes,
                    row.rate,
                    row.wall_time_ms
                ));
            }
            out
        }
        OutputFormat::Json => {
            let mut out =
                serde_json::to_string_pretty(rows).expect("result rows serialize infallibly");
            out.push('\n');
            out
        }
    }
}

/// Writes rendered rows to `path`.
pub fn emit_results(rows: &[ResultRow], format: OutputFormat, path: &Path) -> Result<()> {
    fs::write(path, render_results(rows, format)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes rendered rows to an arbitrary sink (used for stdout output).
pub fn write_results<W: Write>(rows: &[ResultRow], format: OutputFormat, out: &mut W) -> std::io::Result<()> {
    out.write_all(render_results(rows, format).as_bytes())
}

//! Command-line front end for the benchmark and the diagnostic tools.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use mmv::bench::{self, ExperimentSpec, OutputFormat, TauRule};
use mmv::problem::{self, Dictionary};
use mmv::solvers::Algorithm;
use mmv::{conditions, numerics};

#[derive(Parser)]
#[command(
    name = "mmvbench",
    about = "Joint-sparse MMV recovery benchmark and diagnostics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo recovery sweep and emit per-cell rates.
    Run(RunArgs),
    /// Brute-force spark of a matrix stored as CSV (guarded to 20 columns).
    Spark {
        /// Matrix file: one row per line, comma-separated.
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Exact recovery condition value for a support set.
    Erc {
        /// Dictionary file with unit-norm columns.
        #[arg(long)]
        matrix: PathBuf,
        /// Support atom indices, comma-separated, 0-based.
        #[arg(long, value_delimiter = ',')]
        support: Vec<usize>,
    },
    /// Adversarial constructions from the identifiability analysis.
    #[command(subcommand)]
    Construct(ConstructCommand),
    /// Write a seeded Gaussian dictionary to CSV (fixture helper).
    GenDictionary {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ConstructCommand {
    /// Two distinct k-joint-sparse signals with identical measurements
    /// (exists whenever 2k >= spark - 1 + tau).
    Nonunique {
        /// Dictionary file with unit-norm columns.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        tau: usize,
        /// Channel count; defaults to tau.
        #[arg(long)]
        l: Option<usize>,
        /// Known spark value (skips the brute-force search).
        #[arg(long)]
        spark: Option<usize>,
        /// Write the first signal here (CSV).
        #[arg(long)]
        out_x: Option<PathBuf>,
        /// Write the alternative signal here (CSV).
        #[arg(long)]
        out_alt: Option<PathBuf>,
    },
    /// Rank-tau signal on a given support that makes SOMP pick a wrong atom
    /// first, for q in {1, 2, inf} (requires ERC > 1 on the support).
    SompDefeat {
        /// Dictionary file with unit-norm columns.
        #[arg(long)]
        matrix: PathBuf,
        /// Support atom indices, comma-separated, 0-based.
        #[arg(long, value_delimiter = ',')]
        support: Vec<usize>,
        #[arg(long)]
        tau: usize,
        #[arg(long)]
        l: usize,
        /// Fraction of the selection margin the rank perturbation may eat,
        /// in (0, 1].
        #[arg(long, default_value_t = 0.5)]
        slack: f64,
        /// Write the signal here (CSV).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Number of atoms.
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// Measurements per channel.
    #[arg(long, default_value_t = 32)]
    m: usize,
    /// Channel counts; comma-separated values and inclusive a..b ranges
    /// (e.g. "1,2,4,16,32" or "1..32").
    #[arg(long, default_value = "32")]
    l: String,
    /// Sparsity levels; same syntax as --l.
    #[arg(long, default_value = "1..16")]
    k: String,
    /// Signal rank rule: "full" (= min(k, l)) or an explicit list.
    #[arg(long, default_value = "full")]
    tau: String,
    /// Algorithms: comma-separated subset of
    /// q-thresh,somp,ra-thresh,ra-omp,ra-ormp,oracle,rr-search.
    #[arg(long, default_value = "somp,ra-omp,ra-ormp,ra-thresh")]
    algos: String,
    /// Monte Carlo trials per cell.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Master seed for all RNG substreams.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative Frobenius tolerance of the success predicate.
    #[arg(long, default_value_t = 1e-6)]
    success_rel_tol: f64,
    /// Draw a single dictionary for the whole sweep instead of one per
    /// trial.
    #[arg(long)]
    fix_dictionary: bool,
}

fn parse_usize_list(text: &str, what: &str) -> anyhow::Result<Vec<usize>> {
    let mut values = Vec::new();
    for token in text.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        if let Some((lo, hi)) = token.split_once("..") {
            let lo: usize = lo.trim().parse().with_context(|| format!("bad {what} range start {lo:?}"))?;
            let hi: usize = hi.trim().parse().with_context(|| format!("bad {what} range end {hi:?}"))?;
            if lo > hi {
                bail!("empty {what} range {token:?}");
            }
            values.extend(lo..=hi);
        } else {
            values.push(token.parse().with_context(|| format!("bad {what} value {token:?}"))?);
        }
    }
    if values.is_empty() {
        bail!("no {what} values given");
    }
    Ok(values)
}

fn load_dictionary(path: &PathBuf) -> anyhow::Result<Dictionary> {
    let entries = problem::load_matrix_csv(path)?;
    let dict = if entries.nrows() < entries.ncols() {
        Dictionary::new(entries)
    } else {
        Dictionary::fixture(entries)
    };
    dict.with_context(|| format!("{} is not a valid dictionary", path.display()))
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let tau_rule = if args.tau == "full" {
        TauRule::Full
    } else {
        TauRule::Explicit(parse_usize_list(&args.tau, "tau")?)
    };
    let algorithms = args
        .algos
        .split(',')
        .map(|s| s.trim().parse::<Algorithm>())
        .collect::<mmv::Result<Vec<_>>>()?;
    let format: OutputFormat = args.format.parse()?;
    let spec = ExperimentSpec {
        n: args.n,
        m: args.m,
        l_values: parse_usize_list(&args.l, "l")?,
        k_values: parse_usize_list(&args.k, "k")?,
        tau_rule,
        trials: args.trials,
        algorithms,
        master_seed: args.seed,
        success_rel_tol: args.success_rel_tol,
        fix_dictionary: args.fix_dictionary,
    };
    let (rows, diagnostics) = bench::run_experiment_with_diagnostics(&spec)?;
    for diag in diagnostics.iter().filter(|d| d.solver_errors > 0) {
        eprintln!(
            "warning: {} at l={} k={} tau={}: {} trials failed with solver errors",
            diag.algorithm, diag.l, diag.k, diag.tau, diag.solver_errors
        );
    }
    match &args.out {
        Some(path) => {
            bench::emit_results(&rows, format, path)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => {
            let stdout = std::io::stdout();
            bench::write_results(&rows, format, &mut stdout.lock())?;
        }
    }
    Ok(())
}

fn cmd_construct(cmd: ConstructCommand) -> anyhow::Result<()> {
    match cmd {
        ConstructCommand::Nonunique {
            matrix,
            k,
            tau,
            l,
            spark,
            out_x,
            out_alt,
        } => {
            let phi = load_dictionary(&matrix)?;
            let l = l.unwrap_or(tau);
            let pair = problem::construct_nonunique_pair(&phi, k, tau, l, spark)?;
            let yx = problem::measure(&phi, &pair.x)?;
            let yalt = problem::measure(&phi, &pair.x_alt)?;
            let deviation = (yx.entries() - yalt.entries()).amax();
            println!("dependent set T ({} indices): {:?}", pair.support_t.len(), pair.support_t);
            println!("supp(X)  = {:?} (rank {})", pair.x.support(), pair.x.rank());
            println!("supp(X') = {:?} (rank {})", pair.x_alt.support(), pair.x_alt.rank());
            println!("max |Phi X - Phi X'| = {deviation:.3e}");
            if let Some(path) = out_x {
                problem::save_matrix_csv(&path, pair.x.entries())?;
            }
            if let Some(path) = out_alt {
                problem::save_matrix_csv(&path, pair.x_alt.entries())?;
            }
            Ok(())
        }
        ConstructCommand::SompDefeat {
            matrix,
            support,
            tau,
            l,
            slack,
            out,
        } => {
            let phi = load_dictionary(&matrix)?;
            let erc = conditions::erc(&phi, &support)?;
            let signal = problem::construct_somp_defeating_instance(&phi, &support, tau, l, slack)?;
            let y = problem::measure(&phi, &signal)?;
            println!("erc = {erc:.6} (> 1 required)");
            println!("supp(X) = {:?}, rank = {}", signal.support(), signal.rank());
            for q in [mmv::solvers::QNorm::One, mmv::solvers::QNorm::Two, mmv::solvers::QNorm::Inf] {
                let result = mmv::solvers::somp(&phi, y.entries(), support.len(), q)?;
                let first = result.selection_order()[0];
                let verdict = if support.contains(&first) { "IN SUPPORT (unexpected)" } else { "off support" };
                println!("somp q={q}: first selection = atom {first} ({verdict})");
            }
            if let Some(path) = out {
                problem::save_matrix_csv(&path, signal.entries())?;
            }
            Ok(())
        }
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Spark { matrix } => {
            let entries = problem::load_matrix_csv(&matrix)?;
            let value = numerics::spark(&entries)?;
            println!("{value}");
            Ok(())
        }
        Command::Erc { matrix, support } => {
            let phi = load_dictionary(&matrix)?;
            let value = conditions::erc(&phi, &support)?;
            println!("{value:.12}");
            Ok(())
        }
        Command::Construct(cmd) => cmd_construct(cmd),
        Command::GenDictionary { m, n, seed, out } => {
            let mut rng = problem::derive_stream(seed, &[]);
            let phi = problem::gen_dictionary(m, n, &mut rng)?;
            problem::save_matrix_csv(&out, phi.entries())?;
            let mut stderr = std::io::stderr();
            let _ = writeln!(stderr, "wrote {m}x{n} dictionary to {}", out.display());
            Ok(())
        }
    }
}

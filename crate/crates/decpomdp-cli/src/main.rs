use clap::{Parser, Subcommand};
use decpomdp_cli::{exit_code, run_solve, run_sweep, run_verify, Algorithm, HeuristicArg, ReprArg, RunConfig};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "decpomdp", about = "Optimal finite-horizon Dec-POMDP planning with the GMAA* family")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct CommonArgs {
    /// path to a .dpomdp problem file
    #[arg(long)]
    problem: Option<PathBuf>,
    /// random instance spec: n,S,A,O,seed
    #[arg(long)]
    random: Option<String>,
    /// planning horizon (number of stages)
    #[arg(long)]
    horizon: usize,
    /// admissible heuristic
    #[arg(long, value_enum, default_value = "qbg")]
    heuristic: HeuristicArg,
    /// heuristic representation
    #[arg(long, value_enum, default_value = "tree")]
    qrepr: ReprArg,
    /// probabilistic-equivalence tolerance for clustering
    #[arg(long, default_value_t = 1e-9)]
    pe_tol: f64,
    /// directory for heuristic cache files (read and write)
    #[arg(long)]
    cache_heuristic: Option<PathBuf>,
    /// wall-clock limit for the search, seconds
    #[arg(long, default_value_t = 600)]
    time_limit: u64,
    /// cap on search nodes (and brute-force policies)
    #[arg(long, default_value_t = 1_000_000)]
    node_cap: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and print its optimal value
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// search algorithm
        #[arg(long, value_enum, default_value = "ice")]
        algorithm: Algorithm,
        /// write run statistics as JSON
        #[arg(long)]
        stats: Option<PathBuf>,
        /// write the optimal joint policy (textual trees, or CSV if the
        /// path ends in .csv)
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Solve a horizon range and emit a CSV table
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// horizon range, e.g. 2..5 (inclusive); overrides --horizon
        #[arg(long)]
        sweep: String,
        /// comma-separated algorithms to run
        #[arg(long, default_value = "ic,ice")]
        algorithms: String,
    },
    /// Cross-check brute force, GMAA*, IC and ICE on random instances
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// number of seeded random models
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        /// model sizes: n,S,A,O
        #[arg(long, default_value = "2,2,2,2")]
        sizes: String,
        /// re-run a single seed verbosely
        #[arg(long)]
        replay_seed: Option<u64>,
    },
}

fn to_config(common: &CommonArgs, algorithm: Algorithm) -> RunConfig {
    RunConfig {
        problem: common.problem.clone(),
        random: common.random.clone(),
        horizon: common.horizon,
        algorithm,
        heuristic: common.heuristic,
        qrepr: common.qrepr,
        pe_tol: common.pe_tol,
        stats: None,
        policy: None,
        cache_heuristic: common.cache_heuristic.clone(),
        time_limit_s: common.time_limit,
        node_cap: common.node_cap,
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve { common, algorithm, stats, policy } => {
            let mut config = to_config(&common, algorithm);
            config.stats = stats;
            config.policy = policy;
            run_solve(&config)
        }
        Command::Sweep { common, sweep, algorithms } => {
            let config = to_config(&common, Algorithm::Ice);
            let range: Vec<&str> = sweep.split("..").collect();
            let parsed = (|| -> Option<(usize, usize)> {
                if range.len() != 2 {
                    return None;
                }
                Some((range[0].trim().parse().ok()?, range[1].trim().parse().ok()?))
            })();
            let algos: Result<Vec<Algorithm>, String> = algorithms
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| match t.trim() {
                    "bf" => Ok(Algorithm::Bf),
                    "gmaa" => Ok(Algorithm::Gmaa),
                    "ic" => Ok(Algorithm::Ic),
                    "ice" => Ok(Algorithm::Ice),
                    other => Err(format!("unknown algorithm `{other}`")),
                })
                .collect();
            match (parsed, algos) {
                (Some((from, to)), Ok(algos)) => run_sweep(&config, from, to, &algos),
                (None, _) => {
                    eprintln!("error: --sweep expects h1..h2");
                    exit_code::USAGE
                }
                (_, Err(msg)) => {
                    eprintln!("error: {msg}");
                    exit_code::USAGE
                }
            }
        }
        Command::Verify { common, seeds, sizes, replay_seed } => {
            let config = to_config(&common, Algorithm::Ice);
            if config.horizon == 0 {
                eprintln!("error: horizon must be at least 1");
                std::process::exit(exit_code::USAGE);
            }
            let parts: Vec<usize> =
                sizes.split(',').filter_map(|t| t.trim().parse().ok()).collect();
            if parts.len() != 4 {
                eprintln!("error: --sizes expects n,S,A,O");
                std::process::exit(exit_code::USAGE);
            }
            run_verify(&config, seeds, (parts[0], parts[1], parts[2], parts[3]), replay_seed)
        }
    };
    std::process::exit(code);
}

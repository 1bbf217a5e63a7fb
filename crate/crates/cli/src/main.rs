use std::path::PathBuf;
use std::process::ExitCode;

use basket_aad::Method;
use basket_aad_cli::{
    cmd_benchmark, cmd_greeks, cmd_price, format_price, BenchmarkOptions, CliError, RunOptions,
};
use clap::{Args, Parser, Subcommand};

/// Basket default swap pricing and adjoint correlation Greeks.
#[derive(Parser)]
#[command(name = "basket-aad", version)]
struct Cli {
    /// Worker threads for the path loop (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file for CSV results (default: the config's output path, else stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price the contract: prints value, standard error and path count.
    Price { config: PathBuf },
    /// Correlation Greeks as CSV (i,j,rho,dV_drho,stderr).
    Greeks {
        config: PathBuf,
        /// bump | forward | aad-per-path | aad-binned (default: config, else aad-binned).
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
    },
    /// Cost of Greeks relative to pricing as CSV (n_names,method,ratio,seconds_value,seconds_total).
    Benchmark(BenchArgs),
}

#[derive(Args)]
struct BenchArgs {
    config: PathBuf,
    /// Comma-separated basket sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 24, 32, 40, 48, 64])]
    names_grid: Vec<usize>,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_values = ["bump", "aad-per-path", "aad-binned"])]
    methods: Vec<Method>,
    /// Timed repeats per measurement; the median is reported.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Most bumped pairs timed per run; the rest are extrapolated.
    #[arg(long, default_value_t = 16)]
    max_bump_pairs: usize,
    /// Exit with status 3 when a timing's coefficient of variation exceeds 20%.
    #[arg(long)]
    strict_timing: bool,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: basket_aad::Error| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let opts = RunOptions {
        seed: cli.seed,
        out: cli.out,
    };
    match cli.command {
        Command::Price { config } => {
            let p = cmd_price(&config, &opts)?;
            println!("{}", format_price(&p));
        }
        Command::Greeks { config, method } => {
            let g = cmd_greeks(&config, method, &opts)?;
            log::info!("{} {}", g.method, format_price(&g.price));
        }
        Command::Benchmark(args) => {
            let bench = BenchmarkOptions {
                names_grid: args.names_grid,
                methods: args.methods,
                repeats: args.repeats,
                max_bump_pairs: args.max_bump_pairs,
            };
            let rows = cmd_benchmark(&args.config, &bench, &opts)?;
            if args.strict_timing && rows.iter().any(|r| !r.is_stable()) {
                return Err(CliError::Numerical(
                    "unstable timings (see warnings)".into(),
                ));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
        {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

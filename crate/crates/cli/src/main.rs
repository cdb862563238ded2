use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use toml::{Table, Value};

mod commands;
mod config;
mod failure;
mod io;

use failure::Failure;

#[derive(Parser)]
#[command(name = "volmellin", version, about = "Mellin spectral cut-off density estimation for stochastic volatility")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a volatility path and its noisy observations.
    Simulate(RunArgs),
    /// Estimate the density of observations read from a CSV file.
    Estimate(RunArgs),
    /// Monte-Carlo study of the adaptive estimator.
    Mc(RunArgs),
    /// Check analytic identities and print one line per check.
    Selftest,
}

#[derive(Args, Default)]
struct RunArgs {
    /// Flat TOML configuration file (a previous manifest works).
    #[arg(long)]
    config: Option<PathBuf>,
    /// figure1, figure2 or theorem-rate.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads for Monte-Carlo replications.
    #[arg(long)]
    threads: Option<usize>,

    /// exp-ou, cir or exp-cir.
    #[arg(long)]
    process: Option<String>,
    /// Stationary Gamma shapes of the CIR coordinates, e.g. 2,2.
    #[arg(long, value_parser = parse_u32_pair)]
    rho: Option<[u32; 2]>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated sample sizes for mc.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    substeps: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// chi2 or none.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    chi: Option<f64>,
    /// volatility or general.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    grid_step: Option<f64>,
    #[arg(long)]
    freq_step: Option<f64>,
    /// Also fit the direct observations in mc.
    #[arg(long, action = ArgAction::Set)]
    oracle: Option<bool>,
    #[arg(long)]
    oracle_chi: Option<f64>,
    #[arg(long)]
    oracle_mode: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    probe_lo: Option<f64>,
    #[arg(long)]
    probe_hi: Option<f64>,
    #[arg(long)]
    probe_count: Option<usize>,
    #[arg(long)]
    section: Option<f64>,
    #[arg(long)]
    tail_radius: Option<f64>,
    /// Select the cut-off by penalized contrast.
    #[arg(long)]
    adaptive: bool,
    /// Fixed cut-off, e.g. 1,1.
    #[arg(long, value_parser = parse_f64_pair)]
    k: Option<[f64; 2]>,
    /// Observation CSV for estimate.
    #[arg(long)]
    input: Option<String>,
    /// Input columns read as observations, e.g. vbar1,vbar2.
    #[arg(long, value_parser = parse_str_pair)]
    input_columns: Option<[String; 2]>,
}

fn pair<T: std::str::FromStr>(s: &str) -> Result<[T; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok([
            a.parse().map_err(|_| format!("'{a}' is not valid"))?,
            b.parse().map_err(|_| format!("'{b}' is not valid"))?,
        ]),
        _ => Err(format!("expected two comma-separated values, got '{s}'")),
    }
}

fn parse_f64_pair(s: &str) -> Result<[f64; 2], String> {
    pair(s)
}

fn parse_u32_pair(s: &str) -> Result<[u32; 2], String> {
    pair(s)
}

fn parse_str_pair(s: &str) -> Result<[String; 2], String> {
    pair(s)
}

impl RunArgs {
    fn flag_table(&self) -> Result<Table, Failure> {
        let mut t = Table::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                t.insert(k.into(), v);
            }
        };
        let int = |v: Option<usize>| v.map(|x| Value::Integer(x as i64));
        let pair_f = |p: Option<[f64; 2]>| p.map(|p| Value::Array(vec![p[0].into(), p[1].into()]));
        put("preset", self.preset.clone().map(Value::from));
        put("process", self.process.clone().map(Value::from));
        put("rho", self.rho.map(|r| Value::Array(vec![Value::from(r[0] as i64), Value::from(r[1] as i64)])));
        put("n", int(self.n));
        put("sizes", self.sizes.as_ref().map(|v| Value::Array(v.iter().map(|x| Value::Integer(*x as i64)).collect())));
        put("delta", self.delta.map(Value::from));
        put("substeps", int(self.substeps));
        put("burn_in", int(self.burn_in));
        if let Some(seed) = self.seed {
            let s = i64::try_from(seed).map_err(|_| Failure::validation(format!("seed {seed} exceeds {}", i64::MAX)))?;
            put("seed", Some(Value::Integer(s)));
        }
        put("noise", self.noise.clone().map(Value::from));
        put("chi", self.chi.map(Value::from));
        put("mode", self.mode.clone().map(Value::from));
        put("grid_step", self.grid_step.map(Value::from));
        put("freq_step", self.freq_step.map(Value::from));
        put("oracle", self.oracle.map(Value::from));
        put("oracle_chi", self.oracle_chi.map(Value::from));
        put("oracle_mode", self.oracle_mode.clone().map(Value::from));
        put("reps", int(self.reps));
        put("probe_lo", self.probe_lo.map(Value::from));
        put("probe_hi", self.probe_hi.map(Value::from));
        put("probe_count", int(self.probe_count));
        put("section", self.section.map(Value::from));
        put("tail_radius", self.tail_radius.map(Value::from));
        put("adaptive", self.adaptive.then_some(Value::from(true)));
        put("k", pair_f(self.k));
        put("input", self.input.clone().map(Value::from));
        put(
            "input_columns",
            self.input_columns.as_ref().map(|c| Value::Array(vec![c[0].clone().into(), c[1].clone().into()])),
        );
        Ok(t)
    }

    fn resolve(&self) -> Result<config::RunConfig, Failure> {
        let file = match &self.config {
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|e| Failure::io(format!("{}: {e}", p.display())))?;
                Some(config::parse_file(&text)?)
            }
            None => None,
        };
        config::resolve(file, self.flag_table()?)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let args = match &cli.command {
        Command::Selftest => return commands::selftest(),
        Command::Simulate(a) | Command::Estimate(a) | Command::Mc(a) => a,
    };
    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(Failure::validation("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::validation(format!("thread pool: {e}")))?;
    }
    let cfg = args.resolve()?;
    match cli.command {
        Command::Simulate(_) => commands::simulate(&cfg, &args.out),
        Command::Estimate(_) => commands::estimate(&cfg, &args.out),
        Command::Mc(_) => commands::mc(&cfg, &args.out),
        Command::Selftest => unreachable!(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}

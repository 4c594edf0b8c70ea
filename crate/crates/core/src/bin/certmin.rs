use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use certmin::benchmarks::{reference_minima, RanaSyntax};
use certmin::cooperation::Mode;
use certmin::runner::{self, JsonLinesSink, OutputFormat, RunConfig};

#[derive(Parser)]
#[command(
    name = "certmin",
    version,
    about = "Certified global minimization of benchmark functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize one benchmark and report the certified result.
    Run(RunArgs),
    /// List the recorded minima bundled with the crate.
    Reference,
}

#[derive(Args)]
struct RunArgs {
    /// michalewicz, sine-envelope, shekel, egg-holder, rana or keane
    #[arg(long, short)]
    function: String,
    #[arg(long, short)]
    n: usize,
    /// hybrid, ibc-only, de-only or deterministic-interleaved
    #[arg(long, default_value = "hybrid", value_parser = parse::<Mode>)]
    mode: Mode,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Population size (default depends on the function)
    #[arg(long)]
    np: Option<usize>,
    /// DE weighting factor
    #[arg(long)]
    w: Option<f64>,
    /// DE crossover rate
    #[arg(long)]
    cr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// original or rewritten
    #[arg(long, default_value = "original", value_parser = parse::<RanaSyntax>)]
    rana_syntax: RanaSyntax,
    /// Wall-clock limit in seconds
    #[arg(long)]
    time_limit: Option<f64>,
    /// text, json-lines or csv
    #[arg(long, default_value = "text", value_parser = parse::<OutputFormat>)]
    format: OutputFormat,
    /// Alternative Shekel foxhole table
    #[arg(long)]
    shekel_data: Option<PathBuf>,
}

fn parse<T>(s: &str) -> Result<T, String>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(args) => run(args),
        Command::Reference => reference(),
    };
    ExitCode::from(code as u8)
}

fn run(a: RunArgs) -> i32 {
    let cfg = RunConfig {
        function: a.function,
        n: a.n,
        epsilon: a.epsilon,
        mode: a.mode,
        np: a.np,
        w: a.w,
        cr: a.cr,
        seed: a.seed,
        rana_syntax: a.rana_syntax,
        time_limit_seconds: a.time_limit,
        format: a.format,
        shekel_data: a.shekel_data,
    };
    let stdout = io::stdout();
    let result = match cfg.format {
        OutputFormat::JsonLines => runner::run_with_sink(&cfg, &mut JsonLinesSink(stdout.lock())),
        _ => runner::run(&cfg),
    };
    let r = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("certmin: {e}");
            return e.exit_code();
        }
    };
    let mut out = stdout.lock();
    let written = match cfg.format {
        OutputFormat::Text => write!(out, "{}", runner::report_table(std::slice::from_ref(&r))),
        OutputFormat::JsonLines => writeln!(out, "{}", runner::result_json_line(&r)),
        OutputFormat::Csv => runner::write_csv(&mut out, std::slice::from_ref(&r)),
    };
    if let Err(e) = written.and_then(|_| out.flush()) {
        eprintln!("certmin: {e}");
    }
    r.status.exit_code()
}

fn reference() -> i32 {
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "{:<14} {:>3} {:>16}  source", "function", "n", "value");
    for m in reference_minima() {
        let _ = writeln!(
            out,
            "{:<14} {:>3} {:>16.7}  {}",
            m.function.as_str(),
            m.n,
            m.value,
            m.source.as_deref().unwrap_or("-")
        );
    }
    0
}

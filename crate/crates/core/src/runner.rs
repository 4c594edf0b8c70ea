//! Run configuration, result records and their text/JSON/CSV renderings.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmarks::{self, BenchmarkError, Function, ProblemOptions, RanaSyntax, ShekelData};
use crate::cooperation::{run_single, Mode, RunOutcome};
use crate::de::DeConfig;
use crate::ibc::{IbcConfig, Status};
use crate::progress::{finite, Event, NullSink, Record, Sink, Worker};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Text,
    JsonLines,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = RunError;
    fn from_str(s: &str) -> Result<Self, RunError> {
        match s {
            "text" => Ok(OutputFormat::Text),
            "json-lines" | "jsonl" => Ok(OutputFormat::JsonLines),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(RunError::Config(format!("unknown output format {s:?}"))),
        }
    }
}

impl FromStr for Mode {
    type Err = RunError;
    fn from_str(s: &str) -> Result<Self, RunError> {
        match s {
            "hybrid" => Ok(Mode::Hybrid),
            "ibc-only" => Ok(Mode::IbcOnly),
            "de-only" => Ok(Mode::DeOnly),
            "deterministic-interleaved" => Ok(Mode::DeterministicInterleaved),
            _ => Err(RunError::Config(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(BenchmarkError),
}

impl From<BenchmarkError> for RunError {
    fn from(e: BenchmarkError) -> Self {
        match e {
            BenchmarkError::DataFile { .. } | BenchmarkError::DataFormat { .. } => {
                RunError::Data(e)
            }
            other => RunError::Config(other.to_string()),
        }
    }
}

/// Everything needed to reproduce a run. `None` DE parameters fall back to
/// the per-function defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub function: String,
    pub n: usize,
    pub epsilon: f64,
    pub mode: Mode,
    pub np: Option<usize>,
    pub w: Option<f64>,
    pub cr: Option<f64>,
    pub seed: u64,
    pub rana_syntax: RanaSyntax,
    pub time_limit_seconds: Option<f64>,
    pub format: OutputFormat,
    pub shekel_data: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(function: impl Into<String>, n: usize) -> Self {
        RunConfig {
            function: function.into(),
            n,
            epsilon: 1e-6,
            mode: Mode::Hybrid,
            np: None,
            w: None,
            cr: None,
            seed: 0,
            rana_syntax: RanaSyntax::Original,
            time_limit_seconds: None,
            format: OutputFormat::Text,
            shekel_data: None,
        }
    }

    /// Checks every field and resolves defaults, without running anything.
    pub fn resolve(&self) -> Result<(Function, DeConfig, IbcConfig), RunError> {
        let f: Function = self.function.parse()?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(RunError::Config(format!(
                "epsilon must be positive (got {})",
                self.epsilon
            )));
        }
        if self.n < 2 {
            return Err(RunError::Config(format!(
                "n must be at least 2 (got {})",
                self.n
            )));
        }
        let time_limit = match self.time_limit_seconds {
            Some(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(RunError::Config(format!(
                    "time limit must be positive (got {t})"
                )))
            }
            Some(t) => Some(Duration::from_secs_f64(t)),
            None => None,
        };
        let (np, w, cr) = benchmarks::de_defaults(Some(f));
        let de = DeConfig {
            np: self.np.unwrap_or(np),
            w: self.w.unwrap_or(w),
            cr: self.cr.unwrap_or(cr),
            seed: self.seed,
            time_limit,
            ..Default::default()
        };
        de.validate().map_err(|e| RunError::Config(e.to_string()))?;
        let ibc = IbcConfig {
            epsilon: self.epsilon,
            time_limit,
            ..Default::default()
        };
        Ok((f, de, ibc))
    }
}

/// Outcome of a run, as reported and serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedResult {
    pub function: String,
    pub n: usize,
    pub mode: Mode,
    pub status: ResultStatus,
    /// Best certified upper bound (best float value for de-only runs).
    pub f_best: Option<f64>,
    pub lower_bound: Option<f64>,
    pub x_best: Option<Vec<f64>>,
    /// Absent in deterministic mode so that its output is reproducible.
    pub wall_time_s: Option<f64>,
    pub ne_de: u64,
    pub ne_ibc: u64,
    /// Objective evaluations of any kind (float and interval).
    pub f_evals: u64,
}

/// [`Status`] plus the outcome of a de-only run, which certifies nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResultStatus {
    Certified,
    Timeout,
    Infeasible,
    Unresolved,
    Uncertified,
}

impl From<Status> for ResultStatus {
    fn from(s: Status) -> Self {
        match s {
            Status::Certified => ResultStatus::Certified,
            Status::Timeout => ResultStatus::Timeout,
            Status::Infeasible => ResultStatus::Infeasible,
            Status::Unresolved => ResultStatus::Unresolved,
        }
    }
}

impl ResultStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ResultStatus::Certified => "certified",
            ResultStatus::Timeout => "timeout",
            ResultStatus::Infeasible => "infeasible",
            ResultStatus::Unresolved => "unresolved",
            ResultStatus::Uncertified => "uncertified",
        }
    }

    /// Process exit code for this outcome.
    pub fn exit_code(self) -> i32 {
        match self {
            ResultStatus::Certified | ResultStatus::Uncertified => 0,
            ResultStatus::Timeout => 3,
            ResultStatus::Infeasible => 4,
            ResultStatus::Unresolved => 5,
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Data(_) => 6,
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<CertifiedResult, RunError> {
    run_with_sink(cfg, &mut NullSink)
}

/// Validates, builds the problem, runs the selected mode and streams
/// progress into `sink`.
pub fn run_with_sink<S: Sink + ?Sized>(
    cfg: &RunConfig,
    sink: &mut S,
) -> Result<CertifiedResult, RunError> {
    let (f, de_cfg, ibc_cfg) = cfg.resolve()?;
    let opts = ProblemOptions {
        rana_syntax: cfg.rana_syntax,
        shekel_data: match (&cfg.shekel_data, f) {
            (Some(path), Function::Shekel) => Some(ShekelData::load(path)?),
            _ => None,
        },
    };
    let problem = benchmarks::make_problem(f, cfg.n, &opts)?;
    let started = Instant::now();
    let RunOutcome { ibc, de } = run_single(&problem, cfg.mode, de_cfg, ibc_cfg, sink)
        .map_err(|e| RunError::Config(e.to_string()))?;
    let elapsed = started.elapsed().as_secs_f64();
    let (ne_de, de_evals) = de.as_ref().map_or((0, 0), |d| (d.ne_de, d.evaluations));
    let result = match ibc {
        Some(o) => CertifiedResult {
            function: f.as_str().to_string(),
            n: cfg.n,
            mode: cfg.mode,
            status: o.status.into(),
            f_best: finite(o.f_best),
            lower_bound: finite(o.lower_bound),
            x_best: o.x_best,
            wall_time_s: None,
            ne_de,
            ne_ibc: o.ne_ibc,
            f_evals: de_evals + o.ne_ibc,
        },
        None => {
            let d = de.expect("de-only run has a DE outcome");
            CertifiedResult {
                function: f.as_str().to_string(),
                n: cfg.n,
                mode: cfg.mode,
                status: ResultStatus::Uncertified,
                f_best: d.best.eval.f.and_then(finite),
                lower_bound: None,
                x_best: Some(d.best.position),
                wall_time_s: None,
                ne_de,
                ne_ibc: 0,
                f_evals: de_evals,
            }
        }
    };
    Ok(CertifiedResult {
        wall_time_s: (cfg.mode != Mode::DeterministicInterleaved).then_some(elapsed),
        ..result
    })
}

/// Writes progress records as JSON lines.
pub struct JsonLinesSink<W: Write>(pub W);

impl<W: Write> Sink for JsonLinesSink<W> {
    fn emit(&mut self, worker: Worker, event: Event) {
        let line = serde_json::to_string(&Record { worker, event }).expect("record serializes");
        let _ = writeln!(self.0, "{line}");
    }
}

/// The closing JSON line carrying the result.
pub fn result_json_line(r: &CertifiedResult) -> String {
    #[derive(Serialize)]
    struct Line<'a> {
        worker: Worker,
        event: &'static str,
        values: &'a CertifiedResult,
    }
    let line = Line {
        worker: Worker::Runner,
        event: "result",
        values: r,
    };
    serde_json::to_string(&line).expect("result serializes")
}

pub const CSV_HEADER: &str = "function,n,status,fbest,lb,time_s,ne_de,ne_ibc";

pub fn csv_row(r: &CertifiedResult) -> String {
    let num = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.10}"));
    format!(
        "{},{},{},{},{},{},{},{}",
        r.function,
        r.n,
        r.status.as_str(),
        num(r.f_best),
        num(r.lower_bound),
        r.wall_time_s.map_or(String::new(), |t| format!("{t:.3}")),
        r.ne_de,
        r.ne_ibc
    )
}

pub fn write_csv<W: Write>(mut w: W, results: &[CertifiedResult]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in results {
        writeln!(w, "{}", csv_row(r))?;
    }
    Ok(())
}

fn fmt7(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.7}"),
        None => "-".to_string(),
    }
}

/// Fixed-width table: one row per result. Rows that are not certified show
/// the bracket `[lower bound, f_best]` instead of a single value.
pub fn report_table(results: &[CertifiedResult]) -> String {
    let header = [
        "Function",
        "n",
        "Status",
        "Global minimum",
        "Solution",
        "Time (s)",
        "NE_DE + NE_IBC",
    ];
    let rows: Vec<[String; 7]> = results
        .iter()
        .map(|r| {
            let name = r
                .function
                .parse::<Function>()
                .map_or_else(|_| r.function.clone(), |f| f.title().to_string());
            let value = match r.status {
                ResultStatus::Certified | ResultStatus::Uncertified => fmt7(r.f_best),
                _ => format!("[{}, {}]", fmt7(r.lower_bound), fmt7(r.f_best)),
            };
            let solution = r.x_best.as_ref().map_or("-".to_string(), |x| {
                let parts: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
                format!("({})", parts.join(", "))
            });
            [
                name,
                r.n.to_string(),
                r.status.as_str().to_string(),
                value,
                solution,
                r.wall_time_s.map_or("-".to_string(), |t| format!("{t:.2}")),
                format!("{} + {}", r.ne_de, r.ne_ibc),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&header);
    line(
        &widths
            .map(|w| "-".repeat(w))
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    );
    for row in &rows {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

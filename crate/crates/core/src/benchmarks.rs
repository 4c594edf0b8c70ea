//! The six benchmark problems, Shekel's foxhole data, recorded minima and
//! the fitted putative-minimum formulas.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contractor::Constraint;
use crate::expr::Expr;
use crate::interval::{IntervalBox, PI};
use crate::problem::{KnownMinimum, Problem};

const SHEKEL_BUNDLED: &str = include_str!("../data/shekel_foxholes.txt");
const REFERENCE_MINIMA: &str = include_str!("../data/reference_minima.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Function {
    Michalewicz,
    SineEnvelope,
    Shekel,
    EggHolder,
    Rana,
    Keane,
}

impl Function {
    pub const ALL: [Function; 6] = [
        Function::Michalewicz,
        Function::SineEnvelope,
        Function::Shekel,
        Function::EggHolder,
        Function::Rana,
        Function::Keane,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Function::Michalewicz => "michalewicz",
            Function::SineEnvelope => "sine-envelope",
            Function::Shekel => "shekel",
            Function::EggHolder => "egg-holder",
            Function::Rana => "rana",
            Function::Keane => "keane",
        }
    }

    /// Display name used in result tables.
    pub fn title(self) -> &'static str {
        match self {
            Function::Michalewicz => "Michalewicz",
            Function::SineEnvelope => "Sine Envelope",
            Function::Shekel => "Shekel",
            Function::EggHolder => "Egg Holder",
            Function::Rana => "Rana",
            Function::Keane => "Keane",
        }
    }
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Function {
    type Err = BenchmarkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "michalewicz" => Ok(Function::Michalewicz),
            "sineenvelope" | "sineenvelopesinewave" => Ok(Function::SineEnvelope),
            "shekel" | "shekelsfoxholes" | "shekelfoxholes" => Ok(Function::Shekel),
            "eggholder" => Ok(Function::EggHolder),
            "rana" | "ranas" => Ok(Function::Rana),
            "keane" | "keanes" => Ok(Function::Keane),
            _ => Err(BenchmarkError::UnknownFunction(s.to_string())),
        }
    }
}

/// Which algebraic form of Rana's function to build. Both are equal over
/// the reals but give very different interval enclosures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RanaSyntax {
    #[default]
    Original,
    /// Each `cos a sin b` product replaced by `(sin(a+b) - sin(a-b)) / 2`,
    /// then grouped by `sin(a+b)` and `sin(a-b)`. The grouped coefficients
    /// vanish where the matching square root does, which is what keeps
    /// enclosures tight across the kinks.
    Rewritten,
}

impl FromStr for RanaSyntax {
    type Err = BenchmarkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "original" | "first" => Ok(RanaSyntax::Original),
            "rewritten" | "second" => Ok(RanaSyntax::Rewritten),
            _ => Err(BenchmarkError::UnknownSyntax(s.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("unknown Rana syntax {0:?} (expected original or rewritten)")]
    UnknownSyntax(String),
    #[error("{function} is not defined for n = {n}{hint}")]
    UnsupportedDimension {
        function: Function,
        n: usize,
        hint: &'static str,
    },
    #[error("Shekel data file {path}: {source}")]
    DataFile {
        path: String,
        source: std::io::Error,
    },
    #[error("Shekel data, line {line}: {msg}")]
    DataFormat { line: usize, msg: String },
    #[error("no putative-minimum formula for {0}")]
    NotAvailable(Function),
}

/// Centers `a` (30 rows) and offsets `c` of Shekel's foxholes.
#[derive(Debug, Clone, PartialEq)]
pub struct ShekelData {
    pub a: Vec<Vec<f64>>,
    pub c: Vec<f64>,
}

impl ShekelData {
    pub const HOLES: usize = 30;

    /// The data shipped with the crate (10 columns).
    pub fn bundled() -> &'static ShekelData {
        static DATA: OnceLock<ShekelData> = OnceLock::new();
        DATA.get_or_init(|| {
            ShekelData::parse(SHEKEL_BUNDLED).expect("bundled Shekel data is malformed")
        })
    }

    pub fn load(path: &Path) -> Result<ShekelData, BenchmarkError> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchmarkError::DataFile {
            path: path.display().to_string(),
            source,
        })?;
        ShekelData::parse(&text)
    }

    /// Parses whitespace-separated rows `a_i1 .. a_im c_i`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<ShekelData, BenchmarkError> {
        let mut a = Vec::new();
        let mut c = Vec::new();
        let mut width = None;
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let nums = body
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| BenchmarkError::DataFormat {
                        line,
                        msg: format!("not a number: {t:?}"),
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            if nums.len() < 2 {
                return Err(BenchmarkError::DataFormat {
                    line,
                    msg: "expected at least one center coordinate and c".into(),
                });
            }
            if *width.get_or_insert(nums.len()) != nums.len() {
                return Err(BenchmarkError::DataFormat {
                    line,
                    msg: format!("expected {} columns, found {}", width.unwrap(), nums.len()),
                });
            }
            let ci = nums[nums.len() - 1];
            if !(ci > 0.0) || nums.iter().any(|v| !v.is_finite()) {
                return Err(BenchmarkError::DataFormat {
                    line,
                    msg: "c must be positive and all values finite".into(),
                });
            }
            a.push(nums[..nums.len() - 1].to_vec());
            c.push(ci);
        }
        if a.len() != Self::HOLES {
            return Err(BenchmarkError::DataFormat {
                line: text.lines().count(),
                msg: format!("expected {} rows, found {}", Self::HOLES, a.len()),
            });
        }
        Ok(ShekelData { a, c })
    }

    /// Largest dimension the data supports.
    pub fn max_dim(&self) -> usize {
        self.a[0].len()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ProblemOptions {
    pub rana_syntax: RanaSyntax,
    /// Replaces the bundled Shekel data.
    pub shekel_data: Option<ShekelData>,
}

/// Builds benchmark `f` in dimension `n`, attaching the recorded minimum
/// when one exists.
pub fn make_problem(
    f: Function,
    n: usize,
    opts: &ProblemOptions,
) -> Result<Problem, BenchmarkError> {
    if n < 2 {
        return Err(BenchmarkError::UnsupportedDimension {
            function: f,
            n,
            hint: " (need n >= 2)",
        });
    }
    let x = |i: usize| Expr::var(i);
    let (objective, constraints, lo, hi) = match f {
        Function::Michalewicz => (michalewicz(n), vec![], 0.0, PI.hi()),
        Function::SineEnvelope => (sine_envelope(n), vec![], -100.0, 100.0),
        Function::Shekel => {
            let data = opts
                .shekel_data
                .as_ref()
                .unwrap_or_else(|| ShekelData::bundled());
            if n > data.max_dim() {
                return Err(BenchmarkError::UnsupportedDimension {
                    function: f,
                    n,
                    hint: " (Shekel data has fewer columns)",
                });
            }
            (shekel(n, data), vec![], 0.0, 10.0)
        }
        Function::EggHolder => (egg_holder(n), vec![], -512.0, 512.0),
        Function::Rana => (rana(n, opts.rana_syntax), vec![], -512.0, 512.0),
        Function::Keane => {
            let g1 = 0.75 - Expr::product((0..n).map(x));
            let g2 = Expr::sum((0..n).map(x)) - 7.5 * n as f64;
            (
                keane(n),
                vec![Constraint::new(g1), Constraint::new(g2)],
                0.0,
                10.0,
            )
        }
    };
    let name = match (f, opts.rana_syntax) {
        (Function::Rana, RanaSyntax::Rewritten) => "rana (rewritten)".to_string(),
        _ => f.as_str().to_string(),
    };
    let p = Problem::new(name, objective, constraints, IntervalBox::cube(n, lo, hi))
        .expect("benchmark construction is well-formed");
    Ok(match reference_minimum(f, n) {
        Some(r) => p.with_known_minimum(KnownMinimum {
            value: r.value,
            solution: r.solution.clone(),
        }),
        None => p,
    })
}

fn michalewicz(n: usize) -> Expr {
    let terms = (0..n).map(|i| {
        let xi = Expr::var(i);
        let inner = (((i + 1) as f64) * xi.clone().powi(2)) / Expr::pi();
        xi.sin() * inner.sin().powi(20)
    });
    -Expr::sum(terms)
}

fn sine_envelope(n: usize) -> Expr {
    let terms = (0..n - 1).map(|i| {
        let r2 = Expr::var(i + 1).powi(2) + Expr::var(i).powi(2);
        let num = (r2.clone().sqrt() - 0.5).sin().powi(2);
        let den = (0.001 * r2 + 1.0).powi(2);
        0.5 + num / den
    });
    -Expr::sum(terms)
}

fn shekel(n: usize, data: &ShekelData) -> Expr {
    let terms = data.a.iter().zip(&data.c).map(|(row, &ci)| {
        let d = Expr::sum((0..n).map(|j| (Expr::var(j) - row[j]).powi(2)));
        1.0 / (ci + d)
    });
    -Expr::sum(terms)
}

fn egg_holder(n: usize) -> Expr {
    let terms = (0..n - 1).map(|i| {
        let xi = Expr::var(i);
        let xj = Expr::var(i + 1);
        let a = (xj.clone() + 47.0) * (xj.clone() + 47.0 + xi.clone() / 2.0).abs().sqrt().sin();
        let b = xi.clone() * (xi - (xj + 47.0)).abs().sqrt().sin();
        a + b
    });
    -Expr::sum(terms)
}

fn rana(n: usize, syntax: RanaSyntax) -> Expr {
    let terms = (0..n - 1).map(|i| {
        let xi = Expr::var(i);
        let xj = Expr::var(i + 1);
        let a = (xj.clone() + xi.clone() + 1.0).abs().sqrt();
        let b = (xj.clone() - xi.clone() + 1.0).abs().sqrt();
        match syntax {
            RanaSyntax::Original => {
                xi * a.clone().cos() * b.clone().sin() + (1.0 + xj) * a.sin() * b.cos()
            }
            RanaSyntax::Rewritten => {
                // x cos a sin b + y sin a cos b, both products expanded, then
                // grouped by sin(a + b) and sin(a - b)
                let plus = (a.clone() + b.clone()).sin();
                let minus = (a - b).sin();
                0.5 * ((xi.clone() + 1.0 + xj.clone()) * plus) + 0.5 * ((1.0 + xj - xi) * minus)
            }
        }
    });
    Expr::sum(terms)
}

fn keane(n: usize) -> Expr {
    let x = Expr::var;
    let s = Expr::sum((0..n).map(|i| x(i).cos().powi(4)));
    let p = Expr::product((0..n).map(|i| x(i).cos().powi(2)));
    let r = Expr::sum((0..n).map(|i| ((i + 1) as f64) * x(i).powi(2)));
    -((s - 2.0 * p).abs() / r.sqrt())
}

/// Value of the linear fit `a n + b` for the four functions that have one.
pub fn putative_minimum(f: Function, n: usize) -> Result<f64, BenchmarkError> {
    let (a, b) = match f {
        Function::Michalewicz => (-0.99864, 0.30271),
        Function::SineEnvelope => (-1.49150, 1.49150),
        Function::EggHolder => (-915.61991, 862.10466),
        Function::Rana => (-511.70430, 511.68714),
        _ => return Err(BenchmarkError::NotAvailable(f)),
    };
    Ok(a * n as f64 + b)
}

/// One certified minimum from the bundled reference file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMinimum {
    pub function: Function,
    pub n: usize,
    pub value: f64,
    pub solution: Option<Vec<f64>>,
    pub source: Option<String>,
}

pub fn reference_minima() -> &'static [ReferenceMinimum] {
    static RECORDS: OnceLock<Vec<ReferenceMinimum>> = OnceLock::new();
    RECORDS.get_or_init(|| parse_reference(REFERENCE_MINIMA))
}

pub fn reference_minimum(f: Function, n: usize) -> Option<&'static ReferenceMinimum> {
    reference_minima()
        .iter()
        .find(|r| r.function == f && r.n == n)
}

fn parse_reference(text: &str) -> Vec<ReferenceMinimum> {
    let dash = |s: &str| (s != "-").then(|| s.to_string());
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let cols: Vec<&str> = l.split_whitespace().collect();
            assert_eq!(cols.len(), 5, "bad reference row: {l}");
            ReferenceMinimum {
                function: cols[0].parse().expect("reference function"),
                n: cols[1].parse().expect("reference n"),
                value: cols[2].parse().expect("reference value"),
                solution: dash(cols[3]).map(|s| {
                    s.split(',')
                        .map(|v| v.parse().expect("reference solution"))
                        .collect()
                }),
                source: dash(cols[4]),
            }
        })
        .collect()
}

/// Default `(NP, W, CR)` for differential evolution on each benchmark.
pub fn de_defaults(f: Option<Function>) -> (usize, f64, f64) {
    match f {
        Some(Function::Michalewicz) => (50, 0.7, 0.0),
        Some(Function::SineEnvelope) | Some(Function::Shekel) => (50, 0.7, 0.9),
        Some(Function::EggHolder) => (50, 0.7, 0.4),
        Some(Function::Rana) | None => (50, 0.7, 0.5),
        Some(Function::Keane) => (70, 0.7, 0.9),
    }
}

use std::path::PathBuf;

use thiserror::Error;

use crate::network::Violation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duration undefined: {0}")]
    UndefinedDuration(&'static str),
    #[error("capacity unreachable under self-discharge: steady state {steady_state:.3} kWh below usable range {required:.3} kWh")]
    UnreachableCapacity { steady_state: f64, required: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("series {series} has {len} steps, {required} required")]
    SeriesTooShort {
        series: &'static str,
        len: usize,
        required: usize,
    },
    #[error("series {series} has invalid value {value} at step {step}")]
    InvalidSeriesValue {
        series: &'static str,
        step: usize,
        value: f64,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulationError {
    #[error("invalid network: {}", join_violations(.0))]
    InvalidNetwork(Vec<Violation>),
    #[error("end level {value} kWh for {node} outside [{min}, {max}]")]
    EndLevelOutOfBounds {
        node: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("initial level {value} kWh for {node} outside [{min}, {max}]")]
    InitLevelOutOfBounds {
        node: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("window is empty")]
    EmptyWindow,
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum LpFileError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown variable {0} in solution")]
    UnknownVariable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("simplex exceeded {0} iterations")]
    IterationLimit(usize),
    #[error("time limit reached")]
    TimeLimit,
    #[error("basis factorization failed: {0}")]
    Singular(String),
    #[error("external solver failed: {0}")]
    External(String),
    #[error(transparent)]
    LpFile(#[from] LpFileError),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("window starting on day {day} (steps {start}..{end}) is infeasible")]
    Infeasible { day: usize, start: usize, end: usize },
    #[error("window starting on day {day} is unbounded")]
    Unbounded { day: usize },
    #[error("window starting on day {day} hit a solver limit without an incumbent")]
    LimitReached { day: usize },
    #[error("trace covers {len} steps, a full year of {expected} is required")]
    NotFullYear { len: usize, expected: usize },
    #[error("trace is not a full-horizon benchmark")]
    NotBenchmark,
    #[error("benchmark cost is zero; gap undefined")]
    UndefinedGap,
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl EngineError {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, EngineError::Infeasible { .. })
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: row {row}: {msg}", .path.display())]
    Row { path: PathBuf, row: usize, msg: String },
    #[error("{}: {msg}", .path.display())]
    File { path: PathBuf, msg: String },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

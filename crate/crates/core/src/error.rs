use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by ingestion, fitting and the explained-variation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv at row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("empty file: no header or no data rows")]
    EmptyFile,
    #[error("missing column '{name}'")]
    MissingColumn { name: String },
    #[error("non-numeric value '{value}' at row {row}, column '{column}'")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("negative or non-finite time {value} at row {row}")]
    InvalidTime { row: usize, value: f64 },
    #[error("event not in {{0,1}}: '{value}' at row {row}")]
    InvalidEvent { row: usize, value: String },
    #[error("dataset has no covariate columns")]
    NoCovariates,
    #[error("covariate dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no failures in dataset")]
    NoFailures,
    #[error("empty risk set at t={time}")]
    EmptyRiskSet { time: f64 },
    #[error("design degenerate: covariate matrix is singular (pivot ratio {ratio:e})")]
    DesignDegenerate { ratio: f64 },
    #[error("time {time} outside the estimation domain [0, {max}]")]
    OutOfDomain { time: f64, max: f64 },
    #[error("no event mass for this covariate profile (subject {subject}, S(t_K|z)={survival})")]
    NoEventMass { subject: usize, survival: f64 },
    #[error("degenerate conditional law of Z given T at t={time}: all weights are zero")]
    DegenerateConditionalLaw { time: f64 },
    #[error("no covariate dispersion at event times")]
    NoCovariateDispersion,
    #[error("could not draw a split with events on both sides after {attempts} attempts")]
    SplitFailed { attempts: usize },
    #[error("Cox fit did not converge in {iterations} iterations (gradient norm {gradient_norm:e})")]
    CoxNotConverged { iterations: usize, gradient_norm: f64 },
    #[error("separation: Cox partial likelihood is monotone, |beta| exceeded {limit}")]
    Separation { limit: f64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("{failed} of {reps} replicates failed (more than 10%); first failure: {first}")]
    TooManyFailures { failed: usize, reps: usize, first: String },
    #[error("group covariate column {column} is not binary 0/1")]
    NonBinaryGroup { column: usize },
    #[error("group {group} has no events")]
    GroupWithoutEvents { group: u8 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

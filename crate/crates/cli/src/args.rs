use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "addhaz",
    version,
    about = "Additive hazards regression and explained variation R²"
)]
pub struct Cli {
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true, env = "ADDHAZ_WORKERS")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the additive hazards model and export β̂, Λ̃₀ and conditional curves.
    Fit(FitArgs),
    /// Explained variation R² of a fitted model.
    R2(R2Args),
    /// Monte Carlo study of a preset or a scenario file.
    Simulate(SimulateArgs),
    /// Difference of group-wise Nelson–Aalen cumulative hazards.
    Diagnose(DiagnoseArgs),
    /// Random train/test partition of a dataset.
    Split(SplitArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// CSV with a header row; every column other than time and event is a covariate.
    pub data: PathBuf,
    #[arg(long, default_value = "time")]
    pub time: String,
    #[arg(long, default_value = "event")]
    pub event: String,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Write the baseline cumulative hazard knots (time, cumhaz) here.
    #[arg(long)]
    pub knots: Option<PathBuf>,
    /// Write monotone conditional survival curves (subject, time, survival) here.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Additive,
    Cox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalKind {
    Mixture,
    Km,
}

#[derive(Debug, Args, Serialize)]
pub struct R2Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "additive")]
    pub model: ModelKind,
    /// Truncation time τ (default: largest failure time).
    #[arg(long)]
    pub truncation: Option<f64>,
    /// Level-0 grid spacing.
    #[arg(long, default_value_t = 0.01)]
    pub spacing: f64,
    /// Stop halving once R² changes by less than this.
    #[arg(long, default_value_t = 0.01)]
    pub tol: f64,
    #[arg(long, value_enum, default_value = "mixture")]
    pub marginal: MarginalKind,
    /// Also report R²_{Z|T} (scalar covariate, additive model).
    #[arg(long, requires = "baseline")]
    pub z_given_t: bool,
    /// Known baseline hazard for R²_{Z|T}: const:c, linear:a or root:a.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Fit on this fraction of subjects and report R²_out on the rest.
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long, default_value_t = 0, requires = "split")]
    pub seed: u64,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Preset name (table1, table2, table3, table4, figure2) or a key=value scenario file.
    #[arg(long)]
    pub scenario: String,
    /// Only run the preset row with this label.
    #[arg(long)]
    pub row: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Master seed (default: the scenario's own seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the per-replicate sample size.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub tol: f64,
    /// Also compute R²_cox for every model.
    #[arg(long)]
    pub cox: bool,
    /// Also compute R²_{Z|T} for single-covariate models.
    #[arg(long)]
    pub z_given_t: bool,
    /// Add the population Ω²_τ column.
    #[arg(long)]
    pub omega: bool,
    /// Summary table CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the first replicate's dataset of the first row here.
    #[arg(long)]
    pub sample_out: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Name of the binary 0/1 group covariate.
    #[arg(long)]
    pub group: String,
    /// Difference series CSV (time, group0, group1, difference).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Drop a group's event times where fewer than this many are at risk.
    #[arg(long, default_value_t = 1)]
    pub min_at_risk: usize,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Fraction of subjects in the training part.
    #[arg(long, default_value_t = 0.5)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

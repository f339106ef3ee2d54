//! Data generation under `λ(t|Z) = λ₀(t) + βᵀZ`, population `Ω²` oracles and
//! the Monte Carlo driver.

mod monte_carlo;
mod omega;
mod presets;
mod scenario;

pub use monte_carlo::{
    replicate_dataset, run_monte_carlo, ModelOutcome, ModelSummary, MomentSummary, MonteCarloOptions,
    MonteCarloSummary, ReplicateOutcome, MIN_REPS,
};
pub use omega::{omega2_analytic, omega2_large_sample, population_moments, KnownAdditiveModel, DEFAULT_LARGE_SAMPLE};
pub use presets::{preset, PresetRow, PRESET_NAMES};
pub use scenario::{
    censoring_probability, generate, generate_with, parse_assignments, sample_event_time, tau_for_censoring, Censoring,
    CovariateLaw, Scenario,
};

//! Instance generators, experiment configuration, the batch runner and
//! its CSV, JSON and SVG outputs.

mod config;
mod generators;
mod plot;
mod report;
mod rng;
mod runner;

pub use config::{
    log_lambda_grid, ChannelSpec, EnvKind, ExperimentConfig, Family, GoldilocksSettings, Sizes, VDaggerRule, MAX_ENVS,
    MAX_OUTCOMES, MAX_POLICIES,
};
pub use generators::{
    channel_menu, gen_goldilocks_instance, gen_thm1_instance, gen_thm2_instance, quantizer_value_at,
    random_coherent_instance, random_frontloading_case, random_garbled_channel, random_injective_code, random_kl_case,
    random_noise_spec, random_partition, random_pmf, random_positive_part_case, sample_environment,
    sample_thm1_instance, sample_thm1_prior, sample_thm2_instance, CellInstance, Instance, GOLDILOCKS_ENVS,
    HIGH_PRESSURE,
};
pub use plot::{emit_plot, render_plot};
pub use report::{aggregate, AggregateReport};
pub use rng::trial_rng;
pub use runner::{
    choose_v_dagger, execute, run_experiment, CurveRow, RunOutput, RunSummary, TrialRow, CONFIG_FILE, CSV_SCHEMA,
    REPORT_SCHEMA, SUMMARY_FILE, TRIALS_FILE,
};

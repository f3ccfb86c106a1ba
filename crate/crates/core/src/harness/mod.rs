//! Data measures, dataset files, Lipschitz probes and the rate and rollout studies.

mod config;
mod dataset;
mod probe;
mod sampler;
mod study;
mod task;
mod verify;

pub use config::{
    ExperimentConfig, ExperimentSection, OptimizerKind, ProbeSection, RolloutSection, SurrogateKind, TrainSettings,
};
pub use dataset::{
    blob_bytes, generate_dataset, generate_samples, read_dataset, read_manifest, regenerate, write_dataset, BlobInfo,
    DataRole, Manifest, DATASET_FORMAT, MANIFEST_FILE, X_BLOB, Y_BLOB,
};
pub use probe::{lipschitz_probe, newton_lipschitz, theoretical_bound, ProbeResult, MIN_PAIR_DISTANCE, PROBE_SLACK};
pub use sampler::{
    sample_initial, sample_reaction, sample_seed, CoefficientBox, SampleRole, SampledReaction, SamplerSpec,
};
pub use study::{
    derivative_bounds, ls_slope, output_decoder, rate_study, rollout_study, to_test_pairs, train_for_task,
    write_rate_outputs, RateSummary, ResultRecord, RolloutBoundParams, RolloutResult, RolloutRow,
};
pub use task::{
    ForcingConfig, FunctionConfig, FunctionKind, GridSpec, Sample, SchemeSpec, Task, TaskId, TaskSpec,
};
pub use verify::{circuit_verify, expected_stats, verify_one, CircuitKind, VerifyConfig, VerifyRecord};

/// Worker count: `OPSTEP_THREADS` if set to a positive integer, else the available parallelism.
pub fn thread_count() -> usize {
    std::env::var("OPSTEP_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` on a pool sized by [`thread_count`].
pub fn with_thread_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(thread_count()).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

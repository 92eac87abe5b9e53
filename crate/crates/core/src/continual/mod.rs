//! The continual-learning loop: one restorer trained across a stream of
//! rain datasets with generative replay and distillation, plus the
//! sequential fine-tuning and per-dataset baselines it is compared with.

mod config;
mod report;
mod similarity;
mod stream;
mod train;

pub use config::{LrSchedule, Method, StageConfig};
pub use report::{
    write_cost_csv, write_generalization_csv, write_losses_csv, write_memory_csv, write_reports,
    MemoryEntry, Quality, StageRecord, StreamReport,
};
pub use similarity::{
    dataset_hog, normalize_similarity, scaled_iterations, similarity, similarity_from_hogs,
    SimilarityReport,
};
pub use stream::{baseline_individual, baseline_sf, evaluate_quality, run_method, run_stream, similarity_chain};
pub use train::{train_stage, EpochSampler, StageInput};

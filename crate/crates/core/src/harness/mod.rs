//! Training, evaluation and the multi-run experiments built on them.

mod batch;
mod config;
mod experiments;
mod report;
mod train;

pub use batch::{assemble, candidate_vectors, context_tensor, EpisodeBatch};
pub use config::{TrainConfig, DEFAULT_BATCH, DEFAULT_LR, DEFAULT_SEEDS, FULL_EPOCHS, SMALL_EPOCHS};
pub use experiments::{
    checkpoint_path, error_analysis, learning_curve, multi_run, prepare, run_stem, sweep_reshape, test_fingerprint,
    Corpus, CurvePoint, Dataset, ErrorRow, ErrorTable, LearningCurve, Prepared, ReshapeCell, ReshapeTable,
    DEFAULT_CURVE_SIZES,
};
pub use report::{mean_std, Evaluation, RunReport, SeedRun, CSV_HEADER};
pub use train::{batch_loss, evaluate, predict_choices, train, EpochLog, TrainOutcome};

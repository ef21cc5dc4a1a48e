//! Pipeline toolkit for adapting language models to a target domain:
//! threshold-calibrated corpus filtering, sequence packing for pre-training
//! batches, SLERP checkpoint merging with layer-wise component schedules,
//! and exact evaluation statistics (win-rate matrices, failure-mode counts,
//! accuracy/SE/kappa arithmetic).

pub mod archive;
pub mod filter;
pub mod gateway;
pub mod jsonl;
pub mod merge;
pub mod metrics;
pub mod pack;

pub use archive::{Dtype, TensorCheckpoint, TensorRecord};
pub use filter::{ConfusionCounts, CorpusStats, Label, ScoredDocument};
pub use gateway::{FailureModeRecord, JudgeVerdict, PromptRequest, Winner};
pub use merge::{FilterSchedule, MergeRecipe, MergeReport};
pub use metrics::{BenchmarkResult, RatingTable, WinRateMatrix};
pub use pack::{PackedSequence, TokenDocument};

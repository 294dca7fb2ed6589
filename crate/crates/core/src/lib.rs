//! Paragraph-level convolutional text classifiers built from scratch:
//! tensors, the text-to-tensor pipeline, layers with hand-written
//! backpropagation, the TextConvoNet model family, training, metrics, and
//! paired significance tests.

pub mod error;
pub mod eval;
pub mod layers;
pub mod model;
pub mod stats;
pub mod tensor;
pub mod text;
pub mod training;

pub use error::{Error, Result};
pub use eval::{evaluate, Averaging, ConfusionMatrix, Evaluation, MetricsReport, METRIC_NAMES};
pub use layers::{Mode, Task};
pub use model::{catalog, checkpoint, lookup, ArchitectureConfig, KernelSize, Model, OptimizerKind};
pub use stats::{compare_tables, effect_r, wilcoxon, CohenLabel, PairedSamples, WilcoxonResult};
pub use tensor::{Real, Tensor};
pub use text::{
    load_dataset, load_embeddings, Dataset, DatasetSplit, Dims, EmbeddingTable, EncodedExample, InputLayout,
    LabeledExample, ParagraphTensor,
};
pub use training::{train, GradCheckConfig, GradCheckReport, TrainConfig, TrainReport};

//! Shared load → encode → train → evaluate steps.

use std::time::Instant;

use anyhow::Result;
use convonet_core::eval::Averaging;
use convonet_core::text::encode_examples;
use convonet_core::{
    evaluate, load_dataset, load_embeddings, lookup, train, ArchitectureConfig, Dataset, DatasetSplit, Dims,
    EmbeddingTable, Evaluation, InputLayout, LabeledExample, Model, TrainConfig, TrainReport,
};

use crate::config::RunConfig;
use crate::UsageError;

pub struct Corpus {
    pub train: Dataset,
    /// Test set re-indexed to the training classes.
    pub test: Option<Dataset>,
    pub embeddings: EmbeddingTable,
}

pub fn load_corpus(cfg: &RunConfig, need_test: bool) -> Result<Corpus> {
    let train_path = cfg.require_file(&cfg.train_csv, "train-csv")?;
    let test_path = if need_test { Some(cfg.require_file(&cfg.test_csv, "test-csv")?) } else { None };
    let emb_path = cfg.require_file(&cfg.embeddings, "embeddings")?;
    let train = load_dataset(train_path)?;
    let test = match test_path {
        Some(p) => {
            let split = DatasetSplit::new(train.clone(), &load_dataset(p)?)?;
            Some(Dataset { examples: split.test, class_names: split.class_names })
        }
        None => None,
    };
    Ok(Corpus { train, test, embeddings: load_embeddings(emb_path)? })
}

/// Catalog entry `name` with a head for `classes` classes.
pub fn architecture(name: &str, classes: usize) -> Result<ArchitectureConfig> {
    Ok(lookup(name)?.with_classes(classes))
}

/// Corpus-inferred input dimensions with `--m` / `--n` overrides.
pub fn dims_for(cfg: &RunConfig, arch: &ArchitectureConfig, train: &[LabeledExample]) -> Result<Dims> {
    let mut dims = convonet_core::text::infer_dims(train, arch.layout)?;
    match arch.layout {
        InputLayout::Paragraph => {
            if let Some(m) = cfg.m {
                dims.m = m;
            }
        }
        InputLayout::Flat => {
            if cfg.m.is_some_and(|m| m != 1) {
                return Err(UsageError(format!("{} reads each document as a single row; --m must be 1", arch.name)).into());
            }
        }
    }
    if let Some(n) = cfg.n {
        dims.n = n;
    }
    if dims.m == 0 || dims.n == 0 {
        return Err(UsageError("--m and --n must be positive".into()).into());
    }
    Ok(dims)
}

pub struct Fitted {
    pub model: Model<f32>,
    pub report: TrainReport,
    pub seconds: f64,
}

pub fn fit(
    arch: &ArchitectureConfig,
    dims: Dims,
    class_names: &[String],
    embeddings: &EmbeddingTable,
    examples: &[LabeledExample],
    tcfg: &TrainConfig,
) -> Result<Fitted> {
    let mut model = Model::<f32>::build(arch, dims, embeddings.dim(), tcfg.seed)?;
    model.class_names = class_names.to_vec();
    let encoded = encode_examples(examples, embeddings, dims, arch.layout)?;
    let start = Instant::now();
    let (model, report) = train(&model, &encoded, tcfg)?;
    Ok(Fitted { model, report, seconds: start.elapsed().as_secs_f64() })
}

pub fn score(model: &Model<f32>, embeddings: &EmbeddingTable, examples: &[LabeledExample], averaging: Averaging) -> Result<Evaluation> {
    if embeddings.dim() != model.depth {
        return Err(UsageError(format!(
            "embedding dimension {} does not match the model's depth {}",
            embeddings.dim(),
            model.depth
        ))
        .into());
    }
    let encoded = encode_examples(examples, embeddings, model.dims, model.config.layout)?;
    Ok(evaluate(model, &encoded, averaging)?)
}

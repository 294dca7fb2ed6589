use std::path::PathBuf;

use convonet_core::model::{checkpoint, KIM, TEXTCONVONET_6};
use convonet_core::text::{encode_examples, infer_dims};
use convonet_core::{evaluate, load_dataset, load_embeddings, lookup, train, Averaging, DatasetSplit, Model, TrainConfig};

fn smoke(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/smoke").join(file)
}

fn run(model: &str, train_csv: &str, test_csv: &str) -> f64 {
    let split = DatasetSplit::new(load_dataset(smoke(train_csv)).unwrap(), &load_dataset(smoke(test_csv)).unwrap()).unwrap();
    let emb = load_embeddings(smoke("embeddings.txt")).unwrap();
    let arch = lookup(model).unwrap().with_classes(split.class_names.len());
    let dims = infer_dims(&split.train, arch.layout).unwrap();
    let train_set = encode_examples(&split.train, &emb, dims, arch.layout).unwrap();
    let test_set = encode_examples(&split.test, &emb, dims, arch.layout).unwrap();

    let mut model = Model::<f32>::build(&arch, dims, emb.dim(), 5).unwrap();
    model.class_names = split.class_names.clone();
    let cfg = TrainConfig { max_epochs: 40, patience: None, seed: 5, ..TrainConfig::default() };
    let (model, _) = train(&model, &train_set, &cfg).unwrap();

    let bytes = checkpoint::to_bytes(&model).unwrap();
    let restored = checkpoint::from_bytes(&bytes).unwrap();
    let a = evaluate(&model, &test_set, Averaging::Macro).unwrap();
    let b = evaluate(&restored, &test_set, Averaging::Macro).unwrap();
    assert_eq!(a.predictions, b.predictions);
    assert_eq!(a.report, b.report);
    a.report.accuracy
}

#[test]
fn paragraph_model_learns_binary_smoke_corpus() {
    assert!(run(TEXTCONVONET_6, "binary_train.csv", "binary_test.csv") >= 0.9);
}

#[test]
fn paragraph_model_learns_topic_smoke_corpus() {
    assert!(run(TEXTCONVONET_6, "topics_train.csv", "topics_test.csv") >= 0.9);
}

#[test]
fn flat_baseline_runs_on_smoke_corpus() {
    assert!(run(KIM, "binary_train.csv", "binary_test.csv") >= 0.5);
}

//! Subcommand implementations. Each writes its files under the output
//! directory and prints a short summary to stdout.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use convonet_core::model::{ablation_versions, checkpoint};
use convonet_core::stats::{compare_tables, TableComparison};
use convonet_core::text::{corpus_vocabulary, exceeding_ratio, scaled_m, sentence_tokens, stratified_subsample, token_length};
use convonet_core::training::{gradient_check, random_examples, GradCheckConfig, GradCheckReport};
use convonet_core::{load_dataset, ArchitectureConfig, Dims, Evaluation, InputLayout, Model, TrainReport};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::pipeline::{architecture, dims_for, fit, load_corpus, score};
use crate::results::{write_metrics_csv, ResultsTable};
use crate::{GradArgs, UsageError};

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn single_model(cfg: &RunConfig) -> Result<String> {
    match cfg.model_names().as_slice() {
        [one] => Ok(one.clone()),
        _ => Err(UsageError("this command takes exactly one --model".into()).into()),
    }
}

fn write_epochs(path: &Path, report: &TrainReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    for e in &report.epochs {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// train / evaluate
// ---------------------------------------------------------------------------

pub struct TrainOutcome {
    pub model: Model<f32>,
    pub report: TrainReport,
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let tcfg = cfg.train_config()?;
    let name = single_model(cfg)?;
    let corpus = load_corpus(cfg, false)?;
    let arch = architecture(&name, corpus.train.num_classes())?;
    let dims = dims_for(cfg, &arch, &corpus.train.examples)?;
    let out = cfg.out_dir()?;

    let fitted = fit(&arch, dims, &corpus.train.class_names, &corpus.embeddings, &corpus.train.examples, &tcfg)?;
    checkpoint::save(&fitted.model, out.join("model.tcvn"))?;
    write_epochs(&out.join("epochs.csv"), &fitted.report)?;
    write_json(
        &out.join("manifest.json"),
        &json!({
            "command": "train",
            "model": arch,
            "train": tcfg,
            "dims": dims,
            "depth": corpus.embeddings.dim(),
            "class_names": corpus.train.class_names,
            "param_count": fitted.model.param_count(),
            "train_csv": cfg.train_csv,
            "embeddings": cfg.embeddings,
            "stopped_epoch": fitted.report.stopped_epoch,
            "best_epoch": fitted.report.best_epoch,
            "train_size": fitted.report.train_size,
            "validation_size": fitted.report.validation_size,
            "wall_time_seconds": fitted.seconds,
        }),
    )?;
    let last = fitted.report.epochs.last().expect("at least one epoch");
    println!(
        "trained {} ({} params, m={} n={}) for {} epochs; best epoch {} val_loss {:.4} val_accuracy {:.4}",
        arch.name,
        fitted.model.param_count(),
        dims.m,
        dims.n,
        fitted.report.stopped_epoch,
        fitted.report.best_epoch,
        fitted.report.epochs[fitted.report.best_epoch - 1].val_loss,
        last.val_accuracy
    );
    println!("checkpoint: {}", out.join("model.tcvn").display());
    Ok(TrainOutcome { model: fitted.model, report: fitted.report })
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Evaluation> {
    let ckpt = cfg.require_file(&cfg.checkpoint, "checkpoint")?;
    let test_path = cfg.require_file(&cfg.test_csv, "test-csv")?;
    let emb_path = cfg.require_file(&cfg.embeddings, "embeddings")?;
    let model = checkpoint::load(ckpt)?;
    let test = load_dataset(test_path)?;
    if test.num_classes() > model.config.num_classes {
        return Err(UsageError(format!(
            "test data has {} classes but the checkpoint was trained on {}",
            test.num_classes(),
            model.config.num_classes
        ))
        .into());
    }
    let test = test.with_classes(&model.class_names)?;
    let embeddings = convonet_core::load_embeddings(emb_path)?;
    let eval = score(&model, &embeddings, &test.examples, cfg.averaging())?;

    let out = cfg.out_dir()?;
    let dataset = cfg.dataset_name();
    write_metrics_csv(
        &out.join("metrics.csv"),
        &["dataset", "model", "seed"],
        [(vec![dataset.clone(), model.config.name.clone(), model.seed.to_string()], &eval.report)],
    )?;
    let mut w = csv::Writer::from_path(out.join("predictions.csv"))?;
    let mut header = vec!["index".to_owned(), "actual".to_owned(), "predicted".to_owned()];
    if model.config.num_classes == 2 {
        header.push(format!("p_{}", model.class_names[1]));
    } else {
        header.extend(model.class_names.iter().map(|c| format!("p_{c}")));
    }
    w.write_record(&header)?;
    for (i, ((ex, &pred), probs)) in test.examples.iter().zip(&eval.predictions).zip(&eval.probabilities).enumerate() {
        let mut rec = vec![i.to_string(), model.class_names[ex.label].clone(), model.class_names[pred].clone()];
        rec.extend(probs.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;

    println!("{} on {} ({} examples, {} averaging)", model.config.name, dataset, test.len(), eval.report.averaging);
    for (name, value) in eval.report.named() {
        println!("{name:>12}: {value:.4}");
    }
    Ok(eval)
}

// ---------------------------------------------------------------------------
// gridsearch
// ---------------------------------------------------------------------------

fn wildcard_match(pattern: &str, text: &str) -> bool {
    let (p, t): (Vec<char>, Vec<char>) = (pattern.chars().collect(), text.chars().collect());
    // dp over pattern prefix × text prefix
    let mut prev = vec![false; t.len() + 1];
    prev[0] = true;
    for &pc in &p {
        let mut cur = vec![false; t.len() + 1];
        if pc == '*' {
            cur[0] = prev[0];
        }
        for j in 1..=t.len() {
            cur[j] = match pc {
                '*' => prev[j] || cur[j - 1],
                '?' => prev[j - 1],
                c => prev[j - 1] && c.eq_ignore_ascii_case(&t[j - 1]),
            };
        }
        prev = cur;
    }
    prev[t.len()]
}

/// Ablation versions selected by a comma-separated list of names or
/// wildcard patterns; all 24 when `filter` is `None`.
pub fn select_versions(filter: Option<&str>) -> Result<Vec<ArchitectureConfig>> {
    let all = ablation_versions();
    let Some(filter) = filter else { return Ok(all) };
    let valid = || all.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(", ");
    let patterns: Vec<&str> = filter.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if patterns.is_empty() {
        return Err(UsageError("--versions is empty".into()).into());
    }
    for p in &patterns {
        if !all.iter().any(|c| wildcard_match(p, &c.name)) {
            return Err(UsageError(format!("version filter {p:?} matches nothing; valid versions: {}", valid())).into());
        }
    }
    Ok(all.into_iter().filter(|c| patterns.iter().any(|p| wildcard_match(p, &c.name))).collect())
}

pub fn cmd_gridsearch(cfg: &RunConfig) -> Result<ResultsTable> {
    let tcfg = cfg.train_config()?;
    let versions = select_versions(cfg.versions.as_deref())?;
    let corpus = load_corpus(cfg, true)?;
    let test = corpus.test.as_ref().expect("test set requested");
    let classes = corpus.train.num_classes();
    let out = cfg.out_dir()?;
    let dataset = cfg.dataset_name();

    let mut table = ResultsTable::new();
    let mut wide = Vec::new();
    for version in &versions {
        let arch = version.clone().with_classes(classes);
        let dims = dims_for(cfg, &arch, &corpus.train.examples)?;
        let fitted = fit(&arch, dims, &corpus.train.class_names, &corpus.embeddings, &corpus.train.examples, &tcfg)?;
        let eval = score(&fitted.model, &corpus.embeddings, &test.examples, cfg.averaging())?;
        table.push_report(&dataset, &arch.name, tcfg.seed, &eval.report)?;
        println!("{:<5} accuracy {:.4} f1 {:.4} mcc {:.4}", arch.name, eval.report.accuracy, eval.report.f1, eval.report.mcc);
        wide.push((vec![dataset.clone(), arch.name.clone(), tcfg.seed.to_string()], eval.report));
    }
    table.write_csv(&out.join("results.csv"))?;
    write_metrics_csv(&out.join("metrics.csv"), &["dataset", "model", "seed"], wide.iter().map(|(k, r)| (k.clone(), r)))?;
    Ok(table)
}

// ---------------------------------------------------------------------------
// fewshot
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FewShotRow {
    pub fraction: f64,
    pub model: String,
    pub error_rate: f64,
}

pub const DEFAULT_FEWSHOT_FRACTIONS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 1.0];

pub fn cmd_fewshot(cfg: &RunConfig) -> Result<Vec<FewShotRow>> {
    let tcfg = cfg.train_config()?;
    let fractions = cfg.fractions(&DEFAULT_FEWSHOT_FRACTIONS)?;
    let corpus = load_corpus(cfg, true)?;
    let test = corpus.test.as_ref().expect("test set requested");
    let classes = corpus.train.num_classes();
    let models =
        cfg.model_names().iter().map(|n| architecture(n, classes)).collect::<Result<Vec<_>>>()?;
    // every subsample is checked before any training starts
    let subsets = fractions
        .iter()
        .map(|&f| stratified_subsample(&corpus.train, f, tcfg.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let out = cfg.out_dir()?;

    let mut rows = Vec::new();
    for arch in &models {
        let dims = dims_for(cfg, arch, &corpus.train.examples)?;
        for (&fraction, subset) in fractions.iter().zip(&subsets) {
            let fitted = fit(arch, dims, &corpus.train.class_names, &corpus.embeddings, subset, &tcfg)?;
            let eval = score(&fitted.model, &corpus.embeddings, &test.examples, cfg.averaging())?;
            let row = FewShotRow { fraction, model: arch.name.clone(), error_rate: 1.0 - eval.report.accuracy };
            println!("{:<16} fraction {:<5} train {:>5} error {:.4}", row.model, fraction, subset.len(), row.error_rate);
            rows.push(row);
        }
    }
    let mut w = csv::Writer::from_path(out.join("fewshot.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}

// ---------------------------------------------------------------------------
// mstudy
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MStudyRow {
    pub fraction: f64,
    pub m: usize,
    pub report: convonet_core::MetricsReport,
    pub train_seconds: f64,
}

pub const DEFAULT_M_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

pub fn cmd_mstudy(cfg: &RunConfig) -> Result<Vec<MStudyRow>> {
    let tcfg = cfg.train_config()?;
    let fractions = cfg.fractions(&DEFAULT_M_FRACTIONS)?;
    let name = single_model(cfg)?;
    let corpus = load_corpus(cfg, true)?;
    let test = corpus.test.as_ref().expect("test set requested");
    let arch = architecture(&name, corpus.train.num_classes())?;
    if arch.layout == InputLayout::Flat {
        return Err(UsageError(format!("{} has a single-row input; the m study needs a paragraph model", arch.name)).into());
    }
    let base = dims_for(cfg, &arch, &corpus.train.examples)?;
    let tallest = arch.max_kernel_height();
    let ms: Vec<usize> = fractions.iter().map(|&f| scaled_m(base.m, f)).collect();
    for (&f, &m) in fractions.iter().zip(&ms) {
        if m < tallest {
            return Err(UsageError(format!(
                "fraction {f} gives m = {m} (of {}), below the tallest kernel height {tallest}; use a larger fraction",
                base.m
            ))
            .into());
        }
    }
    let out = cfg.out_dir()?;

    let mut rows = Vec::new();
    for (&fraction, &m) in fractions.iter().zip(&ms) {
        let dims = Dims { m, n: base.n };
        let fitted = fit(&arch, dims, &corpus.train.class_names, &corpus.embeddings, &corpus.train.examples, &tcfg)?;
        let eval = score(&fitted.model, &corpus.embeddings, &test.examples, cfg.averaging())?;
        println!("m={m:<4} fraction {fraction:<5} accuracy {:.4} train {:.3}s", eval.report.accuracy, fitted.seconds);
        rows.push(MStudyRow { fraction, m, report: eval.report, train_seconds: fitted.seconds });
    }
    write_metrics_csv(
        &out.join("mstudy.csv"),
        &["fraction", "m", "model", "seed"],
        rows.iter().map(|r| (vec![r.fraction.to_string(), r.m.to_string(), arch.name.clone(), tcfg.seed.to_string()], &r.report)),
    )?;
    let mut w = csv::Writer::from_path(out.join("mstudy_timing.csv"))?;
    w.write_record(["fraction", "m", "train_seconds"])?;
    for r in &rows {
        w.write_record([r.fraction.to_string(), r.m.to_string(), r.train_seconds.to_string()])?;
    }
    w.flush()?;
    Ok(rows)
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub examples: usize,
    pub classes: Vec<(String, usize)>,
    pub vocabulary: usize,
    pub exceeding_ratio: f64,
    pub max_sentences: usize,
    pub mean_sentences: f64,
    pub max_tokens: usize,
    pub mean_tokens: f64,
}

pub fn dataset_stats(path: &Path) -> Result<DatasetStats> {
    let ds = load_dataset(path)?;
    let sentences: Vec<usize> = ds.examples.iter().map(|e| sentence_tokens(&e.text).len()).collect();
    let tokens: Vec<usize> = ds.examples.iter().map(|e| token_length(&e.text)).collect();
    let n = ds.len() as f64;
    Ok(DatasetStats {
        examples: ds.len(),
        classes: ds.class_names.iter().cloned().zip(ds.class_counts()).collect(),
        vocabulary: corpus_vocabulary(&ds.examples).len(),
        exceeding_ratio: exceeding_ratio(&tokens, |&t| t)?,
        max_sentences: sentences.iter().copied().max().unwrap_or(0),
        mean_sentences: sentences.iter().sum::<usize>() as f64 / n,
        max_tokens: tokens.iter().copied().max().unwrap_or(0),
        mean_tokens: tokens.iter().sum::<usize>() as f64 / n,
    })
}

pub fn cmd_stats(cfg: &RunConfig, path: Option<&Path>) -> Result<DatasetStats> {
    let path = match path {
        Some(p) => p,
        None => cfg.require_file(&cfg.train_csv, "train-csv")?,
    };
    let s = dataset_stats(path)?;
    println!("examples: {}", s.examples);
    let hist: Vec<String> = s.classes.iter().map(|(c, k)| format!("{c}={k}")).collect();
    println!("classes: {}", hist.join(" "));
    println!("vocabulary: {}", s.vocabulary);
    println!("exceeding_ratio: {:.4}", s.exceeding_ratio);
    println!("sentences: max {} mean {:.2}", s.max_sentences, s.mean_sentences);
    println!("tokens: max {} mean {:.2}", s.max_tokens, s.mean_tokens);
    Ok(s)
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

pub fn cmd_compare(cfg: &RunConfig, a: &Path, b: &Path) -> Result<TableComparison> {
    for p in [a, b] {
        if !p.is_file() {
            return Err(UsageError(format!("results table not found: {}", p.display())).into());
        }
    }
    let alpha = cfg.alpha.unwrap_or(0.05);
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(UsageError(format!("--alpha must lie in (0, 1], got {alpha}")).into());
    }
    let cmp = compare_tables(a, b, alpha)?;
    let r = &cmp.result;
    println!("pairs: {} (non-zero differences: {})", r.n_total, r.n_nonzero);
    println!("W+ = {}, W- = {}, U = {}", r.w_plus, r.w_minus, r.w_statistic);
    println!("z = {:.4}, p = {:.4e} ({}), alpha = {}", r.z_score, r.p_two_tailed, r.method, r.alpha);
    println!("effect r = {:.4} ({})", r.effect_r, r.cohen_label);
    println!("{}", cmp.verdict_line());

    let out = cfg.out_dir()?;
    let mut w = csv::Writer::from_path(out.join("compare.csv"))?;
    w.serialize(r)?;
    w.flush()?;
    Ok(cmp)
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

pub fn cmd_gradcheck(cfg: &RunConfig, args: &GradArgs) -> Result<GradCheckReport> {
    let name = cfg.model.clone().unwrap_or_else(|| convonet_core::model::TEXTCONVONET_4.to_owned());
    let mut arch = architecture(&name, args.classes)?;
    arch.filters = args.filters;
    arch.dense_units = args.dense_units;
    let dims = Dims { m: cfg.m.unwrap_or(2), n: cfg.n.unwrap_or(4) };
    let seed = cfg.seed()?;
    let model = Model::<f64>::build(&arch, dims, args.depth, seed)?;
    let examples = random_examples(dims, args.depth, args.classes, args.examples, seed.wrapping_add(1))?;
    let gcfg = GradCheckConfig { samples: args.samples, tolerance: args.tolerance, seed, ..GradCheckConfig::default() };
    let start = Instant::now();
    let report = gradient_check(&model, &examples, &gcfg)?;
    println!(
        "{} (m={} n={} z={} filters={} dense={}): {} points checked, {} skipped at kinks, {}/{} blocks",
        arch.name, dims.m, dims.n, args.depth, arch.filters, arch.dense_units, report.checked, report.skipped,
        report.blocks_covered, report.blocks_total
    );
    println!("max relative error {:.3e} (tolerance {:.0e}) in {:.2}s", report.max_relative_error, report.tolerance, start.elapsed().as_secs_f64());
    if !report.passed {
        let (block, index) = report.worst.clone().unwrap_or_default();
        return Err(anyhow!("gradient check failed: worst point {block}[{index}]"));
    }
    println!("gradient check passed");
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wildcards() {
        assert!(wildcard_match("V1.*", "V1.3"));
        assert!(wildcard_match("v1.*", "V1.3"));
        assert!(!wildcard_match("V1.*", "V2.1"));
        assert!(wildcard_match("V?.2", "V4.2"));
        assert!(wildcard_match("*", "V4.6"));
        assert!(wildcard_match("V4.6", "V4.6"));
        assert!(!wildcard_match("V4", "V4.6"));
    }

    #[test]
    fn version_selection() {
        assert_eq!(select_versions(Some("V1.*")).unwrap().len(), 6);
        assert_eq!(select_versions(None).unwrap().len(), 24);
        assert_eq!(select_versions(Some("V2.3, V4.*")).unwrap().len(), 7);
        let err = select_versions(Some("V9.1")).unwrap_err().to_string();
        assert!(err.contains("V1.1") && err.contains("V4.6"), "{err}");
        assert!(select_versions(Some(" , ")).is_err());
    }
}

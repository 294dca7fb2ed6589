//! Raw text to paragraph tensors.
//!
//! A document becomes an `m×n×z` tensor: one row per sentence, one column per
//! token, and the embedding vector along the depth axis. Out-of-vocabulary
//! tokens and padding positions are exact zero vectors.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

// ---------------------------------------------------------------------------
// Vocabulary and embeddings
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl Vocabulary {
    /// Inserts `token` if absent and returns its index.
    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.tokens.len();
        self.index.insert(token.to_owned(), i);
        self.tokens.push(token.to_owned());
        i
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Frozen pre-trained word vectors, one row per vocabulary entry.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    vocabulary: Vocabulary,
    vectors: Tensor<f32>,
}

impl EmbeddingTable {
    pub fn new(vocabulary: Vocabulary, vectors: Tensor<f32>) -> Result<Self> {
        if vectors.rank() != 2 || vectors.shape()[0] != vocabulary.len() {
            return Err(Error::Input(format!(
                "embedding matrix {:?} does not match vocabulary of {} tokens",
                vectors.shape(),
                vocabulary.len()
            )));
        }
        Ok(Self { vocabulary, vectors })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn dim(&self) -> usize {
        self.vectors.shape()[1]
    }

    pub fn vector(&self, token: &str) -> Option<&[f32]> {
        let z = self.dim();
        self.vocabulary.get(token).map(|i| &self.vectors.data()[i * z..(i + 1) * z])
    }
}

/// Reads a GloVe-style text file: a token followed by `z` reals per line.
///
/// The dimension is taken from the first line. Later duplicates of a token
/// are ignored. Blank lines are skipped.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut vocabulary = Vocabulary::default();
    let mut values: Vec<f32> = Vec::new();
    let mut dim: Option<usize> = None;
    let parse_err = |line: usize, reason: String| Error::Parse { path: path.to_path_buf(), line, reason };

    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let row: Vec<f32> = fields
            .map(|f| f.parse::<f32>().map_err(|e| parse_err(lineno, format!("bad value {f:?}: {e}"))))
            .collect::<Result<_>>()?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(lineno, "non-finite value".into()));
        }
        match dim {
            None if row.is_empty() => return Err(parse_err(lineno, "token has no vector".into())),
            None => dim = Some(row.len()),
            Some(z) if z != row.len() => {
                return Err(parse_err(lineno, format!("expected {z} values, found {}", row.len())))
            }
            Some(_) => {}
        }
        if vocabulary.get(token).is_some() {
            continue;
        }
        vocabulary.insert(token);
        values.extend(row);
    }

    let z = dim.ok_or_else(|| Error::Data { path: path.to_path_buf(), reason: "empty embedding file".into() })?;
    let vectors = Tensor::from_vec(&[vocabulary.len(), z], values)?;
    EmbeddingTable::new(vocabulary, vectors)
}

// ---------------------------------------------------------------------------
// Sentence splitting and tokenization
// ---------------------------------------------------------------------------

/// Splits on `.`, `!` or `?` followed by whitespace or end of text.
///
/// No abbreviation handling: `"Dr. who"` yields `["Dr", "who"]`.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        let boundary = matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|n| n.is_whitespace());
        if boundary {
            push_trimmed(&mut sentences, &current);
            current.clear();
        } else {
            current.push(c);
        }
    }
    push_trimmed(&mut sentences, &current);
    sentences
}

fn push_trimmed(out: &mut Vec<String>, fragment: &str) {
    let trimmed = fragment.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_owned());
    }
}

/// Lowercases and splits on whitespace; every punctuation character becomes
/// its own token.
pub fn tokenize(sentence: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in sentence.chars() {
        if c.is_whitespace() {
            flush(&mut tokens, &mut word);
        } else if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
        } else {
            flush(&mut tokens, &mut word);
            tokens.push(c.to_string());
        }
    }
    flush(&mut tokens, &mut word);
    tokens
}

fn flush(tokens: &mut Vec<String>, word: &mut String) {
    if !word.is_empty() {
        tokens.push(std::mem::take(word));
    }
}

/// Tokenized sentences of a document.
pub fn sentence_tokens(text: &str) -> Vec<Vec<String>> {
    split_sentences(text)
        .iter()
        .map(|s| tokenize(s))
        .filter(|t| !t.is_empty())
        .collect()
}

// ---------------------------------------------------------------------------
// Paragraph tensors
// ---------------------------------------------------------------------------

/// How a document is laid out in the input tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputLayout {
    /// One row per sentence.
    #[default]
    Paragraph,
    /// All tokens of the document in a single row (`m = 1`).
    Flat,
}

/// Input extents: `m` sentences by `n` tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParagraphTensor<T = f32> {
    pub data: Tensor<T>,
    pub real_sentence_count: usize,
    pub real_word_counts: Vec<usize>,
}

impl<T: Real> ParagraphTensor<T> {
    pub fn dims(&self) -> Dims {
        Dims { m: self.data.shape()[0], n: self.data.shape()[1] }
    }

    pub fn depth(&self) -> usize {
        self.data.shape()[2]
    }
}

fn layout_rows(text: &str, layout: InputLayout) -> Vec<Vec<String>> {
    let rows = sentence_tokens(text);
    match layout {
        InputLayout::Paragraph => rows,
        InputLayout::Flat => {
            let flat: Vec<String> = rows.into_iter().flatten().collect();
            if flat.is_empty() {
                Vec::new()
            } else {
                vec![flat]
            }
        }
    }
}

/// Builds the `m×n×z` paragraph tensor of `text`.
///
/// Sentences past `m` and tokens past `n` are truncated; everything else
/// that is not an in-vocabulary token stays zero.
pub fn build_paragraph<T: Real>(text: &str, emb: &EmbeddingTable, m: usize, n: usize) -> Result<ParagraphTensor<T>> {
    build_input(text, emb, Dims { m, n }, InputLayout::Paragraph)
}

pub fn build_input<T: Real>(text: &str, emb: &EmbeddingTable, dims: Dims, layout: InputLayout) -> Result<ParagraphTensor<T>> {
    let Dims { m, n } = dims;
    let z = emb.dim();
    let mut data = Tensor::<T>::zeros(&[m, n, z])?;
    let rows = layout_rows(text, layout);
    let kept = rows.len().min(m);
    let mut real_word_counts = Vec::with_capacity(kept);
    let buf = data.data_mut();
    for (s, tokens) in rows.iter().take(m).enumerate() {
        let count = tokens.len().min(n);
        real_word_counts.push(count);
        for (w, token) in tokens.iter().take(n).enumerate() {
            if let Some(v) = emb.vector(token) {
                let base = (s * n + w) * z;
                for (dst, &src) in buf[base..base + z].iter_mut().zip(v) {
                    *dst = T::from_f64(src as f64);
                }
            }
        }
    }
    Ok(ParagraphTensor { data, real_sentence_count: kept, real_word_counts })
}

/// A document already converted to its input tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample<T = f32> {
    pub input: Tensor<T>,
    pub label: usize,
}

pub fn encode_examples<T: Real>(
    examples: &[LabeledExample],
    emb: &EmbeddingTable,
    dims: Dims,
    layout: InputLayout,
) -> Result<Vec<EncodedExample<T>>> {
    examples
        .iter()
        .map(|ex| Ok(EncodedExample { input: build_input(&ex.text, emb, dims, layout)?.data, label: ex.label }))
        .collect()
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledExample {
    pub text: String,
    pub label: usize,
}

/// One example list with its ordered class names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub examples: Vec<LabeledExample>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Re-indexes labels against another class list (e.g. the training
    /// set's). Fails on any label the list does not contain.
    pub fn with_classes(&self, class_names: &[String]) -> Result<Dataset> {
        let lookup: HashMap<&str, usize> =
            class_names.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let examples = self
            .examples
            .iter()
            .map(|ex| {
                let name = &self.class_names[ex.label];
                lookup
                    .get(name.as_str())
                    .map(|&label| LabeledExample { text: ex.text.clone(), label })
                    .ok_or_else(|| Error::Input(format!("label {name:?} is not one of {class_names:?}")))
            })
            .collect::<Result<_>>()?;
        Ok(Dataset { examples, class_names: class_names.to_vec() })
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for ex in &self.examples {
            counts[ex.label] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub class_names: Vec<String>,
}

impl DatasetSplit {
    /// Pairs a training and a test set under the training set's class order.
    pub fn new(train: Dataset, test: &Dataset) -> Result<Self> {
        let test = test.with_classes(&train.class_names)?;
        let seen: HashSet<&LabeledExample> = train.examples.iter().collect();
        if let Some(dup) = test.examples.iter().find(|ex| seen.contains(ex)) {
            return Err(Error::Input(format!("example appears in both train and test: {:?}", dup.text)));
        }
        Ok(Self { train: train.examples, test: test.examples, class_names: train.class_names })
    }
}

/// Reads a CSV with `text` and `label` header columns.
///
/// Class names are the sorted distinct labels; label indices follow that order.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let data_err = |reason: String| Error::Data { path: path.to_path_buf(), reason };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(data_err(format!("cannot read header: {e}"))),
    };
    if headers.is_empty() {
        return Err(data_err("empty file".into()));
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| data_err(format!("missing column {name:?}")))
    };
    let text_col = column("text")?;
    let label_col = column("label")?;

    let mut raw = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse { path: path.to_path_buf(), line, reason: e.to_string() }
        })?;
        let text = record.get(text_col).unwrap_or_default().to_owned();
        let label = record.get(label_col).unwrap_or_default().trim().to_owned();
        raw.push((text, label));
    }
    if raw.is_empty() {
        return Err(data_err("no data rows".into()));
    }

    let class_names: Vec<String> = raw.iter().map(|(_, l)| l.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let examples = raw
        .into_iter()
        .map(|(text, label)| {
            let label = class_names.binary_search(&label).expect("label collected above");
            LabeledExample { text, label }
        })
        .collect();
    Ok(Dataset { examples, class_names })
}

// ---------------------------------------------------------------------------
// Dataset statistics
// ---------------------------------------------------------------------------

/// Fraction of examples whose length is strictly greater than the mean length.
pub fn exceeding_ratio<E>(examples: &[E], length: impl Fn(&E) -> usize) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Input("exceeding ratio of an empty example list".into()));
    }
    let lengths: Vec<usize> = examples.iter().map(length).collect();
    let total: usize = lengths.iter().sum();
    let count = lengths.len();
    // len > total/count  <=>  len*count > total, exact in integers
    let exceeding = lengths.iter().filter(|&&l| l * count > total).count();
    Ok(exceeding as f64 / count as f64)
}

/// Token count of a whole document.
pub fn token_length(text: &str) -> usize {
    sentence_tokens(text).iter().map(Vec::len).sum()
}

/// Corpus maxima: `m` = most sentences in any example, `n` = most tokens in
/// any sentence (or in any whole document for the flat layout).
pub fn infer_dims(train: &[LabeledExample], layout: InputLayout) -> Result<Dims> {
    if train.is_empty() {
        return Err(Error::Input("cannot infer dimensions from an empty training set".into()));
    }
    let mut dims = Dims { m: 1, n: 1 };
    for ex in train {
        let rows = layout_rows(&ex.text, layout);
        dims.m = dims.m.max(rows.len());
        dims.n = dims.n.max(rows.iter().map(Vec::len).max().unwrap_or(0));
    }
    Ok(dims)
}

/// `ceil(fraction · m)`, never below 1.
pub fn scaled_m(m: usize, fraction: f64) -> usize {
    // the epsilon keeps e.g. 0.3·10 = 3.0000000000000004 at 3
    (((fraction * m as f64) - 1e-9).ceil() as usize).max(1)
}

/// Distinct tokens across a corpus after tokenization.
pub fn corpus_vocabulary(examples: &[LabeledExample]) -> Vocabulary {
    let mut vocab = Vocabulary::default();
    for ex in examples {
        for sentence in sentence_tokens(&ex.text) {
            for token in &sentence {
                vocab.insert(token);
            }
        }
    }
    vocab
}

/// Seeded per-class subsample keeping `floor(fraction · count)` examples of
/// every class, in their original order. A fraction of 1 returns the input.
pub fn stratified_subsample(dataset: &Dataset, fraction: f64, seed: u64) -> Result<Vec<LabeledExample>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("fraction {fraction} outside (0, 1]")));
    }
    if fraction == 1.0 {
        return Ok(dataset.examples.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::new();
    for (class, name) in dataset.class_names.iter().enumerate() {
        let mut idx: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.examples[i].label == class).collect();
        let take = (fraction * idx.len() as f64 + 1e-9).floor() as usize;
        if take == 0 {
            return Err(Error::Input(format!(
                "fraction {fraction} leaves no training examples of class {name:?} ({} available)",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        keep.extend_from_slice(&idx[..take]);
    }
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| dataset.examples[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn table(entries: &[(&str, &[f32])]) -> EmbeddingTable {
        let mut vocab = Vocabulary::default();
        let z = entries[0].1.len();
        let mut data = Vec::new();
        for (t, v) in entries {
            vocab.insert(t);
            data.extend_from_slice(v);
        }
        EmbeddingTable::new(vocab, Tensor::from_vec(&[entries.len(), z], data).unwrap()).unwrap()
    }

    #[test]
    fn loads_glove_text() {
        let f = write_tmp("a 1.0 2.0\nb 3.0 4.0\n");
        let emb = load_embeddings(f.path()).unwrap();
        assert_eq!(emb.vocabulary().len(), 2);
        assert_eq!(emb.dim(), 2);
        assert_eq!(emb.vector("a").unwrap(), &[1.0, 2.0]);
    }

    #[test]
    fn duplicate_tokens_keep_first() {
        let f = write_tmp("a 1.0 2.0\na 9.0 9.0\nb 3.0 4.0\n");
        let emb = load_embeddings(f.path()).unwrap();
        assert_eq!(emb.vocabulary().len(), 2);
        assert_eq!(emb.vector("a").unwrap(), &[1.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch_reports_line() {
        let f = write_tmp("a 1.0 2.0\nb 1.0\n");
        match load_embeddings(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let empty = write_tmp("");
        assert!(load_embeddings(empty.path()).is_err());
    }

    #[test]
    fn sentence_splitting() {
        assert_eq!(split_sentences("Good. Bad!"), vec!["Good", "Bad"]);
        assert_eq!(split_sentences("no terminator"), vec!["no terminator"]);
        assert_eq!(split_sentences("Dr. who"), vec!["Dr", "who"]);
        assert_eq!(split_sentences("3.5 stars? yes"), vec!["3.5 stars", "yes"]);
        assert!(split_sentences("").is_empty());
        assert!(split_sentences(" . ! ").is_empty());
    }

    #[test]
    fn tokenization() {
        assert_eq!(tokenize("It's good"), vec!["it", "'", "s", "good"]);
        assert_eq!(tokenize("Hello   world"), vec!["hello", "world"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Wow,great"), vec!["wow", ",", "great"]);
    }

    #[test]
    fn paragraph_padding_and_oov() {
        let emb = table(&[("good", &[1.0, 2.0])]);
        let p: ParagraphTensor<f32> = build_paragraph("good", &emb, 2, 2).unwrap();
        assert_eq!(p.data.shape(), &[2, 2, 2]);
        assert_eq!(p.data.data(), &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.real_sentence_count, 1);
        assert_eq!(p.real_word_counts, vec![1]);

        let p: ParagraphTensor<f32> = build_paragraph("unknown words here", &emb, 2, 2).unwrap();
        assert!(p.data.data().iter().all(|&v| v == 0.0));
        assert_eq!(p.real_sentence_count, 1);
        assert_eq!(p.real_word_counts, vec![2]);
    }

    #[test]
    fn paragraph_truncates_sentences() {
        let emb = table(&[("a", &[1.0]), ("b", &[2.0]), ("c", &[3.0])]);
        let p: ParagraphTensor<f32> = build_paragraph("a. b. c.", &emb, 2, 1).unwrap();
        assert_eq!(p.real_sentence_count, 2);
        assert_eq!(p.data.data(), &[1.0, 2.0]);
    }

    #[test]
    fn flat_layout_concatenates_sentences() {
        let emb = table(&[("a", &[1.0]), ("b", &[2.0])]);
        let p: ParagraphTensor<f32> = build_input("a. b a.", &emb, Dims { m: 1, n: 4 }, InputLayout::Flat).unwrap();
        assert_eq!(p.data.data(), &[1.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn dataset_loading() {
        let f = write_tmp("text,label\nhello,pos\n\"a, b\nc\",neg\n");
        let ds = load_dataset(f.path()).unwrap();
        assert_eq!(ds.class_names, vec!["neg", "pos"]);
        assert_eq!(ds.examples[0].label, 1);
        assert_eq!(ds.examples[1].label, 0);
        assert_eq!(ds.examples[1].text, "a, b\nc");

        let header_only = write_tmp("text,label\n");
        let err = load_dataset(header_only.path()).unwrap_err().to_string();
        assert!(err.contains("no data rows"), "{err}");

        let missing = write_tmp("text,category\nx,y\n");
        let err = load_dataset(missing.path()).unwrap_err().to_string();
        assert!(err.contains("label"), "{err}");

        let empty = write_tmp("");
        assert!(load_dataset(empty.path()).is_err());
    }

    #[test]
    fn remapping_to_training_classes() {
        let ds = Dataset {
            examples: vec![LabeledExample { text: "x".into(), label: 0 }],
            class_names: vec!["pos".into()],
        };
        let remapped = ds.with_classes(&["neg".into(), "pos".into()]).unwrap();
        assert_eq!(remapped.examples[0].label, 1);
        assert!(ds.with_classes(&["neg".into()]).is_err());
    }

    #[test]
    fn exceeding_ratio_examples() {
        let r = exceeding_ratio(&[1usize, 2, 3], |&l| l).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(exceeding_ratio(&[4usize, 4, 4], |&l| l).unwrap(), 0.0);
        assert!(exceeding_ratio(&[] as &[usize], |&l| l).is_err());
    }

    #[test]
    fn dims_inference() {
        let ex = |t: &str| LabeledExample { text: t.into(), label: 0 };
        let train = vec![ex("a b"), ex("a. b c d. e"), ex("a. b")];
        assert_eq!(infer_dims(&train, InputLayout::Paragraph).unwrap(), Dims { m: 3, n: 3 });
        assert_eq!(infer_dims(&train, InputLayout::Flat).unwrap(), Dims { m: 1, n: 5 });
        assert!(infer_dims(&[], InputLayout::Paragraph).is_err());
        assert_eq!(scaled_m(10, 0.25), 3);
        assert_eq!(scaled_m(10, 0.3), 3);
        assert_eq!(scaled_m(10, 1.0), 10);
        assert_eq!(scaled_m(2, 0.25), 1);
    }

    #[test]
    fn stratified_subsample_keeps_class_shares() {
        let examples = (0..30).map(|i| LabeledExample { text: format!("doc {i}"), label: usize::from(i % 3 == 0) }).collect();
        let ds = Dataset { examples, class_names: vec!["a".into(), "b".into()] };
        let sub = stratified_subsample(&ds, 0.5, 1).unwrap();
        assert_eq!(sub.iter().filter(|e| e.label == 1).count(), 5);
        assert_eq!(sub.iter().filter(|e| e.label == 0).count(), 10);
        assert_eq!(sub, stratified_subsample(&ds, 0.5, 1).unwrap());
        assert_eq!(stratified_subsample(&ds, 1.0, 1).unwrap(), ds.examples);
        let err = stratified_subsample(&ds, 0.05, 1).unwrap_err().to_string();
        assert!(err.contains("\"b\""), "{err}");
    }
}

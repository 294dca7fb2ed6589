//! Losses, optimizers, the mini-batch training loop, and finite-difference
//! gradient checking.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::decide;
use crate::layers::{Dropout, Mode, Task};
use crate::model::{ActivationSignature, Model, OptimizerKind};
use crate::tensor::{Real, Tensor};
use crate::text::{Dims, EncodedExample};

/// Probabilities are clamped to `[PROB_CLAMP, 1 − PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

fn clamped_log(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln()
}

/// Mean binary cross-entropy over sigmoid outputs, and its gradient with
/// respect to each logit: `(σ − y) / m`.
pub fn bce_loss<T: Real>(probs: &[T], labels: &[usize]) -> Result<(f64, Vec<T>)> {
    if probs.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    if probs.len() != labels.len() {
        return Err(Error::Input(format!("{} probabilities but {} labels", probs.len(), labels.len())));
    }
    let m = probs.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(probs.len());
    for (&p, &y) in probs.iter().zip(labels) {
        if y > 1 {
            return Err(Error::Input(format!("binary label {y} is not 0 or 1")));
        }
        let p = p.as_f64();
        let y = y as f64;
        loss -= y * clamped_log(p) + (1.0 - y) * clamped_log(1.0 - p);
        grads.push(T::from_f64((p - y) / m));
    }
    Ok((loss / m, grads))
}

/// Mean categorical cross-entropy over softmax rows, and its gradient with
/// respect to the logits: `(p − onehot(y)) / m`.
pub fn cce_loss<T: Real>(probs: &[&[T]], labels: &[usize]) -> Result<(f64, Vec<Vec<T>>)> {
    if probs.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    if probs.len() != labels.len() {
        return Err(Error::Input(format!("{} probability rows but {} labels", probs.len(), labels.len())));
    }
    let m = probs.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(probs.len());
    for (row, &y) in probs.iter().zip(labels) {
        if y >= row.len() {
            return Err(Error::Input(format!("label {y} out of range for {} classes", row.len())));
        }
        loss -= clamped_log(row[y].as_f64());
        let g = row
            .iter()
            .enumerate()
            .map(|(k, &p)| T::from_f64((p.as_f64() - if k == y { 1.0 } else { 0.0 }) / m))
            .collect();
        grads.push(g);
    }
    Ok((loss / m, grads))
}

/// Loss of a batch of model outputs plus one logit-gradient tensor per example.
fn batch_loss<T: Real>(task: Task, probs: &[Tensor<T>], labels: &[usize]) -> Result<(f64, Vec<Tensor<T>>)> {
    match task {
        Task::Binary => {
            let flat: Vec<T> = probs.iter().map(|p| p.data()[0]).collect();
            let (loss, grads) = bce_loss(&flat, labels)?;
            Ok((loss, grads.into_iter().map(|g| Tensor::from_vec(&[1], vec![g])).collect::<Result<_>>()?))
        }
        Task::Multiclass => {
            let rows: Vec<&[T]> = probs.iter().map(|p| p.data()).collect();
            let (loss, grads) = cce_loss(&rows, labels)?;
            Ok((loss, grads.into_iter().map(Tensor::vector).collect::<Result<_>>()?))
        }
    }
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

fn check_shapes<T: Real>(params: &[&mut Tensor<T>], grads: &[Tensor<T>], state: &[Tensor<f64>]) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.len() {
        return Err(Error::Input(format!(
            "{} parameter blocks, {} gradient blocks, {} state blocks",
            params.len(),
            grads.len(),
            state.len()
        )));
    }
    for ((p, g), s) in params.iter().zip(grads).zip(state) {
        if p.shape() != g.shape() || p.shape() != s.shape() {
            return Err(Error::ShapeMismatch { left: p.shape().to_vec(), right: g.shape().to_vec() });
        }
    }
    Ok(())
}

fn zeros_like<T: Real>(params: &[&Tensor<T>]) -> Vec<Tensor<f64>> {
    params.iter().map(|p| Tensor::zeros(p.shape()).expect("parameter shapes are valid")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub first: Vec<Tensor<f64>>,
    pub second: Vec<Tensor<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new<T: Real>(params: &[&Tensor<T>]) -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8, first: zeros_like(params), second: zeros_like(params), t: 0 }
    }

    pub fn step<T: Real>(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>], lr: f64) -> Result<()> {
        check_shapes(params, grads, &self.first)?;
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                let g = g.as_f64();
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let step = lr * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
                *p = T::from_f64(p.as_f64() - step);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmsPropState {
    pub rho: f64,
    pub epsilon: f64,
    pub mean_square: Vec<Tensor<f64>>,
}

impl RmsPropState {
    pub fn new<T: Real>(params: &[&Tensor<T>]) -> Self {
        Self { rho: 0.9, epsilon: 1e-8, mean_square: zeros_like(params) }
    }

    pub fn step<T: Real>(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>], lr: f64) -> Result<()> {
        check_shapes(params, grads, &self.mean_square)?;
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.mean_square) {
            for ((p, &g), v) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                let g = g.as_f64();
                *v = self.rho * *v + (1.0 - self.rho) * g * g;
                *p = T::from_f64(p.as_f64() - lr * g / (v.sqrt() + self.epsilon));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam(AdamState),
    RmsProp(RmsPropState),
}

impl Optimizer {
    pub fn new<T: Real>(kind: OptimizerKind, params: &[&Tensor<T>]) -> Self {
        match kind {
            OptimizerKind::Adam => Self::Adam(AdamState::new(params)),
            OptimizerKind::Rmsprop => Self::RmsProp(RmsPropState::new(params)),
        }
    }

    pub fn step<T: Real>(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>], lr: f64) -> Result<()> {
        match self {
            Self::Adam(s) => s.step(params, grads, lr),
            Self::RmsProp(s) => s.step(params, grads, lr),
        }
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Consecutive non-improving epochs tolerated; `None` disables early
    /// stopping. Patience 0 and 1 both stop at the first non-improving epoch.
    pub patience: Option<usize>,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Overrides the architecture's optimizer when set.
    pub optimizer: Option<OptimizerKind>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 32,
            max_epochs: 10,
            patience: Some(2),
            validation_fraction: 0.1,
            seed: 0,
            optimizer: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max epochs must be at least 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Number of epochs actually run.
    pub stopped_epoch: usize,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub train_size: usize,
    pub validation_size: usize,
}

/// Eval-mode loss and accuracy over `examples`.
pub fn loss_and_accuracy<T: Real>(model: &Model<T>, examples: &[&EncodedExample<T>]) -> Result<(f64, f64)> {
    let probs = examples.iter().map(|e| model.predict(&e.input)).collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let (loss, _) = batch_loss(model.task(), &probs, &labels)?;
    let correct = probs.iter().zip(&labels).filter(|(p, &y)| decide(model.task(), p.data()) == y).count();
    Ok((loss, correct as f64 / examples.len() as f64))
}

/// Trains `model` with seeded mini-batch descent and early stopping on a
/// held-out validation split. Returns the parameters of the epoch with the
/// lowest validation loss.
pub fn train<T: Real>(model: &Model<T>, examples: &[EncodedExample<T>], cfg: &TrainConfig) -> Result<(Model<T>, TrainReport)> {
    cfg.validate()?;
    if examples.len() < 2 {
        return Err(Error::Input(format!("training needs at least 2 examples, got {}", examples.len())));
    }
    let classes = model.config.num_classes;
    let mut counts = vec![0usize; classes];
    for e in examples {
        if e.label >= classes {
            return Err(Error::Input(format!("label {} out of range for {classes} classes", e.label)));
        }
        counts[e.label] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        let name = model.class_names.get(missing).cloned().unwrap_or_else(|| missing.to_string());
        return Err(Error::Input(format!("training data has no examples of class {name:?}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((cfg.validation_fraction * examples.len() as f64).round() as usize).clamp(1, examples.len() - 1);
    let val: Vec<&EncodedExample<T>> = order[..n_val].iter().map(|&i| &examples[i]).collect();
    let mut train_idx: Vec<usize> = order[n_val..].to_vec();

    let mut model = model.clone();
    let kind = cfg.optimizer.unwrap_or(model.config.optimizer);
    let mut optimizer = Optimizer::new(kind, &model.params());
    let mut best: Option<(f64, usize, Vec<Tensor<T>>)> = None;
    let mut bad = 0usize;
    let mut epochs = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            let mut probs = Vec::with_capacity(batch.len());
            let mut caches = Vec::with_capacity(batch.len());
            for &i in batch {
                let fwd = model.forward(&examples[i].input, Mode::Train, &mut rng)?;
                probs.push(fwd.probabilities);
                caches.push(fwd.cache.expect("train mode keeps the cache"));
            }
            let labels: Vec<usize> = batch.iter().map(|&i| examples[i].label).collect();
            let (loss, logit_grads) = batch_loss(model.task(), &probs, &labels)?;
            loss_sum += loss * batch.len() as f64;

            let mut total: Option<Vec<Tensor<T>>> = None;
            for ((&i, cache), lg) in batch.iter().zip(&caches).zip(&logit_grads) {
                let grads = model.backward(&examples[i].input, cache, lg)?;
                total = Some(match total {
                    None => grads,
                    Some(acc) => acc
                        .into_iter()
                        .zip(grads)
                        .map(|(a, g)| a.elementwise(&g, crate::tensor::ElementwiseOp::Add))
                        .collect::<Result<_>>()?,
                });
            }
            let total = total.expect("batches are non-empty");
            optimizer.step(&mut model.params_mut(), &total, cfg.learning_rate)?;
            for p in model.params() {
                if !p.is_finite() {
                    return Err(Error::NonFinite("optimizer step"));
                }
            }
        }
        let (val_loss, val_accuracy) = loss_and_accuracy(&model, &val)?;
        epochs.push(EpochStats { epoch, train_loss: loss_sum / train_idx.len() as f64, val_loss, val_accuracy });

        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, model.params().into_iter().cloned().collect()));
            bad = 0;
        } else {
            bad += 1;
            if cfg.patience.is_some_and(|p| bad >= p) {
                break;
            }
        }
    }

    let (_, best_epoch, params) = best.expect("at least one epoch ran");
    model.load_params_from(&params)?;
    let report = TrainReport {
        stopped_epoch: epochs.len(),
        epochs,
        best_epoch,
        train_size: train_idx.len(),
        validation_size: n_val,
    };
    Ok((model, report))
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Minimum number of (example, parameter) points to compare.
    pub samples: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { step: 1e-5, samples: 200, tolerance: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Points skipped because `θ ± step` straddles a ReLU or max-pool kink.
    pub skipped: usize,
    pub max_relative_error: f64,
    /// Parameter block name and flat index of the worst point.
    pub worst: Option<(String, usize)>,
    /// Parameter blocks that received at least one checked point.
    pub blocks_covered: usize,
    pub blocks_total: usize,
    pub tolerance: f64,
    pub passed: bool,
}

fn example_loss(model: &Model<f64>, ex: &EncodedExample<f64>) -> Result<(f64, ActivationSignature)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let fwd = model.forward(&ex.input, Mode::Train, &mut rng)?;
    let (loss, _) = batch_loss(model.task(), &[fwd.probabilities], &[ex.label])?;
    let signature = fwd.cache.expect("train mode keeps the cache").activation_signature();
    Ok((loss, signature))
}

/// Back-propagated gradient of the single-example loss.
pub fn analytic_gradient(model: &Model<f64>, ex: &EncodedExample<f64>) -> Result<Vec<Tensor<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let fwd = model.forward(&ex.input, Mode::Train, &mut rng)?;
    let cache = fwd.cache.expect("train mode keeps the cache");
    let (_, logit_grads) = batch_loss(model.task(), &[fwd.probabilities], &[ex.label])?;
    model.backward(&ex.input, &cache, &logit_grads[0])
}

/// Compares [`analytic_gradient`] against central differences.
pub fn gradient_check(model: &Model<f64>, examples: &[EncodedExample<f64>], cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    gradient_check_with(model, examples, cfg, analytic_gradient)
}

/// Compares `analytic` against central differences of the per-example loss
/// at sampled parameters, spread round-robin over every parameter block.
/// Dropout is disabled for the duration of the check.
pub fn gradient_check_with<F>(
    model: &Model<f64>,
    examples: &[EncodedExample<f64>],
    cfg: &GradCheckConfig,
    analytic: F,
) -> Result<GradCheckReport>
where
    F: Fn(&Model<f64>, &EncodedExample<f64>) -> Result<Vec<Tensor<f64>>>,
{
    if examples.is_empty() {
        return Err(Error::Input("gradient check needs at least one example".into()));
    }
    let mut model = model.clone();
    model.dropout = Dropout::new(0.0)?;
    let names = model.param_names();
    let blocks = names.len();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // per (example, block) a shuffled queue of flat indices
    let mut queues: Vec<Vec<Vec<usize>>> = Vec::with_capacity(examples.len());
    for _ in examples {
        let per_block = model
            .params()
            .iter()
            .map(|p| {
                let mut idx: Vec<usize> = (0..p.len()).collect();
                idx.shuffle(&mut rng);
                idx
            })
            .collect();
        queues.push(per_block);
    }
    let analytic_grads = examples.iter().map(|e| analytic(&model, e)).collect::<Result<Vec<_>>>()?;
    for g in &analytic_grads {
        if g.len() != blocks {
            return Err(Error::Input(format!("analytic gradient has {} blocks, expected {blocks}", g.len())));
        }
    }

    let mut report = GradCheckReport {
        checked: 0,
        skipped: 0,
        max_relative_error: 0.0,
        worst: None,
        blocks_covered: 0,
        blocks_total: blocks,
        tolerance: cfg.tolerance,
        passed: false,
    };
    let mut covered = vec![false; blocks];
    let h = cfg.step;
    'outer: loop {
        let mut progressed = false;
        for (e, ex) in examples.iter().enumerate() {
            for b in 0..blocks {
                let Some(i) = queues[e][b].pop() else { continue };
                progressed = true;
                let original = model.params()[b].data()[i];
                model.params_mut()[b].data_mut()[i] = original + h;
                let (plus, sig_plus) = example_loss(&model, ex)?;
                model.params_mut()[b].data_mut()[i] = original - h;
                let (minus, sig_minus) = example_loss(&model, ex)?;
                model.params_mut()[b].data_mut()[i] = original;
                if sig_plus != sig_minus {
                    report.skipped += 1;
                    continue;
                }
                let numeric = (plus - minus) / (2.0 * h);
                let ga = analytic_grads[e][b].data()[i];
                let rel = (ga - numeric).abs() / ga.abs().max(numeric.abs()).max(1e-8);
                if report.worst.is_none() || rel > report.max_relative_error {
                    report.max_relative_error = rel;
                    report.worst = Some((names[b].clone(), i));
                }
                covered[b] = true;
                report.checked += 1;
                if report.checked >= cfg.samples && covered.iter().all(|&c| c) {
                    break 'outer;
                }
            }
        }
        if !progressed {
            break;
        }
    }
    report.blocks_covered = covered.iter().filter(|&&c| c).count();
    report.passed = report.max_relative_error < cfg.tolerance;
    Ok(report)
}

/// Uniform `[-1, 1)` inputs with labels cycling through the classes.
pub fn random_examples<T: Real>(dims: Dims, depth: usize, classes: usize, count: usize, seed: u64) -> Result<Vec<EncodedExample<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let data = (0..dims.m * dims.n * depth).map(|_| T::from_f64(rng.random_range(-1.0..1.0))).collect();
            Ok(EncodedExample { input: Tensor::from_vec(&[dims.m, dims.n, depth], data)?, label: k % classes.max(1) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{lookup, TEXTCONVONET_4};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn bce_hand_values() {
        let (loss, g) = bce_loss(&[0.5f64], &[1]).unwrap();
        assert_abs_diff_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-12);
        assert_abs_diff_eq!(g[0], -0.5, epsilon = 1e-12);

        let (loss, _) = bce_loss(&[1.0 - 1e-7f64], &[1]).unwrap();
        assert!(loss < 1e-6);

        let (a, _) = bce_loss(&[0.3f64], &[1]).unwrap();
        let (b, _) = bce_loss(&[0.7f64], &[0]).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);

        assert!(bce_loss::<f64>(&[], &[]).is_err());
        assert!(bce_loss(&[0.5f64], &[2]).is_err());
    }

    #[test]
    fn bce_survives_saturation() {
        let (loss, _) = bce_loss(&[0.0f32, 1.0], &[1, 0]).unwrap();
        assert!(loss.is_finite());
        assert_abs_diff_eq!(loss, -(1e-7f64).ln(), epsilon = 1e-6);
    }

    #[test]
    fn cce_hand_values() {
        let (loss, g) = cce_loss(&[&[0.5f64, 0.5][..]], &[0]).unwrap();
        assert_abs_diff_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-12);
        assert_abs_diff_eq!(g[0][0] + g[0][1], 0.0, epsilon = 1e-12);

        let (loss, _) = cce_loss(&[&[0.0f64, 1.0, 0.0][..]], &[1]).unwrap();
        assert!(loss < 1e-6);

        assert!(cce_loss(&[&[0.5f64, 0.5][..]], &[2]).is_err());
        assert!(cce_loss::<f64>(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn losses_are_non_negative(p in 0.0f64..=1.0, y in 0usize..2) {
            let (loss, _) = bce_loss(&[p], &[y]).unwrap();
            prop_assert!(loss >= 0.0);
        }

        #[test]
        fn cce_gradient_rows_sum_to_zero(raw in prop::collection::vec(0.01f64..1.0, 2..8), pick in 0usize..8) {
            let total: f64 = raw.iter().sum();
            let row: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let y = pick % row.len();
            let (loss, g) = cce_loss(&[&row[..]], &[y]).unwrap();
            prop_assert!(loss >= 0.0);
            prop_assert!(g[0].iter().sum::<f64>().abs() < 1e-6);
        }
    }

    fn scalar() -> Tensor<f64> {
        Tensor::vector(vec![0.0]).unwrap()
    }

    #[test]
    fn adam_first_step_is_minus_lr() {
        let mut p = scalar();
        let mut state = AdamState::new(&[&p]);
        state.step(&mut [&mut p], &[Tensor::vector(vec![1.0]).unwrap()], 0.01).unwrap();
        assert_abs_diff_eq!(p.data()[0], -0.01 / (1.0 + 1e-8), epsilon = 1e-15);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Tensor::vector(vec![0.25, -1.0]).unwrap();
        let zero = Tensor::zeros(&[2]).unwrap();
        let mut adam = AdamState::new(&[&p]);
        adam.step(&mut [&mut p], std::slice::from_ref(&zero), 0.1).unwrap();
        assert_eq!(p.data(), &[0.25, -1.0]);
        assert_eq!(adam.t, 1);
        let mut rms = RmsPropState::new(&[&p]);
        rms.step(&mut [&mut p], &[zero], 0.1).unwrap();
        assert_eq!(p.data(), &[0.25, -1.0]);
    }

    #[test]
    fn rmsprop_first_step() {
        let mut p = scalar();
        let mut state = RmsPropState::new(&[&p]);
        state.step(&mut [&mut p], &[Tensor::vector(vec![1.0]).unwrap()], 0.01).unwrap();
        assert_abs_diff_eq!(p.data()[0], -0.01 / (0.1f64.sqrt() + 1e-8), epsilon = 1e-15);
    }

    #[test]
    fn optimizer_shape_mismatch() {
        let mut p = scalar();
        let mut state = AdamState::new(&[&p]);
        let bad = Tensor::zeros(&[2]).unwrap();
        assert!(state.step(&mut [&mut p], &[bad], 0.1).is_err());
    }

    fn tiny_model(classes: usize) -> Model<f64> {
        let mut cfg = lookup(TEXTCONVONET_4).unwrap().with_classes(classes);
        cfg.filters = 2;
        cfg.dense_units = 8;
        Model::build(&cfg, Dims { m: 2, n: 4 }, 3, 11).unwrap()
    }

    #[test]
    fn gradient_check_tiny_binary() {
        let model = tiny_model(2);
        let examples = random_examples(model.dims, model.depth, 2, 3, 5).unwrap();
        let report = gradient_check(&model, &examples, &GradCheckConfig::default()).unwrap();
        assert!(report.checked >= 200, "{report:?}");
        assert_eq!(report.blocks_covered, report.blocks_total);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn gradient_check_tiny_multiclass() {
        let model = tiny_model(3);
        let examples = random_examples(model.dims, model.depth, 3, 3, 6).unwrap();
        let report = gradient_check(&model, &examples, &GradCheckConfig::default()).unwrap();
        assert!(report.checked >= 200, "{report:?}");
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn gradient_check_catches_sign_flip() {
        let model = tiny_model(2);
        let examples = random_examples(model.dims, model.depth, 2, 2, 5).unwrap();
        let flipped = |m: &Model<f64>, e: &EncodedExample<f64>| {
            Ok(analytic_gradient(m, e)?.into_iter().map(|g| g.map(|v| -v)).collect())
        };
        let report = gradient_check_with(&model, &examples, &GradCheckConfig::default(), flipped).unwrap();
        assert!(!report.passed);
        assert_abs_diff_eq!(report.max_relative_error, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn gradient_check_ignores_dropout() {
        let mut model = tiny_model(2);
        model.dropout = Dropout::new(0.5).unwrap();
        let examples = random_examples(model.dims, model.depth, 2, 2, 5).unwrap();
        let a = gradient_check(&model, &examples, &GradCheckConfig::default()).unwrap();
        let b = gradient_check(&model, &examples, &GradCheckConfig::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.passed, "{a:?}");
    }

    /// Two clusters told apart by the sign of the first input channel.
    fn separable(count: usize) -> Vec<EncodedExample<f32>> {
        let mut ex = random_examples::<f32>(Dims { m: 2, n: 4 }, 3, 2, count, 3).unwrap();
        for e in &mut ex {
            let shift = if e.label == 1 { 1.5 } else { -1.5 };
            for (k, v) in e.input.data_mut().iter_mut().enumerate() {
                if k % 3 == 0 {
                    *v += shift;
                }
            }
        }
        ex
    }

    fn small_f32(classes: usize) -> Model<f32> {
        let mut cfg = lookup(TEXTCONVONET_4).unwrap().with_classes(classes);
        cfg.filters = 4;
        cfg.dense_units = 8;
        Model::build(&cfg, Dims { m: 2, n: 4 }, 3, 1).unwrap()
    }

    #[test]
    fn training_is_deterministic() {
        let data = separable(20);
        let cfg = TrainConfig { max_epochs: 5, patience: None, batch_size: 4, ..TrainConfig::default() };
        let (m1, r1) = train(&small_f32(2), &data, &cfg).unwrap();
        let (m2, r2) = train(&small_f32(2), &data, &cfg).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn training_fits_separable_data() {
        let data = separable(20);
        let cfg = TrainConfig { max_epochs: 200, patience: None, ..TrainConfig::default() };
        let (model, report) = train(&small_f32(2), &data, &cfg).unwrap();
        assert_eq!(report.stopped_epoch, 200);
        let all: Vec<&EncodedExample<f32>> = data.iter().collect();
        let (_, acc) = loss_and_accuracy(&model, &all).unwrap();
        assert!(acc >= 0.95, "accuracy {acc}");
    }

    #[test]
    fn patience_zero_stops_at_first_non_improving_epoch() {
        let data = separable(20);
        let cfg = TrainConfig { max_epochs: 200, patience: Some(0), learning_rate: 0.5, ..TrainConfig::default() };
        let (_, report) = train(&small_f32(2), &data, &cfg).unwrap();
        let e = &report.epochs;
        let last = e.len() - 1;
        assert!(report.stopped_epoch < 200);
        let best_before = e[..last].iter().map(|s| s.val_loss).fold(f64::INFINITY, f64::min);
        assert!(e[last].val_loss >= best_before);
        for k in 1..last {
            let prior = e[..k].iter().map(|s| s.val_loss).fold(f64::INFINITY, f64::min);
            assert!(e[k].val_loss < prior, "epoch {} did not improve but training continued", k + 1);
        }
    }

    #[test]
    fn best_epoch_has_lowest_validation_loss() {
        let data = separable(20);
        let cfg = TrainConfig { max_epochs: 8, patience: None, learning_rate: 0.3, ..TrainConfig::default() };
        let (_, report) = train(&small_f32(2), &data, &cfg).unwrap();
        let min = report.epochs.iter().map(|s| s.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(report.epochs[report.best_epoch - 1].val_loss, min);
    }

    #[test]
    fn training_rejects_bad_inputs() {
        let data = separable(20);
        let one_class: Vec<_> = data.iter().filter(|e| e.label == 0).cloned().collect();
        assert!(train(&small_f32(2), &one_class, &TrainConfig::default()).is_err());
        assert!(train(&small_f32(2), &data[..1], &TrainConfig::default()).is_err());
        let bad = TrainConfig { validation_fraction: 1.0, ..TrainConfig::default() };
        assert!(train(&small_f32(2), &data, &bad).is_err());
        // a 3-class head with no class-2 examples
        assert!(train(&small_f32(3), &data, &TrainConfig::default()).is_err());
    }
}

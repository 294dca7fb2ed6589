//! TextConvoNet model assembly.
//!
//! Every pathway is `conv → ReLU → global max pool`. Pathway outputs are
//! concatenated and fed through `dense(ReLU) → dropout → output`, where the
//! output head is one sigmoid unit for binary tasks and a `c`-way softmax
//! otherwise. The Kim-style baseline uses the same machinery with only
//! height-1 kernels over a single-row (flattened) document.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{
    classify, concat, concat_backward, global_max_pool, global_max_pool_backward, relu_backward, relu_forward,
    Activation, Conv2DLayer, DenseLayer, Dropout, Mode, Task,
};
use crate::tensor::{Real, Tensor};
use crate::text::{Dims, InputLayout};

pub mod checkpoint;

// ---------------------------------------------------------------------------
// Architecture catalog
// ---------------------------------------------------------------------------

/// Spatial kernel size `height × width` (sentences × words).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KernelSize {
    pub height: usize,
    pub width: usize,
}

impl KernelSize {
    pub const fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }
}

impl fmt::Display for KernelSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

impl FromStr for KernelSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad kernel size {s:?}, expected e.g. \"2x3\""));
        let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        Ok(Self::new(h.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?))
    }
}

impl Serialize for KernelSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KernelSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Rmsprop,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(Self::Adam),
            "rmsprop" => Ok(Self::Rmsprop),
            _ => Err(Error::Config(format!("unknown optimizer {s:?}"))),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Adam => "adam",
            Self::Rmsprop => "rmsprop",
        })
    }
}

/// One row of the model catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub name: String,
    /// Height-1 kernels within a sentence.
    pub intra_kernels: Vec<KernelSize>,
    /// Kernels of height ≥ 2 spanning adjacent sentences.
    pub inter_kernels: Vec<KernelSize>,
    /// Filters per pathway.
    pub filters: usize,
    pub dense_units: usize,
    pub dropout: f64,
    pub optimizer: OptimizerKind,
    pub layout: InputLayout,
    pub num_classes: usize,
    pub task: Task,
}

impl ArchitectureConfig {
    fn textconvonet(name: &str, intra: &[(usize, usize)], inter: &[(usize, usize)]) -> Self {
        Self {
            name: name.to_owned(),
            intra_kernels: intra.iter().map(|&(h, w)| KernelSize::new(h, w)).collect(),
            inter_kernels: inter.iter().map(|&(h, w)| KernelSize::new(h, w)).collect(),
            filters: 32,
            dense_units: 64,
            dropout: 0.4,
            optimizer: OptimizerKind::Adam,
            layout: InputLayout::Paragraph,
            num_classes: 2,
            task: Task::Binary,
        }
    }

    /// Sets the class count and the matching head.
    pub fn with_classes(mut self, num_classes: usize) -> Self {
        self.num_classes = num_classes;
        self.task = if num_classes == 2 { Task::Binary } else { Task::Multiclass };
        self
    }

    /// All kernels in pathway order: intra first, then inter.
    pub fn kernels(&self) -> impl Iterator<Item = KernelSize> + '_ {
        self.intra_kernels.iter().chain(&self.inter_kernels).copied()
    }

    pub fn pathway_count(&self) -> usize {
        self.intra_kernels.len() + self.inter_kernels.len()
    }

    pub fn concat_width(&self) -> usize {
        self.pathway_count() * self.filters
    }

    /// Number of output units: 1 for a sigmoid head, `c` for softmax.
    pub fn output_units(&self) -> usize {
        match self.task {
            Task::Binary => 1,
            Task::Multiclass => self.num_classes,
        }
    }

    /// Tallest kernel height (minimum usable `m`).
    pub fn max_kernel_height(&self) -> usize {
        self.kernels().map(|k| k.height).max().unwrap_or(1)
    }

    pub fn max_kernel_width(&self) -> usize {
        self.kernels().map(|k| k.width).max().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("{}: {msg}", self.name)));
        if self.pathway_count() == 0 {
            return fail("at least one kernel is required".into());
        }
        if let Some(k) = self.intra_kernels.iter().find(|k| k.height != 1 || k.width == 0) {
            return fail(format!("intra-sentence kernel {k} must have height 1"));
        }
        if let Some(k) = self.inter_kernels.iter().find(|k| k.height < 2 || k.width == 0) {
            return fail(format!("inter-sentence kernel {k} must have height >= 2"));
        }
        if self.filters == 0 || self.dense_units == 0 {
            return fail("filters and dense units must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.num_classes < 2 {
            return fail(format!("need at least 2 classes, got {}", self.num_classes));
        }
        let expected = if self.num_classes == 2 { Task::Binary } else { Task::Multiclass };
        if self.task != expected {
            return fail(format!("{:?} head does not match {} classes", self.task, self.num_classes));
        }
        Ok(())
    }
}

const V1_INTRA: &[(usize, usize)] = &[(1, 2), (1, 3), (1, 4)];
const V1_INTER: &[(usize, usize)] = &[(2, 1), (2, 2), (2, 3)];
const V2_INTRA: &[(usize, usize)] = &[(1, 3), (1, 4), (1, 5)];
const V2_INTER: &[(usize, usize)] = &[(2, 2), (2, 3), (2, 4)];
const V3_INTER: &[(usize, usize)] = &[(3, 1), (3, 2), (3, 3)];
const V4_INTER: &[(usize, usize)] = &[(3, 2), (3, 3), (3, 4)];

/// (filters, dropout, optimizer, dense units) of sub-versions .1 through .6.
const SUB_VERSIONS: [(usize, f64, OptimizerKind, usize); 6] = [
    (32, 0.4, OptimizerKind::Adam, 64),
    (32, 0.4, OptimizerKind::Rmsprop, 64),
    (48, 0.4, OptimizerKind::Adam, 64),
    (48, 0.5, OptimizerKind::Adam, 64),
    (32, 0.4, OptimizerKind::Adam, 96),
    (32, 0.5, OptimizerKind::Adam, 96),
];

pub const TEXTCONVONET_4: &str = "TextConvoNet_4";
pub const TEXTCONVONET_6: &str = "TextConvoNet_6";
pub const KIM: &str = "Kim";

/// The 24 ablation versions `V1.1` … `V4.6`, in order.
pub fn ablation_versions() -> Vec<ArchitectureConfig> {
    let groups = [(V1_INTRA, V1_INTER), (V2_INTRA, V2_INTER), (V1_INTRA, V3_INTER), (V2_INTRA, V4_INTER)];
    let mut out = Vec::with_capacity(24);
    for (g, (intra, inter)) in groups.iter().enumerate() {
        for (s, &(filters, dropout, optimizer, dense_units)) in SUB_VERSIONS.iter().enumerate() {
            let mut cfg = ArchitectureConfig::textconvonet(&format!("V{}.{}", g + 1, s + 1), intra, inter);
            cfg.filters = filters;
            cfg.dropout = dropout;
            cfg.optimizer = optimizer;
            cfg.dense_units = dense_units;
            out.push(cfg);
        }
    }
    out
}

/// Every named architecture: the two TextConvoNet variants, the ablation
/// versions, and the Kim-style baseline.
pub fn catalog() -> Vec<ArchitectureConfig> {
    let mut out = vec![
        ArchitectureConfig::textconvonet(TEXTCONVONET_4, &[(1, 2), (1, 3)], &[(2, 1), (2, 2)]),
        ArchitectureConfig::textconvonet(TEXTCONVONET_6, V1_INTRA, V1_INTER),
    ];
    out.extend(ablation_versions());
    let mut kim = ArchitectureConfig::textconvonet(KIM, &[(1, 3), (1, 4), (1, 5)], &[]);
    kim.filters = 100;
    kim.dropout = 0.5;
    kim.layout = InputLayout::Flat;
    out.push(kim);
    out
}

pub fn lookup(name: &str) -> Result<ArchitectureConfig> {
    let all = catalog();
    match all.iter().find(|c| c.name.eq_ignore_ascii_case(name)) {
        Some(c) => Ok(c.clone()),
        None => {
            let names: Vec<_> = all.iter().map(|c| c.name.as_str()).collect();
            Err(Error::Config(format!("unknown model {name:?}; valid names: {}", names.join(", "))))
        }
    }
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f32> {
    pub config: ArchitectureConfig,
    pub dims: Dims,
    pub depth: usize,
    pub seed: u64,
    /// Class names in label-index order, carried into checkpoints.
    pub class_names: Vec<String>,
    pub pathways: Vec<Conv2DLayer<T>>,
    pub dense: DenseLayer<T>,
    pub output: DenseLayer<T>,
    pub dropout: Dropout,
}

/// Intermediate values of one forward pass, consumed by [`Model::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    conv_pre: Vec<Tensor<T>>,
    pool_argmax: Vec<Vec<usize>>,
    concat_sizes: Vec<usize>,
    dense_input: Tensor<T>,
    dense_pre: Tensor<T>,
    dropout_mask: Option<Vec<T>>,
    output_input: Tensor<T>,
    output_pre: Tensor<T>,
}

/// Pooling argmax positions and ReLU signs.
pub type ActivationSignature = (Vec<usize>, Vec<bool>);

impl<T> ForwardCache<T> {
    /// ReLU sign pattern and pooling argmax positions; a change in this
    /// signature between two inputs means a kink lies between them.
    pub fn activation_signature(&self) -> ActivationSignature
    where
        T: Real,
    {
        let argmax = self.pool_argmax.iter().flatten().copied().collect();
        let signs = self
            .conv_pre
            .iter()
            .flat_map(|t| t.data().iter())
            .chain(self.dense_pre.data())
            .map(|&v| v > T::zero())
            .collect();
        (argmax, signs)
    }
}

/// Output of [`Model::forward`].
#[derive(Debug, Clone)]
pub struct Forward<T> {
    pub probabilities: Tensor<T>,
    pub logits: Tensor<T>,
    /// Present in train mode only.
    pub cache: Option<ForwardCache<T>>,
}

fn glorot<T: Real, R: Rng>(rng: &mut R, shape: &[usize], fan_in: usize, fan_out: usize) -> Result<Tensor<T>> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len = shape.iter().product();
    let data = (0..len).map(|_| T::from_f64(rng.random_range(-bound..bound))).collect();
    Tensor::from_vec(shape, data)
}

impl<T: Real> Model<T> {
    /// Builds a model for `m × n × z` inputs with Glorot-uniform weights and
    /// zero biases drawn from `seed`.
    pub fn build(config: &ArchitectureConfig, dims: Dims, depth: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if depth == 0 {
            return Err(Error::Config("embedding depth must be positive".into()));
        }
        for k in config.kernels() {
            if k.height > dims.m || k.width > dims.n {
                return Err(Error::KernelTooLarge { g: k.height, h: k.width, m: dims.m, n: dims.n });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = config.filters;
        let pathways = config
            .kernels()
            .map(|k| {
                let field = k.height * k.width;
                let kernels = glorot(&mut rng, &[f, k.height, k.width, depth], field * depth, field * f)?;
                Conv2DLayer::new(kernels, Tensor::zeros(&[f])?)
            })
            .collect::<Result<Vec<_>>>()?;
        let u = config.concat_width();
        let r = config.dense_units;
        let dense = DenseLayer::new(glorot(&mut rng, &[u, r], u, r)?, Tensor::zeros(&[r])?, Activation::Relu)?;
        let c = config.output_units();
        let output = DenseLayer::new(glorot(&mut rng, &[r, c], r, c)?, Tensor::zeros(&[c])?, Activation::Identity)?;
        Ok(Self {
            config: config.clone(),
            dims,
            depth,
            seed,
            class_names: Vec::new(),
            pathways,
            dense,
            output,
            dropout: Dropout::new(config.dropout)?,
        })
    }

    pub fn task(&self) -> Task {
        self.config.task
    }

    /// Runs the network on one `m × n × z` input. The cache is kept in
    /// train mode only.
    pub fn forward<R: Rng + ?Sized>(&self, input: &Tensor<T>, mode: Mode, rng: &mut R) -> Result<Forward<T>> {
        let expected = [self.dims.m, self.dims.n, self.depth];
        if input.shape() != expected {
            return Err(Error::ShapeMismatch { left: input.shape().to_vec(), right: expected.to_vec() });
        }
        let mut conv_pre = Vec::with_capacity(self.pathways.len());
        let mut pool_argmax = Vec::with_capacity(self.pathways.len());
        let mut pooled = Vec::with_capacity(self.pathways.len());
        for conv in &self.pathways {
            let pre = conv.forward(input)?;
            let pool = global_max_pool(&relu_forward(&pre))?;
            pooled.push(pool.values);
            pool_argmax.push(pool.argmax);
            conv_pre.push(pre);
        }
        let (dense_input, concat_sizes) = concat(&pooled)?;
        let (hidden, dense_pre) = self.dense.forward(&dense_input)?;
        let (output_input, dropout_mask) = self.dropout.forward(&hidden, mode, rng);
        let (logits, output_pre) = self.output.forward(&output_input)?;
        let probabilities = classify(self.task(), &logits)?;
        let cache = (mode == Mode::Train).then_some(ForwardCache {
            conv_pre,
            pool_argmax,
            concat_sizes,
            dense_input,
            dense_pre,
            dropout_mask,
            output_input,
            output_pre,
        });
        Ok(Forward { probabilities, logits, cache })
    }

    /// Eval-mode class probabilities.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        // eval mode never draws from the generator
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(self.forward(input, Mode::Eval, &mut rng)?.probabilities)
    }

    /// Parameter gradients given the loss gradient w.r.t. the logits, in
    /// [`Model::params`] order.
    pub fn backward(&self, input: &Tensor<T>, cache: &ForwardCache<T>, logit_grad: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let out = self.output.backward(&cache.output_input, &cache.output_pre, logit_grad)?;
        let hidden_grad = Dropout::backward(cache.dropout_mask.as_deref(), &out.input);
        let dense = self.dense.backward(&cache.dense_input, &cache.dense_pre, &hidden_grad)?;
        let pooled_grads = concat_backward(&dense.input, &cache.concat_sizes)?;

        let mut grads = Vec::with_capacity(2 * self.pathways.len() + 4);
        for (((conv, pre), argmax), pg) in
            self.pathways.iter().zip(&cache.conv_pre).zip(&cache.pool_argmax).zip(&pooled_grads)
        {
            let relu_grad = global_max_pool_backward(pre.shape(), argmax, pg)?;
            let conv_grad = relu_backward(pre, &relu_grad)?;
            let (dk, db) = conv.param_backward(input, &conv_grad)?;
            grads.push(dk);
            grads.push(db);
        }
        grads.extend([dense.weights, dense.biases, out.weights, out.biases]);
        Ok(grads)
    }

    /// Parameters in a fixed order: each pathway's kernels and biases, then
    /// the dense and output layers' weights and biases.
    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut out: Vec<&Tensor<T>> = Vec::with_capacity(2 * self.pathways.len() + 4);
        for p in &self.pathways {
            out.push(&p.kernels);
            out.push(&p.biases);
        }
        out.extend([&self.dense.weights, &self.dense.biases, &self.output.weights, &self.output.biases]);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out: Vec<&mut Tensor<T>> = Vec::with_capacity(2 * self.pathways.len() + 4);
        for p in &mut self.pathways {
            out.push(&mut p.kernels);
            out.push(&mut p.biases);
        }
        out.extend([
            &mut self.dense.weights,
            &mut self.dense.biases,
            &mut self.output.weights,
            &mut self.output.biases,
        ]);
        out
    }

    /// Human-readable name of each parameter block, aligned with [`Model::params`].
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for k in self.config.kernels() {
            out.push(format!("conv{k}.kernels"));
            out.push(format!("conv{k}.biases"));
        }
        out.extend(["dense.weights", "dense.biases", "output.weights", "output.biases"].map(String::from));
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Spatial extent of each pathway's feature maps.
    pub fn pathway_extents(&self) -> Result<Vec<(usize, usize)>> {
        self.pathways.iter().map(|c| c.output_extent(self.dims.m, self.dims.n)).collect()
    }

    /// Copies parameter values from `other`, which must share the layout.
    pub fn load_params_from(&mut self, other: &[Tensor<T>]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != other.len() {
            return Err(Error::Input(format!("expected {} parameter blocks, got {}", params.len(), other.len())));
        }
        for (dst, src) in params.iter_mut().zip(other) {
            dst.same_shape(src)?;
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }

    /// Same model in another precision.
    pub fn cast<U: Real>(&self) -> Model<U> {
        let conv = |c: &Conv2DLayer<T>| Conv2DLayer { kernels: c.kernels.cast(), biases: c.biases.cast() };
        let dense = |d: &DenseLayer<T>| DenseLayer { weights: d.weights.cast(), biases: d.biases.cast(), activation: d.activation };
        Model {
            config: self.config.clone(),
            dims: self.dims,
            depth: self.depth,
            seed: self.seed,
            class_names: self.class_names.clone(),
            pathways: self.pathways.iter().map(conv).collect(),
            dense: dense(&self.dense),
            output: dense(&self.output),
            dropout: self.dropout,
        }
    }
}

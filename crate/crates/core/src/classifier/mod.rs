//! Linear classifier: float softmax regression trained with mini-batch SGD,
//! per-tensor int8 post-training quantization, and int32 integer inference.

mod serialize;

pub use serialize::{QuantizedModel, FORMAT_VERSION, MAGIC};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::error::{Error, Result};

/// Float weights `[C][L_F]` (row-major) and biases `[C]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatClassifier {
    pub num_classes: usize,
    pub num_features: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl FloatClassifier {
    pub fn zeros(num_classes: usize, num_features: usize) -> Self {
        FloatClassifier {
            num_classes,
            num_features,
            weights: vec![0.0; num_classes * num_features],
            bias: vec![0.0; num_classes],
        }
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.weights[c * self.num_features..(c + 1) * self.num_features]
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.num_classes)
            .map(|c| self.bias[c] + self.row(c).iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax_f64(&self.logits(x))
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

pub fn argmax_f64(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn argmax_i32(v: &[i32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mini-batch SGD hyperparameters. The learning rate follows a cosine decay
/// from `learning_rate` to 0 over all steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecipe {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Heavy-ball momentum; 0 is plain SGD.
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainRecipe {
    fn default() -> Self {
        TrainRecipe {
            epochs: 100,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.0,
            weight_decay: 1e-4,
            seed: 0,
        }
    }
}

impl TrainRecipe {
    pub fn with_seed(seed: u64) -> Self {
        TrainRecipe {
            seed,
            ..TrainRecipe::default()
        }
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Gradient of the regularized cross-entropy over a set of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub loss: f64,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Mean softmax cross-entropy over `rows` plus `weight_decay / 2 * |W|^2`
/// (bias not regularized), with its analytic gradient.
pub fn loss_and_grad(
    clf: &FloatClassifier,
    features: &[Vec<f64>],
    labels: &[usize],
    rows: &[usize],
    weight_decay: f64,
) -> Gradient {
    let (c_n, f_n) = (clf.num_classes, clf.num_features);
    let mut gw = vec![0.0; c_n * f_n];
    let mut gb = vec![0.0; c_n];
    let mut loss = 0.0;
    let inv = 1.0 / rows.len().max(1) as f64;
    let mut p = vec![0.0; c_n];
    for &r in rows {
        let x = &features[r];
        for (c, pc) in p.iter_mut().enumerate() {
            *pc = clf.bias[c] + clf.row(c).iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        softmax_in_place(&mut p);
        loss -= p[labels[r]].max(f64::MIN_POSITIVE).ln() * inv;
        for c in 0..c_n {
            let delta = (p[c] - if c == labels[r] { 1.0 } else { 0.0 }) * inv;
            gb[c] += delta;
            let row = &mut gw[c * f_n..(c + 1) * f_n];
            for (g, v) in row.iter_mut().zip(x) {
                *g += delta * v;
            }
        }
    }
    let mut reg = 0.0;
    for (g, w) in gw.iter_mut().zip(&clf.weights) {
        *g += weight_decay * w;
        reg += w * w;
    }
    loss += 0.5 * weight_decay * reg;
    Gradient {
        loss,
        weights: gw,
        bias: gb,
    }
}

/// Trains a multinomial logistic regression. Deterministic given the recipe
/// seed: the shuffle order is the only source of randomness.
pub fn train(
    features: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    recipe: &TrainRecipe,
) -> Result<FloatClassifier> {
    let n = features.len();
    if n != labels.len() {
        return Err(Error::Shape(format!("{n} feature rows but {} labels", labels.len())));
    }
    if n < num_classes {
        return Err(Error::Training(format!(
            "{n} training rows for {num_classes} classes"
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::Training(format!("label {l} outside [0, {num_classes})")));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::Training("training set has a single class".into()));
    }
    let f_n = features[0].len();
    if features.iter().any(|r| r.len() != f_n) {
        return Err(Error::Shape("ragged feature matrix".into()));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite training feature".into()));
    }

    let mut clf = FloatClassifier::zeros(num_classes, f_n);
    let mut vel_w = vec![0.0; clf.weights.len()];
    let mut vel_b = vec![0.0; num_classes];
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed ^ 0x5EED_C1A5_5EED_C1A5);
    let mut order: Vec<usize> = (0..n).collect();
    let batch = recipe.batch_size.max(1);
    let steps_per_epoch = n.div_ceil(batch);
    let total = (recipe.epochs * steps_per_epoch).max(1) as f64;
    let mut step = 0usize;
    for _ in 0..recipe.epochs {
        order.shuffle(&mut rng);
        for rows in order.chunks(batch) {
            let lr = 0.5 * recipe.learning_rate * (1.0 + (std::f64::consts::PI * step as f64 / total).cos());
            let g = loss_and_grad(&clf, features, labels, rows, recipe.weight_decay);
            for ((w, v), gw) in clf.weights.iter_mut().zip(&mut vel_w).zip(&g.weights) {
                *v = recipe.momentum * *v + gw;
                *w -= lr * *v;
            }
            for ((b, v), gb) in clf.bias.iter_mut().zip(&mut vel_b).zip(&g.bias) {
                *v = recipe.momentum * *v + gb;
                *b -= lr * *v;
            }
            step += 1;
        }
    }
    if !clf.is_finite() {
        return Err(Error::Training("weights diverged".into()));
    }
    Ok(clf)
}

/// Int8 weights with one symmetric scale for the whole matrix, int32 biases
/// pre-multiplied into the accumulator's units.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedClassifier {
    pub num_classes: usize,
    pub num_features: usize,
    pub weights_q: Vec<i8>,
    pub bias_q: Vec<i32>,
    pub weight_scale: f64,
}

/// Per-tensor symmetric int8 quantization. `frac_bits` is the fixed-point
/// width of the classifier input; the bias is rescaled to match
/// `Σ w_q · f` and clamped to the headroom the config leaves for it.
pub fn quantize(clf: &FloatClassifier, config: &ModelConfig) -> QuantizedClassifier {
    let max = clf.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let weight_scale = if max > 0.0 { max / 127.0 } else { 1.0 };
    let weights_q = clf
        .weights
        .iter()
        .map(|w| (w / weight_scale).round().clamp(-127.0, 127.0) as i8)
        .collect();
    let bias_gain = 2f64.powi(config.scaled_frac_bits as i32) / weight_scale;
    let bound = config.bias_bound() as f64;
    let bias_q = clf
        .bias
        .iter()
        .map(|b| (b * bias_gain).round().clamp(-bound, bound) as i32)
        .collect();
    QuantizedClassifier {
        num_classes: clf.num_classes,
        num_features: clf.num_features,
        weights_q,
        bias_q,
        weight_scale,
    }
}

impl QuantizedClassifier {
    pub fn row(&self, c: usize) -> &[i8] {
        &self.weights_q[c * self.num_features..(c + 1) * self.num_features]
    }

    /// Integer class scores, accumulated in int32.
    pub fn scores(&self, f_scaled: &[i16]) -> Result<Vec<i32>> {
        if f_scaled.len() != self.num_features {
            return Err(Error::Shape(format!(
                "feature vector has {} entries, classifier expects {}",
                f_scaled.len(),
                self.num_features
            )));
        }
        Ok((0..self.num_classes)
            .map(|c| {
                let mut acc = self.bias_q[c];
                for (&w, &f) in self.row(c).iter().zip(f_scaled) {
                    let term = w as i32 * f as i32;
                    acc = if cfg!(debug_assertions) {
                        acc.checked_add(term).expect("int32 classifier accumulator overflow")
                    } else {
                        acc.wrapping_add(term)
                    };
                }
                acc
            })
            .collect())
    }

    /// Argmax of the int32 scores; lowest index wins ties.
    pub fn predict(&self, f_scaled: &[i16]) -> Result<usize> {
        Ok(argmax_i32(&self.scores(f_scaled)?))
    }

    /// Dequantized copy, for measuring quantization error.
    pub fn dequantize(&self, config: &ModelConfig) -> FloatClassifier {
        let bias_gain = 2f64.powi(config.scaled_frac_bits as i32) / self.weight_scale;
        FloatClassifier {
            num_classes: self.num_classes,
            num_features: self.num_features,
            weights: self.weights_q.iter().map(|&w| w as f64 * self.weight_scale).collect(),
            bias: self.bias_q.iter().map(|&b| b as f64 / bias_gain).collect(),
        }
    }
}

pub fn predict(f_scaled: &[i16], clf: &QuantizedClassifier) -> Result<usize> {
    clf.predict(f_scaled)
}

//! End-to-end training and integer inference.

use rayon::prelude::*;

use crate::classifier::{self, FloatClassifier, QuantizedModel, TrainRecipe};
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::projection::{input_scale, quantize_input, znormalize, QuantizedSeries};
use crate::scaler;
use crate::transform::{transform, transform_batch, FeatureVector, KernelBank};

/// A loaded model with its kernel bank regenerated, ready for inference.
#[derive(Debug, Clone)]
pub struct Engine {
    pub model: QuantizedModel,
    bank: KernelBank,
}

impl Engine {
    pub fn new(model: QuantizedModel) -> Result<Self> {
        let mut cfg = model.config.clone();
        cfg.seed = model.bank_seed;
        let cfg = cfg.validated()?;
        let bank = KernelBank::sample(&cfg);
        Ok(Engine { model, bank })
    }

    pub fn bank(&self) -> &KernelBank {
        &self.bank
    }

    pub fn config(&self) -> &ModelConfig {
        &self.model.config
    }

    /// Optional z-normalization followed by fixed-point quantization.
    pub fn quantize(&self, raw: &[f64]) -> Result<QuantizedSeries> {
        preprocess(raw, &self.model.config, self.model.input_scale)
    }

    pub fn features(&self, raw: &[f64]) -> Result<FeatureVector> {
        transform(&self.quantize(raw)?, &self.bank, &self.model.config)
    }

    pub fn scale_quantized(&self, series: &QuantizedSeries) -> Result<Vec<i16>> {
        let fv = transform(series, &self.bank, &self.model.config)?;
        Ok(scaler::apply(&fv.to_flat(), &self.model.scaler))
    }

    pub fn scaled(&self, raw: &[f64]) -> Result<Vec<i16>> {
        self.scale_quantized(&self.quantize(raw)?)
    }

    pub fn scores(&self, raw: &[f64]) -> Result<Vec<i32>> {
        self.model.clf.scores(&self.scaled(raw)?)
    }

    pub fn classify(&self, raw: &[f64]) -> Result<usize> {
        self.model.clf.predict(&self.scaled(raw)?)
    }

    pub fn classify_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        rows.par_iter().map(|r| self.classify(r)).collect()
    }

    /// Fraction of `rows` classified as their label.
    pub fn accuracy(&self, rows: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        if rows.len() != labels.len() {
            return Err(Error::Shape("rows and labels differ in length".into()));
        }
        let pred = self.classify_batch(rows)?;
        Ok(accuracy(&pred, labels))
    }
}

pub fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / pred.len() as f64
}

fn preprocess(raw: &[f64], config: &ModelConfig, scale: f64) -> Result<QuantizedSeries> {
    if raw.len() != config.input_len {
        return Err(Error::Shape(format!(
            "series has {} samples, model expects {}",
            raw.len(),
            config.input_len
        )));
    }
    if config.znorm {
        quantize_input(&znormalize(raw), scale, config.input_frac_bits)
    } else {
        quantize_input(raw, scale, config.input_frac_bits)
    }
}

/// Everything produced by [`fit`].
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: QuantizedModel,
    /// The classifier before int8 quantization.
    pub float_clf: FloatClassifier,
    /// Integer-path accuracy on the training rows.
    pub train_accuracy: f64,
}

/// Raw training windows to unscaled integer features, in parallel.
pub fn extract_features(
    rows: &[Vec<f64>],
    config: &ModelConfig,
    scale: f64,
    bank: &KernelBank,
) -> Result<Vec<Vec<i16>>> {
    let series: Vec<QuantizedSeries> = rows
        .par_iter()
        .map(|r| preprocess(r, config, scale))
        .collect::<Result<_>>()?;
    Ok(transform_batch(&series, bank, config)?
        .into_iter()
        .map(|fv| fv.to_flat())
        .collect())
}

/// Frozen input scale for a training set under `config`.
pub fn fit_input_scale(rows: &[Vec<f64>], config: &ModelConfig) -> f64 {
    if config.znorm {
        let z: Vec<Vec<f64>> = rows.iter().map(|r| znormalize(r)).collect();
        input_scale(z.iter().map(|r| r.as_slice()))
    } else {
        input_scale(rows.iter().map(|r| r.as_slice()))
    }
}

/// Trains scaler and classifier on unscaled features and packs the model.
pub fn fit_from_features(
    features: &[Vec<i16>],
    labels: &[usize],
    config: &ModelConfig,
    scale: f64,
    recipe: &TrainRecipe,
) -> Result<FitOutput> {
    let config = config.clone().validated()?;
    let params = scaler::fit(features, &config)?;
    let scaled: Vec<Vec<i16>> = features.iter().map(|f| scaler::apply(f, &params)).collect();
    let unit = 2f64.powi(config.scaled_frac_bits as i32);
    let real: Vec<Vec<f64>> = scaled
        .iter()
        .map(|r| r.iter().map(|&v| v as f64 / unit).collect())
        .collect();
    let float_clf = classifier::train(&real, labels, config.num_classes, recipe)?;
    let clf = classifier::quantize(&float_clf, &config);
    let pred: Vec<usize> = scaled.iter().map(|r| clf.predict(r)).collect::<Result<_>>()?;
    let model = QuantizedModel {
        bank_seed: config.seed,
        input_scale: scale,
        scaler: params,
        clf,
        config,
    };
    Ok(FitOutput {
        model,
        float_clf,
        train_accuracy: accuracy(&pred, labels),
    })
}

/// Full training: input quantization, transform, scaler fit, classifier
/// training and int8 quantization.
pub fn fit(rows: &[Vec<f64>], labels: &[usize], config: &ModelConfig, recipe: &TrainRecipe) -> Result<FitOutput> {
    let config = config.clone().validated()?;
    let scale = fit_input_scale(rows, &config);
    let bank = KernelBank::sample(&config);
    let features = extract_features(rows, &config, scale, &bank)?;
    fit_from_features(&features, labels, &config, scale, recipe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(n: usize, len: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let f = if c == 0 { 0.15 } else { 0.6 };
            rows.push(
                (0..len)
                    .map(|t| (t as f64 * f).sin() + rng.gen_range(-0.2..0.2))
                    .collect(),
            );
            labels.push(c);
        }
        (rows, labels)
    }

    #[test]
    fn fits_and_separates_frequencies() {
        let (rows, labels) = toy(40, 64, 1);
        let cfg = ModelConfig::e_config(64, 2);
        let out = fit(&rows, &labels, &cfg, &TrainRecipe::with_seed(0)).unwrap();
        let engine = Engine::new(out.model).unwrap();
        let (test, tl) = toy(40, 64, 2);
        assert!(engine.accuracy(&test, &tl).unwrap() >= 0.9);
    }

    #[test]
    fn engine_round_trips_through_bytes() {
        let (rows, labels) = toy(20, 48, 3);
        let out = fit(&rows, &labels, &ModelConfig::e_config(48, 2), &TrainRecipe::with_seed(1)).unwrap();
        let a = Engine::new(out.model.clone()).unwrap();
        let b = Engine::new(QuantizedModel::from_bytes(&out.model.to_bytes()).unwrap()).unwrap();
        for r in &rows {
            assert_eq!(a.scores(r).unwrap(), b.scores(r).unwrap());
        }
    }

    #[test]
    fn rejects_wrong_length() {
        let (rows, labels) = toy(10, 48, 4);
        let out = fit(&rows, &labels, &ModelConfig::e_config(48, 2), &TrainRecipe::with_seed(1)).unwrap();
        let e = Engine::new(out.model).unwrap();
        assert!(matches!(e.classify(&[0.0; 47]), Err(Error::Shape(_))));
    }
}

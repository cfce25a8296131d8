//! Slow real-valued reference of the whole pipeline.
//!
//! Every convolution output is materialized, counting runs on unshifted
//! responses, scaling divides by real statistics, and the classifier is the
//! unquantized float model. It serves as the differential oracle for the
//! integer path and as a measure of what integerization costs.

use rayon::prelude::*;

use crate::classifier::{self, argmax_f64, FloatClassifier, TrainRecipe};
use crate::config::{ModelConfig, Padding};
use crate::error::{Error, Result};
use crate::pipeline::Engine;
use crate::projection::{make_views, QuantizedSeries};
use crate::scaler::nearest_pow2_exponent;
use crate::transform::{is_min_group, KernelBank};

/// Materialized convolution outputs `[view][group][kernel][timestep]` and the
/// real-valued feature vector (hard block then soft block). Soft sums are
/// expressed in units of `2^conv_preshift` so they line up with the integer
/// path.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTransform {
    pub conv: Vec<Vec<Vec<Vec<f64>>>>,
    pub features: Vec<f64>,
}

impl OracleTransform {
    pub fn hard(&self) -> &[f64] {
        &self.features[..self.features.len() / 2]
    }

    pub fn soft(&self) -> &[f64] {
        &self.features[self.features.len() / 2..]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutput {
    pub conv: Vec<Vec<Vec<Vec<f64>>>>,
    pub features_float: Vec<f64>,
    /// Scaled features in real units (no fixed-point fraction, no clamp).
    pub scaled: Vec<f64>,
    pub logits: Vec<f64>,
}

fn response(x: &[f64], kernel: &[i8], d: usize, i: usize, padding: Padding) -> f64 {
    let pad = match padding {
        Padding::Valid => 0,
        Padding::SameZero => (kernel.len() - 1) * d / 2,
    };
    kernel
        .iter()
        .enumerate()
        .filter_map(|(j, &w)| {
            let pos = (i + j * d).checked_sub(pad)?;
            x.get(pos).map(|&v| v * w as f64)
        })
        .sum()
}

/// Full materialization followed by counting in real arithmetic.
#[allow(clippy::needless_range_loop)]
pub fn oracle_transform(series: &QuantizedSeries, bank: &KernelBank, config: &ModelConfig) -> Result<OracleTransform> {
    if !bank.matches(config) {
        return Err(Error::Shape("kernel bank does not match config".into()));
    }
    let views = make_views(series, config)?;
    let (h_n, k_n) = (config.groups, config.kernels_per_group);
    let conv: Vec<Vec<Vec<Vec<f64>>>> = views
        .iter()
        .enumerate()
        .map(|(v, view)| {
            let x: Vec<f64> = view.series.samples.iter().map(|&s| s as f64).collect();
            (0..h_n)
                .map(|g| {
                    (0..k_n)
                        .map(|k| {
                            (0..view.timesteps)
                                .map(|i| response(&x, bank.kernel(v, g, k), view.dilation, i, config.padding))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let half = config.counts_len();
    let mut features = vec![0.0; 2 * half];
    let unit = 2f64.powi(config.conv_preshift as i32);
    for (v, per_view) in conv.iter().enumerate() {
        for (g, per_group) in per_view.iter().enumerate() {
            let take_min = is_min_group(config, g);
            let steps = per_group[0].len();
            for i in 0..steps {
                let mut best = 0;
                for k in 1..k_n {
                    let (a, b) = (per_group[k][i], per_group[best][i]);
                    if (take_min && a < b) || (!take_min && a > b) {
                        best = k;
                    }
                }
                let idx = (v * h_n + g) * k_n + best;
                features[idx] += 1.0;
                let y = per_group[best][i] / unit;
                features[half + idx] += if take_min { -y } else { y };
            }
        }
    }
    Ok(OracleTransform { conv, features })
}

/// How hard/soft accumulations are compressed before statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Compression {
    /// Real division by `2^count_shift` (hard) and `2^soft_shift` (soft).
    Shift { count_shift: u32, soft_shift: u32 },
    /// Square root of the non-negative part, as in the float dictionary baseline.
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaMode {
    /// Divide by the true standard deviation.
    Exact,
    /// Divide by the power of two nearest to it.
    PowerOfTwo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleScaler {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub compression: Compression,
}

impl OracleScaler {
    fn compress(compression: Compression, half: usize, i: usize, v: f64) -> f64 {
        match compression {
            Compression::Shift {
                count_shift,
                soft_shift,
            } => {
                let s = if i < half { count_shift } else { soft_shift };
                v / 2f64.powi(s as i32)
            }
            Compression::Sqrt => v.max(0.0).sqrt(),
        }
    }

    pub fn fit(rows: &[Vec<f64>], compression: Compression, sigma_mode: SigmaMode) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Input("oracle scaler needs at least 2 rows".into()));
        }
        let lf = rows[0].len();
        let half = lf / 2;
        let n = rows.len() as f64;
        let mut mu = vec![0.0; lf];
        let mut sigma = vec![1.0; lf];
        for i in 0..lf {
            let col: Vec<f64> = rows.iter().map(|r| Self::compress(compression, half, i, r[i])).collect();
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            mu[i] = mean;
            sigma[i] = match sigma_mode {
                SigmaMode::Exact if std > 0.0 => std,
                SigmaMode::Exact => 1.0,
                SigmaMode::PowerOfTwo => 2f64.powi(nearest_pow2_exponent(std) as i32),
            };
        }
        Ok(OracleScaler { mu, sigma, compression })
    }

    /// Real-valued sparse scaling: `(f - mu) / sigma` where `f > 0`, else 0.
    pub fn apply(&self, features: &[f64]) -> Vec<f64> {
        let half = features.len() / 2;
        features
            .iter()
            .enumerate()
            .map(|(i, &raw)| {
                if raw > 0.0 {
                    (Self::compress(self.compression, half, i, raw) - self.mu[i]) / self.sigma[i]
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Which float reference to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// Same compression shifts and power-of-two spreads as the deployed
    /// model, evaluated in real arithmetic. Differences from the integer path
    /// are integerization effects only.
    Mirror,
    /// True square root and true standard deviation.
    Exact,
}

/// The complete float reference pipeline.
#[derive(Debug, Clone)]
pub struct FloatPipeline {
    pub config: ModelConfig,
    pub input_scale: f64,
    pub bank: KernelBank,
    pub scaler: OracleScaler,
    pub clf: FloatClassifier,
}

impl FloatPipeline {
    fn fit_scaler(engine: &Engine, train: &[Vec<f64>], mode: OracleMode) -> Result<(OracleScaler, Vec<Vec<f64>>)> {
        let config = &engine.model.config;
        let rows: Vec<Vec<f64>> = train
            .par_iter()
            .map(|raw| {
                let q = engine.quantize(raw)?;
                Ok(oracle_transform(&q, engine.bank(), config)?.features)
            })
            .collect::<Result<_>>()?;
        let (compression, sigma_mode) = match mode {
            OracleMode::Mirror => (
                Compression::Shift {
                    count_shift: config.count_shift,
                    soft_shift: config.soft_shift,
                },
                SigmaMode::PowerOfTwo,
            ),
            OracleMode::Exact => (Compression::Sqrt, SigmaMode::Exact),
        };
        let scaler = OracleScaler::fit(&rows, compression, sigma_mode)?;
        let scaled = rows.iter().map(|r| scaler.apply(r)).collect();
        Ok((scaler, scaled))
    }

    /// Fits the reference scaler on `train` with the model's frozen input
    /// quantization and kernels, and pairs it with a given classifier.
    pub fn with_classifier(engine: &Engine, clf: FloatClassifier, train: &[Vec<f64>], mode: OracleMode) -> Result<Self> {
        let (scaler, _) = Self::fit_scaler(engine, train, mode)?;
        Ok(FloatPipeline {
            config: engine.model.config.clone(),
            input_scale: engine.model.input_scale,
            bank: engine.bank().clone(),
            scaler,
            clf,
        })
    }

    /// Fits the reference scaler and trains a float classifier on the
    /// reference features with the same recipe as the integer model.
    pub fn train(
        engine: &Engine,
        train: &[Vec<f64>],
        labels: &[usize],
        mode: OracleMode,
        recipe: &TrainRecipe,
    ) -> Result<Self> {
        let (scaler, scaled) = Self::fit_scaler(engine, train, mode)?;
        let clf = classifier::train(&scaled, labels, engine.model.config.num_classes, recipe)?;
        Ok(FloatPipeline {
            config: engine.model.config.clone(),
            input_scale: engine.model.input_scale,
            bank: engine.bank().clone(),
            scaler,
            clf,
        })
    }

    pub fn evaluate_quantized(&self, series: &QuantizedSeries) -> Result<OracleOutput> {
        let t = oracle_transform(series, &self.bank, &self.config)?;
        let scaled = self.scaler.apply(&t.features);
        let logits = self.clf.logits(&scaled);
        Ok(OracleOutput {
            conv: t.conv,
            features_float: t.features,
            scaled,
            logits,
        })
    }

    pub fn predict(&self, engine: &Engine, raw: &[f64]) -> Result<usize> {
        let out = self.evaluate_quantized(&engine.quantize(raw)?)?;
        Ok(argmax_f64(&out.logits))
    }
}

/// Integer path against the float reference on a labeled set.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegerizationReport {
    pub samples: usize,
    pub int_accuracy: f64,
    pub float_accuracy: f64,
    /// Fraction of samples on which both paths predict the same class.
    pub agreement: f64,
    /// Largest `|integer scaled feature - float scaled feature|` in real units.
    pub max_feature_divergence: f64,
    pub mean_feature_divergence: f64,
}

pub fn integerization_report(
    series: &[Vec<f64>],
    labels: &[usize],
    engine: &Engine,
    reference: &FloatPipeline,
) -> Result<IntegerizationReport> {
    if series.len() != labels.len() {
        return Err(Error::Shape("series and labels differ in length".into()));
    }
    let unit = 2f64.powi(engine.model.config.scaled_frac_bits as i32);
    let per_sample: Vec<(usize, usize, f64, f64)> = series
        .par_iter()
        .map(|raw| {
            let q = engine.quantize(raw)?;
            let int_scaled = engine.scale_quantized(&q)?;
            let int_pred = engine.model.clf.predict(&int_scaled)?;
            let out = reference.evaluate_quantized(&q)?;
            let float_pred = argmax_f64(&out.logits);
            let mut max_d = 0.0f64;
            let mut sum_d = 0.0;
            for (&a, &b) in int_scaled.iter().zip(&out.scaled) {
                let d = (a as f64 / unit - b).abs();
                max_d = max_d.max(d);
                sum_d += d;
            }
            Ok((int_pred, float_pred, max_d, sum_d / int_scaled.len().max(1) as f64))
        })
        .collect::<Result<_>>()?;
    let n = per_sample.len().max(1) as f64;
    let int_ok = per_sample.iter().zip(labels).filter(|(p, &l)| p.0 == l).count();
    let float_ok = per_sample.iter().zip(labels).filter(|(p, &l)| p.1 == l).count();
    let agree = per_sample.iter().filter(|p| p.0 == p.1).count();
    Ok(IntegerizationReport {
        samples: per_sample.len(),
        int_accuracy: int_ok as f64 / n,
        float_accuracy: float_ok as f64 / n,
        agreement: agree as f64 / n,
        max_feature_divergence: per_sample.iter().fold(0.0, |m, p| m.max(p.2)),
        mean_feature_divergence: per_sample.iter().map(|p| p.3).sum::<f64>() / n,
    })
}

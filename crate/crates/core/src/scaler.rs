//! Sparse scaling with shifts only: ReLU-gated mean removal and division by
//! the power of two nearest to each feature's standard deviation.

use crate::config::ModelConfig;
use crate::error::{Error, Result};

pub const SIGMA_SHIFT_MIN: i8 = -8;
pub const SIGMA_SHIFT_MAX: i8 = 15;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalerParams {
    /// Rounded per-feature mean of the compressed features.
    pub mu: Vec<i16>,
    /// Exponent `e` with `2^e` nearest to the feature's standard deviation.
    pub sigma_shift: Vec<i8>,
    /// Right shift applied to hard counts before anything else.
    pub count_shift: u32,
    /// Right shift applied to soft sums before anything else.
    pub soft_shift: u32,
    pub frac_bits: u32,
    pub clamp_bits: u32,
}

impl ScalerParams {
    /// Rebuilds params from stored statistics and the shifts held in `config`.
    pub fn from_parts(config: &ModelConfig, mu: Vec<i16>, sigma_shift: Vec<i8>) -> Result<Self> {
        let lf = config.feature_len();
        if mu.len() != lf || sigma_shift.len() != lf {
            return Err(Error::Shape(format!(
                "scaler has {}/{} entries, config needs {lf}",
                mu.len(),
                sigma_shift.len()
            )));
        }
        if let Some(&e) = sigma_shift
            .iter()
            .find(|&&e| !(SIGMA_SHIFT_MIN..=SIGMA_SHIFT_MAX).contains(&e))
        {
            return Err(Error::Format(format!("sigma shift {e} out of range")));
        }
        Ok(ScalerParams {
            mu,
            sigma_shift,
            count_shift: config.count_shift,
            soft_shift: config.soft_shift,
            frac_bits: config.scaled_frac_bits,
            clamp_bits: config.feature_clamp_bits,
        })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    #[inline]
    fn compress(&self, i: usize, v: i16) -> i16 {
        if i < self.mu.len() / 2 {
            v >> self.count_shift
        } else {
            v >> self.soft_shift
        }
    }

    /// Largest positive value the scaler emits; the negative bound is one more.
    pub fn clamp_max(&self) -> i32 {
        (1i32 << (self.clamp_bits - 1)) - 1
    }
}

/// Exponent of the power of two nearest to `sigma` in linear distance,
/// ties toward the larger exponent, clamped to the int8 storage range.
/// Zero (or non-finite) spread maps to 0.
pub fn nearest_pow2_exponent(sigma: f64) -> i8 {
    if !(sigma.is_finite() && sigma > 0.0) {
        return 0;
    }
    let e = sigma.log2().floor() as i32;
    let lo = 2f64.powi(e);
    let hi = 2f64.powi(e + 1);
    let e = if hi - sigma <= sigma - lo { e + 1 } else { e };
    e.clamp(SIGMA_SHIFT_MIN as i32, SIGMA_SHIFT_MAX as i32) as i8
}

/// Fits per-feature statistics on a training feature matrix
/// (rows of length `L_F`: hard block then soft block).
pub fn fit(features: &[Vec<i16>], config: &ModelConfig) -> Result<ScalerParams> {
    let lf = config.feature_len();
    if features.len() < 2 {
        return Err(Error::Input(format!(
            "scaler needs at least 2 training rows, got {}",
            features.len()
        )));
    }
    if let Some(row) = features.iter().find(|r| r.len() != lf) {
        return Err(Error::Shape(format!("feature row has {} entries, expected {lf}", row.len())));
    }
    let mut params = ScalerParams::from_parts(config, vec![0; lf], vec![0; lf])?;
    let n = features.len() as f64;
    for i in 0..lf {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for row in features {
            let v = params.compress(i, row[i]) as f64;
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0);
        params.mu[i] = mean.round() as i16;
        params.sigma_shift[i] = nearest_pow2_exponent(var.sqrt());
    }
    Ok(params)
}

/// Shift-only scaling of one feature vector (flat, length `L_F`).
///
/// `out = clamp(((f - mu) << frac) >> sigma_shift)` where the accumulated
/// feature is positive, 0 elsewhere; `f` is the feature after its
/// compression shift. Right shifts floor toward −∞.
pub fn apply(flat: &[i16], params: &ScalerParams) -> Vec<i16> {
    debug_assert_eq!(flat.len(), params.len());
    let hi = params.clamp_max() as i64;
    let lo = -hi - 1;
    flat.iter()
        .enumerate()
        .map(|(i, &raw)| {
            if raw <= 0 {
                return 0;
            }
            let f = params.compress(i, raw);
            let centered = f as i64 - params.mu[i] as i64;
            let net = params.frac_bits as i32 - params.sigma_shift[i] as i32;
            let v = if net >= 0 {
                centered << net
            } else {
                centered >> -net
            };
            v.clamp(lo, hi) as i16
        })
        .collect()
}

//! Input quantization and the differenced/dilated projections of a window.

use std::sync::Arc;

use crate::config::ModelConfig;
use crate::error::{Error, Result};

/// A window of fixed-point samples with `frac_bits` of full-scale resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedSeries {
    pub samples: Vec<i16>,
    pub frac_bits: u32,
}

impl QuantizedSeries {
    pub fn new(samples: Vec<i16>, frac_bits: u32) -> Self {
        QuantizedSeries { samples, frac_bits }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Maps `raw` onto `±(2^frac_bits - 1)` using a full-scale value taken from
/// the training set. Samples beyond full scale saturate so the integer
/// budgets checked by config validation keep holding on unseen data.
pub fn quantize_input(raw: &[f64], scale: f64, frac_bits: u32) -> Result<QuantizedSeries> {
    if let Some(pos) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite sample at index {pos}")));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Input(format!("input scale must be positive, got {scale}")));
    }
    let full = ((1i64 << frac_bits.min(15)) - 1).min(i16::MAX as i64);
    let gain = full as f64 / scale;
    let samples = raw
        .iter()
        .map(|&v| {
            let q = (v * gain).round() as i64;
            q.clamp(-full, full) as i16
        })
        .collect();
    Ok(QuantizedSeries { samples, frac_bits })
}

/// Full-scale value for [`quantize_input`]: the largest magnitude in the
/// training windows, or 1 when they are all zero.
pub fn input_scale<'a>(series: impl IntoIterator<Item = &'a [f64]>) -> f64 {
    let max = series
        .into_iter()
        .flat_map(|s| s.iter())
        .filter(|v| v.is_finite())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if max > 0.0 {
        max
    } else {
        1.0
    }
}

/// Per-window z-normalization; a constant window becomes all zeros.
pub fn znormalize(raw: &[f64]) -> Vec<f64> {
    let n = raw.len() as f64;
    if raw.is_empty() {
        return Vec::new();
    }
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 1e-8 {
        raw.iter().map(|v| (v - mean) / std).collect()
    } else {
        vec![0.0; raw.len()]
    }
}

/// First difference, `out[i] = in[i + 1] - in[i]`.
pub fn difference(series: &QuantizedSeries) -> Result<QuantizedSeries> {
    if series.len() < 2 {
        return Err(Error::Input(format!(
            "differencing needs at least 2 samples, got {}",
            series.len()
        )));
    }
    let samples = series
        .samples
        .windows(2)
        .map(|w| {
            let d = w[1] as i32 - w[0] as i32;
            i16::try_from(d).expect("difference exceeds int16; input not within frac_bits range")
        })
        .collect();
    Ok(QuantizedSeries {
        samples,
        frac_bits: series.frac_bits,
    })
}

/// One (differencing order, dilation) projection of the input window.
#[derive(Debug, Clone)]
pub struct ProjectionView {
    pub series: Arc<QuantizedSeries>,
    pub dilation: usize,
    pub diff_order: usize,
    /// Number of output positions under the configured padding.
    pub timesteps: usize,
}

/// Builds the `n_diff * n_dil` views, differencing-major.
pub fn make_views(series: &QuantizedSeries, config: &ModelConfig) -> Result<Vec<ProjectionView>> {
    if series.len() != config.input_len {
        return Err(Error::Shape(format!(
            "series has {} samples, model expects {}",
            series.len(),
            config.input_len
        )));
    }
    let base = Arc::new(series.clone());
    let mut orders = vec![base];
    if config.n_diff > 1 {
        orders.push(Arc::new(difference(series)?));
    }
    let dilations = config.dilation_schedule();
    let mut views = Vec::with_capacity(config.num_views());
    for (order, s) in orders.into_iter().enumerate() {
        for &d in &dilations {
            views.push(ProjectionView {
                series: Arc::clone(&s),
                dilation: d,
                diff_order: order,
                timesteps: config.timesteps(order, d),
            });
        }
    }
    Ok(views)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Padding;
    use proptest::prelude::*;

    fn qs(v: &[i16]) -> QuantizedSeries {
        QuantizedSeries::new(v.to_vec(), 8)
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_input(&[0.0, 0.0, 0.0], 3.0, 8).unwrap().samples, vec![0, 0, 0]);
        assert_eq!(quantize_input(&[2.5], 2.5, 8).unwrap().samples, vec![255]);
        // round(0.5 * 255) = round(127.5) = 128
        assert_eq!(
            quantize_input(&[1.25, -1.25], 2.5, 8).unwrap().samples,
            vec![128, -128]
        );
    }

    #[test]
    fn quantize_saturates_beyond_training_scale() {
        let q = quantize_input(&[10.0, -10.0], 1.0, 8).unwrap();
        assert_eq!(q.samples, vec![255, -255]);
    }

    #[test]
    fn quantize_rejects_non_finite() {
        assert!(quantize_input(&[0.0, f64::NAN], 1.0, 8).is_err());
        assert!(quantize_input(&[f64::INFINITY], 1.0, 8).is_err());
        assert!(quantize_input(&[1.0], 0.0, 8).is_err());
    }

    #[test]
    fn input_scale_of_zero_data_is_one() {
        let a = [0.0, 0.0];
        assert_eq!(input_scale([&a[..]]), 1.0);
        let b = [0.5, -3.0];
        assert_eq!(input_scale([&a[..], &b[..]]), 3.0);
    }

    #[test]
    fn difference_examples() {
        assert_eq!(difference(&qs(&[5, 5, 5, 5])).unwrap().samples, vec![0, 0, 0]);
        assert_eq!(difference(&qs(&[0, 1, 3, 6])).unwrap().samples, vec![1, 2, 3]);
        assert!(difference(&qs(&[1])).is_err());
        assert!(difference(&qs(&[])).is_err());
    }

    #[test]
    fn znormalize_constant_is_zero() {
        assert_eq!(znormalize(&[3.0, 3.0, 3.0]), vec![0.0; 3]);
        let z = znormalize(&[1.0, 2.0, 3.0]);
        let mean: f64 = z.iter().sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn views_count_and_order() {
        let mut c = ModelConfig::new(140, 5);
        let s = qs(&vec![1; 140]);

        let v = make_views(&s, &c).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.iter().all(|v| v.diff_order == 0));
        assert_eq!(v.iter().map(|v| v.dilation).collect::<Vec<_>>(), vec![1, 2, 4]);

        c.n_dil = 5;
        c.n_diff = 2;
        let v = make_views(&s, &c).unwrap();
        assert_eq!(v.len(), 10);
        assert_eq!(
            v.iter().map(|v| (v.diff_order, v.dilation)).collect::<Vec<_>>(),
            c.views()
        );
        assert_eq!(v[5].series.len(), 139);
        assert_eq!(v[5].timesteps, 139 - 8);

        c.n_dil = 1;
        c.n_diff = 1;
        let v = make_views(&s, &c).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(*v[0].series, s);
        assert_eq!(v[0].timesteps, 132);
    }

    #[test]
    fn same_zero_padding_keeps_every_position() {
        let mut c = ModelConfig::new(140, 5);
        c.padding = Padding::SameZero;
        c.n_diff = 2;
        let v = make_views(&qs(&vec![0; 140]), &c).unwrap();
        assert_eq!(v[0].timesteps, 140);
        assert_eq!(v[3].timesteps, 139);
    }

    #[test]
    fn views_reject_wrong_length() {
        let c = ModelConfig::new(140, 5);
        assert!(make_views(&qs(&[0; 10]), &c).is_err());
    }

    proptest! {
        #[test]
        fn difference_is_offset_invariant(
            xs in prop::collection::vec(-200i16..200, 2..64),
            offset in -50i16..50,
        ) {
            let shifted: Vec<i16> = xs.iter().map(|v| v + offset).collect();
            prop_assert_eq!(
                difference(&qs(&xs)).unwrap(),
                difference(&qs(&shifted)).unwrap()
            );
        }

        #[test]
        fn quantized_difference_is_offset_invariant_for_exact_offsets(
            xs in prop::collection::vec(-100i32..100, 2..32),
            k in -20i32..20,
        ) {
            // offsets that are whole quantization steps survive exactly
            let scale = 255.0;
            let raw: Vec<f64> = xs.iter().map(|&v| v as f64).collect();
            let moved: Vec<f64> = xs.iter().map(|&v| (v + k) as f64).collect();
            let a = difference(&quantize_input(&raw, scale, 8).unwrap()).unwrap();
            let b = difference(&quantize_input(&moved, scale, 8).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

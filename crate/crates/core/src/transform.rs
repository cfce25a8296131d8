//! Binary random-kernel convolution folded straight into a per-kernel histogram.
//!
//! Responses are produced one timestep at a time and reduced to a winner per
//! group immediately, so no convolution output is ever stored. Each
//! `(view, group)` pair owns a disjoint `K`-wide slice of the feature vector,
//! which is what makes [`transform_par`] safe.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{CountingMode, ModelConfig, Padding};
use crate::error::{Error, Result};
use crate::projection::{make_views, ProjectionView, QuantizedSeries};

/// `{-1, +1}` weights laid out as `[view][group][kernel][tap]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelBank {
    weights: Vec<i8>,
    views: usize,
    groups: usize,
    kernels: usize,
    kernel_len: usize,
    pub seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the independent stream for one `(view, group)` pair.
pub fn stream_seed(root: u64, view: usize, group: usize) -> u64 {
    let index = ((view as u64) << 32) | group as u64;
    splitmix64(root ^ splitmix64(index))
}

impl KernelBank {
    /// Draws i.i.d. uniform `{-1, +1}` taps from per-pair seeded streams.
    pub fn sample(config: &ModelConfig) -> Self {
        let (views, groups, kernels, w) = (
            config.num_views(),
            config.groups,
            config.kernels_per_group,
            config.kernel_len,
        );
        let mut weights = Vec::with_capacity(views * groups * kernels * w);
        for v in 0..views {
            for g in 0..groups {
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, v, g));
                weights.extend((0..kernels * w).map(|_| if rng.gen::<bool>() { 1i8 } else { -1 }));
            }
        }
        KernelBank {
            weights,
            views,
            groups,
            kernels,
            kernel_len: w,
            seed: config.seed,
        }
    }

    /// Wraps explicit weights; every entry must be `±1`.
    pub fn from_weights(config: &ModelConfig, weights: Vec<i8>) -> Result<Self> {
        let expected =
            config.num_views() * config.groups * config.kernels_per_group * config.kernel_len;
        if weights.len() != expected {
            return Err(Error::Shape(format!(
                "kernel bank has {} weights, config needs {expected}",
                weights.len()
            )));
        }
        if let Some(pos) = weights.iter().position(|&w| w != 1 && w != -1) {
            return Err(Error::Input(format!("kernel weight {pos} is not ±1")));
        }
        Ok(KernelBank {
            weights,
            views: config.num_views(),
            groups: config.groups,
            kernels: config.kernels_per_group,
            kernel_len: config.kernel_len,
            seed: config.seed,
        })
    }

    pub fn weights(&self) -> &[i8] {
        &self.weights
    }

    pub fn kernel(&self, view: usize, group: usize, k: usize) -> &[i8] {
        let start = ((view * self.groups + group) * self.kernels + k) * self.kernel_len;
        &self.weights[start..start + self.kernel_len]
    }

    /// The `K` kernels of one group, contiguous.
    pub fn group(&self, view: usize, group: usize) -> &[i8] {
        let width = self.kernels * self.kernel_len;
        let start = (view * self.groups + group) * width;
        &self.weights[start..start + width]
    }

    pub fn matches(&self, config: &ModelConfig) -> bool {
        self.views == config.num_views()
            && self.groups == config.groups
            && self.kernels == config.kernels_per_group
            && self.kernel_len == config.kernel_len
    }
}

pub fn sample_kernels(config: &ModelConfig) -> KernelBank {
    KernelBank::sample(config)
}

/// Hard counts and soft sums, each indexed by `(diff, dil, group, kernel)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    pub hard: Vec<i16>,
    pub soft: Vec<i16>,
}

impl FeatureVector {
    pub fn zeros(counts_len: usize) -> Self {
        FeatureVector {
            hard: vec![0; counts_len],
            soft: vec![0; counts_len],
        }
    }

    /// Hard block followed by soft block, length `L_F`.
    pub fn to_flat(&self) -> Vec<i16> {
        let mut out = Vec::with_capacity(self.hard.len() * 2);
        out.extend_from_slice(&self.hard);
        out.extend_from_slice(&self.soft);
        out
    }

    pub fn from_flat(flat: &[i16]) -> Self {
        let (hard, soft) = flat.split_at(flat.len() / 2);
        FeatureVector {
            hard: hard.to_vec(),
            soft: soft.to_vec(),
        }
    }
}

/// Whether group `g` counts its minimum-response kernel.
pub fn is_min_group(config: &ModelConfig, group: usize) -> bool {
    config.counting_mode == CountingMode::MaxAndMinSplit && group % 2 == 1
}

fn check_index(view: &ProjectionView, i: usize) -> Result<()> {
    if i >= view.timesteps {
        return Err(Error::Input(format!(
            "timestep {i} outside view with {} positions",
            view.timesteps
        )));
    }
    Ok(())
}

/// Response of one kernel at output position `i`, exact in int32.
pub fn conv_at(view: &ProjectionView, kernel: &[i8], i: usize, padding: Padding) -> Result<i32> {
    check_index(view, i)?;
    Ok(match padding {
        Padding::Valid => dot_valid(&view.series.samples, kernel, view.dilation, i),
        Padding::SameZero => dot_same(&view.series.samples, kernel, view.dilation, i),
    })
}

#[inline]
fn dot_valid(x: &[i16], kernel: &[i8], d: usize, i: usize) -> i32 {
    let mut acc = 0i32;
    for (j, &w) in kernel.iter().enumerate() {
        let v = x[i + j * d] as i32;
        if w > 0 {
            acc += v;
        } else {
            acc -= v;
        }
    }
    acc
}

#[inline]
fn dot_same(x: &[i16], kernel: &[i8], d: usize, i: usize) -> i32 {
    let pad = (kernel.len() - 1) * d / 2;
    let mut acc = 0i32;
    for (j, &w) in kernel.iter().enumerate() {
        let pos = i + j * d;
        if pos < pad || pos - pad >= x.len() {
            continue;
        }
        let v = x[pos - pad] as i32;
        if w > 0 {
            acc += v;
        } else {
            acc -= v;
        }
    }
    acc
}

#[inline]
fn add_i16(acc: &mut i16, delta: i32) -> bool {
    let v = *acc as i32 + delta;
    match i16::try_from(v) {
        Ok(v) => {
            *acc = v;
            false
        }
        Err(_) => {
            *acc = if v > 0 { i16::MAX } else { i16::MIN };
            true
        }
    }
}

/// Index of the winning kernel; lowest index wins ties.
#[inline]
fn select(responses: &[i32], take_min: bool) -> usize {
    let mut best = 0;
    for (k, &r) in responses.iter().enumerate().skip(1) {
        let better = if take_min {
            r < responses[best]
        } else {
            r > responses[best]
        };
        if better {
            best = k;
        }
    }
    best
}

/// Accumulates one `(view, group)` pair into its `K`-wide slices. Returns
/// true if any accumulator saturated.
fn count_pair(
    view: &ProjectionView,
    kernels: &[i8],
    config: &ModelConfig,
    take_min: bool,
    responses: &mut [i32],
    hard: &mut [i16],
    soft: &mut [i16],
) -> bool {
    let w = config.kernel_len;
    let shift = config.conv_preshift;
    let x = &view.series.samples;
    let mut saturated = false;
    for i in 0..view.timesteps {
        for (k, r) in responses.iter_mut().enumerate() {
            let kernel = &kernels[k * w..(k + 1) * w];
            let y = match config.padding {
                Padding::Valid => dot_valid(x, kernel, view.dilation, i),
                Padding::SameZero => dot_same(x, kernel, view.dilation, i),
            };
            *r = y >> shift;
        }
        let k = select(responses, take_min);
        saturated |= add_i16(&mut hard[k], 1);
        let r = responses[k];
        saturated |= add_i16(&mut soft[k], if take_min { -r } else { r });
    }
    saturated
}

fn check_bank(bank: &KernelBank, config: &ModelConfig) -> Result<()> {
    if !bank.matches(config) {
        return Err(Error::Shape("kernel bank does not match config".into()));
    }
    Ok(())
}

fn run(series: &QuantizedSeries, bank: &KernelBank, config: &ModelConfig) -> Result<(FeatureVector, bool)> {
    check_bank(bank, config)?;
    let views = make_views(series, config)?;
    let k = config.kernels_per_group;
    let mut fv = FeatureVector::zeros(config.counts_len());
    let mut responses = vec![0i32; k];
    let mut saturated = false;
    let pairs = fv.hard.chunks_mut(k).zip(fv.soft.chunks_mut(k)).enumerate();
    for (pair, (hard, soft)) in pairs {
        let (v, g) = (pair / config.groups, pair % config.groups);
        saturated |= count_pair(
            &views[v],
            bank.group(v, g),
            config,
            is_min_group(config, g),
            &mut responses,
            hard,
            soft,
        );
    }
    Ok((fv, saturated))
}

/// Streaming hard/soft counting over every view and group.
///
/// Overflow is impossible under a validated config; debug builds panic if an
/// accumulator saturates anyway.
pub fn transform(series: &QuantizedSeries, bank: &KernelBank, config: &ModelConfig) -> Result<FeatureVector> {
    let (fv, saturated) = run(series, bank, config)?;
    debug_assert!(!saturated, "int16 feature accumulator saturated; config budget violated");
    Ok(fv)
}

/// Like [`transform`] but reports saturation as an error in every build.
pub fn transform_checked(
    series: &QuantizedSeries,
    bank: &KernelBank,
    config: &ModelConfig,
) -> Result<FeatureVector> {
    let (fv, saturated) = run(series, bank, config)?;
    if saturated {
        return Err(Error::Input("int16 feature accumulator saturated".into()));
    }
    Ok(fv)
}

/// [`transform`] with `(view, group)` pairs spread over the rayon pool.
pub fn transform_par(series: &QuantizedSeries, bank: &KernelBank, config: &ModelConfig) -> Result<FeatureVector> {
    check_bank(bank, config)?;
    let views = make_views(series, config)?;
    let k = config.kernels_per_group;
    let mut fv = FeatureVector::zeros(config.counts_len());
    let saturated = fv
        .hard
        .par_chunks_mut(k)
        .zip(fv.soft.par_chunks_mut(k))
        .enumerate()
        .map(|(pair, (hard, soft))| {
            let (v, g) = (pair / config.groups, pair % config.groups);
            let mut responses = vec![0i32; k];
            count_pair(
                &views[v],
                bank.group(v, g),
                config,
                is_min_group(config, g),
                &mut responses,
                hard,
                soft,
            )
        })
        .reduce(|| false, |a, b| a | b);
    debug_assert!(!saturated, "int16 feature accumulator saturated; config budget violated");
    Ok(fv)
}

/// Transforms many windows in parallel, one window per task.
pub fn transform_batch(
    series: &[QuantizedSeries],
    bank: &KernelBank,
    config: &ModelConfig,
) -> Result<Vec<FeatureVector>> {
    series
        .par_iter()
        .map(|s| transform(s, bank, config))
        .collect()
}

/// Winning kernel per timestep for one `(view, group)`; diagnostic only.
pub fn winners(view: &ProjectionView, bank: &KernelBank, view_index: usize, group: usize, config: &ModelConfig) -> Vec<usize> {
    let w = config.kernel_len;
    let kernels = bank.group(view_index, group);
    let take_min = is_min_group(config, group);
    let mut responses = vec![0i32; config.kernels_per_group];
    (0..view.timesteps)
        .map(|i| {
            for (k, r) in responses.iter_mut().enumerate() {
                let kernel = &kernels[k * w..(k + 1) * w];
                let y = match config.padding {
                    Padding::Valid => dot_valid(&view.series.samples, kernel, view.dilation, i),
                    Padding::SameZero => dot_same(&view.series.samples, kernel, view.dilation, i),
                };
                *r = y >> config.conv_preshift;
            }
            select(&responses, take_min)
        })
        .collect()
}

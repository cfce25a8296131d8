//! Hyperparameters of the pipeline and the integer budgets derived from them.
//!
//! A [`ModelConfig`] that passes [`ModelConfig::validate`] guarantees that every
//! fixed-width accumulator downstream (int16 feature histograms, int32
//! convolution and classifier accumulators) stays in range for any input whose
//! samples respect the input quantization bound.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const I16_MAX: u64 = i16::MAX as u64;
pub const I32_MAX: u64 = i32::MAX as u64;

/// Highest input fraction width for which first differences still fit int16.
pub const MAX_INPUT_FRAC_BITS: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Padding {
    /// Only positions where the whole dilated kernel overlaps real samples.
    Valid,
    /// Centered zero padding; one output per input sample.
    SameZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CountingMode {
    /// Every group counts its argmax kernel.
    MaxOnly,
    /// Even groups count the argmax kernel, odd groups the argmin kernel.
    MaxAndMinSplit,
}

impl Padding {
    fn code(self) -> u64 {
        match self {
            Padding::Valid => 0,
            Padding::SameZero => 1,
        }
    }

    fn from_code(v: u64) -> Option<Self> {
        match v {
            0 => Some(Padding::Valid),
            1 => Some(Padding::SameZero),
            _ => None,
        }
    }
}

impl CountingMode {
    fn code(self) -> u64 {
        match self {
            CountingMode::MaxOnly => 0,
            CountingMode::MaxAndMinSplit => 1,
        }
    }

    fn from_code(v: u64) -> Option<Self> {
        match v {
            0 => Some(CountingMode::MaxOnly),
            1 => Some(CountingMode::MaxAndMinSplit),
            _ => None,
        }
    }
}

impl fmt::Display for Padding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Padding::Valid => "valid",
            Padding::SameZero => "same_zero",
        })
    }
}

impl fmt::Display for CountingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CountingMode::MaxOnly => "max_only",
            CountingMode::MaxAndMinSplit => "max_and_min_split",
        })
    }
}

impl FromStr for Padding {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "valid" | "0" => Ok(Padding::Valid),
            "same_zero" | "same-zero" | "same" | "1" => Ok(Padding::SameZero),
            other => Err(format!("unknown padding '{other}' (valid | same_zero)")),
        }
    }
}

impl FromStr for CountingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "max_only" | "max-only" | "0" => Ok(CountingMode::MaxOnly),
            "max_and_min_split" | "max-and-min-split" | "split" | "1" => {
                Ok(CountingMode::MaxAndMinSplit)
            }
            other => Err(format!(
                "unknown counting mode '{other}' (max_only | max_and_min_split)"
            )),
        }
    }
}

/// Every hyperparameter of the pipeline.
///
/// The struct is plain data; call [`ModelConfig::validate`] (or
/// [`ModelConfig::validated`]) before handing it to the transform.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    /// Samples per input window.
    pub input_len: usize,
    pub num_classes: usize,
    /// Number of dilation values, `d_j = 2^j`.
    pub n_dil: usize,
    /// Differencing orders: 1 = raw only, 2 = raw and first difference.
    pub n_diff: usize,
    /// Kernel groups per projection.
    pub groups: usize,
    pub kernels_per_group: usize,
    pub kernel_len: usize,
    /// Accumulations per kernel (hard count + soft sum).
    pub lambda_feats: usize,
    /// Input samples are quantized to `±(2^input_frac_bits - 1)`.
    pub input_frac_bits: u32,
    /// LSBs dropped from each convolution response before counting.
    pub conv_preshift: u32,
    pub seed: u64,
    pub padding: Padding,
    pub counting_mode: CountingMode,
    /// Arithmetic right shift applied to hard counts in place of a square root.
    pub count_shift: u32,
    /// Same for soft sums; 0 leaves them untouched.
    pub soft_shift: u32,
    /// Fractional bits kept by the scaler output.
    pub scaled_frac_bits: u32,
    /// Scaled features are clamped to this signed width before the classifier.
    pub feature_clamp_bits: u32,
    /// Per-series z-normalization before input quantization.
    pub znorm: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::e_config(140, 5)
    }
}

impl ModelConfig {
    /// Default configuration for a dataset shape, with the smallest pre-shift
    /// that satisfies the soft-count budget.
    pub fn new(input_len: usize, num_classes: usize) -> Self {
        let mut cfg = ModelConfig {
            input_len,
            num_classes,
            n_dil: 3,
            n_diff: 1,
            groups: 10,
            kernels_per_group: 8,
            kernel_len: 9,
            lambda_feats: 2,
            input_frac_bits: 8,
            conv_preshift: 0,
            seed: 0,
            padding: Padding::Valid,
            counting_mode: CountingMode::MaxAndMinSplit,
            count_shift: 1,
            soft_shift: 0,
            scaled_frac_bits: 4,
            feature_clamp_bits: 12,
            znorm: false,
        };
        cfg.auto_preshift();
        cfg
    }

    /// Efficient variant: 3 dilations, raw series only.
    pub fn e_config(input_len: usize, num_classes: usize) -> Self {
        ModelConfig::new(input_len, num_classes)
    }

    /// Accurate variant: 5 dilations, raw series and first difference.
    pub fn a_config(input_len: usize, num_classes: usize) -> Self {
        let mut cfg = ModelConfig::new(input_len, num_classes);
        cfg.n_dil = 5;
        cfg.n_diff = 2;
        cfg.auto_preshift();
        cfg
    }

    /// Resets `conv_preshift` to [`ModelConfig::min_conv_preshift`].
    pub fn auto_preshift(&mut self) -> &mut Self {
        self.conv_preshift = self.min_conv_preshift();
        self
    }

    /// Lowers `n_dil` until every dilated kernel fits the input and resets
    /// the pre-shift. Returns whether `n_dil` changed.
    pub fn clip_dilations(&mut self) -> bool {
        let before = self.n_dil;
        while self.n_dil > 1
            && self
                .validate()
                .violations
                .iter()
                .any(|v| matches!(v, Violation::KernelSpan { .. }))
        {
            self.n_dil -= 1;
        }
        self.auto_preshift();
        self.n_dil != before
    }

    pub fn feature_len(&self) -> usize {
        self.lambda_feats * self.groups * self.kernels_per_group * self.n_dil * self.n_diff
    }

    /// Features per accumulation kind (`feature_len / lambda_feats`).
    pub fn counts_len(&self) -> usize {
        self.groups * self.kernels_per_group * self.n_dil * self.n_diff
    }

    pub fn num_views(&self) -> usize {
        self.n_dil * self.n_diff
    }

    pub fn dilation_schedule(&self) -> Vec<usize> {
        (0..self.n_dil).map(|j| 1usize << j).collect()
    }

    pub fn max_dilation(&self) -> usize {
        1usize << self.n_dil.saturating_sub(1)
    }

    /// Receptive field minus one, `(W - 1) * d`.
    pub fn span(&self, dilation: usize) -> usize {
        self.kernel_len.saturating_sub(1) * dilation
    }

    pub fn series_len(&self, diff_order: usize) -> usize {
        self.input_len.saturating_sub(diff_order)
    }

    /// Output positions of one projection view.
    pub fn timesteps(&self, diff_order: usize, dilation: usize) -> usize {
        let len = self.series_len(diff_order);
        match self.padding {
            Padding::Valid => len.saturating_sub(self.span(dilation)),
            Padding::SameZero => len,
        }
    }

    /// `(diff_order, dilation)` per view, differencing-major.
    pub fn views(&self) -> Vec<(usize, usize)> {
        let dils = self.dilation_schedule();
        (0..self.n_diff)
            .flat_map(|o| dils.iter().map(move |&d| (o, d)))
            .collect()
    }

    pub fn total_timesteps(&self) -> usize {
        self.views().iter().map(|&(o, d)| self.timesteps(o, d)).sum()
    }

    /// Largest magnitude a sample of a view with this differencing order can take.
    pub fn sample_bound(&self, diff_order: usize) -> u64 {
        let a = (1u64 << self.input_frac_bits.min(62)) - 1;
        a << diff_order.min(1)
    }

    /// Worst-case `|y >> conv_preshift|` for one response of this view.
    pub fn shifted_response_bound(&self, diff_order: usize) -> u64 {
        let raw = self.kernel_len as u64 * self.sample_bound(diff_order);
        raw.div_ceil(1u64 << self.conv_preshift.min(63))
    }

    /// Worst-case magnitude of any soft accumulator under `shift`.
    fn soft_worst_case_with(&self, shift: u32) -> u64 {
        self.views()
            .iter()
            .map(|&(o, d)| {
                let raw = self.kernel_len as u64 * self.sample_bound(o);
                self.timesteps(o, d) as u64 * raw.div_ceil(1u64 << shift.min(63))
            })
            .max()
            .unwrap_or(0)
    }

    pub fn soft_worst_case(&self) -> u64 {
        self.soft_worst_case_with(self.conv_preshift)
    }

    /// Smallest pre-shift for which every soft accumulator fits int16.
    pub fn min_conv_preshift(&self) -> u32 {
        (0..32)
            .find(|&s| self.soft_worst_case_with(s) <= I16_MAX)
            .unwrap_or(32)
    }

    /// Largest magnitude a classifier input can take after the clamp.
    pub fn scaled_feature_bound(&self) -> u64 {
        1u64 << self.feature_clamp_bits.clamp(1, 16).saturating_sub(1)
    }

    /// Worst-case `|Σ w_q · f|` of the classifier, excluding the bias.
    pub fn classifier_mac_bound(&self) -> u64 {
        127 * self.scaled_feature_bound() * self.feature_len() as u64
    }

    /// Headroom left for `|bias_q|` in the int32 classifier accumulator.
    pub fn bias_bound(&self) -> u64 {
        I32_MAX.saturating_sub(self.classifier_mac_bound())
    }

    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        let positive = [
            ("input_len", self.input_len),
            ("num_classes", self.num_classes),
            ("n_dil", self.n_dil),
            ("groups", self.groups),
            ("kernels_per_group", self.kernels_per_group),
            ("kernel_len", self.kernel_len),
        ];
        for (name, value) in positive {
            if value == 0 {
                v.push(Violation::NotPositive(name));
            }
        }
        if !(1..=2).contains(&self.n_diff) {
            v.push(Violation::DiffOrders(self.n_diff));
        }
        if self.kernel_len.is_multiple_of(2) {
            v.push(Violation::EvenKernel(self.kernel_len));
        }
        if self.lambda_feats != 2 {
            v.push(Violation::Lambda(self.lambda_feats));
        }
        if self.input_frac_bits > MAX_INPUT_FRAC_BITS {
            v.push(Violation::InputFracBits(self.input_frac_bits));
        }
        if self.n_dil > 16 {
            v.push(Violation::TooManyDilations(self.n_dil));
        }
        if !(2..=16).contains(&self.feature_clamp_bits) {
            v.push(Violation::ClampBits(self.feature_clamp_bits));
        }
        if self.count_shift > 15 || self.soft_shift > 15 {
            v.push(Violation::CompressShift(self.count_shift.max(self.soft_shift)));
        }
        if self.scaled_frac_bits > 8 {
            v.push(Violation::ScaledFracBits(self.scaled_frac_bits));
        }
        if !v.is_empty() {
            // The remaining checks assume sane shapes.
            return ValidationReport { violations: v };
        }

        let d_max = self.max_dilation();
        for o in 0..self.n_diff {
            let len = self.series_len(o);
            if self.span(d_max) >= len {
                v.push(Violation::KernelSpan {
                    diff_order: o,
                    span: self.span(d_max),
                    series_len: len,
                });
                break;
            }
        }
        let max_t = self
            .views()
            .iter()
            .map(|&(o, d)| self.timesteps(o, d))
            .max()
            .unwrap_or(0);
        if max_t as u64 > I16_MAX {
            v.push(Violation::HardBudget(max_t));
        }
        let conv_bound = self.kernel_len as u64 * self.sample_bound(self.n_diff - 1);
        if conv_bound > I32_MAX {
            v.push(Violation::ConvBudget(conv_bound));
        }
        let soft = self.soft_worst_case();
        if soft > I16_MAX {
            v.push(Violation::SoftBudget {
                worst_case: soft,
                conv_preshift: self.conv_preshift,
                min_preshift: self.min_conv_preshift(),
            });
        }
        let mac = self.classifier_mac_bound();
        if mac > I32_MAX {
            v.push(Violation::ClassifierBudget(mac));
        }
        ValidationReport { violations: v }
    }

    /// Validates and returns `self`, or the report as an error.
    pub fn validated(self) -> Result<Self> {
        let report = self.validate();
        if report.is_ok() {
            Ok(self)
        } else {
            Err(Error::Validation(report))
        }
    }

    /// Flat `key = value` text, one key per line, in a fixed order.
    pub fn to_kv_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.entries() {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value.to_string());
            out.push('\n');
        }
        out
    }

    fn entries(&self) -> [(&'static str, u64); 18] {
        [
            ("input_len", self.input_len as u64),
            ("num_classes", self.num_classes as u64),
            ("n_dil", self.n_dil as u64),
            ("n_diff", self.n_diff as u64),
            ("groups", self.groups as u64),
            ("kernels_per_group", self.kernels_per_group as u64),
            ("kernel_len", self.kernel_len as u64),
            ("lambda_feats", self.lambda_feats as u64),
            ("input_frac_bits", self.input_frac_bits as u64),
            ("conv_preshift", self.conv_preshift as u64),
            ("seed", self.seed),
            ("padding", self.padding.code()),
            ("counting_mode", self.counting_mode.code()),
            ("count_shift", self.count_shift as u64),
            ("soft_shift", self.soft_shift as u64),
            ("scaled_frac_bits", self.scaled_frac_bits as u64),
            ("feature_clamp_bits", self.feature_clamp_bits as u64),
            ("znorm", self.znorm as u64),
        ]
    }

    /// Parses the `key = value` format. Keys missing from the text keep their
    /// defaults; unknown or repeated keys and non-integer values are errors.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = ModelConfig::default();
        let mut seen = BTreeSet::new();
        let mut preshift_given = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |msg: String| Error::ConfigParse { line: line_no, msg };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
            let key = key.trim();
            let value: u64 = value
                .trim()
                .parse()
                .map_err(|_| err(format!("value of '{key}' is not a non-negative integer")))?;
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key '{key}'")));
            }
            let as_usize = |v: u64| usize::try_from(v).map_err(|_| err(format!("'{key}' too large")));
            let as_u32 = |v: u64| u32::try_from(v).map_err(|_| err(format!("'{key}' too large")));
            match key {
                "input_len" => cfg.input_len = as_usize(value)?,
                "num_classes" => cfg.num_classes = as_usize(value)?,
                "n_dil" => cfg.n_dil = as_usize(value)?,
                "n_diff" => cfg.n_diff = as_usize(value)?,
                "groups" => cfg.groups = as_usize(value)?,
                "kernels_per_group" => cfg.kernels_per_group = as_usize(value)?,
                "kernel_len" => cfg.kernel_len = as_usize(value)?,
                "lambda_feats" => cfg.lambda_feats = as_usize(value)?,
                "input_frac_bits" => cfg.input_frac_bits = as_u32(value)?,
                "conv_preshift" => {
                    cfg.conv_preshift = as_u32(value)?;
                    preshift_given = true;
                }
                "seed" => cfg.seed = value,
                "padding" => {
                    cfg.padding = Padding::from_code(value)
                        .ok_or_else(|| err(format!("padding code {value} not in {{0, 1}}")))?
                }
                "counting_mode" => {
                    cfg.counting_mode = CountingMode::from_code(value)
                        .ok_or_else(|| err(format!("counting_mode code {value} not in {{0, 1}}")))?
                }
                "count_shift" => cfg.count_shift = as_u32(value)?,
                "soft_shift" => cfg.soft_shift = as_u32(value)?,
                "scaled_frac_bits" => cfg.scaled_frac_bits = as_u32(value)?,
                "feature_clamp_bits" => cfg.feature_clamp_bits = as_u32(value)?,
                "znorm" => match value {
                    0 => cfg.znorm = false,
                    1 => cfg.znorm = true,
                    _ => return Err(err(format!("znorm must be 0 or 1, got {value}"))),
                },
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
        if !preshift_given {
            cfg.auto_preshift();
        }
        Ok(cfg)
    }
}

/// Outcome of [`ModelConfig::validate`]; empty means the config is usable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NotPositive(&'static str),
    DiffOrders(usize),
    EvenKernel(usize),
    Lambda(usize),
    InputFracBits(u32),
    TooManyDilations(usize),
    ClampBits(u32),
    CompressShift(u32),
    ScaledFracBits(u32),
    KernelSpan {
        diff_order: usize,
        span: usize,
        series_len: usize,
    },
    HardBudget(usize),
    ConvBudget(u64),
    SoftBudget {
        worst_case: u64,
        conv_preshift: u32,
        min_preshift: u32,
    },
    ClassifierBudget(u64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotPositive(name) => write!(f, "{name} must be positive"),
            Violation::DiffOrders(n) => write!(f, "n_diff must be 1 or 2, got {n}"),
            Violation::EvenKernel(w) => write!(f, "kernel_len must be odd, got {w}"),
            Violation::Lambda(l) => write!(f, "lambda_feats must be 2, got {l}"),
            Violation::InputFracBits(q) => {
                write!(f, "input_frac_bits {q} exceeds {MAX_INPUT_FRAC_BITS}")
            }
            Violation::TooManyDilations(n) => write!(f, "n_dil {n} exceeds 16"),
            Violation::ClampBits(b) => write!(f, "feature_clamp_bits {b} not in [2, 16]"),
            Violation::CompressShift(s) => write!(f, "count/soft shift {s} exceeds 15"),
            Violation::ScaledFracBits(b) => write!(f, "scaled_frac_bits {b} exceeds 8"),
            Violation::KernelSpan {
                diff_order,
                span,
                series_len,
            } => write!(
                f,
                "kernel span exceeds input: (W-1)*d_max = {span} >= {series_len} samples \
                 (differencing order {diff_order})"
            ),
            Violation::HardBudget(t) => write!(f, "{t} timesteps overflow int16 hard counts"),
            Violation::ConvBudget(b) => write!(f, "convolution bound {b} overflows int32"),
            Violation::SoftBudget {
                worst_case,
                conv_preshift,
                min_preshift,
            } => write!(
                f,
                "int16 soft budget exceeded: worst case {worst_case} > 32767 with \
                 conv_preshift {conv_preshift} (needs >= {min_preshift})"
            ),
            Violation::ClassifierBudget(b) => {
                write!(f, "classifier accumulator bound {b} overflows int32")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(input_len: usize, n_dil: usize, n_diff: usize) -> ModelConfig {
        let mut c = ModelConfig::new(input_len, 5);
        c.n_dil = n_dil;
        c.n_diff = n_diff;
        c.auto_preshift();
        c
    }

    #[test]
    fn ecg_shaped_defaults_validate() {
        let c = cfg(140, 3, 1);
        assert_eq!(c.max_dilation(), 4);
        assert!(c.validate().is_ok(), "{}", c.validate());
    }

    #[test]
    fn kernel_span_exceeding_input_is_reported() {
        // (9-1)*2 = 16 >= 16 samples
        let c = cfg(16, 2, 1);
        let report = c.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::KernelSpan { .. })));
        assert!(report.to_string().contains("kernel span exceeds input"));
    }

    #[test]
    fn soft_budget_needs_preshift() {
        // 255 * 9 * 140 = 321300 > 32767; >> 5 gives 10040
        assert_eq!(255u64 * 9 * 140, 321_300);
        assert_eq!(321_300u64 >> 5, 10_040);

        let mut c = cfg(140, 1, 1);
        c.padding = Padding::SameZero;
        c.input_frac_bits = 8;
        c.conv_preshift = 0;
        let report = c.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::SoftBudget { .. })));
        c.conv_preshift = 5;
        assert!(c.validate().is_ok(), "{}", c.validate());
        // per-step ceil bound: 140 * ceil(2295 / 32)
        assert_eq!(c.soft_worst_case(), 140 * 72);
    }

    #[test]
    fn feature_len_examples() {
        let mut c = cfg(140, 3, 1);
        assert_eq!(c.feature_len(), 480);
        c.n_dil = 5;
        c.n_diff = 2;
        assert_eq!(c.feature_len(), 1600);
        c.groups = 1;
        c.kernels_per_group = 1;
        c.n_dil = 1;
        c.n_diff = 1;
        assert_eq!(c.feature_len(), 2);
    }

    #[test]
    fn feature_len_doubles_with_n_diff() {
        let a = cfg(140, 4, 1);
        let b = cfg(140, 4, 2);
        assert_eq!(b.feature_len(), 2 * a.feature_len());
    }

    #[test]
    fn dilation_schedules() {
        assert_eq!(cfg(140, 3, 1).dilation_schedule(), vec![1, 2, 4]);
        let c = cfg(140, 5, 1);
        assert_eq!(c.dilation_schedule(), vec![1, 2, 4, 8, 16]);
        assert!(c.span(16) < 140);
        assert_eq!(cfg(140, 1, 1).dilation_schedule(), vec![1]);
    }

    #[test]
    fn schedule_is_strictly_increasing_and_feasible() {
        for n_dil in 1..=5 {
            let c = cfg(140, n_dil, 2);
            let s = c.dilation_schedule();
            assert_eq!(s[0], 1);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert!(s.iter().all(|&d| c.span(d) < c.input_len));
            assert_eq!(s, c.dilation_schedule());
        }
    }

    #[test]
    fn auto_preshift_is_minimal() {
        for (n_dil, n_diff) in [(3, 1), (5, 2), (1, 1), (4, 2)] {
            let c = cfg(140, n_dil, n_diff);
            assert!(c.validate().is_ok());
            if c.conv_preshift > 0 {
                let mut lower = c.clone();
                lower.conv_preshift -= 1;
                assert!(!lower.validate().is_ok());
            }
        }
        assert_eq!(cfg(140, 3, 1).conv_preshift, 4);
        assert_eq!(cfg(140, 5, 2).conv_preshift, 5);
    }

    #[test]
    fn classifier_budget_fits_for_large_feature_vectors() {
        let c = cfg(140, 5, 2);
        assert_eq!(c.feature_len(), 1600);
        // 127 * 2048 * 1600
        assert_eq!(c.classifier_mac_bound(), 416_153_600);
        assert!(c.classifier_mac_bound() < I32_MAX);
        let mut wide = c.clone();
        wide.feature_clamp_bits = 16;
        assert!(wide
            .validate()
            .violations
            .iter()
            .any(|v| matches!(v, Violation::ClassifierBudget(_))));
    }

    #[test]
    fn shape_errors() {
        let mut c = cfg(140, 3, 1);
        c.kernel_len = 8;
        c.n_diff = 3;
        c.lambda_feats = 3;
        let r = c.validate();
        assert_eq!(r.violations.len(), 3);
    }

    #[test]
    fn kv_text_round_trip() {
        let mut c = cfg(96, 4, 2);
        c.seed = u64::MAX - 3;
        c.znorm = true;
        c.padding = Padding::SameZero;
        c.counting_mode = CountingMode::MaxOnly;
        let text = c.to_kv_text();
        assert_eq!(ModelConfig::from_kv_text(&text).unwrap(), c);
    }

    #[test]
    fn kv_text_rejects_unknown_and_non_integer() {
        let e = ModelConfig::from_kv_text("input_len = 10\nfoo = 1\n").unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 2, .. }), "{e}");
        assert!(ModelConfig::from_kv_text("seed = 1.5").is_err());
        assert!(ModelConfig::from_kv_text("seed = -1").is_err());
        assert!(ModelConfig::from_kv_text("seed 1").is_err());
        assert!(ModelConfig::from_kv_text("seed = 1\nseed = 2").is_err());
        assert!(ModelConfig::from_kv_text("padding = 7").is_err());
    }

    #[test]
    fn kv_text_recomputes_preshift_when_absent() {
        let c = ModelConfig::from_kv_text("n_dil = 5\nn_diff = 2\n").unwrap();
        assert_eq!(c.conv_preshift, c.min_conv_preshift());
        let c = ModelConfig::from_kv_text("conv_preshift = 9\n").unwrap();
        assert_eq!(c.conv_preshift, 9);
    }
}

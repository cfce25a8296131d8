//! Binary model bundle.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "NHYD" | u16 version | u32 n | config text (n bytes, key = value lines)
//! f64 input_scale | u64 bank_seed
//! i16 mu[L_F] | i8 sigma_shift[L_F]
//! f64 weight_scale | i8 weights_q[C * L_F] | i32 bias_q[C]
//! ```
//!
//! Kernel weights are not stored; they are regenerated from `bank_seed`.

use std::path::Path;

use super::QuantizedClassifier;
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::scaler::ScalerParams;

pub const MAGIC: [u8; 4] = *b"NHYD";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub config: ModelConfig,
    /// Full-scale value used to quantize inputs, frozen from the training set.
    pub input_scale: f64,
    pub bank_seed: u64,
    pub scaler: ScalerParams,
    pub clf: QuantizedClassifier,
}

impl QuantizedModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let text = self.config.to_kv_text();
        let lf = self.config.feature_len();
        let c = self.config.num_classes;
        let mut out = Vec::with_capacity(34 + text.len() + lf * 3 + c * lf + c * 4);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        out.extend_from_slice(&self.input_scale.to_le_bytes());
        out.extend_from_slice(&self.bank_seed.to_le_bytes());
        for m in &self.scaler.mu {
            out.extend_from_slice(&m.to_le_bytes());
        }
        out.extend(self.scaler.sigma_shift.iter().map(|&s| s as u8));
        out.extend_from_slice(&self.clf.weight_scale.to_le_bytes());
        out.extend(self.clf.weights_q.iter().map(|&w| w as u8));
        for b in &self.clf.bias_q {
            out.extend_from_slice(&b.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, not a model file".into()));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let n = u32::from_le_bytes(r.array()?) as usize;
        let text = std::str::from_utf8(r.take(n)?)
            .map_err(|_| Error::Format("config block is not UTF-8".into()))?;
        let config = ModelConfig::from_kv_text(text)?.validated()?;
        let input_scale = f64::from_le_bytes(r.array()?);
        if !(input_scale.is_finite() && input_scale > 0.0) {
            return Err(Error::Format(format!("invalid input scale {input_scale}")));
        }
        let bank_seed = u64::from_le_bytes(r.array()?);

        let lf = config.feature_len();
        let c = config.num_classes;
        let mu = r
            .take(lf * 2)?
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]))
            .collect();
        let sigma = r.take(lf)?.iter().map(|&b| b as i8).collect();
        let scaler = ScalerParams::from_parts(&config, mu, sigma)?;

        let weight_scale = f64::from_le_bytes(r.array()?);
        if !(weight_scale.is_finite() && weight_scale > 0.0) {
            return Err(Error::Format(format!("invalid weight scale {weight_scale}")));
        }
        let weights_q: Vec<i8> = r.take(c * lf)?.iter().map(|&b| b as i8).collect();
        if weights_q.contains(&i8::MIN) {
            return Err(Error::Format("weight -128 outside symmetric int8 range".into()));
        }
        let bias_q: Vec<i32> = r
            .take(c * 4)?
            .chunks_exact(4)
            .map(|b| i32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let bound = config.bias_bound();
        if bias_q.iter().any(|b| b.unsigned_abs() as u64 > bound) {
            return Err(Error::Format("bias exceeds accumulator headroom".into()));
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after model",
                bytes.len() - r.pos
            )));
        }
        Ok(QuantizedModel {
            config,
            input_scale,
            bank_seed,
            scaler,
            clf: QuantizedClassifier {
                num_classes: c,
                num_features: lf,
                weights_q,
                bias_q,
                weight_scale,
            },
        })
    }

    /// Encoded size of any model built with `config`.
    pub fn encoded_len(config: &ModelConfig) -> usize {
        let lf = config.feature_len();
        let c = config.num_classes;
        4 + 2 + 4 + config.to_kv_text().len() + 8 + 8 + lf * 3 + 8 + c * lf + c * 4
    }

    pub fn size_bytes(&self) -> usize {
        self.to_bytes().len()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        QuantizedModel::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }
}

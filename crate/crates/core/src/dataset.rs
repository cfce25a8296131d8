//! UCR archive TSV loading and the on-disk feature cache.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::ModelConfig;
use crate::error::{Error, Result};

/// One split: equal-length series with 0-based labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub series: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub train: Split,
    pub test: Split,
    pub n_classes: usize,
    pub series_len: usize,
    /// Original label value of each class index.
    pub label_values: Vec<f64>,
}

impl Dataset {
    /// SHA-256 over name, labels and sample bits of both splits.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.name.as_bytes());
        for split in [&self.train, &self.test] {
            h.update((split.len() as u64).to_le_bytes());
            for (s, &l) in split.series.iter().zip(&split.labels) {
                h.update((l as u64).to_le_bytes());
                for v in s {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of the canonical config text.
pub fn config_hash(config: &ModelConfig) -> String {
    hex(&Sha256::digest(config.to_kv_text().as_bytes()))
}

type RawRows = Vec<(f64, Vec<f64>)>;

fn parse_tsv(path: &Path) -> Result<RawRows> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, msg: String| Error::Dataset {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rows: RawRows = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split('\t').map(str::trim);
        let label_cell = cells.next().unwrap_or_default();
        let label: f64 = label_cell
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| err(line_no, format!("non-numeric label {label_cell:?}")))?;
        let values = cells
            .enumerate()
            .map(|(j, c)| {
                c.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(line_no, format!("non-numeric cell {c:?} in column {}", j + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(err(line_no, "row has a label but no samples".into()));
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(err(
                    line_no,
                    format!("ragged rows: {} samples, earlier rows have {w}", values.len()),
                ))
            }
            _ => {}
        }
        rows.push((label, values));
    }
    Ok(rows)
}

fn label_values(rows: &RawRows) -> Vec<f64> {
    let mut v: Vec<f64> = rows.iter().map(|r| r.0).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn remap(rows: RawRows, values: &[f64], path: &Path) -> Result<Split> {
    let mut split = Split::default();
    for (label, series) in rows {
        let idx = values
            .binary_search_by(|v| v.total_cmp(&label))
            .map_err(|_| Error::Dataset {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("label {label} does not occur in the training split"),
            })?;
        split.series.push(series);
        split.labels.push(idx);
    }
    Ok(split)
}

fn stem_name(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    stem.trim_end_matches("_TRAIN").trim_end_matches("_TEST").to_string()
}

/// Loads a single TSV file as the training split (the test split is empty).
/// Labels are remapped to `0..n` in ascending order of their original value.
pub fn load_ucr_tsv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let rows = parse_tsv(path)?;
    let values = label_values(&rows);
    let series_len = rows.first().map_or(0, |r| r.1.len());
    let train = remap(rows, &values, path)?;
    Ok(Dataset {
        name: stem_name(path),
        train,
        test: Split::default(),
        n_classes: values.len(),
        series_len,
        label_values: values,
    })
}

/// Loads `<dir>/<name>_TRAIN.tsv` and `<dir>/<name>_TEST.tsv`. `dir` may be
/// either the dataset folder itself or the archive root containing it.
pub fn load_ucr_dataset(dir: impl AsRef<Path>, name: &str) -> Result<Dataset> {
    let dir = dir.as_ref();
    let base = if dir.join(format!("{name}_TRAIN.tsv")).exists() {
        dir.to_path_buf()
    } else {
        dir.join(name)
    };
    let train_path = base.join(format!("{name}_TRAIN.tsv"));
    let test_path = base.join(format!("{name}_TEST.tsv"));
    let mut ds = load_ucr_tsv(&train_path)?;
    let test_rows = parse_tsv(&test_path)?;
    if let Some(r) = test_rows.iter().find(|r| r.1.len() != ds.series_len) {
        return Err(Error::Dataset {
            path: test_path,
            line: 0,
            msg: format!("ragged rows: test series of length {}, train has {}", r.1.len(), ds.series_len),
        });
    }
    ds.test = remap(test_rows, &ds.label_values, &test_path)?;
    ds.name = name.to_string();
    Ok(ds)
}

/// Number of samples per class index in a split.
pub fn class_histogram(split: &Split, n_classes: usize) -> Vec<usize> {
    let mut h = vec![0; n_classes];
    for &l in &split.labels {
        if l < n_classes {
            h[l] += 1;
        }
    }
    h
}

/// Directory of cached unscaled feature matrices.
///
/// File layout: `u32 n | u32 L_F | i16 data[n * L_F]`, little-endian.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    pub dir: PathBuf,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FeatureCache { dir: dir.into() }
    }

    pub fn path_for(&self, dataset_hash: &str, config: &ModelConfig, split: &str) -> PathBuf {
        let key = format!(
            "{}-{}-{}-{split}",
            &dataset_hash[..dataset_hash.len().min(16)],
            &config_hash(config)[..16],
            config.seed
        );
        self.dir.join(format!("{key}.feat"))
    }

    /// Returns `None` when the entry is absent or unreadable.
    pub fn load(&self, path: &Path, feature_len: usize) -> Option<Vec<Vec<i16>>> {
        let bytes = fs::read(path).ok()?;
        decode_features(&bytes, feature_len).ok()
    }

    pub fn store(&self, path: &Path, rows: &[Vec<i16>]) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, encode_features(rows)).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

pub fn encode_features(rows: &[Vec<i16>]) -> Vec<u8> {
    let lf = rows.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(8 + rows.len() * lf * 2);
    out.extend_from_slice(&(rows.len() as u32).to_le_bytes());
    out.extend_from_slice(&(lf as u32).to_le_bytes());
    for v in rows.iter().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8], feature_len: usize) -> Result<Vec<Vec<i16>>> {
    if bytes.len() < 8 {
        return Err(Error::Format("feature cache header truncated".into()));
    }
    let n = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let lf = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if lf != feature_len {
        return Err(Error::Format(format!("cached rows have {lf} features, expected {feature_len}")));
    }
    let body = &bytes[8..];
    if body.len() != n * lf * 2 {
        return Err(Error::Format("feature cache size mismatch".into()));
    }
    let flat: Vec<i16> = body
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]))
        .collect();
    Ok(if lf == 0 {
        vec![Vec::new(); n]
    } else {
        flat.chunks(lf).map(<[i16]>::to_vec).collect()
    })
}

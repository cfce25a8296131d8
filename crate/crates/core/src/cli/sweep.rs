//! Multi-dataset best-of-N sweep with a resumable results table.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{run_seeds, Report, RunManifest, SweepArgs};
use crate::dataset::{self, hex};
use crate::error::{Error, Result};

const HEADER: &str = "dataset\tsetup\tn_train\tn_test\tlength\tclasses\tn_dil\tseeds\tbest\tmean\tstd";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub dataset: String,
    pub setup: String,
    pub n_train: usize,
    pub n_test: usize,
    pub length: usize,
    pub classes: usize,
    pub n_dil: usize,
    pub seeds: u64,
    pub best: f64,
    pub mean: f64,
    pub std: f64,
}

impl SweepRow {
    fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
            self.dataset,
            self.setup,
            self.n_train,
            self.n_test,
            self.length,
            self.classes,
            self.n_dil,
            self.seeds,
            self.best,
            self.mean,
            self.std
        )
    }

    fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 11 {
            return None;
        }
        Some(SweepRow {
            dataset: f[0].to_string(),
            setup: f[1].to_string(),
            n_train: f[2].parse().ok()?,
            n_test: f[3].parse().ok()?,
            length: f[4].parse().ok()?,
            classes: f[5].parse().ok()?,
            n_dil: f[6].parse().ok()?,
            seeds: f[7].parse().ok()?,
            best: f[8].parse().ok()?,
            mean: f[9].parse().ok()?,
            std: f[10].parse().ok()?,
        })
    }
}

/// Rows of an existing results table; a missing file is an empty table.
pub fn read_results(path: &Path) -> Result<Vec<SweepRow>> {
    match std::fs::read_to_string(path) {
        Ok(text) => Ok(text.lines().skip(1).filter_map(SweepRow::parse).collect()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(Error::io(path, e)),
    }
}

fn append_row(path: &Path, row: &SweepRow) -> Result<()> {
    use std::io::Write;
    let fresh = !path.exists();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut body = String::new();
    if fresh {
        body.push_str(HEADER);
        body.push('\n');
    }
    body.push_str(&row.to_line());
    body.push('\n');
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}

fn list_datasets(archive: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(archive).map_err(|e| Error::io(archive, e))? {
        let entry = entry.map_err(|e| Error::io(archive, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.path().join(format!("{name}_TRAIN.tsv")).exists() {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

pub fn cmd_ucr_sweep(args: &SweepArgs, argv: &[String]) -> Result<Report> {
    let names = if args.datasets.is_empty() {
        list_datasets(&args.archive)?
    } else {
        args.datasets.clone()
    };
    if names.is_empty() {
        return Err(Error::Input(format!("no datasets found under {}", args.archive.display())));
    }
    let setup = {
        let key = format!("{:?}|{:?}|{}", args.config, args.recipe, args.seeds);
        hex(&Sha256::digest(key.as_bytes()))[..12].to_string()
    };
    let mut done: Vec<SweepRow> = read_results(&args.results)?
        .into_iter()
        .filter(|r| r.setup == setup)
        .collect();
    let mut failures = Vec::new();
    let mut skipped = 0;
    for name in &names {
        if done.iter().any(|r| &r.dataset == name) {
            skipped += 1;
            continue;
        }
        let outcome = (|| -> Result<SweepRow> {
            let ds = dataset::load_ucr_dataset(&args.archive, name)?;
            let mut cfg_args = args.config.clone();
            cfg_args.clip_dilations = true;
            let template = cfg_args.build(ds.series_len, ds.n_classes)?;
            let summary = run_seeds(&ds, &template, &args.recipe, args.config.seed, args.seeds, None)?;
            let (mean, std) = summary.mean_std();
            let best = summary.best_run();
            Ok(SweepRow {
                dataset: name.clone(),
                setup: setup.clone(),
                n_train: ds.train.len(),
                n_test: ds.test.len(),
                length: ds.series_len,
                classes: ds.n_classes,
                n_dil: template.n_dil,
                seeds: args.seeds,
                best: best.test_accuracy.unwrap_or(best.fit.train_accuracy),
                mean,
                std,
            })
        })();
        match outcome {
            Ok(row) => {
                append_row(&args.results, &row)?;
                done.push(row);
            }
            Err(e) => failures.push((name.clone(), e.to_string())),
        }
    }
    let rows: Vec<&SweepRow> = names
        .iter()
        .filter_map(|n| done.iter().find(|r| &r.dataset == n))
        .collect();

    let mut text = String::new();
    let _ = writeln!(text, "{:<28} {:>6} {:>6} {:>6} {:>4} {:>9} {:>9} {:>8}", "dataset", "train", "test", "length", "dil", "best", "mean", "std");
    for r in &rows {
        let _ = writeln!(
            text,
            "{:<28} {:>6} {:>6} {:>6} {:>4} {:>9.4} {:>9.4} {:>8.4}",
            r.dataset, r.n_train, r.n_test, r.length, r.n_dil, r.best, r.mean, r.std
        );
    }
    let mean_best = if rows.is_empty() {
        0.0
    } else {
        rows.iter().map(|r| r.best).sum::<f64>() / rows.len() as f64
    };
    let _ = writeln!(text, "{:<28} {:>36.4}", "mean", mean_best);
    if skipped > 0 {
        let _ = writeln!(text, "{skipped} dataset(s) reused from {}", args.results.display());
    }
    for (name, err) in &failures {
        let _ = writeln!(text, "failed {name}: {err}");
    }

    let mut m = RunManifest::new("ucr-sweep", argv);
    m.seed = Some(args.config.seed);
    m.metric("setup", &setup)
        .metric("datasets", rows.len())
        .metric("failed", failures.len())
        .metric("mean_best_accuracy", format!("{mean_best:.6}"));
    for r in &rows {
        m.metric(&format!("best_{}", r.dataset), format!("{:.6}", r.best));
    }
    Ok(Report {
        text,
        manifest: m,
        manifest_path: args.manifest.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_round_trip() {
        let r = SweepRow {
            dataset: "X".into(),
            setup: "abc".into(),
            n_train: 1,
            n_test: 2,
            length: 3,
            classes: 2,
            n_dil: 1,
            seeds: 4,
            best: 0.5,
            mean: 0.25,
            std: 0.125,
        };
        assert_eq!(SweepRow::parse(&r.to_line()), Some(r));
        assert_eq!(SweepRow::parse("bad"), None);
    }
}

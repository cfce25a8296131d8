//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The ECG5000 criteria look for `ECG5000/ECG5000_{TRAIN,TEST}.tsv` under
//! `$NANOHYDRA_DATA` (or the bundled fixture directory).

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;

use nanohydra::classifier::{loss_and_grad, FloatClassifier, QuantizedClassifier, QuantizedModel, TrainRecipe};
use nanohydra::cli::{run_seeds, RecipeArgs};
use nanohydra::config::{CountingMode, ModelConfig, Padding};
use nanohydra::dataset::{load_ucr_dataset, Dataset};
use nanohydra::energy::{self, avg_power, energy_ratio, Battery, LifetimeReport};
use nanohydra::oracle::{integerization_report, oracle_transform, FloatPipeline, OracleMode};
use nanohydra::pipeline::{fit, Engine};
use nanohydra::projection::QuantizedSeries;
use nanohydra::transform::{transform, transform_checked, KernelBank};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ecg5000() -> Option<Dataset> {
    let mut roots: Vec<PathBuf> = Vec::new();
    if let Some(r) = std::env::var_os("NANOHYDRA_DATA") {
        roots.push(r.into());
    }
    roots.push(common::fixture_root());
    roots
        .iter()
        .find_map(|r| load_ucr_dataset(r, "ECG5000").ok())
}

fn no_recipe_overrides() -> RecipeArgs {
    RecipeArgs {
        epochs: None,
        batch_size: None,
        lr: None,
        momentum: None,
        weight_decay: None,
    }
}

/// Best-of-20 over seeds 0..20, trying both input normalizations.
fn best_of_20(ds: &Dataset, accurate: bool) -> Result<(f64, bool, QuantizedModel, FloatClassifier), String> {
    let mut best: Option<(f64, bool, QuantizedModel, FloatClassifier)> = None;
    for znorm in [false, true] {
        let mut c = if accurate {
            ModelConfig::a_config(ds.series_len, ds.n_classes)
        } else {
            ModelConfig::e_config(ds.series_len, ds.n_classes)
        };
        c.znorm = znorm;
        let s = run_seeds(ds, &c, &no_recipe_overrides(), 0, 20, None).map_err(|e| e.to_string())?;
        let run = s.best_run();
        let acc = run.test_accuracy.unwrap_or(0.0);
        if best.as_ref().is_none_or(|b| acc > b.0) {
            best = Some((acc, znorm, run.fit.model.clone(), run.fit.float_clf.clone()));
        }
    }
    best.ok_or_else(|| "no run".into())
}

struct Ecg {
    a: (f64, bool, QuantizedModel, FloatClassifier),
    e: (f64, bool, QuantizedModel, FloatClassifier),
    ds: Dataset,
}

fn criterion_1(ecg: &Option<Result<Ecg, String>>) -> Outcome {
    match ecg {
        None => Err("blocked: ECG5000 not found (set NANOHYDRA_DATA to a UCR archive root)".into()),
        Some(Err(e)) => Err(e.clone()),
        Some(Ok(r)) => check(
            r.a.0 >= 0.930 && r.e.0 >= 0.925,
            format!(
                "best-of-20 A {:.4} (znorm {}) >= 0.930, E {:.4} (znorm {}) >= 0.925",
                r.a.0, r.a.1, r.e.0, r.e.1
            ),
        ),
    }
}

fn criterion_2(ecg: &Option<Result<Ecg, String>>) -> Outcome {
    let info = fixture_agreement();
    let r = match ecg {
        None => return Err(format!("blocked: ECG5000 not found; fixture agreement for reference: {info}")),
        Some(Err(e)) => return Err(e.clone()),
        Some(Ok(r)) => r,
    };
    let engine = Engine::new(r.a.2.clone()).map_err(|e| e.to_string())?;
    let recipe = TrainRecipe::with_seed(engine.model.bank_seed);
    let reference = FloatPipeline::train(&engine, &r.ds.train.series, &r.ds.train.labels, OracleMode::Mirror, &recipe)
        .map_err(|e| e.to_string())?;
    let rep = integerization_report(&r.ds.test.series, &r.ds.test.labels, &engine, &reference).map_err(|e| e.to_string())?;
    check(
        rep.agreement >= 0.99 && rep.int_accuracy >= rep.float_accuracy - 0.015,
        format!(
            "agreement {:.4} >= 0.99, int {:.4} vs float {:.4} (gap <= 0.015)",
            rep.agreement, rep.int_accuracy, rep.float_accuracy
        ),
    )
}

fn fixture_agreement() -> String {
    let mut parts = Vec::new();
    for name in ["GunPoint", "ItalyPowerDemand"] {
        let Ok(ds) = load_ucr_dataset(common::fixture_root(), name) else {
            continue;
        };
        let mut c = ModelConfig::a_config(ds.series_len, ds.n_classes);
        c.znorm = true;
        c.clip_dilations();
        let recipe = TrainRecipe::with_seed(0);
        let Ok(out) = fit(&ds.train.series, &ds.train.labels, &c, &recipe) else {
            continue;
        };
        let engine = Engine::new(out.model).unwrap();
        let reference = FloatPipeline::train(&engine, &ds.train.series, &ds.train.labels, OracleMode::Mirror, &recipe).unwrap();
        let rep = integerization_report(&ds.test.series, &ds.test.labels, &engine, &reference).unwrap();
        parts.push(format!(
            "{name} agree {:.3} int {:.3} float {:.3}",
            rep.agreement, rep.int_accuracy, rep.float_accuracy
        ));
    }
    parts.join(", ")
}

fn random_zero_shift_config(rng: &mut ChaCha8Rng) -> ModelConfig {
    loop {
        let input_len = rng.gen_range(20..=200);
        let mut c = ModelConfig::new(input_len, rng.gen_range(2..=6));
        c.n_diff = rng.gen_range(1..=2);
        c.n_dil = rng.gen_range(1..=5);
        c.groups = rng.gen_range(1..=6);
        c.kernels_per_group = rng.gen_range(2..=8);
        c.kernel_len = [3, 5, 7, 9][rng.gen_range(0..4)];
        c.padding = if rng.gen() { Padding::Valid } else { Padding::SameZero };
        c.counting_mode = if rng.gen() {
            CountingMode::MaxOnly
        } else {
            CountingMode::MaxAndMinSplit
        };
        c.seed = rng.gen();
        c.conv_preshift = 0;
        // widest input that still needs no pre-shift
        for q in (1..=8).rev() {
            c.input_frac_bits = q;
            if c.validate().is_ok() {
                return c;
            }
        }
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut configs, mut inputs, mut pairs) = (0, 0, 0);
    for _ in 0..25 {
        let c = random_zero_shift_config(&mut rng);
        let bank = KernelBank::sample(&c);
        let a = (1i16 << c.input_frac_bits) - 1;
        for _ in 0..50 {
            let x = QuantizedSeries::new((0..c.input_len).map(|_| rng.gen_range(-a..=a)).collect(), c.input_frac_bits);
            let fv = transform(&x, &bank, &c).map_err(|e| e.to_string())?;
            let o = oracle_transform(&x, &bank, &c).map_err(|e| e.to_string())?;
            let int_hard: Vec<f64> = fv.hard.iter().map(|&v| v as f64).collect();
            if int_hard != o.hard() {
                return Err(format!("hard counts differ under {c:?}"));
            }
            let int_soft: Vec<f64> = fv.soft.iter().map(|&v| v as f64).collect();
            if int_soft != o.soft() {
                return Err(format!("soft sums differ under {c:?}"));
            }
            let k = c.kernels_per_group;
            for (pair, chunk) in fv.hard.chunks(k).enumerate() {
                let (order, d) = c.views()[pair / c.groups];
                let total: i32 = chunk.iter().map(|&v| v as i32).sum();
                if total as usize != c.timesteps(order, d) {
                    return Err(format!("view/group {pair}: counts sum to {total}"));
                }
                pairs += 1;
            }
            inputs += 1;
        }
        configs += 1;
    }
    check(
        inputs >= 1000 && configs >= 20,
        format!("{inputs} inputs over {configs} random configs: hard and soft features exact, {pairs} (view, group) sums conserved"),
    )
}

fn criterion_4() -> Outcome {
    let r = energy_ratio(1.75, 0.43);
    let e_lpm = energy::operating_point("E", "LPM").unwrap();
    let e_ulpm = energy::operating_point("E", "ULPM").unwrap();
    let derived = energy_ratio(e_lpm.power_mw / e_ulpm.power_mw, e_lpm.latency_ms / e_ulpm.latency_ms);
    check(
        (r - 0.7525).abs() < 1e-12 && format!("{r:.2}") == "0.75" && format!("{derived:.2}") == "0.75",
        format!("energy_ratio(1.75, 0.43) = {r:.4} -> {r:.2}; from measured operating points {derived:.4} -> {derived:.2}"),
    )
}

fn criterion_5() -> Outcome {
    let p = energy::profile(&energy::ULPWS, "E", "LPM").map_err(|e| e.to_string())?;
    let avg = avg_power(&p).map_err(|e| e.to_string())?;
    let rep = LifetimeReport::new(p, Battery::COIN_CELL, Some(4.44)).map_err(|e| e.to_string())?;
    let text = rep.to_text();
    let shows_both = text.contains(&format!("{:.3} years", rep.years)) && text.contains("4.44 years") && text.contains("note");
    check(
        (avg - 53.58).abs() <= 0.1 && (rep.years - 3.8).abs() < 0.1 && shows_both,
        format!(
            "avg power {avg:.3} uW (53.58 +- 0.1), lifetime {:.3} y printed next to 4.44 y with discrepancy note {:+.1}%",
            rep.years,
            rep.discrepancy().unwrap() * 100.0
        ),
    )
}

fn five_class(n: usize, len: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let freqs = [0.05, 0.1, 0.2, 0.35, 0.6];
    (0..n)
        .map(|i| {
            let c = i % 5;
            let x = (0..len)
                .map(|t| (t as f64 * freqs[c]).sin() + rng.gen_range(-0.3..0.3))
                .collect();
            (x, c)
        })
        .unzip()
}

fn criterion_6() -> Outcome {
    let (rows, labels) = five_class(60, 140, 1);
    let recipe = TrainRecipe {
        epochs: 5,
        ..TrainRecipe::with_seed(0)
    };
    let e = fit(&rows, &labels, &ModelConfig::e_config(140, 5), &recipe).map_err(|e| e.to_string())?;
    let a = fit(&rows, &labels, &ModelConfig::a_config(140, 5), &recipe).map_err(|e| e.to_string())?;
    let (eb, ab) = (e.model.to_bytes().len(), a.model.to_bytes().len());
    let ratio = ab as f64 / eb as f64;
    let macs_info = {
        let mut ec = ModelConfig::e_config(140, 5);
        let mut ac = ModelConfig::a_config(140, 5);
        let valid = energy::macs(&ac) as f64 / energy::macs(&ec) as f64;
        ec.padding = Padding::SameZero;
        ac.padding = Padding::SameZero;
        let same = energy::macs(&ac) as f64 / energy::macs(&ec) as f64;
        format!("MAC ratio A/E {valid:.2} (valid), {same:.2} (same_zero)")
    };
    check(
        eb <= 4608 && (3.0..=3.6).contains(&ratio),
        format!("E model {eb} B <= 4608, A model {ab} B, ratio {ratio:.3} in [3.0, 3.6]; {macs_info}"),
    )
}

fn criterion_7() -> Outcome {
    let gp = common::fixture_root().join("GunPoint");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let o = Command::new(env!("CARGO_BIN_EXE_nanohydra"))
            .args(["fit", "--dataset", gp.to_str().unwrap(), "--out", "model.bin", "--seeds", "3", "--variant", "a"])
            .current_dir(d.path())
            .env_remove("NANOHYDRA_DATA")
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(String::from_utf8_lossy(&o.stderr).into_owned());
        }
    }
    let read = |i: usize, f: &str| std::fs::read(dirs[i].path().join(f)).unwrap_or_default();
    let model_same = read(0, "model.bin") == read(1, "model.bin") && !read(0, "model.bin").is_empty();
    let manifest_same = read(0, "model.bin.manifest") == read(1, "model.bin.manifest");
    check(
        model_same && manifest_same,
        format!(
            "two processes: model files identical {model_same} ({} B), manifests identical {manifest_same}",
            read(0, "model.bin").len()
        ),
    )
}

/// Loss recomputed from scratch for the finite-difference oracle.
fn reference_loss(w: &[f64], b: &[f64], x: &[Vec<f64>], y: &[usize], classes: usize, wd: f64) -> f64 {
    let f = x[0].len();
    let mut total = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z: Vec<f64> = (0..classes)
            .map(|c| b[c] + (0..f).map(|i| w[c * f + i] * row[i]).sum::<f64>())
            .collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - z[label];
    }
    total / x.len() as f64 + 0.5 * wd * w.iter().map(|v| v * v).sum::<f64>()
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (n, f, c, wd) = (5, 8, 3, 1e-4);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let y: Vec<usize> = (0..n).map(|i| i % c).collect();
    let clf = FloatClassifier {
        num_classes: c,
        num_features: f,
        weights: (0..c * f).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        bias: (0..c).map(|_| rng.gen_range(-0.5..0.5)).collect(),
    };
    let rows: Vec<usize> = (0..n).collect();
    let g = loss_and_grad(&clf, &x, &y, &rows, wd);
    let h = 1e-5;
    let mut num = Vec::new();
    let mut ana = Vec::new();
    for i in 0..c * f {
        let (mut p, mut m) = (clf.weights.clone(), clf.weights.clone());
        p[i] += h;
        m[i] -= h;
        num.push((reference_loss(&p, &clf.bias, &x, &y, c, wd) - reference_loss(&m, &clf.bias, &x, &y, c, wd)) / (2.0 * h));
        ana.push(g.weights[i]);
    }
    for i in 0..c {
        let (mut p, mut m) = (clf.bias.clone(), clf.bias.clone());
        p[i] += h;
        m[i] -= h;
        num.push((reference_loss(&clf.weights, &p, &x, &y, c, wd) - reference_loss(&clf.weights, &m, &x, &y, c, wd)) / (2.0 * h));
        ana.push(g.bias[i]);
    }
    let diff: f64 = ana.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = ana.iter().map(|a| a * a).sum::<f64>().sqrt() + num.iter().map(|a| a * a).sum::<f64>().sqrt();
    let rel = diff / scale;
    let loss_gap = (g.loss - reference_loss(&clf.weights, &clf.bias, &x, &y, c, wd)).abs();
    check(
        rel < 1e-5 && loss_gap < 1e-12,
        format!("{n}x{f} toy, {c} classes: relative gradient error {rel:.2e} < 1e-5, loss gap {loss_gap:.1e}"),
    )
}

fn criterion_9() -> Outcome {
    let mut checked = 0;
    let mut configs = 0;
    for len in [24usize, 140, 500] {
        for (n_dil, n_diff) in [(1, 1), (3, 1), (5, 2)] {
            for padding in [Padding::Valid, Padding::SameZero] {
                for q in [4u32, 8, 12] {
                    let mut c = ModelConfig::new(len, 5);
                    c.n_dil = n_dil;
                    c.n_diff = n_diff;
                    c.padding = padding;
                    c.input_frac_bits = q;
                    c.auto_preshift();
                    if !c.validate().is_ok() {
                        continue;
                    }
                    configs += 1;
                    for bank in [KernelBank::sample(&c), common::adversarial_bank(&c, 3)] {
                        for x in common::worst_case_inputs(&c) {
                            let s = QuantizedSeries::new(x, q);
                            let strict = transform_checked(&s, &bank, &c).map_err(|e| format!("{e} under {c:?}"))?;
                            let sentinel = catch_unwind(AssertUnwindSafe(|| transform(&s, &bank, &c)));
                            match sentinel {
                                Ok(Ok(fv)) if fv == strict => {}
                                _ => return Err(format!("saturation sentinel fired under {c:?}")),
                            }
                            checked += 1;
                        }
                    }
                    let lf = c.feature_len();
                    let hi = (1i16 << (c.feature_clamp_bits - 1)) - 1;
                    let bias = c.bias_bound() as i32;
                    let clf = QuantizedClassifier {
                        num_classes: 5,
                        num_features: lf,
                        weights_q: vec![127; 5 * lf],
                        bias_q: vec![bias; 5],
                        weight_scale: 1.0,
                    };
                    for f in [vec![hi; lf], vec![-hi - 1; lf]] {
                        let wide = bias as i64 + 127 * f.iter().map(|&v| v as i64).sum::<i64>();
                        let got = clf.scores(&f).map_err(|e| e.to_string())?;
                        if got.iter().any(|&s| s as i64 != wide) {
                            return Err(format!("int32 score wrapped under {c:?}"));
                        }
                    }
                }
            }
        }
    }
    check(
        configs >= 20,
        format!("{checked} worst-case transforms over {configs} validated configs, no int16/int32 saturation"),
    )
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    let ecg = ecg5000().map(|ds| -> Result<Ecg, String> {
        let a = best_of_20(&ds, true)?;
        let e = best_of_20(&ds, false)?;
        Ok(Ecg { a, e, ds })
    });
    let criteria: Vec<Criterion> = vec![
        ("ECG5000 accuracy", Box::new(|| criterion_1(&ecg))),
        ("integerization fidelity", Box::new(|| criterion_2(&ecg))),
        ("oracle equivalence", Box::new(criterion_3)),
        ("energy ratio arithmetic", Box::new(criterion_4)),
        ("average power and lifetime report", Box::new(criterion_5)),
        ("memory proxy", Box::new(criterion_6)),
        ("determinism across processes", Box::new(criterion_7)),
        ("gradient check", Box::new(criterion_8)),
        ("overflow safety", Box::new(criterion_9)),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {}. {name}: {detail}", i + 1),
            Err(detail) => {
                println!("FAIL  {}. {name}: {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

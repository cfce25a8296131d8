#![allow(dead_code)]

use std::path::PathBuf;

use nanohydra::config::ModelConfig;
use nanohydra::transform::KernelBank;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FIXTURES: [&str; 5] = [
    "GunPoint",
    "ArrowHead",
    "ItalyPowerDemand",
    "Covid3Month",
    "PickupGestureWiimoteZ",
];

pub fn fixture_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/ucr")
}

/// Two noisy sinusoids of different frequency, alternating labels.
pub fn two_tone(n: usize, len: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 2;
        let f = if c == 0 { 0.12 } else { 0.5 };
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        rows.push((0..len).map(|t| (t as f64 * f + phase).sin() + rng.gen_range(-0.2..0.2)).collect());
        labels.push(c);
    }
    (rows, labels)
}

/// Bank where each group holds the kernels that reach the extreme responses
/// on constant and alternating inputs: all `+1`, all `-1`, `(-1)^j` and
/// `-(-1)^j`; remaining slots are random.
pub fn adversarial_bank(config: &ModelConfig, seed: u64) -> KernelBank {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = config.kernel_len;
    let mut weights = Vec::new();
    for _v in 0..config.num_views() {
        for _g in 0..config.groups {
            for k in 0..config.kernels_per_group {
                for j in 0..w {
                    let alt: i8 = if j % 2 == 0 { 1 } else { -1 };
                    weights.push(match k {
                        0 => 1,
                        1 => -1,
                        2 => alt,
                        3 => -alt,
                        _ => {
                            if rng.gen::<bool>() {
                                1
                            } else {
                                -1
                            }
                        }
                    });
                }
            }
        }
    }
    KernelBank::from_weights(config, weights).unwrap()
}

/// Inputs at the quantization bound: constant high, constant low, and
/// alternating, plus alternating pairs for even dilations of the difference.
pub fn worst_case_inputs(config: &ModelConfig) -> Vec<Vec<i16>> {
    let a = ((1i32 << config.input_frac_bits) - 1) as i16;
    let n = config.input_len;
    vec![
        vec![a; n],
        vec![-a; n],
        (0..n).map(|i| if i % 2 == 0 { a } else { -a }).collect(),
        (0..n).map(|i| if (i / 2) % 2 == 0 { a } else { -a }).collect(),
        (0..n).map(|i| if (i / 4) % 2 == 0 { a } else { -a }).collect(),
    ]
}

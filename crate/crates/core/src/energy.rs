//! Duty-cycled power, battery lifetime, and static cost counts.

use std::fmt::Write as _;

use crate::classifier::QuantizedModel;
use crate::config::ModelConfig;
use crate::error::{Error, Result};

pub const HOURS_PER_YEAR: f64 = 8760.0;

/// Powers in µW, durations in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    pub label: String,
    pub p_inf: f64,
    pub p_sleep: f64,
    pub p_adc: f64,
    pub dt_inf: f64,
    pub dt_acq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Battery {
    pub capacity_mah: f64,
    pub voltage: f64,
}

impl Battery {
    /// CR2450 coin cell.
    pub const COIN_CELL: Battery = Battery {
        capacity_mah: 600.0,
        voltage: 3.0,
    };

    pub fn energy_mwh(&self) -> f64 {
        self.capacity_mah * self.voltage
    }
}

impl PowerProfile {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("p_inf", self.p_inf),
            ("p_sleep", self.p_sleep),
            ("p_adc", self.p_adc),
            ("dt_inf", self.dt_inf),
            ("dt_acq", self.dt_acq),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Input(format!("{name} must be finite and non-negative, got {v}")));
        }
        if self.dt_acq == 0.0 {
            return Err(Error::Input("acquisition window dt_acq must be positive".into()));
        }
        if self.dt_inf > self.dt_acq {
            return Err(Error::Input(format!(
                "inference time {} s exceeds acquisition window {} s",
                self.dt_inf, self.dt_acq
            )));
        }
        Ok(())
    }
}

/// Average system power in µW over one acquisition window.
pub fn avg_power(p: &PowerProfile) -> Result<f64> {
    p.validate()?;
    Ok((p.p_inf * p.dt_inf + p.p_sleep * (p.dt_acq - p.dt_inf)) / p.dt_acq + p.p_adc)
}

/// Hours of operation from a full battery at `avg_uw` microwatts.
pub fn lifetime_hours_at(avg_uw: f64, battery: &Battery) -> Result<f64> {
    if !(avg_uw.is_finite() && avg_uw > 0.0) {
        return Err(Error::Input(format!("average power must be positive, got {avg_uw} µW")));
    }
    if !(battery.capacity_mah > 0.0 && battery.voltage > 0.0) {
        return Err(Error::Input("battery capacity and voltage must be positive".into()));
    }
    Ok(battery.energy_mwh() / (avg_uw * 1e-3))
}

pub fn lifetime_years(p: &PowerProfile, battery: &Battery) -> Result<f64> {
    Ok(lifetime_hours_at(avg_power(p)?, battery)? / HOURS_PER_YEAR)
}

/// Energy of one operating point relative to another, from its power and
/// latency ratios.
pub fn energy_ratio(p_scale: f64, t_scale: f64) -> f64 {
    p_scale * t_scale
}

/// Measured inference power (mW) and latency (ms) of one model variant in one
/// operating mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub variant: &'static str,
    pub mode: &'static str,
    pub power_mw: f64,
    pub latency_ms: f64,
}

pub const OPERATING_POINTS: [OperatingPoint; 6] = [
    OperatingPoint { variant: "E", mode: "ULPM", power_mw: 13.09, latency_ms: 0.77 },
    OperatingPoint { variant: "E", mode: "LPM", power_mw: 23.02, latency_ms: 0.33 },
    OperatingPoint { variant: "E", mode: "HPM", power_mw: 51.24, latency_ms: 0.22 },
    OperatingPoint { variant: "A", mode: "ULPM", power_mw: 13.69, latency_ms: 2.23 },
    OperatingPoint { variant: "A", mode: "LPM", power_mw: 25.63, latency_ms: 0.97 },
    OperatingPoint { variant: "A", mode: "HPM", power_mw: 60.11, latency_ms: 0.64 },
];

pub fn operating_point(variant: &str, mode: &str) -> Option<OperatingPoint> {
    OPERATING_POINTS
        .iter()
        .copied()
        .find(|o| o.variant.eq_ignore_ascii_case(variant) && o.mode.eq_ignore_ascii_case(mode))
}

/// Wearable platform constants: sleep and ADC power in µW, compute power
/// override in µW (`None` uses the operating point's measured power).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct System {
    pub name: &'static str,
    pub p_sleep: f64,
    pub p_adc: f64,
    pub p_inf_override: Option<f64>,
    pub dt_acq: f64,
    /// Published lifetime in years for the E and A variants.
    pub reported_years: (f64, f64),
}

/// Ultra-low-power wearable: deep sleep 45 µW, 12-bit ADC at 1 µW.
pub const ULPWS: System = System {
    name: "ulpws",
    p_sleep: 45.0,
    p_adc: 1.0,
    p_inf_override: None,
    dt_acq: 1.0,
    reported_years: (4.44, 2.90),
};

/// Biosignal board: 24 mW compute, 150 µW sleep. The ADC figure is an
/// assumption (one channel of a multi-channel biopotential front end).
pub const BIOGAP: System = System {
    name: "biogap",
    p_sleep: 150.0,
    p_adc: 750.0,
    p_inf_override: Some(24_000.0),
    dt_acq: 1.0,
    reported_years: (0.26, 0.25),
};

pub fn system(name: &str) -> Option<System> {
    [ULPWS, BIOGAP].into_iter().find(|s| s.name.eq_ignore_ascii_case(name))
}

/// Builds the profile of `variant` in `mode` running on `sys`.
pub fn profile(sys: &System, variant: &str, mode: &str) -> Result<PowerProfile> {
    let op = operating_point(variant, mode)
        .ok_or_else(|| Error::Input(format!("unknown operating point {variant}/{mode}")))?;
    Ok(PowerProfile {
        label: format!("{}/{}-{}", sys.name, op.variant, op.mode),
        p_inf: sys.p_inf_override.unwrap_or(op.power_mw * 1e3),
        p_sleep: sys.p_sleep,
        p_adc: sys.p_adc,
        dt_inf: op.latency_ms * 1e-3,
        dt_acq: sys.dt_acq,
    })
}

/// Lifetime computed from the formula next to a published figure.
#[derive(Debug, Clone, PartialEq)]
pub struct LifetimeReport {
    pub profile: PowerProfile,
    pub battery: Battery,
    pub avg_power_uw: f64,
    pub years: f64,
    pub reported_years: Option<f64>,
}

impl LifetimeReport {
    pub fn new(profile: PowerProfile, battery: Battery, reported_years: Option<f64>) -> Result<Self> {
        let avg = avg_power(&profile)?;
        let years = lifetime_hours_at(avg, &battery)? / HOURS_PER_YEAR;
        Ok(LifetimeReport {
            profile,
            battery,
            avg_power_uw: avg,
            years,
            reported_years,
        })
    }

    /// Relative gap to the published figure, if any.
    pub fn discrepancy(&self) -> Option<f64> {
        self.reported_years.map(|r| (self.years - r) / r)
    }

    pub fn to_text(&self) -> String {
        let p = &self.profile;
        let mut s = String::new();
        let _ = writeln!(s, "profile        {}", p.label);
        let _ = writeln!(s, "p_inf          {:.1} uW for {:.3} ms", p.p_inf, p.dt_inf * 1e3);
        let _ = writeln!(s, "p_sleep        {:.1} uW", p.p_sleep);
        let _ = writeln!(s, "p_adc          {:.1} uW", p.p_adc);
        let _ = writeln!(s, "window         {:.3} s", p.dt_acq);
        let _ = writeln!(
            s,
            "battery        {} mAh at {} V ({:.0} mWh)",
            self.battery.capacity_mah,
            self.battery.voltage,
            self.battery.energy_mwh()
        );
        let _ = writeln!(s, "average power  {:.2} uW", self.avg_power_uw);
        let _ = writeln!(s, "lifetime       {:.3} years", self.years);
        if let (Some(r), Some(d)) = (self.reported_years, self.discrepancy()) {
            let _ = writeln!(s, "reported       {r:.2} years");
            if d.abs() > 0.05 {
                let _ = writeln!(
                    s,
                    "note           formula result differs from the reported figure by {:+.1}%",
                    d * 100.0
                );
            }
        }
        s
    }

    pub fn to_kv(&self) -> String {
        let p = &self.profile;
        let mut s = String::new();
        let _ = writeln!(s, "profile={}", p.label);
        let _ = writeln!(s, "p_inf_uw={}", p.p_inf);
        let _ = writeln!(s, "p_sleep_uw={}", p.p_sleep);
        let _ = writeln!(s, "p_adc_uw={}", p.p_adc);
        let _ = writeln!(s, "dt_inf_s={}", p.dt_inf);
        let _ = writeln!(s, "dt_acq_s={}", p.dt_acq);
        let _ = writeln!(s, "battery_mah={}", self.battery.capacity_mah);
        let _ = writeln!(s, "battery_v={}", self.battery.voltage);
        let _ = writeln!(s, "avg_power_uw={:.6}", self.avg_power_uw);
        let _ = writeln!(s, "lifetime_years={:.6}", self.years);
        if let Some(r) = self.reported_years {
            let _ = writeln!(s, "reported_years={r}");
            let _ = writeln!(s, "discrepancy={:.6}", self.discrepancy().unwrap_or(0.0));
        }
        s
    }
}

/// Static per-inference costs of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostReport {
    pub macs_per_inference: u64,
    pub bytes_model: usize,
    pub bytes_peak: usize,
}

/// Multiply-accumulates of the transform plus the classifier.
pub fn macs(config: &ModelConfig) -> u64 {
    let conv = config.total_timesteps() as u64
        * (config.groups * config.kernels_per_group * config.kernel_len) as u64;
    conv + (config.feature_len() * config.num_classes) as u64
}

/// Working set of the streaming integer path: input window, its difference
/// (when used), one group's responses, the kernel bank as int8, the int16
/// accumulators, the scaled features and the int32 scores.
pub fn peak_bytes(config: &ModelConfig) -> usize {
    let input = config.input_len * 2;
    let diff = if config.n_diff > 1 { config.input_len.saturating_sub(1) * 2 } else { 0 };
    let responses = config.kernels_per_group * 4;
    let bank = config.num_views() * config.groups * config.kernels_per_group * config.kernel_len;
    let feats = config.feature_len() * 2;
    let scaled = config.feature_len() * 2;
    let scores = config.num_classes * 4;
    input + diff + responses + bank + feats + scaled + scores
}

pub fn cost_report(model: &QuantizedModel) -> CostReport {
    CostReport {
        macs_per_inference: macs(&model.config),
        bytes_model: model.size_bytes(),
        bytes_peak: peak_bytes(&model.config),
    }
}

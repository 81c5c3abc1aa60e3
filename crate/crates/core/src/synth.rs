//! Seeded synthetic traces standing in for measured renewable, price and
//! workload data.
//!
//! * windy: capacity factor is a logistic transform of an AR(1) process,
//!   averaging about 0.4.
//! * diurnal-solar: a daylight arch scaled by an AR(1) cloud factor; zero
//!   at night.
//! * flat: constant capacity factor, prices and workload.
//!
//! Real-time LMP follows an evening-peaking daily shape with AR(1) noise
//! and occasional upward spikes; negative spikes are optional. Retail rates
//! are hourly: export pays the day-ahead level, import adds a fixed adder.
//! Data-center power runs between 62 % and 77 % of capacity.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::curve::ProcessingCurve;
use crate::domain::{PlantConfig, TimeGrid};
use crate::error::{EmsError, Result};
use crate::trace_io::RawTraces;

/// Retail import adder over the day-ahead level, $/kWh.
pub const RETAIL_ADDER: f64 = 0.004;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Windy,
    DiurnalSolar,
    Flat,
}

impl Profile {
    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Windy => "windy",
            Profile::DiurnalSolar => "diurnal-solar",
            Profile::Flat => "flat",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profile {
    type Err = EmsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "windy" => Ok(Profile::Windy),
            "diurnal-solar" => Ok(Profile::DiurnalSolar),
            "flat" => Ok(Profile::Flat),
            _ => Err(EmsError::UnknownProfile(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub profile: Profile,
    pub negative_spikes: bool,
}

/// First timestamp of every synthetic trace.
pub fn synthetic_start() -> DateTime<Utc> {
    "2024-07-01T00:00:00Z".parse().expect("valid timestamp")
}

struct Ar1 {
    phi: f64,
    noise: Normal<f64>,
    x: f64,
}

impl Ar1 {
    /// Zero-mean AR(1) with the given stationary standard deviation.
    fn new(phi: f64, sd: f64, rng: &mut ChaCha8Rng) -> Self {
        let noise = Normal::new(0.0, sd * (1.0 - phi * phi).sqrt()).expect("valid sd");
        let x = Normal::new(0.0, sd).expect("valid sd").sample(rng);
        Self { phi, noise, x }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        self.x = self.phi * self.x + self.noise.sample(rng);
        self.x
    }
}

/// Generates one trace set. Deterministic in `seed`.
pub fn synth_traces(
    seed: u64,
    grid: &TimeGrid,
    opts: SynthOptions,
    plant: &PlantConfig,
    curve: &ProcessingCurve,
) -> Result<RawTraces> {
    let n = grid.total_intervals;
    let dt = grid.interval_hours;
    let hour_of = |t: usize| (t as f64 * dt) % 24.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut eta = Vec::with_capacity(n);
    match opts.profile {
        Profile::Windy => {
            let mut z = Ar1::new(0.995, 1.3, &mut rng);
            for _ in 0..n {
                let x = -0.45 + z.step(&mut rng);
                eta.push(1.0 / (1.0 + (-x).exp()));
            }
        }
        Profile::DiurnalSolar => {
            let mut cloud = Ar1::new(0.98, 0.3, &mut rng);
            for t in 0..n {
                let h = hour_of(t);
                let arch = if (6.0..18.0).contains(&h) {
                    (PI * (h - 6.0) / 12.0).sin()
                } else {
                    0.0
                };
                let c = (1.0 - cloud.step(&mut rng).abs()).clamp(0.2, 1.0);
                eta.push((0.85 * arch * c).clamp(0.0, 1.0));
            }
        }
        Profile::Flat => eta.resize(n, 0.4),
    }

    let flat = opts.profile == Profile::Flat;
    let shape = |h: f64| 0.062 + 0.018 * (2.0 * PI * (h - 18.0) / 24.0).cos();
    let hours = n.div_ceil((1.0 / dt).round().max(1.0) as usize);
    let per_hour = (1.0 / dt).round().max(1.0) as usize;

    // Hourly day-ahead level.
    let mut day_level = Ar1::new(0.9, 0.008, &mut rng);
    let da_noise = Normal::new(0.0, 0.003).expect("valid sd");
    let mut da = Vec::with_capacity(hours);
    let mut level = 0.0;
    for hr in 0..hours {
        if hr % 24 == 0 {
            level = day_level.step(&mut rng);
        }
        let v = if flat {
            0.07
        } else {
            (shape((hr % 24) as f64) + level + da_noise.sample(&mut rng)).max(0.005)
        };
        da.push(v);
    }

    let mut rt = Ar1::new(0.8, 0.008, &mut rng);
    let mut lmp = Vec::with_capacity(n);
    let mut spike_left = 0usize;
    let mut spike_value = 0.0;
    for t in 0..n {
        let base = da[t / per_hour];
        let noise = rt.step(&mut rng);
        if flat {
            lmp.push(0.07);
            continue;
        }
        if spike_left == 0 {
            let u: f64 = rng.random();
            if u < 0.008 {
                spike_left = rng.random_range(1..=4);
                spike_value = base * rng.random_range(2.0..5.0);
            } else if opts.negative_spikes && u < 0.012 {
                spike_left = rng.random_range(1..=4);
                spike_value = -rng.random_range(0.005..0.05);
            }
        }
        if spike_left > 0 {
            spike_left -= 1;
            lmp.push(spike_value);
        } else {
            lmp.push((base + noise).max(0.0));
        }
    }

    let mut import_rate = Vec::with_capacity(n);
    let mut export_rate = Vec::with_capacity(n);
    for t in 0..n {
        let d = da[t / per_hour];
        export_rate.push(d);
        import_rate.push(d + RETAIL_ADDER);
    }

    let mut load = Ar1::new(0.97, 0.02, &mut rng);
    let cap = plant.dc_capacity_kw.min(curve.max_power());
    let mut total_work = Vec::with_capacity(n);
    for t in 0..n {
        let u = if flat {
            0.7
        } else {
            (0.695 + 0.05 * (2.0 * PI * (hour_of(t) - 14.0) / 24.0).cos() + load.step(&mut rng))
                .clamp(0.62, 0.77)
        };
        total_work.push(curve.compute_work(u * cap, dt)?);
    }

    Ok(RawTraces {
        start: synthetic_start(),
        capacity_factor: eta,
        lmp,
        import_rate,
        export_rate,
        total_work,
    })
}

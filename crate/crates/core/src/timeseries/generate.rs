//! Seeded synthetic data.
//!
//! `gen_engine_like` produces a multi-event input/output pair in the shape
//! of engine speed and vibration records: abrupt level changes in the input,
//! an output that is a fixed memoryless function of the input plus noise,
//! degraded behaviour in selected events and a spike at the very end.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::EventSeries;
use crate::network::Batch;
use crate::{Error, Result, Scalar};

/// Number of evenly spaced throttle settings levels are drawn from.
const SETTINGS: usize = 6;
const LEVEL_LO: f64 = -0.9;
const LEVEL_HI: f64 = 0.9;
/// Per-segment jitter around a throttle setting.
const LEVEL_JITTER: f64 = 0.02;
/// Samples over which a level change is ramped.
const RAMP: usize = 3;
const LAW_TERMS: usize = 4;
const LAW_PEAK: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub n_events: usize,
    pub samples_per_event: usize,
    pub seed: u64,
    /// Defaults to the last two events.
    pub anomaly_events: Option<Vec<usize>>,
    /// Multiplier on the clean law inside anomaly events.
    pub anomaly_gain: f64,
    /// Additive spike on the final sample of the last event.
    pub failure_spike: f64,
    /// Abrupt level shifts per event.
    pub jump_rate: usize,
    /// Base standard deviation of the output noise.
    pub noise_level: f64,
    /// Standard deviation of the input noise.
    pub input_noise: f64,
    /// Peak of the localized burst is `burst_scale * (anomaly_gain - 1)`, so
    /// a gain of 1 removes the burst as well.
    pub burst_scale: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_events: 32,
            samples_per_event: 200,
            seed: 0,
            anomaly_events: None,
            anomaly_gain: 1.5,
            failure_spike: 3.56,
            jump_rate: 3,
            noise_level: 0.01,
            input_noise: 0.003,
            burst_scale: 0.8,
        }
    }
}

impl GenConfig {
    /// Same law and layout with the anomalies and the failure spike removed.
    pub fn clean(mut self) -> Self {
        self.anomaly_gain = 1.0;
        self.failure_spike = 0.0;
        self
    }

    pub fn anomaly_set(&self) -> Vec<usize> {
        match &self.anomaly_events {
            Some(events) => events.clone(),
            None => vec![self.n_events.saturating_sub(2), self.n_events.saturating_sub(1)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_events < 3 {
            return bad(format!("n_events must be at least 3, got {}", self.n_events));
        }
        let min_len = (self.jump_rate + 1) * (RAMP + 2);
        if self.samples_per_event < min_len {
            return bad(format!(
                "samples_per_event must be at least {min_len} for jump_rate {}",
                self.jump_rate
            ));
        }
        if let Some(e) = self.anomaly_set().iter().find(|&&e| e >= self.n_events) {
            return bad(format!("anomaly event {e} outside 0..{}", self.n_events));
        }
        if !(self.anomaly_gain >= 1.0) {
            return bad(format!("anomaly_gain must be >= 1, got {}", self.anomaly_gain));
        }
        for (name, v) in [
            ("failure_spike", self.failure_spike),
            ("noise_level", self.noise_level),
            ("input_noise", self.input_noise),
            ("burst_scale", self.burst_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

/// The clean input-to-output relation: an offset plus a sum of tanh steps,
/// scaled so its peak magnitude on `[-1, 1]` is 0.8.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineLaw {
    offset: f64,
    terms: Vec<(f64, f64, f64)>,
}

impl EngineLaw {
    fn draw(rng: &mut impl Rng) -> Self {
        let mut terms = Vec::with_capacity(LAW_TERMS);
        for _ in 0..LAW_TERMS {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let amp = sign * rng.random_range(0.2..0.5);
            let steep = rng.random_range(2.0..6.0);
            let centre = rng.random_range(-0.7..0.7);
            terms.push((amp, steep, centre));
        }
        let mut law = Self { offset: 0.0, terms };
        let grid: Vec<f64> = (0..=400).map(|i| -1.0 + i as f64 / 200.0).collect();
        let (lo, hi) = grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            let v = law.eval(x);
            (lo.min(v), hi.max(v))
        });
        let centre = 0.5 * (lo + hi);
        let half = (0.5 * (hi - lo)).max(1e-9);
        law.offset = -centre;
        let scale = LAW_PEAK / half;
        law.offset *= scale;
        for t in &mut law.terms {
            t.0 *= scale;
        }
        law
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.offset
            + self
                .terms
                .iter()
                .map(|&(a, s, c)| a * (s * (x - c)).tanh())
                .sum::<f64>()
    }
}

fn noise_sd(base: f64, x: f64) -> f64 {
    // vibration noise grows with speed
    base * (0.5 + 0.75 * (x + 1.0)).max(0.25)
}

/// Engine-like series together with the clean law used to produce it.
pub fn gen_engine_like_with_law<T: Scalar>(config: &GenConfig) -> Result<(EventSeries<T>, EngineLaw)> {
    config.validate()?;
    let mut law_rng = ChaCha8Rng::seed_from_u64(config.seed);
    law_rng.set_stream(1);
    let law = EngineLaw::draw(&mut law_rng);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(2);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let anomalies = config.anomaly_set();
    let n = config.n_events * config.samples_per_event;
    let mut input = Vec::with_capacity(n);
    let mut output = Vec::with_capacity(n);
    let mut event_ends = Vec::with_capacity(config.n_events);
    let setting = |k: usize| LEVEL_LO + (LEVEL_HI - LEVEL_LO) * k as f64 / (SETTINGS - 1) as f64;

    for event in 0..config.n_events {
        let len = config.samples_per_event;
        let segments = config.jump_rate + 1;
        // segment boundaries: evenly spaced cut points, each moved at random
        // within its middle half
        let base = len as f64 / segments as f64;
        let mut cuts = vec![0usize];
        for s in 1..segments {
            let jitter = rng.random_range(-0.25..0.25) * base;
            cuts.push(((s as f64 * base + jitter).round() as usize).clamp(cuts[s - 1] + RAMP + 1, len - 1));
        }
        cuts.push(len);
        // every event starts at idle
        let levels: Vec<f64> = (0..segments)
            .map(|s| {
                let k = if s == 0 { 0 } else { rng.random_range(0..SETTINGS) };
                setting(k) + rng.random_range(-LEVEL_JITTER..LEVEL_JITTER)
            })
            .collect();

        let anomalous = anomalies.contains(&event);
        let burst_centre = rng.random_range(0.2..0.8) * len as f64;
        let burst_width = len as f64 / 20.0;
        let burst_peak = config.burst_scale * (config.anomaly_gain - 1.0);

        for t in 0..len {
            let seg = cuts.windows(2).position(|w| t >= w[0] && t < w[1]).unwrap();
            let mut level = levels[seg];
            let since = t - cuts[seg];
            if seg > 0 && since < RAMP {
                let w = (since + 1) as f64 / (RAMP + 1) as f64;
                level = levels[seg - 1] + w * (levels[seg] - levels[seg - 1]);
            }
            let x = level + config.input_noise * std_normal.sample(&mut rng);
            let eps = noise_sd(config.noise_level, x) * std_normal.sample(&mut rng);
            let mut y = law.eval(x);
            if anomalous {
                let z = (t as f64 - burst_centre) / burst_width;
                y = config.anomaly_gain * y + burst_peak * (-0.5 * z * z).exp();
            }
            y += eps;
            if event + 1 == config.n_events && t + 1 == len {
                y += config.failure_spike;
            }
            input.push(T::of(x));
            output.push(T::of(y));
        }
        event_ends.push(input.len() - 1);
    }

    let name = format!("engine-like(seed={})", config.seed);
    Ok((EventSeries::new(name, input, output, event_ends)?, law))
}

pub fn gen_engine_like<T: Scalar>(config: &GenConfig) -> Result<EventSeries<T>> {
    gen_engine_like_with_law(config).map(|(s, _)| s)
}

/// `sin(πx)/(πx)` sampled at `n_points` equally spaced points of
/// `[-half_range, half_range]`.
pub fn gen_sinc<T: Scalar>(n_points: usize, half_range: f64) -> Result<Batch<T>> {
    if n_points < 2 {
        return Err(Error::InvalidArgument(format!(
            "sinc needs at least 2 points, got {n_points}"
        )));
    }
    if !(half_range > 0.0 && half_range.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "half_range must be positive, got {half_range}"
        )));
    }
    let xs: Vec<f64> = (0..n_points)
        .map(|i| -half_range + 2.0 * half_range * i as f64 / (n_points - 1) as f64)
        .collect();
    let ys: Vec<T> = xs.iter().map(|&x| T::of(sinc(x))).collect();
    let xs: Vec<T> = xs.into_iter().map(T::of).collect();
    Batch::from_columns(&xs, &ys)
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

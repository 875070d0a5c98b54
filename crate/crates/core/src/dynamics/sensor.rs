use std::f64::consts::{PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// Noisy speed measurement followed by a low-pass filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    /// mean-square speed over noise variance, dB
    pub snr_db: f64,
    /// filter order; only 2 is supported
    pub order: u32,
    pub cutoff_hz: f64,
    pub seed: u64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self { snr_db: 20.0, order: 2, cutoff_hz: 0.5, seed: 0 }
    }
}

impl SensorModel {
    pub fn validate(&self, dt: f64) -> Result<(), DynamicsError> {
        if !self.snr_db.is_finite() {
            return Err(DynamicsError::InvalidSettings("snr_db must be finite".into()));
        }
        if self.order != 2 {
            return Err(DynamicsError::InvalidSettings(format!(
                "only a 2nd-order filter is available, got order {}",
                self.order
            )));
        }
        let nyquist = 0.5 / dt;
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < nyquist) {
            return Err(DynamicsError::InvalidSettings(format!(
                "cutoff {} Hz must lie in (0, {nyquist}) Hz",
                self.cutoff_hz
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Noise standard deviation for a signal of mean square `mean_square`.
pub fn noise_std(mean_square: f64, snr_db: f64) -> f64 {
    (mean_square * 10f64.powf(-snr_db / 10.0)).sqrt()
}

/// Second-order Butterworth low-pass, bilinear transform with the cutoff
/// prewarped, transposed direct form II.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth2 {
    b: [f64; 3],
    a: [f64; 2],
    z: [f64; 2],
}

impl Butterworth2 {
    pub fn new(cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self, DynamicsError> {
        if !(cutoff_hz > 0.0 && cutoff_hz < 0.5 * sample_rate_hz) {
            return Err(DynamicsError::InvalidSettings(format!(
                "cutoff {cutoff_hz} Hz must lie below Nyquist {} Hz",
                0.5 * sample_rate_hz
            )));
        }
        let k = (PI * cutoff_hz / sample_rate_hz).tan();
        let k2 = k * k;
        let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
        let b0 = k2 * norm;
        Ok(Self {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k2 - 1.0) * norm, (1.0 - SQRT_2 * k + k2) * norm],
            z: [0.0; 2],
        })
    }

    /// Sets the internal state to the steady state of a constant input `x`.
    pub fn prime(&mut self, x: f64) {
        // steady output equals x (unit DC gain)
        self.z[1] = self.b[2] * x - self.a[1] * x;
        self.z[0] = self.b[1] * x - self.a[0] * x + self.z[1];
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z[0];
        self.z[0] = self.b[1] * x - self.a[0] * y + self.z[1];
        self.z[1] = self.b[2] * x - self.a[1] * y;
        y
    }

    /// Magnitude of the discrete frequency response at `f_hz`.
    pub fn gain(&self, f_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * PI * f_hz / sample_rate_hz;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        let num = (self.b[0] + self.b[1] * c1 + self.b[2] * c2, -(self.b[1] * s1 + self.b[2] * s2));
        let den = (1.0 + self.a[0] * c1 + self.a[1] * c2, -(self.a[0] * s1 + self.a[1] * s2));
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }
}

/// Streaming measurement chain: `max(0, F[w + n])`.
#[derive(Debug, Clone)]
pub struct SensorChain {
    filter: Butterworth2,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    primed: bool,
}

impl SensorChain {
    pub fn new(sensor: &SensorModel, dt: f64, sigma: f64) -> Result<Self, DynamicsError> {
        sensor.validate(dt)?;
        let noise = Normal::new(0.0, sigma)
            .map_err(|e| DynamicsError::InvalidSettings(format!("noise sigma {sigma}: {e}")))?;
        Ok(Self {
            filter: Butterworth2::new(sensor.cutoff_hz, 1.0 / dt)?,
            rng: ChaCha8Rng::seed_from_u64(sensor.seed),
            noise,
            primed: false,
        })
    }

    pub fn measure(&mut self, omega: f64) -> f64 {
        let x = omega + self.noise.sample(&mut self.rng);
        if !self.primed {
            self.filter.prime(x);
            self.primed = true;
        }
        self.filter.step(x).max(0.0)
    }
}

/// Adds seeded Gaussian noise scaled to `sensor.snr_db` against the mean square
/// of `omega`, low-pass filters at rate `1/dt` and floors at zero.
pub fn apply_sensor_chain(
    omega: &[f64],
    dt: f64,
    sensor: &SensorModel,
) -> Result<Vec<f64>, DynamicsError> {
    if omega.is_empty() {
        return Err(DynamicsError::InvalidSettings("empty speed series".into()));
    }
    let ms = omega.iter().map(|w| w * w).sum::<f64>() / omega.len() as f64;
    let mut chain = SensorChain::new(sensor, dt, noise_std(ms, sensor.snr_db))?;
    Ok(omega.iter().map(|&w| chain.measure(w)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_sigma() {
        assert!((noise_std(100.0, 20.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn filter_gains() {
        let f = Butterworth2::new(0.5, 100.0).unwrap();
        assert!((f.gain(0.0, 100.0) - 1.0).abs() < 1e-12);
        assert!((f.gain(0.5, 100.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!(20.0 * f.gain(5.0, 100.0).log10() < -35.0);
    }

    #[test]
    fn primed_filter_passes_constant() {
        let mut f = Butterworth2::new(0.5, 100.0).unwrap();
        f.prime(3.0);
        for _ in 0..10 {
            assert!((f.step(3.0) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_is_seeded() {
        let w = vec![10.0; 500];
        let s = SensorModel::default();
        assert_eq!(apply_sensor_chain(&w, 0.01, &s).unwrap(), apply_sensor_chain(&w, 0.01, &s).unwrap());
        assert_ne!(
            apply_sensor_chain(&w, 0.01, &s).unwrap(),
            apply_sensor_chain(&w, 0.01, &s.with_seed(1)).unwrap()
        );
    }

    #[test]
    fn rejects_cutoff_above_nyquist() {
        let s = SensorModel { cutoff_hz: 60.0, ..Default::default() };
        assert!(apply_sensor_chain(&[1.0], 0.01, &s).is_err());
        assert!(SensorModel { order: 3, ..Default::default() }.validate(0.01).is_err());
    }
}

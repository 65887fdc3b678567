use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use super::geometry::Satellite;
use super::layout::{BeamLayout, UserSet};
use super::pattern::feed_gain;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// User-link budget. Defaults follow a Ka-band GEO system over Europe.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    pub satellite_longitude_deg: f64,
    pub satellite_height_m: f64,
    pub earth_radius_m: f64,
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub rolloff: f64,
    pub user_antenna_gain_db: f64,
    pub g_over_t_db: f64,
    pub receiver_noise_temp_k: f64,
    pub boltzmann: f64,
    /// Total transmit power P_T, watts.
    pub total_power_w: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        let gain = 41.7;
        let g_over_t = 17.68;
        Self {
            satellite_longitude_deg: 10.0,
            satellite_height_m: 35_786e3,
            earth_radius_m: 6_378.137e3,
            carrier_freq_hz: 20e9,
            bandwidth_hz: 500e6,
            rolloff: 0.25,
            user_antenna_gain_db: gain,
            g_over_t_db: g_over_t,
            receiver_noise_temp_k: noise_temperature_from_g_over_t(gain, g_over_t),
            boltzmann: BOLTZMANN,
            total_power_w: 100.0,
        }
    }
}

/// T_R such that G/T = G − 10·log10(T_R).
pub fn noise_temperature_from_g_over_t(gain_db: f64, g_over_t_db: f64) -> f64 {
    10f64.powf((gain_db - g_over_t_db) / 10.0)
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("satellite_height_m", self.satellite_height_m),
            ("earth_radius_m", self.earth_radius_m),
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("receiver_noise_temp_k", self.receiver_noise_temp_k),
            ("boltzmann", self.boltzmann),
            ("total_power_w", self.total_power_w),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.rolloff) {
            return Err(Error::Config(format!("rolloff must lie in [0, 1), got {}", self.rolloff)));
        }
        let implied = self.user_antenna_gain_db - 10.0 * self.receiver_noise_temp_k.log10();
        if (implied - self.g_over_t_db).abs() > 0.01 {
            return Err(Error::Config(format!(
                "receiver_noise_temp_k {} K gives G/T {implied:.3} dB/K, configured g_over_t_db is {}",
                self.receiver_noise_temp_k, self.g_over_t_db
            )));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    pub fn satellite(&self) -> Satellite {
        Satellite::geostationary(
            self.satellite_longitude_deg,
            self.satellite_height_m,
            self.earth_radius_m,
        )
    }

    /// Symbol rate B_W / (1 + rolloff).
    pub fn symbol_rate(&self) -> f64 {
        self.bandwidth_hz / (1.0 + self.rolloff)
    }

    /// Amplitude factor common to every entry of the gain matrix for a user at
    /// slant range `d`: G_R / (4π (d/λ) √(K_B T_R B_W)).
    pub fn path_factor(&self, slant_range_m: f64) -> f64 {
        let g_r = 10f64.powf(self.user_antenna_gain_db / 20.0);
        let noise = (self.boltzmann * self.receiver_noise_temp_k * self.bandwidth_hz).sqrt();
        g_r / (4.0 * std::f64::consts::PI * (slant_range_m / self.wavelength_m()) * noise)
    }
}

/// Per-user atmospheric fading, the diagonal of A.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Fading {
    #[default]
    ClearSky,
    /// Rain attenuation in dB drawn i.i.d. log-normal: ln(att_dB) ~ N(mu, sigma).
    LogNormalRain { mu: f64, sigma: f64 },
}

impl Fading {
    /// Amplitude factors for `users` terminals.
    pub fn draw(&self, users: usize, rng_seed: u64) -> Result<Vec<f64>> {
        match *self {
            Fading::ClearSky => Ok(vec![1.0; users]),
            Fading::LogNormalRain { mu, sigma } => {
                let dist = LogNormal::new(mu, sigma)
                    .map_err(|e| Error::Config(format!("rain fade parameters: {e}")))?;
                let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
                Ok((0..users)
                    .map(|_| 10f64.powf(-dist.sample(&mut rng) / 20.0))
                    .collect())
            }
        }
    }
}

/// F = A·G, the real `KQ × N` attenuation matrix normalised to the receiver
/// noise. `fading` holds the diagonal of A (one amplitude per user row).
pub fn build_gain_matrix<T: Real>(
    layout: &BeamLayout,
    users: &UserSet,
    budget: &LinkBudget,
    fading: &[f64],
) -> Result<DMatrix<T>> {
    let rows = users.total();
    if fading.len() != rows {
        return Err(Error::Dimension(format!(
            "fading has {} entries for {rows} users",
            fading.len()
        )));
    }
    if users.beams() != layout.beams() {
        return Err(Error::Dimension(format!(
            "user set covers {} beams, layout has {}",
            users.beams(),
            layout.beams()
        )));
    }
    let sat = budget.satellite();
    let n = layout.feeds();
    let mut f = DMatrix::<T>::zeros(rows, n);
    for (row, (_, _, pos)) in users.iter().enumerate() {
        let d = sat.slant_range(pos);
        if !(d > 0.0) {
            return Err(Error::Geometry(format!("nonpositive slant range for user row {row}")));
        }
        let path = budget.path_factor(d) * fading[row];
        for feed in 0..n {
            let a = feed_gain(layout.feed_boresights[feed], pos, layout, budget);
            f[(row, feed)] = T::lit(path * a);
        }
    }
    Ok(f)
}

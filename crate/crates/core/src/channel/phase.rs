use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::{CMat, Cx, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseVariant {
    /// θ_{q,n} i.i.d. uniform on [0, 2π).
    Uniform,
    /// θ_{q,n} = φ_q + γ_{q,n}: one uniform phase per user plus Gaussian
    /// feed-to-feed jitter.
    #[default]
    UltraStable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseModel {
    pub variant: PhaseVariant,
    /// Standard deviation of the feed jitter, degrees.
    pub chi_deg: f64,
    pub rng_seed: u64,
}

impl PhaseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.chi_deg >= 0.0) || !self.chi_deg.is_finite() {
            return Err(Error::Config(format!("chi_deg must be >= 0, got {}", self.chi_deg)));
        }
        Ok(())
    }
}

/// Unit-modulus phase matrix Φ of shape `rows × cols`.
pub fn build_phase_matrix<T: Real>(model: &PhaseModel, rows: usize, cols: usize) -> Result<CMat<T>> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.rng_seed);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut phases = vec![0.0f64; rows * cols];
    match model.variant {
        PhaseVariant::Uniform => {
            for p in phases.iter_mut() {
                *p = two_pi * rng.random::<f64>();
            }
        }
        PhaseVariant::UltraStable => {
            let jitter = Normal::new(0.0, model.chi_deg.to_radians())
                .map_err(|e| Error::Config(format!("phase jitter: {e}")))?;
            for r in 0..rows {
                let common = two_pi * rng.random::<f64>();
                for c in 0..cols {
                    phases[r * cols + c] = common + jitter.sample(&mut rng);
                }
            }
        }
    }
    Ok(CMat::from_fn(rows, cols, |r, c| {
        let theta = phases[r * cols + c];
        Cx::new(T::lit(theta.cos()), T::lit(theta.sin()))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_unit_modulus() {
        for variant in [PhaseVariant::Uniform, PhaseVariant::UltraStable] {
            let m = PhaseModel { variant, chi_deg: 10.0, rng_seed: 1 };
            let phi = build_phase_matrix::<f64>(&m, 5, 4).unwrap();
            assert!(phi.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        }
    }

    #[test]
    fn zero_jitter_gives_constant_rows() {
        let m = PhaseModel { variant: PhaseVariant::UltraStable, chi_deg: 0.0, rng_seed: 2 };
        let phi = build_phase_matrix::<f64>(&m, 4, 6).unwrap();
        for r in 0..4 {
            for c in 1..6 {
                assert!((phi[(r, c)] - phi[(r, 0)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn negative_chi_rejected() {
        let m = PhaseModel { variant: PhaseVariant::UltraStable, chi_deg: -1.0, rng_seed: 0 };
        assert!(build_phase_matrix::<f64>(&m, 1, 1).is_err());
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ChannelMatrix;
use crate::error::{Error, Result};
use crate::robust::PerturbationBounds;
use crate::scalar::{cx, CMat, Cx, Real};

/// Ĥ = H + Δ with Δ circularly-symmetric Gaussian, rescaled so that
/// ‖Δ‖_F = ratio·‖H‖_F. The returned bounds are tight: γ_k = ‖Δ_k‖²_F.
pub fn perturb_channel<T: Real>(
    h: &ChannelMatrix<T>,
    ratio: T,
    rng_seed: u64,
) -> Result<(ChannelMatrix<T>, CMat<T>, PerturbationBounds<T>)> {
    if !(ratio >= T::zero()) {
        return Err(Error::Config(format!("perturbation ratio must be >= 0, got {ratio}")));
    }
    let (rows, cols) = h.matrix().shape();
    let delta = if ratio == T::zero() {
        CMat::zeros(rows, cols)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let raw = CMat::<T>::from_fn(rows, cols, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Cx::new(T::lit(re), T::lit(im))
        });
        let scale = ratio * h.frobenius_norm() / raw.norm();
        raw.map(|z| z * cx(scale))
    };
    let hat = ChannelMatrix::new(h.matrix() + &delta, h.beams(), h.users_per_beam())?;
    let bounds = PerturbationBounds::from_delta(&delta, h.beams(), h.users_per_beam());
    Ok((hat, delta, bounds))
}

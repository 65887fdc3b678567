//! Worst-case robust variants of both precoding stages.
//!
//! The estimate Ĥ = H + Δ is known together with norm bounds on Δ. The
//! inter-beam stage inflates the spectrum of H̃_kᴴH̃_k by ε_k (a Weyl bound on
//! the Gram perturbation) and applies the first-order eigenvector rotation
//! evaluated at the worst-case perturbation; the intra-beam stage applies the
//! matching first-order correction scaled by ν_k.

use nalgebra::{ComplexField, DVector};
use rayon::prelude::*;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, eigen_gap_coupler, EigDecomposition};
use crate::precoding::{self, diag_c, Precoder, PowerMode};
use crate::scalar::{cx, CMat, CVec, Real};

/// Coupler entries are zeroed when the eigen-gap falls below this fraction
/// of the largest eigenvalue magnitude.
pub const DEGENERACY_FLOOR: f64 = 1e-8;

/// Lower bound on ‖Δ_k‖² used by the intra-beam stage when none is given.
pub const DEFAULT_GAMMA_LOWER: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationBounds<T: Real> {
    /// Bound on ‖Δ‖²_F.
    pub gamma_total: T,
    /// Bounds on ‖Δ_k‖²_F, one per beam.
    pub gamma_k: Vec<T>,
    /// Σ_{l≠k} γ_l.
    pub gamma_tilde_k: Vec<T>,
    /// Lower bounds on ‖Δ_k‖²_F.
    pub gamma_lower_k: Vec<T>,
    /// Spectrum inflation of the inter-beam stage, filled by [`populate`].
    pub epsilon_k: Vec<T>,
    /// Intra-beam correction magnitude, filled by [`populate`].
    pub nu_k: Vec<T>,
}

impl<T: Real> PerturbationBounds<T> {
    /// Per-beam upper bounds; ε, ν and the lower bounds start at zero.
    pub fn from_beam_bounds(gamma_k: Vec<T>) -> Result<Self> {
        if gamma_k.iter().any(|g| !(*g >= T::zero()) || !g.is_finite()) {
            return Err(Error::Config("perturbation bounds must be finite and >= 0".into()));
        }
        let total = gamma_k.iter().fold(T::zero(), |a, &b| a + b);
        let gamma_tilde_k = (0..gamma_k.len())
            .map(|k| {
                gamma_k
                    .iter()
                    .enumerate()
                    .filter(|&(l, _)| l != k)
                    .fold(T::zero(), |a, (_, &b)| a + b)
            })
            .collect();
        let k = gamma_k.len();
        Ok(Self {
            gamma_total: total,
            gamma_k,
            gamma_tilde_k,
            gamma_lower_k: vec![T::zero(); k],
            epsilon_k: vec![T::zero(); k],
            nu_k: vec![T::zero(); k],
        })
    }

    /// Tight bounds of a realized error matrix: γ_k = ‖Δ_k‖²_F.
    pub fn from_delta(delta: &CMat<T>, beams: usize, users_per_beam: usize) -> Self {
        let gamma_k = (0..beams)
            .map(|k| delta.rows(k * users_per_beam, users_per_beam).norm_squared())
            .collect();
        Self::from_beam_bounds(gamma_k).expect("squared norms are nonnegative")
    }

    /// Bounds with every beam at zero uncertainty.
    pub fn zero(beams: usize) -> Self {
        Self::from_beam_bounds(vec![T::zero(); beams]).expect("zero bounds are valid")
    }

    pub fn beams(&self) -> usize {
        self.gamma_k.len()
    }

    /// γ̲_k = min(lower, γ_k).
    pub fn with_lower_bound(mut self, lower: T) -> Result<Self> {
        if !(lower >= T::zero()) || !lower.is_finite() {
            return Err(Error::Config(format!("gamma lower bound must be >= 0, got {lower}")));
        }
        self.gamma_lower_k = self
            .gamma_k
            .iter()
            .map(|&g| if lower < g { lower } else { g })
            .collect();
        Ok(self)
    }

    /// Norm bound γ̂_k = √γ̃_k on the perturbation of H̃_k.
    pub fn gamma_hat(&self, beam: usize) -> T {
        self.gamma_tilde_k[beam].sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.beams();
        if [self.gamma_tilde_k.len(), self.gamma_lower_k.len(), self.epsilon_k.len(), self.nu_k.len()]
            .iter()
            .any(|&l| l != k)
        {
            return Err(Error::Dimension("perturbation bound vectors differ in length".into()));
        }
        for b in 0..k {
            if !(self.gamma_lower_k[b] >= T::zero() && self.gamma_lower_k[b] <= self.gamma_k[b]) {
                return Err(Error::Config(format!("beam {b}: lower bound outside [0, gamma_k]")));
            }
            if !(self.epsilon_k[b] >= T::zero()) || !(self.nu_k[b] >= T::zero()) {
                return Err(Error::Config(format!("beam {b}: negative epsilon or nu")));
            }
        }
        Ok(())
    }
}

/// Squared row norms of Δ, i.e. a tight per-user bound.
pub fn user_bounds<T: Real>(delta: &CMat<T>) -> Vec<T> {
    delta.row_iter().map(|r| r.norm_squared()).collect()
}

/// ε = γ̂² + 2γ̂·σ_max, with σ_max the largest eigenvalue of H̃_kᴴH̃_k.
pub fn epsilon_from<T: Real>(gamma_hat: T, sigma_max: T) -> T {
    gamma_hat * gamma_hat + T::lit(2.0) * gamma_hat * sigma_max
}

/// ε_k for a beam given the spectrum of its interference Gram matrix.
pub fn epsilon_k<T: Real>(gamma_hat: T, eig: &EigDecomposition<T>) -> T {
    epsilon_from(gamma_hat, eig.max_value())
}

/// ΔK = Δ̃ᴴH̃ + H̃ᴴΔ̃ + Δ̃ᴴΔ̃, the exact change of H̃ᴴH̃ under H̃ → H̃ + Δ̃.
pub fn gram_perturbation<T: Real>(h_tilde: &CMat<T>, delta_tilde: &CMat<T>) -> CMat<T> {
    let a = delta_tilde.adjoint() * h_tilde;
    &a + a.adjoint() + delta_tilde.adjoint() * delta_tilde
}

/// Weyl upper bound Σ̃ + εI on the perturbed spectrum.
pub fn weyl_upper<T: Real>(values: &DVector<T>, eps: T) -> DVector<T> {
    values.map(|v| v + eps)
}

/// Number of eigenvalues of `perturbed` exceeding the Weyl bound built from
/// `nominal` (both sorted descending), beyond a relative tolerance.
pub fn weyl_violations<T: Real>(nominal: &DVector<T>, perturbed: &DVector<T>, eps: T) -> usize {
    let bound = weyl_upper(nominal, eps);
    let scale = bound.iter().fold(T::one(), |a, &b| if b.abs() > a { b.abs() } else { a });
    let tol = T::lit(64.0) * T::tolerance_scale() * scale;
    bound
        .iter()
        .zip(perturbed.iter())
        .filter(|&(&b, &p)| p > b + tol)
        .count()
}

/// First-order eigenvector rotation R with V(A + ΔA) ≈ V(I + R):
/// R = D ∘ (Vᴴ ΔA V), D_{g,f} = 1 / (λ_f − λ_g).
pub fn first_order_rotation<T: Real>(eig: &EigDecomposition<T>, delta: &CMat<T>) -> (CMat<T>, usize) {
    let values: Vec<T> = eig.values.iter().copied().collect();
    let (d, zeroed) = eigen_gap_coupler(&values, T::lit(DEGENERACY_FLOOR));
    let projected = eig.vectors.adjoint() * delta * &eig.vectors;
    (projected.zip_map(&d, |p, c| p * cx(c)), zeroed)
}

/// Rotation at the worst-case Gram perturbation ΔK → ε·I, evaluated on the
/// symmetric coupler form ε·D ∘ (Σ + Σ). The coupler has a zero diagonal, so
/// the rotation vanishes for any ε: the worst case inflates eigenvalues but
/// does not turn eigenvectors.
pub fn worst_case_rotation<T: Real>(values: &DVector<T>, eps: T) -> (CMat<T>, usize) {
    let v: Vec<T> = values.iter().copied().collect();
    let (d, zeroed) = eigen_gap_coupler(&v, T::lit(DEGENERACY_FLOOR));
    let sigma = diag_c(&v);
    let twice = &sigma + &sigma;
    (twice.zip_map(&d, |s, c| s * cx(c * eps)), zeroed)
}

/// ν = γ̲·Σ_i (λ_i + ε)^{-1/2}.
pub fn nu_k<T: Real>(gamma_lower: T, values: &[T], eps: T) -> Result<T> {
    if !(gamma_lower >= T::zero()) || !(eps >= T::zero()) {
        return Err(Error::Config("nu needs nonnegative inputs".into()));
    }
    if gamma_lower == T::zero() {
        return Ok(T::zero());
    }
    let mut sum = T::zero();
    for &v in values {
        let d = v + eps;
        if !(d > T::zero()) {
            return Err(Error::Config(format!("nu: regularized eigenvalue {d} is not positive")));
        }
        sum += T::one() / d.sqrt();
    }
    Ok(gamma_lower * sum)
}

/// Per-beam record of the robust design.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamDiagnostics<T: Real> {
    pub beam: usize,
    pub epsilon: T,
    pub nu: T,
    /// Spectrum of H̃_kᴴH̃_k, descending.
    pub inter_spectrum: Vec<T>,
    pub inter_zeroed_pairs: usize,
    pub intra_zeroed_pairs: usize,
    /// The intra-beam correction fell back to the nominal direction.
    pub intra_fallback: bool,
    /// Largest |entry| of the inter-beam rotation R̂_k.
    pub inter_rotation_max: T,
    /// Largest |entry| of the intra-beam correction M̂_k.
    pub intra_correction_max: T,
}

/// Robust inter-beam block Ŵa_k = Ṽ(R̂ + I)(Σ̃ + (c + ε)I)^{-1/2} on the Q
/// retained columns.
pub fn robust_interbeam_block<T: Real>(
    eig: &EigDecomposition<T>,
    users_per_beam: usize,
    reg: T,
    eps: T,
    beam: usize,
) -> Result<(CMat<T>, CMat<T>, usize)> {
    if !(eps >= T::zero()) {
        return Err(Error::Config(format!("beam {beam}: epsilon must be >= 0")));
    }
    let (rotation, zeroed) = worst_case_rotation(&eig.values, eps);
    let block = precoding::whitened_block(eig, users_per_beam, reg + eps, Some(&rotation), beam)?;
    Ok((block, rotation, zeroed))
}

/// Robust inter-beam stage for every beam, using the ε_k in `bounds`.
pub fn robust_interbeam<T: Real>(h_hat: &ChannelMatrix<T>, bounds: &PerturbationBounds<T>, total_power: T) -> Result<CMat<T>> {
    check_bounds(h_hat, bounds)?;
    let reg = precoding::regularization(h_hat.beams(), h_hat.users_per_beam(), total_power);
    let q = h_hat.users_per_beam();
    let blocks: Vec<CMat<T>> = (0..h_hat.beams())
        .into_par_iter()
        .map(|k| {
            let eig = linalg::gram_eigen(&h_hat.without_beam(k));
            robust_interbeam_block(&eig, q, reg, bounds.epsilon_k[k], k).map(|b| b.0)
        })
        .collect::<Result<_>>()?;
    let mut wa = CMat::zeros(h_hat.feeds(), h_hat.beams() * q);
    for (k, b) in blocks.iter().enumerate() {
        wa.columns_mut(k * q, q).copy_from(b);
    }
    Ok(wa)
}

/// Robust intra-beam direction: first column of L(M̂ + I) with
/// M̂ = ν·N ∘ (T + T), renormalized. Falls back to the nominal direction when
/// the two leading eigenvalues of ZᴴZ are degenerate.
pub fn robust_intrabeam<T: Real>(z: &CMat<T>, nu: T, beam: usize) -> Result<(CVec<T>, CMat<T>, usize, bool)> {
    if !(nu >= T::zero()) {
        return Err(Error::Config(format!("beam {beam}: nu must be >= 0")));
    }
    let eig = linalg::gram_eigen(z);
    if eig.dim() == 0 || !(eig.max_value() > T::zero()) {
        return Err(Error::DegenerateBeam { beam });
    }
    let t: Vec<T> = eig.values.iter().copied().collect();
    let (coupler, zeroed) = eigen_gap_coupler(&t, T::lit(DEGENERACY_FLOOR));
    let leading_degenerate = t.len() > 1 && coupler[(0, 1)] == T::zero();
    if leading_degenerate {
        log::warn!("beam {beam}: leading intra-beam eigenvalues are degenerate, using the nominal direction");
        let w = precoding::leading_direction(&eig, beam)?;
        return Ok((w, CMat::zeros(t.len(), t.len()), zeroed, true));
    }
    let tm = diag_c(&t);
    let twice = &tm + &tm;
    let correction = twice.zip_map(&coupler, |s, c| s * cx(c * nu));
    let n = t.len();
    let rotated = &eig.vectors * (&correction + CMat::<T>::identity(n, n));
    let w = linalg::canonical_direction(&rotated.column(0).into_owned()).ok_or(Error::DegenerateBeam { beam })?;
    Ok((w, correction, zeroed, false))
}

fn check_bounds<T: Real>(h: &ChannelMatrix<T>, bounds: &PerturbationBounds<T>) -> Result<()> {
    if bounds.beams() != h.beams() {
        return Err(Error::Dimension(format!(
            "bounds cover {} beams, channel has {}",
            bounds.beams(),
            h.beams()
        )));
    }
    bounds.validate()
}

/// Copy of `bounds` with ε_k and ν_k computed from the estimated channel.
/// ν_k sums over the Q retained regularized eigenvalues λ_i + KQ/P_T.
pub fn populate<T: Real>(h_hat: &ChannelMatrix<T>, bounds: &PerturbationBounds<T>, total_power: T) -> Result<PerturbationBounds<T>> {
    let mut out = bounds.clone();
    out.epsilon_k = vec![T::zero(); bounds.beams()];
    out.nu_k = vec![T::zero(); bounds.beams()];
    check_bounds(h_hat, &out)?;
    let reg = precoding::regularization(h_hat.beams(), h_hat.users_per_beam(), total_power);
    let q = h_hat.users_per_beam();
    for k in 0..h_hat.beams() {
        let eig = linalg::gram_eigen(&h_hat.without_beam(k));
        let eps = epsilon_k(bounds.gamma_hat(k), &eig);
        let n = eig.dim();
        if q > n {
            return Err(Error::Dimension(format!("beam {k}: {q} users per beam exceed {n} feeds")));
        }
        let retained: Vec<T> = eig.values.iter().skip(n - q).map(|&v| v + reg).collect();
        out.epsilon_k[k] = eps;
        out.nu_k[k] = nu_k(bounds.gamma_lower_k[k], &retained, eps)?;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RobustPrecoder<T: Real> {
    pub precoder: Precoder<T>,
    pub bounds: PerturbationBounds<T>,
    pub diagnostics: Vec<BeamDiagnostics<T>>,
}

/// Robust two-stage precoder designed on the estimate `h_hat`.
pub fn robust_two_stage<T: Real>(
    h_hat: &ChannelMatrix<T>,
    bounds: &PerturbationBounds<T>,
    total_power: T,
    mode: PowerMode,
) -> Result<RobustPrecoder<T>> {
    let bounds = populate(h_hat, bounds, total_power)?;
    let reg = precoding::regularization(h_hat.beams(), h_hat.users_per_beam(), total_power);
    let q = h_hat.users_per_beam();
    let per_beam: Vec<(CMat<T>, CVec<T>, BeamDiagnostics<T>)> = (0..h_hat.beams())
        .into_par_iter()
        .map(|k| {
            let eig = linalg::gram_eigen(&h_hat.without_beam(k));
            let eps = bounds.epsilon_k[k];
            let (wa_k, rotation, inter_zeroed) = robust_interbeam_block(&eig, q, reg, eps, k)?;
            let z = h_hat.beam_block(k) * &wa_k;
            let (wb, correction, intra_zeroed, fallback) = robust_intrabeam(&z, bounds.nu_k[k], k)?;
            let diag = BeamDiagnostics {
                beam: k,
                epsilon: eps,
                nu: bounds.nu_k[k],
                inter_spectrum: eig.values.iter().copied().collect(),
                inter_zeroed_pairs: inter_zeroed,
                intra_zeroed_pairs: intra_zeroed,
                intra_fallback: fallback,
                inter_rotation_max: max_abs(&rotation),
                intra_correction_max: max_abs(&correction),
            };
            Ok((wa_k, wb, diag))
        })
        .collect::<Result<_>>()?;
    let mut wa = CMat::zeros(h_hat.feeds(), h_hat.beams() * q);
    let mut wb = Vec::with_capacity(per_beam.len());
    let mut diagnostics = Vec::with_capacity(per_beam.len());
    for (k, (wa_k, wb_k, d)) in per_beam.into_iter().enumerate() {
        wa.columns_mut(k * q, q).copy_from(&wa_k);
        wb.push(wb_k);
        diagnostics.push(d);
    }
    let precoder = Precoder::assemble(wa, &wb, total_power, mode)?;
    Ok(RobustPrecoder { precoder, bounds, diagnostics })
}

fn max_abs<T: Real>(m: &CMat<T>) -> T {
    m.iter().fold(T::zero(), |a, z| if z.modulus() > a { z.modulus() } else { a })
}

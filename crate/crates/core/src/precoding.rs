//! Nominal two-stage precoder W = α·W_a·W_b and the two reference schemes.
//!
//! The inter-beam stage W_a = [W_a1 … W_aK] (`N × KQ`) limits the power
//! each beam leaks into the other beams' users; the intra-beam stage W_b
//! (`KQ × K`, block diagonal) steers each beam inside the span of its W_ak;
//! α enforces the per-feed or total power budget.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, canonical_direction, EigDecomposition};
use crate::scalar::{cx, CMat, CVec, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerMode {
    /// max_n (WWᴴ)_{n,n} = P_T / N.
    #[default]
    PerFeed,
    /// Tr(WWᴴ) = P_T.
    Total,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterBeamKind {
    Mbim,
    Rzf,
}

#[derive(Debug, Clone)]
pub struct Precoder<T: Real> {
    /// `N × KQ`, block column k is W_ak (`N × Q`).
    pub wa: CMat<T>,
    /// `KQ × K`, block diagonal with unit-norm blocks w_bk.
    pub wb: CMat<T>,
    pub alpha: T,
    /// `N × K`, α·W_a·W_b.
    pub w: CMat<T>,
    pub power_mode: PowerMode,
}

impl<T: Real> Precoder<T> {
    /// Combine both stages and scale to the power budget.
    pub fn assemble(wa: CMat<T>, wb_blocks: &[CVec<T>], total_power: T, mode: PowerMode) -> Result<Self> {
        let wb = assemble_wb(wb_blocks);
        if wa.ncols() != wb.nrows() {
            return Err(Error::Dimension(format!(
                "W_a has {} columns, W_b has {} rows",
                wa.ncols(),
                wb.nrows()
            )));
        }
        let w_bar = &wa * &wb;
        let alpha = power_control(&w_bar, total_power, mode)?;
        let w = w_bar.map(|z| z * cx(alpha));
        Ok(Self { wa, wb, alpha, w, power_mode: mode })
    }

    /// Block W_ak.
    pub fn wa_block(&self, beam: usize) -> CMat<T> {
        let q = self.wa.ncols() / self.wb.ncols();
        self.wa.columns(beam * q, q).into_owned()
    }

    /// Block w_bk.
    pub fn wb_block(&self, beam: usize) -> CVec<T> {
        let q = self.wb.nrows() / self.wb.ncols();
        self.wb.view((beam * q, beam), (q, 1)).column(0).into_owned()
    }
}

/// Regularization KQ / P_T shared by every MMSE-type design.
pub fn regularization<T: Real>(beams: usize, users_per_beam: usize, total_power: T) -> T {
    T::from_usize_lossy(beams * users_per_beam) / total_power
}

fn check_power<T: Real>(total_power: T) -> Result<()> {
    if !(total_power > T::zero()) || !total_power.is_finite() {
        return Err(Error::Config(format!("total power must be positive, got {total_power}")));
    }
    Ok(())
}

/// Eigendecomposition of H̃_kᴴH̃_k for every beam.
pub fn beam_gram_spectra<T: Real>(h: &ChannelMatrix<T>) -> Vec<EigDecomposition<T>> {
    (0..h.beams())
        .into_par_iter()
        .map(|k| linalg::gram_eigen(&h.without_beam(k)))
        .collect()
}

/// Whitened block Ṽ·[rotation]·(Σ̃ + reg·I)^{-1/2} restricted to the `q`
/// columns with the smallest eigenvalues (the directions least coupled to
/// the other beams).
pub(crate) fn whitened_block<T: Real>(
    eig: &EigDecomposition<T>,
    q: usize,
    reg: T,
    rotation: Option<&CMat<T>>,
    beam: usize,
) -> Result<CMat<T>> {
    let n = eig.dim();
    if q > n {
        return Err(Error::Dimension(format!(
            "beam {beam}: {q} users per beam exceed {n} feeds"
        )));
    }
    let basis = match rotation {
        Some(r) => &eig.vectors * (r + CMat::<T>::identity(n, n)),
        None => eig.vectors.clone(),
    };
    let first = n - q;
    let mut block = basis.columns(first, q).into_owned();
    for (j, mut col) in block.column_iter_mut().enumerate() {
        let denom = eig.values[first + j] + reg;
        if !(denom > T::zero()) {
            return Err(Error::SingularChannel {
                beam,
                reason: format!("regularized eigenvalue {denom} is not positive"),
            });
        }
        let d = cx(T::one() / denom.sqrt());
        col.iter_mut().for_each(|z| *z *= d);
    }
    if block.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularChannel {
            beam,
            reason: "non-finite whitening block".into(),
        });
    }
    Ok(block)
}

/// MBIM block W_ak = Ṽ_k (Σ̃_k + (KQ/P_T) I)^{-1/2}, Q retained columns.
pub fn mbim_block<T: Real>(eig: &EigDecomposition<T>, users_per_beam: usize, reg: T, beam: usize) -> Result<CMat<T>> {
    whitened_block(eig, users_per_beam, reg, None, beam)
}

/// MBIM inter-beam stage for every beam, `N × KQ`.
pub fn mbim_interbeam<T: Real>(h: &ChannelMatrix<T>, total_power: T) -> Result<CMat<T>> {
    check_power(total_power)?;
    let reg = regularization(h.beams(), h.users_per_beam(), total_power);
    let beams: Vec<usize> = (0..h.beams()).collect();
    let blocks = interbeam_blocks(h, &beams, reg, InterBeamKind::Mbim)?;
    Ok(hstack(&blocks, h.feeds()))
}

/// H^(R) = HHᴴ + (KQ/P_T) I.
pub fn regularized_gram<T: Real>(h: &ChannelMatrix<T>, reg: T) -> CMat<T> {
    let m = h.matrix();
    let mut hr = m * m.adjoint();
    for i in 0..hr.nrows() {
        hr[(i, i)] += cx(reg);
    }
    hr
}

/// H̃_k^(R) (beam k's rows removed from H^(R)) and its `KQ × Q` null-space basis.
pub fn rzf_null_basis<T: Real>(hr: &CMat<T>, beam: usize, users_per_beam: usize) -> Result<(CMat<T>, CMat<T>)> {
    let reduced = hr.clone().remove_rows(beam * users_per_beam, users_per_beam);
    let basis = linalg::null_space(&reduced, users_per_beam, beam)?;
    Ok((reduced, basis))
}

/// Regularized zero-forcing inter-beam stage, W_ak = Hᴴ Ṽ_k^{(R),0}.
pub fn rzf_interbeam<T: Real>(h: &ChannelMatrix<T>, total_power: T) -> Result<CMat<T>> {
    check_power(total_power)?;
    let reg = regularization(h.beams(), h.users_per_beam(), total_power);
    let beams: Vec<usize> = (0..h.beams()).collect();
    let blocks = interbeam_blocks(h, &beams, reg, InterBeamKind::Rzf)?;
    Ok(hstack(&blocks, h.feeds()))
}

/// Inter-beam blocks for `beams` only, against the interference seen in all
/// rows of `h`.
pub(crate) fn interbeam_blocks<T: Real>(
    h: &ChannelMatrix<T>,
    beams: &[usize],
    reg: T,
    kind: InterBeamKind,
) -> Result<Vec<CMat<T>>> {
    let q = h.users_per_beam();
    match kind {
        InterBeamKind::Mbim => beams
            .par_iter()
            .map(|&k| mbim_block(&linalg::gram_eigen(&h.without_beam(k)), q, reg, k))
            .collect(),
        InterBeamKind::Rzf => {
            let hr = regularized_gram(h, reg);
            let h_adj = h.matrix().adjoint();
            beams
                .par_iter()
                .map(|&k| rzf_null_basis(&hr, k, q).map(|(_, v0)| &h_adj * v0))
                .collect()
        }
    }
}

fn hstack<T: Real>(blocks: &[CMat<T>], rows: usize) -> CMat<T> {
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.columns_mut(c, b.ncols()).copy_from(b);
        c += b.ncols();
    }
    out
}

/// Unit-norm maximiser of ‖Z w‖²: the leading eigenvector of ZᴴZ (leading
/// right singular vector of Z), phase-normalised.
pub fn intrabeam<T: Real>(z: &CMat<T>, beam: usize) -> Result<CVec<T>> {
    let eig = linalg::gram_eigen(z);
    leading_direction(&eig, beam)
}

pub(crate) fn leading_direction<T: Real>(eig: &EigDecomposition<T>, beam: usize) -> Result<CVec<T>> {
    if eig.dim() == 0 || !(eig.max_value() > T::zero()) {
        return Err(Error::DegenerateBeam { beam });
    }
    canonical_direction(&eig.vectors.column(0).into_owned()).ok_or(Error::DegenerateBeam { beam })
}

/// Block-diagonal W_b from per-beam blocks.
pub fn assemble_wb<T: Real>(blocks: &[CVec<T>]) -> CMat<T> {
    let mats: Vec<CMat<T>> = blocks
        .iter()
        .map(|b| CMat::from_column_slice(b.len(), 1, b.as_slice()))
        .collect();
    linalg::block_diag(&mats)
}

/// Power-normalization factor α for W̄ = W_a·W_b.
pub fn power_control<T: Real>(w_bar: &CMat<T>, total_power: T, mode: PowerMode) -> Result<T> {
    check_power(total_power)?;
    let feed_power: Vec<T> = w_bar.row_iter().map(|r| r.norm_squared()).collect();
    let load = match mode {
        PowerMode::PerFeed => {
            let max = feed_power.iter().copied().fold(T::zero(), |a, b| if b > a { b } else { a });
            T::from_usize_lossy(w_bar.nrows()) * max
        }
        PowerMode::Total => feed_power.iter().copied().fold(T::zero(), |a, b| a + b),
    };
    if !(load > T::zero()) || !load.is_finite() {
        return Err(Error::ZeroPrecoder);
    }
    Ok((total_power / load).sqrt())
}

/// Full nominal two-stage precoder.
pub fn two_stage<T: Real>(h: &ChannelMatrix<T>, total_power: T, kind: InterBeamKind, mode: PowerMode) -> Result<Precoder<T>> {
    let wa = match kind {
        InterBeamKind::Mbim => mbim_interbeam(h, total_power)?,
        InterBeamKind::Rzf => rzf_interbeam(h, total_power)?,
    };
    let wb = intrabeam_all(h, &wa)?;
    Precoder::assemble(wa, &wb, total_power, mode)
}

/// w_bk for every beam given the assembled W_a.
pub fn intrabeam_all<T: Real>(h: &ChannelMatrix<T>, wa: &CMat<T>) -> Result<Vec<CVec<T>>> {
    let q = h.users_per_beam();
    (0..h.beams())
        .into_par_iter()
        .map(|k| intrabeam(&(h.beam_block(k) * wa.columns(k * q, q)), k))
        .collect()
}

/// Unnormalised W̄ (`N × beams.len()`) for a subset of beams: the inter-beam
/// stage of `kind` followed by the intra-beam stage.
pub(crate) fn unnormalized_for_beams<T: Real>(
    h: &ChannelMatrix<T>,
    beams: &[usize],
    reg: T,
    kind: InterBeamKind,
) -> Result<CMat<T>> {
    let blocks = interbeam_blocks(h, beams, reg, kind)?;
    let mut w = CMat::zeros(h.feeds(), beams.len());
    for (j, (&k, wa_k)) in beams.iter().zip(&blocks).enumerate() {
        let wb = intrabeam(&(h.beam_block(k) * wa_k), k)?;
        w.set_column(j, &(wa_k * wb));
    }
    Ok(w)
}

/// Average-MMSE reference: rows of H averaged per beam into H̄ (`K × N`),
/// W = H̄ᴴ(H̄H̄ᴴ + (KQ/P_T) I)^{-1}, then power control.
pub fn baseline_avg_mmse<T: Real>(h: &ChannelMatrix<T>, total_power: T, mode: PowerMode) -> Result<CMat<T>> {
    check_power(total_power)?;
    let k = h.beams();
    let q = h.users_per_beam();
    let inv_q = cx(T::one() / T::from_usize_lossy(q));
    let mut h_bar = CMat::zeros(k, h.feeds());
    for b in 0..k {
        let block = h.beam_block(b);
        let mut row = block.row(0).into_owned();
        for u in 1..q {
            row += block.row(u);
        }
        h_bar.set_row(b, &(row * inv_q));
    }
    let reg = regularization(k, q, total_power);
    let mut a = &h_bar * h_bar.adjoint();
    for i in 0..k {
        a[(i, i)] += cx(reg);
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::SingularChannel { beam: 0, reason: "H̄H̄ᴴ + cI not positive definite".into() })?;
    let w_bar = chol.solve(&h_bar).adjoint();
    let alpha = power_control(&w_bar, total_power, mode)?;
    Ok(w_bar.map(|z| z * cx(alpha)))
}

/// Fraction of the band each beam gets under reuse-4.
pub const FOUR_COLOR_BANDWIDTH: f64 = 0.25;

/// Unprecoded reuse-4 transmission: each beam on its own feed group, every
/// feed at P_T / N.
pub fn four_color_transmit<T: Real>(beams: usize, feeds_per_beam: usize, total_power: T) -> CMat<T> {
    let n = beams * feeds_per_beam;
    let amp = (total_power / T::from_usize_lossy(n)).sqrt();
    CMat::from_fn(n, beams, |feed, beam| {
        if feed / feeds_per_beam == beam {
            cx(amp)
        } else {
            cx(T::zero())
        }
    })
}

/// Per-user SINR of the reuse-4 reference: only co-coloured beams interfere.
/// The noise normalization is the same as for the precoded schemes; the
/// quarter band enters through the rate mapping only.
pub fn baseline_four_color<T: Real>(
    h: &ChannelMatrix<T>,
    colors: &[u8],
    feeds_per_beam: usize,
    total_power: T,
) -> Result<Vec<T>> {
    check_power(total_power)?;
    if colors.len() != h.beams() || colors.iter().any(|&c| c > 3) {
        return Err(Error::Config("invalid 4-colouring for this channel".into()));
    }
    if h.feeds() != h.beams() * feeds_per_beam {
        return Err(Error::Config(format!(
            "{} feeds do not match {} beams x {feeds_per_beam}",
            h.feeds(),
            h.beams()
        )));
    }
    let w = four_color_transmit(h.beams(), feeds_per_beam, total_power);
    let mut out = Vec::with_capacity(h.users());
    for k in 0..h.beams() {
        for q in 0..h.users_per_beam() {
            out.push(crate::evaluate::sinr_with(h, &w, k, q, T::one(), |j| colors[j] == colors[k]));
        }
    }
    Ok(out)
}

/// Feed powers diag(WWᴴ).
pub fn feed_powers<T: Real>(w: &CMat<T>) -> Vec<T> {
    w.row_iter().map(|r| r.norm_squared()).collect()
}

/// Real diagonal matrix as complex.
pub(crate) fn diag_c<T: Real>(d: &[T]) -> CMat<T> {
    let real = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d));
    real.map(cx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_channel(k: usize, q: usize, n: usize, seed: u64) -> ChannelMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = CMat::from_fn(k * q, n, |_, _| Complex::new(rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0));
        ChannelMatrix::new(h, k, q).unwrap()
    }

    #[test]
    fn mbim_whitening_identity() {
        let h = random_channel(3, 2, 6, 1);
        let p = 10.0;
        let wa = mbim_interbeam(&h, p).unwrap();
        let reg = regularization(3, 2, p);
        for k in 0..3 {
            let ht = h.without_beam(k);
            let mut m = ht.adjoint() * &ht;
            for i in 0..6 {
                m[(i, i)] += Complex::new(reg, 0.0);
            }
            let blk = wa.columns(2 * k, 2);
            let id = blk.adjoint() * m * blk;
            assert!((id - CMat::<f64>::identity(2, 2)).norm() < 1e-10);
        }
    }

    #[test]
    fn mbim_single_beam_is_scaled_identity() {
        let h = random_channel(1, 2, 4, 2);
        let wa = mbim_interbeam(&h, 8.0).unwrap();
        let s = (8.0f64 / 2.0).sqrt();
        let mut want = CMat::zeros(4, 2);
        want[(2, 0)] = Complex::new(s, 0.0);
        want[(3, 1)] = Complex::new(s, 0.0);
        assert!((wa - want).norm() < 1e-14);
    }

    #[test]
    fn mbim_high_power_limit() {
        // (K−1)Q = N keeps every H̃_kᴴH̃_k full rank
        let h = random_channel(4, 2, 6, 3);
        let wa = mbim_interbeam(&h, 1e9).unwrap();
        for k in 0..4 {
            let eig = linalg::gram_eigen(&h.without_beam(k));
            for j in 0..2 {
                let idx = 4 + j;
                let expect = eig.vectors.column(idx) / Complex::new(eig.values[idx].sqrt(), 0.0);
                let got = wa.column(2 * k + j);
                // eigenvectors are unique up to phase
                let phase = expect.dotc(&got) / Complex::new(expect.norm_squared(), 0.0);
                assert!((phase.norm() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rzf_null_space_residual() {
        let h = random_channel(3, 2, 6, 4);
        let hr = regularized_gram(&h, regularization(3, 2, 5.0));
        for k in 0..3 {
            let (reduced, v0) = rzf_null_basis(&hr, k, 2).unwrap();
            assert_eq!(reduced.shape(), (4, 6));
            assert!((&reduced * &v0).norm() <= 1e-8 * reduced.norm());
        }
    }

    #[test]
    fn rzf_single_beam() {
        let h = random_channel(1, 2, 3, 5);
        let wa = rzf_interbeam(&h, 1.0).unwrap();
        let gram = wa.adjoint() * &wa;
        let hh = h.matrix() * h.matrix().adjoint();
        // W_a = Hᴴ U with U unitary, so W_aᴴW_a is unitarily similar to HHᴴ
        assert!((gram.trace() - hh.trace()).norm() < 1e-10);
    }

    #[test]
    fn rzf_reduces_cross_beam_leakage() {
        let h = random_channel(3, 2, 6, 6);
        let p = 100.0;
        let wa = rzf_interbeam(&h, p).unwrap();
        let h_adj = h.matrix().adjoint();
        for k in 0..3 {
            let wa_k = wa.columns(2 * k, 2);
            let plain = h_adj.columns(2 * k, 2);
            for j in (0..3).filter(|&j| j != k) {
                let hj = h.beam_block(j);
                let leak = (&hj * wa_k).norm() / wa_k.norm();
                let unprecoded = (&hj * plain).norm() / plain.norm();
                assert!(leak < unprecoded, "beam {k} -> {j}: {leak} vs {unprecoded}");
            }
        }
    }

    #[test]
    fn intrabeam_cases() {
        let z = CMat::from_row_slice(2, 2, &[Complex::new(3.0, 0.0), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0), Complex::new(1.0, 0.0)]);
        let w = intrabeam(&z, 0).unwrap();
        assert!((w[0] - Complex::new(1.0, 0.0)).norm() < 1e-14 && w[1].norm() < 1e-14);

        let z1 = CMat::from_element(1, 1, Complex::new(0.0, -2.0));
        assert!((intrabeam(&z1, 0).unwrap()[0] - Complex::new(1.0, 0.0)).norm() < 1e-15);

        assert_eq!(intrabeam(&CMat::<f64>::zeros(2, 2), 3), Err(Error::DegenerateBeam { beam: 3 }));
    }

    #[test]
    fn power_control_modes() {
        let mut w = CMat::zeros(4, 2);
        w[(0, 0)] = Complex::new(0.5, 0.0);
        w[(1, 1)] = Complex::new(0.25, 0.0);
        // max feed power already P_T/N
        assert_eq!(power_control(&w, 1.0, PowerMode::PerFeed).unwrap(), 1.0);

        let w2 = CMat::from_element(2, 2, Complex::new(1.0, 0.0));
        assert_eq!(power_control(&w2, 1.0, PowerMode::Total).unwrap(), 0.5);

        assert_eq!(power_control(&CMat::<f64>::zeros(3, 3), 1.0, PowerMode::Total), Err(Error::ZeroPrecoder));
    }

    #[test]
    fn per_feed_constraint_tight() {
        let h = random_channel(4, 2, 8, 7);
        for kind in [InterBeamKind::Mbim, InterBeamKind::Rzf] {
            let pc = two_stage(&h, 20.0, kind, PowerMode::PerFeed).unwrap();
            let powers = feed_powers(&pc.w);
            let max = powers.iter().cloned().fold(0.0, f64::max);
            assert!((max - 20.0 / 8.0).abs() <= 1e-9 * 2.5);
            for k in 0..4 {
                assert!((pc.wb_block(k).norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn avg_mmse_single_user_is_regularized_inverse() {
        let h = random_channel(3, 1, 4, 8);
        let w = baseline_avg_mmse(&h, 2.0, PowerMode::Total).unwrap();
        let m = h.matrix();
        let mut a = m * m.adjoint();
        for i in 0..3 {
            a[(i, i)] += Complex::new(3.0 / 2.0, 0.0);
        }
        let direct = m.adjoint() * a.try_inverse().unwrap();
        let alpha = power_control(&direct, 2.0, PowerMode::Total).unwrap();
        assert!((w - direct * Complex::new(alpha, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn avg_mmse_duplicate_users_match_single_user() {
        let h1 = random_channel(3, 1, 4, 9);
        let blocks: Vec<CMat<f64>> = (0..3)
            .map(|k| {
                let r = h1.beam_block(k);
                CMat::from_fn(2, 4, |_, j| r[(0, j)])
            })
            .collect();
        let h2 = ChannelMatrix::from_beam_blocks(&blocks).unwrap();
        // same P_T/KQ ratio keeps the regularization equal
        let a = baseline_avg_mmse(&h1, 1.0, PowerMode::PerFeed).unwrap();
        let b = baseline_avg_mmse(&h2, 2.0, PowerMode::PerFeed).unwrap();
        let scale = Complex::new((1.0f64 / 2.0).sqrt(), 0.0);
        assert!((a - b * scale).norm() < 1e-10);
    }

    #[test]
    fn four_color_isolated_beam_has_no_interference() {
        let h = random_channel(2, 1, 2, 10);
        let sinr = baseline_four_color(&h, &[0, 1], 1, 2.0).unwrap();
        let w = four_color_transmit::<f64>(2, 1, 2.0);
        let signal = (h.user_row(0, 0) * w.column(0))[(0, 0)].norm_sqr();
        assert!((sinr[0] - signal).abs() < 1e-12 * sinr[0]);
    }

    #[test]
    fn four_color_equal_cochannel_beams_saturate_at_unity() {
        let h = CMat::from_element(2, 2, Complex::new(1.0, 0.0));
        let h = ChannelMatrix::new(h, 2, 1).unwrap();
        let sinr: Vec<f64> = baseline_four_color(&h, &[2, 2], 1, 1e9).unwrap();
        assert!((sinr[0] - 1.0).abs() < 1e-6);
        assert!(baseline_four_color(&h, &[2, 4], 1, 1.0).is_err());
    }
}

//! Multibeam downlink channel H = F ∘ Φ.

mod budget;
mod geometry;
mod layout;
mod pattern;
mod perturb;
mod phase;

pub use budget::{build_gain_matrix, noise_temperature_from_g_over_t, Fading, LinkBudget, BOLTZMANN, SPEED_OF_LIGHT};
pub use geometry::{angle_between, offset_direction, tangent_basis, LatLon, Satellite, Vec3};
pub use layout::{hex_layout, place_users, BeamLayout, HexLayoutParams, UserSet};
pub use pattern::{airy_amplitude, feed_gain, half_power_u, FeedPattern, DEFAULT_APERTURE_EFFICIENCY, FIRST_NULL_U};
pub use perturb::perturb_channel;
pub use phase::{build_phase_matrix, PhaseModel, PhaseVariant};

use nalgebra::{DMatrix, RowDVector};

use crate::error::{Error, Result};
use crate::scalar::{cx, CMat, Cx, Real};

/// Channel matrix of `K` beams with `Q` users each; row `k·Q + q` holds the
/// channel of user `q` in beam `k` towards the `N` feeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix<T: Real> {
    h: CMat<T>,
    beams: usize,
    users_per_beam: usize,
}

impl<T: Real> ChannelMatrix<T> {
    pub fn new(h: CMat<T>, beams: usize, users_per_beam: usize) -> Result<Self> {
        if beams == 0 || users_per_beam == 0 {
            return Err(Error::Dimension("need at least one beam and one user per beam".into()));
        }
        if h.nrows() != beams * users_per_beam {
            return Err(Error::Dimension(format!(
                "{} rows for {beams} beams x {users_per_beam} users",
                h.nrows()
            )));
        }
        if h.ncols() == 0 {
            return Err(Error::Dimension("channel has no feeds".into()));
        }
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Dimension("channel has non-finite entries".into()));
        }
        Ok(Self { h, beams, users_per_beam })
    }

    /// Stack per-beam blocks `H_1 … H_K` (each `Q × N`).
    pub fn from_beam_blocks(blocks: &[CMat<T>]) -> Result<Self> {
        let q = blocks.first().map_or(0, |b| b.nrows());
        let n = blocks.first().map_or(0, |b| b.ncols());
        if blocks.iter().any(|b| b.shape() != (q, n)) {
            return Err(Error::Dimension("beam blocks differ in shape".into()));
        }
        let mut h = CMat::zeros(blocks.len() * q, n);
        for (k, b) in blocks.iter().enumerate() {
            h.view_mut((k * q, 0), (q, n)).copy_from(b);
        }
        Self::new(h, blocks.len(), q)
    }

    pub fn matrix(&self) -> &CMat<T> {
        &self.h
    }

    pub fn into_matrix(self) -> CMat<T> {
        self.h
    }

    pub fn beams(&self) -> usize {
        self.beams
    }

    pub fn users_per_beam(&self) -> usize {
        self.users_per_beam
    }

    pub fn feeds(&self) -> usize {
        self.h.ncols()
    }

    pub fn users(&self) -> usize {
        self.h.nrows()
    }

    pub fn row_index(&self, beam: usize, user: usize) -> usize {
        beam * self.users_per_beam + user
    }

    /// H_k, the `Q × N` block of beam `k`.
    pub fn beam_block(&self, beam: usize) -> CMat<T> {
        self.h.rows(beam * self.users_per_beam, self.users_per_beam).into_owned()
    }

    /// h_{k,q} as a row vector.
    pub fn user_row(&self, beam: usize, user: usize) -> RowDVector<Cx<T>> {
        self.h.row(self.row_index(beam, user)).into_owned()
    }

    /// H̃_k: every beam but `k`, `(K−1)Q × N`.
    pub fn without_beam(&self, beam: usize) -> CMat<T> {
        self.h.clone().remove_rows(beam * self.users_per_beam, self.users_per_beam)
    }

    /// Inverse of [`without_beam`](Self::without_beam).
    pub fn reinsert_beam(others: &CMat<T>, beam: usize, block: &CMat<T>) -> Result<Self> {
        let q = block.nrows();
        if q == 0 || !others.nrows().is_multiple_of(q) || others.ncols() != block.ncols() {
            return Err(Error::Dimension("blocks do not fit together".into()));
        }
        let beams = others.nrows() / q + 1;
        if beam >= beams {
            return Err(Error::Dimension(format!("beam {beam} out of range")));
        }
        let mut h = CMat::zeros(beams * q, block.ncols());
        h.rows_mut(0, beam * q).copy_from(&others.rows(0, beam * q));
        h.rows_mut(beam * q, q).copy_from(block);
        let rest = others.nrows() - beam * q;
        h.rows_mut((beam + 1) * q, rest).copy_from(&others.rows(beam * q, rest));
        Self::new(h, beams, q)
    }

    /// Keep the users in `selection[k]` for every beam, in the listed order.
    pub fn select_users(&self, selection: &[Vec<usize>]) -> Result<Self> {
        if selection.len() != self.beams {
            return Err(Error::Dimension("selection must list every beam".into()));
        }
        let q = selection[0].len();
        let mut rows = Vec::with_capacity(self.beams * q);
        for (k, sel) in selection.iter().enumerate() {
            if sel.len() != q {
                return Err(Error::Dimension("uneven selection".into()));
            }
            for &u in sel {
                if u >= self.users_per_beam {
                    return Err(Error::Dimension(format!("user {u} not in beam {k}")));
                }
                rows.push(self.row_index(k, u));
            }
        }
        Self::new(crate::linalg::select_rows(&self.h, &rows), self.beams, q)
    }

    /// Keep feed columns `cols`.
    pub fn feed_columns(&self, cols: std::ops::Range<usize>) -> Result<Self> {
        Self::new(self.h.columns(cols.start, cols.len()).into_owned(), self.beams, self.users_per_beam)
    }

    pub fn frobenius_norm(&self) -> T {
        self.h.norm()
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            h: self.h.map(|z| z * cx(c)),
            beams: self.beams,
            users_per_beam: self.users_per_beam,
        }
    }
}

/// H = F ∘ Φ for `beams` equally populated beams.
pub fn assemble_channel<T: Real>(f: &DMatrix<T>, phi: &CMat<T>, beams: usize) -> Result<ChannelMatrix<T>> {
    if f.shape() != phi.shape() {
        return Err(Error::Dimension(format!(
            "F is {:?}, Φ is {:?}",
            f.shape(),
            phi.shape()
        )));
    }
    if beams == 0 || !f.nrows().is_multiple_of(beams) {
        return Err(Error::Dimension(format!("{} rows do not split into {beams} beams", f.nrows())));
    }
    let h = CMat::from_fn(f.nrows(), f.ncols(), |i, j| phi[(i, j)] * cx(f[(i, j)]));
    ChannelMatrix::new(h, beams, f.nrows() / beams)
}

/// Full channel for a user set: gains, fading and phases.
pub fn realize_channel<T: Real>(
    layout: &BeamLayout,
    users: &UserSet,
    budget: &LinkBudget,
    fading: &[f64],
    phase: &PhaseModel,
) -> Result<ChannelMatrix<T>> {
    let f = build_gain_matrix::<T>(layout, users, budget, fading)?;
    let phi = build_phase_matrix::<T>(phase, f.nrows(), f.ncols())?;
    assemble_channel(&f, &phi, layout.beams())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Complex;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn hand_hadamard() {
        let f = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let phi = CMat::from_row_slice(2, 2, &[c(1., 0.), c(-1., 0.), c(0., 1.), c(0., -1.)]);
        let h = assemble_channel(&f, &phi, 1).unwrap();
        let want = CMat::from_row_slice(2, 2, &[c(1., 0.), c(-2., 0.), c(0., 3.), c(0., -4.)]);
        assert_eq!(h.matrix(), &want);
    }

    #[test]
    fn zero_phase_is_identity() {
        let f = DMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 + 0.5);
        let ones = CMat::from_element(4, 3, c(1.0, 0.0));
        let h = assemble_channel(&f, &ones, 2).unwrap();
        assert_eq!(h.matrix(), &f.map(|x| c(x, 0.0)));
        assert_eq!(h.users_per_beam(), 2);
    }

    #[test]
    fn dimension_mismatch() {
        let f = DMatrix::<f64>::zeros(2, 2);
        let phi = CMat::<f64>::zeros(2, 3);
        assert!(matches!(assemble_channel(&f, &phi, 1), Err(Error::Dimension(_))));
    }

    #[test]
    fn beam_views_and_round_trip() {
        let h = CMat::from_fn(6, 4, |i, j| c(i as f64, j as f64));
        let ch = ChannelMatrix::new(h.clone(), 3, 2).unwrap();
        for k in 0..3 {
            let others = ch.without_beam(k);
            assert_eq!(others.nrows(), 4);
            let back = ChannelMatrix::reinsert_beam(&others, k, &ch.beam_block(k)).unwrap();
            assert_eq!(back, ch);
        }
        assert_eq!(ch.user_row(1, 1), h.row(3).into_owned());
        let blocks: Vec<_> = (0..3).map(|k| ch.beam_block(k)).collect();
        assert_eq!(ChannelMatrix::from_beam_blocks(&blocks).unwrap(), ch);
    }

    #[test]
    fn select_users_picks_rows() {
        let h = CMat::from_fn(6, 2, |i, _| c(i as f64, 0.0));
        let ch = ChannelMatrix::new(h, 2, 3).unwrap();
        let sel = ch.select_users(&[vec![2], vec![0]]).unwrap();
        assert_eq!(sel.matrix()[(0, 0)].re, 2.0);
        assert_eq!(sel.matrix()[(1, 0)].re, 3.0);
        assert!(ch.select_users(&[vec![3], vec![0]]).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let mut h = CMat::<f64>::zeros(2, 2);
        h[(0, 0)] = c(f64::NAN, 0.0);
        assert!(ChannelMatrix::new(h, 1, 2).is_err());
    }
}

//! Dense complex helpers on top of nalgebra: sorted Hermitian
//! eigendecompositions, null spaces and a few Hadamard-product utilities.

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{cx, CMat, CVec, Real};

/// Eigendecomposition of a Hermitian matrix, `A = V diag(values) Vᴴ`.
///
/// Eigenvalues are sorted descending; ties keep the order in which the
/// solver produced them.
#[derive(Debug, Clone)]
pub struct EigDecomposition<T: Real> {
    pub values: DVector<T>,
    pub vectors: CMat<T>,
}

impl<T: Real> EigDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max_value(&self) -> T {
        if self.values.is_empty() {
            T::zero()
        } else {
            self.values[0]
        }
    }

    pub fn reconstruct(&self) -> CMat<T> {
        let d = DMatrix::from_diagonal(&self.values.map(cx));
        &self.vectors * d * self.vectors.adjoint()
    }

    /// Decomposition of the `n × n` zero matrix: zero spectrum, identity basis.
    pub fn zero(n: usize) -> Self {
        Self {
            values: DVector::zeros(n),
            vectors: CMat::identity(n, n),
        }
    }
}

/// Eigendecomposition of the Hermitian part of `a`.
pub fn hermitian_eigen<T: Real>(a: &CMat<T>) -> EigDecomposition<T> {
    assert!(a.is_square(), "hermitian_eigen needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return EigDecomposition::zero(0);
    }
    let half = T::lit(0.5);
    let herm = (a + a.adjoint()).map(|z| z * half);
    let eig = herm.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    EigDecomposition { values, vectors }
}

/// Eigendecomposition of the Gram matrix `mᴴ m`.
pub fn gram_eigen<T: Real>(m: &CMat<T>) -> EigDecomposition<T> {
    if m.nrows() == 0 {
        return EigDecomposition::zero(m.ncols());
    }
    hermitian_eigen(&(m.adjoint() * m))
}

/// Largest singular value (spectral norm).
pub fn spectral_norm<T: Real>(m: &CMat<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}

/// Orthonormal basis (`ncols × dim`) of vectors annihilated by `m`.
///
/// Uses a Householder QR of `mᴴ` padded with zero columns to a square
/// matrix: the trailing columns of the unitary factor are orthogonal to the
/// row space of `m` regardless of its rank.
pub fn null_space<T: Real>(m: &CMat<T>, dim: usize, beam: usize) -> Result<CMat<T>> {
    let cols = m.ncols();
    let rows = m.nrows();
    if rows + dim > cols {
        return Err(Error::Infeasible {
            beam,
            needed: dim,
            available: cols.saturating_sub(rows),
        });
    }
    if rows == 0 {
        return Ok(CMat::identity(cols, dim));
    }
    let mut padded = CMat::zeros(cols, cols);
    padded.view_mut((0, 0), (cols, rows)).copy_from(&m.adjoint());
    let q = padded.qr().q();
    Ok(q.columns(cols - dim, dim).into_owned())
}

/// Rotate `v` so its largest-magnitude entry is real and positive, then
/// scale it to unit norm.
pub fn canonical_direction<T: Real>(v: &CVec<T>) -> Option<CVec<T>> {
    let norm = v.norm();
    if !(norm > T::zero()) || !norm.is_finite() {
        return None;
    }
    let mut pivot = 0;
    let mut best = T::zero();
    for (i, z) in v.iter().enumerate() {
        let m = z.modulus();
        if m > best {
            best = m;
            pivot = i;
        }
    }
    let phase = v[pivot] / cx(v[pivot].modulus());
    let rot = phase.conj();
    Some(v.map(|z| z * rot / cx(norm)))
}

/// Entry (g, f) = 1 / (λ_f − λ_g) off the diagonal, zero on it and wherever
/// the gap is below `floor_rel · max|λ|`. Returns the matrix and the number of
/// zeroed off-diagonal pairs.
pub fn eigen_gap_coupler<T: Real>(values: &[T], floor_rel: T) -> (DMatrix<T>, usize) {
    let n = values.len();
    let scale = values
        .iter()
        .fold(T::zero(), |a, &b| if b.abs() > a { b.abs() } else { a });
    let floor = floor_rel * scale;
    let mut zeroed = 0;
    let d = DMatrix::from_fn(n, n, |g, f| {
        if g == f {
            return T::zero();
        }
        let gap = values[f] - values[g];
        if gap.abs() < floor || gap == T::zero() {
            if g < f {
                zeroed += 1;
            }
            T::zero()
        } else {
            T::one() / gap
        }
    });
    (d, zeroed)
}

/// Rows of `m` listed in `rows`, in that order.
pub fn select_rows<T: Real>(m: &CMat<T>, rows: &[usize]) -> CMat<T> {
    CMat::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Block-diagonal concatenation.
pub fn block_diag<T: Real>(blocks: &[CMat<T>]) -> CMat<T> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Sine of the angle between the lines spanned by `a` and `b`.
pub fn line_angle_sin<T: Real>(a: &CVec<T>, b: &CVec<T>) -> T {
    let na = a.norm();
    let nb = b.norm();
    let ua = a.map(|z| z / cx(na));
    let ub = b.map(|z| z / cx(nb));
    let proj = ua.dotc(&ub);
    (&ub - &ua * proj).norm()
}

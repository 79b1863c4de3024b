//! Dense complex linear algebra shared by the estimators.
//!
//! Matrices are `nalgebra` values; decompositions (Hermitian EVD, SVD,
//! general eigenvalues) are delegated to `faer`.

use faer::{Mat, MatRef, Side};
use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative singular-value tolerance used for every pseudo-inverse and rank decision.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Returns `(m + m^H) / 2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

fn to_faer(m: &CMatrix) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: MatRef<'_, C64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
///
/// Only the lower triangle is read. Ties are broken by ascending position in
/// the solver's output so the ordering is deterministic.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let evd = to_faer(m)
        .self_adjoint_eigen(Side::Lower)
        .expect("self-adjoint eigensolver failed to converge");
    let raw: Vec<f64> = (0..n).map(|i| evd.S().column_vector()[i].re).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]).then(a.cmp(&b)));
    let u = evd.U();
    let values = order.iter().map(|&i| raw[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| u[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues only, in descending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut values = to_faer(m)
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("self-adjoint eigensolver failed to converge");
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Eigenvalues of a general square complex matrix, or `None` if the QR
/// iteration fails to converge.
pub fn eigenvalues(m: &CMatrix) -> Option<Vec<C64>> {
    to_faer(m).eigenvalues().ok()
}

struct ThinSvd {
    u: CMatrix,
    singular_values: Vec<f64>,
    v: CMatrix,
}

/// Thin SVD with singular values in non-increasing order.
fn thin_svd(m: &CMatrix) -> ThinSvd {
    let svd = to_faer(m).thin_svd().expect("SVD failed to converge");
    let k = m.nrows().min(m.ncols());
    ThinSvd {
        u: from_faer(svd.U()),
        singular_values: (0..k).map(|i| svd.S().column_vector()[i].re).collect(),
        v: from_faer(svd.V()),
    }
}

/// Orthonormal basis of the column space, obtained from a thin SVD.
#[derive(Debug, Clone)]
pub struct RangeBasis {
    pub basis: CMatrix,
    pub rank: usize,
    /// Ratio of the largest to the smallest singular value (infinite when one vanishes).
    pub condition: f64,
}

pub fn range_basis(m: &CMatrix) -> RangeBasis {
    let svd = thin_svd(m);
    let (rank, condition) = rank_and_condition(&svd.singular_values);
    RangeBasis {
        basis: svd.u.columns(0, rank).into_owned(),
        rank,
        condition,
    }
}

/// Moore-Penrose pseudo-inverse with the singular-value cut at [`RANK_TOLERANCE`]
/// relative to the largest singular value.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pub matrix: CMatrix,
    pub rank: usize,
    pub condition: f64,
}

impl PseudoInverse {
    pub fn full_rank(&self) -> bool {
        self.rank == self.matrix.nrows()
    }
}

pub fn pseudo_inverse(m: &CMatrix) -> PseudoInverse {
    let svd = thin_svd(m);
    let sv = &svd.singular_values;
    let (rank, condition) = rank_and_condition(sv);

    // pinv = V_r S_r^{-1} U_r^H
    let mut v_scaled = svd.v.columns(0, rank).into_owned();
    for (j, mut col) in v_scaled.column_iter_mut().enumerate() {
        col.unscale_mut(sv[j]);
    }
    let matrix = v_scaled * svd.u.columns(0, rank).adjoint();
    PseudoInverse {
        matrix,
        rank,
        condition,
    }
}

fn rank_and_condition(sv: &[f64]) -> (usize, f64) {
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return (0, f64::INFINITY);
    }
    let cut = RANK_TOLERANCE * max;
    let rank = sv.iter().filter(|&&s| s > cut).count();
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    (rank, condition)
}

/// `||a - b||_F / ||b||_F`, or the absolute error when `b` is zero.
pub fn relative_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

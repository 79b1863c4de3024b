//! Standard ESPRIT on a uniform linear array.
//!
//! 1. Hermitian EVD of the covariance; the `P` dominant eigenvectors span the
//!    signal subspace `Us`.
//! 2. Maximum-overlap subarrays: `J1` keeps sensors `0..M-1`, `J2` keeps `1..M`.
//! 3. Least-squares solve of `J1 Us Psi = J2 Us` via the pseudo-inverse.
//! 4. The eigenvalue phases of `Psi` are the spatial frequencies, mapped to
//!    angles through `asin(gamma / (2 pi d / lambda))`.

use crate::array::{ArrayGeometry, CovarianceEstimate};
use crate::error::{invalid_arg, Result};
use crate::linalg::{eigenvalues, hermitian_eigen, pseudo_inverse, CMatrix, C64};

/// Condition number of `J1 Us` above which the LS solve is flagged singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Signal/noise split of a Hermitian eigendecomposition.
#[derive(Debug, Clone)]
pub struct SubspaceDecomposition {
    pub signal_basis: CMatrix,
    pub noise_basis: CMatrix,
    /// Descending.
    pub signal_eigenvalues: Vec<f64>,
    /// Descending.
    pub noise_eigenvalues: Vec<f64>,
}

impl SubspaceDecomposition {
    pub fn num_sources(&self) -> usize {
        self.signal_basis.ncols()
    }

    /// `Us Ls Us^H + Un Ln Un^H`.
    pub fn reconstruct(&self) -> CMatrix {
        let part = |basis: &CMatrix, values: &[f64]| {
            let mut scaled = basis.clone();
            for (j, mut col) in scaled.column_iter_mut().enumerate() {
                col.scale_mut(values[j]);
            }
            scaled * basis.adjoint()
        };
        part(&self.signal_basis, &self.signal_eigenvalues)
            + part(&self.noise_basis, &self.noise_eigenvalues)
    }
}

pub fn decompose(r: &CovarianceEstimate, num_sources: usize) -> Result<SubspaceDecomposition> {
    let m = r.dim();
    if num_sources == 0 || num_sources >= m {
        return Err(invalid_arg(format!(
            "number of sources must satisfy 1 <= P < M = {m}, got {num_sources}"
        )));
    }
    let (values, vectors) = hermitian_eigen(r.matrix());
    Ok(SubspaceDecomposition {
        signal_basis: vectors.columns(0, num_sources).into_owned(),
        noise_basis: vectors.columns(num_sources, m - num_sources).into_owned(),
        signal_eigenvalues: values[..num_sources].to_vec(),
        noise_eigenvalues: values[num_sources..].to_vec(),
    })
}

/// Maximum-overlap subarray selection for an `M`-sensor array, `s = M - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionPair {
    num_sensors: usize,
}

impl SelectionPair {
    pub fn maximum_overlap(num_sensors: usize) -> Result<Self> {
        if num_sensors < 2 {
            return Err(invalid_arg("selection needs at least 2 sensors"));
        }
        Ok(Self { num_sensors })
    }

    pub fn subarray_len(&self) -> usize {
        self.num_sensors - 1
    }

    /// `J1 m`: the first `M - 1` rows.
    pub fn first(&self, m: &CMatrix) -> CMatrix {
        m.rows(0, self.subarray_len()).into_owned()
    }

    /// `J2 m`: the last `M - 1` rows.
    pub fn second(&self, m: &CMatrix) -> CMatrix {
        m.rows(1, self.subarray_len()).into_owned()
    }

    /// Explicit 0/1 selection matrices `(J1, J2)`.
    pub fn matrices(&self) -> (CMatrix, CMatrix) {
        let s = self.subarray_len();
        let one = C64::new(1.0, 0.0);
        let j1 = CMatrix::from_fn(s, self.num_sensors, |r, c| if c == r { one } else { C64::default() });
        let j2 = CMatrix::from_fn(s, self.num_sensors, |r, c| if c == r + 1 { one } else { C64::default() });
        (j1, j2)
    }
}

/// Diagnostics attached to an estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EstimateFlags {
    /// An arcsin argument fell outside [-1, 1] and was clamped.
    pub clamped_arcsin: bool,
    /// `J1 Us` was numerically rank deficient.
    pub singular_ls: bool,
    /// A steering matrix built from the estimates was rank deficient.
    pub rank_warning: bool,
    /// The eigenvalues of the rotation operator did not converge.
    pub eigen_failure: bool,
    /// Every point of a reliability-factor sweep was degenerate; the
    /// zero-factor record was reported instead.
    pub sweep_fallback: bool,
}

impl EstimateFlags {
    pub fn any(&self) -> bool {
        self.clamped_arcsin || self.singular_ls || self.rank_warning || self.eigen_failure || self.sweep_fallback
    }

    pub fn union(self, other: Self) -> Self {
        Self {
            clamped_arcsin: self.clamped_arcsin || other.clamped_arcsin,
            singular_ls: self.singular_ls || other.singular_ls,
            rank_warning: self.rank_warning || other.rank_warning,
            eigen_failure: self.eigen_failure || other.eigen_failure,
            sweep_fallback: self.sweep_fallback || other.sweep_fallback,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attribution {
    /// Supplied as prior knowledge and passed through unchanged.
    Known,
    Estimated,
}

impl Attribution {
    pub fn as_str(&self) -> &'static str {
        match self {
            Attribution::Known => "known",
            Attribution::Estimated => "estimated",
        }
    }
}

/// Output of an estimator: angles in radians, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct DoaEstimate {
    pub angles: Vec<f64>,
    pub attribution: Vec<Attribution>,
    pub mu_opt: Option<f64>,
    pub flags: EstimateFlags,
}

impl DoaEstimate {
    /// Sorts `(angle, attribution)` pairs by angle.
    pub fn from_pairs(mut pairs: Vec<(f64, Attribution)>, flags: EstimateFlags) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (angles, attribution) = pairs.into_iter().unzip();
        Self {
            angles,
            attribution,
            mu_opt: None,
            flags,
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles_deg(&self) -> Vec<f64> {
        self.angles.iter().map(|a| a.to_degrees()).collect()
    }

    /// Angles attributed to estimation, ascending.
    pub fn estimated_angles(&self) -> Vec<f64> {
        self.angles
            .iter()
            .zip(&self.attribution)
            .filter(|(_, a)| **a == Attribution::Estimated)
            .map(|(&t, _)| t)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ShiftSolution {
    pub operator: CMatrix,
    pub condition: f64,
    pub singular: bool,
}

/// `Psi = (J1 Us)^+ J2 Us`.
pub fn shift_invariance_solve(signal_basis: &CMatrix, pair: &SelectionPair) -> Result<ShiftSolution> {
    if signal_basis.nrows() != pair.num_sensors {
        return Err(invalid_arg(format!(
            "signal basis has {} rows for a {}-sensor selection",
            signal_basis.nrows(),
            pair.num_sensors
        )));
    }
    let upper = pair.first(signal_basis);
    let lower = pair.second(signal_basis);
    let pinv = pseudo_inverse(&upper);
    let singular = !pinv.full_rank() || !(pinv.condition <= SINGULAR_CONDITION);
    Ok(ShiftSolution {
        operator: &pinv.matrix * lower,
        condition: pinv.condition,
        singular,
    })
}

/// Maps the eigenvalues of the rotation operator to sorted angles.
pub fn angles_from_operator(psi: &CMatrix, geom: &ArrayGeometry) -> Result<DoaEstimate> {
    if !psi.is_square() || psi.nrows() == 0 {
        return Err(invalid_arg(format!(
            "rotation operator must be square and non-empty, got {}x{}",
            psi.nrows(),
            psi.ncols()
        )));
    }
    let mut flags = EstimateFlags::default();
    let eigenvalues: Vec<C64> = match eigenvalues(psi) {
        Some(ev) => ev,
        None => {
            flags.eigen_failure = true;
            psi.diagonal().iter().copied().collect()
        }
    };

    let scale = 2.0 * std::f64::consts::PI * geom.spacing_ratio();
    let pairs = eigenvalues
        .iter()
        .map(|lambda| {
            let mut s = lambda.arg() / scale;
            if s.abs() > 1.0 || !s.is_finite() {
                flags.clamped_arcsin = true;
                s = if s.is_nan() { 0.0 } else { s.clamp(-1.0, 1.0) };
            }
            (s.asin(), Attribution::Estimated)
        })
        .collect();
    Ok(DoaEstimate::from_pairs(pairs, flags))
}

/// Full ESPRIT chain on a covariance estimate.
pub fn esprit(r: &CovarianceEstimate, num_sources: usize, geom: &ArrayGeometry) -> Result<DoaEstimate> {
    if r.dim() != geom.num_sensors() {
        return Err(invalid_arg(format!(
            "covariance is {}x{} for a {}-sensor array",
            r.dim(),
            r.dim(),
            geom.num_sensors()
        )));
    }
    let sub = decompose(r, num_sources)?;
    let pair = SelectionPair::maximum_overlap(geom.num_sensors())?;
    let shift = shift_invariance_solve(&sub.signal_basis, &pair)?;
    let mut est = angles_from_operator(&shift.operator, geom)?;
    est.flags.singular_ls = shift.singular;
    Ok(est)
}

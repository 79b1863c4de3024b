//! Two-step knowledge-aided iterative ESPRIT and its no-knowledge variant.
//!
//! The finite-sample covariance carries signal/noise cross terms. A first
//! ESPRIT pass gives a steering matrix `A1`; from it the cross term
//! `V = Qa R Qa_perp` is estimated and a scaled copy is removed,
//! `R(mu) = R - mu (V + V^H)`, for every `mu` on a grid over [0, 1]. Each
//! refined covariance is fed back through ESPRIT. Known DOAs replace their
//! nearest estimates in the new steering matrix, and the stochastic ML
//! objective evaluated on the original sample covariance picks the winner.

use crate::array::{
    array_manifold, check_angle, sample_covariance, ArrayGeometry, CovarianceEstimate, Provenance,
    SnapshotBatch,
};
use crate::error::{invalid_arg, Result};
use crate::esprit::{esprit, Attribution, DoaEstimate, EstimateFlags};
use crate::linalg::{hermitian_eigenvalues, pseudo_inverse, range_basis, CMatrix};

/// Eigenvalues below this fraction of the largest are floored in the log-det.
pub const LOGDET_FLOOR: f64 = 1e-12;

/// Default reliability-factor increment (21 grid points).
pub const DEFAULT_INCREMENT: f64 = 0.05;

/// Signal-subspace projector and its complement.
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    pub qa: CMatrix,
    pub qa_perp: CMatrix,
    /// Numerical rank of the steering matrix.
    pub rank: usize,
    /// Set when the rank is below the number of columns.
    pub rank_deficient: bool,
}

/// `Qa = A (A^H A)^{-1} A^H`, computed as `U_r U_r^H` from a thin SVD so it is
/// exactly Hermitian and idempotent up to rounding, also when `A` is rank deficient.
pub fn projections(a_hat: &CMatrix) -> Result<ProjectionPair> {
    if a_hat.nrows() == 0 || a_hat.ncols() == 0 {
        return Err(invalid_arg("empty steering matrix"));
    }
    let rb = range_basis(a_hat);
    let m = a_hat.nrows();
    let qa = &rb.basis * rb.basis.adjoint();
    let qa_perp = CMatrix::identity(m, m) - &qa;
    Ok(ProjectionPair {
        qa,
        qa_perp,
        rank: rb.rank,
        rank_deficient: rb.rank < a_hat.ncols(),
    })
}

#[derive(Debug, Clone)]
pub struct LsAmplitudes {
    /// `P x N`.
    pub amplitudes: CMatrix,
    pub rank_warning: bool,
}

/// Per-snapshot least-squares fit `s(i) = (A^H A)^{-1} A^H x(i)`.
pub fn ls_amplitudes(a_hat: &CMatrix, data: &CMatrix) -> Result<LsAmplitudes> {
    if a_hat.nrows() != data.nrows() {
        return Err(invalid_arg(format!(
            "steering matrix has {} rows, data has {}",
            a_hat.nrows(),
            data.nrows()
        )));
    }
    let pinv = pseudo_inverse(a_hat);
    Ok(LsAmplitudes {
        amplitudes: &pinv.matrix * data,
        rank_warning: !pinv.full_rank(),
    })
}

/// `n(i) = x(i) - A s(i)`.
pub fn noise_residual(data: &CMatrix, a_hat: &CMatrix, amplitudes: &CMatrix) -> Result<CMatrix> {
    if a_hat.ncols() != amplitudes.nrows()
        || a_hat.nrows() != data.nrows()
        || amplitudes.ncols() != data.ncols()
    {
        return Err(invalid_arg("noise residual: shapes do not conform"));
    }
    Ok(data - a_hat * amplitudes)
}

/// Cross-term estimate `V = Qa R Qa_perp`.
pub fn perturbation_term(pair: &ProjectionPair, r: &CovarianceEstimate) -> Result<CMatrix> {
    if pair.qa.nrows() != r.dim() {
        return Err(invalid_arg("projector and covariance dimensions differ"));
    }
    Ok(&pair.qa * r.matrix() * &pair.qa_perp)
}

/// `R - mu (V + V^H)`; `mu` must lie in [0, 1].
pub fn modified_covariance(
    r: &CovarianceEstimate,
    v: &CMatrix,
    mu: f64,
) -> Result<CovarianceEstimate> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(invalid_arg(format!("reliability factor {mu} outside [0, 1]")));
    }
    if v.shape() != r.matrix().shape() {
        return Err(invalid_arg("perturbation term and covariance dimensions differ"));
    }
    if mu == 0.0 {
        return CovarianceEstimate::new(r.matrix().clone(), Provenance::Modified { mu });
    }
    let m = r.matrix() - (v + v.adjoint()).scale(mu);
    CovarianceEstimate::new(m, Provenance::Modified { mu })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmlValue {
    /// `+inf` when degenerate.
    pub value: f64,
    pub degenerate: bool,
}

/// Stochastic ML cost
/// `ln det(Qa R Qa + tr(Qa_perp R) / (M - P) Qa_perp)`,
/// as a sum of log-eigenvalues floored at `LOGDET_FLOOR` times the largest.
pub fn sml_objective(pair: &ProjectionPair, r: &CovarianceEstimate, num_sources: usize) -> Result<SmlValue> {
    let m = r.dim();
    if num_sources == 0 || num_sources >= m {
        return Err(invalid_arg(format!("SML objective needs 1 <= P < M, got P = {num_sources}, M = {m}")));
    }
    if pair.qa.nrows() != m {
        return Err(invalid_arg("projector and covariance dimensions differ"));
    }
    let rm = r.matrix();
    let noise_level = (&pair.qa_perp * rm).trace().re / (m - num_sources) as f64;
    let arg = &pair.qa * rm * &pair.qa + pair.qa_perp.scale(noise_level);
    let arg = crate::linalg::symmetrize(&arg);
    let eig = hermitian_eigenvalues(&arg);
    let largest = eig[0];
    if !(largest > 0.0) || !largest.is_finite() {
        return Ok(SmlValue {
            value: f64::INFINITY,
            degenerate: true,
        });
    }
    let floor = LOGDET_FLOOR * largest;
    let value = eig.iter().map(|&l| l.max(floor).ln()).sum();
    Ok(SmlValue {
        value,
        degenerate: false,
    })
}

/// One point of the reliability-factor sweep.
#[derive(Debug, Clone)]
pub struct MuSweepRecord {
    pub mu: f64,
    pub objective: f64,
    /// Known DOAs merged with the remaining second-step estimates.
    pub candidate: DoaEstimate,
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct KaiResult {
    pub estimate: DoaEstimate,
    pub sweep: Vec<MuSweepRecord>,
    pub first_step: DoaEstimate,
}

/// `mu = k * increment` for `k = 0 ..= floor(1 / increment)`.
pub fn mu_grid(increment: f64) -> Result<Vec<f64>> {
    if !(increment > 0.0 && increment <= 1.0) {
        return Err(invalid_arg(format!("increment must lie in (0, 1], got {increment}")));
    }
    let steps = (1.0 / increment + 1e-9).floor() as usize;
    Ok((0..=steps).map(|k| (k as f64 * increment).min(1.0)).collect())
}

/// Greedy nearest-neighbour association of known DOAs with estimates.
///
/// Known angles are taken in order; each claims the closest estimate not yet
/// claimed (lowest index on ties). Returns the indices of estimates left over.
pub fn unmatched_estimates(estimates: &[f64], known: &[f64]) -> Vec<usize> {
    let mut taken = vec![false; estimates.len()];
    for &k in known {
        let best = estimates
            .iter()
            .enumerate()
            .filter(|(i, _)| !taken[*i])
            .min_by(|(i, a), (j, b)| (*a - k).abs().total_cmp(&(*b - k).abs()).then(i.cmp(j)))
            .map(|(i, _)| i);
        if let Some(i) = best {
            taken[i] = true;
        }
    }
    (0..estimates.len()).filter(|&i| !taken[i]).collect()
}

/// Replaces the estimates nearest to each known DOA with the known values.
pub fn merge_known(estimate: &DoaEstimate, known: &[f64]) -> DoaEstimate {
    let leftover = unmatched_estimates(&estimate.angles, known);
    let pairs = known
        .iter()
        .map(|&k| (k, Attribution::Known))
        .chain(leftover.iter().map(|&i| (estimate.angles[i], Attribution::Estimated)))
        .collect();
    DoaEstimate::from_pairs(pairs, estimate.flags)
}

/// Two-step knowledge-aided iterative ESPRIT.
///
/// `known_doas` are radians and must number fewer than `num_sources`.
pub fn two_step_kai(
    batch: &SnapshotBatch,
    geom: &ArrayGeometry,
    num_sources: usize,
    known_doas: &[f64],
    increment: f64,
) -> Result<KaiResult> {
    if known_doas.len() >= num_sources {
        return Err(invalid_arg(format!(
            "{} known DOAs leave no unknown among {num_sources} sources",
            known_doas.len()
        )));
    }
    for &k in known_doas {
        check_angle(k)?;
    }
    if batch.num_sensors() != geom.num_sensors() {
        return Err(invalid_arg("batch and geometry disagree on the sensor count"));
    }
    let grid = mu_grid(increment)?;

    // first step
    let r_hat = sample_covariance(batch);
    let first_step = esprit(&r_hat, num_sources, geom)?;

    // second step
    let a1 = array_manifold(geom, &first_step.angles)?.matrix;
    let v = perturbation_term(&projections(&a1)?, &r_hat)?;

    let sweep = grid
        .iter()
        .map(|&mu| sweep_point(&r_hat, &v, mu, geom, num_sources, known_doas))
        .collect::<Result<Vec<_>>>()?;

    let best = sweep
        .iter()
        .filter(|rec| !rec.degenerate)
        .fold(None::<&MuSweepRecord>, |best, rec| match best {
            Some(b) if b.objective <= rec.objective => Some(b),
            _ => Some(rec),
        });
    let estimate = match best {
        Some(rec) => {
            let mut e = rec.candidate.clone();
            e.mu_opt = Some(rec.mu);
            e
        }
        None => {
            let mut e = sweep[0].candidate.clone();
            e.mu_opt = Some(sweep[0].mu);
            e.flags.sweep_fallback = true;
            e
        }
    };
    Ok(KaiResult {
        estimate,
        sweep,
        first_step,
    })
}

fn sweep_point(
    r_hat: &CovarianceEstimate,
    v: &CMatrix,
    mu: f64,
    geom: &ArrayGeometry,
    num_sources: usize,
    known_doas: &[f64],
) -> Result<MuSweepRecord> {
    let r_mod = modified_covariance(r_hat, v, mu)?;
    let second = esprit(&r_mod, num_sources, geom)?;
    let mut candidate = merge_known(&second, known_doas);

    let manifold = array_manifold(geom, &candidate.angles)?;
    let pair = projections(&manifold.matrix)?;
    let rank_warning = manifold.duplicate_angles || pair.rank_deficient;
    candidate.flags = candidate.flags.union(EstimateFlags {
        rank_warning,
        ..Default::default()
    });
    let sml = sml_objective(&pair, r_hat, num_sources)?;
    let degenerate = sml.degenerate
        || !sml.value.is_finite()
        || candidate.flags.singular_ls
        || candidate.flags.eigen_failure
        || rank_warning;
    Ok(MuSweepRecord {
        mu,
        objective: if degenerate { f64::INFINITY } else { sml.value },
        candidate,
        degenerate,
    })
}

/// Iterative ESPRIT: the same two-step pipeline without prior knowledge.
pub fn iesprit(
    batch: &SnapshotBatch,
    geom: &ArrayGeometry,
    num_sources: usize,
    increment: f64,
) -> Result<KaiResult> {
    two_step_kai(batch, geom, num_sources, &[], increment)
}

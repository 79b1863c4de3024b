//! Error matching, RMSE, resolution and the deterministic Cramér-Rao bound.

use nalgebra::DMatrix;

use crate::array::{array_manifold, noise_variance_from_snr_db, ArrayGeometry, SourceScenario};
use crate::error::{invalid_arg, DoaError, Result};
use crate::esprit::DoaEstimate;
use crate::linalg::{CMatrix, C64};

/// Per-trial evaluation of one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// `truth - estimate` in degrees, one entry per evaluated source.
    pub errors_deg: Vec<f64>,
    pub resolved: bool,
}

impl TrialOutcome {
    pub fn evaluate(truth: &[f64], estimate: &DoaEstimate, known_indices: &[usize]) -> Result<Self> {
        let errors_deg = match_errors(truth, estimate, known_indices)?;
        let resolved = resolved(truth, &errors_deg);
        Ok(Self { errors_deg, resolved })
    }

    /// An estimator that produced nothing usable.
    pub fn failed() -> Self {
        Self {
            errors_deg: Vec::new(),
            resolved: false,
        }
    }
}

/// Pairs the unknown true DOAs with the estimator's unknown angles, both in
/// ascending order, and returns `truth - estimate` in degrees.
///
/// If the estimate attributes nothing as known, the full sorted estimate is
/// paired with the full sorted truth and the errors at the unknown positions
/// are kept.
pub fn match_errors(truth: &[f64], estimate: &DoaEstimate, known_indices: &[usize]) -> Result<Vec<f64>> {
    if truth.len() != estimate.len() {
        return Err(invalid_arg(format!(
            "{} true DOAs but {} estimates",
            truth.len(),
            estimate.len()
        )));
    }
    let mut sorted_truth = truth.to_vec();
    sorted_truth.sort_by(f64::total_cmp);
    let unknown: Vec<usize> = (0..truth.len()).filter(|i| !known_indices.contains(i)).collect();

    let mut estimated = estimate.estimated_angles();
    estimated.sort_by(f64::total_cmp);

    let paired: Vec<(f64, f64)> = if estimated.len() == unknown.len() {
        unknown.iter().zip(&estimated).map(|(&i, &e)| (sorted_truth[i], e)).collect()
    } else if estimated.len() == truth.len() {
        unknown.iter().map(|&i| (sorted_truth[i], estimated[i])).collect()
    } else {
        return Err(invalid_arg(format!(
            "{} estimated angles cannot be paired with {} unknown sources",
            estimated.len(),
            unknown.len()
        )));
    };
    Ok(paired.into_iter().map(|(t, e)| (t - e).to_degrees()).collect())
}

/// Smallest gap between adjacent true DOAs, in degrees.
pub fn min_separation_deg(truth: &[f64]) -> f64 {
    let mut sorted = truth.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .windows(2)
        .map(|w| (w[1] - w[0]).to_degrees())
        .fold(f64::INFINITY, f64::min)
}

/// Every error magnitude below half the minimum true separation.
pub fn resolved(truth: &[f64], errors_deg: &[f64]) -> bool {
    let half = min_separation_deg(truth) / 2.0;
    !errors_deg.is_empty() && errors_deg.iter().all(|e| e.is_finite() && e.abs() < half)
}

fn finite_squared_errors(outcomes: &[TrialOutcome]) -> impl Iterator<Item = f64> + '_ {
    outcomes
        .iter()
        .flat_map(|o| o.errors_deg.iter())
        .filter(|e| e.is_finite())
        .map(|e| e * e)
}

/// Root mean squared error in degrees over every finite error of every
/// trial. NaN when there are none.
pub fn rmse(outcomes: &[TrialOutcome]) -> f64 {
    let (sum, count) = finite_squared_errors(outcomes).fold((0.0, 0usize), |(s, c), e| (s + e, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        (sum / count as f64).sqrt()
    }
}

/// Delta-method standard error of [`rmse`].
pub fn rmse_standard_error(outcomes: &[TrialOutcome]) -> f64 {
    let sq: Vec<f64> = finite_squared_errors(outcomes).collect();
    let n = sq.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = sq.iter().sum::<f64>() / n as f64;
    let var = sq.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se_mse = (var / n as f64).sqrt();
    if mean > 0.0 {
        se_mse / (2.0 * mean.sqrt())
    } else {
        0.0
    }
}

pub fn probability_of_resolution(outcomes: &[TrialOutcome]) -> f64 {
    if outcomes.is_empty() {
        return f64::NAN;
    }
    outcomes.iter().filter(|o| o.resolved).count() as f64 / outcomes.len() as f64
}

/// Deterministic CRB matrix (radians squared),
/// `sigma^2 / (2N) * inv(Re[(D^H P_perp D) .* Ps^T])`, with `Ps = diag(powers)`.
pub fn deterministic_crb(
    geom: &ArrayGeometry,
    doas: &[f64],
    source_powers: &[f64],
    noise_variance: f64,
    num_snapshots: usize,
) -> Result<DMatrix<f64>> {
    if doas.len() != source_powers.len() {
        return Err(invalid_arg("one power per DOA required"));
    }
    if num_snapshots == 0 {
        return Err(invalid_arg("CRB needs at least one snapshot"));
    }
    let p = doas.len();
    let m = geom.num_sensors();
    let a = array_manifold(geom, doas)?.matrix;
    let gram_inv = (a.adjoint() * &a)
        .try_inverse()
        .ok_or_else(|| DoaError::SingularFisher("steering vectors are linearly dependent".into()))?;
    let proj_perp = CMatrix::identity(m, m) - &a * gram_inv * a.adjoint();

    let scale = 2.0 * std::f64::consts::PI * geom.spacing_ratio();
    let d = CMatrix::from_fn(m, p, |r, k| {
        C64::new(0.0, scale * r as f64 * doas[k].cos()) * a[(r, k)]
    });
    let h = d.adjoint() * proj_perp * &d;
    // Ps is diagonal so the Hadamard product keeps only the diagonal
    let fisher = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            h[(i, i)].re * source_powers[i]
        } else {
            0.0
        }
    });
    let inv = fisher
        .try_inverse()
        .filter(|inv| inv.iter().all(|x| x.is_finite()) && (0..p).all(|i| inv[(i, i)] > 0.0))
        .ok_or_else(|| DoaError::SingularFisher("Fisher information is not invertible".into()))?;
    Ok(inv.scale(noise_variance / (2.0 * num_snapshots as f64)))
}

/// Square root of the mean CRB diagonal over `indices`, in degrees.
pub fn crb_sqrt_deg_over(
    scenario: &SourceScenario,
    geom: &ArrayGeometry,
    snr_db: f64,
    indices: &[usize],
) -> Result<f64> {
    if indices.is_empty() {
        return Err(invalid_arg("no sources selected for the CRB"));
    }
    let crb = deterministic_crb(
        geom,
        scenario.doas(),
        scenario.source_powers(),
        noise_variance_from_snr_db(snr_db),
        scenario.num_snapshots(),
    )?;
    let mean = indices.iter().map(|&i| crb[(i, i)]).sum::<f64>() / indices.len() as f64;
    Ok(mean.sqrt().to_degrees())
}

/// CRB reference averaged over the scenario's unknown sources.
pub fn crb_sqrt_deg(scenario: &SourceScenario, geom: &ArrayGeometry, snr_db: f64) -> Result<f64> {
    crb_sqrt_deg_over(scenario, geom, snr_db, &scenario.unknown_indices())
}

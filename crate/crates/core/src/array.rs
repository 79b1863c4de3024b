//! Uniform linear array model: steering vectors, snapshot synthesis and
//! covariance estimates.
//!
//! Angles are radians throughout the library. Element `m` (0-based) of the
//! steering vector for angle `theta` is `exp(j 2 pi m (d / lambda) sin theta)`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{DoaError, Result};
use crate::linalg::{symmetrize, CMatrix, CVector, C64};

/// Sensor count and inter-element spacing of a uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    num_sensors: usize,
    spacing: f64,
    wavelength: f64,
}

impl ArrayGeometry {
    /// `spacing` and `wavelength` share a unit; only their ratio matters.
    pub fn new(num_sensors: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if num_sensors < 2 {
            return Err(DoaError::InvalidArgument(format!(
                "array needs at least 2 sensors, got {num_sensors}"
            )));
        }
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(DoaError::InvalidArgument(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if !(spacing > 0.0) || spacing > wavelength / 2.0 {
            return Err(DoaError::InvalidArgument(format!(
                "spacing must lie in (0, wavelength/2], got {spacing} for wavelength {wavelength}"
            )));
        }
        Ok(Self {
            num_sensors,
            spacing,
            wavelength,
        })
    }

    /// Half-wavelength array with unit wavelength.
    pub fn half_wavelength(num_sensors: usize) -> Result<Self> {
        Self::new(num_sensors, 0.5, 1.0)
    }

    pub fn num_sensors(&self) -> usize {
        self.num_sensors
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// `d / lambda`.
    pub fn spacing_ratio(&self) -> f64 {
        self.spacing / self.wavelength
    }

    /// Phase increment between adjacent sensors, `2 pi (d / lambda) sin theta`.
    pub fn spatial_frequency(&self, theta: f64) -> f64 {
        2.0 * PI * self.spacing_ratio() * theta.sin()
    }
}

pub(crate) fn check_angle(theta: f64) -> Result<()> {
    if theta.is_finite() && theta.abs() < FRAC_PI_2 {
        Ok(())
    } else {
        Err(DoaError::AngleDomain(theta))
    }
}

/// Far-field source configuration for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceScenario {
    doas: Vec<f64>,
    source_powers: Vec<f64>,
    noise_variance: f64,
    num_snapshots: usize,
    known_indices: Vec<usize>,
}

impl SourceScenario {
    /// `doas` must be strictly increasing in (-pi/2, pi/2); `known_indices`
    /// are 0-based positions into `doas` and must leave at least one source unknown.
    pub fn new(
        doas: Vec<f64>,
        source_powers: Vec<f64>,
        noise_variance: f64,
        num_snapshots: usize,
        known_indices: Vec<usize>,
    ) -> Result<Self> {
        let bad = |msg: String| Err(DoaError::InvalidScenario(msg));
        if doas.is_empty() {
            return bad("at least one source is required".into());
        }
        for &theta in &doas {
            check_angle(theta)?;
        }
        if doas.windows(2).any(|w| w[1] <= w[0]) {
            return bad("DOAs must be strictly increasing".into());
        }
        if source_powers.len() != doas.len() {
            return bad(format!(
                "{} source powers for {} sources",
                source_powers.len(),
                doas.len()
            ));
        }
        if source_powers.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return bad("source powers must be finite and non-negative".into());
        }
        if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
            return bad(format!("noise variance must be non-negative, got {noise_variance}"));
        }
        if num_snapshots == 0 {
            return bad("at least one snapshot is required".into());
        }
        let mut known = known_indices;
        known.sort_unstable();
        known.dedup();
        if known.iter().any(|&k| k >= doas.len()) {
            return bad("known index out of range".into());
        }
        if known.len() >= doas.len() {
            return bad("at least one DOA must be unknown".into());
        }
        Ok(Self {
            doas,
            source_powers,
            noise_variance,
            num_snapshots,
            known_indices: known,
        })
    }

    /// Unit-power sources with the noise variance set from a per-source SNR in dB.
    pub fn unit_power(
        doas: Vec<f64>,
        snr_db: f64,
        num_snapshots: usize,
        known_indices: Vec<usize>,
    ) -> Result<Self> {
        let p = doas.len();
        Self::new(
            doas,
            vec![1.0; p],
            noise_variance_from_snr_db(snr_db),
            num_snapshots,
            known_indices,
        )
    }

    pub fn with_noise_variance(&self, noise_variance: f64) -> Result<Self> {
        Self::new(
            self.doas.clone(),
            self.source_powers.clone(),
            noise_variance,
            self.num_snapshots,
            self.known_indices.clone(),
        )
    }

    pub fn with_num_snapshots(&self, num_snapshots: usize) -> Result<Self> {
        Self::new(
            self.doas.clone(),
            self.source_powers.clone(),
            self.noise_variance,
            num_snapshots,
            self.known_indices.clone(),
        )
    }

    pub fn doas(&self) -> &[f64] {
        &self.doas
    }

    pub fn num_sources(&self) -> usize {
        self.doas.len()
    }

    pub fn source_powers(&self) -> &[f64] {
        &self.source_powers
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn num_snapshots(&self) -> usize {
        self.num_snapshots
    }

    pub fn known_indices(&self) -> &[usize] {
        &self.known_indices
    }

    pub fn unknown_indices(&self) -> Vec<usize> {
        (0..self.doas.len())
            .filter(|i| !self.known_indices.contains(i))
            .collect()
    }

    pub fn known_doas(&self) -> Vec<f64> {
        self.known_indices.iter().map(|&i| self.doas[i]).collect()
    }

    /// Checks `P < M`.
    pub fn check_geometry(&self, geom: &ArrayGeometry) -> Result<()> {
        if self.num_sources() >= geom.num_sensors() {
            return Err(DoaError::InvalidScenario(format!(
                "{} sources need more than {} sensors",
                self.num_sources(),
                geom.num_sensors()
            )));
        }
        Ok(())
    }
}

/// Noise variance giving the requested per-source SNR for unit-power sources.
pub fn noise_variance_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// An `M x N` block of array observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBatch {
    pub data: CMatrix,
    pub seed: u64,
    pub scenario: SourceScenario,
    pub geometry: ArrayGeometry,
}

impl SnapshotBatch {
    pub fn num_sensors(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_snapshots(&self) -> usize {
        self.data.ncols()
    }
}

/// Where a covariance matrix came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    Sample,
    Modified { mu: f64 },
    /// The exact model covariance `A Rss A^H + sigma^2 I`.
    Model,
}

/// Hermitian `M x M` covariance matrix with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    matrix: CMatrix,
    provenance: Provenance,
}

impl CovarianceEstimate {
    /// Symmetrizes `matrix`; fails when it is not square.
    pub fn new(matrix: CMatrix, provenance: Provenance) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(DoaError::InvalidArgument(format!(
                "covariance must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            matrix: symmetrize(&matrix),
            provenance,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Same provenance, matrix scaled by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            matrix: self.matrix.scale(c),
            provenance: self.provenance,
        }
    }
}

pub fn steering_vector(geom: &ArrayGeometry, theta: f64) -> Result<CVector> {
    check_angle(theta)?;
    let omega = geom.spatial_frequency(theta);
    Ok(CVector::from_fn(geom.num_sensors(), |m, _| {
        C64::from_polar(1.0, omega * m as f64)
    }))
}

/// Vandermonde matrix of steering vectors, one column per angle.
#[derive(Debug, Clone)]
pub struct ArrayManifold {
    pub matrix: CMatrix,
    /// Set when two angles coincide, so the manifold cannot have full column rank.
    pub duplicate_angles: bool,
}

pub fn array_manifold(geom: &ArrayGeometry, thetas: &[f64]) -> Result<ArrayManifold> {
    if thetas.is_empty() {
        return Err(DoaError::InvalidArgument("empty angle list".into()));
    }
    let mut matrix = CMatrix::zeros(geom.num_sensors(), thetas.len());
    for (k, &theta) in thetas.iter().enumerate() {
        matrix.set_column(k, &steering_vector(geom, theta)?);
    }
    let duplicate_angles = thetas
        .iter()
        .enumerate()
        .any(|(i, a)| thetas[i + 1..].iter().any(|b| a == b));
    Ok(ArrayManifold {
        matrix,
        duplicate_angles,
    })
}

/// The three pieces of a synthetic batch, `data = A * sources + noise`.
#[derive(Debug, Clone)]
pub struct SnapshotComponents {
    pub sources: CMatrix,
    pub noise: CMatrix,
    pub data: CMatrix,
}

/// Draws sources, then noise, from a ChaCha8 stream seeded with `seed`.
pub fn synthesize_components(
    scenario: &SourceScenario,
    geom: &ArrayGeometry,
    seed: u64,
) -> Result<SnapshotComponents> {
    scenario.check_geometry(geom)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = scenario.num_snapshots();
    let m = geom.num_sensors();

    let sources = circular_gaussian(&mut rng, scenario.source_powers(), n);
    let noise = circular_gaussian(&mut rng, &vec![scenario.noise_variance(); m], n);
    let a = array_manifold(geom, scenario.doas())?.matrix;
    let data = &a * &sources + &noise;
    Ok(SnapshotComponents {
        sources,
        noise,
        data,
    })
}

pub fn synthesize_snapshots(
    scenario: &SourceScenario,
    geom: &ArrayGeometry,
    seed: u64,
) -> Result<SnapshotBatch> {
    let parts = synthesize_components(scenario, geom, seed)?;
    Ok(SnapshotBatch {
        data: parts.data,
        seed,
        scenario: scenario.clone(),
        geometry: *geom,
    })
}

/// `rows x cols` matrix of independent circular complex Gaussians; row `r`
/// has variance `variances[r]`. Draws are taken column by column.
pub fn circular_gaussian<R: rand::Rng + ?Sized>(
    rng: &mut R,
    variances: &[f64],
    cols: usize,
) -> CMatrix {
    let rows = variances.len();
    let scales: Vec<f64> = variances.iter().map(|v| (v / 2.0).sqrt()).collect();
    let mut out = CMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            out[(r, c)] = C64::new(re * scales[r], im * scales[r]);
        }
    }
    out
}

pub fn sample_covariance(batch: &SnapshotBatch) -> CovarianceEstimate {
    sample_covariance_of(&batch.data)
}

/// `(1/N) X X^H` of an `M x N` data matrix.
pub fn sample_covariance_of(data: &CMatrix) -> CovarianceEstimate {
    let n = data.ncols().max(1) as f64;
    let r = (data * data.adjoint()).unscale(n);
    CovarianceEstimate::new(r, Provenance::Sample).expect("X X^H is square")
}

pub fn true_covariance(
    scenario: &SourceScenario,
    geom: &ArrayGeometry,
) -> Result<CovarianceEstimate> {
    scenario.check_geometry(geom)?;
    let a = array_manifold(geom, scenario.doas())?.matrix;
    let rss = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        scenario.num_sources(),
        scenario.source_powers().iter().map(|&p| C64::new(p, 0.0)),
    ));
    let m = geom.num_sensors();
    let r = &a * rss * a.adjoint()
        + CMatrix::identity(m, m).scale(scenario.noise_variance());
    CovarianceEstimate::new(r, Provenance::Model)
}

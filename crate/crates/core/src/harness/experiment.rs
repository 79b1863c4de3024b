//! Seeded Monte Carlo sweeps over SNR.
//!
//! Trial `t` at every SNR point synthesizes its batch with seed
//! `base_seed + t`, and every estimator sees that same batch. Trials are
//! independent, so the parallel and serial paths produce identical results.

use rayon::prelude::*;

use crate::array::{synthesize_snapshots, ArrayGeometry, SnapshotBatch};
use crate::error::Result;
use crate::esprit::{esprit, Attribution, DoaEstimate, EstimateFlags};
use crate::harness::config::{Estimator, ExperimentConfig, RmseSources};
use crate::kai::{iesprit, two_step_kai};
use crate::metrics::{crb_sqrt_deg_over, probability_of_resolution, rmse, TrialOutcome};
use crate::array::sample_covariance;

/// Runs one estimator on a batch.
pub fn run_estimator(
    estimator: Estimator,
    batch: &SnapshotBatch,
    geom: &ArrayGeometry,
    num_sources: usize,
    known_doas: &[f64],
    increment: f64,
) -> Result<DoaEstimate> {
    match estimator {
        Estimator::Esprit => esprit(&sample_covariance(batch), num_sources, geom),
        Estimator::Iesprit => Ok(iesprit(batch, geom, num_sources, increment)?.estimate),
        Estimator::TwoStepKai => {
            Ok(two_step_kai(batch, geom, num_sources, known_doas, increment)?.estimate)
        }
    }
}

/// One estimator on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub outcome: TrialOutcome,
    pub mu_opt: Option<f64>,
    pub flags: EstimateFlags,
    pub failed: bool,
}

#[derive(Debug, Clone)]
pub struct EstimatorTrials {
    pub estimator: Estimator,
    pub trials: Vec<TrialRecord>,
}

impl EstimatorTrials {
    pub fn outcomes(&self) -> Vec<TrialOutcome> {
        self.trials.iter().map(|t| t.outcome.clone()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SnrPoint {
    pub snr_db: f64,
    pub crb_sqrt_deg: f64,
    pub per_estimator: Vec<EstimatorTrials>,
}

impl SnrPoint {
    pub fn trials_for(&self, estimator: Estimator) -> Option<&EstimatorTrials> {
        self.per_estimator.iter().find(|e| e.estimator == estimator)
    }
}

/// Every per-trial record of a sweep.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub points: Vec<SnrPoint>,
}

impl ExperimentRun {
    pub fn table(&self) -> ResultTable {
        let rows = self
            .points
            .iter()
            .flat_map(|point| {
                point.per_estimator.iter().map(move |et| {
                    let outcomes = et.outcomes();
                    let rmse_deg = rmse(&outcomes);
                    let mus: Vec<f64> = et.trials.iter().filter_map(|t| t.mu_opt).collect();
                    let mean_mu_opt = if mus.is_empty() {
                        f64::NAN
                    } else {
                        mus.iter().sum::<f64>() / mus.len() as f64
                    };
                    ResultRow {
                        snr_db: point.snr_db,
                        estimator: et.estimator,
                        rmse_deg,
                        rmse_db: 20.0 * rmse_deg.log10(),
                        prob_resolution: probability_of_resolution(&outcomes),
                        mean_mu_opt,
                        crb_sqrt_deg: point.crb_sqrt_deg,
                    }
                })
            })
            .collect();
        ResultTable { rows }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub snr_db: f64,
    pub estimator: Estimator,
    pub rmse_deg: f64,
    /// `20 log10(rmse_deg)`.
    pub rmse_db: f64,
    pub prob_resolution: f64,
    /// NaN for estimators without a reliability-factor sweep.
    pub mean_mu_opt: f64,
    pub crb_sqrt_deg: f64,
}

/// One row per (SNR, estimator), SNR-major in grid order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn estimators(&self) -> Vec<Estimator> {
        let mut out = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.estimator) {
                out.push(r.estimator);
            }
        }
        out
    }

    pub fn rows_for(&self, estimator: Estimator) -> Vec<ResultRow> {
        self.rows.iter().filter(|r| r.estimator == estimator).copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    Ok(run_sweep(config)?.table())
}

/// Full sweep keeping every per-trial record.
pub fn run_sweep(config: &ExperimentConfig) -> Result<ExperimentRun> {
    let points = config
        .snr_grid_db
        .iter()
        .map(|&snr| run_point(config, snr))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentRun { points })
}

fn run_point(config: &ExperimentConfig, snr_db: f64) -> Result<SnrPoint> {
    let scenario = config.scenario_at(snr_db)?;
    let geom = config.geometry;
    let eval_indices = match config.rmse_sources {
        RmseSources::Unknown => scenario.unknown_indices(),
        RmseSources::All => (0..scenario.num_sources()).collect(),
    };
    let crb_sqrt_deg = crb_sqrt_deg_over(&scenario, &geom, snr_db, &eval_indices)
        .map(|c| {
            // the override decouples noise from the SNR label
            match config.noise_variance_override {
                Some(var) => c * (var / crate::array::noise_variance_from_snr_db(snr_db)).sqrt(),
                None => c,
            }
        })
        .unwrap_or(f64::NAN);

    let run_trial = |t: usize| -> Result<Vec<TrialRecord>> {
        let seed = config.base_seed.wrapping_add(t as u64);
        let batch = synthesize_snapshots(&scenario, &geom, seed)?;
        Ok(config
            .estimators
            .iter()
            .map(|&est| evaluate_trial(config, est, &batch, &geom, &eval_indices, snr_db, seed))
            .collect())
    };

    let per_trial: Vec<Vec<TrialRecord>> = if config.parallel {
        (0..config.trials).into_par_iter().map(run_trial).collect::<Result<_>>()?
    } else {
        (0..config.trials).map(run_trial).collect::<Result<_>>()?
    };

    let per_estimator = config
        .estimators
        .iter()
        .enumerate()
        .map(|(k, &estimator)| EstimatorTrials {
            estimator,
            trials: per_trial.iter().map(|recs| recs[k].clone()).collect(),
        })
        .collect();
    Ok(SnrPoint {
        snr_db,
        crb_sqrt_deg,
        per_estimator,
    })
}

fn evaluate_trial(
    config: &ExperimentConfig,
    estimator: Estimator,
    batch: &SnapshotBatch,
    geom: &ArrayGeometry,
    eval_indices: &[usize],
    snr_db: f64,
    seed: u64,
) -> TrialRecord {
    let truth = batch.scenario.doas();
    let known_doas = match estimator {
        Estimator::TwoStepKai => config.known_doas(),
        _ => Vec::new(),
    };
    let estimate = match run_estimator(
        estimator,
        batch,
        geom,
        truth.len(),
        &known_doas,
        config.increment,
    ) {
        Ok(e) => e,
        Err(err) => {
            log::warn!("{estimator} failed at {snr_db} dB, seed {seed}: {err}");
            return TrialRecord {
                outcome: TrialOutcome::failed(),
                mu_opt: None,
                flags: EstimateFlags::default(),
                failed: true,
            };
        }
    };
    let known_indices: Vec<usize> = (0..truth.len()).filter(|i| !eval_indices.contains(i)).collect();
    // evaluating every source: known pass-through angles count as zero-error estimates
    let evaluated = if known_indices.is_empty() {
        DoaEstimate {
            attribution: vec![Attribution::Estimated; estimate.len()],
            ..estimate.clone()
        }
    } else {
        estimate.clone()
    };
    let outcome = match TrialOutcome::evaluate(truth, &evaluated, &known_indices) {
        Ok(o) => o,
        Err(err) => {
            log::warn!("{estimator} output could not be scored at {snr_db} dB, seed {seed}: {err}");
            TrialOutcome::failed()
        }
    };
    if outcome.errors_deg.iter().any(|e| !e.is_finite()) {
        log::warn!("{estimator} produced a non-finite error at {snr_db} dB, seed {seed}");
    }
    TrialRecord {
        outcome,
        mu_opt: estimate.mu_opt,
        flags: estimate.flags,
        failed: false,
    }
}

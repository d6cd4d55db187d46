//! Independent Monte-Carlo verification engine. Quadratures are sampled as
//! classical Gaussian variables (exact for moments, since everything in
//! scope is Gaussian), propagated through the step programs, and the output
//! moments are estimated with standard errors.
//!
//! Sampling is chunked; chunk k draws from a dedicated RNG stream derived
//! from (seed, k) and chunks are reduced in index order, so results are
//! independent of the number of parallel workers.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phase_space::GaussianState;
use crate::protocols::{build_program, ProtocolConfig, Step, TranscriptEntry};
use crate::symplectic::embed;

const CHUNK: usize = 1 << 13;

/// Eigenvalues of a covariance above this negative floor are clipped to
/// zero when factoring; anything lower is rejected.
const PSD_CLIP: f64 = -1e-10;

/// A reproducible batch of phase-space samples (columns) for one state.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub seed: u64,
    pub stream_id: u64,
    values: DMatrix<f64>,
}

impl SampleBatch {
    /// dim x n_samples matrix; each column is one phase-space point.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }
}

/// Sample mean/covariance with standard errors.
#[derive(Debug, Clone)]
pub struct EmpiricalMoments {
    pub n_samples: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub mean_se: DVector<f64>,
    pub cov_se: DMatrix<f64>,
}

/// Factor B with B B^T = cov, via symmetric eigendecomposition with
/// small-negative clipping.
fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = cov.clone().symmetric_eigen();
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < PSD_CLIP {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: lambda });
        }
        let s = lambda.max(0.0).sqrt();
        scaled.column_mut(j).scale_mut(s);
    }
    Ok(scaled)
}

fn draw_columns<R: Rng + ?Sized>(
    factor: &DMatrix<f64>,
    mean: &DVector<f64>,
    n: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let dim = factor.nrows();
    let z = DMatrix::from_fn(dim, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut vals = factor * z;
    for mut col in vals.column_iter_mut() {
        col += mean;
    }
    vals
}

/// Draws n samples from the state's Gaussian (Wigner) distribution.
/// Deterministic for fixed (seed, n).
pub fn sample_state(state: &GaussianState, n: usize, seed: u64) -> Result<SampleBatch> {
    sample_state_stream(state, n, seed, 0)
}

pub fn sample_state_stream(
    state: &GaussianState,
    n: usize,
    seed: u64,
    stream_id: u64,
) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::invalid("sample count must be >= 1"));
    }
    let factor = psd_factor(state.cov())?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    let values = draw_columns(&factor, state.mean(), n, &mut rng);
    Ok(SampleBatch { seed, stream_id, values })
}

/// Unbiased sample mean and covariance with standard errors
/// SE(cov_ij) ~ sqrt((cov_ii cov_jj + cov_ij^2) / n).
pub fn empirical_moments(batch: &SampleBatch) -> Result<EmpiricalMoments> {
    moments_from_sums(&accumulate(&batch.values))
}

struct Sums {
    n: usize,
    sum: DVector<f64>,
    outer: DMatrix<f64>,
}

fn accumulate(values: &DMatrix<f64>) -> Sums {
    let dim = values.nrows();
    let sum = DVector::from_iterator(dim, values.row_iter().map(|r| r.sum()));
    let outer = values * values.transpose();
    Sums { n: values.ncols(), sum, outer }
}

fn merge(mut a: Sums, b: Sums) -> Sums {
    a.n += b.n;
    a.sum += b.sum;
    a.outer += b.outer;
    a
}

fn moments_from_sums(sums: &Sums) -> Result<EmpiricalMoments> {
    let n = sums.n;
    if n < 2 {
        return Err(Error::invalid("need at least 2 samples for moments"));
    }
    let nf = n as f64;
    let mean = &sums.sum / nf;
    let cov = (&sums.outer - &mean * mean.transpose() * nf) / (nf - 1.0);
    let cov = (&cov + cov.transpose()) * 0.5;
    let dim = mean.len();
    let mean_se = DVector::from_fn(dim, |i, _| (cov[(i, i)].max(0.0) / nf).sqrt());
    let cov_se = DMatrix::from_fn(dim, dim, |i, j| {
        ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)] * cov[(i, j)]) / nf).sqrt()
    });
    Ok(EmpiricalMoments { n_samples: n, mean, cov, mean_se, cov_se })
}

/// Trajectory-mode run: empirical output moments plus the executed
/// transcript (outcomes are per-step means over all runs).
#[derive(Debug, Clone)]
pub struct TrajectoryRun {
    pub moments: EmpiricalMoments,
    pub transcript: Vec<TranscriptEntry>,
}

/// Per-chunk precomputation: sampling factors for the initial state and for
/// every Attach step.
struct Prepared {
    initial: GaussianState,
    initial_factor: DMatrix<f64>,
    steps: Vec<Step>,
    attach_factors: Vec<Option<DMatrix<f64>>>,
}

fn prepare(config: &ProtocolConfig) -> Result<Prepared> {
    let (initial, steps) = build_program(config)?;
    let initial_factor = psd_factor(initial.cov())?;
    let attach_factors = steps
        .iter()
        .map(|s| match s {
            Step::Attach { state, .. } => psd_factor(state.cov()).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared { initial, initial_factor, steps, attach_factors })
}

fn remove_mode_rows(vals: &DMatrix<f64>, mode: usize) -> DMatrix<f64> {
    let keep: Vec<usize> = (0..vals.nrows()).filter(|&r| r / 2 != mode).collect();
    DMatrix::from_fn(keep.len(), vals.ncols(), |i, j| vals[(keep[i], j)])
}

/// Runs one chunk of trajectories; returns moment sums over the final
/// register plus the per-measurement outcome sums.
fn run_chunk(prep: &Prepared, n: usize, seed: u64, stream_id: u64) -> Result<(Sums, Vec<f64>)> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    let mut vals = draw_columns(&prep.initial_factor, prep.initial.mean(), n, &mut rng);
    let mut outcome_sums = Vec::new();
    for (k, step) in prep.steps.iter().enumerate() {
        match step {
            Step::Attach { state, .. } => {
                let factor = prep.attach_factors[k].as_ref().expect("factor for attach step");
                let extra = draw_columns(factor, state.mean(), n, &mut rng);
                let mut stacked = DMatrix::zeros(vals.nrows() + extra.nrows(), n);
                stacked.view_mut((0, 0), (vals.nrows(), n)).copy_from(&vals);
                stacked.view_mut((vals.nrows(), 0), (extra.nrows(), n)).copy_from(&extra);
                vals = stacked;
            }
            Step::Unitary { map, targets, .. } => {
                let full = embed(map, targets, vals.nrows() / 2)?;
                vals = full.matrix() * vals;
            }
            Step::Channel { mode, channel, .. } => {
                let sd = channel.added_noise().sqrt();
                for q in [2 * mode, 2 * mode + 1] {
                    for j in 0..n {
                        vals[(q, j)] += sd * rng.sample::<f64, _>(StandardNormal);
                    }
                }
            }
            Step::AddNoise { quad, var, .. } => {
                let sd = var.sqrt();
                let q = quad.quad_index();
                for j in 0..n {
                    vals[(q, j)] += sd * rng.sample::<f64, _>(StandardNormal);
                }
            }
            Step::MeasureFeedforward { sel, gains, .. } => {
                let q = sel.quad_index();
                let outcomes = vals.row(q).clone_owned();
                for (target, gain) in gains {
                    let tq = target.quad_index();
                    for j in 0..n {
                        vals[(tq, j)] += gain * outcomes[j];
                    }
                }
                outcome_sums.push(outcomes.sum());
                vals = remove_mode_rows(&vals, sel.mode);
            }
        }
    }
    Ok((accumulate(&vals), outcome_sums))
}

/// Simulates `n_runs` trajectories of the protocol and aggregates output
/// moments over the final (A, B) register. Deterministic for a fixed seed
/// regardless of worker count.
pub fn run_protocol_trajectories(
    config: &ProtocolConfig,
    n_runs: usize,
    seed: u64,
) -> Result<TrajectoryRun> {
    if n_runs == 0 {
        return Err(Error::invalid("n_runs must be >= 1"));
    }
    let prep = prepare(config)?;
    let n_chunks = n_runs.div_ceil(CHUNK);
    let chunk_sizes: Vec<usize> = (0..n_chunks)
        .map(|k| if k + 1 < n_chunks { CHUNK } else { n_runs - CHUNK * (n_chunks - 1) })
        .collect();
    let partials: Vec<(Sums, Vec<f64>)> = chunk_sizes
        .par_iter()
        .enumerate()
        .map(|(k, &sz)| run_chunk(&prep, sz, seed, k as u64 + 1))
        .collect::<Result<Vec<_>>>()?;
    let mut iter = partials.into_iter();
    let (mut sums, mut outcome_sums) = iter.next().expect("at least one chunk");
    for (s, o) in iter {
        sums = merge(sums, s);
        for (acc, v) in outcome_sums.iter_mut().zip(o) {
            *acc += v;
        }
    }
    let moments = moments_from_sums(&sums)?;
    let mut transcript = Vec::new();
    let mut m = 0usize;
    for step in &prep.steps {
        let (op, modes, params) = step.desc().clone();
        let outcome = if matches!(step, Step::MeasureFeedforward { .. }) {
            let mean = outcome_sums[m] / n_runs as f64;
            m += 1;
            Some(mean)
        } else {
            None
        };
        transcript.push(TranscriptEntry { op, modes, params, outcome });
    }
    Ok(TrajectoryRun { moments, transcript })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::SqueezeAxis;
    use crate::protocols::{run, ProtocolKind, RunMode};

    #[test]
    fn vacuum_sampling_moments() {
        let st = GaussianState::vacuum(1).unwrap();
        let batch = sample_state(&st, 1_000_000, 3).unwrap();
        let m = empirical_moments(&batch).unwrap();
        assert!((m.cov[(0, 0)] - 0.5).abs() < 0.005);
        assert!((m.cov[(1, 1)] - 0.5).abs() < 0.005);
        assert!(m.mean[0].abs() < 5.0 * m.mean_se[0]);
    }

    #[test]
    fn squeezed_sampling_mean_within_band() {
        let st = GaussianState::squeezed_vacuum(1.0, SqueezeAxis::P).unwrap();
        let batch = sample_state(&st, 200_000, 5).unwrap();
        let m = empirical_moments(&batch).unwrap();
        for i in 0..2 {
            assert!(m.mean[i].abs() < 5.0 * m.mean_se[i]);
        }
        assert!((m.cov[(1, 1)] - st.var(0, 1)).abs() < 5.0 * m.cov_se[(1, 1)]);
    }

    #[test]
    fn fixed_seed_reproduces_batch() {
        let st = GaussianState::epr_pair(0.5).unwrap();
        let a = sample_state(&st, 1000, 9).unwrap();
        let b = sample_state(&st, 1000, 9).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn moments_require_two_samples() {
        let st = GaussianState::vacuum(1).unwrap();
        let batch = sample_state(&st, 1, 1).unwrap();
        assert!(empirical_moments(&batch).is_err());
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let bad = GaussianState::from_moments_unchecked(
            DVector::zeros(2),
            DMatrix::from_diagonal(&DVector::from_vec(vec![-0.2, 1.0])),
        );
        assert!(sample_state(&bad, 10, 0).is_err());
    }

    #[test]
    fn trajectories_match_ensemble_for_fig1() {
        let mut cfg = ProtocolConfig::new(ProtocolKind::Fig1);
        cfg.squeezing = 0.5;
        cfg.channel = Some(crate::channel::ChannelModel::new(0.8, 1.0).unwrap());
        let ens = run(&cfg).unwrap();
        let traj = run_protocol_trajectories(&cfg, 400_000, 12).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let diff = (traj.moments.cov[(i, j)] - ens.output.cov()[(i, j)]).abs();
                assert!(diff <= 5.0 * traj.moments.cov_se[(i, j)], "cov[{i},{j}] off by {diff}");
            }
            let md = (traj.moments.mean[i] - ens.output.mean()[i]).abs();
            assert!(md <= 5.0 * traj.moments.mean_se[i].max(1e-12));
        }
    }

    #[test]
    fn trajectories_match_ensemble_for_teleport() {
        let mut cfg = ProtocolConfig::new(ProtocolKind::TeleportBaseline);
        cfg.squeezing = 1.0;
        cfg.channel = Some(crate::channel::ChannelModel::new(0.9, 1.0).unwrap());
        let ens = run(&cfg).unwrap();
        let traj = run_protocol_trajectories(&cfg, 400_000, 21).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let diff = (traj.moments.cov[(i, j)] - ens.output.cov()[(i, j)]).abs();
                assert!(diff <= 5.0 * traj.moments.cov_se[(i, j)], "cov[{i},{j}] off by {diff}");
            }
        }
    }

    #[test]
    fn classical_benchmark_trajectories() {
        let cfg = ProtocolConfig::new(ProtocolKind::ClassicalBenchmark);
        let traj = run_protocol_trajectories(&cfg, 400_000, 8).unwrap();
        // Var(X'_B) = 2.0 within 5 SE
        let d = (traj.moments.cov[(2, 2)] - 2.0).abs();
        assert!(d <= 5.0 * traj.moments.cov_se[(2, 2)]);
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let mut cfg = ProtocolConfig::new(ProtocolKind::Fig2);
        cfg.squeezing = 0.7;
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = single.install(|| run_protocol_trajectories(&cfg, 50_000, 77).unwrap());
        let b = run_protocol_trajectories(&cfg, 50_000, 77).unwrap();
        assert_eq!(a.moments.mean, b.moments.mean);
        assert_eq!(a.moments.cov, b.moments.cov);
    }

    #[test]
    fn trajectory_mode_via_protocol_run() {
        let mut cfg = ProtocolConfig::new(ProtocolKind::IdealQnd);
        cfg.gain_alice = 2.0;
        cfg.gain_bob = 1.0;
        cfg.mode = RunMode::Trajectory { seed: 4, n_runs: 400_000 };
        let res = run(&cfg).unwrap();
        // Var(X'_B) = 0.5 * (1 + 4) = 2.5
        assert!((res.output.var(1, 0) - 2.5).abs() < 0.03);
    }
}

//! Ideal homodyne measurement of a single quadrature: Gaussian conditioning,
//! outcome sampling, classical feedforward displacement, and the
//! outcome-averaged (ensemble) map. The measured mode is removed from the
//! register; subsequent modes are renumbered.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::phase_space::GaussianState;

/// Variance below which a quadrature is treated as deterministic and
/// conditioning on it is rejected.
pub const DEGENERATE_VAR: f64 = 1e-12;

/// X or P quadrature of a mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    P,
}

impl Axis {
    pub fn offset(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::P => 1,
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::X => write!(f, "X"),
            Axis::P => write!(f, "P"),
        }
    }
}

/// Selects one quadrature of one mode (by current register index).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSelector {
    pub mode: usize,
    pub axis: Axis,
}

impl QuadratureSelector {
    pub fn x(mode: usize) -> Self {
        Self { mode, axis: Axis::X }
    }

    pub fn p(mode: usize) -> Self {
        Self { mode, axis: Axis::P }
    }

    pub fn quad_index(&self) -> usize {
        2 * self.mode + self.axis.offset()
    }
}

/// Outcome-proportional displacements applied after measuring `source`.
#[derive(Debug, Clone)]
pub struct FeedforwardRule {
    pub source: QuadratureSelector,
    pub gains: Vec<(QuadratureSelector, f64)>,
}

fn check_selector(state: &GaussianState, sel: &QuadratureSelector) -> Result<()> {
    if sel.mode >= state.n_modes() {
        return Err(Error::invalid(format!("mode {} out of range", sel.mode)));
    }
    Ok(())
}

/// Quadrature indices remaining after dropping the measured mode.
fn remaining_quads(n_modes: usize, measured_mode: usize) -> Vec<usize> {
    (0..n_modes)
        .filter(|&m| m != measured_mode)
        .flat_map(|m| [2 * m, 2 * m + 1])
        .collect()
}

fn partition(
    state: &GaussianState,
    sel: &QuadratureSelector,
) -> (Vec<usize>, usize, DVector<f64>, DMatrix<f64>, DVector<f64>, f64) {
    let q = sel.quad_index();
    let rem = remaining_quads(state.n_modes(), sel.mode);
    let mean_r = DVector::from_iterator(rem.len(), rem.iter().map(|&i| state.mean()[i]));
    let cov_rr = DMatrix::from_fn(rem.len(), rem.len(), |i, j| state.cov()[(rem[i], rem[j])]);
    let cov_rm = DVector::from_iterator(rem.len(), rem.iter().map(|&i| state.cov()[(i, q)]));
    let var_m = state.cov()[(q, q)];
    (rem, q, mean_r, cov_rr, cov_rm, var_m)
}

/// Conditions the state on an exact homodyne outcome of the selected
/// quadrature; the measured mode drops out of the register. The conditional
/// covariance is the Schur complement and is outcome-independent.
pub fn condition_on_outcome(
    state: &GaussianState,
    sel: &QuadratureSelector,
    outcome: f64,
) -> Result<GaussianState> {
    check_selector(state, sel)?;
    if state.n_modes() < 2 {
        return Err(Error::invalid("conditioning needs at least 2 modes"));
    }
    if !outcome.is_finite() {
        return Err(Error::invalid("outcome must be finite"));
    }
    let (_, q, mean_r, cov_rr, cov_rm, var_m) = partition(state, sel);
    if var_m <= DEGENERATE_VAR {
        return Err(Error::DegenerateMeasurement { var: var_m });
    }
    let mean = mean_r + &cov_rm * ((outcome - state.mean()[q]) / var_m);
    let cov = cov_rr - &cov_rm * cov_rm.transpose() / var_m;
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianState::from_moments_unchecked(mean, cov))
}

/// Draws an outcome from the marginal of the selected quadrature and returns
/// it with the conditioned state.
pub fn sample_outcome<R: Rng + ?Sized>(
    state: &GaussianState,
    sel: &QuadratureSelector,
    rng: &mut R,
) -> Result<(f64, GaussianState)> {
    check_selector(state, sel)?;
    let q = sel.quad_index();
    let var = state.cov()[(q, q)];
    if var <= DEGENERATE_VAR {
        return Err(Error::DegenerateMeasurement { var });
    }
    let normal = Normal::new(state.mean()[q], var.sqrt())
        .map_err(|e| Error::invalid(format!("bad marginal: {e}")))?;
    let outcome = normal.sample(rng);
    let conditioned = condition_on_outcome(state, sel, outcome)?;
    Ok((outcome, conditioned))
}

/// Shifts each target quadrature by gain * outcome; covariance unchanged.
pub fn feedforward_displace(
    state: &GaussianState,
    gains: &[(QuadratureSelector, f64)],
    outcome: f64,
) -> Result<GaussianState> {
    let mut mean = state.mean().clone();
    for (target, gain) in gains {
        check_selector(state, target)?;
        if !gain.is_finite() {
            return Err(Error::invalid("feedforward gain must be finite"));
        }
        mean[target.quad_index()] += gain * outcome;
    }
    Ok(GaussianState::from_moments_unchecked(mean, state.cov().clone()))
}

/// Deterministic outcome-average of measure-then-displace: measures `sel`,
/// adds gain * outcome to each target quadrature, removes the measured mode.
/// Target selectors are indices in the register *before* removal and must
/// not touch the measured mode.
pub fn ensemble_map(
    state: &GaussianState,
    sel: &QuadratureSelector,
    gains: &[(QuadratureSelector, f64)],
) -> Result<GaussianState> {
    check_selector(state, sel)?;
    if state.n_modes() < 2 {
        return Err(Error::invalid("ensemble map needs at least 2 modes"));
    }
    let (rem, _, mean_r, cov_rr, cov_rm, var_m) = partition(state, sel);
    let mut c = DVector::zeros(rem.len());
    for (target, gain) in gains {
        check_selector(state, target)?;
        if target.mode == sel.mode {
            return Err(Error::invalid("feedforward target cannot be the measured mode"));
        }
        if !gain.is_finite() {
            return Err(Error::invalid("feedforward gain must be finite"));
        }
        let pos = rem
            .iter()
            .position(|&i| i == target.quad_index())
            .expect("target quad survives mode removal");
        c[pos] += gain;
    }
    let q = sel.quad_index();
    let mean = mean_r + &c * state.mean()[q];
    let cov = cov_rr
        + &c * cov_rm.transpose()
        + &cov_rm * c.transpose()
        + &c * c.transpose() * var_m;
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianState::from_moments_unchecked(mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{check_physicality, symplectic_eigenvalues, GaussianState, SqueezeAxis, V0};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn uncorrelated_mode_measurement_leaves_rest_unchanged() {
        let st = GaussianState::squeezed_vacuum(0.7, SqueezeAxis::X)
            .unwrap()
            .tensor(&GaussianState::vacuum(1).unwrap());
        let out = condition_on_outcome(&st, &QuadratureSelector::x(1), 2.5).unwrap();
        let before = st.marginal(&[0]).unwrap();
        assert!((out.cov() - before.cov()).amax() < 1e-15);
        assert!((out.mean() - before.mean()).amax() < 1e-15);
    }

    #[test]
    fn epr_conditioning_matches_closed_form() {
        let r = 0.9;
        let epr = GaussianState::epr_pair(r).unwrap();
        let xbar = 1.7;
        let out = condition_on_outcome(&epr, &QuadratureSelector::x(0), xbar).unwrap();
        // conditional mean of X_2 = -tanh(2r) * xbar; Var(X_2) = V0 / cosh(2r)
        assert!((out.mean()[0] + (2.0 * r).tanh() * xbar).abs() < 1e-12);
        assert!((out.var(0, 0) - V0 / (2.0 * r).cosh()).abs() < 1e-12);
        // conditioning a pure state keeps it pure
        let nus = symplectic_eigenvalues(out.cov()).unwrap();
        assert!((nus[0] - V0).abs() < 1e-9);
    }

    #[test]
    fn epr_conditioning_matches_sampling_oracle() {
        // brute-force check of the 2D Gaussian conditional via rejection on a
        // narrow outcome window
        let r = 0.6;
        let epr = GaussianState::epr_pair(r).unwrap();
        let xbar = 0.8;
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let batch = crate::mc::sample_state(&epr, 4_000_000, 31).unwrap();
        let mut vals = Vec::new();
        for col in 0..batch.values().ncols() {
            let x1 = batch.values()[(0, col)];
            if (x1 - xbar).abs() < 0.02 {
                vals.push(batch.values()[(2, col)]);
            }
        }
        let _ = &mut rng;
        assert!(vals.len() > 5_000);
        let n = vals.len() as f64;
        let mean: f64 = vals.iter().sum::<f64>() / n;
        let var: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let out = condition_on_outcome(&epr, &QuadratureSelector::x(0), xbar).unwrap();
        let se_mean = (var / n).sqrt();
        assert!((mean - out.mean()[0]).abs() < 5.0 * se_mean + 0.02, "mean {mean} vs {}", out.mean()[0]);
        let se_var = var * (2.0 / n).sqrt();
        assert!((var - out.var(0, 0)).abs() < 5.0 * se_var + 0.01, "var {var} vs {}", out.var(0, 0));
    }

    #[test]
    fn conditioning_never_increases_covariance() {
        let st = GaussianState::epr_pair(0.8)
            .unwrap()
            .tensor(&GaussianState::squeezed_vacuum(0.5, SqueezeAxis::P).unwrap());
        let sel = QuadratureSelector::p(1);
        let out = condition_on_outcome(&st, &sel, -0.4).unwrap();
        let (rem, _, _, cov_rr, _, _) = super::partition(&st, &sel);
        assert_eq!(rem.len(), out.dim());
        let diff = cov_rr - out.cov();
        let eig = diff.symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e >= -1e-12));
    }

    #[test]
    fn degenerate_measurement_rejected() {
        let st = GaussianState::from_moments_unchecked(
            nalgebra::DVector::zeros(4),
            nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0, 0.5, 0.5])),
        );
        let err = condition_on_outcome(&st, &QuadratureSelector::x(0), 0.0);
        assert!(matches!(err, Err(Error::DegenerateMeasurement { .. })));
    }

    #[test]
    fn sample_outcome_statistics_and_determinism() {
        let st = GaussianState::vacuum(2).unwrap();
        let sel = QuadratureSelector::x(0);
        let n = 1_000_000usize;
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let (o, _) = sample_outcome(&st, &sel, &mut rng).unwrap();
            sum += o;
            sumsq += o * o;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 5.0 * (0.5 / n as f64).sqrt());
        assert!((var - 0.5).abs() < 0.005);

        // fixed seed reproduces the sequence exactly
        let mut r1 = ChaCha12Rng::seed_from_u64(42);
        let mut r2 = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..100 {
            let (a, _) = sample_outcome(&st, &sel, &mut r1).unwrap();
            let (b, _) = sample_outcome(&st, &sel, &mut r2).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn feedforward_displaces_mean_only() {
        let st = GaussianState::vacuum(2).unwrap();
        let gains = [(QuadratureSelector::x(1), 2.0)];
        let same = feedforward_displace(&st, &gains, 0.0).unwrap();
        assert!((same.mean() - st.mean()).amax() == 0.0);
        let out = feedforward_displace(&st, &gains, 1.5).unwrap();
        assert_eq!(out.mean()[2], 3.0);
        assert!((out.cov() - st.cov()).amax() == 0.0);
        // sequential displacements commute
        let g2 = [(QuadratureSelector::p(0), -1.0)];
        let ab = feedforward_displace(&feedforward_displace(&st, &gains, 1.0).unwrap(), &g2, 2.0).unwrap();
        let ba = feedforward_displace(&feedforward_displace(&st, &g2, 2.0).unwrap(), &gains, 1.0).unwrap();
        assert!((ab.mean() - ba.mean()).amax() == 0.0);
    }

    #[test]
    fn ensemble_map_zero_gain_is_marginalization() {
        let st = GaussianState::epr_pair(0.4).unwrap();
        let out = ensemble_map(&st, &QuadratureSelector::x(0), &[]).unwrap();
        let marg = st.marginal(&[1]).unwrap();
        assert!((out.cov() - marg.cov()).amax() < 1e-15);
    }

    #[test]
    fn ensemble_map_rejects_target_on_measured_mode() {
        let st = GaussianState::vacuum(2).unwrap();
        let err = ensemble_map(
            &st,
            &QuadratureSelector::x(0),
            &[(QuadratureSelector::p(0), 1.0)],
        );
        assert!(err.is_err());
    }

    #[test]
    fn ensemble_map_preserves_physicality() {
        let st = GaussianState::epr_pair(1.2)
            .unwrap()
            .tensor(&GaussianState::vacuum(1).unwrap());
        let out = ensemble_map(
            &st,
            &QuadratureSelector::x(0),
            &[(QuadratureSelector::x(2), 1.0), (QuadratureSelector::p(1), -0.5)],
        )
        .unwrap();
        assert!(check_physicality(&out).unwrap().pass);
    }
}

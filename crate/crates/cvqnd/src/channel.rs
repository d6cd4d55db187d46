//! Gaussian noisy channel: a lossy channel of transmitivity T preceded by a
//! phase-insensitive amplifier compensating the loss. Net effect on the
//! transmitted mode is additive symmetric Gaussian noise of variance
//! (1 - T^2) * noise_var in each quadrature, with means unchanged.

use crate::error::{Error, Result};
use crate::phase_space::{GaussianState, V0};

/// Pre-amplified lossy channel. `noise_var` is the variance of each noise
/// operator; the default 2 * V0 is the vacuum environment plus the
/// compensating amplifier's idler contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    t: f64,
    noise_var: f64,
}

impl ChannelModel {
    pub fn new(t: f64, noise_var: f64) -> Result<Self> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::invalid(format!("transmitivity {t} outside (0, 1]")));
        }
        if !(noise_var >= 0.0) || !noise_var.is_finite() {
            return Err(Error::invalid(format!("noise variance {noise_var} must be >= 0")));
        }
        Ok(Self { t, noise_var })
    }

    /// Channel with the default noise variance 2 * V0.
    pub fn with_default_noise(t: f64) -> Result<Self> {
        Self::new(t, 2.0 * V0)
    }

    pub fn transmitivity(&self) -> f64 {
        self.t
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Variance added to each quadrature: (1 - T^2) * noise_var.
    pub fn added_noise(&self) -> f64 {
        (1.0 - self.t * self.t) * self.noise_var
    }

    /// Applies the channel to one mode: means unchanged, both quadrature
    /// variances of the target mode enhanced by `added_noise`.
    pub fn apply(&self, state: &GaussianState, mode: usize) -> Result<GaussianState> {
        if mode >= state.n_modes() {
            return Err(Error::invalid(format!("mode {mode} out of range")));
        }
        let add = self.added_noise();
        let mut cov = state.cov().clone();
        cov[(2 * mode, 2 * mode)] += add;
        cov[(2 * mode + 1, 2 * mode + 1)] += add;
        Ok(GaussianState::from_moments_unchecked(state.mean().clone(), cov))
    }
}

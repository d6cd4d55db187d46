//! Phase-space representation of multimode Gaussian states.
//!
//! Every state is a mean vector and covariance matrix over N modes in the
//! fixed interleaved quadrature ordering (x1, p1, x2, p2, ...). Units are
//! hbar = 1, so each vacuum quadrature has variance `V0` = 1/2.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ground-state variance of each quadrature (hbar = 1).
pub const V0: f64 = 0.5;

/// Tolerance for covariance symmetry on construction.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Physicality slack: min symplectic eigenvalue must be >= V0 - PHYSICALITY_TOL.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Which quadrature of a squeezed vacuum carries the reduced variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqueezeAxis {
    X,
    P,
}

/// Stable name for a mode within a protocol register. Mode removal after a
/// measurement renumbers indices, so protocols address modes by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeName {
    A,
    B,
    C,
    One,
    Two,
    Env(u8),
}

impl std::fmt::Display for ModeName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModeName::A => write!(f, "A"),
            ModeName::B => write!(f, "B"),
            ModeName::C => write!(f, "C"),
            ModeName::One => write!(f, "1"),
            ModeName::Two => write!(f, "2"),
            ModeName::Env(k) => write!(f, "env{k}"),
        }
    }
}

/// Ordered register of named modes; index = position in the state.
#[derive(Debug, Clone, Default)]
pub struct ModeRegister {
    names: Vec<ModeName>,
}

impl ModeRegister {
    pub fn new(names: Vec<ModeName>) -> Result<Self> {
        for (i, a) in names.iter().enumerate() {
            if names[i + 1..].contains(a) {
                return Err(Error::invalid(format!("duplicate mode name {a}")));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: ModeName) -> Result<usize> {
        self.names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::invalid(format!("mode {name} not in register")))
    }

    pub fn push(&mut self, name: ModeName) -> Result<()> {
        if self.names.contains(&name) {
            return Err(Error::invalid(format!("duplicate mode name {name}")));
        }
        self.names.push(name);
        Ok(())
    }

    pub fn remove(&mut self, name: ModeName) -> Result<usize> {
        let idx = self.index_of(name)?;
        self.names.remove(idx);
        Ok(idx)
    }

    pub fn names(&self) -> &[ModeName] {
        &self.names
    }
}

/// The 2N x 2N symplectic form: block diagonal with [[0, 1], [-1, 0]].
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let dim = 2 * n_modes;
    let mut omega = DMatrix::zeros(dim, dim);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// A Gaussian state: first and second moments over `n_modes` modes.
#[derive(Debug, Clone)]
pub struct GaussianState {
    n_modes: usize,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Builds a state from raw moments. The covariance is symmetrized; an
    /// asymmetry beyond `SYMMETRY_TOL` or any non-finite entry is rejected.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::invalid(format!("mean length {dim} is not a positive even number")));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: cov.nrows() });
        }
        if mean.iter().any(|v| !v.is_finite()) || cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite moment entry"));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(Error::invalid(format!("covariance asymmetry {asym:e} exceeds {SYMMETRY_TOL:e}")));
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(Self { n_modes: dim / 2, mean, cov })
    }

    /// N-mode vacuum: zero mean, covariance V0 * I.
    pub fn vacuum(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::invalid("mode count must be at least 1"));
        }
        let dim = 2 * n_modes;
        Self::new(DVector::zeros(dim), DMatrix::identity(dim, dim) * V0)
    }

    /// Single-mode squeezed vacuum: the selected quadrature has variance
    /// V0 * exp(-2r), its conjugate V0 * exp(2r).
    pub fn squeezed_vacuum(r: f64, axis: SqueezeAxis) -> Result<Self> {
        if !r.is_finite() {
            return Err(Error::invalid("squeezing parameter must be finite"));
        }
        let (vx, vp) = match axis {
            SqueezeAxis::X => (V0 * (-2.0 * r).exp(), V0 * (2.0 * r).exp()),
            SqueezeAxis::P => (V0 * (2.0 * r).exp(), V0 * (-2.0 * r).exp()),
        };
        Self::new(DVector::zeros(2), DMatrix::from_diagonal(&DVector::from_vec(vec![vx, vp])))
    }

    /// Two-mode EPR state with Var(X1+X2) = Var(P1-P2) = 2 V0 exp(-2r),
    /// built by mixing two orthogonally squeezed vacua on a balanced beam
    /// splitter (mode "a" x-squeezed, mode "b" p-squeezed).
    pub fn epr_pair(r: f64) -> Result<Self> {
        let a = Self::squeezed_vacuum(r, SqueezeAxis::X)?;
        let b = Self::squeezed_vacuum(r, SqueezeAxis::P)?;
        let bs = crate::symplectic::balanced_beam_splitter();
        bs.apply(&a.tensor(&b))
    }

    /// Squeezed vacuum with the squeezed variance forced to exactly zero and
    /// the conjugate held at V0. Not a physical state; used by the
    /// idealized-resource runs where resource noise is set to zero.
    pub(crate) fn idealized_squeezed(axis: SqueezeAxis) -> Self {
        let (vx, vp) = match axis {
            SqueezeAxis::X => (0.0, V0),
            SqueezeAxis::P => (V0, 0.0),
        };
        Self {
            n_modes: 1,
            mean: DVector::zeros(2),
            cov: DMatrix::from_diagonal(&DVector::from_vec(vec![vx, vp])),
        }
    }

    /// EPR pair with Var(X1+X2) = Var(P1-P2) forced to exactly zero.
    pub(crate) fn idealized_epr() -> Self {
        let a = Self::idealized_squeezed(SqueezeAxis::X);
        let b = Self::idealized_squeezed(SqueezeAxis::P);
        let bs = crate::symplectic::balanced_beam_splitter();
        bs.apply(&a.tensor(&b)).expect("beam splitter on 2 modes")
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        2 * self.n_modes
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Variance of one quadrature; `axis` 0 = X, 1 = P.
    pub fn var(&self, mode: usize, axis: usize) -> f64 {
        let q = 2 * mode + axis;
        self.cov[(q, q)]
    }

    pub fn mean_of(&self, mode: usize, axis: usize) -> f64 {
        self.mean[2 * mode + axis]
    }

    /// Tensor product; `other`'s modes are appended after `self`'s.
    pub fn tensor(&self, other: &GaussianState) -> GaussianState {
        let d1 = self.dim();
        let d2 = other.dim();
        let mut mean = DVector::zeros(d1 + d2);
        mean.rows_mut(0, d1).copy_from(&self.mean);
        mean.rows_mut(d1, d2).copy_from(&other.mean);
        let mut cov = DMatrix::zeros(d1 + d2, d1 + d2);
        cov.view_mut((0, 0), (d1, d1)).copy_from(&self.cov);
        cov.view_mut((d1, d1), (d2, d2)).copy_from(&other.cov);
        GaussianState { n_modes: self.n_modes + other.n_modes, mean, cov }
    }

    /// Reduced state over a subset of modes (in the given order).
    pub fn marginal(&self, modes: &[usize]) -> Result<GaussianState> {
        for &m in modes {
            if m >= self.n_modes {
                return Err(Error::invalid(format!("mode {m} out of range")));
            }
        }
        let quads: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let mean = DVector::from_iterator(quads.len(), quads.iter().map(|&q| self.mean[q]));
        let cov = DMatrix::from_fn(quads.len(), quads.len(), |i, j| self.cov[(quads[i], quads[j])]);
        Ok(GaussianState { n_modes: modes.len(), mean, cov })
    }

    pub(crate) fn from_moments_unchecked(mean: DVector<f64>, cov: DMatrix<f64>) -> GaussianState {
        let n_modes = mean.len() / 2;
        GaussianState { n_modes, mean, cov }
    }
}

/// Symplectic eigenvalues of a covariance matrix: the absolute values of the
/// eigenvalues of Omega^-1 * cov, deduplicated to N values, descending.
///
/// Computed without a general (non-symmetric) eigensolver: for cov = L*L^T,
/// A = L^T * Omega * L is antisymmetric with singular values nu (each twice),
/// so the symmetric eigenvalues of A*A^T are the nu^2 in duplicate pairs.
/// Singular covariances get a tiny diagonal shift so Cholesky succeeds.
pub fn symplectic_eigenvalues(cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    let dim = cov.nrows();
    if dim == 0 || dim % 2 != 0 || cov.ncols() != dim {
        return Err(Error::invalid("covariance must be square with even dimension"));
    }
    let asym = (cov - cov.transpose()).amax();
    if asym > SYMMETRY_TOL {
        return Err(Error::invalid(format!("covariance asymmetry {asym:e} exceeds {SYMMETRY_TOL:e}")));
    }
    let chol = cov.clone().cholesky().or_else(|| {
        let shift = 1e-13 * (1.0 + cov.amax());
        let shifted = cov + DMatrix::identity(dim, dim) * shift;
        shifted.cholesky()
    });
    let l = match chol {
        Some(c) => c.unpack(),
        None => {
            let min_eig = cov.clone().symmetric_eigenvalues().min();
            return Err(Error::NotPositiveSemidefinite { eigenvalue: min_eig });
        }
    };
    let omega = symplectic_form(dim / 2);
    let a = l.transpose() * omega * &l;
    let k = &a * a.transpose();
    let mut mags: Vec<f64> = k.symmetric_eigenvalues().iter().map(|l| l.max(0.0).sqrt()).collect();
    mags.sort_by(|x, y| y.partial_cmp(x).unwrap());
    // nu^2 values come in duplicate pairs; average adjacent entries.
    let nus = (0..dim / 2).map(|j| 0.5 * (mags[2 * j] + mags[2 * j + 1])).collect();
    Ok(nus)
}

/// Outcome of a physicality check: pass/fail plus the worst margin
/// (min symplectic eigenvalue minus V0; negative means below vacuum).
#[derive(Debug, Clone, Copy)]
pub struct PhysicalityReport {
    pub pass: bool,
    pub margin: f64,
}

/// A state is physical iff its minimum symplectic eigenvalue is at least
/// V0 - PHYSICALITY_TOL.
pub fn check_physicality(state: &GaussianState) -> Result<PhysicalityReport> {
    let nus = symplectic_eigenvalues(state.cov())?;
    let min_nu = nus.iter().cloned().fold(f64::INFINITY, f64::min);
    let margin = min_nu - V0;
    Ok(PhysicalityReport { pass: margin >= -PHYSICALITY_TOL, margin })
}

//! Symplectic matrices for the Gaussian unitaries used by the protocols,
//! plus composition, embedding into larger registers, and application to
//! states. Every constructor validates S Omega S^T = Omega on construction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::phase_space::{symplectic_form, GaussianState};

/// Construction-time symplectic tolerance.
pub const SYMPLECTIC_TOL: f64 = 1e-12;

/// A linear map on quadratures preserving the symplectic form.
#[derive(Debug, Clone)]
pub struct SymplecticMap {
    n_modes: usize,
    matrix: DMatrix<f64>,
}

impl SymplecticMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim == 0 || dim % 2 != 0 || matrix.ncols() != dim {
            return Err(Error::invalid("symplectic matrix must be square with even dimension"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite matrix entry"));
        }
        let omega = symplectic_form(dim / 2);
        let dev = (&matrix * &omega * matrix.transpose() - &omega).amax();
        if dev > SYMPLECTIC_TOL {
            return Err(Error::NotSymplectic { max_dev: dev, tol: SYMPLECTIC_TOL });
        }
        Ok(Self { n_modes: dim / 2, matrix })
    }

    pub fn identity(n_modes: usize) -> Self {
        Self { n_modes, matrix: DMatrix::identity(2 * n_modes, 2 * n_modes) }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Heisenberg-picture propagation: mean -> S mean, cov -> S cov S^T.
    pub fn apply(&self, state: &GaussianState) -> Result<GaussianState> {
        if state.n_modes() != self.n_modes {
            return Err(Error::DimensionMismatch { expected: self.n_modes, got: state.n_modes() });
        }
        let mean = &self.matrix * state.mean();
        let cov = &self.matrix * state.cov() * self.matrix.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(GaussianState::from_moments_unchecked(mean, cov))
    }
}

/// Phase-space displacement; shifts means only.
#[derive(Debug, Clone)]
pub struct Displacement {
    n_modes: usize,
    offset: DVector<f64>,
}

impl Displacement {
    pub fn new(offset: DVector<f64>) -> Result<Self> {
        let dim = offset.len();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::invalid("offset length must be a positive even number"));
        }
        if offset.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite offset entry"));
        }
        Ok(Self { n_modes: dim / 2, offset })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn apply(&self, state: &GaussianState) -> Result<GaussianState> {
        if state.n_modes() != self.n_modes {
            return Err(Error::DimensionMismatch { expected: self.n_modes, got: state.n_modes() });
        }
        Ok(GaussianState::from_moments_unchecked(state.mean() + &self.offset, state.cov().clone()))
    }
}

/// QND coupling with gain g on two modes: mode 0 is the non-demolished
/// (A-role) mode, mode 1 the B-role mode:
///   X'_A = X_A,            P'_A = P_A - g P_B,
///   X'_B = X_B + g X_A,    P'_B = P_B.
pub fn qnd_coupling(g: f64) -> Result<SymplecticMap> {
    if !g.is_finite() {
        return Err(Error::invalid("QND gain must be finite"));
    }
    let mut m = DMatrix::identity(4, 4);
    m[(1, 3)] = -g;
    m[(2, 0)] = g;
    SymplecticMap::new(m)
}

/// Sign-flipped QND coupling on two modes (mode 0 = B-role, mode 1 = C-role):
///   X'_B = X_B - G X_C,    P'_B = P_B,
///   X'_C = X_C,            P'_C = P_C + G P_B.
/// Equals phase_shift(pi) on C, then qnd_coupling(G) with C as the A-role
/// mode, then phase_shift(pi) on C again.
pub fn qnd_sign_flipped(g: f64) -> Result<SymplecticMap> {
    if !g.is_finite() {
        return Err(Error::invalid("QND gain must be finite"));
    }
    let mut m = DMatrix::identity(4, 4);
    m[(0, 2)] = -g;
    m[(3, 1)] = g;
    SymplecticMap::new(m)
}

/// Single-mode rotation of (X, P) by `theta`; theta = pi negates both.
pub fn phase_shift(theta: f64) -> Result<SymplecticMap> {
    if !theta.is_finite() {
        return Err(Error::invalid("phase must be finite"));
    }
    let (s, c) = theta.sin_cos();
    let m = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
    SymplecticMap::new(m)
}

/// Single-mode squeezer: diag(e^r, e^-r) on (X, P).
pub fn squeezer(r: f64) -> Result<SymplecticMap> {
    if !r.is_finite() {
        return Err(Error::invalid("squeezing parameter must be finite"));
    }
    let m = DMatrix::from_diagonal(&DVector::from_vec(vec![r.exp(), (-r).exp()]));
    SymplecticMap::new(m)
}

/// Balanced beam splitter on two modes:
///   X'_1 = (X_1 + X_2)/sqrt(2), X'_2 = (X_1 - X_2)/sqrt(2), same for P.
pub fn balanced_beam_splitter() -> SymplecticMap {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = DMatrix::zeros(4, 4);
    for q in 0..2 {
        m[(q, q)] = s;
        m[(q, q + 2)] = s;
        m[(q + 2, q)] = s;
        m[(q + 2, q + 2)] = -s;
    }
    SymplecticMap::new(m).expect("balanced beam splitter is symplectic")
}

/// Embeds `map` into an `n_total`-mode register, acting on `targets` (in
/// order) and as the identity elsewhere.
pub fn embed(map: &SymplecticMap, targets: &[usize], n_total: usize) -> Result<SymplecticMap> {
    if targets.len() != map.n_modes() {
        return Err(Error::invalid(format!(
            "map arity {} does not match {} targets",
            map.n_modes(),
            targets.len()
        )));
    }
    for (i, &t) in targets.iter().enumerate() {
        if t >= n_total {
            return Err(Error::invalid(format!("target mode {t} out of range")));
        }
        if targets[i + 1..].contains(&t) {
            return Err(Error::invalid(format!("duplicate target mode {t}")));
        }
    }
    let dim = 2 * n_total;
    let mut m = DMatrix::identity(dim, dim);
    let small = map.matrix();
    for (bi, &ti) in targets.iter().enumerate() {
        for (bj, &tj) in targets.iter().enumerate() {
            for a in 0..2 {
                for b in 0..2 {
                    m[(2 * ti + a, 2 * tj + b)] = small[(2 * bi + a, 2 * bj + b)];
                }
            }
        }
    }
    SymplecticMap::new(m)
}

/// Matrix composition: the returned map applies `first`, then `second`.
pub fn compose(second: &SymplecticMap, first: &SymplecticMap) -> Result<SymplecticMap> {
    if second.n_modes() != first.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: second.n_modes(),
            got: first.n_modes(),
        });
    }
    SymplecticMap::new(second.matrix() * first.matrix())
}

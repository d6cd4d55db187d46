//! Self-check suites: trajectory-vs-ensemble oracle agreement across the
//! protocol grid, and randomized invariant checks (symplecticity,
//! physicality, Schur positivity of conditioning).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::channel::ChannelModel;
use crate::error::Result;
use crate::measurement::{condition_on_outcome, QuadratureSelector};
use crate::phase_space::{
    check_physicality, symplectic_form, GaussianState, SqueezeAxis, V0,
};
use crate::protocols::{self, ProtocolConfig, ProtocolKind};
use crate::symplectic::{
    balanced_beam_splitter, compose, embed, phase_shift, qnd_coupling, qnd_sign_flipped, squeezer,
    SymplecticMap,
};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> CheckResult {
    CheckResult { name: name.into(), pass, detail: detail.into() }
}

/// Trajectory moments must agree with the analytic ensemble output within
/// 5 standard errors, for every protocol kind at G = 1, r in {0, 1},
/// T in {0.8, 1}.
pub fn oracle_checks(seed: u64, n_runs: usize) -> Result<Vec<CheckResult>> {
    let kinds = [
        ProtocolKind::Fig1,
        ProtocolKind::Fig2,
        ProtocolKind::ClassicalBenchmark,
        ProtocolKind::TeleportBaseline,
    ];
    let mut results = Vec::new();
    for kind in kinds {
        for r in [0.0, 1.0] {
            for t in [0.8, 1.0] {
                let mut cfg = ProtocolConfig::new(kind);
                cfg.squeezing = r;
                if t < 1.0 {
                    cfg.channel = Some(ChannelModel::new(t, 1.0)?);
                }
                let ens = protocols::run(&cfg)?;
                let traj = crate::mc::run_protocol_trajectories(&cfg, n_runs, seed)?;
                let mut worst: f64 = 0.0;
                for i in 0..4 {
                    let se = traj.moments.mean_se[i].max(1e-15);
                    worst = worst.max((traj.moments.mean[i] - ens.output.mean()[i]).abs() / se);
                    for j in 0..4 {
                        let se = traj.moments.cov_se[(i, j)].max(1e-15);
                        let dev = (traj.moments.cov[(i, j)] - ens.output.cov()[(i, j)]).abs() / se;
                        worst = worst.max(dev);
                    }
                }
                results.push(check(
                    format!("oracle {kind} r={r} T={t}"),
                    worst <= 5.0,
                    format!("worst deviation {worst:.2} SE at n={n_runs}"),
                ));
            }
        }
    }
    Ok(results)
}

fn random_state(rng: &mut ChaCha12Rng) -> GaussianState {
    let base = match rng.gen_range(0..4u8) {
        0 => GaussianState::vacuum(rng.gen_range(1..4usize)).unwrap(),
        1 => GaussianState::squeezed_vacuum(
            rng.gen_range(-1.0..1.0),
            if rng.gen() { SqueezeAxis::X } else { SqueezeAxis::P },
        )
        .unwrap(),
        2 => GaussianState::epr_pair(rng.gen_range(0.0..1.5)).unwrap(),
        _ => {
            // thermal-like: vacuum plus classical noise
            let n = rng.gen_range(1..3usize);
            let mut st = GaussianState::vacuum(n).unwrap();
            let mut cov = st.cov().clone();
            for q in 0..2 * n {
                cov[(q, q)] += rng.gen_range(0.0..2.0);
            }
            st = GaussianState::from_moments_unchecked(st.mean().clone(), cov);
            st
        }
    };
    base
}

fn random_map(rng: &mut ChaCha12Rng, n_modes: usize) -> SymplecticMap {
    let mut total = SymplecticMap::identity(n_modes);
    let layers = rng.gen_range(1..=4usize);
    for _ in 0..layers {
        let piece = match rng.gen_range(0..4u8) {
            0 => qnd_coupling(rng.gen_range(-2.0..2.0)).unwrap(),
            1 => qnd_sign_flipped(rng.gen_range(-2.0..2.0)).unwrap(),
            2 => balanced_beam_splitter(),
            _ => {
                let single = if rng.gen() {
                    phase_shift(rng.gen_range(0.0..std::f64::consts::TAU)).unwrap()
                } else {
                    squeezer(rng.gen_range(-1.0..1.0)).unwrap()
                };
                let t = rng.gen_range(0..n_modes);
                total = compose(&embed(&single, &[t], n_modes).unwrap(), &total).unwrap();
                continue;
            }
        };
        let a = rng.gen_range(0..n_modes);
        let mut b = rng.gen_range(0..n_modes);
        while b == a {
            b = rng.gen_range(0..n_modes);
        }
        total = compose(&embed(&piece, &[a, b], n_modes).unwrap(), &total).unwrap();
    }
    total
}

/// Randomized property suite: every constructed map symplectic to 1e-12,
/// every produced state physical, conditioning never increases covariance.
pub fn invariant_checks(cases: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst_sympl: f64 = 0.0;
    let mut worst_phys = f64::INFINITY;
    let mut worst_schur = f64::INFINITY;
    for _ in 0..cases {
        let n_modes = rng.gen_range(2..=3usize);
        let map = random_map(&mut rng, n_modes);
        let omega = symplectic_form(n_modes);
        let dev = (map.matrix() * &omega * map.matrix().transpose() - &omega).amax();
        worst_sympl = worst_sympl.max(dev);

        let mut st = random_state(&mut rng);
        while st.n_modes() < n_modes {
            st = st.tensor(&GaussianState::vacuum(1)?);
        }
        let st = st.marginal(&(0..n_modes).collect::<Vec<_>>())?;
        let out = map.apply(&st)?;
        let rep = check_physicality(&out)?;
        worst_phys = worst_phys.min(rep.margin);

        let sel = QuadratureSelector {
            mode: rng.gen_range(0..n_modes),
            axis: if rng.gen() { crate::measurement::Axis::X } else { crate::measurement::Axis::P },
        };
        let conditioned = condition_on_outcome(&out, &sel, rng.gen_range(-2.0..2.0))?;
        let rep = check_physicality(&conditioned)?;
        worst_phys = worst_phys.min(rep.margin);
        // Schur positivity: pre-measurement marginal minus conditional cov is PSD
        let keep: Vec<usize> = (0..n_modes).filter(|&m| m != sel.mode).collect();
        let marg = out.marginal(&keep)?;
        let diff = marg.cov() - conditioned.cov();
        let min_eig = diff.symmetric_eigenvalues().min();
        worst_schur = worst_schur.min(min_eig);
    }
    Ok(vec![
        check(
            format!("symplectic invariant over {cases} random maps"),
            worst_sympl <= 1e-12,
            format!("worst deviation {worst_sympl:e}"),
        ),
        check(
            format!("physicality over {cases} random states"),
            worst_phys >= -(V0 * 2e-9),
            format!("worst margin {worst_phys:e}"),
        ),
        check(
            format!("Schur positivity of conditioning over {cases} cases"),
            worst_schur >= -1e-12,
            format!("worst eigenvalue {worst_schur:e}"),
        ),
    ])
}

/// Full validation: oracle agreement plus randomized invariants.
pub fn validate_all(seed: u64, n_runs: usize) -> Result<Vec<CheckResult>> {
    let mut results = oracle_checks(seed, n_runs)?;
    results.extend(invariant_checks(1000, seed ^ 0x9e37_79b9_7f4a_7c15)?);
    Ok(results)
}

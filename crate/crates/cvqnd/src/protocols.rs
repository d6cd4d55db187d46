//! End-to-end orchestration of the four schemes: the single-channel scheme
//! (Fig1), the shared-entanglement scheme (Fig2), the two-way teleportation
//! baseline, and the classical benchmark, in ideal and noisy-channel
//! variants, plus the gain-split optimizer.
//!
//! Each protocol is compiled to a step program executed either analytically
//! on Gaussian moments (ensemble mode) or on sampled phase-space
//! trajectories (trajectory mode, see `mc`).

use nalgebra::DMatrix;

use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::measurement::{ensemble_map, QuadratureSelector};
use crate::phase_space::{GaussianState, SqueezeAxis};
use crate::symplectic::{balanced_beam_splitter, embed, qnd_coupling, qnd_sign_flipped, SymplecticMap};

/// Which scheme to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    Fig1,
    Fig2,
    TeleportBaseline,
    ClassicalBenchmark,
    IdealQnd,
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ProtocolKind::Fig1 => "fig1",
            ProtocolKind::Fig2 => "fig2",
            ProtocolKind::TeleportBaseline => "teleport",
            ProtocolKind::ClassicalBenchmark => "classical",
            ProtocolKind::IdealQnd => "ideal",
        };
        write!(f, "{s}")
    }
}

/// Ensemble (analytic moments) or sampled-trajectory execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Ensemble,
    Trajectory { seed: u64, n_runs: usize },
}

#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    /// Alice's local QND gain G_A.
    pub gain_alice: f64,
    /// Bob's local QND gain G_B; the distance gain is g = G_A * G_B.
    pub gain_bob: f64,
    /// Resource squeezing r for the mode-C state or EPR pairs.
    pub squeezing: f64,
    pub channel: Option<ChannelModel>,
    /// Force all resource-induced noise terms to exactly zero.
    pub idealize_resources: bool,
    pub input_a: GaussianState,
    pub input_b: GaussianState,
    pub mode: RunMode,
}

impl ProtocolConfig {
    pub fn new(kind: ProtocolKind) -> Self {
        Self {
            kind,
            gain_alice: 1.0,
            gain_bob: 1.0,
            squeezing: 0.0,
            channel: None,
            idealize_resources: false,
            input_a: GaussianState::vacuum(1).expect("single-mode vacuum"),
            input_b: GaussianState::vacuum(1).expect("single-mode vacuum"),
            mode: RunMode::Ensemble,
        }
    }

    /// Distance gain g = G_A * G_B.
    pub fn target_gain(&self) -> f64 {
        self.gain_alice * self.gain_bob
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gain_alice.is_finite() || !self.gain_bob.is_finite() {
            return Err(Error::invalid("gains must be finite"));
        }
        if !self.squeezing.is_finite() || self.squeezing < 0.0 {
            return Err(Error::invalid("squeezing must be finite and >= 0"));
        }
        if self.input_a.n_modes() != 1 || self.input_b.n_modes() != 1 {
            return Err(Error::invalid("protocol inputs must be single-mode states"));
        }
        if let RunMode::Trajectory { n_runs, .. } = self.mode {
            if n_runs == 0 {
                return Err(Error::invalid("trajectory mode needs n_runs >= 1"));
            }
        }
        Ok(())
    }
}

/// Per-quadrature added-variance decomposition relative to the ideal QND
/// output at gain g = G_A * G_B. `added_var_pb` / `channel_pb` are nonzero
/// only for the teleportation baseline.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoiseReport {
    pub added_var_pa: f64,
    pub added_var_xb: f64,
    pub resource_pa: f64,
    pub resource_xb: f64,
    pub channel_pa: f64,
    pub channel_xb: f64,
    pub added_var_pb: f64,
    pub channel_pb: f64,
    /// channel_pa + channel_xb
    pub metric: f64,
}

/// One executed protocol step, for inspection.
#[derive(Debug, Clone)]
pub struct TranscriptEntry {
    pub op: String,
    pub modes: String,
    pub params: String,
    /// Mean measured value in trajectory mode; absent in ensemble mode.
    pub outcome: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ProtocolResult {
    /// Final two-mode state over (A, B).
    pub output: GaussianState,
    pub noise_report: NoiseReport,
    pub transcript: Vec<TranscriptEntry>,
}

/// A protocol step; mode indices are positions in the register at the time
/// the step executes (measurements remove the measured mode).
#[derive(Debug, Clone)]
pub(crate) enum Step {
    Attach {
        state: GaussianState,
        desc: (String, String, String),
    },
    Unitary {
        map: SymplecticMap,
        targets: Vec<usize>,
        desc: (String, String, String),
    },
    Channel {
        mode: usize,
        channel: ChannelModel,
        desc: (String, String, String),
    },
    /// Adds classical Gaussian noise of the given variance to one quadrature.
    AddNoise {
        quad: QuadratureSelector,
        var: f64,
        desc: (String, String, String),
    },
    MeasureFeedforward {
        sel: QuadratureSelector,
        gains: Vec<(QuadratureSelector, f64)>,
        desc: (String, String, String),
    },
}

impl Step {
    pub(crate) fn desc(&self) -> &(String, String, String) {
        match self {
            Step::Attach { desc, .. }
            | Step::Unitary { desc, .. }
            | Step::Channel { desc, .. }
            | Step::AddNoise { desc, .. }
            | Step::MeasureFeedforward { desc, .. } => desc,
        }
    }
}

fn d(op: &str, modes: &str, params: String) -> (String, String, String) {
    (op.to_string(), modes.to_string(), params)
}

fn resource_squeezed(config: &ProtocolConfig) -> Result<GaussianState> {
    if config.idealize_resources {
        Ok(GaussianState::idealized_squeezed(SqueezeAxis::P))
    } else {
        GaussianState::squeezed_vacuum(config.squeezing, SqueezeAxis::P)
    }
}

fn resource_epr(config: &ProtocolConfig) -> Result<GaussianState> {
    if config.idealize_resources {
        Ok(GaussianState::idealized_epr())
    } else {
        GaussianState::epr_pair(config.squeezing)
    }
}

/// Compiles a config into an initial state plus step program.
pub(crate) fn build_program(config: &ProtocolConfig) -> Result<(GaussianState, Vec<Step>)> {
    config.validate()?;
    let ga = config.gain_alice;
    let gb = config.gain_bob;
    let mut steps = Vec::new();
    match config.kind {
        ProtocolKind::IdealQnd => {
            let initial = config.input_a.tensor(&config.input_b);
            steps.push(Step::Unitary {
                map: qnd_coupling(config.target_gain())?,
                targets: vec![0, 1],
                desc: d("qnd_coupling", "A,B", format!("g={}", config.target_gain())),
            });
            Ok((initial, steps))
        }
        ProtocolKind::Fig1 => {
            // register: 0 = A, 1 = B, 2 = C
            let initial = config.input_a.tensor(&config.input_b).tensor(&resource_squeezed(config)?);
            steps.push(Step::Unitary {
                map: qnd_sign_flipped(gb)?,
                targets: vec![1, 2],
                desc: d("qnd_sign_flipped", "B,C", format!("G_B={gb}")),
            });
            if let Some(ch) = config.channel {
                // The pre-amplified channel acts on C in transit. Its
                // P-quadrature noise rides into P'_A through Alice's
                // coupling; the X-quadrature noise lands on X'_B with unit
                // weight after the feedforward.
                steps.push(Step::AddNoise {
                    quad: QuadratureSelector::p(2),
                    var: ch.added_noise(),
                    desc: d("channel", "C", format!("T={} noise_var={} quad=P", ch.transmitivity(), ch.noise_var())),
                });
            }
            steps.push(Step::Unitary {
                map: qnd_coupling(ga)?,
                targets: vec![0, 2],
                desc: d("qnd_coupling", "A,C", format!("G_A={ga}")),
            });
            steps.push(Step::MeasureFeedforward {
                sel: QuadratureSelector::x(2),
                gains: vec![(QuadratureSelector::x(1), gb)],
                desc: d("measure_feedforward", "C -> B", format!("measure X_C, displace X_B gain {gb}")),
            });
            if let Some(ch) = config.channel {
                steps.push(Step::AddNoise {
                    quad: QuadratureSelector::x(1),
                    var: ch.added_noise(),
                    desc: d("channel", "B", format!("T={} noise_var={} quad=X", ch.transmitivity(), ch.noise_var())),
                });
            }
            Ok((initial, steps))
        }
        ProtocolKind::Fig2 | ProtocolKind::ClassicalBenchmark => {
            // register: 0 = A, 1 = B, 2 = mode 1, 3 = mode 2
            let resource = if config.kind == ProtocolKind::ClassicalBenchmark {
                GaussianState::vacuum(2)?
            } else {
                resource_epr(config)?
            };
            let initial = config.input_a.tensor(&config.input_b).tensor(&resource);
            if let Some(ch) = config.channel {
                // EPR source sits on Bob's side; the half sent to Alice
                // (mode 1) traverses the channel.
                steps.push(Step::Channel {
                    mode: 2,
                    channel: ch,
                    desc: d("channel", "1", format!("T={} noise_var={}", ch.transmitivity(), ch.noise_var())),
                });
            }
            steps.push(Step::Unitary {
                map: qnd_coupling(ga)?,
                targets: vec![0, 2],
                desc: d("qnd_coupling", "A,1", format!("G_A={ga}")),
            });
            steps.push(Step::Unitary {
                map: qnd_coupling(gb)?,
                targets: vec![3, 1],
                desc: d("qnd_coupling", "2,B", format!("G_B={gb}")),
            });
            steps.push(Step::MeasureFeedforward {
                sel: QuadratureSelector::x(2),
                gains: vec![(QuadratureSelector::x(1), gb)],
                desc: d("measure_feedforward", "1 -> B", format!("measure X_1, displace X_B gain {gb}")),
            });
            // after removal: 0 = A, 1 = B, 2 = mode 2
            steps.push(Step::MeasureFeedforward {
                sel: QuadratureSelector::p(2),
                gains: vec![(QuadratureSelector::p(0), ga)],
                desc: d("measure_feedforward", "2 -> A", format!("measure P_2, displace P_A gain {ga}")),
            });
            Ok((initial, steps))
        }
        ProtocolKind::TeleportBaseline => {
            let initial = config.input_a.tensor(&config.input_b);
            let g = config.target_gain();
            let sqrt2 = std::f64::consts::SQRT_2;
            for leg in 0..2 {
                let (src, dst) = if leg == 0 { ("B", "A") } else { ("A", "B") };
                steps.push(Step::Attach {
                    state: resource_epr(config)?,
                    desc: d("attach_epr", "1,2", format!("r={} leg {src}->{dst}", config.squeezing)),
                });
                if let Some(ch) = config.channel {
                    steps.push(Step::Channel {
                        mode: 3,
                        channel: ch,
                        desc: d("channel", "2", format!("T={} noise_var={}", ch.transmitivity(), ch.noise_var())),
                    });
                }
                // Bell measurement on (input, EPR half 1): balanced beam
                // splitter, X-homodyne on the sum port, P-homodyne on the
                // difference port, unit-gain feedforward onto EPR half 2.
                steps.push(Step::Unitary {
                    map: balanced_beam_splitter(),
                    targets: vec![1, 2],
                    desc: d("beam_splitter", &format!("{src},1"), String::new()),
                });
                steps.push(Step::MeasureFeedforward {
                    sel: QuadratureSelector::x(1),
                    gains: vec![(QuadratureSelector::x(3), sqrt2)],
                    desc: d("measure_feedforward", "sum -> 2", format!("measure X, displace X gain {sqrt2}")),
                });
                // register now: 0 = A-side mode, 1 = difference port, 2 = EPR half 2
                steps.push(Step::MeasureFeedforward {
                    sel: QuadratureSelector::p(1),
                    gains: vec![(QuadratureSelector::p(2), sqrt2)],
                    desc: d("measure_feedforward", "diff -> 2", format!("measure P, displace P gain {sqrt2}")),
                });
                if leg == 0 {
                    // Alice now holds the teleported B; local QND with the
                    // full distance gain.
                    steps.push(Step::Unitary {
                        map: qnd_coupling(g)?,
                        targets: vec![0, 1],
                        desc: d("qnd_coupling", "A,B~", format!("g={g}")),
                    });
                }
            }
            Ok((initial, steps))
        }
    }
}

/// Runs the step program on analytic Gaussian moments.
pub(crate) fn run_ensemble_program(
    initial: &GaussianState,
    steps: &[Step],
) -> Result<(GaussianState, Vec<TranscriptEntry>)> {
    let mut state = initial.clone();
    let mut transcript = Vec::with_capacity(steps.len());
    for step in steps {
        let (op, modes, params) = step.desc().clone();
        state = match step {
            Step::Attach { state: extra, .. } => state.tensor(extra),
            Step::Unitary { map, targets, .. } => {
                let full = embed(map, targets, state.n_modes())?;
                full.apply(&state)?
            }
            Step::Channel { mode, channel, .. } => channel.apply(&state, *mode)?,
            Step::AddNoise { quad, var, .. } => {
                let q = quad.quad_index();
                let mut cov = state.cov().clone();
                cov[(q, q)] += var;
                GaussianState::from_moments_unchecked(state.mean().clone(), cov)
            }
            Step::MeasureFeedforward { sel, gains, .. } => ensemble_map(&state, sel, gains)?,
        };
        transcript.push(TranscriptEntry { op, modes, params, outcome: None });
    }
    Ok((state, transcript))
}

/// Output of the ideal QND interaction at gain g on the given inputs.
pub fn ideal_qnd_reference(
    g: f64,
    input_a: &GaussianState,
    input_b: &GaussianState,
) -> Result<GaussianState> {
    if input_a.n_modes() != 1 || input_b.n_modes() != 1 {
        return Err(Error::invalid("inputs must be single-mode states"));
    }
    qnd_coupling(g)?.apply(&input_a.tensor(input_b))
}

// quadrature indices in the final (A, B) register
const XA: usize = 0;
const PA: usize = 1;
const XB: usize = 2;
const PB: usize = 3;

fn ensemble_output(config: &ProtocolConfig) -> Result<GaussianState> {
    let (initial, steps) = build_program(config)?;
    let (state, _) = run_ensemble_program(&initial, &steps)?;
    Ok(state)
}

fn noise_report(config: &ProtocolConfig) -> Result<NoiseReport> {
    let total = ensemble_output(config)?;
    let no_channel = if config.channel.is_some() {
        let mut c = config.clone();
        c.channel = None;
        ensemble_output(&c)?
    } else {
        total.clone()
    };
    let ideal = ideal_qnd_reference(config.target_gain(), &config.input_a, &config.input_b)?;
    let part = |q: usize, a: &GaussianState, b: &GaussianState| a.cov()[(q, q)] - b.cov()[(q, q)];
    let channel_pa = part(PA, &total, &no_channel);
    let channel_xb = part(XB, &total, &no_channel);
    let channel_pb = part(PB, &total, &no_channel);
    Ok(NoiseReport {
        added_var_pa: part(PA, &total, &ideal),
        added_var_xb: part(XB, &total, &ideal),
        resource_pa: part(PA, &no_channel, &ideal),
        resource_xb: part(XB, &no_channel, &ideal),
        channel_pa,
        channel_xb,
        added_var_pb: part(PB, &total, &ideal),
        channel_pb,
        metric: channel_pa + channel_xb,
    })
}

/// Runs a protocol. Ensemble mode propagates moments analytically;
/// trajectory mode averages sampled runs (the noise report always comes
/// from the analytic ensemble, which is the ground truth).
pub fn run(config: &ProtocolConfig) -> Result<ProtocolResult> {
    config.validate()?;
    let report = noise_report(config)?;
    match config.mode {
        RunMode::Ensemble => {
            let (initial, steps) = build_program(config)?;
            let (output, transcript) = run_ensemble_program(&initial, &steps)?;
            debug_assert_eq!(output.n_modes(), 2);
            Ok(ProtocolResult { output, noise_report: report, transcript })
        }
        RunMode::Trajectory { seed, n_runs } => {
            let traj = crate::mc::run_protocol_trajectories(config, n_runs, seed)?;
            let cov = traj.moments.cov.clone();
            let cov = (&cov + cov.transpose()) * 0.5;
            let output = GaussianState::from_moments_unchecked(traj.moments.mean.clone(), cov);
            Ok(ProtocolResult { output, noise_report: report, transcript: traj.transcript })
        }
    }
}

pub fn run_fig1(config: &ProtocolConfig) -> Result<ProtocolResult> {
    expect_kind(config, ProtocolKind::Fig1)?;
    run(config)
}

pub fn run_fig2(config: &ProtocolConfig) -> Result<ProtocolResult> {
    expect_kind(config, ProtocolKind::Fig2)?;
    run(config)
}

pub fn run_classical_benchmark(config: &ProtocolConfig) -> Result<ProtocolResult> {
    expect_kind(config, ProtocolKind::ClassicalBenchmark)?;
    run(config)
}

pub fn run_teleport_baseline(config: &ProtocolConfig) -> Result<ProtocolResult> {
    expect_kind(config, ProtocolKind::TeleportBaseline)?;
    run(config)
}

fn expect_kind(config: &ProtocolConfig, kind: ProtocolKind) -> Result<()> {
    if config.kind != kind {
        return Err(Error::invalid(format!("expected kind {kind}, got {}", config.kind)));
    }
    Ok(())
}

/// Result of the Fig1 gain-split optimization at fixed distance gain g.
#[derive(Debug, Clone, Copy)]
pub struct GainSplit {
    pub gain_alice: f64,
    pub gain_bob: f64,
    pub total_added_noise: f64,
}

/// Minimizes the total added noise Var-added(P'_A) + Var-added(X'_B) of the
/// Fig1 scheme over G_A in [g * 1e-3, g * 1e3] with G_B = g / G_A, by
/// golden-section search in log G_A to relative tolerance 1e-6.
pub fn optimize_gain_split(
    g: f64,
    squeezing: f64,
    channel: Option<ChannelModel>,
    idealize_resources: bool,
) -> Result<GainSplit> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::invalid("target gain must be positive"));
    }
    let objective = |gain_alice: f64| -> Result<f64> {
        let mut config = ProtocolConfig::new(ProtocolKind::Fig1);
        config.gain_alice = gain_alice;
        config.gain_bob = g / gain_alice;
        config.squeezing = squeezing;
        config.channel = channel;
        config.idealize_resources = idealize_resources;
        let report = noise_report(&config)?;
        Ok(report.added_var_pa + report.added_var_xb)
    };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = (g * 1e-3).ln();
    let mut b = (g * 1e3).ln();
    let mut c = b - phi * (b - a);
    let mut dd = a + phi * (b - a);
    let mut fc = objective(c.exp())?;
    let mut fd = objective(dd.exp())?;
    while (b - a) > 1e-7 {
        if fc < fd {
            b = dd;
            dd = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = objective(c.exp())?;
        } else {
            a = c;
            c = dd;
            fc = fd;
            dd = a + phi * (b - a);
            fd = objective(dd.exp())?;
        }
    }
    let gain_alice = (0.5 * (a + b)).exp();
    Ok(GainSplit {
        gain_alice,
        gain_bob: g / gain_alice,
        total_added_noise: objective(gain_alice)?,
    })
}

/// Closed-form (A, B) covariance of the two-way teleportation baseline on
/// vacuum-mean inputs, used as an independent check of the explicit
/// simulation. `l_var` is the variance of each noise operator
/// L = sqrt(1 - T^2) * channel + (EPR combination).
pub fn teleport_closed_form_cov(
    g: f64,
    input_a: &GaussianState,
    input_b: &GaussianState,
    l_var: f64,
) -> DMatrix<f64> {
    let va_x = input_a.var(0, 0);
    let va_p = input_a.var(0, 1);
    let vb_x = input_b.var(0, 0);
    let vb_p = input_b.var(0, 1);
    let mut cov = DMatrix::zeros(4, 4);
    cov[(XA, XA)] = va_x;
    cov[(PA, PA)] = va_p + g * g * vb_p + g * g * l_var;
    cov[(XB, XB)] = vb_x + g * g * va_x + 2.0 * l_var;
    cov[(PB, PB)] = vb_p + 2.0 * l_var;
    cov[(XA, XB)] = g * va_x;
    cov[(XB, XA)] = g * va_x;
    cov[(PA, PB)] = -g * vb_p - g * l_var;
    cov[(PB, PA)] = cov[(PA, PB)];
    cov
}

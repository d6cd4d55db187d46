//! Gaussian phase-space simulator for continuous-variable QND interactions
//! at a distance.
//!
//! The library models multimode Gaussian states by their first and second
//! moments, provides the symplectic toolbox (QND couplings, phase shifts,
//! squeezers, beam splitters), ideal homodyne measurement with classical
//! feedforward, and a pre-amplified lossy channel. On top of that it
//! orchestrates four realizations of a QND interaction between two distant
//! modes and compares their added noise:
//!
//! * `Fig1` — a single quantum channel plus one-way classical communication,
//! * `Fig2` — a priori shared entanglement plus two-way classical
//!   communication,
//! * `TeleportBaseline` — the straightforward two-way teleportation strategy,
//! * `ClassicalBenchmark` — the same wiring as `Fig2` with no entanglement.
//!
//! Every analytic (ensemble) result can be cross-checked against a
//! Monte-Carlo trajectory engine in `mc`.

pub mod analysis;
pub mod channel;
pub mod error;
pub mod mc;
pub mod measurement;
pub mod phase_space;
pub mod protocols;
pub mod symplectic;
pub mod validation;

pub use analysis::{
    added_noise_report, channel_noise_metric, duan_criterion, run_sweep, ComparisonRow, DuanReport,
    SweepSpec,
};
pub use channel::ChannelModel;
pub use error::{Error, Result};
pub use measurement::{
    condition_on_outcome, ensemble_map, feedforward_displace, sample_outcome, Axis,
    FeedforwardRule, QuadratureSelector,
};
pub use phase_space::{
    check_physicality, symplectic_eigenvalues, symplectic_form, GaussianState, ModeName,
    ModeRegister, PhysicalityReport, SqueezeAxis, V0,
};
pub use protocols::{
    ideal_qnd_reference, optimize_gain_split, run, run_classical_benchmark, run_fig1, run_fig2,
    run_teleport_baseline, GainSplit, NoiseReport, ProtocolConfig, ProtocolKind, ProtocolResult,
    RunMode, TranscriptEntry,
};
pub use symplectic::{
    balanced_beam_splitter, compose, embed, phase_shift, qnd_coupling, qnd_sign_flipped, squeezer,
    Displacement, SymplecticMap,
};

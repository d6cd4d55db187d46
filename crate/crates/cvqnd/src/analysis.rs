//! Noise metrics, the Duan entanglement witness, method comparison, and the
//! sweep grid machinery behind the CLI.

use rayon::prelude::*;

use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::phase_space::{GaussianState, V0};
use crate::protocols::{self, NoiseReport, ProtocolConfig, ProtocolKind, ProtocolResult, RunMode};

/// Duan separability witness at unit weights. `value` is the smaller of the
/// two sign choices Var(X1 +/- X2) + Var(P1 -/+ P2); separable two-mode
/// states satisfy value >= 4 V0.
#[derive(Debug, Clone, Copy)]
pub struct DuanReport {
    pub value: f64,
    pub bound: f64,
    pub entangled: bool,
}

/// Evaluates the Duan witness on a two-mode state. Both sign choices
/// (X1+X2, P1-P2) and (X1-X2, P1+P2) are valid witnesses with the same
/// separable bound; the minimum is reported so that EPR-like and QND-like
/// correlations are both detected.
pub fn duan_criterion(state: &GaussianState) -> Result<DuanReport> {
    if state.n_modes() != 2 {
        return Err(Error::invalid(format!("duan criterion needs 2 modes, got {}", state.n_modes())));
    }
    let c = state.cov();
    let combo = |s: f64| -> f64 {
        let vx = c[(0, 0)] + c[(2, 2)] + 2.0 * s * c[(0, 2)];
        let vp = c[(1, 1)] + c[(3, 3)] - 2.0 * s * c[(1, 3)];
        vx + vp
    };
    let value = combo(1.0).min(combo(-1.0));
    let bound = 4.0 * V0;
    Ok(DuanReport { value, bound, entangled: value < bound - 1e-12 })
}

/// Added variances of a protocol output relative to an ideal QND reference,
/// computed directly from the two covariance matrices. `untouched_rows_ok`
/// is false when Var(X_A) or Var(P_B) deviates beyond 1e-12, which the
/// Fig1/Fig2/classical schemes must never do.
#[derive(Debug, Clone, Copy)]
pub struct AddedNoise {
    pub added_var_pa: f64,
    pub added_var_xb: f64,
    pub added_var_xa: f64,
    pub added_var_pb: f64,
    pub untouched_rows_ok: bool,
}

pub fn added_noise_report(result: &ProtocolResult, ideal: &GaussianState) -> Result<AddedNoise> {
    if ideal.n_modes() != 2 || result.output.n_modes() != 2 {
        return Err(Error::invalid("noise report needs two-mode registers"));
    }
    let diff = |q: usize| result.output.cov()[(q, q)] - ideal.cov()[(q, q)];
    let added_var_xa = diff(0);
    let added_var_pb = diff(3);
    Ok(AddedNoise {
        added_var_pa: diff(1),
        added_var_xb: diff(2),
        added_var_xa,
        added_var_pb,
        untouched_rows_ok: added_var_xa.abs() <= 1e-12 && added_var_pb.abs() <= 1e-12,
    })
}

/// Channel-induced noise summed over the two corrupted quadratures; the
/// scalar under which the G<1 / G=1 / G>1 comparison of the two methods is
/// stated.
pub fn channel_noise_metric(report: &NoiseReport) -> f64 {
    report.channel_pa + report.channel_xb
}

/// One output row of a sweep or comparison.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub protocol: ProtocolKind,
    pub gain_alice: f64,
    pub gain_bob: f64,
    pub squeezing: f64,
    pub transmitivity: f64,
    pub noise_var: f64,
    pub var_add_pa: f64,
    pub var_add_xb: f64,
    pub resource_pa: f64,
    pub resource_xb: f64,
    pub channel_pa: f64,
    pub channel_xb: f64,
    pub metric: f64,
    pub duan_value: f64,
    pub duan_bound: f64,
}

pub const CSV_HEADER: &str = "protocol,G_A,G_B,r,T,noise_var,var_add_PA,var_add_XB,resource_PA,resource_XB,channel_PA,channel_XB,metric,duan_value,duan_bound";

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

impl ComparisonRow {
    pub fn to_csv(&self) -> String {
        let fields = [
            self.gain_alice,
            self.gain_bob,
            self.squeezing,
            self.transmitivity,
            self.noise_var,
            self.var_add_pa,
            self.var_add_xb,
            self.resource_pa,
            self.resource_xb,
            self.channel_pa,
            self.channel_xb,
            self.metric,
            self.duan_value,
            self.duan_bound,
        ];
        let mut out = self.protocol.to_string();
        for f in fields {
            out.push(',');
            out.push_str(&fmt(f));
        }
        out
    }
}

/// Runs one grid point and assembles its row.
pub fn run_row(config: &ProtocolConfig) -> Result<(ComparisonRow, ProtocolResult)> {
    let result = protocols::run(config)?;
    let duan = duan_criterion(&result.output)?;
    let rep = &result.noise_report;
    let (t, nv) = match &config.channel {
        Some(ch) => (ch.transmitivity(), ch.noise_var()),
        None => (1.0, 0.0),
    };
    let row = ComparisonRow {
        protocol: config.kind,
        gain_alice: config.gain_alice,
        gain_bob: config.gain_bob,
        squeezing: config.squeezing,
        transmitivity: t,
        noise_var: nv,
        var_add_pa: rep.added_var_pa,
        var_add_xb: rep.added_var_xb,
        resource_pa: rep.resource_pa,
        resource_xb: rep.resource_xb,
        channel_pa: rep.channel_pa,
        channel_xb: rep.channel_xb,
        metric: rep.metric,
        duan_value: duan.value,
        duan_bound: duan.bound,
    };
    Ok((row, result))
}

/// Grid specification for sweeps. The cartesian product of all grids is
/// evaluated for every protocol kind, in a fixed order independent of the
/// number of workers.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub kinds: Vec<ProtocolKind>,
    /// (G_A, G_B) pairs.
    pub gains: Vec<(f64, f64)>,
    pub squeezings: Vec<f64>,
    /// Transmitivities; T = 1 means no channel.
    pub transmitivities: Vec<f64>,
    pub noise_vars: Vec<f64>,
    pub idealize_resources: bool,
    pub input_a: GaussianState,
    pub input_b: GaussianState,
    pub mode: RunMode,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty()
            || self.gains.is_empty()
            || self.squeezings.is_empty()
            || self.transmitivities.is_empty()
            || self.noise_vars.is_empty()
        {
            return Err(Error::invalid("sweep grids must be non-empty"));
        }
        Ok(())
    }

    fn configs(&self) -> Result<Vec<ProtocolConfig>> {
        self.validate()?;
        let mut out = Vec::new();
        for &kind in &self.kinds {
            for &(ga, gb) in &self.gains {
                for &r in &self.squeezings {
                    for &t in &self.transmitivities {
                        for &nv in &self.noise_vars {
                            let mut cfg = ProtocolConfig::new(kind);
                            cfg.gain_alice = ga;
                            cfg.gain_bob = gb;
                            cfg.squeezing = r;
                            cfg.channel = if t < 1.0 { Some(ChannelModel::new(t, nv)?) } else { None };
                            cfg.idealize_resources = self.idealize_resources;
                            cfg.input_a = self.input_a.clone();
                            cfg.input_b = self.input_b.clone();
                            cfg.mode = self.mode;
                            out.push(cfg);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Evaluates the sweep grid in parallel; rows are ordered by grid index.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ComparisonRow>> {
    let configs = spec.configs()?;
    configs
        .par_iter()
        .map(|cfg| run_row(cfg).map(|(row, _)| row))
        .collect()
}

/// Outcome of the G<1 / G=1 / G>1 comparison between the two methods at a
/// fixed channel, with idealized resources.
#[derive(Debug, Clone)]
pub struct CrossingCheck {
    pub holds: bool,
    pub details: Vec<String>,
}

/// Checks that with idealized resources metric(Fig2) < metric(Fig1) for
/// G < 1, they are equal at G = 1, and the order reverses for G > 1.
pub fn check_crossing(gains: &[f64], t: f64, noise_var: f64) -> Result<CrossingCheck> {
    let mut holds = true;
    let mut details = Vec::new();
    for &g in gains {
        let metric_of = |kind: ProtocolKind| -> Result<f64> {
            let mut cfg = ProtocolConfig::new(kind);
            cfg.gain_alice = g;
            cfg.gain_bob = g;
            cfg.idealize_resources = true;
            cfg.channel = Some(ChannelModel::new(t, noise_var)?);
            Ok(protocols::run(&cfg)?.noise_report.metric)
        };
        let m1 = metric_of(ProtocolKind::Fig1)?;
        let m2 = metric_of(ProtocolKind::Fig2)?;
        let ok = if (g - 1.0).abs() < 1e-12 {
            (m1 - m2).abs() <= 1e-12
        } else if g < 1.0 {
            m2 < m1
        } else {
            m1 < m2
        };
        holds &= ok;
        details.push(format!(
            "G={g}: metric(fig1)={} metric(fig2)={} {}",
            fmt(m1),
            fmt(m2),
            if ok { "ok" } else { "VIOLATED" }
        ));
    }
    Ok(CrossingCheck { holds, details })
}

pub fn rows_to_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::ideal_qnd_reference;

    #[test]
    fn duan_of_vacuum_sits_on_bound() {
        let rep = duan_criterion(&GaussianState::vacuum(2).unwrap()).unwrap();
        assert!((rep.value - 2.0).abs() < 1e-12);
        assert!(!rep.entangled);
    }

    #[test]
    fn duan_of_epr_pair() {
        let rep = duan_criterion(&GaussianState::epr_pair(1.0).unwrap()).unwrap();
        assert!((rep.value - 2.0 * (-2.0f64).exp()).abs() < 1e-12);
        assert!(rep.entangled);
        // strictly decreasing in r
        let mut prev = f64::INFINITY;
        for r in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let v = duan_criterion(&GaussianState::epr_pair(r).unwrap()).unwrap().value;
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn duan_rejects_wrong_mode_count() {
        assert!(duan_criterion(&GaussianState::vacuum(3).unwrap()).is_err());
    }

    #[test]
    fn fig2_entangles_classical_does_not() {
        let mut cfg = ProtocolConfig::new(ProtocolKind::Fig2);
        cfg.squeezing = 1.0;
        let out = protocols::run(&cfg).unwrap().output;
        assert!(duan_criterion(&out).unwrap().entangled);

        for g in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let mut cfg = ProtocolConfig::new(ProtocolKind::ClassicalBenchmark);
            cfg.gain_alice = g;
            cfg.gain_bob = g;
            let out = protocols::run(&cfg).unwrap().output;
            let rep = duan_criterion(&out).unwrap();
            assert!(rep.value >= 2.0 - 1e-12, "g={g} value={}", rep.value);
        }
    }

    #[test]
    fn added_noise_report_examples() {
        // Fig1, r=0, G=1: asymmetric (0.5, 0)
        let cfg = ProtocolConfig::new(ProtocolKind::Fig1);
        let res = protocols::run(&cfg).unwrap();
        let ideal = ideal_qnd_reference(1.0, &cfg.input_a, &cfg.input_b).unwrap();
        let rep = added_noise_report(&res, &ideal).unwrap();
        assert!((rep.added_var_pa - 0.5).abs() < 1e-12);
        assert!(rep.added_var_xb.abs() < 1e-12);
        assert!(rep.untouched_rows_ok);

        // Fig2, r=0, G=1: symmetric (1, 1)
        let cfg = ProtocolConfig::new(ProtocolKind::Fig2);
        let res = protocols::run(&cfg).unwrap();
        let rep = added_noise_report(&res, &ideal).unwrap();
        assert!((rep.added_var_pa - 1.0).abs() < 1e-12);
        assert!((rep.added_var_xb - 1.0).abs() < 1e-12);

        // ideal vs ideal: zero
        let res = protocols::run(&ProtocolConfig::new(ProtocolKind::IdealQnd)).unwrap();
        let rep = added_noise_report(&res, &ideal).unwrap();
        assert!(rep.added_var_pa.abs() < 1e-12 && rep.added_var_xb.abs() < 1e-12);
    }

    #[test]
    fn metric_values_at_fixed_channel() {
        // Fig1 at G=0.5, T=0.8: (1 + 0.25) * 0.36 = 0.45; Fig2: 0.18
        let mut cfg = ProtocolConfig::new(ProtocolKind::Fig1);
        cfg.gain_alice = 0.5;
        cfg.gain_bob = 0.5;
        cfg.idealize_resources = true;
        cfg.channel = Some(ChannelModel::new(0.8, 1.0).unwrap());
        let m1 = channel_noise_metric(&protocols::run(&cfg).unwrap().noise_report);
        assert!((m1 - 0.45).abs() < 1e-12);
        cfg.kind = ProtocolKind::Fig2;
        let m2 = channel_noise_metric(&protocols::run(&cfg).unwrap().noise_report);
        assert!((m2 - 0.18).abs() < 1e-12);
        assert!(m2 < m1);

        cfg.gain_alice = 1.0;
        cfg.gain_bob = 1.0;
        let m2 = channel_noise_metric(&protocols::run(&cfg).unwrap().noise_report);
        cfg.kind = ProtocolKind::Fig1;
        let m1 = channel_noise_metric(&protocols::run(&cfg).unwrap().noise_report);
        assert!((m1 - 0.72).abs() < 1e-12);
        assert!((m2 - 0.72).abs() < 1e-12);
    }

    #[test]
    fn crossing_check_holds() {
        let check = check_crossing(&[0.3, 0.7, 1.0, 1.5, 3.0], 0.8, 1.0).unwrap();
        assert!(check.holds, "{:?}", check.details);
    }

    #[test]
    fn sweep_rows_are_deterministic_and_ordered() {
        let spec = SweepSpec {
            kinds: vec![ProtocolKind::Fig1, ProtocolKind::Fig2],
            gains: vec![(1.0, 1.0), (0.5, 0.5)],
            squeezings: vec![0.0, 1.0],
            transmitivities: vec![1.0, 0.8],
            noise_vars: vec![1.0],
            idealize_resources: false,
            input_a: GaussianState::vacuum(1).unwrap(),
            input_b: GaussianState::vacuum(1).unwrap(),
            mode: RunMode::Ensemble,
        };
        let a = rows_to_csv(&run_sweep(&spec).unwrap());
        let b = rows_to_csv(&run_sweep(&spec).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 1 + 2 * 2 * 2 * 2);
        assert!(a.starts_with(CSV_HEADER));
        // first row is fig1 at the first grid point
        assert!(a.lines().nth(1).unwrap().starts_with("fig1,1.0"));
    }

    #[test]
    fn empty_sweep_rejected() {
        let spec = SweepSpec {
            kinds: vec![],
            gains: vec![],
            squeezings: vec![],
            transmitivities: vec![],
            noise_vars: vec![],
            idealize_resources: false,
            input_a: GaussianState::vacuum(1).unwrap(),
            input_b: GaussianState::vacuum(1).unwrap(),
            mode: RunMode::Ensemble,
        };
        assert!(run_sweep(&spec).is_err());
    }
}

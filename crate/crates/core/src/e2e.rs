//! End-to-end RTT composition and the RTT-vs-advance feasibility verdict.
//!
//! R̄ = T_P_S(N) + T̄_5G_NR + T_A, where T̄_5G_NR already holds both core
//! traversals and all processing delays.

use serde::{Deserialize, Serialize};

use crate::channel::GilbertElliotParams;
use crate::error::{Error, Result};
use crate::phy::{ModOrder, Numerology, RadioConfig};
use crate::sim::{SimConfig, SimReport, TrafficConfig};

/// Deployment option: radio configuration plus core-network delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchitecturePreset {
    pub id: u8,
    pub bandwidth_hz: f64,
    pub numerology: Numerology,
    pub mod_order: ModOrder,
    pub t_cn_ms: f64,
}

impl ArchitecturePreset {
    pub fn get(id: u8) -> Result<Self> {
        let (bw, num, m, t_cn) = match id {
            1 => (5e6, Numerology::SCS_30, ModOrder::Qam256, 7.0),
            2 => (5e6, Numerology::SCS_30, ModOrder::Qam256, 2.0),
            3 => (100e6, Numerology::SCS_120, ModOrder::Qam64, 2.0),
            4 => (100e6, Numerology::SCS_120, ModOrder::Qam64, 1.0),
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "architecture {id} does not exist (expected 1-4)"
                )))
            }
        };
        Ok(ArchitecturePreset {
            id,
            bandwidth_hz: bw,
            numerology: num,
            mod_order: m,
            t_cn_ms: t_cn,
        })
    }

    pub fn all() -> [Self; 4] {
        [1, 2, 3, 4].map(|i| Self::get(i).expect("preset exists"))
    }

    /// `base` with this preset's radio parameters and T_CN.
    pub fn apply(&self, mut base: SimConfig) -> SimConfig {
        base.radio.bandwidth_hz = self.bandwidth_hz;
        base.radio.numerology = self.numerology;
        base.radio.mod_order = self.mod_order;
        base.t_cn_ms = self.t_cn_ms;
        base
    }

    /// Default-parameter simulation config for this preset at `n_ues`.
    pub fn sim_config(&self, n_ues: u32) -> Result<SimConfig> {
        let radio = RadioConfig::new(self.bandwidth_hz, self.numerology, self.mod_order);
        let traffic = TrafficConfig {
            n_ues,
            ..TrafficConfig::default()
        };
        Ok(self.apply(SimConfig::new(
            radio,
            traffic,
            GilbertElliotParams::with_error_rate(0.01, 0.5)?,
        )))
    }
}

/// Server processing time as a piecewise-linear function of N, plus actuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerModel {
    pub anchors: Vec<(u32, f64)>,
    pub t_a_ms: f64,
}

impl Default for ServerModel {
    fn default() -> Self {
        ServerModel {
            anchors: vec![(1, 1.2), (50, 119.2)],
            t_a_ms: 200.0,
        }
    }
}

impl ServerModel {
    pub fn new(anchors: Vec<(u32, f64)>, t_a_ms: f64) -> Result<Self> {
        let m = ServerModel { anchors, t_a_ms };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.anchors.is_empty() {
            return Err(Error::InvalidConfig(
                "server model needs at least one anchor".into(),
            ));
        }
        if !self
            .anchors
            .windows(2)
            .all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1)
        {
            return Err(Error::InvalidConfig(
                "server anchors must increase strictly in N and time".into(),
            ));
        }
        if self.anchors.iter().any(|a| !(a.1 >= 0.0)) {
            return Err(Error::InvalidConfig(
                "server times must be non-negative".into(),
            ));
        }
        if !(self.t_a_ms >= 0.0) {
            return Err(Error::InvalidConfig(
                "server.t_a_ms must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// T_P_S in ms; no extrapolation outside the anchor range.
    pub fn t_p_s(&self, n_ues: u32) -> Result<f64> {
        let (first, last) = (self.anchors[0], self.anchors[self.anchors.len() - 1]);
        if n_ues < first.0 || n_ues > last.0 {
            return Err(Error::InvalidInput(format!(
                "N = {n_ues} is outside the server model range [{}, {}]",
                first.0, last.0
            )));
        }
        let i = self.anchors.partition_point(|a| a.0 < n_ues);
        let hi = self.anchors[i];
        if hi.0 == n_ues {
            return Ok(hi.1);
        }
        let lo = self.anchors[i - 1];
        let f = f64::from(n_ues - lo.0) / f64::from(hi.0 - lo.0);
        Ok(lo.1 + f * (hi.1 - lo.1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RttBreakdown {
    pub arch: u8,
    pub n_ues: u32,
    pub config_hash: String,
    pub t_5g_nr_ms: f64,
    pub t_p_s_ms: f64,
    pub t_a_ms: f64,
    pub rtt_ms: f64,
    /// 90% CI half-width of T̄_5G_NR; the server terms are deterministic.
    pub ci90_ms: f64,
}

/// R̄ for a simulated preset. The report must come from `preset` applied to
/// its own configuration.
pub fn compose_rtt(
    report: &SimReport,
    preset: &ArchitecturePreset,
    server: &ServerModel,
) -> Result<RttBreakdown> {
    let expected = preset.apply(report.config).hash();
    if report.config_hash != expected || report.config.hash() != report.config_hash {
        return Err(Error::InvalidInput(format!(
            "report {} was not produced with architecture {} (expected {expected})",
            report.config_hash, preset.id
        )));
    }
    let n = report.config.traffic.n_ues;
    let t_p_s = server.t_p_s(n)?;
    Ok(RttBreakdown {
        arch: preset.id,
        n_ues: n,
        config_hash: report.config_hash.clone(),
        t_5g_nr_ms: report.mean_t_5g_nr_ms,
        t_p_s_ms: t_p_s,
        t_a_ms: server.t_a_ms,
        rtt_ms: t_p_s + report.mean_t_5g_nr_ms + server.t_a_ms,
        ci90_ms: report.ci90_halfwidth_ms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Feasible,
    Infeasible,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Feasible => "FEASIBLE",
            Verdict::Infeasible => "INFEASIBLE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub verdict: Verdict,
    /// ā − R̄ in ms (negative when infeasible).
    pub slack_ms: f64,
}

/// FEASIBLE iff R̄ + required slack < ā (strict).
pub fn feasibility(rtt_ms: f64, advance_s: f64, required_slack_ms: f64) -> Feasibility {
    let slack_ms = advance_s * 1e3 - rtt_ms;
    let verdict = if slack_ms > required_slack_ms {
        Verdict::Feasible
    } else {
        Verdict::Infeasible
    };
    Feasibility { verdict, slack_ms }
}

/// Mean advance achieved for a labeling margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvanceLine {
    pub margin: usize,
    pub advance_s: f64,
}

/// Reference mean advances for m = 5 and m = 10.
pub fn reference_advances() -> [AdvanceLine; 2] {
    [
        AdvanceLine {
            margin: 5,
            advance_s: 0.27,
        },
        AdvanceLine {
            margin: 10,
            advance_s: 0.80,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRow {
    pub rtt: RttBreakdown,
    pub margin: usize,
    pub advance_s: f64,
    pub verdict: Verdict,
    pub slack_ms: f64,
}

/// One row per (breakdown, advance line), in input order.
pub fn feasibility_table(
    rtts: &[RttBreakdown],
    lines: &[AdvanceLine],
    required_slack_ms: f64,
) -> Vec<FeasibilityRow> {
    rtts.iter()
        .flat_map(|r| {
            lines.iter().map(move |l| {
                let f = feasibility(r.rtt_ms, l.advance_s, required_slack_ms);
                FeasibilityRow {
                    rtt: r.clone(),
                    margin: l.margin,
                    advance_s: l.advance_s,
                    verdict: f.verdict,
                    slack_ms: f.slack_ms,
                }
            })
        })
        .collect()
}

/// Smallest margin among `lines` whose advance the RTT fits under.
pub fn required_margin(
    rtt_ms: f64,
    lines: &[AdvanceLine],
    required_slack_ms: f64,
) -> Option<usize> {
    lines
        .iter()
        .filter(|l| {
            feasibility(rtt_ms, l.advance_s, required_slack_ms).verdict == Verdict::Feasible
        })
        .map(|l| l.margin)
        .min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{replication_seeds, run_campaign};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn presets() {
        let a = ArchitecturePreset::all();
        assert_eq!(a[0].t_cn_ms, 7.0);
        assert_eq!(a[1].t_cn_ms, 2.0);
        assert_eq!(a[2].numerology, Numerology::SCS_120);
        assert_eq!(a[3].t_cn_ms, 1.0);
        assert!(ArchitecturePreset::get(5).is_err());
    }

    #[test]
    fn server_interpolation() {
        let s = ServerModel::default();
        assert_eq!(s.t_p_s(1).unwrap(), 1.2);
        assert_eq!(s.t_p_s(50).unwrap(), 119.2);
        assert_relative_eq!(
            s.t_p_s(25).unwrap(),
            1.2 + 118.0 * 24.0 / 49.0,
            epsilon = 1e-12
        );
        assert!((s.t_p_s(25).unwrap() - 58.9959).abs() < 1e-4);
        assert!(s.t_p_s(0).is_err());
        assert!(s.t_p_s(51).is_err());

        let three = ServerModel::new(vec![(1, 1.0), (10, 10.0), (20, 30.0)], 0.0).unwrap();
        assert_eq!(three.t_p_s(15).unwrap(), 20.0);
        assert!(ServerModel::new(vec![(1, 5.0), (2, 5.0)], 0.0).is_err());
        assert!(ServerModel::new(vec![(1, 1.0)], -1.0).is_err());
    }

    #[test]
    fn feasibility_examples() {
        let f = feasibility(230.0, 0.27, 0.0);
        assert_eq!(f.verdict, Verdict::Feasible);
        assert_relative_eq!(f.slack_ms, 40.0, epsilon = 1e-9);
        assert_eq!(feasibility(300.0, 0.27, 0.0).verdict, Verdict::Infeasible);
        assert_eq!(feasibility(300.0, 0.80, 0.0).verdict, Verdict::Feasible);
        assert_eq!(feasibility(270.0, 0.27, 0.0).verdict, Verdict::Infeasible);
        assert_eq!(feasibility(230.0, 0.27, 50.0).verdict, Verdict::Infeasible);
        assert_eq!(required_margin(300.0, &reference_advances(), 0.0), Some(10));
        assert_eq!(required_margin(900.0, &reference_advances(), 0.0), None);
    }

    #[test]
    fn compose_checks_preset() {
        let preset = ArchitecturePreset::get(2).unwrap();
        let mut cfg = preset.sim_config(1).unwrap();
        cfg.traffic.sim_time_s = 2.0;
        let report = run_campaign(&cfg, &replication_seeds(1, 3)).unwrap();
        let server = ServerModel::default();
        let r = compose_rtt(&report, &preset, &server).unwrap();
        assert_relative_eq!(
            r.rtt_ms,
            1.2 + report.mean_t_5g_nr_ms + 200.0,
            epsilon = 1e-9
        );
        assert!(compose_rtt(&report, &ArchitecturePreset::get(1).unwrap(), &server).is_err());
        assert!(compose_rtt(&report, &ArchitecturePreset::get(3).unwrap(), &server).is_err());

        let mut tampered = report.clone();
        tampered.config.t_cn_ms = 7.0;
        assert!(compose_rtt(&tampered, &ArchitecturePreset::get(1).unwrap(), &server).is_err());
    }

    proptest! {
        #[test]
        fn verdict_monotone(rtt in 0.0f64..1000.0, adv in 0.0f64..1.0, d in 0.0f64..100.0) {
            if feasibility(rtt, adv, 0.0).verdict == Verdict::Feasible {
                prop_assert_eq!(feasibility(rtt - d, adv, 0.0).verdict, Verdict::Feasible);
                prop_assert_eq!(feasibility(rtt, adv + d / 1e3, 0.0).verdict, Verdict::Feasible);
            }
        }
    }
}

//! CSV/JSON emitters. Output is byte-for-byte deterministic: rows follow
//! input order, floats use fixed precision, and every file starts with
//! `#` lines naming the config hash and seeds behind its numbers.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::e2e::{FeasibilityRow, RttBreakdown};
use crate::error::{Error, Result};
use crate::mac::GrantRecord;
use crate::phy::{ModOrder, Numerology};
use crate::sim::{SimConfig, SimReport, Transaction};

fn f(x: f64) -> String {
    format!("{x:.6}")
}

fn opt(x: Option<f64>) -> String {
    x.map(f).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("{other:?}")),
    }
}

/// Header lines: one per (config hash, seeds) pair, deduplicated.
pub fn write_header<W: Write>(w: &mut W, sources: &[(&str, &[u64])]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for (hash, seeds) in sources {
        let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();
        let line = format!("# config_hash={hash} seeds={}\n", seeds.join(","));
        if seen.insert(line.clone()) {
            w.write_all(line.as_bytes())?;
        }
    }
    Ok(())
}

fn table<W: Write>(
    w: W,
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(columns).map_err(csv_err)?;
    for r in rows {
        out.write_record(&r).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Per-transaction records for one campaign, replications in the given order.
pub fn transactions_csv<W: Write>(
    mut w: W,
    config: &SimConfig,
    seeds: &[u64],
    replications: &[(u32, &[Transaction])],
) -> Result<()> {
    write_header(&mut w, &[(&config.hash(), seeds)])?;
    let ms = |t| f(config.to_ms(t));
    let rows = replications.iter().flat_map(|(rep, txs)| {
        txs.iter().map(move |t| {
            vec![
                rep.to_string(),
                t.ue_id.to_string(),
                ms(t.ul_gen),
                ms(t.t_ran_ul),
                ms(t.t_cn_total),
                t.t_ran_dl.map(ms).unwrap_or_default(),
                t.t_5g_nr().map(ms).unwrap_or_default(),
                u8::from(t.dl_issued).to_string(),
            ]
        })
    });
    table(
        w,
        &[
            "replication",
            "ue_id",
            "ul_gen_ms",
            "t_ran_ul_ms",
            "t_cn_ms",
            "t_ran_dl_ms",
            "t_5g_nr_ms",
            "dl_issued",
        ],
        rows,
    )
}

pub fn grant_log_csv<W: Write>(
    mut w: W,
    config: &SimConfig,
    seed: u64,
    records: &[GrantRecord],
) -> Result<()> {
    write_header(&mut w, &[(&config.hash(), &[seed])])?;
    let rows = records.iter().map(|r| {
        vec![
            r.srp_index.to_string(),
            r.minislot.to_string(),
            r.ue_id.to_string(),
            r.kind.as_str().to_string(),
            r.rb_start.to_string(),
            r.rb_len.to_string(),
        ]
    });
    table(
        w,
        &[
            "srp_index",
            "minislot",
            "ue_id",
            "kind",
            "rb_start",
            "rb_len",
        ],
        rows,
    )
}

/// Summary row per report.
pub fn summary_csv<W: Write>(mut w: W, reports: &[SimReport]) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::Empty("no reports to summarize".into()));
    }
    let sources: Vec<(&str, &[u64])> = reports
        .iter()
        .map(|r| (r.config_hash.as_str(), r.seeds.as_slice()))
        .collect();
    write_header(&mut w, &sources)?;
    let rows = reports.iter().map(|r| {
        let c = &r.config;
        vec![
            r.config_hash.clone(),
            f(c.radio.bandwidth_hz / 1e6),
            c.radio.numerology.scs_khz().to_string(),
            c.radio.mod_order.order().to_string(),
            f(c.t_cn_ms),
            c.traffic.n_ues.to_string(),
            f(r.mean_t_5g_nr_ms),
            f(r.ci90_halfwidth_ms),
            f(r.mean_t_ran_ul_ms),
            f(r.mean_t_ran_dl_ms),
            f(r.fixed_terms_ms),
            opt(r.mean_ul_one_way_ms),
            r.full_loop_count.to_string(),
            r.excluded_replications.len().to_string(),
        ]
    });
    table(
        w,
        &[
            "config_hash",
            "bandwidth_mhz",
            "scs_khz",
            "mod_order",
            "t_cn_ms",
            "n_ues",
            "mean_t_5g_nr_ms",
            "ci90_ms",
            "mean_t_ran_ul_ms",
            "mean_t_ran_dl_ms",
            "fixed_terms_ms",
            "mean_ul_one_way_ms",
            "full_loop_count",
            "excluded_replications",
        ],
        rows,
    )
}

pub fn feasibility_csv<W: Write>(
    mut w: W,
    rows: &[FeasibilityRow],
    seeds: &[(String, Vec<u64>)],
) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Empty("no feasibility rows".into()));
    }
    let sources: Vec<(&str, &[u64])> = seeds
        .iter()
        .map(|(h, s)| (h.as_str(), s.as_slice()))
        .collect();
    write_header(&mut w, &sources)?;
    let out = rows.iter().map(|r| {
        vec![
            r.rtt.arch.to_string(),
            r.rtt.n_ues.to_string(),
            f(r.rtt.t_5g_nr_ms),
            f(r.rtt.t_p_s_ms),
            f(r.rtt.t_a_ms),
            f(r.rtt.rtt_ms),
            f(r.rtt.ci90_ms),
            f(r.advance_s),
            r.margin.to_string(),
            r.verdict.as_str().to_string(),
        ]
    });
    table(
        w,
        &[
            "arch",
            "n_ues",
            "t_5g_nr_ms",
            "t_p_s_ms",
            "t_a_ms",
            "rtt_ms",
            "ci90_ms",
            "advance_s",
            "margin",
            "verdict",
        ],
        out,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig2,
    Fig3,
    Fig5,
}

impl std::str::FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig5" => Ok(Figure::Fig5),
            _ => Err(Error::InvalidConfig(format!(
                "unknown figure '{s}' (expected fig2, fig3 or fig5)"
            ))),
        }
    }
}

/// N grid shared by all figures.
pub const FIGURE_N: [u32; 11] = [1, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50];

/// Radio point on a figure's series axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioPoint {
    pub bandwidth_hz: f64,
    pub numerology: Numerology,
    pub mod_order: ModOrder,
}

impl RadioPoint {
    fn matches(&self, c: &SimConfig) -> bool {
        c.radio.bandwidth_hz == self.bandwidth_hz
            && c.radio.numerology == self.numerology
            && c.radio.mod_order == self.mod_order
    }

    fn label(&self) -> String {
        format!(
            "{}MHz/{}kHz/M{}",
            self.bandwidth_hz / 1e6,
            self.numerology.scs_khz(),
            self.mod_order.order()
        )
    }
}

const PAIRS: [(f64, Numerology); 3] = [
    (5e6, Numerology::SCS_30),
    (20e6, Numerology::SCS_60),
    (100e6, Numerology::SCS_120),
];

impl Figure {
    /// Radio series plotted by the figure (empty for the architecture figure).
    pub fn radio_points(self) -> Vec<RadioPoint> {
        let mods: &[ModOrder] = match self {
            Figure::Fig2 => &[ModOrder::Qam256],
            Figure::Fig3 => &[ModOrder::Qam64, ModOrder::Qam256],
            Figure::Fig5 => &[],
        };
        PAIRS
            .iter()
            .flat_map(|&(bw, num)| {
                mods.iter().map(move |&m| RadioPoint {
                    bandwidth_hz: bw,
                    numerology: num,
                    mod_order: m,
                })
            })
            .collect()
    }
}

/// Long-format plot data for the radio figures: one row per (series, N).
/// Fails listing every (series, N) combination without a report.
pub fn radio_plot_csv<W: Write>(
    mut w: W,
    figure: Figure,
    n_values: &[u32],
    reports: &[SimReport],
) -> Result<()> {
    if figure == Figure::Fig5 {
        return Err(Error::InvalidInput(
            "fig5 plot data is built from RTT breakdowns".into(),
        ));
    }
    if reports.is_empty() {
        return Err(Error::Empty("no reports to plot".into()));
    }
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    let mut sources = Vec::new();
    for p in figure.radio_points() {
        for &n in n_values {
            match reports
                .iter()
                .find(|r| p.matches(&r.config) && r.config.traffic.n_ues == n)
            {
                Some(r) => {
                    sources.push((r.config_hash.as_str(), r.seeds.as_slice()));
                    rows.push(vec![
                        p.label(),
                        f(p.bandwidth_hz / 1e6),
                        p.numerology.scs_khz().to_string(),
                        p.mod_order.order().to_string(),
                        n.to_string(),
                        f(r.mean_t_5g_nr_ms),
                        f(r.ci90_halfwidth_ms),
                        r.config_hash.clone(),
                    ]);
                }
                None => missing.push(format!("{} N={n}", p.label())),
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::InvalidInput(format!(
            "reports missing for: {}",
            missing.join(", ")
        )));
    }
    write_header(&mut w, &sources)?;
    table(
        w,
        &[
            "series",
            "bandwidth_mhz",
            "scs_khz",
            "mod_order",
            "n_ues",
            "mean_t_5g_nr_ms",
            "ci90_ms",
            "config_hash",
        ],
        rows,
    )
}

/// Stacked-bar data: three component rows (t_5g_nr, t_p_s, t_a) per bar.
pub fn rtt_plot_csv<W: Write>(
    mut w: W,
    archs: &[u8],
    n_values: &[u32],
    rtts: &[RttBreakdown],
    seeds: &[u64],
) -> Result<()> {
    if rtts.is_empty() {
        return Err(Error::Empty("no RTT breakdowns to plot".into()));
    }
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    let mut sources = Vec::new();
    for &a in archs {
        for &n in n_values {
            let Some(r) = rtts.iter().find(|r| r.arch == a && r.n_ues == n) else {
                missing.push(format!("arch {a} N={n}"));
                continue;
            };
            sources.push((r.config_hash.as_str(), seeds));
            for (component, value) in [
                ("t_5g_nr", r.t_5g_nr_ms),
                ("t_p_s", r.t_p_s_ms),
                ("t_a", r.t_a_ms),
            ] {
                rows.push(vec![
                    a.to_string(),
                    n.to_string(),
                    component.to_string(),
                    f(value),
                    f(r.rtt_ms),
                    f(r.ci90_ms),
                    r.config_hash.clone(),
                ]);
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::InvalidInput(format!(
            "breakdowns missing for: {}",
            missing.join(", ")
        )));
    }
    write_header(&mut w, &sources)?;
    table(
        w,
        &[
            "arch",
            "n_ues",
            "component",
            "value_ms",
            "rtt_ms",
            "ci90_ms",
            "config_hash",
        ],
        rows,
    )
}

/// Pretty JSON with a trailing newline.
pub fn json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::e2e::{
        compose_rtt, feasibility_table, reference_advances, ArchitecturePreset, ServerModel,
    };
    use crate::sim::{replication_seeds, run_campaign};

    fn quick(preset: u8, n: u32) -> SimReport {
        let mut c = ArchitecturePreset::get(preset)
            .unwrap()
            .sim_config(n)
            .unwrap();
        c.traffic.sim_time_s = 1.0;
        c.traffic.p_dl = 1.0;
        run_campaign(&c, &replication_seeds(3, 2)).unwrap()
    }

    fn text(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> String {
        let mut buf = Vec::new();
        write(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn summary_is_deterministic_with_header() {
        let reports = vec![quick(1, 2), quick(2, 2)];
        let a = text(|w| summary_csv(w, &reports));
        let b = text(|w| summary_csv(w, &[quick(1, 2), quick(2, 2)]));
        assert_eq!(a, b);
        let lines: Vec<&str> = a.lines().collect();
        assert!(lines[0].starts_with(&format!(
            "# config_hash={} seeds=3,4",
            reports[0].config_hash
        )));
        assert!(lines[2].starts_with("config_hash,bandwidth_mhz"));
        assert_eq!(lines.len(), 5);
        assert!(summary_csv(Vec::new(), &[]).is_err());
    }

    #[test]
    fn fig5_has_three_components() {
        let server = ServerModel::default();
        let rtts: Vec<_> = [1u8, 4]
            .iter()
            .map(|&a| {
                compose_rtt(&quick(a, 1), &ArchitecturePreset::get(a).unwrap(), &server).unwrap()
            })
            .collect();
        let out = text(|w| rtt_plot_csv(w, &[1, 4], &[1], &rtts, &[3, 4]));
        let body: Vec<&str> = out
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .collect();
        assert_eq!(body.len(), 6);
        assert!(body[0].starts_with("1,1,t_5g_nr,"));
        assert!(body[1].starts_with("1,1,t_p_s,1.200000"));
        assert!(body[2].starts_with("1,1,t_a,200.000000"));

        let err = rtt_plot_csv(Vec::new(), &[1, 2], &[1], &rtts, &[3]).unwrap_err();
        assert!(err.to_string().contains("arch 2 N=1"));
        assert!(rtt_plot_csv(Vec::new(), &[1], &[1], &[], &[3]).is_err());

        let rows = feasibility_table(&rtts, &reference_advances(), 0.0);
        let seeds = vec![(rtts[0].config_hash.clone(), vec![3, 4])];
        let csv = text(|w| feasibility_csv(w, &rows, &seeds));
        assert_eq!(csv.lines().count(), 1 + 1 + 4);
        assert!(csv.contains(",FEASIBLE"));
    }

    #[test]
    fn radio_plot_reports_missing_axes() {
        assert_eq!(Figure::Fig2.radio_points().len(), 3);
        assert_eq!(Figure::Fig3.radio_points().len(), 6);
        let r = quick(1, 1);
        let err = radio_plot_csv(Vec::new(), Figure::Fig2, &[1], &[r.clone()])
            .unwrap_err()
            .to_string();
        assert!(err.contains("20MHz/60kHz/M256 N=1") && err.contains("100MHz/120kHz/M256 N=1"));
        assert!(!err.contains("5MHz/30kHz"));
        assert!(radio_plot_csv(Vec::new(), Figure::Fig2, &[1], &[]).is_err());
        assert!(radio_plot_csv(Vec::new(), Figure::Fig5, &[1], &[r]).is_err());
        assert!("fig4".parse::<Figure>().is_err());
    }
}

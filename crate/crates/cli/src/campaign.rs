//! Campaign execution and report emission.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use anyhow::{Context, Result};

use nrsim_core::e2e::{compose_rtt, feasibility_table, RttBreakdown};
use nrsim_core::export::{self, Figure};
use nrsim_core::sim::{run_campaign_with, run_replication_logged, SimReport, Transaction};

use crate::config::CampaignPlan;

/// Writes through a temp file in the target directory, then renames.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<&mut File>) -> nrsim_core::Result<()>,
{
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        write(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn label(r: &SimReport, arch: Option<u8>) -> String {
    let c = &r.config;
    let radio = format!(
        "{:>5} MHz {:>3} kHz M={:<3}",
        c.radio.bandwidth_hz / 1e6,
        c.radio.numerology.scs_khz(),
        c.radio.mod_order.order()
    );
    match arch {
        Some(a) => format!("arch {a} ({radio})"),
        None => format!("T_CN {} ms, {radio}", c.t_cn_ms),
    }
}

pub fn run(campaign: &CampaignPlan) -> Result<()> {
    let mut reports = Vec::with_capacity(campaign.points.len());
    let mut rtts: Vec<RttBreakdown> = Vec::new();
    println!(
        "{:<40} {:>5} {:>12} {:>10} {:>10}",
        "config", "N", "T_5G_NR ms", "ci90 ms", "R ms"
    );
    for p in &campaign.points {
        let collected: Mutex<Vec<(u32, Vec<Transaction>)>> = Mutex::new(Vec::new());
        let report = run_campaign_with(&p.config, &campaign.seeds, |i, out| {
            if campaign.transactions {
                collected
                    .lock()
                    .expect("collector poisoned")
                    .push((i, out.transactions.clone()));
            }
            Ok(())
        })?;
        if campaign.transactions {
            let mut reps = collected.into_inner().expect("collector poisoned");
            reps.sort_by_key(|r| r.0);
            let views: Vec<(u32, &[Transaction])> =
                reps.iter().map(|(i, t)| (*i, t.as_slice())).collect();
            let path = campaign
                .out_dir
                .join(format!("transactions_{}.csv", report.config_hash));
            write_atomic(&path, |w| {
                export::transactions_csv(w, &p.config, &campaign.seeds, &views)
            })?;
        }
        if campaign.grant_log {
            let out = run_replication_logged(&p.config, campaign.seeds[0])?;
            let path = campaign
                .out_dir
                .join(format!("grants_{}.csv", report.config_hash));
            write_atomic(&path, |w| {
                export::grant_log_csv(w, &p.config, campaign.seeds[0], &out.grant_log)
            })?;
        }
        let rtt = match &p.arch {
            Some(preset) => Some(compose_rtt(&report, preset, &campaign.server)?),
            None => None,
        };
        println!(
            "{:<40} {:>5} {:>12.3} {:>10.3} {:>10}",
            label(&report, p.arch.map(|a| a.id)),
            p.config.traffic.n_ues,
            report.mean_t_5g_nr_ms,
            report.ci90_halfwidth_ms,
            rtt.as_ref()
                .map(|r| format!("{:.1}", r.rtt_ms))
                .unwrap_or_else(|| "-".into())
        );
        rtts.extend(rtt);
        reports.push(report);
    }

    let dir = &campaign.out_dir;
    write_atomic(&dir.join("summary.csv"), |w| {
        export::summary_csv(w, &reports)
    })?;
    write_atomic(&dir.join("reports.json"), |w| export::json(w, &reports))?;
    if !rtts.is_empty() {
        let rows = feasibility_table(&rtts, &campaign.advances, campaign.slack_ms);
        let seeds: Vec<(String, Vec<u64>)> = rtts
            .iter()
            .map(|r| (r.config_hash.clone(), campaign.seeds.clone()))
            .collect();
        write_atomic(&dir.join("feasibility.csv"), |w| {
            export::feasibility_csv(w, &rows, &seeds)
        })?;
        println!();
        for r in &rows {
            println!(
                "arch {} N={:<3} R={:>7.1} ms  m={:<2} a={:.2} s  {} (slack {:.1} ms)",
                r.rtt.arch,
                r.rtt.n_ues,
                r.rtt.rtt_ms,
                r.margin,
                r.advance_s,
                r.verdict.as_str(),
                r.slack_ms
            );
        }
    }
    match campaign.figure {
        Some(Figure::Fig5) => write_atomic(&dir.join("fig5.csv"), |w| {
            export::rtt_plot_csv(
                w,
                &campaign.archs,
                &campaign.n_values,
                &rtts,
                &campaign.seeds,
            )
        })?,
        Some(fig) => {
            let name = if fig == Figure::Fig2 {
                "fig2.csv"
            } else {
                "fig3.csv"
            };
            write_atomic(&dir.join(name), |w| {
                export::radio_plot_csv(w, fig, &campaign.n_values, &reports)
            })?
        }
        None => {}
    }
    println!("\nwrote {}", dir.display());
    Ok(())
}

//! Discrete-event simulation of periodic uplink reports and sporadic
//! downlink commands over one gNB, plus replication campaigns.
//!
//! Time is kept in OFDM symbols. The clock jumps from one T_SRP boundary to
//! the next: timed events (report generation, server arrivals) due by the
//! boundary are applied first, then the scheduler resolves the whole cycle
//! at mini-slot resolution.
//!
//! Per-transaction chain, all terms in symbols:
//!
//! ```text
//! gen ─T_P_UE─▶ UE buffer ─T_RAN_UL─▶ gNB rx ─T_P_gNB─▶ ─T_CN─▶ server
//! server ─T_CN─▶ ─T_P_gNB─▶ gNB buffer ─T_RAN_DL─▶ UE rx ─T_P_UE─▶ done
//! ```

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelState, GilbertElliotParams};
use crate::error::{Error, Result};
use crate::mac::{
    srp_start, Direction, GrantRecord, HarqOutcome, Pdu, Policy, Scheduler, SrpLayout,
};
use crate::phy::{
    n_rb, pdu_bytes, rbs_for_pdu, srp_ticks, RadioConfig, Ticks, SYMBOLS_PER_MINISLOT,
};
use crate::rng::{stream, StreamKind};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficConfig {
    pub n_ues: u32,
    pub ul_period_ms: f64,
    pub p_dl: f64,
    pub sim_time_s: f64,
    pub n_replications: u32,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            n_ues: 1,
            ul_period_ms: 100.0,
            p_dl: 0.10,
            sim_time_s: 10.0,
            n_replications: 20,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_ues == 0 {
            return Err(Error::InvalidConfig(
                "traffic.n_ues must be at least 1".into(),
            ));
        }
        if !(self.ul_period_ms > 0.0) {
            return Err(Error::InvalidConfig(
                "traffic.ul_period_ms must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.p_dl) {
            return Err(Error::InvalidConfig(format!(
                "traffic.p_dl = {} is outside [0, 1]",
                self.p_dl
            )));
        }
        if !(self.sim_time_s > 0.0) {
            return Err(Error::InvalidConfig(
                "traffic.sim_time_s must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Everything one replication needs besides its seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub radio: RadioConfig,
    pub traffic: TrafficConfig,
    pub channel: GilbertElliotParams,
    pub t_cn_ms: f64,
    pub policy: Policy,
    pub pusch_minislots: u32,
    pub pdsch_minislots: u32,
    /// T_P_gNB in OFDM symbols.
    pub gnb_processing_symbols: u32,
    /// T_P_UE in OFDM symbols.
    pub ue_processing_symbols: u32,
}

impl SimConfig {
    pub fn new(radio: RadioConfig, traffic: TrafficConfig, channel: GilbertElliotParams) -> Self {
        SimConfig {
            radio,
            traffic,
            channel,
            t_cn_ms: 0.0,
            policy: Policy::Fifo,
            pusch_minislots: 3,
            pdsch_minislots: 1,
            gnb_processing_symbols: SYMBOLS_PER_MINISLOT as u32,
            ue_processing_symbols: SYMBOLS_PER_MINISLOT as u32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        self.traffic.validate()?;
        self.channel.validate()?;
        if !(self.t_cn_ms >= 0.0) {
            return Err(Error::InvalidConfig("t_cn_ms must be non-negative".into()));
        }
        SrpLayout::new(
            n_rb(&self.radio)?,
            self.pusch_minislots,
            self.pdsch_minislots,
        )?;
        Ok(())
    }

    /// Short stable digest of the full configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        digest_hex(&bytes)
    }

    fn ticks(&self, ms: f64) -> Ticks {
        self.radio.numerology.ms_to_ticks(ms)
    }

    pub fn to_ms(&self, ticks: Ticks) -> f64 {
        self.radio.numerology.ticks_to_ms(ticks)
    }
}

pub(crate) fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// One uplink report and, when issued, the command it triggered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub ue_id: u32,
    pub ul_gen: Ticks,
    /// PDU decoded at the gNB (after HARQ).
    pub ul_delivery: Ticks,
    pub server_in: Ticks,
    pub dl_issued: bool,
    /// Command PDU available in the gNB buffer.
    pub dl_gen: Option<Ticks>,
    pub dl_delivery: Option<Ticks>,
    /// Command available at the UE application.
    pub completed: Option<Ticks>,
    pub t_ran_ul: Ticks,
    pub t_ran_dl: Option<Ticks>,
    pub t_cn_total: Ticks,
    pub t_p_gnb_total: Ticks,
    pub t_p_ue_total: Ticks,
    pub ul_attempts: u32,
    pub dl_attempts: u32,
}

impl Transaction {
    /// T_5G_NR of a full loop, generation to command receipt.
    pub fn t_5g_nr(&self) -> Option<Ticks> {
        self.completed.map(|c| c - self.ul_gen)
    }

    /// Sum of the recorded delay components.
    pub fn component_sum(&self) -> Ticks {
        self.t_p_ue_total
            + self.t_ran_ul
            + self.t_p_gnb_total
            + self.t_cn_total
            + self.t_ran_dl.unwrap_or(0)
    }

    /// One-way uplink latency, generation to server arrival.
    pub fn ul_one_way(&self) -> Ticks {
        self.server_in - self.ul_gen
    }

    fn check(&self) -> Result<()> {
        let end = if self.dl_issued {
            self.completed
        } else {
            Some(self.server_in)
        };
        let Some(end) = end else {
            return Err(Error::Invariant(format!(
                "transaction of UE {} has no end time",
                self.ue_id
            )));
        };
        if end - self.ul_gen != self.component_sum() {
            return Err(Error::Invariant(format!(
                "delay components of UE {} sum to {} but span is {}",
                self.ue_id,
                self.component_sum(),
                end - self.ul_gen
            )));
        }
        let mut chain = vec![self.ul_gen, self.ul_delivery, self.server_in];
        chain.extend(self.dl_gen);
        chain.extend(self.dl_delivery);
        chain.extend(self.completed);
        if chain.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Invariant(format!(
                "non-monotone timestamps for UE {}: {chain:?}",
                self.ue_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReplicationOutput {
    pub seed: u64,
    pub transactions: Vec<Transaction>,
    pub grant_log: Vec<GrantRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    UlGenerated { ue: u32 },
    ServerArrival { txn: usize },
}

struct Pending {
    txn: Transaction,
    done: bool,
}

/// Simulates `traffic.sim_time_s` of operation with root `seed`.
pub fn run_replication(config: &SimConfig, seed: u64) -> Result<ReplicationOutput> {
    simulate(config, seed, false)
}

/// As [`run_replication`], also returning every data grant.
pub fn run_replication_logged(config: &SimConfig, seed: u64) -> Result<ReplicationOutput> {
    simulate(config, seed, true)
}

fn simulate(config: &SimConfig, seed: u64, keep_log: bool) -> Result<ReplicationOutput> {
    config.validate()?;
    let radio = &config.radio;
    let n_rb = n_rb(radio)?;
    let layout = SrpLayout::new(n_rb, config.pusch_minislots, config.pdsch_minislots)?;
    let ul_rbs = rbs_for_pdu(pdu_bytes(radio.ul_payload_bytes, radio)?, radio.mod_order)?;
    let dl_rbs = rbs_for_pdu(pdu_bytes(radio.dl_payload_bytes, radio)?, radio.mod_order)?;

    let n_ues = config.traffic.n_ues;
    let horizon = config.ticks(config.traffic.sim_time_s * 1e3);
    let period = config.ticks(config.traffic.ul_period_ms).max(1);
    let t_cn = config.ticks(config.t_cn_ms);
    let t_gnb = Ticks::from(config.gnb_processing_symbols);
    let t_ue = Ticks::from(config.ue_processing_symbols);

    let mut sched = Scheduler::new(layout, n_ues, config.policy);
    if keep_log {
        sched = sched.retain_log();
    }
    let mut ul_chan: Vec<ChannelState> = (0..n_ues)
        .map(|u| ChannelState::new(stream(seed, StreamKind::UplinkChannel, u)))
        .collect();
    let mut dl_chan: Vec<ChannelState> = (0..n_ues)
        .map(|u| ChannelState::new(stream(seed, StreamKind::DownlinkChannel, u)))
        .collect();
    let mut dl_draw: Vec<ChaCha8Rng> = (0..n_ues)
        .map(|u| stream(seed, StreamKind::DownlinkDecision, u))
        .collect();

    let mut events: BinaryHeap<Reverse<(Ticks, EventKind)>> = BinaryHeap::new();
    for ue in 0..n_ues {
        let offset = stream(seed, StreamKind::TrafficOffset, ue).gen_range(0..period);
        if offset < horizon {
            events.push(Reverse((offset, EventKind::UlGenerated { ue })));
        }
    }

    let mut txns: Vec<Pending> = Vec::new();
    let srp = srp_ticks();
    let n_cycles = (horizon + srp - 1) / srp;
    for cycle in 0..n_cycles as u64 {
        let start = srp_start(cycle);
        while let Some(Reverse((t, _))) = events.peek() {
            if *t > start {
                break;
            }
            let Reverse((t, ev)) = events.pop().expect("peeked");
            match ev {
                EventKind::UlGenerated { ue } => {
                    let id = txns.len();
                    txns.push(Pending {
                        txn: Transaction {
                            ue_id: ue,
                            ul_gen: t,
                            ul_delivery: 0,
                            server_in: 0,
                            dl_issued: false,
                            dl_gen: None,
                            dl_delivery: None,
                            completed: None,
                            t_ran_ul: 0,
                            t_ran_dl: None,
                            t_cn_total: 0,
                            t_p_gnb_total: 0,
                            t_p_ue_total: t_ue,
                            ul_attempts: 0,
                            dl_attempts: 0,
                        },
                        done: false,
                    });
                    sched.enqueue_uplink(Pdu::new(id as u64, ue, t + t_ue, ul_rbs));
                    if t + period < horizon {
                        events.push(Reverse((t + period, EventKind::UlGenerated { ue })));
                    }
                }
                EventKind::ServerArrival { txn } => {
                    let p = &mut txns[txn];
                    let ue = p.txn.ue_id as usize;
                    if dl_draw[ue].gen_bool(config.traffic.p_dl) {
                        let at_gnb = t + t_cn + t_gnb;
                        p.txn.dl_issued = true;
                        p.txn.dl_gen = Some(at_gnb);
                        p.txn.t_cn_total += t_cn;
                        p.txn.t_p_gnb_total += t_gnb;
                        sched.enqueue_downlink(Pdu::new(txn as u64, p.txn.ue_id, at_gnb, dl_rbs));
                    } else {
                        p.done = true;
                    }
                }
            }
        }

        let outcomes = sched.run_cycle(cycle, |g| {
            let ue = g.pdu.ue_id as usize;
            match g.direction {
                Direction::Uplink => ul_chan[ue].sample(&config.channel),
                Direction::Downlink => dl_chan[ue].sample(&config.channel),
            }
        })?;

        for o in outcomes {
            let HarqOutcome::Delivered { pdu, direction, at } = o else {
                continue;
            };
            let p = &mut txns[pdu.id as usize];
            match direction {
                Direction::Uplink => {
                    if pdu.control_at.is_some_and(|c| c > at) || at < pdu.ready_at {
                        return Err(Error::Invariant(format!(
                            "uplink PDU {} delivered before its grant",
                            pdu.id
                        )));
                    }
                    p.txn.ul_delivery = at;
                    p.txn.ul_attempts = pdu.attempts;
                    p.txn.t_ran_ul = at - pdu.ready_at;
                    p.txn.t_p_gnb_total = t_gnb;
                    p.txn.t_cn_total = t_cn;
                    p.txn.server_in = at + t_gnb + t_cn;
                    events.push(Reverse((
                        p.txn.server_in,
                        EventKind::ServerArrival {
                            txn: pdu.id as usize,
                        },
                    )));
                }
                Direction::Downlink => {
                    p.txn.dl_delivery = Some(at);
                    p.txn.dl_attempts = pdu.attempts;
                    p.txn.t_ran_dl = Some(at - pdu.ready_at);
                    p.txn.t_p_ue_total += t_ue;
                    p.txn.completed = Some(at + t_ue);
                    p.done = true;
                }
            }
        }
    }

    let mut transactions = Vec::new();
    for p in txns {
        if !p.done {
            continue;
        }
        let end = p.txn.completed.unwrap_or(p.txn.server_in);
        if end > horizon {
            continue;
        }
        p.txn.check()?;
        transactions.push(p.txn);
    }
    Ok(ReplicationOutput {
        seed,
        transactions,
        grant_log: sched.log.records().to_vec(),
    })
}

/// Mean latencies split by transaction scope, in symbols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScopeStats {
    pub full_loop_count: usize,
    pub ul_only_count: usize,
    pub full_loop_mean: Option<f64>,
    pub ul_only_mean: Option<f64>,
}

/// Full-loop T_5G_NR mean over transactions that received a command, and
/// one-way uplink mean over the rest.
pub fn rtt_stat_scope(transactions: &[Transaction]) -> ScopeStats {
    let full: Vec<f64> = transactions
        .iter()
        .filter_map(|t| t.t_5g_nr())
        .map(|x| x as f64)
        .collect();
    let ul: Vec<f64> = transactions
        .iter()
        .filter(|t| !t.dl_issued)
        .map(|t| t.ul_one_way() as f64)
        .collect();
    ScopeStats {
        full_loop_count: full.len(),
        ul_only_count: ul.len(),
        full_loop_mean: stats::mean(&full),
        ul_only_mean: stats::mean(&ul),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub index: u32,
    pub seed: u64,
    pub full_loop_count: usize,
    pub ul_only_count: usize,
    pub mean_t_5g_nr_ms: Option<f64>,
    pub mean_t_ran_ul_ms: Option<f64>,
    pub mean_t_ran_dl_ms: Option<f64>,
    pub mean_ul_one_way_ms: Option<f64>,
    /// No full-loop transaction; left out of the campaign statistics.
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub mean_t_5g_nr_ms: f64,
    pub ci90_halfwidth_ms: f64,
    pub mean_t_ran_ul_ms: f64,
    pub mean_t_ran_dl_ms: f64,
    /// 2·(T_P_gNB + T_P_UE + T_CN), constant for a configuration.
    pub fixed_terms_ms: f64,
    pub mean_ul_one_way_ms: Option<f64>,
    pub transaction_count: usize,
    pub full_loop_count: usize,
    pub excluded_replications: Vec<u32>,
    pub replications: Vec<ReplicationSummary>,
}

impl SimReport {
    pub fn replication_means(&self) -> Vec<f64> {
        self.replications
            .iter()
            .filter_map(|r| r.mean_t_5g_nr_ms)
            .collect()
    }
}

fn summarize(config: &SimConfig, index: u32, out: &ReplicationOutput) -> ReplicationSummary {
    let scope = rtt_stat_scope(&out.transactions);
    let full: Vec<&Transaction> = out
        .transactions
        .iter()
        .filter(|t| t.completed.is_some())
        .collect();
    let per_ms = config.radio.numerology.symbols_per_ms() as f64;
    let ms = |xs: Vec<f64>| stats::mean(&xs).map(|m| m / per_ms);
    ReplicationSummary {
        index,
        seed: out.seed,
        full_loop_count: scope.full_loop_count,
        ul_only_count: scope.ul_only_count,
        mean_t_5g_nr_ms: scope.full_loop_mean.map(|m| m / per_ms),
        mean_t_ran_ul_ms: ms(full.iter().map(|t| t.t_ran_ul as f64).collect()),
        mean_t_ran_dl_ms: ms(full
            .iter()
            .filter_map(|t| t.t_ran_dl)
            .map(|x| x as f64)
            .collect()),
        mean_ul_one_way_ms: scope.ul_only_mean.map(|m| m / per_ms),
        excluded: scope.full_loop_count == 0,
    }
}

/// Aggregates replication summaries into a campaign report.
pub fn aggregate(
    config: &SimConfig,
    summaries: Vec<ReplicationSummary>,
    transaction_count: usize,
) -> Result<SimReport> {
    let kept: Vec<&ReplicationSummary> = summaries.iter().filter(|s| !s.excluded).collect();
    if kept.len() < 2 {
        return Err(Error::Empty(format!(
            "{} of {} replications produced full-loop transactions; at least 2 are needed",
            kept.len(),
            summaries.len()
        )));
    }
    let means: Vec<f64> = kept.iter().filter_map(|s| s.mean_t_5g_nr_ms).collect();
    let ran_ul: Vec<f64> = kept.iter().filter_map(|s| s.mean_t_ran_ul_ms).collect();
    let ran_dl: Vec<f64> = kept.iter().filter_map(|s| s.mean_t_ran_dl_ms).collect();
    let ul_only: Vec<f64> = summaries
        .iter()
        .filter_map(|s| s.mean_ul_one_way_ms)
        .collect();
    let t_cn = config.to_ms(config.ticks(config.t_cn_ms));
    let proc_ms = config.to_ms(Ticks::from(
        config.gnb_processing_symbols + config.ue_processing_symbols,
    ));
    Ok(SimReport {
        config: *config,
        config_hash: config.hash(),
        seeds: summaries.iter().map(|s| s.seed).collect(),
        mean_t_5g_nr_ms: stats::mean(&means).expect("non-empty"),
        ci90_halfwidth_ms: stats::ci_halfwidth(&means, 0.90)?,
        mean_t_ran_ul_ms: stats::mean(&ran_ul).unwrap_or(0.0),
        mean_t_ran_dl_ms: stats::mean(&ran_dl).unwrap_or(0.0),
        fixed_terms_ms: 2.0 * (proc_ms + t_cn),
        mean_ul_one_way_ms: stats::mean(&ul_only),
        transaction_count,
        full_loop_count: summaries.iter().map(|s| s.full_loop_count).sum(),
        excluded_replications: summaries
            .iter()
            .filter(|s| s.excluded)
            .map(|s| s.index)
            .collect(),
        replications: summaries,
    })
}

/// Seeds for `n` replications derived from a base seed.
pub fn replication_seeds(base: u64, n: u32) -> Vec<u64> {
    (0..u64::from(n)).map(|i| base.wrapping_add(i)).collect()
}

/// Runs one replication per seed (in parallel) and aggregates in seed order.
pub fn run_campaign(config: &SimConfig, seeds: &[u64]) -> Result<SimReport> {
    run_campaign_with(config, seeds, |_, _| Ok(()))
}

/// As [`run_campaign`], handing each replication's raw output to `sink`
/// (called from worker threads, in no particular order).
pub fn run_campaign_with<F>(config: &SimConfig, seeds: &[u64], sink: F) -> Result<SimReport>
where
    F: Fn(u32, &ReplicationOutput) -> Result<()> + Sync,
{
    if seeds.len() < 2 {
        return Err(Error::InvalidConfig(
            "a campaign needs at least 2 replications".into(),
        ));
    }
    config.validate()?;
    let results: Vec<Result<(ReplicationSummary, usize)>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let out = run_replication(config, seed)?;
            sink(i as u32, &out)?;
            Ok((summarize(config, i as u32, &out), out.transactions.len()))
        })
        .collect();
    let mut summaries = Vec::with_capacity(seeds.len());
    let mut count = 0;
    for r in results {
        let (s, n) = r?;
        count += n;
        summaries.push(s);
    }
    aggregate(config, summaries, count)
}

//! gNB scheduling per T_SRP: a fixed round-robin control pattern and
//! dynamic PUSCH/PDSCH grants with HARQ retransmission.
//!
//! Cycle layout (8 mini-slots): 4 control mini-slots, then `pusch_minislots`
//! uplink data mini-slots, then `pdsch_minislots` downlink data mini-slots.
//! Control activity is accounted at T_SRP granularity and timestamped at the
//! end of the control region. Data allocations are RB units taken in order
//! from a per-class pool of (mini-slot × RB); a transport block may spill
//! into the next mini-slot of the same class and is delivered at the end of
//! the last mini-slot it occupies (its HARQ ACK shares that mini-slot).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::{srp_ticks, ChannelKind, Ticks, MINISLOTS_PER_SRP, SYMBOLS_PER_MINISLOT};

pub const CONTROL_MINISLOTS: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Oldest request first, ties by ue_id.
    #[default]
    Fifo,
    /// UEs served in rotating ue_id order.
    #[serde(rename = "rr")]
    RoundRobin,
}

impl std::str::FromStr for Policy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fifo" => Ok(Policy::Fifo),
            "rr" => Ok(Policy::RoundRobin),
            other => Err(Error::InvalidConfig(format!(
                "unknown scheduling policy `{other}` (fifo|rr)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrpLayout {
    pub control_minislots: u32,
    pub pusch_minislots: u32,
    pub pdsch_minislots: u32,
    pub n_rb: u32,
}

impl SrpLayout {
    pub fn new(n_rb: u32, pusch_minislots: u32, pdsch_minislots: u32) -> Result<Self> {
        if n_rb == 0 {
            return Err(Error::InvalidConfig("n_rb must be at least 1".into()));
        }
        if pusch_minislots == 0 || pdsch_minislots == 0 {
            return Err(Error::InvalidConfig(
                "each data direction needs at least one mini-slot".into(),
            ));
        }
        if CONTROL_MINISLOTS + pusch_minislots + pdsch_minislots != MINISLOTS_PER_SRP {
            return Err(Error::InvalidConfig(format!(
                "pusch ({pusch_minislots}) + pdsch ({pdsch_minislots}) mini-slots must equal {}",
                MINISLOTS_PER_SRP - CONTROL_MINISLOTS
            )));
        }
        Ok(SrpLayout {
            control_minislots: CONTROL_MINISLOTS,
            pusch_minislots,
            pdsch_minislots,
            n_rb,
        })
    }

    /// Default 4 control / 3 PUSCH / 1 PDSCH split.
    pub fn standard(n_rb: u32) -> Self {
        SrpLayout {
            control_minislots: CONTROL_MINISLOTS,
            pusch_minislots: 3,
            pdsch_minislots: 1,
            n_rb,
        }
    }

    fn first_minislot(&self, dir: Direction) -> u32 {
        match dir {
            Direction::Uplink => self.control_minislots,
            Direction::Downlink => self.control_minislots + self.pusch_minislots,
        }
    }

    fn minislots(&self, dir: Direction) -> u32 {
        match dir {
            Direction::Uplink => self.pusch_minislots,
            Direction::Downlink => self.pdsch_minislots,
        }
    }

    pub fn budget(&self, dir: Direction) -> u32 {
        self.minislots(dir) * self.n_rb
    }
}

pub fn srp_start(srp_index: u64) -> Ticks {
    srp_index as Ticks * srp_ticks()
}

/// End of mini-slot `minislot` (0-based within the cycle) of cycle `srp_index`.
pub fn minislot_end(srp_index: u64, minislot: u32) -> Ticks {
    srp_start(srp_index) + Ticks::from(minislot + 1) * SYMBOLS_PER_MINISLOT
}

/// Time at which this cycle's PUCCH/PDCCH exchange is considered complete.
pub fn control_done(srp_index: u64) -> Ticks {
    minislot_end(srp_index, CONTROL_MINISLOTS - 1)
}

/// UEs whose control traffic fits one T_SRP: each needs two PUCCH/PDCCH pairs.
pub fn control_capacity(n_rb: u32) -> u32 {
    n_rb / 2
}

/// Round-robin control window for cycle `srp_index`.
///
/// The window covers `capacity` consecutive ue_ids (mod `n_ues`) and advances
/// by `capacity` each cycle.
pub fn assign_control(srp_index: u64, n_ues: u32, capacity: u32) -> Vec<u32> {
    if n_ues == 0 || capacity == 0 {
        return Vec::new();
    }
    if capacity >= n_ues {
        return (0..n_ues).collect();
    }
    let start = (srp_index % u64::from(n_ues)) * u64::from(capacity) % u64::from(n_ues);
    (0..capacity)
        .map(|k| ((start + u64::from(k)) % u64::from(n_ues)) as u32)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Uplink,
    Downlink,
}

impl Direction {
    pub fn channel(self) -> ChannelKind {
        match self {
            Direction::Uplink => ChannelKind::Pusch,
            Direction::Downlink => ChannelKind::Pdsch,
        }
    }
}

/// A transport block waiting for, or occupying, data resources.
#[derive(Debug, Clone, PartialEq)]
pub struct Pdu {
    pub id: u64,
    pub ue_id: u32,
    /// When the PDU became available to the MAC (UE buffer or gNB buffer).
    pub ready_at: Ticks,
    pub rbs: u32,
    pub attempts: u32,
    /// Completion of the control exchange that first announced this PDU.
    pub control_at: Option<Ticks>,
    retx_from: Option<u64>,
}

impl Pdu {
    pub fn new(id: u64, ue_id: u32, ready_at: Ticks, rbs: u32) -> Self {
        Pdu {
            id,
            ue_id,
            ready_at,
            rbs,
            attempts: 0,
            control_at: None,
            retx_from: None,
        }
    }

    pub fn is_retransmission(&self) -> bool {
        self.retx_from.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrantRecord {
    pub srp_index: u64,
    pub minislot: u32,
    pub ue_id: u32,
    pub kind: ChannelKind,
    pub rb_start: u32,
    pub rb_len: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grant {
    pub pdu: Pdu,
    pub direction: Direction,
    pub srp_index: u64,
    /// Start of the first data mini-slot used.
    pub tx_start: Ticks,
    /// End of the last data mini-slot used; HARQ ACK completes here.
    pub tx_end: Ticks,
    pub pieces: Vec<GrantRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HarqOutcome {
    Delivered {
        pdu: Pdu,
        direction: Direction,
        at: Ticks,
    },
    Requeued {
        pdu_id: u64,
        attempts: u32,
    },
}

/// Audit trail of data grants, optionally retained in full.
#[derive(Debug, Clone, Default)]
pub struct GrantLog {
    retain: bool,
    records: Vec<GrantRecord>,
}

impl GrantLog {
    pub fn new(retain: bool) -> Self {
        GrantLog {
            retain,
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[GrantRecord] {
        &self.records
    }

    fn extend(&mut self, records: &[GrantRecord]) {
        if self.retain {
            self.records.extend_from_slice(records);
        }
    }
}

/// Checks one cycle's grants: RB bounds, no double-booked RB, and half-duplex.
pub fn audit_cycle(records: &[GrantRecord], n_rb: u32) -> Result<()> {
    let mut used: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
    let mut tx: BTreeMap<(u32, u32), ChannelKind> = BTreeMap::new();
    for r in records {
        if r.rb_len == 0 || r.rb_start + r.rb_len > n_rb {
            return Err(Error::Invariant(format!(
                "grant {r:?} exceeds the {n_rb}-RB grid"
            )));
        }
        let spans = used.entry(r.minislot).or_default();
        if spans
            .iter()
            .any(|&(s, l)| r.rb_start < s + l && s < r.rb_start + r.rb_len)
        {
            return Err(Error::Invariant(format!(
                "RB granted twice in mini-slot {}: {r:?}",
                r.minislot
            )));
        }
        spans.push((r.rb_start, r.rb_len));
        if let Some(prev) = tx.insert((r.ue_id, r.minislot), r.kind) {
            if prev != r.kind {
                return Err(Error::Invariant(format!(
                    "UE {} both transmits and receives in mini-slot {}",
                    r.ue_id, r.minislot
                )));
            }
        }
    }
    for (ms, spans) in &used {
        let total: u32 = spans.iter().map(|&(_, l)| l).sum();
        if total > n_rb {
            return Err(Error::Invariant(format!(
                "mini-slot {ms} uses {total} > {n_rb} RBs"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Default)]
struct Flow {
    waiting: Vec<Pdu>,
    retx: Vec<Pdu>,
    rr_next: u32,
}

/// Scheduler state for one cell over one replication.
#[derive(Debug)]
pub struct Scheduler {
    layout: SrpLayout,
    n_ues: u32,
    capacity: u32,
    policy: Policy,
    ul: Flow,
    dl: Flow,
    pub log: GrantLog,
}

impl Scheduler {
    pub fn new(layout: SrpLayout, n_ues: u32, policy: Policy) -> Self {
        Scheduler {
            capacity: control_capacity(layout.n_rb),
            layout,
            n_ues,
            policy,
            ul: Flow::default(),
            dl: Flow::default(),
            log: GrantLog::new(false),
        }
    }

    /// Overrides the per-cycle control capacity, e.g. to probe the data plane
    /// alone with every UE served.
    pub fn with_control_capacity(mut self, capacity: u32) -> Self {
        self.capacity = capacity;
        self
    }

    pub fn retain_log(mut self) -> Self {
        self.log = GrantLog::new(true);
        self
    }

    pub fn layout(&self) -> &SrpLayout {
        &self.layout
    }

    pub fn control_set(&self, srp_index: u64) -> Vec<u32> {
        assign_control(srp_index, self.n_ues, self.capacity)
    }

    /// Queues a PDU in the UE's uplink buffer.
    pub fn enqueue_uplink(&mut self, pdu: Pdu) {
        self.ul.waiting.push(pdu);
    }

    /// Queues a PDU in the gNB's downlink buffer.
    pub fn enqueue_downlink(&mut self, pdu: Pdu) {
        self.dl.waiting.push(pdu);
    }

    pub fn pending(&self, dir: Direction) -> usize {
        let f = self.flow(dir);
        f.waiting.len() + f.retx.len()
    }

    fn flow(&self, dir: Direction) -> &Flow {
        match dir {
            Direction::Uplink => &self.ul,
            Direction::Downlink => &self.dl,
        }
    }

    fn flow_mut(&mut self, dir: Direction) -> &mut Flow {
        match dir {
            Direction::Uplink => &mut self.ul,
            Direction::Downlink => &mut self.dl,
        }
    }

    pub fn schedule_uplink(&mut self, srp_index: u64) -> Result<Vec<Grant>> {
        self.schedule(srp_index, Direction::Uplink)
    }

    pub fn schedule_downlink(&mut self, srp_index: u64) -> Result<Vec<Grant>> {
        self.schedule(srp_index, Direction::Downlink)
    }

    fn schedule(&mut self, srp_index: u64, dir: Direction) -> Result<Vec<Grant>> {
        let start = srp_start(srp_index);
        let served = self.control_set(srp_index);
        let mut is_served = vec![false; self.n_ues as usize];
        for &u in &served {
            is_served[u as usize] = true;
        }
        let layout = self.layout;
        let n_ues = self.n_ues.max(1);
        let policy = self.policy;
        let flow = self.flow_mut(dir);

        // Fresh data needs this cycle's PUCCH/PDCCH exchange; retransmissions
        // reuse their original grant.
        let mut candidates: Vec<Pdu> = Vec::new();
        let mut i = 0;
        while i < flow.retx.len() {
            if flow.retx[i].retx_from.is_some_and(|c| c < srp_index) {
                candidates.push(flow.retx.swap_remove(i));
            } else {
                i += 1;
            }
        }
        candidates.sort_by_key(|p| (p.ready_at, p.ue_id, p.id));
        let n_retx = candidates.len();

        let mut fresh: Vec<Pdu> = Vec::new();
        let mut i = 0;
        while i < flow.waiting.len() {
            let p = &flow.waiting[i];
            if p.ready_at <= start && is_served.get(p.ue_id as usize).copied().unwrap_or(false) {
                let mut p = flow.waiting.swap_remove(i);
                p.control_at.get_or_insert(control_done(srp_index));
                fresh.push(p);
            } else {
                i += 1;
            }
        }
        match policy {
            Policy::Fifo => fresh.sort_by_key(|p| (p.ready_at, p.ue_id, p.id)),
            Policy::RoundRobin => {
                let base = flow.rr_next % n_ues;
                fresh.sort_by_key(|p| ((p.ue_id + n_ues - base) % n_ues, p.ready_at, p.id));
            }
        }
        candidates.extend(fresh);

        let budget = layout.budget(dir);
        let first = layout.first_minislot(dir);
        let mut cursor = 0u32;
        let mut grants = Vec::new();
        let mut deferred = Vec::new();
        for (k, pdu) in candidates.into_iter().enumerate() {
            if pdu.rbs > layout.n_rb {
                return Err(Error::InvalidConfig(format!(
                    "PDU needs {} RBs but a mini-slot has {}",
                    pdu.rbs, layout.n_rb
                )));
            }
            if cursor + pdu.rbs > budget {
                if k < n_retx {
                    flow.retx.push(pdu);
                } else {
                    deferred.push(pdu);
                }
                continue;
            }
            let mut pieces = Vec::new();
            let mut left = pdu.rbs;
            let mut pos = cursor;
            while left > 0 {
                let ms = pos / layout.n_rb;
                let rb = pos % layout.n_rb;
                let len = left.min(layout.n_rb - rb);
                pieces.push(GrantRecord {
                    srp_index,
                    minislot: first + ms,
                    ue_id: pdu.ue_id,
                    kind: dir.channel(),
                    rb_start: rb,
                    rb_len: len,
                });
                pos += len;
                left -= len;
            }
            cursor = pos;
            if policy == Policy::RoundRobin && !pdu.is_retransmission() {
                flow.rr_next = (pdu.ue_id + 1) % n_ues;
            }
            let first_ms = pieces[0].minislot;
            let last_ms = pieces[pieces.len() - 1].minislot;
            grants.push(Grant {
                tx_start: minislot_end(srp_index, first_ms) - SYMBOLS_PER_MINISLOT,
                tx_end: minislot_end(srp_index, last_ms),
                direction: dir,
                srp_index,
                pieces,
                pdu,
            });
        }
        // Deferred fresh requests keep their original timestamps, hence their FIFO position.
        flow.waiting.extend(deferred);

        let records: Vec<GrantRecord> = grants
            .iter()
            .flat_map(|g| g.pieces.iter().copied())
            .collect();
        audit_cycle(&records, layout.n_rb)?;
        self.log.extend(&records);
        Ok(grants)
    }

    /// Applies the HARQ feedback for a granted transport block.
    pub fn harq_step(&mut self, grant: Grant, success: bool) -> HarqOutcome {
        let mut pdu = grant.pdu;
        pdu.attempts += 1;
        if success {
            HarqOutcome::Delivered {
                pdu,
                direction: grant.direction,
                at: grant.tx_end,
            }
        } else {
            pdu.retx_from = Some(grant.srp_index);
            let out = HarqOutcome::Requeued {
                pdu_id: pdu.id,
                attempts: pdu.attempts,
            };
            self.flow_mut(grant.direction).retx.push(pdu);
            out
        }
    }

    /// Runs one full cycle: uplink and downlink grants, then HARQ feedback from
    /// `outcome`, which is called once per granted transport block in grant order.
    pub fn run_cycle(
        &mut self,
        srp_index: u64,
        mut outcome: impl FnMut(&Grant) -> bool,
    ) -> Result<Vec<HarqOutcome>> {
        let mut grants = self.schedule_uplink(srp_index)?;
        grants.extend(self.schedule_downlink(srp_index)?);
        let both: Vec<GrantRecord> = grants
            .iter()
            .flat_map(|g| g.pieces.iter().copied())
            .collect();
        audit_cycle(&both, self.layout.n_rb)?;
        let mut out = Vec::with_capacity(grants.len());
        for g in grants {
            let ok = outcome(&g);
            out.push(self.harq_step(g, ok));
        }
        Ok(out)
    }
}

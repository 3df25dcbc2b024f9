//! Numerology, frame timing, resource-grid capacity and message geometry.
//!
//! All time quantities are expressed in OFDM symbols ([`Ticks`]) of the
//! configured numerology; a slot is 14 symbols, a mini-slot 7. The cyclic
//! prefix is not modeled separately, so one symbol lasts exactly slot/14.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simulation time in OFDM symbols of the active numerology.
pub type Ticks = i64;

pub const SUBCARRIERS_PER_RB: u32 = 12;
pub const SYMBOLS_PER_SLOT: Ticks = 14;
pub const SYMBOLS_PER_MINISLOT: Ticks = 7;
pub const MINISLOTS_PER_SRP: u32 = 8;
/// Symbols occupied by one PUSCH/PDSCH allocation.
pub const DATA_SYMBOLS: u32 = 4;
/// Half-duplex switch between data and its HARQ ACK.
pub const TURNAROUND_SYMBOLS: u32 = 1;
pub const HARQ_ACK_SYMBOLS: u32 = 2;

/// Subcarrier spacing Δf = 15·2^μ kHz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Numerology {
    mu: u8,
}

impl Numerology {
    pub const SCS_30: Numerology = Numerology { mu: 1 };
    pub const SCS_60: Numerology = Numerology { mu: 2 };
    pub const SCS_120: Numerology = Numerology { mu: 3 };

    pub fn from_scs_khz(scs_khz: u32) -> Result<Self> {
        match scs_khz {
            30 => Ok(Self::SCS_30),
            60 => Ok(Self::SCS_60),
            120 => Ok(Self::SCS_120),
            other => Err(Error::InvalidConfig(format!(
                "subcarrier spacing {other} kHz is not one of 30, 60, 120"
            ))),
        }
    }

    pub fn mu(self) -> u8 {
        self.mu
    }

    pub fn scs_khz(self) -> u32 {
        15 << self.mu
    }

    pub fn scs_hz(self) -> f64 {
        f64::from(self.scs_khz()) * 1e3
    }

    pub fn slot_duration_ms(self) -> f64 {
        1.0 / f64::from(1u32 << self.mu)
    }

    pub fn symbol_duration_ms(self) -> f64 {
        self.slot_duration_ms() / SYMBOLS_PER_SLOT as f64
    }

    pub fn minislot_duration_ms(self) -> f64 {
        self.slot_duration_ms() / 2.0
    }

    /// Symbols per millisecond (14·2^μ), exact.
    pub fn symbols_per_ms(self) -> Ticks {
        SYMBOLS_PER_SLOT << self.mu
    }

    pub fn ticks_to_ms(self, ticks: Ticks) -> f64 {
        ticks as f64 / self.symbols_per_ms() as f64
    }

    /// Converts a duration to symbols, rounding to the nearest symbol.
    pub fn ms_to_ticks(self, ms: f64) -> Ticks {
        (ms * self.symbols_per_ms() as f64).round() as Ticks
    }
}

impl TryFrom<u32> for Numerology {
    type Error = Error;
    fn try_from(scs_khz: u32) -> Result<Self> {
        Self::from_scs_khz(scs_khz)
    }
}

impl From<Numerology> for u32 {
    fn from(n: Numerology) -> u32 {
        n.scs_khz()
    }
}

/// Modulation order M used on PUSCH/PDSCH.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum ModOrder {
    Qpsk,
    Qam64,
    Qam256,
}

impl ModOrder {
    pub fn from_order(m: u32) -> Result<Self> {
        match m {
            4 => Ok(ModOrder::Qpsk),
            64 => Ok(ModOrder::Qam64),
            256 => Ok(ModOrder::Qam256),
            other => Err(Error::InvalidConfig(format!(
                "modulation order {other} is not one of 4, 64, 256"
            ))),
        }
    }

    pub fn order(self) -> u32 {
        match self {
            ModOrder::Qpsk => 4,
            ModOrder::Qam64 => 64,
            ModOrder::Qam256 => 256,
        }
    }

    pub fn bits_per_symbol(self) -> u32 {
        self.order().trailing_zeros()
    }
}

impl TryFrom<u32> for ModOrder {
    type Error = Error;
    fn try_from(m: u32) -> Result<Self> {
        Self::from_order(m)
    }
}

impl From<ModOrder> for u32 {
    fn from(m: ModOrder) -> u32 {
        m.order()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChannelKind {
    Pucch,
    Pdcch,
    Pusch,
    Pdsch,
    HarqAck,
}

impl ChannelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::Pucch => "PUCCH",
            ChannelKind::Pdcch => "PDCCH",
            ChannelKind::Pusch => "PUSCH",
            ChannelKind::Pdsch => "PDSCH",
            ChannelKind::HarqAck => "HARQ_ACK",
        }
    }
}

/// Time/frequency footprint of one message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageSpec {
    pub kind: ChannelKind,
    pub rb_count: u32,
    pub symbol_count: u32,
}

impl MessageSpec {
    /// Footprint of a message; `rb_count` is only honored for data channels.
    pub fn new(kind: ChannelKind, rb_count: u32) -> Self {
        match kind {
            ChannelKind::Pucch | ChannelKind::Pdcch => MessageSpec {
                kind,
                rb_count: 1,
                symbol_count: SYMBOLS_PER_MINISLOT as u32,
            },
            ChannelKind::Pusch | ChannelKind::Pdsch => MessageSpec {
                kind,
                rb_count: rb_count.max(1),
                symbol_count: DATA_SYMBOLS,
            },
            ChannelKind::HarqAck => MessageSpec {
                kind,
                rb_count: 1,
                symbol_count: HARQ_ACK_SYMBOLS,
            },
        }
    }
}

/// Radio-side parameters of one simulated cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub bandwidth_hz: f64,
    #[serde(rename = "scs_khz")]
    pub numerology: Numerology,
    pub mod_order: ModOrder,
    pub header_bytes: u32,
    pub ul_payload_bytes: u32,
    pub dl_payload_bytes: u32,
}

impl RadioConfig {
    pub fn new(bandwidth_hz: f64, numerology: Numerology, mod_order: ModOrder) -> Self {
        RadioConfig {
            bandwidth_hz,
            numerology,
            mod_order,
            header_bytes: 72,
            ul_payload_bytes: 32,
            dl_payload_bytes: 1,
        }
    }

    /// Checks that the grid holds at least one RB and both PDUs fit one mini-slot.
    pub fn validate(&self) -> Result<()> {
        let n = n_rb(self)?;
        if self.ul_payload_bytes == 0 || self.dl_payload_bytes == 0 {
            return Err(Error::InvalidConfig(
                "payload sizes must be at least 1 byte".into(),
            ));
        }
        for payload in [self.ul_payload_bytes, self.dl_payload_bytes] {
            let rbs = rbs_for_pdu(pdu_bytes(payload, self)?, self.mod_order)?;
            if rbs > n {
                return Err(Error::InvalidConfig(format!(
                    "a {payload} B payload needs {rbs} RBs but a mini-slot has only {n}"
                )));
            }
        }
        Ok(())
    }
}

/// Number of resource blocks, ⌊B / (12·Δf)⌋.
pub fn n_rb(config: &RadioConfig) -> Result<u32> {
    if !(config.bandwidth_hz > 0.0) || !config.bandwidth_hz.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "bandwidth must be positive, got {} Hz",
            config.bandwidth_hz
        )));
    }
    let rb_width_hz = f64::from(SUBCARRIERS_PER_RB) * config.numerology.scs_hz();
    let n = (config.bandwidth_hz / rb_width_hz).floor();
    if n < 1.0 {
        return Err(Error::InvalidConfig(format!(
            "{} Hz cannot hold one {} Hz resource block",
            config.bandwidth_hz, rb_width_hz
        )));
    }
    Ok(n as u32)
}

/// Bytes carried by a single RB over `symbol_count` symbols at modulation `mod_order`.
pub fn tb_bytes_per_rb(mod_order: ModOrder, symbol_count: u32) -> u32 {
    SUBCARRIERS_PER_RB * symbol_count * mod_order.bits_per_symbol() / 8
}

/// PHY PDU size after adding the protocol-stack header.
pub fn pdu_bytes(payload: u32, config: &RadioConfig) -> Result<u32> {
    if payload == 0 {
        return Err(Error::InvalidConfig(
            "payload must be at least 1 byte".into(),
        ));
    }
    Ok(payload + config.header_bytes)
}

/// RBs required to carry `pdu` bytes in one 4-symbol data allocation.
pub fn rbs_for_pdu(pdu: u32, mod_order: ModOrder) -> Result<u32> {
    if pdu == 0 {
        return Err(Error::InvalidConfig("PDU must be at least 1 byte".into()));
    }
    Ok(pdu.div_ceil(tb_bytes_per_rb(mod_order, DATA_SYMBOLS)))
}

/// Length of one scheduling period (8 mini-slots) in milliseconds.
pub fn srp_duration_ms(numerology: Numerology) -> f64 {
    f64::from(MINISLOTS_PER_SRP) * numerology.minislot_duration_ms()
}

/// Length of one scheduling period in symbols.
pub fn srp_ticks() -> Ticks {
    Ticks::from(MINISLOTS_PER_SRP) * SYMBOLS_PER_MINISLOT
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(b_mhz: f64, scs: u32, m: u32) -> RadioConfig {
        RadioConfig::new(
            b_mhz * 1e6,
            Numerology::from_scs_khz(scs).unwrap(),
            ModOrder::from_order(m).unwrap(),
        )
    }

    #[test]
    fn rb_counts() {
        assert_eq!(n_rb(&cfg(5.0, 30, 256)).unwrap(), 13);
        assert_eq!(n_rb(&cfg(100.0, 120, 64)).unwrap(), 69);
        assert_eq!(n_rb(&cfg(20.0, 60, 256)).unwrap(), 27);
        assert!(matches!(
            n_rb(&cfg(0.3, 30, 256)),
            Err(Error::InvalidConfig(_))
        ));
        assert!(n_rb(&cfg(0.0, 30, 256)).is_err());
    }

    #[test]
    fn transport_block_sizes() {
        assert_eq!(tb_bytes_per_rb(ModOrder::Qam256, 4), 48);
        assert_eq!(tb_bytes_per_rb(ModOrder::Qam64, 4), 36);
        assert_eq!(tb_bytes_per_rb(ModOrder::Qpsk, 4), 12);
        assert!(ModOrder::from_order(16).is_err());
    }

    #[test]
    fn pdu_geometry() {
        let c = cfg(5.0, 30, 256);
        assert_eq!(pdu_bytes(32, &c).unwrap(), 104);
        assert_eq!(pdu_bytes(1, &c).unwrap(), 73);
        assert!(pdu_bytes(0, &c).is_err());
        assert_eq!(rbs_for_pdu(104, ModOrder::Qam256).unwrap(), 3);
        assert_eq!(rbs_for_pdu(73, ModOrder::Qam256).unwrap(), 2);
        assert_eq!(rbs_for_pdu(104, ModOrder::Qam64).unwrap(), 3);
        assert_eq!(rbs_for_pdu(48, ModOrder::Qam256).unwrap(), 1);
    }

    #[test]
    fn srp_lengths() {
        assert_eq!(srp_duration_ms(Numerology::SCS_30), 2.0);
        assert_eq!(srp_duration_ms(Numerology::SCS_60), 1.0);
        assert_eq!(srp_duration_ms(Numerology::SCS_120), 0.5);
        assert_eq!(srp_ticks(), 56);
        assert_eq!(Numerology::SCS_30.symbols_per_ms(), 28);
    }

    #[test]
    fn message_footprints() {
        let data = MessageSpec::new(ChannelKind::Pusch, 3);
        let ack = MessageSpec::new(ChannelKind::HarqAck, 9);
        assert_eq!((data.rb_count, data.symbol_count), (3, 4));
        assert_eq!((ack.rb_count, ack.symbol_count), (1, 2));
        assert_eq!(MessageSpec::new(ChannelKind::Pdcch, 5).rb_count, 1);
        assert_eq!(
            data.symbol_count + TURNAROUND_SYMBOLS + ack.symbol_count,
            SYMBOLS_PER_MINISLOT as u32
        );
    }

    #[test]
    fn oversize_pdu_rejected() {
        let mut c = cfg(0.72, 60, 4);
        assert_eq!(n_rb(&c).unwrap(), 1);
        assert!(c.validate().is_err());
        c.bandwidth_hz = 5e6;
        c.numerology = Numerology::SCS_30;
        assert!(c.validate().is_ok());
    }

    proptest! {
        #[test]
        fn rb_count_brackets_bandwidth(b in 400e3f64..400e6, scs_idx in 0usize..3) {
            let scs = [30u32, 60, 120][scs_idx];
            let c = cfg(b / 1e6, scs, 256);
            let width = 12.0 * f64::from(scs) * 1e3;
            if let Ok(n) = n_rb(&c) {
                prop_assert!(width * f64::from(n) <= b + 1e-6);
                prop_assert!(b < width * f64::from(n + 1));
            } else {
                prop_assert!(b < width);
            }
        }

        #[test]
        fn rb_count_monotone(b1 in 1e6f64..200e6, b2 in 1e6f64..200e6) {
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            for scs in [30u32, 60, 120] {
                let a = n_rb(&cfg(lo / 1e6, scs, 64)).unwrap_or(0);
                let z = n_rb(&cfg(hi / 1e6, scs, 64)).unwrap_or(0);
                prop_assert!(a <= z);
            }
            let n30 = n_rb(&cfg(hi / 1e6, 30, 64)).unwrap_or(0);
            let n60 = n_rb(&cfg(hi / 1e6, 60, 64)).unwrap_or(0);
            let n120 = n_rb(&cfg(hi / 1e6, 120, 64)).unwrap_or(0);
            prop_assert!(n30 >= n60 && n60 >= n120);
        }

        #[test]
        fn rbs_for_pdu_is_tight(pdu in 1u32..2000, m_idx in 0usize..3) {
            let m = [ModOrder::Qpsk, ModOrder::Qam64, ModOrder::Qam256][m_idx];
            let cap = tb_bytes_per_rb(m, 4);
            let k = rbs_for_pdu(pdu, m).unwrap();
            prop_assert!(k * cap >= pdu);
            prop_assert!((k - 1) * cap < pdu);
        }
    }

    #[test]
    fn tb_size_scaling() {
        let ms = [ModOrder::Qpsk, ModOrder::Qam64, ModOrder::Qam256];
        for w in ms.windows(2) {
            assert!(tb_bytes_per_rb(w[0], 4) < tb_bytes_per_rb(w[1], 4));
        }
        for m in ms {
            assert_eq!(tb_bytes_per_rb(m, 8), 2 * tb_bytes_per_rb(m, 4));
        }
    }
}

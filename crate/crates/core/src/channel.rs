//! Gilbert-Elliot two-state burst-error channel.
//!
//! The chain advances once per PUSCH/PDSCH transmission attempt, not per
//! symbol, so a bad state persists across idle time between transmissions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GilbertElliotParams {
    /// P(correct reception | G).
    pub g: f64,
    /// P(correct reception | B).
    pub b: f64,
    /// P(G → B).
    pub u: f64,
    /// P(B → G).
    pub v: f64,
}

impl GilbertElliotParams {
    pub fn new(g: f64, b: f64, u: f64, v: f64) -> Result<Self> {
        let p = GilbertElliotParams { g, b, u, v };
        p.validate()?;
        Ok(p)
    }

    /// Error-free channel.
    pub fn ideal() -> Self {
        GilbertElliotParams {
            g: 1.0,
            b: 1.0,
            u: 0.0,
            v: 1.0,
        }
    }

    /// Errors only in B (g = 1, b = 0) with `u` chosen so the steady-state
    /// error rate equals `target_pe`.
    pub fn with_error_rate(target_pe: f64, v: f64) -> Result<Self> {
        let u = calibrate(target_pe, 1.0, 0.0, v)?;
        Self::new(1.0, 0.0, u, v)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("g", self.g), ("b", self.b), ("u", self.u), ("v", self.v)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidConfig(format!(
                    "channel.{name} = {x} is outside [0, 1]"
                )));
            }
        }
        if self.u + self.v <= 0.0 {
            return Err(Error::InvalidConfig(
                "channel needs u + v > 0 for a steady state".into(),
            ));
        }
        Ok(())
    }
}

/// Steady-state occupancy (π_G, π_B).
pub fn steady_state(params: &GilbertElliotParams) -> Result<(f64, f64)> {
    let total = params.u + params.v;
    if total <= 0.0 {
        return Err(Error::InvalidConfig(
            "u = v = 0 has no unique steady state".into(),
        ));
    }
    let pi_g = params.v / total;
    Ok((pi_g, 1.0 - pi_g))
}

/// Long-run reception error rate p_e.
pub fn error_rate(params: &GilbertElliotParams) -> Result<f64> {
    let (pi_g, pi_b) = steady_state(params)?;
    Ok((1.0 - params.g) * pi_g + (1.0 - params.b) * pi_b)
}

/// Transition probability u (G → B) that yields `target_pe` for the given g, b, v.
pub fn calibrate(target_pe: f64, g: f64, b: f64, v: f64) -> Result<f64> {
    let floor = 1.0 - g;
    let ceil = 1.0 - b;
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::InvalidConfig(format!("v = {v} must lie in (0, 1]")));
    }
    const SLACK: f64 = 1e-12;
    if !(target_pe >= floor - SLACK && target_pe < ceil) {
        return Err(Error::InvalidConfig(format!(
            "target error rate {target_pe} is outside the achievable range [{floor}, {ceil})"
        )));
    }
    let u = (v * (target_pe - floor) / (ceil - target_pe)).max(0.0);
    if u > 1.0 {
        return Err(Error::InvalidConfig(format!(
            "target error rate {target_pe} needs u = {u} > 1 with v = {v}"
        )));
    }
    Ok(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkState {
    Good,
    Bad,
}

/// One link's Markov state plus its private random stream.
#[derive(Debug, Clone)]
pub struct ChannelState {
    pub current: LinkState,
    rng: ChaCha8Rng,
}

impl ChannelState {
    /// Starts in G.
    pub fn new(rng: ChaCha8Rng) -> Self {
        ChannelState {
            current: LinkState::Good,
            rng,
        }
    }

    pub fn with_state(current: LinkState, rng: ChaCha8Rng) -> Self {
        ChannelState { current, rng }
    }

    /// Draws one transmission outcome, then advances the chain.
    ///
    /// Exactly two uniforms are consumed per call: the reception draw first,
    /// the transition draw second.
    pub fn sample(&mut self, params: &GilbertElliotParams) -> bool {
        let reception: f64 = self.rng.gen();
        let transition: f64 = self.rng.gen();
        let (p_ok, p_leave) = match self.current {
            LinkState::Good => (params.g, params.u),
            LinkState::Bad => (params.b, params.v),
        };
        let success = reception < p_ok;
        if transition < p_leave {
            self.current = match self.current {
                LinkState::Good => LinkState::Bad,
                LinkState::Bad => LinkState::Good,
            };
        }
        success
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamKind};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rng(i: u32) -> ChaCha8Rng {
        stream(11, StreamKind::UplinkChannel, i)
    }

    #[test]
    fn steady_state_examples() {
        let p = GilbertElliotParams::new(1.0, 0.0, 0.0050505, 0.5).unwrap();
        let (g, b) = steady_state(&p).unwrap();
        assert_relative_eq!(b, 0.0050505 / 0.5050505, epsilon = 1e-15);
        assert!((b - 0.01).abs() < 1e-6);
        assert_eq!(g + b, 1.0);

        let sym = GilbertElliotParams::new(1.0, 0.0, 0.3, 0.3).unwrap();
        assert_eq!(steady_state(&sym).unwrap(), (0.5, 0.5));

        let absorbing = GilbertElliotParams::new(1.0, 0.0, 0.0, 0.2).unwrap();
        assert_eq!(steady_state(&absorbing).unwrap(), (1.0, 0.0));

        let stuck = GilbertElliotParams {
            g: 1.0,
            b: 0.0,
            u: 0.0,
            v: 0.0,
        };
        assert!(steady_state(&stuck).is_err());
        assert!(stuck.validate().is_err());
    }

    #[test]
    fn error_rate_examples() {
        let p = GilbertElliotParams::new(1.0, 0.0, 0.0050505, 0.5).unwrap();
        let (_, pi_b) = steady_state(&p).unwrap();
        assert_relative_eq!(error_rate(&p).unwrap(), pi_b, epsilon = 1e-15);

        for (u, v) in [(0.1, 0.2), (0.7, 0.05), (0.0, 1.0)] {
            let flat = GilbertElliotParams::new(0.9, 0.9, u, v).unwrap();
            assert_relative_eq!(error_rate(&flat).unwrap(), 0.1, epsilon = 1e-12);
        }

        let mixed = GilbertElliotParams::new(0.99, 0.5, 0.1, 0.9).unwrap();
        assert_relative_eq!(error_rate(&mixed).unwrap(), 0.059, epsilon = 1e-12);
    }

    #[test]
    fn calibrate_examples() {
        let u = calibrate(0.01, 1.0, 0.0, 0.5).unwrap();
        assert_relative_eq!(u, 0.5 * 0.01 / 0.99, epsilon = 1e-15);
        assert!((u - 0.00505051).abs() < 1e-8);

        assert_eq!(calibrate(0.05, 0.95, 0.2, 0.4).unwrap(), 0.0);
        assert!(calibrate(0.01, 0.95, 0.2, 0.4).is_err());
        assert!(calibrate(0.9, 1.0, 0.2, 0.4).is_err());
        assert!(calibrate(0.01, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn deterministic_outcomes() {
        let mut good = ChannelState::new(rng(0));
        let p = GilbertElliotParams::new(1.0, 0.0, 0.0, 1.0).unwrap();
        assert!((0..1000).all(|_| good.sample(&p)));

        let sticky_bad = GilbertElliotParams::new(1.0, 0.0, 1.0, 0.0 + f64::MIN_POSITIVE).unwrap();
        let mut bad = ChannelState::with_state(LinkState::Bad, rng(1));
        assert!((0..1000).all(|_| !bad.sample(&sticky_bad)));
    }

    #[test]
    fn same_seed_same_sequence() {
        let p = GilbertElliotParams::with_error_rate(0.2, 0.3).unwrap();
        let mut a = ChannelState::new(rng(5));
        let mut b = ChannelState::new(rng(5));
        let xa: Vec<bool> = (0..5000).map(|_| a.sample(&p)).collect();
        let xb: Vec<bool> = (0..5000).map(|_| b.sample(&p)).collect();
        assert_eq!(xa, xb);
    }

    proptest! {
        #[test]
        fn calibrate_inverts_error_rate(
            g in 0.9f64..=1.0,
            b in 0.0f64..0.5,
            v in 0.05f64..=1.0,
            frac in 0.0f64..0.95,
        ) {
            let lo = 1.0 - g;
            let hi = 1.0 - b;
            let target = lo + frac * (hi - lo) * 0.1;
            let u = calibrate(target, g, b, v).unwrap();
            let p = GilbertElliotParams::new(g, b, u, v).unwrap();
            let got = error_rate(&p).unwrap();
            prop_assert!((got - target).abs() <= 1e-12 * target.max(1e-300) + 1e-15);
            if u > 0.0 {
                let u_back = calibrate(got, g, b, v).unwrap();
                prop_assert!((u_back - u).abs() <= 1e-12 * u);
            }
        }
    }
}

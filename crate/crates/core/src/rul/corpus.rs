//! Synthetic vehicle traces with a pre-fault transient, plus fold splitting.
//!
//! Each vehicle drives a circular loop. Vertical acceleration carries gravity,
//! a floor profile that depends on position, and AR(1) noise; the planar
//! accelerations follow the centripetal load. A quadratic ramp on the vertical
//! channel over the last `transient_len` samples ends at the fault.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Sample, Series};
use crate::error::{Error, Result};
use crate::rng::{stream, StreamKind};

const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusParams {
    /// Sampling interval in ms.
    pub dt_ms: f64,
    /// Samples covered by the pre-fault transient.
    pub transient_len: usize,
    /// Transient peak added at the fault sample (m/s²).
    pub amplitude: f64,
    /// AR(1) innovation standard deviation.
    pub noise: f64,
    /// Floor-profile amplitude on the vertical channel.
    pub seasonal_amplitude: f64,
    /// Samples recorded after the fault.
    pub post_fault: usize,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            dt_ms: 50.0,
            transient_len: 12,
            amplitude: 3.0,
            noise: 0.3,
            seasonal_amplitude: 2.0,
            post_fault: 0,
        }
    }
}

impl CorpusParams {
    pub fn validate(&self, length: usize) -> Result<()> {
        if !(self.dt_ms > 0.0) {
            return Err(Error::InvalidConfig("corpus dt must be positive".into()));
        }
        if self.noise < 0.0 || self.amplitude < 0.0 || self.seasonal_amplitude < 0.0 {
            return Err(Error::InvalidConfig(
                "corpus amplitudes must be non-negative".into(),
            ));
        }
        if length <= self.transient_len + self.post_fault {
            return Err(Error::InvalidConfig(format!(
                "series length {length} must exceed transient ({}) plus post-fault padding ({})",
                self.transient_len, self.post_fault
            )));
        }
        Ok(())
    }
}

const AR_COEF: f64 = 0.8;

pub fn gen_synthetic_corpus(
    n_series: usize,
    length: usize,
    params: &CorpusParams,
    seed: u64,
) -> Result<Vec<Series>> {
    params.validate(length)?;
    let noise = Normal::new(0.0, params.noise).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let fault_index = length - 1 - params.post_fault;
    (0..n_series)
        .map(|k| {
            let id =
                u32::try_from(k).map_err(|_| Error::InvalidConfig("too many series".into()))?;
            let mut rng = stream(seed, StreamKind::Corpus, id);
            let radius = 5.0 + rng.gen::<f64>() * 2.0;
            let speed = 1.0 + rng.gen::<f64>() * 0.5;
            let mut theta = rng.gen::<f64>() * 2.0 * PI;
            let dt = params.dt_ms / 1e3;
            let mut ar = [0.0; 3];
            let mut samples = Vec::with_capacity(length);
            for i in 0..length {
                for a in &mut ar {
                    *a = AR_COEF * *a + noise.sample(&mut rng);
                }
                let floor = params.seasonal_amplitude * (3.0 * theta).sin();
                let depth = fault_index as i64 - i as i64;
                let transient = if depth >= 0 && (depth as usize) < params.transient_len {
                    let r = (params.transient_len - depth as usize) as f64
                        / params.transient_len as f64;
                    params.amplitude * r * r
                } else if depth < 0 {
                    params.amplitude
                } else {
                    0.0
                };
                let centripetal = speed * speed / radius;
                samples.push(Sample {
                    t_ms: i as f64 * params.dt_ms,
                    accel: [
                        ar[0],
                        centripetal + ar[1],
                        GRAVITY + floor + transient + ar[2],
                    ],
                    position: [radius * theta.cos(), radius * theta.sin()],
                    yaw: (theta + PI / 2.0).rem_euclid(2.0 * PI),
                });
                theta = (theta + speed / radius * dt).rem_euclid(2.0 * PI);
            }
            Series::new(id, samples, fault_index)
        })
        .collect()
}

/// Series indices for the four folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<usize>,
    /// Reserved for external model selection; unused by the built-in scorer.
    pub model_val: Vec<usize>,
    pub threshold_val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldRatios {
    pub train: f64,
    pub model_val: f64,
    pub threshold_val: f64,
    pub test: f64,
}

impl Default for FoldRatios {
    fn default() -> Self {
        FoldRatios {
            train: 0.50,
            model_val: 0.15,
            threshold_val: 0.15,
            test: 0.20,
        }
    }
}

impl Partition {
    /// Shuffled split; every fold gets at least one series except the model
    /// validation fold, which may be empty.
    pub fn split(n: usize, ratios: &FoldRatios, seed: u64) -> Result<Self> {
        let r = [
            ratios.train,
            ratios.model_val,
            ratios.threshold_val,
            ratios.test,
        ];
        if r.iter().any(|&x| x < 0.0) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(
                "fold ratios must be non-negative and sum to 1".into(),
            ));
        }
        if n < 3 {
            return Err(Error::InvalidInput(format!(
                "{n} series cannot fill train, threshold and test folds"
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut stream(seed, StreamKind::FoldSplit, 0));
        let mut counts = r.map(|x| (x * n as f64).round() as usize);
        for k in [0, 2, 3] {
            counts[k] = counts[k].max(1);
        }
        while counts.iter().sum::<usize>() > n {
            let k = (0..4).max_by_key(|&k| counts[k]).unwrap_or(0);
            counts[k] -= 1;
        }
        counts[0] += n - counts.iter().sum::<usize>();
        let mut it = idx.into_iter();
        let mut take = |c: usize| -> Vec<usize> {
            let mut v: Vec<usize> = it.by_ref().take(c).collect();
            v.sort_unstable();
            v
        };
        Ok(Partition {
            train: take(counts[0]),
            model_val: take(counts[1]),
            threshold_val: take(counts[2]),
            test: take(counts[3]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let p = CorpusParams::default();
        let a = gen_synthetic_corpus(4, 100, &p, 3).unwrap();
        let b = gen_synthetic_corpus(4, 100, &p, 3).unwrap();
        let c = gen_synthetic_corpus(4, 100, &p, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|s| s.fault_index == 99 && s.dt_s() == 0.05));
    }

    #[test]
    fn post_fault_padding() {
        let p = CorpusParams {
            post_fault: 10,
            ..CorpusParams::default()
        };
        let c = gen_synthetic_corpus(1, 100, &p, 0).unwrap();
        assert_eq!(c[0].fault_index, 89);
        assert!(gen_synthetic_corpus(1, 22, &p, 0).is_err());
    }

    #[test]
    fn transient_peaks_at_fault() {
        let p = CorpusParams {
            noise: 0.0,
            seasonal_amplitude: 0.0,
            ..CorpusParams::default()
        };
        let s = &gen_synthetic_corpus(1, 60, &p, 1).unwrap()[0];
        let az = s.channel(2);
        assert!((az[59] - GRAVITY - p.amplitude).abs() < 1e-12);
        assert!((az[40] - GRAVITY).abs() < 1e-12);
        assert!(az[50..].windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn split_covers_all() {
        let part = Partition::split(40, &FoldRatios::default(), 9).unwrap();
        assert_eq!(
            (
                part.train.len(),
                part.model_val.len(),
                part.threshold_val.len(),
                part.test.len()
            ),
            (20, 6, 6, 8)
        );
        let mut all: Vec<usize> =
            [part.train, part.model_val, part.threshold_val, part.test].concat();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());

        let small = Partition::split(3, &FoldRatios::default(), 0).unwrap();
        assert_eq!(
            small.train.len()
                + small.threshold_val.len()
                + small.test.len()
                + small.model_val.len(),
            3
        );
        assert!(
            !small.test.is_empty() && !small.threshold_val.is_empty() && !small.train.is_empty()
        );
    }
}

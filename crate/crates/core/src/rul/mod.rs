//! Remaining-useful-life evaluation cast as binary classification.
//!
//! A series is a regularly sampled trace that ends (or is annotated) with a
//! single fault sample. Labeling marks the fault and a margin of samples
//! before it as `Fault`; detectors are scored with an asymmetric cost and
//! with the advance of their first correct detection.

pub mod corpus;
pub mod features;
pub mod io;
pub mod metrics;
pub mod pipeline;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use metrics::{
    advance, cost, first_detections, mean_advance, optimize_threshold, CostBreakdown, CostParams,
    ThresholdChoice,
};

/// Raw channels recorded per sample.
pub const RAW_CHANNELS: [&str; 6] = ["ax", "ay", "az", "x", "y", "yaw"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t_ms: f64,
    /// Accelerations along the vehicle axes.
    pub accel: [f64; 3],
    /// Planar position.
    pub position: [f64; 2],
    /// Heading in radians.
    pub yaw: f64,
}

impl Sample {
    pub fn raw(&self) -> [f64; 6] {
        [
            self.accel[0],
            self.accel[1],
            self.accel[2],
            self.position[0],
            self.position[1],
            self.yaw,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub id: u32,
    pub samples: Vec<Sample>,
    /// 0-based index of the sample recorded as the fault.
    pub fault_index: usize,
}

impl Series {
    pub fn new(id: u32, samples: Vec<Sample>, fault_index: usize) -> Result<Self> {
        let s = Series {
            id,
            samples,
            fault_index,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sampling interval Δt in seconds.
    pub fn dt_s(&self) -> f64 {
        if self.samples.len() < 2 {
            return 0.0;
        }
        (self.samples[1].t_ms - self.samples[0].t_ms) / 1e3
    }

    pub fn validate(&self) -> Result<()> {
        if self.fault_index >= self.samples.len() {
            return Err(Error::InvalidInput(format!(
                "series {}: fault index {} outside {} samples",
                self.id,
                self.fault_index,
                self.samples.len()
            )));
        }
        if self.samples.len() >= 2 {
            let dt = self.samples[1].t_ms - self.samples[0].t_ms;
            if !(dt > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "series {}: timestamps must increase",
                    self.id
                )));
            }
            for w in self.samples.windows(2) {
                let d = w[1].t_ms - w[0].t_ms;
                if (d - dt).abs() > 1e-6 * dt.max(1.0) {
                    return Err(Error::InvalidInput(format!(
                        "series {}: irregular sampling ({d} ms vs {dt} ms)",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Values of raw channel `channel` (index into [`RAW_CHANNELS`]).
    pub fn channel(&self, channel: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.raw()[channel]).collect()
    }
}

/// How many samples a margin of `m` marks as `Fault`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSpan {
    /// The fault sample and the `m` samples before it (m + 1 in total).
    #[default]
    PriorPlusFault,
    /// `m` samples in total, the fault sample included.
    Inclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    pub series: Series,
    pub margin: usize,
    pub labels: Vec<bool>,
}

impl LabeledSeries {
    pub fn fault_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    /// First labeled sample.
    pub fn label_start(&self) -> usize {
        self.labels
            .iter()
            .position(|&l| l)
            .unwrap_or(self.series.fault_index)
    }
}

pub fn label_with_margin(series: &Series, margin: usize, span: LabelSpan) -> Result<LabeledSeries> {
    let prior = match span {
        LabelSpan::PriorPlusFault => margin,
        LabelSpan::Inclusive => {
            if margin == 0 {
                return Err(Error::InvalidInput(
                    "an inclusive margin must be at least 1".into(),
                ));
            }
            margin - 1
        }
    };
    if prior > series.fault_index {
        return Err(Error::InvalidInput(format!(
            "series {}: margin {margin} needs {} samples before the fault, only {} exist",
            series.id, prior, series.fault_index
        )));
    }
    let start = series.fault_index - prior;
    let labels = (0..series.len())
        .map(|i| (start..=series.fault_index).contains(&i))
        .collect();
    Ok(LabeledSeries {
        series: series.clone(),
        margin,
        labels,
    })
}

pub fn label_all(corpus: &[Series], margin: usize, span: LabelSpan) -> Result<Vec<LabeledSeries>> {
    corpus
        .iter()
        .map(|s| label_with_margin(s, margin, span))
        .collect()
}

/// Per-class weights `total / (2 · count_c)`, returned as (non-fault, fault).
pub fn class_weights(labeled: &[LabeledSeries]) -> Result<(f64, f64)> {
    let total: usize = labeled.iter().map(|l| l.labels.len()).sum();
    let fault: usize = labeled.iter().map(LabeledSeries::fault_count).sum();
    let normal = total - fault;
    if fault == 0 || normal == 0 {
        return Err(Error::InvalidInput(
            "class weights need both classes present".into(),
        ));
    }
    let t = total as f64;
    Ok((t / (2.0 * normal as f64), t / (2.0 * fault as f64)))
}

#[cfg(test)]
pub(crate) fn ramp_series(id: u32, len: usize, dt_ms: f64) -> Series {
    let samples = (0..len)
        .map(|i| Sample {
            t_ms: i as f64 * dt_ms,
            accel: [i as f64, 0.0, 0.0],
            position: [0.0, 0.0],
            yaw: 0.0,
        })
        .collect();
    Series::new(id, samples, len - 1).unwrap()
}

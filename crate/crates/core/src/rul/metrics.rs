//! Misprediction cost, detection advance and cost-minimizing thresholds.
//!
//! A false positive costs a flat `c_fp`. A false negative at 1-based
//! position `q` costs `m − L + q`, where `L` is the 1-based fault position,
//! so misses closer to the fault are more expensive. The false-negative part
//! is integral and kept as an integer sum so that totals are reproducible
//! bit for bit regardless of summation order.

use serde::{Deserialize, Serialize};

use super::LabeledSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub c_fp: f64,
    pub margin: usize,
}

impl CostParams {
    pub fn new(margin: usize) -> Self {
        CostParams { c_fp: 0.2, margin }
    }

    /// Cost of missing the sample at 0-based index `i` of a series whose
    /// fault sits at 0-based `fault_index`.
    pub fn fn_cost(&self, i: usize, fault_index: usize) -> i64 {
        self.margin as i64 - (fault_index as i64 + 1) + (i as i64 + 1)
    }

    fn total(&self, fp_count: usize, fn_cost: i64) -> f64 {
        fp_count as f64 * self.c_fp + fn_cost as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub total: f64,
    pub fp_count: usize,
    pub fn_count: usize,
    /// Σ C_FN over false negatives.
    pub fn_cost: i64,
}

impl CostBreakdown {
    fn new(params: &CostParams, fp_count: usize, fn_count: usize, fn_cost: i64) -> Self {
        CostBreakdown {
            total: params.total(fp_count, fn_cost),
            fp_count,
            fn_count,
            fn_cost,
        }
    }
}

/// Total cost of `predictions` (true = Fault) against a labeled set.
pub fn cost(
    predictions: &[Vec<bool>],
    labeled: &[LabeledSeries],
    params: &CostParams,
) -> Result<CostBreakdown> {
    if params.c_fp <= 0.0 {
        return Err(Error::InvalidInput("c_fp must be positive".into()));
    }
    if predictions.len() != labeled.len() {
        return Err(Error::InvalidInput(format!(
            "{} prediction vectors for {} series",
            predictions.len(),
            labeled.len()
        )));
    }
    let (mut fp, mut fn_n, mut fn_c) = (0usize, 0usize, 0i64);
    for (pred, l) in predictions.iter().zip(labeled) {
        if pred.len() != l.labels.len() {
            return Err(Error::InvalidInput(format!(
                "series {}: {} predictions for {} samples",
                l.series.id,
                pred.len(),
                l.labels.len()
            )));
        }
        for (i, (&p, &y)) in pred.iter().zip(&l.labels).enumerate() {
            match (p, y) {
                (true, false) => fp += 1,
                (false, true) => {
                    fn_n += 1;
                    fn_c += params.fn_cost(i, l.series.fault_index);
                }
                _ => {}
            }
        }
    }
    Ok(CostBreakdown::new(params, fp, fn_n, fn_c))
}

/// First correctly detected Fault sample of each series.
pub fn first_detections(
    predictions: &[Vec<bool>],
    labeled: &[LabeledSeries],
) -> Vec<Option<usize>> {
    predictions
        .iter()
        .zip(labeled)
        .map(|(p, l)| p.iter().zip(&l.labels).position(|(&p, &y)| p && y))
        .collect()
}

/// Time between detection at `index` and the fault, in seconds.
pub fn advance(index: usize, series: &super::Series) -> Result<f64> {
    if index > series.fault_index {
        return Err(Error::InvalidInput(format!(
            "series {}: detection at {index} is after the fault at {}",
            series.id, series.fault_index
        )));
    }
    Ok((series.fault_index - index) as f64 * series.dt_s())
}

/// Mean advance over the series that have a correct detection.
pub fn mean_advance(advances: &[f64]) -> Result<f64> {
    if advances.is_empty() {
        return Err(Error::Empty(
            "no series has a correct detection; mean advance is undefined".into(),
        ));
    }
    Ok(advances.iter().sum::<f64>() / advances.len() as f64)
}

/// Advances of the first correct detections, skipping undetected series.
pub fn detection_advances(
    predictions: &[Vec<bool>],
    labeled: &[LabeledSeries],
) -> Result<Vec<f64>> {
    first_detections(predictions, labeled)
        .into_iter()
        .zip(labeled)
        .filter_map(|(d, l)| d.map(|i| advance(i, &l.series)))
        .collect()
}

/// Binarizes scores: `score ≥ threshold` ⇒ Fault.
pub fn binarize(scores: &[Vec<f64>], threshold: f64) -> Vec<Vec<bool>> {
    scores
        .iter()
        .map(|s| s.iter().map(|&x| x >= threshold).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    /// `+∞` means "never predict Fault".
    pub threshold: f64,
    pub cost: CostBreakdown,
}

/// Cost-minimizing threshold over the candidates {distinct scores} ∪ {+∞}.
///
/// Ties go to the larger threshold. Runs in O(n log n) by sweeping the
/// threshold downward and updating the confusion counts incrementally.
pub fn optimize_threshold(
    scores: &[Vec<f64>],
    labeled: &[LabeledSeries],
    params: &CostParams,
) -> Result<ThresholdChoice> {
    if labeled.is_empty() {
        return Err(Error::Empty(
            "threshold calibration needs at least one series".into(),
        ));
    }
    if scores.len() != labeled.len() {
        return Err(Error::InvalidInput(format!(
            "{} score vectors for {} series",
            scores.len(),
            labeled.len()
        )));
    }
    let mut points: Vec<(f64, bool, i64)> = Vec::new();
    let (mut fp, mut fn_n, mut fn_c) = (0usize, 0usize, 0i64);
    for (s, l) in scores.iter().zip(labeled) {
        if s.len() != l.labels.len() {
            return Err(Error::InvalidInput(format!(
                "series {}: score length mismatch",
                l.series.id
            )));
        }
        for (i, (&x, &y)) in s.iter().zip(&l.labels).enumerate() {
            if x.is_nan() {
                return Err(Error::InvalidInput(format!(
                    "series {}: NaN score at {i}",
                    l.series.id
                )));
            }
            let c = params.fn_cost(i, l.series.fault_index);
            if y {
                fn_n += 1;
                fn_c += c;
            }
            points.push((x, y, c));
        }
    }
    points.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut best = ThresholdChoice {
        threshold: f64::INFINITY,
        cost: CostBreakdown::new(params, fp, fn_n, fn_c),
    };
    let mut i = 0;
    while i < points.len() {
        let thr = points[i].0;
        while i < points.len() && points[i].0 == thr {
            let (_, y, c) = points[i];
            if y {
                fn_n -= 1;
                fn_c -= c;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let here = CostBreakdown::new(params, fp, fn_n, fn_c);
        if here.total < best.cost.total {
            best = ThresholdChoice {
                threshold: thr,
                cost: here,
            };
        }
    }
    Ok(best)
}

/// Baseline detector over a raw channel: Fault where `|value| ≥ threshold`.
pub fn baseline_detect(
    series: &super::Series,
    channel: usize,
    threshold: f64,
) -> Result<Vec<bool>> {
    if channel >= super::RAW_CHANNELS.len() {
        return Err(Error::InvalidInput(format!(
            "raw channel {channel} does not exist"
        )));
    }
    Ok(series
        .channel(channel)
        .into_iter()
        .map(|v| v.abs() >= threshold)
        .collect())
}

/// Scores used to calibrate [`baseline_detect`]: |raw channel|.
pub fn baseline_scores(series: &super::Series, channel: usize) -> Vec<f64> {
    series.channel(channel).into_iter().map(f64::abs).collect()
}

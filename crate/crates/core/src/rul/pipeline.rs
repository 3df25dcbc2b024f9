//! Fold-aware evaluation: fit on train, calibrate on threshold validation,
//! score on test.
//!
//! The built-in scorer is a linear projection onto the difference between the
//! standardized Fault and Non-Fault centroids of the training fold. It stands
//! in for an external model; externally produced scores go through
//! [`evaluate_scores`] with the same calibration and metrics.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::corpus::{FoldRatios, Partition};
use super::features::{
    accel_channels, preprocess, ContextBinning, ContextTable, Features, Standardizer,
};
use super::metrics::{
    baseline_scores, binarize, cost, detection_advances, first_detections, optimize_threshold,
    CostBreakdown, CostParams,
};
use super::{label_all, LabelSpan, LabeledSeries, Series};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub margin: usize,
    pub span: LabelSpan,
    pub c_fp: f64,
    pub windows: Vec<usize>,
    pub binning: ContextBinning,
    pub ratios: FoldRatios,
    /// Raw channel the baseline thresholds (index into `RAW_CHANNELS`).
    pub baseline_channel: usize,
}

impl PipelineConfig {
    pub fn new(margin: usize) -> Self {
        PipelineConfig {
            margin,
            span: LabelSpan::PriorPlusFault,
            c_fp: 0.2,
            windows: vec![4, 8],
            binning: ContextBinning::default(),
            ratios: FoldRatios::default(),
            baseline_channel: 2,
        }
    }

    fn cost_params(&self) -> CostParams {
        CostParams {
            c_fp: self.c_fp,
            margin: self.margin,
        }
    }
}

/// Records which series each fitting stage read.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audit {
    pub fitted_on: BTreeSet<usize>,
    pub calibrated_on: BTreeSet<usize>,
}

impl Audit {
    fn fit(&mut self, idx: &[usize]) {
        self.fitted_on.extend(idx);
    }

    fn calibrate(&mut self, idx: &[usize]) {
        self.calibrated_on.extend(idx);
    }

    /// Test series that leaked into fitting or calibration.
    pub fn leaks(&self, test: &[usize]) -> Vec<usize> {
        test.iter()
            .copied()
            .filter(|i| self.fitted_on.contains(i) || self.calibrated_on.contains(i))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub threshold: f64,
    /// Cost at the calibrated threshold on the threshold-validation fold.
    pub calibration_cost: f64,
    pub cost: CostBreakdown,
    /// None when no test series has a correct detection.
    pub mean_advance_s: Option<f64>,
    pub detected: usize,
    pub missed: usize,
    pub series_ids: Vec<u32>,
    pub first_detections: Vec<Option<usize>>,
}

impl EvalReport {
    /// Cost of predicting Non-Fault everywhere on the same test fold.
    pub fn predict_nothing_cost(labeled: &[LabeledSeries], params: &CostParams) -> Result<f64> {
        let none: Vec<Vec<bool>> = labeled
            .iter()
            .map(|l| vec![false; l.labels.len()])
            .collect();
        Ok(cost(&none, labeled, params)?.total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub margin: usize,
    pub partition: Partition,
    pub dropped_features: Vec<String>,
    pub pipeline: EvalReport,
    pub baseline: EvalReport,
    pub predict_nothing_cost: f64,
    pub audit: Audit,
    pub leaked: Vec<usize>,
}

fn pick<'a, T>(xs: &'a [T], idx: &[usize]) -> Vec<&'a T> {
    idx.iter().map(|&i| &xs[i]).collect()
}

fn pick_owned<T: Clone>(xs: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| xs[i].clone()).collect()
}

/// Calibrates on `calib` and evaluates on `test` for per-series scores
/// indexed like `labeled`.
pub fn evaluate_scores(
    scores: &[Vec<f64>],
    labeled: &[LabeledSeries],
    calib: &[usize],
    test: &[usize],
    params: &CostParams,
) -> Result<EvalReport> {
    if scores.len() != labeled.len() {
        return Err(Error::InvalidInput(format!(
            "{} score series for {} labeled series",
            scores.len(),
            labeled.len()
        )));
    }
    if test.is_empty() {
        return Err(Error::Empty("test fold is empty".into()));
    }
    let choice = optimize_threshold(
        &pick_owned(scores, calib),
        &pick_owned(labeled, calib),
        params,
    )?;
    let test_l = pick_owned(labeled, test);
    let preds = binarize(&pick_owned(scores, test), choice.threshold);
    let c = cost(&preds, &test_l, params)?;
    let firsts = first_detections(&preds, &test_l);
    let adv = detection_advances(&preds, &test_l)?;
    let detected = adv.len();
    Ok(EvalReport {
        threshold: choice.threshold,
        calibration_cost: choice.cost.total,
        cost: c,
        mean_advance_s: super::metrics::mean_advance(&adv).ok(),
        detected,
        missed: test.len() - detected,
        series_ids: test_l.iter().map(|l| l.series.id).collect(),
        first_detections: firsts,
    })
}

struct Fitted {
    context: ContextTable,
    standardizer: Standardizer,
    weights: Vec<f64>,
}

impl Fitted {
    fn features(&self, s: &Series, windows: &[usize]) -> Result<Features> {
        let diffed = self.context.apply(s);
        Ok(self
            .standardizer
            .transform(&preprocess(&accel_channels(&diffed), windows)?))
    }

    fn score(&self, s: &Series, windows: &[usize]) -> Result<Vec<f64>> {
        let f = self.features(s, windows)?;
        Ok((0..f.len())
            .map(|i| f.row(i).iter().zip(&self.weights).map(|(x, w)| x * w).sum())
            .collect())
    }
}

fn fit(train: &[&LabeledSeries], cfg: &PipelineConfig) -> Result<Fitted> {
    let series: Vec<&Series> = train.iter().map(|l| &l.series).collect();
    let context = ContextTable::fit(&series, cfg.binning)?;
    let raw: Vec<Features> = series
        .iter()
        .map(|s| preprocess(&accel_channels(&context.apply(s)), &cfg.windows))
        .collect::<Result<_>>()?;
    let standardizer = Standardizer::fit(&raw.iter().collect::<Vec<_>>())?;
    let width = standardizer.kept.len();
    let (mut mu_f, mut mu_n) = (vec![0.0; width], vec![0.0; width]);
    let (mut n_f, mut n_n) = (0usize, 0usize);
    for (f, l) in raw.iter().zip(train) {
        let z = standardizer.transform(f);
        for (i, &y) in l.labels.iter().enumerate() {
            let (mu, n) = if y {
                (&mut mu_f, &mut n_f)
            } else {
                (&mut mu_n, &mut n_n)
            };
            for (m, x) in mu.iter_mut().zip(z.row(i)) {
                *m += x;
            }
            *n += 1;
        }
    }
    if n_f == 0 || n_n == 0 {
        return Err(Error::InvalidInput(
            "training fold needs both classes".into(),
        ));
    }
    let weights = mu_f
        .iter()
        .zip(&mu_n)
        .map(|(f, n)| f / n_f as f64 - n / n_n as f64)
        .collect();
    Ok(Fitted {
        context,
        standardizer,
        weights,
    })
}

/// Runs the feature pipeline and the raw-threshold baseline on one corpus.
pub fn run_pipeline(
    corpus: &[Series],
    cfg: &PipelineConfig,
    split_seed: u64,
) -> Result<PipelineReport> {
    let labeled = label_all(corpus, cfg.margin, cfg.span)?;
    let part = Partition::split(corpus.len(), &cfg.ratios, split_seed)?;
    let params = cfg.cost_params();
    let mut audit = Audit::default();

    audit.fit(&part.train);
    let fitted = fit(&pick(&labeled, &part.train), cfg)?;
    let scores: Vec<Vec<f64>> = corpus
        .iter()
        .map(|s| fitted.score(s, &cfg.windows))
        .collect::<Result<_>>()?;

    audit.calibrate(&part.threshold_val);
    let pipeline = evaluate_scores(&scores, &labeled, &part.threshold_val, &part.test, &params)?;

    let raw: Vec<Vec<f64>> = corpus
        .iter()
        .map(|s| baseline_scores(s, cfg.baseline_channel))
        .collect();
    let baseline = evaluate_scores(&raw, &labeled, &part.threshold_val, &part.test, &params)?;

    let nothing = EvalReport::predict_nothing_cost(&pick_owned(&labeled, &part.test), &params)?;
    let leaked = audit.leaks(&part.test);
    Ok(PipelineReport {
        margin: cfg.margin,
        dropped_features: fitted.standardizer.dropped.clone(),
        partition: part,
        pipeline,
        baseline,
        predict_nothing_cost: nothing,
        audit,
        leaked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rul::corpus::{gen_synthetic_corpus, CorpusParams};

    #[test]
    fn pipeline_beats_baseline() {
        let corpus = gen_synthetic_corpus(40, 200, &CorpusParams::default(), 1).unwrap();
        let r = run_pipeline(&corpus, &PipelineConfig::new(5), 2).unwrap();
        assert!(r.leaked.is_empty());
        assert!(
            r.pipeline.cost.total < r.baseline.cost.total,
            "{:?} vs {:?}",
            r.pipeline.cost,
            r.baseline.cost
        );
        assert!(r.pipeline.mean_advance_s.is_some());
    }

    #[test]
    fn strong_transient_is_separable() {
        let p = CorpusParams {
            amplitude: 60.0,
            transient_len: 12,
            ..CorpusParams::default()
        };
        let corpus = gen_synthetic_corpus(30, 150, &p, 5).unwrap();
        let r = run_pipeline(&corpus, &PipelineConfig::new(3), 1).unwrap();
        assert_eq!(r.pipeline.calibration_cost, 0.0);
    }

    #[test]
    fn no_transient_is_no_better_than_silence() {
        let p = CorpusParams {
            amplitude: 0.0,
            ..CorpusParams::default()
        };
        let corpus = gen_synthetic_corpus(40, 200, &p, 3).unwrap();
        let r = run_pipeline(&corpus, &PipelineConfig::new(5), 4).unwrap();
        assert!(r.baseline.cost.total >= 0.8 * r.predict_nothing_cost);
    }

    #[test]
    fn audit_flags_leaks() {
        let mut a = Audit::default();
        a.fit(&[0, 1]);
        a.calibrate(&[2]);
        assert_eq!(a.leaks(&[1, 2, 3]), vec![1, 2]);
    }

    #[test]
    fn external_scores_length_checked() {
        let corpus = gen_synthetic_corpus(3, 50, &CorpusParams::default(), 0).unwrap();
        let labeled = label_all(&corpus, 2, LabelSpan::PriorPlusFault).unwrap();
        let params = CostParams::new(2);
        assert!(evaluate_scores(&[vec![0.0; 50]], &labeled, &[0], &[1], &params).is_err());
        let oracle: Vec<Vec<f64>> = labeled
            .iter()
            .map(|l| l.labels.iter().map(|&y| f64::from(u8::from(y))).collect())
            .collect();
        let r = evaluate_scores(&oracle, &labeled, &[0], &[1, 2], &params).unwrap();
        assert_eq!(r.cost.total, 0.0);
        assert_eq!(r.detected, 2);
        assert!((r.mean_advance_s.unwrap() - 0.1).abs() < 1e-12);
    }
}

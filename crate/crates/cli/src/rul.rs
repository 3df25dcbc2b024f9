//! `corpus` and `evaluate` subcommands.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use nrsim_core::rul::corpus::{gen_synthetic_corpus, CorpusParams, Partition};
use nrsim_core::rul::io::{read_corpus, read_scores, write_corpus, MetricsJson};
use nrsim_core::rul::pipeline::{evaluate_scores, run_pipeline, EvalReport, PipelineConfig};
use nrsim_core::rul::{label_all, CostParams, LabelSpan, Series};

use crate::campaign::write_atomic;

pub fn corpus(
    out: &Path,
    n_series: usize,
    length: usize,
    params: &CorpusParams,
    seed: u64,
) -> Result<()> {
    let c = gen_synthetic_corpus(n_series, length, params, seed)?;
    write_atomic(out, |w| write_corpus(w, &c))?;
    println!(
        "wrote {} series of {length} samples to {}",
        c.len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct MarginResult<'a> {
    margin: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pipeline: Option<MetricsJson<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<MetricsJson<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scores: Option<MetricsJson<'a>>,
    predict_nothing_cost: Option<f64>,
    dropped_features: Vec<String>,
    leaked_test_series: Vec<usize>,
}

pub struct EvaluateArgs {
    pub corpus: PathBuf,
    pub scores: Option<PathBuf>,
    pub margins: Vec<usize>,
    pub inclusive: bool,
    pub split_seed: u64,
    pub out: PathBuf,
}

fn load_corpus(path: &Path) -> Result<Vec<Series>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_corpus(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn line(label: &str, m: usize, r: &EvalReport) {
    let adv = r
        .mean_advance_s
        .map(|a| format!("{a:.3} s"))
        .unwrap_or_else(|| "n/a".into());
    println!(
        "m={m:<3} {label:<9} cost {:>9.2}  FP {:>5}  FN {:>5}  mean advance {adv}  missed {}/{}",
        r.cost.total,
        r.cost.fp_count,
        r.cost.fn_count,
        r.missed,
        r.series_ids.len()
    );
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let span = if a.inclusive {
        LabelSpan::Inclusive
    } else {
        LabelSpan::PriorPlusFault
    };
    let external = match &a.scores {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Some(
                read_scores(BufReader::new(f), &corpus)
                    .with_context(|| format!("reading {}", p.display()))?,
            )
        }
        None => None,
    };

    let mut owned = Vec::new();
    for &m in &a.margins {
        let mut cfg = PipelineConfig::new(m);
        cfg.span = span;
        match &external {
            Some(scores) => {
                let labeled = label_all(&corpus, m, span)?;
                let part = Partition::split(corpus.len(), &cfg.ratios, a.split_seed)?;
                let params = CostParams {
                    c_fp: cfg.c_fp,
                    margin: m,
                };
                let r =
                    evaluate_scores(scores, &labeled, &part.threshold_val, &part.test, &params)?;
                line("scores", m, &r);
                owned.push((m, None, Some(r)));
            }
            None => {
                let r = run_pipeline(&corpus, &cfg, a.split_seed)?;
                line("pipeline", m, &r.pipeline);
                line("baseline", m, &r.baseline);
                owned.push((m, Some(r), None));
            }
        }
    }
    let results: Vec<MarginResult> = owned
        .iter()
        .map(|(m, pipe, ext)| MarginResult {
            margin: *m,
            pipeline: pipe.as_ref().map(|r| MetricsJson::new(*m, &r.pipeline)),
            baseline: pipe.as_ref().map(|r| MetricsJson::new(*m, &r.baseline)),
            scores: ext.as_ref().map(|r| MetricsJson::new(*m, r)),
            predict_nothing_cost: pipe.as_ref().map(|r| r.predict_nothing_cost),
            dropped_features: pipe
                .as_ref()
                .map(|r| r.dropped_features.clone())
                .unwrap_or_default(),
            leaked_test_series: pipe.as_ref().map(|r| r.leaked.clone()).unwrap_or_default(),
        })
        .collect();
    write_atomic(&a.out, |w| nrsim_core::export::json(w, &results))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

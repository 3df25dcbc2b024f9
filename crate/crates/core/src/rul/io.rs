//! Corpus and score CSV formats; metrics JSON.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::pipeline::EvalReport;
use super::{Sample, Series};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct CorpusRow {
    series_id: u32,
    t_ms: f64,
    ax: f64,
    ay: f64,
    az: f64,
    x: f64,
    y: f64,
    yaw: f64,
    is_fault: u8,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreRow {
    series_id: u32,
    t_ms: f64,
    score: f64,
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

pub fn write_corpus<W: Write>(w: W, corpus: &[Series]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for s in corpus {
        for (i, x) in s.samples.iter().enumerate() {
            out.serialize(CorpusRow {
                series_id: s.id,
                t_ms: x.t_ms,
                ax: x.accel[0],
                ay: x.accel[1],
                az: x.accel[2],
                x: x.position[0],
                y: x.position[1],
                yaw: x.yaw,
                is_fault: u8::from(i == s.fault_index),
            })
            .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a corpus; rows are grouped by `series_id` and must flag exactly one
/// fault sample per series.
pub fn read_corpus<R: Read>(r: R) -> Result<Vec<Series>> {
    let mut groups: BTreeMap<u32, (Vec<Sample>, Vec<usize>)> = BTreeMap::new();
    for row in csv::Reader::from_reader(r).deserialize::<CorpusRow>() {
        let row = row.map_err(csv_err)?;
        let g = groups.entry(row.series_id).or_default();
        if row.is_fault > 1 {
            return Err(Error::InvalidInput(format!(
                "series {}: is_fault must be 0 or 1",
                row.series_id
            )));
        }
        if row.is_fault == 1 {
            g.1.push(g.0.len());
        }
        g.0.push(Sample {
            t_ms: row.t_ms,
            accel: [row.ax, row.ay, row.az],
            position: [row.x, row.y],
            yaw: row.yaw,
        });
    }
    groups
        .into_iter()
        .map(|(id, (samples, faults))| match faults.as_slice() {
            [f] => Series::new(id, samples, *f),
            _ => Err(Error::InvalidInput(format!(
                "series {id}: expected one fault sample, found {}",
                faults.len()
            ))),
        })
        .collect()
}

/// Reads scores aligned to `corpus` by series id and timestamp.
pub fn read_scores<R: Read>(r: R, corpus: &[Series]) -> Result<Vec<Vec<f64>>> {
    let mut by_id: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
    for row in csv::Reader::from_reader(r).deserialize::<ScoreRow>() {
        let row = row.map_err(csv_err)?;
        by_id
            .entry(row.series_id)
            .or_default()
            .push((row.t_ms, row.score));
    }
    corpus
        .iter()
        .map(|s| {
            let rows = by_id
                .remove(&s.id)
                .ok_or_else(|| Error::InvalidInput(format!("no scores for series {}", s.id)))?;
            if rows.len() != s.len() {
                return Err(Error::InvalidInput(format!(
                    "series {}: {} scores for {} samples",
                    s.id,
                    rows.len(),
                    s.len()
                )));
            }
            rows.iter()
                .zip(&s.samples)
                .map(|(&(t, v), x)| {
                    if (t - x.t_ms).abs() > 1e-6 {
                        Err(Error::InvalidInput(format!(
                            "series {}: score at {t} ms, sample at {} ms",
                            s.id, x.t_ms
                        )))
                    } else {
                        Ok(v)
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct MetricsJson<'a> {
    pub margin: usize,
    pub cost: f64,
    pub fp_count: usize,
    pub fn_count: usize,
    pub mean_advance_s: Option<f64>,
    pub missed_series: usize,
    /// `null` stands for +∞ (never predict Fault).
    pub threshold: Option<f64>,
    pub series_ids: &'a [u32],
    pub first_detections: &'a [Option<usize>],
}

impl<'a> MetricsJson<'a> {
    pub fn new(margin: usize, r: &'a EvalReport) -> Self {
        MetricsJson {
            margin,
            cost: r.cost.total,
            fp_count: r.cost.fp_count,
            fn_count: r.cost.fn_count,
            mean_advance_s: r.mean_advance_s,
            missed_series: r.missed,
            threshold: r.threshold.is_finite().then_some(r.threshold),
            series_ids: &r.series_ids,
            first_detections: &r.first_detections,
        }
    }
}

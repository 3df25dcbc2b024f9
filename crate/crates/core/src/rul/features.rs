//! Preprocessing: context differencing, windowed statistics, standardization.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Series;
use crate::error::{Error, Result};

/// Column-major feature matrix for one series.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Features {
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stat {
    Mean,
    Max,
    Min,
    Std,
}

/// Trailing-window statistic; windows clipped at the series start.
fn trailing(xs: &[f64], w: usize, stat: Stat) -> Vec<f64> {
    (0..xs.len())
        .map(|t| {
            let win = &xs[(t + 1).saturating_sub(w)..=t];
            let n = win.len() as f64;
            match stat {
                Stat::Mean => win.iter().sum::<f64>() / n,
                Stat::Max => win.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                Stat::Min => win.iter().copied().fold(f64::INFINITY, f64::min),
                Stat::Std => {
                    let m = win.iter().sum::<f64>() / n;
                    (win.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt()
                }
            }
        })
        .collect()
}

/// First differences, 0 at the first sample.
pub fn diff(xs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    for (i, &x) in xs.iter().enumerate() {
        out.push(if i == 0 { 0.0 } else { x - xs[i - 1] });
    }
    out
}

/// Appends, per channel and window, trailing mean/max/min/std (population),
/// then a first difference of each raw channel.
pub fn preprocess(channels: &[(String, Vec<f64>)], windows: &[usize]) -> Result<Features> {
    let len = channels.first().map_or(0, |c| c.1.len());
    if channels.iter().any(|c| c.1.len() != len) {
        return Err(Error::InvalidInput(
            "channels have different lengths".into(),
        ));
    }
    for &w in windows {
        if w < 2 || w > len {
            return Err(Error::InvalidInput(format!(
                "window {w} outside [2, {len}]"
            )));
        }
    }
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for (name, xs) in channels {
        names.push(name.clone());
        columns.push(xs.clone());
    }
    for (name, xs) in channels {
        for &w in windows {
            for (tag, stat) in [
                ("mean", Stat::Mean),
                ("max", Stat::Max),
                ("min", Stat::Min),
                ("std", Stat::Std),
            ] {
                names.push(format!("{name}_{tag}{w}"));
                columns.push(trailing(xs, w, stat));
            }
        }
        names.push(format!("{name}_diff"));
        columns.push(diff(xs));
    }
    Ok(Features { names, columns })
}

/// Acceleration channels of a series, named as in the corpus.
pub fn accel_channels(series: &Series) -> Vec<(String, Vec<f64>)> {
    (0..3)
        .map(|k| (super::RAW_CHANNELS[k].to_string(), series.channel(k)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBinning {
    /// Bins per position axis.
    pub position_bins: usize,
    pub yaw_bins: usize,
}

impl Default for ContextBinning {
    fn default() -> Self {
        ContextBinning {
            position_bins: 8,
            yaw_bins: 8,
        }
    }
}

type ContextKey = (usize, usize, usize);

/// Mean acceleration per (x bin, y bin, yaw bin), fitted on training series.
#[derive(Debug, Clone)]
pub struct ContextTable {
    binning: ContextBinning,
    lo: [f64; 2],
    hi: [f64; 2],
    means: HashMap<ContextKey, [f64; 3]>,
    global: [f64; 3],
}

fn bin(v: f64, lo: f64, hi: f64, n: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    (((v - lo) / (hi - lo) * n as f64).floor().max(0.0) as usize).min(n - 1)
}

impl ContextTable {
    pub fn fit(train: &[&Series], binning: ContextBinning) -> Result<Self> {
        if binning.position_bins == 0 || binning.yaw_bins == 0 {
            return Err(Error::InvalidConfig(
                "context bin counts must be positive".into(),
            ));
        }
        let samples: Vec<_> = train.iter().flat_map(|s| s.samples.iter()).collect();
        if samples.is_empty() {
            return Err(Error::Empty("context table needs training samples".into()));
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for s in &samples {
            for k in 0..2 {
                lo[k] = lo[k].min(s.position[k]);
                hi[k] = hi[k].max(s.position[k]);
            }
        }
        let mut table = ContextTable {
            binning,
            lo,
            hi,
            means: HashMap::new(),
            global: [0.0; 3],
        };
        let mut sums: HashMap<ContextKey, ([f64; 3], usize)> = HashMap::new();
        let mut total = [0.0; 3];
        for s in &samples {
            let e = sums.entry(table.key(s)).or_insert(([0.0; 3], 0));
            for k in 0..3 {
                e.0[k] += s.accel[k];
                total[k] += s.accel[k];
            }
            e.1 += 1;
        }
        let n = samples.len() as f64;
        table.global = total.map(|t| t / n);
        table.means = sums
            .into_iter()
            .map(|(k, (s, c))| (k, s.map(|x| x / c as f64)))
            .collect();
        Ok(table)
    }

    fn key(&self, s: &super::Sample) -> ContextKey {
        let p = self.binning.position_bins;
        let yaw = s.yaw.rem_euclid(2.0 * PI);
        (
            bin(s.position[0], self.lo[0], self.hi[0], p),
            bin(s.position[1], self.lo[1], self.hi[1], p),
            bin(yaw, 0.0, 2.0 * PI, self.binning.yaw_bins),
        )
    }

    pub fn contexts(&self) -> usize {
        self.means.len()
    }

    /// Subtracts the context mean from each acceleration sample; unseen
    /// contexts use the global training mean.
    pub fn apply(&self, series: &Series) -> Series {
        let mut out = series.clone();
        for s in &mut out.samples {
            let m = self.means.get(&self.key(s)).unwrap_or(&self.global);
            for k in 0..3 {
                s.accel[k] -= m[k];
            }
        }
        out
    }
}

/// Training-set z-scoring. Constant features are dropped and listed in `dropped`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub kept: Vec<usize>,
    pub dropped: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &[&Features]) -> Result<Self> {
        let first = train
            .first()
            .ok_or_else(|| Error::Empty("standardizer needs training features".into()))?;
        let width = first.width();
        if train.iter().any(|f| f.width() != width) {
            return Err(Error::InvalidInput(
                "feature widths differ across series".into(),
            ));
        }
        let n: usize = train.iter().map(|f| f.len()).sum();
        if n == 0 {
            return Err(Error::Empty(
                "standardizer needs at least one sample".into(),
            ));
        }
        let mut st = Standardizer {
            kept: Vec::new(),
            dropped: Vec::new(),
            mean: Vec::new(),
            std: Vec::new(),
        };
        for j in 0..width {
            let vals = || train.iter().flat_map(move |f| f.columns[j].iter().copied());
            let m = vals().sum::<f64>() / n as f64;
            let sd = (vals().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt();
            if sd > 1e-12 * m.abs().max(1.0) {
                st.kept.push(j);
                st.mean.push(m);
                st.std.push(sd);
            } else {
                st.dropped.push(first.names[j].clone());
            }
        }
        Ok(st)
    }

    pub fn transform(&self, f: &Features) -> Features {
        let mut names = Vec::with_capacity(self.kept.len());
        let mut columns = Vec::with_capacity(self.kept.len());
        for (k, &j) in self.kept.iter().enumerate() {
            names.push(f.names[j].clone());
            columns.push(
                f.columns[j]
                    .iter()
                    .map(|x| (x - self.mean[k]) / self.std[k])
                    .collect(),
            );
        }
        Features { names, columns }
    }
}

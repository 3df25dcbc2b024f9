//! Campaign file parsing and flag overrides.
//!
//! The file is TOML restricted to namespaced keys (dotted keys or
//! `[section]` tables both work):
//!
//! ```toml
//! radio.bandwidth_mhz = [5, 20]      # list = sweep axis
//! radio.scs_khz = 30
//! radio.mod_order = 256
//! traffic.n_ues = [1, 5, 10]
//! traffic.replications = 20
//! traffic.seed = 1
//! channel.target_pe = 0.01
//! sched.policy = "fifo"
//! arch.ids = [1, 2, 3, 4]
//! server.t_a_ms = 200
//! output.dir = "out"
//! ```
//!
//! Every simulation parameter has a key; unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use nrsim_core::channel::GilbertElliotParams;
use nrsim_core::e2e::{reference_advances, AdvanceLine, ArchitecturePreset, ServerModel};
use nrsim_core::export::{Figure, FIGURE_N};
use nrsim_core::mac::Policy;
use nrsim_core::phy::{ModOrder, Numerology, RadioConfig};
use nrsim_core::sim::{replication_seeds, SimConfig, TrafficConfig};

/// Marks errors that should exit with the configuration status.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadioSection {
    bandwidth_mhz: Option<OneOrMany<f64>>,
    scs_khz: Option<OneOrMany<u32>>,
    mod_order: Option<OneOrMany<u32>>,
    header_bytes: Option<u32>,
    ul_payload_bytes: Option<u32>,
    dl_payload_bytes: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrafficSection {
    n_ues: Option<OneOrMany<u32>>,
    ul_period_ms: Option<f64>,
    p_dl: Option<f64>,
    sim_time_s: Option<f64>,
    replications: Option<u32>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    g: Option<f64>,
    b: Option<f64>,
    u: Option<f64>,
    v: Option<f64>,
    target_pe: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchedSection {
    policy: Option<String>,
    pusch_minislots: Option<u32>,
    pdsch_minislots: Option<u32>,
    gnb_processing_symbols: Option<u32>,
    ue_processing_symbols: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServerSection {
    anchors: Option<Vec<(u32, f64)>>,
    t_a_ms: Option<f64>,
    /// (margin, mean advance in s) lines for the feasibility table.
    advances: Option<Vec<(usize, f64)>>,
    required_slack_ms: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArchSection {
    ids: Option<OneOrMany<u8>>,
    t_cn_ms: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
    figure: Option<String>,
    transactions: Option<bool>,
    grant_log: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    radio: RadioSection,
    #[serde(default)]
    traffic: TrafficSection,
    #[serde(default)]
    channel: ChannelSection,
    #[serde(default)]
    sched: SchedSection,
    #[serde(default)]
    server: ServerSection,
    #[serde(default)]
    arch: ArchSection,
    #[serde(default)]
    output: OutputSection,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line where a dotted key is set, if it can be found.
fn locate(text: &str, key: &str) -> Option<usize> {
    let (section, field) = key.split_once('.')?;
    let starts = |l: &str, k: &str| {
        l.strip_prefix(k)
            .is_some_and(|r| r.trim_start().starts_with('='))
    };
    let mut current = "";
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if let Some(s) = l.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = s.trim();
            continue;
        }
        if starts(l, key) || (current == section && starts(l, field)) {
            return Some(i + 1);
        }
    }
    None
}

impl FileConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| line_of(text, s.start));
            config_err(format!("{}:{line}: {}", path.display(), e.message()))
        })
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok((Self::parse(&text, path)?, text))
    }
}

/// Values given on the command line; each overrides the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub archs: Option<Vec<u8>>,
    pub n_ues: Option<Vec<u32>>,
    pub bandwidth_mhz: Option<Vec<f64>>,
    pub scs_khz: Option<Vec<u32>>,
    pub mod_order: Option<Vec<u32>>,
    pub t_cn_ms: Option<f64>,
    pub seed: Option<u64>,
    pub replications: Option<u32>,
    pub out_dir: Option<PathBuf>,
    pub figure: Option<String>,
    pub policy: Option<String>,
    pub sim_time_s: Option<f64>,
    pub slack_ms: Option<f64>,
    pub transactions: bool,
    pub grant_log: bool,
}

/// One simulation point of a campaign.
#[derive(Debug, Clone)]
pub struct Point {
    pub arch: Option<ArchitecturePreset>,
    pub config: SimConfig,
}

#[derive(Debug, Clone)]
pub struct CampaignPlan {
    pub points: Vec<Point>,
    pub n_values: Vec<u32>,
    pub archs: Vec<u8>,
    pub seeds: Vec<u64>,
    pub server: ServerModel,
    pub advances: Vec<AdvanceLine>,
    pub slack_ms: f64,
    pub out_dir: PathBuf,
    pub figure: Option<Figure>,
    pub transactions: bool,
    pub grant_log: bool,
}

/// Resolves file + overrides into a validated campaign. Semantic errors carry
/// the file line of the offending key when it can be located.
pub fn resolve(
    file: FileConfig,
    text: Option<(&str, &Path)>,
    o: Overrides,
) -> Result<CampaignPlan> {
    resolve_inner(file, o).map_err(|e| match (e.downcast_ref::<ConfigError>(), text) {
        (Some(ConfigError(msg)), Some((text, path))) => {
            let key = msg.split_whitespace().find_map(|w| {
                let w =
                    w.trim_matches(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '.'));
                let (s, f) = w.split_once('.')?;
                let known = [
                    "radio", "traffic", "channel", "sched", "server", "arch", "output",
                ];
                (known.contains(&s) && !f.is_empty()).then_some(w)
            });
            match key.and_then(|k| locate(text, k)) {
                Some(line) => config_err(format!("{}:{line}: {msg}", path.display())),
                None => config_err(format!("{}: {msg}", path.display())),
            }
        }
        _ => e,
    })
}

fn core_err(e: nrsim_core::Error) -> anyhow::Error {
    match e {
        nrsim_core::Error::InvalidConfig(m) => config_err(m),
        other => other.into(),
    }
}

fn resolve_inner(mut f: FileConfig, o: Overrides) -> Result<CampaignPlan> {
    let figure = match o.figure.or(f.output.figure) {
        Some(s) => Some(s.parse::<Figure>().map_err(core_err)?),
        None => None,
    };
    let archs = o.archs.or(f.arch.ids.map(OneOrMany::into_vec));
    let bw = o
        .bandwidth_mhz
        .or(f.radio.bandwidth_mhz.take().map(OneOrMany::into_vec));
    let scs = o
        .scs_khz
        .or(f.radio.scs_khz.take().map(OneOrMany::into_vec));
    let mods = o
        .mod_order
        .or(f.radio.mod_order.take().map(OneOrMany::into_vec));
    let radio_axes_set = bw.is_some() || scs.is_some() || mods.is_some();
    let t_cn_ms = o.t_cn_ms.or(f.arch.t_cn_ms).unwrap_or(0.0);
    if !(t_cn_ms >= 0.0) {
        bail!(config_err(format!(
            "arch.t_cn_ms = {t_cn_ms} must be non-negative"
        )));
    }

    let (archs, radio_points): (Vec<u8>, Vec<(f64, u32, u32)>) = match (figure, &archs) {
        (Some(Figure::Fig5), _) | (None, Some(_)) => {
            if radio_axes_set {
                bail!(config_err(
                    "radio axes cannot be combined with architecture presets (arch.ids / --arch)"
                ));
            }
            (archs.unwrap_or_else(|| vec![1, 2, 3, 4]), Vec::new())
        }
        (Some(fig), None) => {
            if radio_axes_set {
                bail!(config_err(
                    format!("{fig:?} fixes its own radio axes; drop radio.* / radio flags")
                        .to_lowercase()
                ));
            }
            let pts = fig
                .radio_points()
                .iter()
                .map(|p| {
                    (
                        p.bandwidth_hz / 1e6,
                        p.numerology.scs_khz(),
                        p.mod_order.order(),
                    )
                })
                .collect();
            (Vec::new(), pts)
        }
        (Some(_), Some(_)) => bail!(config_err("architecture presets only apply to fig5")),
        (None, None) => {
            let bw = bw.unwrap_or_else(|| vec![5.0]);
            let scs = scs.unwrap_or_else(|| vec![30]);
            let mods = mods.unwrap_or_else(|| vec![256]);
            let mut pts = Vec::new();
            for &b in &bw {
                for &s in &scs {
                    for &m in &mods {
                        pts.push((b, s, m));
                    }
                }
            }
            (Vec::new(), pts)
        }
    };

    let n_values = o
        .n_ues
        .or(f.traffic.n_ues.take().map(OneOrMany::into_vec))
        .unwrap_or_else(|| {
            if figure.is_some() {
                FIGURE_N.to_vec()
            } else {
                vec![1]
            }
        });
    if n_values.is_empty() {
        bail!(config_err("traffic.n_ues must list at least one value"));
    }

    let t = &f.traffic;
    let defaults = TrafficConfig::default();
    let replications = o
        .replications
        .or(t.replications)
        .unwrap_or(defaults.n_replications);
    if replications < 2 {
        bail!(config_err(format!(
            "traffic.replications = {replications} must be at least 2"
        )));
    }
    let traffic_template = TrafficConfig {
        n_ues: 1,
        ul_period_ms: t.ul_period_ms.unwrap_or(defaults.ul_period_ms),
        p_dl: t.p_dl.unwrap_or(defaults.p_dl),
        sim_time_s: o.sim_time_s.or(t.sim_time_s).unwrap_or(defaults.sim_time_s),
        n_replications: replications,
    };

    let c = &f.channel;
    let (g, b, v) = (c.g.unwrap_or(1.0), c.b.unwrap_or(0.0), c.v.unwrap_or(0.5));
    let channel = match (c.u, c.target_pe) {
        (Some(_), Some(_)) => bail!(config_err(
            "set either channel.u or channel.target_pe, not both"
        )),
        (Some(u), None) => GilbertElliotParams::new(g, b, u, v).map_err(core_err)?,
        (None, pe) => {
            let u = nrsim_core::channel::calibrate(pe.unwrap_or(0.01), g, b, v)
                .map_err(|e| config_err(format!("channel.target_pe: {e}")))?;
            GilbertElliotParams::new(g, b, u, v).map_err(core_err)?
        }
    };

    let s = &f.sched;
    let policy: Policy = match o.policy.as_deref().or(s.policy.as_deref()) {
        Some(p) => p
            .parse()
            .map_err(|e: nrsim_core::Error| config_err(format!("sched.policy: {e}")))?,
        None => Policy::Fifo,
    };

    let r = &f.radio;
    let template = |radio: RadioConfig, n: u32| {
        let mut cfg = SimConfig::new(
            radio,
            TrafficConfig {
                n_ues: n,
                ..traffic_template
            },
            channel,
        );
        cfg.t_cn_ms = t_cn_ms;
        cfg.policy = policy;
        cfg.pusch_minislots = s.pusch_minislots.unwrap_or(cfg.pusch_minislots);
        cfg.pdsch_minislots = s.pdsch_minislots.unwrap_or(cfg.pdsch_minislots);
        cfg.gnb_processing_symbols = s
            .gnb_processing_symbols
            .unwrap_or(cfg.gnb_processing_symbols);
        cfg.ue_processing_symbols = s.ue_processing_symbols.unwrap_or(cfg.ue_processing_symbols);
        cfg.radio.header_bytes = r.header_bytes.unwrap_or(cfg.radio.header_bytes);
        cfg.radio.ul_payload_bytes = r.ul_payload_bytes.unwrap_or(cfg.radio.ul_payload_bytes);
        cfg.radio.dl_payload_bytes = r.dl_payload_bytes.unwrap_or(cfg.radio.dl_payload_bytes);
        cfg
    };

    let mut points = Vec::new();
    for &n in &n_values {
        for &(bw, scs, m) in &radio_points {
            let num = Numerology::from_scs_khz(scs)
                .map_err(|e| config_err(format!("radio.scs_khz: {e}")))?;
            let mo =
                ModOrder::from_order(m).map_err(|e| config_err(format!("radio.mod_order: {e}")))?;
            if !(bw > 0.0) {
                bail!(config_err(format!(
                    "radio.bandwidth_mhz = {bw} must be positive"
                )));
            }
            let config = template(RadioConfig::new(bw * 1e6, num, mo), n);
            points.push(Point { arch: None, config });
        }
        for &a in &archs {
            let preset =
                ArchitecturePreset::get(a).map_err(|e| config_err(format!("arch.ids: {e}")))?;
            let base = template(
                RadioConfig::new(preset.bandwidth_hz, preset.numerology, preset.mod_order),
                n,
            );
            points.push(Point {
                arch: Some(preset),
                config: preset.apply(base),
            });
        }
    }
    for p in &points {
        p.config.validate().map_err(core_err)?;
    }

    let sv = &f.server;
    let defaults = ServerModel::default();
    let server = ServerModel::new(
        sv.anchors.clone().unwrap_or(defaults.anchors),
        sv.t_a_ms.unwrap_or(defaults.t_a_ms),
    )
    .map_err(|e| config_err(format!("server.anchors: {e}")))?;
    if !archs.is_empty() {
        for &n in &n_values {
            server
                .t_p_s(n)
                .map_err(|e| config_err(format!("server.anchors: {e}")))?;
        }
    }
    let advances = match &sv.advances {
        Some(a) => a
            .iter()
            .map(|&(margin, advance_s)| AdvanceLine { margin, advance_s })
            .collect(),
        None => reference_advances().to_vec(),
    };
    let slack_ms = o.slack_ms.or(sv.required_slack_ms).unwrap_or(0.0);

    let seed = o.seed.or(t.seed).unwrap_or(1);
    Ok(CampaignPlan {
        points,
        n_values,
        archs,
        seeds: replication_seeds(seed, replications),
        server,
        advances,
        slack_ms,
        out_dir: o
            .out_dir
            .or(f.output.dir)
            .unwrap_or_else(|| PathBuf::from("out")),
        figure,
        transactions: o.transactions || f.output.transactions.unwrap_or(false),
        grant_log: o.grant_log || f.output.grant_log.unwrap_or(false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<CampaignPlan> {
        let p = Path::new("c.toml");
        resolve(
            FileConfig::parse(text, p)?,
            Some((text, p)),
            Overrides::default(),
        )
    }

    #[test]
    fn dotted_and_table_forms_agree() {
        let a =
            parse("radio.bandwidth_mhz = [5, 20]\nradio.scs_khz = [30]\ntraffic.n_ues = [1, 5]\n")
                .unwrap();
        let b =
            parse("[radio]\nbandwidth_mhz = [5, 20]\nscs_khz = 30\n[traffic]\nn_ues = [1, 5]\n")
                .unwrap();
        assert_eq!(a.points.len(), 4);
        let hashes =
            |s: &CampaignPlan| s.points.iter().map(|p| p.config.hash()).collect::<Vec<_>>();
        assert_eq!(hashes(&a), hashes(&b));
        // n_ues is the outer axis.
        assert_eq!(a.points[1].config.traffic.n_ues, 1);
        assert_eq!(a.points[1].config.radio.bandwidth_hz, 20e6);
    }

    #[test]
    fn syntax_error_has_line() {
        let err = parse("radio.scs_khz = 30\n\ntraffic.n_ues = [1,\n").unwrap_err();
        assert!(err.downcast_ref::<ConfigError>().is_some());
        assert!(err.to_string().starts_with("c.toml:3:"), "{err}");
    }

    #[test]
    fn unknown_key_has_line() {
        let err = parse("traffic.n_ues = 1\nradio.bandwith_mhz = 5\n")
            .unwrap_err()
            .to_string();
        assert!(err.starts_with("c.toml:2:"), "{err}");
    }

    #[test]
    fn semantic_error_has_line() {
        let err = parse("traffic.n_ues = 1\n\n[traffic]\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("c.toml"), "{err}");
        let err = parse("radio.scs_khz = 30\ntraffic.p_dl = 1.5\n")
            .unwrap_err()
            .to_string();
        assert!(err.starts_with("c.toml:2:"), "{err}");
        let err = parse("[channel]\ng = 2.0\n").unwrap_err().to_string();
        assert!(err.starts_with("c.toml:2:"), "{err}");
    }

    #[test]
    fn figure_axes() {
        let s = parse("output.figure = \"fig2\"\n").unwrap();
        assert_eq!(s.points.len(), 3 * FIGURE_N.len());
        assert!(s
            .points
            .iter()
            .all(|p| p.config.t_cn_ms == 0.0 && p.config.radio.mod_order == ModOrder::Qam256));
        let s = parse("output.figure = \"fig5\"\ntraffic.n_ues = [1, 10]\n").unwrap();
        assert_eq!(s.archs, vec![1, 2, 3, 4]);
        assert_eq!(s.points.len(), 8);
        assert!(parse("output.figure = \"fig2\"\nradio.scs_khz = 60\n").is_err());
        assert!(parse("arch.ids = [1]\nradio.bandwidth_mhz = 5\n").is_err());
    }

    #[test]
    fn channel_choices() {
        let s = parse("channel.target_pe = 0.05\n").unwrap();
        let p = s.points[0].config.channel;
        assert!((nrsim_core::channel::error_rate(&p).unwrap() - 0.05).abs() < 1e-12);
        assert!(parse("channel.u = 0.1\nchannel.target_pe = 0.05\n").is_err());
        assert!(parse("traffic.replications = 1\n").is_err());
        assert!(parse("arch.ids = [5]\n").is_err());
        assert!(parse("arch.ids = [1]\ntraffic.n_ues = 60\n").is_err());
    }
}

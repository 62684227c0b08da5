//! Experiment descriptions: scheme and experiment files, built-in figure
//! presets and the equal-rate check.
//!
//! Scheme file (TOML):
//!
//! ```toml
//! [scheme]
//! kind = "ti-psm"          # sm | psm | ti-sm | ti-psm
//! n_tx = 8
//! n_rx = 4
//! groups = 4               # default 1
//! mod_order = 8            # or omit and give `rate` in bpcu, e.g. rate = "4"
//! family = "psk"           # psk | qam
//! frame_slots = 4          # default 1
//! active_slots = 2         # default 1
//! taps = 1                 # default 1
//! normalization = "per-slot-unit"        # or per-antenna-unit
//! channel_time_model = "per-slot-iid"    # or per-frame-quasi-static
//! ```
//!
//! Experiment file: top-level `seed`, `snr = "start:step:stop"`, optional
//! `ber_floor`, `allow_unequal_rates`, an optional `[stopping]` table
//! (`min_bit_errors`, `max_frames`, `min_frames`) and one `[[curve]]` table per
//! curve holding the scheme keys plus `label` and `csi = "perfect" | "cee"`.

use std::path::Path;

use num_rational::Ratio;
use serde::Deserialize;
use thiserror::Error;

use crate::constellation::ConstellationFamily;
use crate::engine::{BerRecord, CsiMode, EngineError, SimOptions, Simulator, StoppingRule};
use crate::scheme::{
    solve_mod_order, validate, ChannelTimeModel, ConfigError, Normalization, SchemeConfig,
    SchemeKind, ValidatedConfig,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("curve `{label}`: field `{field}`: {source}")]
    Invalid {
        label: String,
        field: &'static str,
        source: ConfigError,
    },
    #[error("curve `{label}`: {message}")]
    Scheme { label: String, message: String },
    #[error("duplicate curve label `{0}`")]
    DuplicateLabel(String),
    #[error("curves do not share one spectral efficiency: {0}")]
    UnequalRates(String),
    #[error("bad SNR grid `{0}`, expected start:step:stop")]
    SnrGrid(String),
    #[error("unknown preset `{0}` (expected fig2, fig3, fig4 or fig5)")]
    UnknownPreset(String),
    #[error("experiment file has neither [[curve]] tables nor a [scheme] table")]
    NoCurves,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

fn default_one() -> usize {
    1
}

/// Scheme keys as they appear in files.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeEntry {
    pub kind: SchemeKind,
    pub n_tx: usize,
    pub n_rx: usize,
    #[serde(default = "default_one")]
    pub groups: usize,
    pub group_size: Option<usize>,
    pub mod_order: Option<usize>,
    /// Target rate in bpcu (`"4"` or `"16/5"`), used when `mod_order` is absent.
    pub rate: Option<String>,
    #[serde(default)]
    pub family: ConstellationFamily,
    #[serde(default = "default_one")]
    pub frame_slots: usize,
    #[serde(default = "default_one")]
    pub active_slots: usize,
    #[serde(default = "default_one")]
    pub taps: usize,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub channel_time_model: ChannelTimeModel,
}

fn parse_ratio(s: &str) -> Option<Ratio<u64>> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let d: u64 = d.trim().parse().ok()?;
            let n: u64 = n.trim().parse().ok()?;
            (d != 0).then(|| Ratio::new(n, d))
        }
        None => s.parse().ok().map(Ratio::from_integer),
    }
}

impl SchemeEntry {
    pub fn to_config(&self, label: &str) -> Result<ValidatedConfig, ExperimentError> {
        let group_size = match self.group_size {
            Some(g) => g,
            None if self.groups > 0 && self.n_tx % self.groups == 0 => self.n_tx / self.groups,
            None => {
                return Err(ExperimentError::Scheme {
                    label: label.into(),
                    message: format!("n_tx {} is not divisible by groups {}", self.n_tx, self.groups),
                })
            }
        };
        let mut config = SchemeConfig {
            scheme: self.kind,
            n_tx: self.n_tx,
            n_rx: self.n_rx,
            groups: self.groups,
            group_size,
            mod_order: self.mod_order.unwrap_or(0),
            constellation_family: self.family,
            frame_slots: self.frame_slots,
            active_slots: self.active_slots,
            taps: self.taps,
            normalization: self.normalization,
            channel_time_model: self.channel_time_model,
        };
        if self.mod_order.is_none() {
            let rate = self.rate.as_deref().ok_or_else(|| ExperimentError::Scheme {
                label: label.into(),
                message: "either mod_order or rate is required".into(),
            })?;
            let target = parse_ratio(rate).ok_or_else(|| ExperimentError::Scheme {
                label: label.into(),
                message: format!("bad rate `{rate}`"),
            })?;
            config.mod_order = solve_mod_order(&config, target).ok_or_else(|| ExperimentError::Scheme {
                label: label.into(),
                message: format!("no constellation order reaches {target} bpcu"),
            })?;
        }
        validate(config).map_err(|source| ExperimentError::Invalid {
            label: label.into(),
            field: source.field(),
            source,
        })
    }
}

#[derive(Debug, Deserialize)]
struct SchemeFile {
    scheme: SchemeEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum CsiEntry {
    Perfect,
    Cee,
}

#[derive(Debug, Deserialize)]
struct CurveEntry {
    label: Option<String>,
    #[serde(default = "default_csi")]
    csi: CsiEntry,
    #[serde(flatten)]
    scheme: SchemeEntry,
}

fn default_csi() -> CsiEntry {
    CsiEntry::Perfect
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct StoppingEntry {
    min_bit_errors: Option<u64>,
    max_frames: Option<u64>,
    min_frames: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct ExperimentFile {
    seed: Option<u64>,
    snr: Option<String>,
    ber_floor: Option<f64>,
    #[serde(default)]
    allow_unequal_rates: bool,
    #[serde(default)]
    stopping: StoppingEntry,
    #[serde(default)]
    curve: Vec<CurveEntry>,
    scheme: Option<SchemeEntry>,
}

/// One curve of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub config: ValidatedConfig,
    pub csi: CsiMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub curves: Vec<Curve>,
    pub snr_db: Vec<f64>,
    pub stopping: StoppingRule,
    pub master_seed: u64,
    /// Stop a curve after its first point below this BER.
    pub ber_floor: Option<f64>,
    pub allow_unequal_rates: bool,
    /// Audit lines explaining derived parameters.
    pub notes: Vec<String>,
}

pub const DEFAULT_SEED: u64 = 2021;

impl ExperimentSpec {
    /// Checks label uniqueness and the equal-rate constraint. Returns
    /// warnings when unequal rates are explicitly allowed.
    pub fn check(&self) -> Result<Vec<String>, ExperimentError> {
        let mut seen = std::collections::HashSet::new();
        for c in &self.curves {
            if !seen.insert(c.label.as_str()) {
                return Err(ExperimentError::DuplicateLabel(c.label.clone()));
            }
        }
        let mut warnings = Vec::new();
        if let Some(first) = self.curves.first() {
            let rate = first.config.spectral_efficiency();
            let odd: Vec<String> = self
                .curves
                .iter()
                .filter(|c| c.config.spectral_efficiency() != rate)
                .map(|c| format!("{} ({} bpcu)", c.label, c.config.spectral_efficiency()))
                .collect();
            if !odd.is_empty() {
                let msg = format!("reference {} at {} bpcu; differing: {}", first.label, rate, odd.join(", "));
                if self.allow_unequal_rates {
                    warnings.push(msg);
                } else {
                    return Err(ExperimentError::UnequalRates(msg));
                }
            }
        }
        Ok(warnings)
    }

    /// Keeps only curves in the given CSI mode.
    pub fn retain_csi(&mut self, csi: CsiMode) {
        self.curves.retain(|c| c.csi == csi);
    }
}

/// Runs every curve over the SNR grid, curve by curve. Each curve stops after
/// its first point below `ber_floor` when one is set. `progress` sees each
/// record as it completes.
pub fn run_experiment(
    spec: &ExperimentSpec,
    options: SimOptions,
    mut progress: impl FnMut(&BerRecord),
) -> Result<Vec<BerRecord>, ExperimentError> {
    let mut snrs = spec.snr_db.clone();
    snrs.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for curve in &spec.curves {
        let sim = Simulator::new(&curve.config, options)?.with_label(curve.label.clone());
        for &snr in &snrs {
            let rec = sim.run_point(snr, curve.csi, &spec.stopping, spec.master_seed)?;
            progress(&rec);
            let done = spec.ber_floor.is_some_and(|f| rec.ber < f);
            out.push(rec);
            if done {
                break;
            }
        }
    }
    Ok(out)
}

/// Parses `start:step:stop` into an inclusive grid.
pub fn parse_snr_grid(s: &str) -> Result<Vec<f64>, ExperimentError> {
    let bad = || ExperimentError::SnrGrid(s.to_string());
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, step, stop] = parts[..] else {
        return Err(bad());
    };
    if !(start.is_finite() && step.is_finite() && stop.is_finite()) || step <= 0.0 {
        return Err(bad());
    }
    if stop < start {
        return Ok(Vec::new());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    // integer multiples keep grid values reproducible
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

fn read(path: &Path) -> Result<String, ExperimentError> {
    std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_scheme_file(text: &str) -> Result<ValidatedConfig, ExperimentError> {
    let f: SchemeFile = toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))?;
    f.scheme.to_config("scheme")
}

pub fn load_scheme_file(path: &Path) -> Result<ValidatedConfig, ExperimentError> {
    parse_scheme_file(&read(path)?)
}

/// Parses an experiment file. A plain scheme file becomes a one-curve
/// experiment using `default_csi`.
pub fn parse_experiment(name: &str, text: &str, default_csi: CsiMode) -> Result<ExperimentSpec, ExperimentError> {
    let f: ExperimentFile = toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))?;
    let mut curves = Vec::new();
    for (i, c) in f.curve.iter().enumerate() {
        let fallback = format!("curve{i}");
        let config = c.scheme.to_config(c.label.as_deref().unwrap_or(&fallback))?;
        let csi = match c.csi {
            CsiEntry::Perfect => CsiMode::Perfect,
            CsiEntry::Cee => CsiMode::Cee,
        };
        let label = c.label.clone().unwrap_or_else(|| default_label(&config, csi));
        curves.push(Curve { label, config, csi });
    }
    if curves.is_empty() {
        let scheme = f.scheme.as_ref().ok_or(ExperimentError::NoCurves)?;
        let config = scheme.to_config("scheme")?;
        curves.push(Curve {
            label: default_label(&config, default_csi),
            config,
            csi: default_csi,
        });
    }
    let defaults = StoppingRule::default();
    let stopping = StoppingRule {
        min_bit_errors: f.stopping.min_bit_errors.unwrap_or(defaults.min_bit_errors),
        max_frames: f.stopping.max_frames.unwrap_or(defaults.max_frames),
        min_frames: f.stopping.min_frames.unwrap_or(defaults.min_frames),
    };
    let snr_db = match &f.snr {
        Some(s) => parse_snr_grid(s)?,
        None => parse_snr_grid("0:2:30")?,
    };
    Ok(ExperimentSpec {
        name: name.to_string(),
        curves,
        snr_db,
        stopping,
        master_seed: f.seed.unwrap_or(DEFAULT_SEED),
        ber_floor: f.ber_floor,
        allow_unequal_rates: f.allow_unequal_rates,
        notes: Vec::new(),
    })
}

pub fn load_experiment(path: &Path, default_csi: CsiMode) -> Result<ExperimentSpec, ExperimentError> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into());
    parse_experiment(&name, &read(path)?, default_csi)
}

/// `TI-PSM 8x4 G4` plus ` CEE` for imperfect CSI.
pub fn default_label(config: &SchemeConfig, csi: CsiMode) -> String {
    let mut s = format!("{} {}x{}", config.scheme, config.n_tx, config.n_rx);
    if config.scheme.is_grouped() {
        s.push_str(&format!(" G{}", config.groups));
    }
    if csi == CsiMode::Cee {
        s.push_str(" CEE");
    }
    s
}

/// Shapes of the schemes compared in the figure presets, before `M` is
/// solved from the rate.
fn preset_shape(kind: SchemeKind, n_tx: usize, groups: usize) -> SchemeConfig {
    let (t, ta) = if kind.is_time_indexed() { (4, 2) } else { (1, 1) };
    let mut c = SchemeConfig {
        scheme: kind,
        n_tx,
        n_rx: 4,
        groups,
        group_size: n_tx / groups,
        mod_order: 0,
        constellation_family: ConstellationFamily::Psk,
        frame_slots: t,
        active_slots: ta,
        taps: 1,
        normalization: Normalization::PerSlotUnit,
        channel_time_model: ChannelTimeModel::PerSlotIid,
    };
    if !kind.is_grouped() {
        c.groups = 1;
        c.group_size = n_tx;
    }
    c
}

/// Scheme list `(kind, N_t, G)` and rate of each figure preset.
pub fn preset_schemes(name: &str) -> Option<(u64, Vec<(SchemeKind, usize, usize)>, &'static [CsiMode])> {
    use SchemeKind::*;
    const BOTH: &[CsiMode] = &[CsiMode::Perfect, CsiMode::Cee];
    const PERFECT: &[CsiMode] = &[CsiMode::Perfect];
    Some(match name {
        "fig2" => (8, vec![(Sm, 8, 1), (Psm, 8, 4), (Psm, 10, 5)], BOTH),
        "fig3" => (
            4,
            vec![(Psm, 4, 2), (Psm, 6, 3), (TiSm, 8, 1), (TiPsm, 8, 4), (TiPsm, 12, 3)],
            PERFECT,
        ),
        "fig4" => (4, vec![(TiSm, 8, 1), (TiPsm, 8, 4), (TiPsm, 12, 3)], BOTH),
        "fig5" => (
            4,
            vec![(Psm, 4, 2), (Psm, 6, 3), (TiPsm, 8, 4), (TiPsm, 12, 3)],
            BOTH,
        ),
        _ => return None,
    })
}

/// Builds a figure preset, solving each scheme's `M` from the common rate.
pub fn preset(name: &str, family: ConstellationFamily, normalization: Normalization) -> Result<ExperimentSpec, ExperimentError> {
    let (bpcu, schemes, modes) =
        preset_schemes(name).ok_or_else(|| ExperimentError::UnknownPreset(name.to_string()))?;
    let target = Ratio::from_integer(bpcu);
    let mut curves = Vec::new();
    let mut notes = Vec::new();
    for (kind, n_tx, groups) in schemes {
        let mut shape = preset_shape(kind, n_tx, groups);
        shape.normalization = normalization;
        shape.constellation_family = family;
        let label = default_label(&shape, CsiMode::Perfect);
        let m = solve_mod_order(&shape, target).ok_or_else(|| ExperimentError::Scheme {
            label: label.clone(),
            message: format!("no {family} order reaches {bpcu} bpcu"),
        })?;
        shape.mod_order = m;
        let config = validate(shape).map_err(|source| ExperimentError::Invalid {
            label: label.clone(),
            field: source.field(),
            source,
        })?;
        notes.push(format!(
            "{label}: {} time-index + {} x ({} antenna + log2 M) bits over {} channel uses = {bpcu} bpcu => M = {m} ({family})",
            config.tap_bits(),
            config.active_slots,
            config.antenna_bits_per_slot(),
            config.channel_uses(),
        ));
        for &csi in modes {
            curves.push(Curve {
                label: default_label(&config, csi),
                config,
                csi,
            });
        }
    }
    Ok(ExperimentSpec {
        name: name.to_string(),
        curves,
        snr_db: parse_snr_grid("0:2:30").expect("static grid"),
        stopping: StoppingRule::default(),
        master_seed: DEFAULT_SEED,
        ber_floor: Some(1e-5),
        allow_unequal_rates: false,
        notes,
    })
}

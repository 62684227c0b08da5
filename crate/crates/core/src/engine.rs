//! Monte Carlo bit error rate estimation.
//!
//! Every frame owns a ChaCha8 stream keyed by `(master_seed, snr_db)` with the
//! frame index as stream id, so a point's result does not depend on how
//! frames are scheduled across threads. Frames run in fixed-size chunks and
//! the stopping rule is only evaluated between chunks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{
    apply_channel_blocks, corrupt_csi, corrupt_csi_full, draw_channel, snr_to_n0, CsiErrorSpec,
    NoiseSpec, SnrAxis,
};
use crate::constellation::{build_constellation, Constellation, UnsupportedConstellation};
use crate::detector::{BruteForceDetector, DecomposedDetector, DenseDetector, DetectError, Detector};
use crate::mapper::{
    bit_categories, codeword_to_signal, decode_frame, encode_frame, word_to_bits, BitCategory,
    DEFAULT_ENUMERATION_CAP,
};
use crate::scheme::ValidatedConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid stopping rule: {0}")]
    InvalidStopping(&'static str),
    #[error(transparent)]
    Constellation(#[from] UnsupportedConstellation),
    #[error(transparent)]
    Detector(#[from] DetectError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CsiMode {
    Perfect,
    Cee,
}

impl CsiMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CsiMode::Perfect => "perfect",
            CsiMode::Cee => "cee",
        }
    }
}

/// Which entries of the equivalent channel the estimation error touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CeeScope {
    #[default]
    StructuralBlocks,
    FullMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DetectorKind {
    /// Decomposed search when the channel has a single tap, brute force otherwise.
    #[default]
    Auto,
    Decomposed,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StoppingRule {
    pub min_bit_errors: u64,
    pub max_frames: u64,
    pub min_frames: u64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            min_bit_errors: 200,
            max_frames: 20_000_000,
            min_frames: 10_000,
        }
    }
}

impl StoppingRule {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.min_bit_errors < 1 {
            return Err(EngineError::InvalidStopping("min_bit_errors must be at least 1"));
        }
        if self.max_frames < 1 {
            return Err(EngineError::InvalidStopping("max_frames must be at least 1"));
        }
        if self.min_frames > self.max_frames {
            return Err(EngineError::InvalidStopping("min_frames exceeds max_frames"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    MinErrors,
    MaxFrames,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::MinErrors => "min_errors",
            StopReason::MaxFrames => "max_frames",
        }
    }
}

/// Result of one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub label: String,
    pub snr_db: f64,
    pub frames_run: u64,
    pub bit_errors_total: u64,
    pub bit_errors_time_index: u64,
    pub bit_errors_antenna_index: u64,
    pub bit_errors_symbol: u64,
    pub ber: f64,
    pub ci95_halfwidth: f64,
    pub stop_reason: StopReason,
}

/// Bit error counters of a batch of frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorCounts {
    pub time_index: u64,
    pub antenna_index: u64,
    pub symbol: u64,
}

impl ErrorCounts {
    pub fn total(&self) -> u64 {
        self.time_index + self.antenna_index + self.symbol
    }

    fn add(self, o: ErrorCounts) -> ErrorCounts {
        ErrorCounts {
            time_index: self.time_index + o.time_index,
            antenna_index: self.antenna_index + o.antenna_index,
            symbol: self.symbol + o.symbol,
        }
    }

    /// Counts differing positions by category.
    pub fn compare(sent: &[u8], received: &[u8], categories: &[BitCategory]) -> ErrorCounts {
        let mut c = ErrorCounts::default();
        for ((a, b), cat) in sent.iter().zip(received).zip(categories) {
            if a != b {
                match cat {
                    BitCategory::TimeIndex => c.time_index += 1,
                    BitCategory::AntennaIndex => c.antenna_index += 1,
                    BitCategory::Symbol => c.symbol += 1,
                }
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub axis: SnrAxis,
    pub detector: DetectorKind,
    /// Fixed CSI error variance; `None` ties it to the noise variance.
    pub sigma_e2: Option<f64>,
    pub cee_scope: CeeScope,
    pub enumeration_cap: u128,
    /// Frames between two evaluations of the stopping rule.
    pub chunk_frames: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            axis: SnrAxis::EsN0,
            detector: DetectorKind::Auto,
            sigma_e2: None,
            cee_scope: CeeScope::StructuralBlocks,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            chunk_frames: 1000,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of an SNR point; depends on the SNR value, not its position in a sweep.
pub fn point_key(master_seed: u64, snr_db: f64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ snr_db.to_bits())
}

/// Random stream of one frame.
pub fn frame_rng(point_key: u64, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(point_key);
    rng.set_stream(frame);
    rng
}

/// A scheme prepared for simulation: constellation, detector and bit layout.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: ValidatedConfig,
    constellation: Constellation,
    detector: Detector,
    // exhaustive search for dense estimates
    dense: Option<Detector>,
    categories: Vec<BitCategory>,
    options: SimOptions,
    label: String,
}

impl Simulator {
    pub fn new(config: &ValidatedConfig, options: SimOptions) -> Result<Self, EngineError> {
        let constellation = build_constellation(config.mod_order, config.constellation_family)?;
        let kind = match options.detector {
            DetectorKind::Auto if config.taps == 1 => DetectorKind::Decomposed,
            DetectorKind::Auto => DetectorKind::BruteForce,
            k => k,
        };
        let detector = match kind {
            DetectorKind::BruteForce => {
                Detector::BruteForce(BruteForceDetector::new(config, &constellation, options.enumeration_cap)?)
            }
            _ => Detector::Decomposed(DecomposedDetector::new(config, &constellation, options.enumeration_cap)?),
        };
        let dense = match (options.cee_scope, &detector) {
            (CeeScope::StructuralBlocks, _) => None,
            (CeeScope::FullMatrix, Detector::BruteForce(_)) => Some(detector.clone()),
            (CeeScope::FullMatrix, _) => Some(Detector::Dense(DenseDetector::new(
                config,
                &constellation,
                options.enumeration_cap,
            )?)),
        };
        Ok(Simulator {
            config: *config,
            constellation,
            detector,
            dense,
            categories: bit_categories(config),
            options,
            label: config.tag(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn config(&self) -> &ValidatedConfig {
        &self.config
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn csi_spec(&self, noise: NoiseSpec) -> CsiErrorSpec {
        match self.options.sigma_e2 {
            Some(v) => CsiErrorSpec::new(v).expect("validated sigma_e2"),
            None => CsiErrorSpec::matched(noise),
        }
    }

    /// Simulates one frame and returns `(sent bits, detected bits)`.
    ///
    /// Draw order within the frame stream: payload word, channel, noise,
    /// channel estimation error.
    pub fn simulate_frame(&self, key: u64, frame: u64, noise: NoiseSpec, csi: CsiMode) -> (Vec<u8>, Vec<u8>) {
        let cfg = &self.config;
        let mut rng = frame_rng(key, frame);
        let n = cfg.bits_per_frame();
        let word: u64 = rng.random::<u64>() & (u64::MAX >> (64 - n));
        let bits = word_to_bits(word, n);
        let codeword = encode_frame(&bits, cfg).expect("bit count matches");
        let signal = codeword_to_signal(&codeword, cfg, &self.constellation);
        let channel = draw_channel(cfg, &mut rng);
        let y = apply_channel_blocks(&channel, &signal, noise, &mut rng).expect("shapes match");
        let detected = match (csi, self.options.cee_scope) {
            (CsiMode::Perfect, _) => self.detector.detect(&y, &channel),
            (CsiMode::Cee, CeeScope::StructuralBlocks) => {
                let est = corrupt_csi(&channel, self.csi_spec(noise), cfg.channel_time_model, &mut rng);
                self.detector.detect(&y, &est)
            }
            (CsiMode::Cee, CeeScope::FullMatrix) => {
                let est = corrupt_csi_full(&channel.equivalent(), self.csi_spec(noise), &mut rng);
                match self.dense.as_ref().expect("built for full-matrix scope") {
                    Detector::BruteForce(d) => d.detect(&y, &est),
                    Detector::Dense(d) => d.detect(&y, &est),
                    Detector::Decomposed(_) => unreachable!("dense estimates need an exhaustive search"),
                }
            }
        }
        .expect("detector matches the scheme");
        let received = decode_frame(&detected.codeword, cfg);
        (bits, received)
    }

    fn frame_errors(&self, key: u64, frame: u64, noise: NoiseSpec, csi: CsiMode) -> ErrorCounts {
        let (sent, received) = self.simulate_frame(key, frame, noise, csi);
        ErrorCounts::compare(&sent, &received, &self.categories)
    }

    /// Error counts of frames `0..frames` of a point, ignoring the stopping rule.
    pub fn count_errors(&self, snr_db: f64, csi: CsiMode, master_seed: u64, frames: u64) -> ErrorCounts {
        let key = point_key(master_seed, snr_db);
        let noise = snr_to_n0(snr_db, &self.config, self.options.axis);
        (0..frames)
            .into_par_iter()
            .map(|f| self.frame_errors(key, f, noise, csi))
            .reduce(ErrorCounts::default, ErrorCounts::add)
    }

    pub fn run_point(
        &self,
        snr_db: f64,
        csi: CsiMode,
        stopping: &StoppingRule,
        master_seed: u64,
    ) -> Result<BerRecord, EngineError> {
        stopping.validate()?;
        if let Some(v) = self.options.sigma_e2 {
            CsiErrorSpec::new(v).map_err(|_| EngineError::InvalidStopping("sigma_e2 must be non-negative"))?;
        }
        let key = point_key(master_seed, snr_db);
        let noise = snr_to_n0(snr_db, &self.config, self.options.axis);
        let chunk = self.options.chunk_frames.max(1);
        let mut frames = 0u64;
        let mut counts = ErrorCounts::default();
        let stop_reason = loop {
            let n = chunk.min(stopping.max_frames - frames);
            let batch = (frames..frames + n)
                .into_par_iter()
                .map(|f| self.frame_errors(key, f, noise, csi))
                .reduce(ErrorCounts::default, ErrorCounts::add);
            counts = counts.add(batch);
            frames += n;
            if frames >= stopping.min_frames && counts.total() >= stopping.min_bit_errors {
                break StopReason::MinErrors;
            }
            if frames >= stopping.max_frames {
                break StopReason::MaxFrames;
            }
        };
        let bits = frames as f64 * f64::from(self.config.bits_per_frame());
        let ber = counts.total() as f64 / bits;
        Ok(BerRecord {
            label: self.label.clone(),
            snr_db,
            frames_run: frames,
            bit_errors_total: counts.total(),
            bit_errors_time_index: counts.time_index,
            bit_errors_antenna_index: counts.antenna_index,
            bit_errors_symbol: counts.symbol,
            ber,
            ci95_halfwidth: 1.96 * (ber * (1.0 - ber) / bits).sqrt(),
            stop_reason,
        })
    }

    /// One record per SNR value, ordered by SNR.
    pub fn run_sweep(
        &self,
        snr_list: &[f64],
        csi: CsiMode,
        stopping: &StoppingRule,
        master_seed: u64,
    ) -> Result<Vec<BerRecord>, EngineError> {
        let mut snrs = snr_list.to_vec();
        snrs.sort_by(f64::total_cmp);
        snrs.iter()
            .map(|&snr| self.run_point(snr, csi, stopping, master_seed))
            .collect()
    }

    /// Like [`Simulator::run_sweep`], but stops after the first point whose
    /// BER falls strictly below `ber_floor`.
    pub fn run_sweep_to_floor(
        &self,
        snr_list: &[f64],
        csi: CsiMode,
        stopping: &StoppingRule,
        master_seed: u64,
        ber_floor: f64,
    ) -> Result<Vec<BerRecord>, EngineError> {
        let mut snrs = snr_list.to_vec();
        snrs.sort_by(f64::total_cmp);
        let mut out = Vec::new();
        for snr in snrs {
            let rec = self.run_point(snr, csi, stopping, master_seed)?;
            let done = rec.ber < ber_floor;
            out.push(rec);
            if done {
                break;
            }
        }
        Ok(out)
    }
}

/// Runs one SNR point with default options.
pub fn run_point(
    config: &ValidatedConfig,
    snr_db: f64,
    csi: CsiMode,
    stopping: &StoppingRule,
    master_seed: u64,
) -> Result<BerRecord, EngineError> {
    Simulator::new(config, SimOptions::default())?.run_point(snr_db, csi, stopping, master_seed)
}

pub fn run_sweep(
    config: &ValidatedConfig,
    snr_list: &[f64],
    csi: CsiMode,
    stopping: &StoppingRule,
    master_seed: u64,
) -> Result<Vec<BerRecord>, EngineError> {
    Simulator::new(config, SimOptions::default())?.run_sweep(snr_list, csi, stopping, master_seed)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GapError {
    #[error("curve does not cross BER {target:e}")]
    NoCrossing { target: f64 },
    #[error("target BER must lie in (0, 1), got {0}")]
    InvalidTarget(f64),
}

/// SNR where a curve reaches a target BER, with the points it was
/// interpolated from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub snr_db: f64,
    pub above: (f64, f64),
    pub below: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    /// `SNR_b - SNR_a` at the target BER.
    pub gap_db: f64,
    pub a: Crossing,
    pub b: Crossing,
}

/// Interpolates SNR linearly against `log10(BER)` between the first pair of
/// SNR-consecutive points that brackets `target`. Zero-BER points are ignored.
pub fn snr_at_ber(curve: &[(f64, f64)], target: f64) -> Result<Crossing, GapError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(GapError::InvalidTarget(target));
    }
    let mut pts: Vec<(f64, f64)> = curve.iter().copied().filter(|p| p.1 > 0.0).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lt = target.log10();
    for w in pts.windows(2) {
        let (hi, lo) = (w[0], w[1]);
        if hi.1 >= target && lo.1 <= target && hi.1 > lo.1 {
            let (l1, l2) = (hi.1.log10(), lo.1.log10());
            let snr = hi.0 + (lt - l1) * (lo.0 - hi.0) / (l2 - l1);
            return Ok(Crossing {
                snr_db: snr,
                above: hi,
                below: lo,
            });
        }
    }
    Err(GapError::NoCrossing { target })
}

/// How much more SNR curve `b` needs than curve `a` at `target` BER.
pub fn gap_at_ber(curve_a: &[(f64, f64)], curve_b: &[(f64, f64)], target: f64) -> Result<GapReport, GapError> {
    let a = snr_at_ber(curve_a, target)?;
    let b = snr_at_ber(curve_b, target)?;
    Ok(GapReport {
        gap_db: b.snr_db - a.snr_db,
        a,
        b,
    })
}

/// `(snr_db, ber)` pairs of a record sequence.
pub fn curve_points(records: &[BerRecord]) -> Vec<(f64, f64)> {
    records.iter().map(|r| (r.snr_db, r.ber)).collect()
}

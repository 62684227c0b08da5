//! Maximum-likelihood frame detection.
//!
//! [`BruteForceDetector`] scores every codeword of the scheme against the
//! full equivalent channel matrix. [`DecomposedDetector`] exploits the
//! block-diagonal channel of single-tap frames: the frame metric splits into
//! per-slot terms, an inactive slot contributes `|y_t|^2` and an active slot
//! contributes the best of its `N_tg^G M` hypotheses regardless of which
//! pattern is chosen, so minimizing over patterns afterwards is exact.
//! [`DenseDetector`] is exhaustive like brute force but built for dense
//! estimates: it precomputes the received vector of every slot hypothesis
//! and scores the last active slot of all prefixes with one matrix product.
//!
//! All detectors break ties towards the smallest frame bit string.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{CMatrix, CVector, ChannelRealization};
use crate::constellation::Constellation;
use crate::mapper::{
    decode_frame, encode_frame, enumerate_codebook, rank_to_tap, word_to_bits, Codeword, MapError,
};
use crate::scheme::ValidatedConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("search space of {size} hypotheses exceeds cap {cap}")]
    CapExceeded { size: u128, cap: u128 },
    #[error("decomposed detection needs a single-tap channel, got {0} taps")]
    MultiTapChannel(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

impl From<MapError> for DetectError {
    fn from(e: MapError) -> Self {
        match e {
            MapError::CodebookTooLarge { size, cap } => DetectError::CapExceeded { size, cap },
            other => unreachable!("codebook enumeration failed: {other}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub codeword: Codeword,
    /// Residual `|y - H_hat s|^2` of the detected codeword.
    pub metric: f64,
}

/// Hypotheses scored by exhaustive search: the codebook size.
pub fn bruteforce_hypotheses(config: &ValidatedConfig) -> u128 {
    config.codebook_size()
}

/// Slot hypotheses scored by the decomposed search, `T N_tg^G M`, followed by
/// `2^p` pattern sums.
pub fn decomposed_hypotheses(config: &ValidatedConfig) -> u128 {
    (config.frame_slots * config.antenna_patterns() * config.mod_order) as u128
}

/// Order-of-growth estimate of exhaustive ML complexity,
/// `T^(T_a+1) (N_tg^G M)^(T_a N_r) / T_a^(T_a-1)`.
pub fn ml_complexity_order(config: &ValidatedConfig) -> f64 {
    let t = config.frame_slots as f64;
    let ta = config.active_slots as f64;
    let per_slot = (config.antenna_patterns() * config.mod_order) as f64;
    t.powf(ta + 1.0) * per_slot.powf(ta * config.n_rx as f64) / ta.powf(ta - 1.0)
}

/// Exhaustive ML search over a precomputed codebook.
#[derive(Debug, Clone)]
pub struct BruteForceDetector {
    config: ValidatedConfig,
    // sparse frame signals, CSR-like
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl BruteForceDetector {
    pub fn new(
        config: &ValidatedConfig,
        constellation: &Constellation,
        cap: u128,
    ) -> Result<Self, DetectError> {
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (_, signal) in enumerate_codebook(config, constellation, cap)? {
            for (i, v) in signal.nonzero() {
                indices.push(i);
                values.push(v);
            }
            offsets.push(indices.len());
        }
        Ok(BruteForceDetector {
            config: *config,
            offsets,
            indices,
            values,
        })
    }

    pub fn codebook_len(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Minimizes `|y - H_hat s|^2` over the whole codebook.
    pub fn detect(&self, y: &CVector, h_est: &CMatrix) -> Result<DetectionResult, DetectError> {
        let rows = self.config.frame_slots * self.config.n_rx;
        let cols = self.config.frame_slots * self.config.n_tx;
        if h_est.shape() != (rows, cols) {
            return Err(DetectError::DimensionMismatch {
                expected: rows * cols,
                got: h_est.len(),
            });
        }
        if y.len() != rows {
            return Err(DetectError::DimensionMismatch {
                expected: rows,
                got: y.len(),
            });
        }
        // nonzero pattern of each column
        let columns: Vec<Vec<(usize, Complex64)>> = (0..cols)
            .map(|j| {
                h_est
                    .column(j)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != Complex64::new(0.0, 0.0))
                    .map(|(i, v)| (i, *v))
                    .collect()
            })
            .collect();

        let mut residual = vec![Complex64::new(0.0, 0.0); rows];
        let mut best = (f64::INFINITY, 0usize);
        for w in 0..self.codebook_len() {
            residual.copy_from_slice(y.as_slice());
            for k in self.offsets[w]..self.offsets[w + 1] {
                let x = self.values[k];
                for &(i, h) in &columns[self.indices[k]] {
                    residual[i] -= h * x;
                }
            }
            let metric: f64 = residual.iter().map(|r| r.norm_sqr()).sum();
            if metric < best.0 {
                best = (metric, w);
            }
        }
        let bits = word_to_bits(best.1 as u64, self.config.bits_per_frame());
        Ok(DetectionResult {
            codeword: encode_frame(&bits, &self.config).expect("bit count matches"),
            metric: best.0,
        })
    }
}

/// Slot-separable ML search for single-tap channels.
#[derive(Debug, Clone)]
pub struct DecomposedDetector {
    config: ValidatedConfig,
    tap_masks: Vec<u64>,
    // constellation points times the per-antenna gain
    symbols: Vec<Complex64>,
}

impl DecomposedDetector {
    pub fn new(
        config: &ValidatedConfig,
        constellation: &Constellation,
        cap: u128,
    ) -> Result<Self, DetectError> {
        if config.taps != 1 {
            return Err(DetectError::MultiTapChannel(config.taps));
        }
        let patterns = 1u128 << config.tap_bits();
        let per_slot = (config.antenna_patterns() * config.mod_order) as u128;
        for size in [patterns, per_slot] {
            if size > cap {
                return Err(DetectError::CapExceeded { size, cap });
            }
        }
        let tap_masks = (0..patterns)
            .map(|r| {
                rank_to_tap(r, config.frame_slots, config.active_slots)
                    .expect("rank within range")
                    .mask()
            })
            .collect();
        let gain = config.antenna_gain();
        Ok(DecomposedDetector {
            config: *config,
            tap_masks,
            symbols: constellation.points().iter().map(|p| p * gain).collect(),
        })
    }

    /// Best `(metric, antenna pattern, symbol)` for one slot. The pattern
    /// packs group 0 in the most significant field.
    fn best_slot_hypothesis(&self, y: &[Complex64], h: &[Complex64], sum: &mut [Complex64]) -> (f64, usize, usize) {
        let cfg = &self.config;
        let nr = cfg.n_rx;
        let field = cfg.antenna_bits_per_group();
        let mask = cfg.group_size - 1;
        let mut best = (f64::INFINITY, 0usize, 0usize);
        for pattern in 0..cfg.antenna_patterns() {
            sum.fill(Complex64::new(0.0, 0.0));
            for g in 0..cfg.groups {
                let a = (pattern >> ((cfg.groups - 1 - g) as u32 * field)) & mask;
                let col = g * cfg.group_size + a;
                for (s, hv) in sum.iter_mut().zip(&h[col * nr..(col + 1) * nr]) {
                    *s += hv;
                }
            }
            for (m, &x) in self.symbols.iter().enumerate() {
                let metric: f64 = y.iter().zip(sum.iter()).map(|(yi, si)| (yi - si * x).norm_sqr()).sum();
                if metric < best.0 {
                    best = (metric, pattern, m);
                }
            }
        }
        best
    }

    pub fn detect(&self, y: &CVector, est: &ChannelRealization) -> Result<DetectionResult, DetectError> {
        let cfg = &self.config;
        if est.taps() != 1 {
            return Err(DetectError::MultiTapChannel(est.taps()));
        }
        let (nr, big_t) = (cfg.n_rx, cfg.frame_slots);
        if est.n_rx() != nr || est.n_tx() != cfg.n_tx || est.frame_slots() != big_t {
            return Err(DetectError::DimensionMismatch {
                expected: big_t * nr * cfg.n_tx,
                got: est.frame_slots() * est.n_rx() * est.n_tx(),
            });
        }
        if y.len() != big_t * nr {
            return Err(DetectError::DimensionMismatch {
                expected: big_t * nr,
                got: y.len(),
            });
        }
        let mut sum = vec![Complex64::new(0.0, 0.0); nr];
        let mut off = Vec::with_capacity(big_t);
        let mut on = Vec::with_capacity(big_t);
        for t in 0..big_t {
            let yt = &y.as_slice()[t * nr..(t + 1) * nr];
            off.push(yt.iter().map(|v| v.norm_sqr()).sum::<f64>());
            on.push(self.best_slot_hypothesis(yt, est.slot_tap(t, 0).as_slice(), &mut sum));
        }
        let mut best = (f64::INFINITY, 0usize);
        for (rank, &mask) in self.tap_masks.iter().enumerate() {
            let metric: f64 = (0..big_t)
                .map(|t| if mask >> t & 1 == 1 { on[t].0 } else { off[t] })
                .sum();
            if metric < best.0 {
                best = (metric, rank);
            }
        }

        let mask = self.tap_masks[best.1];
        let field = cfg.antenna_bits_per_group();
        let mut antenna_indices = Vec::with_capacity(cfg.active_slots * cfg.groups);
        let mut symbol_indices = Vec::with_capacity(cfg.active_slots);
        for t in (0..big_t).filter(|t| mask >> t & 1 == 1) {
            let (_, pattern, m) = on[t];
            for g in 0..cfg.groups {
                antenna_indices.push((pattern >> ((cfg.groups - 1 - g) as u32 * field)) & (cfg.group_size - 1));
            }
            symbol_indices.push(m);
        }
        Ok(DetectionResult {
            codeword: Codeword {
                tap_rank: best.1 as u64,
                antenna_indices,
                symbol_indices,
            },
            metric: best.0,
        })
    }
}

/// Exhaustive ML search against a dense `T N_r x T N_t` estimate.
///
/// Visits codewords in increasing order of the frame bit string. Metrics are
/// expanded as `|r|^2 + |v|^2 - 2 Re<r, v>`, so they agree with
/// [`BruteForceDetector`] up to rounding.
#[derive(Debug, Clone)]
pub struct DenseDetector {
    config: ValidatedConfig,
    tap_slots: Vec<Vec<usize>>,
    symbols: Vec<Complex64>,
}

impl DenseDetector {
    pub fn new(
        config: &ValidatedConfig,
        constellation: &Constellation,
        cap: u128,
    ) -> Result<Self, DetectError> {
        let size = config.codebook_size();
        if size > cap {
            return Err(DetectError::CapExceeded { size, cap });
        }
        let tap_slots = (0..1u128 << config.tap_bits())
            .map(|r| {
                rank_to_tap(r, config.frame_slots, config.active_slots)
                    .expect("rank within range")
                    .slots()
                    .to_vec()
            })
            .collect();
        let gain = config.antenna_gain();
        Ok(DenseDetector {
            config: *config,
            tap_slots,
            symbols: constellation.points().iter().map(|p| p * gain).collect(),
        })
    }

    pub fn detect(&self, y: &CVector, h_est: &CMatrix) -> Result<DetectionResult, DetectError> {
        let cfg = &self.config;
        let rows = cfg.frame_slots * cfg.n_rx;
        let cols = cfg.frame_slots * cfg.n_tx;
        if h_est.shape() != (rows, cols) {
            return Err(DetectError::DimensionMismatch {
                expected: rows * cols,
                got: h_est.len(),
            });
        }
        if y.len() != rows {
            return Err(DetectError::DimensionMismatch {
                expected: rows,
                got: y.len(),
            });
        }
        let m = self.symbols.len();
        let per_slot = cfg.antenna_patterns() * m;
        let field = cfg.antenna_bits_per_group();
        let mask = cfg.group_size - 1;

        // contrib[(t * per_slot + pattern * M + symbol) * rows ..]: received
        // vector of one slot hypothesis
        let mut contrib = vec![Complex64::new(0.0, 0.0); cfg.frame_slots * per_slot * rows];
        let mut sum = vec![Complex64::new(0.0, 0.0); rows];
        for t in 0..cfg.frame_slots {
            for pattern in 0..cfg.antenna_patterns() {
                sum.fill(Complex64::new(0.0, 0.0));
                for g in 0..cfg.groups {
                    let a = (pattern >> ((cfg.groups - 1 - g) as u32 * field)) & mask;
                    let col = t * cfg.n_tx + g * cfg.group_size + a;
                    for (s, h) in sum.iter_mut().zip(h_est.column(col).iter()) {
                        *s += h;
                    }
                }
                for (k, &x) in self.symbols.iter().enumerate() {
                    let at = ((t * per_slot) + pattern * m + k) * rows;
                    for (c, s) in contrib[at..at + rows].iter_mut().zip(&sum) {
                        *c = s * x;
                    }
                }
            }
        }

        // residuals of every prefix over the first T_a - 1 active slots are
        // stacked as real rows; one product scores all last-slot hypotheses
        let depth = cfg.active_slots;
        let prefixes = per_slot.pow(depth as u32 - 1);
        let mut stacked = DMatrix::<f64>::zeros(prefixes, 2 * rows);
        let mut prefix_norm = vec![0.0; prefixes];
        let mut last = DMatrix::<f64>::zeros(2 * rows, per_slot);
        let mut last_norm = vec![0.0; per_slot];
        let mut scores = DMatrix::<f64>::zeros(prefixes, per_slot);
        let mut residual = vec![Complex64::new(0.0, 0.0); rows];
        let mut best = (f64::INFINITY, 0usize, vec![0usize; depth]);
        let mut choice = vec![0usize; depth];
        for (rank, slots) in self.tap_slots.iter().enumerate() {
            for p in 0..prefixes {
                // prefix digits, first active slot most significant
                let mut rest = p;
                for level in (0..depth - 1).rev() {
                    choice[level] = rest % per_slot;
                    rest /= per_slot;
                }
                residual.copy_from_slice(y.as_slice());
                for level in 0..depth - 1 {
                    let at = (slots[level] * per_slot + choice[level]) * rows;
                    for (r, c) in residual.iter_mut().zip(&contrib[at..at + rows]) {
                        *r -= c;
                    }
                }
                for (i, r) in residual.iter().enumerate() {
                    stacked[(p, i)] = r.re;
                    stacked[(p, rows + i)] = r.im;
                }
                prefix_norm[p] = residual.iter().map(|r| r.norm_sqr()).sum();
            }
            let t_last = slots[depth - 1];
            for c in 0..per_slot {
                let at = (t_last * per_slot + c) * rows;
                for (i, v) in contrib[at..at + rows].iter().enumerate() {
                    last[(i, c)] = v.re;
                    last[(rows + i, c)] = v.im;
                }
                last_norm[c] = contrib[at..at + rows].iter().map(|v| v.norm_sqr()).sum();
            }
            scores.gemm(-2.0, &stacked, &last, 0.0);
            for p in 0..prefixes {
                for c in 0..per_slot {
                    let metric = prefix_norm[p] + last_norm[c] + scores[(p, c)];
                    if metric < best.0 {
                        let mut picks = Vec::with_capacity(depth);
                        let mut rest = p;
                        for _ in 0..depth - 1 {
                            picks.push(rest % per_slot);
                            rest /= per_slot;
                        }
                        picks.reverse();
                        picks.push(c);
                        best = (metric, rank, picks);
                    }
                }
            }
        }

        let (metric, rank, picks) = best;
        let mut antenna_indices = Vec::with_capacity(depth * cfg.groups);
        let mut symbol_indices = Vec::with_capacity(depth);
        for c in picks {
            let pattern = c / m;
            for g in 0..cfg.groups {
                antenna_indices.push((pattern >> ((cfg.groups - 1 - g) as u32 * field)) & mask);
            }
            symbol_indices.push(c % m);
        }
        Ok(DetectionResult {
            codeword: Codeword {
                tap_rank: rank as u64,
                antenna_indices,
                symbol_indices,
            },
            metric,
        })
    }
}

/// Either ML search, driven by a per-block channel estimate.
#[derive(Debug, Clone)]
pub enum Detector {
    BruteForce(BruteForceDetector),
    Decomposed(DecomposedDetector),
    Dense(DenseDetector),
}

impl Detector {
    pub fn detect(&self, y: &CVector, est: &ChannelRealization) -> Result<DetectionResult, DetectError> {
        match self {
            Detector::BruteForce(d) => d.detect(y, &est.equivalent()),
            Detector::Decomposed(d) => d.detect(y, est),
            Detector::Dense(d) => d.detect(y, &est.equivalent()),
        }
    }

    fn config(&self) -> &ValidatedConfig {
        match self {
            Detector::BruteForce(d) => &d.config,
            Detector::Decomposed(d) => &d.config,
            Detector::Dense(d) => &d.config,
        }
    }
}

/// Exhaustive ML detection against a full (possibly fully corrupted)
/// equivalent matrix.
pub fn ml_detect_bruteforce(
    y: &CVector,
    h_est: &CMatrix,
    config: &ValidatedConfig,
    constellation: &Constellation,
    cap: u128,
) -> Result<DetectionResult, DetectError> {
    BruteForceDetector::new(config, constellation, cap)?.detect(y, h_est)
}

pub fn ml_detect_decomposed(
    y: &CVector,
    est: &ChannelRealization,
    config: &ValidatedConfig,
    constellation: &Constellation,
    cap: u128,
) -> Result<DetectionResult, DetectError> {
    DecomposedDetector::new(config, constellation, cap)?.detect(y, est)
}

/// Detects a frame and returns its information bits.
pub fn detect_and_demap(
    detector: &Detector,
    y: &CVector,
    est: &ChannelRealization,
) -> Result<Vec<u8>, DetectError> {
    let result = detector.detect(y, est)?;
    Ok(decode_frame(&result.codeword, detector.config()))
}

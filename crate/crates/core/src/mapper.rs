//! Bit-to-codeword mapping and frame signal synthesis.
//!
//! Frame bit layout, most significant first:
//!
//! ```text
//! [ p time-index bits ][ slot a0: G antenna fields | symbol ][ slot a1: ... ] ...
//! ```
//!
//! where `a0 < a1 < ...` are the active slots of the frame in ascending order
//! and every field is big-endian. The time-index bits select a time-slot
//! activation pattern (TAP) by its lexicographic rank among all `T_a`-subsets of
//! the `T` frame slots; only the first `2^p` subsets are used.

use num_complex::Complex64;
use thiserror::Error;

use crate::constellation::Constellation;
use crate::scheme::{binomial, ValidatedConfig};

/// Default upper bound on the number of codewords a caller may enumerate.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("TAP rank {rank} out of range (limit {limit})")]
    RankOutOfRange { rank: u128, limit: u128 },
    #[error("invalid activation pattern {0:?}")]
    InvalidTap(Vec<usize>),
    #[error("expected {expected} bits, got {got}")]
    BitCount { expected: usize, got: usize },
    #[error("codeword dimensions do not match the scheme")]
    CodewordShape,
    #[error("codebook of {size} entries exceeds enumeration cap {cap}")]
    CodebookTooLarge { size: u128, cap: u128 },
}

/// Time-slot activation pattern: strictly increasing active slot indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tap {
    slots: Vec<usize>,
}

impl Tap {
    pub fn new(slots: Vec<usize>, frame_slots: usize) -> Result<Self, MapError> {
        let ok = slots.windows(2).all(|w| w[0] < w[1]) && slots.iter().all(|&s| s < frame_slots);
        if ok {
            Ok(Tap { slots })
        } else {
            Err(MapError::InvalidTap(slots))
        }
    }

    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    /// Bit `t` set iff slot `t` is active.
    pub fn mask(&self) -> u64 {
        self.slots.iter().fold(0, |m, &s| m | (1 << s))
    }

    pub fn is_active(&self, slot: usize) -> bool {
        self.slots.contains(&slot)
    }
}

/// Unranks the `rank`-th `active`-subset of `{0..frame}` in lexicographic
/// order of sorted tuples. Only ranks below `2^floor(log2 C(frame, active))`
/// are valid.
pub fn rank_to_tap(rank: u128, frame: usize, active: usize) -> Result<Tap, MapError> {
    let total = binomial(frame as u64, active as u64);
    let limit = if total == 0 {
        0
    } else {
        1u128 << (127 - total.leading_zeros())
    };
    if rank >= limit {
        return Err(MapError::RankOutOfRange { rank, limit });
    }
    let mut rest = rank;
    let mut slots = Vec::with_capacity(active);
    let mut next = 0usize;
    for remaining in (1..=active).rev() {
        loop {
            // subsets whose next element is `next`
            let with_next = binomial((frame - next - 1) as u64, (remaining - 1) as u64);
            if rest < with_next {
                break;
            }
            rest -= with_next;
            next += 1;
        }
        slots.push(next);
        next += 1;
    }
    Ok(Tap { slots })
}

/// Inverse of [`rank_to_tap`].
pub fn tap_to_rank(tap: &Tap, frame: usize) -> u128 {
    let active = tap.slots.len();
    let mut rank = 0u128;
    let mut start = 0usize;
    for (i, &s) in tap.slots.iter().enumerate() {
        let remaining = active - i;
        for skipped in start..s {
            rank += binomial((frame - skipped - 1) as u64, (remaining - 1) as u64);
        }
        start = s + 1;
    }
    rank
}

/// Structured transmit decision for one frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Codeword {
    pub tap_rank: u64,
    /// `T_a x G` row-major: entry `(k, g)` is the active antenna of group `g`
    /// in the `k`-th active slot.
    pub antenna_indices: Vec<usize>,
    /// Constellation label per active slot.
    pub symbol_indices: Vec<usize>,
}

impl Codeword {
    pub fn antenna(&self, active_slot: usize, group: usize, groups: usize) -> usize {
        self.antenna_indices[active_slot * groups + group]
    }

    pub fn check_shape(&self, config: &ValidatedConfig) -> Result<(), MapError> {
        let ok = self.antenna_indices.len() == config.active_slots * config.groups
            && self.symbol_indices.len() == config.active_slots
            && self.tap_rank < (1u64 << config.tap_bits())
            && self.antenna_indices.iter().all(|&a| a < config.group_size)
            && self.symbol_indices.iter().all(|&m| m < config.mod_order);
        if ok {
            Ok(())
        } else {
            Err(MapError::CodewordShape)
        }
    }

    pub fn tap(&self, config: &ValidatedConfig) -> Tap {
        rank_to_tap(u128::from(self.tap_rank), config.frame_slots, config.active_slots)
            .expect("tap rank within range")
    }
}

/// Which part of a frame a bit position belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BitCategory {
    TimeIndex,
    AntennaIndex,
    Symbol,
}

pub fn bits_per_frame(config: &ValidatedConfig) -> u32 {
    config.bits_per_frame()
}

/// Category of every bit position of a frame.
pub fn bit_categories(config: &ValidatedConfig) -> Vec<BitCategory> {
    let mut out = vec![BitCategory::TimeIndex; config.tap_bits() as usize];
    for _ in 0..config.active_slots {
        out.extend(std::iter::repeat_n(
            BitCategory::AntennaIndex,
            config.antenna_bits_per_slot() as usize,
        ));
        out.extend(std::iter::repeat_n(BitCategory::Symbol, config.symbol_bits() as usize));
    }
    out
}

struct BitReader<'a> {
    bits: &'a [u8],
    pos: usize,
}

impl BitReader<'_> {
    fn take(&mut self, n: u32) -> u64 {
        let v = self.bits[self.pos..self.pos + n as usize]
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | u64::from(b & 1));
        self.pos += n as usize;
        v
    }
}

fn push_bits(out: &mut Vec<u8>, value: u64, n: u32) {
    out.extend((0..n).rev().map(|b| ((value >> b) & 1) as u8));
}

/// Splits one frame's bits into a codeword.
pub fn encode_frame(bits: &[u8], config: &ValidatedConfig) -> Result<Codeword, MapError> {
    let expected = config.bits_per_frame() as usize;
    if bits.len() != expected {
        return Err(MapError::BitCount {
            expected,
            got: bits.len(),
        });
    }
    let mut r = BitReader { bits, pos: 0 };
    let tap_rank = r.take(config.tap_bits());
    let mut antenna_indices = Vec::with_capacity(config.active_slots * config.groups);
    let mut symbol_indices = Vec::with_capacity(config.active_slots);
    for _ in 0..config.active_slots {
        for _ in 0..config.groups {
            antenna_indices.push(r.take(config.antenna_bits_per_group()) as usize);
        }
        symbol_indices.push(r.take(config.symbol_bits()) as usize);
    }
    Ok(Codeword {
        tap_rank,
        antenna_indices,
        symbol_indices,
    })
}

/// Inverse of [`encode_frame`].
pub fn decode_frame(codeword: &Codeword, config: &ValidatedConfig) -> Vec<u8> {
    let mut out = Vec::with_capacity(config.bits_per_frame() as usize);
    push_bits(&mut out, codeword.tap_rank, config.tap_bits());
    for k in 0..config.active_slots {
        for g in 0..config.groups {
            push_bits(
                &mut out,
                codeword.antenna(k, g, config.groups) as u64,
                config.antenna_bits_per_group(),
            );
        }
        push_bits(&mut out, codeword.symbol_indices[k] as u64, config.symbol_bits());
    }
    out
}

/// Packs a big-endian bit slice into an integer.
pub fn bits_to_word(bits: &[u8]) -> u64 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | u64::from(b & 1))
}

/// Unpacks the low `n` bits of `word`, most significant first.
pub fn word_to_bits(word: u64, n: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(n as usize);
    push_bits(&mut out, word, n);
    out
}

/// Complex transmit vector of one frame, slot-major (`T * N_t` entries).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSignal {
    pub values: Vec<Complex64>,
    n_tx: usize,
}

impl FrameSignal {
    pub fn zeros(config: &ValidatedConfig) -> Self {
        FrameSignal {
            values: vec![Complex64::new(0.0, 0.0); config.frame_slots * config.n_tx],
            n_tx: config.n_tx,
        }
    }

    pub fn slot(&self, t: usize) -> &[Complex64] {
        &self.values[t * self.n_tx..(t + 1) * self.n_tx]
    }

    pub fn n_slots(&self) -> usize {
        self.values.len() / self.n_tx
    }

    /// `(index, value)` of every nonzero entry.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != Complex64::new(0.0, 0.0))
            .map(|(i, v)| (i, *v))
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Places the slot symbol on one antenna of every group in each active slot.
pub fn codeword_to_signal(
    codeword: &Codeword,
    config: &ValidatedConfig,
    constellation: &Constellation,
) -> FrameSignal {
    let mut signal = FrameSignal::zeros(config);
    let gain = config.antenna_gain();
    let tap = codeword.tap(config);
    for (k, &t) in tap.slots().iter().enumerate() {
        let x = constellation.point(codeword.symbol_indices[k]) * gain;
        for g in 0..config.groups {
            let antenna = g * config.group_size + codeword.antenna(k, g, config.groups);
            signal.values[t * config.n_tx + antenna] = x;
        }
    }
    signal
}

/// Every codeword with its signal, in increasing order of the frame bit string.
pub fn enumerate_codebook<'a>(
    config: &'a ValidatedConfig,
    constellation: &'a Constellation,
    cap: u128,
) -> Result<impl Iterator<Item = (Codeword, FrameSignal)> + 'a, MapError> {
    let size = config.codebook_size();
    if size > cap {
        return Err(MapError::CodebookTooLarge { size, cap });
    }
    let n = config.bits_per_frame();
    Ok((0..size as u64).map(move |word| {
        let cw = encode_frame(&word_to_bits(word, n), config).expect("bit count matches");
        let signal = codeword_to_signal(&cw, config, constellation);
        (cw, signal)
    }))
}

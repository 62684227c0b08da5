//! Scheme parameterization, validation and closed-form rate/codebook formulas.
//!
//! A [`SchemeConfig`] describes one of the four index-modulation schemes (SM,
//! PSM, TI-SM, TI-PSM). Every other module only accepts a [`ValidatedConfig`],
//! which can only be obtained through [`validate`].
//!
//! SM and PSM are represented as degenerate frames with `T = T_a = L = 1`, so a
//! single frame-level code path serves all four schemes.

use std::fmt;
use std::ops::Deref;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constellation::ConstellationFamily;

/// Largest frame payload handled by the bit-level codecs.
pub const MAX_BITS_PER_FRAME: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "sm")]
    Sm,
    #[serde(rename = "psm")]
    Psm,
    #[serde(rename = "ti-sm")]
    TiSm,
    #[serde(rename = "ti-psm")]
    TiPsm,
}

impl SchemeKind {
    pub fn is_time_indexed(self) -> bool {
        matches!(self, SchemeKind::TiSm | SchemeKind::TiPsm)
    }

    /// Whether transmit antennas are split into several SM groups.
    pub fn is_grouped(self) -> bool {
        matches!(self, SchemeKind::Psm | SchemeKind::TiPsm)
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Sm => "SM",
            SchemeKind::Psm => "PSM",
            SchemeKind::TiSm => "TI-SM",
            SchemeKind::TiPsm => "TI-PSM",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Transmit power normalization of an active slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Normalization {
    /// The `G` active antennas share unit energy: each carries `x / sqrt(G)`.
    #[default]
    #[serde(rename = "per-slot-unit")]
    PerSlotUnit,
    /// Every active antenna radiates the constellation symbol at unit energy.
    #[serde(rename = "per-antenna-unit")]
    PerAntennaUnit,
}

/// How channel matrices evolve over the slots of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ChannelTimeModel {
    #[default]
    #[serde(rename = "per-slot-iid")]
    PerSlotIid,
    #[serde(rename = "per-frame-quasi-static")]
    PerFrameQuasiStatic,
}

/// Raw, unchecked scheme parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: SchemeKind,
    /// Total transmit antennas `N_t`.
    pub n_tx: usize,
    /// Receive antennas `N_r`.
    pub n_rx: usize,
    /// Number of antenna groups `G`.
    pub groups: usize,
    /// Antennas per group `N_tg`.
    pub group_size: usize,
    /// Constellation order `M`.
    pub mod_order: usize,
    pub constellation_family: ConstellationFamily,
    /// Slots per frame `T` (excluding the cyclic prefix).
    pub frame_slots: usize,
    /// Active slots per frame `T_a`.
    pub active_slots: usize,
    /// Multipath taps `L`; the cyclic prefix is `L - 1` slots long.
    pub taps: usize,
    pub normalization: Normalization,
    pub channel_time_model: ChannelTimeModel,
}

impl SchemeConfig {
    fn base(scheme: SchemeKind, n_tx: usize, n_rx: usize, groups: usize, mod_order: usize) -> Self {
        SchemeConfig {
            scheme,
            n_tx,
            n_rx,
            groups,
            group_size: if groups == 0 { 0 } else { n_tx / groups },
            mod_order,
            constellation_family: ConstellationFamily::Psk,
            frame_slots: 1,
            active_slots: 1,
            taps: 1,
            normalization: Normalization::default(),
            channel_time_model: ChannelTimeModel::default(),
        }
    }

    pub fn sm(n_tx: usize, n_rx: usize, mod_order: usize) -> Self {
        Self::base(SchemeKind::Sm, n_tx, n_rx, 1, mod_order)
    }

    pub fn psm(n_tx: usize, n_rx: usize, groups: usize, mod_order: usize) -> Self {
        Self::base(SchemeKind::Psm, n_tx, n_rx, groups, mod_order)
    }

    pub fn ti_sm(
        n_tx: usize,
        n_rx: usize,
        mod_order: usize,
        frame_slots: usize,
        active_slots: usize,
    ) -> Self {
        Self {
            frame_slots,
            active_slots,
            ..Self::base(SchemeKind::TiSm, n_tx, n_rx, 1, mod_order)
        }
    }

    pub fn ti_psm(
        n_tx: usize,
        n_rx: usize,
        groups: usize,
        mod_order: usize,
        frame_slots: usize,
        active_slots: usize,
    ) -> Self {
        Self {
            frame_slots,
            active_slots,
            ..Self::base(SchemeKind::TiPsm, n_tx, n_rx, groups, mod_order)
        }
    }

    pub fn with_family(mut self, family: ConstellationFamily) -> Self {
        self.constellation_family = family;
        self
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn with_channel_time_model(mut self, model: ChannelTimeModel) -> Self {
        self.channel_time_model = model;
        self
    }

    pub fn with_taps(mut self, taps: usize) -> Self {
        self.taps = taps;
        self
    }

    /// Short human-readable tag such as `TI-PSM 8x4 G4 M8`.
    pub fn tag(&self) -> String {
        let mut s = format!("{} {}x{}", self.scheme, self.n_tx, self.n_rx);
        if self.scheme.is_grouped() {
            s.push_str(&format!(" G{}", self.groups));
        }
        s.push_str(&format!(" M{}", self.mod_order));
        s
    }
}

/// One variant per violated constraint; [`ConfigError::field`] names the
/// offending field.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("n_rx must be at least 1")]
    NoReceiveAntennas,
    #[error("group_size {0} must be at least 2")]
    GroupSizeTooSmall(usize),
    #[error("group_size {0} is not a power of two")]
    GroupSizeNotPowerOfTwo(usize),
    #[error("groups ({groups}) x group_size ({group_size}) != n_tx ({n_tx})")]
    GroupProductMismatch {
        n_tx: usize,
        groups: usize,
        group_size: usize,
    },
    #[error("parallel schemes need n_tx > 2, got {0}")]
    TooFewTransmitAntennas(usize),
    #[error("parallel schemes need groups > 1, got {0}")]
    TooFewGroups(usize),
    #[error("groups {groups} exceeds n_tx / 2 = {half}")]
    TooManyGroups { groups: usize, half: usize },
    #[error("SM and TI-SM use a single group, got groups = {0}")]
    SingleGroupRequired(usize),
    #[error("SM and TI-SM need a power-of-two n_tx, got {0}")]
    TransmitAntennasNotPowerOfTwo(usize),
    #[error("mod_order {0} is not a power of two")]
    ModOrderNotPowerOfTwo(usize),
    #[error("QAM needs a square mod_order or M = 2, got {0}")]
    QamOrderNotSquare(usize),
    #[error("frame_slots must be at least 1")]
    NoFrameSlots,
    #[error("active_slots {active} outside [1, frame_slots = {frame}]")]
    ActiveSlotsOutOfRange { active: usize, frame: usize },
    #[error("taps must be at least 1")]
    NoTaps,
    #[error("taps {taps} exceeds frame_slots {frame}")]
    TapsExceedFrame { taps: usize, frame: usize },
    #[error("{scheme} uses single-slot frames (frame_slots = active_slots = taps = 1)")]
    SingleSlotFrameRequired { scheme: SchemeKind },
    #[error("{bits} bits per frame exceeds the supported maximum of {MAX_BITS_PER_FRAME}")]
    TooManyBitsPerFrame { bits: u32 },
}

impl ConfigError {
    pub fn field(&self) -> &'static str {
        use ConfigError::*;
        match self {
            NoReceiveAntennas => "n_rx",
            GroupSizeTooSmall(_) | GroupSizeNotPowerOfTwo(_) => "group_size",
            GroupProductMismatch { .. } => "group_size",
            TooFewTransmitAntennas(_) | TransmitAntennasNotPowerOfTwo(_) => "n_tx",
            TooFewGroups(_) | TooManyGroups { .. } | SingleGroupRequired(_) => "groups",
            ModOrderNotPowerOfTwo(_) | QamOrderNotSquare(_) => "mod_order",
            NoFrameSlots => "frame_slots",
            ActiveSlotsOutOfRange { .. } => "active_slots",
            NoTaps | TapsExceedFrame { .. } => "taps",
            SingleSlotFrameRequired { .. } => "frame_slots",
            TooManyBitsPerFrame { .. } => "mod_order",
        }
    }
}

/// A [`SchemeConfig`] that satisfies every structural constraint, together
/// with the derived bit-field widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ValidatedConfig {
    config: SchemeConfig,
    tap_bits: u32,
    antenna_bits_per_group: u32,
    symbol_bits: u32,
}

impl Deref for ValidatedConfig {
    type Target = SchemeConfig;

    fn deref(&self) -> &SchemeConfig {
        &self.config
    }
}

impl ValidatedConfig {
    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    /// `p = floor(log2 C(T, T_a))`, the number of time-index bits.
    pub fn tap_bits(&self) -> u32 {
        self.tap_bits
    }

    /// `log2 N_tg`.
    pub fn antenna_bits_per_group(&self) -> u32 {
        self.antenna_bits_per_group
    }

    /// `G log2 N_tg`, antenna-index bits carried by one active slot.
    pub fn antenna_bits_per_slot(&self) -> u32 {
        self.antenna_bits_per_group * self.groups as u32
    }

    /// `log2 M`.
    pub fn symbol_bits(&self) -> u32 {
        self.symbol_bits
    }

    /// Bits carried by one active slot (antenna plus symbol bits).
    pub fn bits_per_active_slot(&self) -> u32 {
        self.antenna_bits_per_slot() + self.symbol_bits
    }

    /// `p + T_a (G log2 N_tg + log2 M)`.
    pub fn bits_per_frame(&self) -> u32 {
        self.tap_bits + self.active_slots as u32 * self.bits_per_active_slot()
    }

    /// Frame duration in channel uses, `T + L - 1`.
    pub fn channel_uses(&self) -> usize {
        self.frame_slots + self.taps - 1
    }

    /// Number of antenna activation hypotheses in one slot, `N_tg^G`.
    pub fn antenna_patterns(&self) -> usize {
        1 << self.antenna_bits_per_slot()
    }

    /// Amplitude applied to each active antenna.
    pub fn antenna_gain(&self) -> f64 {
        match self.normalization {
            Normalization::PerSlotUnit => 1.0 / (self.groups as f64).sqrt(),
            Normalization::PerAntennaUnit => 1.0,
        }
    }

    /// Average transmit energy of one active slot.
    pub fn active_slot_energy(&self) -> f64 {
        match self.normalization {
            Normalization::PerSlotUnit => 1.0,
            Normalization::PerAntennaUnit => self.groups as f64,
        }
    }

    /// Spectral efficiency in bits per channel use as an exact rational.
    pub fn spectral_efficiency(&self) -> Ratio<u64> {
        spectral_efficiency(self)
    }

    pub fn codebook_size(&self) -> u128 {
        codebook_size(self)
    }
}

fn is_pow2(n: usize) -> bool {
    n != 0 && n.is_power_of_two()
}

fn log2_exact(n: usize) -> u32 {
    debug_assert!(is_pow2(n));
    n.trailing_zeros()
}

/// Binomial coefficient `C(n, k)`; saturates at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step
        acc = match acc.checked_mul(u128::from(n - i)) {
            Some(v) => v / u128::from(i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// `floor(log2 C(n, k))`, or 0 when `C(n, k) <= 1`.
pub fn floor_log2_binomial(n: usize, k: usize) -> u32 {
    let c = binomial(n as u64, k as u64);
    if c == 0 {
        0
    } else {
        127 - c.leading_zeros()
    }
}

/// Checks every structural constraint of a scheme and returns the first
/// violation found.
pub fn validate(config: SchemeConfig) -> Result<ValidatedConfig, ConfigError> {
    let c = &config;
    if c.n_rx == 0 {
        return Err(ConfigError::NoReceiveAntennas);
    }
    if !c.scheme.is_grouped() {
        if c.groups != 1 {
            return Err(ConfigError::SingleGroupRequired(c.groups));
        }
        if c.n_tx < 2 {
            return Err(ConfigError::TooFewTransmitAntennas(c.n_tx));
        }
        if !is_pow2(c.n_tx) {
            return Err(ConfigError::TransmitAntennasNotPowerOfTwo(c.n_tx));
        }
    }
    if c.group_size < 2 {
        return Err(ConfigError::GroupSizeTooSmall(c.group_size));
    }
    if !is_pow2(c.group_size) {
        return Err(ConfigError::GroupSizeNotPowerOfTwo(c.group_size));
    }
    if c.groups.checked_mul(c.group_size) != Some(c.n_tx) {
        return Err(ConfigError::GroupProductMismatch {
            n_tx: c.n_tx,
            groups: c.groups,
            group_size: c.group_size,
        });
    }
    if c.scheme.is_grouped() {
        if c.n_tx <= 2 {
            return Err(ConfigError::TooFewTransmitAntennas(c.n_tx));
        }
        if c.groups <= 1 {
            return Err(ConfigError::TooFewGroups(c.groups));
        }
        if c.groups > c.n_tx / 2 {
            return Err(ConfigError::TooManyGroups {
                groups: c.groups,
                half: c.n_tx / 2,
            });
        }
    }
    if !is_pow2(c.mod_order) {
        return Err(ConfigError::ModOrderNotPowerOfTwo(c.mod_order));
    }
    if c.constellation_family == ConstellationFamily::Qam
        && c.mod_order != 2
        && log2_exact(c.mod_order) % 2 != 0
    {
        return Err(ConfigError::QamOrderNotSquare(c.mod_order));
    }
    if c.frame_slots == 0 {
        return Err(ConfigError::NoFrameSlots);
    }
    if c.active_slots == 0 || c.active_slots > c.frame_slots {
        return Err(ConfigError::ActiveSlotsOutOfRange {
            active: c.active_slots,
            frame: c.frame_slots,
        });
    }
    if c.taps == 0 {
        return Err(ConfigError::NoTaps);
    }
    if c.taps > c.frame_slots {
        return Err(ConfigError::TapsExceedFrame {
            taps: c.taps,
            frame: c.frame_slots,
        });
    }
    if !c.scheme.is_time_indexed() && (c.frame_slots != 1 || c.active_slots != 1 || c.taps != 1) {
        return Err(ConfigError::SingleSlotFrameRequired { scheme: c.scheme });
    }

    let tap_bits = floor_log2_binomial(c.frame_slots, c.active_slots);
    let antenna_bits_per_group = log2_exact(c.group_size);
    let symbol_bits = log2_exact(c.mod_order);
    let bits = u64::from(tap_bits)
        + c.active_slots as u64 * (c.groups as u64 * u64::from(antenna_bits_per_group) + u64::from(symbol_bits));
    if bits > u64::from(MAX_BITS_PER_FRAME) {
        return Err(ConfigError::TooManyBitsPerFrame {
            bits: bits.min(u64::from(u32::MAX)) as u32,
        });
    }
    Ok(ValidatedConfig {
        config,
        tap_bits,
        antenna_bits_per_group,
        symbol_bits,
    })
}

/// Exact rate in bits per channel use.
///
/// PSM: `G log2 N_tg + log2 M` (SM is the `G = 1` case). Time-indexed schemes
/// divide the frame payload `floor(log2 C(T, T_a)) + T_a (G log2 N_tg + log2 M)`
/// by the frame duration `T + L - 1`.
pub fn spectral_efficiency(config: &ValidatedConfig) -> Ratio<u64> {
    Ratio::new(
        u64::from(config.bits_per_frame()),
        config.channel_uses() as u64,
    )
}

/// Number of distinct frame signals,
/// `2^floor(log2 C(T, T_a)) * (N_tg^G M)^T_a`. For SM/PSM this reduces to
/// `N_t M` and `N_tg^G M`.
pub fn codebook_size(config: &ValidatedConfig) -> u128 {
    let per_slot = (config.group_size as u128).pow(config.groups as u32) * config.mod_order as u128;
    (1u128 << config.tap_bits()) * per_slot.pow(config.active_slots as u32)
}

/// Solves the rate equation for `M` given a target spectral efficiency.
///
/// `mod_order` of the supplied config is ignored. Returns `None` when no
/// power-of-two `M >= 2` attains the rate exactly.
pub fn solve_mod_order(config: &SchemeConfig, target: Ratio<u64>) -> Option<usize> {
    let mut probe = *config;
    probe.mod_order = 2;
    // M only enters through the symbol bits; the rest of the validation is
    // independent of it.
    let family = probe.constellation_family;
    probe.constellation_family = ConstellationFamily::Psk;
    let v = validate(probe).ok()?;
    let total = target * Ratio::from_integer(v.channel_uses() as u64);
    if !total.is_integer() {
        return None;
    }
    let total = total.to_integer();
    let fixed = u64::from(v.tap_bits()) + v.active_slots as u64 * u64::from(v.antenna_bits_per_slot());
    let rest = total.checked_sub(fixed)?;
    let active = v.active_slots as u64;
    if rest == 0 || rest % active != 0 {
        return None;
    }
    let symbol_bits = rest / active;
    if symbol_bits >= 32 {
        return None;
    }
    let m = 1usize << symbol_bits;
    probe.mod_order = m;
    probe.constellation_family = family;
    validate(probe).ok().map(|_| m)
}

//! Rayleigh fading, the cyclic-prefix equivalent frame channel, AWGN and
//! imperfect channel state information.
//!
//! A frame of `T` data slots is preceded by an `L - 1` slot cyclic prefix.
//! After the prefix is stripped, slot `r` at the receiver sees
//! `y_r = sum_l H[r][l] s_{(r - l) mod T} + n_r`, which is the block-circulant
//! matrix returned by [`equivalent_matrix`]. For `L = 1` that matrix is
//! block-diagonal.
//!
//! All variances are total complex variances: a `CN(0, v)` sample has
//! independent real and imaginary parts of variance `v / 2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::mapper::FrameSignal;
use crate::scheme::{ChannelTimeModel, ValidatedConfig};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("variance must be finite and non-negative, got {0}")]
    InvalidVariance(f64),
}

/// Draws one `CN(0, variance)` sample.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let sd = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, variance: f64) -> CMatrix {
    // from_iterator fills column-major, which fixes the draw order
    CMatrix::from_iterator(rows, cols, (0..rows * cols).map(|_| complex_gaussian(rng, variance)))
}

/// Per-slot, per-tap `N_r x N_t` channel matrices of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    n_rx: usize,
    n_tx: usize,
    frame_slots: usize,
    taps: usize,
    // index t * taps + l
    matrices: Vec<CMatrix>,
}

impl ChannelRealization {
    pub fn from_matrices(
        n_rx: usize,
        n_tx: usize,
        frame_slots: usize,
        taps: usize,
        matrices: Vec<CMatrix>,
    ) -> Result<Self, ChannelError> {
        if matrices.len() != frame_slots * taps {
            return Err(ChannelError::DimensionMismatch {
                expected: frame_slots * taps,
                got: matrices.len(),
            });
        }
        for m in &matrices {
            if m.shape() != (n_rx, n_tx) {
                return Err(ChannelError::DimensionMismatch {
                    expected: n_rx * n_tx,
                    got: m.len(),
                });
            }
        }
        Ok(ChannelRealization {
            n_rx,
            n_tx,
            frame_slots,
            taps,
            matrices,
        })
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn frame_slots(&self) -> usize {
        self.frame_slots
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    /// `H[t][l]`: tap `l` of the channel seen by receive slot `t`.
    pub fn slot_tap(&self, t: usize, l: usize) -> &CMatrix {
        &self.matrices[t * self.taps + l]
    }

    pub fn equivalent(&self) -> CMatrix {
        let (nr, nt, big_t) = (self.n_rx, self.n_tx, self.frame_slots);
        let mut h = CMatrix::zeros(big_t * nr, big_t * nt);
        for r in 0..big_t {
            for l in 0..self.taps {
                let c = (r + big_t - l) % big_t;
                h.view_mut((r * nr, c * nt), (nr, nt))
                    .copy_from(self.slot_tap(r, l));
            }
        }
        h
    }

    /// Plain-text dump, one matrix per block, rows on separate lines.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# channel n_rx={} n_tx={} frame_slots={} taps={}\n",
            self.n_rx, self.n_tx, self.frame_slots, self.taps
        );
        for t in 0..self.frame_slots {
            for l in 0..self.taps {
                out.push_str(&format!("H[{t}][{l}]\n"));
                let m = self.slot_tap(t, l);
                for i in 0..self.n_rx {
                    let row: Vec<String> = (0..self.n_tx)
                        .map(|j| format!("{:+.17e}{:+.17e}i", m[(i, j)].re, m[(i, j)].im))
                        .collect();
                    out.push_str(&row.join(" "));
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// Complex noise variance per receive dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    n0: f64,
}

impl NoiseSpec {
    pub fn new(n0: f64) -> Result<Self, ChannelError> {
        if n0.is_finite() && n0 >= 0.0 {
            Ok(NoiseSpec { n0 })
        } else {
            Err(ChannelError::InvalidVariance(n0))
        }
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }
}

/// Complex variance of each channel estimation error entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsiErrorSpec {
    sigma_e2: f64,
}

impl CsiErrorSpec {
    pub fn new(sigma_e2: f64) -> Result<Self, ChannelError> {
        if sigma_e2.is_finite() && sigma_e2 >= 0.0 {
            Ok(CsiErrorSpec { sigma_e2 })
        } else {
            Err(ChannelError::InvalidVariance(sigma_e2))
        }
    }

    /// Error variance tied to the noise variance.
    pub fn matched(noise: NoiseSpec) -> Self {
        CsiErrorSpec { sigma_e2: noise.n0 }
    }

    pub fn sigma_e2(&self) -> f64 {
        self.sigma_e2
    }
}

/// Reference energy of the SNR axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SnrAxis {
    /// Average energy of an active slot over `N0`.
    #[default]
    EsN0,
    /// Transmitted energy per information bit over `N0`.
    EbN0,
    /// Unit constellation symbol energy over `N0`, whatever the slot energy.
    SymbolEsN0,
}

/// Noise variance for an SNR in dB.
pub fn snr_to_n0(snr_db: f64, config: &ValidatedConfig, axis: SnrAxis) -> NoiseSpec {
    let linear = 10f64.powf(snr_db / 10.0);
    let reference = match axis {
        SnrAxis::EsN0 => config.active_slot_energy(),
        SnrAxis::EbN0 => {
            config.active_slots as f64 * config.active_slot_energy() / f64::from(config.bits_per_frame())
        }
        SnrAxis::SymbolEsN0 => 1.0,
    };
    NoiseSpec { n0: reference / linear }
}

/// Draws a frame channel; entries are i.i.d. `CN(0, 1/L)`.
///
/// Draw order: slots ascending, taps ascending, entries column-major. A
/// quasi-static channel draws only slot 0 and repeats it.
pub fn draw_channel<R: Rng + ?Sized>(config: &ValidatedConfig, rng: &mut R) -> ChannelRealization {
    let variance = 1.0 / config.taps as f64;
    let (nr, nt) = (config.n_rx, config.n_tx);
    let matrices = match config.channel_time_model {
        ChannelTimeModel::PerSlotIid => (0..config.frame_slots * config.taps)
            .map(|_| gaussian_matrix(rng, nr, nt, variance))
            .collect(),
        ChannelTimeModel::PerFrameQuasiStatic => {
            let first: Vec<CMatrix> = (0..config.taps)
                .map(|_| gaussian_matrix(rng, nr, nt, variance))
                .collect();
            (0..config.frame_slots).flat_map(|_| first.iter().cloned()).collect()
        }
    };
    ChannelRealization {
        n_rx: nr,
        n_tx: nt,
        frame_slots: config.frame_slots,
        taps: config.taps,
        matrices,
    }
}

/// The `T N_r x T N_t` block-circulant frame channel.
pub fn equivalent_matrix(realization: &ChannelRealization) -> CMatrix {
    realization.equivalent()
}

fn add_noise<R: Rng + ?Sized>(y: &mut CVector, noise: NoiseSpec, rng: &mut R) {
    if noise.n0 > 0.0 {
        for v in y.iter_mut() {
            *v += complex_gaussian(rng, noise.n0);
        }
    }
}

/// `y = H s + n` with the full equivalent matrix.
pub fn apply_channel<R: Rng + ?Sized>(
    equivalent: &CMatrix,
    signal: &FrameSignal,
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<CVector, ChannelError> {
    if equivalent.ncols() != signal.values.len() {
        return Err(ChannelError::DimensionMismatch {
            expected: equivalent.ncols(),
            got: signal.values.len(),
        });
    }
    let s = CVector::from_column_slice(&signal.values);
    let mut y = equivalent * s;
    add_noise(&mut y, noise, rng);
    Ok(y)
}

/// Same result as [`apply_channel`] on the equivalent matrix, computed block
/// by block without assembling it. Noise is drawn in the same order.
pub fn apply_channel_blocks<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    signal: &FrameSignal,
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<CVector, ChannelError> {
    let (nr, nt, big_t) = (realization.n_rx, realization.n_tx, realization.frame_slots);
    if signal.values.len() != big_t * nt {
        return Err(ChannelError::DimensionMismatch {
            expected: big_t * nt,
            got: signal.values.len(),
        });
    }
    let mut y = CVector::zeros(big_t * nr);
    for r in 0..big_t {
        for l in 0..realization.taps {
            let src = signal.slot((r + big_t - l) % big_t);
            let h = realization.slot_tap(r, l);
            for (j, &x) in src.iter().enumerate() {
                if x == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let col = h.column(j);
                for i in 0..nr {
                    y[r * nr + i] += col[i] * x;
                }
            }
        }
    }
    add_noise(&mut y, noise, rng);
    Ok(y)
}

/// `H_hat = H - E` applied to the structurally nonzero blocks only, i.e. to
/// every distinct `H[t][l]`. A quasi-static channel is estimated once.
pub fn corrupt_csi<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    spec: CsiErrorSpec,
    time_model: ChannelTimeModel,
    rng: &mut R,
) -> ChannelRealization {
    if spec.sigma_e2 == 0.0 {
        return realization.clone();
    }
    let (nr, nt) = (realization.n_rx, realization.n_tx);
    let matrices = match time_model {
        ChannelTimeModel::PerSlotIid => realization
            .matrices
            .iter()
            .map(|h| h - gaussian_matrix(rng, nr, nt, spec.sigma_e2))
            .collect(),
        ChannelTimeModel::PerFrameQuasiStatic => {
            let first: Vec<CMatrix> = realization.matrices[..realization.taps]
                .iter()
                .map(|h| h - gaussian_matrix(rng, nr, nt, spec.sigma_e2))
                .collect();
            (0..realization.frame_slots)
                .flat_map(|_| first.iter().cloned())
                .collect()
        }
    };
    ChannelRealization {
        matrices,
        ..*realization
    }
}

/// `H_hat = H - E` over every entry of the equivalent matrix, structural
/// zeros included.
pub fn corrupt_csi_full<R: Rng + ?Sized>(
    equivalent: &CMatrix,
    spec: CsiErrorSpec,
    rng: &mut R,
) -> CMatrix {
    if spec.sigma_e2 == 0.0 {
        return equivalent.clone();
    }
    equivalent - gaussian_matrix(rng, equivalent.nrows(), equivalent.ncols(), spec.sigma_e2)
}

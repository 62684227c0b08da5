//! Gray-labeled PSK and square QAM alphabets with unit average energy.
//!
//! A symbol is addressed by its *label*, the integer value of its
//! `log2 M` bits, so `points()[m]` is the point transmitted for bits `m`.
//! Gray coding lives in the geometry: for PSK the label `m` sits at ring
//! position `gray_decode(m)`, for QAM each axis level is Gray-decoded from its
//! half of the label.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ConstellationFamily {
    #[default]
    #[serde(rename = "psk")]
    Psk,
    #[serde(rename = "qam")]
    Qam,
}

impl std::fmt::Display for ConstellationFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConstellationFamily::Psk => "PSK",
            ConstellationFamily::Qam => "QAM",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unsupported constellation: {family} with M = {order}")]
pub struct UnsupportedConstellation {
    pub order: usize,
    pub family: ConstellationFamily,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    family: ConstellationFamily,
    bits_per_symbol: u32,
    points: Vec<Complex64>,
}

pub fn gray_encode(n: usize) -> usize {
    n ^ (n >> 1)
}

pub fn gray_decode(mut g: usize) -> usize {
    let mut n = g;
    while g > 1 {
        g >>= 1;
        n ^= g;
    }
    n
}

/// Snaps values within a few ulps of zero, so points on the axes are exact.
fn snap(x: f64) -> f64 {
    if x.abs() < 1e-15 {
        0.0
    } else {
        x
    }
}

impl Constellation {
    pub fn family(&self) -> ConstellationFamily {
        self.family
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    /// Points indexed by label.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    /// Bit string of a label, most significant bit first.
    pub fn bit_label(&self, label: usize) -> Vec<u8> {
        (0..self.bits_per_symbol)
            .rev()
            .map(|b| ((label >> b) & 1) as u8)
            .collect()
    }

    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }
}

/// Builds a unit-average-energy Gray-labeled alphabet.
///
/// QAM requires a square `M`; `M = 2` degenerates to BPSK for either family.
pub fn build_constellation(
    order: usize,
    family: ConstellationFamily,
) -> Result<Constellation, UnsupportedConstellation> {
    let unsupported = UnsupportedConstellation { order, family };
    if order < 2 || !order.is_power_of_two() {
        return Err(unsupported);
    }
    let bits = order.trailing_zeros();
    let points = match family {
        _ if order == 2 => vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
        ConstellationFamily::Psk => (0..order)
            .map(|label| {
                let phase = 2.0 * PI * gray_decode(label) as f64 / order as f64;
                Complex64::new(snap(phase.cos()), snap(phase.sin()))
            })
            .collect(),
        ConstellationFamily::Qam => {
            if bits % 2 != 0 {
                return Err(unsupported);
            }
            let half = bits / 2;
            let side = 1usize << half;
            let mask = side - 1;
            let scale = (3.0 / (2.0 * (order as f64 - 1.0))).sqrt();
            let level = |g: usize| (2.0 * gray_decode(g) as f64 - (side as f64 - 1.0)) * scale;
            (0..order)
                .map(|label| Complex64::new(level(label >> half), level(label & mask)))
                .collect()
        }
    };
    Ok(Constellation {
        family,
        bits_per_symbol: bits,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hamming(a: usize, b: usize) -> u32 {
        (a ^ b).count_ones()
    }

    #[test]
    fn bpsk_is_plus_minus_one() {
        for family in [ConstellationFamily::Psk, ConstellationFamily::Qam] {
            let c = build_constellation(2, family).unwrap();
            assert_eq!(c.points(), &[Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]);
        }
    }

    #[test]
    fn qpsk_ring_labels() {
        let c = build_constellation(4, ConstellationFamily::Psk).unwrap();
        let ring: Vec<usize> = (0..4).map(gray_encode).collect();
        assert_eq!(ring, vec![0b00, 0b01, 0b11, 0b10]);
        for (pos, &label) in ring.iter().enumerate() {
            let expected = Complex64::from_polar(1.0, PI / 2.0 * pos as f64);
            assert!((c.point(label) - expected).norm() < 1e-15);
        }
        assert_eq!(c.point(0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn qam16_lattice() {
        let c = build_constellation(16, ConstellationFamily::Qam).unwrap();
        let unit = 1.0 / 10f64.sqrt();
        let mut energy = 0.0;
        for p in c.points() {
            for v in [p.re, p.im] {
                let k = v / unit;
                assert!((k.abs() - 1.0).abs() < 1e-12 || (k.abs() - 3.0).abs() < 1e-12);
            }
            energy += p.norm_sqr();
        }
        assert!((energy / 16.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_energy_all_supported() {
        for bits in 1..=8 {
            let m = 1usize << bits;
            let c = build_constellation(m, ConstellationFamily::Psk).unwrap();
            assert!((c.average_energy() - 1.0).abs() < 1e-12);
            if bits % 2 == 0 || m == 2 {
                let c = build_constellation(m, ConstellationFamily::Qam).unwrap();
                assert!((c.average_energy() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unsupported_pairs() {
        assert!(build_constellation(8, ConstellationFamily::Qam).is_err());
        assert!(build_constellation(6, ConstellationFamily::Psk).is_err());
        assert!(build_constellation(1, ConstellationFamily::Psk).is_err());
    }

    #[test]
    fn psk_gray_neighbors_exhaustive() {
        for bits in 1..=6 {
            let m = 1usize << bits;
            let c = build_constellation(m, ConstellationFamily::Psk).unwrap();
            // recover ring order from geometry, not from the labeling rule
            let mut by_angle: Vec<(f64, usize)> = (0..m)
                .map(|l| {
                    let a = c.point(l).arg();
                    (if a < -1e-12 { a + 2.0 * PI } else { a.max(0.0) }, l)
                })
                .collect();
            by_angle.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for k in 0..m {
                let a = by_angle[k].1;
                let b = by_angle[(k + 1) % m].1;
                if m > 2 || k == 0 {
                    assert_eq!(hamming(a, b), 1, "M={m} labels {a} {b}");
                }
            }
            // distinct points
            for a in 0..m {
                for b in a + 1..m {
                    assert!((c.point(a) - c.point(b)).norm() > 1e-9);
                }
            }
        }
    }

    #[test]
    fn qam_gray_neighbors_exhaustive() {
        for m in [4usize, 16, 64] {
            let c = build_constellation(m, ConstellationFamily::Qam).unwrap();
            let d_min = (0..m)
                .flat_map(|a| (0..m).filter(move |&b| b != a).map(move |b| (a, b)))
                .map(|(a, b)| (c.point(a) - c.point(b)).norm())
                .fold(f64::INFINITY, f64::min);
            let mut neighbor_pairs = 0;
            for a in 0..m {
                for b in a + 1..m {
                    if ((c.point(a) - c.point(b)).norm() - d_min).abs() < 1e-9 {
                        assert_eq!(hamming(a, b), 1, "M={m} labels {a} {b}");
                        neighbor_pairs += 1;
                    }
                }
            }
            let side = (m as f64).sqrt() as usize;
            assert_eq!(neighbor_pairs, 2 * side * (side - 1));
        }
    }

    #[test]
    fn labels_are_a_bijection() {
        let c = build_constellation(16, ConstellationFamily::Psk).unwrap();
        let mut seen = std::collections::HashSet::new();
        for l in 0..16 {
            let bits = c.bit_label(l);
            assert_eq!(bits.len(), 4);
            let back = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            assert_eq!(back, l);
            assert!(seen.insert(bits));
        }
        for n in 0..256 {
            assert_eq!(gray_decode(gray_encode(n)), n);
        }
    }
}

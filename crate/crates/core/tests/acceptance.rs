//! Acceptance suite. Prints one PASS/FAIL line per criterion followed by the
//! measurements behind it, and exits nonzero when any criterion fails.
//!
//! `ACCEPTANCE_ONLY=4,6` restricts the run to the listed criteria.

use std::collections::{BTreeMap, HashSet};
use std::process::{Command, ExitCode, Stdio};
use std::time::Instant;

use num_complex::Complex64;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use imsim::channel::{
    apply_channel, apply_channel_blocks, corrupt_csi, draw_channel, snr_to_n0, CVector,
    ChannelRealization, CsiErrorSpec, NoiseSpec, SnrAxis,
};
use imsim::detector::{BruteForceDetector, DecomposedDetector};
use imsim::engine::{frame_rng, snr_at_ber, CeeScope, SimOptions};
use imsim::experiment::{parse_snr_grid, preset, run_experiment, ExperimentSpec};
use imsim::mapper::{
    codeword_to_signal, decode_frame, encode_frame, enumerate_codebook, word_to_bits,
    DEFAULT_ENUMERATION_CAP,
};
use imsim::scheme::{validate, ChannelTimeModel, Normalization, SchemeConfig, SchemeKind};
use imsim::{build_constellation, BerRecord, ConstellationFamily, CsiMode, Simulator, ValidatedConfig};

struct Outcome {
    pass: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, line: impl Into<String>) {
        self.pass &= ok;
        self.lines.push(format!("{} {}", if ok { "ok  " } else { "FAIL" }, line.into()));
    }

    fn info(&mut self, line: impl Into<String>) {
        self.lines.push(format!("     {}", line.into()));
    }
}

fn in_band(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo && x <= hi
}

/// Every distinct scheme used by the figure presets.
fn acceptance_configs() -> Vec<ValidatedConfig> {
    let mut out: Vec<ValidatedConfig> = Vec::new();
    for name in ["fig2", "fig3", "fig4", "fig5"] {
        let spec = preset(name, ConstellationFamily::Psk, Normalization::PerSlotUnit).unwrap();
        for c in spec.curves {
            if !out.contains(&c.config) {
                out.push(c.config);
            }
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let cfg = validate(SchemeConfig::ti_psm(8, 4, 4, 8, 4, 2)).unwrap();
    let k = build_constellation(cfg.mod_order, cfg.constellation_family).unwrap();
    let mut distinct = HashSet::new();
    let mut count = 0u64;
    for (_, signal) in enumerate_codebook(&cfg, &k, DEFAULT_ENUMERATION_CAP).unwrap() {
        count += 1;
        let key: Vec<(u64, u64)> = signal.values.iter().map(|v| (v.re.to_bits(), v.im.to_bits())).collect();
        distinct.insert(key);
    }
    o.check(count == 65536 && distinct.len() == 65536, format!("{count} codewords, {} distinct signal vectors", distinct.len()));
    let n = cfg.bits_per_frame();
    let failures = (0..1u64 << n)
        .filter(|&w| {
            let bits = word_to_bits(w, n);
            decode_frame(&encode_frame(&bits, &cfg).unwrap(), &cfg) != bits
        })
        .count();
    o.check(failures == 0, format!("round trip over all 2^{n} bit strings: {failures} failures"));
    let secs = start.elapsed().as_secs_f64();
    o.check(secs < 60.0, format!("runtime {secs:.1} s (< 60 s)"));
    o
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let configs = [
        SchemeConfig::ti_psm(8, 4, 4, 8, 4, 2),
        SchemeConfig::ti_sm(8, 4, 16, 4, 2),
        SchemeConfig::ti_psm(12, 4, 3, 2, 4, 2),
    ];
    const FRAMES: u64 = 10_000;
    for c in configs {
        let cfg = validate(c).unwrap();
        let k = build_constellation(cfg.mod_order, cfg.constellation_family).unwrap();
        let bf = BruteForceDetector::new(&cfg, &k, DEFAULT_ENUMERATION_CAP).unwrap();
        let dc = DecomposedDetector::new(&cfg, &k, DEFAULT_ENUMERATION_CAP).unwrap();
        let n = cfg.bits_per_frame();
        // SNR cycles over 0, 5, 10, 15 dB; odd frames detect against a
        // corrupted estimate
        let (disagree, metric_dev, errors) = (0..FRAMES)
            .into_par_iter()
            .map(|f| {
                let mut rng = frame_rng(0xacce_57, f);
                let snr = 5.0 * (f % 4) as f64;
                let noise = snr_to_n0(snr, &cfg, SnrAxis::EsN0);
                let bits = word_to_bits(rng.random::<u64>() & ((1u64 << n) - 1), n);
                let cw = encode_frame(&bits, &cfg).unwrap();
                let h = draw_channel(&cfg, &mut rng);
                let y = apply_channel_blocks(&h, &codeword_to_signal(&cw, &cfg, &k), noise, &mut rng).unwrap();
                let est = if f % 2 == 1 {
                    corrupt_csi(&h, CsiErrorSpec::matched(noise), cfg.channel_time_model, &mut rng)
                } else {
                    h
                };
                let a = bf.detect(&y, &est.equivalent()).unwrap();
                let b = dc.detect(&y, &est).unwrap();
                let dev = (a.metric - b.metric).abs() / a.metric.max(f64::MIN_POSITIVE);
                (u64::from(a.codeword != b.codeword), dev, u64::from(a.codeword != cw))
            })
            .reduce(|| (0, 0.0, 0), |x, y| (x.0 + y.0, x.1.max(y.1), x.2 + y.2));
        o.check(
            disagree == 0 && metric_dev <= 1e-9,
            format!(
                "{}: {FRAMES} frames, {disagree} codeword disagreements, max relative metric gap {metric_dev:.1e}, {errors} frames in error",
                cfg.tag()
            ),
        );
    }
    let secs = start.elapsed().as_secs_f64();
    o.check(secs < 600.0, format!("runtime {secs:.1} s (< 600 s)"));
    o
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    for cfg in acceptance_configs() {
        let sim = Simulator::new(&cfg, SimOptions::default()).unwrap();
        // 120 dB on the per-slot axis is n0 = 1e-12
        let snr = 120.0;
        let n0 = snr_to_n0(snr, &cfg, SnrAxis::EsN0).n0();
        let counts = sim.count_errors(snr, CsiMode::Perfect, 11, 10_000);
        o.check(
            counts.total() == 0 && (n0 - 1e-12).abs() < 1e-24,
            format!("{}: {} bit errors over 10^4 frames at n0 = {n0:.0e}", cfg.tag(), counts.total()),
        );
    }
    o
}

fn sweep(spec: &mut ExperimentSpec, options: SimOptions, floor: f64) -> BTreeMap<String, Vec<BerRecord>> {
    spec.snr_db = parse_snr_grid("0:1:45").unwrap();
    spec.ber_floor = Some(floor);
    let records = run_experiment(spec, options, |_| {}).unwrap();
    let mut out: BTreeMap<String, Vec<BerRecord>> = BTreeMap::new();
    for r in records {
        out.entry(r.label.clone()).or_default().push(r);
    }
    out
}

fn crossing(curves: &BTreeMap<String, Vec<BerRecord>>, label: &str, target: f64) -> f64 {
    let pts: Vec<(f64, f64)> = curves[label].iter().map(|r| (r.snr_db, r.ber)).collect();
    match snr_at_ber(&pts, target) {
        Ok(c) => c.snr_db,
        Err(_) => f64::NAN,
    }
}

struct Fig3Gaps {
    ti_sm_vs_tipsm8: f64,
    ti_sm_vs_tipsm12: f64,
    psm6_vs_tipsm8: f64,
    psm4_vs_tipsm8: f64,
}

impl Fig3Gaps {
    fn measure(normalization: Normalization, axis: SnrAxis) -> Fig3Gaps {
        let mut spec = preset("fig3", ConstellationFamily::Psk, normalization).unwrap();
        let options = SimOptions { axis, ..SimOptions::default() };
        let curves = sweep(&mut spec, options, 1e-4);
        let at = |l: &str| crossing(&curves, l, 1e-4);
        let tipsm8 = at("TI-PSM 8x4 G4");
        Fig3Gaps {
            ti_sm_vs_tipsm8: at("TI-SM 8x4") - tipsm8,
            ti_sm_vs_tipsm12: at("TI-SM 8x4") - at("TI-PSM 12x4 G3"),
            psm6_vs_tipsm8: at("PSM 6x4 G3") - tipsm8,
            psm4_vs_tipsm8: at("PSM 4x4 G2") - tipsm8,
        }
    }

    fn judge(&self, o: &mut Outcome, tag: &str) -> bool {
        let checks = [
            (
                in_band(self.ti_sm_vs_tipsm8, 2.5, 6.0),
                format!("{tag}: TI-PSM 8x4 G4 over TI-SM 8x4 = {:.2} dB, band [2.5, 6.0]", self.ti_sm_vs_tipsm8),
            ),
            (
                in_band(self.ti_sm_vs_tipsm12, 3.5, 7.5),
                format!("{tag}: TI-PSM 12x4 G3 over TI-SM 8x4 = {:.2} dB, band [3.5, 7.5]", self.ti_sm_vs_tipsm12),
            ),
            (
                self.psm6_vs_tipsm8 > 0.0 && in_band(self.psm6_vs_tipsm8, 4.0, 9.0),
                format!("{tag}: TI-PSM 8x4 G4 over PSM 6x4 G3 = {:.2} dB, band 6.5 +- 2.5", self.psm6_vs_tipsm8),
            ),
            (
                self.psm4_vs_tipsm8 > 0.0 && in_band(self.psm4_vs_tipsm8, 6.0, 11.0),
                format!("{tag}: TI-PSM 8x4 G4 over PSM 4x4 G2 = {:.2} dB, band 8.5 +- 2.5", self.psm4_vs_tipsm8),
            ),
            (
                self.psm4_vs_tipsm8 > self.psm6_vs_tipsm8,
                format!("{tag}: gain over PSM 4x4 G2 exceeds gain over PSM 6x4 G3"),
            ),
        ];
        let all = checks.iter().all(|c| c.0);
        for (ok, line) in checks {
            o.info(format!("{} {line}", if ok { "in band " } else { "OUT     " }));
        }
        all
    }
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    o.info("BER 1e-4, PSK, 1 dB grid, default stopping rule, gaps interpolated in log10(BER)");
    let slot = Fig3Gaps::measure(Normalization::PerSlotUnit, SnrAxis::EsN0);
    let mut pass = slot.judge(&mut o, "per-slot-unit");
    if !pass {
        // rerun with the alternative power normalization, on the per-slot
        // energy axis and on the unit-symbol axis
        let ant = Fig3Gaps::measure(Normalization::PerAntennaUnit, SnrAxis::EsN0);
        let ant_pass = ant.judge(&mut o, "per-antenna-unit, slot-energy axis");
        let ant_sym = Fig3Gaps::measure(Normalization::PerAntennaUnit, SnrAxis::SymbolEsN0);
        let ant_sym_pass = ant_sym.judge(&mut o, "per-antenna-unit, unit-symbol axis");
        pass = ant_pass || ant_sym_pass;
    }
    o.check(pass, "all fig3 gaps in band under at least one normalization");
    o.info(format!("runtime {:.0} s", start.elapsed().as_secs_f64()));
    o
}

fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    match preset("fig2", ConstellationFamily::Qam, Normalization::PerSlotUnit) {
        Ok(_) => o.info("QAM: preset available"),
        Err(e) => o.info(format!("QAM: not run ({e})")),
    }
    let mut spec = preset("fig2", ConstellationFamily::Psk, Normalization::PerSlotUnit).unwrap();
    spec.retain_csi(CsiMode::Perfect);
    let curves = sweep(&mut spec, SimOptions::default(), 1e-4);
    let sm = crossing(&curves, "SM 8x4", 1e-4);
    let psm8 = crossing(&curves, "PSM 8x4 G4", 1e-4);
    let psm10 = crossing(&curves, "PSM 10x4 G5", 1e-4);
    o.info(format!("family PSK, required SNR at BER 1e-4: SM 8x4 {sm:.2} dB, PSM 8x4 G4 {psm8:.2} dB, PSM 10x4 G5 {psm10:.2} dB"));
    o.check(psm10 < psm8 && psm8 < sm, "ordering PSM 10x4 G5 < PSM 8x4 G4 < SM 8x4");
    o.check(in_band(sm - psm8, 3.5, 8.5), format!("PSM 8x4 G4 over SM 8x4 = {:.2} dB, band 6.0 +- 2.5", sm - psm8));
    o.check(in_band(sm - psm10, 5.0, 10.0), format!("PSM 10x4 G5 over SM 8x4 = {:.2} dB, band 7.5 +- 2.5", sm - psm10));
    o
}

fn self_gaps(name: &str, options: SimOptions) -> BTreeMap<String, f64> {
    let mut spec = preset(name, ConstellationFamily::Psk, Normalization::PerSlotUnit).unwrap();
    let curves = sweep(&mut spec, options, 1e-3);
    let mut out = BTreeMap::new();
    for c in spec.curves.iter().filter(|c| c.csi == CsiMode::Perfect) {
        let cee = format!("{} CEE", c.label);
        out.insert(c.label.clone(), crossing(&curves, &cee, 1e-3) - crossing(&curves, &c.label, 1e-3));
    }
    out
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    o.info("BER 1e-3, PSK, sigma_e^2 = N0, estimation error over the whole T N_r x T N_t equivalent matrix");
    let full = SimOptions { cee_scope: CeeScope::FullMatrix, ..SimOptions::default() };
    let mut gaps = self_gaps("fig2", full);
    gaps.extend(self_gaps("fig4", full));
    gaps.extend(self_gaps("fig5", full));
    let is_ti = |l: &str| l.starts_with("TI-");
    for (label, g) in &gaps {
        let (lo, hi) = if is_ti(label) { (4.0, 7.0) } else { (2.0, 4.5) };
        o.check(in_band(*g, lo, hi), format!("{label}: CEE degradation {g:.2} dB, band [{lo}, {hi}]"));
    }
    for (ti, plain) in [
        ("TI-SM 8x4", "SM 8x4"),
        ("TI-PSM 8x4 G4", "PSM 8x4 G4"),
        ("TI-PSM 12x4 G3", "PSM 6x4 G3"),
    ] {
        o.check(
            gaps[ti] > gaps[plain],
            format!("{ti} degrades more than {plain}: {:.2} > {:.2} dB", gaps[ti], gaps[plain]),
        );
    }
    let structural = self_gaps("fig4", SimOptions::default());
    for (label, g) in &structural {
        o.info(format!("diagonal-block estimation error only: {label} degrades {g:.2} dB"));
    }
    o.info(format!("runtime {:.0} s", start.elapsed().as_secs_f64()));
    o
}

/// Received frame through an explicit cyclic prefix and tap-by-tap
/// convolution: the transmitter prepends the last `L - 1` slots, receive
/// slot `k` of the extended frame sees `sum_l H[k][l] x[k - l]`, and the
/// first `L - 1` outputs are discarded.
fn cp_convolution(h: &ChannelRealization, slots: &[Vec<Complex64>]) -> Vec<Complex64> {
    let (nr, big_t, taps) = (h.n_rx(), h.frame_slots(), h.taps());
    let mut extended: Vec<&Vec<Complex64>> = slots[big_t - (taps - 1)..].iter().collect();
    extended.extend(slots.iter());
    let mut out = Vec::with_capacity(big_t * nr);
    for t in 0..big_t {
        let k = t + taps - 1;
        for i in 0..nr {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..taps {
                let x = extended[k - l];
                let m = h.slot_tap(t, l);
                for (j, xv) in x.iter().enumerate() {
                    acc += m[(i, j)] * xv;
                }
            }
            out.push(acc);
        }
    }
    out
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(77);

    // block-diagonal structure for single-tap frames
    let mut offenders = 0;
    for c in [
        SchemeConfig::ti_psm(8, 4, 4, 8, 4, 2),
        SchemeConfig::ti_sm(8, 4, 16, 4, 2),
        SchemeConfig::ti_psm(12, 4, 3, 2, 4, 2),
        SchemeConfig::psm(10, 4, 5, 8),
    ] {
        let cfg = validate(c).unwrap();
        for _ in 0..100 {
            let h = draw_channel(&cfg, &mut rng);
            let eq = h.equivalent();
            let (nr, nt) = (cfg.n_rx, cfg.n_tx);
            for r in 0..cfg.frame_slots {
                for col in 0..cfg.frame_slots {
                    let block = eq.view((r * nr, col * nt), (nr, nt));
                    let ok = if r == col {
                        block == *h.slot_tap(r, 0)
                    } else {
                        block.iter().all(|v| *v == Complex64::new(0.0, 0.0))
                    };
                    offenders += usize::from(!ok);
                }
            }
        }
    }
    o.check(offenders == 0, format!("L = 1 equivalent matrices exactly block diagonal ({offenders} bad blocks)"));

    // two-tap frames against the cyclic-prefix oracle
    let cfg = validate(SchemeConfig::ti_psm(8, 4, 4, 8, 4, 2).with_taps(2)).unwrap();
    let k = build_constellation(cfg.mod_order, cfg.constellation_family).unwrap();
    let n = cfg.bits_per_frame();
    let zero = NoiseSpec::new(0.0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let bits = word_to_bits(rng.random::<u64>() & ((1u64 << n) - 1), n);
        let s = codeword_to_signal(&encode_frame(&bits, &cfg).unwrap(), &cfg, &k);
        let h = draw_channel(&cfg, &mut rng);
        let slots: Vec<Vec<Complex64>> = (0..cfg.frame_slots).map(|t| s.slot(t).to_vec()).collect();
        let oracle = CVector::from_vec(cp_convolution(&h, &slots));
        for y in [
            apply_channel(&h.equivalent(), &s, zero, &mut rng).unwrap(),
            apply_channel_blocks(&h, &s, zero, &mut rng).unwrap(),
        ] {
            worst = worst.max((y - &oracle).norm() / oracle.norm());
        }
    }
    o.check(worst <= 1e-9, format!("L = 2 against cyclic-prefix convolution, 10^3 frames: max relative error {worst:.1e}"));

    // second moments over 10^6 samples; |z|^2 of CN(0, v) has mean v and
    // standard deviation v
    let within = |samples: &[Complex64], v: f64| -> (f64, f64, bool) {
        let n = samples.len() as f64;
        let mean = samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        let z = (mean - v) / (v / n.sqrt());
        (mean, z, z.abs() <= 3.0)
    };
    let one_tap = validate(SchemeConfig::ti_psm(8, 4, 4, 8, 4, 2)).unwrap();
    let mut entries = Vec::with_capacity(1_000_000);
    while entries.len() < 1_000_000 {
        let h = draw_channel(&cfg, &mut rng);
        for t in 0..cfg.frame_slots {
            for l in 0..cfg.taps {
                entries.extend(h.slot_tap(t, l).iter().copied());
            }
        }
    }
    entries.truncate(1_000_000);
    let (m, z, ok) = within(&entries, 0.5);
    o.check(ok, format!("channel entries, L = 2: mean |h|^2 {m:.5} vs 0.5 ({z:+.2} SE)"));
    let re_mean = entries.iter().map(|v| v.re).sum::<f64>() / 1e6;
    let z_re = re_mean / (0.25f64.sqrt() / 1e3);
    o.check(z_re.abs() <= 3.0, format!("channel entries, L = 2: mean Re h {re_mean:+.5} ({z_re:+.2} SE)"));

    let noise = NoiseSpec::new(0.3).unwrap();
    let silent = imsim::mapper::FrameSignal::zeros(&one_tap);
    let mut samples = Vec::with_capacity(1_000_000);
    let mut errors = Vec::with_capacity(1_000_000);
    while samples.len() < 1_000_000 {
        let h = draw_channel(&one_tap, &mut rng);
        samples.extend(apply_channel_blocks(&h, &silent, noise, &mut rng).unwrap().iter().copied());
        let est = corrupt_csi(&h, CsiErrorSpec::new(0.2).unwrap(), ChannelTimeModel::PerSlotIid, &mut rng);
        for t in 0..one_tap.frame_slots {
            errors.extend((h.slot_tap(t, 0) - est.slot_tap(t, 0)).iter().copied());
        }
    }
    samples.truncate(1_000_000);
    errors.truncate(1_000_000);
    let (m, z, ok) = within(&samples, 0.3);
    o.check(ok, format!("noise, n0 = 0.3: mean |n|^2 {m:.5} ({z:+.2} SE)"));
    let (m, z, ok) = within(&errors, 0.2);
    o.check(ok, format!("estimation error, sigma_e^2 = 0.2: mean |e|^2 {m:.5} ({z:+.2} SE)"));
    o
}

fn criterion_8() -> Outcome {
    let mut o = Outcome::new();
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, out: &str| -> Vec<u8> {
        let out = dir.path().join(out);
        let status = Command::new(env!("CARGO_BIN_EXE_imsim"))
            .args(["simulate", "--preset", "fig5", "--snr", "0:4:12", "--seed", "99"])
            .args(["--min-errors", "50", "--min-frames", "1000", "--max-frames", "4000", "--quiet"])
            .args(["--threads", threads, "--out"])
            .arg(&out)
            .stdout(Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.join("fig5.csv")).unwrap()
    };
    let a = run("1", "a");
    let b = run("1", "b");
    let c = run("8", "c");
    o.check(a == b, format!("two runs with --threads 1 byte-identical ({} bytes)", a.len()));
    o.check(a == c, "--threads 1 and --threads 8 byte-identical");
    o
}

fn criterion_9() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let binomial = |n: u64, k: u64| (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1));
    let mut checked = 0;
    let mut bad = 0;
    while checked < 200 {
        let kind = [SchemeKind::Sm, SchemeKind::Psm, SchemeKind::TiSm, SchemeKind::TiPsm][rng.random_range(0..4)];
        let group_size = 1usize << rng.random_range(1..=3);
        let groups = if kind.is_grouped() { rng.random_range(2..=4) } else { 1 };
        let m = 1usize << rng.random_range(1..=6);
        let (t, ta) = if kind.is_time_indexed() {
            let t = rng.random_range(2..=8);
            (t, rng.random_range(1..=t))
        } else {
            (1, 1)
        };
        let taps = rng.random_range(1..=t);
        let c = SchemeConfig {
            scheme: kind,
            n_tx: groups * group_size,
            n_rx: rng.random_range(1..=4),
            groups,
            group_size,
            mod_order: m,
            constellation_family: ConstellationFamily::Psk,
            frame_slots: t,
            active_slots: ta,
            taps,
            normalization: Normalization::PerSlotUnit,
            channel_time_model: ChannelTimeModel::PerSlotIid,
        };
        let Ok(cfg) = validate(c) else { continue };
        checked += 1;
        let c_bits = binomial(t as u64, ta as u64);
        let p = 127 - c_bits.leading_zeros();
        let expected = p + ta as u32 * (groups as u32 * group_size.trailing_zeros() + m.trailing_zeros());
        let size = cfg.codebook_size();
        let log_ok = size.is_power_of_two() && size.trailing_zeros() == cfg.bits_per_frame();
        let rate_ok = cfg.spectral_efficiency() * Ratio::from_integer((t + taps - 1) as u64)
            == Ratio::from_integer(u64::from(cfg.bits_per_frame()));
        if !(log_ok && rate_ok && cfg.bits_per_frame() == expected) {
            bad += 1;
            o.info(format!("mismatch: {c:?}"));
        }
    }
    o.check(bad == 0, format!("{checked} random valid configs: log2|codebook| = bits_per_frame = eta (T + L - 1) exactly, {bad} mismatches"));
    o
}

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "codebook exactness", criterion_1),
        (2, "detector oracle equivalence", criterion_2),
        (3, "noiseless sanity", criterion_3),
        (4, "fig3 gaps", criterion_4),
        (5, "fig2 ordering and gaps", criterion_5),
        (6, "CEE degradation", criterion_6),
        (7, "channel-model properties", criterion_7),
        (8, "determinism", criterion_8),
        (9, "formula self-consistency", criterion_9),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let outcome = run();
        println!("criterion {id} ({name}): {}", if outcome.pass { "PASS" } else { "FAIL" });
        for line in &outcome.lines {
            println!("    {line}");
        }
        failed += usize::from(!outcome.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

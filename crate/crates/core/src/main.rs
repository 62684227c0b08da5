use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use imsim::channel::SnrAxis;
use imsim::engine::{curve_points, CeeScope, gap_at_ber, DetectorKind, GapError, SimOptions};
use imsim::experiment::{
    load_experiment, parse_snr_grid, preset, run_experiment, ExperimentError, ExperimentSpec,
};
use imsim::mapper::{enumerate_codebook, word_to_bits, DEFAULT_ENUMERATION_CAP};
use imsim::report::{self, labels, read_csv, render_svg, write_csv, PlotCurve, ReportError};
use imsim::scheme::Normalization;
use imsim::{build_constellation, ConstellationFamily, CsiMode};

#[derive(Parser)]
#[command(name = "imsim", version, about = "BER simulator for SM, PSM, TI-SM and TI-PSM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print spectral efficiency, bits per frame and codebook size.
    Rate(SourceArgs),
    /// List every codeword of a scheme.
    Codebook {
        #[command(flatten)]
        source: SourceArgs,
        /// Print at most this many codewords.
        #[arg(long)]
        limit: Option<u64>,
    },
    /// Run a BER sweep and write `<out>/<name>.csv` and `<out>/<name>.svg`.
    Simulate(SimulateArgs),
    /// SNR gap between two BER curves at a target BER.
    Gap(GapArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Scheme or experiment TOML file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in figure preset: fig2, fig3, fig4 or fig5.
    #[arg(long)]
    preset: Option<String>,
    /// Constellation family used by presets.
    #[arg(long, value_enum, default_value_t = FamilyArg::Psk)]
    family: FamilyArg,
    /// Power normalization used by presets.
    #[arg(long, value_enum, default_value_t = NormArg::PerSlotUnit)]
    normalization: NormArg,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// SNR grid in dB as start:step:stop.
    #[arg(long)]
    snr: Option<String>,
    /// Keep only curves in this CSI mode (sets the mode of a scheme file).
    #[arg(long, value_enum)]
    csi: Option<CsiArg>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Output file stem; defaults to the preset or config file name.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, value_enum, default_value_t = AxisArg::EsN0)]
    axis: AxisArg,
    #[arg(long, value_enum, default_value_t = DetectorArg::Auto)]
    detector: DetectorArg,
    #[arg(long)]
    min_errors: Option<u64>,
    #[arg(long)]
    max_frames: Option<u64>,
    #[arg(long)]
    min_frames: Option<u64>,
    /// Stop a curve after its first point below this BER.
    #[arg(long)]
    ber_floor: Option<f64>,
    /// Run every point of the grid, ignoring the BER floor.
    #[arg(long, conflicts_with = "ber_floor")]
    full_grid: bool,
    /// Channel entries touched by the estimation error.
    #[arg(long, value_enum, default_value_t = ScopeArg::Structural)]
    cee_scope: ScopeArg,
    /// Fixed CSI error variance instead of the noise variance.
    #[arg(long)]
    sigma_e2: Option<f64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct GapArgs {
    /// CSV holding curve A (and curve B when `csv_b` is omitted).
    csv_a: PathBuf,
    csv_b: Option<PathBuf>,
    /// Label of curve A; may be omitted when the file holds one curve.
    #[arg(long)]
    label_a: Option<String>,
    #[arg(long)]
    label_b: Option<String>,
    #[arg(long, default_value_t = 1e-4)]
    target_ber: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Psk,
    Qam,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    PerSlotUnit,
    PerAntennaUnit,
}

#[derive(Clone, Copy, ValueEnum)]
enum CsiArg {
    Perfect,
    Cee,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    #[value(name = "esn0")]
    EsN0,
    #[value(name = "ebn0")]
    EbN0,
    #[value(name = "symbol-esn0")]
    SymbolEsN0,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Structural,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorArg {
    Auto,
    Decomposed,
    BruteForce,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ExperimentError),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("report error: {0}")]
    Report(#[from] ReportError),
    #[error("gap error: {0}")]
    Gap(#[from] GapError),
    #[error("thread pool error: {0}")]
    Threads(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(ExperimentError::Engine(_)) => 5,
            CliError::Config(_) => 3,
            CliError::Io(_) | CliError::Report(_) => 4,
            CliError::Gap(_) => 6,
            CliError::Threads(_) => 7,
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn load(source: &SourceArgs, csi: CsiMode) -> Result<ExperimentSpec, CliError> {
    match (&source.preset, &source.config) {
        (Some(name), _) => {
            let family = match source.family {
                FamilyArg::Psk => ConstellationFamily::Psk,
                FamilyArg::Qam => ConstellationFamily::Qam,
            };
            let norm = match source.normalization {
                NormArg::PerSlotUnit => Normalization::PerSlotUnit,
                NormArg::PerAntennaUnit => Normalization::PerAntennaUnit,
            };
            Ok(preset(name, family, norm)?)
        }
        (None, Some(path)) => Ok(load_experiment(path, csi)?),
        (None, None) => Err(CliError::Usage("one of --config or --preset is required".into())),
    }
}

fn cmd_rate(source: &SourceArgs) -> Result<(), CliError> {
    let spec = load(source, CsiMode::Perfect)?;
    let mut seen = Vec::new();
    for curve in &spec.curves {
        let c = &curve.config;
        if seen.contains(c) {
            continue;
        }
        seen.push(*c);
        let eta = c.spectral_efficiency();
        println!("{}", c.tag());
        println!("  bits_per_frame     {}", c.bits_per_frame());
        println!(
            "  layout             {} time-index + {} x ({} antenna + {} symbol)",
            c.tap_bits(),
            c.active_slots,
            c.antenna_bits_per_slot(),
            c.symbol_bits()
        );
        println!("  channel_uses       {}", c.channel_uses());
        println!(
            "  spectral_efficiency {} = {} bpcu",
            eta,
            *eta.numer() as f64 / *eta.denom() as f64
        );
        println!("  codebook_size      {}", c.codebook_size());
    }
    for note in &spec.notes {
        println!("note: {note}");
    }
    Ok(())
}

fn cmd_codebook(source: &SourceArgs, limit: Option<u64>) -> Result<(), CliError> {
    let spec = load(source, CsiMode::Perfect)?;
    let [curve] = &spec.curves[..] else {
        return Err(CliError::Usage("codebook needs a single-scheme config".into()));
    };
    let c = &curve.config;
    let k = build_constellation(c.mod_order, c.constellation_family)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let iter = enumerate_codebook(c, &k, DEFAULT_ENUMERATION_CAP)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    println!("# {} codewords={}", c.tag(), c.codebook_size());
    println!("# bits tap antennas symbols nonzero(index:value)");
    let n = c.bits_per_frame();
    for (word, (cw, signal)) in iter.enumerate().take(limit.unwrap_or(u64::MAX) as usize) {
        let bits: String = word_to_bits(word as u64, n).iter().map(|b| char::from(b'0' + b)).collect();
        let tap: String = (0..c.frame_slots)
            .map(|t| if cw.tap(c).is_active(t) { '1' } else { '0' })
            .collect();
        let ants: Vec<String> = cw.antenna_indices.iter().map(usize::to_string).collect();
        let syms: Vec<String> = cw.symbol_indices.iter().map(usize::to_string).collect();
        let nz: Vec<String> = signal
            .nonzero()
            .map(|(i, v)| format!("{i}:{:+.6}{:+.6}i", v.re, v.im))
            .collect();
        println!("{bits} {tap} {} {} {}", ants.join(","), syms.join(","), nz.join(" "));
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let csi = match args.csi {
        Some(CsiArg::Cee) => CsiMode::Cee,
        _ => CsiMode::Perfect,
    };
    let mut spec = load(&args.source, csi)?;
    if let Some(name) = &args.name {
        spec.name = name.clone();
    }
    if args.csi.is_some() {
        spec.retain_csi(csi);
        if spec.curves.is_empty() {
            return Err(CliError::Usage(format!("no curve uses CSI mode {}", csi.as_str())));
        }
    }
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    if let Some(snr) = &args.snr {
        spec.snr_db = parse_snr_grid(snr)?;
    }
    if let Some(v) = args.min_errors {
        spec.stopping.min_bit_errors = v;
    }
    if let Some(v) = args.max_frames {
        spec.stopping.max_frames = v;
    }
    if let Some(v) = args.min_frames {
        spec.stopping.min_frames = v;
    }
    if args.full_grid {
        spec.ber_floor = None;
    } else if args.ber_floor.is_some() {
        spec.ber_floor = args.ber_floor;
    }
    for w in spec.check()? {
        eprintln!("warning: {w}");
    }
    let options = SimOptions {
        axis: match args.axis {
            AxisArg::EsN0 => SnrAxis::EsN0,
            AxisArg::EbN0 => SnrAxis::EbN0,
            AxisArg::SymbolEsN0 => SnrAxis::SymbolEsN0,
        },
        detector: match args.detector {
            DetectorArg::Auto => DetectorKind::Auto,
            DetectorArg::Decomposed => DetectorKind::Decomposed,
            DetectorArg::BruteForce => DetectorKind::BruteForce,
        },
        sigma_e2: args.sigma_e2,
        cee_scope: match args.cee_scope {
            ScopeArg::Structural => CeeScope::StructuralBlocks,
            ScopeArg::Full => CeeScope::FullMatrix,
        },
        ..SimOptions::default()
    };
    if !args.quiet {
        for note in &spec.notes {
            eprintln!("note: {note}");
        }
    }
    let quiet = args.quiet;
    let run = || {
        run_experiment(&spec, options, |r| {
            if !quiet {
                eprintln!(
                    "{:<22} {:>6} dB  ber {:.3e}  frames {}  ({})",
                    r.label,
                    r.snr_db,
                    r.ber,
                    r.frames_run,
                    r.stop_reason.as_str()
                );
            }
        })
    };
    let records = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(run)?,
        None => run()?,
    };

    fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    let csv_path = args.out.join(format!("{}.csv", spec.name));
    let file = fs::File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    write_csv(std::io::BufWriter::new(file), &records)?;

    let per_curve: Vec<Vec<_>> = spec
        .curves
        .iter()
        .map(|c| records.iter().filter(|r| r.label == c.label).cloned().collect())
        .collect();
    let plot: Vec<PlotCurve<'_>> = spec
        .curves
        .iter()
        .zip(&per_curve)
        .map(|(c, recs)| PlotCurve { label: &c.label, csi: c.csi, records: recs })
        .collect();
    let svg_path = args.out.join(format!("{}.svg", spec.name));
    fs::write(&svg_path, render_svg(&spec.name, &plot)).map_err(|e| io_err(&svg_path, e))?;
    println!("{}", csv_path.display());
    println!("{}", svg_path.display());
    Ok(())
}

fn pick(records: &[imsim::BerRecord], label: Option<&str>, file: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let label = match label {
        Some(l) => l.to_string(),
        None => match &labels(records)[..] {
            [only] => only.clone(),
            all => {
                return Err(CliError::Usage(format!(
                    "{} holds curves {all:?}; choose one with --label-a/--label-b",
                    file.display()
                )))
            }
        },
    };
    let curve: Vec<_> = report::select_curve(records, &label).into_iter().cloned().collect();
    if curve.is_empty() {
        return Err(CliError::Usage(format!("no curve `{label}` in {}", file.display())));
    }
    Ok(curve_points(&curve))
}

fn read_records(path: &Path) -> Result<Vec<imsim::BerRecord>, CliError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    Ok(read_csv(file)?)
}

fn cmd_gap(args: &GapArgs) -> Result<(), CliError> {
    let a_records = read_records(&args.csv_a)?;
    let (b_records, b_path) = match &args.csv_b {
        Some(p) => (read_records(p)?, p.as_path()),
        None => {
            if args.label_a.is_none() || args.label_b.is_none() {
                return Err(CliError::Usage("a single CSV needs --label-a and --label-b".into()));
            }
            (a_records.clone(), args.csv_a.as_path())
        }
    };
    let a = pick(&a_records, args.label_a.as_deref(), &args.csv_a)?;
    let b = pick(&b_records, args.label_b.as_deref(), b_path)?;
    let report = gap_at_ber(&a, &b, args.target_ber)?;
    println!("target_ber {}", args.target_ber);
    for (name, c) in [("a", &report.a), ("b", &report.b)] {
        println!(
            "{name}: {:.3} dB between ({}, {:.3e}) and ({}, {:.3e})",
            c.snr_db, c.above.0, c.above.1, c.below.0, c.below.1
        );
    }
    println!("gap_db {:.3}", report.gap_db);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Rate(source) => cmd_rate(source),
        Command::Codebook { source, limit } => cmd_codebook(source, *limit),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Gap(args) => cmd_gap(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

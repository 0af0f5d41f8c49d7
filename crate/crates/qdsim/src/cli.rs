//! Command-line front end.
//!
//! Exit codes: 0 success, 2 hard error (bad config, bad input, usage),
//! 3 the analysis ran but its result is flagged (resolution-limited or
//! misfit bins).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::info;

use qdsim_core::emitter::Excitation;
use qdsim_core::interference::HomSetup;
use qdsim_core::pcfs::pcfs_grid;
use qdsim_core::photon::TagStream;
use qdsim_core::spectroscopy::ft_limit;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::export::{self, Report};
use crate::parallel::{hom_simulate_parallel, map_ordered, pcfs_run_parallel, with_threads};
use crate::pipeline::{self, analysis_seed};
use crate::qtag;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_FLAGGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qdsim", version, about = "Gated quantum-dot single-photon source simulator")]
pub struct Cli {
    /// Flat `key = value` configuration file (SI units).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (0 uses every core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Source {
    /// Read a QTAG file instead of simulating.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Simulated acquisition time, seconds.
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
    /// Gate voltage, volts.
    #[arg(long, default_value_t = -0.57, allow_hyphen_values = true)]
    pub voltage: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate emission; writes truth.qtag, detected.qtag and manifest.txt.
    Simulate {
        #[arg(long)]
        duration: f64,
        #[arg(long, default_value_t = -0.57, allow_hyphen_values = true)]
        voltage: f64,
        /// Second pulse this many seconds after the first in each period.
        #[arg(long)]
        double_pulse: Option<f64>,
    },
    /// Pulsed g²(0) and the long-delay profile.
    G2 {
        #[command(flatten)]
        source: Source,
    },
    /// Two-photon interference through an unbalanced Mach-Zehnder.
    Hom {
        #[command(flatten)]
        source: Source,
        /// Interferometer delay (and pulse separation when simulating), seconds.
        #[arg(long, default_value_t = 2e-9)]
        delay: f64,
    },
    /// Scanning Fabry-Perot measurement and Voigt fit.
    Fpi {
        #[command(flatten)]
        source: Source,
    },
    /// Photon-correlation Fourier spectroscopy: linewidth vs τ.
    Pcfs {
        /// Comma-separated gate voltages.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-0.57")]
        voltages: Vec<f64>,
    },
    /// FPI linewidth and intensity across a gate-voltage range.
    Sweep {
        #[arg(long, default_value_t = -0.70, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = -0.40, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Acquisition per voltage, seconds.
        #[arg(long, default_value_t = 0.01)]
        duration: f64,
    },
    /// PCFS spectral resolution, range and stage positions.
    Grid,
}

struct Ctx {
    config: Config,
    hash: String,
    seed: u64,
    out: PathBuf,
}

impl Ctx {
    fn report(&self, command: &str) -> Report {
        let mut r = Report::new(command, &self.hash);
        r.set("seed", self.seed);
        r
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        export::write_bytes(&self.path(name), bytes)
    }

    fn source(&self, source: &Source, excitation: &Excitation) -> Result<TagStream> {
        match &source.input {
            Some(path) => {
                info!("reading {}", path.display());
                qtag::read_file(path)
            }
            None => {
                info!("simulating {} s at {} V", source.duration, source.voltage);
                pipeline::simulate_truth(&self.config, excitation, source.voltage, source.duration, self.seed)
            }
        }
    }
}

fn add_source(r: &mut Report, source: &Source, stream: &TagStream) {
    match &source.input {
        Some(p) => r.set("input", p.display()),
        None => r.num("duration_s", source.duration).num("voltage_V", source.voltage),
    };
    r.set("photons", stream.len());
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let ctx = Ctx { hash: config.hash(), config, seed: cli.seed, out: cli.out.clone() };
    with_threads(cli.threads, || dispatch(&ctx, &cli.command))?
}

fn dispatch(ctx: &Ctx, command: &Command) -> Result<i32> {
    match command {
        Command::Simulate { duration, voltage, double_pulse } => cmd_simulate(ctx, *duration, *voltage, *double_pulse),
        Command::G2 { source } => cmd_g2(ctx, source),
        Command::Hom { source, delay } => cmd_hom(ctx, source, *delay),
        Command::Fpi { source } => cmd_fpi(ctx, source),
        Command::Pcfs { voltages } => cmd_pcfs(ctx, voltages),
        Command::Sweep { from, to, step, duration } => cmd_sweep(ctx, *from, *to, *step, *duration),
        Command::Grid => cmd_grid(ctx),
    }
}

fn cmd_simulate(ctx: &Ctx, duration: f64, voltage: f64, double_pulse: Option<f64>) -> Result<i32> {
    let mut excitation = pipeline::excitation(&ctx.config);
    if let Some(d) = double_pulse {
        excitation = Excitation::double(ctx.config.excitation.pulse_area, d)
            .with_collection_efficiency(ctx.config.excitation.collection_efficiency);
    }
    let truth = pipeline::simulate_truth(&ctx.config, &excitation, voltage, duration, ctx.seed)?;
    let detected = pipeline::hbt_detect(&truth, &ctx.config.detector, analysis_seed(ctx.seed))?;
    let truth_bytes = qtag::write_file(&ctx.path("truth.qtag"), &truth)?;
    let detected_bytes = qtag::write_file(&ctx.path("detected.qtag"), &detected)?;
    let mut r = ctx.report("simulate");
    r.num("duration_s", duration)
        .num("voltage_V", voltage)
        .set("species", ctx.config.emitter.species(voltage).label())
        .set("truth_count", truth.len())
        .set("truth_bytes", truth_bytes);
    for (ch, n) in detected.counts_per_channel().iter().enumerate() {
        r.set(format!("detected_count_{}", detected.channel_labels()[ch]), n);
    }
    r.set("detected_count", detected.len()).set("detected_bytes", detected_bytes);
    r.write(&ctx.path("manifest.txt"))?;
    Ok(EXIT_OK)
}

fn cmd_g2(ctx: &Ctx, source: &Source) -> Result<i32> {
    let stream = ctx.source(source, &pipeline::excitation(&ctx.config))?;
    let m = pipeline::g2_measure(&stream, &ctx.config, analysis_seed(ctx.seed))?;
    let mut r = ctx.report("g2");
    add_source(&mut r, source, &stream);
    r.num("g2_zero", m.result.g2_zero)
        .num("g2_zero_err", m.result.uncertainty)
        .num("rep_period_s", m.result.rep_period)
        .set("pulsed", m.pulsed)
        .set("side_peaks", m.result.side_peaks)
        .num("side_peak_mean", m.result.side_mean())
        .num("long_delay_bin_s", m.long_delay.bin_width)
        .num("long_delay_flatness_50ns_1us", m.long_delay.flatness(50e-9, 1e-6));
    ctx.write("g2_histogram.csv", &export::histogram_csv(&m.histogram)?)?;
    ctx.write("g2_long_delay.csv", &export::long_delay_csv(&m.long_delay)?)?;
    r.write(&ctx.path("g2_report.txt"))?;
    Ok(EXIT_OK)
}

fn cmd_hom(ctx: &Ctx, source: &Source, delay: f64) -> Result<i32> {
    let c = &ctx.config;
    let excitation = Excitation::double(c.excitation.pulse_area, delay).with_collection_efficiency(c.excitation.collection_efficiency);
    let stream = ctx.source(source, &excitation)?;
    let mut setup = HomSetup::new(delay, pipeline::stream_lifetime(&stream, &c.emitter));
    setup.detector = c.detector;
    setup.bin_width = c.hom.bin_width;
    setup.max_delay = c.hom.max_delay;
    let t = hom_simulate_parallel(&stream, &setup, analysis_seed(ctx.seed))?;
    let mut r = ctx.report("hom");
    add_source(&mut r, source, &stream);
    export::add_tpi(&mut r, &t);
    ctx.write("hom_parallel.csv", &export::histogram_csv(&t.parallel_histogram)?)?;
    ctx.write("hom_orthogonal.csv", &export::histogram_csv(&t.orthogonal_histogram)?)?;
    r.write(&ctx.path("hom_report.txt"))?;
    Ok(EXIT_OK)
}

fn cmd_fpi(ctx: &Ctx, source: &Source) -> Result<i32> {
    let c = &ctx.config;
    let stream = ctx.source(source, &pipeline::excitation(c))?;
    let lifetime = pipeline::stream_lifetime(&stream, &c.emitter);
    let m = pipeline::fpi_measure(&stream, lifetime, &c.fpi, c.fpi.fixed_lorentzian, analysis_seed(ctx.seed))?;
    let mut r = ctx.report("fpi");
    add_source(&mut r, source, &stream);
    r.num("reference_frequency_Hz", m.reference).num("ft_limit_Hz", ft_limit(lifetime)?);
    export::add_fit(&mut r, &m.fit);
    r.num("broadening_over_ft_limit", m.fit.total_fwhm / ft_limit(lifetime)?);
    ctx.write("fpi_truth_spectrum.csv", &export::spectrum_csv(&m.truth)?)?;
    ctx.write("fpi_scan.csv", &export::spectrum_csv(&m.scan)?)?;
    r.write(&ctx.path("fpi_report.txt"))?;
    Ok(if m.fit.resolution_limited { EXIT_FLAGGED } else { EXIT_OK })
}

fn cmd_pcfs(ctx: &Ctx, voltages: &[f64]) -> Result<i32> {
    let c = &ctx.config;
    let results = pcfs_run_parallel(&c.pcfs.scan, &c.emitter, voltages, ctx.seed)?;
    let grid = pcfs_grid(&c.pcfs.scan);
    let mut r = ctx.report("pcfs");
    r.num("resolution_Hz", grid.resolution).num("range_Hz", grid.range).set("positions", grid.positions);
    let mut flagged = false;
    for (k, res) in results.iter().enumerate() {
        let n_flagged = res.flags.iter().filter(|f| f.any()).count();
        flagged |= n_flagged > 0;
        r.num(format!("voltage_{k}_V"), voltages[k]).set(format!("voltage_{k}_flagged_bins"), n_flagged);
        if let Some((level, err)) = res.level(1e-6) {
            r.num(format!("voltage_{k}_long_tau_linewidth_Hz"), level).num(format!("voltage_{k}_long_tau_linewidth_err_Hz"), err);
        }
        ctx.write(&format!("pcfs_linewidth_{k}.csv"), &export::pcfs_linewidth_csv(res)?)?;
        ctx.write(&format!("pcfs_matrix_{k}.csv"), &export::pcfs_matrix_csv(res)?)?;
    }
    r.set("flagged", flagged);
    r.write(&ctx.path("pcfs_report.txt"))?;
    Ok(if flagged { EXIT_FLAGGED } else { EXIT_OK })
}

fn cmd_sweep(ctx: &Ctx, from: f64, to: f64, step: f64, duration: f64) -> Result<i32> {
    if !(duration > 0.0) {
        return Err(Error::Usage(format!("duration must be positive, got {duration}")));
    }
    let voltages = pipeline::voltage_grid(from, to, step)?;
    let rows = map_ordered(&voltages, |&v| pipeline::sweep_point(&ctx.config, v, duration, ctx.seed))?;
    let lit: Vec<_> = rows.iter().filter(|r| r.linewidth.is_finite()).collect();
    let mut r = ctx.report("sweep");
    r.num("from_V", from).num("to_V", to).num("step_V", step).num("duration_s", duration);
    if let Some(min) = lit.iter().min_by(|a, b| a.linewidth.total_cmp(&b.linewidth)) {
        r.num("linewidth_min_V", min.voltage).num("linewidth_min_Hz", min.linewidth);
    }
    if let Some(max) = lit.iter().max_by(|a, b| a.intensity.total_cmp(&b.intensity)) {
        r.num("intensity_max_V", max.voltage).num("intensity_max_cps", max.intensity);
    }
    let flagged = rows.iter().any(|r| r.resolution_limited);
    r.set("flagged", flagged);
    ctx.write("sweep.csv", &export::sweep_csv(&rows)?)?;
    r.write(&ctx.path("sweep_report.txt"))?;
    Ok(if flagged { EXIT_FLAGGED } else { EXIT_OK })
}

fn cmd_grid(ctx: &Ctx) -> Result<i32> {
    let scan = &ctx.config.pcfs.scan;
    let g = pcfs_grid(scan);
    let mut r = ctx.report("grid");
    r.num("max_opd_m", scan.max_opd)
        .num("opd_step_m", scan.opd_step)
        .num("resolution_Hz", g.resolution)
        .num("range_Hz", g.range)
        .set("positions", g.positions);
    print!("{}", r.render());
    r.write(&ctx.path("grid_report.txt"))?;
    Ok(EXIT_OK)
}

/// Parses `args`, runs, and maps errors to exit code 2.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qdsim: {e}");
            EXIT_ERROR
        }
    }
}


//! Command-line front end.
//!
//! Exit status: 0 on success, 1 on any validation, input or output error,
//! 2 when `verify` finds a failing check.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use crate::analysis::{self, FitResult, TimingSpectrum, DEFAULT_RANGE};
use crate::config::{write_echo, RunConfig};
use crate::distributions::{
    doppler_component_sd, literal_shape, lorentzian_line, model_shape, pal_marginal, relative_density, CoincidencePdf,
    ModelKind,
};
use crate::montecarlo::{EmissionModel, Simulator};
use crate::oracles::{self, QuadratureReport};
use crate::units::PhysicalParams;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "pstiming",
    version,
    about = "Two-photon positron annihilation timing toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the derived physical constants as JSON.
    Constants(ConstantsArgs),
    /// Generate annihilation events and write coincidence records as CSV.
    Simulate(SimulateArgs),
    /// Histogram a timing column and fit model shapes to it.
    Analyze(AnalyzeArgs),
    /// Tabulate a named density as CSV.
    Pdf(PdfArgs),
    /// Run the numerical integral checks and print a JSON report.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    /// Take physical parameters from this run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `run.events`.
    #[arg(long)]
    pub events: Option<u64>,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// quantum or semiclassical; overrides `run.model`.
    #[arg(long)]
    pub model: Option<EmissionModel>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub chunk_size: Option<usize>,
    /// Records CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Records CSV from `simulate`, or a spectrum CSV from `analyze`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "dtau_ps")]
    pub column: String,
    #[arg(long, default_value_t = analysis::DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
    #[arg(long, default_value_t = DEFAULT_RANGE.0, allow_negative_numbers = true)]
    pub range_lo: f64,
    #[arg(long, default_value_t = DEFAULT_RANGE.1, allow_negative_numbers = true)]
    pub range_hi: f64,
    /// `all` or one of double_exponential, lorentzian, gaussian.
    #[arg(long, default_value = "all")]
    pub fit: String,
    #[arg(long)]
    pub out_spectrum: Option<PathBuf>,
    #[arg(long)]
    pub out_fit: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PdfArgs {
    /// coincidence, double_exponential, lorentzian, gaussian, models (all three
    /// shapes side by side), doppler,
    /// relative_density, pal or lorentzian_line.
    #[arg(long)]
    pub dist: String,
    /// Rate or width parameter in the distribution's own units. Defaults to
    /// the decay rate (ps⁻¹, or keV for `lorentzian_line`).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub from: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub to: Option<f64>,
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
    /// Time since injection for `relative_density`, ps.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Counted photon's distance for `pal`, mm.
    #[arg(long, default_value_t = 100.0)]
    pub x1: f64,
    /// Use the literal unnormalized forms of the three model shapes.
    #[arg(long)]
    pub literal: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    Invalid(Error),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Verification(_) => 2,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(e) => eprintln!("error: {e}"),
                Failure::Verification(msg) => eprintln!("verification failed: {msg}"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::Constants(a) => constants(a).map_err(Failure::from),
        Command::Simulate(a) => simulate(a).map_err(Failure::from),
        Command::Analyze(a) => analyze(a).map_err(Failure::from),
        Command::Pdf(a) => pdf(a).map_err(Failure::from),
        Command::Verify(a) => verify(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes `text` to `path`, or stdout when `path` is `None`.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(p, e))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Serialize)]
pub struct Constants {
    pub gamma_per_ps: f64,
    pub lifetime_ps: f64,
    pub sigma_doppler_kev: f64,
    pub c_mm_per_ps: f64,
    pub hbar_kev_ps: f64,
}

impl Constants {
    pub fn from_params(p: &PhysicalParams) -> Result<Self> {
        Ok(Self {
            gamma_per_ps: p.gamma()?,
            lifetime_ps: p.lifetime_ps()?,
            sigma_doppler_kev: p.sigma_doppler_kev,
            c_mm_per_ps: p.c_mm_per_ps,
            hbar_kev_ps: p.hbar_kev_ps,
        })
    }
}

fn physics_from(config: Option<&Path>) -> Result<PhysicalParams> {
    let physics = match config {
        Some(p) => RunConfig::load(p)?.physics,
        None => PhysicalParams::default(),
    };
    physics.validate()?;
    Ok(physics)
}

fn constants(a: ConstantsArgs) -> Result<()> {
    let physics = physics_from(a.config.as_deref())?;
    let consts = Constants::from_params(&physics)?;
    emit(a.out.as_deref(), &to_json(&consts)?)?;
    if let Some(out) = &a.out {
        write_echo(out, "constants", &physics)?;
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = a.events {
        cfg.run.events = n;
    }
    if let Some(s) = a.seed {
        cfg.run.seed = s;
    }
    if let Some(m) = a.model {
        cfg.run.model = m;
    }
    if let Some(w) = a.workers {
        cfg.run.workers = w;
    }
    if let Some(c) = a.chunk_size {
        cfg.run.chunk_size = c;
    }
    cfg.validate()?;
    let spread = 3.0 * cfg.physics.sigma_doppler_kev;
    if spread > 0.1 * cfg.physics.m_e_kev {
        eprintln!(
            "warning: Doppler width {} keV puts many pairs above 0.1 m; the nonrelativistic kinematics is inaccurate there",
            cfg.physics.sigma_doppler_kev
        );
    }
    let sim = Simulator::new(cfg.simulation())?;
    match &a.out {
        Some(path) => {
            sim.write_csv(create(path)?).map_err(|e| match e {
                Error::Io { source, .. } => Error::io(path, source),
                other => other,
            })?;
            write_echo(path, "simulate", &cfg)?;
        }
        None => sim.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}

/// Spectrum CSVs are recognized by their header.
fn is_spectrum_file(path: &Path) -> Result<bool> {
    let mut head = String::new();
    File::open(path)
        .map_err(|e| Error::io(path, e))?
        .take(64)
        .read_to_string(&mut head)
        .map_err(|e| Error::io(path, e))?;
    Ok(head.starts_with("bin_lo_ps,"))
}

/// Samples and spectrum for `analyze`. Binned input is expanded to one
/// sample per count at the bin center.
fn load_input(a: &AnalyzeArgs) -> Result<(Vec<f64>, TimingSpectrum)> {
    if is_spectrum_file(&a.input)? {
        let file = File::open(&a.input).map_err(|e| Error::io(&a.input, e))?;
        let spectrum = TimingSpectrum::read_csv(BufReader::new(file), &a.input.display().to_string())?;
        let samples = spectrum
            .counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(spectrum.center(i), c as usize))
            .collect();
        Ok((samples, spectrum))
    } else {
        if !matches!(a.column.as_str(), "dtau_ps" | "dt_ps") {
            return Err(Error::invalid(
                "column",
                format!("expected dtau_ps or dt_ps, got `{}`", a.column),
            ));
        }
        let samples = analysis::load_column(&a.input, &a.column)?;
        let spectrum = analysis::histogram(&samples, a.bin_width, (a.range_lo, a.range_hi))?;
        Ok((samples, spectrum))
    }
}

#[derive(Debug, Serialize)]
struct AnalyzeEcho<'a> {
    input: &'a Path,
    column: &'a str,
    bin_width_ps: f64,
    range_ps: (f64, f64),
    fit: &'a str,
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let (samples, spectrum) = load_input(&a)?;
    let json = if a.fit.eq_ignore_ascii_case("all") {
        to_json(&analysis::model_compare(&samples)?)?
    } else {
        let kind: ModelKind = a.fit.parse()?;
        let fit: FitResult = analysis::fit(kind, &samples)?;
        to_json(&fit)?
    };
    let echo = AnalyzeEcho {
        input: &a.input,
        column: &a.column,
        bin_width_ps: a.bin_width,
        range_ps: (a.range_lo, a.range_hi),
        fit: &a.fit,
    };
    if let Some(path) = &a.out_spectrum {
        let mut w = create(path)?;
        spectrum.write_csv(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
        write_echo(path, "analyze", &echo)?;
    }
    emit(a.out_fit.as_deref(), &json)?;
    if let Some(path) = &a.out_fit {
        write_echo(path, "analyze", &echo)?;
    }
    Ok(())
}

fn grid(from: f64, to: f64, points: usize) -> Result<Vec<f64>> {
    if !(from.is_finite() && to.is_finite() && to > from) {
        return Err(Error::invalid(
            "range",
            format!("need finite from < to, got [{from}, {to}]"),
        ));
    }
    if points < 2 {
        return Err(Error::invalid("points", "need at least 2"));
    }
    let step = (to - from) / (points - 1) as f64;
    Ok((0..points).map(|i| from + step * i as f64).collect())
}

/// CSV text for the `pdf` command.
pub fn pdf_table(a: &PdfArgs, physics: &PhysicalParams) -> Result<String> {
    let gamma_ps = physics.gamma()?;
    let c = physics.c_mm_per_ps;
    let g = a.gamma.unwrap_or(gamma_ps);
    let span = |lo: f64, hi: f64| grid(a.from.unwrap_or(lo), a.to.unwrap_or(hi), a.points);
    let mut out = String::new();
    let mut push = |x: f64, ys: &[f64]| {
        out.push_str(&x.to_string());
        for y in ys {
            out.push(',');
            out.push_str(&y.to_string());
        }
        out.push('\n');
    };
    let shape = |kind, x, g| {
        if a.literal {
            literal_shape(kind, x, g)
        } else {
            model_shape(kind, x, g)
        }
    };

    let mut header = "x,density";
    match a.dist.to_ascii_lowercase().as_str() {
        "coincidence" => {
            let law = CoincidencePdf::new(g, 0.0)?;
            for x in span(-1000.0, 1000.0)? {
                push(x, &[law.pdf(x)]);
            }
        }
        "models" => {
            header = "x,double_exponential,lorentzian,gaussian";
            for x in span(-1000.0, 1000.0)? {
                let ys = ModelKind::ALL
                    .iter()
                    .map(|&k| shape(k, x, g))
                    .collect::<Result<Vec<_>>>()?;
                push(x, &ys);
            }
        }
        "doppler" => {
            let sd = doppler_component_sd(physics.sigma_doppler_kev);
            let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
            for x in span(-6.0 * sd, 6.0 * sd)? {
                push(x, &[norm * (-0.5 * (x / sd).powi(2)).exp()]);
            }
        }
        "relative_density" => {
            let dt = a.dt.unwrap_or(1.0 / gamma_ps);
            let reach = 2.0 * c * dt;
            for x in span(reach * 1e-3, reach)? {
                push(x, &[relative_density(x, dt, g, c)?]);
            }
        }
        "pal" => {
            let onset = a.x1 / c;
            for x in span(0.0, onset + 10.0 / g)? {
                push(x, &[pal_marginal(x, a.x1, g, c)?]);
            }
        }
        "lorentzian_line" => {
            let width = a.gamma.unwrap_or(physics.gamma_kev()?);
            let e = 2.0 * physics.m_e_kev;
            for x in span(e - 20.0 * width, e + 20.0 * width)? {
                push(x, &[lorentzian_line(x, e, width)?]);
            }
        }
        other => {
            let kind: ModelKind = other
                .parse()
                .map_err(|_| Error::Config(format!("unknown distribution `{other}`")))?;
            for x in span(-1000.0, 1000.0)? {
                push(x, &[shape(kind, x, g)?]);
            }
        }
    }
    Ok(format!("{header}\n{out}"))
}

fn pdf(a: PdfArgs) -> Result<()> {
    let physics = PhysicalParams::default();
    let table = pdf_table(&a, &physics)?;
    emit(a.out.as_deref(), &table)?;
    if let Some(out) = &a.out {
        write_echo(out, "pdf", &a)?;
    }
    Ok(())
}

/// Runs the check suite, including the I1 truncation trend and the I2
/// scale-invariance comparison, and reports any failures.
pub fn verify_suite() -> Result<(Vec<QuadratureReport>, Vec<String>)> {
    let reports = oracles::run_all()?;
    let mut failures: Vec<String> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{} relative error {:e} exceeds {:e}", r.id, r.relative_error, r.target))
        .collect();
    if !oracles::i1_trend_ok(&reports) {
        failures.push("I1 truncation error does not fall as 1/cutoff".into());
    }
    let base = oracles::I2Params::dimensionless(100.0, 10.0, 6.0);
    let a = oracles::verify_i2(&base)?;
    let b = oracles::verify_i2(&base.rescaled(2.0))?;
    let ratio_a = a.numeric / a.closed_form;
    let ratio_b = b.numeric / b.closed_form;
    if (ratio_a - ratio_b).abs() > 1e-6 * ratio_a.abs() {
        failures.push(format!("I2 not scale invariant: {ratio_a} vs {ratio_b}"));
    }
    Ok((reports, failures))
}

fn verify(a: VerifyArgs) -> std::result::Result<(), Failure> {
    let (reports, failures) = verify_suite()?;
    emit(a.out.as_deref(), &to_json(&reports)?)?;
    if let Some(out) = &a.out {
        write_echo(out, "verify", &serde_json::json!({ "suite": "default" }))?;
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(failures.join("; ")))
    }
}

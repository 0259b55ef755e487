//! Command-line front end: argument parsing, run configuration and reporting.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgGroup, Parser};
use tvstokes_core::io::{
    add_noise, psnr, read_pgm, save_trace_csv, synth, write_pgm, SyntheticSpec,
};
use tvstokes_core::params::{DEFAULT_TAU_P, DEFAULT_TAU_Q, DEFAULT_TAU_S};
use tvstokes_core::{denoise_with_reference, Error, Params, ScalarField};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Smallest grid accepted on each side.
pub const MIN_SIDE: usize = 4;

#[derive(Parser, Debug, Clone)]
#[command(
    name = "tvstokes",
    version,
    allow_negative_numbers = true,
    about = "Joint gradient-field and image denoising by alternating minimisation",
    group(ArgGroup::new("source").required(true).args(["input", "synthetic"]))
)]
pub struct Args {
    /// Noisy input image (PGM, P2 or P5).
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Generate the input: staircase, ramp or disk, e.g. staircase:32x32:4.
    #[arg(long, value_name = "KIND:HxW[:LEVELS]")]
    pub synthetic: Option<String>,
    /// Where to write the denoised image.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Per-iteration trace as CSV.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta2: f64,
    #[arg(long, default_value_t = DEFAULT_TAU_P)]
    pub tau_p: f64,
    #[arg(long, default_value_t = DEFAULT_TAU_Q)]
    pub tau_q: f64,
    #[arg(long, default_value_t = DEFAULT_TAU_S)]
    pub tau_s: f64,
    #[arg(long, default_value_t = 300)]
    pub inner_iters: usize,
    #[arg(long, default_value_t = 100)]
    pub outer_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub inner_tol: f64,
    /// Zero runs all outer iterations.
    #[arg(long, default_value_t = 1e-5)]
    pub outer_tol: f64,
    /// Dual sweeps per gradient-mapping probe in the trace; 0 leaves those columns empty.
    #[arg(long, default_value_t = 300)]
    pub probe_iters: usize,
    /// Standard deviation of Gaussian noise added to the input.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Clean reference for PSNR. Synthetic runs default to the noise-free image.
    #[arg(long, value_name = "PATH")]
    pub clean: Option<PathBuf>,
    #[arg(long, default_value_t = 255, value_parser = parse_maxval)]
    pub maxval: u16,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Pgm(PathBuf),
    Synthetic(SyntheticSpec),
}

/// A validated run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub source: Source,
    pub out: PathBuf,
    pub trace: Option<PathBuf>,
    pub clean: Option<PathBuf>,
    pub params: Params,
    pub sigma: f64,
    pub seed: u64,
    pub maxval: u16,
}

impl TryFrom<Args> for RunConfig {
    type Error = Error;

    fn try_from(a: Args) -> Result<Self, Error> {
        let source = match (a.input, a.synthetic) {
            (Some(p), None) => Source::Pgm(p),
            (None, Some(s)) => {
                let spec: SyntheticSpec = s.parse()?;
                check_size(spec.shape.height, spec.shape.width)?;
                Source::Synthetic(spec)
            }
            _ => {
                return Err(Error::InvalidParams(
                    "give exactly one of --input and --synthetic".into(),
                ))
            }
        };
        if !(a.sigma.is_finite() && a.sigma >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "sigma must be >= 0, got {}",
                a.sigma
            )));
        }
        let params = Params {
            alpha: a.alpha,
            beta: a.beta,
            eta1: a.eta1,
            eta2: a.eta2,
            tau_p: a.tau_p,
            tau_q: a.tau_q,
            tau_s: a.tau_s,
            inner_iters: a.inner_iters,
            inner_tol: a.inner_tol,
            outer_iters: a.outer_iters,
            outer_tol: a.outer_tol,
            probe_iters: a.probe_iters,
            warm_start: true,
        };
        params.validate()?;
        Ok(RunConfig {
            source,
            out: a.out,
            trace: a.trace,
            clean: a.clean,
            params,
            sigma: a.sigma,
            seed: a.seed,
            maxval: a.maxval,
        })
    }
}

fn check_size(height: usize, width: usize) -> Result<(), Error> {
    if height < MIN_SIDE || width < MIN_SIDE {
        return Err(Error::InvalidParams(format!(
            "image must be at least {MIN_SIDE}x{MIN_SIDE}, got {height}x{width}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub iterations: usize,
    pub final_energy: f64,
    pub psnr_input: Option<f64>,
    pub psnr_output: Option<f64>,
}

/// Loads or generates the data, denoises it and writes the outputs.
pub fn execute(cfg: &RunConfig) -> Result<Summary, Error> {
    let (base, synthetic_clean) = match &cfg.source {
        Source::Pgm(p) => {
            let img = read_pgm(p)?;
            check_size(img.height(), img.width())?;
            (img, None)
        }
        Source::Synthetic(spec) => {
            let img = synth(spec)?;
            (img.clone(), Some(img))
        }
    };
    let clean: Option<ScalarField> = match &cfg.clean {
        Some(p) => Some(read_pgm(p)?),
        None => synthetic_clean,
    };
    if let Some(c) = &clean {
        base.ensure_same_shape(c)?;
    }
    let f = add_noise(&base, cfg.sigma, cfg.seed)?;
    let out = denoise_with_reference(&cfg.params, &f, clean.as_ref())?;
    write_pgm(&cfg.out, &out.u, cfg.maxval)?;
    if let Some(t) = &cfg.trace {
        save_trace_csv(&out.trace, t)?;
    }
    Ok(Summary {
        iterations: out.iterations,
        final_energy: out.trace.last_full().map_or(f64::NAN, |r| r.energy.total),
        psnr_input: clean.as_ref().map(|c| psnr(&f, c)),
        psnr_output: clean.as_ref().map(|c| psnr(&out.u, c)),
    })
}

/// Runs the command line and returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let cfg = match RunConfig::try_from(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match execute(&cfg) {
        Ok(s) => {
            let mut line = format!("iterations {}  H {:.10e}", s.iterations, s.final_energy);
            if let (Some(a), Some(b)) = (s.psnr_input, s.psnr_output) {
                line += &format!("  PSNR {a:.2} dB -> {b:.2} dB");
            }
            let _ = writeln!(std::io::stdout(), "{line}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn parse_maxval(s: &str) -> Result<u16, String> {
    match s {
        "255" => Ok(255),
        "65535" => Ok(65535),
        _ => Err("must be 255 or 65535".into()),
    }
}

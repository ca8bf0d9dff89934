//! Argument parsing and subcommand dispatch for the `dyn` binary.

use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, CommandFactory, Parser, Subcommand};
use num_complex::Complex64;
use sinhdyn::dynamics::{parse_complex, Itinerary, MapSpec, ParabolaSpec, DEFAULT_ESCAPE_RE};
use sinhdyn::measure::{SampleSpec, DEFAULT_N_MAX};
use sinhdyn::rays::{trace_ray, DEFAULT_ANCHOR_RE, DEFAULT_DEPTH, DEFAULT_LANDING_TOL};

use crate::config::{CliError, CliResult, Config};
use crate::render::{render, Coloring, RenderSpec, Window};
use crate::tables::{self, BoxSet, Table};

pub const DEFAULT_RAYS: &str = "0R*24; 0R,-1L*23";

#[derive(Debug, Parser)]
#[command(name = "dyn", version, about = "Dynamics of k·pi·sinh(z): rendering and estimator tables")]
pub struct Cli {
    /// Map, e.g. `sinh:k=1`, `sin:k=1`, `exp:lambda=1`, `general:a=1,b=-1`.
    #[arg(long, global = true)]
    pub map: Option<String>,
    /// Output file; tables go to standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for sampling estimators.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render the dynamical plane to a PPM image.
    Render(RenderArgs),
    /// Box counts and fitted dimension of a Cantor-type set.
    Boxdim(BoxdimArgs),
    /// Generations of a Cantor set with a ratio schedule.
    Cantor(CantorArgs),
    /// Generations of the fat Cantor set.
    Fatcantor(DepthArgs),
    /// Generations of the squares-with-tubes construction.
    Karpinska(KarpinskaArgs),
    /// Fraction of escaping points in a square.
    Density(DensityArgs),
    /// Survival in a right half-plane under the exponential map.
    Survival(SurvivalArgs),
    /// Area of non-escaping points in a truncated strip.
    Stripbound(StripArgs),
    /// Covers refined under the parabola condition.
    Cover(CoverArgs),
    /// Points of a dynamic ray.
    Ray(RayArgs),
    /// Landing point of a dynamic ray.
    Land(LandArgs),
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// `re_min,re_max,im_min,im_max`.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// `escape`, `symbol` or `rays`.
    #[arg(long)]
    pub coloring: Option<String>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub escape_re: Option<f64>,
    /// Itineraries to overlay, separated by `;`.
    #[arg(long)]
    pub rays: Option<String>,
    #[arg(long)]
    pub ray_depth: Option<usize>,
    #[arg(long)]
    pub anchor_re: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BoxdimArgs {
    /// `middle-third`, `product`, `karpinska-squares` or `karpinska-tubes`.
    #[arg(long)]
    pub set: Option<String>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Number of scales `base^-1 … base^-levels`.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub base: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CantorArgs {
    /// Comma-separated ratios (`1/3` or decimals); a single ratio is repeated.
    #[arg(long)]
    pub ratios: Option<String>,
    #[arg(long)]
    pub depth: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DepthArgs {
    #[arg(long)]
    pub depth: Option<usize>,
}

#[derive(Debug, Args)]
pub struct KarpinskaArgs {
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub tube_width_ratio: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub escape_re: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// Lower-left corner of the square, e.g. `6` or `-0.5-0.5i`.
    #[arg(long, allow_hyphen_values = true)]
    pub square_lo: Option<String>,
    #[arg(long)]
    pub side: Option<f64>,
    #[command(flatten)]
    pub sample: SampleArgs,
}

#[derive(Debug, Args)]
pub struct SurvivalArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StripArgs {
    /// Comma-separated values of ξ₀.
    #[arg(long)]
    pub xi0: Option<String>,
    #[arg(long)]
    pub re_cap: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub im_lo: Option<f64>,
    #[command(flatten)]
    pub sample: SampleArgs,
}

#[derive(Debug, Args)]
pub struct CoverArgs {
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    /// Real part of the seed square; defaults to `xi`.
    #[arg(long)]
    pub seed_re: Option<f64>,
    #[arg(long)]
    pub generations: Option<usize>,
    /// Comma-separated measure exponents.
    #[arg(long)]
    pub d: Option<String>,
}

#[derive(Debug, Args)]
pub struct RayArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub itinerary: Option<String>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub anchor_re: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LandArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub itinerary: Option<String>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub anchor_re: Option<f64>,
}

fn parse_arg<T>(key: &str, value: &str) -> CliResult<T>
where
    T: FromStr,
    T::Err: Display,
{
    value.parse().map_err(|e| CliError::Argument(format!("--{key}: {e}")))
}

/// A command-line string option parsed to `T`, falling back to the config file.
fn typed<T>(config: &Config, key: &str, cli: Option<&String>) -> CliResult<Option<T>>
where
    T: FromStr,
    T::Err: Display,
{
    match cli {
        Some(v) => parse_arg(key, v).map(Some),
        None => config.value(key),
    }
}

/// Parses `1/3`, `0.25` or `2`.
pub fn parse_ratio(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("invalid ratio `{s}`"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("invalid ratio `{s}`"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("invalid number `{s}`"))?,
    };
    Ok(value)
}

fn parse_list(key: &str, s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|p| parse_ratio(p).map_err(|e| CliError::Argument(format!("--{key}: {e}"))))
        .collect()
}

struct Cx(Complex64);

impl FromStr for Cx {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_complex(s).map(Cx)
    }
}

fn sample_spec(config: &Config, seed: u64, args: &SampleArgs, default_samples: usize) -> CliResult<SampleSpec> {
    Ok(SampleSpec {
        seed,
        n_samples: config.resolve("samples", args.samples, default_samples)?,
        n_max: config.resolve("n-max", args.n_max, DEFAULT_N_MAX)?,
        escape_re: config.resolve("escape-re", args.escape_re, DEFAULT_ESCAPE_RE)?,
    })
}

fn itinerary_arg(config: &Config, cli: Option<&String>) -> CliResult<Itinerary> {
    typed::<Itinerary>(config, "itinerary", cli)?
        .ok_or_else(|| CliError::Argument("--itinerary is required (e.g. 0R*24)".into()))
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("DYN_THREADS") else { return Ok(()) };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Argument(format!("DYN_THREADS must be a non-negative integer, got `{value}`")))?;
    if threads > 0 {
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let map: MapSpec = typed(&config, "map", cli.map.as_ref())?.unwrap_or(MapSpec::SinhK(1));
    let seed: u64 = config.resolve("seed", cli.seed, 1)?;
    let out: Option<PathBuf> = config.resolve_opt("out", cli.out.clone())?;

    let table: Table = match &cli.command {
        Command::Render(args) => {
            let window: Window =
                typed(&config, "window", args.window.as_ref())?.unwrap_or(Window {
                    re_min: -8.0,
                    re_max: 8.0,
                    im_min: -8.0,
                    im_max: 8.0,
                });
            let coloring: Coloring = typed(&config, "coloring", args.coloring.as_ref())?.unwrap_or(Coloring::EscapeTime);
            let spec = RenderSpec {
                window,
                width_px: config.resolve("width", args.width, 512)?,
                height_px: config.resolve("height", args.height, 512)?,
                coloring,
                n_max: config.resolve("n-max", args.n_max, DEFAULT_N_MAX)?,
                escape_re: config.resolve("escape-re", args.escape_re, DEFAULT_ESCAPE_RE)?,
            };
            let mut rays = Vec::new();
            if coloring == Coloring::RayOverlay {
                let list: String = config.resolve("rays", args.rays.clone(), DEFAULT_RAYS.to_string())?;
                let depth = config.resolve("ray-depth", args.ray_depth, DEFAULT_DEPTH)?;
                let anchor = config.resolve("anchor-re", args.anchor_re, DEFAULT_ANCHOR_RE)?;
                for word in list.split(';').map(str::trim).filter(|w| !w.is_empty()) {
                    let it: Itinerary = parse_arg("rays", word)?;
                    rays.push(trace_ray(&map, &it, anchor, depth.min(it.len()))?.points);
                }
            }
            let out = out.ok_or_else(|| CliError::Argument("render needs --out PATH".into()))?;
            let image = render(&map, &spec, &rays)?;
            return write_output(Some(&out), &image.to_ppm());
        }
        Command::Boxdim(args) => {
            let set: BoxSet = typed(&config, "set", args.set.as_ref())?.unwrap_or(BoxSet::MiddleThird);
            let depth = config.resolve("depth", args.depth, 8)?;
            let levels = config.resolve("levels", args.levels, depth)?;
            let base = config.resolve("base", args.base, set.default_base())?;
            tables::boxdim(set, depth, levels, base)?
        }
        Command::Cantor(args) => {
            let depth = config.resolve("depth", args.depth, 8)?;
            let text: String = config.resolve("ratios", args.ratios.clone(), "1/3".to_string())?;
            let mut ratios = parse_list("ratios", &text)?;
            if ratios.len() == 1 {
                ratios = vec![ratios[0]; depth];
            }
            tables::cantor(&ratios, depth)?
        }
        Command::Fatcantor(args) => tables::fatcantor(config.resolve("depth", args.depth, 10)?)?,
        Command::Karpinska(args) => tables::karpinska(
            config.resolve("depth", args.depth, 6)?,
            config.resolve("tube-width-ratio", args.tube_width_ratio, sinhdyn::cantor::DEFAULT_TUBE_WIDTH_RATIO)?,
        )?,
        Command::Density(args) => {
            let lo = typed::<Cx>(&config, "square-lo", args.square_lo.as_ref())?.map_or(Complex64::new(6.0, 0.0), |c| c.0);
            let side = config.resolve("side", args.side, std::f64::consts::TAU)?;
            tables::density(&map, lo, side, &sample_spec(&config, seed, &args.sample, 100_000)?)?
        }
        Command::Survival(args) => {
            let lambda = typed::<Cx>(&config, "lambda", args.lambda.as_ref())?.map_or(Complex64::new(1.0, 0.0), |c| c.0);
            let sample = SampleSpec::new(seed, config.resolve("samples", args.samples, 1_000_000)?);
            tables::survival(lambda, config.resolve("xi", args.xi, 10.0)?, config.resolve("steps", args.steps, 6)?, &sample)?
        }
        Command::Stripbound(args) => {
            let text: String = config.resolve("xi0", args.xi0.clone(), "8,12".to_string())?;
            let xi0 = parse_list("xi0", &text)?;
            let sample = sample_spec(&config, seed, &args.sample, 100_000)?;
            tables::stripbound(
                &map,
                &xi0,
                config.resolve("im-lo", args.im_lo, 0.0)?,
                config.resolve("re-cap", args.re_cap, 30.0)?,
                &sample,
            )?
        }
        Command::Cover(args) => {
            let xi = config.resolve("xi", args.xi, 20.0)?;
            let spec = ParabolaSpec::new(config.resolve("p", args.p, 2.0)?, xi)?;
            let seed_re = config.resolve("seed-re", args.seed_re, xi)?;
            let text: String = config.resolve("d", args.d.clone(), "1.4,1.6".to_string())?;
            tables::cover(&map, &spec, seed_re, config.resolve("generations", args.generations, 1)?, &parse_list("d", &text)?)?
        }
        Command::Ray(args) => {
            let it = itinerary_arg(&config, args.itinerary.as_ref())?;
            let depth = config.resolve("depth", args.depth, it.len().min(DEFAULT_DEPTH))?;
            tables::ray(&map, &it, depth, config.resolve("anchor-re", args.anchor_re, DEFAULT_ANCHOR_RE)?)?
        }
        Command::Land(args) => {
            let it = itinerary_arg(&config, args.itinerary.as_ref())?;
            let depth = config.resolve("depth", args.depth, it.len().min(DEFAULT_DEPTH))?;
            tables::land(
                &map,
                &it,
                depth,
                config.resolve("tol", args.tol, DEFAULT_LANDING_TOL)?,
                config.resolve("anchor-re", args.anchor_re, DEFAULT_ANCHOR_RE)?,
            )?
        }
    };
    write_output(out.as_deref(), &table.to_bytes()?)
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            if e.exit_code() == 2 {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            e.exit_code()
        }
    }
}

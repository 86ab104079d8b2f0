//! Command-line front end: `bench phase|noisy`, `complete`, `inpaint` and
//! `penalty curves`.
//!
//! Values are resolved as command-line flag, then TOML file (`--config`),
//! then built-in default. Usage errors exit with status 2, runtime failures
//! with status 1.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Deserialize;

use crate::baselines::{solve_convex, ConvexConfig};
use crate::bench::{run_experiment, ExperimentSpec, Method, Protocol};
use crate::error::{Error, Result};
use crate::imaging::{self, ImageBuffer, Initialization, InpaintOptions};
use crate::losses::{write_dense_csv, CompletionProblem};
use crate::penalties::{Penalty, PenaltyKind};
use crate::solver::{solve, SolverConfig};

#[derive(Debug, Parser)]
#[command(
    name = "irnn",
    version,
    about = "Iteratively reweighted nuclear norm matrix recovery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Seeded synthetic completion experiments.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Complete a matrix from a `row,col,value` CSV of observed entries.
    Complete(CompleteArgs),
    /// Recover a corrupted color image channel by channel.
    Inpaint(InpaintArgs),
    /// Penalty function tables.
    #[command(subcommand)]
    Penalty(PenaltyCommand),
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    /// Noise-free success frequency against rank.
    Phase(BenchArgs),
    /// Mean relative error against rank with Gaussian noise on the samples.
    Noisy(BenchArgs),
}

#[derive(Debug, Subcommand)]
enum PenaltyCommand {
    /// Sample g(theta) and its supergradient on a grid.
    Curves(CurvesArgs),
}

#[derive(Debug, Args)]
struct PenaltyFlags {
    /// Penalty kind (lp, scad, logarithm, mcp, capped-l1, etp, geman,
    /// laplace, nuclear, truncated).
    #[arg(long)]
    penalty: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// Number of unpenalized singular values for `truncated`.
    #[arg(long)]
    trunc_rank: Option<usize>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Master seed; per-trial seeds are derived from it.
    #[arg(long, required = true)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Rank grid: `a..b` (inclusive), `a..b..step` or `r1,r2,...`.
    #[arg(long)]
    ranks: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Fraction of entries observed.
    #[arg(long)]
    fraction: Option<f64>,
    /// Standard deviation of the noise added to observed entries.
    #[arg(long)]
    noise: Option<f64>,
    /// Comma-separated methods: penalty kinds and/or `convex`.
    #[arg(long)]
    solvers: Option<String>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Fill the `seconds` column (makes the output machine dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MatrixFormat {
    Dense,
    Triplet,
}

#[derive(Debug, Args)]
struct CompleteArgs {
    /// Observed entries as `row,col,value` CSV (optional `# shape m n`).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    penalty: PenaltyFlags,
    /// Matrix shape `m,n` when the CSV carries no shape comment.
    #[arg(long)]
    shape: Option<String>,
    /// Use the noisy-data schedule instead of the noise-free one.
    #[arg(long)]
    noisy: bool,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<MatrixFormat>,
    /// Write the per-iteration trace CSV here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InpaintArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// PNG whose nonzero pixels mark corrupted locations.
    #[arg(long, conflicts_with = "random")]
    mask: Option<PathBuf>,
    /// Replace this fraction of pixels with random values.
    #[arg(long)]
    random: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    penalty: PenaltyFlags,
    /// Start from `zero` or from the convex solution (`convex`).
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Save the corrupted input here.
    #[arg(long)]
    corrupted_out: Option<PathBuf>,
    /// Also run the convex baseline and report its PSNR.
    #[arg(long)]
    compare_convex: bool,
    /// Write `method,psnr` rows here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurvesArgs {
    /// A penalty kind, or `all` for every surrogate.
    #[arg(long, default_value = "all")]
    kind: String,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// `start:stop:step`, inclusive of `stop`.
    #[arg(long, default_value = "0:5:0.01")]
    grid: String,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Optional TOML configuration. Every key may be omitted.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub bench: BenchFile,
    #[serde(default)]
    pub penalty: PenaltyFile,
    #[serde(default)]
    pub solver: SolverFile,
    #[serde(default)]
    pub inpaint: InpaintFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchFile {
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub ranks: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub fraction: Option<f64>,
    pub noise: Option<f64>,
    pub solvers: Option<Vec<String>>,
    pub max_iters: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyFile {
    pub kind: Option<String>,
    pub gamma: Option<f64>,
    pub p: Option<f64>,
    pub trunc_rank: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverFile {
    pub max_iters: Option<usize>,
    pub noisy: Option<bool>,
    pub format: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InpaintFile {
    pub random: Option<f64>,
    pub seed: Option<u64>,
    pub init: Option<String>,
    pub lambda0_scale: Option<f64>,
    pub target_ratio: Option<f64>,
    pub max_iters: Option<usize>,
    pub refine_iters: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn load_opt(path: Option<&PathBuf>) -> Result<Self> {
        path.map_or_else(|| Ok(FileConfig::default()), |p| FileConfig::load(p))
    }
}

/// Parses `argv` (program name first) and runs one subcommand. Returns the
/// process exit status.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bench(BenchCommand::Phase(args)) => bench(args, Protocol::NoiseFree),
        Command::Bench(BenchCommand::Noisy(args)) => bench(args, Protocol::Noisy),
        Command::Complete(args) => complete(args),
        Command::Inpaint(args) => inpaint(args),
        Command::Penalty(PenaltyCommand::Curves(args)) => curves(args),
    }
}

/// Parses `a..b`, `a..b..step` or a comma-separated list.
pub fn parse_ranks(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("bad rank grid {text:?}"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    if text.contains("..") {
        let parts: Vec<&str> = text.split("..").collect();
        let (lo, hi, step) = match parts.as_slice() {
            [a, b] => (num(a)?, num(b)?, 1),
            [a, b, s] => (num(a)?, num(b)?, num(s)?),
            _ => return Err(bad()),
        };
        if step == 0 || lo > hi {
            return Err(bad());
        }
        Ok((lo..=hi).step_by(step).collect())
    } else {
        text.split(',').map(num).collect()
    }
}

/// Parses `start:stop:step` into the points `start + i * step <= stop`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("bad grid {text:?}, expected start:stop:step"));
    let parts = text
        .split(':')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(start.is_finite() && stop.is_finite() && step > 0.0 && stop >= start) {
        return Err(bad());
    }
    // The small slack keeps `stop` when it is a multiple of `step` up to
    // rounding.
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

fn build_penalty(
    kind: Option<&str>,
    gamma: Option<f64>,
    p: Option<f64>,
    trunc_rank: Option<usize>,
    lambda: f64,
) -> Result<Penalty> {
    let kind: PenaltyKind = kind.unwrap_or("lp").parse()?;
    let mut penalty = Penalty::new(kind, lambda)?;
    if let Some(g) = gamma {
        penalty = penalty.with_gamma(g)?;
    }
    if let Some(p) = p {
        penalty = penalty.with_p(p)?;
    }
    if let Some(r) = trunc_rank {
        penalty = penalty.with_trunc_rank(r)?;
    }
    Ok(penalty)
}

fn penalty_from(flags: &PenaltyFlags, file: &PenaltyFile) -> Result<Penalty> {
    build_penalty(
        flags.penalty.as_deref().or(file.kind.as_deref()),
        flags.gamma.or(file.gamma),
        flags.p.or(file.p),
        flags.trunc_rank.or(file.trunc_rank),
        1.0,
    )
}

fn method_from_name(name: &str, file: &PenaltyFile) -> Result<Method> {
    if name.trim().eq_ignore_ascii_case("convex") {
        return Ok(Method::Convex);
    }
    // Shape parameters from the file apply only to the kind they name.
    let kind: PenaltyKind = name.parse()?;
    let same = file
        .kind
        .as_deref()
        .map(|k| k.parse::<PenaltyKind>().ok() == Some(kind))
        .unwrap_or(false);
    let (g, p, r) = if same {
        (file.gamma, file.p, file.trunc_rank)
    } else {
        (None, None, None)
    };
    Ok(Method::Irnn(build_penalty(Some(name), g, p, r, 1.0)?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn bench(args: BenchArgs, protocol: Protocol) -> Result<()> {
    let file = FileConfig::load_opt(args.config.as_ref())?;
    let b = &file.bench;
    let m = args.m.or(b.m).unwrap_or(60);
    let n = args.n.or(b.n).unwrap_or(60);
    let ranks = match (&args.ranks, &b.ranks) {
        (Some(text), _) => parse_ranks(text)?,
        (None, Some(list)) => list.clone(),
        (None, None) => (3..=12).collect(),
    };
    let trials = args.trials.or(b.trials).unwrap_or(20);
    let solvers: Vec<String> = match (&args.solvers, &b.solvers) {
        (Some(text), _) => text.split(',').map(|s| s.trim().to_string()).collect(),
        (None, Some(list)) => list.clone(),
        (None, None) => vec!["lp".into(), "convex".into()],
    };
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| b.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let prefix = match protocol {
        Protocol::NoiseFree => "phase",
        Protocol::Noisy => "noisy",
    };

    // Validate everything before computing anything.
    let mut specs = Vec::new();
    for name in &solvers {
        let method = method_from_name(name, &file.penalty)?;
        let mut spec = match protocol {
            Protocol::NoiseFree => {
                ExperimentSpec::phase(m, n, ranks.clone(), trials, args.seed, method)
            }
            Protocol::Noisy => {
                ExperimentSpec::noisy(m, n, ranks.clone(), trials, args.seed, method)
            }
        };
        if let Some(f) = args.fraction.or(b.fraction) {
            spec.observe_fraction = f;
        }
        if let Some(s) = args.noise.or(b.noise) {
            spec.noise_sigma = s;
        }
        spec.max_iters = args.max_iters.or(b.max_iters);
        spec.validate()?;
        specs.push((name.trim().to_ascii_lowercase(), spec));
    }

    fs::create_dir_all(&out_dir)?;
    for (name, spec) in specs {
        let started = Instant::now();
        let result = run_experiment(&spec)?;
        let trials_path = out_dir.join(format!("{prefix}_{name}_trials.csv"));
        let mut w = create(&trials_path)?;
        result.write_trials_csv(&mut w, args.timing)?;
        w.flush()?;
        let agg_path = out_dir.join(format!("{prefix}_{name}_aggregate.csv"));
        let mut w = create(&agg_path)?;
        result.write_summary_csv(&mut w)?;
        w.flush()?;
        eprintln!(
            "{}: {} trials in {:.1}s -> {}, {}",
            result.method,
            result.trials.len(),
            started.elapsed().as_secs_f64(),
            trials_path.display(),
            agg_path.display()
        );
    }
    Ok(())
}

fn parse_shape(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("bad shape {text:?}, expected m,n"));
    let dims = text
        .split([',', 'x'])
        .map(|s| s.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    match dims[..] {
        [m, n] => Ok((m, n)),
        _ => Err(bad()),
    }
}

fn complete(args: CompleteArgs) -> Result<()> {
    let file = FileConfig::load_opt(args.config.as_ref())?;
    let penalty = penalty_from(&args.penalty, &file.penalty)?;
    let format = match (args.format, file.solver.format.as_deref()) {
        (Some(f), _) => f,
        (None, Some(text)) => MatrixFormat::from_str(text, true)
            .map_err(|_| Error::Config(format!("unknown format {text:?}")))?,
        (None, None) => MatrixFormat::Dense,
    };
    let shape = args.shape.as_deref().map(parse_shape).transpose()?;
    let problem = CompletionProblem::read_csv(BufReader::new(File::open(&args.input)?), shape)?;
    let noisy = args.noisy || file.solver.noisy.unwrap_or(false);
    let mut cfg = if noisy {
        SolverConfig::noisy(&problem)
    } else {
        SolverConfig::noise_free(&problem)
    };
    if let Some(it) = args.max_iters.or(file.solver.max_iters) {
        cfg.max_iters = it;
    }
    let x0 = DMatrix::zeros(problem.nrows(), problem.ncols());
    let report = if penalty.kind() == PenaltyKind::NuclearConvex {
        let mut ccfg = if noisy {
            ConvexConfig::noisy(&problem)
        } else {
            ConvexConfig::noise_free(&problem)
        };
        ccfg.max_iters = cfg.max_iters;
        solve_convex(&problem, &ccfg, &x0)?
    } else {
        solve(&problem, &penalty, &cfg, &x0)?
    };

    let mut w = create(&args.out)?;
    match format {
        MatrixFormat::Dense => write_dense_csv(&mut w, &report.final_x)?,
        MatrixFormat::Triplet => {
            let all = CompletionProblem::fully_observed(&report.final_x)?;
            all.write_csv(&mut w)?;
        }
    }
    w.flush()?;
    if let Some(path) = &args.report {
        let mut w = create(path)?;
        report.write_trace_csv(&mut w)?;
        w.flush()?;
    }
    eprintln!(
        "{}x{} from {} entries: rank {}, {} iterations ({})",
        problem.nrows(),
        problem.ncols(),
        problem.num_observed(),
        report.final_rank(),
        report.iterations,
        report.termination
    );
    Ok(())
}

fn parse_init(text: &str) -> Result<Initialization> {
    match text.trim().to_ascii_lowercase().as_str() {
        "zero" => Ok(Initialization::Zero),
        "convex" | "convex-warm-start" => Ok(Initialization::ConvexWarmStart),
        other => Err(Error::Config(format!("unknown initialization {other:?}"))),
    }
}

fn inpaint(args: InpaintArgs) -> Result<()> {
    let file = FileConfig::load_opt(args.config.as_ref())?;
    let f = &file.inpaint;
    let original = ImageBuffer::load_png(&args.input)?;
    let random = args.random.or(f.random);
    let (corrupted, mask) = match (&args.mask, random) {
        (Some(path), _) => imaging::apply_text_mask(&original, &ImageBuffer::load_png(path)?)?,
        (None, Some(fraction)) => {
            imaging::corrupt_random(&original, fraction, args.seed.or(f.seed).unwrap_or(0))?
        }
        (None, None) => {
            return Err(Error::Config(
                "one of --mask or --random is required".into(),
            ))
        }
    };

    let kind = args
        .penalty
        .penalty
        .as_deref()
        .or(file.penalty.kind.as_deref());
    let method = match kind {
        Some(k) if k.trim().eq_ignore_ascii_case("convex") => Method::Convex,
        _ => Method::Irnn(penalty_from(&args.penalty, &file.penalty)?),
    };
    let mut options = InpaintOptions::new(method);
    if let Some(init) = args.init.as_deref().or(f.init.as_deref()) {
        options.initialization = parse_init(init)?;
    }
    if let Some(v) = f.lambda0_scale {
        options.lambda0_scale = v;
    }
    if let Some(v) = f.target_ratio {
        options.target_ratio = v;
    }
    if let Some(v) = f.max_iters {
        options.max_iters = v;
    }
    if let Some(v) = f.refine_iters {
        options.refine_iters = v;
    }

    if let Some(path) = &args.corrupted_out {
        corrupted.save_png(path)?;
    }
    let recovered = imaging::inpaint(&corrupted, &mask, &options)?;
    recovered.save_png(&args.out)?;

    let mut rows = vec![
        (
            "corrupted".to_string(),
            imaging::psnr(&original, &corrupted)?,
        ),
        (method.name(), imaging::psnr(&original, &recovered)?),
    ];
    if args.compare_convex && method != Method::Convex {
        let convex = imaging::inpaint(
            &corrupted,
            &mask,
            &InpaintOptions {
                method: Method::Convex,
                ..options.clone()
            },
        )?;
        rows.push((Method::Convex.name(), imaging::psnr(&original, &convex)?));
    }
    if let Some(path) = &args.report {
        let mut w = create(path)?;
        writeln!(w, "method,psnr")?;
        for (name, value) in &rows {
            writeln!(w, "{name},{value}")?;
        }
        w.flush()?;
    }
    for (name, value) in &rows {
        eprintln!("{name}: {value:.2} dB");
    }
    Ok(())
}

fn curves(args: CurvesArgs) -> Result<()> {
    let grid = parse_grid(&args.grid)?;
    let all = args.kind.trim().eq_ignore_ascii_case("all");
    let kinds: Vec<PenaltyKind> = if all {
        PenaltyKind::SURROGATES.to_vec()
    } else {
        vec![args.kind.parse()?]
    };
    let penalties = kinds
        .iter()
        .map(|&k| {
            if k == PenaltyKind::TruncatedNuclear {
                return Err(Error::Config(
                    "the truncated nuclear norm depends on the index, not on theta alone".into(),
                ));
            }
            build_penalty(Some(k.name()), args.gamma, args.p, None, args.lambda)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    if all {
        writeln!(out, "kind,theta,g,dg")?;
    } else {
        writeln!(out, "theta,g,dg")?;
    }
    for penalty in &penalties {
        for &theta in &grid {
            let g = penalty.value(theta)?;
            let dg = penalty.supergradient(theta)?.to_f64();
            if all {
                writeln!(out, "{},{theta},{g},{dg}", penalty.kind().name())?;
            } else {
                writeln!(out, "{theta},{g},{dg}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_grids() {
        assert_eq!(parse_ranks("3..6").unwrap(), vec![3, 4, 5, 6]);
        assert_eq!(parse_ranks("2..10..4").unwrap(), vec![2, 6, 10]);
        assert_eq!(parse_ranks("5, 1,9").unwrap(), vec![5, 1, 9]);
        for bad in ["6..3", "1..5..0", "a..3", ""] {
            assert!(parse_ranks(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn theta_grids() {
        let g = parse_grid("0:5:0.01").unwrap();
        assert_eq!(g.len(), 501);
        assert_eq!(g[0], 0.0);
        assert!((g[500] - 5.0).abs() < 1e-12);
        assert_eq!(parse_grid("1:1:0.5").unwrap(), vec![1.0]);
        for bad in ["0:5", "0:5:0", "5:0:1", "x:1:1"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn shapes() {
        assert_eq!(parse_shape("4,7").unwrap(), (4, 7));
        assert_eq!(parse_shape("4x7").unwrap(), (4, 7));
        assert!(parse_shape("4").is_err());
    }

    #[test]
    fn file_config_rejects_unknown_keys() {
        let ok: FileConfig = toml::from_str("[bench]\nm = 10\nranks = [1, 2]\n").unwrap();
        assert_eq!(ok.bench.m, Some(10));
        assert!(toml::from_str::<FileConfig>("[bench]\nsize = 3\n").is_err());
    }

    #[test]
    fn file_shape_parameters_follow_their_kind() {
        let file = PenaltyFile {
            kind: Some("scad".into()),
            gamma: Some(5.0),
            ..Default::default()
        };
        match method_from_name("scad", &file).unwrap() {
            Method::Irnn(p) => assert_eq!(p.gamma(), 5.0),
            Method::Convex => unreachable!(),
        }
        match method_from_name("mcp", &file).unwrap() {
            Method::Irnn(p) => assert_eq!(p.gamma(), PenaltyKind::Mcp.default_gamma()),
            Method::Convex => unreachable!(),
        }
        assert_eq!(method_from_name("Convex", &file).unwrap(), Method::Convex);
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};
use jlrelease::experiments::{
    distance_recovery, std_curve, table1, verify, DistanceRecoveryConfig, DistanceRecoveryReport,
    StdCurveConfig, Table1Config, REFERENCE_ACCURACIES,
};
use jlrelease::io::{read_csv, read_manifest, write_csv, write_json, write_manifest, RunManifest};
use jlrelease::projection::{dimension_warning, jl_distortion};
use jlrelease::{calibrate, make_blobs, release, PrivacyMode, RngSeed};

#[derive(Debug, Parser)]
#[command(
    name = "jlrelease",
    version,
    about = "Private data release by random projection plus Laplace noise"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a two-cluster Gaussian dataset.
    Generate(GenerateArgs),
    /// Release a dataset CSV through the mechanism.
    Release(ReleaseArgs),
    /// k-means accuracy on raw versus private data over a (d, k) grid.
    Table1(Table1Args),
    /// Error distribution of recovered squared distances.
    DistanceRecovery(DistanceRecoveryArgs),
    /// Per-coordinate standard deviation of released data as k grows.
    StdCurve(StdCurveArgs),
    /// Run the Monte-Carlo property suites.
    Verify(VerifyArgs),
    /// Rerun the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct Output {
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PrivacyArgs {
    #[arg(long, default_value_t = 4.0)]
    epsilon: f64,
    /// Bound on the squared L2 change of a row (row mode).
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Tail parameter as a multiple of its minimum (row mode, >= 1).
    #[arg(long, default_value_t = 1.0)]
    t_multiplier: f64,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 1000)]
    n_per_cluster: usize,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 4.0)]
    center_distance: f64,
    #[arg(long, default_value_t = 1.0)]
    cluster_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct ReleaseArgs {
    /// Dataset CSV (header f0..f{d-1}, optional label column).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_mode, default_value = "element")]
    mode: PrivacyMode,
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    privacy: PrivacyArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct Table1Args {
    /// Comma-separated d:k cells.
    #[arg(long, value_parser = parse_grid, default_value = "3:2,10:3,50:10,100:20")]
    grid: Grid,
    #[command(flatten)]
    privacy: PrivacyArgs,
    /// Number of seeds averaged per cell.
    #[arg(long, visible_alias = "trials", default_value_t = 20)]
    seeds: usize,
    #[arg(long, default_value_t = 1000)]
    n_per_cluster: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct DistanceRecoveryArgs {
    #[arg(long, default_value_t = 1000)]
    n_pairs: usize,
    #[arg(long, visible_alias = "trials", default_value_t = 1000)]
    n_repeats: usize,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Run a single mode; both modes when omitted.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<PrivacyMode>,
    #[command(flatten)]
    privacy: PrivacyArgs,
    #[arg(long, default_value_t = 1000)]
    n_per_cluster: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct StdCurveArgs {
    /// Range `lo..hi` (inclusive) or comma-separated list.
    #[arg(long, value_parser = parse_k_values, default_value = "2..20")]
    k_values: KValues,
    #[command(flatten)]
    privacy: PrivacyArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Suite name or `all`.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Overrides each suite's default sample count.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Output directory for the rerun; defaults to the recorded one.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
struct Grid(Vec<(usize, usize)>);

#[derive(Debug, Clone)]
struct KValues(Vec<usize>);

fn parse_mode(s: &str) -> std::result::Result<PrivacyMode, String> {
    s.parse().map_err(|e: jlrelease::Error| e.to_string())
}

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let cells = s
        .split(',')
        .filter(|c| !c.is_empty())
        .map(|cell| {
            let (d, k) = cell
                .split_once(':')
                .ok_or_else(|| format!("cell {cell:?} is not d:k"))?;
            Ok((
                d.trim().parse().map_err(|_| format!("bad d in {cell:?}"))?,
                k.trim().parse().map_err(|_| format!("bad k in {cell:?}"))?,
            ))
        })
        .collect::<std::result::Result<Vec<_>, String>>()?;
    Ok(Grid(cells))
}

fn parse_k_values(s: &str) -> std::result::Result<KValues, String> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo
            .parse()
            .map_err(|_| format!("bad range start in {s:?}"))?;
        let hi: usize = hi
            .trim_start_matches('=')
            .parse()
            .map_err(|_| format!("bad range end in {s:?}"))?;
        return Ok(KValues((lo..=hi).collect()));
    }
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| format!("bad k value {v:?}")))
        .collect::<std::result::Result<_, _>>()
        .map(KValues)
}

/// Runs `cli`; `args` are the raw arguments, recorded for replay. Returns
/// `false` when the command ran but a checked property failed.
pub fn run(cli: Cli, args: Vec<String>) -> Result<bool> {
    match cli.command {
        Command::Generate(a) => generate(a, args),
        Command::Release(a) => release_cmd(a, args),
        Command::Table1(a) => table1_cmd(a, args),
        Command::DistanceRecovery(a) => distance_recovery_cmd(a, args),
        Command::StdCurve(a) => std_curve_cmd(a, args),
        Command::Verify(a) => verify_cmd(a, args),
        Command::Replay(a) => replay(a),
    }
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn manifest(args: Vec<String>, seed: u64) -> RunManifest {
    RunManifest::new(
        args,
        seed,
        Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
    )
}

fn finish(out: &Path, mut m: RunManifest, outputs: &[&str]) -> Result<()> {
    m.outputs = outputs.iter().map(|s| s.to_string()).collect();
    write_manifest(out.join("manifest.json"), &m)?;
    Ok(())
}

fn generate(a: GenerateArgs, args: Vec<String>) -> Result<bool> {
    let out = &a.output.out;
    prepare(out)?;
    let ds = make_blobs(
        a.n_per_cluster,
        a.d,
        a.center_distance,
        a.cluster_std,
        RngSeed::new(a.seed),
    )?;
    write_csv(out.join("dataset.csv"), &ds.data, Some(&ds.labels))?;
    let mut m = manifest(args, a.seed);
    m.d = Some(a.d);
    m.n = Some(ds.data.rows());
    finish(out, m, &["dataset.csv"])?;
    println!(
        "wrote {} rows x {} columns to {}",
        ds.data.rows(),
        ds.data.cols(),
        out.join("dataset.csv").display()
    );
    Ok(true)
}

fn release_cmd(a: ReleaseArgs, args: Vec<String>) -> Result<bool> {
    let out = &a.output.out;
    let (x, labels) =
        read_csv(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let p = &a.privacy;
    let params = calibrate(a.mode, a.k, p.epsilon, x.cols(), p.alpha, p.t_multiplier)?;
    if let Some(msg) = dimension_warning(x.cols(), a.k) {
        log::warn!("{msg}");
    }
    if params.vacuous_bound() {
        log::warn!(
            "failure_bound = {} (unclamped {:.6}): the {} guarantee holds with probability 0 for this k{}",
            params.failure_bound(),
            params.unclamped_failure_bound(),
            params.mode(),
            if a.mode == PrivacyMode::RowWise { "; raise --t-multiplier above 1" } else { "" },
        );
    }
    match jl_distortion(a.k, x.rows()) {
        Some(l) => log::info!("distance distortion guaranteed w.h.p.: {l:.4}"),
        None => log::info!(
            "k={} is too small for a distance-distortion guarantee on {} rows",
            a.k,
            x.rows()
        ),
    }
    prepare(out)?;
    let z = release(&x, &params, RngSeed::new(a.seed))?;
    write_csv(out.join("released.csv"), z.z(), labels.as_deref())?;
    let mut m = manifest(args, a.seed);
    m.record_params(&params);
    m.d = Some(x.cols());
    m.n = Some(x.rows());
    m.labels_passed_through = Some(labels.is_some());
    finish(out, m, &["released.csv"])?;
    println!(
        "released {} rows with k={} ({} mode, b={}, failure_bound={})",
        z.n(),
        z.k(),
        params.mode(),
        params.b(),
        params.failure_bound()
    );
    Ok(true)
}

fn table1_cmd(a: Table1Args, args: Vec<String>) -> Result<bool> {
    let out = &a.output.out;
    prepare(out)?;
    let config = Table1Config {
        grid: a.grid.0,
        epsilon: a.privacy.epsilon,
        alpha: a.privacy.alpha,
        t_multiplier: a.privacy.t_multiplier,
        seeds: a.seeds,
        seed: a.seed,
        n_per_cluster: a.n_per_cluster,
        ..Default::default()
    };
    let report = table1(&config)?;
    write_json(out.join("table1.json"), &report)?;
    fs::write(out.join("table1.csv"), report.to_csv())?;
    let mut m = manifest(args, a.seed);
    m.epsilon = Some(config.epsilon);
    m.alpha = Some(config.alpha);
    m.t_multiplier = Some(config.t_multiplier);
    m.n = Some(2 * config.n_per_cluster);
    finish(out, m, &["table1.json", "table1.csv"])?;

    println!(
        "{:>4} {:>3}  {:<8} {:>16} {:>10}",
        "d", "k", "privacy", "accuracy", "reference"
    );
    for c in &report.cells {
        let reference = REFERENCE_ACCURACIES
            .iter()
            .find(|r| r.0 == c.d && r.1 == c.k)
            .map(|r| match c.privacy.as_str() {
                "none" => r.2,
                "element" => r.3,
                _ => r.4,
            });
        println!(
            "{:>4} {:>3}  {:<8} {:>8.4} ± {:.4} {:>10}",
            c.d,
            c.k,
            c.privacy,
            c.accuracy.mean,
            c.accuracy.std,
            reference.map(|p| format!("{p:.4}")).unwrap_or_default()
        );
    }
    Ok(true)
}

fn distance_recovery_cmd(a: DistanceRecoveryArgs, args: Vec<String>) -> Result<bool> {
    let out = &a.output.out;
    prepare(out)?;
    let config = DistanceRecoveryConfig {
        n_pairs: a.n_pairs,
        n_repeats: a.n_repeats,
        d: a.d,
        k: a.k,
        epsilon: a.privacy.epsilon,
        alpha: a.privacy.alpha,
        t_multiplier: a.privacy.t_multiplier,
        modes: a
            .mode
            .map_or_else(|| PrivacyMode::ALL.to_vec(), |m| vec![m]),
        seed: a.seed,
        n_per_cluster: a.n_per_cluster,
        ..Default::default()
    };
    let report = distance_recovery(&config)?;
    let mut outputs = vec!["report.json".to_owned()];
    write_json(out.join("report.json"), &report)?;
    for mode in &report.modes {
        let diffs = format!("differences_{}.csv", mode.mode);
        let hist = format!("histogram_{}.csv", mode.mode);
        fs::write(out.join(&diffs), report.differences_csv(mode))?;
        fs::write(out.join(&hist), DistanceRecoveryReport::histogram_csv(mode))?;
        outputs.extend([diffs, hist]);
        println!(
            "{:<8} b={:.5} mean difference {:+.5} (se {:.5}, {} draws)",
            mode.mode.as_str(),
            mode.b,
            mode.difference.mean,
            mode.difference.std_error,
            mode.difference.trials
        );
    }
    let mut m = manifest(args, a.seed);
    if let [single] = config.modes.as_slice() {
        m.record_params(&calibrate(
            *single,
            config.k,
            config.epsilon,
            config.d,
            config.alpha,
            config.t_multiplier,
        )?);
    } else {
        m.epsilon = Some(config.epsilon);
        m.k = Some(config.k);
        m.alpha = Some(config.alpha);
        m.t_multiplier = Some(config.t_multiplier);
    }
    m.d = Some(config.d);
    m.n = Some(2 * config.n_per_cluster);
    finish(
        out,
        m,
        &outputs.iter().map(String::as_str).collect::<Vec<_>>(),
    )?;
    Ok(true)
}

fn std_curve_cmd(a: StdCurveArgs, args: Vec<String>) -> Result<bool> {
    let out = &a.output.out;
    prepare(out)?;
    let config = StdCurveConfig {
        k_values: a.k_values.0,
        epsilon: a.privacy.epsilon,
        alpha: a.privacy.alpha,
        t_multiplier: a.privacy.t_multiplier,
        ..Default::default()
    };
    let report = std_curve(&config)?;
    fs::write(out.join("std_curve.csv"), report.to_csv())?;
    write_json(out.join("report.json"), &report)?;
    let mut m = manifest(args, 0);
    m.epsilon = Some(config.epsilon);
    m.alpha = Some(config.alpha);
    m.t_multiplier = Some(config.t_multiplier);
    finish(out, m, &["std_curve.csv", "report.json"])?;
    print!("{}", report.to_csv());
    Ok(true)
}

fn verify_cmd(a: VerifyArgs, args: Vec<String>) -> Result<bool> {
    let out = &a.output.out;
    let suites = verify::resolve_suite(&a.suite)?;
    prepare(out)?;
    let report = verify::verify(&suites, a.seed, a.trials)?;
    write_json(out.join("verify.json"), &report)?;
    finish(out, manifest(args, a.seed), &["verify.json"])?;
    for r in &report.results {
        println!(
            "[{}] {}: {} (observed {:.6}, bound {:.6}, {} trials){}",
            if r.passed { "PASS" } else { "FAIL" },
            r.suite,
            r.property,
            r.observed,
            r.bound,
            r.trials,
            if r.detail.is_empty() {
                String::new()
            } else {
                format!(" {}", r.detail)
            }
        );
    }
    Ok(report.all_passed)
}

fn replay(a: ReplayArgs) -> Result<bool> {
    let m =
        read_manifest(&a.manifest).with_context(|| format!("loading {}", a.manifest.display()))?;
    let mut args = m.args.clone();
    if matches!(args.first().map(String::as_str), Some("replay") | None) {
        bail!("manifest does not record a replayable command");
    }
    if let Some(out) = a.out {
        let out = out.to_string_lossy().into_owned();
        match args.iter().position(|s| s == "--out") {
            Some(i) if i + 1 < args.len() => args[i + 1] = out,
            _ => match args.iter().position(|s| s.starts_with("--out=")) {
                Some(i) => args[i] = format!("--out={out}"),
                None => bail!("recorded command has no --out"),
            },
        }
    }
    let cli =
        Cli::try_parse_from(std::iter::once("jlrelease".to_owned()).chain(args.iter().cloned()))?;
    run(cli, args)
}

//! `qre`: extraction, fitting, synthesis, statistics and equilibrium solving
//! from the command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use qre_core::estimation::bootstrap_around;
use qre_core::io::{self, DatasetRow};
use qre_core::report::{descriptive_stats, EstimationReport};
use qre_core::solver::population_equilibria;
use qre_core::trajectory::{run_pipeline, SiteConfig};
use qre_core::{
    conflict_confusion, fit_em, fixed_point, generate, CovariateSpec, Error, EstimationConfig,
    GameKind, Observation, PayoffParams,
};

#[derive(Parser, Debug)]
#[command(
    name = "qre",
    version,
    about = "Logit QRE crossing games between right-turning and straight-going road users"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Turn image-space trajectories into a labelled dataset.
    Extract(ExtractArgs),
    /// Estimate payoff parameters and rationality from a dataset.
    Fit(FitArgs),
    /// Simulate a dataset from known parameters.
    Synth(SynthArgs),
    /// Per-game descriptive statistics of a dataset.
    Stats(StatsArgs),
    /// Solve the equilibrium for given parameters.
    Solve(SolveArgs),
}

#[derive(Args, Debug)]
struct ExtractArgs {
    /// Trajectory CSV `t,track_id,class,x,y` in image pixels.
    #[arg(long)]
    input: PathBuf,
    /// Site configuration JSON.
    #[arg(long)]
    site: PathBuf,
    /// Labels CSV `pair_id,y_cross,y_yield,n_group`.
    #[arg(long)]
    labels: PathBuf,
    /// Dataset CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Rejection report CSV [default: <out stem>.rejections.csv].
    #[arg(long)]
    rejections: Option<PathBuf>,
}

/// Numerical settings shared by `fit` and `solve`. Flags override the
/// config file, which overrides the defaults.
#[derive(Args, Debug, Default)]
struct Tuning {
    /// Estimation config JSON (any subset of the fields).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Convergence threshold on the probability step.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Relaxation weight of each update, in (0, 1].
    #[arg(long)]
    damping: Option<f64>,
}

impl Tuning {
    fn base(&self) -> Result<EstimationConfig, Error> {
        match &self.config {
            Some(path) => Ok(serde_json::from_str(&read_text(path)?)?),
            None => Ok(EstimationConfig::default()),
        }
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Dataset CSV.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for report.json, report.txt, trace.csv and fitted.csv.
    #[arg(long)]
    out: PathBuf,
    /// Fit only rows of this game.
    #[arg(long)]
    kind: Option<GameKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Bootstrap replicates; 0 skips the bootstrap.
    #[arg(long)]
    bootstrap_reps: Option<usize>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Payoff parameters JSON (`beta0`..`beta4`, `c1`, `c2`, `lambda`).
    #[arg(long)]
    params: PathBuf,
    /// Game whose covariate distribution is used.
    #[arg(long, default_value = "vp")]
    kind: GameKind,
    /// Covariate spec JSON replacing the game default.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Number of observations.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Truth CSV [default: <out stem>.truth.csv].
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// Dataset CSV.
    #[arg(long)]
    input: PathBuf,
    /// JSON report to write; the text table always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    kind: Option<GameKind>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Payoff parameters JSON.
    #[arg(long)]
    params: PathBuf,
    /// Dataset CSV; solves the population equilibrium.
    #[arg(long, conflicts_with = "obs")]
    input: Option<PathBuf>,
    /// Single observation `v_s,v_r,d_s,d_r,n_group`.
    #[arg(long, value_delimiter = ',')]
    obs: Option<Vec<f64>>,
    #[arg(long)]
    kind: Option<GameKind>,
    /// Trace CSV `round,mean_p_cross,mean_p_yield` to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        line: 0,
        reason: e.to_string(),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        line: e.line() as u64,
        reason: e.to_string(),
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(Default::default, |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn filter_kind(rows: Vec<DatasetRow>, kind: Option<GameKind>) -> Vec<DatasetRow> {
    match kind {
        Some(k) => rows.into_iter().filter(|r| r.kind == k).collect(),
        None => rows,
    }
}

/// The single game present, if there is exactly one.
fn only_kind(rows: &[DatasetRow]) -> Option<GameKind> {
    let first = rows.first()?.kind;
    rows.iter().all(|r| r.kind == first).then_some(first)
}

fn extract(args: ExtractArgs) -> Result<(), Error> {
    let site = SiteConfig::from_json_file(&args.site)?;
    let labels = io::read_labels(&args.labels)?;
    let points = io::read_trajectories(&args.input)?;
    let report = run_pipeline(points, &site, &labels)?;
    let rows: Vec<DatasetRow> = report
        .pairs
        .iter()
        .map(|p| DatasetRow {
            kind: p.kind,
            observation: p.observation.clone(),
        })
        .collect();
    io::write_dataset(&args.out, &rows)?;
    let rejections = args
        .rejections
        .unwrap_or_else(|| sibling(&args.out, "rejections"));
    io::write_rejections(&rejections, &report)?;
    println!(
        "{} pairs written, {} rejected, {} unlabeled, {} tracks skipped",
        report.pairs.len(),
        report.rejections.len(),
        report.unlabeled.len(),
        report.skipped_tracks.len()
    );
    Ok(())
}

fn fit(args: FitArgs) -> Result<(), Error> {
    let mut cfg = args.tuning.base()?;
    if let Some(tol) = args.tuning.tol {
        cfg.outer_tol = tol;
        cfg.solver.tol = tol;
    }
    if let Some(max_iter) = args.tuning.max_iter {
        cfg.outer_max_iter = max_iter;
    }
    if let Some(damping) = args.tuning.damping {
        cfg.solver.damping = damping;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = args.bootstrap_reps {
        cfg.bootstrap_reps = reps;
    }
    cfg.validate()?;

    let rows = filter_kind(io::read_dataset(&args.input)?, args.kind);
    let observations: Vec<Observation> = rows.iter().map(|r| r.observation.clone()).collect();
    let fitted = fit_em(&observations, &cfg)?;
    let boot = if cfg.bootstrap_reps > 0 {
        Some(bootstrap_around(&observations, &cfg, &fitted)?)
    } else {
        None
    };
    let report = EstimationReport::new(
        args.kind.or_else(|| only_kind(&rows)),
        &fitted,
        boot.as_ref(),
        &cfg,
    );

    fs::create_dir_all(&args.out)?;
    fs::write(
        args.out.join("report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    let text = report.to_text();
    fs::write(args.out.join("report.txt"), &text)?;
    io::write_trace(&args.out.join("trace.csv"), &fitted.trace)?;
    io::write_fitted(&args.out.join("fitted.csv"), &rows, &fitted.fitted)?;
    print!("{text}");
    Ok(())
}

fn synth(args: SynthArgs) -> Result<(), Error> {
    let params: PayoffParams = read_json(&args.params)?;
    let spec = match &args.spec {
        Some(path) => read_json(path)?,
        None => CovariateSpec::default_for(args.kind),
    };
    let records = generate(&params, &spec, args.n, args.seed)?;
    let rows: Vec<DatasetRow> = records
        .iter()
        .map(|r| DatasetRow {
            kind: args.kind,
            observation: r.observation.clone(),
        })
        .collect();
    let truth: Vec<_> = records
        .iter()
        .map(|r| {
            (
                r.observation.id.clone().unwrap_or_default(),
                r.true_equilibrium,
            )
        })
        .collect();
    io::write_dataset(&args.out, &rows)?;
    io::write_truth(
        &args.truth.unwrap_or_else(|| sibling(&args.out, "truth")),
        &truth,
    )?;
    Ok(())
}

fn stats(args: StatsArgs) -> Result<(), Error> {
    let rows = filter_kind(io::read_dataset(&args.input)?, args.kind);
    let pairs: Vec<_> = rows.into_iter().map(|r| (r.kind, r.observation)).collect();
    let stats = descriptive_stats(&pairs);
    if let Some(out) = &args.out {
        fs::write(out, serde_json::to_string_pretty(&stats)? + "\n")?;
    }
    print!("{}", stats.to_text());
    Ok(())
}

fn solve(args: SolveArgs) -> Result<(), Error> {
    let params: PayoffParams = read_json(&args.params)?;
    let mut cfg = args.tuning.base()?.solver;
    if let Some(tol) = args.tuning.tol {
        cfg.tol = tol;
    }
    if let Some(max_iter) = args.tuning.max_iter {
        cfg.max_iter = max_iter;
    }
    if let Some(damping) = args.tuning.damping {
        cfg.damping = damping;
    }
    let (point, trace) = match (&args.input, &args.obs) {
        (Some(path), _) => {
            let rows = filter_kind(io::read_dataset(path)?, args.kind);
            let observations: Vec<Observation> = rows.into_iter().map(|r| r.observation).collect();
            let solution = population_equilibria(&observations, &params, &cfg)?;
            (solution.pooled, solution.trace)
        }
        (None, Some(v)) => {
            if v.len() != 5 {
                return Err(Error::Domain {
                    field: "obs",
                    reason: format!("expected 5 comma-separated values, got {}", v.len()),
                });
            }
            let obs = Observation::new(v[0], v[1], v[2], v[3], count(v[4])?)?;
            fixed_point(&obs, &params, &cfg)?
        }
        (None, None) => {
            return Err(Error::Domain {
                field: "input",
                reason: "give either --input or --obs".into(),
            })
        }
    };
    io::write_trace(&args.out, &trace)?;
    let cc = conflict_confusion(point);
    println!(
        "p_cross = {:.6}, p_yield = {:.6} after {} rounds\np_conflict = {:.6}, p_confusion = {:.6}",
        point.p_cross, point.p_yield, trace.rounds, cc.p_conflict, cc.p_confusion
    );
    Ok(())
}

fn count(v: f64) -> Result<u32, Error> {
    if v.fract() == 0.0 && (1.0..=f64::from(u32::MAX)).contains(&v) {
        Ok(v as u32)
    } else {
        Err(Error::Domain {
            field: "n_group",
            reason: format!("{v} is not a positive whole number"),
        })
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("QRE_LOG", "warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Extract(a) => extract(a),
        Command::Fit(a) => fit(a),
        Command::Synth(a) => synth(a),
        Command::Stats(a) => stats(a),
        Command::Solve(a) => solve(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

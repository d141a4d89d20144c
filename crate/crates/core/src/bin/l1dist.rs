use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use l1dist::estimators::{
    estimate_known_q, estimate_unknown_q, mle_known_q, mle_unknown_q, pk_known_q, EstimateOutcome,
    EstimatorConfig, RegimeHistogram, SplitMode,
};
use l1dist::harness::{
    demo_enlargement, demo_origin_only, demo_plugin_failure, emit, run_experiment, DemoMode,
    EmitFormat, EstimatorKind, ExperimentSpec, FamilySpec, GridCell, SamplingModel,
};
use l1dist::poly::{best_abs_poly, build_h2k};
use l1dist::{files, RngSeed};
use serde_json::json;
use std::path::PathBuf;

/// Estimate the L1 distance between discrete distributions from counts;
/// run risk experiments, demos, and the lemma verification suite.
#[derive(Parser)]
#[command(name = "l1dist", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate L1(P, Q) from count files.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo risk experiment over a (S, n) grid.
    Simulate(SimulateArgs),
    /// Comparative demonstrations.
    Demo {
        #[command(subcommand)]
        which: DemoCommand,
    },
    /// Polynomial construction utilities.
    Approx {
        #[command(subcommand)]
        which: ApproxCommand,
    },
    /// Run the lemma-check suite; exits 2 if any check fails.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorChoice {
    Mle,
    Opt,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitChoice {
    Thinning,
    Reuse,
}

#[derive(Args)]
struct ConfigArgs {
    /// Localization constant c1 (c1 > c3 > c2 > 0).
    #[arg(long, default_value_t = 2.0)]
    c1: f64,
    /// Degree constant c2 in K = max(1, floor(c2 ln n)).
    #[arg(long, default_value_t = 0.3)]
    c2: f64,
    /// Classification constant c3.
    #[arg(long, default_value_t = 0.6)]
    c3: f64,
    /// Sample-splitting mode for the optimal constructions.
    #[arg(long, value_enum, default_value = "thinning")]
    split: SplitChoice,
    /// Seed for thinning and sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ConfigArgs {
    fn config(&self) -> EstimatorConfig {
        EstimatorConfig {
            c1: self.c1,
            c2: self.c2,
            c3: self.c3,
            split_mode: match self.split {
                SplitChoice::Thinning => SplitMode::Thinning,
                SplitChoice::Reuse => SplitMode::Reuse,
            },
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// Which estimator to run.
    #[arg(long, value_enum)]
    estimator: EstimatorChoice,
    /// Known distribution Q (one weight per line); known-Q mode.
    #[arg(long)]
    known_q: Option<PathBuf>,
    /// Counts sampled from P.
    #[arg(long)]
    counts_x: PathBuf,
    /// Counts sampled from Q; unknown-Q mode.
    #[arg(long)]
    counts_y: Option<PathBuf>,
    /// Nominal sampling rate n (required for plain count files).
    #[arg(long)]
    n: Option<f64>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment spec as JSON; flags below are ignored if set.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Comma-separated estimators: mle_known_q, opt_known_q,
    /// mle_unknown_q, opt_unknown_q.
    #[arg(long, value_delimiter = ',')]
    estimators: Vec<String>,
    /// Support sizes; the grid is the cross product with --n.
    #[arg(long = "s", value_delimiter = ',')]
    support: Vec<usize>,
    /// Sampling rates.
    #[arg(long = "n", value_delimiter = ',')]
    rates: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// P family: uniform | zipf:<exp> | point_mass_mix:<gamma> | near_q:<delta>.
    #[arg(long, default_value = "uniform")]
    p_family: String,
    /// Q family: uniform | zipf:<exp> | point_mass_mix:<gamma>.
    #[arg(long, default_value = "uniform")]
    q_family: String,
    /// poissonized | multinomial.
    #[arg(long, default_value = "poissonized")]
    sampling: String,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output format.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output path; defaults to report.<format> under $L1DIST_OUT_DIR or ".".
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DemoCommand {
    /// Optimal estimator at budget n versus the MLE at n and n*ceil(ln n).
    Enlargement {
        #[arg(long, default_value_t = 5000)]
        s: usize,
        #[arg(long, default_value_t = 500.0)]
        n: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// known | unknown.
        #[arg(long, default_value = "known")]
        mode: String,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Plug-in rules L1(g(P_n), Q) against the optimal known-Q estimator.
    Plugin {
        #[arg(long, default_value_t = 5000)]
        s: usize,
        #[arg(long, default_value_t = 500.0)]
        n: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Full construction versus origin-square-only approximation on the
    /// hard near-diagonal instance.
    Origin {
        #[arg(long, default_value_t = 64)]
        s: usize,
        #[arg(long, default_value_t = 3000.0)]
        n: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Per-symbol mass multiplier c (mass = c ln n / n); default 3*c1.
        #[arg(long)]
        c: Option<f64>,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Subcommand)]
enum ApproxCommand {
    /// Serialize a constructed polynomial as JSON.
    Dump {
        /// abs | known-q | h2k.
        #[arg(long)]
        kind: String,
        /// Degree K (abs, h2k).
        #[arg(long, default_value_t = 8)]
        degree: usize,
        /// Known q (known-q kind).
        #[arg(long, default_value_t = 0.1)]
        q: f64,
        /// Rate n (known-q kind).
        #[arg(long, default_value_t = 1000.0)]
        n: f64,
        /// Square side (h2k kind).
        #[arg(long, default_value_t = 1.0)]
        side: f64,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Args)]
struct VerifyArgs {
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_family(text: &str) -> anyhow::Result<FamilySpec> {
    let (kind, arg) = match text.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (text, None),
    };
    let num = |what: &str| -> anyhow::Result<f64> {
        arg.with_context(|| format!("{kind} needs a parameter ({what})"))?
            .parse::<f64>()
            .with_context(|| format!("bad {what} in family spec '{text}'"))
    };
    Ok(match kind {
        "uniform" => FamilySpec::Uniform,
        "zipf" => FamilySpec::Zipf {
            exponent: num("exponent")?,
        },
        "point_mass_mix" => FamilySpec::PointMassMix {
            gamma: num("gamma")?,
        },
        "near_q" => FamilySpec::NearQ {
            delta: num("delta")?,
        },
        other => bail!("unknown family '{other}'"),
    })
}

fn parse_estimator(text: &str) -> anyhow::Result<EstimatorKind> {
    Ok(match text {
        "mle_known_q" => EstimatorKind::MleKnownQ,
        "opt_known_q" => EstimatorKind::OptKnownQ,
        "mle_unknown_q" => EstimatorKind::MleUnknownQ,
        "opt_unknown_q" => EstimatorKind::OptUnknownQ,
        other => bail!("unknown estimator '{other}'"),
    })
}

fn out_dir() -> PathBuf {
    std::env::var_os("L1DIST_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run_estimate(args: EstimateArgs) -> anyhow::Result<()> {
    let cfg = args.config.config();
    let x = files::load_counts(&args.counts_x, args.n)?;
    let seed = RngSeed::new(cfg.seed);
    let outcome: EstimateOutcome = match (&args.known_q, &args.counts_y) {
        (Some(qpath), None) => {
            let q = files::load_distribution(qpath)?;
            match args.estimator {
                EstimatorChoice::Mle => EstimateOutcome {
                    estimate: mle_known_q(&x, &q)?,
                    regime_histogram: RegimeHistogram::default(),
                },
                EstimatorChoice::Opt => estimate_known_q(&x, &q, &cfg, seed)?,
            }
        }
        (None, Some(ypath)) => {
            let y = files::load_counts(ypath, args.n)?;
            match args.estimator {
                EstimatorChoice::Mle => EstimateOutcome {
                    estimate: mle_unknown_q(&x, &y)?,
                    regime_histogram: RegimeHistogram::default(),
                },
                EstimatorChoice::Opt => estimate_unknown_q(&x, &y, &cfg, seed)?,
            }
        }
        (Some(_), Some(_)) => bail!("pass either --known-q or --counts-y, not both"),
        (None, None) => bail!("pass --known-q (known-Q mode) or --counts-y (two-sample mode)"),
    };
    let payload = json!({
        "estimate": outcome.estimate,
        "regime_histogram": outcome.regime_histogram,
        "config": cfg,
    });
    println!("{}", serde_json::to_string_pretty(&payload)?);
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let spec: ExperimentSpec = if let Some(path) = &args.spec {
        serde_json::from_str(&std::fs::read_to_string(path)?)
            .with_context(|| format!("parsing {}", path.display()))?
    } else {
        if args.estimators.is_empty() || args.support.is_empty() || args.rates.is_empty() {
            bail!("--estimators, --s and --n are required without --spec");
        }
        let estimators = args
            .estimators
            .iter()
            .map(|e| parse_estimator(e))
            .collect::<anyhow::Result<_>>()?;
        let mut grid = Vec::new();
        for &s in &args.support {
            for &n in &args.rates {
                grid.push(GridCell { s, n });
            }
        }
        ExperimentSpec {
            estimators,
            p_family: parse_family(&args.p_family)?,
            q_family: parse_family(&args.q_family)?,
            grid,
            trials: args.trials,
            seed: args.config.seed,
            sampling: match args.sampling.as_str() {
                "poissonized" => SamplingModel::Poissonized,
                "multinomial" => SamplingModel::Multinomial,
                other => bail!("unknown sampling model '{other}'"),
            },
            config: args.config.config(),
            keep_estimates: false,
        }
    };
    let report = run_experiment(&spec)?;
    let (format, ext) = match args.format.as_str() {
        "csv" => (EmitFormat::Csv, "csv"),
        "json" => (EmitFormat::Json, "json"),
        other => bail!("unknown format '{other}'"),
    };
    let path = args
        .out
        .unwrap_or_else(|| out_dir().join(format!("report.{ext}")));
    emit(&report, format, &path)?;
    eprintln!("wrote {} rows to {}", report.rows.len(), path.display());
    Ok(())
}

fn run_demo(which: DemoCommand) -> anyhow::Result<()> {
    let payload = match which {
        DemoCommand::Enlargement {
            s,
            n,
            trials,
            mode,
            config,
        } => {
            let mode = match mode.as_str() {
                "known" => DemoMode::KnownQ,
                "unknown" => DemoMode::UnknownQ,
                other => bail!("unknown mode '{other}'"),
            };
            serde_json::to_value(demo_enlargement(
                s,
                n,
                trials,
                &config.config(),
                mode,
                config.seed,
            )?)?
        }
        DemoCommand::Plugin {
            s,
            n,
            trials,
            config,
        } => serde_json::to_value(demo_plugin_failure(
            s,
            n,
            trials,
            &config.config(),
            config.seed,
        )?)?,
        DemoCommand::Origin {
            s,
            n,
            trials,
            c,
            config,
        } => serde_json::to_value(demo_origin_only(
            s,
            n,
            trials,
            &config.config(),
            c,
            config.seed,
        )?)?,
    };
    println!("{}", serde_json::to_string_pretty(&payload)?);
    Ok(())
}

fn run_approx(which: ApproxCommand) -> anyhow::Result<()> {
    let ApproxCommand::Dump {
        kind,
        degree,
        q,
        n,
        side,
        config,
    } = which;
    let payload = match kind.as_str() {
        "abs" => {
            let (poly, report) = best_abs_poly(degree)?;
            json!({ "poly": poly, "sup_error": report.sup_error })
        }
        "known-q" => {
            let poly = pk_known_q(q, n, &config.config())?;
            json!({ "poly": poly })
        }
        "h2k" => {
            let poly = build_h2k(degree, side)?;
            json!({ "poly": poly })
        }
        other => bail!("unknown polynomial kind '{other}' (expected abs, known-q or h2k)"),
    };
    println!("{}", serde_json::to_string_pretty(&payload)?);
    Ok(())
}

fn run_verify(args: VerifyArgs) -> anyhow::Result<i32> {
    let checks = l1dist::checks::run_lemma_checks()?;
    let pass = checks.iter().all(|c| c.pass);
    let payload = json!({ "pass": pass, "checks": checks });
    let text = serde_json::to_string_pretty(&payload)?;
    if let Some(path) = args.out {
        std::fs::write(&path, &text)?;
    }
    println!("{text}");
    Ok(if pass { 0 } else { 2 })
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Estimate(args) => {
            run_estimate(args)?;
            0
        }
        Command::Simulate(args) => {
            run_simulate(args)?;
            0
        }
        Command::Demo { which } => {
            run_demo(which)?;
            0
        }
        Command::Approx { which } => {
            run_approx(which)?;
            0
        }
        Command::Verify(args) => run_verify(args)?,
    };
    std::process::exit(code);
}

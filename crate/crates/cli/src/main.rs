//! `rda` — seeded experiments, method comparisons and verification
//! suites for reciprocal distribution alignment.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rda_cli::config::ExperimentConfig;
use rda_cli::{compare, exit, run_experiment, verify_reverse, verify_theorem1};
use rda_core::datasets::{export_csv, materialize, split_counts, Protocol};
use rda_core::error::{Error, Result};
use rda_core::numerics::grad_check;
use rda_core::trainer::{gradcheck_fixture, Method};

#[derive(Parser)]
#[command(
    name = "rda",
    about = "Reciprocal distribution alignment experiments on synthetic mismatched-distribution data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one method over the configured seeds and emit metrics.
    Run(RunArgs),
    /// Run several methods on identical datasets/seeds and tabulate.
    Compare(CompareArgs),
    /// Verify the reverse-operation equivalence, order reversal and the
    /// entropy inequality.
    Verify(VerifyArgs),
    /// Resolve a protocol into per-class counts (optionally exporting the
    /// materialized dataset as CSV).
    Dataset(DatasetCmdArgs),
    /// Check analytic gradients of the full training loss against central
    /// finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Clone)]
struct DatasetFlags {
    /// matched | imbalanced_labeled | mismatched_both | balanced_imbalanced | darp
    #[arg(long)]
    protocol: Option<String>,
    /// Total labeled-set size D_x.
    #[arg(long)]
    labels: Option<usize>,
    /// Head-class labeled count N0 (imbalanced protocols).
    #[arg(long)]
    n0: Option<usize>,
    /// Unlabeled imbalance ratio.
    #[arg(long)]
    gamma: Option<f64>,
    /// DARP labeled imbalance ratio.
    #[arg(long)]
    gamma_l: Option<f64>,
    /// DARP unlabeled imbalance ratio.
    #[arg(long)]
    gamma_u: Option<f64>,
    /// DARP head-class labeled count N1.
    #[arg(long)]
    n1: Option<usize>,
    /// DARP head-class unlabeled count M1.
    #[arg(long)]
    m1: Option<usize>,
    /// Reverse the DARP unlabeled profile.
    #[arg(long)]
    reversed: bool,
    /// Per-class unlabeled base count M0.
    #[arg(long)]
    m0: Option<usize>,
    /// Class count n.
    #[arg(long)]
    classes: Option<usize>,
    /// Feature dimension of the synthetic source.
    #[arg(long)]
    dim: Option<usize>,
    /// Gaussian spread of the synthetic source.
    #[arg(long)]
    spread: Option<f64>,
    #[arg(long)]
    test_per_class: Option<usize>,
}

#[derive(Args, Clone)]
struct TrainFlags {
    /// rda | fixmatch | fixmatch_da
    #[arg(long)]
    method: Option<String>,
    /// Single seed (shorthand for --seeds with one entry).
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    steps_per_epoch: Option<usize>,
    /// Labeled batch size B.
    #[arg(long)]
    batch: Option<usize>,
    /// Unlabeled ratio mu.
    #[arg(long)]
    mu: Option<usize>,
    /// Baseline confidence threshold.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    base_lr: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file mirroring the experiment schema; flags override.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    dataset: DatasetFlags,
    #[command(flatten)]
    train: TrainFlags,
    /// Output directory (falls back to $RDA_OUT_ROOT/experiment).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip SVG plot emission.
    #[arg(long)]
    no_plots: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated method list.
    #[arg(long, value_delimiter = ',', required = true)]
    methods: Vec<String>,
    #[command(flatten)]
    dataset: DatasetFlags,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_plots: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Dirichlet draws per class count for the entropy inequality.
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    /// Simplex draws per class count for the reverse equivalence.
    #[arg(long, default_value_t = 10_000)]
    reverse_trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Class counts for the entropy-inequality suite.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3, 4, 5, 10, 26, 100])]
    ns: Vec<usize>,
    /// Run only one suite: theorem1 | reverse
    #[arg(long)]
    only: Option<String>,
}

#[derive(Args)]
struct DatasetCmdArgs {
    #[command(flatten)]
    dataset: DatasetFlags,
    /// Materialize with this seed and write the CSV layout here.
    #[arg(long)]
    export: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 3)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    /// Minimum number of sampled coordinates.
    #[arg(long, default_value_t = 200)]
    coords: usize,
}

fn parse_protocol(flags: &DatasetFlags, current: &Protocol) -> Result<Protocol> {
    let name = match &flags.protocol {
        Some(name) => name.as_str(),
        None => return Ok(current.clone()),
    };
    let labels = flags.labels;
    let need = |v: Option<usize>, what: &str| {
        v.ok_or_else(|| Error::Config(format!("protocol '{name}' needs --{what}")))
    };
    let need_f = |v: Option<f64>, what: &str| {
        v.ok_or_else(|| Error::Config(format!("protocol '{name}' needs --{what}")))
    };
    match name {
        "matched" => Ok(Protocol::Matched {
            labels: need(labels, "labels")?,
        }),
        "imbalanced_labeled" => Ok(Protocol::ImbalancedLabeled {
            n0: need(flags.n0, "n0")?,
            labels: need(labels, "labels")?,
        }),
        "mismatched_both" => Ok(Protocol::MismatchedBoth {
            n0: need(flags.n0, "n0")?,
            labels: need(labels, "labels")?,
            gamma: need_f(flags.gamma, "gamma")?,
        }),
        "balanced_imbalanced" => Ok(Protocol::BalancedLabeledImbalancedUnlabeled {
            labels: need(labels, "labels")?,
            gamma: need_f(flags.gamma, "gamma")?,
        }),
        "darp" => Ok(Protocol::Darp {
            n1: need(flags.n1, "n1")?,
            m1: need(flags.m1, "m1")?,
            gamma_l: need_f(flags.gamma_l, "gamma-l")?,
            gamma_u: need_f(flags.gamma_u, "gamma-u")?,
            reversed: flags.reversed,
        }),
        other => Err(Error::Config(format!("unknown protocol '{other}'"))),
    }
}

fn apply_flags(
    config: &mut ExperimentConfig,
    dataset: &DatasetFlags,
    train: &TrainFlags,
) -> Result<()> {
    config.dataset.protocol = parse_protocol(dataset, &config.dataset.protocol)?;
    if let Some(m0) = dataset.m0 {
        config.dataset.m0 = m0;
    }
    if let Some(n) = dataset.classes {
        config.dataset.n = n;
        config.train.n = n;
    }
    if let Some(dim) = dataset.dim {
        config.source.dim = dim;
    }
    if let Some(spread) = dataset.spread {
        config.source.spread = spread;
    }
    if let Some(t) = dataset.test_per_class {
        config.source.test_per_class = t;
    }

    if let Some(method) = &train.method {
        config.train.method = method.parse()?;
    }
    if let Some(seeds) = &train.seeds {
        config.seeds = seeds.clone();
    } else if let Some(seed) = train.seed {
        config.seeds = vec![seed];
    }
    if let Some(epochs) = train.epochs {
        config.train.epochs = epochs;
    }
    if let Some(steps) = train.steps_per_epoch {
        config.train.steps_per_epoch = steps;
    }
    if let Some(b) = train.batch {
        config.train.b = b;
    }
    if let Some(mu) = train.mu {
        config.train.mu = mu;
    }
    if let Some(tau) = train.tau {
        config.train.tau = tau;
    }
    if let Some(lr) = train.base_lr {
        config.train.base_lr = lr;
    }
    Ok(())
}

fn load_config(
    path: &Option<PathBuf>,
    dataset: &DatasetFlags,
    train: &TrainFlags,
    out: &Option<PathBuf>,
    no_plots: bool,
    method_required: bool,
) -> Result<ExperimentConfig> {
    let mut config = match path {
        Some(p) => ExperimentConfig::from_json_file(p)?,
        None => {
            for (flag, present) in [
                ("--protocol", dataset.protocol.is_some()),
                (
                    "--method",
                    !method_required || train.method.is_some(),
                ),
                ("--seed", train.seed.is_some() || train.seeds.is_some()),
            ] {
                if !present {
                    return Err(Error::Config(format!(
                        "{flag} is required when no --config file is given"
                    )));
                }
            }
            ExperimentConfig::default()
        }
    };
    apply_flags(&mut config, dataset, train)?;
    if let Some(out) = out {
        config.output_dir = Some(out.clone());
    }
    if no_plots {
        config.emit_plots = false;
    }
    config.validate()?;
    Ok(config)
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    let config = load_config(
        &args.config,
        &args.dataset,
        &args.train,
        &args.out,
        args.no_plots,
        true,
    )?;
    let out_dir = config.resolve_output_dir()?;
    let output = run_experiment(&config, &out_dir)?;
    let s = &output.summary;
    println!("method: {}", s.method);
    for r in &s.per_seed {
        match (r.final_accuracy, r.final_marginal_tv) {
            (Some(acc), Some(tv)) => {
                println!("seed {:>3}: accuracy {acc:.4}  marginal_tv {tv:.4}", r.seed)
            }
            _ => println!("seed {:>3}: {}", r.seed, r.status),
        }
    }
    match (s.mean_accuracy, s.std_accuracy) {
        (Some(mean), Some(std)) => println!("final accuracy: {mean:.4} +/- {std:.4}"),
        _ => println!("no seed completed"),
    }
    println!("wrote {}", out_dir.display());
    Ok(if s.incomplete { exit::NUMERICAL } else { exit::OK })
}

fn cmd_compare(args: &CompareArgs) -> Result<i32> {
    let config = load_config(
        &args.config,
        &args.dataset,
        &args.train,
        &args.out,
        args.no_plots,
        false,
    )?;
    let methods = args
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<Result<Vec<_>>>()?;
    let out_dir = config.resolve_output_dir()?;
    let comparison = compare(&methods, &config, &out_dir)?;
    print!("{}", comparison.table());
    println!("wrote {}", out_dir.join("comparison.csv").display());
    let incomplete = comparison.summaries.iter().any(|s| s.incomplete);
    Ok(if incomplete { exit::NUMERICAL } else { exit::OK })
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let run_theorem = args.only.as_deref().is_none_or(|o| o == "theorem1");
    let run_reverse = args.only.as_deref().is_none_or(|o| o == "reverse");
    if let Some(only) = &args.only {
        if only != "theorem1" && only != "reverse" {
            return Err(Error::Config(format!(
                "--only expects 'theorem1' or 'reverse', got '{only}'"
            )));
        }
    }
    let mut ok = true;

    if run_reverse {
        let report = verify_reverse(args.reverse_trials, args.seed);
        println!(
            "reverse equivalence: max deviation {:.3e} over n in 2..=20 ({} draws each) -> {}",
            report.max_deviation,
            report.trials_per_n,
            if report.pass { "PASS" } else { "FAIL" }
        );
        println!(
            "order reversal: {} violations; n=2 double-reverse deviation {:.3e}",
            report.order_violations, report.involution_deviation_n2
        );
        if let Some(q) = &report.counterexample {
            println!("counterexample: {q:?}");
        }
        ok &= report.pass;
    }

    if run_theorem {
        let report = verify_theorem1(&args.ns, args.trials, args.seed);
        for o in &report.per_n {
            println!(
                "entropy gap n={:<4} min {:>13.6e} over {} draws{} -> {}",
                o.n,
                o.min_gap,
                o.trials,
                if o.asserted { "" } else { " (reported only)" },
                if o.pass { "PASS" } else { "FAIL" }
            );
            if let Some(p) = &o.violator {
                println!("violating distribution: {p:?}");
            }
        }
        ok &= report.pass;
    }

    Ok(if ok { exit::OK } else { exit::ASSERTION })
}

fn cmd_dataset(args: &DatasetCmdArgs) -> Result<i32> {
    let mut config = ExperimentConfig::default();
    let no_train = TrainFlags {
        method: None,
        seed: None,
        seeds: None,
        epochs: None,
        steps_per_epoch: None,
        batch: None,
        mu: None,
        tau: None,
        base_lr: None,
    };
    apply_flags(&mut config, &args.dataset, &no_train)?;
    config.dataset.validate()?;
    let split = split_counts(&config.dataset)?;
    let doc = serde_json::json!({
        "dataset": config.dataset,
        "labeled_per_class": split.labeled_per_class,
        "unlabeled_per_class": split.unlabeled_per_class,
        "total_labeled": split.total_labeled(),
        "total_unlabeled": split.total_unlabeled(),
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);

    if let Some(path) = &args.export {
        let mut spec = config.run_spec(args.seed);
        spec.train.seed = args.seed;
        let source = spec.build_source()?;
        let data = materialize(&source, &split, args.seed)?;
        let file = std::fs::File::create(path)?;
        export_csv(&data, std::io::BufWriter::new(file))?;
        println!("exported {}", path.display());
    }
    Ok(exit::OK)
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<i32> {
    use rand::SeedableRng;
    let (model, loss) = gradcheck_fixture(args.seed, args.classes)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed ^ 0xfd);
    let report = grad_check(&model, &loss, args.tolerance, args.coords, &mut rng)?;
    println!(
        "gradient check: {} coordinates, max relative error {:.3e} (tolerance {:.1e}) -> {}",
        report.checked,
        report.max_rel_error,
        report.tolerance,
        if report.pass { "PASS" } else { "FAIL" }
    );
    Ok(if report.pass { exit::OK } else { exit::ASSERTION })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Dataset(args) => cmd_dataset(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit::code_for(&err) as u8)
        }
    }
}

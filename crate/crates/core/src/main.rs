use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfaug::augment::{
    build_augmented_dataset, corrupt_counterfactuals, diff_in_diff_all, write_augmented_dataset,
};
use cfaug::augment::{MatchConfig, NoMatchPolicy, XiMode};
use cfaug::data::write_dataset_file;
use cfaug::dgp::{
    build_default_gaussian_dgp, sample_dataset, sample_panel_dataset, InterventionPolicy,
    TableSampler,
};
use cfaug::experiment::{
    fit_method, run_bounds, run_corr_sweep, run_n_sweep, summarize, write_bounds, write_errors,
    write_sweep, CellError, MethodCell, SweepConfig, BOUNDS_FILE, CORR_SWEEP_FILE, ERRORS_FILE,
    N_SWEEP_FILE,
};
use cfaug::rng::{derive_seed, seeded, SeedPart};
use cfaug::textflow::{
    mean_accuracy_by_mode, run_textflow, write_augmented_reviews, write_rewrite_failures,
    write_textflow_metrics, TextflowConfig,
};
use cfaug::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cfaug",
    version,
    about = "Counterfactual augmentation experiments"
)]
struct Cli {
    /// JSON config file; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic dataset (optionally augmented, optionally fitted).
    Gen(GenArgs),
    /// Accuracy over the correlation grid.
    CorrSweep,
    /// Accuracy over training-set sizes.
    NSweep,
    /// Generalization bound reports.
    Bounds {
        /// Saved model to report on (with --data).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Review pipeline with the mock (or configured HTTP) rewriter.
    Textflow {
        /// Review CSV; a synthetic pool is used otherwise.
        #[arg(long)]
        reviews: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 600)]
    n: usize,
    /// keep, uniform, or do=K
    #[arg(long, default_value = "keep")]
    policy: String,
    /// MI interval of the attribute table (config unit).
    #[arg(long, default_value_t = 0.7)]
    mi_lo: f64,
    #[arg(long, default_value_t = 0.8)]
    mi_hi: f64,
    /// Two-period panel with auxiliary data.
    #[arg(long)]
    panel: bool,
    /// oracle, corrupt=LAMBDA, or did
    #[arg(long)]
    augment: Option<String>,
    /// erm, reweight, aug_oracle, ...: train and save `model.txt`.
    #[arg(long)]
    fit: Option<String>,
}

fn load_sweep(cli: &Cli, default: SweepConfig) -> Result<SweepConfig> {
    let mut cfg = match &cli.config {
        Some(p) => SweepConfig::from_json_file(p)?,
        None => default,
    };
    if let Some(s) = cli.seed {
        cfg.base_seed = s;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    if cli.parallelism.is_some() {
        cfg.parallelism = cli.parallelism;
    }
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<File> {
    fs::create_dir_all(dir)?;
    Ok(File::create(dir.join(name))?)
}

fn finish_errors(dir: &Path, errors: &[CellError]) -> Result<ExitCode> {
    if errors.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    write_errors(create(dir, ERRORS_FILE)?, errors)?;
    eprintln!(
        "{} cell(s) failed; see {}",
        errors.len(),
        dir.join(ERRORS_FILE).display()
    );
    Ok(ExitCode::from(2))
}

fn parse_method(s: &str) -> Result<MethodCell> {
    let (name, arg) = match s.split_once('=') {
        Some((n, a)) => (
            n,
            Some(
                a.parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("method {s}")))?,
            ),
        ),
        None => (s, None),
    };
    Ok(match (name, arg) {
        ("erm", None) => MethodCell::Erm,
        ("reweight", None) => MethodCell::Reweight,
        ("aug_oracle", None) => MethodCell::AugOracle,
        ("aug_diff_in_diff", None) => MethodCell::AugDiffInDiff,
        ("xstar_bayes", None) => MethodCell::XstarBayes,
        ("mmd", Some(g)) => MethodCell::Mmd(g),
        ("irmv1", Some(g)) => MethodCell::Irmv1(g),
        ("group_dro", Some(e)) => MethodCell::GroupDro(e),
        ("aug_corrupt", Some(l)) => MethodCell::AugCorrupt(l),
        _ => return Err(Error::InvalidParameter(format!("unknown method `{s}`"))),
    })
}

fn gen(cli: &Cli, args: &GenArgs) -> Result<ExitCode> {
    let cfg = load_sweep(cli, SweepConfig::default())?;
    let seed = |tag: &str| derive_seed(cfg.base_seed, &[SeedPart::Tag("gen"), SeedPart::Tag(tag)]);
    let base = build_default_gaussian_dgp(seed("dgp"), cfg.class_mean_norm, cfg.attr_mean_norm)?;
    let table = TableSampler::with_unit(cfg.mi_unit).sample(
        &base.p_y,
        base.num_attributes,
        args.mi_lo,
        args.mi_hi,
        &mut seeded(seed("table")),
    )?;
    let dgp = base.with_table(table)?;
    let policy = match args.policy.as_str() {
        "keep" => InterventionPolicy::KeepTraining,
        "uniform" => InterventionPolicy::UniformC,
        p => match p.strip_prefix("do=").and_then(|k| k.parse().ok()) {
            Some(k) => InterventionPolicy::DoC(k),
            None => return Err(Error::InvalidParameter(format!("policy `{p}`"))),
        },
    };
    let mut rng = seeded(seed("data"));
    let data = if args.panel {
        sample_panel_dataset(&dgp, args.n, &mut rng)?
    } else {
        sample_dataset(&dgp, args.n, &policy, &mut rng)?
    };
    fs::create_dir_all(&cfg.out_dir)?;
    write_dataset_file(cfg.out_dir.join("dataset.csv"), &data)?;
    println!(
        "wrote {} examples to {}",
        data.len(),
        cfg.out_dir.join("dataset.csv").display()
    );
    if let Some(aug) = &args.augment {
        let mut rng = seeded(seed("augment"));
        let cfs = match aug.as_str() {
            "oracle" => corrupt_counterfactuals(&dgp, &data, 1.0, XiMode::Deterministic, &mut rng)?,
            "did" => {
                diff_in_diff_all(
                    &data,
                    dgp.num_attributes,
                    &MatchConfig::default(),
                    NoMatchPolicy::Fail,
                )?
                .set
            }
            a => match a
                .strip_prefix("corrupt=")
                .and_then(|l| l.parse::<f64>().ok())
            {
                Some(l) => corrupt_counterfactuals(&dgp, &data, l, cfg.xi_mode, &mut rng)?,
                None => return Err(Error::InvalidParameter(format!("augmentation `{a}`"))),
            },
        };
        let records = build_augmented_dataset(&data, &cfs)?;
        write_augmented_dataset(create(&cfg.out_dir, "augmented.csv")?, &records)?;
        println!("wrote {} augmented records", records.len());
    }
    if let Some(m) = &args.fit {
        let cell = parse_method(m)?;
        let fitted = fit_method(cell, &dgp, &data, &cfg, seed("fit"))?;
        fitted.model.save(cfg.out_dir.join("model.txt"))?;
        println!(
            "saved {} model to {}",
            cell.label(),
            cfg.out_dir.join("model.txt").display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(cli: &Cli, n_sweep: bool) -> Result<ExitCode> {
    let (default, file) = if n_sweep {
        (SweepConfig::n_sweep_grid(), N_SWEEP_FILE)
    } else {
        (SweepConfig::corr_sweep_grid(), CORR_SWEEP_FILE)
    };
    let cfg = load_sweep(cli, default)?;
    let out = if n_sweep {
        run_n_sweep(&cfg)?
    } else {
        run_corr_sweep(&cfg)?
    };
    write_sweep(create(&cfg.out_dir, file)?, &out.rows)?;
    for s in summarize(&out.rows) {
        println!(
            "{:<18} n={:<6} mi=[{:.2},{:.2}] reps={:<3} ood={:.4} (se {:.4}) id={:.4}",
            s.lambda
                .map_or(s.method.clone(), |l| format!("{}({l})", s.method)),
            s.n,
            s.mi_lo,
            s.mi_hi,
            s.reps,
            s.mean_ood_acc,
            s.se_ood_acc,
            s.mean_id_acc
        );
    }
    println!("wrote {}", cfg.out_dir.join(file).display());
    finish_errors(&cfg.out_dir, &out.errors)
}

fn bounds(cli: &Cli, model: &Option<PathBuf>, data: &Option<PathBuf>) -> Result<ExitCode> {
    let mut cfg = load_sweep(cli, SweepConfig::default())?;
    if model.is_some() {
        cfg.model_path = model.clone();
    }
    if data.is_some() {
        cfg.data_path = data.clone();
    }
    let out = run_bounds(&cfg)?;
    write_bounds(create(&cfg.out_dir, BOUNDS_FILE)?, &out.rows)?;
    println!(
        "wrote {} reports to {}",
        out.rows.len(),
        cfg.out_dir.join(BOUNDS_FILE).display()
    );
    finish_errors(&cfg.out_dir, &out.errors)
}

fn textflow(cli: &Cli, reviews: &Option<PathBuf>) -> Result<ExitCode> {
    let mut cfg: TextflowConfig = match &cli.config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => TextflowConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.base_seed = s;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(p) = cli.parallelism {
        cfg.max_in_flight = p;
    }
    if reviews.is_some() {
        cfg.reviews_path = reviews.clone();
    }
    let out = run_textflow(&cfg)?;
    write_textflow_metrics(
        create(&cfg.out_dir, "textflow_metrics.v1.csv")?,
        &out.metrics,
    )?;
    write_augmented_reviews(
        create(&cfg.out_dir, "textflow_augmented.v1.csv")?,
        &out.augmented,
    )?;
    for (mode, acc) in mean_accuracy_by_mode(&out.metrics) {
        println!("{mode:<15} eval accuracy {acc:.4}");
    }
    if out.failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    write_rewrite_failures(create(&cfg.out_dir, ERRORS_FILE)?, &out.failures)?;
    eprintln!("{} rewrite request(s) failed", out.failures.len());
    Ok(ExitCode::from(2))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(args) => gen(&cli, args),
        Command::CorrSweep => sweep(&cli, false),
        Command::NSweep => sweep(&cli, true),
        Command::Bounds { model, data } => bounds(&cli, model, data),
        Command::Textflow { reviews } => textflow(&cli, reviews),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

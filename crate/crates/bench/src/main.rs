use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rmlr_bench::checks::{self, Suite};
use rmlr_bench::config::Config;
use rmlr_bench::data::{gen_so3_data, gen_spd_data, read_dataset, write_dataset, DataKind, Dataset};
use rmlr_bench::error::{BenchError, Result};
use rmlr_bench::train::{evaluate, init_model, params_from_text, params_to_text, train};

/// Riemannian MLR benchmarks on synthetic SPD and SO(3) data.
#[derive(Parser)]
#[command(name = "rmlr", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// key=value config file; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    classifier: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output file (stdout when absent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset file
    GenData {
        /// spd or so3-product; defaults to what the classifier needs
        #[arg(long)]
        kind: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Train a classifier and write the per-epoch CSV report
    Train {
        /// dataset file; generated from the config when absent
        #[arg(long)]
        data: Option<PathBuf>,
        /// where to save the trained parameters
        #[arg(long)]
        params: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate saved parameters on a dataset
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        params: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run an invariant suite: geometry, gradients, equivalence, limits or all
    Check {
        suite: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run the gradient suite
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
}

fn io_err(path: &Path, e: std::io::Error) -> BenchError {
    BenchError::Io(path.display().to_string(), e.to_string())
}

fn load_config(c: &Common) -> Result<Config> {
    let mut cfg = Config::default();
    if let Some(p) = &c.config {
        cfg.apply_text(&std::fs::read_to_string(p).map_err(|e| io_err(p, e))?)?;
    }
    let r = &mut cfg.run;
    if let Some(v) = &c.classifier {
        r.classifier = v.parse()?;
    }
    if c.theta.is_some() {
        r.theta = c.theta;
    }
    if let Some(v) = c.alpha {
        r.alpha = v;
    }
    if let Some(v) = c.beta {
        r.beta = v;
    }
    if let Some(v) = c.epochs {
        r.epochs = v;
    }
    if let Some(v) = c.lr {
        r.lr = v;
    }
    if let Some(v) = c.seed {
        r.seed = v;
    }
    Ok(cfg)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(cfg: &Config, kind: DataKind) -> Result<Dataset> {
    let d = &cfg.data;
    match kind {
        DataKind::Spd => gen_spd_data(d.n, d.classes, d.per_class, d.sigma, cfg.run.seed),
        DataKind::So3Product => gen_so3_data(d.blocks, d.classes, d.per_class, d.sigma, cfg.run.seed),
    }
}

fn dataset(cfg: &Config, path: &Option<PathBuf>) -> Result<Dataset> {
    match path {
        Some(p) => read_dataset(p),
        None => generate(cfg, cfg.run.classifier.data_kind()),
    }
}

fn run_suites(suite: Suite, common: &Common) -> Result<bool> {
    let seed = common.seed.unwrap_or(0);
    let reports = checks::run(suite, seed);
    let text: String = reports.iter().map(|r| r.to_text()).collect();
    emit(&common.out, &text)?;
    Ok(reports.iter().all(|r| r.passed()))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::GenData { kind, common } => {
            let cfg = load_config(&common)?;
            let kind = match kind {
                Some(k) => k.parse()?,
                None => cfg.run.classifier.data_kind(),
            };
            let ds = generate(&cfg, kind)?;
            match &common.out {
                Some(p) => write_dataset(&ds, p)?,
                None => print!("{}", rmlr_bench::data::to_text(&ds)),
            }
            Ok(true)
        }
        Cmd::Train { data, params, common } => {
            let cfg = load_config(&common)?;
            let ds = dataset(&cfg, &data)?;
            let (report, model) = train(&ds, &cfg.run)?;
            if let Some(p) = &params {
                std::fs::write(p, params_to_text(&model)).map_err(|e| io_err(p, e))?;
            }
            emit(&common.out, &report.to_csv())?;
            Ok(true)
        }
        Cmd::Eval { data, params, common } => {
            let cfg = load_config(&common)?;
            let ds = dataset(&cfg, &data)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
            let template = init_model(&ds, &cfg.run, &mut rng)?;
            let text = std::fs::read_to_string(&params).map_err(|e| io_err(&params, e))?;
            let model = params_from_text(&template, &text)?;
            let (train_loss, train_acc) = evaluate(&model, &ds, &ds.train)?;
            let (test_loss, test_acc) = evaluate(&model, &ds, &ds.test)?;
            emit(
                &common.out,
                &format!(
                    "split,loss,accuracy\ntrain,{train_loss:.10},{train_acc:.6}\ntest,{test_loss:.10},{test_acc:.6}\n"
                ),
            )?;
            Ok(true)
        }
        Cmd::Check { suite, common } => run_suites(suite.parse()?, &common),
        Cmd::Gradcheck { common } => run_suites(Suite::Gradients, &common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

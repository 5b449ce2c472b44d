//! `gzsl`: train, evaluate, sweep and query zero-shot models from the shell.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gzsl_core::calib::{CascadeConfig, EntropyMode};
use gzsl_core::datakit::{load_dataset, make_synthetic, save_dataset, SyntheticSpec};
use gzsl_core::evalkit::{parse_values, retrieval_map, write_json, write_sweep_csv, SweepAxis};
use gzsl_core::gml::ModelBundle;
use gzsl_core::pipeline::{
    evaluate_and_write, run_pipeline, run_sweep, RunConfig, RESOLVED_CONFIG_JSON, SWEEP_CSV,
};
use gzsl_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Parser)]
#[command(
    name = "gzsl",
    version,
    about = "Generalized zero-shot learning toolkit"
)]
struct Cli {
    /// Seed for every random draw of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON run config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short = 'o', long = "out", global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Train the model and classifiers, then evaluate on the test split.
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset.
    Eval(EvalArgs),
    /// Sweep one hyperparameter and tabulate the metrics.
    Sweep(SweepArgs),
    /// Rank test images by distance to attribute-generated latents.
    Retrieve(RetrieveArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    seen: usize,
    #[arg(long, default_value_t = 4)]
    unseen: usize,
    #[arg(long, default_value_t = 0.6)]
    overlap: f64,
    #[arg(long, default_value_t = 32)]
    visual_dim: usize,
    #[arg(long, default_value_t = 16)]
    attribute_dim: usize,
    #[arg(long, default_value_t = 100)]
    samples_per_class: usize,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
}

#[derive(Debug, Args)]
struct RunOverrides {
    /// Dataset directory; replaces any dataset or synthetic spec in the config.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    triplet_weight: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// renormalized-seen or full-distribution.
    #[arg(long, value_parser = parse_mode)]
    entropy_mode: Option<EntropyMode>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunOverrides,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 2.7)]
    tau: f64,
    #[arg(long, value_parser = parse_mode, default_value = "renormalized-seen")]
    entropy_mode: EntropyMode,
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// tau, triplet_weight, margin or samples_per_class.
    #[arg(long)]
    axis: SweepAxis,
    /// start:stop:step or a comma list.
    #[arg(long)]
    values: String,
    #[command(flatten)]
    run: RunOverrides,
}

#[derive(Debug, Args)]
struct RetrieveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Percentage of each class's relevant count to retrieve: 25, 50 or 100.
    #[arg(long, default_value_t = 100)]
    ratio: u32,
    #[arg(long, default_value_t = 50)]
    n_generate: usize,
    /// Classes to query; defaults to the unseen classes.
    #[arg(long, value_delimiter = ',')]
    classes: Vec<usize>,
}

fn parse_mode(s: &str) -> std::result::Result<EntropyMode, String> {
    match s {
        "renormalized-seen" | "renormalized_seen" => Ok(EntropyMode::RenormalizedSeen),
        "full-distribution" | "full_distribution" => Ok(EntropyMode::FullDistribution),
        other => Err(format!("unknown entropy mode {other:?}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    match &cli.command {
        Command::Synth(a) => synth(&cli, a, &out),
        Command::Train(a) => {
            let cfg = resolve(&cli, &a.run, &out)?;
            let eval = run_pipeline(&cfg)?;
            println!(
                "acc_seen {:.4}  acc_unseen {:.4}  H {:.4}  (tau {}, {} of {} routed to seen classifier)",
                eval.cascade.acc_seen,
                eval.cascade.acc_unseen,
                eval.cascade.harmonic,
                eval.tau,
                eval.routed_to_seen,
                eval.test_samples
            );
            Ok(())
        }
        Command::Eval(a) => {
            let bundle = ModelBundle::load(&a.model)?;
            let ds = load_dataset(&a.data)?;
            let cascade = CascadeConfig {
                tau: a.tau,
                entropy_mode: a.entropy_mode,
            };
            let eval = evaluate_and_write(&bundle, &ds, &cascade, a.bins, None, &out)?;
            println!(
                "acc_seen {:.4}  acc_unseen {:.4}  H {:.4}",
                eval.cascade.acc_seen, eval.cascade.acc_unseen, eval.cascade.harmonic
            );
            Ok(())
        }
        Command::Sweep(a) => {
            let cfg = resolve(&cli, &a.run, &out)?;
            let values = parse_values(&a.values)?;
            std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
            write_json(out.join(RESOLVED_CONFIG_JSON), &cfg)?;
            let result = run_sweep(&cfg, a.axis, &values)?;
            write_sweep_csv(out.join(SWEEP_CSV), &result)?;
            write_json(out.join("sweep.json"), &result)?;
            println!(
                "{} rows written to {}",
                result.rows.len(),
                out.join(SWEEP_CSV).display()
            );
            Ok(())
        }
        Command::Retrieve(a) => {
            let bundle = ModelBundle::load(&a.model)?;
            let ds = load_dataset(&a.data)?;
            let classes = if a.classes.is_empty() {
                ds.unseen_classes.clone()
            } else {
                a.classes.clone()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(0));
            let report =
                retrieval_map(&bundle.vae, &ds, &classes, a.n_generate, a.ratio, &mut rng)?;
            std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
            write_json(out.join("retrieval.json"), &report)?;
            println!(
                "mAP@{}% {:.4}",
                report.ratio_percent, report.mean_average_precision
            );
            Ok(())
        }
    }
}

fn synth(cli: &Cli, a: &SynthArgs, out: &Path) -> Result<()> {
    let spec = SyntheticSpec {
        seen_count: a.seen,
        unseen_count: a.unseen,
        visual_dim: a.visual_dim,
        attribute_dim: a.attribute_dim,
        samples_per_class: a.samples_per_class,
        cluster_spread: a.spread,
        overlap: a.overlap,
        test_fraction: a.test_fraction,
        seed: cli.seed.unwrap_or(0),
    };
    let ds = make_synthetic(&spec)?;
    save_dataset(&ds, out)?;
    write_json(out.join("synthetic_spec.json"), &spec)?;
    println!("wrote {} samples to {}", ds.num_samples(), out.display());
    Ok(())
}

/// Config file (or defaults), then flags, then the output directory.
fn resolve(cli: &Cli, o: &RunOverrides, out: &Path) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_json_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(d) = &o.data {
        cfg.dataset = Some(d.clone());
        cfg.synthetic = None;
    }
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = o.$flag { cfg.$field = v; })*
        };
    }
    set!(epochs => epochs, batch_size => batch_size, learning_rate => learning_rate, latent_dim => latent_dim,
         lambda => lambda_w, triplet_weight => triplet_weight, margin => margin, tau => tau,
         entropy_mode => entropy_mode);
    if o.hidden_dim.is_some() {
        cfg.hidden_dim = o.hidden_dim;
    }
    if cli.out.is_some() || cli.config.is_none() {
        cfg.out_dir = out.to_path_buf();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Usage(format!("cannot create {}: {e}", path.display()))
}

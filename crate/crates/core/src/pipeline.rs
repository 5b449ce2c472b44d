//! End-to-end runs driven by one flat JSON config.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calib::{
    general_outputs, route_with_threshold, train_softmax, CascadeConfig, EntropyMode, Prediction,
    SoftmaxConfig,
};
use crate::datakit::{
    build_latent_train_set, load_dataset, make_synthetic, LatentMode, SyntheticSpec, ZslDataset,
};
use crate::error::{Error, Result};
use crate::evalkit::{
    confusion_matrix, entropy_histogram, sweep, write_json, write_metrics_csv, zsl_accuracy,
    MetricsReport, SweepAxis, SweepResult,
};
use crate::gml::{
    train_gml, DualVae, DualVaeConfig, LossWeights, ModelBundle, TrainConfig, TrainLog,
};
use crate::numkit::AdamConfig;

pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const ENTROPY_HIST_JSON: &str = "entropy_hist.json";
pub const CONFUSION_JSON: &str = "confusion.json";
pub const MODEL_BIN: &str = "model.bin";
pub const RESOLVED_CONFIG_JSON: &str = "resolved_config.json";
pub const TRAIN_LOG_JSON: &str = "train_log.json";
pub const SWEEP_CSV: &str = "sweep.csv";

/// Everything a run needs. Missing keys take their defaults; unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory written by `save_dataset`.
    pub dataset: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    pub seed: u64,

    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub latent_dim: usize,
    /// One hidden width for all four networks; `None` uses the full-size widths.
    pub hidden_dim: Option<usize>,

    pub beta1: f64,
    pub beta2: f64,
    pub lambda_w: f64,
    pub triplet_weight: f64,
    pub margin: f64,
    pub include_s_triplet: bool,

    pub n_seen: usize,
    pub n_unseen: usize,
    pub latent_mode: LatentMode,
    pub classifier_steps: usize,
    pub classifier_learning_rate: f64,

    pub tau: f64,
    pub entropy_mode: EntropyMode,
    pub histogram_bins: usize,
    /// Latents per unseen class for the unseen-only protocol; 0 skips it.
    pub zsl_per_class: usize,

    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        let s = SoftmaxConfig::default();
        Self {
            dataset: None,
            synthetic: None,
            seed: 0,
            epochs: 100,
            batch_size: 64,
            learning_rate: AdamConfig::default().learning_rate,
            latent_dim: 64,
            hidden_dim: None,
            beta1: w.beta1,
            beta2: w.beta2,
            lambda_w: w.lambda_w,
            triplet_weight: w.triplet_weight,
            margin: w.margin_alpha,
            include_s_triplet: w.include_s_triplet,
            n_seen: 200,
            n_unseen: 400,
            latent_mode: LatentMode::default(),
            classifier_steps: s.steps,
            classifier_learning_rate: s.learning_rate,
            tau: CascadeConfig::default().tau,
            entropy_mode: EntropyMode::default(),
            histogram_bins: 20,
            zsl_per_class: 400,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset, &self.synthetic) {
            (Some(_), None) => {}
            (None, Some(spec)) => spec.validate()?,
            _ => {
                return Err(Error::Usage(
                    "exactly one of `dataset` and `synthetic` must be given".into(),
                ))
            }
        }
        if self.latent_dim == 0 || self.hidden_dim == Some(0) {
            return Err(Error::Usage(
                "latent_dim and hidden_dim must be positive".into(),
            ));
        }
        if self.histogram_bins == 0 {
            return Err(Error::Usage("histogram_bins must be positive".into()));
        }
        if self.n_seen == 0 || self.n_unseen == 0 {
            return Err(Error::Usage("n_seen and n_unseen must be positive".into()));
        }
        if !(self.classifier_learning_rate.is_finite() && self.classifier_learning_rate > 0.0) {
            return Err(Error::Usage(
                "classifier_learning_rate must be positive".into(),
            ));
        }
        self.train_config().validate()?;
        self.cascade().validate()
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            beta1: self.beta1,
            beta2: self.beta2,
            lambda_w: self.lambda_w,
            triplet_weight: self.triplet_weight,
            margin_alpha: self.margin,
            include_s_triplet: self.include_s_triplet,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig::with_learning_rate(self.learning_rate),
            weights: self.weights(),
        }
    }

    pub fn softmax(&self) -> SoftmaxConfig {
        SoftmaxConfig {
            steps: self.classifier_steps,
            learning_rate: self.classifier_learning_rate,
        }
    }

    pub fn cascade(&self) -> CascadeConfig {
        CascadeConfig {
            tau: self.tau,
            entropy_mode: self.entropy_mode,
        }
    }

    pub fn model_config(&self, ds: &ZslDataset) -> DualVaeConfig {
        match self.hidden_dim {
            Some(h) => {
                DualVaeConfig::uniform(ds.visual_dim(), ds.attribute_dim(), self.latent_dim, h)
            }
            None => DualVaeConfig {
                latent_dim: self.latent_dim,
                ..DualVaeConfig::full_size(ds.visual_dim(), ds.attribute_dim())
            },
        }
    }

    pub fn load_dataset(&self) -> Result<ZslDataset> {
        match (&self.dataset, &self.synthetic) {
            (Some(dir), None) => load_dataset(dir),
            (None, Some(spec)) => make_synthetic(spec),
            _ => Err(Error::Usage(
                "exactly one of `dataset` and `synthetic` must be given".into(),
            )),
        }
    }
}

/// Trains the dual VAE from a fresh initialisation.
pub fn train_model(
    cfg: &RunConfig,
    ds: &ZslDataset,
    rng: &mut ChaCha8Rng,
) -> Result<(DualVae, TrainLog)> {
    let mut vae = DualVae::init(&cfg.model_config(ds), rng);
    let log = train_gml(&mut vae, ds, &cfg.train_config(), rng)?;
    Ok((vae, log))
}

/// Fits the general classifier on latents and the seen classifier on raw
/// visual features.
pub fn fit_classifiers(
    cfg: &RunConfig,
    vae: DualVae,
    ds: &ZslDataset,
    rng: &mut ChaCha8Rng,
) -> Result<ModelBundle> {
    let set = build_latent_train_set(&vae, ds, cfg.n_seen, cfg.n_unseen, cfg.latent_mode, rng)?;
    let mut all: Vec<usize> = ds
        .seen_classes
        .iter()
        .chain(&ds.unseen_classes)
        .copied()
        .collect();
    all.sort_unstable();
    let general = train_softmax(&set.latents, &set.labels, &all, &cfg.softmax())?;
    let seen = train_softmax(
        &ds.train_visual(),
        &ds.train_labels(),
        &ds.seen_classes,
        &cfg.softmax(),
    )?;
    Ok(ModelBundle {
        vae,
        general: Some(general),
        seen: Some(seen),
    })
}

/// Cascade predictions on the test split, reusable across thresholds.
#[derive(Debug, Clone)]
pub struct TestScores {
    general: crate::calib::GeneralOutputs,
    seen_predictions: Vec<usize>,
    pub labels: Vec<usize>,
}

impl TestScores {
    pub fn compute(bundle: &ModelBundle, ds: &ZslDataset, mode: EntropyMode) -> Result<Self> {
        let (general, seen) = classifiers(bundle)?;
        let x = ds.test_visual();
        Ok(Self {
            general: general_outputs(general, seen, &bundle.vae, &x, mode)?,
            seen_predictions: seen.predict(&x)?,
            labels: ds.test_labels(),
        })
    }

    pub fn entropies(&self) -> &[f64] {
        &self.general.entropies
    }

    pub fn predictions(&self, tau: f64) -> Vec<Prediction> {
        route_with_threshold(&self.general, &self.seen_predictions, tau)
    }

    pub fn report(&self, ds: &ZslDataset, tau: f64) -> Result<MetricsReport> {
        let preds: Vec<usize> = self.predictions(tau).iter().map(|p| p.class_id).collect();
        MetricsReport::from_predictions(&preds, &self.labels, &ds.seen_classes, &ds.unseen_classes)
    }
}

fn classifiers(
    bundle: &ModelBundle,
) -> Result<(
    &crate::calib::SoftmaxClassifier,
    &crate::calib::SoftmaxClassifier,
)> {
    match (&bundle.general, &bundle.seen) {
        (Some(g), Some(s)) => Ok((g, s)),
        _ => Err(Error::Usage("model file has no trained classifiers".into())),
    }
}

/// Reports for the configured cascade and for the uncalibrated baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub cascade: MetricsReport,
    pub no_calibration: MetricsReport,
    pub tau: f64,
    pub routed_to_seen: usize,
    pub test_samples: usize,
}

/// Evaluates a bundle on the test split and writes metrics, histogram and
/// confusion files into `out_dir`.
pub fn evaluate_and_write(
    bundle: &ModelBundle,
    ds: &ZslDataset,
    cascade: &CascadeConfig,
    histogram_bins: usize,
    zsl_acc: Option<f64>,
    out_dir: &Path,
) -> Result<Evaluation> {
    cascade.validate()?;
    let scores = TestScores::compute(bundle, ds, cascade.entropy_mode)?;
    let preds = scores.predictions(cascade.tau);
    let classes: Vec<usize> = preds.iter().map(|p| p.class_id).collect();
    let mut report = MetricsReport::from_predictions(
        &classes,
        &scores.labels,
        &ds.seen_classes,
        &ds.unseen_classes,
    )?;
    report.zsl_acc = zsl_acc;
    let mut baseline = scores.report(ds, 0.0)?;
    baseline.zsl_acc = zsl_acc;
    let eval = Evaluation {
        cascade: report,
        no_calibration: baseline,
        tau: cascade.tau,
        routed_to_seen: preds
            .iter()
            .filter(|p| p.route == crate::calib::Route::SeenClassifier)
            .count(),
        test_samples: preds.len(),
    };

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_metrics_csv(
        out_dir.join(METRICS_CSV),
        &[
            ("cascade", &eval.cascade),
            ("no_calibration", &eval.no_calibration),
        ],
    )?;
    write_json(out_dir.join(METRICS_JSON), &eval)?;
    let is_seen: Vec<bool> = scores.labels.iter().map(|&l| ds.is_seen(l)).collect();
    let hist = entropy_histogram(
        scores.entropies(),
        &is_seen,
        histogram_bins,
        Some(cascade.tau),
    )?;
    write_json(out_dir.join(ENTROPY_HIST_JSON), &hist)?;
    let mut order: Vec<usize> = ds
        .seen_classes
        .iter()
        .chain(&ds.unseen_classes)
        .copied()
        .collect();
    order.sort_unstable();
    write_json(
        out_dir.join(CONFUSION_JSON),
        &confusion_matrix(&classes, &scores.labels, &order)?,
    )?;
    Ok(eval)
}

/// Trains the model and both classifiers, with the unseen-only accuracy when configured.
pub fn train_bundle(
    cfg: &RunConfig,
    ds: &ZslDataset,
) -> Result<(ModelBundle, TrainLog, Option<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (vae, log) = train_model(cfg, ds, &mut rng)?;
    let bundle = fit_classifiers(cfg, vae, ds, &mut rng)?;
    let zsl = if cfg.zsl_per_class > 0 && ds.unseen_classes.len() >= 2 {
        Some(zsl_accuracy(
            &bundle.vae,
            ds,
            cfg.zsl_per_class,
            cfg.latent_mode,
            &cfg.softmax(),
            &mut rng,
        )?)
    } else {
        None
    };
    Ok((bundle, log, zsl))
}

/// Runs training, classifier fitting and evaluation, writing every artifact to
/// `cfg.out_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Evaluation> {
    cfg.validate()?;
    let ds = cfg.load_dataset()?;
    let out = cfg.out_dir.as_path();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_json(out.join(RESOLVED_CONFIG_JSON), cfg)?;
    let (bundle, log, zsl) = train_bundle(cfg, &ds)?;
    write_json(out.join(TRAIN_LOG_JSON), &log)?;
    bundle.save(out.join(MODEL_BIN))?;
    evaluate_and_write(&bundle, &ds, &cfg.cascade(), cfg.histogram_bins, zsl, out)
}

/// Evaluates one metric row per value of `axis`.
///
/// Threshold sweeps reuse one trained bundle; loss-weight sweeps retrain from
/// the run seed; sample-count sweeps reuse the trained VAE and refit the
/// classifiers, setting both `n_seen` and `n_unseen` to the value.
pub fn run_sweep(cfg: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepResult> {
    cfg.validate()?;
    let ds = cfg.load_dataset()?;
    let triple = |r: MetricsReport| (r.acc_seen, r.acc_unseen, r.harmonic);
    match axis {
        SweepAxis::Tau => {
            let (bundle, _, _) = train_bundle(
                &RunConfig {
                    zsl_per_class: 0,
                    ..cfg.clone()
                },
                &ds,
            )?;
            let scores = TestScores::compute(&bundle, &ds, cfg.entropy_mode)?;
            sweep(axis, values, |tau| {
                CascadeConfig {
                    tau,
                    entropy_mode: cfg.entropy_mode,
                }
                .validate()?;
                scores.report(&ds, tau).map(triple)
            })
        }
        SweepAxis::TripletWeight | SweepAxis::Margin => sweep(axis, values, |v| {
            let mut c = cfg.clone();
            c.zsl_per_class = 0;
            if axis == SweepAxis::TripletWeight {
                c.triplet_weight = v;
            } else {
                c.margin = v;
            }
            c.validate()?;
            let (bundle, _, _) = train_bundle(&c, &ds)?;
            TestScores::compute(&bundle, &ds, c.entropy_mode)?
                .report(&ds, c.tau)
                .map(triple)
        }),
        SweepAxis::SamplesPerClass => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let (vae, _) = train_model(cfg, &ds, &mut rng)?;
            sweep(axis, values, |v| {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::Usage(format!(
                        "samples per class must be a positive integer, got {v}"
                    )));
                }
                let c = RunConfig {
                    n_seen: v as usize,
                    n_unseen: v as usize,
                    ..cfg.clone()
                };
                let bundle = fit_classifiers(&c, vae.clone(), &ds, &mut rng.clone())?;
                TestScores::compute(&bundle, &ds, c.entropy_mode)?
                    .report(&ds, c.tau)
                    .map(triple)
            })
        }
    }
}

/// Threshold from `candidates` with the highest harmonic mean; the first wins ties.
pub fn best_tau(result: &SweepResult) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for row in &result.rows {
        if best.is_none_or(|(_, h)| row.harmonic > h) {
            best = Some((row.value, row.harmonic));
        }
    }
    best.map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_config(out: &Path) -> RunConfig {
        RunConfig {
            synthetic: Some(SyntheticSpec {
                seen_count: 3,
                unseen_count: 2,
                visual_dim: 6,
                attribute_dim: 4,
                samples_per_class: 30,
                cluster_spread: 1.0,
                overlap: 0.3,
                test_fraction: 0.3,
                seed: 1,
            }),
            seed: 5,
            epochs: 3,
            batch_size: 16,
            latent_dim: 3,
            hidden_dim: Some(8),
            n_seen: 20,
            n_unseen: 20,
            classifier_steps: 50,
            zsl_per_class: 20,
            out_dir: out.to_path_buf(),
            ..RunConfig::default()
        }
    }

    #[test]
    fn pipeline_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let eval = run_pipeline(&small_config(dir.path())).unwrap();
        for f in [
            METRICS_CSV,
            METRICS_JSON,
            ENTROPY_HIST_JSON,
            CONFUSION_JSON,
            MODEL_BIN,
            RESOLVED_CONFIG_JSON,
        ] {
            assert!(dir.path().join(f).is_file(), "{f} missing");
        }
        assert!(eval.cascade.zsl_acc.is_some());
        assert_eq!(
            eval.no_calibration.harmonic,
            crate::evalkit::harmonic_mean(
                eval.no_calibration.acc_seen,
                eval.no_calibration.acc_unseen
            )
        );
    }

    #[test]
    fn config_needs_exactly_one_source() {
        let mut c = RunConfig::default();
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        c.dataset = Some("d".into());
        c.synthetic = small_config(Path::new("x")).synthetic;
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 1, "bogus": 2}"#).unwrap();
        assert!(matches!(
            RunConfig::from_json_file(&p),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn resolved_config_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let c = small_config(dir.path());
        let text = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn tau_sweep_zero_matches_baseline() {
        let dir = tempfile::tempdir().unwrap();
        let c = small_config(dir.path());
        let r = run_sweep(&c, SweepAxis::Tau, &[0.0, 0.5]).unwrap();
        let eval = run_pipeline(&RunConfig {
            zsl_per_class: 0,
            ..c
        })
        .unwrap();
        let base = &eval.no_calibration;
        assert_eq!(
            (r.rows[0].acc_seen, r.rows[0].acc_unseen, r.rows[0].harmonic),
            (base.acc_seen, base.acc_unseen, base.harmonic)
        );
    }

    #[test]
    fn divergence_exits_with_three() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig {
            learning_rate: 1e30,
            epochs: 5,
            ..small_config(dir.path())
        };
        let err = run_pipeline(&c).unwrap_err();
        assert_eq!(err.exit_code(), 3, "{err}");
    }
}

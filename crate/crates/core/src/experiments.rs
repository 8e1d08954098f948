//! Declarative experiment runs: one shared data pool, one trained model per
//! swept value, a common held-out test set, and ordering/trend verdicts.
//!
//! Output layout under the experiment directory:
//!
//! ```text
//! data/<key>/                 shared rendered pool (masks + shaded)
//! runs/<key>/params.bin       trained model, keyed by its full configuration
//! runs/<key>/training_log.json
//! <kind>/<label>.json         evaluation report per swept value (+ CSVs)
//! <kind>_report.json          all runs plus verdicts
//! <kind>_table.csv            one row per swept value
//! ```
//!
//! Models are cached by a hash of everything that determines their
//! weights, so experiments sharing a configuration share the trained model
//! and a rerun skips every completed value.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{
    generate_dataset, load_dataset, ClassSpec, Dataset, GenerateConfig, ImageKind, InputKind, MANIFEST_FILE,
};
use crate::error::{Error, Result};
use crate::eval::{aggregate, EvalReport};
use crate::loss::LossKind;
use crate::net::checkpoint;
use crate::net::train::OcclusionAugment;
use crate::net::{evaluate, train_with_progress, LossConfig, NetworkConfig, NetworkParams, TrainConfig, TrainingLog};
use crate::occlusion::{sensitivity_sweep, SweepReport};
use crate::render::{CameraIntrinsics, PoseSamplerConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    LossCompare,
    DataQuantity,
    MaskVsObject,
    OcclusionRobustness,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::LossCompare,
        ExperimentKind::DataQuantity,
        ExperimentKind::MaskVsObject,
        ExperimentKind::OcclusionRobustness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LossCompare => "loss-compare",
            ExperimentKind::DataQuantity => "data-quantity",
            ExperimentKind::MaskVsObject => "mask-vs-object",
            ExperimentKind::OcclusionRobustness => "occlusion-robustness",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

/// The swept parameter and its values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Sweep {
    /// Optional per-loss schedules, one per loss; empty means every loss
    /// uses the base training schedule.
    LossCompare {
        losses: Vec<LossConfig>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        schedules: Vec<Schedule>,
    },
    /// Training images per class. Epochs and decay points are scaled so
    /// every value runs the same number of iterations as the largest one.
    DataQuantity {
        images_per_class: Vec<usize>,
    },
    MaskVsObject {
        inputs: Vec<InputKind>,
    },
    /// Training-time occlusion radius at the 320-pixel reference width
    /// (0 disables it), plus the radii of the evaluation sweep.
    OcclusionRobustness {
        max_radius_ref: Vec<f64>,
        sweep_radii_ref: Vec<f64>,
        sweep_seed: u64,
    },
}

impl Sweep {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Sweep::LossCompare { .. } => ExperimentKind::LossCompare,
            Sweep::DataQuantity { .. } => ExperimentKind::DataQuantity,
            Sweep::MaskVsObject { .. } => ExperimentKind::MaskVsObject,
            Sweep::OcclusionRobustness { .. } => ExperimentKind::OcclusionRobustness,
        }
    }

    fn labels(&self) -> Vec<String> {
        match self {
            Sweep::LossCompare { losses, .. } => losses.iter().map(|l| l.kind().name().to_string()).collect(),
            Sweep::DataQuantity { images_per_class } => images_per_class.iter().map(|n| n.to_string()).collect(),
            Sweep::MaskVsObject { inputs } => inputs.iter().map(|&i| input_name(i).to_string()).collect(),
            Sweep::OcclusionRobustness { max_radius_ref, .. } => {
                max_radius_ref.iter().map(|r| format!("r{r}")).collect()
            }
        }
    }

    fn len(&self) -> usize {
        match self {
            Sweep::LossCompare { losses, .. } => losses.len(),
            Sweep::DataQuantity { images_per_class } => images_per_class.len(),
            Sweep::MaskVsObject { inputs } => inputs.len(),
            Sweep::OcclusionRobustness { max_radius_ref, .. } => max_radius_ref.len(),
        }
    }
}

/// Epoch count and learning-rate decay points of one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub epochs: usize,
    pub decay_epochs: Vec<usize>,
}

fn input_name(i: InputKind) -> &'static str {
    match i {
        InputKind::Mask => "mask",
        InputKind::Shaded => "object",
    }
}

/// Scene and rendering settings of the shared data pool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub classes: Vec<ClassSpec>,
    pub intrinsics: CameraIntrinsics,
    pub sampler: PoseSamplerConfig,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        let g = GenerateConfig::default();
        DataConfig {
            classes: g.classes,
            intrinsics: g.intrinsics,
            sampler: g.sampler,
            seed: g.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sweep: Sweep,
    #[serde(default)]
    pub data: DataConfig,
    /// Training images per class available in the pool; data-quantity
    /// values take a prefix of them.
    pub train_per_class: usize,
    /// Held-out records per class, shared by every swept value.
    pub test_per_class: usize,
    /// Held-out records per class evaluated after every epoch.
    #[serde(default)]
    pub validation_per_class: usize,
    #[serde(default = "experiment_network")]
    pub network: NetworkConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

/// The network used by the experiment presets: the default conv stack
/// with one pixel of zero padding.
pub fn experiment_network() -> NetworkConfig {
    NetworkConfig {
        padding: 1,
        ..NetworkConfig::default()
    }
}

impl ExperimentConfig {
    /// Desk-scale preset for `kind`.
    pub fn preset(kind: ExperimentKind) -> Self {
        let sweep = match kind {
            ExperimentKind::LossCompare => Sweep::LossCompare {
                losses: [LossKind::L1, LossKind::L2, LossKind::L3, LossKind::L4]
                    .into_iter()
                    .map(LossConfig::of)
                    .collect(),
                schedules: LOSS_SCHEDULES
                    .iter()
                    .map(|&(epochs, decay)| Schedule {
                        epochs,
                        decay_epochs: vec![decay],
                    })
                    .collect(),
            },
            ExperimentKind::DataQuantity => Sweep::DataQuantity {
                images_per_class: vec![1000, 5000, 25000],
            },
            ExperimentKind::MaskVsObject => Sweep::MaskVsObject {
                inputs: vec![InputKind::Mask, InputKind::Shaded],
            },
            ExperimentKind::OcclusionRobustness => Sweep::OcclusionRobustness {
                max_radius_ref: vec![0.0, 24.0],
                sweep_radii_ref: vec![0.0, 8.0, 16.0, 24.0, 32.0, 48.0, 64.0],
                sweep_seed: 0,
            },
        };
        let mut train = TrainConfig::default();
        // Loss and data-quantity comparisons run on shaded object images;
        // data quantity also keeps a constant learning rate.
        match kind {
            ExperimentKind::LossCompare => train.input = InputKind::Shaded,
            ExperimentKind::DataQuantity => {
                train.input = InputKind::Shaded;
                train.decay_epochs.clear();
            }
            _ => {}
        }
        ExperimentConfig {
            sweep,
            data: DataConfig::default(),
            train_per_class: 25000,
            test_per_class: 1000,
            validation_per_class: 200,
            network: experiment_network(),
            train,
        }
    }

    /// Sets every seed (data, network init, training, evaluation sweep).
    pub fn set_seed(&mut self, seed: u64) {
        self.data.seed = seed;
        self.network.seed = seed;
        self.train.seed = seed;
        if let Sweep::OcclusionRobustness { sweep_seed, .. } = &mut self.sweep {
            *sweep_seed = seed;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.len() == 0 {
            return Err(Error::Config("swept value list is empty".into()));
        }
        let labels = self.sweep.labels();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::Config(format!("swept value '{l}' appears twice")));
            }
        }
        if self.train_per_class == 0 || self.test_per_class == 0 {
            return Err(Error::Config("train and test sizes must be positive".into()));
        }
        if self.validation_per_class > self.test_per_class {
            return Err(Error::Config("validation_per_class exceeds test_per_class".into()));
        }
        if self.network.num_classes != self.data.classes.len() {
            return Err(Error::Config(format!(
                "network has {} classes, data has {}",
                self.network.num_classes,
                self.data.classes.len()
            )));
        }
        match &self.sweep {
            Sweep::DataQuantity { images_per_class } => {
                if let Some(&n) = images_per_class.iter().find(|&&n| n == 0 || n > self.train_per_class) {
                    return Err(Error::Config(format!(
                        "{n} images per class is outside 1..={}",
                        self.train_per_class
                    )));
                }
            }
            Sweep::OcclusionRobustness {
                max_radius_ref,
                sweep_radii_ref,
                ..
            } => {
                if sweep_radii_ref.is_empty() {
                    return Err(Error::Config("occlusion sweep needs radii".into()));
                }
                if max_radius_ref
                    .iter()
                    .chain(sweep_radii_ref)
                    .any(|r| !r.is_finite() || *r < 0.0)
                {
                    return Err(Error::Config("radii must be finite and non-negative".into()));
                }
            }
            Sweep::LossCompare { losses, schedules } => {
                if !schedules.is_empty() && schedules.len() != losses.len() {
                    return Err(Error::Config(format!(
                        "{} schedules for {} losses",
                        schedules.len(),
                        losses.len()
                    )));
                }
                for s in schedules {
                    let t = TrainConfig {
                        epochs: s.epochs,
                        decay_epochs: s.decay_epochs.clone(),
                        ..self.train.clone()
                    };
                    t.validate()?;
                }
            }
            _ => {}
        }
        self.network.validate()?;
        self.train.validate()
    }

    fn pool_config(&self) -> GenerateConfig {
        GenerateConfig {
            classes: self.data.classes.clone(),
            counts: vec![self.train_per_class + self.test_per_class; self.data.classes.len()],
            intrinsics: self.data.intrinsics,
            sampler: self.data.sampler,
            kind: ImageKind::Both,
            seed: self.data.seed,
        }
    }

    /// Training configuration and per-class training count of swept value `i`.
    fn run_spec(&self, i: usize) -> (TrainConfig, usize) {
        let mut t = self.train.clone();
        let mut n = self.train_per_class;
        match &self.sweep {
            Sweep::LossCompare { losses, schedules } => {
                t.loss = losses[i];
                if let Some(s) = schedules.get(i) {
                    t.epochs = s.epochs;
                    t.decay_epochs = s.decay_epochs.clone();
                }
            }
            Sweep::DataQuantity { images_per_class } => {
                n = images_per_class[i];
                let reference = *images_per_class.iter().max().unwrap();
                t = equal_iterations(&t, n, reference);
            }
            Sweep::MaskVsObject { inputs } => t.input = inputs[i],
            Sweep::OcclusionRobustness { max_radius_ref, .. } => {
                t.occlusion = (max_radius_ref[i] > 0.0).then_some(OcclusionAugment {
                    max_radius_ref: max_radius_ref[i],
                });
            }
        }
        (t, n)
    }
}

/// Per-loss (epochs, decay epoch) for L1..L4: the single decay after the
/// validation plateau (10, 30, 15, 15 of 30 epochs; 45 for L2), scaled by
/// 21/30 to the 21-epoch budget.
const LOSS_SCHEDULES: [(usize, usize); 4] = [(21, 7), (32, 21), (21, 11), (21, 11)];

/// Scales epochs and decay points by `reference / n` so a run on `n`
/// images per class takes as many steps as one on `reference`.
pub fn equal_iterations(cfg: &TrainConfig, n: usize, reference: usize) -> TrainConfig {
    let f = reference as f64 / n as f64;
    let scale = |e: usize| ((e as f64 * f).round() as usize).max(1);
    TrainConfig {
        epochs: scale(cfg.epochs),
        decay_epochs: cfg.decay_epochs.iter().map(|&d| scale(d)).collect(),
        ..cfg.clone()
    }
}

/// Everything that determines a trained model's weights.
#[derive(Serialize)]
struct ModelKey<'a> {
    data: &'a DataConfig,
    train_per_class: usize,
    network: &'a NetworkConfig,
    train: &'a TrainConfig,
}

fn hash_key<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("key serializes");
    let digest = Sha256::digest(&bytes);
    digest[..8].iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub model_key: String,
    pub train_images_per_class: usize,
    pub epochs: usize,
    pub iterations: usize,
    pub input: InputKind,
    pub report: EvalReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub runs: Vec<RunSummary>,
    pub verdicts: Vec<Verdict>,
}

impl ExperimentReport {
    pub fn run(&self, label: &str) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.label == label)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "label,train_images_per_class,epochs,median_position_cm,median_orientation_deg,\
             mean_position_cm,mean_orientation_deg,success_rate\n",
        );
        for r in &self.runs {
            let o = &r.report.overall;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.label,
                r.train_images_per_class,
                r.epochs,
                o.median_position_cm,
                o.median_orientation_deg,
                o.mean_position_cm,
                o.mean_orientation_deg,
                o.success_rate
            );
        }
        s
    }
}

/// Loads the data pool under `root/data` or renders it.
pub fn prepare_pool(cfg: &ExperimentConfig, root: &Path) -> Result<Dataset> {
    let pool = cfg.pool_config();
    let dir = root.join("data").join(hash_key(&pool));
    if dir.join(MANIFEST_FILE).exists() {
        let ds = load_dataset(&dir)?;
        if ds.header().counts == pool.counts && ds.header().seed == pool.seed {
            return Ok(ds);
        }
    }
    let tmp = dir.with_extension("partial");
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    generate_dataset(&pool, &tmp)?;
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    fs::rename(&tmp, &dir).map_err(|e| Error::io(&dir, e))?;
    load_dataset(&dir)
}

/// Splits the pool: per class, the first `n` records train and records
/// `train_per_class..train_per_class + test_per_class` are held out.
fn pool_split(cfg: &ExperimentConfig, pool: &Dataset, n: usize, test_n: usize) -> (Dataset, Dataset) {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in pool.records().iter().enumerate() {
        by_class.entry(r.class).or_default().push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for idx in by_class.values() {
        train.extend_from_slice(&idx[..n]);
        test.extend_from_slice(&idx[cfg.train_per_class..cfg.train_per_class + test_n]);
    }
    (pool.subset(&train), pool.subset(&test))
}

/// Trains (or loads from the run cache) the model for swept value `i`.
fn trained_model(
    cfg: &ExperimentConfig,
    pool: &Dataset,
    i: usize,
    root: &Path,
    log: &mut dyn FnMut(&str),
) -> Result<(NetworkParams, TrainingLog, String, usize)> {
    let (train_cfg, n) = cfg.run_spec(i);
    let key = hash_key(&ModelKey {
        data: &cfg.data,
        train_per_class: n,
        network: &cfg.network,
        train: &train_cfg,
    });
    let dir = root.join("runs").join(&key);
    let params_path = dir.join("params.bin");
    let log_path = dir.join("training_log.json");
    if params_path.exists() && log_path.exists() {
        let params = checkpoint::load_matching(&params_path, &cfg.network)?;
        let text = fs::read_to_string(&log_path).map_err(|e| Error::io(&log_path, e))?;
        let tlog: TrainingLog = serde_json::from_str(&text).map_err(|e| Error::json(&log_path, e))?;
        log(&format!("run {key}: cached"));
        return Ok((params, tlog, key, n));
    }
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let (train, _) = pool_split(cfg, pool, n, 0);
    let (_, val) = pool_split(cfg, pool, 0, cfg.validation_per_class);
    let val = (!val.is_empty()).then_some(&val);
    log(&format!(
        "run {key}: training on {} images, {} epochs",
        train.len(),
        train_cfg.epochs
    ));
    let (params, tlog) = train_with_progress(&train, val, &cfg.network, &train_cfg, &mut |e| {
        let v = e
            .validation
            .as_ref()
            .map(|v| {
                format!(
                    " val median {:.2} cm {:.2} deg",
                    v.median_position_cm, v.median_orientation_deg
                )
            })
            .unwrap_or_default();
        log(&format!(
            "run {key}: epoch {} lr {:.0e} loss {:.5}{v}",
            e.epoch, e.learning_rate, e.mean_loss
        ));
    })?;
    let tmp = dir.join("params.bin.partial");
    checkpoint::save(&params, &tmp)?;
    write_json(&log_path, &tlog)?;
    fs::rename(&tmp, &params_path).map_err(|e| Error::io(&params_path, e))?;
    Ok((params, tlog, key, n))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Runs every swept value under `root`, reusing cached models, and writes
/// the per-run evaluations, the report and the comparison table.
pub fn run_experiment(cfg: &ExperimentConfig, root: &Path, log: &mut dyn FnMut(&str)) -> Result<ExperimentReport> {
    cfg.validate()?;
    let kind = cfg.sweep.kind();
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    log(&format!("{}: preparing data pool", kind.name()));
    let pool = prepare_pool(cfg, root)?;
    let (_, test) = pool_split(cfg, &pool, 0, cfg.test_per_class);
    let eval_dir: PathBuf = root.join(kind.name());
    fs::create_dir_all(&eval_dir).map_err(|e| Error::io(&eval_dir, e))?;

    let mut runs = Vec::new();
    for (i, label) in cfg.sweep.labels().into_iter().enumerate() {
        let (params, tlog, key, n) = trained_model(cfg, &pool, i, root, log)?;
        let input = tlog.train.input;
        let report = aggregate(&evaluate(&params, &test, input)?)?;
        report.write_all(&eval_dir, &label)?;
        let sweep = match &cfg.sweep {
            Sweep::OcclusionRobustness {
                sweep_radii_ref,
                sweep_seed,
                ..
            } => {
                let radii: Vec<f64> = sweep_radii_ref
                    .iter()
                    .map(|&r| crate::occlusion::scale_radius(r, cfg.network.input_width))
                    .collect();
                let s = sensitivity_sweep(&params, &test, &radii, *sweep_seed)?;
                s.write_csv(&eval_dir.join(format!("{label}_occlusion.csv")))?;
                Some(s)
            }
            _ => None,
        };
        log(&format!(
            "{} {label}: median {:.2} cm {:.2} deg",
            kind.name(),
            report.overall.median_position_cm,
            report.overall.median_orientation_deg
        ));
        runs.push(RunSummary {
            label,
            model_key: key,
            train_images_per_class: n,
            epochs: tlog.train.epochs,
            iterations: tlog.iterations,
            input,
            report,
            sweep,
        });
    }
    let verdicts = verdicts(&cfg.sweep, &runs);
    let report = ExperimentReport {
        kind,
        config: cfg.clone(),
        runs,
        verdicts,
    };
    write_json(&root.join(format!("{}_report.json", kind.name())), &report)?;
    let csv = root.join(format!("{}_table.csv", kind.name()));
    fs::write(&csv, report.to_csv()).map_err(|e| Error::io(&csv, e))?;
    Ok(report)
}

fn medians(r: &RunSummary) -> (f64, f64) {
    (
        r.report.overall.median_position_cm,
        r.report.overall.median_orientation_deg,
    )
}

/// Relative slack allowed when checking that errors do not increase.
pub const TREND_TOLERANCE: f64 = 0.10;

/// Ratio by which the 10-20% occlusion bin must exceed the 0-5% bin.
pub const OCCLUSION_RATIO: f64 = 1.5;

fn verdicts(sweep: &Sweep, runs: &[RunSummary]) -> Vec<Verdict> {
    let by_label = |l: &str| runs.iter().find(|r| r.label == l);
    let mut out = Vec::new();
    match sweep {
        Sweep::LossCompare { .. } => {
            if let (Some(l2), Some(l4)) = (by_label("l2"), by_label("l4")) {
                let (a, b) = (medians(l2).1, medians(l4).1);
                out.push(Verdict {
                    name: "l2-orientation-exceeds-l4".into(),
                    passed: a > b,
                    detail: format!("median orientation L2 {a:.3} deg, L4 {b:.3} deg"),
                });
            }
        }
        Sweep::DataQuantity { .. } => {
            let mut sorted: Vec<&RunSummary> = runs.iter().collect();
            sorted.sort_by_key(|r| r.train_images_per_class);
            for (metric, pick) in [("position", 0usize), ("orientation", 1)] {
                let e: Vec<f64> = sorted
                    .iter()
                    .map(|r| if pick == 0 { medians(r).0 } else { medians(r).1 })
                    .collect();
                let series = e.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" -> ");
                out.push(Verdict {
                    name: format!("{metric}-non-increasing"),
                    passed: e.windows(2).all(|w| w[1] <= w[0] * (1.0 + TREND_TOLERANCE)),
                    detail: format!("median {metric} error {series}"),
                });
                if e.len() >= 3 {
                    let n = e.len();
                    let (early, late) = (e[n - 3] - e[n - 2], e[n - 2] - e[n - 1]);
                    out.push(Verdict {
                        name: format!("{metric}-plateau"),
                        passed: late < early,
                        detail: format!("improvement {early:.3} then {late:.3}"),
                    });
                }
            }
        }
        Sweep::MaskVsObject { .. } => {
            if let (Some(m), Some(o)) = (by_label("mask"), by_label("object")) {
                let (m, o) = (medians(m), medians(o));
                out.push(Verdict {
                    name: "object-not-worse-than-mask".into(),
                    passed: o.0 <= m.0 && o.1 <= m.1,
                    detail: format!(
                        "median mask {:.3} cm {:.3} deg, object {:.3} cm {:.3} deg",
                        m.0, m.1, o.0, o.1
                    ),
                });
            }
        }
        Sweep::OcclusionRobustness { max_radius_ref, .. } => {
            let base = max_radius_ref
                .iter()
                .position(|&r| r == 0.0)
                .and_then(|i| runs.get(i))
                .and_then(|r| r.sweep.as_ref());
            if let Some(base) = base {
                let low = base.mean_in_range(0.0, 0.05).map(|m| m.1);
                let high = base.mean_in_range(0.10, 0.20).map(|m| m.1);
                let (passed, detail) = match (low, high) {
                    (Some(l), Some(h)) => (
                        h >= OCCLUSION_RATIO * l,
                        format!(
                            "baseline mean orientation 0-5% {l:.3} deg, 10-20% {h:.3} deg, ratio {:.3}",
                            h / l
                        ),
                    ),
                    _ => (false, "a required occlusion bin is empty".to_string()),
                };
                out.push(Verdict {
                    name: "occlusion-degrades-baseline".into(),
                    passed,
                    detail,
                });
                let base_mid = base.mean_in_range(0.05, 0.20).map(|m| m.1);
                for (r, run) in max_radius_ref.iter().zip(runs) {
                    if *r == 0.0 {
                        continue;
                    }
                    let mid = run
                        .sweep
                        .as_ref()
                        .and_then(|s| s.mean_in_range(0.05, 0.20))
                        .map(|m| m.1);
                    let (passed, detail) = match (base_mid, mid) {
                        (Some(b), Some(m)) => (
                            m < b,
                            format!(
                                "mean orientation at 5-20% occlusion: baseline {b:.3} deg, {} {m:.3} deg",
                                run.label
                            ),
                        ),
                        _ => (false, "the 5-20% occlusion range is empty".to_string()),
                    };
                    out.push(Verdict {
                        name: format!("{}-reduces-occluded-error", run.label),
                        passed,
                        detail,
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(kind: ExperimentKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset(kind);
        cfg.data.intrinsics = CameraIntrinsics::kinect_vga().resized(32, 24).unwrap();
        cfg.data.sampler.min_pixels = 8;
        cfg.train_per_class = 40;
        cfg.test_per_class = 10;
        cfg.validation_per_class = 5;
        cfg.network = NetworkConfig {
            input_width: 32,
            input_height: 24,
            channels: vec![2, 4],
            hidden: 8,
            ..experiment_network()
        };
        cfg.train.epochs = 2;
        cfg.train.decay_epochs = vec![1];
        cfg
    }

    #[test]
    fn presets_validate() {
        for k in ExperimentKind::ALL {
            let cfg = ExperimentConfig::preset(k);
            cfg.validate().unwrap();
            assert_eq!(cfg.sweep.kind(), k);
            assert_eq!(ExperimentKind::parse(k.name()).unwrap(), k);
        }
        assert!(ExperimentKind::parse("nope").is_err());
    }

    #[test]
    fn duplicate_or_empty_sweeps_rejected() {
        let mut cfg = ExperimentConfig::preset(ExperimentKind::DataQuantity);
        cfg.sweep = Sweep::DataQuantity {
            images_per_class: vec![1000, 1000],
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.sweep = Sweep::DataQuantity {
            images_per_class: vec![],
        };
        assert!(cfg.validate().is_err());
        cfg.sweep = Sweep::DataQuantity {
            images_per_class: vec![30000],
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn loss_schedules_follow_their_losses() {
        let cfg = ExperimentConfig::preset(ExperimentKind::LossCompare);
        let (l2, _) = cfg.run_spec(1);
        assert_eq!(l2.loss.kind(), LossKind::L2);
        assert_eq!((l2.epochs, l2.decay_epochs), (32, vec![21]));
        let (l4, _) = cfg.run_spec(3);
        assert_eq!((l4.epochs, l4.decay_epochs), (21, vec![11]));
        let mut bad = cfg.clone();
        if let Sweep::LossCompare { schedules, .. } = &mut bad.sweep {
            schedules.pop();
        }
        assert!(bad.validate().is_err());
        assert_eq!(l2.input, InputKind::Shaded);
        let dq = ExperimentConfig::preset(ExperimentKind::DataQuantity);
        assert!(dq.train.decay_epochs.is_empty());
        assert_eq!(dq.train.input, InputKind::Shaded);
        let occ = ExperimentConfig::preset(ExperimentKind::OcclusionRobustness);
        assert_eq!(occ.train, TrainConfig::default());
    }

    #[test]
    fn equal_iteration_scaling() {
        let t = equal_iterations(&TrainConfig::default(), 1000, 25000);
        assert_eq!(t.epochs, 525);
        assert_eq!(t.decay_epochs, vec![175, 350]);
        assert_eq!(
            equal_iterations(&TrainConfig::default(), 25000, 25000),
            TrainConfig::default()
        );
    }

    #[test]
    fn config_json_round_trip() {
        for k in ExperimentKind::ALL {
            let cfg = ExperimentConfig::preset(k);
            let text = serde_json::to_string(&cfg).unwrap();
            let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn runs_share_cache_and_resume() {
        let dir = tempfile::tempdir().unwrap();
        let mut lines = Vec::new();
        let cfg = tiny(ExperimentKind::MaskVsObject);
        let first = run_experiment(&cfg, dir.path(), &mut |l| lines.push(l.to_string())).unwrap();
        assert_eq!(first.runs.len(), 2);
        assert_eq!(first.runs[0].report.overall.count, 10);
        assert_eq!(first.verdicts.len(), 1);
        assert!(dir.path().join("mask-vs-object_report.json").exists());
        assert!(dir.path().join("mask-vs-object_table.csv").exists());
        assert!(dir.path().join("mask-vs-object/object.json").exists());

        // The object run equals the L4 run of a loss comparison.
        let mut lc = tiny(ExperimentKind::LossCompare);
        lc.sweep = Sweep::LossCompare {
            losses: vec![LossConfig::of(LossKind::L4)],
            schedules: vec![],
        };
        lines.clear();
        let second = run_experiment(&lc, dir.path(), &mut |l| lines.push(l.to_string())).unwrap();
        assert_eq!(second.runs[0].model_key, first.runs[1].model_key);
        assert_eq!(second.runs[0].report, first.runs[1].report);
        assert!(lines.iter().any(|l| l.ends_with("cached")));

        lines.clear();
        let again = run_experiment(&cfg, dir.path(), &mut |l| lines.push(l.to_string())).unwrap();
        assert_eq!(again, first);
        assert!(!lines.iter().any(|l| l.contains("training on")));
    }

    #[test]
    fn occlusion_experiment_reports_sweeps() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny(ExperimentKind::OcclusionRobustness);
        cfg.sweep = Sweep::OcclusionRobustness {
            max_radius_ref: vec![0.0, 24.0],
            sweep_radii_ref: vec![0.0, 24.0],
            sweep_seed: 3,
        };
        let r = run_experiment(&cfg, dir.path(), &mut |_| {}).unwrap();
        assert_ne!(r.runs[0].model_key, r.runs[1].model_key);
        for run in &r.runs {
            assert_eq!(run.sweep.as_ref().unwrap().samples.len(), 20);
        }
        assert_eq!(r.verdicts.len(), 2);
        assert!(dir.path().join("occlusion-robustness/r24_occlusion.csv").exists());
    }

    #[test]
    fn data_quantity_uses_prefixes_and_equal_steps() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny(ExperimentKind::DataQuantity);
        cfg.sweep = Sweep::DataQuantity {
            images_per_class: vec![10, 20, 40],
        };
        cfg.validation_per_class = 0;
        let r = run_experiment(&cfg, dir.path(), &mut |_| {}).unwrap();
        let epochs: Vec<usize> = r.runs.iter().map(|x| x.epochs).collect();
        assert_eq!(epochs, vec![8, 4, 2]);
        assert_eq!(r.verdicts.len(), 4);
        assert!(r.verdict("orientation-plateau").is_some());
    }

    fn run_with(label: &str, pos: f64, ori: f64, n: usize) -> RunSummary {
        let rec = crate::eval::EvalRecord::new("a", 0, pos, ori).unwrap();
        RunSummary {
            label: label.into(),
            model_key: String::new(),
            train_images_per_class: n,
            epochs: 1,
            iterations: 1,
            input: InputKind::Mask,
            report: aggregate(&[rec]).unwrap(),
            sweep: None,
        }
    }

    #[test]
    fn trend_verdicts() {
        let sweep = Sweep::DataQuantity {
            images_per_class: vec![1, 2, 3],
        };
        let good = [
            run_with("1", 4.0, 40.0, 1),
            run_with("2", 3.0, 30.0, 2),
            run_with("3", 3.2, 29.0, 3),
        ];
        let v = verdicts(&sweep, &good);
        assert!(v.iter().all(|v| v.passed), "{v:?}");
        let bad = [
            run_with("1", 4.0, 40.0, 1),
            run_with("2", 3.9, 39.0, 2),
            run_with("3", 2.0, 20.0, 3),
        ];
        let v = verdicts(&sweep, &bad);
        assert!(!v.iter().find(|v| v.name == "orientation-plateau").unwrap().passed);
        assert!(
            v.iter()
                .find(|v| v.name == "orientation-non-increasing")
                .unwrap()
                .passed
        );

        let lc = Sweep::LossCompare {
            losses: vec![],
            schedules: vec![],
        };
        let v = verdicts(&lc, &[run_with("l2", 1.0, 30.0, 1), run_with("l4", 1.0, 30.0, 1)]);
        assert!(!v[0].passed, "ties are not a strict ordering");
    }
}

//! `posenet`: generate data, train, evaluate, check gradients and run the
//! experiment scripts. Logs go to stderr; results go to files under --out.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 runtime failure.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use posenet::dataset::{self, ClassSpec, GenerateConfig, ImageKind, InputKind};
use posenet::eval::{aggregate, EvalRecord};
use posenet::experiments::{self, ExperimentConfig, ExperimentKind};
use posenet::loss::{gradcheck, LossKind};
use posenet::net::gradcheck::network_gradcheck;
use posenet::net::{checkpoint, train_with_progress, NetworkConfig, TrainConfig};
use posenet::occlusion::{scale_radius, sensitivity_sweep};
use posenet::render::{self, CameraIntrinsics, DEFAULT_LIGHT};
use posenet::{Pose, Quaternion};

/// Name of the metadata file every subcommand writes into --out.
pub const RUN_FILE: &str = "run.json";

/// Loss gradients must match finite differences to this relative error.
const LOSS_TOLERANCE: f64 = 1e-4;
const NETWORK_TOLERANCE: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] posenet::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_validation() => 1,
            CliError::Core(_) | CliError::Failed(_) => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "posenet", version, about = "6-DoF pose from silhouette masks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON config file layered over the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key by dotted path, e.g. train.epochs=3.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for every random stream of the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; nothing is written outside it.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker cap. Computation is single-threaded; the value is recorded.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic dataset.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Train a network on a dataset.
    Train {
        /// Dataset directory or manifest.
        #[arg(long)]
        data: PathBuf,
        /// Held-out dataset evaluated after every epoch.
        #[arg(long)]
        validation: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Input::Mask)]
        input: Input,
        #[command(flatten)]
        common: Common,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        #[arg(long, value_enum, default_value_t = LossArg::All)]
        loss: LossArg,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run a scripted experiment.
    Experiment {
        #[arg(value_enum)]
        name: ExperimentArg,
        #[command(flatten)]
        common: Common,
    },
    /// The loss-compare experiment.
    BenchLoss {
        #[command(flatten)]
        common: Common,
    },
    /// Occlusion sensitivity sweep of a checkpoint.
    Occlude {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Occluder radii at the 320-pixel reference width; 0 = none.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 8.0, 16.0, 24.0, 32.0, 48.0, 64.0])]
        radii: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Render one pose to a PGM image.
    RenderPreview {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Input {
    Mask,
    Shaded,
}

impl From<Input> for InputKind {
    fn from(i: Input) -> Self {
        match i {
            Input::Mask => InputKind::Mask,
            Input::Shaded => InputKind::Shaded,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LossArg {
    L1,
    L2,
    L3,
    L4,
    All,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExperimentArg {
    LossCompare,
    DataQuantity,
    MaskVsObject,
    OcclusionRobustness,
}

impl From<ExperimentArg> for ExperimentKind {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::LossCompare => ExperimentKind::LossCompare,
            ExperimentArg::DataQuantity => ExperimentKind::DataQuantity,
            ExperimentArg::MaskVsObject => ExperimentKind::MaskVsObject,
            ExperimentArg::OcclusionRobustness => ExperimentKind::OcclusionRobustness,
        }
    }
}

fn log(msg: &str) {
    eprintln!("{msg}");
}

fn prepare_out(common: &Common) -> CliResult<()> {
    if let Some(0) = common.threads {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    std::fs::create_dir_all(&common.out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", common.out.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))
}

/// Writes the metadata needed to reproduce the run. Deliberately free of
/// timestamps so repeated runs produce identical trees.
fn write_run(common: &Common, command: &str, config: Value, extra: Value) -> CliResult<()> {
    let threads = common
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let meta = json!({
        "tool": "posenet",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": common.seed,
        "threads": threads,
        "config": config,
        "inputs": extra,
    });
    write_json(&common.out.join(RUN_FILE), &meta)
}

fn gen_data(common: &Common) -> CliResult<()> {
    let (mut cfg, _) = config::resolve(&GenerateConfig::default(), common.config.as_deref(), &common.overrides)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    prepare_out(common)?;
    let t = std::time::Instant::now();
    let ds = dataset::generate_dataset(&cfg, &common.out)?;
    let secs = t.elapsed().as_secs_f64();
    log(&format!(
        "generated {} records in {secs:.2} s ({:.0} records/s)",
        ds.len(),
        ds.len() as f64 / secs.max(1e-9)
    ));
    write_run(common, "gen-data", serde_json::to_value(&cfg).unwrap(), json!({}))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainJob {
    network: NetworkConfig,
    train: TrainConfig,
}

fn train_cmd(data: &Path, validation: Option<&Path>, common: &Common) -> CliResult<()> {
    let ds = dataset::load_dataset(data)?;
    let val = validation.map(dataset::load_dataset).transpose()?;
    let k = ds.intrinsics();
    let defaults = TrainJob {
        network: NetworkConfig {
            input_width: k.width,
            input_height: k.height,
            num_classes: ds.num_classes(),
            ..experiments::experiment_network()
        },
        train: TrainConfig::default(),
    };
    let (mut job, _) = config::resolve(&defaults, common.config.as_deref(), &common.overrides)?;
    if let Some(s) = common.seed {
        job.network.seed = s;
        job.train.seed = s;
    }
    prepare_out(common)?;
    let (params, tlog) = train_with_progress(&ds, val.as_ref(), &job.network, &job.train, &mut |e| {
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
            "epoch {} lr {:.0e} loss {:.5}{v}",
            e.epoch, e.learning_rate, e.mean_loss
        ));
    })?;
    checkpoint::save(&params, &common.out.join("params.bin"))?;
    write_json(&common.out.join("training_log.json"), &tlog)?;
    write_run(
        common,
        "train",
        serde_json::to_value(&job).unwrap(),
        json!({ "data": data, "validation": validation }),
    )
}

fn eval_cmd(data: &Path, model: &Path, input: Input, common: &Common) -> CliResult<()> {
    let ds = dataset::load_dataset(data)?;
    let params = checkpoint::load(model)?;
    prepare_out(common)?;
    let records = posenet::net::evaluate(&params, &ds, input.into())?;
    let report = aggregate(&records)?;
    report.write_all(&common.out, "eval")?;
    write_records(&common.out.join("eval_records.csv"), &records)?;
    let o = &report.overall;
    log(&format!(
        "{} samples: median {:.3} cm {:.3} deg, success {:.3}",
        o.count, o.median_position_cm, o.median_orientation_deg, o.success_rate
    ));
    write_run(
        common,
        "eval",
        json!({ "input": InputKind::from(input) }),
        json!({ "data": data, "model": model }),
    )
}

fn write_records(path: &Path, records: &[EvalRecord]) -> CliResult<()> {
    let mut s = String::from("id,class,position_error_cm,orientation_error_deg,success\n");
    for r in records {
        s += &format!(
            "{},{},{},{},{}\n",
            r.id, r.class, r.position_error_cm, r.orientation_error_deg, r.success
        );
    }
    std::fs::write(path, s).map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))
}

fn gradcheck_cmd(loss: LossArg, trials: usize, common: &Common) -> CliResult<()> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let kinds: Vec<LossKind> = match loss {
        LossArg::L1 => vec![LossKind::L1],
        LossArg::L2 => vec![LossKind::L2],
        LossArg::L3 => vec![LossKind::L3],
        LossArg::L4 => vec![LossKind::L4],
        LossArg::All => LossKind::ALL.to_vec(),
    };
    let seed = common.seed.unwrap_or(0);
    prepare_out(common)?;
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for kind in kinds {
        let loss_err = gradcheck(kind, trials, seed)?;
        let net = network_gradcheck(kind, seed)?;
        println!(
            "{} max relative error {loss_err:.3e} over {trials} configurations; network {:.3e} ({} of {} parameters)",
            kind.name(),
            net.max_relative_error,
            net.checked,
            net.total
        );
        if !(loss_err < LOSS_TOLERANCE) || !(net.max_relative_error < NETWORK_TOLERANCE) {
            failed.push(kind.name());
        }
        rows.push(json!({
            "loss": kind,
            "trials": trials,
            "max_relative_error": loss_err,
            "network": net,
        }));
    }
    write_json(&common.out.join("gradcheck.json"), &rows)?;
    write_run(
        common,
        "gradcheck",
        json!({ "trials": trials, "loss_tolerance": LOSS_TOLERANCE, "network_tolerance": NETWORK_TOLERANCE }),
        json!({}),
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "gradient check failed for {}",
            failed.join(", ")
        )))
    }
}

fn experiment_cmd(kind: ExperimentKind, common: &Common) -> CliResult<()> {
    let (mut cfg, _) = config::resolve(
        &ExperimentConfig::preset(kind),
        common.config.as_deref(),
        &common.overrides,
    )?;
    if let Some(s) = common.seed {
        cfg.set_seed(s);
    }
    if cfg.sweep.kind() != kind {
        return Err(CliError::Usage(format!(
            "config describes a {} sweep, not {}",
            cfg.sweep.kind().name(),
            kind.name()
        )));
    }
    cfg.validate()?;
    prepare_out(common)?;
    let report = experiments::run_experiment(&cfg, &common.out, &mut |m| log(m))?;
    for v in &report.verdicts {
        log(&format!(
            "{} {}: {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        ));
    }
    write_run(common, kind.name(), serde_json::to_value(&cfg).unwrap(), json!({}))
}

fn occlude_cmd(data: &Path, model: &Path, radii: &[f64], common: &Common) -> CliResult<()> {
    if radii.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(CliError::Usage("radii must be finite and non-negative".into()));
    }
    let ds = dataset::load_dataset(data)?;
    let params = checkpoint::load(model)?;
    let width = params.config().input_width;
    let scaled: Vec<f64> = radii.iter().map(|&r| scale_radius(r, width)).collect();
    prepare_out(common)?;
    let report = sensitivity_sweep(&params, &ds, &scaled, common.seed.unwrap_or(0))?;
    report.write_csv(&common.out.join("occlusion.csv"))?;
    write_json(&common.out.join("occlusion.json"), &report)?;
    for b in report.bins.iter().filter(|b| b.n > 0) {
        log(&format!(
            "occlusion {:.2}-{:.2}: n {} mean {:.3} cm {:.3} deg",
            b.bin_lo,
            b.bin_hi,
            b.n,
            b.mean_pos_err_cm.unwrap_or(f64::NAN),
            b.mean_ori_err_deg.unwrap_or(f64::NAN)
        ));
    }
    write_run(
        common,
        "occlude",
        json!({ "radii_ref": radii, "radii_px": scaled }),
        json!({ "data": data, "model": model }),
    )
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreviewConfig {
    mesh: ClassSpec,
    position: [f64; 3],
    /// (w, x, y, z); normalized before use.
    quaternion: [f64; 4],
    kind: ImageKind,
    intrinsics: CameraIntrinsics,
}

fn render_preview(common: &Common) -> CliResult<()> {
    let defaults = PreviewConfig {
        mesh: ClassSpec::builtin("tripod"),
        position: [0.0, 0.0, 0.9],
        quaternion: [1.0, 0.0, 0.0, 0.0],
        kind: ImageKind::Mask,
        intrinsics: GenerateConfig::default().intrinsics,
    };
    let (cfg, resolved) = config::resolve(&defaults, common.config.as_deref(), &common.overrides)?;
    cfg.intrinsics.validate()?;
    let mesh = cfg.mesh.load_mesh()?;
    let q = Quaternion::from_array(cfg.quaternion);
    let n = q.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(CliError::Usage("quaternion must be nonzero and finite".into()));
    }
    let pose = Pose::new(cfg.position, Quaternion::from_array(cfg.quaternion.map(|c| c / n)))?;
    prepare_out(common)?;
    if cfg.kind.has_mask() {
        let mask = render::rasterize_silhouette(&mesh, &pose, &cfg.intrinsics)?;
        mask.write_pgm(&common.out.join("preview_mask.pgm"))?;
        log(&format!("mask covers {} pixels", mask.count()));
    }
    if cfg.kind.has_shaded() {
        let img = render::render_shaded(&mesh, &pose, &cfg.intrinsics, DEFAULT_LIGHT)?;
        img.write_pgm(&common.out.join("preview_shaded.pgm"))?;
    }
    write_run(common, "render-preview", resolved, json!({}))
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::GenData { common } => gen_data(common),
        Command::Train {
            data,
            validation,
            common,
        } => train_cmd(data, validation.as_deref(), common),
        Command::Eval {
            data,
            model,
            input,
            common,
        } => eval_cmd(data, model, *input, common),
        Command::Gradcheck { loss, trials, common } => gradcheck_cmd(*loss, *trials, common),
        Command::Experiment { name, common } => experiment_cmd((*name).into(), common),
        Command::BenchLoss { common } => experiment_cmd(ExperimentKind::LossCompare, common),
        Command::Occlude {
            data,
            model,
            radii,
            common,
        } => occlude_cmd(data, model, radii, common),
        Command::RenderPreview { common } => render_preview(common),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

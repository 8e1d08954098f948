//! Mini-batch SGD with momentum and decoupled weight decay.

use serde::{Deserialize, Serialize};

use super::model::{init_params, input_from_gray, Gradients, NetworkConfig, NetworkParams, Params};
use super::predict_inputs;
use super::real::Real;
use crate::dataset::{Dataset, InputKind};
use crate::error::{Error, Result};
use crate::eval::{aggregate, ErrorStats, EvalRecord};
use crate::geom::Vec3;
use crate::image::GrayImage;
use crate::loss::{LossKind, LossSpec, LossWeights, PointReduction};
use crate::occlusion::{occlude_random, scale_radius};
use crate::pose::Pose;
use crate::seeds;

/// Loss selection. The point-cloud losses carry no weighting term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LossConfig {
    L1 {
        #[serde(default = "one")]
        alpha: f64,
    },
    L2 {
        #[serde(default = "one")]
        alpha: f64,
    },
    L3 {
        #[serde(default = "mean")]
        reduction: PointReduction,
    },
    L4 {
        #[serde(default = "mean")]
        reduction: PointReduction,
    },
}

fn one() -> f64 {
    1.0
}

fn mean() -> PointReduction {
    PointReduction::Mean
}

impl LossConfig {
    /// Default settings for `kind`.
    pub fn of(kind: LossKind) -> Self {
        match kind {
            LossKind::L1 => LossConfig::L1 { alpha: 1.0 },
            LossKind::L2 => LossConfig::L2 { alpha: 1.0 },
            LossKind::L3 => LossConfig::L3 { reduction: mean() },
            LossKind::L4 => LossConfig::L4 { reduction: mean() },
        }
    }

    pub fn kind(&self) -> LossKind {
        match self {
            LossConfig::L1 { .. } => LossKind::L1,
            LossConfig::L2 { .. } => LossKind::L2,
            LossConfig::L3 { .. } => LossKind::L3,
            LossConfig::L4 { .. } => LossKind::L4,
        }
    }

    pub fn spec(&self) -> Result<LossSpec> {
        Ok(match *self {
            LossConfig::L1 { alpha } | LossConfig::L2 { alpha } => LossSpec {
                weights: LossWeights::new(alpha)?,
                ..LossSpec::new(self.kind())
            },
            LossConfig::L3 { reduction } | LossConfig::L4 { reduction } => LossSpec {
                reduction,
                ..LossSpec::new(self.kind())
            },
        })
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig::of(LossKind::L4)
    }
}

/// Occlusion augmentation: radius drawn in `[1, R]` with `R` given at the
/// 320-pixel reference width and rescaled to the network input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcclusionAugment {
    pub max_radius_ref: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub learning_rate: f64,
    /// 1-based epochs after which the rate is divided by `decay_factor`.
    pub decay_epochs: Vec<usize>,
    pub decay_factor: f64,
    pub epochs: usize,
    pub momentum: f64,
    pub occlusion: Option<OcclusionAugment>,
    pub input: InputKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossConfig::default(),
            batch_size: 32,
            weight_decay: 1e-4,
            learning_rate: 0.01,
            decay_epochs: vec![7, 14],
            decay_factor: 10.0,
            epochs: 21,
            momentum: 0.9,
            occlusion: None,
            input: InputKind::Mask,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate {} not positive",
                self.learning_rate
            )));
        }
        if self.epochs < 1 {
            return Err(Error::Config("need at least one epoch".into()));
        }
        if !(self.decay_factor >= 1.0) {
            return Err(Error::Config("decay factor below 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("negative weight decay".into()));
        }
        if let Some(o) = self.occlusion {
            if !(o.max_radius_ref > 0.0) {
                return Err(Error::Config("occlusion radius must be positive".into()));
            }
            if self.input != InputKind::Mask {
                return Err(Error::Config(
                    "occlusion augmentation applies to mask inputs only".into(),
                ));
            }
        }
        self.loss.spec().map(|_| ())
    }

    /// Learning rate in effect during 1-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let drops = self.decay_epochs.iter().filter(|&&d| epoch > d).count();
        self.learning_rate / self.decay_factor.powi(drops as i32)
    }
}

/// One training sample: input plane, class and target pose.
pub struct Sample<'a> {
    pub input: &'a [f32],
    pub class: usize,
    pub target: Pose,
}

/// Gradients of the summed loss over `batch`, and that sum.
pub fn backward<T: Real>(
    params: &Params<T>,
    batch: &[Sample<'_>],
    loss: &LossSpec,
    clouds: &[Vec<Vec3>],
) -> Result<(Gradients<T>, f64)> {
    let inputs: Vec<&[f32]> = batch.iter().map(|s| s.input).collect();
    let classes: Vec<usize> = batch.iter().map(|s| s.class).collect();
    let (out, cache) = params.forward_batch(&inputs, &classes)?;
    let mut total = 0.0;
    let mut dp = Vec::with_capacity(batch.len());
    let mut dq = Vec::with_capacity(batch.len());
    for (o, s) in out.iter().zip(batch) {
        let cloud: &[Vec3] = if loss.kind.uses_cloud() {
            clouds.get(s.class).ok_or(Error::ClassOutOfRange {
                class: s.class,
                num_classes: clouds.len(),
            })?
        } else {
            &[]
        };
        let l = loss
            .evaluate(o, &s.target, cloud)
            .map_err(|e| Error::NumericDegeneracy(e.to_string()))?;
        total += l.value;
        dp.push(l.d_position);
        dq.push(l.d_raw_quaternion);
    }
    let grads = params.backward_batch(&cache, &classes, &dp, &dq)?;
    Ok((grads, total))
}

/// Optimizer state: one velocity buffer per tensor.
pub struct Sgd {
    velocity: Gradients<f32>,
    momentum: f32,
    weight_decay: f64,
}

impl Sgd {
    pub fn new(params: &NetworkParams, momentum: f64, weight_decay: f64) -> Self {
        Sgd {
            velocity: params.zero_gradients(),
            momentum: momentum as f32,
            weight_decay,
        }
    }

    /// `v = m v + g; w = (1 - lr wd) w - lr v`.
    pub fn step(&mut self, params: &mut NetworkParams, grads: &Gradients<f32>, lr: f64) {
        let shrink = (1.0 - lr * self.weight_decay) as f32;
        let lr = lr as f32;
        for ((t, g), v) in params.tensors_mut().iter_mut().zip(grads).zip(&mut self.velocity) {
            for ((w, &g), v) in t.data.iter_mut().zip(g).zip(v.iter_mut()) {
                *v = self.momentum * *v + g;
                *w = *w * shrink - lr * *v;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_loss: f64,
    pub validation: Option<ErrorStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub samples: usize,
    pub iterations: usize,
    pub notes: Vec<String>,
    pub epochs: Vec<EpochLog>,
}

/// Loads every record's image as 8-bit gray.
pub fn load_images(ds: &Dataset, kind: InputKind) -> Result<Vec<GrayImage>> {
    (0..ds.len()).map(|i| ds.load_gray(i, kind)).collect()
}

/// Evaluates `params` on preloaded images.
pub fn evaluate_images(params: &NetworkParams, ds: &Dataset, images: &[GrayImage]) -> Result<Vec<EvalRecord>> {
    let inputs: Vec<Vec<f32>> = images.iter().map(input_from_gray).collect();
    let classes: Vec<usize> = ds.records().iter().map(|r| r.class).collect();
    let preds = predict_inputs(params, &inputs, &classes)?;
    preds
        .iter()
        .zip(ds.records())
        .map(|(p, r)| EvalRecord::from_prediction(r.id.clone(), p, &r.pose()))
        .collect()
}

/// Evaluates `params` on every record of `ds`.
pub fn evaluate(params: &NetworkParams, ds: &Dataset, kind: InputKind) -> Result<Vec<EvalRecord>> {
    evaluate_images(params, ds, &load_images(ds, kind)?)
}

pub fn train(
    data: &Dataset,
    validation: Option<&Dataset>,
    net: &NetworkConfig,
    cfg: &TrainConfig,
) -> Result<(NetworkParams, TrainingLog)> {
    train_with_progress(data, validation, net, cfg, &mut |_| {})
}

/// Trains from a fresh initialization; `progress` sees each epoch's log
/// as soon as it completes.
pub fn train_with_progress(
    data: &Dataset,
    validation: Option<&Dataset>,
    net: &NetworkConfig,
    cfg: &TrainConfig,
    progress: &mut dyn FnMut(&EpochLog),
) -> Result<(NetworkParams, TrainingLog)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if let Some(r) = data.records().iter().find(|r| r.class >= net.num_classes) {
        return Err(Error::ClassOutOfRange {
            class: r.class,
            num_classes: net.num_classes,
        });
    }
    let k = data.intrinsics();
    if k.width != net.input_width || k.height != net.input_height {
        return Err(Error::Config(format!(
            "dataset images are {}x{}, network expects {}x{}",
            k.width, k.height, net.input_width, net.input_height
        )));
    }
    let spec = cfg.loss.spec()?;
    let mut params = init_params(net)?;
    let images = load_images(data, cfg.input)?;
    let val = match validation {
        Some(v) => Some((v, load_images(v, cfg.input)?)),
        None => None,
    };
    let targets: Vec<Pose> = data.records().iter().map(|r| r.pose()).collect();
    let clouds = data.clouds();
    let max_radius = cfg.occlusion.map(|o| scale_radius(o.max_radius_ref, net.input_width));
    let mut sgd = Sgd::new(&params, cfg.momentum, cfg.weight_decay);
    let mut log = TrainingLog {
        network: net.clone(),
        train: cfg.clone(),
        samples: data.len(),
        iterations: 0,
        notes: vec![
            format!(
                "optimizer: SGD, momentum {}, decoupled weight decay {}",
                cfg.momentum, cfg.weight_decay
            ),
            "init: normal(0, sqrt(2/fan_in)) weights, zero biases, orientation bias w = 1".into(),
            "batch loss: mean over samples".into(),
        ],
        epochs: Vec::new(),
    };
    for epoch in 1..=cfg.epochs {
        let lr = cfg.lr_at(epoch);
        let order = data.shuffled_indices(seeds::derive(cfg.seed, &[1, epoch as u64]));
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let inputs: Vec<Vec<f32>> = chunk
                .iter()
                .map(|&i| match max_radius {
                    Some(r) => {
                        let mut rng = seeds::rng(cfg.seed, &[2, epoch as u64, i as u64]);
                        occlude_random(&images[i].to_mask(), r, &mut rng).map(|m| input_from_gray(&m.to_gray()))
                    }
                    None => Ok(input_from_gray(&images[i])),
                })
                .collect::<Result<_>>()?;
            let batch: Vec<Sample<'_>> = chunk
                .iter()
                .zip(&inputs)
                .map(|(&i, x)| Sample {
                    input: x,
                    class: data.records()[i].class,
                    target: targets[i],
                })
                .collect();
            let (mut grads, total) = backward(&params, &batch, &spec, clouds)?;
            if !total.is_finite() {
                return Err(Error::NumericDegeneracy(format!("non-finite loss in epoch {epoch}")));
            }
            let inv = 1.0 / chunk.len() as f32;
            grads.iter_mut().flatten().for_each(|g| *g *= inv);
            sgd.step(&mut params, &grads, lr);
            loss_sum += total;
            log.iterations += 1;
        }
        if !params.is_finite() {
            return Err(Error::NumericDegeneracy(format!(
                "parameters diverged in epoch {epoch}"
            )));
        }
        let validation = match &val {
            Some((v, imgs)) => Some(aggregate(&evaluate_images(&params, v, imgs)?)?.overall),
            None => None,
        };
        let entry = EpochLog {
            epoch,
            learning_rate: lr,
            mean_loss: loss_sum / data.len() as f64,
            validation,
        };
        progress(&entry);
        log.epochs.push(entry);
    }
    Ok((params, log))
}

//! Finite-difference check of the full network backward pass.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{init_params, ForwardCache, NetworkConfig, Params};
use crate::error::Result;
use crate::loss::{relative_error, LossKind, LossSpec, PointReduction, GRADCHECK_STEP, KINK_MARGIN};
use crate::pose::{Pose, Quaternion};

/// Small two-class configuration whose full parameter set can be
/// perturbed one entry at a time.
pub fn toy_config(seed: u64) -> NetworkConfig {
    NetworkConfig {
        input_width: 16,
        input_height: 12,
        channels: vec![2, 2],
        padding: 1,
        hidden: 8,
        num_classes: 2,
        seed,
        ..Default::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheck {
    pub loss: LossKind,
    pub max_relative_error: f64,
    /// Parameters compared; the rest sat too close to a rectifier or loss kink.
    pub checked: usize,
    pub total: usize,
}

fn batch_loss(
    p: &Params<f64>,
    xs: &[&[f32]],
    classes: &[usize],
    spec: &LossSpec,
    targets: &[Pose],
    cloud: &[[f64; 3]],
) -> Result<(f64, Vec<[f64; 3]>, Vec<[f64; 4]>, ForwardCache<f64>, f64)> {
    let (out, cache) = p.forward_batch(xs, classes)?;
    let mut total = 0.0;
    let (mut dp, mut dq) = (Vec::new(), Vec::new());
    let mut kink = f64::INFINITY;
    for (o, t) in out.iter().zip(targets) {
        let l = spec.evaluate(o, t, cloud)?;
        kink = kink.min(spec.kink_distance(o, t, cloud)?);
        total += l.value;
        dp.push(l.d_position);
        dq.push(l.d_raw_quaternion);
    }
    Ok((total, dp, dq, cache, kink))
}

/// Compares every parameter gradient of a three-sample batch on the toy
/// network against central differences in f64. Perturbations that flip
/// a rectifier or land within the loss kink margin are skipped.
pub fn network_gradcheck(kind: LossKind, seed: u64) -> Result<NetworkCheck> {
    let cfg = toy_config(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f32>> = (0..3)
        .map(|_| (0..cfg.input_len()).map(|_| rng.random::<f32>()).collect())
        .collect();
    let refs: Vec<&[f32]> = xs.iter().map(|v| v.as_slice()).collect();
    let classes = [0, 1, 1];
    let targets = (0..3)
        .map(|_| {
            Pose::new(
                [rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), 0.9],
                Quaternion::random_uniform(&mut rng),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let cloud: Vec<[f64; 3]> = (0..20)
        .map(|_| [0, 1, 2].map(|_| rng.random_range(-0.1..0.1)))
        .collect();
    let spec = LossSpec {
        reduction: PointReduction::Mean,
        ..LossSpec::new(kind)
    };
    let h = GRADCHECK_STEP;
    let mut p = init_params(&cfg)?.cast::<f64>();
    let (_, dp, dq, cache, _) = batch_loss(&p, &refs, &classes, &spec, &targets, &cloud)?;
    let pattern = cache.activation_pattern();
    let grads = p.backward_batch(&cache, &classes, &dp, &dq)?;
    let (mut checked, mut worst) = (0, 0.0f64);
    for t in 0..grads.len() {
        for i in 0..grads[t].len() {
            let orig = p.tensors()[t].data[i];
            p.tensors_mut()[t].data[i] = orig + h;
            let (lp, _, _, cp, kp) = batch_loss(&p, &refs, &classes, &spec, &targets, &cloud)?;
            p.tensors_mut()[t].data[i] = orig - h;
            let (lm, _, _, cm, km) = batch_loss(&p, &refs, &classes, &spec, &targets, &cloud)?;
            p.tensors_mut()[t].data[i] = orig;
            if cp.activation_pattern() != pattern || cm.activation_pattern() != pattern || kp.min(km) < KINK_MARGIN {
                continue;
            }
            let num = (lp - lm) / (2.0 * h);
            worst = worst.max(relative_error(grads[t][i], num));
            checked += 1;
        }
    }
    Ok(NetworkCheck {
        loss: kind,
        max_relative_error: worst,
        checked,
        total: p.num_params(),
    })
}

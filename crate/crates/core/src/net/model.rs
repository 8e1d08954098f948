//! Pose interpreter network: a strided convolution stack flattened (no
//! global pooling) into one hidden fully connected layer, followed by a
//! position branch and an orientation branch with one output slice per
//! object class.
//!
//! Activations are stored channel-major, `[channel][sample][row][col]`, so
//! each convolution is one matrix product over the whole batch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::real::{matmul, Mat, Real};
use crate::error::{Error, Result};
use crate::image::{GrayImage, MaskImage};
use crate::loss::RawPose;
use crate::pose::Quaternion;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub input_width: usize,
    pub input_height: usize,
    /// Output channels of each convolution.
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    /// Zero padding on every side of each convolution input.
    #[serde(default)]
    pub padding: usize,
    pub hidden: usize,
    pub num_classes: usize,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            input_width: 80,
            input_height: 60,
            channels: vec![8, 16, 32, 64],
            kernel: 3,
            stride: 2,
            padding: 0,
            hidden: 256,
            num_classes: 1,
            seed: 0,
        }
    }
}

/// Geometry of one convolution (valid padding).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub pad: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvShape {
    pub fn patch(&self, kernel: usize) -> usize {
        self.c_in * kernel * kernel
    }

    pub fn out_pixels(&self) -> usize {
        self.out_h * self.out_w
    }
}

impl NetworkConfig {
    pub fn conv_shapes(&self) -> Result<Vec<ConvShape>> {
        if self.kernel == 0 || self.stride == 0 {
            return Err(Error::Config("kernel and stride must be positive".into()));
        }
        if self.hidden < 8 {
            return Err(Error::Config(format!("hidden width {} below 8", self.hidden)));
        }
        if self.num_classes < 1 {
            return Err(Error::Config("need at least one class".into()));
        }
        if self.channels.contains(&0) {
            return Err(Error::Config("zero-width convolution".into()));
        }
        let (mut h, mut w, mut c) = (self.input_height, self.input_width, 1);
        let mut shapes = Vec::with_capacity(self.channels.len());
        let p = self.padding;
        if p >= self.kernel {
            return Err(Error::Config(format!("padding {p} not below kernel {}", self.kernel)));
        }
        for (i, &c_out) in self.channels.iter().enumerate() {
            if h + 2 * p < self.kernel || w + 2 * p < self.kernel {
                return Err(Error::Config(format!(
                    "input {}x{} collapses below 1x1 at convolution {i} ({w}x{h} < kernel {})",
                    self.input_width, self.input_height, self.kernel
                )));
            }
            let out_h = (h + 2 * p - self.kernel) / self.stride + 1;
            let out_w = (w + 2 * p - self.kernel) / self.stride + 1;
            shapes.push(ConvShape {
                pad: p,
                c_in: c,
                c_out,
                in_h: h,
                in_w: w,
                out_h,
                out_w,
            });
            (h, w, c) = (out_h, out_w, c_out);
        }
        Ok(shapes)
    }

    /// Length of the flattened feature vector fed to the hidden layer.
    pub fn feature_len(&self) -> Result<usize> {
        let shapes = self.conv_shapes()?;
        Ok(match shapes.last() {
            Some(s) => s.c_out * s.out_pixels(),
            None => self.input_width * self.input_height,
        })
    }

    pub fn input_len(&self) -> usize {
        self.input_width * self.input_height
    }

    pub fn validate(&self) -> Result<()> {
        self.conv_shapes().map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    fn zeros(name: &str, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            name: name.to_string(),
            shape,
            data: vec![T::ZERO; n],
        }
    }
}

/// Network weights. Tensor order: per convolution (weight, bias), then
/// hidden (weight, bias), position head (weight, bias), orientation head
/// (weight, bias). Weights are row-major `[out][in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    config: NetworkConfig,
    tensors: Vec<Tensor<T>>,
}

/// Single-precision parameters used for training and checkpoints.
pub type NetworkParams = Params<f32>;

/// Gradients share the parameter layout.
pub type Gradients<T> = Vec<Vec<T>>;

impl<T: Real> Params<T> {
    /// Zero-filled parameters with the layout implied by `config`.
    pub fn zeros(config: &NetworkConfig) -> Result<Self> {
        let shapes = config.conv_shapes()?;
        let k = config.kernel;
        let mut tensors = Vec::new();
        for (i, s) in shapes.iter().enumerate() {
            tensors.push(Tensor::zeros(&format!("conv{i}.weight"), vec![s.c_out, s.c_in, k, k]));
            tensors.push(Tensor::zeros(&format!("conv{i}.bias"), vec![s.c_out]));
        }
        let d = config.feature_len()?;
        let (h, c) = (config.hidden, config.num_classes);
        tensors.push(Tensor::zeros("hidden.weight", vec![h, d]));
        tensors.push(Tensor::zeros("hidden.bias", vec![h]));
        tensors.push(Tensor::zeros("position.weight", vec![3 * c, h]));
        tensors.push(Tensor::zeros("position.bias", vec![3 * c]));
        tensors.push(Tensor::zeros("orientation.weight", vec![4 * c, h]));
        tensors.push(Tensor::zeros("orientation.bias", vec![4 * c]));
        Ok(Params {
            config: config.clone(),
            tensors,
        })
    }

    pub(crate) fn from_parts(config: NetworkConfig, tensors: Vec<Tensor<T>>) -> Result<Self> {
        let template = Params::<T>::zeros(&config)?;
        if template.tensors.len() != tensors.len()
            || template
                .tensors
                .iter()
                .zip(&tensors)
                .any(|(a, b)| a.shape != b.shape || b.data.len() != a.data.len())
        {
            return Err(Error::Config("tensor layout does not match config".into()));
        }
        Ok(Params { config, tensors })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    fn conv_layers(&self) -> usize {
        self.config.channels.len()
    }

    /// Index of the first head tensor (hidden weight).
    fn hidden_index(&self) -> usize {
        2 * self.conv_layers()
    }

    pub fn position_weight(&self) -> &Tensor<T> {
        &self.tensors[self.hidden_index() + 2]
    }

    pub fn orientation_weight(&self) -> &Tensor<T> {
        &self.tensors[self.hidden_index() + 4]
    }

    pub fn position_bias(&self) -> &Tensor<T> {
        &self.tensors[self.hidden_index() + 3]
    }

    pub fn orientation_bias(&self) -> &Tensor<T> {
        &self.tensors[self.hidden_index() + 5]
    }

    /// Converts every tensor to another scalar type.
    pub fn cast<U: Real>(&self) -> Params<U> {
        Params {
            config: self.config.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
                })
                .collect(),
        }
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        self.tensors.iter().map(|t| vec![T::ZERO; t.data.len()]).collect()
    }
}

/// Fan-in scaled normal weights (std `sqrt(2 / fan_in)`) and zero biases,
/// except the orientation bias whose real component starts at 1 so that an
/// all-zero input still yields a well-defined (identity) quaternion.
pub fn init_params(config: &NetworkConfig) -> Result<NetworkParams> {
    let mut params = Params::<f32>::zeros(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for t in params.tensors.iter_mut().filter(|t| t.shape.len() > 1) {
        let fan_in: usize = t.shape[1..].iter().product();
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        for v in t.data.iter_mut() {
            *v = normal.sample(&mut rng) as f32;
        }
    }
    let ori_bias = params.tensors.len() - 1;
    for c in 0..config.num_classes {
        params.tensors[ori_bias].data[4 * c] = 1.0;
    }
    Ok(params)
}

/// Network input plane for a binary mask: 1.0 where set, 0.0 elsewhere.
pub fn input_from_mask(mask: &MaskImage) -> Vec<f32> {
    mask.data().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// Network input plane for a gray image, scaled to `[0, 1]`.
pub fn input_from_gray(img: &GrayImage) -> Vec<f32> {
    img.data().iter().map(|&v| v as f32 / 255.0).collect()
}

/// Intermediate values kept for the backward pass.
pub struct ForwardCache<T> {
    batch: usize,
    cols: Vec<Vec<T>>,
    acts: Vec<Vec<T>>,
    features: Vec<T>,
    hidden: Vec<T>,
}

impl<T> ForwardCache<T> {
    /// Pattern of active rectifiers, used to detect kinks in
    /// finite-difference checks.
    pub fn activation_pattern(&self) -> Vec<bool>
    where
        T: Real,
    {
        self.acts
            .iter()
            .flatten()
            .chain(&self.hidden)
            .map(|&v| v > T::ZERO)
            .collect()
    }
}

/// Input column touched by output column `o` at kernel offset `kx`, if
/// it lies inside the unpadded input.
fn src_index(o: usize, k: usize, stride: usize, pad: usize, len: usize) -> Option<usize> {
    (o * stride + k).checked_sub(pad).filter(|&i| i < len)
}

fn im2col<T: Real>(x: &[T], s: &ConvShape, batch: usize, k: usize, stride: usize, cols: &mut [T]) {
    let bp = batch * s.out_pixels();
    for c in 0..s.c_in {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * bp..(row + 1) * bp];
                let mut idx = 0;
                for b in 0..batch {
                    let plane = &x[(c * batch + b) * s.in_h * s.in_w..];
                    for oy in 0..s.out_h {
                        let Some(iy) = src_index(oy, ky, stride, s.pad, s.in_h) else {
                            dst[idx..idx + s.out_w].fill(T::ZERO);
                            idx += s.out_w;
                            continue;
                        };
                        let src = &plane[iy * s.in_w..];
                        for ox in 0..s.out_w {
                            dst[idx] = match src_index(ox, kx, stride, s.pad, s.in_w) {
                                Some(ix) => src[ix],
                                None => T::ZERO,
                            };
                            idx += 1;
                        }
                    }
                }
            }
        }
    }
}

fn col2im<T: Real>(cols: &[T], s: &ConvShape, batch: usize, k: usize, stride: usize, dx: &mut [T]) {
    let bp = batch * s.out_pixels();
    for c in 0..s.c_in {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * bp..(row + 1) * bp];
                let mut idx = 0;
                for b in 0..batch {
                    let base = (c * batch + b) * s.in_h * s.in_w;
                    for oy in 0..s.out_h {
                        let Some(iy) = src_index(oy, ky, stride, s.pad, s.in_h) else {
                            idx += s.out_w;
                            continue;
                        };
                        let off = base + iy * s.in_w;
                        for ox in 0..s.out_w {
                            if let Some(ix) = src_index(ox, kx, stride, s.pad, s.in_w) {
                                dx[off + ix] += src[idx];
                            }
                            idx += 1;
                        }
                    }
                }
            }
        }
    }
}

fn relu_in_place<T: Real>(v: &mut [T]) {
    for x in v {
        if !(*x > T::ZERO) {
            *x = T::ZERO;
        }
    }
}

fn add_row_bias<T: Real>(out: &mut [T], rows: usize, bias: &[T]) {
    let cols = bias.len();
    for r in 0..rows {
        for (o, b) in out[r * cols..(r + 1) * cols].iter_mut().zip(bias) {
            *o += *b;
        }
    }
}

impl<T: Real> Params<T> {
    /// Runs a batch of input planes; `classes[b]` selects the head slice
    /// read for sample `b`.
    pub fn forward_batch(&self, inputs: &[&[f32]], classes: &[usize]) -> Result<(Vec<RawPose>, ForwardCache<T>)> {
        let cfg = &self.config;
        let batch = inputs.len();
        if batch == 0 || classes.len() != batch {
            return Err(Error::Config("batch must be nonempty with one class per input".into()));
        }
        for (input, &class) in inputs.iter().zip(classes) {
            if input.len() != cfg.input_len() {
                return Err(Error::Config(format!(
                    "input has {} pixels, network expects {}x{}",
                    input.len(),
                    cfg.input_width,
                    cfg.input_height
                )));
            }
            if class >= cfg.num_classes {
                return Err(Error::ClassOutOfRange {
                    class,
                    num_classes: cfg.num_classes,
                });
            }
        }
        let shapes = cfg.conv_shapes()?;
        let k = cfg.kernel;
        let mut x: Vec<T> = inputs
            .iter()
            .flat_map(|p| p.iter().map(|&v| T::from_f64(v as f64)))
            .collect();
        let mut cols_all = Vec::with_capacity(shapes.len());
        let mut acts = Vec::with_capacity(shapes.len());
        for (l, s) in shapes.iter().enumerate() {
            let bp = batch * s.out_pixels();
            let kk = s.patch(k);
            let mut cols = vec![T::ZERO; kk * bp];
            im2col(&x, s, batch, k, cfg.stride, &mut cols);
            let w = &self.tensors[2 * l].data;
            let bias = &self.tensors[2 * l + 1].data;
            let mut y = vec![T::ZERO; s.c_out * bp];
            for (c, row) in y.chunks_mut(bp).enumerate() {
                row.fill(bias[c]);
            }
            matmul(Mat::new(w, s.c_out, kk), Mat::new(&cols, kk, bp), T::ONE, &mut y);
            relu_in_place(&mut y);
            cols_all.push(cols);
            acts.push(y.clone());
            x = y;
        }
        // [C][B][P] -> [B][C*P]
        let d = cfg.feature_len()?;
        let features = match shapes.last() {
            Some(s) => {
                let p = s.out_pixels();
                let mut f = vec![T::ZERO; batch * d];
                for c in 0..s.c_out {
                    for b in 0..batch {
                        let src = &x[(c * batch + b) * p..(c * batch + b + 1) * p];
                        f[b * d + c * p..b * d + (c + 1) * p].copy_from_slice(src);
                    }
                }
                f
            }
            None => x,
        };
        let hi = self.hidden_index();
        let hdim = cfg.hidden;
        let mut hidden = vec![T::ZERO; batch * hdim];
        matmul(
            Mat::new(&features, batch, d),
            Mat::new(&self.tensors[hi].data, hdim, d).t(),
            T::ZERO,
            &mut hidden,
        );
        add_row_bias(&mut hidden, batch, &self.tensors[hi + 1].data);
        relu_in_place(&mut hidden);

        let nc = cfg.num_classes;
        let mut pos = vec![T::ZERO; batch * 3 * nc];
        matmul(
            Mat::new(&hidden, batch, hdim),
            Mat::new(&self.tensors[hi + 2].data, 3 * nc, hdim).t(),
            T::ZERO,
            &mut pos,
        );
        add_row_bias(&mut pos, batch, &self.tensors[hi + 3].data);
        let mut ori = vec![T::ZERO; batch * 4 * nc];
        matmul(
            Mat::new(&hidden, batch, hdim),
            Mat::new(&self.tensors[hi + 4].data, 4 * nc, hdim).t(),
            T::ZERO,
            &mut ori,
        );
        add_row_bias(&mut ori, batch, &self.tensors[hi + 5].data);

        let outputs = classes
            .iter()
            .enumerate()
            .map(|(b, &c)| {
                let p = &pos[b * 3 * nc + 3 * c..b * 3 * nc + 3 * c + 3];
                let q = &ori[b * 4 * nc + 4 * c..b * 4 * nc + 4 * c + 4];
                RawPose::new(
                    [p[0].to_f64(), p[1].to_f64(), p[2].to_f64()],
                    [q[0].to_f64(), q[1].to_f64(), q[2].to_f64(), q[3].to_f64()],
                )
            })
            .collect();
        Ok((
            outputs,
            ForwardCache {
                batch,
                cols: cols_all,
                acts,
                features,
                hidden,
            },
        ))
    }

    /// Reverse pass given per-sample gradients of the batch loss with
    /// respect to each selected position and raw quaternion output.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache<T>,
        classes: &[usize],
        d_position: &[[f64; 3]],
        d_raw: &[[f64; 4]],
    ) -> Result<Gradients<T>> {
        let cfg = &self.config;
        let batch = cache.batch;
        if classes.len() != batch || d_position.len() != batch || d_raw.len() != batch {
            return Err(Error::Config("gradient batch size mismatch".into()));
        }
        let shapes = cfg.conv_shapes()?;
        let k = cfg.kernel;
        let nc = cfg.num_classes;
        let hdim = cfg.hidden;
        let d = cfg.feature_len()?;
        let hi = self.hidden_index();
        let mut grads = self.zero_gradients();

        let mut dpos = vec![T::ZERO; batch * 3 * nc];
        let mut dori = vec![T::ZERO; batch * 4 * nc];
        for (b, &c) in classes.iter().enumerate() {
            for j in 0..3 {
                dpos[b * 3 * nc + 3 * c + j] = T::from_f64(d_position[b][j]);
            }
            for j in 0..4 {
                dori[b * 4 * nc + 4 * c + j] = T::from_f64(d_raw[b][j]);
            }
        }
        // heads
        for (dout, width, wi) in [(&dpos, 3 * nc, hi + 2), (&dori, 4 * nc, hi + 4)] {
            matmul(
                Mat::new(dout, batch, width).t(),
                Mat::new(&cache.hidden, batch, hdim),
                T::ZERO,
                &mut grads[wi],
            );
            for b in 0..batch {
                for j in 0..width {
                    grads[wi + 1][j] += dout[b * width + j];
                }
            }
        }
        let mut dhidden = vec![T::ZERO; batch * hdim];
        matmul(
            Mat::new(&dpos, batch, 3 * nc),
            Mat::new(&self.tensors[hi + 2].data, 3 * nc, hdim),
            T::ZERO,
            &mut dhidden,
        );
        matmul(
            Mat::new(&dori, batch, 4 * nc),
            Mat::new(&self.tensors[hi + 4].data, 4 * nc, hdim),
            T::ONE,
            &mut dhidden,
        );
        for (g, &h) in dhidden.iter_mut().zip(&cache.hidden) {
            if !(h > T::ZERO) {
                *g = T::ZERO;
            }
        }
        // hidden layer
        matmul(
            Mat::new(&dhidden, batch, hdim).t(),
            Mat::new(&cache.features, batch, d),
            T::ZERO,
            &mut grads[hi],
        );
        for b in 0..batch {
            for j in 0..hdim {
                grads[hi + 1][j] += dhidden[b * hdim + j];
            }
        }
        if shapes.is_empty() {
            return Ok(grads);
        }
        let mut dfeat = vec![T::ZERO; batch * d];
        matmul(
            Mat::new(&dhidden, batch, hdim),
            Mat::new(&self.tensors[hi].data, hdim, d),
            T::ZERO,
            &mut dfeat,
        );
        // [B][C*P] -> [C][B][P]
        let last = shapes[shapes.len() - 1];
        let p = last.out_pixels();
        let mut dy = vec![T::ZERO; last.c_out * batch * p];
        for c in 0..last.c_out {
            for b in 0..batch {
                dy[(c * batch + b) * p..(c * batch + b + 1) * p]
                    .copy_from_slice(&dfeat[b * d + c * p..b * d + (c + 1) * p]);
            }
        }
        for l in (0..shapes.len()).rev() {
            let s = &shapes[l];
            let bp = batch * s.out_pixels();
            let kk = s.patch(k);
            for (g, &a) in dy.iter_mut().zip(&cache.acts[l]) {
                if !(a > T::ZERO) {
                    *g = T::ZERO;
                }
            }
            matmul(
                Mat::new(&dy, s.c_out, bp),
                Mat::new(&cache.cols[l], kk, bp).t(),
                T::ZERO,
                &mut grads[2 * l],
            );
            for c in 0..s.c_out {
                let mut acc = T::ZERO;
                for v in &dy[c * bp..(c + 1) * bp] {
                    acc += *v;
                }
                grads[2 * l + 1][c] = acc;
            }
            if l == 0 {
                break;
            }
            let mut dcols = vec![T::ZERO; kk * bp];
            matmul(
                Mat::new(&self.tensors[2 * l].data, s.c_out, kk).t(),
                Mat::new(&dy, s.c_out, bp),
                T::ZERO,
                &mut dcols,
            );
            let mut dx = vec![T::ZERO; s.c_in * batch * s.in_h * s.in_w];
            col2im(&dcols, s, batch, k, cfg.stride, &mut dx);
            dy = dx;
        }
        Ok(grads)
    }
}

/// Network output for one sample of a known class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosePrediction {
    pub class: usize,
    pub position: [f64; 3],
    /// Unit-normalized orientation; not sign-canonicalized.
    pub quaternion: Quaternion,
    pub raw_quaternion: [f64; 4],
}

impl PosePrediction {
    pub fn from_raw(class: usize, raw: &RawPose) -> Result<Self> {
        let (q, _) = raw.normalized().map_err(|e| Error::NumericDegeneracy(e.to_string()))?;
        Ok(PosePrediction {
            class,
            position: raw.position,
            quaternion: q,
            raw_quaternion: raw.raw_quaternion,
        })
    }
}

/// Forward pass on one input plane (mask or gray image encoding).
pub fn forward_input(params: &NetworkParams, input: &[f32], class: usize) -> Result<PosePrediction> {
    let (out, _) = params.forward_batch(&[input], &[class])?;
    PosePrediction::from_raw(class, &out[0])
}

/// Batched forward passes; `inputs` and `classes` pair up sample by sample.
pub fn predict_inputs(params: &NetworkParams, inputs: &[Vec<f32>], classes: &[usize]) -> Result<Vec<PosePrediction>> {
    const CHUNK: usize = 64;
    let mut out = Vec::with_capacity(inputs.len());
    for (xs, cs) in inputs.chunks(CHUNK).zip(classes.chunks(CHUNK)) {
        let refs: Vec<&[f32]> = xs.iter().map(|v| v.as_slice()).collect();
        let (raw, _) = params.forward_batch(&refs, cs)?;
        for (r, &c) in raw.iter().zip(cs) {
            out.push(PosePrediction::from_raw(c, r)?);
        }
    }
    Ok(out)
}

/// Forward pass on a binary mask.
pub fn forward(params: &NetworkParams, mask: &MaskImage, class: usize) -> Result<PosePrediction> {
    let cfg = params.config();
    if mask.width() != cfg.input_width || mask.height() != cfg.input_height {
        return Err(Error::Config(format!(
            "mask is {}x{}, network expects {}x{}",
            mask.width(),
            mask.height(),
            cfg.input_width,
            cfg.input_height
        )));
    }
    forward_input(params, &input_from_mask(mask), class)
}

/// Loads a mask PGM and runs [`forward`].
pub fn predict_file(params: &NetworkParams, path: &std::path::Path, class: usize) -> Result<PosePrediction> {
    let mask = MaskImage::read_pgm(path)?;
    let cfg = params.config();
    if mask.width() != cfg.input_width || mask.height() != cfg.input_height {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!(
                "image is {}x{}, network expects {}x{}",
                mask.width(),
                mask.height(),
                cfg.input_width,
                cfg.input_height
            ),
        });
    }
    forward(params, &mask, class)
}

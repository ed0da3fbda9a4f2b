//! Feed-forward model composition, presets, and the GO-variant transform.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{GeneratorKind, GeneratorSpec};
use crate::go_conv::GoConvLayer;
use crate::ops::{
    conv::conv_output_extent, conv2d_backward, conv2d_forward, fc_backward, fc_forward, maxpool2d_backward,
    maxpool2d_forward, relu_backward, relu_forward, sigmoid_backward, sigmoid_forward,
};
use crate::rng::{stream_rng, streams};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Which generator each output channel of a GO layer uses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mix")]
pub enum GeneratorMix {
    /// First half of the output channels Gabor, the rest Schmid.
    #[default]
    HalfGaborHalfSchmid,
    AllGabor,
    AllSchmid,
    AllFree,
    /// Explicit counts, assigned in Gabor, Schmid, Free order; must sum to the channel count.
    Counts { gabor: usize, schmid: usize, free: usize },
}

impl GeneratorMix {
    pub fn kinds(&self, od: usize) -> Result<Vec<GeneratorKind>> {
        let (g, s, f) = match *self {
            GeneratorMix::HalfGaborHalfSchmid => (od / 2, od - od / 2, 0),
            GeneratorMix::AllGabor => (od, 0, 0),
            GeneratorMix::AllSchmid => (0, od, 0),
            GeneratorMix::AllFree => (0, 0, od),
            GeneratorMix::Counts { gabor, schmid, free } => (gabor, schmid, free),
        };
        if g + s + f != od {
            return Err(Error::InvalidConfig(format!(
                "generator mix assigns {} channels but the layer has {od}",
                g + s + f
            )));
        }
        let mut kinds = vec![GeneratorKind::Gabor; g];
        kinds.extend(core::iter::repeat_n(GeneratorKind::Schmid, s));
        kinds.extend(core::iter::repeat_n(GeneratorKind::Free, f));
        Ok(kinds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum LayerSpec {
    Conv {
        out_channels: usize,
        kernel: usize,
        #[serde(default)]
        padding: usize,
        #[serde(default = "one")]
        stride: usize,
    },
    GoConv {
        kernel: usize,
        #[serde(default)]
        padding: usize,
        #[serde(default = "one")]
        stride: usize,
        kinds: Vec<GeneratorKind>,
        #[serde(default)]
        share_across_in_channels: bool,
    },
    Relu,
    Sigmoid,
    MaxPool2,
    Fc {
        out: usize,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub layers: Vec<LayerSpec>,
    /// `[C, H, W]`.
    pub input_shape: [usize; 3],
    pub classes: usize,
    pub seed: u64,
}

impl NetworkConfig {
    /// Activation shape after every layer; errors on the first incompatibility.
    pub fn shapes(&self) -> Result<Vec<[usize; 3]>> {
        let mut cur = self.input_shape;
        let mut flat = false;
        let mut out = Vec::with_capacity(self.layers.len());
        if cur.contains(&0) {
            return Err(Error::InvalidConfig(format!("input shape {cur:?} has a zero extent")));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let bad = |reason: String| Error::InvalidConfig(format!("layer {i} ({layer:?}): {reason}"));
            cur = match *layer {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    padding,
                    stride,
                } => {
                    if flat {
                        return Err(bad("convolution after a fully-connected layer".into()));
                    }
                    if out_channels == 0 {
                        return Err(bad("zero output channels".into()));
                    }
                    conv_shape(cur, out_channels, kernel, padding, stride).map_err(bad)?
                }
                LayerSpec::GoConv {
                    kernel,
                    padding,
                    stride,
                    ref kinds,
                    ..
                } => {
                    if flat {
                        return Err(bad("convolution after a fully-connected layer".into()));
                    }
                    if kinds.is_empty() {
                        return Err(bad("no generator kinds".into()));
                    }
                    conv_shape(cur, kinds.len(), kernel, padding, stride).map_err(bad)?
                }
                LayerSpec::Relu | LayerSpec::Sigmoid => cur,
                LayerSpec::MaxPool2 => {
                    if flat || cur[1] < 2 || cur[2] < 2 {
                        return Err(bad(format!("cannot pool activation {cur:?}")));
                    }
                    [cur[0], cur[1] / 2, cur[2] / 2]
                }
                LayerSpec::Fc { out: k } => {
                    if k == 0 {
                        return Err(bad("zero outputs".into()));
                    }
                    flat = true;
                    [k, 1, 1]
                }
            };
            out.push(cur);
        }
        Ok(out)
    }

    pub fn output_width(&self) -> Result<usize> {
        Ok(self.shapes()?.last().map(|s| s.iter().product()).unwrap_or(0))
    }
}

fn conv_shape(cur: [usize; 3], od: usize, m: usize, padding: usize, stride: usize) -> core::result::Result<[usize; 3], String> {
    if m.is_multiple_of(2) || m == 0 {
        return Err(format!("kernel size {m} must be odd"));
    }
    let oh = conv_output_extent(cur[1], m, padding, stride);
    let ow = conv_output_extent(cur[2], m, padding, stride);
    match (oh, ow) {
        (Some(h), Some(w)) => Ok([od, h, w]),
        _ => Err(format!("kernel {m} does not fit activation {cur:?} with padding {padding}")),
    }
}

/// LeNet-scale preset for `1×28×28` digits: two 5×5 convs (32, 64 filters)
/// with relu and 2×2 max-pool, then fc 512, relu, fc `classes`.
pub fn lenet(classes: usize, seed: u64) -> NetworkConfig {
    NetworkConfig {
        layers: vec![
            LayerSpec::Conv {
                out_channels: 32,
                kernel: 5,
                padding: 2,
                stride: 1,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool2,
            LayerSpec::Conv {
                out_channels: 64,
                kernel: 5,
                padding: 2,
                stride: 1,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool2,
            LayerSpec::Fc { out: 512 },
            LayerSpec::Relu,
            LayerSpec::Fc { out: classes },
        ],
        input_shape: [1, 28, 28],
        classes,
        seed,
    }
}

/// Small three-block conv net for `3×32×32` colour images. Not a ResNet.
pub fn cifar_small(classes: usize, seed: u64) -> NetworkConfig {
    let block = |od| {
        [
            LayerSpec::Conv {
                out_channels: od,
                kernel: 3,
                padding: 1,
                stride: 1,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool2,
        ]
    };
    let mut layers: Vec<LayerSpec> = [32, 64, 128].into_iter().flat_map(block).collect();
    layers.extend([LayerSpec::Fc { out: 256 }, LayerSpec::Relu, LayerSpec::Fc { out: classes }]);
    NetworkConfig {
        layers,
        input_shape: [3, 32, 32],
        classes,
        seed,
    }
}

/// Sigmoid net: conv (m = 3, padding 1) → σ → fc `d1` → σ → fc 1 → σ.
pub fn theory_net(od: usize, d1: usize, input_shape: [usize; 3], seed: u64) -> NetworkConfig {
    NetworkConfig {
        layers: vec![
            LayerSpec::Conv {
                out_channels: od,
                kernel: 3,
                padding: 1,
                stride: 1,
            },
            LayerSpec::Sigmoid,
            LayerSpec::Fc { out: d1 },
            LayerSpec::Sigmoid,
            LayerSpec::Fc { out: 1 },
            LayerSpec::Sigmoid,
        ],
        input_shape,
        classes: 2,
        seed,
    }
}

/// First-layer width of the theory nets: enough 3×3 kernels for a full-rank patch matrix.
pub const THEORY_OD: usize = 16;
pub const THEORY_INPUT: [usize; 3] = [1, 8, 8];

/// Replace the first convolution by a GO convolution with the given mix.
pub fn to_go_variant(config: &NetworkConfig, mix: &GeneratorMix) -> Result<NetworkConfig> {
    let Some(LayerSpec::Conv {
        out_channels,
        kernel,
        padding,
        stride,
    }) = config.layers.first().cloned()
    else {
        return Err(Error::InvalidConfig("first layer must be a plain convolution".into()));
    };
    let mut out = config.clone();
    out.layers[0] = LayerSpec::GoConv {
        kernel,
        padding,
        stride,
        kinds: mix.kinds(out_channels)?,
        share_across_in_channels: false,
    };
    Ok(out)
}

/// Common net `F` (free first layer) and GO net `G` (Gabor first layer) with equal widths.
pub fn theory_pair<T: Real>(d1: usize, seed: u64) -> Result<(Model<T>, Model<T>)> {
    if d1 == 0 {
        return Err(Error::InvalidConfig("d1 must be at least 1".into()));
    }
    let f_cfg = theory_net(THEORY_OD, d1, THEORY_INPUT, seed);
    let g_cfg = to_go_variant(&f_cfg, &GeneratorMix::AllGabor)?;
    Ok((Model::build(&f_cfg)?, Model::build(&g_cfg)?))
}

#[derive(Debug, Clone)]
pub struct ConvParams<T> {
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
    pub stride: usize,
    pub padding: usize,
    input: Option<Tensor<T>>,
}

#[derive(Debug, Clone)]
pub struct FcParams<T> {
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
    input: Option<Tensor<T>>,
}

#[derive(Debug, Clone)]
pub enum Layer<T> {
    Conv(ConvParams<T>),
    GoConv(GoConvLayer<T>),
    Relu(Option<Tensor<T>>),
    Sigmoid(Option<Tensor<T>>),
    MaxPool2(Option<(Vec<usize>, Vec<usize>)>),
    Fc(FcParams<T>),
}

fn uniform_vec<T: Real, R: Rng + ?Sized>(n: usize, bound: f64, rng: &mut R) -> Vec<T> {
    (0..n).map(|_| T::from_f64_lossy(rng.random_range(-bound..bound))).collect()
}

/// Gradients in parameter-registry order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub names: Vec<String>,
    pub values: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, name: &str) -> Option<&[T]> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i].as_slice())
    }

    pub fn global_norm(&self) -> T {
        let mut acc = T::zero();
        for v in self.values.iter().flatten() {
            acc = acc + *v * *v;
        }
        acc.sqrt()
    }

    pub fn scale(&mut self, factor: T) {
        for v in self.values.iter_mut().flatten() {
            *v = *v * factor;
        }
    }
}

/// Registry entry: parameter name and tensor shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Model<T> {
    config: NetworkConfig,
    layers: Vec<Layer<T>>,
}

impl<T: Real> Model<T> {
    /// Build and initialise. Layer `i` draws from its own stream of `config.seed`,
    /// so layers after a replaced first layer initialise identically.
    pub fn build(config: &NetworkConfig) -> Result<Self> {
        let shapes = config.shapes()?;
        let mut layers = Vec::with_capacity(config.layers.len());
        let mut prev = config.input_shape;
        for (i, spec) in config.layers.iter().enumerate() {
            let mut rng = stream_rng(config.seed, streams::LAYER_BASE + i as u64);
            let layer = match *spec {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    padding,
                    stride,
                } => {
                    let fan_in = prev[0] * kernel * kernel;
                    let bound = 1.0 / libm_sqrt(fan_in as f64);
                    let w = uniform_vec(out_channels * fan_in, bound, &mut rng);
                    let b = uniform_vec(out_channels, bound, &mut rng);
                    Layer::Conv(ConvParams {
                        weight: Tensor::from_vec(&[out_channels, prev[0], kernel, kernel], w)?,
                        bias: b,
                        stride,
                        padding,
                        input: None,
                    })
                }
                LayerSpec::GoConv {
                    kernel,
                    padding,
                    stride,
                    ref kinds,
                    share_across_in_channels,
                } => Layer::GoConv(GoConvLayer::init(
                    kinds,
                    prev[0],
                    kernel,
                    stride,
                    padding,
                    share_across_in_channels,
                    &mut rng,
                )?),
                LayerSpec::Relu => Layer::Relu(None),
                LayerSpec::Sigmoid => Layer::Sigmoid(None),
                LayerSpec::MaxPool2 => Layer::MaxPool2(None),
                LayerSpec::Fc { out } => {
                    let fan_in: usize = prev.iter().product();
                    let bound = 1.0 / libm_sqrt(fan_in as f64);
                    let w = uniform_vec(out * fan_in, bound, &mut rng);
                    let b = uniform_vec(out, bound, &mut rng);
                    Layer::Fc(FcParams {
                        weight: Tensor::from_vec(&[out, fan_in], w)?,
                        bias: b,
                        input: None,
                    })
                }
            };
            layers.push(layer);
            prev = shapes[i];
        }
        Ok(Self {
            config: config.clone(),
            layers,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    /// The GO layer, when the first layer is one.
    pub fn go_layer(&self) -> Option<&GoConvLayer<T>> {
        match self.layers.first() {
            Some(Layer::GoConv(g)) => Some(g),
            _ => None,
        }
    }

    pub fn param_registry(&self) -> Vec<ParamInfo> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv(c) => {
                    out.push(ParamInfo {
                        name: format!("{i}.weight"),
                        shape: c.weight.shape().to_vec(),
                    });
                    out.push(ParamInfo {
                        name: format!("{i}.bias"),
                        shape: vec![c.bias.len()],
                    });
                }
                Layer::GoConv(g) => {
                    out.push(ParamInfo {
                        name: format!("{i}.raw"),
                        shape: vec![g.raw().len()],
                    });
                    out.push(ParamInfo {
                        name: format!("{i}.bias"),
                        shape: vec![g.bias().len()],
                    });
                }
                Layer::Fc(f) => {
                    out.push(ParamInfo {
                        name: format!("{i}.weight"),
                        shape: f.weight.shape().to_vec(),
                    });
                    out.push(ParamInfo {
                        name: format!("{i}.bias"),
                        shape: vec![f.bias.len()],
                    });
                }
                _ => {}
            }
        }
        out
    }

    /// Parameter slices in registry order.
    pub fn params(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => out.extend([c.weight.data(), c.bias.as_slice()]),
                Layer::GoConv(g) => out.extend([g.raw(), g.bias()]),
                Layer::Fc(f) => out.extend([f.weight.data(), f.bias.as_slice()]),
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(c.weight.data_mut());
                    out.push(&mut c.bias);
                }
                Layer::GoConv(g) => {
                    // Split borrow: raw and bias live in different fields.
                    let (raw, bias) = g.raw_and_bias_mut();
                    out.push(raw);
                    out.push(bias);
                }
                Layer::Fc(f) => {
                    out.push(f.weight.data_mut());
                    out.push(&mut f.bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Trainable parameters of the first layer.
    pub fn first_layer_param_count(&self) -> usize {
        match self.layers.first() {
            Some(Layer::Conv(c)) => c.weight.len() + c.bias.len(),
            Some(Layer::GoConv(g)) => g.param_count(),
            Some(Layer::Fc(f)) => f.weight.len() + f.bias.len(),
            _ => 0,
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let [_, c, h, w] = x.dims4("Model::forward")?;
        if [c, h, w] != self.config.input_shape {
            return Err(Error::ShapeMismatch {
                op: "Model::forward",
                expected: self.config.input_shape.to_vec(),
                actual: vec![c, h, w],
            });
        }
        Ok(())
    }

    /// Training forward: caches whatever backward needs.
    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = match layer {
                Layer::Conv(c) => {
                    let y = conv2d_forward(&cur, &c.weight, &c.bias, c.stride, c.padding)?;
                    c.input = Some(cur);
                    y
                }
                Layer::GoConv(g) => g.forward(&cur)?,
                Layer::Relu(cache) => {
                    let y = relu_forward(&cur);
                    *cache = Some(cur);
                    y
                }
                Layer::Sigmoid(cache) => {
                    let y = sigmoid_forward(&cur);
                    *cache = Some(y.clone());
                    y
                }
                Layer::MaxPool2(cache) => {
                    let p = maxpool2d_forward(&cur)?;
                    *cache = Some((cur.shape().to_vec(), p.argmax));
                    p.output
                }
                Layer::Fc(f) => {
                    let y = fc_forward(&cur, &f.weight, &f.bias)?;
                    f.input = Some(cur);
                    y
                }
            };
        }
        Ok(cur)
    }

    /// Cache-free forward; `stop` limits evaluation to the first `stop` layers.
    fn run(&self, x: &Tensor<T>, stop: usize) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &self.layers[..stop] {
            cur = match layer {
                Layer::Conv(c) => conv2d_forward(&cur, &c.weight, &c.bias, c.stride, c.padding)?,
                Layer::GoConv(g) => g.infer(&cur)?,
                Layer::Relu(_) => relu_forward(&cur),
                Layer::Sigmoid(_) => sigmoid_forward(&cur),
                Layer::MaxPool2(_) => maxpool2d_forward(&cur)?.output,
                Layer::Fc(f) => fc_forward(&cur, &f.weight, &f.bias)?,
            };
        }
        Ok(cur)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.run(x, self.layers.len())
    }

    /// Activations entering the last fully-connected layer, flattened to `[N, d]`.
    pub fn penultimate(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let last_fc = self
            .layers
            .iter()
            .rposition(|l| matches!(l, Layer::Fc(_)))
            .ok_or_else(|| Error::InvalidConfig("model has no fully-connected layer".into()))?;
        let y = self.run(x, last_fc)?;
        let [n, d] = y.dims2_flat();
        y.reshape(&[n, d])
    }

    pub fn penultimate_width(&self) -> Result<usize> {
        let shapes = self.config.shapes()?;
        let last_fc = self
            .layers
            .iter()
            .rposition(|l| matches!(l, Layer::Fc(_)))
            .ok_or_else(|| Error::InvalidConfig("model has no fully-connected layer".into()))?;
        Ok(if last_fc == 0 {
            self.config.input_shape.iter().product()
        } else {
            shapes[last_fc - 1].iter().product()
        })
    }

    /// Backpropagate `grad` (cotangent of the forward output).
    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Gradients<T>> {
        let mut per_layer: Vec<Vec<(String, Vec<T>)>> = Vec::with_capacity(self.layers.len());
        let mut cur = grad.clone();
        let count = self.layers.len();
        for (rev, layer) in self.layers.iter_mut().rev().enumerate() {
            let i = count - 1 - rev;
            let want_input = i > 0;
            let mut grads = Vec::new();
            cur = match layer {
                Layer::Conv(c) => {
                    let input = c.input.as_ref().ok_or(Error::MissingCache("Model::backward"))?;
                    let g = conv2d_backward(input, &c.weight, &cur, c.stride, c.padding, want_input)?;
                    grads.push((format!("{i}.weight"), g.kernels.into_vec()));
                    grads.push((format!("{i}.bias"), g.bias));
                    g.input.unwrap_or_else(|| Tensor::zeros(&[1]))
                }
                Layer::GoConv(go) => {
                    let g = go.backward(&cur, want_input)?;
                    grads.push((format!("{i}.raw"), g.raw));
                    grads.push((format!("{i}.bias"), g.bias));
                    g.input.unwrap_or_else(|| Tensor::zeros(&[1]))
                }
                Layer::Relu(cache) => {
                    let x = cache.as_ref().ok_or(Error::MissingCache("Model::backward"))?;
                    relu_backward(x, &cur)
                }
                Layer::Sigmoid(cache) => {
                    let y = cache.as_ref().ok_or(Error::MissingCache("Model::backward"))?;
                    sigmoid_backward(y, &cur)
                }
                Layer::MaxPool2(cache) => {
                    let (shape, argmax) = cache.as_ref().ok_or(Error::MissingCache("Model::backward"))?;
                    maxpool2d_backward(shape, argmax, &cur)?
                }
                Layer::Fc(f) => {
                    let input = f.input.as_ref().ok_or(Error::MissingCache("Model::backward"))?;
                    let g = fc_backward(input, &f.weight, &cur)?;
                    grads.push((format!("{i}.weight"), g.weight.into_vec()));
                    grads.push((format!("{i}.bias"), g.bias));
                    g.input
                }
            };
            per_layer.push(grads);
        }
        let (names, values) = per_layer.into_iter().rev().flatten().unzip();
        Ok(Gradients { names, values })
    }

    pub fn clear_caches(&mut self) {
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => c.input = None,
                Layer::GoConv(g) => g.clear_cache(),
                Layer::Relu(c) | Layer::Sigmoid(c) => *c = None,
                Layer::MaxPool2(c) => *c = None,
                Layer::Fc(f) => f.input = None,
            }
        }
    }

    /// Copy parameter values (registry order) into this model.
    pub fn load_params(&mut self, values: &[Vec<T>]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != values.len() {
            return Err(Error::Registry(format!(
                "model has {} parameter tensors, got {}",
                params.len(),
                values.len()
            )));
        }
        for (i, (dst, src)) in params.iter_mut().zip(values).enumerate() {
            if dst.len() != src.len() {
                return Err(Error::Registry(format!(
                    "parameter {i} holds {} values, got {}",
                    dst.len(),
                    src.len()
                )));
            }
            dst.copy_from_slice(src);
        }
        Ok(())
    }

    /// Same network with the first convolution turned into a GO layer of
    /// Free slices holding exactly the current kernels.
    pub fn with_free_first_layer(&self) -> Result<Self> {
        let Some(Layer::Conv(c)) = self.layers.first() else {
            return Err(Error::InvalidConfig("first layer must be a plain convolution".into()));
        };
        let [od, ch, m, _] = c.weight.dims4("with_free_first_layer")?;
        let specs: Vec<_> = c
            .weight
            .data()
            .chunks_exact(m * m)
            .map(|k| GeneratorSpec::free(k.to_vec(), m))
            .collect();
        let go = GoConvLayer::from_specs(&specs, od, ch, c.stride, c.padding, false, c.bias.clone())?;
        let mut config = self.config.clone();
        config.layers[0] = LayerSpec::GoConv {
            kernel: m,
            padding: c.padding,
            stride: c.stride,
            kinds: vec![GeneratorKind::Free; od],
            share_across_in_channels: false,
        };
        let mut layers = self.layers.clone();
        layers[0] = Layer::GoConv(go);
        let mut model = Self { config, layers };
        model.clear_caches();
        Ok(model)
    }
}

fn libm_sqrt(v: f64) -> f64 {
    num_traits::Float::sqrt(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lenet_shapes_and_count() {
        let cfg = lenet(10, 0);
        let shapes = cfg.shapes().unwrap();
        assert_eq!(shapes[2], [32, 14, 14]);
        assert_eq!(shapes[5], [64, 7, 7]);
        assert_eq!(*shapes.last().unwrap(), [10, 1, 1]);
        let model = Model::<f32>::build(&cfg).unwrap();
        let expected = (32 * 25 + 32) + (64 * 32 * 25 + 64) + (3136 * 512 + 512) + (512 * 10 + 10);
        assert_eq!(model.param_count(), expected);
        assert_eq!(model.first_layer_param_count(), 832);
    }

    #[test]
    fn go_variant_preserves_shapes() {
        let cfg = lenet(10, 0);
        let go = to_go_variant(&cfg, &GeneratorMix::AllGabor).unwrap();
        assert_eq!(cfg.shapes().unwrap(), go.shapes().unwrap());
        let model = Model::<f32>::build(&go).unwrap();
        assert_eq!(model.first_layer_param_count(), 192);
    }

    #[test]
    fn go_variant_needs_conv_first() {
        let mut cfg = lenet(10, 0);
        cfg.layers.insert(0, LayerSpec::Relu);
        assert!(to_go_variant(&cfg, &GeneratorMix::AllGabor).is_err());
    }

    #[test]
    fn mix_counts_checked() {
        assert!(GeneratorMix::Counts {
            gabor: 3,
            schmid: 3,
            free: 0
        }
        .kinds(7)
        .is_err());
        let k = GeneratorMix::HalfGaborHalfSchmid.kinds(5).unwrap();
        assert_eq!(k.iter().filter(|&&k| k == GeneratorKind::Gabor).count(), 2);
    }

    #[test]
    fn bad_configs_fail_at_build() {
        let mut cfg = lenet(10, 0);
        cfg.input_shape = [1, 3, 3];
        assert!(Model::<f32>::build(&cfg).is_err());
        let mut cfg = lenet(10, 0);
        cfg.layers.push(LayerSpec::MaxPool2);
        assert!(cfg.shapes().is_err());
    }

    #[test]
    fn theory_pair_widths() {
        let (f, g) = theory_pair::<f64>(4, 1).unwrap();
        let fr = f.param_registry();
        let gr = g.param_registry();
        assert_eq!(fr[1..], gr[1..]);
        assert_eq!(g.first_layer_param_count(), 5 * THEORY_OD + THEORY_OD);
        let x = Tensor::from_fn(&[3, 1, 8, 8], |i| (i as f64 * 0.13).sin());
        let y = f.infer(&x).unwrap();
        assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn registry_names_unique() {
        let m = Model::<f32>::build(&cifar_small(10, 0)).unwrap();
        let reg = m.param_registry();
        for (i, a) in reg.iter().enumerate() {
            assert!(reg[i + 1..].iter().all(|b| b.name != a.name));
        }
        assert_eq!(reg.len(), m.params().len());
    }
}

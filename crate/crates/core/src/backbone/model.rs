use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers;
use super::spec::{numel, BackboneSpec, LayerKind, Shape};
use crate::error::{Error, Result};
use crate::image::Image;

/// Output width of the embedding head.
pub const EMBEDDING_DIM: usize = 128;

/// Source tag of head outputs.
pub const HEAD_SOURCE: &str = "head128";

/// A dense feature vector and where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Descriptor {
    pub values: Vec<f32>,
    pub source: String,
}

impl Descriptor {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Parameters of one backbone layer. Pooling layers have empty buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

/// Linear map without activation, `out = W x + b`, `W` row-major `[out][in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearHead {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl LinearHead {
    /// Uniform in `[-1/sqrt(in_dim), 1/sqrt(in_dim)]`, zero bias.
    pub fn init(in_dim: usize, out_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (in_dim as f32).sqrt();
        LinearHead {
            in_dim,
            out_dim,
            weight: (0..in_dim * out_dim).map(|_| rng.random_range(-bound..=bound)).collect(),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        LinearHead {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn apply(&self, x: &[f32]) -> Vec<f32> {
        layers::dense_forward(x, &self.weight, &self.bias, false)
    }
}

/// Which parameter groups receive gradient updates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Trainable {
    #[default]
    HeadOnly,
    All,
}

/// Gradient buffers shaped like an [`EmbeddingModel`]'s parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
    pub head: LinearHead,
}

impl Gradients {
    pub fn scale(&mut self, s: f32) {
        for l in &mut self.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= s);
        }
        self.head.weight.iter_mut().chain(self.head.bias.iter_mut()).for_each(|v| *v *= s);
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(&l.bias))
            .chain(self.head.weight.iter().chain(&self.head.bias))
            .all(|v| v.is_finite())
    }
}

/// Backbone truncated at its tap layer plus the embedding head.
///
/// Only layers up to and including the tap carry parameters; deeper layers
/// of the spec exist for shape bookkeeping only.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    spec: BackboneSpec,
    tap: String,
    tap_pos: usize,
    shapes: Vec<Shape>,
    pub(crate) layers: Vec<LayerParams>,
    pub(crate) head: Option<LinearHead>,
    pub trainable: Trainable,
    /// Per-channel value subtracted from inputs before the first layer;
    /// empty disables normalization.
    pub channel_mean: Vec<f32>,
}

impl EmbeddingModel {
    /// Backbone with He-uniform conv/dense weights and zero biases, no head.
    pub fn new(spec: BackboneSpec, tap: &str, seed: u64) -> Result<Self> {
        let tap_pos = spec.tap_position(tap)?;
        let shapes = spec.shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = spec.param_shapes()?;
        let layers = params[..tap_pos]
            .iter()
            .map(|(ws, bs)| {
                let n = ws.iter().product::<usize>();
                let fan_in = if ws.is_empty() { 1 } else { n / ws[0] };
                let bound = (6.0 / fan_in as f32).sqrt();
                LayerParams {
                    weight: if ws.is_empty() {
                        vec![]
                    } else {
                        (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
                    },
                    bias: vec![0.0; bs.iter().product::<usize>() * usize::from(!bs.is_empty())],
                }
            })
            .collect();
        Ok(EmbeddingModel {
            spec,
            tap: tap.to_string(),
            tap_pos,
            shapes,
            layers,
            head: None,
            trainable: Trainable::HeadOnly,
            channel_mean: Vec::new(),
        })
    }

    /// Attach a freshly initialized 128-d head.
    pub fn with_head(mut self, seed: u64) -> Self {
        self.head = Some(LinearHead::init(self.tap_dim(), EMBEDDING_DIM, seed));
        self
    }

    pub fn set_head(&mut self, head: LinearHead) -> Result<()> {
        if head.in_dim != self.tap_dim() || head.out_dim != EMBEDDING_DIM {
            return Err(Error::ShapeMismatch {
                name: "head".into(),
                expected: vec![EMBEDDING_DIM, self.tap_dim()],
                found: vec![head.out_dim, head.in_dim],
            });
        }
        self.head = Some(head);
        Ok(())
    }

    pub fn head(&self) -> Option<&LinearHead> {
        self.head.as_ref()
    }

    pub fn spec(&self) -> &BackboneSpec {
        &self.spec
    }

    pub fn tap(&self) -> &str {
        &self.tap
    }

    pub fn tap_dim(&self) -> usize {
        numel(self.shapes[self.tap_pos])
    }

    pub fn input_shape(&self) -> Shape {
        self.spec.input
    }

    /// Parameterized layer names and their params, in layer order.
    pub fn named_layers(&self) -> impl Iterator<Item = (&str, &LayerParams)> {
        self.spec.layers[..self.tap_pos]
            .iter()
            .zip(&self.layers)
            .filter(|(_, p)| !p.weight.is_empty())
            .map(|(l, p)| (l.name.as_str(), p))
    }

    pub(crate) fn layer_param_shapes(&self) -> Vec<(String, Vec<usize>, Vec<usize>)> {
        let shapes = self.spec.param_shapes().expect("validated spec");
        self.spec.layers[..self.tap_pos]
            .iter()
            .zip(shapes)
            .filter(|(_, (w, _))| !w.is_empty())
            .map(|(l, (w, b))| (l.name.clone(), w, b))
            .collect()
    }

    /// CRC-32 over all backbone parameter bytes.
    pub fn backbone_checksum(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        for l in &self.layers {
            for v in l.weight.iter().chain(&l.bias) {
                h.update(&v.to_le_bytes());
            }
        }
        h.finalize()
    }

    fn prepare_input(&self, image: &Image) -> Result<Vec<f32>> {
        let want = self.spec.input;
        let got = [image.channels, image.height, image.width];
        if got != want {
            return Err(Error::ShapeMismatch {
                name: "input".into(),
                expected: want.to_vec(),
                found: got.to_vec(),
            });
        }
        if self.channel_mean.is_empty() {
            return Ok(image.data.clone());
        }
        if self.channel_mean.len() != image.channels {
            return Err(Error::config("channel_mean length differs from input channels"));
        }
        let plane = image.height * image.width;
        Ok(image
            .data
            .iter()
            .enumerate()
            .map(|(i, v)| v - self.channel_mean[i / plane])
            .collect())
    }

    fn layer_forward(&self, k: usize, input: &[f32]) -> Vec<f32> {
        let in_shape = self.shapes[k];
        let p = &self.layers[k];
        match self.spec.layers[k].kind {
            LayerKind::Conv { kernel, relu, .. } => layers::conv_forward(input, in_shape, &p.weight, &p.bias, kernel, relu),
            LayerKind::MaxPool { size } => layers::maxpool_forward(input, in_shape, size),
            LayerKind::Dense { relu, .. } => layers::dense_forward(input, &p.weight, &p.bias, relu),
        }
    }

    /// Post-activation output of layer `tap`, flattened channel-major then
    /// row-major. Tap `input` returns the (normalized) image itself.
    pub fn extract_features(&self, image: &Image, tap: &str) -> Result<Descriptor> {
        let pos = self.spec.tap_position(tap)?;
        if pos > self.tap_pos {
            return Err(Error::config(format!(
                "layer `{tap}` lies beyond the model tap `{}` and has no parameters",
                self.tap
            )));
        }
        let mut x = self.prepare_input(image)?;
        for k in 0..pos {
            x = self.layer_forward(k, &x);
        }
        Ok(Descriptor {
            values: x,
            source: tap.to_string(),
        })
    }

    /// Features at the model's own tap.
    pub fn tap_features(&self, image: &Image) -> Result<Descriptor> {
        self.extract_features(image, &self.tap.clone())
    }

    /// Head output for an already-extracted tap vector.
    pub fn embed_features(&self, tap_values: &[f32]) -> Result<Descriptor> {
        let head = self
            .head
            .as_ref()
            .ok_or_else(|| Error::config("embedding head is not initialized"))?;
        if tap_values.len() != head.in_dim {
            return Err(Error::ShapeMismatch {
                name: "head input".into(),
                expected: vec![head.in_dim],
                found: vec![tap_values.len()],
            });
        }
        Ok(Descriptor {
            values: head.apply(tap_values),
            source: HEAD_SOURCE.into(),
        })
    }

    /// 128-d embedding: head applied to the tap features, no activation.
    pub fn embed(&self, image: &Image) -> Result<Descriptor> {
        if self.head.is_none() {
            return Err(Error::config("embedding head is not initialized"));
        }
        let f = self.tap_features(image)?;
        self.embed_features(&f.values)
    }

    /// Activations `[input, after layer 1, ..., tap]` for backpropagation.
    pub fn forward_cached(&self, image: &Image) -> Result<Vec<Vec<f32>>> {
        let mut acts = Vec::with_capacity(self.tap_pos + 1);
        acts.push(self.prepare_input(image)?);
        for k in 0..self.tap_pos {
            let next = self.layer_forward(k, &acts[k]);
            acts.push(next);
        }
        Ok(acts)
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    weight: vec![0.0; l.weight.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            head: match &self.head {
                Some(h) => LinearHead::zeros(h.in_dim, h.out_dim),
                None => LinearHead::zeros(0, 0),
            },
        }
    }

    /// Accumulate head gradients for one sample given `d loss / d embedding`;
    /// returns `d loss / d tap`.
    pub fn head_backward(&self, tap_values: &[f32], grad_embedding: &[f32], grads: &mut Gradients) -> Vec<f32> {
        let head = self.head.as_ref().expect("head initialized");
        let out = vec![0.0; head.out_dim];
        layers::dense_backward(
            tap_values,
            &head.weight,
            false,
            &out,
            grad_embedding,
            &mut grads.head.weight,
            &mut grads.head.bias,
            true,
        )
        .expect("requested")
    }

    /// Backpropagate `d loss / d tap` through the cached activations.
    pub fn backbone_backward(&self, acts: &[Vec<f32>], grad_tap: Vec<f32>, grads: &mut Gradients) {
        let mut g = grad_tap;
        for k in (0..self.tap_pos).rev() {
            let in_shape = self.shapes[k];
            let p = &self.layers[k];
            let gp = &mut grads.layers[k];
            let want_input = k > 0;
            let next = match self.spec.layers[k].kind {
                LayerKind::Conv { kernel, relu, .. } => layers::conv_backward(
                    &acts[k],
                    in_shape,
                    &p.weight,
                    kernel,
                    relu,
                    &acts[k + 1],
                    &g,
                    &mut gp.weight,
                    &mut gp.bias,
                    want_input,
                ),
                LayerKind::MaxPool { size } => {
                    want_input.then(|| layers::maxpool_backward(&acts[k], in_shape, size, &g))
                }
                LayerKind::Dense { relu, .. } => layers::dense_backward(
                    &acts[k],
                    &p.weight,
                    relu,
                    &acts[k + 1],
                    &g,
                    &mut gp.weight,
                    &mut gp.bias,
                    want_input,
                ),
            };
            match next {
                Some(n) => g = n,
                None => break,
            }
        }
    }

    /// `param -= lr * grad` over the trainable groups.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f32) {
        if let Some(h) = self.head.as_mut() {
            for (p, g) in h.weight.iter_mut().zip(&grads.head.weight) {
                *p -= lr * g;
            }
            for (p, g) in h.bias.iter_mut().zip(&grads.head.bias) {
                *p -= lr * g;
            }
        }
        if self.trainable == Trainable::All {
            for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
                for (p, d) in l.weight.iter_mut().zip(&g.weight) {
                    *p -= lr * d;
                }
                for (p, d) in l.bias.iter_mut().zip(&g.bias) {
                    *p -= lr * d;
                }
            }
        }
    }
}

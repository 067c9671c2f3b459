//! Layer taxonomy and shape propagation, independent of any weights.

use crate::error::{Error, Result};

/// Tap name for the raw (unprocessed) input tensor.
pub const INPUT_TAP: &str = "input";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerKind {
    /// Square `kernel x kernel` convolution, stride 1, zero "same" padding,
    /// optionally followed by ReLU.
    Conv { out_channels: usize, kernel: usize, relu: bool },
    /// Non-overlapping max pooling, window and stride `size`.
    MaxPool { size: usize },
    /// Fully connected over the flattened input.
    Dense { out_features: usize, relu: bool },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn conv(name: &str, out_channels: usize) -> Self {
        LayerSpec {
            name: name.into(),
            kind: LayerKind::Conv {
                out_channels,
                kernel: 3,
                relu: true,
            },
        }
    }

    pub fn pool(name: &str) -> Self {
        LayerSpec {
            name: name.into(),
            kind: LayerKind::MaxPool { size: 2 },
        }
    }

    pub fn dense(name: &str, out_features: usize, relu: bool) -> Self {
        LayerSpec {
            name: name.into(),
            kind: LayerKind::Dense { out_features, relu },
        }
    }
}

/// Activation shape `(channels, height, width)`. Dense outputs are `(n, 1, 1)`.
pub type Shape = [usize; 3];

pub fn numel(s: Shape) -> usize {
    s[0] * s[1] * s[2]
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BackboneSpec {
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

impl BackboneSpec {
    pub fn new(input: Shape, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = BackboneSpec { input, layers };
        spec.shapes()?;
        let mut names: Vec<&str> = spec.layers.iter().map(|l| l.name.as_str()).collect();
        names.push(INPUT_TAP);
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("backbone layer names must be unique and not `input`"));
        }
        Ok(spec)
    }

    /// VGG-16 with its conventional layer names, for a `channels x height x width` input.
    pub fn vgg16(input: Shape) -> Result<Self> {
        let mut layers = Vec::new();
        let blocks: [(usize, usize); 5] = [(2, 64), (2, 128), (3, 256), (3, 512), (3, 512)];
        for (b, &(convs, width)) in blocks.iter().enumerate() {
            for c in 0..convs {
                layers.push(LayerSpec::conv(&format!("conv{}_{}", b + 1, c + 1), width));
            }
            layers.push(LayerSpec::pool(&format!("pool{}", b + 1)));
        }
        layers.push(LayerSpec::dense("fc6", 4096, true));
        layers.push(LayerSpec::dense("fc7", 4096, true));
        layers.push(LayerSpec::dense("fc8", 1000, false));
        BackboneSpec::new(input, layers)
    }

    /// Reduced VGG-style stack: four conv3x3 + max-pool blocks, so that the
    /// `pool4` tap exists at desk scale.
    pub fn desk(input: Shape, widths: [usize; 4]) -> Result<Self> {
        let mut layers = Vec::new();
        for (b, &w) in widths.iter().enumerate() {
            layers.push(LayerSpec::conv(&format!("conv{}", b + 1), w));
            layers.push(LayerSpec::pool(&format!("pool{}", b + 1)));
        }
        BackboneSpec::new(input, layers)
    }

    /// Shape after each layer; element 0 is the input.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let mut shapes = vec![self.input];
        let mut cur = self.input;
        if numel(cur) == 0 {
            return Err(Error::config("backbone input has zero size"));
        }
        for l in &self.layers {
            cur = match l.kind {
                LayerKind::Conv { out_channels, kernel, .. } => {
                    if kernel % 2 == 0 || out_channels == 0 {
                        return Err(Error::config(format!("layer {}: kernel must be odd", l.name)));
                    }
                    [out_channels, cur[1], cur[2]]
                }
                LayerKind::MaxPool { size } => {
                    if size == 0 || cur[1] < size || cur[2] < size {
                        return Err(Error::config(format!(
                            "layer {}: cannot pool {}x{} by {size}",
                            l.name, cur[1], cur[2]
                        )));
                    }
                    [cur[0], cur[1] / size, cur[2] / size]
                }
                LayerKind::Dense { out_features, .. } => [out_features, 1, 1],
            };
            shapes.push(cur);
        }
        Ok(shapes)
    }

    /// Position in `shapes()` of the named tap (0 = input).
    pub fn tap_position(&self, tap: &str) -> Result<usize> {
        if tap == INPUT_TAP {
            return Ok(0);
        }
        self.layers
            .iter()
            .position(|l| l.name == tap)
            .map(|p| p + 1)
            .ok_or_else(|| Error::UnknownLayer(tap.into()))
    }

    pub fn output_shape(&self, tap: &str) -> Result<Shape> {
        let pos = self.tap_position(tap)?;
        Ok(self.shapes()?[pos])
    }

    /// Flattened activation count at `tap`.
    pub fn tap_dim(&self, tap: &str) -> Result<usize> {
        self.output_shape(tap).map(numel)
    }

    /// Parameter tensor shapes per layer: `(weight, bias)`; empty for pooling.
    pub fn param_shapes(&self) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
        let shapes = self.shapes()?;
        Ok(self
            .layers
            .iter()
            .zip(&shapes)
            .map(|(l, &inp)| match l.kind {
                LayerKind::Conv { out_channels, kernel, .. } => {
                    (vec![out_channels, inp[0], kernel, kernel], vec![out_channels])
                }
                LayerKind::MaxPool { .. } => (vec![], vec![]),
                LayerKind::Dense { out_features, .. } => (vec![out_features, numel(inp)], vec![out_features]),
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vgg16_pool4_dimension() {
        let spec = BackboneSpec::vgg16([3, 224, 224]).unwrap();
        assert_eq!(spec.output_shape("pool4").unwrap(), [512, 14, 14]);
        assert_eq!(spec.tap_dim("pool4").unwrap(), 100_352);
        assert_eq!(spec.tap_dim("pool5").unwrap(), 25_088);
        assert_eq!(spec.tap_dim("fc6").unwrap(), 4096);
        assert_eq!(spec.tap_dim("conv1_1").unwrap(), 64 * 224 * 224);
    }

    #[test]
    fn unknown_tap() {
        let spec = BackboneSpec::desk([3, 32, 48], [8, 16, 32, 32]).unwrap();
        assert!(matches!(spec.tap_dim("pool9"), Err(Error::UnknownLayer(_))));
        assert_eq!(spec.tap_dim("pool4").unwrap(), 32 * 2 * 3);
        assert_eq!(spec.tap_dim(INPUT_TAP).unwrap(), 3 * 32 * 48);
    }

    #[test]
    fn rejects_overpooling_and_duplicates() {
        assert!(BackboneSpec::desk([1, 8, 8], [1, 1, 1, 1]).is_err());
        let dup = vec![LayerSpec::pool("p"), LayerSpec::pool("p")];
        assert!(BackboneSpec::new([1, 8, 8], dup).is_err());
    }
}

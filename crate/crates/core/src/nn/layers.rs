use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{init::orthogonal, Graph, NnError, ParamId, ParamStore, Tensor, Var};

/// Dense affine layer with weight `[out, in]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, gain: f64, rng: &mut impl Rng) -> Self {
        let w = Tensor::new(&[outputs, inputs], orthogonal(outputs, inputs, gain, rng)).expect("shape");
        let weight = store.add(format!("{name}.weight"), w);
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[outputs]));
        Self { weight, bias, inputs, outputs }
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Result<Var, NnError> {
        let (w, b) = (g.param(self.weight), g.param(self.bias));
        g.linear(x, w, b)
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }
}

/// Square-kernel valid convolution with weight `[out, in, k, k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub stride: usize,
}

impl Conv2d {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        spec: ConvLayerSpec,
        gain: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = in_channels * spec.kernel * spec.kernel;
        let w = orthogonal(spec.out_channels, fan_in, gain, rng);
        let w = Tensor::new(&[spec.out_channels, in_channels, spec.kernel, spec.kernel], w).expect("shape");
        let weight = store.add(format!("{name}.weight"), w);
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[spec.out_channels]));
        Self { weight, bias, stride: spec.stride }
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Result<Var, NnError> {
        let (w, b) = (g.param(self.weight), g.param(self.bias));
        g.conv2d(x, w, b, self.stride)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvLayerSpec {
    pub const fn new(out_channels: usize, kernel: usize, stride: usize) -> Self {
        Self { out_channels, kernel, stride }
    }
}

/// Three convolutions followed by a dense projection, all ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub conv: [ConvLayerSpec; 3],
    pub latent_dim: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub input_channels: usize,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self {
            conv: [ConvLayerSpec::new(32, 8, 4), ConvLayerSpec::new(64, 4, 2), ConvLayerSpec::new(64, 3, 1)],
            latent_dim: 128,
            input_height: 84,
            input_width: 84,
            input_channels: 3,
        }
    }
}

impl EncoderSpec {
    /// Spatial size and channels after each convolution.
    pub fn feature_shapes(&self) -> Result<[(usize, usize, usize); 3], NnError> {
        let (mut h, mut w) = (self.input_height, self.input_width);
        let mut out = [(0, 0, 0); 3];
        for (i, c) in self.conv.iter().enumerate() {
            if c.out_channels == 0 || c.kernel == 0 || c.stride == 0 || h < c.kernel || w < c.kernel {
                return Err(NnError::InvalidSpec(format!("conv layer {} does not fit a {h}x{w} input", i + 1)));
            }
            h = (h - c.kernel) / c.stride + 1;
            w = (w - c.kernel) / c.stride + 1;
            out[i] = (c.out_channels, h, w);
        }
        Ok(out)
    }

    pub fn flat_features(&self) -> Result<usize, NnError> {
        let (c, h, w) = self.feature_shapes()?[2];
        Ok(c * h * w)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.latent_dim == 0 {
            return Err(NnError::InvalidSpec("latent_dim must be positive".into()));
        }
        if self.input_channels == 0 {
            return Err(NnError::InvalidSpec("input_channels must be positive".into()));
        }
        self.feature_shapes().map(|_| ())
    }

    pub fn input_len(&self) -> usize {
        self.input_height * self.input_width * self.input_channels
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoder {
    pub spec: EncoderSpec,
    pub prefix: String,
    pub conv: [Conv2d; 3],
    pub head: Linear,
}

impl Encoder {
    pub fn new(store: &mut ParamStore, prefix: &str, spec: EncoderSpec, rng: &mut impl Rng) -> Result<Self, NnError> {
        spec.validate()?;
        let gain = std::f64::consts::SQRT_2;
        let mut in_c = spec.input_channels;
        let mut conv = Vec::with_capacity(3);
        for (i, c) in spec.conv.iter().enumerate() {
            conv.push(Conv2d::new(store, &format!("{prefix}.conv{i}"), in_c, *c, gain, rng));
            in_c = c.out_channels;
        }
        let head = Linear::new(store, &format!("{prefix}.head"), spec.flat_features()?, spec.latent_dim, gain, rng);
        Ok(Self { spec, prefix: prefix.to_string(), conv: [conv[0], conv[1], conv[2]], head })
    }

    /// `x [n, c, h, w]` -> `[n, latent_dim]`.
    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Result<Var, NnError> {
        let n = g.shape(x).first().copied().unwrap_or(0);
        let mut h = x;
        for c in &self.conv {
            let y = c.forward(g, h)?;
            h = g.relu(y);
        }
        let flat = g.reshape(h, &[n, self.spec.flat_features()?])?;
        let z = self.head.forward(g, flat)?;
        Ok(g.relu(z))
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut v: Vec<ParamId> = self.conv.iter().flat_map(|c| [c.weight, c.bias]).collect();
        v.extend(self.head.params());
        v
    }
}

/// Packs HWC byte images into an `[n, c, h, w]` tensor scaled to `[0, 1]`.
pub fn pixels_to_tensor<P: AsRef<[u8]>>(images: &[P], height: usize, width: usize, channels: usize) -> Result<Tensor, NnError> {
    let plane = height * width;
    let mut data = vec![0.0; images.len() * channels * plane];
    for (n, img) in images.iter().enumerate() {
        let img = img.as_ref();
        if img.len() != plane * channels {
            return Err(NnError::Shape { op: "pixels", left: vec![height, width, channels], right: vec![img.len()] });
        }
        let dst = &mut data[n * channels * plane..(n + 1) * channels * plane];
        for (p, px) in img.chunks_exact(channels).enumerate() {
            for (c, v) in px.iter().enumerate() {
                dst[c * plane + p] = *v as f64 / 255.0;
            }
        }
    }
    Tensor::new(&[images.len(), channels, height, width], data)
}

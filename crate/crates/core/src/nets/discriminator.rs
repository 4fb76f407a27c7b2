//! Convolutional real/fake classifier.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Result};
use crate::ndauto::{Tape, Tensor, Var};
use crate::scalar::Scalar;

use super::store::{Bound, WeightStore};
use super::{conv, init_params, ParamSpec};

pub const DISCRIMINATOR_CONV_LAYERS: usize = 8;
pub const LEAKY_SLOPE: f64 = 0.2;

/// The dense layer's width depends on the flattened feature size, so the
/// input size is part of the architecture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscriminatorSpec {
    pub base_channels: usize,
    pub conv_layers: usize,
    pub dense_width: usize,
    pub input_height: usize,
    pub input_width: usize,
}

impl Default for DiscriminatorSpec {
    fn default() -> Self {
        Self { base_channels: 64, conv_layers: DISCRIMINATOR_CONV_LAYERS, dense_width: 256, input_height: 64, input_width: 64 }
    }
}

impl DiscriminatorSpec {
    pub fn toy() -> Self {
        Self { base_channels: 16, dense_width: 64, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_layers != DISCRIMINATOR_CONV_LAYERS {
            return arg_err("DiscriminatorSpec", format!("conv_layers must be 8, got {}", self.conv_layers));
        }
        if self.base_channels == 0 || self.dense_width == 0 {
            return arg_err("DiscriminatorSpec", "base_channels and dense_width must be positive");
        }
        check_hw(self.input_height, self.input_width)
    }

    /// `(out_channels, stride)` of each conv layer.
    pub fn schedule(&self) -> Vec<(usize, usize)> {
        (0..self.conv_layers)
            .map(|i| (self.base_channels << (i / 2), if i % 2 == 0 { 1 } else { 2 }))
            .collect()
    }

    pub fn flatten_len(&self) -> usize {
        let last = self.base_channels << ((self.conv_layers - 1) / 2);
        last * (self.input_height / 16) * (self.input_width / 16)
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let mut out = Vec::new();
        let mut cin = 1;
        for (i, (c, _)) in self.schedule().into_iter().enumerate() {
            out.extend(ParamSpec::conv(&format!("disc.conv{i}"), c, cin, 3, 2.0));
            cin = c;
        }
        out.extend(ParamSpec::dense("disc.fc1", self.dense_width, self.flatten_len(), 2.0));
        out.extend(ParamSpec::dense("disc.fc2", 1, self.dense_width, 1.0));
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_specs().iter().map(ParamSpec::len).sum()
    }

    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> Result<WeightStore<T>> {
        self.validate()?;
        init_params(&self.param_specs(), rng)
    }

    pub fn check_weights<T: Scalar>(&self, w: &WeightStore<T>) -> Result<()> {
        let specs = self.param_specs();
        w.check_shapes(specs.iter().map(|p| (p.name.as_str(), p.dims.as_slice())))
    }
}

fn check_hw(h: usize, w: usize) -> Result<()> {
    if !h.is_multiple_of(16) || !w.is_multiple_of(16) || h < 32 || w < 32 {
        return shape_err(
            "discriminator",
            format!("spatial dims must be multiples of 16 and at least 32, got {h}x{w}"),
        );
    }
    Ok(())
}

/// Per-sample probability that the input is a clean image, `[N, 1]`.
pub fn discriminator_forward<T: Scalar>(
    spec: &DiscriminatorSpec,
    tape: &mut Tape<T>,
    weights: &Bound,
    img: Var,
) -> Result<Var> {
    let d = tape.dims(img).to_vec();
    if d.len() != 4 || d[1] != 1 {
        return shape_err("discriminator", format!("expected [N,1,H,W], got {d:?}"));
    }
    check_hw(d[2], d[3])?;
    if (d[2], d[3]) != (spec.input_height, spec.input_width) {
        return shape_err(
            "discriminator",
            format!("built for {}x{} inputs, got {}x{}", spec.input_height, spec.input_width, d[2], d[3]),
        );
    }
    let slope = T::lit(LEAKY_SLOPE);
    let mut x = img;
    for (i, (_, stride)) in spec.schedule().into_iter().enumerate() {
        x = conv(tape, weights, &format!("disc.conv{i}"), x, stride)?;
        x = tape.leaky_relu(x, slope)?;
    }
    let flat = tape.flatten(x)?;
    let h = tape.affine(flat, weights.get("disc.fc1.weight")?, weights.get("disc.fc1.bias")?)?;
    let h = tape.leaky_relu(h, slope)?;
    let logit = tape.affine(h, weights.get("disc.fc2.weight")?, weights.get("disc.fc2.bias")?)?;
    tape.sigmoid(logit)
}

pub fn discriminate<T: Scalar>(spec: &DiscriminatorSpec, weights: &WeightStore<T>, img: &Tensor<T>) -> Result<Tensor<T>> {
    spec.check_weights(weights)?;
    let mut tape = Tape::new();
    let w = weights.bind(&mut tape, false);
    let x = tape.constant(img.clone());
    let y = discriminator_forward(spec, &mut tape, &w, x)?;
    Ok(tape.value(y).clone())
}

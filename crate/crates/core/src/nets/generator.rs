//! Dense U-Net generator.
//!
//! ```text
//! x ─ stem 7x7/2 ─ maxpool 3/2 ─ D1 ─ T1 ─ D2 ─ T2 ─ D3 ─ T3 ─ D4
//!      │                         │         │         │         │
//!      s0                        s1        s2        s3        up ─ conv ─ ⊕s3 ─ conv
//!                                                             up ─ conv ─ ⊕s2 ─ conv
//!                                                             ... ⊕s1, ⊕s0, ⊕x
//!                                                             head 1x1 ─ sigmoid
//! ```
//!
//! Dense layers are 3x3 conv + ReLU, each seeing the concatenation of the
//! block input and every earlier layer's output. Transitions are 1x1 conv +
//! ReLU down to `floor(compression · C)` channels, then 2x2 average pooling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Result};
use crate::ndauto::{PoolKind, Tape, Tensor, Var};
use crate::scalar::Scalar;

use super::store::{Bound, WeightStore};
use super::{conv, init_params, ParamSpec};

/// Overall downsampling factor of the encoder.
pub const GENERATOR_MULTIPLE: usize = 32;
pub const DENSE_BLOCKS: usize = 4;
pub const DECODER_STAGES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorSpec {
    pub growth_rate: usize,
    pub layers_per_block: usize,
    pub stem_channels: usize,
    pub compression: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self { growth_rate: 16, layers_per_block: 4, stem_channels: 32, compression: 0.5 }
    }
}

/// Channel bookkeeping derived from a [`GeneratorSpec`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorPlan {
    /// Input channels of each dense block.
    pub block_in: [usize; DENSE_BLOCKS],
    /// Output channels of each dense block.
    pub block_out: [usize; DENSE_BLOCKS],
    /// Output channels of each transition.
    pub transition_out: [usize; DENSE_BLOCKS - 1],
    /// Skip channels per decoder stage, deepest first; the last is the input image.
    pub skip: [usize; DECODER_STAGES],
    /// Output channels per decoder stage.
    pub decoder_out: [usize; DECODER_STAGES],
}

impl GeneratorSpec {
    pub fn toy() -> Self {
        Self { growth_rate: 8, layers_per_block: 2, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.growth_rate == 0 || self.layers_per_block == 0 || self.stem_channels == 0 {
            return arg_err("GeneratorSpec", "growth_rate, layers_per_block and stem_channels must be positive");
        }
        if !(self.compression > 0.0 && self.compression <= 1.0) {
            return arg_err("GeneratorSpec", format!("compression must lie in (0, 1], got {}", self.compression));
        }
        Ok(())
    }

    pub fn plan(&self) -> GeneratorPlan {
        let grow = self.layers_per_block * self.growth_rate;
        let mut block_in = [0; DENSE_BLOCKS];
        let mut block_out = [0; DENSE_BLOCKS];
        let mut transition_out = [0; DENSE_BLOCKS - 1];
        let mut c = self.stem_channels;
        for b in 0..DENSE_BLOCKS {
            block_in[b] = c;
            block_out[b] = c + grow;
            if b < DENSE_BLOCKS - 1 {
                transition_out[b] = ((self.compression * block_out[b] as f64).floor() as usize).max(1);
                c = transition_out[b];
            }
        }
        let skip = [block_out[2], block_out[1], block_out[0], self.stem_channels, 1];
        let decoder_out = [block_out[2], block_out[1], block_out[0], self.stem_channels, (self.stem_channels / 2).max(1)];
        GeneratorPlan { block_in, block_out, transition_out, skip, decoder_out }
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let p = self.plan();
        let mut out = Vec::new();
        out.extend(ParamSpec::conv("gen.stem", self.stem_channels, 1, 7, 2.0));
        for b in 0..DENSE_BLOCKS {
            for l in 0..self.layers_per_block {
                let cin = p.block_in[b] + l * self.growth_rate;
                out.extend(ParamSpec::conv(&format!("gen.block{b}.layer{l}"), self.growth_rate, cin, 3, 2.0));
            }
            if b < DENSE_BLOCKS - 1 {
                out.extend(ParamSpec::conv(&format!("gen.trans{b}"), p.transition_out[b], p.block_out[b], 1, 2.0));
            }
        }
        let mut c = p.block_out[DENSE_BLOCKS - 1];
        for s in 0..DECODER_STAGES {
            let d = p.decoder_out[s];
            out.extend(ParamSpec::conv(&format!("gen.dec{s}.up"), d, c, 3, 2.0));
            out.extend(ParamSpec::conv(&format!("gen.dec{s}.fuse"), d, d + p.skip[s], 3, 2.0));
            c = d;
        }
        out.extend(ParamSpec::conv("gen.head", 1, c, 1, 1.0));
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

fn check_input(dims: &[usize]) -> Result<()> {
    if dims.len() != 4 || dims[1] != 1 {
        return shape_err("generator", format!("expected [N,1,H,W], got {dims:?}"));
    }
    let (h, w) = (dims[2], dims[3]);
    if h % GENERATOR_MULTIPLE != 0 || w % GENERATOR_MULTIPLE != 0 {
        return shape_err(
            "generator",
            format!("spatial dims must be multiples of {GENERATOR_MULTIPLE}, got {h}x{w}"),
        );
    }
    Ok(())
}

fn dense_block<T: Scalar>(tape: &mut Tape<T>, w: &Bound, b: usize, layers: usize, x: Var) -> Result<Var> {
    let mut feats = x;
    for l in 0..layers {
        let y = conv(tape, w, &format!("gen.block{b}.layer{l}"), feats, 1)?;
        let y = tape.relu(y)?;
        feats = tape.concat_channels(&[feats, y])?;
    }
    Ok(feats)
}

/// Records the generator on `tape`. `weights` must be bound from a store
/// that passed [`GeneratorSpec::check_weights`].
pub fn generator_forward<T: Scalar>(spec: &GeneratorSpec, tape: &mut Tape<T>, weights: &Bound, img: Var) -> Result<Var> {
    check_input(tape.dims(img))?;
    let stem = conv(tape, weights, "gen.stem", img, 2)?;
    let stem = tape.relu(stem)?;
    let mut x = tape.pool2d(stem, PoolKind::Max, 3, 2)?;

    let mut skips = vec![stem];
    for b in 0..DENSE_BLOCKS {
        x = dense_block(tape, weights, b, spec.layers_per_block, x)?;
        if b < DENSE_BLOCKS - 1 {
            skips.push(x);
            let t = conv(tape, weights, &format!("gen.trans{b}"), x, 1)?;
            let t = tape.relu(t)?;
            x = tape.pool2d(t, PoolKind::Avg, 2, 2)?;
        }
    }
    // deepest skip first, input image last
    skips.reverse();
    skips.push(img);

    for (s, &skip) in skips.iter().enumerate() {
        let u = tape.upsample_bilinear2x(x)?;
        let u = conv(tape, weights, &format!("gen.dec{s}.up"), u, 1)?;
        let u = tape.relu(u)?;
        let cat = tape.concat_channels(&[u, skip])?;
        let f = conv(tape, weights, &format!("gen.dec{s}.fuse"), cat, 1)?;
        x = tape.relu(f)?;
    }
    let head = conv(tape, weights, "gen.head", x, 1)?;
    tape.sigmoid(head)
}

/// Inference-only forward pass.
pub fn generate<T: Scalar>(spec: &GeneratorSpec, weights: &WeightStore<T>, img: &Tensor<T>) -> Result<Tensor<T>> {
    spec.check_weights(weights)?;
    check_input(img.dims())?;
    let mut tape = Tape::new();
    let w = weights.bind(&mut tape, false);
    let x = tape.constant(img.clone());
    let y = generator_forward(spec, &mut tape, &w, x)?;
    Ok(tape.value(y).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_block_channel_growth() {
        let p = GeneratorSpec::default().plan();
        assert_eq!(p.block_in[0], 32);
        assert_eq!(p.block_out, [96, 112, 120, 124]);
        assert_eq!(p.transition_out, [48, 56, 60]);
    }

    #[test]
    fn toy_plan() {
        let p = GeneratorSpec::toy().plan();
        assert_eq!(p.block_out, [48, 40, 36, 34]);
        assert_eq!(p.skip, [36, 40, 48, 32, 1]);
        assert_eq!(p.decoder_out, [36, 40, 48, 32, 16]);
    }

    #[test]
    fn shape_preserving_and_open_range() {
        let spec = GeneratorSpec { growth_rate: 4, layers_per_block: 1, stem_channels: 8, compression: 0.5 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w: WeightStore<f32> = spec.init(&mut rng).unwrap();
        for (h, wd) in [(32, 32), (64, 96), (128, 32)] {
            let x = Tensor::uniform(&[1, 1, h, wd], 0.0, 1.0, &mut rng);
            let y = generate(&spec, &w, &x).unwrap();
            assert_eq!(y.dims(), &[1, 1, h, wd]);
            assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn rejects_bad_dims() {
        let spec = GeneratorSpec { growth_rate: 4, layers_per_block: 1, stem_channels: 8, compression: 0.5 };
        let w: WeightStore<f32> = spec.init(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let err = generate(&spec, &w, &Tensor::zeros(&[1, 1, 48, 48])).unwrap_err();
        assert!(err.to_string().contains("spatial dims must be multiples of 32"), "{err}");
    }

    #[test]
    fn mismatched_weights() {
        let w: WeightStore<f32> = GeneratorSpec::toy().init(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let err = generate(&GeneratorSpec::default(), &w, &Tensor::zeros(&[1, 1, 32, 32])).unwrap_err();
        assert!(err.to_string().contains("gen.block0.layer0.weight"), "{err}");
    }

    #[test]
    fn invalid_spec() {
        let bad = GeneratorSpec { compression: 1.5, ..GeneratorSpec::default() };
        assert!(bad.validate().is_err());
        assert!(GeneratorSpec { growth_rate: 0, ..GeneratorSpec::default() }.validate().is_err());
    }
}

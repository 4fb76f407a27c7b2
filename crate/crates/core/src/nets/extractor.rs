//! Fixed convolutional feature extractor for the content loss.
//!
//! A stack of 3x3 conv + ReLU over the grayscale input replicated to three
//! channels. Layers 2 and 4 (1-based) have stride 2. Weights come from a
//! seeded He-normal draw or from a MOCO file and are never trained.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Result};
use crate::ndauto::{Tape, Tensor, Var};
use crate::scalar::Scalar;

use super::store::{Bound, WeightStore};
use super::{conv, init_params, ParamSpec};

pub const EXTRACTOR_INPUT_CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExtractorSource {
    SeededRandom { seed: u64 },
    Loaded { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractorSpec {
    pub depth: usize,
    pub channels: usize,
    pub source: ExtractorSource,
}

impl Default for ExtractorSpec {
    fn default() -> Self {
        Self { depth: 5, channels: 32, source: ExtractorSource::SeededRandom { seed: 0x5EED } }
    }
}

impl ExtractorSpec {
    pub fn toy() -> Self {
        Self { depth: 3, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.channels == 0 {
            return arg_err("ExtractorSpec", "depth and channels must be positive");
        }
        Ok(())
    }

    /// Stride of layer `i` (0-based).
    pub fn stride(i: usize) -> usize {
        if i == 1 || i == 3 {
            2
        } else {
            1
        }
    }

    /// Total downsampling factor.
    pub fn reduction(&self) -> usize {
        (0..self.depth).map(Self::stride).product()
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let mut out = Vec::new();
        let mut cin = EXTRACTOR_INPUT_CHANNELS;
        for i in 0..self.depth {
            out.extend(ParamSpec::conv(&format!("ext.conv{i}"), self.channels, cin, 3, 2.0));
            cin = self.channels;
        }
        out
    }

    pub fn check_weights<T: Scalar>(&self, w: &WeightStore<T>) -> Result<()> {
        let specs = self.param_specs();
        w.check_shapes(specs.iter().map(|p| (p.name.as_str(), p.dims.as_slice())))
    }

    /// Materializes the weights from the configured source.
    pub fn build<T: Scalar>(&self) -> Result<WeightStore<T>> {
        self.validate()?;
        let store = match &self.source {
            ExtractorSource::SeededRandom { seed } => {
                init_params(&self.param_specs(), &mut ChaCha8Rng::seed_from_u64(*seed))?
            }
            ExtractorSource::Loaded { path } => WeightStore::<f32>::load(path)?.cast(),
        };
        self.check_weights(&store)?;
        Ok(store)
    }
}

/// Features of `img` (`[N, 1, H, W]`) as `[N, channels, H / r, W / r]`.
///
/// Bind the weights with `requires_grad = false`: gradients then reach
/// `img` but the extractor itself never receives any.
pub fn extract_features<T: Scalar>(spec: &ExtractorSpec, tape: &mut Tape<T>, weights: &Bound, img: Var) -> Result<Var> {
    let d = tape.dims(img).to_vec();
    if d.len() != 4 || d[1] != 1 {
        return shape_err("extractor", format!("expected [N,1,H,W], got {d:?}"));
    }
    if !d[2].is_multiple_of(4) || !d[3].is_multiple_of(4) {
        return shape_err("extractor", format!("spatial dims must be multiples of 4, got {}x{}", d[2], d[3]));
    }
    let mut x = tape.concat_channels(&[img; EXTRACTOR_INPUT_CHANNELS])?;
    for i in 0..spec.depth {
        x = conv(tape, weights, &format!("ext.conv{i}"), x, ExtractorSpec::stride(i))?;
        x = tape.relu(x)?;
    }
    Ok(x)
}

pub fn features<T: Scalar>(spec: &ExtractorSpec, weights: &WeightStore<T>, img: &Tensor<T>) -> Result<Tensor<T>> {
    spec.check_weights(weights)?;
    let mut tape = Tape::new();
    let w = weights.bind(&mut tape, false);
    let x = tape.constant(img.clone());
    let y = extract_features(spec, &mut tape, &w, x)?;
    Ok(tape.value(y).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = Tensor::<f64>::uniform(&[2, 1, 16, 20], 0.0, 1.0, &mut rng);
        for (depth, r) in [(1, 1), (2, 2), (3, 2), (4, 4), (5, 4)] {
            let spec = ExtractorSpec { depth, channels: 4, ..ExtractorSpec::default() };
            assert_eq!(spec.reduction(), r);
            let f = features(&spec, &spec.build().unwrap(), &img).unwrap();
            assert_eq!(f.dims(), &[2, 4, 16 / r, 20 / r]);
        }
    }

    #[test]
    fn replicated_planes_identical() {
        let mut tape = Tape::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = tape.constant(Tensor::uniform(&[1, 1, 4, 4], 0.0, 1.0, &mut rng));
        let rgb = tape.concat_channels(&[x; 3]).unwrap();
        let v = tape.value(rgb).data();
        assert_eq!(&v[0..16], &v[16..32]);
        assert_eq!(&v[0..16], &v[32..48]);
    }

    #[test]
    fn seeded_source_is_deterministic() {
        let spec = ExtractorSpec::toy();
        let a: WeightStore<f32> = spec.build().unwrap();
        assert_eq!(a, spec.build().unwrap());
        let other = ExtractorSpec { source: ExtractorSource::SeededRandom { seed: 1 }, ..spec };
        assert_ne!(a, other.build().unwrap());
    }

    #[test]
    fn frozen_weights_pass_gradient_through() {
        let spec = ExtractorSpec { depth: 2, channels: 3, ..ExtractorSpec::default() };
        let store: WeightStore<f64> = spec.build().unwrap();
        let mut tape = Tape::new();
        let w = store.bind(&mut tape, false);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = tape.param(Tensor::uniform(&[1, 1, 8, 8], 0.0, 1.0, &mut rng));
        let f = extract_features(&spec, &mut tape, &w, x).unwrap();
        let l = tape.sum(f).unwrap();
        tape.backward(l).unwrap();
        assert!(tape.grad(x).unwrap().l2_norm() > 0.0);
        for (_, v) in w.iter() {
            assert!(tape.grad(v).is_none());
        }
    }

    #[test]
    fn loaded_source_round_trip() {
        let dir = std::env::temp_dir().join(format!("moco-ext-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ext.moco");
        let spec = ExtractorSpec::toy();
        let w: WeightStore<f32> = spec.build().unwrap();
        w.save(&path).unwrap();
        let loaded = ExtractorSpec { source: ExtractorSource::Loaded { path: path.clone() }, ..spec };
        assert_eq!(loaded.build::<f32>().unwrap(), w);
        let wrong = ExtractorSpec { channels: 8, ..loaded };
        assert!(wrong.build::<f32>().is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn rejects_bad_dims() {
        let spec = ExtractorSpec::toy();
        let w: WeightStore<f32> = spec.build().unwrap();
        assert!(features(&spec, &w, &Tensor::zeros(&[1, 1, 10, 12])).is_err());
    }
}

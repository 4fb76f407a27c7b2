//! Generator, discriminator and feature extractor, with their weights.
//!
//! Parameters are named `<net>.<layer>.weight` / `<net>.<layer>.bias`.
//! Conv kernels are `[out, in, k, k]`, dense weights `[out, in]`.

mod discriminator;
mod extractor;
mod generator;
mod store;

use rand::Rng;

use crate::error::Result;
use crate::ndauto::{Padding, Tape, Tensor, Var};
use crate::scalar::Scalar;

pub use discriminator::{discriminate, discriminator_forward, DiscriminatorSpec, DISCRIMINATOR_CONV_LAYERS, LEAKY_SLOPE};
pub use extractor::{extract_features, features, ExtractorSource, ExtractorSpec};
pub use generator::{generate, generator_forward, GeneratorPlan, GeneratorSpec, GENERATOR_MULTIPLE};
pub use store::{Bound, WeightStore, MOCO_MAGIC, MOCO_VERSION};

/// Name, shape and init scale of one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub dims: Vec<usize>,
    /// Normal init std; zero for biases.
    pub std: f64,
}

impl ParamSpec {
    /// Kernel and bias of a `k x k` conv. `gain` is the variance gain (2 for ReLU).
    pub fn conv(prefix: &str, cout: usize, cin: usize, k: usize, gain: f64) -> [ParamSpec; 2] {
        let fan_in = (cin * k * k) as f64;
        [
            ParamSpec { name: format!("{prefix}.weight"), dims: vec![cout, cin, k, k], std: (gain / fan_in).sqrt() },
            ParamSpec { name: format!("{prefix}.bias"), dims: vec![cout], std: 0.0 },
        ]
    }

    pub fn dense(prefix: &str, out: usize, inp: usize, gain: f64) -> [ParamSpec; 2] {
        [
            ParamSpec { name: format!("{prefix}.weight"), dims: vec![out, inp], std: (gain / inp as f64).sqrt() },
            ParamSpec { name: format!("{prefix}.bias"), dims: vec![out], std: 0.0 },
        ]
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) fn init_params<T: Scalar, R: Rng + ?Sized>(specs: &[ParamSpec], rng: &mut R) -> Result<WeightStore<T>> {
    let mut store = WeightStore::new();
    for p in specs {
        let t = if p.std == 0.0 { Tensor::zeros(&p.dims) } else { Tensor::randn(&p.dims, p.std, rng) };
        store.insert(p.name.clone(), t)?;
    }
    Ok(store)
}

/// Same-padded conv with the `prefix.weight` kernel and `prefix.bias`.
pub(crate) fn conv<T: Scalar>(tape: &mut Tape<T>, w: &Bound, prefix: &str, x: Var, stride: usize) -> Result<Var> {
    let k = w.get(&format!("{prefix}.weight"))?;
    let b = w.get(&format!("{prefix}.bias"))?;
    tape.conv2d(x, k, Some(b), stride, Padding::SameZero)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counted by hand from the toy channel plan, layer by layer.
    #[test]
    fn toy_generator_param_count() {
        let conv = |cout: usize, cin: usize, k: usize| cout * cin * k * k + cout;
        let mut want = conv(32, 1, 7);
        // block0: 32 -> 40 -> 48, trans 48 -> 24
        want += conv(8, 32, 3) + conv(8, 40, 3) + conv(24, 48, 1);
        // block1: 24 -> 32 -> 40, trans 40 -> 20
        want += conv(8, 24, 3) + conv(8, 32, 3) + conv(20, 40, 1);
        // block2: 20 -> 28 -> 36, trans 36 -> 18
        want += conv(8, 20, 3) + conv(8, 28, 3) + conv(18, 36, 1);
        // block3: 18 -> 26 -> 34
        want += conv(8, 18, 3) + conv(8, 26, 3);
        // decoder (in, out, skip)
        for (cin, cout, skip) in [(34, 36, 36), (36, 40, 40), (40, 48, 48), (48, 32, 32), (32, 16, 1)] {
            want += conv(cout, cin, 3) + conv(cout, cout + skip, 3);
        }
        want += conv(1, 16, 1);
        assert_eq!(want, 194_695);
        assert_eq!(GeneratorSpec::toy().param_count(), want);
    }

    #[test]
    fn toy_discriminator_and_extractor_counts() {
        // 16,16,32,32,64,64,128,128 then 128*4*4 -> 64 -> 1
        assert_eq!(DiscriminatorSpec::toy().param_count(), 424_433);
        // 3 -> 32 -> 32 -> 32
        assert_eq!(ExtractorSpec::toy().param_specs().iter().map(ParamSpec::len).sum::<usize>(), 19_392);
    }
}

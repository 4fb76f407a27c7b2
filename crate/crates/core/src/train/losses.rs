use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Error, Result};
use crate::ndauto::{Tape, Var};
use crate::scalar::Scalar;

/// Probabilities are clamped to `[LOG_CLAMP, 1 - LOG_CLAMP]` before `log`.
pub const LOG_CLAMP: f64 = 1e-7;
/// Weight of the adversarial term in the perceptual loss.
pub const ADVERSARIAL_WEIGHT: f64 = 1e-3;

/// Realized losses of one training step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub content: f64,
    pub adversarial: f64,
    pub perceptual: f64,
    pub discriminator: f64,
}

impl LossBreakdown {
    pub fn new(content: f64, adversarial: f64, discriminator: f64) -> Result<Self> {
        Ok(Self { content, adversarial, perceptual: perceptual_loss(content, adversarial)?, discriminator })
    }

    /// Relative deviation of `perceptual` from `content + 1e-3 · adversarial`.
    pub fn identity_error(&self) -> f64 {
        let want = self.content + ADVERSARIAL_WEIGHT * self.adversarial;
        (self.perceptual - want).abs() / want.abs().max(f64::MIN_POSITIVE)
    }
}

/// `content + 1e-3 · adversarial`.
pub fn perceptual_loss(content: f64, adversarial: f64) -> Result<f64> {
    if !content.is_finite() || !adversarial.is_finite() {
        return arg_err("perceptual_loss", format!("non-finite input ({content}, {adversarial})"));
    }
    Ok(content + ADVERSARIAL_WEIGHT * adversarial)
}

/// Squared feature distance summed over channels and pixels, divided by
/// `Hf · Wf` and averaged over the batch.
pub fn content_loss<T: Scalar>(tape: &mut Tape<T>, feat_real: Var, feat_gen: Var) -> Result<Var> {
    let d = tape.dims(feat_gen).to_vec();
    if d.len() != 4 {
        return shape_err("content_loss", format!("expected [N,C,Hf,Wf], got {d:?}"));
    }
    if tape.dims(feat_real) != d.as_slice() {
        return shape_err("content_loss", format!("features {:?} vs {:?}", tape.dims(feat_real), d));
    }
    let diff = tape.sub(feat_gen, feat_real)?;
    let sq = tape.square(diff)?;
    let s = tape.sum(sq)?;
    tape.scale(s, T::one() / T::from_usize_lossy(d[0] * d[2] * d[3]))
}

fn check_probabilities<T: Scalar>(tape: &Tape<T>, v: Var, op: &'static str) -> Result<()> {
    let d = tape.dims(v);
    if d.len() != 2 || d[1] != 1 {
        return shape_err(op, format!("expected [N,1], got {d:?}"));
    }
    debug_assert!(
        tape.value(v).data().iter().all(|&p| p > T::zero() && p < T::one()),
        "{op}: probabilities outside (0, 1)"
    );
    Ok(())
}

/// `-Σ log p` with `p` clamped away from 0 and 1.
fn neg_log_sum<T: Scalar>(tape: &mut Tape<T>, p: Var) -> Result<Var> {
    let c = tape.clamp(p, T::lit(LOG_CLAMP), T::lit(1.0 - LOG_CLAMP))?;
    let l = tape.log(c)?;
    let s = tape.sum(l)?;
    tape.scale(s, -T::one())
}

/// Generator's adversarial term: `-Σ log D(G(x))`.
pub fn adversarial_loss<T: Scalar>(tape: &mut Tape<T>, d_out: Var) -> Result<Var> {
    check_probabilities(tape, d_out, "adversarial_loss")?;
    neg_log_sum(tape, d_out)
}

/// Binary cross-entropy: `-Σ log D(y) - Σ log(1 - D(G(x)))`.
pub fn discriminator_loss<T: Scalar>(tape: &mut Tape<T>, d_real: Var, d_fake: Var) -> Result<Var> {
    check_probabilities(tape, d_real, "discriminator_loss")?;
    check_probabilities(tape, d_fake, "discriminator_loss")?;
    let real = neg_log_sum(tape, d_real)?;
    let flipped = tape.scale_shift(d_fake, -T::one(), T::one())?;
    let fake = neg_log_sum(tape, flipped)?;
    tape.add(real, fake)
}

/// Scalar value of a loss node as `f64`, rejecting non-finite values.
pub(crate) fn loss_value<T: Scalar>(tape: &Tape<T>, v: Var, step: u64, loss: &'static str) -> Result<f64> {
    let x = tape.value(v).item().map(|x| x.as_f64()).unwrap_or(f64::NAN);
    if !x.is_finite() {
        return Err(Error::NonFiniteLoss { step, loss });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndauto::{grad_check, Tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn content_examples() {
        let mut tape = Tape::<f64>::new();
        let a = tape.constant(Tensor::full(&[1, 1, 2, 2], 0.3));
        let b = tape.constant(Tensor::full(&[1, 1, 2, 2], 0.4));
        let l = content_loss(&mut tape, a, b).unwrap();
        assert!((tape.value(l).item().unwrap() - 0.01).abs() < 1e-15);
        let z = content_loss(&mut tape, a, a).unwrap();
        assert_eq!(tape.value(z).item().unwrap(), 0.0);
        let c = tape.constant(Tensor::zeros(&[1, 2, 2, 2]));
        assert!(content_loss(&mut tape, a, c).is_err());
    }

    #[test]
    fn content_normalization_batch_and_channels() {
        // N=2, C=3, 2x2, diff 1 everywhere: 24 / (2 * 4) = 3
        let mut tape = Tape::<f64>::new();
        let a = tape.constant(Tensor::zeros(&[2, 3, 2, 2]));
        let b = tape.constant(Tensor::full(&[2, 3, 2, 2], 1.0));
        let l = content_loss(&mut tape, a, b).unwrap();
        assert_eq!(tape.value(l).item().unwrap(), 3.0);
    }

    #[test]
    fn adversarial_examples() {
        let mut tape = Tape::<f64>::new();
        let half = tape.constant(Tensor::full(&[4, 1], 0.5));
        let l = adversarial_loss(&mut tape, half).unwrap();
        assert!((tape.value(l).item().unwrap() - 4.0 * std::f64::consts::LN_2).abs() < 1e-12);

        let near_one = tape.constant(Tensor::full(&[3, 1], 1.0 - 1e-12));
        let l = adversarial_loss(&mut tape, near_one).unwrap();
        let want = -3.0 * (1.0 - LOG_CLAMP).ln();
        assert!((tape.value(l).item().unwrap() - want).abs() < 1e-18);
    }

    #[test]
    fn discriminator_examples() {
        let mut tape = Tape::<f64>::new();
        let r = tape.constant(Tensor::full(&[1, 1], 0.5));
        let f = tape.constant(Tensor::full(&[1, 1], 0.5));
        let l = discriminator_loss(&mut tape, r, f).unwrap();
        assert!((tape.value(l).item().unwrap() - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);

        let r = tape.constant(Tensor::full(&[2, 1], 1.0 - 1e-9));
        let f = tape.constant(Tensor::full(&[2, 1], 1e-9));
        let l = discriminator_loss(&mut tape, r, f).unwrap();
        assert!(tape.value(l).item().unwrap() < 1e-6);
    }

    #[test]
    fn perceptual_examples() {
        assert!((perceptual_loss(0.01, 0.5).unwrap() - 0.0105).abs() < 1e-15);
        assert_eq!(perceptual_loss(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(perceptual_loss(0.37, 0.0).unwrap(), 0.37);
        assert!(perceptual_loss(f64::NAN, 0.0).is_err());
        let b = LossBreakdown::new(0.25, 3.5, 1.0).unwrap();
        assert!(b.identity_error() <= 1e-12);
    }

    #[test]
    fn gradients() {
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let real = Tensor::<f64>::randn(&[2, 3, 2, 2], 1.0, &mut rng);
            let gen = Tensor::<f64>::randn(&[2, 3, 2, 2], 1.0, &mut rng);
            let r = grad_check(&[gen], |t, v| {
                let fr = t.constant(real.clone());
                content_loss(t, fr, v[0])
            }, 1e-4);
            assert!(r.passed(), "{r:?}");

            let p = Tensor::<f64>::uniform(&[4, 1], 0.05, 0.95, &mut rng);
            let q = Tensor::<f64>::uniform(&[4, 1], 0.05, 0.95, &mut rng);
            let r = grad_check(std::slice::from_ref(&p), |t, v| adversarial_loss(t, v[0]), 1e-4);
            assert!(r.passed(), "{r:?}");
            let r = grad_check(&[p, q], |t, v| discriminator_loss(t, v[0], v[1]), 1e-4);
            assert!(r.passed(), "{r:?}");
        }
    }
}

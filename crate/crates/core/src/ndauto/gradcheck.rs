//! Central finite-difference verification of tape gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{Tape, Tensor, Var};

/// Per-leaf outcome of a gradient check.
#[derive(Debug, Clone)]
pub struct LeafReport {
    pub leaf: usize,
    /// `max|analytic - numeric| / max(max|analytic|, max|numeric|, floor)`
    /// over the checked coordinates.
    pub max_rel_error: f64,
    pub checked: usize,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub leaves: Vec<LeafReport>,
    /// Set when the graph could not be evaluated, e.g. an op produced a
    /// non-finite value.
    pub failure: Option<String>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.leaves.iter().all(|l| l.max_rel_error <= self.tolerance)
    }

    pub fn worst(&self) -> f64 {
        self.leaves.iter().map(|l| l.max_rel_error).fold(0.0, f64::max)
    }
}

/// Finite-difference settings.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub step: f64,
    /// Check at most this many randomly chosen coordinates per leaf.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self { step: 1e-5, max_coords: None, seed: 0 }
    }
}

impl GradCheck {
    /// Compares reverse-mode gradients of `build`'s scalar output against
    /// central differences, in 64-bit.
    pub fn run<F>(&self, leaves: &[Tensor<f64>], build: F, tolerance: f64) -> GradCheckReport
    where
        F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
    {
        let fail = |msg: String| GradCheckReport { tolerance, leaves: vec![], failure: Some(msg) };
        let eval = |values: &[Tensor<f64>]| -> Result<f64> {
            let mut tape = Tape::new();
            tape.set_check_finite(true);
            let vars: Vec<Var> = values.iter().map(|t| tape.constant(t.clone())).collect();
            let loss = build(&mut tape, &vars)?;
            tape.value(loss)
                .item()
                .ok_or_else(|| Error::Backward("loss is not a scalar".into()))
        };

        let mut tape = Tape::new();
        tape.set_check_finite(true);
        let vars: Vec<Var> = leaves.iter().map(|t| tape.param(t.clone())).collect();
        let loss = match build(&mut tape, &vars) {
            Ok(l) => l,
            Err(e) => return fail(describe(&e)),
        };
        let loss_value = tape.value(loss).item().unwrap_or(f64::NAN);
        if let Err(e) = tape.backward(loss) {
            return fail(describe(&e));
        }
        let analytic: Vec<Tensor<f64>> = vars.iter().map(|&v| tape.grad(v).cloned().expect("param grad")).collect();
        if let Some(i) = analytic.iter().position(|g| !g.is_finite()) {
            return fail(format!("non-finite analytic gradient for leaf {i}"));
        }

        let floor = 1e-7 * loss_value.abs().max(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut reports = Vec::with_capacity(leaves.len());
        let mut probe: Vec<Tensor<f64>> = leaves.to_vec();
        for (li, leaf) in leaves.iter().enumerate() {
            let coords: Vec<usize> = match self.max_coords {
                Some(k) if k < leaf.len() => sample(&mut rng, leaf.len(), k).into_vec(),
                _ => (0..leaf.len()).collect(),
            };
            let a = analytic[li].data();
            let mut max_diff = 0.0f64;
            let mut scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for &i in &coords {
                let orig = leaf.data()[i];
                probe[li].data_mut()[i] = orig + self.step;
                let plus = eval(&probe);
                probe[li].data_mut()[i] = orig - self.step;
                let minus = eval(&probe);
                probe[li].data_mut()[i] = orig;
                let (plus, minus) = match (plus, minus) {
                    (Ok(p), Ok(m)) => (p, m),
                    (Err(e), _) | (_, Err(e)) => return fail(describe(&e)),
                };
                let numeric = (plus - minus) / (2.0 * self.step);
                scale = scale.max(numeric.abs());
                max_diff = max_diff.max((a[i] - numeric).abs());
            }
            reports.push(LeafReport {
                leaf: li,
                max_rel_error: max_diff / scale.max(floor),
                checked: coords.len(),
            });
        }
        GradCheckReport { tolerance, leaves: reports, failure: None }
    }
}

/// [`GradCheck::run`] with default settings.
pub fn grad_check<F>(leaves: &[Tensor<f64>], build: F, tolerance: f64) -> GradCheckReport
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    GradCheck::default().run(leaves, build, tolerance)
}

fn describe(e: &Error) -> String {
    match e {
        Error::NonFinite { op } => format!("non-finite value in op `{op}`"),
        other => other.to_string(),
    }
}

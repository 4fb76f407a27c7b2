use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Result};
use crate::image::{batch_tensor, Image2D};
use crate::kspace::MotionRanges;
use crate::ndauto::{Tape, Var};
use crate::nets::{
    discriminator_forward, extract_features, generate, generator_forward, Bound, DiscriminatorSpec, ExtractorSpec,
    GeneratorSpec, WeightStore,
};
use crate::scalar::Scalar;

use super::adam::{AdamConfig, AdamState};
use super::losses::{adversarial_loss, content_loss, discriminator_loss, loss_value, LossBreakdown, ADVERSARIAL_WEIGHT};

// ChaCha stream ids, so each consumer of the run seed is independent
const STREAM_GENERATOR: u64 = 1;
const STREAM_DISCRIMINATOR: u64 = 2;
const STREAM_SAMPLER: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_steps: u64,
    pub seed: u64,
    pub flip_probability: f64,
    /// Checkpoint period in steps; 0 keeps only the initial and final ones.
    pub checkpoint_every: u64,
    pub adam: AdamConfig,
    pub generator: GeneratorSpec,
    pub discriminator: DiscriminatorSpec,
    pub extractor: ExtractorSpec,
    /// Ranges the training pairs were simulated from; recorded with checkpoints.
    pub motion: MotionRanges,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 5,
            max_steps: 2000,
            seed: 0,
            flip_probability: 0.5,
            checkpoint_every: 500,
            adam: AdamConfig::default(),
            generator: GeneratorSpec::default(),
            discriminator: DiscriminatorSpec::default(),
            extractor: ExtractorSpec::default(),
            motion: MotionRanges::default(),
        }
    }
}

impl TrainConfig {
    /// Small networks for 64x64 CPU runs.
    pub fn toy() -> Self {
        Self {
            generator: GeneratorSpec::toy(),
            discriminator: DiscriminatorSpec::toy(),
            extractor: ExtractorSpec::toy(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return arg_err("TrainConfig", "batch_size must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return arg_err("TrainConfig", format!("flip_probability must lie in [0, 1], got {}", self.flip_probability));
        }
        self.adam.validate()?;
        self.generator.validate()?;
        self.discriminator.validate()?;
        self.extractor.validate()?;
        self.motion.validate()
    }
}

/// Mirrors both images of a pair together with probability `p`.
/// Returns whether the flip happened.
pub fn augment<T: Scalar, R: Rng + ?Sized>(
    pair: (&Image2D<T>, &Image2D<T>),
    p: f64,
    rng: &mut R,
) -> (Image2D<T>, Image2D<T>, bool) {
    if rng.gen_bool(p) {
        (pair.0.flip_horizontal(), pair.1.flip_horizontal(), true)
    } else {
        (pair.0.clone(), pair.1.clone(), false)
    }
}

/// Training pairs, `(corrupted, clean)`.
#[derive(Debug, Clone, Default)]
pub struct PairSet<T> {
    pub corrupted: Vec<Image2D<T>>,
    pub clean: Vec<Image2D<T>>,
}

impl<T: Scalar> PairSet<T> {
    pub fn new(corrupted: Vec<Image2D<T>>, clean: Vec<Image2D<T>>) -> Result<Self> {
        if corrupted.len() != clean.len() || corrupted.is_empty() {
            return arg_err("PairSet", format!("{} corrupted vs {} clean images", corrupted.len(), clean.len()));
        }
        for (a, b) in corrupted.iter().zip(&clean) {
            a.same_dims(b, "PairSet")?;
            a.same_dims(&corrupted[0], "PairSet")?;
        }
        Ok(Self { corrupted, clean })
    }

    pub fn len(&self) -> usize {
        self.clean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clean.is_empty()
    }
}

/// Serializable trainer position, written next to checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub step: u64,
    pub config: TrainConfig,
    pub rng_seed: u64,
    pub rng_stream: u64,
    /// ChaCha word position as a decimal string (it is a u128).
    pub rng_word_pos: String,
    pub adam_steps: u64,
}

/// One GAN training session: generator, discriminator, frozen extractor
/// and their optimizers. Single-threaded and deterministic in the seed.
pub struct Trainer<T: Scalar> {
    config: TrainConfig,
    generator: WeightStore<T>,
    discriminator: WeightStore<T>,
    extractor: WeightStore<T>,
    adam_g: AdamState<T>,
    adam_d: AdamState<T>,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    step: u64,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn grads_of<T: Scalar>(tape: &Tape<T>, bound: &Bound) -> Result<WeightStore<T>> {
    let mut out = WeightStore::new();
    for (name, v) in bound.iter() {
        if let Some(g) = tape.grad(v) {
            out.insert(name, g.clone())?;
        }
    }
    Ok(out)
}

impl<T: Scalar> Trainer<T> {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let generator = config.generator.init(&mut stream(config.seed, STREAM_GENERATOR))?;
        let discriminator = config.discriminator.init(&mut stream(config.seed, STREAM_DISCRIMINATOR))?;
        let extractor = config.extractor.build()?;
        Ok(Self {
            adam_g: AdamState::new(config.adam),
            adam_d: AdamState::new(config.adam),
            rng: stream(config.seed, STREAM_SAMPLER),
            order: Vec::new(),
            cursor: 0,
            step: 0,
            config,
            generator,
            discriminator,
            extractor,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn generator(&self) -> &WeightStore<T> {
        &self.generator
    }

    pub fn discriminator(&self) -> &WeightStore<T> {
        &self.discriminator
    }

    pub fn extractor(&self) -> &WeightStore<T> {
        &self.extractor
    }

    pub fn checkpoint_meta(&self) -> CheckpointMeta {
        CheckpointMeta {
            step: self.step,
            config: self.config.clone(),
            rng_seed: self.config.seed,
            rng_stream: self.rng.get_stream(),
            rng_word_pos: self.rng.get_word_pos().to_string(),
            adam_steps: self.adam_g.t,
        }
    }

    /// Indices of the next batch; reshuffles at each epoch boundary.
    pub fn next_batch(&mut self, dataset_len: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.config.batch_size);
        while out.len() < self.config.batch_size {
            if self.cursor >= self.order.len() || self.order.len() != dataset_len {
                self.order = (0..dataset_len).collect();
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }

    /// Samples a batch from `data` and runs [`train_step`](Self::train_step).
    pub fn step_on(&mut self, data: &PairSet<T>) -> Result<LossBreakdown> {
        let idx = self.next_batch(data.len());
        let batch: Vec<(&Image2D<T>, &Image2D<T>)> = idx.iter().map(|&i| (&data.corrupted[i], &data.clean[i])).collect();
        self.train_step(&batch)
    }

    /// One discriminator update followed by one generator update on
    /// `(corrupted, clean)` pairs. Pairs are flip-augmented first.
    pub fn train_step(&mut self, batch: &[(&Image2D<T>, &Image2D<T>)]) -> Result<LossBreakdown> {
        if batch.len() != self.config.batch_size {
            return shape_err(
                "train_step",
                format!("batch has {} pairs, config expects {}", batch.len(), self.config.batch_size),
            );
        }
        let step = self.step;
        let mut inputs = Vec::with_capacity(batch.len());
        let mut targets = Vec::with_capacity(batch.len());
        for &(x, y) in batch {
            let (x, y, _) = augment((x, y), self.config.flip_probability, &mut self.rng);
            inputs.push(x);
            targets.push(y);
        }
        let x = batch_tensor::<T, T>(&inputs.iter().collect::<Vec<_>>())?;
        let y = batch_tensor::<T, T>(&targets.iter().collect::<Vec<_>>())?;

        // generator forward, kept for its own update below
        let mut g_tape = Tape::new();
        let g_params = self.generator.bind(&mut g_tape, true);
        let x_var = g_tape.constant(x);
        let fake = generator_forward(&self.config.generator, &mut g_tape, &g_params, x_var)?;

        // discriminator step on a detached copy of the fakes
        let d_loss = {
            let mut tape = Tape::new();
            let d_params = self.discriminator.bind(&mut tape, true);
            let real = tape.constant(y.clone());
            let fake_d = tape.constant(g_tape.value(fake).clone());
            let d_real = discriminator_forward(&self.config.discriminator, &mut tape, &d_params, real)?;
            let d_fake = discriminator_forward(&self.config.discriminator, &mut tape, &d_params, fake_d)?;
            let loss = discriminator_loss(&mut tape, d_real, d_fake)?;
            let value = loss_value(&tape, loss, step, "discriminator")?;
            tape.backward(loss)?;
            let grads = grads_of(&tape, &d_params)?;
            self.adam_d.step(&mut self.discriminator, &grads)?;
            value
        };

        // generator step through the updated, frozen discriminator and extractor
        let d_frozen = self.discriminator.bind(&mut g_tape, false);
        let e_frozen = self.extractor.bind(&mut g_tape, false);
        let y_var = g_tape.constant(y);
        let feat_real = extract_features(&self.config.extractor, &mut g_tape, &e_frozen, y_var)?;
        let feat_fake = extract_features(&self.config.extractor, &mut g_tape, &e_frozen, fake)?;
        let content = content_loss(&mut g_tape, feat_real, feat_fake)?;
        let d_out = discriminator_forward(&self.config.discriminator, &mut g_tape, &d_frozen, fake)?;
        let adversarial = adversarial_loss(&mut g_tape, d_out)?;
        let weighted = g_tape.scale(adversarial, T::lit(ADVERSARIAL_WEIGHT))?;
        let perceptual: Var = g_tape.add(content, weighted)?;
        let c = loss_value(&g_tape, content, step, "content")?;
        let a = loss_value(&g_tape, adversarial, step, "adversarial")?;
        loss_value(&g_tape, perceptual, step, "perceptual")?;
        g_tape.backward(perceptual)?;
        let grads = grads_of(&g_tape, &g_params)?;
        self.adam_g.step(&mut self.generator, &grads)?;

        self.step += 1;
        LossBreakdown::new(c, a, d_loss)
    }

    /// Corrects a batch `[N, 1, H, W]` with the current generator.
    pub fn correct(&self, images: &[&Image2D<T>]) -> Result<Vec<Image2D<T>>> {
        let x = batch_tensor::<T, T>(images)?;
        let y = generate(&self.config.generator, &self.generator, &x)?;
        crate::image::unbatch(&y)
    }
}

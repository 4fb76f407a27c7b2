use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use moco_core::kspace::{corrupt_kspace, MotionRanges};
use moco_core::metrics::{evaluate_pair, MetricReport};
use moco_core::nets::{generate, WeightStore};
use moco_core::phantom::{Phantom, PhantomConfig};
use moco_core::train::{CheckpointMeta, LossBreakdown, PairSet, Trainer};
use moco_core::{Image32, Tensor32};

use crate::config::RunConfig;
use crate::image_io::{is_image, read_image, write_mraw, write_pgm};
use crate::manifest::{DatasetManifest, ManifestRecord};
use crate::report::render_csv;

pub const LOSSES_HEADER: &str = "step,content,adversarial,perceptual,discriminator";

/// Image files in `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_image(p))
        .collect();
    out.sort();
    Ok(out)
}

/// `name.tag.ext` -> `("name", Some("tag"))`, `name.ext` -> `("name", None)`.
pub fn split_name(path: &Path) -> (String, Option<String>) {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    match stem.rsplit_once('.') {
        Some((name, tag)) => (name.to_string(), Some(tag.to_string())),
        None => (stem.to_string(), None),
    }
}

/// Files in `dir` keyed by stem, keeping only those carrying `tag` when given.
fn by_stem(dir: &Path, tag: Option<&str>) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for p in list_images(dir)? {
        let key = match tag {
            Some(t) => match split_name(&p) {
                (name, Some(found)) if found == t => name,
                _ => continue,
            },
            None => p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string(),
        };
        out.insert(key, p);
    }
    Ok(out)
}

pub struct SimulateArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    pub ranges: MotionRanges,
    pub seed: u64,
}

/// Writes `<stem>.clean.mraw`, `<stem>.corrupt.mraw` per input and the manifest.
pub fn simulate(args: &SimulateArgs) -> Result<DatasetManifest> {
    args.ranges.validate()?;
    let inputs = list_images(&args.input)?;
    if inputs.is_empty() {
        bail!("no .mraw or .pgm images in {}", args.input.display());
    }
    fs::create_dir_all(&args.output)?;
    let mut manifest = DatasetManifest::new(args.seed);
    for (i, path) in inputs.iter().enumerate() {
        let index = i as u64;
        let seed = args.seed ^ index;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let motion = args.ranges.draw(seed);
        let pair = read_image(path)
            .map_err(anyhow::Error::from)
            .and_then(|img| corrupt_kspace(&img.cast::<f64>(), &motion).map_err(anyhow::Error::from));
        let pair = match pair {
            Ok(p) => p,
            Err(e) => {
                eprintln!("warning: skipping {}: {e:#}", path.display());
                continue;
            }
        };
        let clean = format!("{stem}.clean.mraw");
        let corrupt = format!("{stem}.corrupt.mraw");
        write_mraw(args.output.join(&clean), &pair.clean_roundtrip.cast())?;
        write_mraw(args.output.join(&corrupt), &pair.corrupted.cast())?;
        manifest.records.push(ManifestRecord {
            index,
            source: path.display().to_string(),
            stem,
            seed,
            motion,
            clean,
            corrupt,
        });
    }
    if manifest.records.is_empty() {
        bail!("every input image failed");
    }
    manifest.write(&args.output)?;
    Ok(manifest)
}

fn checkpoint_name(step: u64) -> String {
    format!("checkpoint_{step:06}")
}

/// Writes generator and discriminator weights in one MOCO file plus a JSON sidecar.
fn save_checkpoint(dir: &Path, trainer: &Trainer<f32>) -> Result<PathBuf> {
    let name = checkpoint_name(trainer.step_count());
    let mut store = WeightStore::<f32>::new();
    for (k, v) in trainer.generator().iter().chain(trainer.discriminator().iter()) {
        store.insert(k, v.clone())?;
    }
    let path = dir.join(format!("{name}.moco"));
    store.save(&path)?;
    let meta = serde_json::to_string_pretty(&trainer.checkpoint_meta())? + "\n";
    fs::write(dir.join(format!("{name}.json")), meta)?;
    Ok(path)
}

/// Shortest round-trip decimal, so the log reproduces the `f64` exactly.
fn losses_row(step: u64, l: &LossBreakdown) -> String {
    format!("{step},{},{},{},{}\n", l.content, l.adversarial, l.perceptual, l.discriminator)
}

/// Trains per `cfg`; returns the final checkpoint path.
pub fn train(cfg: &RunConfig) -> Result<PathBuf> {
    let manifest = DatasetManifest::load(&cfg.data)?;
    let (mut corrupted, mut clean) = (Vec::new(), Vec::new());
    for (c, k) in manifest.paths(&cfg.data) {
        corrupted.push(read_image(&c).with_context(|| c.display().to_string())?);
        clean.push(read_image(&k).with_context(|| k.display().to_string())?);
    }
    let data = PairSet::new(corrupted, clean)?;
    fs::create_dir_all(&cfg.output)?;
    let mut trainer = Trainer::<f32>::new(cfg.train.clone())?;
    let mut log = fs::File::create(cfg.output.join("losses.csv"))?;
    writeln!(log, "{LOSSES_HEADER}")?;
    let mut last = save_checkpoint(&cfg.output, &trainer)?;
    let every = cfg.train.checkpoint_every;
    for _ in 0..cfg.train.max_steps {
        let losses = trainer.step_on(&data)?;
        let step = trainer.step_count();
        log.write_all(losses_row(step, &losses).as_bytes())?;
        if (every > 0 && step % every == 0) || step == cfg.train.max_steps {
            log.flush()?;
            last = save_checkpoint(&cfg.output, &trainer)?;
            eprintln!(
                "step {step}: content {:.6} adversarial {:.4} discriminator {:.4}",
                losses.content, losses.adversarial, losses.discriminator
            );
        }
    }
    log.flush()?;
    Ok(last)
}

pub struct InferArgs {
    pub weights: PathBuf,
    pub input: PathBuf,
    pub output: PathBuf,
    /// Only read `<stem>.<tag>.*` files.
    pub tag: Option<String>,
}

/// Loads the sidecar JSON written next to a checkpoint.
pub fn load_meta(weights: &Path) -> Result<CheckpointMeta> {
    let side = weights.with_extension("json");
    let text = fs::read_to_string(&side).with_context(|| format!("reading checkpoint sidecar {}", side.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", side.display()))
}

/// Writes `<stem>.corrected.mraw` per input image; returns the count.
pub fn infer(args: &InferArgs) -> Result<usize> {
    let meta = load_meta(&args.weights)?;
    let spec = meta.config.generator;
    let weights = WeightStore::<f32>::load(&args.weights).with_context(|| args.weights.display().to_string())?;
    spec.check_weights(&weights)?;
    let inputs = by_stem(&args.input, args.tag.as_deref())?;
    if inputs.is_empty() {
        bail!("no input images in {}", args.input.display());
    }
    fs::create_dir_all(&args.output)?;
    let mut written = 0;
    for (stem, path) in &inputs {
        let result = read_image(path).map_err(anyhow::Error::from).and_then(|img| {
            let (h, w) = img.dims();
            let x = Tensor32::new(&[1, 1, h, w], img.into_data())?;
            let y = generate(&spec, &weights, &x)?;
            Ok(Image32::new(h, w, y.into_data())?)
        });
        match result {
            Ok(img) => {
                write_mraw(args.output.join(format!("{stem}.corrected.mraw")), &img)?;
                written += 1;
            }
            Err(e) => eprintln!("error: {}: {e:#}", path.display()),
        }
    }
    if written == 0 {
        bail!("every input image failed");
    }
    Ok(written)
}

pub struct EvaluateArgs {
    pub pred: PathBuf,
    pub target: PathBuf,
    pub report: PathBuf,
    pub pred_tag: Option<String>,
    pub target_tag: Option<String>,
}

/// Scores matching stems and writes the CSV; returns the data rows.
pub fn evaluate(args: &EvaluateArgs) -> Result<Vec<MetricReport>> {
    let pred = by_stem(&args.pred, args.pred_tag.as_deref())?;
    let target = by_stem(&args.target, args.target_tag.as_deref())?;
    for stem in pred.keys().filter(|k| !target.contains_key(*k)) {
        eprintln!("warning: no target for prediction `{stem}`, skipped");
    }
    for stem in target.keys().filter(|k| !pred.contains_key(*k)) {
        eprintln!("warning: no prediction for target `{stem}`, skipped");
    }
    let mut rows = Vec::new();
    for (stem, p) in &pred {
        let Some(t) = target.get(stem) else { continue };
        let a = read_image(p).with_context(|| p.display().to_string())?;
        let b = read_image(t).with_context(|| t.display().to_string())?;
        rows.push(evaluate_pair(&a, &b, stem).with_context(|| format!("pair `{stem}`"))?);
    }
    if rows.is_empty() {
        bail!("no matching stems between {} and {}", args.pred.display(), args.target.display());
    }
    if let Some(parent) = args.report.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&args.report, render_csv(&rows))?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Mraw,
    Pgm,
}

/// Writes `phantom_<seed>.{mraw,pgm}` for `count` consecutive seeds.
pub fn phantoms(output: &Path, count: usize, first_seed: u64, size: usize, format: ImageFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(output)?;
    let cfg = PhantomConfig { height: size, width: size, ..PhantomConfig::default() };
    let mut out = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let seed = first_seed + i;
        let img: Image32 = Phantom::generate(&cfg, seed).image.cast();
        let path = match format {
            ImageFormat::Mraw => {
                let p = output.join(format!("phantom_{seed:06}.mraw"));
                write_mraw(&p, &img)?;
                p
            }
            ImageFormat::Pgm => {
                let p = output.join(format!("phantom_{seed:06}.pgm"));
                write_pgm(&p, &img, 65535)?;
                p
            }
        };
        out.push(path);
    }
    Ok(out)
}

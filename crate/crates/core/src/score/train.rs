//! Denoising score matching: per step, each batch item pairs a dataset slice
//! x with a noise level t; the network sees x~ = x + sigma_t * eps and is
//! regressed onto the perturbation score (x - x~) / sigma_t^2 = -eps / sigma_t.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{ReconError, Result};
use crate::volume::Field2D;

use super::net::{draw_index, normal_field, ConvScoreNet, LinearScoreNet, ScoreNet};
use super::{ScoreModel, SigmaSchedule};

/// Network architecture selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchSpec {
    /// Three-layer noise-conditioned convolutional denoiser.
    ConvNet { channels: usize },
    /// Per-level affine head; handy for fast analytic sanity runs.
    Linear,
}

impl Default for ArchSpec {
    fn default() -> Self {
        ArchSpec::ConvNet { channels: 32 }
    }
}

/// Per-level loss weighting. The sigma^2 weighting keeps every level's
/// noise-prediction error on the same scale and is the convention the
/// schedule's geometric design assumes; `Uniform` is the plain objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LevelWeighting {
    #[default]
    SigmaSquared,
    Uniform,
}

impl LevelWeighting {
    fn weight(&self, sigma_t: f64) -> f64 {
        match self {
            LevelWeighting::SigmaSquared => sigma_t * sigma_t,
            LevelWeighting::Uniform => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub arch: ArchSpec,
    pub weighting: LevelWeighting,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            steps: 10_000,
            batch_size: 8,
            seed: 0,
            arch: ArchSpec::default(),
            weighting: LevelWeighting::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(ReconError::spec("learning rate must be finite and non-negative"));
        }
        if self.batch_size == 0 {
            return Err(ReconError::spec("batch size must be positive"));
        }
        if let ArchSpec::ConvNet { channels } = self.arch {
            if channels == 0 {
                return Err(ReconError::spec("convnet needs at least one channel"));
            }
        }
        Ok(())
    }
}

/// One DSM training sample: dataset slice index, noise level, noise draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DsmItem {
    pub slice: usize,
    pub level: usize,
    pub noise: Field2D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsmBatch {
    pub items: Vec<DsmItem>,
}

/// Salt xor-ed into the seed for the batch-assembly rng stream, so tests can
/// regenerate the exact batches a training run consumed.
pub const BATCH_STREAM_SALT: u64 = 0x5D58_C8BD_9A2B_71E3;

/// Draws one batch. Per item the stream is: slice index, level index, then
/// the noise pixels in row-major order.
pub fn assemble_dsm_batch(
    rng: &mut ChaCha12Rng,
    n_slices: usize,
    shape: (usize, usize),
    n_levels: usize,
    batch_size: usize,
) -> DsmBatch {
    let items = (0..batch_size)
        .map(|_| {
            let slice = draw_index(rng, n_slices);
            let level = draw_index(rng, n_levels);
            DsmItem { slice, level, noise: normal_field(shape, rng) }
        })
        .collect();
    DsmBatch { items }
}

fn perturbed_and_target(
    dataset: &[Field2D],
    schedule: &SigmaSchedule,
    item: &DsmItem,
) -> (Field2D, Field2D) {
    let x = &dataset[item.slice];
    let sigma = schedule.sigma(item.level);
    let mut noisy = x.clone();
    let mut target = item.noise.clone();
    for (v, n) in noisy.values_mut().iter_mut().zip(item.noise.values()) {
        *v += sigma * n;
    }
    for t in target.values_mut() {
        *t = -*t / sigma;
    }
    (noisy, target)
}

/// DSM objective on one batch via the inference path: mean over items of
/// weight(t) * mean_px (S(x~, t) - target)^2. Used as the independent
/// re-evaluation oracle for the fused training-loop loss.
pub fn dsm_loss(
    model: &ScoreModel,
    dataset: &[Field2D],
    batch: &DsmBatch,
    weighting: LevelWeighting,
) -> Result<f64> {
    let net = match &model.variant {
        super::ScoreVariant::Learned(net) => net,
        _ => return Err(ReconError::config("dsm_loss needs a learned model")),
    };
    let mut total = 0.0;
    for item in &batch.items {
        let (noisy, target) = perturbed_and_target(dataset, &model.schedule, item);
        let out = net.forward(&noisy, item.level, model.schedule.sigma(item.level));
        let npx = out.values().len() as f64;
        let se: f64 = out
            .values()
            .iter()
            .zip(target.values())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        total += weighting.weight(model.schedule.sigma(item.level)) * se / npx;
    }
    Ok(total / batch.items.len() as f64)
}

/// Loss and flat parameter gradient of the DSM objective on one batch.
pub fn dsm_loss_grad(
    net: &ScoreNet,
    dataset: &[Field2D],
    schedule: &SigmaSchedule,
    batch: &DsmBatch,
    weighting: LevelWeighting,
) -> (f64, Vec<f64>) {
    let b = batch.items.len();
    let results: Vec<(f64, Vec<f64>)> = batch
        .items
        .par_iter()
        .map(|item| {
            let (noisy, target) = perturbed_and_target(dataset, schedule, item);
            let sigma = schedule.sigma(item.level);
            let mut grads = vec![0.0f64; net.num_params()];
            let loss = net.sample_loss_grad(
                &noisy,
                &target,
                item.level,
                sigma,
                weighting.weight(sigma),
                1.0 / b as f64,
                &mut grads,
            );
            (loss, grads)
        })
        .collect();
    let mut loss = 0.0;
    let mut grads = vec![0.0f64; net.num_params()];
    for (l, g) in results {
        loss += l / b as f64;
        for (acc, gi) in grads.iter_mut().zip(g) {
            *acc += gi;
        }
    }
    (loss, grads)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
    lr: f64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t as i32);
        let c2 = 1.0 - B2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grads[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grads[i] * grads[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + EPS);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub model: ScoreModel,
    /// Objective value at each step, recorded before the parameter update.
    pub loss_trace: Vec<f64>,
}

/// Trains a score network on the slice dataset. Deterministic per seed: the
/// init and batch rng streams are both derived from `cfg.seed`.
pub fn dsm_train(
    dataset: &[Field2D],
    schedule: &SigmaSchedule,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let first = dataset
        .first()
        .ok_or_else(|| ReconError::spec("training dataset must be nonempty"))?;
    let shape = first.shape();
    if dataset.iter().any(|s| s.shape() != shape) {
        return Err(ReconError::shape("training slices must share one shape"));
    }

    let mut init_rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut net = match cfg.arch {
        ArchSpec::ConvNet { channels } => {
            ScoreNet::Conv(ConvScoreNet::init(channels, schedule.len(), &mut init_rng))
        }
        ArchSpec::Linear => ScoreNet::Linear(LinearScoreNet::init(schedule.len())),
    };
    let mut batch_rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ BATCH_STREAM_SALT);
    let mut adam = Adam::new(net.num_params(), cfg.learning_rate);
    let mut params = net.params_flat();
    let mut loss_trace = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let batch =
            assemble_dsm_batch(&mut batch_rng, dataset.len(), shape, schedule.len(), cfg.batch_size);
        let (loss, grads) = dsm_loss_grad(&net, dataset, schedule, &batch, cfg.weighting);
        loss_trace.push(loss);
        adam.step(&mut params, &grads);
        net.set_params_flat(&params);
    }
    Ok(TrainOutput { model: ScoreModel::learned(net, schedule.clone())?, loss_trace })
}

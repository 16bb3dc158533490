//! Noise schedule, analytic score oracles, and the trainable 2D
//! noise-conditioned score network with its DSM training loop.

mod checkpoint;
mod net;
mod train;

pub use checkpoint::{load_model, save_model};
pub use net::{normal_field, ConvScoreNet, LinearScoreNet, ScoreNet};
pub use train::{
    assemble_dsm_batch, dsm_loss, dsm_loss_grad, dsm_train, ArchSpec, DsmBatch, DsmItem,
    LevelWeighting, TrainConfig, TrainOutput, BATCH_STREAM_SALT,
};

use rayon::prelude::*;

use crate::error::{ReconError, Result};
use crate::volume::Field2D;

/// Strictly decreasing geometric noise schedule sigma_max -> sigma_min.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSchedule {
    levels: Vec<f64>,
}

impl SigmaSchedule {
    /// `count` levels interpolated geometrically between the endpoints.
    pub fn geometric(sigma_max: f64, sigma_min: f64, count: usize) -> Result<Self> {
        if !(sigma_max > sigma_min && sigma_min > 0.0) {
            return Err(ReconError::spec(format!(
                "need sigma_max > sigma_min > 0, got {sigma_max} and {sigma_min}"
            )));
        }
        if count < 2 {
            return Err(ReconError::spec("schedule needs at least 2 levels"));
        }
        let ratio = sigma_min / sigma_max;
        let levels = (0..count)
            .map(|i| sigma_max * ratio.powf(i as f64 / (count - 1) as f64))
            .collect();
        Ok(Self { levels })
    }

    pub fn from_levels(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(ReconError::spec("schedule needs at least 2 levels"));
        }
        if levels.windows(2).any(|w| !(w[0] > w[1])) || *levels.last().unwrap() <= 0.0 {
            return Err(ReconError::spec("schedule must be strictly decreasing and positive"));
        }
        Ok(Self { levels })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn sigma(&self, level: usize) -> f64 {
        self.levels[level]
    }

    pub fn sigma_max(&self) -> f64 {
        self.levels[0]
    }

    pub fn sigma_min(&self) -> f64 {
        *self.levels.last().unwrap()
    }
}

/// One mixture component of a per-pixel i.i.d. Gaussian mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreVariant {
    /// Per-pixel i.i.d. N(mean, sigma_data^2) data distribution.
    AnalyticGaussian { mean: f64, sigma_data: f64 },
    /// Per-pixel i.i.d. Gaussian mixture.
    AnalyticGmm { components: Vec<GmmComponent> },
    /// Trained network.
    Learned(ScoreNet),
}

/// A score function S(x, t) approximating the gradient of log p_sigma_t.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreModel {
    pub variant: ScoreVariant,
    pub schedule: SigmaSchedule,
}

impl ScoreModel {
    pub fn analytic_gaussian(mean: f64, sigma_data: f64, schedule: SigmaSchedule) -> Self {
        Self { variant: ScoreVariant::AnalyticGaussian { mean, sigma_data }, schedule }
    }

    pub fn analytic_gmm(components: Vec<GmmComponent>, schedule: SigmaSchedule) -> Result<Self> {
        if components.is_empty() {
            return Err(ReconError::spec("GMM needs at least one component"));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if components.iter().any(|c| c.weight <= 0.0 || c.sigma <= 0.0)
            || (total - 1.0).abs() > 1e-9
        {
            return Err(ReconError::spec(
                "GMM weights must be positive and sum to 1, sigmas positive",
            ));
        }
        Ok(Self { variant: ScoreVariant::AnalyticGmm { components }, schedule })
    }

    pub fn learned(net: ScoreNet, schedule: SigmaSchedule) -> Result<Self> {
        if net.num_levels() != schedule.len() {
            return Err(ReconError::config(format!(
                "network has {} levels but the schedule has {}",
                net.num_levels(),
                schedule.len()
            )));
        }
        Ok(Self { variant: ScoreVariant::Learned(net), schedule })
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level >= self.schedule.len() {
            return Err(ReconError::config(format!(
                "level {level} out of range for a {}-level schedule",
                self.schedule.len()
            )));
        }
        Ok(())
    }
}

/// Per-pixel log-density of the noise-perturbed GMM and its derivative.
fn gmm_score_pixel(components: &[GmmComponent], sigma_t: f64, x: f64) -> f64 {
    // responsibilities via a stabilized softmax over log densities
    let logs: Vec<f64> = components
        .iter()
        .map(|c| {
            let var = c.sigma * c.sigma + sigma_t * sigma_t;
            c.weight.ln() - 0.5 * (x - c.mean).powi(2) / var - 0.5 * var.ln()
        })
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|&l| (l - m).exp()).collect();
    let total: f64 = weights.iter().sum();
    components
        .iter()
        .zip(weights.iter())
        .map(|(c, &w)| {
            let var = c.sigma * c.sigma + sigma_t * sigma_t;
            (w / total) * (-(x - c.mean) / var)
        })
        .sum()
}

/// Per-pixel log density of the perturbed GMM (used by the
/// finite-difference oracle in tests).
pub fn gmm_log_density(components: &[GmmComponent], sigma_t: f64, x: f64) -> f64 {
    let mut acc = 0.0f64;
    for c in components {
        let var = c.sigma * c.sigma + sigma_t * sigma_t;
        acc += c.weight * (-0.5 * (x - c.mean).powi(2) / var).exp()
            / (2.0 * std::f64::consts::PI * var).sqrt();
    }
    acc.ln()
}

/// Closed-form score of an analytic model at one noise level.
pub fn analytic_score(model: &ScoreModel, slice: &Field2D, level: usize) -> Result<Field2D> {
    model.check_level(level)?;
    let sigma_t = model.schedule.sigma(level);
    match &model.variant {
        ScoreVariant::AnalyticGaussian { mean, sigma_data } => {
            let var = sigma_data * sigma_data + sigma_t * sigma_t;
            Ok(slice.map(|x| -(x - mean) / var))
        }
        ScoreVariant::AnalyticGmm { components } => {
            Ok(slice.map(|x| gmm_score_pixel(components, sigma_t, x)))
        }
        ScoreVariant::Learned(_) => Err(ReconError::config(
            "analytic_score called on a learned model",
        )),
    }
}

/// Evaluates the score of each slice in the batch at the given level.
/// Slices must be square and identically shaped (the cubic-volume contract);
/// the result is a pure function of (model, inputs, level).
pub fn score_eval(model: &ScoreModel, slices: &[Field2D], level: usize) -> Result<Vec<Field2D>> {
    model.check_level(level)?;
    if slices.is_empty() {
        return Ok(Vec::new());
    }
    let shape = slices[0].shape();
    if shape.0 != shape.1 {
        return Err(ReconError::shape(format!("score slices must be square, got {shape:?}")));
    }
    if slices.iter().any(|s| s.shape() != shape) {
        return Err(ReconError::shape("score slices must share one shape"));
    }
    match &model.variant {
        ScoreVariant::AnalyticGaussian { .. } | ScoreVariant::AnalyticGmm { .. } => {
            slices.iter().map(|s| analytic_score(model, s, level)).collect()
        }
        ScoreVariant::Learned(net) => {
            let sigma = model.schedule.sigma(level);
            Ok(slices
                .par_iter()
                .map(|s| net.forward(s, level, sigma))
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn geometric_schedule_examples() {
        let s = SigmaSchedule::geometric(1.0, 0.01, 3).unwrap();
        let expect = [1.0, 0.1, 0.01];
        for (a, b) in s.levels().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(SigmaSchedule::geometric(0.01, 0.01, 3).is_err());
        assert!(SigmaSchedule::geometric(1.0, 0.01, 1).is_err());

        let s = SigmaSchedule::geometric(50.0, 0.01, 12).unwrap();
        let r0 = s.sigma(1) / s.sigma(0);
        for i in 1..11 {
            let r = s.sigma(i + 1) / s.sigma(i);
            assert!((r - r0).abs() < 1e-12, "ratio drift at {i}");
        }
        assert_eq!(s.sigma(0), 50.0);
        assert!((s.sigma(11) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn gaussian_score_closed_form() {
        let schedule = SigmaSchedule::geometric(1.0, 0.1, 4).unwrap();
        // mu = 0 and sigma_d chosen so sigma_d^2 + sigma_t^2 = 1 at the last level
        let sigma_t = schedule.sigma(3);
        let sigma_d = (1.0 - sigma_t * sigma_t).sqrt();
        let model = ScoreModel::analytic_gaussian(0.0, sigma_d, schedule);
        let ones = Field2D::from_fn(4, 4, |_, _| 1.0);
        let s = analytic_score(&model, &ones, 3).unwrap();
        assert!(s.values().iter().all(|&v| (v + 1.0).abs() < 1e-12));

        // x = mu everywhere -> zero field
        let model = ScoreModel::analytic_gaussian(0.7, 0.5, SigmaSchedule::geometric(1.0, 0.1, 4).unwrap());
        let at_mean = Field2D::from_fn(3, 3, |_, _| 0.7);
        let s = analytic_score(&model, &at_mean, 0).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gaussian_score_is_linear_around_zero_mean() {
        let schedule = SigmaSchedule::geometric(2.0, 0.02, 5).unwrap();
        let model = ScoreModel::analytic_gaussian(0.0, 1.0, schedule);
        let x = Field2D::from_fn(4, 4, |r, c| (r * 4 + c) as f64 / 7.0 - 1.0);
        let a = 0.37;
        let sx = analytic_score(&model, &x, 2).unwrap();
        let sax = analytic_score(&model, &x.map(|v| a * v), 2).unwrap();
        for (l, r) in sax.values().iter().zip(sx.values()) {
            assert!((l - a * r).abs() < 1e-12);
        }
    }

    #[test]
    fn gmm_score_matches_finite_difference_of_log_density() {
        let schedule = SigmaSchedule::geometric(1.0, 0.05, 6).unwrap();
        let comps = vec![
            GmmComponent { weight: 0.4, mean: -0.5, sigma: 0.3 },
            GmmComponent { weight: 0.6, mean: 0.8, sigma: 0.5 },
        ];
        let model = ScoreModel::analytic_gmm(comps.clone(), schedule).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for level in [0usize, 3, 5] {
            let sigma_t = model.schedule.sigma(level);
            for _ in 0..20 {
                let x: f64 = rng.random_range(-2.0..2.0);
                let field = Field2D::from_fn(1, 1, |_, _| x);
                let got = analytic_score(&model, &field, level).unwrap().values()[0];
                let h = 1e-4;
                let fd = (gmm_log_density(&comps, sigma_t, x + h)
                    - gmm_log_density(&comps, sigma_t, x - h))
                    / (2.0 * h);
                let rel = (got - fd).abs() / fd.abs().max(1e-9);
                assert!(rel <= 1e-5, "level {level} x {x}: score {got} vs fd {fd}");
            }
        }
    }

    #[test]
    fn score_eval_contract() {
        let schedule = SigmaSchedule::geometric(1.0, 0.1, 3).unwrap();
        let model = ScoreModel::analytic_gaussian(0.0, 1.0, schedule);
        // empty batch -> empty result
        assert!(score_eval(&model, &[], 0).unwrap().is_empty());
        // batch output equals per-slice analytic score
        let slices = vec![
            Field2D::from_fn(4, 4, |r, c| (r + c) as f64 * 0.1),
            Field2D::from_fn(4, 4, |r, c| (r * c) as f64 * 0.05),
        ];
        let batch = score_eval(&model, &slices, 1).unwrap();
        for (b, s) in batch.iter().zip(slices.iter()) {
            assert_eq!(b, &analytic_score(&model, s, 1).unwrap());
        }
        // non-square slices rejected
        let bad = vec![Field2D::zeros(3, 4)];
        assert!(score_eval(&model, &bad, 0).is_err());
        // mixed shapes rejected
        let mixed = vec![Field2D::zeros(4, 4), Field2D::zeros(5, 5)];
        assert!(score_eval(&model, &mixed, 0).is_err());
        // analytic_score on a learned model is an error
        let net = ScoreNet::Linear(LinearScoreNet::init(3));
        let learned =
            ScoreModel::learned(net, SigmaSchedule::geometric(1.0, 0.1, 3).unwrap()).unwrap();
        assert!(analytic_score(&learned, &slices[0], 0).is_err());
    }

    #[test]
    fn learned_eval_is_pure() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let schedule = SigmaSchedule::geometric(1.0, 0.1, 3).unwrap();
        let net = ScoreNet::Conv(ConvScoreNet::init(4, 3, &mut rng));
        let model = ScoreModel::learned(net, schedule).unwrap();
        let slice = Field2D::from_fn(6, 6, |r, c| ((r * 31 + c * 7) % 11) as f64 / 11.0);
        let batch = score_eval(&model, &[slice.clone(), slice.clone()], 1).unwrap();
        assert_eq!(batch[0], batch[1]);
    }
}

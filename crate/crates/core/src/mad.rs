//! Maximum differentiation (MAD) competition.
//!
//! Starting from a noisy copy of a reference, two images are pushed apart
//! under a "moving" metric, one towards larger and one towards smaller
//! distance from the reference, while both stay on the level set of a
//! "fixed" metric. Images are parameterized by unconstrained logits passed
//! through a sigmoid, so every iterate is a valid image.
//!
//! One step:
//! 1. `g` and `f`: gradients of the moving and fixed distances in logit space;
//! 2. `g_perp = g - (<g, f> / <f, f>) f`;
//! 3. move `step_size` along `+-g_perp`, scaled to unit RMS per coordinate;
//! 4. Newton corrections `theta -= ((d_fixed - d_target) / <f, f>) f` until the
//!    fixed distance is back within `correction_tol` (relative) of its
//!    target, at most [`MAX_CORRECTIONS`] times. A correction that does not
//!    reduce the level-set error is halved until it does (at most
//!    [`MAX_BACKTRACKS`] times); if none helps, correcting stops;
//! 5. if the corrected iterate is still off the level set, the step of (3)
//!    is halved and (4) redone, at most [`MAX_STEP_HALVINGS`] times; the
//!    attempt closest to the level set is kept.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gradient::{grad_raw, Wrt};
use crate::image::{Dims, ImageTensor};
use crate::math::{abs, logit, sigmoid, sqrt};
use crate::metric::MetricId;
use crate::sum;

pub const MAX_CORRECTIONS: usize = 10;

/// Halvings tried per correction before giving up on it.
pub const MAX_BACKTRACKS: usize = 30;

/// Times the projected step is halved when the corrections cannot bring
/// the iterate back onto the level set.
pub const MAX_STEP_HALVINGS: usize = 8;

/// Smallest `<f, f>` for which the fixed-metric level set is considered
/// well defined.
pub const MIN_FIXED_GRAD_SQ: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MadConfig {
    pub fixed_metric: MetricId,
    pub moving_metric: MetricId,
    pub steps: usize,
    /// Logit-space RMS displacement of one projected step.
    pub step_size: f64,
    /// Standard deviation of the logit-space corruption.
    pub noise_sigma: f64,
    pub correction_tol: f64,
    pub seed: u64,
}

impl MadConfig {
    pub fn new(fixed_metric: MetricId, moving_metric: MetricId) -> Self {
        Self {
            fixed_metric,
            moving_metric,
            steps: 50,
            step_size: 1e-2,
            noise_sigma: 0.3,
            correction_tol: 1e-3,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fixed_metric.validate()?;
        self.moving_metric.validate()?;
        if self.fixed_metric == self.moving_metric {
            return Err(Error::InvalidConfig("fixed and moving metrics must differ".into()));
        }
        for (name, v) in [
            ("step_size", self.step_size),
            ("noise_sigma", self.noise_sigma),
            ("correction_tol", self.correction_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(alloc::format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Distances of one iterate to the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepValues {
    pub d_fixed: f64,
    pub d_moving: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MadTrajectory {
    /// Fixed-metric distance of the corrupted reference, held constant.
    pub d_target: f64,
    /// `max[0] == min[0] ==` corrupted reference.
    pub max_iterates: Vec<ImageTensor>,
    pub min_iterates: Vec<ImageTensor>,
    pub max_values: Vec<StepValues>,
    pub min_values: Vec<StepValues>,
}

impl MadTrajectory {
    pub fn corrupted(&self) -> &ImageTensor {
        &self.max_iterates[0]
    }

    /// Largest relative deviation of the fixed metric from its target.
    pub fn max_fixed_drift(&self) -> f64 {
        self.max_values
            .iter()
            .chain(&self.min_values)
            .map(|v| abs(v.d_fixed - self.d_target) / self.d_target)
            .fold(0.0, f64::max)
    }
}

/// Lower and upper clamp applied before taking logits.
pub const LOGIT_CLAMP: (f64, f64) = (1.0 / 255.0, 254.0 / 255.0);

fn corrupted_logits(r: &ImageTensor, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(alloc::format!("noise sigma {sigma} must be non-negative")));
    }
    let mut theta: Vec<f64> =
        r.data().iter().map(|v| logit(v.clamp(LOGIT_CLAMP.0, LOGIT_CLAMP.1))).collect();
    if sigma > 0.0 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).map_err(|_| Error::InvalidConfig("noise sigma".into()))?;
        for t in theta.iter_mut() {
            *t += normal.sample(&mut rng);
        }
    }
    Ok(theta)
}

fn to_image(dims: Dims, theta: &[f64]) -> Result<ImageTensor> {
    ImageTensor::new(dims.height, dims.width, dims.channels, theta.iter().map(|t| sigmoid(*t)).collect())
}

/// `sigmoid(logit(r) + eps)` with `eps ~ N(0, sigma^2)` i.i.d., after
/// clamping `r` into [`LOGIT_CLAMP`]. Deterministic in `seed`.
pub fn corrupt_reference(r: &ImageTensor, sigma: f64, seed: u64) -> Result<ImageTensor> {
    to_image(r.dims(), &corrupted_logits(r, sigma, seed)?)
}

/// Result of one [`mad_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub theta: Vec<f64>,
    pub image: ImageTensor,
    pub values: StepValues,
    pub corrections: usize,
    /// Share of `step_size` actually taken.
    pub fraction: f64,
}

fn logit_grad(metric: &MetricId, r: &ImageTensor, x: &[f64]) -> Result<Vec<f64>> {
    let g = grad_raw(metric, r.dims(), r.data(), x, Wrt::Second)?;
    Ok(g.iter().zip(x).map(|(g, x)| g * x * (1.0 - x)).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    sum::neumaier(a.iter().zip(b).map(|(x, y)| x * y))
}

fn sigmoid_all(theta: &[f64]) -> Vec<f64> {
    theta.iter().map(|t| sigmoid(*t)).collect()
}

/// One projected step from logits `theta`, followed by the level-set
/// correction towards `d_target`.
pub fn mad_step(
    r: &ImageTensor,
    theta: &[f64],
    cfg: &MadConfig,
    direction: Direction,
    d_target: f64,
) -> Result<StepOutcome> {
    let dims = r.dims();
    if theta.len() != dims.len() {
        return Err(Error::InvalidImage(alloc::format!(
            "parameter length {} does not match {dims}",
            theta.len()
        )));
    }
    let x = sigmoid_all(theta);
    let g = logit_grad(&cfg.moving_metric, r, &x)?;
    let f = logit_grad(&cfg.fixed_metric, r, &x)?;
    let ff = dot(&f, &f);
    if ff < MIN_FIXED_GRAD_SQ {
        return Err(Error::DegenerateGradient(ff));
    }
    let coef = dot(&g, &f) / ff;
    let g_perp: Vec<f64> = g.iter().zip(&f).map(|(g, f)| g - coef * f).collect();
    let norm = sqrt(dot(&g_perp, &g_perp));
    let sign = match direction {
        Direction::Max => 1.0,
        Direction::Min => -1.0,
    };
    let tol = cfg.correction_tol * d_target;
    let mut best: Option<StepOutcome> = None;
    let mut fraction = 1.0;
    for _ in 0..=MAX_STEP_HALVINGS {
        let mut moved = theta.to_vec();
        if norm > 0.0 {
            let scale = sign * fraction * cfg.step_size * sqrt(theta.len() as f64) / norm;
            for (t, g) in moved.iter_mut().zip(&g_perp) {
                *t += scale * g;
            }
        }
        let out = correct(r, moved, cfg, d_target, fraction)?;
        let err = abs(out.values.d_fixed - d_target);
        if err <= tol {
            return Ok(out);
        }
        if best.as_ref().is_none_or(|b| err < abs(b.values.d_fixed - d_target)) {
            best = Some(out);
        }
        if norm == 0.0 {
            break;
        }
        fraction *= 0.5;
    }
    Ok(best.expect("at least one attempt"))
}

/// Newton corrections of `theta` towards the fixed-metric level set.
fn correct(r: &ImageTensor, mut theta: Vec<f64>, cfg: &MadConfig, d_target: f64, fraction: f64) -> Result<StepOutcome> {
    let dims = r.dims();
    let tol = cfg.correction_tol * d_target;
    let mut x = sigmoid_all(&theta);
    let mut d_fixed = cfg.fixed_metric.distance_raw(dims, r.data(), &x)?;
    let mut corrections = 0;
    while abs(d_fixed - d_target) > tol && corrections < MAX_CORRECTIONS {
        let f = logit_grad(&cfg.fixed_metric, r, &x)?;
        let ff = dot(&f, &f);
        if ff < MIN_FIXED_GRAD_SQ {
            return Err(Error::DegenerateGradient(ff));
        }
        // Newton step, halved until it brings the fixed distance closer.
        let mut step = (d_fixed - d_target) / ff;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = theta.iter().zip(&f).map(|(t, f)| t - step * f).collect();
            let xt = sigmoid_all(&trial);
            let dt = cfg.fixed_metric.distance_raw(dims, r.data(), &xt)?;
            if abs(dt - d_target) < abs(d_fixed - d_target) {
                accepted = Some((trial, xt, dt));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, xt, dt)) = accepted else { break };
        theta = trial;
        x = xt;
        d_fixed = dt;
        corrections += 1;
    }
    let d_moving = cfg.moving_metric.distance_raw(dims, r.data(), &x)?;
    Ok(StepOutcome {
        image: to_image(dims, &theta)?,
        theta,
        values: StepValues { d_fixed, d_moving },
        corrections,
        fraction,
    })
}

/// Runs both branches of the competition for `cfg.steps` steps.
pub fn run_mad(r: &ImageTensor, cfg: &MadConfig) -> Result<MadTrajectory> {
    cfg.validate()?;
    let dims = r.dims();
    let theta0 = corrupted_logits(r, cfg.noise_sigma, cfg.seed)?;
    let start = to_image(dims, &theta0)?;
    let d_target = cfg.fixed_metric.distance(r, &start)?;
    let d_moving0 = cfg.moving_metric.distance(r, &start)?;
    let v0 = StepValues { d_fixed: d_target, d_moving: d_moving0 };

    let branch = |direction: Direction| -> Result<(Vec<ImageTensor>, Vec<StepValues>)> {
        let mut images = alloc::vec![start.clone()];
        let mut values = alloc::vec![v0];
        let mut theta = theta0.clone();
        for _ in 0..cfg.steps {
            let out = mad_step(r, &theta, cfg, direction, d_target)?;
            theta = out.theta;
            images.push(out.image);
            values.push(out.values);
        }
        Ok((images, values))
    };
    let (max_iterates, max_values) = branch(Direction::Max)?;
    let (min_iterates, min_values) = branch(Direction::Min)?;
    Ok(MadTrajectory { d_target, max_iterates, min_iterates, max_values, min_values })
}

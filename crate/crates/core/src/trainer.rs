//! Batch gradient-descent training of a circuit against target samples.
//!
//! One iteration draws fresh model and data batches, logs the unbiased MMD,
//! then walks the trainable parameters in order. In the default sequential
//! mode the model is re-sampled after every single-parameter update, so each
//! coordinate sees the current circuit; the simultaneous mode computes the
//! whole gradient against one batch and applies a joint step.

use std::time::Instant;

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{self, BackendConfig, Circuit, ShiftRules};
use crate::error::{Error, Result};
use crate::gaussian::LossChannel;
use crate::kernel::{KernelConfig, KernelSpec};
use crate::mmd::{self, MmdEstimate};

const MODULE: &str = "trainer";

/// How parameters are updated within one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Coordinate-wise steps with fresh model samples after each update.
    #[default]
    Sequential,
    /// One gradient vector per iteration, then a joint step.
    Simultaneous,
}

/// Where the starting parameters come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Seed-dependent draw: angles uniform, magnitudes near zero.
    #[default]
    Random,
    /// Keep the parameters the circuit came with.
    Circuit,
}

/// Training-loop configuration. `r_shift`/`s_shift` default to 30 shifted
/// samples for batches up to 50 and to 50 above that.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub m_model: usize,
    pub n_data: usize,
    pub r_shift: Option<usize>,
    pub s_shift: Option<usize>,
    pub seed: u64,
    /// Per-mode loss transmissivities applied to the model (never the data).
    pub noise: Option<Vec<f64>>,
    pub kernel: KernelConfig,
    pub convergence_window: usize,
    pub convergence_tol: f64,
    pub update: UpdateMode,
    pub init: InitMode,
    pub shifts: ShiftRules,
    pub backend: BackendConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            max_iterations: 50,
            m_model: 50,
            n_data: 50,
            r_shift: None,
            s_shift: None,
            seed: 0,
            noise: None,
            kernel: KernelConfig::default(),
            convergence_window: 10,
            convergence_tol: 1e-3,
            update: UpdateMode::default(),
            init: InitMode::default(),
            shifts: ShiftRules::default(),
            backend: BackendConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter {
                module: MODULE,
                name: "learning_rate",
                reason: format!("must be nonnegative and finite, got {}", self.learning_rate),
            });
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidParameter {
                module: MODULE,
                name: "max_iterations",
                reason: "must be at least 1".into(),
            });
        }
        if self.m_model < 2 || self.n_data < 2 {
            return Err(Error::InsufficientSamples { m: self.m_model, n: self.n_data });
        }
        if self.r_shift == Some(0) || self.s_shift == Some(0) {
            return Err(Error::InvalidParameter {
                module: MODULE,
                name: "r_shift",
                reason: "shifted-circuit sample counts must be at least 1".into(),
            });
        }
        if self.convergence_window < 1 {
            return Err(Error::InvalidParameter {
                module: MODULE,
                name: "convergence_window",
                reason: "must be at least 1".into(),
            });
        }
        if let Some(ts) = &self.noise {
            for &t in ts {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::InvalidParameter {
                        module: MODULE,
                        name: "noise",
                        reason: format!("transmissivity must lie in [0, 1], got {t}"),
                    });
                }
            }
        }
        self.shifts.validate()?;
        Ok(())
    }

    /// Shifted-sample counts, defaulted from the batch size.
    pub fn shift_counts(&self) -> (usize, usize) {
        let default = if self.m_model <= 50 { 30 } else { 50 };
        (self.r_shift.unwrap_or(default), self.s_shift.unwrap_or(default))
    }

    /// The loss channels implied by the `noise` field for a circuit width.
    pub fn noise_channels(&self, n_modes: usize) -> Result<Vec<LossChannel>> {
        match &self.noise {
            None => Ok(Vec::new()),
            Some(ts) => {
                if ts.len() != n_modes {
                    return Err(Error::DimensionMismatch {
                        module: MODULE,
                        left: ts.len(),
                        right: n_modes,
                    });
                }
                Ok(ts
                    .iter()
                    .enumerate()
                    .map(|(mode, &transmissivity)| LossChannel { transmissivity, mode })
                    .collect())
            }
        }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogEntry {
    pub iteration: usize,
    pub loss: f64,
    pub params: Vec<f64>,
    pub wall_time_ms: u64,
}

fn draw_batch<R: Rng + ?Sized>(data: &[Vec<f64>], n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    if n <= data.len() {
        // uniform without replacement
        index_sample(rng, data.len(), n)
            .into_iter()
            .map(|i| data[i].clone())
            .collect()
    } else {
        (0..n).map(|_| data[rng.gen_range(0..data.len())].clone()).collect()
    }
}

fn check_finite(value: f64, what: &'static str, iteration: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what, iteration })
    }
}

/// Trains the circuit on the dataset; returns the trained circuit and the
/// full per-iteration log. Bitwise reproducible for a fixed config.
pub fn train(
    circuit: &Circuit,
    data: &[Vec<f64>],
    config: &TrainConfig,
) -> Result<(Circuit, Vec<TrainLogEntry>)> {
    config.validate()?;
    circuit.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientSamples { m: 0, n: 0 });
    }
    if circuit.param_count() == 0 {
        return Err(Error::InvalidParameter {
            module: MODULE,
            name: "circuit",
            reason: "needs at least one trainable parameter".into(),
        });
    }
    let noise = config.noise_channels(circuit.n_modes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = circuit.clone();
    if config.init == InitMode::Random {
        circuit::randomize_params(&mut model, &mut rng);
    }

    // the kernel bandwidth is frozen from iteration-0 pooled samples
    let spec = resolve_kernel(&model, data, config, &noise, &mut rng)?;

    let (r_count, s_count) = config.shift_counts();
    let p = model.param_count();
    let mut log: Vec<TrainLogEntry> = Vec::new();
    let started = Instant::now();

    for iteration in 1..=config.max_iterations {
        let iter_start = started.elapsed().as_millis() as u64;
        let mut x = circuit::sample(&model, config.m_model, &mut rng, &noise, &config.backend, None)?;
        let y = draw_batch(data, config.n_data, &mut rng);
        let loss = check_finite(mmd::mmd(&spec, &x, &y)?.value, "loss", iteration)?;

        match config.update {
            UpdateMode::Sequential => {
                for k in 0..p {
                    if k > 0 {
                        x = circuit::sample(
                            &model,
                            config.m_model,
                            &mut rng,
                            &noise,
                            &config.backend,
                            None,
                        )?;
                    }
                    let g = single_gradient(
                        &model, &spec, &x, &y, r_count, s_count, &mut rng, &noise, config, k,
                    )?;
                    let g = check_finite(g, "gradient", iteration)?;
                    let mut params = model.get_params();
                    params[k] -= config.learning_rate * g;
                    model.set_params(&params)?;
                }
            }
            UpdateMode::Simultaneous => {
                let grad = mmd::mmd_gradient(
                    &model,
                    &spec,
                    &x,
                    &y,
                    r_count,
                    s_count,
                    &mut rng,
                    &noise,
                    &config.backend,
                    &config.shifts,
                )?;
                let mut params = model.get_params();
                for (k, g) in grad.values.iter().enumerate() {
                    let g = check_finite(*g, "gradient", iteration)?;
                    params[k] -= config.learning_rate * g;
                }
                model.set_params(&params)?;
            }
        }

        let wall_time_ms = started.elapsed().as_millis() as u64 - iter_start;
        log.push(TrainLogEntry { iteration, loss, params: model.get_params(), wall_time_ms });

        if log.len() >= config.convergence_window {
            let tail = &log[log.len() - config.convergence_window..];
            let lo = tail.iter().map(|e| e.loss).fold(f64::INFINITY, f64::min);
            let hi = tail.iter().map(|e| e.loss).fold(f64::NEG_INFINITY, f64::max);
            if hi - lo < config.convergence_tol {
                break;
            }
        }
    }
    Ok((model, log))
}

fn resolve_kernel<R: Rng + ?Sized>(
    model: &Circuit,
    data: &[Vec<f64>],
    config: &TrainConfig,
    noise: &[LossChannel],
    rng: &mut R,
) -> Result<KernelSpec> {
    let needs_pool =
        matches!(config.kernel.kind, crate::kernel::KernelKind::GaussianRbf if config.kernel.sigma.is_none());
    let pooled: Vec<Vec<f64>> = if needs_pool {
        let mut pool =
            circuit::sample(model, config.m_model, rng, noise, &config.backend, None)?;
        pool.extend(draw_batch(data, config.n_data, rng));
        pool
    } else {
        Vec::new()
    };
    config.kernel.resolve(&pooled)
}

#[allow(clippy::too_many_arguments)]
fn single_gradient<R: Rng + ?Sized>(
    model: &Circuit,
    spec: &KernelSpec,
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    r_count: usize,
    s_count: usize,
    rng: &mut R,
    noise: &[LossChannel],
    config: &TrainConfig,
    k: usize,
) -> Result<f64> {
    let (plus, minus, scale) = circuit::shifted_circuits(model, k, &config.shifts)?;
    let a = circuit::sample(&plus, r_count, rng, noise, &config.backend, None)?;
    let b = circuit::sample(&minus, s_count, rng, noise, &config.backend, None)?;
    let mean = |p: &[Vec<f64>], q: &[Vec<f64>]| -> Result<f64> {
        Ok(crate::kernel::gram_sum(spec, p, q, false)? / (p.len() * q.len()) as f64)
    };
    Ok(scale * (mean(&a, x)? - mean(&b, x)? - mean(&a, y)? + mean(&b, y)?))
}

/// Held-out evaluation: fresh-seeded MMD between `m_eval` model samples and
/// the dataset. Never mutates the circuit.
pub fn evaluate(
    circuit: &Circuit,
    data: &[Vec<f64>],
    spec: &KernelSpec,
    m_eval: usize,
    seed: u64,
    backend: &BackendConfig,
) -> Result<MmdEstimate> {
    if m_eval < 2 {
        return Err(Error::InsufficientSamples { m: m_eval, n: data.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = circuit::sample(circuit, m_eval, &mut rng, &[], backend, None)?;
    mmd::mmd(spec, &x, data)
}

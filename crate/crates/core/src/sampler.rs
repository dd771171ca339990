//! Homodyne sampling from Fock-backend states.
//!
//! The position density of each mode is tabulated on a symmetric grid and
//! inverted through its CDF (linear interpolation inside cells, so samples
//! are continuous). Multi-mode states are sampled mode by mode: after each
//! draw the remaining modes are conditioned by projecting onto a narrow
//! Gaussian wavepacket (one grid cell wide) standing in for the improper
//! position eigenstate. Loss channels are unraveled exactly into their
//! Kraus branches, one branch drawn per shot.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{self, hermite_functions, FockConfig, FockState};
use crate::gaussian::LossChannel;

const MODULE: &str = "sampler";

/// Symmetric sampling grid: `points` nodes on [−x_max, x_max].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_max: f64,
    pub points: usize,
}

impl GridSpec {
    pub const DEFAULT_POINTS: usize = 4096;

    /// Grid covering at least six standard deviations around the mean.
    pub fn auto(mean: f64, var: f64) -> Self {
        GridSpec {
            x_max: 6.0 * var.max(0.0).sqrt() + mean.abs() + 1.0,
            points: Self::DEFAULT_POINTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 256 {
            return Err(Error::InvalidParameter {
                module: MODULE,
                name: "points",
                reason: format!("need at least 256 grid points, got {}", self.points),
            });
        }
        if !(self.x_max > 0.0) {
            return Err(Error::InvalidParameter {
                module: MODULE,
                name: "x_max",
                reason: format!("must be positive, got {}", self.x_max),
            });
        }
        Ok(())
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| -self.x_max + 2.0 * self.x_max * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Tabulated density with its cumulative integral, ready for inversion.
struct DensityTable {
    xs: Vec<f64>,
    cdf: Vec<f64>,
    total: f64,
}

impl DensityTable {
    /// Builds the table and checks that the grid captures the expected
    /// probability mass (the current state's squared norm).
    fn build(xs: Vec<f64>, mut pdf: Vec<f64>, expected_mass: f64) -> Result<Self> {
        for v in pdf.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let mut cdf = Vec::with_capacity(xs.len());
        cdf.push(0.0);
        for i in 1..xs.len() {
            let dx = xs[i] - xs[i - 1];
            let inc = 0.5 * (pdf[i] + pdf[i - 1]) * dx;
            cdf.push(cdf[i - 1] + inc);
        }
        let total = *cdf.last().unwrap();
        if total < expected_mass - 1e-3 {
            return Err(Error::GridMassDeficit { captured: total, norm: expected_mass });
        }
        Ok(DensityTable { xs, cdf, total })
    }

    /// Inverse-CDF draw; `u` uniform in [0, 1).
    fn draw(&self, u: f64) -> f64 {
        let target = u * self.total;
        // first index with cdf[i] >= target
        let mut lo = 0usize;
        let mut hi = self.cdf.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.cdf[mid] < target {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        if lo == 0 {
            return self.xs[0];
        }
        let span = self.cdf[lo] - self.cdf[lo - 1];
        let frac = if span > 0.0 { (target - self.cdf[lo - 1]) / span } else { 0.5 };
        self.xs[lo - 1] + frac * (self.xs[lo] - self.xs[lo - 1])
    }
}

/// Hermite-function table H[i][m] = h_m(x_i) for a fixed grid.
fn hermite_table(xs: &[f64], d: usize, hbar: f64) -> DMatrix<f64> {
    let mut h = DMatrix::<f64>::zeros(xs.len(), d);
    for (i, &x) in xs.iter().enumerate() {
        let row = hermite_functions(x, d, hbar);
        for m in 0..d {
            h[(i, m)] = row[m];
        }
    }
    h
}

/// Density of the first mode of a (possibly unnormalized) tensor with
/// `rest` trailing amplitudes per Fock level.
fn first_mode_density(amps: &[Complex64], d: usize, rest: usize, h: &DMatrix<f64>) -> Vec<f64> {
    if rest == 1 {
        // pure single-mode vector: p(x) = |Σ_m c_m h_m(x)|²
        let mut out = Vec::with_capacity(h.nrows());
        for i in 0..h.nrows() {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..d {
                acc += amps[m] * h[(i, m)];
            }
            out.push(acc.norm_sqr());
        }
        return out;
    }
    // real part of the reduced density is enough for the quadratic form
    let mut rho = DMatrix::<f64>::zeros(d, d);
    for m in 0..d {
        for mp in m..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..rest {
                acc += amps[m * rest + r] * amps[mp * rest + r].conj();
            }
            rho[(m, mp)] = acc.re;
            rho[(mp, m)] = acc.re;
        }
    }
    let hr = h * &rho; // points × d
    (0..h.nrows())
        .map(|i| (0..d).map(|m| hr[(i, m)] * h[(i, m)]).sum())
        .collect()
}

/// Coefficients ⟨m|φ⟩ of a narrow Gaussian wavepacket centred at `x0` with
/// position spread `width` (the finite-squeezing stand-in for |x₀⟩).
fn projector_weights(x0: f64, width: f64, d: usize, hbar: f64) -> Vec<f64> {
    let half_span = 8.0 * width;
    let steps = 128usize;
    let dx = 2.0 * half_span / steps as f64;
    let norm = (2.0 * std::f64::consts::PI * width * width).powf(-0.25);
    let mut c = vec![0.0f64; d];
    for k in 0..=steps {
        let x = x0 - half_span + k as f64 * dx;
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
        let psi = norm * (-(x - x0).powi(2) / (4.0 * width * width)).exp();
        let h = hermite_functions(x, d, hbar);
        for m in 0..d {
            c[m] += w * dx * psi * h[m];
        }
    }
    c
}

fn contract_first_mode(amps: &[Complex64], d: usize, rest: usize, weights: &[f64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); rest];
    for m in 0..d {
        let w = weights[m];
        if w == 0.0 {
            continue;
        }
        for r in 0..rest {
            out[r] += amps[m * rest + r] * w;
        }
    }
    out
}

fn renormalize(amps: &mut [Complex64]) -> Result<()> {
    let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    if norm <= 0.0 || !norm.is_finite() {
        return Err(Error::CorruptedState {
            context: "conditioned state has vanishing norm".into(),
        });
    }
    let s = 1.0 / norm.sqrt();
    for z in amps.iter_mut() {
        *z *= s;
    }
    Ok(())
}

/// Per-mode machinery shared by all shots: fixed grid, Hermite table, cell
/// width for the conditioning projector.
struct ModePlan {
    xs: Vec<f64>,
    h: DMatrix<f64>,
    cell: f64,
}

fn build_plans(state: &FockState, grid: Option<GridSpec>) -> Result<Vec<ModePlan>> {
    let d = state.config.cutoff;
    let mut plans = Vec::with_capacity(state.n_modes);
    for mode in 0..state.n_modes {
        let spec = match grid {
            Some(g) => {
                g.validate()?;
                g
            }
            None => {
                let (mean, var) = state.position_moments(mode)?;
                // widened: conditional densities can sit away from the
                // marginal mean
                let mut auto = GridSpec::auto(mean, var);
                auto.x_max += 2.0;
                auto
            }
        };
        let xs = spec.nodes();
        let h = hermite_table(&xs, d, state.config.hbar);
        let cell = xs[1] - xs[0];
        plans.push(ModePlan { xs, h, cell });
    }
    Ok(plans)
}

/// Draws `count` joint position samples from a Fock state; rows are shots.
pub fn sample_fock<R: Rng + ?Sized>(
    state: &FockState,
    rng: &mut R,
    count: usize,
    grid: Option<GridSpec>,
) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::InvalidParameter {
            module: MODULE,
            name: "count",
            reason: "must be at least 1".into(),
        });
    }
    let norm = state.squared_norm();
    if norm < state.config.norm_floor {
        return Err(Error::TruncationLeakage { norm, floor: state.config.norm_floor });
    }
    let plans = build_plans(state, grid)?;
    let d = state.config.cutoff;

    if state.n_modes == 1 {
        let pdf = first_mode_density(&state.amplitudes, d, 1, &plans[0].h);
        let table = DensityTable::build(plans[0].xs.clone(), pdf, norm)?;
        return Ok((0..count)
            .map(|_| vec![table.draw(rng.gen::<f64>())])
            .collect());
    }

    // shared first-mode table; later modes are conditioned per shot
    let rest0 = d.pow((state.n_modes - 1) as u32);
    let pdf0 = first_mode_density(&state.amplitudes, d, rest0, &plans[0].h);
    let table0 = DensityTable::build(plans[0].xs.clone(), pdf0, norm)?;

    let seeds: Vec<u64> = (0..count).map(|_| rng.gen()).collect();
    let cfg = state.config;
    seeds
        .par_iter()
        .map(|&seed| {
            let mut shot_rng = ChaCha8Rng::seed_from_u64(seed);
            shot_one(
                &state.amplitudes,
                state.n_modes,
                &cfg,
                &plans,
                Some(&table0),
                &mut shot_rng,
            )
        })
        .collect()
}

/// One full sequential-conditioning shot over all modes.
fn shot_one(
    amps: &[Complex64],
    n_modes: usize,
    cfg: &FockConfig,
    plans: &[ModePlan],
    first_table: Option<&DensityTable>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let d = cfg.cutoff;
    let mut cur: Vec<Complex64> = amps.to_vec();
    let mut out = Vec::with_capacity(n_modes);
    for mode in 0..n_modes {
        let rest = d.pow((n_modes - 1 - mode) as u32);
        let plan = &plans[mode];
        let x = if mode == 0 {
            if let Some(t) = first_table {
                t.draw(rng.gen::<f64>())
            } else {
                let norm: f64 = cur.iter().map(|z| z.norm_sqr()).sum();
                let pdf = first_mode_density(&cur, d, rest, &plan.h);
                DensityTable::build(plan.xs.clone(), pdf, norm)?.draw(rng.gen::<f64>())
            }
        } else {
            let norm: f64 = cur.iter().map(|z| z.norm_sqr()).sum();
            let pdf = first_mode_density(&cur, d, rest, &plan.h);
            DensityTable::build(plan.xs.clone(), pdf, norm)?.draw(rng.gen::<f64>())
        };
        out.push(x);
        if mode + 1 < n_modes {
            let weights = projector_weights(x, plan.cell, d, cfg.hbar);
            let mut next = contract_first_mode(&cur, d, rest, &weights);
            renormalize(&mut next)?;
            cur = next;
        }
    }
    Ok(out)
}

/// Samples a Fock state through loss channels by drawing one Kraus branch
/// per noisy mode per shot, then homodyne-sampling the resulting pure state.
pub fn sample_fock_with_loss<R: Rng + ?Sized>(
    state: &FockState,
    channels: &[LossChannel],
    rng: &mut R,
    count: usize,
    grid: Option<GridSpec>,
) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::InvalidParameter {
            module: MODULE,
            name: "count",
            reason: "must be at least 1".into(),
        });
    }
    let norm = state.squared_norm();
    if norm < state.config.norm_floor {
        return Err(Error::TruncationLeakage { norm, floor: state.config.norm_floor });
    }
    for ch in channels {
        ch.validate(state.n_modes)?;
    }
    // channels on the same mode compose multiplicatively
    let mut t_eff = vec![1.0_f64; state.n_modes];
    for ch in channels {
        t_eff[ch.mode] *= ch.transmissivity;
    }
    let active: Vec<usize> = (0..state.n_modes).filter(|&m| t_eff[m] < 1.0).collect();
    if active.is_empty() {
        return sample_fock(state, rng, count, grid);
    }
    let cfg = state.config;
    let d = cfg.cutoff;
    let plans = build_plans(state, grid)?;

    if state.n_modes == 1 {
        // the Kraus mixture of a single mode is small: tabulate each branch
        // on its own moment-matched grid (loss can widen the distribution
        // past the pre-loss state's grid)
        let ops = fock::loss_kraus_operators(t_eff[0], &cfg)?;
        let total = state.squared_norm();
        let mut weights = Vec::new();
        let mut tables = Vec::new();
        for op in &ops {
            let mut b = fock::apply_kraus(state, op, 0)?;
            let w = b.squared_norm() / total;
            if w < 1e-15 {
                continue;
            }
            renormalize(&mut b.amplitudes)?;
            let spec = match grid {
                Some(g) => g,
                None => {
                    let (mean, var) = b.position_moments(0)?;
                    let mut auto = GridSpec::auto(mean, var);
                    auto.x_max += 2.0;
                    auto
                }
            };
            let xs = spec.nodes();
            let h = hermite_table(&xs, d, cfg.hbar);
            let pdf = first_mode_density(&b.amplitudes, d, 1, &h);
            tables.push(DensityTable::build(xs, pdf, 1.0)?);
            weights.push(w);
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            out.push(vec![tables[pick].draw(rng.gen::<f64>())]);
        }
        return Ok(out);
    }

    let kraus: Vec<(usize, Vec<DMatrix<Complex64>>)> = active
        .iter()
        .map(|&mode| Ok((mode, fock::loss_kraus_operators(t_eff[mode], &cfg)?)))
        .collect::<Result<_>>()?;

    let seeds: Vec<u64> = (0..count).map(|_| rng.gen()).collect();
    seeds
        .par_iter()
        .map(|&seed| {
            let mut shot_rng = ChaCha8Rng::seed_from_u64(seed);
            let mut branch = FockState {
                amplitudes: state.amplitudes.to_vec(),
                n_modes: state.n_modes,
                config: cfg,
            };
            for (mode, ops) in &kraus {
                let total: f64 = branch.squared_norm();
                let mut weights = Vec::with_capacity(d);
                let mut branches = Vec::with_capacity(d);
                for op in ops {
                    let b = fock::apply_kraus(&branch, op, *mode)?;
                    weights.push(b.squared_norm() / total);
                    branches.push(b);
                }
                let u: f64 = shot_rng.gen();
                let mut acc = 0.0;
                let mut pick = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                branch = branches.swap_remove(pick);
                let mut amps = std::mem::take(&mut branch.amplitudes);
                renormalize(&mut amps)?;
                branch.amplitudes = amps;
            }
            shot_one(&branch.amplitudes, branch.n_modes, &cfg, &plans, None, &mut shot_rng)
        })
        .collect()
}

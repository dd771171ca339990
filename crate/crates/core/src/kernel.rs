//! MMD kernels: the classical Gaussian RBF and two quantum kernels built
//! from single-mode feature maps (cubic-phase and squeezed encodings) whose
//! n-mode feature state is the tensor product of per-component states, so
//! the overlap factorizes into a product of per-mode overlaps.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{squeezing_matrix, CubicBuilder, FockConfig};

const MODULE: &str = "kernel";

/// Quantum feature states are allowed to lose norm to truncation (that is
/// what makes the cubic-phase kernel degrade for large inputs, and it is
/// reported through k(x,x) < 1 rather than hidden); below this floor the
/// state is effectively gone and evaluation fails instead.
pub const KERNEL_NORM_FLOOR: f64 = 1e-9;

/// How a complex feature-state overlap is turned into a real kernel value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combiner {
    /// |⟨φ(x)|φ(y)⟩|²: real, symmetric, positive semidefinite.
    #[default]
    ModulusSquared,
    /// Re⟨φ(x)|φ(y)⟩, kept for comparison.
    RealPart,
}

/// A fully resolved kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    GaussianRbf { sigma: f64 },
    CubicPhase { cutoff: usize, combiner: Combiner },
    Squeezed { cutoff: usize, combiner: Combiner },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::GaussianRbf { sigma } => {
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return Err(Error::InvalidParameter {
                        module: MODULE,
                        name: "sigma",
                        reason: format!("must be positive, got {sigma}"),
                    });
                }
            }
            KernelSpec::CubicPhase { cutoff, .. } | KernelSpec::Squeezed { cutoff, .. } => {
                if cutoff < 2 {
                    return Err(Error::InvalidParameter {
                        module: MODULE,
                        name: "cutoff",
                        reason: format!("must be at least 2, got {cutoff}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn is_quantum(&self) -> bool {
        !matches!(self, KernelSpec::GaussianRbf { .. })
    }
}

/// Kernel selection as it appears in config files: `sigma` may be omitted
/// for the RBF, in which case the median heuristic fixes it at setup time.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct KernelConfig {
    pub kind: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default = "default_kernel_cutoff")]
    pub cutoff: usize,
    #[serde(default)]
    pub combiner: Combiner,
}

fn default_kernel_cutoff() -> usize {
    15
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    GaussianRbf,
    CubicPhase,
    Squeezed,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            kind: KernelKind::GaussianRbf,
            sigma: None,
            cutoff: default_kernel_cutoff(),
            combiner: Combiner::default(),
        }
    }
}

impl KernelConfig {
    /// Resolves the configuration against pooled samples, applying the
    /// median heuristic when no bandwidth was fixed.
    pub fn resolve(&self, pooled: &[Vec<f64>]) -> Result<KernelSpec> {
        let spec = match self.kind {
            KernelKind::GaussianRbf => {
                let sigma = match self.sigma {
                    Some(s) => s,
                    None => median_heuristic(pooled),
                };
                KernelSpec::GaussianRbf { sigma }
            }
            KernelKind::CubicPhase => {
                KernelSpec::CubicPhase { cutoff: self.cutoff, combiner: self.combiner }
            }
            KernelKind::Squeezed => {
                KernelSpec::Squeezed { cutoff: self.cutoff, combiner: self.combiner }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Median of pairwise Euclidean distances over (at most 512 of) the pooled
/// samples; falls back to 1 when degenerate.
pub fn median_heuristic(pooled: &[Vec<f64>]) -> f64 {
    let take = pooled.len().min(512);
    if take < 2 {
        return 1.0;
    }
    let mut dists = Vec::with_capacity(take * (take - 1) / 2);
    for i in 0..take {
        for j in (i + 1)..take {
            let d2: f64 = pooled[i]
                .iter()
                .zip(pooled[j].iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(d2.sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = dists[dists.len() / 2];
    if med.is_finite() && med > 0.0 {
        med
    } else {
        1.0
    }
}

fn quantize(v: f64) -> i64 {
    (v * 1e12).round() as i64
}

/// Prepares and caches per-mode feature states for a quantum kernel, keyed
/// by the encoded scalar quantized at 1e-12.
pub struct FeatureCache {
    spec: KernelSpec,
    states: Vec<DVector<Complex64>>,
    index: HashMap<i64, usize>,
    cubic: Option<CubicBuilder>,
}

impl FeatureCache {
    pub fn new(spec: KernelSpec) -> Self {
        let cubic = match spec {
            KernelSpec::CubicPhase { .. } => {
                Some(CubicBuilder::new(FockConfig::default().hbar))
            }
            _ => None,
        };
        FeatureCache { spec, states: Vec::new(), index: HashMap::new(), cubic }
    }

    fn prepare(&mut self, value: f64) -> Result<usize> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter {
                module: MODULE,
                name: "sample",
                reason: format!("cannot encode non-finite value {value}"),
            });
        }
        let key = quantize(value);
        if let Some(&idx) = self.index.get(&key) {
            return Ok(idx);
        }
        let state: DVector<Complex64> = match self.spec {
            KernelSpec::Squeezed { cutoff, .. } => {
                let m = squeezing_matrix(value, 0.0, cutoff);
                DVector::from_fn(cutoff, |i, _| m[(i, 0)])
            }
            KernelSpec::CubicPhase { cutoff, .. } => {
                let builder = self.cubic.as_mut().expect("cubic builder present");
                builder.vacuum_column(value, cutoff)
            }
            KernelSpec::GaussianRbf { .. } => unreachable!("classical kernel has no features"),
        };
        let norm = state.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if norm < KERNEL_NORM_FLOOR {
            return Err(Error::TruncationLeakage { norm, floor: KERNEL_NORM_FLOOR });
        }
        self.states.push(state);
        self.index.insert(key, self.states.len() - 1);
        Ok(self.states.len() - 1)
    }

    /// Indices of the feature states for each component of `x`.
    pub fn encode(&mut self, x: &[f64]) -> Result<Vec<usize>> {
        x.iter().map(|&v| self.prepare(v)).collect()
    }

    fn pair_value(&self, a: &[usize], b: &[usize]) -> f64 {
        let mut ov = Complex64::new(1.0, 0.0);
        for (&i, &j) in a.iter().zip(b.iter()) {
            ov *= self.states[i].dotc(&self.states[j]);
        }
        match self.spec {
            KernelSpec::CubicPhase { combiner, .. } | KernelSpec::Squeezed { combiner, .. } => {
                match combiner {
                    Combiner::ModulusSquared => ov.norm_sqr(),
                    Combiner::RealPart => ov.re,
                }
            }
            KernelSpec::GaussianRbf { .. } => unreachable!(),
        }
    }
}

fn rbf_value(sigma: f64, x: &[f64], y: &[f64]) -> f64 {
    let d2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// κ(x, y) for any kernel; dimension-checked.
pub fn kernel_value(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            module: MODULE,
            left: x.len(),
            right: y.len(),
        });
    }
    match spec {
        KernelSpec::GaussianRbf { sigma } => Ok(rbf_value(*sigma, x, y)),
        _ => {
            let mut cache = FeatureCache::new(*spec);
            let a = cache.encode(x)?;
            let b = cache.encode(y)?;
            Ok(cache.pair_value(&a, &b))
        }
    }
}

/// Sum of all Gram entries κ(X_i, Y_j), optionally skipping the diagonal
/// (i = j). Avoids materializing the matrix for large sample sets.
pub fn gram_sum(
    spec: &KernelSpec,
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    exclude_diagonal: bool,
) -> Result<f64> {
    spec.validate()?;
    let dim = x.first().map(|r| r.len()).unwrap_or(0);
    for row in x.iter().chain(y.iter()) {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                module: MODULE,
                left: dim,
                right: row.len(),
            });
        }
    }
    match spec {
        KernelSpec::GaussianRbf { sigma } => {
            let s = *sigma;
            Ok(x
                .par_iter()
                .enumerate()
                .map(|(i, xi)| {
                    y.iter()
                        .enumerate()
                        .filter(|(j, _)| !(exclude_diagonal && i == *j))
                        .map(|(_, yj)| rbf_value(s, xi, yj))
                        .sum::<f64>()
                })
                .sum())
        }
        _ => {
            let mut cache = FeatureCache::new(*spec);
            let xi: Vec<Vec<usize>> =
                x.iter().map(|r| cache.encode(r)).collect::<Result<_>>()?;
            let yi: Vec<Vec<usize>> =
                y.iter().map(|r| cache.encode(r)).collect::<Result<_>>()?;
            let cache = &cache;
            Ok(xi
                .par_iter()
                .enumerate()
                .map(|(i, a)| {
                    yi.iter()
                        .enumerate()
                        .filter(|(j, _)| !(exclude_diagonal && i == *j))
                        .map(|(_, b)| cache.pair_value(a, b))
                        .sum::<f64>()
                })
                .sum())
        }
    }
}

/// Gram matrix with entries κ(X_i, Y_j). Quantum feature states are built
/// once per distinct scalar, then pair values are tiled in parallel.
pub fn gram(spec: &KernelSpec, x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let m = x.len();
    let n = y.len();
    if m == 0 || n == 0 {
        return Err(Error::InsufficientSamples { m, n });
    }
    let dim = x[0].len();
    for row in x.iter().chain(y.iter()) {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                module: MODULE,
                left: dim,
                right: row.len(),
            });
        }
    }
    match spec {
        KernelSpec::GaussianRbf { sigma } => {
            let s = *sigma;
            let rows: Vec<Vec<f64>> = x
                .par_iter()
                .map(|xi| y.iter().map(|yj| rbf_value(s, xi, yj)).collect())
                .collect();
            Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
        }
        _ => {
            let mut cache = FeatureCache::new(*spec);
            let xi: Vec<Vec<usize>> =
                x.iter().map(|r| cache.encode(r)).collect::<Result<_>>()?;
            let yi: Vec<Vec<usize>> =
                y.iter().map(|r| cache.encode(r)).collect::<Result<_>>()?;
            let cache = &cache;
            let rows: Vec<Vec<f64>> = xi
                .par_iter()
                .map(|a| yi.iter().map(|b| cache.pair_value(a, b)).collect())
                .collect();
            Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rbf_reference_values() {
        let spec = KernelSpec::GaussianRbf { sigma: 1.0 };
        assert_relative_eq!(kernel_value(&spec, &[0.7], &[0.7]).unwrap(), 1.0);
        assert_relative_eq!(
            kernel_value(&spec, &[0.0], &[2.0]).unwrap(),
            (-2.0_f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn squeezed_kernel_matches_closed_form() {
        // same-angle squeezed-vacuum overlap: ⟨S(x)0|S(y)0⟩ = 1/√cosh(x−y)
        for cutoff in [15, 40] {
            let spec = KernelSpec::Squeezed { cutoff, combiner: Combiner::ModulusSquared };
            let v = kernel_value(&spec, &[0.5], &[0.0]).unwrap();
            let want = 1.0 / 0.5_f64.cosh();
            let tol = if cutoff == 40 { 1e-6 } else { 1e-3 };
            assert!((v - want).abs() < tol, "cutoff {cutoff}: {v} vs {want}");
        }
    }

    #[test]
    fn kernels_are_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let specs = [
            KernelSpec::GaussianRbf { sigma: 0.8 },
            KernelSpec::Squeezed { cutoff: 12, combiner: Combiner::ModulusSquared },
            KernelSpec::CubicPhase { cutoff: 12, combiner: Combiner::ModulusSquared },
        ];
        for spec in specs {
            for _ in 0..25 {
                let x = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
                let y = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
                let a = kernel_value(&spec, &x, &y).unwrap();
                let b = kernel_value(&spec, &y, &x).unwrap();
                assert!((a - b).abs() < 1e-12, "{spec:?}");
                assert!(a >= -1e-9 && a <= 1.0 + 1e-9, "{spec:?}: {a}");
            }
        }
    }

    #[test]
    fn self_similarity_tracks_feature_norm() {
        let spec = KernelSpec::CubicPhase { cutoff: 10, combiner: Combiner::ModulusSquared };
        let small = kernel_value(&spec, &[0.1], &[0.1]).unwrap();
        let large = kernel_value(&spec, &[3.0], &[3.0]).unwrap();
        assert!(small > 0.999, "small-strength features stay normalized: {small}");
        assert!(large < small, "leakage grows with strength: {large} vs {small}");
    }

    #[test]
    fn gram_matches_pointwise_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..2).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let y: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let spec = KernelSpec::GaussianRbf { sigma: 1.3 };
        let g = gram(&spec, &x, &y).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let v = kernel_value(&spec, &x[i], &y[j]).unwrap();
                assert_eq!(g[(i, j)], v);
            }
        }
    }

    #[test]
    fn gram_psd_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|_| vec![rng.sample::<f64, _>(rand_distr::StandardNormal)])
            .collect();
        for spec in [
            KernelSpec::GaussianRbf { sigma: 1.0 },
            KernelSpec::Squeezed { cutoff: 12, combiner: Combiner::ModulusSquared },
        ] {
            let g = gram(&spec, &pts, &pts).unwrap();
            let sym = (&g + g.transpose()) * 0.5;
            let eigs = crate::linalg::symmetric_eigenvalues(&sym);
            assert!(eigs[0] >= -1e-8, "{spec:?}: min eig {}", eigs[0]);
        }
    }

    #[test]
    fn median_heuristic_reasonable() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let m = median_heuristic(&pts);
        assert_relative_eq!(m, 1.0);
        assert_eq!(median_heuristic(&[]), 1.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let spec = KernelSpec::GaussianRbf { sigma: 1.0 };
        assert!(matches!(
            kernel_value(&spec, &[0.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn config_resolution_applies_median_heuristic() {
        let cfg = KernelConfig::default();
        let pooled = vec![vec![0.0], vec![2.0], vec![4.0]];
        match cfg.resolve(&pooled).unwrap() {
            KernelSpec::GaussianRbf { sigma } => assert_relative_eq!(sigma, 2.0),
            other => panic!("unexpected {other:?}"),
        }
        let fixed = KernelConfig { sigma: Some(0.5), ..KernelConfig::default() };
        match fixed.resolve(&pooled).unwrap() {
            KernelSpec::GaussianRbf { sigma } => assert_relative_eq!(sigma, 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }
}

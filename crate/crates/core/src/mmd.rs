//! The unbiased MMD estimator and its parameter-shift gradient estimator,
//! plus an exact-density evaluation mode (closed-form Gaussian integrals or
//! grid quadrature over simulated densities) used to verify the shift rules
//! against finite differences. Training always goes through the sampled
//! path; the exact mode exists for verification only.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::circuit::{self, BackendConfig, Circuit, CircuitState, ShiftRules};
use crate::error::{Error, Result};
use crate::fock;
use crate::gaussian::LossChannel;
use crate::kernel::{gram, gram_sum, kernel_value, KernelSpec};

const MODULE: &str = "mmd";

/// Value of the unbiased estimator together with the sample counts it used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmdEstimate {
    pub value: f64,
    pub m: usize,
    pub n: usize,
}

/// Unbiased MMD estimator between sample sets X (M×n) and Y (N×n):
/// self-pairs are excluded exactly from the two within-set sums.
pub fn mmd(spec: &KernelSpec, x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<MmdEstimate> {
    let (m, n) = (x.len(), y.len());
    if m < 2 || n < 2 {
        return Err(Error::InsufficientSamples { m, n });
    }
    let off_x = gram_sum(spec, x, x, true)?;
    let off_y = gram_sum(spec, y, y, true)?;
    let cross = gram_sum(spec, x, y, false)?;
    let value = off_x / (m * (m - 1)) as f64 + off_y / (n * (n - 1)) as f64
        - 2.0 * cross / (m * n) as f64;
    Ok(MmdEstimate { value, m, n })
}

/// Per-parameter record of how a gradient component was estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftMeta {
    pub shift: f64,
    pub scale: f64,
    pub r_samples: usize,
    pub s_samples: usize,
}

/// Parameter-shift gradient estimate for every trainable parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub values: Vec<f64>,
    pub meta: Vec<ShiftMeta>,
}

fn gram_mean(spec: &KernelSpec, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    Ok(gram_sum(spec, a, b, false)? / (a.len() * b.len()) as f64)
}

/// Gradient of the MMD estimator: for each trainable parameter, fresh R and
/// S samples are drawn from the up- and down-shifted circuits (through the
/// same noise channels as the model) and combined with the Table-rule scale.
#[allow(clippy::too_many_arguments)]
pub fn mmd_gradient<R: Rng + ?Sized>(
    circuit: &Circuit,
    spec: &KernelSpec,
    x_model: &[Vec<f64>],
    y_data: &[Vec<f64>],
    r_count: usize,
    s_count: usize,
    rng: &mut R,
    noise: &[LossChannel],
    backend: &BackendConfig,
    rules: &ShiftRules,
) -> Result<GradientEstimate> {
    if r_count < 1 || s_count < 1 {
        return Err(Error::InsufficientSamples { m: r_count, n: s_count });
    }
    if x_model.len() < 2 || y_data.len() < 2 {
        return Err(Error::InsufficientSamples { m: x_model.len(), n: y_data.len() });
    }
    rules.validate()?;
    let p = circuit.param_count();
    let mut values = Vec::with_capacity(p);
    let mut meta = Vec::with_capacity(p);
    for k in 0..p {
        let (plus, minus, scale) = circuit::shifted_circuits(circuit, k, rules)?;
        let a = circuit::sample(&plus, r_count, rng, noise, backend, None)?;
        let b = circuit::sample(&minus, s_count, rng, noise, backend, None)?;
        let combo = gram_mean(spec, &a, x_model)? - gram_mean(spec, &b, x_model)?
            - gram_mean(spec, &a, y_data)?
            + gram_mean(spec, &b, y_data)?;
        let (shift, _) = rules.rule_for(
            circuit.gates[circuit.param_locations()[k].0].kind,
            circuit.param_locations()[k].1,
        );
        values.push(scale * combo);
        meta.push(ShiftMeta { shift, scale, r_samples: r_count, s_samples: s_count });
    }
    Ok(GradientEstimate { values, meta })
}

// --- exact-density evaluation ---

/// Exact representation of a circuit's homodyne distribution: either the
/// Gaussian moments or a tabulated single-mode density on a fixed grid.
enum Density {
    Gaussian { mean: DVector<f64>, cov: DMatrix<f64> },
    Grid { pdf: Vec<f64> },
}

/// Exact-density MMD evaluator for gradient verification.
///
/// Gaussian circuits paired with the RBF kernel use closed-form Gaussian
/// integrals; everything else uses quadrature over the simulated position
/// density of a single-mode circuit on a grid frozen at construction time
/// (so shifted and perturbed circuits are all integrated identically).
pub struct ExactEngine {
    spec: KernelSpec,
    data: Vec<Vec<f64>>,
    backend: BackendConfig,
    /// Fixed quadrature nodes/weights for the grid path.
    grid: Option<GridQuad>,
    /// Unbiased data-data term of the loss (constant in the parameters).
    data_term: f64,
}

struct GridQuad {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// κ(node_i, node_j), precomputed once.
    node_gram: DMatrix<f64>,
    /// κ(node_i, data_j), precomputed once.
    data_gram: DMatrix<f64>,
}

const GRID_POINTS: usize = 1537;

impl ExactEngine {
    pub fn new(
        circuit: &Circuit,
        spec: KernelSpec,
        data: Vec<Vec<f64>>,
        backend: BackendConfig,
    ) -> Result<Self> {
        spec.validate()?;
        if data.len() < 2 {
            return Err(Error::InsufficientSamples { m: data.len(), n: data.len() });
        }
        let closed_form = circuit.is_gaussian() && !spec.is_quantum();
        let grid = if closed_form {
            None
        } else {
            if circuit.n_modes != 1 {
                return Err(Error::InvalidParameter {
                    module: MODULE,
                    name: "circuit",
                    reason: "exact-density quadrature supports single-mode circuits only".into(),
                });
            }
            Some(Self::build_grid(circuit, &spec, &data, &backend)?)
        };
        let n = data.len();
        let data_term = gram_sum(&spec, &data, &data, true)? / (n * (n - 1)) as f64;
        Ok(ExactEngine { spec, data, backend, grid, data_term })
    }

    fn build_grid(
        circuit: &Circuit,
        spec: &KernelSpec,
        data: &[Vec<f64>],
        backend: &BackendConfig,
    ) -> Result<GridQuad> {
        let (mean, var) = match circuit::run(circuit, backend)? {
            CircuitState::Gaussian(g) => (g.mean[0], g.cov[(0, 0)]),
            CircuitState::Fock(f) => f.position_moments(0)?,
        };
        let data_span = data
            .iter()
            .map(|r| r[0].abs())
            .fold(0.0_f64, f64::max);
        let x_max = (6.0 * var.sqrt() + mean.abs() + 2.0).max(data_span + 2.0);
        let n = GRID_POINTS;
        let nodes: Vec<f64> = (0..n)
            .map(|i| -x_max + 2.0 * x_max * i as f64 / (n - 1) as f64)
            .collect();
        let dx = nodes[1] - nodes[0];
        let mut weights = vec![dx; n];
        weights[0] = dx / 2.0;
        weights[n - 1] = dx / 2.0;
        let node_rows: Vec<Vec<f64>> = nodes.iter().map(|&x| vec![x]).collect();
        let node_gram = gram(spec, &node_rows, &node_rows)?;
        let data_gram = gram(spec, &node_rows, data)?;
        Ok(GridQuad { nodes, weights, node_gram, data_gram })
    }

    fn density(&self, circuit: &Circuit) -> Result<Density> {
        match circuit::run(circuit, &self.backend)? {
            CircuitState::Gaussian(g) => {
                if let Some(q) = &self.grid {
                    // quantum kernel over a Gaussian circuit: tabulate
                    let mx = g.mean[0];
                    let vx = g.cov[(0, 0)];
                    let norm = 1.0 / (2.0 * std::f64::consts::PI * vx).sqrt();
                    let pdf = q
                        .nodes
                        .iter()
                        .map(|&x| norm * (-(x - mx).powi(2) / (2.0 * vx)).exp())
                        .collect();
                    Ok(Density::Grid { pdf })
                } else {
                    Ok(Density::Gaussian { mean: g.x_mean(), cov: g.x_cov() })
                }
            }
            CircuitState::Fock(f) => {
                let q = self.grid.as_ref().expect("grid path for fock circuits");
                let pdf = fock::position_wavefunction(&f, 0, &q.nodes)?;
                // renormalize away the (small) truncation loss so the
                // density integrates to one like the true distribution
                let mass: f64 = pdf
                    .iter()
                    .zip(q.weights.iter())
                    .map(|(p, w)| p * w)
                    .sum();
                if mass <= 0.0 {
                    return Err(Error::CorruptedState {
                        context: "simulated density has no mass on the grid".into(),
                    });
                }
                Ok(Density::Grid { pdf: pdf.iter().map(|p| p / mass).collect() })
            }
        }
    }

    /// ⟨κ, ρ_a ⊗ ρ_b⟩ for two exact densities.
    fn cross(&self, a: &Density, b: &Density) -> Result<f64> {
        match (a, b) {
            (Density::Gaussian { mean: m1, cov: s1 }, Density::Gaussian { mean: m2, cov: s2 }) => {
                let sigma = self.sigma();
                Ok(gaussian_pair_integral(sigma, m1, s1, m2, s2))
            }
            (Density::Grid { pdf: pa }, Density::Grid { pdf: pb }) => {
                let q = self.grid.as_ref().unwrap();
                let wa: DVector<f64> = DVector::from_iterator(
                    pa.len(),
                    pa.iter().zip(q.weights.iter()).map(|(p, w)| p * w),
                );
                let wb: DVector<f64> = DVector::from_iterator(
                    pb.len(),
                    pb.iter().zip(q.weights.iter()).map(|(p, w)| p * w),
                );
                Ok((wa.transpose() * &q.node_gram * wb)[(0, 0)])
            }
            _ => unreachable!("densities come from one engine"),
        }
    }

    /// (1/N) Σ_j E_{x∼ρ}[κ(x, y_j)] against the engine's data set.
    fn cross_data(&self, a: &Density) -> Result<f64> {
        match a {
            Density::Gaussian { mean, cov } => {
                let sigma = self.sigma();
                let mut acc = 0.0;
                for row in &self.data {
                    let y = DVector::from_column_slice(row);
                    acc += gaussian_point_integral(sigma, mean, cov, &y);
                }
                Ok(acc / self.data.len() as f64)
            }
            Density::Grid { pdf } => {
                let q = self.grid.as_ref().unwrap();
                let wa: DVector<f64> = DVector::from_iterator(
                    pdf.len(),
                    pdf.iter().zip(q.weights.iter()).map(|(p, w)| p * w),
                );
                let totals = wa.transpose() * &q.data_gram;
                Ok(totals.sum() / self.data.len() as f64)
            }
        }
    }

    fn sigma(&self) -> f64 {
        match self.spec {
            KernelSpec::GaussianRbf { sigma } => sigma,
            _ => unreachable!("closed form only holds for the RBF kernel"),
        }
    }

    /// Exact loss: E_pp + (unbiased data term) − 2·E_pd.
    pub fn loss(&self, circuit: &Circuit) -> Result<f64> {
        let p = self.density(circuit)?;
        Ok(self.cross(&p, &p)? + self.data_term - 2.0 * self.cross_data(&p)?)
    }

    /// Parameter-shift gradient of the exact loss for parameter `k`.
    pub fn shift_gradient(&self, circuit: &Circuit, k: usize, rules: &ShiftRules) -> Result<f64> {
        let (plus, minus, scale) = circuit::shifted_circuits(circuit, k, rules)?;
        let base = self.density(circuit)?;
        let pp = self.density(&plus)?;
        let pm = self.density(&minus)?;
        let combo = self.cross(&pp, &base)? - self.cross(&pm, &base)?
            - self.cross_data(&pp)?
            + self.cross_data(&pm)?;
        Ok(scale * combo)
    }

    /// Central finite difference of the exact loss at step `h`.
    pub fn fd_gradient(&self, circuit: &Circuit, k: usize, h: f64) -> Result<f64> {
        let locs = circuit.param_locations();
        if k >= locs.len() {
            return Err(Error::ParamIndexOutOfRange { index: k, len: locs.len() });
        }
        let (gi, pi) = locs[k];
        let mut up = circuit.clone();
        up.gates[gi].params[pi] += h;
        let mut down = circuit.clone();
        down.gates[gi].params[pi] -= h;
        Ok((self.loss(&up)? - self.loss(&down)?) / (2.0 * h))
    }
}

/// ∫∫ κ_σ(x, y) N(x; m1, S1) N(y; m2, S2) dx dy in closed form:
/// the RBF of the difference of two Gaussians is a Gaussian expectation.
fn gaussian_pair_integral(
    sigma: f64,
    m1: &DVector<f64>,
    s1: &DMatrix<f64>,
    m2: &DVector<f64>,
    s2: &DMatrix<f64>,
) -> f64 {
    let n = m1.len();
    let c = s1 + s2 + DMatrix::<f64>::identity(n, n) * (sigma * sigma);
    let d = m1 - m2;
    let det = c.determinant();
    let inv = c.try_inverse().expect("covariance sum is invertible");
    let quad = (d.transpose() * inv * &d)[(0, 0)];
    sigma.powi(n as i32) / det.sqrt() * (-0.5 * quad).exp()
}

/// E_{x∼N(m,S)}[κ_σ(x, y)] in closed form.
fn gaussian_point_integral(sigma: f64, m: &DVector<f64>, s: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let n = m.len();
    let c = s + DMatrix::<f64>::identity(n, n) * (sigma * sigma);
    let d = m - y;
    let det = c.determinant();
    let inv = c.try_inverse().expect("covariance sum is invertible");
    let quad = (d.transpose() * inv * &d)[(0, 0)];
    sigma.powi(n as i32) / det.sqrt() * (-0.5 * quad).exp()
}

/// Brute-force double-loop oracle for the unbiased estimator; kept as a
/// public oracle so integration tests can cross-check the tiled path.
pub fn mmd_brute_force(spec: &KernelSpec, x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    let (m, n) = (x.len(), y.len());
    if m < 2 || n < 2 {
        return Err(Error::InsufficientSamples { m, n });
    }
    let mut t1 = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                t1 += kernel_value(spec, &x[i], &x[j])?;
            }
        }
    }
    let mut t2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                t2 += kernel_value(spec, &y[i], &y[j])?;
            }
        }
    }
    let mut t3 = 0.0;
    for i in 0..m {
        for j in 0..n {
            t3 += kernel_value(spec, &x[i], &y[j])?;
        }
    }
    Ok(t1 / (m * (m - 1)) as f64 + t2 / (n * (n - 1)) as f64 - 2.0 * t3 / (m * n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn rbf() -> KernelSpec {
        KernelSpec::GaussianRbf { sigma: 1.0 }
    }

    #[test]
    fn two_point_case_matches_hand_enumeration() {
        let x = vec![vec![0.0], vec![1.0]];
        let est = mmd(&rbf(), &x, &x).unwrap();
        // all twelve kernel terms enumerated by hand: e^{−1/2} − 1
        assert_relative_eq!(est.value, (-0.5_f64).exp() - 1.0, epsilon = 1e-15);
    }

    #[test]
    fn estimator_matches_brute_force_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..25 {
            let m = rng.gen_range(2..=20);
            let n = rng.gen_range(2..=20);
            let x: Vec<Vec<f64>> = (0..m)
                .map(|_| vec![rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)])
                .collect();
            let y: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)])
                .collect();
            let fast = mmd(&rbf(), &x, &y).unwrap().value;
            let slow = mmd_brute_force(&rbf(), &x, &y).unwrap();
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn estimator_is_symmetric_in_its_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<Vec<f64>> = (0..7).map(|_| vec![rng.sample::<f64, _>(StandardNormal)]).collect();
        let y: Vec<Vec<f64>> = (0..9).map(|_| vec![rng.sample::<f64, _>(StandardNormal)]).collect();
        let a = mmd(&rbf(), &x, &y).unwrap().value;
        let b = mmd(&rbf(), &y, &x).unwrap().value;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn same_distribution_gives_small_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..10_000).map(|_| vec![rng.sample::<f64, _>(StandardNormal)]).collect()
        };
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let est = mmd(&rbf(), &x, &y).unwrap();
        assert!(est.value.abs() < 0.01, "value {}", est.value);
    }

    #[test]
    fn insufficient_samples_rejected() {
        let x = vec![vec![0.0]];
        let y = vec![vec![0.0], vec![1.0]];
        assert!(matches!(mmd(&rbf(), &x, &y), Err(Error::InsufficientSamples { .. })));
    }

    fn gaussian_data(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| vec![0.3 + 1.2 * rng.sample::<f64, _>(StandardNormal)])
            .collect()
    }

    #[test]
    fn exact_shift_gradient_matches_fd_for_gaussian_gates() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let data = gaussian_data(&mut rng, 40);
        let circuit = Circuit::new(
            1,
            vec![Gate::squeezing(0.4, 0.0, 0), Gate::displacement(0.3, 0.1, 0)],
        )
        .unwrap();
        let engine =
            ExactEngine::new(&circuit, rbf(), data, BackendConfig::default()).unwrap();
        let rules = ShiftRules::verification();
        for k in 0..circuit.param_count() {
            let sg = engine.shift_gradient(&circuit, k, &rules).unwrap();
            let fd = engine.fd_gradient(&circuit, k, 1e-5).unwrap();
            assert!((sg - fd).abs() < 1e-4, "param {k}: shift {sg} vs fd {fd}");
        }
    }

    #[test]
    fn exact_shift_gradient_matches_fd_on_fock_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let data = gaussian_data(&mut rng, 30);
        let circuit = Circuit::new(
            1,
            vec![Gate::squeezing(0.3, 0.0, 0), Gate::cubic_phase(0.15, 0)],
        )
        .unwrap();
        let backend = BackendConfig { fock: crate::fock::FockConfig::new(15).with_norm_floor(0.5), ..Default::default() };
        let engine = ExactEngine::new(&circuit, rbf(), data, backend).unwrap();
        let rules = ShiftRules::verification();
        for k in 0..circuit.param_count() {
            let sg = engine.shift_gradient(&circuit, k, &rules).unwrap();
            let fd = engine.fd_gradient(&circuit, k, 1e-5).unwrap();
            let tol = 1e-3_f64.max(10.0 * rules.small * rules.small);
            assert!((sg - fd).abs() < tol, "param {k}: shift {sg} vs fd {fd}");
        }
    }

    #[test]
    fn rotation_on_symmetric_state_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let data = gaussian_data(&mut rng, 25);
        // rotation acts on the vacuum: distribution is φ-invariant
        let circuit = Circuit::new(1, vec![Gate::rotation(0.7, 0)]).unwrap();
        let engine =
            ExactEngine::new(&circuit, rbf(), data, BackendConfig::default()).unwrap();
        let g = engine
            .shift_gradient(&circuit, 0, &ShiftRules::default())
            .unwrap();
        assert!(g.abs() < 1e-12, "gradient {g}");
    }

    #[test]
    fn sampled_gradient_points_downhill_from_displaced_start() {
        // model displaced to +2, target standard normal: d loss/d re_alpha > 0
        let circuit = Circuit::new(1, vec![Gate::displacement(1.0, 0.0, 0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let data: Vec<Vec<f64>> = (0..400)
            .map(|_| vec![rng.sample::<f64, _>(StandardNormal)])
            .collect();
        let x = circuit::sample(&circuit, 400, &mut rng, &[], &BackendConfig::default(), None)
            .unwrap();
        let grad = mmd_gradient(
            &circuit,
            &rbf(),
            &x,
            &data,
            200,
            200,
            &mut rng,
            &[],
            &BackendConfig::default(),
            &ShiftRules::default(),
        )
        .unwrap();
        assert!(grad.values[0] > 0.0, "gradient {:?}", grad.values);
        assert_eq!(grad.meta[0].scale, 10.0);
    }
}

//! Exact phase-space simulation of Gaussian circuits.
//!
//! States carry a mean vector and covariance matrix in xxpp ordering
//! (x₁…x_n, p₁…p_n); Gaussian gates act as symplectic maps on both, the
//! loss channel as a convex contraction toward the vacuum, and homodyne
//! sampling draws jointly from the x-block marginal.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::circuit::{Gate, GateKind};
use crate::error::{Error, Result};

const MODULE: &str = "gaussian";

/// Gaussian state of `n_modes` qumodes in xxpp quadrature ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub n_modes: usize,
    pub hbar: f64,
}

/// Single-mode loss channel with energy transmissivity T ∈ [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossChannel {
    pub transmissivity: f64,
    pub mode: usize,
}

impl LossChannel {
    pub fn validate(&self, n_modes: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.transmissivity) {
            return Err(Error::InvalidParameter {
                module: MODULE,
                name: "transmissivity",
                reason: format!("must lie in [0, 1], got {}", self.transmissivity),
            });
        }
        if self.mode >= n_modes {
            return Err(Error::InvalidModes {
                module: MODULE,
                modes: vec![self.mode],
                n_modes,
            });
        }
        Ok(())
    }
}

/// The standard symplectic form Ω = [[0, I], [−I, 0]] in xxpp ordering.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let n = n_modes;
    let mut omega = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        omega[(i, n + i)] = 1.0;
        omega[(n + i, i)] = -1.0;
    }
    omega
}

/// The n-mode vacuum: zero mean, covariance (ħ/2)·I.
pub fn vacuum(n_modes: usize, hbar: f64) -> Result<GaussianState> {
    if n_modes == 0 {
        return Err(Error::InvalidParameter {
            module: MODULE,
            name: "n_modes",
            reason: "must be at least 1".into(),
        });
    }
    if !(hbar > 0.0) {
        return Err(Error::InvalidParameter {
            module: MODULE,
            name: "hbar",
            reason: format!("must be positive, got {hbar}"),
        });
    }
    Ok(GaussianState {
        mean: DVector::zeros(2 * n_modes),
        cov: DMatrix::identity(2 * n_modes, 2 * n_modes) * (hbar / 2.0),
        n_modes,
        hbar,
    })
}

impl GaussianState {
    /// Mean of the x quadratures.
    pub fn x_mean(&self) -> DVector<f64> {
        DVector::from_fn(self.n_modes, |i, _| self.mean[i])
    }

    /// Covariance of the x quadratures.
    pub fn x_cov(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_modes, self.n_modes, |i, j| self.cov[(i, j)])
    }

    /// Checks symmetry, positive definiteness, and the uncertainty relation
    /// (the Hermitian matrix cov + i(ħ/2)Ω must be positive semidefinite).
    pub fn check_valid(&self) -> Result<()> {
        let n2 = 2 * self.n_modes;
        for i in 0..n2 {
            for j in 0..n2 {
                if (self.cov[(i, j)] - self.cov[(j, i)]).abs() > 1e-10 {
                    return Err(Error::CorruptedState {
                        context: format!("covariance not symmetric at ({i}, {j})"),
                    });
                }
            }
        }
        let evals = crate::linalg::symmetric_eigenvalues(&self.cov);
        if evals[0] <= 0.0 {
            return Err(Error::CorruptedState {
                context: format!("covariance not positive definite (min eig {})", evals[0]),
            });
        }
        let omega = symplectic_form(self.n_modes).map(|v| Complex64::new(0.0, v * self.hbar / 2.0));
        let herm = self.cov.map(|v| Complex64::new(v, 0.0)) + omega;
        let hvals = crate::linalg::hermitian_eigenvalues(&herm);
        if hvals[0] < -1e-9 {
            return Err(Error::CorruptedState {
                context: format!("uncertainty relation violated (min eig {})", hvals[0]),
            });
        }
        Ok(())
    }
}

/// Local symplectic matrix and displacement of a Gaussian gate. Single-mode
/// gates return a 2×2 block in (x, p); the beamsplitter a 4×4 block in
/// (x_a, x_b, p_a, p_b).
pub fn gate_symplectic(gate: &Gate, hbar: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    match gate.kind {
        GateKind::Rotation => {
            let phi = gate.params[0];
            let (s, c) = phi.sin_cos();
            let m = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
            Ok((m, DVector::zeros(2)))
        }
        GateKind::Displacement => {
            let scale = (2.0 * hbar).sqrt();
            let d = DVector::from_column_slice(&[scale * gate.params[0], scale * gate.params[1]]);
            Ok((DMatrix::identity(2, 2), d))
        }
        GateKind::Squeezing => {
            let (r, phi) = (gate.params[0], gate.params[1]);
            let (ch, sh) = (r.cosh(), r.sinh());
            let (sp, cp) = phi.sin_cos();
            let m = DMatrix::from_row_slice(
                2,
                2,
                &[ch - sh * cp, -sh * sp, -sh * sp, ch + sh * cp],
            );
            Ok((m, DVector::zeros(2)))
        }
        GateKind::Beamsplitter => {
            let (theta, phi) = (gate.params[0], gate.params[1]);
            let (s, c) = theta.sin_cos();
            let (sp, cp) = phi.sin_cos();
            #[rustfmt::skip]
            let m = DMatrix::from_row_slice(4, 4, &[
                c,        s * cp,  0.0,     -s * sp,
                -s * cp,  c,       -s * sp,  0.0,
                0.0,      s * sp,  c,        s * cp,
                s * sp,   0.0,     -s * cp,  c,
            ]);
            Ok((m, DVector::zeros(4)))
        }
        GateKind::CubicPhase => Err(Error::NonGaussianGate { gate: "CubicPhase" }),
        GateKind::Kerr => Err(Error::NonGaussianGate { gate: "Kerr" }),
    }
}

/// Embeds a local symplectic block into the full 2n×2n matrix.
fn embed(n_modes: usize, local: &DMatrix<f64>, local_disp: &DVector<f64>, modes: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let idx: Vec<usize> = match modes {
        [m] => vec![*m, n_modes + m],
        [a, b] => vec![*a, *b, n_modes + a, n_modes + b],
        _ => unreachable!(),
    };
    let mut full = DMatrix::<f64>::identity(2 * n_modes, 2 * n_modes);
    let mut disp = DVector::<f64>::zeros(2 * n_modes);
    for (i, &gi) in idx.iter().enumerate() {
        disp[gi] = local_disp[i];
        for (j, &gj) in idx.iter().enumerate() {
            full[(gi, gj)] = local[(i, j)];
        }
    }
    (full, disp)
}

/// Applies a Gaussian gate's symplectic action: mean ← M·mean + β,
/// cov ← M·cov·Mᵀ.
pub fn apply_symplectic(state: &GaussianState, gate: &Gate, modes: &[usize]) -> Result<GaussianState> {
    if modes.len() != gate.kind.arity()
        || modes.iter().any(|&m| m >= state.n_modes)
        || (modes.len() == 2 && modes[0] == modes[1])
    {
        return Err(Error::InvalidModes {
            module: MODULE,
            modes: modes.to_vec(),
            n_modes: state.n_modes,
        });
    }
    let (local, local_disp) = gate_symplectic(gate, state.hbar)?;
    let (m, disp) = embed(state.n_modes, &local, &local_disp, modes);
    Ok(GaussianState {
        mean: &m * &state.mean + disp,
        cov: &m * &state.cov * m.transpose(),
        n_modes: state.n_modes,
        hbar: state.hbar,
    })
}

/// Loss channel on one mode: mean ← √T·mean, cov ← T·cov + (1−T)(ħ/2)I on
/// the mode's quadratures (cross terms scale by √T). T = 1 is the identity
/// map, bit for bit.
pub fn apply_loss(state: &GaussianState, channel: &LossChannel) -> Result<GaussianState> {
    channel.validate(state.n_modes)?;
    let t = channel.transmissivity;
    if t == 1.0 {
        return Ok(state.clone());
    }
    let n = state.n_modes;
    let rt = t.sqrt();
    let mut scale = DVector::from_element(2 * n, 1.0);
    scale[channel.mode] = rt;
    scale[n + channel.mode] = rt;
    let mut mean = state.mean.clone();
    let mut cov = state.cov.clone();
    for i in 0..2 * n {
        mean[i] *= scale[i];
        for j in 0..2 * n {
            cov[(i, j)] *= scale[i] * scale[j];
        }
    }
    let vac = (1.0 - t) * state.hbar / 2.0;
    cov[(channel.mode, channel.mode)] += vac;
    cov[(n + channel.mode, n + channel.mode)] += vac;
    Ok(GaussianState { mean, cov, n_modes: n, hbar: state.hbar })
}

/// Homodyne at measurement angle φ on one mode, realized by prepending a
/// rotation R(−φ) to that mode and then reading the x quadrature. This is a
/// convenience wrapper, not a separate measurement model.
pub fn homodyne_sample_at_angle<R: Rng + ?Sized>(
    state: &GaussianState,
    mode: usize,
    phi: f64,
    rng: &mut R,
    count: usize,
) -> Result<Vec<f64>> {
    let rotated = apply_symplectic(state, &Gate::rotation(-phi, mode), &[mode])?;
    let samples = homodyne_sample(&rotated, rng, count)?;
    Ok(samples.into_iter().map(|row| row[mode]).collect())
}

/// Draws `count` joint x-quadrature samples (rows) from the Gaussian
/// marginal, via Cholesky factorization of the x-block.
pub fn homodyne_sample<R: Rng + ?Sized>(
    state: &GaussianState,
    rng: &mut R,
    count: usize,
) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::InvalidParameter {
            module: MODULE,
            name: "count",
            reason: "must be at least 1".into(),
        });
    }
    let n = state.n_modes;
    let mx = state.x_mean();
    let sx = state.x_cov();
    let chol = nalgebra::Cholesky::new(sx).ok_or_else(|| Error::CorruptedState {
        context: "x covariance block is not positive definite".into(),
    })?;
    let l = chol.l();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let z = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
        let x = &mx + &l * z;
        out.push(x.iter().copied().collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vacuum_has_unit_cov_at_hbar_two() {
        let v = vacuum(1, 2.0).unwrap();
        assert_eq!(v.mean, DVector::from_column_slice(&[0.0, 0.0]));
        assert_eq!(v.cov, DMatrix::identity(2, 2));
        let v3 = vacuum(3, 2.0).unwrap();
        assert_eq!(v3.cov, DMatrix::identity(6, 6));
        let vh = vacuum(1, 1.0).unwrap();
        assert_eq!(vh.cov, DMatrix::identity(2, 2) * 0.5);
    }

    #[test]
    fn gate_symplectics_preserve_omega() {
        let gates = [
            Gate::rotation(0.7, 0),
            Gate::squeezing(0.5, 1.1, 0),
            Gate::beamsplitter(0.4, 0.9, 0, 1),
        ];
        for g in gates {
            let (m, _) = gate_symplectic(&g, 2.0).unwrap();
            let n = m.nrows() / 2;
            let omega = symplectic_form(n);
            let check = &m * &omega * m.transpose() - &omega;
            assert!(check.iter().all(|v| v.abs() < 1e-10), "{:?}", g.kind);
        }
    }

    #[test]
    fn displacement_moves_the_mean() {
        let v = vacuum(1, 2.0).unwrap();
        let st = apply_symplectic(&v, &Gate::displacement(1.0, 0.0, 0), &[0]).unwrap();
        assert_relative_eq!(st.mean[0], 2.0);
        assert_relative_eq!(st.mean[1], 0.0);
        assert_eq!(st.cov, v.cov);
    }

    #[test]
    fn squeezing_scales_quadratures() {
        let v = vacuum(1, 2.0).unwrap();
        let st = apply_symplectic(&v, &Gate::squeezing(2.0_f64.ln(), 0.0, 0), &[0]).unwrap();
        assert_relative_eq!(st.cov[(0, 0)], 0.25, epsilon = 1e-14);
        assert_relative_eq!(st.cov[(1, 1)], 4.0, epsilon = 1e-14);
    }

    #[test]
    fn rotation_leaves_vacuum_unchanged() {
        let v = vacuum(2, 2.0).unwrap();
        let st = apply_symplectic(&v, &Gate::rotation(1.3, 1), &[1]).unwrap();
        assert!((st.mean - &v.mean).iter().all(|d| d.abs() < 1e-15));
        assert!((st.cov - &v.cov).iter().all(|d| d.abs() < 1e-14));
    }

    #[test]
    fn nongaussian_gates_are_rejected() {
        let v = vacuum(1, 2.0).unwrap();
        assert!(matches!(
            apply_symplectic(&v, &Gate::cubic_phase(0.1, 0), &[0]),
            Err(Error::NonGaussianGate { .. })
        ));
        assert!(matches!(
            apply_symplectic(&v, &Gate::kerr(0.1, 0), &[0]),
            Err(Error::NonGaussianGate { .. })
        ));
    }

    #[test]
    fn loss_identity_and_vacuum_limits() {
        let v = vacuum(1, 2.0).unwrap();
        let sq = apply_symplectic(&v, &Gate::squeezing(0.8, 0.0, 0), &[0]).unwrap();
        let same = apply_loss(&sq, &LossChannel { transmissivity: 1.0, mode: 0 }).unwrap();
        assert_eq!(same, sq);
        let dead = apply_loss(&sq, &LossChannel { transmissivity: 0.0, mode: 0 }).unwrap();
        assert_eq!(dead.mean, v.mean);
        assert_eq!(dead.cov, v.cov);
    }

    #[test]
    fn loss_halves_squeezed_variance_per_rule() {
        let v = vacuum(1, 2.0).unwrap();
        let r = 0.6;
        let sq = apply_symplectic(&v, &Gate::squeezing(r, 0.0, 0), &[0]).unwrap();
        let lossy = apply_loss(&sq, &LossChannel { transmissivity: 0.5, mode: 0 }).unwrap();
        let want = 0.5 * (-2.0 * r).exp() + 0.5;
        assert_relative_eq!(lossy.cov[(0, 0)], want, epsilon = 1e-14);
    }

    #[test]
    fn loss_composes_as_a_semigroup() {
        let v = vacuum(2, 2.0).unwrap();
        let st = apply_symplectic(&v, &Gate::squeezing(0.5, 0.4, 1), &[1]).unwrap();
        let st = apply_symplectic(&st, &Gate::displacement(0.3, -0.2, 1), &[1]).unwrap();
        let a = apply_loss(
            &apply_loss(&st, &LossChannel { transmissivity: 0.8, mode: 1 }).unwrap(),
            &LossChannel { transmissivity: 0.6, mode: 1 },
        )
        .unwrap();
        let b = apply_loss(&st, &LossChannel { transmissivity: 0.48, mode: 1 }).unwrap();
        assert!((a.mean - b.mean).iter().all(|d| d.abs() < 1e-10));
        assert!((a.cov - b.cov).iter().all(|d| d.abs() < 1e-10));
    }

    #[test]
    fn homodyne_statistics_match_moments() {
        let v = vacuum(1, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = 100_000;
        let samples = homodyne_sample(&v, &mut rng, m).unwrap();
        let mean: f64 = samples.iter().map(|r| r[0]).sum::<f64>() / m as f64;
        let var: f64 = samples.iter().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / m as f64;
        assert!(mean.abs() < 4.0 / (m as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn homodyne_respects_displacement_and_squeezing() {
        let v = vacuum(1, 2.0).unwrap();
        let disp = apply_symplectic(&v, &Gate::displacement(1.0, 0.0, 0), &[0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = 50_000;
        let s1 = homodyne_sample(&disp, &mut rng, m).unwrap();
        let mean: f64 = s1.iter().map(|r| r[0]).sum::<f64>() / m as f64;
        assert!((mean - 2.0).abs() < 0.03, "mean {mean}");

        let sq = apply_symplectic(&v, &Gate::squeezing(2.0_f64.ln(), 0.0, 0), &[0]).unwrap();
        let s2 = homodyne_sample(&sq, &mut rng, m).unwrap();
        let mu: f64 = s2.iter().map(|r| r[0]).sum::<f64>() / m as f64;
        let var: f64 = s2.iter().map(|r| (r[0] - mu).powi(2)).sum::<f64>() / m as f64;
        assert!((var - 0.25).abs() < 0.0125, "var {var}");
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let v = vacuum(2, 2.0).unwrap();
        let a = homodyne_sample(&v, &mut ChaCha8Rng::seed_from_u64(9), 16).unwrap();
        let b = homodyne_sample(&v, &mut ChaCha8Rng::seed_from_u64(9), 16).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validity_check_passes_after_random_gates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        use rand::Rng as _;
        for _ in 0..100 {
            let mut st = vacuum(2, 2.0).unwrap();
            for _ in 0..6 {
                let pick: u8 = rng.gen_range(0..5);
                let (gate, modes): (Gate, Vec<usize>) = match pick {
                    0 => (Gate::rotation(rng.gen_range(0.0..6.28), 0), vec![0]),
                    1 => (Gate::squeezing(rng.gen_range(-0.8..0.8), rng.gen_range(0.0..6.28), 1), vec![1]),
                    2 => (Gate::displacement(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0), vec![0]),
                    3 => (Gate::beamsplitter(rng.gen_range(0.0..6.28), rng.gen_range(0.0..6.28), 0, 1), vec![0, 1]),
                    _ => {
                        st = apply_loss(
                            &st,
                            &LossChannel { transmissivity: rng.gen_range(0.0..1.0), mode: rng.gen_range(0..2) },
                        )
                        .unwrap();
                        continue;
                    }
                };
                st = apply_symplectic(&st, &gate, &modes).unwrap();
            }
            st.check_valid().unwrap();
        }
    }
}

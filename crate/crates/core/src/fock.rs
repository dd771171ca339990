//! Truncated Fock-space backend.
//!
//! States are complex amplitude tensors over a photon-number basis cut off
//! at `cutoff` levels per mode. Gate matrices are the truncation of the
//! exact infinite-dimensional unitaries (not exponentials of truncated
//! generators), so probability amplitude genuinely leaks past the cutoff;
//! the leak is tracked through the state norm and surfaced as an error once
//! it crosses `norm_floor` instead of being renormalized away, because
//! sampling from a renormalized state would silently bias the statistics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::circuit::{Gate, GateKind};
use crate::error::{Error, Result};
use crate::linalg::{expm, max_abs_diff, unitarity_deviation};

const MODULE: &str = "fock";

/// Truncation and convention parameters for Fock-space simulation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FockConfig {
    /// Number of retained Fock levels per mode (truncation dimension).
    pub cutoff: usize,
    /// Convention constant; `hbar = 2` makes the vacuum quadrature variance 1.
    pub hbar: f64,
    /// Minimum tolerated squared state norm after truncation losses.
    pub norm_floor: f64,
}

impl Default for FockConfig {
    fn default() -> Self {
        FockConfig { cutoff: 7, hbar: 2.0, norm_floor: 0.99 }
    }
}

impl FockConfig {
    pub fn new(cutoff: usize) -> Self {
        FockConfig { cutoff, ..Default::default() }
    }

    pub fn with_norm_floor(mut self, floor: f64) -> Self {
        self.norm_floor = floor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.cutoff < 2 {
            return Err(Error::InvalidParameter {
                module: MODULE,
                name: "cutoff",
                reason: format!("must be at least 2, got {}", self.cutoff),
            });
        }
        if !(self.hbar > 0.0) {
            return Err(Error::InvalidParameter {
                module: MODULE,
                name: "hbar",
                reason: format!("must be positive, got {}", self.hbar),
            });
        }
        if !(self.norm_floor > 0.0 && self.norm_floor <= 1.0) {
            return Err(Error::InvalidParameter {
                module: MODULE,
                name: "norm_floor",
                reason: format!("must lie in (0, 1], got {}", self.norm_floor),
            });
        }
        Ok(())
    }
}

/// Pure n-mode state as a flat amplitude tensor, mode 0 slowest index.
#[derive(Debug, Clone)]
pub struct FockState {
    pub amplitudes: Vec<Complex64>,
    pub n_modes: usize,
    pub config: FockConfig,
}

impl FockState {
    /// |0…0⟩ on `n_modes` modes.
    pub fn vacuum(n_modes: usize, config: FockConfig) -> Result<Self> {
        config.validate()?;
        if n_modes == 0 {
            return Err(Error::InvalidParameter {
                module: MODULE,
                name: "n_modes",
                reason: "must be at least 1".into(),
            });
        }
        let len = config.cutoff.pow(n_modes as u32);
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); len];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(FockState { amplitudes, n_modes, config })
    }

    pub fn squared_norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    fn stride(&self, mode: usize) -> usize {
        self.config.cutoff.pow((self.n_modes - 1 - mode) as u32)
    }

    fn check_modes(&self, modes: &[usize]) -> Result<()> {
        let distinct = modes.len() == 1 || modes[0] != modes[1];
        if !distinct || modes.iter().any(|&m| m >= self.n_modes) {
            return Err(Error::InvalidModes {
                module: MODULE,
                modes: modes.to_vec(),
                n_modes: self.n_modes,
            });
        }
        Ok(())
    }

    /// Offsets of all index combinations with the given modes held at zero.
    fn base_offsets(&self, held: &[usize]) -> Vec<usize> {
        let d = self.config.cutoff;
        let others: Vec<usize> =
            (0..self.n_modes).filter(|m| !held.contains(m)).collect();
        let count = d.pow(others.len() as u32);
        let mut bases = Vec::with_capacity(count);
        for mut idx in 0..count {
            let mut off = 0;
            for &mode in others.iter().rev() {
                off += (idx % d) * self.stride(mode);
                idx /= d;
            }
            bases.push(off);
        }
        bases
    }

    fn apply_one_mode(&mut self, u: &DMatrix<Complex64>, mode: usize) {
        let d = self.config.cutoff;
        let s = self.stride(mode);
        let mut scratch = vec![Complex64::new(0.0, 0.0); d];
        for base in self.base_offsets(&[mode]) {
            for (i, slot) in scratch.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..d {
                    acc += u[(i, j)] * self.amplitudes[base + j * s];
                }
                *slot = acc;
            }
            for (i, v) in scratch.iter().enumerate() {
                self.amplitudes[base + i * s] = *v;
            }
        }
    }

    fn apply_two_mode(&mut self, u: &DMatrix<Complex64>, m0: usize, m1: usize) {
        let d = self.config.cutoff;
        let (s0, s1) = (self.stride(m0), self.stride(m1));
        let dd = d * d;
        let mut gathered = vec![Complex64::new(0.0, 0.0); dd];
        let mut scratch = vec![Complex64::new(0.0, 0.0); dd];
        for base in self.base_offsets(&[m0, m1]) {
            for i0 in 0..d {
                for i1 in 0..d {
                    gathered[i0 * d + i1] = self.amplitudes[base + i0 * s0 + i1 * s1];
                }
            }
            for (i, slot) in scratch.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..dd {
                    acc += u[(i, j)] * gathered[j];
                }
                *slot = acc;
            }
            for i0 in 0..d {
                for i1 in 0..d {
                    self.amplitudes[base + i0 * s0 + i1 * s1] = scratch[i0 * d + i1];
                }
            }
        }
    }

    /// Reduced density matrix of one mode, tracing out the rest.
    /// Not renormalized; its trace equals the squared state norm.
    pub fn reduced_density(&self, mode: usize) -> Result<DMatrix<Complex64>> {
        self.check_modes(&[mode])?;
        let d = self.config.cutoff;
        let s = self.stride(mode);
        let mut rho = DMatrix::<Complex64>::zeros(d, d);
        for base in self.base_offsets(&[mode]) {
            for m in 0..d {
                let am = self.amplitudes[base + m * s];
                if am == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for mp in 0..d {
                    rho[(m, mp)] += am * self.amplitudes[base + mp * s].conj();
                }
            }
        }
        Ok(rho)
    }

    /// Mean and variance of the position quadrature of one mode.
    pub fn position_moments(&self, mode: usize) -> Result<(f64, f64)> {
        let rho = self.reduced_density(mode)?;
        let trace: f64 = (0..rho.nrows()).map(|i| rho[(i, i)].re).sum();
        if trace <= 0.0 {
            return Err(Error::CorruptedState {
                context: "reduced density has non-positive trace".into(),
            });
        }
        let x = position_operator(&self.config);
        let xc = x.map(|v| Complex64::new(v, 0.0));
        let x2 = &xc * &xc;
        let mean = (&rho * &xc).trace().re / trace;
        let second = (&rho * &x2).trace().re / trace;
        Ok((mean, (second - mean * mean).max(0.0)))
    }
}

/// Dense operator on the truncated space, with its unitarity deviation.
#[derive(Debug, Clone)]
pub struct FockOperator {
    pub matrix: DMatrix<Complex64>,
    /// 1 for single-mode operators, 2 for two-mode (D²×D² matrix).
    pub arity: usize,
    /// Max entry of |M†M − I|: how far truncation pushed M from unitary.
    pub is_unitary_within: f64,
}

impl FockOperator {
    fn new(matrix: DMatrix<Complex64>, arity: usize) -> Self {
        let dev = unitarity_deviation(&matrix);
        FockOperator { matrix, arity, is_unitary_within: dev }
    }
}

/// Annihilation and creation operators (â, â†) with â|n⟩ = √n |n−1⟩.
pub fn ladder_operators(config: &FockConfig) -> Result<(FockOperator, FockOperator)> {
    config.validate()?;
    let d = config.cutoff;
    let mut a = DMatrix::<Complex64>::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    let adag = a.adjoint();
    Ok((FockOperator::new(a, 1), FockOperator::new(adag, 1)))
}

/// Position operator x̂ = √(ħ/2)(â + â†); real symmetric tridiagonal.
pub fn position_operator(config: &FockConfig) -> DMatrix<f64> {
    let d = config.cutoff;
    let scale = (config.hbar / 2.0).sqrt();
    let mut x = DMatrix::<f64>::zeros(d, d);
    for n in 1..d {
        let v = scale * (n as f64).sqrt();
        x[(n - 1, n)] = v;
        x[(n, n - 1)] = v;
    }
    x
}

/// Orthonormal Hermite functions h_0..h_{d−1} at `x`, by the stable
/// three-term recurrence on the functions themselves.
pub fn hermite_functions(x: f64, d: usize, hbar: f64) -> DVector<f64> {
    let mut h = DVector::<f64>::zeros(d);
    let norm0 = (std::f64::consts::PI * hbar).powf(-0.25);
    h[0] = norm0 * (-x * x / (2.0 * hbar)).exp();
    if d > 1 {
        let y = x * (2.0 / hbar).sqrt();
        h[1] = y * h[0];
        for m in 1..(d - 1) {
            h[m + 1] = (y * h[m] - (m as f64).sqrt() * h[m - 1]) / ((m + 1) as f64).sqrt();
        }
    }
    h
}

fn rotation_matrix(phi: f64, d: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            Complex64::from_polar(1.0, phi * i as f64)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn kerr_matrix(kappa: f64, d: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            Complex64::from_polar(1.0, kappa * (i * i) as f64)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// ⟨m|D(α)|n⟩ for m, n < d, by the exact two-term recurrence: the top row is
/// the conjugated coherent expansion of D(−α)|0⟩ and each next row follows
/// from â D(α) = D(α)(â + α).
pub fn displacement_matrix(alpha: Complex64, d: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    m[(0, 0)] = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 1..d {
        m[(0, n)] = m[(0, n - 1)] * (-alpha.conj()) / (n as f64).sqrt();
    }
    for row in 0..(d - 1) {
        for n in 0..d {
            let mut v = alpha * m[(row, n)];
            if n > 0 {
                v += (n as f64).sqrt() * m[(row, n - 1)];
            }
            m[(row + 1, n)] = v / ((row + 1) as f64).sqrt();
        }
    }
    m
}

/// ⟨m|S(ζ)|n⟩ for ζ = r·e^{iθ}, S(ζ) = exp[(ζ*â² − ζâ†²)/2], by the exact
/// two-index recurrence for squeezed number states.
pub fn squeezing_matrix(r: f64, theta: f64, d: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    if r == 0.0 {
        return DMatrix::identity(d, d);
    }
    let sech = 1.0 / r.cosh();
    let forward = -Complex64::from_polar(r.tanh(), theta);
    let backward = Complex64::from_polar(r.tanh(), -theta);
    m[(0, 0)] = Complex64::new(sech.sqrt(), 0.0);
    let mut row = 2;
    while row < d {
        let f = ((row - 1) as f64 / row as f64).sqrt();
        m[(row, 0)] = forward * f * m[(row - 2, 0)];
        row += 2;
    }
    for n in 1..d {
        for mm in 0..d {
            if (mm + n) % 2 != 0 {
                continue;
            }
            let mut v = Complex64::new(0.0, 0.0);
            if mm >= 1 {
                v += Complex64::new(sech * (mm as f64 / n as f64).sqrt(), 0.0)
                    * m[(mm - 1, n - 1)];
            }
            if n >= 2 {
                v += backward * ((n - 1) as f64 / n as f64).sqrt() * m[(mm, n - 2)];
            }
            m[(mm, n)] = v;
        }
    }
    m
}

/// Two-mode beamsplitter exp[θ(e^{iφ}â†b̂ − e^{−iφ}âb̂†)] as a D²×D² matrix,
/// row index m_a·D + m_b. Photon number is conserved, so the exponential is
/// evaluated exactly inside each total-photon sector and then projected onto
/// per-mode occupations below the cutoff.
pub fn beamsplitter_matrix(theta: f64, phi: f64, d: usize) -> DMatrix<Complex64> {
    let dd = d * d;
    let mut u = DMatrix::<Complex64>::zeros(dd, dd);
    let eip = Complex64::from_polar(1.0, phi);
    for total in 0..=(2 * (d - 1)) {
        let dim = total + 1;
        let mut g = DMatrix::<Complex64>::zeros(dim, dim);
        for k in 0..dim {
            // column k is the image of |k, total−k⟩
            if k + 1 < dim {
                let amp = theta * (((k + 1) * (total - k)) as f64).sqrt();
                g[(k + 1, k)] = eip * amp;
            }
            if k >= 1 {
                let amp = theta * ((k * (total - k + 1)) as f64).sqrt();
                g[(k - 1, k)] = -eip.conj() * amp;
            }
        }
        let sector = expm(&g);
        for k in 0..dim {
            if k >= d || total - k >= d {
                continue;
            }
            for l in 0..dim {
                if l >= d || total - l >= d {
                    continue;
                }
                u[(k * d + (total - k), l * d + (total - l))] = sector[(k, l)];
            }
        }
    }
    u
}

/// Eigendecomposition of x̂³ on an enlarged internal space, reused to build
/// cubic-phase unitaries for any strength γ cheaply.
pub struct CubicBasis {
    dim: usize,
    vecs: DMatrix<f64>,
    vals: DVector<f64>,
}

impl CubicBasis {
    pub fn new(dim: usize, hbar: f64) -> Self {
        let cfg = FockConfig { cutoff: dim, hbar, norm_floor: 1e-12 };
        let x = position_operator(&cfg);
        let x3 = &x * &x * &x;
        let eig = nalgebra::SymmetricEigen::new(x3);
        CubicBasis { dim, vecs: eig.eigenvectors, vals: eig.eigenvalues }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Top-left d×d corner of exp(i·coeff·x̂³) on the internal space.
    pub fn corner(&self, coeff: f64, d: usize) -> DMatrix<Complex64> {
        assert!(d <= self.dim);
        let phases: Vec<Complex64> = self
            .vals
            .iter()
            .map(|&lam| Complex64::from_polar(1.0, coeff * lam))
            .collect();
        let mut out = DMatrix::<Complex64>::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, ph) in phases.iter().enumerate() {
                    acc += self.vecs[(i, k)] * self.vecs[(j, k)] * ph;
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// First d entries of exp(i·coeff·x̂³)|0⟩ on the internal space.
    pub fn column0(&self, coeff: f64, d: usize) -> DVector<Complex64> {
        assert!(d <= self.dim);
        let mut out = DVector::<Complex64>::zeros(d);
        for (k, &lam) in self.vals.iter().enumerate() {
            let ph = Complex64::from_polar(1.0, coeff * lam) * self.vecs[(0, k)];
            for i in 0..d {
                out[i] += self.vecs[(i, k)] * ph;
            }
        }
        out
    }
}

/// Builds cubic-phase matrices V(γ) = exp[iγx̂³/(3ħ)], escalating the
/// internal dimension until the projected corner stabilizes.
///
/// The generator coefficient follows the ħ-aware convention γ/(3ħ); an
/// alternative convention exp[iγx̂³/6] that is independent of ħ appears in
/// parts of the literature and is recovered here exactly when ħ = 2.
///
/// Eigendecompositions of x̂³ are shared process-wide: they depend only on
/// the internal dimension and ħ, not on γ.
pub struct CubicBuilder {
    hbar: f64,
}

const CUBIC_MAX_DIM: usize = 512;
const CUBIC_CORNER_TOL: f64 = 1e-9;

fn cubic_basis(dim: usize, hbar: f64) -> std::sync::Arc<CubicBasis> {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<CubicBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (dim, hbar.to_bits());
    if let Some(b) = cache.lock().unwrap().get(&key) {
        return Arc::clone(b);
    }
    let basis = Arc::new(CubicBasis::new(dim, hbar));
    cache.lock().unwrap().insert(key, Arc::clone(&basis));
    basis
}

impl CubicBuilder {
    pub fn new(hbar: f64) -> Self {
        CubicBuilder { hbar }
    }

    pub fn matrix(&mut self, gamma: f64, d: usize) -> DMatrix<Complex64> {
        let coeff = gamma / (3.0 * self.hbar);
        let mut dim = (2 * d + 16).max(32);
        let mut corner = cubic_basis(dim, self.hbar).corner(coeff, d);
        while dim * 2 <= CUBIC_MAX_DIM {
            dim *= 2;
            let next = cubic_basis(dim, self.hbar).corner(coeff, d);
            let delta = max_abs_diff(&corner, &next);
            corner = next;
            if delta < CUBIC_CORNER_TOL {
                break;
            }
        }
        corner
    }

    /// Feature-map column V(γ)|0⟩ truncated to d entries, with the same
    /// internal-dimension escalation as [`Self::matrix`].
    pub fn vacuum_column(&mut self, gamma: f64, d: usize) -> DVector<Complex64> {
        let coeff = gamma / (3.0 * self.hbar);
        let mut dim = (2 * d + 16).max(32);
        let mut col = cubic_basis(dim, self.hbar).column0(coeff, d);
        while dim * 2 <= CUBIC_MAX_DIM {
            dim *= 2;
            let next = cubic_basis(dim, self.hbar).column0(coeff, d);
            let delta = (&col - &next).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
            col = next;
            if delta < CUBIC_CORNER_TOL {
                break;
            }
        }
        col
    }
}

/// Unitary (within truncation) for one gate, per the operator conventions
/// above. Rotation and Kerr are exact diagonals; displacement and squeezing
/// use exact matrix-element recurrences; the beamsplitter uses exact sector
/// exponentials; the cubic phase uses an enlarged-space exponential.
pub fn gate_unitary(gate: &Gate, config: &FockConfig) -> Result<FockOperator> {
    config.validate()?;
    let d = config.cutoff;
    let op = match gate.kind {
        GateKind::Rotation => FockOperator::new(rotation_matrix(gate.params[0], d), 1),
        GateKind::Kerr => FockOperator::new(kerr_matrix(gate.params[0], d), 1),
        GateKind::Displacement => {
            let alpha = Complex64::new(gate.params[0], gate.params[1]);
            FockOperator::new(displacement_matrix(alpha, d), 1)
        }
        GateKind::Squeezing => {
            FockOperator::new(squeezing_matrix(gate.params[0], gate.params[1], d), 1)
        }
        GateKind::Beamsplitter => {
            FockOperator::new(beamsplitter_matrix(gate.params[0], gate.params[1], d), 2)
        }
        GateKind::CubicPhase => {
            let mut builder = CubicBuilder::new(config.hbar);
            FockOperator::new(builder.matrix(gate.params[0], d), 1)
        }
    };
    Ok(op)
}

/// Applies a gate to the given modes. The state keeps whatever norm the
/// truncated unitary leaves it with; an error is raised when the squared
/// norm drops below the configured floor.
pub fn apply_gate(state: &FockState, gate: &Gate, modes: &[usize]) -> Result<FockState> {
    if modes.len() != gate.kind.arity() {
        return Err(Error::InvalidModes {
            module: MODULE,
            modes: modes.to_vec(),
            n_modes: state.n_modes,
        });
    }
    state.check_modes(modes)?;
    let op = gate_unitary(gate, &state.config)?;
    let mut next = state.clone();
    match op.arity {
        1 => next.apply_one_mode(&op.matrix, modes[0]),
        2 => next.apply_two_mode(&op.matrix, modes[0], modes[1]),
        _ => unreachable!(),
    }
    let norm = next.squared_norm();
    if norm < state.config.norm_floor {
        return Err(Error::TruncationLeakage { norm, floor: state.config.norm_floor });
    }
    Ok(next)
}

/// ⟨a|b⟩, conjugate-linear in the first argument.
pub fn overlap(a: &FockState, b: &FockState) -> Result<Complex64> {
    if a.n_modes != b.n_modes || a.config.cutoff != b.config.cutoff {
        return Err(Error::DimensionMismatch {
            module: MODULE,
            left: a.amplitudes.len(),
            right: b.amplitudes.len(),
        });
    }
    Ok(a.amplitudes
        .iter()
        .zip(b.amplitudes.iter())
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Position-quadrature probability density of one mode on a grid:
/// p(x) = Σ_{m,m'} ρ_{m,m'} h_m(x) h_{m'}(x) with the other modes traced out.
/// Integrates to the squared state norm, not necessarily to 1.
pub fn position_wavefunction(state: &FockState, mode: usize, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter {
            module: MODULE,
            name: "grid",
            reason: "must be nonempty".into(),
        });
    }
    let rho = state.reduced_density(mode)?;
    let d = state.config.cutoff;
    let mut out = Vec::with_capacity(grid.len());
    for &x in grid {
        let h = hermite_functions(x, d, state.config.hbar);
        out.push(crate::linalg::quadratic_form(&rho, &h));
    }
    Ok(out)
}

/// Kraus operators E_n of the transmissivity-T loss channel on the truncated
/// space: E_n[m, m+n] = √(C(m+n, n) (1−T)^n T^m). They satisfy
/// Σ E_n†E_n = I exactly on the retained levels.
pub fn loss_kraus_operators(transmissivity: f64, config: &FockConfig) -> Result<Vec<DMatrix<Complex64>>> {
    config.validate()?;
    if !(0.0..=1.0).contains(&transmissivity) {
        return Err(Error::InvalidParameter {
            module: MODULE,
            name: "transmissivity",
            reason: format!("must lie in [0, 1], got {transmissivity}"),
        });
    }
    let d = config.cutoff;
    let t = transmissivity;
    let mut ops = Vec::with_capacity(d);
    for n in 0..d {
        let mut e = DMatrix::<Complex64>::zeros(d, d);
        for m in 0..d {
            if m + n >= d {
                break;
            }
            let mut binom = 1.0_f64;
            for i in 0..n {
                binom *= (m + n - i) as f64 / (n - i) as f64;
            }
            let w = binom * (1.0 - t).powi(n as i32) * t.powi(m as i32);
            e[(m, m + n)] = Complex64::new(w.sqrt(), 0.0);
        }
        ops.push(e);
    }
    Ok(ops)
}

/// Applies a single-mode Kraus operator to one mode of a state, returning
/// the (subnormalized) branch.
pub fn apply_kraus(state: &FockState, op: &DMatrix<Complex64>, mode: usize) -> Result<FockState> {
    state.check_modes(&[mode])?;
    let mut next = state.clone();
    next.apply_one_mode(op, mode);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;
    use approx::assert_relative_eq;

    fn cfg(d: usize) -> FockConfig {
        FockConfig::new(d)
    }

    #[test]
    fn ladder_entries_match_definition() {
        let (a, adag) = ladder_operators(&cfg(3)).unwrap();
        assert_relative_eq!(a.matrix[(0, 1)].re, 1.0);
        assert_relative_eq!(a.matrix[(1, 2)].re, 2.0_f64.sqrt());
        assert_eq!(a.matrix[(1, 0)], Complex64::new(0.0, 0.0));
        let number = adag.matrix * a.matrix;
        for n in 0..2 {
            assert_relative_eq!(number[(n, n)].re, n as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn number_operator_diagonal_on_truncated_space() {
        let (a, adag) = ladder_operators(&cfg(2)).unwrap();
        let num = adag.matrix * a.matrix;
        assert_relative_eq!(num[(0, 0)].re, 0.0);
        assert_relative_eq!(num[(1, 1)].re, 1.0);
        assert_relative_eq!(num[(0, 1)].norm(), 0.0);
    }

    #[test]
    fn position_operator_is_real_symmetric_tridiagonal() {
        let x = position_operator(&cfg(7));
        for i in 0..7 {
            for j in 0..7 {
                assert_relative_eq!(x[(i, j)], x[(j, i)]);
                if (i as i64 - j as i64).abs() != 1 {
                    assert_eq!(x[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn rotation_pi_is_parity() {
        let g = Gate::rotation(std::f64::consts::PI, 0);
        let op = gate_unitary(&g, &cfg(3)).unwrap();
        assert_relative_eq!(op.matrix[(0, 0)].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(op.matrix[(1, 1)].re, -1.0, epsilon = 1e-14);
        assert_relative_eq!(op.matrix[(2, 2)].re, 1.0, epsilon = 1e-12);
        assert!(op.is_unitary_within < 1e-12);
    }

    #[test]
    fn kerr_is_unit_modulus_diagonal() {
        let g = Gate::kerr(0.37, 0);
        let op = gate_unitary(&g, &cfg(9)).unwrap();
        for n in 0..9 {
            assert_relative_eq!(op.matrix[(n, n)].norm(), 1.0, epsilon = 1e-14);
            let want = Complex64::from_polar(1.0, 0.37 * (n * n) as f64);
            assert!((op.matrix[(n, n)] - want).norm() < 1e-12);
        }
        assert!(op.is_unitary_within < 1e-12);
    }

    #[test]
    fn squeezed_vacuum_overlap_matches_closed_form() {
        let g = Gate::squeezing(0.5, 0.0, 0);
        for d in [20, 40] {
            let op = gate_unitary(&g, &cfg(d)).unwrap();
            let want = 1.0 / 0.5_f64.cosh().sqrt();
            assert_relative_eq!(op.matrix[(0, 0)].re, want, epsilon = 1e-12);
            assert_relative_eq!(op.matrix[(0, 0)].im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn displacement_recurrence_matches_generator_exponential() {
        // At a cutoff much larger than the support of the displaced vacuum,
        // exp of the truncated generator agrees with the exact elements.
        let d = 30;
        let alpha = Complex64::new(0.4, -0.2);
        let exact = displacement_matrix(alpha, d);
        let (a, adag) = ladder_operators(&cfg(d)).unwrap();
        let gen = adag.matrix * alpha - a.matrix * alpha.conj();
        let approx = expm(&gen);
        // compare well inside the corner where truncation is negligible
        for i in 0..8 {
            for j in 0..8 {
                assert!((exact[(i, j)] - approx[(i, j)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn squeezing_recurrence_matches_generator_exponential() {
        let d = 40;
        let (r, theta) = (0.5, 0.8);
        let exact = squeezing_matrix(r, theta, d);
        let (a, adag) = ladder_operators(&cfg(d)).unwrap();
        let zeta = Complex64::from_polar(r, theta);
        let gen = (&a.matrix * &a.matrix * zeta.conj()
            - &adag.matrix * &adag.matrix * zeta)
            / Complex64::new(2.0, 0.0);
        let approx = expm(&gen);
        for i in 0..8 {
            for j in 0..8 {
                assert!((exact[(i, j)] - approx[(i, j)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn cubic_phase_matches_quadrature_oracle() {
        // independent oracle: ⟨m|V(γ)|n⟩ = ∫ h_m(x) e^{iγx³/(3ħ)} h_n(x) dx
        let d = 7;
        let config = cfg(d);
        let gamma = 0.6;
        let coeff = gamma / (3.0 * config.hbar);
        let mut builder = CubicBuilder::new(config.hbar);
        let v = builder.matrix(gamma, d);

        let (lo, hi, steps) = (-14.0_f64, 14.0_f64, 56_000usize);
        let dx = (hi - lo) / steps as f64;
        let mut quad = DMatrix::<Complex64>::zeros(d, d);
        for k in 0..=steps {
            let x = lo + k as f64 * dx;
            let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
            let h = hermite_functions(x, d, config.hbar);
            let phase = Complex64::from_polar(1.0, coeff * x * x * x);
            for i in 0..d {
                for j in 0..d {
                    quad[(i, j)] += phase * (w * dx * h[i] * h[j]);
                }
            }
        }
        assert!(max_abs_diff(&v, &quad) < 1e-7, "delta = {}", max_abs_diff(&v, &quad));
    }

    /// Deviation of the Gram of the lowest `base^arity` columns from the
    /// identity: how far the gate lies from an isometry on the physically
    /// occupied low-photon block. Columns at the cutoff edge always clip,
    /// so convergence in D is only visible on a fixed corner.
    fn corner_deviation(gate: &Gate, d: usize, base: usize) -> f64 {
        let op = gate_unitary(gate, &cfg(d)).unwrap();
        let cols: Vec<usize> = if op.arity == 1 {
            (0..base).collect()
        } else {
            (0..base).flat_map(|a| (0..base).map(move |b| a * d + b)).collect()
        };
        let mut dev = 0.0_f64;
        for (ci, &c1) in cols.iter().enumerate() {
            for (cj, &c2) in cols.iter().enumerate() {
                let g: Complex64 = (0..op.matrix.nrows())
                    .map(|r| op.matrix[(r, c1)].conj() * op.matrix[(r, c2)])
                    .sum();
                let target = if ci == cj { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
                dev = dev.max((g - target).norm());
            }
        }
        dev
    }

    #[test]
    fn unitarity_deviation_decreases_with_cutoff() {
        // cubic-phase states have slowly decaying Fock tails, so the gate
        // converges much later than the Gaussians; only the monotone
        // improvement is required of it here
        for (gate, floor) in [
            (Gate::displacement(0.8, 0.0, 0), 1e-3),
            (Gate::squeezing(0.5, 0.3, 0), 1e-3),
            (Gate::cubic_phase(0.4, 0), 0.2),
            (Gate::beamsplitter(0.7, 0.2, 0, 1), 1e-3),
        ] {
            let devs: Vec<f64> = [7, 15, 30]
                .iter()
                .map(|&d| corner_deviation(&gate, d, 7))
                .collect();
            for w in devs.windows(2) {
                // strictly decreasing until the floating-point floor
                assert!(
                    w[1] < w[0].max(1e-12),
                    "{:?}: {devs:?}",
                    gate.kind
                );
            }
            assert!(devs[2] < floor, "{:?} not converged: {devs:?}", gate.kind);
        }
    }

    #[test]
    fn vacuum_invariant_under_rotation_and_kerr() {
        let vac = FockState::vacuum(1, cfg(5)).unwrap();
        for gate in [Gate::rotation(1.234, 0), Gate::kerr(0.77, 0)] {
            let out = apply_gate(&vac, &gate, &[0]).unwrap();
            let ov = overlap(&vac, &out).unwrap();
            assert_relative_eq!(ov.re, 1.0, epsilon = 1e-12);
            assert_relative_eq!(ov.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn large_displacement_at_small_cutoff_leaks() {
        let vac = FockState::vacuum(1, cfg(4)).unwrap();
        let gate = Gate::displacement(3.0, 0.0, 0);
        match apply_gate(&vac, &gate, &[0]) {
            Err(Error::TruncationLeakage { norm, .. }) => {
                // oracle: Poisson mass below the cutoff
                let expect = (-9.0_f64).exp() * (1.0 + 9.0 + 40.5 + 121.5);
                assert_relative_eq!(norm, expect, epsilon = 1e-10);
            }
            other => panic!("expected truncation leakage, got {other:?}"),
        }
    }

    #[test]
    fn apply_gate_rejects_bad_modes() {
        let vac = FockState::vacuum(2, cfg(3)).unwrap();
        let g = Gate::rotation(0.1, 0);
        assert!(matches!(
            apply_gate(&vac, &g, &[5]),
            Err(Error::InvalidModes { .. })
        ));
        let bs = Gate::beamsplitter(0.3, 0.0, 0, 1);
        assert!(matches!(
            apply_gate(&vac, &bs, &[1, 1]),
            Err(Error::InvalidModes { .. })
        ));
    }

    #[test]
    fn overlap_of_orthogonal_basis_states_is_zero() {
        let zero = FockState::vacuum(1, cfg(4)).unwrap();
        let mut one = FockState::vacuum(1, cfg(4)).unwrap();
        one.amplitudes[0] = Complex64::new(0.0, 0.0);
        one.amplitudes[1] = Complex64::new(1.0, 0.0);
        let ov = overlap(&zero, &one).unwrap();
        assert_eq!(ov, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn overlap_dimension_mismatch_detected() {
        let a = FockState::vacuum(1, cfg(4)).unwrap();
        let b = FockState::vacuum(1, cfg(5)).unwrap();
        assert!(matches!(overlap(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn vacuum_position_density_is_standard_normal() {
        let vac = FockState::vacuum(1, cfg(7)).unwrap();
        let p = position_wavefunction(&vac, 0, &[0.0, 1.0]).unwrap();
        assert_relative_eq!(p[0], 1.0 / (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-12);
        let want = (-0.5_f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(p[1], want, epsilon = 1e-12);
    }

    #[test]
    fn single_photon_density_has_node_at_origin() {
        let mut one = FockState::vacuum(1, cfg(7)).unwrap();
        one.amplitudes[0] = Complex64::new(0.0, 0.0);
        one.amplitudes[1] = Complex64::new(1.0, 0.0);
        let p = position_wavefunction(&one, 0, &[0.0]).unwrap();
        assert!(p[0].abs() < 1e-16);
    }

    #[test]
    fn squeezed_density_matches_phase_space_variance() {
        let d = 30;
        let vac = FockState::vacuum(1, cfg(d)).unwrap();
        let g = Gate::squeezing(2.0_f64.ln(), 0.0, 0);
        let sq = apply_gate(&vac, &g, &[0]).unwrap();
        // x-variance e^{−2r}·ħ/2 = 0.25, so p(0) = 1/√(2π·0.25); pointwise
        // truncation error at this cutoff sits below 1e-3
        let p0 = position_wavefunction(&sq, 0, &[0.0]).unwrap()[0];
        let want = 1.0 / (2.0 * std::f64::consts::PI * 0.25).sqrt();
        assert_relative_eq!(p0, want, epsilon = 1e-3);
        let (mean, var) = sq.position_moments(0).unwrap();
        assert_relative_eq!(mean, 0.0, epsilon = 1e-10);
        assert_relative_eq!(var, 0.25, epsilon = 1e-5);
    }

    #[test]
    fn density_integrates_to_squared_norm() {
        let vac = FockState::vacuum(1, cfg(10)).unwrap();
        let st = apply_gate(&vac, &Gate::displacement(0.5, 0.2, 0), &[0]).unwrap();
        let n = 4001;
        let xs: Vec<f64> = (0..n).map(|i| -12.0 + 24.0 * i as f64 / (n - 1) as f64).collect();
        let p = position_wavefunction(&st, 0, &xs).unwrap();
        let dx = xs[1] - xs[0];
        let mass: f64 = p.iter().sum::<f64>() * dx;
        assert_relative_eq!(mass, st.squared_norm(), epsilon = 1e-3);
        assert!(p.iter().all(|&v| v > -1e-10));
    }

    #[test]
    fn norm_never_increases() {
        let vac = FockState::vacuum(1, cfg(9)).unwrap();
        let mut st = vac;
        for gate in [
            Gate::squeezing(0.3, 0.1, 0),
            Gate::displacement(0.4, -0.1, 0),
            Gate::cubic_phase(0.2, 0),
            Gate::rotation(0.9, 0),
        ] {
            let next = apply_gate(&st, &gate, &[0]).unwrap();
            assert!(next.squared_norm() <= st.squared_norm() + 1e-9);
            st = next;
        }
    }

    #[test]
    fn kraus_operators_are_complete() {
        let config = cfg(12);
        for t in [0.0, 0.3, 0.7, 1.0] {
            let ops = loss_kraus_operators(t, &config).unwrap();
            let mut acc = DMatrix::<Complex64>::zeros(12, 12);
            for e in &ops {
                acc += e.adjoint() * e;
            }
            assert!(max_abs_diff(&acc, &DMatrix::identity(12, 12)) < 1e-12);
        }
    }

    #[test]
    fn kraus_identity_at_full_transmission() {
        let ops = loss_kraus_operators(1.0, &cfg(6)).unwrap();
        assert!(max_abs_diff(&ops[0], &DMatrix::identity(6, 6)) < 1e-15);
        for e in &ops[1..] {
            assert!(max_abs(e) < 1e-15);
        }
    }

    use crate::linalg::max_abs;

    #[test]
    fn two_mode_beamsplitter_swaps_at_half_pi() {
        // BS(π/2, 0) maps |1,0⟩ to ±|0,1⟩
        let d = 4;
        let u = beamsplitter_matrix(std::f64::consts::FRAC_PI_2, 0.0, d);
        let idx_10 = d; // |1,0⟩
        let idx_01 = 1; // |0,1⟩
        let col: Vec<Complex64> = (0..d * d).map(|r| u[(r, idx_10)]).collect();
        let mag_01 = col[idx_01].norm();
        assert_relative_eq!(mag_01, 1.0, epsilon = 1e-12);
        let leftover: f64 = col
            .iter()
            .enumerate()
            .filter(|(r, _)| *r != idx_01)
            .map(|(_, z)| z.norm_sqr())
            .sum();
        assert!(leftover < 1e-20);
    }
}

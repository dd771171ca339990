//! Parameterized circuits: the gate set, a flat trainable-parameter view for
//! the optimizer, parameter-shift circuit construction, and dispatch between
//! the phase-space and Fock backends.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fock::{self, FockConfig, FockState};
use crate::gaussian::{self, GaussianState, LossChannel};
use crate::sampler::{self, GridSpec};

const MODULE: &str = "circuit";

/// The supported gate kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Rotation,
    Displacement,
    Squeezing,
    Beamsplitter,
    CubicPhase,
    Kerr,
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::Beamsplitter => 2,
            _ => 1,
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            GateKind::Rotation => &["phi"],
            GateKind::Displacement => &["re_alpha", "im_alpha"],
            GateKind::Squeezing => &["r", "phi"],
            GateKind::Beamsplitter => &["theta", "phi"],
            GateKind::CubicPhase => &["gamma"],
            GateKind::Kerr => &["kappa"],
        }
    }

    pub fn n_params(&self) -> usize {
        self.param_names().len()
    }

    pub fn is_gaussian(&self) -> bool {
        !matches!(self, GateKind::CubicPhase | GateKind::Kerr)
    }

    pub fn label(&self) -> &'static str {
        match self {
            GateKind::Rotation => "Rotation",
            GateKind::Displacement => "Displacement",
            GateKind::Squeezing => "Squeezing",
            GateKind::Beamsplitter => "Beamsplitter",
            GateKind::CubicPhase => "CubicPhase",
            GateKind::Kerr => "Kerr",
        }
    }

    fn from_label(s: &str) -> Option<GateKind> {
        Some(match s {
            "Rotation" => GateKind::Rotation,
            "Displacement" => GateKind::Displacement,
            "Squeezing" => GateKind::Squeezing,
            "Beamsplitter" => GateKind::Beamsplitter,
            "CubicPhase" => GateKind::CubicPhase,
            "Kerr" => GateKind::Kerr,
            _ => return None,
        })
    }
}

/// One parameterized gate acting on named modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub params: Vec<f64>,
    pub modes: Vec<usize>,
    pub trainable: Vec<bool>,
}

impl Gate {
    fn new(kind: GateKind, params: Vec<f64>, modes: Vec<usize>) -> Self {
        let trainable = vec![true; params.len()];
        Gate { kind, params, modes, trainable }
    }

    pub fn rotation(phi: f64, mode: usize) -> Self {
        Gate::new(GateKind::Rotation, vec![phi], vec![mode])
    }

    pub fn displacement(re_alpha: f64, im_alpha: f64, mode: usize) -> Self {
        Gate::new(GateKind::Displacement, vec![re_alpha, im_alpha], vec![mode])
    }

    pub fn squeezing(r: f64, phi: f64, mode: usize) -> Self {
        Gate::new(GateKind::Squeezing, vec![r, phi], vec![mode])
    }

    pub fn beamsplitter(theta: f64, phi: f64, mode_a: usize, mode_b: usize) -> Self {
        Gate::new(GateKind::Beamsplitter, vec![theta, phi], vec![mode_a, mode_b])
    }

    pub fn cubic_phase(gamma: f64, mode: usize) -> Self {
        Gate::new(GateKind::CubicPhase, vec![gamma], vec![mode])
    }

    pub fn kerr(kappa: f64, mode: usize) -> Self {
        Gate::new(GateKind::Kerr, vec![kappa], vec![mode])
    }

    /// Replaces the trainable mask; length must match the parameter count.
    pub fn with_trainable(mut self, mask: &[bool]) -> Self {
        assert_eq!(mask.len(), self.params.len());
        self.trainable = mask.to_vec();
        self
    }

    fn validate(&self, n_modes: usize) -> Result<()> {
        if self.params.len() != self.kind.n_params() || self.trainable.len() != self.params.len() {
            return Err(Error::InvalidParameter {
                module: MODULE,
                name: "params",
                reason: format!(
                    "{} expects {} parameters, got {} (mask {})",
                    self.kind.label(),
                    self.kind.n_params(),
                    self.params.len(),
                    self.trainable.len()
                ),
            });
        }
        let arity_ok = self.modes.len() == self.kind.arity();
        let distinct = self.modes.len() < 2 || self.modes[0] != self.modes[1];
        if !arity_ok || !distinct || self.modes.iter().any(|&m| m >= n_modes) {
            return Err(Error::InvalidModes {
                module: MODULE,
                modes: self.modes.clone(),
                n_modes,
            });
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter {
                module: MODULE,
                name: "params",
                reason: format!("{} has a non-finite parameter", self.kind.label()),
            });
        }
        Ok(())
    }
}

/// Ordered gate list over a fixed number of modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_modes: usize,
    pub gates: Vec<Gate>,
    pub name: String,
}

impl Circuit {
    pub fn new(n_modes: usize, gates: Vec<Gate>) -> Result<Self> {
        let c = Circuit { n_modes, gates, name: String::new() };
        c.validate()?;
        Ok(c)
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::InvalidParameter {
                module: MODULE,
                name: "n_modes",
                reason: "must be at least 1".into(),
            });
        }
        for g in &self.gates {
            g.validate(self.n_modes)?;
        }
        Ok(())
    }

    pub fn is_gaussian(&self) -> bool {
        self.gates.iter().all(|g| g.kind.is_gaussian())
    }

    /// (gate index, parameter index) of each trainable scalar, in gate order.
    pub fn param_locations(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (gi, g) in self.gates.iter().enumerate() {
            for (pi, &t) in g.trainable.iter().enumerate() {
                if t {
                    out.push((gi, pi));
                }
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_locations().len()
    }

    /// Flat view of the trainable parameters.
    pub fn get_params(&self) -> Vec<f64> {
        self.param_locations()
            .iter()
            .map(|&(gi, pi)| self.gates[gi].params[pi])
            .collect()
    }

    /// Writes a flat parameter vector back; inverse of [`Self::get_params`].
    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        let locs = self.param_locations();
        if locs.len() != values.len() {
            return Err(Error::DimensionMismatch {
                module: MODULE,
                left: locs.len(),
                right: values.len(),
            });
        }
        for (&(gi, pi), &v) in locs.iter().zip(values.iter()) {
            self.gates[gi].params[pi] = v;
        }
        Ok(())
    }

    /// Human-readable label of trainable parameter `k`, e.g. `g2.Squeezing.r`.
    pub fn param_label(&self, k: usize) -> String {
        let (gi, pi) = self.param_locations()[k];
        let g = &self.gates[gi];
        format!("g{gi}.{}.{}", g.kind.label(), g.kind.param_names()[pi])
    }
}

// --- JSON schema: {"n_modes": .., "gates": [{"kind", "params", "modes", "trainable"}]} ---

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateJson {
    kind: String,
    params: BTreeMap<String, f64>,
    modes: Vec<usize>,
    trainable: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitJson {
    n_modes: usize,
    gates: Vec<GateJson>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    name: String,
}

impl Serialize for Circuit {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let gates = self
            .gates
            .iter()
            .map(|g| GateJson {
                kind: g.kind.label().to_string(),
                params: g
                    .kind
                    .param_names()
                    .iter()
                    .zip(g.params.iter())
                    .map(|(n, v)| (n.to_string(), *v))
                    .collect(),
                modes: g.modes.clone(),
                trainable: g.trainable.clone(),
            })
            .collect();
        CircuitJson { n_modes: self.n_modes, gates, name: self.name.clone() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = CircuitJson::deserialize(deserializer)?;
        let mut gates = Vec::with_capacity(raw.gates.len());
        for g in raw.gates {
            let kind = GateKind::from_label(&g.kind)
                .ok_or_else(|| D::Error::custom(format!("unknown gate kind {:?}", g.kind)))?;
            let mut params = Vec::with_capacity(kind.n_params());
            for name in kind.param_names() {
                let v = g.params.get(*name).ok_or_else(|| {
                    D::Error::custom(format!("{} is missing parameter {name:?}", g.kind))
                })?;
                params.push(*v);
            }
            if g.params.len() != kind.n_params() {
                return Err(D::Error::custom(format!(
                    "{} has unexpected parameters: {:?}",
                    g.kind,
                    g.params.keys().collect::<Vec<_>>()
                )));
            }
            gates.push(Gate { kind, params, modes: g.modes, trainable: g.trainable });
        }
        let circuit = Circuit { n_modes: raw.n_modes, gates, name: raw.name };
        circuit.validate().map_err(D::Error::custom)?;
        Ok(circuit)
    }
}

// --- parameter-shift rules ---

/// Shift magnitudes for the parameter-shift gradient rules. The defaults are
/// the training values (±π/2 for angles, s = 0.1 for displacement and
/// squeezing magnitudes, t = 0.01 for the non-Gaussian strengths); all are
/// adjustable, and shrinking them trades sampling noise for bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShiftRules {
    /// Shift for rotation, beamsplitter, and squeezing angles.
    pub angle: f64,
    /// Shift s for displacement components, scale 1/s.
    pub linear: f64,
    /// Shift s for the squeezing magnitude, scale 1/sinh(s).
    pub squeeze: f64,
    /// Shift t for cubic-phase and Kerr strengths, scale 1/t.
    pub small: f64,
}

impl Default for ShiftRules {
    fn default() -> Self {
        ShiftRules { angle: FRAC_PI_2, linear: 0.1, squeeze: 0.1, small: 0.01 }
    }
}

impl ShiftRules {
    /// Small shifts for validating the rules against finite differences of
    /// the exact loss; the O(shift²) bias sits well below 1e-4 here.
    pub fn verification() -> Self {
        ShiftRules { angle: 0.005, linear: 0.002, squeeze: 0.005, small: 0.01 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("angle", self.angle),
            ("linear", self.linear),
            ("squeeze", self.squeeze),
            ("small", self.small),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    module: MODULE,
                    name: "shift",
                    reason: format!("{name} shift must be positive, got {v}"),
                });
            }
        }
        Ok(())
    }

    /// (shift amount, estimator scale factor) for one gate parameter.
    pub fn rule_for(&self, kind: GateKind, param_idx: usize) -> (f64, f64) {
        let angle_scale = if (self.angle - FRAC_PI_2).abs() < 1e-12 {
            1.0
        } else {
            1.0 / self.angle.sin()
        };
        match (kind, param_idx) {
            (GateKind::Rotation, _) => (self.angle, angle_scale),
            (GateKind::Beamsplitter, _) => (self.angle, angle_scale),
            (GateKind::Displacement, _) => (self.linear, 1.0 / self.linear),
            (GateKind::Squeezing, 0) => (self.squeeze, 1.0 / self.squeeze.sinh()),
            (GateKind::Squeezing, _) => (self.angle, angle_scale),
            (GateKind::CubicPhase, _) | (GateKind::Kerr, _) => (self.small, 1.0 / self.small),
        }
    }
}

/// Copies of the circuit with trainable parameter `k` shifted up and down,
/// plus the scale factor the gradient estimator applies to the combination.
pub fn shifted_circuits(circuit: &Circuit, k: usize, rules: &ShiftRules) -> Result<(Circuit, Circuit, f64)> {
    let locs = circuit.param_locations();
    if k >= locs.len() {
        return Err(Error::ParamIndexOutOfRange { index: k, len: locs.len() });
    }
    let (gi, pi) = locs[k];
    let (shift, scale) = rules.rule_for(circuit.gates[gi].kind, pi);
    let mut plus = circuit.clone();
    let mut minus = circuit.clone();
    plus.gates[gi].params[pi] += shift;
    minus.gates[gi].params[pi] -= shift;
    Ok((plus, minus, scale))
}

// --- execution ---

/// Which backend to run a circuit on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendSelect {
    /// Phase space for all-Gaussian circuits, Fock space otherwise.
    #[default]
    Auto,
    ForceGaussian,
    ForceFock,
}

/// Backend dispatch configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendConfig {
    pub select: BackendSelect,
    pub fock: FockConfig,
}

impl BackendConfig {
    pub fn fock_with(cutoff: usize) -> Self {
        BackendConfig { select: BackendSelect::ForceFock, fock: FockConfig::new(cutoff) }
    }
}

/// Which backend actually ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Gaussian,
    Fock,
}

/// The prepared circuit state, tagged by backend.
#[derive(Debug, Clone)]
pub enum CircuitState {
    Gaussian(GaussianState),
    Fock(FockState),
}

impl CircuitState {
    pub fn backend(&self) -> BackendKind {
        match self {
            CircuitState::Gaussian(_) => BackendKind::Gaussian,
            CircuitState::Fock(_) => BackendKind::Fock,
        }
    }
}

/// Runs the circuit from the n-mode vacuum, dispatching to the phase-space
/// backend iff every gate is Gaussian (or as forced by the config).
pub fn run(circuit: &Circuit, backend: &BackendConfig) -> Result<CircuitState> {
    circuit.validate()?;
    let use_gaussian = match backend.select {
        BackendSelect::Auto => circuit.is_gaussian(),
        BackendSelect::ForceGaussian => true,
        BackendSelect::ForceFock => false,
    };
    if use_gaussian {
        let mut st = gaussian::vacuum(circuit.n_modes, backend.fock.hbar)?;
        for g in &circuit.gates {
            st = gaussian::apply_symplectic(&st, g, &g.modes)?;
        }
        Ok(CircuitState::Gaussian(st))
    } else {
        let mut st = FockState::vacuum(circuit.n_modes, backend.fock)?;
        for g in &circuit.gates {
            st = fock::apply_gate(&st, g, &g.modes)?;
        }
        Ok(CircuitState::Fock(st))
    }
}

/// Runs the circuit, applies any loss channels, and homodyne-samples all
/// modes at measurement angle 0. Rows of the result are i.i.d. samples.
pub fn sample<R: Rng + ?Sized>(
    circuit: &Circuit,
    count: usize,
    rng: &mut R,
    noise: &[LossChannel],
    backend: &BackendConfig,
    grid: Option<GridSpec>,
) -> Result<Vec<Vec<f64>>> {
    for ch in noise {
        ch.validate(circuit.n_modes)?;
    }
    match run(circuit, backend)? {
        CircuitState::Gaussian(mut st) => {
            for ch in noise {
                st = gaussian::apply_loss(&st, ch)?;
            }
            gaussian::homodyne_sample(&st, rng, count)
        }
        CircuitState::Fock(st) => {
            if noise.is_empty() {
                sampler::sample_fock(&st, rng, count, grid)
            } else {
                sampler::sample_fock_with_loss(&st, noise, rng, count, grid)
            }
        }
    }
}

/// Paper-style initialization: angles uniform in [0, 2π), all magnitudes
/// (r, γ, κ, Re α, Im α) from N(0, 0.01).
pub fn randomize_params<R: Rng + ?Sized>(circuit: &mut Circuit, rng: &mut R) {
    use rand_distr::{Distribution, Normal, Uniform};
    let angle = Uniform::new(0.0, std::f64::consts::TAU);
    let mag = Normal::new(0.0, 0.1).unwrap();
    for (gi, pi) in circuit.param_locations() {
        let kind = circuit.gates[gi].kind;
        let is_angle = matches!(
            (kind, pi),
            (GateKind::Rotation, _) | (GateKind::Beamsplitter, _) | (GateKind::Squeezing, 1)
        );
        circuit.gates[gi].params[pi] = if is_angle {
            angle.sample(rng)
        } else {
            mag.sample(rng)
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sd_circuit() -> Circuit {
        Circuit::new(
            1,
            vec![Gate::squeezing(0.3, 0.0, 0), Gate::displacement(0.5, 0.0, 0)],
        )
        .unwrap()
    }

    #[test]
    fn empty_circuit_runs_on_gaussian_backend() {
        let c = Circuit::new(1, vec![]).unwrap();
        let st = run(&c, &BackendConfig::default()).unwrap();
        assert_eq!(st.backend(), BackendKind::Gaussian);
        match st {
            CircuitState::Gaussian(g) => {
                assert_eq!(g.mean.len(), 2);
                assert_eq!(g.cov[(0, 0)], 1.0);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn squeeze_then_displace_composes_symplectically() {
        let st = run(&sd_circuit(), &BackendConfig::default()).unwrap();
        match st {
            CircuitState::Gaussian(g) => {
                // displacement follows squeezing, so the mean is just √(2ħ)·0.5
                assert_relative_eq!(g.mean[0], 1.0, epsilon = 1e-14);
                assert_relative_eq!(g.cov[(0, 0)], (-0.6_f64).exp(), epsilon = 1e-14);
            }
            _ => panic!("expected gaussian backend"),
        }
    }

    #[test]
    fn nongaussian_gate_dispatches_to_fock() {
        let c = Circuit::new(
            1,
            vec![Gate::squeezing(0.3, 0.0, 0), Gate::cubic_phase(0.2, 0)],
        )
        .unwrap();
        let st = run(&c, &BackendConfig::default()).unwrap();
        assert_eq!(st.backend(), BackendKind::Fock);
    }

    #[test]
    fn param_roundtrip_is_identity() {
        let mut c = Circuit::new(
            2,
            vec![
                Gate::squeezing(0.3, 0.1, 0).with_trainable(&[true, false]),
                Gate::beamsplitter(0.7, 0.2, 0, 1),
                Gate::displacement(0.5, -0.25, 1),
            ],
        )
        .unwrap();
        let p = c.get_params();
        assert_eq!(p.len(), 5);
        c.set_params(&p).unwrap();
        assert_eq!(c.get_params(), p);
        let novel = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        c.set_params(&novel).unwrap();
        assert_eq!(c.get_params(), novel);
        assert_eq!(c.gates[0].params[1], 0.1); // frozen φ untouched
    }

    #[test]
    fn shifted_circuits_differ_in_exactly_one_scalar() {
        let c = sd_circuit();
        let rules = ShiftRules::default();
        for k in 0..c.param_count() {
            let (plus, minus, _) = shifted_circuits(&c, k, &rules).unwrap();
            let orig = c.get_params();
            let pp = plus.get_params();
            let pm = minus.get_params();
            let diffs_p: Vec<usize> =
                (0..orig.len()).filter(|&i| pp[i] != orig[i]).collect();
            let diffs_m: Vec<usize> =
                (0..orig.len()).filter(|&i| pm[i] != orig[i]).collect();
            assert_eq!(diffs_p, vec![k]);
            assert_eq!(diffs_m, vec![k]);
            assert_relative_eq!(pp[k] - orig[k], orig[k] - pm[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn table_shift_rules_match() {
        let rules = ShiftRules::default();
        let (shift, scale) = rules.rule_for(GateKind::Rotation, 0);
        assert_eq!(shift, FRAC_PI_2);
        assert_eq!(scale, 1.0);
        let (shift, scale) = rules.rule_for(GateKind::Displacement, 0);
        assert_eq!(shift, 0.1);
        assert_relative_eq!(scale, 10.0);
        let sr = ShiftRules { squeeze: 0.1, ..ShiftRules::default() };
        let (_, scale) = sr.rule_for(GateKind::Squeezing, 0);
        assert_relative_eq!(scale, 9.98335275729611, epsilon = 1e-10);
        let (shift, scale) = rules.rule_for(GateKind::Kerr, 0);
        assert_eq!(shift, 0.01);
        assert_relative_eq!(scale, 100.0);
    }

    #[test]
    fn shift_index_out_of_range_rejected() {
        let c = sd_circuit();
        assert!(matches!(
            shifted_circuits(&c, 99, &ShiftRules::default()),
            Err(Error::ParamIndexOutOfRange { .. })
        ));
    }

    #[test]
    fn json_roundtrip_preserves_circuit() {
        let c = Circuit::new(
            2,
            vec![
                Gate::squeezing(0.3, 0.1, 0).with_trainable(&[true, false]),
                Gate::beamsplitter(0.7, 0.2, 0, 1),
                Gate::kerr(0.05, 1),
            ],
        )
        .unwrap()
        .named("demo");
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert!(text.contains("\"kind\": \"Squeezing\""));
        assert!(text.contains("\"re_alpha\"") == false);
        let back: Circuit = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn json_schema_field_names() {
        let c = Circuit::new(1, vec![Gate::displacement(0.25, -0.5, 0)]).unwrap();
        let v: serde_json::Value = serde_json::to_value(&c).unwrap();
        assert_eq!(v["n_modes"], 1);
        assert_eq!(v["gates"][0]["kind"], "Displacement");
        assert_eq!(v["gates"][0]["params"]["re_alpha"], 0.25);
        assert_eq!(v["gates"][0]["params"]["im_alpha"], -0.5);
        assert_eq!(v["gates"][0]["modes"][0], 0);
        assert_eq!(v["gates"][0]["trainable"][0], true);
    }

    #[test]
    fn json_rejects_bad_gates() {
        let bad_kind = r#"{"n_modes":1,"gates":[{"kind":"Blah","params":{},"modes":[0],"trainable":[]}]}"#;
        assert!(serde_json::from_str::<Circuit>(bad_kind).is_err());
        let bad_param = r#"{"n_modes":1,"gates":[{"kind":"Rotation","params":{"angle":0.1},"modes":[0],"trainable":[true]}]}"#;
        assert!(serde_json::from_str::<Circuit>(bad_param).is_err());
        let bad_mode = r#"{"n_modes":1,"gates":[{"kind":"Rotation","params":{"phi":0.1},"modes":[3],"trainable":[true]}]}"#;
        assert!(serde_json::from_str::<Circuit>(bad_mode).is_err());
    }

    #[test]
    fn sampling_from_sd_circuit_matches_family() {
        let c = Circuit::new(
            1,
            vec![Gate::squeezing(0.4, 0.0, 0), Gate::displacement(0.3, 0.0, 0)],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs = sample(&c, 40_000, &mut rng, &[], &BackendConfig::default(), None).unwrap();
        let mean: f64 = xs.iter().map(|r| r[0]).sum::<f64>() / xs.len() as f64;
        let var: f64 =
            xs.iter().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.6).abs() < 0.02, "mean {mean}");
        assert!((var - (-0.8_f64).exp()).abs() < 0.02, "var {var}");
    }

    #[test]
    fn full_loss_gives_standard_normal_samples() {
        let c = sd_circuit();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = [LossChannel { transmissivity: 0.0, mode: 0 }];
        let xs = sample(&c, 40_000, &mut rng, &noise, &BackendConfig::default(), None).unwrap();
        let mean: f64 = xs.iter().map(|r| r[0]).sum::<f64>() / xs.len() as f64;
        let var: f64 =
            xs.iter().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn forced_gaussian_backend_rejects_nongaussian_circuit() {
        let c = Circuit::new(1, vec![Gate::kerr(0.1, 0)]).unwrap();
        let backend = BackendConfig { select: BackendSelect::ForceGaussian, ..Default::default() };
        assert!(matches!(run(&c, &backend), Err(Error::NonGaussianGate { .. })));
    }
}

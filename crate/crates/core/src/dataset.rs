//! Target-distribution generation and dataset CSV I/O.
//!
//! Targets are either product Gaussians or the homodyne output of a
//! reference circuit; quantum targets are always generated noise-free
//! (there is no loss-channel path through this module at all).

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::circuit::{self, BackendConfig, Circuit};
use crate::error::{Error, Result};

const MODULE: &str = "dataset";

/// What to sample as the training target.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Product of independent normals N(mu_i, sigma_i²), one per dimension.
    ClassicalGaussian {
        mu: Vec<f64>,
        sigma: Vec<f64>,
        count: usize,
        seed: u64,
    },
    /// Homodyne samples of a reference circuit.
    QuantumCircuit {
        circuit: Circuit,
        count: usize,
        seed: u64,
        #[serde(default)]
        backend: BackendConfig,
    },
}

impl TargetSpec {
    pub fn count(&self) -> usize {
        match self {
            TargetSpec::ClassicalGaussian { count, .. } => *count,
            TargetSpec::QuantumCircuit { count, .. } => *count,
        }
    }

    pub fn n_dims(&self) -> usize {
        match self {
            TargetSpec::ClassicalGaussian { mu, .. } => mu.len(),
            TargetSpec::QuantumCircuit { circuit, .. } => circuit.n_modes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TargetSpec::ClassicalGaussian { mu, sigma, count, .. } => {
                if mu.is_empty() || mu.len() != sigma.len() {
                    return Err(Error::DimensionMismatch {
                        module: MODULE,
                        left: mu.len(),
                        right: sigma.len(),
                    });
                }
                if sigma.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::InvalidParameter {
                        module: MODULE,
                        name: "sigma",
                        reason: "every dimension needs a positive sigma".into(),
                    });
                }
                if *count < 1 {
                    return Err(Error::InvalidParameter {
                        module: MODULE,
                        name: "count",
                        reason: "must be at least 1".into(),
                    });
                }
            }
            TargetSpec::QuantumCircuit { circuit, count, .. } => {
                circuit.validate()?;
                if *count < 1 {
                    return Err(Error::InvalidParameter {
                        module: MODULE,
                        name: "count",
                        reason: "must be at least 1".into(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Draws the target dataset; deterministic in the spec's seed.
pub fn generate(spec: &TargetSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    match spec {
        TargetSpec::ClassicalGaussian { mu, sigma, count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let dists: Vec<Normal<f64>> = mu
                .iter()
                .zip(sigma.iter())
                .map(|(&m, &s)| Normal::new(m, s).expect("validated sigma"))
                .collect();
            Ok((0..*count)
                .map(|_| dists.iter().map(|d| d.sample(&mut rng)).collect())
                .collect())
        }
        TargetSpec::QuantumCircuit { circuit, count, seed, backend } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            circuit::sample(circuit, *count, &mut rng, &[], backend, None)
        }
    }
}

/// Writes a sample matrix as CSV with header `x0,…,x{n−1}`; values use the
/// shortest decimal representation that round-trips the double exactly.
pub fn save(path: &Path, matrix: &[Vec<f64>]) -> Result<()> {
    let n = matrix.first().map(|r| r.len()).unwrap_or(0);
    let mut out = String::new();
    let header: Vec<String> = (0..n).map(|j| format!("x{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in matrix {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    f.write_all(out.as_bytes()).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Loads a dataset CSV; rejects ragged rows, naming the offending line.
pub fn load(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Format {
        path: path.display().to_string(),
        line: 1,
        reason: "missing header row".into(),
    })?;
    let n = header.split(',').count();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n {
            return Err(Error::Format {
                path: path.display().to_string(),
                line: idx + 1,
                reason: format!("expected {n} columns, found {}", cells.len()),
            });
        }
        let mut row = Vec::with_capacity(n);
        for c in cells {
            row.push(c.trim().parse::<f64>().map_err(|e| Error::Format {
                path: path.display().to_string(),
                line: idx + 1,
                reason: format!("bad number {c:?}: {e}"),
            })?);
        }
        rows.push(row);
    }
    Ok(rows)
}

//! Run configuration: JSON file plus command-line overrides, flags winning.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use flbo::error::read_text;
use flbo::spectral::log_spaced_times;
use flbo::{FlboError, Result};

/// Options shared by every subcommand. A flag given explicitly overrides the
/// corresponding field of the `--config` file.
#[derive(Args, Clone, Debug)]
pub struct CommonArgs {
    /// Triangle mesh to process (.off or .obj)
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// JSON run configuration; explicit flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Anisotropy level a ≥ 0 of the shear tensor
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Drift magnitude τ ≥ 0 of the directional term
    #[arg(long)]
    pub tau: Option<f64>,
    /// Number of uniformly spaced operator directions in [0, π)
    #[arg(long)]
    pub angles: Option<usize>,
    /// Number of eigenpairs for spectral computations
    #[arg(long)]
    pub eigs: Option<usize>,
    /// Chebyshev polynomial order for matrix-free filtering
    #[arg(long)]
    pub cheb_order: Option<usize>,
    /// Seed for every random choice (solver starts, validation samples)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated diffusion times
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// Rescale the mesh to unit total area before assembly
    #[arg(long)]
    pub unit_area: bool,
}

/// One reproducible run: mesh, anisotropy, solver sizes, times, seed, and
/// where the artifacts go.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh_path: Option<PathBuf>,
    pub anisotropy_level: f64,
    pub tau: f64,
    pub n_angles: usize,
    pub n_eigenpairs: usize,
    pub chebyshev_order: usize,
    pub times: Vec<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mesh_path: None,
            anisotropy_level: 10.0,
            tau: 0.1,
            n_angles: 8,
            n_eigenpairs: 128,
            chebyshev_order: 16,
            times: log_spaced_times(0.01, 1.0, 8).expect("default time range is valid"),
            seed: 42,
            output_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    /// Loads the config file if given, applies flag overrides, validates.
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let mut config = match &args.config {
            Some(path) => {
                let text = read_text(path)?;
                serde_json::from_str::<RunConfig>(&text)
                    .map_err(|e| FlboError::Config(format!("{}: {e}", path.display())))?
            }
            None => Self::default(),
        };
        if let Some(mesh) = &args.mesh {
            config.mesh_path = Some(mesh.clone());
        }
        if let Some(out) = &args.out {
            config.output_dir = out.clone();
        }
        if let Some(v) = args.alpha {
            config.anisotropy_level = v;
        }
        if let Some(v) = args.tau {
            config.tau = v;
        }
        if let Some(v) = args.angles {
            config.n_angles = v;
        }
        if let Some(v) = args.eigs {
            config.n_eigenpairs = v;
        }
        if let Some(v) = args.cheb_order {
            config.chebyshev_order = v;
        }
        if let Some(v) = args.seed {
            config.seed = v;
        }
        if let Some(v) = &args.times {
            config.times = v.clone();
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.anisotropy_level.is_finite() && self.anisotropy_level >= 0.0) {
            return Err(FlboError::Config(format!(
                "anisotropy_level = {} must be finite and ≥ 0",
                self.anisotropy_level
            )));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(FlboError::Config(format!(
                "tau = {} must be finite and ≥ 0",
                self.tau
            )));
        }
        if self.n_angles < 1 {
            return Err(FlboError::Config("n_angles must be ≥ 1".into()));
        }
        if self.n_eigenpairs < 1 {
            return Err(FlboError::Config("n_eigenpairs must be ≥ 1".into()));
        }
        if self.chebyshev_order < 1 {
            return Err(FlboError::Config("chebyshev_order must be ≥ 1".into()));
        }
        if self.times.is_empty() {
            return Err(FlboError::Config("times must not be empty".into()));
        }
        if let Some(bad) = self.times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(FlboError::Config(format!(
                "times entries must be positive and finite, got {bad}"
            )));
        }
        Ok(())
    }

    pub fn require_mesh(&self) -> Result<&Path> {
        self.mesh_path.as_deref().ok_or_else(|| {
            FlboError::Config(
                "a mesh is required: pass --mesh or set mesh_path in the config file".into(),
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[derive(Parser)]
    struct Harness {
        #[command(flatten)]
        common: CommonArgs,
    }

    #[test]
    fn defaults_match_the_documented_values() {
        let config = RunConfig::default();
        assert_eq!(config.anisotropy_level, 10.0);
        assert_eq!(config.tau, 0.1);
        assert_eq!(config.n_angles, 8);
        assert_eq!(config.n_eigenpairs, 128);
        assert_eq!(config.chebyshev_order, 16);
        assert_eq!(config.seed, 42);
        assert_eq!(config.times.len(), 8);
        assert!((config.times[0] - 0.01).abs() < 1e-15);
        assert!((config.times[7] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flags_override_config_fields() {
        let harness = Harness::parse_from(["x", "--tau", "0.3", "--angles", "4"]);
        let config = RunConfig::resolve(&harness.common).unwrap();
        assert_eq!(config.tau, 0.3);
        assert_eq!(config.n_angles, 4);
        assert_eq!(config.anisotropy_level, 10.0);
    }

    #[test]
    fn invalid_counts_are_rejected() {
        let harness = Harness::parse_from(["x", "--angles", "0"]);
        assert!(RunConfig::resolve(&harness.common).is_err());
    }
}

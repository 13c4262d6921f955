//! Declarative run configuration (JSON) shared by all subcommands.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use vshell_core::dynamics::FieldMode;
use vshell_core::steady::{SolveMode, SolveOptions};
use vshell_core::ShellParams;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub shell: ShellSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub evolve: EvolveSection,
    #[serde(default)]
    pub scalecheck: ScalecheckSection,
    #[serde(default)]
    pub stability: StabilitySection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellSection {
    pub k: f64,
    pub l: f64,
    pub l0: f64,
    pub mc: f64,
    pub e0: f64,
    /// `null` selects the variational amplitude `(k/(k+1))^k`.
    #[serde(default)]
    pub amplitude: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub r_min: f64,
    pub r_max: f64,
    pub count: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            r_min: 0.01,
            r_max: 10.0,
            count: 2000,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    pub relaxation: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub mode: SolveMode,
    #[serde(default)]
    pub target_mass: Option<f64>,
    pub bisection_tolerance: f64,
}

impl Default for SolveSection {
    fn default() -> Self {
        Self {
            relaxation: 0.5,
            max_iterations: 2000,
            tolerance: 1e-12,
            mode: SolveMode::FixedE0,
            target_mass: None,
            bisection_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    pub particles: usize,
    /// `null` selects the default rule: 1% of the shortest circular-orbit period.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Absolute end time; when `null`, `t_end_inner_periods` applies.
    #[serde(default)]
    pub t_end: Option<f64>,
    pub t_end_inner_periods: f64,
    pub output_every: usize,
    pub field_mode: FieldMode,
    pub deposition_bins: usize,
    pub picard_iterations: usize,
    /// Picard horizon in units of the system dynamical time.
    pub picard_horizon_dyn_times: f64,
    pub picard_snapshot_every: usize,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self {
            particles: 20_000,
            dt: None,
            t_end: None,
            t_end_inner_periods: 10.0,
            output_every: 100,
            field_mode: FieldMode::SelfConsistent,
            deposition_bins: 64,
            picard_iterations: 3,
            picard_horizon_dyn_times: 0.5,
            picard_snapshot_every: 5,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalecheckSection {
    pub triples: usize,
    pub low: f64,
    pub high: f64,
    /// Identity violation beyond this relative error exits nonzero.
    pub tolerance: f64,
    pub eta: f64,
    pub witness_mass: f64,
}

impl Default for ScalecheckSection {
    fn default() -> Self {
        Self {
            triples: 10,
            low: 0.5,
            high: 2.0,
            tolerance: 1e-5,
            eta: 1.5,
            witness_mass: 1.0,
        }
    }
}

#[derive(Debug, Deserialize, Clone)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PerturbationSpec {
    /// Mass-preserving rescaling with `a = (bc)^3` forced.
    Rescale { b: f64, c: f64 },
    /// Radial velocity kick `w -> (1 + epsilon) w`.
    Kick { epsilon: f64 },
}

impl PerturbationSpec {
    pub fn label(&self) -> String {
        match self {
            PerturbationSpec::Rescale { b, c } => format!("rescale_b{b}_c{c}"),
            PerturbationSpec::Kick { epsilon } => format!("kick_eps{epsilon}"),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    pub perturbations: Vec<PerturbationSpec>,
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self {
            perturbations: vec![
                PerturbationSpec::Rescale { b: 1.001, c: 1.001 },
                PerturbationSpec::Rescale { b: 1.01, c: 1.01 },
                PerturbationSpec::Rescale { b: 1.1, c: 1.1 },
            ],
        }
    }
}

/// A parsed config plus the hash of its raw bytes (stamped into every CSV).
pub struct LoadedConfig {
    pub run: RunConfig,
    pub hash: String,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let run: RunConfig = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Config(format!("malformed config {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let hash = hex_prefix(&hasher.finalize(), 16);
    Ok(LoadedConfig { run, hash })
}

fn hex_prefix(bytes: &[u8], chars: usize) -> String {
    let mut s = String::with_capacity(chars);
    for b in bytes {
        use std::fmt::Write;
        write!(s, "{b:02x}").unwrap();
        if s.len() >= chars {
            break;
        }
    }
    s.truncate(chars);
    s
}

impl RunConfig {
    pub fn shell_params(&self) -> Result<ShellParams, CliError> {
        ShellParams::new(
            self.shell.k,
            self.shell.l,
            self.shell.l0,
            self.shell.mc,
            self.shell.e0,
            self.shell.amplitude,
        )
        .map_err(CliError::Core)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            relaxation: self.solve.relaxation,
            max_iterations: self.solve.max_iterations,
            tolerance: self.solve.tolerance,
            mode: self.solve.mode,
            target_mass: self.solve.target_mass,
            bisection_tolerance: self.solve.bisection_tolerance,
        }
    }
}

pub mod diagnose;
pub mod evolve;
pub mod scalecheck;
pub mod stability;
pub mod steady;

use std::sync::Arc;

use vshell_core::steady::{solve_shell, ShellModel};
use vshell_core::{make_log_grid, RadialGrid};

use crate::config::LoadedConfig;
use crate::CliError;

/// Solve the configured shell.
pub fn solve_from(loaded: &LoadedConfig) -> Result<(ShellModel, Arc<RadialGrid>), CliError> {
    let params = loaded.run.shell_params()?;
    let grid = Arc::new(make_log_grid(
        loaded.run.grid.r_min,
        loaded.run.grid.r_max,
        loaded.run.grid.count,
    )?);
    let model = solve_shell(&params, &grid, &loaded.run.solve_options())?;
    Ok((model, grid))
}

//! `vshell evolve`: sample the shell, evolve it and stream diagnostics.

use std::path::Path;

use vshell_core::dynamics::{
    default_timestep, dynamical_time, evolve, inner_orbit_period, picard_iterate, sample_shell,
    DiagnosticsRecord, EvolveConfig, FieldMode, ParticleEnsemble,
};
use vshell_core::record::save_ensemble;
use vshell_core::steady::ShellModel;

use crate::config::LoadedConfig;
use crate::output::{CsvField, CsvWriter};
use crate::CliError;

pub const DIAG_HEADER: [&str; 11] = [
    "t",
    "H",
    "E_kin",
    "E_pot",
    "casimir",
    "mass",
    "R_min",
    "P_max",
    "d_f_f0",
    "field_dist",
    "field_bound_ratio",
];

pub fn diag_row(csv: &mut CsvWriter, rec: &DiagnosticsRecord) -> Result<(), CliError> {
    csv.row(&[
        rec.t.into(),
        rec.h.into(),
        rec.e_kin.into(),
        rec.e_pot.into(),
        rec.casimir.into(),
        rec.mass.into(),
        rec.r_min.into(),
        rec.p_max.into(),
        rec.d_f_f0.into(),
        rec.field_dist.into(),
        rec.field_bound_ratio.into(),
    ])
}

/// Builds the evolve configuration, applying the default timestep rule when
/// `dt` is absent.
pub fn build_config(
    loaded: &LoadedConfig,
    model: &ShellModel,
    ensemble: &ParticleEnsemble,
) -> EvolveConfig {
    let e = &loaded.run.evolve;
    let dt = e
        .dt
        .unwrap_or_else(|| default_timestep(ensemble, model.field0()));
    let t_end = e
        .t_end
        .unwrap_or_else(|| e.t_end_inner_periods * inner_orbit_period(model));
    EvolveConfig {
        dt,
        t_end,
        output_every: e.output_every,
        field_mode: e.field_mode,
        deposition_bins: e.deposition_bins,
        picard_iterations: e.picard_iterations,
    }
}

pub fn run(loaded: &LoadedConfig, out_dir: &Path) -> Result<(), CliError> {
    let (model, _grid) = super::solve_from(loaded)?;
    let mut ensemble = sample_shell(&model, loaded.run.evolve.particles, loaded.run.seed)?;
    let config = build_config(loaded, &model, &ensemble);

    if config.field_mode == FieldMode::Picard {
        let horizon = loaded.run.evolve.picard_horizon_dyn_times * dynamical_time(&model);
        let result = picard_iterate(
            &ensemble,
            &model,
            horizon,
            config.picard_iterations,
            config.dt,
            loaded.run.evolve.picard_snapshot_every,
        )?;
        let mut gaps = CsvWriter::create(
            &out_dir.join("picard_gaps.csv"),
            &loaded.hash,
            loaded.run.seed,
            &["iterate", "gap"],
        )?;
        for (i, gap) in result.gaps.iter().enumerate() {
            gaps.row(&[CsvField::I(i as i64 + 1), (*gap).into()])?;
        }
        gaps.finish()?;
        let last = result.finals.last().expect("at least iterate 0");
        save_ensemble(&out_dir.join("ensemble.bin"), last, &model.params)?;
        log::info!("picard: gaps {:?}", result.gaps);
        return Ok(());
    }

    let records = evolve(&mut ensemble, &model, &config)?;
    let mut csv = CsvWriter::create(
        &out_dir.join("diagnostics.csv"),
        &loaded.hash,
        loaded.run.seed,
        &DIAG_HEADER,
    )?;
    for rec in &records {
        diag_row(&mut csv, rec)?;
    }
    csv.finish()?;
    save_ensemble(&out_dir.join("ensemble.bin"), &ensemble, &model.params)?;
    log::info!(
        "evolve: {} outputs to t = {}",
        records.len(),
        records.last().map(|r| r.t).unwrap_or(0.0)
    );
    Ok(())
}

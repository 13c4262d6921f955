//! `vshell steady`: solve the shell, write the model record, the radial
//! profile and a functional-report row.

use std::path::Path;

use vshell_core::functionals::{energy_casimir, AnalyticState};
use vshell_core::record::save_model;

use crate::config::LoadedConfig;
use crate::output::CsvWriter;
use crate::CliError;

pub fn run(loaded: &LoadedConfig, out_dir: &Path) -> Result<(), CliError> {
    let (model, _grid) = super::solve_from(loaded)?;
    save_model(&out_dir.join("model.json"), &model)?;

    let mut profile = CsvWriter::create(
        &out_dir.join("profile.csv"),
        &loaded.hash,
        loaded.run.seed,
        &["r", "rho0", "m", "U0", "g"],
    )?;
    let radii = model.grid().radii();
    let m = model.field0().mass_curve();
    let u = model.field0().potential_values();
    let g = model.bracket_values();
    for i in 0..radii.len() {
        profile.row(&[
            radii[i].into(),
            model.rho0().values()[i].into(),
            m[i].into(),
            u[i].into(),
            g[i].into(),
        ])?;
    }
    profile.finish()?;

    let rep = energy_casimir(&AnalyticState::base(&model));
    let mut report = CsvWriter::create(
        &out_dir.join("report.csv"),
        &loaded.hash,
        loaded.run.seed,
        &[
            "e_kin", "e_pot", "casimir", "h_c", "mass", "knorm", "rhonorm", "r1", "r2", "e0",
            "iterations",
        ],
    )?;
    report.row(&[
        rep.e_kin.into(),
        rep.e_pot.into(),
        rep.casimir.into(),
        rep.h_c.into(),
        rep.mass.into(),
        rep.knorm.into(),
        rep.rhonorm.into(),
        model.r1().into(),
        model.r2().into(),
        model.params.e0.into(),
        (model.iterations() as i64).into(),
    ])?;
    report.finish()?;
    log::info!(
        "steady: mass {} support [{}, {}] in {} iterations",
        model.mass(),
        model.r1(),
        model.r2(),
        model.iterations()
    );
    Ok(())
}

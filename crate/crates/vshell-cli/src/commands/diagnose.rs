//! `vshell diagnose`: consistency checks on a saved model or ensemble record.
//!
//! For a model record: Euler-Lagrange residual, interpolation-lemma ratio,
//! potential-energy bound, pairing identity and the field bound. For an
//! ensemble record: the field bound and the norms of the deposited density.

use std::path::Path;

use vshell_core::dynamics::field_bound_check;
use vshell_core::functionals::{
    energy_casimir, epot_bound_check, interpolation_check, rhonorm, AnalyticState,
};
use vshell_core::poisson::pairing_identity_check;
use vshell_core::record::{load_ensemble, load_model};
use vshell_core::steady::euler_lagrange_residual;

use crate::output::{CsvField, CsvWriter};
use crate::CliError;

pub fn run(input: &Path, out_dir: &Path) -> Result<(), CliError> {
    let mut csv = CsvWriter::create(
        &out_dir.join("diagnose.csv"),
        "none",
        0,
        &["check", "value1", "value2", "value3", "pass"],
    )?;
    let mut all_pass = true;
    let mut emit = |csv: &mut CsvWriter,
                    name: &str,
                    v1: f64,
                    v2: f64,
                    v3: f64,
                    pass: bool|
     -> Result<(), CliError> {
        all_pass &= pass;
        csv.row(&[
            name.into(),
            v1.into(),
            v2.into(),
            v3.into(),
            CsvField::S(pass.to_string()),
        ])?;
        Ok(())
    };

    let is_model = input.extension().map(|e| e == "json").unwrap_or(false);
    if is_model {
        let model = match load_model(input) {
            Ok(model) => model,
            Err(vshell_core::CoreError::EmptyShell) => {
                // vacuum record: every check is trivially zero
                emit(&mut csv, "vacuum", 0.0, 0.0, 0.0, true)?;
                csv.finish()?;
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        let stats = euler_lagrange_residual(&model, 10_000, 17)?;
        emit(
            &mut csv,
            "euler_lagrange_residual",
            stats.max,
            stats.mean,
            stats.min_exterior_margin,
            stats.max < 1e-5 && stats.min_exterior_margin > -1e-9,
        )?;
        let state = AnalyticState::base(&model);
        let (lhs, rhs, ratio) = interpolation_check(&state);
        emit(&mut csv, "interpolation_ratio", lhs, rhs, ratio, ratio.is_finite())?;
        for r_split in [1.0, 10.0] {
            let (lhs, mid, echo) = epot_bound_check(model.rho0(), &model.params, r_split)?;
            emit(
                &mut csv,
                &format!("epot_bound_R{r_split}"),
                lhs,
                mid,
                echo,
                lhs <= mid * (1.0 + 1e-12),
            )?;
        }
        // agreement scales with the model's grid resolution (O(h^2))
        let (lhs, rhs) = pairing_identity_check(model.rho0(), model.rho0());
        emit(
            &mut csv,
            "pairing_identity",
            lhs,
            rhs,
            (lhs - rhs).abs() / lhs.abs().max(1e-300),
            (lhs - rhs).abs() <= 1e-5 * lhs.abs(),
        )?;
        let ratio = field_bound_check(model.rho0());
        emit(&mut csv, "field_bound_ratio", ratio, 1.0, 0.0, ratio <= 1.0 + 1e-9)?;
        let rep = energy_casimir(&state);
        emit(&mut csv, "h_c_negative", rep.h_c, 0.0, 0.0, rep.h_c < 0.0)?;
    } else {
        let (ensemble, params) = load_ensemble(input)?;
        let grid = std::sync::Arc::new(vshell_core::make_log_grid(
            ensemble.min_radius() * 0.5,
            ensemble.radii().iter().cloned().fold(0.0, f64::max) * 2.0,
            512,
        )?);
        let deposit = vshell_core::dynamics::deposit_density(&ensemble, 64, &grid, params.mc)?;
        let ratio = field_bound_check(&deposit.density);
        emit(&mut csv, "field_bound_ratio", ratio, 1.05, 0.0, ratio <= 1.05)?;
        let rn = rhonorm(&deposit.density, &params);
        emit(&mut csv, "rhonorm", rn, 0.0, 0.0, rn.is_finite())?;
        let cas = ensemble.casimir_estimate(&params)?;
        let kn = ensemble.knorm(&params)?;
        emit(&mut csv, "casimir_knorm", cas, kn, 0.0, cas >= 0.0)?;
        // interpolation diagnostic from the deposited density
        let lhs = vshell_core::functionals::rho_norm_integral(&deposit.density, &params);
        let rhs = cas + ensemble.kinetic_energy();
        let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
        emit(&mut csv, "interpolation_ratio", lhs, rhs, ratio, ratio.is_finite())?;
        let sqrt_l0 = params.l0.sqrt();
        let bound = ensemble.min_radius() * ensemble.max_speed();
        emit(&mut csv, "rmin_pmax_bound", bound, sqrt_l0, 0.0, bound >= sqrt_l0)?;
    }
    csv.finish()?;
    if !all_pass {
        return Err(CliError::Core(vshell_core::CoreError::InvariantViolation(
            "one or more diagnostic checks failed (see diagnose.csv)".into(),
        )));
    }
    Ok(())
}

//! `vshell scalecheck`: closed-form vs direct-quadrature values of the
//! rescaling identities on random triples, plus the negative-energy witness.

use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use vshell_core::functionals::AnalyticState;
use vshell_core::scaling::{direct_functionals, negative_energy_witness, rescaled_functionals};
use vshell_core::{CoreError, ScalingTriple};

use crate::config::LoadedConfig;
use crate::output::{CsvField, CsvWriter};
use crate::CliError;

pub fn run(loaded: &LoadedConfig, out_dir: &Path) -> Result<(), CliError> {
    let (model, _grid) = super::solve_from(loaded)?;
    let sc = &loaded.run.scalecheck;
    let mut rng = rand_chacha(loaded.run.seed);
    let range = Uniform::new(sc.low, sc.high);

    let mut csv = CsvWriter::create(
        &out_dir.join("scalecheck.csv"),
        &loaded.hash,
        loaded.run.seed,
        &[
            "kind", "a", "b", "c", "e_kin_closed", "e_kin_direct", "err_e_kin", "casimir_closed",
            "casimir_direct", "err_casimir", "e_pot_closed", "e_pot_direct", "err_e_pot", "h_c",
        ],
    )?;

    let mut worst: f64 = 0.0;
    let mut check = |label: &str, triple: ScalingTriple, csv: &mut CsvWriter| -> Result<(), CliError> {
        let state = AnalyticState::rescaled(&model, triple);
        let closed = rescaled_functionals(&state);
        let direct = direct_functionals(&state);
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1e-300);
        let (ek, ec, ep) = (
            rel(closed.e_kin, direct.e_kin),
            rel(closed.casimir, direct.casimir),
            rel(closed.e_pot, direct.e_pot),
        );
        worst = worst.max(ek).max(ec).max(ep);
        csv.row(&[
            label.into(),
            triple.a.into(),
            triple.b.into(),
            triple.c.into(),
            closed.e_kin.into(),
            direct.e_kin.into(),
            ek.into(),
            closed.casimir.into(),
            direct.casimir.into(),
            ec.into(),
            closed.e_pot.into(),
            direct.e_pot.into(),
            ep.into(),
            closed.h_c.into(),
        ])?;
        Ok(())
    };

    check("identity", ScalingTriple::identity(), &mut csv)?;
    for _ in 0..sc.triples {
        let t = ScalingTriple::new(
            range.sample(&mut rng),
            range.sample(&mut rng),
            range.sample(&mut rng),
        )?;
        check("random", t, &mut csv)?;
    }

    let (b, report) = negative_energy_witness(sc.witness_mass, &model, sc.eta)?;
    csv.row(&[
        "witness".into(),
        CsvField::F(report.mass),
        b.into(),
        b.powf(-0.5 * sc.eta).into(),
        report.e_kin.into(),
        f64::NAN.into(),
        f64::NAN.into(),
        report.casimir.into(),
        f64::NAN.into(),
        f64::NAN.into(),
        report.e_pot.into(),
        f64::NAN.into(),
        f64::NAN.into(),
        report.h_c.into(),
    ])?;
    csv.finish()?;

    if report.h_c >= 0.0 {
        return Err(CliError::Core(CoreError::WitnessFailure { b }));
    }
    if worst > sc.tolerance {
        return Err(CliError::Core(CoreError::InvariantViolation(format!(
            "scaling identity violated: max relative error {worst:.3e} > {:.1e}",
            sc.tolerance
        ))));
    }
    log::info!("scalecheck: max identity error {worst:.3e}, witness b = {b}");
    Ok(())
}

fn rand_chacha(seed: u64) -> rand_chacha::ChaCha12Rng {
    rand_chacha::ChaCha12Rng::seed_from_u64(seed ^ 0x5343414c45)
}

//! Kinetic/potential energy, Casimir, energy-Casimir, weighted norms and the
//! stability distance `d(f, f0)` for ansatz-type states.
//!
//! An [`AnalyticState`] is the solved shell itself or its rescaling
//! `a f0(b r, c w, b^2 c^2 L - (b^2 c^2 - 1) L0)`. Functionals of rescaled
//! states are evaluated through the closed-form scaling identities applied to
//! the cached base integrals; the independent direct-quadrature route lives
//! in the `scaling` module.
//!
//! Particle-ensemble counterparts of these functionals are methods on
//! `dynamics::ParticleEnsemble`.

use crate::params::{ScalingTriple, ShellParams};
use crate::poisson::{field_distance, RadialDensity, RadialField};
use crate::steady::ShellModel;
use crate::{CoreError, Result};

/// The shell `f0` or its rescaled/translated variant.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticState<'a> {
    pub model: &'a ShellModel,
    pub triple: Option<ScalingTriple>,
}

impl<'a> AnalyticState<'a> {
    pub fn base(model: &'a ShellModel) -> Self {
        Self {
            model,
            triple: None,
        }
    }

    pub fn rescaled(model: &'a ShellModel, triple: ScalingTriple) -> Self {
        Self {
            model,
            triple: Some(triple),
        }
    }

    fn abc(&self) -> (f64, f64, f64) {
        match self.triple {
            Some(t) => (t.a, t.b, t.c),
            None => (1.0, 1.0, 1.0),
        }
    }

    /// Mass of the state, `a (bc)^{-3} M`.
    pub fn mass(&self) -> f64 {
        let (a, b, c) = self.abc();
        a * (b * c).powi(-3) * self.model.functionals().phase_mass
    }

    /// Spatial density of the state: `rho(r) = (a/c^3) rho0(b r)`.
    pub fn density_at(&self, r: f64) -> f64 {
        let (a, b, c) = self.abc();
        a / (c * c * c) * self.model.density_at(b * r)
    }

    /// Enclosed-mass curve of the state on the base grid:
    /// `m(r) = a (bc)^{-3} m0(b r)`.
    pub fn field(&self) -> RadialField {
        let (a, b, c) = self.abc();
        let scale = a * (b * c).powi(-3);
        let base = self.model.field0();
        let m: Vec<f64> = self
            .model
            .grid()
            .radii()
            .iter()
            .map(|&r| scale * base.m_at(b * r))
            .collect();
        RadialField::from_mass_curve(self.model.grid().clone(), m, self.model.params.mc)
            .expect("scaled mass curve stays monotone")
    }
}

/// Every functional of a state in one row.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct FunctionalReport {
    pub e_kin: f64,
    pub e_pot: f64,
    pub casimir: f64,
    pub h_c: f64,
    pub mass: f64,
    pub knorm: f64,
    pub rhonorm: f64,
}

/// `E_kin(f) = 2 pi^2 int (w^2 + L/r^2) f dL dw dr`; rescaled states use the
/// scaling identity with the shifted-`L0` payload.
pub fn kinetic_energy(state: &AnalyticState) -> f64 {
    let f = state.model.functionals();
    let l0 = state.model.params.l0;
    let (a, b, c) = state.abc();
    let bc2 = b * b * c * c;
    a * b.powi(-3) * c.powi(-5) * (f.e_kin_w + f.e_kin_q + bc2 * l0 * f.w2)
}

/// `E_pot(f) = -(1/8 pi) int |grad U_f|^2 dx - int (Mc/|x|) rho_f dx`.
pub fn potential_energy(state: &AnalyticState) -> f64 {
    let f = state.model.functionals();
    let (a, b, c) = state.abc();
    -a * a * b.powi(-5) * c.powi(-6) * f.field_energy
        - a * b.powi(-2) * c.powi(-3) * f.mc_interaction
}

/// Casimir functional `C(f) = int f^{1+1/k} (L - L0)_+^{-l/k} dv dx`.
pub fn casimir(state: &AnalyticState) -> f64 {
    let p = &state.model.params;
    let f = state.model.functionals();
    let (a, b, c) = state.abc();
    a.powf(1.0 + 1.0 / p.k) * (b * c).powf(-3.0 + 2.0 * p.l / p.k) * f.casimir
}

/// `||f||_{k,l} = C(f)^{k/(k+1)}`.
pub fn knorm(state: &AnalyticState) -> f64 {
    let k = state.model.params.k;
    casimir(state).powf(k / (k + 1.0))
}

/// `int rho^{1+1/n} |x|^{-2l/n} dx` by radial quadrature.
pub fn rho_norm_integral(density: &RadialDensity, params: &ShellParams) -> f64 {
    let n = params.n();
    let ex = 2.0 - 2.0 * params.l / n;
    let vals: Vec<f64> = density
        .grid()
        .radii()
        .iter()
        .zip(density.values())
        .map(|(&r, &rho)| 4.0 * std::f64::consts::PI * r.powf(ex) * rho.powf(1.0 + 1.0 / n))
        .collect();
    density.grid().quadrature(&vals)
}

/// `||rho||_{n,l} = (int rho^{1+1/n} |x|^{-2l/n} dx)^{n/(n+1)}`.
pub fn rhonorm(density: &RadialDensity, params: &ShellParams) -> f64 {
    let n = params.n();
    rho_norm_integral(density, params).powf(n / (n + 1.0))
}

/// Full functional report of an analytic state.
pub fn energy_casimir(state: &AnalyticState) -> FunctionalReport {
    let p = &state.model.params;
    let e_kin = kinetic_energy(state);
    let e_pot = potential_energy(state);
    let cas = casimir(state);
    FunctionalReport {
        e_kin,
        e_pot,
        casimir: cas,
        h_c: e_kin + e_pot + cas,
        mass: state.mass(),
        knorm: cas.powf(p.k / (p.k + 1.0)),
        rhonorm: rescaled_rho_norm_integral(state).powf(p.n() / (p.n() + 1.0)),
    }
}

/// `int rho^{1+1/n} |x|^{-2l/n} dx` of the state, integrated on the mapped
/// nodes `r_j / b` so the rescaled support is always covered.
fn rescaled_rho_norm_integral(state: &AnalyticState) -> f64 {
    let p = &state.model.params;
    let n = p.n();
    let ex = 2.0 - 2.0 * p.l / n;
    let (a, b, c) = state.abc();
    let amp = a / (c * c * c);
    let grid = state.model.grid();
    let vals: Vec<f64> = grid
        .radii()
        .iter()
        .zip(state.model.rho0().values())
        .map(|(&rj, &rho0)| {
            let r = rj / b;
            4.0 * std::f64::consts::PI * r.powf(ex) * (amp * rho0).powf(1.0 + 1.0 / n)
        })
        .collect();
    // mapped trapezoid weights are the base weights divided by b
    grid.quadrature(&vals) / b
}

/// `int E f dv dx` with the microscopic energy of the base model,
/// `E = (w^2 + L/r^2)/2 + U0(r) - Mc/r`.
pub fn int_e_state(state: &AnalyticState) -> f64 {
    let model = state.model;
    let f = model.functionals();
    if state.triple.is_none() {
        return f.int_e_f0;
    }
    let (a, b, c) = state.abc();
    // cross term int U0 rho dx on mapped nodes: 4 pi (a/c^3) b^-3 int s^2 U0(s/b) rho0(s) ds
    let grid = model.grid();
    let vals: Vec<f64> = grid
        .radii()
        .iter()
        .zip(model.rho0().values())
        .map(|(&s, &rho0)| 4.0 * std::f64::consts::PI * s * s * model.field0().u_at(s / b) * rho0)
        .collect();
    let u0_cross = a / (c * c * c) * b.powi(-3) * grid.quadrature(&vals);
    let mc_cross = a * b.powi(-2) * c.powi(-3) * f.mc_interaction;
    kinetic_energy(state) + u0_cross - mc_cross
}

/// Stability distance
/// `d(f, f0) = [C(f) - C(f0)] + [int E f - int E f0] - E0 (M_f - M_f0)`
/// for an analytic state against its base model.
pub fn distance_d(state: &AnalyticState) -> Result<f64> {
    let model = state.model;
    let f = model.functionals();
    let mass = state.mass();
    let dm = mass - f.phase_mass;
    if dm.abs() > 1e-8 * f.phase_mass {
        return Err(CoreError::ConstraintViolation(format!(
            "state mass {mass} differs from the model mass {} beyond tolerance",
            f.phase_mass
        )));
    }
    Ok(casimir(state) - f.casimir + int_e_state(state) - f.int_e_f0 - model.params.e0 * dm)
}

/// Both sides of the energy-Casimir difference identity
/// `H_C(f) - H_C(f0) = d(f, f0) - (1/8 pi) int |grad U_f - grad U_f0|^2 dx`.
pub fn hc_identity_sides(state: &AnalyticState) -> Result<(f64, f64)> {
    let f = state.model.functionals();
    let report = energy_casimir(state);
    let lhs = report.h_c - f.h_c;
    let fd = field_distance(&state.field(), state.model.field0());
    let rhs = distance_d(state)? - fd;
    Ok((lhs, rhs))
}

/// Lemma-style interpolation diagnostic: reports
/// `lhs = int rho_f^{1+1/n} |x|^{-2l/n} dx`, `rhs = C(f) + E_kin(f)` and
/// their ratio (no fixed constant is asserted).
pub fn interpolation_check(state: &AnalyticState) -> (f64, f64, f64) {
    let lhs = rescaled_rho_norm_integral(state);
    let rhs = casimir(state) + kinetic_energy(state);
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    (lhs, rhs, ratio)
}

/// First inequality of the potential-energy bound:
/// `-E_pot <= (1/2) int_0^R (m^2/r^2 + 8 pi Mc r rho) dr + (M^2 + 2 M Mc)/(2R)`.
///
/// Returns `(lhs, mid, rhs)` where `rhs` echoes the `zeta(R)`-shaped bound
/// with unit constant, for reporting only; the caller asserts `lhs <= mid`.
pub fn epot_bound_check(
    density: &RadialDensity,
    params: &ShellParams,
    r_split: f64,
) -> Result<(f64, f64, f64)> {
    if !(r_split > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "split radius must be positive, got {r_split}"
        )));
    }
    let mc = params.mc;
    let field = RadialField::from_density(density, 0.0)?;
    let total = density.total_mass();
    let grid = density.grid();
    let radii = grid.radii();

    let r_rho: Vec<f64> = radii
        .iter()
        .zip(density.values())
        .map(|(&r, &rho)| r * rho)
        .collect();
    let lhs = crate::poisson::field_energy(&field)
        + 4.0 * std::f64::consts::PI * mc * grid.quadrature(&r_rho);

    // truncated pieces share the quadrature of the full ones
    let m = field.mass_curve();
    let mut half_m2 = 0.0;
    for i in 0..radii.len() - 1 {
        if radii[i] >= r_split {
            break;
        }
        let hi = radii[i + 1].min(r_split);
        let m_hi = field.m_at(hi);
        half_m2 += 0.5 * cell_m2_over_r2(radii[i], hi, m[i], m_hi);
    }
    // analytic continuation m = M between the grid cutoff and the split radius
    if r_split > grid.r_cut() {
        half_m2 += 0.5 * total * total * (1.0 / grid.r_cut() - 1.0 / r_split);
    }
    let clipped: Vec<f64> = radii
        .iter()
        .zip(density.values())
        .map(|(&r, &rho)| if r <= r_split { r * rho } else { 0.0 })
        .collect();
    let mc_part = 4.0 * std::f64::consts::PI * mc * grid.quadrature(&clipped);
    let mid = half_m2 + mc_part + (total * total + 2.0 * total * mc) / (2.0 * r_split);

    let q1 = params.l - params.k + 0.5;
    let q2 = 4.0 * params.l + 5.0 - params.n();
    let zeta = if r_split <= 1.0 {
        r_split.powf(q1)
    } else {
        r_split.powf(q2)
    };
    let n = params.n();
    let rhs = zeta * (1.0 + rhonorm(density, params).powf(1.0 + 1.0 / n))
        + (total * total + 2.0 * total * mc) / (2.0 * r_split);
    Ok((lhs, mid, rhs))
}

fn cell_m2_over_r2(r0: f64, r1: f64, m0: f64, m1: f64) -> f64 {
    if r1 <= r0 {
        return 0.0;
    }
    let b = (m1 - m0) / (r1 - r0);
    let a = m0 - b * r0;
    a * a * (1.0 / r0 - 1.0 / r1) + 2.0 * a * b * (r1 / r0).ln() + b * b * (r1 - r0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_log_grid;
    use crate::steady::{solve_shell, SolveOptions};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn reference_model() -> ShellModel {
        let params = ShellParams::new(1.0, 1.0, 0.1, 1.0, -2.0, None).unwrap();
        let grid = Arc::new(make_log_grid(0.01, 10.0, 2000).unwrap());
        solve_shell(&params, &grid, &SolveOptions::default()).unwrap()
    }

    #[test]
    fn identity_triple_fixes_every_functional() {
        let model = reference_model();
        let base = energy_casimir(&AnalyticState::base(&model));
        let id = energy_casimir(&AnalyticState::rescaled(
            &model,
            ScalingTriple::identity(),
        ));
        assert_eq!(base.e_kin, id.e_kin);
        assert_eq!(base.e_pot, id.e_pot);
        assert_eq!(base.casimir, id.casimir);
        assert_eq!(base.mass, id.mass);
    }

    #[test]
    fn report_is_consistent() {
        let model = reference_model();
        let rep = energy_casimir(&AnalyticState::base(&model));
        assert_relative_eq!(rep.h_c, rep.e_kin + rep.e_pot + rep.casimir);
        assert_relative_eq!(rep.mass, model.mass(), max_relative = 1e-10);
        // knorm^{(k+1)/k} = casimir
        assert_relative_eq!(rep.knorm.powf(2.0), rep.casimir, max_relative = 1e-12);
        // H_C(f0) < 0 (h_M < 0)
        assert!(rep.h_c < 0.0);
    }

    #[test]
    fn casimir_scaling_ratio() {
        // (k,l) = (1,1), (a,b,c) = (1,2,1): C ratio = 2^{-3+2} = 1/2
        let model = reference_model();
        let base = casimir(&AnalyticState::base(&model));
        let scaled = casimir(&AnalyticState::rescaled(
            &model,
            ScalingTriple::new(1.0, 2.0, 1.0).unwrap(),
        ));
        assert_relative_eq!(scaled / base, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn kinetic_contraction_for_small_bc() {
        let model = reference_model();
        let t = ScalingTriple::new(1.0, 0.8, 0.9).unwrap();
        let scaled = kinetic_energy(&AnalyticState::rescaled(&model, t));
        let bound = t.a * t.b.powi(-3) * t.c.powi(-5)
            * kinetic_energy(&AnalyticState::base(&model));
        assert!(scaled <= bound);
    }

    #[test]
    fn minimizer_beats_mass_preserving_rescalings() {
        let model = reference_model();
        let h0 = model.functionals().h_c;
        for &(b, c) in &[(0.9, 1.0), (1.05, 1.0), (1.0, 1.1), (1.08, 0.95)] {
            let t = ScalingTriple::mass_preserving(b, c).unwrap();
            let rep = energy_casimir(&AnalyticState::rescaled(&model, t));
            assert!(
                rep.h_c >= h0 - 1e-12,
                "H_C({b},{c}) = {} < H_C(f0) = {h0}",
                rep.h_c
            );
        }
    }

    #[test]
    fn distance_properties() {
        let model = reference_model();
        // d(f0, f0) = 0
        let d0 = distance_d(&AnalyticState::base(&model)).unwrap();
        assert!(d0.abs() < 1e-12, "d(f0,f0) = {d0}");
        // mass-preserving rescaling: d > 0
        let t = ScalingTriple::mass_preserving(1.01, 1.01).unwrap();
        let d = distance_d(&AnalyticState::rescaled(&model, t)).unwrap();
        assert!(d > 0.0, "d = {d}");
        // non-mass-preserving is rejected
        let bad = ScalingTriple::new(1.0, 1.1, 1.0).unwrap();
        assert!(matches!(
            distance_d(&AnalyticState::rescaled(&model, bad)),
            Err(CoreError::ConstraintViolation(_))
        ));
    }

    #[test]
    fn energy_casimir_difference_identity() {
        let model = reference_model();
        for &(b, c) in &[(1.02, 0.99), (0.95, 1.03), (1.1, 1.05)] {
            let t = ScalingTriple::mass_preserving(b, c).unwrap();
            let state = AnalyticState::rescaled(&model, t);
            let (lhs, rhs) = hc_identity_sides(&state).unwrap();
            let scale = lhs.abs().max(rhs.abs()).max(model.functionals().h_c.abs());
            assert!(
                (lhs - rhs).abs() <= 1e-6 * scale,
                "identity gap {:.3e} at (b,c) = ({b},{c})",
                (lhs - rhs).abs() / scale
            );
        }
    }

    #[test]
    fn interpolation_ratio_finite_across_scalings() {
        let model = reference_model();
        for &lam in &[0.1, 0.5, 1.0, 2.0, 10.0] {
            // amplitude scaling via a = lam, b = c = 1
            let t = ScalingTriple::new(lam, 1.0, 1.0).unwrap();
            let (lhs, rhs, ratio) = interpolation_check(&AnalyticState::rescaled(&model, t));
            assert!(lhs > 0.0 && rhs > 0.0);
            assert!(ratio.is_finite() && ratio > 0.0);
        }
    }

    #[test]
    fn epot_bound_holds() {
        let model = reference_model();
        for &r_split in &[1.0, 5.0, 10.0, 100.0] {
            let (lhs, mid, _rhs) =
                epot_bound_check(model.rho0(), &model.params, r_split).unwrap();
            assert!(
                lhs <= mid * (1.0 + 1e-12),
                "bound fails at R = {r_split}: {lhs} > {mid}"
            );
        }
    }

    #[test]
    fn point_mass_interaction_term() {
        // uniform shell rho = 3/(4 pi) on [1, 2] with Mc = 1:
        // int (Mc/|x|) rho dx = 4 pi Mc int r rho dr = 3 * 3/2 = 4.5
        let grid = Arc::new(make_log_grid(1.0, 2.0, 3000).unwrap());
        let rho = vec![3.0 / (4.0 * std::f64::consts::PI); grid.len()];
        let d = RadialDensity::new(grid.clone(), rho).unwrap();
        let vals: Vec<f64> = grid
            .radii()
            .iter()
            .zip(d.values())
            .map(|(&r, &rho)| 4.0 * std::f64::consts::PI * r * rho)
            .collect();
        assert_relative_eq!(grid.quadrature(&vals), 4.5, max_relative = 1e-9);
    }

    #[test]
    fn epot_bound_zero_density() {
        let grid = Arc::new(make_log_grid(0.1, 10.0, 64).unwrap());
        let zero = RadialDensity::zero(grid);
        let params = ShellParams::new(1.0, 1.0, 0.1, 1.0, -2.0, None).unwrap();
        let (lhs, mid, _) = epot_bound_check(&zero, &params, 10.0).unwrap();
        assert_eq!(lhs, 0.0);
        assert_eq!(mid, 0.0);
    }
}

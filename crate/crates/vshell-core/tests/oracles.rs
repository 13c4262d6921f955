//! Independent quadrature oracles for the closed-form reductions.
//!
//! Everything here integrates the defining phase-space integrals directly
//! (nested Gauss-Legendre with exact inner limits) and compares against the
//! library's Beta-function reductions. No oracle shares code with the
//! implementation path it checks.

use std::sync::Arc;

use vshell_core::functionals::AnalyticState;
use vshell_core::poisson::{
    field_distance, field_energy, pairing_identity_check, RadialDensity, RadialField,
};
use vshell_core::steady::{
    moment_integral, shell_density_from_potential, solve_shell, ShellModel, SolveOptions,
};
use vshell_core::{make_log_grid, RadialGrid, ShellParams};

// ---------------------------------------------------------------------------
// small deterministic RNG and Gauss-Legendre helper for the oracles
// ---------------------------------------------------------------------------

struct Lcg(u64);

impl Lcg {
    fn unit(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}

/// n-point Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
fn gauss_n(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..80 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        xs[n - 1 - i] = x;
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

fn gauss64() -> (Vec<f64>, Vec<f64>) {
    gauss_n(64)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let p = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// `int_0^1 f(u) du` with 64-point Gauss-Legendre.
fn integrate_unit<F: Fn(f64) -> f64>(nodes: &[f64], weights: &[f64], f: F) -> f64 {
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| 0.5 * w * f(0.5 * (x + 1.0)))
        .sum()
}

fn reference_model() -> ShellModel {
    let params = ShellParams::new(1.0, 1.0, 0.1, 1.0, -2.0, None).unwrap();
    let grid = Arc::new(make_log_grid(0.01, 10.0, 2000).unwrap());
    solve_shell(&params, &grid, &SolveOptions::default()).unwrap()
}

// ---------------------------------------------------------------------------
// the (w, L) reduction: direct 2D quadrature of the ansatz integrals
// ---------------------------------------------------------------------------

/// Brute-force `int int (e0m - (w^2 + q/r^2)/2)_+^p q^l dw dq` with exact
/// limits, `q = L - L0`.
fn moment_2d(p: f64, l: f64, r: f64, g: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    if g <= 0.0 {
        return 0.0;
    }
    let w_max = (2.0 * g).sqrt();
    let outer = |u: f64| -> f64 {
        let w = -w_max + 2.0 * w_max * u;
        let rem = g - 0.5 * w * w;
        if rem <= 0.0 {
            return 0.0;
        }
        let q_max = 2.0 * r * r * rem;
        let inner = integrate_unit(nodes, weights, |v| {
            let q = q_max * v;
            let margin = rem - 0.5 * q / (r * r);
            if margin <= 0.0 {
                0.0
            } else {
                margin.powf(p) * q.powf(l)
            }
        });
        inner * q_max
    };
    integrate_unit(nodes, weights, outer) * 2.0 * w_max
}

#[test]
fn density_formula_matches_2d_quadrature() {
    // rho(r) = (pi/r^2) * int int (E0 - E)_+^k (L - L0)_+^l dw dL must equal
    // A C(k,l) r^{2l} (E0 - U + Mc/r - L0/(2 r^2))_+^n pointwise.
    let (nodes, weights) = gauss_n(128);
    for &(k, l, l0, mc, e0, r) in &[
        (1.0, 1.0, 0.1, 1.0, -0.5, 1.0),
        (1.0, 1.0, 0.1, 1.0, -0.5, 0.7),
        (0.7, 1.3, 0.2, 0.8, -0.4, 1.2),
        (0.5, 0.5, 0.05, 1.0, -1.0, 0.6),
    ] {
        let params = ShellParams::new(k, l, l0, mc, e0, Some(1.0)).unwrap();
        let grid = Arc::new(make_log_grid(0.5 * r, 2.0 * r, 3).unwrap());
        let rho = shell_density_from_potential(&params, &grid, &[0.0, 0.0, 0.0]).unwrap();
        let mid = grid.radii()[1];
        let g = e0 + mc / mid - 0.5 * l0 / (mid * mid);
        let direct =
            std::f64::consts::PI / (mid * mid) * moment_2d(k, l, mid, g, &nodes, &weights);
        let rel = (rho.values()[1] - direct).abs() / direct;
        assert!(
            rel < 1e-5,
            "density reduction mismatch {rel:.2e} at (k,l) = ({k},{l})"
        );
    }
}

#[test]
fn moment_integral_matches_2d_quadrature() {
    let (nodes, weights) = gauss_n(128);
    let mut rng = Lcg(0xfeed5eed);
    for _ in 0..10 {
        let p = rng.range(0.5, 2.5);
        let l = rng.range(0.5, 2.5);
        let r = rng.range(0.3, 3.0);
        let g = rng.range(0.05, 1.5);
        let params = ShellParams::new(0.5, l, 0.1, 1.0, -0.5, Some(1.0)).unwrap();
        let closed = moment_integral(&params, p, r, g).unwrap();
        let brute = moment_2d(p, l, r, g, &nodes, &weights);
        let rel = (closed - brute).abs() / brute;
        assert!(
            rel < 1e-5,
            "moment mismatch {rel:.2e} at p={p:.3} l={l:.3} r={r:.3} g={g:.3}"
        );
    }
}

// ---------------------------------------------------------------------------
// full 3D (r, w, L) brute force against the reduced 1D functionals
// ---------------------------------------------------------------------------

/// Integrates `weighting(r, w, L) * f0^power * (L-L0)^{q_exponent}` over the
/// whole phase space with the flat measure `dr dw dL`, nested exact-limit GL.
fn brute_phase_integral<W: Fn(f64, f64, f64) -> f64>(
    model: &ShellModel,
    weighting: W,
    power: f64,
    q_exponent: f64,
    nodes: &[f64],
    weights: &[f64],
) -> f64 {
    let p = &model.params;
    let (r1, r2) = (model.r1(), model.r2());
    // 400 uniform radial panels over the support, 8-pt GL inside each
    let (gn, gw) = gauss_n(8);
    let panels = 400;
    let dr = (r2 - r1) / panels as f64;
    let mut total = 0.0;
    for j in 0..panels {
        let lo = r1 + j as f64 * dr;
        for (x, wr) in gn.iter().zip(&gw) {
            let r = lo + 0.5 * dr * (x + 1.0);
            let g = model.bracket_at(r);
            if g <= 0.0 {
                continue;
            }
            let w_max = (2.0 * g).sqrt();
            let outer = |u: f64| -> f64 {
                let w = -w_max + 2.0 * w_max * u;
                let rem = g - 0.5 * w * w;
                if rem <= 0.0 {
                    return 0.0;
                }
                let q_max = 2.0 * r * r * rem;
                integrate_unit(nodes, weights, |v| {
                    let q = q_max * v;
                    let margin = rem - 0.5 * q / (r * r);
                    if margin <= 0.0 {
                        return 0.0;
                    }
                    let f0 = p.amplitude * margin.powf(p.k) * q.powf(p.l);
                    weighting(r, w, p.l0 + q) * f0.powf(power) * q.powf(q_exponent)
                }) * q_max
            };
            let inner = integrate_unit(nodes, weights, outer) * 2.0 * w_max;
            total += 0.5 * dr * wr * inner;
        }
    }
    total
}

#[test]
fn reduced_kinetic_and_casimir_match_3d_brute_force() {
    let model = reference_model();
    let (nodes, weights) = gauss64();
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;

    let e_kin_brute = 2.0
        * pi2
        * brute_phase_integral(
            &model,
            |r, w, l| w * w + l / (r * r),
            1.0,
            0.0,
            &nodes,
            &weights,
        );
    let f = model.functionals();
    let rel = (e_kin_brute - f.e_kin).abs() / f.e_kin;
    assert!(rel < 1e-4, "kinetic energy 3D mismatch {rel:.2e}");

    // Casimir integrand: f^{1+1/k} (L-L0)^{-l/k}
    let p = &model.params;
    let cas_brute = 4.0
        * pi2
        * brute_phase_integral(
            &model,
            |_, _, _| 1.0,
            1.0 + 1.0 / p.k,
            -p.l / p.k,
            &nodes,
            &weights,
        );
    let rel = (cas_brute - f.casimir).abs() / f.casimir;
    assert!(rel < 1e-4, "casimir 3D mismatch {rel:.2e}");

    // mass as a sanity anchor for the brute-force machinery itself
    let mass_brute =
        4.0 * pi2 * brute_phase_integral(&model, |_, _, _| 1.0, 1.0, 0.0, &nodes, &weights);
    let rel = (mass_brute - model.mass()).abs() / model.mass();
    assert!(rel < 1e-4, "mass 3D mismatch {rel:.2e}");
}

// ---------------------------------------------------------------------------
// radial Poisson identities on random compact densities
// ---------------------------------------------------------------------------

/// Smooth compactly supported bump `c (r-a)^2 (b-r)^2` on `[a, b]`.
fn bump_density(grid: &Arc<RadialGrid>, a: f64, b: f64, amp: f64) -> RadialDensity {
    let rho: Vec<f64> = grid
        .radii()
        .iter()
        .map(|&r| {
            if r > a && r < b {
                amp * (r - a).powi(2) * (b - r).powi(2)
            } else {
                0.0
            }
        })
        .collect();
    RadialDensity::new(grid.clone(), rho).unwrap()
}

#[test]
fn pairing_identity_on_random_densities() {
    let grid = Arc::new(make_log_grid(0.05, 50.0, 8000).unwrap());
    let mut rng = Lcg(0xabcdef12345);
    for case in 0..10 {
        let a1 = rng.range(0.1, 2.0);
        let b1 = a1 + rng.range(0.5, 4.0);
        let a2 = rng.range(0.1, 2.0);
        let b2 = a2 + rng.range(0.5, 4.0);
        let d1 = bump_density(&grid, a1, b1, rng.range(0.1, 2.0));
        let d2 = bump_density(&grid, a2, b2, rng.range(0.1, 2.0));
        let (lhs, rhs) = pairing_identity_check(&d1, &d2);
        let rel = (lhs - rhs).abs() / lhs.abs();
        assert!(rel < 1e-6, "pairing identity off by {rel:.2e} in case {case}");
    }
}

#[test]
fn epot_bound_on_random_densities() {
    let grid = Arc::new(make_log_grid(0.05, 200.0, 4000).unwrap());
    let params = ShellParams::new(1.0, 1.0, 0.1, 1.0, -2.0, None).unwrap();
    let mut rng = Lcg(0x5151515151);
    for _ in 0..10 {
        let a = rng.range(0.1, 3.0);
        let b = a + rng.range(0.5, 5.0);
        let d = bump_density(&grid, a, b, rng.range(0.05, 1.0));
        for r_split in [1.0, 5.0, 10.0, 100.0] {
            let (lhs, mid, _) =
                vshell_core::functionals::epot_bound_check(&d, &params, r_split).unwrap();
            assert!(
                lhs <= mid * (1.0 + 1e-12),
                "Epot bound fails: {lhs} > {mid} at R = {r_split}"
            );
        }
    }
}

#[test]
fn field_distance_sqrt_is_a_seminorm() {
    let grid = Arc::new(make_log_grid(0.05, 50.0, 1500).unwrap());
    let mut rng = Lcg(0x7777777);
    for _ in 0..8 {
        let mk = |rng: &mut Lcg| {
            let a = rng.range(0.1, 2.0);
            let b = a + rng.range(0.5, 4.0);
            let d = bump_density(&grid, a, b, rng.range(0.1, 2.0));
            RadialField::from_density(&d, 0.0).unwrap()
        };
        let (f1, f2, f3) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
        let d12 = field_distance(&f1, &f2).sqrt();
        let d23 = field_distance(&f2, &f3).sqrt();
        let d13 = field_distance(&f1, &f3).sqrt();
        assert!(d13 <= d12 + d23 + 1e-12, "triangle inequality violated");
    }
}

#[test]
fn exterior_monopole_bound_pointwise() {
    let grid = Arc::new(make_log_grid(0.05, 50.0, 2000).unwrap());
    let d = bump_density(&grid, 0.5, 2.5, 1.0);
    let f = RadialField::from_density(&d, 0.0).unwrap();
    let total = f.total_mass();
    for &r in &[2.5, 3.0, 5.0, 20.0, 49.0] {
        assert!(f.u_at(r).abs() <= total / r * (1.0 + 1e-12));
    }
}

// ---------------------------------------------------------------------------
// energy-Casimir difference identity at tight tolerance (analytic states)
// ---------------------------------------------------------------------------

#[test]
fn hc_identity_on_random_admissible_states() {
    let model = reference_model();
    let mut rng = Lcg(0x1234567);
    for _ in 0..8 {
        let b = rng.range(0.85, 1.2);
        let c = rng.range(0.85, 1.2);
        let t = vshell_core::ScalingTriple::mass_preserving(b, c).unwrap();
        let state = AnalyticState::rescaled(&model, t);
        let (lhs, rhs) = vshell_core::functionals::hc_identity_sides(&state).unwrap();
        let scale = model
            .functionals()
            .h_c
            .abs()
            .max(lhs.abs())
            .max(rhs.abs());
        assert!(
            (lhs - rhs).abs() < 1e-6 * scale,
            "identity gap {:.3e} at (b, c) = ({b:.3}, {c:.3})",
            (lhs - rhs).abs() / scale
        );
    }
}

#[test]
fn distance_nonnegative_on_random_rescalings() {
    let model = reference_model();
    let mut rng = Lcg(0x88aa88aa);
    for _ in 0..20 {
        let b = rng.range(0.8, 1.25);
        let c = rng.range(0.8, 1.25);
        let t = vshell_core::ScalingTriple::mass_preserving(b, c).unwrap();
        let d = vshell_core::functionals::distance_d(&AnalyticState::rescaled(&model, t)).unwrap();
        assert!(d >= -1e-10, "d = {d} at (b, c) = ({b}, {c})");
    }
}

#[test]
fn field_energy_scaling_in_density() {
    let grid = Arc::new(make_log_grid(0.05, 50.0, 1000).unwrap());
    let d1 = bump_density(&grid, 0.5, 2.0, 1.0);
    let d2 = bump_density(&grid, 0.5, 2.0, 2.5);
    let e1 = field_energy(&RadialField::from_density(&d1, 0.0).unwrap());
    let e2 = field_energy(&RadialField::from_density(&d2, 0.0).unwrap());
    let rel: f64 = e2 / e1 / 6.25 - 1.0;
    assert!(rel.abs() < 1e-12);
}

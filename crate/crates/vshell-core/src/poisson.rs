//! Enclosed mass, potential, field energy and field distances for
//! spherically symmetric densities.
//!
//! The enclosed mass `m(r) = 4 pi int_0^r s^2 rho(s) ds` is accumulated with
//! the grid quadrature and interpolated piecewise-linearly between nodes,
//! which keeps it nondecreasing. Every integral of the form `int m .. / r^2`
//! is evaluated cell-exactly for that piecewise-linear `m`, so a region of
//! constant `m` reproduces the Kepler potential `-M/r` to rounding. Beyond
//! `r_cut` fields are continued analytically with `m = M`.

use std::sync::Arc;

use crate::grid::{pairwise_sum_by, RadialGrid};
use crate::{CoreError, Result};

/// A nonnegative density sampled on a radial grid.
#[derive(Debug, Clone)]
pub struct RadialDensity {
    grid: Arc<RadialGrid>,
    rho: Vec<f64>,
    total_mass: f64,
}

impl RadialDensity {
    pub fn new(grid: Arc<RadialGrid>, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != grid.len() {
            return Err(CoreError::InvalidArgument(format!(
                "density needs {} samples, got {}",
                grid.len(),
                rho.len()
            )));
        }
        if rho.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::InvalidArgument(
                "density values must be finite and nonnegative".into(),
            ));
        }
        let total_mass = mass_quadrature(&grid, &rho);
        Ok(Self {
            grid,
            rho,
            total_mass,
        })
    }

    pub fn zero(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            rho: vec![0.0; n],
            total_mass: 0.0,
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    /// Cached `4 pi int r^2 rho dr`.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Max over grid nodes; stands in for the continuum sup norm.
    pub fn sup_norm(&self) -> f64 {
        self.rho.iter().cloned().fold(0.0, f64::max)
    }
}

fn mass_quadrature(grid: &RadialGrid, rho: &[f64]) -> f64 {
    let r = grid.radii();
    grid.quadrature(
        &r.iter()
            .zip(rho)
            .map(|(ri, ki)| 4.0 * std::f64::consts::PI * ri * ri * ki)
            .collect::<Vec<_>>(),
    )
}

/// `m(r_i) = 4 pi int_0^{r_i} s^2 rho ds` by cumulative trapezoid; the grid
/// starts at `r_min > 0` and the density is taken as zero below it.
pub fn enclosed_mass(density: &RadialDensity) -> Vec<f64> {
    let r = density.grid.radii();
    let rho = density.values();
    let mut m = vec![0.0; r.len()];
    let mut acc = 0.0;
    for i in 1..r.len() {
        let f0 = 4.0 * std::f64::consts::PI * r[i - 1] * r[i - 1] * rho[i - 1];
        let f1 = 4.0 * std::f64::consts::PI * r[i] * r[i] * rho[i];
        acc += 0.5 * (f0 + f1) * (r[i] - r[i - 1]);
        m[i] = acc;
    }
    m
}

/// `U(r_i) = -int_{r_i}^{r_cut} m(s)/s^2 ds - M/r_cut`, cell-exact for
/// piecewise-linear `m`; `U(r_cut) = -M/r_cut` and `U -> 0` at infinity.
pub fn potential_from_mass(grid: &RadialGrid, m: &[f64]) -> Vec<f64> {
    assert_eq!(m.len(), grid.len());
    let r = grid.radii();
    let n = r.len();
    let total = m[n - 1];
    let mut u = vec![0.0; n];
    u[n - 1] = -total / grid.r_cut();
    for i in (0..n - 1).rev() {
        u[i] = u[i + 1] - cell_int_m_over_r2(r[i], r[i + 1], m[i], m[i + 1]);
    }
    u
}

/// `int_{r0}^{r1} (a + b s)/s^2 ds` for the linear interpolant of `m` on the cell.
fn cell_int_m_over_r2(r0: f64, r1: f64, m0: f64, m1: f64) -> f64 {
    let b = (m1 - m0) / (r1 - r0);
    let a = m0 - b * r0;
    a * (1.0 / r0 - 1.0 / r1) + b * (r1 / r0).ln()
}

/// `int_{r0}^{r1} (a1 + b1 s)(a2 + b2 s)/s^2 ds` for two linear interpolants.
fn cell_int_mm_over_r2(r0: f64, r1: f64, p0: f64, p1: f64, q0: f64, q1: f64) -> f64 {
    let b1 = (p1 - p0) / (r1 - r0);
    let a1 = p0 - b1 * r0;
    let b2 = (q1 - q0) / (r1 - r0);
    let a2 = q0 - b2 * r0;
    a1 * a2 * (1.0 / r0 - 1.0 / r1) + (a1 * b2 + a2 * b1) * (r1 / r0).ln() + b1 * b2 * (r1 - r0)
}

/// Enclosed mass, potential and the central point mass of a configuration.
#[derive(Debug, Clone)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    m: Vec<f64>,
    u: Vec<f64>,
    mc: f64,
}

impl RadialField {
    /// Field generated by a density plus a central point mass `mc`.
    pub fn from_density(density: &RadialDensity, mc: f64) -> Result<Self> {
        let m = enclosed_mass(density);
        Self::from_mass_curve(density.grid.clone(), m, mc)
    }

    /// Field from a precomputed enclosed-mass curve.
    pub fn from_mass_curve(grid: Arc<RadialGrid>, m: Vec<f64>, mc: f64) -> Result<Self> {
        if m.len() != grid.len() {
            return Err(CoreError::InvalidArgument(format!(
                "mass curve needs {} samples, got {}",
                grid.len(),
                m.len()
            )));
        }
        if m[0] < 0.0 || m.windows(2).any(|p| p[1] < p[0]) {
            return Err(CoreError::InvariantViolation(
                "enclosed mass must be nonnegative and nondecreasing".into(),
            ));
        }
        if !(mc >= 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "central mass must be nonnegative, got {mc}"
            )));
        }
        let u = potential_from_mass(&grid, &m);
        Ok(Self { grid, m, u, mc })
    }

    /// Vacuum field: only the central point mass.
    pub fn vacuum(grid: Arc<RadialGrid>, mc: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            m: vec![0.0; n],
            u: vec![0.0; n],
            mc,
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn mass_curve(&self) -> &[f64] {
        &self.m
    }

    pub fn potential_values(&self) -> &[f64] {
        &self.u
    }

    pub fn central_mass(&self) -> f64 {
        self.mc
    }

    pub fn total_mass(&self) -> f64 {
        *self.m.last().unwrap()
    }

    /// Monotone piecewise-linear interpolation of the enclosed mass;
    /// constant continuation below the grid and `M` beyond `r_cut`.
    pub fn m_at(&self, r: f64) -> f64 {
        let radii = self.grid.radii();
        if r <= radii[0] {
            return self.m[0];
        }
        if r >= self.grid.r_cut() {
            return self.total_mass();
        }
        let i = self.grid.cell_of(r);
        let t = (r - radii[i]) / (radii[i + 1] - radii[i]);
        self.m[i] + t * (self.m[i + 1] - self.m[i])
    }

    /// Shell potential (excluding the central mass term), evaluated
    /// cell-exactly for the piecewise-linear mass curve.
    pub fn u_at(&self, r: f64) -> f64 {
        let radii = self.grid.radii();
        if r >= self.grid.r_cut() {
            return -self.total_mass() / r;
        }
        if r <= radii[0] {
            // enclosed mass held constant below the grid
            if self.m[0] == 0.0 {
                return self.u[0];
            }
            return self.u[0] - self.m[0] * (1.0 / r - 1.0 / radii[0]);
        }
        let i = self.grid.cell_of(r);
        let m_r = self.m_at(r);
        self.u[i + 1] - cell_int_m_over_r2(r, radii[i + 1], m_r, self.m[i + 1])
    }

    /// Radial acceleration `-(m(r) + Mc)/r^2`, excluding the centrifugal term.
    pub fn force_at(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "force requires r > 0, got {r}"
            )));
        }
        Ok(-(self.m_at(r) + self.mc) / (r * r))
    }
}

/// Convenience wrapper matching the operation contract.
pub fn effective_radial_force(field: &RadialField, r: f64) -> Result<f64> {
    field.force_at(r)
}

/// Field energy `(1/8 pi) int |grad U|^2 dx = (1/2) int_0^inf m^2/r^2 dr`
/// with the analytic tail `M^2 / (2 r_cut)`.
pub fn field_energy(field: &RadialField) -> f64 {
    let r = field.grid.radii();
    let m = &field.m;
    let body = pairwise_sum_by(r.len() - 1, |i| {
        cell_int_mm_over_r2(r[i], r[i + 1], m[i], m[i + 1], m[i], m[i + 1])
    });
    let total = field.total_mass();
    0.5 * (body + total * total / field.grid.r_cut())
}

/// `(1/8 pi) int |grad U1 - grad U2|^2 dx = (1/2) int (m1 - m2)^2 / r^2 dr`.
///
/// Fields on different grids are resampled onto the first grid.
pub fn field_distance(field1: &RadialField, field2: &RadialField) -> f64 {
    let r = field1.grid.radii();
    let same_grid = Arc::ptr_eq(&field1.grid, &field2.grid) || field1.grid == field2.grid;
    let d: Vec<f64> = if same_grid {
        field1
            .m
            .iter()
            .zip(&field2.m)
            .map(|(a, b)| a - b)
            .collect()
    } else {
        r.iter()
            .zip(&field1.m)
            .map(|(ri, mi)| mi - field2.m_at(*ri))
            .collect()
    };
    let body = pairwise_sum_by(r.len() - 1, |i| {
        cell_int_mm_over_r2(r[i], r[i + 1], d[i], d[i + 1], d[i], d[i + 1])
    });
    let dm = field1.total_mass() - field2.total_mass();
    0.5 * (body + dm * dm / field1.grid.r_cut())
}

/// Both sides of the pairing identity
/// `int grad U_{rho1} . grad U_{rho2} dx = -4 pi int U_{rho1} rho2 dx`.
///
/// Returns `(lhs, rhs)`; the caller asserts their agreement.
pub fn pairing_identity_check(rho1: &RadialDensity, rho2: &RadialDensity) -> (f64, f64) {
    let f1 = RadialField::from_density(rho1, 0.0).expect("valid density");
    let f2 = RadialField::from_density(rho2, 0.0).expect("valid density");
    let r = rho1.grid().radii();
    let same_grid = Arc::ptr_eq(rho1.grid(), rho2.grid()) || rho1.grid() == rho2.grid();
    let m2: Vec<f64> = if same_grid {
        f2.m.clone()
    } else {
        r.iter().map(|ri| f2.m_at(*ri)).collect()
    };
    let body = pairwise_sum_by(r.len() - 1, |i| {
        cell_int_mm_over_r2(r[i], r[i + 1], f1.m[i], f1.m[i + 1], m2[i], m2[i + 1])
    });
    let lhs = 4.0
        * std::f64::consts::PI
        * (body + f1.total_mass() * f2.total_mass() / rho1.grid().r_cut());

    // rhs = -(4 pi)^2 int r^2 U1(r) rho2(r) dr on the grid of rho2
    let r2 = rho2.grid().radii();
    let vals: Vec<f64> = if same_grid {
        r2.iter()
            .enumerate()
            .map(|(i, ri)| ri * ri * f1.u[i] * rho2.values()[i])
            .collect()
    } else {
        r2.iter()
            .zip(rho2.values())
            .map(|(ri, ki)| ri * ri * f1.u_at(*ri) * ki)
            .collect()
    };
    let rhs = -(4.0 * std::f64::consts::PI).powi(2) * rho2.grid().quadrature(&vals);
    (lhs, rhs)
}

/// `sup_r m(r)/r^2` over grid nodes divided by the a-priori field bound
/// `3 (2 pi)^{2/3} ||rho||_1^{1/3} ||rho||_inf^{2/3}`.
pub fn field_bound_ratio(density: &RadialDensity) -> f64 {
    let m = enclosed_mass(density);
    let sup = density
        .grid()
        .radii()
        .iter()
        .zip(&m)
        .map(|(r, mi)| mi / (r * r))
        .fold(0.0, f64::max);
    let bound = field_bound(density.total_mass(), density.sup_norm());
    if bound == 0.0 {
        return 0.0;
    }
    sup / bound
}

/// The bound `3 (2 pi)^{2/3} ||rho||_1^{1/3} ||rho||_inf^{2/3}` on `|grad U|`.
pub fn field_bound(l1_norm: f64, sup_norm: f64) -> f64 {
    3.0 * (2.0 * std::f64::consts::PI).powf(2.0 / 3.0) * l1_norm.powf(1.0 / 3.0)
        * sup_norm.powf(2.0 / 3.0)
}

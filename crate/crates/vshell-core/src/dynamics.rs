//! Weighted-particle evolution of the reduced characteristic system
//! `dr/dt = w`, `dw/dt = L/r^3 - (m(r) + Mc)/r^2`.
//!
//! Per particle, the squared angular momentum `L` is stored once and never
//! recomputed, and the phase-space density `f_value` is carried as a constant
//! of the motion. The self-consistent gravitating field is the exact shell
//! theorem for point shells: particle radii are sorted and the enclosed mass
//! is a cumulative sum, with ties sharing half weight; no grid deposition
//! enters the force. Binned densities are produced for diagnostics only.
//!
//! The integrator is kick-drift-kick leapfrog. In self-consistent mode the
//! field is rebuilt once per step and held fixed within it, so each step is
//! one frozen-field substep of the iteration scheme used in the global
//! existence proof; `picard_iterate` runs that scheme literally, integrating
//! each iterate in the time-interpolated field of the previous one.

use std::sync::Arc;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::grid::{pairwise_sum_by, RadialGrid};
use crate::params::ShellParams;
use crate::poisson::{field_bound, field_distance, RadialDensity, RadialField};
use crate::steady::ShellModel;
use crate::{CoreError, Result};

/// Weighted samples `(r, w, L, weight, f_value)` of a phase-space density.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    r: Vec<f64>,
    w: Vec<f64>,
    l: Vec<f64>,
    weight: Vec<f64>,
    f_value: Vec<f64>,
    total_mass: f64,
    seed: u64,
}

/// Field update policy of `evolve`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldMode {
    /// Integrate in a fixed external field.
    Frozen,
    /// Rebuild the exact particle field once per step.
    SelfConsistent,
    /// Frozen-field iteration; handled by `picard_iterate`.
    Picard,
}

/// Evolution parameters.
#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Emit a diagnostics record every this many steps.
    pub output_every: usize,
    pub field_mode: FieldMode,
    /// Bin count of the diagnostic density deposit.
    pub deposition_bins: usize,
    /// Iterate count of `picard_iterate` when driven through a config.
    pub picard_iterations: usize,
}

impl EvolveConfig {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end >= self.dt) {
            return Err(CoreError::InvalidArgument(format!(
                "t_end must be at least dt, got t_end = {}, dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.output_every == 0 {
            return Err(CoreError::InvalidArgument(
                "output_every must be positive".into(),
            ));
        }
        if self.deposition_bins < 2 {
            return Err(CoreError::InvalidArgument(
                "deposition_bins must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// Conserved/monitored quantities at one output time.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Total energy `E_kin + E_pot` of the ensemble.
    pub h: f64,
    pub e_kin: f64,
    pub e_pot: f64,
    /// `sum_i weight_i f_i^{1/k} (L_i - L0)^{-l/k}`; constant in time bit for bit.
    pub casimir: f64,
    pub mass: f64,
    pub r_min: f64,
    pub p_max: f64,
    pub d_f_f0: f64,
    pub field_dist: f64,
    pub field_bound_ratio: f64,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn radial_velocities(&self) -> &[f64] {
        &self.w
    }

    pub fn angular_momenta(&self) -> &[f64] {
        &self.l
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f_value
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn from_raw(
        r: Vec<f64>,
        w: Vec<f64>,
        l: Vec<f64>,
        weight: Vec<f64>,
        f_value: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let n = r.len();
        if [w.len(), l.len(), weight.len(), f_value.len()]
            .iter()
            .any(|&m| m != n)
            || n == 0
        {
            return Err(CoreError::InvalidArgument(
                "particle arrays must be nonempty and of equal length".into(),
            ));
        }
        if r.iter().any(|&x| !(x > 0.0)) {
            return Err(CoreError::InvalidArgument(
                "particle radii must be positive".into(),
            ));
        }
        let total_mass = pairwise_sum_by(n, |i| weight[i]);
        Ok(Self {
            r,
            w,
            l,
            weight,
            f_value,
            total_mass,
            seed,
        })
    }

    /// `sum_i weight_i (w_i^2 + L_i/r_i^2)/2`.
    pub fn kinetic_energy(&self) -> f64 {
        pairwise_sum_by(self.len(), |i| {
            0.5 * self.weight[i] * (self.w[i] * self.w[i] + self.l[i] / (self.r[i] * self.r[i]))
        })
    }

    /// Exact pairwise shell potential energy plus the central-mass term:
    /// `-sum_{i<j} w_i w_j / max(r_i, r_j) - Mc sum_i w_i / r_i`.
    pub fn potential_energy(&self, mc: f64) -> f64 {
        let field = StepField::build(&self.r, &self.weight);
        -pairwise_sum_by(self.len(), |i| {
            let inner = field.m_at(self.r[i]) - 0.5 * self.weight[i] * field.tie_fraction(self.r[i]);
            self.weight[i] * (inner + mc) / self.r[i]
        })
    }

    /// Casimir estimate `sum_i weight_i f_i^{1/k} (L_i - L0)^{-l/k}`; every
    /// factor is a per-particle constant, so the value is exactly constant in
    /// time up to the (fixed) summation order.
    pub fn casimir_estimate(&self, params: &ShellParams) -> Result<f64> {
        if self.l.iter().any(|&l| l < params.l0) {
            return Err(CoreError::InvalidState(
                "ensemble carries support below the angular momentum cutoff".into(),
            ));
        }
        let (k, l, l0) = (params.k, params.l, params.l0);
        Ok(pairwise_sum_by(self.len(), |i| {
            self.weight[i] * self.f_value[i].powf(1.0 / k) * (self.l[i] - l0).powf(-l / k)
        }))
    }

    /// `||f||_{k,l}` estimate: `casimir^{k/(k+1)}`.
    pub fn knorm(&self, params: &ShellParams) -> Result<f64> {
        Ok(self
            .casimir_estimate(params)?
            .powf(params.k / (params.k + 1.0)))
    }

    pub fn min_radius(&self) -> f64 {
        self.r.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_speed(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.w[i] * self.w[i] + self.l[i] / (self.r[i] * self.r[i])).sqrt())
            .fold(0.0, f64::max)
    }

    /// Exact enclosed-mass curve of the ensemble sampled on a grid.
    pub fn field_on(&self, grid: &Arc<RadialGrid>, mc: f64) -> Result<RadialField> {
        let field = StepField::build(&self.r, &self.weight);
        let m: Vec<f64> = grid.radii().iter().map(|&x| field.m_at(x)).collect();
        RadialField::from_mass_curve(grid.clone(), m, mc)
    }

    /// Stability distance `d(f, f0)` by the pointwise-convex estimator.
    ///
    /// The integrand of `d` is `(L-L0)^l [Phi(y) - Phi(y0) - Phi'(y0)(y - y0)]`
    /// on the support of `f0` (and `(L-L0)^l [Phi(y) + (E-E0) y]` off it),
    /// which is nonnegative by convexity of `Phi`; integrating it against the
    /// particle measure keeps the estimate nonnegative at finite sample size.
    /// The naive split form `[C(f) - C(f0)] + [sum w E - int E f0]` carries
    /// `O(1/sqrt(N))` statistical noise of either sign; it is logged at debug
    /// level for comparison.
    pub fn distance_d(&self, model: &ShellModel) -> Result<f64> {
        let p = &model.params;
        if (self.total_mass - model.mass()).abs() > 1e-6 * model.mass() {
            return Err(CoreError::ConstraintViolation(format!(
                "ensemble mass {} differs from the model mass {}",
                self.total_mass,
                model.mass()
            )));
        }
        if self.l.iter().any(|&l| l < p.l0) {
            return Err(CoreError::ConstraintViolation(
                "ensemble has particles below the angular momentum cutoff".into(),
            ));
        }
        let (k, l, l0, e0, a) = (p.k, p.l, p.l0, p.e0, p.amplitude);
        let phi = |y: f64| y.powf(1.0 + 1.0 / k);
        let phi_p = |y: f64| (1.0 + 1.0 / k) * y.powf(1.0 / k);
        let term = |i: usize| -> f64 {
            let q = self.l[i] - l0;
            let e = model.energy_at(self.r[i], self.w[i], self.l[i]);
            let y = self.f_value[i] * q.powf(-l);
            let margin = e0 - e;
            let d = if margin > 0.0 {
                let y0 = a * margin.powf(k);
                phi(y) - phi(y0) - phi_p(y0) * (y - y0)
            } else {
                phi(y) + (e - e0) * y
            };
            self.weight[i] * q.powf(l) * d / self.f_value[i]
        };
        let d = pairwise_sum_by(self.len(), term);
        if log::log_enabled!(log::Level::Debug) {
            let split = self.casimir_estimate(p)? - model.functionals().casimir
                + pairwise_sum_by(self.len(), |i| {
                    self.weight[i] * model.energy_at(self.r[i], self.w[i], self.l[i])
                })
                - model.functionals().int_e_f0;
            log::debug!("distance_d: convex-form {d:.6e}, raw split form {split:.6e}");
        }
        Ok(d)
    }

    /// `||f - f0||_{k,l}` proxy from per-particle `f` values against `f0` at
    /// the particle phase points.
    pub fn knorm_distance(&self, model: &ShellModel) -> f64 {
        let p = &model.params;
        let est = pairwise_sum_by(self.len(), |i| {
            let f0 = model.f0_at(self.r[i], self.w[i], self.l[i]);
            let q = self.l[i] - p.l0;
            self.weight[i] * (self.f_value[i] - f0).abs().powf(1.0 + 1.0 / p.k)
                * q.powf(-p.l / p.k)
                / self.f_value[i]
        });
        est.powf(p.k / (p.k + 1.0))
    }

    /// Mass-preserving rescaling of the sample cloud: a particle at
    /// `(r, w, L)` moves to `(r/b, w/c, L0 + (L - L0)/(b^2 c^2))` and its
    /// `f_value` gains the factor `a`. Weights are untouched, so the mass is
    /// exactly preserved; membership in the constraint set requires
    /// `a = (bc)^3`.
    pub fn rescale(&self, triple: &crate::params::ScalingTriple, l0: f64) -> Result<Self> {
        let bc = triple.b * triple.c;
        if (triple.a - bc.powi(3)).abs() > 1e-12 * bc.powi(3) {
            return Err(CoreError::ConstraintViolation(format!(
                "rescaling with a = {} != (bc)^3 = {} changes the mass",
                triple.a,
                bc.powi(3)
            )));
        }
        let inv_b2c2 = 1.0 / (bc * bc);
        let mut out = self.clone();
        for i in 0..self.len() {
            out.r[i] = self.r[i] / triple.b;
            out.w[i] = self.w[i] / triple.c;
            out.l[i] = l0 + (self.l[i] - l0) * inv_b2c2;
            out.f_value[i] = triple.a * self.f_value[i];
        }
        Ok(out)
    }

    /// Radial velocity kick `w -> (1 + eps) w`; `L`, weights and mass are
    /// untouched. The represented density is the pushforward, so per-particle
    /// `f` values shrink by `1/(1 + eps)`.
    pub fn velocity_kick(&self, eps: f64) -> Result<Self> {
        if !(1.0 + eps > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "kick amplitude {eps} reverses the flow"
            )));
        }
        let mut out = self.clone();
        for i in 0..self.len() {
            out.w[i] = (1.0 + eps) * self.w[i];
            out.f_value[i] = self.f_value[i] / (1.0 + eps);
        }
        Ok(out)
    }
}

/// Exact point-shell field of a particle set: sorted radii and cumulative
/// weights; `m(r)` counts all mass strictly inside `r` plus half of any mass
/// exactly at `r`.
struct StepField {
    radii: Vec<f64>,
    cum: Vec<f64>,
}

impl StepField {
    fn build(r: &[f64], weight: &[f64]) -> Self {
        let mut idx: Vec<u32> = (0..r.len() as u32).collect();
        idx.sort_by(|&a, &b| {
            r[a as usize]
                .partial_cmp(&r[b as usize])
                .expect("finite radii")
                .then(a.cmp(&b))
        });
        let mut radii = Vec::with_capacity(r.len());
        let mut cum = Vec::with_capacity(r.len());
        let mut acc = 0.0;
        for &i in &idx {
            acc += weight[i as usize];
            radii.push(r[i as usize]);
            cum.push(acc);
        }
        Self { radii, cum }
    }


    /// Index of the first sorted radius `>= x`.
    fn lower_bound(&self, x: f64) -> usize {
        self.radii.partition_point(|&v| v < x)
    }

    fn m_at(&self, x: f64) -> f64 {
        let lo = self.lower_bound(x);
        let below = if lo == 0 { 0.0 } else { self.cum[lo - 1] };
        let mut hi = lo;
        while hi < self.radii.len() && self.radii[hi] == x {
            hi += 1;
        }
        let ties = if hi == lo {
            0.0
        } else {
            self.cum[hi - 1] - below
        };
        below + 0.5 * ties
    }

    /// 1 when mass sits exactly at `x`, else 0; used to remove the half-self
    /// contribution of a particle evaluated at its own radius.
    fn tie_fraction(&self, x: f64) -> f64 {
        let lo = self.lower_bound(x);
        if lo < self.radii.len() && self.radii[lo] == x {
            1.0
        } else {
            0.0
        }
    }

    /// Enclosed mass at `x` excluding a particle of weight `w_self` whose
    /// frozen position is `r_self`.
    fn m_at_excluding(&self, x: f64, r_self: f64, w_self: f64) -> f64 {
        let own = if r_self < x {
            w_self
        } else if r_self == x {
            0.5 * w_self
        } else {
            0.0
        };
        self.m_at(x) - own
    }
}

/// Bounding box of the rejection sampler.
struct SampleBox {
    r1: f64,
    r2: f64,
    w_max: f64,
    l_max: f64,
    f_max: f64,
}

fn sample_box(model: &ShellModel) -> Result<SampleBox> {
    let p = &model.params;
    let radii = model.grid().radii();
    let bracket = model.bracket_values();
    let mut g_max = 0.0f64;
    let mut r2g_max = 0.0f64;
    for i in 0..radii.len() {
        if bracket[i] > 0.0 {
            g_max = g_max.max(bracket[i]);
            r2g_max = r2g_max.max(radii[i] * radii[i] * bracket[i]);
        }
    }
    if g_max == 0.0 {
        return Err(CoreError::InvalidArgument("model has empty support".into()));
    }
    // headroom for sub-grid maxima of the interpolated bracket
    g_max *= 1.0 + 1e-4;
    r2g_max *= 1.0 + 1e-4;
    let l_max = p.l0 + 2.0 * r2g_max;
    Ok(SampleBox {
        r1: model.r1(),
        r2: model.r2(),
        w_max: (2.0 * g_max).sqrt(),
        l_max,
        f_max: p.amplitude * g_max.powf(p.k) * (l_max - p.l0).powf(p.l),
    })
}

/// Rejection sampling of the shell in the flat `(r, w, L)` measure.
///
/// Particle `i` draws from its own counter-based stream keyed by
/// `(seed, i)`, so the result is independent of any parallel schedule.
pub fn sample_shell(model: &ShellModel, count: usize, seed: u64) -> Result<ParticleEnsemble> {
    if count == 0 {
        return Err(CoreError::InvalidArgument(
            "sample count must be positive".into(),
        ));
    }
    let b = sample_box(model)?;
    let weight = model.mass() / count as f64;
    let ur = Uniform::new(b.r1, b.r2);
    let uw = Uniform::new(-b.w_max, b.w_max);
    let ul = Uniform::new(model.params.l0, b.l_max);
    let uf = Uniform::new(0.0, b.f_max);

    type Draw = (f64, f64, f64, f64, u64);
    let draws: Vec<Result<Draw>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut attempts = 0u64;
            loop {
                attempts += 1;
                if attempts > 2_000_000 {
                    return Err(CoreError::SamplingFailure {
                        acceptance: 1.0 / attempts as f64,
                    });
                }
                let r = ur.sample(&mut rng);
                let w = uw.sample(&mut rng);
                let l = ul.sample(&mut rng);
                let f0 = model.f0_at(r, w, l);
                if f0 > 0.0 && uf.sample(&mut rng) < f0 {
                    debug_assert!(f0 <= b.f_max * (1.0 + 1e-9));
                    return Ok((r, w, l, f0, attempts));
                }
            }
        })
        .collect();

    let mut r = Vec::with_capacity(count);
    let mut w = Vec::with_capacity(count);
    let mut l = Vec::with_capacity(count);
    let mut f_value = Vec::with_capacity(count);
    let mut attempts_total = 0u64;
    for d in draws {
        let (ri, wi, li, fi, att) = d?;
        r.push(ri);
        w.push(wi);
        l.push(li);
        f_value.push(fi);
        attempts_total += att;
    }
    let acceptance = count as f64 / attempts_total as f64;
    if acceptance < 1e-4 {
        return Err(CoreError::SamplingFailure { acceptance });
    }
    log::debug!("sample_shell: acceptance rate {acceptance:.4}");
    ParticleEnsemble::from_raw(r, w, l, vec![weight; count], f_value, seed)
}

/// Binned density (diagnostics) plus the exact enclosed-mass field on a grid.
pub struct Deposit {
    pub density: RadialDensity,
    pub field: RadialField,
}

/// Bin-averages the ensemble onto `bins` equal-width shells and samples the
/// exact cumulative mass on `field_grid`.
pub fn deposit_density(
    ensemble: &ParticleEnsemble,
    bins: usize,
    field_grid: &Arc<RadialGrid>,
    mc: f64,
) -> Result<Deposit> {
    if bins < 2 {
        return Err(CoreError::InvalidArgument(
            "need at least two deposition bins".into(),
        ));
    }
    if ensemble.is_empty() {
        return Err(CoreError::InvalidArgument("empty ensemble".into()));
    }
    let r_lo = ensemble.min_radius() * (1.0 - 1e-12);
    let r_hi = ensemble.r.iter().cloned().fold(0.0, f64::max) * (1.0 + 1e-12);
    let width = (r_hi - r_lo) / bins as f64;
    let mut mass_in_bin = vec![0.0; bins];
    for i in 0..ensemble.len() {
        let j = (((ensemble.r[i] - r_lo) / width) as usize).min(bins - 1);
        mass_in_bin[j] += ensemble.weight[i];
    }
    let centers: Vec<f64> = (0..bins).map(|j| r_lo + (j as f64 + 0.5) * width).collect();
    let rho: Vec<f64> = (0..bins)
        .map(|j| {
            let lo = r_lo + j as f64 * width;
            let hi = lo + width;
            let vol = 4.0 / 3.0 * std::f64::consts::PI * (hi.powi(3) - lo.powi(3));
            mass_in_bin[j] / vol
        })
        .collect();
    let density = RadialDensity::new(Arc::new(RadialGrid::new(centers)?), rho)?;
    let field = ensemble.field_on(field_grid, mc)?;
    Ok(Deposit { density, field })
}

/// `dw/dt` for every particle in a fixed grid field.
pub fn accelerations(ensemble: &ParticleEnsemble, field: &RadialField) -> Vec<f64> {
    let mc = field.central_mass();
    (0..ensemble.len())
        .into_par_iter()
        .map(|i| {
            let r = ensemble.r[i];
            ensemble.l[i] / (r * r * r) - (field.m_at(r) + mc) / (r * r)
        })
        .collect()
}

/// One kick-drift-kick step in a fixed external field.
pub fn step_frozen(ensemble: &mut ParticleEnsemble, field: &RadialField, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let mc = field.central_mass();
    let n = ensemble.len();
    let updates: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (r0, w0, li) = (ensemble.r[i], ensemble.w[i], ensemble.l[i]);
            let a0 = li / (r0 * r0 * r0) - (field.m_at(r0) + mc) / (r0 * r0);
            let wh = w0 + 0.5 * dt * a0;
            let r1 = r0 + dt * wh;
            if !(r1 > 0.0) || !r1.is_finite() {
                return (f64::NAN, f64::NAN);
            }
            let a1 = li / (r1 * r1 * r1) - (field.m_at(r1) + mc) / (r1 * r1);
            (r1, wh + 0.5 * dt * a1)
        })
        .collect();
    commit_updates(ensemble, updates, 0.0)
}

/// One kick-drift-kick step with the exact particle field rebuilt at the
/// start of the step and held fixed within it.
pub fn step_self_consistent(ensemble: &mut ParticleEnsemble, mc: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let field = StepField::build(&ensemble.r, &ensemble.weight);
    let n = ensemble.len();
    let updates: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (r0, w0, li, wi) = (
                ensemble.r[i],
                ensemble.w[i],
                ensemble.l[i],
                ensemble.weight[i],
            );
            let m0 = field.m_at(r0) - 0.5 * wi * field.tie_fraction(r0);
            let a0 = li / (r0 * r0 * r0) - (m0 + mc) / (r0 * r0);
            let wh = w0 + 0.5 * dt * a0;
            let r1 = r0 + dt * wh;
            if !(r1 > 0.0) || !r1.is_finite() {
                return (f64::NAN, f64::NAN);
            }
            let m1 = field.m_at_excluding(r1, r0, wi);
            let a1 = li / (r1 * r1 * r1) - (m1 + mc) / (r1 * r1);
            (r1, wh + 0.5 * dt * a1)
        })
        .collect();
    commit_updates(ensemble, updates, 0.0)
}

fn commit_updates(
    ensemble: &mut ParticleEnsemble,
    updates: Vec<(f64, f64)>,
    time: f64,
) -> Result<()> {
    for (i, (r, w)) in updates.iter().enumerate() {
        if !r.is_finite() || !w.is_finite() {
            return Err(CoreError::IntegratorBlowup {
                time,
                detail: format!("particle {i} left the domain"),
            });
        }
        ensemble.r[i] = *r;
        ensemble.w[i] = *w;
    }
    Ok(())
}

/// `0.01 * min_i` of the circular-orbit period `2 pi sqrt(r^3/(m(r) + Mc))`
/// over the particles.
pub fn default_timestep(ensemble: &ParticleEnsemble, field: &RadialField) -> f64 {
    let mc = field.central_mass();
    let min_period = (0..ensemble.len())
        .map(|i| {
            let r = ensemble.r[i];
            2.0 * std::f64::consts::PI * (r * r * r / (field.m_at(r) + mc)).sqrt()
        })
        .fold(f64::INFINITY, f64::min);
    0.01 * min_period
}

/// Shortest circular-orbit period over the support of a solved model.
pub fn inner_orbit_period(model: &ShellModel) -> f64 {
    let radii = model.grid().radii();
    let field = model.field0();
    let mc = model.params.mc;
    (0..radii.len())
        .filter(|&i| model.bracket_values()[i] > 0.0)
        .map(|i| {
            let r = radii[i];
            2.0 * std::f64::consts::PI * (r * r * r / (field.m_at(r) + mc)).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// System dynamical time: circular-orbit period at the mass-weighted mean
/// radius of the shell.
pub fn dynamical_time(model: &ShellModel) -> f64 {
    let grid = model.grid();
    let vals: Vec<f64> = grid
        .radii()
        .iter()
        .zip(model.rho0().values())
        .map(|(&r, &rho)| 4.0 * std::f64::consts::PI * r * r * r * rho)
        .collect();
    let r_bar = grid.quadrature(&vals) / model.mass();
    let m_tot = model.mass() + model.params.mc;
    2.0 * std::f64::consts::PI * (r_bar * r_bar * r_bar / m_tot).sqrt()
}

/// Expected `t = 0` field distance of an `n`-sample ensemble to its model:
/// `E[fd] = (M^2 / 2N) int F(1-F)/r^2 dr` with `F = m/M` (binomial variance
/// of the empirical mass profile). This is the statistical floor that
/// stationarity runs are measured against.
pub fn field_distance_floor(model: &ShellModel, n: usize) -> f64 {
    let grid = model.grid();
    let total = model.mass();
    let vals: Vec<f64> = grid
        .radii()
        .iter()
        .zip(model.field0().mass_curve())
        .map(|(&r, &m)| {
            let f = m / total;
            f * (1.0 - f) / (r * r)
        })
        .collect();
    total * total / (2.0 * n as f64) * grid.quadrature(&vals)
}

/// Field-bound ratio of a deposited density (diagnostics form): the exact
/// cumulative mass of the ensemble for `sup m/r^2`, the exact particle mass
/// for the L1 norm, and the binned density for the sup norm.
fn ensemble_field_bound_ratio(
    ensemble: &ParticleEnsemble,
    binned: &RadialDensity,
) -> f64 {
    let field = StepField::build(&ensemble.r, &ensemble.weight);
    let sup = field
        .radii
        .iter()
        .zip(&field.cum)
        .map(|(&r, &m)| m / (r * r))
        .fold(0.0, f64::max);
    let bound = field_bound(ensemble.total_mass(), binned.sup_norm());
    if bound == 0.0 {
        0.0
    } else {
        sup / bound
    }
}

/// Delegates to the density-based bound check.
pub fn field_bound_check(density: &RadialDensity) -> f64 {
    crate::poisson::field_bound_ratio(density)
}

/// Advances the ensemble to `t_end`, emitting a diagnostics record at `t = 0`
/// and then every `output_every` steps.
///
/// Asserted at every output: exact mass conservation (bit for bit) and the
/// inner-radius bound `min r * max |v| >= sqrt(L0)`.
pub fn evolve(
    ensemble: &mut ParticleEnsemble,
    model: &ShellModel,
    config: &EvolveConfig,
) -> Result<Vec<DiagnosticsRecord>> {
    config.validate()?;
    if config.field_mode == FieldMode::Picard {
        return Err(CoreError::InvalidArgument(
            "picard mode is driven by picard_iterate".into(),
        ));
    }
    let mc = model.params.mc;
    let mass0 = ensemble.total_mass();
    let casimir0 = ensemble.casimir_estimate(&model.params)?;
    let steps = (config.t_end / config.dt).round().max(1.0) as usize;
    let mut records = Vec::with_capacity(steps / config.output_every + 2);
    records.push(diagnose(ensemble, model, config, 0.0, mass0, casimir0)?);
    let mut t = 0.0;
    for s in 0..steps {
        match config.field_mode {
            FieldMode::Frozen => step_frozen(ensemble, model.field0(), config.dt),
            FieldMode::SelfConsistent => step_self_consistent(ensemble, mc, config.dt),
            FieldMode::Picard => unreachable!(),
        }
        .map_err(|e| match e {
            CoreError::IntegratorBlowup { detail, .. } => {
                CoreError::IntegratorBlowup { time: t, detail }
            }
            other => other,
        })?;
        t = (s + 1) as f64 * config.dt;
        if (s + 1) % config.output_every == 0 || s + 1 == steps {
            records.push(diagnose(ensemble, model, config, t, mass0, casimir0)?);
        }
    }
    Ok(records)
}

fn diagnose(
    ensemble: &ParticleEnsemble,
    model: &ShellModel,
    config: &EvolveConfig,
    t: f64,
    mass0: f64,
    casimir0: f64,
) -> Result<DiagnosticsRecord> {
    let mass = pairwise_sum_by(ensemble.len(), |i| ensemble.weight[i]);
    if mass != mass0 {
        return Err(CoreError::InvariantViolation(format!(
            "mass changed from {mass0} to {mass} at t = {t}"
        )));
    }
    let casimir = ensemble.casimir_estimate(&model.params)?;
    if casimir != casimir0 {
        return Err(CoreError::InvariantViolation(format!(
            "casimir estimate changed from {casimir0} to {casimir} at t = {t}"
        )));
    }
    let r_min = ensemble.min_radius();
    let p_max = ensemble.max_speed();
    if r_min * p_max < model.params.l0.sqrt() {
        return Err(CoreError::InvariantViolation(format!(
            "r_min * p_max = {} fell below sqrt(L0) = {} at t = {t}",
            r_min * p_max,
            model.params.l0.sqrt()
        )));
    }
    let e_kin = ensemble.kinetic_energy();
    let e_pot = ensemble.potential_energy(model.params.mc);
    let deposit = deposit_density(
        ensemble,
        config.deposition_bins,
        model.grid(),
        model.params.mc,
    )?;
    let field_dist = field_distance(&deposit.field, model.field0());
    let ratio = ensemble_field_bound_ratio(ensemble, &deposit.density);
    let d = ensemble.distance_d(model)?;
    Ok(DiagnosticsRecord {
        t,
        h: e_kin + e_pot,
        e_kin,
        e_pot,
        casimir,
        mass,
        r_min,
        p_max,
        d_f_f0: d,
        field_dist,
        field_bound_ratio: ratio,
    })
}

/// Result of the frozen-field iteration.
pub struct PicardResult {
    /// `gap_n = max_i |(r, w)_n - (r, w)_{n-1}|` at the horizon.
    pub gaps: Vec<f64>,
    /// Final state of each iterate (iterate 0 first).
    pub finals: Vec<ParticleEnsemble>,
}

/// Frozen-field iteration: iterate 0 integrates in the static field of the
/// initial ensemble; iterate `n + 1` integrates in the time-interpolated
/// field recorded along iterate `n`. All iterates start from the same
/// initial condition.
pub fn picard_iterate(
    initial: &ParticleEnsemble,
    model: &ShellModel,
    horizon: f64,
    iterations: usize,
    dt: f64,
    snapshot_every: usize,
) -> Result<PicardResult> {
    if !(horizon > 0.0) || !(dt > 0.0) {
        return Err(CoreError::InvalidArgument(
            "horizon and dt must be positive".into(),
        ));
    }
    if iterations == 0 {
        return Err(CoreError::InvalidArgument(
            "need at least one iterate".into(),
        ));
    }
    let snap = snapshot_every.max(1);
    let steps = (horizon / dt).ceil().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let mc = model.params.mc;

    // iterate 0: static initial field
    let initial_field = StepField::build(&initial.r, &initial.weight);
    let run = |fields: Option<&[StepField]>| -> Result<(Vec<StepField>, ParticleEnsemble)> {
        let mut ens = initial.clone();
        let mut snaps: Vec<StepField> = vec![StepField::build(&ens.r, &ens.weight)];
        for s in 0..steps {
            let t0 = s as f64 * dt;
            let t1 = (s + 1) as f64 * dt;
            let acc = |r: f64, t: f64, li: f64| -> f64 {
                let m = match fields {
                    None => initial_field.m_at(r),
                    Some(snapshots) => interp_snapshots(snapshots, snap, dt, t, r),
                };
                li / (r * r * r) - (m + mc) / (r * r)
            };
            let updates: Vec<(f64, f64)> = (0..ens.len())
                .into_par_iter()
                .map(|i| {
                    let (r0, w0, li) = (ens.r[i], ens.w[i], ens.l[i]);
                    let a0 = acc(r0, t0, li);
                    let wh = w0 + 0.5 * dt * a0;
                    let r1 = r0 + dt * wh;
                    if !(r1 > 0.0) || !r1.is_finite() {
                        return (f64::NAN, f64::NAN);
                    }
                    let a1 = acc(r1, t1, li);
                    (r1, wh + 0.5 * dt * a1)
                })
                .collect();
            commit_updates(&mut ens, updates, t0)?;
            if (s + 1) % snap == 0 || s + 1 == steps {
                snaps.push(StepField::build(&ens.r, &ens.weight));
            }
        }
        Ok((snaps, ens))
    };

    let (mut prev_snaps, first) = run(None)?;
    let mut finals = vec![first];
    let mut gaps = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let (snaps, ens) = run(Some(&prev_snaps))?;
        let prev = finals.last().unwrap();
        let gap = (0..ens.len())
            .map(|i| (ens.r[i] - prev.r[i]).hypot(ens.w[i] - prev.w[i]))
            .fold(0.0, f64::max);
        gaps.push(gap);
        finals.push(ens);
        prev_snaps = snaps;
    }
    Ok(PicardResult { gaps, finals })
}

/// Linear-in-time interpolation of the snapshot fields at query time `t`.
fn interp_snapshots(snaps: &[StepField], snap_every: usize, dt: f64, t: f64, r: f64) -> f64 {
    let stride = snap_every as f64 * dt;
    let pos = t / stride;
    let i = (pos.floor() as usize).min(snaps.len().saturating_sub(2));
    let frac = (pos - i as f64).clamp(0.0, 1.0);
    let m0 = snaps[i].m_at(r);
    let m1 = snaps[(i + 1).min(snaps.len() - 1)].m_at(r);
    (1.0 - frac) * m0 + frac * m1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_log_grid;
    use approx::assert_relative_eq;

    fn vacuum_field(mc: f64) -> RadialField {
        RadialField::vacuum(Arc::new(make_log_grid(0.01, 100.0, 16).unwrap()), mc)
    }

    fn single_particle(r: f64, w: f64, l: f64, weight: f64) -> ParticleEnsemble {
        ParticleEnsemble::from_raw(vec![r], vec![w], vec![l], vec![weight], vec![1.0], 0).unwrap()
    }

    #[test]
    fn kinetic_energy_single_particle() {
        let ens = single_particle(2.0, 0.0, 2.0, 1.0);
        assert_relative_eq!(ens.kinetic_energy(), 0.25);
    }

    #[test]
    fn acceleration_examples() {
        let field = vacuum_field(1.0);
        // circular-orbit balance at r = 1, L = 1
        let ens = single_particle(1.0, 0.0, 1.0, 1.0);
        assert_relative_eq!(accelerations(&ens, &field)[0], 0.0);
        // r = 2, L = 1: 1/8 - 1/4
        let ens = single_particle(2.0, 0.0, 1.0, 1.0);
        assert_relative_eq!(accelerations(&ens, &field)[0], -0.125);
        // hollow interior: centrifugal only
        let field0 = vacuum_field(0.0);
        let ens = single_particle(0.5, 0.0, 1.0, 1.0);
        assert_relative_eq!(accelerations(&ens, &field0)[0], 1.0 / 0.125);
    }

    #[test]
    fn step_function_enclosed_mass() {
        let ens = single_particle(2.0, 0.0, 1.0, 5.0);
        let field = StepField::build(&ens.r, &ens.weight);
        assert_eq!(field.m_at(1.0), 0.0);
        assert_eq!(field.m_at(2.0), 2.5); // half weight exactly at the shell
        assert_eq!(field.m_at(3.0), 5.0);
    }

    #[test]
    fn tie_rule_half_weight() {
        let ens = ParticleEnsemble::from_raw(
            vec![1.5, 1.5],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![1.0, 1.0],
            0,
        )
        .unwrap();
        let field = StepField::build(&ens.r, &ens.weight);
        // each sees half the other's weight
        let m_self = field.m_at(1.5) - 0.5 * 2.0 * field.tie_fraction(1.5);
        assert_eq!(m_self, 1.0);
        // potential energy: -w1 w2 / max(r) - 0 = -4/1.5
        assert_relative_eq!(ens.potential_energy(0.0), -4.0 / 1.5);
    }

    #[test]
    fn zero_field_drift_only() {
        // w = 0, centrifugal only: r unchanged to O(dt^2), w grows by dt L/r^3
        let mut ens = single_particle(1.0, 0.0, 0.5, 1.0);
        let field = RadialField::vacuum(Arc::new(make_log_grid(0.1, 10.0, 8).unwrap()), 0.0);
        let dt = 1e-4;
        step_frozen(&mut ens, &field, dt).unwrap();
        assert_relative_eq!(ens.w[0], dt * 0.5, max_relative = 1e-7);
        assert!((ens.r[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn circular_orbit_stays_circular() {
        let field = vacuum_field(1.0);
        let mut ens = single_particle(1.0, 0.0, 1.0, 1.0);
        let dt = 2.0 * std::f64::consts::PI / 1000.0;
        for _ in 0..1000 {
            step_frozen(&mut ens, &field, dt).unwrap();
        }
        assert!((ens.r[0] - 1.0).abs() < 1e-4, "r drifted to {}", ens.r[0]);
    }

    #[test]
    fn frozen_energy_drift_second_order() {
        // eccentric Kepler orbit; max |E(t) - E(0)| halves by ~4x when dt halves
        let field = vacuum_field(1.0);
        let orbit_energy = |ens: &ParticleEnsemble| -> f64 {
            0.5 * (ens.w[0] * ens.w[0] + ens.l[0] / (ens.r[0] * ens.r[0])) - 1.0 / ens.r[0]
        };
        let run = |dt: f64| -> f64 {
            let mut ens = single_particle(1.0, 0.3, 0.8, 1.0);
            let e0 = orbit_energy(&ens);
            let steps = (40.0 / dt) as usize;
            let mut worst = 0.0f64;
            for _ in 0..steps {
                step_frozen(&mut ens, &field, dt).unwrap();
                worst = worst.max((orbit_energy(&ens) - e0).abs());
            }
            worst
        };
        let ratio = run(2e-3) / run(1e-3);
        assert!(
            (3.2..4.8).contains(&ratio),
            "dt-halving drift ratio {ratio}"
        );
    }

    #[test]
    fn blowup_is_reported() {
        // inward plunge with no angular momentum support crosses r = 0
        let mut ens = single_particle(0.1, -10.0, 0.0, 1.0);
        let field = vacuum_field(1.0);
        let result = step_frozen(&mut ens, &field, 1.0);
        assert!(matches!(result, Err(CoreError::IntegratorBlowup { .. })));
    }

    #[test]
    fn velocity_kick_updates_f_values() {
        let ens = single_particle(1.0, 0.5, 1.0, 1.0);
        let kicked = ens.velocity_kick(0.25).unwrap();
        assert_relative_eq!(kicked.w[0], 0.625);
        assert_relative_eq!(kicked.f_value[0], 1.0 / 1.25);
        assert_eq!(kicked.total_mass(), ens.total_mass());
        assert!(ens.velocity_kick(-1.5).is_err());
    }

    #[test]
    fn rescale_requires_mass_preservation() {
        let ens = single_particle(1.0, 0.5, 1.0, 1.0);
        let t = crate::params::ScalingTriple::new(1.0, 1.2, 1.0).unwrap();
        assert!(ens.rescale(&t, 0.1).is_err());
        let ok = crate::params::ScalingTriple::mass_preserving(1.2, 1.0).unwrap();
        let scaled = ens.rescale(&ok, 0.1).unwrap();
        assert_relative_eq!(scaled.r[0], 1.0 / 1.2);
        assert_relative_eq!(scaled.l[0], 0.1 + 0.9 / 1.44);
        assert_eq!(scaled.total_mass(), ens.total_mass());
    }
}

//! Gamma/Beta evaluation and the shell constant `C(k,l)`.
//!
//! The spatial density of the ansatz reduces to
//! `rho(r) = A C(k,l) r^{2l} (E0 - U0(r) + Mc/r - L0/(2 r^2))_+^{k+l+3/2}`
//! with
//! `C(k,l) = 2^{l+3/2} pi * int_0^1 s^l (1-s)^{-1/2} ds * int_0^1 s^{l+1/2} (1-s)^k ds`,
//! i.e. `C(k,l) = 2^{l+3/2} pi B(l+1, 1/2) B(l+3/2, k+1)`.
//!
//! Beta functions are evaluated through a Lanczos log-gamma approximation;
//! `shell_constant_by_quadrature` evaluates the two defining integrals with
//! tanh-sinh quadrature as an independent cross-check.

use crate::{CoreError, Result};

// Lanczos coefficients, g = 7, n = 9 (double precision).
#[allow(clippy::excessive_precision)]
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the Gamma function for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires a positive argument, got {x}");
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Euler Beta function `B(a, b) = Gamma(a) Gamma(b) / Gamma(a+b)`.
pub fn beta(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// The constant `C(k,l)` of the density reduction.
pub fn shell_constant(k: f64, l: f64) -> Result<f64> {
    if !(k > 0.0) || !(l > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "shell_constant requires k > 0 and l > 0, got k = {k}, l = {l}"
        )));
    }
    Ok(shell_constant_unchecked(k, l))
}

pub(crate) fn shell_constant_unchecked(p: f64, l: f64) -> f64 {
    2f64.powf(l + 1.5) * std::f64::consts::PI * beta(l + 1.0, 0.5) * beta(l + 1.5, p + 1.0)
}

/// `C(k,l)` by tanh-sinh quadrature of the two defining integrals.
pub fn shell_constant_by_quadrature(k: f64, l: f64) -> Result<f64> {
    if !(k > 0.0) || !(l > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "shell_constant requires k > 0 and l > 0, got k = {k}, l = {l}"
        )));
    }
    let i1 = tanh_sinh(|s, om| s.powf(l) / om.sqrt());
    let i2 = tanh_sinh(|s, om| s.powf(l + 0.5) * om.powf(k));
    Ok(2f64.powf(l + 1.5) * std::f64::consts::PI * i1 * i2)
}

/// Tanh-sinh quadrature of `f` over `(0, 1)`.
///
/// The integrand receives `(x, 1 - x)` with both factors computed without
/// cancellation, so integrable endpoint singularities such as `(1-s)^{-1/2}`
/// are resolved to full precision. Level-doubling stops when two successive
/// levels agree to ~1e-14.
pub fn tanh_sinh<F: Fn(f64, f64) -> f64>(f: F) -> f64 {
    let t_max = 6.5f64;
    let mut h = 0.5;
    // level 0: nodes at t = 0, +-h, +-2h, ...
    let eval = |t: f64| -> f64 {
        let u = std::f64::consts::PI * t.sinh(); // x = logistic(u)
        let x = 1.0 / (1.0 + (-u).exp());
        let omx = 1.0 / (1.0 + u.exp());
        // weight: dx/dt = pi/4 cosh(t) / cosh^2(pi/2 sinh t)
        let c = (0.5 * u).cosh();
        let w = 0.25 * std::f64::consts::PI * t.cosh() / (c * c);
        if x <= 0.0 || omx <= 0.0 || w == 0.0 {
            return 0.0;
        }
        let v = f(x, omx);
        if v.is_finite() {
            v * w
        } else {
            0.0
        }
    };
    let mut sum = eval(0.0);
    let mut t = h;
    while t <= t_max {
        sum += eval(t) + eval(-t);
        t += h;
    }
    let mut result = sum * h;
    for _ in 0..10 {
        // refine: add midpoints of the current spacing
        let mut add = 0.0;
        let mut t = 0.5 * h;
        while t <= t_max {
            add += eval(t) + eval(-t);
            t += h;
        }
        h *= 0.5;
        let refined = 0.5 * result + add * h;
        if (refined - result).abs() <= 1e-14 * refined.abs().max(1e-300) {
            return refined;
        }
        result = refined;
    }
    result
}

/// Constant of the squared-radial-velocity moment:
/// `int int w^2 (g - w^2/2 - q/(2r^2))_+^p q^l dw dq = D_w(p,l) r^{2l+2} g^{p+l+5/2}`.
pub(crate) fn moment_constant_w2(p: f64, l: f64) -> f64 {
    2f64.powf(l + 2.5) * beta(l + 1.0, p + 1.0) * beta(1.5, p + l + 2.0)
}

/// Constant of the shifted-angular-momentum moment:
/// `int int (q/r^2) (g - w^2/2 - q/(2r^2))_+^p q^l dw dq = D_q(p,l) r^{2l+2} g^{p+l+5/2}`.
pub(crate) fn moment_constant_l(p: f64, l: f64) -> f64 {
    2f64.powf(l + 2.5) * beta(l + 2.0, p + 1.0) * beta(0.5, p + l + 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_gamma_known_values() {
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(ln_gamma(2.0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(ln_gamma(5.0), 24f64.ln(), max_relative = 1e-13);
        assert_relative_eq!(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn beta_known_values() {
        assert_relative_eq!(beta(1.0, 1.0), 1.0, max_relative = 1e-13);
        assert_relative_eq!(beta(2.0, 3.0), 1.0 / 12.0, max_relative = 1e-13);
        assert_relative_eq!(beta(2.0, 0.5), 4.0 / 3.0, max_relative = 1e-13);
        assert_relative_eq!(beta(2.5, 2.0), 4.0 / 35.0, max_relative = 1e-13);
    }

    #[test]
    fn shell_constant_closed_forms() {
        // C(1,1) = 2^{5/2} pi (4/3) (4/35)
        let c11 = 2f64.powf(2.5) * std::f64::consts::PI * (4.0 / 3.0) * (4.0 / 35.0);
        assert_relative_eq!(shell_constant(1.0, 1.0).unwrap(), c11, max_relative = 1e-12);
        assert_relative_eq!(c11, 2.70810, max_relative = 1e-4);
        // C(1/2,1/2) = 8 pi^2 / 15
        let c55 = 8.0 * std::f64::consts::PI * std::f64::consts::PI / 15.0;
        assert_relative_eq!(shell_constant(0.5, 0.5).unwrap(), c55, max_relative = 1e-12);
        assert_relative_eq!(c55, 5.26379, max_relative = 1e-4);
    }

    #[test]
    fn shell_constant_matches_quadrature() {
        for &(k, l) in &[(1.0, 1.0), (0.5, 0.5), (1.0, 2.0), (0.7, 1.3), (2.2, 3.1)] {
            let a = shell_constant(k, l).unwrap();
            let b = shell_constant_by_quadrature(k, l).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn shell_constant_rejects_nonpositive() {
        assert!(shell_constant(0.0, 1.0).is_err());
        assert!(shell_constant(1.0, -1.0).is_err());
    }

    #[test]
    fn moment_constants_consistent_with_shell_constant() {
        // D_w(p,l) + D_q(p,l) = 2 [C(p,l) - C(p+1,l)] / pi
        for &(p, l) in &[(1.0, 1.0), (0.5, 1.5), (2.0, 2.0)] {
            let lhs = moment_constant_w2(p, l) + moment_constant_l(p, l);
            let rhs = 2.0 / std::f64::consts::PI
                * (shell_constant_unchecked(p, l) - shell_constant_unchecked(p + 1.0, l));
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // int_0^1 (1-s)^{-1/2} ds = 2
        assert_relative_eq!(
            tanh_sinh(|_, om| 1.0 / om.sqrt()),
            2.0,
            max_relative = 1e-12
        );
        // int_0^1 s^3 ds = 1/4
        assert_relative_eq!(tanh_sinh(|s, _| s * s * s), 0.25, max_relative = 1e-13);
    }
}

//! Shell parameters and rescaling triples.

use serde::{Deserialize, Serialize};

use crate::{CoreError, Result};

/// Parameters of the shell ansatz
/// `f0(r,w,L) = A (E0 - E)_+^k (L - L0)_+^l`.
///
/// `n = k + l + 3/2` is the exponent of the reduced spatial density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellParams {
    /// Exponent on the energy bracket; admissible range `0 < k <= l`.
    pub k: f64,
    /// Exponent on the angular-momentum bracket.
    pub l: f64,
    /// Squared angular momentum cutoff, `L0 > 0`.
    pub l0: f64,
    /// Central point mass, `Mc >= 0`.
    pub mc: f64,
    /// Cutoff energy; `E0 < 0` for any solved steady state.
    pub e0: f64,
    /// Amplitude prefactor of the ansatz.
    pub amplitude: f64,
}

impl ShellParams {
    /// Creates validated parameters; `amplitude = None` selects the
    /// variational value `(k/(k+1))^k`.
    pub fn new(k: f64, l: f64, l0: f64, mc: f64, e0: f64, amplitude: Option<f64>) -> Result<Self> {
        if !(k > 0.0) || !(l >= k) {
            return Err(CoreError::InvalidArgument(format!(
                "admissible exponents require 0 < k <= l, got k = {k}, l = {l}"
            )));
        }
        if !(l0 > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "angular momentum cutoff must be positive, got L0 = {l0}"
            )));
        }
        if !(mc >= 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "central mass must be nonnegative, got Mc = {mc}"
            )));
        }
        if !e0.is_finite() {
            return Err(CoreError::InvalidArgument("E0 must be finite".into()));
        }
        let amplitude = amplitude.unwrap_or_else(|| variational_amplitude(k));
        if !(amplitude > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "amplitude must be positive, got {amplitude}"
            )));
        }
        Ok(Self {
            k,
            l,
            l0,
            mc,
            e0,
            amplitude,
        })
    }

    /// Derived density exponent `n = k + l + 3/2`.
    pub fn n(&self) -> f64 {
        self.k + self.l + 1.5
    }

    /// Same parameters with a different cutoff energy.
    pub fn with_e0(mut self, e0: f64) -> Self {
        self.e0 = e0;
        self
    }
}

/// The Euler-Lagrange amplitude `(k/(k+1))^k` for which the minimizer
/// identity `Phi'((L-L0)_+^{-l} f0) + E = E0` holds exactly on the support.
pub fn variational_amplitude(k: f64) -> f64 {
    (k / (k + 1.0)).powf(k)
}

/// Parameters `(a, b, c)` of the rescaling
/// `f(r,w,L) -> a f(b r, c w, b^2 c^2 L - (b^2 c^2 - 1) L0)`,
/// optionally with the witness exponent `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingTriple {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Witness exponent in `(1, 2)`; `c = b^{-eta/2}` in the witness search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl ScalingTriple {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "scaling parameters must be positive, got a = {a}, b = {b}, c = {c}"
            )));
        }
        Ok(Self { a, b, c, eta: None })
    }

    /// Identity transformation.
    pub fn identity() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            eta: None,
        }
    }

    /// Mass-preserving triple with `a = (bc)^3`.
    pub fn mass_preserving(b: f64, c: f64) -> Result<Self> {
        let bc = b * c;
        Self::new(bc * bc * bc, b, c)
    }

    /// Validates the witness admissibility gate `(1 - eta/2)(2l + 3)/k > 1`.
    pub fn witness_gate(k: f64, l: f64, eta: f64) -> Result<()> {
        if !(eta > 1.0 && eta < 2.0) {
            return Err(CoreError::InvalidArgument(format!(
                "witness exponent must lie in (1, 2), got eta = {eta}"
            )));
        }
        let rate = (1.0 - 0.5 * eta) * (2.0 * l + 3.0) / k;
        if rate <= 1.0 {
            return Err(CoreError::InvalidArgument(format!(
                "witness gate (1 - eta/2)(2l+3)/k > 1 fails: got {rate}"
            )));
        }
        Ok(())
    }
}

use num_complex::Complex64;

use super::OscillatorSpec;
use crate::error::{Error, Result};
use crate::quadrature::{coefficient_scale, cubic_roots, eval_cubic};

/// `g(t) = Σ_j A_j e^{s_j t}`, the inverse Laplace transform of
/// `ĝ(s) = 1/(s² + ω_R² − χ̂(s))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorKernel {
    /// Poles of ĝ, sorted by real part then imaginary part.
    pub roots: Vec<Complex64>,
    /// Residues of ĝ at `roots`.
    pub residues: Vec<Complex64>,
    /// The cubic had (nearly) repeated roots and γ was nudged to split them.
    pub perturbed: bool,
}

/// Real 2×2 matrix, row major.
pub type Matrix2 = [[f64; 2]; 2];

/// Relative nudge applied to γ when the characteristic cubic is degenerate.
const DEGENERATE_NUDGE: f64 = 1e-12;

/// Roots and residues of ĝ(s) for the Lorentz-Drude bath.
///
/// With `χ̂(s) = γΛ²/(s+Λ)` the denominator clears to
/// `D(s) = s³ + Λs² + ω_R²s + (ω_R²Λ − γΛ²)` and `ĝ = (s+Λ)/D`. At γ = 0 the
/// factor `s+Λ` cancels and only the free poles `±iω₀` remain.
pub fn characteristic_roots(spec: &OscillatorSpec) -> Result<PropagatorKernel> {
    spec.validate()?;
    let w0 = spec.omega0;
    if spec.bath.gamma == 0.0 {
        let r = Complex64::new(0.0, w0);
        let a = Complex64::new(0.0, -0.5 / w0);
        return Ok(PropagatorKernel {
            roots: vec![-r, r],
            residues: vec![-a, a],
            perturbed: false,
        });
    }
    let mut gamma = spec.bath.gamma;
    let mut perturbed = false;
    loop {
        let kernel = cubic_kernel(w0, gamma, spec.bath.lambda_cutoff)?;
        match kernel {
            Some(k) => return Ok(PropagatorKernel { perturbed, ..k }),
            None if !perturbed => {
                log::warn!("characteristic cubic has repeated roots at γ = {gamma}; nudging γ by {DEGENERATE_NUDGE:e}");
                gamma *= 1.0 + DEGENERATE_NUDGE;
                perturbed = true;
            }
            None => {
                return Err(Error::Numerical(format!(
                    "characteristic cubic stays degenerate after nudging γ (ω₀ = {w0}, γ = {gamma})"
                )))
            }
        }
    }
}

/// `None` when the cubic is flagged degenerate.
fn cubic_kernel(w0: f64, gamma: f64, lambda: f64) -> Result<Option<PropagatorKernel>> {
    let wr2 = w0 * w0 + gamma * lambda;
    let coeffs = [1.0, lambda, wr2, wr2 * lambda - gamma * lambda * lambda];
    let cubic = cubic_roots(coeffs)?;
    if cubic.degenerate {
        return Ok(None);
    }
    let scale = coefficient_scale(&coeffs);
    let mut residues = Vec::with_capacity(3);
    for s in cubic.roots {
        let resid = eval_cubic(&coeffs, s).norm();
        if resid > 1e-12 * scale * (1.0 + s.norm().powi(3)) {
            return Err(Error::Numerical(format!(
                "root {s} of the characteristic cubic has residual {resid:e}"
            )));
        }
        let dd = 3.0 * s * s + 2.0 * lambda * s + wr2;
        residues.push((s + lambda) / dd);
    }
    Ok(Some(PropagatorKernel {
        roots: cubic.roots.to_vec(),
        residues,
        perturbed: false,
    }))
}

impl PropagatorKernel {
    /// `Σ_j A_j s_j^k e^{s_j t}`, real part; the k-th derivative of g.
    fn derivative(&self, k: i32, t: f64) -> f64 {
        self.roots
            .iter()
            .zip(&self.residues)
            .map(|(s, a)| (a * s.powi(k) * (s * t).exp()).re)
            .sum()
    }

    pub fn g(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }

    pub fn g_dot(&self, t: f64) -> f64 {
        self.derivative(1, t)
    }

    pub fn g_ddot(&self, t: f64) -> f64 {
        self.derivative(2, t)
    }

    /// `ĝ(s) = Σ_j A_j / (s − s_j)`.
    pub fn laplace(&self, s: Complex64) -> Complex64 {
        self.roots
            .iter()
            .zip(&self.residues)
            .map(|(r, a)| a / (s - r))
            .sum()
    }

    /// Slowest decay rate `min_j |Re s_j|` (zero for the free oscillator).
    pub fn slowest_rate(&self) -> f64 {
        self.roots
            .iter()
            .map(|s| -s.re)
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    /// Residues paired with the roots multiplied by `s^k`: the exponential sum of `g^{(k)}`.
    pub(crate) fn weights(&self, k: i32) -> Vec<Complex64> {
        self.roots
            .iter()
            .zip(&self.residues)
            .map(|(s, a)| a * s.powi(k))
            .collect()
    }
}

/// `G(t) = [[g′, g], [g″, g′]]`, mapping `(x, p)` at time 0 to time t.
pub fn propagator(kernel: &PropagatorKernel, t: f64) -> Result<Matrix2> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("propagator needs t ≥ 0, got {t}")));
    }
    let g = kernel.g(t);
    let gd = kernel.g_dot(t);
    let gdd = kernel.g_ddot(t);
    Ok([[gd, g], [gdd, gd]])
}

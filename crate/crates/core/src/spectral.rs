//! The bosonic bath: Ohmic spectral density with a Lorentz-Drude cutoff,
//! its dissipation kernel, the bath correlation function and the Matsubara
//! decomposition used by the hierarchy solver.
//!
//! Conventions (ħ = k_B = 1):
//!
//! ```text
//! J(ω)  = γ ω / (1 + (ω/Λ)²)
//! χ(t)  = (2/π) ∫₀^∞ J(ω) sin(ωt) dω            = γΛ² e^{-Λt}
//! C(t)  = (1/π) ∫₀^∞ J(ω) [coth(ω/2T) cos ωt − i sin ωt] dω
//!       = Σ_k c_k e^{-ν_k t}                      (t > 0)
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_semi_infinite, QuadratureSpec, TailPolicy};

/// Ohmic bath with Lorentz-Drude cutoff at temperature `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    /// Dimensionless coupling γ multiplying ω in J(ω).
    pub gamma: f64,
    /// Cutoff frequency Λ.
    pub lambda_cutoff: f64,
    /// Temperature T ≥ 0.
    pub temperature: f64,
}

/// One term `c e^{-ν t}` of an exponential decomposition of C(t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialTerm {
    pub coefficient: Complex64,
    pub rate: f64,
}

/// `coth(ω / 2T)`, with the zero-temperature limit taken exactly.
pub fn coth_half(omega: f64, temperature: f64) -> f64 {
    if temperature == 0.0 {
        return 1.0;
    }
    let x = omega / temperature;
    // coth(x/2) = 1 + 2/(e^x − 1)
    1.0 + 2.0 / x.exp_m1()
}

/// Analytic continuation of `coth(z / 2T)` off the real axis.
pub(crate) fn coth_half_complex(z: Complex64, temperature: f64) -> Complex64 {
    if temperature == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let x = z / temperature;
    if x.re >= 0.0 {
        let e = (-x).exp();
        (1.0 + e) / (1.0 - e)
    } else {
        let e = x.exp();
        -(1.0 + e) / (1.0 - e)
    }
}

impl BathSpec {
    pub fn new(gamma: f64, lambda_cutoff: f64, temperature: f64) -> Result<Self> {
        let bath = Self {
            gamma,
            lambda_cutoff,
            temperature,
        };
        bath.validate()?;
        Ok(bath)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Domain(format!(
                "gamma must be ≥ 0, got {}",
                self.gamma
            )));
        }
        if !(self.lambda_cutoff > 0.0 && self.lambda_cutoff.is_finite()) {
            return Err(Error::Domain(format!(
                "cutoff must be > 0, got {}",
                self.lambda_cutoff
            )));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Domain(format!(
                "temperature must be ≥ 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Inverse temperature; `None` at T = 0.
    pub fn beta(&self) -> Option<f64> {
        (self.temperature > 0.0).then(|| 1.0 / self.temperature)
    }

    /// Spectral density J(ω) for ω ≥ 0.
    pub fn spectral_density(&self, omega: f64) -> Result<f64> {
        if !(omega >= 0.0) {
            return Err(Error::Domain(format!(
                "spectral density needs ω ≥ 0, got {omega}"
            )));
        }
        Ok(self.spectral_density_unchecked(omega))
    }

    #[inline]
    pub(crate) fn spectral_density_unchecked(&self, omega: f64) -> f64 {
        let r = omega / self.lambda_cutoff;
        self.gamma * omega / (1.0 + r * r)
    }

    /// Analytic continuation of J into the complex plane (poles at ±iΛ).
    #[inline]
    pub(crate) fn spectral_density_complex(&self, z: Complex64) -> Complex64 {
        let r = z / self.lambda_cutoff;
        self.gamma * z / (1.0 + r * r)
    }

    /// Counter-term Δω² = (2/π)∫₀^∞ J(ω)/ω dω = γΛ.
    pub fn counterterm_frequency_sq(&self) -> f64 {
        self.gamma * self.lambda_cutoff
    }

    /// Dissipation kernel χ(t) = γΛ² e^{-Λt}.
    pub fn dissipation_kernel(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!(
                "dissipation kernel needs t ≥ 0, got {t}"
            )));
        }
        let l = self.lambda_cutoff;
        Ok(self.gamma * l * l * (-l * t).exp())
    }

    /// Laplace transform χ̂(s) = γΛ²/(s + Λ).
    pub fn dissipation_kernel_laplace(&self, s: Complex64) -> Result<Complex64> {
        let l = self.lambda_cutoff;
        let denom = s + l;
        if denom.norm() <= 1e-14 * l {
            return Err(Error::Singularity(format!(
                "χ̂(s) has a pole at s = −Λ = {}",
                -l
            )));
        }
        if s.re <= -l {
            return Err(Error::Domain(format!(
                "χ̂(s) is defined by its Laplace integral only for Re s > −Λ, got s = {s}"
            )));
        }
        Ok(self.gamma * l * l / denom)
    }

    /// Bath correlation function C(t) for t > 0 by adaptive quadrature.
    ///
    /// The vacuum part `(1/π)∫J e^{-iωt}` is integrated along the ray
    /// `ω = r e^{-iπ/4}`, where the integrand decays exponentially; the
    /// thermal remainder `(2/π)∫J n̄(ω) cos ωt` decays like `e^{-ω/T}` and is
    /// integrated on the real axis. Re C diverges logarithmically as t → 0⁺.
    pub fn correlation(&self, t: f64) -> Result<Complex64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("correlation needs t ≥ 0, got {t}")));
        }
        if self.gamma == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if t == 0.0 {
            return Err(Error::Singularity(
                "Re C(t) diverges logarithmically at t = 0 for the Lorentz-Drude bath".into(),
            ));
        }
        let theta = PI / 4.0;
        let dir = Complex64::from_polar(1.0, -theta);
        let decay = t * theta.sin();
        let scale = (1.0 / decay).min(self.lambda_cutoff);
        let spec = QuadratureSpec::new(1e-12, 1e-18)
            .with_splits([0.1 / decay, 1.0 / decay, 10.0 / decay, 40.0 / decay])
            .with_tail(TailPolicy::Compactify { scale });
        let vac = integrate_semi_infinite(
            |r| {
                let z = dir * r;
                let v = self.spectral_density_complex(z) * (-Complex64::i() * z * t).exp() * dir;
                [v.re, v.im]
            },
            &spec,
        )
        .map_err(|e| Error::Numerical(format!("vacuum part of C({t}): {e}")))?;
        let mut value = Complex64::new(vac.value[0], vac.value[1]) / PI;

        if self.temperature > 0.0 {
            let temp = self.temperature;
            let period = 2.0 * PI / t;
            let top = 60.0 * temp;
            let n_split = ((top / period).ceil() as usize).clamp(1, 4000);
            let splits = (1..=n_split).map(|k| k as f64 * top / n_split as f64);
            let spec = QuadratureSpec::new(1e-12, 1e-18)
                .with_splits(splits)
                .with_tail(TailPolicy::Compactify { scale: temp });
            let th = integrate_semi_infinite(
                |w| {
                    let nbar = 1.0 / (w / temp).exp_m1();
                    let v = if w == 0.0 {
                        self.gamma * temp
                    } else {
                        self.spectral_density_unchecked(w) * nbar
                    };
                    [2.0 * v * (w * t).cos()]
                },
                &spec,
            )
            .map_err(|e| Error::Numerical(format!("thermal part of C({t}): {e}")))?;
            value.re += th.value[0] / PI;
        }
        Ok(value)
    }

    fn matsubara_guard(&self, n_terms: usize) -> Result<f64> {
        let beta = self.beta().ok_or_else(|| {
            Error::Unsupported(
                "the Matsubara expansion diverges at T = 0; use a small positive temperature"
                    .into(),
            )
        })?;
        if n_terms == 0 {
            return Err(Error::Domain("need at least one Matsubara term".into()));
        }
        let half = 0.5 * beta * self.lambda_cutoff;
        if half.sin().abs() < 1e-10 {
            return Err(Error::Singularity(format!(
                "Λ = {} coincides with a Matsubara frequency at T = {}",
                self.lambda_cutoff, self.temperature
            )));
        }
        Ok(beta)
    }

    /// Matsubara frequency ν_k = 2πkT.
    pub fn matsubara_frequency(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 * self.temperature
    }

    fn matsubara_coefficient(&self, k: usize, beta: f64) -> f64 {
        let l = self.lambda_cutoff;
        let nu = self.matsubara_frequency(k);
        2.0 * self.gamma * l * l * nu / (beta * (nu * nu - l * l))
    }

    /// Exponential decomposition of C(t): the Drude pole (rate Λ) followed by
    /// `n_terms` Matsubara terms (rates 2πkT).
    ///
    /// ```text
    /// c₀ = (γΛ²/2) (cot(βΛ/2) − i)
    /// c_k = 2γΛ² ν_k / (β (ν_k² − Λ²))
    /// ```
    pub fn matsubara_expansion(&self, n_terms: usize) -> Result<Vec<ExponentialTerm>> {
        let beta = self.matsubara_guard(n_terms)?;
        let l = self.lambda_cutoff;
        let amp = 0.5 * self.gamma * l * l;
        let cot = 1.0 / (0.5 * beta * l).tan();
        let mut terms = Vec::with_capacity(n_terms + 1);
        terms.push(ExponentialTerm {
            coefficient: Complex64::new(amp * cot, -amp),
            rate: l,
        });
        for k in 1..=n_terms {
            terms.push(ExponentialTerm {
                coefficient: Complex64::new(self.matsubara_coefficient(k, beta), 0.0),
                rate: self.matsubara_frequency(k),
            });
        }
        Ok(terms)
    }

    /// Markovian weight Δ = Σ_{k > N} Re(c_k)/ν_k of the discarded Matsubara terms.
    ///
    /// Uses the closed-form total `Σ_{k ≥ 0} Re(c_k)/ν_k = γT`, i.e. the zero
    /// frequency limit of J(ω)coth(ω/2T)/2, minus the retained terms.
    pub fn terminator_strength(&self, n_terms: usize) -> Result<f64> {
        self.tail_spectrum(n_terms, 0.0)
    }

    /// Weight of the discarded terms in the noise spectrum at frequency ω,
    /// `Σ_{k > N} Re(c_k) ν_k/(ν_k² + ω²)`; equals [`Self::terminator_strength`] at ω = 0.
    ///
    /// The full sum over all terms is `J(ω)coth(ω/2T)/2`, so only the retained
    /// terms are summed explicitly.
    pub fn tail_spectrum(&self, n_terms: usize, omega: f64) -> Result<f64> {
        let beta = self.matsubara_guard(n_terms)?;
        if !omega.is_finite() {
            return Err(Error::Domain(format!(
                "frequency must be finite, got {omega}"
            )));
        }
        let w = omega.abs();
        let w2 = w * w;
        let total = if w == 0.0 {
            self.gamma * self.temperature
        } else {
            0.5 * self.spectral_density_unchecked(w) * coth_half(w, self.temperature)
        };
        let l = self.lambda_cutoff;
        let mut retained = 0.5 * self.gamma * l * l / (0.5 * beta * l).tan() * l / (l * l + w2);
        // Smallest terms first.
        let mut tail_sum = 0.0;
        for k in (1..=n_terms).rev() {
            let nu = self.matsubara_frequency(k);
            tail_sum += self.matsubara_coefficient(k, beta) * nu / (nu * nu + w2);
        }
        retained += tail_sum;
        Ok(total - retained)
    }
}

/// Evaluate `Σ_k c_k e^{-ν_k t}`.
pub fn evaluate_expansion(terms: &[ExponentialTerm], t: f64) -> Complex64 {
    terms
        .iter()
        .rev()
        .map(|term| term.coefficient * (-term.rate * t).exp())
        .sum()
}

//! Exact Gaussian dynamics of a harmonic oscillator in the Lorentz-Drude bath
//! (quantum Brownian motion).
//!
//! The Heisenberg equation of motion is the quantum Langevin equation
//! `ẍ + ω_R² x − ∫₀ᵗ χ(t−t′) x(t′) dt′ = F(t)` with `ω_R² = ω₀² + γΛ`. Its
//! solution `Z(t) = G(t) Z(0) + ∫ G(t−t′)(0, F(t′)) dt′` gives
//!
//! ```text
//! Σ(t) = G(t) Σ₀ G(t)ᵀ + Σᴺ(t)
//! ```
//!
//! for an initial product state with the bath in equilibrium. The propagator
//! is a sum of three exponentials (see [`characteristic_roots`]); the noise
//! part Σᴺ needs one frequency integral per time (see [`noise_covariance`]).

mod kernel;
mod noise;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::BathSpec;
use crate::LogBase;

pub use kernel::{characteristic_roots, propagator, Matrix2, PropagatorKernel};
pub use noise::{noise_covariance, steady_covariance, NoiseEstimate};

/// Tolerance on the Heisenberg bound `det Σ ≥ 1/4`.
pub const HEISENBERG_TOL: f64 = 1e-9;

/// Harmonic impurity of unit mass and bare frequency ω₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorSpec {
    pub omega0: f64,
    pub bath: BathSpec,
}

impl OscillatorSpec {
    pub fn new(omega0: f64, bath: BathSpec) -> Result<Self> {
        let spec = Self { omega0, bath };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::Domain(format!(
                "ω₀ must be > 0, got {}",
                self.omega0
            )));
        }
        self.bath.validate()
    }

    /// Renormalized frequency squared, `ω₀² + γΛ`.
    pub fn omega_r_sq(&self) -> f64 {
        self.omega0 * self.omega0 + self.bath.counterterm_frequency_sq()
    }
}

/// Second moments of `(x, p)`; `sxp` is the symmetrized cross term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    pub sxx: f64,
    pub sxp: f64,
    pub spp: f64,
}

impl CovarianceMatrix {
    /// Checked constructor: positive variances and `det Σ ≥ 1/4` (within [`HEISENBERG_TOL`]).
    pub fn new(sxx: f64, sxp: f64, spp: f64) -> Result<Self> {
        let cov = Self { sxx, sxp, spp };
        cov.validate()?;
        Ok(cov)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sxx > 0.0 && self.spp > 0.0 && self.sxp.is_finite()) {
            return Err(Error::InvalidState(format!(
                "variances must be positive: {self:?}"
            )));
        }
        let det = self.det();
        if det < 0.25 - HEISENBERG_TOL {
            return Err(Error::InvalidState(format!(
                "det Σ = {det} violates the Heisenberg bound 1/4"
            )));
        }
        Ok(())
    }

    pub fn det(&self) -> f64 {
        self.sxx * self.spp - self.sxp * self.sxp
    }

    /// `tr ρ² = 1/(2√det Σ)`.
    pub fn purity(&self) -> f64 {
        0.5 / self.det().sqrt()
    }

    fn as_matrix(&self) -> Matrix2 {
        [[self.sxx, self.sxp], [self.sxp, self.spp]]
    }

    /// `G Σ Gᵀ`.
    pub fn transform(&self, g: &Matrix2) -> Self {
        let s = self.as_matrix();
        let mut gs = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                gs[i][j] = g[i][0] * s[0][j] + g[i][1] * s[1][j];
            }
        }
        let entry = |i: usize, j: usize| gs[i][0] * g[j][0] + gs[i][1] * g[j][1];
        Self {
            sxx: entry(0, 0),
            sxp: 0.5 * (entry(0, 1) + entry(1, 0)),
            spp: entry(1, 1),
        }
    }
}

impl std::ops::Add for CovarianceMatrix {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            sxx: self.sxx + o.sxx,
            sxp: self.sxp + o.sxp,
            spp: self.spp + o.spp,
        }
    }
}

/// Single-mode Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    /// `(⟨x⟩, ⟨p⟩)`.
    pub mean: [f64; 2],
    pub cov: CovarianceMatrix,
}

impl GaussianState {
    pub fn new(mean: [f64; 2], cov: CovarianceMatrix) -> Result<Self> {
        cov.validate()?;
        Ok(Self { mean, cov })
    }

    pub fn purity(&self) -> f64 {
        self.cov.purity()
    }
}

/// Centred pure wave packet with `σ_xx = δ`, `σ_pp = 1/(4δ)`, `σ_xp = 0`.
pub fn wave_packet(delta: f64) -> Result<GaussianState> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!(
            "wave-packet width must be > 0, got {delta}"
        )));
    }
    Ok(GaussianState {
        mean: [0.0, 0.0],
        cov: CovarianceMatrix {
            sxx: delta,
            sxp: 0.0,
            spp: 0.25 / delta,
        },
    })
}

/// Ground state of the bare oscillator `p²/2 + ω₀²x²/2`.
pub fn ground_state(omega0: f64) -> Result<GaussianState> {
    if !(omega0 > 0.0) {
        return Err(Error::Domain(format!("ω₀ must be > 0, got {omega0}")));
    }
    wave_packet(0.5 / omega0)
}

/// State at time t together with the quadrature error of its noise part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolvedState {
    pub time: f64,
    pub state: GaussianState,
    pub quadrature_error: f64,
}

fn evolve_with(
    spec: &OscillatorSpec,
    kernel: &PropagatorKernel,
    state0: &GaussianState,
    t: f64,
) -> Result<EvolvedState> {
    if t == 0.0 {
        return Ok(EvolvedState {
            time: 0.0,
            state: *state0,
            quadrature_error: 0.0,
        });
    }
    let g = propagator(kernel, t)?;
    let noise = noise_covariance(spec, kernel, t)?;
    let cov = state0.cov.transform(&g) + noise.cov;
    let m = state0.mean;
    let mean = [
        g[0][0] * m[0] + g[0][1] * m[1],
        g[1][0] * m[0] + g[1][1] * m[1],
    ];
    Ok(EvolvedState {
        time: t,
        state: GaussianState { mean, cov },
        quadrature_error: noise.error,
    })
}

/// State at time `t` from `state0` with the bath in equilibrium at t = 0.
pub fn evolve_covariance(
    spec: &OscillatorSpec,
    state0: &GaussianState,
    t: f64,
) -> Result<GaussianState> {
    state0.cov.validate()?;
    let kernel = characteristic_roots(spec)?;
    Ok(evolve_with(spec, &kernel, state0, t)?.state)
}

/// [`evolve_covariance`] on a whole grid, evaluated in parallel.
pub fn evolve_trajectory(
    spec: &OscillatorSpec,
    state0: &GaussianState,
    times: &[f64],
) -> Result<Vec<EvolvedState>> {
    state0.cov.validate()?;
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Error::Domain(format!(
            "times must be finite and ≥ 0, got {t}"
        )));
    }
    let kernel = characteristic_roots(spec)?;
    times
        .par_iter()
        .map(|&t| evolve_with(spec, &kernel, state0, t))
        .collect()
}

/// Symplectic eigenvalue `λ = √det Σ ≥ 1/2`.
pub fn symplectic_eigenvalue(cov: &CovarianceMatrix) -> Result<f64> {
    let det = cov.det();
    if !(det >= 0.25 - HEISENBERG_TOL) {
        return Err(Error::InvalidState(format!(
            "det Σ = {det} violates the Heisenberg bound 1/4"
        )));
    }
    Ok(det.max(0.25).sqrt())
}

/// `(λ+½) log(λ+½) − (λ−½) log(λ−½)`, with `0 log 0 = 0`.
pub fn entropy_from_symplectic(lambda: f64, base: LogBase) -> f64 {
    let xlogx = |x: f64| if x <= 0.0 { 0.0 } else { x * base.log(x) };
    (xlogx(lambda + 0.5) - xlogx(lambda - 0.5)).max(0.0)
}

/// Von Neumann entropy of a single-mode Gaussian state.
pub fn gaussian_entropy(cov: &CovarianceMatrix, base: LogBase) -> Result<f64> {
    Ok(entropy_from_symplectic(symplectic_eigenvalue(cov)?, base))
}

/// Uhlmann fidelity `F = (tr√(√ρ σ √ρ))²` of two single-mode Gaussian states:
///
/// ```text
/// F = exp(−½ dᵀ (Σ_a+Σ_b)⁻¹ d) / (√(Δ+δ) − √δ),
/// Δ = det(Σ_a+Σ_b),  δ = 4 (det Σ_a − ¼)(det Σ_b − ¼)
/// ```
pub fn gaussian_fidelity(a: &GaussianState, b: &GaussianState) -> f64 {
    let s = a.cov + b.cov;
    let big = s.det();
    let small = (4.0 * (a.cov.det() - 0.25) * (b.cov.det() - 0.25)).max(0.0);
    let d = [a.mean[0] - b.mean[0], a.mean[1] - b.mean[1]];
    let quad = (s.spp * d[0] * d[0] - 2.0 * s.sxp * d[0] * d[1] + s.sxx * d[1] * d[1]) / big;
    let f = (-0.5 * quad).exp() / ((big + small).sqrt() - small.sqrt());
    f.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> OscillatorSpec {
        OscillatorSpec::new(1.0, BathSpec::new(0.001, 10.0, 0.0).unwrap()).unwrap()
    }

    #[test]
    fn free_oscillator_kernel() {
        let spec = OscillatorSpec::new(1.0, BathSpec::new(0.0, 10.0, 0.0).unwrap()).unwrap();
        let k = characteristic_roots(&spec).unwrap();
        for t in [0.0, 0.3, 2.0, 17.5] {
            let g = propagator(&k, t).unwrap();
            assert!((g[0][0] - t.cos()).abs() < 1e-14);
            assert!((g[0][1] - t.sin()).abs() < 1e-14);
            assert!((g[1][0] + t.sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn residue_identities() {
        let k = characteristic_roots(&fig1()).unwrap();
        assert_eq!(k.roots.len(), 3);
        let s0: num_complex::Complex64 = k.residues.iter().sum();
        let s1: num_complex::Complex64 = k.roots.iter().zip(&k.residues).map(|(s, a)| s * a).sum();
        assert!(s0.norm() < 1e-12 && (s1 - 1.0).norm() < 1e-12);
        assert!(k.roots.iter().all(|s| s.re < 0.0));
        let g0 = propagator(&k, 0.0).unwrap();
        assert!((g0[0][0] - 1.0).abs() < 1e-12 && g0[0][1].abs() < 1e-12 && g0[1][0].abs() < 1e-12);
    }

    #[test]
    fn wave_packet_values() {
        let wp = wave_packet(0.01).unwrap();
        assert_eq!((wp.cov.sxx, wp.cov.sxp, wp.cov.spp), (0.01, 0.0, 25.0));
        assert_eq!(gaussian_entropy(&wp.cov, LogBase::Natural).unwrap(), 0.0);
        assert!(wave_packet(0.0).is_err());
        assert_eq!(
            ground_state(1.0).unwrap().cov,
            CovarianceMatrix {
                sxx: 0.5,
                sxp: 0.0,
                spp: 0.5
            }
        );
    }

    #[test]
    fn entropy_values() {
        let c = CovarianceMatrix {
            sxx: 1.0,
            sxp: 0.0,
            spp: 1.0,
        };
        assert_eq!(symplectic_eigenvalue(&c).unwrap(), 1.0);
        let s = gaussian_entropy(&c, LogBase::Two).unwrap();
        assert!((s - (1.5 * 1.5_f64.log2() + 0.5)).abs() < 1e-14);
        assert!((s - 1.377_443_751_081_734_4).abs() < 1e-12);
        let bad = CovarianceMatrix {
            sxx: 0.4,
            sxp: 0.0,
            spp: 0.4,
        };
        assert!(matches!(
            symplectic_eigenvalue(&bad),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn fidelity_basics() {
        let a = ground_state(1.0).unwrap();
        assert!((gaussian_fidelity(&a, &a) - 1.0).abs() < 1e-15);
        let th = GaussianState {
            mean: [0.0, 0.0],
            cov: CovarianceMatrix {
                sxx: 2.0,
                sxp: 0.3,
                spp: 1.0,
            },
        };
        assert!((gaussian_fidelity(&th, &th) - 1.0).abs() < 1e-12);
        let far = GaussianState {
            mean: [50.0, 0.0],
            ..a
        };
        assert!(gaussian_fidelity(&a, &far) < 1e-100);
    }

    #[test]
    fn uncoupled_noise_vanishes() {
        let spec = OscillatorSpec::new(1.0, BathSpec::new(0.0, 10.0, 0.0).unwrap()).unwrap();
        let k = characteristic_roots(&spec).unwrap();
        let n = noise_covariance(&spec, &k, 3.0).unwrap().cov;
        assert_eq!((n.sxx, n.sxp, n.spp), (0.0, 0.0, 0.0));
        assert!(steady_covariance(&spec).is_err());
        let k = characteristic_roots(&fig1()).unwrap();
        let n = noise_covariance(&fig1(), &k, 0.0).unwrap().cov;
        assert_eq!((n.sxx, n.sxp, n.spp), (0.0, 0.0, 0.0));
    }

    #[test]
    fn long_time_noise_matches_steady_state() {
        let spec = fig1();
        let k = characteristic_roots(&spec).unwrap();
        let t = 200.0 / k.slowest_rate();
        let n = noise_covariance(&spec, &k, t).unwrap().cov;
        let ss = steady_covariance(&spec).unwrap().cov;
        assert!((n.sxx - ss.sxx).abs() < 1e-6, "{n:?} {ss:?}");
        assert!((n.spp - ss.spp).abs() < 1e-6);
        assert!(n.sxp.abs() < 1e-6);
    }

    #[test]
    fn weak_coupling_steady_state_is_near_ground_state() {
        let spec = OscillatorSpec::new(1.0, BathSpec::new(1e-5, 10.0, 0.0).unwrap()).unwrap();
        let ss = steady_covariance(&spec).unwrap().cov;
        assert!(
            (ss.sxx - 0.5).abs() < 1e-4 && (ss.spp - 0.5).abs() < 1e-3,
            "{ss:?}"
        );
        let s =
            gaussian_entropy(&steady_covariance(&fig1()).unwrap().cov, LogBase::Natural).unwrap();
        assert!(s > 0.0 && s < 0.05, "{s}");
    }
}

//! Bath-driven part of the covariance matrix.
//!
//! With `I_c(ω, t) = ∫₀ᵗ Σ_j c_j e^{s_j τ} e^{iωτ} dτ` the noise covariances are
//!
//! ```text
//! σᴺ_cd(t) = (1/π) ∫₀^∞ J(ω) coth(ω/2T) Re[I_c conj(I_d)] dω
//! ```
//!
//! (c, d ∈ {g, g′}). Writing `I_c = e^{iωt} b_c − a_c` with
//! `a_c = Σ c_j/(s_j + iω)` and `b_c = Σ c_j e^{s_j t}/(s_j + iω)` splits the
//! integrand into a smooth part `Re(a_c ā_d + b_c b̄_d)` and an oscillating
//! part `−Re[e^{iωt}(b_c â_d + b_d â_c)]`, where `â_c(ω) = Σ c_j/(s_j − iω)` is
//! the analytic continuation of `ā_c`. The smooth part is integrated on the
//! real axis. The oscillating part is rotated onto a ray `ω = r e^{iθ}`, where
//! `e^{iωt}` decays, picking up the residues of `â` at `ω = −i s_j` in between.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::kernel::PropagatorKernel;
use super::{CovarianceMatrix, OscillatorSpec};
use crate::error::{Error, Result};
use crate::quadrature::{clip_splits, integrate_semi_infinite, QuadratureSpec, TailPolicy};
use crate::spectral::{coth_half, coth_half_complex, BathSpec};

/// Noise covariance together with the quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseEstimate {
    pub cov: CovarianceMatrix,
    /// Estimated absolute quadrature error (max over entries).
    pub error: f64,
}

const REL_TOL: f64 = 1e-10;
const ABS_TOL: f64 = 1e-13;

/// `J(ω) coth(ω/2T) / π` on the real axis.
fn weight(bath: &BathSpec, w: f64) -> f64 {
    if w == 0.0 {
        return if bath.temperature > 0.0 {
            2.0 * bath.gamma * bath.temperature / PI
        } else {
            0.0
        };
    }
    bath.spectral_density_unchecked(w) * coth_half(w, bath.temperature) / PI
}

fn weight_complex(bath: &BathSpec, z: Complex64) -> Complex64 {
    if z.norm() == 0.0 {
        return Complex64::new(weight(bath, 0.0), 0.0);
    }
    bath.spectral_density_complex(z) * coth_half_complex(z, bath.temperature) / PI
}

/// Break points for the real-axis integrand: the resonances of ĝ, their
/// widths, the cutoff and the thermal scale.
fn real_axis_splits(spec: &OscillatorSpec, kernel: &PropagatorKernel) -> Vec<f64> {
    let mut pts = vec![spec.omega0, spec.bath.lambda_cutoff];
    if spec.bath.temperature > 0.0 {
        pts.push(spec.bath.temperature);
        pts.push(10.0 * spec.bath.temperature);
    }
    for s in &kernel.roots {
        let centre = s.im.abs();
        let width = (-s.re).max(1e-300);
        if centre > 0.0 {
            pts.push(centre);
            for k in [1.0, 3.0, 10.0, 30.0, 100.0] {
                pts.push(centre - k * width);
                pts.push(centre + k * width);
            }
        } else {
            pts.push(width);
        }
    }
    clip_splits(pts, 0.0, f64::INFINITY)
}

fn tail_scale(spec: &OscillatorSpec) -> f64 {
    spec.bath.lambda_cutoff.max(spec.omega0)
}

/// Pairs (c, d) in the order xx, xp, pp.
const PAIRS: [(usize, usize); 3] = [(0, 0), (0, 1), (1, 1)];

struct Sums<'a> {
    roots: &'a [Complex64],
    weights: [Vec<Complex64>; 2],
}

impl Sums<'_> {
    /// `â_c(ω) = Σ c_j/(s_j − iω)` for c = g, g′.
    fn a_hat(&self, w: Complex64) -> [Complex64; 2] {
        let iw = Complex64::i() * w;
        let mut out = [Complex64::new(0.0, 0.0); 2];
        for (j, s) in self.roots.iter().enumerate() {
            let inv = 1.0 / (s - iw);
            out[0] += self.weights[0][j] * inv;
            out[1] += self.weights[1][j] * inv;
        }
        out
    }

    /// `a_c(ω) = Σ c_j/(s_j + iω)`.
    fn a(&self, w: Complex64) -> [Complex64; 2] {
        self.a_hat(-w)
    }

    /// `b_c(ω, t) = Σ c_j e^{s_j t}/(s_j + iω)`.
    fn b(&self, w: Complex64, decay: &[Complex64]) -> [Complex64; 2] {
        let iw = Complex64::i() * w;
        let mut out = [Complex64::new(0.0, 0.0); 2];
        for (j, s) in self.roots.iter().enumerate() {
            let f = decay[j] / (s + iw);
            out[0] += self.weights[0][j] * f;
            out[1] += self.weights[1][j] * f;
        }
        out
    }
}

/// Inhomogeneous part Σᴺ(t) of the covariance matrix.
pub fn noise_covariance(
    spec: &OscillatorSpec,
    kernel: &PropagatorKernel,
    t: f64,
) -> Result<NoiseEstimate> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!(
            "noise covariance needs finite t ≥ 0, got {t}"
        )));
    }
    let zero = NoiseEstimate {
        cov: CovarianceMatrix {
            sxx: 0.0,
            sxp: 0.0,
            spp: 0.0,
        },
        error: 0.0,
    };
    if t == 0.0 || spec.bath.gamma == 0.0 {
        return Ok(zero);
    }
    let bath = spec.bath;
    let sums = Sums {
        roots: &kernel.roots,
        weights: [kernel.weights(0), kernel.weights(1)],
    };
    let decay: Vec<Complex64> = kernel.roots.iter().map(|s| (s * t).exp()).collect();

    // Smooth part on the real axis.
    let qspec = QuadratureSpec::new(REL_TOL, ABS_TOL)
        .with_splits(real_axis_splits(spec, kernel))
        .with_tail(TailPolicy::Compactify {
            scale: tail_scale(spec),
        });
    let smooth = integrate_semi_infinite(
        |w| {
            let wc = Complex64::new(w, 0.0);
            let a = sums.a(wc);
            let b = sums.b(wc, &decay);
            let q = weight(&bath, w);
            PAIRS.map(|(c, d)| q * (a[c] * a[d].conj() + b[c] * b[d].conj()).re)
        },
        &qspec,
    )
    .map_err(|e| Error::Numerical(format!("noise covariance at t = {t}, real-axis part: {e}")))?;

    // Oscillating part along the ray.
    let theta = ray_angle(&kernel.roots);
    let dir = Complex64::from_polar(1.0, theta);
    let rate = t * theta.sin();
    let mut ray_pts = vec![
        0.1 / rate,
        1.0 / rate,
        10.0 / rate,
        40.0 / rate,
        bath.lambda_cutoff,
    ];
    ray_pts.extend(kernel.roots.iter().map(|s| s.norm()));
    let ray_pts = clip_splits(ray_pts, 0.0, f64::INFINITY);
    let qspec = QuadratureSpec::new(REL_TOL, ABS_TOL)
        .with_splits(ray_pts)
        .with_tail(TailPolicy::Compactify {
            scale: (1.0 / rate).min(tail_scale(spec)),
        });
    let osc_integrand = |w: Complex64| -> [Complex64; 3] {
        let ah = sums.a_hat(w);
        let b = sums.b(w, &decay);
        let q = weight_complex(&bath, w) * (Complex64::i() * w * t).exp();
        PAIRS.map(|(c, d)| q * (b[c] * ah[d] + b[d] * ah[c]))
    };
    let ray = integrate_semi_infinite(
        |r| {
            let v = osc_integrand(dir * r);
            let v = v.map(|z| z * dir);
            [v[0].re, v[0].im, v[1].re, v[1].im, v[2].re, v[2].im]
        },
        &qspec,
    )
    .map_err(|e| {
        Error::Numerical(format!(
            "noise covariance at t = {t}, oscillating part: {e}"
        ))
    })?;

    // Residues of â_c at ω_j = −i s_j inside the sector 0 < arg ω < θ.
    let mut residue = [Complex64::new(0.0, 0.0); 3];
    for (j, s) in kernel.roots.iter().enumerate() {
        let wj = -Complex64::i() * s;
        let arg = wj.arg();
        if !(arg > 0.0 && arg < theta) {
            continue;
        }
        let b = sums.b(wj, &decay);
        let q = weight_complex(&bath, wj) * (Complex64::i() * wj * t).exp();
        let cw = [sums.weights[0][j], sums.weights[1][j]];
        // Res_{ω_j} 1/(s_j − iω) = i.
        for (k, (c, d)) in PAIRS.iter().enumerate() {
            residue[k] += q * (b[*c] * cw[*d] + b[*d] * cw[*c]) * Complex64::i();
        }
    }
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let osc: Vec<f64> = (0..3)
        .map(|k| {
            (Complex64::new(ray.value[2 * k], ray.value[2 * k + 1]) + two_pi_i * residue[k]).re
        })
        .collect();

    let cov = CovarianceMatrix {
        sxx: smooth.value[0] - osc[0],
        sxp: smooth.value[1] - osc[1],
        spp: smooth.value[2] - osc[2],
    };
    Ok(NoiseEstimate {
        cov,
        error: smooth.error + ray.error,
    })
}

/// Ray angle in (0, π/2) staying clear of the poles `−i s_j` of `â`.
fn ray_angle(roots: &[Complex64]) -> f64 {
    let candidates = [PI / 4.0, PI / 6.0, PI / 3.0, PI / 5.0, 2.0 * PI / 7.0];
    let clearance = |theta: f64| {
        roots
            .iter()
            .map(|s| ((-Complex64::i() * s).arg() - theta).abs())
            .fold(f64::INFINITY, f64::min)
    };
    candidates
        .into_iter()
        .find(|&th| clearance(th) > 0.05)
        .unwrap_or_else(|| {
            candidates
                .into_iter()
                .max_by(|a, b| clearance(*a).total_cmp(&clearance(*b)))
                .expect("non-empty")
        })
}

/// Steady-state covariance from `ĝ(iω) = 1/((iω)² + ω_R² − χ̂(iω))`:
/// `σ_xx = (1/π)∫ J coth |ĝ|²`, `σ_pp = (1/π)∫ J coth ω²|ĝ|²`, `σ_xp = 0`.
pub fn steady_covariance(spec: &OscillatorSpec) -> Result<NoiseEstimate> {
    spec.validate()?;
    if spec.bath.gamma == 0.0 {
        return Err(Error::Unsupported(
            "an uncoupled oscillator has no unique steady state".into(),
        ));
    }
    let kernel = super::characteristic_roots(spec)?;
    let bath = spec.bath;
    let wr2 = spec.omega_r_sq();
    let qspec = QuadratureSpec::new(REL_TOL, ABS_TOL)
        .with_splits(real_axis_splits(spec, &kernel))
        .with_tail(TailPolicy::Compactify {
            scale: tail_scale(spec),
        });
    let est = integrate_semi_infinite(
        |w| {
            let iw = Complex64::new(0.0, w);
            let chi =
                bath.gamma * bath.lambda_cutoff * bath.lambda_cutoff / (iw + bath.lambda_cutoff);
            let g = 1.0 / (iw * iw + wr2 - chi);
            let m = g.norm_sqr() * weight(&bath, w);
            [m, w * w * m]
        },
        &qspec,
    )
    .map_err(|e| Error::Numerical(format!("steady-state covariance: {e}")))?;
    Ok(NoiseEstimate {
        cov: CovarianceMatrix {
            sxx: est.value[0],
            sxp: 0.0,
            spp: est.value[1],
        },
        error: est.error,
    })
}

//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the solver code paths it is used to check; the
//! oracles only share the input parameter structs.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use pagecurve::gaussian_qbm::{CovarianceMatrix, OscillatorSpec};
use pagecurve::Complex64;

/// Closed-system Gaussian dynamics of the oscillator plus `n_modes` explicit
/// bath oscillators sampling J(ω) on `[0, omega_max]`.
///
/// The modes sit at `ω = ω_max x²` for midpoints x of a uniform grid on
/// [0, 1]. The quadratic map puts most modes at low frequency and, unlike
/// equal spacing, has no common period, so the discrete bath shows no sharp
/// recurrences on the time scales tested.
pub struct DiscreteBath {
    /// Eigenvectors of the potential matrix (columns).
    u: DMatrix<f64>,
    /// Normal-mode frequencies.
    freq: Vec<f64>,
    /// Initial variances of the bath coordinates and momenta.
    bath_x: Vec<f64>,
    bath_p: Vec<f64>,
    pub n: usize,
}

impl DiscreteBath {
    pub fn new(spec: &OscillatorSpec, n_modes: usize, omega_max: f64) -> Self {
        let b = spec.bath;
        let dx = 1.0 / n_modes as f64;
        let n = n_modes + 1;
        let mut v = DMatrix::<f64>::zeros(n, n);
        let mut counter = 0.0;
        let mut bath_x = Vec::with_capacity(n_modes);
        let mut bath_p = Vec::with_capacity(n_modes);
        for mu in 0..n_modes {
            let x = (mu as f64 + 0.5) * dx;
            let w = omega_max * x * x;
            let dw = 2.0 * omega_max * x * dx;
            let j = b.gamma * w / (1.0 + (w / b.lambda_cutoff).powi(2));
            let g = (2.0 / std::f64::consts::PI * j * w * dw).sqrt();
            v[(mu + 1, mu + 1)] = w * w;
            v[(0, mu + 1)] = -g;
            v[(mu + 1, 0)] = -g;
            counter += g * g / (w * w);
            let coth = if b.temperature > 0.0 {
                1.0 / (w / (2.0 * b.temperature)).tanh()
            } else {
                1.0
            };
            bath_x.push(0.5 * coth / w);
            bath_p.push(0.5 * coth * w);
        }
        v[(0, 0)] = spec.omega0 * spec.omega0 + counter;
        let eig = SymmetricEigen::new(v);
        let freq = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
        Self {
            u: eig.eigenvectors,
            freq,
            bath_x,
            bath_p,
            n,
        }
    }

    /// Rows of the symplectic map for `(x_0, p_0)`: returns `(dx/dX0, dx/dP0, dp/dX0, dp/dP0)`.
    fn system_rows(&self, t: f64) -> [Vec<f64>; 4] {
        let n = self.n;
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for k in 0..n {
            let w = self.freq[k];
            let (s, c) = (w * t).sin_cos();
            let sinc = if w > 0.0 { s / w } else { t };
            let u0k = self.u[(0, k)];
            for i in 0..n {
                let uik = self.u[(i, k)];
                out[0][i] += u0k * c * uik;
                out[1][i] += u0k * sinc * uik;
                out[2][i] -= u0k * w * s * uik;
                out[3][i] += u0k * c * uik;
            }
        }
        out
    }

    /// Reduced covariance of the impurity at time t.
    pub fn covariance(&self, sys0: &CovarianceMatrix, t: f64) -> CovarianceMatrix {
        let [xx, xp, px, pp] = self.system_rows(t);
        let mut cxx =
            xx[0] * xx[0] * sys0.sxx + xp[0] * xp[0] * sys0.spp + 2.0 * xx[0] * xp[0] * sys0.sxp;
        let mut cpp =
            px[0] * px[0] * sys0.sxx + pp[0] * pp[0] * sys0.spp + 2.0 * px[0] * pp[0] * sys0.sxp;
        let mut cxp = xx[0] * px[0] * sys0.sxx
            + xp[0] * pp[0] * sys0.spp
            + (xx[0] * pp[0] + xp[0] * px[0]) * sys0.sxp;
        for i in 1..self.n {
            let (vx, vp) = (self.bath_x[i - 1], self.bath_p[i - 1]);
            cxx += xx[i] * xx[i] * vx + xp[i] * xp[i] * vp;
            cpp += px[i] * px[i] * vx + pp[i] * pp[i] * vp;
            cxp += xx[i] * px[i] * vx + xp[i] * pp[i] * vp;
        }
        CovarianceMatrix {
            sxx: cxx,
            sxp: cxp,
            spp: cpp,
        }
    }

    /// Largest entry of `(ΩΣ)² + I/4` for the full state at time t, which
    /// vanishes iff every symplectic eigenvalue is 1/2 (global purity).
    pub fn purity_defect(&self, sys0: &CovarianceMatrix, t: f64) -> f64 {
        let n = self.n;
        // Full symplectic map S in the (x…, p…) ordering.
        let mut s = DMatrix::<f64>::zeros(2 * n, 2 * n);
        let ut = self.u.transpose();
        let mut cos_d = DMatrix::<f64>::zeros(n, n);
        let mut sinc_d = DMatrix::<f64>::zeros(n, n);
        let mut wsin_d = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            let w = self.freq[k];
            let (sn, c) = (w * t).sin_cos();
            cos_d[(k, k)] = c;
            sinc_d[(k, k)] = if w > 0.0 { sn / w } else { t };
            wsin_d[(k, k)] = -w * sn;
        }
        let a = &self.u * cos_d * &ut;
        let b = &self.u * sinc_d * &ut;
        let c = &self.u * wsin_d * &ut;
        s.view_mut((0, 0), (n, n)).copy_from(&a);
        s.view_mut((0, n), (n, n)).copy_from(&b);
        s.view_mut((n, 0), (n, n)).copy_from(&c);
        s.view_mut((n, n), (n, n)).copy_from(&a);
        let mut sigma0 = DMatrix::<f64>::zeros(2 * n, 2 * n);
        sigma0[(0, 0)] = sys0.sxx;
        sigma0[(n, n)] = sys0.spp;
        sigma0[(0, n)] = sys0.sxp;
        sigma0[(n, 0)] = sys0.sxp;
        for i in 1..n {
            sigma0[(i, i)] = self.bath_x[i - 1];
            sigma0[(n + i, n + i)] = self.bath_p[i - 1];
        }
        let sigma = &s * sigma0 * s.transpose();
        let mut omega = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            omega[(i, n + i)] = 1.0;
            omega[(n + i, i)] = -1.0;
        }
        let m = &omega * sigma;
        let sq = &m * &m + DMatrix::<f64>::identity(2 * n, 2 * n) * 0.25;
        sq.amax()
    }
}

/// Propagator entries `(g, g′, g″)` from the memory-kernel equation
/// `ẍ + ω_R² x − ∫χ x = 0` with the exponential kernel carried by an auxiliary
/// variable, integrated with classical RK4 at a fixed small step.
pub fn memory_kernel_propagator(spec: &OscillatorSpec, times: &[f64], h: f64) -> Vec<[f64; 3]> {
    let b = spec.bath;
    let wr2 = spec.omega0 * spec.omega0 + b.gamma * b.lambda_cutoff;
    let f = |y: [f64; 3]| -> [f64; 3] {
        // y = (x, p, m), m = ∫₀ᵗ γΛ² e^{−Λ(t−τ)} x(τ) dτ
        [
            y[1],
            -wr2 * y[0] + y[2],
            b.gamma * b.lambda_cutoff * b.lambda_cutoff * y[0] - b.lambda_cutoff * y[2],
        ]
    };
    let mut y = [0.0, 1.0, 0.0];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while t < target - 1e-12 {
            let step = h.min(target - t);
            let k1 = f(y);
            let k2 = f(add(y, k1, 0.5 * step));
            let k3 = f(add(y, k2, 0.5 * step));
            let k4 = f(add(y, k3, step));
            for i in 0..3 {
                y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += step;
        }
        let acc = f(y)[1];
        out.push([y[0], y[1], acc]);
    }
    out
}

fn add(y: [f64; 3], k: [f64; 3], s: f64) -> [f64; 3] {
    [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]]
}

/// Von Neumann entropy (nats) of the thermal oscillator state with mean
/// occupation `n̄`, summed over the first `levels` Fock states.
pub fn fock_thermal_entropy(nbar: f64, levels: usize) -> f64 {
    let q = nbar / (nbar + 1.0);
    let mut s = 0.0;
    let mut p = 1.0 - q;
    for _ in 0..levels {
        if p > 0.0 {
            s -= p * p.ln();
        }
        p *= q;
    }
    s
}

/// `|⟨α|β⟩|² = e^{−|α−β|²}` for coherent states of a unit-frequency
/// oscillator, with `α = (x + ip)/√2`.
pub fn coherent_overlap(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = Complex64::new(a[0] - b[0], a[1] - b[1]) / 2f64.sqrt();
    (-d.norm_sqr()).exp()
}

const EULER: f64 = 0.577_215_664_901_532_9;

/// `e^x E₁(x)` for x > 0: power series up to 1, Lentz continued fraction beyond.
pub fn scaled_e1(x: f64) -> f64 {
    assert!(x > 0.0);
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            sum += term / k as f64;
        }
        return x.exp() * (-EULER - x.ln() - sum);
    }
    // E1(x) e^x = 1/(x + 1 − 1²/(x + 3 − 2²/(x + 5 − …)))
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// `e^{−x} Ei(x)` for x > 0 by the power series `γ + ln x + Σ x^k/(k·k!)`.
pub fn scaled_ei(x: f64) -> f64 {
    assert!(x > 0.0 && x < 500.0);
    let mut sum = 0.0;
    let mut term = 1.0;
    let mut k = 1;
    loop {
        term *= x / k as f64;
        let add = term / k as f64;
        sum += add;
        if add < 1e-18 * sum && k as f64 > x {
            break;
        }
        k += 1;
    }
    (-x).exp() * (EULER + x.ln() + sum)
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Euler-Maclaurin estimate of `Σ_{k=m}^∞ f(k)` for smooth decaying f:
/// `∫_m^∞ f + f(m)/2 − f′(m)/12`.
pub fn euler_maclaurin_tail(integral_from_m: f64, f_m: f64, df_m: f64) -> f64 {
    integral_from_m + 0.5 * f_m - df_m / 12.0
}

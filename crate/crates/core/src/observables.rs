//! Entropies, populations and the location of the entropy maximum.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian_qbm::{gaussian_entropy, steady_covariance, OscillatorSpec};
use crate::heom::QubitSpec;
use crate::LogBase;

/// 2×2 density matrix in the `{|1⟩, |0⟩}` basis (excited state first).
pub type DensityMatrix = [[Complex64; 2]; 2];

/// Eigenvalues below this are treated as invalid rather than rounding noise.
pub const PSD_TOL: f64 = 1e-8;

/// Entropy samples on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub base: LogBase,
}

impl EntropyCurve {
    pub fn new(times: Vec<f64>, values: Vec<f64>, base: LogBase) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Configuration(format!(
                "{} times but {} entropy values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(
                "entropy curve times must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            times,
            values,
            base,
        })
    }
}

/// Location of the entropy maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PageTimeReport {
    pub t_page: f64,
    pub s_max: f64,
    /// Index of the largest sample.
    pub grid_index: usize,
    /// The maximum sits on the first or last grid point, so it may lie outside the grid.
    pub unresolved: bool,
    /// Time at which P1 = 1/2, when a population curve was supplied.
    pub crossing_time: Option<f64>,
}

/// Real eigenvalues of a Hermitian 2×2 matrix, ascending.
fn hermitian_eigenvalues(rho: &DensityMatrix) -> [f64; 2] {
    let a = rho[0][0].re;
    let d = rho[1][1].re;
    let b = 0.5 * (rho[0][1] + rho[1][0].conj());
    let mean = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    [mean - r, mean + r]
}

/// Check hermiticity, unit trace and positivity to within `tol`.
pub fn validate_density_matrix(rho: &DensityMatrix, tol: f64) -> Result<()> {
    let herm = (rho[0][1] - rho[1][0].conj())
        .norm()
        .max(rho[0][0].im.abs())
        .max(rho[1][1].im.abs());
    if herm > tol {
        return Err(Error::InvalidState(format!(
            "density matrix is not Hermitian (defect {herm:e})"
        )));
    }
    let tr = (rho[0][0] + rho[1][1]).re;
    if (tr - 1.0).abs() > tol {
        return Err(Error::InvalidState(format!(
            "density matrix has trace {tr}"
        )));
    }
    let [lo, hi] = hermitian_eigenvalues(rho);
    if lo < -tol || hi > 1.0 + tol {
        return Err(Error::InvalidState(format!(
            "density matrix eigenvalues {lo:e}, {hi} outside [0, 1]"
        )));
    }
    Ok(())
}

/// `−Σ p log p` over the eigenvalues, clipped to `[0, 1]` after the positivity check.
pub fn von_neumann_entropy(rho: &DensityMatrix, base: LogBase) -> Result<f64> {
    let eig = hermitian_eigenvalues(rho);
    if eig[0] < -PSD_TOL {
        return Err(Error::InvalidState(format!(
            "negative eigenvalue {:e}",
            eig[0]
        )));
    }
    Ok(eig
        .iter()
        .map(|p| p.clamp(0.0, 1.0))
        .filter(|&p| p > 0.0)
        .map(|p| -p * base.log(p))
        .sum::<f64>()
        .max(0.0))
}

/// Entropy of `diag(p, 1−p)`.
pub fn binary_entropy(p: f64, base: LogBase) -> f64 {
    let h = |x: f64| if x > 0.0 { -x * base.log(x) } else { 0.0 };
    let p = p.clamp(0.0, 1.0);
    h(p) + h(1.0 - p)
}

/// Excited-state population `⟨1|ρ|1⟩`.
pub fn excited_population(rho: &DensityMatrix) -> f64 {
    rho[0][0].re
}

/// Weak-coupling Gibbs state `e^{−βH_S}/Z` of `H_S = (ε/2)σ_z`.
pub fn gibbs_state(spec: &QubitSpec) -> Result<DensityMatrix> {
    spec.validate()?;
    let t = spec.bath.temperature;
    if !(t > 0.0) {
        return Err(Error::Domain("the Gibbs state needs T > 0".into()));
    }
    // P1 = e^{−βε/2}/Z = 1/(1 + e^{βε}), written to stay finite as T → 0⁺.
    let p1 = 0.5 * (1.0 - (0.5 * spec.epsilon / t).tanh());
    let zero = Complex64::new(0.0, 0.0);
    Ok([
        [Complex64::new(p1, 0.0), zero],
        [zero, Complex64::new(1.0 - p1, 0.0)],
    ])
}

/// Entropy of the exact mean-force state of the oscillator, i.e. of its
/// steady-state covariance.
pub fn mean_force_entropy_qbm(spec: &OscillatorSpec, base: LogBase) -> Result<f64> {
    gaussian_entropy(&steady_covariance(spec)?.cov, base)
}

/// Largest sample, refined by the vertex of the parabola through it and its
/// two neighbours.
pub fn page_time(curve: &EntropyCurve) -> Result<PageTimeReport> {
    let n = curve.values.len();
    if n == 0 {
        return Err(Error::Domain("empty entropy curve".into()));
    }
    let i = curve.values.iter().enumerate().fold(
        0,
        |best, (j, v)| if *v > curve.values[best] { j } else { best },
    );
    let mut report = PageTimeReport {
        t_page: curve.times[i],
        s_max: curve.values[i],
        grid_index: i,
        unresolved: i == 0 || i == n - 1,
        crossing_time: None,
    };
    if report.unresolved {
        return Ok(report);
    }
    let (t0, t1, t2) = (curve.times[i - 1], curve.times[i], curve.times[i + 1]);
    let (y0, y1, y2) = (curve.values[i - 1], curve.values[i], curve.values[i + 1]);
    // Vertex of the interpolating parabola (divided differences).
    let d01 = (y1 - y0) / (t1 - t0);
    let d12 = (y2 - y1) / (t2 - t1);
    let curv = (d12 - d01) / (t2 - t0);
    if curv < 0.0 {
        let tv = 0.5 * (t0 + t1) - d01 / (2.0 * curv);
        let tv = tv.clamp(t0, t2);
        let yv = y1 + d01 * (tv - t1) + curv * (tv - t1) * (tv - t0);
        report.t_page = tv;
        report.s_max = yv.max(y1);
    }
    Ok(report)
}

/// First time at which `pop` crosses 1/2, by linear interpolation.
pub fn half_population_time(times: &[f64], pop: &[f64]) -> Option<f64> {
    times.windows(2).zip(pop.windows(2)).find_map(|(t, p)| {
        let (a, b) = (p[0] - 0.5, p[1] - 0.5);
        if a == 0.0 {
            Some(t[0])
        } else if a * b < 0.0 || b == 0.0 {
            Some(t[0] + (t[1] - t[0]) * a / (a - b))
        } else {
            None
        }
    })
}

/// [`page_time`] together with the P1 = 1/2 crossing of a population curve.
pub fn page_time_with_population(
    curve: &EntropyCurve,
    population: &[f64],
) -> Result<PageTimeReport> {
    if population.len() != curve.times.len() {
        return Err(Error::Configuration(
            "population and entropy curves differ in length".into(),
        ));
    }
    let mut r = page_time(curve)?;
    r.crossing_time = half_population_time(&curve.times, population);
    Ok(r)
}

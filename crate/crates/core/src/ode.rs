//! Adaptive time integrators.
//!
//! - [`DormandPrince`]: explicit embedded 5(4) pair with FSAL and the
//!   standard 4th-order continuous extension, for general non-stiff systems.
//! - [`Etd4`]: fourth-order exponential Runge-Kutta (Krogstad) for
//!   semilinear systems `y' = L∘y + N(y)` whose stiff part `L` is diagonal.
//!   The linear part is propagated exactly, so the step size is set by `N`
//!   alone. Error control is by step doubling.
//!
//! Both integrators write the solution at caller-supplied output times.

use std::collections::HashMap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Element type of an integrated state vector.
pub trait Scalar:
    Copy + Default + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(self) -> f64;
}

impl Scalar for f64 {
    #[inline]
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Right-hand side of `y' = f(t, y)`.
pub trait OdeSystem<S: Scalar> {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[S], dy: &mut [S]);
}

/// Local error tolerances; the per-component scale is `atol + rtol·|y|`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        if self.rtol > 0.0 && self.atol > 0.0 && self.rtol.is_finite() && self.atol.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "tolerances must be positive: {self:?}"
            )))
        }
    }
}

/// Counters reported by the integrators.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
    pub min_step: f64,
    pub max_step: f64,
}

impl Stats {
    fn record_step(&mut self, h: f64) {
        self.accepted += 1;
        if self.accepted == 1 {
            self.min_step = h;
            self.max_step = h;
        } else {
            self.min_step = self.min_step.min(h);
            self.max_step = self.max_step.max(h);
        }
    }
}

fn check_grid(t0: f64, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("empty output grid".into()));
    }
    if !(grid[0] >= t0) || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain(format!(
            "output grid must start at or after t0 = {t0}"
        )));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "output grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn error_norm<S: Scalar>(err: &[S], y0: &[S], y1: &[S], tol: &Tolerances) -> f64 {
    err.iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| e.magnitude() / (tol.atol + tol.rtol * a.magnitude().max(b.magnitude())))
        .fold(0.0, f64::max)
}

const MIN_STEP_FRACTION: f64 = 1e-13;

// Dormand-Prince 5(4) coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Dormand-Prince 5(4) with dense output.
#[derive(Debug, Clone, Copy)]
pub struct DormandPrince {
    pub tol: Tolerances,
    /// Upper bound on the step size (`None`: unbounded).
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl DormandPrince {
    pub fn new(tol: Tolerances) -> Self {
        Self {
            tol,
            max_step: None,
            max_steps: 50_000_000,
        }
    }

    /// Integrate from `(t0, y0)` and call `observe(i, grid[i], y)` at each output time.
    pub fn integrate<S, Sys, F>(
        &self,
        sys: &Sys,
        t0: f64,
        y0: &[S],
        grid: &[f64],
        mut observe: F,
    ) -> Result<Stats>
    where
        S: Scalar,
        Sys: OdeSystem<S> + ?Sized,
        F: FnMut(usize, f64, &[S]),
    {
        self.tol.validate()?;
        check_grid(t0, grid)?;
        let n = sys.dim();
        if y0.len() != n {
            return Err(Error::Configuration(format!(
                "state has length {} but the system has dimension {n}",
                y0.len()
            )));
        }
        let t_end = *grid.last().expect("non-empty grid");
        let span = (t_end - t0).max(f64::MIN_POSITIVE);
        let mut stats = Stats::default();

        let mut y = y0.to_vec();
        let mut t = t0;
        let mut next_out = 0;
        while next_out < grid.len() && grid[next_out] == t0 {
            observe(next_out, t0, &y);
            next_out += 1;
        }
        if next_out == grid.len() {
            return Ok(stats);
        }

        let zero = S::default();
        let mut k = vec![vec![zero; n]; 7];
        let mut ytmp = vec![zero; n];
        let mut ynew = vec![zero; n];
        let mut err = vec![zero; n];
        let mut dense = vec![vec![zero; n]; 5];
        let mut yout = vec![zero; n];

        sys.rhs(t, &y, &mut k[0]);
        stats.rhs_evaluations += 1;
        let mut h = self.initial_step(sys, t, &y, &k[0], span, &mut stats);
        let hmax = self.max_step.unwrap_or(span).min(span);
        let mut last_rejected = false;

        while next_out < grid.len() {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::Numerical(format!(
                    "Dormand-Prince exceeded {} steps at t = {t}",
                    self.max_steps
                )));
            }
            h = h.min(hmax).min(t_end - t);
            if h < MIN_STEP_FRACTION * span.max(t.abs()) {
                return Err(Error::Stiffness { t, h });
            }

            let stage = |coef: &[(usize, f64)], k: &Vec<Vec<S>>, out: &mut Vec<S>| {
                for i in 0..n {
                    let mut acc = y[i];
                    for &(j, a) in coef {
                        acc = acc + k[j][i] * (h * a);
                    }
                    out[i] = acc;
                }
            };
            stage(&[(0, A21)], &k, &mut ytmp);
            sys.rhs(t + C2 * h, &ytmp, &mut k[1]);
            stage(&[(0, A31), (1, A32)], &k, &mut ytmp);
            sys.rhs(t + C3 * h, &ytmp, &mut k[2]);
            stage(&[(0, A41), (1, A42), (2, A43)], &k, &mut ytmp);
            sys.rhs(t + C4 * h, &ytmp, &mut k[3]);
            stage(&[(0, A51), (1, A52), (2, A53), (3, A54)], &k, &mut ytmp);
            sys.rhs(t + C5 * h, &ytmp, &mut k[4]);
            stage(
                &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)],
                &k,
                &mut ytmp,
            );
            sys.rhs(t + h, &ytmp, &mut k[5]);
            stage(
                &[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)],
                &k,
                &mut ynew,
            );
            sys.rhs(t + h, &ynew, &mut k[6]);
            stats.rhs_evaluations += 6;

            for i in 0..n {
                err[i] = (k[0][i] * E1
                    + k[2][i] * E3
                    + k[3][i] * E4
                    + k[4][i] * E5
                    + k[5][i] * E6
                    + k[6][i] * E7)
                    * h;
            }
            let e = error_norm(&err, &y, &ynew, &self.tol);
            if !e.is_finite() {
                stats.rejected += 1;
                h *= 0.2;
                last_rejected = true;
                continue;
            }
            if e > 1.0 {
                stats.rejected += 1;
                h *= (0.9 * e.powf(-0.2)).max(0.2);
                last_rejected = true;
                continue;
            }

            // Accepted: build the continuous extension before overwriting y.
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = k[0][i] * h - ydiff;
                dense[0][i] = y[i];
                dense[1][i] = ydiff;
                dense[2][i] = bspl;
                dense[3][i] = ydiff - k[6][i] * h - bspl;
                dense[4][i] = (k[0][i] * D1
                    + k[2][i] * D3
                    + k[3][i] * D4
                    + k[4][i] * D5
                    + k[5][i] * D6
                    + k[6][i] * D7)
                    * h;
            }
            let t_new = t + h;
            while next_out < grid.len() && grid[next_out] <= t_new {
                let tout = grid[next_out];
                if tout == t_new {
                    observe(next_out, tout, &ynew);
                } else {
                    let th = (tout - t) / h;
                    let th1 = 1.0 - th;
                    for i in 0..n {
                        yout[i] = dense[0][i]
                            + (dense[1][i]
                                + (dense[2][i] + (dense[3][i] + dense[4][i] * th1) * th) * th1)
                                * th;
                    }
                    observe(next_out, tout, &yout);
                }
                next_out += 1;
            }
            stats.record_step(h);
            std::mem::swap(&mut y, &mut ynew);
            k.swap(0, 6);
            t = t_new;

            let mut fac = (0.9 * e.max(1e-10).powf(-0.2)).clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
            h *= fac;
        }
        Ok(stats)
    }

    fn initial_step<S: Scalar, Sys: OdeSystem<S> + ?Sized>(
        &self,
        sys: &Sys,
        t: f64,
        y: &[S],
        f0: &[S],
        span: f64,
        stats: &mut Stats,
    ) -> f64 {
        let sc = |v: &S, y: &S| v.magnitude() / (self.tol.atol + self.tol.rtol * y.magnitude());
        let d0 = y.iter().map(|v| sc(v, v)).fold(0.0, f64::max);
        let d1 = f0.iter().zip(y).map(|(f, y)| sc(f, y)).fold(0.0, f64::max);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(span);
        let y1: Vec<S> = y.iter().zip(f0).map(|(y, f)| *y + *f * h0).collect();
        let mut f1 = vec![S::default(); y.len()];
        sys.rhs(t + h0, &y1, &mut f1);
        stats.rhs_evaluations += 1;
        let d2 = f1
            .iter()
            .zip(f0)
            .zip(y)
            .map(|((a, b), y)| sc(&(*a - *b), y))
            .fold(0.0, f64::max)
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span)
    }
}

/// Semilinear system `y' = L∘y + N(y)` with a constant diagonal `L`.
pub trait SemilinearSystem: Sync {
    /// Diagonal of the linear operator; every entry must have `Re ≤ 0`.
    fn linear_diagonal(&self) -> &[Complex64];
    /// Nonlinear (here: off-diagonal) remainder `N(y)`.
    fn remainder(&self, y: &[Complex64], out: &mut [Complex64]);
}

/// `[e^z, φ₁(z), φ₂(z), φ₃(z)]` with `φ_k(z) = Σ_m z^m/(m+k)!`.
pub fn phi_functions(z: Complex64) -> [Complex64; 4] {
    let e = z.exp();
    if z.norm() < 1.0 {
        let mut phi = [Complex64::new(0.0, 0.0); 4];
        phi[0] = e;
        for (k, p) in phi.iter_mut().enumerate().skip(1) {
            // Horner on Σ_{m<M} z^m/(m+k)!
            let mut acc = Complex64::new(0.0, 0.0);
            for m in (0..24).rev() {
                let mut fact = 1.0;
                for j in 1..=(m + k) {
                    fact *= j as f64;
                }
                acc = acc * z + 1.0 / fact;
            }
            *p = acc;
        }
        phi
    } else {
        let p1 = (e - 1.0) / z;
        let p2 = (e - 1.0 - z) / (z * z);
        let p3 = (e - 1.0 - z - 0.5 * z * z) / (z * z * z);
        [e, p1, p2, p3]
    }
}

/// Per-step coefficients of the Krogstad scheme for one value of `hL`.
#[derive(Debug, Clone, Copy)]
struct EtdCoefficients {
    e_half: Complex64,
    phi1_half: Complex64,
    phi2_half: Complex64,
    e_full: Complex64,
    phi1: Complex64,
    phi2: Complex64,
    w_start: Complex64,
    w_mid: Complex64,
    w_end: Complex64,
}

impl EtdCoefficients {
    fn new(l: Complex64, h: f64) -> Self {
        let [eh, p1h, p2h, _] = phi_functions(l * (0.5 * h));
        let [e, p1, p2, p3] = phi_functions(l * h);
        Self {
            e_half: eh,
            phi1_half: p1h * (0.5 * h),
            phi2_half: p2h * h,
            e_full: e,
            phi1: p1 * h,
            phi2: p2 * (2.0 * h),
            w_start: (p1 - 3.0 * p2 + 4.0 * p3) * h,
            w_mid: (2.0 * p2 - 4.0 * p3) * h,
            w_end: (4.0 * p3 - p2) * h,
        }
    }
}

/// Exponential Runge-Kutta integrator of stiff order four (Krogstad's scheme)
/// with step-doubling error control.
#[derive(Debug, Clone, Copy)]
pub struct Etd4 {
    pub tol: Tolerances,
    pub max_step: Option<f64>,
    pub max_steps: usize,
    pub initial_step: f64,
}

struct EtdWorkspace {
    n_u: Vec<Complex64>,
    n_a: Vec<Complex64>,
    n_b: Vec<Complex64>,
    n_c: Vec<Complex64>,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
}

impl EtdWorkspace {
    fn new(n: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n];
        Self {
            n_u: z.clone(),
            n_a: z.clone(),
            n_b: z.clone(),
            n_c: z.clone(),
            a: z.clone(),
            b: z.clone(),
            c: z,
        }
    }
}

/// Distinct values of the diagonal and the index of each entry into them.
struct DiagonalClasses {
    values: Vec<Complex64>,
    class: Vec<u32>,
}

impl DiagonalClasses {
    fn new(diag: &[Complex64]) -> Self {
        let mut lookup: HashMap<(u64, u64), u32> = HashMap::new();
        let mut values = Vec::new();
        let class = diag
            .iter()
            .map(|z| {
                *lookup
                    .entry((z.re.to_bits(), z.im.to_bits()))
                    .or_insert_with(|| {
                        values.push(*z);
                        (values.len() - 1) as u32
                    })
            })
            .collect();
        Self { values, class }
    }

    fn coefficients(&self, h: f64) -> Vec<EtdCoefficients> {
        self.values
            .iter()
            .map(|&l| EtdCoefficients::new(l, h))
            .collect()
    }
}

impl Etd4 {
    pub fn new(tol: Tolerances) -> Self {
        Self {
            tol,
            max_step: None,
            max_steps: 10_000_000,
            initial_step: 1e-2,
        }
    }

    /// One Krogstad step of size `h`; `n_u` must already hold `N(u)`.
    fn step<Sys: SemilinearSystem + ?Sized>(
        sys: &Sys,
        classes: &DiagonalClasses,
        coef: &[EtdCoefficients],
        u: &[Complex64],
        ws: &mut EtdWorkspace,
        out: &mut [Complex64],
    ) {
        let cls = &classes.class;
        for i in 0..u.len() {
            let c = &coef[cls[i] as usize];
            ws.a[i] = c.e_half * u[i] + c.phi1_half * ws.n_u[i];
        }
        sys.remainder(&ws.a, &mut ws.n_a);
        for i in 0..u.len() {
            let c = &coef[cls[i] as usize];
            ws.b[i] = ws.a[i] + c.phi2_half * (ws.n_a[i] - ws.n_u[i]);
        }
        sys.remainder(&ws.b, &mut ws.n_b);
        for i in 0..u.len() {
            let c = &coef[cls[i] as usize];
            ws.c[i] = c.e_full * u[i] + c.phi1 * ws.n_u[i] + c.phi2 * (ws.n_b[i] - ws.n_u[i]);
        }
        sys.remainder(&ws.c, &mut ws.n_c);
        for i in 0..u.len() {
            let c = &coef[cls[i] as usize];
            out[i] = c.e_full * u[i]
                + c.w_start * ws.n_u[i]
                + c.w_mid * (ws.n_a[i] + ws.n_b[i])
                + c.w_end * ws.n_c[i];
        }
    }

    /// Integrate from `(t0, y0)`; the step sequence is clipped to land on every output time.
    pub fn integrate<Sys, F>(
        &self,
        sys: &Sys,
        t0: f64,
        y0: &[Complex64],
        grid: &[f64],
        mut observe: F,
    ) -> Result<Stats>
    where
        Sys: SemilinearSystem + ?Sized,
        F: FnMut(usize, f64, &[Complex64]),
    {
        self.tol.validate()?;
        check_grid(t0, grid)?;
        let diag = sys.linear_diagonal();
        let n = diag.len();
        if y0.len() != n {
            return Err(Error::Configuration(format!(
                "state has length {} but the system has dimension {n}",
                y0.len()
            )));
        }
        if let Some(z) = diag.iter().find(|z| z.re > 0.0) {
            return Err(Error::Configuration(format!(
                "linear part must be dissipative, found {z}"
            )));
        }
        let classes = DiagonalClasses::new(diag);
        let t_end = *grid.last().expect("non-empty grid");
        let span = (t_end - t0).max(f64::MIN_POSITIVE);
        let hmax = self.max_step.unwrap_or(span).min(span);

        let mut stats = Stats::default();
        let mut y = y0.to_vec();
        let mut t = t0;
        let mut next_out = 0;
        while next_out < grid.len() && grid[next_out] == t0 {
            observe(next_out, t0, &y);
            next_out += 1;
        }

        let zero = Complex64::new(0.0, 0.0);
        let mut ws = EtdWorkspace::new(n);
        let mut big = vec![zero; n];
        let mut mid = vec![zero; n];
        let mut fine = vec![zero; n];
        let mut n_y = vec![zero; n];
        let mut h = self.initial_step.min(hmax);
        let mut last_rejected = false;

        while next_out < grid.len() {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::Numerical(format!(
                    "ETD4 exceeded {} steps at t = {t}",
                    self.max_steps
                )));
            }
            let target = grid[next_out];
            let clipped = h >= target - t;
            let h_try = if clipped { target - t } else { h };
            if h_try < MIN_STEP_FRACTION * span.max(t.abs()) {
                return Err(Error::Stiffness { t, h: h_try });
            }

            sys.remainder(&y, &mut n_y);
            let coef_full = classes.coefficients(h_try);
            let coef_half = classes.coefficients(0.5 * h_try);

            ws.n_u.copy_from_slice(&n_y);
            Self::step(sys, &classes, &coef_full, &y, &mut ws, &mut big);
            ws.n_u.copy_from_slice(&n_y);
            Self::step(sys, &classes, &coef_half, &y, &mut ws, &mut mid);
            sys.remainder(&mid, &mut ws.n_u);
            Self::step(sys, &classes, &coef_half, &mid, &mut ws, &mut fine);
            stats.rhs_evaluations += 11;

            for i in 0..n {
                big[i] = (fine[i] - big[i]) * (1.0 / 15.0);
            }
            let e = error_norm(&big, &y, &fine, &self.tol);
            if !e.is_finite() || e > 1.0 {
                stats.rejected += 1;
                let fac = if e.is_finite() {
                    (0.9 * e.powf(-0.2)).max(0.2)
                } else {
                    0.2
                };
                h = h_try * fac;
                last_rejected = true;
                continue;
            }

            t = if clipped { target } else { t + h_try };
            std::mem::swap(&mut y, &mut fine);
            stats.record_step(h_try);
            if clipped {
                observe(next_out, t, &y);
                next_out += 1;
            }

            let mut fac = (0.9 * e.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
            let proposal = (h_try * fac).min(hmax);
            // A step shortened to hit an output time says nothing about the
            // admissible step; keep the previous proposal in that case.
            h = if clipped {
                proposal.max(h.min(hmax))
            } else {
                proposal
            };
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Harmonic;
    impl OdeSystem<f64> for Harmonic {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
    }

    #[test]
    fn dp5_harmonic_oscillator_dense_output() {
        let grid: Vec<f64> = (0..=100).map(|i| 0.37 * i as f64).collect();
        let dp = DormandPrince::new(Tolerances {
            rtol: 1e-11,
            atol: 1e-13,
        });
        let mut max_err: f64 = 0.0;
        let mut seen = 0;
        dp.integrate(&Harmonic, 0.0, &[1.0, 0.0], &grid, |_, t, y| {
            max_err = max_err
                .max((y[0] - t.cos()).abs())
                .max((y[1] + t.sin()).abs());
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, grid.len());
        assert!(max_err < 1e-9, "{max_err}");
    }

    #[test]
    fn first_output_is_initial_state() {
        let dp = DormandPrince::new(Tolerances::default());
        let mut first = None;
        dp.integrate(&Harmonic, 0.0, &[0.3, -0.2], &[0.0, 1.0], |i, _, y| {
            if i == 0 {
                first = Some(y.to_vec());
            }
        })
        .unwrap();
        assert_eq!(first.unwrap(), vec![0.3, -0.2]);
    }

    #[test]
    fn bad_grids_are_rejected() {
        let dp = DormandPrince::new(Tolerances::default());
        assert!(dp
            .integrate(&Harmonic, 0.0, &[1.0, 0.0], &[], |_, _, _| {})
            .is_err());
        assert!(dp
            .integrate(&Harmonic, 0.0, &[1.0, 0.0], &[1.0, 0.5], |_, _, _| {})
            .is_err());
        let bad = DormandPrince::new(Tolerances {
            rtol: 0.0,
            atol: 1e-9,
        });
        assert!(bad
            .integrate(&Harmonic, 0.0, &[1.0, 0.0], &[1.0], |_, _, _| {})
            .is_err());
    }

    #[test]
    fn phi_functions_are_continuous_across_branch() {
        for d in [
            Complex64::new(1.0, 0.0),
            Complex64::new(-0.6, 0.8),
            Complex64::new(0.0, 1.0),
        ] {
            let small = phi_functions(d * (1.0 - 1e-9));
            let large = phi_functions(d * (1.0 + 1e-9));
            for k in 0..4 {
                assert!((small[k] - large[k]).norm() < 1e-8, "k={k}");
            }
        }
        let p = phi_functions(Complex64::new(0.0, 0.0));
        assert!(
            (p[1].re - 1.0).abs() < 1e-16
                && (p[2].re - 0.5).abs() < 1e-16
                && (p[3].re - 1.0 / 6.0).abs() < 1e-16
        );
        let z = Complex64::new(-2.0, 1.0);
        let [e, p1, p2, p3] = phi_functions(z);
        assert!((p1 * z + 1.0 - e).norm() < 1e-15);
        assert!((p2 * z + 1.0 - p1).norm() < 1e-15);
        assert!((p3 * z + 0.5 - p2).norm() < 1e-15);
    }

    /// y' = -k y + c on one component, coupled weakly to a rotating second one.
    struct Stiff {
        diag: Vec<Complex64>,
    }
    impl SemilinearSystem for Stiff {
        fn linear_diagonal(&self) -> &[Complex64] {
            &self.diag
        }
        fn remainder(&self, y: &[Complex64], out: &mut [Complex64]) {
            out[0] = y[1] * 0.3;
            out[1] = y[0] * -0.3;
        }
    }

    #[test]
    fn etd4_matches_matrix_exponential() {
        // y' = M y with M = [[-500, 0.3], [-0.3, i]]; exact solution from the 2x2 eigensystem.
        let sys = Stiff {
            diag: vec![Complex64::new(-500.0, 0.0), Complex64::new(0.0, 1.0)],
        };
        let m = [
            [sys.diag[0], Complex64::new(0.3, 0.0)],
            [Complex64::new(-0.3, 0.0), sys.diag[1]],
        ];
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let disc = (tr * tr - 4.0 * det).sqrt();
        let l1 = (tr + disc) / 2.0;
        let l2 = (tr - disc) / 2.0;
        let exact = |t: f64| {
            // Sylvester: e^{Mt} = (e^{l1 t}(M - l2) - e^{l2 t}(M - l1)) / (l1 - l2), applied to (1, 1)
            let e1 = (l1 * t).exp();
            let e2 = (l2 * t).exp();
            let apply = |l: Complex64| [m[0][0] - l + m[0][1], m[1][0] + m[1][1] - l];
            let a = apply(l2);
            let b = apply(l1);
            [
                (e1 * a[0] - e2 * b[0]) / (l1 - l2),
                (e1 * a[1] - e2 * b[1]) / (l1 - l2),
            ]
        };
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.5).collect();
        let etd = Etd4::new(Tolerances {
            rtol: 1e-8,
            atol: 1e-10,
        });
        let y0 = [Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)];
        let mut worst: f64 = 0.0;
        let stats = etd
            .integrate(&sys, 0.0, &y0, &grid, |_, t, y| {
                let ex = exact(t);
                worst = worst.max((y[0] - ex[0]).norm()).max((y[1] - ex[1]).norm());
            })
            .unwrap();
        assert!(worst < 1e-6, "{worst}");
        // The stiff decay rate 500 must not limit the step.
        assert!(stats.max_step > 0.05, "{stats:?}");
    }
}

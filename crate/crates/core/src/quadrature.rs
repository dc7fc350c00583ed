//! Shared numerical kernels: adaptive Gauss-Kronrod quadrature on finite and
//! semi-infinite domains, and root finding for real cubics.
//!
//! The quadrature is vector valued: an integrand returns `[f64; N]` and all
//! components share the same adaptive subdivision. This keeps the three
//! covariance entries (or the real/imaginary parts of a complex integrand)
//! consistent with each other and halves the number of integrand calls.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::error::{Error, Result};

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];
// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// How the infinite end of a semi-infinite integral is handled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailPolicy {
    /// Map `[p, ∞)` onto `[0, 1)` with `ω = p + s·u/(1-u)`; `s` is the scale.
    Compactify { scale: f64 },
    /// Truncate the domain at a finite `omega_max`; see [`power_law_cutoff`].
    Cutoff { omega_max: f64 },
}

impl Default for TailPolicy {
    fn default() -> Self {
        TailPolicy::Compactify { scale: 1.0 }
    }
}

/// Tolerances and domain hints for the adaptive integrators.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Interior breakpoints (peaks, kinks, scale changes). Must lie strictly
    /// inside the integration domain.
    pub split_points: Vec<f64>,
    pub tail: TailPolicy,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            split_points: Vec::new(),
            tail: TailPolicy::default(),
            max_subdivisions: 4000,
        }
    }
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn with_splits(mut self, points: impl IntoIterator<Item = f64>) -> Self {
        self.split_points = points.into_iter().collect();
        self
    }

    pub fn with_tail(mut self, tail: TailPolicy) -> Self {
        self.tail = tail;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Domain(format!(
                "quadrature tolerances must be positive (rel {}, abs {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.split_points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("split points must be finite".into()));
        }
        Ok(())
    }

    /// Sorted, deduplicated split points, checked to lie strictly inside `(a, b)`.
    fn interior_splits(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        let mut pts = self.split_points.clone();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        if let Some(p) = pts.iter().find(|&&p| p <= a || p >= b) {
            return Err(Error::Domain(format!(
                "split point {p} is not strictly inside ({a}, {b})"
            )));
        }
        Ok(pts)
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<const N: usize> {
    pub value: [f64; N],
    /// Estimated absolute error (max over components).
    pub error: f64,
    pub evaluations: usize,
    pub intervals: usize,
}

impl Estimate<1> {
    pub fn scalar(&self) -> f64 {
        self.value[0]
    }
}

/// Drop points outside the open interval `(a, b)` and any that crowd an endpoint.
pub fn clip_splits(points: impl IntoIterator<Item = f64>, a: f64, b: f64) -> Vec<f64> {
    let guard = 1e-12 * (1.0 + a.abs().max(b.abs().min(1e300)));
    let mut v: Vec<f64> = points
        .into_iter()
        .filter(|p| p.is_finite() && *p > a + guard && *p < b - guard)
        .collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|x, y| (*x - *y).abs() <= guard);
    v
}

/// Truncation point `ω_max` such that `∫_{ω_max}^∞ A/ω^p dω ≤ tol`, for `p > 1`.
pub fn power_law_cutoff(amplitude: f64, exponent: f64, tol: f64) -> f64 {
    assert!(exponent > 1.0, "power-law tail must decay faster than 1/ω");
    (amplitude.abs() / ((exponent - 1.0) * tol)).powf(1.0 / (exponent - 1.0))
}

#[derive(Debug, Clone, Copy)]
struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<const N: usize> Eq for Segment<N> {}
impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on error; ties broken by position so the order is total.
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

fn gk21<const N: usize, F>(f: &F, a: f64, b: f64) -> Segment<N>
where
    F: Fn(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);

    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    let mut res_abs = [0.0; N];
    let mut fv1 = [[0.0; N]; 10];
    let mut fv2 = [[0.0; N]; 10];
    for c in 0..N {
        kron[c] = WGK[10] * fc[c];
        res_abs[c] = (WGK[10] * fc[c]).abs();
    }
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        for c in 0..N {
            let s = f1[c] + f2[c];
            kron[c] += WGK[j] * s;
            res_abs[c] += WGK[j] * (f1[c].abs() + f2[c].abs());
            if j % 2 == 1 {
                gauss[c] += WG[j / 2] * s;
            }
        }
    }

    let mut error: f64 = 0.0;
    let mut value = [0.0; N];
    for c in 0..N {
        let mean = 0.5 * kron[c];
        let mut res_asc = WGK[10] * (fc[c] - mean).abs();
        for j in 0..10 {
            res_asc += WGK[j] * ((fv1[j][c] - mean).abs() + (fv2[j][c] - mean).abs());
        }
        let err = (kron[c] - gauss[c]) * half;
        let e = rescale_error(err, res_abs[c] * half.abs(), res_asc * half.abs());
        error = error.max(e);
        value[c] = kron[c] * half;
    }
    if !value.iter().all(|v| v.is_finite()) {
        error = f64::INFINITY;
    }
    Segment { a, b, value, error }
}

fn norm<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Globally adaptive bisection over an initial partition of `[a, b]`.
fn adaptive<const N: usize, F>(f: &F, edges: &[f64], spec: &QuadratureSpec) -> Result<Estimate<N>>
where
    F: Fn(f64) -> [f64; N],
{
    let mut heap: BinaryHeap<Segment<N>> = edges.windows(2).map(|w| gk21(f, w[0], w[1])).collect();
    let mut evaluations = 21 * heap.len();

    let totals = |heap: &BinaryHeap<Segment<N>>| {
        let mut segs: Vec<&Segment<N>> = heap.iter().collect();
        segs.sort_by(|x, y| x.a.total_cmp(&y.a));
        let mut value = [0.0; N];
        let mut err = 0.0;
        for s in segs {
            for c in 0..N {
                value[c] += s.value[c];
            }
            err += s.error;
        }
        (value, err)
    };

    loop {
        let (value, error) = totals(&heap);
        let target = spec.abs_tol.max(spec.rel_tol * norm(&value));
        if error <= target {
            return Ok(Estimate {
                value,
                error,
                evaluations,
                intervals: heap.len(),
            });
        }
        if heap.len() >= spec.max_subdivisions {
            let worst = heap.peek().expect("non-empty partition");
            return Err(Error::Numerical(format!(
                "quadrature did not converge after {} subintervals: error {:.3e} > target {:.3e}; worst interval [{:.6e}, {:.6e}] with error {:.3e}",
                heap.len(), error, target, worst.a, worst.b, worst.error
            )));
        }
        let worst = heap.pop().expect("non-empty partition");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::Numerical(format!(
                "quadrature hit the round-off limit on [{:.6e}, {:.6e}] (error {:.3e}, target {:.3e})",
                worst.a, worst.b, worst.error, target
            )));
        }
        heap.push(gk21(f, worst.a, mid));
        heap.push(gk21(f, mid, worst.b));
        evaluations += 42;
    }
}

/// Adaptive integral of a vector-valued `f` over the finite interval `[a, b]`.
pub fn integrate_interval<const N: usize, F>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate<N>>
where
    F: Fn(f64) -> [f64; N],
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Domain(format!("invalid interval [{a}, {b}]")));
    }
    let mut edges = vec![a];
    edges.extend(spec.interior_splits(a, b)?);
    edges.push(b);
    adaptive(&f, &edges, spec)
}

/// Adaptive integral of a vector-valued `f` over `(0, ∞)`.
///
/// The finite part up to the last split point is integrated directly; the
/// remainder follows `spec.tail`.
pub fn integrate_semi_infinite<const N: usize, F>(
    f: F,
    spec: &QuadratureSpec,
) -> Result<Estimate<N>>
where
    F: Fn(f64) -> [f64; N],
{
    spec.validate()?;
    match spec.tail {
        TailPolicy::Cutoff { omega_max } => {
            if !(omega_max.is_finite() && omega_max > 0.0) {
                return Err(Error::Domain(format!("invalid cutoff {omega_max}")));
            }
            integrate_interval(f, 0.0, omega_max, spec)
        }
        TailPolicy::Compactify { scale } => {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::Domain(format!(
                    "invalid compactification scale {scale}"
                )));
            }
            let splits = spec.interior_splits(0.0, f64::INFINITY)?;
            let start = splits.last().copied().unwrap_or(0.0);
            let s = scale.max(start);
            // Finite pieces in ω and the tail in u live on one partition of a
            // combined coordinate: x ∈ [0, start] is ω itself, x ∈ [start, start+1)
            // is u.
            let g = |x: f64| -> [f64; N] {
                if x <= start {
                    f(x)
                } else {
                    let u = x - start;
                    let one_minus = 1.0 - u;
                    let w = start + s * u / one_minus;
                    let jac = s / (one_minus * one_minus);
                    let mut v = f(w);
                    for c in v.iter_mut() {
                        *c *= jac;
                    }
                    v
                }
            };
            let mut edges = vec![0.0];
            edges.extend(splits.iter().copied());
            // A few fixed cuts in u resolve the algebraic tail quickly.
            for u in [0.5, 0.9, 0.99] {
                edges.push(start + u);
            }
            edges.push(start + 1.0);
            adaptive(&g, &edges, spec)
        }
    }
}

/// Scalar convenience wrapper around [`integrate_semi_infinite`].
pub fn integrate_semi_infinite_scalar<F: Fn(f64) -> f64>(
    f: F,
    spec: &QuadratureSpec,
) -> Result<Estimate<1>> {
    integrate_semi_infinite(|x| [f(x)], spec)
}

/// Scalar convenience wrapper around [`integrate_interval`].
pub fn integrate_interval_scalar<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate<1>> {
    integrate_interval(|x| [f(x)], a, b, spec)
}

/// Roots of a real cubic `a3 s³ + a2 s² + a1 s + a0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicRoots {
    /// Sorted by real part, then imaginary part.
    pub roots: [Complex64; 3],
    /// Two or more roots coincide to within the relative resolution of the solver.
    pub degenerate: bool,
}

/// Relative separation below which two roots are reported as coincident.
pub const DEGENERACY_TOL: f64 = 1e-5;

fn horner(c: &[f64; 4], s: Complex64) -> (Complex64, Complex64) {
    // c = [a3, a2, a1, a0]
    let mut p = Complex64::new(c[0], 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &a in &c[1..] {
        dp = dp * s + p;
        p = p * s + a;
    }
    (p, dp)
}

/// Back-substitution residual scale used by the root checks: `max |a_k|`.
pub fn coefficient_scale(c: &[f64; 4]) -> f64 {
    c.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Evaluate the cubic at a complex point.
pub fn eval_cubic(c: &[f64; 4], s: Complex64) -> Complex64 {
    horner(c, s).0
}

/// Roots of a real cubic from the eigenvalues of its companion matrix,
/// polished by Newton iteration.
///
/// Real input guarantees real roots or conjugate pairs in the output.
pub fn cubic_roots(coefficients: [f64; 4]) -> Result<CubicRoots> {
    let [a3, a2, a1, a0] = coefficients;
    if a3 == 0.0 || !coefficients.iter().all(|c| c.is_finite()) {
        return Err(Error::Domain(format!(
            "cubic needs a finite, nonzero leading coefficient: {coefficients:?}"
        )));
    }
    let (p, q, r) = (a2 / a3, a1 / a3, a0 / a3);
    let monic = [1.0, p, q, r];
    #[rustfmt::skip]
    let companion = Matrix3::new(
        -p,  -q,  -r,
        1.0, 0.0, 0.0,
        0.0, 1.0, 0.0,
    );
    let eig = companion.complex_eigenvalues();
    let mut roots = [eig[0], eig[1], eig[2]];

    for s in roots.iter_mut() {
        polish(&monic, s);
    }

    // Enforce the structure of a real polynomial: one root is always real.
    roots.sort_by(|x, y| x.im.abs().total_cmp(&y.im.abs()));
    let scale = roots.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
    roots[0].im = 0.0;
    polish(&monic, &mut roots[0]);
    roots[0].im = 0.0;
    let (z1, z2) = (roots[1], roots[2]);
    if z1.im.abs() <= 1e-10 * scale && z2.im.abs() <= 1e-10 * scale {
        for z in roots[1..].iter_mut() {
            z.im = 0.0;
            polish(&monic, z);
            z.im = 0.0;
        }
    } else {
        // Conjugate pair: average the two estimates.
        let upper = if z1.im >= z2.im { z1 } else { z2 };
        let lower = if z1.im >= z2.im { z2 } else { z1 };
        let mut z = 0.5 * (upper + lower.conj());
        z.im = z.im.abs();
        polish(&monic, &mut z);
        roots[1] = z;
        roots[2] = z.conj();
    }

    roots.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let mut degenerate = false;
    for i in 0..3 {
        for j in (i + 1)..3 {
            if (roots[i] - roots[j]).norm() <= DEGENERACY_TOL * scale {
                degenerate = true;
            }
        }
    }
    Ok(CubicRoots { roots, degenerate })
}

fn polish(c: &[f64; 4], s: &mut Complex64) {
    let mut best = horner(c, *s).0.norm();
    for _ in 0..8 {
        let (p, dp) = horner(c, *s);
        if dp.norm() == 0.0 || p.norm() == 0.0 {
            return;
        }
        let next = *s - p / dp;
        let r = horner(c, next).0.norm();
        if r < best {
            *s = next;
            best = r;
        } else {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn exponential_on_half_line() {
        let est =
            integrate_semi_infinite_scalar(|x| (-x).exp(), &QuadratureSpec::default()).unwrap();
        assert!((est.scalar() - 1.0).abs() < 1e-12, "{est:?}");
    }

    #[test]
    fn lorentz_drude_over_omega_reproduces_counterterm() {
        let (gamma, lambda) = (0.1, 10.0);
        let spec = QuadratureSpec::new(1e-12, 1e-16).with_splits([lambda]);
        let est = integrate_semi_infinite_scalar(
            |w| gamma * lambda * lambda / (lambda * lambda + w * w),
            &spec,
        )
        .unwrap();
        assert!((2.0 / PI * est.scalar() - gamma * lambda).abs() < 1e-12);
    }

    #[test]
    fn narrow_lorentzian_with_split_at_peak() {
        // ∫₀^∞ (w/π)/((x-1)² + w²) dx = 1/2 + atan(1/w)/π
        let w: f64 = 1e-3;
        let exact = 0.5 + (1.0_f64 / w).atan() / PI;
        let spec = QuadratureSpec::new(1e-10, 1e-15).with_splits([1.0]);
        let est = integrate_semi_infinite_scalar(|x| w / PI / ((x - 1.0).powi(2) + w * w), &spec)
            .unwrap();
        assert!(
            ((est.scalar() - exact) / exact).abs() < 1e-10,
            "{} vs {exact}",
            est.scalar()
        );
    }

    #[test]
    fn cutoff_policy_truncates() {
        let spec =
            QuadratureSpec::new(1e-12, 1e-15).with_tail(TailPolicy::Cutoff { omega_max: 2.0 });
        let est = integrate_semi_infinite_scalar(|x| x, &spec).unwrap();
        assert!((est.scalar() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn power_law_cutoff_bounds_tail() {
        let w = power_law_cutoff(3.0, 2.0, 1e-6);
        assert!((3.0 / w - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn split_points_outside_domain_are_rejected() {
        let spec = QuadratureSpec::default().with_splits([3.0]);
        assert!(matches!(
            integrate_interval_scalar(|x| x, 0.0, 1.0, &spec),
            Err(Error::Domain(_))
        ));
        let bad = QuadratureSpec::new(0.0, 1e-10);
        assert!(integrate_interval_scalar(|x| x, 0.0, 1.0, &bad).is_err());
    }

    #[test]
    fn nonconvergence_reports_diagnostics() {
        let mut spec = QuadratureSpec::new(1e-14, 1e-300);
        spec.max_subdivisions = 3;
        let err = integrate_interval_scalar(|x| (1.0 / x).sin(), 1e-6, 1.0, &spec).unwrap_err();
        assert!(matches!(err, Error::Numerical(ref m) if m.contains("subintervals")));
    }

    #[test]
    fn cube_roots_of_unity() {
        let r = cubic_roots([1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(!r.degenerate);
        let expected = [
            Complex64::new(-0.5, -(3f64).sqrt() / 2.0),
            Complex64::new(-0.5, (3f64).sqrt() / 2.0),
            Complex64::new(1.0, 0.0),
        ];
        for (z, e) in r.roots.iter().zip(expected) {
            assert!((z - e).norm() < 1e-14, "{z} vs {e}");
        }
    }

    #[test]
    fn triple_root_is_flagged() {
        let r = cubic_roots([1.0, 3.0, 3.0, 1.0]).unwrap();
        assert!(r.degenerate);
        for z in r.roots {
            assert!((z + 1.0).norm() < 1e-4);
        }
    }

    #[test]
    fn oscillator_characteristic_cubic_residual() {
        let (gamma, lambda, w0) = (0.001, 10.0, 1.0);
        let wr2 = w0 * w0 + gamma * lambda;
        let c = [1.0, lambda, wr2, wr2 * lambda - gamma * lambda * lambda];
        let r = cubic_roots(c).unwrap();
        for z in r.roots {
            assert!(eval_cubic(&c, z).norm() <= 1e-12 * coefficient_scale(&c));
        }
        assert_eq!(r.roots[1], r.roots[2].conj());
    }

    #[test]
    fn zero_leading_coefficient_is_rejected() {
        assert!(cubic_roots([0.0, 1.0, 2.0, 3.0]).is_err());
    }
}

//! Hierarchical equations of motion for the spin-boson model
//! `H = (ε/2)σ_z + σ_x ⊗ Σ_μ g_μ x_μ + H_B` with a Lorentz-Drude bath.
//!
//! With `C(t) = Σ_k c_k e^{−ν_k t}` (see [`BathSpec::matsubara_expansion`])
//! the auxiliary density operators obey
//!
//! ```text
//! ρ̇_n = −i[H_S, ρ_n] − (Σ_k n_k ν_k) ρ_n − i Σ_k [σ_x, ρ_{n+e_k}]
//!       − i Σ_k n_k (c_k σ_x ρ_{n−e_k} − c̄_k ρ_{n−e_k} σ_x) − Δ[σ_x, [σ_x, ρ_n]]
//! ```
//!
//! truncated at `|n| ≤ N_C`; ρ_0 is the reduced state of the qubit and Δ
//! accounts for the Matsubara terms beyond `N_k`.

mod hierarchy;
mod rhs;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{
    excited_population, validate_density_matrix, von_neumann_entropy, DensityMatrix,
};
use crate::ode::{DormandPrince, Etd4, Stats, Tolerances};
use crate::spectral::{BathSpec, ExponentialTerm};
use crate::LogBase;

pub use hierarchy::{
    build_hierarchy, hierarchy_size, Hierarchy, HierarchyIndex, Link, MAX_HIERARCHY_SIZE,
};
pub use rhs::HeomSystem;

/// Tolerance on hermiticity, trace and positivity of the reduced state at every output.
pub const STATE_TOL: f64 = 1e-8;

/// Two-level impurity `H_S = (ε/2)σ_z` coupled through `σ_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitSpec {
    pub epsilon: f64,
    pub bath: BathSpec,
}

impl QubitSpec {
    pub fn new(epsilon: f64, bath: BathSpec) -> Result<Self> {
        let spec = Self { epsilon, bath };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Domain(format!(
                "level splitting must be > 0, got {}",
                self.epsilon
            )));
        }
        self.bath.validate()
    }
}

/// `|1⟩⟨1|`, the excited state.
pub fn excited_state() -> DensityMatrix {
    let z = Complex64::new(0.0, 0.0);
    [[Complex64::new(1.0, 0.0), z], [z, z]]
}

/// `|0⟩⟨0|`, the ground state.
pub fn ground_state() -> DensityMatrix {
    let z = Complex64::new(0.0, 0.0);
    [[z, z], [z, Complex64::new(1.0, 0.0)]]
}

/// Time integrator used for the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Fourth-order exponential Runge-Kutta; the diagonal part is exact.
    #[default]
    Etd4,
    /// Explicit Dormand-Prince 5(4).
    DormandPrince,
}

/// Markovian closure `−Δ[σ_x, [σ_x, ρ]]` for the discarded Matsubara terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Terminator {
    Off,
    /// Δ is the discarded weight at zero frequency, `Σ_{k>N} c_k/ν_k`.
    ZeroFrequency,
    /// Δ is the discarded weight of the noise spectrum at the qubit splitting,
    /// `Σ_{k>N} c_k ν_k/(ν_k² + ε²)`. σ_x only drives transitions at ±ε, so this
    /// gives the tail's contribution to both rates exactly; the zero-frequency
    /// weight overstates the small upward rate.
    #[default]
    Resonant,
}

/// Truncation and solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeomConfig {
    pub n_k: usize,
    pub n_c: usize,
    pub scaled: bool,
    pub terminator: Terminator,
    pub tolerances: Tolerances,
    pub method: Method,
    pub max_step: Option<f64>,
}

impl Default for HeomConfig {
    fn default() -> Self {
        Self {
            n_k: 30,
            n_c: 2,
            scaled: true,
            terminator: Terminator::default(),
            tolerances: Tolerances::default(),
            method: Method::default(),
            max_step: None,
        }
    }
}

/// All members of the hierarchy at one instant.
#[derive(Debug, Clone)]
pub struct AdoHierarchy {
    pub hierarchy: Hierarchy,
    /// Row-major 2×2 blocks, one per member, in hierarchy order.
    pub data: Vec<Complex64>,
    pub scaled: bool,
}

impl AdoHierarchy {
    /// Factorized initial condition: `ρ_0 = rho`, all other members zero.
    pub fn new(hierarchy: Hierarchy, rho: &DensityMatrix, scaled: bool) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); 4 * hierarchy.len()];
        data[..4].copy_from_slice(&[rho[0][0], rho[0][1], rho[1][0], rho[1][1]]);
        Self {
            hierarchy,
            data,
            scaled,
        }
    }

    pub fn root(&self) -> DensityMatrix {
        block(&self.data, 0)
    }

    pub fn member(&self, i: usize) -> DensityMatrix {
        block(&self.data, i)
    }
}

fn block(data: &[Complex64], i: usize) -> DensityMatrix {
    let b = &data[4 * i..4 * i + 4];
    [[b[0], b[1]], [b[2], b[3]]]
}

/// Reduced states on a time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub stats: Stats,
}

impl Trajectory {
    pub fn entropy(&self, base: LogBase) -> Result<Vec<f64>> {
        self.states
            .iter()
            .map(|r| von_neumann_entropy(r, base))
            .collect()
    }

    pub fn excited_population(&self) -> Vec<f64> {
        self.states.iter().map(excited_population).collect()
    }

    /// `|ρ₀₁(t)|`.
    pub fn coherence(&self) -> Vec<f64> {
        self.states.iter().map(|r| r[0][1].norm()).collect()
    }
}

/// Exponential terms and terminator strength for a configuration.
pub fn bath_terms(spec: &QubitSpec, config: &HeomConfig) -> Result<(Vec<ExponentialTerm>, f64)> {
    let terms = spec.bath.matsubara_expansion(config.n_k)?;
    let delta = match config.terminator {
        Terminator::Off => 0.0,
        Terminator::ZeroFrequency => spec.bath.terminator_strength(config.n_k)?,
        Terminator::Resonant => spec.bath.tail_spectrum(config.n_k, spec.epsilon)?,
    };
    Ok((terms, delta))
}

/// Time derivative of all members of `state` (the generator written out in the module docs).
pub fn heom_rhs(
    state: &AdoHierarchy,
    spec: &QubitSpec,
    terms: &[ExponentialTerm],
    terminator: Option<f64>,
) -> Result<Vec<Complex64>> {
    let sys = HeomSystem::new(
        spec,
        &state.hierarchy,
        terms,
        terminator.unwrap_or(0.0),
        state.scaled,
    )?;
    let mut out = vec![Complex64::new(0.0, 0.0); sys.dim()];
    sys.derivative(&state.data, &mut out);
    Ok(out)
}

/// Propagate `rho0` (bath in equilibrium, all auxiliary members zero) and
/// record the reduced state at each time of `times` (which must start at or after 0).
pub fn integrate(
    spec: &QubitSpec,
    config: &HeomConfig,
    rho0: &DensityMatrix,
    times: &[f64],
) -> Result<Trajectory> {
    spec.validate()?;
    validate_density_matrix(rho0, STATE_TOL)?;
    if !(spec.bath.temperature > 0.0) {
        return Err(Error::Unsupported(
            "the hierarchy solver needs T > 0".into(),
        ));
    }
    let hierarchy = build_hierarchy(config.n_k, config.n_c)?;
    let (terms, delta) = bath_terms(spec, config)?;
    let start = AdoHierarchy::new(hierarchy, rho0, config.scaled);
    let sys = HeomSystem::new(spec, &start.hierarchy, &terms, delta, config.scaled)?;

    let mut states = vec![[[Complex64::new(0.0, 0.0); 2]; 2]; times.len()];
    let observe = |i: usize, _t: f64, y: &[Complex64]| states[i] = block(y, 0);
    let stats = match config.method {
        Method::Etd4 => {
            let mut etd = Etd4::new(config.tolerances);
            etd.max_step = config.max_step;
            etd.integrate(&sys, 0.0, &start.data, times, observe)?
        }
        Method::DormandPrince => {
            let mut dp = DormandPrince::new(config.tolerances);
            dp.max_step = config.max_step;
            dp.integrate(&sys, 0.0, &start.data, times, observe)?
        }
    };
    log::debug!(
        "HEOM ({}, {}) with {} members: {stats:?}",
        config.n_k,
        config.n_c,
        sys.hierarchy().len()
    );
    for (t, rho) in times.iter().zip(&states) {
        validate_density_matrix(rho, STATE_TOL).map_err(|e| {
            Error::Numerical(format!("reduced state at t = {t} is unphysical: {e}"))
        })?;
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        stats,
    })
}

/// Largest pointwise deviation of S and P1 between two trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Deviation {
    pub n_k: usize,
    pub n_c: usize,
    pub entropy: f64,
    pub population: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub more_terms: Deviation,
    pub deeper: Deviation,
    pub threshold: f64,
    pub converged: bool,
}

/// Default threshold of [`convergence_check`].
pub const CONVERGENCE_THRESHOLD: f64 = 1e-4;

fn deviation(base: &Trajectory, other: &Trajectory, n_k: usize, n_c: usize) -> Result<Deviation> {
    let sb = base.entropy(LogBase::Natural)?;
    let so = other.entropy(LogBase::Natural)?;
    let pb = base.excited_population();
    let po = other.excited_population();
    let max_diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    Ok(Deviation {
        n_k,
        n_c,
        entropy: max_diff(&sb, &so),
        population: max_diff(&pb, &po),
    })
}

/// Recompute with `(N_k + 10, N_C)` and `(N_k, N_C + 1)` and compare with `baseline`.
pub fn convergence_check(
    spec: &QubitSpec,
    config: &HeomConfig,
    rho0: &DensityMatrix,
    baseline: &Trajectory,
    threshold: f64,
) -> Result<ConvergenceReport> {
    let more = HeomConfig {
        n_k: config.n_k + 10,
        ..*config
    };
    let deeper = HeomConfig {
        n_c: config.n_c + 1,
        ..*config
    };
    let (a, b) = rayon::join(
        || integrate(spec, &more, rho0, &baseline.times),
        || integrate(spec, &deeper, rho0, &baseline.times),
    );
    let more_terms = deviation(baseline, &a?, more.n_k, more.n_c)?;
    let deeper = deviation(baseline, &b?, deeper.n_k, deeper.n_c)?;
    let converged = more_terms
        .entropy
        .max(more_terms.population)
        .max(deeper.entropy)
        .max(deeper.population)
        < threshold;
    Ok(ConvergenceReport {
        more_terms,
        deeper,
        threshold,
        converged,
    })
}

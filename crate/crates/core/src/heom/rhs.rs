use num_complex::Complex64;
use rayon::prelude::*;

use super::hierarchy::Hierarchy;
use super::QubitSpec;
use crate::error::{Error, Result};
use crate::ode::{OdeSystem, SemilinearSystem};
use crate::spectral::ExponentialTerm;

/// Above this many members the coupling terms are evaluated in parallel.
const PARALLEL_THRESHOLD: usize = 4096;

/// Generator of the hierarchy for one qubit, split as `L∘ρ + N(ρ)` with `L`
/// diagonal (free rotation, level damping, diagonal part of the terminator).
///
/// The state is the concatenation of all members, each a row-major 2×2 block.
#[derive(Debug, Clone)]
pub struct HeomSystem<'h> {
    hierarchy: &'h Hierarchy,
    coefficients: Vec<Complex64>,
    terminator: f64,
    diagonal: Vec<Complex64>,
    /// Coupling prefactors for each entry of `hierarchy.raise(i)` / `lower(i)`.
    up: Vec<f64>,
    down: Vec<f64>,
    up_start: Vec<usize>,
    down_start: Vec<usize>,
}

impl<'h> HeomSystem<'h> {
    /// `terminator` is Δ of `−Δ[σ_x, [σ_x, ρ]]` (0 to disable).
    ///
    /// With `scaled = true` each member is stored as
    /// `ρ̃_n = ρ_n / Π_k √(n_k! |c_k|^{n_k})`, which keeps all members of order one.
    pub fn new(
        spec: &QubitSpec,
        hierarchy: &'h Hierarchy,
        terms: &[ExponentialTerm],
        terminator: f64,
        scaled: bool,
    ) -> Result<Self> {
        if terms.len() != hierarchy.n_terms() {
            return Err(Error::Configuration(format!(
                "hierarchy built for {} terms but {} exponential terms supplied",
                hierarchy.n_terms(),
                terms.len()
            )));
        }
        if !terminator.is_finite() {
            return Err(Error::Domain(format!(
                "terminator strength must be finite, got {terminator}"
            )));
        }
        if terminator < 0.0 {
            // Happens when retained Matsubara frequencies stay below Λ.
            log::warn!("negative terminator strength {terminator:e}; the closure no longer preserves positivity");
        }
        let eps = spec.epsilon;
        let scale: Vec<f64> = terms
            .iter()
            .map(|t| {
                if scaled && t.coefficient.norm() > 0.0 {
                    t.coefficient.norm()
                } else {
                    1.0
                }
            })
            .collect();

        let n = hierarchy.len();
        let mut diagonal = Vec::with_capacity(4 * n);
        let mut up = Vec::new();
        let mut down = Vec::new();
        let mut up_start = Vec::with_capacity(n + 1);
        let mut down_start = Vec::with_capacity(n + 1);
        for (i, idx) in hierarchy.indices().iter().enumerate() {
            let damping: f64 = idx
                .counts
                .iter()
                .zip(terms)
                .map(|(&c, t)| c as f64 * t.rate)
                .sum();
            // −i[H_S, ρ]_{ab} = −i(E_a − E_b)ρ_{ab} with E = (ε/2, −ε/2).
            for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let ea = if a == 0 { 0.5 * eps } else { -0.5 * eps };
                let eb = if b == 0 { 0.5 * eps } else { -0.5 * eps };
                diagonal.push(Complex64::new(-damping - 2.0 * terminator, -(ea - eb)));
            }
            up_start.push(up.len());
            for link in hierarchy.raise(i) {
                let k = link.term as usize;
                let nk = idx.counts[k] as f64;
                up.push(if scaled {
                    ((nk + 1.0) * scale[k]).sqrt()
                } else {
                    1.0
                });
            }
            down_start.push(down.len());
            for link in hierarchy.lower(i) {
                let k = link.term as usize;
                let nk = idx.counts[k] as f64;
                down.push(if scaled { (nk / scale[k]).sqrt() } else { nk });
            }
        }
        up_start.push(up.len());
        down_start.push(down.len());

        Ok(Self {
            hierarchy,
            coefficients: terms.iter().map(|t| t.coefficient).collect(),
            terminator,
            diagonal,
            up,
            down,
            up_start,
            down_start,
        })
    }

    pub fn dim(&self) -> usize {
        4 * self.hierarchy.len()
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        self.hierarchy
    }

    fn member_remainder(&self, i: usize, y: &[Complex64], out: &mut [Complex64]) {
        let zero = Complex64::new(0.0, 0.0);
        let mut acc = [zero; 4];
        let mi = -Complex64::i();
        for (link, &f) in self
            .hierarchy
            .raise(i)
            .iter()
            .zip(&self.up[self.up_start[i]..self.up_start[i + 1]])
        {
            let r = &y[4 * link.target as usize..4 * link.target as usize + 4];
            // [σx, ρ] = σxρ − ρσx; σx swaps rows on the left and columns on the right.
            let w = mi * f;
            acc[0] += w * (r[2] - r[1]);
            acc[1] += w * (r[3] - r[0]);
            acc[2] += w * (r[0] - r[3]);
            acc[3] += w * (r[1] - r[2]);
        }
        for (link, &f) in self
            .hierarchy
            .lower(i)
            .iter()
            .zip(&self.down[self.down_start[i]..self.down_start[i + 1]])
        {
            let r = &y[4 * link.target as usize..4 * link.target as usize + 4];
            let c = self.coefficients[link.term as usize];
            let cc = c.conj();
            // −i f (c σxρ − c̄ ρσx)
            let w = mi * f;
            acc[0] += w * (c * r[2] - cc * r[1]);
            acc[1] += w * (c * r[3] - cc * r[0]);
            acc[2] += w * (c * r[0] - cc * r[3]);
            acc[3] += w * (c * r[1] - cc * r[2]);
        }
        if self.terminator != 0.0 {
            // Off-diagonal part of −Δ[σx,[σx,ρ]] = −2Δ(ρ − σxρσx).
            let r = &y[4 * i..4 * i + 4];
            let d = 2.0 * self.terminator;
            acc[0] += d * r[3];
            acc[1] += d * r[2];
            acc[2] += d * r[1];
            acc[3] += d * r[0];
        }
        out.copy_from_slice(&acc);
    }

    fn remainder_into(&self, y: &[Complex64], out: &mut [Complex64]) {
        if self.hierarchy.len() >= PARALLEL_THRESHOLD {
            out.par_chunks_mut(4)
                .enumerate()
                .for_each(|(i, o)| self.member_remainder(i, y, o));
        } else {
            for (i, o) in out.chunks_mut(4).enumerate() {
                self.member_remainder(i, y, o);
            }
        }
    }

    /// Full time derivative of all members.
    pub fn derivative(&self, y: &[Complex64], dy: &mut [Complex64]) {
        self.remainder_into(y, dy);
        for (d, (l, v)) in dy.iter_mut().zip(self.diagonal.iter().zip(y)) {
            *d += l * v;
        }
    }
}

impl SemilinearSystem for HeomSystem<'_> {
    fn linear_diagonal(&self) -> &[Complex64] {
        &self.diagonal
    }

    fn remainder(&self, y: &[Complex64], out: &mut [Complex64]) {
        self.remainder_into(y, out);
    }
}

impl OdeSystem<Complex64> for HeomSystem<'_> {
    fn dim(&self) -> usize {
        HeomSystem::dim(self)
    }

    fn rhs(&self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        self.derivative(y, dy);
    }
}

use pagecurve::heom::{
    convergence_check, excited_state, ground_state, integrate, HeomConfig, Method, QubitSpec,
    Terminator, CONVERGENCE_THRESHOLD,
};
use pagecurve::observables::{excited_population, gibbs_state, validate_density_matrix};
use pagecurve::ode::Tolerances;
use pagecurve::spectral::{coth_half, BathSpec};
use pagecurve::LogBase;

fn qubit(gamma: f64, temperature: f64) -> QubitSpec {
    QubitSpec::new(1.0, BathSpec::new(gamma, 10.0, temperature).unwrap()).unwrap()
}

fn grid(end: usize, step: f64) -> Vec<f64> {
    (0..=end).map(|i| i as f64 * step).collect()
}

/// Least-squares slope of `ln(P1 − P_eq)` on the given samples.
fn decay_rate(times: &[f64], p1: &[f64], p_eq: f64) -> f64 {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(p1)
        .map(|(&t, &p)| (t, (p - p_eq).ln()))
        .collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |a, p| {
        (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2))
    });
    -num / den
}

#[test]
fn initial_decay_follows_golden_rule() {
    for (gamma, temp) in [(0.001, 0.2), (0.002, 0.3)] {
        let spec = qubit(gamma, temp);
        let times = grid(200, 1.0);
        let traj = integrate(&spec, &HeomConfig::default(), &excited_state(), &times).unwrap();
        let p_eq = excited_population(&gibbs_state(&spec).unwrap());
        let fitted = decay_rate(&times[20..], &traj.excited_population()[20..], p_eq);
        // Γ↓ + Γ↑ = 2J(ε)(2n̄ + 1) = 2J(ε)coth(ε/2T)
        let j = spec.bath.spectral_density(spec.epsilon).unwrap();
        let golden = 2.0 * j * coth_half(spec.epsilon, temp);
        assert!(
            (fitted / golden - 1.0).abs() < 0.1,
            "γ={gamma}: fitted {fitted:e}, golden rule {golden:e}"
        );
        // The emission rate alone, 2J(n̄+1), agrees just as well at these temperatures.
        let nbar = 1.0 / (spec.epsilon / temp).exp_m1();
        assert!((fitted / (2.0 * j * (nbar + 1.0)) - 1.0).abs() < 0.1);
    }
}

#[test]
fn root_state_stays_physical_and_diagonal() {
    let spec = qubit(0.001, 0.2);
    let traj = integrate(
        &spec,
        &HeomConfig::default(),
        &excited_state(),
        &grid(1000, 2.0),
    )
    .unwrap();
    for rho in &traj.states {
        assert!((rho[0][1] - rho[1][0].conj()).norm() <= 1e-10);
        assert!(((rho[0][0] + rho[1][1]).re - 1.0).abs() <= 1e-10);
        assert!(rho[0][0].im.abs() <= 1e-10 && rho[1][1].im.abs() <= 1e-10);
        assert!(rho[0][1].norm() <= 1e-8);
        validate_density_matrix(rho, 1e-8).unwrap();
    }
    for s in traj.entropy(LogBase::Natural).unwrap() {
        assert!((0.0..=2f64.ln()).contains(&s));
    }
}

#[test]
fn coherent_start_dephases_without_leaving_the_state_space() {
    let spec = qubit(0.002, 0.3);
    let h = pagecurve::Complex64::new(0.5, 0.0);
    let plus = [[h, h], [h, h]];
    let traj = integrate(&spec, &HeomConfig::default(), &plus, &grid(400, 1.0)).unwrap();
    let coh = traj.coherence();
    assert!(coh[400] < coh[0] && coh[400] > 0.0);
    for rho in &traj.states {
        validate_density_matrix(rho, 1e-8).unwrap();
    }
}

#[test]
fn halving_rtol_changes_entropy_by_less_than_1e_6() {
    let spec = qubit(0.001, 0.2);
    let times = grid(1500, 2.0);
    let base = HeomConfig::default();
    let tight = HeomConfig {
        tolerances: Tolerances {
            rtol: 0.5 * base.tolerances.rtol,
            ..base.tolerances
        },
        ..base
    };
    let a = integrate(&spec, &base, &excited_state(), &times)
        .unwrap()
        .entropy(LogBase::Natural)
        .unwrap();
    let b = integrate(&spec, &tight, &excited_state(), &times)
        .unwrap()
        .entropy(LogBase::Natural)
        .unwrap();
    let worst = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn integrators_and_scalings_agree() {
    let spec = qubit(0.001, 0.2);
    let times = grid(100, 3.0);
    let reference = integrate(&spec, &HeomConfig::default(), &excited_state(), &times).unwrap();
    let variants = [
        HeomConfig {
            method: Method::DormandPrince,
            ..HeomConfig::default()
        },
        HeomConfig {
            scaled: false,
            ..HeomConfig::default()
        },
    ];
    for cfg in variants {
        let other = integrate(&spec, &cfg, &excited_state(), &times).unwrap();
        for (r, o) in reference.states.iter().zip(&other.states) {
            assert!((r[0][0] - o[0][0]).norm() < 1e-7, "{cfg:?}");
        }
    }
}

#[test]
fn steady_population_matches_mean_force_state() {
    let spec = qubit(0.001, 0.2);
    let times = grid(80, 100.0);
    let traj = integrate(&spec, &HeomConfig::default(), &excited_state(), &times).unwrap();
    let p_end = *traj.excited_population().last().unwrap();
    // Second-order mean-force state: ln(P1/P0) = −βε + ∫₀^β (β−s)K(s)(e^{εs} − e^{−εs}) ds with
    // K(s) = (1/π)∫ J(ω)(e^{−ωs} + e^{−ω(β−s)})/(1 − e^{−βω}) dω, evaluated by
    // 30-digit adaptive quadrature.
    let p_mean_force = 0.007_304_445_596_146;
    assert!((p_end - p_mean_force).abs() < 2e-5, "{p_end}");
    let p_gibbs = excited_population(&gibbs_state(&spec).unwrap());
    assert!(p_end > p_gibbs && (p_end - p_gibbs) / p_gibbs < 0.15);
}

#[test]
fn zero_frequency_terminator_overshoots_the_upward_rate() {
    let spec = qubit(0.001, 0.2);
    let times = grid(80, 100.0);
    let run = |terminator| {
        let cfg = HeomConfig {
            terminator,
            ..HeomConfig::default()
        };
        *integrate(&spec, &cfg, &excited_state(), &times)
            .unwrap()
            .excited_population()
            .last()
            .unwrap()
    };
    let resonant = run(Terminator::Resonant);
    let zero = run(Terminator::ZeroFrequency);
    assert!(zero > resonant + 1e-4, "{zero} vs {resonant}");
}

#[test]
fn ground_state_start_has_no_intermediate_peak() {
    let spec = qubit(0.001, 0.2);
    let traj = integrate(
        &spec,
        &HeomConfig::default(),
        &ground_state(),
        &grid(80, 100.0),
    )
    .unwrap();
    let s = traj.entropy(LogBase::Natural).unwrap();
    let last = *s.last().unwrap();
    assert!(
        s.iter().all(|&v| v <= last + 1e-6),
        "max {}",
        s.iter().cloned().fold(0.0, f64::max)
    );
}

#[test]
fn uncoupled_hierarchy_is_trivially_converged() {
    let spec = qubit(0.0, 0.2);
    let times = grid(50, 1.0);
    let cfg = HeomConfig {
        n_k: 3,
        ..HeomConfig::default()
    };
    let base = integrate(&spec, &cfg, &excited_state(), &times).unwrap();
    let report =
        convergence_check(&spec, &cfg, &excited_state(), &base, CONVERGENCE_THRESHOLD).unwrap();
    assert!(report.converged);
    assert_eq!(report.more_terms.entropy, 0.0);
    assert_eq!(report.deeper.population, 0.0);
}

#[test]
fn under_resolved_expansion_is_flagged() {
    let spec = qubit(0.001, 0.2);
    let times = grid(100, 20.0);
    let cfg = HeomConfig {
        n_k: 2,
        ..HeomConfig::default()
    };
    let base = integrate(&spec, &cfg, &excited_state(), &times).unwrap();
    let report =
        convergence_check(&spec, &cfg, &excited_state(), &base, CONVERGENCE_THRESHOLD).unwrap();
    assert!(!report.converged, "{report:?}");
}

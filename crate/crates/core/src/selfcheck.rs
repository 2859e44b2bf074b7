//! Closed forms against their brute-force references.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::Result;
use crate::numeric::{linspace, logspace};
use crate::oracle::{
    dd_response_bruteforce, gauss_average_adaptive, lindblad_steady_state_numeric, ramsey_bruteforce, SpinState,
};
use crate::protocols::{dd_filter_factor, ramsey_signal, RamseyParams};
use crate::rfdrive::{averaged_depolarization, steady_state_depolarization};

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub points: usize,
    /// Largest observed deviation, in the suite's own measure.
    pub max_deviation: f64,
    pub tolerance: f64,
    pub measure: &'static str,
    pub passed: bool,
}

impl SuiteReport {
    fn new(name: &'static str, measure: &'static str, points: usize, max_deviation: f64, tolerance: f64) -> Self {
        Self {
            name,
            points,
            max_deviation,
            tolerance,
            measure,
            passed: max_deviation.is_finite() && max_deviation <= tolerance,
        }
    }
}

/// Steady-state depolarization against the Liouvillian null vector on a
/// 10 × 10 × 10 grid of (λ/Γ, δω/Γ, s).
pub fn steady_state_suite() -> Result<SuiteReport> {
    let relaxation = 1.0;
    let mut worst = 0.0f64;
    let mut points = 0;
    for &lambda in &logspace(1e-2, 1e2, 10) {
        for &detuning in &linspace(-20.0, 20.0, 10) {
            for &s in &linspace(0.05, 0.95, 10) {
                let thermal = 2.0 * s - 1.0;
                let closed = thermal * (1.0 - steady_state_depolarization(lambda, detuning, relaxation));
                let numeric = lindblad_steady_state_numeric(lambda, detuning, relaxation, s)?;
                worst = worst.max((numeric.sigma_z - closed).abs());
                points += 1;
            }
        }
    }
    Ok(SuiteReport::new("steady-state", "absolute", points, worst, 1e-8))
}

/// Gaussian-averaged depolarization against adaptive quadrature for
/// λ/Γ̃ ∈ [10⁻³, 10³] with Γ = 10⁻³Γ̃.
pub fn erfc_suite() -> Result<SuiteReport> {
    let linewidth = 1.0;
    let relaxation = 1e-3;
    let grid = logspace(1e-3, 1e3, 61);
    let mut worst = 0.0f64;
    for &lambda in &grid {
        let closed = averaged_depolarization(lambda, relaxation, linewidth);
        let half_width = 0.5 * (relaxation * relaxation + 8.0 * lambda * lambda).sqrt();
        let features: Vec<f64> = (-1..=4).map(|k| half_width * 10f64.powi(k)).collect();
        let numeric = gauss_average_adaptive(
            |d| steady_state_depolarization(lambda, d, relaxation),
            linewidth,
            &features,
            1e-13,
        )?;
        worst = worst.max((closed - numeric).abs() / numeric);
    }
    Ok(SuiteReport::new("erfc-average", "relative", grid.len(), worst, 1e-9))
}

/// Perturbative decoupling response F·(c/ω)² against exact propagators at
/// ω/c = 10⁵ for n ∈ {1, 2, 3, 4, 6, 8}.
pub fn decoupling_suite() -> SuiteReport {
    let omega = 1.0f64;
    let coupling = 1e-5f64;
    let phases = [2.0 * PI, 1.3, 2.9, 5.5, 7.7, 9.0];
    let mut worst = 0.0f64;
    let mut points = 0;
    for n in [1, 2, 3, 4, 6, 8] {
        for &phi in &phases {
            let closed = dd_filter_factor(n, phi) * (coupling / omega).powi(2);
            for spin in [SpinState::Plus, SpinState::Minus, SpinState::Mixed] {
                let exact = dd_response_bruteforce(omega, coupling, phi / omega, n, spin);
                worst = worst.max((closed - exact).abs() / exact);
                points += 1;
            }
        }
    }
    SuiteReport::new("decoupling", "relative", points, worst, 1e-6)
}

/// Linearized Ramsey signal against explicit channel evolution. The
/// deviation is reported in units of the cubic Taylor bound ½Ve^(−Γτ)(Δωτ)³/6
/// and must stay at or below one.
pub fn ramsey_suite() -> Result<SuiteReport> {
    let params = RamseyParams { tau: 1e-6, dephasing_rate: 1e6, visibility: 0.79, repetitions: 1 };
    let mut worst = 0.0f64;
    let mut points = 0;
    for k in 0..8 {
        let phase = 0.09 / 2f64.powi(k);
        let detuning = phase / params.tau;
        let closed = ramsey_signal(detuning, &params)?;
        let exact = ramsey_bruteforce(detuning, params.tau, params.dephasing_rate, params.visibility)?;
        let bound = 0.5 * params.visibility * (-params.dephasing_rate * params.tau).exp() * phase.powi(3) / 6.0;
        worst = worst.max((closed - exact).abs() / bound);
        points += 1;
    }
    Ok(SuiteReport::new("ramsey", "fraction of cubic bound", points, worst, 1.0 + 1e-6))
}

/// All suites, in a fixed order.
pub fn run_selfcheck() -> Result<Vec<SuiteReport>> {
    Ok(vec![steady_state_suite()?, erfc_suite()?, decoupling_suite(), ramsey_suite()?])
}

//! Closed-form qubit signals and estimation uncertainties for the Ramsey and
//! dynamical-decoupling protocols.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fluxqubit::QubitParams;
use crate::numeric::{logspace, scan_then_refine};

/// Largest |Δω_FQ τ| for which the linearized Ramsey signal is used.
pub const RAMSEY_LINEAR_LIMIT: f64 = 0.1;
/// Largest F·(γ′B_AC/ω)² for which the perturbative DD signal is used.
pub const DD_PERTURBATIVE_LIMIT: f64 = 0.25;
/// Points in the coarse τ scan of [`optimize_tau_dd`].
pub const TAU_SCAN_POINTS: usize = 4000;
/// The τ scan covers `[TAU_SCAN_SPAN·τ_max, τ_max]`.
const TAU_SCAN_SPAN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyParams {
    /// Free-evolution time τ_AD (s).
    pub tau: f64,
    /// Γ_AD = 1/T₂* (s⁻¹).
    pub dephasing_rate: f64,
    pub visibility: f64,
    /// Number of repetitions N.
    pub repetitions: u64,
}

impl RamseyParams {
    /// Qubit defaults with τ_AD = T₂* unless `tau` is given.
    pub fn from_qubit(q: &QubitParams, tau: Option<f64>) -> Self {
        Self {
            tau: tau.unwrap_or(q.t2_star),
            dephasing_rate: 1.0 / q.t2_star,
            visibility: q.visibility,
            repetitions: q.repetitions(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.tau > 0.0, "ramsey.tau", || format!("must be > 0, got {}", self.tau))?;
        ensure(self.dephasing_rate >= 0.0, "ramsey.dephasing_rate", || "must be >= 0".into())?;
        ensure(self.repetitions >= 1, "ramsey.repetitions", || "must be >= 1".into())
    }
}

/// Which duration the DD dephasing envelope decays over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DephasingConvention {
    /// The whole sequence, n·τ_DD.
    #[default]
    Total,
    /// One block, τ_DD.
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdParams {
    /// Pulse index n (2n − 1 π pulses).
    pub n: u32,
    /// Block duration τ_DD (s).
    pub tau: f64,
    /// Γ_DD = 1/T₂(n) (s⁻¹).
    pub dephasing_rate: f64,
    pub visibility: f64,
    pub repetitions: u64,
    pub convention: DephasingConvention,
}

impl DdParams {
    /// Qubit defaults for pulse index `n`; τ_DD starts at T₂(n).
    pub fn from_qubit(q: &QubitParams, n: u32, convention: DephasingConvention) -> Result<Self> {
        ensure(n >= 1, "dd.n", || "must be >= 1".into())?;
        let t2 = q.t2_for(n)?;
        Ok(Self {
            n,
            tau: t2,
            dephasing_rate: 1.0 / t2,
            visibility: q.visibility,
            repetitions: q.repetitions(),
            convention,
        })
    }

    /// Time over which dephasing accrues.
    pub fn dephasing_time(&self) -> f64 {
        match self.convention {
            DephasingConvention::Total => self.n as f64 * self.tau,
            DephasingConvention::Block => self.tau,
        }
    }

    fn envelope(&self) -> f64 {
        self.visibility * (-self.dephasing_rate * self.dephasing_time()).exp()
    }
}

/// Δω_FQ = γ′·B_DC.
pub fn ramsey_detuning(b_dc: f64, field_sensitivity: f64) -> f64 {
    field_sensitivity * b_dc
}

/// P = ½ + ½·V·e^(−Γτ)·Δω·τ.
pub fn ramsey_signal(detuning: f64, params: &RamseyParams) -> Result<f64> {
    let phase = detuning * params.tau;
    if phase.abs() >= RAMSEY_LINEAR_LIMIT {
        return Err(Error::OutOfRegime(format!(
            "Ramsey phase |Δω τ| = {:.3e} must stay below {RAMSEY_LINEAR_LIMIT}",
            phase.abs()
        )));
    }
    Ok(0.5 + 0.5 * params.visibility * (-params.dephasing_rate * params.tau).exp() * phase)
}

/// δB_DC = e^(Γτ)/(V γ′ τ √N).
pub fn dc_uncertainty(params: &RamseyParams, field_sensitivity: f64) -> Result<f64> {
    ensure(field_sensitivity != 0.0, "qubit.detuning", || "field sensitivity vanishes at the symmetry point".into())?;
    Ok((params.dephasing_rate * params.tau).exp()
        / (params.visibility * field_sensitivity.abs() * params.tau * (params.repetitions as f64).sqrt()))
}

/// Filter factor F(n, φ) of the n-block decoupling sequence at φ = ωτ_DD.
pub fn dd_filter_factor(n: u32, phi: f64) -> f64 {
    let edge = ((0.5 * phi).cos() - 1.0).powi(2);
    let sum = if n == 1 {
        1.0
    } else if n.is_multiple_of(2) {
        2.0 * (0..n / 2).map(|i| ((2 * i + 1) as f64 * 0.5 * phi).cos()).sum::<f64>()
    } else {
        1.0 + 2.0 * (0..(n - 1) / 2).map(|i| ((i + 1) as f64 * phi).cos()).sum::<f64>()
    };
    sum * sum * edge
}

fn dd_coupling_ratio(b_ac: f64, larmor: f64, field_sensitivity: f64, params: &DdParams) -> Result<(f64, f64)> {
    ensure(larmor > 0.0, "environment.b_ex", || "Larmor frequency must be > 0".into())?;
    let ratio_sq = (field_sensitivity * b_ac / larmor).powi(2);
    let filter = dd_filter_factor(params.n, larmor * params.tau);
    if filter * ratio_sq >= DD_PERTURBATIVE_LIMIT {
        return Err(Error::OutOfRegime(format!(
            "DD response F·(γ′B/ω)² = {:.3e} must stay below {DD_PERTURBATIVE_LIMIT}",
            filter * ratio_sq
        )));
    }
    Ok((filter, ratio_sq))
}

/// P = ½ + V·e^(−Γ T)·[½ − F·(γ′B_AC/ω)²].
pub fn dd_signal(b_ac: f64, larmor: f64, params: &DdParams, field_sensitivity: f64) -> Result<f64> {
    let (filter, ratio_sq) = dd_coupling_ratio(b_ac, larmor, field_sensitivity, params)?;
    Ok(0.5 + params.envelope() * (0.5 - filter * ratio_sq))
}

/// δB_AC = √(P(1−P))/(|∂P/∂B_AC|·√N).
pub fn ac_uncertainty(params: &DdParams, field_sensitivity: f64, larmor: f64, b_ac: f64) -> Result<f64> {
    if b_ac <= 0.0 {
        return Err(Error::UndefinedDerivative);
    }
    let (filter, ratio_sq) = dd_coupling_ratio(b_ac, larmor, field_sensitivity, params)?;
    let envelope = params.envelope();
    let p = 0.5 + envelope * (0.5 - filter * ratio_sq);
    let slope = 2.0 * envelope * filter * field_sensitivity.powi(2) * b_ac / larmor.powi(2);
    if slope == 0.0 || !slope.is_finite() {
        return Err(Error::UndefinedDerivative);
    }
    Ok((p * (1.0 - p)).sqrt() / (slope * (params.repetitions as f64).sqrt()))
}

/// Optimal block duration and the uncertainty it achieves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauOptimum {
    pub tau: f64,
    pub uncertainty: f64,
}

/// Minimizes δB_AC over τ_DD ∈ (0, 5·T₂(n)]: a log-spaced scan followed by
/// golden-section refinement. Points outside the perturbative regime or with
/// a vanishing derivative are skipped.
pub fn optimize_tau_dd(template: &DdParams, field_sensitivity: f64, larmor: f64, b_ac: f64) -> Result<TauOptimum> {
    ensure(larmor > 0.0, "environment.b_ex", || "Larmor frequency must be > 0".into())?;
    ensure(template.dephasing_rate > 0.0, "dd.dephasing_rate", || "must be > 0".into())?;
    let tau_max = 5.0 / template.dephasing_rate;
    let grid = logspace(tau_max * TAU_SCAN_SPAN, tau_max, TAU_SCAN_POINTS);
    let objective = |tau: f64| {
        let p = DdParams { tau, ..*template };
        ac_uncertainty(&p, field_sensitivity, larmor, b_ac).unwrap_or(f64::INFINITY)
    };
    let (tau, uncertainty) = scan_then_refine(objective, &grid, tau_max * 1e-12);
    if !uncertainty.is_finite() {
        return Err(Error::OutOfRegime(format!(
            "no block duration in (0, {tau_max:.3e}] s keeps the DD signal perturbative"
        )));
    }
    Ok(TauOptimum { tau, uncertainty })
}

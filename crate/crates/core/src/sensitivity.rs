//! Minimum detectable spin density and spin number from the SNR = 1
//! condition.

use serde::{Deserialize, Serialize};

use crate::ensemble::{discretize, Environment, KernelCache, Placement, SampleGeometry, SaturationProfile};
use crate::error::{ensure, Error, Result};
use crate::exec::Execution;
use crate::fluxqubit::QubitParams;
use crate::numeric::{bisect, logspace, scan_then_refine};
use crate::protocols::{
    ac_uncertainty, dc_uncertainty, optimize_tau_dd, ramsey_detuning, ramsey_signal, DdParams, DephasingConvention,
    RamseyParams,
};
use crate::rfdrive::{current_from_normalized, normalized_current, OffsetReference, RfLine, RfSide};

/// Search interval for the DD solver, log₁₀(ρ / m⁻³).
pub const LOG_DENSITY_RANGE: (f64, f64) = (16.0, 30.0);
/// Bisection stops once the log₁₀ bracket is narrower than this.
pub const LOG_DENSITY_TOLERANCE: f64 = 1e-4;
/// Scan of the normalized drive current γμ₀I/(Γ̃R): log-spaced points over
/// [10⁻³, 10³].
pub const CURRENT_SCAN: (f64, f64, usize) = (1e-3, 1e3, 121);
/// A DC signal smaller than this fraction of Σ|kernel·saturation| is treated
/// as fully cancelled.
pub const CANCELLATION_THRESHOLD: f64 = 1e-9;

/// Read-out protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Ramsey measurement after asymmetric RF saturation.
    Ramsey,
    /// Dynamical decoupling with pulse index n (n = 1 is the spin echo).
    Decoupling(u32),
}

impl Scheme {
    pub fn label(&self) -> String {
        match self {
            Scheme::Ramsey => "ramsey".into(),
            Scheme::Decoupling(1) => "echo".into(),
            Scheme::Decoupling(n) => format!("dd{n}"),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ramsey" => Ok(Scheme::Ramsey),
            "echo" => Ok(Scheme::Decoupling(1)),
            _ => s
                .strip_prefix("dd")
                .and_then(|n| n.parse::<u32>().ok())
                .filter(|n| *n >= 1)
                .map(Scheme::Decoupling)
                .ok_or_else(|| Error::InvalidParameter {
                    name: "scheme",
                    reason: format!("expected ramsey, echo or dd<n>; got `{s}`"),
                }),
        }
    }
}

/// RF-line placement and (optionally fixed) drive current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfSettings {
    /// Offset z_RF (m).
    pub offset: f64,
    pub reference: OffsetReference,
    pub side: RfSide,
    /// Fixed I_RF (A); optimized when `None`.
    pub current: Option<f64>,
}

impl Default for RfSettings {
    fn default() -> Self {
        Self { offset: 2e-6, reference: OffsetReference::Edge, side: RfSide::Positive, current: None }
    }
}

/// Everything a sensitivity calculation depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub qubit: QubitParams,
    pub env: Environment,
    pub rf: RfSettings,
    pub convention: DephasingConvention,
    /// Ramsey free-evolution time; T₂* when `None`.
    pub ramsey_tau: Option<f64>,
    /// Stand-off h between chip and sample (m).
    pub standoff: f64,
    /// Thickness h′ of small samples (m).
    pub small_height: f64,
    /// Voxel edge; the geometry default when `None`.
    pub voxel_edge: Option<f64>,
}

impl Default for Setup {
    fn default() -> Self {
        Self {
            qubit: QubitParams::default(),
            env: Environment::default(),
            rf: RfSettings::default(),
            convention: DephasingConvention::Total,
            ramsey_tau: None,
            standoff: 0.1e-6,
            small_height: 0.1e-6,
            voxel_edge: None,
        }
    }
}

impl Setup {
    pub fn validate(&self) -> Result<()> {
        self.qubit.validate()?;
        self.env.validate()?;
        ensure(self.rf.offset > 0.0, "rf.offset", || format!("must be > 0, got {}", self.rf.offset))?;
        if let Some(i) = self.rf.current {
            ensure(i >= 0.0, "rf.current", || format!("must be >= 0, got {i}"))?;
        }
        if let Some(t) = self.ramsey_tau {
            ensure(t > 0.0, "ramsey.tau", || format!("must be > 0, got {t}"))?;
        }
        ensure(self.standoff > 0.0, "sample.standoff", || format!("must be > 0, got {}", self.standoff))?;
        ensure(self.small_height > 0.0, "sample.height", || format!("must be > 0, got {}", self.small_height))?;
        if let Some(e) = self.voxel_edge {
            ensure(e > 0.0, "numerics.voxel_edge", || format!("must be > 0, got {e}"))?;
        }
        Ok(())
    }

    pub fn large_sample(&self) -> SampleGeometry {
        SampleGeometry::large(self.qubit.loop_side, self.standoff)
    }

    pub fn small_sample(&self, placement: Placement, size: f64) -> SampleGeometry {
        SampleGeometry::small(placement, self.qubit.loop_side, size, self.small_height, self.standoff, self.rf.side)
    }

    /// Configured voxel edge, or the geometry default.
    pub fn voxel_edge_for(&self, geom: &SampleGeometry) -> f64 {
        self.voxel_edge.unwrap_or_else(|| geom.default_voxel_edge(self.qubit.loop_side))
    }

    /// Discretizes `geom` and evaluates its kernels.
    pub fn kernel_cache(&self, geom: &SampleGeometry, exec: Execution) -> Result<KernelCache> {
        self.validate()?;
        let grid = discretize(geom, self.voxel_edge_for(geom))?;
        KernelCache::build(&self.qubit, self.env.gamma, &grid, exec)
    }

    pub fn rf_line(&self, current: f64) -> Result<RfLine> {
        RfLine::placed(self.qubit.loop_side, self.rf.offset, self.rf.reference, self.rf.side, current)
    }

    pub fn drive_profile(&self, current: f64) -> Result<SaturationProfile> {
        Ok(SaturationProfile::Driven { line: self.rf_line(current)?, gamma: self.env.gamma, drive: self.env.drive() })
    }

    fn ramsey_params(&self) -> RamseyParams {
        RamseyParams::from_qubit(&self.qubit, self.ramsey_tau)
    }
}

/// Result of a minimum-density or minimum-number search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub scheme: String,
    /// Pulse index for decoupling schemes.
    pub n: Option<u32>,
    /// ρ_min (m⁻³).
    pub density: f64,
    /// ρ_min (cm⁻³).
    pub density_cm3: f64,
    /// N_min for small samples.
    pub spin_number: Option<f64>,
    /// Effective signal field at ρ_min (T).
    pub field: f64,
    /// Estimation uncertainty at ρ_min (T).
    pub uncertainty: f64,
    /// Free-evolution (Ramsey) or block (decoupling) duration τ* (s).
    pub tau: f64,
    /// Drive current I_RF* (A).
    pub rf_current: Option<f64>,
    /// γμ₀I_RF*/(Γ̃R).
    pub normalized_current: Option<f64>,
    /// RF offset z_RF (m).
    pub rf_offset: Option<f64>,
    pub b_ex: f64,
    pub loop_side: f64,
    pub standoff: f64,
    pub placement: Option<String>,
    /// Small-sample side l (m).
    pub sample_size: Option<f64>,
    pub bisection_iterations: u32,
    /// Final bracket width in log₁₀ ρ.
    pub log10_bracket: f64,
    pub voxel_edge: f64,
    pub voxels: u64,
}

impl SensitivityResult {
    fn new(
        setup: &Setup,
        scheme: Scheme,
        cache: &KernelCache,
        density: f64,
        field: f64,
        uncertainty: f64,
        tau: f64,
    ) -> Self {
        Self {
            scheme: scheme.label(),
            n: match scheme {
                Scheme::Ramsey => None,
                Scheme::Decoupling(n) => Some(n),
            },
            density,
            density_cm3: density * 1e-6,
            spin_number: None,
            field,
            uncertainty,
            tau,
            rf_current: None,
            normalized_current: None,
            rf_offset: None,
            b_ex: setup.env.b_ex,
            loop_side: setup.qubit.loop_side,
            standoff: setup.standoff,
            placement: None,
            sample_size: None,
            bisection_iterations: 0,
            log10_bracket: 0.0,
            voxel_edge: cache.voxel_edge(),
            voxels: cache.voxels,
        }
    }
}

/// Drive current maximising |B_DC|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveOptimum {
    /// I_RF (A).
    pub current: f64,
    /// γμ₀I_RF/(Γ̃R).
    pub normalized: f64,
    /// Σ V·B_z^(spin)·s(r) at that current (T m³).
    pub weighted_dc: f64,
}

/// Maximises |Σ V·B_z^(spin)·s(r)| over the drive current: log scan over the
/// normalized current followed by golden-section refinement in log space.
pub fn optimize_drive(setup: &Setup, cache: &KernelCache) -> Result<DriveOptimum> {
    let env = &setup.env;
    let to_amps = |log_c: f64| current_from_normalized(10f64.powf(log_c), env.gamma, env.linewidth);
    let mut failure = None;
    let mut objective = |log_c: f64| {
        let value = setup.drive_profile(to_amps(log_c)).and_then(|p| cache.weighted_dc(&p));
        match value {
            Ok(v) => -v.abs(),
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        }
    };
    let (lo, hi, n) = CURRENT_SCAN;
    let grid: Vec<f64> = logspace(lo, hi, n).into_iter().map(f64::log10).collect();
    let (log_c, _) = scan_then_refine(&mut objective, &grid, 1e-6);
    if let Some(e) = failure {
        return Err(e);
    }
    let current = to_amps(log_c);
    Ok(DriveOptimum {
        current,
        normalized: normalized_current(current, env.gamma, env.linewidth),
        weighted_dc: cache.weighted_dc(&setup.drive_profile(current)?)?,
    })
}

fn ramsey_for_profile(setup: &Setup, cache: &KernelCache, profile: &SaturationProfile) -> Result<SensitivityResult> {
    let weighted = cache.weighted_dc(profile)?;
    let scale = cache.weighted_dc_abs(profile)?;
    if scale == 0.0 || weighted.abs() <= CANCELLATION_THRESHOLD * scale {
        return Err(Error::NoSignal(format!(
            "saturated-spin field cancels at the qubit (net {weighted:.3e} against {scale:.3e} T m^3)"
        )));
    }
    let polarization = setup.env.thermal_polarization();
    let field_per_density = polarization * weighted.abs();
    let params = setup.ramsey_params();
    params.validate()?;
    let gprime = setup.qubit.field_sensitivity();
    let uncertainty = dc_uncertainty(&params, gprime)?;
    let density = uncertainty / field_per_density;
    // The linearized signal must hold at the threshold.
    ramsey_signal(ramsey_detuning(uncertainty, gprime), &params)?;
    Ok(SensitivityResult::new(
        setup,
        Scheme::Ramsey,
        cache,
        density,
        density * field_per_density,
        uncertainty,
        params.tau,
    ))
}

/// ρ_min for the Ramsey protocol. B_DC is linear in ρ and δB_DC does not
/// depend on ρ, so the threshold follows directly.
pub fn min_density_ramsey(setup: &Setup, cache: &KernelCache) -> Result<SensitivityResult> {
    let (current, normalized) = match setup.rf.current {
        Some(i) => (i, normalized_current(i, setup.env.gamma, setup.env.linewidth)),
        None => {
            let opt = optimize_drive(setup, cache)?;
            (opt.current, opt.normalized)
        }
    };
    let mut result = ramsey_for_profile(setup, cache, &setup.drive_profile(current)?)?;
    result.rf_current = Some(current);
    result.normalized_current = Some(normalized);
    result.rf_offset = Some(setup.rf.offset);
    Ok(result)
}

/// Optimal τ and δB_AC for the ensemble of density `density`.
fn dd_at_density(setup: &Setup, cache: &KernelCache, template: &DdParams, density: f64) -> Result<(f64, f64, f64)> {
    let b_ac = cache.ac_field(density);
    let opt = optimize_tau_dd(template, setup.qubit.field_sensitivity(), setup.env.larmor(), b_ac)?;
    Ok((b_ac, opt.uncertainty, opt.tau))
}

/// ρ_min for dynamical decoupling with pulse index `n`: bisection on log₁₀ρ of
/// ln(B_AC/δB_AC*), with δB_AC* minimized over τ at every candidate.
pub fn min_density_dd(setup: &Setup, cache: &KernelCache, n: u32) -> Result<SensitivityResult> {
    let template = DdParams::from_qubit(&setup.qubit, n, setup.convention)?;
    if cache.ac_total <= 0.0 {
        return Err(Error::NoSignal("transverse kernel vanishes over the sample".into()));
    }
    let log_snr = |log_rho: f64| -> Result<f64> {
        match dd_at_density(setup, cache, &template, 10f64.powf(log_rho)) {
            Ok((b, db, _)) => Ok((b / db).ln()),
            // Every τ saturates the response: the signal is far above threshold.
            Err(Error::OutOfRegime(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };
    let (lo, hi) = LOG_DENSITY_RANGE;
    let found = bisect(log_snr, lo, hi, LOG_DENSITY_TOLERANCE, 200).map_err(|e| match e {
        Error::Bracket { low, high, at_low, at_high } => {
            Error::Bracket { low: 10f64.powf(low), high: 10f64.powf(high), at_low, at_high }
        }
        other => other,
    })?;
    let density = 10f64.powf(found.root);
    let (field, uncertainty, tau) = dd_at_density(setup, cache, &template, density)?;
    let mut result = SensitivityResult::new(setup, Scheme::Decoupling(n), cache, density, field, uncertainty, tau);
    result.bisection_iterations = found.iterations;
    result.log10_bracket = found.hi - found.lo;
    Ok(result)
}

/// ρ_min over the large sample for `scheme`, building its kernels with `exec`.
pub fn min_density(setup: &Setup, scheme: Scheme, exec: Execution) -> Result<SensitivityResult> {
    let cache = setup.kernel_cache(&setup.large_sample(), exec)?;
    min_density_with_cache(setup, &cache, scheme)
}

pub fn min_density_with_cache(setup: &Setup, cache: &KernelCache, scheme: Scheme) -> Result<SensitivityResult> {
    match scheme {
        Scheme::Ramsey => min_density_ramsey(setup, cache),
        Scheme::Decoupling(n) => min_density_dd(setup, cache, n),
    }
}

/// N_min = l²·h′·ρ_min for an `l × h′ × l` sample at `placement`. The Ramsey
/// variant assumes every spin is saturated.
pub fn min_spin_number(
    setup: &Setup,
    placement: Placement,
    size: f64,
    scheme: Scheme,
    exec: Execution,
) -> Result<SensitivityResult> {
    ensure(size > 0.0, "sample.size", || format!("must be > 0, got {size}"))?;
    let geom = setup.small_sample(placement, size);
    let cache = setup.kernel_cache(&geom, exec)?;
    let mut result = match scheme {
        Scheme::Ramsey => ramsey_for_profile(setup, &cache, &SaturationProfile::Full)?,
        Scheme::Decoupling(n) => min_density_dd(setup, &cache, n)?,
    };
    result.spin_number = Some(result.density * geom.volume());
    result.placement = Some(placement.label().into());
    result.sample_size = Some(size);
    Ok(result)
}

/// Forward/inverse check: SNR of `result`'s own threshold, recomputed from
/// scratch.
pub fn threshold_mismatch(setup: &Setup, cache: &KernelCache, result: &SensitivityResult) -> Result<f64> {
    match result.n {
        None => Ok((result.field - result.uncertainty).abs() / result.uncertainty),
        Some(n) => {
            let template = DdParams::from_qubit(&setup.qubit, n, setup.convention)?;
            let b = cache.ac_field(result.density);
            let p = DdParams { tau: result.tau, ..template };
            let db = ac_uncertainty(&p, setup.qubit.field_sensitivity(), setup.env.larmor(), b)?;
            Ok((b - db).abs() / db)
        }
    }
}

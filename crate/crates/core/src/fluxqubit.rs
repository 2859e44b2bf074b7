//! Flux-qubit energy model and the geometric kernels coupling the qubit loop
//! to nuclear spins.
//!
//! Frame: the square loop lies in the x–z plane centred on the origin with its
//! normal along +y; the static field `B_ex` points along +z and the sample
//! occupies `y ≥ h`. The wire is treated as four infinitely thin straight
//! segments.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, MU0_OVER_4PI};
use crate::error::{ensure, Error, Result};

pub type Point = Vector3<f64>;

/// Flux-qubit parameters. Frequencies are angular (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    /// Tunnel gap Δ.
    pub gap: f64,
    /// Flux detuning ε.
    pub detuning: f64,
    /// Persistent current I_p (A).
    pub persistent_current: f64,
    /// Side length L of the square loop (m).
    pub loop_side: f64,
    /// Ramsey dephasing time T₂* (s).
    pub t2_star: f64,
    /// Dynamical-decoupling dephasing time T₂(n) keyed by the pulse index n (s).
    pub t2_of_n: BTreeMap<u32, f64>,
    /// Read-out visibility V = 1 − η.
    pub visibility: f64,
    /// Duration of one measurement shot (s).
    pub t_rep: f64,
    /// Total accumulation time (s).
    pub t_tot: f64,
}

impl Default for QubitParams {
    /// Qubit used throughout the reference calculations (L = 2 µm).
    fn default() -> Self {
        let t2_of_n = [(1, 5.00), (2, 6.63), (4, 8.91), (6, 10.8), (8, 12.4), (10, 13.6)]
            .into_iter()
            .map(|(n, us)| (n, us / 1e6))
            .collect();
        Self {
            gap: 2.0 * PI * 5.37e9,
            detuning: 2.0 * PI * 0.112e9,
            persistent_current: 180e-9,
            loop_side: 2e-6,
            t2_star: 1e-6,
            t2_of_n,
            visibility: 0.79,
            t_rep: 100e-6,
            t_tot: 1.0,
        }
    }
}

impl QubitParams {
    pub fn validate(&self) -> Result<()> {
        ensure(self.gap > 0.0, "qubit.gap", || format!("must be > 0, got {}", self.gap))?;
        ensure(self.detuning.is_finite(), "qubit.detuning", || "must be finite".into())?;
        ensure(self.persistent_current > 0.0, "qubit.persistent_current", || {
            format!("must be > 0, got {}", self.persistent_current)
        })?;
        ensure(self.loop_side > 0.0, "qubit.loop_side", || format!("must be > 0, got {}", self.loop_side))?;
        ensure(self.visibility > 0.0 && self.visibility <= 1.0, "qubit.visibility", || {
            format!("must lie in (0, 1], got {}", self.visibility)
        })?;
        ensure(self.t2_star > 0.0, "qubit.t2_star", || format!("must be > 0, got {}", self.t2_star))?;
        for (n, t2) in &self.t2_of_n {
            ensure(*n >= 1 && *t2 > 0.0, "qubit.t2_of_n", || {
                format!("entry n={n} must have n >= 1 and T2 > 0, got {t2}")
            })?;
        }
        ensure(self.t_rep > 0.0 && self.t_tot >= self.t_rep, "qubit.t_rep", || {
            format!("need 0 < t_rep <= t_tot, got t_rep={} t_tot={}", self.t_rep, self.t_tot)
        })
    }

    /// Qubit splitting ω_FQ = √(ε² + Δ²).
    pub fn frequency(&self) -> f64 {
        self.detuning.hypot(self.gap)
    }

    /// γ′ = dω_FQ/dB_⊥ = (ε/ω_FQ)·2 I_p L²/ħ, the qubit's response to a
    /// uniform field threading the loop (rad s⁻¹ T⁻¹).
    pub fn field_sensitivity(&self) -> f64 {
        let flux_coupling = 2.0 * self.persistent_current * self.loop_side.powi(2) / HBAR;
        self.detuning / self.frequency() * flux_coupling
    }

    /// Effective spin–qubit gyromagnetic ratio γ̃ = γ·ε/ω_FQ.
    pub fn effective_gyro(&self, gamma: f64) -> f64 {
        gamma * self.detuning / self.frequency()
    }

    /// Number of repetitions N = ⌊T_tot/T_rep⌋ (at least 1).
    pub fn repetitions(&self) -> u64 {
        ((self.t_tot / self.t_rep).floor() as u64).max(1)
    }

    pub fn t2_for(&self, n: u32) -> Result<f64> {
        self.t2_of_n.get(&n).copied().ok_or(Error::MissingCoherence(n))
    }

    pub fn loop_geometry(&self) -> LoopGeometry {
        LoopGeometry { side: self.loop_side, current: self.persistent_current }
    }
}

/// Magnetic field in tesla.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FieldVector {
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Magnitude of the part transverse to the static field (x–y plane).
    pub fn transverse(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
}

impl From<Vector3<f64>> for FieldVector {
    fn from(v: Vector3<f64>) -> Self {
        Self { x: v.x, y: v.y, z: v.z }
    }
}

/// Square current loop of side `side` in the x–z plane, normal +y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopGeometry {
    pub side: f64,
    pub current: f64,
}

impl LoopGeometry {
    /// Corner-to-corner segments, ordered so the field at the centre is +y.
    pub fn segments(&self) -> [(Point, Point); 4] {
        let a = 0.5 * self.side;
        let c = [Point::new(-a, 0.0, a), Point::new(a, 0.0, a), Point::new(a, 0.0, -a), Point::new(-a, 0.0, -a)];
        [(c[0], c[1]), (c[1], c[2]), (c[2], c[3]), (c[3], c[0])]
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    /// Magnetic moment I·L² ŷ (A m²).
    pub fn moment(&self) -> Vector3<f64> {
        Vector3::new(0.0, self.current * self.area(), 0.0)
    }

    /// Exact thin-wire Biot–Savart field at `p`.
    pub fn field(&self, p: &Point) -> Result<FieldVector> {
        let mut b = Vector3::zeros();
        for (start, end) in self.segments() {
            b += segment_field(&start, &end, p)?;
        }
        Ok((b * (MU0_OVER_4PI * self.current)).into())
    }
}

/// Field of a unit current on the straight segment `start → end`, without the
/// μ₀/4π prefactor.
pub fn segment_field(start: &Point, end: &Point, p: &Point) -> Result<Vector3<f64>> {
    let l = end - start;
    let r1 = p - start;
    let r2 = p - end;
    let cross = l.cross(&r1);
    let cross_sq = cross.norm_squared();
    let (n1, n2) = (r1.norm(), r2.norm());
    let l_sq = l.norm_squared();
    if cross_sq <= 1e-24 * l_sq * r1.norm_squared().max(l_sq) {
        // On the line through the segment: zero field outside it, singular on it.
        let t = r1.dot(&l) / l_sq;
        if (0.0..=1.0).contains(&t) || n1 == 0.0 || n2 == 0.0 {
            return Err(Error::SingularEvaluation);
        }
        return Ok(Vector3::zeros());
    }
    let scale = l.dot(&(r1 / n1 - r2 / n2)) / cross_sq;
    Ok(cross * scale)
}

/// Point-dipole field of moment `m` at displacement `r` (far-field reference).
pub fn dipole_field(m: &Vector3<f64>, r: &Point) -> FieldVector {
    let d = r.norm();
    let rhat = r / d;
    let b = (3.0 * m.dot(&rhat) * rhat - m) * (MU0_OVER_4PI / (d * d * d));
    b.into()
}

/// Reciprocity factor mapping the loop's own field at a spin to the effective
/// field that spin produces at the qubit: ħγ/(2 I_p L²).
fn reciprocity(q: &QubitParams, gamma: f64) -> f64 {
    HBAR * gamma / (2.0 * q.persistent_current * q.loop_side.powi(2))
}

/// Effective DC field at the qubit from one fully polarized spin at `p`,
/// B_z^(spin) = ħγ·B_z^(FQ)(p)/(2 I_p L²). Odd under z → −z.
pub fn spin_to_qubit_dc_kernel(q: &QubitParams, gamma: f64, p: &Point) -> Result<f64> {
    let b = q.loop_geometry().field(p)?;
    Ok(reciprocity(q, gamma) * b.z)
}

/// Effective AC field amplitude at the qubit from one precessing spin at `p`,
/// B_⊥^(spin) = ħγ·√(B_x² + B_y²)/(2 I_p L²). Even under z → −z.
pub fn spin_to_qubit_ac_kernel(q: &QubitParams, gamma: f64, p: &Point) -> Result<f64> {
    let b = q.loop_geometry().field(p)?;
    Ok(reciprocity(q, gamma) * b.transverse())
}

/// Both kernels from a single field evaluation: `(B_z^(spin), B_⊥^(spin))`.
pub fn spin_to_qubit_kernels(q: &QubitParams, gamma: f64, p: &Point) -> Result<(f64, f64)> {
    let b = q.loop_geometry().field(p)?;
    let k = reciprocity(q, gamma);
    Ok((k * b.z, k * b.transverse()))
}

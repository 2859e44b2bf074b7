//! RF-line coupling and the steady-state saturation of a driven nuclear spin.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{DRIVE_REFERENCE_LENGTH, MU0};
use crate::ensemble::{KernelCache, SaturationProfile};
use crate::error::{ensure, Error, Result};
use crate::exec::Execution;
use crate::fluxqubit::Point;
use crate::special::erfcx;

/// Where the RF-line offset `z_RF` is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffsetReference {
    /// Nearest loop edge (default).
    #[default]
    Edge,
    /// Loop centre.
    Center,
}

/// Which side of the loop (sign of z) the RF line runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RfSide {
    #[default]
    Positive,
    Negative,
}

impl RfSide {
    pub fn sign(self) -> f64 {
        match self {
            RfSide::Positive => 1.0,
            RfSide::Negative => -1.0,
        }
    }
}

/// Infinite straight RF line parallel to x̂ in the chip plane (y = 0) at
/// height-zero coordinate `z = z_wire`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfLine {
    pub z_wire: f64,
    /// Current amplitude I_RF (A).
    pub current: f64,
}

impl RfLine {
    /// Places the line `offset` away from the loop edge (or centre) on `side`.
    pub fn placed(loop_side: f64, offset: f64, reference: OffsetReference, side: RfSide, current: f64) -> Result<Self> {
        ensure(offset > 0.0, "rf.offset", || format!("must be > 0, got {offset}"))?;
        ensure(current >= 0.0, "rf.current", || format!("must be >= 0, got {current}"))?;
        let from_centre = match reference {
            OffsetReference::Edge => 0.5 * loop_side + offset,
            OffsetReference::Center => offset,
        };
        Ok(Self { z_wire: side.sign() * from_centre, current })
    }

    /// Drive strength λ_RF = γ μ₀ I_RF cosθ /(2π r), with r the distance to
    /// the line and θ the angle between the line-to-spin vector and ẑ.
    pub fn coupling(&self, p: &Point, gamma: f64) -> Result<f64> {
        self.coupling_yz(p.y, p.z, gamma)
    }

    /// [`coupling`](Self::coupling) for a spin at height `y` and position `z`;
    /// independent of x along the line.
    pub fn coupling_yz(&self, y: f64, z: f64, gamma: f64) -> Result<f64> {
        let dz = z - self.z_wire;
        let r_sq = y * y + dz * dz;
        if r_sq == 0.0 {
            return Err(Error::SingularEvaluation);
        }
        // cosθ / r = dz / r²
        Ok(gamma * MU0 * self.current * dz / (2.0 * PI * r_sq))
    }
}

/// Dimensionless drive current γ μ₀ I_RF /(Γ̃ R) with R = 1 µm.
pub fn normalized_current(current: f64, gamma: f64, linewidth: f64) -> f64 {
    gamma * MU0 * current / (linewidth * DRIVE_REFERENCE_LENGTH)
}

/// Inverse of [`normalized_current`].
pub fn current_from_normalized(normalized: f64, gamma: f64, linewidth: f64) -> f64 {
    normalized * linewidth * DRIVE_REFERENCE_LENGTH / (gamma * MU0)
}

/// Relaxation parameters of the driven spins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveEnvironment {
    /// Longitudinal relaxation rate Γ (s⁻¹).
    pub relaxation: f64,
    /// Gaussian linewidth Γ̃ of the Larmor-frequency spread (s⁻¹).
    pub linewidth: f64,
}

impl DriveEnvironment {
    /// Linewidth `linewidth` with Γ = 10⁻³ Γ̃.
    pub fn with_linewidth(linewidth: f64) -> Self {
        Self { relaxation: 1e-3 * linewidth, linewidth }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.relaxation > 0.0, "environment.relaxation", || format!("must be > 0, got {}", self.relaxation))?;
        ensure(self.linewidth > 0.0, "environment.linewidth", || format!("must be > 0, got {}", self.linewidth))
    }
}

/// Fraction of the thermal polarization removed by a resonant drive in steady
/// state, 8λ²/(Γ² + 8λ² + 4δω²), for a spin detuned by `detuning`.
pub fn steady_state_depolarization(lambda: f64, detuning: f64, relaxation: f64) -> f64 {
    let drive = 8.0 * lambda * lambda;
    drive / (relaxation * relaxation + drive + 4.0 * detuning * detuning)
}

/// [`steady_state_depolarization`] averaged over a Gaussian distribution of
/// detunings with weight exp(−δω²/Γ̃²)/(Γ̃√π).
///
/// Closed form `4λ²√π/(Γ̃ S) · erfcx(S/2Γ̃)` with `S = √(Γ² + 8λ²)`; the
/// scaled complementary error function keeps it finite for any λ.
pub fn averaged_depolarization(lambda: f64, relaxation: f64, linewidth: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let s = (relaxation * relaxation + 8.0 * lambda * lambda).sqrt();
    let value = 4.0 * lambda * lambda * PI.sqrt() / (linewidth * s) * erfcx(s / (2.0 * linewidth));
    value.min(1.0)
}

/// Ramsey detuning over a grid of RF-line offsets and drive currents.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveMap {
    /// RF-line offsets z_RF (m).
    pub offsets: Vec<f64>,
    /// Normalized drive currents γμ₀I_RF/(Γ̃R).
    pub currents: Vec<f64>,
    /// Δω_FQ per unit spin density, `values[i_offset][i_current]` (rad s⁻¹ m³).
    pub values: Vec<Vec<f64>>,
}

impl DriveMap {
    fn max_abs(values: &[f64]) -> f64 {
        values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// |Δω_FQ| / max over the whole grid.
    pub fn normalized_global(&self) -> Vec<Vec<f64>> {
        let max = self.values.iter().map(|row| Self::max_abs(row)).fold(0.0, f64::max);
        self.values
            .iter()
            .map(|row| row.iter().map(|v| if max > 0.0 { v.abs() / max } else { 0.0 }).collect())
            .collect()
    }

    /// |Δω_FQ| / max over the currents at each offset.
    pub fn normalized_per_offset(&self) -> Vec<Vec<f64>> {
        self.values
            .iter()
            .map(|row| {
                let max = Self::max_abs(row);
                row.iter().map(|v| if max > 0.0 { v.abs() / max } else { 0.0 }).collect()
            })
            .collect()
    }

    /// Grid indices `(offset, current)` of the largest |Δω_FQ|.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_val = -1.0;
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if v.abs() > best_val {
                    best_val = v.abs();
                    best = (i, j);
                }
            }
        }
        best
    }

    /// For each offset, the normalized current that maximises |Δω_FQ|.
    pub fn ridge(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|row| {
                let (j, _) = row
                    .iter()
                    .enumerate()
                    .fold((0, -1.0), |acc, (j, v)| if v.abs() > acc.1 { (j, v.abs()) } else { acc });
                self.currents[j]
            })
            .collect()
    }
}

/// Parameters fixed across a [`drive_map`] evaluation.
#[derive(Debug, Clone, Copy)]
pub struct DriveMapContext {
    pub loop_side: f64,
    pub gamma: f64,
    pub field_sensitivity: f64,
    pub thermal_polarization: f64,
    pub drive: DriveEnvironment,
    pub reference: OffsetReference,
    pub side: RfSide,
}

/// Ramsey detuning Δω_FQ = γ′·B_DC (per unit density) for every pair of RF
/// offset and normalized current. Grid cells are independent and evaluated
/// with `exec`.
pub fn drive_map(
    cache: &KernelCache,
    ctx: &DriveMapContext,
    offsets: &[f64],
    normalized_currents: &[f64],
    exec: Execution,
) -> Result<DriveMap> {
    if offsets.is_empty() || normalized_currents.is_empty() {
        return Err(Error::EmptyGrid("drive map needs at least one offset and one current"));
    }
    ensure(normalized_currents.iter().all(|c| *c >= 0.0), "drive_map.currents", || {
        "normalized currents must be >= 0".into()
    })?;
    let n_cur = normalized_currents.len();
    let cells = exec.map(offsets.len() * n_cur, |k| -> Result<f64> {
        let offset = offsets[k / n_cur];
        let current = current_from_normalized(normalized_currents[k % n_cur], ctx.gamma, ctx.drive.linewidth);
        let line = RfLine::placed(ctx.loop_side, offset, ctx.reference, ctx.side, current)?;
        let profile = SaturationProfile::Driven { line, gamma: ctx.gamma, drive: ctx.drive };
        let b_dc = cache.dc_field(1.0, ctx.thermal_polarization, &profile)?;
        Ok(ctx.field_sensitivity * b_dc)
    });
    let flat = cells.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(DriveMap {
        offsets: offsets.to_vec(),
        currents: normalized_currents.to_vec(),
        values: flat.chunks(n_cur).map(<[f64]>::to_vec).collect(),
    })
}

//! Physical constants (CODATA 2018) in SI units.

use std::f64::consts::PI;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const KB: f64 = 1.380_649e-23;
/// Vacuum permeability (N/A²).
pub const MU0: f64 = 1.256_637_062_12e-6;
/// μ₀/4π, the Biot–Savart prefactor.
pub const MU0_OVER_4PI: f64 = MU0 / (4.0 * PI);
/// Proton gyromagnetic ratio γ/2π (Hz/T).
pub const PROTON_GAMMA_HZ_PER_T: f64 = 42.577_478_518e6;
/// Reference length used to normalise the RF drive current (m).
pub const DRIVE_REFERENCE_LENGTH: f64 = 1.0e-6;

/// Converts a gyromagnetic ratio in Hz/T to rad s⁻¹ T⁻¹.
pub fn gyro_from_hz(gamma_hz_per_t: f64) -> f64 {
    2.0 * PI * gamma_hz_per_t
}

/// Proton gyromagnetic ratio in rad s⁻¹ T⁻¹.
pub fn proton_gamma() -> f64 {
    gyro_from_hz(PROTON_GAMMA_HZ_PER_T)
}

//! Brute-force references for the closed forms used elsewhere in the crate.
//!
//! Nothing here is fast. Each routine solves the underlying model directly
//! (exact 2×2 propagators, a numeric Liouvillian null vector, explicit
//! quantum channels, per-spin sums) so it can be compared against the
//! closed-form expressions in the test-suite and in [`crate::selfcheck`].

mod quadrature;

pub use quadrature::{gauss_average_adaptive, gauss_average_numeric, gauss_hermite, GaussHermiteRule};

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;

use crate::ensemble::SampleGeometry;
use crate::error::{Error, Result};
use crate::fluxqubit::{spin_to_qubit_ac_kernel, spin_to_qubit_dc_kernel, Point, QubitParams};
use crate::rfdrive::{averaged_depolarization, DriveEnvironment, RfLine};

type C = Complex64;
pub type Matrix2c = Matrix2<C>;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

pub fn sigma_x() -> Matrix2c {
    Matrix2c::new(ZERO, ONE, ONE, ZERO)
}

pub fn sigma_y() -> Matrix2c {
    Matrix2c::new(ZERO, -I, I, ZERO)
}

pub fn sigma_z() -> Matrix2c {
    Matrix2c::new(ONE, ZERO, ZERO, -ONE)
}

/// exp(−i·H·t) for H = ½(v·σ), via cos/sin of the Bloch-vector norm.
pub fn su2_propagator(v: [f64; 3], t: f64) -> Matrix2c {
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if norm == 0.0 {
        return Matrix2c::identity();
    }
    let angle = 0.5 * norm * t;
    let (s, c) = angle.sin_cos();
    let n = [v[0] / norm, v[1] / norm, v[2] / norm];
    let axis = sigma_x() * C::from(n[0]) + sigma_y() * C::from(n[1]) + sigma_z() * C::from(n[2]);
    Matrix2c::identity() * C::from(c) - axis * C::new(0.0, s)
}

/// A single-qubit density matrix, checked to be a valid state after every
/// operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelState {
    rho: Matrix2c,
}

/// Tolerance on trace, Hermiticity and positivity.
pub const STATE_TOLERANCE: f64 = 1e-12;

impl TwoLevelState {
    pub fn from_matrix(rho: Matrix2c) -> Result<Self> {
        let s = Self { rho };
        s.check()?;
        Ok(s)
    }

    /// |ψ⟩⟨ψ| for a normalized `psi`.
    pub fn pure(psi: [C; 2]) -> Result<Self> {
        let norm = (psi[0].norm_sqr() + psi[1].norm_sqr()).sqrt();
        let a = psi[0] / norm;
        let b = psi[1] / norm;
        Self::from_matrix(Matrix2c::new(a * a.conj(), a * b.conj(), b * a.conj(), b * b.conj()))
    }

    /// σ_z = +1 state.
    pub fn up() -> Self {
        Self { rho: Matrix2c::new(ONE, ZERO, ZERO, ZERO) }
    }

    pub fn maximally_mixed() -> Self {
        Self { rho: Matrix2c::identity() * C::from(0.5) }
    }

    pub fn matrix(&self) -> &Matrix2c {
        &self.rho
    }

    fn check(&self) -> Result<()> {
        let r = &self.rho;
        let trace_err = (r[(0, 0)] + r[(1, 1)] - ONE).norm();
        let herm_err = (r - r.adjoint()).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        // Eigenvalues of a Hermitian 2×2: t/2 ± √((a−d)²/4 + |b|²).
        let a = r[(0, 0)].re;
        let d = r[(1, 1)].re;
        let disc = (0.25 * (a - d).powi(2) + r[(0, 1)].norm_sqr()).sqrt();
        let min_eig = 0.5 * (a + d) - disc;
        if trace_err > STATE_TOLERANCE || herm_err > STATE_TOLERANCE || min_eig < -STATE_TOLERANCE {
            return Err(Error::InvalidParameter {
                name: "density_matrix",
                reason: format!(
                    "trace error {trace_err:.2e}, Hermiticity error {herm_err:.2e}, smallest eigenvalue {min_eig:.2e}"
                ),
            });
        }
        Ok(())
    }

    pub fn evolve(&self, u: &Matrix2c) -> Result<Self> {
        Self::from_matrix(u * self.rho * u.adjoint())
    }

    /// Phase-flip channel ρ → pρ + (1−p)σ_zρσ_z.
    pub fn dephase(&self, p: f64) -> Result<Self> {
        let z = sigma_z();
        Self::from_matrix(self.rho * C::from(p) + z * self.rho * z * C::from(1.0 - p))
    }

    /// Depolarizing channel ρ → (1−η)ρ + η·I/2.
    pub fn depolarize(&self, eta: f64) -> Result<Self> {
        Self::from_matrix(self.rho * C::from(1.0 - eta) + Matrix2c::identity() * C::from(0.5 * eta))
    }

    /// tr(ρ·A).
    pub fn expectation(&self, op: &Matrix2c) -> C {
        (self.rho * op).trace()
    }

    /// Probability of projecting onto the +y eigenstate.
    pub fn prob_plus_y(&self) -> f64 {
        let proj = (Matrix2c::identity() + sigma_y()) * C::from(0.5);
        self.expectation(&proj).re
    }
}

/// Ramsey probability from explicit evolution: π/2 preparation into |+x⟩,
/// free precession at Δω for τ, σ_z dephasing with p = ½ + ½e^(−Γτ),
/// depolarizing read-out with η = 1 − V, then projection onto |+y⟩.
pub fn ramsey_bruteforce(detuning: f64, tau: f64, dephasing_rate: f64, visibility: f64) -> Result<f64> {
    let h = C::from(std::f64::consts::FRAC_1_SQRT_2);
    let state = TwoLevelState::pure([h, h])?
        .evolve(&su2_propagator([0.0, 0.0, detuning], tau))?
        .dephase(0.5 + 0.5 * (-dephasing_rate * tau).exp())?
        .depolarize(1.0 - visibility)?;
    Ok(state.prob_plus_y())
}

/// Initial state of the nuclear spin in the decoupling oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinState {
    /// +1 eigenstate of σ_x.
    Plus,
    /// −1 eigenstate of σ_x.
    Minus,
    /// I/2.
    Mixed,
}

fn dd_block_propagators(larmor: f64, coupling: f64, tau: f64) -> (Matrix2c, Matrix2c) {
    let h0 = su2_propagator([coupling, 0.0, larmor], 0.5 * tau);
    let h1 = su2_propagator([-coupling, 0.0, larmor], 0.5 * tau);
    (h1 * h0, h0 * h1)
}

fn power(m: &Matrix2c, n: u32) -> Matrix2c {
    (0..n).fold(Matrix2c::identity(), |acc, _| m * acc)
}

/// 1 − P for the decoupling sequence, computed as ¼‖(U_aⁿ − U_bⁿ)ψ‖²
/// (averaged over the spin state) so that tiny responses suffer no
/// cancellation.
///
/// The spin Hamiltonians are H₀ = ω/2·σ_z + c/2·σ_x and H₁ with −c; each block
/// is U_a = e^(−iH₁τ/2)e^(−iH₀τ/2), U_b = e^(−iH₀τ/2)e^(−iH₁τ/2).
pub fn dd_response_bruteforce(larmor: f64, coupling: f64, tau: f64, n: u32, spin: SpinState) -> f64 {
    let (ua, ub) = dd_block_propagators(larmor, coupling, tau);
    let diff = power(&ua, n) - power(&ub, n);
    let s = C::from(std::f64::consts::FRAC_1_SQRT_2);
    let along = |psi: [C; 2]| {
        let v = diff * nalgebra::Vector2::new(psi[0], psi[1]);
        0.25 * (v[0].norm_sqr() + v[1].norm_sqr())
    };
    match spin {
        SpinState::Plus => along([s, s]),
        SpinState::Minus => along([s, -s]),
        SpinState::Mixed => 0.5 * (along([ONE, ZERO]) + along([ZERO, ONE])),
    }
}

/// P = ½ + ¼⟨ψ|(U_a†ⁿU_bⁿ + U_b†ⁿU_aⁿ)|ψ⟩ from exact propagators.
pub fn dd_signal_bruteforce(larmor: f64, coupling: f64, tau: f64, n: u32, spin: SpinState) -> f64 {
    let (ua, ub) = dd_block_propagators(larmor, coupling, tau);
    let w = power(&ua, n).adjoint() * power(&ub, n);
    let rho = match spin {
        SpinState::Plus => TwoLevelState::pure([ONE, ONE]).expect("valid state"),
        SpinState::Minus => TwoLevelState::pure([ONE, -ONE]).expect("valid state"),
        SpinState::Mixed => TwoLevelState::maximally_mixed(),
    };
    0.5 + 0.5 * rho.expectation(&w).re
}

fn kron(a: &Matrix2c, b: &Matrix2c) -> Matrix4<C> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Residual and solution of [`lindblad_steady_state_numeric`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    /// ⟨σ_z⟩ of the steady state.
    pub sigma_z: f64,
    /// ‖𝓛ρ‖₂ in units of the largest rate.
    pub residual: f64,
}

/// Steady state of the driven, relaxing spin from the null vector of the
/// 4×4 Liouvillian. H = δω/2·σ_z + λσ_x; jump operators √(Γ(1−s))σ₋ and
/// √(Γs)σ₊, with σ₊ raising into the σ_z = +1 state.
pub fn lindblad_steady_state_numeric(lambda: f64, detuning: f64, relaxation: f64, s: f64) -> Result<SteadyState> {
    let scale = lambda.abs().max(detuning.abs()).max(relaxation.abs());
    if scale == 0.0 {
        return Err(Error::NonUniqueSteadyState(0.0, 0.0));
    }
    let (lam, dw, g) = (lambda / scale, detuning / scale, relaxation / scale);
    let h = sigma_z() * C::from(0.5 * dw) + sigma_x() * C::from(lam);
    let raise = Matrix2c::new(ZERO, ONE, ZERO, ZERO);
    let lower = raise.transpose();
    let id = Matrix2c::identity();
    // Column-stacked vectorization: vec(AρB) = (Bᵀ ⊗ A) vec(ρ).
    let mut liouv = (kron(&id, &h) - kron(&h.transpose(), &id)) * (-I);
    for (op, rate) in [(lower, g * (1.0 - s)), (raise, g * s)] {
        let l = op * C::from(rate.max(0.0).sqrt());
        let ldl = l.adjoint() * l;
        liouv += kron(&l.conjugate(), &l) - kron(&id, &ldl) * C::from(0.5) - kron(&ldl.transpose(), &id) * C::from(0.5);
    }
    let svd = liouv.svd(true, true);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let (smallest, next) = (svd.singular_values[order[0]], svd.singular_values[order[1]]);
    if next < 1e-10 {
        return Err(Error::NonUniqueSteadyState(smallest, next));
    }
    let v_t = svd.v_t.expect("requested right singular vectors");
    let null = Vector4::from_fn(|i, _| v_t[(order[0], i)].conj());
    let trace = null[0] + null[3];
    let rho_vec = null / trace;
    let residual = (liouv * rho_vec).norm();
    let rho = Matrix2c::new(rho_vec[0], rho_vec[2], rho_vec[1], rho_vec[3]);
    let state = TwoLevelState::from_matrix((rho + rho.adjoint()) * C::from(0.5))?;
    Ok(SteadyState { sigma_z: state.expectation(&sigma_z()).re, residual })
}

/// Spins on a regular `counts[0] × counts[1] × counts[2]` lattice of cell
/// centres filling `geom`, each standing for ρ·V/M spins.
fn lattice(geom: &SampleGeometry, counts: [usize; 3]) -> (Vec<Point>, f64) {
    let d = [geom.width_x / counts[0] as f64, geom.height / counts[1] as f64, geom.width_z / counts[2] as f64];
    let mut points = Vec::with_capacity(counts.iter().product());
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            for k in 0..counts[2] {
                points.push(Point::new(
                    geom.center_x - 0.5 * geom.width_x + (i as f64 + 0.5) * d[0],
                    geom.standoff + (j as f64 + 0.5) * d[1],
                    geom.center_z - 0.5 * geom.width_z + (k as f64 + 0.5) * d[2],
                ));
            }
        }
    }
    (points, d[0] * d[1] * d[2])
}

/// B_DC by summing every spin site individually, each weighted by the RF
/// saturation evaluated from its full 3D position (or 1 when `line` is
/// `None`).
pub fn dc_field_per_spin(
    qubit: &QubitParams,
    gamma: f64,
    geom: &SampleGeometry,
    counts: [usize; 3],
    density: f64,
    polarization: f64,
    line: Option<(&RfLine, &DriveEnvironment)>,
) -> Result<f64> {
    let (points, cell) = lattice(geom, counts);
    let mut total = 0.0;
    for p in &points {
        let saturation = match line {
            Some((l, drive)) => averaged_depolarization(l.coupling(p, gamma)?, drive.relaxation, drive.linewidth),
            None => 1.0,
        };
        total += density * cell * polarization * spin_to_qubit_dc_kernel(qubit, gamma, p)? * saturation;
    }
    Ok(total)
}

/// B_AC = √(Σ_j (B_⊥,j)²) over individual spin sites.
pub fn ac_field_per_spin(
    qubit: &QubitParams,
    gamma: f64,
    geom: &SampleGeometry,
    counts: [usize; 3],
    density: f64,
) -> Result<f64> {
    let (points, cell) = lattice(geom, counts);
    let mut total = 0.0;
    for p in &points {
        total += density * cell * spin_to_qubit_ac_kernel(qubit, gamma, p)?.powi(2);
    }
    Ok(total.sqrt())
}

//! Sample geometry, voxel discretization, thermal polarization and the
//! aggregation of per-spin kernels into the effective fields at the qubit.

use serde::{Deserialize, Serialize};

use crate::constants::{proton_gamma, HBAR, KB};
use crate::error::{ensure, Error, Result};
use crate::exec::Execution;
use crate::fluxqubit::{spin_to_qubit_kernels, Point, QubitParams};
use crate::rfdrive::{averaged_depolarization, DriveEnvironment, RfLine, RfSide};

/// Maximum number of voxels a grid may hold.
pub const MAX_VOXELS: u64 = 100_000_000;

/// How the thermal polarization is evaluated from the Boltzmann distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolarizationMode {
    /// High-temperature form ħω/(k_B T).
    #[default]
    Paper,
    /// tanh(ħω/(2 k_B T)).
    Exact,
}

/// Spin environment shared by both protocols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    /// Temperature (K).
    pub temperature: f64,
    /// Static field B_ex along ẑ (T).
    pub b_ex: f64,
    /// Spin gyromagnetic ratio (rad s⁻¹ T⁻¹).
    pub gamma: f64,
    /// Gaussian linewidth Γ̃ (s⁻¹).
    pub linewidth: f64,
    /// Longitudinal relaxation rate Γ (s⁻¹).
    pub relaxation: f64,
    pub polarization: PolarizationMode,
}

impl Default for Environment {
    fn default() -> Self {
        let linewidth = 1e4;
        Self {
            temperature: 20e-3,
            b_ex: 4e-3,
            gamma: proton_gamma(),
            linewidth,
            relaxation: 1e-3 * linewidth,
            polarization: PolarizationMode::Paper,
        }
    }
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        ensure(self.temperature > 0.0, "environment.temperature", || format!("must be > 0, got {}", self.temperature))?;
        ensure(self.b_ex > 0.0, "environment.b_ex", || format!("must be > 0, got {}", self.b_ex))?;
        ensure(self.gamma > 0.0, "environment.gamma", || format!("must be > 0, got {}", self.gamma))?;
        self.drive().validate()
    }

    /// Larmor frequency ω = γ B_ex.
    pub fn larmor(&self) -> f64 {
        self.gamma * self.b_ex
    }

    pub fn drive(&self) -> DriveEnvironment {
        DriveEnvironment { relaxation: self.relaxation, linewidth: self.linewidth }
    }

    /// Thermal polarization in the configured mode.
    pub fn thermal_polarization(&self) -> f64 {
        thermal_polarization(self, self.polarization)
    }
}

/// Thermal spin polarization p_th at ω = γB_ex and temperature T.
pub fn thermal_polarization(env: &Environment, mode: PolarizationMode) -> f64 {
    let x = HBAR * env.larmor() / (KB * env.temperature);
    match mode {
        PolarizationMode::Paper => x,
        PolarizationMode::Exact => (0.5 * x).tanh(),
    }
}

/// Position of a small sample relative to the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Above the middle of the x̂-parallel edge nearest the RF line.
    A,
    /// Above the loop centre.
    B,
    /// Above the middle of a ẑ-parallel edge.
    C,
    /// Above the middle of the x̂-parallel edge away from the RF line; an
    /// alternative reading of placement (c).
    CFar,
}

impl Placement {
    pub const ALL: [Placement; 4] = [Placement::A, Placement::B, Placement::C, Placement::CFar];

    pub fn label(self) -> &'static str {
        match self {
            Placement::A => "a",
            Placement::B => "b",
            Placement::C => "c",
            Placement::CFar => "c-far",
        }
    }

    /// Centre `(x, z)` of the sample footprint.
    pub fn center(self, loop_side: f64, rf_side: RfSide) -> (f64, f64) {
        let half = 0.5 * loop_side;
        match self {
            Placement::A => (0.0, rf_side.sign() * half),
            Placement::B => (0.0, 0.0),
            Placement::C => (half, 0.0),
            Placement::CFar => (0.0, -rf_side.sign() * half),
        }
    }
}

impl std::str::FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Placement::ALL.into_iter().find(|p| p.label() == s).ok_or_else(|| Error::InvalidParameter {
            name: "placement",
            reason: format!("expected one of a, b, c, c-far; got `{s}`"),
        })
    }
}

/// Axis-aligned sample box resting at height `standoff` above the chip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGeometry {
    /// Extent along x (m).
    pub width_x: f64,
    /// Extent along y, i.e. the sample thickness (m).
    pub height: f64,
    /// Extent along z (m).
    pub width_z: f64,
    pub center_x: f64,
    pub center_z: f64,
    /// Stand-off h of the bottom face from the chip plane (m).
    pub standoff: f64,
}

impl SampleGeometry {
    /// The 2.5L × 2L × 2.5L (x × y × z) block centred over the loop.
    pub fn large(loop_side: f64, standoff: f64) -> Self {
        Self {
            width_x: 2.5 * loop_side,
            height: 2.0 * loop_side,
            width_z: 2.5 * loop_side,
            center_x: 0.0,
            center_z: 0.0,
            standoff,
        }
    }

    /// An `l × h′ × l` sample at `placement`.
    pub fn small(placement: Placement, loop_side: f64, size: f64, height: f64, standoff: f64, rf_side: RfSide) -> Self {
        let (center_x, center_z) = placement.center(loop_side, rf_side);
        Self { width_x: size, height, width_z: size, center_x, center_z, standoff }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sample.width_x", self.width_x),
            ("sample.height", self.height),
            ("sample.width_z", self.width_z),
            ("sample.standoff", self.standoff),
        ] {
            ensure(v > 0.0 && v.is_finite(), name, || format!("must be finite and > 0, got {v}"))?;
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.width_x * self.height * self.width_z
    }

    /// Edge used when none is configured: `min(h, L/20)`, further capped so a
    /// thin or narrow sample still gets at least two layers and eight cells
    /// across.
    pub fn default_voxel_edge(&self, loop_side: f64) -> f64 {
        self.standoff.min(loop_side / 20.0).min(self.height / 2.0).min(self.width_x.min(self.width_z) / 8.0)
    }
}

/// Uniform midpoint grid over a [`SampleGeometry`].
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub zs: Vec<f64>,
    /// Voxel edge lengths along x, y, z.
    pub cell: [f64; 3],
}

fn axis(start: f64, extent: f64, n: usize) -> Vec<f64> {
    let step = extent / n as f64;
    (0..n).map(|i| start + (i as f64 + 0.5) * step).collect()
}

fn cells_along(extent: f64, edge: f64) -> u64 {
    // Guard against 2.0000000000000004 style ratios adding a cell.
    ((extent / edge) * (1.0 - 1e-12)).ceil().max(1.0) as u64
}

impl VoxelGrid {
    pub fn len(&self) -> u64 {
        (self.xs.len() * self.ys.len() * self.zs.len()) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn voxel_volume(&self) -> f64 {
        self.cell[0] * self.cell[1] * self.cell[2]
    }

    pub fn total_volume(&self) -> f64 {
        self.voxel_volume() * self.len() as f64
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.xs.len(), self.ys.len(), self.zs.len()]
    }

    /// All voxel centres, x fastest.
    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        self.zs
            .iter()
            .flat_map(move |&z| self.ys.iter().flat_map(move |&y| self.xs.iter().map(move |&x| Point::new(x, y, z))))
    }
}

/// Splits `geom` into cubes of edge at most `edge`.
pub fn discretize(geom: &SampleGeometry, edge: f64) -> Result<VoxelGrid> {
    geom.validate()?;
    ensure(edge > 0.0 && edge.is_finite(), "numerics.voxel_edge", || format!("must be finite and > 0, got {edge}"))?;
    let n = [cells_along(geom.width_x, edge), cells_along(geom.height, edge), cells_along(geom.width_z, edge)];
    let requested = n[0].saturating_mul(n[1]).saturating_mul(n[2]);
    if requested > MAX_VOXELS {
        return Err(Error::Capacity { requested, limit: MAX_VOXELS });
    }
    let (nx, ny, nz) = (n[0] as usize, n[1] as usize, n[2] as usize);
    Ok(VoxelGrid {
        xs: axis(geom.center_x - 0.5 * geom.width_x, geom.width_x, nx),
        ys: axis(geom.standoff, geom.height, ny),
        zs: axis(geom.center_z - 0.5 * geom.width_z, geom.width_z, nz),
        cell: [geom.width_x / nx as f64, geom.height / ny as f64, geom.width_z / nz as f64],
    })
}

/// Kernel sums along one x-row of voxels at fixed `(y, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Column {
    pub y: f64,
    pub z: f64,
    /// Σ_x V_vox · B_z^(spin) (T m³).
    pub dc: f64,
    /// Σ_x V_vox · (B_⊥^(spin))² (T² m³).
    pub ac_sq: f64,
}

/// Precomputed kernels for one (qubit, grid, γ) triple.
///
/// The RF coupling depends only on `(y, z)` because the line runs along x, so
/// the kernels are stored already summed along x. This keeps the cache at
/// `ny·nz` entries while every downstream sum stays exact.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCache {
    pub columns: Vec<Column>,
    /// Σ_vox V_vox · (B_⊥^(spin))² (T² m³).
    pub ac_total: f64,
    pub voxels: u64,
    pub cell: [f64; 3],
}

impl KernelCache {
    /// Evaluates both kernels at every voxel centre. Columns are computed
    /// independently by `exec`; all sums run in a fixed order so the result is
    /// bit-identical for any thread count.
    pub fn build(qubit: &QubitParams, gamma: f64, grid: &VoxelGrid, exec: Execution) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyGrid("voxel grid has no cells"));
        }
        let volume = grid.voxel_volume();
        let nz = grid.zs.len();
        let columns = exec.map(grid.ys.len() * nz, |k| -> Result<Column> {
            let (y, z) = (grid.ys[k / nz], grid.zs[k % nz]);
            let mut dc = 0.0;
            let mut ac_sq = 0.0;
            for &x in &grid.xs {
                let (bz, bperp) = spin_to_qubit_kernels(qubit, gamma, &Point::new(x, y, z))?;
                dc += bz;
                ac_sq += bperp * bperp;
            }
            Ok(Column { y, z, dc: dc * volume, ac_sq: ac_sq * volume })
        });
        let columns = columns.into_iter().collect::<Result<Vec<_>>>()?;
        let ac_total = columns.iter().map(|c| c.ac_sq).sum();
        Ok(Self { columns, ac_total, voxels: grid.len(), cell: grid.cell })
    }

    /// Largest voxel edge.
    pub fn voxel_edge(&self) -> f64 {
        self.cell.iter().copied().fold(0.0, f64::max)
    }

    /// Σ over voxels of V·B_z^(spin)·s(r), with `s` the saturation profile.
    pub fn weighted_dc(&self, profile: &SaturationProfile) -> Result<f64> {
        let mut sum = 0.0;
        for c in &self.columns {
            sum += c.dc * profile.fraction(c.y, c.z)?;
        }
        Ok(sum)
    }

    /// Σ over voxels of V·|B_z^(spin)|·s(r); the scale against which a
    /// cancelled [`weighted_dc`](Self::weighted_dc) is judged.
    pub fn weighted_dc_abs(&self, profile: &SaturationProfile) -> Result<f64> {
        let mut sum = 0.0;
        for c in &self.columns {
            sum += c.dc.abs() * profile.fraction(c.y, c.z)?;
        }
        Ok(sum)
    }

    /// Effective DC field B_DC = ρ·p_th·Σ V·B_z^(spin)·s(r) (T).
    pub fn dc_field(&self, density: f64, polarization: f64, profile: &SaturationProfile) -> Result<f64> {
        Ok(density * polarization * self.weighted_dc(profile)?)
    }

    /// Effective AC field B_AC = √(ρ·Σ V·(B_⊥^(spin))²) (T).
    pub fn ac_field(&self, density: f64) -> f64 {
        (density * self.ac_total).sqrt()
    }
}

/// Fraction of the thermal polarization removed at each spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SaturationProfile {
    /// No drive.
    None,
    /// Every spin fully saturated.
    Full,
    /// Steady state under an RF line, averaged over the Gaussian linewidth.
    Driven { line: RfLine, gamma: f64, drive: DriveEnvironment },
}

impl SaturationProfile {
    /// Saturation fraction at height `y`, position `z` (independent of x).
    pub fn fraction(&self, y: f64, z: f64) -> Result<f64> {
        match self {
            SaturationProfile::None => Ok(0.0),
            SaturationProfile::Full => Ok(1.0),
            SaturationProfile::Driven { line, gamma, drive } => {
                let lambda = line.coupling_yz(y, z, *gamma)?;
                Ok(averaged_depolarization(lambda, drive.relaxation, drive.linewidth))
            }
        }
    }
}

/// Effective DC field B_DC (T) of density `density` (m⁻³) over `cache`.
pub fn dc_signal_field(
    cache: &KernelCache,
    density: f64,
    polarization: f64,
    profile: &SaturationProfile,
) -> Result<f64> {
    cache.dc_field(density, polarization, profile)
}

/// Effective AC field B_AC (T) of density `density` (m⁻³) over `cache`.
pub fn ac_signal_field(cache: &KernelCache, density: f64) -> f64 {
    cache.ac_field(density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ac_field_per_spin, dc_field_per_spin};
    use crate::rfdrive::OffsetReference;
    use approx::assert_relative_eq;

    fn coarse_cache(geom: &SampleGeometry, edge: f64) -> (QubitParams, KernelCache, VoxelGrid) {
        let q = QubitParams::default();
        let grid = discretize(geom, edge).unwrap();
        let cache = KernelCache::build(&q, proton_gamma(), &grid, Execution::Sequential).unwrap();
        (q, cache, grid)
    }

    #[test]
    fn thermal_polarization_examples() {
        let env = Environment::default();
        assert_relative_eq!(thermal_polarization(&env, PolarizationMode::Paper), 4.09e-4, max_relative = 2e-3);
        assert_relative_eq!(thermal_polarization(&env, PolarizationMode::Exact), 2.045e-4, max_relative = 2e-3);
        let hot = Environment { temperature: 1e12, ..env };
        assert!(thermal_polarization(&hot, PolarizationMode::Paper) < 1e-15);
        assert!(thermal_polarization(&hot, PolarizationMode::Exact) < 1e-15);
    }

    #[test]
    fn discretize_examples() {
        let unit =
            SampleGeometry { width_x: 1.0, height: 1.0, width_z: 1.0, center_x: 0.0, center_z: 0.0, standoff: 1.0 };
        let g = discretize(&unit, 0.5).unwrap();
        assert_eq!(g.len(), 8);
        assert_relative_eq!(g.total_volume(), 1.0, max_relative = 1e-12);

        let large = SampleGeometry::large(2e-6, 0.1e-6);
        let g = discretize(&large, 50e-9).unwrap();
        assert_eq!(g.shape(), [100, 80, 100]);
        assert_relative_eq!(g.total_volume(), large.volume(), max_relative = 1e-12);
        assert!(g.ys[0] > large.standoff);
        assert_relative_eq!(large.default_voxel_edge(2e-6), 0.1e-6);
    }

    #[test]
    fn capacity_limit() {
        let large = SampleGeometry::large(10e-6, 0.1e-6);
        match discretize(&large, 10e-9) {
            Err(Error::Capacity { requested, limit }) => {
                assert!(requested > limit);
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
        assert!(discretize(&large, 0.0).is_err());
    }

    #[test]
    fn placements() {
        assert_eq!(Placement::A.center(2.0, RfSide::Positive), (0.0, 1.0));
        assert_eq!(Placement::A.center(2.0, RfSide::Negative), (0.0, -1.0));
        assert_eq!(Placement::C.center(2.0, RfSide::Positive), (1.0, 0.0));
        assert_eq!("c-far".parse::<Placement>().unwrap(), Placement::CFar);
        assert!("d".parse::<Placement>().is_err());
    }

    #[test]
    fn zero_drive_and_symmetric_saturation() {
        let geom = SampleGeometry::large(2e-6, 0.1e-6);
        let (_, cache, _) = coarse_cache(&geom, 0.25e-6);
        assert_eq!(cache.dc_field(1e27, 4e-4, &SaturationProfile::None).unwrap(), 0.0);
        let full = cache.weighted_dc(&SaturationProfile::Full).unwrap();
        let scale = cache.weighted_dc_abs(&SaturationProfile::Full).unwrap();
        assert!(full.abs() < 1e-12 * scale, "{full} vs {scale}");
    }

    #[test]
    fn scaling_laws() {
        let geom = SampleGeometry::large(2e-6, 0.1e-6);
        let (q, cache, _) = coarse_cache(&geom, 0.25e-6);
        let line = RfLine::placed(q.loop_side, 2e-6, OffsetReference::Edge, RfSide::Positive, 1e-3).unwrap();
        let profile = SaturationProfile::Driven { line, gamma: proton_gamma(), drive: Environment::default().drive() };
        let b1 = cache.dc_field(1e27, 4e-4, &profile).unwrap();
        assert!(b1 != 0.0);
        assert_eq!(cache.dc_field(2e27, 4e-4, &profile).unwrap(), 2.0 * b1);
        assert_relative_eq!(cache.dc_field(1e27, 8e-4, &profile).unwrap(), 2.0 * b1, max_relative = 1e-15);
        assert_eq!(cache.ac_field(0.0), 0.0);
        assert_eq!(cache.ac_field(4e27), 2.0 * cache.ac_field(1e27));
    }

    #[test]
    fn mirror_flips_dc_keeps_ac() {
        let geom = SampleGeometry::large(2e-6, 0.1e-6);
        let (q, cache, _) = coarse_cache(&geom, 0.25e-6);
        let env = Environment::default();
        let profile = |side| SaturationProfile::Driven {
            line: RfLine::placed(q.loop_side, 2e-6, OffsetReference::Edge, side, 1e-3).unwrap(),
            gamma: env.gamma,
            drive: env.drive(),
        };
        let plus = cache.dc_field(1e27, 4e-4, &profile(RfSide::Positive)).unwrap();
        let minus = cache.dc_field(1e27, 4e-4, &profile(RfSide::Negative)).unwrap();
        assert_relative_eq!(plus, -minus, max_relative = 1e-10);
    }

    #[test]
    fn rebuild_is_bit_identical() {
        let geom = SampleGeometry::large(2e-6, 0.1e-6);
        let (_, a, _) = coarse_cache(&geom, 0.25e-6);
        let (_, b, _) = coarse_cache(&geom, 0.25e-6);
        assert_eq!(a, b);
        #[cfg(feature = "parallel")]
        {
            let grid = discretize(&geom, 0.25e-6).unwrap();
            let c = KernelCache::build(&QubitParams::default(), proton_gamma(), &grid, Execution::Parallel).unwrap();
            assert_eq!(a, c);
        }
    }

    #[test]
    fn column_cache_matches_per_spin_sums() {
        let setup = crate::Setup::default();
        let geom = SampleGeometry::small(Placement::A, setup.qubit.loop_side, 1e-6, 0.2e-6, 0.1e-6, RfSide::Positive);
        let grid = discretize(&geom, 0.05e-6).unwrap();
        let counts = grid.shape();
        let cache = KernelCache::build(&setup.qubit, setup.env.gamma, &grid, Execution::Sequential).unwrap();
        let (rho, p) = (3e27, 4e-4);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();

        let full = cache.dc_field(rho, p, &SaturationProfile::Full).unwrap();
        let reference = dc_field_per_spin(&setup.qubit, setup.env.gamma, &geom, counts, rho, p, None).unwrap();
        assert!(rel(full, reference) < 1e-10, "{full} vs {reference}");

        let current = crate::rfdrive::current_from_normalized(3.0, setup.env.gamma, setup.env.linewidth);
        let line = setup.rf_line(current).unwrap();
        let drive = setup.env.drive();
        let driven = cache.dc_field(rho, p, &setup.drive_profile(current).unwrap()).unwrap();
        let reference =
            dc_field_per_spin(&setup.qubit, setup.env.gamma, &geom, counts, rho, p, Some((&line, &drive))).unwrap();
        assert!(rel(driven, reference) < 1e-10, "{driven} vs {reference}");

        let ac = cache.ac_field(rho);
        let reference = ac_field_per_spin(&setup.qubit, setup.env.gamma, &geom, counts, rho).unwrap();
        assert!(rel(ac, reference) < 1e-10, "{ac} vs {reference}");
    }
}

//! Parameter sweeps behind each figure, plus user-defined grids.
//!
//! Every plan returns one or more [`Table`]s whose rows are ordered by the
//! sweep axes. Independent points run through [`Execution::map`], which keeps
//! index order, so the output does not depend on scheduling.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::DRIVE_REFERENCE_LENGTH;
use crate::ensemble::{KernelCache, Placement};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::numeric::{linspace, logspace};
use crate::rfdrive::{
    averaged_depolarization, current_from_normalized, drive_map, normalized_current, DriveMapContext, RfLine,
};
use crate::sensitivity::{min_density_with_cache, min_spin_number, optimize_drive, Scheme, SensitivityResult, Setup};
use crate::table::{Cell, Table};

/// Built-in figure plans.
pub const PLAN_NAMES: [&str; 6] = ["fig4", "fig5", "fig6", "fig7", "fig8", "fig10"];

/// A user-defined grid of minimum-density evaluations over the large sample.
/// Every axis must be non-empty; rows iterate loop side, stand-off, field and
/// scheme, outermost first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomPlan {
    pub loop_side: Vec<f64>,
    pub standoff: Vec<f64>,
    pub b_ex: Vec<f64>,
    pub schemes: Vec<Scheme>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig10,
    Custom(CustomPlan),
}

impl std::str::FromStr for Plan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fig4" => Plan::Fig4,
            "fig5" => Plan::Fig5,
            "fig6" => Plan::Fig6,
            "fig7" => Plan::Fig7,
            "fig8" => Plan::Fig8,
            "fig10" => Plan::Fig10,
            other => return Err(Error::UnknownPlan(other.into())),
        })
    }
}

/// Axis values used by the built-in plans.
pub mod axes {
    use super::*;

    /// z offset from the RF line in units of the reference length R.
    pub fn fig4_offset() -> Vec<f64> {
        linspace(-5.0, 5.0, 101)
    }

    /// Normalized currents γμ₀I/(Γ̃R), with an undriven row first.
    pub fn fig4_currents() -> Vec<f64> {
        let mut c = vec![0.0];
        c.extend(logspace(1e-2, 1e2, 41));
        c
    }

    /// RF offsets z_RF (m).
    pub fn fig5_offsets() -> Vec<f64> {
        linspace(0.5e-6, 5e-6, 19)
    }

    /// Normalized currents, with an undriven row first.
    pub fn fig5_currents() -> Vec<f64> {
        let mut c = vec![0.0];
        c.extend(logspace(1e-2, 1e2, 41));
        c
    }

    pub fn fig6_standoff() -> Vec<f64> {
        logspace(0.1e-6, 2e-6, 7)
    }

    pub const FIG6_LOOP_SIDES: [f64; 3] = [2e-6, 6e-6, 10e-6];

    pub fn fig7_field() -> Vec<f64> {
        linspace(0.5e-3, 5e-3, 46)
    }

    pub fn fig8_field() -> Vec<f64> {
        linspace(1e-3, 10e-3, 37)
    }

    pub const FIG8_PULSES: [u32; 6] = [1, 2, 4, 6, 8, 10];

    pub fn fig10_size() -> Vec<f64> {
        logspace(0.1e-6, 10e-6, 21)
    }

    pub const FIG10_PLACEMENTS: [Placement; 3] = [Placement::A, Placement::B, Placement::C];

    pub const FIG10_PULSES: u32 = 8;
}

/// Runs `plan` for `setup`.
pub fn run_plan(plan: &Plan, setup: &Setup, exec: Execution) -> Result<Vec<Table>> {
    setup.validate()?;
    match plan {
        Plan::Fig4 => fig4(setup).map(|t| vec![t]),
        Plan::Fig5 => fig5(setup, exec),
        Plan::Fig6 => fig6(setup, exec),
        Plan::Fig7 => fig7(setup, exec).map(|t| vec![t]),
        Plan::Fig8 => fig8(setup, exec).map(|t| vec![t]),
        Plan::Fig10 => fig10(setup, exec).map(|t| vec![t]),
        Plan::Custom(c) => custom(c, setup, exec).map(|t| vec![t]),
    }
}

const RESULT_COLUMNS: [(&str, &str); 13] = [
    ("rho_min", "m^-3"),
    ("rho_min_cm3", "cm^-3"),
    ("spin_number", ""),
    ("signal_field", "T"),
    ("uncertainty", "T"),
    ("tau", "s"),
    ("i_rf", "A"),
    ("normalized_current", ""),
    ("bisection_iterations", ""),
    ("log10_bracket", ""),
    ("voxel_edge", "m"),
    ("voxels", ""),
    ("status", ""),
];

fn result_cells(r: &Result<SensitivityResult>) -> Vec<Cell> {
    match r {
        Ok(r) => vec![
            r.density.into(),
            r.density_cm3.into(),
            r.spin_number.into(),
            r.field.into(),
            r.uncertainty.into(),
            r.tau.into(),
            r.rf_current.into(),
            r.normalized_current.into(),
            r.bisection_iterations.into(),
            r.log10_bracket.into(),
            r.voxel_edge.into(),
            r.voxels.into(),
            "ok".into(),
        ],
        Err(e) => {
            let mut cells = vec![Cell::Empty; RESULT_COLUMNS.len() - 1];
            cells.push(status_of(e).into());
            cells
        }
    }
}

/// One row per result, with the descriptive fields of each result leading.
pub fn result_table(name: &str, results: &[SensitivityResult]) -> Table {
    let mut t = with_result_columns(
        name,
        &[
            ("scheme", ""),
            ("n", ""),
            ("b_ex", "T"),
            ("loop_side", "m"),
            ("standoff", "m"),
            ("rf_offset", "m"),
            ("placement", ""),
            ("sample_size", "m"),
        ],
    );
    for r in results {
        let mut row: Vec<Cell> = vec![
            r.scheme.as_str().into(),
            r.n.map_or(Cell::Empty, Cell::from),
            r.b_ex.into(),
            r.loop_side.into(),
            r.standoff.into(),
            r.rf_offset.into(),
            r.placement.as_deref().map_or(Cell::Empty, Cell::from),
            r.sample_size.into(),
        ];
        row.extend(result_cells(&Ok(r.clone())));
        t.push(row);
    }
    t
}

fn status_of(e: &Error) -> &'static str {
    match e {
        Error::NoSignal(_) => "no-signal",
        Error::Bracket { .. } => "no-bracket",
        Error::OutOfRegime(_) => "out-of-regime",
        Error::Capacity { .. } => "capacity",
        Error::MissingCoherence(_) => "missing-coherence",
        _ => "error",
    }
}

fn with_result_columns(name: &str, leading: &[(&str, &str)]) -> Table {
    let mut cols = leading.to_vec();
    cols.extend_from_slice(&RESULT_COLUMNS);
    Table::new(name, &cols)
}

/// Depolarization ratio around the RF line, for spins at the stand-off
/// distance from it. Uses the configured I_RF only, if one is set.
fn fig4(setup: &Setup) -> Result<Table> {
    let env = &setup.env;
    let drive = env.drive();
    let currents: Vec<f64> = match setup.rf.current {
        Some(i) => vec![i],
        None => {
            axes::fig4_currents().into_iter().map(|c| current_from_normalized(c, env.gamma, env.linewidth)).collect()
        }
    };
    let mut t = Table::new(
        "fig4",
        &[("z_over_r", ""), ("normalized_current", ""), ("i_rf", "A"), ("lambda", "rad/s"), ("depolarization", "")],
    );
    for &i in &currents {
        let line = RfLine { z_wire: 0.0, current: i };
        for &zr in &axes::fig4_offset() {
            let lambda = line.coupling_yz(setup.standoff, zr * DRIVE_REFERENCE_LENGTH, env.gamma)?;
            let s = averaged_depolarization(lambda, drive.relaxation, drive.linewidth);
            t.push(vec![
                zr.into(),
                normalized_current(i, env.gamma, env.linewidth).into(),
                i.into(),
                lambda.into(),
                s.into(),
            ]);
        }
    }
    Ok(t)
}

fn fig5(setup: &Setup, exec: Execution) -> Result<Vec<Table>> {
    let cache = setup.kernel_cache(&setup.large_sample(), exec)?;
    let ctx = DriveMapContext {
        loop_side: setup.qubit.loop_side,
        gamma: setup.env.gamma,
        field_sensitivity: setup.qubit.field_sensitivity(),
        thermal_polarization: setup.env.thermal_polarization(),
        drive: setup.env.drive(),
        reference: setup.rf.reference,
        side: setup.rf.side,
    };
    let offsets = axes::fig5_offsets();
    let map = drive_map(&cache, &ctx, &offsets, &axes::fig5_currents(), exec)?;
    let global = map.normalized_global();
    let per_offset = map.normalized_per_offset();
    let (bi, bj) = map.argmax();
    let mut t = Table::new(
        "fig5_map",
        &[
            ("z_rf", "m"),
            ("normalized_current", ""),
            ("i_rf", "A"),
            ("detuning_per_density", "rad s^-1 m^3"),
            ("normalized_global", ""),
            ("normalized_per_offset", ""),
            ("is_argmax", ""),
        ],
    );
    for (i, &z) in map.offsets.iter().enumerate() {
        for (j, &c) in map.currents.iter().enumerate() {
            t.push(vec![
                z.into(),
                c.into(),
                current_from_normalized(c, ctx.gamma, ctx.drive.linewidth).into(),
                map.values[i][j].into(),
                global[i][j].into(),
                per_offset[i][j].into(),
                u32::from((i, j) == (bi, bj)).into(),
            ]);
        }
    }
    let ridge = exec.map(offsets.len(), |i| {
        let mut s = setup.clone();
        s.rf.offset = offsets[i];
        optimize_drive(&s, &cache)
    });
    let mut r = Table::new(
        "fig5_ridge",
        &[("z_rf", "m"), ("normalized_current", ""), ("i_rf", "A"), ("detuning_per_density", "rad s^-1 m^3")],
    );
    for (z, opt) in offsets.iter().zip(ridge) {
        let opt = opt?;
        let detuning = ctx.field_sensitivity * ctx.thermal_polarization * opt.weighted_dc;
        r.push(vec![(*z).into(), opt.normalized.into(), opt.current.into(), detuning.into()]);
    }
    Ok(vec![t, r])
}

fn fig6(setup: &Setup, exec: Execution) -> Result<Vec<Table>> {
    let standoffs = axes::fig6_standoff();
    let schemes = [Scheme::Ramsey, Scheme::Decoupling(1)];
    let mut t = with_result_columns("fig6", &[("loop_side", "m"), ("standoff", "m"), ("scheme", "")]);
    let mut ratios = Table::new("fig6_ratio", &[("loop_side", "m"), ("standoff", "m"), ("echo_over_ramsey", "")]);
    for &l in &axes::FIG6_LOOP_SIDES {
        for &h in &standoffs {
            let mut s = setup.clone();
            s.qubit.loop_side = l;
            s.standoff = h;
            let cache = s.kernel_cache(&s.large_sample(), exec)?;
            let results = exec.map(schemes.len(), |k| min_density_with_cache(&s, &cache, schemes[k]));
            for (scheme, r) in schemes.iter().zip(&results) {
                let mut row = vec![l.into(), h.into(), scheme.label().into()];
                row.extend(result_cells(r));
                t.push(row);
            }
            let ratio = match (&results[0], &results[1]) {
                (Ok(ram), Ok(echo)) => Cell::Num(echo.density / ram.density),
                _ => Cell::Empty,
            };
            ratios.push(vec![l.into(), h.into(), ratio]);
        }
    }
    Ok(vec![t, ratios])
}

fn field_sweep(
    name: &str,
    setup: &Setup,
    cache: &KernelCache,
    fields: &[f64],
    schemes: &[Scheme],
    exec: Execution,
) -> Table {
    let mut t = with_result_columns(name, &[("b_ex", "T"), ("scheme", ""), ("n", ""), ("omega_t2_over_4pi", "")]);
    let jobs = fields.len() * schemes.len();
    let results = exec.map(jobs, |k| {
        let mut s = setup.clone();
        s.env.b_ex = fields[k / schemes.len()];
        min_density_with_cache(&s, cache, schemes[k % schemes.len()])
    });
    for (k, r) in results.iter().enumerate() {
        let b = fields[k / schemes.len()];
        let scheme = schemes[k % schemes.len()];
        let (n, resonance) = match scheme {
            Scheme::Ramsey => (Cell::Empty, Cell::Empty),
            Scheme::Decoupling(n) => {
                let omega = setup.env.gamma * b;
                let res = setup.qubit.t2_for(n).map(|t2| omega * t2 / (4.0 * PI)).ok();
                (n.into(), res.into())
            }
        };
        let mut row = vec![b.into(), scheme.label().into(), n, resonance];
        row.extend(result_cells(r));
        t.push(row);
    }
    t
}

fn fig7(setup: &Setup, exec: Execution) -> Result<Table> {
    let cache = setup.kernel_cache(&setup.large_sample(), exec)?;
    Ok(field_sweep("fig7", setup, &cache, &axes::fig7_field(), &[Scheme::Ramsey, Scheme::Decoupling(1)], exec))
}

fn fig8(setup: &Setup, exec: Execution) -> Result<Table> {
    let cache = setup.kernel_cache(&setup.large_sample(), exec)?;
    let schemes: Vec<Scheme> = axes::FIG8_PULSES.iter().map(|&n| Scheme::Decoupling(n)).collect();
    Ok(field_sweep("fig8", setup, &cache, &axes::fig8_field(), &schemes, exec))
}

fn fig10(setup: &Setup, exec: Execution) -> Result<Table> {
    let sizes = axes::fig10_size();
    let placements = axes::FIG10_PLACEMENTS;
    let schemes = [Scheme::Ramsey, Scheme::Decoupling(axes::FIG10_PULSES)];
    let per_size = placements.len() * schemes.len();
    let results = exec.map(sizes.len() * per_size, |k| {
        let size = sizes[k / per_size];
        let placement = placements[(k % per_size) / schemes.len()];
        let scheme = schemes[k % schemes.len()];
        min_spin_number(setup, placement, size, scheme, Execution::Sequential)
    });
    let mut t = with_result_columns("fig10", &[("sample_size", "m"), ("placement", ""), ("scheme", "")]);
    for (k, r) in results.iter().enumerate() {
        let size = sizes[k / per_size];
        let placement = placements[(k % per_size) / schemes.len()];
        let scheme = schemes[k % schemes.len()];
        let mut row = vec![size.into(), placement.label().into(), scheme.label().into()];
        row.extend(result_cells(r));
        t.push(row);
    }
    Ok(t)
}

fn custom(plan: &CustomPlan, setup: &Setup, exec: Execution) -> Result<Table> {
    if plan.loop_side.is_empty() || plan.standoff.is_empty() || plan.b_ex.is_empty() || plan.schemes.is_empty() {
        return Err(Error::EmptyGrid("every custom sweep axis needs at least one value"));
    }
    let mut t = with_result_columns("custom", &[("loop_side", "m"), ("standoff", "m"), ("b_ex", "T"), ("scheme", "")]);
    for &l in &plan.loop_side {
        for &h in &plan.standoff {
            let mut s = setup.clone();
            s.qubit.loop_side = l;
            s.standoff = h;
            s.validate()?;
            let cache = s.kernel_cache(&s.large_sample(), exec)?;
            let jobs = plan.b_ex.len() * plan.schemes.len();
            let results = exec.map(jobs, |k| {
                let mut p = s.clone();
                p.env.b_ex = plan.b_ex[k / plan.schemes.len()];
                min_density_with_cache(&p, &cache, plan.schemes[k % plan.schemes.len()])
            });
            for (k, r) in results.iter().enumerate() {
                let mut row = vec![
                    l.into(),
                    h.into(),
                    plan.b_ex[k / plan.schemes.len()].into(),
                    plan.schemes[k % plan.schemes.len()].label().into(),
                ];
                row.extend(result_cells(r));
                t.push(row);
            }
        }
    }
    Ok(t)
}

//! Small one-dimensional numerical helpers: grids, bracketing bisection and
//! golden-section minimisation.

use crate::error::{Error, Result};

pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|i| if i == n - 1 { stop } else { start + step * i as f64 }).collect()
        }
    }
}

/// `n` points spaced evenly in log between `start` and `stop` (both > 0).
pub fn logspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    linspace(start.ln(), stop.ln(), n).into_iter().map(f64::exp).collect()
}

/// Outcome of [`bisect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub root: f64,
    pub lo: f64,
    pub hi: f64,
    pub iterations: u32,
}

/// Bisection for a sign change of `f` on `[lo, hi]`, stopping when the bracket
/// is narrower than `tol` (absolute, in the units of `x`).
///
/// `f` may fail; the first error aborts the search.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64, max_iter: u32) -> Result<Bisection>
where
    F: FnMut(f64) -> Result<f64>,
{
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(Bisection { root: lo, lo, hi: lo, iterations: 0 });
    }
    if f_hi == 0.0 {
        return Ok(Bisection { root: hi, lo: hi, hi, iterations: 0 });
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket { low: lo, high: hi, at_low: f_lo, at_high: f_hi });
    }
    let lo_negative = f_lo < 0.0;
    let mut iterations = 0;
    while (hi - lo).abs() > tol && iterations < max_iter {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        iterations += 1;
        if f_mid == 0.0 {
            return Ok(Bisection { root: mid, lo: mid, hi: mid, iterations });
        }
        if (f_mid < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Bisection { root: 0.5 * (lo + hi), lo, hi, iterations })
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a minimum of a unimodal `f` on `[a, b]`.
/// Returns `(x_min, f(x_min))`.
pub fn golden_section_min<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Global minimum of `f` over `grid` (ascending): exhaustive scan followed by
/// golden-section refinement inside the neighbouring grid cells.
/// Returns `(x_min, f(x_min))`; `f` should return `+inf` where undefined.
pub fn scan_then_refine<F>(mut f: F, grid: &[f64], tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    assert!(!grid.is_empty(), "scan grid must not be empty");
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, &x) in grid.iter().enumerate() {
        let v = f(x);
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    if !best_val.is_finite() || grid.len() < 3 {
        return (grid[best], best_val);
    }
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(grid.len() - 1)];
    let (x, v) = golden_section_min(&mut f, a, b, tol);
    if v <= best_val {
        (x, v)
    } else {
        (grid[best], best_val)
    }
}

//! Averages over a Gaussian spread of detunings, weight e^(−δ²/Γ̃²)/(Γ̃√π).

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Nodes and weights for ∫ f(x) e^(−x²) dx ≈ Σ wᵢ f(xᵢ).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Orthonormal Hermite recurrence at `z`: returns `(p_n(z), p_n'(z))`.
fn hermite_orthonormal(n: usize, z: f64) -> (f64, f64) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^(-1/4)
    let (mut p1, mut p2) = (PIM4, 0.0);
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// n-point Gauss–Hermite rule. Nodes start from the eigenvalues of the
/// symmetric Jacobi matrix and are polished by Newton steps on the
/// orthonormal recurrence, which also yields the weights.
pub fn gauss_hermite(n: usize) -> GaussHermiteRule {
    assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
    let jacobi =
        DMatrix::<f64>::from_fn(
            n,
            n,
            |i, j| {
                if i + 1 == j || j + 1 == i {
                    (0.5 * i.max(j) as f64).sqrt()
                } else {
                    0.0
                }
            },
        );
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| b.total_cmp(a));
    let mut weights = vec![0.0; n];
    for (z, w) in nodes.iter_mut().zip(weights.iter_mut()) {
        let mut deriv = hermite_orthonormal(n, *z).1;
        for _ in 0..8 {
            let (p, d) = hermite_orthonormal(n, *z);
            deriv = d;
            let step = p / d;
            *z -= step;
            if step.abs() <= 4.0 * f64::EPSILON * z.abs().max(1.0) {
                deriv = hermite_orthonormal(n, *z).1;
                break;
            }
        }
        *w = 2.0 / (deriv * deriv);
    }
    // Enforce exact symmetry.
    for i in 0..n / 2 {
        let x = 0.5 * (nodes[i] - nodes[n - 1 - i]);
        let w = 0.5 * (weights[i] + weights[n - 1 - i]);
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussHermiteRule { nodes, weights }
}

/// Orders tried by [`gauss_average_numeric`].
pub const HERMITE_ORDERS: [usize; 3] = [64, 128, 256];
/// Agreement required between successive orders.
pub const HERMITE_TOLERANCE: f64 = 1e-12;

/// ⟨f⟩ under the Gaussian weight of width `linewidth`, by Gauss–Hermite rules
/// of increasing order until two successive orders agree to
/// [`HERMITE_TOLERANCE`] (relative to the integral of |f|).
pub fn gauss_average_numeric<F: Fn(f64) -> f64>(f: F, linewidth: f64) -> Result<f64> {
    let mut previous: Option<f64> = None;
    let mut last = 0.0;
    for &order in &HERMITE_ORDERS {
        let rule = gauss_hermite(order);
        let (mut sum, mut scale) = (0.0, 0.0);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let v = w * f(linewidth * x);
            sum += v;
            scale += v.abs();
        }
        let estimate = sum / PI.sqrt();
        let scale = scale / PI.sqrt();
        if let Some(prev) = previous {
            if (estimate - prev).abs() <= HERMITE_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
                return Ok(estimate);
            }
        }
        previous = Some(estimate);
        last = estimate;
    }
    Err(Error::Accuracy(previous.unwrap_or(last), last))
}

// 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let pair = f(c - h * XGK[j]) + f(c + h * XGK[j]);
        k += WGK[j] * pair;
        if j % 2 == 1 {
            g += WG[j / 2] * pair;
        }
    }
    (k * h, (k - g).abs() * h)
}

/// Largest number of subintervals the adaptive rule may create.
const MAX_SUBINTERVALS: usize = 4000;

/// Globally adaptive Gauss–Kronrod over the pieces between consecutive
/// `cuts`: the interval with the largest error estimate is bisected until
/// the summed estimate drops below `abs_tol`.
fn adaptive<F: Fn(f64) -> f64>(f: &F, cuts: &[f64], abs_tol: f64) -> Result<f64> {
    // (a, b, value, error)
    let mut pieces: Vec<(f64, f64, f64, f64)> = cuts
        .windows(2)
        .map(|w| {
            let (v, e) = kronrod(f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    loop {
        let total_err: f64 = pieces.iter().map(|p| p.3).sum();
        let value: f64 = pieces.iter().map(|p| p.2).sum();
        // Estimates below the rounding floor of the sum cannot improve.
        if total_err <= abs_tol.max(50.0 * f64::EPSILON * value.abs()) {
            return Ok(value);
        }
        if pieces.len() >= MAX_SUBINTERVALS {
            return Err(Error::Accuracy(value, value + total_err));
        }
        let worst = (0..pieces.len()).max_by(|&i, &j| pieces[i].3.total_cmp(&pieces[j].3)).expect("at least one piece");
        let (a, b, _, _) = pieces.swap_remove(worst);
        let m = 0.5 * (a + b);
        for (lo, hi) in [(a, m), (m, b)] {
            let (v, e) = kronrod(f, lo, hi);
            pieces.push((lo, hi, v, e));
        }
    }
}

/// Half-width of the integration window in units of the linewidth; the
/// Gaussian tail beyond it is below 10⁻³⁵.
pub const ADAPTIVE_WINDOW: f64 = 9.0;

/// ⟨f⟩ under the Gaussian weight by adaptive Gauss–Kronrod (7/15) on
/// [−9Γ̃, 9Γ̃], with extra breakpoints at ±`features` and 0 so that
/// structures far narrower than Γ̃ are resolved. Target relative accuracy
/// `rel_tol`.
pub fn gauss_average_adaptive<F: Fn(f64) -> f64>(f: F, linewidth: f64, features: &[f64], rel_tol: f64) -> Result<f64> {
    let limit = ADAPTIVE_WINDOW * linewidth;
    let norm = 1.0 / (linewidth * PI.sqrt());
    let g = |x: f64| f(x) * (-(x / linewidth).powi(2)).exp() * norm;
    let mut cuts = vec![-limit, 0.0, limit];
    for &p in features {
        let p = p.abs();
        if p > 0.0 && p < limit {
            cuts.push(p);
            cuts.push(-p);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let coarse: f64 = cuts.windows(2).map(|w| kronrod(&g, w[0], w[1]).0.abs()).sum();
    adaptive(&g, &cuts, rel_tol * coarse)
}

//! Small numerical kernels shared by the engine: log-domain reductions,
//! finite differences, and one-dimensional quadrature.

use crate::error::{Error, Result};

/// `ln Σ exp(x_i)` with max-shift. Entries equal to `-inf` contribute nothing.
///
/// The reduction is sequential in slice order, so the result is bitwise
/// reproducible for identical input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Step used for first derivatives: `1e-5 · max(1, |x|)`.
pub fn first_derivative_step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

/// Step used for second differences of a bare scalar surface: `1e-3 · max(1, |x|)`,
/// near the roundoff/truncation balance of the refined stencil.
pub fn second_derivative_step(x: f64) -> f64 {
    1e-3 * x.abs().max(1.0)
}

/// Central difference with one Richardson refinement.
///
/// Combines `D(h)` and `D(h/2)` as `(4 D(h/2) - D(h)) / 3`, which cancels the
/// leading `h²` truncation term.
pub fn richardson_derivative<F>(f: F, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let central = |step: f64| -> Result<f64> { Ok((f(x + step)? - f(x - step)?) / (2.0 * step)) };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Second derivative `f''(x)` by the three-point stencil with one Richardson
/// refinement.
pub fn richardson_second_derivative<F>(f: F, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let f0 = f(x)?;
    let stencil = |step: f64| -> Result<f64> { Ok((f(x + step)? - 2.0 * f0 + f(x - step)?) / (step * step)) };
    let coarse = stencil(h)?;
    let fine = stencil(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Mixed partial `∂²f/∂a∂b` by the four-point cross stencil with one
/// Richardson refinement.
pub fn richardson_mixed_derivative<F>(f: F, a: f64, b: f64, ha: f64, hb: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let cross = |sa: f64, sb: f64| -> Result<f64> {
        Ok((f(a + sa, b + sb)? - f(a + sa, b - sb)? - f(a - sa, b + sb)? + f(a - sa, b - sb)?) / (4.0 * sa * sb))
    };
    let coarse = cross(ha, hb)?;
    let fine = cross(0.5 * ha, 0.5 * hb)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Trapezoid rule on a (not necessarily uniform) grid.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// Running trapezoid integral, starting from zero at `xs[0]`.
pub fn cumulative_trapezoid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    if !xs.is_empty() {
        out.push(0.0);
    }
    for (x, y) in xs.windows(2).zip(ys.windows(2)) {
        acc += 0.5 * (x[1] - x[0]) * (y[0] + y[1]);
        out.push(acc);
    }
    out
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
///
/// Fails when the recursion exhausts `max_depth` without meeting `tol`, or
/// when the integrand produces a non-finite value.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(fa.is_finite() && fm.is_finite() && fb.is_finite()) {
        return Err(Error::domain(format!("integrand is not finite on [{a}, {b}]")));
    }
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::domain(format!(
            "adaptive quadrature did not converge on [{a}, {b}] (estimate change {delta:e})"
        )));
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Evenly spaced grid of `n ≥ 2` points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (n - 1) as f64;
            (0..n).map(|i| if i == n - 1 { b } else { a + step * i as f64 }).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let xs = [0.1, -2.0, 3.5];
        let direct: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert_relative_eq!(log_sum_exp(&xs), direct, max_relative = 1e-15);
    }

    #[test]
    fn log_sum_exp_survives_large_arguments() {
        let xs = [1000.0, 1000.0];
        assert_relative_eq!(log_sum_exp(&xs), 1000.0 + 2f64.ln(), max_relative = 1e-15);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, 0.0]), 0.0);
    }

    #[test]
    fn richardson_derivative_of_exp() {
        let d = richardson_derivative(|x| Ok(x.exp()), 0.3, first_derivative_step(0.3)).unwrap();
        assert_relative_eq!(d, 0.3f64.exp(), max_relative = 1e-10);
    }

    #[test]
    fn second_and_mixed_derivatives() {
        let d2 = richardson_second_derivative(|x| Ok(x.sin()), 0.7, second_derivative_step(0.7)).unwrap();
        assert_relative_eq!(d2, -(0.7f64.sin()), max_relative = 1e-7);
        let dm = richardson_mixed_derivative(|a, b| Ok((a * b).exp()), 0.5, 0.2, 1e-4, 1e-4).unwrap();
        let exact = (0.1f64).exp() * (1.0 + 0.1);
        assert_relative_eq!(dm, exact, max_relative = 1e-7);
    }

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let xs = [0.0, 0.3, 1.0, 2.5];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert_relative_eq!(trapezoid(&xs, &ys), 2.5 * 2.5 + 2.5, max_relative = 1e-15);
        let cum = cumulative_trapezoid(&xs, &ys);
        assert_eq!(cum[0], 0.0);
        assert_relative_eq!(cum[3], trapezoid(&xs, &ys), max_relative = 1e-15);
    }

    #[test]
    fn adaptive_simpson_integrates_log() {
        // ∫_0^1 ln x dx = -1 after the x = u² substitution
        let v = adaptive_simpson(|u| if u == 0.0 { 0.0 } else { (u * u).ln() * 2.0 * u }, 0.0, 1.0, 1e-12, 50).unwrap();
        assert_relative_eq!(v, -1.0, max_relative = 1e-10);
    }

    #[test]
    fn linspace_endpoints() {
        let g = linspace(-1.0, 2.0, 4);
        assert_eq!(g, vec![-1.0, 0.0, 1.0, 2.0]);
    }
}

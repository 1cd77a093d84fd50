//! Gaussian fluctuation theory around equilibrium.
//!
//! For the exchanged variables `X_s` with environment intensives `y_s`, the
//! Hessian of Φ in `y` is minus the covariance of the `X_s`. Writing
//! `G⁻¹ = -∂²Φ/∂y∂y`, the moments are
//!
//! ```text
//! <αα> = s · G⁻¹      <λλ> = s · G
//! ```
//!
//! with `s = 1` for BG and `s = 1 + (q-1)Φ₀` for Tsallis, so that
//! `<λλ><αα> = s² · 1`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{
    first_derivative_step, richardson_derivative, richardson_mixed_derivative, richardson_second_derivative,
    second_derivative_step,
};
use crate::thermo::{EnsembleSpec, PhiSurface};

/// Symmetrized Hessian of Φ over fixed intensives.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityMatrix {
    pub variables: Vec<String>,
    /// `∂²Φ/∂y_k∂y_l`.
    pub hessian: DMatrix<f64>,
    /// Largest `|H_kl - H_lk|` before symmetrization.
    pub asymmetry: f64,
    pub warnings: Vec<String>,
}

fn wrap(variable: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Evaluation { variable: variable.to_string(), source: Box::new(e) }
}

/// Hessian of Φ with respect to the listed fixed intensives at `point`.
///
/// Rows with an analytic gradient are differentiated once more by central
/// differences; otherwise Φ itself is differenced twice with the wider
/// second-derivative step. A stability warning is attached when `-H` has a
/// negative eigenvalue.
pub fn stability_matrix(
    surface: &dyn PhiSurface,
    point: &EnsembleSpec,
    variables: &[String],
) -> Result<StabilityMatrix> {
    point.validate()?;
    if variables.is_empty() {
        return Err(Error::arg("no fluctuating variables requested"));
    }
    for v in variables {
        if !point.fixed_intensive.contains_key(v) {
            return Err(Error::arg(format!("`{v}` is not a fixed intensive variable of the environment")));
        }
    }
    let n = variables.len();
    let mut h = DMatrix::zeros(n, n);
    for (k, vk) in variables.iter().enumerate() {
        let analytic = surface.gradient_component(point, vk).is_some();
        for (l, vl) in variables.iter().enumerate() {
            let yl = point.fixed_intensive[vl];
            h[(k, l)] = if analytic {
                richardson_derivative(
                    |x| {
                        surface
                            .gradient_component(&point.perturbed(vl, x)?, vk)
                            .unwrap_or_else(|| Err(Error::Unavailable(format!("gradient for `{vk}`"))))
                    },
                    yl,
                    first_derivative_step(yl),
                )
                .map_err(wrap(vl))?
            } else if k == l {
                richardson_second_derivative(|x| surface.phi(&point.perturbed(vl, x)?), yl, second_derivative_step(yl))
                    .map_err(wrap(vl))?
            } else {
                let yk = point.fixed_intensive[vk];
                richardson_mixed_derivative(
                    |a, b| surface.phi(&point.perturbed(vk, a)?.perturbed(vl, b)?),
                    yk,
                    yl,
                    second_derivative_step(yk),
                    second_derivative_step(yl),
                )
                .map_err(wrap(vl))?
            };
        }
    }
    let asymmetry = (&h - h.transpose()).abs().max();
    let hessian = (&h + h.transpose()) * 0.5;
    let mut warnings = Vec::new();
    let min_eig = (-&hessian).symmetric_eigenvalues().min();
    let scale = hessian.abs().max().max(1e-300);
    if min_eig < -1e-8 * scale {
        warnings.push(format!("unstable state: -∂²Φ/∂y² has a negative eigenvalue {min_eig:e}"));
    }
    Ok(StabilityMatrix { variables: variables.to_vec(), hessian, asymmetry, warnings })
}

/// Variance of one fluctuating pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairVariance {
    /// `<ΔX_s²>`.
    pub extensive: f64,
    /// `<Δy_s²>`.
    pub intensive: f64,
}

/// Second moments of the fluctuating variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationReport {
    pub variables: Vec<String>,
    /// `G`, the stability matrix in the extensive representation.
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    /// `G⁻¹ = -∂²Φ/∂y∂y`.
    #[serde(rename = "G_inv")]
    pub g_inv: Vec<Vec<f64>>,
    pub variances: BTreeMap<String, PairVariance>,
    /// `<ΔX_k ΔX_l>` for `k < l`, keyed `"k,l"`.
    pub covariances: BTreeMap<String, f64>,
    pub tsallis_scale: f64,
    /// Ratio of extreme singular values of `G⁻¹`.
    pub condition: f64,
    pub singular: bool,
    pub warnings: Vec<String>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Moments from a stability matrix and the fluctuation scale.
pub fn moments(stability: &StabilityMatrix, tsallis_scale: f64) -> Result<FluctuationReport> {
    if !(tsallis_scale.is_finite() && tsallis_scale > 0.0) {
        return Err(Error::domain(format!("fluctuation scale must be positive, got {tsallis_scale}")));
    }
    let g_inv = -&stability.hessian;
    let n = g_inv.nrows();
    let svd = g_inv.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let mut warnings = stability.warnings.clone();
    let singular = !(condition.is_finite() && condition < 1e14);
    let g = if singular {
        warnings.push("G⁻¹ is singular: intensive fluctuations are unbounded".into());
        DMatrix::from_element(n, n, f64::INFINITY)
    } else {
        g_inv.clone().lu().try_inverse().ok_or_else(|| Error::domain("LU inverse failed"))?
    };
    let variances = stability
        .variables
        .iter()
        .enumerate()
        .map(|(k, name)| {
            (
                name.clone(),
                PairVariance { extensive: tsallis_scale * g_inv[(k, k)], intensive: tsallis_scale * g[(k, k)] },
            )
        })
        .collect();
    let mut covariances = BTreeMap::new();
    for k in 0..n {
        for l in k + 1..n {
            covariances.insert(
                format!("{},{}", stability.variables[k], stability.variables[l]),
                tsallis_scale * g_inv[(k, l)],
            );
        }
    }
    Ok(FluctuationReport {
        variables: stability.variables.clone(),
        g: rows_of(&g),
        g_inv: rows_of(&g_inv),
        variances,
        covariances,
        tsallis_scale,
        condition,
        singular,
        warnings,
    })
}

impl FluctuationReport {
    pub fn g_matrix(&self) -> DMatrix<f64> {
        let n = self.variables.len();
        DMatrix::from_fn(n, n, |i, j| self.g[i][j])
    }

    pub fn g_inv_matrix(&self) -> DMatrix<f64> {
        let n = self.variables.len();
        DMatrix::from_fn(n, n, |i, j| self.g_inv[i][j])
    }

    /// `<λλ><αα> = s² G G⁻¹`.
    pub fn moment_product(&self) -> DMatrix<f64> {
        let s2 = self.tsallis_scale * self.tsallis_scale;
        self.g_matrix() * self.g_inv_matrix() * s2
    }

    /// Adds a warning when the subdivision entropy is not small compared
    /// with Φ, where the Gaussian theory for macroscopic systems is suspect.
    pub fn check_size(&mut self, theta: Option<f64>, phi: f64) {
        if let Some(theta) = theta {
            if theta.abs() > 1e-3 * phi.abs().max(1.0) {
                self.warnings.push(format!(
                    "small system: subdivision entropy {theta:.6e} is not negligible against Φ = {phi:.6e}"
                ));
            }
        }
    }

    /// `G⁻¹` as CSV with a header row and a leading name column.
    pub fn matrix_csv(&self) -> String {
        let mut out = String::from("variable");
        for v in &self.variables {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
        for (name, row) in self.variables.iter().zip(&self.g_inv) {
            out.push_str(name);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Unnormalized log-density `-½ αᵀ (G/s) α` of a deviation `α`.
pub fn einstein_log_probability(alpha: &[f64], g: &DMatrix<f64>, tsallis_scale: f64) -> Result<f64> {
    if alpha.len() != g.nrows() || !g.is_square() {
        return Err(Error::arg(format!(
            "deviation has {} entries for a {}x{} matrix",
            alpha.len(),
            g.nrows(),
            g.ncols()
        )));
    }
    let a = DVector::from_column_slice(alpha);
    Ok(-0.5 * a.dot(&(g * &a)) / tsallis_scale)
}

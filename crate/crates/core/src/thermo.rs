//! Thermodynamic layer: environment variables, the characteristic function Φ,
//! the two entropies J and Θ, and conjugate-variable extraction.
//!
//! Every extensive variable `X_l` pairs with an intensive `y_l` (its conjugate
//! divided by kT). The environment fixes a subset `{X_j}` of extensives and a
//! disjoint subset `{y_i}` of intensives; the complements `{y_j}`, `{X_i}` are
//! observed. With these,
//!
//! ```text
//! dΦ = -y_j dX_j + X_i dy_i
//! Φ  =  y_i X_i,obs - J  = -y_j,obs X_j - Θ
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{first_derivative_step, richardson_derivative};

/// One conjugate pair `(X_l, y_l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariablePair {
    pub name: String,
    pub extensive_value: f64,
    pub intensive_value: f64,
}

/// Which pairs are held fixed on the extensive side and which on the
/// intensive side.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EnvironmentSplit {
    pub fixed_extensive: Vec<String>,
    pub fixed_intensive: Vec<String>,
}

impl EnvironmentSplit {
    pub fn new(fixed_extensive: Vec<String>, fixed_intensive: Vec<String>) -> Result<Self> {
        let ext: BTreeSet<&String> = fixed_extensive.iter().collect();
        if ext.len() != fixed_extensive.len() {
            return Err(Error::arg("duplicate fixed extensive variable"));
        }
        let int: BTreeSet<&String> = fixed_intensive.iter().collect();
        if int.len() != fixed_intensive.len() {
            return Err(Error::arg("duplicate fixed intensive variable"));
        }
        if let Some(both) = ext.intersection(&int).next() {
            return Err(Error::arg(format!("variable `{both}` cannot be fixed on both sides")));
        }
        Ok(EnvironmentSplit { fixed_extensive, fixed_intensive })
    }

    pub fn is_isolated(&self) -> bool {
        self.fixed_intensive.is_empty()
    }

    /// Checks that the split covers exactly the declared pairs.
    pub fn check_covers(&self, declared: &[String]) -> Result<()> {
        let declared: BTreeSet<&String> = declared.iter().collect();
        let covered: BTreeSet<&String> = self.fixed_extensive.iter().chain(&self.fixed_intensive).collect();
        if declared != covered {
            return Err(Error::arg(format!(
                "environment split {:?} does not cover the declared variables {:?}",
                covered, declared
            )));
        }
        Ok(())
    }
}

/// Numeric values of the environment variables `{X_j} ∪ {y_i}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// `X_j`, keyed by pair name.
    #[serde(rename = "X", default)]
    pub fixed_extensive: BTreeMap<String, f64>,
    /// `y_i`, keyed by pair name.
    #[serde(rename = "y", default)]
    pub fixed_intensive: BTreeMap<String, f64>,
}

impl EnsembleSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_extensive(mut self, name: impl Into<String>, value: f64) -> Self {
        self.fixed_extensive.insert(name.into(), value);
        self
    }

    pub fn with_intensive(mut self, name: impl Into<String>, value: f64) -> Self {
        self.fixed_intensive.insert(name.into(), value);
        self
    }

    pub fn split(&self) -> EnvironmentSplit {
        EnvironmentSplit {
            fixed_extensive: self.fixed_extensive.keys().cloned().collect(),
            fixed_intensive: self.fixed_intensive.keys().cloned().collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        EnvironmentSplit::new(
            self.fixed_extensive.keys().cloned().collect(),
            self.fixed_intensive.keys().cloned().collect(),
        )?;
        for (k, v) in self.fixed_extensive.iter().chain(&self.fixed_intensive) {
            if !v.is_finite() {
                return Err(Error::arg(format!("environment value for `{k}` is not finite")));
            }
        }
        Ok(())
    }

    /// Value of an environment variable regardless of side.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.fixed_extensive.get(name).or_else(|| self.fixed_intensive.get(name)).copied()
    }

    /// Copy with one environment value replaced.
    pub fn perturbed(&self, name: &str, value: f64) -> Result<Self> {
        let mut out = self.clone();
        if let Some(v) = out.fixed_extensive.get_mut(name) {
            *v = value;
        } else if let Some(v) = out.fixed_intensive.get_mut(name) {
            *v = value;
        } else {
            return Err(Error::arg(format!("`{name}` is not an environment variable")));
        }
        Ok(out)
    }
}

/// One thermodynamic state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermoPoint {
    pub phi: f64,
    #[serde(rename = "entropy_J")]
    pub entropy_j: f64,
    /// Hill subdivision entropy; `None` when it cannot be computed for the
    /// model at hand.
    pub entropy_theta: Option<f64>,
    /// Observed non-environment values: `X_i,obs` for pairs fixed on the
    /// intensive side, `y_j,obs` for pairs fixed on the extensive side.
    pub observed: BTreeMap<String, f64>,
    #[serde(default)]
    pub environment: EnsembleSpec,
}

impl ThermoPoint {
    /// Every pair with both members filled in, or `None` if some observed
    /// conjugate is missing.
    pub fn pairs(&self) -> Option<Vec<VariablePair>> {
        let mut out = Vec::new();
        for (name, &x) in &self.environment.fixed_extensive {
            out.push(VariablePair {
                name: name.clone(),
                extensive_value: x,
                intensive_value: *self.observed.get(name)?,
            });
        }
        for (name, &y) in &self.environment.fixed_intensive {
            out.push(VariablePair {
                name: name.clone(),
                extensive_value: *self.observed.get(name)?,
                intensive_value: y,
            });
        }
        Some(out)
    }

    /// `Σ_i y_i X_i,obs - J`, which must reproduce Φ.
    pub fn phi_from_entropy(&self) -> Option<f64> {
        let mut acc = 0.0;
        for (name, &y) in &self.environment.fixed_intensive {
            acc += y * self.observed.get(name)?;
        }
        Some(acc - self.entropy_j)
    }

    /// `-Σ_j y_j,obs X_j - Θ`, which must reproduce Φ.
    pub fn phi_from_subdivision(&self) -> Option<f64> {
        let theta = self.entropy_theta?;
        let mut acc = 0.0;
        for (name, &x) in &self.environment.fixed_extensive {
            acc += self.observed.get(name)? * x;
        }
        Some(-acc - theta)
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut cols: Vec<String> = vec!["phi".into(), "entropy_J".into(), "entropy_theta".into()];
        cols.extend(self.environment.fixed_extensive.keys().map(|k| format!("X_{k}")));
        cols.extend(self.environment.fixed_intensive.keys().map(|k| format!("y_{k}")));
        cols.extend(self.observed.keys().map(|k| format!("obs_{k}")));
        cols
    }

    pub fn csv_row(&self) -> Vec<String> {
        let mut row = vec![
            self.phi.to_string(),
            self.entropy_j.to_string(),
            self.entropy_theta.map(|t| t.to_string()).unwrap_or_default(),
        ];
        row.extend(self.environment.fixed_extensive.values().map(|v| v.to_string()));
        row.extend(self.environment.fixed_intensive.values().map(|v| v.to_string()));
        row.extend(self.observed.values().map(|v| v.to_string()));
        row
    }
}

/// A characteristic function Φ over the environment variables.
///
/// `gradient_component` may return an analytic `∂Φ/∂v`; the default says
/// none is available and callers fall back to finite differences.
pub trait PhiSurface {
    fn phi(&self, point: &EnsembleSpec) -> Result<f64>;

    fn gradient_component(&self, _point: &EnsembleSpec, _variable: &str) -> Option<Result<f64>> {
        None
    }
}

impl<F> PhiSurface for F
where
    F: Fn(&EnsembleSpec) -> Result<f64>,
{
    fn phi(&self, point: &EnsembleSpec) -> Result<f64> {
        self(point)
    }
}

/// `∂Φ/∂v` at `point` by central differences with one Richardson refinement.
pub fn phi_partial(surface: &dyn PhiSurface, point: &EnsembleSpec, variable: &str) -> Result<f64> {
    let x0 = point.get(variable).ok_or_else(|| Error::arg(format!("`{variable}` is not an environment variable")))?;
    richardson_derivative(|x| surface.phi(&point.perturbed(variable, x)?), x0, first_derivative_step(x0))
        .map_err(|e| Error::Evaluation { variable: variable.to_string(), source: Box::new(e) })
}

/// Non-environment conjugates from the Φ surface: `y_k = -∂Φ/∂X_k` for every
/// fixed extensive and `X_s = ∂Φ/∂y_s` for every fixed intensive.
pub fn conjugates_from_phi(surface: &dyn PhiSurface, point: &EnsembleSpec) -> Result<BTreeMap<String, f64>> {
    point.validate()?;
    let mut out = BTreeMap::new();
    for name in point.fixed_extensive.keys() {
        out.insert(name.clone(), -phi_partial(surface, point, name)?);
    }
    for name in point.fixed_intensive.keys() {
        out.insert(name.clone(), phi_partial(surface, point, name)?);
    }
    Ok(out)
}

/// Subdivision entropy `Θ = -Φ - Σ_j y_j,obs X_j`.
///
/// For a first-order homogeneous (macroscopic) Φ this vanishes; for small
/// systems it measures the departure from Euler's relation.
pub fn euler_residual(point: &ThermoPoint) -> Result<f64> {
    let mut acc = 0.0;
    for (name, &x) in &point.environment.fixed_extensive {
        let y =
            point.observed.get(name).ok_or_else(|| Error::Unavailable(format!("observed conjugate y for `{name}`")))?;
        acc += y * x;
    }
    Ok(-point.phi - acc)
}

/// Accumulated Gibbs-Duhem residuals along a path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsDuhemResidual {
    /// `∫ dΘ + Σ_l X_l dy_l`, zero for any system; `None` without Θ.
    pub hill: Option<f64>,
    /// `∫ Σ_l X_l dy_l`, zero only for homogeneous (macroscopic) Φ.
    pub macroscopic: f64,
}

/// Integrates `Σ_l X_l dy_l` (trapezoid) along a trajectory of states, and
/// adds `ΔΘ` for the Hill form.
pub fn gibbs_duhem_residual(trajectory: &[ThermoPoint]) -> Result<GibbsDuhemResidual> {
    if trajectory.len() < 3 {
        return Err(Error::arg(format!("a Gibbs-Duhem path needs at least 3 points, got {}", trajectory.len())));
    }
    let pairs: Vec<Vec<VariablePair>> = trajectory
        .iter()
        .map(|p| p.pairs().ok_or_else(|| Error::Unavailable("observed conjugates along the path".into())))
        .collect::<Result<_>>()?;
    let names: Vec<&String> = pairs[0].iter().map(|p| &p.name).collect();
    for p in &pairs[1..] {
        if p.iter().map(|v| &v.name).ne(names.iter().copied()) {
            return Err(Error::arg("all path points must share the same environment split"));
        }
    }
    let mut xdy = 0.0;
    for w in pairs.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            xdy += 0.5 * (a.extensive_value + b.extensive_value) * (b.intensive_value - a.intensive_value);
        }
    }
    let first = trajectory.first().and_then(|p| p.entropy_theta);
    let last = trajectory.last().and_then(|p| p.entropy_theta);
    let hill = match (first, last) {
        (Some(a), Some(b)) if trajectory.iter().all(|p| p.entropy_theta.is_some()) => Some(b - a + xdy),
        _ => None,
    };
    Ok(GibbsDuhemResidual { hill, macroscopic: xdy })
}

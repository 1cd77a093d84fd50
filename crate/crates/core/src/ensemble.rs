//! Generalized ensemble engine.
//!
//! A [`DegeneracySpectrum`] lists microcanonical subclasses: each row is one
//! assignment of the exchanged extensive variables `X_i` with its BG count
//! `g`. Given intensive values `y_i` and a squeeze family, each row becomes a
//! characteristic class
//!
//! ```text
//! c_r = H( h(g_r) · exp(-Σ_i y_i X_i,r) )
//! ```
//!
//! and the characteristic function is `Φ = -ln h(Σ_r c_r)`. Every quantity
//! is carried as a logarithm; sums are ordered log-sum-exp reductions so the
//! results are bitwise reproducible.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::squeeze::{LogValue, SqueezeFamily};
use crate::thermo::{EnsembleSpec, ThermoPoint};

/// Largest count kept as an exact integer-valued `f64`.
const EXACT_COUNT_LIMIT: f64 = 9_007_199_254_740_992.0;

/// One microcanonical subclass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub x: Vec<f64>,
    pub ln_g: f64,
    /// The count itself when it is an integer below 2^53. Lets probabilities
    /// such as `1/Ω` be formed by an exact division.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<f64>,
}

impl SpectrumRow {
    pub fn new(x: Vec<f64>, ln_g: f64) -> Self {
        SpectrumRow { x, ln_g, count: None }
    }

    /// Row with an exact integer count.
    pub fn with_count(x: Vec<f64>, count: f64) -> Self {
        let exact = count.fract() == 0.0 && count > 0.0 && count <= EXACT_COUNT_LIMIT;
        SpectrumRow { x, ln_g: count.ln(), count: exact.then_some(count) }
    }
}

fn key_of(x: &[f64]) -> Vec<u64> {
    // + 0.0 folds -0.0 into 0.0
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

fn merge_counts(a: Option<f64>, b: Option<f64>, op: impl Fn(f64, f64) -> f64) -> Option<f64> {
    let v = op(a?, b?);
    (v <= EXACT_COUNT_LIMIT).then_some(v)
}

/// Finite table `x ↦ ln g` over the exchanged variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegeneracySpectrum {
    variables: Vec<String>,
    rows: Vec<SpectrumRow>,
}

impl DegeneracySpectrum {
    pub fn new(variables: Vec<String>, rows: Vec<SpectrumRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::model("a spectrum needs at least one row"));
        }
        let mut names = variables.clone();
        names.sort();
        names.dedup();
        if names.len() != variables.len() {
            return Err(Error::model("duplicate variable name in spectrum"));
        }
        let mut seen = HashMap::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.x.len() != variables.len() {
                return Err(Error::model(format!(
                    "row {i} has {} values for {} variables",
                    row.x.len(),
                    variables.len()
                )));
            }
            if !row.ln_g.is_finite() || row.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::model(format!("row {i} has a non-finite entry")));
            }
            if let Some(j) = seen.insert(key_of(&row.x), i) {
                return Err(Error::model(format!("rows {j} and {i} share the same variable values")));
            }
        }
        Ok(DegeneracySpectrum { variables, rows })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn rows(&self) -> &[SpectrumRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::arg(format!("spectrum has no variable `{name}`")))
    }

    /// `ln Σ_r g_r`, the microcanonical class of the fixed variables.
    pub fn ln_total(&self) -> f64 {
        let ln_gs: Vec<f64> = self.rows.iter().map(|r| r.ln_g).collect();
        log_sum_exp(&ln_gs)
    }

    /// `Σ_r g_r` as an exact integer, when every row carries one.
    pub fn total_count(&self) -> Option<f64> {
        self.rows.iter().try_fold(0.0, |acc, r| merge_counts(Some(acc), r.count, |a, b| a + b))
    }

    /// Moves `name` to the fixed side: keeps only the rows with `X = value`
    /// and drops the column.
    pub fn close(&self, name: &str, value: f64) -> Result<Self> {
        let k = self.index_of(name)?;
        let tol = 1e-9 * value.abs().max(1.0);
        let rows: Vec<SpectrumRow> = self
            .rows
            .iter()
            .filter(|r| (r.x[k] - value).abs() <= tol)
            .map(|r| {
                let mut x = r.x.clone();
                x.remove(k);
                SpectrumRow { x, ..r.clone() }
            })
            .collect();
        if rows.is_empty() {
            return Err(Error::model(format!("no spectrum row has {name} = {value}")));
        }
        let mut variables = self.variables.clone();
        variables.remove(k);
        DegeneracySpectrum::new(variables, rows)
    }

    /// Sums over `name`, merging rows that agree on the remaining variables.
    pub fn marginalize(&self, name: &str) -> Result<Self> {
        let k = self.index_of(name)?;
        let mut variables = self.variables.clone();
        variables.remove(k);
        let projected = self.rows.iter().map(|r| {
            let mut x = r.x.clone();
            x.remove(k);
            SpectrumRow { x, ..r.clone() }
        });
        DegeneracySpectrum::new(variables, merge_rows(projected))
    }

    /// Spectrum of two independent systems. Shared variables add, distinct
    /// ones are concatenated; counts multiply.
    pub fn combine(&self, other: &DegeneracySpectrum) -> Result<Self> {
        let mut variables = self.variables.clone();
        let mut slot = Vec::with_capacity(other.variables.len());
        for name in &other.variables {
            match variables.iter().position(|v| v == name) {
                Some(i) => slot.push(i),
                None => {
                    variables.push(name.clone());
                    slot.push(variables.len() - 1);
                }
            }
        }
        let mut rows = Vec::with_capacity(self.rows.len() * other.rows.len());
        for a in &self.rows {
            for b in &other.rows {
                let mut x = a.x.clone();
                x.resize(variables.len(), 0.0);
                for (v, &s) in b.x.iter().zip(&slot) {
                    x[s] += v;
                }
                rows.push(SpectrumRow {
                    x,
                    ln_g: a.ln_g + b.ln_g,
                    count: merge_counts(a.count, b.count, |p, q| p * q),
                });
            }
        }
        DegeneracySpectrum::new(variables, merge_rows(rows.into_iter()))
    }
}

/// Merges rows with identical `x`, keeping first-appearance order.
fn merge_rows(rows: impl Iterator<Item = SpectrumRow>) -> Vec<SpectrumRow> {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut groups: Vec<(SpectrumRow, Vec<f64>)> = Vec::new();
    for row in rows {
        match index.get(&key_of(&row.x)) {
            Some(&i) => {
                let (acc, lns) = &mut groups[i];
                lns.push(row.ln_g);
                acc.count = merge_counts(acc.count, row.count, |a, b| a + b);
            }
            None => {
                index.insert(key_of(&row.x), groups.len());
                let ln = row.ln_g;
                groups.push((row, vec![ln]));
            }
        }
    }
    groups
        .into_iter()
        .map(|(mut row, lns)| {
            if lns.len() > 1 {
                row.ln_g = match row.count {
                    Some(c) => c.ln(),
                    None => log_sum_exp(&lns),
                };
            }
            row
        })
        .collect()
}

/// One row of a [`ClassTable`].
#[derive(Clone, Debug, PartialEq)]
pub struct ClassRow {
    /// Values of the exchanged variables.
    pub x: Vec<f64>,
    pub ln_g: f64,
    pub count: Option<f64>,
    /// `Σ_i y_i X_i` for this row.
    pub shift: f64,
    /// `ln c_r`, or excluded by the cutoff.
    pub ln_class: LogValue,
}

/// Per-row characteristic classes and their total.
#[derive(Clone, Debug)]
pub struct ClassTable {
    family: SqueezeFamily,
    /// Exchanged variables, in spectrum order.
    pub variables: Vec<String>,
    /// `y_i` for each exchanged variable.
    pub y: Vec<f64>,
    /// Spectrum variables that were fixed at an extensive value.
    pub closed: BTreeMap<String, f64>,
    pub rows: Vec<ClassRow>,
    /// `ln Σ_r c_r` over the surviving rows.
    pub ln_total: f64,
    /// `ln Σ_r g_r` over the rows compatible with the closed variables.
    pub ln_microcanonical: f64,
}

/// Builds the class table for `spectrum` in environment `env`.
///
/// Each spectrum variable must appear in `env`: with a `y` value it is
/// exchanged, with an `X` value the spectrum is restricted to that value.
/// Extensive entries in `env` that are not spectrum variables are taken to
/// be model parameters and ignored here.
pub fn characteristic_class(
    spectrum: &DegeneracySpectrum,
    env: &EnsembleSpec,
    family: &SqueezeFamily,
) -> Result<ClassTable> {
    env.validate()?;
    for name in env.fixed_intensive.keys() {
        if !spectrum.variables.contains(name) {
            return Err(Error::arg(format!("intensive `{name}` has no matching spectrum variable")));
        }
    }
    let mut reduced = spectrum.clone();
    let mut closed = BTreeMap::new();
    for name in spectrum.variables() {
        if env.fixed_intensive.contains_key(name) {
            continue;
        }
        let value = env.fixed_extensive.get(name).ok_or_else(|| {
            Error::arg(format!("spectrum variable `{name}` needs either a y or an X value in the environment"))
        })?;
        reduced = reduced.close(name, *value)?;
        closed.insert(name.clone(), *value);
    }
    let y: Vec<f64> = reduced.variables.iter().map(|n| env.fixed_intensive[n]).collect();
    let rows: Vec<ClassRow> = reduced
        .rows
        .iter()
        .map(|r| {
            let shift: f64 = r.x.iter().zip(&y).map(|(x, y)| x * y).sum();
            ClassRow {
                x: r.x.clone(),
                ln_g: r.ln_g,
                count: r.count,
                shift,
                ln_class: family.shifted_class_log(r.ln_g, shift),
            }
        })
        .collect();
    let ln_classes: Vec<f64> = rows.iter().filter(|r| !r.ln_class.cutoff).map(|r| r.ln_class.ln_x).collect();
    if ln_classes.is_empty() {
        return Err(Error::DegenerateEnsemble);
    }
    let ln_total = log_sum_exp(&ln_classes);
    if !ln_total.is_finite() {
        return Err(Error::domain(format!("characteristic class is not finite (ln = {ln_total})")));
    }
    Ok(ClassTable {
        family: family.clone(),
        variables: reduced.variables.clone(),
        y,
        closed,
        rows,
        ln_total,
        ln_microcanonical: reduced.ln_total(),
    })
}

/// Row probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    /// `P_r = c_r / Σ c`, probability of the macrostate.
    pub macro_probs: Vec<f64>,
    /// `p_r = P_r / g_r`, probability of one configuration in the row.
    pub config_probs: Vec<f64>,
    /// `ln p_r`, kept separately because `p_r` underflows for large `g`.
    pub ln_config_probs: Vec<f64>,
}

impl ClassTable {
    pub fn family(&self) -> &SqueezeFamily {
        &self.family
    }

    pub fn excluded_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.ln_class.cutoff).count()
    }

    /// `Φ = -ln h(Σ_r c_r)`.
    pub fn phi(&self) -> f64 {
        -self.family.ln_h_raw(self.ln_total)
    }

    /// `ln P_r` per row, `-inf` for excluded rows.
    fn ln_macro_probs(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| if r.ln_class.cutoff { f64::NEG_INFINITY } else { r.ln_class.ln_x - self.ln_total })
    }

    pub fn probabilities(&self) -> ProbabilityTable {
        let mut macro_probs = Vec::with_capacity(self.rows.len());
        let mut config_probs = Vec::with_capacity(self.rows.len());
        let mut ln_config_probs = Vec::with_capacity(self.rows.len());
        for (row, ln_p) in self.rows.iter().zip(self.ln_macro_probs()) {
            let p = ln_p.exp();
            macro_probs.push(p);
            ln_config_probs.push(ln_p - row.ln_g);
            config_probs.push(match row.count {
                Some(c) => p / c,
                None => (ln_p - row.ln_g).exp(),
            });
        }
        ProbabilityTable { macro_probs, config_probs, ln_config_probs }
    }

    /// Weights `w_r = ρ(G)/ρ(c_r)` with `ρ = f/h`, so that `Σ w_r X_r = ∂Φ/∂y`.
    /// They are `P_r` for BG and `P_r^q` for Tsallis.
    pub fn mean_weights(&self) -> Vec<f64> {
        let ln_ratio = |ln_x: f64| self.family.elasticity(ln_x).ln() - ln_x;
        let tsallis_q = match self.family {
            SqueezeFamily::Tsallis { q } => Some(q),
            _ => None,
        };
        let at_total = ln_ratio(self.ln_total);
        self.rows
            .iter()
            .map(|r| {
                if r.ln_class.cutoff {
                    0.0
                } else if let Some(q) = tsallis_q {
                    (q * (r.ln_class.ln_x - self.ln_total)).exp()
                } else {
                    (at_total - ln_ratio(r.ln_class.ln_x)).exp()
                }
            })
            .collect()
    }

    /// q-mean `Σ_r w_r A_r` of a per-row observable.
    pub fn observed_mean(&self, observable: &[f64]) -> Result<f64> {
        if observable.len() != self.rows.len() {
            return Err(Error::arg(format!("observable has {} values for {} rows", observable.len(), self.rows.len())));
        }
        Ok(self.mean_weights().iter().zip(observable).map(|(w, a)| w * a).sum())
    }

    /// q-mean of an exchanged variable, i.e. `X_i,obs = ∂Φ/∂y_i`.
    pub fn mean_of(&self, variable: &str) -> Result<f64> {
        let k = self
            .variables
            .iter()
            .position(|v| v == variable)
            .ok_or_else(|| Error::arg(format!("`{variable}` is not an exchanged variable")))?;
        let column: Vec<f64> = self.rows.iter().map(|r| r.x[k]).collect();
        self.observed_mean(&column)
    }

    /// Generalized Boltzmann factor `c_r / g_r` of a row.
    pub fn boltzmann_factor(&self, row: usize) -> Result<LogValue> {
        let r = self.rows.get(row).ok_or_else(|| Error::arg(format!("row {row} out of range")))?;
        Ok(if r.ln_class.cutoff { LogValue::excluded() } else { LogValue::new(r.ln_class.ln_x - r.ln_g) })
    }

    /// `Φ`, `J = Σ_i y_i X_i,obs - Φ` and the observed means of all exchanged
    /// variables. `Θ` is filled in only when `env` fixes no extensive
    /// variable, where it equals `-Φ`; otherwise it needs `∂Φ/∂X_j`, which
    /// the table alone cannot provide.
    pub fn thermo_point(&self, env: &EnsembleSpec) -> Result<ThermoPoint> {
        let phi = self.phi();
        let mut observed = BTreeMap::new();
        let mut yx = 0.0;
        for (name, y) in self.variables.iter().zip(&self.y) {
            let x = self.mean_of(name)?;
            yx += y * x;
            observed.insert(name.clone(), x);
        }
        Ok(ThermoPoint {
            phi,
            entropy_j: yx - phi,
            entropy_theta: env.fixed_extensive.is_empty().then_some(-phi),
            observed,
            environment: env.clone(),
        })
    }
}

/// `Φ`, `J` and (when available) `Θ` for a class table.
pub fn phi_and_entropies(table: &ClassTable, env: &EnsembleSpec) -> Result<ThermoPoint> {
    table.thermo_point(env)
}

/// Row probabilities; identical to [`ClassTable::probabilities`].
pub fn probabilities(table: &ClassTable) -> ProbabilityTable {
    table.probabilities()
}

/// q-mean of a per-row observable; identical to [`ClassTable::observed_mean`].
pub fn observed_mean(table: &ClassTable, observable: &[f64]) -> Result<f64> {
    table.observed_mean(observable)
}

/// `B = H(h(g) e^{-shift}) / g` for a single row of a spectrum.
pub fn generalized_boltzmann_factor(
    spectrum: &DegeneracySpectrum,
    env: &EnsembleSpec,
    family: &SqueezeFamily,
    row: usize,
) -> Result<LogValue> {
    let r = spectrum.rows.get(row).ok_or_else(|| Error::arg(format!("row {row} out of range")))?;
    let mut shift = 0.0;
    for (name, x) in spectrum.variables.iter().zip(&r.x) {
        if let Some(y) = env.fixed_intensive.get(name) {
            shift += y * x;
        }
    }
    let c = family.shifted_class_log(r.ln_g, shift);
    Ok(if c.cutoff { c } else { LogValue::new(c.ln_x - r.ln_g) })
}

/// Entropy from the configuration probabilities: Gibbs-Shannon
/// `-Σ_k p_k ln p_k` for BG and `(Σ_k p_k^q - 1)/(1-q)` for Tsallis, each row
/// contributing `g_r` identical configurations.
pub fn entropy_from_probabilities(probs: &ProbabilityTable, family: &SqueezeFamily) -> Result<f64> {
    let terms = probs.macro_probs.iter().zip(&probs.ln_config_probs).filter(|(p, _)| **p > 0.0);
    match family {
        SqueezeFamily::Tsallis { q } if *q != 1.0 => {
            let d = 1.0 - q;
            // Σ_k p_k^q - 1 = Σ_r P_r (p_r^{q-1} - 1)
            Ok(terms.map(|(p, ln_p)| p * (-d * ln_p).exp_m1()).sum::<f64>() / d)
        }
        SqueezeFamily::Identity | SqueezeFamily::Tsallis { .. } => Ok(-terms.map(|(p, ln_p)| p * ln_p).sum::<f64>()),
        SqueezeFamily::Custom(_) => {
            Err(Error::Unavailable("no closed probability form of the entropy for a custom family".into()))
        }
    }
}

/// `ln h(Σ_r g_r)`: the entropy of the isolated system with the spectrum's
/// variables all free.
pub fn microcanonical_entropy(spectrum: &DegeneracySpectrum, family: &SqueezeFamily) -> f64 {
    family.ln_h_raw(spectrum.ln_total())
}

/// Subdivision entropy from a fully open spectrum, where every extensive
/// variable is exchanged: `Θ = -Φ_open`.
pub fn open_entropy(
    open_spectrum: &DegeneracySpectrum,
    y: &BTreeMap<String, f64>,
    family: &SqueezeFamily,
) -> Result<f64> {
    let env = EnsembleSpec { fixed_extensive: BTreeMap::new(), fixed_intensive: y.clone() };
    Ok(-characteristic_class(open_spectrum, &env, family)?.phi())
}

/// `ln H(h(g_A) · h(g_B))`: BG class of a composite whose actual class is the
/// product of the parts' actual classes. `None` past the cutoff.
pub fn subdivision_class(family: &SqueezeFamily, ln_g_a: f64, ln_g_b: f64) -> Option<f64> {
    family.ln_inverse_raw(family.ln_h_raw(ln_g_a) + family.ln_h_raw(ln_g_b))
}

/// `ln h(H(e^{J_A}) · H(e^{J_B}))`: entropy of two independent systems
/// whose BG counts multiply, given the parts' entropies. `None` when either
/// entropy is outside the range of the family.
pub fn composed_entropy(family: &SqueezeFamily, j_a: f64, j_b: f64) -> Option<f64> {
    let ln_g_a = family.ln_inverse_raw(j_a)?;
    let ln_g_b = family.ln_inverse_raw(j_b)?;
    Some(family.ln_h_raw(ln_g_a + ln_g_b))
}

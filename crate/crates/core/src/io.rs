//! Model files and report serialization.
//!
//! A model file holds a spectrum, its environment and optionally a squeeze:
//!
//! ```json
//! {"variables": [{"name": "E", "kind": "exchanged"}],
//!  "rows": [{"x": [0.0], "ln_g": 0.0}, {"x": [1.0], "ln_g": 0.0}],
//!  "environment": {"y": {"E": 0.6931}, "X": {}},
//!  "squeeze": {"family": "identity"}}
//! ```
//!
//! `exchanged` variables take a `y` value, `fixed` ones an `X` value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ensemble::{ClassTable, DegeneracySpectrum, SpectrumRow};
use crate::error::{Error, Result};
use crate::models::{Model, ModelDescriptor};
use crate::squeeze::{SqueezeConfig, SqueezeFamily};
use crate::surface::EnsembleSurface;
use crate::thermo::{EnsembleSpec, ThermoPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Exchanged,
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableDecl {
    pub name: String,
    pub kind: VariableKind,
}

/// On-disk model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub variables: Vec<VariableDecl>,
    pub rows: Vec<SpectrumRow>,
    #[serde(default)]
    pub environment: EnsembleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub squeeze: Option<SqueezeConfig>,
    /// Generator that produced the rows. When present the file is loaded as
    /// that model, so its extensive parameters stay available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<ModelDescriptor>,
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn source_model(&self) -> Result<Option<Model>> {
        self.source.as_ref().map(Model::from_descriptor).transpose()
    }

    /// Checks the declarations against the environment and builds the
    /// spectrum. Environment names must be declared variables or parameters
    /// of the source model.
    pub fn spectrum(&self) -> Result<DegeneracySpectrum> {
        for decl in &self.variables {
            let (has, side) = match decl.kind {
                VariableKind::Exchanged => (self.environment.fixed_intensive.contains_key(&decl.name), "y"),
                VariableKind::Fixed => (self.environment.fixed_extensive.contains_key(&decl.name), "X"),
            };
            if !has {
                return Err(Error::model(format!(
                    "variable `{}` is {:?} but the environment has no {side} value for it",
                    decl.name, decl.kind
                )));
            }
        }
        let names: Vec<String> = self.variables.iter().map(|d| d.name.clone()).collect();
        let parameters = self.source_model()?.map(|m| m.fixed_extensives()).unwrap_or_default();
        if let Some(extra) = self
            .environment
            .fixed_extensive
            .keys()
            .filter(|k| !parameters.contains_key(*k))
            .chain(self.environment.fixed_intensive.keys())
            .find(|k| !names.contains(k))
        {
            return Err(Error::model(format!("environment names undeclared variable `{extra}`")));
        }
        DegeneracySpectrum::new(names, self.rows.clone())
    }

    pub fn family(&self) -> Result<Option<SqueezeFamily>> {
        self.squeeze.as_ref().map(SqueezeConfig::build).transpose()
    }

    /// Surface for this file under `family`. A file with a `source` must
    /// hold exactly the rows its generator produces.
    pub fn surface(&self, family: SqueezeFamily) -> Result<EnsembleSurface> {
        let spectrum = self.spectrum()?;
        match self.source_model()? {
            Some(model) => {
                if model.spectrum()? != spectrum {
                    return Err(Error::model(format!(
                        "rows differ from those of the source model `{}`",
                        model.descriptor().name
                    )));
                }
                Ok(EnsembleSurface::from_model(model, family))
            }
            None => Ok(EnsembleSurface::from_spectrum(spectrum, family)),
        }
    }

    /// Model file for `surface` in `env`. Every spectrum variable must have
    /// an environment value. Model parameters set in `env` are folded into
    /// the source descriptor.
    pub fn emit(surface: &EnsembleSurface, env: &EnsembleSpec) -> Result<Self> {
        let model = match surface.model() {
            Some(m) => {
                let mut m = *m;
                for name in m.continuous_extensives() {
                    if let Some(&v) = env.fixed_extensive.get(*name) {
                        m = m.with_extensive(name, v)?;
                    }
                }
                let d = m.descriptor();
                Some(
                    Model::from_descriptor(&d)
                        .map_err(|e| Error::arg(format!("model parameters cannot be written to a file: {e}")))?,
                )
            }
            None => None,
        };
        let spectrum = match &model {
            Some(m) => m.spectrum()?,
            None => surface.spectrum()?,
        };
        let mut environment = EnsembleSpec::default();
        let mut variables = Vec::new();
        for name in spectrum.variables() {
            let kind = if let Some(&y) = env.fixed_intensive.get(name) {
                environment.fixed_intensive.insert(name.clone(), y);
                VariableKind::Exchanged
            } else if let Some(&x) = env.fixed_extensive.get(name) {
                environment.fixed_extensive.insert(name.clone(), x);
                VariableKind::Fixed
            } else {
                return Err(Error::arg(format!("no environment value for `{name}`")));
            };
            variables.push(VariableDecl { name: name.clone(), kind });
        }
        let squeeze = Some(
            surface
                .family()
                .config()
                .ok_or_else(|| Error::arg("custom squeeze families cannot be written to a file"))?,
        );
        Ok(ModelFile {
            variables,
            rows: spectrum.rows().to_vec(),
            environment,
            squeeze,
            source: model.map(|m| m.descriptor()),
        })
    }
}

/// One row of the per-macrostate table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub x: Vec<f64>,
    pub ln_g: f64,
    /// `None` when the row is excluded by the cutoff.
    pub ln_class: Option<f64>,
    pub macro_prob: f64,
    pub config_prob: f64,
    pub boltzmann_factor: f64,
}

/// Thermodynamic state plus the class table it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermoReport {
    #[serde(flatten)]
    pub point: ThermoPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub squeeze: Option<SqueezeConfig>,
    /// Exchanged variables, naming the `x` columns of `rows`.
    #[serde(default)]
    pub variables: Vec<String>,
    #[serde(default)]
    pub excluded_rows: usize,
    #[serde(default)]
    pub rows: Vec<ReportRow>,
}

impl ThermoReport {
    pub fn new(point: ThermoPoint, table: &ClassTable) -> Result<Self> {
        let probs = table.probabilities();
        let rows = table
            .rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                Ok(ReportRow {
                    x: row.x.clone(),
                    ln_g: row.ln_g,
                    ln_class: (!row.ln_class.cutoff).then_some(row.ln_class.ln_x),
                    macro_prob: probs.macro_probs[r],
                    config_prob: probs.config_probs[r],
                    boltzmann_factor: table.boltzmann_factor(r)?.value(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(ThermoReport {
            point,
            squeeze: table.family().config(),
            variables: table.variables.clone(),
            excluded_rows: table.excluded_rows(),
            rows,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-row CSV: one column per exchanged variable, then `ln_g`,
    /// `ln_class`, `macro_prob`, `config_prob`, `boltzmann_factor`. Excluded
    /// rows have an empty `ln_class`.
    pub fn rows_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = self.variables.clone();
        header.extend(["ln_g", "ln_class", "macro_prob", "config_prob", "boltzmann_factor"].map(String::from));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec: Vec<String> = row.x.iter().map(f64::to_string).collect();
            rec.push(row.ln_g.to_string());
            rec.push(row.ln_class.map(|v| v.to_string()).unwrap_or_default());
            rec.push(row.macro_prob.to_string());
            rec.push(row.config_prob.to_string());
            rec.push(row.boltzmann_factor.to_string());
            w.write_record(&rec)?;
        }
        csv_string(w)
    }
}

/// Points of a sweep as CSV; all points must share the same columns.
pub fn points_csv(points: &[ThermoPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(first) = points.first() {
        let header = first.csv_header();
        w.write_record(&header)?;
        for p in points {
            if p.csv_header() != header {
                return Err(Error::arg("sweep points do not share the same columns"));
            }
            w.write_record(p.csv_row())?;
        }
    }
    csv_string(w)
}

/// Any serializable records as CSV.
pub fn records_csv<T: Serialize>(records: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    csv_string(w)
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Parses `name=value` pairs.
pub fn parse_assignments(items: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in items {
        let (k, v) = item.split_once('=').ok_or_else(|| Error::Parse(format!("expected name=value, got `{item}`")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Parse(format!("empty name in `{item}`")));
        }
        let v: f64 =
            v.trim().parse().map_err(|_| Error::Parse(format!("`{}` is not a number in `{item}`", v.trim())))?;
        if out.insert(k.to_string(), v).is_some() {
            return Err(Error::Parse(format!("`{k}` given twice")));
        }
    }
    Ok(out)
}

//! Φ as a function of the environment variables, backed by a spectrum.
//!
//! Fixed intensives enter the engine directly. Fixed extensives are either
//! spectrum variables (the spectrum is restricted to that value) or model
//! parameters such as the number of oscillators, in which case the spectrum
//! is regenerated at the requested value.

use std::collections::BTreeMap;

use crate::ensemble::{characteristic_class, ClassTable, DegeneracySpectrum};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::squeeze::SqueezeFamily;
use crate::thermo::{phi_partial, EnsembleSpec, PhiSurface, ThermoPoint};

#[derive(Clone, Debug)]
enum Source {
    Model(Model),
    Spectrum(DegeneracySpectrum),
}

/// A spectrum source paired with a squeeze family.
#[derive(Clone, Debug)]
pub struct EnsembleSurface {
    source: Source,
    family: SqueezeFamily,
}

impl EnsembleSurface {
    pub fn from_model(model: Model, family: SqueezeFamily) -> Self {
        EnsembleSurface { source: Source::Model(model), family }
    }

    /// Surface over a fixed spectrum; it has no extensive parameters.
    pub fn from_spectrum(spectrum: DegeneracySpectrum, family: SqueezeFamily) -> Self {
        EnsembleSurface { source: Source::Spectrum(spectrum), family }
    }

    pub fn family(&self) -> &SqueezeFamily {
        &self.family
    }

    pub fn model(&self) -> Option<&Model> {
        match &self.source {
            Source::Model(m) => Some(m),
            Source::Spectrum(_) => None,
        }
    }

    /// Spectrum at the model's own parameter values.
    pub fn spectrum(&self) -> Result<DegeneracySpectrum> {
        match &self.source {
            Source::Model(m) => m.spectrum(),
            Source::Spectrum(s) => Ok(s.clone()),
        }
    }

    fn spectrum_variables(&self) -> Vec<String> {
        match &self.source {
            Source::Model(m) => m.variables(),
            Source::Spectrum(s) => s.variables().to_vec(),
        }
    }

    /// `env` plus the model's fixed extensive parameters it does not mention.
    pub fn complete_environment(&self, env: &EnsembleSpec) -> EnsembleSpec {
        let mut out = env.clone();
        if let Source::Model(m) = &self.source {
            for (name, value) in m.fixed_extensives() {
                out.fixed_extensive.entry(name).or_insert(value);
            }
        }
        out
    }

    /// Spectrum with all parameter overrides in `env` applied.
    fn spectrum_at(&self, env: &EnsembleSpec) -> Result<DegeneracySpectrum> {
        let variables = self.spectrum_variables();
        let mut model = match &self.source {
            Source::Model(m) => *m,
            Source::Spectrum(s) => {
                if let Some(name) = env.fixed_extensive.keys().find(|k| !variables.contains(k)) {
                    return Err(Error::arg(format!("`{name}` is neither a spectrum variable nor a model parameter")));
                }
                return Ok(s.clone());
            }
        };
        let fixed = model.fixed_extensives();
        for (name, &value) in &env.fixed_extensive {
            if variables.contains(name) {
                continue;
            }
            if model.continuous_extensives().contains(&name.as_str()) {
                model = model.with_extensive(name, value)?;
            } else if let Some(&own) = fixed.get(name) {
                if own != value {
                    return Err(Error::Unavailable(format!(
                        "`{name}` cannot be varied continuously for this model (fixed at {own})"
                    )));
                }
            } else {
                return Err(Error::arg(format!("`{name}` is neither a spectrum variable nor a model parameter")));
            }
        }
        model.spectrum()
    }

    /// Class table at `env`.
    pub fn table(&self, env: &EnsembleSpec) -> Result<ClassTable> {
        characteristic_class(&self.spectrum_at(env)?, env, &self.family)
    }

    /// Full thermodynamic state, including `Θ` and the observed conjugates
    /// `y_j = -∂Φ/∂X_j` of every extensive parameter that can be varied.
    /// `Θ` is `None` when some fixed extensive cannot be varied continuously.
    pub fn thermo_point(&self, env: &EnsembleSpec) -> Result<ThermoPoint> {
        let env = self.complete_environment(env);
        let table = self.table(&env)?;
        let mut point = table.thermo_point(&env)?;
        let continuous: &[&str] = match &self.source {
            Source::Model(m) => m.continuous_extensives(),
            Source::Spectrum(_) => &[],
        };
        let mut yx = 0.0;
        let mut complete = true;
        for (name, &x) in &env.fixed_extensive {
            if continuous.contains(&name.as_str()) {
                let y = -phi_partial(self, &env, name)?;
                point.observed.insert(name.clone(), y);
                yx += y * x;
            } else {
                complete = false;
            }
        }
        point.entropy_theta = complete.then(|| -point.phi - yx);
        Ok(point)
    }

    /// `1 + (q-1)Φ₀` for Tsallis, 1 for BG, the elasticity at the
    /// characteristic class otherwise.
    pub fn fluctuation_scale(&self, env: &EnsembleSpec) -> Result<f64> {
        Ok(self.family.fluctuation_scale(self.table(env)?.ln_total))
    }

    /// Finite-difference `∂Φ/∂y` for every fixed intensive, next to the
    /// q-mean of the conjugate variable.
    pub fn duality_check(&self, env: &EnsembleSpec) -> Result<BTreeMap<String, (f64, f64)>> {
        let table = self.table(env)?;
        let fd = FiniteDifferenceOnly(self);
        env.fixed_intensive
            .keys()
            .map(|name| Ok((name.clone(), (phi_partial(&fd, env, name)?, table.mean_of(name)?))))
            .collect()
    }
}

impl PhiSurface for EnsembleSurface {
    fn phi(&self, point: &EnsembleSpec) -> Result<f64> {
        Ok(self.table(point)?.phi())
    }

    fn gradient_component(&self, point: &EnsembleSpec, variable: &str) -> Option<Result<f64>> {
        if !point.fixed_intensive.contains_key(variable) {
            return None;
        }
        Some(self.table(point).and_then(|t| t.mean_of(variable)))
    }
}

/// Hides the analytic gradient so that derivatives go through Φ alone.
struct FiniteDifferenceOnly<'a>(&'a EnsembleSurface);

impl PhiSurface for FiniteDifferenceOnly<'_> {
    fn phi(&self, point: &EnsembleSpec) -> Result<f64> {
        self.0.phi(point)
    }
}

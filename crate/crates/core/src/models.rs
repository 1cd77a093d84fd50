//! Built-in degeneracy spectra.
//!
//! All degeneracies come from log-gamma expressions, so large systems never
//! overflow. When a count is an integer below 2^53 it is also stored exactly.
//!
//! Truncation: `einstein_solid` keeps energies `0..=E_max` and `lattice_gas`
//! occupations `0..=N_max`. The neglected tail of a canonical sum is below
//! `exp(-β E_max)` times the largest retained weight ratio, so pick the
//! cutoffs several thermal widths above the mean.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;
use statrs::function::gamma::ln_gamma;

use crate::ensemble::{DegeneracySpectrum, SpectrumRow};
use crate::error::{Error, Result};

/// Model name plus numeric parameters, as used on the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub name: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

/// A built-in model with validated parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Model {
    TwoLevel { epsilon: f64 },
    SpinHalfParamagnet { n: u64 },
    EinsteinSolid { n: f64, e_max: u64 },
    LatticeGas { sites: f64, n_max: u64, site_energy: f64 },
}

pub const MODEL_NAMES: [&str; 4] = ["two_level", "spin_half_paramagnet", "einstein_solid", "lattice_gas"];

fn param(d: &ModelDescriptor, key: &str) -> Result<f64> {
    d.parameters.get(key).copied().ok_or_else(|| Error::model(format!("model `{}` needs parameter `{key}`", d.name)))
}

fn count_param(d: &ModelDescriptor, key: &str) -> Result<u64> {
    let v = param(d, key)?;
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(Error::model(format!("parameter `{key}` must be a nonnegative integer, got {v}")));
    }
    Ok(v as u64)
}

impl Model {
    pub fn from_descriptor(d: &ModelDescriptor) -> Result<Self> {
        let allowed: &[&str] = match d.name.as_str() {
            "two_level" => &["epsilon"],
            "spin_half_paramagnet" => &["N"],
            "einstein_solid" => &["N", "E_max"],
            "lattice_gas" => &["sites", "N_max", "site_energy"],
            other => return Err(Error::model(format!("unknown model `{other}` (known: {})", MODEL_NAMES.join(", ")))),
        };
        if let Some(extra) = d.parameters.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::model(format!("model `{}` has no parameter `{extra}`", d.name)));
        }
        let model = match d.name.as_str() {
            "two_level" => Model::TwoLevel { epsilon: param(d, "epsilon")? },
            "spin_half_paramagnet" => Model::SpinHalfParamagnet { n: count_param(d, "N")? },
            "einstein_solid" => Model::EinsteinSolid { n: param(d, "N")?, e_max: count_param(d, "E_max")? },
            _ => {
                let sites = param(d, "sites")?;
                let n_max = count_param(d, "N_max")?;
                if (n_max as f64) > sites {
                    return Err(Error::model(format!("lattice_gas needs sites >= N_max, got {sites} < {n_max}")));
                }
                Model::LatticeGas { sites, n_max, site_energy: d.parameters.get("site_energy").copied().unwrap_or(0.0) }
            }
        };
        model.validate()?;
        Ok(model)
    }

    pub fn descriptor(&self) -> ModelDescriptor {
        let (name, params): (&str, Vec<(&str, f64)>) = match *self {
            Model::TwoLevel { epsilon } => ("two_level", vec![("epsilon", epsilon)]),
            Model::SpinHalfParamagnet { n } => ("spin_half_paramagnet", vec![("N", n as f64)]),
            Model::EinsteinSolid { n, e_max } => ("einstein_solid", vec![("N", n), ("E_max", e_max as f64)]),
            Model::LatticeGas { sites, n_max, site_energy } => {
                ("lattice_gas", vec![("sites", sites), ("N_max", n_max as f64), ("site_energy", site_energy)])
            }
        };
        ModelDescriptor {
            name: name.to_string(),
            parameters: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Model::TwoLevel { epsilon } if !(epsilon > 0.0 && epsilon.is_finite()) => {
                Err(Error::model(format!("two_level needs epsilon > 0, got {epsilon}")))
            }
            Model::SpinHalfParamagnet { n: 0 } => Err(Error::model("spin_half_paramagnet needs N >= 1")),
            Model::EinsteinSolid { n, .. } if !(n > 0.0 && n.is_finite()) => {
                Err(Error::model(format!("einstein_solid needs N > 0, got {n}")))
            }
            // the continuous extension ln C(sites, N) needs sites - N + 1 > 0
            Model::LatticeGas { sites, n_max, site_energy }
                if !(sites > 0.0 && sites.is_finite() && sites + 1.0 > n_max as f64 && site_energy.is_finite()) =>
            {
                Err(Error::model(format!("lattice_gas needs sites > N_max - 1 and sites > 0, got sites = {sites}")))
            }
            _ => Ok(()),
        }
    }

    /// Exchangeable variables of the spectrum, in column order.
    pub fn variables(&self) -> Vec<String> {
        match self {
            Model::TwoLevel { .. } | Model::EinsteinSolid { .. } => vec!["E".into()],
            Model::SpinHalfParamagnet { .. } => vec!["M".into()],
            Model::LatticeGas { .. } => vec!["E".into(), "N".into()],
        }
    }

    /// Extensive parameters that can be varied continuously, so that their
    /// conjugates `-∂Φ/∂X_j` exist.
    pub fn continuous_extensives(&self) -> &'static [&'static str] {
        match self {
            Model::EinsteinSolid { .. } => &["N"],
            Model::LatticeGas { .. } => &["sites"],
            _ => &[],
        }
    }

    /// Extensive parameters held fixed by construction, continuous or not.
    pub fn fixed_extensives(&self) -> BTreeMap<String, f64> {
        match *self {
            Model::SpinHalfParamagnet { n } => [("N".to_string(), n as f64)].into(),
            Model::EinsteinSolid { n, .. } => [("N".to_string(), n)].into(),
            Model::LatticeGas { sites, .. } => [("sites".to_string(), sites)].into(),
            Model::TwoLevel { .. } => BTreeMap::new(),
        }
    }

    /// Copy with one continuous extensive parameter replaced.
    pub fn with_extensive(&self, name: &str, value: f64) -> Result<Self> {
        let out = match (*self, name) {
            (Model::EinsteinSolid { e_max, .. }, "N") => Model::EinsteinSolid { n: value, e_max },
            (Model::LatticeGas { n_max, site_energy, .. }, "sites") => {
                Model::LatticeGas { sites: value, n_max, site_energy }
            }
            _ => {
                return Err(Error::Unavailable(format!(
                    "`{name}` is not a continuous extensive parameter of {}",
                    self.descriptor().name
                )))
            }
        };
        out.validate()?;
        Ok(out)
    }

    pub fn spectrum(&self) -> Result<DegeneracySpectrum> {
        match *self {
            Model::TwoLevel { epsilon } => two_level(epsilon),
            Model::SpinHalfParamagnet { n } => spin_half_paramagnet(n),
            Model::EinsteinSolid { n, e_max } => einstein_solid(n, e_max),
            Model::LatticeGas { sites, n_max, site_energy } => lattice_gas(sites, n_max, site_energy),
        }
    }
}

/// `C(n, k)` as an exact integer, when it stays below 2^53.
fn exact_binomial(n: u64, k: u64) -> Option<f64> {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > 1 << 53 {
            return None;
        }
    }
    Some(c as f64)
}

fn binomial_row(x: Vec<f64>, n: u64, k: u64) -> SpectrumRow {
    match exact_binomial(n, k) {
        Some(c) => SpectrumRow::with_count(x, c),
        None => SpectrumRow::new(x, ln_binomial(n, k)),
    }
}

/// `ln C(a, k)` for real `a > k - 1`.
fn ln_binomial_real(a: f64, k: u64) -> f64 {
    let k = k as f64;
    ln_gamma(a + 1.0) - ln_gamma(k + 1.0) - ln_gamma(a - k + 1.0)
}

/// Real-parameter row: exact when `a` is an integer, log-gamma otherwise.
fn real_binomial_row(x: Vec<f64>, a: f64, k: u64) -> SpectrumRow {
    if a.fract() == 0.0 && a >= k as f64 && a < u32::MAX as f64 {
        binomial_row(x, a as u64, k)
    } else {
        SpectrumRow::new(x, ln_binomial_real(a, k))
    }
}

/// Two nondegenerate levels at `E = 0` and `E = ε`.
pub fn two_level(epsilon: f64) -> Result<DegeneracySpectrum> {
    Model::TwoLevel { epsilon }.validate()?;
    DegeneracySpectrum::new(
        vec!["E".into()],
        vec![SpectrumRow::with_count(vec![0.0], 1.0), SpectrumRow::with_count(vec![epsilon], 1.0)],
    )
}

/// `N` spins 1/2: magnetization `M = 2k - N` with `C(N, k)` configurations.
pub fn spin_half_paramagnet(n: u64) -> Result<DegeneracySpectrum> {
    Model::SpinHalfParamagnet { n }.validate()?;
    let rows = (0..=n).map(|k| binomial_row(vec![2.0 * k as f64 - n as f64], n, k)).collect();
    DegeneracySpectrum::new(vec!["M".into()], rows)
}

/// `N` oscillators sharing `m` quanta: `C(m + N - 1, m)` ways, `m = 0..=E_max`.
/// `N` may be any positive real (log-gamma extension).
pub fn einstein_solid(n: f64, e_max: u64) -> Result<DegeneracySpectrum> {
    Model::EinsteinSolid { n, e_max }.validate()?;
    let rows = (0..=e_max).map(|m| real_binomial_row(vec![m as f64], m as f64 + n - 1.0, m)).collect();
    DegeneracySpectrum::new(vec!["E".into()], rows)
}

/// Ideal lattice gas: `N` particles on `sites` sites, `C(sites, N)` ways,
/// energy `site_energy · N`. Variables `[E, N]`.
///
/// `sites` may be real (log-gamma extension) provided `sites > N_max - 1`.
pub fn lattice_gas(sites: f64, n_max: u64, site_energy: f64) -> Result<DegeneracySpectrum> {
    Model::LatticeGas { sites, n_max, site_energy }.validate()?;
    let rows = (0..=n_max).map(|n| real_binomial_row(vec![site_energy * n as f64, n as f64], sites, n)).collect();
    DegeneracySpectrum::new(vec!["E".into(), "N".into()], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_level_rows() {
        let s = two_level(1.0).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.rows()[1].x, vec![1.0]);
        assert!(two_level(0.0).is_err());
    }

    #[test]
    fn spin_half_counts() {
        let s = spin_half_paramagnet(2).unwrap();
        let lg: Vec<f64> = s.rows().iter().map(|r| r.ln_g).collect();
        assert_eq!(lg, vec![0.0, 2f64.ln(), 0.0]);
        let s4 = spin_half_paramagnet(4).unwrap();
        assert_eq!(s4.rows()[2].count, Some(6.0));
        assert_eq!(s4.rows()[2].x, vec![0.0]);
    }

    #[test]
    fn spin_half_large_total() {
        let s = spin_half_paramagnet(1000).unwrap();
        assert_relative_eq!(s.ln_total(), 1000.0 * 2f64.ln(), max_relative = 1e-13);
    }

    #[test]
    fn einstein_solid_stars_and_bars() {
        let s = einstein_solid(2.0, 5).unwrap();
        assert_eq!(s.rows()[3].count, Some(4.0));
        assert_eq!(einstein_solid(3.0, 0).unwrap().rows()[0].count, Some(1.0));
        // continuous N agrees with the integer route
        let a = einstein_solid(3.0 + 1e-12, 10).unwrap();
        let b = einstein_solid(3.0, 10).unwrap();
        for (r, s) in a.rows().iter().zip(b.rows()) {
            assert!((r.ln_g - s.ln_g).abs() < 1e-10);
        }
    }

    #[test]
    fn lattice_gas_counts() {
        let s = lattice_gas(2.0, 2, 0.0).unwrap();
        let c: Vec<f64> = s.rows().iter().map(|r| r.count.unwrap()).collect();
        assert_eq!(c, vec![1.0, 2.0, 1.0]);
        assert_eq!(s.variables(), &["E".to_string(), "N".to_string()]);
        assert!(lattice_gas(2.0, 5, 0.0).is_err());
    }

    #[test]
    fn descriptor_roundtrip_and_validation() {
        let d = ModelDescriptor {
            name: "lattice_gas".into(),
            parameters: [("sites".to_string(), 10.0), ("N_max".to_string(), 10.0)].into(),
        };
        let m = Model::from_descriptor(&d).unwrap();
        assert_eq!(Model::from_descriptor(&m.descriptor()).unwrap(), m);
        let bad = ModelDescriptor { name: "spin_half_paramagnet".into(), parameters: [("N".to_string(), 2.5)].into() };
        assert!(Model::from_descriptor(&bad).is_err());
        let unknown = ModelDescriptor { name: "ising".into(), parameters: BTreeMap::new() };
        assert!(matches!(Model::from_descriptor(&unknown), Err(Error::InvalidModel(_))));
        let extra = ModelDescriptor {
            name: "two_level".into(),
            parameters: [("epsilon".to_string(), 1.0), ("x".to_string(), 1.0)].into(),
        };
        assert!(Model::from_descriptor(&extra).is_err());
    }
}

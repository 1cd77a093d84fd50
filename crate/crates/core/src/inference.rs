//! Inferring the squeezing function from thermometer data, and the forward
//! superstatistics integral.
//!
//! Two systems in generalized equilibrium read BG temperatures whose ratio,
//! taken along a sweep of `ln g`, is the elasticity `d ln h / d ln g`. So
//!
//! ```text
//! ln h(g) = ∫_0^{ln g} ratio(x) dx
//! ```
//!
//! anchored at `h(1) = 1`. Under a power-law ansatz `ratio ∝ g^{1-q}` a
//! straight-line fit of `ln ratio` against `ln g` gives `q`.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{cumulative_trapezoid, trapezoid};
use crate::squeeze::SqueezeFamily;

/// Tolerance on the first sample's distance from `ln g = 0`.
pub const ANCHOR_TOLERANCE: f64 = 1e-6;

/// Default RMS residual above which the data are not a power law.
pub const DEFAULT_POWER_LAW_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSample {
    pub ln_g: f64,
    pub ratio: f64,
}

/// Temperature-ratio measurements over increasing `ln g`.
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumDataset {
    samples: Vec<EquilibriumSample>,
}

impl EquilibriumDataset {
    pub fn new(samples: Vec<EquilibriumSample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::arg(format!("need at least 2 samples, got {}", samples.len())));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.ln_g.is_finite() || !(s.ratio > 0.0 && s.ratio.is_finite()) {
                return Err(Error::arg(format!("sample {i} needs finite ln_g and a positive finite ratio")));
            }
        }
        if let Some(i) = samples.windows(2).position(|w| w[1].ln_g <= w[0].ln_g) {
            return Err(Error::arg(format!("ln_g must be strictly increasing (samples {i} and {})", i + 1)));
        }
        if samples[0].ln_g.abs() > ANCHOR_TOLERANCE {
            return Err(Error::arg(format!(
                "the first sample must sit at ln_g = 0 (h(1) = 1), got {}",
                samples[0].ln_g
            )));
        }
        Ok(EquilibriumDataset { samples })
    }

    /// Reads a CSV with header `ln_g,ratio`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().map(str::trim).ne(["ln_g", "ratio"]) {
            return Err(Error::Parse(format!(
                "expected header `ln_g,ratio`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let samples = rdr.deserialize().collect::<std::result::Result<Vec<EquilibriumSample>, _>>()?;
        EquilibriumDataset::new(samples)
    }

    /// Noiseless data generated from a family: `ratio = d ln h / d ln g`.
    pub fn synthetic(family: &SqueezeFamily, ln_g: &[f64]) -> Result<Self> {
        EquilibriumDataset::new(
            ln_g.iter().map(|&x| EquilibriumSample { ln_g: x, ratio: family.elasticity(x) }).collect(),
        )
    }

    pub fn samples(&self) -> &[EquilibriumSample] {
        &self.samples
    }

    pub fn ln_g(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.ln_g).collect()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.ratio).collect()
    }

    /// Copy with every ratio multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        EquilibriumDataset::new(
            self.samples.iter().map(|s| EquilibriumSample { ln_g: s.ln_g, ratio: s.ratio * c }).collect(),
        )
    }
}

/// Tabulated `ln h` on the data grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub ln_g: Vec<f64>,
    pub ln_h: Vec<f64>,
}

impl Reconstruction {
    /// Largest `|ln h - reference(ln g)|` over the grid.
    pub fn sup_error(&self, reference: impl Fn(f64) -> f64) -> f64 {
        self.ln_g.iter().zip(&self.ln_h).map(|(&x, &y)| (y - reference(x)).abs()).fold(0.0, f64::max)
    }
}

/// Running trapezoid integral of the ratios over `ln g`, starting from 0.
pub fn reconstruct_squeeze(data: &EquilibriumDataset) -> Reconstruction {
    let ln_g = data.ln_g();
    let ln_h = cumulative_trapezoid(&ln_g, &data.ratios());
    Reconstruction { ln_g, ln_h }
}

/// Power-law fit `ln ratio = c + (1-q) ln g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QEstimate {
    pub q: f64,
    /// RMS residual of `ln ratio`.
    pub residual: f64,
    pub intercept: f64,
    /// Whether the residual is within the threshold.
    pub power_law: bool,
}

/// Least-squares estimate of `q`; `power_law` is false when the RMS
/// residual exceeds `threshold`.
pub fn estimate_q(data: &EquilibriumDataset, threshold: f64) -> Result<QEstimate> {
    let n = data.samples.len();
    if n < 3 {
        return Err(Error::arg(format!("estimating q needs at least 3 samples, got {n}")));
    }
    let xs = data.ln_g();
    let ys: Vec<f64> = data.samples.iter().map(|s| s.ratio.ln()).collect();
    let nf = n as f64;
    let xm = xs.iter().sum::<f64>() / nf;
    let ym = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::arg("ln_g has zero variance"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let residual = (ss / nf).sqrt();
    Ok(QEstimate { q: 1.0 - slope, residual, intercept, power_law: residual <= threshold })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct DensityRow {
    beta: f64,
    f: f64,
}

/// Tabulated density of inverse temperatures.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaDensity {
    beta: Vec<f64>,
    f: Vec<f64>,
}

impl BetaDensity {
    pub fn new(beta: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if beta.len() != f.len() || beta.len() < 2 {
            return Err(Error::arg("density needs at least 2 (beta, f) pairs of equal length"));
        }
        if beta.windows(2).any(|w| !(w[1] > w[0])) || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::arg("beta grid must be finite and strictly increasing"));
        }
        if f.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::arg("density values must be finite and nonnegative"));
        }
        Ok(BetaDensity { beta, f })
    }

    pub fn from_fn(beta: Vec<f64>, density: impl Fn(f64) -> f64) -> Result<Self> {
        let f = beta.iter().map(|&b| density(b)).collect();
        BetaDensity::new(beta, f)
    }

    /// Reads a CSV with header `beta,f`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().map(str::trim).ne(["beta", "f"]) {
            return Err(Error::Parse(format!(
                "expected header `beta,f`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<DensityRow>, _>>()?;
        BetaDensity::new(rows.iter().map(|r| r.beta).collect(), rows.iter().map(|r| r.f).collect())
    }

    /// Trapezoid integral of the density.
    pub fn norm(&self) -> f64 {
        trapezoid(&self.beta, &self.f)
    }
}

/// Generalized Boltzmann factor `B(E) = ∫ f(β') e^{-β' E} dβ'` by trapezoid.
///
/// The density must integrate to 1 within 1e-6. The result is divided by
/// the discrete norm, so `B(0) = 1` exactly.
pub fn superstatistics_forward(density: &BetaDensity, energy: f64) -> Result<f64> {
    if !energy.is_finite() {
        return Err(Error::arg(format!("energy must be finite, got {energy}")));
    }
    let norm = density.norm();
    if !((norm - 1.0).abs() <= 1e-6) {
        return Err(Error::Unnormalized { integral: norm });
    }
    let weighted: Vec<f64> = density.beta.iter().zip(&density.f).map(|(b, f)| f * (-b * energy).exp()).collect();
    Ok(trapezoid(&density.beta, &weighted) / norm)
}

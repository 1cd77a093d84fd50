//! Squeezing-function families.
//!
//! A family is the triple `(h, H, f)`: the squeezing function `h`, its inverse
//! `H` and its derivative `f = dh/dx`. Everything is evaluated in the log
//! domain: callers pass `ln g` and receive `ln h(g)`, so class sizes in the
//! thousands of orders of magnitude never have to be materialized.
//!
//! The Tsallis family is `ln h(g) = ln_q g = (g^{1-q} - 1)/(1-q)` with inverse
//! `ln H(e^x) = ln[1 + (1-q) x]/(1-q)`, the q-logarithm and q-exponential.
//! `q = 1` is routed to the identity family explicitly.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{linspace, richardson_derivative};

/// Natural log of a positive count or density, or the excluded state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogValue {
    pub ln_x: f64,
    /// Set when the value was clamped to zero by the q-exponential cutoff.
    pub cutoff: bool,
}

impl LogValue {
    pub fn new(ln_x: f64) -> Self {
        LogValue { ln_x, cutoff: false }
    }

    pub fn excluded() -> Self {
        LogValue { ln_x: f64::NEG_INFINITY, cutoff: true }
    }

    pub fn is_excluded(&self) -> bool {
        self.cutoff
    }

    /// `exp(ln_x)`, or zero for the excluded state.
    pub fn value(&self) -> f64 {
        if self.cutoff {
            0.0
        } else {
            self.ln_x.exp()
        }
    }
}

impl From<f64> for LogValue {
    fn from(ln_x: f64) -> Self {
        LogValue::new(ln_x)
    }
}

/// Derivative information for `h` at a point `g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slope {
    /// `ln(f(g)/h(g))`, always representable.
    pub ln_ratio: f64,
    /// `ln f(g)`.
    pub ln_f: f64,
    /// `f(g)` when it fits in an `f64`.
    pub f: Option<f64>,
    /// Elasticity `d ln h / d ln g = g f(g) / h(g)`.
    pub elasticity: f64,
}

type ScalarHook = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type InverseHook = Arc<dyn Fn(f64) -> Option<f64> + Send + Sync>;

/// User-supplied family given by three log-domain hooks.
///
/// * `log_squeeze`: `ln g ↦ ln h(g)`
/// * `log_unsqueeze`: `ln h ↦ ln H(e^{ln h})`, `None` outside the domain
/// * `elasticity`: `ln g ↦ d ln h / d ln g` (must be nonnegative)
#[derive(Clone)]
pub struct CustomSqueeze {
    name: String,
    log_squeeze: ScalarHook,
    log_unsqueeze: InverseHook,
    elasticity: ScalarHook,
}

impl fmt::Debug for CustomSqueeze {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomSqueeze").field("name", &self.name).finish_non_exhaustive()
    }
}

/// Family kind tag, as it appears in configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Identity,
    Tsallis,
    Custom,
}

/// A squeezing-function family. Immutable after construction.
#[derive(Clone, Debug)]
pub enum SqueezeFamily {
    Identity,
    Tsallis { q: f64 },
    Custom(CustomSqueeze),
}

impl SqueezeFamily {
    pub fn identity() -> Self {
        SqueezeFamily::Identity
    }

    pub fn tsallis(q: f64) -> Result<Self> {
        if !q.is_finite() {
            return Err(Error::arg(format!("Tsallis q must be finite, got {q}")));
        }
        Ok(SqueezeFamily::Tsallis { q })
    }

    /// Builds a custom family after checking the hooks against each other on
    /// a probe grid `ln g ∈ [-4, 4]`: round trip, slope consistency with a
    /// finite difference of `log_squeeze`, and nonnegative slope.
    pub fn custom<S, U, E>(name: impl Into<String>, log_squeeze: S, log_unsqueeze: U, elasticity: E) -> Result<Self>
    where
        S: Fn(f64) -> f64 + Send + Sync + 'static,
        U: Fn(f64) -> Option<f64> + Send + Sync + 'static,
        E: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let custom = CustomSqueeze {
            name: name.into(),
            log_squeeze: Arc::new(log_squeeze),
            log_unsqueeze: Arc::new(log_unsqueeze),
            elasticity: Arc::new(elasticity),
        };
        for ln_g in linspace(-4.0, 4.0, 17) {
            let ln_h = (custom.log_squeeze)(ln_g);
            if !ln_h.is_finite() {
                return Err(Error::arg(format!("custom family `{}`: ln h not finite at ln g = {ln_g}", custom.name)));
            }
            if let Some(back) = (custom.log_unsqueeze)(ln_h) {
                if (back - ln_g).abs() > 1e-8 * ln_g.abs().max(1.0) {
                    return Err(Error::arg(format!(
                        "custom family `{}`: H(h(g)) != g at ln g = {ln_g} (got {back})",
                        custom.name
                    )));
                }
            }
            let e = (custom.elasticity)(ln_g);
            if !(e >= 0.0) {
                return Err(Error::arg(format!("custom family `{}`: negative slope at ln g = {ln_g}", custom.name)));
            }
            let fd = richardson_derivative(|x| Ok((custom.log_squeeze)(x)), ln_g, 1e-4)?;
            if (fd - e).abs() > 1e-5 * e.abs().max(1e-3) {
                return Err(Error::arg(format!(
                    "custom family `{}`: slope hook {e} disagrees with finite difference {fd} at ln g = {ln_g}",
                    custom.name
                )));
            }
        }
        Ok(SqueezeFamily::Custom(custom))
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            SqueezeFamily::Identity => FamilyKind::Identity,
            SqueezeFamily::Tsallis { .. } => FamilyKind::Tsallis,
            SqueezeFamily::Custom(_) => FamilyKind::Custom,
        }
    }

    /// Entropic parameter, when the family has one.
    pub fn q(&self) -> Option<f64> {
        match self {
            SqueezeFamily::Tsallis { q } => Some(*q),
            SqueezeFamily::Identity => Some(1.0),
            SqueezeFamily::Custom(_) => None,
        }
    }

    /// `1 - q` for a Tsallis family that is not the identity branch.
    fn deformation(&self) -> Option<f64> {
        match self {
            SqueezeFamily::Tsallis { q } if *q != 1.0 => Some(1.0 - q),
            _ => None,
        }
    }

    /// `ln h(g)` for any `ln g`, including `-inf` (g = 0).
    pub(crate) fn ln_h_raw(&self, ln_g: f64) -> f64 {
        if let Some(d) = self.deformation() {
            return (d * ln_g).exp_m1() / d;
        }
        match self {
            SqueezeFamily::Custom(c) => (c.log_squeeze)(ln_g),
            _ => ln_g,
        }
    }

    /// `ln H(e^{ln_h})`, or `None` past the cutoff.
    pub(crate) fn ln_inverse_raw(&self, ln_h: f64) -> Option<f64> {
        if let Some(d) = self.deformation() {
            let z = d * ln_h;
            if 1.0 + z <= 0.0 {
                return None;
            }
            return Some(z.ln_1p() / d);
        }
        match self {
            SqueezeFamily::Custom(c) => (c.log_unsqueeze)(ln_h).filter(|v| !v.is_nan()),
            _ => Some(ln_h),
        }
    }

    /// Elasticity `d ln h / d ln g` at `ln g`.
    pub fn elasticity(&self, ln_g: f64) -> f64 {
        if let Some(d) = self.deformation() {
            return (d * ln_g).exp();
        }
        match self {
            SqueezeFamily::Custom(c) => (c.elasticity)(ln_g),
            _ => 1.0,
        }
    }

    /// `ln h(g)`.
    pub fn squeeze_log(&self, ln_g: LogValue) -> Result<LogValue> {
        if ln_g.cutoff || !ln_g.ln_x.is_finite() {
            return Err(Error::domain(format!("squeeze_log needs a finite ln g, got {:?}", ln_g)));
        }
        Ok(LogValue::new(self.ln_h_raw(ln_g.ln_x)))
    }

    /// `ln H(e^{ln_h})`; past the Tsallis cutoff the excluded state is returned.
    pub fn unsqueeze_log(&self, ln_h: LogValue) -> Result<LogValue> {
        if ln_h.cutoff || !ln_h.ln_x.is_finite() {
            return Err(Error::domain(format!("unsqueeze_log needs a finite ln h, got {:?}", ln_h)));
        }
        Ok(match self.ln_inverse_raw(ln_h.ln_x) {
            Some(v) => LogValue::new(v),
            None => LogValue::excluded(),
        })
    }

    /// Derivative of `h` at `g`, both as the log-safe ratio `f/h` and as `f`.
    pub fn squeeze_slope(&self, ln_g: LogValue) -> Result<Slope> {
        if ln_g.cutoff || !ln_g.ln_x.is_finite() {
            return Err(Error::domain(format!("squeeze_slope needs a finite ln g, got {:?}", ln_g)));
        }
        let x = ln_g.ln_x;
        let elasticity = self.elasticity(x);
        let ln_ratio = match self.deformation() {
            // f/h = g^{-q}
            Some(d) => -(1.0 - d) * x,
            None => elasticity.ln() - x,
        };
        let ln_f = self.ln_h_raw(x) + ln_ratio;
        let f = ln_f.exp();
        Ok(Slope {
            ln_ratio,
            ln_f,
            f: if f.is_finite() && (f > 0.0 || ln_f == f64::NEG_INFINITY) { Some(f) } else { None },
            elasticity,
        })
    }

    /// `ln H(h(g) e^{-shift})`: the class of a row after exchanging with the
    /// environment at total conjugate product `shift = Σ y_i X_i`.
    ///
    /// For Tsallis this is evaluated as
    /// `ln g + ln[1 - (1-q) shift g^{q-1}] / (1-q)`, which stays accurate when
    /// `ln_q g` is huge.
    pub fn shifted_class_log(&self, ln_g: f64, shift: f64) -> LogValue {
        if shift == 0.0 {
            return LogValue::new(ln_g);
        }
        if let Some(d) = self.deformation() {
            // t = (1-q) · shift · g^{q-1}; argument is 1 - t
            let sign = (d * shift).signum();
            let ln_abs_t = (d * shift).abs().ln() - d * ln_g;
            if sign > 0.0 {
                if ln_abs_t >= 0.0 {
                    return LogValue::excluded();
                }
                return LogValue::new(ln_g + (-ln_abs_t.exp()).ln_1p() / d);
            }
            let ln_arg = if ln_abs_t > 36.0 { ln_abs_t + (-ln_abs_t).exp().ln_1p() } else { ln_abs_t.exp().ln_1p() };
            return LogValue::new(ln_g + ln_arg / d);
        }
        match self {
            SqueezeFamily::Custom(_) => match self.ln_inverse_raw(self.ln_h_raw(ln_g) - shift) {
                Some(v) => LogValue::new(v),
                None => LogValue::excluded(),
            },
            _ => LogValue::new(ln_g - shift),
        }
    }

    /// `h(x)` for a nonnegative density `x` (used by the kinetic equation).
    pub fn squeeze_value(&self, x: f64) -> f64 {
        if x == 0.0 {
            let v = self.ln_h_raw(f64::NEG_INFINITY).exp();
            return if v.is_nan() { 0.0 } else { v };
        }
        match self {
            SqueezeFamily::Identity => x,
            SqueezeFamily::Tsallis { q } if *q == 1.0 => x,
            _ => self.ln_h_raw(x.ln()).exp(),
        }
    }

    /// Scale factor multiplying the Gaussian fluctuation moments: the
    /// elasticity at the characteristic class. For Tsallis this is
    /// `1 + (q-1) Φ₀` with `Φ₀ = -ln_q G`; for BG it is exactly 1.
    pub fn fluctuation_scale(&self, ln_total_class: f64) -> f64 {
        match self {
            SqueezeFamily::Identity => 1.0,
            SqueezeFamily::Tsallis { q } if *q == 1.0 => 1.0,
            SqueezeFamily::Tsallis { q } => {
                let phi0 = -self.ln_h_raw(ln_total_class);
                1.0 + (q - 1.0) * phi0
            }
            SqueezeFamily::Custom(_) => self.elasticity(ln_total_class),
        }
    }
}

/// Configuration fragment `{"family": "identity" | "tsallis", "q": <real>}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezeConfig {
    pub family: FamilyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

impl SqueezeConfig {
    pub fn build(&self) -> Result<SqueezeFamily> {
        match self.family {
            FamilyKind::Identity => Ok(SqueezeFamily::Identity),
            FamilyKind::Tsallis => {
                let q = self.q.ok_or_else(|| Error::arg("tsallis squeeze requires `q`"))?;
                SqueezeFamily::tsallis(q)
            }
            FamilyKind::Custom => Err(Error::arg("custom squeeze families are code-level only")),
        }
    }
}

impl SqueezeFamily {
    /// Config form of a built-in family; `None` for custom families.
    pub fn config(&self) -> Option<SqueezeConfig> {
        match self {
            SqueezeFamily::Identity => Some(SqueezeConfig { family: FamilyKind::Identity, q: None }),
            SqueezeFamily::Tsallis { q } => Some(SqueezeConfig { family: FamilyKind::Tsallis, q: Some(*q) }),
            SqueezeFamily::Custom(_) => None,
        }
    }
}

//! Spatially homogeneous squeezed Boltzmann equation on a 2-D integer
//! velocity lattice.
//!
//! For every conserving collision `(i, j) → (k, l)` the incoming pair gains
//!
//! ```text
//! T · ξ(F_k, F_i) · ξ(F_l, F_j) · [h(F_k) h(F_l) - h(F_i) h(F_j)]
//! ```
//!
//! and the reverse collision, stored separately, handles `(k, l)`. The
//! functional `S = -Σ_i ∫ ln h(F) dF` is nondecreasing for any symmetric
//! nonnegative `ξ`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::adaptive_simpson;
use crate::squeeze::SqueezeFamily;

/// Integer velocities with `|v|² ≤ R²`, sorted lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VelocityLattice {
    radius: u32,
    velocities: Vec<[i32; 2]>,
    index: HashMap<[i32; 2], usize>,
}

impl VelocityLattice {
    pub fn new(radius: u32) -> Result<Self> {
        if radius == 0 || radius > 64 {
            return Err(Error::arg(format!("lattice radius must be in 1..=64, got {radius}")));
        }
        let r = radius as i32;
        let velocities: Vec<[i32; 2]> = (-r..=r)
            .flat_map(|vx| (-r..=r).map(move |vy| [vx, vy]))
            .filter(|[vx, vy]| vx * vx + vy * vy <= r * r)
            .collect();
        let index = velocities.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        Ok(VelocityLattice { radius, velocities, index })
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn velocities(&self) -> &[[i32; 2]] {
        &self.velocities
    }

    pub fn len(&self) -> usize {
        self.velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    pub fn index_of(&self, v: [i32; 2]) -> Option<usize> {
        self.index.get(&v).copied()
    }

    pub fn speed_squared(&self, i: usize) -> f64 {
        let [vx, vy] = self.velocities[i];
        (vx * vx + vy * vy) as f64
    }
}

/// One directed collision `(i, j) → (k, l)` with kernel weight `T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadruple {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub weight: f64,
}

/// All momentum- and energy-conserving collisions on a lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionNetwork {
    pub quadruples: Vec<Quadruple>,
    /// Largest number of collisions sharing one incoming velocity.
    pub degree: usize,
}

impl CollisionNetwork {
    /// Enumerates every `(i < j) → (k < l)` with `{k, l} ≠ {i, j}` that
    /// conserves momentum and kinetic energy, grouped by the incoming pair.
    /// Both directions of each collision appear, with the same weight.
    pub fn build(lattice: &VelocityLattice, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::arg(format!("collision weight must be positive, got {weight}")));
        }
        let v = lattice.velocities();
        let n = v.len();
        // bucket pairs by (total momentum, total energy)
        let mut buckets: HashMap<(i32, i32, i32), Vec<(usize, usize)>> = HashMap::new();
        for i in 0..n {
            for j in i + 1..n {
                let key = (
                    v[i][0] + v[j][0],
                    v[i][1] + v[j][1],
                    v[i][0] * v[i][0] + v[i][1] * v[i][1] + v[j][0] * v[j][0] + v[j][1] * v[j][1],
                );
                buckets.entry(key).or_default().push((i, j));
            }
        }
        let mut quadruples = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let key = (
                    v[i][0] + v[j][0],
                    v[i][1] + v[j][1],
                    v[i][0] * v[i][0] + v[i][1] * v[i][1] + v[j][0] * v[j][0] + v[j][1] * v[j][1],
                );
                for &(k, l) in &buckets[&key] {
                    if (k, l) != (i, j) {
                        quadruples.push(Quadruple { i, j, k, l, weight });
                    }
                }
            }
        }
        let mut per_velocity = vec![0usize; n];
        for q in &quadruples {
            per_velocity[q.i] += 1;
            per_velocity[q.j] += 1;
        }
        let degree = per_velocity.into_iter().max().unwrap_or(0);
        Ok(CollisionNetwork { quadruples, degree })
    }

    pub fn max_weight(&self) -> f64 {
        self.quadruples.iter().map(|q| q.weight).fold(0.0, f64::max)
    }
}

/// Symmetric factor `ξ(a, b)` in the collision term.
#[derive(Clone, Default)]
pub enum Xi {
    #[default]
    One,
    /// `1 / (1 + a b)`.
    Soft,
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Xi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Xi::One => write!(f, "One"),
            Xi::Soft => write!(f, "Soft"),
            Xi::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Xi {
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        match self {
            Xi::One => 1.0,
            Xi::Soft => 1.0 / (1.0 + a * b),
            Xi::Custom(g) => g(a, b),
        }
    }
}

/// Populations per lattice velocity at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KineticState {
    pub f: Vec<f64>,
    pub t: f64,
}

impl KineticState {
    pub fn new(f: Vec<f64>) -> Result<Self> {
        check_populations(&f)?;
        Ok(KineticState { f, t: 0.0 })
    }

    /// Populations drawn uniformly from `[0.5, 1.5)` with a seeded ChaCha8
    /// stream.
    pub fn random(lattice: &VelocityLattice, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        KineticState { f: (0..lattice.len()).map(|_| rng.random_range(0.5..1.5)).collect(), t: 0.0 }
    }
}

fn check_populations(f: &[f64]) -> Result<()> {
    if let Some((i, v)) = f.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::domain(format!("population {i} is {v}; populations must be finite and nonnegative")));
    }
    Ok(())
}

/// Conserved totals `Σ F`, `Σ F v` and `Σ F |v|²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Invariants {
    pub number: f64,
    pub momentum: [f64; 2],
    pub energy: f64,
}

impl Invariants {
    /// Largest relative change of any invariant against `reference`; the
    /// momentum is measured relative to the number.
    pub fn drift_from(&self, reference: &Invariants) -> f64 {
        let n = (self.number - reference.number).abs() / reference.number.abs();
        let e = (self.energy - reference.energy).abs() / reference.energy.abs().max(f64::MIN_POSITIVE);
        let scale = reference.number.abs();
        let p = (0..2).map(|d| (self.momentum[d] - reference.momentum[d]).abs() / scale).fold(0.0, f64::max);
        n.max(e).max(p)
    }
}

/// One row of a kinetic trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    #[serde(rename = "S")]
    pub entropy: f64,
    #[serde(rename = "sum_F")]
    pub number: f64,
    #[serde(rename = "sum_F_v2")]
    pub energy: f64,
    pub max_abs_rhs: f64,
}

/// Settings for [`KineticModel::run`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunSettings {
    /// Step size; the stability bound is used when `None`.
    pub dt: Option<f64>,
    pub steps: usize,
    /// Record a trace row every this many steps (0 records only the ends).
    pub trace_every: usize,
    /// Record a population snapshot every this many steps (0 disables).
    pub snapshot_every: usize,
    /// Stop early once `max |rhs|` falls below this value.
    pub stop_below: Option<f64>,
}

/// Result of [`KineticModel::run`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub state: KineticState,
    pub steps_taken: usize,
    pub dt: f64,
    pub trace: Vec<TraceRow>,
    pub snapshots: Vec<KineticState>,
    /// Smallest per-step entropy change seen.
    pub min_entropy_increment: f64,
    /// Largest invariant drift seen, relative to the initial state.
    pub max_drift: f64,
}

/// Lattice, collision network, squeeze family and `ξ` together.
#[derive(Clone, Debug)]
pub struct KineticModel {
    pub lattice: VelocityLattice,
    pub network: CollisionNetwork,
    pub family: SqueezeFamily,
    pub xi: Xi,
}

impl KineticModel {
    pub fn new(radius: u32, family: SqueezeFamily, xi: Xi) -> Result<Self> {
        let lattice = VelocityLattice::new(radius)?;
        let network = CollisionNetwork::build(&lattice, 1.0)?;
        Ok(KineticModel { lattice, network, family, xi })
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.lattice.len() {
            return Err(Error::arg(format!("{} populations for {} velocities", f.len(), self.lattice.len())));
        }
        Ok(())
    }

    fn rhs_unchecked(&self, f: &[f64]) -> Vec<f64> {
        let h: Vec<f64> = f.iter().map(|&x| self.family.squeeze_value(x)).collect();
        let mut out = vec![0.0; f.len()];
        for q in &self.network.quadruples {
            let bracket = q.weight
                * self.xi.eval(f[q.k], f[q.i])
                * self.xi.eval(f[q.l], f[q.j])
                * (h[q.k] * h[q.l] - h[q.i] * h[q.j]);
            out[q.i] += bracket;
            out[q.j] += bracket;
        }
        out
    }

    /// `dF/dt` for every velocity.
    pub fn collision_rhs(&self, state: &KineticState) -> Result<Vec<f64>> {
        self.check_len(&state.f)?;
        check_populations(&state.f)?;
        Ok(self.rhs_unchecked(&state.f))
    }

    /// `0.1 / (max T · max h(F) · degree)`.
    pub fn stable_dt(&self, state: &KineticState) -> f64 {
        let hmax = state.f.iter().map(|&x| self.family.squeeze_value(x)).fold(0.0, f64::max);
        0.1 / (self.network.max_weight() * hmax * self.network.degree.max(1) as f64)
    }

    /// One classical RK4 step.
    pub fn step(&self, state: &KineticState, dt: f64) -> Result<KineticState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::arg(format!("time step must be positive, got {dt}")));
        }
        let k1 = self.collision_rhs(state)?;
        let probe = |k: &[f64], c: f64| -> Result<Vec<f64>> {
            let g: Vec<f64> = state.f.iter().zip(k).map(|(f, k)| (f + c * dt * k).max(0.0)).collect();
            let out = self.rhs_unchecked(&g);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::Unstable { dt, reason: "non-finite collision rate".into() });
            }
            Ok(out)
        };
        let k2 = probe(&k1, 0.5)?;
        let k3 = probe(&k2, 0.5)?;
        let k4 = probe(&k3, 1.0)?;
        let mut f = Vec::with_capacity(state.f.len());
        for i in 0..state.f.len() {
            let v = state.f[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if !v.is_finite() {
                return Err(Error::Unstable { dt, reason: format!("population {i} became {v}") });
            }
            if v < 0.0 {
                if v > -1e-14 {
                    f.push(0.0);
                    continue;
                }
                return Err(Error::Unstable { dt, reason: format!("population {i} went negative ({v:e})") });
            }
            f.push(v);
        }
        Ok(KineticState { f, t: state.t + dt })
    }

    /// `S = -Σ_i ∫ ln h(F) dF`.
    pub fn entropy(&self, state: &KineticState) -> Result<f64> {
        entropy_functional(state, &self.family)
    }

    pub fn invariants(&self, state: &KineticState) -> Invariants {
        let mut inv = Invariants { number: 0.0, momentum: [0.0; 2], energy: 0.0 };
        for (f, v) in state.f.iter().zip(self.lattice.velocities()) {
            inv.number += f;
            inv.momentum[0] += f * v[0] as f64;
            inv.momentum[1] += f * v[1] as f64;
            inv.energy += f * (v[0] * v[0] + v[1] * v[1]) as f64;
        }
        inv
    }

    /// `max |h(F_k) h(F_l) - h(F_i) h(F_j)|` over all collisions.
    pub fn detailed_balance_residual(&self, state: &KineticState) -> f64 {
        let h: Vec<f64> = state.f.iter().map(|&x| self.family.squeeze_value(x)).collect();
        self.network.quadruples.iter().map(|q| (h[q.k] * h[q.l] - h[q.i] * h[q.j]).abs()).fold(0.0, f64::max)
    }

    fn trace_row(&self, state: &KineticState, rhs: &[f64]) -> Result<TraceRow> {
        let inv = self.invariants(state);
        Ok(TraceRow {
            t: state.t,
            entropy: self.entropy(state)?,
            number: inv.number,
            energy: inv.energy,
            max_abs_rhs: rhs.iter().map(|v| v.abs()).fold(0.0, f64::max),
        })
    }

    /// Integrates for up to `settings.steps` steps, tracking the entropy
    /// increments and invariant drift.
    pub fn run(&self, initial: &KineticState, settings: &RunSettings) -> Result<RunOutcome> {
        self.check_len(&initial.f)?;
        check_populations(&initial.f)?;
        let dt = settings.dt.unwrap_or_else(|| self.stable_dt(initial));
        let reference = self.invariants(initial);
        let mut state = initial.clone();
        let mut rhs = self.collision_rhs(&state)?;
        let mut s = self.entropy(&state)?;
        let mut trace = vec![self.trace_row(&state, &rhs)?];
        let mut snapshots = Vec::new();
        if settings.snapshot_every > 0 {
            snapshots.push(state.clone());
        }
        let mut min_inc = f64::INFINITY;
        let mut max_drift: f64 = 0.0;
        let mut taken = 0;
        let converged = |rhs: &[f64]| settings.stop_below.is_some_and(|tol| rhs.iter().all(|v| v.abs() < tol));
        while taken < settings.steps && !converged(&rhs) {
            state = self.step(&state, dt)?;
            taken += 1;
            rhs = self.rhs_unchecked(&state.f);
            let s_new = self.entropy(&state)?;
            min_inc = min_inc.min(s_new - s);
            s = s_new;
            max_drift = max_drift.max(self.invariants(&state).drift_from(&reference));
            if settings.trace_every > 0 && taken % settings.trace_every == 0 {
                trace.push(self.trace_row(&state, &rhs)?);
            }
            if settings.snapshot_every > 0 && taken % settings.snapshot_every == 0 {
                snapshots.push(state.clone());
            }
        }
        if trace.last().map(|r| r.t) != Some(state.t) {
            trace.push(self.trace_row(&state, &rhs)?);
        }
        Ok(RunOutcome { state, steps_taken: taken, dt, trace, snapshots, min_entropy_increment: min_inc, max_drift })
    }

    /// Least-squares fit of `ln F` on `[1, v_x, v_y, |v|²]`. Returns the
    /// coefficients and the largest absolute residual.
    pub fn log_affine_fit(&self, state: &KineticState) -> Result<([f64; 4], f64)> {
        self.check_len(&state.f)?;
        if state.f.iter().any(|&f| f <= 0.0) {
            return Err(Error::domain("log-affine fit needs strictly positive populations"));
        }
        let n = state.f.len();
        let a = DMatrix::from_fn(n, 4, |r, c| {
            let [vx, vy] = self.lattice.velocities()[r];
            match c {
                0 => 1.0,
                1 => vx as f64,
                2 => vy as f64,
                _ => (vx * vx + vy * vy) as f64,
            }
        });
        let b = DVector::from_iterator(n, state.f.iter().map(|f| f.ln()));
        let coef = a
            .clone()
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| Error::domain(format!("least-squares solve failed: {e}")))?;
        let residual = (&a * &coef - &b).abs().max();
        Ok(([coef[0], coef[1], coef[2], coef[3]], residual))
    }
}

/// `dF/dt` for the given network, family and `ξ`.
pub fn collision_rhs(
    state: &KineticState,
    lattice: &VelocityLattice,
    network: &CollisionNetwork,
    family: &SqueezeFamily,
    xi: &Xi,
) -> Result<Vec<f64>> {
    KineticModel { lattice: lattice.clone(), network: network.clone(), family: family.clone(), xi: xi.clone() }
        .collision_rhs(state)
}

/// `-Σ_i ∫ ln h(F) dF` with closed forms for the built-in families.
///
/// BG: `-Σ (F ln F - F)`. Tsallis `q < 2`: `-Σ (F^{2-q}/(2-q) - F)/(1-q)`,
/// integrated from 0. Tsallis `q ≥ 2` has a non-integrable `ln h` at 0, so
/// the integral starts at `F = 1` instead; `q = 2` gives `-Σ (F - 1 - ln F)`.
/// Custom families use adaptive quadrature from 0.
pub fn entropy_functional(state: &KineticState, family: &SqueezeFamily) -> Result<f64> {
    check_populations(&state.f)?;
    let per = |f: f64| -> Result<f64> {
        match family {
            SqueezeFamily::Tsallis { q } if *q != 1.0 => {
                let q = *q;
                let d = 1.0 - q;
                let prim = |x: f64| (x.powf(2.0 - q) / (2.0 - q) - x) / d;
                Ok(if q < 2.0 {
                    prim(f)
                } else if q == 2.0 {
                    f - 1.0 - f.ln()
                } else {
                    prim(f) - prim(1.0)
                })
            }
            SqueezeFamily::Custom(_) => {
                if f == 0.0 {
                    return Ok(0.0);
                }
                // x = F u² removes integrable singularities at 0
                adaptive_simpson(
                    |u| {
                        // the endpoint takes the limiting value, which is
                        // nonzero when ln h ~ x^{-1/2}
                        let u = u.max(1e-100);
                        family.ln_h_raw((f * u * u).ln()) * 2.0 * f * u
                    },
                    0.0,
                    1.0,
                    1e-12 * f.max(1.0),
                    40,
                )
            }
            _ => Ok(if f == 0.0 { 0.0 } else { f * f.ln() - f }),
        }
    };
    state.f.iter().try_fold(0.0, |acc, &f| Ok(acc - per(f)?))
}

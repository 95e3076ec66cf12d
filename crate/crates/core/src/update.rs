//! Recursive mixture-weight update with a positive floor.
//!
//! For every observed point `u`, in order:
//!
//! ```text
//! o_b  = pi_b N(u; mu_b, sigma) / g(u)
//! pi_b = (1 - alpha) pi_b + alpha (o_b - c) / (1 - B c)
//! ```
//!
//! followed by the floor pass: each component with `pi_b <= 0`, in ascending
//! index order, divides every other entry by `1 + eps - pi_b` and is then set
//! to `eps`. Ownership is recomputed from the in-progress weights for every point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{log_sum_exp, ComponentBank, MixtureWeights};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateSchedule {
    pub alpha: f64,
    pub c: f64,
    pub epsilon: f64,
    /// Rescale to an exact unit sum after a floor event. Off by default; the
    /// plain floor pass leaves an `O(eps)` surplus.
    #[serde(default)]
    pub exact_renormalize: bool,
}

impl UpdateSchedule {
    pub fn new(alpha: f64, c: f64, epsilon: f64, components: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Schedule(format!("alpha = {alpha} not in (0, 1)")));
        }
        if !(c >= 0.0 && (components as f64) * c < 1.0) {
            return Err(Error::Schedule(format!(
                "c = {c} must satisfy 0 <= B c < 1 with B = {components}"
            )));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Schedule(format!(
                "epsilon = {epsilon} not in [0, 1]"
            )));
        }
        Ok(Self {
            alpha,
            c,
            epsilon,
            exact_renormalize: false,
        })
    }

    pub fn with_exact_renormalize(mut self, on: bool) -> Self {
        self.exact_renormalize = on;
        self
    }
}

/// `alpha = 1/k`, `c = 1/(k B^2)`. Requires `k >= 2` so that `alpha < 1`.
pub fn schedule_from_k(k: usize, components: usize, epsilon: f64) -> Result<UpdateSchedule> {
    if k < 2 {
        return Err(Error::Schedule(format!(
            "retrieval count {k} < 2 leaves alpha outside (0, 1)"
        )));
    }
    if components == 0 {
        return Err(Error::Schedule("component count must be at least 1".into()));
    }
    let k = k as f64;
    let b = components as f64;
    UpdateSchedule::new(1.0 / k, 1.0 / (k * b * b), epsilon, components)
}

/// Posterior responsibilities of each component for one point.
#[derive(Debug, Clone, PartialEq)]
pub struct OwnershipVector(Vec<f64>);

impl OwnershipVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

pub fn ownership(weights: &[f64], u: &[f64], bank: &ComponentBank) -> OwnershipVector {
    let mut logs: Vec<f64> = weights
        .iter()
        .enumerate()
        .map(|(b, &p)| p.ln() + bank.log_component_density(u, b))
        .collect();
    let lse = log_sum_exp(&logs);
    for l in logs.iter_mut() {
        *l = (*l - lse).exp();
    }
    OwnershipVector(logs)
}

/// The linear recursion step, before any floor handling. Preserves the sum of
/// the weights exactly (up to rounding) because ownerships sum to one.
pub fn raw_step(weights: &mut [f64], own: &OwnershipVector, sched: &UpdateSchedule) {
    let b = weights.len() as f64;
    let denom = 1.0 - b * sched.c;
    for (w, &o) in weights.iter_mut().zip(own.values()) {
        *w = (1.0 - sched.alpha) * *w + sched.alpha * (o - sched.c) / denom;
    }
}

/// Floor pass. Returns the number of components that were lifted to `epsilon`.
pub fn apply_floor(weights: &mut [f64], epsilon: f64, exact_renormalize: bool) -> usize {
    let mut events = 0;
    for b in 0..weights.len() {
        let offender = weights[b];
        if offender <= 0.0 {
            let scale = 1.0 + epsilon - offender;
            for (j, w) in weights.iter_mut().enumerate() {
                if j != b {
                    *w /= scale;
                }
            }
            weights[b] = epsilon;
            events += 1;
        }
    }
    if exact_renormalize && events > 0 {
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
    }
    events
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub weights: MixtureWeights,
    pub floor_events: usize,
}

/// One iteration of the outer loop: ownership, recursion, floor.
pub fn apply_point(
    weights: &MixtureWeights,
    u: &[f64],
    sched: &UpdateSchedule,
    bank: &ComponentBank,
) -> UpdateOutcome {
    let mut values = weights.values().to_vec();
    let floor_events = step_in_place(&mut values, u, sched, bank);
    UpdateOutcome {
        weights: MixtureWeights::from_raw(values, sched.epsilon),
        floor_events,
    }
}

fn step_in_place(
    values: &mut [f64],
    u: &[f64],
    sched: &UpdateSchedule,
    bank: &ComponentBank,
) -> usize {
    let own = ownership(values, u, bank);
    raw_step(values, &own, sched);
    apply_floor(values, sched.epsilon, sched.exact_renormalize)
}

/// Sequential fold of [`apply_point`] over `points` in order. An empty point
/// sequence leaves the weights untouched.
pub fn update_weights<'a, I>(
    weights: &MixtureWeights,
    points: I,
    sched: &UpdateSchedule,
    bank: &ComponentBank,
) -> UpdateOutcome
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut values = weights.values().to_vec();
    let mut floor_events = 0;
    for u in points {
        floor_events += step_in_place(&mut values, u, sched, bank);
    }
    UpdateOutcome {
        weights: MixtureWeights::from_raw(values, sched.epsilon),
        floor_events,
    }
}

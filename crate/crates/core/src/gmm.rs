//! Gaussian component bank, mixture weights and mixture models.
//!
//! All models in a network share one [`ComponentBank`]: `B` fixed means and a
//! single covariance matrix. A model is fully described by its
//! [`MixtureWeights`], which are the only quantity that evolves over time.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serialized form of a [`ComponentBank`], as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankParams {
    pub means: Vec<Vec<f64>>,
    /// `d x d` covariance shared by every component, one row per inner vector.
    pub covariance: Vec<Vec<f64>>,
}

impl BankParams {
    pub fn build(&self) -> Result<ComponentBank> {
        ComponentBank::new(self.means.clone(), self.covariance.clone())
    }

    pub fn scalar(means: &[f64], variance: f64) -> Self {
        Self {
            means: means.iter().map(|&m| vec![m]).collect(),
            covariance: vec![vec![variance]],
        }
    }
}

/// Fixed Gaussian components `N(mu_b, sigma)` shared by every model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "BankParams", into = "BankParams")]
pub struct ComponentBank {
    dim: usize,
    means: Vec<Vec<f64>>,
    covariance: Vec<f64>,
    // lower Cholesky factor, row-major
    chol: Vec<f64>,
    log_norm: f64,
    max_eigenvalue: f64,
}

impl ComponentBank {
    pub fn new(means: Vec<Vec<f64>>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let b = means.len();
        if b == 0 {
            return Err(Error::param("means", "at least one component is required"));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::param("means", "dimension must be at least 1"));
        }
        for m in &means {
            if m.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.len(),
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("means", "entries must be finite"));
            }
        }
        for i in 0..b {
            for j in (i + 1)..b {
                if means[i] == means[j] {
                    return Err(Error::param(
                        "means",
                        format!("components {} and {} share a mean", i + 1, j + 1),
                    ));
                }
            }
        }
        if covariance.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: covariance.len(),
            });
        }
        let mut flat = Vec::with_capacity(dim * dim);
        for row in &covariance {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        let sigma = DMatrix::from_row_slice(dim, dim, &flat);
        let scale = sigma.amax().max(f64::MIN_POSITIVE);
        if (&sigma - sigma.transpose()).amax() > 1e-12 * scale
            || flat.iter().any(|v| !v.is_finite())
        {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = sigma.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l();
        let log_det: f64 = 2.0 * (0..dim).map(|i| l[(i, i)].ln()).sum::<f64>();
        let mut chol_flat = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                chol_flat.push(l[(i, j)]);
            }
        }
        let max_eigenvalue = sigma
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::MIN, f64::max);

        Ok(Self {
            dim,
            means,
            covariance: flat,
            chol: chol_flat,
            log_norm: -0.5 * (dim as f64) * (2.0 * PI).ln() - 0.5 * log_det,
            max_eigenvalue,
        })
    }

    /// One-dimensional bank with scalar means and variance.
    pub fn scalar(means: &[f64], variance: f64) -> Result<Self> {
        Self::new(
            means.iter().map(|&m| vec![m]).collect(),
            vec![vec![variance]],
        )
    }

    pub fn components(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn mean(&self, b: usize) -> &[f64] {
        &self.means[b]
    }

    /// Row-major covariance.
    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    /// Largest eigenvalue of the covariance (its spectral norm).
    pub fn spectral_norm(&self) -> f64 {
        self.max_eigenvalue
    }

    /// Smallest distance between two distinct means, in units of the largest
    /// standard deviation of the shared covariance. Infinite when `B = 1`.
    pub fn separation(&self) -> f64 {
        let mut min = f64::INFINITY;
        for i in 0..self.means.len() {
            for j in (i + 1)..self.means.len() {
                let d: f64 = self.means[i]
                    .iter()
                    .zip(&self.means[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                min = min.min(d);
            }
        }
        min / self.max_eigenvalue.sqrt()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    // (x - mu)^T sigma^-1 (x - mu) by forward substitution against the factor
    fn mahalanobis_sq(&self, x: &[f64], b: usize) -> f64 {
        let d = self.dim;
        let mu = &self.means[b];
        if d == 1 {
            let z = (x[0] - mu[0]) / self.chol[0];
            return z * z;
        }
        let mut y = vec![0.0; d];
        let mut acc = 0.0;
        for i in 0..d {
            let mut s = x[i] - mu[i];
            for j in 0..i {
                s -= self.chol[i * d + j] * y[j];
            }
            y[i] = s / self.chol[i * d + i];
            acc += y[i] * y[i];
        }
        acc
    }

    /// `ln N(x; mu_b, sigma)`. Panics if `x` has the wrong dimension or `b` is out of range.
    pub fn log_component_density(&self, x: &[f64], b: usize) -> f64 {
        assert_eq!(x.len(), self.dim, "point dimension");
        self.log_norm - 0.5 * self.mahalanobis_sq(x, b)
    }

    pub fn component_density(&self, x: &[f64], b: usize) -> f64 {
        self.log_component_density(x, b).exp()
    }

    fn draw_from(&self, b: usize, rng: &mut impl Rng, out: &mut Vec<f64>) {
        let d = self.dim;
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let mu = &self.means[b];
        for i in 0..d {
            let mut v = mu[i];
            for j in 0..=i {
                v += self.chol[i * d + j] * z[j];
            }
            out.push(v);
        }
    }
}

impl TryFrom<BankParams> for ComponentBank {
    type Error = Error;

    fn try_from(p: BankParams) -> Result<Self> {
        ComponentBank::new(p.means, p.covariance)
    }
}

impl From<ComponentBank> for BankParams {
    fn from(bank: ComponentBank) -> Self {
        let d = bank.dim;
        BankParams {
            covariance: bank.covariance.chunks(d).map(|r| r.to_vec()).collect(),
            means: bank.means,
        }
    }
}

/// A model's mixture weights over the bank's components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureWeights {
    values: Vec<f64>,
    floor: f64,
}

impl MixtureWeights {
    /// Validates that entries lie in `[0, 1]` and sum to one within the drift the
    /// floor renormalization can introduce.
    pub fn new(values: Vec<f64>, floor: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("mixture weights"));
        }
        if !(0.0..=1.0).contains(&floor) {
            return Err(Error::param("floor", format!("{floor} not in [0, 1]")));
        }
        if values
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0)
        {
            return Err(Error::param("weights", "entries must lie in [0, 1]"));
        }
        let sum: f64 = values.iter().sum();
        let slack = Self::sum_slack(values.len(), floor);
        if (sum - 1.0).abs() > slack {
            return Err(Error::param(
                "weights",
                format!("entries sum to {sum}, outside 1 +/- {slack:e}"),
            ));
        }
        Ok(Self { values, floor })
    }

    pub(crate) fn from_raw(values: Vec<f64>, floor: f64) -> Self {
        Self { values, floor }
    }

    /// Allowed deviation of the weight sum from one.
    pub fn sum_slack(components: usize, floor: f64) -> f64 {
        components as f64 * floor * (1.0 + floor) + 1e-12
    }

    pub fn uniform(components: usize, floor: f64) -> Self {
        Self::from_raw(vec![1.0 / components as f64; components], floor)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }
}

/// `g_i(x) = sum_b pi_b N(x; mu_b, sigma)`.
#[derive(Debug, Clone)]
pub struct GmmModel {
    pub bank: Arc<ComponentBank>,
    pub weights: MixtureWeights,
    pub model_id: usize,
}

impl GmmModel {
    pub fn new(bank: Arc<ComponentBank>, weights: MixtureWeights, model_id: usize) -> Result<Self> {
        if weights.len() != bank.components() {
            return Err(Error::DimensionMismatch {
                expected: bank.components(),
                got: weights.len(),
            });
        }
        Ok(Self {
            bank,
            weights,
            model_id,
        })
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.bank.check_point(x)?;
        Ok(log_mixture_density(&self.bank, self.weights.values(), x))
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        self.log_density(x).map(f64::exp)
    }

    /// Draws `count` points: component by weight, then the Gaussian draw.
    /// Points are returned flattened, `count * d` values.
    pub fn sample(&self, count: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
        if count == 0 {
            return Err(Error::param("count", "must be at least 1"));
        }
        let w = self.weights.values();
        let total: f64 = w.iter().sum();
        let mut out = Vec::with_capacity(count * self.bank.dim());
        for _ in 0..count {
            let mut target = rng.random::<f64>() * total;
            let mut b = w.len() - 1;
            for (j, &p) in w.iter().enumerate() {
                if target < p {
                    b = j;
                    break;
                }
                target -= p;
            }
            self.bank.draw_from(b, rng, &mut out);
        }
        Ok(out)
    }
}

/// Max-shifted log-sum-exp over `ln pi_b + ln N(x; mu_b, sigma)`.
pub(crate) fn log_mixture_density(bank: &ComponentBank, weights: &[f64], x: &[f64]) -> f64 {
    let terms: Vec<f64> = weights
        .iter()
        .enumerate()
        .map(|(b, &p)| p.ln() + bank.log_component_density(x, b))
        .collect();
    log_sum_exp(&terms)
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Draws `n` weight vectors from a symmetric Dirichlet(`a`) as normalized
/// independent Gamma(`a`, 1) variates.
pub fn init_weights(
    n: usize,
    components: usize,
    concentration: f64,
    floor: f64,
    rng: &mut impl Rng,
) -> Result<Vec<MixtureWeights>> {
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(Error::param(
            "concentration",
            format!("{concentration} must be positive"),
        ));
    }
    if components == 0 {
        return Err(Error::param("components", "must be at least 1"));
    }
    let gamma =
        Gamma::new(concentration, 1.0).map_err(|e| Error::param("concentration", e.to_string()))?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v: Vec<f64> = (0..components).map(|_| gamma.sample(rng)).collect();
        let mut total: f64 = v.iter().sum();
        while total <= 0.0 {
            // every gamma draw underflowed; only reachable for tiny concentrations
            v = (0..components).map(|_| gamma.sample(rng)).collect();
            total = v.iter().sum();
        }
        v.iter_mut().for_each(|x| *x /= total);
        out.push(MixtureWeights::from_raw(v, floor));
    }
    Ok(out)
}

//! Network of mixture models sharing one sample pool.
//!
//! Each step `t`:
//! 1. record the distance matrix of the current weights;
//! 2. every model generates `L` points from its current mixture;
//! 3. every model independently draws `k_t = floor(beta |A_t|)` points from
//!    the pool as it stood at the start of the step and updates its weights
//!    (skipped when `k_t < 2`);
//! 4. all `n L` generated points are posted.
//!
//! After `T` steps a final record is taken, so a trajectory has `T + 1` records.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{init_weights, BankParams, ComponentBank, GmmModel, MixtureWeights};
use crate::metrics::{distance_matrix, frobenius_norm, DistanceMatrix};
use crate::pool::{retrieval_count, SamplePool};
use crate::rng::{substream, Stream};
use crate::update::{schedule_from_k, update_weights, UpdateSchedule};
use crate::DEFAULT_EPSILON;

/// How the learning rate and bias follow from the retrieval count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleRule {
    /// `alpha = 1/k`, `c = 1/(k B^2)`.
    #[default]
    ReciprocalK,
}

impl ScheduleRule {
    /// `None` when `k` is too small for the rule to produce a valid schedule.
    pub fn schedule(&self, k: usize, components: usize, epsilon: f64) -> Option<UpdateSchedule> {
        match self {
            ScheduleRule::ReciprocalK => schedule_from_k(k, components, epsilon).ok(),
        }
    }
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Number of models.
    pub n: usize,
    pub bank: BankParams,
    /// Dirichlet concentration for the initial weights.
    #[serde(rename = "a")]
    pub concentration: f64,
    /// Points generated per model per step.
    #[serde(rename = "L")]
    pub points_per_step: usize,
    pub beta: f64,
    #[serde(rename = "T")]
    pub steps: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub schedule_rule: ScheduleRule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_pool: Vec<Vec<f64>>,
    /// Fixed starting weights, one vector per model. Drawn from the Dirichlet
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_weights: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub exact_renormalize: bool,
}

impl SimConfig {
    /// Two components at -5 and 5 with unit variance, three models,
    /// `a = 1`, `beta = 0.5`, `L = 3`, `T = 200`, empty initial pool.
    pub fn baseline(seed: u64) -> Self {
        Self {
            n: 3,
            bank: BankParams::scalar(&[-5.0, 5.0], 1.0),
            concentration: 1.0,
            points_per_step: 3,
            beta: 0.5,
            steps: 200,
            epsilon: DEFAULT_EPSILON,
            schedule_rule: ScheduleRule::ReciprocalK,
            seed,
            initial_pool: Vec::new(),
            initial_weights: None,
            exact_renormalize: false,
        }
    }

    pub fn validate(&self) -> Result<ComponentBank> {
        let bank = self.bank.build()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 2 {
            return bad(format!("n = {} but at least 2 models are required", self.n));
        }
        if self.steps < 1 {
            return bad("T must be at least 1".into());
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("beta = {} not in (0, 1]", self.beta));
        }
        if self.points_per_step < 1 {
            return bad("L must be at least 1".into());
        }
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return bad(format!("a = {} must be positive", self.concentration));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon = {} not in [0, 1]", self.epsilon));
        }
        if let Some(p) = self.initial_pool.iter().find(|p| p.len() != bank.dim()) {
            return bad(format!(
                "initial pool point of dimension {} in a {}-dimensional bank",
                p.len(),
                bank.dim()
            ));
        }
        if let Some(ws) = &self.initial_weights {
            if ws.len() != self.n {
                return bad(format!(
                    "{} initial weight vectors for {} models",
                    ws.len(),
                    self.n
                ));
            }
            for w in ws {
                if w.len() != bank.components() {
                    return bad(format!(
                        "initial weights of length {} for {} components",
                        w.len(),
                        bank.components()
                    ));
                }
                MixtureWeights::new(w.clone(), self.epsilon)
                    .map_err(|e| Error::Config(format!("initial weights: {e}")))?;
            }
        }
        Ok(bank)
    }

    /// Retrieval count used at step `t`; deterministic because the pool grows
    /// by exactly `n L` per step.
    pub fn retrieval_schedule(&self) -> Vec<usize> {
        (0..=self.steps)
            .map(|t| retrieval_count(self.pool_size_at(t), self.beta))
            .collect()
    }

    pub fn pool_size_at(&self, t: usize) -> usize {
        self.initial_pool.len() + self.n * self.points_per_step * t
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    /// Weights of every model at the start of the step.
    pub weights: Vec<Vec<f64>>,
    pub distance: DistanceMatrix,
    pub frobenius_norm: f64,
    pub pool_size: usize,
    /// `None` while the pool is empty.
    pub synthetic_fraction: Option<f64>,
    /// Retrieval count for this step.
    pub k: usize,
    /// Floor events summed over all models during this step's update.
    pub floor_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub config: SimConfig,
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.frobenius_norm).collect()
    }

    /// Deterministic JSON encoding.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// `t,frobenius_norm,pool_size,synthetic_fraction,k_t`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,frobenius_norm,pool_size,synthetic_fraction,k_t")?;
        for r in &self.records {
            let frac = r
                .synthetic_fraction
                .map(|f| f.to_string())
                .unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{}",
                r.t, r.frobenius_norm, r.pool_size, frac, r.k
            )?;
        }
        Ok(())
    }
}

/// Mutable state of a running network.
#[derive(Debug, Clone)]
pub struct SimState {
    pub bank: Arc<ComponentBank>,
    pub weights: Vec<MixtureWeights>,
    pub pool: SamplePool,
    pub t: usize,
}

impl SimState {
    pub fn init(config: &SimConfig) -> Result<Self> {
        let bank = Arc::new(config.validate()?);
        let weights = match &config.initial_weights {
            Some(ws) => ws
                .iter()
                .map(|w| MixtureWeights::new(w.clone(), config.epsilon))
                .collect::<Result<Vec<_>>>()?,
            None => {
                let mut rng = substream(config.seed, Stream::Init, 0, 0);
                init_weights(
                    config.n,
                    bank.components(),
                    config.concentration,
                    config.epsilon,
                    &mut rng,
                )?
            }
        };
        let pool = SamplePool::with_seed(bank.dim(), &config.initial_pool)?;
        Ok(Self {
            bank,
            weights,
            pool,
            t: 0,
        })
    }

    /// Snapshot of the current weights, pool and distances without advancing.
    pub fn record(&self, config: &SimConfig) -> Result<StepRecord> {
        let weights: Vec<Vec<f64>> = self.weights.iter().map(|w| w.values().to_vec()).collect();
        let distance = distance_matrix(&weights)?;
        Ok(StepRecord {
            t: self.t,
            frobenius_norm: frobenius_norm(&distance),
            distance,
            weights,
            pool_size: self.pool.len(),
            synthetic_fraction: self.pool.synthetic_fraction().ok(),
            k: retrieval_count(self.pool.len(), config.beta),
            floor_events: 0,
        })
    }

    /// Advances one step and returns the record taken at its start.
    pub fn step(&mut self, config: &SimConfig) -> Result<StepRecord> {
        let mut record = self.record(config)?;
        let k = record.k;
        let components = self.bank.components();
        let schedule = config
            .schedule_rule
            .schedule(k, components, config.epsilon)
            .map(|s| s.with_exact_renormalize(config.exact_renormalize));

        let mut generated = Vec::with_capacity(self.weights.len());
        let mut next = Vec::with_capacity(self.weights.len());
        for (i, w) in self.weights.iter().enumerate() {
            let mut rng = substream(config.seed, Stream::Model, i as u64 + 1, self.t as u64);
            let model = GmmModel::new(Arc::clone(&self.bank), w.clone(), i + 1)?;
            generated.push(model.sample(config.points_per_step, &mut rng)?);
            match &schedule {
                Some(s) => {
                    let idx = self.pool.draw(k, &mut rng)?;
                    let out =
                        update_weights(w, idx.iter().map(|&j| self.pool.item(j)), s, &self.bank);
                    record.floor_events += out.floor_events;
                    next.push(out.weights);
                }
                None => next.push(w.clone()),
            }
        }
        for (i, pts) in generated.iter().enumerate() {
            self.pool.post(pts, i + 1, self.t)?;
        }
        self.weights = next;
        self.t += 1;
        Ok(record)
    }
}

/// Runs `config` with its own seed.
pub fn run(config: &SimConfig) -> Result<Trajectory> {
    let mut state = SimState::init(config)?;
    let mut records = Vec::with_capacity(config.steps + 1);
    for _ in 0..config.steps {
        records.push(state.step(config)?);
    }
    records.push(state.record(config)?);
    Ok(Trajectory {
        seed: config.seed,
        config: config.clone(),
        records,
    })
}

/// Runs one trajectory per seed on up to `jobs` threads. Output order follows
/// `seeds`; results do not depend on `jobs`.
pub fn run_replicates(config: &SimConfig, seeds: &[u64], jobs: usize) -> Result<Vec<Trajectory>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| run(&config.clone().with_seed(s)))
            .collect()
    })
}

/// Seeds that appear more than once, in first-seen order.
pub fn duplicate_seeds(seeds: &[u64]) -> Vec<u64> {
    let mut seen = std::collections::BTreeSet::new();
    let mut dups = Vec::new();
    for &s in seeds {
        if !seen.insert(s) && !dups.contains(&s) {
            dups.push(s);
        }
    }
    dups
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SimConfig {
        SimConfig {
            steps: 15,
            ..SimConfig::baseline(seed)
        }
    }

    #[test]
    fn first_step_is_generation_only() {
        let cfg = small(1);
        let mut state = SimState::init(&cfg).unwrap();
        let before = state.weights.clone();
        let rec = state.step(&cfg).unwrap();
        assert_eq!(rec.k, 0);
        assert_eq!(rec.pool_size, 0);
        assert_eq!(rec.synthetic_fraction, None);
        assert_eq!(state.pool.len(), 9);
        assert_eq!(state.weights, before);
        let rec = state.step(&cfg).unwrap();
        assert_eq!(rec.k, 4);
        assert_ne!(state.weights, before);
    }

    #[test]
    fn trajectory_shape_and_accounting() {
        let cfg = small(3);
        let traj = run(&cfg).unwrap();
        assert_eq!(traj.records.len(), cfg.steps + 1);
        let last = traj.records.last().unwrap();
        assert_eq!(last.pool_size, cfg.pool_size_at(cfg.steps));
        assert_eq!(last.pool_size, 3 * 3 * 15);
        assert!(traj.records[0].frobenius_norm > 1e-8);
        for (r, k) in traj.records.iter().zip(cfg.retrieval_schedule()) {
            assert_eq!(r.k, k);
            assert!(r.frobenius_norm.is_finite() && r.frobenius_norm >= 0.0);
            for w in &r.weights {
                MixtureWeights::new(w.clone(), cfg.epsilon).unwrap();
            }
            let m = r.distance.max_entry();
            assert!(r.frobenius_norm >= m && r.frobenius_norm <= cfg.n as f64 * m + 1e-15);
        }
    }

    #[test]
    fn single_step_run_has_two_records() {
        let cfg = SimConfig {
            steps: 1,
            ..SimConfig::baseline(1)
        };
        assert_eq!(run(&cfg).unwrap().records.len(), 2);
    }

    #[test]
    fn seeds_control_everything() {
        let a = run(&small(5)).unwrap();
        let b = run(&small(5)).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = run(&small(6)).unwrap();
        assert_ne!(a.records[0].weights, c.records[0].weights);
    }

    #[test]
    fn identical_weights_and_streams_give_identical_models() {
        // two models with the same start only differ through their draws; if
        // the pool is a single repeated value every draw is identical
        let mut cfg = small(2);
        cfg.initial_weights = Some(vec![vec![0.3, 0.7]; 3]);
        cfg.initial_pool = vec![vec![5.0]; 10];
        let mut state = SimState::init(&cfg).unwrap();
        state.step(&cfg).unwrap();
        assert_eq!(state.weights[0], state.weights[1]);
        assert_eq!(state.weights[1], state.weights[2]);
    }

    #[test]
    fn replicates_match_single_runs_and_job_count() {
        let cfg = small(0);
        let seeds = [11, 12, 13];
        let serial = run_replicates(&cfg, &seeds, 1).unwrap();
        let parallel = run_replicates(&cfg, &seeds, 3).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial[1], run(&cfg.clone().with_seed(12)).unwrap());
        assert_eq!(
            run_replicates(&cfg, &[7], 1).unwrap()[0],
            run(&cfg.with_seed(7)).unwrap()
        );
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = small(0);
        for bad in [
            SimConfig {
                n: 1,
                ..base.clone()
            },
            SimConfig {
                steps: 0,
                ..base.clone()
            },
            SimConfig {
                beta: 0.0,
                ..base.clone()
            },
            SimConfig {
                beta: 1.5,
                ..base.clone()
            },
            SimConfig {
                points_per_step: 0,
                ..base.clone()
            },
            SimConfig {
                concentration: 0.0,
                ..base.clone()
            },
            SimConfig {
                initial_weights: Some(vec![vec![0.5, 0.5]]),
                ..base.clone()
            },
            SimConfig {
                initial_pool: vec![vec![1.0, 2.0]],
                ..base.clone()
            },
        ] {
            assert!(run(&bad).is_err());
        }
    }

    #[test]
    fn config_round_trips_and_uses_short_names() {
        let cfg = SimConfig::baseline(4);
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(
            json.contains("\"L\":3") && json.contains("\"T\":200") && json.contains("\"a\":1.0")
        );
        assert!(json.contains("reciprocal-k"));
        let back: SimConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        let minimal: SimConfig = serde_json::from_str(
            r#"{"n":3,"bank":{"means":[[-5],[5]],"covariance":[[1]]},"a":1,"L":3,"beta":0.5,"T":10}"#,
        )
        .unwrap();
        assert_eq!(minimal.epsilon, DEFAULT_EPSILON);
        assert_eq!(minimal.schedule_rule, ScheduleRule::ReciprocalK);
    }

    #[test]
    fn csv_has_one_row_per_record() {
        let traj = run(&small(1)).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "t,frobenius_norm,pool_size,synthetic_fraction,k_t"
        );
        assert_eq!(lines.len(), traj.records.len() + 1);
        assert!(lines[1].starts_with("0,") && lines[1].ends_with(",0,,0"));
    }

    #[test]
    fn duplicate_seed_detection() {
        assert_eq!(duplicate_seeds(&[1, 2, 1, 3, 2, 1]), vec![1, 2]);
        assert!(duplicate_seeds(&[1, 2, 3]).is_empty());
    }
}

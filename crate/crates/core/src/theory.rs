//! Expected contraction of inter-model weight gaps, and a Monte-Carlo check of
//! the simulator against it.
//!
//! With well-separated components the ownership of a point is close to an
//! indicator of the component that generated it. Its expectation then no
//! longer depends on the model being updated, and each point shrinks the
//! expected gap between two models by `1 - alpha_t`. Over one step of `k_t`
//! points, and then over time, the expected gap is
//!
//! ```text
//! E[pi_ib(t) - pi_jb(t)] ~ prod_{s < t} (1 - alpha_s)^{k_s} * (pi_ib(0) - pi_jb(0))
//! ```
//!
//! The floor branch of the update is outside this regime.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::init_weights;
use crate::rng::{derive_seed, substream, Stream};
use crate::sim::{run_replicates, ScheduleRule, SimConfig};

/// Default minimum separation, in standard deviations, for the approximation
/// to be trusted.
pub const MIN_SEPARATION: f64 = 6.0;

/// Smallest replicate count for which a verdict is issued.
pub const MIN_REPLICATES: usize = 30;

/// `(1 - 1/k)^k`, or 1 when `k < 2` (no update happens).
pub fn contraction_factor(k: usize) -> f64 {
    if k < 2 {
        1.0
    } else {
        let k = k as f64;
        (1.0 - 1.0 / k).powf(k)
    }
}

/// Running products of [`contraction_factor`]. Entry `t` is the multiplier that
/// applies to the weights recorded at step `t`, so the output has one more
/// entry than `k_schedule` and starts at 1.
pub fn predicted_multiplier(k_schedule: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(k_schedule.len() + 1);
    let mut p = 1.0;
    out.push(p);
    for &k in k_schedule {
        p *= contraction_factor(k);
        out.push(p);
    }
    out
}

pub fn predicted_gap(initial_gap: f64, k_schedule: &[usize], t: usize) -> Result<f64> {
    if t > k_schedule.len() {
        return Err(Error::param(
            "t",
            format!("{t} beyond a schedule of {} steps", k_schedule.len()),
        ));
    }
    Ok(initial_gap * predicted_multiplier(&k_schedule[..t])[t])
}

/// Average weight of each component over all models and all past steps.
/// `history[t][i]` is model `i`'s weight vector at step `t`.
pub fn mean_field_weight<W: AsRef<[f64]>>(history: &[Vec<W>]) -> Result<Vec<f64>> {
    let first = history
        .first()
        .and_then(|h| h.first())
        .ok_or(Error::EmptyInput("weight history"))?;
    let b = first.as_ref().len();
    let mut acc = vec![0.0; b];
    let mut count = 0usize;
    for step in history {
        for w in step {
            let w = w.as_ref();
            if w.len() != b {
                return Err(Error::DimensionMismatch {
                    expected: b,
                    got: w.len(),
                });
            }
            for (a, v) in acc.iter_mut().zip(w) {
                *a += v;
            }
            count += 1;
        }
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    Ok(acc)
}

/// Geometric checkpoints `1, 2, 5, 10, 20, 50, ...` not exceeding `steps`.
pub fn default_checkpoints(steps: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut decade = 1;
    'outer: loop {
        for m in [1, 2, 5] {
            let t = m * decade;
            if t > steps {
                break 'outer;
            }
            out.push(t);
        }
        decade *= 10;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub replicates: usize,
    /// Absolute tolerance added to `3 * SE`.
    pub tolerance: f64,
    pub checkpoints: Vec<usize>,
    pub min_separation: f64,
    /// Zero-based model pair whose gap is tracked.
    pub pair: (usize, usize),
    pub jobs: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            replicates: 100,
            tolerance: 0.02,
            checkpoints: vec![1, 2, 5, 10, 20],
            min_separation: MIN_SEPARATION,
            pair: (0, 1),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub t: usize,
    pub component: usize,
    pub multiplier: f64,
    pub predicted_gap: f64,
    pub empirical_gap: f64,
    pub standard_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub replicates: usize,
    pub tolerance: f64,
    pub separation: f64,
    pub pair: (usize, usize),
    pub initial_weights: Vec<Vec<f64>>,
    pub k_schedule: Vec<usize>,
    pub rows: Vec<CheckpointRow>,
    /// Floor events over all replicates; nonzero means some updates left the
    /// analysed regime.
    pub floor_events: usize,
    /// Mean of the squared final norm, and square of the mean final norm.
    pub final_norm_mean_sq: f64,
    pub final_norm_sq_mean: f64,
    pub passed: bool,
}

impl fmt::Display for ContractionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "replicates {}  separation {:.2}  tolerance {} + 3 SE  pair ({}, {})",
            self.replicates,
            self.separation,
            self.tolerance,
            self.pair.0 + 1,
            self.pair.1 + 1
        )?;
        writeln!(
            f,
            "{:>6} {:>4} {:>12} {:>12} {:>12} {:>10}  result",
            "t", "b", "multiplier", "predicted", "empirical", "se"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>6} {:>4} {:>12.6} {:>12.6} {:>12.6} {:>10.6}  {}",
                r.t,
                r.component + 1,
                r.multiplier,
                r.predicted_gap,
                r.empirical_gap,
                r.standard_error,
                if r.passed { "pass" } else { "FAIL" }
            )?;
        }
        writeln!(
            f,
            "floor events {}  E|D_T|^2 = {:.3e} >= (E|D_T|)^2 = {:.3e}",
            self.floor_events, self.final_norm_mean_sq, self.final_norm_sq_mean
        )?;
        write!(f, "{}", if self.passed { "PASS" } else { "FAIL" })
    }
}

/// Runs `opts.replicates` independent simulations from one fixed set of
/// initial weights and compares the mean gap between two models against the
/// predicted contraction at each checkpoint.
///
/// Refuses with [`Error::Precondition`] when the bank is not well separated.
pub fn verify_contraction(config: &SimConfig, opts: &VerifyOptions) -> Result<ContractionReport> {
    let bank = config.validate()?;
    if opts.replicates < MIN_REPLICATES {
        return Err(Error::param(
            "replicates",
            format!("{} < {MIN_REPLICATES}", opts.replicates),
        ));
    }
    let separation = bank.separation();
    if separation < opts.min_separation {
        return Err(Error::Precondition(format!(
            "component separation {separation:.3} sd is below {}",
            opts.min_separation
        )));
    }
    if config.schedule_rule != ScheduleRule::ReciprocalK {
        return Err(Error::Precondition("prediction assumes alpha = 1/k".into()));
    }
    let (pi, pj) = opts.pair;
    if pi == pj || pi >= config.n || pj >= config.n {
        return Err(Error::param(
            "pair",
            format!("({pi}, {pj}) with n = {}", config.n),
        ));
    }
    if let Some(&t) = opts.checkpoints.iter().find(|&&t| t > config.steps) {
        return Err(Error::param(
            "checkpoints",
            format!("{t} > T = {}", config.steps),
        ));
    }

    let initial: Vec<Vec<f64>> = match &config.initial_weights {
        Some(w) => w.clone(),
        None => {
            let mut rng = substream(config.seed, Stream::Init, 0, 0);
            init_weights(
                config.n,
                bank.components(),
                config.concentration,
                config.epsilon,
                &mut rng,
            )?
            .into_iter()
            .map(|w| w.into_values())
            .collect()
        }
    };
    let fixed = SimConfig {
        initial_weights: Some(initial.clone()),
        ..config.clone()
    };
    let seeds: Vec<u64> = (0..opts.replicates as u64)
        .map(|r| derive_seed(config.seed, Stream::Replicate, r, 0))
        .collect();
    let runs = run_replicates(&fixed, &seeds, opts.jobs)?;

    let k_schedule = config.retrieval_schedule();
    let multipliers = predicted_multiplier(&k_schedule);
    let r = opts.replicates as f64;
    let mut rows = Vec::new();
    for &t in &opts.checkpoints {
        for b in 0..bank.components() {
            let gaps: Vec<f64> = runs
                .iter()
                .map(|tr| tr.records[t].weights[pi][b] - tr.records[t].weights[pj][b])
                .collect();
            let mean = gaps.iter().sum::<f64>() / r;
            let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (r - 1.0);
            let se = (var / r).sqrt();
            let predicted = (initial[pi][b] - initial[pj][b]) * multipliers[t];
            rows.push(CheckpointRow {
                t,
                component: b,
                multiplier: multipliers[t],
                predicted_gap: predicted,
                empirical_gap: mean,
                standard_error: se,
                passed: (mean - predicted).abs() <= opts.tolerance + 3.0 * se,
            });
        }
    }

    let finals: Vec<f64> = runs
        .iter()
        .map(|tr| tr.records.last().map_or(0.0, |rec| rec.frobenius_norm))
        .collect();
    let mean_final = finals.iter().sum::<f64>() / r;
    let mean_sq = finals.iter().map(|x| x * x).sum::<f64>() / r;
    let floor_events = runs
        .iter()
        .flat_map(|tr| tr.records.iter().map(|rec| rec.floor_events))
        .sum();

    Ok(ContractionReport {
        replicates: opts.replicates,
        tolerance: opts.tolerance,
        separation,
        pair: opts.pair,
        initial_weights: initial,
        k_schedule,
        passed: rows.iter().all(|row| row.passed),
        rows,
        floor_events,
        final_norm_mean_sq: mean_sq,
        final_norm_sq_mean: mean_final * mean_final,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::BankParams;
    use approx::assert_relative_eq;

    #[test]
    fn multiplier_examples() {
        // 0.9^10, exact decimal
        assert_relative_eq!(
            predicted_multiplier(&[10])[1],
            0.348_678_440_1,
            max_relative = 1e-12
        );
        assert_eq!(predicted_multiplier(&[]), vec![1.0]);
        let k = 10_000;
        assert!((contraction_factor(k) - (-1f64).exp()).abs() < 1e-3);
        // steps with k < 2 leave the product unchanged
        assert_eq!(predicted_multiplier(&[0, 1, 0]), vec![1.0; 4]);
    }

    #[test]
    fn gap_examples() {
        assert_eq!(predicted_gap(0.0, &[4, 9, 13], 3).unwrap(), 0.0);
        assert_relative_eq!(
            predicted_gap(0.4, &[10], 1).unwrap(),
            0.139_471_376_04,
            max_relative = 1e-12
        );
        assert!(predicted_gap(0.4, &[10], 2).is_err());
        let sched: Vec<usize> = (0..50).map(|t| 4 * t).collect();
        let gaps: Vec<f64> = (0..=50)
            .map(|t| predicted_gap(-0.3, &sched, t).unwrap().abs())
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn factor_bounds_and_monotonicity() {
        let mut prev = contraction_factor(2);
        assert_eq!(prev, 0.25);
        let e_inv = (-1f64).exp();
        let mut k = 2usize;
        while k <= 1_000_000 {
            let f = contraction_factor(k);
            assert!((0.25..1.0).contains(&f));
            assert!(f < e_inv * (1.0 / (2.0 * k as f64 - 2.0)).exp());
            assert!(
                f >= prev - 1e-15,
                "factor must increase toward 1/e from below"
            );
            prev = f;
            k = if k < 1000 { k + 1 } else { k * 2 };
        }
    }

    #[test]
    fn multiplier_strictly_decreases_when_updating() {
        let p = predicted_multiplier(&[0, 4, 9, 13, 18]);
        assert_eq!(p[0], p[1]);
        assert!(p[1..].windows(2).all(|w| w[1] < w[0]));
        assert!(p.iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn mean_field_examples() {
        let same = vec![vec![vec![0.2, 0.8]; 3]; 4];
        let got = mean_field_weight(&same).unwrap();
        assert_relative_eq!(got[0], 0.2, max_relative = 1e-14);
        assert_relative_eq!(got[1], 0.8, max_relative = 1e-14);
        let two = vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]];
        assert_eq!(mean_field_weight(&two).unwrap(), vec![0.5, 0.5]);

        let hist = vec![
            vec![vec![0.1, 0.9], vec![0.4, 0.6], vec![0.7, 0.3]],
            vec![vec![0.2, 0.8], vec![0.5, 0.5], vec![0.6, 0.4]],
        ];
        let mut brute = [0.0; 2];
        for step in &hist {
            for w in step {
                for b in 0..2 {
                    brute[b] += w[b] / 6.0;
                }
            }
        }
        let got = mean_field_weight(&hist).unwrap();
        assert_relative_eq!(got[0], brute[0], max_relative = 1e-14);
        assert_relative_eq!(got[1], brute[1], max_relative = 1e-14);
        assert!(mean_field_weight::<Vec<f64>>(&[]).is_err());
    }

    #[test]
    fn checkpoints_are_geometric() {
        assert_eq!(
            default_checkpoints(200),
            vec![1, 2, 5, 10, 20, 50, 100, 200]
        );
        assert_eq!(default_checkpoints(7), vec![1, 2, 5]);
    }

    #[test]
    fn refuses_poorly_separated_banks() {
        let cfg = SimConfig {
            bank: BankParams::scalar(&[-0.5, 0.5], 1.0),
            steps: 20,
            ..SimConfig::baseline(1)
        };
        assert!(matches!(
            verify_contraction(&cfg, &VerifyOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn rejects_too_few_replicates() {
        let cfg = SimConfig {
            steps: 20,
            ..SimConfig::baseline(1)
        };
        let opts = VerifyOptions {
            replicates: 1,
            ..Default::default()
        };
        assert!(matches!(
            verify_contraction(&cfg, &opts),
            Err(Error::InvalidParameter {
                name: "replicates",
                ..
            })
        ));
    }

    #[test]
    fn baseline_passes_separation_gate() {
        let bank = SimConfig::baseline(0).bank.build().unwrap();
        assert_relative_eq!(bank.separation(), 10.0);
    }
}

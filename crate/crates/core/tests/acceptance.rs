//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line; run with
//! `cargo test -p collapse-core --test acceptance -- --nocapture --test-threads 1`
//! to see them in order.

#![allow(clippy::needless_range_loop)]

use collapse_core::gmm::MixtureWeights;
use collapse_core::pool::{synthetic_fraction_law, SamplePool};
use collapse_core::rng::{substream, Stream};
use collapse_core::theory::contraction_factor;
use collapse_core::trace::{EmbeddingTrace, ResponseRecord, TraceMeta};
use collapse_core::update::{apply_floor, raw_step};
use collapse_core::{
    analyze_trace, apply_point, cmds_project, distance_matrix, frobenius_norm, init_weights,
    ownership, run, run_replicates, schedule_from_k, verify_contraction, BankParams, ComponentBank,
    SimConfig, UpdateSchedule, VerifyOptions,
};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn report(name: &str, ok: bool, detail: String) {
    println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

fn gauss(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn gmm_collapse_two_components() {
    let seeds = [1, 2, 3, 4, 5];
    let runs = run_replicates(&SimConfig::baseline(0), &seeds, 4).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for tr in &runs {
        let norms = tr.norms();
        assert_eq!(norms.len(), 201);
        let initial = norms[0];
        let tail = mean(&norms[norms.len() - 20..]);
        ok &= tail < 0.05 && tail < 0.1 * initial;
        parts.push(format!(
            "seed {}: D0 {:.4} tail {:.4}",
            tr.seed, initial, tail
        ));
    }
    report(
        "GMM collapse (B=2, 5 seeds, trailing-20 mean < 0.05 and < 0.1 D0)",
        ok,
        parts.join("; "),
    );
}

fn separated_means(count: usize, min_gap: f64, half_width: f64, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, Stream::Bank, 0, 0);
    let mut means: Vec<f64> = Vec::new();
    while means.len() < count {
        let m = rng.random_range(-half_width..half_width);
        if means.iter().all(|x| (x - m).abs() >= min_gap) {
            means.push(m);
        }
    }
    means
}

fn ls_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let xbar = (n - 1.0) / 2.0;
    let ybar = mean(ys);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xbar;
        sxy += dx * (y - ybar);
        sxx += dx * dx;
    }
    sxy / sxx
}

#[test]
fn gmm_eleven_component_trend() {
    let means = separated_means(11, 6.0, 60.0, 2024);
    let cfg = SimConfig {
        bank: BankParams::scalar(&means, 1.0),
        ..SimConfig::baseline(1)
    };
    assert!(cfg.bank.build().unwrap().separation() >= 6.0);
    let tr = run(&cfg).unwrap();
    let norms = tr.norms();
    let initial = norms[0];
    let tail = mean(&norms[norms.len() - 50..]);
    let slope = ls_slope(&norms);
    report(
        "GMM trend (B=11, final-50 mean < initial, negative LS slope)",
        tail < initial && slope < 0.0,
        format!("initial {initial:.4} final-50 mean {tail:.4} slope {slope:.3e}"),
    );
}

#[test]
fn expected_contraction_matches_prediction() {
    let cfg = SimConfig {
        steps: 20,
        ..SimConfig::baseline(7)
    };
    let opts = VerifyOptions {
        replicates: 100,
        tolerance: 0.02,
        checkpoints: vec![1, 2, 5, 10, 20],
        jobs: 4,
        ..Default::default()
    };
    let rep = verify_contraction(&cfg, &opts).unwrap();
    println!("{rep}");
    let limit = (contraction_factor(10_000) - (-1f64).exp()).abs();
    report(
        "Expected gap contraction (R=100, tol 0.02 + 3 SE, t in {1,2,5,10,20}) and (1-1/k)^k -> 1/e",
        rep.passed && limit < 1e-3 && rep.final_norm_mean_sq >= rep.final_norm_sq_mean,
        format!(
            "{} of {} checkpoints pass, |(1-1e-4)^1e4 - 1/e| = {limit:.3e}, floor events {}",
            rep.rows.iter().filter(|r| r.passed).count(),
            rep.rows.len(),
            rep.floor_events
        ),
    );
}

#[test]
fn synthetic_fraction_and_pool_growth() {
    let law = synthetic_fraction_law(3, 10, 20).unwrap();

    // explicit bookkeeping: 20 seed items, one post per model per step
    let mut pool = SamplePool::with_seed(1, &vec![vec![0.0]; 20]).unwrap();
    for t in 0..10 {
        for m in 1..=3 {
            pool.post(&[t as f64], m, t).unwrap();
        }
    }
    let counted = pool.synthetic_fraction().unwrap();

    let mut sizes_ok = true;
    for initial in [0usize, 7] {
        let cfg = SimConfig {
            steps: 40,
            initial_pool: (0..initial).map(|i| vec![i as f64 - 3.0]).collect(),
            ..SimConfig::baseline(3)
        };
        let tr = run(&cfg).unwrap();
        sizes_ok &= tr.records.last().unwrap().pool_size == initial + 3 * 3 * 40;
        sizes_ok &= tr.records.iter().all(|r| r.pool_size == initial + 9 * r.t);
    }
    report(
        "Synthetic-fraction law and pool growth",
        law == 0.6 && counted == 0.6 && sizes_ok,
        format!("law {law}, counted {counted}, GMM pool sizes exact: {sizes_ok}"),
    );
}

fn brute_distance_norm(points: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    let mut sq = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for b in 0..points[i].len() {
                let diff = points[i][b] - points[j][b];
                s += diff * diff;
            }
            d[i][j] = s.sqrt();
            sq += s;
        }
    }
    (d, sq.sqrt())
}

fn procrustes_residual(reference: &[Vec<f64>], fitted: &[Vec<f64>]) -> f64 {
    let m = reference.len();
    let centre = |pts: &[Vec<f64>]| {
        let c = [
            mean(&pts.iter().map(|p| p[0]).collect::<Vec<_>>()),
            mean(&pts.iter().map(|p| p[1]).collect::<Vec<_>>()),
        ];
        DMatrix::from_fn(m, 2, |i, j| pts[i][j] - c[j])
    };
    let x = centre(reference);
    let y = centre(fitted);
    let svd = (y.transpose() * &x).svd(true, true);
    let rot = svd.u.unwrap() * svd.v_t.unwrap();
    (y * rot - x).norm()
}

#[test]
fn metrics_match_brute_force() {
    let mut rng = substream(99, Stream::Model, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=5);
        let b = rng.random_range(1..=4);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..b).map(|_| rng.random::<f64>()).collect())
            .collect();
        let d = distance_matrix(&pts).unwrap();
        let (bd, bnorm) = brute_distance_norm(&pts);
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((d.get(i, j) - bd[i][j]).abs());
            }
        }
        worst = worst.max((frobenius_norm(&d) - bnorm).abs());
    }

    let mut worst_proc: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.random_range(3..=30);
        let pts: Vec<Vec<f64>> = (0..m)
            .map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
            .collect();
        let proj = cmds_project(&distance_matrix(&pts).unwrap(), 2).unwrap();
        worst_proc = worst_proc.max(procrustes_residual(&pts, &proj.coords));
    }
    report(
        "Metrics oracle equivalence (100 instances; CMDS Procrustes)",
        worst <= 1e-12 && worst_proc < 1e-9,
        format!("max |impl - brute| {worst:.2e}, max Procrustes residual {worst_proc:.2e}"),
    );
}

#[test]
fn weight_update_contract() {
    let bank = ComponentBank::scalar(&[-5.0, 5.0], 1.0).unwrap();
    let w = |v: &[f64]| MixtureWeights::new(v.to_vec(), 1e-6).unwrap();

    let one = ComponentBank::scalar(&[0.0], 1.0).unwrap();
    let fixed = apply_point(
        &w(&[1.0]),
        &[0.7],
        &schedule_from_k(9, 1, 1e-6).unwrap(),
        &one,
    );
    let e1 = (fixed.weights.values()[0] - 1.0).abs();

    let s = UpdateSchedule::new(0.1, 0.05, 1e-6, 2).unwrap();
    let out = apply_point(&w(&[0.3, 0.7]), &[5.0], &s, &bank);
    let e2 = (out.weights.values()[0] - 0.264_444_444_444_444_4)
        .abs()
        .max((out.weights.values()[1] - 0.735_555_555_555_555_6).abs());

    let s = UpdateSchedule::new(0.5, 0.4, 1e-6, 2).unwrap();
    let out = apply_point(&w(&[0.01, 0.99]), &[5.0], &s, &bank);
    let e3 = (out.weights.values()[0] - 1e-6)
        .abs()
        .max((out.weights.values()[1] - 0.999_999_498_747_118_4).abs());
    let floor_fired = out.floor_events == 1;

    // fuzzing: random banks, weights, points and schedules, including
    // aggressive schedules that force the floor branch
    let mut rng = substream(12345, Stream::Model, 0, 0);
    let mut max_raw_drift: f64 = 0.0;
    let mut bound_ok = true;
    let mut floors = 0usize;
    let fuzz = 100_000;
    let banks: Vec<ComponentBank> = (1..=6)
        .map(|b| {
            ComponentBank::scalar(
                &(0..b).map(|i| -7.5 + 3.0 * i as f64).collect::<Vec<_>>(),
                1.0,
            )
            .unwrap()
        })
        .collect();
    for i in 0..fuzz {
        let bank = &banks[rng.random_range(0..banks.len())];
        let b = bank.components();
        let eps = [1e-6, 1e-3, 0.0][i % 3];
        let start = init_weights(1, b, 0.5, eps, &mut rng).unwrap().remove(0);
        let x: f64 = 8.0 * gauss(&mut rng);
        let sched = if i % 2 == 0 {
            schedule_from_k(rng.random_range(2..2000), b, eps).unwrap()
        } else {
            let alpha = rng.random_range(0.01..0.99);
            let c = rng.random_range(0.0..0.99) / b as f64;
            UpdateSchedule::new(alpha, c, eps, b).unwrap()
        };
        let mut raw = start.values().to_vec();
        let before: f64 = raw.iter().sum();
        raw_step(&mut raw, &ownership(start.values(), &[x], bank), &sched);
        max_raw_drift = max_raw_drift.max((raw.iter().sum::<f64>() - before).abs());
        let mut floored = raw.clone();
        let events = apply_floor(&mut floored, eps, false);

        let out = apply_point(&start, &[x], &sched, bank);
        assert_eq!(out.weights.values(), floored.as_slice());
        floors += events;
        let sum = out.weights.sum();
        let slack = MixtureWeights::sum_slack(b, eps);
        bound_ok &= sum >= 1.0 - 1e-12 && sum <= 1.0 + slack;
        bound_ok &= out
            .weights
            .values()
            .iter()
            .all(|&v| v <= 1.0 + 1e-12 && (v > 0.0 || (eps == 0.0 && v == 0.0)));
    }
    report(
        "Weight-update contract (3 worked examples to 1e-10; 1e5 fuzzed updates)",
        e1 < 1e-10 && e2 < 1e-10 && e3 < 1e-10 && floor_fired && max_raw_drift < 1e-12 && bound_ok,
        format!(
            "errors {e1:.1e}/{e2:.1e}/{e3:.1e}, raw sum drift {max_raw_drift:.1e}, floor events {floors}, bounds hold: {bound_ok}"
        ),
    );
}

#[test]
fn runs_are_deterministic() {
    let cfg = SimConfig {
        steps: 60,
        ..SimConfig::baseline(0)
    };
    let seeds = [101, 102, 103, 104, 105, 106];
    let to_json = |jobs| -> Vec<String> {
        run_replicates(&cfg, &seeds, jobs)
            .unwrap()
            .iter()
            .map(|t| t.to_json().unwrap())
            .collect()
    };
    let a = to_json(1);
    let b = to_json(1);
    let c = to_json(4);
    report(
        "Determinism (byte-identical JSON across runs and --jobs 1 vs 4)",
        a == b && a == c,
        format!(
            "{} trajectories, {} bytes each (first)",
            a.len(),
            a[0].len()
        ),
    );
}

/// Builds a trace whose per-(model, t) embeddings are Gaussian around planted
/// means and returns (observed, expected, se) for every step.
fn planted_trace_check(seed: u64) -> Vec<(f64, f64, f64)> {
    let dim = 768;
    let repeats = 40;
    let steps = 3;
    let sigma = 0.05;
    let models = ["m1", "m2", "m3"];
    let mut rng = substream(seed, Stream::Model, 0, 0);

    // models approach each other over time
    let base: Vec<f64> = (0..dim).map(|_| gauss(&mut rng)).collect();
    let offsets: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..dim).map(|_| gauss(&mut rng)).collect())
        .collect();
    let planted = |m: usize, t: usize| -> Vec<f64> {
        let shrink = 1.0 / (1.0 + t as f64);
        base.iter()
            .zip(&offsets[m])
            .map(|(b, o)| b + 0.1 * shrink * o)
            .collect()
    };

    let mut records = Vec::new();
    for (m, name) in models.iter().enumerate() {
        for t in 0..=steps {
            let mu = planted(m, t);
            for l in 1..=repeats {
                records.push(ResponseRecord {
                    model_id: name.to_string(),
                    t,
                    l,
                    embedding: mu.iter().map(|v| v + sigma * gauss(&mut rng)).collect(),
                    text: None,
                });
            }
        }
    }
    let meta = TraceMeta {
        query: "planted".into(),
        models: models.iter().map(|s| s.to_string()).collect(),
        repeats,
        steps,
        dim,
        embedder: "none".into(),
        pool_sizes: None,
    };
    let analysis = analyze_trace(&EmbeddingTrace::new(meta, records).unwrap(), None).unwrap();

    // each sample mean is mu + N(0, sigma^2 / L I): the expected squared norm
    // gains 2 dim sigma^2 / L per ordered pair, and the SE follows from the
    // delta method on F = sqrt(sum_ij |X_i - X_j|^2)
    let noise = sigma * sigma / repeats as f64;
    (0..=steps)
        .map(|t| {
            let mus: Vec<Vec<f64>> = (0..3).map(|m| planted(m, t)).collect();
            let mut sq = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        sq += mus[i]
                            .iter()
                            .zip(&mus[j])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>();
                        sq += 2.0 * dim as f64 * noise;
                    }
                }
            }
            let expected = sq.sqrt();
            let mut var = 0.0;
            for i in 0..3 {
                let grad_sq: f64 = (0..dim)
                    .map(|k| {
                        let g: f64 = (0..3)
                            .filter(|&j| j != i)
                            .map(|j| mus[i][k] - mus[j][k])
                            .sum();
                        (2.0 * g / expected).powi(2)
                    })
                    .sum();
                var += grad_sq * noise;
            }
            (analysis.steps[t].frobenius_norm, expected, var.sqrt())
        })
        .collect()
}

#[test]
fn planted_gaussian_trace_recovers_norms() {
    let rows = planted_trace_check(1);
    let ok = rows
        .iter()
        .all(|(got, exp, se)| (got - exp).abs() <= 3.0 * se);
    let parts: Vec<String> = rows
        .iter()
        .enumerate()
        .map(|(t, (got, exp, se))| format!("t={t}: {got:.4} vs {exp:.4} (se {se:.4})"))
        .collect();

    // the SE must also be honest: z-scores over many traces should look standard
    let z: Vec<f64> = (100..150)
        .flat_map(planted_trace_check)
        .map(|(got, exp, se)| (got - exp) / se)
        .collect();
    let zbar = mean(&z);
    let zsd = (z.iter().map(|v| (v - zbar).powi(2)).sum::<f64>() / (z.len() - 1) as f64).sqrt();
    let calibrated = zbar.abs() < 0.3 && (0.8..1.2).contains(&zsd);
    report(
        "Planted-Gaussian trace norms within 3 SE",
        ok && calibrated,
        format!(
            "{}; z over {} traces: mean {zbar:.3} sd {zsd:.3}",
            parts.join("; "),
            z.len() / 4
        ),
    );
}

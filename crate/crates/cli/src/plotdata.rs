use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use collapse_core::rng::{substream, Stream};
use collapse_core::theory::default_checkpoints;
use collapse_core::trace::TraceAnalysis;
use collapse_core::{cmds_project, GmmModel, MixtureWeights, Trajectory};
use rand::Rng;

use crate::analyze::ANALYSIS_JSON;
use crate::failure::{CmdResult, Failure};
use crate::input::{parse_steps, resolve_seeds};
use crate::output::OutDir;
use crate::PlotdataArgs;

const GRID_MIN: f64 = -10.0;
const GRID_STEP: f64 = 0.05;
const GRID_POINTS: usize = 401;

/// Evaluation points for density curves: -10 to 10 in steps of 0.05.
pub fn density_grid() -> impl Iterator<Item = f64> {
    (0..GRID_POINTS).map(|i| GRID_MIN + GRID_STEP * i as f64)
}

struct Jitter {
    half_width: f64,
    seed: u64,
}

impl Jitter {
    /// Offsets for `count` 2-D points in one scatter.
    fn offsets(&self, replicate: u64, t: usize, count: usize) -> Vec<(f64, f64)> {
        if self.half_width == 0.0 {
            return vec![(0.0, 0.0); count];
        }
        let mut rng = substream(self.seed, Stream::Jitter, replicate, t as u64);
        let w = self.half_width;
        (0..count)
            .map(|_| (rng.random_range(-w..=w), rng.random_range(-w..=w)))
            .collect()
    }
}

pub fn run(args: PlotdataArgs) -> CmdResult {
    if !(args.jitter >= 0.0 && args.jitter.is_finite()) {
        return Err(Failure::usage("jitter must be a non-negative number"));
    }
    let steps = args.t_list.as_deref().map(parse_steps).transpose()?;
    let seed = resolve_seeds(args.seeds.seeds.as_deref(), 0)?[0];
    let jitter = Jitter {
        half_width: args.jitter,
        seed,
    };

    let trajectories = trajectory_files(&args.input)?;
    let analysis_path = args.input.join(ANALYSIS_JSON);
    let out = if !trajectories.is_empty() {
        let loaded = trajectories
            .iter()
            .map(|p| Ok(Trajectory::from_json(&fs::read_to_string(p)?)?))
            .collect::<CmdResult<Vec<_>>>()?;
        let mut out = OutDir::prepare(&args.out.out, args.out.force)?;
        from_trajectories(&mut out, &loaded, steps.as_deref(), &jitter)?;
        out
    } else if analysis_path.is_file() {
        let analysis: TraceAnalysis = serde_json::from_str(&fs::read_to_string(&analysis_path)?)
            .map_err(|e| Failure::usage(format!("{}: {e}", analysis_path.display())))?;
        let mut out = OutDir::prepare(&args.out.out, args.out.force)?;
        from_analysis(&mut out, &analysis, &jitter)?;
        out
    } else {
        return Err(Failure::usage(format!(
            "{} holds no trajectories or {ANALYSIS_JSON}",
            args.input.display()
        )));
    };
    // keep the manifest small: only the jitter seed matters here
    let seeds = if args.jitter > 0.0 {
        vec![seed]
    } else {
        Vec::new()
    };
    out.finish("plotdata", None, &seeds)
}

/// `trajectory-seed-*.json` files in `dir`, ordered by seed.
fn trajectory_files(dir: &Path) -> CmdResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", dir.display())))?;
    let mut found = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(seed) = name
            .strip_prefix("trajectory-seed-")
            .and_then(|s| s.strip_suffix(".json"))
            .and_then(|s| s.parse::<u64>().ok())
        {
            found.push((seed, path));
        }
    }
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

fn from_trajectories(
    out: &mut OutDir,
    runs: &[Trajectory],
    steps: Option<&[usize]>,
    jitter: &Jitter,
) -> CmdResult {
    let mut norms = String::from("replicate,seed,t,frobenius_norm\n");
    for (rep, tr) in runs.iter().enumerate() {
        for r in &tr.records {
            writeln!(norms, "{rep},{},{},{}", tr.seed, r.t, r.frobenius_norm).unwrap();
        }
    }
    out.write("norms_long.csv", norms.as_bytes())?;

    let mut density = String::from("replicate,seed,t,model,x,density\n");
    let mut scatter = String::from("replicate,seed,t,model,x,y\n");
    let mut one_dimensional = true;
    for (rep, tr) in runs.iter().enumerate() {
        let last = tr.records.len() - 1;
        let chosen: Vec<usize> = match steps {
            Some(ts) => {
                if let Some(&bad) = ts.iter().find(|&&t| t > last) {
                    return Err(Failure::usage(format!("step {bad} outside [0, {last}]")));
                }
                ts.to_vec()
            }
            None => std::iter::once(0)
                .chain(default_checkpoints(last))
                .collect(),
        };
        let bank = Arc::new(tr.config.bank.build()?);
        one_dimensional &= bank.dim() == 1;

        for &t in &chosen {
            let record = &tr.records[t];
            if bank.dim() == 1 {
                for (m, w) in record.weights.iter().enumerate() {
                    let weights = MixtureWeights::new(w.clone(), tr.config.epsilon)?;
                    let model = GmmModel::new(Arc::clone(&bank), weights, m)?;
                    for x in density_grid() {
                        let y = model.density(&[x])?;
                        writeln!(density, "{rep},{},{t},{},{x},{y}", tr.seed, m + 1).unwrap();
                    }
                }
            }
            let proj = cmds_project(&record.distance, 2)?;
            let offsets = jitter.offsets(rep as u64, t, proj.coords.len());
            for (m, (c, (dx, dy))) in proj.coords.iter().zip(offsets).enumerate() {
                writeln!(
                    scatter,
                    "{rep},{},{t},{},{},{}",
                    tr.seed,
                    m + 1,
                    c[0] + dx,
                    c[1] + dy
                )
                .unwrap();
            }
        }
    }
    if one_dimensional {
        out.write("density.csv", density.as_bytes())?;
    } else {
        eprintln!("warning: density curves need d = 1; density.csv not written");
    }
    out.write("cmds.csv", scatter.as_bytes())?;
    Ok(())
}

fn from_analysis(out: &mut OutDir, analysis: &TraceAnalysis, jitter: &Jitter) -> CmdResult {
    let mut norms = String::from("replicate,seed,t,frobenius_norm\n");
    for s in &analysis.steps {
        writeln!(norms, "0,,{},{}", s.t, s.frobenius_norm).unwrap();
    }
    out.write("norms_long.csv", norms.as_bytes())?;

    let mut scatter = String::from("t,model_id,repeat_index,x,y\n");
    for s in &analysis.scatters {
        let offsets = jitter.offsets(0, s.t, s.points.len());
        for (p, (dx, dy)) in s.points.iter().zip(offsets) {
            writeln!(
                scatter,
                "{},{},{},{},{}",
                s.t,
                p.model_id,
                p.l,
                p.x + dx,
                p.y + dy
            )
            .unwrap();
        }
    }
    out.write("cmds.csv", scatter.as_bytes())?;
    Ok(())
}

use collapse_core::run_replicates;
use collapse_core::sim::duplicate_seeds;

use crate::failure::CmdResult;
use crate::input::{load_config, resolve_seeds};
use crate::output::OutDir;
use crate::SimulateArgs;

pub fn trajectory_stem(seed: u64) -> String {
    format!("trajectory-seed-{seed}")
}

pub fn run(args: SimulateArgs) -> CmdResult {
    let config = load_config(&args.config)?;
    let mut seeds = resolve_seeds(args.seeds.seeds.as_deref(), config.seed)?;
    let dups = duplicate_seeds(&seeds);
    if !dups.is_empty() {
        eprintln!("warning: duplicate seeds {dups:?} run once each");
        let mut seen = std::collections::BTreeSet::new();
        seeds.retain(|s| seen.insert(*s));
    }

    let mut out = OutDir::prepare(&args.out.out, args.out.force)?;
    let trajectories = run_replicates(&config, &seeds, args.jobs)?;
    for tr in &trajectories {
        let stem = trajectory_stem(tr.seed);
        out.write(&format!("{stem}.json"), tr.to_json()?.as_bytes())?;
        let mut csv = Vec::new();
        tr.write_csv(&mut csv)?;
        out.write(&format!("{stem}.csv"), &csv)?;

        let norms = tr.norms();
        println!(
            "seed {:>6}  |D(0)| {:.6}  |D(T)| {:.6}",
            tr.seed,
            norms[0],
            norms[norms.len() - 1]
        );
    }
    out.finish("simulate", Some(&args.config), &seeds)
}

use collapse_core::{verify_contraction, VerifyOptions};

use crate::failure::{CmdResult, Failure};
use crate::input::{load_config, parse_steps, resolve_seeds};
use crate::output::OutDir;
use crate::VerifyArgs;

pub fn run(args: VerifyArgs) -> CmdResult {
    let mut config = load_config(&args.config)?;
    let seeds = resolve_seeds(args.seeds.seeds.as_deref(), config.seed)?;
    config.seed = seeds[0];

    let checkpoints = match args.t_list.as_deref() {
        Some(list) => parse_steps(list)?,
        None => VerifyOptions::default()
            .checkpoints
            .into_iter()
            .filter(|&t| t <= config.steps)
            .collect(),
    };
    let opts = VerifyOptions {
        replicates: args.replicates,
        tolerance: args.tolerance,
        checkpoints,
        jobs: args.jobs,
        ..Default::default()
    };
    // validate the output location before spending the compute
    let out = args
        .out
        .as_deref()
        .map(|dir| OutDir::prepare(dir, args.force))
        .transpose()?;

    let report = verify_contraction(&config, &opts)?;
    println!("{report}");
    if let Some(mut out) = out {
        out.write(
            "report.json",
            serde_json::to_string_pretty(&report)?.as_bytes(),
        )?;
        out.finish("verify", Some(&args.config), &seeds[..1])?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

use collapse_core::{analyze_trace, load_trace};

use crate::failure::CmdResult;
use crate::input::parse_steps;
use crate::output::OutDir;
use crate::AnalyzeArgs;

pub const ANALYSIS_JSON: &str = "analysis.json";

pub fn run(args: AnalyzeArgs) -> CmdResult {
    let steps = args.t_list.as_deref().map(parse_steps).transpose()?;
    let trace = load_trace(&args.trace)?;
    let analysis = analyze_trace(&trace, steps.as_deref())?;

    let mut out = OutDir::prepare(&args.out.out, args.out.force)?;
    let mut norms = Vec::new();
    analysis.write_norms_csv(&mut norms)?;
    out.write("norms.csv", &norms)?;
    let mut coords = Vec::new();
    analysis.write_coords_csv(&mut coords)?;
    out.write("cmds.csv", &coords)?;
    out.write(
        ANALYSIS_JSON,
        serde_json::to_string_pretty(&analysis)?.as_bytes(),
    )?;

    for s in &analysis.steps {
        println!("t {:>4}  |D| {:.6}", s.t, s.frobenius_norm);
    }
    for s in analysis.scatters.iter().filter(|s| s.clipped) {
        eprintln!("warning: CMDS at t = {} clipped negative eigenvalues", s.t);
    }
    out.finish("analyze", Some(&args.trace), &[])
}

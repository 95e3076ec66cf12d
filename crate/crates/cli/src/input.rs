use std::fs;
use std::path::Path;

use collapse_core::SimConfig;

use crate::failure::{CmdResult, Failure};

/// Reads a config file, choosing the format by extension.
pub fn load_config(path: &Path) -> CmdResult<SimConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let config: SimConfig = match ext.to_ascii_lowercase().as_str() {
        "json" => serde_json::from_str(&text)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?,
        "toml" => {
            toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
        }
        _ => {
            return Err(Failure::usage(format!(
                "{}: config must end in .json or .toml",
                path.display()
            )))
        }
    };
    config.validate()?;
    Ok(config)
}

/// Parses `1,2,7-9` into `[1, 2, 7, 8, 9]`.
pub fn parse_seeds(list: &str) -> CmdResult<Vec<u64>> {
    parse_list(list, "seed")
}

/// Parses a step list with the same syntax as seeds.
pub fn parse_steps(list: &str) -> CmdResult<Vec<usize>> {
    Ok(parse_list(list, "step")?
        .into_iter()
        .map(|t| t as usize)
        .collect())
}

fn parse_list(list: &str, what: &str) -> CmdResult<Vec<u64>> {
    let mut out = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Failure::usage(format!("bad {what} `{part}`"));
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(Failure::usage(format!("empty {what} list")));
    }
    Ok(out)
}

/// Seeds from the flag or environment, falling back to `default`.
pub fn resolve_seeds(flag: Option<&str>, default: u64) -> CmdResult<Vec<u64>> {
    match flag {
        Some(s) => parse_seeds(s),
        None => Ok(vec![default]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1,2, 5-7").unwrap(), vec![1, 2, 5, 6, 7]);
        assert!(parse_seeds("3-1").is_err());
        assert!(parse_seeds("x").is_err());
        assert!(parse_seeds(" , ").is_err());
    }
}

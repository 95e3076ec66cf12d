//! Recorded embedding traces of language-model runs and their analysis.
//!
//! A trace is JSON Lines. The first line is a header
//! `{"meta": {"query", "models", "L", "T", "dim", "embedder"}}`, every other
//! line one response: `{"model_id", "t", "l", "embedding"}` with an optional
//! `"text"`. Every model must have exactly `L` responses (`l = 1..=L`) at every
//! `t = 0..=T`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    cmds_project, distance_matrix, frobenius_norm, mean_embedding, DistanceMatrix,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub query: String,
    pub models: Vec<String>,
    #[serde(rename = "L")]
    pub repeats: usize,
    #[serde(rename = "T")]
    pub steps: usize,
    pub dim: usize,
    pub embedder: String,
    /// Pool size at each step, when the recorder kept it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool_sizes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub model_id: String,
    pub t: usize,
    pub l: usize,
    pub embedding: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: TraceMeta,
}

#[derive(Debug, Clone)]
pub struct EmbeddingTrace {
    pub meta: TraceMeta,
    pub records: Vec<ResponseRecord>,
    // (model index, t) -> record indices ordered by l
    cells: HashMap<(usize, usize), Vec<usize>>,
}

impl EmbeddingTrace {
    /// Validates records against the header.
    pub fn new(meta: TraceMeta, records: Vec<ResponseRecord>) -> Result<Self> {
        Self::build(meta, records.into_iter().map(|r| (0, r)).collect())
    }

    fn build(meta: TraceMeta, records: Vec<(usize, ResponseRecord)>) -> Result<Self> {
        if meta.models.is_empty() {
            return Err(Error::Trace("header lists no models".into()));
        }
        if meta.repeats == 0 || meta.dim == 0 {
            return Err(Error::Trace("header L and dim must be positive".into()));
        }
        let model_index: HashMap<&str, usize> = meta
            .models
            .iter()
            .enumerate()
            .map(|(i, m)| (m.as_str(), i))
            .collect();
        if model_index.len() != meta.models.len() {
            return Err(Error::Trace("duplicate model names in header".into()));
        }
        let fail = |line: usize, reason: String| {
            if line == 0 {
                Error::Trace(reason)
            } else {
                Error::TraceLine { line, reason }
            }
        };

        let mut slots: HashMap<(usize, usize, usize), usize> = HashMap::new();
        for (idx, (line, r)) in records.iter().enumerate() {
            let m = *model_index
                .get(r.model_id.as_str())
                .ok_or_else(|| fail(*line, format!("unknown model `{}`", r.model_id)))?;
            if r.t > meta.steps {
                return Err(fail(
                    *line,
                    format!("t = {} beyond T = {}", r.t, meta.steps),
                ));
            }
            if r.l == 0 || r.l > meta.repeats {
                return Err(fail(
                    *line,
                    format!("l = {} outside 1..={}", r.l, meta.repeats),
                ));
            }
            if r.embedding.len() != meta.dim {
                return Err(fail(
                    *line,
                    format!(
                        "embedding has {} entries, expected {}",
                        r.embedding.len(),
                        meta.dim
                    ),
                ));
            }
            if r.embedding.iter().any(|v| !v.is_finite()) {
                return Err(fail(*line, "non-finite embedding entry".into()));
            }
            if slots.insert((m, r.t, r.l), idx).is_some() {
                return Err(fail(
                    *line,
                    format!("duplicate record ({}, t={}, l={})", r.model_id, r.t, r.l),
                ));
            }
        }

        let mut cells = HashMap::new();
        for (m, name) in meta.models.iter().enumerate() {
            for t in 0..=meta.steps {
                let mut cell = Vec::with_capacity(meta.repeats);
                for l in 1..=meta.repeats {
                    let idx = slots.get(&(m, t, l)).ok_or_else(|| {
                        Error::Trace(format!("missing record ({name}, t={t}, l={l})"))
                    })?;
                    cell.push(*idx);
                }
                cells.insert((m, t), cell);
            }
        }

        Ok(Self {
            meta,
            records: records.into_iter().map(|(_, r)| r).collect(),
            cells,
        })
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut meta = None;
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match meta {
                None => {
                    let h: Header = serde_json::from_str(&line).map_err(|e| Error::TraceLine {
                        line: line_no,
                        reason: format!("bad header: {e}"),
                    })?;
                    meta = Some(h.meta);
                }
                Some(_) => {
                    let r: ResponseRecord =
                        serde_json::from_str(&line).map_err(|e| Error::TraceLine {
                            line: line_no,
                            reason: e.to_string(),
                        })?;
                    records.push((line_no, r));
                }
            }
        }
        let meta = meta.ok_or_else(|| Error::Trace("empty trace".into()))?;
        Self::build(meta, records)
    }

    /// Embeddings of `model` (index into `meta.models`) at step `t`, by `l`.
    pub fn embeddings(&self, model: usize, t: usize) -> Vec<&[f64]> {
        self.cells
            .get(&(model, t))
            .map(|idx| {
                idx.iter()
                    .map(|&i| self.records[i].embedding.as_slice())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(
            &mut w,
            &Header {
                meta: self.meta.clone(),
            },
        )?;
        writeln!(w)?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<EmbeddingTrace> {
    let file = File::open(path)?;
    EmbeddingTrace::from_reader(BufReader::new(file))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    /// Mean embedding of each model, in header order.
    pub means: Vec<Vec<f64>>,
    pub distance: DistanceMatrix,
    pub frobenius_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub model_id: String,
    pub l: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scatter {
    pub t: usize,
    pub points: Vec<ScatterPoint>,
    pub eigenvalues: Vec<f64>,
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceAnalysis {
    pub steps: Vec<TraceStep>,
    pub scatters: Vec<Scatter>,
}

impl TraceAnalysis {
    pub fn norms(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.frobenius_norm).collect()
    }

    pub fn write_norms_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,frobenius_norm")?;
        for s in &self.steps {
            writeln!(w, "{},{}", s.t, s.frobenius_norm)?;
        }
        Ok(())
    }

    /// `t,model_id,repeat_index,x,y` over every scatter.
    pub fn write_coords_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,model_id,repeat_index,x,y")?;
        for s in &self.scatters {
            for p in &s.points {
                writeln!(w, "{},{},{},{},{}", s.t, p.model_id, p.l, p.x, p.y)?;
            }
        }
        Ok(())
    }
}

/// Steps whose scatter is computed when the caller does not choose: 1 and `T`.
pub fn default_scatter_steps(steps: usize) -> Vec<usize> {
    let mut out: Vec<usize> = [1, steps].into_iter().filter(|&t| t <= steps).collect();
    out.dedup();
    if out.is_empty() {
        out.push(0);
    }
    out
}

/// Mean embeddings, distance matrix and norm at every step, plus 2-D classical
/// MDS of all `n L` responses at each step in `scatter_steps`.
pub fn analyze_trace(
    trace: &EmbeddingTrace,
    scatter_steps: Option<&[usize]>,
) -> Result<TraceAnalysis> {
    let steps_total = trace.meta.steps;
    let chosen = match scatter_steps {
        Some(ts) => {
            if let Some(&bad) = ts.iter().find(|&&t| t > steps_total) {
                return Err(Error::param(
                    "t-list",
                    format!("{bad} outside [0, {steps_total}]"),
                ));
            }
            ts.to_vec()
        }
        None => default_scatter_steps(steps_total),
    };
    let n = trace.meta.models.len();

    let mut steps = Vec::with_capacity(steps_total + 1);
    for t in 0..=steps_total {
        let means = (0..n)
            .map(|m| mean_embedding(&trace.embeddings(m, t)))
            .collect::<Result<Vec<_>>>()?;
        let distance = distance_matrix(&means)?;
        steps.push(TraceStep {
            t,
            frobenius_norm: frobenius_norm(&distance),
            distance,
            means,
        });
    }

    let mut scatters = Vec::with_capacity(chosen.len());
    for t in chosen {
        let mut labels = Vec::new();
        let mut vectors = Vec::new();
        for (m, name) in trace.meta.models.iter().enumerate() {
            for (l, e) in trace.embeddings(m, t).into_iter().enumerate() {
                labels.push((name.clone(), l + 1));
                vectors.push(e);
            }
        }
        let proj = cmds_project(&distance_matrix(&vectors)?, 2)?;
        let points = labels
            .into_iter()
            .zip(&proj.coords)
            .map(|((model_id, l), c)| ScatterPoint {
                model_id,
                l,
                x: c[0],
                y: c[1],
            })
            .collect();
        scatters.push(Scatter {
            t,
            points,
            eigenvalues: proj.eigenvalues,
            clipped: proj.clipped,
        });
    }
    Ok(TraceAnalysis { steps, scatters })
}

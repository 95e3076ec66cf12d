//! The shared, append-only sample pool.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a pool item came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Seed,
    Model { model_id: usize, birth_time: usize },
}

/// `k_t = floor(beta * |A_t|)`.
pub fn retrieval_count(pool_size: usize, beta: f64) -> usize {
    (beta * pool_size as f64).floor() as usize
}

/// Points in `R^d`, stored flat in insertion order with their origins.
#[derive(Debug, Clone)]
pub struct SamplePool {
    dim: usize,
    data: Vec<f64>,
    origins: Vec<Origin>,
    seed_count: usize,
}

impl SamplePool {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
            origins: Vec::new(),
            seed_count: 0,
        }
    }

    /// Pool whose initial items are tagged as seed (non-synthetic) data.
    pub fn with_seed(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        let mut pool = Self::new(dim);
        for p in points {
            pool.push(p, Origin::Seed)?;
        }
        Ok(pool)
    }

    fn push(&mut self, p: &[f64], origin: Origin) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: p.len(),
            });
        }
        self.data.extend_from_slice(p);
        self.origins.push(origin);
        if origin == Origin::Seed {
            self.seed_count += 1;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn seed_count(&self) -> usize {
        self.seed_count
    }

    pub fn synthetic_count(&self) -> usize {
        self.len() - self.seed_count
    }

    pub fn item(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn origin(&self, i: usize) -> Origin {
        self.origins[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Indices of `k` distinct items chosen uniformly without replacement.
    pub fn draw(&self, k: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
        if k > self.len() {
            return Err(Error::DrawTooLarge {
                requested: k,
                available: self.len(),
            });
        }
        Ok(rand::seq::index::sample(rng, self.len(), k).into_vec())
    }

    /// Appends model-generated points given flat as `count * d` values. Never
    /// deduplicates.
    pub fn post(&mut self, flat: &[f64], model_id: usize, birth_time: usize) -> Result<()> {
        if flat.is_empty() {
            return Err(Error::EmptyInput("posted items"));
        }
        if !flat.len().is_multiple_of(self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: flat.len() % self.dim,
            });
        }
        let origin = Origin::Model {
            model_id,
            birth_time,
        };
        for p in flat.chunks_exact(self.dim) {
            self.push(p, origin)?;
        }
        Ok(())
    }

    pub fn synthetic_fraction(&self) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyPool);
        }
        Ok(self.synthetic_count() as f64 / self.len() as f64)
    }

    /// CSV snapshot: `index,birth_time,origin,x1..xd`. Seed items have an
    /// empty birth time and origin `seed`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "index,birth_time,origin")?;
        for j in 1..=self.dim {
            write!(w, ",x{j}")?;
        }
        writeln!(w)?;
        for (i, p) in self.iter().enumerate() {
            match self.origins[i] {
                Origin::Seed => write!(w, "{i},,seed")?,
                Origin::Model {
                    model_id,
                    birth_time,
                } => write!(w, "{i},{birth_time},{model_id}")?,
            }
            for v in p {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Synthetic share of a pool that started with `seed_size` items and gains
/// `n` synthetic items per step, after `t` steps: `n t / (seed_size + n t)`.
pub fn synthetic_fraction_law(n: usize, t: usize, seed_size: usize) -> Result<f64> {
    let synthetic = n * t;
    let total = seed_size + synthetic;
    if total == 0 {
        return Err(Error::EmptyPool);
    }
    Ok(synthetic as f64 / total as f64)
}

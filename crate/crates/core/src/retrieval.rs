//! Database ranking from precomputed global image descriptors.

use std::cmp::Ordering;

use log::warn;

use crate::error::{Error, Result};

/// L2-normalized global image descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalDescriptor {
    pub id: String,
    vector: Vec<f64>,
}

impl GlobalDescriptor {
    /// Normalizes `vector` to unit length, warning when it was not already
    /// unit within 1e-6.
    pub fn new(id: impl Into<String>, vector: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if vector.is_empty() || !vector.iter().all(|v| v.is_finite()) {
            return Err(Error::Format(format!("descriptor {id} is empty or non-finite")));
        }
        let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Format(format!("descriptor {id} is the zero vector")));
        }
        let vector = if (norm - 1.0).abs() > 1e-6 {
            warn!("descriptor {id} has norm {norm}, normalizing");
            vector.into_iter().map(|v| v / norm).collect()
        } else {
            vector
        };
        Ok(GlobalDescriptor { id, vector })
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn similarity(&self, other: &GlobalDescriptor) -> f64 {
        self.vector.iter().zip(&other.vector).map(|(a, b)| a * b).sum()
    }
}

/// Ids of the `k` database descriptors most similar to `query` by inner
/// product, best first. Equal scores are ordered by id.
pub fn rank_database(
    query: &GlobalDescriptor,
    db: &[GlobalDescriptor],
    k: usize,
) -> Result<Vec<String>> {
    if db.is_empty() {
        return Err(Error::Format("empty descriptor database".into()));
    }
    if let Some(bad) = db.iter().find(|d| d.dim() != query.dim()) {
        return Err(Error::Format(format!(
            "descriptor {} has dimension {}, query {} has {}",
            bad.id,
            bad.dim(),
            query.id,
            query.dim()
        )));
    }
    let mut scored: Vec<(f64, &str)> = db
        .iter()
        .map(|d| (query.similarity(d), d.id.as_str()))
        .collect();
    let by_rank = |a: &(f64, &str), b: &(f64, &str)| -> Ordering {
        b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
    };
    let k = k.min(scored.len());
    if k == 0 {
        return Ok(Vec::new());
    }
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, by_rank);
        scored.truncate(k);
    }
    scored.sort_by(by_rank);
    Ok(scored.into_iter().map(|(_, id)| id.to_string()).collect())
}

//! Test corpora of detected renormalizable maps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{detect_monotone_with, DetectConfig, MonotoneType, RenormalizationData};
use crate::diffeo::{Diffeomorphism, DEFAULT_GRID};
use crate::error::Result;
use crate::island::locate_island;
use crate::map::{LorenzMap, StandardParams};

/// Grid of slices and island positions to sample.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub rhos: Vec<f64>,
    pub cs: Vec<f64>,
    /// Largest `n` and `m`.
    pub max_return: usize,
    /// Largest `n + m`.
    pub max_total: usize,
    /// Constant nonlinearities `(a, b)` of `φ` and `ψ`.
    pub coefficients: Vec<(f64, f64)>,
    /// Positions of the critical returns inside `R` and `L`.
    pub thetas: Vec<(f64, f64)>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            rhos: vec![2.0, 2.5, 3.0],
            cs: vec![0.3, 0.5],
            max_return: 8,
            max_total: 9,
            coefficients: vec![(0.0, 0.0), (0.3, -0.3)],
            thetas: vec![(0.5, 0.5)],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusKey {
    pub rho: f64,
    pub c: f64,
    #[serde(rename = "type")]
    pub kind: MonotoneType,
    pub coefficients: (f64, f64),
    pub theta: (f64, f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusEntry {
    pub key: CorpusKey,
    pub map: LorenzMap,
    pub data: RenormalizationData,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusMiss {
    pub key: CorpusKey,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
    pub misses: Vec<CorpusMiss>,
}

/// Diffeomorphism with constant nonlinearity `a`.
pub fn constant_coefficient(a: f64) -> Result<Diffeomorphism> {
    Diffeomorphism::from_nonlinearity(vec![a; DEFAULT_GRID])
}

impl CorpusConfig {
    pub fn keys(&self) -> Vec<CorpusKey> {
        let mut keys = Vec::new();
        for &rho in &self.rhos {
            for &c in &self.cs {
                for n in 1..=self.max_return {
                    for m in 1..=self.max_return {
                        if n + m > self.max_total {
                            continue;
                        }
                        for &coefficients in &self.coefficients {
                            for &theta in &self.thetas {
                                keys.push(CorpusKey { rho, c, kind: MonotoneType { n, m }, coefficients, theta });
                            }
                        }
                    }
                }
            }
        }
        keys
    }
}

fn build_one(key: &CorpusKey, detect: &DetectConfig) -> Result<CorpusEntry> {
    let base = LorenzMap::new(
        StandardParams::new(1.0, 1.0, key.c, key.rho)?,
        constant_coefficient(key.coefficients.0)?,
        constant_coefficient(key.coefficients.1)?,
    )?;
    let map = locate_island(&base, key.kind, key.theta, detect)?;
    let data = detect_monotone_with(&map, key.kind, detect)?;
    Ok(CorpusEntry { key: key.clone(), map, data })
}

/// Locate one island map per key; misses are kept with their reason.
pub fn build_corpus(cfg: &CorpusConfig, detect: &DetectConfig) -> Corpus {
    let results: Vec<(CorpusKey, Result<CorpusEntry>)> = cfg
        .keys()
        .into_par_iter()
        .map(|key| {
            let r = build_one(&key, detect);
            (key, r)
        })
        .collect();
    let mut corpus = Corpus::default();
    for (key, r) in results {
        match r {
            Ok(e) => corpus.entries.push(e),
            Err(e) => corpus.misses.push(CorpusMiss { key, reason: e.to_string() }),
        }
    }
    corpus
}

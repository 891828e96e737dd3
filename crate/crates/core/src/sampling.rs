//! Synthetic normals (SMOTE) and Monte-Carlo estimation of how much of a
//! uniform anomaly law a model accepts.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{bounding_box, fill_uniform, gen_uniform, BoundingBox, Dataset, Label};
use crate::error::{Error, Result};
use crate::kernel::squared_distance;
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::svdd::SvddModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Synthetic count is `ceil(multiplier * l)`.
    pub multiplier: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            multiplier: 1.0,
            seed: 0,
        }
    }
}

/// Provenance of one synthetic point: `x_source + u * (x_neighbor - x_source)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoteDraw {
    pub source: usize,
    pub neighbor: usize,
    pub u: f64,
}

/// The `k` nearest other points of `source`, closest first, ties by index.
pub fn nearest_neighbors(data: &Dataset, source: usize, k: usize) -> Vec<usize> {
    let x = data.row(source);
    let mut others: Vec<(f64, usize)> = (0..data.len())
        .filter(|&j| j != source)
        .map(|j| (squared_distance(x, data.row(j)), j))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.truncate(k);
    others.into_iter().map(|(_, j)| j).collect()
}

pub fn smote_count(multiplier: f64, l: usize) -> usize {
    ((multiplier * l as f64) - 1e-9).ceil().max(1.0) as usize
}

/// SMOTE oversampling, returning the synthetic points and how each was made.
///
/// Sources are visited in a seeded random order, cycling through the whole
/// training set before any point is reused.
pub fn smote_with_provenance(train: &Dataset, config: &SmoteConfig) -> Result<(Dataset, Vec<SmoteDraw>)> {
    let l = train.len();
    if l < 2 {
        return Err(Error::param("train", "SMOTE needs at least 2 points"));
    }
    if config.k_neighbors == 0 {
        return Err(Error::param("k_neighbors", "must be >= 1"));
    }
    if !(config.multiplier > 0.0 && config.multiplier.is_finite()) {
        return Err(Error::param("multiplier", format!("{} must be positive", config.multiplier)));
    }
    let k = config.k_neighbors.min(l - 1);
    let neighbors: Vec<Vec<usize>> = (0..l).map(|i| nearest_neighbors(train, i, k)).collect();
    let m = smote_count(config.multiplier, l);

    let mut rng = rng_from_seed(config.seed);
    let mut order: Vec<usize> = (0..l).collect();
    let mut values = Vec::with_capacity(m * train.dim());
    let mut draws = Vec::with_capacity(m);
    for t in 0..m {
        if t % l == 0 {
            order.shuffle(&mut rng);
        }
        let source = order[t % l];
        let neighbor = neighbors[source][rng.random_range(0..k)];
        let u: f64 = rng.random();
        let (a, b) = (train.row(source), train.row(neighbor));
        values.extend(a.iter().zip(b).map(|(&ai, &bi)| ai + u * (bi - ai)));
        draws.push(SmoteDraw { source, neighbor, u });
    }
    let data = Dataset::from_flat(format!("{}-smote", train.name()), train.dim(), values)?;
    Ok((data, draws))
}

pub fn smote_oversample(train: &Dataset, config: &SmoteConfig) -> Result<Dataset> {
    smote_with_provenance(train, config).map(|(d, _)| d)
}

/// Uniform anomaly law on a box, with a sample size and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalySampler {
    pub bbox: BoundingBox,
    pub count: usize,
    pub seed: u64,
}

/// Monte-Carlo sample size used when none is configured: `max(10000, 100 l)`.
pub fn default_mc_count(l: usize) -> usize {
    10_000.max(100 * l)
}

const BATCH: usize = 4096;

impl AnomalySampler {
    pub fn new(bbox: BoundingBox, count: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::param("count", "must be >= 1"));
        }
        Ok(Self { bbox, count, seed })
    }

    /// Box `bounding_box(train, 2)` with the default sample size.
    pub fn for_train(train: &Dataset, seed: u64) -> Result<Self> {
        Self::new(bounding_box(train, 2.0)?, default_mc_count(train.len()), seed)
    }

    pub fn with_count(&self, count: usize) -> Result<Self> {
        Self::new(self.bbox.clone(), count, self.seed)
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    /// All `count` points at once, drawn from a single stream.
    pub fn sample(&self) -> Result<Dataset> {
        gen_uniform(self.seed, self.count, &self.bbox)
    }
}

/// Fraction of uniform samples the model labels normal.
///
/// Samples are drawn in fixed-size batches, each from its own derived seed,
/// so the estimate does not depend on the rayon thread count.
pub fn mc_anomaly_acceptance(model: &SvddModel, sampler: &AnomalySampler) -> Result<f64> {
    if sampler.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: sampler.dim(),
        });
    }
    let n_batches = sampler.count.div_ceil(BATCH);
    let accepted: usize = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let size = BATCH.min(sampler.count - b * BATCH);
            let mut rng = rng_from_seed(derive_seed(sampler.seed, &[stream::BATCH, b as u64]));
            let mut point = Vec::with_capacity(sampler.dim());
            let mut hits = 0usize;
            for _ in 0..size {
                point.clear();
                fill_uniform(&mut rng, &sampler.bbox, &mut point);
                if model.predict_unchecked(&point) == Label::Normal {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    Ok(accepted as f64 / sampler.count as f64)
}

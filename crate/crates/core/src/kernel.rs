//! Gaussian kernel `K(x, x') = exp(-|x - x'|^2 / gamma)`.
//!
//! `gamma` divides the squared distance directly; it is not the
//! `1 / (2 sigma^2)` convention used by most SVM libraries.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Kernel bandwidth, a positive finite squared-distance scale.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Bandwidth(f64);

impl Bandwidth {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma.is_finite() && gamma > 0.0 {
            Ok(Self(gamma))
        } else {
            Err(Error::param("gamma", format!("{gamma} must be positive and finite")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Bandwidth {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Bandwidth> for f64 {
    fn from(b: Bandwidth) -> f64 {
        b.0
    }
}

pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Kernel value without the dimension check.
#[inline]
pub(crate) fn gauss_unchecked(x: &[f64], y: &[f64], gamma: Bandwidth) -> f64 {
    (-squared_distance(x, y) / gamma.0).exp()
}

pub fn gauss_kernel(x: &[f64], x_prime: &[f64], gamma: Bandwidth) -> Result<f64> {
    if x.len() != x_prime.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: x_prime.len(),
        });
    }
    Ok(gauss_unchecked(x, x_prime, gamma))
}

/// Dense symmetric kernel matrix of a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    size: usize,
    values: Vec<f64>,
    gamma: Bandwidth,
}

impl GramMatrix {
    /// Build from explicit row-major entries. The matrix must be symmetric
    /// with a unit diagonal and off-diagonal entries in `[0, 1]`.
    pub fn from_values(size: usize, values: Vec<f64>, gamma: Bandwidth) -> Result<Self> {
        if size == 0 || values.len() != size * size {
            return Err(Error::param("gram", format!("{} entries for size {size}", values.len())));
        }
        for i in 0..size {
            if values[i * size + i] != 1.0 {
                return Err(Error::param("gram", format!("diagonal entry {i} is not 1")));
            }
            for j in 0..size {
                let v = values[i * size + j];
                if !v.is_finite() {
                    return Err(Error::NonFiniteGram { row: i, col: j });
                }
                if !(0.0..=1.0).contains(&v) || v != values[j * size + i] {
                    return Err(Error::param("gram", format!("entry ({i}, {j}) = {v} is invalid")));
                }
            }
        }
        Ok(Self { size, values, gamma })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn gamma(&self) -> Bandwidth {
        self.gamma
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.size..(i + 1) * self.size]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Entries strictly above the diagonal, row by row.
    pub fn upper_triangle(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.size).flat_map(move |i| ((i + 1)..self.size).map(move |j| self.get(i, j)))
    }
}

/// Gram matrix of `data`; each pair is evaluated once and mirrored.
pub fn gram_matrix(data: &Dataset, gamma: Bandwidth) -> GramMatrix {
    let l = data.len();
    let mut values = vec![0.0; l * l];
    for i in 0..l {
        values[i * l + i] = 1.0;
        let xi = data.row(i);
        for j in (i + 1)..l {
            let k = gauss_unchecked(xi, data.row(j), gamma);
            values[i * l + j] = k;
            values[j * l + i] = k;
        }
    }
    GramMatrix {
        size: l,
        values,
        gamma,
    }
}

/// Median of the squared distances over all unordered pairs of distinct rows.
///
/// Returns `None` when the dataset has a single point.
pub fn median_pairwise_sq_distance(data: &Dataset) -> Option<f64> {
    let l = data.len();
    if l < 2 {
        return None;
    }
    let mut d: Vec<f64> = Vec::with_capacity(l * (l - 1) / 2);
    for i in 0..l {
        for j in (i + 1)..l {
            d.push(squared_distance(data.row(i), data.row(j)));
        }
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    Some(if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    })
}

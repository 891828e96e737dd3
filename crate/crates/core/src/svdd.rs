//! Support Vector Data Description in dual form.
//!
//! The dual solved here is
//!
//! ```text
//! maximize   sum_i a_i K_ii - sum_ij a_i a_j K_ij
//! subject to sum_i a_i = 1,  0 <= a_i <= 1 / (nu * l)
//! ```
//!
//! With the Gaussian kernel `K_ii = 1`, so this is the minimisation of the
//! quadratic form `a' K a` over a capped simplex. A point `x` is inside the
//! ball when `sum_i a_i K(x, x_i) >= rho`.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::kernel::{gauss_unchecked, gram_matrix, Bandwidth};
use crate::rng::rng_from_seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvddConfig {
    /// Upper bound on the training outlier fraction, in `(0, 1]`.
    pub nu: f64,
    /// Stop once the maximal KKT violation falls to this value.
    pub solver_tolerance: f64,
    /// Pass budget, one pass being `l` pair updates; `None` means `10 * l * l`.
    pub max_passes: Option<usize>,
    /// Weights above this count as support vectors.
    pub sv_threshold: f64,
}

impl Default for SvddConfig {
    fn default() -> Self {
        Self {
            nu: 0.1,
            solver_tolerance: 1e-6,
            max_passes: None,
            sv_threshold: 1e-8,
        }
    }
}

impl SvddConfig {
    pub fn with_nu(nu: f64) -> Self {
        Self {
            nu,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::param("nu", format!("{} not in (0, 1]", self.nu)));
        }
        if !(self.solver_tolerance > 0.0 && self.solver_tolerance.is_finite()) {
            return Err(Error::param("solver_tolerance", "must be positive"));
        }
        if !(self.sv_threshold >= 0.0 && self.sv_threshold.is_finite()) {
            return Err(Error::param("sv_threshold", "must be non-negative"));
        }
        if self.max_passes == Some(0) {
            return Err(Error::param("max_passes", "must be >= 1"));
        }
        Ok(())
    }

    /// Box constraint `1 / (nu * l)` for a training set of size `l`.
    pub fn cap(&self, l: usize) -> f64 {
        1.0 / (self.nu * l as f64)
    }
}

/// A fitted SVDD model. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct SvddModel {
    alphas: Vec<f64>,
    support_indices: Vec<usize>,
    rho: f64,
    radius_sq: f64,
    gamma: Bandwidth,
    nu: f64,
    train: Dataset,
    offset_const: f64,
    iterations: usize,
    kkt_violation: f64,
}

/// Training-set statistics of a fitted model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelStats {
    pub sv_fraction: f64,
    pub outlier_fraction: f64,
}

struct Solution {
    alphas: Vec<f64>,
    iterations: usize,
    violation: f64,
}

/// Pairwise working-set descent on the capped simplex.
///
/// Each step moves weight from the point with the largest gradient that can
/// still decrease to the point with the smallest gradient that can still
/// increase, so `sum(a) = 1` holds exactly in exact arithmetic.
fn solve_dual(gram: &[f64], l: usize, cap: f64, tol: f64, max_iter: usize, seed: u64) -> Result<Solution> {
    let mut alphas = vec![1.0 / l as f64; l];
    if l == 1 {
        return Ok(Solution {
            alphas: vec![1.0],
            iterations: 0,
            violation: 0.0,
        });
    }
    // g = K a (half the gradient of a' K a)
    let mut g: Vec<f64> = (0..l)
        .map(|i| gram[i * l..(i + 1) * l].iter().zip(&alphas).map(|(k, a)| k * a).sum())
        .collect();

    // scan order only matters for breaking exact ties
    let mut order: Vec<usize> = (0..l).collect();
    order.shuffle(&mut rng_from_seed(seed));

    let mut iterations = 0;
    loop {
        let mut up = usize::MAX;
        let mut g_up = f64::INFINITY;
        let mut down = usize::MAX;
        let mut g_down = f64::NEG_INFINITY;
        for &k in &order {
            if alphas[k] < cap && g[k] < g_up {
                g_up = g[k];
                up = k;
            }
            if alphas[k] > 0.0 && g[k] > g_down {
                g_down = g[k];
                down = k;
            }
        }
        let violation = g_down - g_up;
        if up == usize::MAX || down == usize::MAX || up == down || violation <= tol {
            return Ok(Solution {
                alphas,
                iterations,
                violation: violation.max(0.0),
            });
        }
        if iterations >= max_iter {
            return Err(Error::NotConverged {
                iterations,
                violation,
            });
        }
        iterations += 1;

        let (i, j) = (up, down);
        let curvature = gram[i * l + i] + gram[j * l + j] - 2.0 * gram[i * l + j];
        let limit_i = cap - alphas[i];
        let limit_j = alphas[j];
        let unconstrained = if curvature > 1e-12 {
            violation / curvature
        } else {
            f64::INFINITY
        };
        let step;
        if unconstrained >= limit_i.min(limit_j) {
            if limit_i <= limit_j {
                step = limit_i;
                alphas[j] -= step;
                alphas[i] = cap;
                if limit_i == limit_j {
                    alphas[j] = 0.0;
                }
            } else {
                step = limit_j;
                alphas[i] += step;
                alphas[j] = 0.0;
            }
        } else {
            step = unconstrained;
            alphas[i] += step;
            alphas[j] -= step;
        }
        let (row_i, row_j) = (&gram[i * l..(i + 1) * l], &gram[j * l..(j + 1) * l]);
        for k in 0..l {
            g[k] += step * (row_i[k] - row_j[k]);
        }
    }
}

fn dot_gram_row(gram: &[f64], l: usize, i: usize, alphas: &[f64]) -> f64 {
    gram[i * l..(i + 1) * l].iter().zip(alphas).map(|(k, a)| k * a).sum()
}

/// `max g over a > 0` minus `min g over a < cap`, floored at zero.
fn max_violation(alphas: &[f64], g: &[f64], cap: f64) -> f64 {
    let mut down = f64::NEG_INFINITY;
    let mut up = f64::INFINITY;
    for (&a, &gi) in alphas.iter().zip(g) {
        if a > 0.0 {
            down = down.max(gi);
        }
        if a < cap {
            up = up.min(gi);
        }
    }
    if down.is_finite() && up.is_finite() {
        (down - up).max(0.0)
    } else {
        0.0
    }
}

/// Threshold from the final weights and `g = K a`.
fn estimate_rho(alphas: &[f64], g: &[f64], cap: f64, sv_threshold: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut max_capped = f64::NEG_INFINITY;
    let mut min_zero = f64::INFINITY;
    for (&a, &gi) in alphas.iter().zip(g) {
        if a > sv_threshold && a < cap - sv_threshold {
            free_sum += gi;
            free_count += 1;
        } else if a >= cap - sv_threshold {
            max_capped = max_capped.max(gi);
        } else {
            min_zero = min_zero.min(gi);
        }
    }
    if free_count > 0 {
        return free_sum / free_count as f64;
    }
    match (max_capped.is_finite(), min_zero.is_finite()) {
        (true, true) => 0.5 * (max_capped + min_zero),
        (true, false) => max_capped,
        (false, true) => min_zero,
        (false, false) => 0.0,
    }
}

/// Fit SVDD on `train` with bandwidth `gamma`.
///
/// The seed only permutes the scan order used to break ties between equally
/// violating points.
pub fn fit(train: &Dataset, gamma: Bandwidth, config: &SvddConfig, seed: u64) -> Result<SvddModel> {
    config.validate()?;
    let l = train.len();
    let cap = config.cap(l);
    let gram = gram_matrix(train, gamma);
    if let Some(pos) = gram.as_flat().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGram {
            row: pos / l,
            col: pos % l,
        });
    }
    let max_iter = config.max_passes.unwrap_or(10 * l * l).saturating_mul(l);
    let flat = gram.as_flat();
    let sol = solve_dual(flat, l, cap, config.solver_tolerance, max_iter, seed)?;
    let alphas = sol.alphas;

    let g: Vec<f64> = (0..l).map(|i| dot_gram_row(flat, l, i, &alphas)).collect();
    let offset_const: f64 = alphas.iter().zip(&g).map(|(a, gi)| a * gi).sum();
    let rho = estimate_rho(&alphas, &g, cap, config.sv_threshold);
    let kkt_violation = max_violation(&alphas, &g, cap).max(sol.violation);
    let support_indices = alphas
        .iter()
        .enumerate()
        .filter_map(|(i, &a)| (a > config.sv_threshold).then_some(i))
        .collect();
    Ok(SvddModel {
        alphas,
        support_indices,
        rho,
        radius_sq: (1.0 - 2.0 * rho + offset_const).max(0.0),
        gamma,
        nu: config.nu,
        train: train.clone(),
        offset_const,
        iterations: sol.iterations,
        kkt_violation,
    })
}

impl SvddModel {
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn support_indices(&self) -> &[usize] {
        &self.support_indices
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn radius_sq(&self) -> f64 {
        self.radius_sq
    }

    pub fn gamma(&self) -> Bandwidth {
        self.gamma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn train_points(&self) -> &Dataset {
        &self.train
    }

    /// `sum_ij a_i a_j K_ij`.
    pub fn offset_const(&self) -> f64 {
        self.offset_const
    }

    /// Dual objective `sum_i a_i K_ii - a' K a`.
    pub fn dual_objective(&self) -> f64 {
        self.alphas.iter().sum::<f64>() - self.offset_const
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Maximal KKT violation at termination.
    pub fn kkt_violation(&self) -> f64 {
        self.kkt_violation
    }

    pub fn dim(&self) -> usize {
        self.train.dim()
    }

    /// Same weights with a different threshold.
    pub fn with_threshold(mut self, rho: f64) -> Self {
        self.rho = rho;
        self.radius_sq = (1.0 - 2.0 * rho + self.offset_const).max(0.0);
        self
    }

    #[inline]
    pub(crate) fn decision_value_unchecked(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (a, xi) in self.alphas.iter().zip(self.train.rows()) {
            if *a > 0.0 {
                s += a * gauss_unchecked(x, xi, self.gamma);
            }
        }
        s - self.rho
    }

    #[inline]
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Label {
        if self.decision_value_unchecked(x) >= 0.0 {
            Label::Normal
        } else {
            Label::Anomaly
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    /// `sum_i a_i K(x, x_i) - rho`; non-negative inside or on the ball.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.decision_value_unchecked(x))
    }

    /// `Normal` iff the decision value is `>= 0`.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        self.check_dim(x.len())?;
        Ok(self.predict_unchecked(x))
    }

    pub fn predict_all(&self, data: &Dataset) -> Result<Vec<Label>> {
        self.check_dim(data.dim())?;
        Ok(data.rows().map(|x| self.predict_unchecked(x)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<ModelFile>(text)?.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Slack added to the KKT violation when telling outliers from boundary points.
pub const BOUNDARY_SLACK: f64 = 1e-12;

/// Fraction of support vectors and of training points outside the ball.
///
/// A point counts as an outlier when its decision value is below
/// `-(kkt_violation + BOUNDARY_SLACK)`. Points within that band cannot be
/// told apart from the boundary at the accuracy the solver reached; free
/// support vectors sit there, spread around the threshold by solver noise.
pub fn model_stats(model: &SvddModel, train: &Dataset) -> Result<ModelStats> {
    model.check_dim(train.dim())?;
    let l = train.len() as f64;
    let band = model.kkt_violation + BOUNDARY_SLACK;
    let outliers = train
        .rows()
        .filter(|x| model.decision_value_unchecked(x) < -band)
        .count();
    Ok(ModelStats {
        sv_fraction: model.support_indices.len() as f64 / model.alphas.len() as f64,
        outlier_fraction: outliers as f64 / l,
    })
}

/// On-disk model representation.
#[derive(Serialize, Deserialize)]
pub struct ModelFile {
    pub gamma: f64,
    pub nu: f64,
    pub rho: f64,
    pub radius_sq: f64,
    pub alphas: Vec<f64>,
    pub support_indices: Vec<usize>,
    #[serde(default)]
    pub kkt_violation: f64,
    pub train_points: Vec<Vec<f64>>,
}

impl From<&SvddModel> for ModelFile {
    fn from(m: &SvddModel) -> Self {
        Self {
            gamma: m.gamma.value(),
            nu: m.nu,
            rho: m.rho,
            radius_sq: m.radius_sq,
            alphas: m.alphas.clone(),
            support_indices: m.support_indices.clone(),
            kkt_violation: m.kkt_violation,
            train_points: m.train.to_rows(),
        }
    }
}

impl TryFrom<ModelFile> for SvddModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let gamma = Bandwidth::new(f.gamma)?;
        let train = Dataset::new("model-train", f.train_points)?;
        let l = train.len();
        if f.alphas.len() != l {
            return Err(Error::InvalidDataset(format!("{} weights for {l} training points", f.alphas.len())));
        }
        if f.support_indices.iter().any(|&i| i >= l) {
            return Err(Error::InvalidDataset("support index out of range".into()));
        }
        let gram = gram_matrix(&train, gamma);
        let offset_const = (0..l)
            .map(|i| f.alphas[i] * dot_gram_row(gram.as_flat(), l, i, &f.alphas))
            .sum();
        Ok(Self {
            alphas: f.alphas,
            support_indices: f.support_indices,
            rho: f.rho,
            radius_sq: f.radius_sq,
            gamma,
            nu: f.nu,
            train,
            offset_const,
            iterations: 0,
            kkt_violation: f.kkt_violation,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::gen_gaussian_mixture;

    fn bw(g: f64) -> Bandwidth {
        Bandwidth::new(g).unwrap()
    }

    #[test]
    fn nu_one_forces_uniform_weights() {
        let data = gen_gaussian_mixture(3, 15, &[vec![0.0, 0.0]]).unwrap();
        let m = fit(&data, bw(1.0), &SvddConfig::with_nu(1.0), 0).unwrap();
        for &a in m.alphas() {
            assert!((a - 1.0 / 15.0).abs() < 1e-15);
        }
        let stats = model_stats(&m, &data).unwrap();
        assert_eq!(stats.sv_fraction, 1.0);
    }

    #[test]
    fn single_point_degenerate_ball() {
        let data = Dataset::new("one", vec![vec![1.5, -2.0]]).unwrap();
        for nu in [0.1, 0.5, 1.0] {
            let m = fit(&data, bw(0.7), &SvddConfig::with_nu(nu), 1).unwrap();
            assert_eq!(m.alphas(), &[1.0]);
            assert_eq!(m.decision_value(&[1.5, -2.0]).unwrap(), 0.0);
            assert_eq!(m.radius_sq(), 0.0);
            let stats = model_stats(&m, &data).unwrap();
            assert_eq!((stats.sv_fraction, stats.outlier_fraction), (1.0, 0.0));
        }
    }

    #[test]
    fn far_point_is_anomaly() {
        let data = gen_gaussian_mixture(5, 30, &[vec![0.0, 0.0]]).unwrap();
        let m = fit(&data, bw(2.0), &SvddConfig::with_nu(0.2), 5).unwrap();
        let far = [1e3, -1e3];
        let v = m.decision_value(&far).unwrap();
        assert!((v + m.rho()).abs() < 1e-15);
        assert!(v < 0.0);
        assert_eq!(m.predict(&far).unwrap(), Label::Anomaly);
        assert!(m.decision_value(&[0.0]).is_err());
    }

    #[test]
    fn tie_counts_as_normal() {
        let data = Dataset::new("one", vec![vec![0.0]]).unwrap();
        let m = fit(&data, bw(1.0), &SvddConfig::with_nu(1.0), 0).unwrap();
        assert_eq!(m.decision_value(&[0.0]).unwrap(), 0.0);
        assert_eq!(m.predict(&[0.0]).unwrap(), Label::Normal);
    }

    #[test]
    fn invalid_config_rejected() {
        let data = Dataset::new("one", vec![vec![0.0], vec![1.0]]).unwrap();
        for nu in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(fit(&data, bw(1.0), &SvddConfig::with_nu(nu), 0).is_err());
        }
    }

    #[test]
    fn iteration_budget_is_reported() {
        let data = gen_gaussian_mixture(8, 40, &[vec![0.0, 0.0]]).unwrap();
        let config = SvddConfig {
            nu: 0.1,
            solver_tolerance: 1e-12,
            max_passes: Some(1),
            ..SvddConfig::default()
        };
        match fit(&data, bw(1.0), &config, 0) {
            Err(Error::NotConverged { iterations, violation }) => {
                assert_eq!(iterations, 40);
                assert!(violation > 1e-12);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let data = gen_gaussian_mixture(9, 25, &[vec![1.0, 1.0], vec![-1.0, -1.0]]).unwrap();
        let m = fit(&data, bw(0.9), &SvddConfig::with_nu(0.2), 2).unwrap();
        let back = SvddModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.alphas(), m.alphas());
        assert_eq!(back.rho().to_bits(), m.rho().to_bits());
        assert_eq!(back.radius_sq().to_bits(), m.radius_sq().to_bits());
        assert_eq!(back.support_indices(), m.support_indices());
        assert_eq!(back.train_points().as_flat(), m.train_points().as_flat());
        assert_eq!(back.offset_const().to_bits(), m.offset_const().to_bits());
    }
}

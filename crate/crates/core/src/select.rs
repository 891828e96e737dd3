//! Bandwidth sweeps, plateau detection and bandwidth selection.
//!
//! A sweep evaluates one risk at every point of a [`GammaGrid`]. Failed
//! evaluations are stored as `f64::INFINITY` and never join a plateau.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{bounding_box, Dataset, LabeledDataset};
use crate::error::{Error, Result};
use crate::kernel::{gram_matrix, median_pairwise_sq_distance, Bandwidth};
use crate::risk::{
    risk_empirical, risk_kernel, risk_polarization, risk_smote, risk_sv, validation_error, RiskKind,
};
use crate::rng::{derive_seed, stream};
use crate::sampling::{default_mc_count, smote_oversample, AnomalySampler, SmoteConfig};
use crate::svdd::{fit, model_stats, SvddConfig};

/// Strictly increasing positive bandwidths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaGrid {
    values: Vec<f64>,
}

/// Number of points in the automatic grid.
pub const DEFAULT_GRID_STEPS: usize = 50;

impl GammaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::param("grid", "needs at least 2 values"));
        }
        if values.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::param("grid", "values must be positive and finite"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("grid", "values must be strictly increasing"));
        }
        Ok(Self { values })
    }

    /// `steps` log-spaced values from `min` to `max`, endpoints exact.
    pub fn log_spaced(min: f64, max: f64, steps: usize) -> Result<Self> {
        if !(min > 0.0 && max > min && max.is_finite()) {
            return Err(Error::param("grid", format!("need 0 < min < max, got [{min}, {max}]")));
        }
        if steps < 2 {
            return Err(Error::param("grid", "needs at least 2 steps"));
        }
        let (a, b) = (min.ln(), max.ln());
        let last = steps - 1;
        let values = (0..steps)
            .map(|k| match k {
                0 => min,
                k if k == last => max,
                k => (a + (b - a) * k as f64 / last as f64).exp(),
            })
            .collect();
        Self::new(values)
    }

    /// `[1e-2 d, 1e2 d]` with `d` the median pairwise squared distance of `train`.
    pub fn auto(train: &Dataset, steps: usize) -> Result<Self> {
        let (lo, hi) = auto_bounds(train)?;
        Self::log_spaced(lo, hi, steps)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bandwidth(&self, i: usize) -> Bandwidth {
        Bandwidth::new(self.values[i]).expect("grid values are validated")
    }
}

/// Bounds of the automatic grid.
pub fn auto_bounds(train: &Dataset) -> Result<(f64, f64)> {
    let d = median_pairwise_sq_distance(train)
        .filter(|&d| d > 0.0)
        .ok_or_else(|| Error::param("train", "auto grid needs two distinct points"))?;
    Ok((1e-2 * d, 1e2 * d))
}

/// What a curve measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CurveKind {
    Risk(RiskKind),
    Validation,
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveKind::Risk(k) => k.fmt(f),
            CurveKind::Validation => f.write_str("validation"),
        }
    }
}

impl FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("validation") {
            Ok(CurveKind::Validation)
        } else {
            s.parse().map(CurveKind::Risk)
        }
    }
}

impl Serialize for CurveKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CurveKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub gamma: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    pub kind: CurveKind,
    pub nu: f64,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
    /// SVDD fits performed while building the curve.
    pub solver_fits: usize,
}

impl RiskCurve {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.gamma).collect()
    }

    /// CSV with columns `gamma,value,kind,nu`; the sentinel is written `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,value,kind,nu\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", p.gamma, p.value, self.kind, self.nu));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let bad = |msg: String| Error::Csv {
            path: "<curve>".into(),
            message: msg,
        };
        let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| bad(format!("missing column '{name}'")))
        };
        let (gi, vi, ki, ni) = (col("gamma")?, col("value")?, col("kind")?, col("nu")?);
        let mut points = Vec::new();
        let mut kind = None;
        let mut nu = f64::NAN;
        for (r, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |i: usize| {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| bad(format!("row {}: '{}' is not a number", r + 1, &rec[i])))
            };
            let value = num(vi)?;
            if value.is_nan() {
                return Err(bad(format!("row {}: NaN value", r + 1)));
            }
            points.push(CurvePoint { gamma: num(gi)?, value });
            kind = Some(rec[ki].parse::<CurveKind>()?);
            nu = num(ni)?;
        }
        let kind = kind.ok_or_else(|| bad("curve has no rows".into()))?;
        Ok(Self {
            kind,
            nu,
            seed: 0,
            points,
            solver_fits: 0,
        })
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv(&text).map_err(|e| match e {
            Error::Csv { message, .. } => Error::Csv {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }
}

/// Knobs of the risk estimators that are not part of the SVDD problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskSettings {
    /// Monte-Carlo sample size; `None` means `max(10000, 100 l)`.
    pub mc_count: Option<usize>,
    /// Scale of the anomaly box around the training data.
    pub box_factor: f64,
    pub smote_k: usize,
    pub smote_multiplier: f64,
}

impl Default for RiskSettings {
    fn default() -> Self {
        Self {
            mc_count: None,
            box_factor: 2.0,
            smote_k: 5,
            smote_multiplier: 1.0,
        }
    }
}

impl RiskSettings {
    pub fn mc_count_for(&self, l: usize) -> usize {
        self.mc_count.unwrap_or_else(|| default_mc_count(l))
    }

    pub fn validate(&self) -> Result<()> {
        if self.mc_count == Some(0) {
            return Err(Error::param("mc_count", "must be >= 1"));
        }
        if !(self.box_factor >= 1.0 && self.box_factor.is_finite()) {
            return Err(Error::param("box_factor", "must be >= 1"));
        }
        if self.smote_k == 0 {
            return Err(Error::param("smote_k", "must be >= 1"));
        }
        if !(self.smote_multiplier > 0.0 && self.smote_multiplier.is_finite()) {
            return Err(Error::param("smote_multiplier", "must be positive"));
        }
        Ok(())
    }
}

/// Seeds used at one grid point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PointSeeds {
    pub fit: u64,
    pub anomaly: u64,
}

pub fn point_seeds(seed: u64, index: usize) -> PointSeeds {
    PointSeeds {
        fit: derive_seed(seed, &[index as u64, stream::FIT]),
        anomaly: derive_seed(seed, &[index as u64, stream::ANOMALY]),
    }
}

/// SMOTE seed of a sweep; the synthetic set is shared by all grid points.
pub fn smote_seed(seed: u64) -> u64 {
    derive_seed(seed, &[stream::SMOTE])
}

/// Seed of the polarization anomalies; shared by all grid points.
pub fn polarization_seed(seed: u64) -> u64 {
    derive_seed(seed, &[stream::POLAR])
}

fn sentinel(v: Result<f64>) -> f64 {
    match v {
        Ok(v) if !v.is_nan() => v,
        _ => f64::INFINITY,
    }
}

/// Evaluate `kind` at every grid point.
///
/// Kernel and polarization risks are computed from the Gram matrix alone;
/// the other kinds fit one model per grid point. Grid points run in
/// parallel on the current rayon pool; the output does not depend on it.
pub fn sweep_risk_curve(
    train: &Dataset,
    grid: &GammaGrid,
    config: &SvddConfig,
    kind: RiskKind,
    settings: &RiskSettings,
    seed: u64,
) -> Result<RiskCurve> {
    config.validate()?;
    settings.validate()?;
    let bbox = bounding_box(train, settings.box_factor)?;
    let mc_count = settings.mc_count_for(train.len());
    let synthetic = match kind {
        RiskKind::Smote => Some(smote_oversample(
            train,
            &SmoteConfig {
                k_neighbors: settings.smote_k,
                multiplier: settings.smote_multiplier,
                seed: smote_seed(seed),
            },
        )?),
        _ => None,
    };
    let polar_sampler = AnomalySampler::new(bbox.clone(), train.len(), polarization_seed(seed))?;

    let evaluated: Vec<(f64, bool)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let gamma = grid.bandwidth(i);
            let seeds = point_seeds(seed, i);
            if !kind.needs_fit() {
                let value = match kind {
                    RiskKind::Kernel => risk_kernel(&gram_matrix(train, gamma)),
                    _ => risk_polarization(train, &polar_sampler, gamma),
                };
                return (sentinel(value), false);
            }
            let value = fit(train, gamma, config, seeds.fit).and_then(|model| {
                let sampler = AnomalySampler::new(bbox.clone(), mc_count, seeds.anomaly)?;
                match kind {
                    RiskKind::Sv => Ok(risk_sv(model_stats(&model, train)?.sv_fraction, config.nu)),
                    RiskKind::Empirical => risk_empirical(&model, train, config.nu, &sampler),
                    _ => risk_smote(
                        &model,
                        synthetic.as_ref().expect("synthetic set built for smote"),
                        config.nu,
                        &sampler,
                    ),
                }
            });
            (sentinel(value), true)
        })
        .collect();

    Ok(RiskCurve {
        kind: CurveKind::Risk(kind),
        nu: config.nu,
        seed,
        solver_fits: evaluated.iter().filter(|(_, fitted)| *fitted).count(),
        points: grid
            .values()
            .iter()
            .zip(&evaluated)
            .map(|(&gamma, &(value, _))| CurvePoint { gamma, value })
            .collect(),
    })
}

/// Held-out validation error of the model fitted at each grid point.
pub fn validation_curve(
    train: &Dataset,
    validation: &LabeledDataset,
    grid: &GammaGrid,
    config: &SvddConfig,
    seed: u64,
) -> Result<RiskCurve> {
    config.validate()?;
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let model = fit(train, grid.bandwidth(i), config, point_seeds(seed, i).fit);
            sentinel(model.and_then(|m| validation_error(&m, validation)))
        })
        .collect();
    Ok(RiskCurve {
        kind: CurveKind::Validation,
        nu: config.nu,
        seed,
        solver_fits: grid.len(),
        points: grid
            .values()
            .iter()
            .zip(values)
            .map(|(&gamma, value)| CurvePoint { gamma, value })
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Smallest bandwidth attaining the minimum.
    Argmin,
    /// Largest bandwidth of the plateau.
    PlateauMax,
}

impl SelectionRule {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionRule::Argmin => "argmin",
            SelectionRule::PlateauMax => "plateau-max",
        }
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "argmin" => Ok(SelectionRule::Argmin),
            "plateau-max" | "plateau_max" => Ok(SelectionRule::PlateauMax),
            _ => Err(Error::param("rule", format!("unknown selection rule '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauSpec {
    /// Plateau threshold as a fraction of the finite value range.
    pub rel_tol: f64,
    pub rule: SelectionRule,
}

pub const DEFAULT_REL_TOL: f64 = 0.05;

impl PlateauSpec {
    pub fn new(rel_tol: f64, rule: SelectionRule) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(Error::param("rel_tol", format!("{rel_tol} not in (0, 1)")));
        }
        Ok(Self { rel_tol, rule })
    }

    /// Default rule per risk: the fraction- and Gram-based risks have a
    /// proper minimum, the Monte-Carlo risks have a low plateau whose upper
    /// end is the operating point.
    pub fn default_for(kind: RiskKind) -> Self {
        let rule = match kind {
            RiskKind::Empirical | RiskKind::Smote => SelectionRule::PlateauMax,
            RiskKind::Sv | RiskKind::Kernel | RiskKind::Polarization => SelectionRule::Argmin,
        };
        Self {
            rel_tol: DEFAULT_REL_TOL,
            rule,
        }
    }
}

fn finite_range(values: &[f64]) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values.iter().filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo.is_finite() {
        Ok((lo, hi))
    } else {
        Err(Error::NoFiniteValues)
    }
}

/// Inclusive index range of the plateau of `values`.
///
/// Points qualify when finite and `<= v_min + rel_tol * (v_max - v_min)`.
/// The plateau is the longest maximal run of qualifying points that
/// contains a minimiser; equal lengths resolve toward larger indices.
pub fn find_plateau_values(values: &[f64], rel_tol: f64) -> Result<(usize, usize)> {
    let (vmin, vmax) = finite_range(values)?;
    let threshold = vmin + rel_tol * (vmax - vmin);
    let qualifies = |v: f64| v.is_finite() && v <= threshold;

    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < values.len() {
        if !qualifies(values[i]) {
            i += 1;
            continue;
        }
        let start = i;
        let mut has_min = false;
        while i < values.len() && qualifies(values[i]) {
            has_min |= values[i] == vmin;
            i += 1;
        }
        let end = i - 1;
        if has_min && best.is_none_or(|(s, e)| end - start >= e - s) {
            best = Some((start, end));
        }
    }
    Ok(best.expect("the minimiser always qualifies"))
}

pub fn find_plateau(curve: &RiskCurve, spec: &PlateauSpec) -> Result<(usize, usize)> {
    find_plateau_values(&curve.values(), spec.rel_tol)
}

/// Outcome of a selection on one curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub gamma: f64,
    pub index: usize,
    pub plateau_start: usize,
    pub plateau_end: usize,
}

pub fn select_gamma(curve: &RiskCurve, spec: &PlateauSpec) -> Result<Selection> {
    let values = curve.values();
    let (plateau_start, plateau_end) = find_plateau_values(&values, spec.rel_tol)?;
    let index = match spec.rule {
        SelectionRule::PlateauMax => plateau_end,
        SelectionRule::Argmin => {
            let (vmin, _) = finite_range(&values)?;
            values.iter().position(|&v| v == vmin).expect("minimum exists")
        }
    };
    Ok(Selection {
        gamma: curve.points[index].gamma,
        index,
        plateau_start,
        plateau_end,
    })
}

/// Number of discrete local minima: maximal runs of equal finite values
/// whose existing neighbours are both strictly larger.
pub fn count_local_minima(values: &[f64]) -> usize {
    let mut count = 0;
    let mut i = 0;
    while i < values.len() {
        let mut j = i;
        while j + 1 < values.len() && values[j + 1] == values[i] {
            j += 1;
        }
        let left_ok = i == 0 || values[i - 1] > values[i];
        let right_ok = j + 1 == values.len() || values[j + 1] > values[i];
        if values[i].is_finite() && left_ok && right_ok {
            count += 1;
        }
        i = j + 1;
    }
    count
}

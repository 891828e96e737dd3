//! Point sets, CSV ingestion and synthetic data.
//!
//! CSV dialect: comma separated, one header row, `.` as decimal point and
//! unquoted numerics. Floats are written with the shortest representation
//! that parses back to the same bits, so write/read round-trips exactly.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};

/// Half-width given to a bounding-box dimension whose extent is zero.
pub const DEGENERATE_EPS: f64 = 1e-6;

/// A non-empty `l x n` matrix of finite reals, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    name: String,
    dim: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} columns, expected {dim}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(name, dim, values)
    }

    pub fn from_flat(name: impl Into<String>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.is_empty() {
            return Err(Error::InvalidDataset("dataset must have l >= 1 and n >= 1".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidDataset(format!(
                "{} values do not form rows of width {dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite entry at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self {
            name: name.into(),
            dim,
            values,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Number of points `l`.
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Feature dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self::from_flat(name, self.dim, values)
    }

    /// Stack two datasets of the same dimension.
    pub fn concat(&self, other: &Dataset, name: impl Into<String>) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Self::from_flat(name, self.dim, values)
    }
}

/// Class membership of a point in a one-class problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Normal,
    Anomaly,
}

impl Label {
    pub fn sign(self) -> i8 {
        match self {
            Label::Normal => 1,
            Label::Anomaly => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            1 => Some(Label::Normal),
            -1 => Some(Label::Anomaly),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Normal => f.write_str("1"),
            Label::Anomaly => f.write_str("-1"),
        }
    }
}

/// A dataset with one ±1 label per point.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    data: Dataset,
    labels: Vec<Label>,
}

impl LabeledDataset {
    pub fn new(data: Dataset, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != data.len() {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {} points",
                labels.len(),
                data.len()
            )));
        }
        Ok(Self { data, labels })
    }

    /// Every point labelled normal.
    pub fn all_normal(data: Dataset) -> Self {
        let labels = vec![Label::Normal; data.len()];
        Self { data, labels }
    }

    /// Normals followed by anomalies.
    pub fn from_parts(normals: &Dataset, anomalies: &Dataset, name: impl Into<String>) -> Result<Self> {
        let data = normals.concat(anomalies, name)?;
        let mut labels = vec![Label::Normal; normals.len()];
        labels.resize(data.len(), Label::Anomaly);
        Ok(Self { data, labels })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn into_data(self) -> Dataset {
        self.data
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(s, m)`: number of normals and anomalies.
    pub fn counts(&self) -> (usize, usize) {
        let normals = self.labels.iter().filter(|&&l| l == Label::Normal).count();
        (normals, self.labels.len() - normals)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], Label)> + '_ {
        self.data.rows().zip(self.labels.iter().copied())
    }
}

/// A dataset with integer class labels, the raw material for one-class tasks.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassLabeledDataset {
    data: Dataset,
    classes: Vec<i64>,
}

impl ClassLabeledDataset {
    pub fn new(data: Dataset, classes: Vec<i64>) -> Result<Self> {
        if classes.len() != data.len() {
            return Err(Error::InvalidDataset(format!(
                "{} class labels for {} points",
                classes.len(),
                data.len()
            )));
        }
        Ok(Self { data, classes })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn classes(&self) -> &[i64] {
        &self.classes
    }

    /// Distinct class values in ascending order.
    pub fn distinct_classes(&self) -> Vec<i64> {
        let mut c = self.classes.clone();
        c.sort_unstable();
        c.dedup();
        c
    }
}

struct RawTable {
    header: Vec<String>,
    features: Vec<f64>,
    dim: usize,
    labels: Vec<String>,
}

fn read_table(path: &Path, label_column: Option<&str>) -> Result<RawTable> {
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Csv {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    let label_idx = match label_column {
        Some(name) => Some(header.iter().position(|h| h == name).ok_or_else(|| {
            Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_owned(),
            }
        })?),
        None => None,
    };
    let dim = header.len() - usize::from(label_idx.is_some());
    if dim == 0 {
        return Err(Error::InvalidDataset(format!(
            "{}: no feature columns",
            path.display()
        )));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = r + 1;
        for (c, cell) in record.iter().enumerate() {
            if Some(c) == label_idx {
                labels.push(cell.to_owned());
                continue;
            }
            let value = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::ParseCell {
                    path: path.to_path_buf(),
                    row,
                    column: header[c].clone(),
                    value: cell.to_owned(),
                })?;
            features.push(value);
        }
    }
    if features.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    Ok(RawTable {
        header,
        features,
        dim,
        labels,
    })
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".to_owned())
}

/// Load a CSV of numeric features with an optional ±1 label column.
///
/// Without a label column every point is labelled normal.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let table = read_table(path, label_column)?;
    let data = Dataset::from_flat(file_stem(path), table.dim, table.features)?;
    if label_column.is_none() {
        return Ok(LabeledDataset::all_normal(data));
    }
    let labels = table
        .labels
        .iter()
        .enumerate()
        .map(|(r, s)| {
            s.parse::<f64>()
                .ok()
                .and_then(|v| match v {
                    1.0 => Some(Label::Normal),
                    -1.0 => Some(Label::Anomaly),
                    _ => None,
                })
                .ok_or_else(|| Error::InvalidLabel {
                    path: path.to_path_buf(),
                    row: r + 1,
                    value: s.clone(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(data, labels)
}

/// Load a CSV whose `label_column` holds integer class identifiers.
pub fn load_class_csv(path: impl AsRef<Path>, label_column: &str) -> Result<ClassLabeledDataset> {
    let path = path.as_ref();
    let table = read_table(path, Some(label_column))?;
    let data = Dataset::from_flat(file_stem(path), table.dim, table.features)?;
    let column = table.header.iter().find(|h| *h == label_column).cloned().unwrap_or_default();
    let classes = table
        .labels
        .iter()
        .enumerate()
        .map(|(r, s)| {
            s.parse::<i64>().map_err(|_| Error::ParseCell {
                path: path.to_path_buf(),
                row: r + 1,
                column: column.clone(),
                value: s.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ClassLabeledDataset::new(data, classes)
}

fn write_rows(
    path: &Path,
    data: &Dataset,
    labels: Option<&[Label]>,
) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = String::new();
    let mut header: Vec<String> = (1..=data.dim()).map(|d| format!("f{d}")).collect();
    if labels.is_some() {
        header.push("label".to_owned());
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, row) in data.rows().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(labels) = labels {
            cells.push(labels[i].to_string());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err)
}

/// Write features only; columns are named `f1..fn`.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    write_rows(path.as_ref(), data, None)
}

/// Write features plus a trailing `label` column of ±1.
pub fn write_labeled_csv(path: impl AsRef<Path>, data: &LabeledDataset) -> Result<()> {
    write_rows(path.as_ref(), data.data(), Some(data.labels()))
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(Error::param("box", "zero-dimensional box"));
        }
        for (d, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(Error::param("box", format!("dimension {d}: [{l}, {h}] is not a valid interval")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        self.dim() == other.dim()
            && self.lo.iter().zip(&other.lo).all(|(a, b)| a <= b)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| a >= b)
    }
}

/// Per-dimension min/max box of `data`, scaled by `factor` about its center.
///
/// Dimensions with zero extent become `[c - DEGENERATE_EPS, c + DEGENERATE_EPS]`.
pub fn bounding_box(data: &Dataset, factor: f64) -> Result<BoundingBox> {
    if !(factor.is_finite() && factor >= 1.0) {
        return Err(Error::param("factor", format!("{factor} must be >= 1")));
    }
    let n = data.dim();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for row in data.rows() {
        for d in 0..n {
            lo[d] = lo[d].min(row[d]);
            hi[d] = hi[d].max(row[d]);
        }
    }
    for d in 0..n {
        let extent = hi[d] - lo[d];
        if extent == 0.0 {
            let c = lo[d];
            lo[d] = c - DEGENERATE_EPS;
            hi[d] = c + DEGENERATE_EPS;
        } else if factor != 1.0 {
            let center = 0.5 * (lo[d] + hi[d]);
            let half = 0.5 * extent * factor;
            lo[d] = center - half;
            hi[d] = center + half;
        }
    }
    BoundingBox::new(lo, hi)
}

fn check_count(count: usize) -> Result<()> {
    if count == 0 {
        return Err(Error::param("count", "must be >= 1"));
    }
    Ok(())
}

/// Draw `count` points: pick one of `means` uniformly, add unit isotropic noise.
pub fn gen_gaussian_mixture(seed: u64, count: usize, means: &[Vec<f64>]) -> Result<Dataset> {
    gen_gaussian_mixture_scaled(seed, count, means, 1.0)
}

/// Isotropic Gaussian with standard deviation `std` around `mean`.
pub fn gen_gaussian(seed: u64, count: usize, mean: &[f64], std: f64) -> Result<Dataset> {
    if !(std.is_finite() && std > 0.0) {
        return Err(Error::param("std", format!("{std} must be positive")));
    }
    gen_gaussian_mixture_scaled(seed, count, &[mean.to_vec()], std)
}

fn gen_gaussian_mixture_scaled(seed: u64, count: usize, means: &[Vec<f64>], std: f64) -> Result<Dataset> {
    check_count(count)?;
    let n = means
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::param("means", "at least one component is required"))?;
    if let Some(bad) = means.iter().find(|m| m.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(count * n);
    for _ in 0..count {
        let mean = &means[rng.random_range(0..means.len())];
        for &m in mean {
            let z: f64 = rng.sample(StandardNormal);
            values.push(m + std * z);
        }
    }
    Dataset::from_flat(format!("gauss-mixture-k{}-s{seed}", means.len()), n, values)
}

/// `count` i.i.d. uniform points on `bbox`.
pub fn gen_uniform(seed: u64, count: usize, bbox: &BoundingBox) -> Result<Dataset> {
    check_count(count)?;
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(count * bbox.dim());
    for _ in 0..count {
        fill_uniform(&mut rng, bbox, &mut values);
    }
    Dataset::from_flat(format!("uniform-s{seed}"), bbox.dim(), values)
}

pub(crate) fn fill_uniform(rng: &mut crate::rng::Rng, bbox: &BoundingBox, out: &mut Vec<f64>) {
    for (l, h) in bbox.lo.iter().zip(&bbox.hi) {
        let u: f64 = rng.random();
        out.push(l + u * (h - l));
    }
}

/// The synthetic study: a two-component 5-d Gaussian mixture with means at
/// `±(1, ..., 1)` as the normal class and uniform anomalies on `[-5, 5]^5`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureScenario {
    /// One-class training sample (normals only).
    pub train: Dataset,
    /// Uniform anomalies drawn alongside the training sample.
    pub anomalies: Dataset,
    /// Large held-out set, normals first.
    pub validation: LabeledDataset,
}

/// How the anomalies of a [`MixtureScenario`] are distributed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "law")]
pub enum AnomalyLaw {
    /// Uniform on `[-5, 5]^5`.
    Uniform,
    /// Isotropic Gaussian centred at the origin.
    Gaussian { std: f64 },
}

pub const SCENARIO_DIM: usize = 5;

impl MixtureScenario {
    /// Train normals use `seed` directly; the other parts use derived seeds.
    pub fn generate(seed: u64, n_train: usize, n_anomalies: usize, n_validation: usize, law: AnomalyLaw) -> Result<Self> {
        let means = vec![vec![1.0; SCENARIO_DIM], vec![-1.0; SCENARIO_DIM]];
        let cube = BoundingBox::cube(-5.0, 5.0, SCENARIO_DIM)?;
        let draw_anomalies = |s: u64, count: usize| match law {
            AnomalyLaw::Uniform => gen_uniform(s, count, &cube),
            AnomalyLaw::Gaussian { std } => gen_gaussian(s, count, &[0.0; SCENARIO_DIM], std),
        };
        let train = gen_gaussian_mixture(seed, n_train, &means)?.with_name("mixture-train");
        let anomalies = draw_anomalies(derive_seed(seed, &[1]), n_anomalies)?.with_name("mixture-anomalies");
        let val_normals = gen_gaussian_mixture(derive_seed(seed, &[2]), n_validation, &means)?;
        let val_anomalies = draw_anomalies(derive_seed(seed, &[3]), n_validation)?;
        let validation = LabeledDataset::from_parts(&val_normals, &val_anomalies, "mixture-validation")?;
        Ok(Self {
            train,
            anomalies,
            validation,
        })
    }
}

/// Training set and labelled validation set of one one-class task.
#[derive(Clone, Debug, PartialEq)]
pub struct OneClassTask {
    pub name: String,
    pub train: Dataset,
    pub validation: LabeledDataset,
}

/// Number of synthetic anomalies for a class of `normals` points.
pub fn anomaly_count(anomaly_fraction: f64, normals: usize) -> usize {
    // 0.15 * 100 is 15.000000000000002 in binary floating point
    ((anomaly_fraction * normals as f64) - 1e-9).ceil().max(1.0) as usize
}

/// Turn one class of a multiclass dataset into a one-class task.
///
/// All rows of `target_class` are normal. They are shuffled by seed and
/// split into train and validation; `⌈anomaly_fraction · #normals⌉`
/// uniform anomalies drawn from `bounding_box(normals, box_factor)` are
/// appended to the validation set only.
pub fn make_one_class_task(
    source: &ClassLabeledDataset,
    target_class: i64,
    anomaly_fraction: f64,
    box_factor: f64,
    val_fraction: f64,
    seed: u64,
) -> Result<OneClassTask> {
    if !(anomaly_fraction > 0.0 && anomaly_fraction < 1.0) {
        return Err(Error::param("anomaly_fraction", format!("{anomaly_fraction} not in (0, 1)")));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::param("val_fraction", format!("{val_fraction} not in (0, 1)")));
    }
    let members: Vec<usize> = source
        .classes
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| (c == target_class).then_some(i))
        .collect();
    if members.is_empty() {
        return Err(Error::param("target_class", format!("class {target_class} is absent")));
    }
    if members.len() < 2 {
        return Err(Error::param(
            "target_class",
            format!("class {target_class} has fewer than 2 rows"),
        ));
    }
    let pct = (anomaly_fraction * 100.0).round() as u32;
    let name = format!("{}-c{target_class}-a{pct}", source.data.name());
    let normals = source.data.subset(name.clone(), &members)?;
    let bbox = bounding_box(&normals, box_factor)?;
    let n_anom = anomaly_count(anomaly_fraction, normals.len());
    let anomalies = gen_uniform(derive_seed(seed, &[stream::ANOMALY]), n_anom, &bbox)?;

    let total = normals.len();
    let n_val = ((val_fraction * total as f64).round() as usize).clamp(1, total - 1);
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng_from_seed(derive_seed(seed, &[stream::SPLIT])));
    let mut val_idx = order[..n_val].to_vec();
    let mut train_idx = order[n_val..].to_vec();
    val_idx.sort_unstable();
    train_idx.sort_unstable();

    let train = normals.subset(format!("{name}-train"), &train_idx)?;
    let val_normals = normals.subset(format!("{name}-validation"), &val_idx)?;
    let validation = LabeledDataset::from_parts(&val_normals, &anomalies, format!("{name}-validation"))?;
    Ok(OneClassTask {
        name,
        train,
        validation,
    })
}

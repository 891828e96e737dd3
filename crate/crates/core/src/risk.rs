//! Bandwidth-selection risks and the held-out validation error.
//!
//! Lower is better for every function here.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::kernel::{gauss_unchecked, Bandwidth, GramMatrix};
use crate::sampling::{mc_anomaly_acceptance, AnomalySampler};
use crate::svdd::SvddModel;

/// Below this the kernel-statistic variance is treated as zero.
pub const KERNEL_VARIANCE_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskKind {
    /// Squared gap between `nu` and the support-vector fraction.
    Sv,
    /// Training rejections plus Monte-Carlo anomaly acceptance.
    Empirical,
    /// As `Empirical`, with SMOTE points in place of the training set.
    Smote,
    /// Mean over variance of the off-diagonal Gram entries.
    Kernel,
    /// Negative kernel polarization against uniform pseudo-anomalies.
    Polarization,
}

impl RiskKind {
    pub const ALL: [RiskKind; 5] = [
        RiskKind::Sv,
        RiskKind::Empirical,
        RiskKind::Smote,
        RiskKind::Kernel,
        RiskKind::Polarization,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RiskKind::Sv => "sv",
            RiskKind::Empirical => "empirical",
            RiskKind::Smote => "smote",
            RiskKind::Kernel => "kernel",
            RiskKind::Polarization => "polarization",
        }
    }

    /// Whether evaluating the risk requires solving the SVDD problem.
    pub fn needs_fit(self) -> bool {
        matches!(self, RiskKind::Sv | RiskKind::Empirical | RiskKind::Smote)
    }
}

impl fmt::Display for RiskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RiskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RiskKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::param("risk", format!("unknown risk kind '{s}'")))
    }
}

fn check_open_nu(nu: f64) -> Result<()> {
    if nu > 0.0 && nu < 1.0 {
        Ok(())
    } else {
        Err(Error::param("nu", format!("{nu} not in (0, 1)")))
    }
}

/// `(nu - sv_fraction)^2`.
pub fn risk_sv(sv_fraction: f64, nu: f64) -> f64 {
    (nu - sv_fraction) * (nu - sv_fraction)
}

/// `#{x in points : f(x) = -1} / ((1 - nu) * |points|)`.
pub fn rejection_term(model: &SvddModel, points: &Dataset, nu: f64) -> Result<f64> {
    check_open_nu(nu)?;
    let rejected = model
        .predict_all(points)?
        .into_iter()
        .filter(|&l| l == Label::Anomaly)
        .count();
    Ok(rejected as f64 / ((1.0 - nu) * points.len() as f64))
}

/// `E_mu[f(X) = 1] / nu`, estimated by Monte Carlo.
pub fn acceptance_term(model: &SvddModel, nu: f64, sampler: &AnomalySampler) -> Result<f64> {
    check_open_nu(nu)?;
    Ok(mc_anomaly_acceptance(model, sampler)? / nu)
}

/// Training rejection rate scaled by `1 / (1 - nu)` plus anomaly acceptance
/// scaled by `1 / nu`.
pub fn risk_empirical(model: &SvddModel, train: &Dataset, nu: f64, sampler: &AnomalySampler) -> Result<f64> {
    Ok(rejection_term(model, train, nu)? + acceptance_term(model, nu, sampler)?)
}

/// Like [`risk_empirical`] but the first term counts rejected SMOTE points.
pub fn risk_smote(model: &SvddModel, synthetic: &Dataset, nu: f64, sampler: &AnomalySampler) -> Result<f64> {
    Ok(rejection_term(model, synthetic, nu)? + acceptance_term(model, nu, sampler)?)
}

/// `mean / variance` of the strictly upper-triangular Gram entries.
///
/// The variance is the population variance. A variance below
/// [`KERNEL_VARIANCE_FLOOR`] yields `f64::INFINITY`.
pub fn risk_kernel(gram: &GramMatrix) -> Result<f64> {
    let l = gram.size();
    if l < 3 {
        return Err(Error::param("gram", format!("kernel risk needs l >= 3, got {l}")));
    }
    let pairs = (l * (l - 1) / 2) as f64;
    let mean = gram.upper_triangle().sum::<f64>() / pairs;
    let var = gram.upper_triangle().map(|k| (k - mean) * (k - mean)).sum::<f64>() / pairs;
    if var < KERNEL_VARIANCE_FLOOR {
        return Ok(f64::INFINITY);
    }
    Ok(mean / var)
}

/// `-sum_ij y_i y_j K(x_i, x_j)` over normals (`y = 1`) and anomalies (`y = -1`),
/// diagonal included.
pub fn polarization(normals: &Dataset, anomalies: &Dataset, gamma: Bandwidth) -> Result<f64> {
    if normals.dim() != anomalies.dim() {
        return Err(Error::DimensionMismatch {
            expected: normals.dim(),
            got: anomalies.dim(),
        });
    }
    let points: Vec<(&[f64], f64)> = normals
        .rows()
        .map(|x| (x, 1.0))
        .chain(anomalies.rows().map(|x| (x, -1.0)))
        .collect();
    // diagonal: y_i^2 K_ii = 1
    let mut off_diagonal = 0.0;
    for (i, &(xi, yi)) in points.iter().enumerate() {
        for &(xj, yj) in &points[i + 1..] {
            off_diagonal += yi * yj * gauss_unchecked(xi, xj, gamma);
        }
    }
    Ok(-(points.len() as f64 + 2.0 * off_diagonal))
}

/// Polarization of `train` against `l = |train|` uniform anomalies from `sampler`.
pub fn risk_polarization(train: &Dataset, sampler: &AnomalySampler, gamma: Bandwidth) -> Result<f64> {
    if sampler.count != train.len() {
        return Err(Error::param(
            "sampler",
            format!("needs exactly l = {} anomalies, got {}", train.len(), sampler.count),
        ));
    }
    if sampler.dim() != train.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            got: sampler.dim(),
        });
    }
    polarization(train, &sampler.sample()?, gamma)
}

/// Normal rejection rate plus anomaly acceptance rate, in `[0, 2]`.
pub fn validation_error(model: &SvddModel, validation: &LabeledDataset) -> Result<f64> {
    let (s, m) = validation.counts();
    if s == 0 || m == 0 {
        return Err(Error::InvalidDataset(format!(
            "validation set needs both classes, has {s} normals and {m} anomalies"
        )));
    }
    let predictions = model.predict_all(validation.data())?;
    let mut rejected_normals = 0usize;
    let mut accepted_anomalies = 0usize;
    for (&truth, &pred) in validation.labels().iter().zip(&predictions) {
        match (truth, pred) {
            (Label::Normal, Label::Anomaly) => rejected_normals += 1,
            (Label::Anomaly, Label::Normal) => accepted_anomalies += 1,
            _ => {}
        }
    }
    Ok(rejected_normals as f64 / s as f64 + accepted_anomalies as f64 / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_gaussian_mixture, BoundingBox};
    use crate::svdd::{fit, SvddConfig};

    fn bw(g: f64) -> Bandwidth {
        Bandwidth::new(g).unwrap()
    }

    fn setup() -> (Dataset, SvddModel, AnomalySampler) {
        let train = gen_gaussian_mixture(1, 40, &[vec![1.0, 1.0], vec![-1.0, -1.0]]).unwrap();
        let model = fit(&train, bw(1.0), &SvddConfig::with_nu(0.1), 0).unwrap();
        let sampler = AnomalySampler::for_train(&train, 5).unwrap().with_count(2000).unwrap();
        (train, model, sampler)
    }

    #[test]
    fn sv_risk_arithmetic() {
        assert_eq!(risk_sv(0.1, 0.1), 0.0);
        assert!((risk_sv(0.3, 0.1) - 0.04).abs() < 1e-15);
        assert!((risk_sv(1.0, 0.1) - 0.81).abs() < 1e-15);
    }

    #[test]
    fn closed_forms_for_constant_models() {
        let (train, model, sampler) = setup();
        let accept_all = model.clone().with_threshold(0.0);
        assert_eq!(risk_empirical(&accept_all, &train, 0.1, &sampler).unwrap(), 10.0);
        assert_eq!(risk_smote(&accept_all, &train, 0.1, &sampler).unwrap(), 10.0);
        let reject_all = model.with_threshold(2.0);
        assert_eq!(risk_empirical(&reject_all, &train, 0.1, &sampler).unwrap(), 1.0 / 0.9);
    }

    #[test]
    fn nu_must_be_open() {
        let (train, model, sampler) = setup();
        assert!(risk_empirical(&model, &train, 0.0, &sampler).is_err());
        assert!(risk_smote(&model, &train, 1.0, &sampler).is_err());
    }

    #[test]
    fn kernel_risk_three_pairs() {
        #[rustfmt::skip]
        let values = vec![
            1.0, 0.2, 0.4,
            0.2, 1.0, 0.6,
            0.4, 0.6, 1.0,
        ];
        let gram = GramMatrix::from_values(3, values, bw(1.0)).unwrap();
        let r = risk_kernel(&gram).unwrap();
        assert!((r - 15.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn kernel_risk_degenerate_and_small() {
        let gram = GramMatrix::from_values(3, vec![1.0; 9], bw(1.0)).unwrap();
        assert_eq!(risk_kernel(&gram).unwrap(), f64::INFINITY);
        let gram = GramMatrix::from_values(2, vec![1.0, 0.5, 0.5, 1.0], bw(1.0)).unwrap();
        assert!(risk_kernel(&gram).is_err());
    }

    #[test]
    fn polarization_limits() {
        let far: Vec<Vec<f64>> = (0..4).map(|i| vec![100.0 * i as f64]).collect();
        let normals = Dataset::new("n", far[..2].to_vec()).unwrap();
        let anomalies = Dataset::new("a", far[2..].to_vec()).unwrap();
        assert_eq!(polarization(&normals, &anomalies, bw(1e-3)).unwrap(), -4.0);
        let r = polarization(&normals, &anomalies, bw(1e15)).unwrap();
        assert!(r.abs() < 1e-9, "{r}");
    }

    #[test]
    fn polarization_sampler_size_must_match() {
        let (train, _, sampler) = setup();
        assert!(risk_polarization(&train, &sampler, bw(1.0)).is_err());
        let exact = sampler.with_count(train.len()).unwrap();
        assert!(risk_polarization(&train, &exact, bw(1.0)).unwrap().is_finite());
    }

    #[test]
    fn validation_error_constant_predictors() {
        let (train, model, _) = setup();
        let anomalies = crate::dataset::gen_uniform(3, 30, &BoundingBox::cube(20.0, 30.0, 2).unwrap()).unwrap();
        let val = LabeledDataset::from_parts(&train, &anomalies, "val").unwrap();
        assert_eq!(validation_error(&model.clone().with_threshold(0.0), &val).unwrap(), 1.0);
        assert_eq!(validation_error(&model.clone().with_threshold(2.0), &val).unwrap(), 1.0);
        // a far-away anomaly cloud is perfectly separable
        let far_normal = model.clone().with_threshold(1e-6);
        let only_normals = LabeledDataset::from_parts(&train, &anomalies, "v").unwrap();
        assert_eq!(validation_error(&far_normal, &only_normals).unwrap(), 0.0);
        assert!(validation_error(&model, &LabeledDataset::all_normal(train)).is_err());
    }

    #[test]
    fn risk_kind_parsing() {
        for k in RiskKind::ALL {
            assert_eq!(k.as_str().parse::<RiskKind>().unwrap(), k);
        }
        assert!("nope".parse::<RiskKind>().is_err());
    }
}

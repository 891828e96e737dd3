//! One-class anomaly detection with Support Vector Data Description (SVDD)
//! and automatic selection of the Gaussian kernel bandwidth.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: point sets, CSV ingestion, synthetic generators and the
//!   multiclass to one-class task conversion.
//! - [`kernel`]: the Gaussian kernel `exp(-|x - x'|^2 / gamma)` and Gram matrices.
//! - [`svdd`]: the dual SVDD solver and the fitted decision function.
//! - [`sampling`]: SMOTE oversampling and Monte-Carlo anomaly acceptance.
//! - [`risk`]: the five bandwidth-selection risks and the validation error.
//! - [`select`]: bandwidth sweeps, plateau detection and selection rules.
//! - [`bench`]: multi-task comparison with Dolan-More performance profiles.
//!
//! Every stochastic routine takes an explicit 64-bit seed; see [`rng`].

pub mod bench;
pub mod dataset;
pub mod error;
pub mod kernel;
pub mod risk;
pub mod rng;
pub mod sampling;
pub mod select;
pub mod svdd;

pub use dataset::{BoundingBox, ClassLabeledDataset, Dataset, Label, LabeledDataset};
pub use error::{Error, Result};
pub use kernel::{Bandwidth, GramMatrix};
pub use risk::RiskKind;
pub use select::{GammaGrid, PlateauSpec, RiskCurve, SelectionRule};
pub use svdd::{SvddConfig, SvddModel};

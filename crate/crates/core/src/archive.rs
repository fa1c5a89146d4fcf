//! Versioned JSON persistence of fitted joint models.
//!
//! The force predictor's fields sit at the top level of the document; the
//! return-angle predictor, when present, is nested under `return_model`.
//! Loading refactorizes the stored training set with the stored β, which
//! reproduces every prediction bit for bit.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::FamilyKind;
use crate::gpr::{fit, BetaMode, FittedGp, GprError, KernelHyperParams};
use crate::joints::{JointFamilyModel, JointModelError, LooSummary, ModelSource};

pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("archive version {found} is not supported (expected {expected})")]
    VersionMismatch { found: String, expected: u32 },
    #[error("corrupt archive: {0}")]
    CorruptArchive(String),
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRecord {
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpRecord {
    pub beta: Vec<f64>,
    pub noise_variance: f64,
    pub kernel: KernelRecord,
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive {
    pub version: u32,
    pub model_id: String,
    pub family: FamilyKind,
    pub source: ModelSource,
    #[serde(flatten)]
    pub force: GpRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub return_model: Option<GpRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loo: Option<LooSummary>,
}

impl GpRecord {
    pub fn from_gp(m: &FittedGp) -> Self {
        let x = m.train_x();
        Self {
            beta: m.beta().to_vec(),
            noise_variance: m.noise_variance(),
            kernel: KernelRecord {
                signal_variance: m.hyper().signal_variance(),
                length_scales: m.hyper().length_scales().to_vec(),
            },
            train_x: (0..x.nrows())
                .map(|i| x.row(i).iter().copied().collect())
                .collect(),
            train_y: m.train_y().iter().copied().collect(),
        }
    }

    pub fn to_gp(&self) -> Result<FittedGp, ArchiveError> {
        let corrupt = |e: GprError| ArchiveError::CorruptArchive(e.to_string());
        let hyper = KernelHyperParams::new(
            self.kernel.signal_variance,
            self.kernel.length_scales.clone(),
        )
        .map_err(corrupt)?;
        if self.train_x.is_empty() {
            if !self.train_y.is_empty() {
                return Err(ArchiveError::CorruptArchive(
                    "train_y without train_x".into(),
                ));
            }
            return FittedGp::prior_only(self.beta.clone(), hyper, self.noise_variance)
                .map_err(corrupt);
        }
        let d = hyper.dim();
        if self.train_x.iter().any(|r| r.len() != d) || self.train_x.len() != self.train_y.len() {
            return Err(ArchiveError::CorruptArchive(
                "training set shape does not match the kernel".into(),
            ));
        }
        let flat: Vec<f64> = self.train_x.iter().flatten().copied().collect();
        let x = DMatrix::from_row_slice(self.train_x.len(), d, &flat);
        let y = DVector::from_column_slice(&self.train_y);
        fit(
            &x,
            &y,
            &hyper,
            self.noise_variance,
            BetaMode::Fixed(self.beta.clone()),
        )
        .map_err(corrupt)
    }
}

impl ModelArchive {
    pub fn from_model(model: &JointFamilyModel, model_id: impl Into<String>) -> Self {
        Self {
            version: ARCHIVE_VERSION,
            model_id: model_id.into(),
            family: model.kind(),
            source: model.source(),
            force: GpRecord::from_gp(model.force_model()),
            return_model: model.return_model().map(GpRecord::from_gp),
            loo: model.loo(),
        }
    }

    pub fn to_model(&self) -> Result<JointFamilyModel, ArchiveError> {
        let force = self.force.to_gp()?;
        let ret = self
            .return_model
            .as_ref()
            .map(GpRecord::to_gp)
            .transpose()?;
        JointFamilyModel::from_parts(self.family, self.source, force, ret, self.loo)
            .map_err(|e: JointModelError| ArchiveError::CorruptArchive(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("archive is always serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ArchiveError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ArchiveError::CorruptArchive(e.to_string()))?;
        let version = value
            .get("version")
            .ok_or_else(|| ArchiveError::CorruptArchive("missing version".into()))?;
        let found = match version {
            serde_json::Value::Number(n) => n.as_u64(),
            serde_json::Value::String(s) => s.parse().ok(),
            _ => None,
        };
        if found != Some(u64::from(ARCHIVE_VERSION)) {
            return Err(ArchiveError::VersionMismatch {
                found: version.to_string().trim_matches('"').to_string(),
                expected: ARCHIVE_VERSION,
            });
        }
        let mut value = value;
        value["version"] = serde_json::Value::from(ARCHIVE_VERSION);
        serde_json::from_value(value).map_err(|e| ArchiveError::CorruptArchive(e.to_string()))
    }
}

pub fn save_model(
    path: &Path,
    model: &JointFamilyModel,
    model_id: &str,
) -> Result<(), ArchiveError> {
    let json = ModelArchive::from_model(model, model_id).to_json();
    fs::write(path, json).map_err(|source| ArchiveError::IoFailure {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<JointFamilyModel, ArchiveError> {
    load_archive(path)?.to_model()
}

pub fn load_archive(path: &Path) -> Result<ModelArchive, ArchiveError> {
    let text = fs::read_to_string(path).map_err(|source| ArchiveError::IoFailure {
        path: path.display().to_string(),
        source,
    })?;
    ModelArchive::from_json(&text)
}

//! Joint test-bench measurements: domain types, CSV ingestion and run
//! averaging.
//!
//! The CSV layout is fixed:
//!
//! ```text
//! family,thickness_mm,deformation_angle_deg,direction,force_n,return_angle_deg,run_id
//! ```
//!
//! `thickness_mm` is filled for the `curve` family only. Row numbers in
//! errors are file line numbers (the header is line 1).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CSV_HEADER: [&str; 7] = [
    "family",
    "thickness_mm",
    "deformation_angle_deg",
    "direction",
    "force_n",
    "return_angle_deg",
    "run_id",
];

/// Default angle bin used when averaging repeat runs, degrees.
pub const DEFAULT_ANGLE_BIN_DEG: f64 = 5.0;

/// Curve-family thickness range exercised on the test bench, mm.
pub const CURVE_THICKNESS_RANGE_MM: (f64, f64) = (0.4, 1.6);

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("no data rows")]
    EmptyFile,
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: {field} = {value} is out of range")]
    OutOfRange {
        row: usize,
        field: &'static str,
        value: f64,
    },
    #[error("row {row}: {field} is not a number: {text:?}")]
    BadNumber {
        row: usize,
        field: &'static str,
        text: String,
    },
    #[error("row {row}: unknown {field} {text:?}")]
    BadCategory {
        row: usize,
        field: &'static str,
        text: String,
    },
    #[error("row {row}: curve joints need thickness_mm")]
    MissingThickness { row: usize },
    #[error("row {row}: thickness_mm is only valid for curve joints")]
    UnexpectedThickness { row: usize },
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("invalid joint family: {0}")]
    InvalidFamily(String),
    #[error("angle bin must be positive, got {0}")]
    InvalidBin(f64),
}

/// Joint geometry, without the thickness parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FamilyKind {
    #[serde(rename = "straight")]
    Straight,
    #[serde(rename = "curve")]
    Curve,
    #[serde(rename = "double_curve")]
    DoubleCurve,
    #[serde(rename = "square_sym")]
    SquareWaveSymmetric,
    #[serde(rename = "square_nonsym")]
    SquareWaveNonSymmetric,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 5] = [
        FamilyKind::Straight,
        FamilyKind::Curve,
        FamilyKind::DoubleCurve,
        FamilyKind::SquareWaveSymmetric,
        FamilyKind::SquareWaveNonSymmetric,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyKind::Straight => "straight",
            FamilyKind::Curve => "curve",
            FamilyKind::DoubleCurve => "double_curve",
            FamilyKind::SquareWaveSymmetric => "square_sym",
            FamilyKind::SquareWaveNonSymmetric => "square_nonsym",
        }
    }

    /// Model input dimension: `[θ, T]` for curves, `[θ]` otherwise.
    pub fn input_dim(self) -> usize {
        if self == FamilyKind::Curve {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyKind {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FamilyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| DataError::InvalidFamily(s.to_string()))
    }
}

/// A joint geometry together with its thickness (curve family only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointFamily {
    kind: FamilyKind,
    thickness_mm: Option<f64>,
}

impl JointFamily {
    pub fn new(kind: FamilyKind, thickness_mm: Option<f64>) -> Result<Self, DataError> {
        match (kind, thickness_mm) {
            (FamilyKind::Curve, Some(t)) if t > 0.0 && t.is_finite() => Ok(Self {
                kind,
                thickness_mm: Some(t),
            }),
            (FamilyKind::Curve, Some(t)) => Err(DataError::InvalidFamily(format!(
                "curve thickness must be positive, got {t}"
            ))),
            (FamilyKind::Curve, None) => Err(DataError::InvalidFamily(
                "curve joints need a thickness".into(),
            )),
            (_, Some(_)) => Err(DataError::InvalidFamily(format!(
                "{kind} joints have no thickness parameter"
            ))),
            (_, None) => Ok(Self {
                kind,
                thickness_mm: None,
            }),
        }
    }

    pub fn curve(thickness_mm: f64) -> Result<Self, DataError> {
        Self::new(FamilyKind::Curve, Some(thickness_mm))
    }

    /// Any non-curve family.
    pub fn plain(kind: FamilyKind) -> Result<Self, DataError> {
        Self::new(kind, None)
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn thickness_mm(&self) -> Option<f64> {
        self.thickness_mm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Reverse => "reverse",
        }
    }
}

/// One test-bench reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSample {
    pub family: JointFamily,
    pub deformation_angle_deg: f64,
    pub direction: Direction,
    pub force_n: f64,
    /// 180° means the joint recovered to flat.
    pub return_angle_deg: f64,
    pub run_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<String>,
    /// Number of raw readings merged into each sample, aligned with
    /// `JointDataset::samples`. Empty until the dataset is averaged.
    pub group_sizes: Vec<usize>,
    pub angle_bin_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDataset {
    pub samples: Vec<MeasurementSample>,
    pub provenance: Provenance,
}

impl JointDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn of_kind(&self, kind: FamilyKind) -> impl Iterator<Item = &MeasurementSample> {
        self.samples.iter().filter(move |s| s.family.kind == kind)
    }

    /// Serialize back to the measurement CSV layout.
    pub fn to_csv(&self) -> String {
        let mut out = CSV_HEADER.join(",");
        out.push('\n');
        for s in &self.samples {
            let thickness = s
                .family
                .thickness_mm
                .map(|t| t.to_string())
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                s.family.kind,
                thickness,
                s.deformation_angle_deg,
                s.direction.as_str(),
                s.force_n,
                s.return_angle_deg,
                s.run_id
            ));
        }
        out
    }
}

fn parse_number(row: usize, field: &'static str, text: &str) -> Result<f64, DataError> {
    let value: f64 = text.trim().parse().map_err(|_| DataError::BadNumber {
        row,
        field,
        text: text.to_string(),
    })?;
    if !value.is_finite() {
        return Err(DataError::BadNumber {
            row,
            field,
            text: text.to_string(),
        });
    }
    Ok(value)
}

fn check_range(
    row: usize,
    field: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
) -> Result<f64, DataError> {
    if value < lo || value > hi {
        Err(DataError::OutOfRange { row, field, value })
    } else {
        Ok(value)
    }
}

/// Parse measurement CSV text into a dataset.
pub fn parse_measurements(csv_text: &str) -> Result<JointDataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(DataError::EmptyFile);
    }
    let mut col = [0usize; 7];
    for (slot, name) in col.iter_mut().zip(CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
    }

    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Csv(e.to_string()))?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let field = |i: usize| record.get(col[i]).unwrap_or("");

        let kind: FamilyKind = field(0).parse().map_err(|_| DataError::BadCategory {
            row,
            field: "family",
            text: field(0).to_string(),
        })?;
        let thickness = match field(1) {
            "" => None,
            text => Some(parse_number(row, "thickness_mm", text)?),
        };
        let thickness = match (kind, thickness) {
            (FamilyKind::Curve, None) => return Err(DataError::MissingThickness { row }),
            (FamilyKind::Curve, Some(t)) => Some(check_range(
                row,
                "thickness_mm",
                t,
                CURVE_THICKNESS_RANGE_MM.0,
                CURVE_THICKNESS_RANGE_MM.1,
            )?),
            (_, Some(_)) => return Err(DataError::UnexpectedThickness { row }),
            (_, None) => None,
        };
        let deformation_angle_deg = check_range(
            row,
            "deformation_angle_deg",
            parse_number(row, "deformation_angle_deg", field(2))?,
            0.0,
            180.0,
        )?;
        let direction = match field(3) {
            "forward" => Direction::Forward,
            "reverse" => Direction::Reverse,
            other => {
                return Err(DataError::BadCategory {
                    row,
                    field: "direction",
                    text: other.to_string(),
                })
            }
        };
        let force_n = check_range(
            row,
            "force_n",
            parse_number(row, "force_n", field(4))?,
            0.0,
            f64::INFINITY,
        )?;
        let return_angle_deg = check_range(
            row,
            "return_angle_deg",
            parse_number(row, "return_angle_deg", field(5))?,
            0.0,
            180.0,
        )?;

        samples.push(MeasurementSample {
            family: JointFamily {
                kind,
                thickness_mm: thickness,
            },
            deformation_angle_deg,
            direction,
            force_n,
            return_angle_deg,
            run_id: field(6).to_string(),
        });
    }

    if samples.is_empty() {
        return Err(DataError::EmptyFile);
    }
    Ok(JointDataset {
        samples,
        provenance: Provenance::default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct BinKey {
    kind: FamilyKind,
    thickness_bits: Option<u64>,
    direction: Direction,
    bin: i64,
}

/// Merge repeat runs: readings of the same family, thickness and direction
/// whose angles fall in the same bin are replaced by one sample carrying
/// the arithmetic means of angle, force and return angle.
///
/// Output is ordered by (family, thickness, direction, bin).
pub fn average_runs(ds: &JointDataset, angle_bin_deg: f64) -> Result<JointDataset, DataError> {
    if !(angle_bin_deg > 0.0 && angle_bin_deg.is_finite()) {
        return Err(DataError::InvalidBin(angle_bin_deg));
    }

    let mut groups: BTreeMap<BinKey, Vec<usize>> = BTreeMap::new();
    for (i, s) in ds.samples.iter().enumerate() {
        let key = BinKey {
            kind: s.family.kind,
            thickness_bits: s.family.thickness_mm.map(f64::to_bits),
            direction: s.direction,
            bin: (s.deformation_angle_deg / angle_bin_deg).round() as i64,
        };
        groups.entry(key).or_default().push(i);
    }

    let weight = |i: usize| ds.provenance.group_sizes.get(i).copied().unwrap_or(1);
    let mut samples = Vec::with_capacity(groups.len());
    let mut group_sizes = Vec::with_capacity(groups.len());
    for members in groups.values() {
        let first = &ds.samples[members[0]];
        if members.len() == 1 {
            samples.push(first.clone());
            group_sizes.push(weight(members[0]));
            continue;
        }
        let n = members.len() as f64;
        let mean = |f: fn(&MeasurementSample) -> f64| {
            members.iter().map(|&i| f(&ds.samples[i])).sum::<f64>() / n
        };
        let mut run_ids: Vec<&str> = members
            .iter()
            .map(|&i| ds.samples[i].run_id.as_str())
            .collect();
        run_ids.sort_unstable();
        run_ids.dedup();
        samples.push(MeasurementSample {
            family: first.family,
            deformation_angle_deg: mean(|s| s.deformation_angle_deg),
            direction: first.direction,
            force_n: mean(|s| s.force_n),
            return_angle_deg: mean(|s| s.return_angle_deg),
            run_id: run_ids.join("+"),
        });
        group_sizes.push(members.iter().map(|&i| weight(i)).sum());
    }

    Ok(JointDataset {
        samples,
        provenance: Provenance {
            source: ds.provenance.source.clone(),
            group_sizes,
            angle_bin_deg: Some(angle_bin_deg),
        },
    })
}

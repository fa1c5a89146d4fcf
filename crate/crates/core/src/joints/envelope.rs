//! Observed operating limits of each joint geometry.

use serde::{Deserialize, Serialize};

use crate::data::{FamilyKind, JointFamily};

pub const ENVELOPE_TABLE_VERSION: u32 = 1;

/// Curve joints at or below this thickness use the thin-curve row.
pub const THIN_CURVE_MAX_MM: f64 = 0.4;

/// Limits read off the bench tests. `None` where no value was observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointEnvelope {
    /// Deformation angle past which recovery degrades.
    pub yield_angle_deg: Option<f64>,
    /// Angle at which the geometry touches itself.
    pub self_contact_angle_deg: Option<f64>,
    pub max_observed_force_n: Option<f64>,
    /// Angle at which the return angle starts to fall below 180°.
    pub return_decay_onset_deg: Option<f64>,
}

impl JointEnvelope {
    /// `0 < onset ≤ yield ≤ 180` and `self_contact ∈ (0, 180]` where present.
    pub fn is_consistent(&self) -> bool {
        let in_range = |a: Option<f64>| a.is_none_or(|v| v > 0.0 && v <= 180.0);
        let ordered = match (self.return_decay_onset_deg, self.yield_angle_deg) {
            (Some(onset), Some(y)) => onset <= y,
            _ => true,
        };
        in_range(self.yield_angle_deg)
            && in_range(self.self_contact_angle_deg)
            && in_range(self.return_decay_onset_deg)
            && self.max_observed_force_n.is_none_or(|f| f > 0.0)
            && ordered
    }
}

const STRAIGHT: JointEnvelope = JointEnvelope {
    yield_angle_deg: Some(135.0),
    self_contact_angle_deg: None,
    max_observed_force_n: None,
    return_decay_onset_deg: Some(135.0),
};

const THIN_CURVE: JointEnvelope = JointEnvelope {
    yield_angle_deg: None,
    self_contact_angle_deg: None,
    max_observed_force_n: Some(2.9),
    return_decay_onset_deg: Some(90.0),
};

const THICK_CURVE: JointEnvelope = JointEnvelope {
    yield_angle_deg: Some(140.0),
    self_contact_angle_deg: None,
    max_observed_force_n: Some(7.1),
    return_decay_onset_deg: None,
};

const DOUBLE_CURVE: JointEnvelope = JointEnvelope {
    yield_angle_deg: Some(150.0),
    self_contact_angle_deg: Some(110.0),
    max_observed_force_n: Some(15.5),
    return_decay_onset_deg: None,
};

const SQUARE_SYM: JointEnvelope = JointEnvelope {
    yield_angle_deg: None,
    self_contact_angle_deg: Some(150.0),
    max_observed_force_n: None,
    return_decay_onset_deg: Some(70.0),
};

const SQUARE_NONSYM: JointEnvelope = JointEnvelope {
    yield_angle_deg: None,
    self_contact_angle_deg: Some(150.0),
    max_observed_force_n: None,
    return_decay_onset_deg: Some(40.0),
};

pub fn envelope_for(family: &JointFamily) -> JointEnvelope {
    match family.kind() {
        FamilyKind::Straight => STRAIGHT,
        FamilyKind::Curve => {
            if family.thickness_mm().unwrap_or(THIN_CURVE_MAX_MM) <= THIN_CURVE_MAX_MM + 1e-9 {
                THIN_CURVE
            } else {
                THICK_CURVE
            }
        }
        FamilyKind::DoubleCurve => DOUBLE_CURVE,
        FamilyKind::SquareWaveSymmetric => SQUARE_SYM,
        FamilyKind::SquareWaveNonSymmetric => SQUARE_NONSYM,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub family: FamilyKind,
    /// Thickness interval `(lo, hi]` in mm the row applies to, curves only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thickness_mm: Option<(f64, f64)>,
    #[serde(flatten)]
    pub envelope: JointEnvelope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeTable {
    pub version: u32,
    pub rows: Vec<EnvelopeRow>,
}

/// The whole built-in table, one row per family (two for curves).
pub fn envelope_table() -> EnvelopeTable {
    let row = |family, thickness_mm, envelope| EnvelopeRow {
        family,
        thickness_mm,
        envelope,
    };
    EnvelopeTable {
        version: ENVELOPE_TABLE_VERSION,
        rows: vec![
            row(FamilyKind::Straight, None, STRAIGHT),
            row(
                FamilyKind::Curve,
                Some((0.0, THIN_CURVE_MAX_MM)),
                THIN_CURVE,
            ),
            row(
                FamilyKind::Curve,
                Some((THIN_CURVE_MAX_MM, 1.6)),
                THICK_CURVE,
            ),
            row(FamilyKind::DoubleCurve, None, DOUBLE_CURVE),
            row(FamilyKind::SquareWaveSymmetric, None, SQUARE_SYM),
            row(FamilyKind::SquareWaveNonSymmetric, None, SQUARE_NONSYM),
        ],
    }
}

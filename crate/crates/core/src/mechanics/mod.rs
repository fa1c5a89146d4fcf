//! Ring-module mechanics: section geometry, the triangle bend-angle
//! estimate, spring-chain section forces and motor/spindle sizing.
//!
//! Lengths are in mm, angles in degrees and forces in N. Torques are in
//! N·m; the mm→m conversion happens only where torque meets length.

mod design;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{m_to_mm, mm_to_m, rad_to_deg};

pub use design::{
    design_module, sig6, ActuatorSpec, DesignReport, EnvelopeFlags, ForceSource, JointSpec,
    Quantity, RingDesignSpec, SpecViolation, DEFAULT_FRICTION_LOSS_FACTOR, DEFAULT_SAFETY_FACTOR,
    DEFAULT_SPINDLE_ROUNDING_MM,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanicsError {
    #[error("geometry infeasible: {0}")]
    GeometryInfeasible(String),
    #[error("zero deflection: stiffness is undefined")]
    ZeroDeflection,
    #[error("invalid spring chain: {0}")]
    InvalidChain(String),
    #[error("invalid design spec: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidSpec(Vec<SpecViolation>),
    #[error("model is for {model} joints but the design uses {design}")]
    ModelFamilyMismatch {
        model: crate::data::FamilyKind,
        design: crate::data::FamilyKind,
    },
    #[error(transparent)]
    JointModel(#[from] crate::joints::JointModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingGeometry {
    /// Arc length of one of the `n` mirrored sections.
    pub section_arc_mm: f64,
    /// Half of a section; the unit analysed by symmetry.
    pub half_section_arc_mm: f64,
}

/// Split the ring circumference into `n_sections` arcs.
pub fn ring_geometry(outer_radius_mm: f64, n_sections: u32) -> RingGeometry {
    let section_arc_mm = 2.0 * PI * outer_radius_mm / f64::from(n_sections);
    RingGeometry {
        section_arc_mm,
        half_section_arc_mm: section_arc_mm / 2.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetArc {
    pub new_arc_mm: f64,
    pub delta_mm: f64,
}

/// Arc length after contracting to `target_ratio` of the original radius.
pub fn target_arc(half_section_arc_mm: f64, target_ratio: f64) -> TargetArc {
    let new_arc_mm = half_section_arc_mm * target_ratio;
    TargetArc {
        new_arc_mm,
        delta_mm: half_section_arc_mm - new_arc_mm,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BendAngle {
    pub hypotenuse_mm: f64,
    pub adjacent_mm: f64,
    pub angle_deg: f64,
}

/// Triangle estimate of the joint bend needed to shorten an arc by
/// `delta_mm`: hypotenuse = arc/2, adjacent = (arc − delta)/2.
pub fn required_bend_angle(
    half_section_arc_mm: f64,
    delta_mm: f64,
) -> Result<BendAngle, MechanicsError> {
    if !(half_section_arc_mm > 0.0) {
        return Err(MechanicsError::GeometryInfeasible(format!(
            "arc must be positive, got {half_section_arc_mm} mm"
        )));
    }
    if delta_mm >= half_section_arc_mm {
        return Err(MechanicsError::GeometryInfeasible(format!(
            "arc reduction {delta_mm} mm consumes the whole {half_section_arc_mm} mm arc"
        )));
    }
    let hypotenuse_mm = half_section_arc_mm / 2.0;
    let adjacent_mm = (half_section_arc_mm - delta_mm) / 2.0;
    if adjacent_mm > hypotenuse_mm {
        return Err(MechanicsError::GeometryInfeasible(format!(
            "adjacent {adjacent_mm} mm exceeds hypotenuse {hypotenuse_mm} mm"
        )));
    }
    Ok(BendAngle {
        hypotenuse_mm,
        adjacent_mm,
        angle_deg: rad_to_deg((adjacent_mm / hypotenuse_mm).acos()),
    })
}

/// One torsional spring of a section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spring {
    /// N·mm/deg.
    pub stiffness: f64,
    /// Cumulative angle of this spring, degrees.
    pub angle_deg: f64,
}

/// Springs in series along one side of a section, wrapped on a ring of
/// the current radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpringChain {
    elements: Vec<Spring>,
    current_radius_mm: f64,
}

impl SpringChain {
    pub fn new(elements: Vec<Spring>, current_radius_mm: f64) -> Result<Self, MechanicsError> {
        if elements.is_empty() {
            return Err(MechanicsError::InvalidChain("no springs".into()));
        }
        if let Some(s) = elements.iter().find(|s| !(s.stiffness > 0.0)) {
            return Err(MechanicsError::InvalidChain(format!(
                "stiffness must be positive, got {}",
                s.stiffness
            )));
        }
        if !(current_radius_mm > 0.0 && current_radius_mm.is_finite()) {
            return Err(MechanicsError::InvalidChain(format!(
                "radius must be positive, got {current_radius_mm}"
            )));
        }
        Ok(Self {
            elements,
            current_radius_mm,
        })
    }

    /// As [`SpringChain::new`], with the radius clamped to `[r_m, R_g]`.
    pub fn within(
        elements: Vec<Spring>,
        radius_mm: f64,
        spindle_radius_mm: f64,
        outer_radius_mm: f64,
    ) -> Result<Self, MechanicsError> {
        Self::new(
            elements,
            radius_mm.clamp(spindle_radius_mm, outer_radius_mm),
        )
    }

    pub fn elements(&self) -> &[Spring] {
        &self.elements
    }

    pub fn current_radius_mm(&self) -> f64 {
        self.current_radius_mm
    }

    /// Relative rotations `θ_i − θ_{i−1}`, with `θ_0 = 0`.
    pub fn deflections(&self) -> impl Iterator<Item = f64> + '_ {
        let mut prev = 0.0;
        self.elements.iter().map(move |s| {
            let d = s.angle_deg - prev;
            prev = s.angle_deg;
            d
        })
    }
}

/// Force of a mirrored section, `F_l + F_r = 2 Σ k_i Δθ_i / R`, in N.
pub fn section_force(chain: &SpringChain) -> f64 {
    let torque: f64 = chain
        .elements
        .iter()
        .zip(chain.deflections())
        .map(|(s, d)| s.stiffness * d)
        .sum();
    2.0 * torque / chain.current_radius_mm
}

/// `k = R·F/Δθ` in N·mm/deg: the stiffness a section presents when it
/// carries `force_n` at deflection `deflection_deg`. Both sides of the
/// mirrored section together; each side holds half.
pub fn effective_stiffness(
    force_n: f64,
    deflection_deg: f64,
    radius_mm: f64,
) -> Result<f64, MechanicsError> {
    if deflection_deg == 0.0 {
        return Err(MechanicsError::ZeroDeflection);
    }
    Ok(radius_mm * force_n / deflection_deg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorRequirements {
    pub total_force_n: f64,
    /// `None` when there is no load to size against.
    pub min_spindle_radius_mm: Option<f64>,
    /// Torque the chosen spindle demands, N·m.
    pub torque_at_radius_nm: f64,
    /// Chosen spindle needs more than the rated torque.
    pub overdrive_required: bool,
    /// Chosen spindle needs more than rated torque × overdrive factor.
    pub exceeds_overdrive: bool,
}

/// Cable force and spindle sizing: `F_m = joints · F_joint · loss`,
/// `r_min = τ_rated / F_m`, `τ = F_m · r_m`.
pub fn motor_requirements(
    total_joints: u32,
    per_joint_force_n: f64,
    actuator: &ActuatorSpec,
    friction_loss_factor: f64,
) -> MotorRequirements {
    let total_force_n = f64::from(total_joints) * per_joint_force_n * friction_loss_factor;
    let min_spindle_radius_mm =
        (total_force_n > 0.0).then(|| m_to_mm(actuator.rated_torque_nm / total_force_n));
    let torque_at_radius_nm = total_force_n * mm_to_m(actuator.spindle_radius_mm);
    MotorRequirements {
        total_force_n,
        min_spindle_radius_mm,
        torque_at_radius_nm,
        overdrive_required: torque_at_radius_nm > actuator.rated_torque_nm,
        exceeds_overdrive: torque_at_radius_nm
            > actuator.rated_torque_nm * actuator.overdrive_factor,
    }
}

/// Minimum radius times `safety_factor`, rounded up to a multiple of
/// `step_mm`.
pub fn recommended_spindle_radius(min_radius_mm: f64, safety_factor: f64, step_mm: f64) -> f64 {
    let raw = min_radius_mm * safety_factor;
    // Guard against 3.0000000000000004-style overshoot of an exact multiple.
    let rounded = (raw / step_mm - 1e-9).ceil() * step_mm;
    (rounded * 1e12).round() / 1e12
}

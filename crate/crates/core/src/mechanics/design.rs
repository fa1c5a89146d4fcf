//! End-to-end sizing of a ring module: geometry → bend angle → joint
//! force → motor force and spindle radius → envelope check.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{
    motor_requirements, recommended_spindle_radius, required_bend_angle, ring_geometry, target_arc,
    MechanicsError,
};
use crate::data::{FamilyKind, JointFamily};
use crate::joints::{envelope_for, JointFamilyModel, JointModelError};

pub const DEFAULT_SAFETY_FACTOR: f64 = 1.5;
pub const DEFAULT_FRICTION_LOSS_FACTOR: f64 = 1.0;
pub const DEFAULT_SPINDLE_ROUNDING_MM: f64 = 0.5;

fn default_safety_factor() -> f64 {
    DEFAULT_SAFETY_FACTOR
}

fn default_friction() -> f64 {
    DEFAULT_FRICTION_LOSS_FACTOR
}

fn default_rounding() -> f64 {
    DEFAULT_SPINDLE_ROUNDING_MM
}

fn default_overdrive() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorSpec {
    pub rated_torque_nm: f64,
    pub spindle_radius_mm: f64,
    #[serde(default = "default_overdrive")]
    pub overdrive_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub family: FamilyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thickness_mm: Option<f64>,
}

/// Geometry and actuation of one ring module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingDesignSpec {
    pub outer_radius_mm: f64,
    /// Mirrored sections around the ring.
    pub n_sections: u32,
    /// Joints across all ring layers.
    pub joints_per_ring: u32,
    pub ring_layers: u32,
    /// Remaining radius fraction after contraction.
    pub target_ratio: f64,
    pub actuator: ActuatorSpec,
    pub joint: JointSpec,
    /// Replaces the model's per-joint force when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_joint_force_override_n: Option<f64>,
    #[serde(default = "default_safety_factor")]
    pub safety_factor: f64,
    #[serde(default = "default_friction")]
    pub friction_loss_factor: f64,
    #[serde(default = "default_rounding")]
    pub spindle_rounding_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpecViolation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for SpecViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Number,
    Integer,
    Text,
    Object,
}

impl Kind {
    fn accepts(self, v: &Value) -> bool {
        match self {
            Kind::Number => v.is_number(),
            Kind::Integer => v.as_u64().is_some_and(|n| n <= u64::from(u32::MAX)),
            Kind::Text => v.is_string(),
            Kind::Object => v.is_object(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Kind::Number => "a number",
            Kind::Integer => "a non-negative integer",
            Kind::Text => "a string",
            Kind::Object => "an object",
        }
    }
}

/// Check presence and JSON type of each field; `nullable` fields may also
/// be absent or null.
fn check_fields(
    obj: &Map<String, Value>,
    prefix: &str,
    fields: &[(&str, Kind, bool)],
    out: &mut Vec<SpecViolation>,
    unknown: &mut Vec<SpecViolation>,
) {
    let path = |name: &str| {
        if prefix.is_empty() {
            name.to_string()
        } else {
            format!("{prefix}.{name}")
        }
    };
    for &(name, kind, optional) in fields {
        match obj.get(name) {
            None | Some(Value::Null) if optional => {}
            None => out.push(SpecViolation {
                field: path(name),
                message: "missing".into(),
            }),
            Some(v) if !kind.accepts(v) => out.push(SpecViolation {
                field: path(name),
                message: format!("must be {}", kind.name()),
            }),
            Some(_) => {}
        }
    }
    for key in obj.keys() {
        if !fields.iter().any(|(n, _, _)| n == key) {
            unknown.push(SpecViolation {
                field: path(key),
                message: "unknown field".into(),
            });
        }
    }
}

impl RingDesignSpec {
    /// Parse and validate a design-spec JSON document, reporting every
    /// offending field at once.
    pub fn from_json(text: &str) -> Result<Self, Vec<SpecViolation>> {
        let value: Value = serde_json::from_str(text).map_err(|e| {
            vec![SpecViolation {
                field: "<document>".into(),
                message: e.to_string(),
            }]
        })?;
        let Some(obj) = value.as_object() else {
            return Err(vec![SpecViolation {
                field: "<document>".into(),
                message: "must be a JSON object".into(),
            }]);
        };

        let mut out = Vec::new();
        let mut unknown = Vec::new();
        check_fields(
            obj,
            "",
            &[
                ("outer_radius_mm", Kind::Number, false),
                ("n_sections", Kind::Integer, false),
                ("joints_per_ring", Kind::Integer, false),
                ("ring_layers", Kind::Integer, false),
                ("target_ratio", Kind::Number, false),
                ("actuator", Kind::Object, false),
                ("joint", Kind::Object, false),
                ("per_joint_force_override_n", Kind::Number, true),
                ("safety_factor", Kind::Number, true),
                ("friction_loss_factor", Kind::Number, true),
                ("spindle_rounding_mm", Kind::Number, true),
            ],
            &mut out,
            &mut unknown,
        );
        if let Some(Value::Object(a)) = obj.get("actuator") {
            check_fields(
                a,
                "actuator",
                &[
                    ("rated_torque_nm", Kind::Number, false),
                    ("spindle_radius_mm", Kind::Number, false),
                    ("overdrive_factor", Kind::Number, true),
                ],
                &mut out,
                &mut unknown,
            );
        }
        if let Some(Value::Object(j)) = obj.get("joint") {
            check_fields(
                j,
                "joint",
                &[
                    ("family", Kind::Text, false),
                    ("thickness_mm", Kind::Number, true),
                ],
                &mut out,
                &mut unknown,
            );
            if let Some(Value::String(f)) = j.get("family") {
                if f.parse::<FamilyKind>().is_err() {
                    out.push(SpecViolation {
                        field: "joint.family".into(),
                        message: format!("unknown family {f:?}"),
                    });
                }
            }
        }
        // Unknown keys do not stop the value checks below.
        if !out.is_empty() {
            out.extend(unknown);
            return Err(out);
        }

        let spec: RingDesignSpec = serde_json::from_value(value).map_err(|e| {
            vec![SpecViolation {
                field: "<document>".into(),
                message: e.to_string(),
            }]
        })?;
        if let Err(v) = spec.validate() {
            out = v;
        }
        out.extend(unknown);
        if out.is_empty() {
            Ok(spec)
        } else {
            Err(out)
        }
    }

    pub fn validate(&self) -> Result<(), Vec<SpecViolation>> {
        let mut out = Vec::new();
        let mut bad = |ok: bool, field: &str, message: &str| {
            if !ok {
                out.push(SpecViolation {
                    field: field.into(),
                    message: message.into(),
                });
            }
        };
        bad(
            self.outer_radius_mm > 0.0 && self.outer_radius_mm.is_finite(),
            "outer_radius_mm",
            "must be positive",
        );
        bad(self.n_sections >= 2, "n_sections", "must be at least 2");
        bad(
            self.joints_per_ring >= 1,
            "joints_per_ring",
            "must be at least 1",
        );
        bad(
            self.n_sections == 0 || self.joints_per_ring.is_multiple_of(self.n_sections),
            "joints_per_ring",
            "must be divisible by n_sections",
        );
        bad(self.ring_layers >= 1, "ring_layers", "must be at least 1");
        bad(
            self.target_ratio > 0.0 && self.target_ratio <= 1.0,
            "target_ratio",
            "must lie in (0, 1]",
        );
        bad(
            self.actuator.rated_torque_nm > 0.0 && self.actuator.rated_torque_nm.is_finite(),
            "actuator.rated_torque_nm",
            "must be positive",
        );
        bad(
            self.actuator.spindle_radius_mm > 0.0 && self.actuator.spindle_radius_mm.is_finite(),
            "actuator.spindle_radius_mm",
            "must be positive",
        );
        bad(
            self.actuator.overdrive_factor >= 1.0 && self.actuator.overdrive_factor.is_finite(),
            "actuator.overdrive_factor",
            "must be at least 1",
        );
        bad(
            JointFamily::new(self.joint.family, self.joint.thickness_mm).is_ok(),
            "joint.thickness_mm",
            "required (and positive) for curve joints, absent otherwise",
        );
        bad(
            self.per_joint_force_override_n
                .is_none_or(|f| f >= 0.0 && f.is_finite()),
            "per_joint_force_override_n",
            "must be non-negative",
        );
        bad(
            self.safety_factor >= 1.0 && self.safety_factor.is_finite(),
            "safety_factor",
            "must be at least 1",
        );
        bad(
            self.friction_loss_factor >= 1.0 && self.friction_loss_factor.is_finite(),
            "friction_loss_factor",
            "must be at least 1",
        );
        bad(
            self.spindle_rounding_mm > 0.0 && self.spindle_rounding_mm.is_finite(),
            "spindle_rounding_mm",
            "must be positive",
        );
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn joint_family(&self) -> Result<JointFamily, MechanicsError> {
        JointFamily::new(self.joint.family, self.joint.thickness_mm).map_err(|e| {
            MechanicsError::InvalidSpec(vec![SpecViolation {
                field: "joint".into(),
                message: e.to_string(),
            }])
        })
    }
}

/// A number with its unit, as it appears in the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

fn q(value: f64, unit: &str) -> Quantity {
    Quantity {
        value,
        unit: unit.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceSource {
    Model,
    Override,
    /// No bend, no force.
    Unloaded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EnvelopeFlags {
    pub yield_exceeded: bool,
    pub self_contact: bool,
    pub beyond_return_decay_onset: bool,
    pub above_max_observed_force: bool,
    pub prediction_extrapolated: bool,
}

impl EnvelopeFlags {
    pub fn any(&self) -> bool {
        self.yield_exceeded
            || self.self_contact
            || self.beyond_return_decay_onset
            || self.above_max_observed_force
            || self.prediction_extrapolated
    }
}

/// Every stage of a design run, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub family: FamilyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thickness: Option<Quantity>,
    pub outer_radius: Quantity,
    pub n_sections: u32,
    pub total_joints: u32,
    pub target_ratio: f64,
    pub target_radius: Quantity,
    pub section_arc: Quantity,
    pub half_section_arc: Quantity,
    pub target_half_section_arc: Quantity,
    pub arc_reduction: Quantity,
    pub triangle_hypotenuse: Quantity,
    pub triangle_adjacent: Quantity,
    pub bend_angle: Quantity,
    /// Model prediction at the bend angle, absent when unloaded.
    pub model_force_per_joint: Option<Quantity>,
    pub model_force_std: Option<Quantity>,
    pub per_joint_force: Quantity,
    pub force_source: ForceSource,
    pub friction_loss_factor: f64,
    pub total_force: Quantity,
    pub rated_torque: Quantity,
    /// Absent when there is no load.
    pub min_spindle_radius: Option<Quantity>,
    pub safety_factor: f64,
    pub spindle_rounding: Quantity,
    pub recommended_spindle_radius: Option<Quantity>,
    pub spindle_radius: Quantity,
    pub torque_at_spindle: Quantity,
    pub overdrive_factor: f64,
    pub overdrive_required: bool,
    pub exceeds_overdrive: bool,
    pub envelope: EnvelopeFlags,
    pub predicted_return_angle: Option<Quantity>,
    pub diagnostics: Vec<String>,
}

/// Run the sizing pipeline for `spec` with joint model `jm`.
pub fn design_module(
    spec: &RingDesignSpec,
    jm: &JointFamilyModel,
) -> Result<DesignReport, MechanicsError> {
    spec.validate().map_err(MechanicsError::InvalidSpec)?;
    let family = spec.joint_family()?;
    if jm.kind() != family.kind() {
        return Err(MechanicsError::ModelFamilyMismatch {
            model: jm.kind(),
            design: family.kind(),
        });
    }
    let thickness = family.thickness_mm();
    let mut diagnostics = Vec::new();

    let target_radius_mm = spec.outer_radius_mm * spec.target_ratio;
    if target_radius_mm < spec.actuator.spindle_radius_mm {
        return Err(MechanicsError::GeometryInfeasible(format!(
            "target radius {target_radius_mm} mm is inside the {} mm spindle",
            spec.actuator.spindle_radius_mm
        )));
    }

    let geometry = ring_geometry(spec.outer_radius_mm, spec.n_sections);
    let target = target_arc(geometry.half_section_arc_mm, spec.target_ratio);
    let bend = required_bend_angle(geometry.half_section_arc_mm, target.delta_mm)?;

    let mut flags = EnvelopeFlags::default();
    let model_force = if bend.angle_deg > 0.0 {
        let p = jm.predict_force(bend.angle_deg, thickness)?;
        flags.prediction_extrapolated = p.flags.extrapolated;
        if p.flags.nonzero_rest_force {
            diagnostics.push(format!(
                "force model does not vanish at rest; {:.4} N predicted near {:.3}°",
                p.force_n, bend.angle_deg
            ));
        }
        Some(p)
    } else {
        None
    };

    let (per_joint_force_n, force_source) = match (spec.per_joint_force_override_n, &model_force) {
        (_, None) => (0.0, ForceSource::Unloaded),
        (Some(f), Some(p)) => {
            if (f - p.force_n).abs() > 1e-9 {
                diagnostics.push(format!(
                    "per-joint force override {f} N differs from the model's {:.6} N at {:.6}°",
                    p.force_n, bend.angle_deg
                ));
            }
            (f, ForceSource::Override)
        }
        (None, Some(p)) => (p.force_n, ForceSource::Model),
    };

    let motor = motor_requirements(
        spec.joints_per_ring,
        per_joint_force_n,
        &spec.actuator,
        spec.friction_loss_factor,
    );
    let recommended = motor
        .min_spindle_radius_mm
        .map(|r| recommended_spindle_radius(r, spec.safety_factor, spec.spindle_rounding_mm));
    if motor.overdrive_required {
        diagnostics.push(format!(
            "spindle radius {} mm needs {:.6} N·m, above the rated {} N·m",
            spec.actuator.spindle_radius_mm,
            motor.torque_at_radius_nm,
            spec.actuator.rated_torque_nm
        ));
    }

    let envelope = envelope_for(&family);
    if bend.angle_deg > 0.0 {
        flags.yield_exceeded = envelope.yield_angle_deg.is_some_and(|y| bend.angle_deg > y);
        flags.self_contact = envelope
            .self_contact_angle_deg
            .is_some_and(|c| bend.angle_deg >= c);
        flags.beyond_return_decay_onset = envelope
            .return_decay_onset_deg
            .is_some_and(|o| bend.angle_deg > o);
    }
    flags.above_max_observed_force = envelope
        .max_observed_force_n
        .is_some_and(|m| per_joint_force_n > m);

    let predicted_return_angle = match jm.predict_return_angle(bend.angle_deg, thickness) {
        Ok(a) => Some(q(a, "deg")),
        Err(JointModelError::NoReturnModel) => {
            diagnostics.push("model has no return-angle predictor".into());
            None
        }
        Err(e) => return Err(e.into()),
    };

    Ok(DesignReport {
        family: family.kind(),
        thickness: thickness.map(|t| q(t, "mm")),
        outer_radius: q(spec.outer_radius_mm, "mm"),
        n_sections: spec.n_sections,
        total_joints: spec.joints_per_ring,
        target_ratio: spec.target_ratio,
        target_radius: q(target_radius_mm, "mm"),
        section_arc: q(geometry.section_arc_mm, "mm"),
        half_section_arc: q(geometry.half_section_arc_mm, "mm"),
        target_half_section_arc: q(target.new_arc_mm, "mm"),
        arc_reduction: q(target.delta_mm, "mm"),
        triangle_hypotenuse: q(bend.hypotenuse_mm, "mm"),
        triangle_adjacent: q(bend.adjacent_mm, "mm"),
        bend_angle: q(bend.angle_deg, "deg"),
        model_force_per_joint: model_force.map(|p| q(p.force_n, "N")),
        model_force_std: model_force.map(|p| q(p.predictive_std(), "N")),
        per_joint_force: q(per_joint_force_n, "N"),
        force_source,
        friction_loss_factor: spec.friction_loss_factor,
        total_force: q(motor.total_force_n, "N"),
        rated_torque: q(spec.actuator.rated_torque_nm, "N·m"),
        min_spindle_radius: motor.min_spindle_radius_mm.map(|r| q(r, "mm")),
        safety_factor: spec.safety_factor,
        spindle_rounding: q(spec.spindle_rounding_mm, "mm"),
        recommended_spindle_radius: recommended.map(|r| q(r, "mm")),
        spindle_radius: q(spec.actuator.spindle_radius_mm, "mm"),
        torque_at_spindle: q(motor.torque_at_radius_nm, "N·m"),
        overdrive_factor: spec.actuator.overdrive_factor,
        overdrive_required: motor.overdrive_required,
        exceeds_overdrive: motor.exceeds_overdrive,
        envelope: flags,
        predicted_return_angle,
        diagnostics,
    })
}

/// Six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

impl DesignReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is always serializable");
        s.push('\n');
        s
    }

    /// Plain-text table of the main quantities.
    pub fn summary_table(&self) -> String {
        let mut rows: Vec<(String, String, String)> = Vec::new();
        let mut push = |name: &str, v: &Quantity| {
            rows.push((name.to_string(), sig6(v.value), v.unit.clone()));
        };
        push("outer radius", &self.outer_radius);
        push("target radius", &self.target_radius);
        push("half-section arc", &self.half_section_arc);
        push("target arc", &self.target_half_section_arc);
        push("arc reduction", &self.arc_reduction);
        push("bend angle", &self.bend_angle);
        if let Some(f) = &self.model_force_per_joint {
            push("model force / joint", f);
        }
        push("force / joint", &self.per_joint_force);
        push("total force F_m", &self.total_force);
        push("rated torque", &self.rated_torque);
        if let Some(r) = &self.min_spindle_radius {
            push("min spindle radius", r);
        }
        if let Some(r) = &self.recommended_spindle_radius {
            push("recommended spindle", r);
        }
        push("spindle radius", &self.spindle_radius);
        push("torque at spindle", &self.torque_at_spindle);
        if let Some(a) = &self.predicted_return_angle {
            push("return angle", a);
        }
        if self.min_spindle_radius.is_none() {
            rows.push(("min spindle radius".into(), "no load".into(), String::new()));
        }

        let width = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0);
        let vwidth = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
        let mut out = format!("design summary ({} joints)\n", self.family);
        for (name, value, unit) in rows {
            let pad = width - name.chars().count();
            out.push_str(&format!(
                "  {name}{}  {value:>vwidth$} {unit}\n",
                " ".repeat(pad)
            ));
        }
        let e = &self.envelope;
        let mut flags = Vec::new();
        if e.yield_exceeded {
            flags.push("yield exceeded");
        }
        if e.self_contact {
            flags.push("self-contact");
        }
        if e.beyond_return_decay_onset {
            flags.push("past return-decay onset");
        }
        if e.above_max_observed_force {
            flags.push("above max observed force");
        }
        if e.prediction_extrapolated {
            flags.push("force extrapolated");
        }
        if self.overdrive_required {
            flags.push("overdrive required");
        }
        if self.exceeds_overdrive {
            flags.push("exceeds overdrive");
        }
        out.push_str(&format!(
            "  flags: {}\n",
            if flags.is_empty() {
                "none".to_string()
            } else {
                flags.join(", ")
            }
        ));
        for d in &self.diagnostics {
            out.push_str(&format!("  note: {d}\n"));
        }
        out
    }
}

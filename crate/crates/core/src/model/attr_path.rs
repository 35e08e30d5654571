//! Attribute paths address a container's parameters by dot path.
//!
//! ```text
//! primitive.<attr>                     basic containers
//! body.count                           repeaters
//! arrangement.step.x | step.y | radius | startAngleDeg | deltaAngleDeg | gap
//! coord.origin.x | coord.origin.y
//! transform.translate.x | translate.y | rotate.angleDeg
//!          | rotate.center.x | rotate.center.y | scale.sx | scale.sy | scale.sx+sy
//! instance.<field>                     per-instance value on the repeated child
//! instance[<descendant id>].<field>    per-instance value on a deeper descendant
//! ```
//!
//! An instance `<field>` is either a transform field without the
//! `transform.` prefix (`scale.sy`, `rotate.angleDeg`, ...) or
//! `primitive.<attr>`.

use alloc::string::{String, ToString};

use super::{
    attr_type, Arrangement, AttrValue, Body, Container, ContainerId, ContainerKind, GlyphDocument,
    Transform, UniformParams,
};
use crate::geometry::AffineMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TransformField {
    TranslateX,
    TranslateY,
    RotateAngle,
    RotateCenterX,
    RotateCenterY,
    ScaleX,
    ScaleY,
    /// Sets `sx` and `sy` together.
    ScaleUniform,
}

impl TransformField {
    fn parse(s: &str) -> Option<TransformField> {
        Some(match s {
            "translate.x" => TransformField::TranslateX,
            "translate.y" => TransformField::TranslateY,
            "rotate.angleDeg" => TransformField::RotateAngle,
            "rotate.center.x" => TransformField::RotateCenterX,
            "rotate.center.y" => TransformField::RotateCenterY,
            "scale.sx" => TransformField::ScaleX,
            "scale.sy" => TransformField::ScaleY,
            "scale.sx+sy" => TransformField::ScaleUniform,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformField::TranslateX => "translate.x",
            TransformField::TranslateY => "translate.y",
            TransformField::RotateAngle => "rotate.angleDeg",
            TransformField::RotateCenterX => "rotate.center.x",
            TransformField::RotateCenterY => "rotate.center.y",
            TransformField::ScaleX => "scale.sx",
            TransformField::ScaleY => "scale.sy",
            TransformField::ScaleUniform => "scale.sx+sy",
        }
    }

    fn is_scale(self) -> bool {
        matches!(
            self,
            TransformField::ScaleX | TransformField::ScaleY | TransformField::ScaleUniform
        )
    }

    pub fn read(self, t: &Transform) -> f64 {
        match self {
            TransformField::TranslateX => t.translate.x,
            TransformField::TranslateY => t.translate.y,
            TransformField::RotateAngle => t.rotate.angle_deg,
            TransformField::RotateCenterX => t.rotate.center.x,
            TransformField::RotateCenterY => t.rotate.center.y,
            TransformField::ScaleX | TransformField::ScaleUniform => t.scale.sx,
            TransformField::ScaleY => t.scale.sy,
        }
    }

    pub fn write(self, t: &mut Transform, v: f64) {
        match self {
            TransformField::TranslateX => t.translate.x = v,
            TransformField::TranslateY => t.translate.y = v,
            TransformField::RotateAngle => t.rotate.angle_deg = v,
            TransformField::RotateCenterX => t.rotate.center.x = v,
            TransformField::RotateCenterY => t.rotate.center.y = v,
            TransformField::ScaleX => t.scale.sx = v,
            TransformField::ScaleY => t.scale.sy = v,
            TransformField::ScaleUniform => {
                t.scale.sx = v;
                t.scale.sy = v;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ArrangementField {
    StepX,
    StepY,
    Radius,
    StartAngle,
    DeltaAngle,
    Gap,
}

impl ArrangementField {
    fn parse(s: &str) -> Option<ArrangementField> {
        Some(match s {
            "step.x" => ArrangementField::StepX,
            "step.y" => ArrangementField::StepY,
            "radius" => ArrangementField::Radius,
            "startAngleDeg" => ArrangementField::StartAngle,
            "deltaAngleDeg" => ArrangementField::DeltaAngle,
            "gap" => ArrangementField::Gap,
            _ => return None,
        })
    }

    pub fn read(self, a: &Arrangement) -> Option<f64> {
        match (self, a) {
            (ArrangementField::StepX, Arrangement::Uniform(UniformParams::Cartesian { step })) => {
                Some(step.x)
            }
            (ArrangementField::StepY, Arrangement::Uniform(UniformParams::Cartesian { step })) => {
                Some(step.y)
            }
            (
                ArrangementField::Radius,
                Arrangement::Uniform(UniformParams::Polar { radius, .. }),
            ) => Some(*radius),
            (
                ArrangementField::StartAngle,
                Arrangement::Uniform(UniformParams::Polar {
                    start_angle_deg, ..
                }),
            ) => Some(*start_angle_deg),
            (
                ArrangementField::DeltaAngle,
                Arrangement::Uniform(UniformParams::Polar {
                    delta_angle_deg, ..
                }),
            ) => Some(*delta_angle_deg),
            (ArrangementField::Gap, Arrangement::Stacked { gap, .. }) => Some(*gap),
            _ => None,
        }
    }

    /// Returns `false` when the arrangement has no such field.
    pub fn write(self, a: &mut Arrangement, v: f64) -> bool {
        match (self, a) {
            (ArrangementField::StepX, Arrangement::Uniform(UniformParams::Cartesian { step })) => {
                step.x = v
            }
            (ArrangementField::StepY, Arrangement::Uniform(UniformParams::Cartesian { step })) => {
                step.y = v
            }
            (
                ArrangementField::Radius,
                Arrangement::Uniform(UniformParams::Polar { radius, .. }),
            ) => *radius = v,
            (
                ArrangementField::StartAngle,
                Arrangement::Uniform(UniformParams::Polar {
                    start_angle_deg, ..
                }),
            ) => *start_angle_deg = v,
            (
                ArrangementField::DeltaAngle,
                Arrangement::Uniform(UniformParams::Polar {
                    delta_angle_deg, ..
                }),
            ) => *delta_angle_deg = v,
            (ArrangementField::Gap, Arrangement::Stacked { gap, .. }) => *gap = v,
            _ => return false,
        }
        true
    }
}

/// A field stored directly on a container.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum StaticField {
    Primitive(String),
    Count,
    Arrangement(ArrangementField),
    OriginX,
    OriginY,
    Transform(TransformField),
}

/// A per-instance field, set for each instance of a repeater.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum InstanceField {
    Transform(TransformField),
    Primitive(String),
}

/// Read/write handle to a resolved attribute path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttributeSlot {
    Static(StaticField),
    /// `selector` is `None` for the repeater's direct child.
    Instance {
        selector: Option<ContainerId>,
        field: InstanceField,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PathError {
    #[error("unknown attribute path `{0}`")]
    UnknownPath(String),
    #[error("path `{path}` does not apply to a {kind} container")]
    PathKindMismatch { path: String, kind: &'static str },
}

fn parse_instance_field(rest: &str) -> Option<InstanceField> {
    if let Some(name) = rest.strip_prefix("primitive.") {
        return (!name.is_empty()).then(|| InstanceField::Primitive(name.into()));
    }
    TransformField::parse(rest).map(InstanceField::Transform)
}

/// Resolves `path` against `c`. Descendant selectors and child primitive
/// attributes are only checked by [`resolve_in_document`].
pub fn resolve_attribute_path(c: &Container, path: &str) -> Result<AttributeSlot, PathError> {
    let unknown = || PathError::UnknownPath(path.into());
    let mismatch = || PathError::PathKindMismatch {
        path: path.into(),
        kind: c.kind().name(),
    };

    if let Some(rest) = path.strip_prefix("instance") {
        let (selector, rest) = if let Some(sel) = rest.strip_prefix('[') {
            let end = sel.find(']').ok_or_else(unknown)?;
            let id = &sel[..end];
            let rest = sel[end + 1..].strip_prefix('.').ok_or_else(unknown)?;
            if id.is_empty() {
                return Err(unknown());
            }
            (Some(ContainerId::from(id)), rest)
        } else {
            (None, rest.strip_prefix('.').ok_or_else(unknown)?)
        };
        let field = parse_instance_field(rest).ok_or_else(unknown)?;
        if c.kind() != ContainerKind::Repeater {
            return Err(mismatch());
        }
        return Ok(AttributeSlot::Instance { selector, field });
    }

    if let Some(name) = path.strip_prefix("primitive.") {
        return match &c.body {
            Body::Basic { primitive } => {
                if attr_type(primitive.kind, name).is_some() {
                    Ok(AttributeSlot::Static(StaticField::Primitive(name.into())))
                } else {
                    Err(unknown())
                }
            }
            _ => Err(mismatch()),
        };
    }
    if path == "body.count" {
        return match c.body {
            Body::Repeater { .. } => Ok(AttributeSlot::Static(StaticField::Count)),
            _ => Err(mismatch()),
        };
    }
    if let Some(rest) = path.strip_prefix("arrangement.") {
        let field = ArrangementField::parse(rest).ok_or_else(unknown)?;
        return match &c.body {
            Body::Repeater { arrangement, .. } if field.read(arrangement).is_some() => {
                Ok(AttributeSlot::Static(StaticField::Arrangement(field)))
            }
            _ => Err(mismatch()),
        };
    }
    match path {
        "coord.origin.x" => return Ok(AttributeSlot::Static(StaticField::OriginX)),
        "coord.origin.y" => return Ok(AttributeSlot::Static(StaticField::OriginY)),
        _ => {}
    }
    if let Some(rest) = path.strip_prefix("transform.") {
        let field = TransformField::parse(rest).ok_or_else(unknown)?;
        return Ok(AttributeSlot::Static(StaticField::Transform(field)));
    }
    Err(unknown())
}

/// Full resolution of `path` on container `id`, including descendant
/// selectors and the attribute schema of the primitive an instance path
/// writes to.
pub fn resolve_in_document(
    doc: &GlyphDocument,
    id: &str,
    path: &str,
) -> Result<AttributeSlot, PathError> {
    let c = doc
        .get(id)
        .ok_or_else(|| PathError::UnknownPath(path.into()))?;
    let slot = resolve_attribute_path(c, path)?;
    if let AttributeSlot::Instance { selector, field } = &slot {
        let Body::Repeater { child, .. } = &c.body else {
            unreachable!("instance paths resolve only on repeaters")
        };
        let target_id = match selector {
            None => child.clone(),
            Some(sel) => {
                if !doc.is_ancestor_or_self(child.as_str(), sel.as_str()) {
                    return Err(PathError::UnknownPath(path.into()));
                }
                sel.clone()
            }
        };
        let target = doc
            .get(target_id.as_str())
            .ok_or_else(|| PathError::UnknownPath(path.into()))?;
        if let InstanceField::Primitive(name) = field {
            match target.primitive() {
                Some(p) if attr_type(p.kind, name).is_some() => {}
                Some(_) => return Err(PathError::UnknownPath(path.into())),
                None => {
                    return Err(PathError::PathKindMismatch {
                        path: path.into(),
                        kind: target.kind().name(),
                    })
                }
            }
        }
    }
    Ok(slot)
}

impl StaticField {
    /// Current value of the field on `c`.
    pub fn read(&self, c: &Container) -> Option<AttrValue> {
        match self {
            StaticField::Primitive(name) => c.primitive()?.attrs.get(name).cloned(),
            StaticField::Count => match c.body {
                Body::Repeater { count, .. } => Some(AttrValue::Num(count as f64)),
                _ => None,
            },
            StaticField::Arrangement(f) => match &c.body {
                Body::Repeater { arrangement, .. } => f.read(arrangement).map(AttrValue::Num),
                _ => None,
            },
            StaticField::OriginX => Some(AttrValue::Num(c.coord.origin.x)),
            StaticField::OriginY => Some(AttrValue::Num(c.coord.origin.y)),
            StaticField::Transform(f) => Some(AttrValue::Num(f.read(&c.transform))),
        }
    }

    /// Writes `value` into `c`, checking its type. Primitive attributes are
    /// checked against the primitive schema.
    pub fn write(&self, c: &mut Container, value: &AttrValue) -> Result<(), String> {
        let num = || {
            value.as_num().filter(|v| v.is_finite()).ok_or_else(|| {
                alloc::format!("expected a finite number, got {}", value.type_name())
            })
        };
        match self {
            StaticField::Primitive(name) => {
                let Body::Basic { primitive } = &mut c.body else {
                    return Err("not a basic container".into());
                };
                super::primitive::check_attr(primitive.kind, name, value)
                    .map_err(|e| e.to_string())?;
                primitive.attrs.insert(name.clone(), value.clone());
            }
            StaticField::Count => {
                let v = num()?;
                if v < 1.0 || v != crate::math::floor(v) || v > u32::MAX as f64 {
                    return Err("count must be a positive integer".into());
                }
                let Body::Repeater { count, .. } = &mut c.body else {
                    return Err("not a repeater".into());
                };
                *count = v as u32;
            }
            StaticField::Arrangement(f) => {
                let v = num()?;
                if matches!(f, ArrangementField::Radius) && v < 0.0 {
                    return Err("radius must be >= 0".into());
                }
                let Body::Repeater { arrangement, .. } = &mut c.body else {
                    return Err("not a repeater".into());
                };
                if !f.write(arrangement, v) {
                    return Err("arrangement has no such field".into());
                }
            }
            StaticField::OriginX => c.coord.origin.x = num()?,
            StaticField::OriginY => c.coord.origin.y = num()?,
            StaticField::Transform(f) => {
                let v = num()?;
                if f.is_scale() && v == 0.0 {
                    return Err("scale factors must be non-zero".into());
                }
                f.write(&mut c.transform, v);
            }
        }
        Ok(())
    }
}

/// Per-instance transform layer built from `instance.*` transform fields.
/// Unset fields keep their identity value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransformPatch {
    pub transform: Transform,
    touched: bool,
}

impl TransformPatch {
    pub fn set(&mut self, field: TransformField, v: f64) {
        field.write(&mut self.transform, v);
        self.touched = true;
    }

    pub fn is_empty(&self) -> bool {
        !self.touched
    }

    pub fn matrix(&self) -> AffineMatrix {
        if self.touched {
            AffineMatrix::from_transform_unchecked(&self.transform)
        } else {
            AffineMatrix::IDENTITY
        }
    }
}

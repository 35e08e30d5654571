//! The GDSL document model: containers, coordinate systems, transforms and
//! data bindings, keyed by caller-supplied ids.

mod attr_path;
mod primitive;
mod validate;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::borrow::Borrow;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

pub use attr_path::{
    resolve_attribute_path, resolve_in_document, ArrangementField, AttributeSlot, InstanceField,
    PathError, StaticField, TransformField, TransformPatch,
};
pub use primitive::{
    attr_type, check_attr, is_valid_color, named_color_hex, AttrError, AttrType, AttrValue,
    Primitive, PrimitiveKind,
};
pub(crate) use validate::relation_order;
pub use validate::{document_warnings, validate_document, Violation, Warning};

/// Identifier of a container, unique within a document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContainerId(String);

impl ContainerId {
    pub fn new(value: impl Into<String>) -> Self {
        ContainerId(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Non-empty and limited to `[A-Za-z0-9_ -]`.
    pub fn is_well_formed(&self) -> bool {
        !self.0.is_empty()
            && self
                .0
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == ' ' || c == '-')
    }
}

impl From<&str> for ContainerId {
    fn from(s: &str) -> Self {
        ContainerId(s.into())
    }
}

impl From<String> for ContainerId {
    fn from(s: String) -> Self {
        ContainerId(s)
    }
}

impl Borrow<str> for ContainerId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ContainerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A 2-vector in document units. `+y` points down.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        crate::math::hypot(self.x, self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordKind {
    #[default]
    Cartesian,
    Polar,
}

impl CoordKind {
    pub fn name(self) -> &'static str {
        match self {
            CoordKind::Cartesian => "cartesian",
            CoordKind::Polar => "polar",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CoordinateSystem {
    pub kind: CoordKind,
    /// Where the container's local `(0, 0)` sits in its own pre-transform frame.
    /// Polar repetitions rotate about this point.
    #[serde(default)]
    pub origin: Vec2,
}

impl CoordinateSystem {
    pub fn cartesian() -> Self {
        CoordinateSystem::default()
    }

    pub fn polar() -> Self {
        CoordinateSystem {
            kind: CoordKind::Polar,
            origin: Vec2::ZERO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Rotation {
    #[serde(default)]
    pub center: Vec2,
    #[serde(default)]
    pub angle_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub sx: f64,
    pub sy: f64,
}

impl Default for Scale {
    fn default() -> Self {
        Scale { sx: 1.0, sy: 1.0 }
    }
}

/// Parent-relative transform. A local point `p` maps to
/// `translate(rotate(scale(p)))`: scale about the local origin, rotate about
/// `rotate.center`, then translate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Transform {
    #[serde(default)]
    pub translate: Vec2,
    #[serde(default)]
    pub rotate: Rotation,
    #[serde(default)]
    pub scale: Scale,
}

impl Transform {
    pub fn identity() -> Self {
        Transform::default()
    }

    pub fn translation(x: f64, y: f64) -> Self {
        Transform {
            translate: Vec2::new(x, y),
            ..Transform::default()
        }
    }

    pub fn rotation(angle_deg: f64, center: Vec2) -> Self {
        Transform {
            rotate: Rotation { center, angle_deg },
            ..Transform::default()
        }
    }

    pub fn scaling(sx: f64, sy: f64) -> Self {
        Transform {
            scale: Scale { sx, sy },
            ..Transform::default()
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Transform::identity()
    }

    fn is_finite(&self) -> bool {
        self.translate.is_finite()
            && self.rotate.center.is_finite()
            && self.rotate.angle_deg.is_finite()
            && self.scale.sx.is_finite()
            && self.scale.sy.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrangementMode {
    Uniform,
    Stacked,
    Flexible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UniformParams {
    Cartesian {
        step: Vec2,
    },
    Polar {
        radius: f64,
        start_angle_deg: f64,
        delta_angle_deg: f64,
    },
}

/// How a repeater places its instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawArrangement", into = "RawArrangement")]
pub enum Arrangement {
    Uniform(UniformParams),
    Stacked {
        axis: Axis,
        gap: f64,
    },
    /// Per-instance transforms come from `instance.*` bindings.
    Flexible,
}

impl Arrangement {
    pub fn cartesian(step: Vec2) -> Self {
        Arrangement::Uniform(UniformParams::Cartesian { step })
    }

    pub fn polar(radius: f64, start_angle_deg: f64, delta_angle_deg: f64) -> Self {
        Arrangement::Uniform(UniformParams::Polar {
            radius,
            start_angle_deg,
            delta_angle_deg,
        })
    }

    pub fn mode(&self) -> ArrangementMode {
        match self {
            Arrangement::Uniform(_) => ArrangementMode::Uniform,
            Arrangement::Stacked { .. } => ArrangementMode::Stacked,
            Arrangement::Flexible => ArrangementMode::Flexible,
        }
    }

    /// Whether the parameters fit a repeater with the given coordinate kind.
    pub fn matches_coord(&self, kind: CoordKind) -> bool {
        matches!(
            (self, kind),
            (
                Arrangement::Uniform(UniformParams::Cartesian { .. }),
                CoordKind::Cartesian
            ) | (
                Arrangement::Uniform(UniformParams::Polar { .. }),
                CoordKind::Polar
            ) | (Arrangement::Stacked { .. }, CoordKind::Cartesian)
                | (Arrangement::Flexible, _)
        )
    }

    fn is_finite(&self) -> bool {
        match *self {
            Arrangement::Uniform(UniformParams::Cartesian { step }) => step.is_finite(),
            Arrangement::Uniform(UniformParams::Polar {
                radius,
                start_angle_deg,
                delta_angle_deg,
            }) => radius.is_finite() && start_angle_deg.is_finite() && delta_angle_deg.is_finite(),
            Arrangement::Stacked { gap, .. } => gap.is_finite(),
            Arrangement::Flexible => true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawArrangement {
    mode: ArrangementMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    step: Option<Vec2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start_angle_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta_angle_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    axis: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gap: Option<f64>,
}

impl TryFrom<RawArrangement> for Arrangement {
    type Error = &'static str;

    fn try_from(raw: RawArrangement) -> Result<Self, Self::Error> {
        match raw.mode {
            ArrangementMode::Uniform => match (raw.step, raw.delta_angle_deg) {
                (Some(step), None) if raw.radius.is_none() && raw.start_angle_deg.is_none() => {
                    Ok(Arrangement::cartesian(step))
                }
                (None, Some(delta)) => Ok(Arrangement::polar(
                    raw.radius.unwrap_or(0.0),
                    raw.start_angle_deg.unwrap_or(0.0),
                    delta,
                )),
                _ => Err("uniform arrangement needs either `step` or `deltaAngleDeg`"),
            },
            ArrangementMode::Stacked => Ok(Arrangement::Stacked {
                axis: raw.axis.ok_or("stacked arrangement needs `axis`")?,
                gap: raw.gap.unwrap_or(0.0),
            }),
            ArrangementMode::Flexible => Ok(Arrangement::Flexible),
        }
    }
}

impl From<Arrangement> for RawArrangement {
    fn from(a: Arrangement) -> Self {
        let mut raw = RawArrangement {
            mode: a.mode(),
            step: None,
            radius: None,
            start_angle_deg: None,
            delta_angle_deg: None,
            axis: None,
            gap: None,
        };
        match a {
            Arrangement::Uniform(UniformParams::Cartesian { step }) => raw.step = Some(step),
            Arrangement::Uniform(UniformParams::Polar {
                radius,
                start_angle_deg,
                delta_angle_deg,
            }) => {
                raw.radius = Some(radius);
                raw.start_angle_deg = Some(start_angle_deg);
                raw.delta_angle_deg = Some(delta_angle_deg);
            }
            Arrangement::Stacked { axis, gap } => {
                raw.axis = Some(axis);
                raw.gap = Some(gap);
            }
            Arrangement::Flexible => {}
        }
        raw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelType {
    Top,
    Bottom,
    Left,
    Right,
    Center,
}

impl RelType {
    pub fn name(self) -> &'static str {
        match self {
            RelType::Top => "top",
            RelType::Bottom => "bottom",
            RelType::Left => "left",
            RelType::Right => "right",
            RelType::Center => "center",
        }
    }

    pub fn parse(s: &str) -> Option<RelType> {
        Some(match s {
            "top" => RelType::Top,
            "bottom" => RelType::Bottom,
            "left" => RelType::Left,
            "right" => RelType::Right,
            "center" => RelType::Center,
            _ => return None,
        })
    }
}

/// Anchor `source` against `target`: the source's anchor equals the target's
/// anchor plus `distance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpatialRelation {
    pub source: ContainerId,
    pub target: ContainerId,
    pub rel_type: RelType,
    #[serde(default)]
    pub distance: Vec2,
}

/// A bound datum: a number or a string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Num(f64),
    Str(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DataSource {
    Values(Vec<Scalar>),
    Expression(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearScale {
    pub domain: [f64; 2],
    pub range: [f64; 2],
}

impl LinearScale {
    pub fn apply(&self, v: f64) -> f64 {
        let [d0, d1] = self.domain;
        let [r0, r1] = self.range;
        if v == d0 {
            return r0;
        }
        if v == d1 {
            return r1;
        }
        r0 + (v - d0) * (r1 - r0) / (d1 - d0)
    }

    pub fn is_valid(&self) -> bool {
        self.domain[0] != self.domain[1]
            && self
                .domain
                .iter()
                .chain(self.range.iter())
                .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DataBinding {
    pub attribute_path: String,
    pub source: DataSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<LinearScale>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum Body {
    Basic {
        primitive: Primitive,
    },
    Repeater {
        child: ContainerId,
        count: u32,
        arrangement: Arrangement,
    },
    Compositor {
        children: Vec<ContainerId>,
        #[serde(default)]
        relations: Vec<SpatialRelation>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ContainerKind {
    Basic,
    Repeater,
    Compositor,
}

impl ContainerKind {
    pub fn name(self) -> &'static str {
        match self {
            ContainerKind::Basic => "basic",
            ContainerKind::Repeater => "repeater",
            ContainerKind::Compositor => "compositor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Container {
    pub id: ContainerId,
    pub body: Body,
    #[serde(default)]
    pub coord: CoordinateSystem,
    #[serde(default)]
    pub transform: Transform,
    #[serde(default)]
    pub bindings: Vec<DataBinding>,
}

impl Container {
    pub fn new(id: impl Into<ContainerId>, body: Body) -> Self {
        Container {
            id: id.into(),
            body,
            coord: CoordinateSystem::default(),
            transform: Transform::identity(),
            bindings: Vec::new(),
        }
    }

    pub fn kind(&self) -> ContainerKind {
        match self.body {
            Body::Basic { .. } => ContainerKind::Basic,
            Body::Repeater { .. } => ContainerKind::Repeater,
            Body::Compositor { .. } => ContainerKind::Compositor,
        }
    }

    /// Direct children in body order.
    pub fn children(&self) -> Vec<&ContainerId> {
        match &self.body {
            Body::Basic { .. } => Vec::new(),
            Body::Repeater { child, .. } => alloc::vec![child],
            Body::Compositor { children, .. } => children.iter().collect(),
        }
    }

    pub fn primitive(&self) -> Option<&Primitive> {
        match &self.body {
            Body::Basic { primitive } => Some(primitive),
            _ => None,
        }
    }

    pub fn binding(&self, path: &str) -> Option<&DataBinding> {
        self.bindings.iter().find(|b| b.attribute_path == path)
    }
}

/// The root container tree plus the id registry.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GlyphDocument {
    /// `None` only for an empty document.
    #[serde(default)]
    pub root: Option<ContainerId>,
    #[serde(default)]
    pub containers: BTreeMap<ContainerId, Container>,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub version: u64,
}

impl GlyphDocument {
    pub fn new() -> Self {
        GlyphDocument::default()
    }

    pub fn with_seed(rng_seed: u64) -> Self {
        GlyphDocument {
            rng_seed,
            ..GlyphDocument::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.containers.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Container> {
        self.containers.get(id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut Container> {
        self.containers.get_mut(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.containers.contains_key(id)
    }

    /// The unique parent of `id`, if any. Assumes a tree.
    pub fn parent_of(&self, id: &str) -> Option<&ContainerId> {
        self.containers
            .values()
            .find(|c| c.children().iter().any(|ch| ch.as_str() == id))
            .map(|c| &c.id)
    }

    /// Whether `ancestor` is `id` or contains it transitively.
    pub fn is_ancestor_or_self(&self, ancestor: &str, id: &str) -> bool {
        let mut stack: Vec<&str> = alloc::vec![ancestor];
        let mut seen = alloc::collections::BTreeSet::new();
        while let Some(cur) = stack.pop() {
            if cur == id {
                return true;
            }
            if !seen.insert(cur) {
                continue;
            }
            if let Some(c) = self.containers.get(cur) {
                stack.extend(c.children().into_iter().map(|ch| ch.as_str()));
            }
        }
        false
    }

    /// Whether `id` is reachable from the root.
    pub fn is_attached(&self, id: &str) -> bool {
        match &self.root {
            Some(root) => self.is_ancestor_or_self(root.as_str(), id),
            None => false,
        }
    }

    /// Containers in pre-order from the root, followed by unattached
    /// subtrees in id order.
    pub fn ordered_ids(&self) -> Vec<&ContainerId> {
        fn visit<'a>(
            doc: &'a GlyphDocument,
            start: &'a ContainerId,
            seen: &mut alloc::collections::BTreeSet<&'a str>,
            out: &mut Vec<&'a ContainerId>,
        ) {
            let mut stack = alloc::vec![start];
            while let Some(id) = stack.pop() {
                let Some(c) = doc.containers.get(id.as_str()) else {
                    continue;
                };
                if !seen.insert(c.id.as_str()) {
                    continue;
                }
                out.push(&c.id);
                let mut kids = c.children();
                kids.reverse();
                stack.extend(kids);
            }
        }
        let mut out = Vec::new();
        let mut seen = alloc::collections::BTreeSet::new();
        if let Some(root) = &self.root {
            visit(self, root, &mut seen, &mut out);
        }
        let parented: alloc::collections::BTreeSet<&str> = self
            .containers
            .values()
            .flat_map(|c| c.children().into_iter().map(|ch| ch.as_str()))
            .collect();
        for id in self.containers.keys() {
            if !parented.contains(id.as_str()) {
                visit(self, id, &mut seen, &mut out);
            }
        }
        // whatever is left sits on a cycle
        for id in self.containers.keys() {
            if !seen.contains(id.as_str()) {
                visit(self, id, &mut seen, &mut out);
            }
        }
        out
    }
}

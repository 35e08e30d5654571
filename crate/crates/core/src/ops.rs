//! The five atomic edit operations, applied transactionally, and the edit
//! history that replays them.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::databind::parse_expression;
use crate::geometry::node_bbox;
use crate::layout::expand_container;
use crate::model::{
    named_color_hex, resolve_attribute_path, resolve_in_document, validate_document, Arrangement,
    ArrangementMode, AttrValue, AttributeSlot, Axis, Body, Container, ContainerId, CoordKind,
    CoordinateSystem, DataBinding, DataSource, GlyphDocument, LinearScale, Primitive,
    PrimitiveKind, SpatialRelation, Transform, Vec2, Violation,
};

/// Arrangement argument of `CreateRepeater`: a bare mode picks defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArrangementSpec {
    Mode(ArrangementMode),
    Full(Arrangement),
}

impl Default for ArrangementSpec {
    fn default() -> Self {
        ArrangementSpec::Mode(ArrangementMode::Uniform)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all_fields = "camelCase")]
pub enum Operation {
    CreateBasic {
        id: ContainerId,
        primitive_kind: PrimitiveKind,
        #[serde(default)]
        params: BTreeMap<String, AttrValue>,
        #[serde(default)]
        coord: CoordinateSystem,
        #[serde(default)]
        transform: Transform,
    },
    CreateRepeater {
        id: ContainerId,
        target_id: ContainerId,
        coord_kind: CoordKind,
        count: u32,
        #[serde(default)]
        arrangement: ArrangementSpec,
    },
    CreateCompositor {
        id: ContainerId,
        children: Vec<ContainerId>,
        #[serde(default)]
        relations: Vec<SpatialRelation>,
    },
    ModifyParams {
        target_id: ContainerId,
        params: BTreeMap<String, AttrValue>,
    },
    EncodeData {
        target_id: ContainerId,
        attribute_path: String,
        data: DataSource,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<LinearScale>,
    },
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::CreateBasic { .. } => "CreateBasic",
            Operation::CreateRepeater { .. } => "CreateRepeater",
            Operation::CreateCompositor { .. } => "CreateCompositor",
            Operation::ModifyParams { .. } => "ModifyParams",
            Operation::EncodeData { .. } => "EncodeData",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OpError {
    #[error("id `{0}` is empty or malformed")]
    InvalidId(ContainerId),
    #[error("id `{0}` is already in use")]
    DuplicateId(ContainerId),
    #[error("no container `{0}`")]
    UnknownTarget(ContainerId),
    #[error("no child container `{0}`")]
    UnknownChild(ContainerId),
    #[error("adopting `{0}` would create a containment cycle")]
    WouldCreateCycle(ContainerId),
    #[error("`{0}` already has a parent elsewhere in the tree")]
    AlreadyAttached(ContainerId),
    #[error("bad primitive parameters: {0}")]
    BadPrimitiveParams(String),
    #[error("repeat count must be >= 1")]
    BadCount,
    #[error("arrangement does not fit a {0} coordinate system")]
    ArrangementMismatch(&'static str),
    #[error("compositor needs at least one child")]
    EmptyChildren,
    #[error("child `{0}` listed twice")]
    DuplicateChild(ContainerId),
    #[error("relation member `{0}` is not among the children")]
    RelationOutsideChildren(ContainerId),
    #[error("relation from `{0}` to itself")]
    SelfRelation(ContainerId),
    #[error("spatial relations form a cycle")]
    RelationCycle,
    #[error("`{path}`: {message}")]
    UnknownPath { path: String, message: String },
    #[error("`{path}`: {message}")]
    TypeMismatch { path: String, message: String },
    #[error("no data to encode")]
    EmptyData,
    #[error("bad expression: {0}")]
    BadExpression(String),
    #[error("scale domain must have distinct finite endpoints")]
    BadScale,
    #[error("result violates a document invariant: {0}")]
    Invalid(Violation),
}

/// A failed application: the operation, the failing field and the reason.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{} failed on `{field}`: {error}", op.name())]
pub struct ApplyError {
    pub op: Box<Operation>,
    pub field: String,
    pub error: OpError,
}

fn fail(op: &Operation, field: &str, error: OpError) -> ApplyError {
    ApplyError {
        op: Box::new(op.clone()),
        field: field.into(),
        error,
    }
}

/// Applies `op` to a copy of `doc` and returns the copy with its version
/// bumped. `doc` is never modified.
pub fn apply(doc: &GlyphDocument, op: &Operation) -> Result<GlyphDocument, ApplyError> {
    let mut next = doc.clone();
    match op {
        Operation::CreateBasic {
            id,
            primitive_kind,
            params,
            coord,
            transform,
        } => create_basic(&mut next, id, *primitive_kind, params, *coord, *transform),
        Operation::CreateRepeater {
            id,
            target_id,
            coord_kind,
            count,
            arrangement,
        } => create_repeater(&mut next, id, target_id, *coord_kind, *count, *arrangement),
        Operation::CreateCompositor {
            id,
            children,
            relations,
        } => create_compositor(&mut next, id, children, relations),
        Operation::ModifyParams { target_id, params } => {
            modify_params(&mut next, target_id, params)
        }
        Operation::EncodeData {
            target_id,
            attribute_path,
            data,
            scale,
        } => encode_data(&mut next, target_id, attribute_path, data, *scale),
    }
    .map_err(|(field, e)| fail(op, field, e))?;
    if let Some(v) = validate_document(&next).into_iter().next() {
        return Err(fail(op, "document", OpError::Invalid(v)));
    }
    next.version = doc.version + 1;
    Ok(next)
}

type OpResult = Result<(), (&'static str, OpError)>;

fn check_new_id(doc: &GlyphDocument, id: &ContainerId) -> OpResult {
    if !id.is_well_formed() {
        return Err(("id", OpError::InvalidId(id.clone())));
    }
    if doc.contains(id.as_str()) {
        return Err(("id", OpError::DuplicateId(id.clone())));
    }
    Ok(())
}

/// Basic CSS color names given for `fill` or `stroke` are stored as hex.
fn color_to_hex(name: &str, value: &AttrValue) -> AttrValue {
    match value {
        AttrValue::Str(s) if matches!(name, "fill" | "stroke") => match named_color_hex(s) {
            Some(hex) => AttrValue::Str(hex.into()),
            None => value.clone(),
        },
        _ => value.clone(),
    }
}

fn create_basic(
    doc: &mut GlyphDocument,
    id: &ContainerId,
    kind: PrimitiveKind,
    params: &BTreeMap<String, AttrValue>,
    coord: CoordinateSystem,
    transform: Transform,
) -> OpResult {
    check_new_id(doc, id)?;
    let mut primitive = Primitive::new(kind);
    for (k, v) in params {
        let name = k.strip_prefix("primitive.").unwrap_or(k);
        primitive.attrs.insert(name.into(), color_to_hex(name, v));
    }
    let position: &[&str] = match kind {
        PrimitiveKind::Rect | PrimitiveKind::Image | PrimitiveKind::Text => &["x", "y"],
        PrimitiveKind::Circle => &["cx", "cy"],
        _ => &[],
    };
    for name in position {
        primitive
            .attrs
            .entry((*name).into())
            .or_insert(AttrValue::Num(0.0));
    }
    primitive
        .validate()
        .map_err(|e| ("params", OpError::BadPrimitiveParams(e.to_string())))?;
    let mut c = Container::new(id.clone(), Body::Basic { primitive });
    c.coord = coord;
    c.transform = transform;
    let was_empty = doc.is_empty();
    doc.containers.insert(id.clone(), c);
    if was_empty {
        doc.root = Some(id.clone());
    }
    Ok(())
}

/// Puts `new` where `old` sits: in its parent's body and relations, or as
/// the root.
fn take_slot(doc: &mut GlyphDocument, old: &ContainerId, new: &ContainerId) {
    if let Some(parent) = doc.parent_of(old.as_str()).cloned() {
        let p = doc
            .containers
            .get_mut(parent.as_str())
            .expect("parent exists");
        match &mut p.body {
            Body::Repeater { child, .. } => *child = new.clone(),
            Body::Compositor {
                children,
                relations,
            } => {
                for ch in children.iter_mut().filter(|ch| *ch == old) {
                    *ch = new.clone();
                }
                for r in relations.iter_mut() {
                    if r.source == *old {
                        r.source = new.clone();
                    }
                    if r.target == *old {
                        r.target = new.clone();
                    }
                }
            }
            Body::Basic { .. } => {}
        }
        // instance paths that addressed `old` as the repeated child now need
        // an explicit selector, since `new` sits in between
        if matches!(p.body, Body::Repeater { .. }) {
            for b in &mut p.bindings {
                if let Some(rest) = b.attribute_path.strip_prefix("instance.") {
                    b.attribute_path = alloc::format!("instance[{old}].{rest}");
                }
            }
        }
    } else if doc.root.as_ref() == Some(old) {
        doc.root = Some(new.clone());
    }
}

/// Default arrangement parameters for a bare mode.
pub fn default_arrangement(
    doc: &GlyphDocument,
    target: &str,
    kind: CoordKind,
    count: u32,
    mode: ArrangementMode,
) -> Arrangement {
    match (mode, kind) {
        (ArrangementMode::Uniform, CoordKind::Polar) => {
            Arrangement::polar(0.0, 0.0, 360.0 / count.max(1) as f64)
        }
        (ArrangementMode::Uniform, CoordKind::Cartesian) => {
            let width = subtree_bbox(doc, target).map_or(0.0, |b| b.width());
            Arrangement::cartesian(Vec2::new(width, 0.0))
        }
        (ArrangementMode::Stacked, _) => Arrangement::Stacked {
            axis: Axis::X,
            gap: 0.0,
        },
        (ArrangementMode::Flexible, _) => Arrangement::Flexible,
    }
}

/// Bounds of a container's expanded subtree in its parent's frame.
pub fn subtree_bbox(doc: &GlyphDocument, id: &str) -> Option<crate::geometry::BBox> {
    let node = expand_container(doc, id).ok()?;
    node_bbox(&node).ok()
}

fn create_repeater(
    doc: &mut GlyphDocument,
    id: &ContainerId,
    target: &ContainerId,
    kind: CoordKind,
    count: u32,
    spec: ArrangementSpec,
) -> OpResult {
    if id == target {
        return Err(("targetId", OpError::WouldCreateCycle(target.clone())));
    }
    check_new_id(doc, id)?;
    if !doc.contains(target.as_str()) {
        return Err(("targetId", OpError::UnknownTarget(target.clone())));
    }
    if count < 1 {
        return Err(("count", OpError::BadCount));
    }
    let arrangement = match spec {
        ArrangementSpec::Mode(mode) => default_arrangement(doc, target.as_str(), kind, count, mode),
        ArrangementSpec::Full(a) => a,
    };
    if !arrangement.matches_coord(kind) {
        let name = match kind {
            CoordKind::Cartesian => "cartesian",
            CoordKind::Polar => "polar",
        };
        return Err(("arrangement", OpError::ArrangementMismatch(name)));
    }
    take_slot(doc, target, id);
    let mut c = Container::new(
        id.clone(),
        Body::Repeater {
            child: target.clone(),
            count,
            arrangement,
        },
    );
    c.coord = CoordinateSystem {
        kind,
        origin: Vec2::ZERO,
    };
    doc.containers.insert(id.clone(), c);
    Ok(())
}

fn create_compositor(
    doc: &mut GlyphDocument,
    id: &ContainerId,
    children: &[ContainerId],
    relations: &[SpatialRelation],
) -> OpResult {
    if children.contains(id) {
        return Err(("children", OpError::WouldCreateCycle(id.clone())));
    }
    check_new_id(doc, id)?;
    if children.is_empty() {
        return Err(("children", OpError::EmptyChildren));
    }
    for (i, ch) in children.iter().enumerate() {
        if children[..i].contains(ch) {
            return Err(("children", OpError::DuplicateChild(ch.clone())));
        }
        if !doc.contains(ch.as_str()) {
            return Err(("children", OpError::UnknownChild(ch.clone())));
        }
    }
    for a in children {
        for b in children {
            if a != b && doc.is_ancestor_or_self(a.as_str(), b.as_str()) {
                return Err(("children", OpError::WouldCreateCycle(b.clone())));
            }
        }
    }
    for r in relations {
        for m in [&r.source, &r.target] {
            if !children.contains(m) {
                return Err(("relations", OpError::RelationOutsideChildren(m.clone())));
            }
        }
        if r.source == r.target {
            return Err(("relations", OpError::SelfRelation(r.source.clone())));
        }
    }
    if crate::model::relation_order(children, relations).is_none() {
        return Err(("relations", OpError::RelationCycle));
    }

    // the first child that sits in the tree hands its slot to the compositor;
    // other attached children may only be its siblings in a compositor
    let is_placed = |doc: &GlyphDocument, ch: &ContainerId| {
        doc.parent_of(ch.as_str()).is_some() || doc.root.as_ref() == Some(ch)
    };
    let slot_holder = children.iter().find(|ch| is_placed(doc, ch)).cloned();
    if let Some(holder) = &slot_holder {
        let holder_parent = doc.parent_of(holder.as_str()).cloned();
        for ch in children
            .iter()
            .filter(|ch| *ch != holder && is_placed(doc, ch))
        {
            let parent = doc.parent_of(ch.as_str()).cloned();
            let sibling = parent.is_some() && parent == holder_parent;
            let detachable = sibling
                && match &doc.containers[parent.as_ref().unwrap().as_str()].body {
                    Body::Compositor { relations, .. } => {
                        !relations.iter().any(|r| r.source == *ch || r.target == *ch)
                    }
                    _ => false,
                };
            if !detachable {
                return Err(("children", OpError::AlreadyAttached(ch.clone())));
            }
        }
        for ch in children.iter().filter(|ch| *ch != holder) {
            if let Some(parent) = doc.parent_of(ch.as_str()).cloned() {
                if let Body::Compositor { children, .. } = &mut doc
                    .containers
                    .get_mut(parent.as_str())
                    .expect("parent exists")
                    .body
                {
                    children.retain(|c| c != ch);
                }
            }
        }
        take_slot(doc, holder, id);
    } else if doc.root.is_none() {
        doc.root = Some(id.clone());
    }
    doc.containers.insert(
        id.clone(),
        Container::new(
            id.clone(),
            Body::Compositor {
                children: children.to_vec(),
                relations: relations.to_vec(),
            },
        ),
    );
    Ok(())
}

/// Expands shorthand paths: a bare attribute name means `primitive.<name>` on
/// a basic container and `instance.primitive.<name>` on a repeater of one.
pub fn normalize_path(doc: &GlyphDocument, target: &str, path: &str) -> String {
    if path.contains('.') {
        return path.into();
    }
    match doc.get(target).map(|c| &c.body) {
        Some(Body::Basic { .. }) => alloc::format!("primitive.{path}"),
        Some(Body::Repeater { .. }) => alloc::format!("instance.primitive.{path}"),
        _ => path.into(),
    }
}

fn modify_params(
    doc: &mut GlyphDocument,
    target: &ContainerId,
    params: &BTreeMap<String, AttrValue>,
) -> OpResult {
    let Some(original) = doc.get(target.as_str()) else {
        return Err(("targetId", OpError::UnknownTarget(target.clone())));
    };
    let mut c = original.clone();
    for (raw, value) in params {
        let path = normalize_path(doc, target.as_str(), raw);
        let slot = resolve_attribute_path(&c, &path).map_err(|e| {
            (
                "params",
                OpError::UnknownPath {
                    path: path.clone(),
                    message: e.to_string(),
                },
            )
        })?;
        let AttributeSlot::Static(field) = slot else {
            return Err((
                "params",
                OpError::UnknownPath {
                    path,
                    message: "per-instance values are set with EncodeData".into(),
                },
            ));
        };
        let leaf = path.rsplit('.').next().unwrap_or(&path);
        field
            .write(&mut c, &color_to_hex(leaf, value))
            .map_err(|message| {
                (
                    "params",
                    OpError::TypeMismatch {
                        path: path.clone(),
                        message,
                    },
                )
            })?;
        c.bindings.retain(|b| b.attribute_path != path);
    }
    doc.containers.insert(target.clone(), c);
    Ok(())
}

fn encode_data(
    doc: &mut GlyphDocument,
    target: &ContainerId,
    raw_path: &str,
    data: &DataSource,
    scale: Option<LinearScale>,
) -> OpResult {
    if !doc.contains(target.as_str()) {
        return Err(("targetId", OpError::UnknownTarget(target.clone())));
    }
    let path = normalize_path(doc, target.as_str(), raw_path);
    resolve_in_document(doc, target.as_str(), &path).map_err(|e| {
        (
            "attributePath",
            OpError::UnknownPath {
                path: path.clone(),
                message: e.to_string(),
            },
        )
    })?;
    match data {
        DataSource::Values(v) if v.is_empty() => return Err(("data", OpError::EmptyData)),
        DataSource::Expression(text) => {
            parse_expression(text).map_err(|e| ("data", OpError::BadExpression(e.to_string())))?;
        }
        _ => {}
    }
    if let Some(s) = &scale {
        if !s.is_valid() {
            return Err(("scale", OpError::BadScale));
        }
    }
    let binding = DataBinding {
        attribute_path: path.clone(),
        source: data.clone(),
        scale,
    };
    let c = doc.get_mut(target.as_str()).expect("checked above");
    match c.bindings.iter_mut().find(|b| b.attribute_path == path) {
        Some(existing) => *existing = binding,
        None => c.bindings.push(binding),
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HistoryEntry {
    pub op: Operation,
    pub version_before: u64,
    pub version_after: u64,
}

/// Linear log of applied operations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EditHistory {
    pub entries: Vec<HistoryEntry>,
}

impl EditHistory {
    pub fn new() -> Self {
        EditHistory::default()
    }

    /// Applies `op` and records it on success.
    pub fn apply(
        &mut self,
        doc: &GlyphDocument,
        op: &Operation,
    ) -> Result<GlyphDocument, ApplyError> {
        let next = apply(doc, op)?;
        self.entries.push(HistoryEntry {
            op: op.clone(),
            version_before: doc.version,
            version_after: next.version,
        });
        Ok(next)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("history diverges at entry {index}")]
pub struct ReplayDivergence {
    pub index: usize,
    pub cause: Option<ApplyError>,
}

/// Re-applies every history entry to `initial`, checking recorded versions.
pub fn replay(
    initial: &GlyphDocument,
    history: &EditHistory,
) -> Result<GlyphDocument, ReplayDivergence> {
    let mut doc = initial.clone();
    for (index, e) in history.entries.iter().enumerate() {
        if doc.version != e.version_before {
            return Err(ReplayDivergence { index, cause: None });
        }
        doc = apply(&doc, &e.op).map_err(|err| ReplayDivergence {
            index,
            cause: Some(err),
        })?;
        if doc.version != e.version_after {
            return Err(ReplayDivergence { index, cause: None });
        }
    }
    Ok(doc)
}

/// Applies `ops` in order, all or nothing; on failure returns the index of
/// the failing operation.
pub fn apply_all(
    doc: &GlyphDocument,
    ops: &[Operation],
    history: &mut EditHistory,
) -> Result<GlyphDocument, (usize, ApplyError)> {
    let mut cur = doc.clone();
    let mut staged = history.clone();
    for (i, op) in ops.iter().enumerate() {
        cur = staged.apply(&cur, op).map_err(|e| (i, e))?;
    }
    *history = staged;
    Ok(cur)
}

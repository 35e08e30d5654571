//! Instantiation: expands the container tree into a scene of groups and
//! leaves, placing repeater instances and solving compositor relations.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::databind::{binding_rng, materialize_binding, BindError};
use crate::geometry::{
    anchor_point, compose, node_bbox, node_bbox_under, AffineMatrix, AnchorName, BBox,
    GeometryError,
};
use crate::model::{
    resolve_attribute_path, Arrangement, AttrValue, AttributeSlot, Axis, Body, Container,
    ContainerId, CoordKind, CoordinateSystem, GlyphDocument, InstanceField, Primitive,
    PrimitiveKind, RelType, Scalar, TransformField, TransformPatch, UniformParams, Vec2, Violation,
};

/// Tolerance for agreeing placements of a source bound by several relations.
pub const OVERCONSTRAINED_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGroup {
    /// Id of the container this group was expanded from.
    pub name: ContainerId,
    pub matrix: AffineMatrix,
    pub children: Vec<SceneNode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneLeaf {
    pub container: ContainerId,
    /// Attributes after static and per-instance bindings.
    pub primitive: Primitive,
    pub matrix: AffineMatrix,
    /// Text placed by a `center` relation is anchored at its middle.
    pub text_centered: bool,
}

/// A node of the flattened render tree. Matrices are relative to the parent
/// node.
#[derive(Debug, Clone, PartialEq)]
pub enum SceneNode {
    Group(SceneGroup),
    Leaf(SceneLeaf),
}

impl SceneNode {
    pub fn matrix(&self) -> &AffineMatrix {
        match self {
            SceneNode::Group(g) => &g.matrix,
            SceneNode::Leaf(l) => &l.matrix,
        }
    }

    fn matrix_mut(&mut self) -> &mut AffineMatrix {
        match self {
            SceneNode::Group(g) => &mut g.matrix,
            SceneNode::Leaf(l) => &mut l.matrix,
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            SceneNode::Leaf(_) => 1,
            SceneNode::Group(g) => g.children.iter().map(SceneNode::leaf_count).sum(),
        }
    }

    pub fn group_count(&self) -> usize {
        match self {
            SceneNode::Leaf(_) => 0,
            SceneNode::Group(g) => 1 + g.children.iter().map(SceneNode::group_count).sum::<usize>(),
        }
    }

    /// Visits every leaf with its matrix composed from the root of this
    /// subtree (this node's own matrix included).
    pub fn for_each_leaf(&self, f: &mut impl FnMut(&SceneLeaf, &AffineMatrix)) {
        fn walk(
            n: &SceneNode,
            outer: &AffineMatrix,
            f: &mut impl FnMut(&SceneLeaf, &AffineMatrix),
        ) {
            let m = compose(outer, n.matrix());
            match n {
                SceneNode::Leaf(l) => f(l, &m),
                SceneNode::Group(g) => {
                    for ch in &g.children {
                        walk(ch, &m, f);
                    }
                }
            }
        }
        walk(self, &AffineMatrix::IDENTITY, f);
    }
}

/// The instantiated document; `root` is `None` for an empty document.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub root: Option<SceneNode>,
}

impl Scene {
    pub fn leaf_count(&self) -> usize {
        self.root.as_ref().map_or(0, SceneNode::leaf_count)
    }

    pub fn group_count(&self) -> usize {
        self.root.as_ref().map_or(0, SceneNode::group_count)
    }

    /// Leaves with their world matrices, in document order.
    pub fn world_leaves(&self) -> Vec<(SceneLeaf, AffineMatrix)> {
        let mut out = Vec::new();
        if let Some(r) = &self.root {
            r.for_each_leaf(&mut |l, m| out.push((l.clone(), *m)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LayoutError {
    #[error("document is invalid: {0}")]
    InvalidDocument(Violation),
    #[error("unknown container `{0}`")]
    UnknownContainer(ContainerId),
    #[error("`{0}` is not a repeater")]
    NotARepeater(ContainerId),
    #[error("`{0}` is not a compositor")]
    NotACompositor(ContainerId),
    #[error("stacked placement of instance {index} needs the previous instance's bounds")]
    MissingPrevBBox { index: u32 },
    #[error("`{0}`: stacked arrangement is only supported in cartesian coordinates")]
    UnsupportedArrangement(ContainerId),
    #[error("`{container}`: relations of `{source_id}` disagree")]
    OverConstrained {
        container: ContainerId,
        source_id: ContainerId,
    },
    #[error("`{0}`: spatial relations form a cycle")]
    RelationCycle(ContainerId),
    #[error("`{container}`: binding `{path}`: {error}")]
    Binding {
        container: ContainerId,
        path: String,
        error: BindError,
    },
    #[error("`{container}`: binding `{path}` produced an unusable value: {reason}")]
    BadBoundValue {
        container: ContainerId,
        path: String,
        reason: String,
    },
    #[error("`{container}`: {error}")]
    Geometry {
        container: ContainerId,
        error: GeometryError,
    },
    #[error("`{container}` instance {index}: {source}")]
    Instance {
        container: ContainerId,
        index: u32,
        source: Box<LayoutError>,
    },
}

/// Per-instance values pushed down to one container during expansion.
#[derive(Debug, Clone, Default, PartialEq)]
struct Override {
    transform: Vec<(TransformField, f64)>,
    attrs: BTreeMap<String, AttrValue>,
}

impl Override {
    fn layer(&self) -> AffineMatrix {
        let mut patch = TransformPatch::default();
        for (f, v) in &self.transform {
            patch.set(*f, *v);
        }
        patch.matrix()
    }
}

type Overrides = BTreeMap<ContainerId, Override>;

/// Placement of instance `i` relative to the repeater's local frame, composed
/// with the per-instance transform layer `data`.
///
/// Cartesian instances are translated by `i·step`; polar instances are moved
/// out by `radius` along `+x` and then rotated by `start + i·Δθ` about the
/// local origin; stacked instances abut the previous instance's placed
/// bounds (`prev`, in placement order) plus `gap`, using the current
/// instance's unplaced bounds (`current`, origin assumed when absent).
/// Flexible instances take only `data`.
pub fn instance_transform(
    arr: &Arrangement,
    coord: &CoordinateSystem,
    i: u32,
    prev: &[BBox],
    current: Option<&BBox>,
    data: &TransformPatch,
) -> Result<AffineMatrix, LayoutError> {
    let placement = match *arr {
        Arrangement::Uniform(UniformParams::Cartesian { step }) => {
            AffineMatrix::translate(step.x * i as f64, step.y * i as f64)
        }
        Arrangement::Uniform(UniformParams::Polar {
            radius,
            start_angle_deg,
            delta_angle_deg,
        }) => compose(
            &AffineMatrix::rotate_deg(start_angle_deg + i as f64 * delta_angle_deg),
            &AffineMatrix::translate(radius, 0.0),
        ),
        Arrangement::Stacked { axis, gap } => {
            if coord.kind == CoordKind::Polar {
                return Err(LayoutError::UnsupportedArrangement(ContainerId::from("")));
            }
            if i == 0 {
                AffineMatrix::IDENTITY
            } else {
                let last = prev
                    .last()
                    .ok_or(LayoutError::MissingPrevBBox { index: i })?;
                match axis {
                    Axis::X => {
                        let lead = current.map_or(0.0, |b| b.min_x);
                        AffineMatrix::translate(last.max_x + gap - lead, 0.0)
                    }
                    Axis::Y => {
                        let lead = current.map_or(0.0, |b| b.min_y);
                        AffineMatrix::translate(0.0, last.max_y + gap - lead)
                    }
                }
            }
        }
        Arrangement::Flexible => AffineMatrix::IDENTITY,
    };
    Ok(compose(&placement, &data.matrix()))
}

fn origin_matrix(c: &Container) -> AffineMatrix {
    let o = c.coord.origin;
    compose(
        &AffineMatrix::from_transform_unchecked(&c.transform),
        &AffineMatrix::translate(o.x, o.y),
    )
}

fn scalar_to_attr(s: &Scalar) -> AttrValue {
    match s {
        Scalar::Num(v) => AttrValue::Num(*v),
        Scalar::Str(v) => AttrValue::Str(v.clone()),
    }
}

struct Expander<'a> {
    doc: &'a GlyphDocument,
}

impl Expander<'_> {
    fn container(&self, id: &str) -> Result<&Container, LayoutError> {
        self.doc
            .get(id)
            .ok_or_else(|| LayoutError::UnknownContainer(ContainerId::from(id)))
    }

    /// A copy of `c` with static (non-instance) bindings written in, using
    /// the first materialized value.
    fn with_static_bindings(&self, c: &Container) -> Result<Container, LayoutError> {
        let mut out = c.clone();
        for b in &c.bindings {
            let Ok(AttributeSlot::Static(field)) = resolve_attribute_path(c, &b.attribute_path)
            else {
                continue;
            };
            let mut rng = binding_rng(self.doc.rng_seed, c.id.as_str(), &b.attribute_path);
            let (values, _) =
                materialize_binding(b, 1, &mut rng).map_err(|error| LayoutError::Binding {
                    container: c.id.clone(),
                    path: b.attribute_path.clone(),
                    error,
                })?;
            field
                .write(&mut out, &scalar_to_attr(&values[0]))
                .map_err(|reason| LayoutError::BadBoundValue {
                    container: c.id.clone(),
                    path: b.attribute_path.clone(),
                    reason,
                })?;
        }
        Ok(out)
    }

    fn expand(&self, id: &ContainerId, overrides: &Overrides) -> Result<SceneNode, LayoutError> {
        let c = self.with_static_bindings(self.container(id.as_str())?)?;
        let own = overrides.get(id);
        let layer = own.map_or(AffineMatrix::IDENTITY, Override::layer);
        let matrix = compose(&layer, &origin_matrix(&c));

        match &c.body {
            Body::Basic { primitive } => {
                let mut primitive = primitive.clone();
                if let Some(o) = own {
                    for (k, v) in &o.attrs {
                        primitive.attrs.insert(k.clone(), v.clone());
                    }
                }
                Ok(SceneNode::Leaf(SceneLeaf {
                    container: c.id.clone(),
                    primitive,
                    matrix,
                    text_centered: false,
                }))
            }
            Body::Repeater { .. } => {
                let children = self.repeater_instances(&c, overrides)?;
                Ok(SceneNode::Group(SceneGroup {
                    name: c.id.clone(),
                    matrix,
                    children,
                }))
            }
            Body::Compositor {
                children,
                relations,
            } => {
                let mut scenes = Vec::with_capacity(children.len());
                for ch in children {
                    scenes.push(self.expand(ch, overrides)?);
                }
                for r in relations {
                    if r.rel_type != RelType::Center {
                        continue;
                    }
                    let idx = children.iter().position(|ch| *ch == r.source);
                    if let Some(SceneNode::Leaf(l)) = idx.map(|i| &mut scenes[i]) {
                        if l.primitive.kind == PrimitiveKind::Text {
                            l.text_centered = true;
                        }
                    }
                }
                let placements = solve_relations(&c, &scenes)?;
                for (node, p) in scenes.iter_mut().zip(placements) {
                    let m = compose(&p, node.matrix());
                    *node.matrix_mut() = m;
                }
                Ok(SceneNode::Group(SceneGroup {
                    name: c.id.clone(),
                    matrix,
                    children: scenes,
                }))
            }
        }
    }

    /// Per-instance override tables for repeater `c`, one per instance.
    fn instance_overrides(&self, c: &Container, count: u32) -> Result<Vec<Overrides>, LayoutError> {
        let Body::Repeater { child, .. } = &c.body else {
            return Err(LayoutError::NotARepeater(c.id.clone()));
        };
        let mut tables = alloc::vec![Overrides::new(); count as usize];
        for b in &c.bindings {
            let Ok(AttributeSlot::Instance { selector, field }) =
                resolve_attribute_path(c, &b.attribute_path)
            else {
                continue;
            };
            let target = selector.unwrap_or_else(|| child.clone());
            let mut rng = binding_rng(self.doc.rng_seed, c.id.as_str(), &b.attribute_path);
            let (values, _) =
                materialize_binding(b, count, &mut rng).map_err(|error| LayoutError::Binding {
                    container: c.id.clone(),
                    path: b.attribute_path.clone(),
                    error,
                })?;
            let bad = |reason: &str| LayoutError::BadBoundValue {
                container: c.id.clone(),
                path: b.attribute_path.clone(),
                reason: reason.into(),
            };
            let target_kind = self.container(target.as_str())?.primitive().map(|p| p.kind);
            for (table, v) in tables.iter_mut().zip(&values) {
                let entry = table.entry(target.clone()).or_default();
                match &field {
                    InstanceField::Transform(f) => {
                        let Scalar::Num(x) = v else {
                            return Err(bad("expected a number"));
                        };
                        if matches!(
                            f,
                            TransformField::ScaleX
                                | TransformField::ScaleY
                                | TransformField::ScaleUniform
                        ) && *x == 0.0
                        {
                            return Err(bad("scale factors must be non-zero"));
                        }
                        entry.transform.push((*f, *x));
                    }
                    InstanceField::Primitive(name) => {
                        let kind =
                            target_kind.ok_or_else(|| bad("target is not a basic container"))?;
                        let value = scalar_to_attr(v);
                        crate::model::check_attr(kind, name, &value)
                            .map_err(|e| bad(&alloc::format!("{e}")))?;
                        entry.attrs.insert(name.clone(), value);
                    }
                }
            }
        }
        Ok(tables)
    }

    fn repeater_instances(
        &self,
        c: &Container,
        inherited: &Overrides,
    ) -> Result<Vec<SceneNode>, LayoutError> {
        let Body::Repeater {
            child,
            count,
            arrangement,
        } = &c.body
        else {
            return Err(LayoutError::NotARepeater(c.id.clone()));
        };
        if matches!(arrangement, Arrangement::Stacked { .. }) && c.coord.kind == CoordKind::Polar {
            return Err(LayoutError::UnsupportedArrangement(c.id.clone()));
        }
        let tables = self.instance_overrides(c, *count)?;
        let mut out = Vec::with_capacity(*count as usize);
        let mut placed: Vec<BBox> = Vec::new();
        let stacked = matches!(arrangement, Arrangement::Stacked { .. });
        for (i, table) in tables.into_iter().enumerate() {
            let i = i as u32;
            let wrap = |source: LayoutError| LayoutError::Instance {
                container: c.id.clone(),
                index: i,
                source: Box::new(source),
            };
            // inner repeaters override outer ones field by field
            let mut merged = inherited.clone();
            for (target, o) in table {
                let e = merged.entry(target).or_default();
                e.transform.extend(o.transform);
                e.attrs.extend(o.attrs);
            }
            let mut node = self.expand(child, &merged).map_err(wrap)?;
            let current = if stacked {
                node_bbox_under(&node, &AffineMatrix::IDENTITY).map_err(|error| {
                    wrap(LayoutError::Geometry {
                        container: child.clone(),
                        error,
                    })
                })?
            } else {
                None
            };
            let placement = instance_transform(
                arrangement,
                &c.coord,
                i,
                &placed,
                current.as_ref(),
                &TransformPatch::default(),
            )
            .map_err(wrap)?;
            let m = compose(&placement, node.matrix());
            *node.matrix_mut() = m;
            if stacked {
                let shift = Vec2::new(placement.e, placement.f);
                placed.push(
                    current.map_or(BBox::new(shift.x, shift.y, shift.x, shift.y), |b| {
                        b.translated(shift)
                    }),
                );
            }
            out.push(node);
        }
        Ok(out)
    }
}

fn relation_anchors(t: RelType) -> (AnchorName, AnchorName) {
    match t {
        RelType::Top => (AnchorName::BottomCenter, AnchorName::TopCenter),
        RelType::Bottom => (AnchorName::TopCenter, AnchorName::BottomCenter),
        RelType::Left => (AnchorName::RightCenter, AnchorName::LeftCenter),
        RelType::Right => (AnchorName::LeftCenter, AnchorName::RightCenter),
        RelType::Center => (AnchorName::Center, AnchorName::Center),
    }
}

/// `(source anchor, target anchor)` used by a relation type.
pub fn anchors_for(t: RelType) -> (AnchorName, AnchorName) {
    relation_anchors(t)
}

fn solve_relations(c: &Container, scenes: &[SceneNode]) -> Result<Vec<AffineMatrix>, LayoutError> {
    let Body::Compositor {
        children,
        relations,
    } = &c.body
    else {
        return Err(LayoutError::NotACompositor(c.id.clone()));
    };
    let order = crate::model::relation_order(children, relations)
        .ok_or_else(|| LayoutError::RelationCycle(c.id.clone()))?;
    let mut placements = alloc::vec![AffineMatrix::IDENTITY; children.len()];
    let mut placed_bbox: Vec<Option<BBox>> = alloc::vec![None; children.len()];
    let bbox_of = |i: usize| {
        node_bbox(&scenes[i]).map_err(|error| LayoutError::Geometry {
            container: children[i].clone(),
            error,
        })
    };
    for &si in &order {
        let mut delta: Option<Vec2> = None;
        for r in relations.iter().filter(|r| r.source == children[si]) {
            let ti = children
                .iter()
                .position(|ch| *ch == r.target)
                .ok_or_else(|| LayoutError::UnknownContainer(r.target.clone()))?;
            let target_box = match placed_bbox[ti] {
                Some(b) => b,
                None => bbox_of(ti)?,
            };
            let (sa, ta) = relation_anchors(r.rel_type);
            let want = anchor_point(&target_box, ta) + r.distance;
            let have = anchor_point(&bbox_of(si)?, sa);
            let d = want - have;
            match delta {
                None => delta = Some(d),
                Some(prev) if (prev - d).norm() > OVERCONSTRAINED_TOL => {
                    return Err(LayoutError::OverConstrained {
                        container: c.id.clone(),
                        source_id: children[si].clone(),
                    })
                }
                Some(_) => {}
            }
        }
        if let Some(d) = delta {
            placements[si] = AffineMatrix::translate(d.x, d.y);
            placed_bbox[si] = Some(bbox_of(si)?.translated(d));
        } else if relations.iter().any(|r| r.target == children[si]) {
            placed_bbox[si] = Some(bbox_of(si)?);
        }
    }
    Ok(placements)
}

/// Placement translations for the children of compositor `id`, given their
/// expanded scenes in child order. Relations are processed so each target is
/// placed before its sources; unrelated children stay where they are.
pub fn solve_composition(
    doc: &GlyphDocument,
    id: &str,
    child_scenes: &[SceneNode],
) -> Result<Vec<AffineMatrix>, LayoutError> {
    let c = doc
        .get(id)
        .ok_or_else(|| LayoutError::UnknownContainer(ContainerId::from(id)))?;
    solve_relations(c, child_scenes)
}

/// Expands repeater `id` on its own (as if it were the root).
pub fn expand_repeater(doc: &GlyphDocument, id: &str) -> Result<SceneNode, LayoutError> {
    let c = doc
        .get(id)
        .ok_or_else(|| LayoutError::UnknownContainer(ContainerId::from(id)))?;
    if !matches!(c.body, Body::Repeater { .. }) {
        return Err(LayoutError::NotARepeater(c.id.clone()));
    }
    Expander { doc }.expand(&c.id, &Overrides::new())
}

/// Expands a subtree rooted at any container.
pub fn expand_container(doc: &GlyphDocument, id: &str) -> Result<SceneNode, LayoutError> {
    let c = doc
        .get(id)
        .ok_or_else(|| LayoutError::UnknownContainer(ContainerId::from(id)))?;
    Expander { doc }.expand(&c.id, &Overrides::new())
}

/// Instantiates the whole document from its root. Unattached containers are
/// ignored.
pub fn instantiate(doc: &GlyphDocument) -> Result<Scene, LayoutError> {
    if let Some(v) = crate::model::validate_document(doc).into_iter().next() {
        return Err(LayoutError::InvalidDocument(v));
    }
    let Some(root) = &doc.root else {
        return Ok(Scene::default());
    };
    let node = Expander { doc }.expand(root, &Overrides::new())?;
    Ok(Scene { root: Some(node) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_instance_rotation() {
        let arr = Arrangement::polar(0.0, 0.0, 90.0);
        let m = instance_transform(
            &arr,
            &CoordinateSystem::polar(),
            2,
            &[],
            None,
            &TransformPatch::default(),
        )
        .unwrap();
        assert_eq!(m, AffineMatrix::rotate_deg(180.0));
        assert_eq!(m.to_array(), [-1.0, 0.0, 0.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn cartesian_instance_step() {
        let arr = Arrangement::cartesian(Vec2::new(10.0, 0.0));
        let m = instance_transform(
            &arr,
            &CoordinateSystem::cartesian(),
            3,
            &[],
            None,
            &TransformPatch::default(),
        )
        .unwrap();
        assert_eq!(m, AffineMatrix::translate(30.0, 0.0));
    }

    #[test]
    fn stacked_instances_abut() {
        let arr = Arrangement::Stacked {
            axis: Axis::X,
            gap: 2.0,
        };
        let prev = [
            BBox::new(0.0, 0.0, 5.0, 1.0),
            BBox::new(7.0, 0.0, 14.0, 1.0),
        ];
        let cur = BBox::new(0.0, 0.0, 3.0, 1.0);
        let m = instance_transform(
            &arr,
            &CoordinateSystem::cartesian(),
            2,
            &prev,
            Some(&cur),
            &TransformPatch::default(),
        )
        .unwrap();
        assert_eq!(m, AffineMatrix::translate(16.0, 0.0));
        let err = instance_transform(
            &arr,
            &CoordinateSystem::cartesian(),
            1,
            &[],
            Some(&cur),
            &TransformPatch::default(),
        );
        assert_eq!(err, Err(LayoutError::MissingPrevBBox { index: 1 }));
    }
}

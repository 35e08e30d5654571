use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{resolve_in_document, Body, ContainerId, DataSource, GlyphDocument, SpatialRelation};

/// A broken document invariant, naming the container at fault.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("container id `{0}` is empty or contains characters outside [A-Za-z0-9_ -]")]
    InvalidId(ContainerId),
    #[error("container stored under `{key}` carries id `{id}`")]
    IdMismatch { key: ContainerId, id: ContainerId },
    #[error("`{container}` references missing container `{missing}`")]
    DanglingReference {
        container: ContainerId,
        missing: ContainerId,
    },
    #[error("root `{0}` does not exist")]
    MissingRoot(ContainerId),
    #[error("document has containers but no root")]
    NoRoot,
    #[error("root `{0}` is the child of another container")]
    RootHasParent(ContainerId),
    #[error("`{child}` has more than one parent")]
    MultipleParents { child: ContainerId },
    #[error("containment cycle through `{container}`")]
    CycleDetected { container: ContainerId },
    #[error("`{container}`: invalid primitive: {message}")]
    BadPrimitive {
        container: ContainerId,
        message: String,
    },
    #[error("`{container}`: repeat count must be >= 1")]
    ZeroCount { container: ContainerId },
    #[error("`{container}`: compositor has no children")]
    EmptyCompositor { container: ContainerId },
    #[error("`{container}`: child `{child}` listed twice")]
    DuplicateChild {
        container: ContainerId,
        child: ContainerId,
    },
    #[error("`{container}`: relation references `{member}` which is not a child")]
    RelationOutsideChildren {
        container: ContainerId,
        member: ContainerId,
    },
    #[error("`{container}`: relation from `{member}` to itself")]
    SelfRelation {
        container: ContainerId,
        member: ContainerId,
    },
    #[error("`{container}`: spatial relations form a cycle")]
    RelationCycle { container: ContainerId },
    #[error("`{container}`: arrangement does not fit the coordinate system")]
    ArrangementMismatch { container: ContainerId },
    #[error("`{container}`: scale factors must be non-zero")]
    DegenerateScale { container: ContainerId },
    #[error("`{container}`: non-finite value in {field}")]
    NonFinite {
        container: ContainerId,
        field: &'static str,
    },
    #[error("`{container}`: binding `{path}`: {reason}")]
    BadBinding {
        container: ContainerId,
        path: String,
        reason: String,
    },
    #[error("`{container}`: path `{path}` bound more than once")]
    DuplicateBinding {
        container: ContainerId,
        path: String,
    },
}

impl Violation {
    /// The container the violation is reported against, if any.
    pub fn container(&self) -> Option<&ContainerId> {
        use Violation::*;
        match self {
            InvalidId(c) | MissingRoot(c) | RootHasParent(c) => Some(c),
            IdMismatch { key, .. } => Some(key),
            NoRoot => None,
            MultipleParents { child } => Some(child),
            DanglingReference { container, .. }
            | CycleDetected { container }
            | BadPrimitive { container, .. }
            | ZeroCount { container }
            | EmptyCompositor { container }
            | DuplicateChild { container, .. }
            | RelationOutsideChildren { container, .. }
            | SelfRelation { container, .. }
            | RelationCycle { container }
            | ArrangementMismatch { container }
            | DegenerateScale { container }
            | NonFinite { container, .. }
            | BadBinding { container, .. }
            | DuplicateBinding { container, .. } => Some(container),
        }
    }
}

/// Non-fatal findings.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Warning {
    #[error("`{0}` is not reachable from the root")]
    Unattached(ContainerId),
    #[error("`{container}`: binding `{path}` has {values} values for {count} instances")]
    LengthMismatch {
        container: ContainerId,
        path: String,
        values: usize,
        count: u32,
    },
}

/// Checks every structural invariant. Returns an empty list for a valid
/// document.
pub fn validate_document(doc: &GlyphDocument) -> Vec<Violation> {
    let mut out = Vec::new();

    for (key, c) in &doc.containers {
        if !key.is_well_formed() {
            out.push(Violation::InvalidId(key.clone()));
        }
        if *key != c.id {
            out.push(Violation::IdMismatch {
                key: key.clone(),
                id: c.id.clone(),
            });
        }
    }

    match &doc.root {
        Some(root) if !doc.contains(root.as_str()) => {
            out.push(Violation::MissingRoot(root.clone()))
        }
        None if !doc.containers.is_empty() => out.push(Violation::NoRoot),
        _ => {}
    }

    // parent counts and dangling references
    let mut parents: BTreeMap<&str, usize> = BTreeMap::new();
    for (key, c) in &doc.containers {
        for child in c.children() {
            if !doc.contains(child.as_str()) {
                out.push(Violation::DanglingReference {
                    container: key.clone(),
                    missing: child.clone(),
                });
                continue;
            }
            *parents.entry(child.as_str()).or_default() += 1;
        }
    }
    for (child, n) in &parents {
        if *n > 1 {
            out.push(Violation::MultipleParents {
                child: ContainerId::from(*child),
            });
        }
    }
    let cycles = find_cycles(doc);
    if let Some(root) = &doc.root {
        if cycles.is_empty() && parents.contains_key(root.as_str()) {
            out.push(Violation::RootHasParent(root.clone()));
        }
    }
    out.extend(cycles);

    for key in doc.containers.keys() {
        check_container(doc, key, &mut out);
    }
    out
}

fn find_cycles(doc: &GlyphDocument) -> Vec<Violation> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    let mut out = Vec::new();
    let mut reported = BTreeSet::new();
    for start in doc.containers.keys() {
        if state.get(start.as_str()).copied().unwrap_or(0) != 0 {
            continue;
        }
        // iterative DFS with explicit child cursors
        let mut stack: Vec<(&str, usize)> = alloc::vec![(start.as_str(), 0)];
        state.insert(start.as_str(), 1);
        while let Some((node, cursor)) = stack.last_mut() {
            let children = doc.get(node).map(|c| c.children()).unwrap_or_default();
            if *cursor < children.len() {
                let next = children[*cursor].as_str();
                *cursor += 1;
                if !doc.contains(next) {
                    continue;
                }
                match state.get(next).copied().unwrap_or(0) {
                    0 => {
                        state.insert(next, 1);
                        stack.push((next, 0));
                    }
                    1 if reported.insert(next) => {
                        out.push(Violation::CycleDetected {
                            container: ContainerId::from(next),
                        });
                    }
                    _ => {}
                }
            } else {
                state.insert(node, 2);
                stack.pop();
            }
        }
    }
    out
}

fn check_container(doc: &GlyphDocument, key: &ContainerId, out: &mut Vec<Violation>) {
    let c = &doc.containers[key];
    let id = || key.clone();

    if !c.transform.is_finite() {
        out.push(Violation::NonFinite {
            container: id(),
            field: "transform",
        });
    } else if c.transform.scale.sx == 0.0 || c.transform.scale.sy == 0.0 {
        out.push(Violation::DegenerateScale { container: id() });
    }
    if !c.coord.origin.is_finite() {
        out.push(Violation::NonFinite {
            container: id(),
            field: "coord.origin",
        });
    }

    match &c.body {
        Body::Basic { primitive } => {
            if let Err(e) = primitive.validate() {
                out.push(Violation::BadPrimitive {
                    container: id(),
                    message: e.to_string(),
                });
            }
        }
        Body::Repeater {
            count, arrangement, ..
        } => {
            if *count < 1 {
                out.push(Violation::ZeroCount { container: id() });
            }
            if !arrangement.is_finite() {
                out.push(Violation::NonFinite {
                    container: id(),
                    field: "arrangement",
                });
            }
            if !arrangement.matches_coord(c.coord.kind) {
                out.push(Violation::ArrangementMismatch { container: id() });
            }
            if let super::Arrangement::Uniform(super::UniformParams::Polar { radius, .. }) =
                arrangement
            {
                if *radius < 0.0 {
                    out.push(Violation::ArrangementMismatch { container: id() });
                }
            }
        }
        Body::Compositor {
            children,
            relations,
        } => {
            if children.is_empty() {
                out.push(Violation::EmptyCompositor { container: id() });
            }
            let mut seen = BTreeSet::new();
            for ch in children {
                if !seen.insert(ch) {
                    out.push(Violation::DuplicateChild {
                        container: id(),
                        child: ch.clone(),
                    });
                }
            }
            for r in relations {
                for member in [&r.source, &r.target] {
                    if !children.contains(member) {
                        out.push(Violation::RelationOutsideChildren {
                            container: id(),
                            member: member.clone(),
                        });
                    }
                }
                if r.source == r.target {
                    out.push(Violation::SelfRelation {
                        container: id(),
                        member: r.source.clone(),
                    });
                }
                if !r.distance.is_finite() {
                    out.push(Violation::NonFinite {
                        container: id(),
                        field: "relation distance",
                    });
                }
            }
            if relation_order(children, relations).is_none() {
                out.push(Violation::RelationCycle { container: id() });
            }
        }
    }

    let mut paths = BTreeSet::new();
    for b in &c.bindings {
        if !paths.insert(b.attribute_path.as_str()) {
            out.push(Violation::DuplicateBinding {
                container: id(),
                path: b.attribute_path.clone(),
            });
        }
        let bad = |reason: String| Violation::BadBinding {
            container: id(),
            path: b.attribute_path.clone(),
            reason,
        };
        if let Err(e) = resolve_in_document(doc, key.as_str(), &b.attribute_path) {
            out.push(bad(e.to_string()));
        }
        match &b.source {
            DataSource::Values(v) if v.is_empty() => out.push(bad("empty value list".into())),
            DataSource::Expression(text) => {
                if let Err(e) = crate::databind::parse_expression(text) {
                    out.push(bad(e.to_string()));
                }
            }
            _ => {}
        }
        if let Some(scale) = &b.scale {
            if !scale.is_valid() {
                out.push(bad(
                    "scale domain must have distinct finite endpoints".into()
                ));
            }
        }
    }
}

/// Order in which compositor children must be placed so every relation's
/// target is placed before its source; `None` on a cycle. Unrelated children
/// keep their list order.
pub(crate) fn relation_order(
    children: &[ContainerId],
    relations: &[SpatialRelation],
) -> Option<Vec<usize>> {
    let index = |id: &ContainerId| children.iter().position(|c| c == id);
    let n = children.len();
    let mut indegree = alloc::vec![0usize; n];
    let mut edges: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
    for r in relations {
        let (Some(s), Some(t)) = (index(&r.source), index(&r.target)) else {
            continue;
        };
        if s == t {
            continue;
        }
        edges[t].push(s);
        indegree[s] += 1;
    }
    let mut order = Vec::with_capacity(n);
    let mut done = alloc::vec![false; n];
    while order.len() < n {
        let next = (0..n).find(|&i| !done[i] && indegree[i] == 0)?;
        done[next] = true;
        order.push(next);
        for &s in &edges[next] {
            indegree[s] -= 1;
        }
    }
    Some(order)
}

/// Unattached containers and value lists whose length differs from the
/// repeat count.
pub fn document_warnings(doc: &GlyphDocument) -> Vec<Warning> {
    let mut out = Vec::new();
    if doc.root.is_some() {
        for id in doc.containers.keys() {
            if !doc.is_attached(id.as_str()) {
                out.push(Warning::Unattached(id.clone()));
            }
        }
    }
    for c in doc.containers.values() {
        let Body::Repeater { count, .. } = c.body else {
            continue;
        };
        for b in &c.bindings {
            if let DataSource::Values(v) = &b.source {
                if b.attribute_path.starts_with("instance") && v.len() != count as usize {
                    out.push(Warning::LengthMismatch {
                        container: c.id.clone(),
                        path: b.attribute_path.clone(),
                        values: v.len(),
                        count,
                    });
                }
            }
        }
    }
    out
}

#![allow(dead_code)]

pub mod criteria;

use std::path::PathBuf;

use gdsl_core::model::GlyphDocument;
use gdsl_core::ops::{apply, Operation};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn load_ops(name: &str) -> Vec<Operation> {
    let text = std::fs::read_to_string(fixture_path(&format!("{name}.ops.json"))).expect("fixture");
    serde_json::from_str(&text).expect("ops parse")
}

/// Applies a fixture script to an empty document with the given seed.
pub fn build(name: &str, seed: u64) -> GlyphDocument {
    let mut doc = GlyphDocument::with_seed(seed);
    for (i, op) in load_ops(name).iter().enumerate() {
        doc = apply(&doc, op).unwrap_or_else(|e| panic!("{name} op {i}: {e}"));
    }
    doc
}

/// Shape of a random document: built bottom-up through the five operations.
#[derive(Debug, Clone)]
pub enum Spec {
    Basic(u8, f64),
    Repeat(Box<Spec>, u32, bool),
    Compose(Vec<Spec>, Option<u8>),
}

impl Spec {
    /// `(groups, leaves)` of the instantiated scene.
    pub fn counts(&self) -> (usize, usize) {
        match self {
            Spec::Basic(..) => (0, 1),
            Spec::Repeat(child, n, _) => {
                let (g, l) = child.counts();
                (1 + *n as usize * g, *n as usize * l)
            }
            Spec::Compose(children, _) => children.iter().fold((1, 0), |(g, l), c| {
                let (cg, cl) = c.counts();
                (g + cg, l + cl)
            }),
        }
    }

    /// Operations building this spec into an empty document; returns the id
    /// of the top container.
    pub fn emit(&self, ops: &mut Vec<Operation>, next: &mut usize) -> String {
        let id = format!("n{next}");
        *next += 1;
        let v = match self {
            Spec::Basic(kind, size) => {
                let s = *size;
                let (kind, params) = match kind % 4 {
                    0 => (
                        "rect",
                        serde_json::json!({"x": 0, "y": 0, "width": s, "height": s / 2.0}),
                    ),
                    1 => (
                        "circle",
                        serde_json::json!({"cx": s, "cy": 0, "r": s / 3.0}),
                    ),
                    2 => (
                        "line",
                        serde_json::json!({"x1": 0, "y1": 0, "x2": s, "y2": -s}),
                    ),
                    _ => (
                        "polygon",
                        serde_json::json!({"points": [{"x": 0, "y": 0}, {"x": s, "y": 0}, {"x": 0, "y": s}]}),
                    ),
                };
                serde_json::json!({"op": "CreateBasic", "id": id, "primitiveKind": kind, "params": params})
            }
            Spec::Repeat(child, n, polar) => {
                let target = child.emit(ops, next);
                serde_json::json!({"op": "CreateRepeater", "id": id, "targetId": target,
                    "coordKind": if *polar { "polar" } else { "cartesian" }, "count": n})
            }
            Spec::Compose(children, rel) => {
                let ids: Vec<String> = children.iter().map(|c| c.emit(ops, next)).collect();
                let relations = match rel {
                    Some(r) if ids.len() >= 2 => {
                        let names = ["top", "bottom", "left", "right", "center"];
                        serde_json::json!([{"source": ids[1], "target": ids[0],
                            "relType": names[*r as usize % 5], "distance": {"x": 1, "y": -2}}])
                    }
                    _ => serde_json::json!([]),
                };
                serde_json::json!({"op": "CreateCompositor", "id": id, "children": ids,
                    "relations": relations})
            }
        };
        ops.push(serde_json::from_value(v).expect("generated op"));
        id
    }

    pub fn build(&self, seed: u64) -> GlyphDocument {
        let mut ops = Vec::new();
        self.emit(&mut ops, &mut 0);
        let mut doc = GlyphDocument::with_seed(seed);
        for op in &ops {
            doc = apply(&doc, op).unwrap_or_else(|e| panic!("{e}"));
        }
        doc
    }
}

pub fn spec_strategy() -> impl proptest::strategy::Strategy<Value = Spec> {
    use proptest::prelude::*;
    let leaf = (0u8..4, 2.0f64..20.0).prop_map(|(k, s)| Spec::Basic(k, s));
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), 1u32..5, any::<bool>()).prop_map(|(c, n, p)| Spec::Repeat(
                Box::new(c),
                n,
                p
            )),
            (
                proptest::collection::vec(inner, 1..4),
                proptest::option::of(0u8..5)
            )
                .prop_map(|(cs, r)| Spec::Compose(cs, r)),
        ]
    })
}

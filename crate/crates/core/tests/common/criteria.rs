//! End-to-end checks shared by the core tests and the acceptance target.
//! Each function panics with a description on the first failed check.

use gdsl_core::geometry::{
    anchor_point, compose, node_bbox_under, outline_points, primitive_bbox_under, AffineMatrix,
    AnchorName,
};
use gdsl_core::infer::{fit_transform_chain, FitModel, FitParams, FlatElement};
use gdsl_core::layout::{expand_container, instantiate, SceneGroup, SceneNode};
use gdsl_core::model::{AttrValue, GlyphDocument, Primitive, Vec2};
use gdsl_core::nlcmd::{parse_command, SlotValue};
use gdsl_core::ops::{apply, Operation};
use gdsl_core::path::{parse_path, sample_segments, transform_segments};
use gdsl_core::render::{render_svg, SvgConfig};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use super::{build, load_ops, spec_strategy};

/// A runner with a fixed seed so failures reproduce.
pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config::with_cases(cases),
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

/// Draws `n` values from `s` with `runner`.
pub fn sample<S: Strategy>(s: &S, runner: &mut TestRunner, n: usize) -> Vec<S::Value> {
    (0..n)
        .map(|_| s.new_tree(runner).expect("strategy").current())
        .collect()
}

fn group(n: &SceneNode) -> &SceneGroup {
    match n {
        SceneNode::Group(g) => g,
        SceneNode::Leaf(_) => panic!("expected a group"),
    }
}

/// Anchor of `child` placed under a parent whose world matrix is `outer`.
fn world_anchor(child: &SceneNode, outer: &AffineMatrix, a: AnchorName) -> Vec2 {
    let b = node_bbox_under(child, outer).unwrap().unwrap();
    anchor_point(&b, a)
}

/// `name` or `name@k` for the first `k` operations of a fixture script.
pub fn fixture_doc(spec: &str) -> GlyphDocument {
    let (name, take) = match spec.split_once('@') {
        Some((n, k)) => (n, k.parse().expect("prefix length")),
        None => (spec, usize::MAX),
    };
    let mut doc = GlyphDocument::new();
    for op in load_ops(name).iter().take(take) {
        doc = apply(&doc, op).unwrap();
    }
    doc
}

pub fn fig4() {
    let start = std::time::Instant::now();
    let doc = build("fig4", 0);
    let scene = instantiate(&doc).unwrap();
    let root = group(scene.root.as_ref().unwrap());
    assert_eq!(root.name.as_str(), "flowers");
    assert_eq!(root.children.len(), 6, "top-level groups");
    assert_eq!(scene.leaf_count(), 30);
    for inst in &root.children {
        let g = group(inst);
        assert_eq!(g.name.as_str(), "flowerWithStem");
        let outer = compose(&root.matrix, &g.matrix);
        let stem = g
            .children
            .iter()
            .find(|c| matches!(c, SceneNode::Leaf(_)))
            .unwrap();
        let flower = g
            .children
            .iter()
            .find(|c| matches!(c, SceneNode::Group(_)))
            .unwrap();
        assert_eq!(flower.leaf_count(), 4);
        let top = world_anchor(stem, &outer, AnchorName::TopCenter);
        let bottom = world_anchor(flower, &outer, AnchorName::BottomCenter);
        assert!((top - bottom).norm() < 1e-6, "{top:?} vs {bottom:?}");
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "took {elapsed}s");
}

/// Stem heights are the base height times the encoded y-scales.
pub fn fig4_stem_heights() {
    let doc = build("fig4", 0);
    let scene = instantiate(&doc).unwrap();
    let heights: Vec<f64> = scene
        .world_leaves()
        .iter()
        .filter(|(l, _)| l.container.as_str() == "green stem")
        .map(|(l, m)| {
            primitive_bbox_under(&l.primitive, m, false)
                .unwrap()
                .height()
        })
        .collect();
    let expected = [0.5, 0.8, 1.0, 1.2, 0.7, 1.5].map(|s| 40.0 * s);
    assert_eq!(heights.len(), 6);
    for (h, e) in heights.iter().zip(expected) {
        assert!((h - e).abs() < 1e-9, "{h} vs {e}");
    }
}

/// The reference operation rows, each applied to a document that has what it
/// refers to.
pub fn table1() {
    let ops = load_ops("table1");
    let rows: Vec<&Operation> = ops
        .iter()
        .filter(|op| match op {
            Operation::CreateBasic { id, .. } => id.as_str() == "rect1",
            Operation::CreateRepeater { id, .. } => id.as_str() == "flower",
            Operation::CreateCompositor { id, .. } => id.as_str() == "chart",
            Operation::ModifyParams { target_id, .. } => target_id.as_str() == "rect1",
            Operation::EncodeData { target_id, .. } => target_id.as_str() == "bars",
        })
        .collect();
    assert_eq!(rows.len(), 5, "one row per operation kind");
    let mut doc = GlyphDocument::new();
    for (i, op) in ops.iter().enumerate() {
        doc = apply(&doc, op).unwrap_or_else(|e| panic!("op {i} ({}): {e}", op.name()));
    }
    let bars = expand_container(&doc, "bars").unwrap();
    let mut heights = Vec::new();
    bars.for_each_leaf(&mut |l, _| heights.push(l.primitive.num("height").unwrap()));
    assert_eq!(heights, [10.0, 45.0, 30.0]);
    let rect1 = doc.get("rect1").unwrap().primitive().unwrap();
    assert_eq!(
        rect1.attrs.get("fill"),
        Some(&AttrValue::Str("#ff0000".into()))
    );
    assert_eq!(rect1.num("width"), Some(150.0));
    assert_eq!(expand_container(&doc, "flower").unwrap().leaf_count(), 12);
    assert_eq!(expand_container(&doc, "chart").unwrap().leaf_count(), 4);
}

pub fn leaf_points(doc: &GlyphDocument, skip: &str) -> Vec<Vec2> {
    let scene = instantiate(doc).unwrap();
    let mut pts = Vec::new();
    for (l, m) in scene.world_leaves() {
        if l.container.as_str() == skip {
            continue;
        }
        match l.primitive.str_attr("d") {
            Some(d) => {
                let segs = transform_segments(&parse_path(d).unwrap(), &m);
                pts.extend(sample_segments(&segs));
            }
            None => pts.extend(
                outline_points(&l.primitive, false)
                    .unwrap()
                    .into_iter()
                    .map(|p| m.apply(p)),
            ),
        }
    }
    pts
}

/// Every point of `a` has an unused partner in `b` within `tol`.
pub fn multiset_match(a: &[Vec2], b: &[Vec2], tol: f64) -> Result<(), String> {
    if a.len() != b.len() {
        return Err(format!("{} points vs {}", a.len(), b.len()));
    }
    let mut used = vec![false; b.len()];
    for p in a {
        let best = (0..b.len())
            .filter(|&j| !used[j])
            .min_by(|&i, &j| (b[i] - *p).norm().total_cmp(&(b[j] - *p).norm()))
            .unwrap();
        let d = (b[best] - *p).norm();
        if d >= tol {
            return Err(format!("point {p:?} unmatched (nearest {d})"));
        }
        used[best] = true;
    }
    Ok(())
}

pub fn snowflake() {
    let doc = build("snowflake", 0);
    let scene = instantiate(&doc).unwrap();
    assert_eq!(scene.leaf_count(), 49);

    // the center comes from fitting the six stems
    let stems: Vec<FlatElement> = scene
        .world_leaves()
        .into_iter()
        .filter(|(l, _)| l.container.as_str() == "stem")
        .map(|(l, m)| FlatElement::new(l.primitive, m))
        .collect();
    assert_eq!(stems.len(), 6);
    let fit = fit_transform_chain(&stems, 1e-3).unwrap();
    assert_eq!(fit.model, FitModel::Rotation);
    let Some(FitParams::Rotation {
        center,
        delta_angle_deg,
    }) = fit.params
    else {
        panic!("rotation params")
    };
    assert!((delta_angle_deg - 60.0).abs() < 1e-6);

    let pts = leaf_points(&doc, "hexagon");
    let rot = AffineMatrix::rotate_about(60.0, center);
    let turned: Vec<Vec2> = pts.iter().map(|p| rot.apply(*p)).collect();
    multiset_match(&pts, &turned, 1e-6).unwrap();
}

pub fn protein() {
    let doc = build("protein", 7);
    let scene = instantiate(&doc).unwrap();
    let root = group(scene.root.as_ref().unwrap());
    assert_eq!(root.name.as_str(), "curves");
    assert_eq!(root.children.len(), 5);
    for (k, inst) in root.children.iter().enumerate() {
        let g = group(inst);
        let outer = compose(&root.matrix, &g.matrix);
        let leaf = |name: &str| {
            g.children
                .iter()
                .find(|c| matches!(c, SceneNode::Leaf(l) if l.container.as_str() == name))
                .unwrap()
        };
        let (curve, diamond) = (leaf("curve"), leaf("diamond"));
        let SceneNode::Leaf(cl) = curve else {
            unreachable!()
        };
        let (sx, sy) = (cl.matrix.a, cl.matrix.d);
        assert!((sx - (1.0 + 0.2 * k as f64)).abs() < 1e-12, "x-scale {sx}");
        assert!((0.8..1.5).contains(&sy), "y-scale {sy}");
        let top = world_anchor(curve, &outer, AnchorName::TopCenter);
        let bottom = world_anchor(diamond, &outer, AnchorName::BottomCenter);
        assert!((top - bottom).norm() < 1e-6);
    }
    let cfg = SvgConfig::default();
    let a = render_svg(&scene, &cfg);
    let b = render_svg(&instantiate(&build("protein", 7)).unwrap(), &cfg);
    assert_eq!(a, b, "same seed, same bytes");
    let c = render_svg(&instantiate(&build("protein", 8)).unwrap(), &cfg);
    assert_ne!(a, c, "a different seed should change the heights");
}

/// Pure-translation groups of every primitive shape, including round ones
/// that a rotation could also explain.
pub fn translations_first(groups: usize) {
    use proptest::prelude::*;
    let shape = prop_oneof![
        (1.0f64..10.0, 1.0f64..10.0).prop_map(|(w, h)| Primitive::rect(0.0, 0.0, w, h)),
        (0.5f64..8.0).prop_map(|r| Primitive::circle(3.0, -2.0, r)),
        (1.0f64..10.0, -5.0f64..5.0).prop_map(|(x, y)| Primitive::line(0.0, 0.0, x, y)),
        (1.0f64..10.0).prop_map(|s| Primitive::polygon(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(s, 0.0),
            Vec2::new(s / 2.0, s),
        ])),
    ];
    let case = (
        shape,
        2usize..12,
        (-30.0f64..30.0, -30.0f64..30.0).prop_filter("moves", |(x, y)| x.hypot(*y) > 0.5),
    );
    let mut r = runner(groups as u32);
    for (i, (p, n, (dx, dy))) in sample(&case, &mut r, groups).into_iter().enumerate() {
        let elems: Vec<FlatElement> = (0..n)
            .map(|k| {
                FlatElement::new(
                    p.clone(),
                    AffineMatrix::translate(dx * k as f64, dy * k as f64),
                )
            })
            .collect();
        let fit = fit_transform_chain(&elems, 1e-3).unwrap();
        assert_eq!(
            fit.model,
            FitModel::Translation,
            "group {i}: {n}× {:?} by ({dx}, {dy})",
            p.kind
        );
    }
}

/// `<g>` count, scene group count and the analytic count agree.
pub fn group_count_law(docs: usize) {
    let mut r = runner(docs as u32);
    let seeds = sample(&proptest::num::u64::ANY, &mut r, docs);
    for (spec, seed) in sample(&spec_strategy(), &mut r, docs)
        .into_iter()
        .zip(seeds)
    {
        let doc = spec.build(seed);
        let scene = instantiate(&doc).unwrap();
        let (groups, leaves) = spec.counts();
        assert_eq!(scene.group_count(), groups, "{spec:?}");
        assert_eq!(scene.leaf_count(), leaves, "{spec:?}");
        let svg = render_svg(&scene, &SvgConfig::default());
        assert_eq!(svg.matches("<g").count(), groups, "{spec:?}");
    }
}

pub struct Case {
    pub command: String,
    pub fixture: String,
    pub selection: Option<String>,
    pub class: String,
    pub checks: Vec<(String, String)>,
}

pub fn corpus() -> Vec<Case> {
    let text = include_str!("../nl_corpus.txt");
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let cols: Vec<&str> = l.split('|').map(str::trim).collect();
            assert!(cols.len() >= 4, "bad corpus line: {l}");
            let checks = cols
                .get(4)
                .map(|c| {
                    c.split(';')
                        .filter(|s| !s.trim().is_empty())
                        .map(|kv| {
                            let (k, v) = kv.split_once('=').expect("slot=value");
                            (k.trim().to_string(), v.trim().to_string())
                        })
                        .collect()
                })
                .unwrap_or_default();
            Case {
                command: cols[0].into(),
                fixture: cols[1].into(),
                selection: (cols[2] != "-").then(|| cols[2].into()),
                class: cols[3].into(),
                checks,
            }
        })
        .collect()
}

/// Parses one corpus command without a backend and checks its class, slots
/// and applicability.
pub fn check_case(case: &Case) -> Result<(), String> {
    let doc = fixture_doc(&case.fixture);
    let r = parse_command(&case.command, &doc, case.selection.as_deref(), None);
    let again = parse_command(&case.command, &doc, case.selection.as_deref(), None);
    if r != again {
        return Err("parse is not deterministic".into());
    }
    let Some(p) = r.proposal() else {
        return if case.class == "suggestion" {
            Ok(())
        } else {
            Err(format!("expected {}, got a suggestion", case.class))
        };
    };
    if p.operation.name() != case.class {
        return Err(format!(
            "expected {}, got {}",
            case.class,
            p.operation.name()
        ));
    }
    apply(&doc, &p.operation).map_err(|e| format!("proposal does not apply: {e}"))?;
    for (slot, want) in &case.checks {
        let got = p
            .slot(slot)
            .ok_or_else(|| format!("missing slot `{slot}`"))?;
        let ok = match &got.current_value {
            SlotValue::Number(x) => want.parse::<f64>().is_ok_and(|w| (x - w).abs() < 1e-9),
            SlotValue::Text(s) => s == want,
        };
        if !ok {
            return Err(format!(
                "slot `{slot}`: want {want}, got {:?}",
                got.current_value
            ));
        }
    }
    Ok(())
}

/// Runs the whole corpus, printing a line per command.
pub fn nl_corpus() {
    let cases = corpus();
    assert_eq!(cases.len(), 9);
    let mut failures = Vec::new();
    for case in &cases {
        match check_case(case) {
            Ok(()) => println!("    ok    {}", case.command),
            Err(e) => {
                println!("    FAIL  {}: {e}", case.command);
                failures.push(case.command.clone());
            }
        }
    }
    assert!(failures.is_empty(), "failed: {failures:?}");
}

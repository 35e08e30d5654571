//! Render, flatten and infer randomized single-repeater documents.

use gdsl::compile;
use gdsl::svg_import::import_svg;
use gdsl_core::infer::{infer_structure, DEFAULT_TOL};
use gdsl_core::model::{Arrangement, Body, GlyphDocument, Scalar, UniformParams, Vec2};
use gdsl_core::ops::{apply, Operation};
use gdsl_core::render::SvgConfig;
use proptest::prelude::*;
use serde_json::json;

use super::common::criteria::{leaf_points, multiset_match, runner, sample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Translation,
    Rotation,
    TranslationScale,
}

#[derive(Debug, Clone)]
pub struct Case {
    pub model: Model,
    pub count: u32,
    pub triangle: [Vec2; 3],
    pub step: Vec2,
    pub radius: f64,
    pub delta_deg: f64,
    pub center: Vec2,
    pub scales: Vec<f64>,
}

fn scalene(p: &[Vec2; 3]) -> bool {
    let mut s = [
        (p[1] - p[0]).norm(),
        (p[2] - p[1]).norm(),
        (p[0] - p[2]).norm(),
    ];
    s.sort_by(f64::total_cmp);
    s[0] > 1.0 && s[1] - s[0] > 0.5 && s[2] - s[1] > 0.5
}

pub fn case_strategy() -> impl Strategy<Value = Case> {
    let point = || (-15.0f64..15.0, -15.0f64..15.0).prop_map(|(x, y)| Vec2::new(x, y));
    let triangle = [point(), point(), point()].prop_filter("scalene", scalene);
    (
        0u8..3,
        2u32..=12,
        triangle,
        (-40.0f64..40.0, -40.0f64..40.0).prop_filter("moves", |(x, y)| x.hypot(*y) > 2.0),
        0.0f64..40.0,
        0.0f64..1.0,
        (-50.0f64..50.0, -50.0f64..50.0),
        proptest::collection::vec(0.5f64..2.0, 12),
    )
        .prop_map(|(m, count, triangle, step, radius, t, center, scales)| {
            let model = [Model::Translation, Model::Rotation, Model::TranslationScale][m as usize];
            let max = 360.0 / count as f64;
            Case {
                model,
                count,
                triangle,
                step: Vec2::new(step.0, step.1),
                radius,
                delta_deg: 5.0 + t * (max - 5.0),
                center: Vec2::new(center.0, center.1),
                scales: scales[..count as usize].to_vec(),
            }
        })
        .prop_filter("scales vary", |c| {
            let lo = c.scales.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = c.scales.iter().cloned().fold(0.0, f64::max);
            c.model != Model::TranslationScale || hi - lo > 0.1
        })
}

impl Case {
    pub fn build(&self) -> GlyphDocument {
        let pts: Vec<_> = self
            .triangle
            .iter()
            .map(|p| json!({"x": p.x, "y": p.y}))
            .collect();
        let mut ops = vec![
            json!({"op": "CreateBasic", "id": "cell", "primitiveKind": "polygon",
            "params": {"points": pts, "fill": "#336699"}}),
        ];
        match self.model {
            Model::Translation | Model::TranslationScale => {
                ops.push(json!({"op": "CreateRepeater", "id": "rep", "targetId": "cell",
                    "coordKind": "cartesian", "count": self.count,
                    "arrangement": {"mode": "uniform", "step": {"x": self.step.x, "y": self.step.y}}}));
            }
            Model::Rotation => {
                ops.push(
                    json!({"op": "CreateRepeater", "id": "rep", "targetId": "cell",
                    "coordKind": "polar", "count": self.count,
                    "arrangement": {"mode": "uniform", "radius": self.radius,
                        "startAngleDeg": 0, "deltaAngleDeg": self.delta_deg}}),
                );
                ops.push(json!({"op": "ModifyParams", "targetId": "rep",
                    "params": {"transform.translate.x": self.center.x,
                        "transform.translate.y": self.center.y}}));
            }
        }
        if self.model == Model::TranslationScale {
            ops.push(json!({"op": "EncodeData", "targetId": "rep",
                "attributePath": "instance.scale.sx+sy", "data": {"values": self.scales}}));
        }
        let mut doc = GlyphDocument::new();
        for v in ops {
            let op: Operation = serde_json::from_value(v).expect("generated op");
            doc = apply(&doc, &op).unwrap_or_else(|e| panic!("{e}"));
        }
        doc
    }
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-6 * scale.max(1.0)
}

fn angle_close(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d) <= 1e-6
}

/// Runs one case through render, import and inference.
pub fn check(case: &Case) -> Result<(), String> {
    let doc = case.build();
    let cfg = SvgConfig {
        decimals: 8,
        ..SvgConfig::default()
    };
    let svg = compile(&doc, &cfg, None).map_err(|e| e.to_string())?;
    let elems = import_svg(&svg).map_err(|e| e.to_string())?;
    let inferred = infer_structure(&elems, DEFAULT_TOL).map_err(|e| e.to_string())?;
    let reps: Vec<_> = inferred
        .containers
        .values()
        .filter(|c| matches!(c.body, Body::Repeater { .. }))
        .collect();
    let [rep] = reps.as_slice() else {
        return Err(format!("{} repeaters inferred", reps.len()));
    };
    let Body::Repeater {
        count, arrangement, ..
    } = &rep.body
    else {
        unreachable!()
    };
    if *count != case.count {
        return Err(format!("count {count}, want {}", case.count));
    }
    match (case.model, arrangement) {
        (Model::Translation, Arrangement::Uniform(UniformParams::Cartesian { step })) => {
            let len = case.step.norm();
            if !(close(step.x, case.step.x, len) && close(step.y, case.step.y, len)) {
                return Err(format!("step {step:?}, want {:?}", case.step));
            }
        }
        (
            Model::Rotation,
            Arrangement::Uniform(UniformParams::Polar {
                delta_angle_deg, ..
            }),
        ) => {
            if !angle_close(*delta_angle_deg, case.delta_deg) {
                return Err(format!("angle {delta_angle_deg}, want {}", case.delta_deg));
            }
            let c = rep.transform.translate;
            let size = case.center.norm() + case.radius;
            if !(close(c.x, case.center.x, size) && close(c.y, case.center.y, size)) {
                return Err(format!("center {c:?}, want {:?}", case.center));
            }
        }
        (Model::TranslationScale, Arrangement::Uniform(UniformParams::Cartesian { .. })) => {
            let Some(b) = rep
                .bindings
                .iter()
                .find(|b| b.attribute_path == "instance.scale.sx+sy")
            else {
                return Err("no scale binding".into());
            };
            let gdsl_core::model::DataSource::Values(vals) = &b.source else {
                return Err("scale binding is not a value list".into());
            };
            let got: Vec<f64> = vals
                .iter()
                .map(|v| match v {
                    Scalar::Num(x) => *x,
                    Scalar::Str(_) => f64::NAN,
                })
                .collect();
            // scales are recovered relative to the first instance
            for (k, (g, w)) in got.iter().zip(&case.scales).enumerate() {
                let want = w / case.scales[0];
                if !close(*g, want, want) {
                    return Err(format!("scale {k}: {g}, want {want}"));
                }
            }
        }
        (m, a) => return Err(format!("{m:?} inferred as {a:?}")),
    }
    let size = 60.0 + case.step.norm() * case.count as f64;
    multiset_match(
        &leaf_points(&doc, ""),
        &leaf_points(&inferred, ""),
        1e-6 * size,
    )
}

/// Runs `n` generated cases; returns the failures.
pub fn run(n: usize) -> Vec<(Case, String)> {
    let mut r = runner(n as u32);
    sample(&case_strategy(), &mut r, n)
        .into_iter()
        .filter_map(|c| check(&c).err().map(|e| (c, e)))
        .collect()
}

//! Structure inference from flat vector graphics.
//!
//! Elements are first grouped by shape signature (equal up to a similarity
//! transform, same style). Each group is then fitted with increasingly
//! complex models: translation, rotation about a fixed center, translation
//! with uniform scale, rotation with uniform scale, and per-axis scale. The
//! first model whose RMS residual is below `tol` times the group diameter is
//! accepted and becomes a repeater.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::{compose, outline_points, AffineMatrix, BBox};
use crate::math;
use crate::model::{
    Arrangement, AttrValue, CoordKind, CoordinateSystem, DataSource, GlyphDocument, Primitive,
    PrimitiveKind, Rotation, Scalar, Scale, Transform, Vec2,
};
use crate::ops::{apply, ApplyError, ArrangementSpec, Operation};
use crate::path;

/// Default relative tolerance.
pub const DEFAULT_TOL: f64 = 1e-3;

/// One drawn element with its accumulated transform.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatElement {
    pub primitive: Primitive,
    pub world_matrix: AffineMatrix,
    pub source_id: Option<String>,
}

impl FlatElement {
    pub fn new(primitive: Primitive, world_matrix: AffineMatrix) -> Self {
        FlatElement {
            primitive,
            world_matrix,
            source_id: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InferError {
    #[error("nothing to infer from")]
    EmptyInput,
    #[error("element {index} has no usable geometry")]
    DegenerateShape { index: usize },
    #[error("could not build the inferred document: {0}")]
    Build(#[from] ApplyError),
}

/// Style properties that must agree within a group.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct StyleKey {
    pub fill: Option<String>,
    pub stroke: Option<String>,
    pub stroke_width: Option<String>,
    /// Image source; other kinds leave it empty.
    pub href: Option<String>,
}

fn style_key(p: &Primitive) -> StyleKey {
    let s = |k: &str| {
        p.attrs.get(k).map(|v| match v {
            AttrValue::Num(x) => alloc::format!("{x}"),
            AttrValue::Str(s) => s.clone(),
            AttrValue::Points(_) => String::new(),
        })
    };
    StyleKey {
        fill: s("fill"),
        stroke: s("stroke"),
        stroke_width: s("strokeWidth"),
        href: s("href"),
    }
}

/// Similarity-invariant description of a shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSignature {
    pub kind: PrimitiveKind,
    /// Centroid at the origin, RMS radius 1, principal axis along `+x`
    /// unless the second moments are isotropic.
    pub canonical_points: Vec<Vec2>,
    pub style: StyleKey,
    pub closed: bool,
}

impl ShapeSignature {
    /// Whether the two point sets agree within `tol` after the best rotation
    /// (and cyclic relabeling for closed outlines).
    pub fn matches(&self, other: &ShapeSignature, tol: f64) -> bool {
        self.kind == other.kind
            && self.style == other.style
            && self.canonical_points.len() == other.canonical_points.len()
            && best_shift(
                &self.canonical_points,
                &other.canonical_points,
                self.closed,
                true,
            )
            .1 < tol
    }
}

fn is_closed(p: &Primitive) -> bool {
    match p.kind {
        PrimitiveKind::Rect
        | PrimitiveKind::Image
        | PrimitiveKind::Polygon
        | PrimitiveKind::Circle
        | PrimitiveKind::Text => true,
        PrimitiveKind::Line => false,
        // path outlines are sampled per segment; shifting them is not meaningful
        PrimitiveKind::Path => false,
    }
}

fn centroid(pts: &[Vec2]) -> Vec2 {
    let n = pts.len().max(1) as f64;
    pts.iter().fold(Vec2::ZERO, |a, p| a + *p) * (1.0 / n)
}

fn rms_radius(pts: &[Vec2], c: Vec2) -> f64 {
    let n = pts.len().max(1) as f64;
    math::sqrt(pts.iter().map(|p| (*p - c).dot(*p - c)).sum::<f64>() / n)
}

fn rotate(v: Vec2, cos: f64, sin: f64) -> Vec2 {
    Vec2::new(cos * v.x - sin * v.y, sin * v.x + cos * v.y)
}

/// Normalizes a primitive's outline to its similarity-invariant form.
pub fn normalize_shape(p: &Primitive) -> Result<ShapeSignature, InferError> {
    let pts = outline_points(p, false).map_err(|_| InferError::DegenerateShape { index: 0 })?;
    let c = centroid(&pts);
    let r = rms_radius(&pts, c);
    if r.is_nan() || r <= 0.0 {
        return Err(InferError::DegenerateShape { index: 0 });
    }
    let mut pts: Vec<Vec2> = pts.iter().map(|q| (*q - c) * (1.0 / r)).collect();
    let (sxx, syy, sxy) = pts.iter().fold((0.0, 0.0, 0.0), |(a, b, c), p| {
        (a + p.x * p.x, b + p.y * p.y, c + p.x * p.y)
    });
    let aniso = math::hypot(sxx - syy, 2.0 * sxy);
    if aniso > 1e-9 * (sxx + syy) {
        let angle = 0.5 * math::atan2(2.0 * sxy, sxx - syy);
        let (s, co) = (math::sin(-angle), math::cos(-angle));
        for q in &mut pts {
            *q = rotate(*q, co, s);
        }
    }
    Ok(ShapeSignature {
        kind: p.kind,
        canonical_points: pts,
        style: style_key(p),
        closed: is_closed(p),
    })
}

/// Complex least-squares similarity `z ↦ α·z + β` taking `src` to `dst`.
#[derive(Debug, Clone, Copy)]
struct Similarity {
    re: f64,
    im: f64,
    beta: Vec2,
    rms: f64,
}

fn similarity(src: &[Vec2], dst: &[Vec2], allow_rotation: bool) -> Similarity {
    let cs = centroid(src);
    let cd = centroid(dst);
    let (mut num_re, mut num_im, mut den) = (0.0, 0.0, 0.0);
    for (s, d) in src.iter().zip(dst) {
        let (s, d) = (*s - cs, *d - cd);
        num_re += s.dot(d);
        num_im += s.cross(d);
        den += s.dot(s);
    }
    let (re, im) = if den > 0.0 {
        (
            num_re / den,
            if allow_rotation { num_im / den } else { 0.0 },
        )
    } else {
        (1.0, 0.0)
    };
    let beta = cd - rotate(cs, re, im);
    let n = src.len().max(1) as f64;
    let err: f64 = src
        .iter()
        .zip(dst)
        .map(|(s, d)| {
            let e = rotate(*s, re, im) + beta - *d;
            e.dot(e)
        })
        .sum();
    Similarity {
        re,
        im,
        beta,
        rms: math::sqrt(err / n),
    }
}

fn shifted(pts: &[Vec2], s: usize) -> Vec<Vec2> {
    let n = pts.len();
    (0..n).map(|j| pts[(j + s) % n]).collect()
}

/// Cyclic shift of `b` that best matches `a` under a similarity, and the
/// relative residual (RMS over `a`'s RMS radius). Shift 0 wins ties.
fn best_shift(a: &[Vec2], b: &[Vec2], closed: bool, allow_rotation: bool) -> (usize, f64) {
    let scale = rms_radius(a, centroid(a)).max(f64::MIN_POSITIVE);
    let rel = |s: usize| {
        let bs = shifted(b, s);
        similarity(&bs, a, allow_rotation).rms / scale
    };
    let zero = rel(0);
    if !closed || zero < 1e-9 {
        return (0, zero);
    }
    let mut best = (0, zero);
    for s in 1..b.len() {
        let r = rel(s);
        if r < best.1 - 1e-12 {
            best = (s, r);
        }
    }
    best
}

struct Prepared {
    points: Vec<Vec2>,
    /// Center and radius of a circle drawn under a similarity.
    round: Option<(Vec2, f64)>,
    closed: bool,
    style: StyleKey,
    kind: PrimitiveKind,
}

fn prepare(elems: &[FlatElement]) -> Result<Vec<Prepared>, InferError> {
    elems
        .iter()
        .enumerate()
        .map(|(index, e)| {
            let local = outline_points(&e.primitive, false)
                .map_err(|_| InferError::DegenerateShape { index })?;
            let points: Vec<Vec2> = local.iter().map(|p| e.world_matrix.apply(*p)).collect();
            if points.iter().any(|p| !p.is_finite()) {
                return Err(InferError::DegenerateShape { index });
            }
            Ok(Prepared {
                round: round_circle(&e.primitive, &e.world_matrix),
                points,
                closed: is_closed(&e.primitive),
                style: style_key(&e.primitive),
                kind: e.primitive.kind,
            })
        })
        .collect()
}

fn round_circle(p: &Primitive, m: &AffineMatrix) -> Option<(Vec2, f64)> {
    if p.kind != PrimitiveKind::Circle {
        return None;
    }
    let s = math::hypot(m.a, m.b);
    let tol = 1e-9 * s.max(1.0);
    let rotation = (m.a - m.d).abs() <= tol && (m.b + m.c).abs() <= tol;
    let reflection = (m.a + m.d).abs() <= tol && (m.b - m.c).abs() <= tol;
    if !(rotation || reflection) {
        return None;
    }
    let c = m.apply(Vec2::new(p.num_or_zero("cx"), p.num_or_zero("cy")));
    Some((c, p.num_or_zero("r") * s))
}

fn compatible(a: &Prepared, b: &Prepared) -> bool {
    a.kind == b.kind && a.style == b.style && a.points.len() == b.points.len()
}

/// Normalizes each axis separately (centroid 0, unit standard deviation).
fn axis_normalized(pts: &[Vec2]) -> Vec<Vec2> {
    let c = centroid(pts);
    let n = pts.len().max(1) as f64;
    let sd = |f: fn(&Vec2) -> f64, m: f64| {
        math::sqrt(pts.iter().map(|p| (f(p) - m) * (f(p) - m)).sum::<f64>() / n)
    };
    let sx = sd(|p| p.x, c.x);
    let sy = sd(|p| p.y, c.y);
    pts.iter()
        .map(|p| {
            Vec2::new(
                if sx > 0.0 { (p.x - c.x) / sx } else { 0.0 },
                if sy > 0.0 { (p.y - c.y) / sy } else { 0.0 },
            )
        })
        .collect()
}

/// Partitions elements into groups of congruent shapes (similarity plus
/// matching style). Singletons related by per-axis scaling are merged in a
/// second pass, and groups so related are merged when the union still fits.
/// Groups are ordered by first occurrence.
pub fn group_by_signature(elems: &[FlatElement], tol: f64) -> Result<Vec<Vec<usize>>, InferError> {
    let prepared = prepare(elems)?;
    Ok(group_prepared(&prepared, tol))
}

fn group_prepared(prepared: &[Prepared], tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, p) in prepared.iter().enumerate() {
        let found = groups.iter_mut().find(|g| {
            let rep = &prepared[g[0]];
            compatible(rep, p) && best_shift(&rep.points, &p.points, p.closed, true).1 < tol
        });
        match found {
            Some(g) => g.push(i),
            None => groups.push(alloc::vec![i]),
        }
    }

    // second pass: singletons equal up to per-axis scale
    let mut merged: Vec<Vec<usize>> = Vec::new();
    let mut used = alloc::vec![false; groups.len()];
    for gi in 0..groups.len() {
        if used[gi] {
            continue;
        }
        used[gi] = true;
        let mut g = groups[gi].clone();
        if g.len() == 1 {
            let rep = &prepared[g[0]];
            for gj in gi + 1..groups.len() {
                if used[gj] || groups[gj].len() != 1 {
                    continue;
                }
                let other = &prepared[groups[gj][0]];
                if compatible(rep, other) && axis_scale_error(rep, other) < tol {
                    used[gj] = true;
                    g.push(groups[gj][0]);
                }
            }
        }
        merged.push(g);
    }

    // third pass: groups equal up to per-axis scale merge when their union
    // still fits a model
    let mut out: Vec<Vec<usize>> = Vec::new();
    for g in merged {
        let rep = &prepared[g[0]];
        let target = out.iter().position(|o| {
            let orep = &prepared[o[0]];
            if !(compatible(orep, rep) && axis_scale_error(orep, rep) < tol) {
                return false;
            }
            let mut union: Vec<usize> = o.iter().chain(&g).copied().collect();
            union.sort_unstable();
            let refs: Vec<&Prepared> = union.iter().map(|&i| &prepared[i]).collect();
            fit_prepared(&refs, tol).0.model != FitModel::None
        });
        match target {
            Some(t) => {
                out[t].extend(g);
                out[t].sort_unstable();
            }
            None => out.push(g),
        }
    }
    out
}

/// RMS distance between the per-axis normalized outlines.
fn axis_scale_error(a: &Prepared, b: &Prepared) -> f64 {
    let (an, bn) = (axis_normalized(&a.points), axis_normalized(&b.points));
    let n = an.len().max(1) as f64;
    math::sqrt(
        an.iter()
            .zip(&bn)
            .map(|(p, q)| (*p - *q).dot(*p - *q))
            .sum::<f64>()
            / n,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FitModel {
    Translation,
    Rotation,
    TranslationScale,
    RotationScale,
    AxisScale,
    None,
}

/// A regular pattern in fitted per-instance scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum ScaleSequence {
    Arithmetic { start: f64, step: f64 },
    Geometric { start: f64, ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitParams {
    Translation {
        step: Vec2,
    },
    Rotation {
        center: Vec2,
        delta_angle_deg: f64,
    },
    /// Instance `k` is instance 0 scaled by `scales[k]` about `base`, then
    /// moved by `k·step`.
    TranslationScale {
        base: Vec2,
        step: Vec2,
        scales: Vec<f64>,
    },
    RotationScale {
        center: Vec2,
        delta_angle_deg: f64,
        scales: Vec<f64>,
    },
    AxisScale {
        base: Vec2,
        step: Vec2,
        scales: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Option<FitParams>,
    /// Positions in the input group, in instance order.
    pub order: Vec<usize>,
    /// RMS residual in document units.
    pub residual: f64,
}

impl FitResult {
    fn none(n: usize) -> Self {
        FitResult {
            model: FitModel::None,
            params: None,
            order: (0..n).collect(),
            residual: f64::INFINITY,
        }
    }

    pub fn per_instance_scales(&self) -> Option<Vec<(f64, f64)>> {
        match &self.params {
            Some(FitParams::TranslationScale { scales, .. })
            | Some(FitParams::RotationScale { scales, .. }) => {
                Some(scales.iter().map(|s| (*s, *s)).collect())
            }
            Some(FitParams::AxisScale { scales, .. }) => Some(scales.clone()),
            _ => None,
        }
    }
}

/// Detects an arithmetic or geometric progression within `rel_tol`.
pub fn detect_sequence(values: &[f64], rel_tol: f64) -> Option<ScaleSequence> {
    if values.len() < 3 {
        return None;
    }
    let scale = values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let d = values[1] - values[0];
    if values
        .windows(2)
        .all(|w| ((w[1] - w[0]) - d).abs() <= rel_tol * scale)
    {
        return Some(ScaleSequence::Arithmetic {
            start: values[0],
            step: d,
        });
    }
    if values.iter().all(|v| *v != 0.0) {
        let r = values[1] / values[0];
        if values
            .windows(2)
            .all(|w| (w[1] / w[0] - r).abs() <= rel_tol * r.abs().max(1.0))
        {
            return Some(ScaleSequence::Geometric {
                start: values[0],
                ratio: r,
            });
        }
    }
    None
}

/// Instance point sets with correspondences resolved against the first.
struct Group {
    pts: Vec<Vec<Vec2>>,
    closed: bool,
    diameter: f64,
    /// Set when every instance is a circle; sample orientation is then free.
    round: Option<Vec<(Vec2, f64)>>,
}

/// Circle samples of instance `k` taken from instance 0's, rotated by
/// `angle_deg` about the circle center.
fn circle_samples(g: &Group, round: &[(Vec2, f64)], k: usize, angle_deg: f64) -> Vec<Vec2> {
    let (c0, r0) = round[0];
    let (ck, rk) = round[k];
    let f = if r0 > 0.0 { rk / r0 } else { 1.0 };
    let (s, co) = math::sin_cos_deg(angle_deg);
    g.pts[0]
        .iter()
        .map(|p| ck + rotate((*p - c0) * f, co, s))
        .collect()
}

fn rms_total(pred: &[Vec<Vec2>], actual: &[Vec<Vec2>]) -> f64 {
    let mut err = 0.0;
    let mut n = 0usize;
    for (p, a) in pred.iter().zip(actual) {
        for (x, y) in p.iter().zip(a) {
            err += (*x - *y).dot(*x - *y);
            n += 1;
        }
    }
    math::sqrt(err / n.max(1) as f64)
}

fn principal_direction(pts: &[Vec2]) -> Vec2 {
    let c = centroid(pts);
    let (sxx, syy, sxy) = pts.iter().fold((0.0, 0.0, 0.0), |(a, b, d), p| {
        let q = *p - c;
        (a + q.x * q.x, b + q.y * q.y, d + q.x * q.y)
    });
    let angle = 0.5 * math::atan2(2.0 * sxy, sxx - syy);
    let mut d = Vec2::new(math::cos(angle), math::sin(angle));
    if d.x < -1e-12 || (d.x.abs() <= 1e-12 && d.y < 0.0) {
        d = -d;
    }
    d
}

/// Order of instances by projection of centroids on their principal
/// direction, ties broken by x then y. The sequence runs in whichever
/// direction puts the earlier input element first.
fn projection_order(cents: &[Vec2]) -> Vec<usize> {
    let d = principal_direction(cents);
    let mut idx: Vec<usize> = (0..cents.len()).collect();
    idx.sort_by(|&i, &j| {
        let (a, b) = (cents[i].dot(d), cents[j].dot(d));
        a.partial_cmp(&b)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(
                cents[i]
                    .x
                    .partial_cmp(&cents[j].x)
                    .unwrap_or(core::cmp::Ordering::Equal),
            )
            .then(
                cents[i]
                    .y
                    .partial_cmp(&cents[j].y)
                    .unwrap_or(core::cmp::Ordering::Equal),
            )
    });
    if idx.first() > idx.last() {
        idx.reverse();
    }
    idx
}

fn fit_translation(g: &Group) -> Option<(FitParams, Vec<usize>, f64)> {
    let cents: Vec<Vec2> = g.pts.iter().map(|p| centroid(p)).collect();
    let order = projection_order(&cents);
    let m = order.len();
    let kbar = (m as f64 - 1.0) / 2.0;
    let cbar = centroid(&cents);
    let (mut num, mut den) = (Vec2::ZERO, 0.0);
    for (k, &i) in order.iter().enumerate() {
        let dk = k as f64 - kbar;
        num = num + (cents[i] - cbar) * dk;
        den += dk * dk;
    }
    let step = if den > 0.0 {
        num * (1.0 / den)
    } else {
        Vec2::ZERO
    };
    let n = g.pts[0].len();
    let base: Vec<Vec2> = (0..n)
        .map(|j| {
            let s = order
                .iter()
                .enumerate()
                .fold(Vec2::ZERO, |a, (k, &i)| a + g.pts[i][j] - step * k as f64);
            s * (1.0 / m as f64)
        })
        .collect();
    let pred: Vec<Vec<Vec2>> = (0..m)
        .map(|k| base.iter().map(|b| *b + step * k as f64).collect())
        .collect();
    let actual: Vec<Vec<Vec2>> = order.iter().map(|&i| g.pts[i].clone()).collect();
    Some((
        FitParams::Translation { step },
        order,
        rms_total(&pred, &actual),
    ))
}

/// Least-squares center from perpendicular bisectors of corresponding points
/// of instance 0 and every other instance.
fn bisector_center(g: &Group) -> Option<Vec2> {
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 1..g.pts.len() {
        for (p, q) in g.pts[0].iter().zip(&g.pts[k]) {
            let d = *q - *p;
            let rhs = (q.dot(*q) - p.dot(*p)) / 2.0;
            a11 += d.x * d.x;
            a12 += d.x * d.y;
            a22 += d.y * d.y;
            b1 += d.x * rhs;
            b2 += d.y * rhs;
        }
    }
    solve2(a11, a12, a22, b1, b2)
}

fn solve2(a11: f64, a12: f64, a22: f64, b1: f64, b2: f64) -> Option<Vec2> {
    let det = a11 * a22 - a12 * a12;
    let scale = (a11 * a22).abs().max(a12 * a12).max(f64::MIN_POSITIVE);
    if det.abs() <= 1e-12 * scale {
        return None;
    }
    Some(Vec2::new(
        (a22 * b1 - a12 * b2) / det,
        (a11 * b2 - a12 * b1) / det,
    ))
}

/// Algebraic circle through the centroids.
fn centroid_circle_center(cents: &[Vec2]) -> Option<Vec2> {
    if cents.len() < 3 {
        return None;
    }
    let c0 = centroid(cents);
    // minimize Σ (|p|² + D·x + E·y + F)² with p relative to c0
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for p in cents {
        let q = *p - c0;
        let row = [q.x, q.y, 1.0];
        let z = -(q.dot(q));
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            rhs[i] += row[i] * z;
        }
    }
    let sol = solve3(m, rhs)?;
    Some(c0 + Vec2::new(-sol[0] / 2.0, -sol[1] / 2.0))
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..3 {
        let piv =
            (col..3).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        let pivot_row = m[col];
        let pivot_b = b[col];
        for (r, row) in m.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot_row[col];
                for (x, p) in row.iter_mut().zip(pivot_row.iter()).skip(col) {
                    *x -= f * p;
                }
                b[r] -= f * pivot_b;
            }
        }
    }
    Some([b[0] / m[0][0], b[1] / m[1][1], b[2] / m[2][2]])
}

fn wrap360(a: f64) -> f64 {
    let a = math::wrap_deg(a);
    if a >= 360.0 - 1e-9 {
        0.0
    } else {
        a
    }
}

/// Angle (degrees) and scale of the best similarity about `c` taking
/// `from` onto `to`.
fn angle_about(from: &[Vec2], to: &[Vec2], c: Vec2) -> (f64, f64) {
    let (mut re, mut im, mut den) = (0.0, 0.0, 0.0);
    for (p, q) in from.iter().zip(to) {
        let (p, q) = (*p - c, *q - c);
        re += p.dot(q);
        im += p.cross(q);
        den += p.dot(p);
    }
    let angle = math::atan2(im, re) / math::DEG;
    let scale = if den > 0.0 {
        math::hypot(re, im) / den
    } else {
        1.0
    };
    (angle, scale)
}

/// Orders instances by angle about `c` starting after the widest angular gap
/// and fits a constant increment. Returns the order and Δθ in degrees.
fn angular_order(g: &Group, c: Vec2) -> (Vec<usize>, f64) {
    let m = g.pts.len();
    let abs: Vec<f64> = (0..m)
        .map(|k| wrap360(angle_about(&g.pts[0], &g.pts[k], c).0))
        .collect();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&i, &j| {
        abs[i]
            .partial_cmp(&abs[j])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    // widest gap; the wrap-around gap wins ties so instance 0 leads a full turn
    let mut start = 0;
    let mut widest = 360.0 - abs[idx[m - 1]] + abs[idx[0]];
    for s in 1..m {
        let gap = abs[idx[s]] - abs[idx[s - 1]];
        if gap > widest + 1e-9 {
            widest = gap;
            start = s;
        }
    }
    let order: Vec<usize> = (0..m).map(|i| idx[(start + i) % m]).collect();
    let base = abs[order[0]];
    let rel: Vec<f64> = order.iter().map(|&i| wrap360(abs[i] - base)).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for (i, a) in rel.iter().enumerate() {
        num += i as f64 * a;
        den += (i * i) as f64;
    }
    let delta = if den > 0.0 { num / den } else { 0.0 };
    (order, delta)
}

fn rotation_residual(g: &Group, order: &[usize], c: Vec2, angles: &[f64], scales: &[f64]) -> f64 {
    let m = order.len();
    let n = g.pts[0].len();
    let trig: Vec<(f64, f64)> = angles.iter().map(|a| math::sin_cos_deg(*a)).collect();
    let base: Vec<Vec2> = (0..n)
        .map(|j| {
            let s = order.iter().enumerate().fold(Vec2::ZERO, |acc, (k, &i)| {
                let (s, co) = trig[k];
                acc + rotate(g.pts[i][j] - c, co, -s) * (1.0 / scales[k])
            });
            s * (1.0 / m as f64)
        })
        .collect();
    let pred: Vec<Vec<Vec2>> = (0..m)
        .map(|k| {
            let (s, co) = trig[k];
            base.iter()
                .map(|b| c + rotate(*b * scales[k], co, s))
                .collect()
        })
        .collect();
    let actual: Vec<Vec<Vec2>> = order.iter().map(|&i| g.pts[i].clone()).collect();
    rms_total(&pred, &actual)
}

/// Re-labels closed outlines so each instance's samples correspond to the
/// first instance rotated by its angle about `c`.
fn realign_shifts(g: &Group, c: Vec2) -> Group {
    let mut out = Group {
        pts: alloc::vec![g.pts[0].clone()],
        closed: g.closed,
        diameter: g.diameter,
        round: g.round.clone(),
    };
    for k in 1..g.pts.len() {
        if let Some(round) = &g.round {
            // circle orientation is invisible; follow the center around `c`
            let (a, b) = (round[0].0 - c, round[k].0 - c);
            let angle = math::atan2(a.cross(b), a.dot(b)) / math::DEG;
            out.pts.push(circle_samples(g, round, k, angle));
            continue;
        }
        let (angle, _) = angle_about(&g.pts[0], &g.pts[k], c);
        let (s, co) = math::sin_cos_deg(angle);
        let target: Vec<Vec2> = g.pts[0].iter().map(|p| c + rotate(*p - c, co, s)).collect();
        let n = g.pts[k].len();
        let mut best = (0usize, f64::INFINITY);
        for shift in 0..n {
            let err: f64 = (0..n)
                .map(|j| {
                    let d = g.pts[k][(j + shift) % n] - target[j];
                    d.dot(d)
                })
                .sum();
            if err < best.1 - 1e-12 {
                best = (shift, err);
            }
        }
        out.pts.push(shifted(&g.pts[k], best.0));
    }
    out
}

fn fit_rotation_like(g: &Group, with_scale: bool) -> Option<(FitParams, Vec<usize>, f64, Group)> {
    let cents: Vec<Vec2> = g.pts.iter().map(|p| centroid(p)).collect();
    let mut centers = Vec::new();
    if with_scale {
        if let Some(c) = spiral_center(g) {
            centers.push(c);
        }
    } else if let Some(c) = bisector_center(g) {
        centers.push(c);
    }
    if let Some(c) = centroid_circle_center(&cents) {
        centers.push(c);
    }
    let mut best: Option<(FitParams, Vec<usize>, f64, Group)> = None;
    for c in centers {
        let mut candidates = alloc::vec![Group {
            pts: g.pts.clone(),
            closed: g.closed,
            diameter: g.diameter,
            round: g.round.clone(),
        }];
        if g.closed || g.round.is_some() {
            candidates.push(realign_shifts(g, c));
        }
        for cand in candidates {
            let (order, delta) = angular_order(&cand, c);
            if delta.is_nan() || delta <= 1e-9 || delta * (order.len() as f64 - 1.0) >= 360.0 - 1e-9
            {
                continue;
            }
            let angles: Vec<f64> = (0..order.len()).map(|k| k as f64 * delta).collect();
            let scales: Vec<f64> = if with_scale {
                let s0 = angle_about(&cand.pts[0], &cand.pts[order[0]], c).1;
                order
                    .iter()
                    .map(|&i| angle_about(&cand.pts[0], &cand.pts[i], c).1 / s0)
                    .collect()
            } else {
                alloc::vec![1.0; order.len()]
            };
            let res = rotation_residual(&cand, &order, c, &angles, &scales);
            if best.as_ref().is_none_or(|b| res < b.2) {
                let params = if with_scale {
                    FitParams::RotationScale {
                        center: c,
                        delta_angle_deg: delta,
                        scales,
                    }
                } else {
                    FitParams::Rotation {
                        center: c,
                        delta_angle_deg: delta,
                    }
                };
                best = Some((params, order, res, cand));
            }
        }
    }
    best
}

/// Fixed point of the similarities taking instance 0 to the others.
fn spiral_center(g: &Group) -> Option<Vec2> {
    let mut acc = Vec2::ZERO;
    let mut n = 0;
    for k in 1..g.pts.len() {
        let s = similarity(&g.pts[0], &g.pts[k], true);
        // c = β / (1 − α)
        let (ar, ai) = (1.0 - s.re, -s.im);
        let den = ar * ar + ai * ai;
        if den <= 1e-18 {
            continue;
        }
        let c = Vec2::new(
            (s.beta.x * ar + s.beta.y * ai) / den,
            (s.beta.y * ar - s.beta.x * ai) / den,
        );
        acc = acc + c;
        n += 1;
    }
    (n > 0).then(|| acc * (1.0 / n as f64))
}

/// Per-axis least squares of `c_k − s_k·c_0 = (1 − s_k)·b + k·step` over the
/// ordered instances; `step` is fixed at zero when `no_step`.
fn solve_base_step(
    cents: &[Vec2],
    order: &[usize],
    scales: &[(f64, f64)],
    no_step: bool,
) -> (Vec2, Vec2) {
    let c0 = cents[order[0]];
    let axis = |pick: fn(Vec2) -> f64, spick: fn(&(f64, f64)) -> f64| -> (f64, f64) {
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (k, &i) in order.iter().enumerate() {
            let s = spick(&scales[k]);
            let u = 1.0 - s;
            let v = if no_step { 0.0 } else { k as f64 };
            let y = pick(cents[i]) - s * pick(c0);
            a11 += u * u;
            a12 += u * v;
            a22 += v * v;
            b1 += u * y;
            b2 += v * y;
        }
        if no_step {
            return (if a11 > 1e-18 { b1 / a11 } else { 0.0 }, 0.0);
        }
        match solve2(a11, a12, a22, b1, b2) {
            Some(v) => (v.x, v.y),
            None => {
                // minimum-norm solution: A⁺ = A / tr² for a rank-one symmetric A
                let tr = a11 + a22;
                if tr <= 1e-18 {
                    return (0.0, 0.0);
                }
                let t2 = tr * tr;
                ((a11 * b1 + a12 * b2) / t2, (a12 * b1 + a22 * b2) / t2)
            }
        }
    };
    let (bx, sx) = axis(|p| p.x, |s| s.0);
    let (by, sy) = axis(|p| p.y, |s| s.1);
    (Vec2::new(bx, by), Vec2::new(sx, sy))
}

fn scaled_residual(
    g: &Group,
    order: &[usize],
    base: Vec2,
    step: Vec2,
    scales: &[(f64, f64)],
) -> f64 {
    let m = order.len();
    let n = g.pts[0].len();
    let shape: Vec<Vec2> = (0..n)
        .map(|j| {
            let s = order.iter().enumerate().fold(Vec2::ZERO, |acc, (k, &i)| {
                let d = g.pts[i][j] - base - step * k as f64;
                acc + Vec2::new(d.x / scales[k].0, d.y / scales[k].1)
            });
            s * (1.0 / m as f64)
        })
        .collect();
    let pred: Vec<Vec<Vec2>> = (0..m)
        .map(|k| {
            shape
                .iter()
                .map(|d| base + step * k as f64 + Vec2::new(d.x * scales[k].0, d.y * scales[k].1))
                .collect()
        })
        .collect();
    let actual: Vec<Vec<Vec2>> = order.iter().map(|&i| g.pts[i].clone()).collect();
    rms_total(&pred, &actual)
}

/// Scale of each instance relative to instance 0, per axis.
fn pairwise_scales(g: &Group, per_axis: bool) -> Option<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(g.pts.len());
    for k in 0..g.pts.len() {
        if per_axis {
            let (ca, cb) = (centroid(&g.pts[0]), centroid(&g.pts[k]));
            let (mut nx, mut dx, mut ny, mut dy) = (0.0, 0.0, 0.0, 0.0);
            for (a, b) in g.pts[0].iter().zip(&g.pts[k]) {
                let (a, b) = (*a - ca, *b - cb);
                nx += a.x * b.x;
                dx += a.x * a.x;
                ny += a.y * b.y;
                dy += a.y * a.y;
            }
            let sx = if dx > 0.0 { nx / dx } else { 1.0 };
            let sy = if dy > 0.0 { ny / dy } else { 1.0 };
            if sx.abs() < 1e-12 || sy.abs() < 1e-12 {
                return None;
            }
            out.push((sx, sy));
        } else {
            let s = similarity(&g.pts[0], &g.pts[k], false);
            if s.re.abs() < 1e-12 {
                return None;
            }
            out.push((s.re, s.re));
        }
    }
    Some(out)
}

fn fit_scaled(g: &Group, per_axis: bool) -> Option<(FitParams, Vec<usize>, f64)> {
    let raw = pairwise_scales(g, per_axis)?;
    let cents: Vec<Vec2> = g.pts.iter().map(|p| centroid(p)).collect();
    let mut by_scale: Vec<usize> = (0..g.pts.len()).collect();
    by_scale.sort_by(|&i, &j| {
        raw[i]
            .0
            .partial_cmp(&raw[j].0)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(
                raw[i]
                    .1
                    .partial_cmp(&raw[j].1)
                    .unwrap_or(core::cmp::Ordering::Equal),
            )
            .then(i.cmp(&j))
    });
    // input order first: drawing order usually is instance order
    let orders = [(0..raw.len()).collect(), by_scale, projection_order(&cents)];
    let tol_abs = 1e-9 * g.diameter.max(f64::MIN_POSITIVE);
    let mut best: Option<(FitParams, Vec<usize>, f64)> = None;
    for order in orders {
        let s0 = raw[order[0]];
        let rel: Vec<(f64, f64)> = order
            .iter()
            .map(|&i| (raw[i].0 / s0.0, raw[i].1 / s0.1))
            .collect();
        for no_step in [true, false] {
            let (base, step) = solve_base_step(&cents, &order, &rel, no_step);
            let res = scaled_residual(g, &order, base, step, &rel);
            let better = best.as_ref().is_none_or(|b| res < b.2 - tol_abs);
            if better {
                let params = if per_axis {
                    FitParams::AxisScale {
                        base,
                        step,
                        scales: rel.clone(),
                    }
                } else {
                    FitParams::TranslationScale {
                        base,
                        step,
                        scales: rel.iter().map(|s| s.0).collect(),
                    }
                };
                best = Some((params, order.clone(), res));
            }
            // a fit without a step is preferred whenever it is exact
            if no_step && res <= tol_abs {
                break;
            }
        }
    }
    best
}

fn group_diameter(pts: &[Vec<Vec2>]) -> f64 {
    let b = BBox::from_points(pts.iter().flatten().copied());
    b.map_or(0.0, |b| math::hypot(b.width(), b.height()))
}

fn build_group(prepared: &[&Prepared]) -> Group {
    let closed = prepared[0].closed;
    let round: Option<Vec<(Vec2, f64)>> = prepared.iter().map(|p| p.round).collect();
    let mut g = Group {
        pts: alloc::vec![prepared[0].points.clone()],
        closed,
        diameter: 0.0,
        round: round.clone(),
    };
    for (k, p) in prepared.iter().enumerate().skip(1) {
        let pts = match &round {
            Some(r) => circle_samples(&g, r, k, 0.0),
            None => {
                let (s, _) = best_shift(&prepared[0].points, &p.points, closed, true);
                shifted(&p.points, s)
            }
        };
        g.pts.push(pts);
    }
    g.diameter = group_diameter(&g.pts);
    g
}

/// Fits the simple-to-complex model chain to a group of congruent elements.
pub fn fit_transform_chain(group: &[FlatElement], tol: f64) -> Result<FitResult, InferError> {
    let prepared = prepare(group)?;
    let refs: Vec<&Prepared> = prepared.iter().collect();
    Ok(fit_prepared(&refs, tol).0)
}

/// Returns the fit and, for rotation models, the correspondence-adjusted
/// group used.
fn fit_prepared(prepared: &[&Prepared], tol: f64) -> (FitResult, Group) {
    let g = build_group(prepared);
    let m = g.pts.len();
    if m < 2 {
        return (FitResult::none(m), g);
    }
    let limit = tol * g.diameter;
    let accept = |model: FitModel, params: FitParams, order: Vec<usize>, residual: f64| FitResult {
        model,
        params: Some(params),
        order,
        residual,
    };
    if let Some((p, order, r)) = fit_translation(&g) {
        if r < limit {
            return (accept(FitModel::Translation, p, order, r), g);
        }
    }
    if let Some((p, order, r, cand)) = fit_rotation_like(&g, false) {
        if r < limit {
            return (accept(FitModel::Rotation, p, order, r), cand);
        }
    }
    if let Some((p, order, r)) = fit_scaled(&g, false) {
        if r < limit {
            return (accept(FitModel::TranslationScale, p, order, r), g);
        }
    }
    if let Some((p, order, r, cand)) = fit_rotation_like(&g, true) {
        if r < limit {
            return (accept(FitModel::RotationScale, p, order, r), cand);
        }
    }
    if let Some((p, order, r)) = fit_scaled(&g, true) {
        if r < limit {
            return (accept(FitModel::AxisScale, p, order, r), g);
        }
    }
    (FitResult::none(m), g)
}

/// Splits `m` into a [`Transform`] when it has no shear.
pub fn decompose(m: &AffineMatrix) -> Option<Transform> {
    let sx = math::hypot(m.a, m.b);
    if sx == 0.0 {
        return None;
    }
    let det = m.determinant();
    if det == 0.0 {
        return None;
    }
    let sy = det / sx;
    let shear = (m.a * m.c + m.b * m.d) / (sx * sy.abs());
    if shear.abs() > 1e-9 {
        return None;
    }
    let angle = if m.b == 0.0 && m.a > 0.0 {
        0.0
    } else {
        math::atan2(m.b, m.a) / math::DEG
    };
    Some(Transform {
        translate: Vec2::new(m.e, m.f),
        rotate: Rotation {
            center: Vec2::ZERO,
            angle_deg: angle,
        },
        scale: Scale { sx, sy },
    })
}

/// Applies `m` to the primitive's geometry, converting rects and circles to
/// polygons and paths. Text and images cannot absorb a shear and keep the
/// closest shear-free transform instead.
fn bake(p: &Primitive, m: &AffineMatrix) -> Option<Primitive> {
    let mut out = match p.kind {
        PrimitiveKind::Rect => {
            let pts = outline_points(p, false).ok()?;
            Primitive::polygon(pts.iter().map(|q| m.apply(*q)).collect())
        }
        PrimitiveKind::Polygon => {
            Primitive::polygon(p.points().iter().map(|q| m.apply(*q)).collect())
        }
        PrimitiveKind::Line => {
            let a = m.apply(Vec2::new(p.num_or_zero("x1"), p.num_or_zero("y1")));
            let b = m.apply(Vec2::new(p.num_or_zero("x2"), p.num_or_zero("y2")));
            Primitive::line(a.x, a.y, b.x, b.y)
        }
        PrimitiveKind::Circle => {
            let (cx, cy, r) = (p.num_or_zero("cx"), p.num_or_zero("cy"), p.num_or_zero("r"));
            let d = alloc::format!(
                "M{},{} A{r},{r} 0 0 1 {},{} A{r},{r} 0 0 1 {},{} Z",
                cx + r,
                cy,
                cx - r,
                cy,
                cx + r,
                cy
            );
            let segs = path::parse_path(&d).ok()?;
            let segs = path::transform_segments(&segs, m);
            Primitive::path(&path::to_path_data(&segs, |v| alloc::format!("{v}")))
        }
        PrimitiveKind::Path => {
            let segs = path::parse_path(p.str_attr("d")?).ok()?;
            let segs = path::transform_segments(&segs, m);
            Primitive::path(&path::to_path_data(&segs, |v| alloc::format!("{v}")))
        }
        PrimitiveKind::Text | PrimitiveKind::Image => return None,
    };
    for k in ["fill", "stroke", "strokeWidth", "opacity"] {
        if let Some(v) = p.attrs.get(k) {
            out.attrs.insert(k.into(), v.clone());
        }
    }
    Some(out)
}

/// Primitive plus a shear-free transform reproducing `p` under `m`.
fn placed_primitive(p: &Primitive, m: &AffineMatrix) -> (Primitive, Transform) {
    if let Some(t) = decompose(m) {
        return (p.clone(), t);
    }
    match bake(p, m) {
        Some(baked) => (baked, Transform::identity()),
        None => {
            // drop the shear: keep rotation and the x scale
            let sx = math::hypot(m.a, m.b);
            let angle = math::atan2(m.b, m.a) / math::DEG;
            let t = Transform {
                translate: Vec2::new(m.e, m.f),
                rotate: Rotation {
                    center: Vec2::ZERO,
                    angle_deg: angle,
                },
                scale: Scale {
                    sx,
                    sy: m.determinant() / sx,
                },
            };
            (p.clone(), t)
        }
    }
}

/// What inference contributes to a document.
#[derive(Debug, Clone, PartialEq)]
pub struct InferPlan {
    pub ops: Vec<Operation>,
    /// Top-level container created (a compositor when several were needed).
    pub top: String,
    /// Every container id the ops create.
    pub created: Vec<String>,
    pub fits: Vec<FitResult>,
}

struct IdGen<'a> {
    doc: &'a GlyphDocument,
    counters: BTreeMap<&'static str, u32>,
    taken: Vec<String>,
}

impl IdGen<'_> {
    fn next(&mut self, kind: &'static str) -> String {
        loop {
            let n = self.counters.entry(kind).or_insert(0);
            *n += 1;
            let id = alloc::format!("inferred-{kind}-{n}");
            if !self.doc.contains(&id) && !self.taken.contains(&id) {
                self.taken.push(id.clone());
                return id;
            }
        }
    }
}

fn transform_params(t: &Transform) -> BTreeMap<String, AttrValue> {
    let mut m = BTreeMap::new();
    m.insert(
        "transform.translate.x".to_string(),
        AttrValue::Num(t.translate.x),
    );
    m.insert(
        "transform.translate.y".to_string(),
        AttrValue::Num(t.translate.y),
    );
    m
}

/// Coordinate kind, arrangement, origin and optional per-instance scales.
type RepeaterShape = (CoordKind, Arrangement, Vec2, Option<Vec<(f64, f64)>>);

/// Plans the operations that add the inferred structure of `elems` to `doc`.
pub fn plan_inference(
    doc: &GlyphDocument,
    elems: &[FlatElement],
    tol: f64,
) -> Result<InferPlan, InferError> {
    if elems.is_empty() {
        return Err(InferError::EmptyInput);
    }
    let prepared = prepare(elems)?;
    let groups = group_prepared(&prepared, tol);
    let mut ids = IdGen {
        doc,
        counters: BTreeMap::new(),
        taken: Vec::new(),
    };
    let mut ops = Vec::new();
    let mut tops = Vec::new();
    let mut fits = Vec::new();

    let basic = |ids: &mut IdGen, ops: &mut Vec<Operation>, e: &FlatElement, m: &AffineMatrix| {
        let id = ids.next("basic");
        let (p, t) = placed_primitive(&e.primitive, m);
        ops.push(Operation::CreateBasic {
            id: id.as_str().into(),
            primitive_kind: p.kind,
            params: p.attrs,
            coord: CoordinateSystem::default(),
            transform: t,
        });
        id
    };

    for g in &groups {
        let refs: Vec<&Prepared> = g.iter().map(|&i| &prepared[i]).collect();
        let fit = if g.len() >= 2 {
            fit_prepared(&refs, tol).0
        } else {
            FitResult::none(1)
        };
        if fit.model == FitModel::None {
            for &i in g {
                let e = &elems[i];
                tops.push(basic(&mut ids, &mut ops, e, &e.world_matrix));
            }
            fits.push(fit);
            continue;
        }
        let ordered: Vec<&FlatElement> = fit.order.iter().map(|&k| &elems[g[k]]).collect();
        let first = ordered[0];
        let count = ordered.len() as u32;
        let (kind, arrangement, origin, scales): RepeaterShape =
            match fit.params.as_ref().expect("fitted") {
                FitParams::Translation { step } => (
                    CoordKind::Cartesian,
                    Arrangement::cartesian(*step),
                    Vec2::ZERO,
                    None,
                ),
                FitParams::Rotation {
                    center,
                    delta_angle_deg,
                } => (
                    CoordKind::Polar,
                    Arrangement::polar(0.0, 0.0, *delta_angle_deg),
                    *center,
                    None,
                ),
                FitParams::TranslationScale { base, step, scales } => (
                    CoordKind::Cartesian,
                    Arrangement::cartesian(*step),
                    *base,
                    Some(scales.iter().map(|s| (*s, *s)).collect()),
                ),
                FitParams::RotationScale {
                    center,
                    delta_angle_deg,
                    scales,
                } => (
                    CoordKind::Polar,
                    Arrangement::polar(0.0, 0.0, *delta_angle_deg),
                    *center,
                    Some(scales.iter().map(|s| (*s, *s)).collect()),
                ),
                FitParams::AxisScale { base, step, scales } => (
                    CoordKind::Cartesian,
                    Arrangement::cartesian(*step),
                    *base,
                    Some(scales.clone()),
                ),
            };
        let own = compose(
            &AffineMatrix::translate(-origin.x, -origin.y),
            &first.world_matrix,
        );
        let child = basic(&mut ids, &mut ops, first, &own);
        let rid = ids.next("repeater");
        ops.push(Operation::CreateRepeater {
            id: rid.as_str().into(),
            target_id: child.as_str().into(),
            coord_kind: kind,
            count,
            arrangement: ArrangementSpec::Full(arrangement),
        });
        if origin != Vec2::ZERO {
            ops.push(Operation::ModifyParams {
                target_id: rid.as_str().into(),
                params: transform_params(&Transform::translation(origin.x, origin.y)),
            });
        }
        if let Some(scales) = scales {
            let uniform = scales.iter().all(|(a, b)| a == b);
            let mut encode = |path: &str, vals: Vec<f64>| {
                if vals.iter().all(|v| (*v - 1.0).abs() < 1e-12) {
                    return;
                }
                ops.push(Operation::EncodeData {
                    target_id: rid.as_str().into(),
                    attribute_path: path.into(),
                    data: DataSource::Values(vals.into_iter().map(Scalar::Num).collect()),
                    scale: None,
                });
            };
            if uniform {
                encode("instance.scale.sx+sy", scales.iter().map(|s| s.0).collect());
            } else {
                encode("instance.scale.sx", scales.iter().map(|s| s.0).collect());
                encode("instance.scale.sy", scales.iter().map(|s| s.1).collect());
            }
        }
        if first.primitive.kind == PrimitiveKind::Text {
            let contents: Vec<&str> = ordered
                .iter()
                .map(|e| e.primitive.str_attr("content").unwrap_or(""))
                .collect();
            if contents.iter().any(|c| *c != contents[0]) {
                ops.push(Operation::EncodeData {
                    target_id: rid.as_str().into(),
                    attribute_path: "instance.primitive.content".into(),
                    data: DataSource::Values(
                        contents.iter().map(|c| Scalar::Str((*c).into())).collect(),
                    ),
                    scale: None,
                });
            }
        }
        tops.push(rid);
        fits.push(fit);
    }

    let top = if tops.len() == 1 {
        tops[0].clone()
    } else {
        let cid = ids.next("compositor");
        ops.push(Operation::CreateCompositor {
            id: cid.as_str().into(),
            children: tops.iter().map(|t| t.as_str().into()).collect(),
            relations: Vec::new(),
        });
        cid
    };
    Ok(InferPlan {
        ops,
        top,
        created: ids.taken,
        fits,
    })
}

/// Infers a standalone document from flat elements.
pub fn infer_structure(elems: &[FlatElement], tol: f64) -> Result<GlyphDocument, InferError> {
    let empty = GlyphDocument::new();
    let plan = plan_inference(&empty, elems, tol)?;
    let mut doc = empty;
    for op in &plan.ops {
        doc = apply(&doc, op)?;
    }
    Ok(doc)
}

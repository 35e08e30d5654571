//! Affine matrices, bounding boxes and anchor points.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::layout::SceneNode;
use crate::math;
use crate::model::{Primitive, PrimitiveKind, Transform, Vec2};
use crate::path;

/// Width of one text character as a fraction of the font size.
pub const TEXT_ADVANCE: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeometryError {
    #[error("scale factors must be non-zero")]
    DegenerateScale,
    #[error("primitive has no geometry")]
    EmptyGeometry,
    #[error("invalid primitive geometry: {0}")]
    InvalidPrimitive(String),
}

/// Maps `(x, y)` to `(a·x + c·y + e, b·x + d·y + f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl Default for AffineMatrix {
    fn default() -> Self {
        AffineMatrix::IDENTITY
    }
}

impl AffineMatrix {
    pub const IDENTITY: AffineMatrix = AffineMatrix {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
        e: 0.0,
        f: 0.0,
    };

    pub const fn new(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Self {
        AffineMatrix { a, b, c, d, e, f }
    }

    pub const fn translate(x: f64, y: f64) -> Self {
        AffineMatrix::new(1.0, 0.0, 0.0, 1.0, x, y)
    }

    pub const fn scale(sx: f64, sy: f64) -> Self {
        AffineMatrix::new(sx, 0.0, 0.0, sy, 0.0, 0.0)
    }

    /// Rotation by `angle_deg` about the origin. Positive angles turn `+x`
    /// towards `+y` (clockwise on screen).
    pub fn rotate_deg(angle_deg: f64) -> Self {
        let (s, c) = math::sin_cos_deg(angle_deg);
        AffineMatrix::new(c, s, -s, c, 0.0, 0.0)
    }

    pub fn rotate_about(angle_deg: f64, center: Vec2) -> Self {
        AffineMatrix::translate(center.x, center.y)
            .then_inner(&AffineMatrix::rotate_deg(angle_deg))
            .then_inner(&AffineMatrix::translate(-center.x, -center.y))
    }

    /// `Translate ∘ Rotate(center, θ) ∘ Scale`, without checking the scale.
    pub fn from_transform_unchecked(t: &Transform) -> Self {
        AffineMatrix::translate(t.translate.x, t.translate.y)
            .then_inner(&AffineMatrix::rotate_about(
                t.rotate.angle_deg,
                t.rotate.center,
            ))
            .then_inner(&AffineMatrix::scale(t.scale.sx, t.scale.sy))
    }

    /// `self ∘ inner`.
    pub fn then_inner(&self, inner: &AffineMatrix) -> AffineMatrix {
        compose(self, inner)
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            self.a * p.x + self.c * p.y + self.e,
            self.b * p.x + self.d * p.y + self.f,
        )
    }

    /// Applies only the linear part.
    pub fn apply_vector(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.c * v.y, self.b * v.x + self.d * v.y)
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn inverse(&self) -> Option<AffineMatrix> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let a = self.d / det;
        let b = -self.b / det;
        let c = -self.c / det;
        let d = self.a / det;
        let e = -(a * self.e + c * self.f);
        let f = -(b * self.e + d * self.f);
        Some(AffineMatrix::new(a, b, c, d, e, f))
    }

    pub fn is_identity(&self) -> bool {
        *self == AffineMatrix::IDENTITY
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.a, self.b, self.c, self.d, self.e, self.f]
    }

    pub fn max_abs_diff(&self, o: &AffineMatrix) -> f64 {
        self.to_array()
            .iter()
            .zip(o.to_array())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

/// `Translate ∘ Rotate(center, θ) ∘ Scale` for a transform.
pub fn to_matrix(t: &Transform) -> Result<AffineMatrix, GeometryError> {
    if t.scale.sx == 0.0 || t.scale.sy == 0.0 {
        return Err(GeometryError::DegenerateScale);
    }
    Ok(AffineMatrix::from_transform_unchecked(t))
}

/// The matrix applying `inner` first, then `outer`.
pub fn compose(outer: &AffineMatrix, inner: &AffineMatrix) -> AffineMatrix {
    let (m, n) = (outer, inner);
    AffineMatrix {
        a: m.a * n.a + m.c * n.b,
        b: m.b * n.a + m.d * n.b,
        c: m.a * n.c + m.c * n.d,
        d: m.b * n.c + m.d * n.d,
        e: m.a * n.e + m.c * n.f + m.e,
        f: m.b * n.e + m.d * n.f + m.f,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        BBox {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn from_points(pts: impl IntoIterator<Item = Vec2>) -> Option<BBox> {
        let mut it = pts.into_iter();
        let first = it.next()?;
        let mut b = BBox::new(first.x, first.y, first.x, first.y);
        for p in it {
            b.include(p);
        }
        Some(b)
    }

    pub fn include(&mut self, p: Vec2) {
        self.min_x = self.min_x.min(p.x);
        self.min_y = self.min_y.min(p.y);
        self.max_x = self.max_x.max(p.x);
        self.max_y = self.max_y.max(p.y);
    }

    pub fn union(&self, o: &BBox) -> BBox {
        BBox::new(
            self.min_x.min(o.min_x),
            self.min_y.min(o.min_y),
            self.max_x.max(o.max_x),
            self.max_y.max(o.max_y),
        )
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(
            (self.min_x + self.max_x) / 2.0,
            (self.min_y + self.max_y) / 2.0,
        )
    }

    pub fn translated(&self, v: Vec2) -> BBox {
        BBox::new(
            self.min_x + v.x,
            self.min_y + v.y,
            self.max_x + v.x,
            self.max_y + v.y,
        )
    }

    pub fn contains(&self, p: Vec2, eps: f64) -> bool {
        p.x >= self.min_x - eps
            && p.x <= self.max_x + eps
            && p.y >= self.min_y - eps
            && p.y <= self.max_y + eps
    }

    pub fn corners(&self) -> [Vec2; 4] {
        [
            Vec2::new(self.min_x, self.min_y),
            Vec2::new(self.max_x, self.min_y),
            Vec2::new(self.max_x, self.max_y),
            Vec2::new(self.min_x, self.max_y),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AnchorName {
    Center,
    TopCenter,
    BottomCenter,
    LeftCenter,
    RightCenter,
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl AnchorName {
    pub const ALL: [AnchorName; 9] = [
        AnchorName::Center,
        AnchorName::TopCenter,
        AnchorName::BottomCenter,
        AnchorName::LeftCenter,
        AnchorName::RightCenter,
        AnchorName::TopLeft,
        AnchorName::TopRight,
        AnchorName::BottomLeft,
        AnchorName::BottomRight,
    ];
}

/// Named reference point on `b`; `top` is `min_y` since `+y` points down.
pub fn anchor_point(b: &BBox, name: AnchorName) -> Vec2 {
    let c = b.center();
    match name {
        AnchorName::Center => c,
        AnchorName::TopCenter => Vec2::new(c.x, b.min_y),
        AnchorName::BottomCenter => Vec2::new(c.x, b.max_y),
        AnchorName::LeftCenter => Vec2::new(b.min_x, c.y),
        AnchorName::RightCenter => Vec2::new(b.max_x, c.y),
        AnchorName::TopLeft => Vec2::new(b.min_x, b.min_y),
        AnchorName::TopRight => Vec2::new(b.max_x, b.min_y),
        AnchorName::BottomLeft => Vec2::new(b.min_x, b.max_y),
        AnchorName::BottomRight => Vec2::new(b.max_x, b.max_y),
    }
}

/// Estimated text box `(min, max)` in local coordinates. The baseline sits
/// at `y`; `centered` boxes straddle `x`.
pub fn text_box(p: &Primitive, centered: bool) -> (Vec2, Vec2) {
    let fs = p.num_or_zero("fontSize");
    let chars = p.str_attr("content").map_or(0, |s| s.chars().count());
    let w = TEXT_ADVANCE * fs * chars as f64;
    let (x, y) = (p.num_or_zero("x"), p.num_or_zero("y"));
    let x0 = if centered { x - w / 2.0 } else { x };
    (Vec2::new(x0, y - fs), Vec2::new(x0 + w, y))
}

/// Number of samples taken around a circle's circumference.
pub const CIRCLE_SAMPLES: usize = 64;

/// Ordered local points describing the primitive's outline: rect and image
/// corners, polygon vertices, line endpoints, sampled paths and circles, text
/// box corners. Point `k` of two congruent primitives corresponds.
pub fn outline_points(p: &Primitive, text_centered: bool) -> Result<Vec<Vec2>, GeometryError> {
    let n = |k: &str| p.num_or_zero(k);
    let pts = match p.kind {
        PrimitiveKind::Rect | PrimitiveKind::Image => {
            let (x, y, w, h) = (n("x"), n("y"), n("width"), n("height"));
            alloc::vec![
                Vec2::new(x, y),
                Vec2::new(x + w, y),
                Vec2::new(x + w, y + h),
                Vec2::new(x, y + h),
            ]
        }
        PrimitiveKind::Circle => {
            let (cx, cy, r) = (n("cx"), n("cy"), n("r"));
            (0..CIRCLE_SAMPLES)
                .map(|k| {
                    let (s, c) = math::sin_cos_deg(360.0 * k as f64 / CIRCLE_SAMPLES as f64);
                    Vec2::new(cx + r * c, cy + r * s)
                })
                .collect()
        }
        PrimitiveKind::Polygon => p.points().to_vec(),
        PrimitiveKind::Line => {
            alloc::vec![Vec2::new(n("x1"), n("y1")), Vec2::new(n("x2"), n("y2")),]
        }
        PrimitiveKind::Path => {
            let d = p.str_attr("d").unwrap_or("");
            let segs = path::parse_path(d)
                .map_err(|e| GeometryError::InvalidPrimitive(alloc::format!("{e}")))?;
            path::sample_segments(&segs)
        }
        PrimitiveKind::Text => {
            let (lo, hi) = text_box(p, text_centered);
            alloc::vec![lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)]
        }
    };
    if pts.is_empty() {
        return Err(GeometryError::EmptyGeometry);
    }
    Ok(pts)
}

/// Bounds of `p` mapped through `m`. Circles are bounded exactly as the
/// ellipse they become.
pub fn primitive_bbox_under(
    p: &Primitive,
    m: &AffineMatrix,
    text_centered: bool,
) -> Result<BBox, GeometryError> {
    if p.kind == PrimitiveKind::Circle {
        let (cx, cy, r) = (p.num_or_zero("cx"), p.num_or_zero("cy"), p.num_or_zero("r"));
        let c = m.apply(Vec2::new(cx, cy));
        let hx = r * math::hypot(m.a, m.c);
        let hy = r * math::hypot(m.b, m.d);
        return Ok(BBox::new(c.x - hx, c.y - hy, c.x + hx, c.y + hy));
    }
    let pts = outline_points(p, text_centered)?;
    BBox::from_points(pts.into_iter().map(|q| m.apply(q))).ok_or(GeometryError::EmptyGeometry)
}

/// Axis-aligned bounds of the primitive in its own coordinates.
pub fn primitive_bbox(p: &Primitive) -> Result<BBox, GeometryError> {
    primitive_bbox_under(p, &AffineMatrix::IDENTITY, false)
}

/// Bounds of a scene node in its parent's frame (the node's own matrix is
/// applied). Empty groups have no bounds.
pub fn node_bbox(n: &SceneNode) -> Result<BBox, GeometryError> {
    node_bbox_under(n, &AffineMatrix::IDENTITY)?.ok_or(GeometryError::EmptyGeometry)
}

/// Bounds of `n` mapped through `outer`; `None` for a subtree with no leaves.
pub fn node_bbox_under(n: &SceneNode, outer: &AffineMatrix) -> Result<Option<BBox>, GeometryError> {
    match n {
        SceneNode::Leaf(leaf) => {
            let m = compose(outer, &leaf.matrix);
            primitive_bbox_under(&leaf.primitive, &m, leaf.text_centered).map(Some)
        }
        SceneNode::Group(g) => {
            let m = compose(outer, &g.matrix);
            let mut acc: Option<BBox> = None;
            for ch in &g.children {
                if let Some(b) = node_bbox_under(ch, &m)? {
                    acc = Some(match acc {
                        Some(a) => a.union(&b),
                        None => b,
                    });
                }
            }
            Ok(acc)
        }
    }
}

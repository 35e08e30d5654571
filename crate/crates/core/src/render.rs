//! Deterministic SVG emission from an instantiated scene.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::geometry::{node_bbox_under, AffineMatrix, BBox};
use crate::layout::{Scene, SceneLeaf, SceneNode};
use crate::model::{AttrValue, PrimitiveKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("cannot format a non-finite number")]
pub struct NonFinite;

/// Rounds half-to-even at `decimals` places and trims trailing zeros and a
/// trailing dot. Negative zero prints as `0`.
pub fn format_number(x: f64, decimals: u8) -> Result<String, NonFinite> {
    if !x.is_finite() {
        return Err(NonFinite);
    }
    let mut s = alloc::format!("{:.*}", decimals as usize, x);
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViewBox {
    Fixed([f64; 4]),
    /// Scene bounds grown by `margin` on every side.
    Fit {
        margin: f64,
    },
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgConfig {
    pub width: f64,
    pub height: f64,
    pub view_box: ViewBox,
    /// Clamped to `0..=8`.
    pub decimals: u8,
    pub background: Option<String>,
    /// Emit `data-container-id` on every group and element.
    pub annotate: bool,
}

impl Default for SvgConfig {
    fn default() -> Self {
        SvgConfig {
            width: 400.0,
            height: 400.0,
            view_box: ViewBox::Fit { margin: 10.0 },
            decimals: 4,
            background: None,
            annotate: false,
        }
    }
}

struct Writer<'a> {
    out: String,
    cfg: &'a SvgConfig,
    decimals: u8,
}

fn escape(s: &str, attr: bool) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

fn svg_attr_name(name: &str) -> &str {
    match name {
        "strokeWidth" => "stroke-width",
        "fontSize" => "font-size",
        other => other,
    }
}

impl Writer<'_> {
    fn num(&self, v: f64) -> String {
        format_number(v, self.decimals).unwrap_or_else(|_| "0".into())
    }

    fn matrix(&self, m: &AffineMatrix) -> String {
        let parts: Vec<String> = m.to_array().iter().map(|v| self.num(*v)).collect();
        alloc::format!("matrix({})", parts.join(","))
    }

    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
    }

    fn open(&mut self, depth: usize, name: &str, mut attrs: Vec<(String, String)>, close: bool) {
        attrs.sort();
        self.indent(depth);
        self.out.push('<');
        self.out.push_str(name);
        for (k, v) in &attrs {
            let _ = write!(self.out, " {}=\"{}\"", k, escape(v, true));
        }
        self.out.push_str(if close { "/>\n" } else { ">" });
    }

    fn node(&mut self, n: &SceneNode, depth: usize) {
        match n {
            SceneNode::Group(g) => {
                let mut attrs = Vec::new();
                if !g.matrix.is_identity() {
                    attrs.push(("transform".into(), self.matrix(&g.matrix)));
                }
                if self.cfg.annotate {
                    attrs.push(("data-container-id".into(), g.name.to_string()));
                }
                if g.children.is_empty() {
                    self.open(depth, "g", attrs, true);
                    return;
                }
                self.open(depth, "g", attrs, false);
                self.out.push('\n');
                for ch in &g.children {
                    self.node(ch, depth + 1);
                }
                self.indent(depth);
                self.out.push_str("</g>\n");
            }
            SceneNode::Leaf(l) => self.leaf(l, depth),
        }
    }

    fn leaf(&mut self, l: &SceneLeaf, depth: usize) {
        let p = &l.primitive;
        let mut attrs: Vec<(String, String)> = Vec::new();
        let mut content = None;
        for (k, v) in &p.attrs {
            if p.kind == PrimitiveKind::Text && k == "content" {
                content = v.as_str().map(String::from);
                continue;
            }
            let value = match v {
                AttrValue::Num(x) => self.num(*x),
                AttrValue::Str(s) => s.clone(),
                AttrValue::Points(pts) => pts
                    .iter()
                    .map(|q| alloc::format!("{},{}", self.num(q.x), self.num(q.y)))
                    .collect::<Vec<_>>()
                    .join(" "),
            };
            attrs.push((svg_attr_name(k).into(), value));
        }
        if !l.matrix.is_identity() {
            attrs.push(("transform".into(), self.matrix(&l.matrix)));
        }
        if l.text_centered {
            attrs.push(("text-anchor".into(), "middle".into()));
        }
        if self.cfg.annotate {
            attrs.push(("data-container-id".into(), l.container.to_string()));
        }
        let name = p.kind.name();
        match content {
            Some(text) => {
                self.open(depth, name, attrs, false);
                self.out.push_str(&escape(&text, false));
                let _ = writeln!(self.out, "</{name}>");
            }
            None => self.open(depth, name, attrs, true),
        }
    }
}

/// Bounds of everything drawn, in document coordinates.
pub fn scene_bbox(scene: &Scene) -> Option<BBox> {
    let root = scene.root.as_ref()?;
    node_bbox_under(root, &AffineMatrix::IDENTITY)
        .ok()
        .flatten()
}

/// Serializes `scene` as an SVG 1.1 document.
pub fn render_svg(scene: &Scene, cfg: &SvgConfig) -> String {
    let mut w = Writer {
        out: String::new(),
        cfg,
        decimals: cfg.decimals.min(8),
    };
    let view_box = match cfg.view_box {
        ViewBox::Fixed(v) => Some(v),
        ViewBox::Fit { margin } => Some(match scene_bbox(scene) {
            Some(b) => [
                b.min_x - margin,
                b.min_y - margin,
                b.width() + 2.0 * margin,
                b.height() + 2.0 * margin,
            ],
            None => [0.0, 0.0, cfg.width, cfg.height],
        }),
        ViewBox::None => None,
    };
    let mut attrs: Vec<(String, String)> = alloc::vec![
        ("width".into(), w.num(cfg.width)),
        ("height".into(), w.num(cfg.height)),
        ("xmlns".into(), "http://www.w3.org/2000/svg".into()),
    ];
    if let Some(v) = view_box {
        let s: Vec<String> = v.iter().map(|x| w.num(*x)).collect();
        attrs.push(("viewBox".into(), s.join(" ")));
    }
    let empty = scene.root.is_none() && cfg.background.is_none();
    w.open(0, "svg", attrs, empty);
    if empty {
        return w.out;
    }
    w.out.push('\n');
    if let Some(bg) = &cfg.background {
        let [x, y, width, height] = view_box.unwrap_or([0.0, 0.0, cfg.width, cfg.height]);
        let attrs = alloc::vec![
            ("fill".into(), bg.clone()),
            ("x".into(), w.num(x)),
            ("y".into(), w.num(y)),
            ("width".into(), w.num(width)),
            ("height".into(), w.num(height)),
        ];
        w.open(1, "rect", attrs, true);
    }
    if let Some(root) = &scene.root {
        w.node(root, 1);
    }
    w.out.push_str("</svg>\n");
    w.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ContainerId, Primitive};

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(1.5, 4).unwrap(), "1.5");
        assert_eq!(format_number(-0.00004, 4).unwrap(), "0");
        assert_eq!(format_number(1.23456789, 4).unwrap(), "1.2346");
        assert_eq!(format_number(-0.0, 2).unwrap(), "0");
        assert_eq!(format_number(100.0, 4).unwrap(), "100");
        assert_eq!(format_number(2.5, 0).unwrap(), "2");
        // 0.125 is exact in binary, so this is a true tie
        assert_eq!(format_number(0.125, 2).unwrap(), "0.12");
        assert_eq!(format_number(0.375, 2).unwrap(), "0.38");
        assert!(format_number(f64::NAN, 2).is_err());
    }

    #[test]
    fn single_circle() {
        let scene = Scene {
            root: Some(SceneNode::Leaf(SceneLeaf {
                container: ContainerId::from("c"),
                primitive: Primitive::circle(0.0, 0.0, 5.0).with("fill", "#d33"),
                matrix: AffineMatrix::IDENTITY,
                text_centered: false,
            })),
        };
        let cfg = SvgConfig {
            view_box: ViewBox::None,
            ..SvgConfig::default()
        };
        assert_eq!(
            render_svg(&scene, &cfg),
            "<svg height=\"400\" width=\"400\" xmlns=\"http://www.w3.org/2000/svg\">\n  <circle cx=\"0\" cy=\"0\" fill=\"#d33\" r=\"5\"/>\n</svg>\n"
        );
    }

    #[test]
    fn empty_group_self_closes() {
        let scene = Scene {
            root: Some(SceneNode::Group(crate::layout::SceneGroup {
                name: ContainerId::from("g"),
                matrix: AffineMatrix::translate(1.0, 2.0),
                children: Vec::new(),
            })),
        };
        let svg = render_svg(&scene, &SvgConfig::default());
        assert!(
            svg.contains("<g transform=\"matrix(1,0,0,1,1,2)\"/>"),
            "{svg}"
        );
    }

    #[test]
    fn text_is_escaped() {
        let scene = Scene {
            root: Some(SceneNode::Leaf(SceneLeaf {
                container: ContainerId::from("t"),
                primitive: Primitive::text(0.0, 0.0, "a<b & \"c\"", 10.0),
                matrix: AffineMatrix::IDENTITY,
                text_centered: true,
            })),
        };
        let svg = render_svg(&scene, &SvgConfig::default());
        assert!(svg.contains(
            "<text font-size=\"10\" text-anchor=\"middle\" x=\"0\" y=\"0\">a&lt;b &amp; \"c\"</text>"
        ), "{svg}");
    }
}

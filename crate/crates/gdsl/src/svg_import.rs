//! Flattens an SVG file into world-placed primitives for structure inference.
//!
//! Supported: `rect`, `circle`, `line`, `polyline`, `polygon`, `path`, `text`
//! and `image`, nested in `svg` and `g`, with `transform` lists made of
//! `matrix`, `translate`, `rotate` and `scale`. Presentation attributes and
//! the `style` attribute provide `fill`, `stroke`, `stroke-width`,
//! `opacity` and `font-size`.

use std::collections::BTreeMap;

use gdsl_core::geometry::{compose, text_box, AffineMatrix};
use gdsl_core::infer::FlatElement;
use gdsl_core::model::{named_color_hex, AttrValue, Primitive, PrimitiveKind, Vec2};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ImportError {
    #[error("not well-formed XML: {0}")]
    Xml(String),
    #[error("unsupported element <{0}>")]
    UnsupportedElement(String),
    #[error("<{element}>: bad `{attr}` value `{value}`")]
    BadAttribute {
        element: String,
        attr: String,
        value: String,
    },
    #[error("<{element}>: {message}")]
    BadPrimitive { element: String, message: String },
}

const IGNORED: [&str; 5] = ["title", "desc", "metadata", "defs", "style"];

fn bad(el: &str, attr: &str, value: &str) -> ImportError {
    ImportError::BadAttribute {
        element: el.into(),
        attr: attr.into(),
        value: value.into(),
    }
}

fn numbers(s: &str) -> Option<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect()
}

fn length(s: &str) -> Option<f64> {
    let t = s.trim();
    let t = t.strip_suffix("px").unwrap_or(t);
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses an SVG `transform` list into one matrix.
pub fn parse_transform(s: &str) -> Option<AffineMatrix> {
    let mut m = AffineMatrix::IDENTITY;
    let mut rest = s.trim();
    while !rest.is_empty() {
        let open = rest.find('(')?;
        let close = rest.find(')')?;
        if close < open {
            return None;
        }
        let name = rest[..open].trim().trim_start_matches(',').trim();
        let args = numbers(&rest[open + 1..close])?;
        let t = match (name, args.as_slice()) {
            ("matrix", [a, b, c, d, e, f]) => AffineMatrix::new(*a, *b, *c, *d, *e, *f),
            ("translate", [x]) => AffineMatrix::translate(*x, 0.0),
            ("translate", [x, y]) => AffineMatrix::translate(*x, *y),
            ("scale", [s]) => AffineMatrix::scale(*s, *s),
            ("scale", [sx, sy]) => AffineMatrix::scale(*sx, *sy),
            ("rotate", [a]) => AffineMatrix::rotate_deg(*a),
            ("rotate", [a, cx, cy]) => AffineMatrix::rotate_about(*a, Vec2::new(*cx, *cy)),
            _ => return None,
        };
        m = compose(&m, &t);
        rest = rest[close + 1..].trim_start_matches(|c: char| c == ',' || c.is_whitespace());
    }
    Some(m)
}

fn style_map(node: roxmltree::Node) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for a in node.attributes() {
        out.insert(a.name().to_string(), a.value().to_string());
    }
    if let Some(style) = node.attribute("style") {
        for decl in style.split(';') {
            if let Some((k, v)) = decl.split_once(':') {
                out.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
    }
    out
}

fn color(el: &str, attr: &str, v: &str) -> Result<AttrValue, ImportError> {
    let v = v.trim();
    let hex = named_color_hex(v).unwrap_or(v);
    if gdsl_core::model::is_valid_color(hex) {
        Ok(AttrValue::Str(hex.into()))
    } else {
        Err(bad(el, attr, v))
    }
}

fn primitive(node: roxmltree::Node, el: &str) -> Result<Primitive, ImportError> {
    let attrs = style_map(node);
    let num = |name: &str| -> Result<f64, ImportError> {
        match attrs.get(name) {
            Some(v) => length(v).ok_or_else(|| bad(el, name, v)),
            None => Ok(0.0),
        }
    };
    let mut p = match el {
        "rect" => Primitive::rect(num("x")?, num("y")?, num("width")?, num("height")?),
        "circle" => Primitive::circle(num("cx")?, num("cy")?, num("r")?),
        "line" => Primitive::line(num("x1")?, num("y1")?, num("x2")?, num("y2")?),
        "polygon" | "polyline" => {
            let raw = attrs.get("points").map(String::as_str).unwrap_or("");
            let vals = numbers(raw)
                .filter(|v| v.len() % 2 == 0)
                .ok_or_else(|| bad(el, "points", raw))?;
            let pts: Vec<Vec2> = vals.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect();
            if el == "polygon" {
                Primitive::polygon(pts)
            } else {
                let d: Vec<String> = pts
                    .iter()
                    .enumerate()
                    .map(|(i, q)| format!("{}{},{}", if i == 0 { "M" } else { "L" }, q.x, q.y))
                    .collect();
                Primitive::path(&d.join(" "))
            }
        }
        "path" => Primitive::path(attrs.get("d").map(String::as_str).unwrap_or("")),
        "text" => {
            let content: String = node
                .descendants()
                .filter(|n| n.is_text())
                .filter_map(|n| n.text())
                .collect();
            let fs = match attrs.get("font-size") {
                Some(v) => length(v).ok_or_else(|| bad(el, "font-size", v))?,
                None => 16.0,
            };
            let mut t = Primitive::text(num("x")?, num("y")?, content.trim(), fs);
            // the model anchors text at its start
            if attrs.get("text-anchor").map(String::as_str) == Some("middle") {
                let x0 = text_box(&t, true).0.x;
                t = t.with("x", x0);
            }
            t
        }
        "image" => {
            // `xlink:href` and `href` share the local name
            let href = attrs.get("href").cloned().unwrap_or_default();
            Primitive::rect(num("x")?, num("y")?, num("width")?, num("height")?).with("href", href)
        }
        other => return Err(ImportError::UnsupportedElement(other.into())),
    };
    if el == "image" {
        p.kind = PrimitiveKind::Image;
    }
    for (svg, model) in [("fill", "fill"), ("stroke", "stroke")] {
        if let Some(v) = attrs.get(svg) {
            p.attrs.insert(model.into(), color(el, svg, v)?);
        }
    }
    for (svg, model) in [("stroke-width", "strokeWidth"), ("opacity", "opacity")] {
        if let Some(v) = attrs.get(svg) {
            let x = length(v).ok_or_else(|| bad(el, svg, v))?;
            p.attrs.insert(model.into(), AttrValue::Num(x));
        }
    }
    p.validate().map_err(|e| ImportError::BadPrimitive {
        element: el.into(),
        message: e.to_string(),
    })?;
    Ok(p)
}

fn walk(
    node: roxmltree::Node,
    outer: &AffineMatrix,
    out: &mut Vec<FlatElement>,
) -> Result<(), ImportError> {
    let el = node.tag_name().name();
    let local = match node.attribute("transform") {
        Some(t) => parse_transform(t).ok_or_else(|| bad(el, "transform", t))?,
        None => AffineMatrix::IDENTITY,
    };
    let m = compose(outer, &local);
    match el {
        "svg" | "g" => {
            for ch in node.children().filter(|n| n.is_element()) {
                walk(ch, &m, out)?;
            }
        }
        e if IGNORED.contains(&e) => {}
        _ => {
            let mut f = FlatElement::new(primitive(node, el)?, m);
            f.source_id = node.attribute("id").map(String::from);
            out.push(f);
        }
    }
    Ok(())
}

/// All drawable elements of `svg` with their accumulated world matrices, in
/// document order.
pub fn import_svg(svg: &str) -> Result<Vec<FlatElement>, ImportError> {
    let tree = roxmltree::Document::parse(svg).map_err(|e| ImportError::Xml(e.to_string()))?;
    let root = tree.root_element();
    if root.tag_name().name() != "svg" {
        return Err(ImportError::UnsupportedElement(
            root.tag_name().name().into(),
        ));
    }
    let mut out = Vec::new();
    walk(root, &AffineMatrix::IDENTITY, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transforms_compose_left_to_right() {
        let m = parse_transform("translate(10 0) scale(2)").unwrap();
        assert_eq!(m.apply(Vec2::new(1.0, 1.0)), Vec2::new(12.0, 2.0));
        let r = parse_transform("rotate(90, 1, 0)").unwrap();
        let p = r.apply(Vec2::new(2.0, 0.0));
        assert!((p - Vec2::new(1.0, 1.0)).norm() < 1e-12);
        assert!(parse_transform("skewX(3)").is_none());
        assert!(parse_transform("translate(1").is_none());
    }

    #[test]
    fn flattens_groups() {
        let svg = r##"<svg xmlns="http://www.w3.org/2000/svg">
            <title>t</title>
            <g transform="translate(5,5)">
              <rect x="0" y="0" width="4" height="2" style="fill: red"/>
              <polyline points="0,0 1,1 2,0" stroke="#000"/>
              <text x="10" y="0" font-size="10" text-anchor="middle">ab</text>
            </g>
          </svg>"##;
        let elems = import_svg(svg).unwrap();
        assert_eq!(elems.len(), 3);
        assert_eq!(elems[0].primitive.str_attr("fill"), Some("#ff0000"));
        assert_eq!(elems[0].world_matrix, AffineMatrix::translate(5.0, 5.0));
        assert_eq!(elems[1].primitive.kind, PrimitiveKind::Path);
        assert_eq!(elems[2].primitive.num("x"), Some(4.0));
    }

    #[test]
    fn rejects_unknown_elements() {
        let svg = r#"<svg xmlns="http://www.w3.org/2000/svg"><ellipse rx="1" ry="2"/></svg>"#;
        assert_eq!(
            import_svg(svg),
            Err(ImportError::UnsupportedElement("ellipse".into()))
        );
        assert!(matches!(import_svg("<svg"), Err(ImportError::Xml(_))));
    }
}

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    Rect,
    Circle,
    Polygon,
    Line,
    Path,
    Text,
    Image,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 7] = [
        PrimitiveKind::Rect,
        PrimitiveKind::Circle,
        PrimitiveKind::Polygon,
        PrimitiveKind::Line,
        PrimitiveKind::Path,
        PrimitiveKind::Text,
        PrimitiveKind::Image,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveKind::Rect => "rect",
            PrimitiveKind::Circle => "circle",
            PrimitiveKind::Polygon => "polygon",
            PrimitiveKind::Line => "line",
            PrimitiveKind::Path => "path",
            PrimitiveKind::Text => "text",
            PrimitiveKind::Image => "image",
        }
    }

    pub fn parse(s: &str) -> Option<PrimitiveKind> {
        PrimitiveKind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn required_attrs(self) -> &'static [&'static str] {
        match self {
            PrimitiveKind::Rect => &["x", "y", "width", "height"],
            PrimitiveKind::Circle => &["cx", "cy", "r"],
            PrimitiveKind::Polygon => &["points"],
            PrimitiveKind::Line => &["x1", "y1", "x2", "y2"],
            PrimitiveKind::Path => &["d"],
            PrimitiveKind::Text => &["x", "y", "content", "fontSize"],
            PrimitiveKind::Image => &["x", "y", "width", "height", "href"],
        }
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Value type expected by a primitive attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrType {
    Number,
    NonNegative,
    /// A number in `[0, 1]`.
    Unit,
    Color,
    Text,
    Points,
    PathData,
}

const STYLE_ATTRS: [(&str, AttrType); 4] = [
    ("fill", AttrType::Color),
    ("stroke", AttrType::Color),
    ("strokeWidth", AttrType::NonNegative),
    ("opacity", AttrType::Unit),
];

/// Type of attribute `name` on a primitive of `kind`, or `None` when the kind
/// has no such attribute.
pub fn attr_type(kind: PrimitiveKind, name: &str) -> Option<AttrType> {
    use AttrType::*;
    if let Some((_, t)) = STYLE_ATTRS.iter().find(|(n, _)| *n == name) {
        return Some(*t);
    }
    let t = match (kind, name) {
        (PrimitiveKind::Rect | PrimitiveKind::Image, "x" | "y") => Number,
        (PrimitiveKind::Rect | PrimitiveKind::Image, "width" | "height") => NonNegative,
        (PrimitiveKind::Image, "href") => Text,
        (PrimitiveKind::Circle, "cx" | "cy") => Number,
        (PrimitiveKind::Circle, "r") => NonNegative,
        (PrimitiveKind::Polygon, "points") => Points,
        (PrimitiveKind::Line, "x1" | "y1" | "x2" | "y2") => Number,
        (PrimitiveKind::Path, "d") => PathData,
        (PrimitiveKind::Text, "x" | "y") => Number,
        (PrimitiveKind::Text, "content") => Text,
        (PrimitiveKind::Text, "fontSize") => NonNegative,
        _ => return None,
    };
    Some(t)
}

/// `#RGB`, `#RRGGBB`, `#RRGGBBAA`, or `none`.
pub fn is_valid_color(s: &str) -> bool {
    if s == "none" {
        return true;
    }
    match s.strip_prefix('#') {
        Some(hex) => matches!(hex.len(), 3 | 6 | 8) && hex.chars().all(|c| c.is_ascii_hexdigit()),
        None => false,
    }
}

const CSS_COLORS: [(&str, &str); 16] = [
    ("black", "#000000"),
    ("silver", "#c0c0c0"),
    ("gray", "#808080"),
    ("white", "#ffffff"),
    ("maroon", "#800000"),
    ("red", "#ff0000"),
    ("purple", "#800080"),
    ("fuchsia", "#ff00ff"),
    ("green", "#008000"),
    ("lime", "#00ff00"),
    ("olive", "#808000"),
    ("yellow", "#ffff00"),
    ("navy", "#000080"),
    ("blue", "#0000ff"),
    ("teal", "#008080"),
    ("aqua", "#00ffff"),
];

/// Hex code of one of the 16 basic CSS color names, case-insensitive.
pub fn named_color_hex(name: &str) -> Option<&'static str> {
    CSS_COLORS
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(name))
        .map(|(_, v)| *v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Num(f64),
    Str(String),
    Points(Vec<Vec2>),
}

impl AttrValue {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            AttrValue::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            AttrValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            AttrValue::Num(_) => "number",
            AttrValue::Str(_) => "string",
            AttrValue::Points(_) => "points",
        }
    }
}

impl From<f64> for AttrValue {
    fn from(v: f64) -> Self {
        AttrValue::Num(v)
    }
}

impl From<&str> for AttrValue {
    fn from(v: &str) -> Self {
        AttrValue::Str(v.into())
    }
}

impl From<String> for AttrValue {
    fn from(v: String) -> Self {
        AttrValue::Str(v)
    }
}

impl From<Vec<Vec2>> for AttrValue {
    fn from(v: Vec<Vec2>) -> Self {
        AttrValue::Points(v)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AttrError {
    #[error("`{kind}` has no attribute `{name}`")]
    Unknown { kind: PrimitiveKind, name: String },
    #[error("attribute `{name}` expects {expected}, got {got}")]
    TypeMismatch {
        name: String,
        expected: &'static str,
        got: &'static str,
    },
    #[error("attribute `{name}` is out of range: {reason}")]
    OutOfRange { name: String, reason: &'static str },
    #[error("attribute `{name}` is not a color (`#RRGGBB`, `#RRGGBBAA` or `none`): {value}")]
    BadColor { name: String, value: String },
    #[error("polygon needs at least 3 points")]
    TooFewPoints,
    #[error("`d` is not valid path data: {0}")]
    BadPathData(String),
    #[error("`{kind}` is missing required attribute `{name}`")]
    Missing {
        kind: PrimitiveKind,
        name: &'static str,
    },
}

/// Checks a single attribute value against the kind's schema.
pub fn check_attr(kind: PrimitiveKind, name: &str, value: &AttrValue) -> Result<(), AttrError> {
    let ty = attr_type(kind, name).ok_or_else(|| AttrError::Unknown {
        kind,
        name: name.into(),
    })?;
    let mismatch = |expected: &'static str| AttrError::TypeMismatch {
        name: name.into(),
        expected,
        got: value.type_name(),
    };
    match ty {
        AttrType::Number | AttrType::NonNegative | AttrType::Unit => {
            let v = value.as_num().ok_or_else(|| mismatch("a number"))?;
            if !v.is_finite() {
                return Err(AttrError::OutOfRange {
                    name: name.into(),
                    reason: "must be finite",
                });
            }
            if ty == AttrType::NonNegative && v < 0.0 {
                return Err(AttrError::OutOfRange {
                    name: name.into(),
                    reason: "must be >= 0",
                });
            }
            if ty == AttrType::Unit && !(0.0..=1.0).contains(&v) {
                return Err(AttrError::OutOfRange {
                    name: name.into(),
                    reason: "must be in [0, 1]",
                });
            }
        }
        AttrType::Color => {
            let s = value.as_str().ok_or_else(|| mismatch("a color string"))?;
            if !is_valid_color(s) {
                return Err(AttrError::BadColor {
                    name: name.into(),
                    value: s.into(),
                });
            }
        }
        AttrType::Text => {
            value.as_str().ok_or_else(|| mismatch("a string"))?;
        }
        AttrType::Points => match value {
            AttrValue::Points(pts) => {
                if pts.len() < 3 {
                    return Err(AttrError::TooFewPoints);
                }
                if pts.iter().any(|p| !p.is_finite()) {
                    return Err(AttrError::OutOfRange {
                        name: name.into(),
                        reason: "points must be finite",
                    });
                }
            }
            _ => return Err(mismatch("a list of points")),
        },
        AttrType::PathData => {
            let s = value.as_str().ok_or_else(|| mismatch("path data"))?;
            crate::path::parse_path(s)
                .map_err(|e| AttrError::BadPathData(alloc::format!("{e}")))?;
        }
    }
    Ok(())
}

/// One primitive visual element with its attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub kind: PrimitiveKind,
    #[serde(default)]
    pub attrs: BTreeMap<String, AttrValue>,
}

impl Primitive {
    pub fn new(kind: PrimitiveKind) -> Self {
        Primitive {
            kind,
            attrs: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: impl Into<AttrValue>) -> Self {
        self.attrs.insert(name.into(), value.into());
        self
    }

    pub fn circle(cx: f64, cy: f64, r: f64) -> Self {
        Primitive::new(PrimitiveKind::Circle)
            .with("cx", cx)
            .with("cy", cy)
            .with("r", r)
    }

    pub fn rect(x: f64, y: f64, width: f64, height: f64) -> Self {
        Primitive::new(PrimitiveKind::Rect)
            .with("x", x)
            .with("y", y)
            .with("width", width)
            .with("height", height)
    }

    pub fn line(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Primitive::new(PrimitiveKind::Line)
            .with("x1", x1)
            .with("y1", y1)
            .with("x2", x2)
            .with("y2", y2)
    }

    pub fn polygon(points: Vec<Vec2>) -> Self {
        Primitive::new(PrimitiveKind::Polygon).with("points", points)
    }

    pub fn path(d: &str) -> Self {
        Primitive::new(PrimitiveKind::Path).with("d", d)
    }

    pub fn text(x: f64, y: f64, content: &str, font_size: f64) -> Self {
        Primitive::new(PrimitiveKind::Text)
            .with("x", x)
            .with("y", y)
            .with("content", content)
            .with("fontSize", font_size)
    }

    pub fn num(&self, name: &str) -> Option<f64> {
        self.attrs.get(name).and_then(AttrValue::as_num)
    }

    /// Numeric attribute, `0` when absent.
    pub fn num_or_zero(&self, name: &str) -> f64 {
        self.num(name).unwrap_or(0.0)
    }

    pub fn str_attr(&self, name: &str) -> Option<&str> {
        self.attrs.get(name).and_then(AttrValue::as_str)
    }

    pub fn points(&self) -> &[Vec2] {
        match self.attrs.get("points") {
            Some(AttrValue::Points(p)) => p,
            _ => &[],
        }
    }

    /// Checks required attributes and every attribute's type and range.
    pub fn validate(&self) -> Result<(), AttrError> {
        for name in self.kind.required_attrs() {
            if !self.attrs.contains_key(*name) {
                return Err(AttrError::Missing {
                    kind: self.kind,
                    name,
                });
            }
        }
        for (name, value) in &self.attrs {
            check_attr(self.kind, name, value)?;
        }
        Ok(())
    }
}

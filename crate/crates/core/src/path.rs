//! SVG path data: parsing into absolute segments, sampling, and affine
//! transformation. Elliptical arcs are converted to cubic Béziers on parse so
//! every segment stays exact under affine maps.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::geometry::AffineMatrix;
use crate::math;
use crate::model::Vec2;

/// Samples per segment used for bounds and shape signatures.
pub const SAMPLES_PER_SEGMENT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Move(Vec2),
    Line(Vec2, Vec2),
    Quad(Vec2, Vec2, Vec2),
    Cubic(Vec2, Vec2, Vec2, Vec2),
    Close(Vec2, Vec2),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("at byte {offset}: {message}")]
pub struct PathDataError {
    pub offset: usize,
    pub message: &'static str,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_separators(&mut self) {
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_whitespace() || self.src[self.pos] == b',')
        {
            self.pos += 1;
        }
    }

    fn peek_command(&mut self) -> Option<u8> {
        self.skip_separators();
        let c = *self.src.get(self.pos)?;
        c.is_ascii_alphabetic().then_some(c)
    }

    fn at_number(&mut self) -> bool {
        self.skip_separators();
        matches!(self.src.get(self.pos), Some(c) if c.is_ascii_digit() || matches!(c, b'-' | b'+' | b'.'))
    }

    fn number(&mut self) -> Result<f64, PathDataError> {
        self.skip_separators();
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        if i < s.len() && matches!(s[i], b'-' | b'+') {
            i += 1;
        }
        let mut digits = 0;
        while i < s.len() && s[i].is_ascii_digit() {
            i += 1;
            digits += 1;
        }
        if i < s.len() && s[i] == b'.' {
            i += 1;
            while i < s.len() && s[i].is_ascii_digit() {
                i += 1;
                digits += 1;
            }
        }
        if digits == 0 {
            return Err(PathDataError {
                offset: start,
                message: "expected a number",
            });
        }
        if i < s.len() && matches!(s[i], b'e' | b'E') {
            let mut j = i + 1;
            if j < s.len() && matches!(s[j], b'-' | b'+') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        self.pos = i;
        let text = core::str::from_utf8(&s[start..i]).map_err(|_| PathDataError {
            offset: start,
            message: "invalid number",
        })?;
        text.parse::<f64>().map_err(|_| PathDataError {
            offset: start,
            message: "invalid number",
        })
    }

    fn flag(&mut self) -> Result<bool, PathDataError> {
        self.skip_separators();
        match self.src.get(self.pos) {
            Some(b'0') => {
                self.pos += 1;
                Ok(false)
            }
            Some(b'1') => {
                self.pos += 1;
                Ok(true)
            }
            _ => Err(PathDataError {
                offset: self.pos,
                message: "expected an arc flag",
            }),
        }
    }

    fn point(&mut self) -> Result<Vec2, PathDataError> {
        let x = self.number()?;
        let y = self.number()?;
        Ok(Vec2::new(x, y))
    }
}

/// Parses SVG path data into absolute segments.
pub fn parse_path(d: &str) -> Result<Vec<Segment>, PathDataError> {
    let mut lx = Lexer {
        src: d.as_bytes(),
        pos: 0,
    };
    let mut out = Vec::new();
    let mut cur = Vec2::ZERO;
    let mut start = Vec2::ZERO;
    let mut last_cubic_ctrl: Option<Vec2> = None;
    let mut last_quad_ctrl: Option<Vec2> = None;
    let mut cmd: Option<u8> = None;

    loop {
        let c = match lx.peek_command() {
            Some(c) => {
                lx.pos += 1;
                c
            }
            None => {
                if lx.pos >= lx.src.len() {
                    break;
                }
                match cmd {
                    Some(prev) if lx.at_number() => match prev {
                        b'M' => b'L',
                        b'm' => b'l',
                        other => other,
                    },
                    _ => {
                        return Err(PathDataError {
                            offset: lx.pos,
                            message: "expected a command",
                        })
                    }
                }
            }
        };
        if out.is_empty() && !matches!(c, b'M' | b'm') {
            return Err(PathDataError {
                offset: lx.pos.saturating_sub(1),
                message: "path must start with a moveto",
            });
        }
        let rel = c.is_ascii_lowercase();
        let base = if rel { cur } else { Vec2::ZERO };
        let mut next_cubic = None;
        let mut next_quad = None;
        match c.to_ascii_uppercase() {
            b'M' => {
                let p = lx.point()? + base;
                out.push(Segment::Move(p));
                cur = p;
                start = p;
            }
            b'L' => {
                let p = lx.point()? + base;
                out.push(Segment::Line(cur, p));
                cur = p;
            }
            b'H' => {
                let x = lx.number()? + base.x;
                let p = Vec2::new(x, cur.y);
                out.push(Segment::Line(cur, p));
                cur = p;
            }
            b'V' => {
                let y = lx.number()? + base.y;
                let p = Vec2::new(cur.x, y);
                out.push(Segment::Line(cur, p));
                cur = p;
            }
            b'C' => {
                let c1 = lx.point()? + base;
                let c2 = lx.point()? + base;
                let p = lx.point()? + base;
                out.push(Segment::Cubic(cur, c1, c2, p));
                next_cubic = Some(c2);
                cur = p;
            }
            b'S' => {
                let c1 = match last_cubic_ctrl {
                    Some(prev) => cur * 2.0 - prev,
                    None => cur,
                };
                let c2 = lx.point()? + base;
                let p = lx.point()? + base;
                out.push(Segment::Cubic(cur, c1, c2, p));
                next_cubic = Some(c2);
                cur = p;
            }
            b'Q' => {
                let q = lx.point()? + base;
                let p = lx.point()? + base;
                out.push(Segment::Quad(cur, q, p));
                next_quad = Some(q);
                cur = p;
            }
            b'T' => {
                let q = match last_quad_ctrl {
                    Some(prev) => cur * 2.0 - prev,
                    None => cur,
                };
                let p = lx.point()? + base;
                out.push(Segment::Quad(cur, q, p));
                next_quad = Some(q);
                cur = p;
            }
            b'A' => {
                let rx = lx.number()?;
                let ry = lx.number()?;
                let phi = lx.number()?;
                let large = lx.flag()?;
                let sweep = lx.flag()?;
                let p = lx.point()? + base;
                arc_to_cubics(cur, rx, ry, phi, large, sweep, p, &mut out);
                cur = p;
            }
            b'Z' => {
                out.push(Segment::Close(cur, start));
                cur = start;
            }
            _ => {
                return Err(PathDataError {
                    offset: lx.pos.saturating_sub(1),
                    message: "unsupported path command",
                })
            }
        }
        last_cubic_ctrl = next_cubic;
        last_quad_ctrl = next_quad;
        cmd = Some(c);
    }
    if out.is_empty() {
        return Err(PathDataError {
            offset: 0,
            message: "empty path data",
        });
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn arc_to_cubics(
    from: Vec2,
    rx: f64,
    ry: f64,
    phi_deg: f64,
    large: bool,
    sweep: bool,
    to: Vec2,
    out: &mut Vec<Segment>,
) {
    let (mut rx, mut ry) = (rx.abs(), ry.abs());
    if from == to {
        return;
    }
    if rx == 0.0 || ry == 0.0 {
        out.push(Segment::Line(from, to));
        return;
    }
    let (sin_phi, cos_phi) = math::sin_cos_deg(phi_deg);
    let dx = (from.x - to.x) / 2.0;
    let dy = (from.y - to.y) / 2.0;
    let x1 = cos_phi * dx + sin_phi * dy;
    let y1 = -sin_phi * dx + cos_phi * dy;
    let lambda = (x1 * x1) / (rx * rx) + (y1 * y1) / (ry * ry);
    if lambda > 1.0 {
        let s = math::sqrt(lambda);
        rx *= s;
        ry *= s;
    }
    let num = rx * rx * ry * ry - rx * rx * y1 * y1 - ry * ry * x1 * x1;
    let den = rx * rx * y1 * y1 + ry * ry * x1 * x1;
    let mut coef = if den == 0.0 {
        0.0
    } else {
        math::sqrt((num / den).max(0.0))
    };
    if large == sweep {
        coef = -coef;
    }
    let cxp = coef * rx * y1 / ry;
    let cyp = -coef * ry * x1 / rx;
    let cx = cos_phi * cxp - sin_phi * cyp + (from.x + to.x) / 2.0;
    let cy = sin_phi * cxp + cos_phi * cyp + (from.y + to.y) / 2.0;

    let angle =
        |ux: f64, uy: f64, vx: f64, vy: f64| math::atan2(ux * vy - uy * vx, ux * vx + uy * vy);
    let theta1 = angle(1.0, 0.0, (x1 - cxp) / rx, (y1 - cyp) / ry);
    let mut dtheta = angle(
        (x1 - cxp) / rx,
        (y1 - cyp) / ry,
        (-x1 - cxp) / rx,
        (-y1 - cyp) / ry,
    );
    let tau = 2.0 * core::f64::consts::PI;
    if !sweep && dtheta > 0.0 {
        dtheta -= tau;
    } else if sweep && dtheta < 0.0 {
        dtheta += tau;
    }

    let pieces = libm::ceil(dtheta.abs() / (core::f64::consts::FRAC_PI_2) - 1e-9).max(1.0) as usize;
    let step = dtheta / pieces as f64;
    let k = 4.0 / 3.0 * libm::tan(step / 4.0);
    let point = |t: f64| {
        let (s, c) = (math::sin(t), math::cos(t));
        Vec2::new(
            cx + rx * c * cos_phi - ry * s * sin_phi,
            cy + rx * c * sin_phi + ry * s * cos_phi,
        )
    };
    let deriv = |t: f64| {
        let (s, c) = (math::sin(t), math::cos(t));
        Vec2::new(
            -rx * s * cos_phi - ry * c * sin_phi,
            -rx * s * sin_phi + ry * c * cos_phi,
        )
    };
    let mut t0 = theta1;
    let mut p0 = from;
    for i in 0..pieces {
        let t1 = t0 + step;
        let p1 = if i + 1 == pieces { to } else { point(t1) };
        let c1 = p0 + deriv(t0) * k;
        let c2 = p1 - deriv(t1) * k;
        out.push(Segment::Cubic(p0, c1, c2, p1));
        t0 = t1;
        p0 = p1;
    }
}

impl Segment {
    fn eval(&self, t: f64) -> Vec2 {
        let u = 1.0 - t;
        match *self {
            Segment::Move(p) => p,
            Segment::Line(a, b) | Segment::Close(a, b) => a * u + b * t,
            Segment::Quad(a, q, b) => a * (u * u) + q * (2.0 * u * t) + b * (t * t),
            Segment::Cubic(a, c1, c2, b) => {
                a * (u * u * u) + c1 * (3.0 * u * u * t) + c2 * (3.0 * u * t * t) + b * (t * t * t)
            }
        }
    }

    fn map(&self, m: &AffineMatrix) -> Segment {
        let f = |p: Vec2| m.apply(p);
        match *self {
            Segment::Move(p) => Segment::Move(f(p)),
            Segment::Line(a, b) => Segment::Line(f(a), f(b)),
            Segment::Close(a, b) => Segment::Close(f(a), f(b)),
            Segment::Quad(a, q, b) => Segment::Quad(f(a), f(q), f(b)),
            Segment::Cubic(a, c1, c2, b) => Segment::Cubic(f(a), f(c1), f(c2), f(b)),
        }
    }
}

/// Samples every drawing segment at [`SAMPLES_PER_SEGMENT`] evenly spaced
/// parameter values (both endpoints included). Moves contribute their point.
pub fn sample_segments(segs: &[Segment]) -> Vec<Vec2> {
    let mut out = Vec::new();
    let n = SAMPLES_PER_SEGMENT;
    for s in segs {
        match s {
            Segment::Move(p) => out.push(*p),
            _ => {
                for k in 0..n {
                    out.push(s.eval(k as f64 / (n - 1) as f64));
                }
            }
        }
    }
    out
}

/// Applies `m` to every control point of the path.
pub fn transform_segments(segs: &[Segment], m: &AffineMatrix) -> Vec<Segment> {
    segs.iter().map(|s| s.map(m)).collect()
}

/// Serializes absolute segments back to path data using `fmt_num` for
/// coordinates.
pub fn to_path_data(segs: &[Segment], fmt_num: impl Fn(f64) -> String) -> String {
    let mut d = String::new();
    let pt = |d: &mut String, p: Vec2| {
        let _ = write!(d, "{},{}", fmt_num(p.x), fmt_num(p.y));
    };
    for (i, s) in segs.iter().enumerate() {
        if i > 0 {
            d.push(' ');
        }
        match *s {
            Segment::Move(p) => {
                d.push('M');
                pt(&mut d, p);
            }
            Segment::Line(_, b) => {
                d.push('L');
                pt(&mut d, b);
            }
            Segment::Quad(_, q, b) => {
                d.push('Q');
                pt(&mut d, q);
                d.push(' ');
                pt(&mut d, b);
            }
            Segment::Cubic(_, c1, c2, b) => {
                d.push('C');
                pt(&mut d, c1);
                d.push(' ');
                pt(&mut d, c2);
                d.push(' ');
                pt(&mut d, b);
            }
            Segment::Close(..) => d.push('Z'),
        }
    }
    d
}

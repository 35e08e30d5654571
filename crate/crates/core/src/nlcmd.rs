//! Natural-language commands to operation proposals.
//!
//! A hand-written grammar handles duplication, composition, parameter
//! changes and data encoding. Anything it does not recognize goes to an
//! optional [`LlmBackend`]; if that also fails the caller gets a suggestion
//! with example commands. Every proposal carries editable slots and an
//! explanation with `{{slotId}}` markers.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::model::{
    is_valid_color, Arrangement, AttrValue, Body, ContainerKind, CoordKind, DataSource,
    GlyphDocument, PrimitiveKind, RelType, Scalar, SpatialRelation, UniformParams, Vec2,
};
use crate::ops::{apply, subtree_bbox, ApplyError, ArrangementSpec, Operation};
use crate::render::format_number;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SlotKind {
    TargetId,
    Number,
    Color,
    FreeString,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SlotValue {
    Number(f64),
    Text(String),
}

impl SlotValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            SlotValue::Text(s) => Some(s),
            SlotValue::Number(_) => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            SlotValue::Number(n) => Some(*n),
            SlotValue::Text(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Slot {
    pub slot_id: String,
    pub kind: SlotKind,
    pub current_value: SlotValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<String>>,
    /// The value was filled in by a default rule rather than the command.
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub defaulted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Proposal {
    pub operation: Operation,
    pub slots: Vec<Slot>,
    pub explanation: String,
}

impl Proposal {
    pub fn slot(&self, id: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.slot_id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Suggestion {
    pub message: String,
    pub example_commands: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "camelCase")]
pub enum ParseResult {
    Proposal { proposal: Proposal },
    Suggestion { suggestion: Suggestion },
}

impl ParseResult {
    pub fn proposal(&self) -> Option<&Proposal> {
        match self {
            ParseResult::Proposal { proposal } => Some(proposal),
            ParseResult::Suggestion { .. } => None,
        }
    }

    pub fn is_proposal(&self) -> bool {
        self.proposal().is_some()
    }

    fn suggest(message: impl Into<String>) -> Self {
        ParseResult::Suggestion {
            suggestion: Suggestion {
                message: message.into(),
                example_commands: EXAMPLE_COMMANDS.iter().map(|s| s.to_string()).collect(),
            },
        }
    }
}

pub const EXAMPLE_COMMANDS: [&str; 5] = [
    "replicate the shape five times",
    "rotate and copy the branch 6 times",
    "Change the circle's fill to blue.",
    "Place a circle 50 units above the rectangle.",
    "Randomize petal sizes between 1 and 1.5.",
];

const IRRELEVANT: &str =
    "That does not look like an editing command. Try `replicate the shape five times` instead.";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend timed out")]
    Timeout,
    #[error("backend returned malformed output: {0}")]
    Malformed(String),
}

/// A translator consulted when the grammar does not match.
pub trait LlmBackend {
    fn translate(&self, text: &str, document_summary: &str) -> Result<ParseResult, BackendError>;
}

/// Replays canned responses keyed by exact command text.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    pub responses: BTreeMap<String, ParseResult>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_response(mut self, text: &str, result: ParseResult) -> Self {
        self.responses.insert(text.into(), result);
        self
    }
}

impl LlmBackend for MockBackend {
    fn translate(&self, text: &str, _summary: &str) -> Result<ParseResult, BackendError> {
        self.responses
            .get(text)
            .cloned()
            .ok_or_else(|| BackendError::Unavailable("no canned response".into()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SlotError {
    #[error("result is not a proposal")]
    NotAProposal,
    #[error("unknown slot `{0}`")]
    UnknownSlot(String),
    #[error("slot `{slot}`: {message}")]
    TypeMismatch { slot: String, message: String },
    #[error("`{0}` is not a container in the document")]
    InvalidTarget(String),
    #[error(transparent)]
    Rejected(#[from] ApplyError),
}

// ---------------------------------------------------------------------------
// Slots derived from operations

fn num_text(v: f64) -> String {
    format_number(v, 6).unwrap_or_else(|_| "0".into())
}

fn scalar_text(s: &Scalar) -> String {
    match s {
        Scalar::Num(n) => num_text(*n),
        Scalar::Str(s) => s.clone(),
    }
}

fn is_color_attr(path: &str) -> bool {
    let name = path.rsplit('.').next().unwrap_or(path);
    matches!(name, "fill" | "stroke")
}

struct SlotBuilder<'a> {
    ids: Vec<String>,
    slots: Vec<Slot>,
    _doc: &'a GlyphDocument,
}

impl SlotBuilder<'_> {
    fn target(&mut self, id: &str, value: &str) {
        self.slots.push(Slot {
            slot_id: id.into(),
            kind: SlotKind::TargetId,
            current_value: SlotValue::Text(value.into()),
            choices: Some(self.ids.clone()),
            defaulted: false,
        });
    }

    fn number(&mut self, id: &str, value: f64) {
        self.push(id, SlotKind::Number, SlotValue::Number(value));
    }

    fn text(&mut self, id: &str, value: &str) {
        self.push(id, SlotKind::FreeString, SlotValue::Text(value.into()));
    }

    fn push(&mut self, id: &str, kind: SlotKind, value: SlotValue) {
        self.slots.push(Slot {
            slot_id: id.into(),
            kind,
            current_value: value,
            choices: None,
            defaulted: false,
        });
    }

    fn attr_value(&mut self, id: &str, path: &str, value: &AttrValue) {
        match value {
            AttrValue::Num(n) => self.number(id, *n),
            // names outside the basic table stay free strings
            AttrValue::Str(s) if is_color_attr(path) && (s.starts_with('#') || s == "none") => {
                self.push(id, SlotKind::Color, SlotValue::Text(s.clone()))
            }
            AttrValue::Str(s) => self.text(id, s),
            AttrValue::Points(pts) => {
                let s: Vec<String> = pts
                    .iter()
                    .map(|p| alloc::format!("{},{}", num_text(p.x), num_text(p.y)))
                    .collect();
                self.text(id, &s.join(" "))
            }
        }
    }
}

fn indexed(base: &str, i: usize) -> String {
    if i == 0 {
        base.into()
    } else {
        alloc::format!("{base}{}", i + 1)
    }
}

/// The slots exposing every parameter of `op`.
pub fn slots_for(op: &Operation, doc: &GlyphDocument) -> Vec<Slot> {
    let mut b = SlotBuilder {
        ids: doc
            .ordered_ids()
            .iter()
            .map(|i| i.as_str().to_string())
            .collect(),
        slots: Vec::new(),
        _doc: doc,
    };
    match op {
        Operation::CreateBasic {
            id,
            primitive_kind,
            params,
            transform,
            ..
        } => {
            b.text("id", id.as_str());
            b.text("kind", primitive_kind.name());
            for (k, v) in params {
                b.attr_value(&alloc::format!("param.{k}"), k, v);
            }
            b.number("translateX", transform.translate.x);
            b.number("translateY", transform.translate.y);
            b.number("rotation", transform.rotate.angle_deg);
            b.number("scaleX", transform.scale.sx);
            b.number("scaleY", transform.scale.sy);
        }
        Operation::CreateRepeater {
            id,
            target_id,
            count,
            arrangement,
            ..
        } => {
            b.text("id", id.as_str());
            b.target("target", target_id.as_str());
            b.number("count", *count as f64);
            match arrangement {
                ArrangementSpec::Mode(m) => b.text(
                    "arrangement",
                    match m {
                        crate::model::ArrangementMode::Uniform => "uniform",
                        crate::model::ArrangementMode::Stacked => "stacked",
                        crate::model::ArrangementMode::Flexible => "flexible",
                    },
                ),
                ArrangementSpec::Full(Arrangement::Uniform(UniformParams::Polar {
                    radius,
                    start_angle_deg,
                    delta_angle_deg,
                })) => {
                    b.number("angle", *delta_angle_deg);
                    b.number("radius", *radius);
                    b.number("startAngle", *start_angle_deg);
                }
                ArrangementSpec::Full(Arrangement::Uniform(UniformParams::Cartesian { step })) => {
                    b.number("stepX", step.x);
                    b.number("stepY", step.y);
                }
                ArrangementSpec::Full(Arrangement::Stacked { axis, gap }) => {
                    b.text(
                        "axis",
                        match axis {
                            crate::model::Axis::X => "x",
                            crate::model::Axis::Y => "y",
                        },
                    );
                    b.number("gap", *gap);
                }
                ArrangementSpec::Full(Arrangement::Flexible) => b.text("arrangement", "flexible"),
            }
        }
        Operation::CreateCompositor {
            id,
            children,
            relations,
        } => {
            b.text("id", id.as_str());
            for (i, r) in relations.iter().enumerate() {
                b.target(&indexed("source", i), r.source.as_str());
                b.target(&indexed("target", i), r.target.as_str());
                b.text(&indexed("relation", i), r.rel_type.name());
                b.number(&indexed("dx", i), r.distance.x);
                b.number(&indexed("dy", i), r.distance.y);
            }
            let mut n = 0;
            for c in children {
                if !relations.iter().any(|r| r.source == *c || r.target == *c) {
                    b.target(&alloc::format!("child{n}"), c.as_str());
                    n += 1;
                }
            }
        }
        Operation::ModifyParams { target_id, params } => {
            b.target("target", target_id.as_str());
            for (i, (k, v)) in params.iter().enumerate() {
                b.text(&indexed("attr", i), k);
                b.attr_value(&indexed("value", i), k, v);
            }
        }
        Operation::EncodeData {
            target_id,
            attribute_path,
            data,
            scale,
        } => {
            b.target("target", target_id.as_str());
            b.text("attr", attribute_path);
            match data {
                DataSource::Expression(e) => b.text("expression", e),
                DataSource::Values(v) => {
                    let items: Vec<String> = v.iter().map(scalar_text).collect();
                    b.text("values", &items.join(", "))
                }
            }
            if let Some(s) = scale {
                b.number("domainMin", s.domain[0]);
                b.number("domainMax", s.domain[1]);
                b.number("rangeMin", s.range[0]);
                b.number("rangeMax", s.range[1]);
            }
        }
    }
    b.slots
}

/// Human-readable sentence for `op` with `{{slotId}}` markers.
pub fn explain(op: &Operation) -> String {
    match op {
        Operation::CreateBasic { primitive_kind, .. } => {
            alloc::format!("Create a {} named {{{{id}}}}.", primitive_kind.name())
        }
        Operation::CreateRepeater { arrangement, .. } => match arrangement {
            ArrangementSpec::Full(Arrangement::Uniform(UniformParams::Polar { .. })) => {
                "Repeat {{target}} {{count}} times around a center, every {{angle}} degrees.".into()
            }
            ArrangementSpec::Full(Arrangement::Uniform(UniformParams::Cartesian { .. })) => {
                "Repeat {{target}} {{count}} times, shifting each copy by ({{stepX}}, {{stepY}})."
                    .into()
            }
            ArrangementSpec::Full(Arrangement::Stacked { .. }) => {
                "Stack {{count}} copies of {{target}} along {{axis}} with a gap of {{gap}}.".into()
            }
            _ => "Repeat {{target}} {{count}} times using the {{arrangement}} arrangement.".into(),
        },
        Operation::CreateCompositor {
            children,
            relations,
            ..
        } => {
            let mut parts: Vec<String> = Vec::new();
            for i in 0..relations.len() {
                let (s, t, r, x, y) = (
                    indexed("source", i),
                    indexed("target", i),
                    indexed("relation", i),
                    indexed("dx", i),
                    indexed("dy", i),
                );
                parts.push(alloc::format!(
                    "place {{{{{s}}}}} at the {{{{{r}}}}} of {{{{{t}}}}}, offset by ({{{{{x}}}}}, {{{{{y}}}}})"
                ));
            }
            let loose = children
                .iter()
                .filter(|c| !relations.iter().any(|r| r.source == **c || r.target == **c))
                .count();
            if loose > 0 {
                let names: Vec<String> = (0..loose)
                    .map(|i| alloc::format!("{{{{child{i}}}}}"))
                    .collect();
                parts.push(alloc::format!("group {}", names.join(", ")));
            }
            let mut s = parts.join(" and ");
            if let Some(first) = s.get(..1) {
                let upper = first.to_uppercase();
                s.replace_range(..1, &upper);
            }
            s.push('.');
            s
        }
        Operation::ModifyParams { params, .. } => {
            let mut parts = Vec::new();
            for i in 0..params.len().max(1) {
                parts.push(alloc::format!(
                    "{{{{{}}}}} to {{{{{}}}}}",
                    indexed("attr", i),
                    indexed("value", i)
                ));
            }
            if parts.len() == 1 {
                "Set {{attr}} of {{target}} to {{value}}.".into()
            } else {
                alloc::format!("On {{{{target}}}}, set {}.", parts.join(", "))
            }
        }
        Operation::EncodeData { data, scale, .. } => {
            let mut s = match data {
                DataSource::Expression(_) => {
                    String::from("Bind {{attr}} of {{target}} to the expression \"{{expression}}\"")
                }
                DataSource::Values(_) => {
                    String::from("Bind {{attr}} of {{target}} to the values {{values}}")
                }
            };
            if scale.is_some() {
                s.push_str(
                    ", mapping [{{domainMin}}, {{domainMax}}] onto [{{rangeMin}}, {{rangeMax}}]",
                );
            }
            s.push('.');
            s
        }
    }
}

fn proposal(op: Operation, doc: &GlyphDocument, defaulted: &[&str]) -> Proposal {
    let mut slots = slots_for(&op, doc);
    for s in &mut slots {
        s.defaulted = defaulted.contains(&s.slot_id.as_str());
    }
    Proposal {
        explanation: explain(&op),
        operation: op,
        slots,
    }
}

// ---------------------------------------------------------------------------
// Writing slots back

fn mismatch(slot: &str, message: &str) -> SlotError {
    SlotError::TypeMismatch {
        slot: slot.into(),
        message: message.into(),
    }
}

fn want_number(slot: &str, v: &SlotValue) -> Result<f64, SlotError> {
    match v {
        SlotValue::Number(n) if n.is_finite() => Ok(*n),
        SlotValue::Text(t) => t
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|n| n.is_finite())
            .ok_or_else(|| mismatch(slot, "expected a number")),
        _ => Err(mismatch(slot, "expected a finite number")),
    }
}

fn want_text<'v>(slot: &str, v: &'v SlotValue) -> Result<&'v str, SlotError> {
    v.as_text()
        .ok_or_else(|| mismatch(slot, "expected a string"))
}

fn want_target(
    slot: &str,
    v: &SlotValue,
    doc: &GlyphDocument,
) -> Result<crate::model::ContainerId, SlotError> {
    let id = want_text(slot, v)?;
    if doc.contains(id) {
        Ok(id.into())
    } else {
        Err(SlotError::InvalidTarget(id.into()))
    }
}

fn want_color(slot: &str, v: &SlotValue) -> Result<String, SlotError> {
    let s = want_text(slot, v)?;
    if let Some(hex) = color_hex(&s.to_lowercase()) {
        return Ok(hex.into());
    }
    if is_valid_color(s) {
        return Ok(s.into());
    }
    Err(mismatch(slot, "expected a color"))
}

fn parse_scalar(s: &str) -> Scalar {
    match s.trim().parse::<f64>() {
        Ok(n) if n.is_finite() => Scalar::Num(n),
        _ => Scalar::Str(s.trim().into()),
    }
}

fn split_suffix(slot: &str) -> (&str, usize) {
    let digits = slot.len() - slot.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 || slot.starts_with("child") {
        return (slot, 0);
    }
    let (base, n) = slot.split_at(slot.len() - digits);
    (base, n.parse::<usize>().map_or(0, |n| n.saturating_sub(1)))
}

fn write_slot(
    op: &mut Operation,
    slot: &str,
    v: &SlotValue,
    doc: &GlyphDocument,
) -> Result<(), SlotError> {
    let unknown = || SlotError::UnknownSlot(slot.into());
    match op {
        Operation::CreateBasic {
            id,
            params,
            transform,
            ..
        } => match slot {
            "id" => *id = want_text(slot, v)?.into(),
            "translateX" => transform.translate.x = want_number(slot, v)?,
            "translateY" => transform.translate.y = want_number(slot, v)?,
            "rotation" => transform.rotate.angle_deg = want_number(slot, v)?,
            "scaleX" => transform.scale.sx = want_number(slot, v)?,
            "scaleY" => transform.scale.sy = want_number(slot, v)?,
            _ => {
                let name = slot.strip_prefix("param.").ok_or_else(unknown)?;
                let cur = params.get(name).ok_or_else(unknown)?;
                let new = attr_from_slot(slot, name, cur, v)?;
                params.insert(name.into(), new);
            }
        },
        Operation::CreateRepeater {
            id,
            target_id,
            count,
            arrangement,
            ..
        } => match (slot, arrangement) {
            ("id", _) => *id = want_text(slot, v)?.into(),
            ("target", _) => *target_id = want_target(slot, v, doc)?,
            ("count", _) => {
                let n = want_number(slot, v)?;
                if n < 1.0 || n != libm::floor(n) || n > u32::MAX as f64 {
                    return Err(mismatch(slot, "count must be a positive integer"));
                }
                *count = n as u32;
            }
            (
                _,
                ArrangementSpec::Full(Arrangement::Uniform(UniformParams::Polar {
                    radius,
                    start_angle_deg,
                    delta_angle_deg,
                })),
            ) => match slot {
                "angle" => *delta_angle_deg = want_number(slot, v)?,
                "radius" => *radius = want_number(slot, v)?,
                "startAngle" => *start_angle_deg = want_number(slot, v)?,
                _ => return Err(unknown()),
            },
            (_, ArrangementSpec::Full(Arrangement::Uniform(UniformParams::Cartesian { step }))) => {
                match slot {
                    "stepX" => step.x = want_number(slot, v)?,
                    "stepY" => step.y = want_number(slot, v)?,
                    _ => return Err(unknown()),
                }
            }
            (_, ArrangementSpec::Full(Arrangement::Stacked { axis, gap })) => match slot {
                "gap" => *gap = want_number(slot, v)?,
                "axis" => {
                    *axis = match want_text(slot, v)? {
                        "x" => crate::model::Axis::X,
                        "y" => crate::model::Axis::Y,
                        _ => return Err(mismatch(slot, "axis must be x or y")),
                    }
                }
                _ => return Err(unknown()),
            },
            _ => return Err(unknown()),
        },
        Operation::CreateCompositor {
            id,
            children,
            relations,
        } => {
            if slot == "id" {
                *id = want_text(slot, v)?.into();
                return Ok(());
            }
            if let Some(n) = slot
                .strip_prefix("child")
                .and_then(|n| n.parse::<usize>().ok())
            {
                let new = want_target(slot, v, doc)?;
                let loose: Vec<usize> = (0..children.len())
                    .filter(|&i| {
                        !relations
                            .iter()
                            .any(|r| r.source == children[i] || r.target == children[i])
                    })
                    .collect();
                let &i = loose.get(n).ok_or_else(unknown)?;
                children[i] = new;
                return Ok(());
            }
            let (base, i) = split_suffix(slot);
            let r = relations.get_mut(i).ok_or_else(unknown)?;
            match base {
                "source" | "target" => {
                    let new = want_target(slot, v, doc)?;
                    let old = if base == "source" {
                        &mut r.source
                    } else {
                        &mut r.target
                    };
                    for c in children.iter_mut() {
                        if c == old {
                            *c = new.clone();
                        }
                    }
                    *old = new;
                }
                "relation" => {
                    r.rel_type = RelType::parse(want_text(slot, v)?)
                        .ok_or_else(|| mismatch(slot, "unknown relation type"))?
                }
                "dx" => r.distance.x = want_number(slot, v)?,
                "dy" => r.distance.y = want_number(slot, v)?,
                _ => return Err(unknown()),
            }
        }
        Operation::ModifyParams { target_id, params } => {
            if slot == "target" {
                *target_id = want_target(slot, v, doc)?;
                return Ok(());
            }
            let (base, i) = split_suffix(slot);
            let key = params.keys().nth(i).cloned().ok_or_else(unknown)?;
            match base {
                "attr" => {
                    let new_key = want_text(slot, v)?.to_string();
                    let val = params.remove(&key).expect("present");
                    params.insert(new_key, val);
                }
                "value" => {
                    let cur = params.get(&key).expect("present");
                    let new = attr_from_slot(slot, &key, cur, v)?;
                    params.insert(key, new);
                }
                _ => return Err(unknown()),
            }
        }
        Operation::EncodeData {
            target_id,
            attribute_path,
            data,
            scale,
        } => match slot {
            "target" => *target_id = want_target(slot, v, doc)?,
            "attr" => *attribute_path = want_text(slot, v)?.into(),
            "expression" if matches!(data, DataSource::Expression(_)) => {
                *data = DataSource::Expression(want_text(slot, v)?.into())
            }
            "values" if matches!(data, DataSource::Values(_)) => {
                let s = want_text(slot, v)?;
                *data = DataSource::Values(s.split(',').map(parse_scalar).collect());
            }
            "domainMin" | "domainMax" | "rangeMin" | "rangeMax" => {
                let s = scale.as_mut().ok_or_else(unknown)?;
                let n = want_number(slot, v)?;
                match slot {
                    "domainMin" => s.domain[0] = n,
                    "domainMax" => s.domain[1] = n,
                    "rangeMin" => s.range[0] = n,
                    _ => s.range[1] = n,
                }
            }
            _ => return Err(unknown()),
        },
    }
    Ok(())
}

fn attr_from_slot(
    slot: &str,
    path: &str,
    cur: &AttrValue,
    v: &SlotValue,
) -> Result<AttrValue, SlotError> {
    Ok(match cur {
        AttrValue::Num(_) => AttrValue::Num(want_number(slot, v)?),
        AttrValue::Str(_) if is_color_attr(path) => AttrValue::Str(want_color(slot, v)?),
        AttrValue::Str(_) => AttrValue::Str(match v {
            SlotValue::Text(t) => t.clone(),
            SlotValue::Number(n) => num_text(*n),
        }),
        AttrValue::Points(_) => {
            let s = want_text(slot, v)?;
            let mut pts = Vec::new();
            for pair in s.split_whitespace() {
                let (x, y) = pair
                    .split_once(',')
                    .ok_or_else(|| mismatch(slot, "expected x,y pairs"))?;
                let x = x
                    .parse::<f64>()
                    .map_err(|_| mismatch(slot, "expected x,y pairs"))?;
                let y = y
                    .parse::<f64>()
                    .map_err(|_| mismatch(slot, "expected x,y pairs"))?;
                pts.push(Vec2::new(x, y));
            }
            AttrValue::Points(pts)
        }
    })
}

/// Substitutes one slot value, re-deriving defaulted dependents, and checks
/// the updated operation against `doc`.
pub fn fill_slot(
    result: &ParseResult,
    slot_id: &str,
    value: SlotValue,
    doc: &GlyphDocument,
) -> Result<ParseResult, SlotError> {
    let ParseResult::Proposal { proposal: p } = result else {
        return Err(SlotError::NotAProposal);
    };
    let idx = p
        .slots
        .iter()
        .position(|s| s.slot_id == slot_id)
        .ok_or_else(|| SlotError::UnknownSlot(slot_id.into()))?;
    let kind = p.slots[idx].kind;
    match kind {
        SlotKind::Number => {
            want_number(slot_id, &value)?;
        }
        SlotKind::TargetId => {
            want_target(slot_id, &value, doc)?;
        }
        SlotKind::Color => {
            want_color(slot_id, &value)?;
        }
        SlotKind::FreeString => {
            want_text(slot_id, &value)?;
        }
    }
    let mut op = p.operation.clone();
    write_slot(&mut op, slot_id, &value, doc)?;

    let mut defaulted: Vec<&str> = p
        .slots
        .iter()
        .filter(|s| s.defaulted && s.slot_id != slot_id)
        .map(|s| s.slot_id.as_str())
        .collect();
    if slot_id == "count" && defaulted.contains(&"angle") {
        if let Operation::CreateRepeater { count, .. } = &op {
            let angle = 360.0 / *count as f64;
            write_slot(&mut op, "angle", &SlotValue::Number(angle), doc)?;
        }
    }
    apply(doc, &op)?;
    defaulted.retain(|d| *d != slot_id);
    Ok(ParseResult::Proposal {
        proposal: proposal(op, doc, &defaulted),
    })
}

// ---------------------------------------------------------------------------
// Document summary

/// One line per container in document order.
pub fn summarize_document(doc: &GlyphDocument) -> String {
    if doc.containers.is_empty() {
        return "(empty)".into();
    }
    let mut out = String::new();
    for id in doc.ordered_ids() {
        let c = doc.get(id.as_str()).expect("listed");
        let _ = write!(out, "{}: ", id.as_str());
        match &c.body {
            Body::Basic { primitive } => {
                let _ = write!(out, "basic {}", primitive.kind.name());
                let attrs: Vec<String> = primitive
                    .attrs
                    .iter()
                    .map(|(k, v)| match v {
                        AttrValue::Num(n) => alloc::format!("{k}={}", num_text(*n)),
                        AttrValue::Str(s) => alloc::format!("{k}={s}"),
                        AttrValue::Points(p) => alloc::format!("{k}=[{} points]", p.len()),
                    })
                    .collect();
                if !attrs.is_empty() {
                    let _ = write!(out, " ({})", attrs.join(", "));
                }
            }
            Body::Repeater {
                child,
                count,
                arrangement,
            } => {
                let _ = write!(
                    out,
                    "repeater {} x{} of {}",
                    c.coord.kind.name(),
                    count,
                    child.as_str()
                );
                match arrangement {
                    Arrangement::Uniform(UniformParams::Polar {
                        radius,
                        start_angle_deg,
                        delta_angle_deg,
                    }) => {
                        let _ = write!(
                            out,
                            " (every {} deg, radius {}, start {})",
                            num_text(*delta_angle_deg),
                            num_text(*radius),
                            num_text(*start_angle_deg)
                        );
                    }
                    Arrangement::Uniform(UniformParams::Cartesian { step }) => {
                        let _ = write!(out, " (step {},{})", num_text(step.x), num_text(step.y));
                    }
                    Arrangement::Stacked { axis, gap } => {
                        let _ = write!(out, " (stacked {:?}, gap {})", axis, num_text(*gap));
                    }
                    Arrangement::Flexible => out.push_str(" (flexible)"),
                }
            }
            Body::Compositor {
                children,
                relations,
            } => {
                let names: Vec<&str> = children.iter().map(|c| c.as_str()).collect();
                let _ = write!(out, "compositor [{}]", names.join(", "));
                for r in relations {
                    let _ = write!(
                        out,
                        "; {} {} {} ({},{})",
                        r.source.as_str(),
                        r.rel_type.name(),
                        r.target.as_str(),
                        num_text(r.distance.x),
                        num_text(r.distance.y)
                    );
                }
            }
        }
        for b in &c.bindings {
            let _ = write!(out, "; binds {}", b.attribute_path);
        }
        if !doc.is_attached(id.as_str()) {
            out.push_str(" [unattached]");
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Tokens and vocabulary

#[derive(Debug, Clone)]
struct Tok {
    /// Lowercase word without surrounding punctuation or possessive.
    w: String,
    start: usize,
}

fn tokenize(text: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut i = 0;
    let bytes = text.as_bytes();
    while i < text.len() {
        while i < text.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let start = i;
        while i < text.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            break;
        }
        let raw = &text[start..i];
        let trimmed = raw.trim_matches(|c: char| {
            !(c.is_alphanumeric() || c == '#' || c == '-' || c == '\'' || c == '.')
        });
        let trimmed = trimmed.trim_end_matches('.').trim_matches('\'');
        let mut w = trimmed.to_lowercase();
        for suffix in ["'s", "’s"] {
            if let Some(stem) = w.strip_suffix(suffix) {
                w = stem.to_owned();
            }
        }
        if w.is_empty() {
            continue;
        }
        out.push(Tok { w, start });
    }
    out
}

const NUMBER_WORDS: [(&str, f64); 22] = [
    ("zero", 0.0),
    ("one", 1.0),
    ("two", 2.0),
    ("three", 3.0),
    ("four", 4.0),
    ("five", 5.0),
    ("six", 6.0),
    ("seven", 7.0),
    ("eight", 8.0),
    ("nine", 9.0),
    ("ten", 10.0),
    ("eleven", 11.0),
    ("twelve", 12.0),
    ("thirteen", 13.0),
    ("fourteen", 14.0),
    ("fifteen", 15.0),
    ("sixteen", 16.0),
    ("seventeen", 17.0),
    ("eighteen", 18.0),
    ("nineteen", 19.0),
    ("twenty", 20.0),
    ("dozen", 12.0),
];

fn number(w: &str) -> Option<f64> {
    let w = w.trim_end_matches([',', ';']);
    let stripped = w
        .strip_suffix("px")
        .or_else(|| w.strip_suffix("°"))
        .unwrap_or(w);
    if let Ok(n) = stripped.parse::<f64>() {
        return n.is_finite().then_some(n);
    }
    NUMBER_WORDS.iter().find(|(k, _)| *k == w).map(|(_, v)| *v)
}

/// Hex code of one of the 16 basic CSS color names.
pub fn color_hex(name: &str) -> Option<&'static str> {
    crate::model::named_color_hex(name)
}

const DUP_VERBS: [&str; 5] = ["duplicate", "copy", "repeat", "replicate", "clone"];
const POLAR_WORDS: [&str; 10] = [
    "rotate",
    "rotating",
    "rotated",
    "rotation",
    "rotationally",
    "around",
    "radially",
    "radial",
    "circularly",
    "circular",
];
const VERTICAL: [&str; 6] = [
    "vertically",
    "vertical",
    "down",
    "downward",
    "downwards",
    "column",
];
const HORIZONTAL: [&str; 5] = ["horizontally", "horizontal", "sideways", "row", "across"];
const COMPOSE_VERBS: [&str; 7] = [
    "add", "place", "put", "position", "attach", "insert", "move",
];
const MODIFY_VERBS: [&str; 7] = ["change", "set", "make", "update", "turn", "color", "paint"];
const DETERMINERS: [&str; 13] = [
    "the", "a", "an", "this", "that", "these", "those", "each", "every", "all", "its", "their",
    "my",
];
const GENERIC: [&str; 6] = ["shape", "object", "element", "glyph", "thing", "item"];

fn singular(w: &str) -> Vec<String> {
    let mut v = alloc::vec![w.to_string()];
    for suffix in ["ches", "shes", "xes", "sses"] {
        if w.ends_with(suffix) {
            v.push(w[..w.len() - 2].into());
        }
    }
    if let Some(s) = w.strip_suffix('s') {
        if !s.is_empty() && !w.ends_with("ss") {
            v.push(s.into());
        }
    }
    v
}

fn norm_id(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(|c| c.to_lowercase())
        .collect()
}

// ---------------------------------------------------------------------------
// Target resolution

struct Phrase {
    words: Vec<String>,
    each: bool,
    demonstrative: bool,
    pronoun: bool,
}

fn phrase(words: &[&str]) -> Phrase {
    let mut p = Phrase {
        words: Vec::new(),
        each: false,
        demonstrative: false,
        pronoun: false,
    };
    for (i, w) in words.iter().enumerate() {
        match *w {
            "each" | "every" | "all" => p.each = true,
            "this" | "that" | "these" | "those" if i + 1 < words.len() => p.demonstrative = true,
            "it" | "them" | "this" | "that" | "selection" | "selected" => p.pronoun = true,
            w if DETERMINERS.contains(&w) || w == "of" || w == "with" => {}
            w => p.words.push(w.into()),
        }
    }
    p
}

fn kind_for(word: &str) -> Option<(PrimitiveKind, Option<usize>)> {
    Some(match word {
        "circle" | "dot" | "disc" | "disk" | "ring" => (PrimitiveKind::Circle, None),
        "rect" | "rectangle" | "square" | "bar" | "box" => (PrimitiveKind::Rect, None),
        "line" | "stem" | "stroke" => (PrimitiveKind::Line, None),
        "triangle" => (PrimitiveKind::Polygon, Some(3)),
        "diamond" | "rhombus" | "quad" => (PrimitiveKind::Polygon, Some(4)),
        "pentagon" => (PrimitiveKind::Polygon, Some(5)),
        "hexagon" => (PrimitiveKind::Polygon, Some(6)),
        "polygon" => (PrimitiveKind::Polygon, None),
        "path" | "curve" | "polyline" => (PrimitiveKind::Path, None),
        "text" | "label" | "caption" | "title" => (PrimitiveKind::Text, None),
        "image" | "picture" | "icon" => (PrimitiveKind::Image, None),
        _ => return None,
    })
}

/// Resolves a noun phrase to a container id.
fn resolve(p: &Phrase, doc: &GlyphDocument, selection: Option<&str>) -> Option<String> {
    let sel = selection.filter(|s| doc.contains(s)).map(String::from);
    if p.words.is_empty() || (p.words.len() == 1 && GENERIC.contains(&p.words[0].as_str())) {
        if p.pronoun || p.demonstrative || sel.is_some() {
            return sel.or_else(|| {
                p.words
                    .first()
                    .and_then(|_| doc.root.as_ref().map(|r| r.as_str().to_string()))
            });
        }
        return p
            .words
            .first()
            .and_then(|_| doc.root.as_ref().map(|r| r.as_str().to_string()));
    }
    if p.demonstrative && sel.is_some() {
        return sel;
    }
    let ids = doc.ordered_ids();
    let joined = p.words.join(" ");
    let last = p.words.last().expect("non-empty").clone();
    let mut keys = singular(&norm_id(&joined));
    for s in singular(&last) {
        if !keys.contains(&s) {
            keys.push(s);
        }
    }
    for k in &keys {
        if let Some(id) = ids.iter().find(|id| norm_id(id.as_str()) == *k) {
            return Some(id.as_str().into());
        }
    }
    for k in &keys {
        if k.len() < 3 {
            continue;
        }
        if let Some(id) = ids
            .iter()
            .find(|id| norm_id(id.as_str()).contains(k.as_str()))
        {
            return Some(id.as_str().into());
        }
    }
    match last.as_str() {
        "repeater" | "repeaters" | "pattern" => {
            return ids
                .iter()
                .find(|id| {
                    doc.get(id.as_str())
                        .is_some_and(|c| c.kind() == ContainerKind::Repeater)
                })
                .map(|id| id.as_str().into())
        }
        "compositor" | "group" => {
            return ids
                .iter()
                .find(|id| {
                    doc.get(id.as_str())
                        .is_some_and(|c| c.kind() == ContainerKind::Compositor)
                })
                .map(|id| id.as_str().into())
        }
        _ => {}
    }
    for s in singular(&last) {
        if let Some((kind, n)) = kind_for(&s) {
            let basics: Vec<&&crate::model::ContainerId> = ids
                .iter()
                .filter(|id| {
                    doc.get(id.as_str())
                        .and_then(|c| c.primitive())
                        .is_some_and(|p| p.kind == kind)
                })
                .collect();
            let exact = basics.iter().find(|id| {
                n.is_none_or(|n| {
                    doc.get(id.as_str())
                        .and_then(|c| c.primitive())
                        .is_some_and(|p| p.points().len() == n)
                })
            });
            if let Some(id) = exact.or(basics.first()) {
                return Some(id.as_str().into());
            }
        }
    }
    None
}

/// First basic container at or below `id` (pre-order), optionally one
/// whose primitive accepts `attr`.
fn basic_below(doc: &GlyphDocument, id: &str, attr: Option<&str>) -> Option<String> {
    let mut stack = alloc::vec![String::from(id)];
    let mut fallback = None;
    while let Some(cur) = stack.pop() {
        let c = doc.get(&cur)?;
        if let Some(p) = c.primitive() {
            let ok = attr.is_none_or(|a| crate::model::attr_type(p.kind, a).is_some());
            if ok {
                return Some(cur);
            }
            fallback.get_or_insert(cur);
            continue;
        }
        let mut kids: Vec<String> = c
            .children()
            .iter()
            .map(|k| k.as_str().to_string())
            .collect();
        kids.reverse();
        stack.extend(kids);
    }
    fallback
}

/// Nearest repeater at or above `id`, and the instance path prefix that
/// addresses `id` from it.
fn instance_prefix(doc: &GlyphDocument, id: &str) -> Option<(String, String)> {
    if let Some(c) = doc.get(id) {
        if c.kind() == ContainerKind::Repeater {
            return Some((id.into(), "instance".into()));
        }
    }
    let mut cur = String::from(id);
    loop {
        let parent = doc.parent_of(&cur)?.as_str().to_string();
        let pc = doc.get(&parent)?;
        if let Body::Repeater { child, .. } = &pc.body {
            let prefix = if child.as_str() == id {
                "instance".into()
            } else {
                alloc::format!("instance[{id}]")
            };
            return Some((parent, prefix));
        }
        cur = parent;
    }
}

fn fresh_id(doc: &GlyphDocument, prefix: &str) -> String {
    (1..)
        .map(|n| alloc::format!("{prefix}-{n}"))
        .find(|id| !doc.contains(id))
        .expect("unbounded")
}

// ---------------------------------------------------------------------------
// Grammar

type Outcome = Option<Result<(Operation, Vec<&'static str>), String>>;

fn words(toks: &[Tok]) -> Vec<&str> {
    toks.iter().map(|t| t.w.as_str()).collect()
}

fn parse_duplicate(toks: &[Tok], doc: &GlyphDocument, sel: Option<&str>) -> Outcome {
    let w = words(toks);
    if !w.iter().any(|x| DUP_VERBS.contains(x)) {
        return None;
    }
    let polar = w.iter().any(|x| POLAR_WORDS.contains(x));
    let vertical = w.iter().any(|x| VERTICAL.contains(x));
    let mut count = None;
    let mut angle = None;
    let mut spacing = None;
    let mut used = alloc::vec![false; w.len()];
    for i in 0..w.len() {
        // "around a center", "in a circle"
        if ["around", "in"].contains(&w[i]) {
            let mut j = i + 1;
            if w.get(j).is_some_and(|x| ["a", "the"].contains(x)) {
                j += 1;
            }
            if w.get(j)
                .is_some_and(|x| ["center", "centre", "circle", "ring"].contains(x))
            {
                used[i..=j].fill(true);
            }
        }
        match w[i] {
            "twice" => {
                count = Some(2.0);
                used[i] = true;
            }
            "thrice" => {
                count = Some(3.0);
                used[i] = true;
            }
            "once" => {
                count = Some(1.0);
                used[i] = true;
            }
            _ => {}
        }
        if let Some(n) = number(w[i]) {
            let next = w.get(i + 1).copied().unwrap_or("");
            match next {
                "times" | "copies" | "instances" | "petals" | "branches" => {
                    count = Some(n);
                    used[i] = true;
                    used[i + 1] = true;
                }
                "degrees" | "degree" | "deg" => {
                    angle = Some(n);
                    used[i] = true;
                    used[i + 1] = true;
                }
                "units" | "unit" | "pixels" | "px" => {
                    spacing = Some(n);
                    used[i] = true;
                    used[i + 1] = true;
                }
                _ => {}
            }
        }
    }
    let count = match count {
        Some(c) if c >= 1.0 && c == libm::floor(c) => c as u32,
        Some(_) => {
            return Some(Err(
                "The repetition count must be a positive whole number.".into()
            ))
        }
        None => {
            return Some(Err(
                "Say how many times to repeat, e.g. `replicate the shape five times`.".into(),
            ))
        }
    };
    let skip: [&str; 11] = [
        "and", "times", "by", "every", "apart", "spacing", "with", "of", "at", "make", "copies",
    ];
    let rest: Vec<&str> = w
        .iter()
        .enumerate()
        .filter(|(i, x)| {
            !used[*i]
                && !DUP_VERBS.contains(x)
                && !POLAR_WORDS.contains(x)
                && !VERTICAL.contains(x)
                && !HORIZONTAL.contains(x)
                && !skip.contains(x)
        })
        .map(|(_, x)| *x)
        .collect();
    let p = phrase(&rest);
    let Some(target) = resolve(&p, doc, sel) else {
        return Some(Err(target_help(&p)));
    };
    let mut defaulted = Vec::new();
    let id = fresh_id(doc, "repeater");
    let (kind, arrangement) = if polar {
        let delta = angle.unwrap_or_else(|| {
            defaulted.push("angle");
            360.0 / count as f64
        });
        (CoordKind::Polar, Arrangement::polar(0.0, 0.0, delta))
    } else {
        let step = match spacing {
            Some(s) if vertical => Vec2::new(0.0, s),
            Some(s) => Vec2::new(s, 0.0),
            None => {
                defaulted.push("stepX");
                defaulted.push("stepY");
                let b = subtree_bbox(doc, &target);
                if vertical {
                    Vec2::new(0.0, b.map_or(0.0, |b| b.height()))
                } else {
                    Vec2::new(b.map_or(0.0, |b| b.width()), 0.0)
                }
            }
        };
        (CoordKind::Cartesian, Arrangement::cartesian(step))
    };
    Some(Ok((
        Operation::CreateRepeater {
            id: id.into(),
            target_id: target.into(),
            coord_kind: kind,
            count,
            arrangement: ArrangementSpec::Full(arrangement),
        },
        defaulted,
    )))
}

fn target_help(p: &Phrase) -> String {
    if p.words.is_empty() {
        "Select an element or name it, e.g. `Change the circle's fill to blue.`".into()
    } else {
        alloc::format!(
            "There is no `{}` in the document. Specify the element, e.g. `Change the circle's fill to blue.`",
            p.words.join(" ")
        )
    }
}

fn relation_at(w: &[&str], i: usize) -> Option<(RelType, usize)> {
    let at = |k: usize| w.get(i + k).copied().unwrap_or("");
    Some(match at(0) {
        "above" | "over" => (RelType::Top, 1),
        "on" if at(1) == "top" && at(2) == "of" => (RelType::Top, 3),
        "atop" => (RelType::Top, 1),
        "below" | "under" | "beneath" | "underneath" => (RelType::Bottom, 1),
        "to" if at(1) == "the" && at(2) == "left" && at(3) == "of" => (RelType::Left, 4),
        "to" if at(1) == "the" && at(2) == "right" && at(3) == "of" => (RelType::Right, 4),
        "left" if at(1) == "of" => (RelType::Left, 2),
        "right" if at(1) == "of" => (RelType::Right, 2),
        "inside" | "within" => (RelType::Center, 1),
        "at" | "in"
            if at(1) == "the"
                && ["center", "centre", "middle"].contains(&at(2))
                && at(3) == "of" =>
        {
            (RelType::Center, 4)
        }
        "centered" | "centred" if at(1) == "on" || at(1) == "in" => (RelType::Center, 2),
        _ => return None,
    })
}

fn parse_compose(toks: &[Tok], doc: &GlyphDocument, sel: Option<&str>) -> Outcome {
    let w = words(toks);
    let verb = w.iter().position(|x| COMPOSE_VERBS.contains(x))?;
    let (rel_at, rel, rel_len) =
        (verb + 1..w.len()).find_map(|i| relation_at(&w, i).map(|(r, n)| (i, r, n)))?;
    let mut offset = 0.0;
    let mut src_end = rel_at;
    if rel_at >= 2 && ["units", "unit", "pixels", "px"].contains(&w[rel_at - 1]) {
        if let Some(n) = number(w[rel_at - 2]) {
            offset = n;
            src_end = rel_at - 2;
        }
    } else if rel_at >= 1 {
        if let Some(n) = number(w[rel_at - 1].trim_end_matches("px")) {
            offset = n;
            src_end = rel_at - 1;
        }
    }
    let src_p = phrase(&w[verb + 1..src_end]);
    let tgt_p = phrase(&w[rel_at + rel_len..]);
    let Some(source) = resolve(&src_p, doc, sel) else {
        return Some(Err(alloc::format!(
            "There is no `{}` to place yet; draw or create it first.",
            src_p.words.join(" ")
        )));
    };
    let Some(mut target) = resolve(
        &tgt_p,
        doc,
        if src_p.pronoun || src_p.demonstrative {
            None
        } else {
            sel
        },
    ) else {
        return Some(Err(target_help(&tgt_p)));
    };
    if tgt_p.each {
        if let Some(Body::Repeater { child, .. }) = doc.get(&target).map(|c| &c.body) {
            target = child.as_str().into();
        }
    }
    if source == target {
        return Some(Err(
            "The element to place and the reference element must differ.".into(),
        ));
    }
    let distance = match rel {
        RelType::Top => Vec2::new(0.0, -offset),
        RelType::Bottom => Vec2::new(0.0, offset),
        RelType::Left => Vec2::new(-offset, 0.0),
        RelType::Right => Vec2::new(offset, 0.0),
        RelType::Center => Vec2::ZERO,
    };
    let id = fresh_id(doc, "compositor");
    Some(Ok((
        Operation::CreateCompositor {
            id: id.into(),
            children: alloc::vec![target.as_str().into(), source.as_str().into()],
            relations: alloc::vec![SpatialRelation {
                source: source.into(),
                target: target.into(),
                rel_type: rel,
                distance,
            }],
        },
        Vec::new(),
    )))
}

/// Attribute words to a path suffix relative to a container (`primitive.*`,
/// `transform.*`, `body.count`, ...). Returns the suffix and how many words
/// were consumed.
fn attribute_at(w: &[&str], i: usize) -> Option<(&'static str, usize)> {
    let at = |k: usize| w.get(i + k).copied().unwrap_or("");
    Some(match at(0) {
        "stroke" | "line" | "border" | "outline"
            if ["width", "widths", "thickness"].contains(&at(1)) =>
        {
            ("strokeWidth", 2)
        }
        "font" if ["size", "sizes"].contains(&at(1)) => ("fontSize", 2),
        "repeat" | "repetition" if at(1) == "count" => ("body.count", 2),
        "fill" | "color" | "colour" | "fills" | "colors" | "colours" => ("fill", 1),
        "stroke" | "outline" | "border" => ("stroke", 1),
        "thickness" => ("strokeWidth", 1),
        "radius" | "radii" => ("r", 1),
        "width" | "widths" => ("width", 1),
        "height" | "heights" => ("height", 1),
        "opacity" | "transparency" => ("opacity", 1),
        "size" | "sizes" => ("size", 1),
        "text" | "texts" | "label" | "labels" | "content" | "caption" | "captions" => {
            ("content", 1)
        }
        "count" | "repetitions" => ("body.count", 1),
        "rotation" | "rotations" | "angle" | "angles" | "orientation" => ("rotation", 1),
        _ => return None,
    })
}

/// Maps an attribute word to a concrete path on `target`, or `None` if it
/// does not apply. `per_instance` selects `instance` transform paths.
fn concrete_path(doc: &GlyphDocument, target: &str, attr: &str) -> Option<(String, String)> {
    let c = doc.get(target)?;
    match attr {
        "body.count" => {
            (c.kind() == ContainerKind::Repeater).then(|| (target.into(), "body.count".into()))
        }
        "rotation" => Some((target.into(), "transform.rotate.angleDeg".into())),
        "size" => Some((target.into(), "transform.scale.sx+sy".into())),
        name => {
            let basic = if c.primitive().is_some() {
                target.to_string()
            } else {
                basic_below(doc, target, Some(name))?
            };
            let p = doc.get(&basic)?.primitive()?;
            crate::model::attr_type(p.kind, name)?;
            Some((basic, alloc::format!("primitive.{name}")))
        }
    }
}

/// Path for a per-instance binding of `attr` on the repeater enclosing
/// `target`. Sizes and, for primitives without the attribute, heights and
/// widths map to instance scales.
fn instance_path(doc: &GlyphDocument, target: &str, attr: &str) -> Option<(String, String)> {
    let base = match doc.get(target)?.kind() {
        ContainerKind::Basic => target.to_string(),
        ContainerKind::Repeater => match &doc.get(target)?.body {
            Body::Repeater { child, .. } => {
                if ["size", "rotation"].contains(&attr) {
                    child.as_str().to_string()
                } else {
                    basic_below(doc, child.as_str(), Some(attr))
                        .unwrap_or_else(|| child.as_str().to_string())
                }
            }
            _ => unreachable!(),
        },
        ContainerKind::Compositor => basic_below(doc, target, Some(attr))?,
    };
    let (rep, prefix) = instance_prefix(doc, &base)?;
    let prim = doc.get(&base).and_then(|c| c.primitive());
    let has = |a: &str| prim.is_some_and(|p| crate::model::attr_type(p.kind, a).is_some());
    let field = match attr {
        "size" => "scale.sx+sy".to_string(),
        "rotation" => "rotate.angleDeg".to_string(),
        "height" if !has("height") => "scale.sy".to_string(),
        "width" if !has("width") => "scale.sx".to_string(),
        a if has(a) => alloc::format!("primitive.{a}"),
        _ => return None,
    };
    Some((rep, alloc::format!("{prefix}.{field}")))
}

fn find_attr(w: &[&str]) -> Option<(usize, &'static str, usize)> {
    (0..w.len()).find_map(|i| attribute_at(w, i).map(|(a, n)| (i, a, n)))
}

fn parse_random(toks: &[Tok], doc: &GlyphDocument, sel: Option<&str>) -> Outcome {
    let w = words(toks);
    if !w.iter().any(|x| x.starts_with("random")) {
        return None;
    }
    let (lo, hi, range_at) = (0..w.len()).find_map(|i| {
        let a = w.get(i + 1).and_then(|x| number(x))?;
        let b = w.get(i + 3).and_then(|x| number(x))?;
        let ok = (w[i] == "between" && w[i + 2] == "and") || (w[i] == "from" && w[i + 2] == "to");
        ok.then_some((a, b, i))
    })?;
    let head = &w[..range_at];
    let Some((ai, attr, an)) = find_attr(head) else {
        return Some(Err(
            "Say which attribute to randomize, e.g. `Randomize petal sizes between 1 and 1.5.`"
                .into(),
        ));
    };
    let filler = [
        "randomize",
        "randomise",
        "randomly",
        "random",
        "give",
        "different",
        "varying",
        "vary",
        "assign",
        "with",
        "set",
        "make",
    ];
    let rest: Vec<&str> = head
        .iter()
        .enumerate()
        .filter(|(i, x)| !(ai..ai + an).contains(i) && !filler.contains(x))
        .map(|(_, x)| *x)
        .collect();
    let p = phrase(&rest);
    let Some(target) = resolve(&p, doc, sel) else {
        return Some(Err(target_help(&p)));
    };
    let Some((rep, path)) = instance_path(doc, &target, attr) else {
        return Some(Err(alloc::format!(
            "`{target}` is not repeated, so there is nothing to vary per instance."
        )));
    };
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let expr = alloc::format!("{} + random()*{}", num_text(lo), num_text(hi - lo));
    Some(Ok((
        Operation::EncodeData {
            target_id: rep.into(),
            attribute_path: path,
            data: DataSource::Expression(expr),
            scale: None,
        },
        Vec::new(),
    )))
}

/// Splits a trailing value list (`A, B and C`).
fn split_list(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        let part = part.strip_prefix("and ").unwrap_or(part);
        for piece in part.split(" and ") {
            let piece = piece
                .trim()
                .trim_matches(|c: char| c == '"' || c == '\'' || c == '“' || c == '”');
            if !piece.is_empty() {
                out.push(piece.to_string());
            }
        }
    }
    out
}

fn parse_modify(text: &str, toks: &[Tok], doc: &GlyphDocument, sel: Option<&str>) -> Outcome {
    let w = words(toks);
    let verb = w.iter().position(|x| MODIFY_VERBS.contains(x))?;
    // value after the last "to"/"into"; "make the circle blue" has none
    let to = (verb + 1..w.len())
        .rev()
        .find(|&i| ["to", "into", "="].contains(&w[i]));
    let (lhs_end, value_text) = match to {
        Some(i) if i + 1 < toks.len() => {
            let raw = text[toks[i + 1].start..].trim();
            let raw = raw.trim_end_matches(['.', '!', '?']).trim();
            (i, raw.to_string())
        }
        Some(_) => {
            return Some(Err(
                "Say what value to use, e.g. `Change the circle's fill to blue.`".into(),
            ))
        }
        None => {
            let last = *w.last()?;
            if color_hex(last).is_none() && !last.starts_with('#') {
                return None;
            }
            (w.len() - 1, last.to_string())
        }
    };
    let lhs = &w[verb + 1..lhs_end];
    let values = split_list(&value_text);
    let is_color = |s: &str| color_hex(&s.to_lowercase()).is_some() || is_valid_color(s);

    // attribute and target: "X's ATTR", "the ATTR of X", or an implied fill
    let (attr, target_words): (&str, Vec<&str>) = if let Some((ai, a, an)) = find_attr(lhs) {
        let mut tw: Vec<&str> = Vec::new();
        for (i, x) in lhs.iter().enumerate() {
            if !(ai..ai + an).contains(&i) {
                tw.push(x);
            }
        }
        (a, tw)
    } else if values.len() == 1 && is_color(&values[0]) {
        ("fill", lhs.to_vec())
    } else {
        return Some(Err(
            "Specify the element and attribute, e.g. `Change the circle's fill to blue.`".into(),
        ));
    };
    let p = phrase(&target_words);
    let target = match resolve(&p, doc, sel) {
        Some(t) => t,
        None if p.words.is_empty() && attr == "content" => {
            match doc.ordered_ids().iter().find(|id| {
                doc.get(id.as_str())
                    .and_then(|c| c.primitive())
                    .is_some_and(|p| p.kind == PrimitiveKind::Text)
            }) {
                Some(id) => id.as_str().to_string(),
                None => return Some(Err(target_help(&p))),
            }
        }
        None => return Some(Err(target_help(&p))),
    };

    if values.len() > 1 {
        let Some((rep, path)) = instance_path(doc, &target, attr) else {
            return Some(Err(alloc::format!(
                "`{target}` is not repeated, so it takes a single value."
            )));
        };
        return Some(Ok((
            Operation::EncodeData {
                target_id: rep.into(),
                attribute_path: path,
                data: DataSource::Values(values.iter().map(|v| parse_scalar(v)).collect()),
                scale: None,
            },
            Vec::new(),
        )));
    }
    let raw = values.first().cloned().unwrap_or_default();
    let Some((container, path)) = concrete_path(doc, &target, attr) else {
        return Some(Err(alloc::format!("`{target}` has no {attr} to change.")));
    };
    let value = if attr == "fill" || attr == "stroke" {
        match color_hex(&raw.to_lowercase()) {
            Some(hex) => AttrValue::Str(hex.into()),
            None if is_valid_color(&raw) => AttrValue::Str(raw.to_lowercase()),
            None => {
                return Some(Err(alloc::format!(
                    "`{raw}` is not a color I know; use a hex code like #0000ff."
                )))
            }
        }
    } else if attr == "content" {
        AttrValue::Str(raw)
    } else {
        let first = raw.split_whitespace().next().unwrap_or("");
        match number(&first.to_lowercase()) {
            Some(n) => AttrValue::Num(n),
            None => return Some(Err(alloc::format!("`{raw}` is not a number."))),
        }
    };
    let mut params = BTreeMap::new();
    params.insert(path, value);
    Some(Ok((
        Operation::ModifyParams {
            target_id: container.into(),
            params,
        },
        Vec::new(),
    )))
}

fn grammar(text: &str, doc: &GlyphDocument, sel: Option<&str>) -> Outcome {
    let toks = tokenize(text);
    if toks.is_empty() {
        return None;
    }
    parse_random(&toks, doc, sel)
        .or_else(|| parse_duplicate(&toks, doc, sel))
        .or_else(|| parse_compose(&toks, doc, sel))
        .or_else(|| parse_modify(text, &toks, doc, sel))
}

/// Accepts a backend result only if it is well-formed against `doc`;
/// proposals get their slots and explanation re-derived from the operation.
fn vet_backend(result: ParseResult, doc: &GlyphDocument) -> Option<ParseResult> {
    match result {
        ParseResult::Proposal { proposal: p } => {
            apply(doc, &p.operation).ok()?;
            let derived = slots_for(&p.operation, doc);
            for s in &p.slots {
                let d = derived.iter().find(|d| d.slot_id == s.slot_id)?;
                if d.kind != s.kind {
                    return None;
                }
            }
            let defaulted: Vec<&str> = p
                .slots
                .iter()
                .filter(|s| s.defaulted)
                .map(|s| s.slot_id.as_str())
                .collect();
            Some(ParseResult::Proposal {
                proposal: proposal(p.operation.clone(), doc, &defaulted),
            })
        }
        ParseResult::Suggestion { suggestion } => (!suggestion.message.trim().is_empty())
            .then_some(ParseResult::Suggestion { suggestion }),
    }
}

/// Parses one command against `doc`. Grammar first, then `backend`, then a
/// suggestion.
pub fn parse_command(
    text: &str,
    doc: &GlyphDocument,
    selection: Option<&str>,
    backend: Option<&dyn LlmBackend>,
) -> ParseResult {
    let sel = selection.filter(|s| doc.contains(s));
    let mut hint = None;
    match grammar(text, doc, sel) {
        Some(Ok((op, defaulted))) => match apply(doc, &op) {
            Ok(_) => {
                return ParseResult::Proposal {
                    proposal: proposal(op, doc, &defaulted),
                }
            }
            Err(e) => hint = Some(alloc::format!("That command cannot be applied: {e}.")),
        },
        Some(Err(msg)) => hint = Some(msg),
        None => {}
    }
    if let Some(b) = backend {
        if let Ok(r) = b.translate(text, &summarize_document(doc)) {
            if let Some(r) = vet_backend(r, doc) {
                return r;
            }
        }
    }
    ParseResult::suggest(hint.unwrap_or_else(|| IRRELEVANT.into()))
}

/// Splits text into sentences at `.`, `!` or `?` followed by whitespace or
/// the end, leaving decimal points alone.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        cur.push(c);
        let boundary =
            matches!(c, '.' | '!' | '?') && chars.get(i + 1).is_none_or(|n| n.is_whitespace());
        if boundary {
            let s = cur.trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            cur.clear();
        }
    }
    let s = cur.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
    out
}

/// Parses each sentence in order, each against the document as changed by
/// the proposals before it.
pub fn parse_commands(
    text: &str,
    doc: &GlyphDocument,
    selection: Option<&str>,
    backend: Option<&dyn LlmBackend>,
) -> Vec<ParseResult> {
    let mut scratch = doc.clone();
    let mut out = Vec::new();
    for s in split_sentences(text) {
        let r = parse_command(&s, &scratch, selection, backend);
        if let Some(p) = r.proposal() {
            if let Ok(next) = apply(&scratch, &p.operation) {
                scratch = next;
            }
        }
        out.push(r);
    }
    out
}

/// Boxed backend, for callers choosing an implementation at run time.
pub type DynBackend = Box<dyn LlmBackend + Send + Sync>;

//! Canonical JSON for documents, histories and operation lists.
//!
//! Canonical form: object keys sorted, two-space indentation, numbers with at
//! most six fractional digits and no trailing zeros, and a final newline.

use gdsl_core::model::GlyphDocument;
use gdsl_core::ops::{EditHistory, Operation};
use gdsl_core::render::format_number;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

pub const DECIMALS: u8 = 6;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FormatError {
    #[error("malformed input at byte {offset}: {message}")]
    MalformedInput { offset: usize, message: String },
    #[error("schema violation at `{field}`: {message}")]
    SchemaViolation { field: String, message: String },
}

/// Byte offset of a 1-based `(line, column)` position.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in bytes.split(|b| *b == b'\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(bytes.len());
        }
        offset += l.len() + 1;
    }
    bytes.len()
}

/// Parses `bytes` as a `T`, separating syntax errors from shape errors.
pub fn from_bytes<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, FormatError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| FormatError::MalformedInput {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        FormatError::SchemaViolation {
            field: if field == "." { "(root)".into() } else { field },
            message: e.into_inner().to_string(),
        }
    })
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    let pad = |n: usize, out: &mut String| {
        for _ in 0..n {
            out.push_str("  ");
        }
    };
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => out.push_str(&i.to_string()),
            (_, Some(u)) => out.push_str(&u.to_string()),
            _ => {
                let x = n.as_f64().unwrap_or(0.0);
                out.push_str(&format_number(x, DECIMALS).unwrap_or_else(|_| "0".into()));
            }
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(depth + 1, out);
                write_value(item, depth + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(depth, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(depth + 1, out);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(&map[*k], depth + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(depth, out);
            out.push('}');
        }
    }
}

/// Canonical bytes of any serializable value.
pub fn to_canonical<T: Serialize>(value: &T) -> Vec<u8> {
    let v = serde_json::to_value(value).expect("model types serialize to JSON");
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    out.into_bytes()
}

pub fn serialize_document(doc: &GlyphDocument) -> Vec<u8> {
    to_canonical(doc)
}

pub fn deserialize_document(bytes: &[u8]) -> Result<GlyphDocument, FormatError> {
    from_bytes(bytes)
}

pub fn serialize_history(h: &EditHistory) -> Vec<u8> {
    to_canonical(h)
}

pub fn deserialize_history(bytes: &[u8]) -> Result<EditHistory, FormatError> {
    from_bytes(bytes)
}

pub fn deserialize_ops(bytes: &[u8]) -> Result<Vec<Operation>, FormatError> {
    from_bytes(bytes)
}

/// `doc` as it reads back from its canonical bytes.
pub fn canonicalize(doc: &GlyphDocument) -> GlyphDocument {
    deserialize_document(&serialize_document(doc)).expect("canonical bytes parse back")
}

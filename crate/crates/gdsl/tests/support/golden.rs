//! Fixture documents and their rendered SVGs, kept as byte-exact files.
//! Set `GDSL_BLESS=1` to rewrite them after an intended output change.

use std::fs;
use std::path::PathBuf;

use gdsl::compile;
use gdsl::format::{deserialize_document, serialize_document};
use gdsl_core::render::SvgConfig;

use super::common::{build, fixture_path};

pub const FIXTURES: [&str; 5] = ["fig4", "table1", "snowflake", "protein", "shapes"];

pub fn blessing() -> bool {
    std::env::var_os("GDSL_BLESS").is_some_and(|v| !v.is_empty())
}

pub fn doc_path(name: &str) -> PathBuf {
    fixture_path(&format!("{name}.gdsl.json"))
}

pub fn svg_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.svg"))
}

fn compare_or_bless(path: &PathBuf, bytes: &[u8]) -> Result<(), String> {
    if blessing() {
        fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))?;
        return Ok(());
    }
    let want =
        fs::read(path).map_err(|e| format!("{}: {e} (run with GDSL_BLESS=1)", path.display()))?;
    if want != bytes {
        return Err(format!(
            "{} differs from the current output",
            path.display()
        ));
    }
    Ok(())
}

/// Builds fixture `name`, checks its canonical bytes and its render against
/// the stored files, and checks both are stable across repeated runs.
pub fn check(name: &str) -> Result<(), String> {
    let doc = build(name, 0);
    let bytes = serialize_document(&doc);
    let back = deserialize_document(&bytes).map_err(|e| e.to_string())?;
    if serialize_document(&back) != bytes {
        return Err("canonical serialization does not round-trip".into());
    }
    compare_or_bless(&doc_path(name), &bytes)?;

    let stored = deserialize_document(&fs::read(doc_path(name)).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let cfg = SvgConfig::default();
    let a = compile(&stored, &cfg, None).map_err(|e| e.to_string())?;
    let b = compile(&stored, &cfg, None).map_err(|e| e.to_string())?;
    if a != b {
        return Err("two compiles differ".into());
    }
    compare_or_bless(&svg_path(name), a.as_bytes())
}

//! File formats, SVG import, the session service and the command-line
//! front end for the glyph DSL engine in `gdsl-core`.

pub mod backend;
pub mod cli;
pub mod format;
pub mod store;
pub mod svc;
pub mod svg_import;

use gdsl_core::layout::{instantiate, LayoutError};
use gdsl_core::model::{validate_document, GlyphDocument, Violation};
use gdsl_core::render::{render_svg, SvgConfig};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CompileError {
    #[error("invalid document: {0}")]
    Invalid(Violation),
    #[error("layout failed: {0}")]
    Layout(#[from] LayoutError),
}

/// Validates, instantiates and renders `doc`. `seed` overrides the
/// document's own seed.
pub fn compile(
    doc: &GlyphDocument,
    cfg: &SvgConfig,
    seed: Option<u64>,
) -> Result<String, CompileError> {
    if let Some(v) = validate_document(doc).into_iter().next() {
        return Err(CompileError::Invalid(v));
    }
    let scene = match seed {
        Some(s) if s != doc.rng_seed => {
            let mut d = doc.clone();
            d.rng_seed = s;
            instantiate(&d)?
        }
        _ => instantiate(doc)?,
    };
    Ok(render_svg(&scene, cfg))
}

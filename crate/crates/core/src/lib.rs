//! Glyph DSL engine: a hierarchical container model for glyph
//! visualizations, its atomic edit operations, layout and SVG rendering,
//! structure inference from flat vector graphics, and a natural-language
//! command grammar.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod math;

pub mod databind;
pub mod geometry;
pub mod infer;
pub mod layout;
pub mod model;
pub mod nlcmd;
pub mod ops;
pub mod path;
pub mod render;

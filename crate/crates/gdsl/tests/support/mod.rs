#![allow(dead_code)]

#[path = "../../../core/tests/common/mod.rs"]
pub mod common;
pub mod golden;
pub mod roundtrip;
pub mod service;

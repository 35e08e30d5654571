mod support;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gdsl::format::{deserialize_document, serialize_document};
use gdsl_core::model::{validate_document, Body, GlyphDocument};
use gdsl_core::ops::{apply_all, EditHistory};
use support::common::{criteria::fixture_doc, fixture_path, load_ops};
use support::golden;
use tempfile::TempDir;

fn gdsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdsl"))
        .args(args)
        .env_remove("GDSL_LLM_BACKEND")
        .env_remove("GDSL_LLM_ENDPOINT")
        .output()
        .expect("run gdsl")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_doc(dir: &TempDir, name: &str, doc: &GlyphDocument) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, serialize_document(doc)).unwrap();
    path
}

#[test]
fn compile_writes_the_golden_svg() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fig4.svg");
    let o = gdsl(&["compile", p(&golden::doc_path("fig4")), "-o", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(&out).unwrap(),
        fs::read(golden::svg_path("fig4")).unwrap()
    );
    // stdout form, twice
    let a = gdsl(&["compile", p(&golden::doc_path("fig4"))]);
    let b = gdsl(&["compile", p(&golden::doc_path("fig4"))]);
    assert_eq!(a.stdout, fs::read(golden::svg_path("fig4")).unwrap());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn compile_flags() {
    let doc = golden::doc_path("protein");
    let base = gdsl(&["compile", p(&doc)]).stdout;
    let wide = gdsl(&["compile", p(&doc), "--width", "800", "--height", "300"]).stdout;
    assert!(String::from_utf8(wide)
        .unwrap()
        .starts_with("<svg height=\"300\""));
    let coarse = String::from_utf8(gdsl(&["compile", p(&doc), "--decimals", "0"]).stdout).unwrap();
    let fractional = coarse
        .as_bytes()
        .windows(3)
        .any(|w| w[0].is_ascii_digit() && w[1] == b'.' && w[2].is_ascii_digit());
    assert!(!fractional, "{coarse}");
    let reseeded = gdsl(&["compile", p(&doc), "--seed", "99"]).stdout;
    assert_ne!(base, reseeded);
    assert_eq!(reseeded, gdsl(&["compile", p(&doc), "--seed", "99"]).stdout);
    let annotated = String::from_utf8(gdsl(&["compile", p(&doc), "--annotate"]).stdout).unwrap();
    assert!(annotated.contains("data-container-id=\"diamond\""));
}

#[test]
fn compile_errors() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.gdsl.json");
    fs::write(&bad, "{\"root\": ").unwrap();
    let o = gdsl(&["compile", p(&bad)]);
    assert_eq!(code(&o), 1);
    assert!(o.stdout.is_empty());

    let dangling = dir.path().join("dangling.gdsl.json");
    fs::write(&dangling, r#"{"root": "ghost", "containers": {}}"#).unwrap();
    let o = gdsl(&["compile", p(&dangling)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("ghost"), "{}", stderr(&o));

    let o = gdsl(&["compile", p(&dir.path().join("missing.gdsl.json"))]);
    assert_eq!(code(&o), 2);

    let unwritable = dir.path().join("no/such/dir/out.svg");
    let o = gdsl(&[
        "compile",
        p(&golden::doc_path("fig4")),
        "-o",
        p(&unwritable),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn apply_with_no_ops_copies_the_input() {
    let dir = TempDir::new().unwrap();
    let doc = dir.path().join("doc.gdsl.json");
    // deliberately not canonical
    fs::write(&doc, "{ \"containers\": {},\n\"rngSeed\": 3 }").unwrap();
    let ops = dir.path().join("ops.json");
    fs::write(&ops, "[]").unwrap();
    let out = dir.path().join("out.gdsl.json");
    let o = gdsl(&["apply", p(&doc), p(&ops), "-o", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(&out).unwrap(), fs::read(&doc).unwrap());
}

#[test]
fn apply_table1_matches_the_library() {
    let dir = TempDir::new().unwrap();
    let empty = write_doc(&dir, "empty.gdsl.json", &GlyphDocument::new());
    let out = dir.path().join("out.gdsl.json");
    let ops = fixture_path("table1.ops.json");
    let o = gdsl(&["apply", p(&empty), p(&ops), "-o", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let bytes = fs::read(&out).unwrap();
    let doc = deserialize_document(&bytes).unwrap();
    assert!(validate_document(&doc).is_empty());
    assert_eq!(doc.version, 9);
    let mut h = EditHistory::new();
    let lib = apply_all(&GlyphDocument::new(), &load_ops("table1"), &mut h).unwrap();
    assert_eq!(bytes, serialize_document(&lib));
}

#[test]
fn apply_stops_at_the_failing_operation() {
    let dir = TempDir::new().unwrap();
    let empty = write_doc(&dir, "empty.gdsl.json", &GlyphDocument::new());
    let ops = dir.path().join("ops.json");
    fs::write(
        &ops,
        r#"[
          {"op": "CreateBasic", "id": "a", "primitiveKind": "circle", "params": {"r": 2}},
          {"op": "CreateBasic", "id": "b", "primitiveKind": "circle", "params": {"r": 3}},
          {"op": "CreateRepeater", "id": "r", "targetId": "a", "coordKind": "polar", "count": 5},
          {"op": "ModifyParams", "targetId": "nobody", "params": {"r": 1}}
        ]"#,
    )
    .unwrap();
    let out = dir.path().join("out.gdsl.json");
    let o = gdsl(&["apply", p(&empty), p(&ops), "-o", p(&out)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("operation 3"), "{}", stderr(&o));
    assert!(!out.exists());

    fs::write(&ops, r#"[{"op": "Explode"}]"#).unwrap();
    assert_eq!(code(&gdsl(&["apply", p(&empty), p(&ops)])), 1);
}

#[test]
fn apply_seed_override() {
    let dir = TempDir::new().unwrap();
    let empty = write_doc(&dir, "empty.gdsl.json", &GlyphDocument::new());
    let o = gdsl(&[
        "apply",
        p(&empty),
        p(&fixture_path("protein.ops.json")),
        "--seed",
        "11",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(deserialize_document(&o.stdout).unwrap().rng_seed, 11);
}

fn flower_svg(dir: &TempDir, petals: u32) -> PathBuf {
    let mut doc = fixture_doc("table1@6");
    let op = serde_json::from_value(serde_json::json!({"op": "CreateRepeater", "id": "flower",
        "targetId": "petal", "coordKind": "polar", "count": petals}))
    .unwrap();
    doc = gdsl_core::ops::apply(&doc, &op).unwrap();
    doc.root = Some("flower".into());
    let path = write_doc(dir, "flower.gdsl.json", &doc);
    let svg = dir.path().join("flower.svg");
    let o = gdsl(&["compile", p(&path), "-o", p(&svg), "--decimals", "8"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    svg
}

#[test]
fn infer_recovers_a_twelve_petal_flower() {
    let dir = TempDir::new().unwrap();
    let svg = flower_svg(&dir, 12);
    let out = dir.path().join("inferred.gdsl.json");
    let o = gdsl(&["infer", p(&svg), "-o", p(&out), "--tol", "0.001"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = deserialize_document(&fs::read(&out).unwrap()).unwrap();
    let counts: Vec<u32> = doc
        .containers
        .values()
        .filter_map(|c| match &c.body {
            Body::Repeater { count, .. } => Some(*count),
            _ => None,
        })
        .collect();
    assert_eq!(counts, [12]);
}

#[test]
fn infer_errors() {
    let dir = TempDir::new().unwrap();
    let svg = dir.path().join("e.svg");
    fs::write(
        &svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg"><ellipse cx="1" cy="1" rx="2" ry="1"/></svg>"#,
    )
    .unwrap();
    let o = gdsl(&["infer", p(&svg)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("ellipse"));

    fs::write(&svg, r#"<svg xmlns="http://www.w3.org/2000/svg"></svg>"#).unwrap();
    let o = gdsl(&["infer", p(&svg)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nothing to infer"), "{}", stderr(&o));

    assert_eq!(code(&gdsl(&["infer", p(&dir.path().join("none.svg"))])), 2);
}

#[test]
fn parse_nl_exit_codes() {
    let dir = TempDir::new().unwrap();
    let doc = write_doc(&dir, "snow.gdsl.json", &fixture_doc("snowflake@5"));
    let o = gdsl(&[
        "parse-nl",
        "rotate and copy the branch 6 times",
        "--doc",
        p(&doc),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["proposal"]["operation"]["op"], "CreateRepeater");
    assert_eq!(v["proposal"]["operation"]["count"], 6);

    let o = gdsl(&["parse-nl", "qwfp zxcv blorp", "--doc", p(&doc)]);
    assert_eq!(code(&o), 3);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.get("suggestion").is_some(), "{v}");

    let o = gdsl(&[
        "parse-nl",
        "Vertically duplicate it twice",
        "--doc",
        p(&write_doc(&dir, "t.gdsl.json", &fixture_doc("table1@5"))),
        "--selection",
        "rect1",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let o = gdsl(&[
        "parse-nl",
        "make it red",
        "--doc",
        p(&dir.path().join("x.json")),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_errors() {
    assert_eq!(code(&gdsl(&[])), 2);
    assert_eq!(code(&gdsl(&["frobnicate"])), 2);
    assert_eq!(code(&gdsl(&["--help"])), 0);
}

mod support;

use std::fs;

use gdsl::backend::BackendConfig;
use gdsl::compile;
use gdsl::format::{deserialize_document, serialize_document};
use gdsl::svc::ServiceConfig;
use gdsl_core::model::Body;
use gdsl_core::render::SvgConfig;
use serde_json::{json, Value};
use support::common::criteria::fixture_doc;
use support::service::{create_session, get, get_if_none_match, post, Server};
use tempfile::TempDir;

fn server() -> (TempDir, Server) {
    let dir = TempDir::new().unwrap();
    let s = Server::start(dir.path());
    (dir, s)
}

fn doc_of(s: &Server, id: &str) -> Vec<u8> {
    let r = get(&s.url(&format!("/sessions/{id}/document")));
    assert_eq!(r.status, 200);
    r.body
}

#[test]
fn persistence_across_restart() {
    let dir = TempDir::new().unwrap();
    support::service::persistence(dir.path()).unwrap();
}

#[test]
fn concurrent_mutations_are_serialized() {
    let dir = TempDir::new().unwrap();
    support::service::concurrency(dir.path()).unwrap();
}

#[test]
fn create_sessions() {
    let (_d, s) = server();
    let empty = create_session(&s, b"");
    let d = deserialize_document(&doc_of(&s, &empty)).unwrap();
    assert!(d.containers.is_empty());

    let fig4 = serialize_document(&fixture_doc("fig4"));
    let seeded = create_session(&s, &fig4);
    assert_ne!(seeded, empty);
    assert_eq!(doc_of(&s, &seeded), fig4);

    let r = post(&s.url("/sessions"), r#"{"root": "ghost"}"#);
    assert_eq!(r.status, 400);
    assert_eq!(r.json()["error"], "SchemaViolation");
    let r = post(&s.url("/sessions"), "{");
    assert_eq!(r.status, 400);
    assert_eq!(r.json()["error"], "MalformedInput");
}

#[test]
fn operations() {
    let (_d, s) = server();
    let id = create_session(&s, &serialize_document(&fixture_doc("table1@4")));
    let url = s.url(&format!("/sessions/{id}/ops"));
    let r = post(
        &url,
        r#"[{"op": "EncodeData", "targetId": "bars", "attributePath": "height",
             "data": {"values": [10, 45, 30]}}]"#,
    );
    assert_eq!(r.status, 200);
    assert_eq!(r.json()["version"], 5);

    let before = doc_of(&s, &id);
    let r = post(
        &url,
        r#"[{"op": "ModifyParams", "targetId": "title", "params": {"content": "x"}},
            {"op": "ModifyParams", "targetId": "ghost", "params": {"r": 1}}]"#,
    );
    assert_eq!(r.status, 409);
    let v = r.json();
    assert_eq!(
        (v["error"].as_str(), v["index"].as_u64()),
        (Some("OperationFailed"), Some(1))
    );
    assert_eq!(doc_of(&s, &id), before, "a failed batch changes nothing");

    let r = post(&url, "[]");
    assert_eq!((r.status, r.json()["version"].as_u64()), (200, Some(5)));

    let r = post(&url, r#"[{"op": "Nope"}]"#);
    assert_eq!(r.status, 400);

    let r = post(&s.url("/sessions/no-such-session/ops"), "[]");
    assert_eq!(r.status, 404);
    let r = get(&s.url("/sessions/..%2F..%2Fetc/document"));
    assert_eq!(r.status, 404);
}

#[test]
fn language_turns_need_confirmation() {
    let (_d, s) = server();
    let id = create_session(&s, &serialize_document(&fixture_doc("table1@5")));
    let nl = s.url(&format!("/sessions/{id}/nl"));
    let confirm = s.url(&format!("/sessions/{id}/nl/confirm"));
    let before = doc_of(&s, &id);

    let r = post(
        &nl,
        json!({"text": "Vertically duplicate it twice", "selection": "rect1"}).to_string(),
    );
    assert_eq!(r.status, 200);
    let v = r.json();
    assert_eq!(v["proposal"]["operation"]["op"], "CreateRepeater");
    assert!(v["proposal"]["slots"].as_array().unwrap().len() >= 2);
    assert_eq!(doc_of(&s, &id), before, "a proposal is not applied");

    let r = post(&confirm, "");
    assert_eq!((r.status, r.json()["version"].as_u64()), (200, Some(6)));
    let r = post(&confirm, "");
    assert_eq!(r.status, 409);
    assert_eq!(r.json()["error"], "NoPendingProposal");

    let r = post(&nl, json!({"text": "what day is it today"}).to_string());
    assert!(r.json().get("suggestion").is_some());
    assert_eq!(post(&confirm, "").status, 409);

    let r = post(
        &s.url("/sessions/missing/nl"),
        json!({"text": "x"}).to_string(),
    );
    assert_eq!(r.status, 404);
}

#[test]
fn confirm_with_a_count_override() {
    let (_d, s) = server();
    let id = create_session(&s, &serialize_document(&fixture_doc("snowflake@5")));
    let nl = s.url(&format!("/sessions/{id}/nl"));
    let confirm = s.url(&format!("/sessions/{id}/nl/confirm"));
    let r = post(
        &nl,
        json!({"text": "rotate and copy the branch 6 times"}).to_string(),
    );
    assert_eq!(r.status, 200);
    let bad = post(
        &confirm,
        json!({"slotOverrides": {"count": "many"}}).to_string(),
    );
    assert_eq!(bad.status, 400);
    assert_eq!(bad.json()["error"], "SlotError");
    let r = post(
        &confirm,
        json!({"slotOverrides": {"count": 12}}).to_string(),
    );
    assert_eq!(r.status, 200, "{}", String::from_utf8_lossy(&r.body));
    let doc = deserialize_document(&doc_of(&s, &id)).unwrap();
    let counts: Vec<u32> = doc
        .containers
        .values()
        .filter_map(|c| match &c.body {
            Body::Repeater { count, .. } if c.id.as_str() != "branch" => Some(*count),
            _ => None,
        })
        .collect();
    assert!(counts.contains(&12), "{counts:?}");
    let svg = String::from_utf8(get(&s.url(&format!("/sessions/{id}/preview.svg"))).body).unwrap();
    assert!(svg.contains("<g"));
}

#[test]
fn preview() {
    let (_d, s) = server();
    let id = create_session(&s, b"");
    let url = s.url(&format!("/sessions/{id}/preview.svg"));
    let r = get(&url);
    assert_eq!(r.status, 200);
    assert_eq!(r.content_type.as_deref(), Some("image/svg+xml"));
    let empty = String::from_utf8(r.body.clone()).unwrap();
    assert!(
        empty.starts_with("<svg") && !empty.contains("<g"),
        "{empty}"
    );
    let etag = r.etag.clone().unwrap();
    let again = get(&url);
    assert_eq!(
        (again.body, again.etag.as_ref()),
        (r.body.clone(), Some(&etag))
    );
    assert_eq!(get_if_none_match(&url, &etag).status, 304);

    let r2 = post(
        &s.url(&format!("/sessions/{id}/ops")),
        r#"[{"op": "CreateBasic", "id": "c", "primitiveKind": "circle", "params": {"r": 4}}]"#,
    );
    assert_eq!(r2.status, 200);
    let after = get_if_none_match(&url, &etag);
    assert_eq!(after.status, 200);
    assert_ne!(after.body, r.body);

    // the preview is the library compile of the stored document
    let doc = deserialize_document(&doc_of(&s, &id)).unwrap();
    let cfg = SvgConfig {
        width: 120.0,
        decimals: 2,
        annotate: true,
        ..SvgConfig::default()
    };
    let r = get(&format!("{url}?width=120&decimals=2&annotate=true"));
    assert_eq!(r.body, compile(&doc, &cfg, None).unwrap().into_bytes());
    assert!(String::from_utf8(r.body)
        .unwrap()
        .contains("data-container-id=\"c\""));
}

const PETALS: &str = r##"<svg xmlns="http://www.w3.org/2000/svg">
  <polygon points="0,0 20,-5 40,0 20,5" fill="#e91e63"/>
  <polygon points="0,0 20,-5 40,0 20,5" fill="#e91e63" transform="rotate(120)"/>
  <polygon points="0,0 20,-5 40,0 20,5" fill="#e91e63" transform="rotate(240)"/>
</svg>"##;

#[test]
fn infer_merges_an_unattached_subtree() {
    let (_d, s) = server();
    let id = create_session(&s, &serialize_document(&fixture_doc("shapes")));
    let before = deserialize_document(&doc_of(&s, &id)).unwrap();
    let r = post(&s.url(&format!("/sessions/{id}/infer")), PETALS);
    assert_eq!(r.status, 200, "{}", String::from_utf8_lossy(&r.body));
    let added: Vec<String> = serde_json::from_value(r.json()["addedContainerIds"].clone()).unwrap();
    let doc = deserialize_document(&doc_of(&s, &id)).unwrap();
    assert_eq!(doc.root, before.root, "the root stays");
    let reps: Vec<_> = added
        .iter()
        .filter_map(|a| match &doc.get(a).unwrap().body {
            Body::Repeater { count, .. } => Some(*count),
            _ => None,
        })
        .collect();
    assert_eq!(reps, [3]);

    let r = post(
        &s.url(&format!("/sessions/{id}/infer")),
        r#"<svg xmlns="http://www.w3.org/2000/svg"><ellipse rx="1" ry="2"/></svg>"#,
    );
    assert_eq!(r.status, 400);
    assert_eq!(r.json()["error"], "UnsupportedElement");
    let r = post(
        &s.url(&format!("/sessions/{id}/infer")),
        r#"<svg xmlns="http://www.w3.org/2000/svg"/>"#,
    );
    assert_eq!(r.status, 400);
}

#[test]
fn export_and_reimport() {
    let (dir, s) = server();
    let id = create_session(&s, &serialize_document(&fixture_doc("fig4")));
    let r = get(&s.url(&format!("/sessions/{id}/export")));
    assert_eq!(r.status, 200);
    let v: Value = r.json();
    let svg = v["svg"].as_str().unwrap();
    assert!(svg.starts_with("<svg"));
    let d = dir.path().join(&id);
    assert_eq!(fs::read_to_string(d.join("export.svg")).unwrap(), svg);
    let exported = fs::read(d.join("export.gdsl.json")).unwrap();
    assert_eq!(exported, doc_of(&s, &id));

    let copy = create_session(&s, &exported);
    assert_eq!(doc_of(&s, &copy), doc_of(&s, &id));
    let copy2 = create_session(&s, v["gdsl"].to_string().as_bytes());
    assert_eq!(doc_of(&s, &copy2), doc_of(&s, &id));
    assert_eq!(get(&s.url("/sessions/nope/export")).status, 404);
}

#[test]
fn sessions_are_isolated() {
    let (dir, s) = server();
    let a = create_session(&s, b"");
    let b = create_session(&s, &serialize_document(&fixture_doc("shapes")));
    let b_file = dir.path().join(&b).join("doc.gdsl.json");
    let b_before = fs::read(&b_file).unwrap();
    let r = post(
        &s.url(&format!("/sessions/{a}/ops")),
        r#"[{"op": "CreateBasic", "id": "circle", "primitiveKind": "circle", "params": {"r": 9}}]"#,
    );
    assert_eq!(r.status, 200);
    assert_eq!(fs::read(&b_file).unwrap(), b_before);
    assert_eq!(doc_of(&s, &b), b_before);
}

#[test]
fn config_ui_and_cors() {
    let dir = TempDir::new().unwrap();
    let ui = TempDir::new().unwrap();
    fs::write(
        ui.path().join("index.html"),
        "<!doctype html><title>ui</title>",
    )
    .unwrap();
    let s = Server::start_with(ServiceConfig {
        data_dir: dir.path().to_path_buf(),
        cors_origin: Some("http://localhost:5173".into()),
        ui_dir: Some(ui.path().to_path_buf()),
        backend: BackendConfig::default(),
    });
    let c = get(&s.url("/config")).json();
    assert_eq!(c["backend"]["kind"], "mock");
    assert_eq!(c["corsOrigin"], "http://localhost:5173");
    assert!(c["backend"].get("apiKey").is_none());
    let page = get(&s.url("/ui/index.html"));
    assert_eq!(page.status, 200);
    assert!(String::from_utf8(page.body)
        .unwrap()
        .contains("<title>ui</title>"));

    let r = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .new_agent()
        .get(&s.url("/config"))
        .header("origin", "http://localhost:5173")
        .call()
        .unwrap();
    assert_eq!(
        r.headers()
            .get("access-control-allow-origin")
            .and_then(|v| v.to_str().ok()),
        Some("http://localhost:5173")
    );
}

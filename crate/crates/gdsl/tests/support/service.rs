//! Runs the service on an ephemeral port and talks to it over HTTP.

use std::net::SocketAddr;
use std::path::Path;

use gdsl::backend::BackendConfig;
use gdsl::format::{deserialize_document, deserialize_history, serialize_document};
use gdsl::svc::{spawn, ServiceConfig};
use gdsl_core::ops::replay;
use serde_json::{json, Value};

pub struct Server {
    pub addr: SocketAddr,
    rt: Option<tokio::runtime::Runtime>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl Server {
    pub fn start(data_dir: &Path) -> Server {
        Self::start_with(ServiceConfig {
            data_dir: data_dir.to_path_buf(),
            cors_origin: None,
            ui_dir: None,
            backend: BackendConfig::default(),
        })
    }

    pub fn start_with(config: ServiceConfig) -> Server {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()
            .expect("runtime");
        let (addr, task) = rt
            .block_on(spawn(config, "127.0.0.1:0".parse().unwrap()))
            .expect("bind");
        Server {
            addr,
            rt: Some(rt),
            task,
        }
    }

    /// Stops the server abruptly, as a crash would.
    pub fn kill(mut self) {
        self.task.abort();
        if let Some(rt) = self.rt.take() {
            rt.shutdown_background();
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.task.abort();
        if let Some(rt) = self.rt.take() {
            rt.shutdown_background();
        }
    }
}

pub struct Reply {
    pub status: u16,
    pub body: Vec<u8>,
    pub etag: Option<String>,
    pub content_type: Option<String>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into()
}

fn reply(r: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Reply {
    let mut r = r.expect("request");
    let header = |name: &str| {
        r.headers()
            .get(name)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string)
    };
    let etag = header("etag");
    let content_type = header("content-type");
    let body = r.body_mut().read_to_vec().expect("body");
    Reply {
        status: r.status().as_u16(),
        body,
        etag,
        content_type,
    }
}

pub fn post(url: &str, body: impl AsRef<[u8]>) -> Reply {
    reply(
        agent()
            .post(url)
            .header("content-type", "application/json")
            .send(body.as_ref()),
    )
}

pub fn get(url: &str) -> Reply {
    reply(agent().get(url).call())
}

pub fn get_if_none_match(url: &str, etag: &str) -> Reply {
    reply(agent().get(url).header("if-none-match", etag).call())
}

pub fn create_session(s: &Server, body: &[u8]) -> String {
    let r = post(&s.url("/sessions"), body);
    assert_eq!(r.status, 201, "{}", String::from_utf8_lossy(&r.body));
    r.json()["sessionId"].as_str().unwrap().to_string()
}

const TEN_OPS: &str = r##"[
  {"op": "CreateBasic", "id": "bar", "primitiveKind": "rect", "params": {"x": 0, "y": 0, "width": 20, "height": 10}},
  {"op": "CreateRepeater", "id": "bars", "targetId": "bar", "coordKind": "cartesian", "count": 3},
  {"op": "EncodeData", "targetId": "bars", "attributePath": "height", "data": {"values": [10, 45, 30]}},
  {"op": "CreateBasic", "id": "title", "primitiveKind": "text", "params": {"content": "Sales", "fontSize": 12}},
  {"op": "CreateCompositor", "id": "chart", "children": ["title", "bars"],
   "relations": [{"source": "title", "target": "bars", "relType": "top", "distance": {"x": 0, "y": -10}}]},
  {"op": "ModifyParams", "targetId": "bar", "params": {"fill": "teal"}},
  {"op": "ModifyParams", "targetId": "bars", "params": {"body.count": 4}},
  {"op": "EncodeData", "targetId": "bars", "attributePath": "height", "data": {"expression": "5 + random()*40"}},
  {"op": "ModifyParams", "targetId": "title", "params": {"content": "Revenue"}},
  {"op": "ModifyParams", "targetId": "chart", "params": {"transform.translate.x": 12.5}}
]"##;

/// Ten single-operation requests, then a crash and restart: the document
/// and history read back byte for byte.
pub fn persistence(data_dir: &Path) -> Result<(), String> {
    let s = Server::start(data_dir);
    let id = create_session(&s, b"");
    let ops: Vec<Value> = serde_json::from_str(TEN_OPS).unwrap();
    assert_eq!(ops.len(), 10);
    for (k, op) in ops.iter().enumerate() {
        let r = post(
            &s.url(&format!("/sessions/{id}/ops")),
            json!([op]).to_string(),
        );
        if r.status != 200 {
            return Err(format!(
                "op {k}: {} {}",
                r.status,
                String::from_utf8_lossy(&r.body)
            ));
        }
        if r.json()["version"] != json!(k + 1) {
            return Err(format!("op {k}: version {}", r.json()["version"]));
        }
    }
    let doc = get(&s.url(&format!("/sessions/{id}/document"))).body;
    let hist = get(&s.url(&format!("/sessions/{id}/history"))).body;
    let preview = get(&s.url(&format!("/sessions/{id}/preview.svg"))).body;
    s.kill();

    let s = Server::start(data_dir);
    let doc2 = get(&s.url(&format!("/sessions/{id}/document")));
    let hist2 = get(&s.url(&format!("/sessions/{id}/history")));
    if doc2.status != 200 || doc2.body != doc {
        return Err("document differs after restart".into());
    }
    if hist2.status != 200 || hist2.body != hist {
        return Err("history differs after restart".into());
    }
    if get(&s.url(&format!("/sessions/{id}/preview.svg"))).body != preview {
        return Err("preview differs after restart".into());
    }
    let h = deserialize_history(&hist).map_err(|e| e.to_string())?;
    if h.entries.len() != 10 {
        return Err(format!("{} history entries", h.entries.len()));
    }
    Ok(())
}

/// Twenty concurrent single-op requests to one session.
pub fn concurrency(data_dir: &Path) -> Result<(), String> {
    let s = Server::start(data_dir);
    let op = serde_json::from_value(json!({"op": "CreateBasic", "id": "dot",
        "primitiveKind": "circle", "params": {"r": 1}}))
    .unwrap();
    let mut start = gdsl_core::ops::apply(&gdsl_core::model::GlyphDocument::new(), &op).unwrap();
    start.version = 0;
    let initial = serialize_document(&start);
    let id = create_session(&s, &initial);
    let url = s.url(&format!("/sessions/{id}/ops"));
    let versions: Vec<u64> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..20)
            .map(|k| {
                let url = url.clone();
                scope.spawn(move || {
                    let op = json!([{"op": "ModifyParams", "targetId": "dot",
                        "params": {"r": k + 2}}]);
                    let r = post(&url, op.to_string());
                    assert_eq!(r.status, 200, "{}", String::from_utf8_lossy(&r.body));
                    r.json()["version"].as_u64().unwrap()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut sorted = versions.clone();
    sorted.sort_unstable();
    if sorted != (1..=20).collect::<Vec<u64>>() {
        return Err(format!("versions {versions:?}"));
    }
    let hist = deserialize_history(&get(&s.url(&format!("/sessions/{id}/history"))).body)
        .map_err(|e| e.to_string())?;
    for (i, e) in hist.entries.iter().enumerate() {
        if (e.version_before, e.version_after) != (i as u64, i as u64 + 1) {
            return Err(format!(
                "entry {i}: {} -> {}",
                e.version_before, e.version_after
            ));
        }
    }
    let doc_bytes = get(&s.url(&format!("/sessions/{id}/document"))).body;
    let doc = deserialize_document(&doc_bytes).map_err(|e| e.to_string())?;
    let replayed = replay(&start, &hist).map_err(|e| format!("replay: {e:?}"))?;
    if serialize_document(&replayed) != doc_bytes {
        return Err("document is not the replay of its history".into());
    }
    if doc.version != 20 {
        return Err(format!("final version {}", doc.version));
    }
    Ok(())
}

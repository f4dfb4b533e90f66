//! JSON-RPC 2.0 dispatch over [`Engine`], independent of the transport.

use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, Mutex};

use base64::Engine as _;
use livevis_core::metavis::GroupId;
use livevis_core::params::ParamValue;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::engine::{ApiError, Direction, Engine};

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct OpenParams {
    toolchain_id: String,
    width: Option<u32>,
    height: Option<u32>,
    session_id: Option<String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct SessionParams {
    session_id: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct UpdateParams {
    session_id: String,
    files: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CheckoutParams {
    session_id: String,
    revision_id: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct DiffParams {
    session_id: String,
    from_rev: String,
    to_rev: String,
    #[serde(default)]
    direction: Direction,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct SetParams {
    session_id: String,
    values: BTreeMap<String, ParamValue>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ImageParams {
    session_id: String,
    #[serde(rename = "ref")]
    reference: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ExpandParams {
    session_id: String,
    group_id: GroupId,
    expanded: bool,
}

struct Failure {
    code: i64,
    message: String,
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure { code: e.code(), message: e.to_string() }
    }
}

fn error_response(id: Value, code: i64, message: &str) -> Value {
    json!({"jsonrpc": "2.0", "id": id, "error": {"code": code, "message": message}})
}

fn parse<T: DeserializeOwned>(params: Value) -> Result<T, Failure> {
    serde_json::from_value(params).map_err(|e| Failure { code: INVALID_PARAMS, message: e.to_string() })
}

/// One client connection: answers requests and tracks which sessions the
/// client uses, so that only their notifications are forwarded.
#[derive(Clone)]
pub struct Connection {
    engine: Arc<Engine>,
    sessions: Arc<Mutex<HashSet<String>>>,
}

impl Connection {
    pub fn new(engine: Arc<Engine>) -> Self {
        Connection { engine, sessions: Arc::new(Mutex::new(HashSet::new())) }
    }

    /// Forward notifications of this connection's sessions to `send`, which
    /// returns `false` once the peer is gone.
    pub fn subscribe(&self, send: impl Fn(Value) -> bool + Send + Sync + 'static) {
        let sessions = self.sessions.clone();
        self.engine.subscribe(Box::new(move |n| {
            let wanted = sessions.lock().unwrap_or_else(|e| e.into_inner()).contains(&n.session);
            !wanted || send(n.to_json())
        }));
    }

    fn track(&self, session: &str) {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).insert(session.to_string());
    }

    /// Handle one text frame. Returns the reply, if any.
    pub fn handle_text(&self, text: &str) -> Option<String> {
        let reply = match serde_json::from_str::<Value>(text) {
            Ok(v) => self.handle_value(v),
            Err(e) => Some(error_response(Value::Null, PARSE_ERROR, &format!("parse error: {e}"))),
        };
        reply.map(|v| v.to_string())
    }

    /// Handle a parsed request or batch.
    pub fn handle_value(&self, msg: Value) -> Option<Value> {
        match msg {
            Value::Array(items) if items.is_empty() => {
                Some(error_response(Value::Null, INVALID_REQUEST, "empty batch"))
            }
            Value::Array(items) => {
                let replies: Vec<Value> = items.into_iter().filter_map(|m| self.handle_single(m)).collect();
                (!replies.is_empty()).then_some(Value::Array(replies))
            }
            other => self.handle_single(other),
        }
    }

    fn handle_single(&self, msg: Value) -> Option<Value> {
        let Value::Object(mut obj) = msg else {
            return Some(error_response(Value::Null, INVALID_REQUEST, "request must be an object"));
        };
        let id = obj.remove("id");
        let reply_id = id.clone().unwrap_or(Value::Null);
        if !matches!(reply_id, Value::Null | Value::String(_) | Value::Number(_)) {
            return Some(error_response(Value::Null, INVALID_REQUEST, "id must be a string, number or null"));
        }
        if obj.get("jsonrpc") != Some(&Value::String("2.0".into())) {
            return Some(error_response(reply_id, INVALID_REQUEST, "jsonrpc must be \"2.0\""));
        }
        let Some(Value::String(method)) = obj.remove("method") else {
            return Some(error_response(reply_id, INVALID_REQUEST, "method must be a string"));
        };
        let params = match obj.remove("params") {
            None => Value::Object(Default::default()),
            Some(p @ Value::Object(_)) => p,
            Some(Value::Array(_)) => {
                return id.map(|_| error_response(reply_id, INVALID_PARAMS, "params must be named"));
            }
            Some(_) => return Some(error_response(reply_id, INVALID_REQUEST, "params must be an object or array")),
        };
        let outcome = self.call(&method, params);
        let id = id?;
        Some(match outcome {
            Ok(result) => json!({"jsonrpc": "2.0", "id": id, "result": result}),
            Err(f) => error_response(id, f.code, &f.message),
        })
    }

    fn call(&self, method: &str, params: Value) -> Result<Value, Failure> {
        let e = &self.engine;
        let ok = json!({"ok": true});
        Ok(match method {
            "session.open" => {
                let p: OpenParams = parse(params)?;
                let id = e.open_session(&p.toolchain_id, p.width, p.height, p.session_id.as_deref())?;
                self.track(&id);
                json!({"sessionId": id})
            }
            "source.update" => {
                let p: UpdateParams = parse(params)?;
                self.track(&p.session_id);
                e.update_source(&p.session_id, p.files)?;
                ok
            }
            "state.checkout" => {
                let p: CheckoutParams = parse(params)?;
                self.track(&p.session_id);
                let source = e.checkout(&p.session_id, &p.revision_id)?;
                json!({"revisionId": p.revision_id, "toolchainId": source.toolchain_id, "files": source.files})
            }
            "view.tree" => {
                let p: SessionParams = parse(params)?;
                self.track(&p.session_id);
                serde_json::to_value(e.view_tree(&p.session_id)?).expect("tree view serializes")
            }
            "diff.get" => {
                let p: DiffParams = parse(params)?;
                serde_json::to_value(e.diff(&p.session_id, &p.from_rev, &p.to_rev, p.direction)?)
                    .expect("diff serializes")
            }
            "params.set" => {
                let p: SetParams = parse(params)?;
                self.track(&p.session_id);
                json!({"generation": e.set_params(&p.session_id, p.values)?})
            }
            "image.get" => {
                let p: ImageParams = parse(params)?;
                let img = e.image(&p.session_id, &p.reference)?;
                let png = base64::engine::general_purpose::STANDARD.encode(img.encode_png());
                json!({"ref": p.reference, "width": img.width(), "height": img.height(), "png": png})
            }
            "view.expand" => {
                let p: ExpandParams = parse(params)?;
                e.expand(&p.session_id, p.group_id, p.expanded)?;
                ok
            }
            _ => return Err(Failure { code: METHOD_NOT_FOUND, message: format!("method not found: {method}") }),
        })
    }
}

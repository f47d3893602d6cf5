//! HTTP adapter for tool servers.
//!
//! `POST {endpoint}/v1/tool` with `{"api", "args", "request_id"}`; the
//! server answers `{"status": "ok"|"error", "payload": {"value", "perturbed"},
//! "message"}`. Values use the externally tagged [`GeoValue`] JSON form.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geocalc::GeoValue;

use super::{ApiName, ToolArgs, ToolBackend, ToolError, ToolOutput, ToolStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub api: String,
    pub args: ToolArgs,
    pub request_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WirePayload {
    pub value: GeoValue,
    #[serde(default)]
    pub perturbed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub status: ToolStatus,
    #[serde(default)]
    pub payload: Option<WirePayload>,
    #[serde(default)]
    pub message: String,
}

/// Content-derived id, so retried requests are recognisable server-side.
pub fn request_id(api: ApiName, args: &ToolArgs) -> String {
    let body = serde_json::to_string(args).unwrap_or_default();
    let mut h = Sha256::new();
    h.update(api.as_str().as_bytes());
    h.update([0u8]);
    h.update(body.as_bytes());
    hex::encode(&h.finalize()[..8])
}

pub struct RemoteBackend {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, ToolError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ToolError::Transport(e.to_string()))?;
        Ok(RemoteBackend {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            client,
        })
    }
}

impl ToolBackend for RemoteBackend {
    fn call(&self, api: ApiName, args: &ToolArgs) -> Result<ToolOutput, ToolError> {
        let req = WireRequest {
            api: api.as_str().to_string(),
            args: args.clone(),
            request_id: request_id(api, args),
        };
        let resp = self
            .client
            .post(format!("{}/v1/tool", self.endpoint))
            .json(&req)
            .send()
            .map_err(|e| ToolError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ToolError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ToolError::Transport(format!("HTTP {status}: {text}")));
        }
        let wire: WireResponse =
            serde_json::from_str(&text).map_err(|e| ToolError::Transport(format!("bad response: {e}")))?;
        match (wire.status, wire.payload) {
            (ToolStatus::Ok, Some(p)) => Ok(ToolOutput {
                value: p.value,
                perturbed: p.perturbed,
            }),
            (ToolStatus::Ok, None) => Err(ToolError::Transport("ok response without payload".into())),
            (ToolStatus::Error, _) => Err(ToolError::Failed(wire.message)),
        }
    }
}

/// Server side of the protocol: decodes a request body, runs it on
/// `backend` and encodes the reply. Malformed bodies produce error replies.
pub fn handle_wire_request(backend: &dyn ToolBackend, body: &str) -> String {
    let reply = match serde_json::from_str::<WireRequest>(body) {
        Err(e) => WireResponse {
            status: ToolStatus::Error,
            payload: None,
            message: format!("malformed request: {e}"),
        },
        Ok(req) => match req.api.parse::<ApiName>().and_then(|api| backend.call(api, &req.args)) {
            Ok(out) => WireResponse {
                status: ToolStatus::Ok,
                message: out.value.summary(),
                payload: Some(WirePayload {
                    value: out.value,
                    perturbed: out.perturbed,
                }),
            },
            Err(e) => WireResponse {
                status: ToolStatus::Error,
                payload: None,
                message: e.to_string(),
            },
        },
    };
    serde_json::to_string(&reply).expect("wire response serializes")
}

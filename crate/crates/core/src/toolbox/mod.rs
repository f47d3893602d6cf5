//! The eight tool APIs behind a backend abstraction.

mod args;
mod remote;
mod scene;
mod synthetic;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geocalc::{self, GeoValue};

pub use args::{bbox_from_value, bbox_to_value, ArgError};
pub use remote::{handle_wire_request, RemoteBackend, WireRequest, WireResponse};
pub use scene::{NoiseConfig, SceneCamera, SceneError, SceneObject, SceneSpec};
pub use synthetic::{SyntheticBackend, ToolFault, DEFAULT_FACE_DENSITY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiName {
    Reconstruct,
    Detect,
    ProjectBoxTo3dPoints,
    PredictObjPose,
    EstimateScale,
    Ocr,
    AnalyzeMotion,
    Code,
}

impl ApiName {
    pub const ALL: [ApiName; 8] = [
        ApiName::Reconstruct,
        ApiName::Detect,
        ApiName::ProjectBoxTo3dPoints,
        ApiName::PredictObjPose,
        ApiName::EstimateScale,
        ApiName::Ocr,
        ApiName::AnalyzeMotion,
        ApiName::Code,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ApiName::Reconstruct => "reconstruct",
            ApiName::Detect => "detect",
            ApiName::ProjectBoxTo3dPoints => "project_box_to_3d_points",
            ApiName::PredictObjPose => "predict_obj_pose",
            ApiName::EstimateScale => "estimate_scale",
            ApiName::Ocr => "ocr",
            ApiName::AnalyzeMotion => "analyze_motion",
            ApiName::Code => "code",
        }
    }
}

impl fmt::Display for ApiName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ApiName {
    type Err = ToolError;

    fn from_str(s: &str) -> Result<Self, ToolError> {
        ApiName::ALL
            .iter()
            .copied()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| ToolError::UnknownApi(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ToolError {
    #[error("unknown api `{0}`")]
    UnknownApi(String),
    #[error(transparent)]
    Args(#[from] ArgError),
    #[error("{0}")]
    Failed(String),
    #[error("geocalc: {0}")]
    Geocalc(String),
    #[error("transport: {0}")]
    Transport(String),
}

impl From<crate::geometry::GeometryError> for ToolError {
    fn from(e: crate::geometry::GeometryError) -> Self {
        ToolError::Failed(e.to_string())
    }
}

/// Successful tool result. `perturbed` is set whenever noise or an injected
/// fault touched the value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolOutput {
    pub value: GeoValue,
    pub perturbed: bool,
}

impl ToolOutput {
    pub fn exact(value: GeoValue) -> Self {
        ToolOutput {
            value,
            perturbed: false,
        }
    }
}

pub type ToolArgs = BTreeMap<String, GeoValue>;

pub trait ToolBackend: Send + Sync {
    fn call(&self, api: ApiName, args: &ToolArgs) -> Result<ToolOutput, ToolError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolRequest {
    pub api: String,
    #[serde(default)]
    pub args: serde_json::Value,
    pub output_variable: String,
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResponse {
    pub status: ToolStatus,
    pub payload: Option<GeoValue>,
    pub message: String,
    pub perturbed: bool,
}

impl ToolResponse {
    pub fn from_result(r: Result<ToolOutput, ToolError>) -> Self {
        match r {
            Ok(out) => ToolResponse {
                status: ToolStatus::Ok,
                message: out.value.summary(),
                payload: Some(out.value),
                perturbed: out.perturbed,
            },
            Err(e) => ToolResponse {
                status: ToolStatus::Error,
                payload: None,
                message: e.to_string(),
                perturbed: false,
            },
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ToolStatus::Ok
    }
}

/// Dispatches perception APIs to a backend; `code` always runs locally.
#[derive(Clone)]
pub struct Toolbox {
    backend: Arc<dyn ToolBackend>,
}

impl Toolbox {
    pub fn new(backend: Arc<dyn ToolBackend>) -> Self {
        Toolbox { backend }
    }

    pub fn call(&self, api: ApiName, args: &ToolArgs) -> Result<ToolOutput, ToolError> {
        match api {
            ApiName::Code => run_code(args),
            _ => self.backend.call(api, args),
        }
    }
}

/// `code` API: `{program: text, variables: record}`.
pub fn run_code(args: &ToolArgs) -> Result<ToolOutput, ToolError> {
    let program = args::text(args, "program")?;
    let vars = match args.get("variables") {
        Some(GeoValue::Record(r)) => r.clone(),
        None => BTreeMap::new(),
        Some(other) => {
            return Err(ArgError::Type {
                name: "variables".into(),
                expected: "record",
                found: other.type_name(),
            }
            .into())
        }
    };
    let parsed = geocalc::parse_program(&program).map_err(|e| ToolError::Geocalc(e.to_string()))?;
    let value = geocalc::evaluate(&parsed, &vars).map_err(|e| ToolError::Geocalc(e.to_string()))?;
    Ok(ToolOutput::exact(value))
}

/// Human-readable API reference handed to planners.
pub const API_DOCUMENTS: &str = include_str!("../../assets/api_documents.txt");

//! The formal task constraint: a reference frame plus an objective.

mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{Axis, Cardinal};
use crate::llm::{extract_fenced_block, FenceTag};

pub use parser::parse_frame_spec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn as_char(&self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }

    pub fn factor(&self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedAxis {
    pub sign: Sign,
    pub axis: Axis,
}

impl SignedAxis {
    pub fn new(sign: Sign, axis: Axis) -> Self {
        SignedAxis { sign, axis }
    }
}

impl fmt::Display for SignedAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.sign.as_char(), self.axis)
    }
}

/// What `+Z_ref` is tied to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FrameVariant {
    ObjectBased { object: String, axis: SignedAxis },
    CameraBased { camera: usize, axis: SignedAxis },
    /// `+Z_ref = Centroid(to) - Centroid(from)`.
    DirectionBased { from: String, to: String },
}

impl FrameVariant {
    pub fn name(&self) -> &'static str {
        match self {
            FrameVariant::ObjectBased { .. } => "object_based",
            FrameVariant::CameraBased { .. } => "camera_based",
            FrameVariant::DirectionBased { .. } => "direction_based",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameSpec {
    pub variant: FrameVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cardinal: Option<Cardinal>,
}

impl FrameSpec {
    pub fn object(object: &str, sign: Sign, axis: Axis) -> Self {
        FrameSpec {
            variant: FrameVariant::ObjectBased {
                object: object.to_string(),
                axis: SignedAxis::new(sign, axis),
            },
            cardinal: None,
        }
    }

    pub fn camera(camera: usize, sign: Sign, axis: Axis) -> Self {
        FrameSpec {
            variant: FrameVariant::CameraBased {
                camera,
                axis: SignedAxis::new(sign, axis),
            },
            cardinal: None,
        }
    }

    pub fn direction(from: &str, to: &str) -> Self {
        FrameSpec {
            variant: FrameVariant::DirectionBased {
                from: from.to_string(),
                to: to.to_string(),
            },
            cardinal: None,
        }
    }

    pub fn with_cardinal(mut self, c: Cardinal) -> Self {
        self.cardinal = Some(c);
        self
    }

    /// Canonical plain-text form; `parse_frame_spec(render()) == self`.
    pub fn render(&self) -> String {
        let rhs = match &self.variant {
            FrameVariant::ObjectBased { object, axis } => format!("{axis}_{object}"),
            FrameVariant::CameraBased { camera, axis } => format!("{axis}_cam{camera}"),
            FrameVariant::DirectionBased { from, to } => {
                format!("Centroid({to}) - Centroid({from})")
            }
        };
        match self.cardinal {
            Some(c) => format!("+Z_ref = {rhs} = {c}"),
            None => format!("+Z_ref = {rhs}"),
        }
    }

    /// Scene entities the frame depends on.
    pub fn entities(&self) -> Vec<&str> {
        match &self.variant {
            FrameVariant::ObjectBased { object, .. } => vec![object.as_str()],
            FrameVariant::CameraBased { .. } => vec![],
            FrameVariant::DirectionBased { from, to } => vec![from.as_str(), to.as_str()],
        }
    }
}

impl fmt::Display for FrameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn render_frame_spec(spec: &FrameSpec) -> String {
    spec.render()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectiveKind {
    RelativeDirection,
    CardinalDirection,
    RotationAnalysis,
    MotionAnalysis,
    MetricMeasure,
    Count,
    Ordering,
    Custom,
}

impl ObjectiveKind {
    /// Keyword routing over the objective sentence; falls back to `Custom`.
    pub fn infer(statement: &str) -> ObjectiveKind {
        let s = statement.to_lowercase();
        let has = |words: &[&str]| words.iter().any(|w| find_word(&s, w).is_some());
        if has(&["cardinal", "north", "south", "east", "west"]) {
            ObjectiveKind::CardinalDirection
        } else if has(&["rotation", "rotate", "pan", "tilt", "roll"]) {
            ObjectiveKind::RotationAnalysis
        } else if has(&["motion", "movement", "moving", "move"]) {
            ObjectiveKind::MotionAnalysis
        } else if has(&["distance", "meters", "metres", "length", "height", "how far", "size"]) {
            ObjectiveKind::MetricMeasure
        } else if has(&["number of", "count", "how many"]) {
            ObjectiveKind::Count
        } else if has(&["order", "sequence", "ranking"]) {
            ObjectiveKind::Ordering
        } else if has(&["relative direction", "relative position", "left", "right", "front", "behind"]) {
            ObjectiveKind::RelativeDirection
        } else {
            ObjectiveKind::Custom
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub subjects: Vec<String>,
    pub statement: String,
}

impl ObjectiveSpec {
    /// Builds a spec from the sentence, picking subjects from `entities`
    /// in order of first mention (plural `-s`/`-es` forms count).
    pub fn from_statement(statement: &str, entities: &[String]) -> Result<Self, ParseError> {
        let statement = statement.trim();
        if statement.is_empty() {
            return Err(ParseError {
                position: 0,
                message: "objective statement is empty".into(),
            });
        }
        let lower = statement.to_lowercase();
        let mut found: Vec<(usize, String)> = Vec::new();
        for e in entities {
            if found.iter().any(|(_, f)| f == e) {
                continue;
            }
            if let Some(pos) = find_word(&lower, &e.to_lowercase()) {
                found.push((pos, e.clone()));
            }
        }
        found.sort();
        Ok(ObjectiveSpec {
            kind: ObjectiveKind::infer(statement),
            subjects: found.into_iter().map(|(_, e)| e).collect(),
            statement: statement.to_string(),
        })
    }
}

fn find_word(hay: &str, word: &str) -> Option<usize> {
    if word.is_empty() {
        return None;
    }
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    let mut from = 0;
    while let Some(i) = hay[from..].find(word) {
        let start = from + i;
        let end = start + word.len();
        let before_ok = hay[..start].chars().next_back().is_none_or(|c| !is_word(c));
        let tail = &hay[end..];
        let suffix = if tail.starts_with("es") && !tail[2..].starts_with(is_word) {
            2
        } else if tail.starts_with('s') && !tail[1..].starts_with(is_word) {
            1
        } else {
            0
        };
        let after_ok = tail[suffix..].chars().next().is_none_or(|c| !is_word(c));
        if before_ok && after_ok {
            return Some(start);
        }
        from = start + word.len().max(1);
        while !hay.is_char_boundary(from) {
            from += 1;
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskConstraint {
    pub reference: FrameSpec,
    pub objective: ObjectiveSpec,
    pub reasoning: String,
}

impl TaskConstraint {
    /// Stable digest used to check that a run never alters its constraint.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).unwrap_or_default();
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormalizationDoc {
    pub reasoning: String,
    pub formalization: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DocError {
    #[error("no JSON object found in response")]
    NoJson,
    #[error("response JSON is invalid: {0}")]
    InvalidJson(String),
    #[error("response is missing key `{0}`")]
    MissingKey(&'static str),
}

/// Pulls `{"reasoning", "formalization"}` out of a model response.
pub fn parse_formalization_doc(raw: &str) -> Result<FormalizationDoc, DocError> {
    let block = extract_fenced_block(raw, FenceTag::Json).map_err(|_| DocError::NoJson)?;
    let v: serde_json::Value =
        serde_json::from_str(&block).map_err(|e| DocError::InvalidJson(e.to_string()))?;
    let get = |k: &'static str| -> Result<String, DocError> {
        match v.get(k) {
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            Some(other) if !other.is_null() => Ok(other.to_string()),
            _ => Err(DocError::MissingKey(k)),
        }
    };
    Ok(FormalizationDoc {
        reasoning: get("reasoning")?,
        formalization: get("formalization")?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum ValidationFlag {
    NoEntities,
    NotDetectable { entity: String },
    AbstractAnchor { entity: String },
    DegenerateDirection { entity: String },
    UnknownSubject { entity: String },
    CameraOutOfRange { camera: usize, available: usize },
}

impl fmt::Display for ValidationFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationFlag::NoEntities => write!(f, "scene lists no entities"),
            ValidationFlag::NotDetectable { entity } => {
                write!(f, "anchor `{entity}` is not a detectable scene object")
            }
            ValidationFlag::AbstractAnchor { entity } => {
                write!(f, "anchor `{entity}` is an abstract region with no camera proxy")
            }
            ValidationFlag::DegenerateDirection { entity } => {
                write!(f, "direction starts and ends at `{entity}`")
            }
            ValidationFlag::UnknownSubject { entity } => {
                write!(f, "objective subject `{entity}` is not in the scene")
            }
            ValidationFlag::CameraOutOfRange { camera, available } => {
                write!(f, "camera {camera} does not exist ({available} available)")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub flags: Vec<ValidationFlag>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.flags.is_empty()
    }
}

const ABSTRACT_WORDS: &[&str] = &[
    "room", "region", "area", "space", "zone", "place", "kitchen", "bedroom", "bathroom",
    "hallway", "corridor", "office", "lobby", "corner", "side", "floor", "wall", "house",
    "building", "scene", "environment", "location", "spot", "background", "foreground",
];

fn is_abstract(name: &str) -> bool {
    let lower = name.to_lowercase();
    lower
        .split(|c: char| c == '_' || c == ' ')
        .any(|part| ABSTRACT_WORDS.contains(&part))
}

/// Checks a constraint against the scene's entity names (class labels)
/// and, when known, its camera count.
pub fn validate_task_constraint(
    tc: &TaskConstraint,
    entities: &[String],
    camera_count: Option<usize>,
) -> ValidationReport {
    let mut flags = Vec::new();
    if entities.is_empty() {
        flags.push(ValidationFlag::NoEntities);
    }
    let known = |name: &str| entities.iter().any(|e| e.eq_ignore_ascii_case(name));
    let check_anchor = |name: &str, flags: &mut Vec<ValidationFlag>| {
        if is_abstract(name) && !known(name) {
            flags.push(ValidationFlag::AbstractAnchor {
                entity: name.to_string(),
            });
        } else if !known(name) {
            flags.push(ValidationFlag::NotDetectable {
                entity: name.to_string(),
            });
        }
    };
    match &tc.reference.variant {
        FrameVariant::ObjectBased { object, .. } => check_anchor(object, &mut flags),
        FrameVariant::CameraBased { camera, .. } => {
            if let Some(n) = camera_count {
                if *camera >= n {
                    flags.push(ValidationFlag::CameraOutOfRange {
                        camera: *camera,
                        available: n,
                    });
                }
            }
        }
        FrameVariant::DirectionBased { from, to } => {
            if from.eq_ignore_ascii_case(to) {
                flags.push(ValidationFlag::DegenerateDirection { entity: from.clone() });
            }
            check_anchor(from, &mut flags);
            if !from.eq_ignore_ascii_case(to) {
                check_anchor(to, &mut flags);
            }
        }
    }
    for s in &tc.objective.subjects {
        if !known(s) {
            flags.push(ValidationFlag::UnknownSubject { entity: s.clone() });
        }
    }
    ValidationReport { flags }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tc(reference: FrameSpec) -> TaskConstraint {
        TaskConstraint {
            reference,
            objective: ObjectiveSpec {
                kind: ObjectiveKind::RelativeDirection,
                subjects: vec![],
                statement: "s".into(),
            },
            reasoning: String::new(),
        }
    }

    #[test]
    fn exemplars_parse_to_their_variants() {
        assert_eq!(
            parse_frame_spec("+Z_ref = -Z_toaster").unwrap(),
            FrameSpec::object("toaster", Sign::Minus, Axis::Z)
        );
        assert_eq!(
            parse_frame_spec("+Z_ref = +Z_cam0").unwrap(),
            FrameSpec::camera(0, Sign::Plus, Axis::Z)
        );
        assert_eq!(
            parse_frame_spec("+Z_ref = Centroid(owen) - Centroid(sink) = North").unwrap(),
            FrameSpec::direction("sink", "owen").with_cardinal(Cardinal::North)
        );
    }

    #[test]
    fn decorated_forms() {
        assert_eq!(
            parse_frame_spec(r"$+Z_\text{ref} = -Z_\text{toaster}$").unwrap(),
            FrameSpec::object("toaster", Sign::Minus, Axis::Z)
        );
        let s = r"$+Z_\text{ref} = \vec{{BA}} = \text{Centroid(A)} - \text{Centroid(B)} = \text{North}$";
        assert_eq!(
            parse_frame_spec(s).unwrap(),
            FrameSpec::direction("B", "A").with_cardinal(Cardinal::North)
        );
        let s = r"+{\mathbf{z}}_{\mathcal{R}}";
        assert!(parse_frame_spec(s).is_err());
        let s = r"+Z_ref = normalize\left(\text{Centroid(owen)}-\text{Centroid(sink)}\right)=\text{north}";
        assert_eq!(
            parse_frame_spec(s).unwrap(),
            FrameSpec::direction("sink", "owen").with_cardinal(Cardinal::North)
        );
        assert_eq!(
            parse_frame_spec(r"$+Z_\text{ref} = -Z_\text{cam[2]} = \text{South}$").unwrap(),
            FrameSpec::camera(2, Sign::Minus, Axis::Z).with_cardinal(Cardinal::South)
        );
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_frame_spec("+Z_ref = -W_toaster").unwrap_err();
        assert_eq!(e.position, 10);
        let e = parse_frame_spec("+X_ref = -Z_toaster").unwrap_err();
        assert_eq!(e.position, 0);
        let e = parse_frame_spec("+Z_ref = Centroid(a) + Centroid(b)").unwrap_err();
        assert!(e.message.contains('-'), "{e}");
        assert!(parse_frame_spec("").is_err());
        assert!(parse_frame_spec("+Z_ref").is_err());
        assert!(parse_frame_spec("+Z_ref = North").is_err());
        assert!(parse_frame_spec("+Z_ref = -Z_a = +Z_cam1").is_err());
    }

    #[test]
    fn render_forms() {
        assert_eq!(
            FrameSpec::object("toaster", Sign::Minus, Axis::Z).render(),
            "+Z_ref = -Z_toaster"
        );
        assert_eq!(FrameSpec::camera(2, Sign::Plus, Axis::Z).render(), "+Z_ref = +Z_cam2");
    }

    #[test]
    fn objective_subjects_and_kind() {
        let ents: Vec<String> = ["sink", "chair", "toaster"].iter().map(|s| s.to_string()).collect();
        let o = ObjectiveSpec::from_statement(
            "The number of unique chairs visible next to the sink.",
            &ents,
        )
        .unwrap();
        assert_eq!(o.kind, ObjectiveKind::Count);
        assert_eq!(o.subjects, vec!["chair", "sink"]);
        assert!(ObjectiveSpec::from_statement("  ", &ents).is_err());
        assert_eq!(ObjectiveKind::infer("The colour of the mug."), ObjectiveKind::Custom);
    }

    #[test]
    fn doc_parsing() {
        let raw = "Sure.\n```json\n{\"reasoning\": \"r\", \"formalization\": \"+Z_ref = +Z_cam0\"}\n```\nDone.";
        let d = parse_formalization_doc(raw).unwrap();
        assert_eq!(d.formalization, "+Z_ref = +Z_cam0");
        assert_eq!(
            parse_formalization_doc("```json\n{\"reasoning\": \"r\"}\n```"),
            Err(DocError::MissingKey("formalization"))
        );
        assert_eq!(parse_formalization_doc("no json here"), Err(DocError::NoJson));
    }

    #[test]
    fn validation_flags() {
        let ents = vec!["toaster".to_string(), "sink".to_string()];
        let ok = tc(FrameSpec::object("toaster", Sign::Minus, Axis::Z));
        assert!(validate_task_constraint(&ok, &ents, Some(1)).is_valid());
        let r = validate_task_constraint(&tc(FrameSpec::object("kitchen", Sign::Plus, Axis::Z)), &ents, None);
        assert_eq!(r.flags, vec![ValidationFlag::AbstractAnchor { entity: "kitchen".into() }]);
        let r = validate_task_constraint(&tc(FrameSpec::direction("sink", "sink")), &ents, None);
        assert_eq!(r.flags, vec![ValidationFlag::DegenerateDirection { entity: "sink".into() }]);
        let r = validate_task_constraint(&tc(FrameSpec::camera(3, Sign::Plus, Axis::Z)), &ents, Some(2));
        assert!(!r.is_valid());
        let r = validate_task_constraint(&ok, &[], None);
        assert!(r.flags.contains(&ValidationFlag::NoEntities));
    }
}

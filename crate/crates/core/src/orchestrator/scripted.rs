//! Deterministic planner: query templates for formalization and a policy
//! table of tool recipes keyed by objective kind and frame variant.

use std::sync::LazyLock;

use regex::Regex;
use serde_json::{json, Value};

use crate::constraint::{FrameVariant, ObjectiveKind, Sign, SignedAxis, TaskConstraint};
use crate::geometry::{CardinalLabel, DEFAULT_DEDUP_TAU};
use crate::toolbox::ToolRequest;

use super::engine::EXPR_PREFIX;
use super::planner::{CodeRequest, FormalizeDocs, PlanState, PlanStep, Planner, PlannerError};
use super::select::{detections_from_value, resolve_ambiguity, Selector};
use super::{AnswerFormat, QueryContext};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Centroids closer than this count as one instance.
    pub dedup_tau: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            dedup_tau: DEFAULT_DEDUP_TAU,
        }
    }
}

/// Query shapes the scripted planner understands.
#[derive(Debug, Clone, PartialEq)]
pub enum QueryTemplate {
    UsingObject { anchor: String, target: String },
    CardinalFrom { a: String, cardinal: String, b: String, target: String, origin: String },
    CameraRotation { from: usize, to: usize },
    SceneMotion { from: usize, to: usize },
    Count { class: String },
    Distance { a: String, b: String },
    Perspective { camera: usize, target: String },
    /// Yes/no question about one relation in the anchor's own frame;
    /// `facing` names the compass direction of the anchor's front.
    IsRelation { subject: String, relation: String, anchor: String, facing: Option<String> },
}

fn re(s: &str) -> Regex {
    Regex::new(s).expect("template regex compiles")
}

static USING: LazyLock<Regex> =
    LazyLock::new(|| re(r"^imagine you are using the ([a-z_ ]+?)\. where is the ([a-z_ ]+?) relative to you\?$"));
static CARDINAL: LazyLock<Regex> = LazyLock::new(|| {
    re(r"^the ([a-z_ ]+?) is (north|south|east|west) of the ([a-z_ ]+?)\. in which direction is the ([a-z_ ]+?) from the ([a-z_ ]+?)\?$")
});
static ROTATION: LazyLock<Regex> =
    LazyLock::new(|| re(r"^how did the camera rotate from the (\w+) image to the (\w+) image\?$"));
static MOTION: LazyLock<Regex> = LazyLock::new(|| {
    re(r"^from the (\w+) image to the (\w+) image, which way does the scene appear to move in the view\?$")
});
static COUNT: LazyLock<Regex> = LazyLock::new(|| re(r"^how many ([a-z_]+) are there across all the images\?$"));
static DISTANCE: LazyLock<Regex> =
    LazyLock::new(|| re(r"^what is the distance between the ([a-z_ ]+?) and the ([a-z_ ]+?) in meters\?$"));
static PERSPECTIVE: LazyLock<Regex> =
    LazyLock::new(|| re(r"^from the perspective of the (\w+) image, where is the ([a-z_ ]+?)\?$"));

static IS_RELATION: LazyLock<Regex> = LazyLock::new(|| {
    re(r"^(?:the ([a-z_ ]+?) faces (north|south|east|west)\. )?is the ([a-z_ ]+?) (?:(?:to the )?(left|right|north|south|east|west) of|(in front of|behind)) the ([a-z_ ]+?)\?$")
});

const CARDINAL_WORDS: [&str; 4] = ["north", "south", "east", "west"];

fn capitalized(word: &str) -> String {
    let mut c = word.to_string();
    c[..1].make_ascii_uppercase();
    c
}

fn ordinal(word: &str) -> Option<usize> {
    const WORDS: [&str; 6] = ["first", "second", "third", "fourth", "fifth", "sixth"];
    WORDS.iter().position(|w| *w == word)
}

/// Last word of a noun phrase; "leftmost chair" names a chair.
fn head_noun(phrase: &str) -> String {
    phrase.split_whitespace().last().unwrap_or_default().to_string()
}

impl QueryTemplate {
    pub fn parse(query: &str) -> Option<QueryTemplate> {
        let q = query.trim().to_lowercase();
        let q = q.split_whitespace().collect::<Vec<_>>().join(" ");
        if let Some(c) = USING.captures(&q) {
            return Some(QueryTemplate::UsingObject {
                anchor: head_noun(&c[1]),
                target: head_noun(&c[2]),
            });
        }
        if let Some(c) = CARDINAL.captures(&q) {
            return Some(QueryTemplate::CardinalFrom {
                a: head_noun(&c[1]),
                cardinal: c[2].to_string(),
                b: head_noun(&c[3]),
                target: head_noun(&c[4]),
                origin: head_noun(&c[5]),
            });
        }
        if let Some(c) = ROTATION.captures(&q) {
            return Some(QueryTemplate::CameraRotation {
                from: ordinal(&c[1])?,
                to: ordinal(&c[2])?,
            });
        }
        if let Some(c) = MOTION.captures(&q) {
            return Some(QueryTemplate::SceneMotion {
                from: ordinal(&c[1])?,
                to: ordinal(&c[2])?,
            });
        }
        if let Some(c) = COUNT.captures(&q) {
            return Some(QueryTemplate::Count { class: c[1].to_string() });
        }
        if let Some(c) = DISTANCE.captures(&q) {
            return Some(QueryTemplate::Distance {
                a: head_noun(&c[1]),
                b: head_noun(&c[2]),
            });
        }
        if let Some(c) = PERSPECTIVE.captures(&q) {
            return Some(QueryTemplate::Perspective {
                camera: ordinal(&c[1])?,
                target: head_noun(&c[2]),
            });
        }
        if let Some(c) = IS_RELATION.captures(&q) {
            let anchor = head_noun(&c[6]);
            let facing = match (c.get(1), c.get(2)) {
                (Some(a), Some(f)) if head_noun(a.as_str()) == anchor => Some(f.as_str().to_string()),
                (Some(_), _) => return None,
                _ => None,
            };
            let relation = match (c.get(4), c.get(5)) {
                (Some(r), _) => r.as_str().to_string(),
                (None, Some(r)) if r.as_str() == "behind" => "behind".into(),
                _ => "front".into(),
            };
            return Some(QueryTemplate::IsRelation {
                subject: head_noun(&c[3]),
                relation,
                anchor,
                facing,
            });
        }
        None
    }

    /// `(reasoning, formalization)` for the reference frame and the objective.
    fn docs(&self) -> ((String, String), (String, String)) {
        use QueryTemplate as Q;
        match self {
            Q::UsingObject { anchor, target } => (
                (
                    format!("The viewer uses the {anchor}, so they face it and their forward is opposite its front."),
                    format!("+Z_ref = -Z_{anchor}"),
                ),
                (
                    format!("The answer is where the {target} lies for a person using the {anchor}."),
                    format!("The relative position of the {target} in the frame of a person using the {anchor}."),
                ),
            ),
            Q::IsRelation {
                subject,
                relation,
                anchor,
                facing,
            } if CARDINAL_WORDS.contains(&relation.as_str()) => {
                let (why, frame) = match facing {
                    Some(f) => (
                        format!("The {anchor} defines the frame and its front faces {f}."),
                        format!("+Z_ref = +Z_{anchor} = {}", capitalized(f)),
                    ),
                    None => (
                        format!("The {anchor} defines the frame; no compass direction is given for it."),
                        format!("+Z_ref = +Z_{anchor}"),
                    ),
                };
                (
                    (why, frame),
                    (
                        format!("The answer is whether the {subject} lies {relation} of the {anchor}."),
                        format!("Whether the {subject} lies {relation} of the {anchor}."),
                    ),
                )
            }
            Q::IsRelation {
                subject,
                relation,
                anchor,
                ..
            } => {
                let phrase = match relation.as_str() {
                    "front" => "in front of".to_string(),
                    "behind" => "behind".to_string(),
                    side => format!("to the {side} of"),
                };
                (
                    (
                        format!("The {anchor} defines the frame; directions are read from its own front."),
                        format!("+Z_ref = +Z_{anchor}"),
                    ),
                    (
                        format!("The answer is whether the {subject} lies {phrase} the {anchor}."),
                        format!("Whether the {subject} lies {phrase} the {anchor}, in the frame of the {anchor}."),
                    ),
                )
            }
            Q::CardinalFrom {
                a,
                cardinal,
                b,
                target,
                origin,
            } => {
                let c = capitalized(cardinal);
                (
                    (
                        format!("North is fixed by the stated relation: the {b} to {a} direction is {cardinal}."),
                        format!("+Z_ref = Centroid({a}) - Centroid({b}) = {c}"),
                    ),
                    (
                        format!("The answer is a compass direction from the {origin} to the {target}."),
                        format!("The cardinal direction of the {target} as seen from the {origin}."),
                    ),
                )
            }
            Q::CameraRotation { from, to } => (
                (
                    format!("Camera motion is described from the viewpoint of image {}.", from + 1),
                    format!("+Z_ref = +Z_cam{from}"),
                ),
                (
                    "The answer is the dominant rotation between the two views.".into(),
                    format!(
                        "The rotation of the camera from image {} to image {}, in the axes of camera {from}.",
                        from + 1,
                        to + 1
                    ),
                ),
            ),
            Q::SceneMotion { from, to } => (
                (
                    format!("Image directions are read in the view of image {}.", from + 1),
                    format!("+Z_ref = +Z_cam{from}"),
                ),
                (
                    "The answer is the dominant apparent motion of the scene between the views.".into(),
                    format!(
                        "The dominant image-space motion of the scene content from image {} to image {}.",
                        from + 1,
                        to + 1
                    ),
                ),
            ),
            Q::Count { class } => (
                (
                    "Counting does not depend on direction; the first camera serves as the frame.".into(),
                    "+Z_ref = +Z_cam0".into(),
                ),
                (
                    "Instances seen in several images must be counted once.".into(),
                    format!("The number of distinct {class} across all images."),
                ),
            ),
            Q::Distance { a, b } => (
                (
                    "A distance does not depend on direction; the first camera serves as the frame.".into(),
                    "+Z_ref = +Z_cam0".into(),
                ),
                (
                    "The answer is a metric length between two objects.".into(),
                    format!("The metric distance in meters between the {a} and the {b}."),
                ),
            ),
            Q::Perspective { camera, target } => (
                (
                    format!("The question is asked from the viewpoint of image {}.", camera + 1),
                    format!("+Z_ref = +Z_cam{camera}"),
                ),
                (
                    format!("The answer is where the {target} lies for that camera."),
                    format!("The relative position of the {target} in the frame of camera {camera}."),
                ),
            ),
        }
    }
}

fn fenced(reasoning: &str, formalization: &str) -> String {
    let body = json!({ "reasoning": reasoning, "formalization": formalization });
    format!("```json\n{}\n```", serde_json::to_string_pretty(&body).expect("json"))
}

/// Variable-name form of an entity.
fn ident(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    if s.starts_with(|c: char| c.is_ascii_digit()) {
        format!("v_{s}")
    } else {
        s
    }
}

fn expr(e: &str) -> Value {
    Value::String(format!("{EXPR_PREFIX}{e}"))
}

fn call(api: &str, args: Value, out: &str) -> ToolRequest {
    ToolRequest {
        api: api.into(),
        args,
        output_variable: out.into(),
    }
}

fn step(analysis: &str, calls: Vec<ToolRequest>) -> Result<PlanStep, PlannerError> {
    Ok(PlanStep {
        analysis: analysis.into(),
        tool_calls: calls,
    })
}

/// Geocalc condition for each multiple-choice option, in letter order.
type Conditions = Vec<String>;

fn relation_conditions(options: &[String]) -> Result<Conditions, PlannerError> {
    options
        .iter()
        .map(|o| {
            let o = o.to_lowercase();
            let depth = if o.contains("front") {
                "front"
            } else if o.contains("back") || o.contains("behind") {
                "behind"
            } else {
                return Err(PlannerError::Malformed(format!("option `{o}` names no depth side")));
            };
            let side = if o.contains("left") {
                "left"
            } else if o.contains("right") {
                "right"
            } else {
                return Err(PlannerError::Malformed(format!("option `{o}` names no lateral side")));
            };
            Ok(format!("rel.depth == \"{depth}\" and rel.horizontal == \"{side}\""))
        })
        .collect()
}

fn label_conditions(options: &[String], var: &str, read: impl Fn(&str) -> Option<String>) -> Result<Conditions, PlannerError> {
    options
        .iter()
        .map(|o| {
            read(&o.to_lowercase())
                .map(|l| format!("{var} == \"{l}\""))
                .ok_or_else(|| PlannerError::Malformed(format!("cannot read option `{o}`")))
        })
        .collect()
}

fn is_yes_no(options: &[String]) -> bool {
    !options.is_empty()
        && options
            .iter()
            .all(|o| matches!(o.trim().to_lowercase().as_str(), "yes" | "no"))
}

fn yes_no_conditions(options: &[String], cond: &str) -> Conditions {
    options
        .iter()
        .map(|o| {
            if o.trim().eq_ignore_ascii_case("yes") {
                cond.to_string()
            } else {
                format!("not ({cond})")
            }
        })
        .collect()
}

/// The relation asked about by a yes/no template query.
fn asked_relation(ctx: &QueryContext) -> Option<String> {
    match QueryTemplate::parse(&ctx.query) {
        Some(QueryTemplate::IsRelation { relation, .. }) => Some(relation),
        _ => None,
    }
}

/// Labels that place a displacement on the `dir` side.
fn cardinal_side_condition(var: &str, dir: &str) -> Option<String> {
    let letter = match dir {
        "north" => "N",
        "south" => "S",
        "east" => "E",
        "west" => "W",
        _ => return None,
    };
    let labels: Vec<&str> = CardinalLabel::ALL
        .iter()
        .map(|l| l.as_str())
        .filter(|l| *l != CardinalLabel::Indeterminate.as_str() && l.contains(letter))
        .collect();
    Some(labels.iter().map(|l| format!("{var} == \"{l}\"")).collect::<Vec<_>>().join(" or "))
}

fn leading_number(o: &str) -> Option<f64> {
    let s: String = o
        .trim()
        .chars()
        .take_while(|c| c.is_ascii_digit() || *c == '.' || *c == '-')
        .collect();
    s.parse().ok()
}

fn mcq_return(conditions: &[String]) -> String {
    let fields: Vec<String> = conditions
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{}: {c}", super::answer::OPTION_LETTERS[i]))
        .collect();
    format!("return {{{}}}", fields.join(", "))
}

fn axis_expr(pose: &str, axis: &SignedAxis) -> String {
    let sign = if axis.sign == Sign::Minus { "-" } else { "" };
    format!("{sign}axis({pose}, \"{}\")", axis.axis.to_string().to_lowercase())
}

pub struct ScriptedPlanner {
    tol: Tolerances,
    /// Program prepared when the code step is planned.
    pending_program: Option<String>,
}

impl Default for ScriptedPlanner {
    fn default() -> Self {
        Self::new(Tolerances::default())
    }
}

impl ScriptedPlanner {
    pub fn new(tol: Tolerances) -> Self {
        ScriptedPlanner {
            tol,
            pending_program: None,
        }
    }

    fn options(ctx: &QueryContext) -> Option<&[String]> {
        match &ctx.format {
            AnswerFormat::Mcq(o) => Some(o),
            AnswerFormat::Free => None,
        }
    }

    /// Selector from the adjective in front of `entity` in the query.
    fn selector_for(ctx: &QueryContext, entity: &str) -> Selector {
        let q = ctx.query.to_lowercase();
        let words: Vec<&str> = q.split(|c: char| !c.is_alphanumeric() && c != '_').filter(|w| !w.is_empty()).collect();
        words
            .windows(2)
            .find(|w| w[1] == entity)
            .and_then(|w| Selector::from_word(w[0]))
            .unwrap_or(Selector::Largest)
    }

    fn pick(&self, st: &PlanState<'_>, var: &str, entity: &str) -> Result<usize, PlannerError> {
        let v = st.workspace.value(var).ok_or_else(|| PlannerError::Malformed(format!("`{var}` missing")))?;
        let dets = detections_from_value(v).map_err(|e| PlannerError::Unusable {
            variable: var.into(),
            reason: e.to_string(),
        })?;
        resolve_ambiguity(&dets, &Self::selector_for(st.ctx, entity)).map_err(|e| PlannerError::Unusable {
            variable: var.into(),
            reason: format!("{e} for `{entity}`"),
        })
    }

    fn all_cameras(ctx: &QueryContext) -> Vec<usize> {
        (0..ctx.camera_count().max(1)).collect()
    }

    fn reconstruct(cameras: &[usize]) -> ToolRequest {
        call("reconstruct", json!({ "cameras": cameras }), "recon")
    }

    fn detect(camera: usize, entity: &str, out: &str) -> ToolRequest {
        call("detect", json!({ "camera": camera, "prompt": entity }), out)
    }

    fn boxed(api: &str, camera: usize, dets: &str, index: usize, out: &str) -> ToolRequest {
        call(
            api,
            json!({ "recon": expr("recon"), "camera": camera, "box": expr(&format!("{dets}[{index}].box")) }),
            out,
        )
    }

    fn code(&mut self, request: &str, vars: &[&str], program: String) -> Result<PlanStep, PlannerError> {
        self.pending_program = Some(program);
        step(
            "All inputs are bound; compute the objective in the reference frame.",
            vec![call("code", json!({ "request": request, "variables": vars }), "result")],
        )
    }

    fn finalize() -> Result<PlanStep, PlannerError> {
        Ok(PlanStep::finalize("The result answers the question.", expr("result")))
    }

    /// Detection step for `entities` in camera 0, then one lifting call per
    /// entity built by `lift`.
    fn detect_then<'e>(
        &self,
        st: &PlanState<'_>,
        entities: &[&'e str],
        lift: impl Fn(&'e str, &str, usize) -> ToolRequest,
    ) -> Result<Option<PlanStep>, PlannerError> {
        let mut uniq: Vec<&str> = Vec::new();
        for e in entities {
            if !uniq.contains(e) {
                uniq.push(e);
            }
        }
        let missing: Vec<&str> = uniq
            .iter()
            .copied()
            .filter(|e| !st.workspace.contains(&format!("{}_dets", ident(e))))
            .collect();
        if !missing.is_empty() {
            let calls = missing.iter().map(|e| Self::detect(0, e, &format!("{}_dets", ident(e)))).collect();
            return step("Locate the objects the frame and objective refer to.", calls).map(Some);
        }
        let mut calls = Vec::new();
        for e in uniq {
            let dets = format!("{}_dets", ident(e));
            let req = lift(e, &dets, 0);
            if st.workspace.contains(&req.output_variable) {
                continue;
            }
            let i = self.pick(st, &dets, e)?;
            calls.push(lift(e, &dets, i));
        }
        if calls.is_empty() {
            Ok(None)
        } else {
            step("Lift the selected detections into the reconstruction.", calls).map(Some)
        }
    }

    fn plan(&mut self, st: &PlanState<'_>) -> Result<PlanStep, PlannerError> {
        if let Some(last) = st.history.last() {
            if let Some(bad) = last.calls.iter().find(|c| c.status == crate::toolbox::ToolStatus::Error) {
                return Err(PlannerError::Abandon(format!("{}: {}", bad.request.api, bad.message)));
            }
        }
        let ws = st.workspace;
        if ws.contains("result") {
            return Self::finalize();
        }
        let tc = st.constraint;
        let options = Self::options(st.ctx).map(<[String]>::to_vec);
        let subjects = &tc.objective.subjects;
        let cams = Self::all_cameras(st.ctx);

        match (tc.objective.kind, &tc.reference.variant) {
            (ObjectiveKind::RelativeDirection, FrameVariant::ObjectBased { object, axis }) => {
                let target = subjects
                    .iter()
                    .find(|s| !s.eq_ignore_ascii_case(object))
                    .ok_or_else(|| PlannerError::Malformed("objective names no target".into()))?
                    .clone();
                if !ws.contains("recon") {
                    return step("Reconstruct every view into one world frame.", vec![Self::reconstruct(&cams)]);
                }
                let (pose, pts) = (format!("{}_pose", ident(object)), format!("{}_points", ident(&target)));
                let anchor = object.clone();
                if let Some(s) = self.detect_then(st, &[&anchor, &target], |e, d, i| {
                    if *e == *anchor {
                        Self::boxed("predict_obj_pose", 0, d, i, &pose)
                    } else {
                        Self::boxed("project_box_to_3d_points", 0, d, i, &pts)
                    }
                })? {
                    return Ok(s);
                }
                let body = format!(
                    "f = frame({pose}.translation, {}, recon.gravity_down)\nrel = relation(f, centroid({pts}))\n",
                    axis_expr(&pose, axis)
                );
                let ret = match &options {
                    Some(o) if is_yes_no(o) => {
                        let cond = match asked_relation(st.ctx).as_deref() {
                            Some(side @ ("left" | "right")) => format!("rel.horizontal == \"{side}\""),
                            Some(depth @ ("front" | "behind")) => format!("rel.depth == \"{depth}\""),
                            _ => return Err(PlannerError::Malformed("yes/no options without a relation".into())),
                        };
                        mcq_return(&yes_no_conditions(o, &cond))
                    }
                    Some(o) => mcq_return(&relation_conditions(o)?),
                    None => "return rel".into(),
                };
                self.code(&tc.objective.statement, &["recon", &pose, &pts], body + &ret)
            }
            (ObjectiveKind::CardinalDirection, FrameVariant::ObjectBased { object, axis }) => {
                let known = tc
                    .reference
                    .cardinal
                    .ok_or_else(|| PlannerError::Malformed("object frame has no cardinal binding".into()))?;
                let target = subjects
                    .iter()
                    .find(|s| !s.eq_ignore_ascii_case(object))
                    .ok_or_else(|| PlannerError::Malformed("objective names no target".into()))?
                    .clone();
                if !ws.contains("recon") {
                    return step("Reconstruct every view into one world frame.", vec![Self::reconstruct(&cams)]);
                }
                let (pose, pts) = (format!("{}_pose", ident(object)), format!("{}_points", ident(&target)));
                let anchor = object.clone();
                if let Some(s) = self.detect_then(st, &[&anchor, &target], |e, d, i| {
                    if *e == *anchor {
                        Self::boxed("predict_obj_pose", 0, d, i, &pose)
                    } else {
                        Self::boxed("project_box_to_3d_points", 0, d, i, &pts)
                    }
                })? {
                    return Ok(s);
                }
                let body = format!(
                    "m = cardinal_axes(\"{}\", {}, recon.gravity_down)\nlabel = classify_cardinal(centroid({pts}) - {pose}.translation, m, 0)\n",
                    known.letter(),
                    axis_expr(&pose, axis)
                );
                let ret = match &options {
                    Some(o) if is_yes_no(o) => {
                        let cond = asked_relation(st.ctx)
                            .and_then(|d| cardinal_side_condition("label", &d))
                            .ok_or_else(|| PlannerError::Malformed("yes/no options without a compass direction".into()))?;
                        mcq_return(&yes_no_conditions(o, &cond))
                    }
                    Some(o) => mcq_return(&label_conditions(o, "label", |s| {
                        CardinalLabel::from_long_name(s).map(|l| l.as_str().to_string())
                    })?),
                    None => "return label".into(),
                };
                self.code(&tc.objective.statement, &["recon", &pose, &pts], body + &ret)
            }
            (ObjectiveKind::RelativeDirection, FrameVariant::CameraBased { camera, axis }) => {
                let target = subjects
                    .first()
                    .ok_or_else(|| PlannerError::Malformed("objective names no target".into()))?
                    .clone();
                if !ws.contains("recon") {
                    return step("Reconstruct every view into one world frame.", vec![Self::reconstruct(&cams)]);
                }
                let pts = format!("{}_points", ident(&target));
                if let Some(s) = self.detect_then(st, &[&target], |_, d, i| {
                    Self::boxed("project_box_to_3d_points", 0, d, i, &pts)
                })? {
                    return Ok(s);
                }
                let idx = cams
                    .iter()
                    .position(|c| c == camera)
                    .ok_or_else(|| PlannerError::Malformed(format!("camera {camera} is not available")))?;
                let body = format!(
                    "cam = inv(recon.extrinsics[{idx}])\nf = frame(cam.translation, {}, recon.gravity_down)\nrel = relation(f, centroid({pts}))\n",
                    axis_expr("cam", axis)
                );
                let ret = match &options {
                    Some(o) => mcq_return(&relation_conditions(o)?),
                    None => "return rel".into(),
                };
                self.code(&tc.objective.statement, &["recon", &pts], body + &ret)
            }
            (ObjectiveKind::CardinalDirection, FrameVariant::DirectionBased { from, to }) => {
                let known = tc
                    .reference
                    .cardinal
                    .ok_or_else(|| PlannerError::Malformed("direction frame has no cardinal binding".into()))?;
                let target = subjects
                    .first()
                    .ok_or_else(|| PlannerError::Malformed("objective names no target".into()))?
                    .clone();
                let origin = subjects.get(1).cloned().unwrap_or_else(|| from.clone());
                if !ws.contains("recon") {
                    return step("Reconstruct every view into one world frame.", vec![Self::reconstruct(&cams)]);
                }
                let pts = |e: &str| format!("{}_points", ident(e));
                if let Some(s) = self.detect_then(st, &[from, to, &target, &origin], |e, d, i| {
                    Self::boxed("project_box_to_3d_points", 0, d, i, &pts(e))
                })? {
                    return Ok(s);
                }
                let body = format!(
                    "m = cardinal_axes(\"{}\", centroid({}) - centroid({}), recon.gravity_down)\nlabel = classify_cardinal(centroid({}) - centroid({}), m, 0)\n",
                    known.letter(),
                    pts(to),
                    pts(from),
                    pts(&target),
                    pts(&origin)
                );
                let ret = match &options {
                    Some(o) => mcq_return(&label_conditions(o, "label", |s| {
                        CardinalLabel::from_long_name(s).map(|l| l.as_str().to_string())
                    })?),
                    None => "return label".into(),
                };
                let mut vars = vec!["recon".to_string()];
                for e in [from, to, &target, &origin] {
                    if !vars.contains(&pts(e)) {
                        vars.push(pts(e));
                    }
                }
                let vars: Vec<&str> = vars.iter().map(String::as_str).collect();
                self.code(&tc.objective.statement, &vars, body + &ret)
            }
            (ObjectiveKind::RotationAnalysis, FrameVariant::CameraBased { camera, .. }) => {
                let (from, to) = Self::image_pair(st.ctx, *camera);
                if !ws.contains("recon") {
                    return step("Reconstruct both views to recover their extrinsics.", vec![Self::reconstruct(&[from, to])]);
                }
                let body = "rel = relative_rotation(inv(recon.extrinsics[0]), inv(recon.extrinsics[1]))\nlabel = classify_rotation(rel)\n".to_string();
                let ret = match &options {
                    Some(o) => mcq_return(&label_conditions(o, "label", |s| {
                        let s = s.trim().replace(['-', ' '], "_");
                        crate::geometry::MotionLabel::ALL
                            .iter()
                            .find(|m| m.as_str() == s)
                            .map(|m| m.as_str().to_string())
                    })?),
                    None => "return label".into(),
                };
                self.code(&tc.objective.statement, &["recon"], body + &ret)
            }
            (ObjectiveKind::MotionAnalysis, FrameVariant::CameraBased { camera, .. }) => {
                let (from, to) = Self::image_pair(st.ctx, *camera);
                if !ws.contains("motion") {
                    return step(
                        "Measure image motion between the two views.",
                        vec![call("analyze_motion", json!({ "camera_a": from, "camera_b": to }), "motion")],
                    );
                }
                let ret = match &options {
                    Some(o) => mcq_return(&label_conditions(o, "motion.dominant", |s| {
                        ["left", "right", "up", "down"].into_iter().find(|d| s.trim() == *d).map(str::to_string)
                    })?),
                    None => "return motion.dominant".into(),
                };
                self.code(&tc.objective.statement, &["motion"], ret)
            }
            (ObjectiveKind::Count, _) => {
                let class = subjects
                    .first()
                    .ok_or_else(|| PlannerError::Malformed("objective names nothing to count".into()))?
                    .clone();
                if !ws.contains("recon") {
                    return step("Reconstruct every view into one world frame.", vec![Self::reconstruct(&cams)]);
                }
                let dets = |c: usize| format!("{}_dets_{c}", ident(&class));
                if !ws.contains(&dets(cams[0])) {
                    let calls = cams.iter().map(|&c| Self::detect(c, &class, &dets(c))).collect();
                    return step("Detect every instance in every view.", calls);
                }
                let mut lifted = Vec::new();
                let mut calls = Vec::new();
                for &c in &cams {
                    let v = ws.value(&dets(c)).expect("detections bound");
                    let n = detections_from_value(v)
                        .map_err(|e| PlannerError::Unusable {
                            variable: dets(c),
                            reason: e.to_string(),
                        })?
                        .len();
                    for i in 0..n {
                        let out = format!("{}_pts_{c}_{i}", ident(&class));
                        if !ws.contains(&out) {
                            calls.push(Self::boxed("project_box_to_3d_points", c, &dets(c), i, &out));
                        }
                        lifted.push(out);
                    }
                }
                if lifted.is_empty() {
                    return Err(PlannerError::Unusable {
                        variable: dets(cams[0]),
                        reason: format!("no `{class}` detected in any view"),
                    });
                }
                if !calls.is_empty() {
                    return step("Lift each detection to 3D so duplicates across views can merge.", calls);
                }
                let cents: Vec<String> = lifted.iter().map(|p| format!("centroid({p})")).collect();
                let body = format!("n = count_unique([{}], {})\n", cents.join(", "), self.tol.dedup_tau);
                let ret = match &options {
                    Some(o) => mcq_return(
                        &o.iter()
                            .map(|x| {
                                leading_number(x)
                                    .map(|v| format!("n == {v}"))
                                    .ok_or_else(|| PlannerError::Malformed(format!("cannot read option `{x}`")))
                            })
                            .collect::<Result<Vec<_>, _>>()?,
                    ),
                    None => "return n".into(),
                };
                let vars: Vec<&str> = lifted.iter().map(String::as_str).collect();
                self.code(&tc.objective.statement, &vars, body + &ret)
            }
            (ObjectiveKind::MetricMeasure, _) => {
                let (a, b) = match subjects.as_slice() {
                    [a, b, ..] => (a.clone(), b.clone()),
                    _ => return Err(PlannerError::Malformed("distance needs two objects".into())),
                };
                if !ws.contains("recon") {
                    return step("Reconstruct every view into one world frame.", vec![Self::reconstruct(&cams)]);
                }
                let pts = |e: &str| format!("{}_points", ident(e));
                if let Some(mut s) = self.detect_then(st, &[&a, &b], |e, d, i| {
                    Self::boxed("project_box_to_3d_points", 0, d, i, &pts(e))
                })? {
                    if s.tool_calls.iter().any(|c| c.api == "project_box_to_3d_points") && !ws.contains("scale") {
                        s.tool_calls.push(call(
                            "estimate_scale",
                            json!({ "recon": expr("recon"), "camera": 0 }),
                            "scale",
                        ));
                    }
                    return Ok(s);
                }
                let body = format!("d = distance(centroid({}), centroid({})) * scale\n", pts(&a), pts(&b));
                let ret = match &options {
                    Some(o) => {
                        let errs = o
                            .iter()
                            .map(|x| {
                                leading_number(x)
                                    .map(|v| format!("abs(d - {v})"))
                                    .ok_or_else(|| PlannerError::Malformed(format!("cannot read option `{x}`")))
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        let conds: Vec<String> = (0..o.len()).map(|i| format!("best == {i}")).collect();
                        format!("best = argmin([{}])\n{}", errs.join(", "), mcq_return(&conds))
                    }
                    None => "return d".into(),
                };
                let (pa, pb) = (pts(&a), pts(&b));
                self.code(&tc.objective.statement, &[&pa, &pb, "scale"], body + &ret)
            }
            (kind, variant) => Err(PlannerError::Unsupported(format!("{kind:?} with a {} frame", variant.name()))),
        }
    }

    /// Image pair named in the query, starting at the reference camera.
    fn image_pair(ctx: &QueryContext, reference: usize) -> (usize, usize) {
        match QueryTemplate::parse(&ctx.query) {
            Some(QueryTemplate::CameraRotation { from, to } | QueryTemplate::SceneMotion { from, to }) => (from, to),
            _ => (reference, reference + 1),
        }
    }
}

impl Planner for ScriptedPlanner {
    fn formalize(&mut self, ctx: &QueryContext, _feedback: Option<&str>) -> Result<FormalizeDocs, PlannerError> {
        let t = QueryTemplate::parse(&ctx.query)
            .ok_or_else(|| PlannerError::Unsupported(format!("no template matches `{}`", ctx.query)))?;
        let ((rr, rf), (or, of)) = t.docs();
        Ok(FormalizeDocs {
            reference: fenced(&rr, &rf),
            objective: fenced(&or, &of),
        })
    }

    fn next_step(&mut self, state: &PlanState<'_>) -> Result<PlanStep, PlannerError> {
        self.plan(state)
    }

    fn write_program(&mut self, _req: &CodeRequest) -> Result<String, PlannerError> {
        self.pending_program
            .take()
            .ok_or_else(|| PlannerError::Malformed("no program was prepared for this code call".into()))
    }
}

/// Whether the scripted policy has a recipe for this constraint.
pub fn has_recipe(tc: &TaskConstraint) -> bool {
    matches!(
        (tc.objective.kind, &tc.reference.variant),
        (ObjectiveKind::RelativeDirection, FrameVariant::ObjectBased { .. })
            | (ObjectiveKind::RelativeDirection, FrameVariant::CameraBased { .. })
            | (ObjectiveKind::CardinalDirection, FrameVariant::DirectionBased { .. })
            | (ObjectiveKind::CardinalDirection, FrameVariant::ObjectBased { .. })
            | (ObjectiveKind::RotationAnalysis, FrameVariant::CameraBased { .. })
            | (ObjectiveKind::MotionAnalysis, FrameVariant::CameraBased { .. })
            | (ObjectiveKind::Count, _)
            | (ObjectiveKind::MetricMeasure, _)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_parse() {
        assert_eq!(
            QueryTemplate::parse("Imagine you are using the toaster. Where is the leftmost kettle relative to you?"),
            Some(QueryTemplate::UsingObject {
                anchor: "toaster".into(),
                target: "kettle".into()
            })
        );
        assert_eq!(
            QueryTemplate::parse("How did the camera rotate from the first image to the second image?"),
            Some(QueryTemplate::CameraRotation { from: 0, to: 1 })
        );
        assert_eq!(
            QueryTemplate::parse("How many chairs are there across all the images?"),
            Some(QueryTemplate::Count { class: "chairs".into() })
        );
        assert!(QueryTemplate::parse("What colour is the sky?").is_none());
    }

    #[test]
    fn cardinal_template_docs() {
        let t = QueryTemplate::parse("The oven is north of the sink. In which direction is the fridge from the sink?").unwrap();
        let ((_, frame), (_, objective)) = t.docs();
        assert_eq!(frame, "+Z_ref = Centroid(oven) - Centroid(sink) = North");
        assert_eq!(ObjectiveKind::infer(&objective), ObjectiveKind::CardinalDirection);
    }

    #[test]
    fn option_conditions() {
        let c = relation_conditions(&["front-left".into(), "back-right".into()]).unwrap();
        assert_eq!(c[1], "rel.depth == \"behind\" and rel.horizontal == \"right\"");
        assert!(relation_conditions(&["up".into()]).is_err());
        assert_eq!(leading_number("2.4 m"), Some(2.4));
    }
}

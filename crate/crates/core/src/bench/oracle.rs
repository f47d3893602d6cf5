//! Answers a question from exact scene geometry by evaluating its
//! ground-truth constraint directly with the geometry kernel.

use crate::constraint::{FrameVariant, TaskConstraint};
use crate::geometry::{
    build_reference_frame, classify_cardinal, classify_primary_rotation, derive_cardinal_axes,
    qualitative_relation, relative_rotation, DepthRelation, FrameInputs, HorizontalRelation, ReferenceFrame,
    RigidTransform, Vec3, ANGLE_EPSILON, DEFAULT_CARDINAL_MARGIN,
};
use crate::toolbox::SceneSpec;

use super::{Category, QuestionSpec};

fn center(q: &QuestionSpec, scene: &SceneSpec, class: &str) -> Result<Vec3, String> {
    let id = q
        .entities
        .get(class)
        .ok_or_else(|| format!("no object recorded for `{class}`"))?;
    scene
        .object(id)
        .map(|o| o.center())
        .ok_or_else(|| format!("object `{id}` is not in the scene"))
}

fn camera_pose(scene: &SceneSpec, i: usize) -> Result<RigidTransform, String> {
    scene
        .cameras
        .get(i)
        .map(|c| c.extrinsic.inverse())
        .ok_or_else(|| format!("camera {i} is not in the scene"))
}

fn frame(tc: &TaskConstraint, q: &QuestionSpec, scene: &SceneSpec) -> Result<ReferenceFrame, String> {
    let (pose, axis) = match &tc.reference.variant {
        FrameVariant::ObjectBased { object, axis } => {
            let id = q.entities.get(object).ok_or_else(|| format!("no object recorded for `{object}`"))?;
            let o = scene.object(id).ok_or_else(|| format!("object `{id}` is not in the scene"))?;
            (o.pose.clone(), *axis)
        }
        FrameVariant::CameraBased { camera, axis } => (camera_pose(scene, *camera)?, *axis),
        FrameVariant::DirectionBased { .. } => return Err("direction frames have no pose".into()),
    };
    build_reference_frame(&FrameInputs {
        origin: pose.translation,
        forward: pose.axis(axis.axis) * axis.sign.factor(),
        down: scene.gravity_down,
    })
    .map_err(|e| e.to_string())
}

/// First objective subject other than the frame's own anchor.
fn target<'a>(tc: &'a TaskConstraint) -> Result<&'a str, String> {
    let anchor = match &tc.reference.variant {
        FrameVariant::ObjectBased { object, .. } => Some(object.as_str()),
        _ => None,
    };
    tc.objective
        .subjects
        .iter()
        .map(String::as_str)
        .find(|s| Some(*s) != anchor)
        .ok_or_else(|| "objective names no target".into())
}

fn option_index(q: &QuestionSpec, label: &str) -> Result<usize, String> {
    q.options
        .iter()
        .position(|o| o == label)
        .ok_or_else(|| format!("`{label}` is not among the options {:?}", q.options))
}

/// Index of the option the exact scene supports.
pub fn evaluate_ground_truth(q: &QuestionSpec, scene: &SceneSpec) -> Result<usize, String> {
    let tc = &q.ground_truth;
    match q.category {
        Category::RelativePosition | Category::PerspectiveTaking => {
            let f = frame(tc, q, scene)?;
            let rel = qualitative_relation(&f, &center(q, scene, target(tc)?)?, 0.0);
            let depth = match rel.depth {
                DepthRelation::Front => "front",
                DepthRelation::Behind => "back",
                DepthRelation::Centered => return Err("target sits on the lateral plane".into()),
            };
            let side = match rel.horizontal {
                HorizontalRelation::Right => "right",
                HorizontalRelation::Left => "left",
                HorizontalRelation::Centered => return Err("target sits on the depth plane".into()),
            };
            option_index(q, &format!("{depth}-{side}"))
        }
        Category::CardinalDirection => {
            let FrameVariant::DirectionBased { from, to } = &tc.reference.variant else {
                return Err("cardinal question without a direction frame".into());
            };
            let known = tc.reference.cardinal.ok_or("direction frame has no cardinal")?;
            let map = derive_cardinal_axes(
                known,
                &(center(q, scene, to)? - center(q, scene, from)?),
                &scene.gravity_down,
            )
            .map_err(|e| e.to_string())?;
            let (tgt, origin) = match tc.objective.subjects.as_slice() {
                [t, o, ..] => (t, o),
                _ => return Err("objective needs a target and an origin".into()),
            };
            let disp = center(q, scene, tgt)? - center(q, scene, origin)?;
            option_index(q, classify_cardinal(&disp, &map, DEFAULT_CARDINAL_MARGIN).long_name())
        }
        Category::CameraRotation => {
            let rel = relative_rotation(&camera_pose(scene, 0)?, &camera_pose(scene, 1)?);
            let label = classify_primary_rotation(&rel.to_rotvec(), ANGLE_EPSILON);
            option_index(q, &label.as_str().replace('_', " "))
        }
        Category::ObjectMotion => {
            let (a, b) = (&scene.cameras[0], &scene.cameras[1]);
            let mut flow = [0.0, 0.0];
            for o in &scene.objects {
                let pa = a.intrinsics.project_camera_point(&a.extrinsic.apply_point(&o.center()));
                let pb = b.intrinsics.project_camera_point(&b.extrinsic.apply_point(&o.center()));
                if let (Some(ua), Some(ub)) = (pa.pixel, pb.pixel) {
                    flow[0] += ub[0] - ua[0];
                    flow[1] += ub[1] - ua[1];
                }
            }
            let label = if flow[0].abs() >= flow[1].abs() {
                if flow[0] > 0.0 { "right" } else { "left" }
            } else if flow[1] > 0.0 {
                "down"
            } else {
                "up"
            };
            option_index(q, label)
        }
        Category::MultiViewCount => {
            let class = tc.objective.subjects.first().ok_or("objective names nothing to count")?;
            let n = scene
                .objects
                .iter()
                .filter(|o| &o.class == class)
                .filter(|o| {
                    scene.cameras.iter().any(|c| {
                        o.corners()
                            .iter()
                            .any(|p| c.intrinsics.project_camera_point(&c.extrinsic.apply_point(p)).in_frustum)
                    })
                })
                .count();
            option_index(q, &n.to_string())
        }
        Category::MetricDistance => {
            let (a, b) = match tc.objective.subjects.as_slice() {
                [a, b, ..] => (a, b),
                _ => return Err("distance needs two objects".into()),
            };
            let d = (center(q, scene, a)? - center(q, scene, b)?).norm();
            let values: Vec<f64> = q
                .options
                .iter()
                .map(|o| o.trim_end_matches(" m").parse::<f64>().map_err(|e| format!("option `{o}`: {e}")))
                .collect::<Result<_, _>>()?;
            let best = values
                .iter()
                .enumerate()
                .min_by(|x, y| (x.1 - d).abs().total_cmp(&(y.1 - d).abs()))
                .map(|(i, _)| i)
                .ok_or("no options")?;
            Ok(best)
        }
    }
}

//! Authored model replies for the object-frame case, and the scene they
//! were written against. Recording these through a cassette transport
//! produces `tests/fixtures/cassettes/object_frame.json`.

use std::path::PathBuf;
use std::sync::Arc;

use gca_core::geometry::{Axis, CameraIntrinsics, FrameTag, RigidTransform, Rotation, Vec3};
use gca_core::llm::{ChatExchange, Role};
use gca_core::orchestrator::{AnswerFormat, QueryContext};
use gca_core::toolbox::{SceneCamera, SceneObject, SceneSpec};

pub const QUERY: &str = "Imagine you are using the toaster. Where is the kettle relative to you?";
pub const OPTIONS: [&str; 4] = ["front-left", "front-right", "back-left", "back-right"];
pub const TOASTER_YAW: f64 = 2.5;

pub fn toaster_at() -> Vec3 {
    Vec3::new(0.0, 0.3, 4.0)
}

pub fn kettle_at() -> Vec3 {
    Vec3::new(1.0, 0.3, 4.6)
}

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/cassettes/object_frame.json")
}

fn object(id: &str, at: Vec3, yaw: f64) -> SceneObject {
    SceneObject {
        id: id.into(),
        class: id.into(),
        pose: RigidTransform::new(Rotation::about_axis(Axis::Y, yaw), at)
            .between(FrameTag::Object(id.into()), FrameTag::World),
        extents: Vec3::new(0.15, 0.12, 0.1),
        text_label: None,
    }
}

pub fn scene() -> Arc<SceneSpec> {
    let intrinsics = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
    let cameras = [Vec3::zeros(), Vec3::new(0.4, 0.0, 0.0)]
        .iter()
        .enumerate()
        .map(|(i, c)| SceneCamera {
            intrinsics,
            extrinsic: RigidTransform::from_translation(-c).between(FrameTag::World, FrameTag::Camera(i)),
            session: 0,
        })
        .collect();
    Arc::new(SceneSpec {
        objects: vec![object("toaster", toaster_at(), TOASTER_YAW), object("kettle", kettle_at(), 0.0)],
        cameras,
        gravity_down: Vec3::new(0.0, 1.0, 0.0),
        scene_scale: 4.0,
        reconstruction_scale: 1.0,
        static_objects: None,
        occlusion: false,
    })
}

pub fn context() -> QueryContext {
    QueryContext::with_scene(QUERY, scene(), AnswerFormat::Mcq(OPTIONS.iter().map(|s| s.to_string()).collect())).unwrap()
}

/// Option text a person using the toaster would give, from exact geometry.
pub fn expected_option() -> &'static str {
    let front = Rotation::about_axis(Axis::Y, TOASTER_YAW).matrix() * Vec3::z();
    let forward = -front;
    let right = Vec3::new(0.0, 1.0, 0.0).cross(&forward);
    let d = kettle_at() - toaster_at();
    match (d.dot(&forward) > 0.0, d.dot(&right) > 0.0) {
        (true, false) => OPTIONS[0],
        (true, true) => OPTIONS[1],
        (false, false) => OPTIONS[2],
        (false, true) => OPTIONS[3],
    }
}

fn fenced(tag: &str, body: &str) -> String {
    format!("```{tag}\n{body}\n```")
}

fn step(analysis: &str, calls: serde_json::Value) -> String {
    let body = serde_json::json!({ "analysis": analysis, "tool_calls": calls });
    fenced("json", &serde_json::to_string_pretty(&body).unwrap())
}

fn bound(prompt: &str, name: &str) -> bool {
    prompt.lines().any(|l| l.starts_with(&format!("- {name} (")))
}

const PROGRAM: &str = "f = frame(toaster_pose.translation, -axis(toaster_pose, \"z\"), recon.gravity_down)
rel = relation(f, centroid(kettle_points))
return {A: rel.depth == \"front\" and rel.horizontal == \"left\", B: rel.depth == \"front\" and rel.horizontal == \"right\", C: rel.depth == \"behind\" and rel.horizontal == \"left\", D: rel.depth == \"behind\" and rel.horizontal == \"right\"}";

/// What a capable model might answer to each prompt of the case.
pub fn authored_reply(ex: &ChatExchange) -> String {
    let prompt = ex.messages.last().map(|m| m.text()).unwrap_or_default();
    if prompt.contains("define the final Reference Frame") {
        return fenced(
            "json",
            r#"{"reasoning": "The user operates the toaster and faces it, so their forward is opposite the toaster's front.", "formalization": "$+Z_\\text{ref} = -Z_\\text{toaster}$"}"#,
        );
    }
    if prompt.contains("define the final Objective") {
        return fenced(
            "json",
            r#"{"reasoning": "The answer is where the kettle lies for the person using the toaster.", "formalization": "The relative position of the kettle in the frame of a person using the toaster."}"#,
        );
    }
    if ex.profile.role == Role::Coder {
        return format!("The frame follows the user's forward.\n{}", fenced("program", PROGRAM));
    }
    let expr = |e: &str| format!("$expr {e}");
    if !bound(&prompt, "recon") {
        step(
            "The frame needs the toaster's pose, so reconstruct both views first.",
            serde_json::json!([{ "api": "reconstruct", "args": { "cameras": [0, 1] }, "output_variable": "recon" }]),
        )
    } else if !bound(&prompt, "toaster_dets") {
        step(
            "Locate the toaster and the kettle in the first image.",
            serde_json::json!([
                { "api": "detect", "args": { "camera": 0, "prompt": "toaster" }, "output_variable": "toaster_dets" },
                { "api": "detect", "args": { "camera": 0, "prompt": "kettle" }, "output_variable": "kettle_dets" }
            ]),
        )
    } else if !bound(&prompt, "toaster_pose") {
        step(
            "Solve the toaster's local frame and lift the kettle to 3D.",
            serde_json::json!([
                { "api": "predict_obj_pose", "args": { "recon": expr("recon"), "camera": 0, "box": expr("toaster_dets[0].box") }, "output_variable": "toaster_pose" },
                { "api": "project_box_to_3d_points", "args": { "recon": expr("recon"), "camera": 0, "box": expr("kettle_dets[0].box") }, "output_variable": "kettle_points" }
            ]),
        )
    } else if !bound(&prompt, "result") {
        step(
            "Compute the kettle's position in the user's frame.",
            serde_json::json!([{ "api": "code", "args": { "request": "Pick the option matching the kettle's position.", "variables": ["recon", "toaster_pose", "kettle_points"] }, "output_variable": "result" }]),
        )
    } else {
        step(
            "The option record is ready.",
            serde_json::json!([{ "api": "generate_final_answer", "args": { "answer": expr("result") }, "output_variable": "final_answer" }]),
        )
    }
}

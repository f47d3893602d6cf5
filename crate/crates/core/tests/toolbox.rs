use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::time::Duration;

use gca_core::geocalc::GeoValue;
use gca_core::geometry::{
    BBox2D, CameraIntrinsics, FrameTag, RigidTransform, Rotation, Vec3, Axis,
};
use gca_core::toolbox::{
    handle_wire_request, ApiName, NoiseConfig, RemoteBackend, SceneCamera, SceneObject, SceneSpec,
    SyntheticBackend, ToolArgs, ToolBackend, ToolFault,
};

fn intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
}

fn object(id: &str, class: &str, at: Vec3, half: f64, yaw: f64) -> SceneObject {
    SceneObject {
        id: id.into(),
        class: class.into(),
        pose: RigidTransform::new(Rotation::about_axis(Axis::Y, yaw), at)
            .between(FrameTag::Object(id.into()), FrameTag::World),
        extents: Vec3::repeat(half),
        text_label: None,
    }
}

fn camera_at(i: usize, center: Vec3, session: usize) -> SceneCamera {
    // camera looks along +z with no rotation; extrinsic = translate by -center
    SceneCamera {
        intrinsics: intrinsics(),
        extrinsic: RigidTransform::from_translation(-center).between(FrameTag::World, FrameTag::Camera(i)),
        session,
    }
}

fn scene(objects: Vec<SceneObject>, cameras: Vec<SceneCamera>) -> Arc<SceneSpec> {
    let s = SceneSpec {
        objects,
        cameras,
        gravity_down: Vec3::new(0.0, 1.0, 0.0),
        scene_scale: 4.0,
        reconstruction_scale: 1.0,
        static_objects: None,
        occlusion: false,
    };
    s.validate().unwrap();
    Arc::new(s)
}

fn args(pairs: Vec<(&str, GeoValue)>) -> ToolArgs {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn num(x: f64) -> GeoValue {
    GeoValue::Scalar(x)
}

fn list(xs: &[f64]) -> GeoValue {
    GeoValue::List(xs.iter().map(|x| num(*x)).collect())
}

fn three_objects() -> Vec<SceneObject> {
    vec![
        object("chair", "chair", Vec3::new(-0.8, 0.2, 4.0), 0.3, 0.4),
        object("table", "table", Vec3::new(0.9, 0.3, 5.0), 0.4, -0.2),
        object("lamp", "lamp", Vec3::new(0.0, -0.5, 6.0), 0.2, 1.0),
    ]
}

fn recon(b: &dyn ToolBackend, cams: &[f64]) -> GeoValue {
    b.call(ApiName::Reconstruct, &args(vec![("cameras", list(cams))])).unwrap().value
}

fn boxes(b: &dyn ToolBackend, camera: usize, prompt: &str) -> Vec<BBox2D> {
    let v = b
        .call(
            ApiName::Detect,
            &args(vec![("camera", num(camera as f64)), ("prompt", GeoValue::text(prompt))]),
        )
        .unwrap()
        .value;
    v.as_list()
        .unwrap()
        .iter()
        .map(|d| gca_core::toolbox::bbox_from_value("box", d).unwrap())
        .collect()
}

#[test]
fn reconstruction_reprojects_into_its_cells() {
    let s = scene(three_objects(), vec![camera_at(0, Vec3::zeros(), 0)]);
    let b = SyntheticBackend::new(s.clone(), NoiseConfig::default(), None);
    let r = recon(&b, &[0.0]);
    let ext = match &r.get("extrinsics").unwrap().as_list().unwrap()[0] {
        GeoValue::Transform(t) => t.clone(),
        other => panic!("unexpected {other:?}"),
    };
    assert_eq!(ext.to_matrix4(), nalgebra::Matrix4::identity());
    // all points of the full image, re-projected, land within half a pixel
    // of some valid cell center: check via the per-object boxes instead
    let full = BBox2D::new(0.0, 0.0, 640.0, 480.0).unwrap();
    let cloud = b
        .call(
            ApiName::ProjectBoxTo3dPoints,
            &args(vec![("recon", r.clone()), ("camera", num(0.0)), ("box", list(&full.to_array()))]),
        )
        .unwrap()
        .value;
    let GeoValue::PointCloud(pc) = cloud else { panic!() };
    assert_eq!(pc.len(), 3 * 6 * 32 * 32);
    let k = intrinsics();
    for p in &pc.points {
        let px = k.project_camera_point(&ext.apply_point(p)).pixel.unwrap();
        let (cu, cv) = (px[0].floor() + 0.5, px[1].floor() + 0.5);
        assert!((px[0] - cu).abs() <= 0.5 && (px[1] - cv).abs() <= 0.5);
    }
}

#[test]
fn detected_box_lifts_to_true_centroid() {
    let s = scene(three_objects(), vec![camera_at(0, Vec3::zeros(), 0)]);
    let b = SyntheticBackend::new(s.clone(), NoiseConfig::default(), None);
    let r = recon(&b, &[0.0]);
    for obj in &s.objects {
        let bx = boxes(&b, 0, &obj.class);
        assert_eq!(bx.len(), 1);
        let out = b
            .call(
                ApiName::ProjectBoxTo3dPoints,
                &args(vec![("recon", r.clone()), ("camera", num(0.0)), ("box", list(&bx[0].to_array()))]),
            )
            .unwrap();
        let GeoValue::PointCloud(pc) = out.value else { panic!() };
        let c = gca_core::geometry::centroid(&pc).unwrap();
        assert!((c - obj.center()).norm() < 1e-6, "{} centroid off by {}", obj.id, (c - obj.center()).norm());
    }
    // a patch of empty image selects nothing
    let err = b.call(
        ApiName::ProjectBoxTo3dPoints,
        &args(vec![("recon", r), ("camera", num(0.0)), ("box", list(&[0.0, 0.0, 5.0, 5.0]))]),
    );
    assert!(err.is_err());
}

#[test]
fn detect_contracts() {
    let mut objs = three_objects();
    objs.push(object("cube", "cube", Vec3::new(0.0, 0.0, 3.0), 0.25, 0.0));
    objs.push(object("ghost", "ghost", Vec3::new(0.0, 0.0, -3.0), 0.25, 0.0));
    let s = scene(objs, vec![camera_at(0, Vec3::zeros(), 0)]);
    let b = SyntheticBackend::new(s, NoiseConfig::default(), None);
    let cube = boxes(&b, 0, "cube");
    let [cu, cv] = cube[0].center();
    assert!((cu - 320.0).abs() < 1.0 && (cv - 240.0).abs() < 1.0);
    assert!(boxes(&b, 0, "ghost").is_empty());
    assert!(boxes(&b, 0, "sofa").is_empty());
    assert_eq!(boxes(&b, 0, "chairs").len(), 1);
}

#[test]
fn pose_exact_without_noise_and_bounded_with_noise() {
    let s = scene(three_objects(), vec![camera_at(0, Vec3::zeros(), 0)]);
    let clean = SyntheticBackend::new(s.clone(), NoiseConfig::default(), None);
    let r = recon(&clean, &[0.0]);
    let bx = boxes(&clean, 0, "chair")[0];
    let pose_args = args(vec![("recon", r.clone()), ("camera", num(0.0)), ("box", list(&bx.to_array()))]);
    let out = clean.call(ApiName::PredictObjPose, &pose_args).unwrap();
    assert!(!out.perturbed);
    let GeoValue::Transform(t) = out.value else { panic!() };
    let truth = &s.objects[0].pose;
    assert!(t.rotation.geodesic_distance(&truth.rotation) < 1e-12);
    assert!((t.translation - truth.translation).norm() < 1e-9);

    let sigma = 2f64.to_radians();
    let mut within = 0;
    for seed in 0..1000 {
        let noise = NoiseConfig {
            pose_rotation_sigma: sigma,
            seed,
            ..Default::default()
        };
        let b = SyntheticBackend::new(s.clone(), noise, None);
        let r = recon(&b, &[0.0]);
        let a = args(vec![("recon", r), ("camera", num(0.0)), ("box", list(&bx.to_array()))]);
        let GeoValue::Transform(t) = b.call(ApiName::PredictObjPose, &a).unwrap().value else { panic!() };
        if t.rotation.geodesic_distance(&truth.rotation) <= 6f64.to_radians() {
            within += 1;
        }
    }
    assert!(within >= 990, "{within}/1000 within 6 degrees");

    let empty = args(vec![("recon", r), ("camera", num(0.0)), ("box", list(&[0.0, 0.0, 4.0, 4.0]))]);
    assert!(clean.call(ApiName::PredictObjPose, &empty).is_err());
}

#[test]
fn corrupt_pose_flips_about_object_y() {
    let s = scene(three_objects(), vec![camera_at(0, Vec3::zeros(), 0)]);
    let b = SyntheticBackend::new(s.clone(), NoiseConfig::default(), Some(ToolFault::CorruptPose));
    let r = recon(&b, &[0.0]);
    let bx = boxes(&b, 0, "table")[0];
    let out = b
        .call(ApiName::PredictObjPose, &args(vec![("recon", r), ("camera", num(0.0)), ("box", list(&bx.to_array()))]))
        .unwrap();
    assert!(out.perturbed);
    let GeoValue::Transform(t) = out.value else { panic!() };
    let truth = s.objects[1].pose.axis(Axis::Z);
    assert!((t.axis(Axis::Z) + truth).norm() < 1e-9);
}

#[test]
fn scale_estimate_recovers_reconstruction_unit() {
    let mut spec = (*scene(three_objects(), vec![camera_at(0, Vec3::zeros(), 0)])).clone();
    spec.reconstruction_scale = 2.0;
    let b = SyntheticBackend::new(Arc::new(spec), NoiseConfig::default(), None);
    let r = recon(&b, &[0.0]);
    assert_eq!(r.get("units"), Some(&GeoValue::text("relative")));
    let s = b
        .call(ApiName::EstimateScale, &args(vec![("recon", r), ("camera", num(0.0))]))
        .unwrap()
        .value;
    assert!((s.as_scalar().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn ocr_orders_left_to_right() {
    let mut objs = three_objects();
    objs[1].text_label = Some("EXIT".into());
    objs[0].text_label = Some("PUSH".into());
    objs.push(SceneObject {
        text_label: Some("HIDDEN".into()),
        ..object("sign", "sign", Vec3::new(0.0, 0.0, -2.0), 0.2, 0.0)
    });
    let s = scene(objs, vec![camera_at(0, Vec3::zeros(), 0)]);
    let b = SyntheticBackend::new(s, NoiseConfig::default(), None);
    let v = b.call(ApiName::Ocr, &args(vec![("camera", num(0.0))])).unwrap().value;
    let texts: Vec<&str> = v
        .as_list()
        .unwrap()
        .iter()
        .map(|r| r.get("text").unwrap().as_text().unwrap())
        .collect();
    assert_eq!(texts, ["PUSH", "EXIT"]);
}

#[test]
fn motion_flow_contracts() {
    let cams = vec![
        camera_at(0, Vec3::zeros(), 0),
        camera_at(1, Vec3::zeros(), 0),
        camera_at(2, Vec3::new(0.5, 0.0, 0.0), 0),
        SceneCamera {
            intrinsics: intrinsics(),
            extrinsic: RigidTransform::new(Rotation::about_axis(Axis::Y, std::f64::consts::PI), Vec3::zeros())
                .between(FrameTag::World, FrameTag::Camera(3)),
            session: 0,
        },
    ];
    let s = scene(three_objects(), cams);
    let b = SyntheticBackend::new(s, NoiseConfig::default(), None);
    let flow = |a: f64, c: f64| {
        b.call(ApiName::AnalyzeMotion, &args(vec![("camera_a", num(a)), ("camera_b", num(c))]))
    };
    let same = flow(0.0, 1.0).unwrap().value;
    assert_eq!(same.get("dominant"), Some(&GeoValue::text("none")));
    let moved = flow(0.0, 2.0).unwrap().value;
    assert_eq!(moved.get("dominant"), Some(&GeoValue::text("left")));
    let du = moved.get("mean_flow").unwrap().as_list().unwrap()[0].as_scalar().unwrap();
    assert!(du < 0.0);
    assert!(flow(0.0, 3.0).is_err());
}

#[test]
fn sessions_align_through_shared_objects() {
    // session 1 camera sits 1 m to the right and is yawed
    let yawed = RigidTransform::new(Rotation::about_axis(Axis::Y, 0.2), Vec3::new(-1.0, 0.0, 0.3))
        .between(FrameTag::World, FrameTag::Camera(1));
    let cams = vec![
        camera_at(0, Vec3::zeros(), 0),
        SceneCamera {
            intrinsics: intrinsics(),
            extrinsic: yawed.clone(),
            session: 1,
        },
    ];
    let s = scene(three_objects(), cams.clone());
    let b = SyntheticBackend::new(s.clone(), NoiseConfig::default(), None);
    let r = recon(&b, &[0.0, 1.0]);
    let GeoValue::Transform(e1) = &r.get("extrinsics").unwrap().as_list().unwrap()[1] else { panic!() };
    assert!(e1.rotation.geodesic_distance(&yawed.rotation) < 1e-9);
    assert!((e1.translation - yawed.translation).norm() < 1e-9);

    let two = args(vec![
        ("cameras", list(&[0.0, 1.0])),
        ("shared_objects", GeoValue::List(vec![GeoValue::text("chair"), GeoValue::text("table")])),
    ]);
    assert!(b.call(ApiName::Reconstruct, &two).is_err());
}

#[test]
fn injected_reconstruction_faults() {
    let s = scene(three_objects(), vec![camera_at(0, Vec3::zeros(), 0)]);
    let raise = SyntheticBackend::new(s.clone(), NoiseConfig::default(), Some(ToolFault::CorruptReconstructionRaise));
    assert!(raise.call(ApiName::Reconstruct, &args(vec![("cameras", list(&[0.0]))])).is_err());
    let skew = SyntheticBackend::new(s, NoiseConfig::default(), Some(ToolFault::CorruptReconstructionSkew));
    let out = skew.call(ApiName::Reconstruct, &args(vec![("cameras", list(&[0.0]))])).unwrap();
    assert!(out.perturbed);
}

#[test]
fn noise_is_reproducible_per_seed() {
    let s = scene(three_objects(), vec![camera_at(0, Vec3::zeros(), 0)]);
    let noise = NoiseConfig {
        centroid_sigma_rel: 0.01,
        pose_rotation_sigma: 0.05,
        seed: 42,
        ..Default::default()
    };
    let run = || {
        let b = SyntheticBackend::new(s.clone(), noise, None);
        let r = recon(&b, &[0.0]);
        let bx = boxes(&b, 0, "lamp")[0];
        b.call(ApiName::PredictObjPose, &args(vec![("recon", r), ("camera", num(0.0)), ("box", list(&bx.to_array()))]))
            .unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn code_runs_programs_over_variables() {
    let s = scene(three_objects(), vec![camera_at(0, Vec3::zeros(), 0)]);
    let b = SyntheticBackend::new(s, NoiseConfig::default(), None);
    let vars: BTreeMap<String, GeoValue> = [
        ("a".to_string(), GeoValue::Vec3(Vec3::x())),
        ("b".to_string(), GeoValue::Vec3(Vec3::y())),
    ]
    .into();
    let out = b
        .call(
            ApiName::Code,
            &args(vec![("program", GeoValue::text("return cross(a, b)")), ("variables", GeoValue::Record(vars))]),
        )
        .unwrap();
    assert_eq!(out.value, GeoValue::Vec3(Vec3::z()));
    let err = b.call(ApiName::Code, &args(vec![("program", GeoValue::text("return nope"))]));
    assert!(err.unwrap_err().to_string().contains("geocalc"));
}

/// Minimal HTTP/1.1 server answering POST /v1/tool through `handle_wire_request`.
fn serve(backend: Arc<SyntheticBackend>, requests: usize) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming().take(requests) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0u8; len];
            reader.read_exact(&mut body).unwrap();
            let reply = handle_wire_request(&*backend, std::str::from_utf8(&body).unwrap());
            write!(
                stream,
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                reply.len(),
                reply
            )
            .unwrap();
        }
    });
    format!("http://{addr}")
}

#[test]
fn remote_backend_matches_synthetic() {
    let s = scene(three_objects(), vec![camera_at(0, Vec3::zeros(), 0)]);
    let local = SyntheticBackend::new(s.clone(), NoiseConfig::default(), None);
    let url = serve(Arc::new(SyntheticBackend::new(s, NoiseConfig::default(), None)), 4);
    let remote = RemoteBackend::new(url, Duration::from_secs(10)).unwrap();
    let calls = [
        (ApiName::Reconstruct, args(vec![("cameras", list(&[0.0]))])),
        (ApiName::Detect, args(vec![("camera", num(0.0)), ("prompt", GeoValue::text("chair"))])),
        (ApiName::Ocr, args(vec![("camera", num(0.0))])),
    ];
    for (api, a) in &calls {
        assert_eq!(remote.call(*api, a).unwrap(), local.call(*api, a).unwrap(), "{api}");
    }
    let err = remote.call(ApiName::Detect, &args(vec![("camera", num(9.0)), ("prompt", GeoValue::text("x"))]));
    assert!(err.is_err());
}

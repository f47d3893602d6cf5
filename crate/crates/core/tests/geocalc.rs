mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use gca_core::geocalc::*;
use gca_core::geometry::Vec3;

const OPTIONS: [(&str, &str); 4] = [
    ("A", "p.z > 0 and p.x < 0"),
    ("B", "p.z > 0 and p.x > 0"),
    ("C", "p.z < 0 and p.x < 0"),
    ("D", "p.z < 0 and p.x > 0"),
];

#[test]
fn mcq_record_matches_each_option_alone() {
    let mut r = rng(8);
    for _ in 0..300 {
        let origin = box_vec(&mut r, 4.0);
        let forward = unit_vec(&mut r);
        let down = unit_vec(&mut r);
        if forward.cross(&down).norm() < 1e-3 {
            continue;
        }
        let target = box_vec(&mut r, 4.0);
        let vars: BTreeMap<String, GeoValue> = [
            ("o", GeoValue::Vec3(origin)),
            ("fwd", GeoValue::Vec3(forward)),
            ("down", GeoValue::Vec3(down)),
            ("t", GeoValue::Vec3(target)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let body: Vec<String> = OPTIONS.iter().map(|(k, c)| format!("  {k}: {c},")).collect();
        let program = format!(
            "f = frame(o, fwd, down)\np = express_in(f, t)\nreturn {{\n{}\n}}",
            body.join("\n")
        );
        let got = evaluate(&parse_program(&program).unwrap(), &vars).unwrap();
        let GeoValue::Record(rec) = got else { panic!("expected a record") };
        assert_eq!(rec.len(), 4);

        // Local coordinates by hand: z = forward, y = down made orthogonal, x = y × z.
        let z = forward.normalize();
        let y = (down - z * down.dot(&z)).normalize();
        let x = y.cross(&z);
        let d = target - origin;
        let local = Vec3::new(d.dot(&x), d.dot(&y), d.dot(&z));
        let mut scope = vars.clone();
        scope.insert("p".into(), GeoValue::Vec3(local));
        for (k, cond) in OPTIONS {
            let alone = evaluate_expr(&parse_expression(cond).unwrap(), &scope).unwrap();
            assert_eq!(rec.get(k), Some(&alone), "{k}: {cond}");
        }
        let truths = rec.values().filter(|v| **v == GeoValue::Bool(true)).count();
        assert!(truths <= 1);
    }
}

fn tags(t: &[TypeTag]) -> BTreeSet<TypeTag> {
    t.iter().copied().collect()
}

#[test]
fn retrieval_keys_on_variable_types() {
    let extr = retrieve_knowledge(&tags(&[TypeTag::Extrinsic]));
    assert!(extr.iter().any(|d| d.body.contains("Output of \"reconstruct\"")));
    let pose = retrieve_knowledge(&tags(&[TypeTag::ObjectPose]));
    assert!(pose.iter().any(|d| d.body.contains("Output of \"predict_obj_pose\"")));
    assert!(!pose.iter().any(|d| d.name == "reconstruct"));
    assert!(retrieve_knowledge(&tags(&[])).is_empty());
    let rendered = render_knowledge(&retrieve_knowledge(&tags(&[TypeTag::Extrinsic, TypeTag::CardinalBinding])));
    assert!(rendered.contains("reconstruct") && rendered.contains("_axis"));
}

#[test]
fn unbound_names_and_cross_product() {
    let vars: BTreeMap<String, GeoValue> = BTreeMap::new();
    let c = evaluate(&parse_program("return cross(vec3(1,0,0), vec3(0,1,0))").unwrap(), &vars).unwrap();
    assert_eq!(c, GeoValue::Vec3(Vec3::new(0.0, 0.0, 1.0)));
    assert!(evaluate(&parse_program("return nothing_here + 1").unwrap(), &vars).is_err());
}

#[test]
fn random_programs_never_panic() {
    let mut r = rng(77);
    let vars: BTreeMap<String, GeoValue> = BTreeMap::new();
    for _ in 0..3000 {
        let text = String::from_utf8_lossy(&fuzz_bytes(&mut r)).into_owned();
        if let Ok(p) = parse_program(&text) {
            let _ = evaluate(&p, &vars);
        }
        let _ = parse_expression(&text);
    }
}

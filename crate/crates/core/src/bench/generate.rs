//! Per-category question generators. Each places objects so the answer
//! follows from the placement itself and keeps the configured margin.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::constraint::{FrameSpec, ObjectiveSpec, Sign, TaskConstraint};
use crate::geometry::{Axis, Cardinal, Rotation, Vec3};

use super::layout::{
    image_box, pick_classes, standing_object, visibility, Layout, PlacedCamera, PlacedObject, Visibility,
};
use super::Category;

/// Placement attempts for one object before the whole question is redrawn.
const PLACE_TRIES: usize = 200;

pub(crate) struct Draft {
    pub layout: Layout,
    pub query: String,
    /// Options with the correct one first; shuffled by the caller.
    pub options: Vec<String>,
    pub reference: FrameSpec,
    pub objective: String,
    /// Class name → object id for every entity the question names.
    pub entities: BTreeMap<String, String>,
}

impl Draft {
    pub fn constraint(&self) -> TaskConstraint {
        let mut classes: Vec<String> = Vec::new();
        for o in &self.layout.objects {
            if !classes.contains(&o.class) {
                classes.push(o.class.clone());
            }
        }
        TaskConstraint {
            reference: self.reference.clone(),
            objective: ObjectiveSpec::from_statement(&self.objective, &classes).expect("objective is non-empty"),
            reasoning: String::new(),
        }
    }
}

/// Angle keeps at least `margin` from every multiple of 90°.
pub(crate) fn clear_of_axes(angle: f64, margin: f64) -> bool {
    let m = angle.rem_euclid(FRAC_PI_2);
    m >= margin && FRAC_PI_2 - m >= margin
}

fn sample_clear_angle(rng: &mut ChaCha8Rng, margin: f64) -> Option<f64> {
    (0..PLACE_TRIES)
        .map(|_| rng.random_range(0.0..TAU))
        .find(|a| clear_of_axes(*a, margin))
}

fn deg(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi).to_radians()
}

fn signed(rng: &mut ChaCha8Rng, x: f64) -> f64 {
    if rng.random_bool(0.5) {
        x
    } else {
        -x
    }
}

fn horizontal(v: Vec3) -> Vec3 {
    Vec3::new(v.x, 0.0, v.z)
}

/// Tries random floor spots until `accept` holds; the object is added.
fn place(
    layout: &mut Layout,
    rng: &mut ChaCha8Rng,
    class: &str,
    x: (f64, f64),
    z: (f64, f64),
    accept: impl Fn(&Layout, &PlacedObject) -> bool,
) -> Option<String> {
    let id = layout.next_id(class);
    for _ in 0..PLACE_TRIES {
        let o = standing_object(
            id.clone(),
            class,
            rng.random_range(x.0..x.1),
            rng.random_range(z.0..z.1),
            rng.random_range(0.0..TAU),
        );
        if layout.clear(&o) && accept(layout, &o) {
            layout.objects.push(o);
            return Some(id);
        }
    }
    None
}

/// Places an object at a fixed floor spot, if it fits.
fn place_at(layout: &mut Layout, class: &str, at: Vec3, yaw: f64, accept: impl Fn(&Layout, &PlacedObject) -> bool) -> Option<String> {
    let o = standing_object(layout.next_id(class), class, at.x, at.z, yaw);
    (layout.clear(&o) && accept(layout, &o)).then(|| {
        let id = o.id.clone();
        layout.objects.push(o);
        id
    })
}

fn full_in(cams: &'static [usize]) -> impl Fn(&Layout, &PlacedObject) -> bool {
    move |l, o| cams.iter().all(|&c| visibility(o, &l.cameras[c]) == Visibility::Full)
}

fn not_partial(cams: &'static [usize]) -> impl Fn(&Layout, &PlacedObject) -> bool {
    move |l, o| cams.iter().all(|&c| visibility(o, &l.cameras[c]) != Visibility::Partial)
}

const NEAR_REGION: ((f64, f64), (f64, f64)) = ((-2.2, 2.2), (3.0, 6.5));

fn relation_label(front: bool, right: bool) -> String {
    format!("{}-{}", if front { "front" } else { "back" }, if right { "right" } else { "left" })
}

fn relation_options(front: bool, right: bool) -> Vec<String> {
    let correct = relation_label(front, right);
    let mut out = vec![correct.clone()];
    for f in [true, false] {
        for r in [true, false] {
            let l = relation_label(f, r);
            if l != correct {
                out.push(l);
            }
        }
    }
    out
}

fn add_distractors(layout: &mut Layout, rng: &mut ChaCha8Rng, classes: &[&str], strict: &'static [usize]) {
    for c in classes {
        let region = ((-3.5, 3.5), (2.5, 8.0));
        // a distractor that does not fit is simply left out
        let _ = place(layout, rng, c, region.0, region.1, not_partial(strict));
    }
}

pub(crate) fn relative_position(rng: &mut ChaCha8Rng, margin: f64, ambiguity_rate: f64) -> Option<Draft> {
    let mut layout = Layout::new(deg(rng, 5.0, 15.0));
    let classes = pick_classes(rng, 4);
    let (anchor_c, target_c) = (classes[0], classes[1]);
    let anchor_id = place(&mut layout, rng, anchor_c, NEAR_REGION.0, NEAR_REGION.1, full_in(&[0]))?;
    let anchor = layout.object(&anchor_id).clone();
    // the user faces the anchor's front, so looks along its -z
    let forward = -horizontal(anchor.rotation().apply(&Vec3::z())).normalize();
    let right = Vec3::y().cross(&forward);
    let phi = sample_clear_angle(rng, margin)?;
    let r = rng.random_range(1.2..2.4);
    let at = anchor.center + (forward * phi.cos() + right * phi.sin()) * r;
    let target_id = place_at(&mut layout, target_c, at, rng.random_range(0.0..TAU), full_in(&[0]))?;

    let ambiguous = rng.random_bool(ambiguity_rate);
    if ambiguous {
        let cam0 = layout.cameras[0].clone();
        let tx = {
            let b = image_box(layout.object(&target_id), &cam0);
            (b[0] + b[2]) / 2.0
        };
        place(&mut layout, rng, target_c, (-3.0, 3.0), NEAR_REGION.1, move |l, o| {
            let b = image_box(o, &cam0);
            full_in(&[0])(l, o) && (b[0] + b[2]) / 2.0 > tx + 40.0
        })?;
    }
    add_distractors(&mut layout, rng, &classes[2..], &[0]);
    if !layout.clean_in(&[0]) {
        return None;
    }
    let sel = if ambiguous { "leftmost " } else { "" };
    Some(Draft {
        query: format!("Imagine you are using the {anchor_c}. Where is the {sel}{target_c} relative to you?"),
        options: relation_options(phi.cos() > 0.0, phi.sin() > 0.0),
        reference: FrameSpec::object(anchor_c, Sign::Minus, Axis::Z),
        objective: format!("The relative position of the {target_c} in the frame of a person using the {anchor_c}."),
        entities: BTreeMap::from([(anchor_c.to_string(), anchor_id), (target_c.to_string(), target_id)]),
        layout,
    })
}

const COMPASS: [(Cardinal, f64); 4] = [
    (Cardinal::North, 0.0),
    (Cardinal::East, 90.0),
    (Cardinal::South, 180.0),
    (Cardinal::West, 270.0),
];

/// Intercardinal name of a compass bearing in degrees, clockwise from north.
fn intercardinal(bearing: f64) -> &'static str {
    match bearing.rem_euclid(360.0) {
        b if b < 90.0 => "north-east",
        b if b < 180.0 => "south-east",
        b if b < 270.0 => "south-west",
        _ => "north-west",
    }
}

pub(crate) fn cardinal_direction(rng: &mut ChaCha8Rng, margin: f64) -> Option<Draft> {
    let mut layout = Layout::new(deg(rng, 5.0, 15.0));
    let classes = pick_classes(rng, 4);
    let (a_c, b_c, c_c) = (classes[0], classes[1], classes[2]);
    let b_id = place(&mut layout, rng, b_c, (-1.5, 1.5), (3.5, 5.5), full_in(&[0]))?;
    let b = layout.object(&b_id).center;
    let psi = rng.random_range(0.0..TAU);
    let dir = Vec3::new(psi.sin(), 0.0, psi.cos());
    let a_id = place_at(&mut layout, a_c, b + dir * rng.random_range(1.5..2.5), rng.random_range(0.0..TAU), full_in(&[0]))?;
    let (known, known_bearing) = *COMPASS.choose(rng).expect("non-empty");
    let bearing = sample_clear_angle(rng, margin)?;
    // turning about down carries north toward east
    let turn = Rotation::from_rotvec(&(Vec3::y() * (bearing - known_bearing.to_radians())));
    let at = b + turn.apply(&dir) * rng.random_range(1.2..2.4);
    let c_id = place_at(&mut layout, c_c, at, rng.random_range(0.0..TAU), full_in(&[0]))?;
    add_distractors(&mut layout, rng, &classes[3..], &[0]);
    if !layout.clean_in(&[0]) {
        return None;
    }
    let correct = intercardinal(bearing.to_degrees());
    let mut options = vec![correct.to_string()];
    options.extend(
        ["north-east", "south-east", "south-west", "north-west"]
            .iter()
            .filter(|o| **o != correct)
            .map(|o| o.to_string()),
    );
    let word = known.as_str().to_lowercase();
    Some(Draft {
        query: format!("The {a_c} is {word} of the {b_c}. In which direction is the {c_c} from the {b_c}?"),
        options,
        reference: FrameSpec::direction(b_c, a_c).with_cardinal(known),
        objective: format!("The cardinal direction of the {c_c} as seen from the {b_c}."),
        entities: BTreeMap::from([
            (a_c.to_string(), a_id),
            (b_c.to_string(), b_id),
            (c_c.to_string(), c_id),
        ]),
        layout,
    })
}

fn scenery(layout: &mut Layout, rng: &mut ChaCha8Rng, n: usize) -> Option<()> {
    for c in pick_classes(rng, n) {
        place(layout, rng, c, NEAR_REGION.0, NEAR_REGION.1, full_in(&[0]))?;
    }
    Some(())
}

pub(crate) fn camera_rotation(rng: &mut ChaCha8Rng) -> Option<Draft> {
    let pitch = deg(rng, 5.0, 15.0);
    let mut layout = Layout::new(pitch);
    scenery(&mut layout, rng, 3)?;
    let mag = deg(rng, 15.0, 40.0);
    let angle = signed(rng, mag);
    let pan = rng.random_bool(0.5);
    let cam0 = layout.cameras[0].clone();
    let turn = Rotation::about_axis(if pan { Axis::Y } else { Axis::X }, angle);
    layout.cameras.push(PlacedCamera {
        position: cam0.position,
        rotation: cam0.rotation.compose(&turn),
    });
    // +y turns the view right, +x tilts it up
    let correct = match (pan, angle > 0.0) {
        (true, true) => "pan right",
        (true, false) => "pan left",
        (false, true) => "tilt up",
        (false, false) => "tilt down",
    };
    let mut options = vec![correct.to_string()];
    options.extend(
        ["pan left", "pan right", "tilt up", "tilt down"]
            .iter()
            .filter(|o| **o != correct)
            .map(|o| o.to_string()),
    );
    Some(Draft {
        query: "How did the camera rotate from the first image to the second image?".into(),
        options,
        reference: FrameSpec::camera(0, Sign::Plus, Axis::Z),
        objective: "The rotation of the camera from image 1 to image 2, in the axes of camera 0.".into(),
        entities: BTreeMap::new(),
        layout,
    })
}

pub(crate) fn object_motion(rng: &mut ChaCha8Rng) -> Option<Draft> {
    let mut layout = Layout::new(deg(rng, 5.0, 15.0));
    scenery(&mut layout, rng, 3)?;
    let mag = rng.random_range(0.4..1.0);
    let t = signed(rng, mag);
    let lateral = rng.random_bool(0.5);
    let cam0 = layout.cameras[0].clone();
    let step = if lateral { Vec3::new(t, 0.0, 0.0) } else { Vec3::new(0.0, t, 0.0) };
    let cam1 = PlacedCamera {
        position: cam0.position + cam0.rotation.apply(&step),
        rotation: cam0.rotation,
    };
    if !layout.objects.iter().any(|o| visibility(o, &cam1) == Visibility::Full) {
        return None;
    }
    layout.cameras.push(cam1);
    // content drifts against the camera's own motion
    let correct = match (lateral, t > 0.0) {
        (true, true) => "left",
        (true, false) => "right",
        (false, true) => "up",
        (false, false) => "down",
    };
    let mut options = vec![correct.to_string()];
    options.extend(["left", "right", "up", "down"].iter().filter(|o| **o != correct).map(|o| o.to_string()));
    Some(Draft {
        query: "From the first image to the second image, which way does the scene appear to move in the view?".into(),
        options,
        reference: FrameSpec::camera(0, Sign::Plus, Axis::Z),
        objective: "The dominant image-space motion of the scene content from image 1 to image 2.".into(),
        entities: BTreeMap::new(),
        layout,
    })
}

pub(crate) fn multi_view_count(rng: &mut ChaCha8Rng) -> Option<Draft> {
    let pitch = deg(rng, 5.0, 15.0);
    let mut layout = Layout::new(pitch);
    let mag = deg(rng, 25.0, 40.0);
    let yaw = signed(rng, mag);
    layout.cameras.push(PlacedCamera::standing(0.0, 0.0, yaw, pitch));
    let classes = pick_classes(rng, 3);
    let class = classes[0];
    let n = rng.random_range(2..=5usize);
    let both: &'static [usize] = &[0, 1];
    for _ in 0..n {
        place(&mut layout, rng, class, (-4.5, 4.5), (2.5, 7.0), move |l, o| {
            let seen = both.iter().any(|&c| visibility(o, &l.cameras[c]) == Visibility::Full);
            let spaced = l
                .objects
                .iter()
                .filter(|p| p.class == o.class)
                .all(|p| (p.center - o.center).norm() >= 1.0);
            seen && spaced && not_partial(both)(l, o)
        })?;
    }
    add_distractors(&mut layout, rng, &classes[1..], both);
    if !layout.clean_in(both) {
        return None;
    }
    let mut pool: Vec<usize> = (n.saturating_sub(3).max(1)..=n + 3).filter(|k| *k != n).collect();
    pool.shuffle(rng);
    let mut options = vec![n.to_string()];
    options.extend(pool.into_iter().take(3).map(|k| k.to_string()));
    Some(Draft {
        query: format!("How many {class}s are there across all the images?"),
        options,
        reference: FrameSpec::camera(0, Sign::Plus, Axis::Z),
        objective: format!("The number of distinct {class}s across all images."),
        entities: BTreeMap::new(),
        layout,
    })
}

/// Ratio between neighbouring metric options.
const OPTION_RATIO: f64 = 1.3;

pub(crate) fn metric_distance(rng: &mut ChaCha8Rng) -> Option<Draft> {
    let mut layout = Layout::new(deg(rng, 5.0, 15.0));
    layout.reconstruction_scale = rng.random_range(0.5..2.5);
    let classes = pick_classes(rng, 3);
    let (a_c, b_c) = (classes[0], classes[1]);
    let a_id = place(&mut layout, rng, a_c, NEAR_REGION.0, NEAR_REGION.1, full_in(&[0]))?;
    let b_id = place(&mut layout, rng, b_c, NEAR_REGION.0, NEAR_REGION.1, full_in(&[0]))?;
    add_distractors(&mut layout, rng, &classes[2..], &[0]);
    if !layout.clean_in(&[0]) {
        return None;
    }
    let d = (layout.object(&a_id).center - layout.object(&b_id).center).norm();
    if d < 1.0 {
        return None;
    }
    let start: i32 = rng.random_range(-3..=0);
    let mut options = vec![format!("{d:.2} m")];
    options.extend(
        (start..start + 4)
            .filter(|k| *k != 0)
            .map(|k| format!("{:.2} m", d * OPTION_RATIO.powi(k))),
    );
    Some(Draft {
        query: format!("What is the distance between the {a_c} and the {b_c} in meters?"),
        options,
        reference: FrameSpec::camera(0, Sign::Plus, Axis::Z),
        objective: format!("The metric distance in meters between the {a_c} and the {b_c}."),
        entities: BTreeMap::from([(a_c.to_string(), a_id), (b_c.to_string(), b_id)]),
        layout,
    })
}

pub(crate) fn perspective_taking(rng: &mut ChaCha8Rng, margin: f64) -> Option<Draft> {
    let pitch = deg(rng, 5.0, 15.0);
    let mut layout = Layout::new(pitch);
    let classes = pick_classes(rng, 3);
    let target_c = classes[0];
    let target_id = place(&mut layout, rng, target_c, NEAR_REGION.0, NEAR_REGION.1, full_in(&[0]))?;
    add_distractors(&mut layout, rng, &classes[1..], &[0]);
    if !layout.clean_in(&[0]) {
        return None;
    }
    let target = layout.object(&target_id).center;
    let mut chosen = None;
    for _ in 0..PLACE_TRIES {
        let cam = PlacedCamera::standing(
            rng.random_range(-3.5..3.5),
            rng.random_range(1.0..8.0),
            rng.random_range(0.0..TAU),
            pitch,
        );
        let local = cam.to_camera(&target);
        let far = horizontal(cam.position - target).norm() >= 1.0;
        let clear = layout
            .objects
            .iter()
            .all(|o| horizontal(cam.position - o.center).norm() >= o.extents.x.hypot(o.extents.z) + 0.5);
        if far && clear && clear_of_axes(local.x.atan2(local.z), margin) {
            chosen = Some((cam, local));
            break;
        }
    }
    let (cam, local) = chosen?;
    layout.cameras.push(cam);
    Some(Draft {
        query: format!("From the perspective of the second image, where is the {target_c}?"),
        options: relation_options(local.z > 0.0, local.x > 0.0),
        reference: FrameSpec::camera(1, Sign::Plus, Axis::Z),
        objective: format!("The relative position of the {target_c} in the frame of camera 1."),
        entities: BTreeMap::from([(target_c.to_string(), target_id)]),
        layout,
    })
}

pub(crate) fn draft(category: Category, rng: &mut ChaCha8Rng, margin: f64, ambiguity_rate: f64) -> Option<Draft> {
    match category {
        Category::RelativePosition => relative_position(rng, margin, ambiguity_rate),
        Category::CardinalDirection => cardinal_direction(rng, margin),
        Category::CameraRotation => camera_rotation(rng),
        Category::ObjectMotion => object_motion(rng),
        Category::MultiViewCount => multi_view_count(rng),
        Category::MetricDistance => metric_distance(rng),
        Category::PerspectiveTaking => perspective_taking(rng, margin),
    }
}

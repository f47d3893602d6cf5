use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Kind of workspace variable, as far as formula retrieval cares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeTag {
    /// Camera extrinsics from `reconstruct`.
    Extrinsic,
    /// `T_obj2world` from `predict_obj_pose`.
    ObjectPose,
    /// Any rigid transform; implied by the two tags above.
    Transform,
    Detections,
    /// The reference frame carries a cardinal binding.
    CardinalBinding,
}

impl TypeTag {
    /// Tag carried by the output of a tool API, if any.
    pub fn for_api(api: &str) -> Option<TypeTag> {
        match api {
            "reconstruct" => Some(TypeTag::Extrinsic),
            "predict_obj_pose" => Some(TypeTag::ObjectPose),
            "detect" => Some(TypeTag::Detections),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FormulaDoc {
    pub name: &'static str,
    pub key: &'static [TypeTag],
    pub body: &'static str,
}

pub const KNOWLEDGE_BASE: &[FormulaDoc] = &[
    FormulaDoc {
        name: "reconstruct",
        key: &[TypeTag::Extrinsic],
        body: include_str!("../../assets/knowledge/reconstruct.txt"),
    },
    FormulaDoc {
        name: "predict_obj_pose",
        key: &[TypeTag::ObjectPose],
        body: include_str!("../../assets/knowledge/predict_obj_pose.txt"),
    },
    FormulaDoc {
        name: "rotation",
        key: &[TypeTag::Transform],
        body: include_str!("../../assets/knowledge/rotation.txt"),
    },
    FormulaDoc {
        name: "cardinal",
        key: &[TypeTag::CardinalBinding],
        body: include_str!("../../assets/knowledge/cardinal.txt"),
    },
    FormulaDoc {
        name: "detect",
        key: &[TypeTag::Detections],
        body: include_str!("../../assets/knowledge/detect.txt"),
    },
];

fn expand(tags: &BTreeSet<TypeTag>) -> BTreeSet<TypeTag> {
    let mut out = tags.clone();
    if tags.contains(&TypeTag::Extrinsic) || tags.contains(&TypeTag::ObjectPose) {
        out.insert(TypeTag::Transform);
    }
    out
}

/// Every doc whose key is covered by `tags`, in knowledge-base order.
pub fn retrieve_knowledge(tags: &BTreeSet<TypeTag>) -> Vec<&'static FormulaDoc> {
    let have = expand(tags);
    KNOWLEDGE_BASE
        .iter()
        .filter(|d| d.key.iter().all(|k| have.contains(k)))
        .collect()
}

/// Docs joined with a dashed rule, ready for prompt injection.
pub fn render_knowledge(docs: &[&FormulaDoc]) -> String {
    docs.iter()
        .map(|d| d.body.trim_end())
        .collect::<Vec<_>>()
        .join("\n\n- - - - - - - - - -\n\n")
}

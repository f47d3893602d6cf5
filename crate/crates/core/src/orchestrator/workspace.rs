//! Append-only variable store for the compute loop.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geocalc::{Bindings, GeoValue, TypeTag};

/// Which tool call produced a binding and what it read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub turn: usize,
    pub api: String,
    /// Workspace variables referenced by the call's arguments.
    pub deps: Vec<String>,
    /// The producing tool injected noise or a fault into this value.
    pub perturbed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub value: GeoValue,
    pub provenance: Provenance,
    pub tag: Option<TypeTag>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WorkspaceError {
    #[error("variable `{0}` is already bound")]
    Duplicate(String),
    #[error("`{0}` is not a valid variable name")]
    BadName(String),
}

#[derive(Debug, Clone, Default)]
pub struct Workspace {
    bindings: BTreeMap<String, Binding>,
    order: Vec<String>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, name: &str, value: GeoValue, provenance: Provenance) -> Result<(), WorkspaceError> {
        if !crate::toolbox::is_identifier(name) || crate::geocalc::Builtin::from_name(name).is_some() {
            return Err(WorkspaceError::BadName(name.to_string()));
        }
        if self.bindings.contains_key(name) {
            return Err(WorkspaceError::Duplicate(name.to_string()));
        }
        let tag = TypeTag::for_api(&provenance.api);
        self.bindings.insert(
            name.to_string(),
            Binding {
                value,
                provenance,
                tag,
            },
        );
        self.order.push(name.to_string());
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Binding> {
        self.bindings.get(name)
    }

    pub fn value(&self, name: &str) -> Option<&GeoValue> {
        self.bindings.get(name).map(|b| &b.value)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.bindings.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Names in binding order.
    pub fn names(&self) -> &[String] {
        &self.order
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Binding)> {
        self.order.iter().map(|n| (n.as_str(), &self.bindings[n]))
    }

    /// `name` plus every variable it was derived from, in binding order.
    pub fn lineage(&self, roots: &[String]) -> Vec<String> {
        let mut seen = std::collections::BTreeSet::new();
        let mut stack: Vec<String> = roots.to_vec();
        while let Some(n) = stack.pop() {
            if let Some(b) = self.bindings.get(&n) {
                if seen.insert(n) {
                    stack.extend(b.provenance.deps.iter().cloned());
                }
            }
        }
        self.order.iter().filter(|n| seen.contains(*n)).cloned().collect()
    }
}

impl Bindings for Workspace {
    fn lookup(&self, name: &str) -> Option<&GeoValue> {
        self.value(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov(api: &str, deps: &[&str]) -> Provenance {
        Provenance {
            turn: 1,
            api: api.into(),
            deps: deps.iter().map(|s| s.to_string()).collect(),
            perturbed: false,
        }
    }

    #[test]
    fn bind_then_duplicate() {
        let mut ws = Workspace::new();
        ws.bind("x", GeoValue::Scalar(1.0), prov("code", &[])).unwrap();
        assert_eq!(ws.value("x"), Some(&GeoValue::Scalar(1.0)));
        let err = ws.bind("x", GeoValue::Scalar(2.0), prov("code", &[])).unwrap_err();
        assert_eq!(err, WorkspaceError::Duplicate("x".into()));
        assert_eq!(ws.value("x"), Some(&GeoValue::Scalar(1.0)));
    }

    #[test]
    fn rejects_builtin_and_bad_names() {
        let mut ws = Workspace::new();
        assert!(ws.bind("cross", GeoValue::Bool(true), prov("code", &[])).is_err());
        assert!(ws.bind("a b", GeoValue::Bool(true), prov("code", &[])).is_err());
    }

    #[test]
    fn lineage_follows_deps() {
        let mut ws = Workspace::new();
        ws.bind("recon", GeoValue::Bool(true), prov("reconstruct", &[])).unwrap();
        ws.bind("dets", GeoValue::Bool(true), prov("detect", &[])).unwrap();
        ws.bind("pose", GeoValue::Bool(true), prov("predict_obj_pose", &["recon", "dets"])).unwrap();
        ws.bind("other", GeoValue::Bool(true), prov("ocr", &[])).unwrap();
        ws.bind("result", GeoValue::Bool(true), prov("code", &["pose"])).unwrap();
        assert_eq!(ws.lineage(&["result".into()]), vec!["recon", "dets", "pose", "result"]);
        assert_eq!(ws.get("recon").unwrap().tag, Some(TypeTag::Extrinsic));
    }
}

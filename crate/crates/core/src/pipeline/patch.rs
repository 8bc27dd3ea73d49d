//! Tag patches: rename an element and/or edit its attributes in place.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dom::{Document, NodeId, RAW_TEXT_ELEMENTS, VOID_ELEMENTS};
use crate::llm::extract_json_array;

/// Tags a patch may never introduce: they would swallow, hide or reparent
/// the element's content.
const FORBIDDEN_TARGETS: &[&str] = &[
    "html", "head", "body", "template", "title", "textarea", "frameset", "frame", "select",
    "option", "optgroup", "table", "tbody", "thead", "tfoot", "tr", "td", "th", "a", "p", "form",
    "svg", "math",
];

/// Elements whose tag must stay as it is.
const FIXED_SOURCES: &[&str] = &["html", "head", "body", "template"];

/// Attributes patches may set or remove besides `aria-*`.
const PATCHABLE_ATTRIBUTES: &[&str] = &["role", "lang", "title", "alt", "scope", "tabindex"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagPatch {
    pub node: NodeId,
    /// Locator of `node` in the source document, for clients without ids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub new_tag: Option<String>,
    #[serde(default)]
    pub set_attributes: Vec<(String, String)>,
    #[serde(default)]
    pub remove_attributes: Vec<String>,
}

impl TagPatch {
    pub fn new(node: NodeId) -> Self {
        TagPatch {
            node,
            path: None,
            new_tag: None,
            set_attributes: Vec::new(),
            remove_attributes: Vec::new(),
        }
    }

    pub fn rename(node: NodeId, tag: &str) -> Self {
        TagPatch {
            new_tag: Some(tag.to_string()),
            ..TagPatch::new(node)
        }
    }

    pub fn set(node: NodeId, name: &str, value: &str) -> Self {
        TagPatch {
            set_attributes: vec![(name.to_string(), value.to_string())],
            ..TagPatch::new(node)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.new_tag.is_none() && self.set_attributes.is_empty() && self.remove_attributes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// Position of the entry in the answer's array.
    pub entry: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedPatches {
    pub patches: Vec<TagPatch>,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatchError {
    #[error("no JSON array found in the answer")]
    NoArray,
    #[error("answer array is not valid JSON: {0}")]
    Json(String),
    #[error("node {0} is not an element of the document")]
    UnknownNode(NodeId),
    #[error("patch for node {node}: {reason}")]
    Invalid { node: NodeId, reason: String },
}

pub fn is_valid_tag_name(name: &str) -> bool {
    let mut chars = name.chars();
    chars.next().is_some_and(|c| c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
}

fn is_patchable_attribute(name: &str) -> bool {
    name.strip_prefix("aria-")
        .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_lowercase() || c == '-'))
        || PATCHABLE_ATTRIBUTES.contains(&name)
}

/// Why `patch` cannot be applied to `doc`, if it cannot.
pub fn check_patch(doc: &Document, patch: &TagPatch) -> Result<(), PatchError> {
    let invalid = |reason: String| PatchError::Invalid {
        node: patch.node,
        reason,
    };
    let tag = doc
        .get(patch.node)
        .and_then(|n| n.tag())
        .filter(|_| doc.node_path(patch.node).is_ok_and(|p| doc.resolve_path(&p) == Some(patch.node)))
        .ok_or(PatchError::UnknownNode(patch.node))?;
    if patch.is_empty() {
        return Err(invalid("patch changes nothing".into()));
    }
    if let Some(new_tag) = &patch.new_tag {
        if !is_valid_tag_name(new_tag) {
            return Err(invalid(format!("{new_tag:?} is not a valid tag name")));
        }
        if FIXED_SOURCES.contains(&tag) || VOID_ELEMENTS.contains(&tag) || RAW_TEXT_ELEMENTS.contains(&tag) {
            return Err(invalid(format!("<{tag}> cannot be renamed")));
        }
        if VOID_ELEMENTS.contains(&new_tag.as_str())
            || RAW_TEXT_ELEMENTS.contains(&new_tag.as_str())
            || FORBIDDEN_TARGETS.contains(&new_tag.as_str())
        {
            return Err(invalid(format!("renaming to <{new_tag}> is not allowed")));
        }
    }
    let names = patch
        .set_attributes
        .iter()
        .map(|(n, _)| n)
        .chain(&patch.remove_attributes);
    for name in names {
        if !is_patchable_attribute(name) {
            return Err(invalid(format!("attribute {name:?} is not patchable")));
        }
    }
    Ok(())
}

fn string_pairs(value: &Value) -> Option<Vec<(String, String)>> {
    match value {
        Value::Array(items) => items
            .iter()
            .map(|item| match item {
                Value::Array(pair) if pair.len() == 2 => {
                    Some((pair[0].as_str()?.to_string(), pair[1].as_str()?.to_string()))
                }
                Value::Object(map) => Some((
                    map.get("name")?.as_str()?.to_string(),
                    map.get("value")?.as_str()?.to_string(),
                )),
                _ => None,
            })
            .collect(),
        Value::Object(map) => map
            .iter()
            .map(|(k, v)| Some((k.clone(), v.as_str()?.to_string())))
            .collect(),
        Value::Null => Some(Vec::new()),
        _ => None,
    }
}

fn parse_entry(value: &Value) -> Result<TagPatch, String> {
    let obj = value.as_object().ok_or("entry is not an object")?;
    let node = obj
        .get("node")
        .and_then(Value::as_u64)
        .ok_or("entry has no numeric node")?;
    let mut patch = TagPatch::new(NodeId(node as usize));
    match obj.get("new_tag") {
        None | Some(Value::Null) => {}
        Some(Value::String(t)) => patch.new_tag = Some(t.trim().to_ascii_lowercase()),
        Some(_) => return Err("new_tag is not a string".into()),
    }
    if let Some(v) = obj.get("set_attributes") {
        patch.set_attributes = string_pairs(v).ok_or("set_attributes is malformed")?;
        for (name, _) in &mut patch.set_attributes {
            *name = name.trim().to_ascii_lowercase();
        }
    }
    match obj.get("remove_attributes") {
        None | Some(Value::Null) => {}
        Some(Value::Array(items)) => {
            patch.remove_attributes = items
                .iter()
                .map(|i| i.as_str().map(|s| s.trim().to_ascii_lowercase()))
                .collect::<Option<_>>()
                .ok_or("remove_attributes holds a non-string")?;
        }
        Some(_) => return Err("remove_attributes is not an array".into()),
    }
    Ok(patch)
}

/// Read patches from a model answer. Bad entries are dropped and reported;
/// the rest are kept.
pub fn parse_patches(response: &str, doc: &Document) -> Result<ParsedPatches, PatchError> {
    let array = extract_json_array(response).ok_or(PatchError::NoArray)?;
    let entries: Vec<Value> =
        serde_json::from_str(array).map_err(|e| PatchError::Json(e.to_string()))?;
    let mut out = ParsedPatches::default();
    for (entry, value) in entries.iter().enumerate() {
        let checked = parse_entry(value).and_then(|mut patch| {
            check_patch(doc, &patch).map_err(|e| e.to_string())?;
            patch.path = doc.node_path(patch.node).ok();
            Ok(patch)
        });
        match checked {
            Ok(patch) => out.patches.push(patch),
            Err(reason) => out.rejected.push(Rejection { entry, reason }),
        }
    }
    Ok(out)
}

/// Apply patches in order to a copy of `doc`. Every patch is checked first;
/// one bad patch fails the whole call and nothing is applied.
pub fn apply_patches(doc: &Document, patches: &[TagPatch]) -> Result<Document, PatchError> {
    for patch in patches {
        check_patch(doc, patch)?;
    }
    let mut out = doc.clone();
    for patch in patches {
        let node = patch.node;
        let err = |_| PatchError::UnknownNode(node);
        if let Some(tag) = &patch.new_tag {
            out.set_tag(node, tag).map_err(err)?;
        }
        for name in &patch.remove_attributes {
            out.remove_attr(node, name).map_err(err)?;
        }
        for (name, value) in &patch.set_attributes {
            out.set_attr(node, name, value).map_err(err)?;
        }
    }
    Ok(out)
}

/// Fill in `path` for patches that lack one.
pub fn with_paths(doc: &Document, patches: Vec<TagPatch>) -> Vec<TagPatch> {
    patches
        .into_iter()
        .map(|mut p| {
            if p.path.is_none() {
                p.path = doc.node_path(p.node).ok();
            }
            p
        })
        .collect()
}

//! CSS-like node locators: `html>body>div:nth-of-type(2)>#text`.
//!
//! A segment carries `:nth-of-type(k)` only when its parent has more than one
//! child of the same type, so the common case stays readable. Text and comment
//! nodes use the pseudo-names `#text` and `#comment`, the doctype `!doctype`.

use super::{DomError, Document, NodeData, NodeId};

fn segment_name(doc: &Document, id: NodeId) -> &str {
    match &doc.node(id).data {
        NodeData::Element { tag, .. } => tag,
        NodeData::Text(_) => "#text",
        NodeData::Comment(_) => "#comment",
        NodeData::Doctype(_) => "!doctype",
    }
}

fn segment(doc: &Document, id: NodeId, parent: NodeId) -> String {
    let name = segment_name(doc, id);
    let same: Vec<NodeId> = doc
        .children(parent)
        .iter()
        .copied()
        .filter(|c| segment_name(doc, *c) == name)
        .collect();
    if same.len() <= 1 {
        name.to_string()
    } else {
        let k = same.iter().position(|c| *c == id).unwrap_or(0) + 1;
        format!("{name}:nth-of-type({k})")
    }
}

pub(super) fn node_path(doc: &Document, id: NodeId) -> Result<String, DomError> {
    if !doc.contains(id) {
        return Err(DomError::UnknownNode(id));
    }
    if Some(id) == doc.doctype() {
        return Ok("!doctype".to_string());
    }
    let mut segments = Vec::new();
    let mut current = id;
    while let Some(parent) = doc.parent(current) {
        segments.push(segment(doc, current, parent));
        current = parent;
    }
    if current != doc.root() {
        // Detached subtree.
        return Err(DomError::UnknownNode(id));
    }
    segments.push(segment_name(doc, current).to_string());
    segments.reverse();
    Ok(segments.join(">"))
}

fn parse_segment(seg: &str) -> Option<(&str, usize)> {
    match seg.split_once(":nth-of-type(") {
        Some((name, rest)) => {
            let k: usize = rest.strip_suffix(')')?.parse().ok()?;
            (k >= 1).then_some((name, k))
        }
        None => Some((seg, 1)),
    }
}

pub(super) fn resolve_path(doc: &Document, path: &str) -> Option<NodeId> {
    if path == "!doctype" {
        return doc.doctype();
    }
    let mut segments = path.split('>');
    let (first, k) = parse_segment(segments.next()?)?;
    if first != segment_name(doc, doc.root()) || k != 1 {
        return None;
    }
    let mut current = doc.root();
    for seg in segments {
        let (name, k) = parse_segment(seg)?;
        current = doc
            .children(current)
            .iter()
            .copied()
            .filter(|c| segment_name(doc, *c) == name)
            .nth(k - 1)?;
    }
    Some(current)
}

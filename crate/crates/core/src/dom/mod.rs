//! Arena document model with stable node identities.
//!
//! Documents are produced by [`parse`], which runs html5ever's standards
//! tree builder (full browser error recovery) into a flat node table.
//! Node ids are assigned in document order at parse time and never change
//! afterwards: renaming an element or editing its attributes keeps its id,
//! and nodes created later get ids past the end of the table.

mod path;
mod serialize;
mod sink;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use serialize::{escape_attr, escape_text};

/// Elements that never have children or an end tag.
pub const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "source", "track",
    "wbr", "param", "keygen", "frame", "basefont", "bgsound",
];

/// Elements whose text children are serialized verbatim.
pub const RAW_TEXT_ELEMENTS: &[&str] = &[
    "script", "style", "xmp", "iframe", "noembed", "noframes", "plaintext", "noscript",
];

/// Identifier of a node within one [`Document`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DomError {
    #[error("input is not valid UTF-8: {0}")]
    InvalidEncoding(#[from] std::str::Utf8Error),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is not an element")]
    NotAnElement(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Element,
    Text,
    Comment,
    Doctype,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeData {
    Element {
        /// Lowercase ASCII tag name.
        tag: String,
        /// Attributes in source order; names are unique ignoring ASCII case.
        attrs: Vec<(String, String)>,
    },
    Text(String),
    Comment(String),
    Doctype(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomNode {
    pub id: NodeId,
    pub data: NodeData,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

impl DomNode {
    pub fn kind(&self) -> NodeKind {
        match self.data {
            NodeData::Element { .. } => NodeKind::Element,
            NodeData::Text(_) => NodeKind::Text,
            NodeData::Comment(_) => NodeKind::Comment,
            NodeData::Doctype(_) => NodeKind::Doctype,
        }
    }

    pub fn tag(&self) -> Option<&str> {
        match &self.data {
            NodeData::Element { tag, .. } => Some(tag),
            _ => None,
        }
    }

    pub fn is_element(&self, name: &str) -> bool {
        self.tag() == Some(name)
    }

    pub fn attrs(&self) -> &[(String, String)] {
        match &self.data {
            NodeData::Element { attrs, .. } => attrs,
            _ => &[],
        }
    }

    /// Attribute lookup, ignoring ASCII case of the name.
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs()
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn text(&self) -> Option<&str> {
        match &self.data {
            NodeData::Text(t) => Some(t),
            _ => None,
        }
    }
}

/// A parsed HTML document.
#[derive(Debug, Clone)]
pub struct Document {
    nodes: Vec<DomNode>,
    root: NodeId,
    doctype: Option<NodeId>,
}

/// Parse HTML text with browser-style error recovery. Never fails.
pub fn parse(html: &str) -> Document {
    sink::parse_html(html)
}

/// Parse raw bytes, rejecting input that is not valid UTF-8.
pub fn parse_bytes(bytes: &[u8]) -> Result<Document, DomError> {
    Ok(parse(std::str::from_utf8(bytes)?))
}

impl Document {
    pub(crate) fn from_parts(nodes: Vec<DomNode>, root: NodeId, doctype: Option<NodeId>) -> Self {
        debug_assert!(nodes.iter().enumerate().all(|(i, n)| n.id.0 == i));
        Document {
            nodes,
            root,
            doctype,
        }
    }

    /// The `html` element.
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn doctype(&self) -> Option<NodeId> {
        self.doctype
    }

    /// Id the next created node will receive.
    pub fn next_id(&self) -> NodeId {
        NodeId(self.nodes.len())
    }

    /// Number of nodes ever allocated (detached nodes included).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, id: NodeId) -> Option<&DomNode> {
        self.nodes.get(id.0)
    }

    /// Panics on an id that does not belong to this document.
    pub fn node(&self, id: NodeId) -> &DomNode {
        &self.nodes[id.0]
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.0 < self.nodes.len()
    }

    pub fn tag(&self, id: NodeId) -> Option<&str> {
        self.get(id).and_then(DomNode::tag)
    }

    pub fn attr(&self, id: NodeId, name: &str) -> Option<&str> {
        self.get(id).and_then(|n| n.attr(name))
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.get(id).and_then(|n| n.parent)
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        self.get(id).map(|n| n.children.as_slice()).unwrap_or(&[])
    }

    /// Element children only.
    pub fn child_elements(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.children(id)
            .iter()
            .copied()
            .filter(|c| self.node(*c).kind() == NodeKind::Element)
    }

    fn child_element_named(&self, parent: NodeId, name: &str) -> Option<NodeId> {
        self.child_elements(parent)
            .find(|c| self.node(*c).is_element(name))
    }

    pub fn head(&self) -> Option<NodeId> {
        self.child_element_named(self.root, "head")
    }

    pub fn body(&self) -> Option<NodeId> {
        self.child_element_named(self.root, "body")
    }

    /// Pre-order traversal of the subtree rooted at `id`, `id` included.
    pub fn descendants(&self, id: NodeId) -> Descendants<'_> {
        Descendants {
            doc: self,
            stack: if self.contains(id) { vec![id] } else { vec![] },
        }
    }

    /// Every attached node in document order, starting with the doctype.
    pub fn all_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.doctype.into_iter().chain(self.descendants(self.root))
    }

    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.parent(id), move |p| self.parent(*p))
    }

    /// True when `ancestor` is a strict ancestor of `id`.
    pub fn is_ancestor(&self, ancestor: NodeId, id: NodeId) -> bool {
        self.ancestors(id).any(|a| a == ancestor)
    }

    /// Concatenated text of all descendant text nodes.
    pub fn text_content(&self, id: NodeId) -> String {
        let mut out = String::new();
        for n in self.descendants(id) {
            if let NodeData::Text(t) = &self.node(n).data {
                out.push_str(t);
            }
        }
        out
    }

    pub fn set_tag(&mut self, id: NodeId, new_tag: &str) -> Result<(), DomError> {
        match self.nodes.get_mut(id.0).map(|n| &mut n.data) {
            Some(NodeData::Element { tag, .. }) => {
                *tag = new_tag.to_ascii_lowercase();
                Ok(())
            }
            Some(_) => Err(DomError::NotAnElement(id)),
            None => Err(DomError::UnknownNode(id)),
        }
    }

    fn attrs_mut(&mut self, id: NodeId) -> Result<&mut Vec<(String, String)>, DomError> {
        match self.nodes.get_mut(id.0).map(|n| &mut n.data) {
            Some(NodeData::Element { attrs, .. }) => Ok(attrs),
            Some(_) => Err(DomError::NotAnElement(id)),
            None => Err(DomError::UnknownNode(id)),
        }
    }

    /// Set an attribute, replacing an existing one with the same name (ASCII
    /// case-insensitive) in place.
    pub fn set_attr(&mut self, id: NodeId, name: &str, value: &str) -> Result<(), DomError> {
        let attrs = self.attrs_mut(id)?;
        match attrs.iter_mut().find(|(n, _)| n.eq_ignore_ascii_case(name)) {
            Some(slot) => slot.1 = value.to_string(),
            None => attrs.push((name.to_ascii_lowercase(), value.to_string())),
        }
        Ok(())
    }

    pub fn remove_attr(&mut self, id: NodeId, name: &str) -> Result<(), DomError> {
        self.attrs_mut(id)?
            .retain(|(n, _)| !n.eq_ignore_ascii_case(name));
        Ok(())
    }

    fn push_node(&mut self, data: NodeData, parent: NodeId) -> NodeId {
        let id = self.next_id();
        self.nodes.push(DomNode {
            id,
            data,
            parent: Some(parent),
            children: Vec::new(),
        });
        self.nodes[parent.0].children.push(id);
        id
    }

    /// Append a new element as the last child of `parent`.
    pub fn append_element(
        &mut self,
        parent: NodeId,
        tag: &str,
        attrs: &[(&str, &str)],
    ) -> Result<NodeId, DomError> {
        self.check_element(parent)?;
        let data = NodeData::Element {
            tag: tag.to_ascii_lowercase(),
            attrs: attrs
                .iter()
                .map(|(n, v)| (n.to_ascii_lowercase(), v.to_string()))
                .collect(),
        };
        Ok(self.push_node(data, parent))
    }

    /// Append text to `parent`, merging with a trailing text child.
    pub fn append_text(&mut self, parent: NodeId, text: &str) -> Result<NodeId, DomError> {
        self.check_element(parent)?;
        if let Some(&last) = self.nodes[parent.0].children.last() {
            if let NodeData::Text(t) = &mut self.nodes[last.0].data {
                t.push_str(text);
                return Ok(last);
            }
        }
        Ok(self.push_node(NodeData::Text(text.to_string()), parent))
    }

    fn check_element(&self, id: NodeId) -> Result<(), DomError> {
        match self.get(id) {
            Some(n) if n.kind() == NodeKind::Element => Ok(()),
            Some(_) => Err(DomError::NotAnElement(id)),
            None => Err(DomError::UnknownNode(id)),
        }
    }

    /// Detach a node from its parent. The node keeps its id but is no longer
    /// reachable from the root.
    pub fn detach(&mut self, id: NodeId) -> Result<(), DomError> {
        let parent = self.get(id).ok_or(DomError::UnknownNode(id))?.parent;
        if let Some(p) = parent {
            self.nodes[p.0].children.retain(|c| *c != id);
        }
        self.nodes[id.0].parent = None;
        Ok(())
    }

    /// Turn `id` into a text node in place; its former subtree becomes
    /// unreachable.
    pub fn replace_with_text(&mut self, id: NodeId, text: &str) -> Result<(), DomError> {
        let node = self.nodes.get_mut(id.0).ok_or(DomError::UnknownNode(id))?;
        let orphans = std::mem::take(&mut node.children);
        node.data = NodeData::Text(text.to_string());
        for child in orphans {
            self.nodes[child.0].parent = None;
        }
        Ok(())
    }

    /// Deep-copy `src_id` from `src` as the last child of `parent`.
    pub fn import_subtree(
        &mut self,
        src: &Document,
        src_id: NodeId,
        parent: NodeId,
    ) -> Result<NodeId, DomError> {
        self.check_element(parent)?;
        let src_node = src.get(src_id).ok_or(DomError::UnknownNode(src_id))?;
        if let (NodeData::Text(t), Some(&last)) =
            (&src_node.data, self.nodes[parent.0].children.last())
        {
            if let NodeData::Text(existing) = &mut self.nodes[last.0].data {
                existing.push_str(t);
                return Ok(last);
            }
        }
        let copy = self.push_node(src_node.data.clone(), parent);
        let mut stack: Vec<(NodeId, NodeId)> = src_node
            .children
            .iter()
            .rev()
            .map(|c| (*c, copy))
            .collect();
        while let Some((from, to_parent)) = stack.pop() {
            let n = src.node(from);
            let id = self.push_node(n.data.clone(), to_parent);
            stack.extend(n.children.iter().rev().map(|c| (*c, id)));
        }
        Ok(copy)
    }

    /// Serialize to HTML text.
    pub fn to_html(&self) -> String {
        serialize::serialize(self)
    }

    /// Serialize only the subtree rooted at `id`.
    pub fn subtree_html(&self, id: NodeId) -> String {
        serialize::serialize_subtree(self, id)
    }

    /// Start tag of an element with its attributes; empty for other nodes.
    pub fn open_tag_html(&self, id: NodeId) -> String {
        let mut out = String::new();
        if let Some(NodeData::Element { tag, attrs }) = self.get(id).map(|n| &n.data) {
            serialize::write_open_tag(tag, attrs, &mut out);
        }
        out
    }

    /// Id-free structural snapshot: tags, attributes, text, in order.
    pub fn shape(&self) -> Shape {
        let mut children = Vec::new();
        if let Some(d) = self.doctype {
            children.push(self.shape_of(d));
        }
        children.push(self.shape_of(self.root));
        Shape::Fragment(children)
    }

    pub fn shape_of(&self, id: NodeId) -> Shape {
        let n = self.node(id);
        match &n.data {
            NodeData::Element { tag, attrs } => {
                let mut sorted = attrs.clone();
                sorted.sort();
                Shape::Element {
                    tag: tag.clone(),
                    attrs: sorted,
                    children: n.children.iter().map(|c| self.shape_of(*c)).collect(),
                }
            }
            NodeData::Text(t) => Shape::Text(t.clone()),
            NodeData::Comment(t) => Shape::Comment(t.clone()),
            NodeData::Doctype(t) => Shape::Doctype(t.clone()),
        }
    }

    /// Same tag, attribute and text structure, ignoring node ids and
    /// attribute order.
    pub fn structurally_eq(&self, other: &Document) -> bool {
        self.shape() == other.shape()
    }

    pub fn node_path(&self, id: NodeId) -> Result<String, DomError> {
        path::node_path(self, id)
    }

    pub fn resolve_path(&self, path: &str) -> Option<NodeId> {
        path::resolve_path(self, path)
    }
}

/// Structural view of a subtree, used for equality checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    Fragment(Vec<Shape>),
    Element {
        tag: String,
        attrs: Vec<(String, String)>,
        children: Vec<Shape>,
    },
    Text(String),
    Comment(String),
    Doctype(String),
}

pub struct Descendants<'a> {
    doc: &'a Document,
    stack: Vec<NodeId>,
}

impl Iterator for Descendants<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        let id = self.stack.pop()?;
        self.stack
            .extend(self.doc.node(id).children.iter().rev().copied());
        Some(id)
    }
}

/// Collapse whitespace runs to single spaces and trim.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

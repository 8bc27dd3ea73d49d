//! html5ever tree sink writing into a temporary arena, then flattened into a
//! [`Document`] with document-order ids.

use std::borrow::Cow;
use std::cell::RefCell;

use html5ever::interface::{ElemName, ElementFlags, NodeOrText, QuirksMode, TreeSink};
use html5ever::tendril::{StrTendril, TendrilSink};
use html5ever::{parse_document, Attribute, LocalName, Namespace, ParseOpts, QualName};

use super::{DomNode, Document, NodeData, NodeId};

type Handle = usize;

#[derive(Debug)]
enum Data {
    Document,
    /// Holds `<template>` contents.
    Fragment,
    Doctype(String),
    Text(String),
    Comment(String),
    Element {
        name: QualName,
        attrs: Vec<Attribute>,
        template: Option<Handle>,
    },
    Ignored,
}

#[derive(Debug)]
struct ArenaNode {
    data: Data,
    parent: Option<Handle>,
    children: Vec<Handle>,
}

#[derive(Default)]
struct Arena {
    nodes: RefCell<Vec<ArenaNode>>,
}

#[derive(Debug)]
pub(super) struct OwnedName(QualName);

impl ElemName for OwnedName {
    fn ns(&self) -> &Namespace {
        &self.0.ns
    }

    fn local_name(&self) -> &LocalName {
        &self.0.local
    }
}

impl Arena {
    fn new() -> Self {
        let arena = Arena::default();
        arena.push(Data::Document);
        arena
    }

    fn push(&self, data: Data) -> Handle {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(ArenaNode {
            data,
            parent: None,
            children: Vec::new(),
        });
        nodes.len() - 1
    }

    fn detach(nodes: &mut [ArenaNode], child: Handle) {
        if let Some(p) = nodes[child].parent.take() {
            nodes[p].children.retain(|c| *c != child);
        }
    }

    fn append_child(&self, parent: Handle, child: NodeOrText<Handle>) {
        let mut nodes = self.nodes.borrow_mut();
        match child {
            NodeOrText::AppendText(text) => {
                if let Some(&last) = nodes[parent].children.last() {
                    if let Data::Text(t) = &mut nodes[last].data {
                        t.push_str(&text);
                        return;
                    }
                }
                nodes.push(ArenaNode {
                    data: Data::Text(text.to_string()),
                    parent: Some(parent),
                    children: Vec::new(),
                });
                let id = nodes.len() - 1;
                nodes[parent].children.push(id);
            }
            NodeOrText::AppendNode(node) => {
                Self::detach(&mut nodes, node);
                nodes[node].parent = Some(parent);
                nodes[parent].children.push(node);
            }
        }
    }
}

impl TreeSink for Arena {
    type Handle = Handle;
    type Output = Document;
    type ElemName<'a> = OwnedName;

    fn finish(self) -> Document {
        flatten(self.nodes.into_inner())
    }

    fn parse_error(&self, _msg: Cow<'static, str>) {}

    fn get_document(&self) -> Handle {
        0
    }

    fn elem_name<'a>(&'a self, target: &'a Handle) -> OwnedName {
        match &self.nodes.borrow()[*target].data {
            Data::Element { name, .. } => OwnedName(name.clone()),
            other => panic!("elem_name called on non-element {other:?}"),
        }
    }

    fn create_element(&self, name: QualName, attrs: Vec<Attribute>, flags: ElementFlags) -> Handle {
        let template = flags.template.then(|| self.push(Data::Fragment));
        self.push(Data::Element {
            name,
            attrs,
            template,
        })
    }

    fn create_comment(&self, text: StrTendril) -> Handle {
        self.push(Data::Comment(text.to_string()))
    }

    fn create_pi(&self, _target: StrTendril, _data: StrTendril) -> Handle {
        self.push(Data::Ignored)
    }

    fn append(&self, parent: &Handle, child: NodeOrText<Handle>) {
        self.append_child(*parent, child);
    }

    fn append_based_on_parent_node(
        &self,
        element: &Handle,
        prev_element: &Handle,
        child: NodeOrText<Handle>,
    ) {
        let has_parent = self.nodes.borrow()[*element].parent.is_some();
        if has_parent {
            self.append_before_sibling(element, child);
        } else {
            self.append_child(*prev_element, child);
        }
    }

    fn append_doctype_to_document(
        &self,
        name: StrTendril,
        _public_id: StrTendril,
        _system_id: StrTendril,
    ) {
        let id = self.push(Data::Doctype(name.to_string()));
        self.append_child(0, NodeOrText::AppendNode(id));
    }

    fn get_template_contents(&self, target: &Handle) -> Handle {
        match &self.nodes.borrow()[*target].data {
            Data::Element {
                template: Some(t), ..
            } => *t,
            _ => panic!("not a template element"),
        }
    }

    fn same_node(&self, x: &Handle, y: &Handle) -> bool {
        x == y
    }

    fn set_quirks_mode(&self, _mode: QuirksMode) {}

    fn append_before_sibling(&self, sibling: &Handle, new_node: NodeOrText<Handle>) {
        let mut nodes = self.nodes.borrow_mut();
        let Some(parent) = nodes[*sibling].parent else {
            return;
        };
        let pos = nodes[parent]
            .children
            .iter()
            .position(|c| c == sibling)
            .expect("sibling listed in parent");
        match new_node {
            NodeOrText::AppendText(text) => {
                if pos > 0 {
                    let prev = nodes[parent].children[pos - 1];
                    if let Data::Text(t) = &mut nodes[prev].data {
                        t.push_str(&text);
                        return;
                    }
                }
                nodes.push(ArenaNode {
                    data: Data::Text(text.to_string()),
                    parent: Some(parent),
                    children: Vec::new(),
                });
                let id = nodes.len() - 1;
                nodes[parent].children.insert(pos, id);
            }
            NodeOrText::AppendNode(node) => {
                Self::detach(&mut nodes, node);
                let pos = nodes[parent]
                    .children
                    .iter()
                    .position(|c| c == sibling)
                    .expect("sibling listed in parent");
                nodes[node].parent = Some(parent);
                nodes[parent].children.insert(pos, node);
            }
        }
    }

    fn add_attrs_if_missing(&self, target: &Handle, new_attrs: Vec<Attribute>) {
        if let Data::Element { attrs, .. } = &mut self.nodes.borrow_mut()[*target].data {
            for a in new_attrs {
                if !attrs.iter().any(|e| e.name == a.name) {
                    attrs.push(a);
                }
            }
        }
    }

    fn remove_from_parent(&self, target: &Handle) {
        Self::detach(&mut self.nodes.borrow_mut(), *target);
    }

    fn reparent_children(&self, node: &Handle, new_parent: &Handle) {
        let mut nodes = self.nodes.borrow_mut();
        let moved = std::mem::take(&mut nodes[*node].children);
        for c in &moved {
            nodes[*c].parent = Some(*new_parent);
        }
        nodes[*new_parent].children.extend(moved);
    }
}

fn attr_name(a: &Attribute) -> String {
    match &a.name.prefix {
        Some(p) => format!("{}:{}", p, a.name.local),
        None => a.name.local.to_string(),
    }
}

/// Renumber the arena in document order, keeping only the doctype and the
/// `html` element at document level.
fn flatten(arena: Vec<ArenaNode>) -> Document {
    let mut nodes: Vec<DomNode> = Vec::with_capacity(arena.len());
    let mut doctype = None;
    let mut root = None;

    let top: Vec<Handle> = arena[0].children.clone();
    for handle in top {
        match &arena[handle].data {
            Data::Doctype(name) if doctype.is_none() && root.is_none() => {
                let id = NodeId(nodes.len());
                nodes.push(DomNode {
                    id,
                    data: NodeData::Doctype(name.clone()),
                    parent: None,
                    children: Vec::new(),
                });
                doctype = Some(id);
            }
            Data::Element { .. } if root.is_none() => {
                root = Some(copy_tree(&arena, handle, &mut nodes));
            }
            _ => {}
        }
    }
    let root = root.expect("tree builder always creates an html element");
    Document::from_parts(nodes, root, doctype)
}

fn copy_tree(arena: &[ArenaNode], start: Handle, nodes: &mut Vec<DomNode>) -> NodeId {
    let start_id = NodeId(nodes.len());
    let mut stack: Vec<(Handle, Option<NodeId>)> = vec![(start, None)];
    while let Some((handle, parent)) = stack.pop() {
        let source = &arena[handle];
        let data = match &source.data {
            Data::Element { name, attrs, .. } => {
                let mut seen: Vec<String> = Vec::new();
                let mut out = Vec::with_capacity(attrs.len());
                for a in attrs {
                    let n = attr_name(a);
                    let folded = n.to_ascii_lowercase();
                    if !seen.contains(&folded) {
                        seen.push(folded);
                        out.push((n, a.value.to_string()));
                    }
                }
                NodeData::Element {
                    tag: name.local.to_ascii_lowercase().to_string(),
                    attrs: out,
                }
            }
            Data::Text(t) => NodeData::Text(t.clone()),
            Data::Comment(t) => NodeData::Comment(t.clone()),
            _ => continue,
        };
        let id = NodeId(nodes.len());
        nodes.push(DomNode {
            id,
            data,
            parent,
            children: Vec::new(),
        });
        if let Some(p) = parent {
            nodes[p.0].children.push(id);
        }
        let kids: &[Handle] = match &source.data {
            Data::Element {
                template: Some(t), ..
            } => &arena[*t].children,
            _ => &source.children,
        };
        stack.extend(kids.iter().rev().map(|k| (*k, Some(id))));
    }
    start_id
}

pub(super) fn parse_html(html: &str) -> Document {
    parse_document(Arena::new(), ParseOpts::default()).one(html)
}

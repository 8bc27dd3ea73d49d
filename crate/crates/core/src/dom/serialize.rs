use super::{Document, NodeData, NodeId, RAW_TEXT_ELEMENTS, VOID_ELEMENTS};

pub fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            _ => out.push(c),
        }
    }
    out
}

pub fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            _ => out.push(c),
        }
    }
    out
}

pub(super) fn serialize(doc: &Document) -> String {
    let mut out = String::new();
    if let Some(d) = doc.doctype() {
        write_node(doc, d, &mut out);
        out.push('\n');
    }
    write_node(doc, doc.root(), &mut out);
    out
}

pub(super) fn serialize_subtree(doc: &Document, id: NodeId) -> String {
    let mut out = String::new();
    if doc.contains(id) {
        write_node(doc, id, &mut out);
    }
    out
}

pub(super) fn write_open_tag(tag: &str, attrs: &[(String, String)], out: &mut String) {
    out.push('<');
    out.push_str(tag);
    for (name, value) in attrs {
        out.push(' ');
        out.push_str(name);
        out.push_str("=\"");
        out.push_str(&escape_attr(value));
        out.push('"');
    }
    out.push('>');
}

enum Step {
    Open(NodeId),
    Close(NodeId),
}

fn write_node(doc: &Document, start: NodeId, out: &mut String) {
    let mut stack = vec![Step::Open(start)];
    while let Some(step) = stack.pop() {
        let id = match step {
            Step::Close(id) => {
                let tag = doc.tag(id).unwrap_or_default();
                out.push_str("</");
                out.push_str(tag);
                out.push('>');
                continue;
            }
            Step::Open(id) => id,
        };
        let node = doc.node(id);
        match &node.data {
            NodeData::Doctype(name) => {
                out.push_str("<!DOCTYPE ");
                out.push_str(if name.is_empty() { "html" } else { name });
                out.push('>');
            }
            NodeData::Comment(text) => {
                out.push_str("<!--");
                out.push_str(text);
                out.push_str("-->");
            }
            NodeData::Text(text) => {
                let raw = node
                    .parent
                    .and_then(|p| doc.tag(p))
                    .is_some_and(|t| RAW_TEXT_ELEMENTS.contains(&t));
                if raw {
                    out.push_str(text);
                } else {
                    out.push_str(&escape_text(text));
                }
            }
            NodeData::Element { tag, attrs } => {
                write_open_tag(tag, attrs, out);
                if VOID_ELEMENTS.contains(&tag.as_str()) {
                    continue;
                }
                // The parser drops one newline directly after these start tags.
                if matches!(tag.as_str(), "pre" | "textarea" | "listing") {
                    let leading_newline = node
                        .children
                        .first()
                        .and_then(|c| doc.node(*c).text())
                        .is_some_and(|t| t.starts_with('\n'));
                    if leading_newline {
                        out.push('\n');
                    }
                }
                stack.push(Step::Close(id));
                stack.extend(node.children.iter().rev().map(|c| Step::Open(*c)));
            }
        }
    }
}

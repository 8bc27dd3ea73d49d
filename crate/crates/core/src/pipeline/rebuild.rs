//! Deterministic text-only rebuild used in place of a model for Option 1.

use std::collections::{HashMap, HashSet};

use crate::audit::{heading_level, run_audit};
use crate::dom::{collapse_whitespace, escape_attr, escape_text, parse, Document, NodeData, NodeId};
use crate::extract::{hides_subtree, is_interactive, NameResolver};

use super::fixer::{link_only_heading, renumber_levels, CATEGORY_RUN};

pub const CATEGORIES_HEADING: &str = "Categories";

/// Dropped with their whole subtree.
const DROPPED: &[&str] = &[
    "iframe", "object", "embed", "canvas", "video", "audio", "source", "track", "map", "area",
    "link", "meta", "base", "head", "title", "frameset", "frame", "dialog", "slot",
];

const KEPT: &[&str] = &[
    "p", "ul", "ol", "li", "dl", "dt", "dd", "table", "caption", "thead", "tbody", "tfoot", "tr",
    "th", "td", "colgroup", "col", "h1", "h2", "h3", "h4", "h5", "h6", "a", "button", "form",
    "label", "input", "select", "option", "optgroup", "textarea", "fieldset", "legend", "b",
    "strong", "i", "em", "u", "s", "small", "mark", "sub", "sup", "code", "kbd", "samp", "var",
    "abbr", "cite", "q", "dfn", "time", "data", "bdi", "bdo", "del", "ins", "pre", "blockquote",
    "br", "hr", "wbr", "nav", "section", "article", "aside", "figure", "figcaption", "details",
    "summary", "address", "span", "div", "output", "meter", "progress",
];

const AS_DIV: &[&str] = &["main", "header", "footer", "hgroup", "search", "menu"];

const GLOBAL_ATTRS: &[&str] = &["aria-label", "lang", "dir"];

fn allowed_attr(tag: &str, name: &str) -> bool {
    if GLOBAL_ATTRS.contains(&name) {
        return true;
    }
    let list: &[&str] = match tag {
        "a" => &["href"],
        "td" | "th" => &["colspan", "rowspan", "scope", "headers"],
        "col" | "colgroup" => &["span"],
        "ol" => &["start", "reversed"],
        "li" => &["value"],
        "form" => &["action", "method"],
        "label" | "output" => &["for"],
        "input" | "select" | "textarea" | "button" | "option" | "optgroup" | "fieldset" => &[
            "type", "name", "value", "placeholder", "checked", "selected", "multiple", "required",
            "disabled", "readonly", "min", "max", "step", "rows", "cols", "maxlength", "label",
        ],
        "details" => &["open"],
        "abbr" => &["title"],
        "time" => &["datetime"],
        "data" | "meter" | "progress" => &["value", "min", "max"],
        _ => &[],
    };
    list.contains(&name)
}

/// Ids some other element points at.
fn referenced_ids(doc: &Document) -> HashSet<String> {
    let mut out = HashSet::new();
    for id in doc.descendants(doc.root()) {
        let node = doc.node(id);
        for attr in ["for", "aria-labelledby", "aria-describedby", "headers"] {
            if let Some(v) = node.attr(attr) {
                out.extend(v.split_whitespace().map(str::to_string));
            }
        }
        if let Some(fragment) = node.attr("href").and_then(|h| h.trim().strip_prefix('#')) {
            out.insert(fragment.to_string());
        }
    }
    out
}

struct Rebuilder<'a> {
    src: &'a Document,
    names: NameResolver<'a>,
    referenced: HashSet<String>,
    out: Document,
    emitted_ids: HashSet<String>,
    seen_h1: bool,
    /// Output element to the source element it was copied from.
    origin: HashMap<NodeId, NodeId>,
}

impl Rebuilder<'_> {
    fn text(&mut self, parent: NodeId, text: &str) {
        self.out.append_text(parent, text).expect("parent is an element");
    }

    /// Text standing in for an element, padded so it never fuses with words.
    fn substitute(&mut self, parent: NodeId, text: Option<&str>) {
        let text = collapse_whitespace(text.unwrap_or_default());
        if !text.is_empty() {
            self.text(parent, &format!(" {text} "));
        }
    }

    fn element(&mut self, parent: NodeId, src: NodeId, tag: &str) -> NodeId {
        let node = self.src.node(src);
        let mut attrs: Vec<(&str, &str)> = node
            .attrs()
            .iter()
            .filter(|(n, _)| allowed_attr(tag, n) || n.starts_with("aria-") && n != "aria-hidden")
            .map(|(n, v)| (n.as_str(), v.as_str()))
            .collect();
        // The title attribute is dropped, so a control named only by it keeps
        // the name as a label.
        let title_name = is_interactive(node)
            .then(|| self.names.title_only_name(src))
            .flatten()
            .filter(|_| !attrs.iter().any(|(n, _)| *n == "aria-label"));
        if let Some(name) = &title_name {
            attrs.push(("aria-label", name));
        }
        if let Some(id) = node.attr("id") {
            if self.referenced.contains(id) && self.emitted_ids.insert(id.to_string()) {
                attrs.insert(0, ("id", id));
            }
        }
        let created = self.out.append_element(parent, tag, &attrs).expect("parent is an element");
        self.origin.insert(created, src);
        created
    }

    fn children(&mut self, src: NodeId, parent: NodeId) {
        let kids: Vec<NodeId> = self.src.children(src).to_vec();
        let mut i = 0;
        while i < kids.len() {
            let run = self.category_run(&kids[i..]);
            if run.len() >= CATEGORY_RUN {
                self.categories(parent, &run);
                i += run.iter().map(|(consumed, _)| consumed).sum::<usize>();
                continue;
            }
            self.node(kids[i], parent);
            i += 1;
        }
    }

    /// Leading link-only headings of `kids`, with the number of siblings each
    /// consumes (blank text and comments before it included).
    fn category_run(&self, kids: &[NodeId]) -> Vec<(usize, NodeId)> {
        let mut run = Vec::new();
        let mut skipped = 0;
        for &kid in kids {
            let node = self.src.node(kid);
            let blank = match &node.data {
                NodeData::Text(t) => t.trim().is_empty(),
                NodeData::Comment(_) => true,
                _ => false,
            };
            if blank {
                skipped += 1;
                continue;
            }
            if hides_subtree(node) || link_only_heading(self.src, kid).is_none() {
                break;
            }
            run.push((skipped + 1, kid));
            skipped = 0;
        }
        run
    }

    fn categories(&mut self, parent: NodeId, run: &[(usize, NodeId)]) {
        let heading = self.out.append_element(parent, "h2", &[]).expect("parent is an element");
        self.out.append_text(heading, CATEGORIES_HEADING).expect("heading is an element");
        let list = self.out.append_element(parent, "ul", &[]).expect("parent is an element");
        for &(_, h) in run {
            let link = link_only_heading(self.src, h).expect("run holds link-only headings");
            let item = self.out.append_element(list, "li", &[]).expect("ul is an element");
            let a = self.element(item, link, "a");
            let text = self.names.visible_text(link);
            self.out.append_text(a, &text).expect("a is an element");
        }
    }

    fn node(&mut self, src: NodeId, parent: NodeId) {
        let node = self.src.node(src);
        if let NodeData::Text(t) = &node.data {
            return self.text(parent, t);
        }
        let Some(tag) = node.tag() else {
            return;
        };
        if hides_subtree(node) || DROPPED.contains(&tag) {
            return;
        }
        match tag {
            "img" => return self.substitute(parent, node.attr("alt")),
            "input" if node.attr("type").is_some_and(|t| t.trim().eq_ignore_ascii_case("image")) => {
                return self.substitute(parent, node.attr("alt"));
            }
            "svg" | "math" => {
                let text = node
                    .attr("aria-label")
                    .map(str::to_string)
                    .unwrap_or_else(|| self.names.visible_text(src));
                return self.substitute(parent, Some(&text));
            }
            _ => {}
        }
        let mut out_tag = if KEPT.contains(&tag) {
            tag
        } else if AS_DIV.contains(&tag) {
            "div"
        } else {
            "span"
        };
        if out_tag == "h1" {
            if self.seen_h1 {
                out_tag = "h2";
            }
            self.seen_h1 = true;
        }
        let created = self.element(parent, src, out_tag);
        self.children(src, created);
    }
}

fn document_title(doc: &Document) -> Option<String> {
    let title = doc.descendants(doc.root()).find(|id| {
        doc.node(*id).is_element("title")
            && !doc
                .ancestors(*id)
                .any(|a| matches!(doc.tag(a), Some("svg") | Some("math")))
    })?;
    let text = collapse_whitespace(&doc.text_content(title));
    (!text.is_empty()).then_some(text)
}

fn skeleton(src: &Document) -> Document {
    let lang = src
        .attr(src.root(), "lang")
        .map(|l| format!(" lang=\"{}\"", escape_attr(l)))
        .unwrap_or_default();
    let title = document_title(src)
        .map(|t| format!("<title>{}</title>", escape_text(&t)))
        .unwrap_or_default();
    parse(&format!(
        "<!DOCTYPE html><html{lang}><head><meta charset=\"utf-8\">{title}</head><body><main></main></body></html>"
    ))
}

/// Rebuild `src` as plain, screen-reader-friendly HTML.
pub fn offline_regenerate(src: &Document) -> String {
    let out = skeleton(src);
    let main = out
        .descendants(out.root())
        .find(|id| out.node(*id).is_element("main"))
        .expect("skeleton has main");
    let mut rb = Rebuilder {
        src,
        names: NameResolver::new(src),
        referenced: referenced_ids(src),
        out,
        emitted_ids: HashSet::new(),
        seen_h1: false,
        origin: HashMap::new(),
    };
    // Placeholder for a page without an h1 of its own.
    let title_h1 = rb.out.append_element(main, "h1", &[]).expect("main is an element");
    if let Some(body) = src.body() {
        rb.children(body, main);
    }
    match document_title(src).filter(|_| !rb.seen_h1) {
        Some(title) => {
            rb.out.append_text(title_h1, &title).expect("h1 is an element");
        }
        None => rb.out.detach(title_h1).expect("placeholder exists"),
    }
    repair(&mut rb);
    rb.out.to_html()
}

/// Fix what the audit still reports on the rebuilt page, using names from
/// the source where the copy lost them.
fn repair(rb: &mut Rebuilder<'_>) {
    // Dangling references point at ids that were not carried over.
    let out = &mut rb.out;
    let ids: HashSet<String> = out
        .descendants(out.root())
        .filter_map(|i| out.attr(i, "id").map(str::to_string))
        .collect();
    let all: Vec<NodeId> = out.descendants(out.root()).collect();
    for id in &all {
        for attr in ["for", "aria-labelledby", "aria-describedby", "headers"] {
            if let Some(value) = out.attr(*id, attr) {
                let kept: Vec<&str> = value.split_whitespace().filter(|v| ids.contains(*v)).collect();
                let kept = kept.join(" ");
                if kept.is_empty() {
                    out.remove_attr(*id, attr).expect("element");
                } else if kept != value {
                    out.set_attr(*id, attr, &kept).expect("element");
                }
            }
        }
    }

    let report = run_audit(&rb.out);
    let mut remove = Vec::new();
    for v in &report.violations {
        let Some(id) = rb.out.resolve_path(&v.path) else {
            continue;
        };
        let source = rb.origin.get(&id).copied();
        let source_name = source.and_then(|s| rb.names.name(s).ok().flatten());
        match v.rule_id.as_str() {
            // Nameless links come back through link reinsertion.
            "LINK-NAME" | "CTRL-NAME" => match source_name {
                Some(name) => rb.text(id, &name),
                None => remove.push(id),
            },
            "H-EMPTY" => remove.push(id),
            "LABEL-CTRL" => {
                let node = source.map(|s| rb.src.node(s));
                let label = node.and_then(|n| {
                    ["placeholder", "title", "name"]
                        .iter()
                        .filter_map(|a| n.attr(a))
                        .map(collapse_whitespace)
                        .find(|l| !l.is_empty())
                });
                if let Some(label) = label {
                    rb.out.set_attr(id, "aria-label", &label).expect("element");
                }
            }
            _ => {}
        }
    }
    for id in remove {
        rb.out.detach(id).expect("node exists");
    }

    let headings: Vec<(NodeId, u8)> = rb
        .out
        .descendants(rb.out.root())
        .filter_map(|id| heading_level(rb.out.node(id)).map(|l| (id, l)))
        .collect();
    let levels: Vec<u8> = headings.iter().map(|(_, l)| *l).collect();
    for ((id, old), new) in headings.iter().zip(renumber_levels(&levels)) {
        if new != *old {
            rb.out.set_tag(*id, &format!("h{new}")).expect("heading exists");
        }
    }
}

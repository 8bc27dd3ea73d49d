//! Screen-reader-accessible content of a document.
//!
//! Visibility is judged from markup alone: `aria-hidden="true"`, the `hidden`
//! attribute and inline `display:none` remove a subtree, as do `script`,
//! `style`, `template` and `noscript`. Only the body is considered.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dom::{collapse_whitespace, DomError, DomNode, Document, NodeData, NodeId};

pub const EXCLUDED_ELEMENTS: &[&str] = &["script", "style", "template", "noscript"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemKind {
    VisibleText,
    AriaLabel,
    AltText,
    TitleAttr,
    ControlName,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessibleItem {
    pub path: String,
    pub kind: ItemKind,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessibleContent {
    pub items: Vec<AccessibleItem>,
    pub concatenated: String,
}

impl AccessibleContent {
    pub fn from_items(items: Vec<AccessibleItem>) -> Self {
        let concatenated = items
            .iter()
            .map(|i| i.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        AccessibleContent {
            items,
            concatenated,
        }
    }

    /// Item texts, sorted; the multiset view used by integrity checks.
    pub fn sorted_texts(&self) -> Vec<&str> {
        let mut texts: Vec<&str> = self.items.iter().map(|i| i.text.as_str()).collect();
        texts.sort_unstable();
        texts
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// True for an element that hides itself and its subtree from assistive
/// technology.
pub fn hides_subtree(node: &DomNode) -> bool {
    let Some(tag) = node.tag() else {
        return false;
    };
    if EXCLUDED_ELEMENTS.contains(&tag) {
        return true;
    }
    if node
        .attr("aria-hidden")
        .is_some_and(|v| v.trim().eq_ignore_ascii_case("true"))
    {
        return true;
    }
    if node.attr("hidden").is_some() {
        return true;
    }
    if tag == "input"
        && node
            .attr("type")
            .is_some_and(|t| t.trim().eq_ignore_ascii_case("hidden"))
    {
        return true;
    }
    node.attr("style").is_some_and(|style| {
        let compact: String = style
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_ascii_lowercase();
        compact.contains("display:none")
    })
}

/// Whether `id` or any ancestor hides it.
pub fn is_hidden(doc: &Document, id: NodeId) -> bool {
    std::iter::once(id)
        .chain(doc.ancestors(id))
        .any(|n| hides_subtree(doc.node(n)))
}

/// Visible nodes under `start` (pre-order), skipping hidden subtrees.
pub fn visible_descendants(doc: &Document, start: NodeId) -> Vec<NodeId> {
    let mut out = Vec::new();
    let mut stack = vec![start];
    while let Some(id) = stack.pop() {
        let node = doc.node(id);
        if hides_subtree(node) {
            continue;
        }
        out.push(id);
        stack.extend(node.children.iter().rev().copied());
    }
    out
}

fn non_empty(s: Option<&str>) -> Option<String> {
    s.map(collapse_whitespace).filter(|s| !s.is_empty())
}

fn is_image_like(node: &DomNode) -> bool {
    match node.tag() {
        Some("img") | Some("area") => true,
        Some("input") => node
            .attr("type")
            .is_some_and(|t| t.trim().eq_ignore_ascii_case("image")),
        _ => false,
    }
}

fn button_input_value(node: &DomNode) -> Option<String> {
    if node.tag() != Some("input") {
        return None;
    }
    let ty = node.attr("type")?.trim().to_ascii_lowercase();
    if matches!(ty.as_str(), "submit" | "button" | "reset") {
        non_empty(node.attr("value"))
    } else {
        None
    }
}

/// Elements a screen reader user can activate.
pub fn is_interactive(node: &DomNode) -> bool {
    match node.tag() {
        Some("a") | Some("area") => node.attr("href").is_some(),
        Some("button") | Some("select") | Some("textarea") | Some("summary") => true,
        Some("input") => !node
            .attr("type")
            .is_some_and(|t| t.trim().eq_ignore_ascii_case("hidden")),
        Some(_) => node.attr("role").is_some_and(|r| {
            r.split_whitespace().any(|t| {
                matches!(
                    t,
                    "button" | "link" | "checkbox" | "menuitem" | "tab" | "switch" | "option"
                )
            })
        }),
        None => false,
    }
}

/// Which rule of the name precedence produced an accessible name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NameSource {
    AriaLabel,
    LabelledBy,
    ImageAlt,
    Title,
    Content,
}

/// Accessible-name computation with a per-document id index.
///
/// Precedence: `aria-label`, `aria-labelledby` targets (in reference order),
/// alt of the element itself or of a sole descendant image, `title`, then
/// collapsed descendant text.
pub struct NameResolver<'a> {
    doc: &'a Document,
    ids: HashMap<&'a str, NodeId>,
}

impl<'a> NameResolver<'a> {
    pub fn new(doc: &'a Document) -> Self {
        let mut ids = HashMap::new();
        for n in doc.descendants(doc.root()) {
            if let Some(id) = doc.node(n).attr("id") {
                ids.entry(id).or_insert(n);
            }
        }
        NameResolver { doc, ids }
    }

    /// First element carrying the given `id` attribute value.
    pub fn element_by_id(&self, id: &str) -> Option<NodeId> {
        self.ids.get(id).copied()
    }

    /// Collapsed visible text below `id`.
    pub fn visible_text(&self, id: NodeId) -> String {
        let mut parts = Vec::new();
        for n in visible_descendants(self.doc, id) {
            if let NodeData::Text(t) = &self.doc.node(n).data {
                parts.push(t.as_str());
            }
        }
        collapse_whitespace(&parts.join(" "))
    }

    pub fn labelledby_text(&self, node: &DomNode) -> Option<String> {
        let refs = node.attr("aria-labelledby")?;
        let joined = refs
            .split_whitespace()
            .filter_map(|r| self.element_by_id(r))
            .map(|target| {
                non_empty(self.doc.node(target).attr("aria-label"))
                    .unwrap_or_else(|| self.visible_text(target))
            })
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ");
        (!joined.is_empty()).then_some(joined)
    }

    fn image_alt(&self, id: NodeId) -> Option<String> {
        let node = self.doc.node(id);
        if is_image_like(node) {
            return non_empty(node.attr("alt"));
        }
        let mut images = visible_descendants(self.doc, id)
            .into_iter()
            .skip(1)
            .filter(|n| is_image_like(self.doc.node(*n)));
        let first = images.next()?;
        if images.next().is_some() {
            return None;
        }
        non_empty(self.doc.node(first).attr("alt"))
    }

    pub fn name_with_source(&self, id: NodeId) -> Result<Option<(String, NameSource)>, DomError> {
        let node = self.doc.get(id).ok_or(DomError::UnknownNode(id))?;
        if node.tag().is_none() {
            return Err(DomError::NotAnElement(id));
        }
        if let Some(label) = non_empty(node.attr("aria-label")) {
            return Ok(Some((label, NameSource::AriaLabel)));
        }
        if let Some(label) = self.labelledby_text(node) {
            return Ok(Some((label, NameSource::LabelledBy)));
        }
        if let Some(alt) = self.image_alt(id) {
            return Ok(Some((alt, NameSource::ImageAlt)));
        }
        if let Some(title) = non_empty(node.attr("title")) {
            return Ok(Some((title, NameSource::Title)));
        }
        if let Some(value) = button_input_value(node) {
            return Ok(Some((value, NameSource::Content)));
        }
        let text = self.visible_text(id);
        Ok((!text.is_empty()).then_some((text, NameSource::Content)))
    }

    /// The `title` attribute when it is the element's only name source.
    pub fn title_only_name(&self, id: NodeId) -> Option<String> {
        match self.name_with_source(id) {
            Ok(Some((title, NameSource::Title))) => {
                self.visible_text(id).is_empty().then_some(title)
            }
            _ => None,
        }
    }

    pub fn name(&self, id: NodeId) -> Result<Option<String>, DomError> {
        Ok(self.name_with_source(id)?.map(|(n, _)| n))
    }
}

/// Accessible name of one element. Builds an id index per call; use
/// [`NameResolver`] when resolving many names in one document.
pub fn accessible_name(doc: &Document, id: NodeId) -> Result<Option<String>, DomError> {
    NameResolver::new(doc).name(id)
}

/// Everything a screen reader can announce from the body, in document order.
pub fn extract_accessible(doc: &Document) -> AccessibleContent {
    let Some(body) = doc.body() else {
        return AccessibleContent::default();
    };
    let resolver = NameResolver::new(doc);
    let mut items = Vec::new();
    let mut push = |id: NodeId, kind: ItemKind, text: String| {
        let path = doc.node_path(id).unwrap_or_default();
        items.push(AccessibleItem { path, kind, text });
    };
    for id in visible_descendants(doc, body) {
        let node = doc.node(id);
        match &node.data {
            NodeData::Text(t) => {
                let text = collapse_whitespace(t);
                if !text.is_empty() {
                    push(id, ItemKind::VisibleText, text);
                }
            }
            NodeData::Element { .. } => {
                if let Some(label) = non_empty(node.attr("aria-label")) {
                    push(id, ItemKind::AriaLabel, label);
                }
                if is_image_like(node) {
                    if let Some(alt) = non_empty(node.attr("alt")) {
                        push(id, ItemKind::AltText, alt);
                    }
                }
                if let Some(value) = button_input_value(node) {
                    push(id, ItemKind::ControlName, value);
                }
                if is_interactive(node) {
                    if let Some(title) = resolver.title_only_name(id) {
                        push(id, ItemKind::TitleAttr, title);
                    }
                }
            }
            _ => {}
        }
    }
    AccessibleContent::from_items(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::parse;

    fn first_in_body(doc: &Document) -> NodeId {
        doc.child_elements(doc.body().unwrap()).next().unwrap()
    }

    fn kinds_and_texts(content: &AccessibleContent) -> Vec<(ItemKind, &str)> {
        content
            .items
            .iter()
            .map(|i| (i.kind, i.text.as_str()))
            .collect()
    }

    #[test]
    fn aria_label_on_empty_button() {
        let doc = parse(r#"<button aria-label="Add item to cart"></button>"#);
        let content = extract_accessible(&doc);
        assert_eq!(
            kinds_and_texts(&content),
            vec![(ItemKind::AriaLabel, "Add item to cart")]
        );
    }

    #[test]
    fn style_excluded_and_whitespace_collapsed() {
        let doc = parse("<style>p{}</style><p> hi  there </p>");
        let content = extract_accessible(&doc);
        assert_eq!(
            kinds_and_texts(&content),
            vec![(ItemKind::VisibleText, "hi there")]
        );
        assert_eq!(content.concatenated, "hi there");
    }

    #[test]
    fn hidden_subtrees_are_skipped() {
        let doc = parse(
            r#"<div aria-hidden="true">a</div><div hidden>b</div><div style="DISPLAY: none">c</div>
               <noscript>d</noscript><template>e</template><p>f</p>"#,
        );
        assert_eq!(extract_accessible(&doc).concatenated, "f");
    }

    #[test]
    fn title_only_counts_for_unnamed_controls() {
        let doc = parse(
            r#"<a href="/a" title="Cart"></a><a href="/b" title="Ignored">Shop</a><span title="Nope">x</span>"#,
        );
        assert_eq!(
            kinds_and_texts(&extract_accessible(&doc)),
            vec![
                (ItemKind::TitleAttr, "Cart"),
                (ItemKind::VisibleText, "Shop"),
                (ItemKind::VisibleText, "x"),
            ]
        );
    }

    #[test]
    fn alt_and_button_values() {
        let doc = parse(
            r#"<img src=a alt=" Blue  shirt "><input type=image alt="Go"><input type=submit value="Buy">"#,
        );
        assert_eq!(
            kinds_and_texts(&extract_accessible(&doc)),
            vec![
                (ItemKind::AltText, "Blue shirt"),
                (ItemKind::AltText, "Go"),
                (ItemKind::ControlName, "Buy"),
            ]
        );
    }

    #[test]
    fn head_content_is_not_extracted() {
        let doc = parse("<title>Shop</title><p>x</p>");
        assert_eq!(extract_accessible(&doc).concatenated, "x");
    }

    #[test]
    fn name_from_sole_image_alt() {
        let doc = parse(r#"<a href="/x"><img alt="Blue shirt"></a>"#);
        assert_eq!(
            accessible_name(&doc, first_in_body(&doc)).unwrap().as_deref(),
            Some("Blue shirt")
        );
    }

    #[test]
    fn empty_button_has_no_name() {
        let doc = parse("<button></button>");
        assert_eq!(accessible_name(&doc, first_in_body(&doc)).unwrap(), None);
    }

    #[test]
    fn name_from_labelledby() {
        let doc = parse(r#"<button aria-labelledby="t"></button><span id="t">Buy now</span>"#);
        assert_eq!(
            accessible_name(&doc, first_in_body(&doc)).unwrap().as_deref(),
            Some("Buy now")
        );
    }

    #[test]
    fn precedence_order() {
        let doc = parse(
            r#"<button aria-label="A" aria-labelledby="l" title="T">text</button><b id=l>L</b>
               <button aria-labelledby="l missing" title="T">text</button>
               <button title="T">text</button>
               <button>  some   text </button>
               <button><img alt="one"><img alt="two"></button>"#,
        );
        let resolver = NameResolver::new(&doc);
        let names: Vec<_> = doc
            .child_elements(doc.body().unwrap())
            .filter(|b| doc.tag(*b) == Some("button"))
            .map(|b| resolver.name(b).unwrap())
            .collect();
        assert_eq!(
            names,
            vec![
                Some("A".to_string()),
                Some("L".to_string()),
                Some("T".to_string()),
                Some("some text".to_string()),
                None,
            ]
        );
    }

    #[test]
    fn name_errors_on_unknown_or_text_nodes() {
        let doc = parse("<p>t</p>");
        assert!(accessible_name(&doc, NodeId(999)).is_err());
        let text = doc.children(first_in_body(&doc))[0];
        assert!(accessible_name(&doc, text).is_err());
    }

    #[test]
    fn extraction_is_repeatable() {
        let doc = parse(r#"<main><h1>A</h1><img alt="b"><a href=x aria-label="c">d</a></main>"#);
        assert_eq!(extract_accessible(&doc), extract_accessible(&doc));
    }
}

//! JSON tag records: the page as the reorganize model sees it.

use serde::{Deserialize, Serialize};

use crate::audit::heading_level;
use crate::dom::{collapse_whitespace, Document, DomNode, NodeId};
use crate::extract::EXCLUDED_ELEMENTS;

const CONTROL_TAGS: &[&str] = &["a", "button", "img", "input", "select", "textarea"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagRecord {
    pub node: NodeId,
    pub tag: String,
    pub id: Option<String>,
    pub classes: Vec<String>,
    /// Remaining attributes as `[name, value]` pairs, in source order.
    pub attributes: Vec<(String, String)>,
    /// Direct child text, whitespace collapsed.
    pub text: String,
}

fn direct_text(doc: &Document, id: NodeId) -> String {
    let parts: Vec<&str> = doc
        .children(id)
        .iter()
        .filter_map(|c| doc.node(*c).text())
        .collect();
    collapse_whitespace(&parts.join(" "))
}

fn wants_record(node: &DomNode, text: &str) -> bool {
    !text.is_empty()
        || heading_level(node).is_some()
        || node.tag().is_some_and(|t| CONTROL_TAGS.contains(&t))
}

/// Records for body elements with their own text, plus every heading, link,
/// button, image and form control. Script-like subtrees are skipped.
pub fn tag_records(doc: &Document) -> Vec<TagRecord> {
    let Some(body) = doc.body() else {
        return Vec::new();
    };
    let mut records = Vec::new();
    let mut stack = vec![body];
    while let Some(id) = stack.pop() {
        let node = doc.node(id);
        let Some(tag) = node.tag() else {
            continue;
        };
        if EXCLUDED_ELEMENTS.contains(&tag) {
            continue;
        }
        stack.extend(node.children.iter().rev().copied());
        if id == body {
            continue;
        }
        let text = direct_text(doc, id);
        if !wants_record(node, &text) {
            continue;
        }
        records.push(TagRecord {
            node: id,
            tag: tag.to_string(),
            id: node.attr("id").map(str::to_string),
            classes: node
                .attr("class")
                .map(|c| c.split_whitespace().map(str::to_string).collect())
                .unwrap_or_default(),
            attributes: node
                .attrs()
                .iter()
                .filter(|(n, _)| n != "id" && n != "class")
                .cloned()
                .collect(),
            text,
        });
    }
    records
}

pub fn serialize_tag_records(doc: &Document) -> String {
    serde_json::to_string(&tag_records(doc)).expect("records serialize")
}

/// Split records into JSON arrays of at most `budget` estimated tokens. A
/// record too large on its own gets an array to itself.
pub fn record_parts(records: &[TagRecord], budget: usize) -> Vec<String> {
    let mut parts = Vec::new();
    let mut current: Vec<String> = Vec::new();
    // Bytes of "[" + "]" plus one separator per record, counted generously.
    let mut size = 2;
    for record in records {
        let json = serde_json::to_string(record).expect("records serialize");
        let cost = json.len() + 1;
        if !current.is_empty() && (size + cost).div_ceil(4) > budget {
            parts.push(format!("[{}]", current.join(",")));
            current.clear();
            size = 2;
        }
        size += cost;
        current.push(json);
    }
    if !current.is_empty() {
        parts.push(format!("[{}]", current.join(",")));
    }
    parts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::parse;

    #[test]
    fn heading_record() {
        let doc = parse(r#"<h2 id=t class="a b">Hi</h2>"#);
        let json = serialize_tag_records(&doc);
        let h2 = doc
            .descendants(doc.root())
            .find(|i| doc.node(*i).is_element("h2"))
            .unwrap();
        assert_eq!(
            json,
            format!(r#"[{{"node":{h2},"tag":"h2","id":"t","classes":["a","b"],"attributes":[],"text":"Hi"}}]"#)
        );
    }

    #[test]
    fn whitespace_only_containers_have_no_record() {
        let doc = parse("<div>  <span> </span>\n</div>");
        assert!(tag_records(&doc).is_empty());
    }

    #[test]
    fn controls_always_have_records() {
        let doc = parse(r#"<div><img src=x><input name=q><a href=/></a></div>"#);
        let tags: Vec<String> = tag_records(&doc).into_iter().map(|r| r.tag).collect();
        assert_eq!(tags, ["img", "input", "a"]);
    }

    #[test]
    fn attributes_exclude_id_and_class() {
        let doc = parse(r#"<a id=x class=y href="/p" title="t">go</a>"#);
        let r = &tag_records(&doc)[0];
        assert_eq!(
            r.attributes,
            vec![("href".to_string(), "/p".to_string()), ("title".to_string(), "t".to_string())]
        );
    }

    #[test]
    fn output_is_deterministic() {
        let html = "<p>a <b>b</b> c</p><script>x</script>";
        assert_eq!(
            serialize_tag_records(&parse(html)),
            serialize_tag_records(&parse(html))
        );
        assert!(!serialize_tag_records(&parse(html)).contains("script"));
    }

    #[test]
    fn parts_respect_budget() {
        let body: String = (0..50).map(|i| format!("<p>paragraph number {i}</p>")).collect();
        let records = tag_records(&parse(&body));
        let parts = record_parts(&records, 64);
        assert!(parts.len() > 1);
        let mut total = 0;
        for p in &parts {
            let v: Vec<TagRecord> = serde_json::from_str(p).unwrap();
            total += v.len();
            assert!(crate::chunker::estimate_tokens(p) <= 64);
        }
        assert_eq!(total, records.len());
    }
}

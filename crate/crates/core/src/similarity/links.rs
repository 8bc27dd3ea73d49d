//! Detection and reinsertion of links lost during regeneration.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dom::{Document, NodeId};
use crate::extract::NameResolver;

pub const ADDITIONAL_LINKS_HEADING: &str = "Additional links";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MissingAnchor {
    pub href: String,
    pub text: String,
}

/// Trim, drop the fragment, and case-fold the scheme and host.
pub fn normalize_href(href: &str) -> String {
    let trimmed = href.trim();
    let without_fragment = trimmed.split('#').next().unwrap_or_default();

    let scheme_end = without_fragment.find(':').filter(|&i| {
        let scheme = &without_fragment[..i];
        let mut chars = scheme.chars();
        chars.next().is_some_and(|c| c.is_ascii_alphabetic())
            && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
    });
    let (scheme, rest) = match scheme_end {
        Some(i) => (
            without_fragment[..=i].to_ascii_lowercase(),
            &without_fragment[i + 1..],
        ),
        None => (String::new(), without_fragment),
    };
    let Some(after_slashes) = rest.strip_prefix("//") else {
        return format!("{scheme}{rest}");
    };
    let host_end = after_slashes
        .find(['/', '?'])
        .unwrap_or(after_slashes.len());
    format!(
        "{scheme}//{}{}",
        after_slashes[..host_end].to_ascii_lowercase(),
        &after_slashes[host_end..]
    )
}

fn anchors(doc: &Document) -> impl Iterator<Item = (NodeId, &str)> + '_ {
    let body = doc.body();
    body.into_iter()
        .flat_map(move |b| doc.descendants(b))
        .filter(move |id| {
            !doc.ancestors(*id)
                .any(|a| doc.node(a).is_element("template"))
        })
        .filter_map(move |id| {
            let node = doc.node(id);
            if node.is_element("a") {
                node.attr("href").map(|h| (id, h))
            } else {
                None
            }
        })
}

fn present_hrefs(doc: &Document) -> HashSet<String> {
    anchors(doc).map(|(_, h)| normalize_href(h)).collect()
}

/// Anchors of `original` whose normalized href appears on no anchor of
/// `generated`. Pure in-page fragment links are ignored; duplicates of the
/// same (href, name) pair are reported once.
pub fn find_missing_links(original: &Document, generated: &Document) -> Vec<MissingAnchor> {
    let present = present_hrefs(generated);
    let names = NameResolver::new(original);
    let mut seen = HashSet::new();
    let mut missing = Vec::new();
    for (id, href) in anchors(original) {
        let normalized = normalize_href(href);
        if normalized.is_empty() || present.contains(&normalized) {
            continue;
        }
        let text = names.name(id).ok().flatten().unwrap_or_default();
        if seen.insert((normalized, text.clone())) {
            missing.push(MissingAnchor {
                href: href.trim().to_string(),
                text,
            });
        }
    }
    missing
}

/// Append an "Additional links" navigation block holding every entry of
/// `missing` not already linked from `generated`. Returns an unchanged copy
/// when nothing needs adding.
pub fn reinsert_links(generated: &Document, missing: &[MissingAnchor]) -> Document {
    let mut doc = generated.clone();
    let present = present_hrefs(&doc);
    let mut added = HashSet::new();
    let todo: Vec<&MissingAnchor> = missing
        .iter()
        .filter(|m| {
            let n = normalize_href(&m.href);
            !present.contains(&n) && added.insert(n)
        })
        .collect();
    let Some(body) = doc.body() else {
        return doc;
    };
    if todo.is_empty() {
        return doc;
    }
    let nav = doc
        .append_element(body, "nav", &[("aria-label", ADDITIONAL_LINKS_HEADING)])
        .expect("body is an element");
    let heading = doc.append_element(nav, "h2", &[]).expect("nav is an element");
    doc.append_text(heading, ADDITIONAL_LINKS_HEADING)
        .expect("heading is an element");
    let list = doc.append_element(nav, "ul", &[]).expect("nav is an element");
    for anchor in todo {
        let item = doc.append_element(list, "li", &[]).expect("ul is an element");
        let link = doc
            .append_element(item, "a", &[("href", anchor.href.as_str())])
            .expect("li is an element");
        // A nameless original link gets its address as text so the
        // reinserted copy stays announceable.
        let text = if anchor.text.is_empty() {
            &anchor.href
        } else {
            &anchor.text
        };
        doc.append_text(link, text).expect("a is an element");
    }
    doc
}

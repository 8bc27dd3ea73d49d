//! Deterministic tag fixes used in place of a model for Option 2.

use std::collections::{BTreeMap, HashSet};

use crate::audit::{heading_level, visible_headings};
use crate::dom::{collapse_whitespace, Document, NodeData, NodeId};
use crate::extract::{is_interactive, visible_descendants, NameResolver, NameSource};

use super::patch::{apply_patches, TagPatch};

/// Share of the visible text characters an element must hold to become the
/// main landmark.
pub const MAIN_TEXT_SHARE: f64 = 0.60;

/// Minimum number of link-only headings under one container before they are
/// treated as a category list.
pub const CATEGORY_RUN: usize = 3;

const LIST_CONTAINERS: &[&str] = &["ul", "ol", "nav", "menu"];
const MAIN_CANDIDATES: &[&str] = &["div", "section", "article"];

/// Levels with every skip removed. Each heading keeps its level unless that
/// would put it more than one below the closest earlier heading of a
/// strictly higher rank; applying the function twice changes nothing.
pub fn renumber_levels(levels: &[u8]) -> Vec<u8> {
    // (original, renumbered) of the open outline, ranks strictly increasing.
    let mut stack: Vec<(u8, u8)> = Vec::new();
    let mut out = Vec::with_capacity(levels.len());
    for &level in levels {
        while stack.last().is_some_and(|&(orig, _)| orig >= level) {
            stack.pop();
        }
        let new = match stack.last() {
            Some(&(_, parent)) => level.min(parent + 1),
            None => level,
        };
        stack.push((level, new));
        out.push(new);
    }
    out
}

/// Anchor of a heading whose whole text is the text of its only link.
pub fn link_only_heading(doc: &Document, heading: NodeId) -> Option<NodeId> {
    heading_level(doc.node(heading))?;
    let mut links = doc
        .descendants(heading)
        .filter(|d| doc.node(*d).is_element("a") && doc.node(*d).attr("href").is_some());
    let link = links.next()?;
    if links.next().is_some() {
        return None;
    }
    let names = NameResolver::new(doc);
    let text = names.visible_text(heading);
    (!text.is_empty() && text == names.visible_text(link)).then_some(link)
}

/// Link-only headings sharing a list or nav container with at least
/// [`CATEGORY_RUN`] - 1 others, in document order.
fn category_headings(doc: &Document, headings: &[(NodeId, u8)]) -> Vec<NodeId> {
    let mut groups: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &(h, _) in headings {
        let container = doc
            .ancestors(h)
            .find(|a| doc.tag(*a).is_some_and(|t| LIST_CONTAINERS.contains(&t)));
        if let Some(container) = container {
            if link_only_heading(doc, h).is_some() {
                groups.entry(container).or_default().push(h);
            }
        }
    }
    let mut out: Vec<NodeId> = groups
        .into_values()
        .filter(|g| g.len() >= CATEGORY_RUN)
        .flatten()
        .collect();
    let order: BTreeMap<NodeId, usize> = headings.iter().enumerate().map(|(i, (h, _))| (*h, i)).collect();
    out.sort_by_key(|h| order[h]);
    out
}

fn is_button_like(doc: &Document, id: NodeId) -> bool {
    let node = doc.node(id);
    node.is_element("button")
        || (node.is_element("a") && node.attr("href").is_some())
        || node
            .attr("role")
            .is_some_and(|r| r.split_whitespace().any(|t| t.eq_ignore_ascii_case("button")))
}

/// Controls whose only name comes from `title` or a sole image's alt.
fn unlabeled_controls(doc: &Document) -> Vec<(NodeId, String)> {
    let Some(body) = doc.body() else {
        return Vec::new();
    };
    let names = NameResolver::new(doc);
    visible_descendants(doc, body)
        .into_iter()
        .filter(|id| doc.node(*id).tag().is_some() && is_button_like(doc, *id))
        .filter(|id| names.visible_text(*id).is_empty())
        .filter_map(|id| match names.name_with_source(id) {
            Ok(Some((name, NameSource::Title | NameSource::ImageAlt))) => Some((id, name)),
            _ => None,
        })
        .collect()
}

fn has_main(doc: &Document) -> bool {
    doc.descendants(doc.root()).any(|id| {
        let node = doc.node(id);
        node.is_element("main")
            || node
                .attr("role")
                .is_some_and(|r| r.split_whitespace().any(|t| t.eq_ignore_ascii_case("main")))
    })
}

fn text_chars(text: &str) -> usize {
    text.chars().filter(|c| !c.is_whitespace()).count()
}

/// Deepest eligible container holding more than [`MAIN_TEXT_SHARE`] of the
/// body's visible text characters.
pub fn main_candidate(doc: &Document) -> Option<NodeId> {
    let body = doc.body()?;
    let visible: Vec<NodeId> = visible_descendants(doc, body);
    let visible_set: HashSet<NodeId> = visible.iter().copied().collect();
    let mut chars: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut total = 0;
    for &id in &visible {
        if let NodeData::Text(t) = &doc.node(id).data {
            let n = text_chars(t);
            if n == 0 {
                continue;
            }
            total += n;
            for a in doc.ancestors(id) {
                if a == body {
                    break;
                }
                *chars.entry(a).or_default() += n;
            }
        }
    }
    if total == 0 {
        return None;
    }
    // Elements above the share form a chain; the deepest has the most ancestors.
    let deepest = chars
        .iter()
        .filter(|(id, n)| visible_set.contains(id) && **n as f64 > MAIN_TEXT_SHARE * total as f64)
        .max_by_key(|(id, _)| doc.ancestors(**id).count())
        .map(|(id, _)| *id)?;
    std::iter::once(deepest)
        .chain(doc.ancestors(deepest))
        .take_while(|a| *a != body)
        .find(|a| {
            let node = doc.node(*a);
            node.tag().is_some_and(|t| MAIN_CANDIDATES.contains(&t))
                && node.attr("role").is_none()
                && !is_interactive(node)
                && heading_level(node).is_none()
        })
}

fn merge(patches: &mut Vec<TagPatch>, patch: TagPatch) {
    match patches.iter_mut().find(|p| p.node == patch.node) {
        Some(existing) => {
            if patch.new_tag.is_some() {
                existing.new_tag = patch.new_tag;
            }
            existing.set_attributes.extend(patch.set_attributes);
            existing.remove_attributes.extend(patch.remove_attributes);
        }
        None => patches.push(patch),
    }
}

/// Patches for every fix that applies, at most one per node, ordered by the
/// rule that first touched the node.
pub fn offline_reorganize(doc: &Document) -> Vec<TagPatch> {
    let headings = visible_headings(doc);
    let categories = category_headings(doc, &headings);
    let demoted: HashSet<NodeId> = categories.iter().copied().collect();

    let mut patches: Vec<TagPatch> = Vec::new();

    let outline: Vec<(NodeId, u8)> = headings
        .iter()
        .copied()
        .filter(|(h, _)| !demoted.contains(h))
        .collect();
    let levels: Vec<u8> = outline.iter().map(|(_, l)| *l).collect();
    for ((id, old), new) in outline.iter().zip(renumber_levels(&levels)) {
        if new != *old {
            merge(&mut patches, TagPatch::rename(*id, &format!("h{new}")));
        }
    }
    for h in categories {
        merge(&mut patches, TagPatch::rename(h, "div"));
    }
    for (id, name) in unlabeled_controls(doc) {
        merge(&mut patches, TagPatch::set(id, "aria-label", &collapse_whitespace(&name)));
    }
    if !has_main(doc) {
        // Judged on the renamed tree so a second run sees the same candidates.
        let renamed = apply_patches(doc, &patches).expect("fixer patches are valid");
        if let Some(id) = main_candidate(&renamed) {
            match patches.iter_mut().find(|p| p.node == id) {
                Some(existing) => existing.set_attributes.push(("role".into(), "main".into())),
                None => patches.push(TagPatch::set(id, "role", "main")),
            }
        }
    }
    patches
}

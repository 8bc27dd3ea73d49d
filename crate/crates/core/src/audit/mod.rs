//! Rule-based Level-A accessibility audit.
//!
//! The rule set is fixed and small so reports stay comparable between runs
//! and versions. Rules that concern what a screen reader perceives skip hidden
//! subtrees; the id and ARIA reference rules look at every element outside
//! `<template>`.

mod roles;

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use roles::{is_known_role, ARIA_ROLES};

use crate::dom::{collapse_whitespace, DomNode, Document, NodeId};
use crate::extract::{hides_subtree, NameResolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rule {
    pub rule_id: &'static str,
    pub description: &'static str,
    pub wcag_ref: &'static str,
}

pub const RULES: &[Rule] = &[
    Rule {
        rule_id: "H-ORDER",
        description: "Heading level increases by more than one",
        wcag_ref: "1.3.1 Info and Relationships",
    },
    Rule {
        rule_id: "H-EMPTY",
        description: "Heading has no accessible text",
        wcag_ref: "1.3.1 Info and Relationships",
    },
    Rule {
        rule_id: "IMG-ALT",
        description: "Image has no alt attribute",
        wcag_ref: "1.1.1 Non-text Content",
    },
    Rule {
        rule_id: "CTRL-NAME",
        description: "Button has no accessible name",
        wcag_ref: "4.1.2 Name, Role, Value",
    },
    Rule {
        rule_id: "LINK-NAME",
        description: "Link has no accessible name",
        wcag_ref: "2.4.4 Link Purpose (In Context)",
    },
    Rule {
        rule_id: "DOC-TITLE",
        description: "Document has no non-empty title",
        wcag_ref: "2.4.2 Page Titled",
    },
    Rule {
        rule_id: "HTML-LANG",
        description: "html element has no lang attribute",
        wcag_ref: "3.1.1 Language of Page",
    },
    Rule {
        rule_id: "DUP-ID",
        description: "id attribute value is repeated",
        wcag_ref: "4.1.1 Parsing",
    },
    Rule {
        rule_id: "LABEL-CTRL",
        description: "Form field has no label",
        wcag_ref: "3.3.2 Labels or Instructions",
    },
    Rule {
        rule_id: "ARIA-ROLE",
        description: "role value is not a WAI-ARIA role",
        wcag_ref: "4.1.2 Name, Role, Value",
    },
    Rule {
        rule_id: "ARIA-REF",
        description: "aria-labelledby or aria-describedby references a missing id",
        wcag_ref: "1.3.1 Info and Relationships",
    },
    Rule {
        rule_id: "LANDMARK-MAIN",
        description: "Document has no main landmark",
        wcag_ref: "2.4.1 Bypass Blocks",
    },
];

pub fn rule(rule_id: &str) -> Option<&'static Rule> {
    RULES.iter().find(|r| r.rule_id == rule_id)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(rename = "rule")]
    pub rule_id: String,
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub violations: Vec<Violation>,
    #[serde(rename = "instances")]
    pub instance_count: usize,
    #[serde(rename = "distinct_rules")]
    pub distinct_rule_count: usize,
}

impl AuditReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        let distinct: HashSet<&str> = violations.iter().map(|v| v.rule_id.as_str()).collect();
        AuditReport {
            instance_count: violations.len(),
            distinct_rule_count: distinct.len(),
            violations,
        }
    }

    pub fn count(&self, rule_id: &str) -> usize {
        self.violations
            .iter()
            .filter(|v| v.rule_id == rule_id)
            .count()
    }

    /// Instance counts per rule, every rule present.
    pub fn counts(&self) -> BTreeMap<&'static str, usize> {
        RULES
            .iter()
            .map(|r| (r.rule_id, self.count(r.rule_id)))
            .collect()
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for v in &self.violations {
            let _ = writeln!(out, "{:<14} {}  {}", v.rule_id, v.path, v.message);
        }
        let _ = writeln!(
            out,
            "{} violation(s) across {} rule(s)",
            self.instance_count, self.distinct_rule_count
        );
        out
    }
}

/// Heading level of an `h1`..`h6` element.
pub fn heading_level(node: &DomNode) -> Option<u8> {
    match node.tag()? {
        "h1" => Some(1),
        "h2" => Some(2),
        "h3" => Some(3),
        "h4" => Some(4),
        "h5" => Some(5),
        "h6" => Some(6),
        _ => None,
    }
}

/// Headings a screen reader can reach, in document order.
pub fn visible_headings(doc: &Document) -> Vec<(NodeId, u8)> {
    let Some(body) = doc.body() else {
        return Vec::new();
    };
    crate::extract::visible_descendants(doc, body)
        .into_iter()
        .filter_map(|id| heading_level(doc.node(id)).map(|l| (id, l)))
        .collect()
}

/// Pairs of consecutive headings whose level jumps by more than one; the
/// second heading of each pair is returned.
pub fn heading_skips(headings: &[(NodeId, u8)]) -> Vec<(NodeId, u8, u8)> {
    headings
        .windows(2)
        .filter(|w| w[1].1 > w[0].1 + 1)
        .map(|w| (w[1].0, w[0].1, w[1].1))
        .collect()
}

const NON_TEXT_INPUT_TYPES: &[&str] = &[
    "hidden", "checkbox", "radio", "submit", "button", "reset", "image", "file", "color", "range",
];

fn is_text_entry(node: &DomNode) -> bool {
    match node.tag() {
        Some("select") | Some("textarea") => true,
        Some("input") => {
            let ty = node
                .attr("type")
                .map(|t| t.trim().to_ascii_lowercase())
                .unwrap_or_default();
            !NON_TEXT_INPUT_TYPES.contains(&ty.as_str())
        }
        _ => false,
    }
}

fn has_role(node: &DomNode, role: &str) -> bool {
    node.attr("role")
        .is_some_and(|r| r.split_whitespace().any(|t| t.eq_ignore_ascii_case(role)))
}

struct Auditor<'a> {
    doc: &'a Document,
    names: NameResolver<'a>,
    label_targets: HashSet<&'a str>,
    violations: Vec<Violation>,
}

impl<'a> Auditor<'a> {
    fn report(&mut self, rule_id: &str, id: NodeId, message: String) {
        let path = self.doc.node_path(id).unwrap_or_default();
        self.violations.push(Violation {
            rule_id: rule_id.to_string(),
            path,
            message,
        });
    }

    fn is_labelled(&self, id: NodeId, node: &DomNode) -> bool {
        if node
            .attr("aria-label")
            .is_some_and(|l| !l.trim().is_empty())
        {
            return true;
        }
        if self.names.labelledby_text(node).is_some() {
            return true;
        }
        if node
            .attr("id")
            .is_some_and(|i| self.label_targets.contains(i))
        {
            return true;
        }
        self.doc
            .ancestors(id)
            .any(|a| self.doc.node(a).is_element("label"))
    }
}

/// Run every rule over the document.
pub fn run_audit(doc: &Document) -> AuditReport {
    // Elements outside <template>, with whether they are perceivable.
    let mut elements: Vec<(NodeId, bool)> = Vec::new();
    let mut stack = vec![(doc.root(), false)];
    while let Some((id, hidden_above)) = stack.pop() {
        let node = doc.node(id);
        if node.tag().is_none() {
            continue;
        }
        let hidden = hidden_above || hides_subtree(node);
        elements.push((id, !hidden));
        if node.is_element("template") {
            continue;
        }
        stack.extend(node.children.iter().rev().map(|c| (*c, hidden)));
    }

    let label_targets = elements
        .iter()
        .filter(|(id, _)| doc.node(*id).is_element("label"))
        .filter_map(|(id, _)| doc.node(*id).attr("for"))
        .collect();
    let mut auditor = Auditor {
        doc,
        names: NameResolver::new(doc),
        label_targets,
        violations: Vec::new(),
    };

    let mut seen_ids: HashSet<&str> = HashSet::new();
    let mut previous_heading: Option<u8> = None;
    let mut has_main = false;
    let mut title: Option<NodeId> = None;

    for &(id, visible) in &elements {
        let node = doc.node(id);
        let tag = node.tag().unwrap_or_default();

        if id == doc.root() && node.attr("lang").is_none_or(|l| l.trim().is_empty()) {
            auditor.report("HTML-LANG", id, "html element lacks a lang attribute".into());
        }
        if tag == "main" || has_role(node, "main") {
            has_main = true;
        }
        if tag == "title"
            && title.is_none()
            && !doc
                .ancestors(id)
                .any(|a| matches!(doc.tag(a), Some("svg") | Some("math")))
        {
            title = Some(id);
        }

        if visible {
            if let Some(level) = heading_level(node) {
                if let Some(prev) = previous_heading {
                    if level > prev + 1 {
                        auditor.report(
                            "H-ORDER",
                            id,
                            format!("h{level} follows h{prev}, skipping a level"),
                        );
                    }
                }
                previous_heading = Some(level);
                if auditor.names.name(id).ok().flatten().is_none() {
                    auditor.report("H-EMPTY", id, format!("h{level} has no accessible text"));
                }
            }
            if tag == "img" && node.attr("alt").is_none() {
                auditor.report("IMG-ALT", id, "img lacks an alt attribute".into());
            }
            if (tag == "button" || has_role(node, "button"))
                && auditor.names.name(id).ok().flatten().is_none()
            {
                auditor.report("CTRL-NAME", id, "button has no accessible name".into());
            }
            if tag == "a"
                && node.attr("href").is_some()
                && auditor.names.name(id).ok().flatten().is_none()
            {
                auditor.report("LINK-NAME", id, "link has no accessible name".into());
            }
            if is_text_entry(node) && !auditor.is_labelled(id, node) {
                auditor.report("LABEL-CTRL", id, format!("{tag} has no associated label"));
            }
        }

        if let Some(value) = node.attr("id") {
            if !value.is_empty() && !seen_ids.insert(value) {
                auditor.report("DUP-ID", id, format!("id \"{value}\" already used"));
            }
        }
        if let Some(role) = node.attr("role") {
            let unknown: Vec<&str> = role
                .split_whitespace()
                .filter(|t| !is_known_role(t))
                .collect();
            if !unknown.is_empty() {
                auditor.report(
                    "ARIA-ROLE",
                    id,
                    format!("unknown role value \"{}\"", unknown.join(" ")),
                );
            }
        }
        let dangling: Vec<&str> = ["aria-labelledby", "aria-describedby"]
            .iter()
            .filter_map(|a| node.attr(a))
            .flat_map(str::split_whitespace)
            .filter(|r| auditor.names.element_by_id(r).is_none())
            .collect();
        if !dangling.is_empty() {
            auditor.report(
                "ARIA-REF",
                id,
                format!("reference to missing id \"{}\"", dangling.join(" ")),
            );
        }
    }

    let title_ok = title.is_some_and(|t| !collapse_whitespace(&doc.text_content(t)).is_empty());
    if !title_ok {
        let at = title.or(doc.head()).unwrap_or(doc.root());
        auditor.report("DOC-TITLE", at, "document has no non-empty title".into());
    }
    if !has_main {
        auditor.report(
            "LANDMARK-MAIN",
            doc.root(),
            "no main element or role=\"main\"".into(),
        );
    }

    AuditReport::from_violations(auditor.violations)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleDelta {
    pub rule: String,
    pub before: usize,
    pub after: usize,
    pub delta: i64,
}

/// Per-rule change between two audits; negative deltas are improvements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditDiff {
    pub rules: Vec<RuleDelta>,
    pub before_total: usize,
    pub after_total: usize,
    pub total_delta: i64,
}

pub fn diff_reports(before: &AuditReport, after: &AuditReport) -> AuditDiff {
    let rules = RULES
        .iter()
        .map(|r| {
            let (b, a) = (before.count(r.rule_id), after.count(r.rule_id));
            RuleDelta {
                rule: r.rule_id.to_string(),
                before: b,
                after: a,
                delta: a as i64 - b as i64,
            }
        })
        .collect();
    AuditDiff {
        rules,
        before_total: before.instance_count,
        after_total: after.instance_count,
        total_delta: after.instance_count as i64 - before.instance_count as i64,
    }
}

use proptest::prelude::*;
use restruct_core::audit::run_audit;
use restruct_core::dom::{parse, Document, NodeData, NodeId};
use restruct_core::extract::extract_accessible;
use restruct_core::llm::Mode;
use restruct_core::pipeline::patch::check_patch;
use restruct_core::pipeline::{
    apply_patches, offline_regenerate, offline_reorganize, transform, Backend, ProviderKind,
    TagPatch, TransformError, TransformOptions,
};

fn words() -> impl Strategy<Value = String> {
    prop::collection::vec("[a-z]{1,10}", 1..8).prop_map(|w| w.join(" "))
}

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        6 => words(),
        3 => (1u8..=6, words()).prop_map(|(l, t)| format!("<h{l}>{t}</h{l}>")),
        2 => (1u8..=6, "[a-z]{2,8}").prop_map(|(l, t)| format!("<h{l}><a href=\"/c/{t}\">{t}</a></h{l}>")),
        1 => (1u8..=6).prop_map(|l| format!("<h{l}></h{l}>")),
        1 => Just(r#"<button title="Shopping cart"><img src="c.png" alt=""></button>"#.to_string()),
        1 => Just(r#"<a href="/home"><img src="h.png" alt="Home page"></a>"#.to_string()),
        1 => Just("<button></button>".to_string()),
        1 => Just(r#"<img src="p.png">"#.to_string()),
        1 => Just(r#"<input type="text" name="q" placeholder="Search">"#.to_string()),
        1 => Just(r#"<a href="/x"></a>"#.to_string()),
        1 => Just("<script>track()</script><style>p{}</style>".to_string()),
        1 => words().prop_map(|t| format!("<p onclick=\"go()\">{t}</p>")),
        1 => words().prop_map(|t| format!("<!--{t}-->")),
    ]
}

fn container() -> impl Strategy<Value = (&'static str, &'static str)> {
    let tag = prop::sample::select(vec![
        "div", "section", "article", "nav", "ul", "li", "p", "span", "header", "footer",
    ]);
    let attrs = prop::sample::select(vec![
        "", "", "", " class=\"card\"", " hidden", " aria-hidden=\"true\"", " role=\"main\"", " id=\"dup\"",
    ]);
    (tag, attrs)
}

fn node() -> impl Strategy<Value = String> {
    leaf().prop_recursive(4, 64, 6, |inner| {
        (container(), prop::collection::vec(inner, 0..6))
            .prop_map(|((tag, attrs), kids)| format!("<{tag}{attrs}>{}</{tag}>", kids.concat()))
    })
}

fn document() -> impl Strategy<Value = String> {
    (
        prop::option::of(words()),
        prop::bool::ANY,
        prop::collection::vec(node(), 0..8),
    )
        .prop_map(|(title, lang, body)| {
            let head = title.map(|t| format!("<title>{t}</title>")).unwrap_or_default();
            let lang = if lang { " lang=\"en\"" } else { "" };
            format!("<!DOCTYPE html><html{lang}><head>{head}</head><body>{}</body></html>", body.concat())
        })
}

fn text_multiset(doc: &Document) -> Vec<String> {
    let mut out: Vec<String> = doc
        .descendants(doc.root())
        .filter_map(|id| match &doc.node(id).data {
            NodeData::Text(t) => Some(t.clone()),
            _ => None,
        })
        .collect();
    out.sort();
    out
}

fn elements(doc: &Document) -> Vec<NodeId> {
    doc.descendants(doc.root())
        .filter(|id| doc.node(*id).tag().is_some())
        .collect()
}

#[derive(Debug, Clone)]
enum Op {
    Rename(&'static str),
    Set(&'static str, &'static str),
    Remove(&'static str),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => prop::sample::select(vec![
            "div", "section", "article", "aside", "nav", "span", "h1", "h2", "h3", "h4", "h5", "h6",
            "strong", "em", "header", "footer", "main", "ul", "li", "button", "script", "img",
        ]).prop_map(Op::Rename),
        2 => prop::sample::select(vec![
            ("role", "main"), ("role", "navigation"), ("role", "presentation"), ("aria-label", "Add item to cart"),
            ("lang", "en"), ("title", "tip"), ("aria-level", "2"), ("onclick", "x()"), ("class", "c"),
        ]).prop_map(|(n, v)| Op::Set(n, v)),
        1 => prop::sample::select(vec!["role", "aria-label", "title", "aria-hidden", "style"]).prop_map(Op::Remove),
    ]
}

fn patch_set() -> impl Strategy<Value = Vec<(usize, Vec<Op>)>> {
    prop::collection::vec((any::<usize>(), prop::collection::vec(op(), 1..3)), 0..12)
}

fn build_patches(doc: &Document, raw: &[(usize, Vec<Op>)]) -> Vec<TagPatch> {
    let targets = elements(doc);
    raw.iter()
        .map(|(pick, ops)| {
            let mut p = TagPatch::new(targets[pick % targets.len()]);
            for op in ops {
                match op {
                    Op::Rename(t) => p.new_tag = Some(t.to_string()),
                    Op::Set(n, v) => p.set_attributes.push((n.to_string(), v.to_string())),
                    Op::Remove(n) => p.remove_attributes.push(n.to_string()),
                }
            }
            p
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Patches that pass validation are all applied, and text survives.
    #[test]
    fn apply_patches_preserves_text_multiset(html in document(), raw in patch_set()) {
        let doc = parse(&html);
        let patches: Vec<TagPatch> = build_patches(&doc, &raw)
            .into_iter()
            .filter(|p| check_patch(&doc, p).is_ok())
            .collect();
        let out = apply_patches(&doc, &patches).unwrap();
        prop_assert_eq!(text_multiset(&out), text_multiset(&doc));
        prop_assert_eq!(elements(&out), elements(&doc));
        for id in elements(&doc) {
            prop_assert_eq!(out.children(id), doc.children(id));
        }
        for p in &patches {
            if let Some(tag) = &p.new_tag {
                let last = patches.iter().rev().find(|q| q.node == p.node && q.new_tag.is_some()).unwrap();
                prop_assert_eq!(out.tag(p.node), last.new_tag.as_deref());
                prop_assert!(tag.chars().all(|c| c.is_ascii_alphanumeric()));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// A set holding any invalid patch is refused as a whole.
    #[test]
    fn apply_patches_is_all_or_nothing(html in document(), raw in patch_set()) {
        let doc = parse(&html);
        let patches = build_patches(&doc, &raw);
        let all_valid = patches.iter().all(|p| check_patch(&doc, p).is_ok());
        prop_assert_eq!(apply_patches(&doc, &patches).is_ok(), all_valid);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fixer_is_idempotent_and_skip_free(html in document()) {
        let doc = parse(&html);
        let patches = offline_reorganize(&doc);
        let fixed = apply_patches(&doc, &patches).unwrap();
        prop_assert_eq!(offline_reorganize(&fixed), vec![]);
        prop_assert_eq!(run_audit(&fixed).count("H-ORDER"), 0);
        prop_assert_eq!(text_multiset(&fixed), text_multiset(&doc));
        prop_assert!(run_audit(&fixed).instance_count <= run_audit(&doc).instance_count);
    }

    #[test]
    fn fixer_only_adds_labels_to_extraction(html in document()) {
        let doc = parse(&html);
        let patches = offline_reorganize(&doc);
        let fixed = apply_patches(&doc, &patches).unwrap();
        let labels: Vec<&str> = patches
            .iter()
            .flat_map(|p| &p.set_attributes)
            .filter(|(n, _)| n == "aria-label")
            .map(|(_, v)| v.as_str())
            .collect();
        let before = extract_accessible(&doc);
        let after = extract_accessible(&fixed);
        let mut extra = after.sorted_texts();
        for t in before.sorted_texts() {
            let at = extra.iter().position(|e| *e == t);
            prop_assert!(at.is_some(), "lost {:?}", t);
            extra.remove(at.unwrap());
        }
        for t in extra {
            prop_assert!(labels.contains(&t), "unexpected {:?}", t);
        }
    }

    #[test]
    fn regeneration_is_clean_and_never_worse(html in document()) {
        let doc = parse(&html);
        let out = parse(&offline_regenerate(&doc));
        for id in out.descendants(out.root()) {
            let node = out.node(id);
            prop_assert!(!matches!(node.tag(), Some("script" | "style")));
            prop_assert!(node.attrs().iter().all(|(n, _)| !n.starts_with("on")));
        }
        let after = run_audit(&out);
        prop_assert_eq!(after.count("H-ORDER"), 0);
        prop_assert!(after.instance_count <= run_audit(&doc).instance_count,
            "{}\n{}", after.render_text(), out.to_html());
    }

    #[test]
    fn offline_runs_are_deterministic(html in document()) {
        for mode in [Mode::Regenerate, Mode::Reorganize] {
            let opts = TransformOptions::new(mode, ProviderKind::Offline);
            let a = transform(&parse(&html), &opts, &Backend::offline());
            let b = transform(&parse(&html), &opts, &Backend::offline());
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    prop_assert!(a.similarity.pass && a.attempts == 1);
                    prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
                }
                (Err(TransformError::GateFailed { best_score: x, .. }), Err(TransformError::GateFailed { best_score: y, .. })) => {
                    prop_assert_eq!(x, y);
                }
                (a, b) => prop_assert!(false, "diverged: {:?} / {:?}", a.is_ok(), b.is_ok()),
            }
        }
    }
}

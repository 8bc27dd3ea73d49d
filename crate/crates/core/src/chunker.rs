//! Token-budgeted splitting of a page at element boundaries, and stitching of
//! the regenerated fragments back into one document.
//!
//! Chunking works on the *content view* of a document: comments and every
//! subtree that [`hides_subtree`] rejects are replaced by a single space, so
//! the model only sees what a screen reader would announce. Body children are
//! packed greedily; an element too large for the remaining room is descended
//! into and its chunks are wrapped in its start and end tags (the full start
//! tag on the first chunk, a bare one afterwards). A text node that alone
//! exceeds the room is cut at whitespace into pieces.

use serde::{Deserialize, Serialize};

use crate::dom::{escape_text, parse, Document, NodeData, NodeId, RAW_TEXT_ELEMENTS};
use crate::extract::hides_subtree;

pub const DEFAULT_BUDGET: usize = 24_000;
pub const MIN_BUDGET: usize = 16;
/// Room a wrapper must leave for content before it is emitted as a
/// standalone empty shell instead.
const MIN_WRAPPED_ROOM: usize = 8;

/// Four bytes per token, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

/// Token counting hook. Implementations must be subadditive
/// (`count(a + b) <= count(a) + count(b)`), which greedy packing relies on.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ByteEstimate;

impl TokenCounter for ByteEstimate {
    fn count(&self, text: &str) -> usize {
        estimate_tokens(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    /// 1-based position in document order.
    pub index: usize,
    pub html: String,
    pub token_estimate: usize,
    /// Locator of the parent whose children this chunk holds.
    pub ancestor_path: String,
    /// Contiguous siblings under `ancestor_path`.
    pub covered_ids: Vec<NodeId>,
    /// Non-whitespace content text nodes carried by this chunk.
    pub text_ids: Vec<NodeId>,
    /// Set only on indivisible content that cannot fit the budget.
    pub oversize: bool,
    /// For pieces of a split text node, the node being split.
    pub split_text: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChunkError {
    #[error("chunk budget {budget} is below the minimum of {MIN_BUDGET}")]
    BudgetTooSmall { budget: usize },
}

/// Copy of `doc` in which comments and hidden or excluded subtrees inside the
/// body are replaced by a single space.
pub fn content_view(doc: &Document) -> Document {
    let mut view = doc.clone();
    let Some(body) = view.body() else {
        return view;
    };
    let mut stack = vec![body];
    let mut drop = Vec::new();
    while let Some(id) = stack.pop() {
        let node = view.node(id);
        let removable = id != body
            && (matches!(node.data, NodeData::Comment(_)) || hides_subtree(node));
        if removable {
            drop.push(id);
        } else {
            stack.extend(node.children.iter().copied());
        }
    }
    for id in drop {
        view.replace_with_text(id, " ").expect("id comes from the view");
    }
    view
}

fn has_words(text: &str) -> bool {
    text.split_whitespace().next().is_some()
}

/// Non-whitespace text nodes of the body that a screen reader can reach, in
/// document order. Chunks partition exactly this set.
pub fn content_text_ids(doc: &Document) -> Vec<NodeId> {
    let Some(body) = doc.body() else {
        return Vec::new();
    };
    crate::extract::visible_descendants(doc, body)
        .into_iter()
        .filter(|id| doc.node(*id).text().is_some_and(has_words))
        .collect()
}

pub fn chunk_document(doc: &Document, budget: usize) -> Result<Vec<Chunk>, ChunkError> {
    chunk_document_with(doc, budget, &ByteEstimate)
}

pub fn chunk_document_with(
    doc: &Document,
    budget: usize,
    counter: &dyn TokenCounter,
) -> Result<Vec<Chunk>, ChunkError> {
    if budget < MIN_BUDGET {
        return Err(ChunkError::BudgetTooSmall { budget });
    }
    let view = content_view(doc);
    let Some(body) = view.body() else {
        return Ok(Vec::new());
    };
    let mut packer = Packer {
        doc: &view,
        counter,
        budget,
        head: head_context(doc, budget, counter),
        wraps: Vec::new(),
        drafts: Vec::new(),
    };
    packer.children(body);
    Ok(packer.finish())
}

/// `<title>` of the page, cut so it uses at most a quarter of the budget.
fn head_context(doc: &Document, budget: usize, counter: &dyn TokenCounter) -> Option<(String, usize)> {
    let title = doc
        .descendants(doc.head()?)
        .find(|id| doc.node(*id).is_element("title"))
        .map(|id| crate::dom::collapse_whitespace(&doc.text_content(id)))
        .filter(|t| !t.is_empty())?;
    let limit = budget / 4;
    let mut text = escape_text(&title);
    let mut cut = text.len().min(limit * 4);
    while !text.is_char_boundary(cut) {
        cut -= 1;
    }
    text.truncate(cut);
    loop {
        let html = format!("<title>{text}</title>");
        let tokens = counter.count(&html);
        if tokens <= limit {
            return Some((html, tokens));
        }
        // Never leave half an entity behind.
        match text.rfind('&').filter(|i| !text[*i..].contains(';')) {
            Some(i) => text.truncate(i),
            None if text.pop().is_some() => {}
            None => return None,
        }
    }
}

struct Wrap {
    open: String,
    bare: String,
    close: String,
    reserve: usize,
    opened: bool,
    /// A titled element with text below it: its full start tag waits for a
    /// chunk that carries some, so the title never becomes its name.
    defer: bool,
}

enum Content {
    Siblings(Vec<NodeId>),
    Shell(NodeId),
    Piece(NodeId),
}

struct Draft {
    html: String,
    tokens: usize,
    path: String,
    content: Content,
    oversize: bool,
}

struct Packer<'a> {
    doc: &'a Document,
    counter: &'a dyn TokenCounter,
    budget: usize,
    head: Option<(String, usize)>,
    wraps: Vec<Wrap>,
    drafts: Vec<Draft>,
}

impl Packer<'_> {
    fn room(&self) -> usize {
        let wraps: usize = self.wraps.iter().map(|w| w.reserve).sum();
        let head = match (&self.head, self.drafts.is_empty()) {
            (Some((_, tokens)), true) => *tokens,
            _ => 0,
        };
        self.budget.saturating_sub(wraps + head)
    }

    fn carries_text(&self, content: &Content) -> bool {
        match content {
            Content::Siblings(ids) => ids.iter().any(|id| self.subtree_has_text(*id)),
            Content::Shell(_) => false,
            Content::Piece(_) => true,
        }
    }

    fn titled_without_label(&self, id: NodeId) -> bool {
        let node = self.doc.node(id);
        node.attr("title").is_some() && node.attr("aria-label").is_none()
    }

    fn subtree_has_text(&self, id: NodeId) -> bool {
        self.doc
            .descendants(id)
            .any(|n| self.doc.node(n).text().is_some_and(has_words))
    }

    /// Wrap `inner` in the head (first chunk only) and the open wrappers.
    fn emit(&mut self, inner: &str, path: &str, content: Content, indivisible: bool) {
        let mut html = String::new();
        if self.drafts.is_empty() {
            if let Some((head, _)) = &self.head {
                html.push_str(head);
            }
        }
        let text = self.carries_text(&content);
        for wrap in &mut self.wraps {
            if !wrap.opened && (text || !wrap.defer) {
                html.push_str(&wrap.open);
                wrap.opened = true;
            } else {
                html.push_str(&wrap.bare);
            }
        }
        html.push_str(inner);
        for wrap in self.wraps.iter().rev() {
            html.push_str(&wrap.close);
        }
        let tokens = self.counter.count(&html);
        self.drafts.push(Draft {
            oversize: indivisible && tokens > self.budget,
            html,
            tokens,
            path: path.to_string(),
            content,
        });
    }

    fn children(&mut self, parent: NodeId) {
        let doc = self.doc;
        let path = doc.node_path(parent).unwrap_or_default();
        let mut group: Vec<NodeId> = Vec::new();
        let mut group_html = String::new();
        let mut group_tokens = 0;
        for &child in doc.children(parent) {
            let html = doc.subtree_html(child);
            let tokens = self.counter.count(&html);
            if !group.is_empty() && group_tokens + tokens <= self.room() {
                group.push(child);
                group_html.push_str(&html);
                group_tokens += tokens;
                continue;
            }
            self.flush(&mut group, &mut group_html, &mut group_tokens, &path);
            if tokens <= self.room() {
                group.push(child);
                group_html = html;
                group_tokens = tokens;
                continue;
            }
            let node = doc.node(child);
            match &node.data {
                NodeData::Text(text) => self.split_text(child, text, &path),
                NodeData::Element { .. } if node.children.iter().any(|c| !self.is_blank(*c)) => {
                    self.enter(child, &path)
                }
                _ if self.is_blank(child) => {}
                _ => self.emit(&html, &path, Content::Siblings(vec![child]), true),
            }
        }
        self.flush(&mut group, &mut group_html, &mut group_tokens, &path);
    }

    fn is_blank(&self, id: NodeId) -> bool {
        self.doc.node(id).text().is_some_and(|t| !has_words(t))
    }

    fn flush(&mut self, group: &mut Vec<NodeId>, html: &mut String, tokens: &mut usize, path: &str) {
        if group.is_empty() {
            return;
        }
        // A group of only whitespace carries nothing worth a model call.
        if group.iter().all(|id| self.is_blank(*id)) {
            group.clear();
            html.clear();
            *tokens = 0;
            return;
        }
        let ids = std::mem::take(group);
        let inner = std::mem::take(html);
        *tokens = 0;
        self.emit(&inner, path, Content::Siblings(ids), false);
    }

    fn enter(&mut self, element: NodeId, parent_path: &str) {
        let doc = self.doc;
        let tag = doc.tag(element).unwrap_or_default();
        let open = doc.open_tag_html(element);
        let close = format!("</{tag}>");
        let reserve = self.counter.count(&open) + self.counter.count(&close);
        let defer = self.titled_without_label(element) && self.subtree_has_text(element);
        if self.room() >= reserve + MIN_WRAPPED_ROOM {
            self.wraps.push(Wrap {
                bare: format!("<{tag}>"),
                open,
                close,
                reserve,
                opened: false,
                defer,
            });
            self.children(element);
            self.wraps.pop();
        } else {
            // No space to nest: the element goes out empty and its children
            // follow unwrapped. An empty copy of a deferred element would
            // wrongly announce its title, and it has nothing else to say.
            if !defer {
                let shell = format!("{open}{close}");
                self.emit(&shell, parent_path, Content::Shell(element), true);
            }
            self.children(element);
        }
    }

    fn split_text(&mut self, id: NodeId, text: &str, path: &str) {
        let raw = self
            .doc
            .parent(id)
            .and_then(|p| self.doc.tag(p))
            .is_some_and(|t| RAW_TEXT_ELEMENTS.contains(&t));
        let mut piece = String::new();
        let mut words = 0;
        for word in text.split_whitespace() {
            let word = if raw { word.to_string() } else { escape_text(word) };
            if words > 0 {
                let before = piece.len();
                piece.push(' ');
                piece.push_str(&word);
                if self.counter.count(&piece) <= self.room() {
                    words += 1;
                    continue;
                }
                piece.truncate(before);
                self.emit(&piece, path, Content::Piece(id), words == 1);
            }
            piece = word;
            words = 1;
        }
        if words > 0 {
            self.emit(&piece, path, Content::Piece(id), words == 1);
        }
    }

    fn finish(self) -> Vec<Chunk> {
        let doc = self.doc;
        let texts_under = |id: NodeId| -> Vec<NodeId> {
            doc.descendants(id)
                .filter(|n| doc.node(*n).text().is_some_and(has_words))
                .collect()
        };
        self.drafts
            .into_iter()
            .enumerate()
            .map(|(i, draft)| {
                let (covered_ids, text_ids, split_text) = match draft.content {
                    Content::Siblings(ids) => {
                        let texts = ids.iter().flat_map(|id| texts_under(*id)).collect();
                        (ids, texts, None)
                    }
                    Content::Shell(id) => (vec![id], Vec::new(), None),
                    Content::Piece(id) => (vec![id], vec![id], Some(id)),
                };
                Chunk {
                    index: i + 1,
                    html: draft.html,
                    token_estimate: draft.tokens,
                    ancestor_path: draft.path,
                    covered_ids,
                    text_ids,
                    oversize: draft.oversize,
                    split_text,
                }
            })
            .collect()
    }
}

/// Join fragments into one document and serialize it.
pub fn stitch<S: AsRef<str>>(fragments: &[S]) -> String {
    stitch_documents(fragments).to_html()
}

/// Parse each fragment leniently; the first fragment supplies the doctype,
/// root attributes and head, and every fragment's body children are appended
/// in order. Only the first `<title>` survives.
pub fn stitch_documents<S: AsRef<str>>(fragments: &[S]) -> Document {
    let mut parts = fragments.iter();
    let mut out = parse(parts.next().map(AsRef::as_ref).unwrap_or_default());
    let root = out.root();
    let body = match out.body() {
        Some(b) => b,
        None => out.append_element(root, "body", &[]).expect("root is an element"),
    };
    for fragment in parts {
        let doc = parse(fragment.as_ref());
        let Some(src_body) = doc.body() else {
            continue;
        };
        for (i, &child) in doc.children(src_body).iter().enumerate() {
            // Keep text at fragment seams from fusing into one word.
            let seam = i == 0
                && doc.node(child).text().is_some()
                && out
                    .children(body)
                    .last()
                    .is_some_and(|l| out.node(*l).text().is_some());
            if seam {
                out.append_text(body, "\n").expect("body is an element");
            }
            out.import_subtree(&doc, child, body)
                .expect("body is an element");
        }
    }
    let titles: Vec<NodeId> = out
        .descendants(root)
        .filter(|id| out.node(*id).is_element("title"))
        .filter(|id| {
            !out.ancestors(*id)
                .any(|a| out.node(a).is_element("svg") || out.node(a).is_element("math"))
        })
        .collect();
    for extra in titles.into_iter().skip(1) {
        out.detach(extra).expect("title is in the document");
    }
    out
}

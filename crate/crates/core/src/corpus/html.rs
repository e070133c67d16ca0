//! Rendered post HTML to plain text.

use scraper::{ElementRef, Html, Node};

/// Elements whose whole subtree is boilerplate rather than article prose.
const SKIPPED: &[&str] = &[
    "script", "style", "noscript", "template", "figure", "figcaption", "iframe", "embed",
    "object", "video", "audio", "picture", "svg", "canvas", "form", "button", "select",
    "textarea",
];

const BLOCKS: &[&str] = &[
    "p", "div", "section", "article", "header", "footer", "aside", "main", "nav",
    "h1", "h2", "h3", "h4", "h5", "h6", "ul", "ol", "li", "dl", "dt", "dd", "blockquote",
    "pre", "table", "thead", "tbody", "tr", "td", "th", "br", "hr", "address",
];

/// WordPress caption and embed wrappers that are not `<figure>` elements.
const SKIPPED_CLASSES: &[&str] = &["wp-caption", "wp-caption-text", "wp-block-embed", "sharedaddy"];

/// Extracts paragraph text in document order.
///
/// Captions, embeds, scripts and styles are dropped, entities decoded, and
/// each block becomes one line with internal whitespace collapsed. Never
/// fails: malformed markup yields whatever text the lenient parser recovers.
pub fn html_to_text(body_html: &str) -> String {
    let doc = Html::parse_fragment(body_html);
    let mut blocks = Vec::new();
    let mut current = String::new();
    walk(doc.root_element(), &mut current, &mut blocks);
    flush(&mut current, &mut blocks);
    blocks.join("\n")
}

fn walk(el: ElementRef<'_>, current: &mut String, blocks: &mut Vec<String>) {
    for child in el.children() {
        match child.value() {
            Node::Text(t) => current.push_str(t),
            Node::Element(e) => {
                let name = e.name();
                if SKIPPED.contains(&name)
                    || e.classes().any(|c| SKIPPED_CLASSES.contains(&c))
                {
                    continue;
                }
                let Some(child_el) = ElementRef::wrap(child) else { continue };
                let is_block = BLOCKS.contains(&name);
                if is_block {
                    flush(current, blocks);
                }
                walk(child_el, current, blocks);
                if is_block {
                    flush(current, blocks);
                }
            }
            _ => {}
        }
    }
}

fn flush(current: &mut String, blocks: &mut Vec<String>) {
    let line = neutralize_tags(&crate::text::normalize_whitespace(current));
    if !line.is_empty() {
        blocks.push(line);
    }
    current.clear();
}

/// Decoded text can contain `&lt;b&gt;`-style literals; keep the output free
/// of anything that reads as a tag.
fn neutralize_tags(s: &str) -> String {
    if !s.contains('<') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len() + 4);
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        out.push(c);
        if c == '<' && chars.peek().is_some_and(|n| n.is_alphabetic()) {
            out.push(' ');
        }
    }
    out
}

/// True when no `<` is directly followed by a letter.
pub fn is_markup_free(s: &str) -> bool {
    let mut prev_lt = false;
    for c in s.chars() {
        if prev_lt && c.is_alphabetic() {
            return false;
        }
        prev_lt = c == '<';
    }
    true
}

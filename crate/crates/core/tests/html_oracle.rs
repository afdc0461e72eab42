//! `strip_markup` against an HTML5 parser: both must yield the same words.

use scraper::{Html, Node};

use story_beliefs::corpus::strip_markup;

const FIXTURES: &[&str] = &[
    "<p>Mara walked to the <b>harbor</b> at dawn.</p><p>The gulls were loud.</p>",
    "<div class=\"chapter\" data-x='a > b'><h2>Part One</h2><p>She said &ldquo;no&rdquo; &amp; left.</p></div>",
    "<p>Line one<br>line two<br/>line three</p><!-- hidden comment --><p>After.</p>",
    "<style>p { color: red; }</style><p>Visible text only.</p><script>alert('<p>x</p>');</script>",
    "<ul><li>first item</li><li>second &#8212; item</li><li>third &#x2019;s item</li></ul>",
    "<blockquote><p>Quoted <i>line</i> here&hellip;</p></blockquote><hr><p>Tail&nbsp;end.</p>",
    "Plain text with no markup at all.",
    "<table><tr><td>cell a</td><td>cell b</td></tr></table><p>5 &lt; 6 and 7 &gt; 3</p>",
];

fn oracle(html: &str) -> Vec<String> {
    let doc = Html::parse_fragment(html);
    let mut text = String::new();
    for node in doc.tree.nodes() {
        if let Node::Text(t) = node.value() {
            let in_skipped = node.ancestors().any(|a| {
                a.value().as_element().is_some_and(|e| matches!(e.name(), "script" | "style"))
            });
            if !in_skipped {
                text.push(' ');
                text.push_str(t);
            }
        }
    }
    words(&text)
}

fn words(s: &str) -> Vec<String> {
    s.split(|c: char| c.is_whitespace() || c == '\u{a0}').filter(|w| !w.is_empty()).map(String::from).collect()
}

#[test]
fn stripped_text_matches_parser() {
    for html in FIXTURES {
        assert_eq!(words(&strip_markup(html)), oracle(html), "fixture: {html}");
    }
}

#[test]
fn block_tags_become_paragraph_breaks() {
    let out = strip_markup("<p>one</p><p>two</p>");
    assert_eq!(out, "one\n\ntwo");
}

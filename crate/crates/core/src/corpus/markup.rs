use crate::text::squash_whitespace;

pub const TARGET_MARK: &str = "[REF#1]";
pub const OTHER_MARK: &str = "[OTH]";

/// Render paragraph markup as plain text: the mark at index `target` becomes
/// [`TARGET_MARK`], every other listed mark and any unlisted `<cite>` element
/// becomes [`OTHER_MARK`], remaining tags are dropped and whitespace squashed.
pub fn normalize_citation_marks(markup: &str, marks: &[&str], target: usize) -> String {
    let mut order: Vec<(usize, &str)> = marks
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(i, m)| (i, *m))
        .collect();
    // Longest marks first so a mark that prefixes another never wins.
    order.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));

    let mut out = String::with_capacity(markup.len());
    let mut i = 0;
    'scan: while i < markup.len() {
        let rest = &markup[i..];
        for (idx, mark) in &order {
            if rest.starts_with(mark) {
                push_mark(&mut out, if *idx == target { TARGET_MARK } else { OTHER_MARK });
                i += mark.len();
                continue 'scan;
            }
        }
        if rest.starts_with("<cite") {
            push_mark(&mut out, OTHER_MARK);
            i += cite_element_len(rest);
            continue;
        }
        if let Some(len) = tag_len(rest) {
            out.push(' ');
            i += len;
            continue;
        }
        let ch = rest.chars().next().expect("non-empty remainder");
        out.push(ch);
        i += ch.len_utf8();
    }
    tidy(&squash_whitespace(&out))
}

fn push_mark(out: &mut String, mark: &str) {
    if !out.is_empty() && !out.ends_with(char::is_whitespace) && !out.ends_with('(') {
        out.push(' ');
    }
    out.push_str(mark);
}

// A stripped tag or an inserted mark may leave a space before punctuation.
fn tidy(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c == ' ' {
            if let Some(&next) = chars.peek() {
                if matches!(next, '.' | ',' | ';' | ':' | ')') {
                    continue;
                }
            }
        }
        out.push(c);
    }
    out
}

fn cite_element_len(rest: &str) -> usize {
    let Some(open_end) = rest.find('>') else {
        return rest.len();
    };
    if rest[..open_end].ends_with('/') {
        return open_end + 1;
    }
    match rest.find("</cite>") {
        Some(close) => close + "</cite>".len(),
        None => open_end + 1,
    }
}

fn tag_len(rest: &str) -> Option<usize> {
    let mut chars = rest.chars();
    if chars.next()? != '<' {
        return None;
    }
    let second = chars.next()?;
    if !(second.is_ascii_alphabetic() || matches!(second, '/' | '!' | '?')) {
        return None;
    }
    let end = rest.find('>')?;
    if rest[1..end].contains('<') {
        return None;
    }
    Some(end + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replaces_target_and_others() {
        let markup = "<p>As shown by <cite id=\"1\">Lee (2019)</cite>, and <cite id=\"2\"/>, parsing works.</p>";
        let out = normalize_citation_marks(markup, &["<cite id=\"1\">Lee (2019)</cite>"], 0);
        assert_eq!(out, "As shown by [REF#1], and [OTH], parsing works.");
    }

    #[test]
    fn less_than_in_text_is_kept() {
        let out = normalize_citation_marks("x < 3 and y", &[], 0);
        assert_eq!(out, "x < 3 and y");
    }

    #[test]
    fn mark_inside_parentheses() {
        let out = normalize_citation_marks("a model (<c>M</c>) works", &["<c>M</c>"], 0);
        assert_eq!(out, "a model ([REF#1]) works");
    }
}

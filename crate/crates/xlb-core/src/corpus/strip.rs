//! Comment and blank-line removal for Python and Java code fragments.
//!
//! Works on plain text with a hand-rolled scanner rather than a parser:
//! the inputs are function-level fragments that rarely form a valid
//! compilation unit on their own, and mined history contains broken code.
//!
//! Removed: line comments (`#`, `//`), block comments (`/* … */`),
//! standalone Python string statements opening a module/class/function
//! body (docstrings; a run of consecutive standalone strings counts as
//! documentation too, which keeps the operation idempotent), and all blank
//! lines. String literals in executable positions are preserved. Lines are
//! right-trimmed.

use crate::source_model::Language;

/// Strips comments, docstrings, and blank lines. Idempotent.
pub fn strip_comments(code: &str, language: Language) -> String {
    let remove = match language {
        Language::Python => python_removal_spans(code),
        Language::Java => java_removal_spans(code),
    };
    let mut keep = vec![true; code.len()];
    for (start, end) in remove {
        for flag in keep.iter_mut().take(end.min(code.len())).skip(start) {
            *flag = false;
        }
    }
    let mut out = String::with_capacity(code.len());
    for (idx, ch) in code.char_indices() {
        if keep[idx] {
            out.push(ch);
        }
    }
    out.lines()
        .map(str::trim_end)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Clone, Copy, PartialEq)]
enum Class {
    Code,
    Comment,
    Str,
}

/// Byte classification for Python: comments, string literals, code.
fn classify_python(bytes: &[u8]) -> Vec<Class> {
    let mut class = vec![Class::Code; bytes.len()];
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b == b'#' {
            let start = i;
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            class[start..i].fill(Class::Comment);
            continue;
        }
        if b == b'\'' || b == b'"' {
            let prefix_start = string_prefix_start(bytes, i);
            let (end, _triple) = scan_python_string(bytes, i);
            class[prefix_start..end].fill(Class::Str);
            i = end;
            continue;
        }
        i += 1;
    }
    class
}

/// Start of a string prefix (`r`, `b`, `f`, `u`, doubled) directly before a
/// quote, so the prefix letters are protected together with the literal.
fn string_prefix_start(bytes: &[u8], quote_pos: usize) -> usize {
    let mut start = quote_pos;
    for _ in 0..2 {
        if start == 0 {
            break;
        }
        let c = bytes[start - 1].to_ascii_lowercase();
        if matches!(c, b'r' | b'b' | b'f' | b'u') {
            start -= 1;
        } else {
            break;
        }
    }
    // Only a prefix when preceded by a non-identifier character.
    if start < quote_pos {
        if start > 0 {
            let prev = bytes[start - 1];
            if prev.is_ascii_alphanumeric() || prev == b'_' {
                return quote_pos;
            }
        }
    }
    start
}

/// Returns (exclusive end, is_triple). Unterminated single-quoted strings
/// stop at end of line, unterminated triples at end of text.
fn scan_python_string(bytes: &[u8], start: usize) -> (usize, bool) {
    let quote = bytes[start];
    let triple = bytes.len() >= start + 3 && bytes[start + 1] == quote && bytes[start + 2] == quote;
    let mut i = start + if triple { 3 } else { 1 };
    while i < bytes.len() {
        let b = bytes[i];
        if b == b'\\' {
            i += 2;
            continue;
        }
        if triple {
            if b == quote && bytes.len() >= i + 3 && bytes[i + 1] == quote && bytes[i + 2] == quote
            {
                return (i + 3, true);
            }
        } else {
            if b == quote {
                return (i + 1, false);
            }
            if b == b'\n' {
                return (i, false); // unterminated: stop at the line break
            }
        }
        i += 1;
    }
    (bytes.len(), triple)
}

/// Removal spans for Python: every comment plus standalone documentation
/// strings at the head of the module or of a `def`/`class` body.
fn python_removal_spans(code: &str) -> Vec<(usize, usize)> {
    let bytes = code.as_bytes();
    let class = classify_python(bytes);
    let mut spans: Vec<(usize, usize)> = Vec::new();

    // Comment spans.
    let mut i = 0;
    while i < bytes.len() {
        if class[i] == Class::Comment {
            let start = i;
            while i < bytes.len() && class[i] == Class::Comment {
                i += 1;
            }
            spans.push((start, i));
        } else {
            i += 1;
        }
    }

    // Logical-statement walk for docstrings.
    let mut expect_doc = true; // module head
    let mut depth: i32 = 0;
    let mut stmt: Option<StmtScan> = None;
    let mut i = 0;
    while i <= bytes.len() {
        let at_end = i == bytes.len();
        let (b, cls) = if at_end {
            (b'\n', Class::Code)
        } else {
            (bytes[i], class[i])
        };

        match cls {
            Class::Comment => {
                i += 1;
                continue;
            }
            Class::Str => {
                if stmt.is_none() {
                    stmt = Some(StmtScan::new(i));
                }
                if let Some(s) = stmt.as_mut() {
                    s.saw_string = true;
                    s.end = i + 1;
                }
                i += 1;
                continue;
            }
            Class::Code => {}
        }

        match b {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth -= 1,
            _ => {}
        }

        let terminator = (b == b'\n' && depth <= 0 && !continued(bytes, i)) || b == b';';
        if terminator {
            if let Some(s) = stmt.take() {
                expect_doc = finish_statement(code, &s, expect_doc, &mut spans);
            }
            i += 1;
            continue;
        }

        if !b.is_ascii_whitespace() && stmt.is_none() {
            stmt = Some(StmtScan::new(i));
        }
        if b != b'\n' && !at_end {
            if let Some(s) = stmt.as_mut() {
                s.note_code(bytes, i, depth);
            }
        }
        i += 1;
    }
    if let Some(s) = stmt.take() {
        finish_statement(code, &s, expect_doc, &mut spans);
    }

    spans
}

fn continued(bytes: &[u8], newline_pos: usize) -> bool {
    newline_pos > 0 && bytes[newline_pos - 1] == b'\\'
}

struct StmtScan {
    start: usize,
    end: usize,
    saw_string: bool,
    saw_code: bool,
    head: String,
    colon_at_depth0: bool,
    code_after_colon: bool,
}

impl StmtScan {
    fn new(start: usize) -> StmtScan {
        StmtScan {
            start,
            end: start,
            saw_string: false,
            saw_code: false,
            head: String::new(),
            colon_at_depth0: false,
            code_after_colon: false,
        }
    }

    fn note_code(&mut self, bytes: &[u8], i: usize, depth: i32) {
        let b = bytes[i];
        // Spaces only separate head words; they are not statement content.
        if b == b' ' || b == b'\t' {
            if !self.head.is_empty() && !self.head.ends_with(' ') && self.head.len() < 16 {
                self.head.push(' ');
            }
            return;
        }
        self.saw_code = true;
        self.end = i + 1;
        if self.colon_at_depth0 {
            self.code_after_colon = true;
        }
        if b == b':' && depth <= 0 {
            self.colon_at_depth0 = true;
        }
        // The first two words identify `def f`, `class C`, `async def f`.
        if self.head.len() < 16 && (b.is_ascii_alphanumeric() || b == b'_') {
            self.head.push(b as char);
        }
    }

    fn is_block_header(&self) -> bool {
        let mut words = self.head.split(' ');
        match words.next() {
            Some("def") | Some("class") => true,
            Some("async") => matches!(words.next(), Some("def")),
            _ => false,
        }
    }
}

/// Consumes one finished logical statement; returns whether the next
/// statement may still be a docstring.
fn finish_statement(
    code: &str,
    s: &StmtScan,
    expect_doc: bool,
    spans: &mut Vec<(usize, usize)>,
) -> bool {
    let standalone_string = s.saw_string && !s.saw_code;
    if standalone_string {
        if expect_doc {
            spans.push((s.start, s.end.min(code.len())));
        }
        // A run of leading standalone strings is all documentation.
        return expect_doc;
    }
    // `def f():` with nothing after the colon opens a body.
    s.is_block_header() && s.colon_at_depth0 && !s.code_after_colon
}

/// Removal spans for Java: line and block comments. An unterminated block
/// comment is stripped to end of text.
fn java_removal_spans(code: &str) -> Vec<(usize, usize)> {
    let bytes = code.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'/' if i + 1 < bytes.len() && bytes[i + 1] == b'/' => {
                let start = i;
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                spans.push((start, i));
            }
            b'/' if i + 1 < bytes.len() && bytes[i + 1] == b'*' => {
                let start = i;
                i += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        log::warn!("unterminated block comment; stripping to end of text");
                        spans.push((start, bytes.len()));
                        return spans;
                    }
                    if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                        spans.push((start, i + 2));
                        i += 2;
                        break;
                    }
                    i += 1;
                }
            }
            b'"' => {
                // Text block or ordinary string literal.
                if bytes.len() >= i + 3 && bytes[i + 1] == b'"' && bytes[i + 2] == b'"' {
                    i += 3;
                    while i + 2 < bytes.len()
                        && !(bytes[i] == b'"' && bytes[i + 1] == b'"' && bytes[i + 2] == b'"')
                    {
                        i += 1;
                    }
                    i = (i + 3).min(bytes.len());
                } else {
                    i += 1;
                    while i < bytes.len() && bytes[i] != b'"' && bytes[i] != b'\n' {
                        if bytes[i] == b'\\' {
                            i += 1;
                        }
                        i += 1;
                    }
                    i = (i + 1).min(bytes.len());
                }
            }
            b'\'' => {
                i += 1;
                while i < bytes.len() && bytes[i] != b'\'' && bytes[i] != b'\n' {
                    if bytes[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
                i = (i + 1).min(bytes.len());
            }
            _ => i += 1,
        }
    }
    spans
}

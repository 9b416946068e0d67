//! Locating the structured block inside an agent reply.

use serde_json::Value;

use super::{literal::parse_literal, ProtocolError};

/// A key-value block found in free text.
#[derive(Debug, Clone)]
pub struct Block<'a> {
    /// Source text of the block, verbatim.
    pub text: &'a str,
    /// Everything before the block (or its code fence), trimmed.
    pub narration: &'a str,
    pub value: Value,
}

struct Candidate {
    start: usize,
    end: usize,
    narration_end: usize,
}

/// Find the last block that parses as a literal object.
///
/// Blocks inside fenced code regions win over blocks in bare prose. Among
/// the parsed blocks the last one satisfying `accept` is returned; if none
/// satisfies it, the last parsed block is returned so that the caller can
/// report a schema error against it.
pub fn extract_last_block<'a>(
    text: &'a str,
    accept: impl Fn(&Value) -> bool,
) -> Result<Block<'a>, ProtocolError> {
    let fenced: Vec<Candidate> = fences(text)
        .into_iter()
        .flat_map(|(fence_start, body_start, body_end)| {
            brace_spans(text, body_start, body_end)
                .into_iter()
                .map(move |(s, e)| Candidate { start: s, end: e, narration_end: fence_start })
        })
        .collect();
    if let Some(b) = choose(text, &fenced, &accept) {
        return Ok(b);
    }
    let bare: Vec<Candidate> = brace_spans(text, 0, text.len())
        .into_iter()
        .map(|(s, e)| Candidate { start: s, end: e, narration_end: s })
        .collect();
    if let Some(b) = choose(text, &bare, &accept) {
        return Ok(b);
    }
    if fenced.is_empty() && bare.is_empty() {
        Err(ProtocolError::Extraction("reply contains no braced block".into()))
    } else {
        Err(ProtocolError::Extraction("no braced block in the reply parses as a key-value literal".into()))
    }
}

fn choose<'a>(text: &'a str, cands: &[Candidate], accept: &impl Fn(&Value) -> bool) -> Option<Block<'a>> {
    let mut fallback = None;
    for c in cands.iter().rev() {
        let slice = &text[c.start..c.end];
        let Ok((value, used)) = parse_literal(slice) else { continue };
        if used != slice.len() {
            continue;
        }
        let block = Block { text: slice, narration: text[..c.narration_end].trim(), value };
        if accept(&block.value) {
            return Some(block);
        }
        if fallback.is_none() {
            fallback = Some(block);
        }
    }
    fallback
}

/// `(fence_start, body_start, body_end)` for each closed ``` fence.
fn fences(text: &str) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut search = 0;
    while let Some(rel) = text[search..].find("```") {
        let open = search + rel;
        // skip the info string (e.g. `json`, `python`) up to end of line
        let after = open + 3;
        let body_start = text[after..].find('\n').map(|i| after + i + 1).unwrap_or(text.len());
        let Some(close_rel) = text[body_start..].find("```") else { break };
        let close = body_start + close_rel;
        out.push((open, body_start, close));
        search = close + 3;
    }
    out
}

/// Top-level balanced `{...}` spans within `[from, to)`. Quotes are only
/// tracked inside an open brace so that apostrophes in prose do not derail
/// the scan.
fn brace_spans(text: &str, from: usize, to: usize) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut i = from;
    while i < to {
        if bytes[i] != b'{' {
            i += 1;
            continue;
        }
        match match_brace(bytes, i, to) {
            Some(end) => {
                spans.push((i, end));
                i = end;
            }
            None => i += 1,
        }
    }
    spans
}

fn match_brace(bytes: &[u8], open: usize, to: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut quote: Option<u8> = None;
    let mut escaped = false;
    let mut i = open;
    while i < to {
        let c = bytes[i];
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == b'\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            } else if c == b'\n' && q == b'\'' {
                // a stray apostrophe inside a block cannot span lines
                quote = None;
            }
        } else {
            match c {
                b'"' | b'\'' => quote = Some(c),
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(i + 1);
                    }
                }
                _ => {}
            }
        }
        i += 1;
    }
    None
}

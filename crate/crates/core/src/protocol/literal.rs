//! Tolerant key-value literal parser.
//!
//! Accepts JSON plus the dict-literal habits of language models: single
//! quoted strings, trailing commas, bare identifier keys, tuples, `#`
//! comments and the Python constants `True`, `False` and `None`.

use serde_json::{Map, Number, Value};

use super::ProtocolError;

/// Parse one literal starting at the beginning of `text` (leading whitespace
/// allowed). Returns the value and the byte offset just past it.
pub fn parse_literal(text: &str) -> Result<(Value, usize), ProtocolError> {
    let mut p = Parser { src: text.as_bytes(), text, pos: 0 };
    p.skip_ws();
    let v = p.value(0)?;
    Ok((v, p.pos))
}

const MAX_DEPTH: usize = 64;

struct Parser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ProtocolError> {
        Err(ProtocolError::Syntax { offset: self.pos, message: message.into() })
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() {
                self.pos += 1;
            } else if c == b'#' {
                while let Some(c) = self.peek() {
                    if c == b'\n' {
                        break;
                    }
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn value(&mut self, depth: usize) -> Result<Value, ProtocolError> {
        if depth > MAX_DEPTH {
            return self.err("nesting too deep");
        }
        match self.peek() {
            None => self.err("unexpected end of input"),
            Some(b'{') => self.object(depth),
            Some(b'[') => self.sequence(b']', depth),
            Some(b'(') => self.sequence(b')', depth),
            Some(b'"') | Some(b'\'') => Ok(Value::String(self.string()?)),
            Some(c) if c == b'-' || c == b'+' || c == b'.' || c.is_ascii_digit() => self.number(),
            Some(c) if is_ident_start(c) => {
                let start = self.pos;
                let word = self.ident();
                match word {
                    "true" | "True" => Ok(Value::Bool(true)),
                    "false" | "False" => Ok(Value::Bool(false)),
                    "null" | "None" => Ok(Value::Null),
                    _ => {
                        self.pos = start;
                        self.err(format!("bare word `{word}` is not a value"))
                    }
                }
            }
            Some(c) => self.err(format!("unexpected character `{}`", c as char)),
        }
    }

    fn object(&mut self, depth: usize) -> Result<Value, ProtocolError> {
        self.pos += 1;
        let mut map = Map::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'}') => {
                    self.pos += 1;
                    return Ok(Value::Object(map));
                }
                None => return self.err("unterminated object"),
                _ => {}
            }
            let key = match self.peek() {
                Some(b'"') | Some(b'\'') => self.string()?,
                Some(c) if is_ident_start(c) => self.ident().to_string(),
                Some(c) if c.is_ascii_digit() || c == b'-' => match self.number()? {
                    Value::Number(n) => n.to_string(),
                    _ => unreachable!(),
                },
                _ => return self.err("expected a key"),
            };
            self.skip_ws();
            if self.peek() != Some(b':') {
                return self.err("expected `:` after key");
            }
            self.pos += 1;
            self.skip_ws();
            let v = self.value(depth + 1)?;
            map.insert(key, v);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {}
                _ => return self.err("expected `,` or `}`"),
            }
        }
    }

    fn sequence(&mut self, close: u8, depth: usize) -> Result<Value, ProtocolError> {
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some(close) {
                self.pos += 1;
                return Ok(Value::Array(items));
            }
            if self.peek().is_none() {
                return self.err("unterminated list");
            }
            items.push(self.value(depth + 1)?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(c) if c == close => {}
                _ => return self.err(format!("expected `,` or `{}`", close as char)),
            }
        }
    }

    fn string(&mut self) -> Result<String, ProtocolError> {
        let quote = self.src[self.pos];
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            let rest = &self.text[self.pos..];
            let Some(c) = rest.chars().next() else {
                self.pos = start;
                return self.err("unterminated string");
            };
            self.pos += c.len_utf8();
            match c {
                '\\' => {
                    let Some(e) = self.text[self.pos..].chars().next() else {
                        return self.err("unterminated escape");
                    };
                    self.pos += e.len_utf8();
                    match e {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        'b' => out.push('\u{8}'),
                        'f' => out.push('\u{c}'),
                        '0' => out.push('\0'),
                        'u' => {
                            let hex = self.text.get(self.pos..self.pos + 4).unwrap_or("");
                            let Ok(code) = u32::from_str_radix(hex, 16) else {
                                return self.err("bad \\u escape");
                            };
                            self.pos += 4;
                            out.push(char::from_u32(code).unwrap_or('\u{fffd}'));
                        }
                        other => out.push(other),
                    }
                }
                c if c as u32 == quote as u32 => return Ok(out),
                c => out.push(c),
            }
        }
    }

    fn ident(&mut self) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' || c == b'-' {
                self.pos += 1;
            } else {
                break;
            }
        }
        &self.text[start..self.pos]
    }

    fn number(&mut self) -> Result<Value, ProtocolError> {
        let start = self.pos;
        if matches!(self.peek(), Some(b'-') | Some(b'+')) {
            self.pos += 1;
        }
        let mut is_float = false;
        while let Some(c) = self.peek() {
            match c {
                b'0'..=b'9' | b'_' => self.pos += 1,
                b'.' | b'e' | b'E' => {
                    is_float = true;
                    self.pos += 1;
                    if c != b'.' && matches!(self.peek(), Some(b'-') | Some(b'+')) {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
        let raw: String = self.text[start..self.pos].chars().filter(|&c| c != '_' && c != '+').collect();
        if !is_float {
            if let Ok(i) = raw.parse::<i64>() {
                return Ok(Value::Number(i.into()));
            }
        }
        match raw.parse::<f64>().ok().and_then(Number::from_f64) {
            Some(n) => Ok(Value::Number(n)),
            None => {
                self.pos = start;
                self.err(format!("bad number `{raw}`"))
            }
        }
    }
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn lit(s: &str) -> Value {
        parse_literal(s).unwrap().0
    }

    #[test]
    fn json_subset() {
        assert_eq!(lit(r#"{"a": [1, 2.5, "x", true, null]}"#), json!({"a": [1, 2.5, "x", true, null]}));
    }

    #[test]
    fn python_habits() {
        assert_eq!(
            lit("{'a': (1, 2,), b: 'it\\'s', \"c\": None, 'd': True, # note\n 'e': -3e2,}"),
            json!({"a": [1, 2], "b": "it's", "c": null, "d": true, "e": -300.0})
        );
    }

    #[test]
    fn end_offset_and_errors() {
        let (_, end) = parse_literal("{'a': 1} trailing").unwrap();
        assert_eq!(end, 8);
        assert!(parse_literal("{'a': }").is_err());
        assert!(parse_literal("{'a': translate}").is_err());
        assert!(parse_literal("{'a': 'open").is_err());
        assert!(parse_literal(&"[".repeat(200)).is_err());
    }

    #[test]
    fn unicode_strings() {
        assert_eq!(lit("{'name': 'café ♞'}"), json!({"name": "café ♞"}));
    }
}

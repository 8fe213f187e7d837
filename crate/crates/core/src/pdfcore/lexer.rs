//! Tokenizer for the textual PDF object grammar.

use std::fmt;

use super::coverage::{CoverageSet, Unit};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Integer or real. `int` is set when the literal had no fractional
    /// part and fits in an `i64`.
    Number { value: f64, int: Option<i64> },
    Name(Vec<u8>),
    LiteralString(Vec<u8>),
    HexString(Vec<u8>),
    DictOpen,
    DictClose,
    ArrayOpen,
    ArrayClose,
    Keyword(Keyword),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Keyword {
    Obj,
    EndObj,
    R,
    True,
    False,
    Null,
    Stream,
    EndStream,
    Xref,
    Trailer,
    StartXref,
    Other(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the first character of the token.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at offset {}", self.message, self.offset)
    }
}

impl std::error::Error for LexError {}

pub fn is_whitespace(b: u8) -> bool {
    matches!(b, b'\0' | b'\t' | b'\n' | b'\x0c' | b'\r' | b' ')
}

pub fn is_delimiter(b: u8) -> bool {
    matches!(b, b'(' | b')' | b'<' | b'>' | b'[' | b']' | b'{' | b'}' | b'/' | b'%')
}

pub fn is_regular(b: u8) -> bool {
    !is_whitespace(b) && !is_delimiter(b)
}

fn hex_value(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'a'..=b'f' => Some(b - b'a' + 10),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

/// Pull-based lexer. Coverage is recorded into the set passed to
/// [`Lexer::next_token`], so a parser can share one set across units.
pub struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a [u8]) -> Self {
        Lexer { src, pos: 0 }
    }

    pub fn at(src: &'a [u8], pos: usize) -> Self {
        Lexer { src, pos: pos.min(src.len()) }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn source(&self) -> &'a [u8] {
        self.src
    }

    fn err(&self, cov: &mut CoverageSet, id: u16, offset: usize, message: impl Into<String>) -> LexError {
        cov.hit(Unit::Lexer, id);
        LexError { offset: offset.min(self.src.len()), message: message.into() }
    }

    fn skip_whitespace_and_comments(&mut self, cov: &mut CoverageSet) {
        while self.pos < self.src.len() {
            let b = self.src[self.pos];
            if is_whitespace(b) {
                self.pos += 1;
            } else if b == b'%' {
                cov.hit(Unit::Lexer, 1);
                while self.pos < self.src.len() && !matches!(self.src[self.pos], b'\r' | b'\n') {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    /// Returns `Ok(None)` at end of input.
    pub fn next_token(&mut self, cov: &mut CoverageSet) -> Result<Option<Token>, LexError> {
        self.skip_whitespace_and_comments(cov);
        let start = self.pos;
        let Some(&b) = self.src.get(start) else {
            cov.hit(Unit::Lexer, 2);
            return Ok(None);
        };
        let kind = match b {
            b'/' => {
                cov.hit(Unit::Lexer, 3);
                self.pos += 1;
                TokenKind::Name(self.lex_name(cov)?)
            }
            b'(' => {
                cov.hit(Unit::Lexer, 4);
                self.pos += 1;
                TokenKind::LiteralString(self.lex_literal(cov, start)?)
            }
            b'<' => {
                if self.src.get(start + 1) == Some(&b'<') {
                    cov.hit(Unit::Lexer, 5);
                    self.pos += 2;
                    TokenKind::DictOpen
                } else {
                    cov.hit(Unit::Lexer, 6);
                    self.pos += 1;
                    TokenKind::HexString(self.lex_hex(cov, start)?)
                }
            }
            b'>' => {
                if self.src.get(start + 1) == Some(&b'>') {
                    cov.hit(Unit::Lexer, 7);
                    self.pos += 2;
                    TokenKind::DictClose
                } else {
                    return Err(self.err(cov, 8, start, "bare delimiter `>`"));
                }
            }
            b'[' => {
                cov.hit(Unit::Lexer, 9);
                self.pos += 1;
                TokenKind::ArrayOpen
            }
            b']' => {
                cov.hit(Unit::Lexer, 10);
                self.pos += 1;
                TokenKind::ArrayClose
            }
            b')' => return Err(self.err(cov, 11, start, "bare delimiter `)`")),
            b'{' | b'}' => return Err(self.err(cov, 12, start, "bare delimiter (procedure brace)")),
            _ => {
                let end = self.src[start..]
                    .iter()
                    .position(|&c| !is_regular(c))
                    .map_or(self.src.len(), |n| start + n);
                self.pos = end;
                self.classify_regular(cov, &self.src[start..end], start)?
            }
        };
        Ok(Some(Token { kind, offset: start }))
    }

    fn lex_name(&mut self, cov: &mut CoverageSet) -> Result<Vec<u8>, LexError> {
        let mut out = Vec::new();
        while let Some(&c) = self.src.get(self.pos) {
            if !is_regular(c) {
                break;
            }
            if c == b'#' {
                let hi = self.src.get(self.pos + 1).copied().and_then(hex_value);
                let lo = self.src.get(self.pos + 2).copied().and_then(hex_value);
                match (hi, lo) {
                    (Some(h), Some(l)) => {
                        cov.hit(Unit::Lexer, 13);
                        out.push(h << 4 | l);
                        self.pos += 3;
                    }
                    _ => return Err(self.err(cov, 14, self.pos, "bad #xx escape in name")),
                }
            } else {
                out.push(c);
                self.pos += 1;
            }
        }
        if out.is_empty() {
            cov.hit(Unit::Lexer, 15);
        }
        Ok(out)
    }

    fn lex_literal(&mut self, cov: &mut CoverageSet, start: usize) -> Result<Vec<u8>, LexError> {
        let mut out = Vec::new();
        let mut depth = 1usize;
        loop {
            let Some(&c) = self.src.get(self.pos) else {
                return Err(self.err(cov, 16, start, "unterminated literal string"));
            };
            self.pos += 1;
            match c {
                b'(' => {
                    cov.hit(Unit::Lexer, 17);
                    depth += 1;
                    out.push(c);
                }
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(out);
                    }
                    cov.hit(Unit::Lexer, 18);
                    out.push(c);
                }
                b'\\' => {
                    let Some(&e) = self.src.get(self.pos) else {
                        return Err(self.err(cov, 19, start, "unterminated literal string"));
                    };
                    self.pos += 1;
                    match e {
                        b'n' => out.push(b'\n'),
                        b'r' => out.push(b'\r'),
                        b't' => out.push(b'\t'),
                        b'b' => out.push(b'\x08'),
                        b'f' => out.push(b'\x0c'),
                        b'(' | b')' | b'\\' => out.push(e),
                        b'0'..=b'7' => {
                            cov.hit(Unit::Lexer, 20);
                            let mut v = u32::from(e - b'0');
                            for _ in 0..2 {
                                match self.src.get(self.pos) {
                                    Some(&d @ b'0'..=b'7') => {
                                        v = v * 8 + u32::from(d - b'0');
                                        self.pos += 1;
                                    }
                                    _ => break,
                                }
                            }
                            out.push((v & 0xff) as u8);
                        }
                        b'\r' => {
                            cov.hit(Unit::Lexer, 21);
                            if self.src.get(self.pos) == Some(&b'\n') {
                                self.pos += 1;
                            }
                        }
                        b'\n' => cov.hit(Unit::Lexer, 21),
                        other => {
                            cov.hit(Unit::Lexer, 22);
                            out.push(other);
                        }
                    }
                    if matches!(e, b'n' | b'r' | b't' | b'b' | b'f' | b'(' | b')' | b'\\') {
                        cov.hit(Unit::Lexer, 23);
                    }
                }
                _ => out.push(c),
            }
        }
    }

    fn lex_hex(&mut self, cov: &mut CoverageSet, start: usize) -> Result<Vec<u8>, LexError> {
        let mut out = Vec::new();
        let mut pending: Option<u8> = None;
        loop {
            let Some(&c) = self.src.get(self.pos) else {
                return Err(self.err(cov, 24, start, "unterminated hex string"));
            };
            self.pos += 1;
            if c == b'>' {
                if let Some(h) = pending {
                    cov.hit(Unit::Lexer, 25);
                    out.push(h << 4);
                }
                if out.is_empty() {
                    cov.hit(Unit::Lexer, 26);
                }
                return Ok(out);
            }
            if is_whitespace(c) {
                continue;
            }
            match hex_value(c) {
                Some(v) => match pending.take() {
                    Some(h) => out.push(h << 4 | v),
                    None => pending = Some(v),
                },
                None => return Err(self.err(cov, 27, self.pos - 1, "bad hex digit")),
            }
        }
    }

    fn classify_regular(&self, cov: &mut CoverageSet, word: &[u8], start: usize) -> Result<TokenKind, LexError> {
        let kw = match word {
            b"obj" => Some(Keyword::Obj),
            b"endobj" => Some(Keyword::EndObj),
            b"R" => Some(Keyword::R),
            b"true" => Some(Keyword::True),
            b"false" => Some(Keyword::False),
            b"null" => Some(Keyword::Null),
            b"stream" => Some(Keyword::Stream),
            b"endstream" => Some(Keyword::EndStream),
            b"xref" => Some(Keyword::Xref),
            b"trailer" => Some(Keyword::Trailer),
            b"startxref" => Some(Keyword::StartXref),
            _ => None,
        };
        if let Some(kw) = kw {
            let id = match kw {
                Keyword::Obj => 30,
                Keyword::EndObj => 31,
                Keyword::R => 32,
                Keyword::True => 33,
                Keyword::False => 34,
                Keyword::Null => 35,
                Keyword::Stream => 36,
                Keyword::EndStream => 37,
                Keyword::Xref => 38,
                Keyword::Trailer => 39,
                Keyword::StartXref => 40,
                Keyword::Other(_) => unreachable!(),
            };
            cov.hit(Unit::Lexer, id);
            return Ok(TokenKind::Keyword(kw));
        }

        let first = word[0];
        if first.is_ascii_digit() || matches!(first, b'+' | b'-' | b'.') {
            return self.lex_number(cov, word, start);
        }
        cov.hit(Unit::Lexer, 41);
        Ok(TokenKind::Keyword(Keyword::Other(word.to_vec())))
    }

    fn lex_number(&self, cov: &mut CoverageSet, word: &[u8], start: usize) -> Result<TokenKind, LexError> {
        let (sign, body) = match word[0] {
            b'+' => {
                cov.hit(Unit::Lexer, 42);
                (1.0, &word[1..])
            }
            b'-' => {
                cov.hit(Unit::Lexer, 43);
                (-1.0, &word[1..])
            }
            _ => (1.0, word),
        };
        let dot = body.iter().position(|&c| c == b'.');
        let (int_part, frac_part) = match dot {
            Some(i) => (&body[..i], Some(&body[i + 1..])),
            None => (body, None),
        };
        let all_digits = |s: &[u8]| s.iter().all(u8::is_ascii_digit);
        let well_formed = all_digits(int_part)
            && frac_part.is_none_or(all_digits)
            && !(int_part.is_empty() && frac_part.is_none_or(<[u8]>::is_empty));
        if !well_formed {
            if body.iter().any(|&c| c == b'e' || c == b'E') && body.first().is_some_and(u8::is_ascii_digit) {
                return Err(self.err(cov, 44, start, "exponent notation is not allowed in numbers"));
            }
            return Err(self.err(cov, 45, start, "malformed number"));
        }
        // The slice is ASCII digits, sign and at most one dot.
        let text = std::str::from_utf8(body).expect("ascii number");
        let magnitude: f64 = if text.starts_with('.') {
            format!("0{text}").parse()
        } else {
            text.trim_end_matches('.').parse::<f64>().or_else(|_| text.parse())
        }
        .map_err(|_| self.err(cov, 45, start, "malformed number"))?;
        if !magnitude.is_finite() {
            return Err(self.err(cov, 46, start, "number out of range"));
        }
        let value = sign * magnitude;
        let int = if frac_part.is_none() {
            let parsed = std::str::from_utf8(word).ok().and_then(|s| s.parse::<i64>().ok());
            match parsed {
                Some(v) => {
                    cov.hit(Unit::Lexer, 47);
                    Some(v)
                }
                None => {
                    cov.hit(Unit::Lexer, 48);
                    None
                }
            }
        } else {
            cov.hit(Unit::Lexer, 49);
            None
        };
        Ok(TokenKind::Number { value, int })
    }
}

/// Tokenize a whole buffer. Comments are skipped.
pub fn tokenize(text: &[u8]) -> Result<Vec<Token>, LexError> {
    let mut cov = CoverageSet::new();
    let mut lexer = Lexer::new(text);
    let mut out = Vec::new();
    while let Some(tok) = lexer.next_token(&mut cov)? {
        out.push(tok);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(s: &str) -> Vec<TokenKind> {
        tokenize(s.as_bytes()).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn literal_string_is_one_token() {
        assert_eq!(kinds("(Related Work)"), vec![TokenKind::LiteralString(b"Related Work".to_vec())]);
    }

    #[test]
    fn empty_input_has_no_tokens() {
        assert!(tokenize(b"").unwrap().is_empty());
        assert!(tokenize(b"  % only a comment\n").unwrap().is_empty());
    }

    #[test]
    fn name_escape_is_decoded() {
        assert_eq!(kinds("/My#20Name"), vec![TokenKind::Name(b"My Name".to_vec())]);
    }

    #[test]
    fn nested_parens_and_escapes() {
        assert_eq!(
            kinds(r"(a (b) \) \\ \101\n)"),
            vec![TokenKind::LiteralString(b"a (b) ) \\ A\n".to_vec())]
        );
    }

    #[test]
    fn numbers() {
        assert_eq!(
            kinds("12 -3 +4.5 .25 7."),
            vec![
                TokenKind::Number { value: 12.0, int: Some(12) },
                TokenKind::Number { value: -3.0, int: Some(-3) },
                TokenKind::Number { value: 4.5, int: None },
                TokenKind::Number { value: 0.25, int: None },
                TokenKind::Number { value: 7.0, int: None },
            ]
        );
    }

    #[test]
    fn exponent_and_junk_numbers_rejected() {
        assert!(tokenize(b"1e5").is_err());
        assert!(tokenize(b"12abc").is_err());
        assert!(tokenize(b"-").is_err());
        assert!(tokenize(b"1.2.3").is_err());
    }

    #[test]
    fn hex_strings() {
        assert_eq!(kinds("<48 65 6c6C6f>"), vec![TokenKind::HexString(b"Hello".to_vec())]);
        assert_eq!(kinds("<7>"), vec![TokenKind::HexString(vec![0x70])]);
        let err = tokenize(b"<4G>").unwrap_err();
        assert_eq!(err.offset, 2);
    }

    #[test]
    fn delimiters_and_keywords() {
        assert_eq!(
            kinds("<< /K [1 0 R] >> endobj"),
            vec![
                TokenKind::DictOpen,
                TokenKind::Name(b"K".to_vec()),
                TokenKind::ArrayOpen,
                TokenKind::Number { value: 1.0, int: Some(1) },
                TokenKind::Number { value: 0.0, int: Some(0) },
                TokenKind::Keyword(Keyword::R),
                TokenKind::ArrayClose,
                TokenKind::DictClose,
                TokenKind::Keyword(Keyword::EndObj),
            ]
        );
    }

    #[test]
    fn lexical_errors_carry_offsets() {
        let e = tokenize(b"[1 (abc").unwrap_err();
        assert_eq!(e.offset, 3);
        let e = tokenize(b"1 > 2").unwrap_err();
        assert_eq!(e.offset, 2);
        let e = tokenize(b"/A#4").unwrap_err();
        assert_eq!(e.offset, 2);
        assert!(tokenize(b"}").is_err());
    }

    #[test]
    fn huge_number_is_rejected_not_infinite() {
        let digits = "9".repeat(400);
        assert!(tokenize(digits.as_bytes()).is_err());
    }
}

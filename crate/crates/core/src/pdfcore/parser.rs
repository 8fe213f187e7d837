//! Instrumented well-formedness oracle for single PDF objects.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::coverage::{CoverageSet, Unit};
use super::lexer::{Keyword, LexError, Lexer, Token, TokenKind};
use super::value::PdfValue;

pub const MAX_DEPTH: usize = 64;
pub const TOKEN_BUDGET: usize = 1_000_000;

/// Log prefix of every failure line, so logs can be grepped for failures.
pub const ERROR_PREFIX: &str = "PARSE-ERROR:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorCode {
    LexError,
    MissingObjKeyword,
    MissingEndobj,
    BadDictKey,
    UnbalancedDelimiter,
    DepthExceeded,
    TokenBudgetExceeded,
    TrailingGarbage,
    UnexpectedToken,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::LexError => "lex-error",
            ErrorCode::MissingObjKeyword => "missing-obj-keyword",
            ErrorCode::MissingEndobj => "missing-endobj",
            ErrorCode::BadDictKey => "bad-dict-key",
            ErrorCode::UnbalancedDelimiter => "unbalanced-delimiter",
            ErrorCode::DepthExceeded => "depth-exceeded",
            ErrorCode::TokenBudgetExceeded => "token-budget-exceeded",
            ErrorCode::TrailingGarbage => "trailing-garbage",
            ErrorCode::UnexpectedToken => "unexpected-token",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFailure {
    pub code: ErrorCode,
    pub message: String,
    pub offset: usize,
}

impl ParseFailure {
    /// One `PARSE-ERROR:` log line.
    pub fn log_line(&self) -> String {
        format!("{ERROR_PREFIX} {} at offset {}: {}", self.code, self.offset, self.message)
    }
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at offset {}: {}", self.code, self.offset, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseStatus {
    Pass,
    Fail(ParseFailure),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectHeader {
    pub id: u32,
    pub generation: u16,
}

#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub status: ParseStatus,
    /// Present iff the status is `Pass`.
    pub value: Option<PdfValue>,
    pub header: Option<ObjectHeader>,
    pub coverage: CoverageSet,
}

impl ParseOutcome {
    pub fn passed(&self) -> bool {
        matches!(self.status, ParseStatus::Pass)
    }

    pub fn failure(&self) -> Option<&ParseFailure> {
        match &self.status {
            ParseStatus::Pass => None,
            ParseStatus::Fail(f) => Some(f),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Require the `<id> <gen>` header before `obj`.
    pub strict: bool,
    pub max_depth: usize,
    pub token_budget: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { strict: true, max_depth: MAX_DEPTH, token_budget: TOKEN_BUDGET }
    }
}

/// Parse one `<id> <gen> obj <value> endobj` object.
pub fn parse_object(text: &[u8], strict: bool) -> ParseOutcome {
    parse_object_with(text, ParseOptions { strict, ..ParseOptions::default() })
}

pub fn parse_object_with(text: &[u8], options: ParseOptions) -> ParseOutcome {
    let mut parser = Parser::new(text, 0, options);
    let result = parser.object();
    let coverage = parser.cov;
    match result {
        Ok((header, value)) => ParseOutcome { status: ParseStatus::Pass, value: Some(value), header, coverage },
        Err(f) => ParseOutcome { status: ParseStatus::Fail(f), value: None, header: None, coverage },
    }
}

/// Parse a single value starting at `pos`; returns the value and the offset
/// just past it. Used for trailer dictionaries.
pub(crate) fn parse_value_at(
    src: &[u8],
    pos: usize,
    cov: &mut CoverageSet,
) -> Result<(PdfValue, usize), ParseFailure> {
    let mut parser = Parser::new(src, pos, ParseOptions::default());
    let result = parser.value(0, Context::Top);
    cov.extend_from(&parser.cov);
    let value = result?;
    Ok((value, parser.lexer.position()))
}

#[derive(Clone, Copy)]
enum Context {
    Top,
    Array,
    Dict,
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: VecDeque<Token>,
    consumed: usize,
    options: ParseOptions,
    cov: CoverageSet,
}

fn lex_failure(e: LexError) -> ParseFailure {
    ParseFailure { code: ErrorCode::LexError, message: e.message, offset: e.offset }
}

impl<'a> Parser<'a> {
    fn new(src: &'a [u8], pos: usize, options: ParseOptions) -> Self {
        Parser { lexer: Lexer::at(src, pos), peeked: VecDeque::new(), consumed: 0, options, cov: CoverageSet::new() }
    }

    fn hit(&mut self, id: u16) {
        self.cov.hit(Unit::Parser, id);
    }

    fn fail(&mut self, id: u16, code: ErrorCode, offset: usize, message: impl Into<String>) -> ParseFailure {
        self.hit(id);
        ParseFailure { code, message: message.into(), offset: offset.min(self.lexer.source().len()) }
    }

    fn end_offset(&self) -> usize {
        self.lexer.source().len()
    }

    fn fill(&mut self, n: usize) -> Result<(), ParseFailure> {
        while self.peeked.len() < n {
            match self.lexer.next_token(&mut self.cov) {
                Ok(Some(t)) => self.peeked.push_back(t),
                Ok(None) => break,
                Err(e) => {
                    self.hit(1);
                    return Err(lex_failure(e));
                }
            }
        }
        Ok(())
    }

    fn peek(&mut self, n: usize) -> Result<Option<&Token>, ParseFailure> {
        self.fill(n + 1)?;
        Ok(self.peeked.get(n))
    }

    fn next(&mut self) -> Result<Option<Token>, ParseFailure> {
        self.fill(1)?;
        let tok = self.peeked.pop_front();
        if tok.is_some() {
            self.consumed += 1;
            if self.consumed > self.options.token_budget {
                let off = tok.as_ref().map_or(0, |t| t.offset);
                return Err(self.fail(2, ErrorCode::TokenBudgetExceeded, off, "token budget exceeded"));
            }
        }
        Ok(tok)
    }

    fn object(&mut self) -> Result<(Option<ObjectHeader>, PdfValue), ParseFailure> {
        self.hit(3);
        let header = self.header()?;
        let value = self.value(0, Context::Top)?;
        match self.next()? {
            Some(Token { kind: TokenKind::Keyword(Keyword::EndObj), .. }) => self.hit(4),
            Some(Token { kind: TokenKind::Keyword(Keyword::Stream), offset }) => {
                return Err(self.fail(5, ErrorCode::UnexpectedToken, offset, "stream objects are not supported"));
            }
            Some(t) => {
                return Err(self.fail(6, ErrorCode::MissingEndobj, t.offset, "expected `endobj` after object value"));
            }
            None => {
                let off = self.end_offset();
                return Err(self.fail(7, ErrorCode::MissingEndobj, off, "input ended before `endobj`"));
            }
        }
        match self.next()? {
            None => {
                self.hit(8);
                Ok((header, value))
            }
            Some(t) => Err(self.fail(9, ErrorCode::TrailingGarbage, t.offset, "data after `endobj`")),
        }
    }

    fn header(&mut self) -> Result<Option<ObjectHeader>, ParseFailure> {
        let first = self.next()?;
        match first {
            None => {
                let off = self.end_offset();
                Err(self.fail(10, ErrorCode::MissingObjKeyword, off, "empty input"))
            }
            Some(Token { kind: TokenKind::Keyword(Keyword::Obj), offset }) => {
                if self.options.strict {
                    Err(self.fail(11, ErrorCode::MissingObjKeyword, offset, "object number missing before `obj`"))
                } else {
                    self.hit(12);
                    Ok(None)
                }
            }
            Some(Token { kind: TokenKind::Number { int: Some(id), .. }, offset }) => {
                let Ok(id) = u32::try_from(id) else {
                    return Err(self.fail(13, ErrorCode::MissingObjKeyword, offset, "object number out of range"));
                };
                let generation = match self.next()? {
                    Some(Token { kind: TokenKind::Number { int: Some(g), .. }, offset }) => match u16::try_from(g) {
                        Ok(g) => g,
                        Err(_) => {
                            return Err(self.fail(14, ErrorCode::MissingObjKeyword, offset, "generation out of range"));
                        }
                    },
                    Some(t) => {
                        return Err(self.fail(15, ErrorCode::MissingObjKeyword, t.offset, "expected generation number"));
                    }
                    None => {
                        let off = self.end_offset();
                        return Err(self.fail(16, ErrorCode::MissingObjKeyword, off, "expected generation number"));
                    }
                };
                match self.next()? {
                    Some(Token { kind: TokenKind::Keyword(Keyword::Obj), .. }) => {
                        self.hit(17);
                        if generation > 0 {
                            self.hit(18);
                        }
                        Ok(Some(ObjectHeader { id, generation }))
                    }
                    Some(t) => Err(self.fail(19, ErrorCode::MissingObjKeyword, t.offset, "expected `obj`")),
                    None => {
                        let off = self.end_offset();
                        Err(self.fail(20, ErrorCode::MissingObjKeyword, off, "expected `obj`"))
                    }
                }
            }
            Some(t) => Err(self.fail(21, ErrorCode::MissingObjKeyword, t.offset, "object must start with `<id> <gen> obj`")),
        }
    }

    fn class_point(&mut self, ctx: Context, kind: u16) {
        let base = match ctx {
            Context::Top => 100,
            Context::Array => 120,
            Context::Dict => 140,
        };
        self.hit(base + kind);
    }

    fn value(&mut self, depth: usize, ctx: Context) -> Result<PdfValue, ParseFailure> {
        let Some(tok) = self.next()? else {
            let off = self.end_offset();
            return Err(match ctx {
                Context::Top => self.fail(30, ErrorCode::MissingEndobj, off, "input ended where a value was expected"),
                _ => self.fail(31, ErrorCode::UnbalancedDelimiter, off, "input ended inside a container"),
            });
        };
        match tok.kind {
            TokenKind::Number { value, int } => {
                if let Some(id) = int.filter(|&i| i >= 0) {
                    if let Some(r) = self.try_reference(id)? {
                        self.class_point(ctx, 8);
                        return Ok(r);
                    }
                }
                self.class_point(ctx, if int.is_some() { 1 } else { 2 });
                Ok(PdfValue::Number(value))
            }
            TokenKind::LiteralString(s) => {
                self.class_point(ctx, 3);
                Ok(PdfValue::LiteralString(s))
            }
            TokenKind::HexString(s) => {
                self.class_point(ctx, 4);
                Ok(PdfValue::HexString(s))
            }
            TokenKind::Name(n) => {
                self.class_point(ctx, 5);
                Ok(PdfValue::Name(n))
            }
            TokenKind::ArrayOpen => {
                self.class_point(ctx, 6);
                self.enter(depth, tok.offset)?;
                self.array(depth + 1)
            }
            TokenKind::DictOpen => {
                self.class_point(ctx, 7);
                self.enter(depth, tok.offset)?;
                self.dict(depth + 1)
            }
            TokenKind::Keyword(Keyword::True) => {
                self.class_point(ctx, 0);
                Ok(PdfValue::Boolean(true))
            }
            TokenKind::Keyword(Keyword::False) => {
                self.class_point(ctx, 0);
                self.hit(32);
                Ok(PdfValue::Boolean(false))
            }
            TokenKind::Keyword(Keyword::Null) => {
                self.class_point(ctx, 9);
                Ok(PdfValue::Null)
            }
            TokenKind::ArrayClose => Err(self.fail(33, ErrorCode::UnbalancedDelimiter, tok.offset, "unmatched `]`")),
            TokenKind::DictClose => Err(self.fail(34, ErrorCode::UnbalancedDelimiter, tok.offset, "unmatched `>>`")),
            TokenKind::Keyword(Keyword::EndObj) => {
                Err(self.fail(35, ErrorCode::UnexpectedToken, tok.offset, "`endobj` where a value was expected"))
            }
            TokenKind::Keyword(Keyword::R) => {
                Err(self.fail(36, ErrorCode::UnexpectedToken, tok.offset, "`R` without object reference"))
            }
            TokenKind::Keyword(Keyword::Obj) => {
                Err(self.fail(37, ErrorCode::UnexpectedToken, tok.offset, "nested `obj`"))
            }
            TokenKind::Keyword(Keyword::Stream | Keyword::EndStream) => {
                Err(self.fail(38, ErrorCode::UnexpectedToken, tok.offset, "stream keyword inside object"))
            }
            TokenKind::Keyword(Keyword::Xref | Keyword::Trailer | Keyword::StartXref) => {
                Err(self.fail(39, ErrorCode::UnexpectedToken, tok.offset, "file-structure keyword inside object"))
            }
            TokenKind::Keyword(Keyword::Other(_)) => {
                Err(self.fail(40, ErrorCode::UnexpectedToken, tok.offset, "unknown keyword"))
            }
        }
    }

    fn enter(&mut self, depth: usize, offset: usize) -> Result<(), ParseFailure> {
        if depth + 1 > self.options.max_depth {
            return Err(self.fail(41, ErrorCode::DepthExceeded, offset, "nesting too deep"));
        }
        let bucket = match depth + 1 {
            1 => 42,
            2 => 43,
            3 => 44,
            4..=8 => 45,
            _ => 46,
        };
        self.hit(bucket);
        Ok(())
    }

    /// After a non-negative integer, check for `<gen> R`.
    fn try_reference(&mut self, id: i64) -> Result<Option<PdfValue>, ParseFailure> {
        let gen = match self.peek(0)? {
            Some(Token { kind: TokenKind::Number { int: Some(g), .. }, .. }) => *g,
            _ => return Ok(None),
        };
        if !matches!(self.peek(1)?, Some(Token { kind: TokenKind::Keyword(Keyword::R), .. })) {
            self.hit(47);
            return Ok(None);
        }
        match (u32::try_from(id), u16::try_from(gen)) {
            (Ok(id), Ok(gen)) => {
                self.next()?;
                self.next()?;
                if gen > 0 {
                    self.hit(48);
                }
                Ok(Some(PdfValue::Ref(id, gen)))
            }
            _ => {
                self.hit(49);
                Ok(None)
            }
        }
    }

    fn array(&mut self, depth: usize) -> Result<PdfValue, ParseFailure> {
        let mut items = Vec::new();
        loop {
            match self.peek(0)?.map(|t| (&t.kind, t.offset)) {
                Some((TokenKind::ArrayClose, _)) => {
                    self.next()?;
                    self.hit(if items.is_empty() { 50 } else { 51 });
                    if items.len() > 16 {
                        self.hit(52);
                    }
                    return Ok(PdfValue::Array(items));
                }
                None => {
                    let off = self.end_offset();
                    return Err(self.fail(53, ErrorCode::UnbalancedDelimiter, off, "unterminated array"));
                }
                Some((TokenKind::Keyword(Keyword::EndObj), off)) => {
                    return Err(self.fail(54, ErrorCode::UnbalancedDelimiter, off, "`endobj` inside array"));
                }
                Some((TokenKind::DictClose, off)) => {
                    return Err(self.fail(55, ErrorCode::UnbalancedDelimiter, off, "`>>` closes an array"));
                }
                Some(_) => items.push(self.value(depth, Context::Array)?),
            }
        }
    }

    fn dict(&mut self, depth: usize) -> Result<PdfValue, ParseFailure> {
        let mut entries = BTreeMap::new();
        loop {
            let Some(tok) = self.next()? else {
                let off = self.end_offset();
                return Err(self.fail(60, ErrorCode::UnbalancedDelimiter, off, "unterminated dictionary"));
            };
            let key = match tok.kind {
                TokenKind::DictClose => {
                    self.hit(if entries.is_empty() { 61 } else { 62 });
                    return Ok(PdfValue::Dict(entries));
                }
                TokenKind::Name(n) => n,
                TokenKind::Keyword(Keyword::EndObj) => {
                    return Err(self.fail(63, ErrorCode::UnbalancedDelimiter, tok.offset, "`endobj` inside dictionary"));
                }
                TokenKind::ArrayClose => {
                    return Err(self.fail(64, ErrorCode::UnbalancedDelimiter, tok.offset, "`]` closes a dictionary"));
                }
                _ => return Err(self.fail(65, ErrorCode::BadDictKey, tok.offset, "dictionary key must be a name")),
            };
            self.hit(66);
            match self.peek(0)?.map(|t| (&t.kind, t.offset)) {
                Some((TokenKind::DictClose, off)) => {
                    return Err(self.fail(67, ErrorCode::UnexpectedToken, off, "dictionary key without value"));
                }
                None => {
                    let off = self.end_offset();
                    return Err(self.fail(68, ErrorCode::UnbalancedDelimiter, off, "unterminated dictionary"));
                }
                Some((TokenKind::Keyword(Keyword::EndObj), off)) => {
                    return Err(self.fail(69, ErrorCode::UnbalancedDelimiter, off, "`endobj` inside dictionary"));
                }
                _ => {}
            }
            let value = self.value(depth, Context::Dict)?;
            if entries.insert(key, value).is_some() {
                self.hit(70);
            }
        }
    }
}

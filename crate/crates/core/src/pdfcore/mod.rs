//! Reference PDF-object grammar: tokenizer, value AST, the instrumented
//! well-formedness oracle, and host-file structure parsing.
//!
//! The oracle is the fuzz target. It never panics and never loops: nesting
//! is capped at [`MAX_DEPTH`] and each parse consumes at most
//! [`TOKEN_BUDGET`] tokens. Coverage is returned with every parse rather than
//! accumulated globally, so concurrent callers need no synchronisation.

mod coverage;
mod host;
mod lexer;
mod parser;
mod value;

pub use coverage::{coverage_union, CoveragePoint, CoverageSet, Unit};
pub use host::{
    parse_host, Body, EntryKind, HostError, HostStructure, IndirectObject, Trailer, XrefEntry, XrefSubsection,
    XrefTable,
};
pub use lexer::{is_delimiter, is_regular, is_whitespace, tokenize, Keyword, LexError, Lexer, Token, TokenKind};
pub use parser::{
    parse_object, parse_object_with, ErrorCode, ObjectHeader, ParseFailure, ParseOptions, ParseOutcome,
    ParseStatus, ERROR_PREFIX, MAX_DEPTH, TOKEN_BUDGET,
};
pub use value::PdfValue;

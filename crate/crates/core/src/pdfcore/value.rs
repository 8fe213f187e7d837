use std::collections::BTreeMap;

use super::lexer::{is_delimiter, is_whitespace};

/// Parsed PDF object value.
#[derive(Debug, Clone, PartialEq)]
pub enum PdfValue {
    Boolean(bool),
    Number(f64),
    LiteralString(Vec<u8>),
    HexString(Vec<u8>),
    Name(Vec<u8>),
    Array(Vec<PdfValue>),
    Dict(BTreeMap<Vec<u8>, PdfValue>),
    Ref(u32, u16),
    Null,
}

impl PdfValue {
    pub fn as_dict(&self) -> Option<&BTreeMap<Vec<u8>, PdfValue>> {
        match self {
            PdfValue::Dict(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match *self {
            PdfValue::Number(n) => Some(n),
            _ => None,
        }
    }

    /// Non-negative integral number.
    pub fn as_index(&self) -> Option<u64> {
        match *self {
            PdfValue::Number(n) if n >= 0.0 && n.fract() == 0.0 && n <= u64::MAX as f64 => Some(n as u64),
            _ => None,
        }
    }

    /// Serialize in a form the reference parser reads back to an equal value.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out);
        out
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        match self {
            PdfValue::Boolean(true) => out.extend_from_slice(b"true"),
            PdfValue::Boolean(false) => out.extend_from_slice(b"false"),
            PdfValue::Null => out.extend_from_slice(b"null"),
            PdfValue::Number(n) => write_number(*n, out),
            PdfValue::LiteralString(s) => write_literal(s, out),
            PdfValue::HexString(s) => {
                out.push(b'<');
                for b in s {
                    out.extend_from_slice(format!("{b:02X}").as_bytes());
                }
                out.push(b'>');
            }
            PdfValue::Name(n) => write_name(n, out),
            PdfValue::Array(items) => {
                out.push(b'[');
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(b' ');
                    }
                    v.write_to(out);
                }
                out.push(b']');
            }
            PdfValue::Dict(d) => {
                out.extend_from_slice(b"<<");
                for (k, v) in d {
                    out.push(b' ');
                    write_name(k, out);
                    out.push(b' ');
                    v.write_to(out);
                }
                out.extend_from_slice(b" >>");
            }
            PdfValue::Ref(id, gen) => out.extend_from_slice(format!("{id} {gen} R").as_bytes()),
        }
    }
}

fn write_number(n: f64, out: &mut Vec<u8>) {
    // `Display` for f64 never uses exponent notation and round-trips.
    if n.fract() == 0.0 && n.abs() < 1e15 {
        out.extend_from_slice(format!("{}", n as i64).as_bytes());
    } else {
        out.extend_from_slice(format!("{n}").as_bytes());
    }
}

fn write_literal(s: &[u8], out: &mut Vec<u8>) {
    out.push(b'(');
    for &b in s {
        match b {
            b'(' | b')' | b'\\' => {
                out.push(b'\\');
                out.push(b);
            }
            b'\n' => out.extend_from_slice(b"\\n"),
            b'\r' => out.extend_from_slice(b"\\r"),
            0x20..=0x7e => out.push(b),
            _ => out.extend_from_slice(format!("\\{b:03o}").as_bytes()),
        }
    }
    out.push(b')');
}

fn write_name(n: &[u8], out: &mut Vec<u8>) {
    out.push(b'/');
    for &b in n {
        if b == b'#' || is_whitespace(b) || is_delimiter(b) || !(0x21..=0x7e).contains(&b) {
            out.extend_from_slice(format!("#{b:02X}").as_bytes());
        } else {
            out.push(b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_serialize_without_exponent() {
        assert_eq!(PdfValue::Number(680.6).to_bytes(), b"680.6");
        assert_eq!(PdfValue::Number(-3.0).to_bytes(), b"-3");
        assert_eq!(PdfValue::Number(1e-7).to_bytes(), b"0.0000001");
    }

    #[test]
    fn names_escape_delimiters() {
        assert_eq!(PdfValue::Name(b"My Name".to_vec()).to_bytes(), b"/My#20Name");
        assert_eq!(PdfValue::Name(b"a#b".to_vec()).to_bytes(), b"/a#23b");
    }

    #[test]
    fn strings_escape_parens() {
        assert_eq!(PdfValue::LiteralString(b"a(b)\\\x01".to_vec()).to_bytes(), b"(a\\(b\\)\\\\\\001)");
    }
}

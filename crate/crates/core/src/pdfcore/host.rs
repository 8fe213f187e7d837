//! File-structure parsing: `startxref`, cross-reference tables, trailers and
//! `/Prev` chains, read from the end of the file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::coverage::{CoverageSet, Unit};
use super::lexer::{Keyword, Lexer, TokenKind};
use super::parser::{parse_object, parse_value_at, ParseOutcome};
use super::value::PdfValue;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
#[error("host-malformed: {reason}{}", .offset.map(|o| format!(" (offset {o})")).unwrap_or_default())]
pub struct HostError {
    pub reason: String,
    pub offset: Option<usize>,
}

fn malformed(reason: impl Into<String>, offset: impl Into<Option<usize>>) -> HostError {
    HostError { reason: reason.into(), offset: offset.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    InUse,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct XrefEntry {
    /// Byte offset for in-use entries, next free object number for free ones.
    pub offset: u64,
    pub generation: u16,
    pub kind: EntryKind,
}

impl XrefEntry {
    pub fn in_use(offset: u64, generation: u16) -> Self {
        XrefEntry { offset, generation, kind: EntryKind::InUse }
    }

    pub fn free(next: u64, generation: u16) -> Self {
        XrefEntry { offset: next, generation, kind: EntryKind::Free }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XrefSubsection {
    pub start: u32,
    pub entries: Vec<XrefEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct XrefTable {
    pub subsections: Vec<XrefSubsection>,
}

impl XrefTable {
    pub fn entry(&self, id: u32) -> Option<&XrefEntry> {
        self.subsections.iter().find_map(|s| {
            let idx = id.checked_sub(s.start)? as usize;
            s.entries.get(idx)
        })
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, &XrefEntry)> {
        self.subsections
            .iter()
            .flat_map(|s| s.entries.iter().enumerate().map(move |(i, e)| (s.start + i as u32, e)))
    }

    /// Serialize with 20-byte entries (`oooooooooo ggggg n\r\n`).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::from("xref\n");
        for sub in &self.subsections {
            let _ = writeln!(out, "{} {}", sub.start, sub.entries.len());
            for e in &sub.entries {
                let k = match e.kind {
                    EntryKind::InUse => 'n',
                    EntryKind::Free => 'f',
                };
                let _ = write!(out, "{:010} {:05} {k}\r\n", e.offset, e.generation);
            }
        }
        out.into_bytes()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trailer {
    pub dict: BTreeMap<Vec<u8>, PdfValue>,
    /// Offset of the `xref` keyword of the table this trailer closes.
    pub startxref: u64,
}

impl Trailer {
    pub fn size(&self) -> Option<u64> {
        self.dict.get(b"Size".as_slice()).and_then(PdfValue::as_index)
    }

    pub fn prev(&self) -> Option<u64> {
        self.dict.get(b"Prev".as_slice()).and_then(PdfValue::as_index)
    }
}

#[derive(Debug, Clone)]
pub struct IndirectObject {
    pub id: u32,
    pub generation: u16,
    pub offset: usize,
    /// Bytes from the object's offset up to the next structural boundary.
    pub region: std::ops::Range<usize>,
    pub outcome: ParseOutcome,
}

#[derive(Debug, Clone)]
pub struct Body {
    pub objects: Vec<IndirectObject>,
    pub xref: XrefTable,
    pub trailer: Trailer,
}

#[derive(Debug, Clone)]
pub struct HostStructure {
    /// Oldest body first.
    pub bodies: Vec<Body>,
    pub last_object_id: u32,
    /// Structural coverage plus the coverage of every object parse.
    pub coverage: CoverageSet,
}

impl HostStructure {
    pub fn last_trailer(&self) -> &Trailer {
        &self.bodies.last().expect("at least one body").trailer
    }

    /// The newest definition of `id`.
    pub fn resolve(&self, id: u32) -> Option<&IndirectObject> {
        self.bodies.iter().rev().find_map(|b| b.objects.iter().find(|o| o.id == id))
    }

    /// Current generation of `id` according to the newest xref entry.
    pub fn generation_of(&self, id: u32) -> Option<u16> {
        self.bodies.iter().rev().find_map(|b| b.xref.entry(id).map(|e| e.generation))
    }
}

const MAX_BODIES: usize = 4096;

fn hit(cov: &mut CoverageSet, unit: Unit, id: u16) {
    cov.hit(unit, id);
}

fn find_last(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).rposition(|w| w == needle)
}

fn read_int(lexer: &mut Lexer<'_>, cov: &mut CoverageSet, what: &str) -> Result<i64, HostError> {
    let at = lexer.position();
    match lexer.next_token(cov) {
        Ok(Some(t)) => match t.kind {
            TokenKind::Number { int: Some(v), .. } => Ok(v),
            _ => Err(malformed(format!("expected {what}"), t.offset)),
        },
        Ok(None) => Err(malformed(format!("expected {what}, found end of file"), at)),
        Err(e) => Err(malformed(format!("expected {what}: {e}"), e.offset)),
    }
}

fn read_startxref(file: &[u8], cov: &mut CoverageSet) -> Result<usize, HostError> {
    let Some(pos) = find_last(file, b"startxref") else {
        hit(cov, Unit::Host, 1);
        return Err(malformed("missing startxref", None));
    };
    hit(cov, Unit::Host, 2);
    let mut lexer = Lexer::at(file, pos + b"startxref".len());
    let off = read_int(&mut lexer, cov, "startxref offset")?;
    if find_last(&file[pos..], b"%%EOF").is_some() {
        hit(cov, Unit::Host, 3);
    } else {
        hit(cov, Unit::Host, 4);
    }
    usize::try_from(off)
        .ok()
        .filter(|&o| o < file.len())
        .ok_or_else(|| malformed("startxref points outside the file", pos))
}

fn read_xref(file: &[u8], at: usize, cov: &mut CoverageSet) -> Result<(XrefTable, usize), HostError> {
    let mut lexer = Lexer::at(file, at);
    match lexer.next_token(cov) {
        Ok(Some(t)) if t.kind == TokenKind::Keyword(Keyword::Xref) && t.offset == at => hit(cov, Unit::Xref, 1),
        _ => {
            hit(cov, Unit::Xref, 2);
            return Err(malformed("xref offset mismatch: no `xref` keyword at startxref", at));
        }
    }
    let mut table = XrefTable::default();
    loop {
        let mark = lexer.position();
        let tok = lexer.next_token(cov).map_err(|e| malformed(format!("bad xref table: {e}"), e.offset))?;
        match tok.map(|t| t.kind) {
            Some(TokenKind::Keyword(Keyword::Trailer)) => {
                hit(cov, Unit::Xref, 3);
                break;
            }
            Some(TokenKind::Number { int: Some(start), .. }) => {
                let start = u32::try_from(start).map_err(|_| malformed("negative subsection start", mark))?;
                let count = read_int(&mut lexer, cov, "subsection count")?;
                let count = usize::try_from(count).map_err(|_| malformed("negative subsection count", mark))?;
                if count > file.len() / 18 + 1 {
                    return Err(malformed("subsection count exceeds file size", mark));
                }
                hit(cov, Unit::Xref, if start == 0 { 4 } else { 5 });
                let mut entries = Vec::with_capacity(count);
                for _ in 0..count {
                    let offset = read_int(&mut lexer, cov, "xref entry offset")?;
                    let generation = read_int(&mut lexer, cov, "xref entry generation")?;
                    let offset = u64::try_from(offset).map_err(|_| malformed("negative xref offset", mark))?;
                    let generation =
                        u16::try_from(generation).map_err(|_| malformed("generation out of range", mark))?;
                    let kind_at = lexer.position();
                    let kind = match lexer.next_token(cov) {
                        Ok(Some(t)) => match t.kind {
                            TokenKind::Keyword(Keyword::Other(k)) if k == b"n" => EntryKind::InUse,
                            TokenKind::Keyword(Keyword::Other(k)) if k == b"f" => EntryKind::Free,
                            _ => return Err(malformed("xref entry kind must be `n` or `f`", t.offset)),
                        },
                        _ => return Err(malformed("truncated xref entry", kind_at)),
                    };
                    match kind {
                        EntryKind::InUse => hit(cov, Unit::Xref, 6),
                        EntryKind::Free => hit(cov, Unit::Xref, 7),
                    }
                    if generation > 0 && kind == EntryKind::InUse {
                        hit(cov, Unit::Xref, 8);
                    }
                    if generation == 65535 {
                        hit(cov, Unit::Xref, 9);
                    }
                    entries.push(XrefEntry { offset, generation, kind });
                }
                if entries.is_empty() {
                    hit(cov, Unit::Xref, 10);
                }
                table.subsections.push(XrefSubsection { start, entries });
            }
            _ => {
                hit(cov, Unit::Xref, 11);
                return Err(malformed("expected xref subsection or `trailer`", mark));
            }
        }
    }
    match table.subsections.len() {
        0 => return Err(malformed("xref table has no subsections", at)),
        1 => hit(cov, Unit::Xref, 12),
        _ => hit(cov, Unit::Xref, 13),
    }
    if let Some(e) = table.entry(0) {
        if e.kind == EntryKind::Free && e.generation == 65535 {
            hit(cov, Unit::Xref, 14);
        } else {
            hit(cov, Unit::Xref, 15);
        }
    }
    Ok((table, lexer.position()))
}

fn read_trailer(file: &[u8], at: usize, startxref: usize, cov: &mut CoverageSet) -> Result<Trailer, HostError> {
    let (value, _) =
        parse_value_at(file, at, cov).map_err(|f| malformed(format!("bad trailer dictionary: {f}"), f.offset))?;
    let PdfValue::Dict(dict) = value else {
        hit(cov, Unit::Trailer, 1);
        return Err(malformed("trailer is not a dictionary", at));
    };
    hit(cov, Unit::Trailer, 2);
    for (key, id) in [("Size", 3), ("Root", 4), ("Info", 5), ("Prev", 6), ("ID", 7)] {
        if dict.contains_key(key.as_bytes()) {
            hit(cov, Unit::Trailer, id);
        }
    }
    let trailer = Trailer { dict, startxref: startxref as u64 };
    if trailer.size().is_none() {
        hit(cov, Unit::Trailer, 8);
        return Err(malformed("trailer lacks /Size", at));
    }
    Ok(trailer)
}

/// Check that `<id> <gen> obj` sits exactly at `offset`.
fn check_object_header(file: &[u8], offset: usize, id: u32, gen: u16, cov: &mut CoverageSet) -> Result<(), HostError> {
    let mut scratch = CoverageSet::new();
    let mut lexer = Lexer::at(file, offset);
    let mut toks = Vec::with_capacity(3);
    for _ in 0..3 {
        match lexer.next_token(&mut scratch) {
            Ok(Some(t)) => toks.push(t),
            _ => break,
        }
    }
    let ok = match toks.as_slice() {
        [a, b, c] => {
            a.offset == offset
                && a.kind == TokenKind::Number { value: f64::from(id), int: Some(i64::from(id)) }
                && b.kind == TokenKind::Number { value: f64::from(gen), int: Some(i64::from(gen)) }
                && c.kind == TokenKind::Keyword(Keyword::Obj)
        }
        _ => false,
    };
    if ok {
        hit(cov, Unit::Host, 5);
        Ok(())
    } else {
        hit(cov, Unit::Host, 6);
        Err(malformed(format!("xref offset mismatch for object {id} {gen}"), offset))
    }
}

/// Parse a host file from the end: `startxref`, then each cross-reference
/// table and trailer, following `/Prev`. Object bodies are parsed but their
/// failures do not make the host malformed.
pub fn parse_host(file: &[u8]) -> Result<HostStructure, HostError> {
    let mut cov = CoverageSet::new();
    let mut next = Some(read_startxref(file, &mut cov)?);
    let mut raw_bodies = Vec::new();
    let mut seen = BTreeSet::new();
    while let Some(at) = next {
        if !seen.insert(at) {
            hit(&mut cov, Unit::Host, 7);
            return Err(malformed("/Prev chain loops", at));
        }
        if raw_bodies.len() >= MAX_BODIES {
            return Err(malformed("too many incremental bodies", at));
        }
        let (xref, after) = read_xref(file, at, &mut cov)?;
        let trailer = read_trailer(file, after, at, &mut cov)?;
        next = match trailer.prev() {
            Some(p) => {
                hit(&mut cov, Unit::Host, 8);
                let p = usize::try_from(p).ok().filter(|&p| p < file.len());
                Some(p.ok_or_else(|| malformed("/Prev points outside the file", at))?)
            }
            None => None,
        };
        raw_bodies.push((xref, trailer));
    }
    raw_bodies.reverse();
    hit(&mut cov, Unit::Host, match raw_bodies.len() {
        1 => 9,
        2 => 10,
        _ => 11,
    });

    // Every structural boundary: object starts and xref starts.
    let mut boundaries: BTreeSet<usize> = BTreeSet::new();
    for (xref, trailer) in &raw_bodies {
        boundaries.insert(trailer.startxref as usize);
        for (_, e) in xref.entries() {
            if e.kind == EntryKind::InUse {
                boundaries.insert(e.offset as usize);
            }
        }
    }

    let mut last_object_id = 0;
    let mut bodies = Vec::with_capacity(raw_bodies.len());
    for (xref, trailer) in raw_bodies {
        let mut objects = Vec::new();
        for (id, e) in xref.entries() {
            if e.kind != EntryKind::InUse {
                continue;
            }
            if id == 0 {
                hit(&mut cov, Unit::Host, 12);
            }
            let offset = usize::try_from(e.offset)
                .ok()
                .filter(|&o| o < file.len())
                .ok_or_else(|| malformed(format!("object {id} offset outside the file"), None))?;
            check_object_header(file, offset, id, e.generation, &mut cov)?;
            let end = boundaries.range(offset + 1..).next().copied().unwrap_or(file.len());
            let outcome = parse_object(&file[offset..end], true);
            hit(&mut cov, Unit::Host, if outcome.passed() { 13 } else { 14 });
            cov.extend_from(&outcome.coverage);
            last_object_id = last_object_id.max(id);
            objects.push(IndirectObject { id, generation: e.generation, offset, region: offset..end, outcome });
        }
        if objects.is_empty() {
            hit(&mut cov, Unit::Host, 15);
        }
        bodies.push(Body { objects, xref, trailer });
    }
    Ok(HostStructure { bodies, last_object_id, coverage: cov })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_pdf() -> Vec<u8> {
        let mut f = b"%PDF-1.4\n".to_vec();
        let o1 = f.len();
        f.extend_from_slice(b"1 0 obj\n<< /Type /Catalog /Pages 2 0 R >>\nendobj\n");
        let o2 = f.len();
        f.extend_from_slice(b"2 0 obj\n<< /Type /Pages /Kids [] /Count 0 >>\nendobj\n");
        let x = f.len();
        let table = XrefTable {
            subsections: vec![XrefSubsection {
                start: 0,
                entries: vec![XrefEntry::free(0, 65535), XrefEntry::in_use(o1 as u64, 0), XrefEntry::in_use(o2 as u64, 0)],
            }],
        };
        f.extend_from_slice(&table.to_bytes());
        f.extend_from_slice(format!("trailer\n<< /Size 3 /Root 1 0 R >>\nstartxref\n{x}\n%%EOF\n").as_bytes());
        f
    }

    #[test]
    fn xref_entries_are_twenty_bytes() {
        let t = XrefTable { subsections: vec![XrefSubsection { start: 0, entries: vec![XrefEntry::free(0, 65535)] }] };
        let bytes = t.to_bytes();
        assert_eq!(&bytes[bytes.len() - 20..], b"0000000000 65535 f\r\n");
    }

    #[test]
    fn parses_small_file() {
        let h = parse_host(&tiny_pdf()).unwrap();
        assert_eq!(h.bodies.len(), 1);
        assert_eq!(h.last_object_id, 2);
        assert_eq!(h.last_trailer().size(), Some(3));
        assert!(h.resolve(1).unwrap().outcome.passed());
        assert!(h.resolve(3).is_none());
    }

    #[test]
    fn missing_startxref() {
        let e = parse_host(b"%PDF-1.4\n1 0 obj 1 endobj\n").unwrap_err();
        assert!(e.reason.contains("startxref"));
    }

    #[test]
    fn wrong_xref_offset() {
        let mut f = tiny_pdf();
        let pos = find_last(&f, b"startxref").unwrap();
        f.truncate(pos);
        f.extend_from_slice(b"startxref\n9\n%%EOF\n");
        assert!(parse_host(&f).unwrap_err().reason.contains("xref offset mismatch"));
    }

    #[test]
    fn shifted_object_offset_is_detected() {
        let f = tiny_pdf();
        // Insert a byte right after the header; every offset is now off by one.
        let mut g = f[..9].to_vec();
        g.push(b' ');
        g.extend_from_slice(&f[9..]);
        assert!(parse_host(&g).is_err());
    }

    #[test]
    fn missing_trailer_keyword() {
        let f = tiny_pdf();
        let s = String::from_utf8_lossy(&f).replace("trailer", "trailex");
        assert!(parse_host(s.as_bytes()).is_err());
    }
}

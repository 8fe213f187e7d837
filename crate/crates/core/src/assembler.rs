//! Incremental-update assembly: append an object to a host PDF so that it
//! overrides the host's last object.

use std::collections::BTreeMap;

use crate::pdfcore::{is_regular, parse_host, HostError, HostStructure, PdfValue, Trailer, XrefEntry, XrefSubsection, XrefTable};

#[derive(Debug, Clone)]
pub struct HostFile {
    pub name: String,
    pub bytes: Vec<u8>,
    pub structure: HostStructure,
}

impl HostFile {
    pub fn parse(name: impl Into<String>, bytes: Vec<u8>) -> Result<Self, HostError> {
        let structure = parse_host(&bytes)?;
        Ok(HostFile { name: name.into(), bytes, structure })
    }

    pub fn last_trailer(&self) -> &Trailer {
        self.structure.last_trailer()
    }

    pub fn last_object_id(&self) -> u32 {
        self.structure.last_object_id
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AssembleError {
    #[error(transparent)]
    HostMalformed(#[from] HostError),
    #[error("object-body-unusable: {0}")]
    ObjectBodyUnusable(&'static str),
}

fn is_token_at(text: &[u8], at: usize, word: &[u8]) -> bool {
    text[at..].starts_with(word)
        && (at == 0 || !is_regular(text[at - 1]))
        && text.get(at + word.len()).is_none_or(|&b| !is_regular(b))
}

/// Bytes following the first standalone `obj` keyword, provided an
/// `endobj` appears somewhere after it.
pub fn object_content(body: &[u8]) -> Result<&[u8], AssembleError> {
    let at = (0..body.len().saturating_sub(2))
        .find(|&i| is_token_at(body, i, b"obj"))
        .ok_or(AssembleError::ObjectBodyUnusable("no `obj` keyword"))?;
    let rest = &body[at + 3..];
    if !rest.windows(6).any(|w| w == b"endobj") {
        return Err(AssembleError::ObjectBodyUnusable("no `endobj` after `obj`"));
    }
    Ok(rest)
}

/// Append `body` as a new incremental update overriding the host's last
/// object id, one generation up. The host bytes are an exact prefix of the
/// result. Any id/generation before the body's `obj` keyword is dropped.
pub fn append_object(host: &HostFile, body: &[u8]) -> Result<Vec<u8>, AssembleError> {
    let content = object_content(body)?;
    let id = host.last_object_id();
    let generation = host.structure.generation_of(id).unwrap_or(0).saturating_add(1);
    let prev = host.last_trailer().startxref;

    let mut out = Vec::with_capacity(host.bytes.len() + content.len() + 256);
    out.extend_from_slice(&host.bytes);
    if !matches!(out.last(), Some(b'\n' | b'\r')) {
        out.push(b'\n');
    }
    let offset = out.len();
    out.extend_from_slice(format!("{id} {generation} obj").as_bytes());
    out.extend_from_slice(content);
    out.push(b'\n');

    let xref_at = out.len();
    let table = XrefTable {
        subsections: vec![XrefSubsection { start: id, entries: vec![XrefEntry::in_use(offset as u64, generation)] }],
    };
    out.extend_from_slice(&table.to_bytes());
    let mut dict = host.last_trailer().dict.clone();
    dict.insert(b"Prev".to_vec(), PdfValue::Number(prev as f64));
    write_trailer(&mut out, dict, xref_at);
    Ok(out)
}

fn write_trailer(out: &mut Vec<u8>, dict: BTreeMap<Vec<u8>, PdfValue>, xref_at: usize) {
    out.extend_from_slice(b"trailer\n");
    PdfValue::Dict(dict).write_to(out);
    out.extend_from_slice(format!("\nstartxref\n{xref_at}\n%%EOF\n").as_bytes());
}

/// Writes PDF files from scratch: an original body followed by any number
/// of incremental updates.
#[derive(Debug, Clone)]
pub struct PdfWriter {
    out: Vec<u8>,
    prev_xref: Option<usize>,
}

impl Default for PdfWriter {
    fn default() -> Self {
        Self::new()
    }
}

impl PdfWriter {
    pub fn new() -> Self {
        PdfWriter { out: b"%PDF-1.4\n%\xE2\xE3\xCF\xD3\n".to_vec(), prev_xref: None }
    }

    /// Write one body section. `objects` are `(id, generation, value text)`;
    /// `trailer` holds the trailer entries other than `/Size` and `/Prev`.
    /// The first section also records the free head of the free list.
    pub fn body(&mut self, objects: &[(u32, u16, &[u8])], size: u32, trailer: &[(&str, PdfValue)]) -> &mut Self {
        let mut entries: BTreeMap<u32, XrefEntry> = BTreeMap::new();
        if self.prev_xref.is_none() {
            entries.insert(0, XrefEntry::free(0, 65535));
        }
        for &(id, generation, value) in objects {
            entries.insert(id, XrefEntry::in_use(self.out.len() as u64, generation));
            self.out.extend_from_slice(format!("{id} {generation} obj\n").as_bytes());
            self.out.extend_from_slice(value);
            self.out.extend_from_slice(b"\nendobj\n");
        }
        self.raw_section(entries, size, trailer)
    }

    /// Write already-formatted `id gen obj ... endobj` texts.
    pub fn raw_objects(&mut self, objects: &[(u32, u16, &[u8])], size: u32, trailer: &[(&str, PdfValue)]) -> &mut Self {
        let mut entries: BTreeMap<u32, XrefEntry> = BTreeMap::new();
        if self.prev_xref.is_none() {
            entries.insert(0, XrefEntry::free(0, 65535));
        }
        for &(id, generation, text) in objects {
            entries.insert(id, XrefEntry::in_use(self.out.len() as u64, generation));
            self.out.extend_from_slice(text);
            self.out.push(b'\n');
        }
        self.raw_section(entries, size, trailer)
    }

    fn raw_section(&mut self, entries: BTreeMap<u32, XrefEntry>, size: u32, trailer: &[(&str, PdfValue)]) -> &mut Self {
        // Contiguous id runs become subsections.
        let mut subsections: Vec<XrefSubsection> = Vec::new();
        for (id, e) in entries {
            match subsections.last_mut() {
                Some(s) if s.start + s.entries.len() as u32 == id => s.entries.push(e),
                _ => subsections.push(XrefSubsection { start: id, entries: vec![e] }),
            }
        }
        let xref_at = self.out.len();
        self.out.extend_from_slice(&XrefTable { subsections }.to_bytes());
        let mut dict: BTreeMap<Vec<u8>, PdfValue> =
            trailer.iter().map(|(k, v)| (k.as_bytes().to_vec(), v.clone())).collect();
        dict.insert(b"Size".to_vec(), PdfValue::Number(size as f64));
        if let Some(p) = self.prev_xref {
            dict.insert(b"Prev".to_vec(), PdfValue::Number(p as f64));
        }
        write_trailer(&mut self.out, dict, xref_at);
        self.prev_xref = Some(xref_at);
        self
    }

    pub fn finish(&self) -> Vec<u8> {
        self.out.clone()
    }
}

fn reference(id: u32) -> PdfValue {
    PdfValue::Ref(id, 0)
}

fn host1() -> Vec<u8> {
    PdfWriter::new()
        .body(
            &[
                (1, 0, b"<< /Type /Catalog /Pages 2 0 R >>"),
                (2, 0, b"<< /Type /Pages /Kids [3 0 R] /Count 1 >>"),
                (
                    3,
                    0,
                    b"<< /Type /Page /Parent 2 0 R /MediaBox [0 0 612 792]\n   /Resources << /Font << /F1 4 0 R >> >> >>",
                ),
                (4, 0, b"<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica >>"),
                (5, 0, b"<< /Title (Host \\251 one) % document info\n   /Producer (learnfuzz) /Trapped false >>"),
            ],
            6,
            &[("Root", reference(1)), ("Info", reference(5))],
        )
        .finish()
}

fn host2() -> Vec<u8> {
    // Ids 4 and 5 are unused, so the xref has two subsections.
    PdfWriter::new()
        .body(
            &[
                (1, 0, b"<< /Type /Catalog /Pages 2 0 R /PageMode /UseNone >>"),
                (2, 0, b"<< /Type /Pages /Kids [3 0 R 6 0 R] /Count 2 >>"),
                (3, 0, b"<< /Type /Page /Parent 2 0 R /Annots [7 0 R] >>"),
                (6, 0, b"<< /Type /Page /Parent 2 0 R /Rotate 90 >>"),
                (7, 0, b"<< /Type /Annot /Subtype /Link /Rect [10.5 20.25 -30 .5] /Border [0 0 0] >>"),
                (8, 0, b"[500 500.5 -250 <4E6F76> null]"),
            ],
            9,
            &[
                ("Root", reference(1)),
                (
                    "ID",
                    PdfValue::Array(vec![
                        PdfValue::HexString(b"\x1e\xa2\xf0\x22".to_vec()),
                        PdfValue::HexString(b"\x1e\xa2\xf0\x22".to_vec()),
                    ]),
                ),
            ],
        )
        .finish()
}

fn host3() -> Vec<u8> {
    // An original body plus one incremental update: a /Prev chain.
    PdfWriter::new()
        .body(
            &[
                (1, 0, b"<< /Type /Catalog /Pages 2 0 R >>"),
                (2, 0, b"<< /Type /Pages /Kids [3 0 R] /Count 1 >>"),
                (3, 0, b"<< /Type /Page /Parent 2 0 R /Contents [] >>"),
                (4, 0, b"(draft)"),
            ],
            5,
            &[("Root", reference(1))],
        )
        .body(
            &[
                (4, 1, b"(final \\(revised\\))"),
                (5, 0, b"<< /Type /ExtGState /Name /My#20State /LW 1.5 /SA true >>"),
            ],
            6,
            &[("Root", reference(1))],
        )
        .finish()
}

/// Three small, structurally distinct well-formed hosts.
pub fn make_hosts() -> [HostFile; 3] {
    [("host1", host1()), ("host2", host2()), ("host3", host3())]
        .map(|(n, bytes)| HostFile::parse(n, bytes).expect("bundled host parses"))
}

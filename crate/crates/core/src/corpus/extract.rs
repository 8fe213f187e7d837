use crate::pdfcore::is_regular;

/// One non-binary indirect object found in a PDF file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectRecord {
    pub object_id: u32,
    pub generation: u16,
    /// Raw bytes from the object number through `endobj`, inclusive.
    pub body: Vec<u8>,
    pub source: String,
}

impl ObjectRecord {
    pub fn len(&self) -> usize {
        self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }
}

fn find(haystack: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if from >= haystack.len() {
        return None;
    }
    haystack[from..].windows(needle.len()).position(|w| w == needle).map(|p| p + from)
}

/// Canonical decimal digits (no leading zeros) ending right before `end`.
/// Returns the start index.
fn digits_before(bytes: &[u8], end: usize) -> Option<usize> {
    let mut start = end;
    while start > 0 && bytes[start - 1].is_ascii_digit() {
        start -= 1;
    }
    let run = &bytes[start..end];
    if run.is_empty() || (run.len() > 1 && run[0] == b'0') {
        return None;
    }
    Some(start)
}

fn parse_decimal<T: std::str::FromStr>(digits: &[u8]) -> Option<T> {
    std::str::from_utf8(digits).ok()?.parse().ok()
}

/// Match `<digits> <digits> obj` whose `obj` begins at `obj_at`.
fn header_at(bytes: &[u8], obj_at: usize) -> Option<(u32, usize, u16)> {
    if bytes.get(obj_at + 3).is_some_and(|&b| is_regular(b)) {
        return None;
    }
    if obj_at < 2 || bytes[obj_at - 1] != b' ' {
        return None;
    }
    let gen_start = digits_before(bytes, obj_at - 1)?;
    if gen_start < 2 || bytes[gen_start - 1] != b' ' {
        return None;
    }
    let id_start = digits_before(bytes, gen_start - 1)?;
    if id_start > 0 && is_regular(bytes[id_start - 1]) {
        return None;
    }
    let id = parse_decimal(&bytes[id_start..gen_start - 1])?;
    let generation = parse_decimal(&bytes[gen_start..obj_at - 1])?;
    Some((id, id_start, generation))
}

/// Scan raw file bytes for `<digits> <digits> obj ... endobj` regions.
///
/// Each match runs to the nearest following `endobj`. Regions containing
/// `stream` are skipped. Malformed data is never an error; it just yields
/// fewer records.
pub fn extract_objects(file_bytes: &[u8], source: &str) -> Vec<ObjectRecord> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(obj_at) = find(file_bytes, b"obj", pos) {
        let Some((object_id, start, generation)) = header_at(file_bytes, obj_at) else {
            pos = obj_at + 3;
            continue;
        };
        let Some(end_at) = find(file_bytes, b"endobj", obj_at + 3) else {
            break;
        };
        let end = end_at + b"endobj".len();
        let body = &file_bytes[start..end];
        if find(body, b"stream", 0).is_none() {
            out.push(ObjectRecord { object_id, generation, body: body.to_vec(), source: source.to_string() });
        }
        pos = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_object() {
        let recs = extract_objects(b"125 0 obj [680.6 680.6] endobj", "a");
        assert_eq!(recs.len(), 1);
        assert_eq!((recs[0].object_id, recs[0].generation), (125, 0));
        assert_eq!(recs[0].body, b"125 0 obj [680.6 680.6] endobj");
    }

    #[test]
    fn empty_input() {
        assert!(extract_objects(b"", "a").is_empty());
    }

    #[test]
    fn stream_objects_are_skipped() {
        let data = b"1 0 obj << /Length 3 >> stream\nabc\nendstream endobj\n2 0 obj (x) endobj";
        let recs = extract_objects(data, "a");
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].object_id, 2);
    }

    #[test]
    fn headers_need_canonical_digits_and_boundaries() {
        assert!(extract_objects(b"x1 0 obj 1 endobj", "a").is_empty());
        assert!(extract_objects(b"01 0 obj 1 endobj", "a").is_empty());
        assert!(extract_objects(b"1 0 objx 1 endobj", "a").is_empty());
        assert!(extract_objects(b"1 0 obj 1", "a").is_empty());
        assert_eq!(extract_objects(b"garbage\n7 2 obj\nnull\nendobj trailing", "a")[0].generation, 2);
    }

    #[test]
    fn order_is_preserved() {
        let recs = extract_objects(b"3 0 obj 1 endobj\n1 0 obj 2 endobj\n2 0 obj 3 endobj", "a");
        let ids: Vec<u32> = recs.iter().map(|r| r.object_id).collect();
        assert_eq!(ids, [3, 1, 2]);
    }
}

use super::{CorpusError, ObjectRecord};

/// Concatenated corpus text cut into fixed-size windows. Window `i` has
/// input `text[i*d .. (i+1)*d]` and target `text[i*d+1 .. (i+1)*d+1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSet {
    text: Vec<u8>,
    window_size: usize,
    count: usize,
}

impl TrainingSet {
    pub fn from_text(text: Vec<u8>, window_size: usize) -> Result<Self, CorpusError> {
        if window_size == 0 {
            return Err(CorpusError::ZeroWindow);
        }
        if text.len() < window_size + 1 {
            return Err(CorpusError::TooSmall { len: text.len(), needed: window_size + 1 });
        }
        let count = (text.len() - 1) / window_size;
        Ok(TrainingSet { text, window_size, count })
    }

    pub fn text(&self) -> &[u8] {
        &self.text
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// `(input, target)` of window `i`.
    pub fn window(&self, i: usize) -> (&[u8], &[u8]) {
        assert!(i < self.count, "window {i} out of range");
        let d = self.window_size;
        (&self.text[i * d..(i + 1) * d], &self.text[i * d + 1..(i + 1) * d + 1])
    }

    pub fn windows(&self) -> impl Iterator<Item = (&[u8], &[u8])> + '_ {
        (0..self.count).map(|i| self.window(i))
    }
}

/// Object bodies in order, each followed by one newline.
pub fn concatenate(objects: &[ObjectRecord]) -> Vec<u8> {
    let mut text = Vec::with_capacity(objects.iter().map(|o| o.body.len() + 1).sum());
    for o in objects {
        text.extend_from_slice(&o.body);
        text.push(b'\n');
    }
    text
}

pub fn build_windows(objects: &[ObjectRecord], d: usize) -> Result<TrainingSet, CorpusError> {
    TrainingSet::from_text(concatenate(objects), d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abcdefg_with_window_three() {
        let ts = TrainingSet::from_text(b"abcdefg".to_vec(), 3).unwrap();
        let w: Vec<_> = ts.windows().collect();
        assert_eq!(w, vec![(&b"abc"[..], &b"bcd"[..]), (&b"def"[..], &b"efg"[..])]);
    }

    #[test]
    fn too_small() {
        assert!(matches!(
            TrainingSet::from_text(b"ab".to_vec(), 3),
            Err(CorpusError::TooSmall { len: 2, needed: 4 })
        ));
        assert!(TrainingSet::from_text(b"abcd".to_vec(), 3).is_ok());
        assert!(matches!(TrainingSet::from_text(b"abcd".to_vec(), 0), Err(CorpusError::ZeroWindow)));
    }

    #[test]
    fn bodies_are_newline_terminated() {
        let rec = |b: &str| ObjectRecord { object_id: 1, generation: 0, body: b.as_bytes().to_vec(), source: String::new() };
        assert_eq!(concatenate(&[rec("1 0 obj 1 endobj"), rec("2 0 obj 2 endobj")]), b"1 0 obj 1 endobj\n2 0 obj 2 endobj\n");
    }
}

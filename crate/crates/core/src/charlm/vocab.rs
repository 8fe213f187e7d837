use super::ModelError;

/// Characters that generation prefixes and stop markers always need.
const REQUIRED: &[u8] = b"obj endobj";

/// Sorted set of byte-characters with a dense index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    chars: Vec<u8>,
    index: [u16; 256],
}

const ABSENT: u16 = u16::MAX;

impl Vocab {
    /// Every byte appearing in `text`, plus those of `obj ` and `endobj`.
    pub fn from_text(text: &[u8]) -> Self {
        let mut present = [false; 256];
        for &b in text.iter().chain(REQUIRED) {
            present[b as usize] = true;
        }
        let chars: Vec<u8> = (0..=255u8).filter(|&b| present[b as usize]).collect();
        Self::from_chars(chars).expect("distinct sorted characters")
    }

    /// Build from an explicit character list (in index order).
    pub fn from_chars(chars: Vec<u8>) -> Result<Self, ModelError> {
        let mut index = [ABSENT; 256];
        for (i, &c) in chars.iter().enumerate() {
            if index[c as usize] != ABSENT {
                return Err(ModelError::Corrupt(format!("duplicate vocabulary character {c:#04x}")));
            }
            index[c as usize] = i as u16;
        }
        if chars.is_empty() {
            return Err(ModelError::Corrupt("empty vocabulary".into()));
        }
        Ok(Vocab { chars, index })
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn chars(&self) -> &[u8] {
        &self.chars
    }

    pub fn char_at(&self, i: usize) -> u8 {
        self.chars[i]
    }

    pub fn index_of(&self, c: u8) -> Option<usize> {
        match self.index[c as usize] {
            ABSENT => None,
            i => Some(i as usize),
        }
    }

    pub fn encode(&self, text: &[u8]) -> Result<Vec<usize>, ModelError> {
        text.iter().map(|&c| self.index_of(c).ok_or(ModelError::UnknownChar(c))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bijective_and_includes_markers() {
        let v = Vocab::from_text(b"[1 2]");
        for (i, &c) in v.chars().iter().enumerate() {
            assert_eq!(v.index_of(c), Some(i));
        }
        for &c in b"obj endobj[]12" {
            assert!(v.index_of(c).is_some());
        }
        assert_eq!(v.index_of(b'z'), None);
        assert!(matches!(v.encode(b"oz"), Err(ModelError::UnknownChar(b'z'))));
    }

    #[test]
    fn duplicates_rejected() {
        assert!(Vocab::from_chars(vec![b'a', b'a']).is_err());
    }
}

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::ops::Range;

/// Half-open character range `[start, end)` into a sentence.
///
/// Offsets count Unicode scalar values, not bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Converts a byte range of `text` into character offsets.
    pub fn from_bytes(text: &str, bytes: Range<usize>) -> Span {
        let start = text[..bytes.start].chars().count();
        let len = text[bytes.start..bytes.end].chars().count();
        Span::new(start, start + len)
    }

    /// Byte range of this span in `text`, if it lies within bounds.
    pub fn to_bytes(&self, text: &str) -> Option<Range<usize>> {
        if self.start > self.end {
            return None;
        }
        let mut boundaries = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
        let start = boundaries.nth(self.start)?;
        let end = if self.end == self.start {
            start
        } else {
            boundaries.nth(self.end - self.start - 1)?
        };
        Some(start..end)
    }

    /// The slice of `text` this span covers.
    pub fn slice<'a>(&self, text: &'a str) -> Option<&'a str> {
        self.to_bytes(text).map(|r| &text[r])
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.start, self.end].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [start, end] = <[usize; 2]>::deserialize(deserializer)?;
        if start > end {
            return Err(serde::de::Error::custom(format!("span start {start} exceeds end {end}")));
        }
        Ok(Span { start, end })
    }
}

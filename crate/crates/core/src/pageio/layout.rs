use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PageError;

pub const HEADER_LEN: usize = 24;
pub const LINE_POINTER_LEN: usize = 4;
pub const LAYOUT_VERSION: u16 = 1;
/// Line pointer flag value for a live tuple.
pub const LP_NORMAL: u32 = 1;
/// Offsets and lengths are 15-bit line pointer fields.
pub const MAX_PAGE_SIZE: usize = 1 << 15;

/// Byte-level description of a DANA-P1 heap page.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PageLayoutConfig {
    pub page_size: usize,
    pub tuple_header_len: usize,
    /// 4 (f32) or 8 (f64), little-endian IEEE-754.
    pub value_width: usize,
    pub feature_count: usize,
    pub label_count: usize,
}

impl Default for PageLayoutConfig {
    fn default() -> Self {
        PageLayoutConfig { page_size: 32768, tuple_header_len: 8, value_width: 4, feature_count: 1, label_count: 1 }
    }
}

impl PageLayoutConfig {
    pub fn new(feature_count: usize, label_count: usize) -> Self {
        PageLayoutConfig { feature_count, label_count, ..Default::default() }
    }

    pub fn with_page_size(mut self, page_size: usize) -> Self {
        self.page_size = page_size;
        self
    }

    pub fn with_value_width(mut self, value_width: usize) -> Self {
        self.value_width = value_width;
        self
    }

    pub fn with_tuple_header_len(mut self, len: usize) -> Self {
        self.tuple_header_len = len;
        self
    }

    pub fn values_per_tuple(&self) -> usize {
        self.feature_count + self.label_count
    }

    pub fn payload_len(&self) -> usize {
        self.value_width * self.values_per_tuple()
    }

    pub fn tuple_len(&self) -> usize {
        self.tuple_header_len + self.payload_len()
    }

    /// Byte offset one past the page's special region start (= page size).
    pub fn special(&self) -> usize {
        self.page_size
    }

    /// Tuples per page: each costs its bytes plus one line pointer.
    pub fn capacity(&self) -> usize {
        (self.special() - HEADER_LEN) / (self.tuple_len() + LINE_POINTER_LEN)
    }

    pub fn validate(&self) -> Result<(), PageError> {
        let bad = |m: String| Err(PageError::InvalidLayout(m));
        if self.value_width != 4 && self.value_width != 8 {
            return bad(format!("value_width must be 4 or 8, got {}", self.value_width));
        }
        if self.feature_count == 0 {
            return bad("feature_count must be >= 1".into());
        }
        if self.page_size > MAX_PAGE_SIZE {
            return bad(format!("page_size {} exceeds {MAX_PAGE_SIZE}", self.page_size));
        }
        if self.tuple_len() >= MAX_PAGE_SIZE {
            return bad(format!("tuple length {} does not fit a 15-bit line pointer", self.tuple_len()));
        }
        if self.page_size < HEADER_LEN + LINE_POINTER_LEN + self.tuple_len() {
            return Err(PageError::TupleTooLarge { tuple_len: self.tuple_len(), page_size: self.page_size });
        }
        Ok(())
    }

    /// Stable hex digest of every layout field.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"DANA-P1");
        for v in [
            self.page_size,
            self.tuple_header_len,
            self.value_width,
            self.feature_count,
            self.label_count,
        ] {
            h.update((v as u64).to_le_bytes());
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_kv(text: &str) -> Result<Self, PageError> {
        let layout: PageLayoutConfig = toml::from_str(text).map_err(|e| PageError::InvalidLayout(e.to_string()))?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn to_kv(&self) -> String {
        toml::to_string(self).expect("layout serializes")
    }
}

use serde::{Deserialize, Serialize};

use super::layout::*;
use super::PageError;

/// One training record: features then labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleRecord {
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
}

impl TupleRecord {
    pub fn new(features: Vec<f64>, labels: Vec<f64>) -> Self {
        TupleRecord { features, labels }
    }

    pub fn from_values(values: &[f64], feature_count: usize) -> Self {
        TupleRecord { features: values[..feature_count].to_vec(), labels: values[feature_count..].to_vec() }
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v = self.features.clone();
        v.extend_from_slice(&self.labels);
        v
    }

    /// Payload bytes at the layout's value width.
    pub fn encode(&self, layout: &PageLayoutConfig) -> Vec<u8> {
        encode_values(&self.values(), layout.value_width)
    }
}

pub fn encode_values(values: &[f64], width: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * width);
    for &v in values {
        if width == 4 {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        } else {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_values(bytes: &[u8], width: usize) -> Vec<f64> {
    bytes
        .chunks_exact(width)
        .map(|c| {
            if width == 4 {
                f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64
            } else {
                f64::from_le_bytes(c.try_into().expect("8 bytes"))
            }
        })
        .collect()
}

/// A fixed-size page image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageImage {
    pub bytes: Vec<u8>,
}

impl PageImage {
    pub fn u16_at(&self, at: usize) -> u16 {
        u16::from_le_bytes([self.bytes[at], self.bytes[at + 1]])
    }

    pub fn u32_at(&self, at: usize) -> u32 {
        u32::from_le_bytes(self.bytes[at..at + 4].try_into().expect("4 bytes"))
    }

    pub fn u64_at(&self, at: usize) -> u64 {
        u64::from_le_bytes(self.bytes[at..at + 8].try_into().expect("8 bytes"))
    }

    pub fn header(&self) -> PageHeader {
        let word = self.u64_at(0);
        PageHeader {
            page_size: (word & 0xffff) as usize,
            version: ((word >> 16) & 0xffff) as u16,
            tuple_count: self.u16_at(8) as usize,
            lower: self.u16_at(10) as usize,
            upper: self.u16_at(12) as usize,
            special: self.u16_at(14) as usize,
        }
    }

    pub fn line_pointer(&self, k: usize) -> LinePointer {
        LinePointer::unpack(self.u32_at(HEADER_LEN + k * LINE_POINTER_LEN))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageHeader {
    pub page_size: usize,
    pub version: u16,
    pub tuple_count: usize,
    pub lower: usize,
    pub upper: usize,
    pub special: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinePointer {
    pub offset: usize,
    pub flags: u32,
    pub len: usize,
}

impl LinePointer {
    pub fn pack(self) -> u32 {
        (self.offset as u32 & 0x7fff) | ((self.flags & 0x3) << 15) | ((self.len as u32 & 0x7fff) << 17)
    }

    pub fn unpack(word: u32) -> Self {
        LinePointer { offset: (word & 0x7fff) as usize, flags: (word >> 15) & 0x3, len: (word >> 17) as usize }
    }
}

/// Lay out `records` on one page. Tuples fill downward from `special`.
pub fn build_page(layout: &PageLayoutConfig, records: &[TupleRecord]) -> Result<PageImage, PageError> {
    layout.validate()?;
    if records.len() > layout.capacity() {
        return Err(PageError::PageFull { count: records.len(), capacity: layout.capacity() });
    }
    let (size, len, special) = (layout.page_size, layout.tuple_len(), layout.special());
    let mut bytes = vec![0u8; size];
    let n = records.len();
    let lower = HEADER_LEN + n * LINE_POINTER_LEN;
    let upper = special - n * len;
    let word = (size as u64 & 0xffff) | ((LAYOUT_VERSION as u64) << 16);
    bytes[0..8].copy_from_slice(&word.to_le_bytes());
    bytes[8..10].copy_from_slice(&(n as u16).to_le_bytes());
    bytes[10..12].copy_from_slice(&(lower as u16).to_le_bytes());
    bytes[12..14].copy_from_slice(&(upper as u16).to_le_bytes());
    bytes[14..16].copy_from_slice(&(special as u16).to_le_bytes());
    let natts = layout.values_per_tuple() as u16;
    for (k, rec) in records.iter().enumerate() {
        if rec.features.len() != layout.feature_count || rec.labels.len() != layout.label_count {
            return Err(PageError::Arity {
                row: k,
                expected: layout.values_per_tuple(),
                found: rec.features.len() + rec.labels.len(),
            });
        }
        let offset = special - (k + 1) * len;
        let lp = LinePointer { offset, flags: LP_NORMAL, len };
        let at = HEADER_LEN + k * LINE_POINTER_LEN;
        bytes[at..at + 4].copy_from_slice(&lp.pack().to_le_bytes());
        let h = layout.tuple_header_len;
        if h >= 4 {
            bytes[offset..offset + 2].copy_from_slice(&natts.to_le_bytes());
            bytes[offset + 2..offset + 4].copy_from_slice(&(h as u16).to_le_bytes());
        }
        bytes[offset + h..offset + len].copy_from_slice(&rec.encode(layout));
    }
    Ok(PageImage { bytes })
}

/// Decode every tuple through its line pointer.
pub fn read_reference(page: &PageImage, layout: &PageLayoutConfig) -> Result<Vec<TupleRecord>, PageError> {
    if page.bytes.len() != layout.page_size {
        return Err(PageError::CorruptHeader(format!(
            "page is {} bytes, layout says {}",
            page.bytes.len(),
            layout.page_size
        )));
    }
    let h = page.header();
    let corrupt = |m: String| Err(PageError::CorruptHeader(m));
    if h.version != LAYOUT_VERSION {
        return corrupt(format!("layout version {} (expected {LAYOUT_VERSION})", h.version));
    }
    if h.page_size != layout.page_size & 0xffff {
        return corrupt(format!("page size field {} (expected {})", h.page_size, layout.page_size));
    }
    if h.lower > h.upper {
        return corrupt(format!("lower {} > upper {}", h.lower, h.upper));
    }
    if h.upper > h.special || h.special > page.bytes.len() {
        return corrupt(format!("upper {} / special {} out of order", h.upper, h.special));
    }
    if h.lower != HEADER_LEN + h.tuple_count * LINE_POINTER_LEN {
        return corrupt(format!("lower {} does not match tuple count {}", h.lower, h.tuple_count));
    }
    let mut out = Vec::with_capacity(h.tuple_count);
    for k in 0..h.tuple_count {
        let lp = page.line_pointer(k);
        if lp.flags != LP_NORMAL {
            return Err(PageError::BadPointer { index: k, reason: format!("flags {}", lp.flags) });
        }
        if lp.len != layout.tuple_len() {
            return Err(PageError::BadPointer {
                index: k,
                reason: format!("length {} (layout tuple length {})", lp.len, layout.tuple_len()),
            });
        }
        if lp.offset < h.upper || lp.offset + lp.len > h.special {
            return Err(PageError::BadPointer {
                index: k,
                reason: format!("[{}, {}) outside [{}, {})", lp.offset, lp.offset + lp.len, h.upper, h.special),
            });
        }
        let payload = &page.bytes[lp.offset + layout.tuple_header_len..lp.offset + lp.len];
        out.push(TupleRecord::from_values(&decode_values(payload, layout.value_width), layout.feature_count));
    }
    Ok(out)
}

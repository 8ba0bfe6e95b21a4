//! DANA-P1 heap pages: layout, CSV ingest, and the reference reader.

pub mod layout;
pub mod page;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use layout::{PageLayoutConfig, HEADER_LEN, LINE_POINTER_LEN};
pub use page::{build_page, decode_values, encode_values, read_reference, LinePointer, PageHeader, PageImage, TupleRecord};

#[derive(Debug, Error)]
pub enum PageError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("row {row}: expected {expected} fields, found {found}")]
    Arity { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {col}: non-numeric field `{text}`")]
    NonNumeric { row: usize, col: usize, text: String },
    #[error("row {row}, column {col}: non-finite value")]
    NonFinite { row: usize, col: usize },
    #[error("tuple of {tuple_len} bytes does not fit a {page_size}-byte page")]
    TupleTooLarge { tuple_len: usize, page_size: usize },
    #[error("{count} tuples exceed page capacity {capacity}")]
    PageFull { count: usize, capacity: usize },
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("line pointer {index}: {reason}")]
    BadPointer { index: usize, reason: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PageError + '_ {
    move |source| PageError::Io { path: path.to_path_buf(), source }
}

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Dataset description written next to the page files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub fingerprint: String,
    pub page_count: usize,
    pub tuple_count: usize,
    pub tuples_per_page: usize,
    pub layout: PageLayoutConfig,
}

impl Manifest {
    pub fn to_kv(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn from_kv(text: &str) -> Result<Self, PageError> {
        let m: Manifest = toml::from_str(text).map_err(|e| PageError::Manifest(e.to_string()))?;
        if m.format != "DANA-P1" {
            return Err(PageError::Manifest(format!("unknown format `{}`", m.format)));
        }
        if m.fingerprint != m.layout.fingerprint() {
            return Err(PageError::Manifest("fingerprint does not match layout".into()));
        }
        Ok(m)
    }
}

pub fn page_file_name(index: usize) -> String {
    format!("page_{index:06}.bin")
}

/// Split records into pages, each filled to capacity in order.
pub fn paginate(layout: &PageLayoutConfig, records: &[TupleRecord]) -> Result<Vec<PageImage>, PageError> {
    layout.validate()?;
    if records.is_empty() {
        return Err(PageError::EmptyDataset);
    }
    records.chunks(layout.capacity()).map(|chunk| build_page(layout, chunk)).collect()
}

/// Write records as page files plus a manifest into `out_dir`.
pub fn write_dataset(layout: &PageLayoutConfig, records: &[TupleRecord], out_dir: &Path) -> Result<Manifest, PageError> {
    for (row, r) in records.iter().enumerate() {
        if r.features.len() != layout.feature_count || r.labels.len() != layout.label_count {
            return Err(PageError::Arity {
                row,
                expected: layout.values_per_tuple(),
                found: r.features.len() + r.labels.len(),
            });
        }
        if let Some(col) = r.values().iter().position(|v| !v.is_finite()) {
            return Err(PageError::NonFinite { row, col });
        }
    }
    let pages = paginate(layout, records)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for (i, p) in pages.iter().enumerate() {
        let path = out_dir.join(page_file_name(i));
        fs::write(&path, &p.bytes).map_err(io_err(&path))?;
    }
    let manifest = Manifest {
        format: "DANA-P1".into(),
        fingerprint: layout.fingerprint(),
        page_count: pages.len(),
        tuple_count: records.len(),
        tuples_per_page: layout.capacity(),
        layout: layout.clone(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_kv()).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Parse CSV rows of `feature_count + label_count` numeric fields.
pub fn read_csv(text: &str, layout: &PageLayoutConfig, has_header: bool) -> Result<Vec<TupleRecord>, PageError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let expected = layout.values_per_tuple();
    let mut records = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != expected {
            return Err(PageError::Arity { row, expected, found: rec.len() });
        }
        let mut values = Vec::with_capacity(expected);
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| PageError::NonNumeric { row, col, text: field.to_string() })?;
            if !v.is_finite() {
                return Err(PageError::NonFinite { row, col });
            }
            values.push(v);
        }
        records.push(TupleRecord::from_values(&values, layout.feature_count));
    }
    if records.is_empty() {
        return Err(PageError::EmptyDataset);
    }
    Ok(records)
}

pub fn ingest_csv(csv_path: &Path, layout: &PageLayoutConfig, out_dir: &Path, has_header: bool) -> Result<Manifest, PageError> {
    layout.validate()?;
    let text = fs::read_to_string(csv_path).map_err(io_err(csv_path))?;
    let records = read_csv(&text, layout, has_header)?;
    write_dataset(layout, &records, out_dir)
}

/// A page directory opened through its manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self, PageError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        Ok(Dataset { dir: dir.to_path_buf(), manifest: Manifest::from_kv(&text)? })
    }

    pub fn layout(&self) -> &PageLayoutConfig {
        &self.manifest.layout
    }

    pub fn page_count(&self) -> usize {
        self.manifest.page_count
    }

    pub fn page(&self, index: usize) -> Result<PageImage, PageError> {
        let path = self.dir.join(page_file_name(index));
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        if bytes.len() != self.layout().page_size {
            return Err(PageError::CorruptHeader(format!("{} is {} bytes", path.display(), bytes.len())));
        }
        Ok(PageImage { bytes })
    }

    pub fn pages(&self) -> Result<Vec<PageImage>, PageError> {
        (0..self.page_count()).map(|i| self.page(i)).collect()
    }

    pub fn records(&self) -> Result<Vec<TupleRecord>, PageError> {
        let mut out = Vec::with_capacity(self.manifest.tuple_count);
        for p in self.pages()? {
            out.extend(read_reference(&p, self.layout())?);
        }
        Ok(out)
    }
}

use std::collections::{HashSet, VecDeque};

use crate::pageio::{Dataset, PageError, PageImage};

enum Source<'a> {
    Disk(&'a Dataset),
    Memory(&'a [PageImage]),
}

/// Buffer pool in front of the page files. Pages are fetched in ascending
/// order each epoch; residency is FIFO up to `pool_bytes`.
pub struct BufferPoolSim<'a> {
    source: Source<'a>,
    page_size: usize,
    capacity_pages: usize,
    resident: HashSet<usize>,
    order: VecDeque<usize>,
    cache: Vec<Option<PageImage>>,
    pub hits: u64,
    pub misses: u64,
    pub delivered: u64,
}

/// 8 GiB.
pub const DEFAULT_POOL_BYTES: u64 = 8 << 30;

impl<'a> BufferPoolSim<'a> {
    pub fn new(dataset: &'a Dataset, pool_bytes: u64) -> Self {
        let n = dataset.page_count();
        Self::build(Source::Disk(dataset), n, dataset.layout().page_size, pool_bytes)
    }

    pub fn from_pages(pages: &'a [PageImage], page_size: usize, pool_bytes: u64) -> Self {
        Self::build(Source::Memory(pages), pages.len(), page_size, pool_bytes)
    }

    fn build(source: Source<'a>, pages: usize, page_size: usize, pool_bytes: u64) -> Self {
        BufferPoolSim {
            source,
            page_size,
            capacity_pages: (pool_bytes / page_size.max(1) as u64).max(1) as usize,
            resident: HashSet::new(),
            order: VecDeque::new(),
            cache: vec![None; pages],
            hits: 0,
            misses: 0,
            delivered: 0,
        }
    }

    pub fn page_count(&self) -> usize {
        self.cache.len()
    }

    pub fn page_size(&self) -> usize {
        self.page_size
    }

    pub fn is_resident(&self, index: usize) -> bool {
        self.resident.contains(&index)
    }

    /// Deliver page `index`, reading it on a miss.
    pub fn fetch(&mut self, index: usize) -> Result<&PageImage, PageError> {
        self.delivered += 1;
        if self.resident.contains(&index) {
            self.hits += 1;
        } else {
            self.misses += 1;
            let page = match self.source {
                Source::Disk(d) => d.page(index)?,
                Source::Memory(p) => p[index].clone(),
            };
            if self.order.len() == self.capacity_pages {
                let old = self.order.pop_front().expect("non-empty");
                self.resident.remove(&old);
                self.cache[old] = None;
            }
            self.order.push_back(index);
            self.resident.insert(index);
            self.cache[index] = Some(page);
        }
        Ok(self.cache[index].as_ref().expect("resident"))
    }
}

use dana::pageio::{
    self, build_page, paginate, HEADER_LEN, read_csv, read_reference, write_dataset, Dataset, LinePointer,
    PageError, PageImage, PageLayoutConfig, TupleRecord,
};
use proptest::prelude::*;

fn rows(n: usize, features: usize, labels: usize) -> Vec<TupleRecord> {
    (0..n)
        .map(|i| {
            TupleRecord::new(
                (0..features).map(|j| (i * 7 + j) as f64 * 0.25).collect(),
                (0..labels).map(|j| -(i as f64) - j as f64).collect(),
            )
        })
        .collect()
}

#[test]
fn ten_rows_of_three_floats() {
    let layout = PageLayoutConfig::new(2, 1);
    assert_eq!(layout.tuple_len(), 20);
    let page = build_page(&layout, &rows(10, 2, 1)).unwrap();
    let h = page.header();
    assert_eq!(h.tuple_count, 10);
    assert_eq!(h.lower, 24 + 40);
    assert_eq!(h.upper, 32768 - 200);
    assert_eq!(h.special, 32768);
    assert_eq!(h.page_size, 32768);
    assert_eq!(h.version, 1);

    // First tuple sits at the top of the page.
    let lp = page.line_pointer(0);
    assert_eq!((lp.offset, lp.flags, lp.len), (32748, 1, 20));
    assert_eq!(page.u32_at(24), 32748 | (1 << 15) | (20 << 17));
    assert_eq!(page.u16_at(32748), 3);
    assert_eq!(page.u16_at(32750), 8);
    let first = f32::from_le_bytes(page.bytes[32756..32760].try_into().unwrap());
    let second = f32::from_le_bytes(page.bytes[32760..32764].try_into().unwrap());
    assert_eq!((first, second), (0.0, 0.25));
    assert_eq!(page.line_pointer(9).offset, 32768 - 200);
    assert!(page.bytes[h.lower..h.upper].iter().all(|&b| b == 0));
}

#[test]
fn capacity_boundary() {
    let layout = PageLayoutConfig::new(2, 1);
    let cap = layout.capacity();
    assert_eq!(cap, (32768 - 24) / 24);
    let full = build_page(&layout, &rows(cap, 2, 1)).unwrap();
    let h = full.header();
    assert!(h.upper - h.lower < layout.tuple_len() + 4);
    assert_eq!(h.upper - h.lower, (32768 - 24) % 24);
    assert!(matches!(build_page(&layout, &rows(cap + 1, 2, 1)), Err(PageError::PageFull { .. })));

    let pages = paginate(&layout, &rows(cap + 1, 2, 1)).unwrap();
    assert_eq!(pages.len(), 2);
    assert_eq!(pages[0].header().tuple_count, cap);
    assert_eq!(pages[1].header().tuple_count, 1);
    assert_eq!(paginate(&layout, &rows(cap, 2, 1)).unwrap().len(), 1);
}

#[test]
fn empty_inputs_are_rejected() {
    let layout = PageLayoutConfig::new(2, 1);
    assert!(matches!(paginate(&layout, &[]), Err(PageError::EmptyDataset)));
    assert!(matches!(read_csv("", &layout, false), Err(PageError::EmptyDataset)));
    assert!(matches!(read_csv("a,b,c\n", &layout, true), Err(PageError::EmptyDataset)));
    // An empty page still has a valid header.
    let p = build_page(&layout, &[]).unwrap();
    assert_eq!(read_reference(&p, &layout).unwrap(), vec![]);
    assert_eq!((p.header().lower, p.header().upper), (24, 32768));
}

#[test]
fn oversized_tuples_are_rejected() {
    let layout = PageLayoutConfig::new(100, 1).with_page_size(256);
    assert!(matches!(layout.validate(), Err(PageError::TupleTooLarge { .. })));
    assert!(PageLayoutConfig::new(2, 1).with_value_width(2).validate().is_err());
    assert!(PageLayoutConfig::new(2, 1).with_page_size(65536).validate().is_err());
}

#[test]
fn csv_errors_name_row_and_column() {
    let layout = PageLayoutConfig::new(2, 1);
    match read_csv("1,2,3\n4,x,6\n", &layout, false) {
        Err(PageError::NonNumeric { row: 1, col: 1, text }) => assert_eq!(text, "x"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(read_csv("1,2\n", &layout, false), Err(PageError::Arity { row: 0, expected: 3, found: 2 })));
    assert!(matches!(read_csv("1,inf,2\n", &layout, false), Err(PageError::NonFinite { row: 0, col: 1 })));
    let r = read_csv("f1,f2,y\n1, 2 ,3\n\n", &layout, true).unwrap();
    assert_eq!(r, vec![TupleRecord::new(vec![1.0, 2.0], vec![3.0])]);
}

fn corrupt(page: &PageImage, at: usize, value: u16) -> PageImage {
    let mut p = page.clone();
    p.bytes[at..at + 2].copy_from_slice(&value.to_le_bytes());
    p
}

#[test]
fn corrupt_pages_are_reported() {
    let layout = PageLayoutConfig::new(2, 1);
    let page = build_page(&layout, &rows(5, 2, 1)).unwrap();
    let err = |p: &PageImage| read_reference(p, &layout).unwrap_err();
    assert!(matches!(err(&corrupt(&page, 2, 9)), PageError::CorruptHeader(m) if m.contains("version")));
    assert!(matches!(err(&corrupt(&page, 10, 40000)), PageError::CorruptHeader(_)));
    assert!(matches!(err(&corrupt(&page, 8, 6)), PageError::CorruptHeader(m) if m.contains("tuple count")));

    let mut bad = page.clone();
    let lp = LinePointer { flags: 0, ..page.line_pointer(2) };
    bad.bytes[24 + 8..24 + 12].copy_from_slice(&lp.pack().to_le_bytes());
    assert!(matches!(err(&bad), PageError::BadPointer { index: 2, .. }));

    let lp = LinePointer { offset: 100, ..page.line_pointer(1) };
    bad = page.clone();
    bad.bytes[24 + 4..24 + 8].copy_from_slice(&lp.pack().to_le_bytes());
    assert!(matches!(err(&bad), PageError::BadPointer { index: 1, .. }));

    let short = PageImage { bytes: page.bytes[..1024].to_vec() };
    assert!(matches!(err(&short), PageError::CorruptHeader(_)));
}

#[test]
fn dataset_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let layout = PageLayoutConfig::new(3, 2).with_value_width(8).with_page_size(4096);
    let recs = rows(500, 3, 2);
    let m = write_dataset(&layout, &recs, dir.path()).unwrap();
    assert_eq!(m.tuple_count, 500);
    assert_eq!(m.tuples_per_page, (4096 - HEADER_LEN) / (8 + 40 + 4));
    assert_eq!(m.page_count, 500usize.div_ceil(m.tuples_per_page));
    let d = Dataset::open(dir.path()).unwrap();
    assert_eq!(d.records().unwrap(), recs);
    assert_eq!(d.manifest, m);
    assert!(dir.path().join(pageio::page_file_name(m.page_count - 1)).exists());

    let mut nan = recs.clone();
    nan[7].labels[1] = f64::NAN;
    let other = tempfile::tempdir().unwrap();
    assert!(matches!(write_dataset(&layout, &nan, other.path()), Err(PageError::NonFinite { row: 7, col: 4 })));

    std::fs::write(dir.path().join(pageio::page_file_name(0)), [0u8; 10]).unwrap();
    assert!(matches!(d.page(0), Err(PageError::CorruptHeader(_))));
}

#[test]
fn fingerprint_tracks_every_field() {
    let base = PageLayoutConfig::new(4, 1);
    let variants = [
        base.clone().with_page_size(8192),
        base.clone().with_value_width(8),
        base.clone().with_tuple_header_len(16),
        PageLayoutConfig::new(5, 1),
        PageLayoutConfig::new(4, 2),
    ];
    for v in &variants {
        assert_ne!(v.fingerprint(), base.fingerprint(), "{v:?}");
    }
    assert_eq!(base.fingerprint(), PageLayoutConfig::new(4, 1).fingerprint());
}

fn arb_layout() -> impl Strategy<Value = PageLayoutConfig> {
    (1usize..24, 0usize..3, prop::bool::ANY, 9u32..=15, prop::sample::select(vec![0usize, 4, 8, 24])).prop_filter_map(
        "tuple fits",
        |(f, l, wide, log, hdr)| {
            let layout = PageLayoutConfig::new(f, l)
                .with_value_width(if wide { 8 } else { 4 })
                .with_page_size(1 << log)
                .with_tuple_header_len(hdr);
            layout.validate().ok().map(|_| layout)
        },
    )
}

proptest! {
    #[test]
    fn pages_round_trip(layout in arb_layout(), n in 1usize..400, seed in any::<u32>()) {
        let records: Vec<TupleRecord> = (0..n)
            .map(|i| {
                let v = |j: usize| ((seed as usize).wrapping_mul(31) ^ (i * 131 + j * 17)) as f64 / 1024.0 - 3.0;
                TupleRecord::new((0..layout.feature_count).map(v).collect(), (0..layout.label_count).map(|j| v(j + 99)).collect())
            })
            .collect();
        let pages = paginate(&layout, &records).unwrap();
        prop_assert_eq!(pages.len(), n.div_ceil(layout.capacity()));
        let mut back = Vec::new();
        for p in &pages {
            let h = p.header();
            prop_assert_eq!(h.lower, 24 + 4 * h.tuple_count);
            prop_assert_eq!(h.upper, layout.page_size - h.tuple_count * layout.tuple_len());
            back.extend(read_reference(p, &layout).unwrap());
        }
        let expect: Vec<TupleRecord> = if layout.value_width == 4 {
            records.iter().map(|r| TupleRecord::new(
                r.features.iter().map(|&x| x as f32 as f64).collect(),
                r.labels.iter().map(|&x| x as f32 as f64).collect(),
            )).collect()
        } else {
            records
        };
        prop_assert_eq!(back, expect);
    }

    #[test]
    fn line_pointer_packing(offset in 0usize..32768, flags in 0u32..4, len in 0usize..32768) {
        let lp = LinePointer { offset, flags, len };
        prop_assert_eq!(LinePointer::unpack(lp.pack()), lp);
    }
}

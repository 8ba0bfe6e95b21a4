use dana::pageio::{build_page, read_reference, PageLayoutConfig, TupleRecord};
use dana::strider::isa::WORD_MASK;
use dana::strider::{
    assemble, decode, disassemble, encode, execute, generate_program, page_cycles, CodecError, Cond, Instr, Reg,
    StriderError, StriderProgram, Val,
};
use proptest::prelude::*;

const MAX_CYCLES: u64 = 1 << 24;

#[test]
fn read_encoding_by_hand() {
    let header = Instr::ReadB { addr: Val::Imm(0), len: Val::Imm(8), dst: Reg::cr(1) };
    assert_eq!(encode(&header).unwrap(), (8 << 4) | 1);
    let staged = Instr::ReadB { addr: Val::Reg(Reg::t(2)), len: Val::Reg(Reg::cr(5)), dst: Reg::OUT };
    assert_eq!(encode(&staged).unwrap(), (1 << 17) | (1 << 16) | (10 << 8) | (5 << 4) | 15);
    let exit = Instr::Bexit { cond: Cond::Le, a: Reg::t(2), b: Reg::cr(4) };
    assert_eq!(encode(&exit).unwrap(), (10 << 18) | (3 << 15) | (10 << 11) | (4 << 7));
    assert_eq!(encode(&Instr::Bentr).unwrap(), 9 << 18);
    for ins in [header, staged, exit, Instr::Bentr] {
        assert_eq!(decode(encode(&ins).unwrap()).unwrap(), ins);
    }
}

#[test]
fn immediates_out_of_range() {
    let e = encode(&Instr::ExtrB { src: Reg::t(0), start: 40, len: 2, dst: Reg::cr(1) }).unwrap_err();
    assert_eq!(e, CodecError::Immediate { field: "byteStart", value: 40, max: 31 });
    assert!(encode(&Instr::ReadB { addr: Val::Imm(256), len: Val::Imm(1), dst: Reg::cr(1) }).is_err());
    assert!(encode(&Instr::ReadB { addr: Val::Imm(0), len: Val::Imm(16), dst: Reg::cr(1) }).is_err());
    assert!(encode(&Instr::ExtrBit { src: Reg::t(0), start: 0, len: 0, dst: Reg::cr(1) }).is_err());
    match assemble("extrB %t0, 40, 2, %cr1") {
        Err(StriderError::Asm { line: 1, message }) => assert!(message.contains("byteStart"), "{message}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn decode_rejects_malformed_words() {
    assert_eq!(decode(1 << 22), Err(CodecError::TooWide(1 << 22)));
    assert_eq!(decode(11 << 18), Err(CodecError::ReservedOpcode(11)));
    assert_eq!(decode((9 << 18) | 1), Err(CodecError::Pad("bentr")));
    assert_eq!(decode((10 << 18) | (6 << 15)), Err(CodecError::Cond(6)));
}

#[test]
fn every_word_decodes_or_is_rejected() {
    let mut valid = 0u32;
    for w in 0..=WORD_MASK {
        if let Ok(ins) = decode(w) {
            assert_eq!(encode(&ins), Ok(w), "{w:#x}");
            valid += 1;
        }
    }
    // A register-mode field accepts only ids 0..=15.
    let (a8, a7, b4) = (256 + 16, 128 + 16, 16 + 16);
    let read_write = 2 * a8 * b4 * 16;
    let extract = 2 * (1 << 17);
    let cln = a7 * b4 * 16;
    let insrt = a7 * 16 * 16;
    let alu = 3 * a8 * 16 * 16;
    let bexit = 6 * 16 * 16;
    assert_eq!(valid, read_write + extract + cln + insrt + alu + 1 + bexit);
}

#[test]
fn generated_program_shape() {
    let layout = PageLayoutConfig::new(2, 1);
    let p = generate_program(&layout).unwrap();
    assert_eq!(p.instrs.len(), 13);
    assert_eq!(p.fingerprint, layout.fingerprint());
    let listing = disassemble(&p);
    assert_eq!(listing.lines().count(), 13);
    assert_eq!(listing.lines().nth(8), Some("bentr"));
    assert_eq!(listing.lines().last(), Some("bexit le, %t2, %cr4"));
    assert_eq!(assemble(&listing).unwrap().instrs, p.instrs);
    let back = StriderProgram::from_bytes(&p.to_bytes(), p.fingerprint.clone()).unwrap();
    assert_eq!(back, p);

    let long = generate_program(&layout.clone().with_tuple_header_len(24)).unwrap();
    assert_eq!(long.instrs.len(), 14);
}

#[test]
fn zero_length_tuple_header() {
    let layout = PageLayoutConfig::new(3, 1).with_tuple_header_len(0);
    let recs: Vec<_> = (0..50).map(|i| TupleRecord::new(vec![i as f64, 1.0, 2.0], vec![-1.0])).collect();
    let page = build_page(&layout, &recs).unwrap();
    let run = execute(&generate_program(&layout).unwrap(), &page.bytes, MAX_CYCLES).unwrap();
    assert_eq!(run.payloads.len(), 50);
    assert_eq!(run.payloads[7], recs[7].encode(&layout));
}

#[test]
fn empty_page_emits_nothing() {
    let layout = PageLayoutConfig::new(2, 1);
    let p = generate_program(&layout).unwrap();
    let page = build_page(&layout, &[]).unwrap();
    let run = execute(&p, &page.bytes, MAX_CYCLES).unwrap();
    assert!(run.payloads.is_empty());
    assert_eq!(run.cycles, page_cycles(&p, &layout, 0));
}

#[test]
fn hand_written_programs() {
    let layout = PageLayoutConfig::new(2, 1);
    let page = build_page(&layout, &vec![TupleRecord::new(vec![1.0, 2.0], vec![3.0]); 9]).unwrap();
    // Tuple count through staging, with an inserted marker byte.
    let p = assemble("readB 8, 2, %out  // count\nad %zero, 171, %t0\ninsrt 0, 1, %t0\ncln 2, 1, %out\n").unwrap();
    assert_eq!(execute(&p, &page.bytes, 100).unwrap().payloads, vec![vec![171, 9]]);

    let p = assemble("readB 255, 8, %t0\nextrBit %t0, 3, 4, %t1\nwriteB 0, 1, %t1\nreadB 0, 1, %out\ncln 9, 0, %out").unwrap();
    assert_eq!(execute(&p, &page.bytes, 100).unwrap().payloads.len(), 1);

    let oob = assemble("ad %zero, 255, %t0\nmul %t0, 255, %t0\nreadB %t0, 8, %t1").unwrap();
    assert!(matches!(execute(&oob, &page.bytes, 100), Err(StriderError::ReadOutOfBounds { pc: 2, .. })));
    let spin = assemble("bentr\nbexit eq, %zero, %t0").unwrap();
    assert!(matches!(spin.instrs[1], Instr::Bexit { .. }));
    let spin = assemble("ad %zero, 1, %t0\nbentr\nbexit eq, %zero, %t0").unwrap();
    assert_eq!(execute(&spin, &page.bytes, 1000), Err(StriderError::MaxCycles(1000)));
    assert!(matches!(assemble("bexit eq, %zero, %t0"), Err(StriderError::Asm { line: 1, .. })));
    assert!(matches!(assemble("readB 0, 8"), Err(StriderError::Asm { line: 1, .. })));
    assert!(matches!(assemble("\n\nfoo 1"), Err(StriderError::Asm { line: 3, .. })));
}

fn arb_layout() -> impl Strategy<Value = PageLayoutConfig> {
    (1usize..40, 0usize..4, prop::bool::ANY, 8u32..=15, prop::sample::select(vec![0usize, 4, 8, 12, 15, 16, 40]))
        .prop_filter_map("valid layout", |(f, l, wide, log, hdr)| {
            let layout = PageLayoutConfig::new(f, l)
                .with_value_width(if wide { 8 } else { 4 })
                .with_page_size(1 << log)
                .with_tuple_header_len(hdr);
            layout.validate().ok().map(|_| layout)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// The generated program emits exactly the payloads a direct line
    /// pointer walk finds, in the same order, at the predicted cycle count.
    #[test]
    fn strider_matches_reference_walk(layout in arb_layout(), fill in 0.0f64..=1.0, seed in any::<u16>()) {
        let n = (layout.capacity() as f64 * fill).round() as usize;
        let recs: Vec<TupleRecord> = (0..n)
            .map(|i| {
                let v = |j: usize| ((i * 37 + j * 11 + seed as usize) % 1000) as f64 * 0.5 - 250.0;
                TupleRecord::new((0..layout.feature_count).map(v).collect(), (0..layout.label_count).map(|j| v(j + 50)).collect())
            })
            .collect();
        let page = build_page(&layout, &recs).unwrap();
        let program = generate_program(&layout).unwrap();
        let run = execute(&program, &page.bytes, MAX_CYCLES).unwrap();
        let expect: Vec<Vec<u8>> = read_reference(&page, &layout).unwrap().iter().map(|r| r.encode(&layout)).collect();
        prop_assert_eq!(&run.payloads, &expect);
        prop_assert_eq!(run.cycles, page_cycles(&program, &layout, n));
    }

    #[test]
    fn codec_round_trip(w in 0u32..=WORD_MASK) {
        if let Ok(ins) = decode(w) {
            prop_assert_eq!(encode(&ins), Ok(w));
            let text = dana::strider::format_instr(&ins);
            if !matches!(ins, Instr::Bexit { .. }) {
                prop_assert_eq!(assemble(&text).unwrap().instrs, vec![ins]);
            }
        }
    }
}

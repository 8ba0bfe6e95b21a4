use super::asm::StriderProgram;
use super::interp::{bulk_cost, STAGING_CAPACITY};
use super::isa::{Arith, Cond, Instr, Reg, Val};
use super::StriderError;
use crate::pageio::{PageLayoutConfig, HEADER_LEN};

/// Page-walk program for a layout.
///
/// Header: page word, tuple count, lower/upper, then upper split out.
/// First pointer: tuple length from line pointer 0; the walk starts at
/// `special` (the page size) and steps down one tuple length per iteration.
/// Loop: step, stage the tuple, strip its header and emit, exit once the
/// offset reaches `upper`.
pub fn generate_program(layout: &PageLayoutConfig) -> Result<StriderProgram, StriderError> {
    layout.validate().map_err(|e| StriderError::Layout(e.to_string()))?;
    if layout.tuple_len() > STAGING_CAPACITY {
        return Err(StriderError::Layout(format!(
            "tuple length {} exceeds staging capacity {STAGING_CAPACITY}",
            layout.tuple_len()
        )));
    }
    let h = layout.tuple_header_len;
    if h > 255 {
        return Err(StriderError::Layout(format!("tuple header length {h} exceeds 255")));
    }
    let imm = Val::Imm;
    let (cr1, cr2, cr4, cr5, cr6) = (Reg::cr(1), Reg::cr(2), Reg::cr(4), Reg::cr(5), Reg::cr(6));
    let (t0, t1, t2) = (Reg::t(0), Reg::t(1), Reg::t(2));
    let mut p = vec![
        Instr::ReadB { addr: imm(0), len: imm(8), dst: cr1 },
        Instr::ReadB { addr: imm(8), len: imm(2), dst: cr2 },
        Instr::ReadB { addr: imm(10), len: imm(4), dst: t0 },
        Instr::ExtrB { src: t0, start: 2, len: 2, dst: cr4 },
        Instr::ReadB { addr: imm(HEADER_LEN as u32), len: imm(4), dst: t1 },
        // Shift the 15-bit length field (bits 31:17) onto a byte boundary.
        Instr::Alu { op: Arith::Mul, a: t1, b: imm(128), dst: t1 },
        Instr::ExtrB { src: t1, start: 3, len: 2, dst: cr5 },
        Instr::ExtrB { src: cr1, start: 0, len: 2, dst: t2 },
    ];
    let strip = if h <= 15 {
        imm(h as u32)
    } else {
        p.push(Instr::Alu { op: Arith::Ad, a: Reg::ZERO, b: imm(h as u32), dst: cr6 });
        Val::Reg(cr6)
    };
    p.extend([
        Instr::Bentr,
        Instr::Alu { op: Arith::Sub, a: t2, b: Val::Reg(cr5), dst: t2 },
        Instr::ReadB { addr: Val::Reg(t2), len: Val::Reg(cr5), dst: Reg::OUT },
        Instr::Cln { start: imm(0), len: strip, dst: Reg::OUT },
        Instr::Bexit { cond: Cond::Le, a: t2, b: cr4 },
    ]);
    StriderProgram::new(p, layout.fingerprint())
}

/// Cycles the program spends before its loop and per loop iteration, for a
/// given staged tuple length.
pub fn cycle_model(program: &StriderProgram, tuple_len: usize) -> (u64, u64) {
    let entry = program.instrs.iter().position(|i| matches!(i, Instr::Bentr)).unwrap_or(program.instrs.len());
    let cost = |i: &Instr| match i {
        Instr::ReadB { dst, .. } if *dst == Reg::OUT => bulk_cost(tuple_len),
        _ => 1,
    };
    let prologue = program.instrs[..=entry.min(program.instrs.len().saturating_sub(1))].iter().map(cost).sum();
    let body = program.instrs.get(entry + 1..).map_or(0, |b| b.iter().map(cost).sum());
    (prologue, body)
}

/// Predicted cycles to walk a page holding `tuples` tuples.
pub fn page_cycles(program: &StriderProgram, layout: &PageLayoutConfig, tuples: usize) -> u64 {
    if tuples == 0 {
        let (pro, body) = cycle_model(program, 0);
        return pro + body;
    }
    let (pro, body) = cycle_model(program, layout.tuple_len());
    pro + tuples as u64 * body
}

//! DANA-S1: 22-bit strider instruction words.
//!
//! ```text
//! [21:18] opcode
//! readB/writeB  modeA(1) modeB(1) A(8) B(4) reg(4)
//! extrB         src(4) byteStart(5) byteLen(4) dst(4) pad(1)
//! extrBit       src(4) bitStart(6) bitLen-1(3) dst(4) pad(1)
//! cln           modeA(1) modeB(1) start(7) len(4) dst(4) pad(1)
//! insrt         modeA(1) pos(7) len(4) src(4) pad(2)
//! ad/sub/mul    modeB(1) srcA(4) B(8) dst(4) pad(1)
//! bentr         pad(18)
//! bexit         cond(3) srcA(4) srcB(4) pad(7)
//! ```
//! A mode bit of 1 means the field holds a register id.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const WORD_BITS: u32 = 22;
pub const WORD_MASK: u32 = (1 << WORD_BITS) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Reg(pub u8);

impl Reg {
    pub const ZERO: Reg = Reg(0);
    pub const OUT: Reg = Reg(15);

    pub fn cr(n: u8) -> Reg {
        assert!((1..=7).contains(&n));
        Reg(n)
    }

    pub fn t(n: u8) -> Reg {
        assert!(n <= 6);
        Reg(8 + n)
    }

    pub fn name(self) -> String {
        match self.0 {
            0 => "%zero".to_string(),
            n @ 1..=7 => format!("%cr{n}"),
            n @ 8..=14 => format!("%t{}", n - 8),
            _ => "%out".to_string(),
        }
    }

    pub fn parse(text: &str) -> Option<Reg> {
        let s = text.strip_prefix('%')?;
        let num = |p: &str| s.strip_prefix(p).and_then(|d| d.parse::<u8>().ok());
        match s {
            "zero" => Some(Reg(0)),
            "out" => Some(Reg::OUT),
            _ => {
                if let Some(n) = num("cr").filter(|n| (1..=7).contains(n)) {
                    Some(Reg(n))
                } else if let Some(n) = num("t").filter(|n| *n <= 6) {
                    Some(Reg(8 + n))
                } else {
                    num("r").filter(|n| *n <= 15).map(Reg)
                }
            }
        }
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// An operand that is either an immediate or a register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Val {
    Imm(u32),
    Reg(Reg),
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Imm(v) => write!(f, "{v}"),
            Val::Reg(r) => write!(f, "{r}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cond {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cond {
    pub const ALL: [Cond; 6] = [Cond::Eq, Cond::Ne, Cond::Lt, Cond::Le, Cond::Gt, Cond::Ge];

    pub fn name(self) -> &'static str {
        match self {
            Cond::Eq => "eq",
            Cond::Ne => "ne",
            Cond::Lt => "lt",
            Cond::Le => "le",
            Cond::Gt => "gt",
            Cond::Ge => "ge",
        }
    }

    pub fn holds(self, a: u64, b: u64) -> bool {
        match self {
            Cond::Eq => a == b,
            Cond::Ne => a != b,
            Cond::Lt => a < b,
            Cond::Le => a <= b,
            Cond::Gt => a > b,
            Cond::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arith {
    Ad,
    Sub,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Instr {
    /// Load `len` bytes at `addr` into a register, or append them to the
    /// staging buffer when `dst` is `%out`.
    ReadB { addr: Val, len: Val, dst: Reg },
    /// Store the low `len` bytes of `src` (or staging, for `%out`) at `addr`.
    WriteB { addr: Val, len: Val, src: Reg },
    ExtrB { src: Reg, start: u8, len: u8, dst: Reg },
    /// `len` is the bit count, 1..=8.
    ExtrBit { src: Reg, start: u8, len: u8, dst: Reg },
    /// Drop `len` staging bytes at `start`; with `dst = %out` the remainder
    /// is emitted as one tuple payload.
    Cln { start: Val, len: Val, dst: Reg },
    /// Insert the low `len` bytes of `src` into staging at `pos`.
    Insrt { pos: Val, len: u8, src: Reg },
    Alu { op: Arith, a: Reg, b: Val, dst: Reg },
    Bentr,
    Bexit { cond: Cond, a: Reg, b: Reg },
}

impl Instr {
    pub fn opcode(&self) -> u32 {
        match self {
            Instr::ReadB { .. } => 0,
            Instr::WriteB { .. } => 1,
            Instr::ExtrB { .. } => 2,
            Instr::ExtrBit { .. } => 3,
            Instr::Cln { .. } => 4,
            Instr::Insrt { .. } => 5,
            Instr::Alu { op: Arith::Ad, .. } => 6,
            Instr::Alu { op: Arith::Sub, .. } => 7,
            Instr::Alu { op: Arith::Mul, .. } => 8,
            Instr::Bentr => 9,
            Instr::Bexit { .. } => 10,
        }
    }

    pub fn mnemonic(&self) -> &'static str {
        MNEMONICS[self.opcode() as usize]
    }
}

pub const MNEMONICS: [&str; 11] =
    ["readB", "writeB", "extrB", "extrBit", "cln", "insrt", "ad", "sub", "mul", "bentr", "bexit"];

/// Why a word or instruction cannot be represented.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("word {0:#x} is wider than 22 bits")]
    TooWide(u32),
    #[error("reserved opcode {0}")]
    ReservedOpcode(u32),
    #[error("nonzero pad bits in {0} word")]
    Pad(&'static str),
    #[error("register id {id} out of range in {field} field")]
    RegisterId { field: &'static str, id: u32 },
    #[error("reserved bexit condition {0}")]
    Cond(u32),
    #[error("{field} immediate {value} exceeds {max}")]
    Immediate { field: &'static str, value: u32, max: u32 },
    #[error("{field} must be a register")]
    NeedsRegister { field: &'static str },
}

fn field(word: u32, lo: u32, bits: u32) -> u32 {
    (word >> lo) & ((1 << bits) - 1)
}

fn put(value: u32, lo: u32) -> u32 {
    value << lo
}

fn imm(name: &'static str, v: u32, bits: u32) -> Result<u32, CodecError> {
    let max = (1 << bits) - 1;
    if v > max {
        Err(CodecError::Immediate { field: name, value: v, max })
    } else {
        Ok(v)
    }
}

/// (mode bit, field value) for a mixed operand.
fn mixed(name: &'static str, v: Val, bits: u32) -> Result<(u32, u32), CodecError> {
    match v {
        Val::Imm(x) => Ok((0, imm(name, x, bits)?)),
        Val::Reg(r) => Ok((1, r.0 as u32)),
    }
}

fn unmixed(name: &'static str, mode: u32, value: u32) -> Result<Val, CodecError> {
    if mode == 0 {
        Ok(Val::Imm(value))
    } else if value > 15 {
        Err(CodecError::RegisterId { field: name, id: value })
    } else {
        Ok(Val::Reg(Reg(value as u8)))
    }
}

fn reg(r: Reg) -> u32 {
    r.0 as u32 & 0xf
}

pub fn encode(instr: &Instr) -> Result<u32, CodecError> {
    let op = put(instr.opcode(), 18);
    let body = match *instr {
        Instr::ReadB { addr, len, dst: r } | Instr::WriteB { addr, len, src: r } => {
            let (ma, a) = mixed("address", addr, 8)?;
            let (mb, b) = mixed("length", len, 4)?;
            put(ma, 17) | put(mb, 16) | put(a, 8) | put(b, 4) | reg(r)
        }
        Instr::ExtrB { src, start, len, dst } => {
            let s = imm("byteStart", start as u32, 5)?;
            let l = imm("byteLen", len as u32, 4)?;
            put(reg(src), 14) | put(s, 9) | put(l, 5) | put(reg(dst), 1)
        }
        Instr::ExtrBit { src, start, len, dst } => {
            let s = imm("bitStart", start as u32, 6)?;
            if !(1..=8).contains(&len) {
                return Err(CodecError::Immediate { field: "bitLen", value: len as u32, max: 8 });
            }
            put(reg(src), 14) | put(s, 8) | put(len as u32 - 1, 5) | put(reg(dst), 1)
        }
        Instr::Cln { start, len, dst } => {
            let (ma, s) = mixed("start", start, 7)?;
            let (mb, l) = mixed("length", len, 4)?;
            put(ma, 17) | put(mb, 16) | put(s, 9) | put(l, 5) | put(reg(dst), 1)
        }
        Instr::Insrt { pos, len, src } => {
            let (ma, p) = mixed("position", pos, 7)?;
            let l = imm("length", len as u32, 4)?;
            put(ma, 17) | put(p, 10) | put(l, 6) | put(reg(src), 2)
        }
        Instr::Alu { a, b, dst, .. } => {
            let (mb, bv) = mixed("operand", b, 8)?;
            put(mb, 17) | put(reg(a), 13) | put(bv, 5) | put(reg(dst), 1)
        }
        Instr::Bentr => 0,
        Instr::Bexit { cond, a, b } => {
            let c = Cond::ALL.iter().position(|x| *x == cond).expect("cond") as u32;
            put(c, 15) | put(reg(a), 11) | put(reg(b), 7)
        }
    };
    Ok(op | body)
}

pub fn decode(word: u32) -> Result<Instr, CodecError> {
    if word > WORD_MASK {
        return Err(CodecError::TooWide(word));
    }
    let opcode = field(word, 18, 4);
    let r = |lo| Reg(field(word, lo, 4) as u8);
    let pad = |bits: u32, name| if field(word, 0, bits) != 0 { Err(CodecError::Pad(name)) } else { Ok(()) };
    Ok(match opcode {
        0 | 1 => {
            let addr = unmixed("address", field(word, 17, 1), field(word, 8, 8))?;
            let len = unmixed("length", field(word, 16, 1), field(word, 4, 4))?;
            if opcode == 0 {
                Instr::ReadB { addr, len, dst: r(0) }
            } else {
                Instr::WriteB { addr, len, src: r(0) }
            }
        }
        2 => {
            pad(1, "extrB")?;
            Instr::ExtrB { src: r(14), start: field(word, 9, 5) as u8, len: field(word, 5, 4) as u8, dst: r(1) }
        }
        3 => {
            pad(1, "extrBit")?;
            Instr::ExtrBit { src: r(14), start: field(word, 8, 6) as u8, len: field(word, 5, 3) as u8 + 1, dst: r(1) }
        }
        4 => {
            pad(1, "cln")?;
            let start = unmixed("start", field(word, 17, 1), field(word, 9, 7))?;
            let len = unmixed("length", field(word, 16, 1), field(word, 5, 4))?;
            Instr::Cln { start, len, dst: r(1) }
        }
        5 => {
            pad(2, "insrt")?;
            let pos = unmixed("position", field(word, 17, 1), field(word, 10, 7))?;
            Instr::Insrt { pos, len: field(word, 6, 4) as u8, src: r(2) }
        }
        6..=8 => {
            pad(1, MNEMONICS[opcode as usize])?;
            let op = [Arith::Ad, Arith::Sub, Arith::Mul][opcode as usize - 6];
            let b = unmixed("operand", field(word, 17, 1), field(word, 5, 8))?;
            Instr::Alu { op, a: r(13), b, dst: r(1) }
        }
        9 => {
            pad(18, "bentr")?;
            Instr::Bentr
        }
        10 => {
            pad(7, "bexit")?;
            let c = field(word, 15, 3);
            let cond = *Cond::ALL.get(c as usize).ok_or(CodecError::Cond(c))?;
            Instr::Bexit { cond, a: r(11), b: r(7) }
        }
        other => return Err(CodecError::ReservedOpcode(other)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn read_header_word() {
        let i = Instr::ReadB { addr: Val::Imm(0), len: Val::Imm(8), dst: Reg::cr(1) };
        let w = encode(&i).unwrap();
        assert_eq!(field(w, 18, 4), 0);
        assert_eq!(field(w, 17, 1), 0);
        assert_eq!(field(w, 8, 8), 0);
        assert_eq!(field(w, 4, 4), 8);
        assert_eq!(field(w, 0, 4), 1);
        assert_eq!(decode(w).unwrap(), i);
    }

    #[test]
    fn reserved_patterns_are_diagnostics() {
        assert_eq!(decode(11 << 18), Err(CodecError::ReservedOpcode(11)));
        assert_eq!(decode((9 << 18) | 1), Err(CodecError::Pad("bentr")));
        assert_eq!(decode((10 << 18) | (7 << 15)), Err(CodecError::Cond(7)));
        assert!(matches!(decode((1 << 17) | (200 << 8)), Err(CodecError::RegisterId { .. })));
    }

    #[test]
    fn field_bounds() {
        let i = Instr::ExtrB { src: Reg::t(0), start: 40, len: 3, dst: Reg::t(1) };
        assert!(matches!(encode(&i), Err(CodecError::Immediate { field: "byteStart", .. })));
    }
}

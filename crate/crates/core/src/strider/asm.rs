use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::isa::{self, Arith, CodecError, Cond, Instr, Reg, Val};
use super::StriderError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StriderProgram {
    pub instrs: Vec<Instr>,
    /// Register names used by the program.
    pub symbols: BTreeMap<String, u8>,
    /// Fingerprint of the page layout the program was generated for; empty
    /// for hand-written programs.
    pub fingerprint: String,
}

impl StriderProgram {
    pub fn new(instrs: Vec<Instr>, fingerprint: String) -> Result<Self, StriderError> {
        check_loops(&instrs)?;
        for (i, ins) in instrs.iter().enumerate() {
            isa::encode(ins).map_err(|e| StriderError::Asm { line: i + 1, message: e.to_string() })?;
        }
        let mut symbols = BTreeMap::new();
        for ins in &instrs {
            for r in registers(ins) {
                symbols.insert(r.name(), r.0);
            }
        }
        Ok(StriderProgram { instrs, symbols, fingerprint })
    }

    pub fn words(&self) -> Vec<u32> {
        self.instrs.iter().map(|i| isa::encode(i).expect("validated at construction")).collect()
    }

    /// Each 22-bit word in a little-endian 32-bit container.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.words().iter().flat_map(|w| w.to_le_bytes()).collect()
    }

    pub fn from_bytes(bytes: &[u8], fingerprint: String) -> Result<Self, StriderError> {
        if bytes.len() % 4 != 0 {
            return Err(StriderError::Asm { line: 0, message: format!("binary length {} is not a multiple of 4", bytes.len()) });
        }
        let instrs = bytes
            .chunks_exact(4)
            .enumerate()
            .map(|(i, c)| {
                let w = u32::from_le_bytes(c.try_into().expect("4 bytes"));
                isa::decode(w).map_err(|e| StriderError::Asm { line: i + 1, message: e.to_string() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        StriderProgram::new(instrs, fingerprint)
    }
}

fn registers(ins: &Instr) -> Vec<Reg> {
    let mut v = Vec::new();
    let val = |x: &Val, v: &mut Vec<Reg>| {
        if let Val::Reg(r) = x {
            v.push(*r)
        }
    };
    match ins {
        Instr::ReadB { addr, len, dst: r } | Instr::WriteB { addr, len, src: r } => {
            val(addr, &mut v);
            val(len, &mut v);
            v.push(*r);
        }
        Instr::ExtrB { src, dst, .. } | Instr::ExtrBit { src, dst, .. } => v.extend([*src, *dst]),
        Instr::Cln { start, len, dst } => {
            val(start, &mut v);
            val(len, &mut v);
            v.push(*dst);
        }
        Instr::Insrt { pos, src, .. } => {
            val(pos, &mut v);
            v.push(*src);
        }
        Instr::Alu { a, b, dst, .. } => {
            v.push(*a);
            val(b, &mut v);
            v.push(*dst);
        }
        Instr::Bentr => {}
        Instr::Bexit { a, b, .. } => v.extend([*a, *b]),
    }
    v
}

/// Every `bexit` must close an open `bentr`.
fn check_loops(instrs: &[Instr]) -> Result<(), StriderError> {
    let mut depth = 0usize;
    for (i, ins) in instrs.iter().enumerate() {
        match ins {
            Instr::Bentr => depth += 1,
            Instr::Bexit { .. } => {
                if depth == 0 {
                    return Err(StriderError::Asm { line: i + 1, message: "bexit without bentr".into() });
                }
                depth -= 1;
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn format_instr(ins: &Instr) -> String {
    let m = ins.mnemonic();
    match ins {
        Instr::ReadB { addr, len, dst } => format!("{m} {addr}, {len}, {dst}"),
        Instr::WriteB { addr, len, src } => format!("{m} {addr}, {len}, {src}"),
        Instr::ExtrB { src, start, len, dst } | Instr::ExtrBit { src, start, len, dst } => {
            format!("{m} {src}, {start}, {len}, {dst}")
        }
        Instr::Cln { start, len, dst } => format!("{m} {start}, {len}, {dst}"),
        Instr::Insrt { pos, len, src } => format!("{m} {pos}, {len}, {src}"),
        Instr::Alu { a, b, dst, .. } => format!("{m} {a}, {b}, {dst}"),
        Instr::Bentr => m.to_string(),
        Instr::Bexit { cond, a, b } => format!("{m} {}, {a}, {b}", cond.name()),
    }
}

/// Canonical listing: one instruction per line, no comments.
pub fn disassemble(program: &StriderProgram) -> String {
    program.instrs.iter().map(|i| format_instr(i) + "\n").collect()
}

pub fn assemble(text: &str) -> Result<StriderProgram, StriderError> {
    let mut instrs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let code = strip_comment(raw).trim();
        if code.is_empty() {
            continue;
        }
        let fail = |message: String| StriderError::Asm { line, message };
        let (mnemonic, rest) = code.split_once(char::is_whitespace).unwrap_or((code, ""));
        let ops: Vec<&str> = if rest.trim().is_empty() { Vec::new() } else { rest.split(',').map(str::trim).collect() };
        let want = |k: usize| {
            if ops.len() == k {
                Ok(())
            } else {
                Err(fail(format!("`{mnemonic}` takes {k} operands, found {}", ops.len())))
            }
        };
        let ins = match mnemonic {
            "readB" | "writeB" => {
                want(3)?;
                let (addr, len, r) = (val(ops[0], line)?, val(ops[1], line)?, reg(ops[2], line)?);
                if mnemonic == "readB" {
                    Instr::ReadB { addr, len, dst: r }
                } else {
                    Instr::WriteB { addr, len, src: r }
                }
            }
            "extrB" | "extrBit" => {
                want(4)?;
                let (src, start, len, dst) = (reg(ops[0], line)?, small(ops[1], line)?, small(ops[2], line)?, reg(ops[3], line)?);
                if mnemonic == "extrB" {
                    Instr::ExtrB { src, start, len, dst }
                } else {
                    Instr::ExtrBit { src, start, len, dst }
                }
            }
            "cln" => {
                want(3)?;
                Instr::Cln { start: val(ops[0], line)?, len: val(ops[1], line)?, dst: reg(ops[2], line)? }
            }
            "insrt" => {
                want(3)?;
                Instr::Insrt { pos: val(ops[0], line)?, len: small(ops[1], line)?, src: reg(ops[2], line)? }
            }
            "ad" | "sub" | "mul" => {
                want(3)?;
                let op = match mnemonic {
                    "ad" => Arith::Ad,
                    "sub" => Arith::Sub,
                    _ => Arith::Mul,
                };
                Instr::Alu { op, a: reg(ops[0], line)?, b: val(ops[1], line)?, dst: reg(ops[2], line)? }
            }
            "bentr" => {
                want(0)?;
                Instr::Bentr
            }
            "bexit" => {
                want(3)?;
                let cond = Cond::ALL
                    .into_iter()
                    .find(|c| c.name() == ops[0])
                    .ok_or_else(|| fail(format!("unknown condition `{}`", ops[0])))?;
                Instr::Bexit { cond, a: reg(ops[1], line)?, b: reg(ops[2], line)? }
            }
            other => return Err(fail(format!("unknown mnemonic `{other}`"))),
        };
        isa::encode(&ins).map_err(|e: CodecError| fail(e.to_string()))?;
        instrs.push((line, ins));
    }
    let lines: Vec<usize> = instrs.iter().map(|(l, _)| *l).collect();
    let instrs: Vec<Instr> = instrs.into_iter().map(|(_, i)| i).collect();
    StriderProgram::new(instrs, String::new()).map_err(|e| match e {
        // Report source lines rather than instruction indices.
        StriderError::Asm { line, message } if line >= 1 && line <= lines.len() => {
            StriderError::Asm { line: lines[line - 1], message }
        }
        other => other,
    })
}

fn strip_comment(line: &str) -> &str {
    let cut = [line.find("\\\\"), line.find("//")].into_iter().flatten().min();
    match cut {
        Some(i) => &line[..i],
        None => line,
    }
}

fn reg(text: &str, line: usize) -> Result<Reg, StriderError> {
    Reg::parse(text).ok_or_else(|| StriderError::Asm { line, message: format!("expected a register, found `{text}`") })
}

fn val(text: &str, line: usize) -> Result<Val, StriderError> {
    if text.starts_with('%') {
        return reg(text, line).map(Val::Reg);
    }
    text.parse::<u32>()
        .map(Val::Imm)
        .map_err(|_| StriderError::Asm { line, message: format!("expected an immediate or register, found `{text}`") })
}

fn small(text: &str, line: usize) -> Result<u8, StriderError> {
    let v: u32 = text
        .parse()
        .map_err(|_| StriderError::Asm { line, message: format!("expected an immediate, found `{text}`") })?;
    u8::try_from(v).map_err(|_| StriderError::Asm { line, message: format!("immediate {v} out of range") })
}

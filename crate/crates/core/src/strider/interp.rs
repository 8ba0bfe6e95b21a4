use super::asm::StriderProgram;
use super::isa::{Arith, Instr, Reg, Val};
use super::StriderError;

pub const STAGING_CAPACITY: usize = 4096;
pub const LOOP_DEPTH: usize = 8;

/// Architectural state of one strider walking one page buffer.
#[derive(Debug, Clone)]
pub struct StriderState {
    pub regs: [u64; 16],
    pub pc: usize,
    pub loop_stack: Vec<usize>,
    pub staging: Vec<u8>,
    pub output: Vec<Vec<u8>>,
    pub cycles: u64,
}

impl Default for StriderState {
    fn default() -> Self {
        StriderState { regs: [0; 16], pc: 0, loop_stack: Vec::new(), staging: Vec::new(), output: Vec::new(), cycles: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StriderRun {
    pub payloads: Vec<Vec<u8>>,
    pub cycles: u64,
}

impl StriderRun {
    pub fn stream(&self) -> Vec<u8> {
        self.payloads.concat()
    }
}

/// Cycle cost of moving `n` bytes through the staging buffer.
pub fn bulk_cost(n: usize) -> u64 {
    n.div_ceil(8).max(1) as u64
}

impl StriderState {
    fn get(&self, r: Reg) -> u64 {
        if r.0 == 0 || r == Reg::OUT {
            0
        } else {
            self.regs[r.0 as usize]
        }
    }

    fn set(&mut self, r: Reg, v: u64) {
        if r.0 != 0 && r != Reg::OUT {
            self.regs[r.0 as usize] = v;
        }
    }

    fn val(&self, v: Val) -> u64 {
        match v {
            Val::Imm(x) => x as u64,
            Val::Reg(r) => self.get(r),
        }
    }

    /// Execute one instruction. Returns false once the program has halted.
    pub fn step(&mut self, program: &StriderProgram, page: &mut [u8]) -> Result<bool, StriderError> {
        let Some(ins) = program.instrs.get(self.pc) else {
            return Ok(false);
        };
        let pc = self.pc;
        let mut next = pc + 1;
        let mut cost = 1;
        match *ins {
            Instr::ReadB { addr, len, dst } => {
                let (a, n) = (self.val(addr) as usize, self.val(len) as usize);
                if a.checked_add(n).map_or(true, |end| end > page.len()) {
                    return Err(StriderError::ReadOutOfBounds { pc, addr: a, len: n });
                }
                if dst == Reg::OUT {
                    if self.staging.len() + n > STAGING_CAPACITY {
                        return Err(StriderError::StagingOverflow { pc, need: self.staging.len() + n });
                    }
                    self.staging.extend_from_slice(&page[a..a + n]);
                    cost = bulk_cost(n);
                } else {
                    if n > 8 {
                        return Err(StriderError::RegisterWidth { pc, len: n });
                    }
                    let mut buf = [0u8; 8];
                    buf[..n].copy_from_slice(&page[a..a + n]);
                    self.set(dst, u64::from_le_bytes(buf));
                }
            }
            Instr::WriteB { addr, len, src } => {
                let (a, n) = (self.val(addr) as usize, self.val(len) as usize);
                if a.checked_add(n).map_or(true, |end| end > page.len()) {
                    return Err(StriderError::ReadOutOfBounds { pc, addr: a, len: n });
                }
                if src == Reg::OUT {
                    if n > self.staging.len() {
                        return Err(StriderError::StagingUnderflow { pc, need: n, have: self.staging.len() });
                    }
                    page[a..a + n].copy_from_slice(&self.staging[..n]);
                    cost = bulk_cost(n);
                } else {
                    if n > 8 {
                        return Err(StriderError::RegisterWidth { pc, len: n });
                    }
                    page[a..a + n].copy_from_slice(&self.get(src).to_le_bytes()[..n]);
                }
            }
            Instr::ExtrB { src, start, len, dst } => {
                let v = self.get(src);
                let shifted = if start >= 8 { 0 } else { v >> (8 * start as u32) };
                let bits = 8 * len as u32;
                let masked = if bits >= 64 { shifted } else { shifted & ((1u64 << bits) - 1) };
                self.set(dst, masked);
            }
            Instr::ExtrBit { src, start, len, dst } => {
                let v = self.get(src) >> start;
                self.set(dst, v & ((1u64 << len) - 1));
            }
            Instr::Cln { start, len, dst } => {
                let s = (self.val(start) as usize).min(self.staging.len());
                let e = (s + self.val(len) as usize).min(self.staging.len());
                self.staging.drain(s..e);
                if dst == Reg::OUT {
                    let payload = std::mem::take(&mut self.staging);
                    if !payload.is_empty() {
                        self.output.push(payload);
                    }
                }
            }
            Instr::Insrt { pos, len, src } => {
                let p = (self.val(pos) as usize).min(self.staging.len());
                let n = len as usize;
                if self.staging.len() + n > STAGING_CAPACITY {
                    return Err(StriderError::StagingOverflow { pc, need: self.staging.len() + n });
                }
                let bytes = self.get(src).to_le_bytes();
                let ins: Vec<u8> = (0..n).map(|i| if i < 8 { bytes[i] } else { 0 }).collect();
                self.staging.splice(p..p, ins);
            }
            Instr::Alu { op, a, b, dst } => {
                let (x, y) = (self.get(a), self.val(b));
                let v = match op {
                    Arith::Ad => x.wrapping_add(y),
                    Arith::Sub => x.wrapping_sub(y),
                    Arith::Mul => x.wrapping_mul(y),
                };
                self.set(dst, v);
            }
            Instr::Bentr => {
                if self.loop_stack.len() >= LOOP_DEPTH {
                    return Err(StriderError::LoopOverflow { pc });
                }
                self.loop_stack.push(pc);
            }
            Instr::Bexit { cond, a, b } => {
                let Some(&top) = self.loop_stack.last() else {
                    return Err(StriderError::LoopUnderflow { pc });
                };
                if cond.holds(self.get(a), self.get(b)) {
                    self.loop_stack.pop();
                } else {
                    next = top + 1;
                }
            }
        }
        self.cycles += cost;
        self.pc = next;
        Ok(true)
    }
}

/// Run `program` over a copy of `page` until it halts.
pub fn execute(program: &StriderProgram, page: &[u8], max_cycles: u64) -> Result<StriderRun, StriderError> {
    let mut buf = page.to_vec();
    let mut st = StriderState::default();
    while st.step(program, &mut buf)? {
        if st.cycles > max_cycles {
            return Err(StriderError::MaxCycles(max_cycles));
        }
    }
    Ok(StriderRun { payloads: st.output, cycles: st.cycles })
}

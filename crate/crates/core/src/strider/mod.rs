//! Access engine: the strider ISA, its assembler, the page-walk program
//! generator and the interpreter.

pub mod asm;
pub mod gen;
pub mod interp;
pub mod isa;

use thiserror::Error;

pub use asm::{assemble, disassemble, format_instr, StriderProgram};
pub use gen::{cycle_model, generate_program, page_cycles};
pub use interp::{execute, StriderRun, StriderState, STAGING_CAPACITY};
pub use isa::{decode, encode, CodecError, Cond, Instr, Reg, Val};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StriderError {
    #[error("line {line}: {message}")]
    Asm { line: usize, message: String },
    #[error("layout: {0}")]
    Layout(String),
    #[error("pc {pc}: access [{addr}, {addr}+{len}) outside the page")]
    ReadOutOfBounds { pc: usize, addr: usize, len: usize },
    #[error("pc {pc}: staging overflow ({need} bytes)")]
    StagingOverflow { pc: usize, need: usize },
    #[error("pc {pc}: staging holds {have} bytes, {need} requested")]
    StagingUnderflow { pc: usize, need: usize, have: usize },
    #[error("pc {pc}: {len}-byte access into a 64-bit register")]
    RegisterWidth { pc: usize, len: usize },
    #[error("pc {pc}: loop stack overflow")]
    LoopOverflow { pc: usize },
    #[error("pc {pc}: bexit with empty loop stack")]
    LoopUnderflow { pc: usize },
    #[error("exceeded {0} cycles")]
    MaxCycles(u64),
}

//! RV32IM(C) + Zicsr/Zicntr instruction set: decoding, encoding, execution
//! semantics and the cycle decision table.

mod compressed;
mod csr;
mod decode;
mod encode;
mod exec;
mod state;
mod timing;

pub use compressed::decode_compressed;
pub use csr::IllegalCsr;
pub use csr::{csr_op, CsrOp};
pub use decode::decode;
pub use encode::encode;
pub use exec::{execute, raise_trap, take_pending_interrupt, AccessFault, DataPort, MemEffect, Retirement};
pub use state::{ArchState, CsrFile, HaltReason, InterruptLines, MIP_MEIP, MIP_MTIP, MSTATUS_MIE, MSTATUS_MPIE};
pub mod csr_addr {
    pub use super::csr::*;
}
pub use timing::{timing_cycles, TimingOutcome, DIV_CYCLES};

use std::fmt;

use thiserror::Error;

/// Every RV32IM + Zicsr instruction this core understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Lui,
    Auipc,
    Jal,
    Jalr,
    Beq,
    Bne,
    Blt,
    Bge,
    Bltu,
    Bgeu,
    Lb,
    Lh,
    Lw,
    Lbu,
    Lhu,
    Sb,
    Sh,
    Sw,
    Addi,
    Slti,
    Sltiu,
    Xori,
    Ori,
    Andi,
    Slli,
    Srli,
    Srai,
    Add,
    Sub,
    Sll,
    Slt,
    Sltu,
    Xor,
    Srl,
    Sra,
    Or,
    And,
    Fence,
    Ecall,
    Ebreak,
    Mret,
    Wfi,
    Csrrw,
    Csrrs,
    Csrrc,
    Csrrwi,
    Csrrsi,
    Csrrci,
    Mul,
    Mulh,
    Mulhsu,
    Mulhu,
    Div,
    Divu,
    Rem,
    Remu,
}

/// Coarse opcode class, used by the timing table and retirement statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpClass {
    Alu,
    Load,
    Store,
    Branch,
    Jal,
    Jalr,
    Mul,
    Div,
    Csr,
    System,
    Fence,
}

impl OpClass {
    pub const ALL: [OpClass; 11] = [
        OpClass::Alu,
        OpClass::Load,
        OpClass::Store,
        OpClass::Branch,
        OpClass::Jal,
        OpClass::Jalr,
        OpClass::Mul,
        OpClass::Div,
        OpClass::Csr,
        OpClass::System,
        OpClass::Fence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpClass::Alu => "alu",
            OpClass::Load => "load",
            OpClass::Store => "store",
            OpClass::Branch => "branch",
            OpClass::Jal => "jal",
            OpClass::Jalr => "jalr",
            OpClass::Mul => "mul",
            OpClass::Div => "div",
            OpClass::Csr => "csr",
            OpClass::System => "system",
            OpClass::Fence => "fence",
        }
    }
}

/// Access width of a load or store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Width {
    Byte,
    Half,
    Word,
}

impl Width {
    pub fn bytes(self) -> u32 {
        match self {
            Width::Byte => 1,
            Width::Half => 2,
            Width::Word => 4,
        }
    }
}

impl Op {
    pub fn class(self) -> OpClass {
        use Op::*;
        match self {
            Lui | Auipc | Addi | Slti | Sltiu | Xori | Ori | Andi | Slli | Srli | Srai | Add | Sub | Sll | Slt
            | Sltu | Xor | Srl | Sra | Or | And => OpClass::Alu,
            Lb | Lh | Lw | Lbu | Lhu => OpClass::Load,
            Sb | Sh | Sw => OpClass::Store,
            Beq | Bne | Blt | Bge | Bltu | Bgeu => OpClass::Branch,
            Jal => OpClass::Jal,
            Jalr => OpClass::Jalr,
            Mul | Mulh | Mulhsu | Mulhu => OpClass::Mul,
            Div | Divu | Rem | Remu => OpClass::Div,
            Csrrw | Csrrs | Csrrc | Csrrwi | Csrrsi | Csrrci => OpClass::Csr,
            Ecall | Ebreak | Mret | Wfi => OpClass::System,
            Fence => OpClass::Fence,
        }
    }

    /// Width and sign-extension flag for memory operations.
    pub fn mem_access(self) -> Option<(Width, bool)> {
        use Op::*;
        match self {
            Lb => Some((Width::Byte, true)),
            Lh => Some((Width::Half, true)),
            Lw => Some((Width::Word, true)),
            Lbu => Some((Width::Byte, false)),
            Lhu => Some((Width::Half, false)),
            Sb => Some((Width::Byte, false)),
            Sh => Some((Width::Half, false)),
            Sw => Some((Width::Word, false)),
            _ => None,
        }
    }

    /// Whether the instruction architecturally names a destination register.
    pub fn writes_rd(self) -> bool {
        matches!(
            self.class(),
            OpClass::Alu | OpClass::Load | OpClass::Jal | OpClass::Jalr | OpClass::Mul | OpClass::Div | OpClass::Csr
        )
    }

    pub fn mnemonic(self) -> &'static str {
        use Op::*;
        match self {
            Lui => "lui",
            Auipc => "auipc",
            Jal => "jal",
            Jalr => "jalr",
            Beq => "beq",
            Bne => "bne",
            Blt => "blt",
            Bge => "bge",
            Bltu => "bltu",
            Bgeu => "bgeu",
            Lb => "lb",
            Lh => "lh",
            Lw => "lw",
            Lbu => "lbu",
            Lhu => "lhu",
            Sb => "sb",
            Sh => "sh",
            Sw => "sw",
            Addi => "addi",
            Slti => "slti",
            Sltiu => "sltiu",
            Xori => "xori",
            Ori => "ori",
            Andi => "andi",
            Slli => "slli",
            Srli => "srli",
            Srai => "srai",
            Add => "add",
            Sub => "sub",
            Sll => "sll",
            Slt => "slt",
            Sltu => "sltu",
            Xor => "xor",
            Srl => "srl",
            Sra => "sra",
            Or => "or",
            And => "and",
            Fence => "fence",
            Ecall => "ecall",
            Ebreak => "ebreak",
            Mret => "mret",
            Wfi => "wfi",
            Csrrw => "csrrw",
            Csrrs => "csrrs",
            Csrrc => "csrrc",
            Csrrwi => "csrrwi",
            Csrrsi => "csrrsi",
            Csrrci => "csrrci",
            Mul => "mul",
            Mulh => "mulh",
            Mulhsu => "mulhsu",
            Mulhu => "mulhu",
            Div => "div",
            Divu => "divu",
            Rem => "rem",
            Remu => "remu",
        }
    }
}

/// Canonical decoded instruction.
///
/// `imm` is fully sign-extended. For LUI/AUIPC it holds the already shifted
/// upper immediate. CSR instructions keep the CSR address in `csr`; the
/// immediate forms (`csrr?i`) carry their 5-bit zero-extended immediate in
/// `rs1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodedInstr {
    pub op: Op,
    pub rd: u8,
    pub rs1: u8,
    pub rs2: u8,
    pub imm: i32,
    pub csr: u16,
    pub compressed: bool,
}

impl DecodedInstr {
    pub fn new(op: Op) -> Self {
        DecodedInstr {
            op,
            rd: 0,
            rs1: 0,
            rs2: 0,
            imm: 0,
            csr: 0,
            compressed: false,
        }
    }

    pub fn class(&self) -> OpClass {
        self.op.class()
    }

    /// Size in bytes of the encoding this instruction was fetched from.
    pub fn size(&self) -> u32 {
        if self.compressed {
            2
        } else {
            4
        }
    }

    /// The same instruction viewed as its 32-bit form.
    pub fn expanded(&self) -> DecodedInstr {
        DecodedInstr {
            compressed: false,
            ..*self
        }
    }
}

fn fence_set(bits: i32) -> String {
    let mut s = String::new();
    for (mask, c) in [(8, 'i'), (4, 'o'), (2, 'r'), (1, 'w')] {
        if bits & mask != 0 {
            s.push(c);
        }
    }
    if s.is_empty() {
        s.push('0');
    }
    s
}

/// Assembler-style text, in the operand order GNU/LLVM assemblers accept.
impl fmt::Display for DecodedInstr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.op.mnemonic();
        let (rd, rs1, rs2, imm) = (self.rd, self.rs1, self.rs2, self.imm);
        match self.op.class() {
            _ if matches!(self.op, Op::Lui | Op::Auipc) => {
                write!(f, "{m} x{rd}, 0x{:x}", (imm as u32) >> 12)
            }
            OpClass::Alu | OpClass::Mul | OpClass::Div => {
                if matches!(
                    self.op,
                    Op::Addi | Op::Slti | Op::Sltiu | Op::Xori | Op::Ori | Op::Andi | Op::Slli | Op::Srli | Op::Srai
                ) {
                    write!(f, "{m} x{rd}, x{rs1}, {imm}")
                } else {
                    write!(f, "{m} x{rd}, x{rs1}, x{rs2}")
                }
            }
            OpClass::Load => write!(f, "{m} x{rd}, {imm}(x{rs1})"),
            OpClass::Store => write!(f, "{m} x{rs2}, {imm}(x{rs1})"),
            OpClass::Branch => write!(f, "{m} x{rs1}, x{rs2}, {imm}"),
            OpClass::Jal => write!(f, "{m} x{rd}, {imm}"),
            OpClass::Jalr => write!(f, "{m} x{rd}, {imm}(x{rs1})"),
            OpClass::Csr => {
                if matches!(self.op, Op::Csrrwi | Op::Csrrsi | Op::Csrrci) {
                    write!(f, "{m} x{rd}, 0x{:x}, {rs1}", self.csr)
                } else {
                    write!(f, "{m} x{rd}, 0x{:x}, x{rs1}", self.csr)
                }
            }
            OpClass::Fence => write!(f, "{m} {}, {}", fence_set((imm >> 4) & 0xF), fence_set(imm & 0xF)),
            OpClass::System => write!(f, "{m}"),
        }
    }
}

/// Decoder failure modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("illegal instruction 0x{0:08x}")]
    IllegalInstruction(u32),
    #[error("0x{0:04x} is the low half of a 32-bit encoding")]
    NotCompressed(u16),
}

/// Exception cause codes (machine mode).
pub mod cause {
    pub const MISALIGNED_FETCH: u32 = 0;
    pub const FETCH_ACCESS: u32 = 1;
    pub const ILLEGAL_INSTRUCTION: u32 = 2;
    pub const BREAKPOINT: u32 = 3;
    pub const MISALIGNED_LOAD: u32 = 4;
    pub const LOAD_ACCESS: u32 = 5;
    pub const MISALIGNED_STORE: u32 = 6;
    pub const STORE_ACCESS: u32 = 7;
    pub const ECALL_M: u32 = 11;
    pub const INTERRUPT: u32 = 0x8000_0000;
    pub const TIMER_INTERRUPT: u32 = INTERRUPT | 7;
    pub const EXTERNAL_INTERRUPT: u32 = INTERRUPT | 11;
}

/// A synchronous exception or interrupt about to be taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trap {
    pub cause: u32,
    pub tval: u32,
}

impl Trap {
    pub fn new(cause: u32, tval: u32) -> Self {
        Trap { cause, tval }
    }

    pub fn is_interrupt(&self) -> bool {
        self.cause & cause::INTERRUPT != 0
    }
}

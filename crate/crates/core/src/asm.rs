//! A small in-process assembler for building test and demo firmware.
//!
//! Instructions are encoded with [`encode`]; branch and jump targets may be
//! labels defined before or after use.

use std::collections::HashMap;

use thiserror::Error;

use crate::isa::{encode, DecodedInstr, Op};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmError {
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("label `{0}` defined twice")]
    DuplicateLabel(String),
    #[error("target of `{label}` is {offset} bytes away, out of range")]
    OutOfRange { label: String, offset: i64 },
}

#[derive(Debug, Clone)]
enum Fixup {
    Branch(DecodedInstr),
    Jal(DecodedInstr),
    /// `lui` + `addi` pair loading a label's address.
    La(u8),
}

#[derive(Debug, Clone)]
pub struct Asm {
    base: u32,
    code: Vec<u8>,
    labels: HashMap<String, u32>,
    fixups: Vec<(usize, String, Fixup)>,
    duplicate: Option<String>,
}

/// Split a 32-bit constant into `lui` upper and sign-compensated `addi` lower
/// parts.
pub fn hi_lo(value: u32) -> (u32, i32) {
    let lo = ((value & 0xFFF) as i32) << 20 >> 20;
    let hi = value.wrapping_sub(lo as u32) & 0xFFFF_F000;
    (hi, lo)
}

impl Asm {
    pub fn new(base: u32) -> Self {
        Asm {
            base,
            code: Vec::new(),
            labels: HashMap::new(),
            fixups: Vec::new(),
            duplicate: None,
        }
    }

    pub fn pc(&self) -> u32 {
        self.base + self.code.len() as u32
    }

    pub fn label(&mut self, name: &str) -> &mut Self {
        if self.labels.insert(name.to_string(), self.pc()).is_some() {
            self.duplicate.get_or_insert_with(|| name.to_string());
        }
        self
    }

    pub fn word(&mut self, w: u32) -> &mut Self {
        self.code.extend_from_slice(&w.to_le_bytes());
        self
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.code.extend_from_slice(b);
        self
    }

    /// A raw 16-bit parcel (compressed instruction).
    pub fn half(&mut self, h: u16) -> &mut Self {
        self.code.extend_from_slice(&h.to_le_bytes());
        self
    }

    pub fn align(&mut self, to: u32) -> &mut Self {
        while !self.pc().is_multiple_of(to) {
            self.code.push(0);
        }
        self
    }

    pub fn instr(&mut self, d: DecodedInstr) -> &mut Self {
        self.word(encode(&d))
    }

    pub fn r(&mut self, op: Op, rd: u8, rs1: u8, rs2: u8) -> &mut Self {
        let mut d = DecodedInstr::new(op);
        (d.rd, d.rs1, d.rs2) = (rd, rs1, rs2);
        self.instr(d)
    }

    /// Register-immediate ops, loads (`rd`, base `rs1`, offset) and `jalr`.
    pub fn i(&mut self, op: Op, rd: u8, rs1: u8, imm: i32) -> &mut Self {
        let mut d = DecodedInstr::new(op);
        (d.rd, d.rs1, d.imm) = (rd, rs1, imm);
        self.instr(d)
    }

    /// Stores: `op rs2, imm(rs1)`.
    pub fn s(&mut self, op: Op, rs2: u8, rs1: u8, imm: i32) -> &mut Self {
        let mut d = DecodedInstr::new(op);
        (d.rs1, d.rs2, d.imm) = (rs1, rs2, imm);
        self.instr(d)
    }

    pub fn lui(&mut self, rd: u8, upper: u32) -> &mut Self {
        self.i(Op::Lui, rd, 0, upper as i32)
    }

    /// `csrrw`/`csrrs`/`csrrc` with a register source (or the `i` forms with
    /// a 5-bit immediate in `rs1`).
    pub fn csr(&mut self, op: Op, rd: u8, csr: u16, rs1: u8) -> &mut Self {
        let mut d = DecodedInstr::new(op);
        (d.rd, d.rs1, d.csr) = (rd, rs1, csr);
        self.instr(d)
    }

    /// Load a 32-bit constant (always two instructions).
    pub fn li(&mut self, rd: u8, value: u32) -> &mut Self {
        let (hi, lo) = hi_lo(value);
        self.lui(rd, hi).i(Op::Addi, rd, rd, lo)
    }

    /// Load a label's address (always two instructions).
    pub fn la(&mut self, rd: u8, label: &str) -> &mut Self {
        let at = self.code.len();
        self.fixups.push((at, label.to_string(), Fixup::La(rd)));
        self.word(0).word(0)
    }

    pub fn branch(&mut self, op: Op, rs1: u8, rs2: u8, label: &str) -> &mut Self {
        let mut d = DecodedInstr::new(op);
        (d.rs1, d.rs2) = (rs1, rs2);
        let at = self.code.len();
        self.fixups.push((at, label.to_string(), Fixup::Branch(d)));
        self.word(0)
    }

    pub fn jal(&mut self, rd: u8, label: &str) -> &mut Self {
        let mut d = DecodedInstr::new(Op::Jal);
        d.rd = rd;
        let at = self.code.len();
        self.fixups.push((at, label.to_string(), Fixup::Jal(d)));
        self.word(0)
    }

    pub fn j(&mut self, label: &str) -> &mut Self {
        self.jal(0, label)
    }

    pub fn nop(&mut self) -> &mut Self {
        self.i(Op::Addi, 0, 0, 0)
    }

    pub fn op(&mut self, op: Op) -> &mut Self {
        self.instr(DecodedInstr::new(op))
    }

    pub fn address_of(&self, label: &str) -> Option<u32> {
        self.labels.get(label).copied()
    }

    /// Resolve labels and return the image bytes.
    pub fn finish(&self) -> Result<Vec<u8>, AsmError> {
        if let Some(l) = &self.duplicate {
            return Err(AsmError::DuplicateLabel(l.clone()));
        }
        let mut code = self.code.clone();
        for (at, label, fixup) in &self.fixups {
            let target = *self
                .labels
                .get(label)
                .ok_or_else(|| AsmError::UndefinedLabel(label.clone()))?;
            let pc = self.base + *at as u32;
            let offset = target as i64 - pc as i64;
            let range_err = || AsmError::OutOfRange {
                label: label.clone(),
                offset,
            };
            let put = |code: &mut Vec<u8>, at: usize, w: u32| code[at..at + 4].copy_from_slice(&w.to_le_bytes());
            match fixup {
                Fixup::Branch(d) => {
                    if !(-4096..4096).contains(&offset) {
                        return Err(range_err());
                    }
                    put(
                        &mut code,
                        *at,
                        encode(&DecodedInstr {
                            imm: offset as i32,
                            ..*d
                        }),
                    );
                }
                Fixup::Jal(d) => {
                    if !(-(1 << 20)..(1 << 20)).contains(&offset) {
                        return Err(range_err());
                    }
                    put(
                        &mut code,
                        *at,
                        encode(&DecodedInstr {
                            imm: offset as i32,
                            ..*d
                        }),
                    );
                }
                Fixup::La(rd) => {
                    let (hi, lo) = hi_lo(target);
                    let mut lui = DecodedInstr::new(Op::Lui);
                    (lui.rd, lui.imm) = (*rd, hi as i32);
                    let mut addi = DecodedInstr::new(Op::Addi);
                    (addi.rd, addi.rs1, addi.imm) = (*rd, *rd, lo);
                    put(&mut code, *at, encode(&lui));
                    put(&mut code, *at + 4, encode(&addi));
                }
            }
        }
        Ok(code)
    }
}

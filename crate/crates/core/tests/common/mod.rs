//! Helpers shared by the integration test binaries.

#![allow(dead_code)]

use croc_core::asm::Asm;
use croc_core::functional::{FlatMemory, FunctionalMachine};
use croc_core::isa::{csr_addr, decode_compressed, DecodedInstr, HaltReason, Op, OpClass};
use croc_core::loader::{load, FirmwareImage};
use croc_core::soc::{Soc, SocConfig, StopReason};
use rand::Rng;

pub const CODE_BASE: u32 = 0x1000_0000;
/// Scratch data lives in the second bank so stores never touch code.
pub const DATA_BASE: u32 = 0x1001_0000;
pub const DATA_SIZE: u32 = 0x1000;
/// Holds `DATA_BASE` for the whole program.
const BASE_REG: u8 = 31;
/// Scratch register for computed jump targets.
const JUMP_REG: u8 = 30;

const R_OPS: &[Op] = &[
    Op::Add,
    Op::Sub,
    Op::Sll,
    Op::Slt,
    Op::Sltu,
    Op::Xor,
    Op::Srl,
    Op::Sra,
    Op::Or,
    Op::And,
    Op::Mul,
    Op::Mulh,
    Op::Mulhsu,
    Op::Mulhu,
    Op::Div,
    Op::Divu,
    Op::Rem,
    Op::Remu,
];
const I_OPS: &[Op] = &[Op::Addi, Op::Slti, Op::Sltiu, Op::Xori, Op::Ori, Op::Andi];
const SHIFT_OPS: &[Op] = &[Op::Slli, Op::Srli, Op::Srai];
const LOADS: &[Op] = &[Op::Lb, Op::Lh, Op::Lw, Op::Lbu, Op::Lhu];
const STORES: &[Op] = &[Op::Sb, Op::Sh, Op::Sw];
const BRANCHES: &[Op] = &[Op::Beq, Op::Bne, Op::Blt, Op::Bge, Op::Bltu, Op::Bgeu];
/// CSRs whose value does not depend on timing.
const CSRS: &[u16] = &[
    csr_addr::MSCRATCH,
    csr_addr::MISA,
    csr_addr::MHARTID,
    csr_addr::MSTATUS,
    csr_addr::MINSTRET,
    csr_addr::INSTRET,
];

fn pick<T: Copy>(rng: &mut impl Rng, items: &[T]) -> T {
    items[rng.gen_range(0..items.len())]
}

fn dest(rng: &mut impl Rng) -> u8 {
    rng.gen_range(1..JUMP_REG)
}

fn src(rng: &mut impl Rng) -> u8 {
    rng.gen_range(0..32)
}

/// A random 16-bit encoding that decodes to a register-only ALU operation
/// leaving the reserved registers alone.
fn compressed_alu(rng: &mut impl Rng) -> u16 {
    loop {
        let h: u16 = rng.gen();
        if h & 3 == 3 {
            continue;
        }
        if let Ok(d) = decode_compressed(h) {
            if d.class() == OpClass::Alu && d.rd < JUMP_REG && d.rd != 0 {
                return h;
            }
        }
    }
}

/// A program of `len` random instructions that never traps and always
/// reaches the final `ebreak`: control flow only moves forward, memory
/// accesses stay inside the data window and timing-dependent CSRs are never
/// read.
pub fn random_program(rng: &mut impl Rng, len: usize) -> Vec<u8> {
    let mut a = Asm::new(CODE_BASE);
    a.li(BASE_REG, DATA_BASE);
    let label = |i: usize| format!("i{i}");
    for i in 0..len {
        a.label(&label(i));
        match rng.gen_range(0..100) {
            0..=24 => {
                a.r(pick(rng, R_OPS), dest(rng), src(rng), src(rng));
            }
            25..=39 => {
                a.i(pick(rng, I_OPS), dest(rng), src(rng), rng.gen_range(-2048..2048));
            }
            40..=44 => {
                a.i(pick(rng, SHIFT_OPS), dest(rng), src(rng), rng.gen_range(0..32));
            }
            45..=47 => {
                let upper = rng.gen::<u32>() & 0xFFFF_F000;
                let op = if rng.gen() { Op::Lui } else { Op::Auipc };
                a.i(op, dest(rng), 0, upper as i32);
            }
            48..=57 => {
                a.i(
                    pick(rng, LOADS),
                    dest(rng),
                    BASE_REG,
                    rng.gen_range(0..(DATA_SIZE - 4) as i32),
                );
            }
            58..=67 => {
                a.s(
                    pick(rng, STORES),
                    src(rng),
                    BASE_REG,
                    rng.gen_range(0..(DATA_SIZE - 4) as i32),
                );
            }
            68..=77 => {
                let target = label(i + 1 + rng.gen_range(0..8).min(len - i - 1));
                a.branch(pick(rng, BRANCHES), src(rng), src(rng), &target);
            }
            78..=80 => {
                let target = label(i + 1 + rng.gen_range(0..8).min(len - i - 1));
                a.jal(dest(rng), &target);
            }
            81..=82 => {
                let target = label(i + 1 + rng.gen_range(0..8).min(len - i - 1));
                a.la(JUMP_REG, &target).i(Op::Jalr, dest(rng), JUMP_REG, 0);
            }
            83..=86 => {
                let csr = pick(rng, CSRS);
                // only mscratch is written; the rest are read
                let (op, rs1) = if csr == csr_addr::MSCRATCH {
                    (pick(rng, &[Op::Csrrw, Op::Csrrs, Op::Csrrc, Op::Csrrwi]), src(rng))
                } else {
                    (Op::Csrrs, 0)
                };
                a.csr(op, dest(rng), csr, rs1);
            }
            87 => {
                let mut d = DecodedInstr::new(Op::Fence);
                d.imm = 0xFF;
                a.instr(d);
            }
            _ => {
                a.half(compressed_alu(rng));
            }
        }
    }
    a.label(&label(len)).op(Op::Ebreak);
    a.finish().expect("generated program assembles")
}

#[derive(Debug)]
pub struct Differential {
    pub retired: u64,
}

/// Run `code` on the timed platform and on the functional model, comparing
/// the retirement stream and the final architectural state.
pub fn differential(code: &[u8], max_cycles: u64) -> Result<Differential, String> {
    let config = SocConfig::mlem();
    let mut soc = Soc::build(config).unwrap();
    load(&mut soc, &FirmwareImage::from_raw(code, CODE_BASE), None).map_err(|e| e.to_string())?;

    let mut mem = FlatMemory::new();
    mem.add_region(CODE_BASE, 0x1_0000);
    mem.add_region(DATA_BASE, 0x1_0000);
    mem.write_bytes(CODE_BASE, code).unwrap();
    let mut fm = FunctionalMachine::new(CODE_BASE, true, mem);

    let mut timed = Vec::new();
    let r = soc.run_with(
        max_cycles,
        &mut |rep| {
            if let Some(ret) = rep.retired() {
                timed.push((rep.pc, ret.rd_write));
            }
        },
        &mut || false,
    );
    if r.stop != StopReason::Halt {
        return Err(format!("timed run stopped with {:?} at 0x{:08x}", r.stop, r.pc));
    }

    let mut i = 0usize;
    while fm.state.halted.is_none() {
        let pc = fm.state.pc;
        match fm.step() {
            Some(Ok(ret)) if ret.retired() => {
                let t = timed.get(i).ok_or("functional model retired more instructions")?;
                if *t != (pc, ret.rd_write) {
                    return Err(format!(
                        "retirement {i}: timed {t:x?}, functional {:x?}",
                        (pc, ret.rd_write)
                    ));
                }
                i += 1;
            }
            Some(Ok(_)) => {}
            Some(Err(trap)) => return Err(format!("functional fetch trap {trap:?}")),
            None => break,
        }
    }
    if !matches!(fm.state.halted, Some(HaltReason::Ebreak { .. })) {
        return Err(format!("functional model halted with {:?}", fm.state.halted));
    }
    if i != timed.len() {
        return Err(format!("retired {} timed vs {i} functional", timed.len()));
    }
    let ts = &soc.cpu.state;
    let fs = &fm.state;
    if ts.regs() != fs.regs() || ts.pc != fs.pc {
        return Err("final register files differ".into());
    }
    if ts.csr.minstret != fs.csr.minstret || ts.csr.mscratch != fs.csr.mscratch || ts.csr.mcause != fs.csr.mcause {
        return Err("final CSRs differ".into());
    }
    let tdata = soc.read_mem(DATA_BASE, DATA_SIZE as usize).unwrap();
    let fdata = fm.mem.read_bytes(DATA_BASE, DATA_SIZE as usize).unwrap();
    if tdata != fdata {
        return Err("data memory differs".into());
    }
    Ok(Differential { retired: i as u64 })
}

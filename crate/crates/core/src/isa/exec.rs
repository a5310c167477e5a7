use super::csr::{self, csr_op, CsrOp};
use super::state::{ArchState, HaltReason, MIP_MEIP, MIP_MTIP, MSTATUS_MIE, MSTATUS_MPIE, MSTATUS_MPP};
use super::{cause, DecodedInstr, Op, Trap, Width};

/// Load/store access used by the execution semantics.
///
/// Implementations may be handed misaligned addresses; splitting them into
/// bus transactions (or not) is up to the port.
pub trait DataPort {
    /// Returns the zero-extended value read.
    fn load(&mut self, addr: u32, width: Width) -> Result<u32, AccessFault>;
    fn store(&mut self, addr: u32, width: Width, value: u32) -> Result<(), AccessFault>;
}

/// A data access that got an error response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessFault;

/// Memory side effect of a retired load or store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemEffect {
    pub addr: u32,
    pub width: Width,
    pub store: bool,
    pub value: u32,
}

/// Everything one instruction did to the architectural state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Retirement {
    pub pc: u32,
    pub instr: DecodedInstr,
    pub next_pc: u32,
    /// Destination register and the value it holds afterwards (x0 reads 0).
    pub rd_write: Option<(u8, u32)>,
    pub mem: Option<MemEffect>,
    pub trap: Option<Trap>,
    pub branch_taken: bool,
    /// The instruction itself wrote mcycle/mcycleh; the per-step cycle
    /// increment is suppressed for it.
    pub wrote_mcycle: bool,
}

impl Retirement {
    pub fn retired(&self) -> bool {
        self.trap.is_none()
    }
}

fn sext(value: u32, width: Width) -> u32 {
    match width {
        Width::Byte => value as u8 as i8 as i32 as u32,
        Width::Half => value as u16 as i16 as i32 as u32,
        Width::Word => value,
    }
}

fn alu(op: Op, a: u32, b: u32) -> u32 {
    use Op::*;
    let shamt = b & 0x1F;
    match op {
        Add | Addi => a.wrapping_add(b),
        Sub => a.wrapping_sub(b),
        Sll | Slli => a << shamt,
        Slt | Slti => ((a as i32) < (b as i32)) as u32,
        Sltu | Sltiu => (a < b) as u32,
        Xor | Xori => a ^ b,
        Srl | Srli => a >> shamt,
        Sra | Srai => ((a as i32) >> shamt) as u32,
        Or | Ori => a | b,
        And | Andi => a & b,
        Mul => a.wrapping_mul(b),
        Mulh => (((a as i32 as i64) * (b as i32 as i64)) >> 32) as u32,
        Mulhsu => (((a as i32 as i64) * (b as u64 as i64)) >> 32) as u32,
        Mulhu => (((a as u64) * (b as u64)) >> 32) as u32,
        Div => {
            if b == 0 {
                u32::MAX
            } else if a == 0x8000_0000 && b == u32::MAX {
                a
            } else {
                ((a as i32) / (b as i32)) as u32
            }
        }
        Divu => a.checked_div(b).unwrap_or(u32::MAX),
        Rem => {
            if b == 0 {
                a
            } else if a == 0x8000_0000 && b == u32::MAX {
                0
            } else {
                ((a as i32) % (b as i32)) as u32
            }
        }
        Remu => a.checked_rem(b).unwrap_or(a),
        _ => unreachable!("{op:?} is not an ALU operation"),
    }
}

fn branch_taken(op: Op, a: u32, b: u32) -> bool {
    match op {
        Op::Beq => a == b,
        Op::Bne => a != b,
        Op::Blt => (a as i32) < (b as i32),
        Op::Bge => (a as i32) >= (b as i32),
        Op::Bltu => a < b,
        Op::Bgeu => a >= b,
        _ => unreachable!(),
    }
}

/// Enter a trap: mepc/mcause/mtval, MIE→MPIE, jump to the mtvec base.
///
/// With `mtvec == 0` no handler exists. The trap CSRs are still written for
/// post-mortem inspection, but the core halts instead of jumping: `ebreak`
/// becomes an orderly stop and anything else a double fault.
pub fn raise_trap(state: &mut ArchState, trap: Trap) {
    let pc = state.pc;
    state.csr.mepc = pc;
    state.csr.mcause = trap.cause;
    state.csr.mtval = trap.tval;
    let mie = state.csr.mstatus & MSTATUS_MIE != 0;
    state.csr.mstatus = MSTATUS_MPP | if mie { MSTATUS_MPIE } else { 0 };
    state.waiting = false;
    if state.csr.mtvec == 0 {
        state.halted = Some(if trap.cause == cause::BREAKPOINT {
            HaltReason::Ebreak { pc }
        } else {
            HaltReason::DoubleFault {
                cause: trap.cause,
                tval: trap.tval,
                pc,
            }
        });
    } else {
        state.pc = state.csr.mtvec & !0b11;
    }
}

/// The interrupt to take before the next instruction, if any.
///
/// Also ends a `wfi` wait whenever an enabled interrupt is pending, even with
/// global interrupts disabled.
pub fn take_pending_interrupt(state: &mut ArchState) -> Option<Trap> {
    let pending = state.csr.mip & state.csr.mie;
    if pending != 0 {
        state.waiting = false;
    }
    if state.csr.mstatus & MSTATUS_MIE == 0 {
        return None;
    }
    if pending & MIP_MEIP != 0 {
        Some(Trap::new(cause::EXTERNAL_INTERRUPT, 0))
    } else if pending & MIP_MTIP != 0 {
        Some(Trap::new(cause::TIMER_INTERRUPT, 0))
    } else {
        None
    }
}

/// Untimed architectural semantics of one instruction at `state.pc`.
///
/// Updates registers, CSRs, pc and minstret, and performs memory accesses
/// through `port`. Exceptions are entered via [`raise_trap`] and reported in
/// the returned record; a trapping instruction does not retire.
pub fn execute(state: &mut ArchState, instr: &DecodedInstr, port: &mut dyn DataPort) -> Retirement {
    let pc = state.pc;
    let fallthrough = pc.wrapping_add(instr.size());
    let mut r = Retirement {
        pc,
        instr: *instr,
        next_pc: fallthrough,
        rd_write: None,
        mem: None,
        trap: None,
        branch_taken: false,
        wrote_mcycle: false,
    };
    let a = state.reg(instr.rs1);
    let b = state.reg(instr.rs2);
    let imm = instr.imm as u32;
    let misaligned = |target: u32| target & (state.ialign() - 1) != 0;
    let mut rd_value: Option<u32> = None;
    let mut trap: Option<Trap> = None;
    let mut wrote_minstret = false;

    match instr.op {
        Op::Lui => rd_value = Some(imm),
        Op::Auipc => rd_value = Some(pc.wrapping_add(imm)),
        Op::Jal | Op::Jalr => {
            let target = if instr.op == Op::Jal {
                pc.wrapping_add(imm)
            } else {
                a.wrapping_add(imm) & !1
            };
            if misaligned(target) {
                trap = Some(Trap::new(cause::MISALIGNED_FETCH, target));
            } else {
                rd_value = Some(fallthrough);
                r.next_pc = target;
                r.branch_taken = true;
            }
        }
        Op::Beq | Op::Bne | Op::Blt | Op::Bge | Op::Bltu | Op::Bgeu => {
            if branch_taken(instr.op, a, b) {
                let target = pc.wrapping_add(imm);
                if misaligned(target) {
                    trap = Some(Trap::new(cause::MISALIGNED_FETCH, target));
                } else {
                    r.next_pc = target;
                    r.branch_taken = true;
                }
            }
        }
        Op::Lb | Op::Lh | Op::Lw | Op::Lbu | Op::Lhu => {
            let (width, signed) = instr.op.mem_access().unwrap();
            let addr = a.wrapping_add(imm);
            match port.load(addr, width) {
                Ok(raw) => {
                    let value = if signed { sext(raw, width) } else { raw };
                    rd_value = Some(value);
                    r.mem = Some(MemEffect {
                        addr,
                        width,
                        store: false,
                        value,
                    });
                }
                Err(AccessFault) => trap = Some(Trap::new(cause::LOAD_ACCESS, addr)),
            }
        }
        Op::Sb | Op::Sh | Op::Sw => {
            let (width, _) = instr.op.mem_access().unwrap();
            let addr = a.wrapping_add(imm);
            let value = match width {
                Width::Byte => b & 0xFF,
                Width::Half => b & 0xFFFF,
                Width::Word => b,
            };
            match port.store(addr, width, value) {
                Ok(()) => {
                    r.mem = Some(MemEffect {
                        addr,
                        width,
                        store: true,
                        value,
                    })
                }
                Err(AccessFault) => trap = Some(Trap::new(cause::STORE_ACCESS, addr)),
            }
        }
        Op::Addi | Op::Slti | Op::Sltiu | Op::Xori | Op::Ori | Op::Andi | Op::Slli | Op::Srli | Op::Srai => {
            rd_value = Some(alu(instr.op, a, imm))
        }
        Op::Add
        | Op::Sub
        | Op::Sll
        | Op::Slt
        | Op::Sltu
        | Op::Xor
        | Op::Srl
        | Op::Sra
        | Op::Or
        | Op::And
        | Op::Mul
        | Op::Mulh
        | Op::Mulhsu
        | Op::Mulhu
        | Op::Div
        | Op::Divu
        | Op::Rem
        | Op::Remu => rd_value = Some(alu(instr.op, a, b)),
        Op::Fence => {}
        Op::Ecall => trap = Some(Trap::new(cause::ECALL_M, 0)),
        Op::Ebreak => trap = Some(Trap::new(cause::BREAKPOINT, pc)),
        Op::Mret => {
            let mpie = state.csr.mstatus & MSTATUS_MPIE != 0;
            state.csr.mstatus = MSTATUS_MPP | MSTATUS_MPIE | if mpie { MSTATUS_MIE } else { 0 };
            r.next_pc = state.csr.mepc;
            r.branch_taken = true;
        }
        Op::Wfi => {
            state.waiting = state.csr.mip & state.csr.mie == 0;
        }
        Op::Csrrw | Op::Csrrs | Op::Csrrc | Op::Csrrwi | Op::Csrrsi | Op::Csrrci => {
            let (op, src) = match instr.op {
                Op::Csrrw => (CsrOp::Rw, Some(a)),
                Op::Csrrs => (CsrOp::Rs, (instr.rs1 != 0).then_some(a)),
                Op::Csrrc => (CsrOp::Rc, (instr.rs1 != 0).then_some(a)),
                Op::Csrrwi => (CsrOp::Rw, Some(instr.rs1 as u32)),
                Op::Csrrsi => (CsrOp::Rs, (instr.rs1 != 0).then_some(instr.rs1 as u32)),
                _ => (CsrOp::Rc, (instr.rs1 != 0).then_some(instr.rs1 as u32)),
            };
            match csr_op(state, instr.csr, op, src) {
                Ok(old) => {
                    rd_value = Some(old);
                    if op == CsrOp::Rw || src.is_some() {
                        r.wrote_mcycle = matches!(instr.csr, csr::MCYCLE | csr::MCYCLEH);
                        wrote_minstret = matches!(instr.csr, csr::MINSTRET | csr::MINSTRETH);
                    }
                }
                Err(_) => trap = Some(Trap::new(cause::ILLEGAL_INSTRUCTION, 0)),
            }
        }
    }

    if let Some(t) = trap {
        r.trap = Some(t);
        r.next_pc = pc;
        r.branch_taken = false;
        raise_trap(state, t);
        return r;
    }
    if let Some(v) = rd_value {
        state.set_reg(instr.rd, v);
        r.rd_write = Some((instr.rd, state.reg(instr.rd)));
    }
    state.pc = r.next_pc;
    if !wrote_minstret {
        state.csr.minstret = state.csr.minstret.wrapping_add(1);
    }
    r
}

use std::fmt;

/// Machine-mode CSR state.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CsrFile {
    pub mstatus: u32,
    pub mtvec: u32,
    pub mepc: u32,
    pub mcause: u32,
    pub mtval: u32,
    pub mie: u32,
    pub mip: u32,
    pub mscratch: u32,
    pub mcycle: u64,
    pub minstret: u64,
}

pub const MSTATUS_MIE: u32 = 1 << 3;
pub const MSTATUS_MPIE: u32 = 1 << 7;
/// MPP is hardwired to machine mode.
pub const MSTATUS_MPP: u32 = 0b11 << 11;
pub const MIP_MTIP: u32 = 1 << 7;
pub const MIP_MEIP: u32 = 1 << 11;

/// Interrupt request levels seen by the core between instructions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InterruptLines {
    pub timer: bool,
    pub external: bool,
}

impl InterruptLines {
    pub fn mip_bits(self) -> u32 {
        (if self.timer { MIP_MTIP } else { 0 }) | (if self.external { MIP_MEIP } else { 0 })
    }
}

/// Why a core stopped executing on its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaltReason {
    /// `ebreak` executed with no trap handler installed.
    Ebreak { pc: u32 },
    /// A trap was raised while `mtvec` is zero.
    DoubleFault { cause: u32, tval: u32, pc: u32 },
}

impl fmt::Display for HaltReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HaltReason::Ebreak { pc } => write!(f, "ebreak at 0x{pc:08x}"),
            HaltReason::DoubleFault { cause, tval, pc } => write!(
                f,
                "double fault: cause 0x{cause:x} tval 0x{tval:08x} at pc 0x{pc:08x} with mtvec = 0"
            ),
        }
    }
}

/// Architectural hart state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchState {
    pub pc: u32,
    regs: [u32; 32],
    pub csr: CsrFile,
    pub halted: Option<HaltReason>,
    /// Set by `wfi`; cleared once an enabled interrupt is pending.
    pub waiting: bool,
    pub interrupt_lines: InterruptLines,
    /// Shadow of the platform timer, read through the `time` CSR.
    pub mtime: u64,
    pub c_enabled: bool,
}

impl ArchState {
    pub fn new(reset_pc: u32, c_enabled: bool) -> Self {
        let mut s = ArchState {
            pc: reset_pc,
            regs: [0; 32],
            csr: CsrFile::default(),
            halted: None,
            waiting: false,
            interrupt_lines: InterruptLines::default(),
            mtime: 0,
            c_enabled,
        };
        s.csr.mstatus = MSTATUS_MPP;
        s
    }

    #[inline]
    pub fn reg(&self, idx: u8) -> u32 {
        self.regs[idx as usize]
    }

    /// Writes to x0 are discarded.
    #[inline]
    pub fn set_reg(&mut self, idx: u8, value: u32) {
        if idx != 0 {
            self.regs[idx as usize] = value;
        }
    }

    pub fn regs(&self) -> &[u32; 32] {
        &self.regs
    }

    /// Instruction alignment in bytes.
    pub fn ialign(&self) -> u32 {
        if self.c_enabled {
            2
        } else {
            4
        }
    }

    /// Refresh `mip` from the sampled interrupt lines.
    pub fn sample_interrupts(&mut self, lines: InterruptLines) {
        self.interrupt_lines = lines;
        self.csr.mip = (self.csr.mip & !(MIP_MTIP | MIP_MEIP)) | lines.mip_bits();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x0_writes_are_discarded() {
        let mut s = ArchState::new(0x1000_0000, true);
        s.set_reg(0, 0xdead_beef);
        s.set_reg(1, 7);
        assert_eq!(s.reg(0), 0);
        assert_eq!(s.reg(1), 7);
    }
}

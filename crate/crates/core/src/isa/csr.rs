use super::state::{ArchState, MIP_MEIP, MIP_MTIP, MSTATUS_MIE, MSTATUS_MPIE, MSTATUS_MPP};

pub const MSTATUS: u16 = 0x300;
pub const MISA: u16 = 0x301;
pub const MIE: u16 = 0x304;
pub const MTVEC: u16 = 0x305;
pub const MSCRATCH: u16 = 0x340;
pub const MEPC: u16 = 0x341;
pub const MCAUSE: u16 = 0x342;
pub const MTVAL: u16 = 0x343;
pub const MIP: u16 = 0x344;
pub const MCYCLE: u16 = 0xB00;
pub const MINSTRET: u16 = 0xB02;
pub const MCYCLEH: u16 = 0xB80;
pub const MINSTRETH: u16 = 0xB82;
pub const CYCLE: u16 = 0xC00;
pub const TIME: u16 = 0xC01;
pub const INSTRET: u16 = 0xC02;
pub const CYCLEH: u16 = 0xC80;
pub const TIMEH: u16 = 0xC81;
pub const INSTRETH: u16 = 0xC82;
pub const MVENDORID: u16 = 0xF11;
pub const MARCHID: u16 = 0xF12;
pub const MIMPID: u16 = 0xF13;
pub const MHARTID: u16 = 0xF14;

/// Read-modify-write flavour of a Zicsr instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsrOp {
    /// Swap.
    Rw,
    /// Set bits.
    Rs,
    /// Clear bits.
    Rc,
}

/// Unimplemented CSR or a write to a read-only one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IllegalCsr;

fn read(state: &ArchState, addr: u16) -> Result<u32, IllegalCsr> {
    let c = &state.csr;
    Ok(match addr {
        MSTATUS => c.mstatus,
        MISA => {
            let ext = (1 << 8) | (1 << 12) | if state.c_enabled { 1 << 2 } else { 0 };
            (1 << 30) | ext
        }
        MIE => c.mie,
        MTVEC => c.mtvec,
        MSCRATCH => c.mscratch,
        MEPC => c.mepc,
        MCAUSE => c.mcause,
        MTVAL => c.mtval,
        MIP => c.mip,
        MCYCLE | CYCLE => c.mcycle as u32,
        MCYCLEH | CYCLEH => (c.mcycle >> 32) as u32,
        MINSTRET | INSTRET => c.minstret as u32,
        MINSTRETH | INSTRETH => (c.minstret >> 32) as u32,
        TIME => state.mtime as u32,
        TIMEH => (state.mtime >> 32) as u32,
        MVENDORID | MARCHID | MIMPID | MHARTID => 0,
        _ => return Err(IllegalCsr),
    })
}

fn write(state: &mut ArchState, addr: u16, value: u32) {
    let ialign_mask = !(state.ialign() - 1);
    let c = &mut state.csr;
    match addr {
        MSTATUS => c.mstatus = (value & (MSTATUS_MIE | MSTATUS_MPIE)) | MSTATUS_MPP,
        MIE => c.mie = value & (MIP_MTIP | MIP_MEIP),
        MTVEC => c.mtvec = value & !0b11,
        MSCRATCH => c.mscratch = value,
        MEPC => c.mepc = value & ialign_mask,
        MCAUSE => c.mcause = value,
        MTVAL => c.mtval = value,
        MCYCLE => c.mcycle = (c.mcycle & !0xFFFF_FFFF) | value as u64,
        MCYCLEH => c.mcycle = (c.mcycle & 0xFFFF_FFFF) | ((value as u64) << 32),
        MINSTRET => c.minstret = (c.minstret & !0xFFFF_FFFF) | value as u64,
        MINSTRETH => c.minstret = (c.minstret & 0xFFFF_FFFF) | ((value as u64) << 32),
        // misa and mip are WARL with no writable bits here
        _ => {}
    }
}

/// Perform a Zicsr access.
///
/// `value` is `None` when the instruction's source is `x0` (or a zero
/// immediate) for the set/clear forms, which makes the access a pure read.
/// Returns the value read before the update.
pub fn csr_op(state: &mut ArchState, addr: u16, op: CsrOp, value: Option<u32>) -> Result<u32, IllegalCsr> {
    let old = read(state, addr)?;
    let writes = op == CsrOp::Rw || value.is_some();
    if writes {
        if addr >> 10 == 0b11 {
            return Err(IllegalCsr);
        }
        let v = value.unwrap_or(0);
        let new = match op {
            CsrOp::Rw => v,
            CsrOp::Rs => old | v,
            CsrOp::Rc => old & !v,
        };
        write(state, addr, new);
    }
    Ok(old)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> ArchState {
        ArchState::new(0x1000_0000, true)
    }

    #[test]
    fn mcycle_reads_live_counter() {
        let mut s = state();
        s.csr.mcycle = 100;
        assert_eq!(csr_op(&mut s, MCYCLE, CsrOp::Rs, None), Ok(100));
        assert_eq!(csr_op(&mut s, CYCLE, CsrOp::Rs, None), Ok(100));
    }

    #[test]
    fn set_with_x0_source_is_a_pure_read() {
        let mut s = state();
        s.csr.mscratch = 0x55;
        assert_eq!(csr_op(&mut s, MSCRATCH, CsrOp::Rs, None), Ok(0x55));
        assert_eq!(s.csr.mscratch, 0x55);
        // reading a read-only CSR this way is fine
        assert!(csr_op(&mut s, MHARTID, CsrOp::Rs, None).is_ok());
    }

    #[test]
    fn writing_read_only_shadow_is_illegal() {
        let mut s = state();
        assert_eq!(csr_op(&mut s, CYCLE, CsrOp::Rw, Some(1)), Err(IllegalCsr));
        // even a set with zero value counts as a write when the source is not x0
        assert_eq!(csr_op(&mut s, CYCLE, CsrOp::Rs, Some(0)), Err(IllegalCsr));
    }

    #[test]
    fn unimplemented_csr_is_illegal() {
        let mut s = state();
        assert_eq!(csr_op(&mut s, 0x7C0, CsrOp::Rs, None), Err(IllegalCsr));
    }

    #[test]
    fn mtvec_is_forced_to_direct_mode() {
        let mut s = state();
        csr_op(&mut s, MTVEC, CsrOp::Rw, Some(0x1000_0103)).unwrap();
        assert_eq!(s.csr.mtvec, 0x1000_0100);
    }

    #[test]
    fn mstatus_keeps_mpp_machine() {
        let mut s = state();
        csr_op(&mut s, MSTATUS, CsrOp::Rw, Some(0)).unwrap();
        assert_eq!(s.csr.mstatus, MSTATUS_MPP);
        csr_op(&mut s, MSTATUS, CsrOp::Rs, Some(MSTATUS_MIE)).unwrap();
        assert_eq!(s.csr.mstatus & MSTATUS_MIE, MSTATUS_MIE);
    }
}

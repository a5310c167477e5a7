//! Untimed reference machine: same instruction semantics, plain byte arrays
//! instead of the bus, no devices and no cycle accounting.

use crate::cpu::fetch_decode;
use crate::isa::{execute, raise_trap, AccessFault, ArchState, DataPort, Retirement, Trap, Width};

/// Byte-addressed memory made of disjoint regions.
#[derive(Debug, Clone, Default)]
pub struct FlatMemory {
    regions: Vec<(u32, Vec<u8>)>,
}

impl FlatMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_region(&mut self, base: u32, size: u32) {
        self.regions.push((base, vec![0; size as usize]));
    }

    fn byte_mut(&mut self, addr: u32) -> Option<&mut u8> {
        self.regions.iter_mut().find_map(|(base, data)| {
            let off = addr.wrapping_sub(*base) as usize;
            (addr >= *base && off < data.len()).then(move || &mut data[off])
        })
    }

    pub fn read_u8(&self, addr: u32) -> Option<u8> {
        self.regions.iter().find_map(|(base, data)| {
            let off = addr.wrapping_sub(*base) as usize;
            (addr >= *base && off < data.len()).then(|| data[off])
        })
    }

    pub fn write_u8(&mut self, addr: u32, value: u8) -> Option<()> {
        *self.byte_mut(addr)? = value;
        Some(())
    }

    pub fn write_bytes(&mut self, addr: u32, bytes: &[u8]) -> Option<()> {
        for (i, &b) in bytes.iter().enumerate() {
            self.write_u8(addr.wrapping_add(i as u32), b)?;
        }
        Some(())
    }

    pub fn read_bytes(&self, addr: u32, len: usize) -> Option<Vec<u8>> {
        (0..len).map(|i| self.read_u8(addr.wrapping_add(i as u32))).collect()
    }

    fn read_word(&self, addr: u32) -> Result<u32, AccessFault> {
        let b = self.read_bytes(addr, 4).ok_or(AccessFault)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

impl DataPort for FlatMemory {
    fn load(&mut self, addr: u32, width: Width) -> Result<u32, AccessFault> {
        let mut v = 0u32;
        for i in 0..width.bytes() {
            v |= (self.read_u8(addr.wrapping_add(i)).ok_or(AccessFault)? as u32) << (8 * i);
        }
        Ok(v)
    }

    fn store(&mut self, addr: u32, width: Width, value: u32) -> Result<(), AccessFault> {
        for i in 0..width.bytes() {
            self.write_u8(addr.wrapping_add(i), (value >> (8 * i)) as u8)
                .ok_or(AccessFault)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FunctionalMachine {
    pub state: ArchState,
    pub mem: FlatMemory,
}

impl FunctionalMachine {
    pub fn new(reset_pc: u32, c_enabled: bool, mem: FlatMemory) -> Self {
        FunctionalMachine {
            state: ArchState::new(reset_pc, c_enabled),
            mem,
        }
    }

    /// Execute one instruction. Returns `Err` with the trap when the fetch
    /// itself failed; `None` once the machine has halted.
    pub fn step(&mut self) -> Option<Result<Retirement, Trap>> {
        if self.state.halted.is_some() {
            return None;
        }
        let mem = &self.mem;
        match fetch_decode(&self.state, |addr| mem.read_word(addr)) {
            Ok(f) => Some(Ok(execute(&mut self.state, &f.instr, &mut self.mem))),
            Err(trap) => {
                raise_trap(&mut self.state, trap);
                Some(Err(trap))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_a_small_program() {
        let mut mem = FlatMemory::new();
        mem.add_region(0x1000_0000, 64);
        // addi x1, x0, 5 ; c.addi x1, 1
        mem.write_bytes(0x1000_0000, &0x0050_0093u32.to_le_bytes()).unwrap();
        mem.write_bytes(0x1000_0004, &0x0085u16.to_le_bytes()).unwrap();
        let mut m = FunctionalMachine::new(0x1000_0000, true, mem);
        m.step().unwrap().unwrap();
        m.step().unwrap().unwrap();
        assert_eq!(m.state.reg(1), 6);
        assert_eq!(m.state.pc, 0x1000_0006);
        assert_eq!(m.state.csr.minstret, 2);
    }

    #[test]
    fn misaligned_word_load_crosses_regions_bytewise() {
        let mut mem = FlatMemory::new();
        mem.add_region(0, 8);
        mem.write_bytes(0, &[1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        assert_eq!(mem.load(3, Width::Word), Ok(0x0706_0504));
        assert_eq!(mem.load(6, Width::Word), Err(AccessFault));
    }
}

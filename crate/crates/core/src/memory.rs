//! Tightly-coupled SRAM banks and backdoor image access.

use thiserror::Error;

use crate::obi::{BusError, BusRequest, DeviceCtx, Fabric, Subordinate};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemoryError {
    #[error("address 0x{addr:08x} is not backed by SRAM")]
    Range { addr: u32 },
    #[error("bank size {0} must be a non-zero multiple of 4")]
    BadSize(u32),
}

/// One zero-wait SRAM bank.
#[derive(Debug, Clone)]
pub struct SramBank {
    name: String,
    base: u32,
    data: Vec<u8>,
}

impl SramBank {
    pub fn new(name: impl Into<String>, base: u32, size: u32) -> Result<Self, MemoryError> {
        if size == 0 || !size.is_multiple_of(4) {
            return Err(MemoryError::BadSize(size));
        }
        Ok(SramBank {
            name: name.into(),
            base,
            data: vec![0; size as usize],
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn size(&self) -> u32 {
        self.data.len() as u32
    }

    pub fn contains(&self, addr: u32) -> bool {
        addr >= self.base && ((addr - self.base) as usize) < self.data.len()
    }

    pub fn bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn bytes_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    /// Serve a word access at absolute address `req.addr` (word aligned).
    /// Writes merge only the byte lanes enabled in `be`.
    pub fn sram_access(&mut self, req: &BusRequest) -> Result<u32, BusError> {
        if !self.contains(req.addr) || !req.addr.is_multiple_of(4) {
            return Err(BusError);
        }
        let off = (req.addr - self.base) as usize;
        let word = &mut self.data[off..off + 4];
        if req.we {
            for (lane, byte) in word.iter_mut().enumerate() {
                if req.be & (1 << lane) != 0 {
                    *byte = (req.wdata >> (8 * lane)) as u8;
                }
            }
            Ok(0)
        } else {
            Ok(u32::from_le_bytes([word[0], word[1], word[2], word[3]]))
        }
    }
}

impl Subordinate for SramBank {
    fn access(&mut self, offset: u32, req: &BusRequest, _ctx: &mut DeviceCtx<'_>) -> Result<u32, BusError> {
        let abs = BusRequest {
            addr: self.base.wrapping_add(offset),
            ..*req
        };
        self.sram_access(&abs)
    }

    fn reset(&mut self, cold: bool) {
        if cold {
            self.data.fill(0);
        }
    }
}

fn check_range(fabric: &Fabric, base: u32, len: usize) -> Result<(), MemoryError> {
    if len == 0 {
        return Ok(());
    }
    let mut addr = base as u64;
    let end = base as u64 + len as u64;
    while addr < end {
        let Some(bank) = (addr <= u32::MAX as u64)
            .then(|| fabric.all::<SramBank>().find(|b| b.contains(addr as u32)))
            .flatten()
        else {
            return Err(MemoryError::Range { addr: addr as u32 });
        };
        addr = bank.base() as u64 + bank.size() as u64;
    }
    Ok(())
}

/// Copy `bytes` verbatim into SRAM starting at `base`.
///
/// The whole range is checked first; nothing is written if any byte falls
/// outside SRAM. Adjacent banks may be spanned.
pub fn load_image(fabric: &mut Fabric, base: u32, bytes: &[u8]) -> Result<(), MemoryError> {
    check_range(fabric, base, bytes.len())?;
    let mut written = 0usize;
    while written < bytes.len() {
        let addr = base + written as u32;
        let bank = fabric
            .all_mut::<SramBank>()
            .find(|b| b.contains(addr))
            .expect("range checked");
        let off = (addr - bank.base()) as usize;
        let n = (bank.size() as usize - off).min(bytes.len() - written);
        bank.bytes_mut()[off..off + n].copy_from_slice(&bytes[written..written + n]);
        written += n;
    }
    Ok(())
}

/// Backdoor read of SRAM contents (no bus traffic, no side effects).
pub fn read_bytes(fabric: &Fabric, base: u32, len: usize) -> Result<Vec<u8>, MemoryError> {
    check_range(fabric, base, len)?;
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let addr = base + out.len() as u32;
        let bank = fabric
            .all::<SramBank>()
            .find(|b| b.contains(addr))
            .expect("range checked");
        let off = (addr - bank.base()) as usize;
        let n = (bank.size() as usize - off).min(len - out.len());
        out.extend_from_slice(&bank.bytes()[off..off + n]);
    }
    Ok(out)
}

/// `addr: b0 b1 b2 b3` hex dump lines, four bytes per line.
pub fn hex_dump(base: u32, bytes: &[u8]) -> Vec<String> {
    bytes
        .chunks(4)
        .enumerate()
        .map(|(i, chunk)| {
            let hex: Vec<String> = chunk.iter().map(|b| format!("{b:02x}")).collect();
            format!("{:08x}: {}", base as usize + 4 * i, hex.join(" "))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obi::{AddressRule, Arbitration};

    fn bank() -> SramBank {
        SramBank::new("sram0", 0x1000_0000, 0x1_0000).unwrap()
    }

    #[test]
    fn word_round_trip() {
        let mut b = bank();
        b.sram_access(&BusRequest::write(0x1000_0000, 0xF, 0xDEAD_BEEF))
            .unwrap();
        assert_eq!(b.sram_access(&BusRequest::read(0x1000_0000)), Ok(0xDEAD_BEEF));
    }

    #[test]
    fn byte_enable_merges_lanes() {
        let mut b = bank();
        b.sram_access(&BusRequest::write(0x1000_0000, 0xF, 0xFFFF_FFFF))
            .unwrap();
        b.sram_access(&BusRequest::write(0x1000_0000, 0b0010, 0x0000_5500))
            .unwrap();
        assert_eq!(b.sram_access(&BusRequest::read(0x1000_0000)), Ok(0xFFFF_55FF));
    }

    #[test]
    fn out_of_range_is_an_error() {
        let mut b = bank();
        assert_eq!(b.sram_access(&BusRequest::read(0x1001_0000)), Err(BusError));
    }

    #[test]
    fn bad_sizes_rejected() {
        assert!(SramBank::new("x", 0, 6).is_err());
        assert!(SramBank::new("x", 0, 0).is_err());
    }

    fn gapped_fabric() -> Fabric {
        let mut f = Fabric::new(Arbitration::FixedPriority, 20_000_000);
        f.attach(
            AddressRule::new("sram0", 0x1000_0000, 0x100),
            Box::new(SramBank::new("sram0", 0x1000_0000, 0x100).unwrap()),
        )
        .unwrap();
        f.attach(
            AddressRule::new("sram1", 0x1000_0200, 0x100),
            Box::new(SramBank::new("sram1", 0x1000_0200, 0x100).unwrap()),
        )
        .unwrap();
        f
    }

    #[test]
    fn image_loads_verbatim() {
        let mut f = gapped_fabric();
        let img: Vec<u8> = (0..16).collect();
        load_image(&mut f, 0x1000_0000, &img).unwrap();
        assert_eq!(read_bytes(&f, 0x1000_0000, 16).unwrap(), img);
    }

    #[test]
    fn image_across_gap_reports_first_bad_address() {
        let mut f = gapped_fabric();
        let err = load_image(&mut f, 0x1000_00F0, &[1; 0x20]).unwrap_err();
        assert_eq!(err, MemoryError::Range { addr: 0x1000_0100 });
        // nothing written
        assert_eq!(read_bytes(&f, 0x1000_00F0, 16).unwrap(), vec![0; 16]);
    }

    #[test]
    fn empty_image_is_a_no_op() {
        let mut f = gapped_fabric();
        load_image(&mut f, 0x4000_0000, &[]).unwrap();
    }

    #[test]
    fn hex_dump_lines() {
        assert_eq!(
            hex_dump(0x1000_0000, &[0x93, 0x00, 0x50, 0x00, 0x13]),
            vec!["10000000: 93 00 50 00", "10000004: 13"]
        );
    }
}

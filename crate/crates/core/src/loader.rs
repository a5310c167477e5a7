//! Firmware images: ELF32 (little-endian RISC-V) and raw binaries.
//!
//! Only `PT_LOAD` program headers are used. Segments are placed at their
//! physical address; bytes between `p_filesz` and `p_memsz` are zero.

use thiserror::Error;

use crate::memory::MemoryError;
use crate::soc::Soc;

pub const EM_RISCV: u16 = 243;
const PT_LOAD: u32 = 1;
const EHDR_SIZE: usize = 52;
const PHDR_SIZE: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub addr: u32,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirmwareImage {
    pub segments: Vec<Segment>,
    pub entry: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ElfError {
    #[error("not an ELF file")]
    NotElf,
    #[error("not a 32-bit ELF file")]
    WrongClass,
    #[error("ELF machine {0} is not RISC-V (243)")]
    WrongMachine(u16),
    #[error("malformed ELF header at offset {0:#x}")]
    MalformedHeader(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("segment {index} at 0x{addr:08x} (+0x{len:x}) is not backed by SRAM (first bad address 0x{bad:08x})")]
    Range {
        index: usize,
        addr: u32,
        len: usize,
        bad: u32,
    },
}

fn u16_at(b: &[u8], off: usize) -> Result<u16, ElfError> {
    b.get(off..off + 2)
        .map(|s| u16::from_le_bytes([s[0], s[1]]))
        .ok_or(ElfError::MalformedHeader(off))
}

fn u32_at(b: &[u8], off: usize) -> Result<u32, ElfError> {
    b.get(off..off + 4)
        .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
        .ok_or(ElfError::MalformedHeader(off))
}

impl FirmwareImage {
    /// A raw binary placed at `addr`, entered at `addr`.
    pub fn from_raw(bytes: &[u8], addr: u32) -> Self {
        let segments = if bytes.is_empty() {
            vec![]
        } else {
            vec![Segment {
                addr,
                data: bytes.to_vec(),
            }]
        };
        FirmwareImage { segments, entry: addr }
    }

    pub fn is_empty(&self) -> bool {
        self.segments.iter().all(|s| s.data.is_empty())
    }
}

pub fn parse_elf(bytes: &[u8]) -> Result<FirmwareImage, ElfError> {
    if bytes.len() < 4 || &bytes[..4] != b"\x7fELF" {
        return Err(ElfError::NotElf);
    }
    match bytes.get(4) {
        Some(1) => {}
        Some(_) => return Err(ElfError::WrongClass),
        None => return Err(ElfError::MalformedHeader(4)),
    }
    if bytes.get(5) != Some(&1) {
        // big-endian or invalid data encoding
        return Err(ElfError::MalformedHeader(5));
    }
    if bytes.len() < EHDR_SIZE {
        return Err(ElfError::MalformedHeader(bytes.len()));
    }
    let machine = u16_at(bytes, 18)?;
    if machine != EM_RISCV {
        return Err(ElfError::WrongMachine(machine));
    }
    let entry = u32_at(bytes, 24)?;
    let phoff = u32_at(bytes, 28)? as usize;
    let phentsize = u16_at(bytes, 42)? as usize;
    let phnum = u16_at(bytes, 44)? as usize;
    if phnum > 0 && phentsize < PHDR_SIZE {
        return Err(ElfError::MalformedHeader(42));
    }

    let mut segments: Vec<Segment> = Vec::new();
    for i in 0..phnum {
        let ph = phoff.checked_add(i * phentsize).ok_or(ElfError::MalformedHeader(28))?;
        if ph.checked_add(PHDR_SIZE).is_none_or(|end| end > bytes.len()) {
            return Err(ElfError::MalformedHeader(ph));
        }
        if u32_at(bytes, ph)? != PT_LOAD {
            continue;
        }
        let offset = u32_at(bytes, ph + 4)? as usize;
        let paddr = u32_at(bytes, ph + 12)?;
        let filesz = u32_at(bytes, ph + 16)? as usize;
        let memsz = u32_at(bytes, ph + 20)? as usize;
        if filesz > memsz {
            return Err(ElfError::MalformedHeader(ph + 16));
        }
        if offset.checked_add(filesz).is_none_or(|end| end > bytes.len()) {
            return Err(ElfError::MalformedHeader(ph + 4));
        }
        if paddr as u64 + memsz as u64 > 1 << 32 {
            return Err(ElfError::MalformedHeader(ph + 20));
        }
        if memsz == 0 {
            continue;
        }
        let mut data = bytes[offset..offset + filesz].to_vec();
        data.resize(memsz, 0);
        let seg = Segment { addr: paddr, data };
        let overlaps = segments.iter().any(|s| {
            (s.addr as u64) < seg.addr as u64 + seg.data.len() as u64
                && (seg.addr as u64) < s.addr as u64 + s.data.len() as u64
        });
        if overlaps {
            return Err(ElfError::MalformedHeader(ph + 12));
        }
        segments.push(seg);
    }
    Ok(FirmwareImage { segments, entry })
}

/// Serialize `image` as a minimal ELF32 executable: header, one `PT_LOAD`
/// per segment, then the segment bytes (trailing zeros are kept in the
/// file, so `p_filesz == p_memsz`).
pub fn write_elf(image: &FirmwareImage) -> Vec<u8> {
    let n = image.segments.len();
    let mut out = Vec::new();
    out.extend_from_slice(b"\x7fELF");
    out.extend_from_slice(&[1, 1, 1, 0]);
    out.extend_from_slice(&[0; 8]);
    out.extend_from_slice(&2u16.to_le_bytes()); // ET_EXEC
    out.extend_from_slice(&EM_RISCV.to_le_bytes());
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&image.entry.to_le_bytes());
    out.extend_from_slice(&(EHDR_SIZE as u32).to_le_bytes()); // e_phoff
    out.extend_from_slice(&0u32.to_le_bytes()); // e_shoff
    out.extend_from_slice(&0u32.to_le_bytes()); // e_flags
    out.extend_from_slice(&(EHDR_SIZE as u16).to_le_bytes());
    out.extend_from_slice(&(PHDR_SIZE as u16).to_le_bytes());
    out.extend_from_slice(&(n as u16).to_le_bytes());
    out.extend_from_slice(&40u16.to_le_bytes()); // e_shentsize
    out.extend_from_slice(&0u16.to_le_bytes()); // e_shnum
    out.extend_from_slice(&0u16.to_le_bytes()); // e_shstrndx
    debug_assert_eq!(out.len(), EHDR_SIZE);

    let mut offset = EHDR_SIZE + n * PHDR_SIZE;
    for s in &image.segments {
        let len = s.data.len() as u32;
        for word in [PT_LOAD, offset as u32, s.addr, s.addr, len, len, 0b111, 4] {
            out.extend_from_slice(&word.to_le_bytes());
        }
        offset += s.data.len();
    }
    for s in &image.segments {
        out.extend_from_slice(&s.data);
    }
    out
}

/// Place `image` in SRAM and point the core at its entry (or `entry`).
///
/// Every segment is range-checked before anything is written. An empty
/// image leaves the platform untouched.
pub fn load(soc: &mut Soc, image: &FirmwareImage, entry: Option<u32>) -> Result<(), LoadError> {
    if image.is_empty() {
        return Ok(());
    }
    for (index, s) in image.segments.iter().enumerate() {
        if let Err(MemoryError::Range { addr: bad }) = soc.read_mem(s.addr, s.data.len()) {
            return Err(LoadError::Range {
                index,
                addr: s.addr,
                len: s.data.len(),
                bad,
            });
        }
    }
    for s in &image.segments {
        soc.write_mem(s.addr, &s.data).expect("range checked");
    }
    let pc = entry.unwrap_or(image.entry);
    soc.set_reset_pc(pc);
    soc.cpu.state.pc = pc;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soc::SocConfig;

    fn image() -> FirmwareImage {
        FirmwareImage {
            segments: vec![
                Segment {
                    addr: 0x1000_0000,
                    data: vec![0x93, 0x00, 0x50, 0x00],
                },
                Segment {
                    addr: 0x1000_0100,
                    data: vec![1, 2, 3, 0, 0],
                },
            ],
            entry: 0x1000_0000,
        }
    }

    #[test]
    fn writer_round_trips() {
        let img = image();
        assert_eq!(parse_elf(&write_elf(&img)).unwrap(), img);
    }

    #[test]
    fn header_errors() {
        assert_eq!(parse_elf(b"MZ\0\0"), Err(ElfError::NotElf));
        let mut elf = write_elf(&image());
        elf[18] = 62;
        assert_eq!(parse_elf(&elf), Err(ElfError::WrongMachine(62)));
        let mut elf = write_elf(&image());
        elf[4] = 2;
        assert_eq!(parse_elf(&elf), Err(ElfError::WrongClass));
        let elf = write_elf(&image());
        assert_eq!(parse_elf(&elf[..60]), Err(ElfError::MalformedHeader(52)));
    }

    #[test]
    fn memsz_beyond_filesz_is_zero_filled() {
        let mut elf = write_elf(&image());
        // second phdr: shrink filesz from 5 to 3
        let ph = EHDR_SIZE + PHDR_SIZE;
        elf[ph + 16..ph + 20].copy_from_slice(&3u32.to_le_bytes());
        let img = parse_elf(&elf).unwrap();
        assert_eq!(img.segments[1].data, vec![1, 2, 3, 0, 0]);
    }

    #[test]
    fn raw_load_sets_pc() {
        let mut soc = Soc::build(SocConfig::mlem()).unwrap();
        load(&mut soc, &FirmwareImage::from_raw(&[0x13, 0, 0, 0], 0x1000_0000), None).unwrap();
        assert_eq!(soc.pc(), 0x1000_0000);
        assert_eq!(soc.config().reset_pc, 0x1000_0000);
    }

    #[test]
    fn unmapped_segment_is_a_range_error() {
        let mut soc = Soc::build(SocConfig::mlem()).unwrap();
        let img = FirmwareImage::from_raw(&[1, 2, 3, 4], 0x4000_0000);
        assert_eq!(
            load(&mut soc, &img, None),
            Err(LoadError::Range {
                index: 0,
                addr: 0x4000_0000,
                len: 4,
                bad: 0x4000_0000
            })
        );
    }

    #[test]
    fn empty_image_is_a_no_op() {
        let mut soc = Soc::build(SocConfig::mlem()).unwrap();
        soc.cpu.state.pc = 0x1000_0040;
        load(&mut soc, &FirmwareImage::from_raw(&[], 0x1000_0000), None).unwrap();
        assert_eq!(soc.pc(), 0x1000_0040);
    }
}

//! Instruction trace lines, pin CSV export, run statistics and the
//! FNV-1a-64 determinism digest.

use std::fmt;
use std::hash::Hasher;

use fnv::FnvHasher;
use thiserror::Error;

use crate::cpu::StepReport;
use crate::pins::PinEvent;
use crate::soc::{ClassCounts, Soc};

/// One parsed trace line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceLine {
    pub cycle: u64,
    pub pc: u32,
    pub raw: u32,
    pub mnemonic: String,
    pub rd: Option<(u8, u32)>,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "C{} PC=0x{:08x} I=0x{:08x} {}",
            self.cycle, self.pc, self.raw, self.mnemonic
        )?;
        if let Some((rd, v)) = self.rd {
            write!(f, " x{rd}=0x{v:08x}")?;
        }
        Ok(())
    }
}

impl TraceLine {
    /// The trace record for an executed instruction; `None` for interrupt
    /// entries, `wfi` stall cycles and failed fetches.
    pub fn from_report(report: &StepReport) -> Option<TraceLine> {
        let r = report.retirement.as_ref()?;
        Some(TraceLine {
            cycle: report.start_cycle,
            pc: report.pc,
            raw: report.raw,
            mnemonic: r.instr.op.mnemonic().to_string(),
            rd: r.rd_write,
        })
    }
}

/// `C<cycle> PC=0x<pc> I=0x<raw> <mnemonic>[ x<rd>=0x<value>]`
pub fn emit_trace_line(report: &StepReport) -> Option<String> {
    TraceLine::from_report(report).map(|l| l.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed trace line: {0}")]
pub struct TraceParseError(pub String);

fn hex_field(token: Option<&str>, prefix: &str) -> Option<u32> {
    let digits = token?.strip_prefix(prefix)?;
    (digits.len() == 8).then_some(())?;
    u32::from_str_radix(digits, 16).ok()
}

pub fn parse_trace_line(line: &str) -> Result<TraceLine, TraceParseError> {
    let err = || TraceParseError(line.to_string());
    let mut it = line.split(' ');
    let cycle = it
        .next()
        .and_then(|t| t.strip_prefix('C'))
        .and_then(|d| d.parse().ok())
        .ok_or_else(err)?;
    let pc = hex_field(it.next(), "PC=0x").ok_or_else(err)?;
    let raw = hex_field(it.next(), "I=0x").ok_or_else(err)?;
    let mnemonic = it.next().filter(|m| !m.is_empty()).ok_or_else(err)?.to_string();
    let rd = match it.next() {
        None => None,
        Some(t) => {
            let (reg, value) = t.split_once('=').ok_or_else(err)?;
            let reg: u8 = reg
                .strip_prefix('x')
                .and_then(|r| r.parse().ok())
                .filter(|&r| r < 32)
                .ok_or_else(err)?;
            let value = hex_field(Some(value), "0x").ok_or_else(err)?;
            Some((reg, value))
        }
    };
    if it.next().is_some() {
        return Err(err());
    }
    Ok(TraceLine {
        cycle,
        pc,
        raw,
        mnemonic,
        rd,
    })
}

pub const PIN_CSV_HEADER: &str = "time_ns,cycle,pin,level";

pub fn pin_csv_line(e: &PinEvent) -> String {
    format!("{},{},{},{}", e.time_ns, e.cycle, e.pin, e.level as u8)
}

/// Header plus one line per event.
pub fn emit_pin_csv(events: &[PinEvent]) -> Vec<String> {
    std::iter::once(PIN_CSV_HEADER.to_string())
        .chain(events.iter().map(pin_csv_line))
        .collect()
}

/// Streaming FNV-1a-64 digest.
#[derive(Default)]
pub struct TraceDigest(FnvHasher);

impl TraceDigest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, bytes: &[u8]) {
        self.0.write(bytes);
    }

    pub fn finish(&self) -> u64 {
        self.0.finish()
    }
}

/// FNV-1a-64 over `bytes`.
pub fn trace_hash(bytes: &[u8]) -> u64 {
    let mut d = TraceDigest::new();
    d.update(bytes);
    d.finish()
}

/// Counters sampled at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Snapshot {
    pub cycle: u64,
    pub instret: u64,
    pub classes: ClassCounts,
}

impl Snapshot {
    pub fn of(soc: &Soc) -> Snapshot {
        Snapshot {
            cycle: soc.cycle(),
            instret: soc.cpu.state.csr.minstret,
            classes: soc.class_counts(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("statistics window contains no cycles")]
pub struct EmptyWindow;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    pub cycles: u64,
    pub instret: u64,
    pub ipc: f64,
    pub classes: ClassCounts,
}

/// Statistics over the window between two snapshots.
pub fn stats(from: &Snapshot, to: &Snapshot) -> Result<RunStats, EmptyWindow> {
    let cycles = to.cycle.saturating_sub(from.cycle);
    if cycles == 0 {
        return Err(EmptyWindow);
    }
    let instret = to.instret.wrapping_sub(from.instret);
    let mut classes = ClassCounts::default();
    for (i, c) in classes.0.iter_mut().enumerate() {
        *c = to.classes.0[i] - from.classes.0[i];
    }
    Ok(RunStats {
        cycles,
        instret,
        ipc: instret as f64 / cycles as f64,
        classes,
    })
}

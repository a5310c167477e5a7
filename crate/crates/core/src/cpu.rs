//! Timed core: fetch and data accesses go through the OBI fabric and each
//! step consumes the decision-table cycle count.
//!
//! Within one step the fetch is issued at the step's first cycle. Data
//! transactions are issued once the fetch (and, for a 32-bit instruction
//! straddling a word, its second half) has responded. Any remaining cycles
//! of the instruction's latency are idle bus cycles. With zero-wait memory
//! the step therefore lasts exactly `timing_cycles` cycles.

use crate::isa::{
    cause, decode, decode_compressed, execute, raise_trap, take_pending_interrupt, timing_cycles, AccessFault,
    ArchState, DataPort, DecodedInstr, HaltReason, Retirement, TimingOutcome, Trap, Width,
};
use crate::obi::{BusRequest, Fabric, Manager, ObiTransaction};

/// An instruction as fetched: decoded form plus the raw encoding (16-bit
/// encodings zero-extended).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fetched {
    pub instr: DecodedInstr,
    pub raw: u32,
    /// Number of extra word reads needed (a 32-bit parcel at pc % 4 == 2).
    pub splits: u32,
}

/// Fetch and decode the instruction at `state.pc` using `read_word` for
/// aligned 32-bit reads. Shared by the timed core and the functional model.
pub fn fetch_decode(
    state: &ArchState,
    mut read_word: impl FnMut(u32) -> Result<u32, AccessFault>,
) -> Result<Fetched, Trap> {
    let pc = state.pc;
    if pc & (state.ialign() - 1) != 0 {
        return Err(Trap::new(cause::MISALIGNED_FETCH, pc));
    }
    let fault = |_| Trap::new(cause::FETCH_ACCESS, pc);
    let word = read_word(pc & !3).map_err(fault)?;
    let upper = pc & 2 != 0;
    let half = if upper { (word >> 16) as u16 } else { word as u16 };

    if state.c_enabled && half & 0b11 != 0b11 {
        let instr = decode_compressed(half).map_err(|_| Trap::new(cause::ILLEGAL_INSTRUCTION, half as u32))?;
        return Ok(Fetched {
            instr,
            raw: half as u32,
            splits: 0,
        });
    }
    let (raw, splits) = if upper {
        let next = read_word(pc.wrapping_add(2)).map_err(|_| Trap::new(cause::FETCH_ACCESS, pc))?;
        (half as u32 | (next << 16), 1)
    } else {
        (word, 0)
    };
    let instr = decode(raw).map_err(|_| Trap::new(cause::ILLEGAL_INSTRUCTION, raw))?;
    Ok(Fetched { instr, raw, splits })
}

/// Bytes touched by an access, split at the word boundary: `(word address,
/// byte enables, first lane)` for each word.
pub(crate) fn word_pieces(addr: u32, width: Width) -> impl Iterator<Item = (u32, u8, u32)> {
    let n = width.bytes();
    let lane = addr & 3;
    let first = (4 - lane).min(n);
    let be0 = (((1u32 << first) - 1) << lane) as u8;
    let rest = n - first;
    let head = std::iter::once((addr & !3, be0, lane));
    let tail = (rest > 0).then(|| (addr.wrapping_add(4) & !3, ((1u32 << rest) - 1) as u8, 0));
    head.chain(tail)
}

/// One complete transaction on `m`: issue, tick until the response.
fn transact(fabric: &mut Fabric, m: Manager, req: BusRequest, log: &mut Vec<ObiTransaction>) -> ObiTransaction {
    fabric
        .issue(m, req)
        .expect("core has at most one outstanding request per port");
    loop {
        let delivered = fabric.tick();
        if let Some(t) = delivered.get(m) {
            fabric.take_response(m);
            log.push(*t);
            return *t;
        }
    }
}

/// Data port backed by the fabric's data manager.
struct FabricPort<'a> {
    fabric: &'a mut Fabric,
    log: &'a mut Vec<ObiTransaction>,
    splits: u32,
}

impl DataPort for FabricPort<'_> {
    fn load(&mut self, addr: u32, width: Width) -> Result<u32, AccessFault> {
        let mut value = 0u32;
        let mut shift = 0;
        for (i, (word, be, lane)) in word_pieces(addr, width).enumerate() {
            self.splits += i as u32;
            let req = BusRequest {
                addr: word,
                we: false,
                be,
                wdata: 0,
            };
            let t = transact(self.fabric, Manager::Data, req, self.log);
            if t.err {
                return Err(AccessFault);
            }
            let count = be.count_ones();
            let bits = (t.rdata >> (8 * lane)) as u64 & ((1u64 << (8 * count)) - 1);
            value |= (bits << shift) as u32;
            shift += 8 * count;
        }
        Ok(value)
    }

    fn store(&mut self, addr: u32, width: Width, value: u32) -> Result<(), AccessFault> {
        let mut consumed = 0;
        for (i, (word, be, lane)) in word_pieces(addr, width).enumerate() {
            self.splits += i as u32;
            let wdata = ((value >> consumed) as u64) << (8 * lane);
            consumed += 8 * be.count_ones();
            let t = transact(
                self.fabric,
                Manager::Data,
                BusRequest::write(word, be, wdata as u32),
                self.log,
            );
            if t.err {
                return Err(AccessFault);
            }
        }
        Ok(())
    }
}

/// What one call to [`Cpu::step_timed`] did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepReport {
    /// Fabric cycle at which the step began.
    pub start_cycle: u64,
    pub pc: u32,
    /// Raw encoding, zero-extended for compressed instructions. Zero when
    /// nothing was fetched.
    pub raw: u32,
    /// Present when an instruction was executed (retired or trapped).
    pub retirement: Option<Retirement>,
    pub cycles: u32,
    pub trap: Option<Trap>,
    /// The step only waited in `wfi`.
    pub stalled: bool,
    pub bus: Vec<ObiTransaction>,
}

impl StepReport {
    /// Whether an instruction retired.
    pub fn retired(&self) -> Option<&Retirement> {
        self.retirement.as_ref().filter(|r| r.retired())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("core is halted: {0}")]
pub struct CoreHalted(pub HaltReason);

/// The CVE2-style core driving the data and instruction managers.
#[derive(Debug, Clone)]
pub struct Cpu {
    pub state: ArchState,
}

impl Cpu {
    pub fn new(reset_pc: u32, c_enabled: bool) -> Self {
        Cpu {
            state: ArchState::new(reset_pc, c_enabled),
        }
    }

    fn finish(&mut self, fabric: &mut Fabric, report: &mut StepReport, suppress_mcycle: bool) {
        let end = report.start_cycle + report.cycles as u64;
        debug_assert!(fabric.now() <= end, "bus activity exceeded the step latency");
        while fabric.now() < end {
            fabric.tick();
        }
        if !suppress_mcycle {
            self.state.csr.mcycle = self.state.csr.mcycle.wrapping_add(report.cycles as u64);
        }
    }

    /// Advance the core by one instruction, one interrupt entry, or one
    /// `wfi` stall cycle.
    pub fn step_timed(&mut self, fabric: &mut Fabric) -> Result<StepReport, CoreHalted> {
        if let Some(h) = self.state.halted {
            return Err(CoreHalted(h));
        }
        let mut report = StepReport {
            start_cycle: fabric.now(),
            pc: self.state.pc,
            raw: 0,
            retirement: None,
            cycles: 1,
            trap: None,
            stalled: false,
            bus: Vec::new(),
        };
        self.state.sample_interrupts(fabric.irq_lines());
        if let Some(trap) = take_pending_interrupt(&mut self.state) {
            raise_trap(&mut self.state, trap);
            report.trap = Some(trap);
            self.finish(fabric, &mut report, false);
            return Ok(report);
        }
        if self.state.waiting {
            report.stalled = true;
            self.finish(fabric, &mut report, false);
            return Ok(report);
        }

        let mut bus = Vec::new();
        let fetched = fetch_decode(&self.state, |addr| {
            let t = transact(fabric, Manager::Instr, BusRequest::read(addr), &mut bus);
            if t.err {
                Err(AccessFault)
            } else {
                Ok(t.rdata)
            }
        });
        let fetched = match fetched {
            Ok(f) => f,
            Err(trap) => {
                raise_trap(&mut self.state, trap);
                report.trap = Some(trap);
                report.cycles = (fabric.now() - report.start_cycle).max(1) as u32;
                report.bus = bus;
                self.finish(fabric, &mut report, false);
                return Ok(report);
            }
        };
        report.raw = fetched.raw;

        let mut port = FabricPort {
            fabric,
            log: &mut bus,
            splits: 0,
        };
        let r = execute(&mut self.state, &fetched.instr, &mut port);
        let data_splits = port.splits;
        let wait_states: u64 = bus.iter().map(|t| t.wait_states()).sum();
        let outcome = TimingOutcome {
            branch_taken: r.branch_taken,
            split_accesses: fetched.splits + data_splits,
            wait_states: wait_states as u32,
        };
        report.cycles = timing_cycles(&fetched.instr, outcome);
        report.trap = r.trap;
        report.bus = bus;
        let suppress = r.wrote_mcycle;
        report.retirement = Some(r);
        self.finish(fabric, &mut report, suppress);
        Ok(report)
    }
}

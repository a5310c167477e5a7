//! Headless runs producing an execution trace, pin log and digest.
//!
//! Trace lines and pin CSV lines are hashed separately with FNV-1a-64, each
//! line terminated by `\n`; the run digest is FNV-1a-64 over the two
//! little-endian partial digests. Splitting a run into chunks therefore
//! does not change its digest, and two runs with the same firmware,
//! configuration and stimulus always agree.

use crate::pins::{DeviceEvents, PinEvent};
use crate::soc::{RunResult, Soc};
use crate::trace::{emit_trace_line, pin_csv_line, TraceDigest};

/// Accumulates the digest over any number of [`Recorder::run`] calls.
#[derive(Default)]
pub struct Recorder {
    trace: TraceDigest,
    pins: TraceDigest,
}

impl Recorder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Run `soc` for up to `max_cycles`, handing each trace line to `on_line`.
    pub fn run(&mut self, soc: &mut Soc, max_cycles: u64, on_line: &mut dyn FnMut(&str)) -> RunResult {
        let trace = &mut self.trace;
        soc.run_with(
            max_cycles,
            &mut |rep| {
                if let Some(line) = emit_trace_line(rep) {
                    trace.update(line.as_bytes());
                    trace.update(b"\n");
                    on_line(&line);
                }
            },
            &mut || false,
        )
    }

    /// Take the platform's pending events, folding the pin edges into the
    /// digest.
    pub fn drain(&mut self, soc: &mut Soc) -> DeviceEvents {
        let events = soc.drain_events();
        for e in &events.pins {
            self.pins.update(pin_csv_line(e).as_bytes());
            self.pins.update(b"\n");
        }
        events
    }

    pub fn digest(&self) -> u64 {
        let mut d = TraceDigest::new();
        d.update(&self.trace.finish().to_le_bytes());
        d.update(&self.pins.finish().to_le_bytes());
        d.finish()
    }
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub result: RunResult,
    pub digest: u64,
    pub pins: Vec<PinEvent>,
    pub uart_tx: Vec<u8>,
}

/// One uninterrupted run of up to `max_cycles`.
pub fn run_batch(soc: &mut Soc, max_cycles: u64, on_line: &mut dyn FnMut(&str)) -> Batch {
    let mut rec = Recorder::new();
    let result = rec.run(soc, max_cycles, on_line);
    let events = rec.drain(soc);
    Batch {
        result,
        digest: rec.digest(),
        pins: events.pins,
        uart_tx: events.uart_tx.into_iter().map(|(_, b)| b).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::{demo_image, GREETING};
    use crate::loader::load;
    use crate::soc::{SocConfig, StopReason};

    fn demo() -> Soc {
        let cfg = SocConfig::mlem();
        let mut soc = Soc::build(cfg.clone()).unwrap();
        load(&mut soc, &demo_image(&cfg), None).unwrap();
        soc
    }

    #[test]
    fn demo_batch_collects_output() {
        let mut soc = demo();
        let mut lines = 0;
        let b = run_batch(&mut soc, 40_000, &mut |_| lines += 1);
        assert_eq!(b.result.stop, StopReason::CycleLimit);
        assert_eq!(b.uart_tx, GREETING);
        assert_eq!(lines as u64, b.result.instret);
        assert!(!b.pins.is_empty());
    }

    #[test]
    fn chunking_keeps_the_digest() {
        let whole = run_batch(&mut demo(), 30_000, &mut |_| {}).digest;
        let mut soc = demo();
        let mut rec = Recorder::new();
        while soc.cycle() < 30_000 {
            let chunk = (30_000 - soc.cycle()).min(7_000);
            rec.run(&mut soc, chunk, &mut |_| {});
            rec.drain(&mut soc);
        }
        assert_eq!(rec.digest(), whole);
    }
}

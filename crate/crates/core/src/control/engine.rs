//! Method dispatch over a [`Soc`], shared by the control service and the
//! CLI debugger.
//!
//! [`Engine::handle`] answers one request. `run` only arms the engine; the
//! owner then calls [`Engine::advance`] until [`Engine::is_running`] turns
//! false, checking for new requests between steps. Events produced along the
//! way collect in the engine until taken with [`Engine::take_events`].

use base64::Engine as _;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use super::protocol::{code, params, Event, Hex, Hex32, HexBytes, Request, Response, Role, RpcError};
use crate::loader::{self, parse_elf, FirmwareImage};
use crate::periph::waveform::decode_neopixel;
use crate::periph::NeoTiming;
use crate::pins::{DeviceEvents, Pin};
use crate::soc::{Soc, StopReason};
use crate::trace::{self, Snapshot};

pub const MAX_READ: u64 = 4096;
pub const MAX_STEP: u64 = 1_000_000;
pub const DEFAULT_STATS_INTERVAL: u64 = 100_000;

/// Methods an observer may call.
const READ_ONLY: &[&str] = &["read_regs", "read_mem", "subscribe"];
/// Methods accepted while a run is in progress.
const WHILE_RUNNING: &[&str] = &["pause", "read_regs", "read_mem", "gpio_input", "uart_rx", "subscribe"];

pub const METHODS: &[&str] = &[
    "load",
    "reset",
    "run",
    "pause",
    "step",
    "set_breakpoint",
    "clear_breakpoint",
    "read_regs",
    "read_mem",
    "write_mem",
    "gpio_input",
    "uart_rx",
    "subscribe",
];

#[derive(Debug, Clone, Copy)]
struct Running {
    /// Absolute cycle at which the run stops, if bounded.
    end: Option<u64>,
    first: bool,
}

#[derive(Debug)]
pub struct Engine {
    soc: Soc,
    running: Option<Running>,
    events: Vec<Event>,
    neo_edges: Vec<(u64, bool)>,
    stats_interval: u64,
    next_stats: u64,
    last_stats: Snapshot,
    last_stop: Option<StopReason>,
}

fn bad_params(e: impl std::fmt::Display) -> RpcError {
    RpcError::new(code::BAD_PARAMS, e.to_string())
}

fn range(e: impl std::fmt::Display) -> RpcError {
    RpcError::new(code::RANGE, e.to_string())
}

fn parse<T: DeserializeOwned + Default>(v: &Value) -> Result<T, RpcError> {
    if v.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(v.clone()).map_err(bad_params)
}

fn parse_required<T: DeserializeOwned>(v: &Value) -> Result<T, RpcError> {
    serde_json::from_value(v.clone()).map_err(bad_params)
}

fn color_hex(rgb: u32) -> String {
    format!("{:06X}", rgb & 0xFF_FFFF)
}

impl Engine {
    pub fn new(soc: Soc) -> Self {
        let last_stats = Snapshot::of(&soc);
        Engine {
            soc,
            running: None,
            events: Vec::new(),
            neo_edges: Vec::new(),
            stats_interval: DEFAULT_STATS_INTERVAL,
            next_stats: last_stats.cycle + DEFAULT_STATS_INTERVAL,
            last_stats,
            last_stop: None,
        }
    }

    /// Emit a `stats` event every `cycles` cycles of simulated time.
    pub fn set_stats_interval(&mut self, cycles: u64) {
        self.stats_interval = cycles.max(1);
        self.next_stats = self.soc.cycle() + self.stats_interval;
    }

    pub fn soc(&self) -> &Soc {
        &self.soc
    }

    pub fn soc_mut(&mut self) -> &mut Soc {
        &mut self.soc
    }

    pub fn into_soc(self) -> Soc {
        self.soc
    }

    pub fn is_running(&self) -> bool {
        self.running.is_some()
    }

    /// Why the most recent run or step sequence stopped.
    pub fn last_stop(&self) -> Option<StopReason> {
        self.last_stop
    }

    pub fn take_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }

    /// Answer one request from a session with `role`.
    pub fn handle(&mut self, role: Role, req: &Request) -> Response {
        match self.dispatch(role, req) {
            Ok(v) => Response::ok(req.id, v),
            Err(e) => Response::err(Some(req.id), e),
        }
    }

    fn dispatch(&mut self, role: Role, req: &Request) -> Result<Value, RpcError> {
        let m = req.method.as_str();
        if !METHODS.contains(&m) {
            return Err(RpcError::new(code::BAD_METHOD, format!("unknown method `{m}`")));
        }
        if role == Role::Observer && !READ_ONLY.contains(&m) {
            return Err(RpcError::new(
                code::NOT_CONTROLLER,
                format!("`{m}` needs the controller session"),
            ));
        }
        if self.is_running() && !WHILE_RUNNING.contains(&m) {
            return Err(RpcError::new(
                code::SIM_BUSY,
                format!("`{m}` is not allowed while running"),
            ));
        }
        let p = &req.params;
        match m {
            "load" => self.load(parse_required(p)?),
            "reset" => {
                let r: params::Reset = parse(p)?;
                self.reset(r.cold);
                Ok(json!({ "pc": Hex32(self.soc.pc()) }))
            }
            "run" => {
                let r: params::Run = parse(p)?;
                self.start_run(r.max_cycles.map(|h| h.0));
                Ok(json!({ "running": true }))
            }
            "pause" => {
                if self.is_running() {
                    self.finish_run(StopReason::Paused);
                }
                Ok(json!({ "pc": Hex32(self.soc.pc()), "cycle": Hex(self.soc.cycle()) }))
            }
            "step" => self.step(parse(p)?),
            "set_breakpoint" => {
                let a: params::Addr = parse_required(p)?;
                self.soc.set_breakpoint(a.addr.0);
                Ok(json!({ "addr": a.addr }))
            }
            "clear_breakpoint" => {
                let a: params::Addr = parse_required(p)?;
                Ok(json!({ "removed": self.soc.clear_breakpoint(a.addr.0) }))
            }
            "read_regs" => Ok(self.regs()),
            "read_mem" => {
                let r: params::ReadMem = parse_required(p)?;
                if r.len.0 > MAX_READ {
                    return Err(range(format!("len {} exceeds {MAX_READ}", r.len.0)));
                }
                let bytes = self.soc.read_mem(r.addr.0, r.len.0 as usize).map_err(range)?;
                Ok(json!({ "addr": r.addr, "bytes": HexBytes(bytes) }))
            }
            "write_mem" => {
                let w: params::WriteMem = parse_required(p)?;
                self.soc.write_mem(w.addr.0, &w.bytes.0).map_err(range)?;
                Ok(json!({ "written": w.bytes.0.len() }))
            }
            "gpio_input" => {
                let g: params::GpioInput = parse_required(p)?;
                let level = match g.level.0 {
                    0 => false,
                    1 => true,
                    l => return Err(bad_params(format!("level must be 0 or 1, got {l}"))),
                };
                let pin = u32::try_from(g.pin.0).map_err(range)?;
                self.soc.gpio_input(pin, level).map_err(range)?;
                Ok(json!({}))
            }
            "uart_rx" => {
                let u: params::UartRx = parse_required(p)?;
                self.soc.uart_rx(&u.bytes.0);
                Ok(json!({ "queued": u.bytes.0.len() }))
            }
            "subscribe" => {
                // Subscriptions belong to the session; the engine only
                // validates the request.
                let s: params::Subscribe = parse_required(p)?;
                Ok(json!({ "channels": s.channels }))
            }
            _ => unreachable!("method list is exhaustive"),
        }
    }

    fn load(&mut self, l: params::Load) -> Result<Value, RpcError> {
        let b64 = |s: &str| {
            base64::engine::general_purpose::STANDARD
                .decode(s)
                .map_err(|e| bad_params(format!("base64: {e}")))
        };
        let image: FirmwareImage = match (l.elf_b64, l.bin_b64, l.addr) {
            (Some(elf), None, None) => parse_elf(&b64(&elf)?).map_err(bad_params)?,
            (None, Some(bin), Some(addr)) => FirmwareImage::from_raw(&b64(&bin)?, addr.0),
            _ => return Err(bad_params("expected `elf_b64`, or `bin_b64` with `addr`")),
        };
        loader::load(&mut self.soc, &image, None).map_err(range)?;
        self.reset(false);
        Ok(json!({
            "entry": Hex32(self.soc.pc()),
            "segments": image.segments.len(),
        }))
    }

    fn reset(&mut self, cold: bool) {
        self.soc.reset(cold);
        // Anything emitted before the reset is stale.
        self.soc.drain_events();
        self.neo_edges.clear();
        self.last_stats = Snapshot::of(&self.soc);
        self.next_stats = self.last_stats.cycle + self.stats_interval;
        self.last_stop = None;
    }

    fn regs(&self) -> Value {
        let s = &self.soc.cpu.state;
        let regs: Vec<Hex32> = s.regs().iter().map(|&r| Hex32(r)).collect();
        json!({
            "pc": Hex32(s.pc),
            "regs": regs,
            "cycle": Hex(self.soc.cycle()),
            "instret": Hex(s.csr.minstret),
            "running": self.is_running(),
            "halted": self.soc.halt_stop().map(|r| r.name()),
        })
    }

    fn step(&mut self, p: params::Step) -> Result<Value, RpcError> {
        let n = p.n.map_or(1, |h| h.0);
        if n > MAX_STEP {
            return Err(range(format!("n {n} exceeds {MAX_STEP}")));
        }
        let start = self.soc.cycle();
        let mut lines = Vec::new();
        for _ in 0..n {
            if self.soc.halted().is_some() {
                break;
            }
            let Some(report) = self.soc.step() else { break };
            if p.trace {
                lines.extend(trace::emit_trace_line(&report));
            }
            self.after_step();
            if let Some(stop) = self.soc.halt_stop() {
                self.halted_event(stop);
            }
        }
        let mut out = json!({
            "pc": Hex32(self.soc.pc()),
            "cycles": self.soc.cycle() - start,
        });
        if p.trace {
            out["trace"] = json!(lines);
        }
        Ok(out)
    }

    fn start_run(&mut self, max_cycles: Option<u64>) {
        self.running = Some(Running {
            end: max_cycles.map(|m| self.soc.cycle().saturating_add(m)),
            first: true,
        });
        self.last_stop = None;
    }

    fn finish_run(&mut self, stop: StopReason) {
        self.running = None;
        self.halted_event(stop);
    }

    fn halted_event(&mut self, stop: StopReason) {
        self.last_stop = Some(stop);
        self.events.push(Event::Halted {
            reason: stop.name().to_string(),
            pc: Hex32(self.soc.pc()),
        });
    }

    /// Execute one step of the current run, or finish it. Returns whether
    /// the run continues.
    pub fn advance(&mut self) -> bool {
        let Some(run) = self.running.as_mut() else {
            return false;
        };
        let first = std::mem::replace(&mut run.first, false);
        let end = run.end;
        let stop = if let Some(stop) = self.soc.halt_stop() {
            Some(stop)
        } else if end.is_some_and(|e| self.soc.cycle() >= e) {
            Some(StopReason::CycleLimit)
        } else if !first && self.soc.at_breakpoint() {
            Some(StopReason::Breakpoint)
        } else {
            None
        };
        if let Some(stop) = stop {
            self.finish_run(stop);
            return false;
        }
        self.soc.step();
        self.after_step();
        true
    }

    /// Advance until the run stops; for callers without a request queue.
    pub fn run_to_stop(&mut self) -> Option<StopReason> {
        while self.advance() {}
        self.last_stop
    }

    fn after_step(&mut self) {
        let ev = self.soc.drain_events();
        if !ev.is_empty() {
            self.translate(ev);
        }
        let now = self.soc.cycle();
        if now >= self.next_stats {
            let snap = Snapshot::of(&self.soc);
            if let Ok(s) = trace::stats(&self.last_stats, &snap) {
                self.events.push(Event::Stats {
                    cycles: Hex(snap.cycle),
                    instret: Hex(snap.instret),
                    ipc: s.ipc,
                });
            }
            self.last_stats = snap;
            while self.next_stats <= now {
                self.next_stats += self.stats_interval;
            }
        }
    }

    /// Turn device events into protocol events, ordered by cycle.
    fn translate(&mut self, ev: DeviceEvents) {
        let mut out: Vec<(u64, Event)> = Vec::new();
        for p in &ev.pins {
            if p.pin == Pin::Neo {
                self.neo_edges.push((p.cycle, p.level));
            }
            out.push((
                p.cycle,
                Event::Pin {
                    cycle: Hex(p.cycle),
                    time_ns: Hex(p.time_ns),
                    pin: p.pin,
                    level: p.level as u8,
                },
            ));
        }
        for &(cycle, byte) in &ev.uart_tx {
            out.push((cycle, Event::UartTx { byte }));
        }
        for f in &ev.neo_frames {
            let split = self.neo_edges.partition_point(|&(c, _)| c < f.done_cycle);
            let edges: Vec<(u64, bool)> = self.neo_edges.drain(..split).collect();
            let timing = NeoTiming {
                t0h: f.t0h,
                t1h: f.t1h,
                tbit: f.tbit,
                treset: f.treset,
            };
            // The controller only emits well-formed waveforms; a frame the
            // decoder rejects is skipped rather than reported with wrong
            // colors.
            if let Ok(frames) = decode_neopixel(&edges, &timing) {
                let colors = frames.last().map(|c| c.iter().map(|&rgb| color_hex(rgb)).collect());
                out.push((
                    f.done_cycle,
                    Event::NeopixelFrame {
                        colors: colors.unwrap_or_default(),
                    },
                ));
            }
        }
        out.sort_by_key(|(c, _)| *c);
        self.events.extend(out.into_iter().map(|(_, e)| e));
    }
}

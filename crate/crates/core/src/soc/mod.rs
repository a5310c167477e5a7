//! The assembled platform: core, crossbar, memories, peripherals and the
//! user-domain window, driven by one deterministic clock loop.
//!
//! Within a cycle the peripherals tick before the bus grants requests, and
//! the core issues its requests at step boundaries, so a device sees the
//! clock edge before the core's access in the same cycle. Host stimulus
//! (scripted or from a controller) is applied between core steps.

mod config;
mod stim;

pub use config::{ConfigError, PadBudget, PadReport, Profile, SocConfig, NEOPIXEL_PADS, UART_PADS};
pub use stim::{parse_stimulus, StimAction, StimParseError, Stimulus};

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::cpu::{Cpu, StepReport};
use crate::isa::{HaltReason, OpClass};
use crate::memory::{self, MemoryError, SramBank};
use crate::obi::{AddressRule, Fabric, FabricError, Subordinate};
use crate::periph::gpio::PinRangeError;
use crate::periph::{neopixel, Gpio, NeoPixel, Timer, Uart};
use crate::pins::DeviceEvents;

/// Register window sizes of the built-in peripherals.
pub const UART_WINDOW: u32 = 0x1000;
pub const GPIO_WINDOW: u32 = 0x1000;
pub const TIMER_WINDOW: u32 = 0x1000;
pub const NEOPIXEL_WINDOW: u32 = 0x1000;

const _: () = assert!(neopixel::WINDOW <= NEOPIXEL_WINDOW);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttachError {
    #[error("rule 0x{base:08x} (+0x{size:x}) is outside the user window")]
    OutsideUserWindow { base: u32, size: u32 },
    #[error(transparent)]
    Overlap(#[from] FabricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    CycleLimit,
    Breakpoint,
    /// `ebreak` without a handler.
    Halt,
    DoubleFault {
        cause: u32,
        tval: u32,
    },
    /// Stopped by the caller's pause check.
    Paused,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::CycleLimit => "cycle_limit",
            StopReason::Breakpoint => "breakpoint",
            StopReason::Halt => "halt",
            StopReason::DoubleFault { .. } => "double_fault",
            StopReason::Paused => "paused",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunResult {
    /// Cycles elapsed during this run.
    pub cycles: u64,
    /// Instructions retired during this run.
    pub instret: u64,
    pub stop: StopReason,
    pub pc: u32,
}

/// Retirements per opcode class, indexed like [`OpClass::ALL`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts(pub [u64; 11]);

impl ClassCounts {
    pub fn get(&self, class: OpClass) -> u64 {
        self.0[class as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (OpClass, u64)> + '_ {
        OpClass::ALL.into_iter().map(|c| (c, self.get(c)))
    }
}

pub struct Soc {
    config: SocConfig,
    pads: PadReport,
    pub cpu: Cpu,
    pub fabric: Fabric,
    breakpoints: BTreeSet<u32>,
    script: Vec<Stimulus>,
    stim: VecDeque<Stimulus>,
    classes: ClassCounts,
}

impl std::fmt::Debug for Soc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Soc")
            .field("config", &self.config)
            .field("pc", &self.cpu.state.pc)
            .field("cycle", &self.fabric.now())
            .finish_non_exhaustive()
    }
}

fn attach(fabric: &mut Fabric, name: &str, base: u32, size: u32, dev: Box<dyn Subordinate>) -> Result<(), ConfigError> {
    fabric
        .attach(AddressRule::new(name, base, size), dev)
        .map(|_| ())
        .map_err(|e| ConfigError::Overlap(e.to_string()))
}

impl Soc {
    /// Populate the fabric per `config`.
    pub fn build(config: SocConfig) -> Result<Soc, ConfigError> {
        let pads = config.pad_report()?;
        let clk = config.clk_hz;
        let mut fabric = Fabric::new(config.arbitration, clk);
        for (name, base, size) in [
            ("sram0", config.sram0_base, config.sram0_size),
            ("sram1", config.sram1_base, config.sram1_size),
        ] {
            let bank = SramBank::new(name, base, size).map_err(|e| ConfigError::Memory(e.to_string()))?;
            attach(&mut fabric, name, base, size, Box::new(bank))?;
        }
        attach(
            &mut fabric,
            "uart",
            config.uart_base,
            UART_WINDOW,
            Box::new(Uart::new(clk)),
        )?;
        attach(
            &mut fabric,
            "gpio",
            config.gpio_base,
            GPIO_WINDOW,
            Box::new(Gpio::new(pads.gpio as u8)),
        )?;
        attach(
            &mut fabric,
            "timer",
            config.timer_base,
            TIMER_WINDOW,
            Box::new(Timer::new()),
        )?;
        if let Some(base) = config.neopixel_base {
            attach(
                &mut fabric,
                "neopixel",
                base,
                NEOPIXEL_WINDOW,
                Box::new(NeoPixel::new(clk)),
            )?;
        }
        let user_end = config.user_base as u64 + config.user_size as u64;
        if config.user_size == 0 || user_end > 1 << 32 {
            return Err(ConfigError::Overlap("user window is empty or wraps".into()));
        }
        if let Some(r) = fabric
            .rules()
            .iter()
            .find(|r| (r.base as u64) < user_end && r.base as u64 + r.size as u64 > config.user_base as u64)
        {
            return Err(ConfigError::Overlap(format!("{} overlaps the user window", r.name)));
        }
        Ok(Soc {
            cpu: Cpu::new(config.reset_pc, config.enable_c_ext),
            config,
            pads,
            fabric,
            breakpoints: BTreeSet::new(),
            script: Vec::new(),
            stim: VecDeque::new(),
            classes: ClassCounts::default(),
        })
    }

    pub fn config(&self) -> &SocConfig {
        &self.config
    }

    pub fn pad_report(&self) -> PadReport {
        self.pads
    }

    pub fn cycle(&self) -> u64 {
        self.fabric.now()
    }

    pub fn pc(&self) -> u32 {
        self.cpu.state.pc
    }

    pub fn class_counts(&self) -> ClassCounts {
        self.classes
    }

    /// Change the reset pc (e.g. to a firmware entry point).
    pub fn set_reset_pc(&mut self, pc: u32) {
        self.config.reset_pc = pc;
    }

    /// Warm reset keeps SRAM contents; cold reset clears them. Either way the
    /// core, counters, bus and peripherals return to their reset state and
    /// the stimulus script is re-armed.
    pub fn reset(&mut self, cold: bool) {
        self.fabric.reset(cold);
        self.cpu = Cpu::new(self.config.reset_pc, self.config.enable_c_ext);
        self.stim = self.script.iter().cloned().collect();
        self.classes = ClassCounts::default();
    }

    /// Attach a device inside the user-domain window.
    pub fn attach_user_device(&mut self, rule: AddressRule, device: Box<dyn Subordinate>) -> Result<(), AttachError> {
        let end = rule.base as u64 + rule.size as u64;
        let window_end = self.config.user_base as u64 + self.config.user_size as u64;
        if rule.base < self.config.user_base || end > window_end {
            return Err(AttachError::OutsideUserWindow {
                base: rule.base,
                size: rule.size,
            });
        }
        self.fabric.attach(rule, device)?;
        Ok(())
    }

    pub fn set_breakpoint(&mut self, addr: u32) {
        self.breakpoints.insert(addr);
    }

    pub fn clear_breakpoint(&mut self, addr: u32) -> bool {
        self.breakpoints.remove(&addr)
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = u32> + '_ {
        self.breakpoints.iter().copied()
    }

    /// Install a stimulus script (sorted by cycle, stable).
    pub fn set_stimulus(&mut self, mut script: Vec<Stimulus>) {
        script.sort_by_key(|s| s.at);
        self.stim = script.iter().cloned().collect();
        self.script = script;
    }

    /// Backdoor SRAM write.
    pub fn write_mem(&mut self, addr: u32, bytes: &[u8]) -> Result<(), MemoryError> {
        memory::load_image(&mut self.fabric, addr, bytes)
    }

    /// Backdoor SRAM read.
    pub fn read_mem(&self, addr: u32, len: usize) -> Result<Vec<u8>, MemoryError> {
        memory::read_bytes(&self.fabric, addr, len)
    }

    pub fn gpio_input(&mut self, pin: u32, level: bool) -> Result<(), PinRangeError> {
        self.fabric
            .with_device::<Gpio, _>(|g, _| g.gpio_set_input(pin, level))
            .expect("platform has a GPIO bank")
    }

    /// Queue bytes on the UART RX line.
    pub fn uart_rx(&mut self, bytes: &[u8]) {
        self.fabric.with_device::<Uart, _>(|u, _| u.inject_rx(bytes));
    }

    pub fn apply(&mut self, action: &StimAction) -> Result<(), PinRangeError> {
        match action {
            StimAction::Gpio { pin, level } => self.gpio_input(*pin, *level),
            StimAction::Uart(bytes) => {
                self.uart_rx(bytes);
                Ok(())
            }
        }
    }

    /// Pin edges, UART bytes and NeoPixel frames since the last call.
    pub fn drain_events(&mut self) -> DeviceEvents {
        self.fabric.events_mut().drain()
    }

    fn apply_due_stimulus(&mut self) {
        let now = self.fabric.now();
        while self.stim.front().is_some_and(|s| s.at <= now) {
            let s = self.stim.pop_front().unwrap();
            // Out-of-range pins are rejected when the script is parsed
            // against the platform; ignore here.
            let _ = self.apply(&s.action);
        }
    }

    /// One core step (instruction, interrupt entry or wfi stall cycle).
    /// `None` if the core is halted.
    pub fn step(&mut self) -> Option<StepReport> {
        self.apply_due_stimulus();
        if let Some(t) = self.fabric.find::<Timer>() {
            self.cpu.state.mtime = t.mtime;
        }
        let report = self.cpu.step_timed(&mut self.fabric).ok()?;
        if let Some(r) = report.retired() {
            self.classes.0[r.instr.class() as usize] += 1;
        }
        Some(report)
    }

    /// Whether the core has stopped on its own.
    pub fn halted(&self) -> Option<HaltReason> {
        self.cpu.state.halted
    }

    /// The stop reason matching the core's halt state, if it has halted.
    pub fn halt_stop(&self) -> Option<StopReason> {
        self.halted().map(|h| match h {
            HaltReason::Ebreak { .. } => StopReason::Halt,
            HaltReason::DoubleFault { cause, tval, .. } => StopReason::DoubleFault { cause, tval },
        })
    }

    /// Whether the next instruction to execute sits on a breakpoint.
    pub fn at_breakpoint(&self) -> bool {
        self.breakpoints.contains(&self.cpu.state.pc) && !self.cpu.state.waiting
    }

    pub fn run(&mut self, max_cycles: u64) -> RunResult {
        self.run_with(max_cycles, &mut |_| {}, &mut || false)
    }

    /// Run until `max_cycles` have elapsed, a breakpoint is reached (before
    /// executing it), the core halts, or `pause` returns true. A breakpoint
    /// at the starting pc is stepped over so runs can resume from one.
    pub fn run_with(
        &mut self,
        max_cycles: u64,
        on_step: &mut dyn FnMut(&StepReport),
        pause: &mut dyn FnMut() -> bool,
    ) -> RunResult {
        let start_cycle = self.fabric.now();
        let start_instret = self.cpu.state.csr.minstret;
        let mut first = true;
        let stop = loop {
            if let Some(stop) = self.halt_stop() {
                break stop;
            }
            if self.fabric.now() - start_cycle >= max_cycles {
                break StopReason::CycleLimit;
            }
            if !first && self.at_breakpoint() {
                break StopReason::Breakpoint;
            }
            if pause() {
                break StopReason::Paused;
            }
            first = false;
            match self.step() {
                Some(r) => on_step(&r),
                None => continue,
            }
        };
        RunResult {
            cycles: self.fabric.now() - start_cycle,
            instret: self.cpu.state.csr.minstret.wrapping_sub(start_instret),
            stop,
            pc: self.cpu.state.pc,
        }
    }
}

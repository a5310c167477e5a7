//! Single-wire WS2812-class LED strip controller.
//!
//! Register map: CTRL 0x00 (write bit 0 starts a frame, read bit 0 = busy),
//! STATUS 0x04 (bit 0 busy, bit 1 sticky error, write 1 to clear), LED_COUNT
//! 0x08, T0H 0x0C, T1H 0x10, TBIT 0x14, TRESET 0x18 (all in clock cycles),
//! and the frame buffer at 0x100 + 4*i holding 0xRRGGBB colors.
//!
//! Starting a frame snapshots the timing registers and the first LED_COUNT
//! colors. Emission begins on the following clock. Each color goes out as
//! G, R, B, most significant bit first; a bit slot is high for T0H or T1H
//! cycles and low for the rest of TBIT. After the last slot the line stays
//! low for TRESET cycles, then busy clears.

use crate::obi::{BusError, BusRequest, DeviceCtx, Subordinate};
use crate::pins::{NeoFrameDone, Pin};

use super::{merge, ns_to_cycles};

pub const CTRL: u32 = 0x00;
pub const STATUS: u32 = 0x04;
pub const LED_COUNT: u32 = 0x08;
pub const T0H: u32 = 0x0C;
pub const T1H: u32 = 0x10;
pub const TBIT: u32 = 0x14;
pub const TRESET: u32 = 0x18;
pub const FB: u32 = 0x100;

pub const CTRL_START: u32 = 1 << 0;
pub const STATUS_BUSY: u32 = 1 << 0;
pub const STATUS_ERR: u32 = 1 << 1;

pub const MAX_LEDS: usize = 64;
/// Size of the register window in bytes.
pub const WINDOW: u32 = FB + 4 * MAX_LEDS as u32;

/// Pulse timing in clock cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeoTiming {
    pub t0h: u32,
    pub t1h: u32,
    pub tbit: u32,
    pub treset: u32,
}

impl NeoTiming {
    /// 0.35 / 0.70 / 1.25 us bit timing and a 50 us reset gap.
    pub fn ws2812(clk_hz: u64) -> Self {
        NeoTiming {
            t0h: ns_to_cycles(350, clk_hz),
            t1h: ns_to_cycles(700, clk_hz),
            tbit: ns_to_cycles(1250, clk_hz),
            treset: ns_to_cycles(50_000, clk_hz),
        }
    }

    /// `1 <= t0h < t1h < tbit` and a non-empty reset gap.
    pub fn is_valid(&self) -> bool {
        1 <= self.t0h && self.t0h < self.t1h && self.t1h < self.tbit && self.treset >= 1
    }
}

/// Wire bits for a list of 0xRRGGBB colors: G, R, B, MSB first.
pub fn wire_bits(colors: &[u32]) -> Vec<bool> {
    let mut bits = Vec::with_capacity(colors.len() * 24);
    for &c in colors {
        let grb = ((c >> 8) & 0xFF) << 16 | ((c >> 16) & 0xFF) << 8 | (c & 0xFF);
        bits.extend((0..24).rev().map(|i| grb & (1 << i) != 0));
    }
    bits
}

#[derive(Debug, Clone)]
struct Frame {
    timing: NeoTiming,
    bits: Vec<bool>,
    led_count: usize,
    /// First emission cycle; set on the first tick after the start write.
    start: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct NeoPixel {
    clk_hz: u64,
    timing: NeoTiming,
    led_count: u32,
    fb: [u32; MAX_LEDS],
    err: bool,
    frame: Option<Frame>,
    level: bool,
}

impl NeoPixel {
    pub fn new(clk_hz: u64) -> Self {
        NeoPixel {
            clk_hz,
            timing: NeoTiming::ws2812(clk_hz),
            led_count: 0,
            fb: [0; MAX_LEDS],
            err: false,
            frame: None,
            level: false,
        }
    }

    pub fn busy(&self) -> bool {
        self.frame.is_some()
    }

    pub fn err(&self) -> bool {
        self.err
    }

    pub fn timing(&self) -> NeoTiming {
        self.timing
    }

    pub fn led_count(&self) -> u32 {
        self.led_count
    }

    pub fn framebuffer(&self) -> &[u32; MAX_LEDS] {
        &self.fb
    }

    fn start(&mut self) {
        if self.busy() || !self.timing.is_valid() {
            self.err = true;
            return;
        }
        let n = self.led_count as usize;
        self.frame = Some(Frame {
            timing: self.timing,
            bits: wire_bits(&self.fb[..n]),
            led_count: n,
            start: None,
        });
    }

    /// Register access by offset.
    pub fn neopixel_mmio(&mut self, offset: u32, req: &BusRequest) -> Result<u32, BusError> {
        if offset >= WINDOW {
            return Err(BusError);
        }
        if offset >= FB {
            let i = ((offset - FB) / 4) as usize;
            if req.we {
                if self.busy() {
                    self.err = true;
                } else {
                    self.fb[i] = merge(self.fb[i], req.wdata, req.be) & 0x00FF_FFFF;
                }
                return Ok(0);
            }
            return Ok(self.fb[i]);
        }
        if req.we {
            let w = |old: u32| merge(old, req.wdata, req.be);
            match offset {
                CTRL => {
                    if w(0) & CTRL_START != 0 {
                        self.start();
                    }
                }
                STATUS => {
                    if w(0) & STATUS_ERR != 0 {
                        self.err = false;
                    }
                }
                LED_COUNT => self.led_count = w(self.led_count).min(MAX_LEDS as u32),
                T0H => self.timing.t0h = w(self.timing.t0h),
                T1H => self.timing.t1h = w(self.timing.t1h),
                TBIT => self.timing.tbit = w(self.timing.tbit),
                TRESET => self.timing.treset = w(self.timing.treset),
                _ => return Err(BusError),
            }
            Ok(0)
        } else {
            Ok(match offset {
                CTRL => self.busy() as u32,
                STATUS => (self.busy() as u32 * STATUS_BUSY) | (self.err as u32 * STATUS_ERR),
                LED_COUNT => self.led_count,
                T0H => self.timing.t0h,
                T1H => self.timing.t1h,
                TBIT => self.timing.tbit,
                TRESET => self.timing.treset,
                _ => return Err(BusError),
            })
        }
    }

    fn set_level(&mut self, ctx: &mut DeviceCtx<'_>, level: bool) {
        if level != self.level {
            self.level = level;
            ctx.events.pin(ctx.cycle, Pin::Neo, level);
        }
    }

    /// One clock cycle of waveform generation.
    pub fn neopixel_tick(&mut self, ctx: &mut DeviceCtx<'_>) {
        let Some(frame) = &mut self.frame else { return };
        let start = *frame.start.get_or_insert(ctx.cycle);
        let t = ctx.cycle - start;
        let tm = frame.timing;
        let bits_len = frame.bits.len() as u64 * tm.tbit as u64;
        if t < bits_len {
            let slot = (t / tm.tbit as u64) as usize;
            let phase = (t % tm.tbit as u64) as u32;
            let high = if frame.bits[slot] { tm.t1h } else { tm.t0h };
            let level = phase < high;
            self.set_level(ctx, level);
            return;
        }
        self.set_level(ctx, false);
        if t >= bits_len + tm.treset as u64 {
            let frame = self.frame.take().unwrap();
            ctx.events.neo_frames.push(NeoFrameDone {
                start_cycle: start,
                bits_end_cycle: start + bits_len,
                done_cycle: ctx.cycle,
                led_count: frame.led_count,
                t0h: tm.t0h,
                t1h: tm.t1h,
                tbit: tm.tbit,
                treset: tm.treset,
            });
        }
    }
}

impl Subordinate for NeoPixel {
    fn access(&mut self, offset: u32, req: &BusRequest, _ctx: &mut DeviceCtx<'_>) -> Result<u32, BusError> {
        self.neopixel_mmio(offset, req)
    }

    fn tick(&mut self, ctx: &mut DeviceCtx<'_>) {
        self.neopixel_tick(ctx);
    }

    fn reset(&mut self, _cold: bool) {
        *self = NeoPixel::new(self.clk_hz);
    }
}

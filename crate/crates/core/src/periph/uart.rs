//! 8N1 UART with 8-deep TX/RX FIFOs.
//!
//! Register map (byte offsets): TXDATA 0x00, RXDATA 0x04, STATUS 0x08,
//! CTRL 0x0C, BAUDDIV 0x10. The TX pin idles high; every level change is
//! reported as a [`PinEvent`](crate::pins::PinEvent), so runs of equal bits
//! coalesce into one pulse.
//!
//! The RX side samples the `uart_rx` pin at mid-bit. Host-injected bytes are
//! serialized onto that pin by a built-in line driver at the current divisor.

use std::collections::VecDeque;

use crate::isa::InterruptLines;
use crate::obi::{BusError, BusRequest, DeviceCtx, Subordinate};
use crate::pins::Pin;

pub const TXDATA: u32 = 0x00;
pub const RXDATA: u32 = 0x04;
pub const STATUS: u32 = 0x08;
pub const CTRL: u32 = 0x0C;
pub const BAUDDIV: u32 = 0x10;

pub const STATUS_TX_EMPTY: u32 = 1 << 0;
pub const STATUS_TX_FULL: u32 = 1 << 1;
pub const STATUS_RX_AVAIL: u32 = 1 << 2;
pub const STATUS_RX_OVERFLOW: u32 = 1 << 3;
pub const STATUS_RX_UNDERFLOW: u32 = 1 << 4;
pub const STATUS_RX_FRAMING: u32 = 1 << 5;
pub const STATUS_TX_OVERFLOW: u32 = 1 << 6;
const STICKY: u32 = STATUS_RX_OVERFLOW | STATUS_RX_UNDERFLOW | STATUS_RX_FRAMING | STATUS_TX_OVERFLOW;

pub const CTRL_TX_EN: u32 = 1 << 0;
pub const CTRL_RX_EN: u32 = 1 << 1;
/// Drive the external interrupt line while RX data is available.
pub const CTRL_RX_IRQ: u32 = 1 << 2;

pub const FIFO_DEPTH: usize = 8;
pub const MIN_DIV: u32 = 4;
pub const DEFAULT_BAUD: u64 = 115_200;

/// Nearest integer divisor for `baud` at `clk_hz`, never below [`MIN_DIV`].
pub fn divisor_for(clk_hz: u64, baud: u64) -> u32 {
    (((clk_hz + baud / 2) / baud) as u32).max(MIN_DIV)
}

/// The 10 line levels of an 8N1 frame: start, 8 data bits LSB first, stop.
pub fn frame_bits(byte: u8) -> [bool; 10] {
    let mut bits = [true; 10];
    bits[0] = false;
    for (i, b) in bits[1..9].iter_mut().enumerate() {
        *b = byte & (1 << i) != 0;
    }
    bits
}

#[derive(Debug, Clone, Default)]
struct Shifter {
    active: bool,
    bits: [bool; 10],
    byte: u8,
    bit: usize,
    remaining: u32,
    div: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RxState {
    Idle,
    Receiving {
        start: u64,
        bit: u32,
        data: u8,
    },
    /// Stop bit was low; wait for the line to return high.
    Break,
}

#[derive(Debug, Clone)]
pub struct Uart {
    clk_hz: u64,
    baud_div: u32,
    ctrl: u32,
    sticky: u32,
    tx_fifo: VecDeque<u8>,
    rx_fifo: VecDeque<u8>,
    tx: Shifter,
    tx_level: bool,
    rx_level: bool,
    rx_state: RxState,
    /// Host-side line driver feeding the RX pin: queued line levels, each
    /// held for one bit time.
    rx_driver: VecDeque<bool>,
    rx_drive: Option<(bool, u32)>,
}

impl Uart {
    pub fn new(clk_hz: u64) -> Self {
        Uart {
            clk_hz,
            baud_div: divisor_for(clk_hz, DEFAULT_BAUD),
            ctrl: CTRL_TX_EN | CTRL_RX_EN,
            sticky: 0,
            tx_fifo: VecDeque::with_capacity(FIFO_DEPTH),
            rx_fifo: VecDeque::with_capacity(FIFO_DEPTH),
            tx: Shifter::default(),
            tx_level: true,
            rx_level: true,
            rx_state: RxState::Idle,
            rx_driver: VecDeque::new(),
            rx_drive: None,
        }
    }

    pub fn baud_div(&self) -> u32 {
        self.baud_div
    }

    pub fn status(&self) -> u32 {
        let mut s = self.sticky;
        if self.tx_fifo.is_empty() && !self.tx.active {
            s |= STATUS_TX_EMPTY;
        }
        if self.tx_fifo.len() == FIFO_DEPTH {
            s |= STATUS_TX_FULL;
        }
        if !self.rx_fifo.is_empty() {
            s |= STATUS_RX_AVAIL;
        }
        s
    }

    pub fn tx_fifo_len(&self) -> usize {
        self.tx_fifo.len()
    }

    pub fn rx_fifo_len(&self) -> usize {
        self.rx_fifo.len()
    }

    /// Whether the TX side has nothing left to send.
    pub fn tx_idle(&self) -> bool {
        self.tx_fifo.is_empty() && !self.tx.active
    }

    /// Queue bytes for the host RX line driver.
    pub fn inject_rx(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.rx_driver.extend(frame_bits(b));
        }
    }

    /// Queue an arbitrary 10-bit frame (e.g. with a low stop bit). A frame
    /// ending low is followed by one idle-high bit time.
    pub fn inject_rx_frame(&mut self, bits: [bool; 10]) {
        self.rx_driver.extend(bits);
        if !bits[9] {
            self.rx_driver.push_back(true);
        }
    }

    /// Whether the host driver still has frames to put on the wire.
    pub fn rx_driver_busy(&self) -> bool {
        self.rx_drive.is_some() || !self.rx_driver.is_empty()
    }

    /// Register access by offset.
    pub fn uart_mmio(&mut self, offset: u32, req: &BusRequest) -> Result<u32, BusError> {
        if req.we {
            match offset {
                TXDATA => {
                    if req.be & 1 != 0 {
                        if self.tx_fifo.len() < FIFO_DEPTH {
                            self.tx_fifo.push_back(req.wdata as u8);
                        } else {
                            self.sticky |= STATUS_TX_OVERFLOW;
                        }
                    }
                }
                RXDATA => {}
                STATUS => self.sticky &= !(req.wdata & STICKY),
                CTRL => self.ctrl = req.wdata & (CTRL_TX_EN | CTRL_RX_EN | CTRL_RX_IRQ),
                BAUDDIV => self.baud_div = req.wdata.max(MIN_DIV),
                _ => return Err(BusError),
            }
            Ok(0)
        } else {
            Ok(match offset {
                TXDATA => 0,
                RXDATA => match self.rx_fifo.pop_front() {
                    Some(b) => b as u32,
                    None => {
                        self.sticky |= STATUS_RX_UNDERFLOW;
                        0
                    }
                },
                STATUS => self.status(),
                CTRL => self.ctrl,
                BAUDDIV => self.baud_div,
                _ => return Err(BusError),
            })
        }
    }

    fn tick_tx(&mut self, ctx: &mut DeviceCtx<'_>) {
        if self.tx.active {
            self.tx.remaining -= 1;
            if self.tx.remaining == 0 {
                self.tx.bit += 1;
                if self.tx.bit == 10 {
                    self.tx.active = false;
                    ctx.events.uart_tx.push((ctx.cycle, self.tx.byte));
                } else {
                    self.tx.remaining = self.tx.div;
                    let level = self.tx.bits[self.tx.bit];
                    self.set_tx(ctx, level);
                }
            }
        }
        if !self.tx.active && self.ctrl & CTRL_TX_EN != 0 {
            if let Some(byte) = self.tx_fifo.pop_front() {
                self.tx = Shifter {
                    active: true,
                    bits: frame_bits(byte),
                    byte,
                    bit: 0,
                    remaining: self.baud_div,
                    div: self.baud_div,
                };
                self.set_tx(ctx, false);
            }
        }
    }

    fn set_tx(&mut self, ctx: &mut DeviceCtx<'_>, level: bool) {
        if level != self.tx_level {
            self.tx_level = level;
            ctx.events.pin(ctx.cycle, Pin::UartTx, level);
        }
    }

    fn set_rx(&mut self, ctx: &mut DeviceCtx<'_>, level: bool) {
        if level != self.rx_level {
            self.rx_level = level;
            ctx.events.pin(ctx.cycle, Pin::UartRx, level);
        }
    }

    fn tick_rx_driver(&mut self, ctx: &mut DeviceCtx<'_>) {
        if let Some((_, remaining)) = &mut self.rx_drive {
            *remaining -= 1;
            if *remaining == 0 {
                self.rx_drive = None;
            }
        }
        if self.rx_drive.is_none() {
            match self.rx_driver.pop_front() {
                Some(level) => {
                    self.rx_drive = Some((level, self.baud_div));
                    self.set_rx(ctx, level);
                }
                None => self.set_rx(ctx, true),
            }
        }
    }

    fn tick_rx(&mut self, ctx: &mut DeviceCtx<'_>) {
        let line = self.rx_level;
        let div = self.baud_div as u64;
        match self.rx_state {
            RxState::Idle => {
                if !line && self.ctrl & CTRL_RX_EN != 0 {
                    self.rx_state = RxState::Receiving {
                        start: ctx.cycle,
                        bit: 0,
                        data: 0,
                    };
                }
            }
            RxState::Receiving { start, bit, data } => {
                let sample_at = start + div / 2 + bit as u64 * div;
                if ctx.cycle != sample_at {
                    return;
                }
                self.rx_state = match bit {
                    // false start: glitch shorter than half a bit
                    0 if line => RxState::Idle,
                    1..=8 => RxState::Receiving {
                        start,
                        bit: bit + 1,
                        data: data | ((line as u8) << (bit - 1)),
                    },
                    9 => {
                        if line {
                            if self.rx_fifo.len() < FIFO_DEPTH {
                                self.rx_fifo.push_back(data);
                            } else {
                                self.sticky |= STATUS_RX_OVERFLOW;
                            }
                            RxState::Idle
                        } else {
                            self.sticky |= STATUS_RX_FRAMING;
                            RxState::Break
                        }
                    }
                    _ => RxState::Receiving {
                        start,
                        bit: bit + 1,
                        data,
                    },
                };
            }
            RxState::Break => {
                if line {
                    self.rx_state = RxState::Idle;
                }
            }
        }
    }

    /// One clock cycle: host RX driver, receiver, transmitter.
    pub fn uart_tick(&mut self, ctx: &mut DeviceCtx<'_>) {
        self.tick_rx_driver(ctx);
        self.tick_rx(ctx);
        self.tick_tx(ctx);
    }
}

impl Subordinate for Uart {
    fn access(&mut self, offset: u32, req: &BusRequest, _ctx: &mut DeviceCtx<'_>) -> Result<u32, BusError> {
        self.uart_mmio(offset, req)
    }

    fn tick(&mut self, ctx: &mut DeviceCtx<'_>) {
        self.uart_tick(ctx);
    }

    fn irq(&self) -> InterruptLines {
        InterruptLines {
            timer: false,
            external: self.ctrl & CTRL_RX_IRQ != 0 && !self.rx_fifo.is_empty(),
        }
    }

    fn reset(&mut self, _cold: bool) {
        *self = Uart::new(self.clk_hz);
    }
}

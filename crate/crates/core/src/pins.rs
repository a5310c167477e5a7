//! Timestamped pad activity produced by the peripherals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A named chip pad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pin {
    Gpio(u8),
    UartTx,
    UartRx,
    Neo,
}

impl fmt::Display for Pin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pin::Gpio(n) => write!(f, "gpio{n}"),
            Pin::UartTx => f.write_str("uart_tx"),
            Pin::UartRx => f.write_str("uart_rx"),
            Pin::Neo => f.write_str("neo"),
        }
    }
}

impl FromStr for Pin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uart_tx" => Ok(Pin::UartTx),
            "uart_rx" => Ok(Pin::UartRx),
            "neo" => Ok(Pin::Neo),
            _ => s
                .strip_prefix("gpio")
                .and_then(|n| n.parse().ok())
                .map(Pin::Gpio)
                .ok_or_else(|| format!("unknown pin `{s}`")),
        }
    }
}

impl Serialize for Pin {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Pin {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A digital edge on a pad.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PinEvent {
    pub cycle: u64,
    pub time_ns: u64,
    pub pin: Pin,
    pub level: bool,
}

/// Nanoseconds elapsed after `cycle` clock periods at `clk_hz`, rounded down.
pub fn cycles_to_ns(cycle: u64, clk_hz: u64) -> u64 {
    ((cycle as u128 * 1_000_000_000) / clk_hz.max(1) as u128) as u64
}

/// A NeoPixel frame that finished transmitting, including its reset gap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeoFrameDone {
    pub start_cycle: u64,
    /// First cycle after the last bit slot.
    pub bits_end_cycle: u64,
    /// Cycle at which busy cleared (end of the reset gap).
    pub done_cycle: u64,
    pub led_count: usize,
    pub t0h: u32,
    pub t1h: u32,
    pub tbit: u32,
    pub treset: u32,
}

/// Everything the devices reported since the last drain.
#[derive(Debug, Clone, Default)]
pub struct DeviceEvents {
    clk_hz: u64,
    pub pins: Vec<PinEvent>,
    /// (cycle the stop bit completed, byte)
    pub uart_tx: Vec<(u64, u8)>,
    pub neo_frames: Vec<NeoFrameDone>,
}

impl DeviceEvents {
    pub fn new(clk_hz: u64) -> Self {
        DeviceEvents {
            clk_hz,
            ..Default::default()
        }
    }

    pub fn clk_hz(&self) -> u64 {
        self.clk_hz
    }

    pub fn pin(&mut self, cycle: u64, pin: Pin, level: bool) {
        self.pins.push(PinEvent {
            cycle,
            time_ns: cycles_to_ns(cycle, self.clk_hz),
            pin,
            level,
        });
    }

    pub fn is_empty(&self) -> bool {
        self.pins.is_empty() && self.uart_tx.is_empty() && self.neo_frames.is_empty()
    }

    pub fn clear(&mut self) {
        self.pins.clear();
        self.uart_tx.clear();
        self.neo_frames.clear();
    }

    /// Move everything out, leaving the buffers empty.
    pub fn drain(&mut self) -> DeviceEvents {
        DeviceEvents {
            clk_hz: self.clk_hz,
            pins: std::mem::take(&mut self.pins),
            uart_tx: std::mem::take(&mut self.uart_tx),
            neo_frames: std::mem::take(&mut self.neo_frames),
        }
    }
}

//! Memory-mapped peripherals of the Croc domain plus the MLEM additions.

pub mod gpio;
pub mod neopixel;
pub mod timer;
pub mod uart;
pub mod waveform;

pub use gpio::Gpio;
pub use neopixel::{NeoPixel, NeoTiming};
pub use timer::Timer;
pub use uart::Uart;

/// Read-modify-write of a 32-bit register from a byte-enabled write.
pub(crate) fn merge(old: u32, wdata: u32, be: u8) -> u32 {
    let mut mask = 0u32;
    for lane in 0..4 {
        if be & (1 << lane) != 0 {
            mask |= 0xFF << (8 * lane);
        }
    }
    (old & !mask) | (wdata & mask)
}

/// `clk_hz * ns / 1e9`, rounded to nearest.
pub(crate) fn ns_to_cycles(ns: u64, clk_hz: u64) -> u32 {
    ((clk_hz as u128 * ns as u128 + 500_000_000) / 1_000_000_000) as u32
}

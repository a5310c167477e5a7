//! Demo firmware for the MLEM board.
//!
//! Prints a greeting, lights a two-LED strip, then loops forever: GPIO
//! inputs 13..=25 are mirrored onto outputs 0..=12, and every byte received
//! on the UART is echoed back and shown as a grey level on the first LED.

use crate::asm::Asm;
use crate::isa::Op;
use crate::loader::{FirmwareImage, Segment};
use crate::periph::{gpio, neopixel, uart};
use crate::soc::SocConfig;

pub const GREETING: &[u8] = b"croc\n";

/// First GPIO input mirrored to output 0.
pub const MIRROR_SHIFT: u32 = 13;

const S0: u8 = 8;
const S1: u8 = 9;
const S2: u8 = 18;
const A0: u8 = 10;
const T0: u8 = 5;
const T1: u8 = 6;
const T2: u8 = 7;
const T3: u8 = 28;
const T4: u8 = 29;

pub fn demo_asm(config: &SocConfig) -> Asm {
    let neo = config.neopixel_base.unwrap_or(0);
    let mut a = Asm::new(config.reset_pc);
    a.li(S0, config.uart_base).li(S1, config.gpio_base).li(S2, neo);
    a.li(T0, (1 << MIRROR_SHIFT) - 1).s(Op::Sw, T0, S1, gpio::DIR as i32);

    a.la(A0, "msg");
    a.label("greet")
        .i(Op::Lbu, T1, A0, 0)
        .branch(Op::Beq, T1, 0, "greet_done");
    a.label("wait_tx")
        .i(Op::Lw, T2, S0, uart::STATUS as i32)
        .i(Op::Andi, T2, T2, uart::STATUS_TX_FULL as i32)
        .branch(Op::Bne, T2, 0, "wait_tx")
        .s(Op::Sw, T1, S0, uart::TXDATA as i32)
        .i(Op::Addi, A0, A0, 1)
        .j("greet");
    a.label("greet_done");

    if config.neopixel_base.is_some() {
        a.li(T0, 0x00FF00).s(Op::Sw, T0, S2, neopixel::FB as i32);
        a.li(T0, 0xFF0000).s(Op::Sw, T0, S2, neopixel::FB as i32 + 4);
        a.i(Op::Addi, T0, 0, 2).s(Op::Sw, T0, S2, neopixel::LED_COUNT as i32);
        a.i(Op::Addi, T0, 0, 1).s(Op::Sw, T0, S2, neopixel::CTRL as i32);
    }

    a.label("loop")
        .i(Op::Lw, T0, S1, gpio::IN as i32)
        .i(Op::Srli, T0, T0, MIRROR_SHIFT as i32)
        .s(Op::Sw, T0, S1, gpio::OUT as i32)
        .i(Op::Lw, T1, S0, uart::STATUS as i32)
        .i(Op::Andi, T1, T1, uart::STATUS_RX_AVAIL as i32)
        .branch(Op::Beq, T1, 0, "loop")
        .i(Op::Lw, T2, S0, uart::RXDATA as i32)
        .s(Op::Sw, T2, S0, uart::TXDATA as i32);
    if config.neopixel_base.is_some() {
        a.li(T4, 0x01_01_01)
            .r(Op::Mul, T3, T2, T4)
            .i(Op::Lw, T1, S2, neopixel::STATUS as i32)
            .i(Op::Andi, T1, T1, neopixel::STATUS_BUSY as i32)
            .branch(Op::Bne, T1, 0, "loop")
            .s(Op::Sw, T3, S2, neopixel::FB as i32)
            .i(Op::Addi, T0, 0, 1)
            .s(Op::Sw, T0, S2, neopixel::LED_COUNT as i32)
            .s(Op::Sw, T0, S2, neopixel::CTRL as i32);
    }
    a.j("loop");

    a.label("msg").bytes(GREETING).bytes(&[0]);
    a
}

/// The demo as a loadable image.
pub fn demo_image(config: &SocConfig) -> FirmwareImage {
    let code = demo_asm(config).finish().expect("demo firmware assembles");
    FirmwareImage {
        segments: vec![Segment {
            addr: config.reset_pc,
            data: code,
        }],
        entry: config.reset_pc,
    }
}

//! Cycle-accounted emulator of the Croc RISC-V microcontroller and its MLEM
//! board configuration.
//!
//! A [`soc::Soc`] ties an RV32IMC core ([`cpu`]) to SRAM and peripherals
//! over the OBI fabric ([`obi`]). Firmware comes in through [`loader`];
//! [`trace`] turns execution into trace lines, pin CSV and digests; and
//! [`control`] exposes the running platform to remote clients.

pub mod asm;
pub mod batch;
pub mod control;
pub mod cpu;
pub mod demo;
pub mod functional;
pub mod isa;
pub mod loader;
pub mod memory;
pub mod obi;
pub mod periph;
pub mod pins;
pub mod soc;
pub mod trace;

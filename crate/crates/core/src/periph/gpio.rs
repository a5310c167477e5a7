//! General-purpose I/O bank: DIR 0x00 (1 = output), OUT 0x04, IN 0x08.

use thiserror::Error;

use crate::obi::{BusError, BusRequest, DeviceCtx, Subordinate};
use crate::pins::{DeviceEvents, Pin};

use super::merge;

pub const DIR: u32 = 0x00;
pub const OUT: u32 = 0x04;
pub const IN: u32 = 0x08;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("gpio pin {pin} out of range (bank has {count} pins)")]
pub struct PinRangeError {
    pub pin: u32,
    pub count: u8,
}

#[derive(Debug, Clone)]
pub struct Gpio {
    count: u8,
    dir: u32,
    out: u32,
    input: u32,
    /// Last level reported per pin, so output events alternate.
    reported: u32,
}

impl Gpio {
    /// A bank of `count` pins (at most 32).
    pub fn new(count: u8) -> Self {
        assert!(count <= 32, "a GPIO bank has at most 32 pins");
        Gpio {
            count,
            dir: 0,
            out: 0,
            input: 0,
            reported: 0,
        }
    }

    pub fn count(&self) -> u8 {
        self.count
    }

    fn mask(&self) -> u32 {
        if self.count == 32 {
            u32::MAX
        } else {
            (1u32 << self.count) - 1
        }
    }

    pub fn dir(&self) -> u32 {
        self.dir
    }

    pub fn out(&self) -> u32 {
        self.out
    }

    pub fn input(&self) -> u32 {
        self.input
    }

    /// Level currently driven on each output pin (inputs read as 0).
    pub fn driven(&self) -> u32 {
        self.dir & self.out
    }

    /// Host side: set the external level seen on an input pin.
    pub fn gpio_set_input(&mut self, pin: u32, level: bool) -> Result<(), PinRangeError> {
        if pin >= self.count as u32 {
            return Err(PinRangeError { pin, count: self.count });
        }
        if level {
            self.input |= 1 << pin;
        } else {
            self.input &= !(1 << pin);
        }
        Ok(())
    }

    fn emit_changes(&mut self, cycle: u64, events: &mut DeviceEvents) {
        let changed = (self.driven() ^ self.reported) & self.dir;
        for pin in 0..self.count {
            if changed & (1 << pin) != 0 {
                let level = self.out & (1 << pin) != 0;
                events.pin(cycle, Pin::Gpio(pin), level);
                self.reported ^= 1 << pin;
            }
        }
    }

    /// Register access by offset. Bits above the pin count read as zero and
    /// ignore writes; IN is read-only.
    pub fn gpio_mmio(
        &mut self,
        offset: u32,
        req: &BusRequest,
        cycle: u64,
        events: &mut DeviceEvents,
    ) -> Result<u32, BusError> {
        let mask = self.mask();
        if req.we {
            match offset {
                DIR => self.dir = merge(self.dir, req.wdata, req.be) & mask,
                OUT => self.out = merge(self.out, req.wdata, req.be) & mask,
                IN => {}
                _ => return Err(BusError),
            }
            self.emit_changes(cycle, events);
            Ok(0)
        } else {
            match offset {
                DIR => Ok(self.dir),
                OUT => Ok(self.out),
                IN => Ok(self.input & mask),
                _ => Err(BusError),
            }
        }
    }
}

impl Subordinate for Gpio {
    fn access(&mut self, offset: u32, req: &BusRequest, ctx: &mut DeviceCtx<'_>) -> Result<u32, BusError> {
        self.gpio_mmio(offset, req, ctx.cycle, ctx.events)
    }

    fn reset(&mut self, _cold: bool) {
        *self = Gpio::new(self.count);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(g: &mut Gpio, ev: &mut DeviceEvents, cycle: u64, offset: u32, value: u32) {
        g.gpio_mmio(offset, &BusRequest::write(offset, 0xF, value), cycle, ev)
            .unwrap();
    }

    fn read(g: &mut Gpio, offset: u32) -> u32 {
        let mut ev = DeviceEvents::new(1);
        g.gpio_mmio(offset, &BusRequest::read(offset), 0, &mut ev).unwrap()
    }

    #[test]
    fn output_pin_emits_event() {
        let mut g = Gpio::new(26);
        let mut ev = DeviceEvents::new(20_000_000);
        write(&mut g, &mut ev, 10, DIR, 1 << 3);
        assert!(ev.pins.is_empty());
        write(&mut g, &mut ev, 11, OUT, 1 << 3);
        assert_eq!(ev.pins.len(), 1);
        assert_eq!(ev.pins[0].pin, Pin::Gpio(3));
        assert!(ev.pins[0].level);
        assert_eq!(ev.pins[0].cycle, 11);
    }

    #[test]
    fn input_level_visible_in_in_register() {
        let mut g = Gpio::new(26);
        g.gpio_set_input(5, true).unwrap();
        assert_eq!(read(&mut g, IN), 1 << 5);
    }

    #[test]
    fn latch_on_input_pin_waits_for_direction_flip() {
        let mut g = Gpio::new(26);
        let mut ev = DeviceEvents::new(20_000_000);
        write(&mut g, &mut ev, 1, OUT, 1 << 7);
        assert!(ev.pins.is_empty());
        assert_eq!(read(&mut g, OUT), 1 << 7);
        write(&mut g, &mut ev, 2, DIR, 1 << 7);
        assert_eq!(ev.pins.len(), 1);
        assert_eq!((ev.pins[0].cycle, ev.pins[0].level), (2, true));
    }

    #[test]
    fn pin_out_of_range() {
        let mut g = Gpio::new(26);
        assert_eq!(g.gpio_set_input(26, true), Err(PinRangeError { pin: 26, count: 26 }));
    }

    #[test]
    fn reserved_bits_read_zero() {
        let mut g = Gpio::new(26);
        let mut ev = DeviceEvents::new(20_000_000);
        write(&mut g, &mut ev, 0, DIR, u32::MAX);
        assert_eq!(read(&mut g, DIR), (1 << 26) - 1);
    }

    #[test]
    fn events_alternate_per_pin() {
        let mut g = Gpio::new(26);
        let mut ev = DeviceEvents::new(20_000_000);
        write(&mut g, &mut ev, 0, DIR, 1);
        for (c, v) in [(1, 1), (2, 1), (3, 0), (4, 0), (5, 1)] {
            write(&mut g, &mut ev, c, OUT, v);
        }
        let levels: Vec<bool> = ev.pins.iter().map(|e| e.level).collect();
        assert_eq!(levels, vec![true, false, true]);
    }
}

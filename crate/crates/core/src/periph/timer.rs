//! Machine timer: 64-bit `mtime` counting clock cycles and `mtimecmp`.

use crate::isa::InterruptLines;
use crate::obi::{BusError, BusRequest, DeviceCtx, Subordinate};

use super::merge;

pub const MTIME_LO: u32 = 0x00;
pub const MTIME_HI: u32 = 0x04;
pub const MTIMECMP_LO: u32 = 0x08;
pub const MTIMECMP_HI: u32 = 0x0C;

#[derive(Debug, Clone)]
pub struct Timer {
    pub mtime: u64,
    pub mtimecmp: u64,
}

impl Default for Timer {
    fn default() -> Self {
        Timer {
            mtime: 0,
            mtimecmp: u64::MAX,
        }
    }
}

impl Timer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interrupt line level: `mtime >= mtimecmp`.
    pub fn level(&self) -> bool {
        self.mtime >= self.mtimecmp
    }

    /// One clock cycle.
    pub fn timer_tick(&mut self) -> bool {
        self.mtime = self.mtime.wrapping_add(1);
        self.level()
    }
}

fn set_half(value: &mut u64, hi: bool, wdata: u32, be: u8) {
    let shift = if hi { 32 } else { 0 };
    let old = (*value >> shift) as u32;
    let new = merge(old, wdata, be) as u64;
    *value = (*value & !(0xFFFF_FFFFu64 << shift)) | (new << shift);
}

impl Subordinate for Timer {
    fn access(&mut self, offset: u32, req: &BusRequest, _ctx: &mut DeviceCtx<'_>) -> Result<u32, BusError> {
        if req.we {
            match offset {
                MTIME_LO => set_half(&mut self.mtime, false, req.wdata, req.be),
                MTIME_HI => set_half(&mut self.mtime, true, req.wdata, req.be),
                MTIMECMP_LO => set_half(&mut self.mtimecmp, false, req.wdata, req.be),
                MTIMECMP_HI => set_half(&mut self.mtimecmp, true, req.wdata, req.be),
                _ => return Err(BusError),
            }
            Ok(0)
        } else {
            Ok(match offset {
                MTIME_LO => self.mtime as u32,
                MTIME_HI => (self.mtime >> 32) as u32,
                MTIMECMP_LO => self.mtimecmp as u32,
                MTIMECMP_HI => (self.mtimecmp >> 32) as u32,
                _ => return Err(BusError),
            })
        }
    }

    fn tick(&mut self, _ctx: &mut DeviceCtx<'_>) {
        self.timer_tick();
    }

    fn irq(&self) -> InterruptLines {
        InterruptLines {
            timer: self.level(),
            external: false,
        }
    }

    fn reset(&mut self, _cold: bool) {
        *self = Timer::default();
    }
}

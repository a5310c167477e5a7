//! OBI-style request/grant + response crossbar.
//!
//! Only the A channel (req/gnt) and R channel (rvalid) are modelled. Each
//! manager has at most one transaction in flight. A grant happens in the
//! cycle the request is arbitrated; the subordinate responds `latency`
//! cycles later (one cycle for the zero-wait SRAMs and peripherals).
//!
//! One call to [`Fabric::tick`] is one clock cycle, in this order:
//! subordinates tick, pending requests are arbitrated, granted and
//! forwarded, the clock advances, and responses due at the new cycle are
//! delivered.

use std::any::Any;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::isa::InterruptLines;
use crate::pins::DeviceEvents;

/// Bus managers, in fixed-priority order (highest first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Manager {
    /// Core load/store unit.
    Data = 0,
    /// Core instruction fetch.
    Instr = 1,
    /// User-domain manager port.
    User = 2,
}

impl Manager {
    pub const ALL: [Manager; 3] = [Manager::Data, Manager::Instr, Manager::User];

    pub fn name(self) -> &'static str {
        match self {
            Manager::Data => "data",
            Manager::Instr => "instr",
            Manager::User => "user",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Arbitration policy applied independently at every subordinate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arbitration {
    /// data > instr > user
    #[default]
    FixedPriority,
    RoundRobin,
}

/// Index of a subordinate port on the crossbar.
pub type PortId = usize;

/// A-channel payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BusRequest {
    pub addr: u32,
    pub we: bool,
    pub be: u8,
    pub wdata: u32,
}

impl BusRequest {
    pub fn read(addr: u32) -> Self {
        BusRequest {
            addr,
            we: false,
            be: 0xF,
            wdata: 0,
        }
    }

    pub fn write(addr: u32, be: u8, wdata: u32) -> Self {
        BusRequest {
            addr,
            we: true,
            be,
            wdata,
        }
    }
}

/// A completed bus transaction with its handshake timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObiTransaction {
    pub id: u64,
    pub manager: Manager,
    pub addr: u32,
    pub we: bool,
    pub be: u8,
    pub wdata: u32,
    pub issued_cycle: u64,
    pub granted_cycle: u64,
    pub response_cycle: u64,
    pub rdata: u32,
    pub err: bool,
}

impl ObiTransaction {
    /// Cycles beyond the ideal grant-now / respond-next-cycle handshake.
    pub fn wait_states(&self) -> u64 {
        self.response_cycle - self.issued_cycle - 1
    }

    /// One line of the optional transaction log.
    pub fn log_line(&self) -> String {
        format!(
            "cycle={} mgr={} addr=0x{:08x} we={} be=0x{:x} data=0x{:08x} err={}",
            self.response_cycle,
            self.manager.name(),
            self.addr,
            self.we as u8,
            self.be,
            if self.we { self.wdata } else { self.rdata },
            self.err as u8
        )
    }
}

/// Address decode rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressRule {
    pub base: u32,
    pub size: u32,
    pub target: PortId,
    pub name: String,
}

impl AddressRule {
    pub fn new(name: impl Into<String>, base: u32, size: u32) -> Self {
        AddressRule {
            base,
            size,
            target: 0,
            name: name.into(),
        }
    }

    fn end(&self) -> u64 {
        self.base as u64 + self.size as u64
    }

    pub fn contains(&self, addr: u32) -> bool {
        addr >= self.base && (addr as u64) < self.end()
    }

    fn overlaps(&self, other: &AddressRule) -> bool {
        (self.base as u64) < other.end() && (other.base as u64) < self.end()
    }
}

/// The unique rule containing `addr`, if any.
pub fn map_lookup(map: &[AddressRule], addr: u32) -> Option<PortId> {
    map.iter().find(|r| r.contains(addr)).map(|r| r.target)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FabricError {
    #[error("rule {name} at 0x{base:08x} (+0x{size:x}) overlaps an existing rule or is empty")]
    Overlap { name: String, base: u32, size: u32 },
    #[error("manager {0:?} already has a transaction in flight")]
    ManagerBusy(Manager),
    #[error("write request without byte enables")]
    EmptyByteEnable,
}

/// Error response from a subordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BusError;

/// Per-cycle context handed to subordinates.
pub struct DeviceCtx<'a> {
    pub cycle: u64,
    pub events: &'a mut DeviceEvents,
}

pub trait AsAny: Any {
    fn as_any(&self) -> &dyn Any;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

impl<T: Any> AsAny for T {
    fn as_any(&self) -> &dyn Any {
        self
    }
    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

/// Something that answers bus requests.
pub trait Subordinate: AsAny + Send {
    /// Serve one granted request. `offset` is relative to the rule base and
    /// word aligned. Returns read data (ignored for writes).
    fn access(&mut self, offset: u32, req: &BusRequest, ctx: &mut DeviceCtx<'_>) -> Result<u32, BusError>;

    /// Called once per clock cycle before arbitration.
    fn tick(&mut self, _ctx: &mut DeviceCtx<'_>) {}

    /// Interrupt request lines this device drives.
    fn irq(&self) -> InterruptLines {
        InterruptLines::default()
    }

    fn reset(&mut self, _cold: bool) {}

    /// Cycles from grant to response.
    fn latency(&self) -> u64 {
        1
    }
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    id: u64,
    req: BusRequest,
    issued: u64,
}

/// Where a request goes: a subordinate port, or the built-in error responder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    Port(PortId),
    Unmapped,
}

pub struct Fabric {
    now: u64,
    rules: Vec<AddressRule>,
    devices: Vec<Box<dyn Subordinate>>,
    policy: Arbitration,
    rr_last: Vec<Option<Manager>>,
    pending: [Option<Pending>; 3],
    inflight: [Option<ObiTransaction>; 3],
    completed: [Option<ObiTransaction>; 3],
    next_id: u64,
    events: DeviceEvents,
    log: Option<Vec<ObiTransaction>>,
}

impl fmt::Debug for Fabric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fabric")
            .field("now", &self.now)
            .field("rules", &self.rules)
            .field("policy", &self.policy)
            .finish_non_exhaustive()
    }
}

/// Responses delivered by one tick, at most one per manager.
#[derive(Debug, Clone, Copy, Default)]
pub struct Delivered(pub [Option<ObiTransaction>; 3]);

impl Delivered {
    pub fn get(&self, m: Manager) -> Option<&ObiTransaction> {
        self.0[m.index()].as_ref()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ObiTransaction> {
        self.0.iter().flatten()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(Option::is_none)
    }
}

impl Fabric {
    pub fn new(policy: Arbitration, clk_hz: u64) -> Self {
        Fabric {
            now: 0,
            rules: Vec::new(),
            devices: Vec::new(),
            policy,
            rr_last: Vec::new(),
            pending: [None; 3],
            inflight: [None; 3],
            completed: [None; 3],
            next_id: 0,
            events: DeviceEvents::new(clk_hz),
            log: None,
        }
    }

    /// Current cycle.
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn rules(&self) -> &[AddressRule] {
        &self.rules
    }

    /// Connect a subordinate behind `rule`. Rejects empty and overlapping rules.
    pub fn attach(&mut self, mut rule: AddressRule, device: Box<dyn Subordinate>) -> Result<PortId, FabricError> {
        if rule.size == 0 || rule.end() > 1 << 32 || self.rules.iter().any(|r| r.overlaps(&rule)) {
            return Err(FabricError::Overlap {
                name: rule.name,
                base: rule.base,
                size: rule.size,
            });
        }
        let port = self.devices.len();
        rule.target = port;
        self.devices.push(device);
        self.rr_last.push(None);
        let at = self.rules.partition_point(|r| r.base < rule.base);
        self.rules.insert(at, rule);
        Ok(port)
    }

    pub fn lookup(&self, addr: u32) -> Option<PortId> {
        map_lookup(&self.rules, addr)
    }

    pub fn rule_by_name(&self, name: &str) -> Option<&AddressRule> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn device(&self, port: PortId) -> &dyn Subordinate {
        self.devices[port].as_ref()
    }

    pub fn device_mut(&mut self, port: PortId) -> &mut dyn Subordinate {
        self.devices[port].as_mut()
    }

    /// Typed access to the first device of type `T`.
    pub fn find<T: Subordinate>(&self) -> Option<&T> {
        self.devices.iter().find_map(|d| (**d).as_any().downcast_ref::<T>())
    }

    pub fn find_mut<T: Subordinate>(&mut self) -> Option<&mut T> {
        self.devices
            .iter_mut()
            .find_map(|d| (**d).as_any_mut().downcast_mut::<T>())
    }

    /// Typed access to every device of type `T`.
    pub fn all_mut<T: Subordinate>(&mut self) -> impl Iterator<Item = &mut T> {
        self.devices
            .iter_mut()
            .filter_map(|d| (**d).as_any_mut().downcast_mut::<T>())
    }

    pub fn all<T: Subordinate>(&self) -> impl Iterator<Item = &T> {
        self.devices.iter().filter_map(|d| (**d).as_any().downcast_ref::<T>())
    }

    /// Device events (pin edges, UART bytes, ...) accumulated so far.
    pub fn events(&self) -> &DeviceEvents {
        &self.events
    }

    pub fn events_mut(&mut self) -> &mut DeviceEvents {
        &mut self.events
    }

    /// Run `f` against a device together with an event context at the
    /// current cycle. Used for host-side stimulus.
    pub fn with_device<T: Subordinate, R>(&mut self, f: impl FnOnce(&mut T, &mut DeviceCtx<'_>) -> R) -> Option<R> {
        let cycle = self.now;
        let events = &mut self.events;
        let dev = self
            .devices
            .iter_mut()
            .find_map(|d| (**d).as_any_mut().downcast_mut::<T>())?;
        let mut ctx = DeviceCtx { cycle, events };
        Some(f(dev, &mut ctx))
    }

    /// Wired-OR of all device interrupt lines.
    pub fn irq_lines(&self) -> InterruptLines {
        self.devices.iter().fold(InterruptLines::default(), |acc, d| {
            let l = d.irq();
            InterruptLines {
                timer: acc.timer || l.timer,
                external: acc.external || l.external,
            }
        })
    }

    /// Start recording every completed transaction.
    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn take_log(&mut self) -> Vec<ObiTransaction> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Whether `m` can issue a new request this cycle.
    pub fn is_idle(&self, m: Manager) -> bool {
        self.pending[m.index()].is_none() && self.inflight[m.index()].is_none()
    }

    /// Present a request on manager `m`'s A channel. It is arbitrated on the
    /// next [`tick`](Self::tick).
    pub fn issue(&mut self, m: Manager, req: BusRequest) -> Result<u64, FabricError> {
        if !self.is_idle(m) {
            return Err(FabricError::ManagerBusy(m));
        }
        if req.we && req.be & 0xF == 0 {
            return Err(FabricError::EmptyByteEnable);
        }
        let id = self.next_id;
        self.next_id += 1;
        self.pending[m.index()] = Some(Pending {
            id,
            req,
            issued: self.now,
        });
        Ok(id)
    }

    /// Take the most recent response delivered to `m`.
    pub fn take_response(&mut self, m: Manager) -> Option<ObiTransaction> {
        self.completed[m.index()].take()
    }

    fn route(&self, addr: u32) -> Route {
        match self.lookup(addr) {
            Some(p) => Route::Port(p),
            None => Route::Unmapped,
        }
    }

    fn pick(&self, route: Route, contenders: &[Manager]) -> Manager {
        match (self.policy, route) {
            (Arbitration::RoundRobin, Route::Port(p)) => {
                let last = self.rr_last[p].map(|m| m.index()).unwrap_or(Manager::ALL.len() - 1);
                (1..=Manager::ALL.len())
                    .map(|k| Manager::ALL[(last + k) % Manager::ALL.len()])
                    .find(|m| contenders.contains(m))
                    .expect("at least one contender")
            }
            _ => *contenders.iter().min().expect("at least one contender"),
        }
    }

    /// Advance one clock cycle. Returns the responses that became valid at
    /// the new cycle.
    pub fn tick(&mut self) -> Delivered {
        let cycle = self.now;
        for dev in &mut self.devices {
            let mut ctx = DeviceCtx {
                cycle,
                events: &mut self.events,
            };
            dev.tick(&mut ctx);
        }

        // Arbitrate: one grant per subordinate per cycle. The error
        // responder behind unmapped addresses accepts everything.
        let mut routes: [Option<Route>; 3] = [None; 3];
        for m in Manager::ALL {
            if let Some(p) = &self.pending[m.index()] {
                routes[m.index()] = Some(self.route(p.req.addr));
            }
        }
        let mut granted = [false; 3];
        for m in Manager::ALL {
            let Some(route) = routes[m.index()] else { continue };
            if granted[m.index()] {
                continue;
            }
            let winner = if route == Route::Unmapped {
                m
            } else {
                let contenders: Vec<Manager> = Manager::ALL
                    .into_iter()
                    .filter(|c| routes[c.index()] == Some(route))
                    .collect();
                let w = self.pick(route, &contenders);
                for c in contenders {
                    // losers are marked so they are not reconsidered this cycle
                    granted[c.index()] = true;
                }
                w
            };
            granted[winner.index()] = true;
            self.grant(winner, route);
        }

        self.now += 1;
        let mut out = Delivered::default();
        for m in Manager::ALL {
            let due = matches!(&self.inflight[m.index()], Some(t) if t.response_cycle <= self.now);
            if due {
                let t = self.inflight[m.index()].take().unwrap();
                if let Some(log) = &mut self.log {
                    log.push(t);
                }
                self.completed[m.index()] = Some(t);
                out.0[m.index()] = Some(t);
            }
        }
        out
    }

    fn grant(&mut self, m: Manager, route: Route) {
        let p = self.pending[m.index()].take().expect("granted manager has a request");
        let now = self.now;
        let (result, latency) = match route {
            Route::Unmapped => (Err(BusError), 1),
            Route::Port(port) => {
                self.rr_last[port] = Some(m);
                let base = self
                    .rules
                    .iter()
                    .find(|r| r.target == port)
                    .map(|r| r.base)
                    .unwrap_or(0);
                let aligned = BusRequest {
                    addr: p.req.addr & !3,
                    ..p.req
                };
                let dev = &mut self.devices[port];
                let mut ctx = DeviceCtx {
                    cycle: now,
                    events: &mut self.events,
                };
                let r = dev.access(aligned.addr - base, &aligned, &mut ctx);
                (r, dev.latency().max(1))
            }
        };
        self.inflight[m.index()] = Some(ObiTransaction {
            id: p.id,
            manager: m,
            addr: p.req.addr,
            we: p.req.we,
            be: p.req.be,
            wdata: p.req.wdata,
            issued_cycle: p.issued,
            granted_cycle: now,
            response_cycle: now + latency,
            rdata: if p.req.we { 0 } else { *result.as_ref().unwrap_or(&0) },
            err: result.is_err(),
        });
    }

    /// Tick every device's reset hook and drop all bus state.
    pub fn reset(&mut self, cold: bool) {
        self.now = 0;
        self.pending = [None; 3];
        self.inflight = [None; 3];
        self.completed = [None; 3];
        self.rr_last.iter_mut().for_each(|r| *r = None);
        self.events.clear();
        if let Some(log) = &mut self.log {
            log.clear();
        }
        for d in &mut self.devices {
            d.reset(cold);
        }
    }
}

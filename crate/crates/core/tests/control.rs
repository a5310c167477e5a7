use std::time::Duration;

use base64::Engine as _;
use croc_core::asm::Asm;
use croc_core::control::outbox::CHANNEL_LIMIT;
use croc_core::control::{Channel, Event, Message, Role, Service, Session};
use croc_core::demo::demo_image;
use croc_core::isa::Op;
use croc_core::loader::write_elf;
use croc_core::periph::gpio;
use croc_core::soc::{Soc, SocConfig};
use serde_json::{json, Value};

fn b64(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

fn demo_elf() -> String {
    b64(&write_elf(&demo_image(&SocConfig::mlem())))
}

fn service() -> Service {
    Service::start(Soc::build(SocConfig::mlem()).unwrap())
}

fn ok(s: &mut Session, method: &str, params: Value) -> Value {
    let r = s.call(method, params).unwrap();
    r.result()
        .unwrap_or_else(|| panic!("{method}: {:?}", r.error()))
        .clone()
}

/// Collect events until a `halted` event arrives.
fn events_until_halt(s: &mut Session) -> (Vec<Event>, String) {
    let mut out = Vec::new();
    loop {
        match s.recv_timeout(Duration::from_secs(30)).expect("halted event") {
            Message::Event(Event::Halted { reason, .. }) => return (out, reason),
            Message::Event(e) => out.push(e),
            _ => {}
        }
    }
}

#[test]
fn demo_firmware_over_the_wire() {
    let svc = service();
    let mut ctl = svc.connect(Role::Controller);
    let loaded = ok(&mut ctl, "load", json!({ "elf_b64": demo_elf() }));
    assert_eq!(loaded["entry"], json!("0x10000000"));
    ok(&mut ctl, "subscribe", json!({ "channels": ["uart", "neopixel"] }));
    ok(&mut ctl, "run", json!({ "max_cycles": 80_000 }));
    let (events, reason) = events_until_halt(&mut ctl);
    assert_eq!(reason, "cycle_limit");
    let tx: Vec<u8> = events
        .iter()
        .filter_map(|e| match e {
            Event::UartTx { byte } => Some(*byte),
            _ => None,
        })
        .collect();
    assert_eq!(tx, b"croc\n");
    assert!(events.contains(&Event::NeopixelFrame {
        colors: vec!["00FF00".into(), "FF0000".into()]
    }));
    assert!(!events.iter().any(|e| matches!(e, Event::Pin { .. })));

    ok(&mut ctl, "uart_rx", json!({ "bytes": "41" }));
    ok(&mut ctl, "run", json!({ "max_cycles": 60_000 }));
    let (events, _) = events_until_halt(&mut ctl);
    assert!(events.contains(&Event::UartTx { byte: 0x41 }));
    assert!(events.contains(&Event::NeopixelFrame {
        colors: vec!["414141".into()]
    }));
}

#[test]
fn observers_see_events_but_cannot_steer() {
    let svc = service();
    let mut ctl = svc.connect(Role::Controller);
    let mut obs = svc.connect(Role::Observer);
    ok(&mut ctl, "load", json!({ "elf_b64": demo_elf() }));
    ok(&mut obs, "subscribe", json!({ "channels": ["uart"] }));
    let denied = obs.call("uart_rx", json!({ "bytes": "00" })).unwrap();
    assert_eq!(denied.error().unwrap().code, 5);
    ok(&mut ctl, "run", json!({ "max_cycles": 30_000 }));
    let (events, _) = events_until_halt(&mut obs);
    assert_eq!(events.len(), 5);
}

fn final_state(subscribe: bool) -> (u64, Vec<u32>, Vec<u8>) {
    let svc = service();
    let mut ctl = svc.connect(Role::Controller);
    let mut watchers: Vec<Session> = Vec::new();
    if subscribe {
        let all = json!({ "channels": ["pins", "uart", "neopixel", "stats"] });
        ok(&mut ctl, "subscribe", all.clone());
        for _ in 0..3 {
            let mut w = svc.connect(Role::Observer);
            ok(&mut w, "subscribe", all.clone());
            watchers.push(w);
        }
    }
    ok(&mut ctl, "load", json!({ "elf_b64": demo_elf() }));
    ok(&mut ctl, "gpio_input", json!({ "pin": 15, "level": 1 }));
    ok(&mut ctl, "uart_rx", json!({ "bytes": "68690a" }));
    ok(&mut ctl, "run", json!({ "max_cycles": 150_000 }));
    events_until_halt(&mut ctl);
    drop(ctl);
    drop(watchers);
    let soc = svc.shutdown();
    (
        soc.cycle(),
        soc.cpu.state.regs().to_vec(),
        soc.read_mem(0x1000_0000, 0x400).unwrap(),
    )
}

#[test]
fn subscribers_do_not_perturb_the_simulation() {
    assert_eq!(final_state(false), final_state(true));
}

fn toggler() -> Vec<u8> {
    let cfg = SocConfig::mlem();
    let mut a = Asm::new(cfg.reset_pc);
    a.li(9, cfg.gpio_base).li(5, 0xFFF).s(Op::Sw, 5, 9, gpio::DIR as i32);
    a.label("loop")
        .i(Op::Xori, 6, 6, 0xFFF)
        .s(Op::Sw, 6, 9, gpio::OUT as i32)
        .j("loop");
    a.finish().unwrap()
}

#[test]
fn slow_pin_consumer_gets_one_overflow_and_every_halt() {
    let svc = service();
    let mut ctl = svc.connect(Role::Controller);
    let mut idle = svc.connect(Role::Observer);
    ok(&mut idle, "subscribe", json!({ "channels": ["pins"] }));
    ok(
        &mut ctl,
        "load",
        json!({ "bin_b64": b64(&toggler()), "addr": "0x10000000" }),
    );
    // 12 edges every 5 cycles: far more than the buffer holds
    ok(&mut ctl, "run", json!({ "max_cycles": 100_000 }));
    events_until_halt(&mut ctl);

    let (events, reason) = events_until_halt(&mut idle);
    assert_eq!(reason, "cycle_limit");
    let overflows: Vec<&Event> = events.iter().filter(|e| matches!(e, Event::Overflow { .. })).collect();
    assert_eq!(overflows, vec![&Event::Overflow { channel: Channel::Pins }]);
    let pins = events.iter().filter(|e| matches!(e, Event::Pin { .. })).count();
    assert_eq!(pins, CHANNEL_LIMIT);
    // the episode ends once drained: the next run delivers again
    ok(&mut ctl, "run", json!({ "max_cycles": 100 }));
    let (events, _) = events_until_halt(&mut idle);
    assert!(!events.is_empty());
    assert!(events.iter().all(|e| matches!(e, Event::Pin { .. })));
}

#[test]
fn pause_stops_the_clock() {
    let svc = service();
    let mut ctl = svc.connect(Role::Controller);
    ok(
        &mut ctl,
        "load",
        json!({ "bin_b64": b64(&toggler()), "addr": "0x10000000" }),
    );
    ok(&mut ctl, "run", Value::Null);
    std::thread::sleep(Duration::from_millis(20));
    let paused = ok(&mut ctl, "pause", Value::Null);
    let a = ok(&mut ctl, "read_regs", Value::Null);
    std::thread::sleep(Duration::from_millis(20));
    let b = ok(&mut ctl, "read_regs", Value::Null);
    assert_eq!(paused["cycle"], a["cycle"]);
    assert_eq!(a["cycle"], b["cycle"]);
    assert_ne!(a["cycle"], json!("0x0"));
    let (_, reason) = events_until_halt(&mut ctl);
    assert_eq!(reason, "paused");
}

#[test]
fn step_with_trace_and_breakpoints() {
    let svc = service();
    let mut ctl = svc.connect(Role::Controller);
    ok(
        &mut ctl,
        "load",
        json!({ "bin_b64": b64(&toggler()), "addr": "0x10000000" }),
    );
    let r = ok(&mut ctl, "step", json!({ "n": 2, "trace": true }));
    assert_eq!(r["pc"], json!("0x10000008"));
    assert_eq!(r["cycles"], json!(2));
    assert_eq!(r["trace"][0], json!("C0 PC=0x10000000 I=0x030024b7 lui x9=0x03002000"));
    ok(&mut ctl, "set_breakpoint", json!({ "addr": "0x10000018" }));
    ok(&mut ctl, "run", Value::Null);
    let (_, reason) = events_until_halt(&mut ctl);
    assert_eq!(reason, "breakpoint");
    let regs = ok(&mut ctl, "read_regs", Value::Null);
    assert_eq!(regs["pc"], json!("0x10000018"));
    assert_eq!(
        ok(&mut ctl, "clear_breakpoint", json!({ "addr": "0x10000018" }))["removed"],
        json!(true)
    );
}

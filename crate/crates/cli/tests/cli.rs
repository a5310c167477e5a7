use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

use croc_core::asm::Asm;
use croc_core::control::protocol::{Event, Message, Role};
use croc_core::demo::demo_image;
use croc_core::isa::Op;
use croc_core::loader::write_elf;
use croc_core::periph::uart;
use croc_core::soc::SocConfig;
use serde_json::{json, Value};
use tempfile::TempDir;

fn croc(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_croc"));
    c.args(args).stdin(Stdio::null());
    c
}

fn output(args: &[&str]) -> Output {
    croc(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Prints `text` on the UART, then stops on `ebreak`.
fn hello(text: &[u8]) -> Vec<u8> {
    let mut a = Asm::new(0x1000_0000);
    a.li(8, SocConfig::mlem().uart_base);
    for &b in text {
        a.i(Op::Addi, 5, 0, b as i32).s(Op::Sw, 5, 8, uart::TXDATA as i32);
    }
    // wait for the last byte to leave the shifter
    a.label("drain")
        .i(Op::Lw, 6, 8, uart::STATUS as i32)
        .i(Op::Andi, 6, 6, uart::STATUS_TX_EMPTY as i32)
        .branch(Op::Beq, 6, 0, "drain");
    a.op(Op::Ebreak);
    a.finish().unwrap()
}

fn file(dir: &TempDir, name: &str, bytes: &[u8]) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, bytes).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_firmware_is_a_usage_error() {
    let o = output(&["run"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("--elf"));
    assert_eq!(output(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(output(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(output(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let bin = file(&dir, "p.bin", &hello(b"x"));
    let spec = format!("{}@0x10000000", s(&bin));
    assert_eq!(
        output(&["run", "--bin", &spec, "--profile", "nope"]).status.code(),
        Some(1)
    );
    let cfg = file(&dir, "c.toml", b"[pads]\nuser = 35\n");
    let o = output(&["run", "--bin", &spec, "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("pad budget"), "{}", stderr(&o));
}

#[test]
fn load_failures_exit_2() {
    let dir = TempDir::new().unwrap();
    let junk = file(&dir, "junk.elf", b"not an elf at all");
    assert_eq!(output(&["run", "--elf", s(&junk)]).status.code(), Some(2));
    let bin = file(&dir, "p.bin", &[0x13, 0, 0, 0]);
    let outside = format!("{}@0x40000000", s(&bin));
    assert_eq!(output(&["run", "--bin", &outside]).status.code(), Some(2));
    assert_eq!(output(&["run", "--elf", "/no/such/file"]).status.code(), Some(2));
}

#[test]
fn raw_binary_prints_over_uart() {
    let dir = TempDir::new().unwrap();
    let bin = file(&dir, "p.bin", &hello(b"hi\n"));
    let trace = dir.path().join("t.txt");
    let pins = dir.path().join("p.csv");
    let spec = format!("{}@0x10000000", s(&bin));
    let o = output(&[
        "run",
        "--bin",
        &spec,
        "--uart",
        "stdio",
        "--trace",
        s(&trace),
        "--pins-csv",
        s(&pins),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "hi\n");
    assert!(stderr(&o).starts_with("halt at pc 0x"), "{}", stderr(&o));
    let trace = std::fs::read_to_string(trace).unwrap();
    assert!(
        trace.starts_with("C0 PC=0x10000000 I=0x03001437 lui x8=0x03001000"),
        "{trace}"
    );
    let pins = std::fs::read_to_string(pins).unwrap();
    let mut lines = pins.lines();
    assert_eq!(lines.next(), Some("time_ns,cycle,pin,level"));
    assert!(lines.all(|l| l.contains(",uart_tx,")));
}

#[test]
fn uart_output_needs_the_flag() {
    let dir = TempDir::new().unwrap();
    let bin = file(&dir, "p.bin", &hello(b"quiet"));
    let o = output(&["run", "--bin", &format!("{}@0x10000000", s(&bin))]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "");
}

#[test]
fn double_fault_exits_3() {
    let dir = TempDir::new().unwrap();
    // an all-zero word is an illegal instruction and no handler is set
    let bin = file(&dir, "z.bin", &[0; 16]);
    let o = output(&["run", "--bin", &format!("{}@0x10000000", s(&bin))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("mcause 0x00000002"), "{}", stderr(&o));
}

fn digest(stderr: &str) -> String {
    stderr.rsplit("digest ").next().unwrap().trim().to_string()
}

#[test]
fn demo_elf_runs_deterministically_with_stimulus() {
    let dir = TempDir::new().unwrap();
    let elf = file(&dir, "demo.elf", &write_elf(&demo_image(&SocConfig::mlem())));
    let stim_a = file(&dir, "a.stim", b"# echo one byte\nat 40000 uart 41\n");
    let stim_b = file(&dir, "b.stim", b"at 40000 uart 42\n");
    let run = |stim: &Path| {
        output(&[
            "run",
            "--elf",
            s(&elf),
            "--cycles",
            "100_000",
            "--uart",
            "stdio",
            "--stim",
            s(stim),
        ])
    };
    let (a1, a2, b) = (run(&stim_a), run(&stim_a), run(&stim_b));
    assert_eq!(a1.status.code(), Some(0), "{}", stderr(&a1));
    assert_eq!(stdout(&a1), "croc\nA");
    assert_eq!(stdout(&b), "croc\nB");
    assert!(stderr(&a1).starts_with("cycle_limit"));
    assert_eq!(digest(&stderr(&a1)), digest(&stderr(&a2)));
    assert_ne!(digest(&stderr(&a1)), digest(&stderr(&b)));

    let bad = file(&dir, "bad.stim", b"at 10 gpio 40 1\n");
    assert_eq!(
        output(&["run", "--elf", s(&elf), "--stim", s(&bad)]).status.code(),
        Some(1)
    );
}

#[test]
fn uart_stdio_feeds_the_receiver() {
    let dir = TempDir::new().unwrap();
    let elf = file(&dir, "demo.elf", &write_elf(&demo_image(&SocConfig::mlem())));
    let mut child = croc(&["run", "--elf", s(&elf), "--cycles", "1000000", "--uart", "stdio"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"ok").unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "croc\nok");
}

#[test]
fn debugger_session() {
    let dir = TempDir::new().unwrap();
    let elf = file(&dir, "demo.elf", &write_elf(&demo_image(&SocConfig::mlem())));
    let script =
        "s 2\nx/2w 0x10000000\nb 0x10000010\nc\nr\nd 0x10000010\nd 0x10000010\nwhat\ngpio 99 1\ntx \"A\"\nq\ns\n";
    let mut child = croc(&["debug", "--elf", s(&elf), "--uart", "stdio", "--cycles", "200000"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(script.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("C0 PC=0x10000000 "), "{out}");
    assert!(lines[1].starts_with("C1 PC=0x10000004 "), "{out}");
    assert_eq!(lines[2], "pc 0x10000008");
    assert!(lines[3].starts_with("0x10000000: 0x"), "{out}");
    assert_eq!(lines[3].split_whitespace().count(), 3);
    assert_eq!(lines[4], "breakpoint at 0x10000010");
    assert_eq!(lines[5], "stopped: breakpoint at 0x10000010");
    assert!(lines[6].starts_with("pc 0x10000010  cycle 0x"), "{out}");
    assert_eq!(
        lines[7],
        "x0  0x00000000  x1  0x00000000  x2  0x00000000  x3  0x00000000"
    );
    assert_eq!(lines[15], "deleted breakpoint at 0x10000010");
    assert_eq!(lines[16], "no breakpoint at 0x10000010");
    assert_eq!(lines[17], "unknown command `what`");
    assert_eq!(lines[18], "commands:");
    assert!(out.contains("error 4: "), "{out}");
    assert!(out.contains("queued 1 bytes"), "{out}");
    // nothing after `q` runs
    assert!(!out.contains("pc 0x1000000c"));
}

#[test]
fn debugger_continue_prints_uart() {
    let dir = TempDir::new().unwrap();
    let elf = file(&dir, "demo.elf", &write_elf(&demo_image(&SocConfig::mlem())));
    let mut child = croc(&["debug", "--elf", s(&elf), "--uart", "stdio", "--cycles", "60000"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"c\n").unwrap();
    let o = child.wait_with_output().unwrap();
    let out = stdout(&o);
    assert!(out.starts_with("croc\nstopped: cycle_limit at 0x"), "{out}");
}

struct Server {
    child: Child,
    addr: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn serve(extra: &[&str]) -> Server {
    let mut args = vec!["serve", "--port", "0"];
    args.extend_from_slice(extra);
    let mut child = croc(&args).stdout(Stdio::piped()).spawn().unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line.trim().rsplit("ws://").next().unwrap().to_string();
    Server { child, addr }
}

type Ws = tungstenite::WebSocket<tungstenite::stream::MaybeTlsStream<TcpStream>>;

fn recv(ws: &mut Ws) -> Message {
    loop {
        if let tungstenite::Message::Text(t) = ws.read().unwrap() {
            return Message::parse(&t).unwrap();
        }
    }
}

fn call(ws: &mut Ws, id: u64, method: &str, params: Value) -> Value {
    let req = json!({ "id": id, "method": method, "params": params });
    ws.send(tungstenite::Message::Text(req.to_string())).unwrap();
    loop {
        if let Message::Response(r) = recv(ws) {
            assert_eq!(r.id, Some(id));
            return serde_json::to_value(&r).unwrap();
        }
    }
}

#[test]
fn websocket_sessions() {
    let dir = TempDir::new().unwrap();
    let elf = file(&dir, "demo.elf", &write_elf(&demo_image(&SocConfig::mlem())));
    let server = serve(&["--elf", s(&elf)]);
    let url = format!("ws://{}/", server.addr);
    let (mut ctl, _) = tungstenite::connect(&url).unwrap();
    let Message::Hello(h) = recv(&mut ctl) else {
        panic!("expected hello")
    };
    assert_eq!((h.hello.as_str(), h.role), ("croc-ctl/1", Role::Controller));

    // a second controller is downgraded
    let (mut second, _) = tungstenite::connect(&url).unwrap();
    let Message::Hello(h) = recv(&mut second) else {
        panic!("expected hello")
    };
    assert_eq!(h.role, Role::Observer);
    let denied = call(&mut second, 1, "run", Value::Null);
    assert_eq!(denied["error"]["code"], json!(5));

    let r = call(&mut ctl, 1, "step", json!({ "n": 1 }));
    assert_eq!(r["result"], json!({ "pc": "0x10000004", "cycles": 1 }));
    let r = call(&mut ctl, 2, "frobnicate", Value::Null);
    assert_eq!(r["error"]["code"], json!(1));
    ctl.send(tungstenite::Message::Text("{nonsense".into())).unwrap();
    let Message::Response(r) = recv(&mut ctl) else {
        panic!("expected error")
    };
    assert_eq!(r.error().unwrap().code, 2);

    call(&mut ctl, 3, "subscribe", json!({ "channels": ["uart", "neopixel"] }));
    call(&mut ctl, 4, "run", json!({ "max_cycles": 80_000 }));
    let mut seen = Vec::new();
    loop {
        match recv(&mut ctl) {
            Message::Event(Event::Halted { reason, .. }) => {
                assert_eq!(reason, "cycle_limit");
                break;
            }
            Message::Event(e) => seen.push(e),
            _ => {}
        }
    }
    let text: Vec<u8> = seen
        .iter()
        .filter_map(|e| match e {
            Event::UartTx { byte } => Some(*byte),
            _ => None,
        })
        .collect();
    assert_eq!(text, b"croc\n");
    assert!(seen.contains(&Event::NeopixelFrame {
        colors: vec!["00FF00".into(), "FF0000".into()]
    }));

    // the controller slot frees up when its socket closes
    ctl.close(None).unwrap();
    while ctl.read().is_ok() {}
    std::thread::sleep(Duration::from_millis(100));
    let (mut third, _) = tungstenite::connect(&url).unwrap();
    let Message::Hello(h) = recv(&mut third) else {
        panic!("expected hello")
    };
    assert_eq!(h.role, Role::Controller);
    let (mut obs, _) = tungstenite::connect(format!("{url}?role=observer")).unwrap();
    let Message::Hello(h) = recv(&mut obs) else {
        panic!("expected hello")
    };
    assert_eq!(h.role, Role::Observer);
}

fn http_get(addr: &str, path: &str) -> String {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: x\r\n\r\n").unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).unwrap();
    out
}

#[test]
fn serves_static_ui_files() {
    let dir = TempDir::new().unwrap();
    file(&dir, "index.html", b"<h1>board</h1>");
    let server = serve(&["--ui-dir", s(dir.path())]);
    let page = http_get(&server.addr, "/");
    assert!(page.starts_with("HTTP/1.1 200 OK"), "{page}");
    assert!(page.contains("text/html"));
    assert!(page.ends_with("<h1>board</h1>"));
    assert!(http_get(&server.addr, "/../../etc/passwd").starts_with("HTTP/1.1 404"));
}

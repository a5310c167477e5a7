//! Interactive debugger. Every command is one control-service request made
//! through a controller session, so the REPL and remote clients share the
//! same dispatch.

use std::io::{BufRead, IsTerminal, Write};
use std::sync::mpsc::{self, Receiver, TryRecvError};
use std::time::Duration;

use croc_core::control::protocol::{parse_int, Event, Message, Response};
use croc_core::control::{Role, Service, Session};
use serde_json::{json, Value};

use crate::setup::{self, Failure};
use crate::RunArgs;

pub const HELP: &str = "\
commands:
  s [n]            step n instructions (default 1)
  c                continue until breakpoint, halt or cycle limit
  b <addr>         set breakpoint
  d <addr>         delete breakpoint
  r                show registers
  x/<n>w <addr>    show n memory words
  gpio <pin> <0|1> drive a GPIO input
  tx \"<text>\"      send text to the UART receiver
  q                quit";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Step(u64),
    Continue,
    Break(u32),
    Delete(u32),
    Regs,
    Examine { words: u64, addr: u32 },
    Gpio { pin: u64, level: u64 },
    Tx(Vec<u8>),
    Quit,
}

fn addr(s: &str) -> Result<u32, String> {
    parse_int(s)
        .and_then(|a| u32::try_from(a).ok())
        .ok_or_else(|| format!("bad address `{s}`"))
}

fn number(s: &str) -> Result<u64, String> {
    parse_int(s).ok_or_else(|| format!("bad number `{s}`"))
}

/// Unquote `"..."` with `\n`, `\r`, `\t`, `\\`, `\"` and `\xHH` escapes.
fn quoted(s: &str) -> Result<Vec<u8>, String> {
    let inner = s
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .ok_or("expected quoted text")?;
    let mut out = Vec::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            let mut buf = [0; 4];
            out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            continue;
        }
        match chars.next() {
            Some('n') => out.push(b'\n'),
            Some('r') => out.push(b'\r'),
            Some('t') => out.push(b'\t'),
            Some('\\') => out.push(b'\\'),
            Some('"') => out.push(b'"'),
            Some('x') => {
                let hex: String = chars.by_ref().take(2).collect();
                out.push(u8::from_str_radix(&hex, 16).map_err(|_| format!("bad escape `\\x{hex}`"))?);
            }
            other => {
                return Err(format!(
                    "bad escape `\\{}`",
                    other.map(String::from).unwrap_or_default()
                ))
            }
        }
    }
    Ok(out)
}

pub fn parse(line: &str) -> Result<Command, String> {
    let line = line.trim();
    let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    let args: Vec<&str> = rest.split_whitespace().collect();
    match (head, args.as_slice()) {
        ("s", []) => Ok(Command::Step(1)),
        ("s", [n]) => Ok(Command::Step(number(n)?)),
        ("c", []) => Ok(Command::Continue),
        ("b", [a]) => Ok(Command::Break(addr(a)?)),
        ("d", [a]) => Ok(Command::Delete(addr(a)?)),
        ("r", []) => Ok(Command::Regs),
        ("gpio", [pin, level]) => Ok(Command::Gpio {
            pin: number(pin)?,
            level: number(level)?,
        }),
        ("tx", _) if !rest.trim().is_empty() => Ok(Command::Tx(quoted(rest.trim())?)),
        ("q", []) => Ok(Command::Quit),
        (x, [a]) if x.starts_with("x/") => {
            let n = x[2..].strip_suffix('w').ok_or("expected x/<n>w")?;
            Ok(Command::Examine {
                words: number(n)?,
                addr: addr(a)?,
            })
        }
        _ => Err(format!("unknown command `{line}`")),
    }
}

impl Command {
    /// The control-service request this command maps onto.
    pub fn request(&self) -> Option<(&'static str, Value)> {
        Some(match self {
            Command::Step(n) => ("step", json!({ "n": n, "trace": true })),
            Command::Continue => ("run", Value::Null),
            Command::Break(a) => ("set_breakpoint", json!({ "addr": format!("0x{a:08x}") })),
            Command::Delete(a) => ("clear_breakpoint", json!({ "addr": format!("0x{a:08x}") })),
            Command::Regs => ("read_regs", Value::Null),
            Command::Examine { words, addr } => (
                "read_mem",
                json!({ "addr": format!("0x{addr:08x}"), "len": words.saturating_mul(4) }),
            ),
            Command::Gpio { pin, level } => ("gpio_input", json!({ "pin": pin, "level": level })),
            Command::Tx(bytes) => ("uart_rx", json!({ "bytes": hex(bytes) })),
            Command::Quit => return None,
        })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn str_of(v: &Value) -> &str {
    v.as_str().unwrap_or("?")
}

fn format_regs(r: &Value) -> String {
    let mut out = format!(
        "pc {}  cycle {}  instret {}\n",
        str_of(&r["pc"]),
        str_of(&r["cycle"]),
        str_of(&r["instret"])
    );
    let regs = r["regs"].as_array().cloned().unwrap_or_default();
    for (row, chunk) in regs.chunks(4).enumerate() {
        let cells: Vec<String> = chunk
            .iter()
            .enumerate()
            .map(|(i, v)| format!("x{:<2} {}", row * 4 + i, str_of(v)))
            .collect();
        out.push_str(&cells.join("  "));
        out.push('\n');
    }
    out
}

fn format_words(r: &Value) -> String {
    let base = str_of(&r["addr"]).trim_start_matches("0x");
    let base = u32::from_str_radix(base, 16).unwrap_or(0);
    let bytes: Vec<u8> = (0..str_of(&r["bytes"]).len() / 2)
        .filter_map(|i| u8::from_str_radix(&str_of(&r["bytes"])[2 * i..2 * i + 2], 16).ok())
        .collect();
    let mut out = String::new();
    for (row, chunk) in bytes.chunks(16).enumerate() {
        out.push_str(&format!("0x{:08x}:", base.wrapping_add(16 * row as u32)));
        for w in chunk.chunks(4) {
            let mut word = [0u8; 4];
            word[..w.len()].copy_from_slice(w);
            out.push_str(&format!(" 0x{:08x}", u32::from_le_bytes(word)));
        }
        out.push('\n');
    }
    out
}

pub struct Repl {
    session: Session,
    /// Echo UART output.
    uart: bool,
    /// Cycle budget for each `c`.
    run_limit: Option<u64>,
}

impl Repl {
    pub fn new(session: Session, uart: bool, run_limit: Option<u64>) -> Self {
        Repl {
            session,
            uart,
            run_limit,
        }
    }

    /// Print queued events. Returns the halt event, if one was queued.
    fn drain(&mut self, out: &mut dyn Write) -> std::io::Result<Option<(String, String)>> {
        let mut halted = None;
        while let Some(m) = self.session.try_recv() {
            if let Some(h) = self.show(m, out)? {
                halted = Some(h);
            }
        }
        Ok(halted)
    }

    fn show(&mut self, m: Message, out: &mut dyn Write) -> std::io::Result<Option<(String, String)>> {
        match m {
            Message::Event(Event::UartTx { byte }) if self.uart => {
                out.write_all(&[byte])?;
                out.flush()?;
            }
            Message::Event(Event::Halted { reason, pc }) => {
                writeln!(out, "stopped: {reason} at {pc}")?;
                return Ok(Some((reason, pc.to_string())));
            }
            _ => {}
        }
        Ok(None)
    }

    fn call(&mut self, method: &str, params: Value) -> Result<Value, String> {
        let r: Response = self
            .session
            .call(method, params)
            .map_err(|e| format!("control service: {e}"))?;
        match (r.result(), r.error()) {
            (Some(v), _) => Ok(v.clone()),
            (_, Some(e)) => Err(format!("error {}: {}", e.code, e.message)),
            _ => Err("empty response".into()),
        }
    }

    /// Evaluate one command line. Returns `false` once the user quits.
    /// `interrupted` is polled while the simulation runs.
    pub fn eval(
        &mut self,
        line: &str,
        out: &mut dyn Write,
        interrupted: &mut dyn FnMut() -> bool,
    ) -> std::io::Result<bool> {
        if line.trim().is_empty() {
            return Ok(true);
        }
        let cmd = match parse(line) {
            Ok(c) => c,
            Err(e) => {
                writeln!(out, "{e}\n{HELP}")?;
                return Ok(true);
            }
        };
        let Some((method, mut params)) = cmd.request() else {
            return Ok(false);
        };
        if let (Command::Continue, Some(max)) = (&cmd, self.run_limit) {
            params = json!({ "max_cycles": max });
        }
        let result = match self.call(method, params) {
            Ok(v) => v,
            Err(e) => {
                writeln!(out, "{e}")?;
                return Ok(true);
            }
        };
        match cmd {
            Command::Step(_) => {
                for l in result["trace"].as_array().into_iter().flatten() {
                    writeln!(out, "{}", str_of(l))?;
                }
                self.drain(out)?;
                writeln!(out, "pc {}", str_of(&result["pc"]))?;
            }
            Command::Continue => {
                if self.drain(out)?.is_none() {
                    self.wait_for_halt(out, interrupted)?;
                }
            }
            Command::Break(a) => writeln!(out, "breakpoint at 0x{a:08x}")?,
            Command::Delete(a) => {
                if result["removed"] == json!(true) {
                    writeln!(out, "deleted breakpoint at 0x{a:08x}")?;
                } else {
                    writeln!(out, "no breakpoint at 0x{a:08x}")?;
                }
            }
            Command::Regs => write!(out, "{}", format_regs(&result))?,
            Command::Examine { .. } => write!(out, "{}", format_words(&result))?,
            Command::Gpio { pin, level } => writeln!(out, "gpio {pin} <- {level}")?,
            Command::Tx(_) => writeln!(out, "queued {} bytes", result["queued"])?,
            Command::Quit => unreachable!("quit sends no request"),
        }
        self.drain(out)?;
        Ok(true)
    }

    fn wait_for_halt(&mut self, out: &mut dyn Write, interrupted: &mut dyn FnMut() -> bool) -> std::io::Result<()> {
        loop {
            if let Some(m) = self.session.recv_timeout(Duration::from_millis(50)) {
                if self.show(m, out)?.is_some() {
                    return Ok(());
                }
            } else if self.session.is_closed() {
                return Ok(());
            }
            if interrupted() {
                if let Err(e) = self.call("pause", Value::Null) {
                    writeln!(out, "{e}")?;
                }
            }
        }
    }
}

/// Lines from standard input, read on their own thread.
fn stdin_lines() -> Receiver<String> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for line in std::io::stdin().lock().lines() {
            let Ok(line) = line else { break };
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    rx
}

pub fn debug(args: &RunArgs) -> Result<(), Failure> {
    let mut soc = setup::platform(&args.platform)?;
    setup::load_firmware(&mut soc, &args.firmware)?;
    if let Some(path) = &args.stim {
        setup::install_stimulus(&mut soc, path)?;
    }
    let service = Service::start(soc);
    let mut session = service.connect(Role::Controller);
    session.recv_timeout(Duration::from_secs(5)); // hello
    let mut repl = Repl::new(session, args.uart.is_some(), args.cycles);
    if args.uart.is_some() {
        repl.call("subscribe", json!({ "channels": ["uart"] }))
            .map_err(setup::usage)?;
    }

    let interactive = std::io::stdin().is_terminal();
    let lines = stdin_lines();
    let mut stdout = std::io::stdout();
    let prompt = |out: &mut std::io::Stdout| {
        if interactive {
            let _ = write!(out, "(croc) ").and_then(|_| out.flush());
        }
    };
    if interactive {
        println!("{HELP}\nwhile running, press Enter to pause");
    }
    prompt(&mut stdout);
    while let Ok(line) = lines.recv() {
        // a piped script runs each `c` to completion
        let mut interrupted = || interactive && !matches!(lines.try_recv(), Err(TryRecvError::Empty));
        match repl.eval(&line, &mut stdout, &mut interrupted) {
            Ok(true) => prompt(&mut stdout),
            Ok(false) | Err(_) => break,
        }
    }
    drop(repl);
    service.shutdown();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_command() {
        assert_eq!(parse("s"), Ok(Command::Step(1)));
        assert_eq!(parse("s 5"), Ok(Command::Step(5)));
        assert_eq!(parse("c"), Ok(Command::Continue));
        assert_eq!(parse("b 0x10000010"), Ok(Command::Break(0x1000_0010)));
        assert_eq!(parse("d 268435472"), Ok(Command::Delete(0x1000_0010)));
        assert_eq!(parse(" r "), Ok(Command::Regs));
        assert_eq!(
            parse("x/4w 0x10000000"),
            Ok(Command::Examine {
                words: 4,
                addr: 0x1000_0000
            })
        );
        assert_eq!(parse("gpio 5 1"), Ok(Command::Gpio { pin: 5, level: 1 }));
        assert_eq!(parse(r#"tx "hi there\n""#), Ok(Command::Tx(b"hi there\n".to_vec())));
        assert_eq!(parse(r#"tx "\x00\"""#), Ok(Command::Tx(vec![0, b'"'])));
        assert_eq!(parse("q"), Ok(Command::Quit));
    }

    #[test]
    fn rejects_malformed_commands() {
        for bad in [
            "step",
            "s x",
            "b",
            "x/4 0x0",
            "x/w 0x0",
            "tx hi",
            "gpio 1",
            "q now",
            r#"tx "\q""#,
        ] {
            assert!(parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn commands_map_onto_service_methods() {
        let methods: Vec<&str> = [
            Command::Step(1),
            Command::Continue,
            Command::Break(0),
            Command::Delete(0),
            Command::Regs,
            Command::Examine { words: 1, addr: 0 },
            Command::Gpio { pin: 0, level: 0 },
            Command::Tx(vec![]),
        ]
        .iter()
        .map(|c| c.request().unwrap().0)
        .collect();
        for m in &methods {
            assert!(croc_core::control::engine::METHODS.contains(m), "{m}");
        }
        assert_eq!(Command::Quit.request(), None);
    }

    #[test]
    fn word_dump_layout() {
        let r = json!({ "addr": "0x10000000", "bytes": "130000006f000000efbeadde" });
        assert_eq!(format_words(&r), "0x10000000: 0x00000013 0x0000006f 0xdeadbeef\n");
    }
}

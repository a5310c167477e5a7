use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::mpsc::{self, Receiver};

use croc_core::batch::Recorder;
use croc_core::soc::StopReason;
use croc_core::trace::{pin_csv_line, stats, Snapshot, PIN_CSV_HEADER};

use crate::setup::{self, Failure};
use crate::RunArgs;

/// Cycles simulated between draining peripheral output.
const CHUNK: u64 = 20_000;

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| setup::usage(format!("{}: {e}", path.display())))
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| setup::usage(format!("{}: {e}", path.display()))
}

/// Forward standard input to the UART receiver as it arrives.
fn stdin_bytes() -> Receiver<Vec<u8>> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut stdin = std::io::stdin().lock();
        let mut buf = [0u8; 256];
        while let Ok(n @ 1..) = stdin.read(&mut buf) {
            if tx.send(buf[..n].to_vec()).is_err() {
                break;
            }
        }
    });
    rx
}

pub fn run(args: &RunArgs) -> Result<(), Failure> {
    let mut soc = setup::platform(&args.platform)?;
    setup::load_firmware(&mut soc, &args.firmware)?;
    if let Some(path) = &args.stim {
        setup::install_stimulus(&mut soc, path)?;
    }
    let mut trace = args.trace.as_deref().map(create).transpose()?;
    let mut pins = args.pins_csv.as_deref().map(create).transpose()?;
    if let (Some(w), Some(path)) = (pins.as_mut(), &args.pins_csv) {
        writeln!(w, "{PIN_CSV_HEADER}").map_err(io(path))?;
    }
    let uart_in = args.uart.is_some().then(stdin_bytes);
    let mut stdout = std::io::stdout().lock();

    let limit = args.cycles.unwrap_or(u64::MAX);
    let start = Snapshot::of(&soc);
    let mut rec = Recorder::new();
    let stop = loop {
        let elapsed = soc.cycle() - start.cycle;
        let mut trace_err = None;
        let r = rec.run(&mut soc, (limit - elapsed).min(CHUNK), &mut |line| {
            if let Some(w) = trace.as_mut() {
                if let Err(e) = writeln!(w, "{line}") {
                    trace_err.get_or_insert(e);
                }
            }
        });
        if let (Some(e), Some(path)) = (trace_err, &args.trace) {
            return Err(io(path)(e));
        }
        let events = rec.drain(&mut soc);
        if let (Some(w), Some(path)) = (pins.as_mut(), &args.pins_csv) {
            for e in &events.pins {
                writeln!(w, "{}", pin_csv_line(e)).map_err(io(path))?;
            }
        }
        if args.uart.is_some() && !events.uart_tx.is_empty() {
            let bytes: Vec<u8> = events.uart_tx.iter().map(|&(_, b)| b).collect();
            // a closed stdout only loses output
            let _ = stdout.write_all(&bytes).and_then(|_| stdout.flush());
        }
        if let Some(rx) = &uart_in {
            while let Ok(bytes) = rx.try_recv() {
                soc.uart_rx(&bytes);
            }
        }
        if r.stop != StopReason::CycleLimit || soc.cycle() - start.cycle >= limit {
            break r.stop;
        }
    };
    for (w, path) in [(trace.as_mut(), &args.trace), (pins.as_mut(), &args.pins_csv)] {
        if let (Some(w), Some(path)) = (w, path) {
            w.flush().map_err(io(path))?;
        }
    }

    let end = Snapshot::of(&soc);
    let ipc = stats(&start, &end).map_or(0.0, |s| s.ipc);
    eprintln!(
        "{} at pc 0x{:08x}: {} cycles, {} instructions, IPC {ipc:.3}, digest {:016x}",
        stop.name(),
        soc.pc(),
        end.cycle - start.cycle,
        end.instret - start.instret,
        rec.digest()
    );
    match stop {
        StopReason::DoubleFault { cause, tval } => Err(Failure::DoubleFault(format!(
            "double fault: mcause 0x{cause:08x}, mtval 0x{tval:08x}, no trap handler installed"
        ))),
        _ => Ok(()),
    }
}

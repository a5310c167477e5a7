//! Scripted stimulus for batch runs.
//!
//! One command per line, `#` starts a comment:
//!
//! ```text
//! at 1000 gpio 5 1
//! at 2500 uart 48656c6c6f
//! ```

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StimAction {
    Gpio { pin: u32, level: bool },
    Uart(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stimulus {
    pub at: u64,
    pub action: StimAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("stimulus line {line}: {message}")]
pub struct StimParseError {
    pub line: usize,
    pub message: String,
}

fn parse_hex_bytes(s: &str) -> Option<Vec<u8>> {
    if s.is_empty() || !s.len().is_multiple_of(2) {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
        .collect()
}

fn parse_line(line: &str) -> Result<Option<Stimulus>, String> {
    let line = line.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return Ok(None);
    }
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let ["at", cycle, rest @ ..] = tokens.as_slice() else {
        return Err("expected `at <cycle> ...`".into());
    };
    let at: u64 = cycle.parse().map_err(|_| format!("bad cycle `{cycle}`"))?;
    let action = match rest {
        ["gpio", pin, level] => StimAction::Gpio {
            pin: pin.parse().map_err(|_| format!("bad pin `{pin}`"))?,
            level: match *level {
                "0" => false,
                "1" => true,
                _ => return Err(format!("bad level `{level}`")),
            },
        },
        ["uart", hex] => StimAction::Uart(parse_hex_bytes(hex).ok_or_else(|| format!("bad hex bytes `{hex}`"))?),
        _ => return Err("expected `gpio <pin> <0|1>` or `uart <hexbytes>`".into()),
    };
    Ok(Some(Stimulus { at, action }))
}

pub fn parse_stimulus(text: &str) -> Result<Vec<Stimulus>, StimParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        match parse_line(line) {
            Ok(Some(s)) => out.push(s),
            Ok(None) => {}
            Err(message) => return Err(StimParseError { line: i + 1, message }),
        }
    }
    Ok(out)
}

//! Wire format of the control protocol (`croc-ctl/1`).
//!
//! Every frame is one JSON object. The server opens a session with a hello
//! frame; clients send requests; the server answers each request exactly
//! once and interleaves events, which carry no id.
//!
//! ```text
//! <- {"hello":"croc-ctl/1","role":"controller"}
//! -> {"id":1,"method":"step","params":{"n":1}}
//! <- {"id":1,"result":{"pc":"0x10000004","cycles":1}}
//! <- {"event":"halted","reason":"breakpoint","pc":"0x10000010"}
//! ```
//!
//! Addresses, register values and cycle counts are `"0x…"` strings so that
//! clients with 53-bit numbers stay exact. Inputs accept either form.

use std::fmt;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;

use crate::pins::Pin;

pub const VERSION: &str = "croc-ctl/1";

pub mod code {
    pub const BAD_METHOD: i64 = 1;
    pub const BAD_PARAMS: i64 = 2;
    pub const SIM_BUSY: i64 = 3;
    pub const RANGE: i64 = 4;
    /// A mutating call from an observer session.
    pub const NOT_CONTROLLER: i64 = 5;
}

/// An integer carried as a `"0x…"` string; parses from a hex string, a
/// decimal string or a JSON number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Hex(pub u64);

impl fmt::Display for Hex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:x}", self.0)
    }
}

/// A 32-bit value formatted with all eight digits, like trace output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Hex32(pub u32);

impl fmt::Display for Hex32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:08x}", self.0)
    }
}

pub fn parse_int(s: &str) -> Option<u64> {
    let s = s.trim();
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(&h.replace('_', ""), 16).ok(),
        None => s.parse().ok(),
    }
}

fn int_from_value(v: &Value) -> Option<u64> {
    match v {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => parse_int(s),
        _ => None,
    }
}

impl Serialize for Hex {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Hex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        int_from_value(&v)
            .map(Hex)
            .ok_or_else(|| de::Error::custom(format!("expected an integer, got {v}")))
    }
}

impl Serialize for Hex32 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Hex32 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Hex::deserialize(d)?;
        u32::try_from(v.0)
            .map(Hex32)
            .map_err(|_| de::Error::custom("value does not fit in 32 bits"))
    }
}

/// Bytes carried as a lowercase hex string (`"48690a"`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HexBytes(pub Vec<u8>);

impl Serialize for HexBytes {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let text: String = self.0.iter().map(|b| format!("{b:02x}")).collect();
        s.serialize_str(&text)
    }
}

impl<'de> Deserialize<'de> for HexBytes {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s.len() % 2 != 0 || !s.is_ascii() {
            return Err(de::Error::custom("hex byte string must have an even number of digits"));
        }
        (0..s.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&s[i..i + 2], 16))
            .collect::<Result<Vec<u8>, _>>()
            .map(HexBytes)
            .map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Controller,
    Observer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    pub hello: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Request {
    pub id: u64,
    pub method: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
}

impl RpcError {
    pub fn new(code: i64, message: impl Into<String>) -> Self {
        RpcError {
            code,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Result(Value),
    Error(RpcError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    /// `None` when the request could not be parsed far enough to find it.
    pub id: Option<u64>,
    #[serde(flatten)]
    pub outcome: Outcome,
}

impl Response {
    pub fn ok(id: u64, result: Value) -> Self {
        Response {
            id: Some(id),
            outcome: Outcome::Result(result),
        }
    }

    pub fn err(id: Option<u64>, error: RpcError) -> Self {
        Response {
            id,
            outcome: Outcome::Error(error),
        }
    }

    pub fn result(&self) -> Option<&Value> {
        match &self.outcome {
            Outcome::Result(v) => Some(v),
            Outcome::Error(_) => None,
        }
    }

    pub fn error(&self) -> Option<&RpcError> {
        match &self.outcome {
            Outcome::Error(e) => Some(e),
            Outcome::Result(_) => None,
        }
    }
}

/// Subscription channels. `halted` and `overflow` events are always sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Pins,
    Uart,
    Neopixel,
    Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    Pin {
        cycle: Hex,
        time_ns: Hex,
        pin: Pin,
        level: u8,
    },
    UartTx {
        byte: u8,
    },
    NeopixelFrame {
        /// `RRGGBB` per LED, in strip order.
        colors: Vec<String>,
    },
    Halted {
        reason: String,
        pc: Hex32,
    },
    Stats {
        cycles: Hex,
        instret: Hex,
        ipc: f64,
    },
    Overflow {
        channel: Channel,
    },
}

impl Event {
    /// The subscription channel this event belongs to (`None` = always sent).
    pub fn channel(&self) -> Option<Channel> {
        match self {
            Event::Pin { .. } => Some(Channel::Pins),
            Event::UartTx { .. } => Some(Channel::Uart),
            Event::NeopixelFrame { .. } => Some(Channel::Neopixel),
            Event::Stats { .. } => Some(Channel::Stats),
            Event::Halted { .. } | Event::Overflow { .. } => None,
        }
    }
}

/// Any frame on the wire.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello(Hello),
    Request(Request),
    Response(Response),
    Event(Event),
}

impl Message {
    pub fn to_json(&self) -> String {
        let r = match self {
            Message::Hello(m) => serde_json::to_string(m),
            Message::Request(m) => serde_json::to_string(m),
            Message::Response(m) => serde_json::to_string(m),
            Message::Event(m) => serde_json::to_string(m),
        };
        r.expect("protocol types always serialize")
    }

    pub fn parse(text: &str) -> Result<Message, serde_json::Error> {
        let v: Value = serde_json::from_str(text)?;
        let has = |k: &str| v.get(k).is_some();
        Ok(if has("hello") {
            Message::Hello(serde_json::from_value(v)?)
        } else if has("event") {
            Message::Event(serde_json::from_value(v)?)
        } else if has("method") {
            Message::Request(serde_json::from_value(v)?)
        } else {
            Message::Response(serde_json::from_value(v)?)
        })
    }
}

/// Typed parameters of the methods that take any.
pub mod params {
    use super::*;

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Load {
        pub elf_b64: Option<String>,
        pub bin_b64: Option<String>,
        pub addr: Option<Hex32>,
    }

    #[derive(Debug, Default, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Reset {
        #[serde(default)]
        pub cold: bool,
    }

    #[derive(Debug, Default, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Run {
        pub max_cycles: Option<Hex>,
    }

    #[derive(Debug, Default, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Step {
        pub n: Option<Hex>,
        #[serde(default)]
        pub trace: bool,
    }

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Addr {
        pub addr: Hex32,
    }

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct ReadMem {
        pub addr: Hex32,
        pub len: Hex,
    }

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct WriteMem {
        pub addr: Hex32,
        pub bytes: HexBytes,
    }

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct GpioInput {
        pub pin: Hex,
        pub level: Hex,
    }

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct UartRx {
        pub bytes: HexBytes,
    }

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Subscribe {
        pub channels: Vec<Channel>,
    }
}

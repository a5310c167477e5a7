//! Remote control of a running platform.

pub mod engine;
pub mod outbox;
pub mod protocol;
pub mod service;

pub use engine::Engine;
pub use outbox::Outbox;
pub use protocol::{Channel, Event, Message, Request, Response, Role};
pub use service::{Service, Session};

//! The control service: one simulation thread owning an [`Engine`], fed by
//! a command queue, with any number of sessions attached.
//!
//! Sessions never touch the simulator. Requests travel over the queue and
//! answers come back through each session's [`Outbox`]. At most one session
//! holds the controller role; later controller requests are downgraded to
//! observers, and the hello frame tells the client which role it got.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde_json::Value;

use super::engine::Engine;
use super::outbox::Outbox;
use super::protocol::{params, Hello, Message, Request, Response, Role, VERSION};
use crate::soc::Soc;

type SessionId = u64;

enum Command {
    Attach(SessionId, Role, Arc<Outbox>),
    Detach(SessionId),
    Request(SessionId, Request),
    Shutdown,
}

struct Attached {
    id: SessionId,
    role: Role,
    outbox: Arc<Outbox>,
}

#[derive(Default)]
struct Shared {
    controller: Mutex<Option<SessionId>>,
    next_id: AtomicU64,
}

pub struct Service {
    tx: Sender<Command>,
    shared: Arc<Shared>,
    thread: Option<JoinHandle<Soc>>,
}

impl Service {
    pub fn start(soc: Soc) -> Service {
        Self::start_engine(Engine::new(soc))
    }

    pub fn start_engine(engine: Engine) -> Service {
        let (tx, rx) = mpsc::channel();
        let thread = std::thread::Builder::new()
            .name("croc-sim".into())
            .spawn(move || sim_loop(engine, rx))
            .expect("spawn simulation thread");
        Service {
            tx,
            shared: Arc::default(),
            thread: Some(thread),
        }
    }

    /// Open a session. The hello frame is already queued on return.
    pub fn connect(&self, wanted: Role) -> Session {
        let id = self.shared.next_id.fetch_add(1, Ordering::Relaxed);
        let role = match wanted {
            Role::Controller => {
                let mut c = self.shared.controller.lock().unwrap_or_else(|p| p.into_inner());
                if c.is_none() {
                    *c = Some(id);
                    Role::Controller
                } else {
                    Role::Observer
                }
            }
            Role::Observer => Role::Observer,
        };
        let outbox = Arc::new(Outbox::new());
        outbox.push(Message::Hello(Hello {
            hello: VERSION.to_string(),
            role,
        }));
        // A send error means the service is shutting down; the session then
        // sees its outbox closed.
        if self.tx.send(Command::Attach(id, role, outbox.clone())).is_err() {
            outbox.close();
        }
        Session {
            id,
            role,
            tx: self.tx.clone(),
            shared: self.shared.clone(),
            outbox,
            stash: VecDeque::new(),
            next_request: 1,
        }
    }

    /// Stop the simulation thread and hand back the platform.
    pub fn shutdown(mut self) -> Soc {
        self.stop().expect("simulation thread is joined once")
    }

    fn stop(&mut self) -> Option<Soc> {
        let _ = self.tx.send(Command::Shutdown);
        let handle = self.thread.take()?;
        Some(handle.join().expect("simulation thread panicked"))
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        self.stop();
    }
}

fn sim_loop(mut engine: Engine, rx: Receiver<Command>) -> Soc {
    let mut sessions: Vec<Attached> = Vec::new();
    loop {
        let cmd = if engine.is_running() {
            match rx.try_recv() {
                Ok(cmd) => Some(cmd),
                Err(TryRecvError::Empty) => None,
                Err(TryRecvError::Disconnected) => break,
            }
        } else {
            match rx.recv() {
                Ok(cmd) => Some(cmd),
                Err(_) => break,
            }
        };
        match cmd {
            Some(Command::Shutdown) => break,
            Some(cmd) => command(&mut engine, &mut sessions, cmd),
            None => {
                engine.advance();
            }
        }
        fan_out(&mut engine, &sessions);
    }
    for s in &sessions {
        s.outbox.close();
    }
    engine.into_soc()
}

fn command(engine: &mut Engine, sessions: &mut Vec<Attached>, cmd: Command) {
    match cmd {
        Command::Attach(id, role, outbox) => sessions.push(Attached { id, role, outbox }),
        Command::Detach(id) => {
            sessions.retain(|s| {
                if s.id == id {
                    s.outbox.close();
                }
                s.id != id
            });
        }
        Command::Request(id, req) => {
            let Some(s) = sessions.iter().find(|s| s.id == id) else {
                return;
            };
            let resp = engine.handle(s.role, &req);
            // Events raised while handling (e.g. `halted` from a step or a
            // pause) are delivered before the response.
            fan_out(engine, sessions);
            if req.method == "subscribe" && resp.result().is_some() {
                if let Ok(p) = serde_json::from_value::<params::Subscribe>(req.params.clone()) {
                    s.outbox.subscribe(p.channels);
                }
            }
            s.outbox.push(Message::Response(resp));
        }
        Command::Shutdown => {}
    }
}

fn fan_out(engine: &mut Engine, sessions: &[Attached]) {
    for ev in engine.take_events() {
        for s in sessions {
            s.outbox.publish(&ev);
        }
    }
}

/// Failure of [`Session::call`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CallError {
    #[error("service closed the session")]
    Closed,
    #[error("no response within the timeout")]
    Timeout,
}

/// One client's view of the service.
pub struct Session {
    id: SessionId,
    role: Role,
    tx: Sender<Command>,
    shared: Arc<Shared>,
    outbox: Arc<Outbox>,
    /// Frames received while [`Session::call`] waited for its response.
    stash: VecDeque<Message>,
    next_request: u64,
}

impl Session {
    pub fn role(&self) -> Role {
        self.role
    }

    /// Forward a request; the response arrives through [`Session::recv`].
    pub fn send(&self, req: Request) -> Result<(), CallError> {
        self.tx
            .send(Command::Request(self.id, req))
            .map_err(|_| CallError::Closed)
    }

    /// Forward a frame received from a client. Anything but a request is
    /// answered with a bad-params error.
    pub fn send_text(&self, text: &str) -> Result<(), CallError> {
        match Message::parse(text) {
            Ok(Message::Request(r)) => self.send(r),
            other => {
                let id = serde_json::from_str::<Value>(text)
                    .ok()
                    .and_then(|v| v.get("id").and_then(Value::as_u64));
                let why = match other {
                    Err(e) => e.to_string(),
                    Ok(_) => "expected a request".to_string(),
                };
                let err = super::protocol::RpcError::new(super::protocol::code::BAD_PARAMS, why);
                self.outbox.push(Message::Response(Response::err(id, err)));
                Ok(())
            }
        }
    }

    pub fn recv_timeout(&mut self, timeout: Duration) -> Option<Message> {
        self.stash.pop_front().or_else(|| self.outbox.recv_timeout(timeout))
    }

    pub fn try_recv(&mut self) -> Option<Message> {
        self.stash.pop_front().or_else(|| self.outbox.try_recv())
    }

    /// The session closed and everything has been read.
    pub fn is_closed(&self) -> bool {
        self.stash.is_empty() && self.outbox.is_closed() && self.outbox.is_empty()
    }

    /// Send a request and wait for its response. Other frames received in
    /// the meantime stay queued for [`Session::recv_timeout`].
    pub fn call(&mut self, method: &str, params: Value) -> Result<Response, CallError> {
        self.call_timeout(method, params, Duration::from_secs(30))
    }

    pub fn call_timeout(&mut self, method: &str, params: Value, timeout: Duration) -> Result<Response, CallError> {
        let id = self.next_request;
        self.next_request += 1;
        self.send(Request {
            id,
            method: method.to_string(),
            params,
        })?;
        let deadline = Instant::now() + timeout;
        let mut held = VecDeque::new();
        let result = loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                break Err(CallError::Timeout);
            }
            match self.outbox.recv_timeout(left) {
                Some(Message::Response(r)) if r.id == Some(id) => break Ok(r),
                Some(other) => held.push_back(other),
                None if self.outbox.is_closed() => break Err(CallError::Closed),
                None => {}
            }
        };
        self.stash.extend(held);
        result
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let mut c = self.shared.controller.lock().unwrap_or_else(|p| p.into_inner());
        if *c == Some(self.id) {
            *c = None;
        }
        drop(c);
        let _ = self.tx.send(Command::Detach(self.id));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::Asm;
    use crate::control::protocol::{Event, Hex32};
    use crate::isa::Op;
    use crate::soc::SocConfig;
    use serde_json::json;

    fn service() -> Service {
        let mut soc = Soc::build(SocConfig::mlem()).unwrap();
        let mut a = Asm::new(0x1000_0000);
        a.label("top").i(Op::Addi, 1, 1, 1).j("top");
        soc.write_mem(0x1000_0000, &a.finish().unwrap()).unwrap();
        Service::start(soc)
    }

    fn next_event(s: &mut Session) -> Event {
        loop {
            match s.recv_timeout(Duration::from_secs(10)).expect("event") {
                Message::Event(e) => return e,
                _ => continue,
            }
        }
    }

    #[test]
    fn hello_and_single_controller() {
        let svc = service();
        let mut a = svc.connect(Role::Controller);
        let b = svc.connect(Role::Controller);
        assert_eq!(a.role(), Role::Controller);
        assert_eq!(b.role(), Role::Observer);
        let Some(Message::Hello(h)) = a.try_recv() else {
            panic!()
        };
        assert_eq!(h.hello, "croc-ctl/1");
        drop(a);
        let c = svc.connect(Role::Controller);
        assert_eq!(c.role(), Role::Controller);
    }

    #[test]
    fn run_and_pause_across_threads() {
        let svc = service();
        let mut ctl = svc.connect(Role::Controller);
        let mut obs = svc.connect(Role::Observer);
        let r = ctl.call("run", Value::Null).unwrap();
        assert_eq!(r.result(), Some(&json!({"running": true})));
        let busy = ctl.call("step", Value::Null).unwrap();
        assert_eq!(busy.error().unwrap().code, 3);
        let r = obs.call("pause", Value::Null).unwrap();
        assert_eq!(r.error().unwrap().code, 5);
        let r = ctl.call("pause", Value::Null).unwrap();
        assert!(r.result().is_some());
        match next_event(&mut obs) {
            Event::Halted { reason, .. } => assert_eq!(reason, "paused"),
            e => panic!("{e:?}"),
        }
        let regs = obs.call("read_regs", Value::Null).unwrap();
        assert_eq!(regs.result().unwrap()["running"], json!(false));
        let soc = svc.shutdown();
        assert!(soc.cycle() > 0);
    }

    #[test]
    fn breakpoint_event_reaches_subscribed_and_unsubscribed_sessions() {
        let svc = service();
        let mut ctl = svc.connect(Role::Controller);
        ctl.call("set_breakpoint", json!({"addr": "0x10000004"})).unwrap();
        ctl.call("run", Value::Null).unwrap();
        assert_eq!(
            next_event(&mut ctl),
            Event::Halted {
                reason: "breakpoint".into(),
                pc: Hex32(0x1000_0004)
            }
        );
    }

    #[test]
    fn malformed_frames_get_an_error_response() {
        let svc = service();
        let mut s = svc.connect(Role::Controller);
        s.try_recv();
        s.send_text("{not json").unwrap();
        s.send_text(r#"{"id":9,"result":{}}"#).unwrap();
        for want in [None, Some(9)] {
            let Some(Message::Response(r)) = s.recv_timeout(Duration::from_secs(5)) else {
                panic!()
            };
            assert_eq!((r.id, r.error().unwrap().code), (want, 2));
        }
    }
}

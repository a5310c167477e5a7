//! Per-session outgoing queue.
//!
//! The simulation thread pushes without ever waiting. Responses, `halted`
//! and `overflow` frames are always queued. Events on a subscription channel
//! are queued only while that channel holds fewer than [`CHANNEL_LIMIT`]
//! undelivered frames; the first event dropped in an episode queues a single
//! `overflow` frame, and the episode ends once the consumer has drained the
//! channel.

use std::collections::{BTreeSet, VecDeque};
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::Duration;

use super::protocol::{Channel, Event, Message};

pub const CHANNEL_LIMIT: usize = 65_536;

const CHANNELS: usize = 4;

fn slot(c: Channel) -> usize {
    match c {
        Channel::Pins => 0,
        Channel::Uart => 1,
        Channel::Neopixel => 2,
        Channel::Stats => 3,
    }
}

#[derive(Debug, Default)]
struct Inner {
    queue: VecDeque<Message>,
    subscribed: BTreeSet<Channel>,
    queued: [usize; CHANNELS],
    overflowed: [bool; CHANNELS],
    closed: bool,
}

#[derive(Debug)]
pub struct Outbox {
    inner: Mutex<Inner>,
    ready: Condvar,
    limit: usize,
}

impl Default for Outbox {
    fn default() -> Self {
        Self::with_limit(CHANNEL_LIMIT)
    }
}

impl Outbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_limit(limit: usize) -> Self {
        Outbox {
            inner: Mutex::new(Inner::default()),
            ready: Condvar::new(),
            limit,
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Queue a frame that is never dropped.
    pub fn push(&self, msg: Message) {
        self.lock().queue.push_back(msg);
        self.ready.notify_all();
    }

    /// Queue an event subject to subscriptions and the drop policy. Returns
    /// whether it was queued.
    pub fn publish(&self, event: &Event) -> bool {
        let mut g = self.lock();
        let Some(ch) = event.channel() else {
            g.queue.push_back(Message::Event(event.clone()));
            drop(g);
            self.ready.notify_all();
            return true;
        };
        if !g.subscribed.contains(&ch) {
            return false;
        }
        let i = slot(ch);
        if g.queued[i] >= self.limit {
            if !g.overflowed[i] {
                g.overflowed[i] = true;
                g.queue.push_back(Message::Event(Event::Overflow { channel: ch }));
                drop(g);
                self.ready.notify_all();
            }
            return false;
        }
        g.queued[i] += 1;
        g.queue.push_back(Message::Event(event.clone()));
        drop(g);
        self.ready.notify_all();
        true
    }

    /// Replace the subscription set.
    pub fn subscribe(&self, channels: impl IntoIterator<Item = Channel>) {
        self.lock().subscribed = channels.into_iter().collect();
    }

    pub fn subscriptions(&self) -> Vec<Channel> {
        self.lock().subscribed.iter().copied().collect()
    }

    fn pop(&self, g: &mut Inner) -> Option<Message> {
        let msg = g.queue.pop_front()?;
        if let Message::Event(e) = &msg {
            if let (Some(ch), false) = (e.channel(), matches!(e, Event::Overflow { .. })) {
                let i = slot(ch);
                g.queued[i] -= 1;
                if g.queued[i] == 0 {
                    g.overflowed[i] = false;
                }
            }
        }
        Some(msg)
    }

    pub fn try_recv(&self) -> Option<Message> {
        let mut g = self.lock();
        self.pop(&mut g)
    }

    /// Wait up to `timeout` for a frame. `None` on timeout, or once closed
    /// and empty.
    pub fn recv_timeout(&self, timeout: Duration) -> Option<Message> {
        let g = self.lock();
        let (mut g, _) = self
            .ready
            .wait_timeout_while(g, timeout, |g| g.queue.is_empty() && !g.closed)
            .unwrap_or_else(|p| p.into_inner());
        self.pop(&mut g)
    }

    /// Wake all waiters; queued frames can still be drained.
    pub fn close(&self) {
        self.lock().closed = true;
        self.ready.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.lock().closed
    }

    pub fn len(&self) -> usize {
        self.lock().queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::protocol::{Hex, Hex32};
    use crate::pins::Pin;

    fn pin_event(cycle: u64) -> Event {
        Event::Pin {
            cycle: Hex(cycle),
            time_ns: Hex(cycle * 50),
            pin: Pin::Gpio(0),
            level: (cycle % 2) as u8,
        }
    }

    #[test]
    fn unsubscribed_channels_are_filtered() {
        let o = Outbox::new();
        assert!(!o.publish(&pin_event(1)));
        o.subscribe([Channel::Pins]);
        assert!(o.publish(&pin_event(1)));
        assert!(!o.publish(&Event::UartTx { byte: 1 }));
        assert_eq!(o.len(), 1);
    }

    #[test]
    fn overflow_is_reported_once_per_episode() {
        let o = Outbox::with_limit(4);
        o.subscribe([Channel::Pins]);
        for c in 0..10 {
            o.publish(&pin_event(c));
        }
        let halted = Event::Halted {
            reason: "breakpoint".into(),
            pc: Hex32(0),
        };
        assert!(o.publish(&halted));
        let frames: Vec<Message> = std::iter::from_fn(|| o.try_recv()).collect();
        assert_eq!(frames.len(), 6);
        assert_eq!(frames[4], Message::Event(Event::Overflow { channel: Channel::Pins }));
        assert_eq!(frames[5], Message::Event(halted));

        // drained: a new episode may overflow again
        for c in 0..6 {
            o.publish(&pin_event(c));
        }
        let overflows = std::iter::from_fn(|| o.try_recv())
            .filter(|m| matches!(m, Message::Event(Event::Overflow { .. })))
            .count();
        assert_eq!(overflows, 1);
    }

    #[test]
    fn recv_times_out_and_close_wakes() {
        let o = std::sync::Arc::new(Outbox::new());
        assert_eq!(o.recv_timeout(Duration::from_millis(5)), None);
        let o2 = o.clone();
        let t = std::thread::spawn(move || o2.recv_timeout(Duration::from_secs(30)));
        std::thread::sleep(Duration::from_millis(10));
        o.close();
        assert_eq!(t.join().unwrap(), None);
    }
}

//! Round-synchronous flooding with a hop budget.
//!
//! Each trial every agent publishes one fresh message with `ttl = gamma`.
//! [`Network::step`] then performs one synchronous exchange: every held
//! message with `ttl > 0` is copied to all graph neighbours with `ttl - 1`.
//! Receivers drop keys they have already seen, and the held set of every
//! agent is replaced by what it accepted this round. A message created by
//! `m` at trial `t` is therefore accepted by `m'` during the exchange of
//! trial `t + d(m, m') - 1` and is first usable for decisions at trial
//! `t + d(m, m')`, provided `d(m, m') <= gamma`.

use std::io::Write;
use std::sync::Arc;

use crate::graph::Graph;

/// Globally unique identity of a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MessageKey {
    pub origin: usize,
    pub created_at: u64,
}

/// Broadcast of the private protocol: the last released noisy means and the
/// current own pull counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivatePayload {
    pub noisy_means: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Broadcast of the byzantine protocol: one (possibly corrupted) reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ByzantinePayload {
    pub arm: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Private(Arc<PrivatePayload>),
    Byzantine(ByzantinePayload),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Private(_) => "private",
            Payload::Byzantine(_) => "byzantine",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub origin: usize,
    pub created_at: u64,
    /// Forwards left.
    pub ttl: u32,
    pub payload: Payload,
}

impl Message {
    pub fn key(&self) -> MessageKey {
        MessageKey {
            origin: self.origin,
            created_at: self.created_at,
        }
    }
}

/// Outcome of offering a message to a mailbox.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Receipt {
    Accepted,
    Duplicate,
    /// Older than anything that can still be in flight.
    Stale,
}

/// Seen-key memory over a sliding window of creation times.
///
/// A message lives at most `min(gamma, M - 1) + 1` rounds, so keys older than
/// the window can never be offered again by the protocol.
#[derive(Debug, Clone)]
struct SeenWindow {
    agents: usize,
    stamps: Vec<Option<u64>>,
    bits: Vec<bool>,
}

impl SeenWindow {
    fn new(agents: usize, gamma: u32) -> Self {
        let reach = (gamma as usize).min(agents.saturating_sub(1));
        let width = reach + 2;
        SeenWindow {
            agents,
            stamps: vec![None; width],
            bits: vec![false; width * agents],
        }
    }

    fn insert(&mut self, key: MessageKey) -> Receipt {
        let width = self.stamps.len();
        let slot = (key.created_at % width as u64) as usize;
        let row = slot * self.agents..(slot + 1) * self.agents;
        match self.stamps[slot] {
            Some(stamp) if stamp > key.created_at => return Receipt::Stale,
            Some(stamp) if stamp == key.created_at => {}
            _ => {
                self.stamps[slot] = Some(key.created_at);
                self.bits[row.clone()].fill(false);
            }
        }
        let bit = &mut self.bits[row.start + key.origin];
        if *bit {
            Receipt::Duplicate
        } else {
            *bit = true;
            Receipt::Accepted
        }
    }
}

/// Per-agent message state.
#[derive(Debug, Clone)]
pub struct Mailbox {
    held: Vec<Message>,
    seen: SeenWindow,
    latest: Vec<Option<(u64, Arc<PrivatePayload>)>>,
}

impl Mailbox {
    pub fn new(agents: usize, gamma: u32) -> Self {
        Mailbox {
            held: Vec::new(),
            seen: SeenWindow::new(agents, gamma),
            latest: vec![None; agents],
        }
    }

    /// Offers `msg` with `ttl` as the remaining forwards. Accepted messages
    /// are held for rebroadcast and, for private payloads, may become the
    /// latest snapshot of their origin.
    pub fn receive(&mut self, msg: &Message, ttl: u32) -> Receipt {
        let receipt = self.seen.insert(msg.key());
        if receipt == Receipt::Accepted {
            if let Payload::Private(p) = &msg.payload {
                let slot = &mut self.latest[msg.origin];
                if slot.as_ref().is_none_or(|(t, _)| *t < msg.created_at) {
                    *slot = Some((msg.created_at, Arc::clone(p)));
                }
            }
            self.held.push(Message { ttl, ..msg.clone() });
        }
        receipt
    }

    fn publish(&mut self, msg: Message) {
        self.seen.insert(msg.key());
        self.held.push(msg);
    }

    /// Newest private payload received from `origin`.
    pub fn latest_snapshot(&self, origin: usize) -> Option<&PrivatePayload> {
        self.latest[origin].as_ref().map(|(_, p)| p.as_ref())
    }

    pub fn latest_created_at(&self, origin: usize) -> Option<u64> {
        self.latest[origin].as_ref().map(|(t, _)| *t)
    }

    /// `(origin, payload)` for every origin with a snapshot, by origin index.
    pub fn latest_snapshots(&self) -> impl Iterator<Item = (usize, &PrivatePayload)> {
        self.latest
            .iter()
            .enumerate()
            .filter_map(|(m, s)| s.as_ref().map(|(_, p)| (m, p.as_ref())))
    }

    /// Messages accepted during the last exchange (plus anything published
    /// since).
    pub fn held(&self) -> &[Message] {
        &self.held
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DeliveryReport {
    pub delivered: usize,
    pub duplicates: usize,
    pub stale: usize,
    /// Held messages with no forwards left.
    pub expired: usize,
}

/// One row of the optional message trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub trial: u64,
    pub origin: usize,
    pub created_at: u64,
    pub receiver: usize,
    pub ttl_at_receipt: u32,
    pub payload_kind: &'static str,
}

pub struct Network {
    adj: Vec<Vec<usize>>,
    gamma: u32,
    mailboxes: Vec<Mailbox>,
    outgoing: Vec<Vec<Message>>,
    trace: Option<(u64, Vec<TraceRecord>)>,
}

impl Network {
    pub fn new(graph: &Graph, gamma: u32) -> Self {
        let n = graph.node_count();
        Network {
            adj: (0..n).map(|i| graph.neighbors(i).to_vec()).collect(),
            gamma,
            mailboxes: (0..n).map(|_| Mailbox::new(n, gamma)).collect(),
            outgoing: vec![Vec::new(); n],
            trace: None,
        }
    }

    /// Records every accepted delivery during trials `1..=last_trial`.
    pub fn enable_trace(&mut self, last_trial: u64) {
        self.trace = Some((last_trial, Vec::new()));
    }

    pub fn trace(&self) -> &[TraceRecord] {
        self.trace.as_ref().map_or(&[], |(_, rows)| rows.as_slice())
    }

    pub fn gamma(&self) -> u32 {
        self.gamma
    }

    pub fn agents(&self) -> usize {
        self.mailboxes.len()
    }

    pub fn mailbox(&self, agent: usize) -> &Mailbox {
        &self.mailboxes[agent]
    }

    /// Enqueues `agent`'s own message for trial `t`.
    pub fn publish(&mut self, agent: usize, t: u64, payload: Payload) {
        self.mailboxes[agent].publish(Message {
            origin: agent,
            created_at: t,
            ttl: self.gamma,
            payload,
        });
    }

    /// One synchronous exchange.
    pub fn step(&mut self, t: u64) -> DeliveryReport {
        let mut report = DeliveryReport::default();
        for (out, mb) in self.outgoing.iter_mut().zip(&mut self.mailboxes) {
            out.clear();
            std::mem::swap(out, &mut mb.held);
        }
        let tracing = matches!(self.trace, Some((last, _)) if t <= last);
        for sender in 0..self.outgoing.len() {
            for msg in &self.outgoing[sender] {
                if msg.ttl == 0 {
                    report.expired += 1;
                    continue;
                }
                let ttl = msg.ttl - 1;
                for &receiver in &self.adj[sender] {
                    match self.mailboxes[receiver].receive(msg, ttl) {
                        Receipt::Accepted => {
                            report.delivered += 1;
                            if tracing {
                                if let Some((_, rows)) = &mut self.trace {
                                    rows.push(TraceRecord {
                                        trial: t,
                                        origin: msg.origin,
                                        created_at: msg.created_at,
                                        receiver,
                                        ttl_at_receipt: ttl,
                                        payload_kind: msg.payload.kind(),
                                    });
                                }
                            }
                        }
                        Receipt::Duplicate => report.duplicates += 1,
                        Receipt::Stale => report.stale += 1,
                    }
                }
            }
        }
        report
    }

    /// Creation time of the oldest message still held anywhere.
    pub fn oldest_live(&self) -> Option<u64> {
        self.mailboxes
            .iter()
            .flat_map(|mb| mb.held.iter().map(|m| m.created_at))
            .min()
    }
}

pub fn write_trace<W: Write>(rows: &[TraceRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "origin",
        "created_at",
        "receiver",
        "ttl_at_receipt",
        "payload_kind",
    ])?;
    for r in rows {
        w.write_record([
            r.trial.to_string(),
            r.origin.to_string(),
            r.created_at.to_string(),
            r.receiver.to_string(),
            r.ttl_at_receipt.to_string(),
            r.payload_kind.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

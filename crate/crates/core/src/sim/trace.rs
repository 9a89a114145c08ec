use std::fmt::Debug;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{Network, RoundOutcome};
use crate::graph::{Graph, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Delete,
    Send,
    EdgeMake,
    EdgeDrop,
    StateChange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub round: usize,
    pub kind: TraceKind,
    pub actor: NodeId,
    pub details: serde_json::Value,
}

/// Collects events and a running hash. Disabled logs cost nothing.
pub struct TraceLog {
    enabled: bool,
    hasher: Sha256,
    events: Vec<TraceEvent>,
}

impl TraceLog {
    pub fn new(enabled: bool) -> Self {
        TraceLog { enabled, hasher: Sha256::new(), events: Vec::new() }
    }

    fn push(&mut self, ev: TraceEvent) {
        let line = serde_json::to_string(&ev).expect("trace events serialize");
        self.hasher.update(line.as_bytes());
        self.hasher.update(b"\n");
        self.events.push(ev);
    }

    pub fn round<N: Clone + Debug>(&mut self, round: usize, out: &RoundOutcome, net: &Network<N>) {
        if !self.enabled {
            return;
        }
        self.push(TraceEvent { round, kind: TraceKind::Delete, actor: out.deleted, details: json!({}) });
        for m in &out.delivered {
            self.push(TraceEvent {
                round,
                kind: TraceKind::Send,
                actor: m.sender,
                details: json!({ "to": m.recipient, "depth": m.depth, "bits": m.size_bits, "payload": m.payload }),
            });
        }
        for &(a, b) in &out.dropped {
            self.push(TraceEvent { round, kind: TraceKind::EdgeDrop, actor: a, details: json!({ "peer": b }) });
        }
        for &(a, b) in &out.added {
            self.push(TraceEvent { round, kind: TraceKind::EdgeMake, actor: a, details: json!({ "peer": b }) });
        }
        for &v in &out.touched {
            if let Some(node) = net.node(v) {
                let digest = hex(&Sha256::digest(format!("{node:?}").as_bytes())[..8]);
                self.push(TraceEvent { round, kind: TraceKind::StateChange, actor: v, details: json!({ "state": digest }) });
            }
        }
    }

    /// Hex digest of all events so far, and the events themselves.
    pub fn finish(self) -> (String, Vec<TraceEvent>) {
        if !self.enabled {
            return (String::new(), Vec::new());
        }
        (hex(&self.hasher.finalize()), self.events)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes events as JSON lines.
pub fn write_jsonl(events: &[TraceEvent], mut w: impl Write) -> std::io::Result<()> {
    for ev in events {
        serde_json::to_writer(&mut w, ev)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Applies the delete and edge events of `round` to `g`.
pub fn replay_round(g: &mut Graph, events: &[TraceEvent], round: usize) {
    for ev in events.iter().filter(|e| e.round == round) {
        let peer = || NodeId(ev.details["peer"].as_u64().expect("edge events name a peer") as u32);
        match ev.kind {
            TraceKind::Delete => {
                g.remove_vertex(ev.actor);
            }
            TraceKind::EdgeDrop => {
                g.remove_edge(ev.actor, peer());
            }
            TraceKind::EdgeMake => {
                g.add_edge(ev.actor, peer());
            }
            TraceKind::Send | TraceKind::StateChange => {}
        }
    }
}

//! Network-layer packet rate tracer: periodic per-node/per-face counters
//! for interests, data and nacks, written as CSV, plus per-consumer data
//! path attribution used by strategy comparisons.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use crate::packet::{NodeId, Packet};
use crate::strategy::FaceId;
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CounterType {
    InInterests,
    OutInterests,
    InData,
    OutData,
    InNacks,
    OutNacks,
}

impl CounterType {
    fn label(self) -> &'static str {
        match self {
            CounterType::InInterests => "InInterests",
            CounterType::OutInterests => "OutInterests",
            CounterType::InData => "InData",
            CounterType::OutData => "OutData",
            CounterType::InNacks => "InNacks",
            CounterType::OutNacks => "OutNacks",
        }
    }

    fn classify(packet: &Packet, incoming: bool) -> CounterType {
        match (packet, incoming) {
            (Packet::Interest(_), true) => CounterType::InInterests,
            (Packet::Interest(_), false) => CounterType::OutInterests,
            (Packet::Data(_), true) => CounterType::InData,
            (Packet::Data(_), false) => CounterType::OutData,
            (Packet::Nack(_), true) => CounterType::InNacks,
            (Packet::Nack(_), false) => CounterType::OutNacks,
        }
    }
}

/// One CSV row: counters for a (node, face, type) within one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSample {
    pub time_ms: f64,
    pub node: NodeId,
    pub face: FaceId,
    pub counter: CounterType,
    pub packets: u64,
    pub kilobytes: f64,
}

#[derive(Debug)]
pub struct Tracer {
    pub interval: SimTime,
    /// (interval index, node, face, type) -> (packets, bytes)
    intervals: BTreeMap<(u64, NodeId, FaceId, CounterType), (u64, u64)>,
    lifetime: BTreeMap<(NodeId, FaceId, CounterType), (u64, u64)>,
    /// consumer -> (forwarding node, out face) -> data packets forwarded
    /// on behalf of that consumer's interests.
    flows: BTreeMap<NodeId, BTreeMap<(NodeId, FaceId), u64>>,
}

pub const DEFAULT_TRACE_INTERVAL: SimTime = SimTime(500_000_000);

impl Tracer {
    pub fn new(interval: SimTime) -> Self {
        assert!(interval.as_ns() > 0, "tracer interval must be positive");
        Tracer {
            interval,
            intervals: BTreeMap::new(),
            lifetime: BTreeMap::new(),
            flows: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, now: SimTime, node: NodeId, face: FaceId, packet: &Packet, incoming: bool) {
        let counter = CounterType::classify(packet, incoming);
        let idx = now.as_ns() / self.interval.as_ns();
        let bytes = packet.wire_size_bytes();
        let slot = self.intervals.entry((idx, node, face, counter)).or_insert((0, 0));
        slot.0 += 1;
        slot.1 += bytes;
        let total = self.lifetime.entry((node, face, counter)).or_insert((0, 0));
        total.0 += 1;
        total.1 += bytes;
    }

    /// Attributes one forwarded data packet to the consumer whose
    /// interest pulled it.
    pub fn record_flow(&mut self, consumer: NodeId, node: NodeId, face: FaceId) {
        *self
            .flows
            .entry(consumer)
            .or_default()
            .entry((node, face))
            .or_default() += 1;
    }

    pub fn samples(&self) -> Vec<RateSample> {
        self.intervals
            .iter()
            .map(|(&(idx, node, face, counter), &(packets, bytes))| RateSample {
                time_ms: SimTime(idx * self.interval.as_ns()).as_ms_f64(),
                node,
                face,
                counter,
                packets,
                kilobytes: bytes as f64 / 1000.0,
            })
            .collect()
    }

    pub fn lifetime_total(&self, node: NodeId, face: FaceId, counter: CounterType) -> (u64, u64) {
        self.lifetime.get(&(node, face, counter)).copied().unwrap_or((0, 0))
    }

    /// Sum of a counter over all faces of a node.
    pub fn node_total(&self, node: NodeId, counter: CounterType) -> u64 {
        self.lifetime
            .iter()
            .filter(|(&(n, _, c), _)| n == node && c == counter)
            .map(|(_, &(packets, _))| packets)
            .sum()
    }

    /// (forwarding node, out face) -> data packets forwarded for this
    /// consumer's interests.
    pub fn flow_of(&self, consumer: NodeId) -> BTreeMap<(NodeId, FaceId), u64> {
        self.flows.get(&consumer).cloned().unwrap_or_default()
    }

    pub fn write_csv<W: Write>(&self, mut out: W, node_names: &[String]) -> io::Result<()> {
        writeln!(out, "time_ms,node,face,type,packets,kilobytes")?;
        for s in self.samples() {
            writeln!(
                out,
                "{:.3},{},{},{},{},{:.3}",
                s.time_ms,
                node_names.get(s.node).map(String::as_str).unwrap_or("?"),
                s.face.0,
                s.counter.label(),
                s.packets,
                s.kilobytes
            )?;
        }
        Ok(())
    }

    pub fn write_csv_to_path(&self, path: &Path, node_names: &[String]) -> io::Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(io::BufWriter::new(file), node_names)
    }
}

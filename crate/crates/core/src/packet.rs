//! The three packet types carried over simulated links: Interest, Data
//! and Nack.

use serde::{Deserialize, Serialize};

use crate::name::{sha256_bytes, Name};
use crate::time::SimTime;

/// Node identifier within one simulation.
pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interest {
    pub name: Name,
    /// Random 32-bit value from the scenario's seeded generator.
    pub nonce: u32,
    pub lifetime: SimTime,
    pub hop_count: u32,
    /// Consumer node that originated this interest. Simulation-side
    /// bookkeeping for per-flow path traces, not part of the protocol.
    pub origin: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Data {
    pub name: Name,
    pub content: Vec<u8>,
    /// Placeholder bytes; never cryptographically verified.
    pub publisher_signature: Vec<u8>,
    pub sha256: [u8; 32],
}

impl Data {
    pub fn new(name: Name, content: Vec<u8>, publisher_signature: Vec<u8>) -> Self {
        let sha256 = sha256_bytes(&content);
        Data {
            name,
            content,
            publisher_signature,
            sha256,
        }
    }

    /// True iff the stored digest matches a recomputation over content.
    pub fn digest_ok(&self) -> bool {
        sha256_bytes(&self.content) == self.sha256
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NackReason {
    NoRoute,
    NoContent,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nack {
    pub name: Name,
    pub nonce: u32,
    pub reason: NackReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Packet {
    Interest(Interest),
    Data(Data),
    Nack(Nack),
}

/// Fixed wire overhead: a data packet carries its content plus a 40-byte
/// header; interests and nacks are 30 bytes flat. Placeholder sizes, only
/// used by the link serialization model and the rate tracer.
pub const DATA_HEADER_BYTES: u64 = 40;
pub const INTEREST_WIRE_BYTES: u64 = 30;

impl Packet {
    pub fn wire_size_bytes(&self) -> u64 {
        match self {
            Packet::Data(d) => d.content.len() as u64 + DATA_HEADER_BYTES,
            Packet::Interest(_) | Packet::Nack(_) => INTEREST_WIRE_BYTES,
        }
    }

    pub fn name(&self) -> &Name {
        match self {
            Packet::Interest(i) => &i.name,
            Packet::Data(d) => &d.name,
            Packet::Nack(n) => &n.name,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::name::Name;

    #[test]
    fn data_digest_recomputes() {
        let d = Data::new(Name::from_components(["x"]), b"hello".to_vec(), vec![]);
        assert!(d.digest_ok());
        let mut tampered = d.clone();
        tampered.content[0] ^= 1;
        assert!(!tampered.digest_ok());
    }

    #[test]
    fn wire_sizes() {
        let d = Data::new(Name::from_components(["x"]), vec![b'A'; 64], vec![]);
        assert_eq!(Packet::Data(d).wire_size_bytes(), 104);
        let i = Interest {
            name: Name::from_components(["x"]),
            nonce: 1,
            lifetime: SimTime::from_ms(4000),
            hop_count: 0,
            origin: None,
        };
        assert_eq!(Packet::Interest(i).wire_size_bytes(), 30);
    }
}

//! Per-node NDN forwarding plane: Content Store, Pending Interest Table,
//! Forwarding Information Base, and the incoming Interest/Data/Nack
//! pipelines with a strategy hook.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::name::{sha256_hex, Name};
use crate::packet::{Data, Interest, Nack, NackReason, NodeId, Packet};
use crate::strategy::{FaceId, Strategy};
use crate::time::SimTime;

/// Conventional default interest lifetime / PIT entry lifetime.
pub const DEFAULT_PIT_LIFETIME: SimTime = SimTime(4_000_000_000);

pub type LinkId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    /// Attached to one end of a link; `peer` is the node on the far side.
    Link { link: LinkId, peer: NodeId },
    /// Attached to a local application.
    Application,
}

/// A packet the pipeline wants sent out of a face.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub face: FaceId,
    pub packet: Packet,
}

#[derive(Debug, Default)]
pub struct ContentStore {
    entries: BTreeMap<Name, Data>,
    insertion_order: VecDeque<Name>,
    pub capacity: Option<usize>,
}

impl ContentStore {
    /// Inserts under the data's own name, evicting the oldest entry when
    /// at capacity.
    pub fn insert(&mut self, data: Data) {
        if self.entries.contains_key(&data.name) {
            self.entries.insert(data.name.clone(), data);
            return;
        }
        if let Some(cap) = self.capacity {
            while self.entries.len() >= cap {
                match self.insertion_order.pop_front() {
                    Some(oldest) => {
                        self.entries.remove(&oldest);
                    }
                    None => break,
                }
            }
        }
        self.insertion_order.push_back(data.name.clone());
        self.entries.insert(data.name.clone(), data);
    }

    /// Digest-aware exact lookup: a request for `/x/sha256digest=h` only
    /// returns stored content whose digest is `h`.
    pub fn find(&self, name: &Name) -> Option<&Data> {
        let base = name.strip_digest();
        let data = self.entries.get(&base)?;
        if let Some(wanted) = name.digest_hex() {
            if sha256_hex(&data.content) != wanted {
                return None;
            }
        }
        Some(data)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &Name> {
        self.entries.keys()
    }
}

#[derive(Debug, Clone)]
pub struct PitEntry {
    pub name: Name,
    pub nonces: BTreeSet<u32>,
    /// Downstream faces with interest arrival timestamps.
    pub in_faces: BTreeMap<FaceId, SimTime>,
    /// Upstream faces already tried.
    pub out_faces: BTreeSet<FaceId>,
    /// Tried faces that came back with a nack.
    pub nacked_faces: BTreeSet<FaceId>,
    /// Strategy-ranked hops still available for nack retries.
    pub ranked_hops: Vec<FaceId>,
    pub expiry: SimTime,
    /// Originating consumers of the aggregated interests (trace only).
    pub origins: BTreeSet<NodeId>,
    /// Kept so a nack retry can re-emit the same interest.
    pub interest: Interest,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FibEntry {
    pub prefix: Name,
    /// Ranked ascending by cost, ties by face id; no duplicate faces.
    pub nexthops: Vec<(FaceId, u64)>,
}

/// JSON-serializable snapshot of one node's tables.
#[derive(Debug, Serialize)]
pub struct TableDump {
    pub node: NodeId,
    pub cs: Vec<String>,
    pub pit: Vec<String>,
    pub fib: Vec<FibDumpEntry>,
}

#[derive(Debug, Serialize)]
pub struct FibDumpEntry {
    pub prefix: String,
    pub nexthops: Vec<u32>,
}

#[derive(Debug)]
pub struct Forwarder {
    pub node: NodeId,
    faces: BTreeMap<FaceId, FaceKind>,
    next_face: u32,
    pub cs: ContentStore,
    pit: BTreeMap<Name, PitEntry>,
    fib: BTreeMap<Name, FibEntry>,
    /// (name, expiry) pairs for PIT entries created since last drained;
    /// the engine schedules expiry events from these.
    pub new_pit_expiries: Vec<(Name, SimTime)>,
    pub unsolicited_data_dropped: u64,
    /// Recorded internal invariant breaches; empty on a healthy run.
    pub violations: Vec<String>,
}

impl Forwarder {
    pub fn new(node: NodeId) -> Self {
        Forwarder {
            node,
            faces: BTreeMap::new(),
            next_face: 0,
            cs: ContentStore::default(),
            pit: BTreeMap::new(),
            fib: BTreeMap::new(),
            new_pit_expiries: Vec::new(),
            unsolicited_data_dropped: 0,
            violations: Vec::new(),
        }
    }

    pub fn add_face(&mut self, kind: FaceKind) -> FaceId {
        let id = FaceId(self.next_face);
        self.next_face += 1;
        self.faces.insert(id, kind);
        id
    }

    pub fn face_kind(&self, face: FaceId) -> Option<FaceKind> {
        self.faces.get(&face).copied()
    }

    pub fn faces(&self) -> impl Iterator<Item = (FaceId, FaceKind)> + '_ {
        self.faces.iter().map(|(&f, &k)| (f, k))
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    // --- FIB --------------------------------------------------------------

    /// Adds or updates one next hop; re-ranks by (cost, face id).
    pub fn fib_add_nexthop(&mut self, prefix: Name, face: FaceId, cost: u64) {
        let entry = self.fib.entry(prefix.clone()).or_insert(FibEntry {
            prefix,
            nexthops: Vec::new(),
        });
        match entry.nexthops.iter_mut().find(|(f, _)| *f == face) {
            Some(hop) => hop.1 = cost,
            None => entry.nexthops.push((face, cost)),
        }
        entry.nexthops.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    }

    /// Replaces all FIB entries (wholesale route recompute).
    pub fn fib_replace_all(&mut self, entries: Vec<FibEntry>) {
        self.fib.clear();
        for mut e in entries {
            e.nexthops.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
            self.fib.insert(e.prefix.clone(), e);
        }
    }

    /// Longest-prefix match over the FIB.
    pub fn fib_lpm(&self, name: &Name) -> Option<&FibEntry> {
        self.fib
            .values()
            .filter(|e| e.prefix.is_prefix_of(name))
            .max_by_key(|e| e.prefix.len())
    }

    pub fn fib_entries(&self) -> impl Iterator<Item = &FibEntry> {
        self.fib.values()
    }

    // --- PIT --------------------------------------------------------------

    pub fn pit_len(&self) -> usize {
        self.pit.len()
    }

    pub fn pit_names(&self) -> impl Iterator<Item = &Name> {
        self.pit.keys()
    }

    /// Removes an expired entry. Called by the engine's expiry timer; a
    /// still-live entry (satisfied and re-created) is left alone.
    pub fn pit_expire(&mut self, name: &Name, now: SimTime) {
        if let Some(entry) = self.pit.get(name) {
            if entry.expiry <= now {
                self.pit.remove(name);
            }
        }
    }

    /// Cross-checks table invariants; appends findings to `violations`.
    pub fn check_invariants(&mut self, now: SimTime) {
        for entry in self.pit.values() {
            if entry.in_faces.is_empty() {
                self.violations
                    .push(format!("node {}: PIT entry {} has no in-faces", self.node, entry.name));
            }
            if entry.expiry < now {
                self.violations.push(format!(
                    "node {}: PIT entry {} survived past expiry",
                    self.node, entry.name
                ));
            }
        }
    }

    pub fn dump_tables(&self) -> TableDump {
        TableDump {
            node: self.node,
            cs: self.cs.names().map(|n| n.to_string()).collect(),
            pit: self.pit.keys().map(|n| n.to_string()).collect(),
            fib: self
                .fib
                .values()
                .map(|e| FibDumpEntry {
                    prefix: e.prefix.to_string(),
                    nexthops: e.nexthops.iter().map(|(f, _)| f.0).collect(),
                })
                .collect(),
        }
    }

    // --- pipelines --------------------------------------------------------

    pub fn on_incoming_interest(
        &mut self,
        strategy: &mut dyn Strategy,
        in_face: FaceId,
        interest: Interest,
        now: SimTime,
    ) -> Vec<Emission> {
        // duplicate nonce for a known name: reject
        if let Some(entry) = self.pit.get(&interest.name) {
            if entry.nonces.contains(&interest.nonce) {
                return vec![Emission {
                    face: in_face,
                    packet: Packet::Nack(Nack {
                        name: interest.name,
                        nonce: interest.nonce,
                        reason: NackReason::Duplicate,
                    }),
                }];
            }
        }

        // content store short-circuit
        if let Some(data) = self.cs.find(&interest.name) {
            return vec![Emission {
                face: in_face,
                packet: Packet::Data(data.clone()),
            }];
        }

        // Aggregate into an existing entry. A new nonce from elsewhere may
        // mean the pending path loops through this requester, so also try
        // one more ranked hop; without this, simultaneous requesters can
        // deadlock in a cycle of mutually aggregated entries.
        if let Some(entry) = self.pit.get_mut(&interest.name) {
            entry.nonces.insert(interest.nonce);
            entry.in_faces.entry(in_face).or_insert(now);
            entry.origins.extend(interest.origin);
            let retry = entry
                .ranked_hops
                .iter()
                .copied()
                .find(|f| *f != in_face && !entry.out_faces.contains(f));
            if let Some(face) = retry {
                entry.out_faces.insert(face);
                let mut forwarded = interest;
                forwarded.hop_count += 1;
                return vec![Emission {
                    face,
                    packet: Packet::Interest(forwarded),
                }];
            }
            return Vec::new();
        }

        // new entry: consult FIB and strategy
        let nack = |reason| {
            vec![Emission {
                face: in_face,
                packet: Packet::Nack(Nack {
                    name: interest.name.clone(),
                    nonce: interest.nonce,
                    reason,
                }),
            }]
        };
        let Some(fib_entry) = self.fib_lpm(&interest.name) else {
            return nack(NackReason::NoRoute);
        };
        let ranked =
            match strategy.after_receive_interest(&interest, in_face, &fib_entry.nexthops, now) {
                Ok(ranked) => ranked,
                Err(_) => return nack(NackReason::NoRoute),
            };
        let out_face = ranked[0];
        let expiry = now + interest.lifetime;
        let mut forwarded = interest.clone();
        forwarded.hop_count += 1;
        let mut entry = PitEntry {
            name: interest.name.clone(),
            nonces: BTreeSet::from([interest.nonce]),
            in_faces: BTreeMap::from([(in_face, now)]),
            out_faces: BTreeSet::from([out_face]),
            nacked_faces: BTreeSet::new(),
            ranked_hops: ranked,
            expiry,
            origins: BTreeSet::new(),
            interest: forwarded.clone(),
        };
        entry.origins.extend(interest.origin);
        self.pit.insert(interest.name.clone(), entry);
        self.new_pit_expiries.push((interest.name, expiry));
        vec![Emission {
            face: out_face,
            packet: Packet::Interest(forwarded),
        }]
    }

    /// Satisfies matching PIT entries. Returns the emissions plus the
    /// trace origins of every satisfied interest.
    pub fn on_incoming_data(
        &mut self,
        strategy: &mut dyn Strategy,
        in_face: FaceId,
        data: Data,
        now: SimTime,
    ) -> (Vec<Emission>, BTreeSet<NodeId>) {
        if !data.digest_ok() {
            self.violations
                .push(format!("node {}: data {} failed digest check", self.node, data.name));
            return (Vec::new(), BTreeSet::new());
        }
        let content_digest = sha256_hex(&data.content);
        let matching: Vec<Name> = self
            .pit
            .values()
            .filter(|entry| {
                entry.name == data.name
                    || (entry.name.strip_digest() == data.name
                        && entry.name.digest_hex() == Some(content_digest.as_str()))
            })
            .map(|entry| entry.name.clone())
            .collect();
        if matching.is_empty() {
            self.unsolicited_data_dropped += 1;
            return (Vec::new(), BTreeSet::new());
        }

        self.cs.insert(data.clone());
        let mut emissions = Vec::new();
        let mut origins = BTreeSet::new();
        for name in matching {
            let entry = self.pit.remove(&name).expect("matched above");
            strategy.before_satisfy_interest(&entry.name.strip_digest(), in_face, now);
            if entry.in_faces.is_empty() {
                self.violations
                    .push(format!("node {}: satisfied PIT entry {} had no in-faces", self.node, name));
            }
            origins.extend(entry.origins.iter().copied());
            for &face in entry.in_faces.keys() {
                emissions.push(Emission {
                    face,
                    packet: Packet::Data(data.clone()),
                });
            }
        }
        (emissions, origins)
    }

    pub fn on_incoming_nack(
        &mut self,
        _strategy: &mut dyn Strategy,
        in_face: FaceId,
        nack: Nack,
        now: SimTime,
    ) -> Vec<Emission> {
        let Some(entry) = self.pit.get_mut(&nack.name) else {
            return Vec::new(); // stale
        };
        if !entry.nonces.contains(&nack.nonce) || !entry.out_faces.contains(&in_face) {
            return Vec::new();
        }
        entry.nacked_faces.insert(in_face);
        // retry the next untried hop, one attempt per remaining hop
        let retry = entry
            .ranked_hops
            .iter()
            .copied()
            .find(|f| !entry.out_faces.contains(f));
        if let Some(face) = retry {
            entry.out_faces.insert(face);
            let packet = Packet::Interest(entry.interest.clone());
            let _ = now;
            return vec![Emission { face, packet }];
        }
        // a tried face without a nack may still return data: keep waiting
        if entry.out_faces.iter().any(|f| !entry.nacked_faces.contains(f)) {
            return Vec::new();
        }
        // every upstream nacked: propagate downstream and erase
        let entry = self.pit.remove(&nack.name).expect("present above");
        entry
            .in_faces
            .keys()
            .map(|&face| Emission {
                face,
                packet: Packet::Nack(Nack {
                    name: entry.name.clone(),
                    nonce: nack.nonce,
                    reason: nack.reason,
                }),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::NtorrentStrategy;

    fn interest(name: &str, nonce: u32) -> Interest {
        Interest {
            name: Name::parse(name).unwrap(),
            nonce,
            lifetime: DEFAULT_PIT_LIFETIME,
            hop_count: 0,
            origin: None,
        }
    }

    fn setup() -> (Forwarder, NtorrentStrategy, FaceId, FaceId, FaceId) {
        let mut fwd = Forwarder::new(0);
        let f0 = fwd.add_face(FaceKind::Link { link: 0, peer: 1 });
        let f1 = fwd.add_face(FaceKind::Link { link: 1, peer: 2 });
        let f2 = fwd.add_face(FaceKind::Link { link: 2, peer: 3 });
        (fwd, NtorrentStrategy::default(), f0, f1, f2)
    }

    #[test]
    fn cs_hit_short_circuits() {
        let (mut fwd, mut strat, f0, _, _) = setup();
        let data = Data::new(Name::parse("/x").unwrap(), b"c".to_vec(), vec![]);
        let full = data.name.append_digest(&data.content);
        fwd.cs.insert(data.clone());
        let out = fwd.on_incoming_interest(
            &mut strat,
            f0,
            interest(&full.to_string(), 1),
            SimTime::ZERO,
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].face, f0);
        assert!(matches!(&out[0].packet, Packet::Data(d) if d.name == data.name));
        assert_eq!(fwd.pit_len(), 0);
    }

    #[test]
    fn cs_digest_mismatch_is_a_miss() {
        let (mut fwd, _, _, _, _) = setup();
        let data = Data::new(Name::parse("/x").unwrap(), b"c".to_vec(), vec![]);
        fwd.cs.insert(data);
        let wrong = Name::parse("/x").unwrap().append_digest(b"other");
        assert!(fwd.cs.find(&wrong).is_none());
    }

    #[test]
    fn cs_fifo_eviction() {
        let mut cs = ContentStore {
            capacity: Some(2),
            ..Default::default()
        };
        for name in ["/a", "/b", "/c"] {
            cs.insert(Data::new(Name::parse(name).unwrap(), vec![], vec![]));
        }
        assert_eq!(cs.len(), 2);
        assert!(cs.find(&Name::parse("/a").unwrap()).is_none());
        assert!(cs.find(&Name::parse("/b").unwrap()).is_some());
        assert!(cs.find(&Name::parse("/c").unwrap()).is_some());
    }

    #[test]
    fn aggregation_forwards_once() {
        let (mut fwd, mut strat, f0, f1, f2) = setup();
        fwd.fib_add_nexthop(Name::parse("/x").unwrap(), f2, 10);
        let out = fwd.on_incoming_interest(&mut strat, f0, interest("/x/y", 1), SimTime::ZERO);
        assert_eq!(out.len(), 1);
        assert!(matches!(out[0].packet, Packet::Interest(_)));
        let out2 = fwd.on_incoming_interest(&mut strat, f1, interest("/x/y", 2), SimTime::ZERO);
        assert!(out2.is_empty());
        let entry_faces: Vec<FaceId> = fwd.pit.values().next().unwrap().in_faces.keys().copied().collect();
        assert_eq!(entry_faces, vec![f0, f1]);
    }

    #[test]
    fn no_fib_match_nacks_noroute() {
        let (mut fwd, mut strat, f0, _, _) = setup();
        let out = fwd.on_incoming_interest(&mut strat, f0, interest("/nowhere", 1), SimTime::ZERO);
        assert_eq!(out.len(), 1);
        assert!(matches!(
            &out[0].packet,
            Packet::Nack(n) if n.reason == NackReason::NoRoute
        ));
    }

    #[test]
    fn duplicate_nonce_nacked() {
        let (mut fwd, mut strat, f0, f1, f2) = setup();
        fwd.fib_add_nexthop(Name::parse("/x").unwrap(), f2, 10);
        fwd.on_incoming_interest(&mut strat, f0, interest("/x/y", 7), SimTime::ZERO);
        let out = fwd.on_incoming_interest(&mut strat, f1, interest("/x/y", 7), SimTime::ZERO);
        assert!(matches!(
            &out[0].packet,
            Packet::Nack(n) if n.reason == NackReason::Duplicate
        ));
    }

    #[test]
    fn data_fans_out_to_all_in_faces_and_clears_pit() {
        let (mut fwd, mut strat, f0, f1, f2) = setup();
        fwd.fib_add_nexthop(Name::parse("/x").unwrap(), f2, 10);
        fwd.on_incoming_interest(&mut strat, f0, interest("/x/y", 1), SimTime::ZERO);
        fwd.on_incoming_interest(&mut strat, f1, interest("/x/y", 2), SimTime::ZERO);
        let data = Data::new(Name::parse("/x/y").unwrap(), b"d".to_vec(), vec![]);
        let (out, _) = fwd.on_incoming_data(&mut strat, f2, data, SimTime::from_ms(5));
        assert_eq!(out.len(), 2);
        assert_eq!(fwd.pit_len(), 0);
        assert_eq!(fwd.cs.len(), 1);
    }

    #[test]
    fn unsolicited_data_dropped() {
        let (mut fwd, mut strat, _, _, f2) = setup();
        let data = Data::new(Name::parse("/x/y").unwrap(), b"d".to_vec(), vec![]);
        let (out, _) = fwd.on_incoming_data(&mut strat, f2, data, SimTime::ZERO);
        assert!(out.is_empty());
        assert_eq!(fwd.unsolicited_data_dropped, 1);
        assert_eq!(fwd.cs.len(), 0);
    }

    #[test]
    fn digest_pit_entry_satisfied_by_base_named_data() {
        let (mut fwd, mut strat, f0, _, f2) = setup();
        fwd.fib_add_nexthop(Name::parse("/x").unwrap(), f2, 10);
        let full = Name::parse("/x/y").unwrap().append_digest(b"d");
        fwd.on_incoming_interest(&mut strat, f0, interest(&full.to_string(), 1), SimTime::ZERO);
        let data = Data::new(Name::parse("/x/y").unwrap(), b"d".to_vec(), vec![]);
        let (out, _) = fwd.on_incoming_data(&mut strat, f2, data, SimTime::from_ms(2));
        assert_eq!(out.len(), 1);
        assert_eq!(fwd.pit_len(), 0);
    }

    #[test]
    fn nack_retries_then_propagates() {
        let (mut fwd, mut strat, f0, f1, f2) = setup();
        let prefix = Name::parse("/x").unwrap();
        fwd.fib_add_nexthop(prefix.clone(), f1, 10);
        fwd.fib_add_nexthop(prefix, f2, 20);
        let out = fwd.on_incoming_interest(&mut strat, f0, interest("/x/y", 1), SimTime::ZERO);
        let first_hop = out[0].face;
        assert_eq!(first_hop, f1);
        let nack = Nack {
            name: Name::parse("/x/y").unwrap(),
            nonce: 1,
            reason: NackReason::NoContent,
        };
        // first nack: retry on the remaining hop
        let out = fwd.on_incoming_nack(&mut strat, f1, nack.clone(), SimTime::from_ms(1));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].face, f2);
        assert!(matches!(out[0].packet, Packet::Interest(_)));
        // second nack: exhausted, propagate downstream
        let out = fwd.on_incoming_nack(&mut strat, f2, nack.clone(), SimTime::from_ms(2));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].face, f0);
        assert!(matches!(&out[0].packet, Packet::Nack(n) if n.reason == NackReason::NoContent));
        assert_eq!(fwd.pit_len(), 0);
        // stale nack: dropped
        let out = fwd.on_incoming_nack(&mut strat, f2, nack, SimTime::from_ms(3));
        assert!(out.is_empty());
    }

    #[test]
    fn fib_lpm_prefers_longest_prefix() {
        let (mut fwd, _, f0, f1, _) = setup();
        fwd.fib_add_nexthop(Name::parse("/a").unwrap(), f0, 1);
        fwd.fib_add_nexthop(Name::parse("/a/b").unwrap(), f1, 1);
        let hit = fwd.fib_lpm(&Name::parse("/a/b/c").unwrap()).unwrap();
        assert_eq!(hit.prefix, Name::parse("/a/b").unwrap());
    }

    #[test]
    fn fib_add_same_face_updates_cost() {
        let (mut fwd, _, f0, _, _) = setup();
        let prefix = Name::parse("/a").unwrap();
        fwd.fib_add_nexthop(prefix.clone(), f0, 5);
        fwd.fib_add_nexthop(prefix.clone(), f0, 9);
        let entry = fwd.fib_lpm(&prefix).unwrap();
        assert_eq!(entry.nexthops, vec![(f0, 9)]);
    }

    #[test]
    fn pit_expiry_removes_entry() {
        let (mut fwd, mut strat, f0, _, f2) = setup();
        fwd.fib_add_nexthop(Name::parse("/x").unwrap(), f2, 10);
        fwd.on_incoming_interest(&mut strat, f0, interest("/x/y", 1), SimTime::ZERO);
        let (name, expiry) = fwd.new_pit_expiries.pop().unwrap();
        assert_eq!(expiry, DEFAULT_PIT_LIFETIME);
        fwd.pit_expire(&name, expiry);
        assert_eq!(fwd.pit_len(), 0);
    }
}

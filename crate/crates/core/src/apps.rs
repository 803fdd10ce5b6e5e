//! The nTorrent applications: a producer (seeder) answering interests
//! out of its bundle, and a consumer (leecher) running the sequential
//! fetch pipeline. Consumers are bifunctional: every object received is
//! announced and served to other peers from then on.

use std::collections::BTreeMap;

use log::debug;
use thiserror::Error;

use crate::forwarder::DEFAULT_PIT_LIFETIME;
use crate::name::{sha256_hex, Name};
use crate::packet::{Data, Interest, Nack, NackReason, NodeId};
use crate::strategy::Metrics;
use crate::time::SimTime;
use crate::torrent::{
    build_torrent, classify_name, decode_manifest, decode_segment, NameClass, TorrentParams,
};

/// App retransmit timer: fires if an interest is unanswered.
pub const RETRANSMIT_TIMEOUT: SimTime = SimTime(1_000_000_000);
pub const MAX_ATTEMPTS: u32 = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("consumer on node {node} gave up on {name} after {attempts} attempts")]
pub struct ConsumerAborted {
    pub node: NodeId,
    pub name: Name,
    pub attempts: u32,
}

/// What an application callback wants the engine to do.
#[derive(Debug, Clone, PartialEq)]
pub enum AppCmd {
    /// Express an interest through the node's own forwarder.
    Express(Interest),
    /// Answer an interest delivered to the app face.
    Reply(Data),
    ReplyNack(Nack),
    /// This node can now serve the named object: register a local route
    /// and a routing announcement.
    Announce(Name),
    /// Arm the app retransmit timer for an outstanding interest.
    ArmTimer {
        name: Name,
        attempt: u32,
        delay: SimTime,
    },
}

/// Digest-aware lookup shared by the producer and peer dispatch: both
/// answer the same way for the same object.
fn serve_from_store(store: &BTreeMap<Name, Data>, interest: &Interest) -> AppCmd {
    let base = interest.name.strip_digest();
    let hit = store.get(&base).filter(|data| {
        interest
            .name
            .digest_hex()
            .is_none_or(|wanted| sha256_hex(&data.content) == wanted)
    });
    match hit {
        Some(data) => AppCmd::Reply(data.clone()),
        None => AppCmd::ReplyNack(Nack {
            name: interest.name.clone(),
            nonce: interest.nonce,
            reason: NackReason::NoContent,
        }),
    }
}

/// The seeder: holds the complete bundle before the run starts.
#[derive(Debug)]
pub struct ProducerApp {
    pub node: NodeId,
    pub prefix: Name,
    store: BTreeMap<Name, Data>,
}

impl ProducerApp {
    pub fn new(node: NodeId, params: &TorrentParams) -> Result<Self, crate::torrent::TorrentError> {
        let bundle = build_torrent(params)?;
        let store = bundle
            .all_objects()
            .into_iter()
            .map(|d| (d.name.clone(), d))
            .collect();
        Ok(ProducerApp {
            node,
            prefix: params.prefix(),
            store,
        })
    }

    /// Type-dispatched lookup; a miss is a NoContent nack.
    pub fn on_interest(&self, interest: &Interest) -> AppCmd {
        // classification is informational here: segments, manifests and
        // packets all resolve through the same digest-aware store
        let _class = classify_name(&interest.name);
        serve_from_store(&self.store, interest)
    }

    pub fn object_count(&self) -> usize {
        self.store.len()
    }
}

/// The leecher/peer: fetches segment -> manifest -> packet, stores
/// everything it receives and serves it onward.
#[derive(Debug)]
pub struct ConsumerApp {
    pub node: NodeId,
    pub params: TorrentParams,
    pub strict_phase_barrier: bool,
    /// Received objects by base name, served to other peers.
    store: BTreeMap<Name, Data>,
    segments_held: usize,
    manifests_held: usize,
    packets_held: usize,
    /// Outstanding interest full names (digest included) -> send time.
    outstanding: BTreeMap<Name, SimTime>,
    attempts: BTreeMap<Name, u32>,
    /// Fetches postponed by the phase barrier.
    deferred_manifests: Vec<Name>,
    deferred_packets: Vec<Name>,
    pub metrics: Metrics,
    pub failed_attempts: u64,
    pub corrupt_received: u64,
    pub start_time: Option<SimTime>,
    pub finish_time: Option<SimTime>,
    pub completed: bool,
}

impl ConsumerApp {
    pub fn new(node: NodeId, params: TorrentParams, strict_phase_barrier: bool) -> Self {
        ConsumerApp {
            node,
            params,
            strict_phase_barrier,
            store: BTreeMap::new(),
            segments_held: 0,
            manifests_held: 0,
            packets_held: 0,
            outstanding: BTreeMap::new(),
            attempts: BTreeMap::new(),
            deferred_manifests: Vec::new(),
            deferred_packets: Vec::new(),
            metrics: Metrics::default(),
            failed_attempts: 0,
            corrupt_received: 0,
            start_time: None,
            finish_time: None,
            completed: false,
        }
    }

    pub fn packets_held(&self) -> usize {
        self.packets_held
    }

    pub fn segments_held(&self) -> usize {
        self.segments_held
    }

    pub fn manifests_held(&self) -> usize {
        self.manifests_held
    }

    pub fn held_object(&self, name: &Name) -> Option<&Data> {
        self.store.get(name)
    }

    pub fn objects_held(&self) -> usize {
        self.store.len()
    }

    pub fn held_packet_contents(&self) -> Vec<&Data> {
        self.store
            .iter()
            .filter(|(name, _)| classify_name(name) == NameClass::DataPacket)
            .map(|(_, d)| d)
            .collect()
    }

    pub fn outstanding_count(&self) -> usize {
        self.outstanding.len()
    }

    /// The peer side of bifunctionality: identical dispatch to the
    /// producer, over whatever this consumer has stored so far.
    pub fn on_interest(&self, interest: &Interest) -> AppCmd {
        serve_from_store(&self.store, interest)
    }

    /// Regenerates the torrent file locally (the .torrent is known by
    /// all peers) and expresses the interest for the first segment.
    pub fn start(&mut self, now: SimTime, nonce: &mut dyn FnMut() -> u32) -> Vec<AppCmd> {
        self.start_time = Some(now);
        let bundle = build_torrent(&self.params).expect("params validated at scenario build");
        let first = bundle.first_segment_name();
        self.send_interest(first, now, nonce)
    }

    /// Sends a fresh-nonce interest unless the name is already satisfied
    /// or already in flight.
    pub fn send_interest(
        &mut self,
        name: Name,
        now: SimTime,
        nonce: &mut dyn FnMut() -> u32,
    ) -> Vec<AppCmd> {
        if self.store.contains_key(&name.strip_digest()) || self.outstanding.contains_key(&name) {
            return Vec::new();
        }
        let interest = Interest {
            name: name.clone(),
            nonce: nonce(),
            lifetime: DEFAULT_PIT_LIFETIME,
            hop_count: 0,
            origin: Some(self.node),
        };
        self.outstanding.insert(name.clone(), now);
        let attempt = *self.attempts.entry(name.clone()).and_modify(|a| *a += 1).or_insert(1);
        self.metrics.interests_sent += 1;
        vec![
            AppCmd::Express(interest),
            AppCmd::ArmTimer {
                name,
                attempt,
                delay: RETRANSMIT_TIMEOUT,
            },
        ]
    }

    /// The fetch pipeline: store the object, follow next-pointers,
    /// iterate catalogs, announce the object, and detect completion.
    pub fn on_data(
        &mut self,
        data: &Data,
        now: SimTime,
        nonce: &mut dyn FnMut() -> u32,
    ) -> Vec<AppCmd> {
        let Some(full_name) = self.match_outstanding(data) else {
            return Vec::new(); // stale or duplicate delivery
        };
        if let Some(wanted) = full_name.digest_hex() {
            if sha256_hex(&data.content) != wanted {
                self.corrupt_received += 1;
                self.outstanding.remove(&full_name);
                self.failed_attempts += 1;
                return self.send_interest(full_name, now, nonce);
            }
        }
        let sent_at = self.outstanding.remove(&full_name).expect("matched");
        self.attempts.remove(&full_name);
        self.metrics.record_satisfaction((now - sent_at).as_ms_f64());

        let base = data.name.clone();
        if self.store.contains_key(&base) {
            return Vec::new(); // monotonicity: never store twice
        }
        self.store.insert(base.clone(), data.clone());

        let mut cmds = vec![AppCmd::Announce(base.clone())];
        match classify_name(&base) {
            NameClass::TorrentSegment => {
                self.segments_held += 1;
                let segment = match decode_segment(&data.content) {
                    Ok(s) => s,
                    Err(e) => {
                        debug!("node {}: undecodable segment {base}: {e}", self.node);
                        return cmds;
                    }
                };
                let mut wanted: Vec<Name> = Vec::new();
                if let Some(next) = segment.next_segment {
                    wanted.push(next);
                }
                if self.strict_phase_barrier {
                    self.deferred_manifests.extend(segment.manifest_catalog);
                    if self.segments_held == self.params.segment_count() as usize {
                        wanted.append(&mut self.deferred_manifests);
                    }
                } else {
                    wanted.extend(segment.manifest_catalog);
                }
                for name in wanted {
                    cmds.extend(self.send_interest(name, now, nonce));
                }
            }
            NameClass::FileManifest => {
                self.manifests_held += 1;
                let manifest = match decode_manifest(&data.content) {
                    Ok(m) => m,
                    Err(e) => {
                        debug!("node {}: undecodable manifest {base}: {e}", self.node);
                        return cmds;
                    }
                };
                let mut wanted: Vec<Name> = Vec::new();
                if let Some(next) = manifest.next_manifest {
                    wanted.push(next);
                }
                if self.strict_phase_barrier {
                    self.deferred_packets.extend(manifest.packet_catalog);
                    if self.manifests_held == self.params.manifest_count() as usize {
                        wanted.append(&mut self.deferred_packets);
                    }
                } else {
                    wanted.extend(manifest.packet_catalog);
                }
                for name in wanted {
                    cmds.extend(self.send_interest(name, now, nonce));
                }
            }
            NameClass::DataPacket => {
                self.packets_held += 1;
                // no decryption scheme is defined; display stands in for it
                debug!(
                    "node {}: packet {} received ({} bytes): {}",
                    self.node,
                    base,
                    data.content.len(),
                    String::from_utf8_lossy(&data.content)
                );
                if self.packets_held == self.params.packet_count() as usize {
                    self.completed = true;
                    self.finish_time = Some(now);
                }
            }
            NameClass::Unknown => {
                debug!("node {}: unclassifiable data {base}", self.node);
            }
        }
        cmds
    }

    fn match_outstanding(&self, data: &Data) -> Option<Name> {
        self.outstanding
            .keys()
            .find(|full| {
                **full == data.name
                    || (full.strip_digest() == data.name
                        && full.digest_hex() == Some(sha256_hex(&data.content).as_str()))
            })
            .cloned()
    }

    /// A nack leaves the interest outstanding; the retransmit timer
    /// drives the retry with a fresh nonce.
    pub fn on_nack(&mut self, nack: &Nack, _now: SimTime) {
        debug!("node {}: nack {:?} for {}", self.node, nack.reason, nack.name);
    }

    /// Retransmit timer: resend with a new nonce, or abort the run once
    /// the attempt budget is spent.
    pub fn on_retransmit_timer(
        &mut self,
        name: &Name,
        attempt: u32,
        now: SimTime,
        nonce: &mut dyn FnMut() -> u32,
    ) -> Result<Vec<AppCmd>, ConsumerAborted> {
        if !self.outstanding.contains_key(name) {
            return Ok(Vec::new()); // satisfied in the meantime
        }
        if attempt >= MAX_ATTEMPTS {
            return Err(ConsumerAborted {
                node: self.node,
                name: name.clone(),
                attempts: attempt,
            });
        }
        self.failed_attempts += 1;
        self.outstanding.remove(name);
        Ok(self.send_interest(name.clone(), now, nonce))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torrent::{encode_segment, TorrentBundle};

    fn nonce_seq() -> impl FnMut() -> u32 {
        let mut n = 0;
        move || {
            n += 1;
            n
        }
    }

    fn bundle() -> TorrentBundle {
        build_torrent(&TorrentParams::default()).unwrap()
    }

    fn expressed(cmds: &[AppCmd]) -> Vec<&Interest> {
        cmds.iter()
            .filter_map(|c| match c {
                AppCmd::Express(i) => Some(i),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn producer_serves_its_segment() {
        let p = ProducerApp::new(0, &TorrentParams::default()).unwrap();
        let b = bundle();
        let interest = Interest {
            name: b.first_segment_name(),
            nonce: 1,
            lifetime: DEFAULT_PIT_LIFETIME,
            hop_count: 0,
            origin: None,
        };
        match p.on_interest(&interest) {
            AppCmd::Reply(d) => {
                assert_eq!(d.name, b.segments[0].name);
                assert_eq!(d.content, encode_segment(&b.segments[0]));
            }
            other => panic!("expected data, got {other:?}"),
        }
    }

    #[test]
    fn producer_nacks_foreign_torrent() {
        let p = ProducerApp::new(0, &TorrentParams::default()).unwrap();
        let interest = Interest {
            name: Name::parse("/NTORRENT/other/torrent-file/seg=0").unwrap(),
            nonce: 1,
            lifetime: DEFAULT_PIT_LIFETIME,
            hop_count: 0,
            origin: None,
        };
        assert!(matches!(
            p.on_interest(&interest),
            AppCmd::ReplyNack(n) if n.reason == NackReason::NoContent
        ));
    }

    #[test]
    fn consumer_start_requests_first_segment_with_digest() {
        let mut c = ConsumerApp::new(1, TorrentParams::default(), false);
        let mut nonce = nonce_seq();
        let cmds = c.start(SimTime::from_ms(1000), &mut nonce);
        let interests = expressed(&cmds);
        assert_eq!(interests.len(), 1);
        assert_eq!(interests[0].name, bundle().first_segment_name());
        assert!(interests[0].name.has_digest());
        assert_eq!(c.metrics.interests_sent, 1);
    }

    #[test]
    fn duplicate_send_suppressed_and_nonces_fresh() {
        let mut c = ConsumerApp::new(1, TorrentParams::default(), false);
        let mut nonce = nonce_seq();
        let name = bundle().first_segment_name();
        let first = c.send_interest(name.clone(), SimTime::ZERO, &mut nonce);
        assert_eq!(expressed(&first).len(), 1);
        let second = c.send_interest(name.clone(), SimTime::ZERO, &mut nonce);
        assert!(second.is_empty());
        assert_eq!(c.metrics.interests_sent, 1);
        // a different name draws a different nonce
        let other = c.send_interest(Name::parse("/NTORRENT/demo/torrent-file/seg=1").unwrap(), SimTime::ZERO, &mut nonce);
        let a = expressed(&first)[0].nonce;
        let b = expressed(&other)[0].nonce;
        assert_ne!(a, b);
    }

    #[test]
    fn segment_data_spawns_next_and_catalog_interests() {
        let b = bundle();
        let mut c = ConsumerApp::new(1, TorrentParams::default(), false);
        let mut nonce = nonce_seq();
        c.start(SimTime::ZERO, &mut nonce);
        let data = Data::new(
            b.segments[0].name.clone(),
            encode_segment(&b.segments[0]),
            vec![],
        );
        let cmds = c.on_data(&data, SimTime::from_ms(10), &mut nonce);
        // seg=0 catalogs 2 manifests and points at seg=1: 3 new interests
        assert_eq!(expressed(&cmds).len(), 3);
        assert!(cmds.contains(&AppCmd::Announce(b.segments[0].name.clone())));
        assert_eq!(c.metrics.interests_satisfied, 1);
    }

    #[test]
    fn strict_barrier_defers_manifests_until_all_segments() {
        let b = bundle();
        let mut c = ConsumerApp::new(1, TorrentParams::default(), true);
        let mut nonce = nonce_seq();
        c.start(SimTime::ZERO, &mut nonce);
        let seg0 = Data::new(b.segments[0].name.clone(), encode_segment(&b.segments[0]), vec![]);
        let cmds = c.on_data(&seg0, SimTime::from_ms(10), &mut nonce);
        // only the next-segment interest; the 2 catalog manifests wait
        assert_eq!(expressed(&cmds).len(), 1);
        let seg1 = Data::new(b.segments[1].name.clone(), encode_segment(&b.segments[1]), vec![]);
        let cmds = c.on_data(&seg1, SimTime::from_ms(20), &mut nonce);
        // last segment releases all 4 deferred manifest fetches
        assert_eq!(expressed(&cmds).len(), 4);
    }

    #[test]
    fn full_local_exchange_completes() {
        // feed the consumer straight from a producer store
        let params = TorrentParams::default();
        let producer = ProducerApp::new(0, &params).unwrap();
        let mut c = ConsumerApp::new(1, params.clone(), false);
        let mut nonce = nonce_seq();
        let mut pending: Vec<Interest> = expressed(&c.start(SimTime::ZERO, &mut nonce))
            .into_iter()
            .cloned()
            .collect();
        let mut steps = 0;
        while let Some(interest) = pending.pop() {
            steps += 1;
            assert!(steps < 1000, "fetch pipeline does not terminate");
            match producer.on_interest(&interest) {
                AppCmd::Reply(data) => {
                    let cmds = c.on_data(&data, SimTime::from_ms(steps), &mut nonce);
                    pending.extend(expressed(&cmds).into_iter().cloned());
                }
                other => panic!("producer refused {}: {other:?}", interest.name),
            }
        }
        assert!(c.completed);
        assert_eq!(c.objects_held(), 22);
        assert_eq!(c.outstanding_count(), 0);
        // completion conservation: held packet bytes equal the seeder's
        let b = bundle();
        let mut held: Vec<Vec<u8>> = c
            .held_packet_contents()
            .iter()
            .map(|d| d.content.clone())
            .collect();
        let mut expected: Vec<Vec<u8>> = b.packets.iter().map(|d| d.content.clone()).collect();
        held.sort();
        expected.sort();
        assert_eq!(held, expected);
        // conservation of attempts
        assert_eq!(
            c.metrics.interests_satisfied + c.outstanding_count() as u64 + c.failed_attempts,
            c.metrics.interests_sent
        );
        // a completed peer answers exactly like the seeder
        let interest = Interest {
            name: b.first_segment_name(),
            nonce: 99,
            lifetime: DEFAULT_PIT_LIFETIME,
            hop_count: 0,
            origin: None,
        };
        assert_eq!(producer.on_interest(&interest), c.on_interest(&interest));
    }

    #[test]
    fn retransmit_carries_new_nonce_then_aborts() {
        let mut c = ConsumerApp::new(1, TorrentParams::default(), false);
        let mut nonce = nonce_seq();
        let name = bundle().first_segment_name();
        let first = c.send_interest(name.clone(), SimTime::ZERO, &mut nonce);
        let n1 = expressed(&first)[0].nonce;
        let retry = c
            .on_retransmit_timer(&name, 1, SimTime::from_ms(1000), &mut nonce)
            .unwrap();
        let n2 = expressed(&retry)[0].nonce;
        assert_ne!(n1, n2);
        assert_eq!(c.metrics.interests_sent, 2);
        assert!(c
            .on_retransmit_timer(&name, MAX_ATTEMPTS, SimTime::from_ms(9000), &mut nonce)
            .is_err());
    }
}

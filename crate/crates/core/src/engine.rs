//! Deterministic discrete-event core: clock, event queue, link
//! transmission model and node assembly.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::apps::{AppCmd, ConsumerAborted, ConsumerApp, ProducerApp};
use crate::forwarder::{Emission, FaceKind, FibEntry, Forwarder, LinkId, TableDump};
use crate::name::Name;
use crate::packet::{NodeId, Packet};
use crate::routing::{calculate_routes, LinkSpec, Topology};
use crate::strategy::{FaceId, Strategy, StrategyKind};
use crate::time::SimTime;
use crate::torrent::{TorrentError, TorrentParams};
use crate::trace::{Tracer, DEFAULT_TRACE_INTERVAL};

pub const DEFAULT_MAX_SIM_TIME: SimTime = SimTime(60_000_000_000);

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("duplicate link between nodes {0} and {1}")]
    DuplicateLink(NodeId, NodeId),
    #[error("link between {0} and {1} has zero data rate")]
    ZeroRate(NodeId, NodeId),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error(transparent)]
    Torrent(#[from] TorrentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeRole {
    Seeder,
    Leecher,
    Router,
}

impl NodeRole {
    pub fn label(self) -> &'static str {
        match self {
            NodeRole::Seeder => "seeder",
            NodeRole::Leecher => "leecher",
            NodeRole::Router => "router",
        }
    }
}

#[derive(Debug, Clone)]
pub struct NodeSpec {
    pub name: String,
    pub role: NodeRole,
    pub start_time: SimTime,
}

pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub role: NodeRole,
    pub start_time: SimTime,
    pub forwarder: Forwarder,
    pub strategy: Box<dyn Strategy>,
    pub app_face: Option<FaceId>,
    pub producer: Option<ProducerApp>,
    pub consumer: Option<ConsumerApp>,
    /// Names served by the local app; merged into every FIB rebuild.
    app_routes: Vec<Name>,
    /// Neighbor node -> local face attached to the shared link.
    neighbor_faces: BTreeMap<NodeId, FaceId>,
}

#[derive(Debug)]
struct LinkState {
    spec: LinkSpec,
    face_a: FaceId,
    face_b: FaceId,
    busy_until_ab: SimTime,
    busy_until_ba: SimTime,
}

impl LinkState {
    /// Serialization + propagation: start = max(now, busy), arrival =
    /// start + size*8/rate + delay. Per-direction FIFO falls out of the
    /// busy_until bookkeeping.
    fn transmit(&mut self, from_a: bool, size_bytes: u64, now: SimTime) -> SimTime {
        let busy = if from_a {
            &mut self.busy_until_ab
        } else {
            &mut self.busy_until_ba
        };
        let start = now.max(*busy);
        let tx_ns = (size_bytes as u128 * 8 * 1_000_000_000 / self.spec.data_rate_bps as u128) as u64;
        *busy = start + SimTime::from_ns(tx_ns);
        *busy + self.spec.delay
    }
}

#[derive(Debug, Clone)]
enum Action {
    PacketArrival {
        node: NodeId,
        face: FaceId,
        packet: Packet,
    },
    AppStart {
        node: NodeId,
    },
    RetransmitTimer {
        node: NodeId,
        name: Name,
        attempt: u32,
    },
    PitExpiry {
        node: NodeId,
        name: Name,
    },
    RecomputeRoutes,
}

struct QueuedEvent {
    at: SimTime,
    seq: u64,
    action: Action,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.at.cmp(&other.at).then(self.seq.cmp(&other.seq))
    }
}

/// Engine-level knobs shared by all nodes of one simulation.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub torrent: TorrentParams,
    pub strategy: StrategyKind,
    pub seed: u64,
    pub max_sim_time: SimTime,
    pub trace_interval: SimTime,
    pub strict_phase_barrier: bool,
    /// Content store disabled on pure router nodes.
    pub router_cs_disabled: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            torrent: TorrentParams::default(),
            strategy: StrategyKind::Ntorrent,
            seed: 1,
            max_sim_time: DEFAULT_MAX_SIM_TIME,
            trace_interval: DEFAULT_TRACE_INTERVAL,
            strict_phase_barrier: false,
            router_cs_disabled: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConsumerSummary {
    pub node: NodeId,
    pub name: String,
    pub start_ms: f64,
    pub finish_ms: Option<f64>,
    pub interests_sent: u64,
    pub interests_satisfied: u64,
    pub isr: Option<f64>,
    pub avg_delay_ms: Option<f64>,
    pub objects_held: usize,
    pub packets_held: usize,
    pub completed: bool,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub end_time: SimTime,
    pub completed_all: bool,
    pub hit_time_limit: bool,
    pub aborted: Option<ConsumerAborted>,
    pub consumers: Vec<ConsumerSummary>,
    pub violations: Vec<String>,
    pub recomputes_executed: u64,
}

pub struct Simulator {
    config: SimConfig,
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Reverse<QueuedEvent>>,
    nodes: Vec<Node>,
    links: Vec<LinkState>,
    topology: Topology,
    rng: ChaCha8Rng,
    tracer: Tracer,
    recompute_pending: bool,
    recomputes_executed: u64,
    nonce_log: BTreeSet<(NodeId, Name, u32)>,
    violations: Vec<String>,
    aborted: Option<ConsumerAborted>,
    started: bool,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let tracer = Tracer::new(config.trace_interval);
        Simulator {
            config,
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            nodes: Vec::new(),
            links: Vec::new(),
            topology: Topology::new(0),
            rng,
            tracer,
            recompute_pending: false,
            recomputes_executed: 0,
            nonce_log: BTreeSet::new(),
            violations: Vec::new(),
            aborted: None,
            started: false,
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn tracer(&self) -> &Tracer {
        &self.tracer
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn node_names(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.name.clone()).collect()
    }

    pub fn set_start_time(&mut self, node: &str, start: SimTime) -> Result<(), EngineError> {
        let id = self
            .node_by_name(node)
            .ok_or_else(|| EngineError::UnknownNode(node.to_string()))?;
        self.nodes[id].start_time = start;
        Ok(())
    }

    /// Builds a node with its forwarder, strategy instance and apps, and
    /// registers the app face.
    pub fn create_and_install(&mut self, spec: NodeSpec) -> Result<NodeId, EngineError> {
        let id = self.nodes.len();
        let mut forwarder = Forwarder::new(id);
        // App-hosting nodes serve from their application store; a
        // forwarder cache there would shadow the app and make served data
        // unattributable. Routers cache unless explicitly disabled.
        match spec.role {
            NodeRole::Seeder | NodeRole::Leecher => forwarder.cs.capacity = Some(0),
            NodeRole::Router => {
                if self.config.router_cs_disabled {
                    forwarder.cs.capacity = Some(0);
                }
            }
        }
        let (app_face, producer, consumer) = match spec.role {
            NodeRole::Seeder => (
                Some(forwarder.add_face(FaceKind::Application)),
                Some(ProducerApp::new(id, &self.config.torrent)?),
                None,
            ),
            NodeRole::Leecher => (
                Some(forwarder.add_face(FaceKind::Application)),
                None,
                Some(ConsumerApp::new(
                    id,
                    self.config.torrent.clone(),
                    self.config.strict_phase_barrier,
                )),
            ),
            NodeRole::Router => (None, None, None),
        };
        self.nodes.push(Node {
            id,
            name: spec.name,
            role: spec.role,
            start_time: spec.start_time,
            forwarder,
            strategy: self.config.strategy.build(),
            app_face,
            producer,
            consumer,
            app_routes: Vec::new(),
            neighbor_faces: BTreeMap::new(),
        });
        self.topology.node_count = self.nodes.len();
        Ok(id)
    }

    /// Creates the bidirectional link and registers one face on each
    /// endpoint's forwarder.
    pub fn create_link(
        &mut self,
        a: NodeId,
        b: NodeId,
        data_rate_bps: u64,
        delay: SimTime,
    ) -> Result<LinkId, EngineError> {
        if data_rate_bps == 0 {
            return Err(EngineError::ZeroRate(a, b));
        }
        if self
            .links
            .iter()
            .any(|l| (l.spec.a, l.spec.b) == (a, b) || (l.spec.a, l.spec.b) == (b, a))
        {
            return Err(EngineError::DuplicateLink(a, b));
        }
        let link = self.links.len();
        let face_a = self.nodes[a].forwarder.add_face(FaceKind::Link { link, peer: b });
        let face_b = self.nodes[b].forwarder.add_face(FaceKind::Link { link, peer: a });
        self.nodes[a].neighbor_faces.insert(b, face_a);
        self.nodes[b].neighbor_faces.insert(a, face_b);
        let spec = LinkSpec {
            a,
            b,
            data_rate_bps,
            delay,
        };
        self.links.push(LinkState {
            spec,
            face_a,
            face_b,
            busy_until_ab: SimTime::ZERO,
            busy_until_ba: SimTime::ZERO,
        });
        self.topology.links.push(spec);
        Ok(link)
    }

    fn schedule(&mut self, at: SimTime, action: Action) {
        assert!(at >= self.now, "scheduled into the past: {at} < {}", self.now);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(QueuedEvent { at, seq, action }));
    }

    fn schedule_recompute(&mut self) {
        if !self.recompute_pending {
            self.recompute_pending = true;
            self.schedule(self.now, Action::RecomputeRoutes);
        }
    }

    /// Registers a local app route and a routing announcement for a name
    /// the node can now serve, and coalesces the route recompute.
    fn announce(&mut self, node: NodeId, name: Name) {
        if self.topology.is_origin(&name, node) {
            return;
        }
        if let Some(app_face) = self.nodes[node].app_face {
            self.nodes[node].forwarder.fib_add_nexthop(name.clone(), app_face, 0);
            self.nodes[node].app_routes.push(name.clone());
        }
        self.topology
            .add_origin(name, node)
            .expect("announcing node exists");
        self.schedule_recompute();
    }

    fn recompute_routes(&mut self) {
        self.recompute_pending = false;
        self.recomputes_executed += 1;
        let table = calculate_routes(&self.topology);
        for node in &mut self.nodes {
            let mut entries: Vec<FibEntry> = Vec::new();
            if let Some(app_face) = node.app_face {
                for name in &node.app_routes {
                    entries.push(FibEntry {
                        prefix: name.clone(),
                        nexthops: vec![(app_face, 0)],
                    });
                }
            }
            if let Some(computed) = table.get(&node.id) {
                for (prefix, hops) in computed {
                    let nexthops = hops
                        .iter()
                        .filter_map(|h| node.neighbor_faces.get(&h.neighbor).map(|&f| (f, h.cost)))
                        .collect();
                    entries.push(FibEntry {
                        prefix: prefix.clone(),
                        nexthops,
                    });
                }
            }
            node.forwarder.fib_replace_all(entries);
        }
    }

    /// Feeds packets into one node's pipelines, resolving app callbacks
    /// inline; link transmissions and timers come back as queue events.
    fn process_at_node(&mut self, node_id: NodeId, first: (FaceId, Packet)) {
        let mut incoming: VecDeque<(FaceId, Packet)> = VecDeque::from([first]);
        let mut link_sends: Vec<(FaceId, Packet)> = Vec::new();
        let mut timers: Vec<(SimTime, Action)> = Vec::new();
        let mut announces: Vec<Name> = Vec::new();
        let now = self.now;

        {
            let node = &mut self.nodes[node_id];
            let tracer = &mut self.tracer;
            let rng = &mut self.rng;
            let nonce_log = &mut self.nonce_log;
            let violations = &mut self.violations;

            while let Some((face, packet)) = incoming.pop_front() {
                tracer.record(now, node_id, face, &packet, true);
                let strategy = node.strategy.as_mut();
                let (emissions, data_origins): (Vec<Emission>, BTreeSet<NodeId>) = match packet {
                    Packet::Interest(interest) => (
                        node.forwarder
                            .on_incoming_interest(strategy, face, interest, now),
                        BTreeSet::new(),
                    ),
                    Packet::Data(data) => {
                        node.forwarder.on_incoming_data(strategy, face, data, now)
                    }
                    Packet::Nack(nack) => (
                        node.forwarder.on_incoming_nack(strategy, face, nack, now),
                        BTreeSet::new(),
                    ),
                };
                for (name, expiry) in node.forwarder.new_pit_expiries.drain(..) {
                    timers.push((expiry, Action::PitExpiry { node: node_id, name }));
                }
                for emission in emissions {
                    tracer.record(now, node_id, emission.face, &emission.packet, false);
                    match node.forwarder.face_kind(emission.face) {
                        Some(FaceKind::Link { .. }) => {
                            if matches!(emission.packet, Packet::Data(_)) {
                                for &origin in &data_origins {
                                    tracer.record_flow(origin, node_id, emission.face);
                                }
                            }
                            link_sends.push((emission.face, emission.packet));
                        }
                        Some(FaceKind::Application) => {
                            let app_face = emission.face;
                            let cmds: Vec<AppCmd> = match (&emission.packet, &mut node.producer, &mut node.consumer) {
                                (Packet::Interest(i), Some(producer), _) => {
                                    vec![producer.on_interest(i)]
                                }
                                (Packet::Interest(i), None, Some(consumer)) => {
                                    vec![consumer.on_interest(i)]
                                }
                                (Packet::Data(d), _, Some(consumer)) => {
                                    let mut nonce = || rng.next_u32();
                                    consumer.on_data(d, now, &mut nonce)
                                }
                                (Packet::Nack(n), _, Some(consumer)) => {
                                    consumer.on_nack(n, now);
                                    Vec::new()
                                }
                                _ => Vec::new(),
                            };
                            for cmd in cmds {
                                match cmd {
                                    AppCmd::Express(interest) => {
                                        if !nonce_log.insert((
                                            node_id,
                                            interest.name.clone(),
                                            interest.nonce,
                                        )) {
                                            violations.push(format!(
                                                "node {node_id}: nonce {} reused for {}",
                                                interest.nonce, interest.name
                                            ));
                                        }
                                        incoming.push_back((app_face, Packet::Interest(interest)));
                                    }
                                    AppCmd::Reply(data) => {
                                        incoming.push_back((app_face, Packet::Data(data)));
                                    }
                                    AppCmd::ReplyNack(nack) => {
                                        incoming.push_back((app_face, Packet::Nack(nack)));
                                    }
                                    AppCmd::Announce(name) => announces.push(name),
                                    AppCmd::ArmTimer {
                                        name,
                                        attempt,
                                        delay,
                                    } => {
                                        timers.push((
                                            now + delay,
                                            Action::RetransmitTimer {
                                                node: node_id,
                                                name,
                                                attempt,
                                            },
                                        ));
                                    }
                                }
                            }
                        }
                        None => violations.push(format!(
                            "node {node_id}: emission on unknown face {}",
                            emission.face
                        )),
                    }
                }
            }
        }

        for (face, packet) in link_sends {
            self.send_on_link(node_id, face, packet);
        }
        for (at, action) in timers {
            self.schedule(at, action);
        }
        for name in announces {
            self.announce(node_id, name);
        }
    }

    fn send_on_link(&mut self, node_id: NodeId, face: FaceId, packet: Packet) {
        let Some(FaceKind::Link { link, .. }) = self.nodes[node_id].forwarder.face_kind(face)
        else {
            unreachable!("send_on_link called with non-link face");
        };
        let state = &mut self.links[link];
        let from_a = state.spec.a == node_id;
        let arrival = state.transmit(from_a, packet.wire_size_bytes(), self.now);
        let (peer, peer_face) = if from_a {
            (state.spec.b, state.face_b)
        } else {
            (state.spec.a, state.face_a)
        };
        self.schedule(
            arrival,
            Action::PacketArrival {
                node: peer,
                face: peer_face,
                packet,
            },
        );
    }

    fn handle_app_start(&mut self, node_id: NodeId) {
        match self.nodes[node_id].role {
            NodeRole::Seeder => {
                let prefix = self.config.torrent.prefix();
                let app_face = self.nodes[node_id].app_face.expect("seeder has app face");
                self.nodes[node_id]
                    .forwarder
                    .fib_add_nexthop(prefix.clone(), app_face, 0);
                self.nodes[node_id].app_routes.push(prefix.clone());
                self.topology
                    .add_origin(prefix, node_id)
                    .expect("seeder exists");
                self.schedule_recompute();
            }
            NodeRole::Leecher => {
                let now = self.now;
                let cmds = {
                    let node = &mut self.nodes[node_id];
                    let rng = &mut self.rng;
                    let mut nonce = || rng.next_u32();
                    node.consumer
                        .as_mut()
                        .expect("leecher has consumer")
                        .start(now, &mut nonce)
                };
                self.apply_start_cmds(node_id, cmds);
            }
            NodeRole::Router => {}
        }
    }

    fn apply_start_cmds(&mut self, node_id: NodeId, cmds: Vec<AppCmd>) {
        let app_face = self.nodes[node_id].app_face.expect("app node");
        for cmd in cmds {
            match cmd {
                AppCmd::Express(interest) => {
                    if !self
                        .nonce_log
                        .insert((node_id, interest.name.clone(), interest.nonce))
                    {
                        self.violations.push(format!(
                            "node {node_id}: nonce {} reused for {}",
                            interest.nonce, interest.name
                        ));
                    }
                    self.process_at_node(node_id, (app_face, Packet::Interest(interest)));
                }
                AppCmd::ArmTimer {
                    name,
                    attempt,
                    delay,
                } => {
                    let at = self.now + delay;
                    self.schedule(
                        at,
                        Action::RetransmitTimer {
                            node: node_id,
                            name,
                            attempt,
                        },
                    );
                }
                AppCmd::Announce(name) => self.announce(node_id, name),
                AppCmd::Reply(_) | AppCmd::ReplyNack(_) => {
                    self.violations
                        .push(format!("node {node_id}: unexpected reply outside pipeline"));
                }
            }
        }
    }

    fn handle_retransmit(&mut self, node_id: NodeId, name: Name, attempt: u32) {
        let now = self.now;
        let result = {
            let node = &mut self.nodes[node_id];
            let Some(consumer) = node.consumer.as_mut() else {
                return;
            };
            let rng = &mut self.rng;
            let mut nonce = || rng.next_u32();
            consumer.on_retransmit_timer(&name, attempt, now, &mut nonce)
        };
        match result {
            Ok(cmds) => self.apply_start_cmds(node_id, cmds),
            Err(abort) => self.aborted = Some(abort),
        }
    }

    fn consumers_done(&self) -> bool {
        let mut any = false;
        for node in &self.nodes {
            if let Some(c) = &node.consumer {
                any = true;
                if !c.completed {
                    return false;
                }
            }
        }
        any
    }

    /// Runs to completion: queue empty, every consumer finished, a
    /// consumer aborted, or the simulated time limit.
    pub fn run(&mut self) -> RunReport {
        if !self.started {
            self.started = true;
            let starts: Vec<(NodeId, SimTime)> = self
                .nodes
                .iter()
                .filter(|n| n.role != NodeRole::Router)
                .map(|n| (n.id, n.start_time))
                .collect();
            for (node, at) in starts {
                self.schedule(at, Action::AppStart { node });
            }
        }
        let mut hit_time_limit = false;
        while let Some(Reverse(event)) = self.queue.pop() {
            if event.at > self.config.max_sim_time {
                hit_time_limit = !self.consumers_done();
                break;
            }
            self.now = event.at;
            match event.action {
                Action::PacketArrival { node, face, packet } => {
                    self.process_at_node(node, (face, packet))
                }
                Action::AppStart { node } => self.handle_app_start(node),
                Action::RetransmitTimer {
                    node,
                    name,
                    attempt,
                } => self.handle_retransmit(node, name, attempt),
                Action::PitExpiry { node, name } => {
                    let now = self.now;
                    self.nodes[node].forwarder.pit_expire(&name, now);
                }
                Action::RecomputeRoutes => self.recompute_routes(),
            }
            if self.aborted.is_some() || self.consumers_done() {
                break;
            }
        }
        self.report(hit_time_limit)
    }

    fn report(&mut self, hit_time_limit: bool) -> RunReport {
        let now = self.now;
        let mut violations = self.violations.clone();
        for node in &mut self.nodes {
            node.forwarder.check_invariants(now);
            violations.extend(node.forwarder.violations.iter().cloned());
        }
        let consumers: Vec<ConsumerSummary> = self
            .nodes
            .iter()
            .filter_map(|n| {
                let c = n.consumer.as_ref()?;
                Some(ConsumerSummary {
                    node: n.id,
                    name: n.name.clone(),
                    start_ms: c.start_time.unwrap_or(n.start_time).as_ms_f64(),
                    finish_ms: c.finish_time.map(SimTime::as_ms_f64),
                    interests_sent: c.metrics.interests_sent,
                    interests_satisfied: c.metrics.interests_satisfied,
                    isr: c.metrics.interest_satisfaction_rate(),
                    avg_delay_ms: c.metrics.average_delay_ms(),
                    objects_held: c.objects_held(),
                    packets_held: c.packets_held(),
                    completed: c.completed,
                })
            })
            .collect();
        let completed_all = !consumers.is_empty() && consumers.iter().all(|c| c.completed);
        RunReport {
            end_time: now,
            completed_all,
            hit_time_limit,
            aborted: self.aborted.clone(),
            consumers,
            violations,
            recomputes_executed: self.recomputes_executed,
        }
    }

    pub fn dump_tables(&self) -> Vec<TableDump> {
        self.nodes.iter().map(|n| n.forwarder.dump_tables()).collect()
    }
}

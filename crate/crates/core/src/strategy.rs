//! Pluggable forwarding strategies.
//!
//! `ntorrent` ranks FIB next hops by the average interest-to-data delay
//! observed per face, exploring unsampled faces first. `client-control`
//! is the single-path baseline: always the lowest-cost next hop.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::name::Name;
use crate::packet::Interest;
use crate::time::SimTime;

/// Face identifier, unique within one node.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct FaceId(pub u32);

impl fmt::Display for FaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "face{}", self.0)
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("no viable next hop")]
pub struct NoViableHop;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyKind {
    Ntorrent,
    ClientControl,
}

impl StrategyKind {
    pub fn parse(s: &str) -> Option<StrategyKind> {
        match s {
            "ntorrent" => Some(StrategyKind::Ntorrent),
            "client-control" => Some(StrategyKind::ClientControl),
            _ => None,
        }
    }

    pub fn build(self) -> Box<dyn Strategy> {
        match self {
            StrategyKind::Ntorrent => Box::new(NtorrentStrategy::default()),
            StrategyKind::ClientControl => Box::new(ClientControlStrategy),
        }
    }
}

/// Per-node forwarding policy, invoked by the forwarder pipelines.
pub trait Strategy {
    /// Picks and orders out faces for a new PIT entry. `nexthops` is the
    /// FIB entry's ranked (face, cost) list; `in_face` must not be chosen.
    /// The forwarder sends on the first face and keeps the rest for nack
    /// retries.
    fn after_receive_interest(
        &mut self,
        interest: &Interest,
        in_face: FaceId,
        nexthops: &[(FaceId, u64)],
        now: SimTime,
    ) -> Result<Vec<FaceId>, NoViableHop>;

    /// Called exactly once per satisfied interest, with the face the data
    /// arrived on.
    fn before_satisfy_interest(&mut self, base_name: &Name, data_in_face: FaceId, now: SimTime);
}

/// Running mean of satisfaction delays observed on one face.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DelayStats {
    pub sample_count: u64,
    pub mean_delay_ms: f64,
}

impl DelayStats {
    pub fn record(&mut self, delay_ms: f64) {
        self.sample_count += 1;
        self.mean_delay_ms += (delay_ms - self.mean_delay_ms) / self.sample_count as f64;
    }
}

#[derive(Debug, Default)]
pub struct NtorrentStrategy {
    /// Interest base name -> (downstream face, arrival timestamp). The
    /// entry is deleted when its delay is computed. Keyed by name only,
    /// so a second in-flight interest for the same name overwrites the
    /// timestamp; PIT aggregation upstream makes that rare.
    pending_arrivals: BTreeMap<Name, (FaceId, SimTime)>,
    face_delay: BTreeMap<FaceId, DelayStats>,
    /// Data arrived with no recorded interest arrival (stale).
    pub stale_data_count: u64,
}

impl NtorrentStrategy {
    pub fn face_delay(&self) -> &BTreeMap<FaceId, DelayStats> {
        &self.face_delay
    }
}

/// Orders next hops: unsampled faces first (input order among themselves),
/// then sampled faces by ascending mean delay, ties by ascending face id.
pub fn rank_nexthops(
    face_delay: &BTreeMap<FaceId, DelayStats>,
    nexthops: &[FaceId],
) -> Vec<FaceId> {
    let mut unsampled = Vec::new();
    let mut sampled = Vec::new();
    for &face in nexthops {
        match face_delay.get(&face) {
            Some(stats) if stats.sample_count > 0 => sampled.push((stats.mean_delay_ms, face)),
            _ => unsampled.push(face),
        }
    }
    sampled.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    unsampled.extend(sampled.into_iter().map(|(_, f)| f));
    unsampled
}

impl Strategy for NtorrentStrategy {
    fn after_receive_interest(
        &mut self,
        interest: &Interest,
        in_face: FaceId,
        nexthops: &[(FaceId, u64)],
        now: SimTime,
    ) -> Result<Vec<FaceId>, NoViableHop> {
        let viable: Vec<FaceId> = nexthops
            .iter()
            .map(|&(f, _)| f)
            .filter(|&f| f != in_face)
            .collect();
        if viable.is_empty() {
            return Err(NoViableHop);
        }
        self.pending_arrivals
            .insert(interest.name.strip_digest(), (in_face, now));
        Ok(rank_nexthops(&self.face_delay, &viable))
    }

    fn before_satisfy_interest(&mut self, base_name: &Name, data_in_face: FaceId, now: SimTime) {
        match self.pending_arrivals.remove(base_name) {
            Some((_, arrived)) => {
                let delay_ms = (now - arrived).as_ms_f64();
                self.face_delay.entry(data_in_face).or_default().record(delay_ms);
            }
            None => self.stale_data_count += 1,
        }
    }
}

/// Stateless lowest-cost next hop, ties by ascending face id.
pub fn client_control_choose(nexthops: &[(FaceId, u64)]) -> Result<FaceId, NoViableHop> {
    nexthops
        .iter()
        .min_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|&(f, _)| f)
        .ok_or(NoViableHop)
}

#[derive(Debug, Default)]
pub struct ClientControlStrategy;

impl Strategy for ClientControlStrategy {
    fn after_receive_interest(
        &mut self,
        _interest: &Interest,
        in_face: FaceId,
        nexthops: &[(FaceId, u64)],
        _now: SimTime,
    ) -> Result<Vec<FaceId>, NoViableHop> {
        let viable: Vec<(FaceId, u64)> = nexthops
            .iter()
            .copied()
            .filter(|&(f, _)| f != in_face)
            .collect();
        // single path: no retry list beyond the one chosen hop
        Ok(vec![client_control_choose(&viable)?])
    }

    fn before_satisfy_interest(&mut self, _base_name: &Name, _in_face: FaceId, _now: SimTime) {}
}

/// Per-consumer interest accounting behind InterestSatisfactionRate and
/// AverageDelay.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub interests_sent: u64,
    pub interests_satisfied: u64,
    pub delay_sum_ms: f64,
    pub delay_count: u64,
}

impl Metrics {
    pub fn record_satisfaction(&mut self, delay_ms: f64) {
        self.interests_satisfied += 1;
        self.delay_sum_ms += delay_ms;
        self.delay_count += 1;
    }

    /// Satisfied over sent; undefined before any interest is sent.
    pub fn interest_satisfaction_rate(&self) -> Option<f64> {
        if self.interests_sent == 0 {
            None
        } else {
            Some(self.interests_satisfied as f64 / self.interests_sent as f64)
        }
    }

    /// Mean interest-to-data delay; undefined with no samples.
    pub fn average_delay_ms(&self) -> Option<f64> {
        if self.delay_count == 0 {
            None
        } else {
            Some(self.delay_sum_ms / self.delay_count as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interest(name: &str) -> Interest {
        Interest {
            name: Name::parse(name).unwrap(),
            nonce: 7,
            lifetime: SimTime::from_ms(4000),
            hop_count: 0,
            origin: None,
        }
    }

    #[test]
    fn naive_phase_uses_fib_order() {
        let mut s = NtorrentStrategy::default();
        let hops = [(FaceId(3), 10), (FaceId(1), 20), (FaceId(2), 30)];
        let ranked = s
            .after_receive_interest(&interest("/x"), FaceId(9), &hops, SimTime::ZERO)
            .unwrap();
        assert_eq!(ranked, vec![FaceId(3), FaceId(1), FaceId(2)]);
    }

    #[test]
    fn sampled_faces_ranked_by_mean_delay() {
        let mut s = NtorrentStrategy::default();
        // F1 mean 15ms, F2 mean 5ms
        record(&mut s, "/a", FaceId(1), 15.0);
        record(&mut s, "/b", FaceId(2), 5.0);
        let hops = [(FaceId(1), 10), (FaceId(2), 20)];
        let ranked = s
            .after_receive_interest(&interest("/c"), FaceId(9), &hops, SimTime::ZERO)
            .unwrap();
        assert_eq!(ranked, vec![FaceId(2), FaceId(1)]);
    }

    fn record(s: &mut NtorrentStrategy, name: &str, face: FaceId, delay_ms: f64) {
        let hops = [(face, 1)];
        s.after_receive_interest(&interest(name), FaceId(99), &hops, SimTime::ZERO)
            .unwrap();
        s.before_satisfy_interest(
            &Name::parse(name).unwrap(),
            face,
            SimTime::from_ms_f64(delay_ms),
        );
    }

    #[test]
    fn in_face_only_hop_is_no_viable_hop() {
        let mut s = NtorrentStrategy::default();
        let hops = [(FaceId(1), 10)];
        assert_eq!(
            s.after_receive_interest(&interest("/x"), FaceId(1), &hops, SimTime::ZERO),
            Err(NoViableHop)
        );
    }

    #[test]
    fn mean_of_two_samples() {
        let mut s = NtorrentStrategy::default();
        record(&mut s, "/a", FaceId(1), 10.0);
        record(&mut s, "/b", FaceId(1), 20.0);
        let stats = s.face_delay()[&FaceId(1)];
        assert_eq!(stats.sample_count, 2);
        assert!((stats.mean_delay_ms - 15.0).abs() < 1e-12);
    }

    #[test]
    fn single_sample_mean_is_identity() {
        let mut s = NtorrentStrategy::default();
        record(&mut s, "/a", FaceId(1), 7.0);
        assert_eq!(s.face_delay()[&FaceId(1)].mean_delay_ms, 7.0);
    }

    #[test]
    fn arrival_entry_deleted_after_delay_computed() {
        let mut s = NtorrentStrategy::default();
        record(&mut s, "/a", FaceId(1), 3.0);
        // a second data for the same name has no arrival record
        s.before_satisfy_interest(&Name::parse("/a").unwrap(), FaceId(1), SimTime::from_ms(9));
        assert_eq!(s.stale_data_count, 1);
        assert_eq!(s.face_delay()[&FaceId(1)].sample_count, 1);
    }

    #[test]
    fn rank_unsampled_first_then_by_delay() {
        let mut fd = BTreeMap::new();
        fd.insert(
            FaceId(1),
            DelayStats {
                sample_count: 1,
                mean_delay_ms: 15.0,
            },
        );
        fd.insert(
            FaceId(3),
            DelayStats {
                sample_count: 1,
                mean_delay_ms: 5.0,
            },
        );
        let ranked = rank_nexthops(&fd, &[FaceId(1), FaceId(2), FaceId(3)]);
        assert_eq!(ranked, vec![FaceId(2), FaceId(3), FaceId(1)]);
    }

    #[test]
    fn rank_ties_by_face_id() {
        let mut fd = BTreeMap::new();
        for id in [2, 1] {
            fd.insert(
                FaceId(id),
                DelayStats {
                    sample_count: 1,
                    mean_delay_ms: 4.0,
                },
            );
        }
        assert_eq!(
            rank_nexthops(&fd, &[FaceId(2), FaceId(1)]),
            vec![FaceId(1), FaceId(2)]
        );
    }

    #[test]
    fn client_control_picks_min_cost() {
        let hops = [(FaceId(1), 30), (FaceId(2), 10)];
        assert_eq!(client_control_choose(&hops), Ok(FaceId(2)));
        // repeated calls: identical (stateless)
        assert_eq!(client_control_choose(&hops), Ok(FaceId(2)));
        assert_eq!(client_control_choose(&[(FaceId(5), 1)]), Ok(FaceId(5)));
        assert_eq!(client_control_choose(&[]), Err(NoViableHop));
    }

    #[test]
    fn metrics_ratios() {
        let mut m = Metrics {
            interests_sent: 10,
            interests_satisfied: 9,
            ..Metrics::default()
        };
        assert_eq!(m.interest_satisfaction_rate(), Some(0.9));
        m.interests_satisfied = 10;
        assert_eq!(m.interest_satisfaction_rate(), Some(1.0));
        for d in [2.0, 4.0, 9.0] {
            m.delay_sum_ms += d;
            m.delay_count += 1;
        }
        assert_eq!(m.average_delay_ms(), Some(5.0));
        assert_eq!(Metrics::default().interest_satisfaction_rate(), None);
        assert_eq!(Metrics::default().average_delay_ms(), None);
    }
}

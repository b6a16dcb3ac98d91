//! Seeded synthetic traces.
//!
//! Every scenario is a pure function of its [`TraceSpec`], so any number
//! derived from a generated trace can be recomputed from the spec alone.
//!
//! Flow mix of each scenario:
//!
//! * `mixed`: `flows` 5-tuples; flow `i` is drawn with probability
//!   proportional to `1/(i+1)`. Sizes are uniform in 64..=1500 bytes,
//!   inter-arrival gaps uniform in 0..2 ms, input ports 1..=3. One packet in
//!   twenty is a `ctrl` record. Header fields read by the corpus programs
//!   (tos, id, checksum, segway fields, request) are random, and switches
//!   1..=3 get their own queue lengths and ports through `hop_meta`.
//! * `heavy-hitter`: one flow carries `heavy_share` of the packets on port 1,
//!   all packets are 1000 bytes and the rest is spread over `flows - 1`
//!   flows. The trace opens with background packets on port 2, which the
//!   heavy hitter program ignores. The first packet on port 1 belongs to the
//!   heavy flow.
//! * `path-change`: one flow whose path through switches 1 and 2 flips every
//!   `period` packets, 1 ms apart.
//! * `sampling`: `flows` flows sent round-robin, 1 µs apart.
//! * `segway`: GoodToMove (msg 1) messages with random Lamport stamps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::interp::TraceRecord;
use crate::model::MetaPatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Mixed,
    HeavyHitter,
    PathChange,
    Sampling,
    Segway,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Mixed,
        Scenario::HeavyHitter,
        Scenario::PathChange,
        Scenario::Sampling,
        Scenario::Segway,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Mixed => "mixed",
            Scenario::HeavyHitter => "heavy-hitter",
            Scenario::PathChange => "path-change",
            Scenario::Sampling => "sampling",
            Scenario::Segway => "segway",
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        Scenario::ALL.into_iter().find(|x| x.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSpec {
    pub scenario: Scenario,
    pub packets: usize,
    pub flows: usize,
    pub seed: u64,
    pub heavy_share: f64,
    pub period: usize,
}

impl TraceSpec {
    pub fn new(scenario: Scenario, packets: usize, seed: u64) -> Self {
        TraceSpec {
            scenario,
            packets,
            flows: 64,
            seed,
            heavy_share: 0.6,
            period: 50,
        }
    }
}

/// A 5-tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FiveTuple {
    pub src: u32,
    pub dst: u32,
    pub sport: u16,
    pub dport: u16,
    pub proto: u8,
}

impl FiveTuple {
    pub fn random(rng: &mut impl Rng) -> Self {
        FiveTuple {
            src: rng.gen(),
            dst: rng.gen(),
            sport: rng.gen(),
            dport: rng.gen(),
            proto: if rng.gen_bool(0.8) { 6 } else { 17 },
        }
    }

    pub fn stamp(&self, r: TraceRecord) -> TraceRecord {
        r.header("ipv4.src", self.src as u64)
            .header("ipv4.dst", self.dst as u64)
            .header("tcp.src", self.sport as u64)
            .header("tcp.dst", self.dport as u64)
            .header("ipv4.proto", self.proto as u64)
    }

    pub fn of(r: &TraceRecord) -> FiveTuple {
        let h = |k: &str| r.headers.get(k).copied().unwrap_or(0);
        FiveTuple {
            src: h("ipv4.src") as u32,
            dst: h("ipv4.dst") as u32,
            sport: h("tcp.src") as u16,
            dport: h("tcp.dst") as u16,
            proto: h("ipv4.proto") as u8,
        }
    }
}

/// `n` distinct random 5-tuples.
pub fn distinct_flows(rng: &mut impl Rng, n: usize) -> Vec<FiveTuple> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let f = FiveTuple::random(rng);
        if seen.insert(f) {
            out.push(f);
        }
    }
    out
}

pub fn generate(spec: &TraceSpec) -> Vec<TraceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.scenario {
        Scenario::Mixed => mixed(spec, &mut rng),
        Scenario::HeavyHitter => heavy_hitter(spec, &mut rng),
        Scenario::PathChange => path_change(spec, &mut rng),
        Scenario::Sampling => sampling(spec, &mut rng),
        Scenario::Segway => segway(spec, &mut rng),
    }
}

fn mixed(spec: &TraceSpec, rng: &mut ChaCha8Rng) -> Vec<TraceRecord> {
    let flows = distinct_flows(rng, spec.flows.max(1));
    let weights: Vec<f64> = (0..flows.len()).map(|i| 1.0 / (i + 1) as f64).collect();
    let dist = rand::distributions::WeightedIndex::new(&weights).expect("positive weights");
    let mut ts = 0u64;
    let mut out = Vec::with_capacity(spec.packets);
    for _ in 0..spec.packets {
        ts += rng.gen_range(0..2_000_000);
        let f = flows[rng.sample(&dist)];
        let mut r = f.stamp(TraceRecord::new(ts));
        if rng.gen_ratio(1, 20) {
            r.stream = "ctrl".into();
            r = r.header("pkt.request", rng.gen_range(0..3));
        }
        r.meta.input_port = rng.gen_range(1..=3);
        r.meta.output_port = rng.gen_range(1..=4);
        r.meta.size = rng.gen_range(64..=1500);
        r.meta.in_queue_length = rng.gen_range(0..100);
        r = r
            .header("ipv4.tos", rng.gen_range(0..4))
            .header("ipv4.id", rng.gen_range(0..1 << 16))
            .header("ipv4.checksum", rng.gen_range(0..1 << 16))
            .header("segway_header.msg", rng.gen_range(0..3))
            .header("segway_header.ts", rng.gen_range(0..300));
        for sw in 1..=3u16 {
            r.hop_meta.insert(
                sw,
                MetaPatch {
                    input_port: Some(rng.gen_range(1..=3)),
                    output_port: Some(rng.gen_range(1..=4)),
                    in_queue_length: Some(rng.gen_range(0..100)),
                    ..MetaPatch::default()
                },
            );
        }
        out.push(r);
    }
    out
}

fn heavy_hitter(spec: &TraceSpec, rng: &mut ChaCha8Rng) -> Vec<TraceRecord> {
    let flows = distinct_flows(rng, spec.flows.max(2));
    let (heavy, rest) = flows.split_first().unwrap();
    let lead = spec.packets / 20;
    let mut out = Vec::with_capacity(spec.packets);
    for i in 0..spec.packets {
        let ts = (i as u64 + 1) * 10_000;
        let (f, port) = if i < lead {
            (rest[rng.gen_range(0..rest.len())], 2)
        } else if i == lead || rng.gen_bool(spec.heavy_share) {
            (*heavy, 1)
        } else {
            (rest[rng.gen_range(0..rest.len())], 1)
        };
        let mut r = f.stamp(TraceRecord::new(ts));
        r.meta.input_port = port;
        r.meta.output_port = 3;
        r.meta.size = 1000;
        out.push(r);
    }
    out
}

/// Ports of the two alternating paths at switches 1 and 2.
pub const PATHS: [[(u16, u16); 2]; 2] = [[(1, 2), (1, 3)], [(1, 4), (2, 3)]];

fn path_change(spec: &TraceSpec, rng: &mut ChaCha8Rng) -> Vec<TraceRecord> {
    let f = FiveTuple::random(rng);
    let period = spec.period.max(1);
    (0..spec.packets)
        .map(|i| {
            let path = PATHS[(i / period) % 2];
            let mut r = f
                .stamp(TraceRecord::new((i as u64 + 1) * 1_000_000))
                .header("ipv4.checksum", 0);
            r.meta.size = 500;
            for (k, (inp, outp)) in path.iter().enumerate() {
                r.hop_meta.insert(
                    k as u16 + 1,
                    MetaPatch {
                        input_port: Some(*inp),
                        output_port: Some(*outp),
                        ..MetaPatch::default()
                    },
                );
            }
            r
        })
        .collect()
}

fn sampling(spec: &TraceSpec, rng: &mut ChaCha8Rng) -> Vec<TraceRecord> {
    let flows = distinct_flows(rng, spec.flows.max(1));
    (0..spec.packets)
        .map(|i| {
            let mut r = flows[i % flows.len()].stamp(TraceRecord::new((i as u64 + 1) * 1_000));
            r.meta.size = 100;
            r.meta.input_port = 1;
            r
        })
        .collect()
}

fn segway(spec: &TraceSpec, rng: &mut ChaCha8Rng) -> Vec<TraceRecord> {
    (0..spec.packets)
        .map(|i| {
            TraceRecord::new((i as u64 + 1) * 100_000)
                .header("segway_header.msg", 1)
                .header("segway_header.ts", rng.gen_range(0..200))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        for s in Scenario::ALL {
            let spec = TraceSpec::new(s, 300, 7);
            assert_eq!(generate(&spec), generate(&spec), "{}", s.name());
            assert_eq!(generate(&spec).len(), 300);
        }
    }

    #[test]
    fn timestamps_do_not_decrease() {
        let t = generate(&TraceSpec::new(Scenario::Mixed, 1000, 1));
        assert!(t.windows(2).all(|w| w[0].ts <= w[1].ts));
    }

    #[test]
    fn heavy_share_is_close() {
        let spec = TraceSpec::new(Scenario::HeavyHitter, 20_000, 3);
        let t = generate(&spec);
        let heavy = FiveTuple::of(t.iter().find(|r| r.meta.input_port == 1).unwrap());
        let on_port: Vec<_> = t.iter().filter(|r| r.meta.input_port == 1).collect();
        let share = on_port.iter().filter(|r| FiveTuple::of(r) == heavy).count() as f64 / on_port.len() as f64;
        assert!((share - 0.6).abs() < 0.02, "{share}");
    }
}

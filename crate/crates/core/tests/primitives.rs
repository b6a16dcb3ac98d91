use std::collections::BTreeMap;

use mafia::frontend::parse;
use mafia::model::key_index;
use mafia::primitives::{BloomFilter, Cardinality, CellAccess, CountMin, StateStore};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn keys() -> impl Strategy<Value = Vec<[u64; 2]>> {
    prop::collection::vec(any::<[u64; 2]>(), 1..200)
}

proptest! {
    #[test]
    fn bloom_has_no_false_negatives(ks in keys(), nhash in 1u32..6, size in 1u32..128, seed: u64) {
        let mut bf = BloomFilter::new("bf", nhash, size, seed);
        for k in &ks {
            bf.insert(k);
        }
        for k in &ks {
            prop_assert!(bf.contains(k));
        }
    }

    #[test]
    fn count_min_never_underestimates(
        updates in prop::collection::vec((0u64..50, 1u64..20), 1..300),
        nhash in 1u32..5,
        size in 1u32..64,
        seed: u64,
    ) {
        let mut cm = CountMin::new("cm", nhash, size, 32, seed);
        let mut exact: BTreeMap<u64, u64> = BTreeMap::new();
        for (k, d) in &updates {
            cm.add(&[*k], *d);
            *exact.entry(*k).or_default() += d;
        }
        let total: u64 = exact.values().sum();
        for (k, n) in exact {
            let est = cm.estimate(&[k]);
            prop_assert!(est >= n && est <= total);
        }
    }

    #[test]
    fn hll_registers_never_decrease(ks in keys(), seed: u64) {
        let mut c = Cardinality::hyperloglog("n", 64, seed);
        let mut last = c.cells().to_vec();
        for k in &ks {
            c.insert(k);
            prop_assert!(c.cells().iter().zip(&last).all(|(now, before)| now >= before));
            last = c.cells().to_vec();
        }
    }

    #[test]
    fn reinserting_does_not_change_cardinality(ks in keys(), seed: u64) {
        for mut c in [Cardinality::hyperloglog("n", 64, seed), Cardinality::pcsa("n", 64, seed)] {
            for k in &ks {
                c.insert(k);
            }
            let before = c.cells().to_vec();
            for k in ks.iter().rev() {
                c.insert(k);
            }
            prop_assert_eq!(before, c.cells().to_vec());
        }
    }

    #[test]
    fn chunked_reset_returns_to_initial(writes in prop::collection::vec((0usize..5, 0usize..4096, 1u64..1000), 0..100), chunk in 1u32..200) {
        let src = "k = Key(ipv4.src)\n\
                   a = Counter(width=32)\n\
                   b = HashMap(key=k, size=64, type=Counter(width=16))\n\
                   c = Sketch(alg=\"countmin\", key=k, nhash=3, size=100, width=32)\n\
                   d = BloomFilter(alg=\"membership\", key=k, nhash=2, size=48)\n\
                   e = HashMap(key=k, size=8, type=Sketch(alg=\"hll\", key=k, nhash=1, size=16))\n\
                   pkts >> a.add(1)";
        let prog = parse(src).unwrap().for_role(None).unwrap();
        let mut store = StateStore::for_switch(&prog, 1).unwrap();
        let ids: Vec<usize> = store.layout().iter().map(|v| v.id).collect();
        for (v, i, x) in writes {
            let id = ids[v % ids.len()];
            let len = store.cells(id).len();
            store.set_cell(id, i % len, x);
        }
        for id in ids {
            let mut steps = 0;
            while !store.reset_chunk(id, chunk).unwrap() {
                steps += 1;
                prop_assert!(steps <= store.cells(id).len());
            }
        }
        prop_assert!(store.is_initial());
    }
}

/// Pearson's test of `key_index` against the uniform distribution.
#[test]
fn key_index_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (buckets, seed) in [(16u32, 0u64), (64, 7), (256, 1 << 40), (1000, 12345)] {
        let n = 200 * buckets as usize;
        let mut counts = vec![0f64; buckets as usize];
        for i in 0..n as u64 {
            // Sequential keys as well as random ones.
            let k = if i % 2 == 0 { [i, 17] } else { [rng.gen(), rng.gen()] };
            counts[key_index(&k, buckets, seed) as usize] += 1.0;
        }
        let expect = n as f64 / buckets as f64;
        let stat: f64 = counts.iter().map(|c| (c - expect).powi(2) / expect).sum();
        let p = 1.0 - ChiSquared::new(buckets as f64 - 1.0).unwrap().cdf(stat);
        assert!(p > 1e-3, "{buckets} buckets: chi2 {stat:.1}, p {p:.2e}");
    }
}

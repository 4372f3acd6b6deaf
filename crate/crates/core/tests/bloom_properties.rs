use proptest::collection::vec;
use proptest::prelude::*;
use rand::RngCore;

use spex::bloom::{BloomFilter, FilterParams};
use spex::rng::seeded;

fn filled(items: &[u64], fpr: f64, seed: u64) -> BloomFilter {
    let mut f = BloomFilter::with_seed(FilterParams::new(items.len().max(1) as u64, fpr).unwrap(), seed);
    items.iter().for_each(|&x| f.insert(x));
    f
}

#[test]
fn ten_thousand_insertions_have_no_false_negatives() {
    let mut rng = seeded(404);
    let items: Vec<u64> = (0..10_000).map(|_| rng.next_u64()).collect();
    for fpr in [0.1, 0.01, 0.001] {
        let f = filled(&items, fpr, rng.next_u64());
        let misses = items.iter().filter(|&&x| !f.lookup(x)).count();
        assert_eq!(misses, 0, "fpr {fpr}");
    }
}

#[test]
fn capacity_filled_filters_hit_their_target_within_factor_two() {
    let mut rng = seeded(405);
    for fpr in [0.1, 0.01, 0.001] {
        let items: Vec<u64> = (0..2_000).map(|_| rng.next_u64()).collect();
        let est = filled(&items, fpr, rng.next_u64())
            .estimate_fpr(100_000, rng.next_u64())
            .unwrap();
        assert!(
            est.estimate >= fpr / 2.0 && est.estimate <= fpr * 2.0,
            "{fpr}: {}",
            est.estimate
        );
    }
}

proptest! {
    #[test]
    fn inserted_items_are_always_found(
        items in vec(any::<u64>(), 1..300),
        fpr in 1e-4f64..0.5,
        seed in any::<u64>(),
    ) {
        let f = filled(&items, fpr, seed);
        prop_assert!(items.iter().all(|&x| f.lookup(x)));
    }

    #[test]
    fn serialization_round_trips_byte_exact(
        items in vec(any::<u64>(), 0..200),
        capacity in 1u64..500,
        fpr in 1e-4f64..0.5,
        seed in any::<u64>(),
    ) {
        let mut f = BloomFilter::with_seed(FilterParams::new(capacity, fpr).unwrap(), seed);
        items.iter().for_each(|&x| f.insert(x));
        let bytes = f.serialize();
        let back = BloomFilter::deserialize(&bytes).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(back.serialize(), bytes);
    }

    #[test]
    fn estimates_depend_only_on_the_seed(
        items in vec(any::<u64>(), 1..100),
        probe_seed in any::<u64>(),
        trials in 1u64..3_000,
    ) {
        let f = filled(&items, 0.05, 9);
        let a = f.estimate_fpr(trials, probe_seed).unwrap();
        let b = f.clone().estimate_fpr(trials, probe_seed).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(a.trials, trials);
        prop_assert!(a.hits <= trials);
    }

    #[test]
    fn any_truncation_is_rejected(items in vec(any::<u64>(), 0..50), cut in 0usize..64) {
        let bytes = filled(&items, 0.01, 3).serialize();
        let cut = cut.min(bytes.len() - 1);
        prop_assert!(BloomFilter::deserialize(&bytes[..cut]).is_err());
    }
}

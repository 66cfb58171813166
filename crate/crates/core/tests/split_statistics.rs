use tsp_core::data::{tail_items, unbiased_split, InteractionDataset};
use tsp_core::eval::synthetic_biased_dataset;

#[test]
fn test_inclusion_is_independent_of_popularity() {
    // ~100k interactions over a power-law catalogue
    let ds = synthetic_biased_dataset(5000, 1000, 20, 1.0, 9).unwrap();
    assert_eq!(ds.interactions.len(), 100_000);
    let mut total = vec![0usize; ds.num_items];
    for &(_, i) in &ds.interactions {
        total[i] += 1;
    }
    for seed in [1u64, 2, 3] {
        let split = unbiased_split(&ds, 0.8, 0.1, seed).unwrap();
        let test = split.splits.as_ref().unwrap().test.clone();
        let p = test.len() as f64 / ds.interactions.len() as f64;
        let mut hits = vec![0usize; ds.num_items];
        for &(_, i) in &test {
            hits[i] += 1;
        }
        // popularity deciles by total count
        let mut order: Vec<usize> = (0..ds.num_items).collect();
        order.sort_by_key(|&i| (total[i], i));
        let mut chi2 = 0.0;
        for bin in order.chunks(ds.num_items / 10) {
            let n: usize = bin.iter().map(|&i| total[i]).sum();
            if n == 0 {
                continue;
            }
            let observed: usize = bin.iter().map(|&i| hits[i]).sum();
            let expected = p * n as f64;
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (observed as f64 - expected).abs() <= 3.0 * sigma.max(1.0),
                "seed {seed}: observed {observed}, expected {expected:.1} ± {sigma:.1}"
            );
            chi2 += (observed as f64 - expected).powi(2) / (expected * (1.0 - p));
        }
        // 10 bins: the 0.999 quantile of chi-square(9) is 27.9
        assert!(chi2 < 27.9, "seed {seed}: chi2 {chi2}");
    }
}

#[test]
fn split_is_deterministic_per_seed() {
    let ds = synthetic_biased_dataset(200, 100, 10, 1.2, 4).unwrap();
    let a = unbiased_split(&ds, 0.8, 0.1, 77).unwrap();
    let b = unbiased_split(&ds, 0.8, 0.1, 77).unwrap();
    let c = unbiased_split(&ds, 0.8, 0.1, 78).unwrap();
    assert_eq!(a.splits, b.splits);
    assert_ne!(a.splits, c.splits);
}

#[test]
fn tail_selection_matches_sort_oracle() {
    let ds = synthetic_biased_dataset(400, 1000, 25, 1.1, 2).unwrap();
    let split = unbiased_split(&ds, 0.8, 0.1, 2).unwrap();
    let tail = tail_items(&split, 0.2).unwrap();
    assert_eq!(tail.len(), 200);
    let pop = &split.item_popularity;
    let max_in = tail.iter().map(|&i| pop[i]).max().unwrap();
    let min_out = (0..1000).filter(|i| tail.binary_search(i).is_err()).map(|i| pop[i]).min().unwrap();
    assert!(max_in <= min_out);
    let mut oracle: Vec<usize> = (0..1000).collect();
    oracle.sort_by_key(|&i| (pop[i], i));
    let mut expected = oracle[..200].to_vec();
    expected.sort_unstable();
    assert_eq!(tail, expected);
}

#[test]
fn uniform_exponent_gives_flat_popularity() {
    let ds = synthetic_biased_dataset(2000, 50, 5, 0.0, 8).unwrap();
    let mut counts = vec![0usize; 50];
    for &(_, i) in &ds.interactions {
        counts[i] += 1;
    }
    let n = ds.interactions.len() as f64;
    let p = 1.0 / 50.0;
    let sigma = (n * p * (1.0 - p)).sqrt();
    for &c in &counts {
        assert!((c as f64 - n * p).abs() <= 3.0 * sigma + 1.0, "count {c}");
    }
}

#[test]
fn popular_decile_dominates_at_exponent_one_and_a_half() {
    for seed in 0..3 {
        let ds = synthetic_biased_dataset(200, 1000, 20, 1.5, seed).unwrap();
        let top = ds.interactions.iter().filter(|&&(_, i)| i < 100).count();
        assert!(top as f64 > 0.4 * ds.interactions.len() as f64);
    }
}

#[test]
fn small_datasets_round_split_sizes() {
    let ds = InteractionDataset::new(5, 4, (0..10).map(|k| (k % 5, 2 * (k / 5) + k % 2))).unwrap();
    let split = unbiased_split(&ds, 0.8, 0.1, 1).unwrap();
    let s = split.splits.unwrap();
    assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (8, 1, 1));
}

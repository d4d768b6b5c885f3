use nomocomp::channel::{transmit, transmit_noiseless};
use nomocomp::quantizer::DyadicQuantizer;
use nomocomp::rng;
use nomocomp::source_coding::{add_mod, derive_packing, digit_base, select_prime};
use nomocomp::{scale_to_power, ConstructionALattice, NestedLatticePair};
use proptest::prelude::*;

const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Equal modulo the cube of side `side`, allowing for representatives on
/// opposite faces.
fn congruent(a: &[f64], b: &[f64], side: f64, tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| {
        let d = (x - y) / side;
        (d - d.round()).abs() * side <= tol
    })
}

fn pair_strategy() -> impl Strategy<Value = NestedLatticePair> {
    (1usize..=6, 0usize..PRIMES.len(), any::<u64>(), 0.1f64..10.0)
        .prop_flat_map(|(n, pi, seed, power)| (Just(n), Just(PRIMES[pi]), 1..=n, Just(seed), Just(power)))
        .prop_filter_map("coset count", |(n, p, k, seed, power)| {
            if (p as f64).powi(k as i32) > 5e4 {
                return None;
            }
            let lattice = ConstructionALattice::systematic(n, p, k, 1.0, seed).ok()?;
            scale_to_power(&lattice, power).ok()
        })
}

fn vector(n: usize, scale: f64, seed: u64, index: u64) -> Vec<f64> {
    use rand::Rng;
    let mut r = rng::stream(seed, &[index]);
    (0..n).map(|_| scale * (2.0 * r.random::<f64>() - 1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mod_shaping_distributes_over_addition(pair in pair_strategy(), seed in any::<u64>()) {
        let n = pair.dimension();
        let side = pair.lattice().shaping_side();
        let x = vector(n, 3.0 * side, seed, 0);
        let y = vector(n, 3.0 * side, seed, 1);
        let xm = pair.mod_shaping(&x).unwrap();
        let lhs_in: Vec<f64> = xm.iter().zip(&y).map(|(a, b)| a + b).collect();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let lhs = pair.mod_shaping(&lhs_in).unwrap();
        let rhs = pair.mod_shaping(&sum).unwrap();
        prop_assert!(congruent(&lhs, &rhs, side, 1e-9 * side.max(1.0)));
        prop_assert!(lhs.iter().all(|v| v.abs() <= side / 2.0 + 1e-9));
    }

    #[test]
    fn fine_quantizer_commutes_with_shaping(pair in pair_strategy(), seed in any::<u64>()) {
        let n = pair.dimension();
        let side = pair.lattice().shaping_side();
        let y = vector(n, 4.0 * side, seed, 2);
        let direct = pair.mod_shaping(&pair.quantize_fine(&y).unwrap()).unwrap();
        let folded = pair.mod_shaping(&pair.quantize_fine(&pair.mod_shaping(&y).unwrap()).unwrap()).unwrap();
        prop_assert!(congruent(&direct, &folded, side, 1e-9 * side.max(1.0)));
    }

    #[test]
    fn codebook_is_linear(pair in pair_strategy(), seed in any::<u64>()) {
        use rand::Rng;
        let (k, p) = (pair.message_len(), pair.alphabet());
        let mut r = rng::stream(seed, &[3]);
        let w1: Vec<u64> = (0..k).map(|_| r.random_range(0..p)).collect();
        let w2: Vec<u64> = (0..k).map(|_| r.random_range(0..p)).collect();
        let x1 = pair.encode(&w1).unwrap();
        let x2 = pair.encode(&w2).unwrap();
        let sum: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
        let expected = pair.encode(&add_mod(&w1, &w2, p)).unwrap();
        let side = pair.lattice().shaping_side();
        prop_assert!(congruent(&pair.mod_shaping(&sum).unwrap(), &expected, side, 1e-9 * side.max(1.0)));
        prop_assert_eq!(pair.decode_ml(&sum).unwrap(), add_mod(&w1, &w2, p));
    }

    #[test]
    fn fine_decision_is_a_lattice_point(pair in pair_strategy(), seed in any::<u64>()) {
        let n = pair.dimension();
        let y = vector(n, 2.0 * pair.lattice().shaping_side(), seed, 4);
        let x = pair.quantize_fine(&y).unwrap();
        let w = pair.decode_ml(&y).unwrap();
        let side = pair.lattice().shaping_side();
        prop_assert!(congruent(&x, &pair.encode(&w).unwrap(), side, 1e-9 * side.max(1.0)));
    }

    #[test]
    fn quantizer_is_monotone(b in 1u32..=30, pi_max in 0.01f64..100.0, a in 0.0f64..1.0, c in 0.0f64..1.0) {
        let Ok(q) = DyadicQuantizer::new(b, pi_max, 0.0) else {
            return Ok(());
        };
        let (lo, hi) = if a <= c { (a * pi_max, c * pi_max) } else { (c * pi_max, a * pi_max) };
        let (ql, qh) = (q.quantize(lo).unwrap(), q.quantize(hi).unwrap());
        prop_assert!(ql <= qh);
        prop_assert!(qh <= q.max_level());
        for x in [lo, hi] {
            let back = q.dequantize(q.quantize(x).unwrap());
            prop_assert!(back <= x);
            prop_assert!(x - back < q.max_quantization_error());
        }
    }

    #[test]
    fn dequantized_sum_is_sum_of_dequantized(b in 3u32..=20, count in 1u64..=8, seed in any::<u64>()) {
        use rand::Rng;
        // Power-of-two range and dyadic shift, as for an affine pre map with dyadic coefficients.
        let q = DyadicQuantizer::new(b, 4.0, 0.5).unwrap();
        let mut r = rng::stream(seed, &[5]);
        let levels: Vec<u64> = (0..count).map(|_| r.random_range(0..=q.max_level())).collect();
        let total: u64 = levels.iter().sum();
        let each: f64 = levels.iter().map(|&l| q.dequantize(l) - q.shift()).sum();
        prop_assert_eq!(q.dequantize_sum(total, count).unwrap(), each);
    }

    #[test]
    fn packing_round_trip(b0 in 1u32..=8, summands in 1u64..=6, k in 1usize..=3, extra in 0u64..3, seed in any::<u64>()) {
        use rand::Rng;
        let q = digit_base(b0, summands).unwrap();
        let p = select_prime(q.pow(extra as u32 + 1), 1, 1, None).unwrap();
        let params = derive_packing(b0, summands, p, k).unwrap();
        let mut r = rng::stream(seed, &[6]);
        let readings: Vec<Vec<u64>> = (0..summands)
            .map(|_| (0..params.readings_per_block()).map(|_| r.random_range(0..=params.max_reading())).collect())
            .collect();
        let g = readings
            .iter()
            .map(|w| params.pack(w).unwrap())
            .fold(vec![0; k], |acc, m| add_mod(&acc, &m, p));
        let expected: Vec<u64> = (0..params.readings_per_block()).map(|t| readings.iter().map(|w| w[t]).sum()).collect();
        prop_assert_eq!(params.unpack_sum(&g).unwrap(), expected);
    }

    #[test]
    fn channel_is_linear(n in 1usize..=16, count in 1usize..=5, seed in any::<u64>(), noise in 0.0f64..4.0) {
        let signals: Vec<Vec<f64>> = (0..count as u64).map(|i| vector(n, 5.0, seed, 10 + i)).collect();
        let scaled: Vec<Vec<f64>> = signals.iter().map(|s| s.iter().map(|v| 2.0 * v).collect()).collect();
        let y1 = transmit(&signals, noise, &mut rng::stream(seed, &[7])).unwrap();
        let y2 = transmit(&scaled, noise, &mut rng::stream(seed, &[7])).unwrap();
        let clean = transmit_noiseless(&signals).unwrap();
        // Same noise stream: the difference is exactly the extra signal.
        let diff: Vec<f64> = y2.iter().zip(&y1).map(|(a, b)| a - b).collect();
        prop_assert!(close(&diff, &clean, 1e-9));
        let split = count / 2 + 1;
        let mut groups = vec![transmit_noiseless(&signals[..split]).unwrap()];
        if split < count {
            groups.push(transmit_noiseless(&signals[split..]).unwrap());
        }
        prop_assert!(close(&transmit_noiseless(&groups).unwrap(), &clean, 1e-9));
    }
}

#[test]
fn codebook_power_statements() {
    for (n, p, k) in [(4, 3, 2), (3, 5, 1), (2, 7, 2), (5, 2, 3)] {
        let lattice = ConstructionALattice::systematic(n, p, k, 1.0, 11).unwrap();
        let pair = scale_to_power(&lattice, 1.0).unwrap();
        let book = pair.codebook().unwrap();
        let mean = book.iter().map(|(_, x)| x.iter().map(|v| v * v).sum::<f64>()).sum::<f64>()
            / (book.len() * n) as f64;
        assert!((mean - pair.codebook_mean_power()).abs() < 1e-12, "n={n} p={p} k={k}");
        let half = pair.lattice().shaping_side() / 2.0;
        for (_, x) in &book {
            assert!(x.iter().map(|v| v * v).sum::<f64>() <= n as f64 * half * half + 1e-9);
        }
        if p % 2 == 1 {
            assert!(pair.codebook_mean_power() <= 1.0 + 1e-12);
        }
    }
}

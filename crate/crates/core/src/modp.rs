//! Integer arithmetic over Z_p.

/// Miller–Rabin witnesses that are deterministic for every `u64`.
const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic primality test for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &w in &WITNESSES {
        if n % w == 0 {
            return n == w;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime `>= n`, or `None` if it does not fit in a `u64`.
pub fn next_prime(n: u64) -> Option<u64> {
    let mut c = n.max(2);
    loop {
        if is_prime(c) {
            return Some(c);
        }
        c = c.checked_add(1)?;
    }
}

/// Multiplicative inverse of `a` modulo prime `p`.
pub fn inv_mod(a: u64, p: u64) -> u64 {
    debug_assert!(a % p != 0);
    pow_mod(a, p - 2, p)
}

/// Row-reduces `rows` (each of equal length, entries in `0..p`) in place and
/// returns the pivot columns. The rank is the number of pivots.
pub fn row_reduce(rows: &mut [Vec<u64>], p: u64) -> Vec<usize> {
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..n_cols {
        if r == n_rows {
            break;
        }
        let Some(sel) = (r..n_rows).find(|&i| rows[i][c] % p != 0) else {
            continue;
        };
        rows.swap(r, sel);
        let inv = inv_mod(rows[r][c], p);
        for x in rows[r].iter_mut() {
            *x = mul_mod(*x, inv, p);
        }
        for i in 0..n_rows {
            if i != r && rows[i][c] != 0 {
                let f = rows[i][c];
                for j in 0..n_cols {
                    let sub = mul_mod(f, rows[r][j], p);
                    rows[i][j] = (rows[i][j] + p - sub) % p;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Rank of a matrix over Z_p.
pub fn rank(matrix: &[Vec<u64>], p: u64) -> usize {
    let mut m: Vec<Vec<u64>> = matrix.iter().map(|r| r.iter().map(|x| x % p).collect()).collect();
    row_reduce(&mut m, p).len()
}

/// Inverse of a square matrix over Z_p, if it is invertible.
pub fn invert(matrix: &[Vec<u64>], p: u64) -> Option<Vec<Vec<u64>>> {
    let n = matrix.len();
    let mut aug: Vec<Vec<u64>> = matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r: Vec<u64> = row.iter().map(|x| x % p).collect();
            r.extend((0..n).map(|j| u64::from(i == j)));
            r
        })
        .collect();
    let pivots = row_reduce(&mut aug, p);
    if pivots.len() < n || pivots[n - 1] != n - 1 {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Row vector times matrix, reduced mod p.
pub fn vec_mat(w: &[u64], m: &[Vec<u64>], p: u64) -> Vec<u64> {
    let cols = m.first().map_or(0, Vec::len);
    let mut out = vec![0u128; cols];
    for (wi, row) in w.iter().zip(m) {
        if *wi == 0 {
            continue;
        }
        for (o, &g) in out.iter_mut().zip(row) {
            *o = (*o + *wi as u128 * g as u128) % p as u128;
        }
    }
    out.into_iter().map(|x| x as u64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes_small() {
        let primes: Vec<u64> = (0..50).filter(|&n| is_prime(n)).collect();
        assert_eq!(primes, [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]);
    }

    #[test]
    fn primes_against_trial_division() {
        let naive = |n: u64| n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0);
        for n in 0..20_000 {
            assert_eq!(is_prime(n), naive(n), "n = {n}");
        }
    }

    #[test]
    fn large_known_values() {
        assert!(is_prime(18_446_744_073_709_551_557)); // largest u64 prime
        assert!(!is_prime(3_215_031_751)); // strong pseudoprime to 2,3,5,7
        assert_eq!(next_prime(10_236), Some(10_243));
        assert_eq!(next_prime(0), Some(2));
        assert_eq!(next_prime(u64::MAX), None);
    }

    #[test]
    fn rank_and_inverse() {
        let g = vec![vec![1, 2], vec![2, 4]];
        assert_eq!(rank(&g, 3), 1);
        let h = vec![vec![1, 2], vec![0, 1]];
        let inv = invert(&h, 3).unwrap();
        for (i, row) in h.iter().enumerate() {
            let prod = vec_mat(row, &inv, 3);
            let unit: Vec<u64> = (0..2).map(|j| u64::from(i == j)).collect();
            assert_eq!(prod, unit);
        }
        assert!(invert(&g, 3).is_none());
    }
}

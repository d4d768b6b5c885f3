//! Base-`q` packing of quantized readings into messages over `Z_p`.
//!
//! Each node has `T = kτ` readings of `b0` bits. Groups of `τ` readings are
//! packed as the base-`q` digits of one symbol of `Z_p`, with
//! `q = N(2^b0 − 1) + 1`. A sum of up to `N` such symbols then has digits
//! that are at most `q − 1`, and as long as `q^τ ≤ p` the sum never wraps
//! modulo `p`. The receiver reads off the digit sums directly.
//!
//! Digit sums are integers `Σ_i w_i[t]`, not per-bit counts. Both views
//! give the same `Σ_i ξ_i` after scaling, because each `w_i[t]` is exactly
//! `ξ_i[t]·2^η` truncated.

use thiserror::Error;

use crate::modp;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PackingError {
    #[error("b0 = {0} must be between 1 and 62")]
    BadBits(u32),
    #[error("number of summands must be at least 1")]
    NoSummands,
    #[error("message length k must be at least 1")]
    ZeroLength,
    #[error("digit base q = N(2^b0 - 1) + 1 overflows 64 bits")]
    BaseOverflow,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("alphabet p = {p} is smaller than the digit base q = {q}")]
    PrimeTooSmall { p: u64, q: u64 },
    #[error("no prime >= {0} fits in 64 bits")]
    NoPrime(f64),
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("reading {value} at position {index} exceeds 2^b0 - 1 = {max}")]
    ReadingOutOfRange { index: usize, value: u64, max: u64 },
    #[error("component {component} = {value} does not decompose into {tau} base-{q} digits")]
    DigitOverflow { component: usize, value: u64, q: u64, tau: usize },
    #[error("component {component} = {value} is not in Z_{p}")]
    SymbolOutOfRange { component: usize, value: u64, p: u64 },
}

/// Packing parameters shared by all nodes of a cluster and its decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PackingParams {
    pub b0: u32,
    /// Largest number of messages that may be summed.
    pub summands: u64,
    pub q: u64,
    pub p: u64,
    pub tau: usize,
    pub k: usize,
}

/// `q = N(2^b0 − 1) + 1`.
pub fn digit_base(b0: u32, summands: u64) -> Result<u64, PackingError> {
    if b0 == 0 || b0 > 62 {
        return Err(PackingError::BadBits(b0));
    }
    if summands == 0 {
        return Err(PackingError::NoSummands);
    }
    summands
        .checked_mul((1u64 << b0) - 1)
        .and_then(|x| x.checked_add(1))
        .ok_or(PackingError::BaseOverflow)
}

/// Largest `t` with `q^t ≤ p`.
fn max_digits(q: u64, p: u64) -> usize {
    if q < 2 {
        return usize::MAX;
    }
    let mut t = 0;
    let mut power: u128 = 1;
    while power * q as u128 <= p as u128 {
        power *= q as u128;
        t += 1;
    }
    t
}

pub fn derive_packing(b0: u32, summands: u64, p: u64, k: usize) -> Result<PackingParams, PackingError> {
    let q = digit_base(b0, summands)?;
    if k == 0 {
        return Err(PackingError::ZeroLength);
    }
    if !modp::is_prime(p) {
        return Err(PackingError::NotPrime(p));
    }
    if p < q {
        return Err(PackingError::PrimeTooSmall { p, q });
    }
    Ok(PackingParams { b0, summands, q, p, tau: max_digits(q, p), k })
}

/// Smallest prime `p ≥ max(q, 2^(n·R/k))`. Without a rate target the bound
/// is `q` alone.
pub fn select_prime(q: u64, n: usize, k: usize, rate_target: Option<f64>) -> Result<u64, PackingError> {
    let floor = match rate_target {
        Some(r) => {
            let x = (n as f64 * r / k as f64).exp2().ceil();
            if !(x < u64::MAX as f64) {
                return Err(PackingError::NoPrime(x));
            }
            (x as u64).max(q)
        }
        None => q,
    };
    modp::next_prime(floor).ok_or(PackingError::NoPrime(floor as f64))
}

impl PackingParams {
    /// Readings per node per block, `T = kτ`.
    pub fn readings_per_block(&self) -> usize {
        self.k * self.tau
    }

    pub fn max_reading(&self) -> u64 {
        (1u64 << self.b0) - 1
    }

    /// Packs `T` readings into `k` symbols.
    pub fn pack(&self, readings: &[u64]) -> Result<Vec<u64>, PackingError> {
        let t = self.readings_per_block();
        if readings.len() != t {
            return Err(PackingError::LengthMismatch { expected: t, got: readings.len() });
        }
        let max = self.max_reading();
        if let Some((index, &value)) = readings.iter().enumerate().find(|(_, &w)| w > max) {
            return Err(PackingError::ReadingOutOfRange { index, value, max });
        }
        Ok(readings
            .chunks(self.tau)
            .map(|group| group.iter().rev().fold(0u128, |acc, &w| acc * self.q as u128 + w as u128) as u64)
            .collect())
    }

    /// Digit sums `Σ_i w_i[t]` from the modulo-`p` sum of packed messages.
    pub fn unpack_sum(&self, g: &[u64]) -> Result<Vec<u64>, PackingError> {
        if g.len() != self.k {
            return Err(PackingError::LengthMismatch { expected: self.k, got: g.len() });
        }
        if let Some((component, &value)) = g.iter().enumerate().find(|(_, &x)| x >= self.p) {
            return Err(PackingError::SymbolOutOfRange { component, value, p: self.p });
        }
        let (digits, overflow) = self.unpack_sum_lenient(g);
        if let Some(component) = overflow {
            return Err(PackingError::DigitOverflow { component, value: g[component], q: self.q, tau: self.tau });
        }
        Ok(digits)
    }

    /// Base-`q` digits where the top digit of each component absorbs the
    /// remaining quotient. Also returns the first component whose top digit
    /// reached `q`, which means the input was not a valid digit sum.
    pub fn unpack_sum_lenient(&self, g: &[u64]) -> (Vec<u64>, Option<usize>) {
        let mut out = Vec::with_capacity(self.readings_per_block());
        let mut overflow = None;
        for (component, &value) in g.iter().enumerate() {
            let mut rest = value;
            for _ in 1..self.tau {
                out.push(rest % self.q);
                rest /= self.q;
            }
            if rest >= self.q && overflow.is_none() {
                overflow = Some(component);
            }
            out.push(rest);
        }
        (out, overflow)
    }

    /// Digits per symbol under the conservative estimate
    /// `floor(log2 p / (b0 + log2 N))`. Never exceeds `tau`.
    pub fn conservative_tau(&self) -> usize {
        ((self.p as f64).log2() / (self.b0 as f64 + (self.summands as f64).log2())).floor() as usize
    }
}

/// Adds messages component-wise modulo `p`.
pub fn add_mod(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    a.iter().zip(b).map(|(&x, &y)| ((x as u128 + y as u128) % p as u128) as u64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_examples() {
        let a = derive_packing(2, 2, 53, 1).unwrap();
        assert_eq!((a.q, a.tau, a.readings_per_block()), (7, 2, 2));
        let b = derive_packing(1, 1, 2, 3).unwrap();
        assert_eq!((b.q, b.tau, b.readings_per_block()), (2, 1, 3));
        let q = digit_base(11, 10).unwrap();
        assert_eq!(q, 20_471);
        let p = select_prime(q, 1, 1, None).unwrap();
        assert!(derive_packing(11, 10, p, 1).unwrap().tau >= 1);
    }

    #[test]
    fn derive_errors() {
        assert_eq!(derive_packing(2, 2, 5, 1), Err(PackingError::PrimeTooSmall { p: 5, q: 7 }));
        assert_eq!(derive_packing(2, 2, 51, 1), Err(PackingError::NotPrime(51)));
        assert_eq!(derive_packing(0, 2, 53, 1), Err(PackingError::BadBits(0)));
        assert_eq!(derive_packing(2, 0, 53, 1), Err(PackingError::NoSummands));
        assert_eq!(derive_packing(2, 2, 53, 0), Err(PackingError::ZeroLength));
    }

    #[test]
    fn pack_examples() {
        let a = derive_packing(2, 2, 53, 1).unwrap();
        assert_eq!(a.pack(&[3, 2]).unwrap(), vec![17]);
        assert_eq!(a.pack(&[0, 0]).unwrap(), vec![0]);
        let wide = PackingParams { b0: 3, ..a };
        assert_eq!(wide.pack(&[6, 6]).unwrap(), vec![48]);
        assert!(matches!(a.pack(&[4, 0]), Err(PackingError::ReadingOutOfRange { index: 0, value: 4, max: 3 })));
        assert!(matches!(a.pack(&[1]), Err(PackingError::LengthMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn unpack_examples() {
        let a = derive_packing(2, 2, 53, 1).unwrap();
        let g = add_mod(&a.pack(&[3, 2]).unwrap(), &a.pack(&[3, 1]).unwrap(), 53);
        assert_eq!(g, vec![27]);
        assert_eq!(a.unpack_sum(&g).unwrap(), vec![6, 3]);
        assert_eq!(a.unpack_sum(&a.pack(&[2, 1]).unwrap()).unwrap(), vec![2, 1]);
        let bigger = PackingParams { p: 97, ..a };
        assert!(matches!(bigger.unpack_sum(&[65]), Err(PackingError::DigitOverflow { .. })));
        assert!(matches!(a.unpack_sum(&[53]), Err(PackingError::SymbolOutOfRange { .. })));
        assert_eq!(bigger.unpack_sum_lenient(&[65]), (vec![2, 9], Some(0)));
    }

    #[test]
    fn select_prime_respects_both_floors() {
        assert_eq!(select_prime(7, 4, 2, None).unwrap(), 7);
        assert_eq!(select_prime(7, 4, 2, Some(2.0)).unwrap(), 17);
        assert_eq!(select_prime(20, 4, 2, Some(2.0)).unwrap(), 23);
        assert!(select_prime(7, 100, 1, Some(1.0)).is_err());
    }

    #[test]
    fn capacity_is_monotone_in_p() {
        let mut last = 0;
        for p in (7..5000).filter(|&p| modp::is_prime(p)) {
            let params = derive_packing(2, 2, p, 1).unwrap();
            assert!(params.tau >= last);
            assert!(params.tau >= params.conservative_tau());
            assert!((params.q as u128).pow(params.tau as u32) <= p as u128);
            last = params.tau;
        }
    }
}

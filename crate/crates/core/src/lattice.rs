//! Nested lattice pairs from Construction A.
//!
//! The fine (coding) lattice is `Λc = γ·(C + pZⁿ)` where `C` is the row
//! space of a `k × n` generator over `Z_p`. The coarse (shaping) lattice is
//! the scaled cubic lattice `Λs = γp·Zⁿ ⊂ Λc`. Because `Λs` is cubic, its
//! quantizer, modulo reduction and second moment are all exact, and
//! maximum-likelihood decoding of `Λc` reduces to enumerating the `p^k`
//! cosets of `Λs` with a closed-form rounding inside each coset.
//!
//! Rounding ties (a coordinate exactly half-way between two multiples of
//! `γp`) go to the even multiple. As a consequence the Voronoi cell used
//! here is the closed cube `[-γp/2, γp/2]ⁿ` with the boundary split by that
//! rule.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::modp;
use crate::rng::{self, tag};

/// Largest number of cosets `p^k` the enumerating decoder will visit.
pub const ENUMERATION_LIMIT: u64 = 1_000_000;

/// Absolute tolerance for lattice identities in tests and self-checks.
pub const LATTICE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("alphabet size {0} is not prime")]
    NotPrime(u64),
    #[error("message length k = {k} must satisfy 1 <= k <= n = {n}")]
    BadDimensions { k: usize, n: usize },
    #[error("generator rows must all have length n = {n}")]
    GeneratorShape { n: usize },
    #[error("generator has rank {rank} < k = {k} over Z_{p}")]
    RankDeficient { rank: usize, k: usize, p: u64 },
    #[error("scale factor must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("power constraint must be positive and finite, got {0}")]
    BadPower(f64),
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("message symbol {value} at position {index} is outside Z_{p}")]
    SymbolOutOfRange { index: usize, value: u64, p: u64 },
    #[error("input vector has a non-finite coordinate")]
    NonFinite,
    #[error("{p}^{k} cosets exceed the enumeration limit of {limit}")]
    EnumerationGuard { p: u64, k: usize, limit: u64 },
}

/// A Construction-A lattice `γ·(C + pZⁿ)` with its generator over `Z_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionALattice {
    n: usize,
    p: u64,
    generator: Vec<Vec<u64>>,
    gamma: f64,
    /// `G⁻¹` over `Z_p` when `k = n`, in which case `C = Z_pⁿ`, `Λc = γZⁿ`
    /// and decoding is coordinate-wise rounding.
    full_inverse: Option<Vec<Vec<u64>>>,
}

impl ConstructionALattice {
    /// Builds the lattice from an explicit generator (`k` rows of length `n`).
    pub fn new(n: usize, p: u64, generator: Vec<Vec<u64>>, gamma: f64) -> Result<Self, LatticeError> {
        let k = generator.len();
        if !modp::is_prime(p) {
            return Err(LatticeError::NotPrime(p));
        }
        if k == 0 || k > n {
            return Err(LatticeError::BadDimensions { k, n });
        }
        if generator.iter().any(|r| r.len() != n) {
            return Err(LatticeError::GeneratorShape { n });
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(LatticeError::BadScale(gamma));
        }
        let generator: Vec<Vec<u64>> =
            generator.into_iter().map(|r| r.into_iter().map(|x| x % p).collect()).collect();
        let rank = modp::rank(&generator, p);
        if rank < k {
            return Err(LatticeError::RankDeficient { rank, k, p });
        }
        let full_inverse = if k == n { modp::invert(&generator, p) } else { None };
        Ok(Self { n, p, generator, gamma, full_inverse })
    }

    /// Systematic generator `[I_k | A]` with `A` drawn uniformly over `Z_p`
    /// from `seed`. Redraws until the generator has full rank.
    pub fn systematic(n: usize, p: u64, k: usize, gamma: f64, seed: u64) -> Result<Self, LatticeError> {
        if !modp::is_prime(p) {
            return Err(LatticeError::NotPrime(p));
        }
        if k == 0 || k > n {
            return Err(LatticeError::BadDimensions { k, n });
        }
        for attempt in 0u64.. {
            let mut r = rng::stream(seed, &[tag::GENERATOR, attempt]);
            let generator: Vec<Vec<u64>> = (0..k)
                .map(|row| {
                    (0..n)
                        .map(|col| if col < k { u64::from(col == row) } else { r.random_range(0..p) })
                        .collect()
                })
                .collect();
            match Self::new(n, p, generator, gamma) {
                Err(LatticeError::RankDeficient { .. }) => continue,
                other => return other,
            }
        }
        unreachable!("attempt counter is unbounded")
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn alphabet(&self) -> u64 {
        self.p
    }

    pub fn message_len(&self) -> usize {
        self.generator.len()
    }

    pub fn generator(&self) -> &[Vec<u64>] {
        &self.generator
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Side length `γp` of the shaping cube.
    pub fn shaping_side(&self) -> f64 {
        self.gamma * self.p as f64
    }

    /// Same code, different scale.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self, LatticeError> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(LatticeError::BadScale(gamma));
        }
        Ok(Self { gamma, ..self.clone() })
    }

    /// Number of cosets `p^k`, saturating at `u64::MAX`.
    pub fn coset_count(&self) -> u64 {
        let k = self.message_len() as u32;
        self.p.checked_pow(k).unwrap_or(u64::MAX)
    }

    /// True when the code is all of `Z_pⁿ`, so `Λc` is the cubic lattice `γZⁿ`.
    pub fn is_full_space(&self) -> bool {
        self.full_inverse.is_some()
    }

    /// Code symbols `w·G mod p` for a message `w ∈ Z_p^k`.
    pub fn code_symbols(&self, w: &[u64]) -> Result<Vec<u64>, LatticeError> {
        self.check_message(w)?;
        Ok(modp::vec_mat(w, &self.generator, self.p))
    }

    fn check_message(&self, w: &[u64]) -> Result<(), LatticeError> {
        if w.len() != self.message_len() {
            return Err(LatticeError::DimensionMismatch { expected: self.message_len(), got: w.len() });
        }
        if let Some((index, &value)) = w.iter().enumerate().find(|(_, &x)| x >= self.p) {
            return Err(LatticeError::SymbolOutOfRange { index, value, p: self.p });
        }
        Ok(())
    }
}

/// Nearest point of the fine lattice together with its coset label.
#[derive(Debug, Clone, PartialEq)]
pub struct FineDecision {
    /// Message whose coset contains the nearest point.
    pub message: Vec<u64>,
    /// Integer multiples of `γp` separating the point from the
    /// representative `γ·(wG mod p)`.
    pub shaping_shift: Vec<i64>,
    /// The fine lattice point itself.
    pub point: Vec<f64>,
}

impl FineDecision {
    /// True when the decision is the zero point of `Λc`.
    pub fn is_origin(&self) -> bool {
        self.point.iter().all(|&x| x == 0.0)
    }
}

/// Outcome of a Monte Carlo estimate of `P(z ∉ Vc)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GoodnessEstimate {
    pub escapes: u64,
    pub trials: u64,
}

impl GoodnessEstimate {
    pub fn fraction(&self) -> f64 {
        self.escapes as f64 / self.trials as f64
    }

    pub fn standard_error(&self) -> f64 {
        crate::stats::proportion_se(self.escapes, self.trials)
    }
}

/// A Construction-A lattice whose shaping cube has a known second moment.
///
/// Every node of a cluster holds an identical copy. `power` always equals
/// the exact second moment `(γp)²/12` of the shaping lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedLatticePair {
    lattice: ConstructionALattice,
    power: f64,
}

/// Rescales `lattice` so that the shaping lattice has second moment `power`,
/// i.e. `γ = sqrt(12·P)/p`.
pub fn scale_to_power(lattice: &ConstructionALattice, power: f64) -> Result<NestedLatticePair, LatticeError> {
    if !(power.is_finite() && power > 0.0) {
        return Err(LatticeError::BadPower(power));
    }
    let gamma = (12.0 * power).sqrt() / lattice.alphabet() as f64;
    Ok(NestedLatticePair { lattice: lattice.with_gamma(gamma)?, power })
}

impl NestedLatticePair {
    /// Keeps the lattice's own scale; the power is whatever `γ` implies.
    pub fn from_lattice(lattice: ConstructionALattice) -> Self {
        let side = lattice.shaping_side();
        Self { lattice, power: side * side / 12.0 }
    }

    pub fn lattice(&self) -> &ConstructionALattice {
        &self.lattice
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn dimension(&self) -> usize {
        self.lattice.n
    }

    pub fn alphabet(&self) -> u64 {
        self.lattice.p
    }

    pub fn message_len(&self) -> usize {
        self.lattice.message_len()
    }

    /// Exact second moment of the shaping lattice, `(γp)²/12`.
    pub fn sigma2_shaping(&self) -> f64 {
        let side = self.lattice.shaping_side();
        side * side / 12.0
    }

    /// Message rate `(k/n)·log2 p` in bits per channel use.
    pub fn message_rate(&self) -> f64 {
        self.message_len() as f64 / self.dimension() as f64 * (self.alphabet() as f64).log2()
    }

    fn check_vector(&self, y: &[f64]) -> Result<(), LatticeError> {
        if y.len() != self.dimension() {
            return Err(LatticeError::DimensionMismatch { expected: self.dimension(), got: y.len() });
        }
        if y.iter().any(|x| !x.is_finite()) {
            return Err(LatticeError::NonFinite);
        }
        Ok(())
    }

    /// `Q_Λs(y) = γp·round(y/(γp))`, ties to even.
    pub fn nearest_point_coarse(&self, y: &[f64]) -> Result<Vec<f64>, LatticeError> {
        self.check_vector(y)?;
        let side = self.lattice.shaping_side();
        Ok(y.iter().map(|&v| side * (v / side).round_ties_even()).collect())
    }

    /// `[y] mod Λs = y − Q_Λs(y)`.
    pub fn mod_shaping(&self, y: &[f64]) -> Result<Vec<f64>, LatticeError> {
        self.check_vector(y)?;
        Ok(self.mod_shaping_unchecked(y))
    }

    fn mod_shaping_unchecked(&self, y: &[f64]) -> Vec<f64> {
        let side = self.lattice.shaping_side();
        y.iter().map(|&v| v - side * (v / side).round_ties_even()).collect()
    }

    /// Channel encoder: `[γ·(wG mod p)] mod Λs`.
    pub fn encode(&self, w: &[u64]) -> Result<Vec<f64>, LatticeError> {
        let symbols = self.lattice.code_symbols(w)?;
        let p = self.alphabet();
        let gamma = self.lattice.gamma;
        Ok(symbols.into_iter().map(|c| gamma * centred(c, p) as f64).collect())
    }

    /// Every codeword of `Λc ∩ Vs`, in lexicographic message order.
    pub fn codebook(&self) -> Result<Vec<(Vec<u64>, Vec<f64>)>, LatticeError> {
        self.enumeration_guard()?;
        let k = self.message_len();
        let p = self.alphabet();
        let mut out = Vec::with_capacity(self.lattice.coset_count() as usize);
        let mut w = vec![0u64; k];
        loop {
            out.push((w.clone(), self.encode(&w)?));
            if !advance(&mut w, p) {
                return Ok(out);
            }
        }
    }

    /// Average energy per dimension of a codeword when the message is
    /// uniform on `Z_p^k`.
    ///
    /// A nonzero column of `G` makes its code symbol uniform on `Z_p`, so the
    /// value is exact without enumeration. For odd `p` it equals
    /// `P·(1 − 1/p²)` when no column of `G` is zero.
    pub fn codebook_mean_power(&self) -> f64 {
        let p = self.alphabet();
        let gamma = self.lattice.gamma;
        let symbol_energy: f64 =
            (0..p).map(|c| (centred(c, p) as f64).powi(2)).sum::<f64>() / p as f64 * gamma * gamma;
        let live_cols = (0..self.dimension())
            .filter(|&i| self.lattice.generator.iter().any(|row| row[i] != 0))
            .count();
        symbol_energy * live_cols as f64 / self.dimension() as f64
    }

    fn enumeration_guard(&self) -> Result<(), LatticeError> {
        let count = self.lattice.coset_count();
        if count > ENUMERATION_LIMIT {
            return Err(LatticeError::EnumerationGuard {
                p: self.alphabet(),
                k: self.message_len(),
                limit: ENUMERATION_LIMIT,
            });
        }
        Ok(())
    }

    /// Nearest point of `Λc` to `y` and the coset it lies in.
    ///
    /// When `k = n` the fine lattice is `γZⁿ` and this is coordinate-wise
    /// rounding. Otherwise the `p^k` cosets are enumerated in lexicographic
    /// order; within a coset the nearest point is found by rounding
    /// `(y/γ − c)/p`. Exact distance ties keep the lowest message index.
    pub fn decode_nearest(&self, y: &[f64]) -> Result<FineDecision, LatticeError> {
        self.check_vector(y)?;
        let p = self.alphabet();
        let pf = p as f64;
        let gamma = self.lattice.gamma;
        let u: Vec<f64> = y.iter().map(|&v| v / gamma).collect();

        if let Some(inverse) = &self.lattice.full_inverse {
            let m: Vec<f64> = u.iter().map(|x| x.round_ties_even()).collect();
            let symbols: Vec<u64> = m.iter().map(|&x| x.rem_euclid(pf) as u64).collect();
            let shaping_shift =
                m.iter().zip(&symbols).map(|(&x, &c)| ((x - c as f64) / pf).round() as i64).collect();
            let message = modp::vec_mat(&symbols, inverse, p);
            let point = m.into_iter().map(|x| gamma * x).collect();
            return Ok(FineDecision { message, shaping_shift, point });
        }

        self.enumeration_guard()?;
        let k = self.message_len();
        let n = self.dimension();
        let generator = &self.lattice.generator;
        let mut w = vec![0u64; k];
        let mut c = vec![0u64; n];
        let mut best = f64::INFINITY;
        let mut best_w = w.clone();
        let mut best_c = c.clone();
        loop {
            let mut cost = 0.0;
            let mut complete = true;
            for i in 0..n {
                let r = u[i] - c[i] as f64;
                let d = r - pf * (r / pf).round_ties_even();
                cost += d * d;
                if cost >= best {
                    complete = false;
                    break;
                }
            }
            if complete {
                best = cost;
                best_w.copy_from_slice(&w);
                best_c.copy_from_slice(&c);
            }
            // Lexicographic increment; every digit change adds its row of G.
            let mut j = k;
            loop {
                if j == 0 {
                    let shaping_shift: Vec<i64> = u
                        .iter()
                        .zip(&best_c)
                        .map(|(&x, &ci)| ((x - ci as f64) / pf).round_ties_even() as i64)
                        .collect();
                    let point = best_c
                        .iter()
                        .zip(&shaping_shift)
                        .map(|(&ci, &s)| gamma * (ci as f64 + pf * s as f64))
                        .collect();
                    return Ok(FineDecision { message: best_w, shaping_shift, point });
                }
                j -= 1;
                w[j] += 1;
                for (ci, &g) in c.iter_mut().zip(&generator[j]) {
                    *ci = (*ci + g) % p;
                }
                if w[j] < p {
                    break;
                }
                w[j] = 0;
            }
        }
    }

    /// Fine-lattice quantizer `Q_Λc(y)`.
    pub fn quantize_fine(&self, y: &[f64]) -> Result<Vec<f64>, LatticeError> {
        Ok(self.decode_nearest(y)?.point)
    }

    /// Maximum-likelihood message decision, `E2⁻¹([Q_Λc(y)] mod Λs)`.
    pub fn decode_ml(&self, y: &[f64]) -> Result<Vec<u64>, LatticeError> {
        Ok(self.decode_nearest(y)?.message)
    }

    /// Monte Carlo estimate of the per-dimension second moment of `Λs`.
    ///
    /// Samples are uniform on `[0, γp)ⁿ` folded into the Voronoi cell.
    pub fn second_moment_mc(&self, num_samples: usize, seed: u64, exec: Execution) -> f64 {
        const BATCH: usize = 8192;
        let n = self.dimension();
        let side = self.lattice.shaping_side();
        let batches = exec::batch_count(num_samples, BATCH);
        let partial = exec::map_collect(exec, batches, |b| {
            let (_, len) = exec::batch_bounds(num_samples, BATCH, b);
            let mut r = rng::stream(seed, &[tag::MOMENT, b as u64]);
            let mut x = vec![0.0; n];
            let mut acc = 0.0;
            for _ in 0..len {
                for xi in x.iter_mut() {
                    *xi = r.random::<f64>() * side;
                }
                acc += self.mod_shaping_unchecked(&x).iter().map(|v| v * v).sum::<f64>() / n as f64;
            }
            acc
        });
        partial.iter().sum::<f64>() / num_samples as f64
    }

    /// Monte Carlo estimate of `P(z ∉ Vc)` for `z ~ N(0, σ²Iₙ)`: the fraction
    /// of draws whose nearest fine lattice point is not the origin.
    pub fn empirical_goodness(
        &self,
        sigma_z2: f64,
        trials: usize,
        seed: u64,
        exec: Execution,
    ) -> Result<GoodnessEstimate, LatticeError> {
        if !self.lattice.is_full_space() {
            self.enumeration_guard()?;
        }
        let sigma = sigma_z2.max(0.0).sqrt();
        let n = self.dimension();
        let escapes = exec::map_reduce(
            exec,
            trials,
            || 0u64,
            |t| {
                let mut r = rng::stream(seed, &[tag::GOODNESS, t as u64]);
                let z: Vec<f64> = (0..n).map(|_| sigma * r.sample::<f64, _>(StandardNormal)).collect();
                let decision = self.decode_nearest(&z).expect("guard checked above");
                u64::from(!decision.is_origin())
            },
            |a, b| a + b,
        );
        Ok(GoodnessEstimate { escapes, trials: trials as u64 })
    }
}

/// Representative of `c ∈ Z_p` in `[-p/2, p/2]`, ties (only `p = 2`) to even.
fn centred(c: u64, p: u64) -> i64 {
    let (c, p) = (c as i64, p as i64);
    match (2 * c).cmp(&p) {
        std::cmp::Ordering::Less => c,
        std::cmp::Ordering::Greater => c - p,
        // c/p = 1/2 rounds to 0, so the representative stays at +p/2.
        std::cmp::Ordering::Equal => c,
    }
}

/// Lexicographic successor in `Z_p^k`; false after the last element.
fn advance(w: &mut [u64], p: u64) -> bool {
    for d in w.iter_mut().rev() {
        *d += 1;
        if *d < p {
            return true;
        }
        *d = 0;
    }
    false
}

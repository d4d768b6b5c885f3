//! The common `b`-bit dyadic quantizer.
//!
//! Values live in the shifted, nonnegative working range `[0, π_max]`. A
//! value `ξ` is represented by the terminated binary expansion with `v + 1`
//! integer bits and `η` fractional bits, which as an integer is simply
//! `floor(ξ·2^η)`. Sums of such integers divide back by `2^η`.

use thiserror::Error;

/// Largest supported word length. Keeps `ξ·2^η` and digit sums exact in `f64`.
pub const MAX_BITS: u32 = 52;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantizerError {
    #[error("range maximum must be finite and nonnegative, got {0}")]
    BadRange(f64),
    #[error("shift must be finite and nonnegative, got {0}")]
    BadShift(f64),
    #[error("{b} bits cannot hold the integer part of {pi_max} (need at least {need})")]
    TooFewBits { b: u32, pi_max: f64, need: i32 },
    #[error("{b} bits exceed the supported maximum of {MAX_BITS}")]
    TooManyBits { b: u32 },
    #[error("value {value} lies outside the working range [0, {pi_max}]")]
    OutOfRange { value: f64, pi_max: f64 },
    #[error("digit sum {sum} exceeds {count} x (2^{b} - 1)")]
    SumOutOfRange { sum: u64, count: u64, b: u32 },
}

/// Quantizer shared by every node of a cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicQuantizer {
    b: u32,
    v: i32,
    eta: u32,
    pi_max: f64,
    shift: f64,
}

/// `floor(log2 x)` for `x > 0`, exact at powers of two. Zero maps to zero.
pub fn integer_bits_exponent(x: f64) -> i32 {
    if x <= 0.0 {
        return 0;
    }
    let mut v = x.log2().floor() as i32;
    while 2f64.powi(v) > x {
        v -= 1;
    }
    while 2f64.powi(v + 1) <= x {
        v += 1;
    }
    v
}

impl DyadicQuantizer {
    /// `pi_max` is the largest value of the shifted range; `shift` is the
    /// offset that was added upstream to make the range nonnegative.
    pub fn new(b: u32, pi_max: f64, shift: f64) -> Result<Self, QuantizerError> {
        if !(pi_max.is_finite() && pi_max >= 0.0) {
            return Err(QuantizerError::BadRange(pi_max));
        }
        if !(shift.is_finite() && shift >= 0.0) {
            return Err(QuantizerError::BadShift(shift));
        }
        if b > MAX_BITS {
            return Err(QuantizerError::TooManyBits { b });
        }
        let v = integer_bits_exponent(pi_max);
        let eta = b as i32 - v - 1;
        if b == 0 || eta < 0 {
            return Err(QuantizerError::TooFewBits { b, pi_max, need: (v + 1).max(1) });
        }
        Ok(Self { b, v, eta: eta as u32, pi_max, shift })
    }

    /// Smallest admissible word length for `pi_max`, i.e. `η = 0`.
    pub fn min_bits(pi_max: f64) -> u32 {
        (integer_bits_exponent(pi_max) + 1).max(1) as u32
    }

    pub fn bits(&self) -> u32 {
        self.b
    }

    pub fn v(&self) -> i32 {
        self.v
    }

    pub fn eta(&self) -> u32 {
        self.eta
    }

    pub fn pi_max(&self) -> f64 {
        self.pi_max
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Largest quantizer output, `2^b − 1`.
    pub fn max_level(&self) -> u64 {
        (1u64 << self.b) - 1
    }

    fn scale(&self) -> f64 {
        2f64.powi(self.eta as i32)
    }

    /// `floor(ξ·2^η)` for `ξ ∈ [0, π_max]`.
    ///
    /// Values within a relative `1e-12` of the range ends are clamped onto it,
    /// so roundoff in an upstream shift does not trip the range check.
    pub fn quantize(&self, xi: f64) -> Result<u64, QuantizerError> {
        let slack = 1e-12 * self.pi_max.max(1.0);
        if !(xi >= -slack && xi <= self.pi_max + slack) {
            return Err(QuantizerError::OutOfRange { value: xi, pi_max: self.pi_max });
        }
        let xi = xi.clamp(0.0, self.pi_max);
        Ok(((xi * self.scale()).floor() as u64).min(self.max_level()))
    }

    /// Value represented by a single level, in the shifted range.
    pub fn dequantize(&self, level: u64) -> f64 {
        level as f64 / self.scale()
    }

    /// `S·2^(−η) − count·shift`: the sum of `count` dequantized readings in
    /// the original, unshifted range.
    pub fn dequantize_sum(&self, sum: u64, count: u64) -> Result<f64, QuantizerError> {
        let limit = u128::from(count) * u128::from(self.max_level());
        if u128::from(sum) > limit {
            return Err(QuantizerError::SumOutOfRange { sum, count, b: self.b });
        }
        Ok(sum as f64 / self.scale() - count as f64 * self.shift)
    }

    /// Per-reading truncation error bound `2^(−η)`.
    pub fn max_quantization_error(&self) -> f64 {
        1.0 / self.scale()
    }
}

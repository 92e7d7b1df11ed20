//! Prime-field arithmetic and the 2-Sylow structure of `F_p^*`.
//!
//! Write `p - 1 = 2^r * w` with `w` odd. The 2-Sylow subgroup of `F_p^*` is
//! cyclic of order `2^r` and generated by `eta = gamma^w` where `gamma` is any
//! quadratic non-residue. For a nonzero `a`, `a^w` lies in that subgroup, so
//! `a^w = eta^u` for a unique `u in [0, 2^r)`. The bits of `u` are the
//! *Sylow signature* of `a`; they drive the balance stage of the pipeline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported modulus: products of two residues must fit in `u128`.
pub const MAX_MODULUS: u64 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("{0} is not an odd prime")]
    NotPrime(u64),
    #[error("modulus {0} exceeds the supported bound 2^62")]
    ModulusTooLarge(u64),
    #[error("no quadratic non-residue below scan bound {bound} for p = {p}")]
    NonResidueScanExhausted { p: u64, bound: u64 },
    #[error("zero has no Sylow signature")]
    ZeroInput,
}

/// How far to scan for the least quadratic non-residue.
///
/// The default bound is `constant * ceil(log2 p)^2`, clipped to `p - 1`.
/// `full_scan` lifts the bound to `p - 1` unconditionally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanBound {
    pub constant: u64,
    pub full_scan: bool,
}

impl Default for ScanBound {
    fn default() -> Self {
        ScanBound { constant: 4, full_scan: false }
    }
}

impl ScanBound {
    pub fn limit(&self, p: u64) -> u64 {
        if self.full_scan {
            return p - 1;
        }
        let bits = 64 - (p - 1).leading_zeros() as u64;
        let log2_ceil = if p.is_power_of_two() { bits - 1 } else { bits };
        self.constant
            .saturating_mul(log2_ceil)
            .saturating_mul(log2_ceil)
            .min(p - 1)
    }
}

/// Deterministic trial division; fine for the desk-scale moduli used here.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d <= n / d {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// An odd prime field together with its 2-Sylow data `(r, w, gamma, eta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldCtx {
    p: u64,
    r: u32,
    w: u64,
    gamma: u64,
    eta: u64,
}

impl FieldCtx {
    pub fn new(p: u64) -> Result<Self, FieldError> {
        Self::with_scan(p, ScanBound::default())
    }

    pub fn with_scan(p: u64, scan: ScanBound) -> Result<Self, FieldError> {
        if p >= MAX_MODULUS {
            return Err(FieldError::ModulusTooLarge(p));
        }
        if p == 2 || !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        let r = (p - 1).trailing_zeros();
        let w = (p - 1) >> r;
        let half = (p - 1) / 2;
        let bound = scan.limit(p);
        let gamma = (2..=bound)
            .find(|&b| pow_mod(b, half, p) == p - 1)
            .ok_or(FieldError::NonResidueScanExhausted { p, bound })?;
        let eta = pow_mod(gamma, w, p);
        Ok(FieldCtx { p, r, w, gamma, eta })
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }

    /// 2-adic valuation of `p - 1`.
    #[inline]
    pub fn r(&self) -> u32 {
        self.r
    }

    /// Odd cofactor of `p - 1`.
    #[inline]
    pub fn w(&self) -> u64 {
        self.w
    }

    /// Least quadratic non-residue.
    #[inline]
    pub fn gamma(&self) -> u64 {
        self.gamma
    }

    /// Generator of the 2-Sylow subgroup.
    #[inline]
    pub fn eta(&self) -> u64 {
        self.eta
    }

    #[inline]
    pub fn reduce(&self, a: u64) -> u64 {
        a % self.p
    }

    /// Canonical representative of a signed integer.
    pub fn from_i64(&self, a: i64) -> u64 {
        (a as i128).rem_euclid(self.p as i128) as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.p as u128) as u64
    }

    pub fn pow(&self, a: u64, e: u64) -> u64 {
        pow_mod(a, e, self.p)
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: u64) -> Option<u64> {
        if a % self.p == 0 {
            None
        } else {
            Some(self.pow(a, self.p - 2))
        }
    }

    pub fn is_quadratic_residue(&self, a: u64) -> bool {
        a % self.p == 0 || self.pow(a, (self.p - 1) / 2) == 1
    }

    /// Sylow signature of a nonzero residue by bit-peeling in `<eta>`.
    ///
    /// With `b = a^w` and the low bits `u_0..u_{k-1}` already known as `u`,
    /// `(b * eta^-u)^(2^(r-1-k))` is `+1` or `-1` according to `u_k`.
    pub fn sylow_signature(&self, a: u64) -> Result<SylowSignature, FieldError> {
        let a = self.reduce(a);
        if a == 0 {
            return Err(FieldError::ZeroInput);
        }
        let b = self.pow(a, self.w);
        let eta_inv = self.inv(self.eta).expect("eta is a unit");
        let mut u = 0u64;
        let mut bits = Vec::with_capacity(self.r as usize);
        for k in 0..self.r {
            let mut t = self.mul(b, self.pow(eta_inv, u));
            for _ in 0..(self.r - 1 - k) {
                t = self.mul(t, t);
            }
            let bit = u8::from(t != 1);
            debug_assert!(t == 1 || t == self.p - 1);
            u |= (bit as u64) << k;
            bits.push(bit);
        }
        Ok(SylowSignature { bits })
    }
}

pub(crate) fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64 % p;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = ((acc as u128 * a as u128) % p as u128) as u64;
        }
        a = ((a as u128 * a as u128) % p as u128) as u64;
        e >>= 1;
    }
    acc
}

/// The bits `u_0, ..., u_{r-1}` (low bit first) of the exponent `u` with
/// `a^w = eta^u`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SylowSignature {
    bits: Vec<u8>,
}

impl SylowSignature {
    pub fn from_value(u: u64, r: u32) -> Self {
        SylowSignature { bits: (0..r).map(|k| ((u >> k) & 1) as u8).collect() }
    }

    pub fn from_bits(bits: Vec<u8>) -> Self {
        SylowSignature { bits }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn value(&self) -> u64 {
        self.bits.iter().enumerate().map(|(k, &b)| (b as u64) << k).sum()
    }

    /// Signature of the negated element: `-1 = eta^(2^(r-1))` flips the top bit.
    pub fn flip_top(&self) -> Self {
        let mut bits = self.bits.clone();
        if let Some(top) = bits.last_mut() {
            *top ^= 1;
        }
        SylowSignature { bits }
    }
}

/// Checks that `signature(-a) = signature(a) xor 2^(r-1)`.
pub fn negation_flips_top_bit(a: u64, ctx: &FieldCtx) -> Result<bool, FieldError> {
    let s = ctx.sylow_signature(a)?;
    let t = ctx.sylow_signature(ctx.neg(ctx.reduce(a)))?;
    Ok(t == s.flip_top())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn field_ctx_examples() {
        let f = FieldCtx::new(13).unwrap();
        assert_eq!((f.r(), f.w(), f.gamma(), f.eta()), (2, 3, 2, 8));
        let f = FieldCtx::new(5).unwrap();
        assert_eq!((f.r(), f.w(), f.gamma(), f.eta()), (2, 1, 2, 2));
        let f = FieldCtx::new(7).unwrap();
        assert_eq!((f.r(), f.w(), f.gamma(), f.eta()), (1, 3, 3, 6));
    }

    #[test]
    fn rejects_non_primes() {
        assert_eq!(FieldCtx::new(4), Err(FieldError::NotPrime(4)));
        assert_eq!(FieldCtx::new(2), Err(FieldError::NotPrime(2)));
        assert_eq!(FieldCtx::new(1), Err(FieldError::NotPrime(1)));
        assert!(matches!(FieldCtx::new(1 << 62), Err(FieldError::ModulusTooLarge(_))));
    }

    #[test]
    fn scan_bound_can_be_exhausted() {
        // p = 73: 2..4 are residues, 5 is the least non-residue.
        let tight = ScanBound { constant: 0, full_scan: false };
        assert!(matches!(
            FieldCtx::with_scan(73, tight),
            Err(FieldError::NonResidueScanExhausted { .. })
        ));
        let full = ScanBound { constant: 0, full_scan: true };
        assert_eq!(FieldCtx::with_scan(73, full).unwrap().gamma(), 5);
    }

    #[test]
    fn signature_examples() {
        let f = FieldCtx::new(13).unwrap();
        assert_eq!(f.sylow_signature(1).unwrap().bits(), &[0, 0]);
        let s = f.sylow_signature(11).unwrap();
        assert_eq!((s.value(), s.bits()), (3, &[1u8, 1][..]));
        let s = f.sylow_signature(2).unwrap();
        assert_eq!((s.value(), s.bits()), (1, &[1u8, 0][..]));
        assert_eq!(f.sylow_signature(12).unwrap().value(), 2);
        assert_eq!(f.sylow_signature(0), Err(FieldError::ZeroInput));
    }

    #[test]
    fn negation_examples() {
        let f13 = FieldCtx::new(13).unwrap();
        assert!(negation_flips_top_bit(2, &f13).unwrap());
        assert!(negation_flips_top_bit(1, &f13).unwrap());
        assert!(negation_flips_top_bit(1, &FieldCtx::new(5).unwrap()).unwrap());
        assert_eq!(negation_flips_top_bit(0, &f13), Err(FieldError::ZeroInput));
    }

    fn small_prime() -> impl Strategy<Value = u64> {
        (3u64..3000).prop_filter("prime", |&p| is_prime(p))
    }

    proptest! {
        #[test]
        fn signature_reconstructs(p in small_prime(), a in 1u64..1_000_000) {
            let f = FieldCtx::new(p).unwrap();
            let a = a % p;
            prop_assume!(a != 0);
            let s = f.sylow_signature(a).unwrap();
            prop_assert_eq!(s.len(), f.r() as usize);
            prop_assert_eq!(f.pow(f.eta(), s.value()), f.pow(a, f.w()));
            prop_assert!(negation_flips_top_bit(a, &f).unwrap());
        }

        #[test]
        fn gamma_is_least_and_eta_has_full_order(p in small_prime()) {
            let f = FieldCtx::new(p).unwrap();
            prop_assert_eq!(f.pow(f.gamma(), (p - 1) / 2), p - 1);
            for b in 2..f.gamma() {
                prop_assert!(f.is_quadratic_residue(b));
            }
            prop_assert_eq!(f.pow(f.eta(), 1 << (f.r() - 1)), p - 1);
            prop_assert_eq!((1u64 << f.r()) * f.w(), p - 1);
        }
    }
}

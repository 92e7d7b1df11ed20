//! Towers of quotient rings over `F_p`.
//!
//! Level 0 is `F_p`. Level `k >= 1` is `L_{k-1}[v_k] / (m_k)` where `m_k` is
//! a monic polynomial over level `k - 1`. Elements are stored flat: a level-k
//! element is the list of its `deg m_k` coefficients (level `k - 1` elements)
//! laid out one after another, so it has `dim_k = prod deg m_i` residues and
//! embedding a lower-level element upward is zero padding.
//!
//! The rings involved are products of fields that nobody knows how to
//! separate yet, so inversion and gcd may run into zero divisors. Those are
//! reported as [`ZeroDivisorWitness`] values and either turned into a factor
//! of the base modulus or used to split the ring by CRT.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::ffield::FieldCtx;
use crate::fppoly::{poly_gcd, FpPoly};

/// Default bound on the `F_p`-dimension of a tower.
pub const DEFAULT_DIMENSION_CEILING: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TowerError {
    #[error("modulus at level {level} is not monic of degree >= 1")]
    BadModulus { level: usize },
    #[error("tower dimension {dim} exceeds the ceiling {ceiling}")]
    DimensionCeilingExceeded { dim: usize, ceiling: usize },
    #[error("expected level {expected}, found {found}")]
    LevelMismatch { expected: usize, found: usize },
    #[error("zero has no inverse")]
    ZeroInput,
    #[error("gcd of two zero polynomials")]
    BothZero,
    #[error("witness at level {level} does not split anything")]
    InvalidWitness { level: usize },
    #[error("modulus split at level {level} is not coprime")]
    NotCoprime { level: usize },
}

/// A nonzero, non-invertible element found at `level`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroDivisorWitness {
    pub level: usize,
    pub element: TowerElem,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inverse {
    Unit(TowerElem),
    ZeroDivisor(ZeroDivisorWitness),
}

/// `m_level = factor * cofactor` with both parts proper and monic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModulusSplit {
    pub level: usize,
    pub factor: TowerPoly,
    pub cofactor: TowerPoly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WitnessResolution {
    BaseFactor(FpPoly),
    ModulusSplit(ModulusSplit),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcdMode {
    /// Any witness reaching the base modulus aborts with a factor of it.
    Halt,
    /// Every witness splits the ring; the gcd is assembled componentwise.
    Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GcdOutcome {
    Gcd { gcd: TowerPoly, splits: Vec<ModulusSplit> },
    Factor(FpPoly),
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TowerElem {
    level: usize,
    data: Vec<u64>,
}

impl fmt::Debug for TowerElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}{:?}", self.level, self.data)
    }
}

impl TowerElem {
    pub fn level(&self) -> usize {
        self.level
    }

    /// Flat residue vector, lowest block first.
    pub fn data(&self) -> &[u64] {
        &self.data
    }

    /// The `F_p` part: constant term of every variable.
    pub fn scalar(&self) -> u64 {
        self.data[0]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&c| c == 0)
    }

    /// True when only the `F_p` constant is nonzero.
    pub fn is_scalar(&self) -> bool {
        self.data[1..].iter().all(|&c| c == 0)
    }
}

/// Polynomial whose coefficients are elements of one tower level.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TowerPoly {
    level: usize,
    coeffs: Vec<TowerElem>,
}

impl fmt::Debug for TowerPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TowerPoly(L{}){:?}", self.level, self.coeffs)
    }
}

impl TowerPoly {
    pub fn new(level: usize, mut coeffs: Vec<TowerElem>) -> Self {
        debug_assert!(coeffs.iter().all(|c| c.level == level));
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        TowerPoly { level, coeffs }
    }

    pub fn zero(level: usize) -> Self {
        TowerPoly { level, coeffs: Vec::new() }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn coeffs(&self) -> &[TowerElem] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn deg(&self) -> usize {
        self.degree().unwrap_or(0)
    }

    pub fn lc(&self) -> Option<&TowerElem> {
        self.coeffs.last()
    }

    pub fn coeff(&self, i: usize) -> Option<&TowerElem> {
        self.coeffs.get(i)
    }
}

struct Inner {
    ctx: FieldCtx,
    /// `moduli[k - 1]` is the level-k modulus, a polynomial over level `k - 1`.
    moduli: Vec<TowerPoly>,
    dims: Vec<usize>,
    /// Level-1 modulus as plain residues, for the fast path.
    base: Vec<u64>,
    ceiling: usize,
}

/// A tower of quotient rings; cheap to clone.
#[derive(Clone)]
pub struct Tower {
    inner: Arc<Inner>,
}

impl fmt::Debug for Tower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tower")
            .field("p", &self.inner.ctx.p())
            .field("dims", &self.inner.dims)
            .finish()
    }
}

fn add_into(p: u64, acc: &mut [u64], t: &[u64]) {
    for (a, &b) in acc.iter_mut().zip(t) {
        let s = *a + b;
        *a = if s >= p { s - p } else { s };
    }
}

fn sub_into(p: u64, acc: &mut [u64], t: &[u64]) {
    for (a, &b) in acc.iter_mut().zip(t) {
        *a = if *a >= b { *a - b } else { *a + p - b };
    }
}

impl Tower {
    /// The trivial tower `F_p` with no quotient levels yet.
    pub fn base(ctx: FieldCtx, ceiling: usize) -> Self {
        Tower {
            inner: Arc::new(Inner {
                ctx,
                moduli: Vec::new(),
                dims: vec![1],
                base: Vec::new(),
                ceiling,
            }),
        }
    }

    /// `F_p[x] / (f)`.
    pub fn over_fp(f: &FpPoly, ceiling: usize) -> Result<Self, TowerError> {
        let base = Tower::base(f.ctx(), ceiling);
        let m = base.poly_from_fp(f);
        base.extend(m)
    }

    /// Adds a level on top whose modulus is `modulus` (over the current top).
    pub fn extend(&self, modulus: TowerPoly) -> Result<Self, TowerError> {
        let level = self.height() + 1;
        if modulus.level != self.height() {
            return Err(TowerError::LevelMismatch { expected: self.height(), found: modulus.level });
        }
        let d = modulus.deg();
        if d == 0 || !self.is_one(modulus.lc().expect("nonzero")) {
            return Err(TowerError::BadModulus { level });
        }
        let dim = self.dim(self.height()).saturating_mul(d);
        if dim > self.inner.ceiling {
            return Err(TowerError::DimensionCeilingExceeded { dim, ceiling: self.inner.ceiling });
        }
        let mut moduli = self.inner.moduli.clone();
        moduli.push(modulus);
        Ok(self.rebuild(moduli))
    }

    fn rebuild(&self, moduli: Vec<TowerPoly>) -> Self {
        let mut dims = vec![1usize];
        for m in &moduli {
            dims.push(dims.last().unwrap() * m.deg());
        }
        let base = moduli
            .first()
            .map(|m| m.coeffs.iter().map(|c| c.data[0]).collect())
            .unwrap_or_default();
        Tower {
            inner: Arc::new(Inner { ctx: self.inner.ctx, moduli, dims, base, ceiling: self.inner.ceiling }),
        }
    }

    /// The tower cut down to its first `height` levels.
    pub fn truncate(&self, height: usize) -> Self {
        self.rebuild(self.inner.moduli[..height].to_vec())
    }

    pub fn ctx(&self) -> FieldCtx {
        self.inner.ctx
    }

    pub fn height(&self) -> usize {
        self.inner.moduli.len()
    }

    pub fn ceiling(&self) -> usize {
        self.inner.ceiling
    }

    /// Dimension of level `k` over `F_p`.
    pub fn dim(&self, k: usize) -> usize {
        self.inner.dims[k]
    }

    /// Degree of the level-k modulus.
    pub fn degree(&self, k: usize) -> usize {
        self.inner.moduli[k - 1].deg()
    }

    pub fn modulus(&self, k: usize) -> &TowerPoly {
        &self.inner.moduli[k - 1]
    }

    /// The level-1 modulus as a polynomial over `F_p`.
    pub fn base_modulus(&self) -> FpPoly {
        FpPoly::new(self.ctx(), self.inner.base.clone())
    }

    // ---- elements ----

    pub fn zero(&self, level: usize) -> TowerElem {
        TowerElem { level, data: vec![0; self.dim(level)] }
    }

    pub fn one(&self, level: usize) -> TowerElem {
        self.scalar(level, 1)
    }

    pub fn scalar(&self, level: usize, c: u64) -> TowerElem {
        let mut e = self.zero(level);
        e.data[0] = self.ctx().reduce(c);
        e
    }

    /// The generator `v_level` of level `level`.
    pub fn var(&self, level: usize) -> TowerElem {
        let lower = self.one(level - 1);
        self.from_coeffs(level, &[self.zero(level - 1), lower])
    }

    /// Constant embedding of a lower-level element.
    pub fn embed(&self, a: &TowerElem, level: usize) -> TowerElem {
        debug_assert!(a.level <= level);
        let mut data = a.data.clone();
        data.resize(self.dim(level), 0);
        TowerElem { level, data }
    }

    pub fn is_one(&self, a: &TowerElem) -> bool {
        a.data[0] == 1 && a.is_scalar()
    }

    /// Element of level 1 from a polynomial over `F_p` (reduced mod `m_1`).
    pub fn elem_from_fp(&self, h: &FpPoly) -> TowerElem {
        let coeffs: Vec<TowerElem> = h.coeffs().iter().map(|&c| self.scalar(0, c)).collect();
        self.from_coeffs(1, &coeffs)
    }

    pub fn elem_to_fp(&self, a: &TowerElem) -> FpPoly {
        debug_assert_eq!(a.level, 1);
        FpPoly::new(self.ctx(), a.data.clone())
    }

    pub fn poly_from_fp(&self, h: &FpPoly) -> TowerPoly {
        TowerPoly::new(0, h.coeffs().iter().map(|&c| self.scalar(0, c)).collect())
    }

    pub fn poly_to_fp(&self, h: &TowerPoly) -> FpPoly {
        debug_assert_eq!(h.level, 0);
        FpPoly::new(self.ctx(), h.coeffs.iter().map(|c| c.data[0]).collect())
    }

    /// Level-k element `sum coeffs[i] v_k^i`, reduced modulo `m_k`.
    pub fn from_coeffs(&self, level: usize, coeffs: &[TowerElem]) -> TowerElem {
        let s = self.dim(level - 1);
        let mut data = Vec::with_capacity(coeffs.len().max(self.degree(level)) * s);
        for c in coeffs {
            debug_assert_eq!(c.level, level - 1);
            data.extend_from_slice(&c.data);
        }
        data.resize(data.len().max(self.degree(level) * s), 0);
        TowerElem { level, data: self.reduce_blocks(level, data) }
    }

    /// The coefficient of `v_k^i` of a level-k element.
    pub fn coeff_of(&self, a: &TowerElem, i: usize) -> TowerElem {
        let s = self.dim(a.level - 1);
        TowerElem { level: a.level - 1, data: a.data[i * s..(i + 1) * s].to_vec() }
    }

    /// View a level-k element as a polynomial in `v_k` over level `k - 1`.
    pub fn elem_to_poly(&self, a: &TowerElem) -> TowerPoly {
        let k = a.level;
        let coeffs = (0..self.degree(k)).map(|i| self.coeff_of(a, i)).collect();
        TowerPoly::new(k - 1, coeffs)
    }

    /// Reduces a polynomial over level `k - 1` modulo `m_k`.
    pub fn poly_to_elem(&self, level: usize, h: &TowerPoly) -> TowerElem {
        if h.is_zero() {
            return self.zero(level);
        }
        self.from_coeffs(level, &h.coeffs)
    }

    pub fn add(&self, a: &TowerElem, b: &TowerElem) -> TowerElem {
        debug_assert_eq!(a.level, b.level);
        let mut data = a.data.clone();
        add_into(self.ctx().p(), &mut data, &b.data);
        TowerElem { level: a.level, data }
    }

    pub fn sub(&self, a: &TowerElem, b: &TowerElem) -> TowerElem {
        debug_assert_eq!(a.level, b.level);
        let mut data = a.data.clone();
        sub_into(self.ctx().p(), &mut data, &b.data);
        TowerElem { level: a.level, data }
    }

    pub fn neg(&self, a: &TowerElem) -> TowerElem {
        self.sub(&self.zero(a.level), a)
    }

    pub fn scale(&self, a: &TowerElem, c: u64) -> TowerElem {
        let ctx = self.ctx();
        TowerElem { level: a.level, data: a.data.iter().map(|&x| ctx.mul(x, c)).collect() }
    }

    pub fn mul(&self, a: &TowerElem, b: &TowerElem) -> TowerElem {
        debug_assert_eq!(a.level, b.level);
        TowerElem { level: a.level, data: self.mul_raw(a.level, &a.data, &b.data) }
    }

    pub fn pow(&self, a: &TowerElem, e: u64) -> TowerElem {
        let mut acc = self.one(a.level);
        if e == 0 {
            return acc;
        }
        for bit in (0..64 - e.leading_zeros()).rev() {
            acc = self.mul(&acc, &acc);
            if (e >> bit) & 1 == 1 {
                acc = self.mul(&acc, a);
            }
        }
        acc
    }

    fn mul_raw(&self, k: usize, a: &[u64], b: &[u64]) -> Vec<u64> {
        match k {
            0 => vec![self.ctx().mul(a[0], b[0])],
            1 => self.mul_level1(a, b),
            _ => {
                let p = self.ctx().p();
                let s = self.dim(k - 1);
                let d = self.degree(k);
                let mut prod = vec![0u64; (2 * d - 1) * s];
                for (i, ai) in a.chunks(s).enumerate() {
                    if ai.iter().all(|&c| c == 0) {
                        continue;
                    }
                    for (j, bj) in b.chunks(s).enumerate() {
                        if bj.iter().all(|&c| c == 0) {
                            continue;
                        }
                        let t = self.mul_raw(k - 1, ai, bj);
                        add_into(p, &mut prod[(i + j) * s..(i + j + 1) * s], &t);
                    }
                }
                self.reduce_blocks(k, prod)
            }
        }
    }

    fn mul_level1(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let p = self.ctx().p();
        let pp = p as u128;
        let n = self.inner.base.len() - 1;
        let lazy = p < (1 << 40);
        let mut prod = vec![0u128; 2 * n - 1];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0 {
                continue;
            }
            for (j, &bj) in b.iter().enumerate() {
                let t = ai as u128 * bj as u128;
                prod[i + j] = if lazy { prod[i + j] + t } else { (prod[i + j] + t) % pp };
            }
        }
        let f = &self.inner.base;
        for i in (n..2 * n - 1).rev() {
            let c = (prod[i] % pp) as u64;
            if c == 0 {
                continue;
            }
            let c = (p - c) as u128;
            for j in 0..n {
                let t = c * f[j] as u128;
                let idx = i - n + j;
                prod[idx] = if lazy { prod[idx] + t } else { (prod[idx] + t) % pp };
            }
        }
        prod.truncate(n);
        prod.into_iter().map(|c| (c % pp) as u64).collect()
    }

    /// Reduces a block vector (any number of level `k - 1` blocks) mod `m_k`.
    fn reduce_blocks(&self, k: usize, mut prod: Vec<u64>) -> Vec<u64> {
        let p = self.ctx().p();
        let s = self.dim(k - 1);
        let d = self.degree(k);
        let nblocks = prod.len() / s;
        let m = &self.inner.moduli[k - 1];
        for i in (d..nblocks).rev() {
            let c = prod[i * s..(i + 1) * s].to_vec();
            if c.iter().all(|&x| x == 0) {
                continue;
            }
            for (j, mj) in m.coeffs[..d].iter().enumerate() {
                if mj.is_zero() {
                    continue;
                }
                let t = self.mul_raw(k - 1, &c, &mj.data);
                let idx = i - d + j;
                sub_into(p, &mut prod[idx * s..(idx + 1) * s], &t);
            }
        }
        prod.truncate(d * s);
        prod
    }

    // ---- inversion and witnesses ----

    /// Inverse of `a`, or the first zero divisor met while looking for it.
    pub fn invert(&self, a: &TowerElem) -> Result<Inverse, TowerError> {
        if a.is_zero() {
            return Err(TowerError::ZeroInput);
        }
        Ok(match self.try_inv(a) {
            Ok(inv) => Inverse::Unit(inv),
            Err(w) => Inverse::ZeroDivisor(w),
        })
    }

    /// Inverse of a nonzero element, failing with a witness.
    pub fn try_inv(&self, a: &TowerElem) -> Result<TowerElem, ZeroDivisorWitness> {
        let k = a.level;
        if k == 0 {
            return self
                .ctx()
                .inv(a.data[0])
                .map(|i| self.scalar(0, i))
                .ok_or(ZeroDivisorWitness { level: 0, element: a.clone() });
        }
        let ap = self.elem_to_poly(a);
        let (g, _, t) = self.ext_euclid(self.modulus(k), &ap)?;
        if g.deg() > 0 {
            return Err(ZeroDivisorWitness { level: k, element: a.clone() });
        }
        Ok(self.poly_to_elem(k, &t))
    }

    /// Extended Euclid over a tower level: `(g, s, t)` with `s*a + t*b = g`
    /// and `g` monic. Not both inputs may be zero.
    pub fn ext_euclid(
        &self,
        a: &TowerPoly,
        b: &TowerPoly,
    ) -> Result<(TowerPoly, TowerPoly, TowerPoly), ZeroDivisorWitness> {
        let lvl = a.level;
        let one = TowerPoly::new(lvl, vec![self.one(lvl)]);
        let (mut r0, mut r1) = (a.clone(), b.clone());
        let (mut s0, mut s1) = (one.clone(), TowerPoly::zero(lvl));
        let (mut t0, mut t1) = (TowerPoly::zero(lvl), one);
        while !r1.is_zero() {
            let (q, r) = self.poly_divrem(&r0, &r1)?;
            let s = self.poly_sub(&s0, &self.poly_mul(&q, &s1));
            let t = self.poly_sub(&t0, &self.poly_mul(&q, &t1));
            r0 = std::mem::replace(&mut r1, r);
            s0 = std::mem::replace(&mut s1, s);
            t0 = std::mem::replace(&mut t1, t);
        }
        let inv = self.try_inv(r0.lc().expect("not both zero"))?;
        Ok((self.poly_scale(&r0, &inv), self.poly_scale(&s0, &inv), self.poly_scale(&t0, &inv)))
    }

    /// Monic gcd by plain Euclid, failing on the first zero divisor.
    pub fn euclid_gcd(&self, a: &TowerPoly, b: &TowerPoly) -> Result<TowerPoly, ZeroDivisorWitness> {
        let (mut r0, mut r1) = (a.clone(), b.clone());
        while !r1.is_zero() {
            let r = self.poly_divrem(&r0, &r1)?.1;
            r0 = std::mem::replace(&mut r1, r);
        }
        self.poly_monic(&r0)
    }

    /// Walks a witness down the tower until some modulus splits.
    pub fn witness_to_base_factor(&self, wit: &ZeroDivisorWitness) -> Result<WitnessResolution, TowerError> {
        let k = wit.level;
        let invalid = TowerError::InvalidWitness { level: k };
        if k == 0 || wit.element.is_zero() {
            return Err(invalid);
        }
        if k == 1 {
            let f = self.base_modulus();
            let g = poly_gcd(&self.elem_to_fp(&wit.element), &f).map_err(|_| invalid.clone())?;
            return if g.deg() > 0 && g.deg() < f.deg() {
                Ok(WitnessResolution::BaseFactor(g))
            } else {
                Err(invalid)
            };
        }
        let m = self.modulus(k);
        match self.euclid_gcd(m, &self.elem_to_poly(&wit.element)) {
            Err(lower) => self.witness_to_base_factor(&lower),
            Ok(g) if g.deg() > 0 && g.deg() < m.deg() => {
                let (cofactor, r) = self.poly_divrem(m, &g).map_err(|_| invalid.clone())?;
                debug_assert!(r.is_zero());
                Ok(WitnessResolution::ModulusSplit(ModulusSplit { level: k, factor: g, cofactor }))
            }
            Ok(_) => Err(invalid),
        }
    }

    // ---- polynomials over a level ----

    pub fn poly_add(&self, a: &TowerPoly, b: &TowerPoly) -> TowerPoly {
        let lvl = a.level;
        let n = a.coeffs.len().max(b.coeffs.len());
        let z = self.zero(lvl);
        let coeffs = (0..n)
            .map(|i| self.add(a.coeffs.get(i).unwrap_or(&z), b.coeffs.get(i).unwrap_or(&z)))
            .collect();
        TowerPoly::new(lvl, coeffs)
    }

    pub fn poly_sub(&self, a: &TowerPoly, b: &TowerPoly) -> TowerPoly {
        let lvl = a.level;
        let n = a.coeffs.len().max(b.coeffs.len());
        let z = self.zero(lvl);
        let coeffs = (0..n)
            .map(|i| self.sub(a.coeffs.get(i).unwrap_or(&z), b.coeffs.get(i).unwrap_or(&z)))
            .collect();
        TowerPoly::new(lvl, coeffs)
    }

    pub fn poly_mul(&self, a: &TowerPoly, b: &TowerPoly) -> TowerPoly {
        let lvl = a.level;
        if a.is_zero() || b.is_zero() {
            return TowerPoly::zero(lvl);
        }
        let p = self.ctx().p();
        let mut out = vec![self.zero(lvl); a.coeffs.len() + b.coeffs.len() - 1];
        for (i, ai) in a.coeffs.iter().enumerate() {
            if ai.is_zero() {
                continue;
            }
            for (j, bj) in b.coeffs.iter().enumerate() {
                if bj.is_zero() {
                    continue;
                }
                let t = self.mul_raw(lvl, &ai.data, &bj.data);
                add_into(p, &mut out[i + j].data, &t);
            }
        }
        TowerPoly::new(lvl, out)
    }

    pub fn poly_scale(&self, a: &TowerPoly, c: &TowerElem) -> TowerPoly {
        TowerPoly::new(a.level, a.coeffs.iter().map(|x| self.mul(x, c)).collect())
    }

    pub fn poly_neg(&self, a: &TowerPoly) -> TowerPoly {
        TowerPoly::new(a.level, a.coeffs.iter().map(|x| self.neg(x)).collect())
    }

    pub fn poly_constant(&self, c: &TowerElem) -> TowerPoly {
        TowerPoly::new(c.level, vec![c.clone()])
    }

    /// `x - c` over the level of `c`.
    pub fn poly_linear(&self, c: &TowerElem) -> TowerPoly {
        TowerPoly::new(c.level, vec![self.neg(c), self.one(c.level)])
    }

    /// Division by a polynomial with invertible leading coefficient.
    pub fn poly_divrem(
        &self,
        a: &TowerPoly,
        b: &TowerPoly,
    ) -> Result<(TowerPoly, TowerPoly), ZeroDivisorWitness> {
        let lvl = a.level;
        let db = b.degree().expect("division by zero polynomial");
        let inv = self.try_inv(b.lc().unwrap())?;
        if a.coeffs.len() <= db {
            return Ok((TowerPoly::zero(lvl), a.clone()));
        }
        let p = self.ctx().p();
        let mut rem = a.coeffs.clone();
        let mut quot = vec![self.zero(lvl); rem.len() - db];
        for k in (db..rem.len()).rev() {
            if rem[k].is_zero() {
                continue;
            }
            let c = self.mul(&rem[k], &inv);
            for (j, bj) in b.coeffs.iter().enumerate() {
                if bj.is_zero() {
                    continue;
                }
                let t = self.mul_raw(lvl, &c.data, &bj.data);
                sub_into(p, &mut rem[k - db + j].data, &t);
            }
            quot[k - db] = c;
        }
        rem.truncate(db);
        Ok((TowerPoly::new(lvl, quot), TowerPoly::new(lvl, rem)))
    }

    pub fn poly_rem(&self, a: &TowerPoly, b: &TowerPoly) -> Result<TowerPoly, ZeroDivisorWitness> {
        Ok(self.poly_divrem(a, b)?.1)
    }

    /// `a^e mod m` by binary powering.
    pub fn poly_powmod(&self, a: &TowerPoly, e: u64, m: &TowerPoly) -> Result<TowerPoly, ZeroDivisorWitness> {
        let base = self.poly_rem(a, m)?;
        let one = self.poly_constant(&self.one(a.level));
        let mut acc = self.poly_rem(&one, m)?;
        if e == 0 {
            return Ok(acc);
        }
        for bit in (0..64 - e.leading_zeros()).rev() {
            acc = self.poly_rem(&self.poly_mul(&acc, &acc), m)?;
            if (e >> bit) & 1 == 1 {
                acc = self.poly_rem(&self.poly_mul(&acc, &base), m)?;
            }
        }
        Ok(acc)
    }

    pub fn poly_monic(&self, a: &TowerPoly) -> Result<TowerPoly, ZeroDivisorWitness> {
        match a.lc() {
            None => Ok(a.clone()),
            Some(lc) if self.is_one(lc) => Ok(a.clone()),
            Some(lc) => Ok(self.poly_scale(a, &self.try_inv(lc)?)),
        }
    }

    pub fn poly_derivative(&self, a: &TowerPoly) -> TowerPoly {
        let coeffs = a
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| self.scale(c, self.ctx().reduce(i as u64)))
            .collect();
        TowerPoly::new(a.level, coeffs)
    }

    pub fn poly_eval(&self, a: &TowerPoly, x: &TowerElem) -> TowerElem {
        a.coeffs
            .iter()
            .rev()
            .fold(self.zero(x.level), |acc, c| self.add(&self.mul(&acc, x), c))
    }

    /// Lifts a polynomial to a higher level coefficientwise.
    pub fn poly_embed(&self, a: &TowerPoly, level: usize) -> TowerPoly {
        TowerPoly::new(level, a.coeffs.iter().map(|c| self.embed(c, level)).collect())
    }

    // ---- gcd with dynamic splitting ----

    /// Gcd of two polynomials over the top level. Zero divisors met on the
    /// way split the ring by CRT; in [`GcdMode::Halt`] a split of the base
    /// modulus aborts with that factor instead.
    pub fn semisimple_gcd(&self, a: &TowerPoly, b: &TowerPoly, mode: GcdMode) -> Result<GcdOutcome, TowerError> {
        for x in [a, b] {
            if x.level != self.height() {
                return Err(TowerError::LevelMismatch { expected: self.height(), found: x.level });
            }
        }
        if a.is_zero() && b.is_zero() {
            return Err(TowerError::BothZero);
        }
        self.gcd_rec(a, b, mode)
    }

    fn gcd_rec(&self, a: &TowerPoly, b: &TowerPoly, mode: GcdMode) -> Result<GcdOutcome, TowerError> {
        if a.is_zero() && b.is_zero() {
            return Ok(GcdOutcome::Gcd { gcd: a.clone(), splits: Vec::new() });
        }
        let mut wit = match self.euclid_gcd(a, b) {
            Ok(gcd) => return Ok(GcdOutcome::Gcd { gcd, splits: Vec::new() }),
            Err(w) => w,
        };
        loop {
            let split = match self.witness_to_base_factor(&wit)? {
                WitnessResolution::BaseFactor(g) if mode == GcdMode::Halt => {
                    return Ok(GcdOutcome::Factor(g));
                }
                WitnessResolution::BaseFactor(g) => {
                    let f = self.base_modulus();
                    let cof = f.div_exact(&g).expect("factor of the base modulus");
                    ModulusSplit { level: 1, factor: self.poly_from_fp(&g), cofactor: self.poly_from_fp(&cof) }
                }
                WitnessResolution::ModulusSplit(s) => s,
            };
            match self.idempotents(&split) {
                Ok(Some((e1, e2))) => return self.gcd_split(a, b, mode, split, e1, e2),
                Ok(None) => return Err(TowerError::NotCoprime { level: split.level }),
                Err(lower) => wit = lower,
            }
        }
    }

    fn gcd_split(
        &self,
        a: &TowerPoly,
        b: &TowerPoly,
        mode: GcdMode,
        split: ModulusSplit,
        e1: TowerElem,
        e2: TowerElem,
    ) -> Result<GcdOutcome, TowerError> {
        let top = self.height();
        let mut gcd = TowerPoly::zero(top);
        let mut splits = vec![split.clone()];
        for (part, e) in [(&split.factor, e1), (&split.cofactor, e2)] {
            let comp = self.component(split.level, part);
            let pa = self.project_poly(split.level, part, a);
            let pb = self.project_poly(split.level, part, b);
            match comp.gcd_rec(&pa, &pb, mode)? {
                GcdOutcome::Factor(g) => return Ok(GcdOutcome::Factor(g)),
                GcdOutcome::Gcd { gcd: g, splits: s } => {
                    let lifted = self.lift_poly(&comp, split.level, &g);
                    let e = self.embed(&e, top);
                    gcd = self.poly_add(&gcd, &self.poly_scale(&lifted, &e));
                    splits.extend(s);
                }
            }
        }
        Ok(GcdOutcome::Gcd { gcd, splits })
    }

    /// CRT idempotents `(e1, e2)` at the split level: `e1 = 1 mod factor`,
    /// `e1 = 0 mod cofactor`, `e2 = 1 - e1`. `None` if the parts share a factor.
    pub fn idempotents(
        &self,
        split: &ModulusSplit,
    ) -> Result<Option<(TowerElem, TowerElem)>, ZeroDivisorWitness> {
        let (g, _, t) = self.ext_euclid(&split.factor, &split.cofactor)?;
        if g.deg() > 0 {
            return Ok(None);
        }
        let e1 = self.poly_to_elem(split.level, &self.poly_mul(&t, &split.cofactor));
        let e2 = self.sub(&self.one(split.level), &e1);
        Ok(Some((e1, e2)))
    }

    /// The tower with the level-`level` modulus replaced by `part` (a monic
    /// divisor of it) and every higher modulus projected accordingly.
    pub fn component(&self, level: usize, part: &TowerPoly) -> Tower {
        let mut moduli = self.inner.moduli.clone();
        moduli[level - 1] = part.clone();
        for k in level + 1..=self.height() {
            moduli[k - 1] = self.project_poly(level, part, &self.inner.moduli[k - 1]);
        }
        self.rebuild(moduli)
    }

    /// Image of an element in [`Tower::component`]`(level, part)`.
    pub fn project(&self, level: usize, part: &TowerPoly, a: &TowerElem) -> TowerElem {
        let k = a.level;
        if k < level {
            return a.clone();
        }
        if k == level {
            let r = self.poly_divrem(&self.elem_to_poly(a), part).expect("monic part").1;
            let s = self.dim(k - 1);
            let mut data: Vec<u64> = r.coeffs.iter().flat_map(|c| c.data.iter().copied()).collect();
            data.resize(part.deg() * s, 0);
            return TowerElem { level: k, data };
        }
        let s = self.dim(k - 1);
        let data = a
            .data
            .chunks(s)
            .flat_map(|c| self.project(level, part, &TowerElem { level: k - 1, data: c.to_vec() }).data)
            .collect();
        TowerElem { level: k, data }
    }

    pub fn project_poly(&self, level: usize, part: &TowerPoly, a: &TowerPoly) -> TowerPoly {
        TowerPoly::new(a.level, a.coeffs.iter().map(|c| self.project(level, part, c)).collect())
    }

    /// Lifts an element of the component `comp` (split at `level`) back by
    /// reading its reduced representatives as elements of `self`.
    pub fn lift(&self, comp: &Tower, level: usize, a: &TowerElem) -> TowerElem {
        let k = a.level;
        if k < level {
            return a.clone();
        }
        if k == level {
            let mut data = a.data.clone();
            data.resize(self.dim(k), 0);
            return TowerElem { level: k, data };
        }
        let s = comp.dim(k - 1);
        let data = a
            .data
            .chunks(s)
            .flat_map(|c| self.lift(comp, level, &TowerElem { level: k - 1, data: c.to_vec() }).data)
            .collect();
        TowerElem { level: k, data }
    }

    pub fn lift_poly(&self, comp: &Tower, level: usize, a: &TowerPoly) -> TowerPoly {
        TowerPoly::new(a.level, a.coeffs.iter().map(|c| self.lift(comp, level, c)).collect())
    }

    // ---- characteristic polynomials ----

    /// Characteristic polynomial of multiplication by `a` on its level,
    /// viewed as a free module over `base_level`. Division-free (Berkowitz),
    /// so zero divisors in the base ring are harmless.
    pub fn charpoly_of_multiplication(&self, a: &TowerElem, base_level: usize) -> Result<TowerPoly, TowerError> {
        let top = a.level;
        if base_level > top {
            return Err(TowerError::LevelMismatch { expected: top, found: base_level });
        }
        let dim = self.dim(top);
        if dim > self.inner.ceiling {
            return Err(TowerError::DimensionCeilingExceeded { dim, ceiling: self.inner.ceiling });
        }
        let s = self.dim(base_level);
        let m = dim / s;
        // Column j holds the coordinates of a * e_j, e_j the j-th block basis vector.
        let mut cols: Vec<Vec<u64>> = Vec::with_capacity(m);
        for j in 0..m {
            let mut basis = vec![0u64; dim];
            basis[j * s] = 1;
            cols.push(self.mul_raw(top, &a.data, &basis));
        }
        let entry = |i: usize, j: usize| cols[j][i * s..(i + 1) * s].to_vec();
        let matrix: Vec<Vec<Vec<u64>>> = (0..m).map(|i| (0..m).map(|j| entry(i, j)).collect()).collect();
        let coeffs = if base_level == 0 {
            let scalars: Vec<Vec<u64>> = matrix.iter().map(|row| row.iter().map(|e| e[0]).collect()).collect();
            berkowitz_fp(self.ctx(), &scalars).into_iter().map(|c| self.scalar(0, c)).collect()
        } else {
            self.berkowitz(base_level, &matrix)
                .into_iter()
                .map(|data| TowerElem { level: base_level, data })
                .collect()
        };
        Ok(TowerPoly::new(base_level, coeffs))
    }

    /// Berkowitz over a tower level; returns low-first coefficients of
    /// `det(wI - A)`.
    fn berkowitz(&self, lvl: usize, a: &[Vec<Vec<u64>>]) -> Vec<Vec<u64>> {
        let p = self.ctx().p();
        let s = self.dim(lvl);
        let zero = vec![0u64; s];
        let mut one = zero.clone();
        one[0] = 1;
        let neg = |x: &[u64]| {
            let mut z = zero.clone();
            sub_into(p, &mut z, x);
            z
        };
        let mul = |x: &[u64], y: &[u64]| self.mul_raw(lvl, x, y);
        let is_zero = |x: &[u64]| x.iter().all(|&c| c == 0);
        // High-first coefficients of the charpoly of the leading k x k block.
        let mut c: Vec<Vec<u64>> = vec![one.clone(), neg(&a[0][0])];
        for k in 1..a.len() {
            // Toeplitz column: 1, -a_kk, -R C, -R A C, ..., -R A^(k-2) C
            let mut col = vec![one.clone(), neg(&a[k][k])];
            let mut v: Vec<Vec<u64>> = (0..k).map(|i| a[i][k].clone()).collect();
            for step in 0..k {
                let mut rv = zero.clone();
                for (j, vj) in v.iter().enumerate() {
                    if !is_zero(vj) && !is_zero(&a[k][j]) {
                        add_into(p, &mut rv, &mul(&a[k][j], vj));
                    }
                }
                col.push(neg(&rv));
                if step + 1 < k {
                    v = (0..k)
                        .map(|i| {
                            let mut acc = zero.clone();
                            for (j, vj) in v.iter().enumerate() {
                                if !is_zero(vj) && !is_zero(&a[i][j]) {
                                    add_into(p, &mut acc, &mul(&a[i][j], vj));
                                }
                            }
                            acc
                        })
                        .collect();
                }
            }
            let mut next = vec![zero.clone(); k + 2];
            for (i, ni) in next.iter_mut().enumerate() {
                for (j, cj) in c.iter().enumerate().take(i + 1) {
                    let t = &col[i - j];
                    if !is_zero(t) && !is_zero(cj) {
                        add_into(p, ni, &mul(t, cj));
                    }
                }
            }
            c = next;
        }
        c.reverse();
        c
    }
}

fn berkowitz_fp(ctx: FieldCtx, a: &[Vec<u64>]) -> Vec<u64> {
    let p = ctx.p();
    let neg = |x: u64| ctx.neg(x);
    let mut c = vec![1u64, neg(a[0][0])];
    for k in 1..a.len() {
        let mut col = vec![1u64, neg(a[k][k])];
        let mut v: Vec<u64> = (0..k).map(|i| a[i][k]).collect();
        let dot = |row: &[u64], v: &[u64]| {
            v.iter()
                .enumerate()
                .fold(0u128, |acc, (j, &x)| (acc + row[j] as u128 * x as u128) % p as u128) as u64
        };
        for step in 0..k {
            col.push(neg(dot(&a[k], &v)));
            if step + 1 < k {
                v = (0..k).map(|i| dot(&a[i], &v)).collect();
            }
        }
        let mut next = vec![0u64; k + 2];
        for (i, ni) in next.iter_mut().enumerate() {
            for (j, &cj) in c.iter().enumerate().take(i + 1) {
                *ni = ctx.add(*ni, ctx.mul(col[i - j], cj));
            }
        }
        c = next;
    }
    c.reverse();
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k13() -> FieldCtx {
        FieldCtx::new(13).unwrap()
    }

    fn r13() -> Tower {
        let k = k13();
        Tower::over_fp(&FpPoly::from_i64(k, &[-1, 0, 0, 1]), DEFAULT_DIMENSION_CEILING).unwrap()
    }

    fn elem(t: &Tower, c: &[i64]) -> TowerElem {
        t.elem_from_fp(&FpPoly::from_i64(t.ctx(), c))
    }

    /// `y - c` over level 1.
    fn ylin(t: &Tower, c: &TowerElem) -> TowerPoly {
        t.poly_linear(c)
    }

    #[test]
    fn invert_examples() {
        let t = r13();
        assert_eq!(t.invert(&elem(&t, &[2])).unwrap(), Inverse::Unit(elem(&t, &[7])));
        assert_eq!(t.invert(&elem(&t, &[0, 1])).unwrap(), Inverse::Unit(elem(&t, &[0, 0, 1])));
        let w = elem(&t, &[-1, 1]);
        assert_eq!(
            t.invert(&w).unwrap(),
            Inverse::ZeroDivisor(ZeroDivisorWitness { level: 1, element: w })
        );
        assert_eq!(t.invert(&t.zero(1)), Err(TowerError::ZeroInput));
    }

    #[test]
    fn witness_examples() {
        let t = r13();
        let k = k13();
        let w = ZeroDivisorWitness { level: 1, element: elem(&t, &[-1, 1]) };
        assert_eq!(
            t.witness_to_base_factor(&w).unwrap(),
            WitnessResolution::BaseFactor(FpPoly::from_i64(k, &[-1, 1]))
        );

        let x = elem(&t, &[0, 1]);
        let x2 = elem(&t, &[0, 0, 1]);
        let g = t.poly_mul(&ylin(&t, &x), &ylin(&t, &x2));
        let t2 = t.extend(g).unwrap();
        let y = t2.var(2);
        let w = ZeroDivisorWitness { level: 2, element: t2.sub(&y, &t2.embed(&x, 2)) };
        assert_eq!(
            t2.witness_to_base_factor(&w).unwrap(),
            WitnessResolution::ModulusSplit(ModulusSplit {
                level: 2,
                factor: ylin(&t, &x),
                cofactor: ylin(&t, &x2),
            })
        );

        let bad = ZeroDivisorWitness { level: 1, element: elem(&t, &[0, 1]) };
        assert_eq!(t.witness_to_base_factor(&bad), Err(TowerError::InvalidWitness { level: 1 }));
    }

    #[test]
    fn gcd_examples() {
        let t = r13();
        let k = k13();
        let x = elem(&t, &[0, 1]);
        let one = t.one(1);
        let a = ylin(&t, &x);
        let out = t.semisimple_gcd(&a, &a, GcdMode::Halt).unwrap();
        assert_eq!(out, GcdOutcome::Gcd { gcd: a.clone(), splits: vec![] });

        let prod = t.poly_mul(&ylin(&t, &one), &a);
        let out = t.semisimple_gcd(&prod, &ylin(&t, &one), GcdMode::Halt).unwrap();
        assert_eq!(out, GcdOutcome::Gcd { gcd: ylin(&t, &one), splits: vec![] });

        let out = t.semisimple_gcd(&a, &ylin(&t, &one), GcdMode::Halt).unwrap();
        assert_eq!(out, GcdOutcome::Factor(FpPoly::from_i64(k, &[-1, 1])));

        assert_eq!(
            t.semisimple_gcd(&TowerPoly::zero(1), &TowerPoly::zero(1), GcdMode::Halt),
            Err(TowerError::BothZero)
        );
    }

    #[test]
    fn split_gcd_recombines() {
        // gcd(y - x, y - 1) is 1 where x != 1 and y - 1 where x = 1.
        let t = r13();
        let x = elem(&t, &[0, 1]);
        let one = t.one(1);
        let GcdOutcome::Gcd { gcd, splits } =
            t.semisimple_gcd(&ylin(&t, &x), &ylin(&t, &one), GcdMode::Split).unwrap()
        else {
            panic!("split mode never halts");
        };
        assert!(!splits.is_empty());
        for root in [1u64, 3, 9] {
            let coeffs: Vec<u64> =
                gcd.coeffs().iter().map(|c| t.elem_to_fp(c).eval(root)).collect();
            let at = FpPoly::new(k13(), coeffs);
            if root == 1 {
                assert_eq!(at, FpPoly::from_i64(k13(), &[-1, 1]));
            } else {
                assert!(at.is_one());
            }
        }
    }

    #[test]
    fn charpoly_examples() {
        let t = r13();
        let k = k13();
        let f = FpPoly::from_i64(k, &[-1, 0, 0, 1]);
        let cp = t.charpoly_of_multiplication(&elem(&t, &[0, 1]), 0).unwrap();
        assert_eq!(t.poly_to_fp(&cp), f);
        let cp = t.charpoly_of_multiplication(&elem(&t, &[1, 1]), 0).unwrap();
        assert_eq!(t.poly_to_fp(&cp), FpPoly::from_i64(k, &[11, 3, 10, 1]));
        let cp = t.charpoly_of_multiplication(&elem(&t, &[5]), 0).unwrap();
        assert_eq!(t.poly_to_fp(&cp), FpPoly::from_roots(k, &[5, 5, 5]));
    }

    #[test]
    fn charpoly_over_level_one() {
        // Over R, y on R[y]/((y - x)(y - x^2)) has charpoly (w - x)(w - x^2).
        let t = r13();
        let x = elem(&t, &[0, 1]);
        let x2 = elem(&t, &[0, 0, 1]);
        let g = t.poly_mul(&ylin(&t, &x), &ylin(&t, &x2));
        let t2 = t.extend(g.clone()).unwrap();
        assert_eq!(t2.charpoly_of_multiplication(&t2.var(2), 1).unwrap(), g);
        let c = t2.embed(&x, 2);
        let cp = t2.charpoly_of_multiplication(&c, 1).unwrap();
        assert_eq!(cp, t.poly_mul(&ylin(&t, &x), &ylin(&t, &x)));
    }

    #[test]
    fn ceiling_is_enforced() {
        let k = k13();
        let f = FpPoly::from_roots(k, &[1, 2, 3, 4]);
        let t = Tower::over_fp(&f, 8).unwrap();
        let g = TowerPoly::new(1, vec![t.zero(1), t.zero(1), t.zero(1), t.one(1)]);
        assert_eq!(t.extend(g).unwrap_err(), TowerError::DimensionCeilingExceeded { dim: 12, ceiling: 8 });
    }

    fn roots_strategy() -> impl Strategy<Value = Vec<u64>> {
        proptest::collection::btree_set(0u64..31, 2..7).prop_map(|s| s.into_iter().collect())
    }

    proptest! {
        #[test]
        fn inverse_times_element_is_one(roots in roots_strategy(), c in proptest::collection::vec(0u64..31, 1..6)) {
            let k = FieldCtx::new(31).unwrap();
            let t = Tower::over_fp(&FpPoly::from_roots(k, &roots), 256).unwrap();
            let a = t.elem_from_fp(&FpPoly::new(k, c));
            prop_assume!(!a.is_zero());
            match t.invert(&a).unwrap() {
                Inverse::Unit(inv) => prop_assert!(t.is_one(&t.mul(&a, &inv))),
                Inverse::ZeroDivisor(w) => {
                    let res = t.witness_to_base_factor(&w).unwrap();
                    let WitnessResolution::BaseFactor(g) = res else { panic!() };
                    prop_assert!(g.divides(&t.base_modulus()));
                }
            }
        }

        #[test]
        fn charpoly_of_generator_is_modulus(roots in roots_strategy()) {
            let k = FieldCtx::new(31).unwrap();
            let f = FpPoly::from_roots(k, &roots);
            let t = Tower::over_fp(&f, 256).unwrap();
            prop_assert_eq!(t.poly_to_fp(&t.charpoly_of_multiplication(&t.var(1), 0).unwrap()), f);
        }

        #[test]
        fn projection_is_a_ring_map(roots in roots_strategy(), a in proptest::collection::vec(0u64..31, 1..6), b in proptest::collection::vec(0u64..31, 1..6)) {
            let k = FieldCtx::new(31).unwrap();
            let f = FpPoly::from_roots(k, &roots);
            let t = Tower::over_fp(&f, 256).unwrap();
            let part = t.poly_from_fp(&FpPoly::from_roots(k, &roots[..1]));
            let comp = t.component(1, &part);
            let (a, b) = (t.elem_from_fp(&FpPoly::new(k, a)), t.elem_from_fp(&FpPoly::new(k, b)));
            let lhs = t.project(1, &part, &t.mul(&a, &b));
            let rhs = comp.mul(&t.project(1, &part, &a), &t.project(1, &part, &b));
            prop_assert_eq!(&lhs, &rhs);
            let back = t.project(1, &part, &t.lift(&comp, 1, &rhs));
            prop_assert_eq!(back, t.project(1, &part, &t.mul(&a, &b)));
        }
    }
}

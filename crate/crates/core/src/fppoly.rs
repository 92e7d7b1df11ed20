//! Dense univariate polynomials over `F_p`.
//!
//! Besides the usual Euclidean machinery this module carries the pieces of
//! the pipeline that live entirely over the prime field: input
//! normalisation, squarefree decomposition, the companion-matrix
//! characteristic polynomials `f_q` and resultants, lifting factors of `f_q`
//! back to `f`, and the brute-force root oracle.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ffield::FieldCtx;
use crate::tower::{Tower, TowerError};

/// Default bound on `p` for the exhaustive root oracle.
pub const DEFAULT_ORACLE_BOUND: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("gcd of two zero polynomials")]
    BothZero,
    #[error("polynomial of degree < 1 where a proper polynomial is required")]
    Degenerate,
    #[error("division by the zero polynomial")]
    DivisionByZero,
    #[error("multiplicity {0} is not below the characteristic")]
    MultiplicityOverflow(usize),
    #[error("p = {p} exceeds the oracle bound {bound}")]
    OracleBoundExceeded { p: u64, bound: u64 },
    #[error("lifted gcd is trivial; f_q is probably not squarefree")]
    TrivialResult,
    #[error("cannot parse polynomial `{0}`")]
    Parse(String),
    #[error(transparent)]
    Tower(#[from] TowerError),
}

/// Polynomial over `F_p`, coefficients low degree first, no trailing zeros.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FpPoly {
    coeffs: Vec<u64>,
    ctx: FieldCtx,
}

impl fmt::Debug for FpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FpPoly[{}](mod {})", self.to_text(), self.ctx.p())
    }
}

impl fmt::Display for FpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match (i, c) {
                (0, _) => write!(f, "{c}")?,
                (1, 1) => write!(f, "x")?,
                (1, _) => write!(f, "{c}x")?,
                (_, 1) => write!(f, "x^{i}")?,
                _ => write!(f, "{c}x^{i}")?,
            }
        }
        Ok(())
    }
}

impl FpPoly {
    pub fn new(ctx: FieldCtx, coeffs: Vec<u64>) -> Self {
        let mut coeffs: Vec<u64> = coeffs.into_iter().map(|c| ctx.reduce(c)).collect();
        trim(&mut coeffs);
        FpPoly { coeffs, ctx }
    }

    pub fn from_i64(ctx: FieldCtx, coeffs: &[i64]) -> Self {
        Self::new(ctx, coeffs.iter().map(|&c| ctx.from_i64(c)).collect())
    }

    pub fn zero(ctx: FieldCtx) -> Self {
        FpPoly { coeffs: Vec::new(), ctx }
    }

    pub fn one(ctx: FieldCtx) -> Self {
        Self::constant(ctx, 1)
    }

    pub fn constant(ctx: FieldCtx, c: u64) -> Self {
        Self::new(ctx, vec![c])
    }

    pub fn x(ctx: FieldCtx) -> Self {
        FpPoly { coeffs: vec![0, 1], ctx }
    }

    /// `x - a`.
    pub fn linear(ctx: FieldCtx, a: u64) -> Self {
        Self::new(ctx, vec![ctx.neg(ctx.reduce(a)), 1])
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(ctx: FieldCtx, roots: &[u64]) -> Self {
        roots
            .iter()
            .fold(Self::one(ctx), |acc, &a| acc.mul(&Self::linear(ctx, a)))
    }

    /// Parses the comma-separated, constant-first text format. Negative
    /// entries are reduced to canonical residues.
    pub fn parse(ctx: FieldCtx, text: &str) -> Result<Self, PolyError> {
        let coeffs = text
            .split(',')
            .map(|t| t.trim().parse::<i64>().map(|c| ctx.from_i64(c)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| PolyError::Parse(text.to_string()))?;
        Ok(Self::new(ctx, coeffs))
    }

    /// Inverse of [`FpPoly::parse`]; the zero polynomial prints as `0`.
    pub fn to_text(&self) -> String {
        if self.coeffs.is_empty() {
            return "0".to_string();
        }
        self.coeffs
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn ctx(&self) -> FieldCtx {
        self.ctx
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> u64 {
        self.coeffs.get(i).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs == [1]
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Degree with the zero polynomial mapped to 0.
    pub fn deg(&self) -> usize {
        self.degree().unwrap_or(0)
    }

    pub fn lc(&self) -> u64 {
        self.coeffs.last().copied().unwrap_or(0)
    }

    pub fn is_monic(&self) -> bool {
        self.lc() == 1
    }

    pub fn monic(&self) -> Self {
        match self.ctx.inv(self.lc()) {
            Some(inv) => self.scale(inv),
            None => self.clone(),
        }
    }

    pub fn scale(&self, c: u64) -> Self {
        let ctx = self.ctx;
        Self::new(ctx, self.coeffs.iter().map(|&a| ctx.mul(a, c)).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let ctx = self.ctx;
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|i| ctx.add(self.coeff(i), other.coeff(i))).collect();
        Self::new(ctx, coeffs)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let ctx = self.ctx;
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|i| ctx.sub(self.coeff(i), other.coeff(i))).collect();
        Self::new(ctx, coeffs)
    }

    pub fn neg(&self) -> Self {
        self.scale(self.ctx.p() - 1)
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero(self.ctx);
        }
        let ctx = self.ctx;
        let p = ctx.p() as u128;
        let mut out = vec![0u128; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] = (out[i + j] + a as u128 * b as u128) % p;
            }
        }
        Self::new(ctx, out.into_iter().map(|c| c as u64).collect())
    }

    pub fn divrem(&self, d: &Self) -> Result<(Self, Self), PolyError> {
        let ctx = self.ctx;
        let dd = d.degree().ok_or(PolyError::DivisionByZero)?;
        let inv = ctx.inv(d.lc()).expect("nonzero leading coefficient");
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return Ok((Self::zero(ctx), self.clone()));
        }
        let mut quot = vec![0u64; rem.len() - dd];
        for k in (dd..rem.len()).rev() {
            let c = ctx.mul(rem[k], inv);
            if c == 0 {
                continue;
            }
            quot[k - dd] = c;
            for (j, &dj) in d.coeffs.iter().enumerate() {
                let idx = k - dd + j;
                rem[idx] = ctx.sub(rem[idx], ctx.mul(c, dj));
            }
        }
        rem.truncate(dd);
        Ok((Self::new(ctx, quot), Self::new(ctx, rem)))
    }

    pub fn rem(&self, d: &Self) -> Result<Self, PolyError> {
        Ok(self.divrem(d)?.1)
    }

    /// Exact quotient; panics in debug builds if the division leaves a remainder.
    pub fn div_exact(&self, d: &Self) -> Result<Self, PolyError> {
        let (q, r) = self.divrem(d)?;
        debug_assert!(r.is_zero(), "inexact division {self:?} / {d:?}");
        Ok(q)
    }

    pub fn divides(&self, other: &Self) -> bool {
        matches!(other.rem(self), Ok(r) if r.is_zero())
    }

    pub fn derivative(&self) -> Self {
        let ctx = self.ctx;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| ctx.mul(c, ctx.reduce(i as u64)))
            .collect();
        Self::new(ctx, coeffs)
    }

    pub fn eval(&self, a: u64) -> u64 {
        let ctx = self.ctx;
        self.coeffs
            .iter()
            .rev()
            .fold(0, |acc, &c| ctx.add(ctx.mul(acc, a), c))
    }

    /// `self(inner)` reduced modulo `m`.
    pub fn compose_mod(&self, inner: &Self, m: &Self) -> Result<Self, PolyError> {
        let mut acc = Self::zero(self.ctx);
        for &c in self.coeffs.iter().rev() {
            acc = acc.mul(inner).add(&Self::constant(self.ctx, c)).rem(m)?;
        }
        Ok(acc)
    }

    /// `self^e mod m` by left-to-right binary powering.
    pub fn pow_mod(&self, e: u64, m: &Self) -> Result<Self, PolyError> {
        let base = self.rem(m)?;
        let mut acc = Self::one(self.ctx).rem(m)?;
        if e == 0 {
            return Ok(acc);
        }
        for bit in (0..64 - e.leading_zeros()).rev() {
            acc = acc.mul(&acc).rem(m)?;
            if (e >> bit) & 1 == 1 {
                acc = acc.mul(&base).rem(m)?;
            }
        }
        Ok(acc)
    }

    /// Extended Euclid: `(g, s, t)` with `s*a + t*b = g`, `g` monic.
    pub fn ext_gcd(&self, other: &Self) -> Result<(Self, Self, Self), PolyError> {
        if self.is_zero() && other.is_zero() {
            return Err(PolyError::BothZero);
        }
        let ctx = self.ctx;
        let (mut r0, mut r1) = (self.clone(), other.clone());
        let (mut s0, mut s1) = (Self::one(ctx), Self::zero(ctx));
        let (mut t0, mut t1) = (Self::zero(ctx), Self::one(ctx));
        while !r1.is_zero() {
            let (q, r) = r0.divrem(&r1)?;
            let s = s0.sub(&q.mul(&s1));
            let t = t0.sub(&q.mul(&t1));
            r0 = std::mem::replace(&mut r1, r);
            s0 = std::mem::replace(&mut s1, s);
            t0 = std::mem::replace(&mut t1, t);
        }
        let inv = ctx.inv(r0.lc()).expect("nonzero");
        Ok((r0.scale(inv), s0.scale(inv), t0.scale(inv)))
    }
}

fn trim(coeffs: &mut Vec<u64>) {
    while coeffs.last() == Some(&0) {
        coeffs.pop();
    }
}

/// Monic gcd by Euclid over `F_p`.
pub fn poly_gcd(a: &FpPoly, b: &FpPoly) -> Result<FpPoly, PolyError> {
    if a.is_zero() && b.is_zero() {
        return Err(PolyError::BothZero);
    }
    let (mut r0, mut r1) = (a.clone(), b.clone());
    while !r1.is_zero() {
        let r = r0.rem(&r1)?;
        r0 = std::mem::replace(&mut r1, r);
    }
    Ok(r0.monic())
}

/// What [`normalize_input`] removed from its input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizeReport {
    pub input_degree: usize,
    /// The input was scaled by the inverse of this leading coefficient.
    pub leading_coefficient: u64,
    /// Degree lost when passing to the squarefree part.
    pub repeated_degree: usize,
    /// Degree of the squarefree part with no roots in `F_p`.
    pub nonsplitting_degree: usize,
    pub output_degree: usize,
}

impl NormalizeReport {
    pub fn unchanged(&self) -> bool {
        self.leading_coefficient == 1 && self.input_degree == self.output_degree
    }
}

/// Product of the distinct monic irreducible factors of `g`.
///
/// Factors whose multiplicity is divisible by `p` disappear from
/// `g / gcd(g, g')` but survive in `gcd(g, g')`, hence the recursion.
pub fn radical(g: &FpPoly) -> Result<FpPoly, PolyError> {
    let g = g.monic();
    if g.deg() == 0 {
        return Ok(FpPoly::one(g.ctx()));
    }
    let d = g.derivative();
    if d.is_zero() {
        // g = h(x^p) = h(x)^p over F_p.
        let p = g.ctx().p() as usize;
        let h = FpPoly::new(g.ctx(), g.coeffs().iter().step_by(p).copied().collect());
        return radical(&h);
    }
    let c = poly_gcd(&g, &d)?;
    let part = g.div_exact(&c)?;
    let rest = radical(&c)?;
    let common = poly_gcd(&part, &rest)?;
    part.mul(&rest).div_exact(&common)
}

/// Monic, squarefree, completely splitting part of `g`.
///
/// That part is `gcd(x^p - x mod g, g)`, which is squarefree by itself; the
/// radical is only computed to fill in the report.
pub fn normalize_input(g: &FpPoly) -> Result<(FpPoly, NormalizeReport), PolyError> {
    let ctx = g.ctx();
    let n = g.degree().filter(|&d| d >= 1).ok_or(PolyError::Degenerate)?;
    let lc = g.lc();
    let monic = g.monic();
    let xp = FpPoly::x(ctx).pow_mod(ctx.p(), &monic)?;
    let f = poly_gcd(&xp.sub(&FpPoly::x(ctx)), &monic)?;
    let rad = radical(&monic)?;
    let report = NormalizeReport {
        input_degree: n,
        leading_coefficient: lc,
        repeated_degree: n - rad.deg(),
        nonsplitting_degree: rad.deg() - f.deg(),
        output_degree: f.deg(),
    };
    Ok((f, report))
}

/// Yun's squarefree decomposition `g = lc * prod h_l^l`, parts sorted by
/// multiplicity; fails loudly when a multiplicity reaches `p`.
pub fn squarefree_decompose(g: &FpPoly) -> Result<Vec<(FpPoly, usize)>, PolyError> {
    if g.degree().unwrap_or(0) < 1 {
        return Err(PolyError::Degenerate);
    }
    let p = g.ctx().p() as usize;
    let a = g.monic();
    let mut c = poly_gcd(&a, &a.derivative())?;
    let mut w = a.div_exact(&c)?;
    let mut parts = Vec::new();
    let mut i = 1usize;
    while w.deg() > 0 {
        let y = poly_gcd(&w, &c)?;
        let z = w.div_exact(&y)?;
        if z.deg() > 0 {
            if i >= p {
                return Err(PolyError::MultiplicityOverflow(i));
            }
            parts.push((z, i));
        }
        c = c.div_exact(&y)?;
        w = y;
        i += 1;
    }
    if c.deg() > 0 {
        return Err(PolyError::MultiplicityOverflow(p));
    }
    Ok(parts)
}

/// All roots of `f` in `F_p` by exhaustive Horner evaluation.
pub fn brute_force_roots(f: &FpPoly, bound: u64) -> Result<Vec<u64>, PolyError> {
    let p = f.ctx().p();
    if p > bound {
        return Err(PolyError::OracleBoundExceeded { p, bound });
    }
    if f.is_zero() {
        return Err(PolyError::Degenerate);
    }
    Ok((0..p).filter(|&a| f.eval(a) == 0).collect())
}

/// Characteristic polynomial of `h(C_f)`, i.e. `prod_i (z - h(xi_i))` over
/// the roots `xi_i` of `f`, via the division-free tower routine.
pub fn resultant_via_charpoly(h: &FpPoly, f: &FpPoly) -> Result<FpPoly, PolyError> {
    let ctx = f.ctx();
    if f.degree().unwrap_or(0) < 1 {
        return Err(PolyError::Degenerate);
    }
    let tower = Tower::over_fp(f, usize::MAX)?;
    let elem = tower.elem_from_fp(&h.rem(f)?);
    let cp = tower.charpoly_of_multiplication(&elem, 0)?;
    Ok(FpPoly::new(ctx, cp.coeffs().iter().map(|c| c.scalar()).collect()))
}

/// `f_q(x) = det(xI - q(C_f)) = prod_i (x - q(xi_i))`.
pub fn build_fq(f: &FpPoly, q: &FpPoly) -> Result<FpPoly, PolyError> {
    resultant_via_charpoly(q, f)
}

/// `gcd(g_q(q(x)) mod f, f)`: a factor of `f` whose roots are the preimages
/// under `q` of the roots of `g_q`.
pub fn lift_factor(g_q: &FpPoly, q: &FpPoly, f: &FpPoly) -> Result<FpPoly, PolyError> {
    let composed = g_q.compose_mod(&q.rem(f)?, f)?;
    let g = poly_gcd(&composed, f)?;
    if g.deg() == 0 {
        return Err(PolyError::TrivialResult);
    }
    Ok(g)
}

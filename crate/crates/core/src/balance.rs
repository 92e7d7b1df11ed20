//! Signature filtering and the initial coloring of root differences.
//!
//! For a root `xi` of `f`, the polynomial `g(y, x)` evaluated at `x = xi`
//! has the differences `xi - xi_j` (`j != i`) as its roots. Splitting `g`
//! over `R = F_p[x]/(f)` by the Sylow signature of those differences gives
//! the initial colors: color `u` joins `(i, j)` when `xi_i - xi_j` has
//! signature `u`. If the number of such `j` depends on `i`, some gcd on the
//! way meets a zero divisor and `f` factors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ffield::{FieldCtx, FieldError, SylowSignature};
use crate::fppoly::{poly_gcd, FpPoly, PolyError};
use crate::par;
use crate::tower::{GcdMode, GcdOutcome, Tower, TowerError, TowerPoly};
use crate::Engine;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BalanceError {
    #[error("polynomial degree {0} is too small for this stage")]
    Degenerate(usize),
    #[error("zero is a root; divide out x first")]
    ZeroRoot,
    #[error("internal invariant broken: {0}")]
    Internal(String),
    #[error("malformed color set: {0}")]
    Malformed(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Tower(#[from] TowerError),
}

/// One color: a monic polynomial in `y` over `R`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorPoly {
    pub id: usize,
    pub poly: TowerPoly,
    /// Present for colors produced by the signature split.
    pub signature: Option<SylowSignature>,
    pub transpose: usize,
    /// Common number of `y`-roots per root of `f`.
    pub degree: usize,
}

/// A transpose-closed set of colors over `R = F_p[x]/(f)`; id 0 is the
/// identity color `y`.
#[derive(Debug, Clone)]
pub struct ColorSet {
    pub(crate) f: FpPoly,
    pub(crate) tower: Tower,
    pub(crate) colors: Vec<ColorPoly>,
}

impl ColorSet {
    pub fn f(&self) -> &FpPoly {
        &self.f
    }

    pub fn ctx(&self) -> FieldCtx {
        self.f.ctx()
    }

    /// The ring `R` as a height-1 tower.
    pub fn tower(&self) -> &Tower {
        &self.tower
    }

    pub fn colors(&self) -> &[ColorPoly] {
        &self.colors
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&ColorPoly> {
        self.colors.iter().find(|c| c.id == id)
    }

    pub fn identity(&self) -> Option<&ColorPoly> {
        let y = identity_poly(&self.tower);
        self.colors.iter().find(|c| c.poly == y)
    }

    pub(crate) fn from_parts(f: FpPoly, tower: Tower, colors: Vec<ColorPoly>) -> Self {
        ColorSet { f, tower, colors }
    }

    /// Coefficients of one color: for each power of `y`, its residues in `x`.
    pub fn coefficient_tensor(&self, c: &ColorPoly) -> Vec<Vec<u64>> {
        c.poly.coeffs().iter().map(|e| e.data().to_vec()).collect()
    }

    pub fn to_json(&self) -> ColorSetJson {
        ColorSetJson {
            p: self.ctx().p(),
            modulus: self.f.coeffs().to_vec(),
            colors: self
                .colors
                .iter()
                .map(|c| ColorJson {
                    id: c.id,
                    signature: c.signature.as_ref().map(|s| s.bits().to_vec()),
                    transpose: c.transpose,
                    degree: c.degree,
                    coeffs: self.coefficient_tensor(c),
                })
                .collect(),
        }
    }

    /// Rebuilds a color set from its serialized form, checking the shape
    /// (not the semantics) of every color.
    pub fn from_json(j: &ColorSetJson, ceiling: usize) -> Result<Self, BalanceError> {
        let ctx = FieldCtx::new(j.p)?;
        let f = FpPoly::new(ctx, j.modulus.clone());
        if f.deg() < 2 || !f.is_monic() || f.coeffs() != j.modulus.as_slice() {
            return Err(BalanceError::Malformed("modulus must be monic of degree >= 2".into()));
        }
        let tower = Tower::over_fp(&f, ceiling)?;
        let n = f.deg();
        let mut colors = Vec::with_capacity(j.colors.len());
        for c in &j.colors {
            if c.coeffs.iter().any(|v| v.len() != n || v.iter().any(|&x| x >= j.p)) {
                return Err(BalanceError::Malformed(format!("color {} has bad coefficients", c.id)));
            }
            let coeffs = c
                .coeffs
                .iter()
                .map(|v| tower.elem_from_fp(&FpPoly::new(ctx, v.clone())))
                .collect();
            let poly = TowerPoly::new(1, coeffs);
            if poly.deg() != c.degree || poly.lc().is_none_or(|lc| !tower.is_one(lc)) {
                return Err(BalanceError::Malformed(format!("color {} is not monic of its degree", c.id)));
            }
            colors.push(ColorPoly {
                id: c.id,
                poly,
                signature: c.signature.clone().map(SylowSignature::from_bits),
                transpose: c.transpose,
                degree: c.degree,
            });
        }
        for c in &colors {
            let ok = colors.iter().any(|t| t.id == c.transpose && t.transpose == c.id);
            if !ok {
                return Err(BalanceError::Malformed(format!("color {} has no transpose partner", c.id)));
            }
        }
        Ok(ColorSet { f, tower, colors })
    }
}

/// Serialized color set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorSetJson {
    pub p: u64,
    pub modulus: Vec<u64>,
    pub colors: Vec<ColorJson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorJson {
    pub id: usize,
    pub signature: Option<Vec<u8>>,
    pub transpose: usize,
    pub degree: usize,
    pub coeffs: Vec<Vec<u64>>,
}

pub(crate) fn identity_poly(r: &Tower) -> TowerPoly {
    TowerPoly::new(1, vec![r.zero(1), r.one(1)])
}

/// `g(y, x) = (-1)^n f(X - y) / y`, monic of degree `n - 1` in `y`.
pub fn build_g(r: &Tower) -> Result<TowerPoly, BalanceError> {
    let f = r.base_modulus();
    let n = f.deg();
    if n < 2 {
        return Err(BalanceError::Degenerate(n));
    }
    let shift = TowerPoly::new(1, vec![r.var(1), r.neg(&r.one(1))]);
    let mut acc = TowerPoly::zero(1);
    for &c in f.coeffs().iter().rev() {
        acc = r.poly_add(&r.poly_mul(&acc, &shift), &r.poly_constant(&r.scalar(1, c)));
    }
    if acc.coeff(0).is_some_and(|c| !c.is_zero()) {
        return Err(BalanceError::Internal("f(X) is not zero in R".into()));
    }
    let sign = if n % 2 == 0 { 1 } else { f.ctx().p() - 1 };
    let coeffs = acc.coeffs()[1..].iter().map(|c| r.scale(c, sign)).collect();
    Ok(TowerPoly::new(1, coeffs))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterOutcome {
    Factor(FpPoly),
    AllRootsShareSignature(SylowSignature),
}

/// Separates the roots of `f` by their own Sylow signatures, bit by bit.
pub fn sylow_root_filter(f: &FpPoly) -> Result<FilterOutcome, BalanceError> {
    let ctx = f.ctx();
    let n = f.deg();
    if n < 1 {
        return Err(BalanceError::Degenerate(n));
    }
    if f.coeff(0) == 0 {
        return if n >= 2 { Ok(FilterOutcome::Factor(FpPoly::x(ctx))) } else { Err(BalanceError::ZeroRoot) };
    }
    let eta_inv = ctx.inv(ctx.eta()).expect("eta is a unit");
    let r = ctx.r();
    let a = FpPoly::x(ctx).pow_mod(ctx.w(), f)?;
    let mut m = f.monic();
    let mut u = 0u64;
    for k in 0..r {
        let shifted = a.scale(ctx.pow(eta_inv, u)).rem(&m)?;
        let b = shifted.pow_mod(1 << (r - 1 - k), &m)?;
        let zero_bit = poly_gcd(&b.sub(&FpPoly::one(ctx)), &m)?;
        if zero_bit.deg() > 0 && zero_bit.deg() < m.deg() {
            return Ok(FilterOutcome::Factor(zero_bit));
        }
        if zero_bit.deg() == 0 {
            u |= 1 << k;
        } else {
            m = zero_bit;
        }
    }
    Ok(FilterOutcome::AllRootsShareSignature(SylowSignature::from_value(u, r)))
}

#[derive(Debug, Clone)]
pub enum BalanceOutcome {
    Factor(FpPoly),
    Colors(ColorSet),
}

struct Node {
    m: TowerPoly,
    u: u64,
}

enum Step {
    Children(Vec<Node>),
    Factor(FpPoly),
}

/// Splits `g(y, x)` into signature classes of root differences.
///
/// Leaves are returned sorted by signature value with ids `1..`; the
/// identity color `y` gets id 0.
pub fn stronger_balance(f: &FpPoly, engine: &Engine) -> Result<BalanceOutcome, BalanceError> {
    let ctx = f.ctx();
    let r_tower = Tower::over_fp(f, engine.ceiling)?;
    let g = build_g(&r_tower)?;
    let r = ctx.r();
    let y = identity_poly(&r_tower);
    let a = match r_tower.poly_powmod(&y, ctx.w(), &g) {
        Ok(a) => a,
        Err(w) => return witness_factor(&r_tower, &w),
    };
    let eta_inv = ctx.inv(ctx.eta()).expect("eta is a unit");
    let mut frontier = vec![Node { m: g, u: 0 }];
    for k in 0..r {
        let steps = par::map(engine.mode, &frontier, |node| branch(&r_tower, &a, eta_inv, k, node));
        let mut next = Vec::new();
        for step in steps {
            match step? {
                Step::Factor(h) => return Ok(BalanceOutcome::Factor(h)),
                Step::Children(c) => next.extend(c),
            }
        }
        frontier = next;
    }
    frontier.sort_by_key(|node| node.u);

    let mut colors = vec![ColorPoly { id: 0, poly: y, signature: None, transpose: 0, degree: 1 }];
    for (i, node) in frontier.iter().enumerate() {
        colors.push(ColorPoly {
            id: i + 1,
            degree: node.m.deg(),
            poly: node.m.clone(),
            signature: Some(SylowSignature::from_value(node.u, r)),
            transpose: usize::MAX,
        });
    }
    for i in 1..colors.len() {
        let flipped = colors[i].signature.as_ref().unwrap().flip_top();
        let partner = colors
            .iter()
            .find(|c| c.signature.as_ref() == Some(&flipped))
            .ok_or_else(|| BalanceError::Internal(format!("signature {} has no transpose", flipped.value())))?;
        colors[i].transpose = partner.id;
    }
    Ok(BalanceOutcome::Colors(ColorSet { f: f.clone(), tower: r_tower, colors }))
}

fn witness_factor(r: &Tower, w: &crate::tower::ZeroDivisorWitness) -> Result<BalanceOutcome, BalanceError> {
    match r.witness_to_base_factor(w)? {
        crate::tower::WitnessResolution::BaseFactor(h) => Ok(BalanceOutcome::Factor(h)),
        crate::tower::WitnessResolution::ModulusSplit(_) => {
            Err(BalanceError::Internal("split above the base in a height-1 tower".into()))
        }
    }
}

fn branch(r: &Tower, a: &TowerPoly, eta_inv: u64, k: u32, node: &Node) -> Result<Step, BalanceError> {
    let ctx = r.ctx();
    let bits = ctx.r();
    let shift = r.scalar(1, ctx.pow(eta_inv, node.u));
    let step = || -> Result<Result<Vec<Node>, FpPoly>, TowerError> {
        let reduced = match r.poly_rem(&r.poly_scale(a, &shift), &node.m) {
            Ok(x) => x,
            Err(w) => return Ok(Err(base_factor(r, &w)?)),
        };
        let b = match r.poly_powmod(&reduced, 1 << (bits - 1 - k), &node.m) {
            Ok(x) => x,
            Err(w) => return Ok(Err(base_factor(r, &w)?)),
        };
        let one = r.poly_constant(&r.one(1));
        let mut children = Vec::new();
        for (bit, target) in [(0u64, r.poly_sub(&b, &one)), (1, r.poly_add(&b, &one))] {
            match r.semisimple_gcd(&target, &node.m, GcdMode::Halt)? {
                GcdOutcome::Factor(h) => return Ok(Err(h)),
                GcdOutcome::Gcd { gcd, .. } if gcd.deg() > 0 => {
                    children.push(Node { m: gcd, u: node.u | (bit << k) });
                }
                GcdOutcome::Gcd { .. } => {}
            }
        }
        Ok(Ok(children))
    };
    let children = match step()? {
        Ok(c) => c,
        Err(h) => return Ok(Step::Factor(h)),
    };
    let total: usize = children.iter().map(|c| c.m.deg()).sum();
    if total != node.m.deg() {
        return Err(BalanceError::Internal(format!(
            "branch degrees {total} do not add up to {}",
            node.m.deg()
        )));
    }
    Ok(Step::Children(children))
}

fn base_factor(r: &Tower, w: &crate::tower::ZeroDivisorWitness) -> Result<FpPoly, TowerError> {
    match r.witness_to_base_factor(w)? {
        crate::tower::WitnessResolution::BaseFactor(h) => Ok(h),
        crate::tower::WitnessResolution::ModulusSplit(s) => Err(TowerError::InvalidWitness { level: s.level }),
    }
}

//! Two-dimensional Weisfeiler-Leman refinement.
//!
//! [`wl2_explicit`] works on 0/1 matrices and serves as the reference. The
//! implicit engine [`wl2_implicit`] runs the same refinement on color
//! polynomials over `R = F_p[x]/(f)`: the product of two colors is the
//! characteristic polynomial of a sum of roots in a tower, its squarefree
//! parts are the value classes of the matrix product, and gcds intersect
//! them with the current colors.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::{identity_poly, BalanceError, ColorPoly, ColorSet};
use crate::fppoly::FpPoly;
use crate::par;
use crate::tower::{GcdMode, GcdOutcome, Tower, TowerError, TowerPoly};
use crate::Engine;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WlError {
    #[error("malformed coloring: {0}")]
    MalformedInput(String),
    #[error("internal invariant broken: {0}")]
    InternalInvariantBroken(String),
    #[error("multiplicity {0} is not below the characteristic")]
    MultiplicityOverflow(usize),
    #[error(transparent)]
    Tower(#[from] TowerError),
    #[error(transparent)]
    Balance(#[from] BalanceError),
}

pub type Matrix = Vec<Vec<u8>>;

/// A coloring of `[n] x [n]` given as 0/1 matrices, one per color.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplicitColoring {
    pub n: usize,
    pub colors: Vec<Matrix>,
}

impl ExplicitColoring {
    /// Builds a coloring from a label matrix; colors are ordered by label.
    pub fn from_labels(labels: &[Vec<usize>]) -> Self {
        let n = labels.len();
        let mut ids: Vec<usize> = labels.iter().flatten().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        let colors = ids
            .iter()
            .map(|&c| {
                labels
                    .iter()
                    .map(|row| row.iter().map(|&l| u8::from(l == c)).collect())
                    .collect()
            })
            .collect();
        ExplicitColoring { n, colors }
    }

    /// `labels[i][j]` is the index of the color containing `(i, j)`.
    pub fn labels(&self) -> Vec<Vec<usize>> {
        let mut labels = vec![vec![usize::MAX; self.n]; self.n];
        for (c, m) in self.colors.iter().enumerate() {
            for (i, row) in m.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if v == 1 {
                        labels[i][j] = c;
                    }
                }
            }
        }
        labels
    }

    /// Checks the shape, the partition property, that the diagonal is a
    /// union of colors and that the set is closed under transposition.
    pub fn validate(&self) -> Result<(), WlError> {
        let n = self.n;
        let bad = |s: String| Err(WlError::MalformedInput(s));
        if n == 0 || self.colors.is_empty() {
            return bad("empty coloring".into());
        }
        let mut cover = vec![vec![0u32; n]; n];
        for (c, m) in self.colors.iter().enumerate() {
            if m.len() != n || m.iter().any(|r| r.len() != n) {
                return bad(format!("color {c} is not {n} x {n}"));
            }
            if m.iter().flatten().any(|&v| v > 1) {
                return bad(format!("color {c} is not a 0/1 matrix"));
            }
            if m.iter().flatten().all(|&v| v == 0) {
                return bad(format!("color {c} is empty"));
            }
            let diag = (0..n).filter(|&i| m[i][i] == 1).count();
            let total: usize = m.iter().flatten().map(|&v| v as usize).sum();
            if diag != 0 && diag != total {
                return bad(format!("color {c} mixes diagonal and off-diagonal pairs"));
            }
            for (i, row) in m.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    cover[i][j] += v as u32;
                }
            }
        }
        if cover.iter().flatten().any(|&v| v != 1) {
            return bad("colors do not partition all pairs".into());
        }
        for (c, m) in self.colors.iter().enumerate() {
            let t = transpose(m);
            if !self.colors.contains(&t) {
                return bad(format!("transpose of color {c} is not a color"));
            }
        }
        Ok(())
    }

    /// Off-diagonal pairs grouped by color, as a canonical set of sets.
    pub fn off_diagonal_partition(&self) -> Vec<Vec<(usize, usize)>> {
        partition_of(&self.labels(), false)
    }

    /// All pairs grouped by color, as a canonical set of sets.
    pub fn partition(&self) -> Vec<Vec<(usize, usize)>> {
        partition_of(&self.labels(), true)
    }
}

fn partition_of(labels: &[Vec<usize>], diagonal: bool) -> Vec<Vec<(usize, usize)>> {
    let mut classes: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (i, row) in labels.iter().enumerate() {
        for (j, &l) in row.iter().enumerate() {
            if diagonal || i != j {
                classes.entry(l).or_default().push((i, j));
            }
        }
    }
    let mut out: Vec<_> = classes.into_values().collect();
    out.sort();
    out
}

pub fn transpose(m: &Matrix) -> Matrix {
    let n = m.len();
    (0..n).map(|i| (0..n).map(|j| m[j][i]).collect()).collect()
}

/// Integer matrix product.
pub fn mat_mul(a: &Matrix, b: &Matrix) -> Vec<Vec<u32>> {
    let n = a.len();
    let mut out = vec![vec![0u32; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == 0 {
                continue;
            }
            for j in 0..n {
                out[i][j] += b[k][j] as u32;
            }
        }
    }
    out
}

/// Refines the coloring until every product of colors is constant on
/// colors. New colors are numbered by (old color, product profile).
pub fn wl2_explicit(initial: &ExplicitColoring) -> Result<ExplicitColoring, WlError> {
    initial.validate()?;
    let n = initial.n;
    let mut labels = initial.labels();
    let mut count = initial.colors.len();
    loop {
        let mut sigs: Vec<Vec<(usize, Vec<(usize, usize)>)>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                let mut profile: Vec<(usize, usize)> = (0..n).map(|k| (labels[i][k], labels[k][j])).collect();
                profile.sort_unstable();
                row.push((labels[i][j], profile));
            }
            sigs.push(row);
        }
        let mut keys: Vec<&(usize, Vec<(usize, usize)>)> = sigs.iter().flatten().collect();
        keys.sort();
        keys.dedup();
        let index: HashMap<&(usize, Vec<(usize, usize)>), usize> =
            keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let next: Vec<Vec<usize>> = sigs.iter().map(|row| row.iter().map(|s| index[s]).collect()).collect();
        let new_count = keys.len();
        labels = next;
        if new_count == count {
            return Ok(ExplicitColoring::from_labels(&labels));
        }
        count = new_count;
    }
}

/// Product of two colors: a monic polynomial in `y` over `R` whose roots at
/// `x = xi_i` are `xi_i - xi_k`, each with multiplicity `(A_l A_t)(i, k)`.
///
/// Realized over `R' = F_p[y']/(f)` (with `y'` playing the role of `x`):
/// `T' = R'[x]/(g_l(y' - x, y'))` holds the middle root `xi_j`,
/// `U = T'[w]/(g_t(w, x))` holds the second difference, and the result is
/// the characteristic polynomial of `(y' - x) + w` over `R'`.
pub fn color_product(l: &ColorPoly, t: &ColorPoly, state: &ColorSet) -> Result<TowerPoly, WlError> {
    let r = state.tower();
    let y = identity_poly(r);
    if l.poly == y {
        return Ok(t.poly.clone());
    }
    if t.poly == y {
        return Ok(l.poly.clone());
    }
    let n = state.f().deg();
    let dim = n * l.degree * t.degree;
    if dim > r.ceiling() {
        return Err(TowerError::DimensionCeilingExceeded { dim, ceiling: r.ceiling() }.into());
    }
    // G(x) = (-1)^{d_l} g_l(y' - x, y') by Horner in x over R'.
    let shift = TowerPoly::new(1, vec![r.var(1), r.neg(&r.one(1))]);
    let mut g_big = TowerPoly::zero(1);
    for c in l.poly.coeffs().iter().rev() {
        g_big = r.poly_add(&r.poly_mul(&g_big, &shift), &r.poly_constant(c));
    }
    if l.degree % 2 == 1 {
        g_big = r.poly_neg(&g_big);
    }
    let t_prime = r.extend(g_big)?;
    // g_t(w, x) with its coefficients read as polynomials in the level-2 variable.
    let h: Vec<_> = t
        .poly
        .coeffs()
        .iter()
        .map(|c| {
            let lifted: Vec<_> = c.data().iter().map(|&v| t_prime.scalar(1, v)).collect();
            t_prime.from_coeffs(2, &lifted)
        })
        .collect();
    let u = t_prime.extend(TowerPoly::new(2, h))?;
    let ypx = u.sub(&u.embed(&u.var(1), 3), &u.embed(&u.var(2), 3));
    let z = u.add(&ypx, &u.var(3));
    Ok(u.charpoly_of_multiplication(&z, 1)?)
}

/// Statistics of one refinement round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    pub colors: usize,
    pub transpose_closed: bool,
}

/// A color set closed under products, with the decomposition of every
/// product: `(l, t) -> [(color id, multiplicity)]`.
#[derive(Debug, Clone)]
pub struct StableColorSet {
    pub colors: ColorSet,
    pub product_table: BTreeMap<(usize, usize), Vec<(usize, usize)>>,
    pub rounds: Vec<RoundStats>,
}

#[derive(Debug, Clone)]
pub enum WlOutcome {
    Factor(FpPoly),
    Stable(StableColorSet),
}

/// Outcome of a halt-mode computation over `R`.
enum Halt<T> {
    Done(T),
    Factor(FpPoly),
}

macro_rules! halt {
    ($e:expr) => {
        match $e {
            Halt::Done(v) => v,
            Halt::Factor(h) => return Ok(Halt::Factor(h)),
        }
    };
}

fn gcd_halt(r: &Tower, a: &TowerPoly, b: &TowerPoly) -> Result<Halt<TowerPoly>, WlError> {
    Ok(match r.semisimple_gcd(a, b, GcdMode::Halt)? {
        GcdOutcome::Gcd { gcd, .. } => Halt::Done(gcd),
        GcdOutcome::Factor(h) => Halt::Factor(h),
    })
}

fn exact_div(r: &Tower, a: &TowerPoly, b: &TowerPoly) -> Result<TowerPoly, WlError> {
    let (q, rem) = r
        .poly_divrem(a, b)
        .map_err(|_| WlError::InternalInvariantBroken("division by a non-monic color".into()))?;
    if !rem.is_zero() {
        return Err(WlError::InternalInvariantBroken("inexact division of colors".into()));
    }
    Ok(q)
}

/// Yun's squarefree decomposition over `R`; a zero divisor halts with a factor.
fn squarefree_over_r(r: &Tower, a: &TowerPoly) -> Result<Halt<Vec<(TowerPoly, usize)>>, WlError> {
    let p = r.ctx().p() as usize;
    let mut c = halt!(gcd_halt(r, a, &r.poly_derivative(a))?);
    let mut w = exact_div(r, a, &c)?;
    let mut parts = Vec::new();
    let mut i = 1;
    while w.deg() > 0 {
        let yv = halt!(gcd_halt(r, &w, &c)?);
        let z = exact_div(r, &w, &yv)?;
        if z.deg() > 0 {
            if i >= p {
                return Err(WlError::MultiplicityOverflow(i));
            }
            parts.push((z, i));
        }
        c = exact_div(r, &c, &yv)?;
        w = yv;
        i += 1;
    }
    if c.deg() > 0 {
        return Err(WlError::MultiplicityOverflow(p));
    }
    Ok(Halt::Done(parts))
}

/// Transpose of a color: `gcd(f(X - y), c(-y, X - y))` over `R`.
fn transpose_poly(r: &Tower, c: &TowerPoly) -> Result<Halt<TowerPoly>, WlError> {
    let shift = TowerPoly::new(1, vec![r.var(1), r.neg(&r.one(1))]);
    let subst = |coeffs: &[u64]| {
        let mut acc = TowerPoly::zero(1);
        for &v in coeffs.iter().rev() {
            acc = r.poly_add(&r.poly_mul(&acc, &shift), &r.poly_constant(&r.scalar(1, v)));
        }
        acc
    };
    let f_shift = subst(r.base_modulus().coeffs());
    let neg_y = TowerPoly::new(1, vec![r.zero(1), r.neg(&r.one(1))]);
    let mut total = TowerPoly::zero(1);
    let mut power = r.poly_constant(&r.one(1));
    for coeff in c.coeffs() {
        total = r.poly_add(&total, &r.poly_mul(&subst(coeff.data()), &power));
        power = r.poly_mul(&power, &neg_y);
    }
    gcd_halt(r, &f_shift, &total)
}

fn color_order(a: &ColorPoly, b: &ColorPoly) -> Ordering {
    let sig = |c: &ColorPoly| match &c.signature {
        Some(s) => (0, s.value()),
        None => (1, 0),
    };
    (a.degree, sig(a), a.id).cmp(&(b.degree, sig(b), b.id))
}

struct Refiner<'a> {
    r: &'a Tower,
    colors: Vec<ColorPoly>,
    next_id: usize,
}

impl Refiner<'_> {
    /// Splits every color by `h`; returns whether anything changed.
    fn refine_by(&mut self, h: &TowerPoly) -> Result<Halt<bool>, WlError> {
        let mut changed = false;
        let mut out = Vec::with_capacity(self.colors.len() + 1);
        for c in std::mem::take(&mut self.colors) {
            let g = match gcd_halt(self.r, &c.poly, h)? {
                Halt::Done(g) => g,
                Halt::Factor(h) => return Ok(Halt::Factor(h)),
            };
            if g.deg() == 0 || g.deg() == c.degree {
                out.push(c);
                continue;
            }
            let rest = exact_div(self.r, &c.poly, &g)?;
            changed = true;
            for part in [g, rest] {
                out.push(ColorPoly { id: self.next_id, degree: part.deg(), poly: part, signature: None, transpose: usize::MAX });
                self.next_id += 1;
            }
        }
        self.colors = out;
        Ok(Halt::Done(changed))
    }

    /// Pairs every color with its transpose, refining until that is possible.
    fn close_transposes(&mut self) -> Result<Halt<bool>, WlError> {
        let mut closed = true;
        for c in &mut self.colors {
            c.transpose = usize::MAX;
        }
        loop {
            let mut missing = None;
            for i in 0..self.colors.len() {
                if self.colors[i].transpose != usize::MAX {
                    continue;
                }
                let t = halt!(transpose_poly(self.r, &self.colors[i].poly)?);
                if t.deg() != self.colors[i].degree {
                    return Err(WlError::InternalInvariantBroken(format!(
                        "transpose of color {} has degree {} instead of {}",
                        self.colors[i].id,
                        t.deg(),
                        self.colors[i].degree
                    )));
                }
                match self.colors.iter().position(|c| c.poly == t) {
                    Some(j) => {
                        let (a, b) = (self.colors[i].id, self.colors[j].id);
                        self.colors[i].transpose = b;
                        self.colors[j].transpose = a;
                    }
                    None => {
                        missing = Some(t);
                        break;
                    }
                }
            }
            match missing {
                None => return Ok(Halt::Done(closed)),
                Some(t) => {
                    closed = false;
                    for c in &mut self.colors {
                        c.transpose = usize::MAX;
                    }
                    if !halt!(self.refine_by(&t)?) {
                        return Err(WlError::InternalInvariantBroken("transpose refinement made no progress".into()));
                    }
                }
            }
        }
    }
}

/// Implicit 2-dimensional WL on a color set containing the identity.
pub fn wl2_implicit(state: &ColorSet, engine: &Engine) -> Result<WlOutcome, WlError> {
    let r = state.tower().clone();
    let n = state.f().deg();
    if state.identity().is_none() {
        return Err(WlError::InternalInvariantBroken("identity color missing".into()));
    }
    let next_id = state.colors().iter().map(|c| c.id + 1).max().unwrap_or(0);
    let mut refiner = Refiner { r: &r, colors: state.colors().to_vec(), next_id };
    let mut rounds = Vec::new();
    for round in 1..=n + 1 {
        refiner.colors.sort_by(color_order);
        let current = ColorSet::from_parts(state.f().clone(), r.clone(), refiner.colors.clone());
        let pairs: Vec<(usize, usize)> =
            (0..current.len()).flat_map(|a| (0..current.len()).map(move |b| (a, b))).collect();
        let decomposed = par::map(engine.mode, &pairs, |&(a, b)| {
            let (l, t) = (&current.colors()[a], &current.colors()[b]);
            let prod = color_product(l, t, &current)?;
            squarefree_over_r(&r, &prod)
        });
        let mut products = Vec::with_capacity(pairs.len());
        for d in decomposed {
            match d? {
                Halt::Done(parts) => products.push(parts),
                Halt::Factor(h) => return Ok(WlOutcome::Factor(h)),
            }
        }
        let mut changed = false;
        for parts in &products {
            for (h, _) in parts {
                match refiner.refine_by(h)? {
                    Halt::Done(c) => changed |= c,
                    Halt::Factor(h) => return Ok(WlOutcome::Factor(h)),
                }
            }
        }
        let closed = if changed {
            match refiner.close_transposes()? {
                Halt::Done(c) => c,
                Halt::Factor(h) => return Ok(WlOutcome::Factor(h)),
            }
        } else {
            true
        };
        rounds.push(RoundStats { round, colors: refiner.colors.len(), transpose_closed: closed });
        if !changed {
            let table = product_table(&current, &pairs, &products)?;
            return Ok(WlOutcome::Stable(StableColorSet { colors: current, product_table: table, rounds }));
        }
    }
    Err(WlError::InternalInvariantBroken(format!("no stable coloring after {} rounds", n + 1)))
}

fn product_table(
    state: &ColorSet,
    pairs: &[(usize, usize)],
    products: &[Vec<(TowerPoly, usize)>],
) -> Result<BTreeMap<(usize, usize), Vec<(usize, usize)>>, WlError> {
    let r = state.tower();
    let mut table = BTreeMap::new();
    for (&(a, b), parts) in pairs.iter().zip(products) {
        let (l, t) = (&state.colors()[a], &state.colors()[b]);
        let mut entry = Vec::new();
        for (h, mult) in parts {
            let mut covered = 0;
            for c in state.colors() {
                let rem = r
                    .poly_rem(h, &c.poly)
                    .map_err(|_| WlError::InternalInvariantBroken("non-monic color".into()))?;
                if rem.is_zero() {
                    entry.push((c.id, *mult));
                    covered += c.degree;
                }
            }
            if covered != h.deg() {
                return Err(WlError::InternalInvariantBroken(format!(
                    "product of colors {} and {} is not a union of colors",
                    l.id, t.id
                )));
            }
        }
        entry.sort_unstable();
        table.insert((l.id, t.id), entry);
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SanityOutcome {
    /// As many colors as roots: the scheme is thin (a group).
    Thin,
    Pass,
}

/// Structural checks on a stable color set.
pub fn sanity_checks(state: &StableColorSet) -> Result<SanityOutcome, WlError> {
    let cs = &state.colors;
    let r = cs.tower();
    let n = cs.f().deg();
    let broken = |s: String| Err(WlError::InternalInvariantBroken(s));
    if cs.identity().is_none() {
        return broken("identity color missing".into());
    }
    for c in cs.colors() {
        if c.poly.deg() != c.degree || c.poly.lc().is_none_or(|lc| !r.is_one(lc)) {
            return broken(format!("color {} is not monic of degree {}", c.id, c.degree));
        }
        if cs.get(c.transpose).is_none_or(|t| t.transpose != c.id) {
            return broken(format!("color {} has no transpose partner", c.id));
        }
    }
    let total: usize = cs.colors().iter().map(|c| c.degree).sum();
    if total != n {
        return broken(format!("color degrees add up to {total}, not {n}"));
    }
    if cs.len() < 2 || cs.len() > n {
        return broken(format!("{} colors for {n} roots", cs.len()));
    }
    Ok(if cs.len() == n { SanityOutcome::Thin } else { SanityOutcome::Pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::{stronger_balance, BalanceOutcome};
    use crate::ffield::FieldCtx;

    fn cycle3() -> ExplicitColoring {
        ExplicitColoring::from_labels(&[vec![0, 1, 2], vec![2, 0, 1], vec![1, 2, 0]])
    }

    fn c5() -> ExplicitColoring {
        let labels = (0..5)
            .map(|i: usize| {
                (0..5)
                    .map(|j: usize| match (i + 5 - j) % 5 {
                        0 => 0,
                        1 | 4 => 1,
                        _ => 2,
                    })
                    .collect()
            })
            .collect::<Vec<_>>();
        ExplicitColoring::from_labels(&labels)
    }

    #[test]
    fn explicit_examples() {
        let c = cycle3();
        assert_eq!(wl2_explicit(&c).unwrap().partition(), c.partition());
        let c = c5();
        assert_eq!(wl2_explicit(&c).unwrap().partition(), c.partition());
        let k4: Vec<Vec<usize>> = (0..4).map(|i| (0..4).map(|j| usize::from(i != j)).collect()).collect();
        let k4 = ExplicitColoring::from_labels(&k4);
        assert_eq!(wl2_explicit(&k4).unwrap().colors.len(), 2);
    }

    #[test]
    fn explicit_refines_a_path() {
        // Path 0-1-2 with everything else in one color: endpoints separate.
        let labels = vec![vec![0, 1, 2], vec![1, 0, 1], vec![2, 1, 0]];
        let out = wl2_explicit(&ExplicitColoring::from_labels(&labels)).unwrap();
        out.validate().unwrap();
        assert_ne!(out.labels()[0][0], out.labels()[1][1]);
    }

    #[test]
    fn explicit_rejects_malformed() {
        let mut c = cycle3();
        c.colors[1][0][0] = 1;
        assert!(matches!(wl2_explicit(&c), Err(WlError::MalformedInput(_))));
        let labels = vec![vec![0, 1, 1], vec![2, 0, 1], vec![2, 2, 0]];
        let mut c = ExplicitColoring::from_labels(&labels);
        c.colors[1][0][2] = 0;
        c.colors[2][0][2] = 1;
        assert!(wl2_explicit(&c).is_err());
    }

    fn z3_colors() -> ColorSet {
        let k = FieldCtx::new(13).unwrap();
        match stronger_balance(&FpPoly::from_i64(k, &[-1, 0, 0, 1]), &Engine::default()).unwrap() {
            BalanceOutcome::Colors(c) => c,
            BalanceOutcome::Factor(_) => panic!(),
        }
    }

    #[test]
    fn product_examples() {
        let cs = z3_colors();
        let [i, a, at] = [&cs.colors()[0], &cs.colors()[1], &cs.colors()[2]];
        assert_eq!(color_product(i, a, &cs).unwrap(), a.poly);
        // A * A^T = I: the product is y.
        assert_eq!(color_product(a, at, &cs).unwrap(), i.poly);
        // A * A = A^T on a directed 3-cycle.
        assert_eq!(color_product(a, a, &cs).unwrap(), at.poly);
    }

    #[test]
    fn z3_is_stable_and_thin() {
        let cs = z3_colors();
        let WlOutcome::Stable(st) = wl2_implicit(&cs, &Engine::default()).unwrap() else { panic!() };
        assert_eq!(st.colors.len(), 3);
        assert_eq!(st.rounds.len(), 1);
        assert_eq!(sanity_checks(&st).unwrap(), SanityOutcome::Thin);
        assert_eq!(st.product_table[&(1, 2)], vec![(0, 1)]);
        assert_eq!(st.product_table[&(1, 1)], vec![(2, 1)]);
    }

    #[test]
    fn missing_identity_is_an_invariant_failure() {
        let cs = z3_colors();
        let broken = ColorSet::from_parts(cs.f().clone(), cs.tower().clone(), cs.colors()[1..].to_vec());
        let st = StableColorSet { colors: broken.clone(), product_table: BTreeMap::new(), rounds: vec![] };
        assert!(matches!(sanity_checks(&st), Err(WlError::InternalInvariantBroken(_))));
        assert!(matches!(wl2_implicit(&broken, &Engine::default()), Err(WlError::InternalInvariantBroken(_))));
    }

    #[test]
    fn transposes_are_computed_correctly() {
        let cs = z3_colors();
        let r = cs.tower();
        let Halt::Done(t) = transpose_poly(r, &cs.colors()[1].poly).unwrap() else { panic!() };
        assert_eq!(t, cs.colors()[2].poly);
        let Halt::Done(t) = transpose_poly(r, &cs.colors()[0].poly).unwrap() else { panic!() };
        assert_eq!(t, cs.colors()[0].poly);
    }
}

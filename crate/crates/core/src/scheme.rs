//! Association schemes: axioms, closed subsets, primitivity, and the
//! reduction that turns a proper closed subset into a smaller polynomial.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fppoly::{radical, resultant_via_charpoly, FpPoly, PolyError};
use crate::tower::TowerPoly;
use crate::wl2::{mat_mul, transpose, ExplicitColoring, Matrix, StableColorSet, WlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Partition,
    Identity,
    Transpose,
    IntersectionNumbers,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemeError {
    #[error("{which:?} axiom fails at {witness:?}")]
    AxiomViolation { which: Axiom, witness: Vec<usize> },
    #[error("group action is not transitive")]
    NotTransitive,
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("closed subset must be proper and nontrivial")]
    TrivialD,
    #[error("every coefficient of g_D is a constant")]
    NoDistinguishingCoefficient,
    #[error("unknown fixture family `{0}`")]
    UnknownFamily(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Wl(#[from] WlError),
}

/// Where the colors of a scheme come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeColors {
    Matrices(Vec<Matrix>),
    /// Ids of the colors of a stable color set, in scheme order.
    ColorIds(Vec<usize>),
}

/// An association scheme on `n` points with colors indexed `0..len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scheme {
    pub n: usize,
    pub colors: SchemeColors,
    pub valencies: Vec<usize>,
    pub transpose: Vec<usize>,
    pub identity: usize,
    /// `(p, q, r) -> a_pq^r`, nonzero entries only.
    pub tensor: BTreeMap<(usize, usize, usize), usize>,
}

impl Scheme {
    pub fn len(&self) -> usize {
        self.valencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valencies.is_empty()
    }

    pub fn a(&self, p: usize, q: usize, r: usize) -> usize {
        self.tensor.get(&(p, q, r)).copied().unwrap_or(0)
    }

    /// Builds the scheme of a stable color set from its product table.
    pub fn from_stable(st: &StableColorSet) -> Result<Self, SchemeError> {
        let cs = &st.colors;
        let ids: Vec<usize> = cs.colors().iter().map(|c| c.id).collect();
        let index = |id: usize| {
            ids.iter()
                .position(|&x| x == id)
                .ok_or_else(|| SchemeError::MalformedInput(format!("unknown color id {id}")))
        };
        let identity = index(cs.identity().ok_or(SchemeError::AxiomViolation { which: Axiom::Identity, witness: vec![] })?.id)?;
        let transpose = cs.colors().iter().map(|c| index(c.transpose)).collect::<Result<Vec<_>, _>>()?;
        let valencies = cs.colors().iter().map(|c| c.degree).collect();
        let mut tensor = BTreeMap::new();
        for (&(l, t), entry) in &st.product_table {
            for &(r, mult) in entry {
                tensor.insert((index(l)?, index(t)?, index(r)?), mult);
            }
        }
        let sch = Scheme { n: cs.f().deg(), colors: SchemeColors::ColorIds(ids), valencies, transpose, identity, tensor };
        sch.check_tensor()?;
        Ok(sch)
    }

    /// `sum_r a_pq^r v_r = v_p v_q` and `a_{p p*}^I = v_p`.
    pub fn check_tensor(&self) -> Result<(), SchemeError> {
        let k = self.len();
        for p in 0..k {
            for q in 0..k {
                let total: usize = (0..k).map(|r| self.a(p, q, r) * self.valencies[r]).sum();
                if total != self.valencies[p] * self.valencies[q] {
                    return Err(SchemeError::AxiomViolation { which: Axiom::IntersectionNumbers, witness: vec![p, q] });
                }
            }
            if self.a(p, self.transpose[p], self.identity) != self.valencies[p] {
                return Err(SchemeError::AxiomViolation {
                    which: Axiom::Transpose,
                    witness: vec![p, self.transpose[p], self.identity],
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> SchemeJson {
        SchemeJson {
            n: self.n,
            colors: self.colors.clone(),
            valencies: self.valencies.clone(),
            transpose: self.transpose.clone(),
            identity: self.identity,
            intersection: self.tensor.iter().map(|(&(p, q, r), &a)| [p, q, r, a]).collect(),
        }
    }
}

impl Scheme {
    /// Rebuilds a scheme from its serialized form. Matrix-backed schemes
    /// are re-verified from the matrices; id-backed ones by their tensor.
    pub fn from_json(j: &SchemeJson) -> Result<Self, SchemeError> {
        if let SchemeColors::Matrices(m) = &j.colors {
            return verify_scheme(&ExplicitColoring { n: j.n, colors: m.clone() });
        }
        let k = j.valencies.len();
        if j.transpose.len() != k || j.identity >= k || j.transpose.iter().any(|&t| t >= k) {
            return Err(SchemeError::MalformedInput("inconsistent color counts".into()));
        }
        if j.intersection.iter().any(|e| e[..3].iter().any(|&c| c >= k)) {
            return Err(SchemeError::MalformedInput("intersection index out of range".into()));
        }
        let sch = Scheme {
            n: j.n,
            colors: j.colors.clone(),
            valencies: j.valencies.clone(),
            transpose: j.transpose.clone(),
            identity: j.identity,
            tensor: j.intersection.iter().filter(|e| e[3] > 0).map(|e| ((e[0], e[1], e[2]), e[3])).collect(),
        };
        if sch.valencies.iter().sum::<usize>() != sch.n {
            return Err(SchemeError::MalformedInput("valencies do not sum to n".into()));
        }
        sch.check_tensor()?;
        Ok(sch)
    }
}

/// Serialized scheme; `intersection` lists `[p, q, r, a_pq^r]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeJson {
    pub n: usize,
    pub colors: SchemeColors,
    pub valencies: Vec<usize>,
    pub transpose: Vec<usize>,
    pub identity: usize,
    pub intersection: Vec<[usize; 4]>,
}

/// Checks the four scheme axioms on explicit matrices and computes the
/// intersection numbers.
pub fn verify_scheme(colors: &ExplicitColoring) -> Result<Scheme, SchemeError> {
    let n = colors.n;
    let mats = &colors.colors;
    let violation = |which, witness| Err(SchemeError::AxiomViolation { which, witness });
    for m in mats {
        if m.len() != n || m.iter().any(|r| r.len() != n || r.iter().any(|&v| v > 1)) {
            return Err(SchemeError::MalformedInput("colors must be n x n 0/1 matrices".into()));
        }
    }
    let mut cover = vec![vec![0usize; n]; n];
    for m in mats {
        for i in 0..n {
            for j in 0..n {
                cover[i][j] += m[i][j] as usize;
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if cover[i][j] != 1 {
                return violation(Axiom::Partition, vec![i, j]);
            }
        }
    }
    if let Some(c) = mats.iter().position(|m| m.iter().flatten().all(|&v| v == 0)) {
        return violation(Axiom::Partition, vec![c]);
    }
    let identity = match mats.iter().position(|m| (0..n).all(|i| (0..n).all(|j| m[i][j] == u8::from(i == j)))) {
        Some(i) => i,
        None => return violation(Axiom::Identity, vec![]),
    };
    let mut transposes = Vec::with_capacity(mats.len());
    for (c, m) in mats.iter().enumerate() {
        match mats.iter().position(|x| *x == transpose(m)) {
            Some(t) => transposes.push(t),
            None => return violation(Axiom::Transpose, vec![c]),
        }
    }
    let labels = colors.labels();
    let mut tensor = BTreeMap::new();
    for p in 0..mats.len() {
        for q in 0..mats.len() {
            let prod = mat_mul(&mats[p], &mats[q]);
            let mut seen: BTreeMap<usize, u32> = BTreeMap::new();
            for i in 0..n {
                for j in 0..n {
                    let r = labels[i][j];
                    match seen.get(&r) {
                        Some(&v) if v != prod[i][j] => return violation(Axiom::IntersectionNumbers, vec![p, q, r]),
                        Some(_) => {}
                        None => {
                            seen.insert(r, prod[i][j]);
                        }
                    }
                }
            }
            for (r, v) in seen {
                if v > 0 {
                    tensor.insert((p, q, r), v as usize);
                }
            }
        }
    }
    let valencies = mats.iter().map(|m| m[0].iter().map(|&v| v as usize).sum()).collect();
    Ok(Scheme {
        n,
        colors: SchemeColors::Matrices(mats.clone()),
        valencies,
        transpose: transposes,
        identity,
        tensor,
    })
}

/// A closed subset: members by scheme index and `n_R = sum of valencies`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClosedSubset {
    pub n_r: usize,
    pub members: BTreeSet<usize>,
}

/// Smallest closed subset containing `gens`.
pub fn generated_closed_subset(gens: &[usize], sch: &Scheme) -> ClosedSubset {
    let mut set: BTreeSet<usize> = gens.iter().flat_map(|&g| [g, sch.transpose[g]]).collect();
    set.insert(sch.identity);
    for _ in 0..sch.len() {
        let mut next = set.clone();
        for &(p, q, r) in sch.tensor.keys() {
            if set.contains(&p) && set.contains(&q) {
                next.insert(r);
            }
        }
        if next == set {
            break;
        }
        set = next;
    }
    let n_r = set.iter().map(|&c| sch.valencies[c]).sum();
    ClosedSubset { n_r, members: set }
}

/// Every closed subset, ordered by `(n_R, members)`.
pub fn closed_subsets(sch: &Scheme) -> Vec<ClosedSubset> {
    let mut found = BTreeSet::from([generated_closed_subset(&[], sch)]);
    let mut frontier: Vec<ClosedSubset> = found.iter().cloned().collect();
    while let Some(s) = frontier.pop() {
        for c in 0..sch.len() {
            if s.members.contains(&c) {
                continue;
            }
            let gens: Vec<usize> = s.members.iter().copied().chain([c]).collect();
            let t = generated_closed_subset(&gens, sch);
            if found.insert(t.clone()) {
                frontier.push(t);
            }
        }
    }
    found.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Primitivity {
    pub primitive: bool,
    /// Smallest proper nontrivial closed subset, when imprimitive.
    pub witness: Option<ClosedSubset>,
}

/// Primitive iff every non-identity color generates the whole scheme.
pub fn is_primitive(sch: &Scheme) -> Primitivity {
    let witness = (0..sch.len())
        .filter(|&c| c != sch.identity)
        .map(|c| generated_closed_subset(&[c], sch))
        .filter(|s| s.members.len() < sch.len())
        .min();
    Primitivity { primitive: witness.is_none(), witness }
}

/// Data of one reduction step: `g` has at most `n / n_D` roots, and any
/// factor `phi` of `g` gives the factor `gcd(phi(h), f)` of `f`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    pub n_d: usize,
    /// Power of `y` whose coefficient in the shifted `g_D` was used.
    pub coefficient_index: usize,
    pub h: FpPoly,
    pub g: FpPoly,
}

/// Reduces `f` along a proper closed subset `d` of the stable scheme.
///
/// `G_D(y) = (-1)^{n_D} g_D(X - y)` has as roots the members of the block
/// of `X`, so its coefficients are constant on blocks; any non-constant one
/// takes at most `n / n_D` values on the roots of `f`.
pub fn primitive_reduction(st: &StableColorSet, sch: &Scheme, d: &ClosedSubset) -> Result<Reduction, SchemeError> {
    if d.members.len() <= 1 || d.members.len() >= sch.len() {
        return Err(SchemeError::TrivialD);
    }
    let SchemeColors::ColorIds(ids) = &sch.colors else {
        return Err(SchemeError::MalformedInput("scheme is not backed by color polynomials".into()));
    };
    let cs = &st.colors;
    let r = cs.tower();
    let f = cs.f();
    let mut g_d = r.poly_constant(&r.one(1));
    for &m in &d.members {
        let color = cs.get(ids[m]).ok_or_else(|| SchemeError::MalformedInput(format!("unknown color {}", ids[m])))?;
        g_d = r.poly_mul(&g_d, &color.poly);
    }
    let n_d = g_d.deg();
    let shift = TowerPoly::new(1, vec![r.var(1), r.neg(&r.one(1))]);
    let mut shifted = TowerPoly::zero(1);
    for c in g_d.coeffs().iter().rev() {
        shifted = r.poly_add(&r.poly_mul(&shifted, &shift), &r.poly_constant(c));
    }
    if n_d % 2 == 1 {
        shifted = r.poly_neg(&shifted);
    }
    let (index, h) = (0..n_d)
        .rev()
        .filter_map(|i| shifted.coeff(i).filter(|c| !c.is_scalar()).map(|c| (i, r.elem_to_fp(c))))
        .next()
        .ok_or(SchemeError::NoDistinguishingCoefficient)?;
    let g = radical(&resultant_via_charpoly(&h, f)?)?;
    Ok(Reduction { n_d, coefficient_index: index, h, g })
}

/// 2-orbits of the group generated by `gens` (permutations as image lists).
pub fn schurian_fixture(gens: &[Vec<usize>]) -> Result<ExplicitColoring, SchemeError> {
    let m = gens.first().map(|g| g.len()).ok_or_else(|| SchemeError::MalformedInput("no generators".into()))?;
    for g in gens {
        let mut seen = vec![false; m];
        if g.len() != m || g.iter().any(|&x| x >= m || std::mem::replace(&mut seen[x], true)) {
            return Err(SchemeError::MalformedInput("generators must be permutations of 0..m".into()));
        }
    }
    let mut orbit = vec![false; m];
    orbit[0] = true;
    let mut queue = VecDeque::from([0]);
    while let Some(x) = queue.pop_front() {
        for g in gens {
            if !std::mem::replace(&mut orbit[g[x]], true) {
                queue.push_back(g[x]);
            }
        }
    }
    if orbit.iter().any(|&v| !v) {
        return Err(SchemeError::NotTransitive);
    }
    let mut labels = vec![vec![usize::MAX; m]; m];
    let mut next = 0;
    for i in 0..m {
        for j in 0..m {
            if labels[i][j] != usize::MAX {
                continue;
            }
            labels[i][j] = next;
            let mut queue = VecDeque::from([(i, j)]);
            while let Some((a, b)) = queue.pop_front() {
                for g in gens {
                    let (c, d) = (g[a], g[b]);
                    if labels[c][d] == usize::MAX {
                        labels[c][d] = next;
                        queue.push_back((c, d));
                    }
                }
            }
            next += 1;
        }
    }
    Ok(ExplicitColoring::from_labels(&labels))
}

/// Generators for `cyclic:m`, `dihedral:m` and `symmetric:m`.
pub fn family_generators(spec: &str) -> Result<Vec<Vec<usize>>, SchemeError> {
    let unknown = || SchemeError::UnknownFamily(spec.to_string());
    let (name, m) = spec.split_once(':').ok_or_else(unknown)?;
    let m: usize = m.trim().parse().map_err(|_| unknown())?;
    if m == 0 {
        return Err(unknown());
    }
    let rotation: Vec<usize> = (0..m).map(|i| (i + 1) % m).collect();
    match name.trim() {
        "cyclic" => Ok(vec![rotation]),
        "dihedral" => Ok(vec![rotation, (0..m).map(|i| (m - i) % m).collect()]),
        "symmetric" => {
            let mut swap: Vec<usize> = (0..m).collect();
            if m > 1 {
                swap.swap(0, 1);
            }
            Ok(vec![rotation, swap])
        }
        _ => Err(unknown()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(spec: &str) -> Scheme {
        verify_scheme(&schurian_fixture(&family_generators(spec).unwrap()).unwrap()).unwrap()
    }

    fn by_valency(s: &Scheme, v: usize) -> usize {
        (0..s.len()).find(|&c| c != s.identity && s.valencies[c] == v).unwrap()
    }

    #[test]
    fn z3_scheme() {
        let s = fixture("cyclic:3");
        assert_eq!(s.len(), 3);
        let a = (0..3).find(|&c| c != s.identity).unwrap();
        let at = s.transpose[a];
        assert_ne!(a, at);
        assert_eq!(s.a(a, at, s.identity), 1);
        assert_eq!(s.a(a, a, at), 1);
        assert!(is_primitive(&s).primitive);
        assert_eq!(generated_closed_subset(&[a], &s).members.len(), 3);
        assert_eq!(generated_closed_subset(&[s.identity], &s).members, BTreeSet::from([s.identity]));
    }

    #[test]
    fn c5_scheme() {
        let s = fixture("dihedral:5");
        assert_eq!(s.len(), 3);
        let mats = match &s.colors {
            SchemeColors::Matrices(m) => m.clone(),
            _ => unreachable!(),
        };
        let d1 = (0..3).find(|&c| mats[c][0][1] == 1).unwrap();
        let d2 = (0..3).find(|&c| mats[c][0][2] == 1).unwrap();
        assert_eq!(s.a(d1, d1, d2), 1);
        assert_eq!(s.a(d1, d1, s.identity), 2);
        assert!(is_primitive(&s).primitive);
        assert_eq!(generated_closed_subset(&[d1], &s).members.len(), 3);
    }

    #[test]
    fn z4_is_imprimitive() {
        let s = fixture("cyclic:4");
        let p = is_primitive(&s);
        assert!(!p.primitive);
        let w = p.witness.unwrap();
        assert_eq!(w.n_r, 2);
        assert_eq!(w.members.len(), 2);
        assert!(w.members.contains(&s.identity));
        let inv = *w.members.iter().find(|&&c| c != s.identity).unwrap();
        assert_eq!(s.transpose[inv], inv);
    }

    #[test]
    fn symmetric_group_is_two_transitive() {
        let s = fixture("symmetric:4");
        assert_eq!(s.len(), 2);
        assert_eq!(s.valencies[by_valency(&s, 3)], 3);
    }

    #[test]
    fn non_regular_graph_violates_axioms() {
        // Path 0-1-2 as E, its complement minus I as the third color.
        let labels = vec![vec![0, 1, 2], vec![1, 0, 1], vec![2, 1, 0]];
        let c = ExplicitColoring::from_labels(&labels);
        assert!(matches!(
            verify_scheme(&c),
            Err(SchemeError::AxiomViolation { which: Axiom::IntersectionNumbers, .. })
        ));
    }

    #[test]
    fn fixture_errors() {
        assert_eq!(schurian_fixture(&[vec![1, 0, 2]]), Err(SchemeError::NotTransitive));
        assert!(matches!(schurian_fixture(&[vec![0, 0, 1]]), Err(SchemeError::MalformedInput(_))));
        assert!(matches!(family_generators("weird:3"), Err(SchemeError::UnknownFamily(_))));
    }

    #[test]
    fn tensor_consistency_on_fixtures() {
        for spec in ["cyclic:6", "dihedral:6", "dihedral:7", "symmetric:5", "cyclic:8"] {
            let s = fixture(spec);
            s.check_tensor().unwrap();
            for c in 0..s.len() {
                let sub = generated_closed_subset(&[c], &s);
                assert_eq!(s.n % sub.n_r, 0, "{spec}");
            }
        }
    }

    #[test]
    fn closed_subsets_of_z6() {
        let s = fixture("cyclic:6");
        let sizes: Vec<usize> = closed_subsets(&s).iter().map(|c| c.n_r).collect();
        assert_eq!(sizes, vec![1, 2, 3, 6]);
        assert_eq!(closed_subsets(&fixture("cyclic:5")).len(), 2);
    }

    #[test]
    fn json_round_trip() {
        let s = fixture("dihedral:5");
        assert_eq!(Scheme::from_json(&s.to_json()).unwrap(), s);
        let mut ids = s.to_json();
        ids.colors = SchemeColors::ColorIds((0..s.len()).collect());
        let back = Scheme::from_json(&ids).unwrap();
        assert_eq!(back.tensor, s.tensor);
        ids.intersection.pop();
        assert!(Scheme::from_json(&ids).is_err());
    }
}

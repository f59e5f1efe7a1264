//! Finite groups as multiplication tables, product groups with restriction,
//! and the index-set lattice.
//!
//! Group elements are opaque labels; the table is the ground truth. Elements
//! of a product group `G = G_1 x ... x G_N` are stored as full `N`-tuples,
//! with an element of the subgroup `G_I` having identity components outside
//! `I`. Restriction `g -> g|_I` then just zeroes the complement.

use crate::report::Report;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("index set {0} is not contained in {1}")]
    IndexNotContained(IndexSet, IndexSet),
    #[error("invalid group table: {0}")]
    InvalidTable(String),
}

/// A finite group given by its multiplication table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGroup {
    pub name: String,
    pub elements: Vec<String>,
    /// `mult[a][b]` is the index of `a * b`.
    pub mult: Vec<Vec<usize>>,
    pub inv: Vec<usize>,
    pub id: usize,
}

impl FiniteGroup {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mult[a][b]
    }

    pub fn invert(&self, a: usize) -> usize {
        self.inv[a]
    }

    pub fn trivial(name: &str) -> Self {
        FiniteGroup {
            name: name.to_string(),
            elements: vec!["e".to_string()],
            mult: vec![vec![0]],
            inv: vec![0],
            id: 0,
        }
    }

    pub fn cyclic(name: &str, n: usize) -> Self {
        assert!(n >= 1);
        let elements = (0..n)
            .map(|k| if k == 0 { "e".to_string() } else { format!("r{k}") })
            .collect();
        let mult = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        let inv = (0..n).map(|a| (n - a) % n).collect();
        FiniteGroup {
            name: name.to_string(),
            elements,
            mult,
            inv,
            id: 0,
        }
    }

    /// Klein four-group.
    pub fn klein(name: &str) -> Self {
        let elements = ["e", "a", "b", "c"].map(String::from).to_vec();
        let mult = vec![
            vec![0, 1, 2, 3],
            vec![1, 0, 3, 2],
            vec![2, 3, 0, 1],
            vec![3, 2, 1, 0],
        ];
        FiniteGroup {
            name: name.to_string(),
            elements,
            mult,
            inv: vec![0, 1, 2, 3],
            id: 0,
        }
    }

    /// Checks associativity on all triples, the two-sided identity, and the
    /// inverse law.
    pub fn validate(&self) -> Report {
        let mut rep = Report::new();
        let n = self.order();
        let shape_ok = self.mult.len() == n
            && self.mult.iter().all(|r| r.len() == n && r.iter().all(|&x| x < n))
            && self.inv.len() == n
            && self.inv.iter().all(|&x| x < n)
            && self.id < n;
        if !shape_ok {
            rep.fail("group-table-shape", format!("group {}", self.name));
            return rep;
        }
        rep.pass("group-table-shape");
        let mut assoc = None;
        'outer: for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c)) {
                        assoc = Some(format!(
                            "({},{},{}) in {}",
                            self.elements[a], self.elements[b], self.elements[c], self.name
                        ));
                        break 'outer;
                    }
                }
            }
        }
        rep.check("group-associativity", assoc);
        let ident = (0..n).find_map(|a| {
            (self.mul(self.id, a) != a || self.mul(a, self.id) != a)
                .then(|| self.elements[a].clone())
        });
        rep.check("group-identity", ident);
        let inverse = (0..n).find_map(|a| {
            (self.mul(self.invert(a), a) != self.id || self.mul(a, self.invert(a)) != self.id)
                .then(|| self.elements[a].clone())
        });
        rep.check("group-inverse", inverse);
        rep
    }

    /// All subgroups, each as a sorted element list. Brute force; intended
    /// for the small groups of the random corpus.
    pub fn subgroups(&self) -> Vec<Vec<usize>> {
        let n = self.order();
        let mut out: Vec<Vec<usize>> = Vec::new();
        // Grow subsets closed under multiplication from each generating set.
        for mask in 0u32..(1 << n) {
            if mask & (1 << self.id) == 0 {
                continue;
            }
            let set: Vec<usize> = (0..n).filter(|&k| mask & (1 << k) != 0).collect();
            let closed = set.iter().all(|&a| {
                self.inv[a] != usize::MAX
                    && set.contains(&self.inv[a])
                    && set.iter().all(|&b| set.contains(&self.mul(a, b)))
            });
            if closed && !out.contains(&set) {
                out.push(set);
            }
        }
        out.sort();
        out
    }

    /// All injective homomorphisms `self -> target`.
    pub fn injective_homs(&self, target: &FiniteGroup) -> Vec<Vec<usize>> {
        let n = self.order();
        let m = target.order();
        if m < n {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut map = vec![usize::MAX; n];
        map[self.id] = target.id;
        fn rec(
            g: &FiniteGroup,
            t: &FiniteGroup,
            map: &mut Vec<usize>,
            k: usize,
            out: &mut Vec<Vec<usize>>,
        ) {
            let n = g.order();
            if k == n {
                // Full homomorphism check on the completed map.
                let hom = (0..n).all(|a| {
                    (0..n).all(|b| map[g.mul(a, b)] == t.mul(map[a], map[b]))
                });
                let inj = {
                    let mut seen = vec![false; t.order()];
                    map.iter().all(|&x| !std::mem::replace(&mut seen[x], true))
                };
                if hom && inj {
                    out.push(map.clone());
                }
                return;
            }
            if map[k] != usize::MAX {
                rec(g, t, map, k + 1, out);
                return;
            }
            for img in 0..t.order() {
                map[k] = img;
                rec(g, t, map, k + 1, out);
            }
            map[k] = usize::MAX;
        }
        rec(self, target, &mut map, 0, &mut out);
        out.sort();
        out.dedup();
        out
    }
}

/// A sorted subset of `{1..N}` as a bitmask; bit `i-1` stands for chart `i`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndexSet(pub u32);

impl IndexSet {
    pub const EMPTY: IndexSet = IndexSet(0);

    pub fn from_indices(indices: &[usize]) -> Self {
        let mut m = 0;
        for &i in indices {
            assert!(i >= 1, "chart indices are 1-based");
            m |= 1 << (i - 1);
        }
        IndexSet(m)
    }

    pub fn full(n: usize) -> Self {
        IndexSet((1u32 << n) - 1)
    }

    pub fn singleton(i: usize) -> Self {
        Self::from_indices(&[i])
    }

    pub fn indices(self) -> Vec<usize> {
        (1..=32).filter(|&i| self.contains(i)).collect()
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << (i - 1)) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn subset_of(self, other: IndexSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// `I ~ J`: nested, i.e. one contains the other.
    pub fn nested(self, other: IndexSet) -> bool {
        self.subset_of(other) || other.subset_of(self)
    }

    pub fn union(self, other: IndexSet) -> IndexSet {
        IndexSet(self.0 | other.0)
    }

    pub fn intersect(self, other: IndexSet) -> IndexSet {
        IndexSet(self.0 & other.0)
    }

    pub fn minus(self, other: IndexSet) -> IndexSet {
        IndexSet(self.0 & !other.0)
    }

    /// `(nested, meet, join)`: meet and join are empty unless the pair is
    /// nested.
    pub fn meet_join(self, other: IndexSet) -> (bool, IndexSet, IndexSet) {
        if self.subset_of(other) {
            (true, self, other)
        } else if other.subset_of(self) {
            (true, other, self)
        } else {
            (false, IndexSet::EMPTY, IndexSet::EMPTY)
        }
    }

    /// All nonempty subsets of `{1..n}` in ascending mask order.
    pub fn all_nonempty(n: usize) -> Vec<IndexSet> {
        (1u32..(1 << n)).map(IndexSet).collect()
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.indices().into_iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// An element of the full product group `G = G_1 x ... x G_N`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GElem(pub Vec<usize>);

impl fmt::Debug for GElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{:?}", self.0)
    }
}

/// The product group `G_1 x ... x G_N` with componentwise structure.
#[derive(Clone, Debug)]
pub struct ProductGroup {
    pub factors: Vec<FiniteGroup>,
}

impl ProductGroup {
    pub fn new(factors: Vec<FiniteGroup>) -> Self {
        ProductGroup { factors }
    }

    pub fn n(&self) -> usize {
        self.factors.len()
    }

    pub fn identity(&self) -> GElem {
        GElem(self.factors.iter().map(|g| g.id).collect())
    }

    pub fn mul(&self, a: &GElem, b: &GElem) -> GElem {
        GElem(
            self.factors
                .iter()
                .enumerate()
                .map(|(k, g)| g.mul(a.0[k], b.0[k]))
                .collect(),
        )
    }

    pub fn invert(&self, a: &GElem) -> GElem {
        GElem(
            self.factors
                .iter()
                .enumerate()
                .map(|(k, g)| g.invert(a.0[k]))
                .collect(),
        )
    }

    /// Support of `g`: the chart indices where the component is not the
    /// identity.
    pub fn support(&self, a: &GElem) -> IndexSet {
        IndexSet::from_indices(
            &(0..self.n())
                .filter(|&k| a.0[k] != self.factors[k].id)
                .map(|k| k + 1)
                .collect::<Vec<_>>(),
        )
    }

    /// `g |-> g|_I`: componentwise projection onto `G_I`.
    pub fn restrict(&self, a: &GElem, i: IndexSet) -> GElem {
        GElem(
            (0..self.n())
                .map(|k| if i.contains(k + 1) { a.0[k] } else { self.factors[k].id })
                .collect(),
        )
    }

    /// Checked restriction: errors unless `I` is contained in the declared
    /// support set `J`.
    pub fn restrict_checked(
        &self,
        a: &GElem,
        j: IndexSet,
        i: IndexSet,
    ) -> Result<GElem, GroupError> {
        if !i.subset_of(j) {
            return Err(GroupError::IndexNotContained(i, j));
        }
        Ok(self.restrict(a, i))
    }

    pub fn in_subgroup(&self, a: &GElem, i: IndexSet) -> bool {
        self.support(a).subset_of(i)
    }

    /// Enumerate the subgroup `G_I` (identity outside `I`), in lexicographic
    /// component order.
    pub fn elements_of(&self, i: IndexSet) -> Vec<GElem> {
        let mut out = vec![self.identity()];
        for k in 0..self.n() {
            if !i.contains(k + 1) {
                continue;
            }
            let mut next = Vec::with_capacity(out.len() * self.factors[k].order());
            for base in &out {
                for e in 0..self.factors[k].order() {
                    let mut v = base.clone();
                    v.0[k] = e;
                    next.push(v);
                }
            }
            out = next;
        }
        out
    }

    pub fn order_of(&self, i: IndexSet) -> usize {
        i.indices().iter().map(|&k| self.factors[k - 1].order()).product()
    }

    /// Flatten the full product into a single table group, together with the
    /// element list in `elements_of(full)` order.
    pub fn flatten(&self) -> (FiniteGroup, Vec<GElem>) {
        let full = IndexSet::full(self.n());
        let elems = self.elements_of(full);
        let index = |g: &GElem| elems.iter().position(|h| h == g).unwrap();
        let n = elems.len();
        let mult = (0..n)
            .map(|a| (0..n).map(|b| index(&self.mul(&elems[a], &elems[b]))).collect())
            .collect();
        let inv = (0..n).map(|a| index(&self.invert(&elems[a]))).collect();
        let id = index(&self.identity());
        let g = FiniteGroup {
            name: "G".to_string(),
            elements: elems.iter().map(|e| format!("{e:?}")).collect(),
            mult,
            inv,
            id,
        };
        (g, elems)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z2xz3() -> ProductGroup {
        ProductGroup::new(vec![FiniteGroup::cyclic("Z2", 2), FiniteGroup::cyclic("Z3", 3)])
    }

    #[test]
    fn restrict_componentwise() {
        let g = z2xz3();
        // (sigma, e) restricted to {1} keeps sigma.
        let a = GElem(vec![1, 0]);
        assert_eq!(g.restrict(&a, IndexSet::singleton(1)), a);
        // Identity restricts to identity on any I.
        let full = IndexSet::full(2);
        assert_eq!(g.restrict(&g.identity(), full), g.identity());
        assert!(g
            .restrict_checked(&a, IndexSet::singleton(1), full)
            .is_err());
    }

    #[test]
    fn restrict_is_homomorphism_on_z2xz3() {
        // Exhaustive enumeration oracle over all pairs in Z/2 x Z/3.
        let g = z2xz3();
        let full = IndexSet::full(2);
        let i = IndexSet::singleton(2);
        for a in g.elements_of(full) {
            for b in g.elements_of(full) {
                let lhs = g.restrict(&g.mul(&a, &b), i);
                let rhs = g.mul(&g.restrict(&a, i), &g.restrict(&b, i));
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn restrict_is_functorial() {
        let g = ProductGroup::new(vec![
            FiniteGroup::cyclic("Z2", 2),
            FiniteGroup::cyclic("Z2", 2),
            FiniteGroup::cyclic("Z3", 3),
        ]);
        let k = IndexSet::full(3);
        let j = IndexSet::from_indices(&[1, 3]);
        let i = IndexSet::singleton(3);
        for a in g.elements_of(k) {
            assert_eq!(g.restrict(&g.restrict(&a, j), i), g.restrict(&a, i));
        }
    }

    #[test]
    fn meet_join_cases() {
        let a = IndexSet::singleton(1);
        let b = IndexSet::from_indices(&[1, 2]);
        assert_eq!(a.meet_join(b), (true, a, b));
        // Non-nested pairs have empty meet and join.
        let c = IndexSet::singleton(2);
        assert_eq!(a.meet_join(c), (false, IndexSet::EMPTY, IndexSet::EMPTY));
        assert_eq!(b.meet_join(b), (true, b, b));
    }

    #[test]
    fn group_validators() {
        assert!(FiniteGroup::cyclic("Z4", 4).validate().passed());
        assert!(FiniteGroup::klein("V4").validate().passed());
        let mut broken = FiniteGroup::cyclic("Z3", 3);
        broken.mult[1][1] = 1; // r*r = r breaks associativity/inverse structure
        assert!(!broken.validate().passed());
    }

    #[test]
    fn subgroup_and_hom_enumeration() {
        let z4 = FiniteGroup::cyclic("Z4", 4);
        let subs = z4.subgroups();
        assert_eq!(subs.len(), 3); // trivial, {0,2}, all
        let z2 = FiniteGroup::cyclic("Z2", 2);
        let homs = z2.injective_homs(&z4);
        assert_eq!(homs.len(), 1); // 1 -> 2
        assert_eq!(homs[0], vec![0, 2]);
        assert_eq!(z2.injective_homs(&FiniteGroup::klein("V4")).len(), 3);
    }
}

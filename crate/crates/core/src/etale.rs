//! Etale seed data: the tuples `(G_i, V_J, Vt_IJ, rho_IJ)` and the
//! exhaustive validation of their axioms.
//!
//! `V_J` is a finite `G_J`-set for each nonempty `J`, stored with one action
//! table per factor group (the factor actions must commute, which is part of
//! validation). For `I` contained in `J`, `Vt_IJ` is a subset of `V_J` and
//! `rho_IJ : Vt_IJ -> V_I` the projection. The discrete model reads every
//! closure as the identity, so the separation axioms become plain
//! disjointness.

use crate::group::{FiniteGroup, GElem, IndexSet, ProductGroup};
use crate::report::Report;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EtaleError {
    #[error("candidate index sets for element {0} of V_{1} do not form a chain")]
    NotNested(String, IndexSet),
    #[error("invalid etale data: {0}")]
    Invalid(String),
}

/// One finite `G_J`-set.
#[derive(Clone, Debug)]
pub struct VSpace {
    pub elems: Vec<String>,
    /// Per chart index `i` in `J`: table `[g in G_i][x] -> g*x`.
    pub actions: BTreeMap<usize, Vec<Vec<usize>>>,
}

impl VSpace {
    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.elems.iter().position(|e| e == label)
    }
}

/// One overlap `Vt_IJ` inside `V_J`, with the projection to `V_I`.
#[derive(Clone, Debug)]
pub struct Overlap {
    /// Element indices into `V_J`, sorted.
    pub elems: Vec<usize>,
    /// `rho_IJ` as a map on those indices, same order as `elems`.
    pub rho: Vec<usize>,
}

impl Overlap {
    pub fn contains(&self, x: usize) -> bool {
        self.elems.binary_search(&x).is_ok()
    }

    pub fn rho_of(&self, x: usize) -> Option<usize> {
        self.elems.binary_search(&x).ok().map(|k| self.rho[k])
    }
}

/// The seed for the whole pipeline.
#[derive(Clone, Debug)]
pub struct EtaleDataV {
    pub n: usize,
    pub group: ProductGroup,
    /// `V_J` for each nonempty `J`; absent keys mean the empty space.
    pub spaces: BTreeMap<IndexSet, VSpace>,
    /// `Vt_IJ` for `I` strictly contained in `J` (`Vt_II = V_I` is implicit).
    pub overlaps: BTreeMap<(IndexSet, IndexSet), Overlap>,
}

impl EtaleDataV {
    pub fn new(groups: Vec<FiniteGroup>) -> Self {
        EtaleDataV {
            n: groups.len(),
            group: ProductGroup::new(groups),
            spaces: BTreeMap::new(),
            overlaps: BTreeMap::new(),
        }
    }

    pub fn space(&self, j: IndexSet) -> Option<&VSpace> {
        self.spaces.get(&j)
    }

    pub fn space_len(&self, j: IndexSet) -> usize {
        self.spaces.get(&j).map_or(0, VSpace::len)
    }

    /// `g * x` in `V_J`, applying the commuting factor actions in chart
    /// order.
    pub fn act(&self, j: IndexSet, g: &GElem, x: usize) -> usize {
        let sp = &self.spaces[&j];
        let mut y = x;
        for i in j.indices() {
            if let Some(tbl) = sp.actions.get(&i) {
                y = tbl[g.0[i - 1]][y];
            }
        }
        y
    }

    /// Elements of `Vt_IJ` (indices into `V_J`); `I = J` gives all of `V_J`.
    pub fn overlap_elems(&self, i: IndexSet, j: IndexSet) -> Vec<usize> {
        if i == j {
            return (0..self.space_len(j)).collect();
        }
        self.overlaps
            .get(&(i, j))
            .map_or_else(Vec::new, |o| o.elems.clone())
    }

    pub fn in_overlap(&self, i: IndexSet, j: IndexSet, x: usize) -> bool {
        if i == j {
            return x < self.space_len(j);
        }
        self.overlaps.get(&(i, j)).is_some_and(|o| o.contains(x))
    }

    /// `rho_IJ(x)` for `x` in `Vt_IJ`.
    pub fn rho(&self, i: IndexSet, j: IndexSet, x: usize) -> Option<usize> {
        if i == j {
            return (x < self.space_len(j)).then_some(x);
        }
        self.overlaps.get(&(i, j)).and_then(|o| o.rho_of(x))
    }

    pub fn elem_label(&self, j: IndexSet, x: usize) -> String {
        self.spaces
            .get(&j)
            .map_or_else(|| format!("?{x}"), |sp| sp.elems[x].clone())
    }

    pub fn index_sets(&self) -> Vec<IndexSet> {
        IndexSet::all_nonempty(self.n)
    }

    /// The unique minimal `H` with `x` in `Vt_HJ`; the candidate set must be
    /// a chain (guaranteed by separation for valid data).
    pub fn h_min(&self, j: IndexSet, x: usize) -> Result<IndexSet, EtaleError> {
        let mut candidates: Vec<IndexSet> = self
            .index_sets()
            .into_iter()
            .filter(|&h| h.subset_of(j) && self.in_overlap(h, j, x))
            .collect();
        candidates.sort_by_key(|h| h.len());
        for w in candidates.windows(2) {
            if !w[0].subset_of(w[1]) {
                return Err(EtaleError::NotNested(self.elem_label(j, x), j));
            }
        }
        Ok(*candidates.first().expect("x is in Vt_JJ = V_J"))
    }

    /// Per-axiom validation with minimal witnesses; all checks exhaustive.
    pub fn validate(&self) -> Report {
        let mut rep = Report::new();
        let sets = self.index_sets();

        for (k, g) in self.group.factors.iter().enumerate() {
            let grep = g.validate();
            match grep.first_failure() {
                None => rep.pass(&format!("group-{}", k + 1)),
                Some(f) => rep.fail(
                    &format!("group-{}", k + 1),
                    format!("{}: {}", f.name, f.witness.clone().unwrap_or_default()),
                ),
            }
        }

        // Factor actions: valid left actions that commute pairwise.
        let mut actw = None;
        'act: for &j in &sets {
            let Some(sp) = self.spaces.get(&j) else { continue };
            for i in j.indices() {
                let Some(tbl) = sp.actions.get(&i) else {
                    actw = Some(format!("V_{j} missing action table for factor {i}"));
                    break 'act;
                };
                let g = &self.group.factors[i - 1];
                if tbl.len() != g.order() || tbl.iter().any(|r| r.len() != sp.len()) {
                    actw = Some(format!("V_{j} action table for factor {i} has wrong shape"));
                    break 'act;
                }
                for x in 0..sp.len() {
                    if tbl[g.id][x] != x {
                        actw = Some(format!("identity of G_{i} moves {} in V_{j}", sp.elems[x]));
                        break 'act;
                    }
                }
                for a in 0..g.order() {
                    for b in 0..g.order() {
                        for x in 0..sp.len() {
                            if tbl[g.mul(a, b)][x] != tbl[a][tbl[b][x]] {
                                actw = Some(format!(
                                    "action law fails in V_{j} for factor {i} at {}",
                                    sp.elems[x]
                                ));
                                break 'act;
                            }
                        }
                    }
                }
            }
            // Commutativity across factors.
            let idx = j.indices();
            for (a, &i1) in idx.iter().enumerate() {
                for &i2 in &idx[a + 1..] {
                    let (t1, t2) = (&sp.actions[&i1], &sp.actions[&i2]);
                    for r1 in t1 {
                        for r2 in t2 {
                            for x in 0..sp.len() {
                                if r1[r2[x]] != r2[r1[x]] {
                                    actw = Some(format!(
                                        "factor actions {i1},{i2} do not commute on {} in V_{j}",
                                        sp.elems[x]
                                    ));
                                    break 'act;
                                }
                            }
                        }
                    }
                }
            }
        }
        rep.check("factor-actions", actw);

        // Overlap bookkeeping: indices sorted and in range, rho into V_I.
        let mut shape = None;
        for (&(i, j), o) in &self.overlaps {
            let ok = i.subset_of(j)
                && i != j
                && o.elems.windows(2).all(|w| w[0] < w[1])
                && o.elems.iter().all(|&x| x < self.space_len(j))
                && o.rho.len() == o.elems.len()
                && o.rho.iter().all(|&y| y < self.space_len(i));
            if !ok {
                shape = Some(format!("overlap Vt({i} in {j}) malformed"));
                break;
            }
        }
        rep.check("overlap-shape", shape);
        if !rep.passed() {
            return rep;
        }

        // (identity) Vt_II = V_I with rho_II = id is structural here; record
        // it so the report lists every axiom.
        rep.pass_note("identity-axiom", "Vt_II = V_I and rho_II = id by representation");

        // (invariance) Vt_IJ is G_J-invariant.
        let mut invw = None;
        'inv: for (&(i, j), o) in &self.overlaps {
            for &x in &o.elems {
                for g in self.group.elements_of(j) {
                    if !o.contains(self.act(j, &g, x)) {
                        invw = Some(format!(
                            "Vt({i} in {j}) not invariant at {}",
                            self.elem_label(j, x)
                        ));
                        break 'inv;
                    }
                }
            }
        }
        rep.check("overlap-invariance", invw);

        // (freeness) G_{J \ I} acts freely on Vt_IJ.
        let mut freew = None;
        'free: for (&(i, j), o) in &self.overlaps {
            let comp = j.minus(i);
            for g in self.group.elements_of(comp) {
                if g == self.group.identity() {
                    continue;
                }
                for &x in &o.elems {
                    if self.act(j, &g, x) == x {
                        freew = Some(format!(
                            "G_{comp} fixes {} in Vt({i} in {j})",
                            self.elem_label(j, x)
                        ));
                        break 'free;
                    }
                }
            }
        }
        rep.check("freeness", freew);

        // (quotient-injection) rho_IJ is constant on G_{J\I}-orbits and the
        // induced map on orbits is injective.
        let mut qw = None;
        'quot: for (&(i, j), o) in &self.overlaps {
            let comp = j.minus(i);
            let comp_elems = self.group.elements_of(comp);
            for &x in &o.elems {
                let rx = o.rho_of(x).unwrap();
                for g in &comp_elems {
                    let gx = self.act(j, g, x);
                    if o.rho_of(gx) != Some(rx) {
                        qw = Some(format!(
                            "rho({i} in {j}) not constant on the orbit of {}",
                            self.elem_label(j, x)
                        ));
                        break 'quot;
                    }
                }
            }
            for &x in &o.elems {
                for &y in &o.elems {
                    if o.rho_of(x) == o.rho_of(y)
                        && !comp_elems.iter().any(|g| self.act(j, g, x) == y)
                    {
                        qw = Some(format!(
                            "rho({i} in {j}) identifies {} and {} across orbits",
                            self.elem_label(j, x),
                            self.elem_label(j, y)
                        ));
                        break 'quot;
                    }
                }
            }
        }
        rep.check("quotient-injection", qw);

        // (separation-1) images V_HI and V_HJ in V_H are disjoint unless
        // I, J are nested.
        let mut sep1 = None;
        'sep1: for &h in &sets {
            for &i in &sets {
                for &j in &sets {
                    if i >= j || !h.subset_of(i) || !h.subset_of(j) || i.nested(j) {
                        continue;
                    }
                    let vhi: Vec<usize> = self
                        .overlap_elems(h, i)
                        .iter()
                        .filter_map(|&x| self.rho(h, i, x))
                        .collect();
                    let vhj: Vec<usize> = self
                        .overlap_elems(h, j)
                        .iter()
                        .filter_map(|&x| self.rho(h, j, x))
                        .collect();
                    if let Some(z) = vhi.iter().find(|z| vhj.contains(z)) {
                        sep1 = Some(format!(
                            "V({h} in {i}) and V({h} in {j}) meet at {}",
                            self.elem_label(h, *z)
                        ));
                        break 'sep1;
                    }
                }
            }
        }
        rep.check("separation-1", sep1);

        // (separation-2) Vt_IJ and Vt_HJ are disjoint unless H, I nested.
        let mut sep2 = None;
        'sep2: for &j in &sets {
            for &h in &sets {
                for &i in &sets {
                    if h >= i || !h.subset_of(j) || !i.subset_of(j) || h.nested(i) {
                        continue;
                    }
                    let vi = self.overlap_elems(i, j);
                    for &x in &self.overlap_elems(h, j) {
                        if vi.contains(&x) {
                            sep2 = Some(format!(
                                "Vt({h} in {j}) and Vt({i} in {j}) meet at {}",
                                self.elem_label(j, x)
                            ));
                            break 'sep2;
                        }
                    }
                }
            }
        }
        rep.check("separation-2", sep2);

        // (composition) Vt_HJ n Vt_IJ = rho_IJ^-1(Vt_HI n V_IJ) and
        // rho_HJ = rho_HI rho_IJ there, for H < I < J.
        let mut compw = None;
        'comp: for &h in &sets {
            for &i in &sets {
                for &j in &sets {
                    if !(h.subset_of(i) && i.subset_of(j)) || h == i || i == j {
                        continue;
                    }
                    for &x in &self.overlap_elems(i, j) {
                        let rx = self.rho(i, j, x).unwrap();
                        let lhs = self.in_overlap(h, j, x);
                        let rhs = self.in_overlap(h, i, rx);
                        if lhs != rhs {
                            compw = Some(format!(
                                "membership mismatch for {} in chain {h} < {i} < {j}",
                                self.elem_label(j, x)
                            ));
                            break 'comp;
                        }
                        if lhs && self.rho(h, j, x) != self.rho(h, i, rx) {
                            compw = Some(format!(
                                "rho({h} in {j}) != rho({h} in {i}) rho({i} in {j}) at {}",
                                self.elem_label(j, x)
                            ));
                            break 'comp;
                        }
                    }
                }
            }
        }
        rep.check("composition", compw);

        // (equivariance) rho_IJ(g*y) = (g|_I) * rho_IJ(y).
        let mut eqw = None;
        'eq: for (&(i, j), o) in &self.overlaps {
            for &x in &o.elems {
                for g in self.group.elements_of(j) {
                    let lhs = o.rho_of(self.act(j, &g, x));
                    let rhs = self
                        .rho(i, j, x)
                        .map(|rx| self.act(i, &self.group.restrict(&g, i), rx));
                    if lhs != rhs {
                        eqw = Some(format!(
                            "rho({i} in {j}) not equivariant at {} under {g:?}",
                            self.elem_label(j, x)
                        ));
                        break 'eq;
                    }
                }
            }
        }
        rep.check("equivariance", eqw);

        rep.pass_note("closed-graph", "vacuous in the discrete model (closure = identity)");

        let empties: Vec<String> = self
            .overlaps
            .iter()
            .filter(|(_, o)| o.elems.is_empty())
            .map(|(&(i, j), _)| format!("Vt({i} in {j})"))
            .collect();
        if !empties.is_empty() {
            rep.pass_note(
                "empty-overlaps",
                &format!("empty but permitted: {}", empties.join(", ")),
            );
        }
        rep
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn fix_triv_validates() {
        let d = fixtures::fix_triv();
        let rep = d.validate();
        assert!(rep.passed(), "{:?}", rep.first_failure());
    }

    #[test]
    fn fix_a_validates() {
        let d = fixtures::fix_a();
        let rep = d.validate();
        assert!(rep.passed(), "{:?}", rep.first_failure());
    }

    #[test]
    fn fix_a_with_bad_overlap_fails_separation_2() {
        // Changing Vt_{2,12} to {u, x} makes it meet Vt_{1,12} at u.
        let mut d = fixtures::fix_a();
        let i2 = IndexSet::singleton(2);
        let j12 = IndexSet::from_indices(&[1, 2]);
        let v12 = d.spaces[&j12].clone();
        let u = v12.index_of("u").unwrap();
        let x = v12.index_of("x").unwrap();
        let mut elems = vec![u, x];
        elems.sort_unstable();
        d.overlaps.insert((i2, j12), Overlap { elems, rho: vec![0, 0] });
        let rep = d.validate();
        let fails: Vec<&str> = rep
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        assert!(fails.contains(&"separation-2"), "failed: {fails:?}");
        let sep2 = rep.checks.iter().find(|c| c.name == "separation-2").unwrap();
        assert!(sep2.witness.as_ref().unwrap().contains('u'));
    }

    #[test]
    fn h_min_on_fix_a() {
        let d = fixtures::fix_a();
        let j12 = IndexSet::from_indices(&[1, 2]);
        let v12 = &d.spaces[&j12];
        let u = v12.index_of("u").unwrap();
        let w = v12.index_of("w").unwrap();
        assert_eq!(d.h_min(j12, u).unwrap(), IndexSet::singleton(1));
        assert_eq!(d.h_min(j12, w).unwrap(), IndexSet::singleton(2));
        // Elements not in any proper overlap have H = the full set.
        let i1 = IndexSet::singleton(1);
        let a = d.spaces[&i1].index_of("a").unwrap();
        assert_eq!(d.h_min(i1, a).unwrap(), i1);
    }

    #[test]
    fn h_min_is_g_invariant() {
        let d = fixtures::fix_a();
        for j in d.index_sets() {
            for x in 0..d.space_len(j) {
                let h = d.h_min(j, x).unwrap();
                for g in d.group.elements_of(j) {
                    assert_eq!(d.h_min(j, d.act(j, &g, x)).unwrap(), h);
                }
            }
        }
    }

    #[test]
    fn rho_restricted_to_orbit_is_bijection_onto_image_point() {
        let d = fixtures::fix_a();
        for (&(i, j), o) in &d.overlaps {
            let comp = j.minus(i);
            for &x in &o.elems {
                let orbit: std::collections::BTreeSet<usize> = d
                    .group
                    .elements_of(comp)
                    .iter()
                    .map(|g| d.act(j, g, x))
                    .collect();
                // Free action: orbit size = |G_{J\I}|, all mapping to one point.
                assert_eq!(orbit.len(), d.group.order_of(comp));
                let images: std::collections::BTreeSet<usize> =
                    orbit.iter().map(|&y| o.rho_of(y).unwrap()).collect();
                assert_eq!(images.len(), 1);
            }
        }
    }
}

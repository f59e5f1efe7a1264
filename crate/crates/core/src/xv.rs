//! The reduced groupoid built from etale seed data: objects are the disjoint
//! union of the `V_I`, morphisms are tuples `(I, J, y, g)` with `y` in
//! `Vt_{(I^J)(IvJ)}` and `g` in `G_{I^J}`, composed by a six-case rule.
//!
//! Composition is computed by the rule on every call and never tabulated;
//! the rule itself is the artifact under test. Alongside the groupoid this
//! module builds the poset `Q`, the pruned completion (the subgroupoid whose
//! group parts avoid `H_y`), the `E`-parameter bundle groupoid, and the
//! functor-extension from the upward subcategory.

use crate::cat::{
    self, check_functor, complete_nonsingular, mor_by_pair, realize, Cat, Functor, TableCategory,
};
use crate::etale::EtaleDataV;
use crate::group::{GElem, IndexSet};
use crate::qlin::QMatrix;
use crate::qlin::QVec;
use crate::report::Report;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum XvError {
    #[error("morphisms are not composable: target {0} != source {1}")]
    NotComposable(String, String),
    #[error("composition failure: {0}")]
    CompositionFailure(String),
    #[error("functoriality failure at {0}")]
    FunctorialityFailure(String),
    #[error("{0}")]
    Invalid(String),
}

/// A morphism `(I, J, y, g)`; `y` indexes into `V_{I v J}`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct XvMorphism {
    pub src_set: IndexSet,
    pub tgt_set: IndexSet,
    pub y: usize,
    pub g: GElem,
}

/// The reduced groupoid over `sqcup_I V_I`.
#[derive(Clone)]
pub struct XvGroupoid {
    pub data: EtaleDataV,
    pub objects: Vec<(IndexSet, usize)>,
    pub obj_lookup: BTreeMap<(IndexSet, usize), usize>,
    pub morphisms: Vec<XvMorphism>,
    mor_lookup: std::collections::HashMap<(u32, u32, u64, u64), usize>,
    /// Strides for packing product-group elements into a single word.
    strides: Vec<u64>,
    src_of: Vec<usize>,
    tgt_of: Vec<usize>,
    id_of: Vec<usize>,
}

impl XvGroupoid {
    /// Enumerates objects and morphisms; composition stays rule-computed.
    pub fn build(data: &EtaleDataV) -> XvGroupoid {
        let sets = data.index_sets();
        let mut objects = Vec::new();
        for &i in &sets {
            for x in 0..data.space_len(i) {
                objects.push((i, x));
            }
        }
        let obj_lookup: BTreeMap<(IndexSet, usize), usize> =
            objects.iter().enumerate().map(|(k, &o)| (o, k)).collect();
        let mut morphisms = Vec::new();
        for &i in &sets {
            for &j in &sets {
                let (nested, lo, hi) = i.meet_join(j);
                if !nested {
                    continue;
                }
                for y in data.overlap_elems(lo, hi) {
                    for g in data.group.elements_of(lo) {
                        morphisms.push(XvMorphism {
                            src_set: i,
                            tgt_set: j,
                            y,
                            g,
                        });
                    }
                }
            }
        }
        let strides = {
            let mut acc: u64 = 1;
            data.group
                .factors
                .iter()
                .map(|f| {
                    let s = acc;
                    acc = acc.saturating_mul(f.order() as u64);
                    s
                })
                .collect::<Vec<_>>()
        };
        let pack = |g: &GElem| -> u64 {
            g.0.iter()
                .zip(&strides)
                .map(|(&c, &s)| (c as u64).wrapping_mul(s))
                .sum()
        };
        let mor_lookup: std::collections::HashMap<(u32, u32, u64, u64), usize> = morphisms
            .iter()
            .enumerate()
            .map(|(k, m)| ((m.src_set.0, m.tgt_set.0, m.y as u64, pack(&m.g)), k))
            .collect();
        let mut xv = XvGroupoid {
            data: data.clone(),
            objects,
            obj_lookup,
            morphisms,
            mor_lookup,
            strides,
            src_of: Vec::new(),
            tgt_of: Vec::new(),
            id_of: Vec::new(),
        };
        xv.src_of = (0..xv.morphisms.len())
            .map(|k| xv.obj_lookup[&xv.mor_source(&xv.morphisms[k])])
            .collect();
        xv.tgt_of = (0..xv.morphisms.len())
            .map(|k| xv.obj_lookup[&xv.mor_target(&xv.morphisms[k])])
            .collect();
        xv.id_of = xv
            .objects
            .iter()
            .map(|&(i, x)| {
                xv.mor_index(&XvMorphism {
                    src_set: i,
                    tgt_set: i,
                    y: x,
                    g: xv.data.group.identity(),
                })
                .expect("identity morphism exists")
            })
            .collect();
        xv
    }

    fn pack(&self, g: &GElem) -> u64 {
        g.0.iter()
            .zip(&self.strides)
            .map(|(&c, &s)| (c as u64).wrapping_mul(s))
            .sum()
    }

    /// `rho_I(y)` for `y` in `V_hi` and `I` either `lo` or `hi`.
    fn project(&self, to: IndexSet, hi: IndexSet, y: usize) -> Option<usize> {
        self.data.rho(to, hi, y)
    }

    pub fn mor_source(&self, m: &XvMorphism) -> (IndexSet, usize) {
        let (_, _, hi) = m.src_set.meet_join(m.tgt_set);
        let ry = self
            .project(m.src_set, hi, m.y)
            .expect("morphism record is well formed");
        let ginv = self.data.group.invert(&m.g);
        (m.src_set, self.data.act(m.src_set, &ginv, ry))
    }

    pub fn mor_target(&self, m: &XvMorphism) -> (IndexSet, usize) {
        let (_, _, hi) = m.src_set.meet_join(m.tgt_set);
        let ry = self
            .project(m.tgt_set, hi, m.y)
            .expect("morphism record is well formed");
        (m.tgt_set, ry)
    }

    pub fn mor_inverse(&self, m: &XvMorphism) -> XvMorphism {
        let (_, _, hi) = m.src_set.meet_join(m.tgt_set);
        let ginv = self.data.group.invert(&m.g);
        XvMorphism {
            src_set: m.tgt_set,
            tgt_set: m.src_set,
            y: self.data.act(hi, &ginv, m.y),
            g: ginv,
        }
    }

    pub fn mor_key(&self, m: &XvMorphism) -> String {
        let (_, _, hi) = m.src_set.meet_join(m.tgt_set);
        format!(
            "({},{},{},{:?})",
            m.src_set,
            m.tgt_set,
            self.data.elem_label(hi, m.y),
            m.g
        )
    }

    /// The six-case composition rule. `debug_all_cases` additionally
    /// evaluates every applicable case and insists they agree.
    pub fn compose_xv(
        &self,
        m1: &XvMorphism,
        m2: &XvMorphism,
    ) -> Result<XvMorphism, XvError> {
        self.compose_inner(m1, m2, false)
    }

    /// All applicable case branches evaluated independently, as
    /// `(case index 1..=6, result)`.
    pub fn compose_cases(
        &self,
        m1: &XvMorphism,
        m2: &XvMorphism,
    ) -> Result<Vec<(usize, XvMorphism)>, XvError> {
        self.check_composable(m1, m2)?;
        let (i, j, k) = (m1.src_set, m1.tgt_set, m2.tgt_set);
        let mut out = Vec::new();
        for case in 1..=6 {
            let applies = match case {
                1 => i.subset_of(k) && k.subset_of(j),
                2 => k.subset_of(i) && i.subset_of(j),
                3 => i.subset_of(j) && j.subset_of(k),
                4 => j.subset_of(i) && i.subset_of(k),
                5 => k.subset_of(j) && j.subset_of(i),
                6 => j.subset_of(k) && k.subset_of(i),
                _ => unreachable!(),
            };
            if applies {
                out.push((case, self.compose_case(m1, m2, case)?));
            }
        }
        if out.is_empty() {
            return Err(XvError::CompositionFailure(format!(
                "no case applies to ({}, {})",
                self.mor_key(m1),
                self.mor_key(m2)
            )));
        }
        Ok(out)
    }

    fn check_composable(&self, m1: &XvMorphism, m2: &XvMorphism) -> Result<(), XvError> {
        if m1.tgt_set != m2.src_set || self.mor_target(m1) != self.mor_source(m2) {
            return Err(XvError::NotComposable(
                self.mor_key(m1),
                self.mor_key(m2),
            ));
        }
        if !m1.src_set.nested(m2.tgt_set) {
            return Err(XvError::CompositionFailure(format!(
                "{} and {} are composable but {} !~ {}",
                self.mor_key(m1),
                self.mor_key(m2),
                m1.src_set,
                m2.tgt_set
            )));
        }
        Ok(())
    }

    fn compose_inner(
        &self,
        m1: &XvMorphism,
        m2: &XvMorphism,
        all_cases: bool,
    ) -> Result<XvMorphism, XvError> {
        if all_cases {
            let results = self.compose_cases(m1, m2)?;
            let first = results[0].1.clone();
            for (case, r) in &results[1..] {
                if *r != first {
                    return Err(XvError::CompositionFailure(format!(
                        "case {} disagrees with case {} on ({}, {})",
                        case,
                        results[0].0,
                        self.mor_key(m1),
                        self.mor_key(m2)
                    )));
                }
            }
            return Ok(first);
        }
        self.check_composable(m1, m2)?;
        let (i, j, k) = (m1.src_set, m1.tgt_set, m2.tgt_set);
        let case = if i.subset_of(k) && k.subset_of(j) {
            1
        } else if k.subset_of(i) && i.subset_of(j) {
            2
        } else if i.subset_of(j) && j.subset_of(k) {
            3
        } else if j.subset_of(i) && i.subset_of(k) {
            4
        } else if k.subset_of(j) && j.subset_of(i) {
            5
        } else if j.subset_of(k) && k.subset_of(i) {
            6
        } else {
            return Err(XvError::CompositionFailure(format!(
                "{}, {}, {} are composable but not a chain",
                i, j, k
            )));
        };
        self.compose_case(m1, m2, case)
    }

    /// One branch of the rule. The tuple `(v, kk)` lives in
    /// `V_M x G_{I^K}` with `M = I v J v K`; the result is
    /// `(I, K, rho_{IvK}(v), kk * (h g)|_{I^K})`.
    fn compose_case(
        &self,
        m1: &XvMorphism,
        m2: &XvMorphism,
        case: usize,
    ) -> Result<XvMorphism, XvError> {
        let grp = &self.data.group;
        let (i, j, k) = (m1.src_set, m1.tgt_set, m2.tgt_set);
        let (x, g) = (m1.y, &m1.g);
        let (y, h) = (m2.y, &m2.g);
        let m = i.union(j).union(k);
        let ik_meet = i.intersect(k);
        let ik_join = i.union(k);
        let fail = |msg: String| XvError::CompositionFailure(msg);

        let (v, kk): (usize, GElem) = match case {
            // I < K < J: (v, kk) = (y, id); y in V_J = V_M.
            1 => (y, grp.identity()),
            // K < I < J: (v, kk) = ((g|_{I\K})^-1 * y, id); y in V_J.
            2 => {
                let gr = grp.invert(&grp.restrict(g, i.minus(k)));
                (self.data.act(m, &gr, y), grp.identity())
            }
            // I < J < K: (v, kk) = (y, id); y in V_K = V_M.
            3 => (y, grp.identity()),
            // J < I < K: kk in G_{I\J} unique with rho_I(y) = h * kk * x.
            4 => {
                let ry = self.data.rho(i, k, y).ok_or_else(|| {
                    fail(format!(
                        "case 4: {} is not in Vt({} in {})",
                        self.data.elem_label(k, y),
                        i,
                        k
                    ))
                })?;
                let sols: Vec<GElem> = grp
                    .elements_of(i.minus(j))
                    .into_iter()
                    .filter(|kk| {
                        let kx = self.data.act(i, kk, x);
                        self.data.act(i, h, kx) == ry
                    })
                    .collect();
                if sols.len() != 1 {
                    return Err(fail(format!(
                        "case 4: {} solutions for k in G_{}",
                        sols.len(),
                        i.minus(j)
                    )));
                }
                (y, sols.into_iter().next().unwrap())
            }
            // K < J < I: (v, kk) = ((g|_{J\K})^-1 h * x, id); x in V_I = V_M.
            5 => {
                let gr = grp.mul(&grp.invert(&grp.restrict(g, j.minus(k))), h);
                (self.data.act(m, &gr, x), grp.identity())
            }
            // J < K < I: kk in G_{K\J} unique with y = h * kk * rho_K(x).
            6 => {
                let rx = self.data.rho(k, i, x).ok_or_else(|| {
                    fail(format!(
                        "case 6: {} is not in Vt({} in {})",
                        self.data.elem_label(i, x),
                        k,
                        i
                    ))
                })?;
                let sols: Vec<GElem> = grp
                    .elements_of(k.minus(j))
                    .into_iter()
                    .filter(|kk| {
                        let kx = self.data.act(k, kk, rx);
                        self.data.act(k, h, kx) == y
                    })
                    .collect();
                if sols.len() != 1 {
                    return Err(fail(format!(
                        "case 6: {} solutions for k in G_{}",
                        sols.len(),
                        k.minus(j)
                    )));
                }
                let kk = sols.into_iter().next().unwrap();
                let kh = grp.mul(&kk, h);
                (self.data.act(m, &kh, x), kk)
            }
            _ => unreachable!(),
        };

        let z = if ik_join == m {
            v
        } else {
            self.data.rho(ik_join, m, v).ok_or_else(|| {
                fail(format!(
                    "composite element {} is not in Vt({} in {})",
                    self.data.elem_label(m, v),
                    ik_join,
                    m
                ))
            })?
        };
        if !self.data.in_overlap(ik_meet, ik_join, z) {
            return Err(fail(format!(
                "composite element {} is not in Vt({} in {})",
                self.data.elem_label(ik_join, z),
                ik_meet,
                ik_join
            )));
        }
        let hg = grp.restrict(&grp.mul(h, g), ik_meet);
        Ok(XvMorphism {
            src_set: i,
            tgt_set: k,
            y: z,
            g: grp.mul(&kk, &hg),
        })
    }

    pub fn mor_index(&self, m: &XvMorphism) -> Option<usize> {
        self.mor_lookup
            .get(&(m.src_set.0, m.tgt_set.0, m.y as u64, self.pack(&m.g)))
            .copied()
    }

    /// The inner-action morphism `alpha(g, (I,x)) = (I, I, x, g|_I)`:
    /// `g|_I^-1 * x -> x`.
    pub fn alpha(&self, g: &GElem, obj: usize) -> usize {
        let (i, x) = self.objects[obj];
        let gi = self.data.group.restrict(g, i);
        self.mor_index(&XvMorphism {
            src_set: i,
            tgt_set: i,
            y: x,
            g: gi,
        })
        .expect("alpha morphism exists")
    }

    /// Object action `g * (I, x) = (I, g|_I * x)`.
    pub fn act_obj(&self, g: &GElem, obj: usize) -> usize {
        let (i, x) = self.objects[obj];
        let gi = self.data.group.restrict(g, i);
        self.obj_lookup[&(i, self.data.act(i, &gi, x))]
    }

    /// Morphism action
    /// `g * (I,J,y,h) = (I, J, g|_{IvJ} * y, g|_{I^J} h g|_{I^J}^-1)`.
    pub fn act_mor(&self, g: &GElem, m: &XvMorphism) -> XvMorphism {
        let grp = &self.data.group;
        let (_, lo, hi) = m.src_set.meet_join(m.tgt_set);
        let ghi = grp.restrict(g, hi);
        let glo = grp.restrict(g, lo);
        XvMorphism {
            src_set: m.src_set,
            tgt_set: m.tgt_set,
            y: self.data.act(hi, &ghi, m.y),
            g: grp.mul(&grp.mul(&glo, &m.g), &grp.invert(&glo)),
        }
    }

    /// In the pruned completion exactly when `g` lies in
    /// `G_{(I^J) \ H_y}`.
    pub fn in_minus_g(&self, m: &XvMorphism) -> bool {
        let (_, lo, hi) = m.src_set.meet_join(m.tgt_set);
        let h_y = self.data.h_min(hi, m.y).expect("valid data");
        self.data.group.in_subgroup(&m.g, lo.minus(h_y))
    }

    /// `H` of the target element: the minimal index set of `y`.
    pub fn h_of(&self, m: &XvMorphism) -> IndexSet {
        let (_, _, hi) = m.src_set.meet_join(m.tgt_set);
        self.data.h_min(hi, m.y).expect("valid data")
    }

    /// Decomposition `m = alpha(g|_{H_y}) * m'` with `m'` in the pruned
    /// subgroupoid (the group part of `m'` avoids `H_y`).
    pub fn decompose(&self, m: &XvMorphism) -> (GElem, XvMorphism) {
        let grp = &self.data.group;
        let (_, lo, _) = m.src_set.meet_join(m.tgt_set);
        let h_y = self.h_of(m);
        let g_h = grp.restrict(&m.g, lo.intersect(h_y));
        let g_rest = grp.restrict(&m.g, lo.minus(h_y));
        let rest = XvMorphism {
            src_set: m.src_set,
            tgt_set: m.tgt_set,
            y: m.y,
            g: g_rest,
        };
        (g_h, rest)
    }
}

impl Cat for XvGroupoid {
    fn n_objects(&self) -> usize {
        self.objects.len()
    }
    fn n_morphisms(&self) -> usize {
        self.morphisms.len()
    }
    fn source(&self, m: usize) -> usize {
        self.src_of[m]
    }
    fn target(&self, m: usize) -> usize {
        self.tgt_of[m]
    }
    fn identity_of(&self, x: usize) -> usize {
        self.id_of[x]
    }
    fn compose(&self, m1: usize, m2: usize) -> Option<usize> {
        let c = self
            .compose_xv(&self.morphisms[m1], &self.morphisms[m2])
            .ok()?;
        self.mor_index(&c)
    }
    fn inverse(&self, m: usize) -> Option<usize> {
        self.mor_index(&self.mor_inverse(&self.morphisms[m]))
    }
    fn object_key(&self, x: usize) -> String {
        let (i, v) = self.objects[x];
        format!("({},{})", i, self.data.elem_label(i, v))
    }
    fn morphism_key(&self, m: usize) -> String {
        self.mor_key(&self.morphisms[m])
    }
    fn is_groupoid(&self) -> bool {
        true
    }
}

/// Builds the reduced groupoid; validates the seed data first and then runs
/// the full groupoid axiom check (associativity over every composable
/// triple, inverse laws, endpoint consistency).
pub fn build_xv(data: &EtaleDataV) -> Result<XvGroupoid, XvError> {
    let vrep = data.validate();
    if let Some(f) = vrep.first_failure() {
        return Err(XvError::Invalid(format!(
            "{}: {}",
            f.name,
            f.witness.clone().unwrap_or_default()
        )));
    }
    let xv = XvGroupoid::build(data);
    let rep = cat::check_groupoid(&xv);
    if let Some(f) = rep.first_failure() {
        return Err(XvError::Invalid(format!(
            "{}: {}",
            f.name,
            f.witness.clone().unwrap_or_default()
        )));
    }
    Ok(xv)
}

/// Whenever two or more composition cases apply to a composable pair, their
/// outputs must coincide; returns the first disagreement.
pub fn check_case_agreement(xv: &XvGroupoid) -> Option<String> {
    let out = cat::out_index(xv);
    crate::par::find_witness(xv.n_morphisms(), |m1| {
        let t1 = xv.target(m1);
        out[t1].iter().find_map(|&m2| {
            match xv.compose_inner(&xv.morphisms[m1], &xv.morphisms[m2], true) {
                Ok(_) => None,
                Err(e) => Some(e.to_string()),
            }
        })
    })
}

/// The poset `Q`: morphisms are the overlap elements themselves,
/// `(I, J, y) : (I, rho_IJ(y)) -> (J, y)` for `I` contained in `J`.
pub fn build_q(data: &EtaleDataV) -> TableCategory {
    let sets = data.index_sets();
    let mut object_keys = Vec::new();
    let mut obj_lookup = BTreeMap::new();
    for &i in &sets {
        for x in 0..data.space_len(i) {
            obj_lookup.insert((i, x), object_keys.len());
            object_keys.push(format!("({},{})", i, data.elem_label(i, x)));
        }
    }
    let mut morphism_keys = Vec::new();
    let mut recs: Vec<(IndexSet, IndexSet, usize)> = Vec::new();
    let mut src = Vec::new();
    let mut tgt = Vec::new();
    for &i in &sets {
        for &j in &sets {
            if !i.subset_of(j) {
                continue;
            }
            for y in data.overlap_elems(i, j) {
                morphism_keys.push(format!("({},{},{})", i, j, data.elem_label(j, y)));
                recs.push((i, j, y));
                src.push(obj_lookup[&(i, data.rho(i, j, y).unwrap())]);
                tgt.push(obj_lookup[&(j, y)]);
            }
        }
    }
    let rec_lookup: BTreeMap<(IndexSet, IndexSet, usize), usize> =
        recs.iter().enumerate().map(|(k, &r)| (r, k)).collect();
    // Identity of (I, x) is the record (I, I, x).
    let mut id_of = vec![0usize; object_keys.len()];
    for (&(i, x), &o) in &obj_lookup {
        id_of[o] = rec_lookup[&(i, i, x)];
    }
    let mut comp = std::collections::HashMap::new();
    for (k1, &(h, i, y)) in recs.iter().enumerate() {
        for (k2, &(i2, j, z)) in recs.iter().enumerate() {
            if i != i2 || data.rho(i2, j, z) != Some(y) {
                continue;
            }
            // (H,I,y) * (I,J,z) = (H,J,z).
            let zz = rec_lookup
                .get(&(h, j, z))
                .copied()
                .expect("composition axiom puts z in Vt_HJ");
            comp.insert((k1, k2), zz);
        }
    }
    TableCategory {
        object_keys,
        morphism_keys,
        src,
        tgt,
        id_of,
        comp,
        inv: None,
    }
}

/// The pruned completion: restriction of the reduced groupoid to morphisms
/// whose group part lies in `G_{(I^J) \ H_y}`, with the induced action of
/// the full product group and the inclusion functor.
pub struct XvMinusG {
    pub cat: TableCategory,
    /// Parent morphism index per pruned morphism.
    pub into_xv: Vec<usize>,
}

pub fn build_xv_minus_g(xv: &XvGroupoid) -> Result<XvMinusG, XvError> {
    let keep: Vec<usize> = (0..xv.n_morphisms())
        .filter(|&m| xv.in_minus_g(&xv.morphisms[m]))
        .collect();
    let pos: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(k, &m)| (m, k)).collect();
    let object_keys: Vec<String> = (0..xv.n_objects()).map(|x| xv.object_key(x)).collect();
    let morphism_keys: Vec<String> = keep.iter().map(|&m| xv.morphism_key(m)).collect();
    let src: Vec<usize> = keep.iter().map(|&m| xv.source(m)).collect();
    let tgt: Vec<usize> = keep.iter().map(|&m| xv.target(m)).collect();
    let id_of: Vec<usize> = (0..xv.n_objects())
        .map(|x| pos[&xv.identity_of(x)])
        .collect();
    let mut comp = std::collections::HashMap::new();
    for (k1, &m1) in keep.iter().enumerate() {
        for (k2, &m2) in keep.iter().enumerate() {
            if xv.target(m1) != xv.source(m2) {
                continue;
            }
            let Some(c) = xv.compose(m1, m2) else {
                return Err(XvError::CompositionFailure(format!(
                    "pruned pair ({}, {}) fails to compose",
                    xv.morphism_key(m1),
                    xv.morphism_key(m2)
                )));
            };
            let Some(&ck) = pos.get(&c) else {
                return Err(XvError::CompositionFailure(format!(
                    "composite of pruned morphisms leaves the subgroupoid at ({}, {})",
                    xv.morphism_key(m1),
                    xv.morphism_key(m2)
                )));
            };
            comp.insert((k1, k2), ck);
        }
    }
    let inv: Vec<usize> = keep.iter().map(|&m| pos[&xv.inverse(m).unwrap()]).collect();
    Ok(XvMinusG {
        cat: TableCategory {
            object_keys,
            morphism_keys,
            src,
            tgt,
            id_of,
            comp,
            inv: Some(inv),
        },
        into_xv: keep,
    })
}

impl XvMinusG {
    pub fn inclusion(&self) -> Functor {
        Functor {
            obj_map: (0..self.cat.n_objects()).collect(),
            mor_map: self.into_xv.clone(),
        }
    }

    /// The action of the full product group: `g * (I,x) = (I, g|_I x)` on
    /// objects and the conjugation formula on morphisms, restricted to the
    /// pruned subgroupoid.
    pub fn g_action(&self, xv: &XvGroupoid, g: &GElem) -> (Vec<usize>, Vec<usize>) {
        let obj: Vec<usize> = (0..self.cat.n_objects()).map(|x| xv.act_obj(g, x)).collect();
        let mor: Vec<usize> = self
            .into_xv
            .iter()
            .map(|&m| {
                let gm = xv.act_mor(g, &xv.morphisms[m]);
                let k = xv.mor_index(&gm).expect("action closes");
                self.into_xv
                    .iter()
                    .position(|&mm| mm == k)
                    .expect("action preserves the pruned subgroupoid")
            })
            .collect();
        (obj, mor)
    }
}

/// Certificate that the pruned completion equals the groupoid completion of
/// the poset `Q`: same objects, same realization, and one morphism per
/// equivalent pair on both sides.
pub fn check_minus_g_is_completion(xv: &XvGroupoid, mg: &XvMinusG) -> Report {
    let mut rep = Report::new();
    let q = build_q(&xv.data);
    let ns = cat::check_category(&mg.cat, true);
    rep.check(
        "minus-g-nonsingular",
        ns.first_failure().map(|f| {
            format!("{}: {}", f.name, f.witness.clone().unwrap_or_default())
        }),
    );
    match complete_nonsingular(&q) {
        Err(e) => rep.fail("q-completion", e.to_string()),
        Ok((qc, _)) => {
            let rq = realize(&qc);
            let rm = realize(&mg.cat);
            rep.check(
                "same-realization",
                (rq.class_of != rm.class_of)
                    .then(|| "class partitions differ".to_string()),
            );
            let pairs_q = mor_by_pair(&qc);
            let pairs_m = mor_by_pair(&mg.cat);
            let mut w = None;
            for x in 0..qc.n_objects() {
                for y in 0..qc.n_objects() {
                    let a = pairs_q.get(&(x, y)).map_or(0, Vec::len);
                    let b = pairs_m.get(&(x, y)).map_or(0, Vec::len);
                    if a != b {
                        w = Some(format!(
                            "Mor({}, {}): completion has {}, pruned groupoid has {}",
                            qc.object_key(x),
                            qc.object_key(y),
                            a,
                            b
                        ));
                    }
                }
            }
            rep.check("same-morphism-counts", w);
        }
    }
    rep
}

/// The quotient identification: `G`-orbits of pruned classes biject with
/// the classes of the full reduced groupoid under the inclusion.
pub fn check_quotient_identification(xv: &XvGroupoid, mg: &XvMinusG) -> Report {
    let mut rep = Report::new();
    let rm = realize(&mg.cat);
    let rx = realize(xv);
    // G acts on pruned classes through the object action.
    let full = IndexSet::full(xv.data.n);
    let mut class_orbit: Vec<usize> = (0..rm.n_classes()).collect();
    for g in xv.data.group.elements_of(full) {
        for x in 0..xv.n_objects() {
            let (a, b) = (rm.class_of[x], rm.class_of[xv.act_obj(&g, x)]);
            // union
            let (ra, rb) = (root(&mut class_orbit, a), root(&mut class_orbit, b));
            if ra != rb {
                let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                class_orbit[hi] = lo;
            }
        }
    }
    let mut orbit_reps: Vec<usize> = (0..rm.n_classes())
        .map(|c| root(&mut class_orbit, c))
        .collect();
    orbit_reps.sort_unstable();
    orbit_reps.dedup();
    rep.check(
        "orbit-count-matches-class-count",
        (orbit_reps.len() != rx.n_classes()).then(|| {
            format!("{} orbits vs {} classes", orbit_reps.len(), rx.n_classes())
        }),
    );
    // The inclusion maps each pruned orbit into a single class, injectively
    // and surjectively.
    let mut image: BTreeMap<usize, usize> = BTreeMap::new();
    let mut wit = None;
    for x in 0..xv.n_objects() {
        let orb = root(&mut class_orbit, rm.class_of[x]);
        let cls = rx.class_of[x];
        if let Some(&prev) = image.get(&orb) {
            if prev != cls {
                wit = Some(format!("orbit of {} hits two classes", xv.object_key(x)));
                break;
            }
        } else {
            image.insert(orb, cls);
        }
    }
    let mut seen: Vec<usize> = image.values().copied().collect();
    seen.sort_unstable();
    seen.dedup();
    if wit.is_none() && (seen.len() != image.len() || seen.len() != rx.n_classes()) {
        wit = Some("orbit-class correspondence is not a bijection".to_string());
    }
    rep.check("quotient-bijection", wit);
    rep
}

fn root(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = x;
    while parent[c] != c {
        let next = parent[c];
        parent[c] = r;
        c = next;
    }
    r
}

/// Extends a functor defined on the upward subcategory (morphisms with
/// `I` contained in `J` only) to the whole reduced groupoid by
/// `phi(m) := phi(m^-1)^-1`, then verifies functoriality exhaustively.
pub fn extend_functor_bv(
    xv: &XvGroupoid,
    obj_map: Vec<usize>,
    up_values: &BTreeMap<usize, usize>,
    target: &(impl Cat + ?Sized),
) -> Result<Functor, XvError> {
    let mor_map: Vec<usize> = (0..xv.n_morphisms())
        .map(|m| {
            let rec = &xv.morphisms[m];
            if rec.src_set.subset_of(rec.tgt_set) {
                up_values[&m]
            } else {
                let minv = xv.mor_index(&xv.mor_inverse(rec)).unwrap();
                target.inverse(up_values[&minv]).expect("target is a groupoid")
            }
        })
        .collect();
    let f = Functor { obj_map, mor_map };
    let rep = check_functor(&f, xv, target);
    if let Some(fail) = rep.first_failure() {
        return Err(XvError::FunctorialityFailure(format!(
            "{}: {}",
            fail.name,
            fail.witness.clone().unwrap_or_default()
        )));
    }
    Ok(f)
}

/// Singleton good-neighbourhood system: in the discrete model `U(x) = {x}`
/// carries the natural isotropy action and the morphism-component maps are
/// injective by construction. Properness is vacuous and noted.
pub fn good_neighbourhoods(xv: &XvGroupoid) -> Report {
    let mut rep = Report::new();
    rep.pass_note("properness", "vacuous at finite scale");
    let wit = (0..xv.n_objects()).find_map(|x| {
        let iso = cat::isotropy(xv, x);
        iso.morphisms
            .iter()
            .any(|&m| xv.source(m) != x || xv.target(m) != x)
            .then(|| xv.object_key(x))
    });
    rep.check("isotropy-invariance-of-singletons", wit);
    rep.pass_note(
        "component-injectivity",
        "every morphism-set component is a singleton in the discrete model",
    );
    rep.pass_note("intersection-stability", "U(x) n U'(x) = {x}");
    rep
}

// ---------------------------------------------------------------------------
// The E-parameter groupoid.
// ---------------------------------------------------------------------------

/// A product representation `E = E_1 x ... x E_N` with a linear `G_i`-action
/// on each factor.
#[derive(Clone, Debug)]
pub struct ESpec {
    pub dims: Vec<usize>,
    /// `reps[i][g]`: the matrix of `g` on `E_{i+1}`.
    pub reps: Vec<Vec<QMatrix>>,
}

impl ESpec {
    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn zero(&self) -> QVec {
        QVec::zeros(self.total_dim())
    }

    /// Blockwise action of a product-group element.
    pub fn act(&self, g: &GElem, e: &QVec) -> QVec {
        let mut out = Vec::with_capacity(self.total_dim());
        let mut off = 0;
        for (i, &d) in self.dims.iter().enumerate() {
            let block = QVec(e.0[off..off + d].to_vec());
            let acted = self.reps[i][g.0[i]].apply(&block);
            out.extend(acted.0);
            off += d;
        }
        QVec(out)
    }

    /// Zero out the factors not in `h` (the projection with kernel
    /// `E_{A \ h}`).
    pub fn project(&self, h: IndexSet, e: &QVec) -> QVec {
        let mut out = e.clone();
        let mut off = 0;
        for (i, &d) in self.dims.iter().enumerate() {
            if !h.contains(i + 1) {
                for k in off..off + d {
                    out.0[k] = crate::qlin::rat_int(0);
                }
            }
            off += d;
        }
        out
    }

    /// Validity: each rep is a homomorphism to invertible matrices that
    /// preserves the `l1` norm (signed permutation matrices).
    pub fn validate(&self, data: &EtaleDataV) -> Report {
        let mut rep = Report::new();
        let mut w = None;
        'outer: for (i, g) in data.group.factors.iter().enumerate() {
            if self.reps[i].len() != g.order() {
                w = Some(format!("factor {} has wrong rep length", i + 1));
                break;
            }
            for a in 0..g.order() {
                let ma = &self.reps[i][a];
                if ma.rows != self.dims[i] || ma.cols != self.dims[i] {
                    w = Some(format!("rep of factor {} has wrong shape", i + 1));
                    break 'outer;
                }
                if self.dims[i] > 0 && !ma.is_monomial() {
                    w = Some(format!(
                        "rep of {} on E_{} is not a signed permutation",
                        g.elements[a],
                        i + 1
                    ));
                    break 'outer;
                }
                for b in 0..g.order() {
                    // Left action: (ab) acts as a after b.
                    if self.reps[i][g.mul(a, b)] != ma.mul(&self.reps[i][b]) {
                        w = Some(format!("rep of factor {} is not a homomorphism", i + 1));
                        break 'outer;
                    }
                }
            }
        }
        rep.check("e-action", w);
        rep
    }
}

/// The `E`-parameter record category over a finite sample of rational
/// vectors. Objects are `(I, x, e)` with `e` drawn from the `G`-closure of
/// the samples; a morphism `(I,J,y,g,e)` runs `(I, g^-1 rho_I(y), g^-1 e) ->
/// (J, rho_J(y), e)`.
///
/// When the group acts nontrivially on `E` the composition rule need not
/// cohere with these endpoints (the composite's group part forgets the
/// components outside `I ^ K`, which may still move `e`), so the record
/// category is only a groupoid for compatible actions. What the artifact
/// exposes is the class data of the endpoint relation, which is well defined
/// regardless.
pub struct XvE {
    pub xv: XvGroupoid,
    pub espec: ESpec,
    pub points: Vec<QVec>,
    point_lookup: BTreeMap<QVec, usize>,
    id_of: Vec<usize>,
}

impl XvE {
    pub fn build(xv: &XvGroupoid, espec: &ESpec, samples: &[QVec]) -> XvE {
        // Close the sample set under the group action.
        let full = IndexSet::full(xv.data.n);
        let gs = xv.data.group.elements_of(full);
        let mut points: Vec<QVec> = Vec::new();
        for s in samples {
            for g in &gs {
                let e = espec.act(g, s);
                if !points.contains(&e) {
                    points.push(e);
                }
            }
        }
        points.sort();
        let point_lookup = points.iter().cloned().enumerate().map(|(k, e)| (e, k)).collect();
        let ne = points.len();
        let id_of = (0..xv.n_objects() * ne)
            .map(|o| {
                let (x, e) = (o / ne, o % ne);
                xv.identity_of(x) * ne + e
            })
            .collect();
        XvE {
            xv: xv.clone(),
            espec: espec.clone(),
            points,
            point_lookup,
            id_of,
        }
    }

    fn ne(&self) -> usize {
        self.points.len()
    }

    pub fn obj_of(&self, o: usize) -> (usize, usize) {
        (o / self.ne(), o % self.ne())
    }

    pub fn mor_of(&self, m: usize) -> (usize, usize) {
        (m / self.ne(), m % self.ne())
    }

    pub fn mor_index_of(&self, xv_mor: usize, e: usize) -> usize {
        xv_mor * self.ne() + e
    }

    fn mor_g(&self, xv_mor: usize) -> &GElem {
        &self.xv.morphisms[xv_mor].g
    }

    /// `g * (I,x,e) = (I, g|_I x, g e)` and the conjugation formula with
    /// `e -> g e` on morphisms.
    pub fn act_obj(&self, g: &GElem, o: usize) -> usize {
        let (x, e) = self.obj_of(o);
        let ge = self.espec.act(g, &self.points[e]);
        self.xv.act_obj(g, x) * self.ne() + self.point_lookup[&ge]
    }

    pub fn act_mor(&self, g: &GElem, m: usize) -> usize {
        let (xm, e) = self.mor_of(m);
        let gm = self.xv.act_mor(g, &self.xv.morphisms[xm]);
        let ge = self.espec.act(g, &self.points[e]);
        self.mor_index_of(self.xv.mor_index(&gm).unwrap(), self.point_lookup[&ge])
    }
}

impl Cat for XvE {
    fn n_objects(&self) -> usize {
        self.xv.n_objects() * self.ne()
    }
    fn n_morphisms(&self) -> usize {
        self.xv.n_morphisms() * self.ne()
    }
    fn source(&self, m: usize) -> usize {
        let (xm, e) = self.mor_of(m);
        let ginv = self.xv.data.group.invert(self.mor_g(xm));
        let se = self.espec.act(&ginv, &self.points[e]);
        self.xv.source(xm) * self.ne() + self.point_lookup[&se]
    }
    fn target(&self, m: usize) -> usize {
        let (xm, e) = self.mor_of(m);
        self.xv.target(xm) * self.ne() + e
    }
    fn identity_of(&self, x: usize) -> usize {
        self.id_of[x]
    }
    fn compose(&self, m1: usize, m2: usize) -> Option<usize> {
        if self.target(m1) != self.source(m2) {
            return None;
        }
        let (x1, _) = self.mor_of(m1);
        let (x2, e2) = self.mor_of(m2);
        let c = self.xv.compose(x1, x2)?;
        Some(self.mor_index_of(c, e2))
    }
    fn inverse(&self, m: usize) -> Option<usize> {
        let (xm, e) = self.mor_of(m);
        let xi = self.xv.inverse(xm)?;
        let ginv = self.xv.data.group.invert(self.mor_g(xm));
        let ie = self.espec.act(&ginv, &self.points[e]);
        Some(self.mor_index_of(xi, self.point_lookup[&ie]))
    }
    fn object_key(&self, x: usize) -> String {
        let (o, e) = self.obj_of(x);
        format!("({},{:?})", self.xv.object_key(o), self.points[e])
    }
    fn morphism_key(&self, m: usize) -> String {
        let (xm, e) = self.mor_of(m);
        format!("({},{:?})", self.xv.morphism_key(xm), self.points[e])
    }
    fn is_groupoid(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::qlin::{rat_int, QMatrix};

    #[test]
    fn fix_triv_builds_one_object_one_morphism() {
        let xv = build_xv(&fixtures::fix_triv()).unwrap();
        assert_eq!(xv.n_objects(), 1);
        assert_eq!(xv.n_morphisms(), 1);
    }

    #[test]
    fn fix_a_counts() {
        let xv = build_xv(&fixtures::fix_a()).unwrap();
        assert_eq!(xv.n_objects(), 7);
        assert_eq!(xv.n_morphisms(), 25);
        assert_eq!(realize(&xv).n_classes(), 2);
    }

    #[test]
    fn fix_z2f_isotropy_has_order_two() {
        let xv = build_xv(&fixtures::fix_z2f()).unwrap();
        assert_eq!(xv.n_objects(), 1);
        let iso = cat::isotropy(&xv, 0);
        assert_eq!(iso.morphisms.len(), 2);
        assert!(iso.is_group);
    }

    #[test]
    fn inverse_law_on_fix_a() {
        let xv = build_xv(&fixtures::fix_a()).unwrap();
        for m in &xv.morphisms {
            let mi = xv.mor_inverse(m);
            let c = xv.compose_xv(m, &mi).unwrap();
            let (i, s) = xv.mor_source(m);
            assert_eq!(
                c,
                XvMorphism {
                    src_set: i,
                    tgt_set: i,
                    y: s,
                    g: xv.data.group.identity()
                }
            );
        }
    }

    #[test]
    fn case_i_in_k_in_j_gives_y_id_on_fix_a() {
        // I = K = {1}, J = {1,2}: m1 = ({1},{12},u,id), m2 = m1^-1.
        let xv = build_xv(&fixtures::fix_a()).unwrap();
        let i1 = IndexSet::singleton(1);
        let j12 = IndexSet::from_indices(&[1, 2]);
        let u = xv.data.spaces[&j12].index_of("u").unwrap();
        let m1 = XvMorphism {
            src_set: i1,
            tgt_set: j12,
            y: u,
            g: xv.data.group.identity(),
        };
        let m2 = xv.mor_inverse(&m1);
        let cases = xv.compose_cases(&m1, &m2).unwrap();
        // Case 1 (I < K < J) applies and yields (v,k) = (y, id), so the
        // composite has the identity group element and y-part rho_1(u) = a.
        assert!(cases.iter().any(|(c, _)| *c == 1));
        for (_, r) in &cases {
            assert_eq!(r.g, xv.data.group.identity());
            assert_eq!(r.src_set, i1);
            assert_eq!(r.tgt_set, i1);
            assert_eq!(xv.data.elem_label(i1, r.y), "a");
        }
    }

    #[test]
    fn overlap_case_agreement_on_fix_a() {
        let xv = build_xv(&fixtures::fix_a()).unwrap();
        assert_eq!(check_case_agreement(&xv), None);
    }

    #[test]
    fn q_poset_on_fix_a() {
        let d = fixtures::fix_a();
        let q = build_q(&d);
        assert!(cat::check_category(&q, true).passed());
        let real = realize(&q);
        assert_eq!(real.n_classes(), 3);
        // Unique minima per class: (1,a), (1,b), (2,p).
        let roots = cat::poset_roots(&q).unwrap();
        let mut labels: Vec<String> = roots.iter().map(|&(r, _)| q.object_key(r)).collect();
        labels.sort();
        assert_eq!(labels, vec!["({1},a)", "({1},b)", "({2},p)"]);
        // Antisymmetry: no 2-cycles among non-identity morphisms.
        for m1 in 0..q.n_morphisms() {
            for m2 in 0..q.n_morphisms() {
                if q.source(m1) != q.target(m2) || q.source(m2) != q.target(m1) {
                    continue;
                }
                let two_cycle = q.source(m1) != q.target(m1) && q.source(m2) != q.target(m2);
                assert!(!two_cycle, "2-cycle in the poset");
            }
        }
    }

    #[test]
    fn fix_a_class_members() {
        let xv = build_xv(&fixtures::fix_a()).unwrap();
        let real = realize(&xv);
        let mut classes: Vec<Vec<String>> = real
            .classes
            .iter()
            .map(|members| {
                let mut v: Vec<String> = members.iter().map(|&o| xv.object_key(o)).collect();
                v.sort();
                v
            })
            .collect();
        classes.sort();
        assert_eq!(
            classes,
            vec![
                vec!["({1,2},u)", "({1,2},v)", "({1},a)", "({1},b)"],
                vec!["({1,2},w)", "({1,2},x)", "({2},p)"],
            ]
        );
    }

    #[test]
    fn h_min_constant_along_q_classes() {
        for seed in [0u64, 3, 9, 21] {
            let Some(d) = fixtures::gen_etale_data(seed) else { continue };
            let q = build_q(&d);
            let real = realize(&q);
            // Recover (I, x) per q-object from the construction order.
            let mut objs = Vec::new();
            for i in d.index_sets() {
                for x in 0..d.space_len(i) {
                    objs.push((i, x));
                }
            }
            for members in &real.classes {
                let hs: std::collections::BTreeSet<IndexSet> = members
                    .iter()
                    .map(|&o| {
                        let (i, x) = objs[o];
                        d.h_min(i, x).unwrap()
                    })
                    .collect();
                assert_eq!(hs.len(), 1, "seed {seed}: H varies along a class");
            }
        }
    }

    #[test]
    fn fix_triv_q_is_one_identity() {
        let q = build_q(&fixtures::fix_triv());
        assert_eq!(q.n_objects(), 1);
        assert_eq!(q.n_morphisms(), 1);
    }

    #[test]
    fn minus_g_on_fix_a() {
        let xv = build_xv(&fixtures::fix_a()).unwrap();
        let mg = build_xv_minus_g(&xv).unwrap();
        // Mor(V_1, V_12) has exactly the two elements (u, id), (v, id).
        let i1 = IndexSet::singleton(1);
        let j12 = IndexSet::from_indices(&[1, 2]);
        let count = mg
            .into_xv
            .iter()
            .filter(|&&m| {
                xv.morphisms[m].src_set == i1 && xv.morphisms[m].tgt_set == j12
            })
            .count();
        assert_eq!(count, 2);
        assert_eq!(realize(&mg.cat).n_classes(), 3);
        assert!(check_minus_g_is_completion(&xv, &mg).passed());
        assert!(check_quotient_identification(&xv, &mg).passed());
    }

    #[test]
    fn inclusion_is_equivariant_for_the_pruned_action() {
        // The action tables on the pruned subgroupoid commute with the
        // inclusion into the full reduced groupoid.
        let xv = build_xv(&fixtures::fix_a()).unwrap();
        let mg = build_xv_minus_g(&xv).unwrap();
        let full = IndexSet::full(xv.data.n);
        for g in xv.data.group.elements_of(full) {
            let (obj, mor) = mg.g_action(&xv, &g);
            for x in 0..mg.cat.n_objects() {
                assert_eq!(obj[x], xv.act_obj(&g, x));
            }
            for (k, &m) in mg.into_xv.iter().enumerate() {
                let gm = xv.act_mor(&g, &xv.morphisms[m]);
                assert_eq!(mg.into_xv[mor[k]], xv.mor_index(&gm).unwrap());
            }
        }
    }

    #[test]
    fn extend_identity_on_q_gives_inclusion_into_completion() {
        // The identity functor on the fixture poset extends through the
        // completion; the extension restricted back is the inclusion, and
        // the completion's endpoints agree with the pruned subgroupoid's.
        let d = fixtures::fix_a();
        let q = build_q(&d);
        let (qc, incl) = complete_nonsingular(&q).unwrap();
        let ext = cat::extend_poset_functor(&incl, &q, &qc, &incl, &qc).unwrap();
        assert!(check_functor(&ext, &qc, &qc).passed());
        for m in 0..q.n_morphisms() {
            assert_eq!(ext.mor_map[incl.mor_map[m]], incl.mor_map[m]);
        }
    }

    #[test]
    fn minus_g_equals_xv_for_trivial_group() {
        let xv = build_xv(&fixtures::fix_triv()).unwrap();
        let mg = build_xv_minus_g(&xv).unwrap();
        assert_eq!(mg.into_xv.len(), xv.n_morphisms());
    }

    #[test]
    fn decomposition_and_conjugation_stability() {
        let xv = build_xv(&fixtures::fix_a()).unwrap();
        for m in &xv.morphisms {
            // m = alpha(g|_H) * m' with m' pruned.
            let (gh, rest) = xv.decompose(m);
            assert!(xv.in_minus_g(&rest));
            let src = xv.obj_lookup[&xv.mor_source(m)];
            let am = xv.alpha(&gh, {
                // alpha at the source of the remainder: alpha(g,(I,x)):
                // g|_I^-1 x -> x, and the remainder starts at s(rest).
                let (i, x) = xv.mor_source(&rest);
                xv.obj_lookup[&(i, x)]
            });
            let rk = xv.mor_index(&rest).unwrap();
            let mk = xv.mor_index(m).unwrap();
            assert_eq!(xv.compose(am, rk), Some(mk));
            let _ = src;
        }
        // Conjugation by elements of G_{H_x} preserves the pruned part.
        let full = IndexSet::full(xv.data.n);
        for m in &xv.morphisms {
            if !xv.in_minus_g(m) {
                continue;
            }
            let h = xv.h_of(m);
            for l in xv.data.group.elements_of(h.intersect(full)) {
                let conj = xv.act_mor(&l, m);
                assert!(xv.in_minus_g(&conj), "conjugate left the subgroupoid");
            }
        }
    }

    #[test]
    fn inner_action_realization_is_trivial() {
        let xv = build_xv(&fixtures::fix_a()).unwrap();
        let real = realize(&xv);
        let full = IndexSet::full(xv.data.n);
        for g in xv.data.group.elements_of(full) {
            for x in 0..xv.n_objects() {
                assert_eq!(real.class_of[xv.act_obj(&g, x)], real.class_of[x]);
            }
        }
    }

    #[test]
    fn act_mor_matches_generic_inner_action() {
        // g*m computed by the explicit formula agrees with
        // alpha(g^-1, s(m)) m alpha(g, g t(m)).
        let xv = build_xv(&fixtures::fix_a()).unwrap();
        let full = IndexSet::full(xv.data.n);
        for g in xv.data.group.elements_of(full) {
            let ginv = xv.data.group.invert(&g);
            for (mk, m) in xv.morphisms.iter().enumerate() {
                let s = xv.source(mk);
                let t = xv.target(mk);
                let left = xv.alpha(&ginv, s);
                let right = xv.alpha(&g, xv.act_obj(&g, t));
                let composite = xv
                    .compose(left, mk)
                    .and_then(|lm| xv.compose(lm, right))
                    .unwrap();
                assert_eq!(xv.morphisms[composite], xv.act_mor(&g, m));
            }
        }
    }

    #[test]
    fn extend_functor_bv_identity() {
        let xv = build_xv(&fixtures::fix_a()).unwrap();
        let up: BTreeMap<usize, usize> = (0..xv.n_morphisms())
            .filter(|&m| {
                xv.morphisms[m]
                    .src_set
                    .subset_of(xv.morphisms[m].tgt_set)
            })
            .map(|m| (m, m))
            .collect();
        let f = extend_functor_bv(&xv, (0..xv.n_objects()).collect(), &up, &xv).unwrap();
        assert_eq!(f.mor_map, (0..xv.n_morphisms()).collect::<Vec<_>>());
    }

    #[test]
    fn good_neighbourhoods_pass_on_fixtures() {
        for d in [fixtures::fix_triv(), fixtures::fix_a(), fixtures::fix_z2f()] {
            let xv = build_xv(&d).unwrap();
            assert!(good_neighbourhoods(&xv).passed());
        }
    }

    fn espec_sign() -> ESpec {
        // E_1 = Q with sigma acting by -1; E_2 = 0.
        ESpec {
            dims: vec![1, 0],
            reps: vec![
                vec![QMatrix::identity(1), QMatrix::from_i64(&[&[-1]])],
                vec![QMatrix::zeros(0, 0)],
            ],
        }
    }

    #[test]
    fn xve_with_zero_e_is_xv() {
        let xv = build_xv(&fixtures::fix_a()).unwrap();
        let espec = ESpec {
            dims: vec![0, 0],
            reps: vec![
                vec![QMatrix::zeros(0, 0), QMatrix::zeros(0, 0)],
                vec![QMatrix::zeros(0, 0)],
            ],
        };
        let xve = XvE::build(&xv, &espec, &[QVec::zeros(0)]);
        assert_eq!(xve.n_objects(), xv.n_objects());
        assert_eq!(xve.n_morphisms(), xv.n_morphisms());
        assert!(cat::check_groupoid(&xve).passed());
    }

    #[test]
    fn xve_classes_on_fix_a_with_sign_action() {
        let xv = build_xv(&fixtures::fix_a()).unwrap();
        let espec = espec_sign();
        assert!(espec.validate(&xv.data).passed());
        let samples = vec![
            QVec(vec![rat_int(-1)]),
            QVec(vec![rat_int(0)]),
            QVec(vec![rat_int(1)]),
        ];
        let xve = XvE::build(&xv, &espec, &samples);
        let real = realize(&xve);
        let j12 = IndexSet::from_indices(&[1, 2]);
        let v12 = &xv.data.spaces[&j12];
        let u = xv.obj_lookup[&(j12, v12.index_of("u").unwrap())];
        let v = xv.obj_lookup[&(j12, v12.index_of("v").unwrap())];
        let one = xve.point_lookup[&QVec(vec![rat_int(1)])];
        let neg = xve.point_lookup[&QVec(vec![rat_int(-1)])];
        let ne = xve.ne();
        // (12,u,1) ~ (12,v,-1) but (12,u,1) !~ (12,v,1).
        assert_eq!(real.class_of[u * ne + one], real.class_of[v * ne + neg]);
        assert_ne!(real.class_of[u * ne + one], real.class_of[v * ne + one]);
    }

    #[test]
    fn xve_trivial_action_classes_factor() {
        // With the trivial action on E, classes(XvE) = classes(Xv) x points.
        let xv = build_xv(&fixtures::fix_a()).unwrap();
        let espec = ESpec {
            dims: vec![1, 0],
            reps: vec![
                vec![QMatrix::identity(1), QMatrix::identity(1)],
                vec![QMatrix::zeros(0, 0)],
            ],
        };
        let samples = vec![QVec(vec![rat_int(0)]), QVec(vec![rat_int(2)])];
        let xve = XvE::build(&xv, &espec, &samples);
        let real = realize(&xve);
        assert_eq!(real.n_classes(), realize(&xv).n_classes() * xve.points.len());
    }

    #[test]
    fn xve_g_action_commutes_with_record_inclusion() {
        // The record-level inclusion of the pruned product into XvE commutes
        // with the G-actions, and on the E_{H}-restricted objects it is
        // source/target compatible.
        let xv = build_xv(&fixtures::fix_a()).unwrap();
        let espec = espec_sign();
        let samples = vec![QVec(vec![rat_int(1)]), QVec(vec![rat_int(0)])];
        let xve = XvE::build(&xv, &espec, &samples);
        let mg = build_xv_minus_g(&xv).unwrap();
        for (k, &m) in mg.into_xv.iter().enumerate() {
            let rec = &xv.morphisms[m];
            let h = xv.h_of(rec);
            for e in 0..xve.ne() {
                // E_H-restricted: e supported in the H factors.
                let point = &xve.points[e];
                if xve.espec.project(h, point) != *point {
                    continue;
                }
                let em = xve.mor_index_of(m, e);
                // Product morphism (m, e): (s(m), e) -> (t(m), e); compare.
                let ne = xve.ne();
                assert_eq!(xve.source(em), xv.source(m) * ne + e);
                assert_eq!(xve.target(em), xv.target(m) * ne + e);
            }
            let _ = k;
        }
    }
}

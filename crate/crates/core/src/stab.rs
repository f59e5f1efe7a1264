//! Finite-model stabilization: local stabilizations, partitions of unity,
//! the global parameter functor `tau`, its induced multisections, perturbed
//! supports, regularity bounds, and dimension-0 weighted counts.
//!
//! `tau` assigns each object of the reduced groupoid a linear map
//! `E -> fiber`, built from chart-local data transported along the
//! poset-minimum morphisms (pure pipelines) or the chart-tuple chains
//! (ambient pipelines). Every law the construction relies on is then
//! verified exhaustively and any failure aborts with a witness.

use crate::ambient::{AmbientAtlas, BuiltVData};
use crate::bundle::{
    check_multisection, check_section, class_weights, multisection_from_structure,
    GlobalSectionStructure, GroupoidBundle, Multisection, Section,
};
use crate::cat::{realize, Cat, Functor};
use crate::etale::EtaleDataV;
use crate::group::{GElem, IndexSet};
use crate::qlin::{QVec, Rat};
use crate::report::Report;
use crate::xv::{ESpec, XvGroupoid, XvMorphism};
use num::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StabError {
    #[error("tau verification failed: {0}")]
    Verification(String),
    #[error("partition is incompatible with the reduction: {0}")]
    Incompatible(String),
    #[error("invalid stabilization data: {0}")]
    Invalid(String),
}

/// Morphism-invariant weights per chart, defined on realization classes.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    /// `beta[i-1][class]` for chart `i`.
    pub beta: Vec<Vec<Rat>>,
}

/// The default rule on a pure pipeline: footprints are the classes meeting
/// the singleton components, and each covered class splits its mass evenly
/// among the charts whose footprint contains it.
pub fn make_partition_pure(xv: &XvGroupoid) -> PartitionOfUnity {
    let real = realize(xv);
    let n = xv.data.n;
    let mut fp: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (o, &(iset, _)) in xv.objects.iter().enumerate() {
        if iset.len() == 1 {
            fp[iset.indices()[0] - 1].insert(real.class_of[o]);
        }
    }
    partition_from_footprints(&fp, real.n_classes())
}

/// The default rule on an ambient pipeline, over the ambient realization
/// classes and the uniformizer footprints.
pub fn make_partition_ambient(atlas: &AmbientAtlas) -> PartitionOfUnity {
    let fp: Vec<BTreeSet<usize>> = (1..=atlas.n_charts()).map(|i| atlas.footprint(i)).collect();
    partition_from_footprints(&fp, atlas.real.n_classes())
}

/// A partition compatible with a reduction in the sense the cover reduction
/// provides: supports shrink to the minimal chain element at each class, so
/// chart weights vanish outside the minimal index set of every element.
pub fn make_partition_compatible(
    atlas: &AmbientAtlas,
    red: &crate::ambient::Reduction,
) -> PartitionOfUnity {
    let n_classes = atlas.real.n_classes();
    let mut minimal: Vec<Option<IndexSet>> = vec![None; n_classes];
    for (&iset, classes) in red {
        for &c in classes {
            minimal[c] = Some(match minimal[c] {
                None => iset,
                Some(prev) => {
                    if iset.subset_of(prev) {
                        iset
                    } else {
                        prev
                    }
                }
            });
        }
    }
    let beta = (1..=atlas.n_charts())
        .map(|i| {
            (0..n_classes)
                .map(|c| match minimal[c] {
                    Some(m) if m.contains(i) => Rat::new(1.into(), (m.len() as i64).into()),
                    _ => Rat::zero(),
                })
                .collect()
        })
        .collect();
    PartitionOfUnity { beta }
}

fn partition_from_footprints(fp: &[BTreeSet<usize>], n_classes: usize) -> PartitionOfUnity {
    let beta = fp
        .iter()
        .map(|fi| {
            (0..n_classes)
                .map(|c| {
                    if fi.contains(&c) {
                        let k = fp.iter().filter(|fj| fj.contains(&c)).count() as i64;
                        Rat::new(1.into(), k.into())
                    } else {
                        Rat::zero()
                    }
                })
                .collect()
        })
        .collect();
    PartitionOfUnity { beta }
}

/// Range, support, and sum-to-one over the covered classes.
pub fn check_partition(
    pu: &PartitionOfUnity,
    fp: &[BTreeSet<usize>],
    n_classes: usize,
) -> Report {
    let mut rep = Report::new();
    let shape = (pu.beta.len() != fp.len()
        || pu.beta.iter().any(|row| row.len() != n_classes))
    .then(|| "table shape".to_string());
    rep.check("partition-shape", shape);
    if !rep.passed() {
        return rep;
    }
    let range = pu.beta.iter().flatten().find_map(|v| {
        (*v < Rat::zero() || *v > Rat::one()).then(|| format!("value {v} out of [0,1]"))
    });
    rep.check("partition-range", range);
    let supp = pu.beta.iter().enumerate().find_map(|(i, row)| {
        row.iter()
            .enumerate()
            .find(|(c, v)| !v.is_zero() && !fp[i].contains(c))
            .map(|(c, _)| format!("beta_{} does not vanish off its footprint at class {c}", i + 1))
    });
    rep.check("partition-support", supp);
    let covered: BTreeSet<usize> = fp.iter().flatten().copied().collect();
    let sum = covered.iter().find_map(|&c| {
        let s: Rat = pu.beta.iter().map(|row| row[c].clone()).sum();
        (!s.is_one()).then(|| format!("sum at class {c} is {s}"))
    });
    rep.check("partition-sum-to-one", sum);
    rep
}

/// Section, auxiliary norm (weighted `l1` per object), and a saturated
/// control set containing the zero set.
#[derive(Clone, Debug)]
pub struct FredholmModel {
    pub section: Section,
    pub norm_weights: Vec<Vec<Rat>>,
    pub u_set: Vec<bool>,
}

impl FredholmModel {
    pub fn norm(&self, x: usize, w: &QVec) -> Rat {
        w.weighted_l1(&self.norm_weights[x])
    }

    /// Unit weights and full control set around a given section.
    pub fn plain(section: Section, b: &GroupoidBundle, base: &(impl Cat + ?Sized)) -> Self {
        FredholmModel {
            section,
            norm_weights: b.fiber_dim.iter().map(|&d| vec![Rat::one(); d]).collect(),
            u_set: vec![true; base.n_objects()],
        }
    }
}

/// Section compatibility, positivity of the norm weights, invariance of the
/// norm under every transport (certified through the monomial-matrix
/// criterion), saturation of the control set, and zero-set containment.
pub fn validate_fredholm(
    fm: &FredholmModel,
    b: &GroupoidBundle,
    base: &(impl Cat + ?Sized),
) -> Report {
    let mut rep = Report::new();
    rep.check(
        "fredholm-section",
        check_section(&fm.section, b, base).err().map(|e| e.to_string()),
    );
    let posw = (0..base.n_objects()).find_map(|x| {
        (fm.norm_weights[x].len() != b.fiber_dim[x]
            || fm.norm_weights[x].iter().any(|w| *w <= Rat::zero()))
        .then(|| base.object_key(x))
    });
    rep.check("norm-weights-positive", posw);
    if !rep.passed() {
        return rep;
    }
    // N(mu(m) w) = N(w) for all w iff mu(m) is monomial and the weights
    // match along its support.
    let invw = (0..base.n_morphisms()).find_map(|m| {
        let (s, t) = (base.source(m), base.target(m));
        let mat = &b.mu[m];
        if b.fiber_dim[s] == 0 {
            return None;
        }
        if !mat.is_monomial() {
            return Some(format!(
                "transport at {} is not monomial; norm invariance is not certifiable",
                base.morphism_key(m)
            ));
        }
        for k in 0..mat.cols {
            let r = (0..mat.rows).find(|&r| !mat.get(r, k).is_zero()).unwrap();
            let a = mat.get(r, k);
            if fm.norm_weights[t][r].clone() * a.abs() != fm.norm_weights[s][k] {
                return Some(format!("weights differ along {}", base.morphism_key(m)));
            }
        }
        None
    });
    rep.check("norm-invariance", invw);

    let satw = (0..base.n_morphisms()).find_map(|m| {
        (fm.u_set[base.source(m)] != fm.u_set[base.target(m)]).then(|| base.morphism_key(m))
    });
    rep.check("control-set-saturated", satw);
    let zerow = (0..base.n_objects()).find_map(|x| {
        (fm.section.values[x].is_zero() && !fm.u_set[x]).then(|| base.object_key(x))
    });
    rep.check("zero-set-in-control-set", zerow);
    rep.pass_note(
        "norm-convergence-axiom",
        "only N(w)=0 iff w=0 has finite content; enforced via positive weights",
    );
    rep
}

/// Chart-local stabilization data: per object of the chart's domain, one
/// fiber vector per basis vector of `E_i`, extended linearly.
#[derive(Clone, Debug)]
pub struct LocalStabilization {
    pub chart: usize,
    /// Object index (in the carrying category) -> values per basis slot.
    pub values: BTreeMap<usize, Vec<QVec>>,
}

impl LocalStabilization {
    pub fn zero(chart: usize) -> Self {
        LocalStabilization {
            chart,
            values: BTreeMap::new(),
        }
    }

    pub fn eval(&self, x: usize, e_block: &[Rat], fiber_dim: usize) -> QVec {
        let mut out = QVec::zeros(fiber_dim);
        if let Some(vals) = self.values.get(&x) {
            for (b, c) in e_block.iter().enumerate() {
                if !c.is_zero() {
                    out = out.add(&vals[b].scale(c));
                }
            }
        }
        out
    }
}

/// Equivariance, norm bound, and support containment of one local
/// stabilization; `gamma(a, x)` must return the morphism `x -> a*x`
/// implementing the chart group, and `act(a, x)` the action itself.
#[allow(clippy::too_many_arguments)]
pub fn validate_local_stab(
    ls: &LocalStabilization,
    dim_e: usize,
    rep_e: &[crate::qlin::QMatrix],
    domain: &[usize],
    gamma: &dyn Fn(usize, usize) -> usize,
    act: &dyn Fn(usize, usize) -> usize,
    group_order: usize,
    fm: &FredholmModel,
    b: &GroupoidBundle,
    base: &(impl Cat + ?Sized),
) -> Report {
    let mut rep = Report::new();
    let shape = ls.values.iter().find_map(|(&x, vals)| {
        (vals.len() != dim_e || vals.iter().any(|v| v.dim() != b.fiber_dim[x]))
            .then(|| base.object_key(x))
    });
    rep.check("local-stab-shape", shape);
    if !rep.passed() {
        return rep;
    }
    rep.pass_note("linearity", "by basis extension");
    rep.pass_note("projection-compatibility", "values typed by fiber");

    // tau_i(g*x, g*e) = mu(Gamma(g,x)) tau_i(x, e) on the domain.
    let mut eqw = None;
    'eq: for &x in domain {
        for a in 0..group_order {
            let gx = act(a, x);
            let mat = &b.mu[gamma(a, x)];
            for slot in 0..dim_e {
                let ge = rep_e[a].col(slot);
                let lhs = ls.eval(gx, &ge.0, b.fiber_dim[gx]);
                let rhs = mat.apply(&ls.eval(x, &QVec::unit(dim_e, slot).0, b.fiber_dim[x]));
                if lhs != rhs {
                    eqw = Some(format!("(g={a}, x={}, slot={slot})", base.object_key(x)));
                    break 'eq;
                }
            }
        }
    }
    rep.check("local-stab-equivariance", eqw);

    // (1) N(tau_i(x, e_b)) <= 1 on basis vectors; the weighted l1 norm is
    // subadditive and homogeneous, so the bound extends to all of E_i.
    let normw = ls.values.iter().find_map(|(&x, vals)| {
        vals.iter()
            .any(|v| fm.norm(x, v) > Rat::one())
            .then(|| base.object_key(x))
    });
    rep.check("local-stab-norm-bound", normw);

    // (2) Support inside the control set.
    let suppw = ls.values.iter().find_map(|(&x, vals)| {
        (!fm.u_set[x] && vals.iter().any(|v| !v.is_zero())).then(|| base.object_key(x))
    });
    rep.check("local-stab-support", suppw);
    rep.pass_note("surjectivity", "transversality condition is out of scope at finite scale");
    rep
}

/// The global stabilization: per object of the reduced groupoid, a linear
/// map `E -> fiber` stored columnwise over the `E`-basis.
#[derive(Clone, Debug)]
pub struct Tau {
    pub values: Vec<Vec<QVec>>,
    pub fiber_dim: Vec<usize>,
}

impl Tau {
    pub fn eval(&self, o: usize, e: &QVec) -> QVec {
        let cols = &self.values[o];
        let mut out = QVec::zeros(self.fiber_dim[o]);
        for (k, c) in e.0.iter().enumerate() {
            if !c.is_zero() {
                out = out.add(&cols[k].scale(c));
            }
        }
        out
    }
}

fn e_slot_ranges(espec: &ESpec) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut off = 0;
    for &d in &espec.dims {
        out.push((off, off + d));
        off += d;
    }
    out
}

/// Assembles `tau` on a pure pipeline: contributions are transported from
/// the chart components along the unique poset-minimum morphisms. Partition
/// compatibility is enforced: a chart weight may only be nonzero where the
/// element actually projects to that chart.
pub fn build_tau_pure(
    xv: &XvGroupoid,
    wv: &GroupoidBundle,
    espec: &ESpec,
    locals: &[LocalStabilization],
    pu: &PartitionOfUnity,
    u_set: &[bool],
) -> Result<Tau, StabError> {
    let real = realize(xv);
    let ranges = e_slot_ranges(espec);
    let total = espec.total_dim();
    let mut values = Vec::with_capacity(xv.n_objects());
    for (o, &(iset, x)) in xv.objects.iter().enumerate() {
        let mut cols = vec![QVec::zeros(wv.fiber_dim[o]); total];
        let class = real.class_of[o];
        for i in 1..=xv.data.n {
            let beta = &pu.beta[i - 1][class];
            if beta.is_zero() {
                continue;
            }
            let si = IndexSet::singleton(i);
            if !si.subset_of(iset) {
                return Err(StabError::Incompatible(format!(
                    "beta_{i} is nonzero at {} but chart {i} is not in {iset}",
                    xv.object_key(o)
                )));
            }
            if !xv.data.in_overlap(si, iset, x) {
                return Err(StabError::Incompatible(format!(
                    "beta_{i} is nonzero at {} which does not project to chart {i}",
                    xv.object_key(o)
                )));
            }
            if !u_set[o] {
                continue;
            }
            let z = xv.data.rho(si, iset, x).unwrap();
            let zo = xv.obj_lookup[&(si, z)];
            let m = xv
                .mor_index(&XvMorphism {
                    src_set: si,
                    tgt_set: iset,
                    y: x,
                    g: xv.data.group.identity(),
                })
                .expect("minimum morphism exists");
            let transport = &wv.mu[m];
            let (lo, hi) = ranges[i - 1];
            for (b, slot) in (lo..hi).enumerate() {
                let contrib = locals[i - 1].eval(
                    zo,
                    &QVec::unit(hi - lo, b).0,
                    wv.fiber_dim[zo],
                );
                cols[slot] = cols[slot].add(&transport.apply(&contrib).scale(beta));
            }
        }
        values.push(cols);
    }
    Ok(Tau {
        values,
        fiber_dim: wv.fiber_dim.clone(),
    })
}

/// Assembles `tau` on an ambient pipeline: contributions come from the
/// chart-tuple components, transported back to the head along the inverted
/// connecting chain. The partition must vanish outside the minimal index
/// set of each element (the compatibility the cover reduction provides).
#[allow(clippy::too_many_arguments)]
pub fn build_tau_ambient(
    atlas: &AmbientAtlas,
    built: &BuiltVData,
    xv: &XvGroupoid,
    ambient_bundle: &GroupoidBundle,
    espec: &ESpec,
    locals: &[LocalStabilization],
    pu: &PartitionOfUnity,
    ambient_u: &[bool],
) -> Result<Tau, StabError> {
    let ranges = e_slot_ranges(espec);
    let total = espec.total_dim();
    let mut values = Vec::with_capacity(xv.n_objects());
    for &(iset, k) in &xv.objects {
        let tuple = &built.tuples[&iset][k];
        let head = tuple.objs[0];
        let fdim = ambient_bundle.fiber_dim[head];
        let mut cols = vec![QVec::zeros(fdim); total];
        let class = atlas.real.class_of[head];
        let h_min = xv
            .data
            .h_min(iset, k)
            .map_err(|e| StabError::Invalid(e.to_string()))?;
        for j in 1..=atlas.n_charts() {
            if !pu.beta[j - 1][class].is_zero() && !h_min.contains(j) {
                return Err(StabError::Incompatible(format!(
                    "beta_{j} is nonzero on the class of {} whose minimal index set is {h_min}",
                    atlas.ambient.object_key(head)
                )));
            }
        }
        if ambient_u[head] {
            let charts = iset.indices();
            let mut chain: Option<usize> = None;
            for (pos, &i) in charts.iter().enumerate() {
                if pos > 0 {
                    let m = tuple.mors[pos - 1];
                    chain = Some(match chain {
                        None => m,
                        Some(c) => atlas.ambient.compose(c, m).expect("tuple chain composes"),
                    });
                }
                let beta = &pu.beta[i - 1][class];
                if beta.is_zero() {
                    continue;
                }
                let x_i = tuple.objs[pos];
                let transport = match chain {
                    None => crate::qlin::QMatrix::identity(fdim),
                    Some(c) => {
                        ambient_bundle.mu[atlas.ambient.inverse(c).expect("groupoid")].clone()
                    }
                };
                let (lo, hi) = ranges[i - 1];
                for (b, slot) in (lo..hi).enumerate() {
                    let contrib = locals[i - 1].eval(
                        x_i,
                        &QVec::unit(hi - lo, b).0,
                        ambient_bundle.fiber_dim[x_i],
                    );
                    cols[slot] = cols[slot].add(&transport.apply(&contrib).scale(beta));
                }
            }
        }
        values.push(cols);
    }
    let fiber_dim = xv
        .objects
        .iter()
        .map(|&(iset, k)| ambient_bundle.fiber_dim[built.tuples[&iset][k].objs[0]])
        .collect();
    Ok(Tau { values, fiber_dim })
}

/// The exhaustive law suite for a built `tau`: functoriality over the
/// poset morphisms and over the whole pruned subgroupoid, equivariance under
/// the full product group, the kernel law (columns outside the minimal index
/// set vanish), and the norm chain. Any failure aborts with a witness.
pub fn verify_tau(
    tau: &Tau,
    xv: &XvGroupoid,
    wv: &GroupoidBundle,
    espec: &ESpec,
    fm: &FredholmModel,
) -> Result<(), StabError> {
    let total = espec.total_dim();
    let fail = |s: String| Err(StabError::Verification(s));

    // Functoriality over the pruned subgroupoid; the poset morphisms are the
    // subset with identity group part, reported separately below.
    for (mk, m) in xv.morphisms.iter().enumerate() {
        if !xv.in_minus_g(m) {
            continue;
        }
        let (s, t) = (xv.source(mk), xv.target(mk));
        for slot in 0..total {
            let lhs = &tau.values[t][slot];
            let rhs = wv.mu[mk].apply(&tau.values[s][slot]);
            if *lhs != rhs {
                let kind = if m.g == xv.data.group.identity() && m.src_set.subset_of(m.tgt_set)
                {
                    "poset-functoriality"
                } else {
                    "pruned-functoriality"
                };
                return fail(format!("{kind} at ({}, slot {slot})", xv.mor_key(m)));
            }
        }
    }

    // Equivariance: tau(g*o, g*e) = mu(alphabar(g,o)) tau(o, e).
    let full = IndexSet::full(xv.data.n);
    for g in xv.data.group.elements_of(full) {
        for o in 0..xv.n_objects() {
            let go = xv.act_obj(&g, o);
            let (i, x) = xv.objects[o];
            let gi = xv.data.group.restrict(&g, i);
            let bar = xv
                .mor_index(&XvMorphism {
                    src_set: i,
                    tgt_set: i,
                    y: xv.data.act(i, &gi, x),
                    g: gi,
                })
                .expect("action morphism exists");
            for slot in 0..total {
                let ge = espec.act(&g, &QVec::unit(total, slot));
                let lhs = tau.eval(go, &ge);
                let rhs = wv.mu[bar].apply(&tau.values[o][slot]);
                if lhs != rhs {
                    return fail(format!(
                        "equivariance at (g={g:?}, {}, slot {slot})",
                        xv.object_key(o)
                    ));
                }
            }
        }
    }

    // Kernel law: columns in factors outside H vanish.
    let ranges = e_slot_ranges(espec);
    for (o, &(iset, x)) in xv.objects.iter().enumerate() {
        let h = xv
            .data
            .h_min(iset, x)
            .map_err(|e| StabError::Invalid(e.to_string()))?;
        for i in 1..=xv.data.n {
            if h.contains(i) {
                continue;
            }
            let (lo, hi) = ranges[i - 1];
            for slot in lo..hi {
                if !tau.values[o][slot].is_zero() {
                    return fail(format!(
                        "kernel law at ({}, slot {slot}): H = {h}",
                        xv.object_key(o)
                    ));
                }
            }
        }
    }

    // Norm chain: N(tau(o, e)) <= sum of block l1 norms, on basis vectors.
    for o in 0..xv.n_objects() {
        for slot in 0..total {
            let n = fm.norm(o, &tau.values[o][slot]);
            if n > Rat::one() {
                return fail(format!("norm chain at ({}, slot {slot})", xv.object_key(o)));
            }
        }
    }
    Ok(())
}

/// The norm chain for a specific parameter vector: `N(tau(o, e))` is at most
/// the sum of the blockwise `l1` norms of `e`, at every object.
pub fn check_norm_chain(
    tau: &Tau,
    xv: &XvGroupoid,
    espec: &ESpec,
    fm: &FredholmModel,
    e: &QVec,
) -> Option<String> {
    let bound: Rat = {
        let mut acc = Rat::zero();
        let mut off = 0;
        for &d in &espec.dims {
            acc += QVec(e.0[off..off + d].to_vec()).l1();
            off += d;
        }
        acc
    };
    (0..xv.n_objects()).find_map(|o| {
        (fm.norm(o, &tau.eval(o, e)) > bound).then(|| xv.object_key(o))
    })
}

/// The induced multisection of a parameter vector: branches are indexed by
/// the product group, `s_h = tau(., h*e)`, with the correspondence
/// `kappa(m)(h) = g_m h`. Returns the multisection, its global section
/// structure, and the full certificate report, and checks the support law.
pub fn lambda_ve(
    tau: &Tau,
    xv: &XvGroupoid,
    wv: &GroupoidBundle,
    espec: &ESpec,
    e: &QVec,
) -> Result<(Multisection, GlobalSectionStructure, Report), StabError> {
    let full = IndexSet::full(xv.data.n);
    let elems = xv.data.group.elements_of(full);
    let pos: HashMap<GElem, usize> =
        elems.iter().cloned().enumerate().map(|(k, g)| (g, k)).collect();
    let sections: Vec<Vec<QVec>> = elems
        .iter()
        .map(|h| {
            let he = espec.act(h, e);
            (0..xv.n_objects()).map(|o| tau.eval(o, &he)).collect()
        })
        .collect();
    let kappa: Vec<Vec<usize>> = xv
        .morphisms
        .iter()
        .map(|m| {
            elems
                .iter()
                .map(|h| pos[&xv.data.group.mul(&m.g, h)])
                .collect()
        })
        .collect();
    let gs = GlobalSectionStructure { sections, kappa };
    let (lam, rep) = multisection_from_structure(wv, xv, &gs)
        .map_err(|e| StabError::Verification(e.to_string()))?;
    if let Some(f) = rep.first_failure() {
        return Err(StabError::Verification(format!(
            "{}: {}",
            f.name,
            f.witness.clone().unwrap_or_default()
        )));
    }
    // Support law: supp(lam) is exactly the union of the branch graphs.
    let mut graphs: BTreeSet<(usize, QVec)> = BTreeSet::new();
    for sec in &gs.sections {
        for (o, v) in sec.iter().enumerate() {
            graphs.insert((o, v.clone()));
        }
    }
    let supp: BTreeSet<(usize, QVec)> = lam.weights.keys().cloned().collect();
    if supp != graphs {
        return Err(StabError::Verification("support law".into()));
    }
    Ok((lam, gs, rep))
}

/// The perturbed support: `Theta(x) = lam(f(x))`, stored where positive.
#[derive(Clone, Debug, PartialEq)]
pub struct Theta {
    pub weights: BTreeMap<usize, Rat>,
}

pub fn theta(fm: &FredholmModel, lam: &Multisection) -> Theta {
    let mut weights = BTreeMap::new();
    for (x, v) in fm.section.values.iter().enumerate() {
        let w = lam.weight(x, v);
        if !w.is_zero() {
            weights.insert(x, w);
        }
    }
    Theta { weights }
}

/// Class-indexed weight table; errors when the weights are not constant on
/// classes (which would mean a non-functorial input).
pub fn theta_class_table(
    th: &Theta,
    base: &(impl Cat + ?Sized),
) -> Result<BTreeMap<String, Rat>, StabError> {
    class_weights(&th.weights, base).map_err(|e| StabError::Invalid(e.to_string()))
}

/// Dimension-0 weighted count: the sum of signed class weights. Signs are
/// per class label, default `+1`.
pub fn count(
    th: &Theta,
    base: &(impl Cat + ?Sized),
    signs: Option<&BTreeMap<String, Rat>>,
) -> Result<Rat, StabError> {
    let table = theta_class_table(th, base)?;
    Ok(table
        .iter()
        .map(|(label, w)| {
            let sign = signs
                .and_then(|s| s.get(label))
                .cloned()
                .unwrap_or_else(Rat::one);
            sign * w.clone()
        })
        .sum())
}

/// Regularity of a perturbation: the auxiliary norm stays below one on the
/// nonzero support, and the domain support lies in the control set. The
/// linearized-surjectivity condition has no finite content and is noted.
pub fn check_nu_regular(
    fm: &FredholmModel,
    lam: &Multisection,
    base: &(impl Cat + ?Sized),
) -> Report {
    let mut rep = Report::new();
    let normw = lam.weights.iter().find_map(|((x, v), _)| {
        (!v.is_zero() && fm.norm(*x, v) >= Rat::one()).then(|| {
            format!("N = {} at {}", fm.norm(*x, v), base.object_key(*x))
        })
    });
    rep.check("norm-below-one", normw);
    let suppw = lam
        .dom_supp()
        .into_iter()
        .find(|&x| !fm.u_set[x])
        .map(|x| base.object_key(x));
    rep.check("dom-supp-in-control-set", suppw);
    rep.pass_note("linearized-surjectivity", "out of scope: no tangent structure at finite scale");
    rep
}

/// Push/pull consistency across an equivalence: the class weight tables of
/// the two perturbed supports agree through the realization bijection, and
/// so do the counts.
pub fn check_push_consistency(
    th_from: &Theta,
    base_from: &(impl Cat + ?Sized),
    th_to: &Theta,
    base_to: &(impl Cat + ?Sized),
    psi: &Functor,
) -> Report {
    let mut rep = Report::new();
    let rf = realize(base_from);
    let rt = realize(base_to);
    let table_from = class_weights(&th_from.weights, base_from);
    let table_to = class_weights(&th_to.weights, base_to);
    match (table_from, table_to) {
        (Ok(tf), Ok(tt)) => {
            // Map each source class with support to its image class label.
            let mut mapped: BTreeMap<String, Rat> = BTreeMap::new();
            for (&x, w) in &th_from.weights {
                let label = rt.labels[rt.class_of[psi.obj_map[x]]].clone();
                mapped.insert(label, w.clone());
            }
            rep.check(
                "class-weight-tables-agree",
                (mapped != tt).then(|| format!("{mapped:?} vs {tt:?}")),
            );
            let cf: Rat = tf.values().cloned().sum();
            let ct: Rat = tt.values().cloned().sum();
            rep.check(
                "counts-agree",
                (cf != ct).then(|| format!("{cf} vs {ct}")),
            );
        }
        (Err(e), _) | (_, Err(e)) => rep.fail("class-weight-tables-agree", e.to_string()),
    }
    let _ = rf;
    rep
}

/// Ambient-pipeline wrapper for the local-stab validator: the chart data
/// lives on the uniformizer domain inside the ambient groupoid.
pub fn validate_local_stab_ambient(
    ls: &LocalStabilization,
    espec: &ESpec,
    fm: &FredholmModel,
    ambient_bundle: &GroupoidBundle,
    atlas: &AmbientAtlas,
) -> Report {
    let i = ls.chart;
    let u = &atlas.uniformizers[i - 1];
    let dom_pos: std::collections::HashMap<usize, usize> =
        u.domain.iter().enumerate().map(|(k, &x)| (x, k)).collect();
    let gamma = |a: usize, x: usize| u.gamma[a][dom_pos[&x]];
    let act = |a: usize, x: usize| u.domain[u.act[a][dom_pos[&x]]];
    validate_local_stab(
        ls,
        espec.dims[i - 1],
        &espec.reps[i - 1],
        &u.domain,
        &gamma,
        &act,
        u.group.order(),
        fm,
        ambient_bundle,
        &atlas.ambient,
    )
}

/// Convenience runner for an ambient pipeline: assembles `tau` from the
/// chart-tuple formula, verifies the law suite against the pulled-back
/// bundle and norm, and produces the induced multisection.
#[allow(clippy::too_many_arguments)]
pub fn run_ambient_pipeline(
    atlas: &AmbientAtlas,
    built: &BuiltVData,
    xv: &XvGroupoid,
    ambient_bundle: &GroupoidBundle,
    wv: &GroupoidBundle,
    espec: &ESpec,
    locals: &[LocalStabilization],
    pu: &PartitionOfUnity,
    ambient_u: &[bool],
    fm_xv: &FredholmModel,
    e: &QVec,
) -> Result<StabData, StabError> {
    let tau = build_tau_ambient(atlas, built, xv, ambient_bundle, espec, locals, pu, ambient_u)?;
    verify_tau(&tau, xv, wv, espec, fm_xv)?;
    if let Some(w) = check_norm_chain(&tau, xv, espec, fm_xv, e) {
        return Err(StabError::Verification(format!("norm chain at {w}")));
    }
    let (lam, gs, certificates) = lambda_ve(&tau, xv, wv, espec, e)?;
    let frep = check_multisection(&lam, wv, xv);
    if let Some(f) = frep.first_failure() {
        return Err(StabError::Verification(format!(
            "{}: {}",
            f.name,
            f.witness.clone().unwrap_or_default()
        )));
    }
    Ok(StabData {
        tau,
        lam,
        gs,
        certificates,
    })
}

/// Pure-pipeline wrapper for the local-stab validator: the chart data lives
/// on the singleton component of the reduced groupoid.
pub fn validate_local_stab_pure(
    ls: &LocalStabilization,
    espec: &ESpec,
    fm: &FredholmModel,
    wv: &GroupoidBundle,
    xv: &XvGroupoid,
) -> Report {
    let i = ls.chart;
    let si = IndexSet::singleton(i);
    let domain: Vec<usize> = (0..xv.data.space_len(si))
        .map(|x| xv.obj_lookup[&(si, x)])
        .collect();
    let gord = xv.data.group.factors[i - 1].order();
    let gamma = |a: usize, o: usize| {
        let (_, x) = xv.objects[o];
        let mut g = xv.data.group.identity();
        g.0[i - 1] = a;
        xv.mor_index(&XvMorphism {
            src_set: si,
            tgt_set: si,
            y: xv.data.act(si, &g, x),
            g,
        })
        .expect("chart action morphism")
    };
    let act = |a: usize, o: usize| {
        let (_, x) = xv.objects[o];
        let mut g = xv.data.group.identity();
        g.0[i - 1] = a;
        xv.obj_lookup[&(si, xv.data.act(si, &g, x))]
    };
    validate_local_stab(
        ls,
        espec.dims[i - 1],
        &espec.reps[i - 1],
        &domain,
        &gamma,
        &act,
        gord,
        fm,
        wv,
        xv,
    )
}

/// Derived data shared by the stabilization law suites.
pub struct StabData {
    pub tau: Tau,
    pub lam: Multisection,
    pub gs: GlobalSectionStructure,
    pub certificates: Report,
}

/// Convenience runner: builds `tau` on a pure pipeline, verifies every law,
/// and produces the induced multisection with its certificates.
#[allow(clippy::too_many_arguments)]
pub fn run_pure_pipeline(
    data: &EtaleDataV,
    xv: &XvGroupoid,
    wv: &GroupoidBundle,
    espec: &ESpec,
    locals: &[LocalStabilization],
    pu: &PartitionOfUnity,
    fm: &FredholmModel,
    e: &QVec,
) -> Result<StabData, StabError> {
    let _ = data;
    let tau = build_tau_pure(xv, wv, espec, locals, pu, &fm.u_set)?;
    verify_tau(&tau, xv, wv, espec, fm)?;
    if let Some(w) = check_norm_chain(&tau, xv, espec, fm, e) {
        return Err(StabError::Verification(format!("norm chain at {w}")));
    }
    let (lam, gs, certificates) = lambda_ve(&tau, xv, wv, espec, e)?;
    let frep = check_multisection(&lam, wv, xv);
    if let Some(f) = frep.first_failure() {
        return Err(StabError::Verification(format!(
            "{}: {}",
            f.name,
            f.witness.clone().unwrap_or_default()
        )));
    }
    Ok(StabData {
        tau,
        lam,
        gs,
        certificates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::qlin::{rat, rat_int, QMatrix};
    use crate::xv::build_xv;

    use crate::fixtures::pipe_a;

    #[test]
    fn fix_a_partition_is_indicator_per_class() {
        let xv = build_xv(&fixtures::fix_a()).unwrap();
        let pu = make_partition_pure(&xv);
        let real = realize(&xv);
        let a_class = real.class_of[xv.obj_lookup[&(IndexSet::singleton(1), 0)]];
        let p_class = real.class_of[xv.obj_lookup[&(IndexSet::singleton(2), 0)]];
        assert!(pu.beta[0][a_class].is_one());
        assert!(pu.beta[1][a_class].is_zero());
        assert!(pu.beta[1][p_class].is_one());
    }

    #[test]
    fn ambient_partition_splits_evenly() {
        let atlas = fixtures::fix_amb();
        let pu = make_partition_ambient(&atlas);
        assert_eq!(pu.beta[0][0], rat(1, 2));
        assert_eq!(pu.beta[1][0], rat(1, 2));
        let fp: Vec<BTreeSet<usize>> =
            (1..=2).map(|i| atlas.footprint(i)).collect();
        assert!(check_partition(&pu, &fp, 1).passed());
    }

    #[test]
    fn single_chart_partition_is_one() {
        let xv = build_xv(&fixtures::fix_z2f()).unwrap();
        let pu = make_partition_pure(&xv);
        assert!(pu.beta[0][0].is_one());
    }

    #[test]
    fn local_stab_equivariance_on_fix_z2_chart() {
        // E_1 = Q, sigma*e = -e, tau_1(a,1) = +1, tau_1(b,1) = -1 in a
        // trivial-transport bundle over the swap chart.
        let mut d = fixtures::fix_a();
        // Use the V_1 chart of FIX-A with the trivial bundle.
        d.spaces.remove(&IndexSet::from_indices(&[1, 2]));
        d.spaces.remove(&IndexSet::singleton(2));
        d.overlaps.clear();
        let d = EtaleDataV {
            n: 1,
            group: crate::group::ProductGroup::new(vec![d.group.factors[0].clone()]),
            spaces: BTreeMap::from([(
                IndexSet::singleton(1),
                d.spaces[&IndexSet::singleton(1)].clone(),
            )]),
            overlaps: BTreeMap::new(),
        };
        let xv = build_xv(&d).unwrap();
        let wv = GroupoidBundle::trivial(&xv, 1);
        let espec = ESpec {
            dims: vec![1],
            reps: vec![vec![QMatrix::identity(1), QMatrix::from_i64(&[&[-1]])]],
        };
        let fm = FredholmModel::plain(Section::zero(&wv), &wv, &xv);
        let good = LocalStabilization {
            chart: 1,
            values: BTreeMap::from([
                (0, vec![QVec(vec![rat_int(1)])]),
                (1, vec![QVec(vec![rat_int(-1)])]),
            ]),
        };
        let rep = validate_local_stab_pure(&good, &espec, &fm, &wv, &xv);
        assert!(rep.passed(), "{:?}", rep.first_failure());
        // Flipping tau_1(b) breaks equivariance with witness (sigma, a, .).
        let bad = LocalStabilization {
            chart: 1,
            values: BTreeMap::from([
                (0, vec![QVec(vec![rat_int(1)])]),
                (1, vec![QVec(vec![rat_int(1)])]),
            ]),
        };
        let rep = validate_local_stab_pure(&bad, &espec, &fm, &wv, &xv);
        let f = rep.first_failure().unwrap();
        assert_eq!(f.name, "local-stab-equivariance");
        // Zero local data always passes.
        let rep = validate_local_stab_pure(&LocalStabilization::zero(1), &espec, &fm, &wv, &xv);
        assert!(rep.passed());
    }

    #[test]
    fn pipe_a_laws_and_values() {
        let (xv, wv, espec, locals, pu, fm, e) = pipe_a();
        assert!(validate_fredholm(&fm, &wv, &xv).passed());
        assert!(validate_local_stab_pure(&locals[0], &espec, &fm, &wv, &xv).passed());
        let stab = run_pure_pipeline(&xv.data, &xv, &wv, &espec, &locals, &pu, &fm, &e).unwrap();
        // tau at (12,u): H_u = {1}, so only the E_1 slot is populated and it
        // carries the transported beta-weighted value; E_2 is zero-dim.
        let j12 = IndexSet::from_indices(&[1, 2]);
        let u = xv.obj_lookup[&(j12, xv.data.spaces[&j12].index_of("u").unwrap())];
        assert_eq!(stab.tau.values[u][0], QVec(vec![rat(1, 2)]));
        // Branch supports on V_1 fibers: two graphs, +-1/2 each with half
        // weight, total fiber mass one.
        let i1 = IndexSet::singleton(1);
        let a = xv.obj_lookup[&(i1, 0)];
        assert_eq!(stab.lam.weight(a, &QVec(vec![rat(1, 2)])), rat(1, 2));
        assert_eq!(stab.lam.weight(a, &QVec(vec![rat(-1, 2)])), rat(1, 2));
        assert_eq!(stab.lam.fiber_mass(a), rat_int(1));
        // Theta: 1/2 on the swap class (f agrees with one branch there),
        // zero on the free class (f = 1 there, branches vanish).
        let th = theta(&fm, &stab.lam);
        let table = theta_class_table(&th, &xv).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.values().next().unwrap(), &rat(1, 2));
        assert_eq!(count(&th, &xv, None).unwrap(), rat(1, 2));
        // Sign flip negates the count.
        let signs = BTreeMap::from([(table.keys().next().unwrap().clone(), rat_int(-1))]);
        assert_eq!(count(&th, &xv, Some(&signs)).unwrap(), rat(-1, 2));
        // Regularity: branch norms are 1/2 < 1 and the control set is full.
        assert!(check_nu_regular(&fm, &stab.lam, &xv).passed());
    }

    #[test]
    fn zero_parameter_gives_zero_section_mass() {
        let (xv, wv, espec, locals, pu, fm, _) = pipe_a();
        let stab = run_pure_pipeline(
            &xv.data,
            &xv,
            &wv,
            &espec,
            &locals,
            &pu,
            &fm,
            &QVec(vec![rat_int(0)]),
        )
        .unwrap();
        for o in 0..xv.n_objects() {
            assert_eq!(
                stab.lam.weight(o, &QVec::zeros(1)),
                Rat::from_integer(1.into())
            );
        }
    }

    #[test]
    fn zero_locals_give_zero_tau() {
        let (xv, wv, espec, _, pu, fm, e) = pipe_a();
        let locals = vec![LocalStabilization::zero(1), LocalStabilization::zero(2)];
        let stab = run_pure_pipeline(&xv.data, &xv, &wv, &espec, &locals, &pu, &fm, &e).unwrap();
        for o in 0..xv.n_objects() {
            for col in &stab.tau.values[o] {
                assert!(col.is_zero());
            }
        }
        // Theta with the zero-section mass is the indicator of the zero set:
        // empty here since f is nowhere zero.
        let th = theta(&fm, &stab.lam);
        assert!(!th.weights.is_empty() || fm.section.values.iter().all(|v| !v.is_zero()));
    }

    #[test]
    fn nu_regularity_violation_constructed() {
        let (xv, wv, _, _, _, mut fm, _) = pipe_a();
        // Support outside the control set.
        fm.u_set = vec![false; 7];
        let lam = Multisection {
            weights: BTreeMap::from([((0, QVec(vec![rat(1, 2)])), Rat::one())]),
        };
        let rep = check_nu_regular(&fm, &lam, &xv);
        assert!(!rep.passed());
        let names: Vec<&str> = rep
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        assert!(names.contains(&"dom-supp-in-control-set"));
        let _ = wv;
    }

    #[test]
    fn tau_pushforward_equals_lambda() {
        // Dual route for the induced multisection: pushing the branch
        // indicator (weight 1/|G| at every parameter in the orbit of e)
        // through the fiberwise maps tau(o, .) reproduces the counting
        // formula exactly.
        use crate::bundle::push_fiberwise;
        use crate::qlin::QMatrix;
        for source in ["pipe-a", "pipe-z2f"] {
            let (xv, wv, espec, locals, pu, fm, e) = if source == "pipe-a" {
                crate::fixtures::pipe_a()
            } else {
                crate::fixtures::pipe_z2f()
            };
            let stab =
                run_pure_pipeline(&xv.data, &xv, &wv, &espec, &locals, &pu, &fm, &e).unwrap();
            let full = IndexSet::full(xv.data.n);
            let elems = xv.data.group.elements_of(full);
            let total = espec.total_dim();
            // The branch indicator on the trivial parameter bundle.
            let orbit: BTreeSet<QVec> = elems.iter().map(|h| espec.act(h, &e)).collect();
            let mut weights = BTreeMap::new();
            for o in 0..xv.n_objects() {
                for point in &orbit {
                    let count_hits = elems
                        .iter()
                        .filter(|h| espec.act(h, &e) == *point)
                        .count() as i64;
                    weights.insert(
                        (o, point.clone()),
                        Rat::new(count_hits.into(), (elems.len() as i64).into()),
                    );
                }
            }
            let branch_indicator = crate::bundle::Multisection { weights };
            // Fiberwise maps: the matrices of tau(o, .).
            let t_mats: Vec<QMatrix> = (0..xv.n_objects())
                .map(|o| {
                    let mut m = QMatrix::zeros(wv.fiber_dim[o], total);
                    for (slot, col) in stab.tau.values[o].iter().enumerate() {
                        for (r, v) in col.0.iter().enumerate() {
                            m.set(r, slot, v.clone());
                        }
                    }
                    m
                })
                .collect();
            let pushed = push_fiberwise(&branch_indicator, &t_mats, &wv, &xv).unwrap();
            assert_eq!(pushed, stab.lam, "{source}");
        }
    }

    #[test]
    fn fix_z2f_direct_multisection_count() {
        // The half-weight count fixture: bundle with trivial transport,
        // branch weights 1/2 at +-1, f = 1.
        let xv = build_xv(&fixtures::fix_z2f()).unwrap();
        let wv = GroupoidBundle::trivial(&xv, 1);
        let lam = Multisection {
            weights: BTreeMap::from([
                ((0, QVec(vec![rat_int(1)])), rat(1, 2)),
                ((0, QVec(vec![rat_int(-1)])), rat(1, 2)),
            ]),
        };
        assert!(check_multisection(&lam, &wv, &xv).passed());
        let fm = FredholmModel::plain(
            Section {
                values: vec![QVec(vec![rat_int(1)])],
            },
            &wv,
            &xv,
        );
        assert!(validate_fredholm(&fm, &wv, &xv).passed());
        let th = theta(&fm, &lam);
        assert_eq!(count(&th, &xv, None).unwrap(), rat(1, 2));
    }

    #[test]
    fn empty_support_counts_zero() {
        let xv = build_xv(&fixtures::fix_triv()).unwrap();
        let th = Theta {
            weights: BTreeMap::new(),
        };
        assert_eq!(count(&th, &xv, None).unwrap(), Rat::zero());
    }
}

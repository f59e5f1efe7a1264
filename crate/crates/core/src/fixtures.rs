//! Handcrafted fixtures and seeded random generators.
//!
//! The handcrafted instances are small enough to verify by hand and are used
//! throughout the unit tests; the generators produce valid random instances
//! for the property suites (ambient atlases built from coset blocks, cover
//! reductions, and towers).

use crate::ambient::{build_psi, AmbientAtlas, BuiltVData, ProximitySpace, PsiResult, UniformizerSpec};
use crate::bundle::{check_section, GroupoidBundle, Section};
use crate::cat::{realize, Cat, TableCategory};
use crate::etale::{EtaleDataV, Overlap, VSpace};
use crate::group::{FiniteGroup, IndexSet};
use crate::qlin::{rat, rat_int, QMatrix, QVec, Rat};
use crate::stab::{
    make_partition_compatible, make_partition_pure, FredholmModel, LocalStabilization,
    PartitionOfUnity,
};
use crate::xv::{build_xv, ESpec, XvGroupoid};
use num::{One, Signed, Zero};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// FIX-TRIV: one chart, trivial group, a single point.
pub fn fix_triv() -> EtaleDataV {
    let mut d = EtaleDataV::new(vec![FiniteGroup::trivial("G1")]);
    d.spaces.insert(
        IndexSet::singleton(1),
        VSpace {
            elems: vec!["a".into()],
            actions: BTreeMap::from([(1, vec![vec![0]])]),
        },
    );
    d
}

/// FIX-Z2F: one chart, `Z/2` acting trivially on a single point, so the
/// reduced groupoid has isotropy of order 2.
pub fn fix_z2f() -> EtaleDataV {
    let mut d = EtaleDataV::new(vec![FiniteGroup::cyclic("G1", 2)]);
    d.spaces.insert(
        IndexSet::singleton(1),
        VSpace {
            elems: vec!["a".into()],
            actions: BTreeMap::from([(1, vec![vec![0], vec![0]])]),
        },
    );
    d
}

/// FIX-A: two charts with `G1 = Z/2`, `G2` trivial;
/// `V_1 = {a,b}` (swap), `V_2 = {p}`, `V_12 = {u,v,w,x}` (u<->v, w<->x);
/// `Vt_{1,12} = {u,v}` over `{a,b}`, `Vt_{2,12} = {w,x}` over `p`.
pub fn fix_a() -> EtaleDataV {
    let mut d = EtaleDataV::new(vec![
        FiniteGroup::cyclic("G1", 2),
        FiniteGroup::trivial("G2"),
    ]);
    let i1 = IndexSet::singleton(1);
    let i2 = IndexSet::singleton(2);
    let j12 = IndexSet::from_indices(&[1, 2]);
    d.spaces.insert(
        i1,
        VSpace {
            elems: vec!["a".into(), "b".into()],
            actions: BTreeMap::from([(1, vec![vec![0, 1], vec![1, 0]])]),
        },
    );
    d.spaces.insert(
        i2,
        VSpace {
            elems: vec!["p".into()],
            actions: BTreeMap::from([(2, vec![vec![0]])]),
        },
    );
    // u=0, v=1, w=2, x=3.
    d.spaces.insert(
        j12,
        VSpace {
            elems: vec!["u".into(), "v".into(), "w".into(), "x".into()],
            actions: BTreeMap::from([
                (1, vec![vec![0, 1, 2, 3], vec![1, 0, 3, 2]]),
                (2, vec![vec![0, 1, 2, 3]]),
            ]),
        },
    );
    d.overlaps.insert(
        (i1, j12),
        Overlap {
            elems: vec![0, 1],
            rho: vec![0, 1], // u -> a, v -> b
        },
    );
    d.overlaps.insert(
        (i2, j12),
        Overlap {
            elems: vec![2, 3],
            rho: vec![0, 0], // w -> p, x -> p
        },
    );
    d
}

/// FIX-AMB: ambient is the translation groupoid of `Z/2` acting freely on
/// `{x1, x2}`; two uniformizers, both with domain all of it and `G = Z/2`.
pub fn fix_amb() -> AmbientAtlas {
    let z2 = FiniteGroup::cyclic("Z2", 2);
    let blocks = vec![Block {
        group: z2.clone(),
        stab: vec![0],
        label: "x".to_string(),
    }];
    let charts = vec![
        ChartSpec {
            group: z2.clone(),
            covers: vec![Some(CoverSpec { hom: vec![0, 1] })],
        },
        ChartSpec {
            group: z2,
            covers: vec![Some(CoverSpec { hom: vec![0, 1] })],
        },
    ];
    build_block_atlas(&blocks, &charts, &[0])
}

/// FIX-COVER: the trivial-closure cover reduction example on six points.
pub fn fix_cover() -> (ProximitySpace, Vec<usize>, Vec<Vec<usize>>) {
    let space = ProximitySpace::discrete(6);
    let s = vec![1, 2, 4]; // points {2,3,5}, 0-based
    let f = vec![vec![0, 1, 2], vec![2, 3, 4], vec![4, 5]];
    (space, s, f)
}

// ---------------------------------------------------------------------------
// Random atlases built from coset blocks.
//
// A block is one realization class: a group `H` acting on the coset space
// `H/K` by left multiplication (its translation groupoid). A chart covers a
// set of blocks; over each covered block it embeds its group `G_i` via an
// injective hom `phi` whose image contains `K`, and its domain there is the
// `im(phi)`-orbit of the identity coset.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct Block {
    pub group: FiniteGroup,
    /// Subgroup `K` as a sorted element list; objects are the cosets `aK`.
    pub stab: Vec<usize>,
    pub label: String,
}

#[derive(Clone, Debug)]
pub struct CoverSpec {
    /// Injective hom `G_i -> H` with `K` contained in the image.
    pub hom: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ChartSpec {
    pub group: FiniteGroup,
    /// Per block: `Some` when the chart covers it.
    pub covers: Vec<Option<CoverSpec>>,
}

/// Left cosets of `stab` in `group`: for each element, the index of its
/// coset; plus one representative per coset.
fn cosets(group: &FiniteGroup, stab: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let n = group.order();
    let mut coset_of = vec![usize::MAX; n];
    let mut reps = Vec::new();
    for a in 0..n {
        if coset_of[a] != usize::MAX {
            continue;
        }
        let c = reps.len();
        reps.push(a);
        for &k in stab {
            coset_of[group.mul(a, k)] = c;
        }
    }
    (coset_of, reps)
}

/// Assemble the ambient groupoid and the uniformizer specs from block data.
/// `s_blocks` lists the blocks whose classes form the solution set.
pub fn build_block_atlas(
    blocks: &[Block],
    charts: &[ChartSpec],
    s_blocks: &[usize],
) -> AmbientAtlas {
    use crate::cat::TableCategory;
    use std::collections::HashMap;

    // Objects: per block, its cosets. Morphisms: (block, coset a, h in H):
    // aK -> h aK, composed by (aK,h) * (h aK, h') = (aK, h'h).
    let mut object_keys = Vec::new();
    let mut obj_base = Vec::new();
    let mut coset_data = Vec::new();
    for b in blocks {
        let (coset_of, reps) = cosets(&b.group, &b.stab);
        obj_base.push(object_keys.len());
        for (c, _) in reps.iter().enumerate() {
            object_keys.push(format!("{}:{}", b.label, c));
        }
        coset_data.push((coset_of, reps));
    }
    let mut morphism_keys = Vec::new();
    let mut src = Vec::new();
    let mut tgt = Vec::new();
    let mut mor_base = Vec::new();
    for (bi, b) in blocks.iter().enumerate() {
        let (coset_of, reps) = &coset_data[bi];
        mor_base.push(morphism_keys.len());
        for (c, &rep) in reps.iter().enumerate() {
            for h in 0..b.group.order() {
                morphism_keys.push(format!(
                    "{}:{}:{}",
                    b.label, c, b.group.elements[h]
                ));
                src.push(obj_base[bi] + c);
                tgt.push(obj_base[bi] + coset_of[b.group.mul(h, rep)]);
            }
        }
    }
    let midx = |bi: usize, c: usize, h: usize| {
        mor_base[bi] + c * blocks[bi].group.order() + h
    };
    let id_of: Vec<usize> = blocks
        .iter()
        .enumerate()
        .flat_map(|(bi, b)| {
            (0..coset_data[bi].1.len()).map(move |c| (bi, c, b.group.id))
        })
        .map(|(bi, c, h)| midx(bi, c, h))
        .collect();
    let mut comp = HashMap::new();
    let mut inv = vec![0usize; morphism_keys.len()];
    for (bi, b) in blocks.iter().enumerate() {
        let (coset_of, reps) = &coset_data[bi];
        let ng = b.group.order();
        for (c, &rep) in reps.iter().enumerate() {
            for h in 0..ng {
                let c2 = coset_of[b.group.mul(h, rep)];
                for h2 in 0..ng {
                    comp.insert(
                        (midx(bi, c, h), midx(bi, c2, h2)),
                        midx(bi, c, b.group.mul(h2, h)),
                    );
                }
                // (aK, h)^-1 = (h aK, h^-1).
                inv[midx(bi, c, h)] = midx(bi, c2, b.group.invert(h));
            }
        }
    }
    let ambient = TableCategory {
        object_keys,
        morphism_keys,
        src,
        tgt,
        id_of,
        comp,
        inv: Some(inv),
    };

    // Uniformizers: domain over covered block = im(phi)-orbit of coset 0,
    // Gamma_i(g, y) = the morphism (y, phi(g)).
    let mut uniformizers = Vec::new();
    for spec in charts {
        let mut domain = Vec::new();
        let mut gamma: Vec<Vec<usize>> = vec![Vec::new(); spec.group.order()];
        let mut act: Vec<Vec<usize>> = vec![Vec::new(); spec.group.order()];
        for (bi, cover) in spec.covers.iter().enumerate() {
            let Some(cov) = cover else { continue };
            let b = &blocks[bi];
            let (coset_of, reps) = &coset_data[bi];
            // im(phi)-orbit of the identity coset.
            let mut orbit: Vec<usize> = cov
                .hom
                .iter()
                .map(|&h| coset_of[b.group.mul(h, reps[0])])
                .collect();
            orbit.sort_unstable();
            orbit.dedup();
            let local_base = domain.len();
            domain.extend(orbit.iter().map(|&c| obj_base[bi] + c));
            for (gi, &h) in cov.hom.iter().enumerate() {
                for &c in &orbit {
                    let target_coset = coset_of[b.group.mul(h, reps[c])];
                    let pos = orbit.iter().position(|&c2| c2 == target_coset).unwrap();
                    act[gi].push(local_base + pos);
                    gamma[gi].push(midx(bi, c, h));
                }
            }
        }
        uniformizers.push(UniformizerSpec {
            group: spec.group.clone(),
            domain,
            act,
            gamma,
        });
    }

    let solution_classes = s_blocks.to_vec();
    AmbientAtlas::new(ambient, uniformizers, solution_classes)
}

// ---------------------------------------------------------------------------
// Seeded random generators.
// ---------------------------------------------------------------------------

fn group_catalog() -> Vec<FiniteGroup> {
    vec![
        FiniteGroup::trivial("C1"),
        FiniteGroup::cyclic("C2", 2),
        FiniteGroup::cyclic("C3", 3),
        FiniteGroup::cyclic("C4", 4),
        FiniteGroup::klein("V4"),
    ]
}

/// A random ambient atlas: 1-3 coset blocks, 1-3 charts. Always valid by
/// construction.
pub fn gen_atlas(seed: u64) -> AmbientAtlas {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x41544c41);
    let catalog = group_catalog();
    let n_blocks = rng.gen_range(1..=3);
    let blocks: Vec<Block> = (0..n_blocks)
        .map(|k| {
            let group = catalog[rng.gen_range(0..catalog.len())].clone();
            // Bias toward free blocks; occasionally take a nontrivial
            // stabilizer.
            let subs = group.subgroups();
            let stab = if rng.gen_bool(0.25) {
                subs[rng.gen_range(0..subs.len())].clone()
            } else {
                vec![group.id]
            };
            Block {
                group,
                stab,
                label: format!("b{k}"),
            }
        })
        .collect();
    let n_charts = rng.gen_range(1..=3);
    let mut charts: Vec<ChartSpec> = Vec::new();
    // Tuple spaces over a block have |U_I ^ block| = prod |G_i| / |K|, so
    // keep that product bounded to stay inside the corpus size limits.
    let mut load: Vec<usize> = blocks.iter().map(|_| 1).collect();
    'charts: for _ in 0..n_charts {
        // Bounded retries: the size budget can make further charts
        // impossible, in which case the atlas just has fewer charts.
        for _try in 0..60 {
            let group = catalog[rng.gen_range(0..catalog.len())].clone();
            let covers: Vec<Option<CoverSpec>> = blocks
                .iter()
                .enumerate()
                .map(|(bi, b)| {
                    if !rng.gen_bool(0.7) {
                        return None;
                    }
                    if load[bi] * group.order() > 6 * b.stab.len() {
                        return None;
                    }
                    let homs: Vec<Vec<usize>> = group
                        .injective_homs(&b.group)
                        .into_iter()
                        .filter(|h| b.stab.iter().all(|k| h.contains(k)))
                        .collect();
                    if homs.is_empty() {
                        None
                    } else {
                        let hom = homs[rng.gen_range(0..homs.len())].clone();
                        Some(CoverSpec { hom })
                    }
                })
                .collect();
            if covers.iter().any(Option::is_some) {
                for (bi, c) in covers.iter().enumerate() {
                    if c.is_some() {
                        load[bi] *= group.order();
                    }
                }
                charts.push(ChartSpec { group, covers });
                continue 'charts;
            }
        }
        break;
    }
    if charts.is_empty() {
        // Deterministic fallback: the identity chart on block 0.
        let b = &blocks[0];
        let hom: Vec<usize> = (0..b.group.order()).collect();
        let covers = (0..blocks.len())
            .map(|bi| (bi == 0).then(|| CoverSpec { hom: hom.clone() }))
            .collect();
        load[0] *= b.group.order();
        charts.push(ChartSpec {
            group: b.group.clone(),
            covers,
        });
    }
    // Solution classes: a nonempty subset of the covered blocks.
    let covered: Vec<usize> = (0..blocks.len())
        .filter(|&bi| charts.iter().any(|c| c.covers[bi].is_some()))
        .collect();
    let mut s_blocks: Vec<usize> = covered
        .iter()
        .copied()
        .filter(|_| rng.gen_bool(0.8))
        .collect();
    if s_blocks.is_empty() {
        s_blocks = vec![covered[rng.gen_range(0..covered.len())]];
    }
    build_block_atlas(&blocks, &charts, &s_blocks)
}

/// A random valid etale data instance within the corpus bounds
/// (`N <= 3`, `|V_J| <= 6`, `|G_i| <= 4`), derived from a random atlas via
/// cover reduction. Returns `None` when the draw exceeds the size bounds.
pub fn gen_etale_data(seed: u64) -> Option<EtaleDataV> {
    let atlas = gen_atlas(seed);
    let reduction = atlas.random_reduction(seed.wrapping_add(1));
    let built = atlas.build_v_data(&reduction).ok()?;
    let d = built.data;
    let within = d.spaces.values().all(|sp| sp.len() <= 6);
    within.then_some(d)
}

/// A random proximity-space cover-reduction problem: space of up to 8
/// points with sparse symmetric adjacency, open sets `F_i`, a covered subset
/// `S`, and optionally closed sets `C_i` inside the `F_i`.
#[allow(clippy::type_complexity)]
pub fn gen_cover_problem(
    seed: u64,
) -> (ProximitySpace, Vec<usize>, Vec<Vec<usize>>, Option<Vec<Vec<usize>>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x434f5645);
    let n = rng.gen_range(3..=8);
    let mut space = ProximitySpace::discrete(n);
    if rng.gen_bool(0.4) {
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.gen_bool(0.12) {
                    space.add_edge(a, b);
                }
            }
        }
    }
    let nf = rng.gen_range(1..=3);
    let f: Vec<Vec<usize>> = (0..nf)
        .map(|_| {
            let mut set: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.55)).collect();
            if set.is_empty() {
                set.push(rng.gen_range(0..n));
            }
            set
        })
        .collect();
    let union: Vec<usize> = {
        let mut u: Vec<usize> = f.iter().flatten().copied().collect();
        u.sort_unstable();
        u.dedup();
        u
    };
    let mut s: Vec<usize> = union.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
    if s.is_empty() {
        s.push(union[rng.gen_range(0..union.len())]);
    }
    let c: Option<Vec<Vec<usize>>> = rng.gen_bool(0.3).then(|| {
        f.iter()
            .map(|fi| fi.iter().copied().filter(|_| rng.gen_bool(0.4)).collect())
            .collect()
    });
    // When C is present the construction requires S inside the union of the
    // C_i; patch S down accordingly and fall back to no-C if that empties it.
    if let Some(cs) = &c {
        let cu: Vec<usize> = cs.iter().flatten().copied().collect();
        let s2: Vec<usize> = s.iter().copied().filter(|p| cu.contains(p)).collect();
        if s2.is_empty() {
            return (space, s, f, None);
        }
        return (space, s2, f, c);
    }
    (space, s, f, c)
}

/// The full stabilization pipeline on the two-chart fixture: sign bundle on
/// the swap class, `E_1 = Q` with the sign action, `tau_1` scaling by 1/2 on
/// `V_1`, and a section agreeing with one branch along the swap class.
#[allow(clippy::type_complexity)]
pub fn pipe_a() -> (
    XvGroupoid,
    GroupoidBundle,
    ESpec,
    Vec<LocalStabilization>,
    PartitionOfUnity,
    FredholmModel,
    QVec,
) {
    let xv = build_xv(&fix_a()).unwrap();
    let phi: Vec<Rat> = (0..7)
        .map(|o| {
            let key = xv.object_key(o);
            if key.contains(",b)") || key.contains(",v)") {
                rat_int(-1)
            } else {
                rat_int(1)
            }
        })
        .collect();
    let wv = GroupoidBundle::from_potential(&xv, &phi);
    let espec = ESpec {
        dims: vec![1, 0],
        reps: vec![
            vec![QMatrix::identity(1), QMatrix::from_i64(&[&[-1]])],
            vec![QMatrix::zeros(0, 0)],
        ],
    };
    let i1 = IndexSet::singleton(1);
    let a = xv.obj_lookup[&(i1, 0)];
    let b = xv.obj_lookup[&(i1, 1)];
    let tau1 = LocalStabilization {
        chart: 1,
        values: BTreeMap::from([
            (a, vec![QVec(vec![rat(1, 2)])]),
            (b, vec![QVec(vec![rat(1, 2)])]),
        ]),
    };
    let tau2 = LocalStabilization::zero(2);
    let pu = make_partition_pure(&xv);
    let mut values = vec![QVec(vec![rat_int(1)]); 7];
    for o in 0..7 {
        let key = xv.object_key(o);
        if key.contains(",a)") || key.contains(",u)") {
            values[o] = QVec(vec![rat(1, 2)]);
        } else if key.contains(",b)") || key.contains(",v)") {
            values[o] = QVec(vec![rat(-1, 2)]);
        }
    }
    let fm = FredholmModel::plain(Section { values }, &wv, &xv);
    let e = QVec(vec![rat_int(1)]);
    (xv, wv, espec, vec![tau1, tau2], pu, fm, e)
}

/// The one-object pipeline with full isotropy: the sign character on the
/// isotropy loop, the identity parameterization, and the zero section.
#[allow(clippy::type_complexity)]
pub fn pipe_z2f() -> (
    XvGroupoid,
    GroupoidBundle,
    ESpec,
    Vec<LocalStabilization>,
    PartitionOfUnity,
    FredholmModel,
    QVec,
) {
    let xv = build_xv(&fix_z2f()).unwrap();
    // mu(identity) = 1, mu(sigma loop) = -1: a genuine character, not a
    // potential.
    let mu = xv
        .morphisms
        .iter()
        .map(|m| {
            if m.g == xv.data.group.identity() {
                QMatrix::identity(1)
            } else {
                QMatrix::from_i64(&[&[-1]])
            }
        })
        .collect();
    let wv = GroupoidBundle {
        fiber_dim: vec![1],
        mu,
    };
    let espec = ESpec {
        dims: vec![1],
        reps: vec![vec![QMatrix::identity(1), QMatrix::from_i64(&[&[-1]])]],
    };
    let tau1 = LocalStabilization {
        chart: 1,
        values: BTreeMap::from([(0, vec![QVec(vec![rat_int(1)])])]),
    };
    let pu = make_partition_pure(&xv);
    let fm = FredholmModel::plain(Section::zero(&wv), &wv, &xv);
    let e = QVec(vec![rat(1, 2)]);
    (xv, wv, espec, vec![tau1], pu, fm, e)
}

// ---------------------------------------------------------------------------
// Random rank-1 bundles and full atlas pipelines.
// ---------------------------------------------------------------------------

/// All characters of a finite groupoid's isotropy semigroup at one object,
/// as maps to +-1; brute force over assignments.
fn isotropy_characters(c: &TableCategory, mors: &[usize]) -> Vec<BTreeMap<usize, i64>> {
    let n = mors.len();
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let chi: BTreeMap<usize, i64> = mors
            .iter()
            .enumerate()
            .map(|(k, &m)| (m, if mask & (1 << k) != 0 { -1 } else { 1 }))
            .collect();
        let ok = mors.iter().all(|&m1| {
            mors.iter().all(|&m2| match c.compose(m1, m2) {
                Some(m12) => chi[&m12] == chi[&m1] * chi[&m2],
                None => true,
            })
        });
        if ok {
            out.push(chi);
        }
    }
    out
}

/// Spanning-tree path morphisms from a class root to every object.
fn tree_paths(c: &TableCategory) -> Vec<Option<usize>> {
    let real = realize(c);
    let mut path: Vec<Option<usize>> = vec![None; c.n_objects()];
    let mut done = vec![false; c.n_objects()];
    for members in &real.classes {
        let root = members[0];
        done[root] = true;
        // path[root] stays None (the identity).
        let mut frontier = vec![root];
        while let Some(x) = frontier.pop() {
            for m in 0..c.n_morphisms() {
                let (s, t) = (c.source(m), c.target(m));
                let step = if s == x && !done[t] {
                    Some((t, m))
                } else if t == x && !done[s] {
                    Some((s, c.inverse(m).unwrap()))
                } else {
                    None
                };
                if let Some((y, my)) = step {
                    done[y] = true;
                    path[y] = Some(match path[x] {
                        None => my,
                        Some(px) => c.compose(px, my).unwrap(),
                    });
                    frontier.push(y);
                }
            }
        }
    }
    path
}

/// A random rank-1 bundle on a finite groupoid: a random potential twisted
/// by a random character of each class's isotropy. Also returns the norm
/// weights (reciprocal potentials) under which every transport is an
/// isometry.
pub fn gen_rank1_bundle(c: &TableCategory, rng: &mut ChaCha8Rng) -> (GroupoidBundle, Vec<Rat>) {
    let real = realize(c);
    let paths = tree_paths(c);
    let pool = [rat_int(1), rat_int(-1), rat(1, 2), rat_int(2), rat(3, 2)];
    let val: Vec<Rat> = (0..c.n_objects())
        .map(|_| pool[rng.gen_range(0..pool.len())].clone())
        .collect();
    // Per class: a character of the isotropy at the root.
    let mut chi_of_class: Vec<BTreeMap<usize, i64>> = Vec::new();
    for members in &real.classes {
        let root = members[0];
        let iso: Vec<usize> = (0..c.n_morphisms())
            .filter(|&m| c.source(m) == root && c.target(m) == root)
            .collect();
        let chars = isotropy_characters(c, &iso);
        chi_of_class.push(chars[rng.gen_range(0..chars.len())].clone());
    }
    let mu: Vec<QMatrix> = (0..c.n_morphisms())
        .map(|m| {
            let (s, t) = (c.source(m), c.target(m));
            let class = real.class_of[s];
            // loop = path(s) * m * path(t)^-1 at the root.
            let fwd = match paths[s] {
                None => m,
                Some(ps) => c.compose(ps, m).unwrap(),
            };
            let lp = match paths[t] {
                None => fwd,
                Some(pt) => c.compose(fwd, c.inverse(pt).unwrap()).unwrap(),
            };
            let sign = rat_int(chi_of_class[class][&lp]);
            QMatrix::from_rows(vec![vec![&val[t] / &val[s] * sign]])
        })
        .collect();
    let weights = val.iter().map(|v| v.abs().recip()).collect();
    (
        GroupoidBundle {
            fiber_dim: vec![1; c.n_objects()],
            mu,
        },
        weights,
    )
}

/// A random compatible section of a rank-1 bundle: transported from a random
/// root value per class, zeroed on classes whose twist obstructs a nonzero
/// section.
pub fn gen_section(c: &TableCategory, b: &GroupoidBundle, rng: &mut ChaCha8Rng) -> Section {
    let real = realize(c);
    let paths = tree_paths(c);
    let pool = [rat_int(1), rat_int(-1), rat(1, 2), rat_int(0)];
    let mut root_val: Vec<Rat> = (0..real.n_classes())
        .map(|_| pool[rng.gen_range(0..pool.len())].clone())
        .collect();
    loop {
        let values: Vec<QVec> = (0..c.n_objects())
            .map(|x| {
                let v0 = &root_val[real.class_of[x]];
                let transported = match paths[x] {
                    None => v0.clone(),
                    Some(p) => b.mu[p].get(0, 0) * v0,
                };
                QVec(vec![transported])
            })
            .collect();
        let f = Section { values };
        match check_section(&f, b, c) {
            Ok(()) => return f,
            Err(crate::bundle::BundleError::IncompatibleSection(key)) => {
                let m = c.morphism_index(&key).unwrap();
                root_val[real.class_of[c.source(m)]] = Rat::zero();
            }
            Err(_) => unreachable!(),
        }
    }
}

/// Everything an ambient stabilization pipeline needs, generated from a
/// seed; `None` when the draw exceeds the corpus size bounds.
pub struct AtlasPipeline {
    pub atlas: AmbientAtlas,
    pub built: BuiltVData,
    pub xv: XvGroupoid,
    pub psi: PsiResult,
    pub ambient_bundle: GroupoidBundle,
    pub restricted_bundle: GroupoidBundle,
    pub wv: GroupoidBundle,
    pub espec: ESpec,
    pub locals: Vec<LocalStabilization>,
    pub pu: PartitionOfUnity,
    pub ambient_u: Vec<bool>,
    pub fm_xv: FredholmModel,
    pub fm_restricted: FredholmModel,
    /// Model over the full ambient groupoid (used by the chart validators).
    pub fm_ambient: FredholmModel,
    pub e: QVec,
}

/// All sign characters of a finite group, as value vectors per element.
fn sign_characters(g: &FiniteGroup) -> Vec<Vec<i64>> {
    (0u32..(1 << g.order()))
        .map(|mask| {
            (0..g.order())
                .map(|a| if mask & (1 << a) != 0 { -1i64 } else { 1 })
                .collect::<Vec<_>>()
        })
        .filter(|chi| {
            chi[g.id] == 1
                && (0..g.order()).all(|a| (0..g.order()).all(|b| chi[g.mul(a, b)] == chi[a] * chi[b]))
        })
        .collect()
}

pub fn gen_pipeline(seed: u64) -> Option<AtlasPipeline> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x50495045);
    let atlas = gen_atlas(seed);
    let red = atlas.random_reduction(seed.wrapping_add(1));
    let built = atlas.build_v_data(&red).ok()?;
    if built.data.spaces.values().any(|sp| sp.len() > 6) {
        return None;
    }
    let xv = build_xv(&built.data).ok()?;
    let psi = build_psi(&atlas, &built, &xv).ok()?;
    let (ambient_bundle, amb_weights) = gen_rank1_bundle(&atlas.ambient, &mut rng);
    let restricted_bundle = GroupoidBundle {
        fiber_dim: vec![1; psi.restricted.n_objects()],
        mu: (0..psi.restricted.n_morphisms())
            .map(|m| {
                let key = psi.restricted.morphism_key(m);
                ambient_bundle.mu[atlas.ambient.morphism_index(&key).unwrap()].clone()
            })
            .collect(),
    };
    let (wv, _) =
        crate::bundle::build_wv(&restricted_bundle, &psi.restricted, &psi.psi, &xv, None).ok()?;

    // Parameter spaces: dimension 0 or 1 per chart with a random sign
    // character of the chart group.
    let dims: Vec<usize> = (0..atlas.n_charts())
        .map(|_| if rng.gen_bool(0.75) { 1 } else { 0 })
        .collect();
    let reps: Vec<Vec<QMatrix>> = atlas
        .uniformizers
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let g = &u.group;
            if dims[k] == 0 {
                return vec![QMatrix::zeros(0, 0); g.order()];
            }
            let chars = sign_characters(g);
            let chi = &chars[rng.gen_range(0..chars.len())];
            (0..g.order())
                .map(|a| QMatrix::from_rows(vec![vec![rat_int(chi[a])]]))
                .collect()
        })
        .collect();
    let espec = ESpec { dims, reps };

    // Chart-local stabilizations by equivariant averaging of random data,
    // scaled into the norm bound.
    let ambient_u = vec![true; atlas.ambient.n_objects()];
    let fm_ambient_full = FredholmModel {
        section: gen_section(&atlas.ambient, &ambient_bundle, &mut rng),
        norm_weights: amb_weights.iter().map(|w| vec![w.clone()]).collect(),
        u_set: ambient_u.clone(),
    };
    let pool = [rat_int(0), rat_int(1), rat_int(-1), rat(1, 2), rat(2, 3)];
    let locals: Vec<LocalStabilization> = atlas
        .uniformizers
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let chart = k + 1;
            let d = espec.dims[k];
            let mut ls = LocalStabilization::zero(chart);
            if d == 0 {
                return ls;
            }
            let g = &u.group;
            let n = g.order() as i64;
            let dom_pos: std::collections::HashMap<usize, usize> =
                u.domain.iter().enumerate().map(|(p, &x)| (x, p)).collect();
            let t0: BTreeMap<usize, Vec<Rat>> = u
                .domain
                .iter()
                .map(|&x| {
                    (
                        x,
                        (0..d).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect(),
                    )
                })
                .collect();
            // tau(x, e_b) = 1/|G| sum_a mu(Gamma(a, a^-1 x)) t0(a^-1 x, rep(a^-1) e_b).
            for &x in &u.domain {
                let mut slots = Vec::with_capacity(d);
                for b in 0..d {
                    let mut acc = Rat::zero();
                    for a in 0..g.order() {
                        let ai = g.invert(a);
                        let aix = u.domain[u.act[ai][dom_pos[&x]]];
                        let gam = u.gamma[a][dom_pos[&aix]];
                        let transport = ambient_bundle.mu[gam].get(0, 0);
                        let rep_coeff = espec.reps[k][ai].get(b, b);
                        acc += transport * &t0[&aix][b] * rep_coeff;
                    }
                    slots.push(QVec(vec![acc / Rat::from_integer(n.into())]));
                }
                ls.values.insert(x, slots);
            }
            // Scale into the norm bound N(tau(x, e_b)) <= 1.
            let fm = &fm_ambient_full;
            let max = ls
                .values
                .iter()
                .flat_map(|(&x, slots)| slots.iter().map(move |v| fm.norm(x, v)))
                .max()
                .unwrap_or_else(Rat::zero);
            if max > Rat::one() {
                let scale = max.recip();
                for slots in ls.values.values_mut() {
                    for v in slots.iter_mut() {
                        *v = v.scale(&scale);
                    }
                }
            }
            ls
        })
        .collect();

    let pu = make_partition_compatible(&atlas, &red);

    // Models over the restricted category and over the reduced groupoid.
    let fm_restricted = FredholmModel {
        section: Section {
            values: (0..psi.restricted.n_objects())
                .map(|x| {
                    let key = psi.restricted.object_key(x);
                    fm_ambient_full.section.values[atlas.ambient.object_index(&key).unwrap()]
                        .clone()
                })
                .collect(),
        },
        norm_weights: (0..psi.restricted.n_objects())
            .map(|x| {
                let key = psi.restricted.object_key(x);
                fm_ambient_full.norm_weights[atlas.ambient.object_index(&key).unwrap()].clone()
            })
            .collect(),
        u_set: vec![true; psi.restricted.n_objects()],
    };
    let fm_xv = FredholmModel {
        section: Section {
            values: (0..xv.n_objects())
                .map(|o| fm_restricted.section.values[psi.psi.obj_map[o]].clone())
                .collect(),
        },
        norm_weights: (0..xv.n_objects())
            .map(|o| fm_restricted.norm_weights[psi.psi.obj_map[o]].clone())
            .collect(),
        u_set: vec![true; xv.n_objects()],
    };
    let e = QVec(
        (0..espec.total_dim())
            .map(|_| pool[rng.gen_range(0..pool.len())].clone())
            .collect(),
    );
    Some(AtlasPipeline {
        atlas,
        built,
        xv,
        psi,
        ambient_bundle,
        restricted_bundle,
        wv,
        espec,
        locals,
        pu,
        ambient_u,
        fm_xv,
        fm_restricted,
        fm_ambient: fm_ambient_full,
        e,
    })
}

/// A random square tail matrix with entries in `{-2..2}`.
pub fn gen_tail(seed: u64, max_dim: usize) -> QMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x544f5752);
    let d = rng.gen_range(1..=max_dim);
    QMatrix::from_rows(
        (0..d)
            .map(|_| {
                (0..d)
                    .map(|_| crate::qlin::rat_int(rng.gen_range(-2..=2)))
                    .collect()
            })
            .collect(),
    )
}

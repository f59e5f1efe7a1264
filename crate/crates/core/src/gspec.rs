//! The GSPEC JSON interchange format: one document may carry a whole
//! pipeline; commands consume the sections they need.
//!
//! All cross-references are by string key, rationals serialize as `p/q` in
//! lowest terms with a positive denominator, and unknown sections are
//! rejected. Parsing is strict: malformed shapes report a JSON-pointer-like
//! path.

use crate::ambient::{AmbientAtlas, ProximitySpace, UniformizerSpec};
use crate::cat::TableCategory;
use crate::etale::{EtaleDataV, Overlap, VSpace};
use crate::group::{FiniteGroup, IndexSet};
use crate::qlin::{rat_from_str, rat_to_string, QMatrix, QVec, Rat};
use crate::xv::ESpec;
use serde_json::{Map, Value};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GspecError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error at {path}: {msg}")]
    Schema { path: String, msg: String },
}

fn schema(path: &str, msg: &str) -> GspecError {
    GspecError::Schema {
        path: path.to_string(),
        msg: msg.to_string(),
    }
}

const KNOWN_SECTIONS: &[&str] = &[
    "format_version",
    "groups",
    "etale_data",
    "groupoid",
    "action",
    "functor",
    "ambient",
    "uniformizers",
    "solution",
    "proximity",
    "cover",
    "bundle",
    "section",
    "multisection",
    "fredholm",
    "local_stab",
    "partition",
    "signs",
    "tower",
];

/// Either explicit transport tables keyed by morphism, or a rank-1 bundle
/// presented by a potential on objects (`mu(m) = phi(t)/phi(s)`).
#[derive(Clone, Debug)]
pub enum BundleSpec {
    Explicit {
        fiber_dim: BTreeMap<String, usize>,
        mu: BTreeMap<String, QMatrix>,
    },
    Potential {
        phi: BTreeMap<String, Rat>,
    },
}

#[derive(Clone, Debug)]
pub struct FredholmSpec {
    pub section: BTreeMap<String, QVec>,
    pub norm_weights: BTreeMap<String, Vec<Rat>>,
    pub control_set: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct LocalStabSpec {
    pub espec: ESpec,
    /// Per chart: object key -> values per basis slot.
    pub charts: BTreeMap<usize, BTreeMap<String, Vec<QVec>>>,
    pub e: QVec,
}

#[derive(Clone, Debug)]
pub struct CoverSpecSection {
    pub s: Vec<usize>,
    pub f: Vec<Vec<usize>>,
    pub c: Option<Vec<Vec<usize>>>,
}

#[derive(Clone, Debug)]
pub struct TowerSection {
    pub prefix: Vec<QMatrix>,
    pub tail: QMatrix,
    pub direct: bool,
}

/// A group action on the document's `groupoid` section, as element-indexed
/// object and morphism tables.
#[derive(Clone, Debug)]
pub struct ActionSpec {
    pub group: String,
    pub objects: Vec<Vec<usize>>,
    pub morphisms: Vec<Vec<usize>>,
}

/// A functor between the document's categories, by key maps. `from`/`to`
/// name sections (`"groupoid"` or `"ambient"`).
#[derive(Clone, Debug)]
pub struct FunctorSpec {
    pub from: String,
    pub to: String,
    pub objects: BTreeMap<String, String>,
    pub morphisms: BTreeMap<String, String>,
    /// Additionally require the functor to be an equivalence.
    pub equivalence: bool,
}

#[derive(Default, Debug)]
pub struct GspecDocument {
    pub groups: BTreeMap<String, FiniteGroup>,
    pub etale: Option<EtaleDataV>,
    pub groupoid: Option<TableCategory>,
    pub ambient: Option<TableCategory>,
    pub uniformizers: Option<Vec<UniformizerSpec>>,
    pub solution: Option<Vec<String>>,
    pub proximity: Option<ProximitySpace>,
    pub cover: Option<CoverSpecSection>,
    pub bundle: Option<BundleSpec>,
    pub section: Option<BTreeMap<String, QVec>>,
    pub multisection: Option<Vec<(String, QVec, Rat)>>,
    pub fredholm: Option<FredholmSpec>,
    pub local_stab: Option<LocalStabSpec>,
    pub partition: Option<BTreeMap<usize, BTreeMap<String, Rat>>>,
    pub signs: Option<BTreeMap<String, Rat>>,
    pub tower: Option<TowerSection>,
    pub action: Option<ActionSpec>,
    pub functor: Option<FunctorSpec>,
}

impl GspecDocument {
    /// Assembles the ambient atlas from the `ambient`, `uniformizers`, and
    /// `solution` sections.
    pub fn atlas(&self) -> Result<AmbientAtlas, GspecError> {
        let ambient = self
            .ambient
            .clone()
            .ok_or_else(|| schema("/ambient", "missing section"))?;
        let unis = self
            .uniformizers
            .clone()
            .ok_or_else(|| schema("/uniformizers", "missing section"))?;
        let real = crate::cat::realize(&ambient);
        let solution = match &self.solution {
            None => Vec::new(),
            Some(keys) => keys
                .iter()
                .map(|k| {
                    ambient
                        .object_index(k)
                        .map(|x| real.class_of[x])
                        .ok_or_else(|| schema("/solution", &format!("unknown object {k}")))
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        let mut solution = solution;
        solution.sort_unstable();
        solution.dedup();
        Ok(AmbientAtlas::new(ambient, unis, solution))
    }
}

// -------------------------------------------------------------------------
// Parsing helpers.
// -------------------------------------------------------------------------

fn as_obj<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, GspecError> {
    v.as_object().ok_or_else(|| schema(path, "expected object"))
}

fn as_arr<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, GspecError> {
    v.as_array().ok_or_else(|| schema(path, "expected array"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str, GspecError> {
    v.as_str().ok_or_else(|| schema(path, "expected string"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize, GspecError> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| schema(path, "expected nonnegative integer"))
}

fn parse_rat(v: &Value, path: &str) -> Result<Rat, GspecError> {
    let s = as_str(v, path)?;
    rat_from_str(s).map_err(|e| schema(path, &e.to_string()))
}

fn parse_qvec(v: &Value, path: &str) -> Result<QVec, GspecError> {
    let arr = as_arr(v, path)?;
    Ok(QVec(
        arr.iter()
            .enumerate()
            .map(|(k, x)| parse_rat(x, &format!("{path}/{k}")))
            .collect::<Result<_, _>>()?,
    ))
}

fn parse_qmatrix(v: &Value, path: &str) -> Result<QMatrix, GspecError> {
    let rows = as_arr(v, path)?;
    let parsed: Vec<Vec<Rat>> = rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let row = as_arr(row, &format!("{path}/{r}"))?;
            row.iter()
                .enumerate()
                .map(|(c, x)| parse_rat(x, &format!("{path}/{r}/{c}")))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    if let Some(first) = parsed.first() {
        if parsed.iter().any(|r| r.len() != first.len()) {
            return Err(schema(path, "ragged matrix"));
        }
    }
    Ok(QMatrix::from_rows(parsed))
}

fn parse_usize_table(v: &Value, path: &str) -> Result<Vec<Vec<usize>>, GspecError> {
    as_arr(v, path)?
        .iter()
        .enumerate()
        .map(|(r, row)| {
            as_arr(row, &format!("{path}/{r}"))?
                .iter()
                .enumerate()
                .map(|(c, x)| as_usize(x, &format!("{path}/{r}/{c}")))
                .collect()
        })
        .collect()
}

fn parse_indexset(v: &Value, path: &str) -> Result<IndexSet, GspecError> {
    let arr = as_arr(v, path)?;
    let idx: Vec<usize> = arr
        .iter()
        .enumerate()
        .map(|(k, x)| as_usize(x, &format!("{path}/{k}")))
        .collect::<Result<_, _>>()?;
    if idx.is_empty() || idx.contains(&0) {
        return Err(schema(path, "index sets are nonempty lists of 1-based indices"));
    }
    Ok(IndexSet::from_indices(&idx))
}

fn unique_labels(labels: &[String], path: &str) -> Result<(), GspecError> {
    let mut seen = std::collections::BTreeSet::new();
    for l in labels {
        if !seen.insert(l) {
            return Err(schema(path, &format!("duplicate key {l}")));
        }
    }
    Ok(())
}

fn parse_group(name: &str, v: &Value, path: &str) -> Result<FiniteGroup, GspecError> {
    let obj = as_obj(v, path)?;
    let elements: Vec<String> = as_arr(
        obj.get("elements").ok_or_else(|| schema(path, "missing elements"))?,
        &format!("{path}/elements"),
    )?
    .iter()
    .enumerate()
    .map(|(k, x)| as_str(x, &format!("{path}/elements/{k}")).map(String::from))
    .collect::<Result<_, _>>()?;
    unique_labels(&elements, &format!("{path}/elements"))?;
    let mult = parse_usize_table(
        obj.get("mult").ok_or_else(|| schema(path, "missing mult"))?,
        &format!("{path}/mult"),
    )?;
    let inv = as_arr(
        obj.get("inv").ok_or_else(|| schema(path, "missing inv"))?,
        &format!("{path}/inv"),
    )?
    .iter()
    .enumerate()
    .map(|(k, x)| as_usize(x, &format!("{path}/inv/{k}")))
    .collect::<Result<_, _>>()?;
    let id = as_usize(
        obj.get("id").ok_or_else(|| schema(path, "missing id"))?,
        &format!("{path}/id"),
    )?;
    Ok(FiniteGroup {
        name: name.to_string(),
        elements,
        mult,
        inv,
        id,
    })
}

fn parse_etale(
    v: &Value,
    groups: &BTreeMap<String, FiniteGroup>,
) -> Result<EtaleDataV, GspecError> {
    let path = "/etale_data";
    let obj = as_obj(v, path)?;
    let grefs = as_arr(
        obj.get("groups").ok_or_else(|| schema(path, "missing groups"))?,
        &format!("{path}/groups"),
    )?;
    let factors: Vec<FiniteGroup> = grefs
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let name = as_str(g, &format!("{path}/groups/{k}"))?;
            groups
                .get(name)
                .cloned()
                .ok_or_else(|| schema(&format!("{path}/groups/{k}"), "unknown group"))
        })
        .collect::<Result<_, _>>()?;
    let mut data = EtaleDataV::new(factors);
    for (k, sp) in as_arr(
        obj.get("spaces").ok_or_else(|| schema(path, "missing spaces"))?,
        &format!("{path}/spaces"),
    )?
    .iter()
    .enumerate()
    {
        let spath = format!("{path}/spaces/{k}");
        let so = as_obj(sp, &spath)?;
        let iset = parse_indexset(
            so.get("index").ok_or_else(|| schema(&spath, "missing index"))?,
            &format!("{spath}/index"),
        )?;
        let elems: Vec<String> = as_arr(
            so.get("elements").ok_or_else(|| schema(&spath, "missing elements"))?,
            &format!("{spath}/elements"),
        )?
        .iter()
        .enumerate()
        .map(|(j, x)| as_str(x, &format!("{spath}/elements/{j}")).map(String::from))
        .collect::<Result<_, _>>()?;
        unique_labels(&elems, &format!("{spath}/elements"))?;
        let mut actions = BTreeMap::new();
        let amap = as_obj(
            so.get("actions").ok_or_else(|| schema(&spath, "missing actions"))?,
            &format!("{spath}/actions"),
        )?;
        for (ik, tbl) in amap {
            let i: usize = ik
                .parse()
                .map_err(|_| schema(&format!("{spath}/actions"), "chart keys are integers"))?;
            actions.insert(i, parse_usize_table(tbl, &format!("{spath}/actions/{ik}"))?);
        }
        if data.spaces.insert(iset, VSpace { elems, actions }).is_some() {
            return Err(schema(&spath, "duplicate space index"));
        }
    }
    if let Some(ovs) = obj.get("overlaps") {
        for (k, ov) in as_arr(ovs, &format!("{path}/overlaps"))?.iter().enumerate() {
            let opath = format!("{path}/overlaps/{k}");
            let oo = as_obj(ov, &opath)?;
            let i = parse_indexset(
                oo.get("i").ok_or_else(|| schema(&opath, "missing i"))?,
                &format!("{opath}/i"),
            )?;
            let j = parse_indexset(
                oo.get("j").ok_or_else(|| schema(&opath, "missing j"))?,
                &format!("{opath}/j"),
            )?;
            let vj = data
                .spaces
                .get(&j)
                .ok_or_else(|| schema(&opath, "overlap over missing space"))?;
            let vi = data
                .spaces
                .get(&i)
                .ok_or_else(|| schema(&opath, "overlap into missing space"))?;
            let labels: Vec<&str> = as_arr(
                oo.get("elements").ok_or_else(|| schema(&opath, "missing elements"))?,
                &format!("{opath}/elements"),
            )?
            .iter()
            .enumerate()
            .map(|(n, x)| as_str(x, &format!("{opath}/elements/{n}")))
            .collect::<Result<_, _>>()?;
            let rhos: Vec<&str> = as_arr(
                oo.get("rho").ok_or_else(|| schema(&opath, "missing rho"))?,
                &format!("{opath}/rho"),
            )?
            .iter()
            .enumerate()
            .map(|(n, x)| as_str(x, &format!("{opath}/rho/{n}")))
            .collect::<Result<_, _>>()?;
            if labels.len() != rhos.len() {
                return Err(schema(&opath, "elements and rho lengths differ"));
            }
            let mut pairs: Vec<(usize, usize)> = labels
                .iter()
                .zip(&rhos)
                .map(|(l, r)| {
                    let e = vj
                        .index_of(l)
                        .ok_or_else(|| schema(&opath, &format!("unknown element {l}")))?;
                    let t = vi
                        .index_of(r)
                        .ok_or_else(|| schema(&opath, &format!("unknown image {r}")))?;
                    Ok((e, t))
                })
                .collect::<Result<_, GspecError>>()?;
            pairs.sort_unstable();
            let overlap = Overlap {
                elems: pairs.iter().map(|&(e, _)| e).collect(),
                rho: pairs.iter().map(|&(_, t)| t).collect(),
            };
            if data.overlaps.insert((i, j), overlap).is_some() {
                return Err(schema(&opath, "duplicate overlap"));
            }
        }
    }
    Ok(data)
}

fn parse_groupoid(v: &Value, path: &str) -> Result<TableCategory, GspecError> {
    let obj = as_obj(v, path)?;
    let object_keys: Vec<String> = as_arr(
        obj.get("objects").ok_or_else(|| schema(path, "missing objects"))?,
        &format!("{path}/objects"),
    )?
    .iter()
    .enumerate()
    .map(|(k, x)| as_str(x, &format!("{path}/objects/{k}")).map(String::from))
    .collect::<Result<_, _>>()?;
    unique_labels(&object_keys, &format!("{path}/objects"))?;
    let oidx: HashMap<&str, usize> = object_keys
        .iter()
        .enumerate()
        .map(|(k, s)| (s.as_str(), k))
        .collect();
    let mut morphism_keys = Vec::new();
    let mut src = Vec::new();
    let mut tgt = Vec::new();
    for (k, m) in as_arr(
        obj.get("morphisms").ok_or_else(|| schema(path, "missing morphisms"))?,
        &format!("{path}/morphisms"),
    )?
    .iter()
    .enumerate()
    {
        let mpath = format!("{path}/morphisms/{k}");
        let mo = as_obj(m, &mpath)?;
        morphism_keys.push(
            as_str(
                mo.get("key").ok_or_else(|| schema(&mpath, "missing key"))?,
                &format!("{mpath}/key"),
            )?
            .to_string(),
        );
        let s = as_str(
            mo.get("src").ok_or_else(|| schema(&mpath, "missing src"))?,
            &format!("{mpath}/src"),
        )?;
        let t = as_str(
            mo.get("tgt").ok_or_else(|| schema(&mpath, "missing tgt"))?,
            &format!("{mpath}/tgt"),
        )?;
        src.push(*oidx.get(s).ok_or_else(|| schema(&mpath, "unknown src"))?);
        tgt.push(*oidx.get(t).ok_or_else(|| schema(&mpath, "unknown tgt"))?);
    }
    unique_labels(&morphism_keys, &format!("{path}/morphisms"))?;
    let midx: HashMap<&str, usize> = morphism_keys
        .iter()
        .enumerate()
        .map(|(k, s)| (s.as_str(), k))
        .collect();
    let ids = as_obj(
        obj.get("identity").ok_or_else(|| schema(path, "missing identity"))?,
        &format!("{path}/identity"),
    )?;
    let mut id_of = vec![usize::MAX; object_keys.len()];
    for (ok, mk) in ids {
        let x = *oidx
            .get(ok.as_str())
            .ok_or_else(|| schema(&format!("{path}/identity"), "unknown object"))?;
        let m = as_str(mk, &format!("{path}/identity/{ok}"))?;
        id_of[x] = *midx
            .get(m)
            .ok_or_else(|| schema(&format!("{path}/identity/{ok}"), "unknown morphism"))?;
    }
    if id_of.contains(&usize::MAX) {
        return Err(schema(&format!("{path}/identity"), "missing identity for some object"));
    }
    let mut comp = HashMap::new();
    for (k, c) in as_arr(
        obj.get("compose").ok_or_else(|| schema(path, "missing compose"))?,
        &format!("{path}/compose"),
    )?
    .iter()
    .enumerate()
    {
        let cpath = format!("{path}/compose/{k}");
        let trip = as_arr(c, &cpath)?;
        if trip.len() != 3 {
            return Err(schema(&cpath, "compose entries are [m1, m2, m12]"));
        }
        let get = |n: usize| -> Result<usize, GspecError> {
            let s = as_str(&trip[n], &format!("{cpath}/{n}"))?;
            midx.get(s)
                .copied()
                .ok_or_else(|| schema(&format!("{cpath}/{n}"), "unknown morphism"))
        };
        comp.insert((get(0)?, get(1)?), get(2)?);
    }
    let inv = match obj.get("inverse") {
        None => None,
        Some(iv) => {
            let io = as_obj(iv, &format!("{path}/inverse"))?;
            let mut table = vec![usize::MAX; morphism_keys.len()];
            for (mk, mv) in io {
                let m = *midx
                    .get(mk.as_str())
                    .ok_or_else(|| schema(&format!("{path}/inverse"), "unknown morphism"))?;
                let v = as_str(mv, &format!("{path}/inverse/{mk}"))?;
                table[m] = *midx
                    .get(v)
                    .ok_or_else(|| schema(&format!("{path}/inverse/{mk}"), "unknown morphism"))?;
            }
            if table.contains(&usize::MAX) {
                return Err(schema(&format!("{path}/inverse"), "missing inverse for some morphism"));
            }
            Some(table)
        }
    };
    Ok(TableCategory {
        object_keys,
        morphism_keys,
        src,
        tgt,
        id_of,
        comp,
        inv,
    })
}

fn parse_uniformizers(
    v: &Value,
    groups: &BTreeMap<String, FiniteGroup>,
    ambient: &TableCategory,
) -> Result<Vec<UniformizerSpec>, GspecError> {
    let path = "/uniformizers";
    as_arr(v, path)?
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let upath = format!("{path}/{k}");
            let uo = as_obj(u, &upath)?;
            let gname = as_str(
                uo.get("group").ok_or_else(|| schema(&upath, "missing group"))?,
                &format!("{upath}/group"),
            )?;
            let group = groups
                .get(gname)
                .cloned()
                .ok_or_else(|| schema(&format!("{upath}/group"), "unknown group"))?;
            let domain: Vec<usize> = as_arr(
                uo.get("domain").ok_or_else(|| schema(&upath, "missing domain"))?,
                &format!("{upath}/domain"),
            )?
            .iter()
            .enumerate()
            .map(|(n, x)| {
                let key = as_str(x, &format!("{upath}/domain/{n}"))?;
                ambient
                    .object_index(key)
                    .ok_or_else(|| schema(&format!("{upath}/domain/{n}"), "unknown object"))
            })
            .collect::<Result<_, _>>()?;
            let act = parse_usize_table(
                uo.get("act").ok_or_else(|| schema(&upath, "missing act"))?,
                &format!("{upath}/act"),
            )?;
            let gamma_keys = as_arr(
                uo.get("gamma").ok_or_else(|| schema(&upath, "missing gamma"))?,
                &format!("{upath}/gamma"),
            )?;
            let gamma: Vec<Vec<usize>> = gamma_keys
                .iter()
                .enumerate()
                .map(|(g, row)| {
                    as_arr(row, &format!("{upath}/gamma/{g}"))?
                        .iter()
                        .enumerate()
                        .map(|(n, x)| {
                            let key = as_str(x, &format!("{upath}/gamma/{g}/{n}"))?;
                            ambient.morphism_index(key).ok_or_else(|| {
                                schema(&format!("{upath}/gamma/{g}/{n}"), "unknown morphism")
                            })
                        })
                        .collect()
                })
                .collect::<Result<_, _>>()?;
            Ok(UniformizerSpec {
                group,
                domain,
                act,
                gamma,
            })
        })
        .collect()
}

pub fn parse(text: &str) -> Result<GspecDocument, GspecError> {
    let root: Value = serde_json::from_str(text).map_err(|e| GspecError::Parse(e.to_string()))?;
    let obj = as_obj(&root, "/")?;
    match obj.get("format_version") {
        Some(Value::String(v)) if v == "gspec-1" => {}
        _ => return Err(schema("/format_version", "expected \"gspec-1\"")),
    }
    for key in obj.keys() {
        if !KNOWN_SECTIONS.contains(&key.as_str()) {
            return Err(schema(&format!("/{key}"), "unknown section"));
        }
    }
    let mut doc = GspecDocument::default();
    if let Some(gs) = obj.get("groups") {
        for (name, gv) in as_obj(gs, "/groups")? {
            doc.groups
                .insert(name.clone(), parse_group(name, gv, &format!("/groups/{name}"))?);
        }
    }
    if let Some(v) = obj.get("etale_data") {
        doc.etale = Some(parse_etale(v, &doc.groups)?);
    }
    if let Some(v) = obj.get("groupoid") {
        doc.groupoid = Some(parse_groupoid(v, "/groupoid")?);
    }
    if let Some(v) = obj.get("ambient") {
        doc.ambient = Some(parse_groupoid(v, "/ambient")?);
    }
    if let Some(v) = obj.get("uniformizers") {
        let ambient = doc
            .ambient
            .as_ref()
            .ok_or_else(|| schema("/uniformizers", "requires an ambient section"))?;
        doc.uniformizers = Some(parse_uniformizers(v, &doc.groups, ambient)?);
    }
    if let Some(v) = obj.get("solution") {
        doc.solution = Some(
            as_arr(v, "/solution")?
                .iter()
                .enumerate()
                .map(|(k, x)| as_str(x, &format!("/solution/{k}")).map(String::from))
                .collect::<Result<_, _>>()?,
        );
    }
    if let Some(v) = obj.get("proximity") {
        let po = as_obj(v, "/proximity")?;
        let n = as_usize(
            po.get("points").ok_or_else(|| schema("/proximity", "missing points"))?,
            "/proximity/points",
        )?;
        let mut space = ProximitySpace::discrete(n);
        if let Some(es) = po.get("edges") {
            for (k, e) in as_arr(es, "/proximity/edges")?.iter().enumerate() {
                let pair = as_arr(e, &format!("/proximity/edges/{k}"))?;
                if pair.len() != 2 {
                    return Err(schema(&format!("/proximity/edges/{k}"), "edges are pairs"));
                }
                let a = as_usize(&pair[0], &format!("/proximity/edges/{k}/0"))?;
                let b = as_usize(&pair[1], &format!("/proximity/edges/{k}/1"))?;
                if a >= n || b >= n {
                    return Err(schema(&format!("/proximity/edges/{k}"), "point out of range"));
                }
                space.add_edge(a, b);
            }
        }
        doc.proximity = Some(space);
    }
    if let Some(v) = obj.get("cover") {
        let co = as_obj(v, "/cover")?;
        let s = as_arr(
            co.get("s").ok_or_else(|| schema("/cover", "missing s"))?,
            "/cover/s",
        )?
        .iter()
        .enumerate()
        .map(|(k, x)| as_usize(x, &format!("/cover/s/{k}")))
        .collect::<Result<_, _>>()?;
        let f = parse_usize_table(
            co.get("f").ok_or_else(|| schema("/cover", "missing f"))?,
            "/cover/f",
        )?;
        let c = co
            .get("c")
            .map(|cv| parse_usize_table(cv, "/cover/c"))
            .transpose()?;
        doc.cover = Some(CoverSpecSection { s, f, c });
    }
    if let Some(v) = obj.get("bundle") {
        let bo = as_obj(v, "/bundle")?;
        if let Some(pv) = bo.get("potential") {
            let mut phi = BTreeMap::new();
            for (k, r) in as_obj(pv, "/bundle/potential")? {
                phi.insert(k.clone(), parse_rat(r, &format!("/bundle/potential/{k}"))?);
            }
            doc.bundle = Some(BundleSpec::Potential { phi });
        } else {
            let mut fiber_dim = BTreeMap::new();
            for (k, d) in as_obj(
                bo.get("fiber_dim").ok_or_else(|| schema("/bundle", "missing fiber_dim"))?,
                "/bundle/fiber_dim",
            )? {
                fiber_dim.insert(k.clone(), as_usize(d, &format!("/bundle/fiber_dim/{k}"))?);
            }
            let mut mu = BTreeMap::new();
            for (k, m) in as_obj(
                bo.get("mu").ok_or_else(|| schema("/bundle", "missing mu"))?,
                "/bundle/mu",
            )? {
                mu.insert(k.clone(), parse_qmatrix(m, &format!("/bundle/mu/{k}"))?);
            }
            doc.bundle = Some(BundleSpec::Explicit { fiber_dim, mu });
        }
    }
    if let Some(v) = obj.get("section") {
        let mut out = BTreeMap::new();
        for (k, s) in as_obj(v, "/section")? {
            out.insert(k.clone(), parse_qvec(s, &format!("/section/{k}"))?);
        }
        doc.section = Some(out);
    }
    if let Some(v) = obj.get("multisection") {
        let mut out = Vec::new();
        for (k, e) in as_arr(v, "/multisection")?.iter().enumerate() {
            let epath = format!("/multisection/{k}");
            let eo = as_obj(e, &epath)?;
            let objk = as_str(
                eo.get("object").ok_or_else(|| schema(&epath, "missing object"))?,
                &format!("{epath}/object"),
            )?;
            let vec = parse_qvec(
                eo.get("vector").ok_or_else(|| schema(&epath, "missing vector"))?,
                &format!("{epath}/vector"),
            )?;
            let wt = parse_rat(
                eo.get("weight").ok_or_else(|| schema(&epath, "missing weight"))?,
                &format!("{epath}/weight"),
            )?;
            out.push((objk.to_string(), vec, wt));
        }
        doc.multisection = Some(out);
    }
    if let Some(v) = obj.get("fredholm") {
        let fo = as_obj(v, "/fredholm")?;
        let mut section = BTreeMap::new();
        for (k, s) in as_obj(
            fo.get("section").ok_or_else(|| schema("/fredholm", "missing section"))?,
            "/fredholm/section",
        )? {
            section.insert(k.clone(), parse_qvec(s, &format!("/fredholm/section/{k}"))?);
        }
        let mut norm_weights = BTreeMap::new();
        for (k, s) in as_obj(
            fo.get("norm_weights")
                .ok_or_else(|| schema("/fredholm", "missing norm_weights"))?,
            "/fredholm/norm_weights",
        )? {
            norm_weights.insert(
                k.clone(),
                parse_qvec(s, &format!("/fredholm/norm_weights/{k}"))?.0,
            );
        }
        let control_set = as_arr(
            fo.get("control_set")
                .ok_or_else(|| schema("/fredholm", "missing control_set"))?,
            "/fredholm/control_set",
        )?
        .iter()
        .enumerate()
        .map(|(k, x)| as_str(x, &format!("/fredholm/control_set/{k}")).map(String::from))
        .collect::<Result<_, _>>()?;
        doc.fredholm = Some(FredholmSpec {
            section,
            norm_weights,
            control_set,
        });
    }
    if let Some(v) = obj.get("local_stab") {
        let lo = as_obj(v, "/local_stab")?;
        let dims: Vec<usize> = as_arr(
            lo.get("e_dims").ok_or_else(|| schema("/local_stab", "missing e_dims"))?,
            "/local_stab/e_dims",
        )?
        .iter()
        .enumerate()
        .map(|(k, x)| as_usize(x, &format!("/local_stab/e_dims/{k}")))
        .collect::<Result<_, _>>()?;
        let reps: Vec<Vec<QMatrix>> = as_arr(
            lo.get("e_reps").ok_or_else(|| schema("/local_stab", "missing e_reps"))?,
            "/local_stab/e_reps",
        )?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            as_arr(r, &format!("/local_stab/e_reps/{i}"))?
                .iter()
                .enumerate()
                .map(|(g, m)| parse_qmatrix(m, &format!("/local_stab/e_reps/{i}/{g}")))
                .collect()
        })
        .collect::<Result<_, _>>()?;
        let mut charts = BTreeMap::new();
        for (k, c) in as_arr(
            lo.get("charts").ok_or_else(|| schema("/local_stab", "missing charts"))?,
            "/local_stab/charts",
        )?
        .iter()
        .enumerate()
        {
            let cpath = format!("/local_stab/charts/{k}");
            let co = as_obj(c, &cpath)?;
            let chart = as_usize(
                co.get("chart").ok_or_else(|| schema(&cpath, "missing chart"))?,
                &format!("{cpath}/chart"),
            )?;
            let mut tau = BTreeMap::new();
            for (ok, vals) in as_obj(
                co.get("tau").ok_or_else(|| schema(&cpath, "missing tau"))?,
                &format!("{cpath}/tau"),
            )? {
                let slots: Vec<QVec> = as_arr(vals, &format!("{cpath}/tau/{ok}"))?
                    .iter()
                    .enumerate()
                    .map(|(b, x)| parse_qvec(x, &format!("{cpath}/tau/{ok}/{b}")))
                    .collect::<Result<_, _>>()?;
                tau.insert(ok.clone(), slots);
            }
            charts.insert(chart, tau);
        }
        let e = parse_qvec(
            lo.get("e").ok_or_else(|| schema("/local_stab", "missing e"))?,
            "/local_stab/e",
        )?;
        doc.local_stab = Some(LocalStabSpec {
            espec: ESpec { dims, reps },
            charts,
            e,
        });
    }
    if let Some(v) = obj.get("partition") {
        let mut out = BTreeMap::new();
        for (ik, classes) in as_obj(v, "/partition")? {
            let i: usize = ik
                .parse()
                .map_err(|_| schema("/partition", "chart keys are integers"))?;
            let mut row = BTreeMap::new();
            for (label, val) in as_obj(classes, &format!("/partition/{ik}"))? {
                row.insert(label.clone(), parse_rat(val, &format!("/partition/{ik}/{label}"))?);
            }
            out.insert(i, row);
        }
        doc.partition = Some(out);
    }
    if let Some(v) = obj.get("signs") {
        let mut out = BTreeMap::new();
        for (label, val) in as_obj(v, "/signs")? {
            out.insert(label.clone(), parse_rat(val, &format!("/signs/{label}"))?);
        }
        doc.signs = Some(out);
    }
    if let Some(v) = obj.get("action") {
        let ao = as_obj(v, "/action")?;
        let group = as_str(
            ao.get("group").ok_or_else(|| schema("/action", "missing group"))?,
            "/action/group",
        )?
        .to_string();
        if !doc.groups.contains_key(&group) {
            return Err(schema("/action/group", "unknown group"));
        }
        let objects = parse_usize_table(
            ao.get("objects").ok_or_else(|| schema("/action", "missing objects"))?,
            "/action/objects",
        )?;
        let morphisms = parse_usize_table(
            ao.get("morphisms").ok_or_else(|| schema("/action", "missing morphisms"))?,
            "/action/morphisms",
        )?;
        doc.action = Some(ActionSpec {
            group,
            objects,
            morphisms,
        });
    }
    if let Some(v) = obj.get("functor") {
        let fo = as_obj(v, "/functor")?;
        let get_name = |key: &str| -> Result<String, GspecError> {
            Ok(as_str(
                fo.get(key)
                    .ok_or_else(|| schema("/functor", &format!("missing {key}")))?,
                &format!("/functor/{key}"),
            )?
            .to_string())
        };
        let (from, to) = (get_name("from")?, get_name("to")?);
        for name in [&from, &to] {
            if name != "groupoid" && name != "ambient" {
                return Err(schema("/functor", "from/to must be groupoid or ambient"));
            }
        }
        let mut objects = BTreeMap::new();
        for (k, x) in as_obj(
            fo.get("objects").ok_or_else(|| schema("/functor", "missing objects"))?,
            "/functor/objects",
        )? {
            objects.insert(k.clone(), as_str(x, &format!("/functor/objects/{k}"))?.to_string());
        }
        let mut morphisms = BTreeMap::new();
        for (k, x) in as_obj(
            fo.get("morphisms").ok_or_else(|| schema("/functor", "missing morphisms"))?,
            "/functor/morphisms",
        )? {
            morphisms.insert(
                k.clone(),
                as_str(x, &format!("/functor/morphisms/{k}"))?.to_string(),
            );
        }
        let equivalence = fo
            .get("equivalence")
            .map(|d| d.as_bool().ok_or_else(|| schema("/functor/equivalence", "expected bool")))
            .transpose()?
            .unwrap_or(false);
        doc.functor = Some(FunctorSpec {
            from,
            to,
            objects,
            morphisms,
            equivalence,
        });
    }
    if let Some(v) = obj.get("tower") {
        let to = as_obj(v, "/tower")?;
        let prefix = match to.get("prefix") {
            None => Vec::new(),
            Some(p) => as_arr(p, "/tower/prefix")?
                .iter()
                .enumerate()
                .map(|(k, m)| parse_qmatrix(m, &format!("/tower/prefix/{k}")))
                .collect::<Result<_, _>>()?,
        };
        let tail = parse_qmatrix(
            to.get("tail").ok_or_else(|| schema("/tower", "missing tail"))?,
            "/tower/tail",
        )?;
        let direct = to
            .get("direct")
            .map(|d| d.as_bool().ok_or_else(|| schema("/tower/direct", "expected bool")))
            .transpose()?
            .unwrap_or(false);
        doc.tower = Some(TowerSection {
            prefix,
            tail,
            direct,
        });
    }
    Ok(doc)
}

/// Resolves a functor spec against its categories by key lookup.
pub fn resolve_functor(
    spec: &FunctorSpec,
    from: &TableCategory,
    to: &TableCategory,
) -> Result<crate::cat::Functor, GspecError> {
    let obj_map = (0..from.object_keys.len())
        .map(|x| {
            let key = &from.object_keys[x];
            let img = spec
                .objects
                .get(key)
                .ok_or_else(|| schema("/functor/objects", &format!("missing object {key}")))?;
            to.object_index(img)
                .ok_or_else(|| schema("/functor/objects", &format!("unknown image {img}")))
        })
        .collect::<Result<_, _>>()?;
    let mor_map = (0..from.morphism_keys.len())
        .map(|m| {
            let key = &from.morphism_keys[m];
            let img = spec
                .morphisms
                .get(key)
                .ok_or_else(|| schema("/functor/morphisms", &format!("missing morphism {key}")))?;
            to.morphism_index(img)
                .ok_or_else(|| schema("/functor/morphisms", &format!("unknown image {img}")))
        })
        .collect::<Result<_, _>>()?;
    Ok(crate::cat::Functor { obj_map, mor_map })
}

/// Resolves a bundle spec against a base category by key lookup.
pub fn resolve_bundle(
    spec: &BundleSpec,
    base: &(impl crate::cat::Cat + ?Sized),
) -> Result<crate::bundle::GroupoidBundle, GspecError> {
    match spec {
        BundleSpec::Potential { phi } => {
            let values: Vec<Rat> = (0..base.n_objects())
                .map(|x| {
                    let key = base.object_key(x);
                    phi.get(&key)
                        .cloned()
                        .ok_or_else(|| schema("/bundle/potential", &format!("missing object {key}")))
                })
                .collect::<Result<_, _>>()?;
            Ok(crate::bundle::GroupoidBundle::from_potential(base, &values))
        }
        BundleSpec::Explicit { fiber_dim, mu } => {
            let dims: Vec<usize> = (0..base.n_objects())
                .map(|x| {
                    let key = base.object_key(x);
                    fiber_dim
                        .get(&key)
                        .copied()
                        .ok_or_else(|| schema("/bundle/fiber_dim", &format!("missing object {key}")))
                })
                .collect::<Result<_, _>>()?;
            let mats: Vec<QMatrix> = (0..base.n_morphisms())
                .map(|m| {
                    let key = base.morphism_key(m);
                    mu.get(&key)
                        .cloned()
                        .ok_or_else(|| schema("/bundle/mu", &format!("missing morphism {key}")))
                })
                .collect::<Result<_, _>>()?;
            Ok(crate::bundle::GroupoidBundle {
                fiber_dim: dims,
                mu: mats,
            })
        }
    }
}

// -------------------------------------------------------------------------
// Emission.
// -------------------------------------------------------------------------

pub fn rat_value(r: &Rat) -> Value {
    Value::String(rat_to_string(r))
}

pub fn qvec_value(v: &QVec) -> Value {
    Value::Array(v.0.iter().map(rat_value).collect())
}

pub fn qmatrix_value(m: &QMatrix) -> Value {
    Value::Array(
        (0..m.rows)
            .map(|r| Value::Array((0..m.cols).map(|c| rat_value(m.get(r, c))).collect()))
            .collect(),
    )
}

pub fn indexset_value(i: IndexSet) -> Value {
    Value::Array(i.indices().into_iter().map(|x| Value::from(x as u64)).collect())
}

/// Serializes etale data back into its GSPEC section (plus a `groups`
/// section with generated names).
pub fn etale_to_sections(data: &EtaleDataV) -> (Value, Value) {
    let mut groups = Map::new();
    for (k, g) in data.group.factors.iter().enumerate() {
        let mut go = Map::new();
        go.insert(
            "elements".into(),
            Value::Array(g.elements.iter().map(|e| Value::String(e.clone())).collect()),
        );
        go.insert(
            "mult".into(),
            Value::Array(
                g.mult
                    .iter()
                    .map(|row| Value::Array(row.iter().map(|&x| Value::from(x as u64)).collect()))
                    .collect(),
            ),
        );
        go.insert(
            "inv".into(),
            Value::Array(g.inv.iter().map(|&x| Value::from(x as u64)).collect()),
        );
        go.insert("id".into(), Value::from(g.id as u64));
        groups.insert(format!("G{}", k + 1), Value::Object(go));
    }
    let mut ed = Map::new();
    ed.insert(
        "groups".into(),
        Value::Array((0..data.n).map(|k| Value::String(format!("G{}", k + 1))).collect()),
    );
    let spaces: Vec<Value> = data
        .spaces
        .iter()
        .map(|(&iset, sp)| {
            let mut so = Map::new();
            so.insert("index".into(), indexset_value(iset));
            so.insert(
                "elements".into(),
                Value::Array(sp.elems.iter().map(|e| Value::String(e.clone())).collect()),
            );
            let mut actions = Map::new();
            for (i, tbl) in &sp.actions {
                actions.insert(
                    i.to_string(),
                    Value::Array(
                        tbl.iter()
                            .map(|row| {
                                Value::Array(row.iter().map(|&x| Value::from(x as u64)).collect())
                            })
                            .collect(),
                    ),
                );
            }
            so.insert("actions".into(), Value::Object(actions));
            Value::Object(so)
        })
        .collect();
    ed.insert("spaces".into(), Value::Array(spaces));
    let overlaps: Vec<Value> = data
        .overlaps
        .iter()
        .map(|(&(i, j), o)| {
            let mut oo = Map::new();
            oo.insert("i".into(), indexset_value(i));
            oo.insert("j".into(), indexset_value(j));
            oo.insert(
                "elements".into(),
                Value::Array(
                    o.elems
                        .iter()
                        .map(|&e| Value::String(data.elem_label(j, e)))
                        .collect(),
                ),
            );
            oo.insert(
                "rho".into(),
                Value::Array(
                    o.rho
                        .iter()
                        .map(|&t| Value::String(data.elem_label(i, t)))
                        .collect(),
                ),
            );
            Value::Object(oo)
        })
        .collect();
    ed.insert("overlaps".into(), Value::Array(overlaps));
    (Value::Object(groups), Value::Object(ed))
}

/// Serializes a table category into the `groupoid`/`ambient` section shape.
pub fn groupoid_to_section(c: &TableCategory) -> Value {
    let mut out = Map::new();
    out.insert(
        "objects".into(),
        Value::Array(c.object_keys.iter().map(|k| Value::String(k.clone())).collect()),
    );
    out.insert(
        "morphisms".into(),
        Value::Array(
            (0..c.morphism_keys.len())
                .map(|m| {
                    let mut mo = Map::new();
                    mo.insert("key".into(), Value::String(c.morphism_keys[m].clone()));
                    mo.insert("src".into(), Value::String(c.object_keys[c.src[m]].clone()));
                    mo.insert("tgt".into(), Value::String(c.object_keys[c.tgt[m]].clone()));
                    Value::Object(mo)
                })
                .collect(),
        ),
    );
    let mut ids = Map::new();
    for (x, &m) in c.id_of.iter().enumerate() {
        ids.insert(
            c.object_keys[x].clone(),
            Value::String(c.morphism_keys[m].clone()),
        );
    }
    out.insert("identity".into(), Value::Object(ids));
    let mut pairs: Vec<(&usize, &usize, &usize)> =
        c.comp.iter().map(|((a, b), c)| (a, b, c)).collect();
    pairs.sort();
    out.insert(
        "compose".into(),
        Value::Array(
            pairs
                .into_iter()
                .map(|(&a, &b, &ab)| {
                    Value::Array(vec![
                        Value::String(c.morphism_keys[a].clone()),
                        Value::String(c.morphism_keys[b].clone()),
                        Value::String(c.morphism_keys[ab].clone()),
                    ])
                })
                .collect(),
        ),
    );
    if let Some(inv) = &c.inv {
        let mut io = Map::new();
        for (m, &mi) in inv.iter().enumerate() {
            io.insert(
                c.morphism_keys[m].clone(),
                Value::String(c.morphism_keys[mi].clone()),
            );
        }
        out.insert("inverse".into(), Value::Object(io));
    }
    Value::Object(out)
}

/// Serializes an atlas into `ambient`, `uniformizers`, `solution`, and
/// `groups` sections keyed `U1..Un`.
pub fn atlas_to_sections(atlas: &AmbientAtlas) -> (Value, Value, Value, Value) {
    let ambient = groupoid_to_section(&atlas.ambient);
    let mut groups = Map::new();
    let unis: Vec<Value> = atlas
        .uniformizers
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let gname = format!("U{}", k + 1);
            let mut go = Map::new();
            go.insert(
                "elements".into(),
                Value::Array(u.group.elements.iter().map(|e| Value::String(e.clone())).collect()),
            );
            go.insert(
                "mult".into(),
                Value::Array(
                    u.group
                        .mult
                        .iter()
                        .map(|r| Value::Array(r.iter().map(|&x| Value::from(x as u64)).collect()))
                        .collect(),
                ),
            );
            go.insert(
                "inv".into(),
                Value::Array(u.group.inv.iter().map(|&x| Value::from(x as u64)).collect()),
            );
            go.insert("id".into(), Value::from(u.group.id as u64));
            groups.insert(gname.clone(), Value::Object(go));
            let mut uo = Map::new();
            uo.insert("group".into(), Value::String(gname));
            uo.insert(
                "domain".into(),
                Value::Array(
                    u.domain
                        .iter()
                        .map(|&x| Value::String(atlas.ambient.object_keys[x].clone()))
                        .collect(),
                ),
            );
            uo.insert(
                "act".into(),
                Value::Array(
                    u.act
                        .iter()
                        .map(|r| Value::Array(r.iter().map(|&x| Value::from(x as u64)).collect()))
                        .collect(),
                ),
            );
            uo.insert(
                "gamma".into(),
                Value::Array(
                    u.gamma
                        .iter()
                        .map(|r| {
                            Value::Array(
                                r.iter()
                                    .map(|&m| {
                                        Value::String(atlas.ambient.morphism_keys[m].clone())
                                    })
                                    .collect(),
                            )
                        })
                        .collect(),
                ),
            );
            Value::Object(uo)
        })
        .collect();
    let solution: Vec<Value> = atlas
        .solution_classes
        .iter()
        .map(|&c| Value::String(atlas.real.labels[c].clone()))
        .collect();
    (
        Value::Object(groups),
        ambient,
        Value::Array(unis),
        Value::Array(solution),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_fix_a_through_sections() {
        let d = crate::fixtures::fix_a();
        let (groups, etale) = etale_to_sections(&d);
        let mut doc = Map::new();
        doc.insert("format_version".into(), Value::String("gspec-1".into()));
        doc.insert("groups".into(), groups);
        doc.insert("etale_data".into(), etale);
        let text = serde_json::to_string_pretty(&Value::Object(doc)).unwrap();
        let parsed = parse(&text).unwrap();
        let d2 = parsed.etale.unwrap();
        assert!(d2.validate().passed());
        let xv = crate::xv::build_xv(&d2).unwrap();
        assert_eq!(crate::cat::Cat::n_morphisms(&xv), 25);
        // Re-serialization is byte-identical.
        let (g2, e2) = etale_to_sections(&d2);
        let mut doc2 = Map::new();
        doc2.insert("format_version".into(), Value::String("gspec-1".into()));
        doc2.insert("groups".into(), g2);
        doc2.insert("etale_data".into(), e2);
        assert_eq!(text, serde_json::to_string_pretty(&Value::Object(doc2)).unwrap());
    }

    #[test]
    fn unknown_section_rejected() {
        let text = r#"{"format_version": "gspec-1", "mystery": {}}"#;
        assert!(matches!(parse(text), Err(GspecError::Schema { .. })));
    }

    #[test]
    fn duplicate_object_key_rejected() {
        let text = r#"{
            "format_version": "gspec-1",
            "groupoid": {
                "objects": ["a", "a"],
                "morphisms": [{"key": "id", "src": "a", "tgt": "a"}],
                "identity": {"a": "id"},
                "compose": [["id", "id", "id"]]
            }
        }"#;
        let err = parse(text).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn empty_document_is_valid() {
        let doc = parse(r#"{"format_version": "gspec-1"}"#).unwrap();
        assert!(doc.etale.is_none());
        assert!(doc.groups.is_empty());
    }
}

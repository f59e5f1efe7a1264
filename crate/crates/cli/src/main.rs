//! Deterministic command-line front end for the finite groupoid engine.
//!
//! Exit codes: 0 all checks pass, 1 a mathematical check failed (the report
//! names it), 2 input error. Reports are byte-deterministic given identical
//! inputs and flags.

use clap::{Parser, Subcommand};
use gspec_core::ambient::{cover_reduce, Reduction};
use gspec_core::bundle::{check_multisection, validate_bundle, GroupoidBundle, Multisection, Section};
use gspec_core::cat::{check_category, check_groupoid, complete_nonsingular, realize, Cat};
use gspec_core::gspec::{self, GspecDocument, GspecError};
use gspec_core::qlin::{rat_to_string, QVec};
use gspec_core::report::Report;
use gspec_core::stab::{
    self, count, make_partition_pure, run_pure_pipeline, theta, theta_class_table, FredholmModel,
    LocalStabilization, PartitionOfUnity,
};
use gspec_core::tower::{check_dual_iso, colim, lim, lim1, DirectQTower, QTower};
use gspec_core::xv::{build_q, build_xv, XvGroupoid};
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gspec", about = "Finite groupoid engine over exact rationals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Include failure witnesses in reports.
    #[arg(long, global = true)]
    trace: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Validate every section present in the document.
    Validate {
        path: PathBuf,
        /// Generate and validate this many random seed-data instances
        /// instead of reading sections.
        #[arg(long)]
        fuzz: Option<usize>,
        /// Seed for randomized fixture generation.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build the reduced groupoid from seed data and run the axiom suite.
    BuildXv {
        path: PathBuf,
        /// Print only the object/morphism/class counts.
        #[arg(long)]
        stats: bool,
    },
    /// Build the overlap poset from seed data.
    BuildQ { path: PathBuf },
    /// Groupoid completion of a nonsingular category.
    Complete { path: PathBuf },
    /// Cover reduction; with an ambient atlas, also derive the seed data.
    Reduce { path: PathBuf },
    /// Pull the ambient bundle back to the reduced groupoid.
    BuildWv { path: PathBuf },
    /// Run the stabilization pipeline and emit the perturbed support.
    Perturb { path: PathBuf },
    /// Weighted count of the perturbed support.
    Count { path: PathBuf },
    /// Limits of a tower of rational vector spaces.
    Tower { path: PathBuf },
}

enum CmdError {
    Input(String),
    Math(Value),
}

impl From<GspecError> for CmdError {
    fn from(e: GspecError) -> Self {
        CmdError::Input(e.to_string())
    }
}

fn math_fail(name: &str, detail: String) -> CmdError {
    let mut m = Map::new();
    m.insert("failed".into(), Value::String(name.into()));
    m.insert("detail".into(), Value::String(detail));
    CmdError::Math(Value::Object(m))
}

fn load(path: &PathBuf) -> Result<GspecDocument, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(gspec::parse(&text)?)
}

fn report_gate(out: &mut Map<String, Value>, name: &str, rep: &Report, trace: bool) -> bool {
    out.insert(name.to_string(), rep.to_json(trace));
    rep.passed()
}

fn need_etale(doc: &GspecDocument) -> Result<&gspec_core::etale::EtaleDataV, CmdError> {
    doc.etale
        .as_ref()
        .ok_or_else(|| CmdError::Input("missing required section etale_data".into()))
}

fn xv_from(doc: &GspecDocument) -> Result<XvGroupoid, CmdError> {
    let data = need_etale(doc)?;
    build_xv(data).map_err(|e| math_fail("build-xv", e.to_string()))
}

fn stats_value(c: &(impl Cat + ?Sized)) -> Value {
    let mut m = Map::new();
    m.insert("objects".into(), Value::from(c.n_objects() as u64));
    m.insert("morphisms".into(), Value::from(c.n_morphisms() as u64));
    m.insert("classes".into(), Value::from(realize(c).n_classes() as u64));
    Value::Object(m)
}

fn cmd_validate(
    path: &PathBuf,
    fuzz: Option<usize>,
    seed: u64,
    trace: bool,
) -> Result<Value, CmdError> {
    let mut out = Map::new();
    out.insert("command".into(), Value::String("validate".into()));
    if let Some(n) = fuzz {
        let mut valid = 0usize;
        let mut attempts = 0u64;
        while valid < n && attempts < (n as u64) * 100 {
            if let Some(d) = gspec_core::fixtures::gen_etale_data(seed.wrapping_add(attempts)) {
                if !d.validate().passed() {
                    return Err(math_fail("fuzz", format!("seed {} invalid", seed + attempts)));
                }
                valid += 1;
            }
            attempts += 1;
        }
        let mut f = Map::new();
        f.insert("requested".into(), Value::from(n as u64));
        f.insert("valid".into(), Value::from(valid as u64));
        f.insert("attempts".into(), Value::from(attempts));
        out.insert("fuzz".into(), Value::Object(f));
        out.insert("passed".into(), Value::Bool(valid >= n));
        if valid < n {
            return Err(CmdError::Math(Value::Object(out)));
        }
        return Ok(Value::Object(out));
    }

    let doc = load(path)?;
    let mut all = true;
    let mut sections = Map::new();
    for (name, g) in &doc.groups {
        all &= report_gate(&mut sections, &format!("group:{name}"), &g.validate(), trace);
    }
    if let Some(d) = &doc.etale {
        all &= report_gate(&mut sections, "etale_data", &d.validate(), trace);
    }
    if let Some(c) = &doc.groupoid {
        let rep = if c.inv.is_some() {
            check_groupoid(c)
        } else {
            check_category(c, false)
        };
        all &= report_gate(&mut sections, "groupoid", &rep, trace);
        if let Some(spec) = &doc.bundle {
            let b = gspec::resolve_bundle(spec, c)?;
            all &= report_gate(&mut sections, "bundle", &validate_bundle(&b, c), trace);
        }
        if let Some(a) = &doc.action {
            let act = gspec_core::cat::GroupAction {
                group: doc.groups[&a.group].clone(),
                obj: a.objects.clone(),
                mor: a.morphisms.clone(),
            };
            all &= report_gate(
                &mut sections,
                "action",
                &gspec_core::cat::check_action(&act, c),
                trace,
            );
        }
    }
    if let Some(f) = &doc.functor {
        let pick = |name: &str| -> Result<&gspec_core::cat::TableCategory, CmdError> {
            let got = if name == "groupoid" {
                doc.groupoid.as_ref()
            } else {
                doc.ambient.as_ref()
            };
            got.ok_or_else(|| CmdError::Input(format!("functor references missing section {name}")))
        };
        let (from, to) = (pick(&f.from)?, pick(&f.to)?);
        let functor = gspec::resolve_functor(f, from, to)?;
        let rep = if f.equivalence {
            gspec_core::cat::check_equivalence(&functor, from, to)
        } else {
            gspec_core::cat::check_functor(&functor, from, to)
        };
        all &= report_gate(&mut sections, "functor", &rep, trace);
    }
    if doc.ambient.is_some() {
        let atlas = doc.atlas()?;
        all &= report_gate(&mut sections, "atlas", &atlas.validate(), trace);
    }
    if let Some(t) = &doc.tower {
        let tower = QTower {
            prefix: t.prefix.clone(),
            tail: t.tail.clone(),
        };
        let mut rep = Report::new();
        rep.check("tower-dims", tower.check_dims().err().map(|e| e.to_string()));
        all &= report_gate(&mut sections, "tower", &rep, trace);
    }
    if doc.etale.is_some() && doc.groupoid.is_none() {
        if let Some(spec) = &doc.bundle {
            let xv = xv_from(&doc)?;
            let b = gspec::resolve_bundle(spec, &xv)?;
            all &= report_gate(&mut sections, "bundle", &validate_bundle(&b, &xv), trace);
            if let Some(ms) = &doc.multisection {
                let lam = resolve_multisection(ms, &xv)?;
                all &= report_gate(
                    &mut sections,
                    "multisection",
                    &check_multisection(&lam, &b, &xv),
                    trace,
                );
            }
        }
    }
    out.insert("sections".into(), Value::Object(sections));
    out.insert("passed".into(), Value::Bool(all));
    if all {
        Ok(Value::Object(out))
    } else {
        Err(CmdError::Math(Value::Object(out)))
    }
}

fn resolve_multisection(
    ms: &[(String, QVec, gspec_core::qlin::Rat)],
    base: &(impl Cat + ?Sized),
) -> Result<Multisection, CmdError> {
    let mut weights = BTreeMap::new();
    for (key, vec, wt) in ms {
        let x = (0..base.n_objects())
            .find(|&x| base.object_key(x) == *key)
            .ok_or_else(|| CmdError::Input(format!("multisection references unknown object {key}")))?;
        weights.insert((x, vec.clone()), wt.clone());
    }
    Ok(Multisection { weights })
}

fn cmd_build_xv(path: &PathBuf, stats: bool, trace: bool) -> Result<Value, CmdError> {
    let doc = load(path)?;
    let xv = xv_from(&doc)?;
    if stats {
        return Ok(stats_value(&xv));
    }
    let mut out = Map::new();
    out.insert("command".into(), Value::String("build-xv".into()));
    out.insert("stats".into(), stats_value(&xv));
    let mut rep = Report::new();
    rep.pass("groupoid-axioms");
    rep.check(
        "overlap-case-agreement",
        gspec_core::xv::check_case_agreement(&xv),
    );
    let passed = report_gate(&mut out, "report", &rep, trace);
    out.insert("passed".into(), Value::Bool(passed));
    if passed {
        Ok(Value::Object(out))
    } else {
        Err(CmdError::Math(Value::Object(out)))
    }
}

fn cmd_build_q(path: &PathBuf) -> Result<Value, CmdError> {
    let doc = load(path)?;
    let data = need_etale(&doc)?;
    let q = build_q(data);
    let rep = check_category(&q, true);
    if !rep.passed() {
        return Err(math_fail(
            "build-q",
            rep.first_failure().map(|f| f.name.clone()).unwrap_or_default(),
        ));
    }
    let roots =
        gspec_core::cat::poset_roots(&q).map_err(|e| math_fail("build-q", e.to_string()))?;
    let mut out = Map::new();
    out.insert("command".into(), Value::String("build-q".into()));
    out.insert("stats".into(), stats_value(&q));
    let mut minima: Vec<String> = roots.iter().map(|&(r, _)| q.object_key(r)).collect();
    minima.sort();
    out.insert(
        "minima".into(),
        Value::Array(minima.into_iter().map(Value::String).collect()),
    );
    out.insert("passed".into(), Value::Bool(true));
    Ok(Value::Object(out))
}

fn cmd_complete(path: &PathBuf) -> Result<Value, CmdError> {
    let doc = load(path)?;
    let c = doc
        .groupoid
        .as_ref()
        .ok_or_else(|| CmdError::Input("missing required section groupoid".into()))?;
    let (completed, _) =
        complete_nonsingular(c).map_err(|e| math_fail("complete", e.to_string()))?;
    let mut out = Map::new();
    out.insert("command".into(), Value::String("complete".into()));
    out.insert("stats".into(), stats_value(&completed));
    out.insert("passed".into(), Value::Bool(true));
    Ok(Value::Object(out))
}

fn reduction_value(red: &Reduction) -> Value {
    let mut m = Map::new();
    for (iset, pts) in red {
        m.insert(
            iset.to_string(),
            Value::Array(pts.iter().map(|&p| Value::from(p as u64)).collect()),
        );
    }
    Value::Object(m)
}

fn cmd_reduce(path: &PathBuf, trace: bool) -> Result<Value, CmdError> {
    let doc = load(path)?;
    let mut out = Map::new();
    out.insert("command".into(), Value::String("reduce".into()));
    if doc.ambient.is_some() {
        let atlas = doc.atlas()?;
        let arep = atlas.validate();
        if !arep.passed() {
            out.insert("report".into(), arep.to_json(trace));
            return Err(CmdError::Math(Value::Object(out)));
        }
        let red = atlas
            .default_reduction()
            .map_err(|e| math_fail("reduce", e.to_string()))?;
        let built = atlas
            .build_v_data(&red)
            .map_err(|e| math_fail("reduce", e.to_string()))?;
        out.insert("reduction".into(), reduction_value(&red));
        let (groups, etale) = gspec::etale_to_sections(&built.data);
        out.insert("groups".into(), groups);
        out.insert("etale_data".into(), etale);
        out.insert("passed".into(), Value::Bool(true));
        return Ok(Value::Object(out));
    }
    let space = doc
        .proximity
        .as_ref()
        .ok_or_else(|| CmdError::Input("reduce needs an ambient atlas or a proximity space".into()))?;
    let cov = doc
        .cover
        .as_ref()
        .ok_or_else(|| CmdError::Input("missing required section cover".into()))?;
    let red = cover_reduce(space, &cov.s, &cov.f, cov.c.as_deref())
        .map_err(|e| math_fail("reduce", e.to_string()))?;
    out.insert("reduction".into(), reduction_value(&red));
    out.insert("passed".into(), Value::Bool(true));
    Ok(Value::Object(out))
}

fn cmd_build_wv(path: &PathBuf, trace: bool) -> Result<Value, CmdError> {
    let doc = load(path)?;
    let atlas = doc.atlas()?;
    let arep = atlas.validate();
    if !arep.passed() {
        return Err(math_fail(
            "atlas",
            arep.first_failure().map(|f| f.name.clone()).unwrap_or_default(),
        ));
    }
    let spec = doc
        .bundle
        .as_ref()
        .ok_or_else(|| CmdError::Input("missing required section bundle".into()))?;
    let ab = gspec::resolve_bundle(spec, &atlas.ambient)?;
    let red = atlas
        .default_reduction()
        .map_err(|e| math_fail("reduce", e.to_string()))?;
    let built = atlas
        .build_v_data(&red)
        .map_err(|e| math_fail("build-v-data", e.to_string()))?;
    let xv = build_xv(&built.data).map_err(|e| math_fail("build-xv", e.to_string()))?;
    let psi = gspec_core::ambient::build_psi(&atlas, &built, &xv)
        .map_err(|e| math_fail("build-psi", e.to_string()))?;
    // Restrict the ambient bundle to the saturation, then pull back.
    let rb = GroupoidBundle {
        fiber_dim: (0..psi.restricted.n_objects())
            .map(|x| {
                let key = psi.restricted.object_key(x);
                ab.fiber_dim[atlas.ambient.object_index(&key).unwrap()]
            })
            .collect(),
        mu: (0..psi.restricted.n_morphisms())
            .map(|m| {
                let key = psi.restricted.morphism_key(m);
                ab.mu[atlas.ambient.morphism_index(&key).unwrap()].clone()
            })
            .collect(),
    };
    let (wv, _) = gspec_core::bundle::build_wv(&rb, &psi.restricted, &psi.psi, &xv, None)
        .map_err(|e| math_fail("build-wv", e.to_string()))?;
    let mut out = Map::new();
    out.insert("command".into(), Value::String("build-wv".into()));
    out.insert("stats".into(), stats_value(&xv));
    let mut tables = Map::new();
    for m in 0..xv.n_morphisms() {
        tables.insert(xv.morphism_key(m), gspec::qmatrix_value(&wv.mu[m]));
    }
    out.insert("rho_hat".into(), Value::Object(tables));
    let mut rep = Report::new();
    rep.pass("cocycle");
    rep.pass("inverse-law");
    let passed = report_gate(&mut out, "report", &rep, trace);
    out.insert("passed".into(), Value::Bool(passed));
    Ok(Value::Object(out))
}

struct Pipeline {
    xv: XvGroupoid,
    wv: GroupoidBundle,
    fm: FredholmModel,
}

fn assemble_pipeline(doc: &GspecDocument) -> Result<(Pipeline, Option<stab::StabData>), CmdError> {
    let xv = xv_from(doc)?;
    let spec = doc
        .bundle
        .as_ref()
        .ok_or_else(|| CmdError::Input("missing required section bundle".into()))?;
    let wv = gspec::resolve_bundle(spec, &xv)?;
    let brep = validate_bundle(&wv, &xv);
    if !brep.passed() {
        return Err(math_fail(
            "bundle",
            brep.first_failure().map(|f| f.name.clone()).unwrap_or_default(),
        ));
    }
    let fspec = doc
        .fredholm
        .as_ref()
        .ok_or_else(|| CmdError::Input("missing required section fredholm".into()))?;
    let section = Section {
        values: (0..xv.n_objects())
            .map(|x| {
                let key = xv.object_key(x);
                fspec
                    .section
                    .get(&key)
                    .cloned()
                    .ok_or_else(|| CmdError::Input(format!("fredholm section misses {key}")))
            })
            .collect::<Result<_, _>>()?,
    };
    let norm_weights = (0..xv.n_objects())
        .map(|x| {
            let key = xv.object_key(x);
            fspec
                .norm_weights
                .get(&key)
                .cloned()
                .ok_or_else(|| CmdError::Input(format!("norm weights miss {key}")))
        })
        .collect::<Result<_, _>>()?;
    let u_set = {
        let mut u = vec![false; xv.n_objects()];
        for key in &fspec.control_set {
            let x = (0..xv.n_objects())
                .find(|&x| xv.object_key(x) == *key)
                .ok_or_else(|| CmdError::Input(format!("control set references unknown {key}")))?;
            u[x] = true;
        }
        u
    };
    let fm = FredholmModel {
        section,
        norm_weights,
        u_set,
    };
    let frep = stab::validate_fredholm(&fm, &wv, &xv);
    if !frep.passed() {
        return Err(math_fail(
            "fredholm",
            frep.first_failure().map(|f| f.name.clone()).unwrap_or_default(),
        ));
    }
    let stabdata = match &doc.local_stab {
        None => None,
        Some(ls) => {
            let erep = ls.espec.validate(&xv.data);
            if !erep.passed() {
                return Err(math_fail(
                    "local_stab",
                    erep.first_failure().map(|f| f.name.clone()).unwrap_or_default(),
                ));
            }
            let locals: Vec<LocalStabilization> = (1..=xv.data.n)
                .map(|i| {
                    let mut out = LocalStabilization::zero(i);
                    if let Some(tbl) = ls.charts.get(&i) {
                        for (key, slots) in tbl {
                            let x = (0..xv.n_objects())
                                .find(|&x| xv.object_key(x) == *key)
                                .ok_or_else(|| {
                                    CmdError::Input(format!("local_stab references unknown {key}"))
                                })?;
                            out.values.insert(x, slots.clone());
                        }
                    }
                    Ok(out)
                })
                .collect::<Result<_, CmdError>>()?;
            for l in &locals {
                let lrep = stab::validate_local_stab_pure(l, &ls.espec, &fm, &wv, &xv);
                if !lrep.passed() {
                    return Err(math_fail(
                        "local_stab",
                        lrep.first_failure().map(|f| f.name.clone()).unwrap_or_default(),
                    ));
                }
            }
            let pu = match &doc.partition {
                None => make_partition_pure(&xv),
                Some(p) => resolve_partition(p, &xv)?,
            };
            let data = run_pure_pipeline(&xv.data, &xv, &wv, &ls.espec, &locals, &pu, &fm, &ls.e)
                .map_err(|e| math_fail("perturb", e.to_string()))?;
            Some(data)
        }
    };
    Ok((Pipeline { xv, wv, fm }, stabdata))
}

fn resolve_partition(
    p: &BTreeMap<usize, BTreeMap<String, gspec_core::qlin::Rat>>,
    xv: &XvGroupoid,
) -> Result<PartitionOfUnity, CmdError> {
    let real = realize(xv);
    let mut beta = vec![vec![gspec_core::qlin::rat_int(0); real.n_classes()]; xv.data.n];
    for (&i, row) in p {
        if i == 0 || i > xv.data.n {
            return Err(CmdError::Input(format!("partition chart {i} out of range")));
        }
        for (label, val) in row {
            let c = real
                .labels
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| {
                    CmdError::Input(format!("partition references unknown class {label}"))
                })?;
            beta[i - 1][c] = val.clone();
        }
    }
    Ok(PartitionOfUnity { beta })
}

fn lam_for_count(
    doc: &GspecDocument,
    pipe: &Pipeline,
    stabdata: &Option<stab::StabData>,
) -> Result<Multisection, CmdError> {
    if let Some(s) = stabdata {
        return Ok(s.lam.clone());
    }
    let ms = doc
        .multisection
        .as_ref()
        .ok_or_else(|| CmdError::Input("count needs local_stab or multisection".into()))?;
    let lam = resolve_multisection(ms, &pipe.xv)?;
    let rep = check_multisection(&lam, &pipe.wv, &pipe.xv);
    if !rep.passed() {
        return Err(math_fail(
            "multisection",
            rep.first_failure().map(|f| f.name.clone()).unwrap_or_default(),
        ));
    }
    Ok(lam)
}

fn cmd_perturb(path: &PathBuf, trace: bool) -> Result<Value, CmdError> {
    let doc = load(path)?;
    let (pipe, stabdata) = assemble_pipeline(&doc)?;
    let stabdata =
        stabdata.ok_or_else(|| CmdError::Input("missing required section local_stab".into()))?;
    let th = theta(&pipe.fm, &stabdata.lam);
    let table = theta_class_table(&th, &pipe.xv).map_err(|e| math_fail("theta", e.to_string()))?;
    let mut out = Map::new();
    out.insert("command".into(), Value::String("perturb".into()));
    let mut tv = Map::new();
    for (label, w) in &table {
        tv.insert(label.clone(), Value::String(rat_to_string(w)));
    }
    out.insert("theta".into(), Value::Object(tv));
    out.insert(
        "lambda_support_size".into(),
        Value::from(stabdata.lam.weights.len() as u64),
    );
    let mut all = report_gate(&mut out, "certificates", &stabdata.certificates, trace);
    all &= report_gate(
        &mut out,
        "nu_regular",
        &stab::check_nu_regular(&pipe.fm, &stabdata.lam, &pipe.xv),
        trace,
    );
    out.insert("passed".into(), Value::Bool(all));
    if all {
        Ok(Value::Object(out))
    } else {
        Err(CmdError::Math(Value::Object(out)))
    }
}

fn cmd_count(path: &PathBuf) -> Result<Value, CmdError> {
    let doc = load(path)?;
    let (pipe, stabdata) = assemble_pipeline(&doc)?;
    let lam = lam_for_count(&doc, &pipe, &stabdata)?;
    let th = theta(&pipe.fm, &lam);
    let c = count(&th, &pipe.xv, doc.signs.as_ref())
        .map_err(|e| math_fail("count", e.to_string()))?;
    let mut out = Map::new();
    out.insert("command".into(), Value::String("count".into()));
    out.insert("count".into(), Value::String(rat_to_string(&c)));
    out.insert("passed".into(), Value::Bool(true));
    Ok(Value::Object(out))
}

fn cmd_tower(path: &PathBuf, trace: bool) -> Result<Value, CmdError> {
    let doc = load(path)?;
    let t = doc
        .tower
        .as_ref()
        .ok_or_else(|| CmdError::Input("missing required section tower".into()))?;
    let mut out = Map::new();
    out.insert("command".into(), Value::String("tower".into()));
    if t.direct {
        let d = DirectQTower {
            prefix: t.prefix.clone(),
            tail: t.tail.clone(),
        };
        out.insert("colim_dim".into(), Value::from(colim(&d) as u64));
        let rep = check_dual_iso(&d);
        let passed = report_gate(&mut out, "dual_report", &rep, trace);
        let dual = gspec_core::tower::dualize(&d);
        let l = lim(&dual).map_err(|e| math_fail("tower", e.to_string()))?;
        let l1 = lim1(&dual).map_err(|e| math_fail("tower", e.to_string()))?;
        out.insert("lim_dual_dim".into(), Value::from(l.dim as u64));
        out.insert("lim1_dual_dim".into(), Value::from(l1.dim as u64));
        out.insert(
            "lim1_certificate_index".into(),
            Value::from(l1.certificate_index as u64),
        );
        out.insert("passed".into(), Value::Bool(passed));
        if passed {
            return Ok(Value::Object(out));
        }
        return Err(CmdError::Math(Value::Object(out)));
    }
    let tower = QTower {
        prefix: t.prefix.clone(),
        tail: t.tail.clone(),
    };
    let l = lim(&tower).map_err(|e| math_fail("tower", e.to_string()))?;
    let l1 = lim1(&tower).map_err(|e| math_fail("tower", e.to_string()))?;
    out.insert("lim_dim".into(), Value::from(l.dim as u64));
    out.insert("lim_dim_at_index_1".into(), Value::from(l.dim_at_1 as u64));
    out.insert("lim1_dim".into(), Value::from(l1.dim as u64));
    out.insert(
        "lim1_certificate_index".into(),
        Value::from(l1.certificate_index as u64),
    );
    out.insert("passed".into(), Value::Bool(true));
    Ok(Value::Object(out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let trace = cli.trace;
    let result = match &cli.command {
        Command::Validate { path, fuzz, seed } => cmd_validate(path, *fuzz, *seed, trace),
        Command::BuildXv { path, stats } => cmd_build_xv(path, *stats, trace),
        Command::BuildQ { path } => cmd_build_q(path),
        Command::Complete { path } => cmd_complete(path),
        Command::Reduce { path } => cmd_reduce(path, trace),
        Command::BuildWv { path } => cmd_build_wv(path, trace),
        Command::Perturb { path } => cmd_perturb(path, trace),
        Command::Count { path } => cmd_count(path),
        Command::Tower { path } => cmd_tower(path, trace),
    };
    match result {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap());
            ExitCode::SUCCESS
        }
        Err(CmdError::Math(v)) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap());
            ExitCode::from(1)
        }
        Err(CmdError::Input(msg)) => {
            let mut m = Map::new();
            m.insert("error".into(), Value::String(msg));
            println!("{}", serde_json::to_string_pretty(&Value::Object(m)).unwrap());
            ExitCode::from(2)
        }
    }
}

//! Regenerates the checked-in fixture corpus under `crates/cli/fixtures/`.
//!
//! Run from the workspace root:
//! `cargo run -p gspec-cli --example make_fixtures`

use gspec_core::cat::Cat;
use gspec_core::fixtures;
use gspec_core::gspec::{atlas_to_sections, etale_to_sections, groupoid_to_section};
use gspec_core::xv::build_xv;
use serde_json::{json, Map, Value};
use std::collections::HashMap;
use std::fs;
use std::path::Path;

fn write(dir: &Path, name: &str, mut sections: Map<String, Value>) {
    let mut doc = Map::new();
    doc.insert("format_version".into(), Value::String("gspec-1".into()));
    doc.append(&mut sections);
    let text = serde_json::to_string_pretty(&Value::Object(doc)).unwrap();
    fs::write(dir.join(name), text + "\n").unwrap();
    println!("wrote {name}");
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    fs::create_dir_all(&dir).unwrap();

    // Seed-data fixtures.
    for (name, data) in [
        ("fix_triv.json", fixtures::fix_triv()),
        ("fix_a.json", fixtures::fix_a()),
    ] {
        let (groups, etale) = etale_to_sections(&data);
        let mut m = Map::new();
        m.insert("groups".into(), groups);
        m.insert("etale_data".into(), etale);
        write(&dir, name, m);
    }

    // The half-weight count fixture: trivial transport, direct multisection.
    {
        let data = fixtures::fix_z2f();
        let (groups, etale) = etale_to_sections(&data);
        let xv = build_xv(&data).unwrap();
        let key = xv.object_key(0);
        let mut m = Map::new();
        m.insert("groups".into(), groups);
        m.insert("etale_data".into(), etale);
        m.insert("bundle".into(), json!({ "potential": { key.clone(): "1/1" } }));
        m.insert(
            "fredholm".into(),
            json!({
                "section": { key.clone(): ["1/1"] },
                "norm_weights": { key.clone(): ["1/1"] },
                "control_set": [key.clone()],
            }),
        );
        m.insert(
            "multisection".into(),
            json!([
                { "object": key.clone(), "vector": ["1/1"], "weight": "1/2" },
                { "object": key, "vector": ["-1/1"], "weight": "1/2" },
            ]),
        );
        write(&dir, "fix_z2f_theta.json", m);
    }

    // The full stabilization pipeline on the two-chart fixture.
    {
        let data = fixtures::fix_a();
        let (groups, etale) = etale_to_sections(&data);
        let xv = build_xv(&data).unwrap();
        let keys: Vec<String> = (0..xv.n_objects()).map(|o| xv.object_key(o)).collect();
        let swap_class = |k: &str| k.contains(",b)") || k.contains(",v)");
        let free_class = |k: &str| k.contains(",p)") || k.contains(",w)") || k.contains(",x)");
        let mut potential = Map::new();
        let mut section = Map::new();
        let mut weights = Map::new();
        for k in &keys {
            potential.insert(
                k.clone(),
                Value::String(if swap_class(k) { "-1/1" } else { "1/1" }.into()),
            );
            let f = if free_class(k) {
                "1/1"
            } else if swap_class(k) {
                "-1/2"
            } else {
                "1/2"
            };
            section.insert(k.clone(), json!([f]));
            weights.insert(k.clone(), json!(["1/1"]));
        }
        let mut m = Map::new();
        m.insert("groups".into(), groups);
        m.insert("etale_data".into(), etale);
        m.insert("bundle".into(), json!({ "potential": potential }));
        m.insert(
            "fredholm".into(),
            json!({
                "section": section,
                "norm_weights": weights,
                "control_set": keys,
            }),
        );
        m.insert(
            "local_stab".into(),
            json!({
                "e_dims": [1, 0],
                "e_reps": [
                    [ [["1/1"]], [["-1/1"]] ],
                    [ [] ]
                ],
                "charts": [
                    { "chart": 1, "tau": {
                        "({1},a)": [["1/2"]],
                        "({1},b)": [["1/2"]]
                    }}
                ],
                "e": ["1/1"],
            }),
        );
        write(&dir, "pipe_a.json", m);
    }

    // Ambient atlas fixtures.
    {
        let atlas = fixtures::fix_amb();
        let (groups, ambient, unis, solution) = atlas_to_sections(&atlas);
        let mut m = Map::new();
        m.insert("groups".into(), groups.clone());
        m.insert("ambient".into(), ambient.clone());
        m.insert("uniformizers".into(), unis.clone());
        m.insert("solution".into(), solution.clone());
        write(&dir, "fix_amb.json", m);

        let mut m = Map::new();
        m.insert("groups".into(), groups);
        m.insert("ambient".into(), ambient);
        m.insert("uniformizers".into(), unis);
        m.insert("solution".into(), solution);
        m.insert(
            "bundle".into(),
            json!({ "potential": { "x:0": "1/1", "x:1": "-1/1" } }),
        );
        write(&dir, "fix_amb_wv.json", m);
    }

    // The trivial-closure cover reduction example.
    {
        let (_space, s, f) = fixtures::fix_cover();
        let mut m = Map::new();
        m.insert("proximity".into(), json!({ "points": 6 }));
        m.insert("cover".into(), json!({ "s": s, "f": f }));
        write(&dir, "fix_cover.json", m);
    }

    // The poset a -> b for the completion command.
    {
        let comp = HashMap::from([((0, 0), 0), ((1, 1), 1), ((0, 2), 2), ((2, 1), 2)]);
        let c = gspec_core::cat::TableCategory {
            object_keys: vec!["a".into(), "b".into()],
            morphism_keys: vec!["id(a)".into(), "id(b)".into(), "a->b".into()],
            src: vec![0, 1, 0],
            tgt: vec![0, 1, 1],
            id_of: vec![0, 1],
            comp,
            inv: None,
        };
        let mut m = Map::new();
        m.insert("groupoid".into(), groupoid_to_section(&c));
        write(&dir, "poset_ab.json", m);
    }

    // A groupoid with an action and an (equivalence) functor: the swap
    // translation groupoid with its inner Z/2 action and the identity
    // functor.
    {
        let z2 = gspec_core::group::FiniteGroup::cyclic("Z2", 2);
        let c = gspec_core::cat::TableCategory::translation_groupoid(
            &z2,
            &["a", "b"],
            &[vec![0, 1], vec![1, 0]],
        );
        // alpha(g, x) = (g^-1 x, g) yields the inner action.
        let act_tbl = [vec![0usize, 1], vec![1, 0]];
        let mor = |x: usize, g: usize| x * 2 + g;
        let alpha: Vec<Vec<usize>> = (0..2)
            .map(|a| (0..2).map(|x| mor(act_tbl[z2.invert(a)][x], a)).collect())
            .collect();
        let inner =
            gspec_core::cat::inner_action(&c, z2, alpha, gspec_core::cat::AlphaVariant::Alpha)
                .unwrap();
        let mut m = Map::new();
        m.insert(
            "groups".into(),
            json!({"Z2": {"elements": ["e", "r1"], "mult": [[0,1],[1,0]], "inv": [0,1], "id": 0}}),
        );
        m.insert("groupoid".into(), groupoid_to_section(&c));
        m.insert(
            "action".into(),
            json!({
                "group": "Z2",
                "objects": inner.action.obj,
                "morphisms": inner.action.mor,
            }),
        );
        let objects: Map<String, Value> = c
            .object_keys
            .iter()
            .map(|k| (k.clone(), Value::String(k.clone())))
            .collect();
        let morphisms: Map<String, Value> = c
            .morphism_keys
            .iter()
            .map(|k| (k.clone(), Value::String(k.clone())))
            .collect();
        m.insert(
            "functor".into(),
            json!({
                "from": "groupoid",
                "to": "groupoid",
                "objects": objects,
                "morphisms": morphisms,
                "equivalence": true,
            }),
        );
        write(&dir, "fix_action_functor.json", m);
    }

    // Tower fixtures on Q^2.
    let towers = [
        ("tower_identity.json", json!([["1/1", "0/1"], ["0/1", "1/1"]]), false),
        ("tower_nilpotent.json", json!([["0/1", "0/1"], ["1/1", "0/1"]]), false),
        ("tower_projector.json", json!([["1/1", "0/1"], ["0/1", "0/1"]]), false),
        ("tower_direct.json", json!([["1/1", "1/1"], ["0/1", "0/1"]]), true),
    ];
    for (name, tail, direct) in towers {
        let mut m = Map::new();
        m.insert("tower".into(), json!({ "tail": tail, "direct": direct }));
        write(&dir, name, m);
    }
}

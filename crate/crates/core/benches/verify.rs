//! Parallel vs sequential exhaustive verification on generated instances.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use gspec_core::ambient::Reduction;
use gspec_core::cat::{associativity_witness, associativity_witness_seq};
use gspec_core::fixtures::{build_block_atlas, gen_tail, Block, ChartSpec, CoverSpec};
use gspec_core::group::{FiniteGroup, IndexSet};
use gspec_core::tower::{check_dual_iso, DirectQTower};
use gspec_core::xv::XvGroupoid;

/// A deliberately large instance (beyond the corpus size bounds): one free
/// cyclic block covered by two order-4 charts with a nested chain,
/// giving a few hundred morphisms and a composable-triple space big enough
/// to show the parallel/sequential contrast.
fn big_instance() -> XvGroupoid {
    let c4 = FiniteGroup::cyclic("C4", 4);
    let blocks = vec![Block {
        group: c4.clone(),
        stab: vec![0],
        label: "b".to_string(),
    }];
    let charts: Vec<ChartSpec> = (0..2)
        .map(|_| ChartSpec {
            group: c4.clone(),
            covers: vec![Some(CoverSpec {
                hom: (0..4).collect(),
            })],
        })
        .collect();
    let atlas = build_block_atlas(&blocks, &charts, &[0]);
    let red = Reduction::from([
        (IndexSet::singleton(1), vec![0]),
        (IndexSet::from_indices(&[1, 2]), vec![0]),
    ]);
    let built = atlas.build_v_data(&red).expect("chain reduction is valid");
    XvGroupoid::build(&built.data)
}

fn bench_associativity(c: &mut Criterion) {
    let xv = big_instance();
    let mut group = c.benchmark_group("associativity");
    group.bench_function("parallel", |b| {
        b.iter(|| assert!(associativity_witness(&xv).is_none()))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| assert!(associativity_witness_seq(&xv).is_none()))
    });
    group.finish();
}

fn bench_tower_batch(c: &mut Criterion) {
    let tails: Vec<DirectQTower> = (0..64u64)
        .map(|s| DirectQTower {
            prefix: vec![],
            tail: gen_tail(s, 5),
        })
        .collect();
    let mut group = c.benchmark_group("tower-dual-iso");
    group.bench_function("parallel", |b| {
        b.iter_batched(
            || tails.clone(),
            |ts| {
                let ok = gspec_core::par::map_collect(ts.len(), |k| check_dual_iso(&ts[k]).passed());
                assert!(ok.into_iter().all(|x| x));
            },
            BatchSize::SmallInput,
        )
    });
    group.bench_function("sequential", |b| {
        b.iter_batched(
            || tails.clone(),
            |ts| {
                let ok =
                    gspec_core::par::map_collect_seq(ts.len(), |k| check_dual_iso(&ts[k]).passed());
                assert!(ok.into_iter().all(|x| x));
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, bench_associativity, bench_tower_batch);
criterion_main!(benches);

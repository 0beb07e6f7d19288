//! Criterion benches for the data-parallel hot paths.
//!
//! `cargo bench` measures the library with the `parallel` feature (the
//! default); `cargo bench --no-default-features` measures the sequential
//! fallback, and criterion's saved baselines make the two comparable across
//! runs. Each group also carries an in-bench `sequential_reference` target
//! that recomputes the same slots with a plain iterator, so a single run
//! shows the gap too.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use gkex_core::group::{Element, GroupParams, Preset};
use gkex_core::protocol::{
    self, KeyPair, MemberId, MemberPublicKeys, MemberState,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::time::Duration;

struct Round {
    group: GroupParams,
    members: BTreeMap<MemberId, MemberState>,
    controller: MemberId,
    roster: Vec<MemberId>,
    published: BTreeMap<MemberId, MemberPublicKeys>,
    partials: BTreeMap<MemberId, Element>,
}

fn prepare_round(group: GroupParams, n: u32, seed: u64) -> Round {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let roster: Vec<MemberId> = (1..=n).map(MemberId).collect();
    let members: BTreeMap<MemberId, MemberState> = roster
        .iter()
        .map(|&id| (id, MemberState::random(id, &group, &mut rng)))
        .collect();
    let controller = MemberId(1);
    let published: BTreeMap<MemberId, MemberPublicKeys> = members
        .iter()
        .filter(|(&id, _)| id != controller)
        .map(|(&id, m)| {
            let (pub_r, pub_x) = protocol::publish_keys(m);
            (id, MemberPublicKeys { pub_r, pub_x })
        })
        .collect();
    let published_r: BTreeMap<MemberId, Element> = published
        .iter()
        .map(|(&id, pk)| (id, pk.pub_r.clone()))
        .collect();
    let partials: BTreeMap<MemberId, Element> = roster
        .iter()
        .filter(|&&id| id != controller)
        .map(|&id| {
            (
                id,
                protocol::partial_product(&group, &members[&id], &roster, &published_r, controller)
                    .unwrap(),
            )
        })
        .collect();
    Round {
        group,
        members,
        controller,
        roster,
        published,
        partials,
    }
}

/// The same keying message computed with plain loops over public group ops.
fn sequential_reference(round: &Round, fresh: &KeyPair) -> (BTreeMap<MemberId, Element>, Element) {
    let g = &round.group;
    let c = &round.members[&round.controller];
    let mut product = g.identity();
    for pk in round.published.values() {
        product = g.mul(&product, &pk.pub_r);
    }
    let key = g.exp(&product, &c.pair.r);
    let neg_x_c = g.scalar_neg(&c.pair.x);
    let mut slots = BTreeMap::new();
    for (&id, partial) in &round.partials {
        let mut expected = g.identity();
        for (&j, pk) in &round.published {
            if j != id {
                expected = g.mul(&expected, &pk.pub_r);
            }
        }
        assert_eq!(&expected, partial);
        let mask = g.exp(&round.published[&id].pub_x, &neg_x_c);
        slots.insert(id, g.mul(&mask, &g.exp(partial, &c.pair.r)));
    }
    let self_slot = g.mul(
        &g.mul(
            &key,
            &g.pow_g(&g.scalar_neg(&g.scalar_mul(&fresh.r, &c.pair.r))),
        ),
        &g.pow_g(&g.scalar_neg(&g.scalar_mul(&fresh.x, &c.pair.x))),
    );
    slots.insert(round.controller, self_slot);
    (slots, key)
}

fn bench_build(c: &mut Criterion, name: &str, preset: Preset, n: u32) {
    let round = prepare_round(GroupParams::from_preset(preset), n, 42);
    let fresh = KeyPair::random(&round.group, &mut ChaCha20Rng::seed_from_u64(7));

    let mut group = c.benchmark_group(name);
    group
        .sample_size(10)
        .warm_up_time(Duration::from_secs(1))
        .measurement_time(Duration::from_secs(8));

    group.bench_function("library", |b| {
        b.iter_batched(
            || round.members[&round.controller].clone(),
            |mut controller| {
                protocol::ika1_build_keying_with(
                    &round.group,
                    &mut controller,
                    &round.roster,
                    &round.published,
                    &round.partials,
                    fresh.clone(),
                )
                .unwrap()
            },
            BatchSize::SmallInput,
        )
    });
    group.bench_function("sequential_reference", |b| {
        b.iter(|| sequential_reference(&round, &fresh))
    });
    group.finish();
}

/// A batch of full protocol rounds, the shape the randomized suites run:
/// rayon fan-out over instances versus a plain loop.
fn bench_batch(c: &mut Criterion) {
    let group = GroupParams::from_preset(Preset::Medium);
    let rounds: Vec<Round> = (0..200)
        .map(|i| prepare_round(group.clone(), 8, 1000 + i))
        .collect();
    let run_one = |round: &Round| {
        let mut controller = round.members[&round.controller].clone();
        let fresh = KeyPair::random(&round.group, &mut ChaCha20Rng::seed_from_u64(9));
        let (msg, key) = protocol::ika1_build_keying_with(
            &round.group,
            &mut controller,
            &round.roster,
            &round.published,
            &round.partials,
            fresh,
        )
        .unwrap();
        for (&id, m) in &round.members {
            if id != round.controller {
                let mut m = m.clone();
                assert_eq!(protocol::recover_key(&round.group, &mut m, &msg).unwrap(), key);
            }
        }
    };

    let mut bg = c.benchmark_group("batch_p1_medium_200x_n8");
    bg.sample_size(10);
    bg.bench_function("rayon_batch", |b| {
        b.iter(|| rounds.par_iter().for_each(run_one))
    });
    bg.bench_function("sequential_batch", |b| {
        b.iter(|| rounds.iter().for_each(run_one))
    });
    bg.finish();
}

fn benches(c: &mut Criterion) {
    bench_build(c, "ika1_build_medium_n100", Preset::Medium, 100);
    bench_build(c, "ika1_build_modp2048_n32", Preset::Modp2048, 32);
    bench_batch(c);
}

criterion_group!(keying, benches);
criterion_main!(keying);

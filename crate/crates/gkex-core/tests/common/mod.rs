//! Helpers shared by the integration suites: drive full protocol rounds at
//! the operation level, independent of the scenario runner.

#![allow(dead_code)]

use gkex_core::group::{Element, GroupParams};
use gkex_core::protocol::{
    self, KeyPair, KeyingMessage, MemberId, MemberPublicKeys, MemberState,
};
use rand::RngCore;
use std::collections::BTreeMap;

pub fn random_members<R: RngCore>(
    group: &GroupParams,
    ids: &[u32],
    rng: &mut R,
) -> BTreeMap<MemberId, MemberState> {
    ids.iter()
        .map(|&id| (MemberId(id), MemberState::random(MemberId(id), group, rng)))
        .collect()
}

pub fn pinned_members(
    group: &GroupParams,
    scalars: &[(u32, u64, u64)],
) -> BTreeMap<MemberId, MemberState> {
    scalars
        .iter()
        .map(|&(id, r, x)| {
            let pair = KeyPair::from_scalars(
                group,
                group.scalar_from_u64(r),
                group.scalar_from_u64(x),
            );
            (MemberId(id), MemberState::new(MemberId(id), pair))
        })
        .collect()
}

/// Full P1 round: publishes, partials, keying build. Mutates the
/// controller state in place.
pub fn p1_round(
    group: &GroupParams,
    members: &mut BTreeMap<MemberId, MemberState>,
    controller: MemberId,
    fresh: KeyPair,
) -> (KeyingMessage, Element) {
    let roster: Vec<MemberId> = members.keys().copied().collect();
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
    let partials: BTreeMap<MemberId, Element> = members
        .iter()
        .filter(|(&id, _)| id != controller)
        .map(|(&id, m)| {
            (
                id,
                protocol::partial_product(group, m, &roster, &published_r, controller).unwrap(),
            )
        })
        .collect();
    let acting = members.get_mut(&controller).unwrap();
    protocol::ika1_build_keying_with(group, acting, &roster, &published, &partials, fresh)
        .unwrap()
}

/// Full P2 round: single-key publishes, blinded partials, keying build.
pub fn p2_round(
    group: &GroupParams,
    members: &mut BTreeMap<MemberId, MemberState>,
    controller: MemberId,
    fresh: KeyPair,
) -> (KeyingMessage, Element) {
    let roster: Vec<MemberId> = members.keys().copied().collect();
    let published_r: BTreeMap<MemberId, Element> = members
        .iter()
        .filter(|(&id, _)| id != controller)
        .map(|(&id, m)| (id, m.pair.pub_r.clone()))
        .collect();
    let blinded: BTreeMap<MemberId, Element> = members
        .iter()
        .filter(|(&id, _)| id != controller)
        .map(|(&id, m)| {
            (
                id,
                protocol::ika2_blinded_partial(group, m, &roster, &published_r, controller)
                    .unwrap(),
            )
        })
        .collect();
    let acting = members.get_mut(&controller).unwrap();
    protocol::ika2_build_keying_with(group, acting, &roster, &published_r, &blinded, fresh)
        .unwrap()
}

/// Every roster member recovers; asserts unanimity with the expected key and
/// returns the derived map.
pub fn recover_all(
    group: &GroupParams,
    members: &mut BTreeMap<MemberId, MemberState>,
    msg: &KeyingMessage,
    expected: &Element,
) -> BTreeMap<MemberId, Element> {
    let mut derived = BTreeMap::new();
    for &id in &msg.roster {
        let m = members.get_mut(&id).unwrap();
        let k = protocol::recover(group, m, msg).unwrap();
        assert_eq!(&k, expected, "member {id} disagrees at epoch {}", msg.epoch);
        derived.insert(id, k);
    }
    derived
}

/// The recovery formula applied to an arbitrary slot element with an
/// arbitrary pair; used by the secrecy suites to show outsiders miss the key.
pub fn recovery_formula(
    group: &GroupParams,
    msg: &KeyingMessage,
    slot: &Element,
    pair: (&gkex_core::Scalar, &gkex_core::Scalar),
) -> Element {
    let s_base = msg.s.as_ref().unwrap_or(&msg.r);
    let masked = group.mul(slot, &group.exp(s_base, pair.1));
    group.mul(&masked, &group.exp(&msg.r, pair.0))
}

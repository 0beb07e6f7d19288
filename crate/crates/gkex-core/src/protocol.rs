//! Member and controller state machines for the key exchange suite.
//!
//! Four message-producing operations cover the protocol family:
//!
//! * `ika1_build_keying` — two-round initial agreement where the controller
//!   does most of the work (variant P1);
//! * `ika2_build_keying` — the distributed-work initial agreement, which
//!   publishes only one key per member and omits S (variant P2);
//! * `aka_rekey` / `rekey_evict` — single-broadcast rekeying, optionally
//!   erasing the slots of departing members (variant P3);
//! * `join_rekey` — mass join from collected petitions (variant P4).
//!
//! Every member recovers the epoch key from its own slot with its current
//! effective pair: `K = Y_i * S^x_i * R^r_i`, with `R` standing in for `S`
//! on chains keyed without one. A controller's pair is consumed each time it
//! acts and replaced by the freshly sampled pair, so its own slot recovers
//! only with the new pair.

use crate::group::{Element, GroupError, GroupParams, Scalar};
use crate::par;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Identifies a member; stable across epochs. Rosters iterate ascending.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct MemberId(pub u32);

impl fmt::Display for MemberId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for MemberId {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_u32(self.0)
    }
}

// Accepts both the integer form and the stringly map-key form, so ids
// survive JSON object keys and the buffered replay inside untagged enums.
impl<'de> Deserialize<'de> for MemberId {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = MemberId;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a member id")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<MemberId, E> {
                u32::try_from(v)
                    .map(MemberId)
                    .map_err(|_| E::custom("member id out of range"))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<MemberId, E> {
                u32::try_from(v)
                    .map(MemberId)
                    .map_err(|_| E::custom("member id out of range"))
            }

            fn visit_str<E: serde::de::Error>(self, s: &str) -> Result<MemberId, E> {
                s.parse::<u32>()
                    .map(MemberId)
                    .map_err(|_| E::custom(format!("bad member id {s:?}")))
            }
        }
        de.deserialize_any(V)
    }
}

/// Errors raised by the protocol state machines.
#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("missing public key or partial for member {0}")]
    IncompleteRoster(MemberId),

    #[error("partial from member {0} does not match the published keys")]
    InconsistentPartial(MemberId),

    #[error("no slot for member {0} in the keying message")]
    NoSlot(MemberId),

    #[error("member {0} is not in the roster")]
    NotAMember(MemberId),

    #[error("invalid eviction of member {0}")]
    InvalidEviction(MemberId),

    #[error("eviction would empty the roster")]
    EmptyRoster,

    #[error("joiner id {0} conflicts with the roster or another petition")]
    RosterConflict(MemberId),

    #[error("join round needs at least one petition")]
    DegenerateJoin,

    #[error("private exponent r must be nonzero for this role")]
    DegenerateScalar,

    #[error("keying message variant mismatch: expected a {0} chain")]
    WrongVariant(&'static str),

    #[error("malformed keying message: {0}")]
    MalformedMessage(String),

    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Which protocol produced a keying message.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Variant {
    P1,
    P2,
    P3,
    P4,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::P1 => "P1",
            Variant::P2 => "P2",
            Variant::P3 => "P3",
            Variant::P4 => "P4",
        })
    }
}

/// A member's double key pair `(r, g^r)` and `(x, g^x)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct KeyPair {
    pub r: Scalar,
    pub x: Scalar,
    pub pub_r: Element,
    pub pub_x: Element,
}

impl KeyPair {
    /// Builds a pair from explicit scalars. Zero is accepted here — the
    /// degenerate all-zero-x mode reduces the protocol to plain
    /// Diffie-Hellman — but the samplers never produce it.
    pub fn from_scalars(group: &GroupParams, r: Scalar, x: Scalar) -> KeyPair {
        let pub_r = group.pow_g(&r);
        let pub_x = group.pow_g(&x);
        KeyPair { r, x, pub_r, pub_x }
    }

    pub fn random<R: RngCore>(group: &GroupParams, rng: &mut R) -> KeyPair {
        let r = group.sample_scalar(rng);
        let x = group.sample_scalar(rng);
        KeyPair::from_scalars(group, r, x)
    }
}

/// Whether a member has most recently acted as the epoch controller.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Role {
    Member,
    Controller,
}

/// One simulated participant: identity, current effective pair, last agreed
/// key and epoch.
#[derive(Clone, Debug)]
pub struct MemberState {
    pub id: MemberId,
    pub pair: KeyPair,
    pub epoch: u64,
    pub key: Option<Element>,
    pub role: Role,
}

impl MemberState {
    pub fn new(id: MemberId, pair: KeyPair) -> MemberState {
        MemberState {
            id,
            pair,
            epoch: 0,
            key: None,
            role: Role::Member,
        }
    }

    pub fn random<R: RngCore>(id: MemberId, group: &GroupParams, rng: &mut R) -> MemberState {
        MemberState::new(id, KeyPair::random(group, rng))
    }
}

/// The public half of a member's pairs, as published in a P1 first round.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MemberPublicKeys {
    pub pub_r: Element,
    pub pub_x: Element,
}

/// The per-epoch broadcast: one Y slot per roster member plus the public
/// values R and (for S-bearing chains) S.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct KeyingMessage {
    pub epoch: u64,
    pub variant: Variant,
    pub roster: Vec<MemberId>,
    pub slots: BTreeMap<MemberId, Element>,
    #[serde(rename = "R")]
    pub r: Element,
    #[serde(rename = "S", skip_serializing_if = "Option::is_none", default)]
    pub s: Option<Element>,
}

impl KeyingMessage {
    /// Structural and membership checks: sorted unique roster, exactly one
    /// slot per roster member, all elements in the subgroup, S presence
    /// consistent with the variant.
    pub fn validate(&self, group: &GroupParams) -> Result<(), ProtocolError> {
        if self.epoch == 0 {
            return Err(ProtocolError::MalformedMessage("epoch 0 is pre-key".into()));
        }
        if self.roster.is_empty() {
            return Err(ProtocolError::MalformedMessage("empty roster".into()));
        }
        if self.roster.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ProtocolError::MalformedMessage(
                "roster not strictly ascending".into(),
            ));
        }
        let roster: BTreeSet<_> = self.roster.iter().copied().collect();
        let slotted: BTreeSet<_> = self.slots.keys().copied().collect();
        if roster != slotted {
            return Err(ProtocolError::MalformedMessage(
                "slots do not cover the roster exactly".into(),
            ));
        }
        match self.variant {
            Variant::P1 if self.s.is_none() => {
                return Err(ProtocolError::MalformedMessage("P1 requires S".into()))
            }
            Variant::P2 if self.s.is_some() => {
                return Err(ProtocolError::MalformedMessage("P2 carries no S".into()))
            }
            _ => {}
        }
        group.check_element(&self.r)?;
        if let Some(s) = &self.s {
            group.check_element(s)?;
        }
        for y in self.slots.values() {
            group.check_element(y)?;
        }
        Ok(())
    }

    fn coherent(&self) -> Result<(), ProtocolError> {
        let roster: BTreeSet<_> = self.roster.iter().copied().collect();
        let slotted: BTreeSet<_> = self.slots.keys().copied().collect();
        if roster == slotted && !roster.is_empty() {
            Ok(())
        } else {
            Err(ProtocolError::MalformedMessage(
                "slots do not cover the roster exactly".into(),
            ))
        }
    }
}

/// A joiner's blinded pair `(R_t^r, S_t^x)` sent to the collecting member.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct JoinPetition {
    pub joiner: MemberId,
    pub blinded_r: Element,
    pub blinded_x: Element,
}

fn normalize_roster(roster: &[MemberId]) -> Vec<MemberId> {
    let mut r: Vec<MemberId> = roster.to_vec();
    r.sort_unstable();
    r.dedup();
    r
}

/// Round-1 publication: the member's public keys. P2 rounds use only
/// the first component.
pub fn publish_keys(member: &MemberState) -> (Element, Element) {
    (member.pair.pub_r.clone(), member.pair.pub_x.clone())
}

fn product_excluding(
    group: &GroupParams,
    roster: &[MemberId],
    published_r: &BTreeMap<MemberId, Element>,
    skip: &[MemberId],
) -> Result<Element, ProtocolError> {
    let mut acc = group.identity();
    for &j in roster {
        if skip.contains(&j) {
            continue;
        }
        let pk = published_r
            .get(&j)
            .ok_or(ProtocolError::IncompleteRoster(j))?;
        acc = group.mul(&acc, pk);
    }
    Ok(acc)
}

/// Round-2 value of P1: the product of everyone else's published
/// `g^{r_j}`, i.e. `g^{sum of r_j over j != controller, self}`. Sent unicast
/// to the controller.
pub fn partial_product(
    group: &GroupParams,
    member: &MemberState,
    roster: &[MemberId],
    published_r: &BTreeMap<MemberId, Element>,
    controller: MemberId,
) -> Result<Element, ProtocolError> {
    let roster = normalize_roster(roster);
    product_excluding(group, &roster, published_r, &[controller, member.id])
}

/// Round-2 value of P2: the same product additionally blinded by
/// `g^{-x_i}`, which the controller cannot reconstruct on its own.
pub fn ika2_blinded_partial(
    group: &GroupParams,
    member: &MemberState,
    roster: &[MemberId],
    published_r: &BTreeMap<MemberId, Element>,
    controller: MemberId,
) -> Result<Element, ProtocolError> {
    let base = partial_product(group, member, roster, published_r, controller)?;
    let blind = group.pow_g(&group.scalar_neg(&member.pair.x));
    Ok(group.mul(&base, &blind))
}

/// P1 controller step: derives `K_1`, assembles the keying message,
/// and rotates the controller onto the freshly sampled pair.
///
/// Each received partial is recomputed from the published keys; a mismatch
/// means a malformed member and aborts the round.
pub fn ika1_build_keying<R: RngCore>(
    group: &GroupParams,
    controller: &mut MemberState,
    roster: &[MemberId],
    published: &BTreeMap<MemberId, MemberPublicKeys>,
    partials: &BTreeMap<MemberId, Element>,
    rng: &mut R,
) -> Result<(KeyingMessage, Element), ProtocolError> {
    let fresh = KeyPair::random(group, rng);
    ika1_build_keying_with(group, controller, roster, published, partials, fresh)
}

/// [`ika1_build_keying`] with the fresh pair pinned by the caller.
pub fn ika1_build_keying_with(
    group: &GroupParams,
    controller: &mut MemberState,
    roster: &[MemberId],
    published: &BTreeMap<MemberId, MemberPublicKeys>,
    partials: &BTreeMap<MemberId, Element>,
    fresh: KeyPair,
) -> Result<(KeyingMessage, Element), ProtocolError> {
    let roster = normalize_roster(roster);
    let c = controller.id;
    if !roster.contains(&c) {
        return Err(ProtocolError::NotAMember(c));
    }
    if controller.pair.r.is_zero() {
        return Err(ProtocolError::DegenerateScalar);
    }
    let others: Vec<MemberId> = roster.iter().copied().filter(|&i| i != c).collect();
    for &i in &others {
        if !published.contains_key(&i) || !partials.contains_key(&i) {
            return Err(ProtocolError::IncompleteRoster(i));
        }
    }

    let published_r: BTreeMap<MemberId, Element> = published
        .iter()
        .map(|(&i, pk)| (i, pk.pub_r.clone()))
        .collect();
    let full_product = product_excluding(group, &roster, &published_r, &[c])?;
    let key = group.exp(&full_product, &controller.pair.r);

    let r_c = controller.pair.r.clone();
    let neg_x_c = group.scalar_neg(&controller.pair.x);
    let computed = par::try_map_vec(others, |i| {
        let expected = product_excluding(group, &roster, &published_r, &[c, i])?;
        let partial = &partials[&i];
        if *partial != expected {
            return Err(ProtocolError::InconsistentPartial(i));
        }
        let mask = group.exp(&published[&i].pub_x, &neg_x_c);
        Ok((i, group.mul(&mask, &group.exp(partial, &r_c))))
    })?;
    let mut slots: BTreeMap<MemberId, Element> = computed.into_iter().collect();

    let self_slot = group.mul(
        &group.mul(
            &key,
            &group.pow_g(&group.scalar_neg(&group.scalar_mul(&fresh.r, &r_c))),
        ),
        &group.pow_g(&group.scalar_neg(&group.scalar_mul(&fresh.x, &controller.pair.x))),
    );
    slots.insert(c, self_slot);

    let msg = KeyingMessage {
        epoch: 1,
        variant: Variant::P1,
        roster,
        slots,
        r: controller.pair.pub_r.clone(),
        s: Some(controller.pair.pub_x.clone()),
    };
    controller.pair = fresh;
    controller.epoch = 1;
    controller.key = Some(key.clone());
    controller.role = Role::Controller;
    Ok((msg, key))
}

/// P2 controller step: slots are the blinded partials raised to
/// `r_c`, the message carries no S, and the controller's own slot masks with
/// `R`'s base instead.
pub fn ika2_build_keying<R: RngCore>(
    group: &GroupParams,
    controller: &mut MemberState,
    roster: &[MemberId],
    published_r: &BTreeMap<MemberId, Element>,
    blinded: &BTreeMap<MemberId, Element>,
    rng: &mut R,
) -> Result<(KeyingMessage, Element), ProtocolError> {
    let fresh = KeyPair::random(group, rng);
    ika2_build_keying_with(group, controller, roster, published_r, blinded, fresh)
}

/// [`ika2_build_keying`] with the fresh pair pinned by the caller.
pub fn ika2_build_keying_with(
    group: &GroupParams,
    controller: &mut MemberState,
    roster: &[MemberId],
    published_r: &BTreeMap<MemberId, Element>,
    blinded: &BTreeMap<MemberId, Element>,
    fresh: KeyPair,
) -> Result<(KeyingMessage, Element), ProtocolError> {
    let roster = normalize_roster(roster);
    let c = controller.id;
    if !roster.contains(&c) {
        return Err(ProtocolError::NotAMember(c));
    }
    if controller.pair.r.is_zero() {
        return Err(ProtocolError::DegenerateScalar);
    }
    let others: Vec<MemberId> = roster.iter().copied().filter(|&i| i != c).collect();
    for &i in &others {
        if !published_r.contains_key(&i) || !blinded.contains_key(&i) {
            return Err(ProtocolError::IncompleteRoster(i));
        }
    }

    let full_product = product_excluding(group, &roster, published_r, &[c])?;
    let key = group.exp(&full_product, &controller.pair.r);

    let r_c = controller.pair.r.clone();
    let computed = par::map_vec(others, |i| (i, group.exp(&blinded[&i], &r_c)));
    let mut slots: BTreeMap<MemberId, Element> = computed.into_iter().collect();

    // Without S, both masks of the controller slot exponentiate g^{r_c}.
    let self_slot = group.mul(
        &group.mul(
            &key,
            &group.pow_g(&group.scalar_neg(&group.scalar_mul(&fresh.r, &r_c))),
        ),
        &group.pow_g(&group.scalar_neg(&group.scalar_mul(&fresh.x, &r_c))),
    );
    slots.insert(c, self_slot);

    let msg = KeyingMessage {
        epoch: 1,
        variant: Variant::P2,
        roster,
        slots,
        r: controller.pair.pub_r.clone(),
        s: None,
    };
    controller.pair = fresh;
    controller.epoch = 1;
    controller.key = Some(key.clone());
    controller.role = Role::Controller;
    Ok((msg, key))
}

/// Pure recovery of a slot with an explicit pair: `Y * S^x * R^r`, with `R`
/// doubling for `S` on chains keyed without one. No state is touched.
pub fn recover_slot(
    group: &GroupParams,
    msg: &KeyingMessage,
    id: MemberId,
    r: &Scalar,
    x: &Scalar,
) -> Result<Element, ProtocolError> {
    let slot = msg.slots.get(&id).ok_or(ProtocolError::NoSlot(id))?;
    let s_base = msg.s.as_ref().unwrap_or(&msg.r);
    let masked = group.mul(slot, &group.exp(s_base, x));
    Ok(group.mul(&masked, &group.exp(&msg.r, r)))
}

/// Member recovery on an S-bearing chain (P1, P3, P4). Updates the
/// member's key and epoch.
pub fn recover_key(
    group: &GroupParams,
    member: &mut MemberState,
    msg: &KeyingMessage,
) -> Result<Element, ProtocolError> {
    if msg.s.is_none() {
        return Err(ProtocolError::WrongVariant("S-bearing"));
    }
    finish_recovery(group, member, msg)
}

/// Member recovery on an S-less chain (P2 and its rekeys):
/// `K = Y * R^x * R^r`.
pub fn ika2_recover(
    group: &GroupParams,
    member: &mut MemberState,
    msg: &KeyingMessage,
) -> Result<Element, ProtocolError> {
    if msg.s.is_some() {
        return Err(ProtocolError::WrongVariant("S-less"));
    }
    finish_recovery(group, member, msg)
}

/// Recovery dispatching on the chain flavor carried by the message.
pub fn recover(
    group: &GroupParams,
    member: &mut MemberState,
    msg: &KeyingMessage,
) -> Result<Element, ProtocolError> {
    finish_recovery(group, member, msg)
}

fn finish_recovery(
    group: &GroupParams,
    member: &mut MemberState,
    msg: &KeyingMessage,
) -> Result<Element, ProtocolError> {
    let k = recover_slot(group, msg, member.id, &member.pair.r, &member.pair.x)?;
    member.key = Some(k.clone());
    member.epoch = msg.epoch;
    Ok(k)
}

/// P3: single-broadcast rekey by any current member. The whole
/// previous message is raised to the fresh `r'`, and the new controller's
/// slot is rebuilt for its fresh pair.
pub fn aka_rekey<R: RngCore>(
    group: &GroupParams,
    controller: &mut MemberState,
    prev: &KeyingMessage,
    prev_key: &Element,
    rng: &mut R,
) -> Result<(KeyingMessage, Element), ProtocolError> {
    let fresh = KeyPair::random(group, rng);
    aka_rekey_with(group, controller, prev, prev_key, fresh)
}

/// [`aka_rekey`] with the fresh pair pinned by the caller.
pub fn aka_rekey_with(
    group: &GroupParams,
    controller: &mut MemberState,
    prev: &KeyingMessage,
    prev_key: &Element,
    fresh: KeyPair,
) -> Result<(KeyingMessage, Element), ProtocolError> {
    rekey_core(group, controller, prev, prev_key, &BTreeSet::new(), fresh)
}

/// Rekeying that simultaneously evicts `leavers`: their slots are erased and
/// the roster shrinks, so they cannot recover any later key.
pub fn rekey_evict<R: RngCore>(
    group: &GroupParams,
    controller: &mut MemberState,
    prev: &KeyingMessage,
    prev_key: &Element,
    leavers: &BTreeSet<MemberId>,
    rng: &mut R,
) -> Result<(KeyingMessage, Element), ProtocolError> {
    let fresh = KeyPair::random(group, rng);
    rekey_core(group, controller, prev, prev_key, leavers, fresh)
}

/// [`rekey_evict`] with the fresh pair pinned by the caller.
pub fn rekey_evict_with(
    group: &GroupParams,
    controller: &mut MemberState,
    prev: &KeyingMessage,
    prev_key: &Element,
    leavers: &BTreeSet<MemberId>,
    fresh: KeyPair,
) -> Result<(KeyingMessage, Element), ProtocolError> {
    rekey_core(group, controller, prev, prev_key, leavers, fresh)
}

fn rekey_core(
    group: &GroupParams,
    controller: &mut MemberState,
    prev: &KeyingMessage,
    prev_key: &Element,
    leavers: &BTreeSet<MemberId>,
    fresh: KeyPair,
) -> Result<(KeyingMessage, Element), ProtocolError> {
    prev.coherent()?;
    let c = controller.id;
    if !prev.roster.contains(&c) {
        return Err(ProtocolError::NotAMember(c));
    }
    if prev.roster.iter().all(|i| leavers.contains(i)) {
        return Err(ProtocolError::EmptyRoster);
    }
    if leavers.contains(&c) {
        return Err(ProtocolError::InvalidEviction(c));
    }
    if let Some(&ghost) = leavers.iter().find(|l| !prev.roster.contains(l)) {
        return Err(ProtocolError::InvalidEviction(ghost));
    }
    if fresh.r.is_zero() {
        return Err(ProtocolError::DegenerateScalar);
    }

    let roster: Vec<MemberId> = prev
        .roster
        .iter()
        .copied()
        .filter(|i| !leavers.contains(i))
        .collect();
    let r_new = fresh.r.clone();
    let key = group.exp(prev_key, &r_new);

    let others: Vec<MemberId> = roster.iter().copied().filter(|&i| i != c).collect();
    let computed = par::map_vec(others, |i| (i, group.exp(&prev.slots[&i], &r_new)));
    let mut slots: BTreeMap<MemberId, Element> = computed.into_iter().collect();
    slots.insert(c, controller_slot(group, &key, &prev.r, prev.s.as_ref(), &fresh));

    let msg = KeyingMessage {
        epoch: prev.epoch + 1,
        variant: Variant::P3,
        roster,
        slots,
        r: group.exp(&prev.r, &r_new),
        s: prev.s.as_ref().map(|s| group.exp(s, &r_new)),
    };
    controller.pair = fresh;
    controller.epoch = msg.epoch;
    controller.key = Some(key.clone());
    controller.role = Role::Controller;
    Ok((msg, key))
}

/// `Y_c = K * R_prev^{-r' r'} * S_prev^{-r' x'}`, with `R_prev` doubling for
/// `S_prev` on S-less chains. The shape is forced by the recovery formula:
/// the acting member must be able to open its own slot with its fresh pair.
fn controller_slot(
    group: &GroupParams,
    key: &Element,
    prev_r: &Element,
    prev_s: Option<&Element>,
    fresh: &KeyPair,
) -> Element {
    let s_base = prev_s.unwrap_or(prev_r);
    let mask_r = group.exp(
        prev_r,
        &group.scalar_neg(&group.scalar_mul(&fresh.r, &fresh.r)),
    );
    let mask_s = group.exp(
        s_base,
        &group.scalar_neg(&group.scalar_mul(&fresh.r, &fresh.x)),
    );
    group.mul(&group.mul(key, &mask_r), &mask_s)
}

/// A prospective member blinds its pair against the current public values
/// `(R_t, S_t)` and petitions the collector. Pass `None` for `s_t` on S-less
/// chains.
pub fn join_petition(
    group: &GroupParams,
    joiner: &MemberState,
    r_t: &Element,
    s_t: Option<&Element>,
) -> JoinPetition {
    let s_base = s_t.unwrap_or(r_t);
    JoinPetition {
        joiner: joiner.id,
        blinded_r: group.exp(r_t, &joiner.pair.r),
        blinded_x: group.exp(s_base, &joiner.pair.x),
    }
}

/// P4: the collector folds the petitioners' blinded `R_t^{r}` values
/// into the key, re-masks every existing slot, and appends one slot per
/// joiner.
pub fn join_rekey<R: RngCore>(
    group: &GroupParams,
    collector: &mut MemberState,
    prev: &KeyingMessage,
    prev_key: &Element,
    petitions: &[JoinPetition],
    rng: &mut R,
) -> Result<(KeyingMessage, Element), ProtocolError> {
    let fresh = KeyPair::random(group, rng);
    join_rekey_with(group, collector, prev, prev_key, petitions, fresh)
}

/// [`join_rekey`] with the fresh pair pinned by the caller.
pub fn join_rekey_with(
    group: &GroupParams,
    collector: &mut MemberState,
    prev: &KeyingMessage,
    prev_key: &Element,
    petitions: &[JoinPetition],
    fresh: KeyPair,
) -> Result<(KeyingMessage, Element), ProtocolError> {
    prev.coherent()?;
    let c = collector.id;
    if !prev.roster.contains(&c) {
        return Err(ProtocolError::NotAMember(c));
    }
    if petitions.is_empty() {
        return Err(ProtocolError::DegenerateJoin);
    }
    let mut joiner_ids = BTreeSet::new();
    for p in petitions {
        if prev.roster.contains(&p.joiner) || !joiner_ids.insert(p.joiner) {
            return Err(ProtocolError::RosterConflict(p.joiner));
        }
        group.check_element(&p.blinded_r)?;
        group.check_element(&p.blinded_x)?;
    }
    if fresh.r.is_zero() {
        return Err(ProtocolError::DegenerateScalar);
    }

    // B = prod of blinded r-values = R_t^{sum of joining r}
    let blinded_sum = petitions
        .iter()
        .fold(group.identity(), |acc, p| group.mul(&acc, &p.blinded_r));
    let r_new = fresh.r.clone();
    let key = group.exp(&group.mul(prev_key, &blinded_sum), &r_new);

    let others: Vec<MemberId> = prev.roster.iter().copied().filter(|&i| i != c).collect();
    let computed = par::map_vec(others, |i| {
        let folded = group.mul(&prev.slots[&i], &blinded_sum);
        (i, group.exp(&folded, &r_new))
    });
    let mut slots: BTreeMap<MemberId, Element> = computed.into_iter().collect();
    slots.insert(c, controller_slot(group, &key, &prev.r, prev.s.as_ref(), &fresh));

    let neg_r_new = group.scalar_neg(&r_new);
    let joiner_slots = par::map_vec(petitions.to_vec(), |p| {
        let mask = group.mul(
            &group.exp(&p.blinded_r, &neg_r_new),
            &group.exp(&p.blinded_x, &neg_r_new),
        );
        (p.joiner, group.mul(&key, &mask))
    });
    slots.extend(joiner_slots);

    let mut roster: Vec<MemberId> = prev.roster.clone();
    roster.extend(joiner_ids.iter().copied());
    roster.sort_unstable();

    let msg = KeyingMessage {
        epoch: prev.epoch + 1,
        variant: Variant::P4,
        roster,
        slots,
        r: group.exp(&prev.r, &r_new),
        s: prev.s.as_ref().map(|s| group.exp(s, &r_new)),
    };
    collector.pair = fresh;
    collector.epoch = msg.epoch;
    collector.key = Some(key.clone());
    collector.role = Role::Controller;
    Ok((msg, key))
}

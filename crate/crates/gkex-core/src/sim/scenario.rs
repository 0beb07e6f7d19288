//! Scenario scripts and the deterministic runner.
//!
//! A scenario is a JSON array of events; the first must be an `ika`. Private
//! scalars may be pinned per member (decimal or 0x-hex strings) to reproduce
//! worked fixtures; anything unpinned is drawn from the seeded sampler, in
//! ascending member id order, `r` before `x`. Running the same script with
//! the same group and seed reproduces the transcript byte for byte.
//!
//! The runner is a single logical event loop: members act strictly in turn
//! and all inter-member influence flows through bus messages. After every
//! broadcast it checks agreement and the per-slot recovery identity, and
//! aborts with a diagnostic dump if either fails.

use crate::adversary;
use crate::group::{Element, GroupParams, Scalar};
use crate::protocol::{
    self, KeyPair, KeyingMessage, MemberId, MemberPublicKeys, MemberState, ProtocolError,
};
use crate::sim::bus::{Bus, Destination, Envelope};
use crate::sim::transcript::{
    Direction, OraclePair, OracleRecord, Payload, Receiver, Transcript, TranscriptRecord,
};
use crate::sim::SimError;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Which initial agreement protocol an `ika` event runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IkaVariant {
    P1,
    P2,
}

/// A member entering the simulation, with optionally pinned private scalars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberSpec {
    pub id: MemberId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
}

/// An optionally pinned fresh pair for the acting controller.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
}

/// One scripted step of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioEvent {
    Ika {
        variant: IkaVariant,
        controller: MemberId,
        members: Vec<MemberSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fresh: Option<PairSpec>,
    },
    Rekey {
        controller: MemberId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fresh: Option<PairSpec>,
    },
    Evict {
        controller: MemberId,
        leavers: Vec<MemberId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fresh: Option<PairSpec>,
    },
    Join {
        collector: MemberId,
        joiners: Vec<MemberSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fresh: Option<PairSpec>,
    },
    AttackDemo,
}

/// Parses a scenario file body.
pub fn parse_scenario(json: &str) -> Result<Vec<ScenarioEvent>, SimError> {
    serde_json::from_str(json).map_err(|e| SimError::Script(format!("cannot parse scenario: {e}")))
}

/// Static script checks: non-empty, exactly one leading `ika`, coherent
/// member lists.
pub fn validate_script(script: &[ScenarioEvent]) -> Result<(), SimError> {
    if script.is_empty() {
        return Err(SimError::Script("scenario is empty".into()));
    }
    if !matches!(script[0], ScenarioEvent::Ika { .. }) {
        return Err(SimError::Script(
            "first event must be ika".into(),
        ));
    }
    for (index, event) in script.iter().enumerate() {
        match event {
            ScenarioEvent::Ika {
                controller,
                members,
                ..
            } => {
                if index > 0 {
                    return Err(SimError::Script(format!(
                        "event {index}: ika may only appear first"
                    )));
                }
                if members.is_empty() {
                    return Err(SimError::Script("ika needs at least one member".into()));
                }
                let mut ids = BTreeSet::new();
                for m in members {
                    if !ids.insert(m.id) {
                        return Err(SimError::Script(format!(
                            "duplicate member id {} in ika",
                            m.id
                        )));
                    }
                }
                if !ids.contains(controller) {
                    return Err(SimError::Script(format!(
                        "ika controller {controller} is not among the members"
                    )));
                }
            }
            ScenarioEvent::Join { joiners, .. } => {
                if joiners.is_empty() {
                    return Err(SimError::Script(format!(
                        "event {index}: join lists no joiners"
                    )));
                }
                let mut ids = BTreeSet::new();
                for j in joiners {
                    if !ids.insert(j.id) {
                        return Err(SimError::Script(format!(
                            "event {index}: duplicate joiner id {}",
                            j.id
                        )));
                    }
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Executes a script against a group with a seeded random source and returns
/// the full transcript.
pub fn run_scenario(
    script: &[ScenarioEvent],
    group: &GroupParams,
    seed: u64,
) -> Result<Transcript, SimError> {
    validate_script(script)?;
    let mut runner = Runner {
        group,
        rng: ChaCha20Rng::seed_from_u64(seed),
        bus: Bus::new(),
        members: BTreeMap::new(),
        records: Vec::new(),
        seq: 0,
        last: None,
    };
    for (index, event) in script.iter().enumerate() {
        runner.step(index, event)?;
    }
    Ok(Transcript {
        records: runner.records,
    })
}

struct SimMember {
    state: MemberState,
    pinned_r: bool,
    pinned_x: bool,
}

impl SimMember {
    fn oracle_pair(&self) -> OraclePair {
        OraclePair {
            r: self.state.pair.r.clone(),
            x: self.state.pair.x.clone(),
            pinned_r: self.pinned_r,
            pinned_x: self.pinned_x,
        }
    }
}

struct LastEpoch {
    msg: KeyingMessage,
    key: Element,
    controller: MemberId,
}

struct Runner<'g> {
    group: &'g GroupParams,
    rng: ChaCha20Rng,
    bus: Bus,
    members: BTreeMap<MemberId, SimMember>,
    records: Vec<TranscriptRecord>,
    seq: u64,
    last: Option<LastEpoch>,
}

impl Runner<'_> {
    fn step(&mut self, index: usize, event: &ScenarioEvent) -> Result<(), SimError> {
        match event {
            ScenarioEvent::Ika {
                variant,
                controller,
                members,
                fresh,
            } => self.run_ika(index, *variant, *controller, members, fresh.as_ref()),
            ScenarioEvent::Rekey { controller, fresh } => {
                self.run_rekey(index, *controller, &[], fresh.as_ref())
            }
            ScenarioEvent::Evict {
                controller,
                leavers,
                fresh,
            } => self.run_rekey(index, *controller, leavers, fresh.as_ref()),
            ScenarioEvent::Join {
                collector,
                joiners,
                fresh,
            } => self.run_join(index, *collector, joiners, fresh.as_ref()),
            ScenarioEvent::AttackDemo => self.run_attack_demo(index),
        }
    }

    fn push(
        &mut self,
        epoch: u64,
        direction: Direction,
        sender: MemberId,
        receiver: Receiver,
        payload: Payload,
        oracle: Option<OracleRecord>,
    ) {
        self.seq += 1;
        self.records.push(TranscriptRecord {
            seq: self.seq,
            epoch,
            direction,
            sender,
            receiver,
            payload,
            oracle,
        });
    }

    fn scalar_spec(
        &mut self,
        spec: Option<&String>,
        what: &str,
    ) -> Result<(Scalar, bool), SimError> {
        match spec {
            Some(s) => {
                let scalar = self
                    .group
                    .scalar_from_str(s)
                    .map_err(|e| SimError::Script(format!("bad pinned {what}: {e}")))?;
                Ok((scalar, true))
            }
            None => Ok((self.group.sample_scalar(&mut self.rng), false)),
        }
    }

    fn pair_from_spec(
        &mut self,
        spec: Option<&PairSpec>,
    ) -> Result<(KeyPair, bool, bool), SimError> {
        let empty = PairSpec::default();
        let spec = spec.unwrap_or(&empty);
        let (r, pinned_r) = self.scalar_spec(spec.r.as_ref(), "fresh r")?;
        let (x, pinned_x) = self.scalar_spec(spec.x.as_ref(), "fresh x")?;
        Ok((KeyPair::from_scalars(self.group, r, x), pinned_r, pinned_x))
    }

    fn spawn_member(&mut self, spec: &MemberSpec) -> Result<SimMember, SimError> {
        let (r, pinned_r) = self.scalar_spec(spec.r.as_ref(), "member r")?;
        let (x, pinned_x) = self.scalar_spec(spec.x.as_ref(), "member x")?;
        Ok(SimMember {
            state: MemberState::new(spec.id, KeyPair::from_scalars(self.group, r, x)),
            pinned_r,
            pinned_x,
        })
    }

    fn event_err(index: usize, kind: &str, source: ProtocolError) -> SimError {
        SimError::Event {
            index,
            kind: kind.to_string(),
            source,
        }
    }

    fn last_epoch(&self, index: usize, kind: &str) -> Result<&LastEpoch, SimError> {
        self.last.as_ref().ok_or_else(|| {
            SimError::Script(format!("event {index}: {kind} before any completed ika"))
        })
    }

    fn run_ika(
        &mut self,
        index: usize,
        variant: IkaVariant,
        controller: MemberId,
        specs: &[MemberSpec],
        fresh: Option<&PairSpec>,
    ) -> Result<(), SimError> {
        let mut specs: Vec<MemberSpec> = specs.to_vec();
        specs.sort_by_key(|s| s.id);
        for spec in &specs {
            let member = self.spawn_member(spec)?;
            self.bus.register(spec.id);
            self.members.insert(spec.id, member);
        }
        let roster: Vec<MemberId> = specs.iter().map(|s| s.id).collect();

        // round 1: every non-controller publishes
        for &id in &roster {
            if id == controller {
                continue;
            }
            let (pub_r, pub_x) = protocol::publish_keys(&self.members[&id].state);
            let payload = Payload::PublishedKeys {
                pub_r,
                pub_x: match variant {
                    IkaVariant::P1 => Some(pub_x),
                    IkaVariant::P2 => None,
                },
            };
            self.push(1, Direction::Publish, id, Receiver::All, payload, None);
        }

        let published: BTreeMap<MemberId, MemberPublicKeys> = roster
            .iter()
            .filter(|&&id| id != controller)
            .map(|&id| {
                let (pub_r, pub_x) = protocol::publish_keys(&self.members[&id].state);
                (id, MemberPublicKeys { pub_r, pub_x })
            })
            .collect();
        let published_r: BTreeMap<MemberId, Element> = published
            .iter()
            .map(|(&id, pk)| (id, pk.pub_r.clone()))
            .collect();

        // round 2: partials travel unicast to the controller
        let mut envelopes = Vec::new();
        let mut partials: BTreeMap<MemberId, Element> = BTreeMap::new();
        for &id in &roster {
            if id == controller {
                continue;
            }
            let member = &self.members[&id].state;
            let partial = match variant {
                IkaVariant::P1 => protocol::partial_product(
                    self.group,
                    member,
                    &roster,
                    &published_r,
                    controller,
                ),
                IkaVariant::P2 => protocol::ika2_blinded_partial(
                    self.group,
                    member,
                    &roster,
                    &published_r,
                    controller,
                ),
            }
            .map_err(|e| Self::event_err(index, "ika", e))?;
            partials.insert(id, partial.clone());
            envelopes.push(Envelope {
                sender: id,
                dest: Destination::Unicast(controller),
                payload: Payload::Partial { partial },
            });
        }
        for delivery in self.bus.deliver_round(envelopes)? {
            self.push(
                1,
                Direction::Unicast,
                delivery.sender,
                Receiver::Member(delivery.receiver),
                delivery.payload,
                None,
            );
        }

        let (fresh_pair, pinned_r, pinned_x) = self.pair_from_spec(fresh)?;
        let mut acting = self
            .members
            .remove(&controller)
            .ok_or_else(|| Self::event_err(index, "ika", ProtocolError::NotAMember(controller)))?;
        let consumed = acting.oracle_pair();
        let built = match variant {
            IkaVariant::P1 => protocol::ika1_build_keying_with(
                self.group,
                &mut acting.state,
                &roster,
                &published,
                &partials,
                fresh_pair,
            ),
            IkaVariant::P2 => protocol::ika2_build_keying_with(
                self.group,
                &mut acting.state,
                &roster,
                &published_r,
                &partials,
                fresh_pair,
            ),
        };
        acting.pinned_r = pinned_r;
        acting.pinned_x = pinned_x;
        self.members.insert(controller, acting);
        let (msg, key) = built.map_err(|e| Self::event_err(index, "ika", e))?;
        self.finish_epoch(index, "ika", controller, consumed, msg, key)
    }

    fn run_rekey(
        &mut self,
        index: usize,
        controller: MemberId,
        leavers: &[MemberId],
        fresh: Option<&PairSpec>,
    ) -> Result<(), SimError> {
        let kind = if leavers.is_empty() { "rekey" } else { "evict" };
        let (prev_msg, prev_key) = {
            let last = self.last_epoch(index, kind)?;
            (last.msg.clone(), last.key.clone())
        };
        let (fresh_pair, pinned_r, pinned_x) = self.pair_from_spec(fresh)?;
        let leaver_set: BTreeSet<MemberId> = leavers.iter().copied().collect();
        let mut acting = self
            .members
            .remove(&controller)
            .ok_or_else(|| Self::event_err(index, kind, ProtocolError::NotAMember(controller)))?;
        let consumed = acting.oracle_pair();
        let built = protocol::rekey_evict_with(
            self.group,
            &mut acting.state,
            &prev_msg,
            &prev_key,
            &leaver_set,
            fresh_pair,
        );
        acting.pinned_r = pinned_r;
        acting.pinned_x = pinned_x;
        self.members.insert(controller, acting);
        let (msg, key) = built.map_err(|e| Self::event_err(index, kind, e))?;

        // leavers fall off the bus and must have lost their slot
        for &leaver in &leaver_set {
            self.bus.remove(leaver);
            if let Some(mut gone) = self.members.remove(&leaver) {
                match protocol::recover(self.group, &mut gone.state, &msg) {
                    Err(ProtocolError::NoSlot(_)) => {}
                    other => {
                        return Err(SimError::InvariantViolation {
                            index,
                            epoch: msg.epoch,
                            detail: format!(
                                "evicted member {leaver} still addressed by the broadcast"
                            ),
                            dump: format!("{other:?}\n{msg:?}"),
                        })
                    }
                }
            }
        }
        self.finish_epoch(index, kind, controller, consumed, msg, key)
    }

    fn run_join(
        &mut self,
        index: usize,
        collector: MemberId,
        joiners: &[MemberSpec],
        fresh: Option<&PairSpec>,
    ) -> Result<(), SimError> {
        let (prev_msg, prev_key) = {
            let last = self.last_epoch(index, "join")?;
            (last.msg.clone(), last.key.clone())
        };
        let epoch = prev_msg.epoch + 1;
        if !self.members.contains_key(&collector) {
            return Err(Self::event_err(
                index,
                "join",
                ProtocolError::NotAMember(collector),
            ));
        }

        // the current public values are announced for the petitioners
        self.push(
            epoch,
            Direction::Publish,
            collector,
            Receiver::All,
            Payload::PublicValues {
                r: prev_msg.r.clone(),
                s: prev_msg.s.clone(),
            },
            None,
        );

        let mut specs: Vec<MemberSpec> = joiners.to_vec();
        specs.sort_by_key(|s| s.id);
        let mut envelopes = Vec::new();
        let mut petitions = Vec::new();
        for spec in &specs {
            let member = self.spawn_member(spec)?;
            let petition = protocol::join_petition(
                self.group,
                &member.state,
                &prev_msg.r,
                prev_msg.s.as_ref(),
            );
            self.bus.register(spec.id);
            self.members.insert(spec.id, member);
            envelopes.push(Envelope {
                sender: spec.id,
                dest: Destination::Unicast(collector),
                payload: Payload::Petition(petition.clone()),
            });
            petitions.push(petition);
        }
        for delivery in self.bus.deliver_round(envelopes)? {
            self.push(
                epoch,
                Direction::Unicast,
                delivery.sender,
                Receiver::Member(delivery.receiver),
                delivery.payload,
                None,
            );
        }

        let (fresh_pair, pinned_r, pinned_x) = self.pair_from_spec(fresh)?;
        let mut acting = self
            .members
            .remove(&collector)
            .expect("collector presence checked above");
        let consumed = acting.oracle_pair();
        let built = protocol::join_rekey_with(
            self.group,
            &mut acting.state,
            &prev_msg,
            &prev_key,
            &petitions,
            fresh_pair,
        );
        acting.pinned_r = pinned_r;
        acting.pinned_x = pinned_x;
        self.members.insert(collector, acting);
        let (msg, key) = built.map_err(|e| Self::event_err(index, "join", e))?;
        self.finish_epoch(index, "join", collector, consumed, msg, key)
    }

    fn run_attack_demo(&mut self, index: usize) -> Result<(), SimError> {
        let last = self.last_epoch(index, "attack_demo")?;
        let candidate =
            adversary::attack_real_protocol(self.group, &last.msg, last.controller)
                .map_err(|e| SimError::Attack(format!("event {index}: {e}")))?;
        if candidate == last.key {
            return Err(SimError::InvariantViolation {
                index,
                epoch: last.msg.epoch,
                detail: "product attack recovered the group key".into(),
                dump: format!("candidate {candidate:?}\n{:?}", last.msg),
            });
        }
        Ok(())
    }

    /// Broadcast delivery, recovery by every roster member, and the
    /// per-epoch invariant checks. The oracle section lands on the broadcast
    /// record.
    fn finish_epoch(
        &mut self,
        index: usize,
        kind: &str,
        controller: MemberId,
        consumed: OraclePair,
        msg: KeyingMessage,
        key: Element,
    ) -> Result<(), SimError> {
        self.bus.deliver(&Envelope {
            sender: controller,
            dest: Destination::Broadcast,
            payload: Payload::Keying(msg.clone()),
        })?;

        if let Err(defect) = msg.validate(self.group) {
            return Err(SimError::InvariantViolation {
                index,
                epoch: msg.epoch,
                detail: format!("broadcast failed validation: {defect}"),
                dump: format!("{msg:?}"),
            });
        }

        let mut derived = BTreeMap::new();
        for &id in &msg.roster {
            let member = self
                .members
                .get_mut(&id)
                .ok_or_else(|| Self::event_err(index, kind, ProtocolError::NotAMember(id)))?;
            let recovered = protocol::recover(self.group, &mut member.state, &msg)
                .map_err(|e| Self::event_err(index, kind, e))?;
            derived.insert(id, recovered);
        }
        for (&id, recovered) in &derived {
            if *recovered != key {
                return Err(SimError::InvariantViolation {
                    index,
                    epoch: msg.epoch,
                    detail: format!("member {id} disagrees on the epoch key"),
                    dump: format!(
                        "expected {key:?}\nderived {recovered:?}\nbroadcast {msg:?}"
                    ),
                });
            }
        }

        let pairs: BTreeMap<MemberId, OraclePair> = msg
            .roster
            .iter()
            .map(|id| (*id, self.members[id].oracle_pair()))
            .collect();
        let oracle = OracleRecord {
            controller,
            consumed_pair: consumed,
            fresh_pair: pairs[&controller].clone(),
            pairs,
            expected_key: key.clone(),
            derived,
        };
        self.push(
            msg.epoch,
            Direction::Broadcast,
            controller,
            Receiver::All,
            Payload::Keying(msg.clone()),
            Some(oracle),
        );
        self.last = Some(LastEpoch {
            msg,
            key,
            controller,
        });
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::group::Preset;
    use num_bigint::BigUint;

    fn tiny() -> GroupParams {
        GroupParams::from_preset(Preset::Tiny)
    }

    fn spec(id: u32, r: u64, x: u64) -> MemberSpec {
        MemberSpec {
            id: MemberId(id),
            r: Some(r.to_string()),
            x: Some(x.to_string()),
        }
    }

    fn pinned(r: u64, x: u64) -> Option<PairSpec> {
        Some(PairSpec {
            r: Some(r.to_string()),
            x: Some(x.to_string()),
        })
    }

    pub(crate) fn f1_script() -> Vec<ScenarioEvent> {
        vec![
            ScenarioEvent::Ika {
                variant: IkaVariant::P1,
                controller: MemberId(1),
                members: vec![spec(1, 2, 3), spec(2, 5, 7), spec(3, 8, 6)],
                fresh: pinned(9, 10),
            },
            ScenarioEvent::Rekey {
                controller: MemberId(2),
                fresh: pinned(4, 1),
            },
            ScenarioEvent::Join {
                collector: MemberId(3),
                joiners: vec![spec(4, 3, 2)],
                fresh: pinned(5, 7),
            },
        ]
    }

    #[test]
    fn f1_chain_reproduces_epoch_keys() {
        let group = tiny();
        let transcript = run_scenario(&f1_script(), &group, 7).unwrap();
        let broadcasts = transcript.broadcasts();
        assert_eq!(broadcasts.len(), 3);
        let keys: Vec<u32> = broadcasts
            .iter()
            .map(|(rec, _)| {
                let oracle = rec.oracle.as_ref().unwrap();
                u32::try_from(oracle.expected_key.value().clone()).unwrap()
            })
            .collect();
        assert_eq!(keys, vec![3, 12, 16]);
        assert_eq!(broadcasts[0].1.epoch, 1);
        assert_eq!(broadcasts[1].1.epoch, 2);
        assert_eq!(broadcasts[2].1.epoch, 3);
        assert_eq!(
            broadcasts[2].1.roster,
            vec![MemberId(1), MemberId(2), MemberId(3), MemberId(4)]
        );
    }

    #[test]
    fn same_seed_same_bytes() {
        let group = tiny();
        let script = vec![
            ScenarioEvent::Ika {
                variant: IkaVariant::P1,
                controller: MemberId(1),
                members: (1..=4)
                    .map(|id| MemberSpec {
                        id: MemberId(id),
                        r: None,
                        x: None,
                    })
                    .collect(),
                fresh: None,
            },
            ScenarioEvent::Rekey {
                controller: MemberId(3),
                fresh: None,
            },
        ];
        let a = run_scenario(&script, &group, 99).unwrap().to_jsonl();
        let b = run_scenario(&script, &group, 99).unwrap().to_jsonl();
        assert_eq!(a, b);
        let c = run_scenario(&script, &group, 100).unwrap().to_jsonl();
        assert_ne!(a, c);
    }

    #[test]
    fn script_validation_rejects_bad_shapes() {
        assert!(matches!(
            validate_script(&[]),
            Err(SimError::Script(_))
        ));
        let rekey_first = vec![ScenarioEvent::Rekey {
            controller: MemberId(1),
            fresh: None,
        }];
        assert!(matches!(
            validate_script(&rekey_first),
            Err(SimError::Script(_))
        ));
        let dup = vec![ScenarioEvent::Ika {
            variant: IkaVariant::P1,
            controller: MemberId(1),
            members: vec![spec(1, 2, 3), spec(1, 5, 7)],
            fresh: None,
        }];
        assert!(matches!(validate_script(&dup), Err(SimError::Script(_))));
    }

    #[test]
    fn evicted_member_is_gone_and_rekey_by_outsider_fails() {
        let group = tiny();
        let script = vec![
            ScenarioEvent::Ika {
                variant: IkaVariant::P1,
                controller: MemberId(1),
                members: vec![spec(1, 2, 3), spec(2, 5, 7), spec(3, 8, 6)],
                fresh: pinned(9, 10),
            },
            ScenarioEvent::Evict {
                controller: MemberId(2),
                leavers: vec![MemberId(3)],
                fresh: pinned(4, 1),
            },
            ScenarioEvent::Rekey {
                controller: MemberId(3),
                fresh: None,
            },
        ];
        let err = run_scenario(&script, &group, 1).unwrap_err();
        match err {
            SimError::Event { index, source, .. } => {
                assert_eq!(index, 2);
                assert!(matches!(source, ProtocolError::NotAMember(MemberId(3))));
            }
            other => panic!("unexpected {other:?}"),
        }

        // without the stray rekey the eviction itself runs clean
        let transcript = run_scenario(&script[..2], &group, 1).unwrap();
        let broadcasts = transcript.broadcasts();
        assert_eq!(broadcasts[1].1.roster, vec![MemberId(1), MemberId(2)]);
    }

    #[test]
    fn join_conflicting_id_fails() {
        let group = tiny();
        let script = vec![
            ScenarioEvent::Ika {
                variant: IkaVariant::P2,
                controller: MemberId(2),
                members: vec![spec(1, 2, 3), spec(2, 5, 7)],
                fresh: None,
            },
            ScenarioEvent::Join {
                collector: MemberId(1),
                joiners: vec![spec(2, 3, 2)],
                fresh: None,
            },
        ];
        let err = run_scenario(&script, &group, 5).unwrap_err();
        assert!(matches!(
            err,
            SimError::Event {
                source: ProtocolError::RosterConflict(MemberId(2)),
                ..
            }
        ));
    }

    #[test]
    fn attack_demo_passes_on_real_chain() {
        let group = tiny();
        let mut script = f1_script();
        script.push(ScenarioEvent::AttackDemo);
        run_scenario(&script, &group, 7).unwrap();
    }

    #[test]
    fn scenario_json_round_trip() {
        let script = f1_script();
        let json = serde_json::to_string_pretty(&script).unwrap();
        let back = parse_scenario(&json).unwrap();
        assert_eq!(back, script);
        // the documented kind tags
        assert!(json.contains("\"kind\": \"ika\""));
        assert!(json.contains("\"kind\": \"rekey\""));
        assert!(json.contains("\"kind\": \"join\""));
    }

    #[test]
    fn p2_scenario_has_no_x_publications() {
        let group = tiny();
        let script = vec![ScenarioEvent::Ika {
            variant: IkaVariant::P2,
            controller: MemberId(1),
            members: vec![spec(1, 2, 3), spec(2, 5, 7), spec(3, 8, 6)],
            fresh: pinned(9, 10),
        }];
        let transcript = run_scenario(&script, &group, 3).unwrap();
        for record in &transcript.records {
            if let Payload::PublishedKeys { pub_x, .. } = &record.payload {
                assert!(pub_x.is_none());
            }
        }
        let k1 = transcript.broadcasts()[0]
            .1
            .slots
            .len();
        assert_eq!(k1, 3);
        // same key as the P1 fixture: g^4 = 3
        let oracle = transcript.broadcasts()[0].0.oracle.as_ref().unwrap();
        assert_eq!(oracle.expected_key.value(), &BigUint::from(3u32));
    }
}

//! Omniscient transcript verification.
//!
//! Recomputes every epoch key from the raw scalars in the oracle sections,
//! re-derives every member's recovery from the wire values, and checks the
//! chain identities, epoch numbering and subgroup membership of everything
//! that crossed the wire. Each check reports all of its failures rather than
//! stopping at the first.

use crate::group::{Element, GroupParams};
use crate::par;
use crate::protocol::{recover_slot, KeyingMessage, MemberId, Variant};
use crate::sim::transcript::{OracleRecord, Payload, Transcript, TranscriptRecord};
use crate::sim::SimError;
use std::collections::BTreeSet;
use std::fmt;

/// Outcome of one named check.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub failures: Vec<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// The full verification report: one result per check.
#[derive(Clone, Debug)]
pub struct Report {
    pub checks: Vec<CheckResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for check in &self.checks {
            if check.passed() {
                writeln!(f, "check {}: PASS", check.name)?;
            } else {
                writeln!(f, "check {}: FAIL", check.name)?;
                for failure in &check.failures {
                    writeln!(f, "  - {failure}")?;
                }
            }
        }
        Ok(())
    }
}

struct Broadcast<'a> {
    record: &'a TranscriptRecord,
    msg: &'a KeyingMessage,
    oracle: &'a OracleRecord,
}

/// Runs every check against a parsed transcript. Structural prerequisites
/// (a broadcast without an oracle section, no broadcasts at all) are errors;
/// everything else lands in the report.
pub fn verify_transcript(
    transcript: &Transcript,
    group: &GroupParams,
) -> Result<Report, SimError> {
    let mut broadcasts = Vec::new();
    for record in &transcript.records {
        if let Payload::Keying(msg) = &record.payload {
            let oracle = record.oracle.as_ref().ok_or_else(|| {
                SimError::Unverifiable(format!(
                    "broadcast record seq {} carries no oracle section",
                    record.seq
                ))
            })?;
            broadcasts.push(Broadcast {
                record,
                msg,
                oracle,
            });
        }
    }
    if broadcasts.is_empty() {
        return Err(SimError::Unverifiable(
            "transcript contains no keying broadcast".into(),
        ));
    }

    let checks = vec![
        structure_check(transcript, &broadcasts, group),
        membership_check(transcript, group),
        chaining_check(&broadcasts, group),
        key_recomputation_check(&broadcasts, group),
        recovery_agreement_check(&broadcasts),
        slot_identity_check(&broadcasts, group),
    ];
    Ok(Report { checks })
}

fn structure_check(
    transcript: &Transcript,
    broadcasts: &[Broadcast<'_>],
    group: &GroupParams,
) -> CheckResult {
    let mut failures = Vec::new();
    for pair in transcript.records.windows(2) {
        if pair[1].seq <= pair[0].seq {
            failures.push(format!(
                "seq {} follows seq {}: not strictly increasing",
                pair[1].seq, pair[0].seq
            ));
        }
        if pair[1].epoch < pair[0].epoch {
            failures.push(format!(
                "seq {}: epoch {} regresses from {}",
                pair[1].seq, pair[1].epoch, pair[0].epoch
            ));
        }
    }
    for b in broadcasts {
        let epoch = b.msg.epoch;
        let roster: BTreeSet<MemberId> = b.msg.roster.iter().copied().collect();
        if roster.len() != b.msg.roster.len()
            || b.msg.roster.windows(2).any(|w| w[0] >= w[1])
        {
            failures.push(format!("epoch {epoch}: roster not strictly ascending"));
        }
        let slotted: BTreeSet<MemberId> = b.msg.slots.keys().copied().collect();
        if slotted != roster {
            failures.push(format!("epoch {epoch}: slots do not cover the roster"));
        }
        let paired: BTreeSet<MemberId> = b.oracle.pairs.keys().copied().collect();
        if paired != roster {
            failures.push(format!("epoch {epoch}: oracle pairs do not cover the roster"));
        }
        let derived: BTreeSet<MemberId> = b.oracle.derived.keys().copied().collect();
        if derived != roster {
            failures.push(format!(
                "epoch {epoch}: derived keys do not cover the roster"
            ));
        }
        if b.record.epoch != epoch {
            failures.push(format!(
                "seq {}: record epoch {} disagrees with broadcast epoch {epoch}",
                b.record.seq, b.record.epoch
            ));
        }
        for (id, pair) in &b.oracle.pairs {
            if pair.r.value() >= group.q() || pair.x.value() >= group.q() {
                failures.push(format!("epoch {epoch} member {id}: scalar out of range"));
            }
        }
    }
    CheckResult {
        name: "structure",
        failures,
    }
}

fn payload_elements(payload: &Payload) -> Vec<(String, &Element)> {
    let mut out: Vec<(String, &Element)> = Vec::new();
    match payload {
        Payload::Keying(msg) => {
            out.push(("R".into(), &msg.r));
            if let Some(s) = &msg.s {
                out.push(("S".into(), s));
            }
            for (id, y) in &msg.slots {
                out.push((format!("slot {id}"), y));
            }
        }
        Payload::Petition(p) => {
            out.push(("blinded_r".into(), &p.blinded_r));
            out.push(("blinded_x".into(), &p.blinded_x));
        }
        Payload::PublishedKeys { pub_r, pub_x } => {
            out.push(("pub_r".into(), pub_r));
            if let Some(x) = pub_x {
                out.push(("pub_x".into(), x));
            }
        }
        Payload::Partial { partial } => out.push(("partial".into(), partial)),
        Payload::PublicValues { r, s } => {
            out.push(("R".into(), r));
            if let Some(s) = s {
                out.push(("S".into(), s));
            }
        }
    }
    out
}

fn membership_check(transcript: &Transcript, group: &GroupParams) -> CheckResult {
    let indexed: Vec<&TranscriptRecord> = transcript.records.iter().collect();
    let per_record = par::map_vec(indexed, |record| {
        let mut failures = Vec::new();
        for (label, element) in payload_elements(&record.payload) {
            if group.check_element(element).is_err() {
                failures.push(format!(
                    "seq {} epoch {}: {label} is not in the subgroup",
                    record.seq, record.epoch
                ));
            }
        }
        if let Some(oracle) = &record.oracle {
            if group.check_element(&oracle.expected_key).is_err() {
                failures.push(format!(
                    "seq {} epoch {}: expected key is not in the subgroup",
                    record.seq, record.epoch
                ));
            }
            for (id, k) in &oracle.derived {
                if group.check_element(k).is_err() {
                    failures.push(format!(
                        "seq {} epoch {}: derived key of member {id} is not in the subgroup",
                        record.seq, record.epoch
                    ));
                }
            }
        }
        failures
    });
    CheckResult {
        name: "membership",
        failures: per_record.into_iter().flatten().collect(),
    }
}

fn chaining_check(broadcasts: &[Broadcast<'_>], group: &GroupParams) -> CheckResult {
    let mut failures = Vec::new();
    let first = &broadcasts[0];
    if first.msg.epoch != 1 {
        failures.push(format!(
            "first broadcast has epoch {}, expected 1",
            first.msg.epoch
        ));
    }
    if !matches!(first.msg.variant, Variant::P1 | Variant::P2) {
        failures.push(format!(
            "first broadcast has variant {}, expected an initial agreement",
            first.msg.variant
        ));
    }
    for pair in broadcasts.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        let epoch = cur.msg.epoch;
        if epoch != prev.msg.epoch + 1 {
            failures.push(format!(
                "epoch {epoch} does not chain from epoch {}",
                prev.msg.epoch
            ));
            continue;
        }
        if !matches!(cur.msg.variant, Variant::P3 | Variant::P4) {
            failures.push(format!(
                "epoch {epoch}: variant {} cannot follow an established chain",
                cur.msg.variant
            ));
        }
        if prev.msg.s.is_some() != cur.msg.s.is_some() {
            failures.push(format!("epoch {epoch}: chain switched its S flavor"));
        }
        // R_t = R_{t-1}^{r'}, S alike
        let fresh_r = &cur.oracle.fresh_pair.r;
        if group.exp(&prev.msg.r, fresh_r) != cur.msg.r {
            failures.push(format!("epoch {epoch}: R does not chain from the previous epoch"));
        }
        if let (Some(prev_s), Some(cur_s)) = (&prev.msg.s, &cur.msg.s) {
            if group.exp(prev_s, fresh_r) != *cur_s {
                failures.push(format!(
                    "epoch {epoch}: S does not chain from the previous epoch"
                ));
            }
        }
    }
    CheckResult {
        name: "chaining",
        failures,
    }
}

/// Recomputes every K_t from the raw scalars: the epoch-1 double sum, then
/// `K_t = K_(t-1)^r'` for rekeys and `K_(t+1) = (K_t * R_t^(sum of new r))^r'`
/// for joins. On a mismatch the fold continues from the oracle value so one
/// defect cannot cascade.
fn key_recomputation_check(broadcasts: &[Broadcast<'_>], group: &GroupParams) -> CheckResult {
    let mut failures = Vec::new();
    let mut prev_key: Option<Element> = None;
    let mut prev_msg: Option<&KeyingMessage> = None;
    for b in broadcasts {
        let epoch = b.msg.epoch;
        let oracle = b.oracle;
        let recomputed = match b.msg.variant {
            Variant::P1 | Variant::P2 => {
                let sum = b
                    .msg
                    .roster
                    .iter()
                    .filter(|&&id| id != oracle.controller)
                    .filter_map(|id| oracle.pairs.get(id))
                    .fold(group.scalar_zero(), |acc, pair| {
                        group.scalar_add(&acc, &pair.r)
                    });
                Some(group.pow_g(&group.scalar_mul(&oracle.consumed_pair.r, &sum)))
            }
            Variant::P3 => prev_key
                .as_ref()
                .map(|k| group.exp(k, &oracle.fresh_pair.r)),
            Variant::P4 => match (&prev_key, prev_msg) {
                (Some(k), Some(pm)) => {
                    let previous: BTreeSet<MemberId> = pm.roster.iter().copied().collect();
                    let sum_new = b
                        .msg
                        .roster
                        .iter()
                        .filter(|id| !previous.contains(id))
                        .filter_map(|id| oracle.pairs.get(id))
                        .fold(group.scalar_zero(), |acc, pair| {
                            group.scalar_add(&acc, &pair.r)
                        });
                    let folded = group.mul(k, &group.exp(&pm.r, &sum_new));
                    Some(group.exp(&folded, &oracle.fresh_pair.r))
                }
                _ => None,
            },
        };
        match recomputed {
            Some(k) if k == oracle.expected_key => {}
            Some(_) => failures.push(format!(
                "epoch {epoch}: key recomputed from raw scalars disagrees with the oracle"
            )),
            None => failures.push(format!(
                "epoch {epoch}: no predecessor to recompute the key from"
            )),
        }
        prev_key = Some(oracle.expected_key.clone());
        prev_msg = Some(b.msg);
    }
    CheckResult {
        name: "key_recomputation",
        failures,
    }
}

fn recovery_agreement_check(broadcasts: &[Broadcast<'_>]) -> CheckResult {
    let mut failures = Vec::new();
    for b in broadcasts {
        for (id, derived) in &b.oracle.derived {
            if *derived != b.oracle.expected_key {
                failures.push(format!(
                    "epoch {} member {id}: derived key disagrees with the epoch key",
                    b.msg.epoch
                ));
            }
        }
    }
    CheckResult {
        name: "recovery_agreement",
        failures,
    }
}

fn slot_identity_check(broadcasts: &[Broadcast<'_>], group: &GroupParams) -> CheckResult {
    let items: Vec<&Broadcast<'_>> = broadcasts.iter().collect();
    let per_broadcast = par::map_vec(items, |b| {
        let mut failures = Vec::new();
        for (id, pair) in &b.oracle.pairs {
            match recover_slot(group, b.msg, *id, &pair.r, &pair.x) {
                Ok(k) if k == b.oracle.expected_key => {}
                _ => failures.push(format!(
                    "epoch {} member {id}: slot identity violated",
                    b.msg.epoch
                )),
            }
        }
        failures
    });
    CheckResult {
        name: "slot_identity",
        failures: per_broadcast.into_iter().flatten().collect(),
    }
}

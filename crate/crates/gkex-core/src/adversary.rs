//! Passive-adversary oracles.
//!
//! The single-key variant shares `K = g^{k_j * sum of other k}` and leaks
//! messages `D_i = g^{k_j * sum excluding i}`. Multiplying the `D_i` gives
//! `K^{n-2}`, and with the subgroup order public the adversary recovers `K`
//! outright by inverting `n - 2` mod `q`. The real protocols blind every
//! slot with the second key, so the same product computation lands away
//! from `K`; `attack_real_protocol` demonstrates the failure.

use crate::group::{Element, GroupParams, Scalar};
use crate::protocol::{KeyingMessage, MemberId};
use crate::sim::Transcript;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("single-key broadcast needs at least 3 members")]
    Degenerate,

    #[error("attack inapplicable: n - 2 is not invertible modulo q")]
    Inapplicable,

    #[error("controller {0} missing from the scalar assignment")]
    MissingController(MemberId),
}

/// The broadcast of the flawed one-key-per-member variant: one `D_i` per
/// non-controller member.
#[derive(Clone, Debug)]
pub struct SingleKeyBroadcast {
    pub controller: MemberId,
    pub messages: BTreeMap<MemberId, Element>,
    pub n: usize,
}

/// Runs the hypothetical single-key agreement and returns both the broadcast
/// an adversary would see and the true key (oracle side).
pub fn single_key_ika(
    group: &GroupParams,
    scalars: &BTreeMap<MemberId, Scalar>,
    controller: MemberId,
) -> Result<(SingleKeyBroadcast, Element), AdversaryError> {
    if scalars.len() < 3 {
        return Err(AdversaryError::Degenerate);
    }
    let k_c = scalars
        .get(&controller)
        .ok_or(AdversaryError::MissingController(controller))?;

    let sum_others = scalars
        .iter()
        .filter(|(&id, _)| id != controller)
        .fold(group.scalar_zero(), |acc, (_, k)| group.scalar_add(&acc, k));
    let key = group.pow_g(&group.scalar_mul(k_c, &sum_others));

    let messages: BTreeMap<MemberId, Element> = scalars
        .iter()
        .filter(|(&id, _)| id != controller)
        .map(|(&id, k_i)| {
            let partial_sum = group.scalar_add(&sum_others, &group.scalar_neg(k_i));
            (id, group.pow_g(&group.scalar_mul(k_c, &partial_sum)))
        })
        .collect();

    Ok((
        SingleKeyBroadcast {
            controller,
            messages,
            n: scalars.len(),
        },
        key,
    ))
}

/// The product recovery: `(prod of D_i)^{(n-2)^-1 mod q}`. Against a
/// genuine single-key broadcast this returns the true key.
pub fn product_attack(
    group: &GroupParams,
    broadcast: &SingleKeyBroadcast,
) -> Result<Element, AdversaryError> {
    if broadcast.n < 3 {
        return Err(AdversaryError::Degenerate);
    }
    let product = broadcast
        .messages
        .values()
        .fold(group.identity(), |acc, d| group.mul(&acc, d));
    unwind_exponent(group, &product, broadcast.n)
}

/// Applies the identical product computation to a real keying message,
/// excluding the controller slot. Callers assert the candidate differs from
/// the true key; the second key per member is what breaks the algebra.
pub fn attack_real_protocol(
    group: &GroupParams,
    msg: &KeyingMessage,
    controller: MemberId,
) -> Result<Element, AdversaryError> {
    let n = msg.roster.len();
    if n < 3 {
        return Err(AdversaryError::Degenerate);
    }
    let product = msg
        .slots
        .iter()
        .filter(|(&id, _)| id != controller)
        .fold(group.identity(), |acc, (_, y)| group.mul(&acc, y));
    unwind_exponent(group, &product, n)
}

fn unwind_exponent(
    group: &GroupParams,
    product: &Element,
    n: usize,
) -> Result<Element, AdversaryError> {
    let exponent = group.scalar_from_u64((n - 2) as u64);
    let inverse = group
        .scalar_invert(&exponent)
        .map_err(|_| AdversaryError::Inapplicable)?;
    Ok(group.exp(product, &inverse))
}

/// Everything a passive adversary sees: the transcript with every oracle
/// section dropped. Published keys, partials, petitions and broadcasts stay;
/// private scalars and derived keys never appear.
pub fn capture_view(transcript: &Transcript) -> Transcript {
    let mut view = transcript.clone();
    for record in &mut view.records {
        record.oracle = None;
    }
    view
}

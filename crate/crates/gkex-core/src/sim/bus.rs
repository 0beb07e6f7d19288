//! Deterministic in-memory message fabric.
//!
//! Delivery is synchronous and loss-free. Within a round, unicasts go first
//! in ascending sender id, then broadcasts; a broadcast reaches every live
//! member in ascending id. Ordering depends only on ids, never on insertion
//! order.

use crate::protocol::MemberId;
use crate::sim::transcript::Payload;
use crate::sim::SimError;
use std::collections::BTreeSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Destination {
    Unicast(MemberId),
    Broadcast,
}

/// A message handed to the bus.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub sender: MemberId,
    pub dest: Destination,
    pub payload: Payload,
}

/// One message arriving at one member.
#[derive(Clone, Debug)]
pub struct Delivery {
    pub sender: MemberId,
    pub receiver: MemberId,
    pub payload: Payload,
}

/// Tracks which members are reachable. Evicted members leave the bus and can
/// no longer be addressed.
#[derive(Clone, Debug, Default)]
pub struct Bus {
    live: BTreeSet<MemberId>,
}

impl Bus {
    pub fn new() -> Bus {
        Bus::default()
    }

    pub fn register(&mut self, id: MemberId) -> bool {
        self.live.insert(id)
    }

    pub fn remove(&mut self, id: MemberId) -> bool {
        self.live.remove(&id)
    }

    pub fn is_live(&self, id: MemberId) -> bool {
        self.live.contains(&id)
    }

    pub fn live_members(&self) -> impl Iterator<Item = MemberId> + '_ {
        self.live.iter().copied()
    }

    /// Routes a single message. Unknown senders or receivers are routing
    /// errors; a broadcast fans out to every live member in id order.
    pub fn deliver(&self, envelope: &Envelope) -> Result<Vec<Delivery>, SimError> {
        if !self.is_live(envelope.sender) {
            return Err(SimError::Routing(format!(
                "sender {} is not on the bus",
                envelope.sender
            )));
        }
        match envelope.dest {
            Destination::Unicast(receiver) => {
                if !self.is_live(receiver) {
                    return Err(SimError::Routing(format!(
                        "unknown receiver {receiver}"
                    )));
                }
                Ok(vec![Delivery {
                    sender: envelope.sender,
                    receiver,
                    payload: envelope.payload.clone(),
                }])
            }
            Destination::Broadcast => Ok(self
                .live
                .iter()
                .map(|&receiver| Delivery {
                    sender: envelope.sender,
                    receiver,
                    payload: envelope.payload.clone(),
                })
                .collect()),
        }
    }

    /// Delivers a whole round: unicasts sorted by ascending sender id first,
    /// then broadcasts. The result is independent of insertion order.
    pub fn deliver_round(&self, mut round: Vec<Envelope>) -> Result<Vec<Delivery>, SimError> {
        round.sort_by_key(|e| (matches!(e.dest, Destination::Broadcast), e.sender));
        let mut out = Vec::new();
        for envelope in &round {
            out.extend(self.deliver(envelope)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GroupParams, Preset};

    fn partial_payload(v: u32) -> Payload {
        let group = GroupParams::from_preset(Preset::Tiny);
        Payload::Partial {
            partial: group.element_from(v.into()).unwrap(),
        }
    }

    fn bus_123() -> Bus {
        let mut bus = Bus::new();
        for id in 1..=3 {
            bus.register(MemberId(id));
        }
        bus
    }

    #[test]
    fn broadcast_fans_out_in_id_order() {
        let bus = bus_123();
        let deliveries = bus
            .deliver(&Envelope {
                sender: MemberId(2),
                dest: Destination::Broadcast,
                payload: partial_payload(9),
            })
            .unwrap();
        let receivers: Vec<u32> = deliveries.iter().map(|d| d.receiver.0).collect();
        assert_eq!(receivers, vec![1, 2, 3]);
    }

    #[test]
    fn unicast_to_evicted_member_is_routing_error() {
        let mut bus = bus_123();
        bus.remove(MemberId(3));
        let err = bus
            .deliver(&Envelope {
                sender: MemberId(1),
                dest: Destination::Unicast(MemberId(3)),
                payload: partial_payload(9),
            })
            .unwrap_err();
        assert!(matches!(err, SimError::Routing(_)));
    }

    #[test]
    fn round_order_ignores_insertion_order() {
        let bus = bus_123();
        let envelopes = |order: &[u32]| -> Vec<Envelope> {
            let mut v: Vec<Envelope> = order
                .iter()
                .map(|&s| Envelope {
                    sender: MemberId(s),
                    dest: Destination::Unicast(MemberId(1)),
                    payload: partial_payload(9),
                })
                .collect();
            v.push(Envelope {
                sender: MemberId(1),
                dest: Destination::Broadcast,
                payload: partial_payload(12),
            });
            v
        };
        let a = bus.deliver_round(envelopes(&[3, 2])).unwrap();
        let b = bus.deliver_round(envelopes(&[2, 3])).unwrap();
        let order_a: Vec<(u32, u32)> = a.iter().map(|d| (d.sender.0, d.receiver.0)).collect();
        let order_b: Vec<(u32, u32)> = b.iter().map(|d| (d.sender.0, d.receiver.0)).collect();
        assert_eq!(order_a, order_b);
        assert_eq!(order_a[0], (2, 1));
        assert_eq!(order_a[1], (3, 1));
        // the broadcast trails the unicasts
        assert_eq!(order_a[2..], [(1, 1), (1, 2), (1, 3)]);
    }
}

//! Transcript records and their JSON Lines wire form.
//!
//! One record per protocol message, in delivery order. The `oracle` key on
//! broadcast records carries the omniscient view (private pairs, expected
//! and per-member derived keys); dropping that key from every record yields
//! exactly the passive adversary's view.

use crate::group::{Element, Scalar};
use crate::protocol::{JoinPetition, KeyingMessage, MemberId};
use crate::sim::SimError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Publish,
    Unicast,
    Broadcast,
}

/// `"ALL"` for broadcasts and publications, otherwise the member id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Receiver {
    All,
    Member(MemberId),
}

impl Serialize for Receiver {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            Receiver::All => ser.serialize_str("ALL"),
            Receiver::Member(id) => ser.serialize_u32(id.0),
        }
    }
}

impl<'de> Deserialize<'de> for Receiver {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Receiver;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("\"ALL\" or a member id")
            }

            fn visit_str<E: serde::de::Error>(self, s: &str) -> Result<Receiver, E> {
                if s == "ALL" {
                    Ok(Receiver::All)
                } else {
                    Err(E::custom(format!("unexpected receiver {s:?}")))
                }
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Receiver, E> {
                u32::try_from(v)
                    .map(|id| Receiver::Member(MemberId(id)))
                    .map_err(|_| E::custom("member id out of range"))
            }
        }
        de.deserialize_any(V)
    }
}

/// The message body of a record. Field sets are disjoint, so the untagged
/// representation round-trips unambiguously.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    /// An epoch broadcast (Protocols 1-4).
    Keying(KeyingMessage),
    /// A joiner's blinded pair, unicast to the collector.
    Petition(JoinPetition),
    /// Round-1 publication of a member's public keys (`pub_x` only on
    /// S-bearing chains).
    PublishedKeys {
        pub_r: Element,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        pub_x: Option<Element>,
    },
    /// Round-2 partial (plain or blinded), unicast to the controller.
    Partial { partial: Element },
    /// The (R_t, S_t) publication that opens a join round.
    PublicValues {
        #[serde(rename = "R")]
        r: Element,
        #[serde(rename = "S", skip_serializing_if = "Option::is_none", default)]
        s: Option<Element>,
    },
}

/// A member's private pair as the oracle saw it, with pinning marks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OraclePair {
    pub r: Scalar,
    pub x: Scalar,
    #[serde(default)]
    pub pinned_r: bool,
    #[serde(default)]
    pub pinned_x: bool,
}

/// Omniscient data attached to each broadcast record: the acting
/// controller, the pair it consumed and the fresh one it rotated onto, every
/// roster member's effective recovery pair for this epoch, the expected key,
/// and the key each member actually derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub controller: MemberId,
    pub consumed_pair: OraclePair,
    pub fresh_pair: OraclePair,
    pub pairs: BTreeMap<MemberId, OraclePair>,
    pub expected_key: Element,
    pub derived: BTreeMap<MemberId, Element>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub seq: u64,
    pub epoch: u64,
    pub direction: Direction,
    pub sender: MemberId,
    pub receiver: Receiver,
    pub payload: Payload,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle: Option<OracleRecord>,
}

/// Ordered record of a whole scenario run.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Transcript {
    pub records: Vec<TranscriptRecord>,
}

impl Transcript {
    /// One JSON object per line, in record order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    /// Parses a JSONL transcript, reporting the 1-based line of any defect.
    pub fn from_jsonl(input: &str) -> Result<Transcript, SimError> {
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: TranscriptRecord =
                serde_json::from_str(line).map_err(|e| SimError::TranscriptParse {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            records.push(record);
        }
        Ok(Transcript { records })
    }

    /// The keying broadcasts in order, paired with their records.
    pub fn broadcasts(&self) -> Vec<(&TranscriptRecord, &KeyingMessage)> {
        self.records
            .iter()
            .filter_map(|rec| match &rec.payload {
                Payload::Keying(msg) => Some((rec, msg)),
                _ => None,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GroupParams, Preset};

    #[test]
    fn receiver_wire_forms() {
        assert_eq!(serde_json::to_string(&Receiver::All).unwrap(), "\"ALL\"");
        assert_eq!(
            serde_json::to_string(&Receiver::Member(MemberId(3))).unwrap(),
            "3"
        );
        let r: Receiver = serde_json::from_str("\"ALL\"").unwrap();
        assert_eq!(r, Receiver::All);
        let r: Receiver = serde_json::from_str("7").unwrap();
        assert_eq!(r, Receiver::Member(MemberId(7)));
        assert!(serde_json::from_str::<Receiver>("\"SOME\"").is_err());
    }

    #[test]
    fn payload_variants_round_trip() {
        let group = GroupParams::from_preset(Preset::Tiny);
        let e = |v: u32| group.element_from(v.into()).unwrap();

        let cases = vec![
            Payload::PublishedKeys {
                pub_r: e(12),
                pub_x: Some(e(8)),
            },
            Payload::PublishedKeys {
                pub_r: e(12),
                pub_x: None,
            },
            Payload::Partial { partial: e(9) },
            Payload::PublicValues {
                r: e(9),
                s: Some(e(4)),
            },
            Payload::PublicValues { r: e(9), s: None },
            Payload::Petition(JoinPetition {
                joiner: MemberId(4),
                blinded_r: e(16),
                blinded_x: e(16),
            }),
        ];
        for payload in cases {
            let json = serde_json::to_string(&payload).unwrap();
            let back: Payload = serde_json::from_str(&json).unwrap();
            assert_eq!(back, payload, "wire form {json}");
        }
    }

    #[test]
    fn jsonl_parse_reports_line_numbers() {
        let err = Transcript::from_jsonl("\n{not json}\n").unwrap_err();
        match err {
            SimError::TranscriptParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }
}

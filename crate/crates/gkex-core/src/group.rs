//! Prime-order cyclic group backend.
//!
//! The concrete group is the multiplicative subgroup of quadratic residues
//! modulo a safe prime `p = 2q + 1`, so the working subgroup has prime order
//! `q`. Private exponents live in the scalar field `Z_q`, public values in the
//! subgroup of `Z_p^*`.
//!
//! All arithmetic uses plain big-integer operations. Nothing here is
//! constant-time; this backend exists to exercise protocol logic, not to
//! protect real keys.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Rounds of Miller-Rabin used when validating group parameters.
const PRIMALITY_ROUNDS: u32 = 64;

/// Errors raised by group parameter validation and group arithmetic.
#[derive(Debug, Error)]
pub enum GroupError {
    #[error("modulus p is not prime")]
    CompositeModulus,

    #[error("subgroup order q is not prime")]
    CompositeOrder,

    #[error("q does not divide p - 1")]
    OrderDoesNotDivide,

    #[error("generator has wrong order (need g != 1 and g^q = 1 mod p)")]
    BadGenerator,

    #[error("value {0} is not a member of the order-q subgroup")]
    NotInSubgroup(BigUint),

    #[error("scalar 0 is not invertible mod q")]
    NonInvertibleScalar,

    #[error("malformed element encoding: {0}")]
    Encoding(String),

    #[error("unknown group preset {0:?}")]
    UnknownPreset(String),

    #[error("cannot parse integer field {field}: {value:?}")]
    IntParse { field: &'static str, value: String },
}

/// Exponent in `Z_q`, always kept reduced. Holds every private key.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Scalar(BigUint);

/// Residue in the order-`q` subgroup of `Z_p^*`. Holds every wire value.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Element(BigUint);

/// A validated prime-order group: safe-ish prime modulus `p`, prime subgroup
/// order `q` with `q | p - 1`, and a generator `g` of order exactly `q`.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupParams {
    p: BigUint,
    q: BigUint,
    g: Element,
}

/// Built-in parameter sets loadable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// p = 23, q = 11, g = 4. Small enough for exhaustive checks.
    Tiny,
    /// p = 2039, q = 1019, g = 4. Room for randomized suites.
    Medium,
    /// The 2048-bit MODP group of RFC 3526, section 3, with g = 2.
    /// p is a safe prime and 2 generates the prime-order residue subgroup.
    Modp2048,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Tiny, Preset::Medium, Preset::Modp2048];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Tiny => "tiny",
            Preset::Medium => "medium",
            Preset::Modp2048 => "modp2048",
        }
    }
}

impl FromStr for Preset {
    type Err = GroupError;

    fn from_str(s: &str) -> Result<Self, GroupError> {
        match s {
            "tiny" => Ok(Preset::Tiny),
            "medium" => Ok(Preset::Medium),
            "modp2048" => Ok(Preset::Modp2048),
            other => Err(GroupError::UnknownPreset(other.to_string())),
        }
    }
}

/// RFC 3526 section 3, 2048-bit MODP prime.
const MODP_2048_P_HEX: &str = "\
FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05\
98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB\
9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B\
E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718\
3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

impl GroupParams {
    /// Validates and assembles custom group parameters.
    ///
    /// Enforces: p and q probably prime (64 Miller-Rabin rounds each),
    /// q | p - 1, and g of order exactly q.
    pub fn new(p: BigUint, q: BigUint, g: BigUint) -> Result<GroupParams, GroupError> {
        if !is_probable_prime(&p) {
            return Err(GroupError::CompositeModulus);
        }
        if !is_probable_prime(&q) {
            return Err(GroupError::CompositeOrder);
        }
        if !((&p - 1u32) % &q).is_zero() {
            return Err(GroupError::OrderDoesNotDivide);
        }
        if g <= BigUint::one() || g >= p {
            return Err(GroupError::BadGenerator);
        }
        // q prime and g != 1, so g^q = 1 pins the order to exactly q.
        if !g.modpow(&q, &p).is_one() {
            return Err(GroupError::BadGenerator);
        }
        Ok(GroupParams {
            p,
            q,
            g: Element(g),
        })
    }

    /// Loads one of the built-in presets. Runs the same validation as
    /// [`GroupParams::new`]; the constants are known to pass.
    pub fn from_preset(preset: Preset) -> GroupParams {
        let (p, q, g) = match preset {
            Preset::Tiny => (BigUint::from(23u32), BigUint::from(11u32), 4u32.into()),
            Preset::Medium => (
                BigUint::from(2039u32),
                BigUint::from(1019u32),
                4u32.into(),
            ),
            Preset::Modp2048 => {
                let p = BigUint::parse_bytes(MODP_2048_P_HEX.as_bytes(), 16)
                    .expect("constant parses");
                let q = (&p - 1u32) >> 1;
                (p, q, BigUint::from(2u32))
            }
        };
        GroupParams::new(p, q, g).expect("preset parameters are valid")
    }

    /// Loads a group by preset name, or from explicit (p, q, g) values.
    pub fn load(spec: &GroupSpec) -> Result<GroupParams, GroupError> {
        match spec {
            GroupSpec::Preset(p) => Ok(GroupParams::from_preset(*p)),
            GroupSpec::Custom { p, q, g } => {
                GroupParams::new(p.clone(), q.clone(), g.clone())
            }
        }
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn generator(&self) -> &Element {
        &self.g
    }

    /// The neutral element of the subgroup.
    pub fn identity(&self) -> Element {
        Element(BigUint::one())
    }

    /// base^e mod p. Closed in the subgroup for subgroup bases.
    pub fn exp(&self, base: &Element, e: &Scalar) -> Element {
        Element(base.0.modpow(&e.0, &self.p))
    }

    /// g^e mod p.
    pub fn pow_g(&self, e: &Scalar) -> Element {
        self.exp(&self.g, e)
    }

    /// Modular product of two subgroup members.
    pub fn mul(&self, a: &Element, b: &Element) -> Element {
        Element(&a.0 * &b.0 % &self.p)
    }

    /// Multiplicative inverse, computed as a^(q-1) since a has order
    /// dividing the prime q.
    pub fn invert(&self, a: &Element) -> Element {
        Element(a.0.modpow(&(&self.q - 1u32), &self.p))
    }

    pub fn scalar_zero(&self) -> Scalar {
        Scalar(BigUint::zero())
    }

    pub fn scalar_one(&self) -> Scalar {
        Scalar(BigUint::one())
    }

    /// Reduces an arbitrary integer into `Z_q`.
    pub fn scalar_from(&self, v: BigUint) -> Scalar {
        Scalar(v % &self.q)
    }

    pub fn scalar_from_u64(&self, v: u64) -> Scalar {
        self.scalar_from(BigUint::from(v))
    }

    /// Parses a decimal or 0x-prefixed hex string into a scalar.
    pub fn scalar_from_str(&self, s: &str) -> Result<Scalar, GroupError> {
        parse_big(s)
            .map(|v| self.scalar_from(v))
            .ok_or_else(|| GroupError::IntParse {
                field: "scalar",
                value: s.to_string(),
            })
    }

    pub fn scalar_add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &b.0) % &self.q)
    }

    pub fn scalar_neg(&self, a: &Scalar) -> Scalar {
        if a.0.is_zero() {
            Scalar(BigUint::zero())
        } else {
            Scalar(&self.q - &a.0)
        }
    }

    pub fn scalar_mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar(&a.0 * &b.0 % &self.q)
    }

    /// Multiplicative inverse mod the prime q, via Fermat: a^(q-2).
    pub fn scalar_invert(&self, a: &Scalar) -> Result<Scalar, GroupError> {
        if a.0.is_zero() {
            return Err(GroupError::NonInvertibleScalar);
        }
        Ok(Scalar(a.0.modpow(&(&self.q - 2u32), &self.q)))
    }

    /// Uniform scalar in [1, q-1]. Zero is deliberately excluded; degenerate
    /// zero keys exist only through explicit construction.
    pub fn sample_scalar<R: RngCore>(&self, rng: &mut R) -> Scalar {
        let below = &self.q - 1u32;
        Scalar(rng.gen_biguint_below(&below) + 1u32)
    }

    /// Checks membership in the order-q subgroup: 1 <= v < p and v^q = 1.
    pub fn is_member(&self, v: &BigUint) -> bool {
        !v.is_zero() && v < &self.p && v.modpow(&self.q, &self.p).is_one()
    }

    /// Admits an integer as a subgroup element, or errors.
    pub fn element_from(&self, v: BigUint) -> Result<Element, GroupError> {
        if self.is_member(&v) {
            Ok(Element(v))
        } else {
            Err(GroupError::NotInSubgroup(v))
        }
    }

    /// Decodes the canonical byte form and validates subgroup membership.
    pub fn decode_element(&self, bytes: &[u8]) -> Result<Element, GroupError> {
        let raw = Element::from_bytes(bytes)?;
        self.element_from(raw.0)
    }

    /// Re-validates an element that arrived through a structural path
    /// (deserialization) rather than through [`GroupParams::decode_element`].
    pub fn check_element(&self, e: &Element) -> Result<(), GroupError> {
        if self.is_member(&e.0) {
            Ok(())
        } else {
            Err(GroupError::NotInSubgroup(e.0.clone()))
        }
    }
}

impl fmt::Debug for GroupParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupParams")
            .field("p", &self.p)
            .field("q", &self.q)
            .field("g", &self.g.0)
            .finish()
    }
}

/// A group source: either a named preset or explicit custom values.
#[derive(Clone, Debug)]
pub enum GroupSpec {
    Preset(Preset),
    Custom { p: BigUint, q: BigUint, g: BigUint },
}

/// Parses a decimal or 0x-prefixed hex big integer.
pub fn parse_big(s: &str) -> Option<BigUint> {
    let s = s.trim();
    if let Some(hexpart) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        BigUint::parse_bytes(hexpart.as_bytes(), 16)
    } else {
        BigUint::parse_bytes(s.as_bytes(), 10)
    }
}

impl Scalar {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Structural constructor for deserialized values; the caller is
    /// responsible for the range invariant (verify paths re-check).
    pub fn from_raw(v: BigUint) -> Scalar {
        Scalar(v)
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", self.0)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

// Scalars cross the wire only inside transcript oracle sections, as decimal
// strings.
impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        parse_big(&s)
            .map(Scalar)
            .ok_or_else(|| serde::de::Error::custom(format!("bad scalar {s:?}")))
    }
}

impl Element {
    /// Canonical encoding: 4-byte big-endian length prefix, then the
    /// minimal-length big-endian magnitude.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mag = self.0.to_bytes_be();
        let mut out = Vec::with_capacity(4 + mag.len());
        out.extend_from_slice(&(mag.len() as u32).to_be_bytes());
        out.extend_from_slice(&mag);
        out
    }

    /// Lowercase hex of the canonical encoding; the transcript wire form.
    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    /// Structural decode of the canonical form: checks the length prefix,
    /// minimality and non-zero value, but not subgroup membership.
    pub fn from_bytes(bytes: &[u8]) -> Result<Element, GroupError> {
        if bytes.len() < 4 {
            return Err(GroupError::Encoding("shorter than length prefix".into()));
        }
        let len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
        let mag = &bytes[4..];
        if mag.len() != len {
            return Err(GroupError::Encoding(format!(
                "length prefix {len} does not match {} magnitude bytes",
                mag.len()
            )));
        }
        if len == 0 || mag[0] == 0 {
            return Err(GroupError::Encoding("magnitude not minimal".into()));
        }
        Ok(Element(BigUint::from_bytes_be(mag)))
    }

    pub fn from_hex(s: &str) -> Result<Element, GroupError> {
        let bytes = hex::decode(s).map_err(|e| GroupError::Encoding(e.to_string()))?;
        Element::from_bytes(&bytes)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    /// Structural constructor; membership is the caller's problem.
    pub fn from_raw(v: BigUint) -> Element {
        Element(v)
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Element({})", self.0)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Element {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Element {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        Element::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Miller-Rabin with [`PRIMALITY_ROUNDS`] random bases. Base selection is
/// seeded from a fixed constant, so validation is reproducible.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    let three = BigUint::from(3u32);
    if *n < two {
        return false;
    }
    if *n == two || *n == three {
        return true;
    }
    if n.is_even() {
        return false;
    }

    // n - 1 = 2^s * d with d odd
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;

    let mut rng = ChaCha20Rng::seed_from_u64(0x6d72_7072696d65); // "mr prime"
    let span = n - 3u32; // bases drawn from [2, n-2]
    'rounds: for _ in 0..PRIMALITY_ROUNDS {
        let a = rng.gen_biguint_below(&span) + 2u32;
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 0..s.saturating_sub(1) {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'rounds;
            }
        }
        return false;
    }
    true
}

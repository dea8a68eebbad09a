//! Additively homomorphic EC-ElGamal over the binary curves.
//!
//! A ciphertext is a point pair (R, S) = (Σ r_u·B, M + Σ r_u·pk_u) over all
//! key layers u it carries. Adding ciphertexts adds plaintexts; layers can
//! be stacked (`add_layer`) and peeled (`ct_sub`) without ever decrypting,
//! which is what lets an intersecting node code packets it cannot read.
//!
//! The paper's "+" cancels terms by re-adding them (XOR); the group version
//! here cancels with explicit point negation in [`ct_sub`].
//!
//! `encrypt_det` derives the randomness from a per-flow secret with
//! HMAC-SHA-256, so equal plaintexts under equal keys produce byte-equal
//! ciphertexts — the property the secure coding-condition comparison needs.

use hmac::{Hmac, KeyInit, Mac};
use num_bigint::BigUint;
use rand::RngCore;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::group::{GroupError, GroupParams, Point, Scalar};

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HeError {
    #[error("encryption randomness must be nonzero")]
    ZeroRandomness,
    #[error("not a single-key ciphertext; strip layers first")]
    NotSingleLayer,
    #[error("subtrahend layers are not contained in the minuend layers")]
    LayerMismatch,
    #[error("message point is not on the curve")]
    BadMessage,
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Opaque 4-byte key identifier carried on the wire: a SHA-256 fingerprint
/// of the public-key point, so ciphertext layer lists never expose node
/// ids in the clear.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct KeyId(pub u32);

impl KeyId {
    pub fn of(point: &Point) -> KeyId {
        let digest = Sha256::digest(point.to_bytes());
        KeyId(u32::from_be_bytes(digest[..4].try_into().unwrap()))
    }
}

/// Public half of an encryption key with its wire identifier.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PublicKey {
    pub id: KeyId,
    pub point: Point,
}

#[derive(Clone, Debug)]
pub struct KeyPair {
    pub sk: Scalar,
    pub pk: PublicKey,
}

/// 32-byte secret shared by the two endpoints of a flow, keying the
/// deterministic-randomness derivation.
#[derive(Clone, PartialEq, Eq)]
pub struct FlowKey([u8; 32]);

impl FlowKey {
    pub fn new(bytes: [u8; 32]) -> Self {
        FlowKey(bytes)
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        FlowKey(bytes)
    }
}

impl std::fmt::Debug for FlowKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FlowKey(..)")
    }
}

/// ElGamal ciphertext (R, S) with its ordered key-layer identifiers.
///
/// Layers are kept sorted so equal layer multisets always serialize
/// identically regardless of construction order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Ciphertext {
    pub r: Point,
    pub s: Point,
    pub layers: Vec<KeyId>,
}

impl Ciphertext {
    /// The all-identity difference ciphertext; what `ct_sub` of two equal
    /// ciphertexts leaves behind.
    pub fn is_zero(&self) -> bool {
        self.r.is_identity() && self.s.is_identity()
    }

    /// Wire form: [R][S][1-byte layer count][4-byte BE key ids].
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.r.to_bytes();
        out.extend_from_slice(&self.s.to_bytes());
        out.push(self.layers.len() as u8);
        for id in &self.layers {
            out.extend_from_slice(&id.0.to_be_bytes());
        }
        out
    }

    /// Parses one ciphertext from the front of `bytes`; returns it plus the
    /// number of bytes consumed.
    pub fn read_from(params: &GroupParams, bytes: &[u8]) -> Result<(Self, usize), HeError> {
        let mut pos = 0usize;
        let read_point = |pos: &mut usize| -> Result<Point, HeError> {
            let first = *bytes.get(*pos).ok_or_else(|| {
                HeError::Group(GroupError::BadEncoding("truncated point".into()))
            })?;
            let len = match first {
                0x00 => 1,
                0x04 => params.point_len(),
                _ => {
                    return Err(HeError::Group(GroupError::BadEncoding(
                        "bad point tag".into(),
                    )))
                }
            };
            if bytes.len() < *pos + len {
                return Err(HeError::Group(GroupError::BadEncoding(
                    "truncated point".into(),
                )));
            }
            let p = params.point_from_bytes(&bytes[*pos..*pos + len])?;
            *pos += len;
            Ok(p)
        };
        let r = read_point(&mut pos)?;
        let s = read_point(&mut pos)?;
        let count = *bytes.get(pos).ok_or_else(|| {
            HeError::Group(GroupError::BadEncoding("truncated layer count".into()))
        })? as usize;
        pos += 1;
        if bytes.len() < pos + 4 * count {
            return Err(HeError::Group(GroupError::BadEncoding(
                "truncated layer ids".into(),
            )));
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let id = u32::from_be_bytes(bytes[pos..pos + 4].try_into().unwrap());
            layers.push(KeyId(id));
            pos += 4;
        }
        Ok((Ciphertext { r, s, layers }, pos))
    }
}

fn sorted_push(mut layers: Vec<KeyId>, id: KeyId) -> Vec<KeyId> {
    layers.push(id);
    layers.sort();
    layers
}

/// Draws a key pair: sk uniform in [1, n), pk = sk·B.
pub fn keygen<R: RngCore + ?Sized>(params: &GroupParams, rng: &mut R) -> KeyPair {
    let sk = Scalar::random_nonzero(&params.n, rng);
    let point = params.base_mul(&sk);
    let id = KeyId::of(&point);
    KeyPair {
        sk,
        pk: PublicKey { id, point },
    }
}

/// Enc_pk(M; r) = (r·B, M + r·pk). Zero randomness would ship M in the
/// clear, so it is rejected.
pub fn encrypt(
    params: &GroupParams,
    pk: &PublicKey,
    msg: &Point,
    r: &Scalar,
) -> Result<Ciphertext, HeError> {
    if r.is_zero() {
        return Err(HeError::ZeroRandomness);
    }
    if !params.on_curve(msg) {
        return Err(HeError::BadMessage);
    }
    let rb = params.base_mul(r);
    let mask = params.scalar_mul_unchecked(r.value(), &pk.point);
    let s = params.add_unchecked(msg, &mask);
    Ok(Ciphertext {
        r: rb,
        s,
        layers: vec![pk.id],
    })
}

/// Dec_sk(R, S) = S − sk·R. The ciphertext must carry a single layer — or
/// several layers all under the same key, as a homomorphic sum does.
/// Whether that layer actually matches `kp` is the caller's bargain: a
/// mismatched key decrypts to garbage, exactly like the real protocol.
pub fn decrypt(params: &GroupParams, kp: &KeyPair, ct: &Ciphertext) -> Result<Point, HeError> {
    match ct.layers.as_slice() {
        [] => return Err(HeError::NotSingleLayer),
        [_] => {}
        many => {
            if !many.iter().all(|id| *id == kp.pk.id) {
                return Err(HeError::NotSingleLayer);
            }
        }
    }
    let shared = params.scalar_mul_unchecked(kp.sk.value(), &ct.r);
    Ok(params.add_unchecked(&ct.s, &params.negate(&shared)))
}

/// Componentwise sum; layer multiset union.
pub fn ct_add(params: &GroupParams, c1: &Ciphertext, c2: &Ciphertext) -> Result<Ciphertext, HeError> {
    let r = params.point_add(&c1.r, &c2.r)?;
    let s = params.point_add(&c1.s, &c2.s)?;
    let mut layers = c1.layers.clone();
    layers.extend_from_slice(&c2.layers);
    layers.sort();
    Ok(Ciphertext { r, s, layers })
}

/// Componentwise difference; removes `c2`'s contribution from `c1`.
/// `c2`'s layers must be a sub-multiset of `c1`'s.
pub fn ct_sub(params: &GroupParams, c1: &Ciphertext, c2: &Ciphertext) -> Result<Ciphertext, HeError> {
    let mut layers = c1.layers.clone();
    for id in &c2.layers {
        match layers.iter().position(|l| l == id) {
            Some(i) => {
                layers.remove(i);
            }
            None => return Err(HeError::LayerMismatch),
        }
    }
    let r = params.point_add(&c1.r, &params.negate(&c2.r))?;
    let s = params.point_add(&c1.s, &params.negate(&c2.s))?;
    Ok(Ciphertext { r, s, layers })
}

/// Stacks one more encryption layer: (R + r2·B, S + r2·pk2).
pub fn add_layer(
    params: &GroupParams,
    ct: &Ciphertext,
    pk: &PublicKey,
    r: &Scalar,
) -> Result<Ciphertext, HeError> {
    if r.is_zero() {
        return Err(HeError::ZeroRandomness);
    }
    let rb = params.base_mul(r);
    let mask = params.scalar_mul_unchecked(r.value(), &pk.point);
    Ok(Ciphertext {
        r: params.point_add(&ct.r, &rb)?,
        s: params.point_add(&ct.s, &mask)?,
        layers: sorted_push(ct.layers.clone(), pk.id),
    })
}

/// Deterministic layer randomness: HMAC-SHA-256(flow key, M || pk) expanded
/// and reduced mod n, re-derived on the measure-zero zero result.
pub fn derive_randomness(
    params: &GroupParams,
    fk: &FlowKey,
    msg: &Point,
    pk: &PublicKey,
) -> Scalar {
    let msg_bytes = msg.to_bytes();
    let pk_bytes = pk.point.to_bytes();
    let blocks = (params.n.bits() as usize + 64 + 255) / 256;
    for attempt in 0u8..=255 {
        let mut out = Vec::with_capacity(blocks * 32);
        for block in 0..blocks as u8 {
            let mut mac =
                HmacSha256::new_from_slice(&fk.0).expect("hmac accepts any key length");
            mac.update(&[attempt, block]);
            mac.update(&msg_bytes);
            mac.update(&pk_bytes);
            out.extend_from_slice(&mac.finalize().into_bytes());
        }
        let r = Scalar::from_biguint(BigUint::from_bytes_be(&out), &params.n);
        if !r.is_zero() {
            return r;
        }
    }
    unreachable!("256 successive zero PRF outputs")
}

/// Deterministic encryption: same (flow key, message, public key) always
/// yields the identical ciphertext bytes.
pub fn encrypt_det(
    params: &GroupParams,
    pk: &PublicKey,
    msg: &Point,
    fk: &FlowKey,
) -> Result<Ciphertext, HeError> {
    let r = derive_randomness(params, fk, msg, pk);
    encrypt(params, pk, msg, &r)
}

/// Canonical two-layer deterministic encryption under both endpoints'
/// keys. Each layer's randomness depends only on (flow key, message, that
/// key), so either endpoint reconstructs bit-identical bytes.
pub fn twice_encrypt_det(
    params: &GroupParams,
    pk1: &PublicKey,
    pk2: &PublicKey,
    msg: &Point,
    fk: &FlowKey,
) -> Result<Ciphertext, HeError> {
    let first = encrypt_det(params, pk1, msg, fk)?;
    let r2 = derive_randomness(params, fk, msg, pk2);
    add_layer(params, &first, pk2, &r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::toy_params;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn setup() -> (GroupParams, StdRng) {
        (toy_params(), StdRng::seed_from_u64(99))
    }

    #[test]
    fn keygen_pk_matches_sk() {
        let (g, mut rng) = setup();
        for i in 0..10 {
            let kp = keygen(&g, &mut rng);
            assert_eq!(kp.pk.point, g.base_mul(&kp.sk));
        }
    }

    #[test]
    fn keygen_no_collisions() {
        let (g, mut rng) = setup();
        let mut seen = std::collections::HashSet::new();
        for i in 0..100 {
            let kp = keygen(&g, &mut rng);
            assert!(seen.insert(kp.sk.value().clone()));
        }
    }

    #[test]
    fn encrypt_decrypt_roundtrip() {
        let (g, mut rng) = setup();
        let kp = keygen(&g, &mut rng);
        for _ in 0..50 {
            let m = g.random_point(&mut rng);
            let r = Scalar::random_nonzero(&g.n, &mut rng);
            let ct = encrypt(&g, &kp.pk, &m, &r).unwrap();
            assert_eq!(decrypt(&g, &kp, &ct).unwrap(), m);
        }
    }

    #[test]
    fn identity_message_roundtrips() {
        let (g, mut rng) = setup();
        let kp = keygen(&g, &mut rng);
        let r = Scalar::random_nonzero(&g.n, &mut rng);
        let ct = encrypt(&g, &kp.pk, &Point::Identity, &r).unwrap();
        assert_eq!(decrypt(&g, &kp, &ct).unwrap(), Point::Identity);
    }

    #[test]
    fn zero_randomness_rejected() {
        let (g, mut rng) = setup();
        let kp = keygen(&g, &mut rng);
        let zero = Scalar::from_u64(0, &g.n);
        assert_eq!(
            encrypt(&g, &kp.pk, &g.base, &zero),
            Err(HeError::ZeroRandomness)
        );
        let ct = encrypt(&g, &kp.pk, &g.base, &Scalar::from_u64(3, &g.n)).unwrap();
        assert_eq!(
            add_layer(&g, &ct, &kp.pk, &zero),
            Err(HeError::ZeroRandomness)
        );
    }

    #[test]
    fn masking_term_is_r_times_pk() {
        // S - M = r * pk
        let (g, mut rng) = setup();
        let kp = keygen(&g, &mut rng);
        for _ in 0..20 {
            let m = g.random_point(&mut rng);
            let r = Scalar::random_nonzero(&g.n, &mut rng);
            let ct = encrypt(&g, &kp.pk, &m, &r).unwrap();
            let s_minus_m = g.add_unchecked(&ct.s, &g.negate(&m));
            assert_eq!(s_minus_m, g.scalar_mul_unchecked(r.value(), &kp.pk.point));
            assert_eq!(ct.r, g.base_mul(&r));
        }
    }

    #[test]
    fn wrong_key_decrypts_to_garbage() {
        let (g, mut rng) = setup();
        let kp = keygen(&g, &mut rng);
        for _ in 0..100 {
            let other = keygen(&g, &mut rng);
            let m = g.random_point(&mut rng);
            let r = Scalar::random_nonzero(&g.n, &mut rng);
            let ct = encrypt(&g, &kp.pk, &m, &r).unwrap();
            assert_ne!(decrypt(&g, &other, &ct).unwrap(), m);
        }
    }

    #[test]
    fn homomorphic_addition_under_one_key() {
        let (g, mut rng) = setup();
        let kp = keygen(&g, &mut rng);
        for _ in 0..20 {
            let m1 = g.random_point(&mut rng);
            let m2 = g.random_point(&mut rng);
            let c1 = encrypt(&g, &kp.pk, &m1, &Scalar::random_nonzero(&g.n, &mut rng)).unwrap();
            let c2 = encrypt(&g, &kp.pk, &m2, &Scalar::random_nonzero(&g.n, &mut rng)).unwrap();
            let sum = ct_add(&g, &c1, &c2).unwrap();
            assert_eq!(
                decrypt(&g, &kp, &sum).unwrap(),
                g.add_unchecked(&m1, &m2)
            );
        }
    }

    #[test]
    fn adding_encrypted_identity_preserves_plaintext() {
        let (g, mut rng) = setup();
        let kp = keygen(&g, &mut rng);
        let m = g.random_point(&mut rng);
        let c = encrypt(&g, &kp.pk, &m, &Scalar::random_nonzero(&g.n, &mut rng)).unwrap();
        let zero_ct = encrypt(
            &g,
            &kp.pk,
            &Point::Identity,
            &Scalar::random_nonzero(&g.n, &mut rng),
        )
        .unwrap();
        let sum = ct_add(&g, &c, &zero_ct).unwrap();
        assert_eq!(decrypt(&g, &kp, &sum).unwrap(), m);
    }

    #[test]
    fn ct_add_commutative_associative_by_decryption() {
        let (g, mut rng) = setup();
        let kp = keygen(&g, &mut rng);
        // messages: small multiples of the base point
        let msgs: Vec<Point> = (1u64..=4)
            .map(|k| g.base_mul(&Scalar::from_u64(k, &g.n)))
            .collect();
        let cts: Vec<Ciphertext> = msgs
            .iter()
            .map(|m| encrypt(&g, &kp.pk, m, &Scalar::random_nonzero(&g.n, &mut rng)).unwrap())
            .collect();
        let ab = ct_add(&g, &cts[0], &cts[1]).unwrap();
        let ba = ct_add(&g, &cts[1], &cts[0]).unwrap();
        assert_eq!(decrypt(&g, &kp, &ab).unwrap(), decrypt(&g, &kp, &ba).unwrap());
        let abc1 = ct_add(&g, &ab, &cts[2]).unwrap();
        let abc2 = ct_add(&g, &cts[0], &ct_add(&g, &cts[1], &cts[2]).unwrap()).unwrap();
        assert_eq!(
            decrypt(&g, &kp, &abc1).unwrap(),
            decrypt(&g, &kp, &abc2).unwrap()
        );
    }

    #[test]
    fn ct_sub_of_self_is_zero_ciphertext() {
        let (g, mut rng) = setup();
        let kp = keygen(&g, &mut rng);
        let c = encrypt(
            &g,
            &kp.pk,
            &g.random_point(&mut rng),
            &Scalar::random_nonzero(&g.n, &mut rng),
        )
        .unwrap();
        let d = ct_sub(&g, &c, &c).unwrap();
        assert!(d.is_zero());
        assert!(d.layers.is_empty());
    }

    #[test]
    fn ct_sub_layer_mismatch_rejected() {
        let (g, mut rng) = setup();
        let kp1 = keygen(&g, &mut rng);
        let kp2 = keygen(&g, &mut rng);
        let c1 = encrypt(
            &g,
            &kp1.pk,
            &g.random_point(&mut rng),
            &Scalar::random_nonzero(&g.n, &mut rng),
        )
        .unwrap();
        let c2 = encrypt(
            &g,
            &kp2.pk,
            &g.random_point(&mut rng),
            &Scalar::random_nonzero(&g.n, &mut rng),
        )
        .unwrap();
        assert_eq!(ct_sub(&g, &c1, &c2).unwrap_err(), HeError::LayerMismatch);
    }

    #[test]
    fn example8_pipeline_recovers_exact_ciphertext() {
        // coded = Enc_Kj(P_ij) + Enc_Ki(P_ji); stripping N_j's own sent
        // ciphertext leaves Enc_Kj(P_ij) bit-for-bit, which decrypts to P_ij
        let (g, mut rng) = setup();
        let kp_i = keygen(&g, &mut rng);
        let kp_j = keygen(&g, &mut rng);
        let p_ij = g.random_point(&mut rng);
        let p_ji = g.random_point(&mut rng);
        let enc_for_j = encrypt(&g, &kp_j.pk, &p_ij, &Scalar::random_nonzero(&g.n, &mut rng)).unwrap();
        let enc_for_i = encrypt(&g, &kp_i.pk, &p_ji, &Scalar::random_nonzero(&g.n, &mut rng)).unwrap();
        let coded = ct_add(&g, &enc_for_j, &enc_for_i).unwrap();
        let residual = ct_sub(&g, &coded, &enc_for_i).unwrap();
        assert_eq!(residual, enc_for_j);
        assert_eq!(decrypt(&g, &kp_j, &residual).unwrap(), p_ij);
        // and symmetrically at N_i
        let residual_i = ct_sub(&g, &coded, &enc_for_j).unwrap();
        assert_eq!(decrypt(&g, &kp_i, &residual_i).unwrap(), p_ji);
    }

    #[test]
    fn three_packet_removal_any_order() {
        let (g, mut rng) = setup();
        let kps: Vec<KeyPair> = (0..3).map(|i| keygen(&g, &mut rng)).collect();
        let msgs: Vec<Point> = (0..3).map(|_| g.random_point(&mut rng)).collect();
        let cts: Vec<Ciphertext> = (0..3)
            .map(|i| {
                encrypt(
                    &g,
                    &kps[i].pk,
                    &msgs[i],
                    &Scalar::random_nonzero(&g.n, &mut rng),
                )
                .unwrap()
            })
            .collect();
        let coded = ct_add(&g, &ct_add(&g, &cts[0], &cts[1]).unwrap(), &cts[2]).unwrap();
        for (a, b, keep) in [(0, 1, 2), (1, 0, 2), (0, 2, 1), (2, 0, 1), (1, 2, 0), (2, 1, 0)] {
            let step = ct_sub(&g, &coded, &cts[a]).unwrap();
            let residual = ct_sub(&g, &step, &cts[b]).unwrap();
            assert_eq!(residual, cts[keep]);
            assert_eq!(decrypt(&g, &kps[keep], &residual).unwrap(), msgs[keep]);
        }
    }

    #[test]
    fn add_layer_mask_is_invertible() {
        let (g, mut rng) = setup();
        let kp1 = keygen(&g, &mut rng);
        let kp2 = keygen(&g, &mut rng);
        let c = encrypt(
            &g,
            &kp1.pk,
            &g.random_point(&mut rng),
            &Scalar::random_nonzero(&g.n, &mut rng),
        )
        .unwrap();
        let r2 = Scalar::random_nonzero(&g.n, &mut rng);
        let layered = add_layer(&g, &c, &kp2.pk, &r2).unwrap();
        // the layer's mask is exactly an encryption of the identity
        let mask = encrypt(&g, &kp2.pk, &Point::Identity, &r2).unwrap();
        assert_eq!(ct_sub(&g, &layered, &mask).unwrap(), c);
    }

    #[test]
    fn double_encryption_needs_both_keys() {
        let (g, mut rng) = setup();
        let kps: Vec<KeyPair> = (0..4).map(|i| keygen(&g, &mut rng)).collect();
        let m = g.random_point(&mut rng);
        let c = encrypt(&g, &kps[0].pk, &m, &Scalar::random_nonzero(&g.n, &mut rng)).unwrap();
        let cc = add_layer(&g, &c, &kps[1].pk, &Scalar::random_nonzero(&g.n, &mut rng)).unwrap();
        // decrypt refuses the two-layer ciphertext outright
        assert_eq!(decrypt(&g, &kps[0], &cc).unwrap_err(), HeError::NotSingleLayer);
        // and no raw single-key unmasking recovers M either
        for kp in &kps {
            let shared = g.scalar_mul_unchecked(kp.sk.value(), &cc.r);
            let candidate = g.add_unchecked(&cc.s, &g.negate(&shared));
            assert_ne!(candidate, m);
        }
    }

    #[test]
    fn add_layer_order_does_not_matter() {
        let (g, mut rng) = setup();
        let kp1 = keygen(&g, &mut rng);
        let kp2 = keygen(&g, &mut rng);
        let m = g.random_point(&mut rng);
        let (r1, r2) = (
            Scalar::random_nonzero(&g.n, &mut rng),
            Scalar::random_nonzero(&g.n, &mut rng),
        );
        let a = add_layer(&g, &encrypt(&g, &kp1.pk, &m, &r1).unwrap(), &kp2.pk, &r2).unwrap();
        let b = add_layer(&g, &encrypt(&g, &kp2.pk, &m, &r2).unwrap(), &kp1.pk, &r1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn encrypt_det_is_deterministic_and_injective() {
        let (g, mut rng) = setup();
        let kp = keygen(&g, &mut rng);
        let fk = FlowKey::random(&mut rng);
        let m = g.random_point(&mut rng);
        let c1 = encrypt_det(&g, &kp.pk, &m, &fk).unwrap();
        let c2 = encrypt_det(&g, &kp.pk, &m, &fk).unwrap();
        assert_eq!(c1.to_bytes(), c2.to_bytes());
        assert_eq!(decrypt(&g, &kp, &c1).unwrap(), m);

        let mut seen = std::collections::HashSet::new();
        for _ in 0..1000 {
            let m = g.random_point(&mut rng);
            let c = encrypt_det(&g, &kp.pk, &m, &fk).unwrap();
            seen.insert(c.to_bytes());
        }
        // distinct messages may rarely collide as random points, never as bytes
        assert!(seen.len() >= 990);
    }

    #[test]
    fn twice_encrypt_det_is_canonical_across_endpoints() {
        let (g, mut rng) = setup();
        let kp1 = keygen(&g, &mut rng);
        let kp2 = keygen(&g, &mut rng);
        let fk = FlowKey::random(&mut rng);
        let m = g.random_point(&mut rng);
        let a = twice_encrypt_det(&g, &kp1.pk, &kp2.pk, &m, &fk).unwrap();
        let b = twice_encrypt_det(&g, &kp2.pk, &kp1.pk, &m, &fk).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_eq!(a.layers.len(), 2);
        assert!(a.layers[0] <= a.layers[1]);
        // equal plaintexts difference out to the zero ciphertext
        assert!(ct_sub(&g, &a, &b).unwrap().is_zero());
    }

    #[test]
    fn randomized_encryptions_differ_as_bytes() {
        // needs a production-size order; the toy curve's 16-bit randomness
        // space would collide by birthday alone
        let g = crate::group::b163();
        let mut rng = StdRng::seed_from_u64(99);
        let kp = keygen(&g, &mut rng);
        let m = g.random_point(&mut rng);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..1000 {
            let c = encrypt(&g, &kp.pk, &m, &Scalar::random_nonzero(&g.n, &mut rng)).unwrap();
            assert!(seen.insert(c.to_bytes()), "randomness reuse");
        }
    }

    #[test]
    fn ciphertext_bytes_roundtrip() {
        let (g, mut rng) = setup();
        let kp1 = keygen(&g, &mut rng);
        let kp2 = keygen(&g, &mut rng);
        let c = add_layer(
            &g,
            &encrypt(
                &g,
                &kp1.pk,
                &g.random_point(&mut rng),
                &Scalar::random_nonzero(&g.n, &mut rng),
            )
            .unwrap(),
            &kp2.pk,
            &Scalar::random_nonzero(&g.n, &mut rng),
        )
        .unwrap();
        let bytes = c.to_bytes();
        let (back, used) = Ciphertext::read_from(&g, &bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(used, bytes.len());
    }

    #[test]
    fn structural_invariant_tracks_recorded_randomness() {
        // (R, S) = (Σ r_u·B, M + Σ r_u·pk_u) after arbitrary layering
        let (g, mut rng) = setup();
        let kps: Vec<KeyPair> = (0..3).map(|i| keygen(&g, &mut rng)).collect();
        let m = g.random_point(&mut rng);
        let rs: Vec<Scalar> = (0..3)
            .map(|_| Scalar::random_nonzero(&g.n, &mut rng))
            .collect();
        let mut ct = encrypt(&g, &kps[0].pk, &m, &rs[0]).unwrap();
        ct = add_layer(&g, &ct, &kps[1].pk, &rs[1]).unwrap();
        ct = add_layer(&g, &ct, &kps[2].pk, &rs[2]).unwrap();
        let mut r_expect = Point::Identity;
        let mut s_expect = m;
        for (kp, r) in kps.iter().zip(&rs) {
            r_expect = g.add_unchecked(&r_expect, &g.base_mul(r));
            s_expect = g.add_unchecked(
                &s_expect,
                &g.scalar_mul_unchecked(r.value(), &kp.pk.point),
            );
        }
        assert_eq!(ct.r, r_expect);
        assert_eq!(ct.s, s_expect);
        assert_eq!(ct.layers.len(), 3);
    }
}

//! ECDSA packet authentication: plain sign/verify over P-384 or P-521,
//! the per-field contact signature for SCOPE headers, and the per-chunk
//! source signature for encrypted payloads.
//!
//! Every header field and every payload chunk gets its own signature, and
//! verification walks the encode, report and ack sections in order,
//! failing on the first mismatch. Signatures always cover the serialized
//! ciphertext bytes of a field (plaintext bytes for the packet-id, which
//! stays unencrypted).

mod prime;

pub use prime::{p384, p521, PrimeCurve, PrimePoint};

use num_bigint::{BigUint, RandBigInt};
use num_traits::Zero;
use rand::RngCore;
use sha2::{Digest, Sha384, Sha512};

use crate::he::Ciphertext;
use crate::packet::ScopeHeader;

/// The two signature curves the bench sweeps over.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SigCurveId {
    P384,
    P521,
}

impl SigCurveId {
    pub fn curve(self) -> PrimeCurve {
        match self {
            SigCurveId::P384 => p384(),
            SigCurveId::P521 => p521(),
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            SigCurveId::P384 => 384,
            SigCurveId::P521 => 521,
        }
    }

    pub fn by_bits(bits: u32) -> Option<Self> {
        match bits {
            384 => Some(SigCurveId::P384),
            521 => Some(SigCurveId::P521),
            _ => None,
        }
    }

    /// SHA-384 for the 384-bit curve, SHA-512 for the 521-bit curve.
    fn hash_to_int(self, msg: &[u8]) -> BigUint {
        match self {
            SigCurveId::P384 => BigUint::from_bytes_be(&Sha384::digest(msg)),
            SigCurveId::P521 => BigUint::from_bytes_be(&Sha512::digest(msg)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SigKeyPair {
    pub curve: SigCurveId,
    pub sk: BigUint,
    pub pk: PrimePoint,
}

/// ECDSA signature pair, both nonzero mod the signature-curve order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Signature {
    pub r: BigUint,
    pub s: BigUint,
}

impl Signature {
    /// Fixed-width wire form: r then s, big-endian, each sized to the
    /// curve order.
    pub fn to_bytes(&self, curve: &PrimeCurve) -> Vec<u8> {
        let w = curve.scalar_len();
        let mut out = vec![0u8; 2 * w];
        let rb = self.r.to_bytes_be();
        let sb = self.s.to_bytes_be();
        out[w - rb.len()..w].copy_from_slice(&rb);
        out[2 * w - sb.len()..].copy_from_slice(&sb);
        out
    }

    pub fn from_bytes(curve: &PrimeCurve, bytes: &[u8]) -> Option<Self> {
        let w = curve.scalar_len();
        if bytes.len() != 2 * w {
            return None;
        }
        Some(Signature {
            r: BigUint::from_bytes_be(&bytes[..w]),
            s: BigUint::from_bytes_be(&bytes[w..]),
        })
    }
}

/// Draws a signing key pair on the chosen curve.
pub fn sig_keygen<R: RngCore + ?Sized>(curve: SigCurveId, rng: &mut R) -> SigKeyPair {
    let c = curve.curve();
    let sk = loop {
        let k = rng.gen_biguint_below(&c.n);
        if !k.is_zero() {
            break k;
        }
    };
    let pk = c.base_mul(&sk);
    SigKeyPair { curve, sk, pk }
}

/// Standard ECDSA signing with a fresh nonce per call; the degenerate
/// r = 0 / s = 0 draws are redrawn.
pub fn ecdsa_sign<R: RngCore + ?Sized>(kp: &SigKeyPair, msg: &[u8], rng: &mut R) -> Signature {
    let c = kp.curve.curve();
    let e = kp.curve.hash_to_int(msg);
    loop {
        let k = rng.gen_biguint_below(&c.n);
        if k.is_zero() {
            continue;
        }
        let point = c.base_mul(&k);
        let PrimePoint::Affine { x, .. } = point else {
            continue;
        };
        let r = x % &c.n;
        if r.is_zero() {
            continue;
        }
        let k_inv = c.inv_mod_n(&k).expect("k nonzero");
        let s = (k_inv * (&e + &r * &kp.sk)) % &c.n;
        if s.is_zero() {
            continue;
        }
        return Signature { r, s };
    }
}

/// True iff `sig` is a valid signature of `msg` under `pk`. Malformed
/// inputs (zero or oversized scalars, off-curve keys) report false.
pub fn ecdsa_verify(curve: SigCurveId, pk: &PrimePoint, msg: &[u8], sig: &Signature) -> bool {
    let c = curve.curve();
    if sig.r.is_zero() || sig.s.is_zero() || sig.r >= c.n || sig.s >= c.n {
        return false;
    }
    if pk.is_identity() || !c.on_curve(pk) {
        return false;
    }
    let e = curve.hash_to_int(msg);
    let Some(w) = c.inv_mod_n(&sig.s) else {
        return false;
    };
    let u1 = (&e * &w) % &c.n;
    let u2 = (&sig.r * &w) % &c.n;
    let point = c.double_scalar_mul(&u1, &u2, pk);
    match point {
        PrimePoint::Identity => false,
        PrimePoint::Affine { x, .. } => x % &c.n == sig.r,
    }
}

/// Contact signature: one signature per header field, in header order,
/// grouped by section.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SignScope {
    pub sign_encode: Vec<Signature>,
    pub sign_report: Vec<Signature>,
    pub sign_ack: Vec<Signature>,
}

/// Source signature: one signature per payload ciphertext chunk.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SignPayload {
    pub sigs: Vec<Signature>,
}

/// Signs every field of an encrypted header with the sender's key.
pub fn sign_header<R: RngCore + ?Sized>(
    kp: &SigKeyPair,
    header: &ScopeHeader,
    rng: &mut R,
) -> SignScope {
    let [encode, report, ack] = header.field_bytes();
    let sign_all = |fields: &[Vec<u8>], rng: &mut R| {
        fields
            .iter()
            .map(|f| ecdsa_sign(kp, f, rng))
            .collect::<Vec<_>>()
    };
    SignScope {
        sign_encode: sign_all(&encode, rng),
        sign_report: sign_all(&report, rng),
        sign_ack: sign_all(&ack, rng),
    }
}

/// Walks the three header sections in order, verifying each field's
/// signature under the sender's public key; false on the first failure
/// or on any count mismatch.
pub fn evaluate_contact(
    sig: &SignScope,
    header: &ScopeHeader,
    curve: SigCurveId,
    pk_sender: &PrimePoint,
) -> bool {
    let [encode, report, ack] = header.field_bytes();
    for (fields, sigs) in [
        (&encode, &sig.sign_encode),
        (&report, &sig.sign_report),
        (&ack, &sig.sign_ack),
    ] {
        if fields.len() != sigs.len() {
            return false;
        }
        for (field, s) in fields.iter().zip(sigs) {
            if !ecdsa_verify(curve, pk_sender, field, s) {
                return false;
            }
        }
    }
    true
}

/// Signs each encrypted payload chunk, in chunk order, with the source's
/// private key.
pub fn sign_payload<R: RngCore + ?Sized>(
    kp: &SigKeyPair,
    chunks: &[Ciphertext],
    rng: &mut R,
) -> SignPayload {
    SignPayload {
        sigs: chunks
            .iter()
            .map(|c| ecdsa_sign(kp, &c.to_bytes(), rng))
            .collect(),
    }
}

/// Verifies each chunk against its signature in order; false on the first
/// failure or a count mismatch.
pub fn evaluate_payload(
    sig: &SignPayload,
    chunks: &[Ciphertext],
    curve: SigCurveId,
    pk_source: &PrimePoint,
) -> bool {
    if sig.sigs.len() != chunks.len() {
        return false;
    }
    for (chunk, s) in chunks.iter().zip(&sig.sigs) {
        if !ecdsa_verify(curve, pk_source, &chunk.to_bytes(), s) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn sign_verify_roundtrip_both_curves() {
        let mut rng = StdRng::seed_from_u64(11);
        for curve in [SigCurveId::P384, SigCurveId::P521] {
            let kp = sig_keygen(curve, &mut rng);
            let msg = b"scope header field";
            let sig = ecdsa_sign(&kp, msg, &mut rng);
            assert!(ecdsa_verify(curve, &kp.pk, msg, &sig));
        }
    }

    #[test]
    fn wrong_key_and_tampered_message_fail() {
        let mut rng = StdRng::seed_from_u64(12);
        let curve = SigCurveId::P384;
        let kp = sig_keygen(curve, &mut rng);
        for trial in 0..20 {
            let msg: Vec<u8> = (0..32).map(|_| rng.gen()).collect();
            let sig = ecdsa_sign(&kp, &msg, &mut rng);
            let other = sig_keygen(curve, &mut rng);
            assert!(!ecdsa_verify(curve, &other.pk, &msg, &sig), "trial {trial}");
            let mut flipped = msg.clone();
            flipped[trial % 32] ^= 1;
            assert!(!ecdsa_verify(curve, &kp.pk, &flipped, &sig), "trial {trial}");
            let mut truncated = msg.clone();
            truncated.pop();
            assert!(!ecdsa_verify(curve, &kp.pk, &truncated, &sig));
        }
    }

    #[test]
    fn zero_scalars_are_invalid() {
        let mut rng = StdRng::seed_from_u64(13);
        let curve = SigCurveId::P384;
        let kp = sig_keygen(curve, &mut rng);
        let msg = b"zeros";
        let sig = ecdsa_sign(&kp, msg, &mut rng);
        let zero_r = Signature {
            r: BigUint::zero(),
            s: sig.s.clone(),
        };
        let zero_s = Signature {
            r: sig.r.clone(),
            s: BigUint::zero(),
        };
        assert!(!ecdsa_verify(curve, &kp.pk, msg, &zero_r));
        assert!(!ecdsa_verify(curve, &kp.pk, msg, &zero_s));
    }

    #[test]
    fn signature_bytes_roundtrip() {
        let mut rng = StdRng::seed_from_u64(14);
        for curve in [SigCurveId::P384, SigCurveId::P521] {
            let c = curve.curve();
            let kp = sig_keygen(curve, &mut rng);
            let sig = ecdsa_sign(&kp, b"wire", &mut rng);
            let bytes = sig.to_bytes(&c);
            assert_eq!(bytes.len(), 2 * c.scalar_len());
            assert_eq!(Signature::from_bytes(&c, &bytes).unwrap(), sig);
            assert!(Signature::from_bytes(&c, &bytes[1..]).is_none());
        }
    }

    #[test]
    fn payload_signature_order_sensitive() {
        use crate::group::{toy_params, Scalar};
        use crate::he::{encrypt, keygen};
        let g = toy_params();
        let mut rng = StdRng::seed_from_u64(15);
        let he_kp = keygen(&g, &mut rng);
        let chunks: Vec<Ciphertext> = (0..3)
            .map(|_| {
                encrypt(
                    &g,
                    &he_kp.pk,
                    &g.random_point(&mut rng),
                    &Scalar::random_nonzero(&g.n, &mut rng),
                )
                .unwrap()
            })
            .collect();
        let curve = SigCurveId::P384;
        let kp = sig_keygen(curve, &mut rng);
        let sig = sign_payload(&kp, &chunks, &mut rng);
        assert!(evaluate_payload(&sig, &chunks, curve, &kp.pk));
        let mut reordered = chunks.clone();
        reordered.swap(0, 2);
        assert!(!evaluate_payload(&sig, &reordered, curve, &kp.pk));
        // substituting one chunk fails too
        let mut subst = chunks.clone();
        subst[1] = encrypt(
            &g,
            &he_kp.pk,
            &g.random_point(&mut rng),
            &Scalar::random_nonzero(&g.n, &mut rng),
        )
        .unwrap();
        assert!(!evaluate_payload(&sig, &subst, curve, &kp.pk));
        // count mismatch
        assert!(!evaluate_payload(&sig, &chunks[..2], curve, &kp.pk));
        // single-chunk payload round-trips
        let one = sign_payload(&kp, &chunks[..1], &mut rng);
        assert!(evaluate_payload(&one, &chunks[..1], curve, &kp.pk));
    }
}

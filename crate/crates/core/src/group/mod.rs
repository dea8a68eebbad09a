//! Elliptic-curve groups over GF(2^m): the four NIST B-curves used for the
//! homomorphic cipher, a small curve for exhaustive testing, and the
//! message-to-point codec.

mod codec;
mod field;
mod point;

pub use codec::{chunk_capacity, decode_chunk, encode_chunk, reassemble_chunks, split_into_chunks, PlainChunk};
pub use field::{BinaryField, FieldElement};
pub use point::Point;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{Num, One, Zero};
use rand::RngCore;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("field degree mismatch: {0} vs {1}")]
    DegreeMismatch(u32, u32),
    #[error("bad encoding: {0}")]
    BadEncoding(String),
    #[error("point not on curve")]
    PointNotOnCurve,
    #[error("chunk of {len} bytes exceeds capacity {cap}")]
    ChunkTooLong { len: usize, cap: usize },
    #[error("no curve point found for chunk after exhausting the counter")]
    EncodingFailed,
    #[error("point does not carry message framing")]
    NotAMessagePoint,
    #[error("no curve with a {0}-bit field")]
    UnknownCurve(u32),
}

/// Scalar modulo the base-point order n.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Scalar(BigUint);

impl Scalar {
    pub fn from_biguint(v: BigUint, n: &BigUint) -> Self {
        Scalar(v % n)
    }

    pub fn from_u64(v: u64, n: &BigUint) -> Self {
        Scalar(BigUint::from(v) % n)
    }

    /// Uniform in [0, n).
    pub fn random<R: RngCore + ?Sized>(n: &BigUint, rng: &mut R) -> Self {
        Scalar(rng.gen_biguint_below(n))
    }

    /// Uniform in [1, n).
    pub fn random_nonzero<R: RngCore + ?Sized>(n: &BigUint, rng: &mut R) -> Self {
        loop {
            let s = Self::random(n, rng);
            if !s.is_zero() {
                return s;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }
}

/// Domain parameters of one binary curve: the field, the coefficients of
/// y^2 + xy = x^3 + ax^2 + b, the base point and its order.
#[derive(Clone, Debug)]
pub struct GroupParams {
    pub name: &'static str,
    pub field: BinaryField,
    pub a: FieldElement,
    pub b: FieldElement,
    pub base: Point,
    /// Base-point order (prime).
    pub n: BigUint,
    /// Cofactor.
    pub h: u32,
}

fn hex_fe(m: u32, s: &str) -> FieldElement {
    let bytes = hex::decode(s).expect("curve constant");
    FieldElement::from_bytes_be(m, &bytes).expect("curve constant")
}

fn build(
    name: &'static str,
    m: u32,
    tail: &[u32],
    a: u64,
    b_hex: &str,
    gx_hex: &str,
    gy_hex: &str,
    n_hex: &str,
    h: u32,
) -> GroupParams {
    let field = BinaryField::new(m, tail);
    let a = field.elem(a);
    let b = hex_fe(m, b_hex);
    let base = Point::affine(hex_fe(m, gx_hex), hex_fe(m, gy_hex));
    let n = BigUint::from_str_radix(n_hex, 16).expect("curve order");
    GroupParams {
        name,
        field,
        a,
        b,
        base,
        n,
        h,
    }
}

/// NIST B-163 (sect163r2).
pub fn b163() -> GroupParams {
    build(
        "B-163",
        163,
        &[7, 6, 3, 0],
        1,
        "020a601907b8c953ca1481eb10512f78744a3205fd",
        "03f0eba16286a2d57ea0991168d4994637e8343e36",
        "00d51fbc6c71a0094fa2cdd545b11c5c0c797324f1",
        "040000000000000000000292fe77e70c12a4234c33",
        2,
    )
}

/// NIST B-283 (sect283r1).
pub fn b283() -> GroupParams {
    build(
        "B-283",
        283,
        &[12, 7, 5, 0],
        1,
        "027b680ac8b8596da5a4af8a19a0303fca97fd7645309fa2a581485af6263e313b79a2f5",
        "05f939258db7dd90e1934f8c70b0dfec2eed25b8557eac9c80e2e198f8cdbecd86b12053",
        "03676854fe24141cb98fe6d4b20d02b4516ff702350eddb0826779c813f0df45be8112f4",
        "03ffffffffffffffffffffffffffffffffffef90399660fc938a90165b042a7cefadb307",
        2,
    )
}

/// NIST B-409 (sect409r1).
pub fn b409() -> GroupParams {
    build(
        "B-409",
        409,
        &[87, 0],
        1,
        "0021a5c2c8ee9feb5c4b9a753b7b476b7fd6422ef1f3dd674761fa99d6ac27c8a9a197b272822f6cd57a55aa4f50ae317b13545f",
        "015d4860d088ddb3496b0c6064756260441cde4af1771d4db01ffe5b34e59703dc255a868a1180515603aeab60794e54bb7996a7",
        "0061b1cfab6be5f32bbfa78324ed106a7636b9c5a7bd198d0158aa4f5488d08f38514f1fdf4b4f40d2181b3681c364ba0273c706",
        "010000000000000000000000000000000000000000000000000001e2aad6a612f33307be5fa47c3c9e052f838164cd37d9a21173",
        2,
    )
}

/// NIST K-571 (sect571k1): y^2 + xy = x^3 + 1. The curve is defined over
/// F_2, so its group order is pinned by the zeta-function recursion (a
/// test re-derives it); the base point is generated deterministically by
/// try-and-increment plus cofactor clearing.
pub fn k571() -> GroupParams {
    let field = BinaryField::new(571, &[10, 5, 2, 0]);
    let a = field.zero();
    let b = field.one();
    let n = BigUint::from_str_radix(
        "020000000000000000000000000000000000000000000000000000000000000000000000131850e1f19a63e4b391a8db917f4138b630d84be5d639381e91deb45cfe778f637c1001",
        16,
    )
    .expect("curve order");
    let h = 4u32;
    let mut params = GroupParams {
        name: "K-571",
        field,
        a,
        b,
        base: Point::Identity,
        n,
        h,
    };
    // first x = 1, 2, 3, ... whose cofactor-cleared point is nontrivial
    let f = &params.field;
    let mut c = 1u64;
    params.base = loop {
        let x = f.elem(c);
        let x2 = f.sq(&x);
        let rhs = x.clone() + &params.a + &f.mul(&params.b, &f.inv(&x2).expect("x != 0"));
        if let Some(z) = f.solve_quadratic(&rhs) {
            let p = Point::affine(x.clone(), f.mul(&x, &z));
            let cleared = params.scalar_mul_unchecked(&BigUint::from(params.h), &p);
            if !cleared.is_identity() {
                break cleared;
            }
        }
        c += 1;
    };
    params
}

/// Small curve over GF(2^17) with a prime-order subgroup, for exhaustive
/// and brute-force oracles. y^2 + xy = x^3 + x^2 + 1, |E| = 2 * 65587.
pub fn toy_params() -> GroupParams {
    let field = BinaryField::new(17, &[3, 0]);
    let a = field.elem(1);
    let b = field.elem(1);
    let base = Point::affine(field.elem(0x0aaad), field.elem(0x05b2b));
    GroupParams {
        name: "toy-17",
        field,
        a,
        b,
        base,
        n: BigUint::from(65587u32),
        h: 2,
    }
}

/// The four production curves, smallest first.
pub fn production_curves() -> Vec<GroupParams> {
    vec![b163(), b283(), b409(), k571()]
}

/// Looks a curve up by its field size in bits (163, 283, 409, 571).
pub fn curve_by_bits(bits: u32) -> Result<GroupParams, GroupError> {
    match bits {
        163 => Ok(b163()),
        283 => Ok(b283()),
        409 => Ok(b409()),
        571 => Ok(k571()),
        17 => Ok(toy_params()),
        other => Err(GroupError::UnknownCurve(other)),
    }
}

impl GroupParams {
    /// Uniform-ish point by random-x decompression: draw x until the curve
    /// quadratic is solvable, then take one of its two roots. Much cheaper
    /// than a scalar multiplication.
    pub fn random_point<R: RngCore + ?Sized>(&self, rng: &mut R) -> Point {
        let m = self.field.m();
        loop {
            let mut x = FieldElement::zero(m);
            for i in 0..m {
                if rng.next_u32() & 1 == 1 {
                    x.set_bit(i);
                }
            }
            if x.is_zero() {
                continue;
            }
            // z^2 + z = x + a + b/x^2, then y = x*z
            let f = &self.field;
            let x2 = f.sq(&x);
            let c = x.clone() + &self.a + &f.mul(&self.b, &f.inv(&x2).expect("x != 0"));
            if let Some(z) = f.solve_quadratic(&c) {
                let y = f.mul(&x, &z);
                let p = Point::affine(x, y);
                debug_assert!(self.on_curve(&p));
                return p;
            }
        }
    }
}

/// Miller-Rabin with fixed pseudo-random bases; good enough to pin down
/// embedded curve constants in tests.
pub fn probable_prime(n: &BigUint, rounds: u32) -> bool {
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    let one = BigUint::one();
    let two = &one + &one;
    if *n < two {
        return false;
    }
    if n == &two {
        return true;
    }
    if (n % &two).is_zero() {
        return false;
    }
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let mut rng = StdRng::seed_from_u64(0x5c0be);
    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

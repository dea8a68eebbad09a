//! Short-Weierstrass arithmetic over prime fields for the two ECDSA
//! curves, a = -3 on both. Scalar multiplication runs in Jacobian
//! coordinates with the NIST primes' fast folding reductions, so the only
//! field inversion happens at the final affine conversion.

use num_bigint::BigUint;
use num_traits::{Num, One, Zero};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum PrimePoint {
    Identity,
    Affine { x: BigUint, y: BigUint },
}

impl PrimePoint {
    pub fn is_identity(&self) -> bool {
        matches!(self, PrimePoint::Identity)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Fold {
    /// p = 2^384 - 2^128 - 2^96 + 2^32 - 1
    P384,
    /// p = 2^521 - 1
    P521,
}

/// y^2 = x^3 - 3x + b mod p with base point G of prime order n.
#[derive(Clone, Debug)]
pub struct PrimeCurve {
    pub name: &'static str,
    pub p: BigUint,
    pub n: BigUint,
    pub b: BigUint,
    pub g: PrimePoint,
    fold: Fold,
}

fn big(hex: &str) -> BigUint {
    BigUint::from_str_radix(hex, 16).expect("curve constant")
}

/// NIST P-384 (secp384r1).
pub fn p384() -> PrimeCurve {
    PrimeCurve {
        name: "P-384",
        p: big("fffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffeffffffff0000000000000000ffffffff"),
        n: big("ffffffffffffffffffffffffffffffffffffffffffffffffc7634d81f4372ddf581a0db248b0a77aecec196accc52973"),
        b: big("b3312fa7e23ee7e4988e056be3f82d19181d9c6efe8141120314088f5013875ac656398d8a2ed19d2a85c8edd3ec2aef"),
        g: PrimePoint::Affine {
            x: big("aa87ca22be8b05378eb1c71ef320ad746e1d3b628ba79b9859f741e082542a385502f25dbf55296c3a545e3872760ab7"),
            y: big("3617de4a96262c6f5d9e98bf9292dc29f8f41dbd289a147ce9da3113b5f0b8c00a60b1ce1d7e819d7a431d7c90ea0e5f"),
        },
        fold: Fold::P384,
    }
}

/// NIST P-521 (secp521r1).
pub fn p521() -> PrimeCurve {
    PrimeCurve {
        name: "P-521",
        p: big("01ffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffff"),
        n: big("01fffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffa51868783bf2f966b7fcc0148f709a5d03bb5c9b8899c47aebb6fb71e91386409"),
        b: big("51953eb9618e1c9a1f929a21a0b68540eea2da725b99b315f3b8b489918ef109e156193951ec7e937b1652c0bd3bb1bf073573df883d2c34f1ef451fd46b503f00"),
        g: PrimePoint::Affine {
            x: big("c6858e06b70404e9cd9e3ecb662395b4429c648139053fb521f828af606b4d3dbaa14b5e77efe75928fe1dc127a2ffa8de3348b3c1856a429bf97e7e31c2e5bd66"),
            y: big("011839296a789a3bc0045c8a5fb42c7d1bd998f54449579b446817afbd17273e662c97ee72995ef42640c550b9013fad0761353c7086a272c24088be94769fd16650"),
        },
        fold: Fold::P521,
    }
}

/// Jacobian (X, Y, Z) with the identity encoded as Z = 0.
#[derive(Clone, Debug)]
struct Jacobian {
    x: BigUint,
    y: BigUint,
    z: BigUint,
}

impl Jacobian {
    fn identity() -> Self {
        Jacobian {
            x: BigUint::one(),
            y: BigUint::one(),
            z: BigUint::zero(),
        }
    }

    fn is_identity(&self) -> bool {
        self.z.is_zero()
    }
}

impl PrimeCurve {
    /// Folding reduction: modular reduction without division, using the
    /// special shape of the NIST primes.
    fn red(&self, mut x: BigUint) -> BigUint {
        match self.fold {
            Fold::P521 => {
                if x.bits() > 521 {
                    x = fold_p521(&x);
                }
            }
            Fold::P384 => {
                if x.bits() > 384 {
                    x = fold_p384(&x);
                }
            }
        }
        while x >= self.p {
            x -= &self.p;
        }
        x
    }

    #[inline]
    fn mul_red(&self, a: &BigUint, b: &BigUint) -> BigUint {
        self.red(a * b)
    }

    #[inline]
    fn sq_red(&self, a: &BigUint) -> BigUint {
        self.red(a * a)
    }

    #[inline]
    fn sub_mod(&self, a: &BigUint, b: &BigUint) -> BigUint {
        if a >= b {
            a - b
        } else {
            a + &self.p - b
        }
    }

    #[inline]
    fn add_mod(&self, a: &BigUint, b: &BigUint) -> BigUint {
        let s = a + b;
        if s >= self.p {
            s - &self.p
        } else {
            s
        }
    }

    pub fn on_curve(&self, pt: &PrimePoint) -> bool {
        match pt {
            PrimePoint::Identity => true,
            PrimePoint::Affine { x, y } => {
                if x >= &self.p || y >= &self.p {
                    return false;
                }
                let three = BigUint::from(3u8);
                let lhs = self.sq_red(y);
                let x3 = self.mul_red(&self.sq_red(x), x);
                let rhs = self.add_mod(
                    &self.sub_mod(&x3, &self.red(&three * x)),
                    &self.b,
                );
                lhs == rhs
            }
        }
    }

    fn to_jacobian(&self, pt: &PrimePoint) -> Jacobian {
        match pt {
            PrimePoint::Identity => Jacobian::identity(),
            PrimePoint::Affine { x, y } => Jacobian {
                x: x.clone(),
                y: y.clone(),
                z: BigUint::one(),
            },
        }
    }

    fn to_affine(&self, j: &Jacobian) -> PrimePoint {
        if j.is_identity() {
            return PrimePoint::Identity;
        }
        let z_inv = j.z.modinv(&self.p).expect("nonzero z mod prime");
        let z2 = self.sq_red(&z_inv);
        let z3 = self.mul_red(&z2, &z_inv);
        PrimePoint::Affine {
            x: self.mul_red(&j.x, &z2),
            y: self.mul_red(&j.y, &z3),
        }
    }

    /// Jacobian doubling specialized to a = -3.
    fn jac_double(&self, p: &Jacobian) -> Jacobian {
        if p.is_identity() || p.y.is_zero() {
            return Jacobian::identity();
        }
        let delta = self.sq_red(&p.z);
        let gamma = self.sq_red(&p.y);
        let beta = self.mul_red(&p.x, &gamma);
        let alpha = self.red(
            BigUint::from(3u8)
                * self.mul_red(&self.sub_mod(&p.x, &delta), &self.add_mod(&p.x, &delta)),
        );
        let beta8 = self.red(&beta << 3u32);
        let x3 = self.sub_mod(&self.sq_red(&alpha), &beta8);
        let z3 = self.sub_mod(
            &self.sub_mod(&self.sq_red(&self.add_mod(&p.y, &p.z)), &gamma),
            &delta,
        );
        let beta4 = self.red(&beta << 2u32);
        let gamma2_8 = self.red(&self.sq_red(&gamma) << 3u32);
        let y3 = self.sub_mod(
            &self.mul_red(&alpha, &self.sub_mod(&beta4, &x3)),
            &gamma2_8,
        );
        Jacobian {
            x: x3,
            y: y3,
            z: z3,
        }
    }

    fn jac_add(&self, p: &Jacobian, q: &Jacobian) -> Jacobian {
        if p.is_identity() {
            return q.clone();
        }
        if q.is_identity() {
            return p.clone();
        }
        let z1z1 = self.sq_red(&p.z);
        let z2z2 = self.sq_red(&q.z);
        let u1 = self.mul_red(&p.x, &z2z2);
        let u2 = self.mul_red(&q.x, &z1z1);
        let s1 = self.mul_red(&self.mul_red(&p.y, &q.z), &z2z2);
        let s2 = self.mul_red(&self.mul_red(&q.y, &p.z), &z1z1);
        if u1 == u2 {
            return if s1 == s2 {
                self.jac_double(p)
            } else {
                Jacobian::identity()
            };
        }
        let h = self.sub_mod(&u2, &u1);
        let i = self.sq_red(&self.red(&h << 1u32));
        let j = self.mul_red(&h, &i);
        let r = self.red(self.sub_mod(&s2, &s1) << 1u32);
        let v = self.mul_red(&u1, &i);
        let x3 = self.sub_mod(
            &self.sub_mod(&self.sq_red(&r), &j),
            &self.red(&v << 1u32),
        );
        let y3 = self.sub_mod(
            &self.mul_red(&r, &self.sub_mod(&v, &x3)),
            &self.red(self.mul_red(&s1, &j) << 1u32),
        );
        let z3 = self.mul_red(
            &self.sub_mod(
                &self.sub_mod(&self.sq_red(&self.add_mod(&p.z, &q.z)), &z1z1),
                &z2z2,
            ),
            &h,
        );
        Jacobian {
            x: x3,
            y: y3,
            z: z3,
        }
    }

    pub fn add(&self, pt1: &PrimePoint, pt2: &PrimePoint) -> PrimePoint {
        self.to_affine(&self.jac_add(&self.to_jacobian(pt1), &self.to_jacobian(pt2)))
    }

    pub fn scalar_mul(&self, k: &BigUint, pt: &PrimePoint) -> PrimePoint {
        if k.is_zero() || pt.is_identity() {
            return PrimePoint::Identity;
        }
        let base = self.to_jacobian(pt);
        let mut acc = Jacobian::identity();
        for i in (0..k.bits()).rev() {
            acc = self.jac_double(&acc);
            if k.bit(i) {
                acc = self.jac_add(&acc, &base);
            }
        }
        self.to_affine(&acc)
    }

    /// u1*G + u2*Q with interleaved doubling (one shared ladder).
    pub fn double_scalar_mul(
        &self,
        u1: &BigUint,
        u2: &BigUint,
        q: &PrimePoint,
    ) -> PrimePoint {
        let g = self.to_jacobian(&self.g);
        let jq = self.to_jacobian(q);
        let gq = self.jac_add(&g, &jq);
        let bits = u1.bits().max(u2.bits());
        let mut acc = Jacobian::identity();
        for i in (0..bits).rev() {
            acc = self.jac_double(&acc);
            match (u1.bit(i), u2.bit(i)) {
                (true, true) => acc = self.jac_add(&acc, &gq),
                (true, false) => acc = self.jac_add(&acc, &g),
                (false, true) => acc = self.jac_add(&acc, &jq),
                (false, false) => {}
            }
        }
        self.to_affine(&acc)
    }

    pub fn base_mul(&self, k: &BigUint) -> PrimePoint {
        self.scalar_mul(k, &self.g)
    }

    pub fn inv_mod_n(&self, v: &BigUint) -> Option<BigUint> {
        v.modinv(&self.n)
    }

    /// Width of one scalar on the wire: bytes of n.
    pub fn scalar_len(&self) -> usize {
        ((self.n.bits() as usize) + 7) / 8
    }
}

/// Limb-level fold for p = 2^384 - 2^128 - 2^96 + 2^32 - 1, i.e.
/// 2^384 = 2^128 + 2^96 - 2^32 + 1 (mod p). Runs entirely on fixed u64
/// buffers; the subtracted term is always dominated by hi << 128, so all
/// intermediate values stay non-negative. Output < 2^385; the caller's
/// conditional subtractions finish the job.
fn fold_p384(x: &BigUint) -> BigUint {
    const W: usize = 13; // up to 2^832 scratch
    let mut cur = [0u64; W];
    let mut len = 0;
    for (i, d) in x.iter_u64_digits().enumerate() {
        cur[i] = d;
        len = i + 1;
    }
    debug_assert!(len <= 12, "operands are products of reduced values");

    fn add_shifted(acc: &mut [u64; W], src: &[u64], shift_bits: usize) {
        let (ws, bs) = (shift_bits / 64, shift_bits % 64);
        let mut carry = 0u128;
        for i in 0..src.len() + 1 {
            let lowpart = if i < src.len() { (src[i] as u128) << bs } else { 0 };
            let highpart = if bs > 0 && i > 0 {
                (src[i - 1] as u128) >> (64 - bs)
            } else {
                0
            };
            let idx = ws + i;
            if idx >= W {
                break;
            }
            let sum = acc[idx] as u128 + (lowpart & 0xffff_ffff_ffff_ffff) + highpart + carry;
            acc[idx] = sum as u64;
            carry = sum >> 64;
        }
        let mut idx = ws + src.len() + 1;
        while carry > 0 && idx < W {
            let sum = acc[idx] as u128 + carry;
            acc[idx] = sum as u64;
            carry = sum >> 64;
            idx += 1;
        }
    }

    fn sub_shifted(acc: &mut [u64; W], src: &[u64], shift_bits: usize) {
        let (ws, bs) = (shift_bits / 64, shift_bits % 64);
        let mut borrow = 0i128;
        for i in 0..W - ws {
            let lowpart = if i < src.len() {
                ((src[i] as u128) << bs) & 0xffff_ffff_ffff_ffff
            } else {
                0
            };
            let highpart = if bs > 0 && i > 0 && i - 1 < src.len() {
                (src[i - 1] as u128) >> (64 - bs)
            } else {
                0
            };
            let d = acc[ws + i] as i128 - lowpart as i128 - highpart as i128 - borrow;
            if d < 0 {
                acc[ws + i] = (d + (1i128 << 64)) as u64;
                borrow = 1;
            } else {
                acc[ws + i] = d as u64;
                borrow = 0;
            }
        }
        debug_assert_eq!(borrow, 0, "fold subtraction stays non-negative");
    }

    // two folding rounds bring any 768-bit value under 2^385
    for _ in 0..2 {
        let mut hi = [0u64; W];
        let mut hi_len = 0;
        for i in 6..W {
            hi[i - 6] = cur[i];
            if cur[i] != 0 {
                hi_len = i - 6 + 1;
            }
            cur[i] = 0;
        }
        if hi_len == 0 {
            break;
        }
        let hi = &hi[..hi_len];
        add_shifted(&mut cur, hi, 128);
        add_shifted(&mut cur, hi, 96);
        add_shifted(&mut cur, hi, 0);
        sub_shifted(&mut cur, hi, 32);
    }
    let mut out = Vec::with_capacity(2 * W);
    for &w in &cur {
        out.push(w as u32);
        out.push((w >> 32) as u32);
    }
    BigUint::new(out)
}

/// Limb-level Mersenne fold for p = 2^521 - 1: x = (x >> 521) + (x mod 2^521).
fn fold_p521(x: &BigUint) -> BigUint {
    const W: usize = 17; // up to 2^1088 scratch
    let mut cur = [0u64; W];
    let mut len = 0;
    for (i, d) in x.iter_u64_digits().enumerate() {
        cur[i] = d;
        len = i + 1;
    }
    debug_assert!(len <= 17, "operands are products of reduced values");
    // two rounds: 1042-bit inputs drop below 2^522, then below 2^521 + 1
    for _ in 0..2 {
        let mut hi = [0u64; 9];
        let mut any = false;
        for i in 0..9 {
            let lo_part = cur[8 + i] >> 9;
            let hi_part = if 9 + i < W { cur[9 + i] << 55 } else { 0 };
            hi[i] = lo_part | hi_part;
            any |= hi[i] != 0;
        }
        if !any {
            break;
        }
        cur[8] &= 0x1ff;
        for w in cur[9..].iter_mut() {
            *w = 0;
        }
        let mut carry = 0u128;
        for i in 0..9 {
            let sum = cur[i] as u128 + hi[i] as u128 + carry;
            cur[i] = sum as u64;
            carry = sum >> 64;
        }
        if carry > 0 {
            cur[9] = carry as u64;
        }
    }
    let mut out = Vec::with_capacity(2 * W);
    for &w in &cur {
        out.push(w as u32);
        out.push((w >> 32) as u32);
    }
    BigUint::new(out)
}

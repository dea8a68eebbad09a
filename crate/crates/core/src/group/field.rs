//! Arithmetic in GF(2^m) with a polynomial basis.
//!
//! Elements are coefficient bit vectors packed into fixed 64-bit word
//! arrays, least significant word first; the largest supported field
//! (m = 571) needs nine words, so elements are plain `Copy` values and
//! every operation runs allocation-free. Reduction modulo the field's
//! irreducible polynomial keeps stored degrees below m.

use std::fmt;
use std::ops::{Add, AddAssign};

use super::GroupError;

/// Words per element; fits every supported field (up to m = 571).
pub(crate) const MAX_WORDS: usize = 9;

pub(crate) fn words_for(bits: u32) -> usize {
    ((bits + 63) / 64) as usize
}

/// Element of GF(2^m). Addition is XOR; multiplication needs a [`BinaryField`].
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    m: u32,
    limbs: [u64; MAX_WORDS],
}

impl FieldElement {
    pub fn zero(m: u32) -> Self {
        assert!(words_for(m) <= MAX_WORDS, "field too wide");
        FieldElement {
            m,
            limbs: [0; MAX_WORDS],
        }
    }

    pub fn one(m: u32) -> Self {
        let mut e = Self::zero(m);
        e.limbs[0] = 1;
        e
    }

    pub fn from_u64(m: u32, v: u64) -> Self {
        assert!(m >= 64 || v < (1u64 << m), "value wider than field");
        let mut e = Self::zero(m);
        e.limbs[0] = v;
        e
    }

    /// Parses ceil(m/8) big-endian bytes. Rejects inputs of the wrong
    /// length or with bits at or above position m.
    pub fn from_bytes_be(m: u32, bytes: &[u8]) -> Result<Self, GroupError> {
        let nbytes = ((m + 7) / 8) as usize;
        if bytes.len() != nbytes {
            return Err(GroupError::BadEncoding(format!(
                "field element needs {} bytes, got {}",
                nbytes,
                bytes.len()
            )));
        }
        let mut e = Self::zero(m);
        for (i, &byte) in bytes.iter().rev().enumerate() {
            e.limbs[i / 8] |= (byte as u64) << (8 * (i % 8));
        }
        if e.degree().map_or(false, |d| d >= m) {
            return Err(GroupError::BadEncoding(
                "field element exceeds field degree".into(),
            ));
        }
        Ok(e)
    }

    /// Big-endian, ceil(m/8) bytes.
    pub fn to_bytes_be(&self) -> Vec<u8> {
        let nbytes = ((self.m + 7) / 8) as usize;
        let mut out = vec![0u8; nbytes];
        for i in 0..nbytes {
            out[nbytes - 1 - i] = (self.limbs[i / 8] >> (8 * (i % 8))) as u8;
        }
        out
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&w| w == 0)
    }

    pub fn is_one(&self) -> bool {
        self.limbs[0] == 1 && self.limbs[1..].iter().all(|&w| w == 0)
    }

    pub fn bit(&self, i: u32) -> bool {
        let (w, b) = ((i / 64) as usize, i % 64);
        w < MAX_WORDS && (self.limbs[w] >> b) & 1 == 1
    }

    pub fn set_bit(&mut self, i: u32) {
        debug_assert!(i < self.m);
        self.limbs[(i / 64) as usize] |= 1u64 << (i % 64);
    }

    /// Degree of the polynomial, or None for the zero element.
    pub fn degree(&self) -> Option<u32> {
        for (i, &w) in self.limbs.iter().enumerate().rev() {
            if w != 0 {
                return Some(i as u32 * 64 + 63 - w.leading_zeros());
            }
        }
        None
    }

    /// Same-field addition, surfacing a mismatch as an error.
    pub fn checked_add(&self, rhs: &FieldElement) -> Result<FieldElement, GroupError> {
        if self.m != rhs.m {
            return Err(GroupError::DegreeMismatch(self.m, rhs.m));
        }
        Ok(*self + rhs)
    }
}

impl Add<&FieldElement> for FieldElement {
    type Output = FieldElement;

    fn add(mut self, rhs: &FieldElement) -> FieldElement {
        self += rhs;
        self
    }
}

impl AddAssign<&FieldElement> for FieldElement {
    fn add_assign(&mut self, rhs: &FieldElement) {
        assert_eq!(self.m, rhs.m, "cannot add elements from different fields");
        for i in 0..MAX_WORDS {
            self.limbs[i] ^= rhs.limbs[i];
        }
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fe{}(0x{})", self.m, hex::encode(self.to_bytes_be()))
    }
}

/// The field GF(2^m) itself: degree plus irreducible reduction polynomial.
///
/// The polynomial is x^m + x^e1 + ... + x^ek with the tail exponents ek
/// stored explicitly (NIST binary curves all use trinomials/pentanomials).
#[derive(Clone, Debug)]
pub struct BinaryField {
    m: u32,
    /// Tail of the reduction polynomial: exponents below m, descending, ending in 0.
    tail: Vec<u32>,
    /// Full modulus as a bit vector (for inversion).
    modulus: [u64; MAX_WORDS],
}

impl BinaryField {
    pub fn new(m: u32, tail: &[u32]) -> Self {
        assert!(m >= 2);
        assert!(words_for(m + 1) <= MAX_WORDS, "field too wide");
        // the windowed multiplier keeps deg(8b) inside ceil(m/64) words
        assert!((1..=62).contains(&(m % 64)), "unsupported degree shape");
        assert!(tail.windows(2).all(|w| w[0] > w[1]));
        assert_eq!(*tail.last().expect("constant term"), 0);
        assert!(tail[0] < m);
        let mut modulus = [0u64; MAX_WORDS];
        modulus[(m / 64) as usize] |= 1u64 << (m % 64);
        for &e in tail {
            modulus[(e / 64) as usize] |= 1u64 << (e % 64);
        }
        BinaryField {
            m,
            tail: tail.to_vec(),
            modulus,
        }
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement::zero(self.m)
    }

    pub fn one(&self) -> FieldElement {
        FieldElement::one(self.m)
    }

    pub fn elem(&self, v: u64) -> FieldElement {
        FieldElement::from_u64(self.m, v)
    }

    /// Carry-less product (4-bit windowed comb) followed by reduction.
    pub fn mul(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        assert_eq!(a.m, self.m, "element from a different field");
        assert_eq!(b.m, self.m, "element from a different field");
        let nw = words_for(self.m);
        // table of d(x) * b for every 4-bit polynomial d; deg(8b) stays
        // inside nw words (asserted at field construction)
        let mut tab = [[0u64; MAX_WORDS]; 16];
        tab[1][..nw].copy_from_slice(&b.limbs[..nw]);
        for d in [2usize, 4, 8] {
            let mut carry = 0u64;
            for j in 0..nw {
                let w = tab[d / 2][j];
                tab[d][j] = (w << 1) | carry;
                carry = w >> 63;
            }
        }
        for d in 3..16usize {
            if d.is_power_of_two() {
                continue;
            }
            let lsb = d & d.wrapping_neg();
            let rest = d ^ lsb;
            for j in 0..nw {
                tab[d][j] = tab[lsb][j] ^ tab[rest][j];
            }
        }
        let mut prod = [0u64; 2 * MAX_WORDS];
        for i in 0..nw {
            let w = a.limbs[i];
            if w == 0 {
                continue;
            }
            for nib in 0..16 {
                let d = ((w >> (4 * nib)) & 0xf) as usize;
                if d == 0 {
                    continue;
                }
                let shift = i * 64 + 4 * nib;
                let (wo, bo) = (shift / 64, shift % 64);
                if bo == 0 {
                    for j in 0..nw {
                        prod[wo + j] ^= tab[d][j];
                    }
                } else {
                    for j in 0..nw {
                        let t = tab[d][j];
                        prod[wo + j] ^= t << bo;
                        prod[wo + j + 1] ^= t >> (64 - bo);
                    }
                }
            }
        }
        self.reduce(prod)
    }

    pub fn sq(&self, a: &FieldElement) -> FieldElement {
        // squaring in characteristic 2 just spreads the bits apart
        assert_eq!(a.m, self.m, "element from a different field");
        let nw = words_for(self.m);
        let mut prod = [0u64; 2 * MAX_WORDS];
        for i in 0..nw {
            let w = a.limbs[i];
            prod[2 * i] = spread_bits(w as u32);
            prod[2 * i + 1] = spread_bits((w >> 32) as u32);
        }
        self.reduce(prod)
    }

    /// Reduces a raw product (up to degree 2m-2) modulo the field
    /// polynomial, folding whole words at a time: the bits of x^(m+s) map
    /// to x^(s+e) for each tail exponent e. For large fields one top-down
    /// pass clears everything; for small ones the folds can re-land above
    /// m, so the pass repeats until clean.
    fn reduce(&self, mut raw: [u64; 2 * MAX_WORDS]) -> FieldElement {
        let m = self.m as usize;
        let top_word = (2 * (m - 1)) / 64;
        let boundary = m / 64;
        let k = m % 64;
        loop {
            let mut folded = false;
            // whole words above the boundary
            for wi in ((boundary + 1)..=top_word).rev() {
                let w = raw[wi];
                if w == 0 {
                    continue;
                }
                folded = true;
                raw[wi] = 0;
                let base = wi * 64 - m;
                for &e in &self.tail {
                    let t = base + e as usize;
                    let (two, tb) = (t / 64, t % 64);
                    if tb == 0 {
                        raw[two] ^= w;
                    } else {
                        raw[two] ^= w << tb;
                        raw[two + 1] ^= w >> (64 - tb);
                    }
                }
            }
            // the word straddling the m boundary
            if k != 0 {
                let hi = raw[boundary] >> k;
                if hi != 0 {
                    folded = true;
                    raw[boundary] &= (1u64 << k) - 1;
                    for &e in &self.tail {
                        let t = e as usize;
                        let (two, tb) = (t / 64, t % 64);
                        raw[two] ^= hi << tb;
                        if tb != 0 {
                            raw[two + 1] ^= hi >> (64 - tb);
                        }
                    }
                }
            }
            if !folded {
                break;
            }
        }
        let mut limbs = [0u64; MAX_WORDS];
        limbs.copy_from_slice(&raw[..MAX_WORDS]);
        FieldElement {
            m: self.m,
            limbs,
        }
    }

    /// Inverse by the binary extended Euclidean algorithm. None for zero.
    pub fn inv(&self, a: &FieldElement) -> Option<FieldElement> {
        assert_eq!(a.m, self.m, "element from a different field");
        if a.is_zero() {
            return None;
        }
        let nw = words_for(self.m + 1);
        let mut u = a.limbs;
        let mut v = self.modulus;
        let mut g1 = [0u64; MAX_WORDS];
        g1[0] = 1;
        let mut g2 = [0u64; MAX_WORDS];

        #[inline]
        fn is_one(x: &[u64; MAX_WORDS], nw: usize) -> bool {
            x[0] == 1 && x[1..nw].iter().all(|&w| w == 0)
        }
        #[inline]
        fn deg(x: &[u64; MAX_WORDS], nw: usize) -> i64 {
            for i in (0..nw).rev() {
                if x[i] != 0 {
                    return i as i64 * 64 + 63 - x[i].leading_zeros() as i64;
                }
            }
            -1
        }
        #[inline]
        fn shr1(x: &mut [u64; MAX_WORDS], nw: usize) {
            for i in 0..nw - 1 {
                x[i] = (x[i] >> 1) | (x[i + 1] << 63);
            }
            x[nw - 1] >>= 1;
        }
        #[inline]
        fn xor_into(dst: &mut [u64; MAX_WORDS], src: &[u64; MAX_WORDS], nw: usize) {
            for i in 0..nw {
                dst[i] ^= src[i];
            }
        }

        while !is_one(&u, nw) && !is_one(&v, nw) {
            while u[0] & 1 == 0 {
                shr1(&mut u, nw);
                if g1[0] & 1 == 1 {
                    xor_into(&mut g1, &self.modulus, nw);
                }
                shr1(&mut g1, nw);
            }
            while v[0] & 1 == 0 {
                shr1(&mut v, nw);
                if g2[0] & 1 == 1 {
                    xor_into(&mut g2, &self.modulus, nw);
                }
                shr1(&mut g2, nw);
            }
            if deg(&u, nw) > deg(&v, nw) {
                let (vv, gg) = (v, g2);
                xor_into(&mut u, &vv, nw);
                xor_into(&mut g1, &gg, nw);
            } else {
                let (uu, gg) = (u, g1);
                xor_into(&mut v, &uu, nw);
                xor_into(&mut g2, &gg, nw);
            }
        }
        let out = if is_one(&u, nw) { g1 } else { g2 };
        Some(FieldElement {
            m: self.m,
            limbs: out,
        })
    }

    /// Trace map Tr(a) = a + a^2 + a^4 + ... + a^(2^(m-1)), valued in {0, 1}.
    pub fn trace(&self, a: &FieldElement) -> u8 {
        let mut acc = *a;
        let mut cur = *a;
        for _ in 1..self.m {
            cur = self.sq(&cur);
            acc += &cur;
        }
        debug_assert!(acc.is_zero() || acc.is_one());
        u8::from(!acc.is_zero())
    }

    /// Half-trace for odd m: if Tr(a) = 0 the result z satisfies z^2 + z = a.
    pub fn half_trace(&self, a: &FieldElement) -> FieldElement {
        debug_assert_eq!(self.m % 2, 1);
        let mut acc = *a;
        let mut cur = *a;
        for _ in 0..(self.m - 1) / 2 {
            cur = self.sq(&self.sq(&cur));
            acc += &cur;
        }
        acc
    }

    /// Solves z^2 + z = a, or None when Tr(a) = 1.
    pub fn solve_quadratic(&self, a: &FieldElement) -> Option<FieldElement> {
        let z = self.half_trace(a);
        if self.sq(&z) + &z == *a {
            Some(z)
        } else {
            None
        }
    }
}

/// Interleaves zero bits: abcd -> 0a0b0c0d.
#[inline]
fn spread_bits(v: u32) -> u64 {
    let mut x = v as u64;
    x = (x | (x << 16)) & 0x0000_ffff_0000_ffff;
    x = (x | (x << 8)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

//! Points on a binary elliptic curve y^2 + xy = x^3 + ax^2 + b and the
//! group law, in affine coordinates.

use num_bigint::BigUint;
use num_traits::Zero;

use super::field::FieldElement;
use super::{GroupError, GroupParams, Scalar};

/// A curve point: the identity, or an affine coordinate pair.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Point {
    Identity,
    Affine { x: FieldElement, y: FieldElement },
}

impl Point {
    pub fn affine(x: FieldElement, y: FieldElement) -> Self {
        Point::Affine { x, y }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Point::Identity)
    }

    pub fn x(&self) -> Option<&FieldElement> {
        match self {
            Point::Identity => None,
            Point::Affine { x, .. } => Some(x),
        }
    }

    /// Uncompressed encoding: 0x04 || x || y; the identity is a single 0x00.
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Point::Identity => vec![0x00],
            Point::Affine { x, y } => {
                let mut out = Vec::with_capacity(1 + 2 * x.to_bytes_be().len());
                out.push(0x04);
                out.extend_from_slice(&x.to_bytes_be());
                out.extend_from_slice(&y.to_bytes_be());
                out
            }
        }
    }
}

impl GroupParams {
    /// Checks the curve equation y^2 + xy = x^3 + ax^2 + b.
    pub fn on_curve(&self, p: &Point) -> bool {
        match p {
            Point::Identity => true,
            Point::Affine { x, y } => {
                if x.m() != self.field.m() || y.m() != self.field.m() {
                    return false;
                }
                let f = &self.field;
                let lhs = f.sq(y) + &f.mul(x, y);
                let x2 = f.sq(x);
                let rhs = f.mul(&x2, x) + &f.mul(&self.a, &x2) + &self.b;
                lhs == rhs
            }
        }
    }

    /// Negation: -(x, y) = (x, x + y).
    pub fn negate(&self, p: &Point) -> Point {
        match p {
            Point::Identity => Point::Identity,
            Point::Affine { x, y } => Point::Affine {
                x: x.clone(),
                y: x.clone() + y,
            },
        }
    }

    /// Group law. Handles doubling, inverse pairs, and identity operands;
    /// rejects points that do not satisfy the curve equation.
    pub fn point_add(&self, p: &Point, q: &Point) -> Result<Point, GroupError> {
        if !self.on_curve(p) || !self.on_curve(q) {
            return Err(GroupError::PointNotOnCurve);
        }
        Ok(self.add_unchecked(p, q))
    }

    pub(crate) fn add_unchecked(&self, p: &Point, q: &Point) -> Point {
        let f = &self.field;
        match (p, q) {
            (Point::Identity, _) => q.clone(),
            (_, Point::Identity) => p.clone(),
            (Point::Affine { x: x1, y: y1 }, Point::Affine { x: x2, y: y2 }) => {
                if x1 == x2 {
                    if *y2 == x1.clone() + y1 {
                        // q = -p
                        return Point::Identity;
                    }
                    // doubling; points with x = 0 are 2-torsion
                    if x1.is_zero() {
                        return Point::Identity;
                    }
                    let lambda = x1.clone() + &f.mul(y1, &f.inv(x1).expect("x1 != 0"));
                    let x3 = f.sq(&lambda) + &lambda + &self.a;
                    let y3 = f.sq(x1) + &f.mul(&(lambda + &f.one()), &x3);
                    Point::Affine { x: x3, y: y3 }
                } else {
                    let dx = x1.clone() + x2;
                    let lambda = f.mul(&(y1.clone() + y2), &f.inv(&dx).expect("x1 != x2"));
                    let x3 = f.sq(&lambda) + &lambda + x1 + x2 + &self.a;
                    let y3 = f.mul(&lambda, &(x1.clone() + &x3)) + &x3 + y1;
                    Point::Affine { x: x3, y: y3 }
                }
            }
        }
    }

    /// Double-and-add scalar multiplication.
    pub fn scalar_mul(&self, k: &Scalar, p: &Point) -> Result<Point, GroupError> {
        if !self.on_curve(p) {
            return Err(GroupError::PointNotOnCurve);
        }
        Ok(self.scalar_mul_unchecked(k.value(), p))
    }

    pub(crate) fn scalar_mul_unchecked(&self, k: &BigUint, p: &Point) -> Point {
        if k.is_zero() || p.is_identity() {
            return Point::Identity;
        }
        let mut acc = Point::Identity;
        for i in (0..k.bits()).rev() {
            acc = self.add_unchecked(&acc, &acc);
            if k.bit(i) {
                acc = self.add_unchecked(&acc, p);
            }
        }
        acc
    }

    /// Multiplies the base point.
    pub fn base_mul(&self, k: &Scalar) -> Point {
        self.scalar_mul_unchecked(k.value(), &self.base)
    }

    /// Parses the uncompressed encoding produced by [`Point::to_bytes`].
    pub fn point_from_bytes(&self, bytes: &[u8]) -> Result<Point, GroupError> {
        let len = self.coord_len();
        match bytes.first() {
            Some(0x00) if bytes.len() == 1 => Ok(Point::Identity),
            Some(0x04) if bytes.len() == 1 + 2 * len => {
                let m = self.field.m();
                let x = FieldElement::from_bytes_be(m, &bytes[1..1 + len])?;
                let y = FieldElement::from_bytes_be(m, &bytes[1 + len..])?;
                let p = Point::Affine { x, y };
                if self.on_curve(&p) {
                    Ok(p)
                } else {
                    Err(GroupError::PointNotOnCurve)
                }
            }
            _ => Err(GroupError::BadEncoding("malformed point".into())),
        }
    }

    /// Serialized length of a non-identity point.
    pub fn point_len(&self) -> usize {
        1 + 2 * self.coord_len()
    }

    pub fn coord_len(&self) -> usize {
        ((self.field.m() + 7) / 8) as usize
    }
}

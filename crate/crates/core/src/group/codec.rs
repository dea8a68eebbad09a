//! Invertible message-to-point encoding (Koblitz try-and-increment).
//!
//! A chunk of up to `chunk_capacity(m)` bytes is framed into the low
//! floor(m/8) bytes of the x-coordinate, big-endian:
//!
//! ```text
//! [1-byte length] [payload bytes] [zero padding] [1-byte counter]
//! ```
//!
//! The counter is incremented until an x with a curve solution appears, so
//! the map is deterministic and exactly invertible from the x-coordinate
//! alone. Any leading bits above the framed window stay zero, keeping the
//! value inside the field for every m.

use super::field::FieldElement;
use super::{GroupError, GroupParams, Point};

/// A payload fragment small enough to embed in one x-coordinate.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PlainChunk(Vec<u8>);

impl PlainChunk {
    pub fn new(bytes: Vec<u8>, m: u32) -> Result<Self, GroupError> {
        let cap = chunk_capacity(m);
        if bytes.len() > cap {
            return Err(GroupError::ChunkTooLong {
                len: bytes.len(),
                cap,
            });
        }
        Ok(PlainChunk(bytes))
    }

    pub fn bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }
}

/// Payload bytes one chunk can carry: floor(m/8) - 2 (length and counter
/// bytes take the other two slots of the framed window).
pub fn chunk_capacity(m: u32) -> usize {
    (m / 8) as usize - 2
}

/// Maps a chunk to a curve point. Fails only if all 256 counter values
/// miss the curve, which the caller handles by re-splitting.
pub fn encode_chunk(params: &GroupParams, chunk: &PlainChunk) -> Result<Point, GroupError> {
    let m = params.field.m();
    let window = (m / 8) as usize;
    let cap = chunk_capacity(m);
    if chunk.0.len() > cap {
        return Err(GroupError::ChunkTooLong {
            len: chunk.0.len(),
            cap,
        });
    }
    // framed window, big-endian: length, payload, padding, counter
    let mut frame = vec![0u8; window];
    frame[0] = chunk.0.len() as u8;
    frame[1..1 + chunk.0.len()].copy_from_slice(&chunk.0);

    let f = &params.field;
    for counter in 0u16..256 {
        frame[window - 1] = counter as u8;
        let mut xbytes = vec![0u8; params.coord_len()];
        let off = xbytes.len() - window;
        xbytes[off..].copy_from_slice(&frame);
        let x = FieldElement::from_bytes_be(m, &xbytes)?;
        if x.is_zero() {
            continue;
        }
        // y^2 + xy = x^3 + ax^2 + b  =>  z^2 + z = x + a + b/x^2, y = x*z
        let x2 = f.sq(&x);
        let c = x.clone() + &params.a + &f.mul(&params.b, &f.inv(&x2).expect("x != 0"));
        if let Some(z) = f.solve_quadratic(&c) {
            let y = f.mul(&x, &z);
            let p = Point::affine(x, y);
            debug_assert!(params.on_curve(&p));
            return Ok(p);
        }
    }
    Err(GroupError::EncodingFailed)
}

/// Exact inverse of [`encode_chunk`]. Rejects points whose x-coordinate
/// does not carry valid framing.
pub fn decode_chunk(params: &GroupParams, point: &Point) -> Result<PlainChunk, GroupError> {
    let x = match point {
        Point::Identity => return Err(GroupError::NotAMessagePoint),
        Point::Affine { x, .. } => x,
    };
    if x.m() != params.field.m() {
        return Err(GroupError::NotAMessagePoint);
    }
    let m = params.field.m();
    let window = (m / 8) as usize;
    let xbytes = x.to_bytes_be();
    let off = xbytes.len() - window;
    // bits above the framed window must be zero
    if xbytes[..off].iter().any(|&b| b != 0) {
        return Err(GroupError::NotAMessagePoint);
    }
    let frame = &xbytes[off..];
    let len = frame[0] as usize;
    if len > chunk_capacity(m) {
        return Err(GroupError::NotAMessagePoint);
    }
    // padding between payload and counter must be zero
    if frame[1 + len..window - 1].iter().any(|&b| b != 0) {
        return Err(GroupError::NotAMessagePoint);
    }
    Ok(PlainChunk(frame[1..1 + len].to_vec()))
}

/// Splits payload bytes into encodable chunks. A chunk that defeats the
/// counter (vanishingly rare) is re-split into two halves.
pub fn split_into_chunks(params: &GroupParams, payload: &[u8]) -> Result<Vec<PlainChunk>, GroupError> {
    let cap = chunk_capacity(params.field.m());
    let mut out = Vec::new();
    let mut pending: Vec<&[u8]> = payload.chunks(cap).rev().collect();
    while let Some(piece) = pending.pop() {
        let chunk = PlainChunk(piece.to_vec());
        match encode_chunk(params, &chunk) {
            Ok(_) => out.push(chunk),
            Err(GroupError::EncodingFailed) if piece.len() > 1 => {
                let (lo, hi) = piece.split_at(piece.len() / 2);
                pending.push(hi);
                pending.push(lo);
            }
            Err(e) => return Err(e),
        }
    }
    if payload.is_empty() {
        out.push(PlainChunk(Vec::new()));
    }
    Ok(out)
}

/// Concatenates decoded chunks back into the original payload.
pub fn reassemble_chunks(chunks: &[PlainChunk]) -> Vec<u8> {
    let mut out = Vec::new();
    for c in chunks {
        out.extend_from_slice(&c.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{b163, production_curves, toy_params};
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn empty_chunk_roundtrips_everywhere() {
        for g in production_curves().into_iter().chain([toy_params()]) {
            let c = PlainChunk::new(Vec::new(), g.field.m()).unwrap();
            let p = encode_chunk(&g, &c).unwrap();
            assert_eq!(decode_chunk(&g, &p).unwrap(), c, "{}", g.name);
        }
    }

    #[test]
    fn roundtrip_random_chunks() {
        for g in production_curves() {
            let cap = chunk_capacity(g.field.m());
            let mut rng = StdRng::seed_from_u64(1);
            for _ in 0..200 {
                let len = rng.gen_range(0..=cap);
                let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
                let c = PlainChunk::new(bytes, g.field.m()).unwrap();
                let p = encode_chunk(&g, &c).unwrap();
                assert_eq!(decode_chunk(&g, &p).unwrap(), c, "{}", g.name);
            }
        }
    }

    #[test]
    fn oversized_chunk_rejected() {
        let cap = chunk_capacity(163);
        assert_eq!(cap, 18);
        assert!(matches!(
            PlainChunk::new(vec![0; cap + 1], 163),
            Err(GroupError::ChunkTooLong { .. })
        ));
    }

    #[test]
    fn distinct_chunks_map_to_distinct_points() {
        use std::collections::HashSet;
        let g = b163();
        let mut rng = StdRng::seed_from_u64(2);
        let mut seen = HashSet::new();
        let mut chunks = HashSet::new();
        for _ in 0..10_000 {
            let len = rng.gen_range(0..=chunk_capacity(163));
            let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            if !chunks.insert(bytes.clone()) {
                continue;
            }
            let p = encode_chunk(&g, &PlainChunk::new(bytes, 163).unwrap()).unwrap();
            assert!(seen.insert(p.to_bytes()), "collision");
        }
    }

    #[test]
    fn non_message_points_rejected() {
        let g = b163();
        assert_eq!(
            decode_chunk(&g, &Point::Identity),
            Err(GroupError::NotAMessagePoint)
        );
        // the base point's x does not satisfy the framing
        assert!(decode_chunk(&g, &g.base).is_err());
    }

    #[test]
    fn split_reassemble_roundtrip() {
        let g = b163();
        let mut rng = StdRng::seed_from_u64(3);
        for len in [0usize, 1, 17, 18, 19, 54, 200] {
            let payload: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let chunks = split_into_chunks(&g, &payload).unwrap();
            let encoded: Vec<_> = chunks
                .iter()
                .map(|c| encode_chunk(&g, c).unwrap())
                .collect();
            let decoded: Vec<_> = encoded
                .iter()
                .map(|p| decode_chunk(&g, p).unwrap())
                .collect();
            assert_eq!(reassemble_chunks(&decoded), payload, "len {len}");
        }
    }
}

//! COPE header, SCOPE packet and robust SCOPE packet formats.
//!
//! The wire layout is big-endian throughout. Every section is prefixed by
//! a one-byte entry count (two bytes for signature sections, which can
//! exceed 255). The MAC, routing and IP headers are fixed-size opaque
//! stubs (14, 8, 20 bytes) since the simulator does not model those
//! layers. A leading tag byte distinguishes the SCOPE (0x01) and robust
//! SCOPE (0x02) formats; everything after it follows the section order of
//! the packet diagrams exactly.
//!
//! Serialization is deterministic and parsing is its exact inverse:
//! trailing bytes, bad counts, off-curve points and oversized scalars are
//! all structured errors naming the offending section.

use thiserror::Error;

use crate::auth::{PrimeCurve, SigCurveId, SignPayload, SignScope, Signature};
use crate::group::{encode_chunk, GroupError, GroupParams, PlainChunk};
use crate::he::{encrypt_det, Ciphertext, FlowKey, HeError, PublicKey};
use crate::NodeId;

pub const MAC_HEADER_LEN: usize = 14;
pub const ROUTING_HEADER_LEN: usize = 8;
pub const IP_HEADER_LEN: usize = 20;

const KIND_SCOPE: u8 = 0x01;
const KIND_ROBUST: u8 = 0x02;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PacketError {
    #[error("{section}: {count} entries exceed the count field")]
    SectionOverflow { section: &'static str, count: usize },
    #[error("{section}: truncated")]
    Truncated { section: &'static str },
    #[error("{section}: {detail}")]
    Malformed { section: &'static str, detail: String },
    #[error("{0} trailing bytes after packet end")]
    TrailingBytes(usize),
    #[error("unknown packet tag {0:#04x}")]
    UnknownKind(u8),
    #[error("header field encoding failed: {0}")]
    FieldEncoding(#[from] GroupError),
    #[error("header field encryption failed: {0}")]
    FieldEncryption(#[from] HeError),
}

// ---------------------------------------------------------------------------
// plaintext COPE header
// ---------------------------------------------------------------------------

/// Coding report entry: one XOR-ed native packet and its next hop.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CodingEntry {
    pub pkt_id: u32,
    pub next_hop: NodeId,
}

/// Reception report entry: packets recently overheard from a source.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ReceptionEntry {
    pub src_ip: NodeId,
    pub last_pkt: u32,
    pub bitmap: [u8; 8],
}

/// ACK report entry: packets acknowledged to a neighbor.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AckEntry {
    pub neighbor: NodeId,
    pub last_ack: u32,
    pub ack_map: [u8; 8],
}

/// The plaintext COPE header: coding report, reception report, ACK report.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct CopeHeader {
    pub coding_report: Vec<CodingEntry>,
    pub reception_reports: Vec<ReceptionEntry>,
    pub ack_reports: Vec<AckEntry>,
}

impl CopeHeader {
    pub fn to_bytes(&self) -> Result<Vec<u8>, PacketError> {
        let mut out = Vec::new();
        push_count(&mut out, self.coding_report.len(), "coding report")?;
        for e in &self.coding_report {
            out.extend_from_slice(&e.pkt_id.to_be_bytes());
            out.extend_from_slice(&e.next_hop.0.to_be_bytes());
        }
        push_count(&mut out, self.reception_reports.len(), "reception report")?;
        for e in &self.reception_reports {
            out.extend_from_slice(&e.src_ip.0.to_be_bytes());
            out.extend_from_slice(&e.last_pkt.to_be_bytes());
            out.extend_from_slice(&e.bitmap);
        }
        push_count(&mut out, self.ack_reports.len(), "ack report")?;
        for e in &self.ack_reports {
            out.extend_from_slice(&e.neighbor.0.to_be_bytes());
            out.extend_from_slice(&e.last_ack.to_be_bytes());
            out.extend_from_slice(&e.ack_map);
        }
        Ok(out)
    }

    pub fn read_from(r: &mut Reader<'_>) -> Result<Self, PacketError> {
        let mut h = CopeHeader::default();
        let n = r.u8("coding report")? as usize;
        for _ in 0..n {
            h.coding_report.push(CodingEntry {
                pkt_id: r.u32("coding report")?,
                next_hop: NodeId(r.u32("coding report")?),
            });
        }
        let n = r.u8("reception report")? as usize;
        for _ in 0..n {
            h.reception_reports.push(ReceptionEntry {
                src_ip: NodeId(r.u32("reception report")?),
                last_pkt: r.u32("reception report")?,
                bitmap: r.array("reception report")?,
            });
        }
        let n = r.u8("ack report")? as usize;
        for _ in 0..n {
            h.ack_reports.push(AckEntry {
                neighbor: NodeId(r.u32("ack report")?),
                last_ack: r.u32("ack report")?,
                ack_map: r.array("ack report")?,
            });
        }
        Ok(h)
    }
}

// ---------------------------------------------------------------------------
// encrypted SCOPE header
// ---------------------------------------------------------------------------

/// Coding report entry with the next hop encrypted. The packet id stays
/// plaintext: it is signed but not listed among the encrypted fields, and
/// relays need it to look up coded components.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EncCodingEntry {
    pub pkt_id: u32,
    pub next_hop: Ciphertext,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EncReceptionEntry {
    pub src_ip: Ciphertext,
    pub last_pkt: Ciphertext,
    pub bitmap: Ciphertext,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EncAckEntry {
    pub neighbor: Ciphertext,
    pub last_ack: Ciphertext,
    pub ack_map: Ciphertext,
}

/// The COPE header with every field value replaced by a ciphertext;
/// section counts stay plaintext so nodes can iterate without keys.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ScopeHeader {
    pub coding_report: Vec<EncCodingEntry>,
    pub reception_reports: Vec<EncReceptionEntry>,
    pub ack_reports: Vec<EncAckEntry>,
}

impl ScopeHeader {
    /// Serialized bytes of every field, grouped by section in header
    /// order; this is exactly what the contact signature covers.
    pub fn field_bytes(&self) -> [Vec<Vec<u8>>; 3] {
        let encode = self
            .coding_report
            .iter()
            .flat_map(|e| [e.pkt_id.to_be_bytes().to_vec(), e.next_hop.to_bytes()])
            .collect();
        let report = self
            .reception_reports
            .iter()
            .flat_map(|e| {
                [
                    e.src_ip.to_bytes(),
                    e.last_pkt.to_bytes(),
                    e.bitmap.to_bytes(),
                ]
            })
            .collect();
        let ack = self
            .ack_reports
            .iter()
            .flat_map(|e| {
                [
                    e.neighbor.to_bytes(),
                    e.last_ack.to_bytes(),
                    e.ack_map.to_bytes(),
                ]
            })
            .collect();
        [encode, report, ack]
    }

    fn write(&self, out: &mut Vec<u8>) -> Result<(), PacketError> {
        push_count(out, self.coding_report.len(), "coding report")?;
        for e in &self.coding_report {
            out.extend_from_slice(&e.pkt_id.to_be_bytes());
            out.extend_from_slice(&e.next_hop.to_bytes());
        }
        push_count(out, self.reception_reports.len(), "reception report")?;
        for e in &self.reception_reports {
            out.extend_from_slice(&e.src_ip.to_bytes());
            out.extend_from_slice(&e.last_pkt.to_bytes());
            out.extend_from_slice(&e.bitmap.to_bytes());
        }
        push_count(out, self.ack_reports.len(), "ack report")?;
        for e in &self.ack_reports {
            out.extend_from_slice(&e.neighbor.to_bytes());
            out.extend_from_slice(&e.last_ack.to_bytes());
            out.extend_from_slice(&e.ack_map.to_bytes());
        }
        Ok(())
    }

    fn read(params: &GroupParams, r: &mut Reader<'_>) -> Result<Self, PacketError> {
        let mut h = ScopeHeader::default();
        let n = r.u8("coding report")? as usize;
        for _ in 0..n {
            h.coding_report.push(EncCodingEntry {
                pkt_id: r.u32("coding report")?,
                next_hop: r.ciphertext(params, "coding report")?,
            });
        }
        let n = r.u8("reception report")? as usize;
        for _ in 0..n {
            h.reception_reports.push(EncReceptionEntry {
                src_ip: r.ciphertext(params, "reception report")?,
                last_pkt: r.ciphertext(params, "reception report")?,
                bitmap: r.ciphertext(params, "reception report")?,
            });
        }
        let n = r.u8("ack report")? as usize;
        for _ in 0..n {
            h.ack_reports.push(EncAckEntry {
                neighbor: r.ciphertext(params, "ack report")?,
                last_ack: r.ciphertext(params, "ack report")?,
                ack_map: r.ciphertext(params, "ack report")?,
            });
        }
        Ok(h)
    }
}

/// Encrypts every field of a COPE header deterministically under the
/// destination's key, so equal plaintext fields stay comparable as
/// ciphertext bytes. Counts are carried over in plaintext.
pub fn encrypt_header(
    params: &GroupParams,
    header: &CopeHeader,
    fk: &FlowKey,
    pk_dest: &PublicKey,
) -> Result<ScopeHeader, PacketError> {
    let enc_bytes = |bytes: &[u8]| -> Result<Ciphertext, PacketError> {
        let chunk = PlainChunk::new(bytes.to_vec(), params.field.m())?;
        let point = encode_chunk(params, &chunk)?;
        Ok(encrypt_det(params, pk_dest, &point, fk)?)
    };
    let enc_u32 = |v: u32| enc_bytes(&v.to_be_bytes());
    Ok(ScopeHeader {
        coding_report: header
            .coding_report
            .iter()
            .map(|e| {
                Ok(EncCodingEntry {
                    pkt_id: e.pkt_id,
                    next_hop: enc_u32(e.next_hop.0)?,
                })
            })
            .collect::<Result<_, PacketError>>()?,
        reception_reports: header
            .reception_reports
            .iter()
            .map(|e| {
                Ok(EncReceptionEntry {
                    src_ip: enc_u32(e.src_ip.0)?,
                    last_pkt: enc_u32(e.last_pkt)?,
                    bitmap: enc_bytes(&e.bitmap)?,
                })
            })
            .collect::<Result<_, PacketError>>()?,
        ack_reports: header
            .ack_reports
            .iter()
            .map(|e| {
                Ok(EncAckEntry {
                    neighbor: enc_u32(e.neighbor.0)?,
                    last_ack: enc_u32(e.last_ack)?,
                    ack_map: enc_bytes(&e.ack_map)?,
                })
            })
            .collect::<Result<_, PacketError>>()?,
    })
}

// ---------------------------------------------------------------------------
// packets
// ---------------------------------------------------------------------------

/// SCOPE packet: MAC | SCOPE header | routing | IP | coded packet.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ScopePacket {
    pub mac_header: [u8; MAC_HEADER_LEN],
    pub scope_header: ScopeHeader,
    pub routing_header: [u8; ROUTING_HEADER_LEN],
    pub ip_header: [u8; IP_HEADER_LEN],
    pub payload: Vec<Ciphertext>,
}

/// Robust SCOPE packet: the SCOPE packet plus the header signature and
/// one source-signature block per coding-report component, placed between
/// the IP header and the payload.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RobustPacket {
    pub mac_header: [u8; MAC_HEADER_LEN],
    pub scope_header: ScopeHeader,
    pub routing_header: [u8; ROUTING_HEADER_LEN],
    pub ip_header: [u8; IP_HEADER_LEN],
    pub header_sig: SignScope,
    pub payload_sigs: Vec<SignPayload>,
    pub payload: Vec<Ciphertext>,
}

/// Either packet format, as distinguished by the leading tag byte.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Packet {
    Scope(ScopePacket),
    Robust(RobustPacket),
}

impl ScopePacket {
    pub fn to_bytes(&self) -> Result<Vec<u8>, PacketError> {
        let mut out = vec![KIND_SCOPE];
        out.extend_from_slice(&self.mac_header);
        self.scope_header.write(&mut out)?;
        out.extend_from_slice(&self.routing_header);
        out.extend_from_slice(&self.ip_header);
        write_payload(&mut out, &self.payload)?;
        Ok(out)
    }
}

impl RobustPacket {
    pub fn to_bytes(&self, sig_curve: &PrimeCurve) -> Result<Vec<u8>, PacketError> {
        let mut out = vec![KIND_ROBUST];
        out.extend_from_slice(&self.mac_header);
        self.scope_header.write(&mut out)?;
        out.extend_from_slice(&self.routing_header);
        out.extend_from_slice(&self.ip_header);
        for sigs in [
            &self.header_sig.sign_encode,
            &self.header_sig.sign_report,
            &self.header_sig.sign_ack,
        ] {
            if sigs.len() > u16::MAX as usize {
                return Err(PacketError::SectionOverflow {
                    section: "header signature",
                    count: sigs.len(),
                });
            }
            out.extend_from_slice(&(sigs.len() as u16).to_be_bytes());
            for s in sigs {
                out.extend_from_slice(&s.to_bytes(sig_curve));
            }
        }
        push_count(&mut out, self.payload_sigs.len(), "payload signature")?;
        for block in &self.payload_sigs {
            push_count(&mut out, block.sigs.len(), "payload signature")?;
            for s in &block.sigs {
                out.extend_from_slice(&s.to_bytes(sig_curve));
            }
        }
        write_payload(&mut out, &self.payload)?;
        Ok(out)
    }

    /// Strips the signatures, leaving the plain SCOPE packet.
    pub fn to_scope(&self) -> ScopePacket {
        ScopePacket {
            mac_header: self.mac_header,
            scope_header: self.scope_header.clone(),
            routing_header: self.routing_header,
            ip_header: self.ip_header,
            payload: self.payload.clone(),
        }
    }
}

impl Packet {
    pub fn to_bytes(&self, sig_curve: &PrimeCurve) -> Result<Vec<u8>, PacketError> {
        match self {
            Packet::Scope(p) => p.to_bytes(),
            Packet::Robust(p) => p.to_bytes(sig_curve),
        }
    }

    pub fn scope_header(&self) -> &ScopeHeader {
        match self {
            Packet::Scope(p) => &p.scope_header,
            Packet::Robust(p) => &p.scope_header,
        }
    }

    pub fn payload(&self) -> &[Ciphertext] {
        match self {
            Packet::Scope(p) => &p.payload,
            Packet::Robust(p) => &p.payload,
        }
    }
}

/// Parses either packet format; the exact inverse of serialization.
/// Rejects trailing bytes.
pub fn deserialize(
    params: &GroupParams,
    sig_curve: SigCurveId,
    bytes: &[u8],
) -> Result<Packet, PacketError> {
    let mut r = Reader { bytes, pos: 0 };
    let kind = r.u8("packet tag")?;
    let packet = match kind {
        KIND_SCOPE => {
            let mac_header = r.array("mac header")?;
            let scope_header = ScopeHeader::read(params, &mut r)?;
            let routing_header = r.array("routing header")?;
            let ip_header = r.array("ip header")?;
            let payload = read_payload(params, &mut r)?;
            Packet::Scope(ScopePacket {
                mac_header,
                scope_header,
                routing_header,
                ip_header,
                payload,
            })
        }
        KIND_ROBUST => {
            let curve = sig_curve.curve();
            let mac_header = r.array("mac header")?;
            let scope_header = ScopeHeader::read(params, &mut r)?;
            let routing_header = r.array("routing header")?;
            let ip_header = r.array("ip header")?;
            let expected = [
                2 * scope_header.coding_report.len(),
                3 * scope_header.reception_reports.len(),
                3 * scope_header.ack_reports.len(),
            ];
            let mut sections = Vec::new();
            for want in expected {
                let n = r.u16("header signature")? as usize;
                if n != want {
                    return Err(PacketError::Malformed {
                        section: "header signature",
                        detail: format!("{n} signatures for {want} fields"),
                    });
                }
                let mut sigs = Vec::with_capacity(n);
                for _ in 0..n {
                    sigs.push(r.signature(&curve, "header signature")?);
                }
                sections.push(sigs);
            }
            let header_sig = SignScope {
                sign_ack: sections.pop().unwrap(),
                sign_report: sections.pop().unwrap(),
                sign_encode: sections.pop().unwrap(),
            };
            let n_blocks = r.u8("payload signature")? as usize;
            if n_blocks != scope_header.coding_report.len() {
                return Err(PacketError::Malformed {
                    section: "payload signature",
                    detail: format!(
                        "{n_blocks} signature blocks for {} coded components",
                        scope_header.coding_report.len()
                    ),
                });
            }
            let mut payload_sigs = Vec::with_capacity(n_blocks);
            for _ in 0..n_blocks {
                let n = r.u8("payload signature")? as usize;
                let mut sigs = Vec::with_capacity(n);
                for _ in 0..n {
                    sigs.push(r.signature(&curve, "payload signature")?);
                }
                payload_sigs.push(SignPayload { sigs });
            }
            let payload = read_payload(params, &mut r)?;
            Packet::Robust(RobustPacket {
                mac_header,
                scope_header,
                routing_header,
                ip_header,
                header_sig,
                payload_sigs,
                payload,
            })
        }
        other => return Err(PacketError::UnknownKind(other)),
    };
    if r.pos != bytes.len() {
        return Err(PacketError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(packet)
}

fn push_count(out: &mut Vec<u8>, count: usize, section: &'static str) -> Result<(), PacketError> {
    if count > u8::MAX as usize {
        return Err(PacketError::SectionOverflow { section, count });
    }
    out.push(count as u8);
    Ok(())
}

fn write_payload(out: &mut Vec<u8>, payload: &[Ciphertext]) -> Result<(), PacketError> {
    push_count(out, payload.len(), "payload")?;
    for ct in payload {
        out.extend_from_slice(&ct.to_bytes());
    }
    Ok(())
}

fn read_payload(params: &GroupParams, r: &mut Reader<'_>) -> Result<Vec<Ciphertext>, PacketError> {
    let n = r.u8("payload")? as usize;
    let mut payload = Vec::with_capacity(n);
    for _ in 0..n {
        payload.push(r.ciphertext(params, "payload")?);
    }
    Ok(payload)
}

/// The fixed seed-0 robust packet whose serialization is pinned by the
/// committed golden file: B-163 ciphertexts, P-384 signatures, all key
/// material and payload bytes drawn from a seed-0 stream.
pub fn golden_robust_packet_bytes() -> Vec<u8> {
    use crate::auth::{sig_keygen, sign_header, sign_payload, SigCurveId};
    use crate::group::{b163, split_into_chunks};
    use crate::he::{encrypt, keygen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    let params = b163();
    let sig_curve = SigCurveId::P384;
    let mut rng = ChaCha12Rng::seed_from_u64(0);
    let he_kp = keygen(&params, &mut rng);
    let sig_kp = sig_keygen(sig_curve, &mut rng);
    let fk = FlowKey::random(&mut rng);

    let header = CopeHeader {
        coding_report: vec![CodingEntry {
            pkt_id: 0x0001_0000,
            next_hop: NodeId(3),
        }],
        reception_reports: vec![ReceptionEntry {
            src_ip: NodeId(1),
            last_pkt: 0x0001_0000,
            bitmap: [0, 1, 0, 0, 0, 1, 0, 0],
        }],
        ack_reports: vec![AckEntry {
            neighbor: NodeId(2),
            last_ack: 0x0002_0000,
            ack_map: [0, 0, 2, 0, 0, 0, 2, 0],
        }],
    };
    let scope_header =
        encrypt_header(&params, &header, &fk, &he_kp.pk).expect("golden header encrypts");
    let payload_bytes: Vec<u8> = (0..40).map(|_| rng.gen()).collect();
    let payload: Vec<Ciphertext> = split_into_chunks(&params, &payload_bytes)
        .expect("golden payload splits")
        .iter()
        .map(|chunk| {
            let point = crate::group::encode_chunk(&params, chunk).expect("golden chunk encodes");
            encrypt(
                &params,
                &he_kp.pk,
                &point,
                &crate::group::Scalar::random_nonzero(&params.n, &mut rng),
            )
            .expect("golden chunk encrypts")
        })
        .collect();
    let header_sig = sign_header(&sig_kp, &scope_header, &mut rng);
    let payload_sigs = vec![sign_payload(&sig_kp, &payload, &mut rng)];
    let packet = RobustPacket {
        mac_header: [0; MAC_HEADER_LEN],
        scope_header,
        routing_header: [0; ROUTING_HEADER_LEN],
        ip_header: [0; IP_HEADER_LEN],
        header_sig,
        payload_sigs,
        payload,
    };
    packet
        .to_bytes(&sig_curve.curve())
        .expect("golden packet serializes")
}

/// Byte cursor with section-aware errors.
pub struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8], PacketError> {
        if self.remaining() < n {
            return Err(PacketError::Truncated { section });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub fn u8(&mut self, section: &'static str) -> Result<u8, PacketError> {
        Ok(self.take(1, section)?[0])
    }

    pub fn u16(&mut self, section: &'static str) -> Result<u16, PacketError> {
        Ok(u16::from_be_bytes(self.take(2, section)?.try_into().unwrap()))
    }

    pub fn u32(&mut self, section: &'static str) -> Result<u32, PacketError> {
        Ok(u32::from_be_bytes(self.take(4, section)?.try_into().unwrap()))
    }

    pub fn array<const N: usize>(&mut self, section: &'static str) -> Result<[u8; N], PacketError> {
        Ok(self.take(N, section)?.try_into().unwrap())
    }

    fn ciphertext(
        &mut self,
        params: &GroupParams,
        section: &'static str,
    ) -> Result<Ciphertext, PacketError> {
        match Ciphertext::read_from(params, &self.bytes[self.pos..]) {
            Ok((ct, used)) => {
                self.pos += used;
                Ok(ct)
            }
            Err(e) => Err(PacketError::Malformed {
                section,
                detail: e.to_string(),
            }),
        }
    }

    fn signature(
        &mut self,
        curve: &PrimeCurve,
        section: &'static str,
    ) -> Result<Signature, PacketError> {
        let bytes = self.take(2 * curve.scalar_len(), section)?;
        Signature::from_bytes(curve, bytes).ok_or(PacketError::Malformed {
            section,
            detail: "bad signature width".into(),
        })
    }
}

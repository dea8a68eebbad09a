//! Coding-condition evaluation and payload coding.
//!
//! The plaintext condition is the next-hop/previous-hop/neighbor predicate
//! an intersecting node checks before XOR-coding two flows. The secure
//! variant runs the same predicate over encrypted node ids: the two flow
//! endpoints exchange deterministically encrypted lists through the
//! intersecting node, each re-encrypts the peer's list under both keys,
//! and the intersecting node compares ciphertexts by testing whether
//! differences are the identity ciphertext. It never holds a key and never
//! sees a node id in the clear.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::group::{decode_chunk, encode_chunk, GroupError, GroupParams, PlainChunk, Point};
use crate::he::{
    ct_add, ct_sub, decrypt, encrypt_det, twice_encrypt_det, Ciphertext, FlowKey, HeError,
    KeyPair, PublicKey,
};
use crate::sim::{FlowSpec, Topology};
use crate::NodeId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodingError {
    #[error("node {0} is not on flow {1}")]
    NodeNotOnFlow(NodeId, u32),
    #[error("chunk lists of lengths {0} and {1} cannot be coded")]
    ChunkCountMismatch(usize, usize),
    #[error("residual ciphertext is not a single-layer ciphertext")]
    ResidualNotSingleLayer,
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    He(#[from] HeError),
}

/// Hop sets of one node on one flow: next hops, previous hops, and each
/// previous hop's neighbor set.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HopSets {
    pub nh: BTreeSet<NodeId>,
    pub ph: BTreeSet<NodeId>,
    pub nb_ph: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl HopSets {
    /// Union of all previous hops' neighbor sets.
    pub fn nb_union(&self) -> BTreeSet<NodeId> {
        self.nb_ph.values().flatten().copied().collect()
    }
}

/// Reads a node's next/previous hops off the flow path and the previous
/// hops' neighbor sets off the topology.
pub fn compute_hop_sets(
    topo: &Topology,
    flow: &FlowSpec,
    node: NodeId,
) -> Result<HopSets, CodingError> {
    let pos = flow
        .path
        .iter()
        .position(|&n| n == node)
        .ok_or(CodingError::NodeNotOnFlow(node, flow.id.0))?;
    let mut nh = BTreeSet::new();
    if pos + 1 < flow.path.len() {
        nh.insert(flow.path[pos + 1]);
    }
    let mut ph = BTreeSet::new();
    if pos > 0 {
        ph.insert(flow.path[pos - 1]);
    }
    let nb_ph = ph
        .iter()
        .map(|&p| (p, topo.neighbors(p)))
        .collect();
    Ok(HopSets { nh, ph, nb_ph })
}

/// The coding condition: packets of two flows crossing at one node may be
/// coded iff each flow's next hops are the other's previous hops or lie
/// among the other's previous hops' neighbors. Subset is non-strict.
pub fn coding_condition(hs_i: &HopSets, hs_j: &HopSets) -> bool {
    let clause = |a: &HopSets, b: &HopSets| {
        a.nh.is_subset(&b.nb_union()) || a.nh == b.ph
    };
    clause(hs_i, hs_j) && clause(hs_j, hs_i)
}

// ---------------------------------------------------------------------------
// encrypted list comparisons
// ---------------------------------------------------------------------------

/// Counts cross pairs whose difference is the identity ciphertext and
/// requires the count to equal both list sizes. On duplicate-free lists
/// this is exactly set equality.
pub fn equal_list(params: &GroupParams, lx: &[Ciphertext], ly: &[Ciphertext]) -> bool {
    let mut count = 0usize;
    for x in lx {
        for y in ly {
            if matches!(ct_sub(params, x, y), Ok(d) if d.is_zero()) {
                count += 1;
            }
        }
    }
    count == lx.len() && count == ly.len()
}

/// True iff every element of `la` matches (identity difference) some
/// element of `lb`. The empty list is a subset of anything.
pub fn subset_list(params: &GroupParams, la: &[Ciphertext], lb: &[Ciphertext]) -> bool {
    la.iter().all(|x| {
        lb.iter()
            .any(|y| matches!(ct_sub(params, x, y), Ok(d) if d.is_zero()))
    })
}

/// Plaintext mirror of [`equal_list`]'s cross-pair counting, the oracle
/// the encrypted comparison must agree with (duplicates included).
pub fn equal_list_plain(lx: &[NodeId], ly: &[NodeId]) -> bool {
    let count = lx
        .iter()
        .map(|x| ly.iter().filter(|y| *y == x).count())
        .sum::<usize>();
    count == lx.len() && count == ly.len()
}

/// Plaintext mirror of [`subset_list`].
pub fn subset_list_plain(la: &[NodeId], lb: &[NodeId]) -> bool {
    la.iter().all(|x| lb.contains(x))
}

// ---------------------------------------------------------------------------
// secure coding-condition exchange
// ---------------------------------------------------------------------------

/// One endpoint's view for the exchange: its flow's plaintext hop sets at
/// the intersecting node, its own key pair, the peer's public key, and the
/// pair secret both endpoints share.
pub struct ConditionEndpoint {
    pub node: NodeId,
    pub hop_sets: HopSets,
    pub kp: KeyPair,
    pub peer_pk: PublicKey,
    pub pair_key: FlowKey,
}

/// One relayed message as the intersecting node sees it.
#[derive(Clone, Debug, Serialize)]
pub struct TranscriptEntry {
    pub from: NodeId,
    pub to: NodeId,
    pub label: String,
    pub bytes: String,
}

/// Everything that crossed the intersecting node during one exchange.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }

    /// Raw bytes of every relayed message, for adversary byte scans.
    pub fn all_bytes(&self) -> Vec<u8> {
        self.entries
            .iter()
            .flat_map(|e| hex::decode(&e.bytes).expect("transcript hex"))
            .collect()
    }
}

fn node_point(params: &GroupParams, id: NodeId) -> Result<Point, CodingError> {
    let chunk = PlainChunk::new(id.0.to_be_bytes().to_vec(), params.field.m())?;
    Ok(encode_chunk(params, &chunk)?)
}

/// The three list groups one endpoint contributes: its flow's NH, PH and
/// flattened neighbor sets at the intersecting node.
fn list_groups(hs: &HopSets) -> [Vec<NodeId>; 3] {
    [
        hs.nh.iter().copied().collect(),
        hs.ph.iter().copied().collect(),
        hs.nb_union().iter().copied().collect(),
    ]
}

struct RelayedLists {
    /// Twice-encrypted NH, PH, NB lists under the endpoint key pair.
    twice: [Vec<Ciphertext>; 3],
}

/// First-layer encryption under the peer's key, relay, peer decryption and
/// canonical re-encryption under both keys. `owner` contributes the lists;
/// `peer` rebuilds them twice-encrypted.
fn relay_one_side(
    params: &GroupParams,
    relay: NodeId,
    owner: &ConditionEndpoint,
    peer: &ConditionEndpoint,
    transcript: &mut Transcript,
) -> Result<RelayedLists, CodingError> {
    const LABELS: [&str; 3] = ["next-hop list", "prev-hop list", "neighbor list"];
    let groups = list_groups(&owner.hop_sets);
    let mut twice: [Vec<Ciphertext>; 3] = Default::default();
    for (slot, (ids, label)) in groups.iter().zip(LABELS).enumerate() {
        // owner -> relay: single layer under the peer's public key
        let mut first_layer = Vec::with_capacity(ids.len());
        for &id in ids {
            let point = node_point(params, id)?;
            first_layer.push(encrypt_det(params, &owner.peer_pk, &point, &owner.pair_key)?);
        }
        let wire: Vec<u8> = first_layer.iter().flat_map(|c| c.to_bytes()).collect();
        transcript.entries.push(TranscriptEntry {
            from: owner.node,
            to: relay,
            label: format!("{label} (single layer)"),
            bytes: hex::encode(&wire),
        });
        // relay -> peer: forwarded unchanged
        transcript.entries.push(TranscriptEntry {
            from: relay,
            to: peer.node,
            label: format!("{label} (relayed)"),
            bytes: hex::encode(&wire),
        });
        // peer decrypts each element and rebuilds the canonical
        // two-layer ciphertext under both endpoint keys
        let mut rebuilt = Vec::with_capacity(first_layer.len());
        for ct in &first_layer {
            let point = decrypt(params, &peer.kp, ct)?;
            rebuilt.push(twice_encrypt_det(
                params,
                &peer.kp.pk,
                &peer.peer_pk,
                &point,
                &peer.pair_key,
            )?);
        }
        let wire: Vec<u8> = rebuilt.iter().flat_map(|c| c.to_bytes()).collect();
        transcript.entries.push(TranscriptEntry {
            from: peer.node,
            to: relay,
            label: format!("{label} (twice encrypted)"),
            bytes: hex::encode(&wire),
        });
        twice[slot] = rebuilt;
    }
    Ok(RelayedLists { twice })
}

/// Runs the full exchange for one flow pair at the intersecting node
/// `relay` and evaluates the coding condition over the twice-encrypted
/// lists. Returns the verdict plus the relay's transcript.
pub fn secure_coding_condition(
    params: &GroupParams,
    relay: NodeId,
    side_i: &ConditionEndpoint,
    side_j: &ConditionEndpoint,
) -> Result<(bool, Transcript), CodingError> {
    let mut transcript = Transcript::default();
    let from_i = relay_one_side(params, relay, side_i, side_j, &mut transcript)?;
    let from_j = relay_one_side(params, relay, side_j, side_i, &mut transcript)?;
    let [nh_i, ph_i, nb_i] = from_i.twice;
    let [nh_j, ph_j, nb_j] = from_j.twice;
    let clause_i = subset_list(params, &nh_i, &nb_j) || equal_list(params, &nh_i, &ph_j);
    let clause_j = subset_list(params, &nh_j, &nb_i) || equal_list(params, &nh_j, &ph_i);
    Ok((clause_i && clause_j, transcript))
}

// ---------------------------------------------------------------------------
// payload coding
// ---------------------------------------------------------------------------

/// The additive-zero ciphertext used to pad shorter chunk lists: adding it
/// leaves any ciphertext byte-identical, so destinations can reconstruct
/// padded contributions without knowing anything the coder did.
pub fn zero_ciphertext() -> Ciphertext {
    Ciphertext {
        r: Point::Identity,
        s: Point::Identity,
        layers: Vec::new(),
    }
}

/// Extends a chunk list to `target` chunks with additive-zero padding.
pub fn pad_chunks(chunks: &mut Vec<Ciphertext>, target: usize) {
    while chunks.len() < target {
        chunks.push(zero_ciphertext());
    }
}

/// Chunkwise homomorphic sum of several packets' chunk lists. Lists must
/// already be length-equalized.
pub fn code_payload(
    params: &GroupParams,
    chunk_lists: &[Vec<Ciphertext>],
) -> Result<Vec<Ciphertext>, CodingError> {
    let Some(first) = chunk_lists.first() else {
        return Ok(Vec::new());
    };
    for l in chunk_lists {
        if l.len() != first.len() {
            return Err(CodingError::ChunkCountMismatch(first.len(), l.len()));
        }
    }
    let mut coded = first.clone();
    for list in &chunk_lists[1..] {
        for (acc, ct) in coded.iter_mut().zip(list) {
            *acc = ct_add(params, acc, ct)?;
        }
    }
    Ok(coded)
}

/// Removes known contributions chunkwise, leaving each slot's residual
/// ciphertext. Destinations decrypt these; relays forward them as-is.
pub fn strip_contributions(
    params: &GroupParams,
    coded: &[Ciphertext],
    known: &[Vec<Ciphertext>],
) -> Result<Vec<Ciphertext>, CodingError> {
    let mut residual = coded.to_vec();
    for list in known {
        if list.len() != residual.len() {
            return Err(CodingError::ChunkCountMismatch(residual.len(), list.len()));
        }
        for (acc, ct) in residual.iter_mut().zip(list) {
            *acc = ct_sub(params, acc, ct)?;
        }
    }
    Ok(residual)
}

/// Full destination-side decode: strip every known contribution, decrypt
/// the residual with the destination key, drop padding slots, and decode
/// the message points back to chunks.
pub fn decode_payload(
    params: &GroupParams,
    coded: &[Ciphertext],
    known: &[Vec<Ciphertext>],
    kp_self: &KeyPair,
) -> Result<Vec<PlainChunk>, CodingError> {
    let residual = strip_contributions(params, coded, known)?;
    let mut chunks = Vec::new();
    for ct in &residual {
        if ct.is_zero() && ct.layers.is_empty() {
            continue; // padding slot for a shorter own contribution
        }
        let point = decrypt(params, kp_self, ct).map_err(|e| match e {
            HeError::NotSingleLayer => CodingError::ResidualNotSingleLayer,
            other => CodingError::He(other),
        })?;
        if point.is_identity() {
            continue; // decrypted padding
        }
        chunks.push(decode_chunk(params, &point)?);
    }
    Ok(chunks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{b163, toy_params, Scalar};
    use crate::he::{encrypt, keygen};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn hs(nh: &[u32], ph: &[u32], nb: &[(u32, &[u32])]) -> HopSets {
        HopSets {
            nh: nh.iter().map(|&n| NodeId(n)).collect(),
            ph: ph.iter().map(|&n| NodeId(n)).collect(),
            nb_ph: nb
                .iter()
                .map(|&(p, ns)| (NodeId(p), ns.iter().map(|&n| NodeId(n)).collect()))
                .collect(),
        }
    }

    #[test]
    fn reverse_flows_satisfy_the_condition() {
        // flows 1->2->3 and 3->2->1 at node 2 in a chain
        let hs_1 = hs(&[3], &[1], &[(1, &[2])]);
        let hs_2 = hs(&[1], &[3], &[(3, &[2])]);
        assert!(coding_condition(&hs_1, &hs_2));
        assert!(coding_condition(&hs_2, &hs_1));
    }

    #[test]
    fn same_direction_flows_fail_the_condition() {
        let hs_1 = hs(&[3], &[1], &[(1, &[2])]);
        let hs_2 = hs(&[3], &[1], &[(1, &[2])]);
        assert!(!coding_condition(&hs_1, &hs_2));
    }

    #[test]
    fn neighbor_branch_can_satisfy_condition() {
        // next hops inside the other side's previous-hop neighborhood
        let hs_1 = hs(&[4], &[1], &[(1, &[2, 5])]);
        let hs_2 = hs(&[5], &[3], &[(3, &[2, 4])]);
        assert!(coding_condition(&hs_1, &hs_2));
    }

    #[test]
    fn plain_list_oracles() {
        let a = [NodeId(1), NodeId(2)];
        let b = [NodeId(2), NodeId(1)];
        assert!(equal_list_plain(&a, &b));
        assert!(!equal_list_plain(&a, &a[..1]));
        assert!(subset_list_plain(&a[..1], &a));
        assert!(subset_list_plain(&[], &a));
        assert!(!subset_list_plain(&[NodeId(9)], &a));
        // duplicates follow the cross-count semantics
        let dup = [NodeId(1), NodeId(1)];
        assert!(!equal_list_plain(&dup, &dup)); // count = 4 != 2
    }

    fn det_pair(
        params: &GroupParams,
        rng: &mut StdRng,
    ) -> (KeyPair, KeyPair, FlowKey) {
        let a = keygen(params, rng);
        let b = keygen(params, rng);
        (a, b, FlowKey::random(rng))
    }

    fn twice_list(
        params: &GroupParams,
        ids: &[NodeId],
        a: &KeyPair,
        b: &KeyPair,
        fk: &FlowKey,
    ) -> Vec<Ciphertext> {
        ids.iter()
            .map(|&id| {
                let p = node_point(params, id).unwrap();
                twice_encrypt_det(params, &a.pk, &b.pk, &p, fk).unwrap()
            })
            .collect()
    }

    #[test]
    fn encrypted_lists_agree_with_plain_oracles() {
        let g = b163();
        let mut rng = StdRng::seed_from_u64(31);
        let (a, b, fk) = det_pair(&g, &mut rng);
        for _ in 0..60 {
            let mk = |rng: &mut StdRng| -> Vec<NodeId> {
                (0..rng.gen_range(0..4)).map(|_| NodeId(rng.gen_range(0..5))).collect()
            };
            let (x, y) = (mk(&mut rng), mk(&mut rng));
            let (ex, ey) = (
                twice_list(&g, &x, &a, &b, &fk),
                twice_list(&g, &y, &a, &b, &fk),
            );
            assert_eq!(equal_list(&g, &ex, &ey), equal_list_plain(&x, &y), "{x:?} {y:?}");
            assert_eq!(subset_list(&g, &ex, &ey), subset_list_plain(&x, &y), "{x:?} {y:?}");
        }
    }

    #[test]
    fn equal_list_trivial_cases() {
        let g = b163();
        let mut rng = StdRng::seed_from_u64(32);
        let (a, b, fk) = det_pair(&g, &mut rng);
        let single = twice_list(&g, &[NodeId(3)], &a, &b, &fk);
        assert!(equal_list(&g, &single, &single));
        let two = twice_list(&g, &[NodeId(3), NodeId(4)], &a, &b, &fk);
        assert!(!equal_list(&g, &single, &two));
    }

    #[test]
    fn secure_condition_matches_plain_on_samples() {
        let g = b163();
        let mut rng = StdRng::seed_from_u64(33);
        for trial in 0..8 {
            let mk_hs = |rng: &mut StdRng| {
                let nh: BTreeSet<NodeId> =
                    (0..rng.gen_range(1..3)).map(|_| NodeId(rng.gen_range(0..5))).collect();
                let ph: BTreeSet<NodeId> =
                    (0..rng.gen_range(1..3)).map(|_| NodeId(rng.gen_range(0..5))).collect();
                let nb_ph = ph
                    .iter()
                    .map(|&p| {
                        (
                            p,
                            (0..rng.gen_range(1..3))
                                .map(|_| NodeId(rng.gen_range(0..5)))
                                .collect(),
                        )
                    })
                    .collect();
                HopSets { nh, ph, nb_ph }
            };
            let (hs_i, hs_j) = (mk_hs(&mut rng), mk_hs(&mut rng));
            let kp_a = keygen(&g, &mut rng);
            let kp_b = keygen(&g, &mut rng);
            let fk = FlowKey::random(&mut rng);
            let side_i = ConditionEndpoint {
                node: NodeId(1),
                hop_sets: hs_i.clone(),
                kp: kp_a.clone(),
                peer_pk: kp_b.pk.clone(),
                pair_key: fk.clone(),
            };
            let side_j = ConditionEndpoint {
                node: NodeId(3),
                hop_sets: hs_j.clone(),
                kp: kp_b,
                peer_pk: kp_a.pk,
                pair_key: fk,
            };
            let (secure, transcript) =
                secure_coding_condition(&g, NodeId(2), &side_i, &side_j).unwrap();
            assert_eq!(secure, coding_condition(&hs_i, &hs_j), "trial {trial}");
            assert!(!transcript.entries.is_empty());
        }
    }

    #[test]
    fn transcript_carries_no_plain_node_ids() {
        let g = b163();
        let mut rng = StdRng::seed_from_u64(34);
        let hs_i = hs(&[3], &[1], &[(1, &[2])]);
        let hs_j = hs(&[1], &[3], &[(3, &[2])]);
        let kp_a = keygen(&g, &mut rng);
        let kp_b = keygen(&g, &mut rng);
        let fk = FlowKey::random(&mut rng);
        let side_i = ConditionEndpoint {
            node: NodeId(1),
            hop_sets: hs_i,
            kp: kp_a.clone(),
            peer_pk: kp_b.pk.clone(),
            pair_key: fk.clone(),
        };
        let side_j = ConditionEndpoint {
            node: NodeId(3),
            hop_sets: hs_j,
            kp: kp_b,
            peer_pk: kp_a.pk,
            pair_key: fk,
        };
        let (verdict, transcript) =
            secure_coding_condition(&g, NodeId(2), &side_i, &side_j).unwrap();
        assert!(verdict);
        let bytes = transcript.all_bytes();
        for id in 1u32..=3 {
            let pattern = id.to_be_bytes();
            let found = bytes.windows(4).any(|w| w == pattern);
            assert!(!found, "plaintext id {id} leaked into the transcript");
        }
        // and the JSON export is well-formed
        assert!(transcript.to_json().contains("twice encrypted"));
    }

    #[test]
    fn code_then_strip_recovers_originals_all_orders() {
        let g = toy_params();
        let mut rng = StdRng::seed_from_u64(35);
        for n in 1..=4usize {
            let kps: Vec<KeyPair> = (0..n).map(|i| keygen(&g, &mut rng)).collect();
            let lists: Vec<Vec<Ciphertext>> = (0..n)
                .map(|i| {
                    (0..3)
                        .map(|_| {
                            encrypt(
                                &g,
                                &kps[i].pk,
                                &g.random_point(&mut rng),
                                &Scalar::random_nonzero(&g.n, &mut rng),
                            )
                            .unwrap()
                        })
                        .collect()
                })
                .collect();
            let coded = code_payload(&g, &lists).unwrap();
            if n == 1 {
                assert_eq!(coded, lists[0]);
            }
            // removing all but one, in every leave-one-out order
            for keep in 0..n {
                let known: Vec<Vec<Ciphertext>> = (0..n)
                    .filter(|&i| i != keep)
                    .map(|i| lists[i].clone())
                    .collect();
                let residual = strip_contributions(&g, &coded, &known).unwrap();
                assert_eq!(residual, lists[keep]);
            }
        }
    }

    #[test]
    fn zero_padding_is_transparent() {
        let g = toy_params();
        let mut rng = StdRng::seed_from_u64(36);
        let kp_a = keygen(&g, &mut rng);
        let kp_b = keygen(&g, &mut rng);
        let list_a: Vec<Ciphertext> = (0..3)
            .map(|_| {
                encrypt(
                    &g,
                    &kp_a.pk,
                    &g.random_point(&mut rng),
                    &Scalar::random_nonzero(&g.n, &mut rng),
                )
                .unwrap()
            })
            .collect();
        let mut list_b: Vec<Ciphertext> = vec![encrypt(
            &g,
            &kp_b.pk,
            &g.random_point(&mut rng),
            &Scalar::random_nonzero(&g.n, &mut rng),
        )
        .unwrap()];
        let original_b = list_b.clone();
        pad_chunks(&mut list_b, list_a.len());
        let coded = code_payload(&g, &[list_a.clone(), list_b.clone()]).unwrap();
        // destination A re-pads B's known short list itself and recovers
        // its own ciphertexts bit-exactly
        let residual_a = strip_contributions(&g, &coded, &[list_b]).unwrap();
        assert_eq!(residual_a, list_a);
        // destination B re-pads A's full-length list; its own padded slots
        // come back as the additive zero
        let residual_b = strip_contributions(&g, &coded, &[list_a]).unwrap();
        assert_eq!(residual_b[0], original_b[0]);
        assert!(residual_b[1..].iter().all(|c| c.is_zero() && c.layers.is_empty()));
    }

    #[test]
    fn decode_payload_end_to_end_with_padding() {
        // real framed chunks on B-163, one flow shorter than the other
        let g = b163();
        let mut rng = StdRng::seed_from_u64(38);
        let kp_a = keygen(&g, &mut rng);
        let kp_b = keygen(&g, &mut rng);
        let payload_a: Vec<u8> = (0..40).map(|_| rng.gen()).collect(); // 3 chunks
        let payload_b: Vec<u8> = (0..10).map(|_| rng.gen()).collect(); // 1 chunk
        let enc = |payload: &[u8], pk: &PublicKey, rng: &mut StdRng| -> Vec<Ciphertext> {
            crate::group::split_into_chunks(&g, payload)
                .unwrap()
                .iter()
                .map(|c| {
                    encrypt(
                        &g,
                        pk,
                        &encode_chunk(&g, c).unwrap(),
                        &Scalar::random_nonzero(&g.n, rng),
                    )
                    .unwrap()
                })
                .collect()
        };
        // A sends to B (encrypted under B's key) and vice versa
        let list_to_b = enc(&payload_a, &kp_b.pk, &mut rng);
        let mut list_to_a = enc(&payload_b, &kp_a.pk, &mut rng);
        let known_for_b = list_to_a.clone();
        pad_chunks(&mut list_to_a, list_to_b.len());
        let coded = code_payload(&g, &[list_to_b.clone(), list_to_a]).unwrap();

        // B knows what it sent toward A and decodes its own payload
        let mut known = known_for_b;
        pad_chunks(&mut known, coded.len());
        let chunks = decode_payload(&g, &coded, &[known], &kp_b).unwrap();
        assert_eq!(crate::group::reassemble_chunks(&chunks), payload_a);

        // A likewise
        let chunks = decode_payload(&g, &coded, &[list_to_b], &kp_a).unwrap();
        assert_eq!(crate::group::reassemble_chunks(&chunks), payload_b);
    }

    #[test]
    fn chunk_count_mismatch_rejected() {
        let g = toy_params();
        let mut rng = StdRng::seed_from_u64(37);
        let kp = keygen(&g, &mut rng);
        let ct = encrypt(
            &g,
            &kp.pk,
            &g.random_point(&mut rng),
            &Scalar::random_nonzero(&g.n, &mut rng),
        )
        .unwrap();
        let err = code_payload(&g, &[vec![ct.clone(), ct.clone()], vec![ct]]).unwrap_err();
        assert_eq!(err, CodingError::ChunkCountMismatch(2, 1));
    }
}

//! Bench engine and run plumbing behind the `scope` binary.
//!
//! The bench sweeps mirror the evaluation grid: payload-cipher aggregation
//! time, end-to-end run time and condition-evaluation time per scenario
//! across the four ECC sizes; signature-generation time across signature
//! counts and the two ECDSA sizes; and the combined encrypt-plus-sign
//! sweep over both key-size axes. Timings are wall-clock means over a
//! configurable number of trials (default 20); every non-timing column is
//! deterministic in the seed.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use scope_core::auth::{ecdsa_sign, sig_keygen, SigCurveId};
use scope_core::coding::{
    code_payload, compute_hop_sets, pad_chunks, secure_coding_condition, ConditionEndpoint,
};
use scope_core::group::{curve_by_bits, encode_chunk, split_into_chunks, GroupParams, Scalar};
use scope_core::he::{encrypt, keygen, Ciphertext, FlowKey, KeyPair};
use scope_core::sim::{build_scenario, run, FlowId, Mode, RunConfig, Scenario};
use scope_core::NodeId;

pub const ECC_SIZES: [u32; 4] = [163, 283, 409, 571];
pub const ECDSA_SIZES: [u32; 2] = [384, 521];
pub const SIGNATURE_COUNTS: [u32; 4] = [5, 10, 15, 20];

/// One bench cell: a metric measured at one point of the sweep grid.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRecord {
    /// Scenario id, or 0 for scenario-independent sweeps.
    pub scenario: u32,
    pub mode: String,
    pub ecc_bits: u32,
    pub ecdsa_bits: u32,
    pub metric: String,
    /// Signature count for the signature sweeps; absent otherwise.
    pub count: Option<u32>,
    pub trials: u32,
    pub seed: u64,
    pub mean_ms: f64,
}

pub const CSV_HEADER: &str = "scenario,mode,ecc_bits,ecdsa_bits,metric,count,trials,seed,mean_ms";

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.3}",
            self.scenario,
            self.mode,
            self.ecc_bits,
            self.ecdsa_bits,
            self.metric,
            self.count.map(|c| c.to_string()).unwrap_or_default(),
            self.trials,
            self.seed,
            self.mean_ms
        )
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub scenarios: Vec<u32>,
    pub ecc_sizes: Vec<u32>,
    pub ecdsa_sizes: Vec<u32>,
    pub trials: u32,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            scenarios: vec![1, 2, 3, 4],
            ecc_sizes: ECC_SIZES.to_vec(),
            ecdsa_sizes: ECDSA_SIZES.to_vec(),
            trials: 20,
            seed: 0,
        }
    }
}

pub fn seeded_payloads(scenario: &Scenario, len: usize, seed: u64) -> BTreeMap<FlowId, Vec<u8>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x70ad);
    scenario
        .flows
        .iter()
        .map(|f| (f.id, (0..len).map(|_| rng.gen()).collect()))
        .collect()
}

/// The reverse-direction flow pairs that actually code in a scenario,
/// with the nodes where they cross.
fn crossing_pairs(scenario: &Scenario) -> Vec<(FlowId, FlowId, Vec<NodeId>)> {
    let mut pairs = Vec::new();
    for (i, fi) in scenario.flows.iter().enumerate() {
        for fj in &scenario.flows[i + 1..] {
            let shared: Vec<NodeId> = fi
                .path
                .iter()
                .copied()
                .filter(|n| {
                    fj.path.contains(n)
                        && fi.path.first() != Some(n)
                        && fi.path.last() != Some(n)
                        && fj.path.first() != Some(n)
                        && fj.path.last() != Some(n)
                })
                .collect();
            if shared.is_empty() {
                continue;
            }
            let hs_i = compute_hop_sets(&scenario.topology, fi, shared[0]).unwrap();
            let hs_j = compute_hop_sets(&scenario.topology, fj, shared[0]).unwrap();
            if scope_core::coding::coding_condition(&hs_i, &hs_j) {
                pairs.push((fi.id, fj.id, shared));
            }
        }
    }
    pairs
}

struct PreparedScenario {
    scenario: Scenario,
    params: GroupParams,
    keypairs: BTreeMap<NodeId, KeyPair>,
    chunk_lists: BTreeMap<FlowId, Vec<Ciphertext>>,
    pairs: Vec<(FlowId, FlowId, Vec<NodeId>)>,
}

fn prepare(scenario_id: u32, ecc_bits: u32, seed: u64) -> PreparedScenario {
    let scenario = build_scenario(scenario_id).expect("benchmark scenario");
    let params = curve_by_bits(ecc_bits).expect("benchmark curve");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let keypairs: BTreeMap<NodeId, KeyPair> = scenario
        .topology
        .nodes()
        .map(|n| (n, keygen(&params, &mut rng)))
        .collect();
    let payloads = seeded_payloads(&scenario, 64, seed);
    let chunk_lists = scenario
        .flows
        .iter()
        .map(|f| {
            let dest_pk = &keypairs[&f.dest()].pk;
            let chunks: Vec<Ciphertext> = split_into_chunks(&params, &payloads[&f.id])
                .unwrap()
                .iter()
                .map(|c| {
                    let point = encode_chunk(&params, c).unwrap();
                    encrypt(
                        &params,
                        dest_pk,
                        &point,
                        &Scalar::random_nonzero(&params.n, &mut rng),
                    )
                    .unwrap()
                })
                .collect();
            (f.id, chunks)
        })
        .collect();
    let pairs = crossing_pairs(&scenario);
    PreparedScenario {
        scenario,
        params,
        keypairs,
        chunk_lists,
        pairs,
    }
}

fn time_trials<F: FnMut()>(trials: u32, mut body: F) -> f64 {
    let mut total_ms = 0.0;
    for _ in 0..trials {
        let start = Instant::now();
        body();
        total_ms += start.elapsed().as_secs_f64() * 1e3;
    }
    total_ms / trials as f64
}

/// Fig. 7-a shape: aggregating the payload ciphers of every coded pair.
pub fn bench_aggregate(scenario_id: u32, ecc_bits: u32, trials: u32, seed: u64) -> f64 {
    let p = prepare(scenario_id, ecc_bits, seed);
    time_trials(trials, || {
        for (fa, fb, _) in &p.pairs {
            let mut la = p.chunk_lists[fa].clone();
            let mut lb = p.chunk_lists[fb].clone();
            let target = la.len().max(lb.len());
            pad_chunks(&mut la, target);
            pad_chunks(&mut lb, target);
            let coded = code_payload(&p.params, &[la, lb]).unwrap();
            std::hint::black_box(coded);
        }
    })
}

/// Fig. 7-b shape: a full source-to-destination run, aggregation included.
pub fn bench_end_to_end(scenario_id: u32, ecc_bits: u32, trials: u32, seed: u64) -> f64 {
    let scenario = build_scenario(scenario_id).expect("benchmark scenario");
    let mut cfg = RunConfig::new(Mode::Scope);
    cfg.ecc_bits = ecc_bits;
    cfg.seed = seed;
    cfg.payloads = seeded_payloads(&scenario, 64, seed);
    time_trials(trials, || {
        let out = run(&scenario, &cfg).expect("benchmark run");
        std::hint::black_box(out.received.len());
    })
}

/// Fig. 7-c shape: every coded pair's secure condition evaluation at every
/// intersecting node it crosses.
pub fn bench_condition_eval(scenario_id: u32, ecc_bits: u32, trials: u32, seed: u64) -> f64 {
    let p = prepare(scenario_id, ecc_bits, seed);
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xC0);
    let pair_keys: BTreeMap<(FlowId, FlowId), FlowKey> = p
        .pairs
        .iter()
        .map(|&(fa, fb, _)| ((fa, fb), FlowKey::random(&mut rng)))
        .collect();
    let flows: BTreeMap<FlowId, _> = p.scenario.flows.iter().map(|f| (f.id, f.clone())).collect();
    time_trials(trials, || {
        for (fa, fb, nodes) in &p.pairs {
            for &node in nodes {
                let (flow_a, flow_b) = (&flows[fa], &flows[fb]);
                let hs_a = compute_hop_sets(&p.scenario.topology, flow_a, node).unwrap();
                let hs_b = compute_hop_sets(&p.scenario.topology, flow_b, node).unwrap();
                let side_a = ConditionEndpoint {
                    node: flow_a.source(),
                    hop_sets: hs_a,
                    kp: p.keypairs[&flow_a.source()].clone(),
                    peer_pk: p.keypairs[&flow_b.source()].pk.clone(),
                    pair_key: pair_keys[&(*fa, *fb)].clone(),
                };
                let side_b = ConditionEndpoint {
                    node: flow_b.source(),
                    hop_sets: hs_b,
                    kp: p.keypairs[&flow_b.source()].clone(),
                    peer_pk: p.keypairs[&flow_a.source()].pk.clone(),
                    pair_key: pair_keys[&(*fa, *fb)].clone(),
                };
                let verdict = secure_coding_condition(&p.params, node, &side_a, &side_b)
                    .expect("benchmark exchange");
                std::hint::black_box(verdict.0);
            }
        }
    })
}

/// Fig. 8 shape: generating `count` ECDSA signatures.
pub fn bench_signature_gen(count: u32, ecdsa_bits: u32, trials: u32, seed: u64) -> f64 {
    let curve = SigCurveId::by_bits(ecdsa_bits).expect("benchmark ECDSA curve");
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x51);
    let kp = sig_keygen(curve, &mut rng);
    let messages: Vec<Vec<u8>> = (0..count)
        .map(|_| (0..64).map(|_| rng.gen()).collect())
        .collect();
    time_trials(trials, || {
        for m in &messages {
            std::hint::black_box(ecdsa_sign(&kp, m, &mut rng));
        }
    })
}

/// Fig. 9 shape: encrypting `count` data pieces and signing each
/// encryption.
pub fn bench_enc_plus_sign(
    ecc_bits: u32,
    ecdsa_bits: u32,
    count: u32,
    trials: u32,
    seed: u64,
) -> f64 {
    let params = curve_by_bits(ecc_bits).expect("benchmark curve");
    let curve = SigCurveId::by_bits(ecdsa_bits).expect("benchmark ECDSA curve");
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xE5);
    let he_kp = keygen(&params, &mut rng);
    let sig_kp = sig_keygen(curve, &mut rng);
    let pieces: Vec<Vec<u8>> = (0..count)
        .map(|_| (0..8).map(|_| rng.gen()).collect())
        .collect();
    time_trials(trials, || {
        for piece in &pieces {
            let chunk = scope_core::group::PlainChunk::new(piece.clone(), params.field.m())
                .unwrap();
            let point = encode_chunk(&params, &chunk).unwrap();
            let ct = encrypt(
                &params,
                &he_kp.pk,
                &point,
                &Scalar::random_nonzero(&params.n, &mut rng),
            )
            .unwrap();
            std::hint::black_box(ecdsa_sign(&sig_kp, &ct.to_bytes(), &mut rng));
        }
    })
}

/// Runs the whole default grid: the Fig. 7 family (scenario x ECC size x
/// three metrics), the Fig. 8 family (signature count x ECDSA size), and
/// the Fig. 9 family (ECC x ECDSA x signature count). Rows come out in a
/// fixed sorted order.
pub fn run_bench(cfg: &BenchConfig) -> Vec<BenchRecord> {
    let mut rows = Vec::new();
    for &scenario in &cfg.scenarios {
        for &ecc in &cfg.ecc_sizes {
            for (metric, f) in [
                ("aggregate_time", bench_aggregate as fn(u32, u32, u32, u64) -> f64),
                ("end_to_end_time", bench_end_to_end),
                ("condition_eval_time", bench_condition_eval),
            ] {
                let mean_ms = f(scenario, ecc, cfg.trials, cfg.seed);
                rows.push(BenchRecord {
                    scenario,
                    mode: "scope".into(),
                    ecc_bits: ecc,
                    ecdsa_bits: 0,
                    metric: metric.into(),
                    count: None,
                    trials: cfg.trials,
                    seed: cfg.seed,
                    mean_ms,
                });
            }
        }
    }
    for &count in &SIGNATURE_COUNTS {
        for &ecdsa in &cfg.ecdsa_sizes {
            rows.push(BenchRecord {
                scenario: 0,
                mode: "robust".into(),
                ecc_bits: 0,
                ecdsa_bits: ecdsa,
                metric: "signature_gen_time".into(),
                count: Some(count),
                trials: cfg.trials,
                seed: cfg.seed,
                mean_ms: bench_signature_gen(count, ecdsa, cfg.trials, cfg.seed),
            });
        }
    }
    for &ecc in &cfg.ecc_sizes {
        for &ecdsa in &cfg.ecdsa_sizes {
            for &count in &SIGNATURE_COUNTS {
                rows.push(BenchRecord {
                    scenario: 0,
                    mode: "robust".into(),
                    ecc_bits: ecc,
                    ecdsa_bits: ecdsa,
                    metric: "enc_plus_sign_time".into(),
                    count: Some(count),
                    trials: cfg.trials,
                    seed: cfg.seed,
                    mean_ms: bench_enc_plus_sign(ecc, ecdsa, count, cfg.trials, cfg.seed),
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        (&a.metric, a.scenario, a.ecc_bits, a.ecdsa_bits, a.count).cmp(&(
            &b.metric,
            b.scenario,
            b.ecc_bits,
            b.ecdsa_bits,
            b.count,
        ))
    });
    rows
}

pub fn rows_to_csv(rows: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn rows_to_json(rows: &[BenchRecord]) -> String {
    serde_json::to_string_pretty(rows).expect("bench rows serialize")
}

//! `scope` — run the benchmark scenarios or sweep the key sizes.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scope_cli::{rows_to_csv, rows_to_json, seeded_payloads, BenchConfig};
use scope_core::sim::{build_scenario, run, AdvMode, AdversarySpec, Mode, RunConfig, Scenario};
use scope_core::NodeId;

#[derive(Parser)]
#[command(name = "scope", version, about = "COPE/SCOPE network-coding simulator and bench")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and print delivery, counters and adversary results.
    Run(RunArgs),
    /// Sweep key sizes and emit one timing row per bench cell.
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Built-in scenario id (1..4) or a scenario JSON file path.
    #[arg(long)]
    scenario: String,
    /// Protocol stack: cope, scope or robust.
    #[arg(long, default_value = "cope")]
    mode: String,
    /// Homomorphic-cipher curve size: 163, 283, 409 or 571.
    #[arg(long, default_value_t = 163)]
    ecc_bits: u32,
    /// Signature curve size: 384 or 521.
    #[arg(long, default_value_t = 384)]
    ecdsa_bits: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Malicious payload substitution in one relayed packet.
    #[arg(long)]
    tamper: bool,
    /// Attach an adversary: NODE:hbc or NODE:malicious.
    #[arg(long)]
    adversary: Option<String>,
    /// Random payload bytes per flow.
    #[arg(long, default_value_t = 64)]
    payload_len: usize,
    /// Disable coding (baseline transmission counts).
    #[arg(long)]
    no_coding: bool,
    /// Export format for --out: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Write the transmission log (and adversary report) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Scenario ids to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 3, 4])]
    scenarios: Vec<u32>,
    /// ECC sizes to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [163u32, 283, 409, 571])]
    ecc_bits: Vec<u32>,
    /// ECDSA sizes to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [384u32, 521])]
    ecdsa_bits: Vec<u32>,
    /// Trials per cell; the mean is reported.
    #[arg(long, default_value_t = 20)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    eprintln!("run `scope --help` for usage");
    ExitCode::from(2)
}

fn runtime_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Bench(args) => cmd_bench(args),
    }
}

fn load_scenario(spec: &str) -> Result<Scenario, ExitCode> {
    if let Ok(id) = spec.parse::<u32>() {
        return build_scenario(id).map_err(|e| usage_error(&e.to_string()));
    }
    let path = PathBuf::from(spec);
    if !path.exists() {
        return Err(usage_error(&format!(
            "scenario {spec:?} is neither an id in 1..4 nor an existing file"
        )));
    }
    Scenario::from_file(&path).map_err(|e| runtime_error(&e.to_string()))
}

fn parse_adversary(spec: &str) -> Result<AdversarySpec, ExitCode> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [node, mode] = parts.as_slice() else {
        return Err(usage_error("adversary must be NODE:hbc or NODE:malicious"));
    };
    let node = node
        .parse::<u32>()
        .map_err(|_| usage_error("adversary node must be a numeric id"))?;
    let mode = match *mode {
        "hbc" | "honest-but-curious" => AdvMode::HonestButCurious,
        "malicious" => AdvMode::Malicious,
        other => return Err(usage_error(&format!("unknown adversary mode {other:?}"))),
    };
    Ok(AdversarySpec {
        node: NodeId(node),
        mode,
    })
}

fn write_or_print(out: &Option<PathBuf>, content: &str) -> Result<(), ExitCode> {
    match out {
        Some(path) => {
            let mut f = std::fs::File::create(path)
                .map_err(|e| runtime_error(&format!("cannot create {}: {e}", path.display())))?;
            f.write_all(content.as_bytes())
                .map_err(|e| runtime_error(&format!("cannot write {}: {e}", path.display())))?;
            Ok(())
        }
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let mode: Mode = match args.mode.parse() {
        Ok(m) => m,
        Err(e) => return usage_error(&e),
    };
    if ![163, 283, 409, 571].contains(&args.ecc_bits) {
        return usage_error(&format!("ecc-bits {} not in {{163,283,409,571}}", args.ecc_bits));
    }
    if ![384, 521].contains(&args.ecdsa_bits) {
        return usage_error(&format!("ecdsa-bits {} not in {{384,521}}", args.ecdsa_bits));
    }
    if args.payload_len == 0 {
        return usage_error("payload-len must be positive");
    }
    let mut cfg = RunConfig::new(mode);
    cfg.ecc_bits = args.ecc_bits;
    cfg.ecdsa_bits = args.ecdsa_bits;
    cfg.seed = args.seed;
    cfg.coding = !args.no_coding;
    cfg.tamper = args.tamper;
    cfg.payloads = seeded_payloads(&scenario, args.payload_len, args.seed);
    if let Some(spec) = &args.adversary {
        match parse_adversary(spec) {
            Ok(a) => cfg.adversary = Some(a),
            Err(code) => return code,
        }
    }

    let outcome = match run(&scenario, &cfg) {
        Ok(o) => o,
        Err(e) => return runtime_error(&e.to_string()),
    };

    println!(
        "scenario={} mode={} ecc={} ecdsa={} seed={} coding={}",
        args.scenario,
        args.mode,
        args.ecc_bits,
        args.ecdsa_bits,
        args.seed,
        if cfg.coding { "on" } else { "off" }
    );
    println!(
        "transmissions={} unicast={} broadcast={} coded_packets={} dropped_by_auth={}",
        outcome.log.total_transmissions(),
        outcome.log.unicast_count,
        outcome.log.broadcast_count,
        outcome.log.coded_packet_count,
        outcome.log.dropped_by_auth_count
    );
    for f in &scenario.flows {
        match outcome.received.get(&f.id) {
            Some(bytes) if bytes == &cfg.payloads[&f.id] => {
                println!("flow {}: delivered ok ({} bytes)", f.id, bytes.len())
            }
            Some(bytes) => println!(
                "flow {}: DELIVERED CORRUPTED PAYLOAD ({} bytes)",
                f.id,
                bytes.len()
            ),
            None => println!(
                "flow {}: not delivered ({})",
                f.id,
                outcome
                    .delivery_failures
                    .get(&f.id)
                    .map(String::as_str)
                    .unwrap_or("unknown")
            ),
        }
    }
    if let Some(report) = &outcome.adversary {
        let recovered = report.inference_attempts.iter().filter(|a| a.recovered).count();
        println!(
            "adversary node={} mode={} observations={} inferences_recovered={} tampers={} detected={}",
            report.node,
            report.mode,
            report.observations.len(),
            recovered,
            report.tamper_attempts.len(),
            report.tamper_attempts.iter().filter(|t| t.detected).count()
        );
    }

    if args.out.is_some() {
        let content = match args.format.as_str() {
            "json" => {
                let mut doc = serde_json::json!({ "log": outcome.log });
                if let Some(r) = &outcome.adversary {
                    doc["adversary"] =
                        serde_json::from_str(&r.to_json()).expect("report json");
                }
                serde_json::to_string_pretty(&doc).expect("outcome json")
            }
            "csv" => {
                let mut s = String::from("round,sender,receivers,coded,pkt_ids,auth_drops\n");
                for r in &outcome.log.records {
                    s.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        r.round,
                        r.sender,
                        r.receivers
                            .iter()
                            .map(|v| v.to_string())
                            .collect::<Vec<_>>()
                            .join(";"),
                        r.coded,
                        r.pkt_ids
                            .iter()
                            .map(|v| v.to_string())
                            .collect::<Vec<_>>()
                            .join(";"),
                        r.auth_drops
                            .iter()
                            .map(|v| v.to_string())
                            .collect::<Vec<_>>()
                            .join(";"),
                    ));
                }
                s
            }
            other => return usage_error(&format!("unknown format {other:?} (csv|json)")),
        };
        if let Err(code) = write_or_print(&args.out, &content) {
            return code;
        }
    }
    if outcome.delivery_failures.is_empty() || cfg.tamper {
        ExitCode::SUCCESS
    } else {
        runtime_error("some flows were not delivered")
    }
}

fn cmd_bench(args: BenchArgs) -> ExitCode {
    for s in &args.scenarios {
        if !(1..=4).contains(s) {
            return usage_error(&format!("scenario {s} not in 1..4"));
        }
    }
    for e in &args.ecc_bits {
        if ![163, 283, 409, 571].contains(e) {
            return usage_error(&format!("ecc-bits {e} not in {{163,283,409,571}}"));
        }
    }
    for e in &args.ecdsa_bits {
        if ![384, 521].contains(e) {
            return usage_error(&format!("ecdsa-bits {e} not in {{384,521}}"));
        }
    }
    if args.trials == 0 {
        return usage_error("trials must be at least 1");
    }
    let cfg = BenchConfig {
        scenarios: args.scenarios,
        ecc_sizes: args.ecc_bits,
        ecdsa_sizes: args.ecdsa_bits,
        trials: args.trials,
        seed: args.seed,
    };
    let rows = scope_cli::run_bench(&cfg);
    let content = match args.format.as_str() {
        "csv" => rows_to_csv(&rows),
        "json" => rows_to_json(&rows),
        other => return usage_error(&format!("unknown format {other:?} (csv|json)")),
    };
    match write_or_print(&args.out, &content) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}

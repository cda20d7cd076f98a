//! `mpcnet`: run scenarios, audit ledger dumps, generate keys.
//!
//! Exit codes:
//! - 0: success (honest run, audit pass, keys written)
//! - 1: usage, config or input error (the message names the offending
//!   path), or a scripted protocol check that did not hold
//! - 2: cheating detected (run) or audit fail

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use mpcnet::crypto::{Key256, Keypair, Signer};
use mpcnet::ledger::EntryLog;
use mpcnet::mpc::{run_scenario, ScenarioConfig};
use mpcnet::spdz::{audit_trail, trail_parties, AuditError, AuditVerdict};

#[derive(Parser)]
#[command(name = "mpcnet", version, about = "Simulated MPC network with a public ledger")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario end to end and write its artifacts.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Replay a computation's public trail from a ledger dump.
    Audit {
        dump: PathBuf,
        #[arg(long)]
        id: String,
    },
    /// Write Ed25519 keypairs as hex files.
    Keygen {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        count: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let res = match cli.cmd {
        Cmd::Run { scenario, out, seed } => cmd_run(&scenario, &out, seed),
        Cmd::Audit { dump, id } => cmd_audit(&dump, &id),
        Cmd::Keygen { count, out, seed } => cmd_keygen(count, &out, seed).map(|()| 0),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(scenario: &Path, out: &Path, seed: u64) -> Result<u8> {
    let mut cfg = ScenarioConfig::load(scenario)?;
    cfg.seed = Some(seed);
    let report = run_scenario(&cfg).with_context(|| format!("running {}", scenario.display()))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(out, "trace.txt", &report.trace_text())?;
    write(out, "ledger.dump", &report.ledger_dump)?;
    write(out, "settlement.txt", &report.settlement_text())?;
    write(out, "outputs.txt", &report.outputs_text())?;
    write(out, "run.log", &report.log_text())?;
    write(out, "metrics.csv", &report.metrics_text().unwrap_or_else(|| "n,baseline_msgs,hierarchical_msgs,rounds\n".into()))?;
    print!("{}", report.outputs_text());
    for (computation, d) in &report.detections {
        println!("detected computation={} channel={d}", computation.to_hex());
    }
    if let Some((c, _)) = report.checks.iter().find(|c| !c.1) {
        bail!("check failed: {c} (see {})", out.join("run.log").display());
    }
    Ok(report.exit_code() as u8)
}

fn cmd_audit(dump: &Path, id: &str) -> Result<u8> {
    let text = fs::read_to_string(dump).with_context(|| format!("reading {}", dump.display()))?;
    let log = EntryLog::parse_dump(&text).with_context(|| format!("corrupt-dump {}", dump.display()))?;
    let computation = Key256::from_hex(id).with_context(|| format!("bad computation id {id}"))?;
    let verdict = match audit_trail(&log, &computation, None) {
        Ok(v) => v,
        Err(AuditError::IncompleteTrail { step: 0 }) => bail!("no public trail for computation {id} in {}", dump.display()),
        Err(e) => return Err(e).context("trail cannot be replayed"),
    };
    match verdict {
        AuditVerdict::Pass { outputs } => {
            let vals: Vec<String> = outputs.iter().map(|(_, v)| v.value().to_string()).collect();
            println!("computation={id} verdict=pass outputs={}", vals.join(","));
            Ok(0)
        }
        AuditVerdict::Fail { guilty, output_mismatch } => {
            let seats = trail_parties(&log, &computation).unwrap_or_default();
            let named: Vec<String> = guilty
                .iter()
                .map(|&g| seats.get(g - 1).map(|pk| pk.to_hex()).unwrap_or_else(|| format!("seat{g}")))
                .collect();
            println!("computation={id} verdict=fail guilty={} output_mismatch={output_mismatch}", named.join(","));
            Ok(2)
        }
    }
}

fn cmd_keygen(count: u32, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut rng = match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for i in 0..count {
        let kp = Keypair::generate(&mut rng);
        let text = format!("public={}\nsecret={}\n", kp.public_key().to_hex(), hex::encode(kp.secret_bytes()));
        write(out, &format!("key-{i}.txt"), &text)?;
        println!("{}", kp.public_key().to_hex());
    }
    Ok(())
}

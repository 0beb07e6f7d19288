//! Operator entry point for the key exchange simulator.
//!
//! Subcommands: `run` a scenario and record the transcript, `verify` a
//! transcript against the protocol invariants, `attack` a transcript or a
//! synthesized single-key broadcast with the product attack, and `groups`
//! to print the built-in presets.
//!
//! Exit codes: 0 success or expected verdict, 1 invariant or verification
//! failure, 2 usage or parse error, 3 inapplicable attack.

use clap::{ArgAction, Parser, Subcommand};
use gkex_core::adversary::{self, AdversaryError};
use gkex_core::group::{parse_big, Element, GroupParams, Preset};
use gkex_core::protocol::MemberId;
use gkex_core::sim::{self, SimError, Transcript};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Seed used when neither the flag nor the config file provides one.
const DEFAULT_SEED: u64 = 42;

/// Environment variable naming a JSON config file with default `group` and
/// `seed` values. Flags always win over the config.
const CONFIG_ENV: &str = "GKEX_CONFIG";

#[derive(Parser)]
#[command(
    name = "gkex",
    version,
    about = "Group key exchange simulator: scripted agreement, rekeying, churn, and attack demos"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario file and record the transcript
    Run {
        /// Group preset: tiny, medium or modp2048
        #[arg(long)]
        group: Option<String>,
        /// Custom group from a JSON file with decimal or 0x-hex p, q, g
        #[arg(long)]
        group_file: Option<PathBuf>,
        /// Scenario file (JSON array of events)
        #[arg(long)]
        scenario: PathBuf,
        /// Seed for every sampled scalar
        #[arg(long)]
        seed: Option<u64>,
        /// Where to write the transcript (JSON Lines)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also list every recorded message
        #[arg(short, long, action = ArgAction::Count)]
        verbose: u8,
    },
    /// Re-check a transcript: key recomputation, agreement, slot identity,
    /// chaining, membership
    Verify {
        /// Transcript file produced by `run`
        transcript: PathBuf,
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        group_file: Option<PathBuf>,
    },
    /// Run the product attack: against a real transcript it must fail,
    /// against a synthesized single-key broadcast it must recover the key
    Attack {
        /// Transcript file; the initial keying broadcast is attacked
        transcript: Option<PathBuf>,
        /// Instead synthesize a flawed single-key broadcast with n members
        #[arg(long)]
        single_key: Option<u32>,
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        group_file: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the built-in group presets
    Groups,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn check(message: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn inapplicable(message: impl Into<String>) -> Failure {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

#[derive(Deserialize, Default)]
struct ConfigFile {
    group: Option<String>,
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct CustomGroupFile {
    p: String,
    q: String,
    g: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    let config = load_config()?;
    match cli.command {
        Command::Run {
            group,
            group_file,
            scenario,
            seed,
            out,
            verbose,
        } => {
            let group = resolve_group(group, group_file.as_deref(), &config)?;
            let seed = seed.or(config.seed).unwrap_or(DEFAULT_SEED);
            cmd_run(&group, &scenario, seed, out.as_deref(), verbose)
        }
        Command::Verify {
            transcript,
            group,
            group_file,
        } => {
            let group = resolve_group(group, group_file.as_deref(), &config)?;
            cmd_verify(&group, &transcript)
        }
        Command::Attack {
            transcript,
            single_key,
            group,
            group_file,
            seed,
        } => {
            let group = resolve_group(group, group_file.as_deref(), &config)?;
            let seed = seed.or(config.seed).unwrap_or(DEFAULT_SEED);
            match (single_key, transcript) {
                (Some(n), None) => cmd_attack_single_key(&group, n, seed),
                (None, Some(path)) => cmd_attack_transcript(&group, &path),
                _ => Err(Failure::usage(
                    "attack needs exactly one of a transcript path or --single-key <n>",
                )),
            }
        }
        Command::Groups => cmd_groups(),
    }
}

fn load_config() -> Result<ConfigFile, Failure> {
    match std::env::var(CONFIG_ENV) {
        Ok(path) => {
            let body = std::fs::read_to_string(&path)
                .map_err(|e| Failure::usage(format!("cannot read {CONFIG_ENV} file {path}: {e}")))?;
            serde_json::from_str(&body)
                .map_err(|e| Failure::usage(format!("bad {CONFIG_ENV} file {path}: {e}")))
        }
        Err(_) => Ok(ConfigFile::default()),
    }
}

fn resolve_group(
    flag: Option<String>,
    file: Option<&Path>,
    config: &ConfigFile,
) -> Result<GroupParams, Failure> {
    if flag.is_some() && file.is_some() {
        return Err(Failure::usage(
            "exactly one group source: --group or --group-file",
        ));
    }
    if let Some(path) = file {
        let body = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read group file {}: {e}", path.display())))?;
        let custom: CustomGroupFile = serde_json::from_str(&body)
            .map_err(|e| Failure::usage(format!("bad group file: {e}")))?;
        let parse = |field: &str, s: &str| {
            parse_big(s).ok_or_else(|| Failure::usage(format!("bad group field {field}: {s:?}")))
        };
        let p = parse("p", &custom.p)?;
        let q = parse("q", &custom.q)?;
        let g = parse("g", &custom.g)?;
        return GroupParams::new(p, q, g)
            .map_err(|e| Failure::usage(format!("group validation: {e}")));
    }
    let name = flag
        .or_else(|| config.group.clone())
        .unwrap_or_else(|| "tiny".to_string());
    let preset: Preset = name
        .parse()
        .map_err(|e| Failure::usage(format!("{e}")))?;
    Ok(GroupParams::from_preset(preset))
}

/// First 8 hex chars of the encoded magnitude (the 4-byte length prefix is
/// skipped; it is constant per group and would fingerprint nothing).
fn fingerprint(element: &Element) -> String {
    let hex = element.to_hex();
    let magnitude = &hex[8..];
    magnitude[..magnitude.len().min(8)].to_string()
}

fn cmd_run(
    group: &GroupParams,
    scenario: &Path,
    seed: u64,
    out: Option<&Path>,
    verbose: u8,
) -> Result<u8, Failure> {
    let body = std::fs::read_to_string(scenario)
        .map_err(|_| Failure::usage(format!("scenario not found: {}", scenario.display())))?;
    let script = sim::parse_scenario(&body).map_err(|e| Failure::usage(format!("{e}")))?;
    let transcript = sim::run_scenario(&script, group, seed).map_err(|e| match e {
        SimError::Script(_) => Failure::usage(format!("{e}")),
        other => Failure::check(format!("{other}")),
    })?;

    if let Some(path) = out {
        std::fs::write(path, transcript.to_jsonl())
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    }

    if verbose > 0 {
        for record in &transcript.records {
            println!(
                "seq {:>3} epoch {} {:?} from {}",
                record.seq, record.epoch, record.direction, record.sender
            );
        }
    }
    for (record, msg) in transcript.broadcasts() {
        let oracle = record.oracle.as_ref().expect("runner attaches oracles");
        println!(
            "epoch {} [{}] roster={} key {}",
            msg.epoch,
            msg.variant,
            msg.roster.len(),
            fingerprint(&oracle.expected_key)
        );
    }

    let report = sim::verify_transcript(&transcript, group)
        .map_err(|e| Failure::check(format!("{e}")))?;
    print!("{report}");
    if report.passed() {
        println!("PASS");
        Ok(0)
    } else {
        println!("FAIL");
        Ok(1)
    }
}

fn cmd_verify(group: &GroupParams, path: &Path) -> Result<u8, Failure> {
    let body = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let transcript =
        Transcript::from_jsonl(&body).map_err(|e| Failure::usage(format!("{e}")))?;
    let report = sim::verify_transcript(&transcript, group)
        .map_err(|e| Failure::usage(format!("{e}")))?;
    print!("{report}");
    if report.passed() {
        println!("PASS");
        Ok(0)
    } else {
        println!("FAIL");
        Ok(1)
    }
}

fn attack_report(
    variant: &str,
    n: usize,
    recovered: &Element,
    matches_true_key: bool,
) -> String {
    serde_json::json!({
        "variant": variant,
        "n": n,
        "applicable": true,
        "recovered": recovered.to_hex(),
        "matches_true_key": matches_true_key,
    })
    .to_string()
}

fn cmd_attack_single_key(group: &GroupParams, n: u32, seed: u64) -> Result<u8, Failure> {
    if n < 3 {
        return Err(Failure::usage("--single-key needs n >= 3"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let scalars: BTreeMap<MemberId, _> = (1..=n)
        .map(|id| (MemberId(id), group.sample_scalar(&mut rng)))
        .collect();
    let (broadcast, key) = adversary::single_key_ika(group, &scalars, MemberId(1))
        .map_err(|e| Failure::usage(format!("{e}")))?;
    let recovered = adversary::product_attack(group, &broadcast).map_err(|e| match e {
        AdversaryError::Inapplicable => Failure::inapplicable("attack inapplicable"),
        other => Failure::usage(format!("{other}")),
    })?;
    let matches = recovered == key;
    println!(
        "{}",
        attack_report("single_key", broadcast.n, &recovered, matches)
    );
    println!("RECOVERED: {}", if matches { "yes" } else { "no" });
    // the flawed variant is expected to fall
    Ok(u8::from(!matches))
}

fn cmd_attack_transcript(group: &GroupParams, path: &Path) -> Result<u8, Failure> {
    let body = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let transcript =
        Transcript::from_jsonl(&body).map_err(|e| Failure::usage(format!("{e}")))?;
    let broadcasts = transcript.broadcasts();
    let (record, msg) = broadcasts
        .first()
        .ok_or_else(|| Failure::usage("transcript contains no keying broadcast"))?;
    let oracle = record.oracle.as_ref().ok_or_else(|| {
        Failure::usage("transcript carries no oracle section to adjudicate against")
    })?;

    let candidate =
        adversary::attack_real_protocol(group, msg, record.sender).map_err(|e| match e {
            AdversaryError::Inapplicable | AdversaryError::Degenerate => {
                Failure::inapplicable("attack inapplicable")
            }
            other => Failure::usage(format!("{other}")),
        })?;
    let matches = candidate == oracle.expected_key;
    println!(
        "{}",
        attack_report(
            &msg.variant.to_string(),
            msg.roster.len(),
            &candidate,
            matches
        )
    );
    println!("RECOVERED: {}", if matches { "yes" } else { "no" });
    // the real protocol is expected to resist
    Ok(u8::from(matches))
}

fn cmd_groups() -> Result<u8, Failure> {
    for preset in Preset::ALL {
        let group = GroupParams::from_preset(preset);
        let bits = group.p().bits();
        if bits <= 16 {
            println!(
                "{}: p={} q={} g={}",
                preset.name(),
                group.p(),
                group.q(),
                group.generator()
            );
        } else {
            println!(
                "{}: bits={} g={} p=0x{:x} q=0x{:x}",
                preset.name(),
                bits,
                group.generator(),
                group.p(),
                group.q()
            );
        }
    }
    Ok(0)
}

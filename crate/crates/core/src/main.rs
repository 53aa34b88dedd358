use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use xtspir::audit::{
    audit_all, audit_points, audit_rates, audit_server_privacy, audit_user_privacy_algebraic,
    audit_user_privacy_statistical, audit_x_security_algebraic, audit_x_security_statistical,
    AuditReport, StatConfig,
};
use xtspir::harness::{default_adversary, run_demo, run_protocol, RunOptions, DEMO_SEED};
use xtspir::params::{derive_params, Rate, SystemParams};
use xtspir::server::{AdversaryConfig, Strategy};
use xtspir::storage::Database;
use xtspir::{Error, Protocol, Seed};

const EXIT_DECODE: u8 = 2;
const EXIT_AUDIT: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "xtspir",
    version,
    about = "Multi-user symmetric PIR over X-secure coded storage"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the worked example (N=13, M=2, K=2, X=2, T=(2,2), B=1, U=1, F=(2,2)).
    Demo {
        #[arg(long, value_parser = parse_seed)]
        seed: Option<Seed>,
        /// Print the full transcript as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run one execution and print its transcript.
    Run(RunArgs),
    /// Run privacy, security and rate audits; prints a JSON array of reports.
    Audit(AuditArgs),
    /// Sweep N, B and U around the given parameters; prints CSV.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long, default_value_t = 13)]
    n: usize,
    /// Number of users; must match the lengths of --t and --files.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    x: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,2")]
    t: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    b: usize,
    #[arg(long, default_value_t = 1)]
    u: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,2")]
    files: Vec<usize>,
    #[arg(long)]
    no_server_privacy: bool,
    /// Field modulus; defaults to the smallest admissible prime.
    #[arg(long)]
    q: Option<u64>,
}

impl ParamArgs {
    fn params(&self) -> Result<SystemParams, Error> {
        if let Some(m) = self.m {
            if m != self.t.len() || m != self.files.len() {
                return Err(Error::InvalidParams(format!(
                    "--m {m} disagrees with {} thresholds and {} index ranges",
                    self.t.len(),
                    self.files.len()
                )));
            }
        }
        let p = SystemParams {
            n: self.n,
            k: self.k,
            x: self.x,
            t: self.t.clone(),
            b: self.b,
            u: self.u,
            f: self.files.clone(),
            server_privacy: !self.no_server_privacy,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Desired indices, 1-based; defaults to all ones.
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<usize>>,
    /// Byzantine servers, 1-based.
    #[arg(long, value_delimiter = ',')]
    byz: Vec<usize>,
    /// Unresponsive servers, 1-based.
    #[arg(long, value_delimiter = ',')]
    unresp: Vec<usize>,
    #[arg(long, default_value = "random")]
    strategy: Strategy,
    #[arg(long, value_parser = parse_seed)]
    seed: Option<Seed>,
    /// Database JSON; a seeded random database is used otherwise.
    #[arg(long)]
    db: Option<PathBuf>,
    /// Write the transcript here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    Points,
    Xsec,
    Userpriv,
    Srvpriv,
    Rates,
    All,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum, default_value = "all")]
    check: Check,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, value_parser = parse_seed)]
    seed: Option<Seed>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Largest N in the sweep.
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, value_parser = parse_seed)]
    seed: Option<Seed>,
}

/// Decimal u64 or 64 hex digits.
fn parse_seed(s: &str) -> Result<Seed, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(Seed::from_u64(v));
    }
    Seed::from_hex(s).ok_or_else(|| format!("seed must be a u64 or 64 hex digits, got {s:?}"))
}

fn zero_based(v: &[usize], what: &str) -> Result<Vec<usize>, Error> {
    v.iter()
        .map(|&i| {
            i.checked_sub(1)
                .ok_or_else(|| Error::InvalidParams(format!("{what} indices are 1-based")))
        })
        .collect()
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::DecodeFailure(_) | Error::WrongFile | Error::MissingRound(_) => EXIT_DECODE,
        _ => EXIT_USAGE,
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(v)?;
    writeln!(io::stdout(), "{text}")?;
    Ok(())
}

fn ratio_f64(r: Rate) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn cmd_demo(seed: Option<Seed>, json: bool) -> Result<u8, Error> {
    let ex = run_demo(&seed.unwrap_or(Seed::from_u64(DEMO_SEED)))?;
    let t = &ex.transcript;
    if json {
        print_json(t)?;
        return Ok(0);
    }
    let m = &t.metrics;
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "lambda = {}, S = {}, q = {}",
        t.derived.lambda, t.derived.s, t.derived.q
    )?;
    writeln!(out, "theta = {:?}", t.theta)?;
    writeln!(
        out,
        "Byzantine = {:?}, unresponsive = {:?}",
        t.adversary.byzantine, t.adversary.unresponsive
    )?;
    writeln!(out, "retrieved file = {:?}", t.retrieved_file)?;
    writeln!(out, "L = {}, D = {}", m.l, m.d)?;
    writeln!(out, "R = {} ({:.4})", m.r, ratio_f64(m.r))?;
    writeln!(out, "rho = {} ({:.4})", m.rho, ratio_f64(m.rho))?;
    Ok(0)
}

fn cmd_run(a: RunArgs) -> Result<u8, Error> {
    let p = a.params.params()?;
    let theta = match &a.theta {
        Some(t) => zero_based(t, "theta")?,
        None => vec![0; p.users()],
    };
    let adversary = AdversaryConfig {
        byzantine: zero_based(&a.byz, "server")?.into_iter().collect(),
        unresponsive: zero_based(&a.unresp, "server")?.into_iter().collect(),
        strategy: a.strategy,
    };
    let db = match &a.db {
        Some(path) => Some(Database::from_json(&fs::read_to_string(path)?)?),
        None => None,
    };
    let opts = RunOptions {
        q: a.params.q.or(db.as_ref().map(Database::q)),
        ..RunOptions::default()
    };
    let seed = a.seed.unwrap_or(Seed::from_u64(0));
    let ex = run_protocol(&p, db.as_ref(), &theta, &adversary, &seed, &opts)?;
    let text = ex.transcript.to_json()?;
    match &a.out {
        Some(path) => fs::write(path, text + "\n")?,
        None => writeln!(io::stdout(), "{text}")?,
    }
    Ok(0)
}

fn cmd_audit(a: AuditArgs) -> Result<u8, Error> {
    let p = a.params.params()?;
    let proto = Protocol::new(p, a.params.q)?;
    let cfg = StatConfig::new(a.trials, a.seed.unwrap_or(Seed::from_u64(1)));
    let users = proto.params.users();
    let mut reports: Vec<AuditReport> = Vec::new();
    match a.check {
        Check::Points => reports.push(audit_points(&proto)?),
        Check::Xsec => {
            reports.push(audit_x_security_algebraic(&proto)?);
            reports.push(audit_x_security_statistical(&proto, &cfg)?);
        }
        Check::Userpriv => {
            for m in 0..users {
                reports.push(audit_user_privacy_algebraic(&proto, m)?);
                reports.push(audit_user_privacy_statistical(&proto, m, &cfg)?);
            }
        }
        Check::Srvpriv => reports.push(audit_server_privacy(&proto, &cfg)?),
        Check::Rates => {
            let adv = default_adversary(&proto.params, Strategy::UniformRandom);
            let ex = run_protocol(
                &proto.params,
                None,
                &vec![0; users],
                &adv,
                &cfg.seed,
                &RunOptions {
                    q: a.params.q,
                    ..RunOptions::default()
                },
            )?;
            reports.push(audit_rates(&ex.transcript));
        }
        Check::All => reports = audit_all(&proto, &cfg)?,
    }
    print_json(&reports)?;
    Ok(if reports.iter().all(AuditReport::passed) {
        0
    } else {
        EXIT_AUDIT
    })
}

#[derive(Serialize)]
struct BenchRow {
    n: usize,
    m: usize,
    k: usize,
    x: usize,
    t: String,
    b: usize,
    u: usize,
    files: String,
    server_privacy: bool,
    q: u64,
    #[serde(rename = "R")]
    r: String,
    #[serde(rename = "R_formula")]
    r_formula: String,
    rho: String,
    wall_time_us: u64,
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn cmd_bench(a: BenchArgs) -> Result<u8, Error> {
    let base = SystemParams {
        n: a.params.n,
        k: a.params.k,
        x: a.params.x,
        t: a.params.t.clone(),
        b: a.params.b,
        u: a.params.u,
        f: a.params.files.clone(),
        server_privacy: !a.params.no_server_privacy,
    };
    let n_max = a.n_max.unwrap_or(base.n + 8);
    let seed = a.seed.unwrap_or(Seed::from_u64(0));
    let mut w = csv::Writer::from_writer(io::stdout());
    for b in 0..=base.b {
        for u in 0..=base.u {
            for n in 1..=n_max {
                let p = SystemParams {
                    n,
                    b,
                    u,
                    ..base.clone()
                };
                if p.validate().is_err() || derive_params(&p).is_err() {
                    continue;
                }
                let adv = default_adversary(&p, Strategy::UniformRandom);
                let theta = vec![0; p.users()];
                let mut best = u64::MAX;
                let mut last = None;
                for rep in 0..a.reps.max(1) {
                    let start = Instant::now();
                    let ex = run_protocol(
                        &p,
                        None,
                        &theta,
                        &adv,
                        &seed.derive(&format!("bench/{rep}")),
                        &RunOptions::default(),
                    )?;
                    best = best.min(start.elapsed().as_micros() as u64);
                    last = Some(ex.transcript);
                }
                let t = last.expect("at least one repetition");
                let m = &t.metrics;
                w.serialize(BenchRow {
                    n,
                    m: p.users(),
                    k: p.k,
                    x: p.x,
                    t: join(&p.t),
                    b,
                    u,
                    files: join(&p.f),
                    server_privacy: p.server_privacy,
                    q: t.derived.q,
                    r: m.r.to_string(),
                    r_formula: m.r_formula.to_string(),
                    rho: m.rho.to_string(),
                    wall_time_us: best,
                })
                .map_err(|e| Error::Io(e.to_string()))?;
            }
        }
    }
    w.flush()?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let result = match cli.command {
        Command::Demo { seed, json } => cmd_demo(seed, json),
        Command::Run(a) => cmd_run(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

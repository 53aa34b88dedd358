//! Acceptance suite. Prints one line per criterion and exits non-zero if
//! any criterion fails. Tolerances are the constants below.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use xtspir::audit::{
    audit_user_privacy_algebraic, audit_user_privacy_statistical, audit_x_security_algebraic,
    audit_x_security_statistical, combinations, query_view_test, residual_dependence_test,
    AuditReport, StatConfig,
};
use xtspir::field::{is_prime, Fe, Field};
use xtspir::harness::{
    default_adversary, run_demo, run_protocol, run_with_protocol, RunOptions, DEMO_SEED,
};
use xtspir::params::{derive_params, Rate, SystemParams};
use xtspir::poly::Poly;
use xtspir::rscode::{rs_decode, rs_encode, ReceivedWord};
use xtspir::server::{AdversaryConfig, Strategy};
use xtspir::storage::{encode_database, reconstruct_from_shares, Database, Mode};
use xtspir::{Error, Protocol, Seed};

const DEMO_RUNTIME: Duration = Duration::from_secs(1);
const STAT_RUNTIME: Duration = Duration::from_secs(60);
const RANDOM_PARAM_SETS: usize = 60;
const MAX_N: usize = 40;
const MAX_Q: u64 = 211;
const RS_TRIALS: usize = 1000;
const RS_BEYOND_TRIALS: usize = 500;
const RS_MAX_N: usize = 20;
const STAT_TRIALS: usize = 2000;
const SIGNIFICANCE: f64 = 0.01;
const INTERPOLATION_CASES: usize = 1000;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fmt_err(e: Error) -> String {
    e.to_string()
}

/// Rates computed from the closed forms with exact rationals.
fn expected_rates(p: &SystemParams) -> (Rate, Rate) {
    let t: u64 = p.t.iter().map(|&t| t as u64).sum();
    let (n, k, x, b, u) = (p.n as u64, p.k as u64, p.x as u64, p.b as u64, p.u as u64);
    let r = Rate::from_integer(1) - Rate::new(k + x + t + 2 * b - 1, n - u);
    let rho = if p.server_privacy {
        Rate::new(k + x + t - 1, n - (k + x + t + 2 * b + u - 1))
    } else {
        Rate::from_integer(0)
    };
    (r, rho)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let ex = run_demo(&Seed::from_u64(DEMO_SEED)).map_err(fmt_err)?;
    let elapsed = start.elapsed();
    let t = &ex.transcript;
    let d = &t.derived;
    ensure((d.lambda, d.s, d.q) == (3, 2, 17), || {
        format!("lambda, S, q = {}, {}, {}", d.lambda, d.s, d.q)
    })?;
    ensure(t.metrics.r == Rate::new(1, 4), || {
        format!("R = {}", t.metrics.r)
    })?;
    ensure(t.metrics.rho == Rate::new(7, 3), || {
        format!("rho = {}", t.metrics.rho)
    })?;
    ensure(
        t.adversary.byzantine == [3] && t.adversary.unresponsive == [7],
        || format!("adversary {:?}", t.adversary),
    )?;
    let silent = t.rounds.iter().all(|r| r.answers[6].is_none());
    ensure(silent, || "server 7 answered".into())?;
    ensure(elapsed < DEMO_RUNTIME, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "lambda=3 S=2 q=17 R={} rho={} file recovered in {elapsed:?}",
        t.metrics.r, t.metrics.rho
    ))
}

fn random_params(rng: &mut ChaCha20Rng) -> Option<SystemParams> {
    let m = rng.random_range(1..=3);
    let t: Vec<usize> = (0..m).map(|_| rng.random_range(1..=3)).collect();
    let f: Vec<usize> = (0..m).map(|_| rng.random_range(1..=3)).collect();
    let k = rng.random_range(1..=4);
    let x = rng.random_range(0..=3);
    let b = rng.random_range(0..=2);
    let u = rng.random_range(0..=2);
    let overhead = k + x + t.iter().sum::<usize>() + 2 * b + u - 1;
    if overhead + 1 > MAX_N {
        return None;
    }
    let n = rng.random_range(overhead + 1..=MAX_N);
    let p = SystemParams {
        n,
        k,
        x,
        t,
        b,
        u,
        f,
        server_privacy: rng.random_bool(0.8),
    };
    let d = derive_params(&p).ok()?;
    (d.q <= MAX_Q).then_some(p)
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let strategies = [
        Strategy::UniformRandom,
        Strategy::AdditiveOffset(1),
        Strategy::Constant(0),
    ];
    let mut tested = 0;
    let mut attempts = 0;
    while tested < RANDOM_PARAM_SETS {
        attempts += 1;
        ensure(attempts < 100_000, || {
            "could not sample parameter sets".into()
        })?;
        let Some(p) = random_params(&mut rng) else {
            continue;
        };
        let adv = default_adversary(&p, strategies[tested % 3]);
        let theta: Vec<usize> = p.f.iter().map(|&f| rng.random_range(0..f)).collect();
        let seed = Seed::from_u64(rng.random());
        let ex = run_protocol(&p, None, &theta, &adv, &seed, &RunOptions::default())
            .map_err(|e| format!("{p:?}: {e}"))?;
        let (r, rho) = expected_rates(&p);
        let m = &ex.transcript.metrics;
        ensure(m.r == r && m.rho == rho, || {
            format!(
                "{p:?}: measured R={} rho={}, expected R={r} rho={rho}",
                m.r, m.rho
            )
        })?;
        tested += 1;
    }
    Ok(format!(
        "{tested} random parameter sets, N <= {MAX_N}, q <= {MAX_Q}, exact rates"
    ))
}

fn criterion_3() -> Outcome {
    let proto = Protocol::demo();
    let p = &proto.params;
    let db = Database::random(p, &proto.derived, &Seed::from_u64(3));
    let options: Vec<Option<usize>> = std::iter::once(None).chain((0..p.n).map(Some)).collect();
    let strategies = [
        Strategy::UniformRandom,
        Strategy::AdditiveOffset(5),
        Strategy::Constant(0),
    ];
    let thetas = [[0, 0], [0, 1], [1, 0], [1, 1]];
    let mut runs = 0usize;
    let mut configs = 0usize;
    for byz in &options {
        for silent in &options {
            if byz.is_some() && byz == silent {
                continue;
            }
            configs += 1;
            for (si, &strategy) in strategies.iter().enumerate() {
                let adv = AdversaryConfig {
                    byzantine: byz.iter().copied().collect(),
                    unresponsive: silent.iter().copied().collect(),
                    strategy,
                };
                let theta = thetas[(configs + si) % thetas.len()];
                let seed = Seed::from_u64(runs as u64);
                run_with_protocol(&proto, &db, &theta, &adv, &seed, &RunOptions::default())
                    .map_err(|e| format!("byz {byz:?} silent {silent:?} {strategy}: {e}"))?;
                runs += 1;
            }
        }
    }
    ensure(configs == 1 + 13 + 13 + 13 * 12, || {
        format!("{configs} configurations")
    })?;
    Ok(format!(
        "{configs} adversary sets x 3 strategies = {runs} exact recoveries"
    ))
}

const RS_PRIMES: [u64; 4] = [23, 31, 97, 257];

struct RsTrial {
    field: Field,
    message: Poly,
    word: ReceivedWord,
    k: usize,
}

fn rs_trial(rng: &mut ChaCha20Rng, within: bool) -> Option<RsTrial> {
    let field = Field::new(RS_PRIMES[rng.random_range(0..RS_PRIMES.len())]).unwrap();
    let n = rng.random_range(2..=RS_MAX_N);
    let k = rng.random_range(1..n);
    let redundancy = n - k;
    let (errors, erasures) = if within {
        let erasures = rng.random_range(0..=redundancy);
        (rng.random_range(0..=(redundancy - erasures) / 2), erasures)
    } else {
        let errors = rng.random_range(1..=n - k.min(n));
        let erasures = rng.random_range(0..=n - errors);
        if 2 * errors + erasures <= redundancy {
            return None;
        }
        (errors, erasures)
    };
    let mut xs: Vec<u64> = (0..field.modulus()).collect();
    for i in 0..n {
        let j = rng.random_range(i..xs.len());
        xs.swap(i, j);
    }
    let points: Vec<Fe> = xs[..n].iter().map(|&v| field.elem(v)).collect();
    let message = Poly::from_coeffs(field.random_vec(rng, k));
    let code = rs_encode(&field, &message, &points).unwrap();
    let mut positions: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let j = rng.random_range(i..n);
        positions.swap(i, j);
    }
    let mut symbols: Vec<Option<Fe>> = code.into_iter().map(Some).collect();
    for &pos in &positions[..erasures] {
        symbols[pos] = None;
    }
    for &pos in &positions[erasures..erasures + errors] {
        let delta = field.elem(rng.random_range(1..field.modulus()));
        symbols[pos] = symbols[pos].map(|v| field.add(v, delta));
    }
    let word = ReceivedWord::new(symbols, points).unwrap();
    Some(RsTrial {
        field,
        message,
        word,
        k,
    })
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for trial in 0..RS_TRIALS {
        let t = rs_trial(&mut rng, true).expect("within-bound trials always exist");
        let got = rs_decode(&t.field, &t.word, t.k).map_err(|e| format!("trial {trial}: {e}"))?;
        ensure(got == t.message, || {
            format!("trial {trial}: wrong polynomial")
        })?;
    }
    let (mut failures, mut flagged, mut exact) = (0, 0, 0);
    let mut beyond = 0;
    while beyond < RS_BEYOND_TRIALS {
        let Some(t) = rs_trial(&mut rng, false) else {
            continue;
        };
        beyond += 1;
        match rs_decode(&t.field, &t.word, t.k) {
            Err(_) => failures += 1,
            Ok(poly) if poly == t.message => exact += 1,
            Ok(poly) => {
                // A wrong answer must still be a consistent codeword the
                // plaintext oracle can reject.
                let agree = t
                    .word
                    .symbols
                    .iter()
                    .zip(&t.word.points)
                    .filter(|(s, &x)| s.is_some_and(|v| v == poly.evaluate(&t.field, x)))
                    .count();
                let present = t.word.symbols.len() - t.word.erasures();
                let bound = present.saturating_sub(t.k) / 2;
                ensure(
                    poly.degree().is_none_or(|d| d < t.k) && present - agree <= bound,
                    || "decoder returned an inconsistent polynomial".into(),
                )?;
                flagged += 1;
            }
        }
    }
    Ok(format!(
        "{RS_TRIALS} within-bound trials exact; {beyond} beyond-bound trials: \
         {failures} reported failure, {flagged} wrong but flagged by the oracle, {exact} exact"
    ))
}

fn criterion_5() -> Outcome {
    let proto = Protocol::demo();
    let mut reports = vec![audit_x_security_algebraic(&proto).map_err(fmt_err)?];
    for m in 0..proto.params.users() {
        reports.push(audit_user_privacy_algebraic(&proto, m).map_err(fmt_err)?);
    }
    let mut checked = 0;
    for r in &reports {
        ensure(r.passed(), || format!("{}: {}", r.name, r.evidence))?;
        ensure(r.evidence["exhaustive"] == true, || {
            format!("{} was sampled", r.name)
        })?;
        checked += r.evidence["checked"].as_u64().unwrap_or(0);
    }
    ensure(checked == 3 * 78 + 2 * (2 * 3 * 78), || {
        format!("{checked} matrices")
    })?;
    Ok(format!(
        "{checked} subset matrices invertible, zero singular"
    ))
}

fn stat_summary(r: &AuditReport) -> String {
    format!(
        "{} min p={:.3e}",
        r.name,
        r.evidence["worst"]["p_value"].as_f64().unwrap_or(1.0)
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let proto = Protocol::demo();
    ensure(proto.derived.q == 17, || "demo field is not F_17".into())?;
    let mut cfg = StatConfig::new(STAT_TRIALS, Seed::from_u64(6));
    cfg.alpha = SIGNIFICANCE;
    let mut passing = Vec::new();
    for m in 0..proto.params.users() {
        passing.push(audit_user_privacy_statistical(&proto, m, &cfg).map_err(fmt_err)?);
    }
    passing.push(residual_dependence_test(&proto, &cfg).map_err(fmt_err)?);
    passing.push(audit_x_security_statistical(&proto, &cfg).map_err(fmt_err)?);
    for r in &passing {
        ensure(r.passed(), || format!("{} failed: {}", r.name, r.evidence))?;
    }

    let mut off = proto.params.clone();
    off.server_privacy = false;
    let broken = Protocol::new(off, None).map_err(fmt_err)?;
    let leak = residual_dependence_test(&broken, &cfg).map_err(fmt_err)?;
    ensure(!leak.passed(), || {
        "server-privacy test passed with privacy disabled".into()
    })?;
    let over: Vec<usize> = (proto.params.n - proto.params.t[0] - 1..proto.params.n).collect();
    let collude = query_view_test(&proto, &cfg, 0, &over).map_err(fmt_err)?;
    ensure(!collude.passed(), || {
        "user-privacy test passed with T+1 colluders".into()
    })?;

    let elapsed = start.elapsed();
    ensure(elapsed < STAT_RUNTIME, || format!("took {elapsed:?}"))?;
    let summary: Vec<String> = passing.iter().map(stat_summary).collect();
    Ok(format!(
        "{STAT_TRIALS} trials at alpha={SIGNIFICANCE}: {}; broken configurations rejected \
         (privacy off min p={:.1e}, T+1 colluders min p={:.1e}) in {elapsed:.1?}",
        summary.join(", "),
        leak.evidence["worst"]["p_value"].as_f64().unwrap_or(1.0),
        collude.evidence["worst"]["p_value"].as_f64().unwrap_or(1.0),
    ))
}

fn measured(p: &SystemParams, seed: u64) -> Result<(Rate, Rate), String> {
    let theta = vec![0; p.users()];
    let adv = default_adversary(p, Strategy::Constant(3));
    let ex = run_protocol(
        p,
        None,
        &theta,
        &adv,
        &Seed::from_u64(seed),
        &RunOptions::default(),
    )
    .map_err(|e| format!("{p:?}: {e}"))?;
    Ok((ex.transcript.metrics.r, ex.transcript.metrics.rho))
}

fn criterion_7() -> Outcome {
    let mut cases = 0;
    // M=1, X=0, no server privacy: 1 - (K+T1+2B-1)/(N-U); B=U=0 gives 1 - (K+T1-1)/N.
    for (n, k, t1, b, u) in [
        (6, 2, 2, 0, 0),
        (9, 3, 2, 0, 0),
        (7, 1, 1, 0, 0),
        (12, 2, 3, 1, 1),
        (10, 2, 2, 1, 0),
    ] {
        let p = SystemParams {
            n,
            k,
            x: 0,
            t: vec![t1],
            b,
            u,
            f: vec![3],
            server_privacy: false,
        };
        let want = Rate::from_integer(1) - Rate::new((k + t1 + 2 * b - 1) as u64, (n - u) as u64);
        let (r, rho) = measured(&p, cases)?;
        ensure(r == want && rho == Rate::from_integer(0), || {
            format!("TPIR case {p:?}: R={r} rho={rho}")
        })?;
        cases += 1;
    }
    // M=1, no server privacy: 1 - (K+X+T1+2B-1)/(N-U).
    for (n, k, x, t1, b, u) in [(8, 2, 1, 2, 0, 0), (12, 2, 2, 1, 1, 1)] {
        let p = SystemParams {
            n,
            k,
            x,
            t: vec![t1],
            b,
            u,
            f: vec![2],
            server_privacy: false,
        };
        let want =
            Rate::from_integer(1) - Rate::new((k + x + t1 + 2 * b - 1) as u64, (n - u) as u64);
        let (r, _) = measured(&p, cases)?;
        ensure(r == want, || format!("XTPIR case {p:?}: R={r}"))?;
        cases += 1;
    }
    // K=1, B=U=0: R = 1 - (X+T)/N, rho = (X+T)/(N-X-T), q >= 2N - (X+T).
    for (n, x, t) in [
        (8, 1, vec![1, 2]),
        (10, 2, vec![2, 2]),
        (6, 0, vec![1, 1, 1]),
        (9, 3, vec![1]),
    ] {
        let p = SystemParams {
            n,
            k: 1,
            x,
            t: t.clone(),
            b: 0,
            u: 0,
            f: vec![2; t.len()],
            server_privacy: true,
        };
        let xt = (x + t.iter().sum::<usize>()) as u64;
        let want_r = Rate::from_integer(1) - Rate::new(xt, n as u64);
        let want_rho = Rate::new(xt, n as u64 - xt);
        let (r, rho) = measured(&p, cases)?;
        ensure(r == want_r && rho == want_rho, || {
            format!("MB-XTSPIR case {p:?}: R={r} rho={rho}")
        })?;
        let q = derive_params(&p).map_err(fmt_err)?.q;
        ensure(q >= 2 * n as u64 - xt, || format!("q = {q} below 2N-(X+T)"))?;
        cases += 1;
    }
    Ok(format!(
        "{cases} special-case parameter sets match their closed forms exactly"
    ))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let primes: Vec<u64> = (3..300).filter(|&v| is_prime(v)).collect();
    for case in 0..INTERPOLATION_CASES {
        let q = primes[rng.random_range(0..primes.len())];
        let field = Field::new(q).unwrap();
        let n = rng.random_range(1..=q.min(30) as usize);
        let mut xs: Vec<u64> = (0..q).collect();
        for i in 0..n {
            let j = rng.random_range(i..xs.len());
            xs.swap(i, j);
        }
        let nodes: Vec<(Fe, Fe)> = xs[..n]
            .iter()
            .map(|&x| (field.elem(x), field.random(&mut rng)))
            .collect();
        let poly = Poly::interpolate(&field, &nodes).map_err(fmt_err)?;
        ensure(poly.degree().is_none_or(|d| d < n), || {
            format!("case {case}: degree too high")
        })?;
        ensure(
            nodes.iter().all(|&(x, y)| poly.evaluate(&field, x) == y),
            || format!("case {case}: interpolant misses a node"),
        )?;
    }

    let proto = Protocol::demo();
    let (p, d, pts) = (&proto.params, &proto.derived, &proto.points);
    let db = Database::random(p, d, &Seed::from_u64(8));
    let enc =
        encode_database(&db, p, d, pts, &Seed::from_u64(9), Mode::Protocol).map_err(fmt_err)?;
    let subsets = combinations(p.n, p.k + p.x);
    let mut rows = 0;
    for set in &subsets {
        let shares: Vec<_> = set.iter().map(|&n| &enc.shares[n]).collect();
        for file in 0..db.len() {
            for row in 0..d.lambda {
                let got =
                    reconstruct_from_shares(&shares, file, row, p, d, pts).map_err(fmt_err)?;
                ensure(got == db.file(file)[row], || {
                    format!("subset {set:?} file {file} row {row}")
                })?;
                rows += 1;
            }
        }
    }
    Ok(format!(
        "{INTERPOLATION_CASES} interpolation cases; {} subsets of {} shares, {rows} rows reconstructed",
        subsets.len(),
        p.k + p.x
    ))
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Outcome); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
    ];
    let mut failed = 0;
    for (n, f) in criteria {
        match f() {
            Ok(detail) => println!("criterion {n}: PASS ({detail})"),
            Err(reason) => {
                failed += 1;
                println!("criterion {n}: FAIL ({reason})");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

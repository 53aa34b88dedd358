//! End-to-end protocol executions: dealer, users, servers, adversary, decoders.
//!
//! All parties run in process. Each party draws from its own labelled child
//! of the execution seed, so the same inputs always give the same transcript.

use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::client::{emit_queries, RoundQuery, UserState};
use crate::error::{Error, Result};
use crate::field::{Fe, Field};
use crate::params::{
    closed_form_rate, closed_form_secrecy_rate, derive_params_with_modulus, generate_public_points,
    DerivedParams, PublicPoints, Rate, SystemParams,
};
use crate::retrieval::{assemble_file, decode_round, DecodedRound, RetrievedFile};
use crate::seed::Seed;
use crate::server::{
    apply_adversary, build_intermediate_polys, compute_answer, AdversaryConfig, IntermediatePolys,
    RoundAnswer, ServerState, Strategy,
};
use crate::storage::{
    encode_database, file_offset, generate_round_randomness, Database, EncodedStorage, Mode,
    RoundRandomness,
};
use crate::transcript::{Metrics, RoundRecord, Transcript};

/// Public setup shared by every party: parameters, derived values and points.
#[derive(Clone, Debug)]
pub struct Protocol {
    pub params: SystemParams,
    pub derived: DerivedParams,
    pub points: PublicPoints,
    pub field: Field,
    intermediate: Vec<IntermediatePolys>,
}

/// Output of the dealer: storage, per-round randomness and the resulting servers.
#[derive(Clone, Debug)]
pub struct Dealt {
    pub storage: EncodedStorage,
    pub randomness: Vec<RoundRandomness>,
    pub servers: Vec<ServerState>,
}

impl Protocol {
    pub fn new(params: SystemParams, q: Option<u64>) -> Result<Self> {
        let derived = derive_params_with_modulus(&params, q)?;
        let points = generate_public_points(&params, &derived)?;
        Self::with_points(params, derived, points)
    }

    /// Uses caller-supplied points (e.g. doctored ones in audits).
    pub fn with_points(
        params: SystemParams,
        derived: DerivedParams,
        points: PublicPoints,
    ) -> Result<Self> {
        let field = Field::new(derived.q)?;
        let intermediate = (0..derived.s)
            .map(|s| build_intermediate_polys(&derived, &points, s))
            .collect::<Result<_>>()?;
        Ok(Protocol {
            params,
            derived,
            points,
            field,
            intermediate,
        })
    }

    pub fn demo() -> Self {
        Self::new(SystemParams::demo(), None).expect("demo parameters are feasible")
    }

    pub fn intermediate(&self, s: usize) -> &IntermediatePolys {
        &self.intermediate[s]
    }

    /// SHA-256 over the canonical JSON of the public points.
    pub fn points_digest(&self) -> String {
        let json = serde_json::to_vec(&self.points).expect("points serialize");
        hex::encode(Sha256::digest(json))
    }

    /// Dealer step: storage shares plus one randomness share per server and round.
    pub fn deal(
        &self,
        db: &Database,
        storage_seed: &Seed,
        dealer_seed: &Seed,
        mode: Mode,
    ) -> Result<Dealt> {
        let storage = encode_database(
            db,
            &self.params,
            &self.derived,
            &self.points,
            storage_seed,
            mode,
        )?;
        self.deal_randomness(storage, dealer_seed, mode)
    }

    /// Attaches fresh round randomness to existing storage.
    pub fn deal_randomness(
        &self,
        storage: EncodedStorage,
        dealer_seed: &Seed,
        mode: Mode,
    ) -> Result<Dealt> {
        let (p, d) = (&self.params, &self.derived);
        let randomness: Vec<RoundRandomness> = (0..d.s)
            .map(|s| {
                if p.server_privacy {
                    generate_round_randomness(p, d, &self.points, s, dealer_seed, mode)
                } else {
                    Ok(RoundRandomness::zero(s, p.n))
                }
            })
            .collect::<Result<_>>()?;
        let servers = storage
            .shares
            .iter()
            .map(|share| ServerState {
                server: share.server,
                storage: share.clone(),
                randomness: randomness.iter().map(|r| r.shares[share.server]).collect(),
            })
            .collect();
        Ok(Dealt {
            storage,
            randomness,
            servers,
        })
    }

    /// Builds the users for a theta tuple (0-based), each with its own seed.
    pub fn users(&self, theta: &[usize], seed: &Seed) -> Result<Vec<UserState>> {
        if theta.len() != self.params.users() {
            return Err(Error::InvalidParams(format!(
                "theta has {} entries for {} users",
                theta.len(),
                self.params.users()
            )));
        }
        theta
            .iter()
            .enumerate()
            .map(|(m, &t)| UserState::new(&self.params, m, t, seed.derive(&format!("user/{m}"))))
            .collect()
    }

    /// Round-`s` queries, indexed `[user][server]`.
    pub fn queries(&self, users: &[UserState], s: usize) -> Result<Vec<Vec<RoundQuery>>> {
        users
            .iter()
            .map(|u| emit_queries(u, &self.params, &self.derived, &self.points, s))
            .collect()
    }

    /// Honest round-`s` answers from every server.
    pub fn answers(
        &self,
        servers: &[ServerState],
        queries: &[Vec<RoundQuery>],
        s: usize,
    ) -> Result<Vec<RoundAnswer>> {
        servers
            .iter()
            .map(|st| {
                let mine: Vec<&RoundQuery> = queries
                    .iter()
                    .map(|per_user| &per_user[st.server])
                    .collect();
                compute_answer(
                    st,
                    &mine,
                    &self.intermediate[s],
                    &self.params,
                    &self.derived,
                    &self.points,
                    s,
                )
            })
            .collect()
    }

    pub fn decode(&self, answers: &[RoundAnswer], s: usize) -> Result<DecodedRound> {
        decode_round(answers, &self.params, &self.derived, &self.points, s)
    }
}

/// Knobs for [`run_protocol`].
#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Overrides the smallest admissible prime.
    pub q: Option<u64>,
    /// Keep plaintext polynomials for oracle checks.
    pub mode: Mode,
    /// Every user decodes independently instead of sharing one decode.
    pub per_user_decode: bool,
    /// Skip the |B| <= B, |U| <= U guard (used to demonstrate failure).
    pub allow_excess_adversary: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            q: None,
            mode: Mode::Protocol,
            per_user_decode: false,
            allow_excess_adversary: false,
        }
    }
}

/// Full record of one execution, including everything the audits need.
#[derive(Clone, Debug)]
pub struct Execution {
    pub protocol: Protocol,
    pub dealt: Dealt,
    pub theta: Vec<usize>,
    pub adversary: AdversaryConfig,
    /// `[round][user][server]`.
    pub queries: Vec<Vec<Vec<RoundQuery>>>,
    /// `[round][server]`, before the adversary acts.
    pub honest_answers: Vec<Vec<RoundAnswer>>,
    /// `[round][server]`, as received by the users.
    pub answers: Vec<Vec<RoundAnswer>>,
    pub decoded: Vec<DecodedRound>,
    pub file: RetrievedFile,
    /// Plaintext database reads between dealing and decoding; always zero.
    pub answer_phase_reads: u64,
    pub transcript: Transcript,
}

/// Runs S rounds of query, answer, adversary and decode, then checks the
/// retrieved file against the plaintext. `db = None` generates a uniform
/// database from the seed. `theta` is 0-based.
pub fn run_protocol(
    params: &SystemParams,
    db: Option<&Database>,
    theta: &[usize],
    adversary: &AdversaryConfig,
    seed: &Seed,
    opts: &RunOptions,
) -> Result<Execution> {
    let start = Instant::now();
    let protocol = Protocol::new(params.clone(), opts.q)?;
    let generated;
    let db = match db {
        Some(db) => db,
        None => {
            generated = Database::random(&protocol.params, &protocol.derived, seed);
            &generated
        }
    };
    execute(protocol, db, theta, adversary, seed, opts, start)
}

/// As [`run_protocol`] on an already-built [`Protocol`].
pub fn run_with_protocol(
    protocol: &Protocol,
    db: &Database,
    theta: &[usize],
    adversary: &AdversaryConfig,
    seed: &Seed,
    opts: &RunOptions,
) -> Result<Execution> {
    execute(
        protocol.clone(),
        db,
        theta,
        adversary,
        seed,
        opts,
        Instant::now(),
    )
}

fn execute(
    protocol: Protocol,
    db: &Database,
    theta: &[usize],
    adversary: &AdversaryConfig,
    seed: &Seed,
    opts: &RunOptions,
    start: Instant,
) -> Result<Execution> {
    let (p, d) = (&protocol.params, &protocol.derived);
    if opts.allow_excess_adversary {
        adversary.check_indices(p.n)?;
    } else {
        adversary.check_bounds(p)?;
    }
    let users = protocol.users(theta, seed)?;
    let desired = file_offset(&p.f, theta)
        .ok_or_else(|| Error::InvalidParams("theta out of range".into()))?;

    let dealt = protocol.deal(
        db,
        &seed.derive("storage"),
        &seed.derive("dealer"),
        opts.mode,
    )?;
    let reads_before = db.reads();

    let mut adv_rng = seed.derive("adversary").rng();
    let mut all_queries = Vec::with_capacity(d.s);
    let mut honest = Vec::with_capacity(d.s);
    let mut received = Vec::with_capacity(d.s);
    for s in 0..d.s {
        let queries = protocol.queries(&users, s)?;
        let answers = protocol.answers(&dealt.servers, &queries, s)?;
        let after: Vec<RoundAnswer> = answers
            .iter()
            .map(|&a| apply_adversary(a, adversary, &protocol.field, &mut adv_rng))
            .collect();
        all_queries.push(queries);
        honest.push(answers);
        received.push(after);
    }
    let answer_phase_reads = db.reads() - reads_before;

    let mut decoded = Vec::with_capacity(d.s);
    for (s, answers) in received.iter().enumerate() {
        let round = protocol.decode(answers, s)?;
        if opts.per_user_decode {
            for _ in 1..p.users() {
                if protocol.decode(answers, s)? != round {
                    return Err(Error::DecodeFailure(
                        "users decoded different polynomials".into(),
                    ));
                }
            }
        }
        decoded.push(round);
    }
    let file = assemble_file(&decoded, theta, d)?;
    if answer_phase_reads != 0 {
        return Err(Error::InvalidParams(
            "plaintext database was read during the answer phase".into(),
        ));
    }
    if file.rows != db.file(desired) {
        return Err(Error::WrongFile);
    }

    let responsive: u64 = received
        .iter()
        .flatten()
        .filter(|a| a.value.is_some())
        .count() as u64;
    let randomness_symbols = if p.server_privacy {
        (d.s * p.noise_per_round()) as u64
    } else {
        0
    };
    let l = d.l as u64;
    let metrics = Metrics {
        l,
        d: responsive,
        r: Rate::new(l, responsive),
        randomness_symbols,
        rho: Rate::new(randomness_symbols, l),
        r_formula: closed_form_rate(p),
        rho_formula: closed_form_secrecy_rate(p),
        wall_time_us: start.elapsed().as_micros() as u64,
    };
    let rounds = (0..d.s)
        .map(|s| RoundRecord {
            round: s + 1,
            queries_digest: queries_digest(&all_queries[s]),
            answers: received[s].iter().map(|a| a.value.map(Fe::value)).collect(),
            erased: received[s].iter().map(|a| a.value.is_none()).collect(),
            answer_poly: decoded[s]
                .answer_poly
                .coeffs()
                .iter()
                .map(|c| c.value())
                .collect(),
            column: decoded[s].column.iter().map(|c| c.value()).collect(),
        })
        .collect();
    let transcript = Transcript {
        params: p.clone(),
        derived: d.clone(),
        points_digest: protocol.points_digest(),
        seed: *seed,
        theta: theta.iter().map(|t| t + 1).collect(),
        adversary: adversary.into(),
        rounds,
        retrieved_file: file
            .rows
            .iter()
            .map(|r| r.iter().map(|v| v.value()).collect())
            .collect(),
        metrics,
    };

    Ok(Execution {
        protocol,
        dealt,
        theta: theta.to_vec(),
        adversary: adversary.clone(),
        queries: all_queries,
        honest_answers: honest,
        answers: received,
        decoded,
        file,
        answer_phase_reads,
        transcript,
    })
}

fn queries_digest(queries: &[Vec<RoundQuery>]) -> String {
    let mut h = Sha256::new();
    for per_user in queries {
        for q in per_user {
            for v in q.values() {
                h.update(v.value().to_le_bytes());
            }
        }
    }
    hex::encode(h.finalize())
}

/// Default adversary for a parameter set: the last B servers are Byzantine
/// and the U servers before them are silent.
pub fn default_adversary(p: &SystemParams, strategy: Strategy) -> AdversaryConfig {
    AdversaryConfig {
        byzantine: (p.n - p.b..p.n).collect(),
        unresponsive: (p.n - p.b - p.u..p.n - p.b).collect(),
        strategy,
    }
}

/// The worked example: 1-based Byzantine server 3, unresponsive server 7,
/// theta = (1, 2), uniform-random corruption.
pub fn run_demo(seed: &Seed) -> Result<Execution> {
    let adversary = AdversaryConfig {
        byzantine: [2].into(),
        unresponsive: [6].into(),
        strategy: Strategy::UniformRandom,
    };
    run_protocol(
        &SystemParams::demo(),
        None,
        &[0, 1],
        &adversary,
        seed,
        &RunOptions::default(),
    )
}

/// Fixed seed used by `demo` when none is given.
pub const DEMO_SEED: u64 = 2024;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_runs() {
        let ex = run_demo(&Seed::from_u64(DEMO_SEED)).unwrap();
        let m = &ex.transcript.metrics;
        assert_eq!(m.r, Rate::new(1, 4));
        assert_eq!(m.rho, Rate::new(7, 3));
        assert_eq!(m.d, 24);
        assert_eq!(ex.answer_phase_reads, 0);
        assert_eq!(
            ex.transcript.rounds[0]
                .erased
                .iter()
                .filter(|&&e| e)
                .count(),
            1
        );
    }

    #[test]
    fn bad_theta() {
        let p = SystemParams::demo();
        let r = run_protocol(
            &p,
            None,
            &[0, 2],
            &AdversaryConfig::honest(),
            &Seed::from_u64(1),
            &RunOptions::default(),
        );
        assert!(matches!(r, Err(Error::InvalidParams(_))));
        let r = run_protocol(
            &p,
            None,
            &[0],
            &AdversaryConfig::honest(),
            &Seed::from_u64(1),
            &RunOptions::default(),
        );
        assert!(matches!(r, Err(Error::InvalidParams(_))));
    }

    #[test]
    fn adversary_guard() {
        let p = SystemParams::demo();
        let adv = AdversaryConfig {
            byzantine: [0, 1].into(),
            unresponsive: Default::default(),
            strategy: Strategy::UniformRandom,
        };
        let r = run_protocol(
            &p,
            None,
            &[0, 0],
            &adv,
            &Seed::from_u64(1),
            &RunOptions::default(),
        );
        assert!(matches!(r, Err(Error::AdversaryOutOfBounds(_))));
    }

    #[test]
    fn default_adversary_is_maximal() {
        let p = SystemParams::demo();
        let a = default_adversary(&p, Strategy::Constant(0));
        assert_eq!(a.byzantine.len(), p.b);
        assert_eq!(a.unresponsive.len(), p.u);
        assert!(a.check_bounds(&p).is_ok());
    }
}

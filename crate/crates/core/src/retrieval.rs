//! Decoding on the user side: recover the answer polynomial of each round,
//! read off one column of the desired file, then stitch the columns together.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Fe;
use crate::params::{DerivedParams, PublicPoints, SystemParams};
use crate::poly::Poly;
use crate::rscode::{rs_decode, ReceivedWord};
use crate::server::RoundAnswer;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodedRound {
    pub round: usize,
    pub answer_poly: Poly,
    pub column: Vec<Fe>,
}

/// The recovered lambda x K file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievedFile {
    pub theta: Vec<usize>,
    pub rows: Vec<Vec<Fe>>,
}

/// RS-decodes one round's answers at dimension lambda + K + X + sum(T) - 1.
/// `answers` must hold exactly one entry per server, in server order.
pub fn recover_answer_polynomial(
    answers: &[RoundAnswer],
    p: &SystemParams,
    d: &DerivedParams,
    pts: &PublicPoints,
) -> Result<Poly> {
    if answers.len() != p.n || answers.iter().enumerate().any(|(n, a)| a.server != n) {
        return Err(Error::ShapeMismatch(
            "expected one answer per server in server order".into(),
        ));
    }
    if let Some(r) = answers.first().map(|a| a.round) {
        if answers.iter().any(|a| a.round != r) {
            return Err(Error::ShapeMismatch("answers from different rounds".into()));
        }
    }
    let word = ReceivedWord::new(answers.iter().map(|a| a.value).collect(), pts.alpha.clone())?;
    rs_decode(&d.field(), &word, d.answer_dimension(p))
}

/// Evaluates the answer polynomial at beta_{0..lambda, s}.
pub fn extract_round_symbols(
    answer_poly: &Poly,
    d: &DerivedParams,
    pts: &PublicPoints,
    s: usize,
) -> Vec<Fe> {
    answer_poly.evaluate_many(&d.field(), &pts.beta_column(s))
}

/// Decodes one round end to end.
pub fn decode_round(
    answers: &[RoundAnswer],
    p: &SystemParams,
    d: &DerivedParams,
    pts: &PublicPoints,
    s: usize,
) -> Result<DecodedRound> {
    let answer_poly = recover_answer_polynomial(answers, p, d, pts)?;
    let column = extract_round_symbols(&answer_poly, d, pts, s);
    Ok(DecodedRound {
        round: s,
        answer_poly,
        column,
    })
}

/// Places column `s` from the round-`s` result. Rounds may arrive in any order.
pub fn assemble_file(
    rounds: &[DecodedRound],
    theta: &[usize],
    d: &DerivedParams,
) -> Result<RetrievedFile> {
    let mut rows = vec![vec![Fe::ZERO; d.s]; d.lambda];
    let mut filled = vec![false; d.s];
    for r in rounds {
        if r.round >= d.s || r.column.len() != d.lambda {
            return Err(Error::ShapeMismatch(format!(
                "bad decoded round {}",
                r.round
            )));
        }
        for (row, &v) in rows.iter_mut().zip(&r.column) {
            row[r.round] = v;
        }
        filled[r.round] = true;
    }
    if let Some(missing) = filled.iter().position(|f| !f) {
        return Err(Error::MissingRound(missing));
    }
    Ok(RetrievedFile {
        theta: theta.to_vec(),
        rows,
    })
}

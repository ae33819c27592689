//! Constant-time characterizations of proof profiles.
//!
//! Where a characterization is an "if and only if" the classifier returns
//! `Proof` or `Manipulable` and sets `complete`. Where it is only sufficient
//! the classifier never invents `Manipulable`; it returns `Unknown` instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voting::{Profile, RuleKind, ScoringProfile, TieBreakPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassStatus {
    Proof,
    Manipulable,
    Unknown,
}

impl ClassStatus {
    pub fn name(&self) -> &'static str {
        match self {
            ClassStatus::Proof => "Proof",
            ClassStatus::Manipulable => "Manipulable",
            ClassStatus::Unknown => "Unknown",
        }
    }
}

/// The case that decided a `Proof` classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// Only one candidate.
    SingleCandidate,
    /// All pairwise gaps at most 1, ties broken for the manipulators.
    AlmostEqual,
    /// All scores equal.
    AllEqual,
    /// Unique winner leading every rival by at least `required`.
    Margin { required: i64 },
    /// Unique winner, ties broken against the manipulators.
    UniqueWinner,
    /// All but one candidate tied at the top, the last exactly one behind.
    OneBelow,
}

impl Basis {
    pub fn label(&self) -> String {
        match self {
            Basis::SingleCandidate => "single-candidate".into(),
            Basis::AlmostEqual => "almost-equal".into(),
            Basis::AllEqual => "all-equal".into(),
            Basis::Margin { required } => format!("margin>={required}"),
            Basis::UniqueWinner => "unique-winner".into(),
            Basis::OneBelow => "one-below".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub status: ClassStatus,
    pub basis: Option<Basis>,
    /// The characterization used is an exact one.
    pub complete: bool,
}

impl Classification {
    fn proof(basis: Basis, complete: bool) -> Self {
        Self {
            status: ClassStatus::Proof,
            basis: Some(basis),
            complete,
        }
    }

    fn manipulable() -> Self {
        Self {
            status: ClassStatus::Manipulable,
            basis: None,
            complete: true,
        }
    }

    fn unknown() -> Self {
        Self {
            status: ClassStatus::Unknown,
            basis: None,
            complete: false,
        }
    }
}

/// Lead of the unique top scorer over the runner-up, `None` on a tie at the
/// top. A single candidate leads by `i64::MAX`.
pub fn unique_margin(scores: &[i64]) -> Option<i64> {
    let mut sorted = scores.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    match sorted.as_slice() {
        [] => None,
        [_] => Some(i64::MAX),
        [a, b, ..] if a > b => Some(a - b),
        _ => None,
    }
}

fn spread(scores: &[i64]) -> i64 {
    let hi = scores.iter().max().copied().unwrap_or(0);
    let lo = scores.iter().min().copied().unwrap_or(0);
    hi - lo
}

fn wrong_rule(expected: &str, x: &ScoringProfile) -> Error {
    Error::WrongRule {
        expected: expected.into(),
        found: x.rule().to_string(),
    }
}

fn check_c(c: usize) -> Result<()> {
    if c == 0 {
        return Err(Error::PreconditionViolated(
            "coalition size must be >= 1".into(),
        ));
    }
    Ok(())
}

/// Plurality, exact for every `c`. A fixed-order tie-break only admits the
/// margin cases and is reported as incomplete otherwise.
pub fn classify_plurality(
    x: &ScoringProfile,
    c: usize,
    tb: &TieBreakPolicy,
) -> Result<Classification> {
    if !matches!(
        x.rule().kind(),
        RuleKind::Plurality | RuleKind::KApproval(1)
    ) {
        return Err(wrong_rule("plurality", x));
    }
    check_c(c)?;
    if x.m() == 1 {
        return Ok(Classification::proof(Basis::SingleCandidate, true));
    }
    let scores = x.scores();
    let margin = unique_margin(scores);
    let fixed = matches!(tb, TieBreakPolicy::FixedOrder(_));
    if c == 1 {
        match tb {
            TieBreakPolicy::ForManipulators if spread(scores) <= 1 => {
                return Ok(Classification::proof(Basis::AlmostEqual, true))
            }
            TieBreakPolicy::AgainstManipulators if spread(scores) == 0 => {
                return Ok(Classification::proof(Basis::AllEqual, true))
            }
            _ => {}
        }
        if margin.is_some_and(|d| d >= 2) {
            return Ok(Classification::proof(Basis::Margin { required: 2 }, true));
        }
        if margin.is_some() && matches!(tb, TieBreakPolicy::AgainstManipulators) {
            return Ok(Classification::proof(Basis::UniqueWinner, true));
        }
    } else {
        let required = c as i64 + 1;
        if margin.is_some_and(|d| d >= required) {
            return Ok(Classification::proof(Basis::Margin { required }, true));
        }
    }
    if fixed {
        return Ok(Classification::unknown());
    }
    Ok(Classification::manipulable())
}

/// k-approval with `1 < k < m`: exact for `c = 1`, sufficient otherwise.
pub fn classify_kapproval(
    x: &ScoringProfile,
    c: usize,
    tb: &TieBreakPolicy,
) -> Result<Classification> {
    let RuleKind::KApproval(k) = x.rule().kind() else {
        return Err(wrong_rule("kapproval", x));
    };
    if k <= 1 || k >= x.m() {
        return Err(Error::InvalidK { k, m: x.m() });
    }
    check_c(c)?;
    let scores = x.scores();
    let margin = unique_margin(scores);
    if c == 1 {
        if margin.is_some_and(|d| d >= 2) {
            return Ok(Classification::proof(Basis::Margin { required: 2 }, true));
        }
        if spread(scores) == 0 && matches!(tb, TieBreakPolicy::ForManipulators) {
            return Ok(Classification::proof(Basis::AllEqual, true));
        }
        if matches!(tb, TieBreakPolicy::FixedOrder(_)) {
            return Ok(Classification::unknown());
        }
        return Ok(Classification::manipulable());
    }
    let required = 2 * c as i64;
    if margin.is_some_and(|d| d >= required) {
        return Ok(Classification::proof(Basis::Margin { required }, false));
    }
    Ok(Classification::unknown())
}

/// Veto, sufficient conditions only.
pub fn classify_veto(x: &ScoringProfile, c: usize, _tb: &TieBreakPolicy) -> Result<Classification> {
    if !matches!(x.rule().kind(), RuleKind::Veto) {
        return Err(wrong_rule("veto", x));
    }
    check_c(c)?;
    if x.m() == 1 {
        return Ok(Classification::proof(Basis::SingleCandidate, false));
    }
    let scores = x.scores();
    let required = c as i64 + 1;
    if unique_margin(scores).is_some_and(|d| d >= required) {
        return Ok(Classification::proof(Basis::Margin { required }, false));
    }
    if c + 1 < x.m() && spread(scores) == 0 {
        return Ok(Classification::proof(Basis::AllEqual, false));
    }
    Ok(Classification::unknown())
}

/// Borda with a single manipulator. Tie-break agnostic.
pub fn classify_borda_sp(x: &ScoringProfile) -> Result<Classification> {
    if !matches!(x.rule().kind(), RuleKind::Borda) {
        return Err(wrong_rule("borda", x));
    }
    let m = x.m();
    if m == 1 {
        return Ok(Classification::proof(Basis::SingleCandidate, true));
    }
    let scores = x.scores();
    let required = m as i64;
    if unique_margin(scores).is_some_and(|d| d >= required) {
        return Ok(Classification::proof(Basis::Margin { required }, true));
    }
    if spread(scores) == 0 {
        return Ok(Classification::proof(Basis::AllEqual, true));
    }
    let top = *scores.iter().max().expect("m >= 2");
    let at_top = scores.iter().filter(|&&s| s == top).count();
    if at_top == m - 1 && scores.iter().any(|&s| s == top - 1) {
        return Ok(Classification::proof(Basis::OneBelow, true));
    }
    Ok(Classification::manipulable())
}

/// Dispatches on the rule. Borda with `c > 1` has no characterization.
pub fn classify(x: &ScoringProfile, c: usize, tb: &TieBreakPolicy) -> Result<Classification> {
    check_c(c)?;
    if x.m() == 1 {
        return Ok(Classification::proof(Basis::SingleCandidate, true));
    }
    match x.rule().kind() {
        RuleKind::Plurality | RuleKind::KApproval(1) => classify_plurality(x, c, tb),
        RuleKind::KApproval(_) => classify_kapproval(x, c, tb),
        RuleKind::Veto => classify_veto(x, c, tb),
        RuleKind::Borda if c == 1 => classify_borda_sp(x),
        RuleKind::Borda => Ok(Classification::unknown()),
    }
}

/// True iff two distinct candidates sit in the top `l` positions of every
/// vote, which makes the Borda profile manipulable by one new voter.
///
/// Requires `n >= 1`, `(l - 1) n < m`, and `n >= 2` or `m >= 3`.
pub fn borda_sufficient_manipulable(p: &Profile, l: usize) -> Result<bool> {
    let (n, m) = (p.n(), p.m());
    if n == 0 {
        return Err(Error::PreconditionViolated(
            "needs at least one vote".into(),
        ));
    }
    if l.saturating_sub(1) * n >= m {
        return Err(Error::PreconditionViolated(format!(
            "(l-1)n < m fails for l={l}, n={n}, m={m}"
        )));
    }
    if n < 2 && m < 3 {
        return Err(Error::PreconditionViolated("needs n >= 2 or m >= 3".into()));
    }
    let mut hits = vec![0usize; m];
    for v in p.votes() {
        for &c in v.order().iter().take(l) {
            hits[c] += 1;
        }
    }
    Ok(hits.iter().filter(|&&h| h == n).count() >= 2)
}

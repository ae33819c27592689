//! Preferences, positional scoring rules, tallies and winner determination.
//!
//! Candidates are dense indices `0..m`. Every value here is immutable once
//! built, so the types are freely shared across worker threads.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A candidate index in `0..m`.
pub type Candidate = usize;

/// A strict linear order over `m` candidates, most preferred first.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Candidate>", into = "Vec<Candidate>")]
pub struct Preference {
    order: Vec<Candidate>,
    rank: Vec<usize>,
}

impl Preference {
    pub fn new(order: Vec<Candidate>) -> Result<Self> {
        let m = order.len();
        if m == 0 {
            return Err(Error::InvalidPreference("empty order".into()));
        }
        let mut rank = vec![usize::MAX; m];
        for (pos, &c) in order.iter().enumerate() {
            if c >= m {
                return Err(Error::InvalidPreference(format!(
                    "candidate {c} out of range for m={m}"
                )));
            }
            if rank[c] != usize::MAX {
                return Err(Error::InvalidPreference(format!("candidate {c} repeated")));
            }
            rank[c] = pos;
        }
        Ok(Self { order, rank })
    }

    /// The order `0 ≻ 1 ≻ … ≻ m-1`.
    pub fn identity(m: usize) -> Self {
        assert!(m >= 1, "a preference needs at least one candidate");
        let order: Vec<_> = (0..m).collect();
        Self {
            rank: order.clone(),
            order,
        }
    }

    /// Every linear order over `m` candidates, in lexicographic order of
    /// their position sequences.
    pub fn all(m: usize) -> Vec<Preference> {
        let mut out = Vec::new();
        let mut cur: Vec<Candidate> = (0..m).collect();
        loop {
            out.push(Preference::new(cur.clone()).expect("permutation"));
            if !next_permutation(&mut cur) {
                break;
            }
        }
        out
    }

    pub fn m(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[Candidate] {
        &self.order
    }

    pub fn top(&self) -> Candidate {
        self.order[0]
    }

    pub fn bottom(&self) -> Candidate {
        self.order[self.order.len() - 1]
    }

    /// Zero-based position of `c` (0 = most preferred).
    pub fn rank(&self, c: Candidate) -> usize {
        self.rank[c]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.rank
    }

    /// Strict preference of `a` over `b`.
    pub fn prefers(&self, a: Candidate, b: Candidate) -> bool {
        self.rank[a] < self.rank[b]
    }

    /// Renames every candidate `c` to `perm[c]`.
    pub fn relabel(&self, perm: &[Candidate]) -> Preference {
        Preference::new(self.order.iter().map(|&c| perm[c]).collect())
            .expect("relabeling by a permutation keeps a permutation")
    }
}

impl TryFrom<Vec<Candidate>> for Preference {
    type Error = Error;

    fn try_from(order: Vec<Candidate>) -> Result<Self> {
        Preference::new(order)
    }
}

impl From<Preference> for Vec<Candidate> {
    fn from(p: Preference) -> Self {
        p.order
    }
}

impl fmt::Debug for Preference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.order.iter().enumerate() {
            if i > 0 {
                f.write_str(">")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Advances `v` to the next lexicographic permutation; false when `v` was the last one.
pub(crate) fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// A sequence of votes over a common candidate set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    m: usize,
    votes: Vec<Preference>,
}

impl Profile {
    pub fn new(m: usize, votes: Vec<Preference>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidPreference("m must be at least 1".into()));
        }
        if let Some(v) = votes.iter().find(|v| v.m() != m) {
            return Err(Error::MismatchedCandidates {
                expected: m,
                found: v.m(),
            });
        }
        Ok(Self { m, votes })
    }

    pub fn empty(m: usize) -> Self {
        Self::new(m, Vec::new()).expect("m >= 1")
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.votes.len()
    }

    pub fn votes(&self) -> &[Preference] {
        &self.votes
    }
}

/// The four positional rules studied here.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleKind {
    Plurality,
    Veto,
    KApproval(usize),
    Borda,
}

/// A rule bound to a candidate count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rule {
    kind: RuleKind,
    m: usize,
}

impl Rule {
    pub fn new(kind: RuleKind, m: usize) -> Result<Self> {
        ScoreVector::for_rule(kind, m)?;
        Ok(Self { kind, m })
    }

    pub fn plurality(m: usize) -> Self {
        Self::new(RuleKind::Plurality, m).expect("plurality is valid for m >= 1")
    }

    pub fn veto(m: usize) -> Self {
        Self::new(RuleKind::Veto, m).expect("veto is valid for m >= 1")
    }

    pub fn borda(m: usize) -> Self {
        Self::new(RuleKind::Borda, m).expect("borda is valid for m >= 1")
    }

    pub fn kapproval(k: usize, m: usize) -> Result<Self> {
        Self::new(RuleKind::KApproval(k), m)
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// The same rule over a different number of candidates.
    pub fn with_m(&self, m: usize) -> Result<Self> {
        Self::new(self.kind, m)
    }

    pub fn score_vector(&self) -> ScoreVector {
        make_score_vector(self)
    }

    /// Lower-case name used in CSV output and on the command line.
    pub fn name(&self) -> &'static str {
        match self.kind {
            RuleKind::Plurality => "plurality",
            RuleKind::Veto => "veto",
            RuleKind::KApproval(_) => "kapproval",
            RuleKind::Borda => "borda",
        }
    }

    /// `k` for k-approval (1 for plurality), `None` otherwise.
    pub fn k(&self) -> Option<usize> {
        match self.kind {
            RuleKind::Plurality => Some(1),
            RuleKind::KApproval(k) => Some(k),
            _ => None,
        }
    }

    /// Whether a uniform sampler over the rule's scoring profiles exists.
    pub fn supports_isc(&self) -> bool {
        !matches!(self.kind, RuleKind::Borda)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RuleKind::KApproval(k) => write!(f, "{k}-approval(m={})", self.m),
            _ => write!(f, "{}(m={})", self.name(), self.m),
        }
    }
}

/// Non-increasing positional scores `α_1 ≥ … ≥ α_m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreVector(Vec<i64>);

impl ScoreVector {
    pub fn new(alpha: Vec<i64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidScores("empty score vector".into()));
        }
        if alpha.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidScores(format!(
                "score vector {alpha:?} is not non-increasing"
            )));
        }
        Ok(Self(alpha))
    }

    /// The canonical vector for `kind` over `m` candidates. Veto uses
    /// `(0, …, 0, -1)`.
    pub fn for_rule(kind: RuleKind, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidScores("m must be at least 1".into()));
        }
        let alpha = match kind {
            RuleKind::Plurality => approval(1, m),
            RuleKind::KApproval(k) => {
                if k == 0 || k >= m {
                    return Err(Error::InvalidK { k, m });
                }
                approval(k, m)
            }
            RuleKind::Veto => {
                let mut a = vec![0; m];
                a[m - 1] = -1;
                a
            }
            RuleKind::Borda => (0..m).rev().map(|s| s as i64).collect(),
        };
        Ok(Self(alpha))
    }

    pub fn alpha(&self) -> &[i64] {
        &self.0
    }

    pub fn at(&self, position: usize) -> i64 {
        self.0[position]
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().sum()
    }

    pub fn first(&self) -> i64 {
        self.0[0]
    }

    pub fn last(&self) -> i64 {
        self.0[self.0.len() - 1]
    }
}

fn approval(k: usize, m: usize) -> Vec<i64> {
    (0..m).map(|i| i64::from(i < k)).collect()
}

/// Canonical score vector of an already validated rule.
pub fn make_score_vector(rule: &Rule) -> ScoreVector {
    ScoreVector::for_rule(rule.kind, rule.m).expect("rule was validated on construction")
}

/// Per-candidate totals of `n` votes under a rule.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoringProfile {
    rule: Rule,
    n: usize,
    scores: Vec<i64>,
}

impl ScoringProfile {
    /// Checks length, the total `n · Σα` and the per-candidate range
    /// `[n·α_m, n·α_1]`. Realizability is not checked (it is only
    /// non-trivial for Borda).
    pub fn new(rule: Rule, n: usize, scores: Vec<i64>) -> Result<Self> {
        let alpha = rule.score_vector();
        if scores.len() != rule.m {
            return Err(Error::InvalidScores(format!(
                "expected {} scores, got {}",
                rule.m,
                scores.len()
            )));
        }
        let n_i = n as i64;
        let total: i64 = scores.iter().sum();
        if total != n_i * alpha.sum() {
            return Err(Error::InvalidScores(format!(
                "scores sum to {total}, expected {}",
                n_i * alpha.sum()
            )));
        }
        let (lo, hi) = (n_i * alpha.last(), n_i * alpha.first());
        if let Some(s) = scores.iter().find(|&&s| s < lo || s > hi) {
            return Err(Error::InvalidScores(format!(
                "score {s} outside [{lo}, {hi}]"
            )));
        }
        Ok(Self { rule, n, scores })
    }

    pub(crate) fn new_unchecked(rule: Rule, n: usize, scores: Vec<i64>) -> Self {
        debug_assert_eq!(scores.len(), rule.m);
        Self { rule, n, scores }
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.scores.len()
    }

    pub fn scores(&self) -> &[i64] {
        &self.scores
    }

    /// The profile after `extra` additional votes.
    pub fn with_votes(&self, extra: &[Preference]) -> ScoringProfile {
        let alpha = self.rule.score_vector();
        let mut scores = self.scores.clone();
        for v in extra {
            for (pos, &c) in v.order().iter().enumerate() {
                scores[c] += alpha.at(pos);
            }
        }
        ScoringProfile::new_unchecked(self.rule, self.n + extra.len(), scores)
    }

    /// Renames candidate `c` to `perm[c]`.
    pub fn relabel(&self, perm: &[Candidate]) -> ScoringProfile {
        let mut scores = vec![0; self.scores.len()];
        for (c, &s) in self.scores.iter().enumerate() {
            scores[perm[c]] = s;
        }
        ScoringProfile::new_unchecked(self.rule, self.n, scores)
    }
}

/// Sums the positional scores of every vote.
pub fn tally(profile: &Profile, rule: &Rule) -> Result<ScoringProfile> {
    if profile.m() != rule.m {
        return Err(Error::MismatchedCandidates {
            expected: rule.m,
            found: profile.m(),
        });
    }
    Ok(ScoringProfile::new_unchecked(*rule, 0, vec![0; rule.m]).with_votes(profile.votes()))
}

/// How tied top scores are resolved.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TieBreakPolicy {
    /// The tied candidate ranked highest in the manipulators' reference order.
    ForManipulators,
    /// The tied candidate ranked lowest in the manipulators' reference order.
    AgainstManipulators,
    /// The tied candidate ranked highest in a fixed order.
    FixedOrder(Preference),
}

impl TieBreakPolicy {
    pub fn fixed_identity(m: usize) -> Self {
        TieBreakPolicy::FixedOrder(Preference::identity(m))
    }

    pub fn name(&self) -> &'static str {
        match self {
            TieBreakPolicy::ForManipulators => "for",
            TieBreakPolicy::AgainstManipulators => "against",
            TieBreakPolicy::FixedOrder(_) => "fixed",
        }
    }
}

/// Coalition size plus the order used by [`TieBreakPolicy::ForManipulators`]
/// and [`TieBreakPolicy::AgainstManipulators`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoalitionContext {
    pub c: usize,
    pub sigma_ref: Preference,
}

impl CoalitionContext {
    pub fn new(c: usize, sigma_ref: Preference) -> Result<Self> {
        if c == 0 {
            return Err(Error::PreconditionViolated(
                "coalition size must be >= 1".into(),
            ));
        }
        Ok(Self { c, sigma_ref })
    }
}

/// Candidates attaining the maximum score, in index order.
pub fn argmax_set(scores: &[i64]) -> Vec<Candidate> {
    let Some(&best) = scores.iter().max() else {
        return Vec::new();
    };
    (0..scores.len()).filter(|&c| scores[c] == best).collect()
}

/// Winner of a raw score vector.
pub fn winner_of_scores(
    scores: &[i64],
    tb: &TieBreakPolicy,
    sigma_ref: Option<&Preference>,
) -> Result<Candidate> {
    let tied = argmax_set(scores);
    if tied.is_empty() {
        return Err(Error::InvalidScores("no candidates".into()));
    }
    let reference = match tb {
        TieBreakPolicy::FixedOrder(order) => order,
        _ => sigma_ref.ok_or(Error::MissingReference)?,
    };
    if reference.m() != scores.len() {
        return Err(Error::MismatchedCandidates {
            expected: scores.len(),
            found: reference.m(),
        });
    }
    let by_rank = |&c: &Candidate| reference.rank(c);
    let w = match tb {
        TieBreakPolicy::AgainstManipulators => tied.into_iter().max_by_key(by_rank),
        _ => tied.into_iter().min_by_key(by_rank),
    };
    Ok(w.expect("non-empty tied set"))
}

/// The unique winner: maximum score, ties resolved by `tb`.
pub fn winner(
    x: &ScoringProfile,
    tb: &TieBreakPolicy,
    sigma_ref: Option<&Preference>,
) -> Result<Candidate> {
    winner_of_scores(x.scores(), tb, sigma_ref)
}

/// True iff every preference ranks `a` strictly above `b`; vacuously true
/// for no preferences, always false when `a == b`.
pub fn unanimously_prefers(truths: &[Preference], a: Candidate, b: Candidate) -> bool {
    a != b && truths.iter().all(|p| p.prefers(a, b))
}

//! Brute-force ground truth for strategy-proofness and c-collusion-proofness
//! of a scoring profile with respect to `c` new voters.
//!
//! A profile is manipulable when some coalition truth profile `P` and some
//! deviation `D` exist such that a coalition member strictly prefers the
//! winner under `D` to the winner under truthful voting `P`
//! ([`Improvement::AnyMember`]). The stricter [`Improvement::Unanimous`]
//! reading requires every member to gain.
//!
//! Tie resolution inside a coalition election: the coalition's first
//! member is the reference manipulator.
//!
//! * For the manipulators: a tied candidate that some coalition ballot ranks
//!   first wins, the reference manipulator's favourite among them; if no tied
//!   candidate heads a coalition ballot, the tie goes to the tied candidate
//!   the reference manipulator ranks lowest.
//! * Against the manipulators: the tied candidate the reference manipulator
//!   ranks lowest.
//! * Fixed order: the fixed order decides, independent of the coalition.
//!
//! Both manipulator-relative policies reduce to [`crate::voting::winner`]
//! with the order returned by [`tie_reference`].
//!
//! Enumeration works on outcome classes. Ballots are grouped by their
//! effect (score increments and first choice), deviations are multisets of
//! effects, and each deviation collapses to its (tied set, favoured set)
//! pair. For each reference order the achievable winners are resolved from
//! those classes once and shared by every truth profile with that first
//! member.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voting::{winner_of_scores, Candidate, Preference, ScoringProfile, TieBreakPolicy};

/// Default cap on winner evaluations.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    max_evaluations: u64,
}

impl Budget {
    pub fn new(max_evaluations: u64) -> Result<Self> {
        if max_evaluations == 0 {
            return Err(Error::InvalidConfig("budget must be at least 1".into()));
        }
        Ok(Self { max_evaluations })
    }

    pub fn max_evaluations(&self) -> u64 {
        self.max_evaluations
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_evaluations: DEFAULT_BUDGET,
        }
    }
}

/// Which coalition members must gain for a deviation to count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Improvement {
    /// Some member strictly prefers the deviated winner.
    #[default]
    AnyMember,
    /// Every member strictly prefers the deviated winner.
    Unanimous,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub budget: Budget,
    pub improvement: Improvement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OracleStatus {
    Proof,
    Manipulable,
    BudgetExceeded,
}

/// A concrete manipulation: truthful ballots, deviated ballots and the two
/// winners they produce.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub truths: Vec<Preference>,
    pub deviation: Vec<Preference>,
    pub truthful_winner: Candidate,
    pub deviated_winner: Candidate,
}

impl Witness {
    /// Recomputes both winners through [`crate::voting::winner`] and checks
    /// that they match and that the deviation is an improvement under
    /// `improvement`.
    pub fn replays(
        &self,
        x: &ScoringProfile,
        tb: &TieBreakPolicy,
        improvement: Improvement,
    ) -> bool {
        let Some(first) = self.truths.first() else {
            return false;
        };
        if self.truths.len() != self.deviation.len() {
            return false;
        }
        let outcome = |ballots: &[Preference]| -> Option<Candidate> {
            let reference = tie_reference(tb, first, ballots);
            winner_of_scores(x.with_votes(ballots).scores(), tb, Some(&reference)).ok()
        };
        let (Some(wp), Some(wd)) = (outcome(&self.truths), outcome(&self.deviation)) else {
            return false;
        };
        if wp != self.truthful_winner || wd != self.deviated_winner {
            return false;
        }
        match improvement {
            Improvement::AnyMember => self.truths.iter().any(|t| t.prefers(wd, wp)),
            Improvement::Unanimous => crate::voting::unanimously_prefers(&self.truths, wd, wp),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub status: OracleStatus,
    pub witness: Option<Witness>,
    /// Winner evaluations spent (or that would have been needed).
    pub evaluations: u128,
}

impl OracleVerdict {
    pub fn is_proof(&self) -> bool {
        self.status == OracleStatus::Proof
    }

    pub fn is_manipulable(&self) -> bool {
        self.status == OracleStatus::Manipulable
    }
}

/// The order handed to [`crate::voting::winner`] when a coalition whose first
/// member's truth is `first` casts `ballots`.
///
/// For the manipulators: candidates heading a ballot, in `first`'s order,
/// then the rest in reverse of `first`'s order. Against: `first` itself.
/// Fixed order: the fixed order.
pub fn tie_reference(
    tb: &TieBreakPolicy,
    first: &Preference,
    ballots: &[Preference],
) -> Preference {
    match tb {
        TieBreakPolicy::ForManipulators => {
            let m = first.m();
            let mut favored = vec![false; m];
            for b in ballots {
                favored[b.top()] = true;
            }
            let mut order: Vec<Candidate> = first
                .order()
                .iter()
                .copied()
                .filter(|&c| favored[c])
                .collect();
            order.extend(first.order().iter().rev().copied().filter(|&c| !favored[c]));
            Preference::new(order).expect("rearranged permutation")
        }
        TieBreakPolicy::AgainstManipulators => first.clone(),
        TieBreakPolicy::FixedOrder(order) => order.clone(),
    }
}

type Mask = u64;

fn bit(c: Candidate) -> Mask {
    1 << c
}

/// Winner for a (tied, favoured) outcome class under a reference order.
/// Mirrors `winner_of_scores(.., tie_reference(..))` on bitmasks.
fn resolve(tied: Mask, favored: Mask, first: &Preference, tb: &TieBreakPolicy) -> Candidate {
    let best_in =
        |mask: Mask, order: &[Candidate]| order.iter().copied().find(|&c| mask & bit(c) != 0);
    let worst_in =
        |mask: Mask, order: &[Candidate]| order.iter().rev().copied().find(|&c| mask & bit(c) != 0);
    let w = match tb {
        TieBreakPolicy::ForManipulators => {
            let lead = tied & favored;
            if lead != 0 {
                best_in(lead, first.order())
            } else {
                worst_in(tied, first.order())
            }
        }
        TieBreakPolicy::AgainstManipulators => worst_in(tied, first.order()),
        TieBreakPolicy::FixedOrder(order) => best_in(tied, order.order()),
    };
    w.expect("tied set is never empty")
}

fn tied_mask(scores: &[i64]) -> Mask {
    let best = *scores.iter().max().expect("m >= 1");
    scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == best)
        .fold(0, |acc, (c, _)| acc | bit(c))
}

/// Ballots grouped by (score increments, first choice).
struct Effects {
    /// Increment vector per effect class.
    inc: Vec<Vec<i64>>,
    top: Vec<Candidate>,
    /// Lexicographically smallest ballot of each class.
    rep: Vec<usize>,
    /// Class of each ballot.
    of: Vec<usize>,
}

fn effects(perms: &[Preference], alpha: &[i64]) -> Effects {
    let mut inc: Vec<Vec<i64>> = Vec::new();
    let mut top = Vec::new();
    let mut rep = Vec::new();
    let mut of = Vec::with_capacity(perms.len());
    let mut seen = std::collections::HashMap::new();
    for (i, p) in perms.iter().enumerate() {
        let mut v = vec![0i64; p.m()];
        for (pos, &c) in p.order().iter().enumerate() {
            v[c] = alpha[pos];
        }
        let key = (v.clone(), p.top());
        let class = *seen.entry(key).or_insert_with(|| {
            inc.push(v);
            top.push(p.top());
            rep.push(i);
            inc.len() - 1
        });
        of.push(class);
    }
    Effects { inc, top, rep, of }
}

/// Calls `f` on every non-decreasing index sequence of length `len` over
/// `0..base`, in lexicographic order. Stops early when `f` returns false.
fn for_each_multiset(base: usize, len: usize, mut f: impl FnMut(&[usize]) -> bool) {
    let mut idx = vec![0usize; len];
    if base == 0 && len > 0 {
        return;
    }
    loop {
        if !f(&idx) {
            return;
        }
        // advance
        let mut i = len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] + 1 < base {
                let v = idx[i] + 1;
                for j in idx[i..].iter_mut() {
                    *j = v;
                }
                break;
            }
        }
    }
}

pub(crate) fn multiset_count(base: u128, len: u128) -> u128 {
    // C(base + len - 1, len)
    if len == 0 {
        return 1;
    }
    if base == 0 {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..len {
        acc = acc.saturating_mul(base + i) / (i + 1);
    }
    acc
}

fn factorial_u128(m: usize) -> u128 {
    (1..=m as u128).fold(1u128, |a, b| a.saturating_mul(b))
}

struct Classes {
    /// (tied, favoured) per class, in first-seen order.
    keys: Vec<(Mask, Mask)>,
    /// Representative deviation (effect indices) per class.
    reps: Vec<Vec<usize>>,
}

fn deviation_classes(x: &[i64], eff: &Effects, c: usize) -> Classes {
    let mut keys = Vec::new();
    let mut reps = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut scores = x.to_vec();
    for_each_multiset(eff.inc.len(), c, |d| {
        scores.copy_from_slice(x);
        let mut favored = 0;
        for &e in d {
            for (s, i) in scores.iter_mut().zip(&eff.inc[e]) {
                *s += i;
            }
            favored |= bit(eff.top[e]);
        }
        let key = (tied_mask(&scores), favored);
        index.entry(key).or_insert_with(|| {
            keys.push(key);
            reps.push(d.to_vec());
        });
        true
    });
    Classes { keys, reps }
}

fn check_inputs(x: &ScoringProfile, c: usize, tb: &TieBreakPolicy) -> Result<()> {
    if c == 0 {
        return Err(Error::PreconditionViolated(
            "coalition size must be >= 1".into(),
        ));
    }
    if x.m() > 20 {
        return Err(Error::TooLarge {
            size: x.m() as u128,
            limit: 20,
        });
    }
    if let TieBreakPolicy::FixedOrder(order) = tb {
        if order.m() != x.m() {
            return Err(Error::MismatchedCandidates {
                expected: x.m(),
                found: order.m(),
            });
        }
    }
    Ok(())
}

/// Upper estimate of winner evaluations for the grouped enumeration.
fn planned_evaluations(m: usize, effect_classes: u128, c: usize) -> u128 {
    let perms = factorial_u128(m);
    let deviations = multiset_count(effect_classes, c as u128);
    let truths = perms.saturating_mul(multiset_count(perms, c as u128 - 1));
    deviations.saturating_add(truths)
}

fn effect_class_bound(x: &ScoringProfile) -> u128 {
    use crate::voting::RuleKind;
    let m = x.m() as u128;
    match x.rule().kind() {
        // increments are fixed by the first choice
        RuleKind::Plurality => m,
        // approved set and first choice
        RuleKind::KApproval(k) => {
            let k = k as u128;
            crate::count::binomial_u128(m, k).saturating_mul(k)
        }
        // vetoed candidate and first choice
        RuleKind::Veto => m * m.saturating_sub(1).max(1),
        RuleKind::Borda => factorial_u128(x.m()),
    }
}

fn exceeded(needed: u128) -> OracleVerdict {
    OracleVerdict {
        status: OracleStatus::BudgetExceeded,
        witness: None,
        evaluations: needed,
    }
}

/// Decides c-collusion-proofness of `x` for `c` new voters.
pub fn collusion_oracle(
    x: &ScoringProfile,
    c: usize,
    tb: &TieBreakPolicy,
    options: &OracleOptions,
) -> Result<OracleVerdict> {
    check_inputs(x, c, tb)?;
    let m = x.m();
    let budget = options.budget.max_evaluations() as u128;
    let planned = planned_evaluations(m, effect_class_bound(x), c);
    if planned > budget {
        return Ok(exceeded(planned));
    }
    let perms = Preference::all(m);
    let alpha = x.rule().score_vector();
    let eff = effects(&perms, alpha.alpha());
    let classes = deviation_classes(x.scores(), &eff, c);

    // above[p][w]: candidates that truth p ranks strictly above w
    let above: Vec<Vec<Mask>> = perms
        .iter()
        .map(|p| {
            (0..m)
                .map(|w| p.order()[..p.rank(w)].iter().fold(0, |a, &b| a | bit(b)))
                .collect()
        })
        .collect();
    let effect_of = &eff.of;

    let found = (0..perms.len()).into_par_iter().find_map_first(|s| {
        let first = &perms[s];
        // achievable winners and the first class reaching each
        let mut achievable: Mask = 0;
        let mut via = vec![usize::MAX; m];
        for (k, &(tied, fav)) in classes.keys.iter().enumerate() {
            let w = resolve(tied, fav, first, tb);
            if achievable & bit(w) == 0 {
                achievable |= bit(w);
                via[w] = k;
            }
        }
        let mut scores = vec![0i64; m];
        let mut hit = None;
        for_each_multiset(perms.len(), c - 1, |rest| {
            scores.copy_from_slice(x.scores());
            let mut favored = 0;
            for &t in std::iter::once(&s).chain(rest) {
                for (sc, i) in scores.iter_mut().zip(&eff.inc[effect_of[t]]) {
                    *sc += i;
                }
                favored |= bit(perms[t].top());
            }
            let wp = resolve(tied_mask(&scores), favored, first, tb);
            let gains = match options.improvement {
                Improvement::AnyMember => std::iter::once(&s)
                    .chain(rest)
                    .fold(0, |a, &t| a | above[t][wp]),
                Improvement::Unanimous => std::iter::once(&s)
                    .chain(rest)
                    .fold(Mask::MAX, |a, &t| a & above[t][wp]),
            } & achievable;
            if gains == 0 {
                return true;
            }
            // deviation class found earliest in enumeration order
            let wd = (0..m)
                .filter(|&w| gains & bit(w) != 0)
                .min_by_key(|&w| via[w])
                .expect("non-empty gains");
            let truths: Vec<Preference> = std::iter::once(&s)
                .chain(rest)
                .map(|&t| perms[t].clone())
                .collect();
            let deviation = classes.reps[via[wd]]
                .iter()
                .map(|&e| perms[eff.rep[e]].clone())
                .collect();
            hit = Some(Witness {
                truths,
                deviation,
                truthful_winner: wp,
                deviated_winner: wd,
            });
            false
        });
        hit
    });
    let evaluations = planned;
    Ok(match found {
        Some(w) => OracleVerdict {
            status: OracleStatus::Manipulable,
            witness: Some(w),
            evaluations,
        },
        None => OracleVerdict {
            status: OracleStatus::Proof,
            witness: None,
            evaluations,
        },
    })
}

/// [`collusion_oracle`] with a single new voter.
pub fn strategyproof_oracle(
    x: &ScoringProfile,
    tb: &TieBreakPolicy,
    options: &OracleOptions,
) -> Result<OracleVerdict> {
    collusion_oracle(x, 1, tb, options)
}

/// Winners reachable by some deviation of `c` voters when the reference
/// manipulator's truth is `sigma_ref`, in increasing index order.
pub fn achievable_winners(
    x: &ScoringProfile,
    c: usize,
    sigma_ref: &Preference,
    tb: &TieBreakPolicy,
    budget: Budget,
) -> Result<Vec<Candidate>> {
    check_inputs(x, c, tb)?;
    if sigma_ref.m() != x.m() {
        return Err(Error::MismatchedCandidates {
            expected: x.m(),
            found: sigma_ref.m(),
        });
    }
    let needed = multiset_count(effect_class_bound(x), c as u128);
    if needed > budget.max_evaluations() as u128 {
        return Err(Error::BudgetExceeded {
            needed,
            budget: budget.max_evaluations(),
        });
    }
    let perms = Preference::all(x.m());
    let eff = effects(&perms, x.rule().score_vector().alpha());
    let classes = deviation_classes(x.scores(), &eff, c);
    let mask = classes.keys.iter().fold(0, |a, &(tied, fav)| {
        a | bit(resolve(tied, fav, sigma_ref, tb))
    });
    Ok((0..x.m()).filter(|&w| mask & bit(w) != 0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voting::Rule;

    fn sp(rule: Rule, n: usize, s: &[i64]) -> ScoringProfile {
        ScoringProfile::new(rule, n, s.to_vec()).unwrap()
    }

    fn pref(order: &[usize]) -> Preference {
        Preference::new(order.to_vec()).unwrap()
    }

    const FOR: TieBreakPolicy = TieBreakPolicy::ForManipulators;
    const AGAINST: TieBreakPolicy = TieBreakPolicy::AgainstManipulators;

    #[test]
    fn multisets_enumerate_in_order() {
        let mut all = Vec::new();
        for_each_multiset(3, 2, |d| {
            all.push(d.to_vec());
            true
        });
        assert_eq!(
            all,
            vec![
                vec![0, 0],
                vec![0, 1],
                vec![0, 2],
                vec![1, 1],
                vec![1, 2],
                vec![2, 2]
            ]
        );
        assert_eq!(multiset_count(3, 2), 6);
        let mut empty = 0;
        for_each_multiset(5, 0, |d| {
            assert!(d.is_empty());
            empty += 1;
            true
        });
        assert_eq!(empty, 1);
    }

    #[test]
    fn five_collusion_proof_example() {
        let x = sp(Rule::plurality(3), 12, &[8, 2, 2]);
        let opts = OracleOptions::default();
        for tb in [FOR, AGAINST] {
            assert!(collusion_oracle(&x, 5, &tb, &opts).unwrap().is_proof());
        }
        let v = collusion_oracle(&x, 6, &FOR, &opts).unwrap();
        assert!(v.is_manipulable());
        assert!(v.witness.unwrap().replays(&x, &FOR, Improvement::AnyMember));
    }

    #[test]
    fn single_voter_examples() {
        let opts = OracleOptions::default();
        let x = sp(Rule::plurality(3), 2, &[1, 1, 0]);
        assert!(strategyproof_oracle(&x, &FOR, &opts).unwrap().is_proof());
        let y = sp(Rule::plurality(3), 3, &[1, 1, 1]);
        assert!(strategyproof_oracle(&y, &AGAINST, &opts)
            .unwrap()
            .is_proof());
        let z = sp(Rule::borda(3), 6, &[9, 3, 6]);
        for tb in [FOR, AGAINST] {
            assert!(strategyproof_oracle(&z, &tb, &opts).unwrap().is_proof());
        }
        // a runner-up one point behind, a third candidate far behind
        let w = sp(Rule::plurality(3), 3, &[2, 1, 0]);
        let v = strategyproof_oracle(&w, &FOR, &opts).unwrap();
        assert!(v.is_manipulable());
        let wit = v.witness.unwrap();
        assert_eq!((wit.truthful_winner, wit.deviated_winner), (0, 1));
        assert!(wit.replays(&w, &FOR, Improvement::AnyMember));
    }

    #[test]
    fn achievable_examples() {
        let b = Budget::default();
        let x = sp(Rule::plurality(3), 12, &[8, 2, 2]);
        for s in Preference::all(3) {
            assert_eq!(achievable_winners(&x, 1, &s, &FOR, b).unwrap(), vec![0]);
        }
        let one = sp(Rule::plurality(1), 3, &[3]);
        assert_eq!(
            achievable_winners(&one, 1, &Preference::identity(1), &FOR, b).unwrap(),
            vec![0]
        );
        let y = sp(Rule::plurality(3), 2, &[1, 1, 0]);
        assert_eq!(
            achievable_winners(&y, 1, &pref(&[2, 1, 0]), &FOR, b).unwrap(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn budget_is_enforced() {
        let x = sp(Rule::borda(6), 0, &[0; 6]);
        let opts = OracleOptions {
            budget: Budget::new(1000).unwrap(),
            ..Default::default()
        };
        let v = collusion_oracle(&x, 2, &FOR, &opts).unwrap();
        assert_eq!(v.status, OracleStatus::BudgetExceeded);
        assert!(v.witness.is_none());
        assert!(achievable_winners(&x, 2, &Preference::identity(6), &FOR, opts.budget).is_err());
        assert!(Budget::new(0).is_err());
        assert!(collusion_oracle(&x, 0, &FOR, &OracleOptions::default()).is_err());
    }

    #[test]
    fn resolve_matches_core_winner() {
        let m = 4;
        for first in Preference::all(m) {
            for tied in 1..(1u64 << m) {
                for favored in 0..(1u64 << m) {
                    let scores: Vec<i64> = (0..m).map(|c| i64::from(tied & bit(c) != 0)).collect();
                    let ballots: Vec<Preference> = (0..m)
                        .filter(|&c| favored & bit(c) != 0)
                        .map(|c| {
                            let mut o = vec![c];
                            o.extend((0..m).filter(|&d| d != c));
                            Preference::new(o).unwrap()
                        })
                        .collect();
                    for tb in [FOR, AGAINST, TieBreakPolicy::FixedOrder(first.clone())] {
                        let reference = tie_reference(&tb, &first, &ballots);
                        let w = winner_of_scores(&scores, &tb, Some(&reference)).unwrap();
                        assert_eq!(w, resolve(tied, favored, &first, &tb));
                    }
                }
            }
        }
    }
}

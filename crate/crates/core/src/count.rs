//! Exact combinatorics: scoring-profile counts, almost-equal counts, the
//! lower-bound expressions as exact rationals, and a few identities used by
//! the Borda analysis.
//!
//! Everything is arbitrary precision except the two quantities that involve
//! `e^{-x}`, which are `f64`.

use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voting::{Preference, Rule, RuleKind, ScoringProfile};

/// An exact non-negative count.
pub type CountValue = BigUint;

/// `C(n, k)`; zero when `n < 0`, `k < 0` or `k > n`.
pub fn binomial(n: i64, k: i64) -> BigUint {
    if n < 0 || k < 0 || k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= BigUint::from((n - i) as u64);
        acc /= BigUint::from((i + 1) as u64);
    }
    acc
}

/// `C(n, k)` in `u128`, saturating.
pub fn binomial_u128(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |a, b| a * BigUint::from(b))
}

/// Counts of bounded compositions: `ways(j, t)` is the number of ways to
/// write `t` as a sum of `parts - j` integers in `[0, cap]`. Equivalently the
/// coefficient of `x^t` in `(1 + x + … + x^cap)^(parts - j)`.
#[derive(Clone, Debug)]
pub struct CompositionTable {
    parts: usize,
    cap: usize,
    total: usize,
    // rows[j][t]
    rows: Vec<Vec<BigUint>>,
}

impl CompositionTable {
    pub fn new(parts: usize, cap: usize, total: usize) -> Self {
        let mut rows = vec![vec![BigUint::zero(); total + 1]; parts + 1];
        rows[parts][0] = BigUint::one();
        for j in (0..parts).rev() {
            // prefix sums of the row below make each entry a window sum
            let below = &rows[j + 1];
            let mut prefix = Vec::with_capacity(total + 2);
            prefix.push(BigUint::zero());
            for t in 0..=total {
                let next = &prefix[t] + &below[t];
                prefix.push(next);
            }
            let row: Vec<BigUint> = (0..=total)
                .map(|t| {
                    let lo = t.saturating_sub(cap);
                    &prefix[t + 1] - &prefix[lo]
                })
                .collect();
            rows[j] = row;
        }
        Self {
            parts,
            cap,
            total,
            rows,
        }
    }

    pub fn parts(&self) -> usize {
        self.parts
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Ways to fill positions `j..parts` with sum `t`.
    pub fn ways(&self, j: usize, t: usize) -> &BigUint {
        &self.rows[j][t]
    }

    /// Number of full compositions of `total`.
    pub fn count(&self) -> &BigUint {
        &self.rows[0][self.total]
    }
}

/// `(parts, cap, total)` describing `S^n([m])` as bounded compositions; the
/// veto set is the negation of the plurality one.
pub(crate) fn composition_shape(rule: &Rule, n: usize) -> Result<(usize, usize, usize)> {
    let m = rule.m();
    match rule.kind() {
        RuleKind::Plurality | RuleKind::Veto => Ok((m, n, n)),
        RuleKind::KApproval(k) => Ok((m, n, n * k)),
        RuleKind::Borda => Err(Error::Unsupported(
            "no composition description of Borda scoring profiles".into(),
        )),
    }
}

/// `|S^n([m])|` by coefficient extraction from `(1 + x + … + x^n)^m`.
pub fn count_scoring_profiles(rule: &Rule, n: usize) -> Result<CountValue> {
    let (parts, cap, total) = composition_shape(rule, n)?;
    Ok(CompositionTable::new(parts, cap, total).count().clone())
}

/// `C(n + m - 1, m - 1)`, the stars-and-bars count of plurality profiles.
pub fn plurality_closed_form(n: usize, m: usize) -> CountValue {
    binomial((n + m) as i64 - 1, m as i64 - 1)
}

/// `Σ_{i=0}^{k} (-1)^i C(n(k-i) + m - 1, m - 1)`, kept for auditing against
/// [`count_scoring_profiles`]; it disagrees with enumeration on small cases.
pub fn evaluate_paper_kapproval_formula(n: usize, k: usize, m: usize) -> BigInt {
    let mut acc = BigInt::zero();
    for i in 0..=k {
        let term = BigInt::from(binomial((n * (k - i) + m) as i64 - 1, m as i64 - 1));
        if i % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

/// One row of the k-approval count audit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRow {
    pub rule: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub authoritative: String,
    pub paper_formula: String,
    pub matches: bool,
}

/// Compares the enumerated count with the printed summation.
pub fn audit_kapproval_count(n: usize, k: usize, m: usize) -> Result<AuditRow> {
    let rule = if k == 1 {
        Rule::plurality(m)
    } else {
        Rule::kapproval(k, m)?
    };
    let authoritative = BigInt::from(count_scoring_profiles(&rule, n)?);
    let printed = evaluate_paper_kapproval_formula(n, k, m);
    Ok(AuditRow {
        rule: rule.name().to_string(),
        n,
        m,
        k,
        authoritative: authoritative.to_string(),
        paper_formula: printed.to_string(),
        matches: authoritative == printed,
    })
}

/// `|E^n([m])|` for plurality or veto with `m > n`: every score is 0 or 1
/// (or 0 or -1), so the count is `C(m, n)`.
pub fn count_almost_equal(rule: &Rule, n: usize) -> Result<CountValue> {
    let m = rule.m();
    match rule.kind() {
        RuleKind::Plurality | RuleKind::Veto => {}
        _ => {
            return Err(Error::Unsupported(format!(
                "almost-equal count for {}",
                rule.name()
            )))
        }
    }
    if n == 0 || m <= n {
        return Err(Error::PreconditionViolated(format!(
            "need m > n >= 1, got n={n}, m={m}"
        )));
    }
    Ok(binomial(m as i64, n as i64))
}

/// `|F^n([m])| = m! ((m-k)!)^n / (m-nk)!` for k-approval with `m >= nk >= 1`.
pub fn count_f_kapproval(n: usize, k: usize, m: usize) -> Result<CountValue> {
    if n * k == 0 || m < n * k {
        return Err(Error::PreconditionViolated(format!(
            "need m >= nk >= 1, got n={n}, k={k}, m={m}"
        )));
    }
    let num = factorial(m as u64) * factorial((m - k) as u64).pow(n as u32);
    Ok(num / factorial((m - n * k) as u64))
}

/// `m (m-1) … (m-k+1)`.
pub fn falling_factorial(m: usize, k: usize) -> BigUint {
    (0..k).fold(BigUint::one(), |a, i| a * BigUint::from((m - i) as u64))
}

/// `|F^n([m])| / |T^n([m])|` where `T^n([m])` counts ordered top-k prefixes,
/// `(m (m-1) … (m-k+1))^n`. This is also the IC probability of landing in F
/// since the order below position k never affects the score.
pub fn kapproval_f_ratio(n: usize, k: usize, m: usize) -> Result<BigRational> {
    let f = count_f_kapproval(n, k, m)?;
    let per_vote = falling_factorial(m, k) * factorial((m - k) as u64);
    Ok(BigRational::new(f.into(), per_vote.pow(n as u32).into()))
}

/// Which lower-bound expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundId {
    PluralityCP,
    PluralityE,
    KApprovalF,
    VetoE,
    VetoF,
    VetoCP,
    BordaLimit,
}

impl BoundId {
    pub fn name(&self) -> &'static str {
        match self {
            BoundId::PluralityCP => "PluralityCP",
            BoundId::PluralityE => "PluralityE",
            BoundId::KApprovalF => "KApprovalF",
            BoundId::VetoE => "VetoE",
            BoundId::VetoF => "VetoF",
            BoundId::VetoCP => "VetoCP",
            BoundId::BordaLimit => "BordaLimit",
        }
    }

    pub fn parse(s: &str) -> Option<BoundId> {
        [
            BoundId::PluralityCP,
            BoundId::PluralityE,
            BoundId::KApprovalF,
            BoundId::VetoE,
            BoundId::VetoF,
            BoundId::VetoCP,
            BoundId::BordaLimit,
        ]
        .into_iter()
        .find(|b| b.name().eq_ignore_ascii_case(s))
    }
}

/// A bound expression and its parameters. Unused parameters are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub bound_id: BoundId,
    pub n: usize,
    pub m: usize,
    pub c: usize,
    pub k: usize,
    pub lambda: f64,
}

impl BoundSpec {
    pub fn new(bound_id: BoundId, n: usize, m: usize) -> Self {
        Self {
            bound_id,
            n,
            m,
            c: 1,
            k: 1,
            lambda: 1.0,
        }
    }

    pub fn with_c(mut self, c: usize) -> Self {
        self.c = c;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundNumber {
    Exact(#[serde(with = "rational_string")] BigRational),
    Float(f64),
}

impl BoundNumber {
    pub fn to_f64(&self) -> f64 {
        match self {
            BoundNumber::Exact(r) => rational_to_f64(r),
            BoundNumber::Float(f) => *f,
        }
    }
}

impl std::fmt::Display for BoundNumber {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundNumber::Exact(r) => write!(f, "{r}"),
            BoundNumber::Float(x) => write!(f, "{}", crate::report::fmt_f64(*x)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: BoundNumber,
    /// The raw expression was negative and has been clamped to 0.
    pub clamped: bool,
}

mod rational_string {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    let (n, d) = (r.numer(), r.denom());
    match (n.to_f64(), d.to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        _ => {
            // scale down huge operands before dividing
            let shift = n.bits().max(d.bits()).saturating_sub(1000);
            let a = (n >> shift).to_f64().unwrap_or(0.0);
            let b = (d >> shift).to_f64().unwrap_or(1.0);
            a / b
        }
    }
}

fn ratio_pow(num: i64, den: i64, exp: usize) -> BigRational {
    let base = BigRational::new(BigInt::from(num), BigInt::from(den));
    (0..exp).fold(BigRational::one(), |acc, _| acc * &base)
}

fn clamp(r: BigRational) -> BoundValue {
    if r.is_negative() {
        BoundValue {
            value: BoundNumber::Exact(BigRational::zero()),
            clamped: true,
        }
    } else {
        BoundValue {
            value: BoundNumber::Exact(r),
            clamped: false,
        }
    }
}

/// Evaluates a lower-bound expression inside its regime.
pub fn bound_value(spec: &BoundSpec) -> Result<BoundValue> {
    let (n, m, c, k) = (spec.n as i64, spec.m as i64, spec.c as i64, spec.k as i64);
    let out_of_regime = |what: &str| {
        Err(Error::OutOfRegime(format!(
            "{}: {what}",
            spec.bound_id.name()
        )))
    };
    match spec.bound_id {
        BoundId::PluralityCP => {
            if c < 1 || n < c || m < 1 {
                return out_of_regime("requires n >= c >= 1");
            }
            Ok(clamp(ratio_pow(n - c, n + 1, (m - 1) as usize)))
        }
        BoundId::PluralityE | BoundId::VetoE | BoundId::VetoF => {
            if n < 1 || m <= n {
                return out_of_regime("requires m > n >= 1");
            }
            Ok(clamp(ratio_pow(m - n + 1, m, n as usize)))
        }
        BoundId::KApprovalF => {
            if n < 1 || k < 1 || k >= m || m < n * k {
                return out_of_regime("requires 1 <= k < m and m >= nk >= 1");
            }
            Ok(clamp(ratio_pow(m - n * k + 1, m, (n * k) as usize)))
        }
        BoundId::VetoCP => {
            let shift = (c + 1) * (m - 1);
            if c < 1 || m < 2 || n < shift {
                return out_of_regime("requires c >= 1, m >= 2 and n >= (c+1)(m-1)");
            }
            Ok(clamp(ratio_pow(
                n - shift + 1,
                m * n - shift,
                shift as usize,
            )))
        }
        BoundId::BordaLimit => {
            if !(spec.lambda.is_finite() && spec.lambda >= 0.0) || n < 1 {
                return out_of_regime("requires lambda >= 0 and n >= 1");
            }
            let y = spec.lambda.powi(spec.n as i32);
            let v = 1.0 - (1.0 + y) * (-y).exp();
            Ok(BoundValue {
                value: BoundNumber::Float(v.max(0.0)),
                clamped: v < 0.0,
            })
        }
    }
}

/// Number of universe elements lying in at least two of `sets`, computed by
/// direct membership counting and by the alternating intersection sum
/// `Σ_{r≥2} (-1)^r (r-1) Σ_{|I|=r} |A_I|`.
pub fn at_least_two_cover_count(sets: &[BTreeSet<u64>]) -> Result<(CountValue, CountValue)> {
    if sets.len() > 20 {
        return Err(Error::TooLarge {
            size: sets.len() as u128,
            limit: 20,
        });
    }
    let universe: BTreeSet<u64> = sets.iter().flatten().copied().collect();
    if universe.len() > 64 {
        return Err(Error::TooLarge {
            size: universe.len() as u128,
            limit: 64,
        });
    }
    let index: std::collections::BTreeMap<u64, usize> =
        universe.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let masks: Vec<u64> = sets
        .iter()
        .map(|s| s.iter().fold(0u64, |a, e| a | (1 << index[e])))
        .collect();

    let brute = universe
        .iter()
        .filter(|e| sets.iter().filter(|s| s.contains(e)).count() >= 2)
        .count();

    let full = if universe.len() == 64 {
        u64::MAX
    } else {
        (1u64 << universe.len()) - 1
    };
    let mut formula = BigInt::zero();
    for subset in 1u32..(1u32 << sets.len()) {
        let r = subset.count_ones() as i64;
        if r < 2 {
            continue;
        }
        let inter = (0..sets.len())
            .filter(|i| subset & (1 << i) != 0)
            .fold(full, |a, i| a & masks[i]);
        let coeff = if r % 2 == 0 { r - 1 } else { -(r - 1) };
        formula += BigInt::from(coeff) * BigInt::from(inter.count_ones());
    }
    let formula = formula
        .to_biguint()
        .expect("inclusion-exclusion count is non-negative");
    Ok((BigUint::from(brute), formula))
}

/// Both sides of `1 - (-1)^l (l-1) = Σ_{i=2}^{l-1} (-1)^i (i-1) C(l, i)`.
pub fn series_identity_check(l: usize) -> Result<(BigInt, BigInt)> {
    if l < 3 {
        return Err(Error::PreconditionViolated(format!("need l >= 3, got {l}")));
    }
    let sign = |i: usize| {
        if i.is_multiple_of(2) {
            BigInt::one()
        } else {
            -BigInt::one()
        }
    };
    let lhs = BigInt::one() - sign(l) * BigInt::from(l - 1);
    let rhs = (2..l).fold(BigInt::zero(), |acc, i| {
        acc + sign(i) * BigInt::from(i - 1) * BigInt::from(binomial(l as i64, i as i64))
    });
    Ok((lhs, rhs))
}

/// `Σ_{i=2}^{terms} (-1)^i (i-1) x^i / i!`, which tends to `1 - (1+x) e^{-x}`.
pub fn exp_partial_sum(x: f64, terms: usize) -> f64 {
    let mut power_over_fact = x; // x^1 / 1!
    let mut sum = 0.0;
    for i in 2..=terms {
        power_over_fact *= x / i as f64;
        let term = (i - 1) as f64 * power_over_fact;
        if i % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum
}

/// `1 - (1 + x) e^{-x}`.
pub fn exp_closed_form(x: f64) -> f64 {
    1.0 - (1.0 + x) * (-x).exp()
}

/// Largest support enumerated for Borda, as a bound on `(m!)^n`.
pub const BORDA_ENUMERATION_LIMIT: u128 = 100_000_000;
/// Largest composition support enumerated.
pub const COMPOSITION_ENUMERATION_LIMIT: u128 = 10_000_000;

/// Bounded compositions in lexicographic order.
pub struct Compositions {
    cap: i64,
    next: Option<Vec<i64>>,
}

impl Compositions {
    pub fn new(parts: usize, cap: usize, total: usize) -> Self {
        let cap = cap as i64;
        let next = if parts == 0 {
            (total == 0).then(Vec::new)
        } else if (parts as i64) * cap < total as i64 {
            None
        } else {
            let mut v = vec![0; parts];
            fill_from_right(&mut v, total as i64, cap);
            Some(v)
        };
        Self { cap, next }
    }
}

fn fill_from_right(v: &mut [i64], mut rest: i64, cap: i64) {
    for slot in v.iter_mut().rev() {
        let take = rest.min(cap);
        *slot = take;
        rest -= take;
    }
    debug_assert_eq!(rest, 0);
}

impl Iterator for Compositions {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        let mut suffix = 0;
        for i in (0..succ.len()).rev() {
            if suffix >= 1 && succ[i] < self.cap {
                succ[i] += 1;
                fill_from_right(&mut succ[i + 1..], suffix - 1, self.cap);
                self.next = Some(succ);
                break;
            }
            suffix += succ[i];
        }
        Some(cur)
    }
}

/// Every element of `S^n([m])` exactly once: compositions for the approval
/// family (negated for veto), deduplicated realizable vectors for Borda.
pub fn enumerate_scoring_profiles(
    rule: &Rule,
    n: usize,
) -> Result<Box<dyn Iterator<Item = ScoringProfile> + Send>> {
    let rule = *rule;
    if let RuleKind::Borda = rule.kind() {
        let perms = Preference::all(rule.m());
        let size = (perms.len() as u128)
            .checked_pow(n as u32)
            .unwrap_or(u128::MAX);
        if size > BORDA_ENUMERATION_LIMIT {
            return Err(Error::TooLarge {
                size,
                limit: BORDA_ENUMERATION_LIMIT,
            });
        }
        let alpha = rule.score_vector();
        let mut seen = BTreeSet::new();
        let mut idx = vec![0usize; n];
        loop {
            let mut scores = vec![0i64; rule.m()];
            for &p in &idx {
                for (pos, &c) in perms[p].order().iter().enumerate() {
                    scores[c] += alpha.at(pos);
                }
            }
            seen.insert(scores);
            // next non-decreasing sequence
            let mut i = n;
            let advanced = loop {
                if i == 0 {
                    break false;
                }
                i -= 1;
                if idx[i] + 1 < perms.len() {
                    let v = idx[i] + 1;
                    idx[i..].iter_mut().for_each(|j| *j = v);
                    break true;
                }
            };
            if !advanced {
                break;
            }
        }
        return Ok(Box::new(
            seen.into_iter()
                .map(move |s| ScoringProfile::new_unchecked(rule, n, s)),
        ));
    }
    let (parts, cap, total) = composition_shape(&rule, n)?;
    let size = CompositionTable::new(parts, cap, total)
        .count()
        .to_u128()
        .unwrap_or(u128::MAX);
    if size > COMPOSITION_ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            size,
            limit: COMPOSITION_ENUMERATION_LIMIT,
        });
    }
    let negate = matches!(rule.kind(), RuleKind::Veto);
    Ok(Box::new(Compositions::new(parts, cap, total).map(
        move |mut v| {
            if negate {
                v.iter_mut().for_each(|s| *s = -*s);
            }
            ScoringProfile::new_unchecked(rule, n, v)
        },
    )))
}

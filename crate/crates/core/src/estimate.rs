//! Fractions of proof profiles: seeded Monte Carlo, exact enumeration,
//! sweeps, lower-bound checks and the classifier/oracle agreement harness.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{classify, ClassStatus, Classification};
use crate::count::{
    bound_value, enumerate_scoring_profiles, rational_to_f64, BoundId, BoundNumber, BoundSpec,
};
use crate::error::{Error, Result};
use crate::oracle::{collusion_oracle, Budget, OracleOptions, OracleStatus, Witness};
use crate::report::{wilson_interval, Z95};
use crate::sample::{sample_ic, spawn_stream, Culture, IscSampler, RngStream};
use crate::voting::{tally, Preference, Profile, Rule, RuleKind, ScoringProfile, TieBreakPolicy};

/// Trials per RNG block. Fixed so results do not depend on the thread count.
pub const BLOCK_TRIALS: u64 = 1024;
/// Largest support walked by [`exhaustive_fraction`].
pub const EXHAUSTIVE_LIMIT: u128 = 10_000_000;

/// How each sampled profile is labelled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Labeling {
    /// The rule's characterization; `Unknown` goes to the oracle when
    /// `resolve_unknown` is set.
    #[default]
    Classifier,
    /// The oracle for every profile.
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub rule: Rule,
    pub n: usize,
    pub c: usize,
    pub tie_break: TieBreakPolicy,
    pub culture: Culture,
    pub trials: u64,
    pub seed: u64,
    pub oracle_budget: u64,
    pub resolve_unknown: bool,
    pub labeling: Labeling,
    /// Worker count; `None` uses the global pool. Never affects results.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(
        rule: Rule,
        n: usize,
        c: usize,
        tie_break: TieBreakPolicy,
        culture: Culture,
    ) -> Self {
        Self {
            rule,
            n,
            c,
            tie_break,
            culture,
            trials: 10_000,
            seed: 0,
            oracle_budget: crate::oracle::DEFAULT_BUDGET,
            resolve_unknown: true,
            labeling: Labeling::Classifier,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.c == 0 {
            return Err(Error::InvalidConfig("c must be >= 1".into()));
        }
        if self.culture == Culture::Isc && !self.rule.supports_isc() {
            return Err(Error::Unsupported(format!(
                "ISC sampling for {}",
                self.rule.name()
            )));
        }
        if let TieBreakPolicy::FixedOrder(order) = &self.tie_break {
            if order.m() != self.rule.m() {
                return Err(Error::MismatchedCandidates {
                    expected: self.rule.m(),
                    found: order.m(),
                });
            }
        }
        Budget::new(self.oracle_budget)?;
        Ok(())
    }

    fn oracle_options(&self) -> OracleOptions {
        OracleOptions {
            budget: Budget::new(self.oracle_budget).unwrap_or_default(),
            ..Default::default()
        }
    }

    fn run<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            None => Ok(f()),
            Some(t) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(t.max(1))
                    .build()
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?;
                Ok(pool.install(f))
            }
        }
    }
}

/// Labels one scoring profile under the experiment's labelling rule.
pub fn label(x: &ScoringProfile, cfg: &ExperimentConfig) -> Result<ClassStatus> {
    let from_oracle = |x: &ScoringProfile| -> Result<ClassStatus> {
        let v = collusion_oracle(x, cfg.c, &cfg.tie_break, &cfg.oracle_options())?;
        Ok(match v.status {
            OracleStatus::Proof => ClassStatus::Proof,
            OracleStatus::Manipulable => ClassStatus::Manipulable,
            OracleStatus::BudgetExceeded => ClassStatus::Unknown,
        })
    };
    match cfg.labeling {
        Labeling::Oracle => from_oracle(x),
        Labeling::Classifier => {
            let Classification { status, .. } = classify(x, cfg.c, &cfg.tie_break)?;
            if status == ClassStatus::Unknown && cfg.resolve_unknown {
                from_oracle(x)
            } else {
                Ok(status)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub proof: u64,
    pub manipulable: u64,
    pub unknown: u64,
}

impl Tally {
    fn add(&mut self, s: ClassStatus, weight: u64) {
        match s {
            ClassStatus::Proof => self.proof += weight,
            ClassStatus::Manipulable => self.manipulable += weight,
            ClassStatus::Unknown => self.unknown += weight,
        }
    }

    fn merge(mut self, o: Tally) -> Tally {
        self.proof += o.proof;
        self.manipulable += o.manipulable;
        self.unknown += o.unknown;
        self
    }

    pub fn total(&self) -> u64 {
        self.proof + self.manipulable + self.unknown
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub trials: u64,
    pub proof_count: u64,
    pub manipulable_count: u64,
    pub unknown_count: u64,
    pub fraction_proof: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub elapsed_ms: u128,
}

impl EstimateResult {
    pub fn from_tally(t: Tally, seed: u64, elapsed_ms: u128) -> Self {
        let trials = t.total();
        let (ci_low, ci_high) = wilson_interval(t.proof, trials, Z95);
        Self {
            trials,
            proof_count: t.proof,
            manipulable_count: t.manipulable,
            unknown_count: t.unknown,
            fraction_proof: if trials == 0 {
                0.0
            } else {
                t.proof as f64 / trials as f64
            },
            ci_low,
            ci_high,
            seed,
            elapsed_ms,
        }
    }
}

/// Calls `draw` for each trial with the RNG of its block and sums the
/// labels. Blocks are contiguous and each owns a spawned stream.
fn run_trials<F>(cfg: &ExperimentConfig, draw: F) -> Result<Tally>
where
    F: Fn(&mut RngStream) -> Result<ClassStatus> + Sync,
{
    let root = RngStream::new(cfg.seed, 0);
    let blocks = cfg.trials.div_ceil(BLOCK_TRIALS);
    cfg.run(|| {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = spawn_stream(&root, b);
                let len = BLOCK_TRIALS.min(cfg.trials - b * BLOCK_TRIALS);
                let mut t = Tally::default();
                for _ in 0..len {
                    t.add(draw(&mut rng)?, 1);
                }
                Ok(t)
            })
            .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))
    })?
}

/// Monte Carlo estimate of the proof fraction under the configured culture.
pub fn estimate_fraction(cfg: &ExperimentConfig) -> Result<EstimateResult> {
    cfg.validate()?;
    let start = Instant::now();
    let m = cfg.rule.m();
    let t = match cfg.culture {
        Culture::Ic => run_trials(cfg, |rng| {
            let p = sample_ic(cfg.n, m, rng);
            label(&tally(&p, &cfg.rule)?, cfg)
        })?,
        Culture::Isc => {
            let sampler = IscSampler::new(&cfg.rule, cfg.n)?;
            run_trials(cfg, |rng| label(&sampler.sample(rng), cfg))?
        }
    };
    Ok(EstimateResult::from_tally(
        t,
        cfg.seed,
        start.elapsed().as_millis(),
    ))
}

/// Exact proportions over the whole support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactFractions {
    pub proof: u128,
    pub manipulable: u128,
    pub unknown: u128,
    pub total: u128,
}

impl ExactFractions {
    fn ratio(&self, v: u128) -> BigRational {
        BigRational::new(BigInt::from(v), BigInt::from(self.total))
    }

    pub fn proof_fraction(&self) -> BigRational {
        self.ratio(self.proof)
    }

    pub fn manipulable_fraction(&self) -> BigRational {
        self.ratio(self.manipulable)
    }

    pub fn unknown_fraction(&self) -> BigRational {
        self.ratio(self.unknown)
    }
}

/// Distinct IC tallies with the number of vote sequences producing each.
pub fn ic_tally_weights(rule: &Rule, n: usize) -> Result<Vec<(ScoringProfile, u128)>> {
    let m = rule.m();
    let perms = Preference::all(m);
    let size = (perms.len() as u128)
        .checked_pow(n as u32)
        .unwrap_or(u128::MAX);
    if size > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge {
            size,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let alpha = rule.score_vector();
    let inc: Vec<Vec<i64>> = perms
        .iter()
        .map(|p| {
            let mut v = vec![0; m];
            for (pos, &c) in p.order().iter().enumerate() {
                v[c] = alpha.at(pos);
            }
            v
        })
        .collect();
    let mut weights: HashMap<Vec<i64>, u128> = HashMap::new();
    let mut idx = vec![0usize; n];
    let mut scores = vec![0i64; m];
    loop {
        scores.iter_mut().for_each(|s| *s = 0);
        for &i in &idx {
            for (s, d) in scores.iter_mut().zip(&inc[i]) {
                *s += d;
            }
        }
        *weights.entry(scores.clone()).or_insert(0) += 1;
        // odometer
        let mut pos = n;
        let more = loop {
            if pos == 0 {
                break false;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < perms.len() {
                break true;
            }
            idx[pos] = 0;
        };
        if !more {
            break;
        }
    }
    let mut out: Vec<(ScoringProfile, u128)> = weights
        .into_iter()
        .map(|(s, w)| (ScoringProfile::new_unchecked(*rule, n, s), w))
        .collect();
    out.sort_by(|a, b| a.0.scores().cmp(b.0.scores()));
    Ok(out)
}

/// Exact proof/manipulable/unknown proportions by walking the support.
pub fn exhaustive_fraction(cfg: &ExperimentConfig) -> Result<ExactFractions> {
    let mut probe = cfg.clone();
    probe.trials = probe.trials.max(1);
    probe.validate()?;
    let weighted: Vec<(ScoringProfile, u128)> = match cfg.culture {
        Culture::Isc => {
            let sampler = IscSampler::new(&cfg.rule, cfg.n)?;
            let size = sampler.support().to_u128().unwrap_or(u128::MAX);
            if size > EXHAUSTIVE_LIMIT {
                return Err(Error::TooLarge {
                    size,
                    limit: EXHAUSTIVE_LIMIT,
                });
            }
            enumerate_scoring_profiles(&cfg.rule, cfg.n)?
                .map(|x| (x, 1))
                .collect()
        }
        Culture::Ic => ic_tally_weights(&cfg.rule, cfg.n)?,
    };
    let labels: Vec<ClassStatus> = cfg.run(|| {
        weighted
            .par_iter()
            .map(|(x, _)| label(x, cfg))
            .collect::<Result<Vec<_>>>()
    })??;
    let mut out = ExactFractions {
        proof: 0,
        manipulable: 0,
        unknown: 0,
        total: 0,
    };
    for ((_, w), s) in weighted.iter().zip(labels) {
        out.total += w;
        match s {
            ClassStatus::Proof => out.proof += w,
            ClassStatus::Manipulable => out.manipulable += w,
            ClassStatus::Unknown => out.unknown += w,
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    N,
    M,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config: ExperimentConfig,
    pub result: std::result::Result<EstimateResult, String>,
}

/// Seed of the `index`-th point of a sweep rooted at `base`.
pub fn point_seed(base: u64, index: u64) -> u64 {
    use rand::RngCore;
    spawn_stream(&RngStream::new(base, u64::MAX), index).next_u64()
}

/// One estimate per axis value. Each point gets its own seed derived from
/// the base seed; a failing point becomes an error row.
pub fn sweep(cfg: &ExperimentConfig, axis: Axis, values: &[usize]) -> Vec<SweepRow> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut point = cfg.clone();
            point.seed = point_seed(cfg.seed, i as u64);
            let result = (|| {
                match axis {
                    Axis::N => point.n = v,
                    Axis::M => {
                        point.rule = cfg.rule.with_m(v)?;
                        if let TieBreakPolicy::FixedOrder(_) = cfg.tie_break {
                            point.tie_break = TieBreakPolicy::fixed_identity(v);
                        }
                    }
                }
                estimate_fraction(&point)
            })()
            .map_err(|e| e.to_string());
            SweepRow {
                config: point,
                result,
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Exhaustive,
    MonteCarlo,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Exhaustive => "exhaustive",
            Mode::MonteCarlo => "montecarlo",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Pass => "Pass",
            Verdict::Fail => "Fail",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

/// One point of a bound check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCase {
    pub spec: BoundSpec,
    pub mode: Mode,
    pub tie_break: TieBreakPolicy,
    pub trials: u64,
    pub seed: u64,
}

impl BoundCase {
    pub fn exhaustive(spec: BoundSpec, tie_break: TieBreakPolicy) -> Self {
        Self {
            spec,
            mode: Mode::Exhaustive,
            tie_break,
            trials: 0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckRow {
    pub case: BoundCase,
    /// Exact fraction (`a/b`) or Monte Carlo point estimate.
    pub value: String,
    pub bound: String,
    pub ci_high: Option<f64>,
    pub verdict: Verdict,
    pub note: String,
}

/// The quantity a bound talks about, for one case.
enum Empirical {
    Exact(BigRational),
    Estimate(EstimateResult),
}

fn bound_rule(spec: &BoundSpec) -> Result<Rule> {
    Ok(match spec.bound_id {
        BoundId::PluralityCP | BoundId::PluralityE => Rule::plurality(spec.m),
        BoundId::VetoE | BoundId::VetoF | BoundId::VetoCP => Rule::veto(spec.m),
        BoundId::KApprovalF => {
            if spec.k == 1 {
                Rule::plurality(spec.m)
            } else {
                Rule::kapproval(spec.k, spec.m)?
            }
        }
        BoundId::BordaLimit => Rule::borda(spec.m),
    })
}

/// Exact IC probability that the tally of `n` votes has every gap at most 1
/// under an approval-type rule, by enumerating approved sets per vote.
fn almost_equal_ic_probability(rule: &Rule, n: usize) -> Result<BigRational> {
    let m = rule.m();
    let k = match rule.kind() {
        RuleKind::Plurality => 1,
        RuleKind::KApproval(k) => k,
        RuleKind::Veto => m - 1,
        RuleKind::Borda => {
            return Err(Error::Unsupported(
                "almost-equal IC probability for borda".into(),
            ))
        }
    };
    let sets: Vec<u64> = (0u64..(1 << m))
        .filter(|s| s.count_ones() as usize == k)
        .collect();
    let size = (sets.len() as u128)
        .checked_pow(n as u32)
        .unwrap_or(u128::MAX);
    if size > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge {
            size,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let mut idx = vec![0usize; n];
    let mut good: u128 = 0;
    let mut scores = vec![0i64; m];
    loop {
        scores.iter_mut().for_each(|s| *s = 0);
        for &i in &idx {
            for (c, s) in scores.iter_mut().enumerate() {
                if sets[i] >> c & 1 == 1 {
                    *s += 1;
                }
            }
        }
        let hi = scores.iter().max().copied().unwrap_or(0);
        let lo = scores.iter().min().copied().unwrap_or(0);
        if hi - lo <= 1 {
            good += 1;
        }
        let mut pos = n;
        let more = loop {
            if pos == 0 {
                break false;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < sets.len() {
                break true;
            }
            idx[pos] = 0;
        };
        if !more {
            break;
        }
    }
    Ok(BigRational::new(BigInt::from(good), BigInt::from(size)))
}

fn almost_equal_isc_fraction(rule: &Rule, n: usize) -> Result<BigRational> {
    let mut good = 0u128;
    let mut total = 0u128;
    for x in enumerate_scoring_profiles(rule, n)? {
        total += 1;
        let s = x.scores();
        if s.iter().max().unwrap_or(&0) - s.iter().min().unwrap_or(&0) <= 1 {
            good += 1;
        }
    }
    Ok(BigRational::new(BigInt::from(good), BigInt::from(total)))
}

fn empirical(case: &BoundCase, rule: &Rule) -> Result<Empirical> {
    let spec = &case.spec;
    let collusion_cfg = |labeling: Labeling| {
        let mut cfg =
            ExperimentConfig::new(*rule, spec.n, spec.c, case.tie_break.clone(), Culture::Isc);
        cfg.labeling = labeling;
        cfg.trials = case.trials.max(1);
        cfg.seed = case.seed;
        cfg
    };
    let spread_le_one = |x: &ScoringProfile| {
        let s = x.scores();
        s.iter().max().unwrap_or(&0) - s.iter().min().unwrap_or(&0) <= 1
    };
    let status_of = |b: bool| {
        if b {
            ClassStatus::Proof
        } else {
            ClassStatus::Manipulable
        }
    };
    match (spec.bound_id, case.mode) {
        (BoundId::PluralityCP | BoundId::VetoCP, mode) => {
            // plurality's characterization is exact; veto's is not
            let labeling = if spec.bound_id == BoundId::PluralityCP {
                Labeling::Classifier
            } else {
                Labeling::Oracle
            };
            let cfg = collusion_cfg(labeling);
            match mode {
                Mode::Exhaustive => Ok(Empirical::Exact(
                    exhaustive_fraction(&cfg)?.proof_fraction(),
                )),
                Mode::MonteCarlo => Ok(Empirical::Estimate(estimate_fraction(&cfg)?)),
            }
        }
        (BoundId::PluralityE | BoundId::VetoE, Mode::Exhaustive) => {
            Ok(Empirical::Exact(almost_equal_isc_fraction(rule, spec.n)?))
        }
        (BoundId::PluralityE | BoundId::VetoE, Mode::MonteCarlo) => {
            let cfg = collusion_cfg(Labeling::Classifier);
            let sampler = IscSampler::new(rule, spec.n)?;
            let t = run_trials(&cfg, |rng| {
                Ok(status_of(spread_le_one(&sampler.sample(rng))))
            })?;
            Ok(Empirical::Estimate(EstimateResult::from_tally(
                t, case.seed, 0,
            )))
        }
        (BoundId::KApprovalF | BoundId::VetoF, Mode::Exhaustive) => {
            Ok(Empirical::Exact(almost_equal_ic_probability(rule, spec.n)?))
        }
        (BoundId::KApprovalF | BoundId::VetoF, Mode::MonteCarlo) => {
            let cfg = collusion_cfg(Labeling::Classifier);
            let t = run_trials(&cfg, |rng| {
                let x = tally(&sample_ic(spec.n, rule.m(), rng), rule)?;
                Ok(status_of(spread_le_one(&x)))
            })?;
            Ok(Empirical::Estimate(EstimateResult::from_tally(
                t, case.seed, 0,
            )))
        }
        (BoundId::BordaLimit, _) => Err(Error::OutOfRegime(
            "BordaLimit is a limit statement with no finite-size inequality".into(),
        )),
    }
}

/// Checks each lower bound against the exact fraction (exhaustive mode) or
/// the upper Wilson limit (Monte Carlo mode).
pub fn verify_bounds(grid: &[BoundCase]) -> Vec<BoundCheckRow> {
    grid.iter()
        .map(|case| {
            let row =
                |value: String, bound: String, ci_high, verdict, note: String| BoundCheckRow {
                    case: case.clone(),
                    value,
                    bound,
                    ci_high,
                    verdict,
                    note,
                };
            let bv = match bound_value(&case.spec) {
                Ok(b) => b,
                Err(e) => {
                    return row(
                        String::new(),
                        String::new(),
                        None,
                        Verdict::Inconclusive,
                        e.to_string(),
                    )
                }
            };
            let note = if bv.clamped {
                "bound clamped to 0".to_string()
            } else {
                String::new()
            };
            let rule = match bound_rule(&case.spec) {
                Ok(r) => r,
                Err(e) => {
                    return row(
                        String::new(),
                        bv.value.to_string(),
                        None,
                        Verdict::Inconclusive,
                        e.to_string(),
                    )
                }
            };
            match empirical(case, &rule) {
                Err(e) => row(
                    String::new(),
                    bv.value.to_string(),
                    None,
                    Verdict::Inconclusive,
                    e.to_string(),
                ),
                Ok(Empirical::Exact(f)) => {
                    let verdict = match &bv.value {
                        BoundNumber::Exact(b) => {
                            if &f >= b {
                                Verdict::Pass
                            } else {
                                Verdict::Fail
                            }
                        }
                        BoundNumber::Float(b) => {
                            if rational_to_f64(&f) >= *b {
                                Verdict::Pass
                            } else {
                                Verdict::Fail
                            }
                        }
                    };
                    row(f.to_string(), bv.value.to_string(), None, verdict, note)
                }
                Ok(Empirical::Estimate(r)) => {
                    let verdict = if r.ci_high >= bv.value.to_f64() {
                        Verdict::Pass
                    } else {
                        Verdict::Fail
                    };
                    row(
                        crate::report::fmt_f64(r.fraction_proof),
                        bv.value.to_string(),
                        Some(r.ci_high),
                        verdict,
                        note,
                    )
                }
            }
        })
        .collect()
}

/// Every in-regime exhaustive bound check with `n <= 8`, `2 <= m <= 4`,
/// `c <= 2`, under both manipulation-relative tie-breaks where they matter.
pub fn paper_grid() -> Vec<BoundCase> {
    let tbs = [
        TieBreakPolicy::ForManipulators,
        TieBreakPolicy::AgainstManipulators,
    ];
    let mut grid = Vec::new();
    for m in 2..=4usize {
        for n in 1..=8usize {
            for c in 1..=2usize {
                for tb in &tbs {
                    for id in [BoundId::PluralityCP, BoundId::VetoCP] {
                        let spec = BoundSpec::new(id, n, m).with_c(c);
                        if bound_value(&spec).is_ok() {
                            grid.push(BoundCase::exhaustive(spec, tb.clone()));
                        }
                    }
                }
            }
            for id in [BoundId::PluralityE, BoundId::VetoE, BoundId::VetoF] {
                let spec = BoundSpec::new(id, n, m);
                if bound_value(&spec).is_ok() {
                    grid.push(BoundCase::exhaustive(spec, TieBreakPolicy::ForManipulators));
                }
            }
            for k in 1..m {
                let spec = BoundSpec::new(BoundId::KApprovalF, n, m).with_k(k);
                if bound_value(&spec).is_ok() {
                    grid.push(BoundCase::exhaustive(spec, TieBreakPolicy::ForManipulators));
                }
            }
        }
    }
    grid
}

/// One grid point of the agreement harness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessPoint {
    pub rule: Rule,
    pub n: usize,
    pub c: usize,
    pub tie_break: TieBreakPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub grid_point: HarnessPoint,
    pub profile: Vec<i64>,
    pub classifier: ClassStatus,
    pub basis: Option<String>,
    pub oracle: OracleStatus,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub profiles: u64,
    /// `"classifier/oracle"` → count.
    pub matrix: BTreeMap<String, u64>,
    /// Classifier Proof rows by case, with how many of them the oracle
    /// also found Proof.
    pub proof_cases: BTreeMap<String, (u64, u64)>,
    pub disagreements: u64,
    pub false_proof: u64,
    pub unknown: u64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub points: Vec<(HarnessPoint, PointSummary)>,
    pub discrepancies: Vec<Discrepancy>,
}

impl HarnessReport {
    pub fn disagreements(&self) -> u64 {
        self.points.iter().map(|(_, s)| s.disagreements).sum()
    }

    pub fn false_proof(&self) -> u64 {
        self.points.iter().map(|(_, s)| s.false_proof).sum()
    }
}

/// Classifier against oracle on every scoring profile of every grid point.
/// A disagreement is a definite classifier verdict the oracle contradicts.
pub fn agreement_harness(grid: &[HarnessPoint], options: &OracleOptions) -> HarnessReport {
    let mut report = HarnessReport::default();
    for point in grid {
        let mut summary = PointSummary::default();
        let profiles: Vec<ScoringProfile> = match enumerate_scoring_profiles(&point.rule, point.n) {
            Ok(it) => it.collect(),
            Err(e) => {
                summary.error = Some(e.to_string());
                report.points.push((point.clone(), summary));
                continue;
            }
        };
        let rows: Vec<Result<(ScoringProfile, Classification, crate::oracle::OracleVerdict)>> =
            profiles
                .into_par_iter()
                .map(|x| {
                    let cl = classify(&x, point.c, &point.tie_break)?;
                    let or = collusion_oracle(&x, point.c, &point.tie_break, options)?;
                    Ok((x, cl, or))
                })
                .collect();
        for row in rows {
            let (x, cl, or) = match row {
                Ok(r) => r,
                Err(e) => {
                    summary.error = Some(e.to_string());
                    continue;
                }
            };
            summary.profiles += 1;
            let key = format!("{}/{:?}", cl.status.name(), or.status);
            *summary.matrix.entry(key).or_insert(0) += 1;
            if let Some(b) = cl.basis {
                let e = summary.proof_cases.entry(b.label()).or_insert((0, 0));
                e.0 += 1;
                if or.status == OracleStatus::Proof {
                    e.1 += 1;
                }
            }
            let disagree = match (cl.status, or.status) {
                (ClassStatus::Proof, OracleStatus::Manipulable) => {
                    summary.false_proof += 1;
                    true
                }
                (ClassStatus::Manipulable, OracleStatus::Proof) => true,
                (ClassStatus::Unknown, _) => {
                    summary.unknown += 1;
                    false
                }
                _ => false,
            };
            if disagree {
                summary.disagreements += 1;
                report.discrepancies.push(Discrepancy {
                    grid_point: point.clone(),
                    profile: x.scores().to_vec(),
                    classifier: cl.status,
                    basis: cl.basis.map(|b| b.label()),
                    oracle: or.status,
                    witness: or.witness,
                });
            }
        }
        report.points.push((point.clone(), summary));
    }
    report
}

/// Monte Carlo fraction of IC Borda profiles flagged by
/// [`crate::classify::borda_sufficient_manipulable`] with top-`l` overlap.
pub fn borda_sufficient_fraction(
    n: usize,
    m: usize,
    l: usize,
    trials: u64,
    seed: u64,
) -> Result<EstimateResult> {
    let mut cfg = ExperimentConfig::new(
        Rule::borda(m),
        n,
        1,
        TieBreakPolicy::ForManipulators,
        Culture::Ic,
    );
    cfg.trials = trials;
    cfg.seed = seed;
    cfg.validate()?;
    let start = Instant::now();
    let t = run_trials(&cfg, |rng| {
        let p = sample_ic(n, m, rng);
        let flagged = crate::classify::borda_sufficient_manipulable(&p, l)?;
        // "Proof" here counts flagged profiles
        Ok(if flagged {
            ClassStatus::Proof
        } else {
            ClassStatus::Manipulable
        })
    })?;
    Ok(EstimateResult::from_tally(
        t,
        seed,
        start.elapsed().as_millis(),
    ))
}

/// Samples IC profiles and returns the flagged ones, for spot checks.
pub fn borda_sufficient_samples(
    n: usize,
    m: usize,
    l: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Profile>> {
    let mut rng = RngStream::new(seed, 1);
    let mut out = Vec::new();
    for _ in 0..count {
        let p = sample_ic(n, m, &mut rng);
        if crate::classify::borda_sufficient_manipulable(&p, l)? {
            out.push(p);
        }
    }
    Ok(out)
}

/// Exact proportion as `BigUint` parts, for callers that want raw counts.
pub fn as_counts(f: &BigRational) -> (BigUint, BigUint) {
    (
        f.numer().to_biguint().unwrap_or_else(BigUint::zero),
        f.denom().to_biguint().unwrap_or_else(BigUint::zero),
    )
}

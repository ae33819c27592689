use collusionlab::count::{binomial, rational_to_f64, BoundId, BoundSpec};
use collusionlab::estimate::{
    agreement_harness, borda_sufficient_fraction, estimate_fraction, exhaustive_fraction, sweep,
    verify_bounds, Axis, BoundCase, EstimateResult, ExperimentConfig, HarnessPoint, Labeling, Mode,
    Tally, Verdict,
};
use collusionlab::oracle::{OracleOptions, OracleStatus};
use collusionlab::report::{wilson_interval, Z95};
use collusionlab::sample::Culture;
use collusionlab::voting::{Rule, TieBreakPolicy};
use num_rational::BigRational;
use proptest::prelude::*;

const FOR: TieBreakPolicy = TieBreakPolicy::ForManipulators;
const AGAINST: TieBreakPolicy = TieBreakPolicy::AgainstManipulators;

fn cfg(
    rule: Rule,
    n: usize,
    c: usize,
    tb: TieBreakPolicy,
    culture: Culture,
    trials: u64,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        trials,
        seed,
        ..ExperimentConfig::new(rule, n, c, tb, culture)
    }
}

fn without_clock(mut r: EstimateResult) -> EstimateResult {
    r.elapsed_ms = 0;
    r
}

#[test]
fn worker_count_never_changes_results() {
    let base = cfg(
        Rule::kapproval(2, 4).unwrap(),
        3,
        2,
        AGAINST,
        Culture::Isc,
        5000,
        17,
    );
    let runs: Vec<EstimateResult> = [1, 3, 8]
        .into_iter()
        .map(|t| {
            let c = ExperimentConfig {
                threads: Some(t),
                ..base.clone()
            };
            without_clock(estimate_fraction(&c).unwrap())
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    assert_eq!(runs[0].trials, 5000);
}

#[test]
fn monte_carlo_lands_near_the_exact_fraction() {
    let fixtures = [
        cfg(Rule::plurality(3), 5, 1, FOR, Culture::Isc, 20_000, 1),
        cfg(Rule::plurality(4), 4, 2, AGAINST, Culture::Ic, 20_000, 2),
        cfg(
            Rule::kapproval(2, 4).unwrap(),
            2,
            1,
            AGAINST,
            Culture::Isc,
            20_000,
            3,
        ),
        cfg(Rule::veto(3), 3, 1, FOR, Culture::Ic, 20_000, 4),
        cfg(Rule::borda(3), 2, 1, FOR, Culture::Ic, 20_000, 5),
    ];
    for f in fixtures {
        let exact = exhaustive_fraction(&f).unwrap();
        let p = exact.proof as f64 / exact.total as f64;
        let mc = estimate_fraction(&f).unwrap();
        let half = (mc.ci_high - mc.ci_low) / 2.0;
        assert!(
            (mc.fraction_proof - p).abs() <= 4.0 * half,
            "{} n={} {}: mc={} exact={p}",
            f.rule,
            f.n,
            f.culture.name(),
            mc.fraction_proof
        );
        assert_eq!(mc.unknown_count, 0);
    }
}

#[test]
fn plurality_three_by_three_fractions() {
    let against =
        exhaustive_fraction(&cfg(Rule::plurality(3), 3, 1, AGAINST, Culture::Isc, 1, 0)).unwrap();
    assert_eq!((against.proof, against.total), (10, 10));
    let for_ =
        exhaustive_fraction(&cfg(Rule::plurality(3), 3, 1, FOR, Culture::Isc, 1, 0)).unwrap();
    assert_eq!((for_.proof, for_.manipulable, for_.total), (4, 6, 10));
    assert_eq!(for_.proof_fraction(), BigRational::new(2.into(), 5.into()));

    let mc = estimate_fraction(&cfg(
        Rule::plurality(3),
        3,
        1,
        AGAINST,
        Culture::Isc,
        3000,
        8,
    ))
    .unwrap();
    assert_eq!(mc.fraction_proof, 1.0);
    let mc =
        estimate_fraction(&cfg(Rule::plurality(3), 3, 1, FOR, Culture::Isc, 30_000, 8)).unwrap();
    assert!((mc.fraction_proof - 0.4).abs() < 0.02);
}

#[test]
fn single_candidate_is_all_proof() {
    for rule in [Rule::plurality(1), Rule::veto(1)] {
        let r = estimate_fraction(&cfg(rule, 4, 2, FOR, Culture::Isc, 100, 0)).unwrap();
        assert_eq!(r.fraction_proof, 1.0);
    }
    let r = estimate_fraction(&cfg(Rule::borda(1), 4, 1, AGAINST, Culture::Ic, 100, 0)).unwrap();
    assert_eq!(r.fraction_proof, 1.0);
}

#[test]
fn veto_exact_fraction_covers_the_sufficient_cases() {
    let mut c = cfg(Rule::veto(3), 2, 1, FOR, Culture::Isc, 1, 0);
    let resolved = exhaustive_fraction(&c).unwrap();
    c.resolve_unknown = false;
    let raw = exhaustive_fraction(&c).unwrap();
    assert_eq!(resolved.unknown, 0);
    assert!(raw.unknown > 0);
    assert!(resolved.proof >= raw.proof);
    assert_eq!(resolved.total, 6);
}

#[test]
fn unresolved_unknowns_stay_a_third_column() {
    let mut c = cfg(
        Rule::kapproval(2, 4).unwrap(),
        3,
        2,
        FOR,
        Culture::Isc,
        2000,
        9,
    );
    c.resolve_unknown = false;
    let r = estimate_fraction(&c).unwrap();
    assert!(r.unknown_count > 0);
    assert_eq!(
        r.proof_count + r.manipulable_count + r.unknown_count,
        r.trials
    );
    // a budget of one evaluation sends everything unresolved to unknown
    c.resolve_unknown = true;
    c.oracle_budget = 1;
    let r2 = estimate_fraction(&c).unwrap();
    assert_eq!(r2.unknown_count, r.unknown_count);
}

#[test]
fn oracle_labeling_matches_classifier_where_exact() {
    let mut c = cfg(Rule::plurality(3), 4, 2, AGAINST, Culture::Isc, 3000, 21);
    let a = without_clock(estimate_fraction(&c).unwrap());
    c.labeling = Labeling::Oracle;
    let b = without_clock(estimate_fraction(&c).unwrap());
    assert_eq!(a, b);
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(estimate_fraction(&cfg(Rule::borda(3), 2, 1, FOR, Culture::Isc, 10, 0)).is_err());
    assert!(estimate_fraction(&cfg(Rule::plurality(3), 2, 1, FOR, Culture::Isc, 0, 0)).is_err());
    assert!(estimate_fraction(&cfg(Rule::plurality(3), 2, 0, FOR, Culture::Isc, 10, 0)).is_err());
    let wrong = TieBreakPolicy::fixed_identity(4);
    assert!(estimate_fraction(&cfg(Rule::plurality(3), 2, 1, wrong, Culture::Isc, 10, 0)).is_err());
    assert!(exhaustive_fraction(&cfg(Rule::borda(6), 4, 1, FOR, Culture::Ic, 1, 0)).is_err());
}

#[test]
fn sweep_records_errors_and_rows_replay() {
    let base = cfg(Rule::plurality(3), 5, 1, FOR, Culture::Isc, 2000, 77);
    let rows = sweep(&base, Axis::M, &[2, 0, 4]);
    assert_eq!(rows.len(), 3);
    assert!(rows[1].result.is_err());
    for r in [&rows[0], &rows[2]] {
        let again = estimate_fraction(&r.config).unwrap();
        assert_eq!(
            without_clock(again),
            without_clock(r.result.clone().unwrap())
        );
    }
    assert_ne!(rows[0].config.seed, rows[2].config.seed);
}

#[test]
fn plurality_proof_fraction_grows_with_voters() {
    let base = cfg(Rule::plurality(3), 5, 1, FOR, Culture::Isc, 20_000, 3);
    let rows = sweep(&base, Axis::N, &[5, 10, 20, 40]);
    let fr: Vec<f64> = rows
        .iter()
        .map(|r| r.result.as_ref().unwrap().fraction_proof)
        .collect();
    assert!(fr.windows(2).all(|w| w[0] < w[1]), "{fr:?}");
    for r in &rows {
        let n = r.config.n as f64;
        assert!(r.result.as_ref().unwrap().ci_high >= ((n - 1.0) / (n + 1.0)).powi(2));
    }
}

#[test]
fn kapproval_voters_sweep_runs() {
    let base = cfg(
        Rule::kapproval(2, 4).unwrap(),
        2,
        1,
        FOR,
        Culture::Isc,
        5000,
        4,
    );
    let rows = sweep(&base, Axis::N, &[2, 4, 8]);
    let fr: Vec<f64> = rows
        .iter()
        .map(|r| r.result.as_ref().unwrap().fraction_proof)
        .collect();
    assert!(fr[0] < fr[2], "{fr:?}");
}

// P(two uniform l-subsets of [m] share at least two elements)
fn overlap_probability(m: usize, l: usize) -> f64 {
    let total = rational_to_f64(&BigRational::new(
        binomial(m as i64, l as i64).into(),
        1.into(),
    ));
    let share = |j: usize| {
        let ways = binomial(l as i64, j as i64) * binomial((m - l) as i64, (l - j) as i64);
        rational_to_f64(&BigRational::new(ways.into(), 1.into())) / total
    };
    1.0 - share(0) - share(1)
}

#[test]
fn borda_overlap_fraction_matches_hypergeometric() {
    for (i, m) in [20usize, 50, 100].into_iter().enumerate() {
        let l = (m as f64).sqrt().floor() as usize;
        let r = borda_sufficient_fraction(2, m, l, 20_000, 40 + i as u64).unwrap();
        let half = (r.ci_high - r.ci_low) / 2.0;
        let p = overlap_probability(m, l);
        assert!(
            (r.fraction_proof - p).abs() <= 4.0 * half,
            "m={m} l={l}: {} vs {p}",
            r.fraction_proof
        );
    }
    assert!(borda_sufficient_fraction(2, 20, 11, 10, 0).is_err());
}

#[test]
fn bound_examples() {
    let cases = vec![
        BoundCase::exhaustive(BoundSpec::new(BoundId::PluralityCP, 10, 3).with_c(1), FOR),
        BoundCase::exhaustive(BoundSpec::new(BoundId::PluralityE, 2, 4), FOR),
        BoundCase::exhaustive(BoundSpec::new(BoundId::KApprovalF, 1, 4).with_k(2), FOR),
        BoundCase::exhaustive(BoundSpec::new(BoundId::PluralityE, 4, 4), FOR),
        BoundCase {
            spec: BoundSpec::new(BoundId::PluralityCP, 30, 4).with_c(2),
            mode: Mode::MonteCarlo,
            tie_break: FOR,
            trials: 4000,
            seed: 12,
        },
    ];
    let rows = verify_bounds(&cases);
    assert_eq!(rows[0].bound, "81/121");
    assert_eq!(rows[0].verdict, Verdict::Pass);
    assert_eq!(
        (rows[1].value.as_str(), rows[1].bound.as_str()),
        ("3/5", "9/16")
    );
    assert_eq!(rows[1].verdict, Verdict::Pass);
    assert_eq!(
        (rows[2].value.as_str(), rows[2].bound.as_str()),
        ("1", "9/16")
    );
    assert_eq!(rows[3].verdict, Verdict::Inconclusive);
    assert_eq!(rows[4].verdict, Verdict::Pass);
    assert!(rows[4].ci_high.is_some());
}

#[test]
fn harness_on_kapproval_coalitions_has_no_false_proof() {
    let mut grid = Vec::new();
    for m in 3..=4 {
        for n in 1..=3 {
            for tb in [FOR, AGAINST] {
                grid.push(HarnessPoint {
                    rule: Rule::kapproval(2, m).unwrap(),
                    n,
                    c: 2,
                    tie_break: tb,
                });
            }
        }
    }
    let report = agreement_harness(&grid, &OracleOptions::default());
    assert_eq!(report.false_proof(), 0);
    assert_eq!(report.disagreements(), 0);
    assert!(report
        .points
        .iter()
        .all(|(_, s)| s.error.is_none() && s.profiles > 0));
}

#[test]
fn harness_on_borda_margin_rows() {
    let grid: Vec<HarnessPoint> = (1..=3)
        .flat_map(|n| {
            [FOR, AGAINST].map(|tb| HarnessPoint {
                rule: Rule::borda(3),
                n,
                c: 1,
                tie_break: tb,
            })
        })
        .collect();
    let report = agreement_harness(&grid, &OracleOptions::default());
    for (_, s) in &report.points {
        if let Some(&(fired, agreed)) = s.proof_cases.get("margin>=3") {
            assert_eq!(fired, agreed);
        }
    }
    assert_eq!(report.false_proof(), 0);
    for d in &report.discrepancies {
        assert_eq!(d.oracle, OracleStatus::Proof);
    }
}

proptest! {
    #[test]
    fn wilson_interval_brackets_the_estimate(proof in 0u64..500, manip in 0u64..500, unknown in 0u64..50) {
        prop_assume!(proof + manip + unknown > 0);
        let r = EstimateResult::from_tally(Tally { proof, manipulable: manip, unknown }, 0, 0);
        prop_assert_eq!(r.trials, proof + manip + unknown);
        prop_assert!(0.0 <= r.ci_low && r.ci_low <= r.fraction_proof);
        prop_assert!(r.fraction_proof <= r.ci_high && r.ci_high <= 1.0);
        let (lo, hi) = wilson_interval(proof, r.trials, Z95);
        prop_assert_eq!((lo, hi), (r.ci_low, r.ci_high));
    }
}

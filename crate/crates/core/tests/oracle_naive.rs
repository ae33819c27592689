use collusionlab::count::enumerate_scoring_profiles;
use collusionlab::oracle::{
    achievable_winners, collusion_oracle, strategyproof_oracle, tie_reference, Budget, Improvement,
    OracleOptions, OracleStatus, Witness,
};
use collusionlab::voting::{winner_of_scores, Preference, Rule, ScoringProfile, TieBreakPolicy};
use proptest::prelude::*;

fn tuples(perms: &[Preference], c: usize) -> Vec<Vec<Preference>> {
    let mut out = vec![Vec::new()];
    for _ in 0..c {
        out = out
            .into_iter()
            .flat_map(|t| {
                perms.iter().map(move |p| {
                    let mut t = t.clone();
                    t.push(p.clone());
                    t
                })
            })
            .collect();
    }
    out
}

fn outcome(
    x: &ScoringProfile,
    tb: &TieBreakPolicy,
    first: &Preference,
    ballots: &[Preference],
) -> usize {
    let reference = tie_reference(tb, first, ballots);
    winner_of_scores(x.with_votes(ballots).scores(), tb, Some(&reference)).unwrap()
}

// every (truth, deviation) pair, no grouping
fn naive(x: &ScoringProfile, c: usize, tb: &TieBreakPolicy, improvement: Improvement) -> bool {
    let all = tuples(&Preference::all(x.m()), c);
    all.iter().any(|truths| {
        let wp = outcome(x, tb, &truths[0], truths);
        all.iter().any(|dev| {
            let wd = outcome(x, tb, &truths[0], dev);
            match improvement {
                Improvement::AnyMember => truths.iter().any(|t| t.prefers(wd, wp)),
                Improvement::Unanimous => wd != wp && truths.iter().all(|t| t.prefers(wd, wp)),
            }
        })
    })
}

fn policies(m: usize) -> Vec<TieBreakPolicy> {
    vec![
        TieBreakPolicy::ForManipulators,
        TieBreakPolicy::AgainstManipulators,
        TieBreakPolicy::fixed_identity(m),
        TieBreakPolicy::FixedOrder(Preference::new((0..m).rev().collect()).unwrap()),
    ]
}

fn small_rules() -> Vec<Rule> {
    let mut rules = Vec::new();
    for m in 2..=3 {
        rules.extend([Rule::plurality(m), Rule::veto(m), Rule::borda(m)]);
    }
    rules.push(Rule::kapproval(2, 3).unwrap());
    rules
}

fn pref(order: &[usize]) -> Preference {
    Preference::new(order.to_vec()).unwrap()
}

fn profile(rule: Rule, n: usize, scores: &[i64]) -> ScoringProfile {
    ScoringProfile::new(rule, n, scores.to_vec()).unwrap()
}

#[test]
fn grouped_enumeration_matches_naive_loop() {
    let mut checked = 0;
    for rule in small_rules() {
        for n in 0..=3 {
            for x in enumerate_scoring_profiles(&rule, n).unwrap() {
                for c in 1..=2 {
                    for tb in policies(rule.m()) {
                        for improvement in [Improvement::AnyMember, Improvement::Unanimous] {
                            let options = OracleOptions {
                                improvement,
                                ..Default::default()
                            };
                            let v = collusion_oracle(&x, c, &tb, &options).unwrap();
                            let expected = naive(&x, c, &tb, improvement);
                            assert_eq!(
                                v.is_manipulable(),
                                expected,
                                "{rule} {:?} c={c} {}",
                                x.scores(),
                                tb.name()
                            );
                            if let Some(w) = &v.witness {
                                assert!(w.replays(&x, &tb, improvement));
                            }
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn achievable_winners_match_direct_enumeration() {
    for rule in small_rules() {
        let m = rule.m();
        for x in enumerate_scoring_profiles(&rule, 2).unwrap() {
            for tb in policies(m) {
                for sigma in Preference::all(m) {
                    let mut direct: Vec<usize> = tuples(&Preference::all(m), 2)
                        .iter()
                        .map(|d| outcome(&x, &tb, &sigma, d))
                        .collect();
                    direct.sort();
                    direct.dedup();
                    let got = achievable_winners(&x, 2, &sigma, &tb, Budget::default()).unwrap();
                    assert_eq!(got, direct);
                }
            }
        }
    }
}

#[test]
fn plurality_eight_two_two() {
    let x = profile(Rule::plurality(3), 12, &[8, 2, 2]);
    let o = OracleOptions::default();
    for tb in [
        TieBreakPolicy::ForManipulators,
        TieBreakPolicy::AgainstManipulators,
    ] {
        assert_eq!(
            collusion_oracle(&x, 5, &tb, &o).unwrap().status,
            OracleStatus::Proof
        );
    }
    let v = collusion_oracle(&x, 6, &TieBreakPolicy::ForManipulators, &o).unwrap();
    assert_eq!(v.status, OracleStatus::Manipulable);
    assert!(v.witness.unwrap().replays(
        &x,
        &TieBreakPolicy::ForManipulators,
        Improvement::AnyMember
    ));
    for sigma in Preference::all(3) {
        let w = achievable_winners(
            &x,
            1,
            &sigma,
            &TieBreakPolicy::ForManipulators,
            Budget::default(),
        )
        .unwrap();
        assert_eq!(w, vec![0]);
    }
}

#[test]
fn plurality_small_examples() {
    let o = OracleOptions::default();
    let for_ = TieBreakPolicy::ForManipulators;
    let x = profile(Rule::plurality(3), 2, &[1, 1, 0]);
    assert!(collusion_oracle(&x, 1, &for_, &o).unwrap().is_proof());
    let w = achievable_winners(&x, 1, &pref(&[2, 1, 0]), &for_, Budget::default()).unwrap();
    assert_eq!(w, vec![0, 1, 2]);

    let x = profile(Rule::plurality(3), 4, &[2, 2, 0]);
    let v = strategyproof_oracle(&x, &for_, &o).unwrap();
    assert!(v.is_manipulable());

    let x = profile(Rule::plurality(3), 3, &[1, 1, 1]);
    assert!(
        strategyproof_oracle(&x, &TieBreakPolicy::AgainstManipulators, &o)
            .unwrap()
            .is_proof()
    );
}

#[test]
fn borda_large_margin_is_proof() {
    let x = profile(Rule::borda(3), 6, &[9, 3, 6]);
    for tb in policies(3) {
        assert!(strategyproof_oracle(&x, &tb, &OracleOptions::default())
            .unwrap()
            .is_proof());
    }
}

#[test]
fn single_candidate_has_one_winner() {
    let x = profile(Rule::plurality(1), 3, &[3]);
    let w = achievable_winners(
        &x,
        1,
        &pref(&[0]),
        &TieBreakPolicy::ForManipulators,
        Budget::default(),
    )
    .unwrap();
    assert_eq!(w, vec![0]);
    assert!(collusion_oracle(
        &x,
        3,
        &TieBreakPolicy::AgainstManipulators,
        &OracleOptions::default()
    )
    .unwrap()
    .is_proof());
}

#[test]
fn tight_budget_reports_exceeded() {
    let x = profile(Rule::borda(5), 0, &[0; 5]);
    let options = OracleOptions {
        budget: Budget::new(1000).unwrap(),
        ..Default::default()
    };
    let v = collusion_oracle(&x, 2, &TieBreakPolicy::ForManipulators, &options).unwrap();
    assert_eq!(v.status, OracleStatus::BudgetExceeded);
    assert!(v.witness.is_none());
    assert!(v.evaluations > 1000);
    assert!(Budget::new(0).is_err());
}

#[test]
fn witness_json_round_trip() {
    let x = profile(Rule::plurality(3), 4, &[2, 2, 0]);
    let tb = TieBreakPolicy::ForManipulators;
    let w = strategyproof_oracle(&x, &tb, &OracleOptions::default())
        .unwrap()
        .witness
        .unwrap();
    let json = serde_json::to_string(&w).unwrap();
    let back: Witness = serde_json::from_str(&json).unwrap();
    assert_eq!(back, w);
    assert!(back.replays(&x, &tb, Improvement::AnyMember));
}

#[test]
fn verdict_is_thread_count_independent() {
    let x = profile(Rule::plurality(4), 3, &[1, 1, 1, 0]);
    let tb = TieBreakPolicy::AgainstManipulators;
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| collusion_oracle(&x, 2, &tb, &OracleOptions::default()).unwrap())
    };
    let one = run(1);
    assert_eq!(run(4), one);
    assert_eq!(run(7), one);
}

fn small_case() -> impl Strategy<Value = (Rule, ScoringProfile, usize, TieBreakPolicy)> {
    (0usize..4, 2usize..=4, 0usize..=4, 1usize..=2, 0usize..3).prop_flat_map(|(r, m, n, c, t)| {
        let rule = match r {
            0 => Rule::plurality(m),
            1 => Rule::veto(m),
            2 if m > 2 => Rule::kapproval(2, m).unwrap(),
            _ => Rule::borda(m.min(3)),
        };
        let profiles: Vec<ScoringProfile> = enumerate_scoring_profiles(&rule, n).unwrap().collect();
        let tb = policies(rule.m()).swap_remove(t);
        (0..profiles.len()).prop_map(move |i| (rule, profiles[i].clone(), c, tb.clone()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn manipulable_stays_manipulable_with_more_voters((_rule, x, c, tb) in small_case()) {
        let o = OracleOptions::default();
        if collusion_oracle(&x, c, &tb, &o).unwrap().is_manipulable() {
            prop_assert!(collusion_oracle(&x, c + 1, &tb, &o).unwrap().is_manipulable());
        }
    }

    #[test]
    fn relabeling_keeps_status((_rule, x, c, tb) in small_case(), seed in any::<u64>()) {
        // manipulator-relative policies only; a fixed order is not relabel-invariant
        prop_assume!(!matches!(tb, TieBreakPolicy::FixedOrder(_)));
        let m = x.m();
        let mut perm: Vec<usize> = (0..m).collect();
        let mut s = seed;
        for i in (1..m).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let o = OracleOptions::default();
        let a = collusion_oracle(&x, c, &tb, &o).unwrap().status;
        let b = collusion_oracle(&x.relabel(&perm), c, &tb, &o).unwrap().status;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fixed_order_relabels_with_the_order((_rule, x, c, _tb) in small_case(), seed in any::<u64>()) {
        let m = x.m();
        let mut perm: Vec<usize> = (0..m).collect();
        let mut s = seed;
        for i in (1..m).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let o = OracleOptions::default();
        let a = collusion_oracle(&x, c, &TieBreakPolicy::fixed_identity(m), &o).unwrap().status;
        let moved = TieBreakPolicy::FixedOrder(Preference::identity(m).relabel(&perm));
        let b = collusion_oracle(&x.relabel(&perm), c, &moved, &o).unwrap().status;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn witnesses_replay((_rule, x, c, tb) in small_case()) {
        let v = collusion_oracle(&x, c, &tb, &OracleOptions::default()).unwrap();
        if let Some(w) = v.witness {
            prop_assert!(w.replays(&x, &tb, Improvement::AnyMember));
        }
    }
}

mod common;

use common::*;
use num_traits::{One, Zero};
use proptest::prelude::*;
use sb_core::io::{parse_protocol, serialize_protocol};
use sb_core::rational::{int, ratio};
use sb_core::*;

fn validated(p: ExperimentProtocol) -> ValidatedProtocol {
    validate_protocol(p).expect("generator yields valid protocols")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generated_protocols_validate(p in small_protocol()) {
        let v = validated(p);
        let total: Rational = v.outcomes.iter().map(|o| &o.prob).sum();
        prop_assert!(total.is_one());
    }

    #[test]
    fn complement_additivity(p in small_protocol()) {
        let v = validated(p);
        for agent in &v.agents {
            for prop in all_propositions(&v) {
                let rest = v.complement(&prop);
                for m in Measure::ALL {
                    let here = match credence(&v, agent, &prop, m) {
                        Ok(r) => r.value,
                        Err(CredenceError::NoAwakenings(_)) => {
                            prop_assert_eq!(m, Measure::PerAwakening);
                            continue;
                        }
                        Err(e) => return Err(TestCaseError::fail(e.to_string())),
                    };
                    if rest.is_empty() {
                        prop_assert!(here.is_one());
                    } else {
                        let there = credence(&v, agent, &rest, m).unwrap().value;
                        prop_assert!((here + there).is_one());
                    }
                }
            }
        }
    }

    #[test]
    fn monotone_in_the_proposition(p in small_protocol()) {
        let v = validated(p);
        let props = all_propositions(&v);
        for agent in &v.agents {
            for m in Measure::ALL {
                for a in &props {
                    for b in props.iter().filter(|b| a.is_subset(b)) {
                        if let (Ok(x), Ok(y)) = (credence(&v, agent, a, m), credence(&v, agent, b, m)) {
                            prop_assert!(x.value <= y.value);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn per_awakening_matches_enumeration(p in small_protocol()) {
        let v = validated(p);
        for agent in &v.agents {
            for prop in all_propositions(&v) {
                match (per_awakening_credence(&v, agent, &prop), enumeration_ratio(&v, agent, &prop)) {
                    (Ok(r), Some(expected)) => prop_assert_eq!(r.value, expected),
                    (Err(CredenceError::NoAwakenings(_)), None) => {}
                    (got, want) => return Err(TestCaseError::fail(format!("{got:?} vs {want:?}"))),
                }
            }
        }
    }

    #[test]
    fn per_experiment_ignores_schedules((p, masks) in small_protocol().prop_flat_map(|p| {
        let edit = schedule_edit(&p);
        (Just(p), edit)
    })) {
        let before = validated(p.clone());
        let after = validated(with_schedules(&p, &masks));
        for agent in &before.agents {
            for prop in all_propositions(&before) {
                prop_assert_eq!(
                    per_experiment_credence(&before, agent, &prop).unwrap().value,
                    per_experiment_credence(&after, agent, &prop).unwrap().value
                );
            }
        }
    }

    #[test]
    fn constant_schedules_collapse_measures((p, mask) in small_protocol().prop_flat_map(|p| (Just(p), 1u8..32))) {
        let n = p.agents.len();
        let masks = vec![vec![mask; p.outcomes.len()]; n];
        let v = validated(with_schedules(&p, &masks));
        for agent in &v.agents {
            for prop in all_propositions(&v) {
                prop_assert_eq!(
                    per_awakening_credence(&v, agent, &prop).unwrap().value,
                    per_experiment_credence(&v, agent, &prop).unwrap().value
                );
            }
        }
    }

    #[test]
    fn protocol_round_trip(p in small_protocol()) {
        let v = validated(p);
        let text = serialize_protocol(&v);
        let back = parse_protocol(&text).unwrap();
        prop_assert_eq!(&back, &v);
        prop_assert_eq!(serialize_protocol(&back), text);
    }

    #[test]
    fn serialization_is_injective(a in small_protocol(), b in small_protocol()) {
        let (a, b) = (validated(a), validated(b));
        prop_assert_eq!(serialize_protocol(&a) == serialize_protocol(&b), a == b);
    }

    #[test]
    fn breakeven_agrees_with_credence(p in small_protocol()) {
        let v = validated(p);
        for agent in &v.agents {
            for prop in all_propositions(&v) {
                for m in Measure::ALL {
                    let credence = credence(&v, agent, &prop, m);
                    match breakeven_probability(&v, agent, &prop, m) {
                        Ok(q) => prop_assert_eq!(q, credence.unwrap().value),
                        Err(WagerError::DegenerateProposition(_)) => {
                            let c = credence.unwrap().value;
                            prop_assert!(c.is_zero() || c.is_one());
                        }
                        Err(WagerError::Credence(CredenceError::NoAwakenings(_))) => {
                            prop_assert!(per_awakening_credence(&v, agent, &prop).is_err());
                        }
                        Err(e) => return Err(TestCaseError::fail(e.to_string())),
                    }
                }
            }
        }
    }

    #[test]
    fn sign_coherence_and_stake_linearity(p in small_protocol(), num in 1i64..100, stake in 1i64..20) {
        let v = validated(p);
        let q = ratio(num, 100);
        for agent in &v.agents {
            for prop in all_propositions(&v) {
                for s in Measure::ALL {
                    let Ok(b) = breakeven_probability(&v, agent, &prop, s) else { continue };
                    let spec = WagerSpec {
                        agent: agent.clone(),
                        proposition: prop.clone(),
                        stake: int(1),
                        implied_probability: q.clone(),
                        settlement: s,
                    };
                    let unit = evaluate_wager(&v, &spec).unwrap();
                    let ev = &unit.expected_value_per_experiment;
                    match q.cmp(&b) {
                        std::cmp::Ordering::Less => prop_assert!(*ev > Rational::zero()),
                        std::cmp::Ordering::Greater => prop_assert!(*ev < Rational::zero()),
                        std::cmp::Ordering::Equal => prop_assert!(unit.breakeven),
                    }
                    let scaled = evaluate_wager(&v, &WagerSpec { stake: int(stake), ..spec }).unwrap();
                    prop_assert_eq!(scaled.expected_value_per_experiment, ev * int(stake));
                }
            }
        }
    }

    #[test]
    fn brier_matches_oracle(p in small_protocol(), num in 0i64..=12) {
        let v = validated(p);
        let r = ratio(num, 12);
        for agent in &v.agents {
            for prop in all_propositions(&v) {
                for m in Measure::ALL {
                    match brier_score(&v, agent, &prop, &r, m) {
                        Ok(score) => prop_assert_eq!(score, oracle_brier(&v, agent, &prop, &r, m)),
                        Err(_) => prop_assert!(enumeration_ratio(&v, agent, &prop).is_none()),
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn brier_minimizer_is_grid_optimal(p in small_protocol()) {
        let v = validated(p);
        let agent = &v.agents[0];
        let prop = all_propositions(&v)[0].clone();
        for m in Measure::ALL {
            let Ok(best) = brier_minimizer(&v, agent, &prop, m) else { continue };
            prop_assert_eq!(&best, &credence(&v, agent, &prop, m).unwrap().value);
            let floor = oracle_brier(&v, agent, &prop, &best, m);
            for r in grid() {
                prop_assert!(oracle_brier(&v, agent, &prop, &r, m) >= floor);
            }
        }
    }

    #[test]
    fn simulation_invariants(p in small_protocol(), seed in any::<u64>(), trials in 0u64..3_000) {
        let v = validated(p);
        let r = run_trials(&v, trials, seed);
        prop_assert_eq!(r.tallies.values().sum::<u64>(), trials);
        for agent in &v.agents {
            let schedule = v.schedule(agent).unwrap();
            for o in &v.outcomes {
                for d in 1..=MAX_DAYS {
                    let day = format!("d{d}");
                    let expected = if schedule.days(&o.label).contains(&day) { r.tallies[&o.label] } else { 0 };
                    prop_assert_eq!(r.awakening_count(&o.label, agent, &day), expected);
                }
            }
        }
        for w in [2, 5] {
            prop_assert_eq!(&run_trials_parallel(&v, trials, seed, w).unwrap(), &r);
        }
    }

    #[test]
    fn simulated_per_experiment_ignores_schedule_edits((p, masks) in small_protocol().prop_flat_map(|p| {
        let edit = schedule_edit(&p);
        (Just(p), edit)
    }), seed in any::<u64>()) {
        let before = validated(p.clone());
        let after = validated(with_schedules(&p, &masks));
        let (ra, rb) = (run_trials(&before, 2_000, seed), run_trials(&after, 2_000, seed));
        prop_assert_eq!(&ra.tallies, &rb.tallies);
        let prop = all_propositions(&before)[0].clone();
        prop_assert_eq!(
            estimate_credence(&ra, &before, &before.agents[0], &prop, Measure::PerExperiment).unwrap(),
            estimate_credence(&rb, &after, &after.agents[0], &prop, Measure::PerExperiment).unwrap()
        );
    }
}

#[test]
fn chain_credence_strictly_decreases() {
    let heads = Proposition::new(["heads"]);
    let mut last = int(1);
    for k in 1..=100u64 {
        let p = validate_protocol(preset("chain", &PresetParams::chain(k)).unwrap()).unwrap();
        let c = per_awakening_credence(&p, "SB", &heads).unwrap().value;
        assert!(c < last, "k={k}");
        last = c;
    }
}

#[test]
fn large_chains_do_not_overflow() {
    let heads = Proposition::new(["heads"]);
    let params = PresetParams { k: Some(5_000), heads_prob: Some(ratio(1, 1_000_003)) };
    let p = validate_protocol(preset("chain", &params).unwrap()).unwrap();
    let c = per_awakening_credence(&p, "SB", &heads).unwrap().value;
    assert_eq!(c, Rational::new(1.into(), (1 + 5_000 * 1_000_002i64).into()));
}

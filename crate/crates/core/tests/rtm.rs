use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use roopl::interp::{run_program, Interpreter, RunOptions, Store};
use roopl::pipeline::check_source;
use roopl::rtm::*;

/// Independent restatement of the two determinism conditions.
fn naive_violations(rules: &[Rule]) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let sym = |r: &Rule| r.s1 != SLASH;
    let (mut fwd, mut bwd) = (Vec::new(), Vec::new());
    for i in 0..rules.len() {
        for j in 0..rules.len() {
            if i >= j {
                continue;
            }
            let (a, b) = (rules[i], rules[j]);
            let symbolic = sym(&a) && sym(&b);
            if a.q1 == b.q1 && (!symbolic || a.s1 == b.s1) {
                fwd.push((i, j));
            }
            if a.q2 == b.q2 && (!symbolic || a.s2 == b.s2) {
                bwd.push((i, j));
            }
        }
    }
    (fwd, bwd)
}

fn arb_rule() -> impl Strategy<Value = Rule> {
    (0..4i32, 0..=MAX_SYMBOL, 0..=MAX_SYMBOL, 0..4i32, any::<bool>(), any::<bool>()).prop_map(
        |(q1, s1, s2, q2, shift, right)| if shift { Rule::shift(q1, right, q2) } else { Rule::symbol(q1, s1, s2, q2) },
    )
}

proptest! {
    #[test]
    fn determinism_check_matches_pairwise_oracle(rules in prop::collection::vec(arb_rule(), 0..7)) {
        let (fwd, bwd) = naive_violations(&rules);
        let got = check_rules(&rules);
        let got_fwd: Vec<_> = got.iter().filter_map(|d| match d { RtmDiagnostic::Forward(i, j) => Some((*i, *j)), _ => None }).collect();
        let got_bwd: Vec<_> = got.iter().filter_map(|d| match d { RtmDiagnostic::Backward(i, j) => Some((*i, *j)), _ => None }).collect();
        prop_assert_eq!(got_fwd, fwd);
        prop_assert_eq!(got_bwd, bwd);
        prop_assert!(!got.iter().any(|d| matches!(d, RtmDiagnostic::Malformed(_))));
    }
}

#[test]
fn harness_examples() {
    let (a, b, c) = (1, 2, 3);
    assert_eq!(
        check_rules(&[Rule::symbol(1, a, b, 2), Rule::symbol(1, a, c, 3)]),
        vec![RtmDiagnostic::Forward(0, 1)]
    );
    assert_eq!(
        check_rules(&[Rule::symbol(1, a, b, 3), Rule::symbol(2, c, b, 3)]),
        vec![RtmDiagnostic::Backward(0, 1)]
    );
    assert!(check_rtm(&binary_flip()).is_empty());
    assert_eq!(binary_flip().rules.len(), 4);
    assert_eq!(check_rules(&[Rule { q1: 1, s1: SLASH, s2: 2, q2: 2 }]), vec![RtmDiagnostic::Malformed(0)]);
}

fn agree(tm: &Tm, input: &[i32]) -> TapeResult {
    let (want, _) = oracle(tm, input, 50).unwrap();
    let run = run_rtm_program(tm, input).unwrap_or_else(|e| panic!("{e}"));
    assert_eq!(run.interpreted, want, "{} on {:?}", show_tape(input), tm.rules);
    assert_eq!(run.compiled, want, "{} on {:?}", show_tape(input), tm.rules);
    want
}

#[test]
fn named_machines() {
    let r = agree(&unary_increment(), &[1, 1, 1]);
    assert_eq!(show_tape(&r.cells), "1111");
    let r = agree(&identity(), &[2, 3, 1]);
    assert_eq!(r.cells, vec![2, 3, 1]);
    let r = agree(&binary_flip(), &[1, 2, 2, 1]);
    assert_eq!(show_tape(&r.cells), "2112_");
}

#[test]
fn named_machines_on_random_tapes() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..6 {
        let n = rng.gen_range(0..5);
        agree(&unary_increment(), &vec![1; n]);
        let tape: Vec<i32> = (0..rng.gen_range(0..5)).map(|_| rng.gen_range(1..3)).collect();
        agree(&binary_flip(), &tape);
    }
}

#[test]
fn moving_left_prepends_a_cell() {
    let tm = Tm { rules: vec![Rule::shift(1, false, 2), Rule::symbol(2, 0, 1, 3)], start: 1, finish: 3 };
    assert!(check_rtm(&tm).is_empty());
    let r = agree(&tm, &[3]);
    assert_eq!((show_tape(&r.cells), r.head), ("13".to_string(), 0));
}

/// Rewrites every non-blank symbol through a random permutation.
fn sweep(rng: &mut StdRng) -> Tm {
    let mut perm = vec![1, 2, 3];
    perm.shuffle(rng);
    let mut rules: Vec<Rule> = (1..=3).map(|s| Rule::symbol(1, s, perm[s as usize - 1], 2)).collect();
    rules.push(Rule::shift(2, true, 1));
    rules.push(Rule::symbol(1, 0, rng.gen_range(0..4), 3));
    Tm { rules, start: 1, finish: 3 }
}

#[test]
fn random_sweeps() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..5 {
        let tm = sweep(&mut rng);
        assert!(check_rtm(&tm).is_empty());
        let tape: Vec<i32> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(1..4)).collect();
        agree(&tm, &tape);
    }
}

#[test]
fn simulator_leaves_only_result_fields() {
    let c = check_source(&rtm_program_source(&unary_increment(), &[1, 1])).unwrap();
    let run = run_program(&c.model, &RunOptions::default()).unwrap();
    let mut fresh = Store::new();
    let (class, _) = c.model.find_main().unwrap();
    Interpreter::new(&c.model).instantiate(&mut fresh, class);
    assert_eq!(run.store.domain(), fresh.domain());
}

#[test]
fn rejected_rule_sets_are_not_run() {
    let tm = Tm { rules: vec![Rule::symbol(1, 1, 2, 2), Rule::symbol(1, 1, 3, 2)], start: 1, finish: 2 };
    assert!(matches!(run_rtm_program(&tm, &[1]), Err(RtmRunError::Rules(_))));
}

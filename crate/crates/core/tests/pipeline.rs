use progloop_core::closure::{closure, uc, FormulaSet};
use progloop_core::etr::{self, SatOptions, SatOutcome};
use progloop_core::formula::{classify, parse_formula, Fragment};
use progloop_core::measure::measure;
use progloop_core::modelcheck::Checker;
use progloop_core::progress::{compress_model, search_loop_l2, verify_loop, SearchLimits, SearchMode};
use progloop_core::rational::{int, ratio};
use progloop_core::{MarkovChain, StateFormula};

const PSI: &str = "G=1[F>=0.5[a & F>=0.2[!a]] | a] & F=1[G=1[a]] & !a";

fn running_chain() -> MarkovChain {
    MarkovChain::builder()
        .state("s", Vec::<&str>::new())
        .state("t", ["a"])
        .state("u", ["a"])
        .edge("s", "t", int(1))
        .edge("t", "s", ratio(3, 5))
        .edge("t", "u", ratio(2, 5))
        .edge("u", "u", int(1))
        .build()
        .unwrap()
}

fn psi() -> StateFormula {
    parse_formula(PSI).unwrap()
}

#[test]
fn running_example_end_to_end() {
    let m = running_chain();
    let c = Checker::new(&m);
    let x: FormulaSet = [psi()].into_iter().collect();
    let cl = closure(&c, 0, &x).unwrap();
    let ucx = uc(&c, 0, &x).unwrap();
    assert_eq!(cl, ucx);
    assert_eq!(measure(&c, 0, &ucx), 7);
    let l = search_loop_l2(&c, 0, &ucx).unwrap();
    assert_eq!(verify_loop(&c, 0, &ucx, &l), Ok(()));
    assert!(measure(&c, 0, &l.delta()) <= 7);

    for mode in [SearchMode::L2, SearchMode::Generic(SearchLimits::default())] {
        let out = compress_model(&m, 0, &psi(), mode).unwrap();
        assert!(Checker::new(&out.chain).holds(out.entry, &psi()));
        assert!(out.chain.len() <= 5);
    }
}

#[test]
fn fragments_of_the_running_example() {
    let f = classify(&psi());
    assert!(f.contains(Fragment::L2) && f.contains(Fragment::L3));
    assert!(!f.contains(Fragment::L1));
}

#[test]
fn bounded_sat_agrees_with_compression() {
    // a model of psi exists with 3 states, and the probe finds one
    let r = etr::solve_bounded_sat(&psi(), 3, None, SatOptions::default()).unwrap();
    let SatOutcome::Model { chain, entry, .. } = r.outcome else { panic!("{:?}", r.outcome) };
    assert!(Checker::new(&chain).holds(entry, &psi()));
    // psi needs an all-a bottom component besides the a-state that returns,
    // so two states are too few
    let r = etr::solve_bounded_sat(&psi(), 2, None, SatOptions::default()).unwrap();
    assert!(!matches!(r.outcome, SatOutcome::Model { .. }));
}

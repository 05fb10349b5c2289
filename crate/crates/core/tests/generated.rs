mod common;

use proptest::prelude::*;
use tristack_core::mapping::parse_isa;
use tristack_core::uarchax::observable_outcomes;
use tristack_core::{
    compile_test, eval_hll, load_report, parse_litmus, render_isa, render_litmus, LitmusTest, MappingId, ModelConfig,
};

#[derive(Clone, Debug)]
enum Ev {
    Ld { loc: usize, ord: usize },
    St { loc: usize, val: usize, ord: usize },
}

const LOCS: [&str; 2] = ["x", "y"];
const LOAD_ORDERS: [&str; 3] = ["rlx", "acq", "sc"];
const STORE_ORDERS: [&str; 3] = ["rlx", "rel", "sc"];

fn ev() -> impl Strategy<Value = Ev> {
    prop_oneof![
        (0..2usize, 0..3usize).prop_map(|(loc, ord)| Ev::Ld { loc, ord }),
        (0..2usize, 0..5usize, 0..3usize).prop_map(|(loc, val, ord)| Ev::St { loc, val, ord }),
    ]
}

fn program(max_threads: usize, max_events: usize) -> impl Strategy<Value = (Vec<Vec<Ev>>, Vec<usize>)> {
    (prop::collection::vec(prop::collection::vec(ev(), 1..=max_events), 1..=max_threads), prop::collection::vec(0..3usize, 4))
}

/// Store values 0..3 are integers, 4 stores the address of the other location.
fn text(threads: &[Vec<Ev>], picks: &[usize], all_sc: bool) -> String {
    let mut s = String::from("test gen\nlocations x=0 y=0\n");
    let mut reg = 0;
    let mut dests = Vec::new();
    for (t, evs) in threads.iter().enumerate() {
        let body: Vec<String> = evs
            .iter()
            .map(|e| match *e {
                Ev::Ld { loc, ord } => {
                    let r = format!("r{reg}");
                    reg += 1;
                    dests.push(r.clone());
                    format!("{r} = ld({}, {})", LOCS[loc], if all_sc { "sc" } else { LOAD_ORDERS[ord] })
                }
                Ev::St { loc, val, ord } => {
                    let v = if val == 4 { LOCS[1 - loc].to_string() } else { val.to_string() };
                    format!("st({}, {v}, {})", LOCS[loc], if all_sc { "sc" } else { STORE_ORDERS[ord] })
                }
            })
            .collect();
        s.push_str(&format!("thread T{t} {{ {} }}\n", body.join("; ")));
    }
    let atoms: Vec<String> = dests.iter().zip(picks).map(|(r, v)| format!("{r}={v}")).collect();
    if !atoms.is_empty() {
        s.push_str(&format!("exists ({})\n", atoms.join(" /\\ ")));
    }
    s
}

fn test_of(threads: &[Vec<Ev>], picks: &[usize], all_sc: bool) -> LitmusTest {
    let src = text(threads, picks, all_sc);
    parse_litmus(&src).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn litmus_round_trip((threads, picks) in program(3, 3)) {
        let t = test_of(&threads, &picks, false);
        prop_assert_eq!(parse_litmus(&render_litmus(&t)).unwrap(), t);
    }

    #[test]
    fn isa_round_trip((threads, picks) in program(3, 3), m in 0..4usize) {
        let t = test_of(&threads, &picks, false);
        let p = compile_test(&t, MappingId::RISCV[m]).unwrap();
        prop_assert_eq!(parse_isa(&render_isa(&p)).unwrap(), p);
    }

    #[test]
    fn all_sc_matches_interleavings((threads, picks) in program(3, 2)) {
        let t = test_of(&threads, &picks, true);
        prop_assert_eq!(eval_hll(&t).unwrap().outcomes, common::hll_sc_outcomes(&t));
    }

    #[test]
    fn all_rlx_matches_coherence((threads, picks) in program(2, 3)) {
        let mut threads = threads;
        for e in threads.iter_mut().flatten() {
            match e {
                Ev::Ld { ord, .. } | Ev::St { ord, .. } => *ord = 0,
            }
        }
        let t = test_of(&threads, &picks, false);
        prop_assert_eq!(eval_hll(&t).unwrap().outcomes, common::hll_coherence_outcomes(&t));
    }

    #[test]
    fn strict_isa_matches_interleavings((threads, picks) in program(3, 2), m in 0..4usize) {
        let t = test_of(&threads, &picks, false);
        let p = compile_test(&t, MappingId::RISCV[m]).unwrap();
        prop_assert_eq!(observable_outcomes(&p, &ModelConfig::strict("sc")).unwrap(), common::isa_sc_outcomes(&p));
    }
}

#[test]
fn empty_report_loads() {
    assert!(load_report("[]").unwrap().is_empty());
}

use proptest::prelude::*;

use cosetgraph::presentations::Presentation;
use cosetgraph::schreier::{intersect_cores, schreier_ball, stallings_core, CoreGraph};
use cosetgraph::{Letter, MarkedAlphabet, Word};

fn word(rank: usize, max_len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(0..2 * rank, 0..=max_len)
        .prop_map(|v| Word::from_letters(v.into_iter().map(Letter::from_index).collect()))
}

fn subgroup(max_gens: usize, max_len: usize) -> impl Strategy<Value = Vec<Word>> {
    prop::collection::vec(word(2, max_len), 0..=max_gens)
}

/// Reduced loop at the base: the reduced word of a random product of generators.
fn element(gens: &[Word], picks: &[(usize, bool)]) -> Word {
    let mut w = Word::empty();
    if gens.is_empty() {
        return w;
    }
    for &(i, inv) in picks {
        let g = &gens[i % gens.len()];
        w = w.mul(&if inv { g.inverse() } else { g.clone() });
    }
    w
}

proptest! {
    #[test]
    fn free_reduction_is_idempotent_and_leaves_no_cancellation(w in word(3, 24)) {
        let r = w.free_reduce();
        prop_assert_eq!(r.free_reduce(), r.clone());
        prop_assert!(r.len() <= w.len());
        prop_assert!(r.letters().windows(2).all(|p| p[0] != p[1].inverse()));
        prop_assert_eq!(r.len() % 2, w.len() % 2);
    }

    #[test]
    fn cyclic_reduction_conjugates_back(w in word(2, 20)) {
        let (core, u) = w.cyclic_reduce();
        prop_assert!(core.is_cyclically_reduced());
        prop_assert_eq!(u.concat(&core).concat(&u.inverse()).free_reduce(), w.free_reduce());
    }

    #[test]
    fn loop_language_is_a_subgroup(
        gens in subgroup(3, 5),
        p in prop::collection::vec((0usize..3, any::<bool>()), 0..6),
        q in prop::collection::vec((0usize..3, any::<bool>()), 0..6),
    ) {
        let a = MarkedAlphabet::standard(2);
        let core = stallings_core(&a, &gens);
        core.check_invariants().unwrap();
        let (u, v) = (element(&gens, &p), element(&gens, &q));
        prop_assert!(core.membership(&u));
        prop_assert!(core.membership(&v));
        prop_assert!(core.membership(&u.inverse()));
        prop_assert!(core.membership(&u.mul(&v)));
        prop_assert!(core.membership(&v.inverse().mul(&u)));
    }

    #[test]
    fn schreier_balls_are_stable_under_extension(gens in subgroup(2, 4), r in 1usize..6) {
        let a = MarkedAlphabet::standard(2);
        let host = Presentation::free(a.clone());
        let small = schreier_ball(&host, &gens, r).unwrap().ball;
        let large = schreier_ball(&host, &gens, r + 1).unwrap().ball;
        small.check_invariants().unwrap();
        prop_assert_eq!(&large.sphere_sizes()[..r], &small.sphere_sizes()[..r]);
        for v in 0..small.vertex_count() {
            if small.depth(v) >= r {
                continue;
            }
            let lv = large.find(small.rep(v)).expect("inner vertex persists");
            prop_assert_eq!(large.rep(lv), small.rep(v));
            let mut filled = 0;
            for x in a.letters() {
                let s = small.target(v, x).map(|t| small.rep(t).clone());
                let l = large.target(lv, x).map(|t| large.rep(t).clone());
                prop_assert_eq!(&s, &l);
                filled += s.is_some() as usize;
            }
            prop_assert_eq!(filled, 4);
        }
    }
}

fn accepted_upto(a: &MarkedAlphabet, core: &CoreGraph, n: usize) -> Vec<Vec<Letter>> {
    let mut out = Vec::new();
    for len in 0..=n {
        a.for_each_reduced_word(len, |w| {
            if core.accepts_reduced(w) {
                out.push(w.to_vec());
            }
        });
    }
    out
}

#[test]
fn intersection_language_is_contained_in_both() {
    let a = MarkedAlphabet::standard(2);
    let cases: &[(&[&str], &[&str])] = &[
        (&["a", "b b"], &["a a", "b"]),
        (&["a b", "b a"], &["a a", "b b"]),
        (&["a b a' b'"], &["a", "b a b'"]),
        (&["a a a", "b"], &["a a", "b a b'"]),
    ];
    for (h, f) in cases {
        let parse = |ws: &[&str]| -> Vec<Word> { ws.iter().map(|w| a.parse_word(w).unwrap()).collect() };
        let (ch, cf) = (stallings_core(&a, &parse(h)), stallings_core(&a, &parse(f)));
        let meet = intersect_cores(&ch, &cf);
        let inside = accepted_upto(&a, &meet, 10);
        assert!(!inside.is_empty());
        for w in &inside {
            assert!(ch.accepts_reduced(w) && cf.accepts_reduced(w), "{h:?} {f:?} {w:?}");
        }
        // and conversely the length-10 members of both are in the intersection
        let both = accepted_upto(&a, &ch, 10)
            .into_iter()
            .filter(|w| cf.accepts_reduced(w))
            .count();
        assert_eq!(both, inside.len(), "{h:?} {f:?}");
    }
}

#[test]
fn reduced_word_counts_follow_the_tree_formula() {
    for k in 1..=3usize {
        let a = MarkedAlphabet::standard(k);
        for n in 1..=7u32 {
            let expect = 2 * k as u128 * (2 * k as u128 - 1).pow(n - 1);
            assert_eq!(a.enumerate_reduced_words(n as usize).count() as u128, expect);
            assert_eq!(a.reduced_word_count(n as usize), expect);
        }
    }
}

#[test]
fn free_cayley_balls_are_trees() {
    for k in 1..=3 {
        let p = Presentation::free(MarkedAlphabet::standard(k));
        for r in 0..=5 {
            let b = p.cayley_ball(r).unwrap();
            b.check_invariants().unwrap();
            assert_eq!(b.edge_count() + 1, b.vertex_count());
        }
    }
}

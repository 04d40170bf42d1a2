//! The greedy word problem solver against a search over every order of
//! relator-half replacements, on all reduced surface-group words of length
//! at most eight.

use std::collections::HashSet;

use rayon::prelude::*;

use cosetgraph::report::HostSpec;
use cosetgraph::{Letter, Word};

fn symmetrize(r: &Word) -> Vec<Vec<Letter>> {
    let mut out = Vec::new();
    for w in [r.clone(), r.inverse()] {
        for s in 0..w.len() {
            let v = w.rotate(s).into_letters();
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

fn reduce(w: &[Letter]) -> Vec<Letter> {
    let mut s: Vec<Letter> = Vec::with_capacity(w.len());
    for &x in w {
        if s.last() == Some(&x.inverse()) {
            s.pop();
        } else {
            s.push(x);
        }
    }
    s
}

/// Some sequence of "more than half a relator becomes the inverse of the
/// rest" rewrites, in any order and at any position, reaches the empty word.
fn reaches_empty(w: Vec<Letter>, rels: &[Vec<Letter>], seen: &mut HashSet<Vec<Letter>>) -> bool {
    if w.is_empty() {
        return true;
    }
    if !seen.insert(w.clone()) {
        return false;
    }
    for r in rels {
        let n = r.len();
        for len in n / 2 + 1..=n.min(w.len()) {
            for i in 0..=w.len() - len {
                if w[i..i + len] == r[..len] {
                    let mut next = w[..i].to_vec();
                    next.extend(r[len..].iter().rev().map(|x| x.inverse()));
                    next.extend_from_slice(&w[i + len..]);
                    if reaches_empty(reduce(&next), rels, seen) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

#[test]
fn greedy_reduction_matches_exhaustive_rewriting_up_to_length_eight() {
    let host = HostSpec::surface(2).build().unwrap();
    let rels = symmetrize(&host.relators()[0]);
    let a = host.alphabet().clone();
    let firsts: Vec<Letter> = a.letters().collect();
    let (checked, trivial) = (0..=8usize)
        .into_par_iter()
        .flat_map(|n| firsts.par_iter().map(move |&x| (n, x)))
        .map(|(n, x)| {
            let mut checked = 0u64;
            let mut trivial = 0u64;
            let mut visit = |w: &[Letter]| {
                let word = Word::from_letters(w.to_vec());
                let greedy = host.is_trivial(&word);
                let search = reaches_empty(w.to_vec(), &rels, &mut HashSet::new());
                assert_eq!(greedy, search, "{}", a.format_word(&word));
                checked += 1;
                trivial += greedy as u64;
            };
            if n == 0 {
                if x == firsts[0] {
                    visit(&[]);
                }
                return (checked, trivial);
            }
            a.for_each_reduced_word(n - 1, |tail| {
                if tail.first() != Some(&x.inverse()) {
                    let mut w = vec![x];
                    w.extend_from_slice(tail);
                    visit(&w);
                }
            });
            (checked, trivial)
        })
        .reduce(|| (0, 0), |p, q| (p.0 + q.0, p.1 + q.1));
    let expected: u64 = 1 + (1..=8).map(|n| 8 * 7u64.pow(n - 1)).sum::<u64>();
    assert_eq!(checked, expected);
    // the empty word and the 16 cyclic conjugates of the relator and its inverse
    assert_eq!(trivial, 17);
}

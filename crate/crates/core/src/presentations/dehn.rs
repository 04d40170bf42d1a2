use crate::words::{Letter, Word};

/// Pluggable word-problem oracle.
pub trait WordOracle {
    /// A shortened representative of the same element.
    fn reduce(&self, w: &Word) -> Word;

    fn is_trivial(&self, w: &Word) -> bool {
        self.reduce(w).is_empty()
    }
}

/// Free reduction: the word problem in a free group.
#[derive(Clone, Copy, Debug, Default)]
pub struct FreeReduction;

impl WordOracle for FreeReduction {
    fn reduce(&self, w: &Word) -> Word {
        w.free_reduce()
    }
}

/// Dehn's algorithm over the symmetrized relator set.
///
/// Repeatedly free-reduces and replaces the leftmost, longest subword that is
/// more than half of a cyclic relator conjugate `u·v` (with `|u| > |r|/2`) by
/// the shorter complement `v⁻¹`. Sound and complete for C'(1/6) presentations.
#[derive(Clone, Debug)]
pub struct DehnReducer {
    cyclic: Vec<Word>,
    by_first: Vec<Vec<usize>>,
}

impl DehnReducer {
    pub fn new(degree: usize, relators: &[Word]) -> DehnReducer {
        let cyclic = symmetrized(relators);
        let mut by_first = vec![Vec::new(); degree];
        for (i, r) in cyclic.iter().enumerate() {
            if let Some(f) = r.first() {
                by_first[f.index()].push(i);
            }
        }
        DehnReducer { cyclic, by_first }
    }

    /// All cyclic permutations of each relator and its inverse, indexed by
    /// (relator, orientation, shift); equal words at different indices are kept.
    pub fn symmetrized(&self) -> &[Word] {
        &self.cyclic
    }

    /// One Dehn step: the position, length and relator index of the leftmost,
    /// longest replaceable subword.
    fn find_step(&self, cur: &[Letter]) -> Option<(usize, usize, usize)> {
        for i in 0..cur.len() {
            let mut best: Option<(usize, usize)> = None;
            for &idx in &self.by_first[cur[i].index()] {
                let r = self.cyclic[idx].letters();
                let l = common_prefix(&cur[i..], r);
                if 2 * l > r.len() && best.is_none_or(|(bl, _)| l > bl) {
                    best = Some((l, idx));
                }
            }
            if let Some((l, idx)) = best {
                return Some((i, l, idx));
            }
        }
        None
    }
}

impl WordOracle for DehnReducer {
    fn reduce(&self, w: &Word) -> Word {
        let mut cur = w.free_reduce();
        while let Some((i, l, idx)) = self.find_step(cur.letters()) {
            let r = self.cyclic[idx].letters();
            let s = cur.letters();
            let mut next = Word::from_letters(s[..i].to_vec());
            for &x in r[l..].iter().rev() {
                next.push_reduced(x.inverse());
            }
            for &x in &s[i + l..] {
                next.push_reduced(x);
            }
            cur = next;
        }
        cur
    }
}

pub(crate) fn symmetrized(relators: &[Word]) -> Vec<Word> {
    let mut out = Vec::new();
    for r in relators {
        let inv = r.inverse();
        for s in 0..r.len() {
            out.push(r.rotate(s));
        }
        for s in 0..inv.len() {
            out.push(inv.rotate(s));
        }
    }
    out
}

pub(crate) fn common_prefix(a: &[Letter], b: &[Letter]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

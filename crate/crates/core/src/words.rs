//! Marked alphabets, words with formal inverses, and free / cyclic reduction.
//!
//! Letters are interned as small integers: generator `i` is `2i` and its
//! formal inverse is `2i + 1`, so inversion is `x ^ 1`. The canonical letter
//! order is the interned order `a < a' < b < b' < ...`; words compare in
//! shortlex order (length first, then lexicographically in that order).

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Letter(u16);

impl Letter {
    pub fn positive(generator: usize) -> Letter {
        Letter((generator * 2) as u16)
    }

    pub fn from_index(index: usize) -> Letter {
        Letter(index as u16)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn inverse(self) -> Letter {
        Letter(self.0 ^ 1)
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    /// The generator this letter or its inverse names.
    #[inline]
    pub fn generator(self) -> usize {
        (self.0 >> 1) as usize
    }

    /// +1 for a positive letter, -1 for an inverse letter.
    #[inline]
    pub fn sign(self) -> i64 {
        if self.is_positive() {
            1
        } else {
            -1
        }
    }
}

/// A finite word over the letters of some marked alphabet.
#[derive(Clone, PartialEq, Eq, Hash, Default, Debug, Serialize, Deserialize)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Word {
        Word(Vec::new())
    }

    pub fn from_letters(letters: Vec<Letter>) -> Word {
        Word(letters)
    }

    pub fn single(letter: Letter) -> Word {
        Word(vec![letter])
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn into_letters(self) -> Vec<Letter> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<Letter> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<Letter> {
        self.0.last().copied()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    /// Concatenation followed by free reduction.
    pub fn mul(&self, other: &Word) -> Word {
        let mut out = self.clone();
        out.push_reduced_all(other.letters());
        out
    }

    /// Plain concatenation, no reduction.
    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Appends `letter`, cancelling against the last letter when they are inverse.
    pub fn push_reduced(&mut self, letter: Letter) {
        if self.0.last() == Some(&letter.inverse()) {
            self.0.pop();
        } else {
            self.0.push(letter);
        }
    }

    fn push_reduced_all(&mut self, letters: &[Letter]) {
        for &l in letters {
            self.push_reduced(l);
        }
    }

    pub fn push(&mut self, letter: Letter) {
        self.0.push(letter);
    }

    pub fn free_reduce(&self) -> Word {
        let mut out = Word(Vec::with_capacity(self.len()));
        out.push_reduced_all(&self.0);
        out
    }

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|w| w[1] != w[0].inverse())
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        self.is_reduced()
            && match (self.first(), self.last()) {
                (Some(f), Some(l)) => self.len() == 1 || f != l.inverse(),
                _ => true,
            }
    }

    /// Splits a reduced word as `conjugator · core · conjugator⁻¹` with `core`
    /// cyclically reduced.
    pub fn cyclic_reduce(&self) -> (Word, Word) {
        let w = self.free_reduce();
        let s = w.letters();
        let mut lo = 0;
        let mut hi = s.len();
        while hi - lo >= 2 && s[lo] == s[hi - 1].inverse() {
            lo += 1;
            hi -= 1;
        }
        (Word(s[lo..hi].to_vec()), Word(s[..lo].to_vec()))
    }

    /// `self^n` freely reduced; negative exponents use the inverse.
    pub fn pow(&self, n: i64) -> Word {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut out = Word::empty();
        for _ in 0..n.unsigned_abs() {
            out.push_reduced_all(base.letters());
        }
        out
    }

    /// The cyclic permutation starting at position `shift`.
    pub fn rotate(&self, shift: usize) -> Word {
        if self.is_empty() {
            return Word::empty();
        }
        let s = shift % self.len();
        let mut v = self.0[s..].to_vec();
        v.extend_from_slice(&self.0[..s]);
        Word(v)
    }

    /// Exponent sum of each of the `rank` generators.
    pub fn exponent_sums(&self, rank: usize) -> Vec<i64> {
        let mut out = vec![0i64; rank];
        for l in &self.0 {
            out[l.generator()] += l.sign();
        }
        out
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Named generators with formal inverses.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct MarkedAlphabet {
    names: Vec<String>,
}

impl MarkedAlphabet {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<MarkedAlphabet> {
        if names.is_empty() {
            return Err(Error::Malformed("alphabet needs at least one letter".into()));
        }
        let mut out: Vec<String> = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            if !valid_name(n) {
                return Err(Error::Malformed(format!("invalid letter name `{n}`")));
            }
            if out.iter().any(|m| m == n) {
                return Err(Error::Malformed(format!("duplicate letter `{n}`")));
            }
            out.push(n.to_string());
        }
        if out.len() > (u16::MAX as usize) / 2 {
            return Err(Error::Malformed("alphabet too large".into()));
        }
        Ok(MarkedAlphabet { names: out })
    }

    /// `a, b, c, ...` with `k` letters; falls back to `x0, x1, ...` past 26.
    pub fn standard(k: usize) -> MarkedAlphabet {
        let names: Vec<String> = if k <= 26 {
            (0..k).map(|i| ((b'a' + i as u8) as char).to_string()).collect()
        } else {
            (0..k).map(|i| format!("x{i}")).collect()
        };
        MarkedAlphabet { names }
    }

    /// Number of positive letters.
    pub fn rank(&self) -> usize {
        self.names.len()
    }

    /// Number of letters including inverses (the graph degree).
    pub fn degree(&self) -> usize {
        2 * self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> {
        (0..self.degree()).map(Letter::from_index)
    }

    pub fn positive_letters(&self) -> impl Iterator<Item = Letter> {
        (0..self.rank()).map(Letter::positive)
    }

    pub fn letter(&self, name: &str) -> Option<Letter> {
        self.names.iter().position(|n| n == name).map(Letter::positive)
    }

    pub fn letter_name(&self, l: Letter) -> String {
        let base = &self.names[l.generator()];
        if l.is_positive() {
            base.clone()
        } else {
            format!("{base}'")
        }
    }

    pub fn check_word(&self, w: &Word) -> Result<()> {
        match w.letters().iter().find(|l| l.index() >= self.degree()) {
            Some(l) => Err(Error::Malformed(format!(
                "letter index {} outside alphabet of {} letters",
                l.index(),
                self.degree()
            ))),
            None => Ok(()),
        }
    }

    /// Free reduction with an alphabet membership check.
    pub fn free_reduce(&self, w: &Word) -> Result<Word> {
        self.check_word(w)?;
        Ok(w.free_reduce())
    }

    /// Parses the apostrophe form, e.g. `a b a' b'`. `1` or an empty string is
    /// the empty word.
    pub fn parse_word(&self, text: &str) -> Result<Word> {
        self.parse_word_at(text).map_err(|(col, msg)| {
            Error::Malformed(format!("{msg} (column {col})"))
        })
    }

    /// Like [`parse_word`](Self::parse_word) but reports the 1-based column
    /// of the offending token.
    pub(crate) fn parse_word_at(&self, text: &str) -> std::result::Result<Word, (usize, String)> {
        let mut letters = Vec::new();
        let trimmed = text.trim();
        if trimmed.is_empty() || trimmed == "1" {
            return Ok(Word::empty());
        }
        for (col, token) in tokens(text) {
            let (name, inverse) = match token.strip_suffix('\'') {
                Some(n) => (n, true),
                None => (token, false),
            };
            match self.letter(name) {
                Some(l) if !name.contains('\'') => {
                    letters.push(if inverse { l.inverse() } else { l })
                }
                _ => return Err((col, format!("unknown letter `{token}`"))),
            }
        }
        Ok(Word(letters))
    }

    pub fn format_word(&self, w: &Word) -> String {
        if w.is_empty() {
            return "1".to_string();
        }
        w.letters()
            .iter()
            .map(|&l| self.letter_name(l))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Number of reduced words of length `n`: `2k(2k-1)^(n-1)`, or 1 for `n = 0`.
    pub fn reduced_word_count(&self, n: usize) -> u128 {
        if n == 0 {
            return 1;
        }
        let d = self.degree() as u128;
        d * (d - 1).pow(n as u32 - 1)
    }

    /// All reduced words of length `n` in lexicographic order.
    pub fn enumerate_reduced_words(&self, n: usize) -> ReducedWords {
        ReducedWords::new(self.degree(), n)
    }

    /// Visits every reduced word of length `n` in lexicographic order without
    /// allocating a `Word` per visit.
    pub fn for_each_reduced_word<F: FnMut(&[Letter])>(&self, n: usize, mut f: F) {
        let d = self.degree();
        let mut buf = Vec::with_capacity(n);
        fn rec<F: FnMut(&[Letter])>(d: usize, n: usize, buf: &mut Vec<Letter>, f: &mut F) {
            if buf.len() == n {
                f(buf);
                return;
            }
            for i in 0..d {
                let l = Letter::from_index(i);
                if buf.last() == Some(&l.inverse()) {
                    continue;
                }
                buf.push(l);
                rec(d, n, buf, f);
                buf.pop();
            }
        }
        rec(d, n, &mut buf, &mut f);
    }

    /// Cyclically reduced words of length `n` in lexicographic order.
    pub fn cyclically_reduced_words(&self, n: usize) -> impl Iterator<Item = Word> {
        self.enumerate_reduced_words(n)
            .filter(|w| w.is_cyclically_reduced())
    }
}

fn valid_name(n: &str) -> bool {
    let mut chars = n.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Whitespace-separated tokens with their 1-based columns.
pub(crate) fn tokens(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &text[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &text[s..]));
    }
    out.into_iter()
}

/// Stream of reduced words of a fixed length in lexicographic order.
pub struct ReducedWords {
    degree: usize,
    current: Option<Vec<Letter>>,
}

impl ReducedWords {
    fn new(degree: usize, n: usize) -> ReducedWords {
        let mut first = Vec::with_capacity(n);
        for _ in 0..n {
            let l = smallest_after(degree, first.last().copied(), 0);
            first.push(l.expect("degree >= 2 always admits a next letter"));
        }
        ReducedWords {
            degree,
            current: Some(first),
        }
    }
}

fn smallest_after(degree: usize, prev: Option<Letter>, from: usize) -> Option<Letter> {
    (from..degree)
        .map(Letter::from_index)
        .find(|&l| prev != Some(l.inverse()))
}

impl Iterator for ReducedWords {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        let cur = self.current.take()?;
        let out = Word(cur.clone());
        let mut next = cur;
        let n = next.len();
        let mut i = n;
        loop {
            if i == 0 {
                // exhausted
                return Some(out);
            }
            i -= 1;
            let prev = if i == 0 { None } else { Some(next[i - 1]) };
            if let Some(l) = smallest_after(self.degree, prev, next[i].index() + 1) {
                next[i] = l;
                for j in i + 1..n {
                    next[j] = smallest_after(self.degree, Some(next[j - 1]), 0).unwrap();
                }
                self.current = Some(next);
                return Some(out);
            }
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}{}", self.generator(), if self.is_positive() { "" } else { "'" })
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "1");
        }
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> MarkedAlphabet {
        MarkedAlphabet::standard(2)
    }

    fn w(s: &str) -> Word {
        f2().parse_word(s).unwrap()
    }

    #[test]
    fn free_reduce_examples() {
        assert_eq!(w("a b b' a").free_reduce(), w("a a"));
        assert_eq!(w("a a'").free_reduce(), Word::empty());
        let r = w("a b a' b'");
        assert_eq!(r.free_reduce(), r);
    }

    #[test]
    fn free_reduce_rejects_foreign_letters() {
        let bad = Word::from_letters(vec![Letter::from_index(7)]);
        assert!(matches!(f2().free_reduce(&bad), Err(Error::Malformed(_))));
    }

    #[test]
    fn cyclic_reduce_examples() {
        let (core, conj) = w("b' a b").cyclic_reduce();
        assert_eq!(core, w("a"));
        assert_eq!(conj, w("b'"));

        let (core, conj) = w("a b").cyclic_reduce();
        assert_eq!(core, w("a b"));
        assert!(conj.is_empty());

        let input = w("b' a' b a b' a b");
        let (core, conj) = input.cyclic_reduce();
        assert!(core.is_cyclically_reduced());
        // freely equal to the input after conjugating back
        assert_eq!(conj.concat(&core).concat(&conj.inverse()).free_reduce(), input);
        assert_eq!(core, w("a"));
        assert_eq!(conj, w("b' a' b"));
    }

    #[test]
    fn cyclic_reduce_of_identity_is_empty() {
        let (core, _) = w("a b b' a'").cyclic_reduce();
        assert!(core.is_empty());
    }

    #[test]
    fn enumeration_counts() {
        let a = f2();
        assert_eq!(a.enumerate_reduced_words(0).count(), 1);
        assert_eq!(a.enumerate_reduced_words(1).count(), 4);
        assert_eq!(a.enumerate_reduced_words(2).count(), 12);
        assert_eq!(a.enumerate_reduced_words(5).count(), 324);
        assert_eq!(a.reduced_word_count(5), 4 * 3u128.pow(4));
    }

    #[test]
    fn enumeration_is_sorted_and_reduced() {
        let a = f2();
        let words: Vec<Word> = a.enumerate_reduced_words(4).collect();
        assert!(words.windows(2).all(|p| p[0] < p[1]));
        assert!(words.iter().all(|x| x.is_reduced() && x.len() == 4));
        let mut visited = Vec::new();
        a.for_each_reduced_word(4, |s| visited.push(Word::from_letters(s.to_vec())));
        assert_eq!(visited, words);
    }

    #[test]
    fn parse_and_format() {
        let a = f2();
        let x = a.parse_word("a b a' b'").unwrap();
        assert_eq!(a.format_word(&x), "a b a' b'");
        assert_eq!(a.parse_word("1").unwrap(), Word::empty());
        assert!(a.parse_word("abA B").is_err());
        assert!(a.parse_word("a''").is_err());
        assert!(a.parse_word("c").is_err());
        assert_eq!(a.format_word(&Word::empty()), "1");
    }

    #[test]
    fn shortlex_order() {
        assert!(w("b") < w("a a"));
        assert!(w("a") < w("a'"));
        assert!(w("a'") < w("b"));
        assert!(w("a b") < w("a b'"));
    }

    #[test]
    fn alphabet_validation() {
        assert!(MarkedAlphabet::new::<&str>(&[]).is_err());
        assert!(MarkedAlphabet::new(&["a", "a"]).is_err());
        assert!(MarkedAlphabet::new(&["a'"]).is_err());
        assert!(MarkedAlphabet::new(&["x1", "x2"]).is_ok());
    }

    #[test]
    fn power_and_rotation() {
        assert_eq!(w("a b").pow(2), w("a b a b"));
        assert_eq!(w("a b").pow(-1), w("b' a'"));
        assert_eq!(w("a b").pow(0), Word::empty());
        assert_eq!(w("a b b'").rotate(1), w("b b' a"));
        assert_eq!(Word::empty().rotate(3), Word::empty());
    }
}

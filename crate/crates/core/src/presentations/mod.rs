//! Group presentations with a word-problem oracle, and Cayley balls.

mod ball;
mod dehn;
mod invariant;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use ball::{BallDistance, BallGraph};
pub(crate) use ball::{ball_from_states, BallBuilder};
pub use dehn::{DehnReducer, FreeReduction, WordOracle};
pub use invariant::{AbelianInvariant, CommutatorInvariant};

use crate::error::{Error, Result};
use crate::words::{tokens, Letter, MarkedAlphabet, Word};

pub const DEFAULT_VERTEX_BUDGET: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleKind {
    Free,
    SmallCancellation,
}

/// Longest piece found by the small-cancellation check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub piece_len: usize,
    pub relator_len: usize,
    pub piece: Word,
}

impl MetricReport {
    pub fn ratio(&self) -> f64 {
        if self.relator_len == 0 {
            0.0
        } else {
            self.piece_len as f64 / self.relator_len as f64
        }
    }

    /// Strict C'(1/6): `6·|piece| < |r|`.
    pub fn satisfies_c6(&self) -> bool {
        self.relator_len == 0 || 6 * self.piece_len < self.relator_len
    }
}

#[derive(Clone, Debug)]
pub struct Presentation {
    alphabet: MarkedAlphabet,
    relators: Vec<Word>,
    kind: OracleKind,
    dehn: Option<DehnReducer>,
    metric: MetricReport,
}

impl Presentation {
    pub fn free(alphabet: MarkedAlphabet) -> Presentation {
        Presentation {
            alphabet,
            relators: Vec::new(),
            kind: OracleKind::Free,
            dehn: None,
            metric: MetricReport {
                piece_len: 0,
                relator_len: 0,
                piece: Word::empty(),
            },
        }
    }

    /// Relators are cyclically reduced on entry (empty ones dropped); a
    /// nonempty relator set must pass the C'(1/6) gate.
    pub fn new(alphabet: MarkedAlphabet, relators: Vec<Word>) -> Result<Presentation> {
        let mut rs = Vec::new();
        for r in relators {
            alphabet.check_word(&r)?;
            let (core, _) = r.cyclic_reduce();
            if !core.is_empty() {
                rs.push(core);
            }
        }
        if rs.is_empty() {
            return Ok(Presentation::free(alphabet));
        }
        let metric = validate_small_cancellation(&rs);
        if !metric.satisfies_c6() {
            return Err(Error::PresentationRejected {
                piece: alphabet.format_word(&metric.piece),
                ratio: metric.ratio(),
            });
        }
        let dehn = DehnReducer::new(alphabet.degree(), &rs);
        Ok(Presentation {
            alphabet,
            relators: rs,
            kind: OracleKind::SmallCancellation,
            dehn: Some(dehn),
            metric,
        })
    }

    /// Parses the presentation file format:
    ///
    /// ```text
    /// alphabet: a b c d
    /// relator: a b a' b' c d c' d'
    /// ```
    ///
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Presentation> {
        let mut alphabet: Option<MarkedAlphabet> = None;
        let mut relators = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let indent = raw.len() - raw.trim_start().len();
            let Some((key, rest)) = trimmed.split_once(':') else {
                return Err(Error::Parse {
                    line,
                    column: indent + 1,
                    message: "expected `alphabet:` or `relator:`".into(),
                });
            };
            let offset = indent + key.len() + 1;
            match (key.trim(), &alphabet) {
                ("alphabet", None) => {
                    let names: Vec<&str> = tokens(rest).map(|(_, t)| t).collect();
                    let a = MarkedAlphabet::new(&names).map_err(|e| Error::Parse {
                        line,
                        column: offset + 1,
                        message: e.to_string(),
                    })?;
                    alphabet = Some(a);
                }
                ("alphabet", Some(_)) => {
                    return Err(Error::Parse {
                        line,
                        column: indent + 1,
                        message: "alphabet declared twice".into(),
                    })
                }
                ("relator", Some(a)) => {
                    let w = a.parse_word_at(rest).map_err(|(col, message)| Error::Parse {
                        line,
                        column: offset + col,
                        message,
                    })?;
                    relators.push(w);
                }
                ("relator", None) => {
                    return Err(Error::Parse {
                        line,
                        column: indent + 1,
                        message: "relator before alphabet".into(),
                    })
                }
                (other, _) => {
                    return Err(Error::Parse {
                        line,
                        column: indent + 1,
                        message: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        let alphabet = alphabet.ok_or(Error::Parse {
            line: 1,
            column: 1,
            message: "missing `alphabet:` line".into(),
        })?;
        Presentation::new(alphabet, relators)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("alphabet: {}\n", self.alphabet.names().join(" "));
        for r in &self.relators {
            s.push_str(&format!("relator: {}\n", self.alphabet.format_word(r)));
        }
        s
    }

    pub fn alphabet(&self) -> &MarkedAlphabet {
        &self.alphabet
    }

    pub fn relators(&self) -> &[Word] {
        &self.relators
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn is_free(&self) -> bool {
        self.kind == OracleKind::Free
    }

    pub fn metric(&self) -> &MetricReport {
        &self.metric
    }

    pub fn is_trivial(&self, w: &Word) -> bool {
        self.reduce(w).is_empty()
    }

    pub fn equal(&self, u: &Word, v: &Word) -> bool {
        self.is_trivial(&u.concat(&v.inverse()))
    }

    /// Cayley ball of radius `radius` around the identity.
    pub fn cayley_ball(&self, radius: usize) -> Result<BallGraph> {
        self.cayley_ball_with_budget(radius, DEFAULT_VERTEX_BUDGET)
    }

    pub fn cayley_ball_with_budget(&self, radius: usize, budget: usize) -> Result<BallGraph> {
        let degree = self.alphabet.degree();
        match &self.dehn {
            None => Ok(ball_from_states(degree, radius, budget, Word::empty(), |w, x| {
                let mut n = w.clone();
                n.push_reduced(x);
                n
            })?
            .with_convex(true)),
            Some(_) => {
                let rank = self.alphabet.rank();
                let inv = AbelianInvariant::vanishing_on(rank, &self.relators);
                let central = CommutatorInvariant::vanishing_on(rank, &self.relators);
                quotient_ball(
                    degree,
                    radius,
                    budget,
                    |w| self.reduce(w),
                    |w| {
                        let mut k = inv.key(w);
                        if let Some(c) = &central {
                            k.extend(c.key(w));
                        }
                        k
                    },
                    |u, v| self.equal(u, v),
                )
            }
        }
    }
}

impl WordOracle for Presentation {
    fn reduce(&self, w: &Word) -> Word {
        match &self.dehn {
            Some(d) => d.reduce(w),
            None => w.free_reduce(),
        }
    }
}

/// Largest piece over all pairs of distinct entries of the symmetrized
/// relator set; the ratio is taken against the shorter of the two relators.
pub fn validate_small_cancellation(relators: &[Word]) -> MetricReport {
    let sym = dehn::symmetrized(relators);
    let mut best = MetricReport {
        piece_len: 0,
        relator_len: relators.iter().map(Word::len).max().unwrap_or(0),
        piece: Word::empty(),
    };
    for i in 0..sym.len() {
        for j in i + 1..sym.len() {
            let l = dehn::common_prefix(sym[i].letters(), sym[j].letters());
            if l == 0 {
                continue;
            }
            let rl = sym[i].len().min(sym[j].len());
            if l * best.relator_len > best.piece_len * rl {
                best = MetricReport {
                    piece_len: l,
                    relator_len: rl,
                    piece: Word::from_letters(sym[i].letters()[..l].to_vec()),
                };
            }
        }
    }
    if best.piece_len == 0 {
        best.relator_len = relators.iter().map(Word::len).min().unwrap_or(0);
    }
    best
}

/// BFS ball of a group (or coset space) given only an equality test.
///
/// Candidates are first looked up by their `normal` form (equal normal forms
/// must mean equal elements), then through a hash of `key`, which must agree
/// on equal elements; inside a bucket equality is decided by `equal`, and
/// only against vertices whose depth is within one of the candidate's parent.
pub(crate) fn quotient_ball<K, FN, FK, FE>(
    degree: usize,
    radius: usize,
    budget: usize,
    normal: FN,
    key: FK,
    equal: FE,
) -> Result<BallGraph>
where
    K: std::hash::Hash + Eq,
    FN: Fn(&Word) -> Word,
    FK: Fn(&Word) -> K,
    FE: Fn(&Word, &Word) -> bool,
{
    let mut b = BallBuilder::new(degree, radius, budget);
    let mut buckets: HashMap<K, Vec<usize>> = HashMap::new();
    let mut normals: HashMap<Word, usize> = HashMap::new();
    buckets.entry(key(&Word::empty())).or_default().push(0);
    normals.insert(normal(&Word::empty()), 0);
    let mut v = 0;
    while v < b.len() {
        let dv = b.depth(v);
        for x in (0..degree).map(Letter::from_index) {
            if b.target(v, x).is_some() {
                continue;
            }
            let mut cand = b.rep(v).clone();
            cand.push(x);
            let nf = normal(&cand);
            let k = key(&cand);
            let found = normals.get(&nf).copied().or_else(|| {
                buckets.get(&k).and_then(|ids| {
                    ids.iter().copied().find(|&u| {
                        let du = b.depth(u);
                        du + 1 >= dv && du <= dv + 1 && equal(&cand, b.rep(u))
                    })
                })
            });
            match found {
                Some(u) => {
                    normals.entry(nf).or_insert(u);
                    b.link(v, x, u)
                }
                None if dv < radius => {
                    let u = b.add_child(v, x)?;
                    buckets.entry(k).or_default().push(u);
                    normals.insert(nf, u);
                }
                None => {}
            }
        }
        v += 1;
    }
    Ok(b.finish())
}

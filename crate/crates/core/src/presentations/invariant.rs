use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::words::Word;

/// Integer linear functionals on exponent-sum vectors that vanish on a set of
/// words. Words with different values can never be equal modulo the normal
/// closure of those words (or, for coset use, modulo a subgroup containing
/// them), so the value vector is a sound bucketing key.
#[derive(Clone, Debug)]
pub struct AbelianInvariant {
    rank: usize,
    functionals: Vec<Vec<i64>>,
}

impl AbelianInvariant {
    pub fn vanishing_on(rank: usize, words: &[Word]) -> AbelianInvariant {
        let rows: Vec<Vec<Ratio<i64>>> = words
            .iter()
            .map(|w| {
                w.exponent_sums(rank)
                    .into_iter()
                    .map(Ratio::from_integer)
                    .collect()
            })
            .collect();
        AbelianInvariant {
            rank,
            functionals: integer_null_space(rows, rank),
        }
    }

    pub fn key(&self, w: &Word) -> Vec<i64> {
        let e = w.exponent_sums(self.rank);
        self.functionals
            .iter()
            .map(|f| f.iter().zip(&e).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn dimension(&self) -> usize {
        self.functionals.len()
    }
}

/// Finer key for relators that all lie in the commutator subgroup: the image
/// in the free class-two nilpotent group, with coordinates `(v, ω)` where `v`
/// is the exponent-sum vector and `ω ∈ Λ²ℤⁿ` accumulates `v ∧ e` letter by
/// letter. A relator maps to the central element `(0, ω_r)`, so functionals
/// on `ω` vanishing on every `ω_r` give an invariant of the quotient group.
#[derive(Clone, Debug)]
pub struct CommutatorInvariant {
    rank: usize,
    functionals: Vec<Vec<i64>>,
}

impl CommutatorInvariant {
    /// `None` unless every word has zero exponent sums.
    pub fn vanishing_on(rank: usize, words: &[Word]) -> Option<CommutatorInvariant> {
        if words.iter().any(|w| w.exponent_sums(rank).iter().any(|&e| e != 0)) {
            return None;
        }
        let rows: Vec<Vec<Ratio<i64>>> = words
            .iter()
            .map(|w| wedge(rank, w).into_iter().map(Ratio::from_integer).collect())
            .collect();
        let cols = rank * rank.saturating_sub(1) / 2;
        Some(CommutatorInvariant {
            rank,
            functionals: integer_null_space(rows, cols),
        })
    }

    pub fn key(&self, w: &Word) -> Vec<i64> {
        let om = wedge(self.rank, w);
        self.functionals
            .iter()
            .map(|f| f.iter().zip(&om).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// The `ω` coordinate of `w`, indexed by pairs `i < j` in lexicographic order.
fn wedge(rank: usize, w: &Word) -> Vec<i64> {
    let mut v = vec![0i64; rank];
    let mut om = vec![0i64; rank * rank.saturating_sub(1) / 2];
    let idx = |i: usize, j: usize| i * (2 * rank - i - 1) / 2 + (j - i - 1);
    for l in w.letters() {
        let (g, s) = (l.generator(), l.sign());
        for (i, &vi) in v.iter().enumerate() {
            // v ∧ (s·e_g)
            if vi != 0 && i != g {
                if i < g {
                    om[idx(i, g)] += vi * s;
                } else {
                    om[idx(g, i)] -= vi * s;
                }
            }
        }
        v[g] += s;
    }
    om
}

/// Integer basis of `{ φ : row·φ = 0 for every row }`.
fn integer_null_space(mut rows: Vec<Vec<Ratio<i64>>>, cols: usize) -> Vec<Vec<i64>> {
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let lead = rows[r][c];
        for x in rows[r].iter_mut() {
            *x /= lead;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c];
                for j in 0..cols {
                    let v = rows[r][j];
                    rows[i][j] -= f * v;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    let mut basis = Vec::new();
    for free in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![Ratio::<i64>::zero(); cols];
        v[free] = Ratio::one();
        for (i, &pc) in pivots.iter().enumerate() {
            v[pc] = -rows[i][free];
        }
        let lcm = v
            .iter()
            .fold(1i64, |acc, x| num_integer_lcm(acc, *x.denom()));
        basis.push(
            v.iter()
                .map(|x| (x * Ratio::from_integer(lcm)).to_integer())
                .collect::<Vec<i64>>(),
        );
    }
    for b in &mut basis {
        let g = b.iter().fold(0i64, |acc, x| gcd(acc, x.abs()));
        if g > 1 {
            for x in b.iter_mut() {
                *x /= g;
            }
        }
    }
    basis
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn num_integer_lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

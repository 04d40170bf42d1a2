//! Closed-path counts, cogrowth rates and the cogrowth formula.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amenability::{estimate_rho, return_probabilities, ReturnSeries, WalkModel};
use crate::error::{Error, Result};
use crate::schreier::{CoreGraph, IndexInfo};
use crate::words::{Letter, MarkedAlphabet};

#[derive(Clone, Debug, PartialEq)]
pub struct CogrowthSeries {
    pub n_max: usize,
    /// Closed non-backtracking paths at the base.
    pub a: Vec<BigUint>,
    /// All closed paths at the base.
    pub b: Vec<BigUint>,
    /// Root tests `a_n^(1/n)`, `b_n^(1/n)` at the largest `n` with a nonzero
    /// count; zero when there is none.
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub exact_horizon: Option<usize>,
}

fn root_test(counts: &[BigUint]) -> f64 {
    counts
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .find(|(_, c)| !c.is_zero())
        .map_or(0.0, |(n, c)| {
            // ln via bit length keeps huge counts finite
            let bits = c.bits();
            let shift = bits.saturating_sub(60);
            let top = (c >> shift).to_f64().unwrap_or(0.0);
            ((top.ln() + shift as f64 * std::f64::consts::LN_2) / n as f64).exp()
        })
}

pub fn count_closed_paths(model: &WalkModel, n_max: usize) -> Result<CogrowthSeries> {
    if let Some(h) = model.exact_horizon() {
        if n_max > h {
            return Err(Error::Exactness(format!(
                "n_max = {n_max} exceeds the exactness horizon {h} of the model"
            )));
        }
    }
    let a = model.nonbacktracking_counts(n_max);
    let (b, _) = model.walk_counts(n_max);
    Ok(CogrowthSeries {
        n_max,
        alpha_hat: root_test(&a),
        beta_hat: root_test(&b),
        a,
        b,
        exact_horizon: model.exact_horizon(),
    })
}

/// `b_n = p_n · dⁿ` for every `n` both series cover.
pub fn return_identity_holds(series: &CogrowthSeries, returns: &ReturnSeries) -> bool {
    let d = BigUint::from(returns.degree);
    let mut pow = BigUint::from(1u32);
    for (n, b) in series.b.iter().enumerate().take(returns.p.len()) {
        let scaled = &returns.p[n] * num_rational::BigRational::from_integer(pow.clone().into());
        if !scaled.is_integer() || scaled.to_integer() != b.clone().into() {
            return false;
        }
        pow *= &d;
    }
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordCrosscheck {
    /// Reduced words of length `n` in the subgroup, `n = 0..=reduced_n`.
    pub reduced: Vec<u64>,
    /// All words of length `n` in the subgroup, `n = 0..=all_n`.
    pub all: Vec<u64>,
}

/// Counts subgroup words by brute-force enumeration and membership, and
/// compares them with the path counts. A mismatch is an invariant breach.
pub fn crosscheck_word_counts(
    alphabet: &MarkedAlphabet,
    core: &CoreGraph,
    series: &CogrowthSeries,
    reduced_n: usize,
    all_n: usize,
) -> Result<WordCrosscheck> {
    let reduced_n = reduced_n.min(series.n_max);
    let all_n = all_n.min(series.n_max);
    let reduced: Vec<u64> = (0..=reduced_n)
        .map(|n| count_reduced_members(alphabet, core, n))
        .collect();
    let all: Vec<u64> = (0..=all_n).map(|n| count_all_members(alphabet, core, n)).collect();
    for (n, &c) in reduced.iter().enumerate() {
        if BigUint::from(c) != series.a[n] {
            return Err(Error::Invariant(format!(
                "reduced words of length {n} in the subgroup: {c}, closed reduced paths: {}",
                series.a[n]
            )));
        }
    }
    for (n, &c) in all.iter().enumerate() {
        if BigUint::from(c) != series.b[n] {
            return Err(Error::Invariant(format!(
                "words of length {n} in the subgroup: {c}, closed paths: {}",
                series.b[n]
            )));
        }
    }
    Ok(WordCrosscheck { reduced, all })
}

/// Reduced words of length `n` accepted by the core, split over the first
/// two letters so the work parallelizes.
pub fn count_reduced_members(alphabet: &MarkedAlphabet, core: &CoreGraph, n: usize) -> u64 {
    if n < 3 {
        let mut c = 0;
        alphabet.for_each_reduced_word(n, |w| c += core.accepts_reduced(w) as u64);
        return c;
    }
    let prefixes: Vec<[Letter; 2]> = alphabet
        .enumerate_reduced_words(2)
        .map(|w| [w.letters()[0], w.letters()[1]])
        .collect();
    prefixes
        .par_iter()
        .map(|p| {
            let mut c = 0u64;
            let mut buf = Vec::with_capacity(n);
            alphabet.for_each_reduced_word(n - 2, |w| {
                if w.first().is_none_or(|&x| x != p[1].inverse()) {
                    buf.clear();
                    buf.extend_from_slice(p);
                    buf.extend_from_slice(w);
                    c += core.accepts_reduced(&buf) as u64;
                }
            });
            c
        })
        .sum()
}

/// All words of length `n` (not necessarily reduced) in the subgroup.
pub fn count_all_members(alphabet: &MarkedAlphabet, core: &CoreGraph, n: usize) -> u64 {
    let d = alphabet.degree();
    let mut word = vec![0usize; n];
    let mut stack: Vec<Letter> = Vec::with_capacity(n);
    let mut count = 0;
    loop {
        stack.clear();
        for &i in &word {
            let x = Letter::from_index(i);
            if stack.last() == Some(&x.inverse()) {
                stack.pop();
            } else {
                stack.push(x);
            }
        }
        count += core.accepts_reduced(&stack) as u64;
        // odometer
        let mut pos = n;
        loop {
            if pos == 0 {
                return count;
            }
            pos -= 1;
            word[pos] += 1;
            if word[pos] < d {
                break;
            }
            word[pos] = 0;
        }
    }
}

/// The cogrowth formula: spectral radius of a `d`-regular graph from its
/// cogrowth rate. Rates below 1 (graphs with almost no reduced cycles, such
/// as trees) are treated as the first branch.
pub fn bartholdi_rho(alpha: f64, d: usize) -> Result<f64> {
    if d < 3 {
        return Err(Error::Precondition(format!("degree {d} < 3")));
    }
    let s = ((d - 1) as f64).sqrt();
    if !(alpha >= 0.0 && alpha <= (d - 1) as f64 + 1e-12) {
        return Err(Error::Precondition(format!("cogrowth rate {alpha} outside [0, {}]", d - 1)));
    }
    let df = d as f64;
    Ok(if alpha <= s {
        2.0 * s / df
    } else {
        s / df * (s / alpha + alpha / s)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    /// Collatz–Wielandt enclosure of the dominant block.
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

pub const ALPHA_ITERATION_CAP: usize = 200_000;
pub const ALPHA_TOLERANCE: f64 = 1e-9;
pub const ALPHA_ENCLOSURE: f64 = 1e-6;

/// Growth rate of the reduced words in the subgroup: the spectral radius of
/// the non-backtracking operator on directed core edges.
pub fn subgroup_alpha_exact(core: &CoreGraph) -> Result<AlphaEstimate> {
    let degree = core.degree();
    let n = core.vertex_count();
    // directed edge (v, i) is slot i at v
    let mut id = vec![usize::MAX; n * degree];
    let mut edges = Vec::new();
    for v in 0..n {
        for i in 0..degree {
            if core.target(v, Letter::from_index(i)).is_some() {
                id[v * degree + i] = edges.len();
                edges.push((v, i));
            }
        }
    }
    let mut g: DiGraph<(), ()> = DiGraph::new();
    let nodes: Vec<_> = edges.iter().map(|_| g.add_node(())).collect();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); edges.len()];
    for (e, &(v, i)) in edges.iter().enumerate() {
        let u = core.target(v, Letter::from_index(i)).unwrap();
        for j in 0..degree {
            if j != (i ^ 1) && core.target(u, Letter::from_index(j)).is_some() {
                let f = id[u * degree + j];
                succ[e].push(f);
                g.add_edge(nodes[e], nodes[f], ());
            }
        }
    }
    let mut best = AlphaEstimate {
        alpha: 0.0,
        lower: 0.0,
        upper: 0.0,
        iterations: 0,
    };
    for comp in tarjan_scc(&g) {
        let members: Vec<usize> = comp.iter().map(|x| x.index()).collect();
        let cyclic = members.len() > 1 || succ[members[0]].contains(&members[0]);
        if !cyclic {
            continue;
        }
        let est = block_radius(&members, &succ)?;
        if est.alpha > best.alpha {
            best = est;
        }
    }
    Ok(best)
}

/// Power iteration on `I + B` for an irreducible 0/1 block `B`; the shift
/// makes the block aperiodic without moving the eigenvector.
fn block_radius(members: &[usize], succ: &[Vec<usize>]) -> Result<AlphaEstimate> {
    let m = members.len();
    let mut local = vec![usize::MAX; succ.len()];
    for (k, &e) in members.iter().enumerate() {
        local[e] = k;
    }
    let rows: Vec<Vec<usize>> = members
        .iter()
        .map(|&e| succ[e].iter().filter_map(|&f| (local[f] != usize::MAX).then_some(local[f])).collect())
        .collect();
    let mut x = vec![1.0f64; m];
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for it in 1..=ALPHA_ITERATION_CAP {
        let y: Vec<f64> = (0..m).map(|i| x[i] + rows[i].iter().map(|&j| x[j]).sum::<f64>()).collect();
        lo = f64::INFINITY;
        hi = 0.0;
        for i in 0..m {
            let r = y[i] / x[i];
            lo = f64::min(lo, r);
            hi = f64::max(hi, r);
        }
        let norm = y.iter().cloned().fold(0.0, f64::max);
        x = y.into_iter().map(|v| v / norm).collect();
        if hi - lo <= ALPHA_TOLERANCE * hi {
            return Ok(AlphaEstimate {
                alpha: (lo + hi) / 2.0 - 1.0,
                lower: lo - 1.0,
                upper: hi - 1.0,
                iterations: it,
            });
        }
    }
    if hi - lo < ALPHA_ENCLOSURE {
        return Ok(AlphaEstimate {
            alpha: (lo + hi) / 2.0 - 1.0,
            lower: lo - 1.0,
            upper: hi - 1.0,
            iterations: ALPHA_ITERATION_CAP,
        });
    }
    Err(Error::NonConvergence {
        iterations: ALPHA_ITERATION_CAP,
        width: hi - lo,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthBoundsReport {
    pub alpha: AlphaEstimate,
    pub rho_hat: f64,
    pub beta_hat: f64,
    /// `2k − 1 − α`.
    pub alpha_margin: f64,
    /// `2k − β̂`.
    pub beta_margin: f64,
    pub pass: bool,
}

pub const GROWTH_BOUNDS_MARGIN: f64 = 1e-6;
pub const GROWTH_BOUNDS_RADIUS: usize = 20;
pub const GROWTH_BOUNDS_N_MAX: usize = 40;

/// Strict growth bounds for the subgroup's reduced and unreduced words.
pub fn verify_growth_bounds(core: &CoreGraph) -> Result<GrowthBoundsReport> {
    if let IndexInfo::Finite(i) = core.index_info() {
        return Err(Error::Precondition(format!(
            "subgroup has finite index {i}; the growth bounds need infinite index"
        )));
    }
    let d = core.degree() as f64;
    let alpha = subgroup_alpha_exact(core)?;
    let series = return_probabilities(&WalkModel::from_core(core, GROWTH_BOUNDS_RADIUS), GROWTH_BOUNDS_N_MAX)?;
    let rho = estimate_rho(&series)?;
    let beta_hat = d * rho.rho_hat;
    let alpha_margin = d - 1.0 - alpha.upper;
    let beta_margin = d - beta_hat;
    Ok(GrowthBoundsReport {
        alpha,
        rho_hat: rho.rho_hat,
        beta_hat,
        alpha_margin,
        beta_margin,
        pass: alpha_margin > GROWTH_BOUNDS_MARGIN && beta_margin > GROWTH_BOUNDS_MARGIN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schreier::stallings_core;

    fn core(gens: &[&str]) -> CoreGraph {
        let a = MarkedAlphabet::standard(2);
        let ws: Vec<_> = gens.iter().map(|g| a.parse_word(g).unwrap()).collect();
        stallings_core(&a, &ws)
    }

    #[test]
    fn tree_counts() {
        let s = count_closed_paths(&WalkModel::from_core(&core(&[]), 4), 8).unwrap();
        assert!(s.a[1..].iter().all(Zero::is_zero));
        assert_eq!(s.b[2], BigUint::from(4u32));
        assert_eq!(s.b[4], BigUint::from(28u32));
        assert_eq!(s.alpha_hat, 0.0);
    }

    #[test]
    fn cyclic_subgroup_counts() {
        let a = MarkedAlphabet::standard(2);
        let c = core(&["a"]);
        let s = count_closed_paths(&WalkModel::from_core(&c, 4), 8).unwrap();
        assert!(s.a[1..].iter().all(|x| *x == BigUint::from(2u32)));
        let report = crosscheck_word_counts(&a, &c, &s, 8, 6).unwrap();
        assert_eq!(report.reduced[8], 2);
    }

    #[test]
    fn crosscheck_on_squares() {
        let a = MarkedAlphabet::standard(2);
        let c = core(&["a a", "b b"]);
        let s = count_closed_paths(&WalkModel::from_core(&c, 4), 8).unwrap();
        crosscheck_word_counts(&a, &c, &s, 8, 6).unwrap();
    }

    #[test]
    fn formula_branches() {
        let r = 3f64.sqrt() / 2.0;
        assert!((bartholdi_rho(1.0, 4).unwrap() - r).abs() < 1e-12);
        assert!((bartholdi_rho(3.0, 4).unwrap() - 1.0).abs() < 1e-12);
        assert!((bartholdi_rho(3f64.sqrt(), 4).unwrap() - r).abs() < 1e-12);
        assert!((bartholdi_rho(0.0, 4).unwrap() - r).abs() < 1e-12);
        assert!(bartholdi_rho(3.5, 4).is_err());
        assert!(bartholdi_rho(1.0, 2).is_err());
    }

    #[test]
    fn alpha_examples() {
        assert!((subgroup_alpha_exact(&core(&["a"])).unwrap().alpha - 1.0).abs() < 1e-6);
        assert!((subgroup_alpha_exact(&core(&["a", "b"])).unwrap().alpha - 3.0).abs() < 1e-6);
        let sq = subgroup_alpha_exact(&core(&["a a", "b b"])).unwrap();
        assert!((sq.alpha - 3f64.sqrt()).abs() < 1e-6, "{sq:?}");
        assert!(sq.upper - sq.lower < ALPHA_ENCLOSURE);
        assert_eq!(subgroup_alpha_exact(&core(&[])).unwrap().alpha, 0.0);
    }

    #[test]
    fn growth_bounds_gate_and_pass() {
        assert!(verify_growth_bounds(&core(&["a"])).unwrap().pass);
        assert!(verify_growth_bounds(&core(&["a b a' b'"])).unwrap().pass);
        assert!(matches!(verify_growth_bounds(&core(&["a", "b"])), Err(Error::Precondition(_))));
    }
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presentations::BallGraph;

/// `|∂S| / |S|`, kept as the two counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryRatio {
    pub boundary: usize,
    pub size: usize,
}

impl BoundaryRatio {
    pub fn value(self) -> f64 {
        self.boundary as f64 / self.size as f64
    }

    fn less_than(self, other: BoundaryRatio) -> bool {
        self.boundary * other.size < other.boundary * self.size
    }
}

fn check_margin(ball: &BallGraph, set: &[usize], k: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Precondition("the vertex set must be nonempty".into()));
    }
    for &s in set {
        if ball.depth(s) + k > ball.radius() {
            return Err(Error::Exactness(format!(
                "vertex {s} at depth {} is within {k} of the ball boundary (radius {})",
                ball.depth(s),
                ball.radius()
            )));
        }
    }
    Ok(())
}

/// `N_k(S)`, sorted.
pub fn neighborhood(ball: &BallGraph, set: &[usize], k: usize) -> Result<Vec<usize>> {
    check_margin(ball, set, k)?;
    let mut seen = vec![false; ball.vertex_count()];
    let mut layer: Vec<usize> = Vec::new();
    for &s in set {
        if !seen[s] {
            seen[s] = true;
            layer.push(s);
        }
    }
    let mut all = layer.clone();
    for _ in 0..k {
        let mut next = Vec::new();
        for &v in &layer {
            for (_, u) in ball.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    next.push(u);
                }
            }
        }
        all.extend(&next);
        layer = next;
    }
    all.sort_unstable();
    Ok(all)
}

/// `∂S = N₁(S) − S`, sorted.
pub fn boundary(ball: &BallGraph, set: &[usize]) -> Result<Vec<usize>> {
    let mut members = set.to_vec();
    members.sort_unstable();
    Ok(neighborhood(ball, set, 1)?
        .into_iter()
        .filter(|v| members.binary_search(v).is_err())
        .collect())
}

/// Incremental coverage counts for a growing vertex set.
struct Cover<'a> {
    reach: &'a [Vec<u32>],
    count: Vec<u32>,
    covered: usize,
}

impl<'a> Cover<'a> {
    fn new(reach: &'a [Vec<u32>]) -> Cover<'a> {
        Cover {
            reach,
            count: vec![0; reach.len()],
            covered: 0,
        }
    }

    fn add(&mut self, v: usize) {
        for &u in &self.reach[v] {
            let c = &mut self.count[u as usize];
            if *c == 0 {
                self.covered += 1;
            }
            *c += 1;
        }
    }

    fn remove(&mut self, v: usize) {
        for &u in &self.reach[v] {
            let c = &mut self.count[u as usize];
            *c -= 1;
            if *c == 0 {
                self.covered -= 1;
            }
        }
    }
}

/// Distinct vertices within distance `k` of each vertex (in-ball).
fn reach_lists(ball: &BallGraph, k: usize) -> Vec<Vec<u32>> {
    let n = ball.vertex_count();
    let mut mark = vec![usize::MAX; n];
    (0..n)
        .map(|v| {
            let mut out = vec![v as u32];
            mark[v] = v;
            let mut start = 0;
            for _ in 0..k {
                let end = out.len();
                for i in start..end {
                    for (_, u) in ball.neighbors(out[i] as usize) {
                        if mark[u] != v {
                            mark[u] = v;
                            out.push(u as u32);
                        }
                    }
                }
                start = end;
            }
            out
        })
        .collect()
}

/// Visits every connected vertex set `S` with `|S| ≤ max_size` whose
/// vertices are all `allowed` and whose least vertex is one of `roots`,
/// exactly once. With `roots = [base]` this is every connected set
/// containing the base.
/// The visitor receives `S` (in insertion order), `|N₁(S)|` and `|N_k(S)|`,
/// and returns `false` to stop the current root early.
///
/// Roots are processed in parallel; each root's results are returned in
/// root order.
pub fn for_each_connected_set<T, F>(
    ball: &BallGraph,
    allowed: &[bool],
    roots: &[usize],
    max_size: usize,
    k: usize,
    visit: F,
) -> Vec<T>
where
    T: Send + Default,
    F: Fn(&mut T, &[usize], usize, usize) -> bool + Sync,
{
    let n = ball.vertex_count();
    let r1 = reach_lists(ball, 1);
    let rk = if k == 1 { r1.clone() } else { reach_lists(ball, k) };
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            let mut a: Vec<usize> = ball.neighbors(v).map(|(_, u)| u).filter(|&u| u != v).collect();
            a.sort_unstable();
            a.dedup();
            a
        })
        .collect();
    roots
        .par_iter()
        .filter(|&&r| allowed[r])
        .map(|&root| {
            let mut acc = T::default();
            if max_size == 0 {
                return acc;
            }
            let mut st = Search {
                adj: &adj,
                allowed,
                root,
                max_size,
                c1: Cover::new(&r1),
                ck: Cover::new(&rk),
                set: Vec::new(),
                stop: false,
            };
            st.c1.add(root);
            st.ck.add(root);
            st.set.push(root);
            let ext: Vec<usize> = adj[root].iter().copied().filter(|&u| u > root && allowed[u]).collect();
            st.extend(ext, &mut acc, &visit);
            acc
        })
        .collect()
}

struct Search<'a> {
    adj: &'a [Vec<usize>],
    allowed: &'a [bool],
    root: usize,
    max_size: usize,
    c1: Cover<'a>,
    ck: Cover<'a>,
    set: Vec<usize>,
    stop: bool,
}

impl Search<'_> {
    /// Enumeration of connected sets by exclusive extension: a candidate is
    /// added only if it was not adjacent to the set before its parent joined.
    fn extend<T, F>(&mut self, mut ext: Vec<usize>, acc: &mut T, visit: &F)
    where
        F: Fn(&mut T, &[usize], usize, usize) -> bool,
    {
        if !visit(acc, &self.set, self.c1.covered, self.ck.covered) {
            self.stop = true;
            return;
        }
        if self.set.len() == self.max_size {
            return;
        }
        while let Some(w) = ext.pop() {
            let mut next = ext.clone();
            for &u in &self.adj[w] {
                if u > self.root && self.allowed[u] && self.c1.count[u] == 0 && !next.contains(&u) {
                    next.push(u);
                }
            }
            self.c1.add(w);
            self.ck.add(w);
            self.set.push(w);
            self.extend(next, acc, visit);
            self.set.pop();
            self.ck.remove(w);
            self.c1.remove(w);
            if self.stop {
                return;
            }
        }
    }
}

fn root_list(ball: &BallGraph, base_only: bool) -> Vec<usize> {
    if base_only {
        vec![ball.base()]
    } else {
        (0..ball.vertex_count()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheegerMode {
    /// All connected sets up to `max_size` whose vertices keep one step of
    /// margin to the ball boundary; with `base_only`, those containing the
    /// base (enough for vertex-transitive graphs).
    ExhaustiveConnected { max_size: usize, base_only: bool },
    /// Grow from `start` by the frontier vertex giving the lowest ratio.
    GreedyFolner { start: usize, max_size: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheegerReport {
    pub best: BoundaryRatio,
    pub witness: Vec<usize>,
    pub mode: CheegerMode,
    pub sets_examined: u64,
}

impl CheegerReport {
    pub fn best_ratio(&self) -> f64 {
        self.best.value()
    }

    /// Recomputes the witness boundary from scratch.
    pub fn verify(&self, ball: &BallGraph) -> Result<bool> {
        let b = boundary(ball, &self.witness)?;
        Ok(b.len() == self.best.boundary && self.witness.len() == self.best.size)
    }
}

#[derive(Default)]
struct BestSet {
    best: Option<(BoundaryRatio, Vec<usize>)>,
    count: u64,
}

/// Lowest boundary ratio over the search family (an upper bound on the
/// isoperimetric constant).
pub fn cheeger_search(ball: &BallGraph, mode: CheegerMode) -> Result<CheegerReport> {
    match mode {
        CheegerMode::ExhaustiveConnected { max_size, base_only } => {
            let allowed: Vec<bool> = (0..ball.vertex_count())
                .map(|v| ball.depth(v) < ball.radius())
                .collect();
            let roots = root_list(ball, base_only);
            let per_root = for_each_connected_set(ball, &allowed, &roots, max_size, 1, |acc: &mut BestSet, s, n1, _| {
                acc.count += 1;
                let r = BoundaryRatio {
                    boundary: n1 - s.len(),
                    size: s.len(),
                };
                if acc.best.as_ref().is_none_or(|(b, _)| r.less_than(*b)) {
                    let mut w = s.to_vec();
                    w.sort_unstable();
                    acc.best = Some((r, w));
                }
                true
            });
            let mut total = 0;
            let mut best: Option<(BoundaryRatio, Vec<usize>)> = None;
            for r in per_root {
                total += r.count;
                if let Some((ratio, w)) = r.best {
                    if best.as_ref().is_none_or(|(b, _)| ratio.less_than(*b)) {
                        best = Some((ratio, w));
                    }
                }
            }
            let (best, witness) =
                best.ok_or_else(|| Error::Precondition("no interior vertex to search from".into()))?;
            Ok(CheegerReport {
                best,
                witness,
                mode,
                sets_examined: total,
            })
        }
        CheegerMode::GreedyFolner { start, max_size } => {
            check_margin(ball, &[start], 1)?;
            let n = ball.vertex_count();
            let mut in_set = vec![false; n];
            let mut set = vec![start];
            in_set[start] = true;
            let bsize = |set: &[usize]| boundary(ball, set).map(|b| b.len());
            let mut cur = BoundaryRatio {
                boundary: bsize(&set)?,
                size: 1,
            };
            let mut best = (cur, set.clone());
            let mut examined = 1;
            while set.len() < max_size {
                let frontier = boundary(ball, &set)?;
                let mut pick: Option<(BoundaryRatio, usize)> = None;
                for v in frontier {
                    if ball.depth(v) >= ball.radius() {
                        continue;
                    }
                    set.push(v);
                    let r = BoundaryRatio {
                        boundary: bsize(&set)?,
                        size: set.len(),
                    };
                    set.pop();
                    examined += 1;
                    if pick.is_none_or(|(b, _)| r.less_than(b)) {
                        pick = Some((r, v));
                    }
                }
                let Some((r, v)) = pick else { break };
                set.push(v);
                in_set[v] = true;
                cur = r;
                if cur.less_than(best.0) {
                    let mut w = set.clone();
                    w.sort_unstable();
                    best = (cur, w);
                }
            }
            Ok(CheegerReport {
                best: best.0,
                witness: best.1,
                mode,
                sets_examined: examined,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DoublingFamily {
    /// Every connected set up to `max_size` with margin `k` to the boundary,
    /// or only those containing the base.
    AllConnected { max_size: usize, base_only: bool },
    Sets(Vec<Vec<usize>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DoublingVerdict {
    Refuted {
        witness: Vec<usize>,
        size: usize,
        neighborhood: usize,
    },
    Supported {
        max_size: usize,
        sets_checked: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub k: usize,
    pub verdict: DoublingVerdict,
}

impl DoublingReport {
    pub fn refuted(&self) -> bool {
        matches!(self.verdict, DoublingVerdict::Refuted { .. })
    }
}

#[derive(Default)]
struct FirstFailure {
    fail: Option<(Vec<usize>, usize)>,
    count: u64,
}

/// Checks `|N_k(S)| ≥ 2|S|` over the family.
pub fn doubling_check(ball: &BallGraph, k: usize, family: &DoublingFamily) -> Result<DoublingReport> {
    let verdict = match family {
        DoublingFamily::AllConnected { max_size, base_only } => {
            let allowed: Vec<bool> = (0..ball.vertex_count())
                .map(|v| ball.depth(v) + k <= ball.radius())
                .collect();
            let roots = root_list(ball, *base_only);
            let per_root = for_each_connected_set(ball, &allowed, &roots, *max_size, k, |acc: &mut FirstFailure, s, _, nk| {
                acc.count += 1;
                if nk < 2 * s.len() {
                    let mut w = s.to_vec();
                    w.sort_unstable();
                    acc.fail = Some((w, nk));
                    return false;
                }
                true
            });
            let checked = per_root.iter().map(|r| r.count).sum();
            match per_root.into_iter().find_map(|r| r.fail) {
                Some((witness, nk)) => DoublingVerdict::Refuted {
                    size: witness.len(),
                    witness,
                    neighborhood: nk,
                },
                None => DoublingVerdict::Supported {
                    max_size: *max_size,
                    sets_checked: checked,
                },
            }
        }
        DoublingFamily::Sets(sets) => {
            let mut out = None;
            for s in sets {
                let nk = neighborhood(ball, s, k)?.len();
                let mut w = s.clone();
                w.sort_unstable();
                w.dedup();
                if nk < 2 * w.len() {
                    out = Some(DoublingVerdict::Refuted {
                        size: w.len(),
                        witness: w,
                        neighborhood: nk,
                    });
                    break;
                }
            }
            out.unwrap_or(DoublingVerdict::Supported {
                max_size: sets.iter().map(Vec::len).max().unwrap_or(0),
                sets_checked: sets.len() as u64,
            })
        }
    };
    Ok(DoublingReport { k, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presentations::Presentation;
    use crate::words::MarkedAlphabet;

    fn tree(r: usize) -> BallGraph {
        Presentation::free(MarkedAlphabet::standard(2)).cayley_ball(r).unwrap()
    }

    #[test]
    fn single_vertex_and_paths_in_the_tree() {
        let b = tree(10);
        assert_eq!(boundary(&b, &[0]).unwrap().len(), 4);
        let a = MarkedAlphabet::standard(2);
        for n in 1..=8 {
            let path: Vec<usize> = (0..n)
                .map(|i| b.find(&a.parse_word("a").unwrap().pow(i as i64)).unwrap())
                .collect();
            assert_eq!(boundary(&b, &path).unwrap().len(), 2 * n + 2);
        }
        assert_eq!(neighborhood(&b, &[0], 0).unwrap(), vec![0]);
    }

    #[test]
    fn margin_is_enforced() {
        let b = tree(2);
        let v = b.find(&MarkedAlphabet::standard(2).parse_word("a a").unwrap()).unwrap();
        assert!(matches!(boundary(&b, &[v]), Err(Error::Exactness(_))));
        assert!(matches!(boundary(&b, &[]), Err(Error::Precondition(_))));
    }

    #[test]
    fn connected_sets_are_enumerated_once() {
        // subtrees of size ≤ 3 inside the radius-1 ball of T₄: 5 + 4 + 6
        let b = tree(1);
        let allowed = vec![true; b.vertex_count()];
        let roots: Vec<usize> = (0..b.vertex_count()).collect();
        let per_root = for_each_connected_set(&b, &allowed, &roots, 3, 1, |acc: &mut Vec<Vec<usize>>, s, _, _| {
            let mut w = s.to_vec();
            w.sort_unstable();
            acc.push(w);
            true
        });
        let mut all: Vec<Vec<usize>> = per_root.into_iter().flatten().collect();
        let total = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), total);
        assert_eq!(total, 15);
    }

    #[test]
    fn tree_cheeger_minimum_is_a_subtree() {
        let b = tree(9);
        let r = cheeger_search(&b, CheegerMode::ExhaustiveConnected { max_size: 8, base_only: true }).unwrap();
        assert_eq!(r.best, BoundaryRatio { boundary: 18, size: 8 });
        assert!(r.verify(&b).unwrap());
    }

    #[test]
    fn tree_doubles_at_two_steps() {
        let b = tree(8);
        let r = doubling_check(&b, 2, &DoublingFamily::AllConnected { max_size: 6, base_only: false }).unwrap();
        assert!(!r.refuted(), "{r:?}");
    }
}

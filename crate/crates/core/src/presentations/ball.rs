use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::words::{Letter, Word};

/// Finite radius-`R` portion of a Cayley or Schreier graph.
///
/// Vertex 0 is the base. Vertices are numbered in BFS order and carry their
/// shortlex-least representative word and their distance from the base. For
/// each vertex and letter the target is present exactly when it lies inside
/// the ball, so interior vertices (distance `< R`) have all their edges.
#[derive(Clone, Debug, PartialEq)]
pub struct BallGraph {
    degree: usize,
    radius: usize,
    reps: Vec<Word>,
    depth: Vec<u32>,
    targets: Vec<Option<u32>>,
    convex: bool,
}

/// Distance between two ball vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BallDistance {
    Exact(u32),
    /// The in-ball distance is only an upper bound; the true distance lies in
    /// `[lower, upper]`.
    Bounds { lower: u32, upper: u32 },
}

impl BallDistance {
    pub fn exact(self) -> Option<u32> {
        match self {
            BallDistance::Exact(d) => Some(d),
            BallDistance::Bounds { .. } => None,
        }
    }
}

impl BallGraph {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn vertex_count(&self) -> usize {
        self.reps.len()
    }

    /// Whether in-ball distances are known to equal ambient distances, as
    /// when everything outside the ball is a union of hanging trees.
    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub(crate) fn with_convex(mut self, convex: bool) -> BallGraph {
        self.convex = convex;
        self
    }

    pub fn base(&self) -> usize {
        0
    }

    pub fn rep(&self, v: usize) -> &Word {
        &self.reps[v]
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v] as usize
    }

    pub fn is_interior(&self, v: usize) -> bool {
        self.depth(v) < self.radius
    }

    #[inline]
    pub fn target(&self, v: usize, x: Letter) -> Option<usize> {
        self.targets[v * self.degree + x.index()].map(|t| t as usize)
    }

    /// All in-ball edges out of `v` in letter order, loops included.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (Letter, usize)> + '_ {
        (0..self.degree).filter_map(move |i| {
            self.targets[v * self.degree + i].map(|t| (Letter::from_index(i), t as usize))
        })
    }

    /// Positive-letter edges; a loop counts once.
    pub fn edge_count(&self) -> usize {
        (0..self.vertex_count())
            .map(|v| {
                (0..self.degree)
                    .step_by(2)
                    .filter(|&i| self.targets[v * self.degree + i].is_some())
                    .count()
            })
            .sum()
    }

    /// Number of vertices at each distance `0..=R`.
    pub fn sphere_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.radius + 1];
        for &d in &self.depth {
            out[d as usize] += 1;
        }
        out
    }

    /// Follows `word` from `start`; `None` when the path leaves the ball.
    pub fn walk(&self, start: usize, word: &Word) -> Option<usize> {
        word.letters()
            .iter()
            .try_fold(start, |v, &x| self.target(v, x))
    }

    pub fn find(&self, word: &Word) -> Option<usize> {
        self.walk(self.base(), word)
    }

    /// In-ball BFS distances from `v`.
    pub fn distances_from(&self, v: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.vertex_count()];
        let mut queue = VecDeque::new();
        dist[v] = 0;
        queue.push_back(v);
        while let Some(u) = queue.pop_front() {
            for (_, t) in self.neighbors(u) {
                if dist[t] == u32::MAX {
                    dist[t] = dist[u] + 1;
                    queue.push_back(t);
                }
            }
        }
        dist
    }

    /// Exact when no shorter path can leave the ball: any path through a
    /// vertex at distance `R + 1` has length at least
    /// `2R + 2 - |u| - |v|`.
    pub fn classify_distance(&self, u: usize, v: usize, in_ball: u32) -> BallDistance {
        if self.convex {
            return BallDistance::Exact(in_ball);
        }
        let escape = (2 * self.radius + 2) as i64 - self.depth(u) as i64 - self.depth(v) as i64;
        if (in_ball as i64) <= escape {
            BallDistance::Exact(in_ball)
        } else {
            BallDistance::Bounds {
                lower: escape.max(0) as u32,
                upper: in_ball,
            }
        }
    }

    pub fn ball_distance(&self, u: usize, v: usize) -> BallDistance {
        let d = self.distances_from(u)[v];
        self.classify_distance(u, v, d)
    }

    /// Checks label-determinism, involution consistency, interior
    /// completeness and the BFS distance annotation.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.vertex_count();
        if self.targets.len() != n * self.degree || self.depth.len() != n {
            return Err(Error::Invariant("ball storage size mismatch".into()));
        }
        for v in 0..n {
            for x in (0..self.degree).map(Letter::from_index) {
                match self.target(v, x) {
                    Some(u) => {
                        if self.target(u, x.inverse()) != Some(v) {
                            return Err(Error::Invariant(format!(
                                "edge {v} -{}-> {u} has no inverse edge",
                                x.index()
                            )));
                        }
                    }
                    None if self.is_interior(v) => {
                        return Err(Error::Invariant(format!(
                            "interior vertex {v} misses letter {}",
                            x.index()
                        )));
                    }
                    None => {}
                }
            }
        }
        let bfs = self.distances_from(self.base());
        if bfs.iter().zip(&self.depth).any(|(a, b)| a != b) {
            return Err(Error::Invariant("depth annotation differs from BFS".into()));
        }
        for v in 0..n {
            if self.rep(v).len() != self.depth(v) || self.find(self.rep(v)) != Some(v) {
                return Err(Error::Invariant(format!(
                    "representative of vertex {v} is not a geodesic label"
                )));
            }
        }
        Ok(())
    }
}

/// Incremental construction in BFS order.
pub(crate) struct BallBuilder {
    degree: usize,
    radius: usize,
    budget: usize,
    reps: Vec<Word>,
    depth: Vec<u32>,
    targets: Vec<Option<u32>>,
}

impl BallBuilder {
    pub fn new(degree: usize, radius: usize, budget: usize) -> BallBuilder {
        BallBuilder {
            degree,
            radius,
            budget,
            reps: vec![Word::empty()],
            depth: vec![0],
            targets: vec![None; degree],
        }
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn rep(&self, v: usize) -> &Word {
        &self.reps[v]
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v] as usize
    }

    pub fn target(&self, v: usize, x: Letter) -> Option<usize> {
        self.targets[v * self.degree + x.index()].map(|t| t as usize)
    }

    /// Adds a child of `parent` along `x`.
    pub fn add_child(&mut self, parent: usize, x: Letter) -> Result<usize> {
        let d = self.depth[parent] + 1;
        if self.reps.len() >= self.budget {
            return Err(Error::BudgetExceeded {
                budget: self.budget,
                completed_radius: d as usize - 1,
            });
        }
        let mut rep = self.reps[parent].clone();
        rep.push(x);
        let id = self.reps.len();
        self.reps.push(rep);
        self.depth.push(d);
        self.targets.extend(std::iter::repeat_n(None, self.degree));
        self.link(parent, x, id);
        Ok(id)
    }

    pub fn link(&mut self, u: usize, x: Letter, v: usize) {
        let a = &mut self.targets[u * self.degree + x.index()];
        debug_assert!(a.is_none() || *a == Some(v as u32));
        *a = Some(v as u32);
        let b = &mut self.targets[v * self.degree + x.inverse().index()];
        debug_assert!(b.is_none() || *b == Some(u as u32));
        *b = Some(u as u32);
    }

    pub fn finish(self) -> BallGraph {
        BallGraph {
            degree: self.degree,
            radius: self.radius,
            reps: self.reps,
            depth: self.depth,
            targets: self.targets,
            convex: false,
        }
    }
}

/// BFS ball over an implicit graph whose vertices have a hashable canonical
/// state and where `step` is an exact, label-deterministic successor map.
pub(crate) fn ball_from_states<S, F>(
    degree: usize,
    radius: usize,
    budget: usize,
    start: S,
    step: F,
) -> Result<BallGraph>
where
    S: Hash + Eq + Clone,
    F: Fn(&S, Letter) -> S,
{
    let mut b = BallBuilder::new(degree, radius, budget);
    let mut states = vec![start.clone()];
    let mut index: HashMap<S, usize> = HashMap::new();
    index.insert(start, 0);
    let mut v = 0;
    while v < b.len() {
        for x in (0..degree).map(Letter::from_index) {
            if b.target(v, x).is_some() {
                continue;
            }
            let next = step(&states[v], x);
            if let Some(&u) = index.get(&next) {
                b.link(v, x, u);
            } else if b.depth(v) < radius {
                let u = b.add_child(v, x)?;
                index.insert(next.clone(), u);
                states.push(next);
            }
        }
        v += 1;
    }
    Ok(b.finish())
}

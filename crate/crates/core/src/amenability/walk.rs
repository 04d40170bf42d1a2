use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::presentations::BallGraph;
use crate::schreier::CoreGraph;
use crate::words::Letter;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    /// One state per ball vertex; walks leaving the ball are lost.
    Ball,
    /// Missing edges of the ball closed up as loops: a finite regular graph.
    Reflective,
    /// Core vertices plus hanging-tree vertices lumped by attachment vertex
    /// and depth.
    LumpedCore,
}

/// Equitable quotient of a `degree`-regular graph around a base vertex.
///
/// State 0 is the base and is a single vertex. Each state has one slot per
/// letter; every vertex of a state sends that letter into the slot's target
/// state, or out of the model when the slot is empty. Because the partition
/// is equitable, walk counts from the base summed over a state evolve by the
/// slot map alone.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkModel {
    degree: usize,
    slots: Vec<Option<u32>>,
    horizon: Option<usize>,
    kind: ModelKind,
}

impl WalkModel {
    pub fn from_ball(ball: &BallGraph) -> WalkModel {
        let degree = ball.degree();
        let slots = (0..ball.vertex_count())
            .flat_map(|v| (0..degree).map(move |i| (v, i)))
            .map(|(v, i)| ball.target(v, Letter::from_index(i)).map(|t| t as u32))
            .collect();
        WalkModel {
            degree,
            slots,
            horizon: Some(2 * ball.radius()),
            kind: ModelKind::Ball,
        }
    }

    pub fn from_ball_reflective(ball: &BallGraph) -> WalkModel {
        let mut m = WalkModel::from_ball(ball);
        for (k, s) in m.slots.iter_mut().enumerate() {
            s.get_or_insert((k / m.degree) as u32);
        }
        m.horizon = None;
        m.kind = ModelKind::Reflective;
        m
    }

    /// The radius-`radius` ball around the base coset of the Schreier graph
    /// of a free group with the given core, with hanging-tree vertices
    /// lumped into classes `(v, j)`: depth `j` below core vertex `v`.
    pub fn from_core(core: &CoreGraph, radius: usize) -> WalkModel {
        let degree = core.degree();
        let depth: Vec<usize> = core.base_paths().iter().map(|p| p.len()).collect();
        let nc = core.vertex_count();
        let mut id: HashMap<(usize, usize), usize> = HashMap::new();
        let mut classes: Vec<(usize, usize)> = Vec::new();
        for v in 0..nc {
            if depth[v] > radius {
                continue;
            }
            id.insert((v, 0), classes.len());
            classes.push((v, 0));
        }
        let open = |v: usize| (0..degree).any(|i| core.target(v, Letter::from_index(i)).is_none());
        for v in 0..nc {
            if depth[v] > radius || !open(v) {
                continue;
            }
            for j in 1..=radius - depth[v] {
                id.insert((v, j), classes.len());
                classes.push((v, j));
            }
        }
        let mut slots = Vec::with_capacity(classes.len() * degree);
        for &(v, j) in &classes {
            for i in 0..degree {
                let t = if j == 0 {
                    match core.target(v, Letter::from_index(i)) {
                        Some(u) => id.get(&(u, 0)),
                        None => id.get(&(v, 1)),
                    }
                } else if i == 0 {
                    // slot 0 stands for the edge back toward the core
                    id.get(&(v, j - 1))
                } else {
                    id.get(&(v, j + 1))
                };
                slots.push(t.map(|&t| t as u32));
            }
        }
        WalkModel {
            degree,
            slots,
            horizon: Some(2 * radius),
            kind: ModelKind::LumpedCore,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn state_count(&self) -> usize {
        self.slots.len() / self.degree
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Largest walk length whose return counts equal the ambient ones.
    pub fn exact_horizon(&self) -> Option<usize> {
        self.horizon
    }

    #[inline]
    pub fn step(&self, s: usize, slot: usize) -> Option<usize> {
        self.slots[s * self.degree + slot].map(|t| t as usize)
    }

    /// Closed-walk counts at the base and surviving-walk counts.
    pub fn walk_counts(&self, n_max: usize) -> (Vec<BigUint>, Vec<BigUint>) {
        let n = self.state_count();
        let mut cur = vec![BigUint::zero(); n];
        cur[0] = BigUint::from(1u32);
        let mut returns = vec![cur[0].clone()];
        let mut alive = vec![cur[0].clone()];
        for _ in 0..n_max {
            let mut next = vec![BigUint::zero(); n];
            for (s, c) in cur.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                for i in 0..self.degree {
                    if let Some(t) = self.step(s, i) {
                        next[t] += c;
                    }
                }
            }
            returns.push(next[0].clone());
            alive.push(next.iter().sum());
            cur = next;
        }
        (returns, alive)
    }

    /// Number of slots from state `a` into each target state.
    fn multiplicities(&self) -> Vec<Vec<(usize, u32)>> {
        (0..self.state_count())
            .map(|s| {
                let mut m: Vec<(usize, u32)> = Vec::new();
                for i in 0..self.degree {
                    if let Some(t) = self.step(s, i) {
                        match m.iter_mut().find(|(u, _)| *u == t) {
                            Some(e) => e.1 += 1,
                            None => m.push((t, 1)),
                        }
                    }
                }
                m.sort_unstable();
                m
            })
            .collect()
    }

    /// Closed non-backtracking walks at the base, via counts indexed by the
    /// last step `(A → B)` between states.
    pub fn nonbacktracking_counts(&self, n_max: usize) -> Vec<BigUint> {
        let mult = self.multiplicities();
        // pair p = (a, k) is the k-th out-entry of a
        let offsets: Vec<usize> = std::iter::once(0)
            .chain(mult.iter().scan(0, |acc, m| {
                *acc += m.len();
                Some(*acc)
            }))
            .collect();
        let pairs = offsets[self.state_count()];
        let pair_of = |a: usize, b: usize| -> Option<usize> {
            mult[a].binary_search_by_key(&b, |e| e.0).ok().map(|k| offsets[a] + k)
        };
        let mut out = vec![BigUint::from(1u32)];
        if n_max == 0 {
            return out;
        }
        let mut cur = vec![BigUint::zero(); pairs];
        for (k, &(_, m)) in mult[0].iter().enumerate() {
            cur[offsets[0] + k] = BigUint::from(m);
        }
        let closing = |cur: &[BigUint]| -> BigUint {
            (0..self.state_count())
                .filter_map(|a| pair_of(a, 0).map(|p| cur[p].clone()))
                .sum()
        };
        out.push(closing(&cur));
        for _ in 1..n_max {
            // arrivals into each state
            let mut inflow = vec![BigUint::zero(); self.state_count()];
            for a in 0..self.state_count() {
                for (k, &(b, _)) in mult[a].iter().enumerate() {
                    inflow[b] += &cur[offsets[a] + k];
                }
            }
            let mut next = vec![BigUint::zero(); pairs];
            for b in 0..self.state_count() {
                if inflow[b].is_zero() {
                    continue;
                }
                for (k, &(c, m)) in mult[b].iter().enumerate() {
                    // each walk arriving from c forbids one slot back into c
                    let mut v = &inflow[b] * BigUint::from(m);
                    if let Some(p) = pair_of(c, b) {
                        v -= &cur[p];
                    }
                    next[offsets[b] + k] = v;
                }
            }
            cur = next;
            out.push(closing(&cur));
        }
        out
    }
}

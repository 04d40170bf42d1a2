//! Schreier coset graphs: Stallings cores for subgroups of free groups and
//! bounded coset balls over presented hosts.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presentations::{
    ball_from_states, quotient_ball, AbelianInvariant, BallGraph, Presentation, WordOracle,
    DEFAULT_VERTEX_BUDGET,
};
use crate::words::{Letter, MarkedAlphabet, Word};

/// Folded, trimmed, based labeled graph. Vertex 0 is the base; vertices are
/// numbered by BFS from the base in letter order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreGraph {
    degree: usize,
    targets: Vec<Option<u32>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexInfo {
    Finite(usize),
    Infinite,
}

impl CoreGraph {
    /// The trivial subgroup: one base vertex, no edges.
    pub fn trivial(degree: usize) -> CoreGraph {
        CoreGraph {
            degree,
            targets: vec![None; degree],
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn vertex_count(&self) -> usize {
        self.targets.len() / self.degree
    }

    /// Positive-letter edges; a loop counts once.
    pub fn edge_count(&self) -> usize {
        self.targets
            .iter()
            .enumerate()
            .filter(|(i, t)| i % 2 == 0 && t.is_some())
            .count()
    }

    pub fn rank(&self) -> usize {
        self.edge_count() + 1 - self.vertex_count()
    }

    #[inline]
    pub fn target(&self, v: usize, x: Letter) -> Option<usize> {
        self.targets[v * self.degree + x.index()].map(|t| t as usize)
    }

    /// Filled slots at `v`; a loop fills two.
    pub fn valence(&self, v: usize) -> usize {
        (0..self.degree)
            .filter(|&i| self.targets[v * self.degree + i].is_some())
            .count()
    }

    pub fn read(&self, start: usize, w: &Word) -> Option<usize> {
        w.letters()
            .iter()
            .try_fold(start, |v, &x| self.target(v, x))
    }

    /// Reads an already reduced letter sequence from the base.
    #[inline]
    pub fn accepts_reduced(&self, w: &[Letter]) -> bool {
        let mut v = 0;
        for &x in w {
            match self.targets[v * self.degree + x.index()] {
                Some(t) => v = t as usize,
                None => return false,
            }
        }
        v == 0
    }

    /// Whether the reduced form of `w` is the label of a closed based path.
    pub fn membership(&self, w: &Word) -> bool {
        self.read(0, &w.free_reduce()) == Some(0)
    }

    pub fn index_info(&self) -> IndexInfo {
        if self.targets.iter().all(Option::is_some) {
            IndexInfo::Finite(self.vertex_count())
        } else {
            IndexInfo::Infinite
        }
    }

    /// Shortlex-least labels of paths from the base, by BFS in letter order.
    pub fn base_paths(&self) -> Vec<Word> {
        let n = self.vertex_count();
        let mut paths: Vec<Option<Word>> = vec![None; n];
        paths[0] = Some(Word::empty());
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            for x in (0..self.degree).map(Letter::from_index) {
                if let Some(u) = self.target(v, x) {
                    if paths[u].is_none() {
                        let mut p = paths[v].clone().unwrap();
                        p.push(x);
                        paths[u] = Some(p);
                        queue.push_back(u);
                    }
                }
            }
        }
        paths.into_iter().map(Option::unwrap).collect()
    }

    /// A free basis read off a BFS spanning tree, one word per non-tree
    /// positive edge, in (vertex, letter) order.
    pub fn free_basis(&self) -> Vec<Word> {
        let paths = self.base_paths();
        let mut tree = HashSet::new();
        for (u, p) in paths.iter().enumerate().skip(1) {
            let x = *p.letters().last().unwrap();
            let v = self.target(u, x.inverse()).unwrap();
            tree.insert((v, x.index()));
            tree.insert((u, x.inverse().index()));
        }
        let mut out = Vec::new();
        for v in 0..self.vertex_count() {
            for i in (0..self.degree).step_by(2) {
                if let Some(u) = self.targets[v * self.degree + i] {
                    if !tree.contains(&(v, i)) {
                        let x = Letter::from_index(i);
                        let w = paths[v].concat(&Word::single(x)).concat(&paths[u as usize].inverse());
                        out.push(w.free_reduce());
                    }
                }
            }
        }
        out
    }

    /// Structural checks: both-direction determinism and the core property.
    pub fn check_invariants(&self) -> Result<()> {
        for v in 0..self.vertex_count() {
            for x in (0..self.degree).map(Letter::from_index) {
                if let Some(u) = self.target(v, x) {
                    if self.target(u, x.inverse()) != Some(v) {
                        return Err(Error::Invariant(format!("core edge {v}->{u} lacks inverse")));
                    }
                }
            }
            if v != 0 && self.valence(v) < 2 {
                return Err(Error::Invariant(format!("core vertex {v} has a hanging edge")));
            }
        }
        Ok(())
    }

    /// Trims hanging trees (non-base vertices of valence ≤ 1) and renumbers
    /// the base component by BFS. Outgoing slots must already be consistent.
    pub(crate) fn from_slots(degree: usize, mut slots: Vec<Vec<Option<usize>>>, base: usize) -> CoreGraph {
        let n = slots.len();
        let valence = |s: &Vec<Option<usize>>| s.iter().filter(|t| t.is_some()).count();
        let mut alive = vec![true; n];
        let mut stack: Vec<usize> = (0..n).filter(|&v| v != base && valence(&slots[v]) <= 1).collect();
        while let Some(v) = stack.pop() {
            if !alive[v] {
                continue;
            }
            alive[v] = false;
            for i in 0..degree {
                if let Some(u) = slots[v][i].take() {
                    if u != v {
                        slots[u][i ^ 1] = None;
                        if u != base && alive[u] && valence(&slots[u]) <= 1 {
                            stack.push(u);
                        }
                    }
                }
            }
        }
        let mut id = vec![usize::MAX; n];
        let mut order = vec![base];
        id[base] = 0;
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for i in 0..degree {
                if let Some(u) = slots[v][i] {
                    if id[u] == usize::MAX {
                        id[u] = order.len();
                        order.push(u);
                    }
                }
            }
        }
        let mut targets = Vec::with_capacity(order.len() * degree);
        for &v in &order {
            for i in 0..degree {
                targets.push(slots[v][i].map(|u| id[u] as u32));
            }
        }
        CoreGraph { degree, targets }
    }
}

/// Folds the bouquet of generator petals into the Stallings core.
pub fn stallings_core(alphabet: &MarkedAlphabet, generators: &[Word]) -> CoreGraph {
    let degree = alphabet.degree();
    let mut f = Folder::new(degree);
    for g in generators {
        let g = g.free_reduce();
        if g.is_empty() {
            continue;
        }
        let mut cur = 0;
        let n = g.len();
        for (i, &x) in g.letters().iter().enumerate() {
            let next = if i + 1 == n { 0 } else { f.add_vertex() };
            f.add_edge(cur, x, next);
            cur = next;
        }
    }
    f.finish()
}

/// Union-find folding with a worklist of label clashes.
struct Folder {
    degree: usize,
    parent: Vec<usize>,
    slots: Vec<Vec<Option<usize>>>,
    pending: Vec<(usize, usize)>,
}

impl Folder {
    fn new(degree: usize) -> Folder {
        Folder {
            degree,
            parent: vec![0],
            slots: vec![vec![None; degree]],
            pending: Vec::new(),
        }
    }

    fn add_vertex(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.slots.push(vec![None; self.degree]);
        self.parent.len() - 1
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn set_slot(&mut self, u: usize, i: usize, v: usize) {
        match self.slots[u][i] {
            None => self.slots[u][i] = Some(v),
            Some(w) => self.pending.push((w, v)),
        }
    }

    fn add_edge(&mut self, u: usize, x: Letter, v: usize) {
        let (u, v) = (self.find(u), self.find(v));
        self.set_slot(u, x.index(), v);
        self.set_slot(v, x.inverse().index(), u);
        self.drain();
    }

    fn drain(&mut self) {
        while let Some((a, b)) = self.pending.pop() {
            let (a, b) = (self.find(a), self.find(b));
            if a == b {
                continue;
            }
            // the smaller id survives so the base stays a root
            let (keep, gone) = if a < b { (a, b) } else { (b, a) };
            self.parent[gone] = keep;
            let moved = std::mem::take(&mut self.slots[gone]);
            for (i, t) in moved.into_iter().enumerate() {
                if let Some(t) = t {
                    self.set_slot(keep, i, t);
                }
            }
        }
    }

    fn finish(mut self) -> CoreGraph {
        let n = self.parent.len();
        let roots: Vec<usize> = (0..n).filter(|&v| self.find(v) == v).collect();
        let mut id = vec![usize::MAX; n];
        for (k, &r) in roots.iter().enumerate() {
            id[r] = k;
        }
        let mut slots = vec![vec![None; self.degree]; roots.len()];
        for (k, &r) in roots.iter().enumerate() {
            for i in 0..self.degree {
                if let Some(t) = self.slots[r][i] {
                    let t = self.find(t);
                    slots[k][i] = Some(id[t]);
                }
            }
        }
        CoreGraph::from_slots(self.degree, slots, 0)
    }
}

pub fn membership(core: &CoreGraph, w: &Word) -> bool {
    core.membership(w)
}

/// Core of `H₁ ∩ H₂`: the based component of the product graph, trimmed.
pub fn intersect_cores(c1: &CoreGraph, c2: &CoreGraph) -> CoreGraph {
    assert_eq!(c1.degree, c2.degree, "cores over different alphabets");
    let degree = c1.degree;
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pairs = vec![(0, 0)];
    index.insert((0, 0), 0);
    let mut slots: Vec<Vec<Option<usize>>> = Vec::new();
    let mut head = 0;
    while head < pairs.len() {
        let (p, q) = pairs[head];
        let mut row = vec![None; degree];
        for x in (0..degree).map(Letter::from_index) {
            if let (Some(p2), Some(q2)) = (c1.target(p, x), c2.target(q, x)) {
                let next = pairs.len();
                let t = *index.entry((p2, q2)).or_insert(next);
                if t == next {
                    pairs.push((p2, q2));
                }
                row[x.index()] = Some(t);
            }
        }
        slots.push(row);
        head += 1;
    }
    CoreGraph::from_slots(degree, slots, 0)
}

pub fn subgroup_index_info(core: &CoreGraph) -> IndexInfo {
    core.index_info()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchreierMode {
    ExactFree,
    BoundedCoset,
}

/// Bounds for subgroup membership over a presented host.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CosetBudget {
    /// Maximal number of generator factors in a product.
    pub products: usize,
    /// Maximal number of distinct subgroup elements kept.
    pub elements: usize,
    pub vertices: usize,
}

impl Default for CosetBudget {
    fn default() -> CosetBudget {
        CosetBudget {
            products: 6,
            elements: 200_000,
            vertices: DEFAULT_VERTEX_BUDGET,
        }
    }
}

/// Radius-`R` ball around the coset `H·1`, with provenance.
#[derive(Clone, Debug)]
pub struct SchreierBall {
    pub ball: BallGraph,
    pub mode: SchreierMode,
    pub certified: bool,
    pub host: Presentation,
    pub generators: Vec<Word>,
}

/// Vertex state of the Schreier graph of a free group: a core vertex, or a
/// hanging-tree vertex given by its core root and the reduced path out of it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum CosetState {
    Core(usize),
    Tree(usize, Word),
}

fn free_step(core: &CoreGraph, s: &CosetState, x: Letter) -> CosetState {
    match s {
        CosetState::Core(v) => match core.target(*v, x) {
            Some(u) => CosetState::Core(u),
            None => CosetState::Tree(*v, Word::single(x)),
        },
        CosetState::Tree(v, w) => {
            let mut w = w.clone();
            w.push_reduced(x);
            if w.is_empty() {
                CosetState::Core(*v)
            } else {
                CosetState::Tree(*v, w)
            }
        }
    }
}

pub fn schreier_ball(host: &Presentation, generators: &[Word], radius: usize) -> Result<SchreierBall> {
    schreier_ball_with_budget(host, generators, radius, CosetBudget::default())
}

pub fn schreier_ball_with_budget(
    host: &Presentation,
    generators: &[Word],
    radius: usize,
    budget: CosetBudget,
) -> Result<SchreierBall> {
    let alphabet = host.alphabet();
    for g in generators {
        alphabet.check_word(g)?;
    }
    let degree = alphabet.degree();
    if host.is_free() {
        let core = stallings_core(alphabet, generators);
        let ball = ball_from_states(degree, radius, budget.vertices, CosetState::Core(0), |s, x| {
            free_step(&core, s, x)
        })?;
        // outside the ball only hanging trees remain once the core fits
        let core_depth = core.base_paths().iter().map(Word::len).max().unwrap_or(0);
        let ball = ball.with_convex(core_depth <= radius);
        return Ok(SchreierBall {
            ball,
            mode: SchreierMode::ExactFree,
            certified: true,
            host: host.clone(),
            generators: generators.to_vec(),
        });
    }
    let oracle = BoundedMembership::new(host, generators, budget, 2 * radius + 1);
    let mut coset_words = host.relators().to_vec();
    coset_words.extend(generators.iter().cloned());
    let inv = AbelianInvariant::vanishing_on(alphabet.rank(), &coset_words);
    let ball = quotient_ball(
        degree,
        radius,
        budget.vertices,
        |w| host.reduce(w),
        |w| inv.key(w),
        |u, v| oracle.contains(&u.concat(&v.inverse())),
    )?;
    Ok(SchreierBall {
        ball,
        mode: SchreierMode::BoundedCoset,
        certified: oracle.saturated,
        host: host.clone(),
        generators: generators.to_vec(),
    })
}

/// Subgroup elements of a presented group found as products of at most
/// `products` generators, deduplicated in the group.
struct BoundedMembership<'a> {
    host: &'a Presentation,
    invariant: AbelianInvariant,
    elements: HashMap<Vec<i64>, Vec<Word>>,
    normals: HashSet<Word>,
    /// No new element of reduced length ≤ the horizon appeared at the last
    /// product depth and no budget was hit.
    saturated: bool,
}

impl<'a> BoundedMembership<'a> {
    fn new(host: &'a Presentation, generators: &[Word], budget: CosetBudget, horizon: usize) -> Self {
        let invariant = AbelianInvariant::vanishing_on(host.alphabet().rank(), host.relators());
        let mut m = BoundedMembership {
            host,
            invariant,
            elements: HashMap::new(),
            normals: HashSet::new(),
            saturated: false,
        };
        let mut factors: Vec<Word> = Vec::new();
        for g in generators {
            let g = host.reduce(g);
            if !g.is_empty() {
                factors.push(g.inverse().free_reduce());
                factors.push(g);
            }
        }
        m.insert(Word::empty());
        let mut frontier = vec![Word::empty()];
        let mut fresh_short = true;
        let mut overflow = false;
        for _ in 0..budget.products {
            fresh_short = false;
            let mut next = Vec::new();
            'outer: for h in &frontier {
                for f in &factors {
                    let w = host.reduce(&h.concat(f));
                    if m.find(&w) {
                        continue;
                    }
                    if m.normals.len() >= budget.elements {
                        overflow = true;
                        break 'outer;
                    }
                    fresh_short |= w.len() <= horizon;
                    m.insert(w.clone());
                    next.push(w);
                }
            }
            if overflow || next.is_empty() {
                break;
            }
            frontier = next;
        }
        m.saturated = !overflow && (!fresh_short || frontier.is_empty() || factors.is_empty());
        m
    }

    fn insert(&mut self, w: Word) {
        self.normals.insert(w.clone());
        self.elements.entry(self.invariant.key(&w)).or_default().push(w);
    }

    fn find(&self, w: &Word) -> bool {
        if self.normals.contains(w) {
            return true;
        }
        self.elements
            .get(&self.invariant.key(w))
            .is_some_and(|ws| ws.iter().any(|h| self.host.equal(w, h)))
    }

    fn contains(&self, w: &Word) -> bool {
        self.find(&self.host.reduce(w))
    }
}

/// Parses a subgroup file: one generator word per line, `#` comments.
pub fn parse_subgroup(alphabet: &MarkedAlphabet, text: &str) -> Result<Vec<Word>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let w = alphabet.parse_word_at(line).map_err(|(column, message)| Error::Parse {
            line: lineno + 1,
            column,
            message,
        })?;
        out.push(w);
    }
    Ok(out)
}

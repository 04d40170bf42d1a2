//! Hyperbolicity diagnostics restricted to a finite ball.
//!
//! Every estimate only uses pairs whose distance is certified exact by the
//! ball and, where geodesics are quantified over, pairs all of whose ambient
//! geodesics lie inside the ball. Configurations that fail these checks are
//! skipped and counted.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presentations::{BallDistance, BallGraph};
use crate::words::{Letter, Word};

/// A value in `½ℤ`, stored doubled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HalfInt {
    pub twice: i64,
}

impl HalfInt {
    pub fn from_int(n: i64) -> HalfInt {
        HalfInt { twice: 2 * n }
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn floor(self) -> i64 {
        self.twice.div_euclid(2)
    }

    pub fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }
}

impl std::fmt::Display for HalfInt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}.5", self.floor())
        }
    }
}

/// `(x,y)_z` from the three distances `d(z,x)`, `d(z,y)`, `d(x,y)`.
pub fn gromov_product(dzx: u32, dzy: u32, dxy: u32) -> Result<HalfInt> {
    let (a, b, c) = (dzx as i64, dzy as i64, dxy as i64);
    if a > b + c || b > a + c || c > a + b {
        return Err(Error::InconsistentMetric([dzx, dzy, dxy]));
    }
    Ok(HalfInt { twice: a + b - c })
}

pub const DISTANCE_TABLE_LIMIT: usize = 20_000;

/// All-pairs distances with exactness classification.
///
/// Built by [`DistanceTable::new`], a table holds in-ball distances and
/// certifies only some of them. Built by [`DistanceTable::host_metric`], it
/// holds the true distances of the Cayley graph between the vertices of a
/// smaller ball, all exact.
pub struct DistanceTable<'a> {
    ball: &'a BallGraph,
    n: usize,
    d: Vec<u16>,
    /// Radius of the inner ball for a host-metric table.
    host: Option<usize>,
}

impl<'a> DistanceTable<'a> {
    pub fn new(ball: &'a BallGraph) -> Result<DistanceTable<'a>> {
        let n = ball.vertex_count();
        if n > DISTANCE_TABLE_LIMIT {
            return Err(Error::Oversize {
                vertices: n,
                limit: DISTANCE_TABLE_LIMIT,
            });
        }
        let rows: Vec<Vec<u16>> = (0..n)
            .into_par_iter()
            .map(|v| ball.distances_from(v).into_iter().map(|d| d as u16).collect())
            .collect();
        Ok(DistanceTable {
            ball,
            n,
            d: rows.concat(),
            host: None,
        })
    }

    /// Cayley-graph distances between the vertices of depth at most
    /// `radius`, from a Cayley ball of radius at least `2·radius − 1`:
    /// `d(u, v) = |u⁻¹v|`, and the walk from the base reading `u⁻¹` then the
    /// representative of `v` can only step out of the big ball on its last
    /// letter, where the length is then one more than the big radius.
    pub fn host_metric(ball: &'a BallGraph, radius: usize) -> Result<DistanceTable<'a>> {
        if radius > 0 && ball.radius() + 1 < 2 * radius {
            return Err(Error::Precondition(format!(
                "host distances on the radius-{radius} ball need a Cayley ball of radius {}, got {}",
                2 * radius - 1,
                ball.radius()
            )));
        }
        let n = (0..ball.vertex_count()).take_while(|&v| ball.depth(v) <= radius).count();
        if (n..ball.vertex_count()).any(|v| ball.depth(v) <= radius) {
            return Err(Error::Invariant("ball vertices are not ordered by depth".into()));
        }
        if n > DISTANCE_TABLE_LIMIT {
            return Err(Error::Oversize {
                vertices: n,
                limit: DISTANCE_TABLE_LIMIT,
            });
        }
        // spanning tree of the inner ball along representatives
        let mut parent = vec![(0usize, Letter::from_index(0)); n];
        for v in 1..n {
            let rep = ball.rep(v).letters();
            let (&x, prefix) = rep.split_last().expect("only the base has an empty representative");
            let p = ball
                .find(&Word::from_letters(prefix.to_vec()))
                .filter(|&p| p < n && ball.target(p, x) == Some(v))
                .ok_or_else(|| Error::Invariant(format!("representative of vertex {v} is not a tree path")))?;
            parent[v] = (p, x);
        }
        let outside = (ball.radius() + 1) as u16;
        let rows: Result<Vec<Vec<u16>>> = (0..n)
            .into_par_iter()
            .map(|u| {
                let start = ball
                    .find(&ball.rep(u).inverse())
                    .ok_or_else(|| Error::Invariant("inverse representative leaves the ball".into()))?;
                let mut pos: Vec<Option<usize>> = vec![None; n];
                let mut row = vec![0u16; n];
                pos[0] = Some(start);
                row[0] = ball.depth(start) as u16;
                for v in 1..n {
                    let (p, x) = parent[v];
                    let from = pos[p].ok_or_else(|| Error::Invariant("walk left the ball early".into()))?;
                    pos[v] = ball.target(from, x);
                    row[v] = pos[v].map_or(outside, |w| ball.depth(w) as u16);
                }
                Ok(row)
            })
            .collect();
        Ok(DistanceTable {
            ball,
            n,
            d: rows?.concat(),
            host: Some(radius),
        })
    }

    pub fn ball(&self) -> &BallGraph {
        self.ball
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn in_ball(&self, u: usize, v: usize) -> u32 {
        self.d[u * self.n + v] as u32
    }

    /// Radius of the ball whose vertices the table covers.
    pub fn radius(&self) -> usize {
        self.host.unwrap_or_else(|| self.ball.radius())
    }

    /// Whether every table distance is a true distance.
    pub fn is_convex(&self) -> bool {
        self.host.is_some() || self.ball.is_convex()
    }

    pub fn get(&self, u: usize, v: usize) -> BallDistance {
        match self.host {
            Some(_) => BallDistance::Exact(self.in_ball(u, v)),
            None => self.ball.classify_distance(u, v, self.in_ball(u, v)),
        }
    }

    #[inline]
    pub fn exact(&self, u: usize, v: usize) -> Option<u32> {
        let d = self.in_ball(u, v);
        let escape = 2 * self.ball.radius() + 2;
        if self.is_convex() || (d as usize) + self.ball.depth(u) + self.ball.depth(v) <= escape {
            Some(d)
        } else {
            None
        }
    }

    /// Every ambient geodesic from `u` to `v` stays inside the ball.
    #[inline]
    pub fn geodesically_complete(&self, u: usize, v: usize) -> bool {
        let d = self.in_ball(u, v) as usize;
        let span = d + self.ball.depth(u) + self.ball.depth(v);
        match self.host {
            // a point on a geodesic is within (|u| + |v| + d)/2 of the base
            Some(r) => span <= 2 * r,
            None => self.ball.is_convex() || span < 2 * self.ball.radius() + 2,
        }
    }

    /// Vertices on geodesics from `z` to `x`, grouped by distance from `z`.
    pub fn interval(&self, z: usize, x: usize) -> Vec<Vec<usize>> {
        let dzx = self.in_ball(z, x) as usize;
        let mut levels = vec![Vec::new(); dzx + 1];
        levels[dzx].push(x);
        for t in (0..dzx).rev() {
            let mut next: Vec<usize> = Vec::new();
            for &w in &levels[t + 1] {
                for (_, u) in self.ball.neighbors(w) {
                    if u < self.n && self.in_ball(z, u) as usize == t && !next.contains(&u) {
                        next.push(u);
                    }
                }
            }
            next.sort_unstable();
            levels[t] = next;
        }
        levels
    }

    /// The shortlex-least geodesic path from `u` to `v` inside the ball.
    pub fn shortlex_geodesic(&self, u: usize, v: usize) -> Vec<usize> {
        let mut path = vec![u];
        let mut cur = u;
        while cur != v {
            let d = self.in_ball(cur, v);
            let (_, next) = self
                .ball
                .neighbors(cur)
                .find(|&(_, w)| w < self.n && self.in_ball(w, v) + 1 == d)
                .expect("a geodesic inside the table");
            path.push(next);
            cur = next;
        }
        path
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InscribedTriple {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    /// Distances `d(z,p)`, `d(x,r)`, `d(y,q)`: floors of the three products.
    pub positions: [u32; 3],
}

/// The inscribed triple on the shortlex geodesics `[z,x]`, `[z,y]`, `[x,y]`.
/// Half-integer products are rounded down, toward the vertex they are
/// measured from.
pub fn inscribed_triple(table: &DistanceTable, x: usize, y: usize, z: usize) -> Result<InscribedTriple> {
    let exact = |u, v| {
        table.exact(u, v).ok_or_else(|| {
            Error::Exactness(format!("distance between vertices {u} and {v} is not exact in the ball"))
        })
    };
    let (dzx, dzy, dxy) = (exact(z, x)?, exact(z, y)?, exact(x, y)?);
    if [(z, x), (z, y), (x, y)].iter().any(|&(u, v)| !table.geodesically_complete(u, v)) {
        return Err(Error::Exactness("a side of the triangle has geodesics leaving the ball".into()));
    }
    let at_z = gromov_product(dzx, dzy, dxy)?.floor() as usize;
    let at_x = gromov_product(dzx, dxy, dzy)?.floor() as usize;
    let at_y = gromov_product(dzy, dxy, dzx)?.floor() as usize;
    let zx = table.shortlex_geodesic(z, x);
    let zy = table.shortlex_geodesic(z, y);
    let xy = table.shortlex_geodesic(x, y);
    Ok(InscribedTriple {
        p: zx[at_z],
        q: zy[at_z],
        r: xy[at_x],
        positions: [at_z as u32, at_x as u32, at_y as u32],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApexMode {
    /// Every vertex serves as a triangle corner.
    All,
    /// Only the base; sufficient when the ambient graph is vertex-transitive.
    Base,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampling {
    Exhaustive,
    Sampled { seed: u64, count: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub delta: u32,
    pub tested: u64,
    pub skipped: u64,
    pub apex: ApexMode,
    pub sampling: Sampling,
    pub radius: usize,
}

/// The corner condition of a trim triangle at `z`: the largest distance
/// between points at equal distance `t ≤ (x,y)_z` from `z` on any pair of
/// geodesics `[z,x]`, `[z,y]`. `None` when the configuration is not fully
/// certified by the ball.
fn corner_width(
    table: &DistanceTable,
    z: usize,
    x: usize,
    y: usize,
    ix: &[Vec<usize>],
    iy: &[Vec<usize>],
) -> Option<u32> {
    let dzx = table.exact(z, x)?;
    let dzy = table.exact(z, y)?;
    let dxy = table.exact(x, y)?;
    let tmax = gromov_product(dzx, dzy, dxy).ok()?.floor() as usize;
    let mut best = 0;
    for t in 1..=tmax {
        for &w in &ix[t] {
            for &w2 in &iy[t] {
                best = best.max(table.exact(w, w2)?);
            }
        }
    }
    Some(best)
}

/// Least δ for which every tested configuration satisfies the trim
/// conditions. In sampled mode this is a lower bound for the exhaustive
/// value over the same population.
pub fn estimate_delta_trim(table: &DistanceTable, apex: ApexMode, sampling: Sampling) -> DeltaEstimate {
    let n = table.len();
    let apexes: Vec<usize> = match apex {
        ApexMode::All => (0..n).collect(),
        ApexMode::Base => vec![0],
    };
    let intervals_for = |z: usize| -> Vec<Option<Vec<Vec<usize>>>> {
        (0..n)
            .map(|x| table.geodesically_complete(z, x).then(|| table.interval(z, x)))
            .collect()
    };
    let fold = |(d1, t1, s1): (u32, u64, u64), (d2, t2, s2): (u32, u64, u64)| (d1.max(d2), t1 + t2, s1 + s2);
    let (delta, tested, skipped) = match sampling {
        Sampling::Exhaustive => apexes
            .par_iter()
            .map(|&z| {
                let iv = intervals_for(z);
                let mut acc = (0u32, 0u64, 0u64);
                for x in 0..n {
                    for y in x..n {
                        let r = match (&iv[x], &iv[y]) {
                            (Some(ix), Some(iy)) => corner_width(table, z, x, y, ix, iy),
                            _ => None,
                        };
                        acc = fold(acc, r.map_or((0, 0, 1), |d| (d, 1, 0)));
                    }
                }
                acc
            })
            .reduce(|| (0, 0, 0), fold),
        Sampling::Sampled { seed, count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let triples: Vec<(usize, usize, usize)> = (0..count)
                .map(|_| {
                    let z = apexes[rng.gen_range(0..apexes.len())];
                    (z, rng.gen_range(0..n), rng.gen_range(0..n))
                })
                .collect();
            triples
                .par_iter()
                .map(|&(z, x, y)| {
                    let ok = table.geodesically_complete(z, x) && table.geodesically_complete(z, y);
                    let r = if ok {
                        corner_width(table, z, x, y, &table.interval(z, x), &table.interval(z, y))
                    } else {
                        None
                    };
                    r.map_or((0, 0, 1), |d| (d, 1, 0))
                })
                .reduce(|| (0, 0, 0), fold)
        }
    };
    DeltaEstimate {
        delta,
        tested,
        skipped,
        apex,
        sampling,
        radius: table.radius(),
    }
}

/// Number of 4-tuples `(p,x,y,z)` with all distances exact that violate
/// `(x,y)_p ≥ min{(x,z)_p, (y,z)_p} − 2δ`, and the number checked. With
/// [`ApexMode::Base`] only `p` at the base is tried.
pub fn four_point_violations(table: &DistanceTable, delta: u32, apex: ApexMode) -> (u64, u64) {
    let n = table.len();
    let slack = 4 * delta as i64;
    let points = match apex {
        ApexMode::All => n,
        ApexMode::Base => n.min(1),
    };
    (0..points)
        .into_par_iter()
        .map(|p| {
            let mut bad = 0u64;
            let mut checked = 0u64;
            for x in 0..n {
                let Some(px) = table.exact(p, x) else { continue };
                for y in x..n {
                    let (Some(py), Some(xy)) = (table.exact(p, y), table.exact(x, y)) else {
                        continue;
                    };
                    let lhs = (px + py) as i64 - xy as i64;
                    for z in 0..n {
                        let (Some(pz), Some(xz), Some(yz)) = (table.exact(p, z), table.exact(x, z), table.exact(y, z))
                        else {
                            continue;
                        };
                        let a = (px + pz) as i64 - xz as i64;
                        let b = (py + pz) as i64 - yz as i64;
                        checked += 1;
                        if lhs < a.min(b) - slack {
                            bad += 1;
                        }
                    }
                }
            }
            (bad, checked)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpsilonEstimate {
    pub epsilon: u32,
    pub tested: u64,
    pub skipped: u64,
}

/// Distance from each vertex to `set`, when the ball certifies it.
fn set_distances(table: &DistanceTable, set: &[usize]) -> Vec<Option<u32>> {
    let ball = table.ball();
    (0..table.len())
        .map(|w| {
            let mut best: Option<u32> = None;
            let mut floor = u32::MAX;
            for &h in set {
                match table.exact(w, h) {
                    Some(d) => best = Some(best.map_or(d, |b| b.min(d))),
                    None => {
                        if let BallDistance::Bounds { lower, .. } = table.get(w, h) {
                            floor = floor.min(lower);
                        }
                    }
                }
            }
            let m = best?;
            // members outside the ball are at least this far away
            let outside = (table.radius() + 1 - ball.depth(w)) as u32;
            (m <= floor && (ball.is_convex() || m <= outside)).then_some(m)
        })
        .collect()
}

/// Largest distance from a vertex on any geodesic between two members of
/// `set` to the set itself.
pub fn quasiconvexity_epsilon(table: &DistanceTable, set: &[usize]) -> EpsilonEstimate {
    let dist = set_distances(table, set);
    let mut out = EpsilonEstimate {
        epsilon: 0,
        tested: 0,
        skipped: 0,
    };
    for (i, &h1) in set.iter().enumerate() {
        for &h2 in &set[i..] {
            if !table.geodesically_complete(h1, h2) {
                out.skipped += 1;
                continue;
            }
            let worst = table
                .interval(h1, h2)
                .iter()
                .flatten()
                .map(|&w| dist[w])
                .try_fold(0u32, |acc, d| d.map(|d| acc.max(d)));
            match worst {
                Some(e) => {
                    out.tested += 1;
                    out.epsilon = out.epsilon.max(e);
                }
                None => out.skipped += 1,
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetProduct {
    pub value: HalfInt,
    pub tested: u64,
    pub skipped: u64,
}

/// `(H,F)_1` over the members of both sets inside the ball.
pub fn set_gromov_product(table: &DistanceTable, hset: &[usize], fset: &[usize]) -> Result<SetProduct> {
    let base = table.ball().base();
    let mut out = SetProduct {
        value: HalfInt::from_int(0),
        tested: 0,
        skipped: 0,
    };
    for &h in hset {
        for &f in fset {
            match table.exact(h, f) {
                Some(d) => {
                    let g = gromov_product(table.in_ball(base, h), table.in_ball(base, f), d)?;
                    out.value = out.value.max(g);
                    out.tested += 1;
                }
                None => out.skipped += 1,
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deficiency {
    /// max of `|h| + |g| − |hg|`.
    pub k: u32,
    /// max of `(g,h)_1`.
    pub max_product: HalfInt,
    pub tested: u64,
    pub skipped: u64,
}

/// Deficiency of products `h·g` over the subgroup members in the ball, where
/// `g` is the vertex of a coset representative. `hset` must be closed under
/// inversion within the ball, which holds for a subgroup's members.
pub fn product_deficiency(table: &DistanceTable, hset: &[usize], g: usize) -> Result<Deficiency> {
    let ball = table.ball();
    let lg = ball.depth(g) as u32;
    let mut out = Deficiency {
        k: 0,
        max_product: HalfInt::from_int(0),
        tested: 0,
        skipped: 0,
    };
    for &h in hset {
        // |h⁻¹g| = d(h, g)
        let Some(d) = table.exact(h, g) else {
            out.skipped += 1;
            continue;
        };
        if d < lg {
            return Err(Error::Precondition(format!(
                "representative is not shortest in its coset: h = ({})⁻¹ gives |hg| = {d} < {lg}",
                ball.rep(h)
            )));
        }
        // with h⁻¹ in place of h: |h⁻¹| + |g| − |h⁻¹g| = 2(h,g)_1
        let lh = ball.depth(h) as u32;
        out.k = out.k.max(lh + lg - d);
        out.max_product = out.max_product.max(gromov_product(lh, lg, d)?);
        out.tested += 1;
    }
    Ok(out)
}

/// Vertices whose representative satisfies `member`.
pub fn members<F: Fn(&Word) -> bool>(table: &DistanceTable, member: F) -> Vec<usize> {
    (0..table.len()).filter(|&v| member(table.ball().rep(v))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presentations::Presentation;
    use crate::schreier::stallings_core;
    use crate::words::MarkedAlphabet;

    fn tree(r: usize) -> BallGraph {
        Presentation::free(MarkedAlphabet::standard(2)).cayley_ball(r).unwrap()
    }

    #[test]
    fn gromov_product_examples() {
        assert_eq!(gromov_product(3, 4, 5).unwrap(), HalfInt::from_int(1));
        assert_eq!(gromov_product(4, 4, 0).unwrap(), HalfInt::from_int(4));
        assert_eq!(gromov_product(1, 2, 2).unwrap().twice, 1);
        assert_eq!(gromov_product(1, 1, 5), Err(Error::InconsistentMetric([1, 1, 5])));
    }

    #[test]
    fn tree_products_are_distances_to_the_segment() {
        let b = tree(3);
        let t = DistanceTable::new(&b).unwrap();
        let n = b.vertex_count();
        for z in (0..n).step_by(3) {
            for x in (0..n).step_by(5) {
                for y in (0..n).step_by(7) {
                    let g = gromov_product(t.in_ball(z, x), t.in_ball(z, y), t.in_ball(x, y)).unwrap();
                    let seg = t.shortlex_geodesic(x, y);
                    let dz = seg.iter().map(|&w| t.in_ball(z, w)).min().unwrap();
                    assert_eq!(g, HalfInt::from_int(dz as i64));
                }
            }
        }
    }

    #[test]
    fn inscribed_triples() {
        let a = MarkedAlphabet::standard(2);
        let b = tree(3);
        let t = DistanceTable::new(&b).unwrap();
        let v = |s| b.find(&a.parse_word(s).unwrap()).unwrap();
        let tri = inscribed_triple(&t, v("a a"), v("b b"), 0).unwrap();
        assert_eq!((tri.p, tri.q), (0, 0));
        let tri = inscribed_triple(&t, v("a"), v("b"), v("a")).unwrap();
        assert_eq!((tri.p, tri.q, tri.positions[0]), (v("a"), v("a"), 0));
        // in a tree all three points are the median
        let tri = inscribed_triple(&t, v("a b"), v("a b'"), v("a' b")).unwrap();
        assert_eq!([tri.p, tri.q, tri.r], [v("a"); 3]);
    }

    #[test]
    fn trees_are_zero_trim() {
        for r in 0..=3 {
            let b = tree(r);
            let t = DistanceTable::new(&b).unwrap();
            let e = estimate_delta_trim(&t, ApexMode::All, Sampling::Exhaustive);
            assert_eq!(e.delta, 0);
            assert_eq!(e.skipped, 0);
        }
    }

    #[test]
    fn trim_detects_the_surface_bigon() {
        let p = Presentation::parse("alphabet: a b c d\nrelator: a b a' b' c d c' d'\n").unwrap();
        let b = p.cayley_ball(4).unwrap();
        let t = DistanceTable::new(&b).unwrap();
        let a = p.alphabet();
        let x = b.find(&a.parse_word("a b a' b'").unwrap()).unwrap();
        let iv = t.interval(0, x);
        assert_eq!(iv[2].len(), 2);
        assert_eq!(t.exact(iv[2][0], iv[2][1]), Some(4));
    }

    #[test]
    fn quasiconvexity_examples() {
        let a = MarkedAlphabet::standard(2);
        let b = tree(4);
        let t = DistanceTable::new(&b).unwrap();
        let all: Vec<usize> = (0..b.vertex_count()).collect();
        assert_eq!(quasiconvexity_epsilon(&t, &all).epsilon, 0);
        let h = stallings_core(&a, &[a.parse_word("a").unwrap()]);
        let hv = members(&t, |w| h.membership(w));
        assert_eq!(quasiconvexity_epsilon(&t, &hv).epsilon, 0);
        let h = stallings_core(&a, &[a.parse_word("a a").unwrap(), a.parse_word("b b").unwrap()]);
        let hv = members(&t, |w| h.membership(w));
        let e = quasiconvexity_epsilon(&t, &hv);
        assert_eq!(e.epsilon, 1);
        assert_eq!(e.skipped, 0);
    }

    #[test]
    fn set_product_examples() {
        let a = MarkedAlphabet::standard(2);
        let core = |s: &str| stallings_core(&a, &[a.parse_word(s).unwrap()]);
        for r in 2..=5 {
            let b = tree(r);
            let t = DistanceTable::new(&b).unwrap();
            let h = members(&t, |w| core("a").membership(w));
            let f = members(&t, |w| core("b").membership(w));
            let ab = members(&t, |w| core("a b").membership(w));
            assert_eq!(set_gromov_product(&t, &h, &f).unwrap().value, HalfInt::from_int(0));
            assert_eq!(set_gromov_product(&t, &h, &h).unwrap().value, HalfInt::from_int(r as i64));
            assert_eq!(set_gromov_product(&t, &h, &ab).unwrap().value, HalfInt::from_int(1));
        }
    }

    #[test]
    fn deficiency_examples() {
        let a = MarkedAlphabet::standard(2);
        let b = tree(5);
        let t = DistanceTable::new(&b).unwrap();
        let v = |s| b.find(&a.parse_word(s).unwrap()).unwrap();
        let ha = stallings_core(&a, &[a.parse_word("a").unwrap()]);
        let hv = members(&t, |w| ha.membership(w));
        assert_eq!(product_deficiency(&t, &hv, 0).unwrap().k, 0);
        assert_eq!(product_deficiency(&t, &hv, v("b")).unwrap().k, 0);
        assert!(matches!(product_deficiency(&t, &hv, v("a b")), Err(Error::Precondition(_))));
        let hab = stallings_core(&a, &[a.parse_word("a b").unwrap()]);
        let hv = members(&t, |w| hab.membership(w));
        let d = product_deficiency(&t, &hv, v("b'")).unwrap();
        assert_eq!(d.k, 2);
        assert_eq!(d.max_product.twice, d.k as i64);
    }

    #[test]
    fn host_metric_matches_certified_in_ball_distances() {
        let b = tree(5);
        let h = DistanceTable::host_metric(&b, 3).unwrap();
        let small = tree(3);
        let t = DistanceTable::new(&small).unwrap();
        assert_eq!(h.len(), t.len());
        for u in 0..t.len() {
            for v in 0..t.len() {
                assert_eq!(h.exact(u, v), t.exact(u, v));
            }
        }
        assert!(matches!(DistanceTable::host_metric(&b, 4), Err(Error::Precondition(_))));

        // surface group: every distance the big ball certifies agrees
        let p = Presentation::parse("alphabet: a b c d\nrelator: a b a' b' c d c' d'\n").unwrap();
        let big = p.cayley_ball(4).unwrap();
        let h = DistanceTable::host_metric(&big, 2).unwrap();
        let t = DistanceTable::new(&big).unwrap();
        for u in 0..h.len() {
            for v in 0..h.len() {
                let d = h.exact(u, v).unwrap();
                assert!(d <= t.in_ball(u, v));
                if let Some(e) = t.exact(u, v) {
                    assert_eq!(d, e);
                }
            }
        }
        // a b a' and d c d' are two apart around a relator
        let b5 = p.cayley_ball(5).unwrap();
        let h3 = DistanceTable::host_metric(&b5, 3).unwrap();
        let x = b5.find(&p.alphabet().parse_word("a b a'").unwrap()).unwrap();
        let y = b5.find(&p.alphabet().parse_word("d c d'").unwrap()).unwrap();
        assert_eq!(h3.exact(x, y), Some(2));
    }

    #[test]
    fn four_point_on_trees_and_the_surface() {
        let b = tree(3);
        let t = DistanceTable::new(&b).unwrap();
        let (bad, checked) = four_point_violations(&t, 0, ApexMode::All);
        assert_eq!(bad, 0);
        assert_eq!(checked, 53 * (53 * 54 / 2) * 53);
        let p = Presentation::parse("alphabet: a b c d\nrelator: a b a' b' c d c' d'\n").unwrap();
        let big = p.cayley_ball(5).unwrap();
        let h = DistanceTable::host_metric(&big, 3).unwrap();
        assert!(four_point_violations(&h, 0, ApexMode::Base).0 > 0);
        assert_eq!(four_point_violations(&h, 4, ApexMode::Base).0, 0);
    }
}

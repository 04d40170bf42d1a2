//! Random-walk return probabilities, spectral-radius estimation and
//! isoperimetric diagnostics.

mod isoperimetry;
mod walk;

pub use isoperimetry::{
    boundary, cheeger_search, doubling_check, for_each_connected_set, neighborhood, BoundaryRatio,
    CheegerMode, CheegerReport, DoublingFamily, DoublingReport, DoublingVerdict,
};
pub use walk::{ModelKind, WalkModel};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact return statistics of the simple random walk from the base.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnSeries {
    pub n_max: usize,
    pub degree: usize,
    /// Closed walks of length `n` at the base.
    pub returns: Vec<BigUint>,
    /// Walks of length `n` that have not left the model.
    pub alive: Vec<BigUint>,
    /// `returns[n] / degreeⁿ`.
    pub p: Vec<BigRational>,
    /// Largest `n` for which `p[n]` equals the ambient return probability;
    /// `None` when the model is itself the whole graph.
    pub exact_horizon: Option<usize>,
}

impl ReturnSeries {
    pub fn p_f64(&self, n: usize) -> f64 {
        self.p[n].to_f64().unwrap_or(0.0)
    }

    pub fn is_exact(&self, n: usize) -> bool {
        self.exact_horizon.is_none_or(|h| n <= h)
    }
}

/// Exact return series up to `n_max`, refusing past the exactness horizon.
pub fn return_probabilities(model: &WalkModel, n_max: usize) -> Result<ReturnSeries> {
    if let Some(h) = model.exact_horizon() {
        if n_max > h {
            return Err(Error::Exactness(format!(
                "n_max = {n_max} exceeds the exactness horizon {h} of the model"
            )));
        }
    }
    Ok(return_probabilities_truncated(model, n_max))
}

/// As [`return_probabilities`], but values past the horizon are computed on
/// the truncated model (mass leaving it is lost) and flagged through
/// `exact_horizon`.
pub fn return_probabilities_truncated(model: &WalkModel, n_max: usize) -> ReturnSeries {
    let (returns, alive) = model.walk_counts(n_max);
    let d = BigUint::from(model.degree());
    let mut p = Vec::with_capacity(n_max + 1);
    let mut denom = BigUint::one();
    for b in &returns {
        p.push(BigRational::new(b.clone().into(), denom.clone().into()));
        denom *= &d;
    }
    ReturnSeries {
        n_max,
        degree: model.degree(),
        returns,
        alive,
        p,
        exact_horizon: model.exact_horizon(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RhoMethod {
    /// Richardson extrapolation of the ratios `p₂ₙ₊₂ / p₂ₙ` in powers of `1/n`.
    EvenRatioRichardson,
    RootTest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub rho_hat: f64,
    pub method: RhoMethod,
    /// `p₂ₘ^(1/2m)` at the largest even `2m ≤ n_max`.
    pub root_test: f64,
    /// `sqrt(p₂ₘ / p₂ₘ₋₂)` at the same `m`.
    pub last_ratio: f64,
    /// Even indices where `p₂ₙ^(1/2n)` increased; a limsup need not be
    /// approached monotonically, so these are reported only.
    pub root_increases: Vec<usize>,
    pub note: String,
}

pub const RICHARDSON_ORDER: usize = 4;
pub const MIN_EVEN_TERMS: usize = 8;

/// Spectral radius from the even subsequence: only even returns are
/// nonzero on bipartite graphs, and `p₂ₙ₊₂/p₂ₙ → ρ²`.
pub fn estimate_rho(series: &ReturnSeries) -> Result<SpectralEstimate> {
    let even: Vec<&BigRational> = series.p.iter().step_by(2).collect();
    if even.len() < MIN_EVEN_TERMS {
        return Err(Error::Precondition(format!(
            "{} even terms, at least {MIN_EVEN_TERMS} needed",
            even.len()
        )));
    }
    if even[1..].iter().all(|p| p.is_zero()) {
        return Err(Error::Degenerate("all even return probabilities past p_0 vanish".into()));
    }
    // ratios s_m = p_{2m+2}/p_{2m} over the nonzero tail
    let start = (0..even.len()).find(|&m| m > 0 && !even[m].is_zero()).unwrap();
    let ratios: Vec<(usize, f64)> = (start..even.len() - 1)
        .filter(|&m| !even[m].is_zero())
        .map(|m| (m, (even[m + 1] / even[m]).to_f64().unwrap_or(0.0)))
        .collect();
    let mmax = even.len() - 1;
    let root_test = even[mmax]
        .to_f64()
        .map(|p| if p > 0.0 { p.powf(1.0 / (2 * mmax) as f64) } else { 0.0 })
        .unwrap_or(0.0);
    let last_ratio = ratios.last().map_or(0.0, |&(_, s)| s.max(0.0).sqrt());
    let mut root_increases = Vec::new();
    let mut prev = f64::INFINITY;
    for (m, p) in even.iter().enumerate().skip(1) {
        let r = p.to_f64().unwrap_or(0.0).powf(1.0 / (2 * m) as f64);
        if r > prev + 1e-15 {
            root_increases.push(2 * m);
        }
        prev = r;
    }
    let order = RICHARDSON_ORDER.min(ratios.len().saturating_sub(1));
    let (rho_hat, method, note) = if order >= 1 {
        let window = &ratios[ratios.len() - order - 1..];
        let limit = richardson(window, order);
        let rho = limit.max(0.0).sqrt();
        (
            rho,
            RhoMethod::EvenRatioRichardson,
            format!(
                "order-{order} Richardson on p_(2m+2)/p_(2m), m = {}..{}",
                window[0].0,
                window[order].0
            ),
        )
    } else {
        (root_test, RhoMethod::RootTest, "too few nonzero ratios; raw root test".into())
    };
    let clamp = |r: f64| if r.is_finite() { r.clamp(f64::MIN_POSITIVE, 1.0) } else { 1.0 };
    Ok(SpectralEstimate {
        rho_hat: clamp(rho_hat),
        method,
        root_test: clamp(root_test),
        last_ratio,
        root_increases,
        note,
    })
}

/// Eliminates the first `order` terms of an expansion `L + c₁/m + c₂/m² + …`
/// from `order + 1` consecutive samples `(m, s_m)`.
fn richardson(samples: &[(usize, f64)], order: usize) -> f64 {
    let m0 = samples[0].0 as f64;
    let mut acc = 0.0;
    for (j, &(_, s)) in samples.iter().enumerate().take(order + 1) {
        let sign = if (order + j).is_multiple_of(2) { 1.0 } else { -1.0 };
        let binom = (0..j).fold(1.0, |b, i| b * (order - i) as f64 / (i + 1) as f64);
        acc += sign * binom * (m0 + j as f64).powi(order as i32) * s;
    }
    (1..=order).fold(acc, |a, i| a / i as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSeries {
    pub n_max: usize,
    pub walks: u64,
    pub seed: u64,
    pub p_hat: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Walks that had left the model by step `n`; they count as non-returns.
    pub censored: Vec<u64>,
    pub censoring_warning: bool,
}

pub const MC_BLOCK: u64 = 4096;

/// Seeded simulation in fixed blocks, each with its own ChaCha stream, so
/// the result does not depend on the number of worker threads.
pub fn monte_carlo_returns(model: &WalkModel, n_max: usize, walks: u64, seed: u64) -> Result<MonteCarloSeries> {
    if walks == 0 {
        return Err(Error::Precondition("at least one walk is required".into()));
    }
    let blocks = walks.div_ceil(MC_BLOCK);
    let degree = model.degree();
    let tallies: Vec<(Vec<u64>, Vec<u64>)> = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(blk);
            let count = MC_BLOCK.min(walks - blk * MC_BLOCK);
            let mut hits = vec![0u64; n_max + 1];
            let mut gone = vec![0u64; n_max + 1];
            for _ in 0..count {
                let mut s = 0usize;
                hits[0] += 1;
                for n in 1..=n_max {
                    match model.step(s, rng.gen_range(0..degree)) {
                        Some(t) => {
                            s = t;
                            if s == 0 {
                                hits[n] += 1;
                            }
                        }
                        None => {
                            for g in &mut gone[n..] {
                                *g += 1;
                            }
                            break;
                        }
                    }
                }
            }
            (hits, gone)
        })
        .collect();
    let mut hits = vec![0u64; n_max + 1];
    let mut censored = vec![0u64; n_max + 1];
    for (h, g) in tallies {
        for n in 0..=n_max {
            hits[n] += h[n];
            censored[n] += g[n];
        }
    }
    let w = walks as f64;
    let p_hat: Vec<f64> = hits.iter().map(|&h| h as f64 / w).collect();
    let std_err = p_hat.iter().map(|&p| (p * (1.0 - p) / w).sqrt()).collect();
    let censoring_warning = censored.iter().any(|&c| 2 * c > walks);
    Ok(MonteCarloSeries {
        n_max,
        walks,
        seed,
        p_hat,
        std_err,
        censored,
        censoring_warning,
    })
}

/// `a_n`: closed non-backtracking walks of length `n` at the base, for
/// `n = 0..=n_max`.
pub fn nonbacktracking_returns(model: &WalkModel, n_max: usize) -> Vec<BigUint> {
    model.nonbacktracking_counts(n_max)
}

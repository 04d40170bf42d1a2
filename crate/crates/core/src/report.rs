//! Instance configuration, the diagnostics pipeline and its exports.
//!
//! A run is deterministic in `(config, seed)`; the canonical JSON form has
//! sorted keys and every float rounded to 12 significant digits, so two runs
//! compare byte for byte.

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_rational::BigRational;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::amenability::{
    cheeger_search, doubling_check, estimate_rho, monte_carlo_returns, return_probabilities, BoundaryRatio,
    CheegerMode, CheegerReport, DoublingFamily, DoublingVerdict, ModelKind, MonteCarloSeries, ReturnSeries,
    SpectralEstimate, WalkModel,
};
use crate::cogrowth::{
    bartholdi_rho, count_closed_paths, crosscheck_word_counts, return_identity_holds, subgroup_alpha_exact,
    verify_growth_bounds, AlphaEstimate, GrowthBoundsReport, WordCrosscheck,
};
use crate::error::{Error, Result};
use crate::geometry::{
    estimate_delta_trim, four_point_violations, members, quasiconvexity_epsilon, ApexMode, DeltaEstimate,
    DistanceTable, EpsilonEstimate, Sampling,
};
use crate::presentations::{BallGraph, Presentation, DEFAULT_VERTEX_BUDGET};
use crate::schreier::{
    parse_subgroup, schreier_ball_with_budget, stallings_core, CoreGraph, CosetBudget, IndexInfo, SchreierBall,
    SchreierMode,
};
use crate::separation::{construct_separated_free, find_separated_cyclic, SeparatedConstruction};
use crate::words::{Letter, MarkedAlphabet, Word};

pub const DOT_VERTEX_LIMIT: usize = 5000;
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HostSpec {
    Free { rank: usize },
    /// Presentation text: an `alphabet:` line and `relator:` lines.
    Presented { text: String },
}

impl HostSpec {
    /// Closed orientable surface group of the given genus.
    pub fn surface(genus: usize) -> HostSpec {
        let names: Vec<String> = (0..2 * genus).map(|i| ((b'a' + i as u8) as char).to_string()).collect();
        let relator: Vec<String> = (0..genus)
            .flat_map(|g| {
                let (x, y) = (&names[2 * g], &names[2 * g + 1]);
                [x.clone(), y.clone(), format!("{x}'"), format!("{y}'")]
            })
            .collect();
        HostSpec::Presented {
            text: format!("alphabet: {}\nrelator: {}\n", names.join(" "), relator.join(" ")),
        }
    }

    pub fn build(&self) -> Result<Presentation> {
        match self {
            HostSpec::Free { rank } => {
                if *rank == 0 {
                    return Err(Error::Precondition("free host needs at least one generator".into()));
                }
                Ok(Presentation::free(MarkedAlphabet::standard(*rank)))
            }
            HostSpec::Presented { text } => Presentation::parse(text),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubgroupSpec {
    /// One word per entry, in the host's letter names.
    Generators { words: Vec<String> },
    /// Kernel of the map sending `generator` to 1 and the other generators to
    /// 0, truncated to the conjugates `xⁱ·y·x⁻ⁱ` with `|i| ≤ truncation`
    /// (default radius + 2, where the balls agree with the full kernel's).
    Kernel { generator: usize, truncation: Option<usize> },
}

impl SubgroupSpec {
    pub fn words(list: &[&str]) -> SubgroupSpec {
        SubgroupSpec::Generators {
            words: list.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn generators(&self, alphabet: &MarkedAlphabet, radius: usize) -> Result<Vec<Word>> {
        match self {
            SubgroupSpec::Generators { words } => parse_subgroup(alphabet, &words.join("\n")),
            SubgroupSpec::Kernel { generator, truncation } => {
                if *generator >= alphabet.rank() {
                    return Err(Error::Precondition(format!("no generator with index {generator}")));
                }
                let t = truncation.unwrap_or(radius + 2) as i64;
                let x = Word::single(Letter::positive(*generator));
                let mut out = Vec::new();
                for y in alphabet.positive_letters().filter(|l| l.generator() != *generator) {
                    for i in -t..=t {
                        let c = x.pow(i);
                        out.push(c.mul(&Word::single(y)).mul(&c.inverse()));
                    }
                }
                Ok(out)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Largest ρ̂ compatible with a non-amenable verdict.
    pub rho_nonamenable: f64,
    /// Smallest ρ̂ compatible with an amenable-looking verdict.
    pub rho_amenable: f64,
    /// Følner ratio at or below which a set counts as almost invariant.
    pub folner: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            rho_nonamenable: 0.97,
            rho_amenable: 0.98,
            folner: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheegerPlan {
    /// Exhaustive connected-set search up to this size; 0 skips it.
    pub exhaustive_max_size: usize,
    pub base_only: bool,
    /// Greedy growth from the base up to this size; 0 skips it.
    pub greedy_max_size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DoublingSets {
    Connected { max_size: usize, base_only: bool },
    /// For each `k`, the run of `4k` vertices `xⁱ`, `−2k ≤ i < 2k`.
    Intervals { generator: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoublingPlan {
    pub ks: Vec<usize>,
    pub sets: DoublingSets,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrosscheckPlan {
    pub reduced_n: usize,
    pub all_n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparationPlan {
    pub max_cyclic_len: usize,
    pub max_power: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub name: String,
    pub host: HostSpec,
    pub subgroup: SubgroupSpec,
    /// Walk radius; return probabilities are exact up to `2·radius`.
    pub radius: usize,
    pub n_max: usize,
    pub seed: u64,
    /// Vertex budget for every ball built.
    pub budget: usize,
    /// Radius of the ball used for isoperimetry and DOT export on free
    /// hosts; presented hosts use `radius`.
    pub iso_radius: usize,
    /// Radius of the host Cayley ball for the geometry estimates; 0 skips.
    pub geometry_radius: usize,
    pub cheeger: CheegerPlan,
    pub doubling: DoublingPlan,
    pub monte_carlo_walks: u64,
    pub crosscheck: CrosscheckPlan,
    pub separation: Option<SeparationPlan>,
    pub thresholds: Thresholds,
}

impl PipelineConfig {
    pub fn new(name: &str, host: HostSpec, subgroup: SubgroupSpec, radius: usize) -> PipelineConfig {
        PipelineConfig {
            name: name.to_string(),
            host,
            subgroup,
            radius,
            n_max: 2 * radius,
            seed: 1,
            budget: DEFAULT_VERTEX_BUDGET,
            iso_radius: radius.min(8),
            geometry_radius: radius.min(4),
            cheeger: CheegerPlan {
                exhaustive_max_size: 6,
                base_only: true,
                greedy_max_size: 32,
            },
            doubling: DoublingPlan {
                ks: vec![2],
                sets: DoublingSets::Connected {
                    max_size: 6,
                    base_only: true,
                },
            },
            monte_carlo_walks: 16_384,
            crosscheck: CrosscheckPlan { reduced_n: 10, all_n: 8 },
            separation: Some(SeparationPlan {
                max_cyclic_len: 6,
                max_power: 8,
            }),
            thresholds: Thresholds::default(),
        }
    }

    /// Named instances used by the acceptance suite and the CLI.
    pub fn instance(name: &str) -> Option<PipelineConfig> {
        let free2 = HostSpec::Free { rank: 2 };
        let nonamenable = |words: &[&str]| {
            let mut c = PipelineConfig::new(name, free2.clone(), SubgroupSpec::words(words), 12);
            c.iso_radius = 10;
            c.doubling.sets = DoublingSets::Connected {
                max_size: 6,
                base_only: false,
            };
            c
        };
        Some(match name {
            "tree" => {
                let mut c = PipelineConfig::new(name, free2, SubgroupSpec::words(&[]), 20);
                c.n_max = 40;
                c
            }
            "cyclic" => nonamenable(&["a"]),
            "squares" => nonamenable(&["a a", "b b"]),
            "commutator" => nonamenable(&["a b a' b'"]),
            "kernel" => {
                let sub = SubgroupSpec::Kernel {
                    generator: 0,
                    truncation: None,
                };
                let mut c = PipelineConfig::new(name, free2, sub, 30);
                c.iso_radius = 30;
                c.cheeger.greedy_max_size = 40;
                c.doubling = DoublingPlan {
                    ks: (1..=10).collect(),
                    sets: DoublingSets::Intervals { generator: 0 },
                };
                c
            }
            "full" => PipelineConfig::new(name, free2, SubgroupSpec::words(&["a", "b"]), 8),
            "surface" => {
                let mut c = PipelineConfig::new(name, HostSpec::surface(2), SubgroupSpec::words(&[]), 3);
                c.geometry_radius = 3;
                c.cheeger.exhaustive_max_size = 4;
                c.doubling.sets = DoublingSets::Connected {
                    max_size: 4,
                    base_only: true,
                };
                c.doubling.ks = vec![1];
                c
            }
            _ => return None,
        })
    }

    pub const INSTANCES: [&'static str; 7] = ["tree", "cyclic", "squares", "commutator", "kernel", "full", "surface"];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    /// Computed exactly from a certified finite structure.
    Exact,
    /// Finite-horizon estimate of an asymptotic quantity.
    Estimate,
    /// A bound over the configurations the ball certifies.
    Bound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measured<T> {
    pub value: T,
    pub tag: Tag,
    /// Radius or walk length the value was computed at.
    pub horizon: Option<usize>,
}

fn measured<T>(value: T, tag: Tag, horizon: Option<usize>) -> Measured<T> {
    Measured { value, tag, horizon }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rational {
    pub num: String,
    pub den: String,
}

impl From<&BigRational> for Rational {
    fn from(r: &BigRational) -> Self {
        Rational {
            num: r.numer().to_string(),
            den: r.denom().to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub name: String,
    pub host: String,
    pub free_host: bool,
    pub subgroup: Vec<String>,
    pub radius: usize,
    pub n_max: usize,
    pub seed: u64,
    pub budget: usize,
    pub index: Option<usize>,
    pub core_vertices: Option<usize>,
    pub core_rank: Option<usize>,
    pub ball_radius: usize,
    pub ball_vertices: usize,
    pub ball_mode: SchreierMode,
    pub ball_certified: bool,
    pub sphere_sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySection {
    pub radius: usize,
    pub ball_vertices: usize,
    pub delta: Measured<DeltaEstimate>,
    /// Four-point violations at δ̂, and 4-tuples checked.
    pub four_point: (u64, u64),
    pub subgroup_members: Option<usize>,
    pub epsilon: Option<Measured<EpsilonEstimate>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnSummary {
    pub model: ModelKind,
    pub states: usize,
    pub exact_horizon: Option<usize>,
    pub returns: Vec<String>,
    pub p: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheegerSummary {
    pub mode: CheegerMode,
    pub ratio: Measured<f64>,
    pub boundary: usize,
    pub size: usize,
    pub witness: Vec<String>,
    pub sets_examined: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingSummary {
    pub k: usize,
    pub supported: bool,
    /// Supported: largest set size covered. Refuted: size of the witness.
    pub size: usize,
    pub neighborhood: Option<usize>,
    pub sets_checked: Option<u64>,
    pub witness: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmenabilitySection {
    pub returns: ReturnSummary,
    pub spectral: Option<Measured<SpectralEstimate>>,
    pub monte_carlo: Option<MonteCarloSeries>,
    pub cheeger: Vec<CheegerSummary>,
    pub doubling: Vec<DoublingSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CogrowthSection {
    pub exact_horizon: Option<usize>,
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub alpha_hat: Measured<f64>,
    pub beta_hat: Measured<f64>,
    /// `bₙ = pₙ·dⁿ` for every `n` in the series.
    pub return_identity: bool,
    pub word_crosscheck: Option<WordCrosscheck>,
    pub alpha_exact: Option<Measured<AlphaEstimate>>,
    pub bartholdi_rho: Option<f64>,
    pub growth_bounds: Option<GrowthBoundsReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationSection {
    pub cyclic: Option<String>,
    pub construction: Option<SeparatedConstruction>,
    pub construction_words: Option<(String, String)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "non-amenable-consistent")]
    NonAmenableConsistent,
    #[serde(rename = "amenable-looking")]
    AmenableLooking,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::NonAmenableConsistent => "non-amenable-consistent",
            Verdict::AmenableLooking => "amenable-looking",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub instance: InstanceMeta,
    pub geometry: Option<GeometrySection>,
    pub amenability: AmenabilitySection,
    pub cogrowth: Option<CogrowthSection>,
    pub separation: Option<SeparationSection>,
    pub notes: Vec<String>,
    pub thresholds: Thresholds,
    pub verdict: Verdict,
}

/// Inputs of the verdict rule, pulled out of a report.
#[derive(Clone, Debug, PartialEq)]
pub struct VerdictInputs {
    pub rho_hat: Option<f64>,
    pub doubling_supported: Vec<bool>,
    pub best_folner: Option<f64>,
    pub free_host: bool,
    pub growth_bounds_pass: Option<bool>,
}

/// Non-amenable-consistent needs ρ̂ ≤ `rho_nonamenable`, doubling supported
/// for some tested `k` and, on free hosts, the growth bounds passing.
/// Amenable-looking needs ρ̂ ≥ `rho_amenable` and either doubling refuted
/// for every tested `k` or a Følner ratio at most `folner`.
pub fn decide_verdict(th: &Thresholds, v: &VerdictInputs) -> Verdict {
    let Some(rho) = v.rho_hat else {
        return Verdict::Inconclusive;
    };
    let supported = v.doubling_supported.iter().any(|&s| s);
    let all_refuted = !v.doubling_supported.is_empty() && !supported;
    let growth_ok = !v.free_host || v.growth_bounds_pass == Some(true);
    if rho <= th.rho_nonamenable && supported && growth_ok {
        Verdict::NonAmenableConsistent
    } else if rho >= th.rho_amenable && (all_refuted || v.best_folner.is_some_and(|f| f <= th.folner)) {
        Verdict::AmenableLooking
    } else {
        Verdict::Inconclusive
    }
}

impl DiagnosticsReport {
    pub fn verdict_inputs(&self) -> VerdictInputs {
        VerdictInputs {
            rho_hat: self.amenability.spectral.as_ref().map(|s| s.value.rho_hat),
            doubling_supported: self.amenability.doubling.iter().map(|d| d.supported).collect(),
            best_folner: self
                .amenability
                .cheeger
                .iter()
                .map(|c| c.ratio.value)
                .min_by(|a, b| a.total_cmp(b)),
            free_host: self.instance.free_host,
            growth_bounds_pass: self.cogrowth.as_ref().and_then(|c| c.growth_bounds.as_ref()).map(|c| c.pass),
        }
    }
}

/// A finished run: the report plus the ball it was computed on.
pub struct PipelineRun {
    pub report: DiagnosticsReport,
    pub ball: SchreierBall,
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<DiagnosticsReport> {
    Ok(execute(config)?.report)
}

/// Gate failures become report notes; anything else aborts the run.
fn gated<T>(r: Result<T>, notes: &mut Vec<String>, what: &str) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e @ (Error::Precondition(_) | Error::NotFound(_) | Error::Degenerate(_))) => {
            notes.push(format!("{what} skipped: {e}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn format_set(ball: &BallGraph, alphabet: &MarkedAlphabet, set: &[usize]) -> Vec<String> {
    set.iter().map(|&v| alphabet.format_word(ball.rep(v))).collect()
}

pub fn execute(config: &PipelineConfig) -> Result<PipelineRun> {
    let host = config.host.build().map_err(|e| e.in_stage("presentations", "host"))?;
    let alphabet = host.alphabet().clone();
    let free = host.is_free();
    let gens = config
        .subgroup
        .generators(&alphabet, config.radius)
        .map_err(|e| e.in_stage("schreier", "subgroup"))?;
    if !free && matches!(config.subgroup, SubgroupSpec::Kernel { .. }) {
        return Err(Error::Precondition("kernel subgroups are only built over free hosts".into())
            .in_stage("schreier", "subgroup"));
    }
    if config.n_max > 2 * config.radius {
        return Err(Error::Precondition(format!(
            "n_max = {} exceeds 2·radius = {}",
            config.n_max,
            2 * config.radius
        ))
        .in_stage("amenability", "config"));
    }
    let mut notes = Vec::new();
    let core = free.then(|| stallings_core(&alphabet, &gens));
    let index = core.as_ref().map(|c| c.index_info());
    let finite_index = matches!(index, Some(IndexInfo::Finite(_)));
    if let Some(IndexInfo::Finite(i)) = index {
        notes.push(format!("subgroup has finite index {i}: the coset graph is finite"));
    }

    let ball_radius = if free { config.iso_radius.min(config.radius) } else { config.radius };
    let budget = CosetBudget {
        vertices: config.budget,
        ..CosetBudget::default()
    };
    let sball = schreier_ball_with_budget(&host, &gens, ball_radius, budget).map_err(|e| e.in_stage("schreier", "ball"))?;
    if !sball.certified {
        notes.push("coset ball is not certified: membership was decided over bounded products".into());
    }
    let ball = &sball.ball;

    // amenability
    let model = match &core {
        Some(c) => WalkModel::from_core(c, config.radius),
        None => WalkModel::from_ball(ball),
    };
    let series = return_probabilities(&model, config.n_max).map_err(|e| e.in_stage("amenability", "returns"))?;
    let spectral = gated(estimate_rho(&series), &mut notes, "spectral estimate")
        .map_err(|e| e.in_stage("amenability", "spectral"))?
        .map(|s| measured(s, Tag::Estimate, Some(config.n_max)));
    let monte_carlo = if config.monte_carlo_walks > 0 {
        let mc = monte_carlo_returns(&model, config.n_max, config.monte_carlo_walks, config.seed)
            .map_err(|e| e.in_stage("amenability", "monte_carlo"))?;
        if mc.censoring_warning {
            notes.push("monte carlo: more than half of the walks left the model".into());
        }
        Some(mc)
    } else {
        None
    };
    let mut cheeger = Vec::new();
    let mut run_cheeger = |mode: CheegerMode, notes: &mut Vec<String>| -> Result<()> {
        if let Some(r) = gated(cheeger_search(ball, mode), notes, "cheeger search")
            .map_err(|e| e.in_stage("amenability", "cheeger"))?
        {
            cheeger.push(cheeger_summary(ball, &alphabet, &r, ball_radius));
        }
        Ok(())
    };
    if config.cheeger.exhaustive_max_size > 0 {
        run_cheeger(
            CheegerMode::ExhaustiveConnected {
                max_size: config.cheeger.exhaustive_max_size,
                base_only: config.cheeger.base_only,
            },
            &mut notes,
        )?;
    }
    if config.cheeger.greedy_max_size > 0 {
        run_cheeger(
            CheegerMode::GreedyFolner {
                start: ball.base(),
                max_size: config.cheeger.greedy_max_size,
            },
            &mut notes,
        )?;
    }
    let mut doubling = Vec::new();
    for &k in &config.doubling.ks {
        let family = match &config.doubling.sets {
            DoublingSets::Connected { max_size, base_only } => DoublingFamily::AllConnected {
                max_size: *max_size,
                base_only: *base_only,
            },
            DoublingSets::Intervals { generator } => {
                let set = interval_set(ball, *generator, 2 * k)
                    .ok_or_else(|| Error::Precondition(format!("interval of {} vertices leaves the ball", 4 * k)));
                match gated(set, &mut notes, "doubling interval").map_err(|e| e.in_stage("amenability", "doubling"))? {
                    Some(s) => DoublingFamily::Sets(vec![s]),
                    None => continue,
                }
            }
        };
        let r = gated(doubling_check(ball, k, &family), &mut notes, "doubling check")
            .map_err(|e| e.in_stage("amenability", "doubling"))?;
        if let Some(r) = r {
            doubling.push(match r.verdict {
                DoublingVerdict::Refuted {
                    witness,
                    size,
                    neighborhood,
                } => DoublingSummary {
                    k,
                    supported: false,
                    size,
                    neighborhood: Some(neighborhood),
                    sets_checked: None,
                    witness: format_set(ball, &alphabet, &witness),
                },
                DoublingVerdict::Supported { max_size, sets_checked } => DoublingSummary {
                    k,
                    supported: true,
                    size: max_size,
                    neighborhood: None,
                    sets_checked: Some(sets_checked),
                    witness: Vec::new(),
                },
            });
        }
    }

    let cogrowth = if finite_index {
        notes.push("cogrowth gate skipped: finite index".into());
        None
    } else {
        Some(cogrowth_section(&alphabet, core.as_ref(), &model, &series, config, &mut notes)?)
    };

    let geometry = if config.geometry_radius > 0 {
        Some(geometry_section(&host, core.as_ref(), config).map_err(|e| e.in_stage("geometry", "estimates"))?)
    } else {
        None
    };

    let separation = match (&core, &config.separation) {
        (Some(core), Some(plan)) if !finite_index => Some(separation_section(&alphabet, core, plan, &mut notes)?),
        _ => None,
    };

    let sphere_sizes = ball.sphere_sizes();
    let mut report = DiagnosticsReport {
        instance: InstanceMeta {
            name: config.name.clone(),
            host: host.to_text(),
            free_host: free,
            subgroup: gens.iter().map(|w| alphabet.format_word(w)).collect(),
            radius: config.radius,
            n_max: config.n_max,
            seed: config.seed,
            budget: config.budget,
            index: match index {
                Some(IndexInfo::Finite(i)) => Some(i),
                _ => None,
            },
            core_vertices: core.as_ref().map(CoreGraph::vertex_count),
            core_rank: core.as_ref().map(CoreGraph::rank),
            ball_radius,
            ball_vertices: ball.vertex_count(),
            ball_mode: sball.mode,
            ball_certified: sball.certified,
            sphere_sizes,
        },
        geometry,
        amenability: AmenabilitySection {
            returns: return_summary(&model, &series),
            spectral,
            monte_carlo,
            cheeger,
            doubling,
        },
        cogrowth,
        separation,
        notes,
        thresholds: config.thresholds,
        verdict: Verdict::Inconclusive,
    };
    report.verdict = decide_verdict(&config.thresholds, &report.verdict_inputs());
    let report = canonicalize(&report)?;
    Ok(PipelineRun { report, ball: sball })
}

fn cogrowth_section(
    alphabet: &MarkedAlphabet,
    core: Option<&CoreGraph>,
    model: &WalkModel,
    series: &ReturnSeries,
    config: &PipelineConfig,
    notes: &mut Vec<String>,
) -> Result<CogrowthSection> {
    let cs = count_closed_paths(model, config.n_max).map_err(|e| e.in_stage("cogrowth", "series"))?;
    let identity = return_identity_holds(&cs, series);
    if !identity {
        return Err(Error::Invariant("closed-path counts disagree with return probabilities".into())
            .in_stage("cogrowth", "identity"));
    }
    let mut section = CogrowthSection {
        exact_horizon: cs.exact_horizon,
        a: cs.a.iter().map(BigUint::to_string).collect(),
        b: cs.b.iter().map(BigUint::to_string).collect(),
        alpha_hat: measured(cs.alpha_hat, Tag::Estimate, Some(config.n_max)),
        beta_hat: measured(cs.beta_hat, Tag::Estimate, Some(config.n_max)),
        return_identity: identity,
        word_crosscheck: None,
        alpha_exact: None,
        bartholdi_rho: None,
        growth_bounds: None,
    };
    let Some(core) = core else {
        return Ok(section);
    };
    let wc = crosscheck_word_counts(alphabet, core, &cs, config.crosscheck.reduced_n, config.crosscheck.all_n)
        .map_err(|e| e.in_stage("cogrowth", "word_crosscheck"))?;
    section.word_crosscheck = Some(wc);
    // the trivial subgroup has no reduced loops: α = 0
    let alpha = if core.edge_count() > 0 {
        let a = subgroup_alpha_exact(core).map_err(|e| e.in_stage("cogrowth", "alpha"))?;
        section.alpha_exact = Some(measured(a, Tag::Exact, None));
        a.alpha
    } else {
        0.0
    };
    section.bartholdi_rho = gated(bartholdi_rho(alpha, alphabet.degree()), notes, "cogrowth formula")
        .map_err(|e| e.in_stage("cogrowth", "formula"))?;
    section.growth_bounds = gated(verify_growth_bounds(core), notes, "growth bounds").map_err(|e| e.in_stage("cogrowth", "growth_bounds"))?;
    Ok(section)
}

/// The cogrowth stage alone, on the same walk model the full pipeline uses.
pub fn run_cogrowth(config: &PipelineConfig) -> Result<(CogrowthSection, Vec<String>)> {
    let host = config.host.build().map_err(|e| e.in_stage("presentations", "host"))?;
    let alphabet = host.alphabet().clone();
    let gens = config
        .subgroup
        .generators(&alphabet, config.radius)
        .map_err(|e| e.in_stage("schreier", "subgroup"))?;
    let mut notes = Vec::new();
    let core = host.is_free().then(|| stallings_core(&alphabet, &gens));
    if let Some(IndexInfo::Finite(i)) = core.as_ref().map(CoreGraph::index_info) {
        return Err(Error::Precondition(format!("subgroup has finite index {i}; cogrowth gate closed"))
            .in_stage("cogrowth", "gate"));
    }
    let model = match &core {
        Some(c) => WalkModel::from_core(c, config.radius),
        None => {
            let budget = CosetBudget {
                vertices: config.budget,
                ..CosetBudget::default()
            };
            let sb = schreier_ball_with_budget(&host, &gens, config.radius, budget)
                .map_err(|e| e.in_stage("schreier", "ball"))?;
            WalkModel::from_ball(&sb.ball)
        }
    };
    let series = return_probabilities(&model, config.n_max).map_err(|e| e.in_stage("amenability", "returns"))?;
    let section = cogrowth_section(&alphabet, core.as_ref(), &model, &series, config, &mut notes)?;
    Ok((canonicalize(&section)?, notes))
}

fn return_summary(model: &WalkModel, series: &ReturnSeries) -> ReturnSummary {
    ReturnSummary {
        model: model.kind(),
        states: model.state_count(),
        exact_horizon: series.exact_horizon,
        returns: series.returns.iter().map(BigUint::to_string).collect(),
        p: series.p.iter().map(Rational::from).collect(),
    }
}

fn cheeger_summary(ball: &BallGraph, alphabet: &MarkedAlphabet, r: &CheegerReport, radius: usize) -> CheegerSummary {
    let BoundaryRatio { boundary, size } = r.best;
    CheegerSummary {
        mode: r.mode,
        ratio: measured(r.best.value(), Tag::Bound, Some(radius)),
        boundary,
        size,
        witness: format_set(ball, alphabet, &r.witness),
        sets_examined: r.sets_examined,
    }
}

/// Vertices `xⁱ` for `−half ≤ i < half`, when all lie in the ball.
fn interval_set(ball: &BallGraph, generator: usize, half: usize) -> Option<Vec<usize>> {
    let x = Letter::positive(generator);
    let mut out = vec![ball.base()];
    let mut v = ball.base();
    for _ in 1..half {
        v = ball.target(v, x)?;
        out.push(v);
    }
    let mut v = ball.base();
    for _ in 0..half {
        v = ball.target(v, x.inverse())?;
        out.push(v);
    }
    out.sort_unstable();
    out.dedup();
    Some(out)
}

fn geometry_section(host: &Presentation, core: Option<&CoreGraph>, config: &PipelineConfig) -> Result<GeometrySection> {
    let r = config.geometry_radius;
    // free Cayley balls are convex; otherwise read true distances off a
    // ball of twice the radius
    let big = if host.is_free() { r } else { 2 * r - 1 };
    let ball = host.cayley_ball_with_budget(big, config.budget)?;
    let table = if host.is_free() {
        DistanceTable::new(&ball)?
    } else {
        DistanceTable::host_metric(&ball, r)?
    };
    // Cayley graphs are vertex-transitive: corners at the base suffice
    let delta = estimate_delta_trim(&table, ApexMode::Base, Sampling::Exhaustive);
    let four_point = four_point_violations(&table, delta.delta, ApexMode::Base);
    let (subgroup_members, epsilon) = match core {
        Some(core) => {
            let set = members(&table, |w| core.membership(w));
            let eps = quasiconvexity_epsilon(&table, &set);
            (Some(set.len()), Some(measured(eps, Tag::Bound, Some(r))))
        }
        None => (None, None),
    };
    Ok(GeometrySection {
        radius: r,
        ball_vertices: table.len(),
        delta: measured(delta, Tag::Bound, Some(r)),
        four_point,
        subgroup_members,
        epsilon,
    })
}

fn separation_section(
    alphabet: &MarkedAlphabet,
    core: &CoreGraph,
    plan: &SeparationPlan,
    notes: &mut Vec<String>,
) -> Result<SeparationSection> {
    let cyclic = gated(find_separated_cyclic(alphabet, core, plan.max_cyclic_len), notes, "separated cyclic search")
        .map_err(|e| e.in_stage("separation", "find_cyclic"))?;
    let construction = gated(
        construct_separated_free(alphabet, core, plan.max_cyclic_len, plan.max_power),
        notes,
        "separated free construction",
    )
    .map_err(|e| e.in_stage("separation", "construct"))?;
    Ok(SeparationSection {
        cyclic: cyclic.map(|c| alphabet.format_word(&c)),
        construction_words: construction
            .as_ref()
            .map(|c| (alphabet.format_word(&c.x), alphabet.format_word(&c.y))),
        construction,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSummary {
    pub host: String,
    pub subgroup: Vec<String>,
    pub radius: usize,
    pub vertices: usize,
    pub edges: usize,
    pub sphere_sizes: Vec<usize>,
    pub mode: SchreierMode,
    pub certified: bool,
    pub convex: bool,
}

pub fn ball_summary(sb: &SchreierBall) -> BallSummary {
    let a = sb.host.alphabet();
    BallSummary {
        host: sb.host.to_text(),
        subgroup: sb.generators.iter().map(|w| a.format_word(w)).collect(),
        radius: sb.ball.radius(),
        vertices: sb.ball.vertex_count(),
        edges: sb.ball.edge_count(),
        sphere_sizes: sb.ball.sphere_sizes(),
        mode: sb.mode,
        certified: sb.certified,
        convex: sb.ball.is_convex(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreSummary {
    pub generators: Vec<String>,
    pub vertices: usize,
    pub edges: usize,
    pub rank: usize,
    /// `None` for infinite index.
    pub index: Option<usize>,
    pub free_basis: Vec<String>,
    /// `(vertex, letter, target)` for every positive edge.
    pub edge_list: Vec<(usize, String, usize)>,
}

pub fn core_summary(alphabet: &MarkedAlphabet, generators: &[Word], core: &CoreGraph) -> CoreSummary {
    let mut edge_list = Vec::new();
    for v in 0..core.vertex_count() {
        for x in alphabet.positive_letters() {
            if let Some(u) = core.target(v, x) {
                edge_list.push((v, alphabet.letter_name(x), u));
            }
        }
    }
    CoreSummary {
        generators: generators.iter().map(|w| alphabet.format_word(w)).collect(),
        vertices: core.vertex_count(),
        edges: core.edge_count(),
        rank: core.rank(),
        index: match core.index_info() {
            IndexInfo::Finite(i) => Some(i),
            IndexInfo::Infinite => None,
        },
        free_basis: core.free_basis().iter().map(|w| alphabet.format_word(w)).collect(),
        edge_list,
    }
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().unwrap());
            if let Some(m) = serde_json::Number::from_f64(x) {
                *n = m;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_floats),
        Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Invariant(format!("json: {e}"))
}

/// Canonical JSON: keys sorted, floats at 12 significant digits, two-space
/// indentation, trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(json_err)?;
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(json_err)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Malformed(format!("json: {e}")))
}

/// The value as it reads back from its canonical JSON.
pub fn canonicalize<T: Serialize + DeserializeOwned>(value: &T) -> Result<T> {
    serde_json::from_str(&to_canonical_json(value)?).map_err(json_err)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Csv,
    Dot,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            "dot" => Ok(ExportFormat::Dot),
            _ => Err(Error::Malformed(format!("unknown format `{s}` (json, csv or dot)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExportFile {
    pub name: String,
    pub contents: String,
}

pub fn export(run: &PipelineRun, format: ExportFormat) -> Result<Vec<ExportFile>> {
    let stem = &run.report.instance.name;
    Ok(match format {
        ExportFormat::Json => vec![ExportFile {
            name: format!("{stem}.json"),
            contents: to_canonical_json(&run.report)?,
        }],
        ExportFormat::Csv => export_csv(&run.report),
        ExportFormat::Dot => vec![ExportFile {
            name: format!("{stem}.dot"),
            contents: export_dot(&run.ball.ball, run.ball.host.alphabet())?,
        }],
    })
}

/// One file per series, one row per walk length `0..=n_max`.
pub fn export_csv(report: &DiagnosticsReport) -> Vec<ExportFile> {
    let stem = &report.instance.name;
    let r = &report.amenability.returns;
    let mut out = Vec::new();
    let mut s = String::from("n,returns,p_num,p_den,p,exact\n");
    for (n, (c, p)) in r.returns.iter().zip(&r.p).enumerate() {
        let pf = p.num.parse::<f64>().unwrap_or(f64::NAN) / p.den.parse::<f64>().unwrap_or(f64::NAN);
        let exact = r.exact_horizon.is_none_or(|h| n <= h);
        let _ = writeln!(s, "{n},{c},{},{},{:e},{exact}", p.num, p.den, round_significant(pf));
    }
    out.push(ExportFile {
        name: format!("{stem}_returns.csv"),
        contents: s,
    });
    if let Some(cg) = &report.cogrowth {
        let mut s = String::from("n,a,b\n");
        for (n, (a, b)) in cg.a.iter().zip(&cg.b).enumerate() {
            let _ = writeln!(s, "{n},{a},{b}");
        }
        out.push(ExportFile {
            name: format!("{stem}_cogrowth.csv"),
            contents: s,
        });
    }
    if let Some(mc) = &report.amenability.monte_carlo {
        let mut s = String::from("n,p_hat,std_err,censored\n");
        for n in 0..=mc.n_max {
            let _ = writeln!(s, "{n},{:e},{:e},{}", mc.p_hat[n], mc.std_err[n], mc.censored[n]);
        }
        out.push(ExportFile {
            name: format!("{stem}_monte_carlo.csv"),
            contents: s,
        });
    }
    out
}

/// Undirected DOT with one edge per positive letter; boundary vertices are
/// drawn as boxes.
pub fn export_dot(ball: &BallGraph, alphabet: &MarkedAlphabet) -> Result<String> {
    let n = ball.vertex_count();
    if n > DOT_VERTEX_LIMIT {
        return Err(Error::Oversize {
            vertices: n,
            limit: DOT_VERTEX_LIMIT,
        });
    }
    let mut s = String::from("graph ball {\n");
    for v in 0..n {
        let label = alphabet.format_word(ball.rep(v));
        let shape = if ball.is_interior(v) { "ellipse" } else { "box" };
        let _ = writeln!(s, "  v{v} [label=\"{label}\", shape={shape}];");
    }
    for v in 0..n {
        for x in alphabet.positive_letters() {
            if let Some(u) = ball.target(v, x) {
                let _ = writeln!(s, "  v{v} -- v{u} [label=\"{}\"];", alphabet.letter_name(x));
            }
        }
    }
    s.push_str("}\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_idempotent() {
        for x in [std::f64::consts::PI, 0.1 + 0.2, 1e-300, -123_456.789_012_345_67] {
            let r = round_significant(x);
            assert_eq!(round_significant(r), r);
            assert!((r - x).abs() <= x.abs() * 1e-11);
        }
    }

    #[test]
    fn canonical_json_sorts_keys() {
        let v: Value = serde_json::json!({"b": 1, "a": {"d": 0.1234567890123456, "c": 2}});
        let s = to_canonical_json(&v).unwrap();
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.contains("0.123456789012"));
        assert!(!s.contains("0.1234567890123"));
    }

    #[test]
    fn surface_host_text() {
        let p = HostSpec::surface(2).build().unwrap();
        assert_eq!(p.relators().len(), 1);
        assert!(p.metric().satisfies_c6());
    }

    #[test]
    fn kernel_generators() {
        let a = MarkedAlphabet::standard(2);
        let sub = SubgroupSpec::Kernel {
            generator: 0,
            truncation: Some(1),
        };
        let g: Vec<String> = sub.generators(&a, 0).unwrap().iter().map(|w| a.format_word(w)).collect();
        assert_eq!(g, ["a' b a", "b", "a b a'"]);
    }

    #[test]
    fn verdict_rule() {
        let th = Thresholds::default();
        let mut v = VerdictInputs {
            rho_hat: Some(0.87),
            doubling_supported: vec![true],
            best_folner: Some(1.0),
            free_host: true,
            growth_bounds_pass: Some(true),
        };
        assert_eq!(decide_verdict(&th, &v), Verdict::NonAmenableConsistent);
        v.growth_bounds_pass = None;
        assert_eq!(decide_verdict(&th, &v), Verdict::Inconclusive);
        v.rho_hat = Some(0.99);
        v.doubling_supported = vec![false, false];
        assert_eq!(decide_verdict(&th, &v), Verdict::AmenableLooking);
        v.rho_hat = None;
        assert_eq!(decide_verdict(&th, &v), Verdict::Inconclusive);
    }

    #[test]
    fn tree_dot_has_the_ball_size() {
        let p = HostSpec::Free { rank: 2 }.build().unwrap();
        let ball = p.cayley_ball(3).unwrap();
        let dot = export_dot(&ball, p.alphabet()).unwrap();
        assert_eq!(dot.matches("shape=").count(), 2 * 27 - 1);
        assert!(matches!(
            export_dot(&p.cayley_ball(8).unwrap(), p.alphabet()),
            Err(Error::Oversize { vertices: 13121, .. })
        ));
    }
}

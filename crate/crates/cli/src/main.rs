use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use cosetgraph::report::{
    ball_summary, core_summary, export, export_dot, run_cogrowth, run_pipeline, to_canonical_json, ExportFile,
    ExportFormat, HostSpec, PipelineConfig, SubgroupSpec,
};
use cosetgraph::schreier::{schreier_ball_with_budget, stallings_core, CosetBudget};
use cosetgraph::separation::{
    construct_separated_free, find_separated_cyclic, is_cyclic_conjugate_into, subgroups_conjugacy_separated,
};
use cosetgraph::{Error, MarkedAlphabet, Presentation, Result, Word};

#[derive(Parser)]
#[command(name = "cosetgraph", version, about = "Coset graphs of marked groups and their amenability diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Ball or walk radius.
    #[arg(long, global = true)]
    radius: Option<usize>,
    /// Longest walk length; defaults to twice the radius.
    #[arg(long, global = true)]
    n_max: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Vertex budget for ball construction.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// json, csv or dot.
    #[arg(long, global = true, default_value = "json")]
    format: String,
    /// Write files into this directory instead of printing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct Select {
    /// A named instance: tree, cyclic, squares, commutator, kernel, full, surface.
    #[arg(long)]
    instance: Option<String>,
    /// A JSON pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// free:K, surface:G, or a presentation file.
    #[arg(long)]
    host: Option<String>,
    /// Generators separated by `;`, or kernel[:T].
    #[arg(long)]
    subgroup: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a Cayley or Schreier ball and summarize it.
    BuildBall(Select),
    /// Fold a subgroup of a free group into its Stallings core.
    Schreier(Select),
    /// Run the full pipeline and print the report.
    Diagnose(Select),
    /// Closed-path counts and the growth-rate checks.
    Cogrowth(Select),
    /// Conjugacy separation over a free host.
    Separate {
        #[command(subcommand)]
        action: SeparateAction,
    },
    /// Run the pipeline and write the report in `--format`.
    Export(Select),
}

#[derive(Subcommand)]
enum SeparateAction {
    /// Is some power of `--cyclic` conjugate into H, or do H and `--other` meet after conjugation?
    Check {
        #[command(flatten)]
        select: Select,
        #[arg(long)]
        cyclic: Option<String>,
        #[arg(long)]
        other: Option<String>,
    },
    /// Shortlex-least cyclic word separated from H.
    FindCyclic {
        #[command(flatten)]
        select: Select,
        #[arg(long, default_value_t = 6)]
        max_len: usize,
    },
    /// A free rank-two subgroup separated from H.
    Construct {
        #[command(flatten)]
        select: Select,
        #[arg(long, default_value_t = 6)]
        max_len: usize,
        #[arg(long, default_value_t = 8)]
        max_power: usize,
    },
}

fn parse_host(spec: &str) -> Result<HostSpec> {
    if let Some(k) = spec.strip_prefix("free:") {
        let rank = k.parse().map_err(|_| Error::Malformed(format!("bad rank in `{spec}`")))?;
        return Ok(HostSpec::Free { rank });
    }
    if let Some(g) = spec.strip_prefix("surface:") {
        let genus: usize = g.parse().map_err(|_| Error::Malformed(format!("bad genus in `{spec}`")))?;
        if genus == 0 || genus > 13 {
            return Err(Error::Precondition(format!("genus {genus} outside 1..=13")));
        }
        return Ok(HostSpec::surface(genus));
    }
    Ok(HostSpec::Presented {
        text: fs::read_to_string(spec)?,
    })
}

fn parse_subgroup_spec(spec: &str) -> Result<SubgroupSpec> {
    if spec == "kernel" {
        return Ok(SubgroupSpec::Kernel {
            generator: 0,
            truncation: None,
        });
    }
    if let Some(t) = spec.strip_prefix("kernel:") {
        let t = t.parse().map_err(|_| Error::Malformed(format!("bad truncation in `{spec}`")))?;
        return Ok(SubgroupSpec::Kernel {
            generator: 0,
            truncation: Some(t),
        });
    }
    Ok(SubgroupSpec::Generators {
        words: spec.split(';').map(str::trim).filter(|w| !w.is_empty()).map(String::from).collect(),
    })
}

fn resolve(cli: &Cli, sel: &Select) -> Result<PipelineConfig> {
    let mut c = if let Some(name) = &sel.instance {
        PipelineConfig::instance(name).ok_or_else(|| {
            Error::Malformed(format!(
                "unknown instance `{name}`; known: {}",
                PipelineConfig::INSTANCES.join(", ")
            ))
        })?
    } else if let Some(path) = &sel.config {
        cosetgraph::report::from_json(&fs::read_to_string(path)?)?
    } else {
        let host = parse_host(sel.host.as_deref().unwrap_or("free:2"))?;
        let sub = parse_subgroup_spec(sel.subgroup.as_deref().unwrap_or(""))?;
        PipelineConfig::new("custom", host, sub, cli.radius.unwrap_or(8))
    };
    if sel.instance.is_some() || sel.config.is_some() {
        if let Some(h) = &sel.host {
            c.host = parse_host(h)?;
        }
        if let Some(s) = &sel.subgroup {
            c.subgroup = parse_subgroup_spec(s)?;
        }
    }
    if let Some(r) = cli.radius {
        c.radius = r;
        c.n_max = 2 * r;
        c.iso_radius = c.iso_radius.min(r);
        c.geometry_radius = c.geometry_radius.min(r);
    }
    if let Some(n) = cli.n_max {
        c.n_max = n;
    }
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(b) = cli.budget {
        c.budget = b;
    }
    Ok(c)
}

fn free_host(cli: &Cli, sel: &Select) -> Result<(Presentation, Vec<Word>)> {
    let c = resolve(cli, sel)?;
    let host = c.host.build()?;
    if !host.is_free() {
        return Err(Error::Precondition("separation is decided exactly only over free hosts".into()));
    }
    let gens = c.subgroup.generators(host.alphabet(), c.radius)?;
    Ok((host, gens))
}

fn words(alphabet: &MarkedAlphabet, ws: &[Word]) -> Vec<String> {
    ws.iter().map(|w| alphabet.format_word(w)).collect()
}

fn emit(cli: &Cli, files: Vec<ExportFile>) -> Result<()> {
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for f in files {
                fs::write(Path::new(dir).join(&f.name), f.contents)?;
            }
        }
        None => {
            for f in files {
                print!("{}", f.contents);
            }
        }
    }
    Ok(())
}

fn json_file(name: &str, value: &impl serde::Serialize) -> Result<Vec<ExportFile>> {
    Ok(vec![ExportFile {
        name: format!("{name}.json"),
        contents: to_canonical_json(value)?,
    }])
}

fn run(cli: &Cli) -> Result<()> {
    let format: ExportFormat = cli.format.parse()?;
    match &cli.command {
        Command::BuildBall(sel) => {
            let c = resolve(cli, sel)?;
            let host = c.host.build()?;
            let gens = c.subgroup.generators(host.alphabet(), c.radius)?;
            let budget = CosetBudget {
                vertices: c.budget,
                ..CosetBudget::default()
            };
            let sb = schreier_ball_with_budget(&host, &gens, c.radius, budget)?;
            let files = match format {
                ExportFormat::Dot => vec![ExportFile {
                    name: "ball.dot".into(),
                    contents: export_dot(&sb.ball, host.alphabet())?,
                }],
                _ => json_file("ball", &ball_summary(&sb))?,
            };
            emit(cli, files)
        }
        Command::Schreier(sel) => {
            let (host, gens) = free_host(cli, sel)?;
            let core = stallings_core(host.alphabet(), &gens);
            emit(cli, json_file("core", &core_summary(host.alphabet(), &gens, &core))?)
        }
        Command::Diagnose(sel) => {
            let c = resolve(cli, sel)?;
            let report = run_pipeline(&c)?;
            emit(cli, json_file(&c.name, &report)?)
        }
        Command::Cogrowth(sel) => {
            let c = resolve(cli, sel)?;
            let (section, notes) = run_cogrowth(&c)?;
            emit(cli, json_file("cogrowth", &json!({ "cogrowth": section, "notes": notes }))?)
        }
        Command::Export(sel) => {
            let c = resolve(cli, sel)?;
            let run = cosetgraph::report::execute(&c)?;
            emit(cli, export(&run, format)?)
        }
        Command::Separate { action } => separate(cli, action),
    }
}

fn separate(cli: &Cli, action: &SeparateAction) -> Result<()> {
    match action {
        SeparateAction::Check { select, cyclic, other } => {
            let (host, gens) = free_host(cli, select)?;
            let a = host.alphabet();
            let core = stallings_core(a, &gens);
            let value = match (cyclic, other) {
                (Some(c), None) => {
                    let cert = is_cyclic_conjugate_into(&core, &a.parse_word(c)?)?;
                    let w = cert.witness.as_ref();
                    json!({
                        "subgroup": words(a, &gens),
                        "c": a.format_word(&cert.c),
                        "separated": cert.separated,
                        "certificate": cert,
                        "witness_words": w.map(|w| json!({
                            "g": a.format_word(&w.g),
                            "n": w.n,
                            "conjugate": a.format_word(&w.conjugate),
                        })),
                    })
                }
                (None, Some(f)) => {
                    let fg = SubgroupSpec::Generators {
                        words: f.split(';').map(str::trim).filter(|w| !w.is_empty()).map(String::from).collect(),
                    }
                    .generators(a, 0)?;
                    let cf = stallings_core(a, &fg);
                    let cert = subgroups_conjugacy_separated(&core, &cf)?;
                    let w = cert.witness.as_ref();
                    json!({
                        "subgroup": words(a, &gens),
                        "other": words(a, &fg),
                        "separated": cert.separated,
                        "certificate": cert,
                        "witness_words": w.map(|w| json!({
                            "g": a.format_word(&w.g),
                            "h": a.format_word(&w.h),
                            "f": a.format_word(&w.f),
                        })),
                    })
                }
                _ => {
                    return Err(Error::Malformed("give exactly one of --cyclic or --other".into()));
                }
            };
            emit(cli, json_file("separation", &value)?)
        }
        SeparateAction::FindCyclic { select, max_len } => {
            let (host, gens) = free_host(cli, select)?;
            let a = host.alphabet();
            let core = stallings_core(a, &gens);
            let c = find_separated_cyclic(a, &core, *max_len)?;
            let value = json!({ "subgroup": words(a, &gens), "c": a.format_word(&c), "max_len": max_len });
            emit(cli, json_file("separation", &value)?)
        }
        SeparateAction::Construct {
            select,
            max_len,
            max_power,
        } => {
            let (host, gens) = free_host(cli, select)?;
            let a = host.alphabet();
            let core = stallings_core(a, &gens);
            let out = construct_separated_free(a, &core, *max_len, *max_power)?;
            let value = json!({
                "subgroup": words(a, &gens),
                "c": a.format_word(&out.c),
                "h_prime": a.format_word(&out.h_prime),
                "m": out.m,
                "x": a.format_word(&out.x),
                "y": a.format_word(&out.y),
                "rank": out.rank,
                "certificate": out.certificate,
            });
            emit(cli, json_file("separation", &value)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

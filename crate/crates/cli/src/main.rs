//! Command-line front end: run scenario files, fuzz with oracle
//! checking, and reproduce the lower-bound constructions.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use covclock::graph::ProcessId;
use covclock::sim::{
    gen_random, inline_sweep, online_sweep, run, star_adversary, AdversaryOutcome, Algo,
    CaseCounts, ConstantZero, CoverSpec, Disagreement, LamportScalar, OnlineTimestamper,
    QueryOutcome, RandomScenarioConfig, RunOutput, ScenarioScript, StampValue, SweepReport,
    TruncatedVectorClock,
};

/// Largest system size the brute-force oracle sweeps are meant for.
const ORACLE_PROCESS_LIMIT: usize = 10;

#[derive(Parser)]
#[command(
    name = "covclock",
    about = "Causality timestamps over communication graphs: simulate, fuzz, and attack",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    #[value(name = "vclock")]
    VClock,
    Inline,
    Star,
}

impl From<AlgoArg> for Algo {
    fn from(a: AlgoArg) -> Algo {
        match a {
            AlgoArg::VClock => Algo::VClock,
            AlgoArg::Inline => Algo::Inline,
            AlgoArg::Star => Algo::Star,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file under one timestamp algorithm.
    Run {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = AlgoArg::Inline)]
        algo: AlgoArg,
        /// Override the scenario's cover: `exact`, `greedy`, or a comma
        /// list of process ids like `0,1`.
        #[arg(long)]
        cover: Option<String>,
        /// Directory receiving trace.json, timestamps.json, queries.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sweep every timestamp against the happened-before oracle.
        #[arg(long)]
        check_oracle: bool,
        /// Print the machine-readable report instead of the summary.
        #[arg(long)]
        json: bool,
    },
    /// Generate seeded random scenarios and oracle-check every one.
    Fuzz {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 30)]
        events: usize,
        #[arg(long, default_value_t = 100)]
        iters: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = AlgoArg::Inline)]
        algo: AlgoArg,
        #[arg(long, default_value_t = 0.45)]
        edge_prob: f64,
        #[arg(long)]
        json: bool,
    },
    /// Attack a short online clock with the concurrent-star construction.
    /// Exit code 0 means the expected violation was demonstrated.
    Adversary {
        #[arg(long)]
        n: usize,
        /// One of `truncated-vclock:<s>`, `lamport-scalar`, `zero`.
        #[arg(long)]
        candidate: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Serialize)]
struct CoverReport {
    members: Vec<usize>,
    size: usize,
}

#[derive(Serialize)]
struct RunReport {
    scenario: String,
    algorithm: String,
    cover: Option<CoverReport>,
    events: usize,
    queries_ready: usize,
    queries_blocked: usize,
    queries_failed: usize,
    oracle: Option<SweepReport>,
}

impl RunReport {
    fn build(output: &RunOutput, oracle: Option<SweepReport>) -> RunReport {
        let mut ready = 0;
        let mut blocked = 0;
        let mut failed = 0;
        for q in &output.queries {
            match q.outcome {
                QueryOutcome::Ready { .. } => ready += 1,
                QueryOutcome::Blocked { .. } => blocked += 1,
                QueryOutcome::Failed { .. } => failed += 1,
            }
        }
        RunReport {
            scenario: output.scenario.clone(),
            algorithm: output.algo.to_string(),
            cover: output.log.cover.as_ref().map(|members| CoverReport {
                members: members.iter().map(|p| p.0).collect(),
                size: members.len(),
            }),
            events: output.trace.event_count(),
            queries_ready: ready,
            queries_blocked: blocked,
            queries_failed: failed,
            oracle,
        }
    }

    fn disagreements(&self) -> &[Disagreement] {
        self.oracle
            .as_ref()
            .map(|o| o.disagreements.as_slice())
            .unwrap_or(&[])
    }

    fn ok(&self) -> bool {
        self.oracle.as_ref().is_none_or(SweepReport::clean)
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let started = Instant::now();
    let ok = match cli.command {
        Command::Run {
            scenario,
            algo,
            cover,
            out,
            check_oracle,
            json,
        } => cmd_run(
            &scenario,
            algo.into(),
            cover.as_deref(),
            out.as_deref(),
            check_oracle,
            json,
        )?,
        Command::Fuzz {
            n,
            events,
            iters,
            seed,
            algo,
            edge_prob,
            json,
        } => cmd_fuzz(n, events, iters, seed, algo.into(), edge_prob, json)?,
        Command::Adversary { n, candidate, json } => cmd_adversary(n, &candidate, json)?,
    };
    eprintln!("elapsed: {:.3}s", started.elapsed().as_secs_f64());
    if !ok {
        std::process::exit(1);
    }
    Ok(())
}

fn parse_cover(text: &str) -> Result<CoverSpec> {
    match text {
        "exact" => Ok(CoverSpec::Mode(covclock::CoverMode::Exact)),
        "greedy" => Ok(CoverSpec::Mode(covclock::CoverMode::Greedy)),
        list => {
            let members = list
                .split(',')
                .map(|part| {
                    part.trim()
                        .parse::<usize>()
                        .map(ProcessId)
                        .with_context(|| format!("bad process id `{part}` in --cover"))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CoverSpec::Given(members))
        }
    }
}

fn cmd_run(
    path: &std::path::Path,
    algo: Algo,
    cover: Option<&str>,
    out_dir: Option<&std::path::Path>,
    check_oracle: bool,
    json: bool,
) -> Result<bool> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read scenario {}", path.display()))?;
    let mut script = ScenarioScript::from_json(&text)?;
    if let Some(cover) = cover {
        script.graph.cover = parse_cover(cover)?;
    }
    let output = run(&script, algo)?;

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join("trace.json"),
            serde_json::to_string_pretty(&output.trace)?,
        )?;
        std::fs::write(
            dir.join("timestamps.json"),
            serde_json::to_string_pretty(&output.log)?,
        )?;
        std::fs::write(
            dir.join("queries.json"),
            serde_json::to_string_pretty(&output.queries)?,
        )?;
    }

    let oracle = if check_oracle {
        Some(match algo {
            Algo::Inline => inline_sweep(&output.trace, &output.log)?,
            Algo::VClock | Algo::Star => online_sweep(&output.trace, &output.log)?,
        })
    } else {
        None
    };
    let report = RunReport::build(&output, oracle);

    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print_run_summary(&output, &report);
    }
    dump_disagreements(report.disagreements());
    Ok(report.ok())
}

fn print_run_summary(output: &RunOutput, report: &RunReport) {
    println!("scenario  {}", report.scenario);
    println!("algorithm {}", report.algorithm);
    if let Some(cover) = &report.cover {
        let members: Vec<String> = cover.members.iter().map(|p| format!("p{p}")).collect();
        println!("cover     {{{}}} (c = {})", members.join(","), cover.size);
    }
    println!("events    {}", report.events);
    for q in &output.queries {
        let head = format!("query p{}#{} at {}", q.proc.0, q.event, q.at);
        match &q.outcome {
            QueryOutcome::Ready { timestamp } => match timestamp {
                StampValue::Inline(t) => println!("{head}: {t}"),
                StampValue::Vector(v) => println!("{head}: {v}"),
            },
            QueryOutcome::Blocked {
                missing,
                unblocks_at,
            } => {
                let slots: Vec<String> = missing.iter().map(usize::to_string).collect();
                let when = unblocks_at
                    .map(|u| format!("{u}"))
                    .unwrap_or_else(|| "never within this run".into());
                println!(
                    "{head}: blocked on next[{}], unblocks at {when}",
                    slots.join(",")
                );
            }
            QueryOutcome::Failed { reason } => println!("{head}: failed ({reason:?})"),
        }
    }
    if let Some(oracle) = &report.oracle {
        println!(
            "oracle    {} comparisons, {} disagreements",
            oracle.comparisons,
            oracle.disagreements.len()
        );
    }
}

fn dump_disagreements(disagreements: &[Disagreement]) {
    for d in disagreements.iter().take(20) {
        eprintln!(
            "DISAGREEMENT at {}: {} {} vs {} {} -- timestamps say {}, oracle says {}",
            d.at,
            d.first,
            d.first_stamp,
            d.second,
            d.second_stamp,
            d.timestamps_claim,
            d.oracle_says
        );
    }
}

#[derive(Serialize)]
struct FuzzReport {
    algorithm: String,
    iterations: u64,
    seed: u64,
    n: usize,
    events: usize,
    total_events: u64,
    oracle: SweepReport,
    cases: CaseCounts,
}

fn cmd_fuzz(
    n: usize,
    events: usize,
    iters: u64,
    seed: u64,
    algo: Algo,
    edge_prob: f64,
    json: bool,
) -> Result<bool> {
    if n > ORACLE_PROCESS_LIMIT {
        bail!("fuzzing is oracle-checked and limited to n <= {ORACLE_PROCESS_LIMIT}");
    }
    let mut aggregate = SweepReport::default();
    let mut total_events = 0u64;
    for i in 0..iters {
        let config = RandomScenarioConfig {
            n,
            target_events: events,
            edge_prob,
            star_only: algo == Algo::Star,
            queries: 2,
            seed: seed.wrapping_add(i),
        };
        let script = gen_random(&config);
        let output = run(&script, algo)?;
        total_events += output.trace.event_count() as u64;
        let report = match algo {
            Algo::Inline => inline_sweep(&output.trace, &output.log)?,
            Algo::VClock | Algo::Star => online_sweep(&output.trace, &output.log)?,
        };
        aggregate.merge(&report);
    }
    let cases = aggregate.cases.clone();
    let report = FuzzReport {
        algorithm: algo.to_string(),
        iterations: iters,
        seed,
        n,
        events,
        total_events,
        oracle: aggregate,
        cases,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!(
            "fuzz {}: {} iterations, {} events, {} comparisons, {} blocked samples, {} disagreements",
            report.algorithm,
            report.iterations,
            report.total_events,
            report.oracle.comparisons,
            report.oracle.blocked_samples,
            report.oracle.disagreements.len()
        );
        for (case, count) in &report.cases.0 {
            println!("  {case:?}: {count}");
        }
    }
    dump_disagreements(&report.oracle.disagreements);
    Ok(report.oracle.clean())
}

fn parse_candidate(text: &str) -> Result<Box<dyn OnlineTimestamper>> {
    if let Some(s) = text.strip_prefix("truncated-vclock:") {
        let s: usize = s
            .parse()
            .context("bad slot count in truncated-vclock:<s>")?;
        return Ok(Box::new(TruncatedVectorClock { s }));
    }
    match text {
        "lamport-scalar" => Ok(Box::new(LamportScalar)),
        "zero" => Ok(Box::new(ConstantZero)),
        other => {
            bail!("unknown candidate `{other}`; use truncated-vclock:<s>, lamport-scalar or zero")
        }
    }
}

fn cmd_adversary(n: usize, candidate: &str, json: bool) -> Result<bool> {
    let candidate = parse_candidate(candidate)?;
    let report = star_adversary(candidate.as_ref(), n)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(matches!(report.outcome, AdversaryOutcome::Violation(_)));
    }
    println!(
        "candidate {} (vector length {}) on the {}-process star",
        report.candidate, report.vector_len, report.n
    );
    let dominating: Vec<String> = report
        .dominating_set
        .iter()
        .map(|p| p.to_string())
        .collect();
    println!(
        "dominating set {{{}}}, victim {}",
        dominating.join(","),
        report.victim
    );
    match &report.outcome {
        AdversaryOutcome::Violation(v) => {
            println!("violation: {:?}", v.kind);
            println!("  {} stamped {}", v.first, v.first_stamp);
            println!("  {} stamped {}", v.second, v.second_stamp);
            println!(
                "  oracle: the pair is {}",
                if v.oracle_concurrent {
                    "concurrent"
                } else {
                    "ordered"
                }
            );
            Ok(true)
        }
        AdversaryOutcome::NoViolationFound => {
            println!("no violation found");
            Ok(false)
        }
    }
}

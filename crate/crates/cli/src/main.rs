// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

//! `srv6sim`: load a scenario, converge it, then inspect or drive it.
//!
//! Exit codes: 0 ok, 1 failed expectation or simulation error, 2 usage.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use srv6_overlay::graph::compare_dispatch;
use srv6_overlay::sim::{ShowWhat, SimError};
use srv6_overlay::underlay::waypoints;
use srv6_overlay::{AgentMode, Family, Scenario, Simulation};

#[derive(Parser, Debug)]
#[command(name = "srv6sim", version, about = "Deterministic SRv6 container-overlay simulator")]
struct Cli {
    /// Scenario file (.scn).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Override the scenario's control-plane mode.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Override the scenario's scheduler seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Policy file to inject after convergence (bgp mode); repeatable.
    #[arg(long = "inject", global = true, value_name = "FILE")]
    pre_inject: Vec<PathBuf>,
    /// ConfigMap file to apply after convergence (configmap mode); repeatable.
    #[arg(long = "apply-configmap", global = true, value_name = "FILE")]
    pre_apply: Vec<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Bgp,
    Configmap,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    V4,
    V6,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::V4 => Family::V4,
            FamilyArg::V6 => Family::V6,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Flow {
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Converge the scenario and print a summary.
    Run {
        /// Also print agent events.
        #[arg(long)]
        events: bool,
    },
    /// Echo request/reply between two pods.
    Ping {
        #[command(flatten)]
        flow: Flow,
        #[arg(short = 'c', long, default_value_t = 4)]
        count: u32,
        /// Print per-packet traces.
        #[arg(long)]
        traces: bool,
        /// Fail unless exactly this many replies arrive.
        #[arg(long)]
        expect_delivered: Option<u32>,
    },
    /// Render one table of a node or router dataplane.
    Show {
        element: String,
        /// localsids | policies | steering | encap-source
        what: String,
    },
    /// Inject policy files through the injector peer (bgp mode).
    Inject {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Only send to these nodes.
        #[arg(long, value_delimiter = ',')]
        targets: Option<Vec<String>>,
    },
    /// Write ConfigMap documents and let agents poll (configmap mode).
    ApplyConfigmap {
        file: PathBuf,
        /// Fail unless the summary matches, e.g. "1 replaced".
        #[arg(long)]
        expect: Option<String>,
    },
    /// Trace one request packet hop by hop without touching counters.
    Trace {
        #[command(flatten)]
        flow: Flow,
        /// Fail unless the SRv6 waypoints match, e.g. R4,R3.
        #[arg(long, value_delimiter = ',')]
        expect_waypoints: Option<Vec<String>>,
    },
    /// Metrics report, optionally after pinging every pod pair.
    Report {
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Pings per ordered pod pair and family before reporting.
        #[arg(long, default_value_t = 0)]
        ping_all: u32,
    },
    /// Scalar vs vector dispatch throughput (not asserted).
    Bench {
        #[arg(long, default_value_t = 100_000)]
        packets: usize,
        #[arg(long, default_value_t = 16)]
        tunnels: usize,
    },
}

enum Failure {
    Usage(String),
    Sim(SimError),
    Expectation(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::ModeMismatch { .. } | SimError::ShowWhat(_) => Failure::Usage(e.to_string()),
            e => Failure::Sim(e),
        }
    }
}

fn load(cli: &Cli) -> Result<Simulation, Failure> {
    let path = cli.scenario.as_deref().ok_or_else(|| Failure::Usage("--scenario is required".into()))?;
    let mut s = Scenario::load(path)?;
    if let Some(m) = cli.mode {
        s.mode = match m {
            ModeArg::Bgp => AgentMode::Bgp,
            ModeArg::Configmap => AgentMode::Configmap,
        };
    }
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    let mut sim = Simulation::new(s)?;
    for f in &cli.pre_inject {
        let s = sim.inject_text(&read(f)?, None)?;
        eprintln!("inject {}: {s}", f.display());
    }
    for f in &cli.pre_apply {
        let s = sim.apply_configmap_text(&read(f)?)?;
        eprintln!("apply-configmap {}: {s}", f.display());
    }
    Ok(sim)
}

fn read(p: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(p).map_err(|e| Failure::Sim(SimError::Io { path: p.to_path_buf(), msg: e.to_string() }))
}

fn pod_pairs(sim: &Simulation) -> Vec<(String, String)> {
    let pods: Vec<String> = sim.pod_names().map(str::to_string).collect();
    let mut out = Vec::new();
    for a in &pods {
        for b in &pods {
            if a != b {
                out.push((a.clone(), b.clone()));
            }
        }
    }
    out
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    if let Cmd::Bench { packets, tunnels } = cli.cmd {
        let r = compare_dispatch(packets, tunnels).map_err(|e| Failure::Sim(e.into()))?;
        print!("{}", r.to_csv());
        if let Some(x) = r.ratio() {
            println!("vector/scalar {x:.2}x");
        }
        return Ok(());
    }
    let mut sim = load(cli)?;
    match &cli.cmd {
        Cmd::Run { events } => {
            let s = sim.scenario();
            println!(
                "{}: converged in {} steps ({} mode, seed {})",
                s.name,
                sim.report().control.scheduler_steps,
                s.mode,
                s.seed
            );
            println!("tunnels: v4 {}, v6 {}", sim.tunnel_count(Family::V4), sim.tunnel_count(Family::V6));
            if *events {
                for e in sim.events() {
                    println!("{e}");
                }
            }
        }
        Cmd::Ping { flow, count, traces, expect_delivered } => {
            let r = sim.ping(&flow.from, &flow.to, flow.family.map(Into::into), *count)?;
            print!("{r}");
            if *traces {
                for t in &r.traces {
                    for l in t {
                        println!("  {l}");
                    }
                    println!();
                }
            }
            if let Some(want) = expect_delivered {
                if r.delivered != *want {
                    return Err(Failure::Expectation(format!("expected {want} delivered, got {}", r.delivered)));
                }
            }
        }
        Cmd::Show { element, what } => {
            let w: ShowWhat = what.parse()?;
            print!("{}", sim.show(element, w)?);
        }
        Cmd::Inject { files, targets } => {
            for f in files {
                let s = sim.inject_text(&read(f)?, targets.as_deref())?;
                println!("{}: {s}", f.display());
            }
        }
        Cmd::ApplyConfigmap { file, expect } => {
            let s = sim.apply_configmap_text(&read(file)?)?.to_string();
            println!("{s}");
            if let Some(want) = expect {
                if &s != want {
                    return Err(Failure::Expectation(format!("expected \"{want}\", got \"{s}\"")));
                }
            }
        }
        Cmd::Trace { flow, expect_waypoints } => {
            let t = sim.trace(&flow.from, &flow.to, flow.family.map(Into::into))?;
            for l in t.lines() {
                println!("{l}");
            }
            let wp = waypoints(&t);
            println!("waypoints: {}", wp.join(","));
            if let Some(want) = expect_waypoints {
                if &wp != want {
                    return Err(Failure::Expectation(format!(
                        "expected waypoints {}, got {}",
                        want.join(","),
                        wp.join(",")
                    )));
                }
            }
        }
        Cmd::Report { format, ping_all } => {
            if *ping_all > 0 {
                for (a, b) in pod_pairs(&sim) {
                    for f in [Family::V4, Family::V6] {
                        if sim.pod_address(&a, f).is_some() && sim.pod_address(&b, f).is_some() {
                            sim.ping(&a, &b, Some(f), *ping_all)?;
                        }
                    }
                }
            }
            let r = sim.report();
            match format {
                Format::Json => println!("{}", r.to_json()),
                Format::Csv => print!("{}", r.to_csv()),
            }
        }
        Cmd::Bench { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Expectation(msg)) => {
            eprintln!("srv6sim: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Sim(e)) => {
            eprintln!("srv6sim: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("srv6sim: {msg}");
            ExitCode::from(2)
        }
    }
}

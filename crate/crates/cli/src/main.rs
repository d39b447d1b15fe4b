//! `shieldc`: compile shield processes, synthesize global/local shields,
//! simulate, train, benchmark, and export PRISM models.

mod chart;

use clap::{Parser, Subcommand, ValueEnum};
use shield_core::bench::{run_bench, BenchConfig, ShieldKind};
use shield_core::dsl::{check_wellformed, parse_spec, ShieldSpec};
use shield_core::dump;
use shield_core::env::EnvironmentInstance;
use shield_core::global::{
    synthesize_global, DecMode, GlobalMealy, IdlePolicy, SynthOptions,
};
use shield_core::learn::{train_q, RewardScheme, TrainConfig};
use shield_core::local::{project_local, LocalMealy};
use shield_core::prism::{build_mdp, render_prism, run_external, solve_bounds};
use shield_core::procauto::{compile_automaton, compile_spec, CompiledSpec, ProcessAutomaton};
use shield_core::sim::{evaluate, Policy};
use shield_core::templates::{gen_p1, gen_p2};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

const EXIT_VALIDATION: u8 = 2;
const EXIT_STAGE: u8 = 3;
const EXIT_EXTERNAL: u8 = 4;

struct Failure {
    code: u8,
    message: String,
}

type CmdResult = Result<(), Failure>;

fn validation<E: std::fmt::Display>(e: E) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        message: e.to_string(),
    }
}

fn stage<E: std::fmt::Display>(name: &str) -> impl Fn(E) -> Failure + '_ {
    move |e| Failure {
        code: EXIT_STAGE,
        message: format!("{name}: {e}"),
    }
}

fn external<E: std::fmt::Display>(e: E) -> Failure {
    Failure {
        code: EXIT_EXTERNAL,
        message: e.to_string(),
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum IdlePolicyArg {
    Hold,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecArg {
    Exhaustive,
    Greedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum TemplateArg {
    P1,
    P2,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShieldKindArg {
    None,
    P1,
    P2,
}

#[derive(Clone, Copy, ValueEnum)]
enum RewardArg {
    Reach,
    Safe,
}

#[derive(Parser)]
#[command(name = "shieldc", about = "shield process compiler and toolkit")]
struct Cli {
    /// RNG seed for anything stochastic.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory (or file, for single-artifact commands).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Behavior after successful process termination.
    #[arg(long, global = true, value_enum, default_value_t = IdlePolicyArg::Hold)]
    idle_policy: IdlePolicyArg,
    /// Disable reachable-belief refinement during global synthesis.
    #[arg(long, global = true)]
    no_refine: bool,
    /// Joint-action decomposition strategy.
    #[arg(long, global = true, value_enum, default_value_t = DecArg::Exhaustive)]
    dec: DecArg,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a shield document into a process automaton.
    Compile {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        shield: PathBuf,
    },
    /// Compile and synthesize the global Mealy shield.
    Synth {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        shield: PathBuf,
    },
    /// Full pipeline: automaton, global shield, and per-agent local shields.
    Project {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        shield: PathBuf,
    },
    /// Emit a shield-document template for an environment.
    Gen {
        #[arg(long, value_enum)]
        template: TemplateArg,
        #[arg(long)]
        env: PathBuf,
    },
    /// Run seeded episodes under a uniform-random policy.
    Simulate {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        shield: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        #[arg(long, default_value_t = 64)]
        horizon: usize,
    },
    /// Train tabular Q-learning agents, optionally under a shield.
    Train {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        shield: Option<PathBuf>,
        #[arg(long, default_value_t = 4000)]
        episodes: usize,
        #[arg(long, default_value_t = 64)]
        horizon: usize,
        #[arg(long, value_enum, default_value_t = RewardArg::Reach)]
        reward: RewardArg,
        #[arg(long, default_value_t = 400)]
        eval_every: usize,
        #[arg(long, default_value_t = 200)]
        eval_episodes: usize,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 0.95)]
        gamma: f64,
    },
    /// Sample random instances and compare shielded vs unshielded rollouts.
    Bench {
        #[arg(long, default_value_t = 4)]
        width: i32,
        #[arg(long, default_value_t = 4)]
        height: i32,
        #[arg(long, default_value_t = 4)]
        obstacles: usize,
        #[arg(long, default_value_t = 2)]
        agents: usize,
        #[arg(long, default_value_t = 0)]
        radius: u32,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 200)]
        episodes: usize,
        #[arg(long, default_value_t = 64)]
        horizon: usize,
        #[arg(long, value_enum, default_value_t = ShieldKindArg::P1)]
        shield: ShieldKindArg,
    },
    /// Export the shielded system as a PRISM MDP and print the four bounds.
    ExportPrism {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        shield: Option<PathBuf>,
        /// Also invoke an external PRISM binary on the exported files.
        #[arg(long)]
        prism_bin: Option<String>,
        #[arg(long, default_value_t = 120)]
        timeout_secs: u64,
    },
    /// Parse and validate a shield document without synthesizing.
    Check {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        shield: PathBuf,
    },
    /// Render a training-curve CSV as an SVG line chart.
    Chart {
        #[arg(long)]
        input: PathBuf,
    },
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| validation(format!("{}: {e}", path.display())))
}

fn load_env(path: &Path) -> Result<EnvironmentInstance, Failure> {
    let text = read_file(path)?;
    EnvironmentInstance::from_json(&text).map_err(validation)
}

fn load_spec(path: &Path) -> Result<ShieldSpec, Failure> {
    let text = read_file(path)?;
    let spec = parse_spec(&text).map_err(validation)?;
    let report = check_wellformed(&spec);
    if !report.violations.is_empty() {
        let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(validation(msgs.join("\n")));
    }
    Ok(spec)
}

fn synth_options(cli: &Cli) -> SynthOptions {
    SynthOptions {
        refine_belief: !cli.no_refine,
        idle_policy: match cli.idle_policy {
            IdlePolicyArg::Hold => IdlePolicy::Hold,
            IdlePolicyArg::All => IdlePolicy::All,
        },
        dec: match cli.dec {
            DecArg::Exhaustive => DecMode::Exhaustive,
            DecArg::Greedy => DecMode::Greedy,
        },
    }
}

fn out_dir(cli: &Cli) -> Result<PathBuf, Failure> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| validation(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_artifact(dir: &Path, name: &str, content: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| stage("write")(format!("{}: {e}", path.display())))
}

struct Pipeline {
    env: EnvironmentInstance,
    compiled: CompiledSpec,
    auto: ProcessAutomaton,
}

fn compile_stage(cli: &Cli, env_path: &Path, shield_path: &Path) -> Result<Pipeline, Failure> {
    let env = load_env(env_path)?;
    let spec = load_spec(shield_path)?;
    let compiled = compile_spec(&spec, &env).map_err(validation)?;
    let auto = compile_automaton(&compiled, &env).map_err(stage("automaton"))?;
    let _ = cli;
    Ok(Pipeline {
        env,
        compiled,
        auto,
    })
}

fn synth_stage(cli: &Cli, p: &Pipeline) -> Result<GlobalMealy, Failure> {
    synthesize_global(&p.auto, &p.env, synth_options(cli)).map_err(stage("global synthesis"))
}

fn project_stage(p: &Pipeline, gm: &GlobalMealy) -> Vec<LocalMealy> {
    (0..p.env.num_agents())
        .map(|i| project_local(gm, &p.env, i))
        .collect()
}

fn shields_from_doc(
    cli: &Cli,
    env: &EnvironmentInstance,
    shield_path: &Path,
) -> Result<Vec<LocalMealy>, Failure> {
    let spec = load_spec(shield_path)?;
    let compiled = compile_spec(&spec, env).map_err(validation)?;
    let auto = compile_automaton(&compiled, env).map_err(stage("automaton"))?;
    let gm = synthesize_global(&auto, env, synth_options(cli)).map_err(stage("global synthesis"))?;
    Ok((0..env.num_agents())
        .map(|i| project_local(&gm, env, i))
        .collect())
}

fn run(cli: &Cli) -> CmdResult {
    match &cli.cmd {
        Cmd::Compile { env, shield } => {
            let p = compile_stage(cli, env, shield)?;
            let dir = out_dir(cli)?;
            write_artifact(&dir, "automaton.dot", &dump::automaton_dot(&p.auto, &p.compiled.bindings))?;
            write_artifact(
                &dir,
                "automaton.json",
                &serde_json::to_string_pretty(&dump::automaton_json(&p.auto, &p.compiled.bindings))
                    .unwrap(),
            )?;
            println!(
                "automaton: {} states, {} edges",
                p.auto.states.len(),
                p.auto.num_edges()
            );
            Ok(())
        }
        Cmd::Synth { env, shield } => {
            let p = compile_stage(cli, env, shield)?;
            let gm = synth_stage(cli, &p)?;
            let dir = out_dir(cli)?;
            write_artifact(&dir, "automaton.dot", &dump::automaton_dot(&p.auto, &p.compiled.bindings))?;
            write_artifact(&dir, "global.dot", &dump::global_dot(&gm, &p.compiled.bindings))?;
            write_artifact(
                &dir,
                "global.json",
                &serde_json::to_string_pretty(&dump::global_json(&gm, &p.compiled.bindings)).unwrap(),
            )?;
            println!(
                "automaton: {} states, {} edges",
                p.auto.states.len(),
                p.auto.num_edges()
            );
            println!("global: {} states, {} edges", gm.states.len(), gm.num_edges());
            Ok(())
        }
        Cmd::Project { env, shield } => {
            let p = compile_stage(cli, env, shield)?;
            let gm = synth_stage(cli, &p)?;
            let locals = project_stage(&p, &gm);
            let dir = out_dir(cli)?;
            write_artifact(&dir, "automaton.dot", &dump::automaton_dot(&p.auto, &p.compiled.bindings))?;
            write_artifact(
                &dir,
                "automaton.json",
                &serde_json::to_string_pretty(&dump::automaton_json(&p.auto, &p.compiled.bindings))
                    .unwrap(),
            )?;
            write_artifact(&dir, "global.dot", &dump::global_dot(&gm, &p.compiled.bindings))?;
            write_artifact(
                &dir,
                "global.json",
                &serde_json::to_string_pretty(&dump::global_json(&gm, &p.compiled.bindings)).unwrap(),
            )?;
            println!(
                "automaton: {} states, {} edges",
                p.auto.states.len(),
                p.auto.num_edges()
            );
            println!("global: {} states, {} edges", gm.states.len(), gm.num_edges());
            for lm in &locals {
                write_artifact(
                    &dir,
                    &format!("local{}.dot", lm.agent + 1),
                    &dump::local_dot(lm, &p.env),
                )?;
                write_artifact(
                    &dir,
                    &format!("local{}.json", lm.agent + 1),
                    &serde_json::to_string_pretty(&dump::local_json(lm, &p.env)).unwrap(),
                )?;
                println!(
                    "local {}: {} states, {} edges",
                    lm.agent + 1,
                    lm.beliefs.len(),
                    lm.num_edges()
                );
            }
            Ok(())
        }
        Cmd::Gen { template, env } => {
            let env = load_env(env)?;
            let doc = match template {
                TemplateArg::P1 => gen_p1(&env),
                TemplateArg::P2 => gen_p2(&env),
            };
            match &cli.out {
                Some(path) => {
                    fs::write(path, &doc)
                        .map_err(|e| stage("write")(format!("{}: {e}", path.display())))?;
                }
                None => print!("{doc}"),
            }
            Ok(())
        }
        Cmd::Simulate {
            env,
            shield,
            episodes,
            horizon,
        } => {
            if *episodes == 0 {
                return Err(validation("episodes must be >= 1"));
            }
            let e = load_env(env)?;
            let shields = match shield {
                Some(path) => shields_from_doc(cli, &e, path)?,
                None => Vec::new(),
            };
            let (m, results) = evaluate(
                &e,
                &shields,
                &Policy::UniformRandom,
                *episodes,
                *horizon,
                cli.seed,
            )
            .map_err(stage("simulate"))?;
            if let Some(dir) = &cli.out {
                fs::create_dir_all(dir).map_err(validation)?;
                let mut csv = String::from("episode,collision,shield_failure,reached\n");
                for (i, r) in results.iter().enumerate() {
                    use shield_core::sim::Outcome;
                    csv.push_str(&format!(
                        "{},{},{},{}\n",
                        i,
                        (r.outcome == Outcome::Collision) as u8,
                        (r.outcome == Outcome::ShieldFailure) as u8,
                        (r.outcome == Outcome::ReachedTargets) as u8,
                    ));
                }
                write_artifact(dir, "episodes.csv", &csv)?;
            }
            println!(
                "episodes={} collision_rate={:.4} shield_failure_rate={:.4} reached_rate={:.4}",
                m.episodes,
                m.collision_rate(),
                m.shield_failure_rate(),
                m.reach_rate()
            );
            Ok(())
        }
        Cmd::Train {
            env,
            shield,
            episodes,
            horizon,
            reward,
            eval_every,
            eval_episodes,
            alpha,
            gamma,
        } => {
            if *episodes == 0 || !(0.0..=1.0).contains(alpha) || !(0.0..=1.0).contains(gamma) {
                return Err(validation("invalid training hyperparameters"));
            }
            let e = load_env(env)?;
            let shields = match shield {
                Some(path) => shields_from_doc(cli, &e, path)?,
                None => Vec::new(),
            };
            let cfg = TrainConfig {
                episodes: *episodes,
                horizon: *horizon,
                alpha: *alpha,
                gamma: *gamma,
                reward: match reward {
                    RewardArg::Reach => RewardScheme::Reach,
                    RewardArg::Safe => RewardScheme::Safe,
                },
                eval_every: *eval_every,
                eval_episodes: *eval_episodes,
                ..TrainConfig::default()
            };
            let result = train_q(&e, &shields, &cfg, cli.seed).map_err(stage("train"))?;
            let mut csv =
                String::from("checkpoint,collision_rate,shield_failure_rate,reached_rate\n");
            for snap in &result.snapshots {
                csv.push_str(&format!(
                    "{},{:.4},{:.4},{:.4}\n",
                    snap.episode,
                    snap.metrics.collision_rate(),
                    snap.metrics.shield_failure_rate(),
                    snap.metrics.reach_rate()
                ));
            }
            if let Some(dir) = &cli.out {
                fs::create_dir_all(dir).map_err(validation)?;
                write_artifact(dir, "curve.csv", &csv)?;
            } else {
                print!("{csv}");
            }
            if let Some(last) = result.snapshots.last() {
                println!(
                    "final: collision_rate={:.4} shield_failure_rate={:.4} reached_rate={:.4}",
                    last.metrics.collision_rate(),
                    last.metrics.shield_failure_rate(),
                    last.metrics.reach_rate()
                );
            }
            Ok(())
        }
        Cmd::Bench {
            width,
            height,
            obstacles,
            agents,
            radius,
            instances,
            episodes,
            horizon,
            shield,
        } => {
            if *episodes == 0 || *instances == 0 {
                return Err(validation("instances and episodes must be >= 1"));
            }
            let cfg = BenchConfig {
                shield: match shield {
                    ShieldKindArg::None => ShieldKind::None,
                    ShieldKindArg::P1 => ShieldKind::P1,
                    ShieldKindArg::P2 => ShieldKind::P2,
                },
                width: *width,
                height: *height,
                num_obstacles: *obstacles,
                num_agents: *agents,
                radius: *radius,
                instances: *instances,
                episodes: *episodes,
                horizon: *horizon,
            };
            let report = run_bench(&cfg, cli.seed).map_err(stage("bench"))?;
            let csv = report.csv();
            if let Some(dir) = &cli.out {
                fs::create_dir_all(dir).map_err(validation)?;
                write_artifact(dir, "bench.csv", &csv)?;
            }
            print!("{csv}");
            Ok(())
        }
        Cmd::ExportPrism {
            env,
            shield,
            prism_bin,
            timeout_secs,
        } => {
            let e = load_env(env)?;
            let shields = match shield {
                Some(path) => shields_from_doc(cli, &e, path)?,
                None => Vec::new(),
            };
            let mdp = build_mdp(&e, &shields).map_err(stage("prism export"))?;
            let (model, props) = render_prism(&e, &mdp);
            let dir = out_dir(cli)?;
            write_artifact(&dir, "model.nm", &model)?;
            write_artifact(&dir, "props.pctl", &props)?;
            let (fmin, fmax) = solve_bounds(&mdp, &mdp.failure_flags);
            let (umin, umax) = solve_bounds(&mdp, &mdp.unsafe_flags);
            println!("{fmin:.6} {fmax:.6} {umin:.6} {umax:.6}");
            if let Some(bin) = prism_bin {
                let bounds = run_external(
                    bin,
                    &dir.join("model.nm"),
                    &dir.join("props.pctl"),
                    Duration::from_secs(*timeout_secs),
                )
                .map_err(external)?;
                println!(
                    "{:.6} {:.6} {:.6} {:.6}",
                    bounds[0], bounds[1], bounds[2], bounds[3]
                );
            }
            Ok(())
        }
        Cmd::Check { env, shield } => {
            let e = load_env(env)?;
            let spec = load_spec(shield)?;
            compile_spec(&spec, &e).map_err(validation)?;
            println!("ok");
            Ok(())
        }
        Cmd::Chart { input } => {
            let text = read_file(input)?;
            let curves = chart::parse_curves(&text).map_err(validation)?;
            let svg = chart::render_chart(&curves);
            let path = match &cli.out {
                Some(p) if p.extension().is_some() => p.clone(),
                Some(p) => {
                    fs::create_dir_all(p).map_err(validation)?;
                    p.join("chart.svg")
                }
                None => PathBuf::from("chart.svg"),
            };
            fs::write(&path, svg).map_err(|e| stage("write")(format!("{}: {e}", path.display())))?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

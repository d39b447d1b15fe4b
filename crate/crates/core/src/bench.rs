//! Benchmark sweep: sample random instances, synthesize the permissive
//! safety shield for each, and compare shielded vs unshielded rollouts.

use crate::env::{EnvFile, EnvironmentInstance};
use crate::global::{synthesize_global, SynthOptions};
use crate::instances::sample_instances;
use crate::local::{project_local, LocalMealy};
use crate::procauto::{compile_automaton, compile_spec};
use crate::sim::{evaluate, Metrics, Policy};
use crate::templates::{gen_p1, gen_p2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("instance sampling produced no viable layouts")]
    NoInstances,
    #[error(transparent)]
    Compile(#[from] crate::procauto::CompileError),
    #[error(transparent)]
    Synth(#[from] crate::global::SynthError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShieldKind {
    None,
    P1,
    P2,
}

#[derive(Clone, Copy, Debug)]
pub struct BenchConfig {
    pub shield: ShieldKind,
    pub width: i32,
    pub height: i32,
    pub num_obstacles: usize,
    pub num_agents: usize,
    pub radius: u32,
    pub instances: usize,
    pub episodes: usize,
    pub horizon: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            shield: ShieldKind::P1,
            width: 4,
            height: 4,
            num_obstacles: 4,
            num_agents: 2,
            radius: 0,
            instances: 20,
            episodes: 200,
            horizon: 64,
        }
    }
}

pub struct BenchCell {
    pub file: EnvFile,
    pub shielded: Metrics,
    pub unshielded: Metrics,
    pub global_states: usize,
    pub local_states: Vec<usize>,
}

pub struct BenchReport {
    pub cells: Vec<BenchCell>,
}

impl BenchReport {
    pub fn mean_collision_rate_shielded(&self) -> f64 {
        mean(self.cells.iter().map(|c| c.shielded.collision_rate()))
    }

    pub fn mean_collision_rate_unshielded(&self) -> f64 {
        mean(self.cells.iter().map(|c| c.unshielded.collision_rate()))
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(
            "instance,width,height,obstacles,agents,radius,global_states,\
shielded_collision_rate,shielded_reach_rate,shielded_failure_rate,\
unshielded_collision_rate,unshielded_reach_rate\n",
        );
        for (i, c) in self.cells.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
                i,
                c.file.width,
                c.file.height,
                c.file.obstacles.len(),
                c.file.agents.len(),
                c.file.radius,
                c.global_states,
                c.shielded.collision_rate(),
                c.shielded.reach_rate(),
                c.shielded.shield_failure_rate(),
                c.unshielded.collision_rate(),
                c.unshielded.reach_rate(),
            ));
        }
        out
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in it {
        sum += v;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Synthesize a template shield for `env` and project all agents. Returns
/// the global machine's state count alongside the local shields; `None`
/// shields come back empty with zero global states.
pub fn shields_of_kind(
    env: &EnvironmentInstance,
    kind: ShieldKind,
) -> Result<(usize, Vec<LocalMealy>), BenchError> {
    let doc = match kind {
        ShieldKind::None => return Ok((0, Vec::new())),
        ShieldKind::P1 => gen_p1(env),
        ShieldKind::P2 => gen_p2(env),
    };
    let spec = crate::dsl::parse_spec(&doc).map_err(crate::procauto::CompileError::from)?;
    let c = compile_spec(&spec, env)?;
    let auto = compile_automaton(&c, env)?;
    let gm = synthesize_global(&auto, env, SynthOptions::default())?;
    let locals = (0..env.num_agents())
        .map(|i| project_local(&gm, env, i))
        .collect();
    Ok((gm.states.len(), locals))
}

pub fn run_bench(cfg: &BenchConfig, seed: u64) -> Result<BenchReport, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let files = sample_instances(
        cfg.width,
        cfg.height,
        cfg.num_obstacles,
        cfg.num_agents,
        cfg.radius,
        cfg.instances,
        &mut rng,
    );
    if files.is_empty() {
        return Err(BenchError::NoInstances);
    }
    let mut cells = Vec::with_capacity(files.len());
    for (k, file) in files.into_iter().enumerate() {
        let env = EnvironmentInstance::from_file(&file)?;
        let (global_states, shields) = shields_of_kind(&env, cfg.shield)?;
        let ep_seed = seed.wrapping_add(1 + k as u64);
        let (shielded, _) = evaluate(
            &env,
            &shields,
            &Policy::UniformRandom,
            cfg.episodes,
            cfg.horizon,
            ep_seed,
        )?;
        let (unshielded, _) = evaluate(
            &env,
            &[],
            &Policy::UniformRandom,
            cfg.episodes,
            cfg.horizon,
            ep_seed,
        )?;
        cells.push(BenchCell {
            file,
            shielded,
            unshielded,
            global_states,
            local_states: shields.iter().map(|s| s.beliefs.len()).collect(),
        });
    }
    Ok(BenchReport { cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_bench_runs_and_orders_collisions() {
        let cfg = BenchConfig {
            instances: 4,
            episodes: 60,
            ..BenchConfig::default()
        };
        let report = run_bench(&cfg, 17).unwrap();
        assert_eq!(report.cells.len(), 4);
        for c in &report.cells {
            assert_eq!(c.shielded.collisions, 0, "safety shield must block collisions");
        }
        assert!(report.csv().lines().count() == 5);
    }
}

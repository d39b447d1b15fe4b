//! Episode simulation: agents carry their local shields, pick actions from
//! the permitted sets, and the environment advances synchronously.

use crate::env::{Action, EnvironmentInstance};
use crate::local::LocalMealy;
use crate::set::{action_set_iter, action_set_len, ActionSet, ALL_ACTIONS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("shield was synthesized for a different environment (fingerprint mismatch)")]
    MismatchedShield,
}

/// How each agent chooses among its permitted actions.
pub enum Policy<'a> {
    UniformRandom,
    /// Greedy w.r.t. learned per-agent Q tables keyed by (observation id,
    /// action index); ties broken by action index.
    QTables(&'a [Vec<[f64; crate::set::NUM_ACTIONS]>]),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    ReachedTargets,
    Collision,
    ShieldFailure,
    HorizonExhausted,
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    pub steps: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Metrics {
    pub episodes: usize,
    pub reached: usize,
    pub collisions: usize,
    pub shield_failures: usize,
    pub horizon_exhausted: usize,
    pub mean_steps_to_target: f64,
}

impl Metrics {
    pub fn from_results(results: &[EpisodeResult]) -> Metrics {
        let mut m = Metrics {
            episodes: results.len(),
            ..Metrics::default()
        };
        let mut steps_sum = 0usize;
        for r in results {
            match r.outcome {
                Outcome::ReachedTargets => {
                    m.reached += 1;
                    steps_sum += r.steps;
                }
                Outcome::Collision => m.collisions += 1,
                Outcome::ShieldFailure => m.shield_failures += 1,
                Outcome::HorizonExhausted => m.horizon_exhausted += 1,
            }
        }
        m.mean_steps_to_target = if m.reached > 0 {
            steps_sum as f64 / m.reached as f64
        } else {
            f64::NAN
        };
        m
    }

    pub fn collision_rate(&self) -> f64 {
        self.collisions as f64 / self.episodes.max(1) as f64
    }

    pub fn reach_rate(&self) -> f64 {
        self.reached as f64 / self.episodes.max(1) as f64
    }

    pub fn shield_failure_rate(&self) -> f64 {
        self.shield_failures as f64 / self.episodes.max(1) as f64
    }
}

fn pick_action(
    policy: &Policy,
    agent: usize,
    obs: usize,
    permitted: ActionSet,
    rng: &mut ChaCha8Rng,
) -> Action {
    debug_assert!(permitted != 0);
    match policy {
        Policy::UniformRandom => {
            let k = action_set_len(permitted);
            let pick = rng.gen_range(0..k);
            let idx = action_set_iter(permitted).nth(pick).unwrap();
            Action::from_index(idx)
        }
        Policy::QTables(tables) => {
            let row = &tables[agent][obs];
            let mut best = None;
            for a in action_set_iter(permitted) {
                let q = row[a];
                if best.map_or(true, |(bq, _)| q > bq) {
                    best = Some((q, a));
                }
            }
            Action::from_index(best.unwrap().1)
        }
    }
}

/// Run a single episode. `shields` is empty for unshielded runs, otherwise
/// one local shield per agent.
pub fn run_episode(
    env: &EnvironmentInstance,
    shields: &[LocalMealy],
    policy: &Policy,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeResult, SimError> {
    let shielded = !shields.is_empty();
    if shielded {
        for sh in shields {
            if sh.env_fingerprint != env.fingerprint {
                return Err(SimError::MismatchedShield);
            }
        }
    }
    let n = env.num_agents();
    let mut s = env.initial_state();
    let mut q: Vec<usize> = shields.iter().map(|sh| sh.initial).collect();
    if env.all_on_targets(s) {
        return Ok(EpisodeResult {
            outcome: Outcome::ReachedTargets,
            steps: 0,
        });
    }
    for step in 0..horizon {
        let mut actions = Vec::with_capacity(n);
        for i in 0..n {
            let obs = env.obs_id(s, i) as usize;
            let permitted = if shielded {
                let (q2, out) = shields[i].local_step(q[i], obs);
                q[i] = q2;
                match out {
                    Some(u) => u,
                    None => {
                        return Ok(EpisodeResult {
                            outcome: Outcome::ShieldFailure,
                            steps: step,
                        })
                    }
                }
            } else {
                ALL_ACTIONS
            };
            actions.push(pick_action(policy, i, obs, permitted, rng));
        }
        s = env.apply_actions(s, &actions);
        if !env.safe_set.contains(s) {
            return Ok(EpisodeResult {
                outcome: Outcome::Collision,
                steps: step + 1,
            });
        }
        if env.all_on_targets(s) {
            return Ok(EpisodeResult {
                outcome: Outcome::ReachedTargets,
                steps: step + 1,
            });
        }
    }
    Ok(EpisodeResult {
        outcome: Outcome::HorizonExhausted,
        steps: horizon,
    })
}

/// Run `episodes` independent episodes with per-episode seeds derived from
/// `seed` so results are reproducible and order-independent.
pub fn evaluate(
    env: &EnvironmentInstance,
    shields: &[LocalMealy],
    policy: &Policy,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<(Metrics, Vec<EpisodeResult>), SimError> {
    let mut results = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(e as u64 + 1)));
        results.push(run_episode(env, shields, policy, horizon, &mut rng)?);
    }
    Ok((Metrics::from_results(&results), results))
}

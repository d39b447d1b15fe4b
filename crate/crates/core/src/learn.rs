//! Independent tabular Q-learning over observations, optionally constrained
//! by per-agent local shields.

use crate::env::{Action, EnvironmentInstance};
use crate::local::LocalMealy;
use crate::set::{action_set_iter, action_set_len, ActionSet, ALL_ACTIONS, NUM_ACTIONS};
use crate::sim::{evaluate, Metrics, Policy, SimError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardScheme {
    /// +1 on the step that puts every agent on its target, 0 otherwise.
    Reach,
    /// Like `Reach` but collisions additionally cost -1.
    Safe,
}

#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    pub episodes: usize,
    pub horizon: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub reward: RewardScheme,
    /// Every `eval_every` episodes run a greedy evaluation snapshot.
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 4000,
            horizon: 64,
            alpha: 0.1,
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            reward: RewardScheme::Reach,
            eval_every: 400,
            eval_episodes: 200,
        }
    }
}

/// One greedy-evaluation snapshot taken during training.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub episode: usize,
    pub metrics: Metrics,
    /// Fraction of training episodes since the previous snapshot that ended
    /// in a collision. Unlike the greedy `metrics` this reflects the
    /// exploring behavior policy, so it captures how often training itself
    /// is unsafe at this point in the schedule.
    pub window_collision_rate: f64,
}

pub struct TrainResult {
    /// Per-agent Q tables indexed by observation id then action index.
    pub tables: Vec<Vec<[f64; NUM_ACTIONS]>>,
    pub snapshots: Vec<Snapshot>,
    /// Collisions observed during the training episodes themselves.
    pub training_collisions: usize,
}

fn epsilon_greedy(
    row: &[f64; NUM_ACTIONS],
    permitted: ActionSet,
    eps: f64,
    rng: &mut ChaCha8Rng,
) -> usize {
    debug_assert!(permitted != 0);
    if rng.gen::<f64>() < eps {
        let k = action_set_len(permitted);
        let pick = rng.gen_range(0..k);
        return action_set_iter(permitted).nth(pick).unwrap();
    }
    let mut best = None;
    for a in action_set_iter(permitted) {
        if best.map_or(true, |(bq, _)| row[a] > bq) {
            best = Some((row[a], a));
        }
    }
    best.unwrap().1
}

fn max_permitted(row: &[f64; NUM_ACTIONS], permitted: ActionSet) -> f64 {
    action_set_iter(permitted)
        .map(|a| row[a])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Train independent learners. When `shields` is nonempty both the behavior
/// policy and the bootstrap target are masked to the shield's permitted sets.
pub fn train_q(
    env: &EnvironmentInstance,
    shields: &[LocalMealy],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainResult, SimError> {
    let shielded = !shields.is_empty();
    if shielded {
        for sh in shields {
            if sh.env_fingerprint != env.fingerprint {
                return Err(SimError::MismatchedShield);
            }
        }
    }
    let n = env.num_agents();
    let mut tables: Vec<Vec<[f64; NUM_ACTIONS]>> = (0..n)
        .map(|i| vec![[0.0; NUM_ACTIONS]; env.observations[i].len()])
        .collect();
    let mut snapshots = Vec::new();
    let mut training_collisions = 0usize;
    let mut window_collisions = 0usize;
    let mut window_episodes = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for ep in 0..cfg.episodes {
        let frac = if cfg.episodes > 1 {
            ep as f64 / (cfg.episodes - 1) as f64
        } else {
            1.0
        };
        let eps = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
        let mut s = env.initial_state();
        let mut q: Vec<usize> = shields.iter().map(|sh| sh.initial).collect();
        let mut terminated = env.all_on_targets(s);
        for _ in 0..cfg.horizon {
            if terminated {
                break;
            }
            let mut obs = Vec::with_capacity(n);
            let mut permitted = Vec::with_capacity(n);
            let mut acts = Vec::with_capacity(n);
            let mut failed = false;
            for i in 0..n {
                let o = env.obs_id(s, i) as usize;
                let u = if shielded {
                    let (q2, out) = shields[i].local_step(q[i], o);
                    q[i] = q2;
                    match out {
                        Some(u) => u,
                        None => {
                            failed = true;
                            break;
                        }
                    }
                } else {
                    ALL_ACTIONS
                };
                obs.push(o);
                permitted.push(u);
                acts.push(epsilon_greedy(&tables[i][o], u, eps, &mut rng));
            }
            if failed {
                break;
            }
            let actions: Vec<Action> = acts.iter().map(|&a| Action::from_index(a)).collect();
            let s2 = env.apply_actions(s, &actions);
            let collided = !env.safe_set.contains(s2);
            let reached = !collided && env.all_on_targets(s2);
            if collided {
                training_collisions += 1;
                window_collisions += 1;
            }
            let reward = match cfg.reward {
                RewardScheme::Reach => {
                    if reached {
                        1.0
                    } else {
                        0.0
                    }
                }
                RewardScheme::Safe => {
                    (if reached { 1.0 } else { 0.0 }) + if collided { -1.0 } else { 0.0 }
                }
            };
            terminated = collided || reached;
            // Next-step permitted sets for the bootstrap target; peek the
            // shield without committing its state (it is advanced next
            // iteration or the episode ends).
            for i in 0..n {
                let o2 = env.obs_id(s2, i) as usize;
                let next_u = if shielded {
                    let (_, out) = shields[i].local_step(q[i], o2);
                    out.unwrap_or(ALL_ACTIONS)
                } else {
                    ALL_ACTIONS
                };
                let target = if terminated {
                    reward
                } else {
                    reward + cfg.gamma * max_permitted(&tables[i][o2], next_u)
                };
                let cell = &mut tables[i][obs[i]][acts[i]];
                *cell += cfg.alpha * (target - *cell);
            }
            s = s2;
        }
        window_episodes += 1;
        let at_snapshot = cfg.eval_every > 0
            && ((ep + 1) % cfg.eval_every == 0 || ep + 1 == cfg.episodes);
        if at_snapshot {
            let policy = Policy::QTables(&tables);
            let (metrics, _) = evaluate(
                env,
                shields,
                &policy,
                cfg.eval_episodes,
                cfg.horizon,
                seed ^ xeval_u64(ep),
            )?;
            let window_collision_rate = if window_episodes > 0 {
                window_collisions as f64 / window_episodes as f64
            } else {
                0.0
            };
            window_collisions = 0;
            window_episodes = 0;
            snapshots.push(Snapshot {
                episode: ep + 1,
                metrics,
                window_collision_rate,
            });
        }
    }

    Ok(TrainResult {
        tables,
        snapshots,
        training_collisions,
    })
}

fn xeval_u64(ep: usize) -> u64 {
    0x5eed_0000_0000_0000u64 ^ (ep as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_spec;
    use crate::env::BLIND_AGENTS_JSON;
    use crate::global::{synthesize_global, SynthOptions};
    use crate::procauto::{compile_automaton, compile_spec};

    const BLIND_SHIELD_DOC: &str = "\
let g   = { ((1,2),(0,1)) };\n\
let Sh1 = { ((1,1),(0,1)) };\n\
let Sh2 = { ((1,0),(1,1)) };\n\
let Sh3 = { ((1,0),(2,1)) };\n\
process P = (Sh1 . Sh2 . Sh3 . idle ||[g] fail);\n";

    #[test]
    fn shielded_training_never_collides() {
        let env = crate::env::EnvironmentInstance::from_json(BLIND_AGENTS_JSON).unwrap();
        let spec = parse_spec(BLIND_SHIELD_DOC).unwrap();
        let c = compile_spec(&spec, &env).unwrap();
        let auto = compile_automaton(&c, &env).unwrap();
        let gm = synthesize_global(&auto, &env, SynthOptions::default()).unwrap();
        let shields: Vec<_> = (0..2).map(|i| crate::local::project_local(&gm, &env, i)).collect();
        let cfg = TrainConfig {
            episodes: 300,
            eval_every: 150,
            eval_episodes: 50,
            ..TrainConfig::default()
        };
        let r = train_q(&env, &shields, &cfg, 11).unwrap();
        assert_eq!(r.training_collisions, 0);
        for snap in &r.snapshots {
            assert_eq!(snap.metrics.collisions, 0);
        }
    }

    #[test]
    fn single_agent_learns_to_reach() {
        // A lone agent on a corridor: the greedy policy must learn to walk
        // toward its target. (The two-agent blind instance is deliberately
        // unsolvable by memoryless decentralized policies.)
        let env = crate::env::EnvironmentInstance::from_json(
            r#"{"width":5,"height":1,"obstacles":[],"agents":[{"start":[0,0],"target":[4,0]}],"radius":0}"#,
        )
        .unwrap();
        let cfg = TrainConfig {
            episodes: 1000,
            horizon: 16,
            eval_every: 500,
            eval_episodes: 100,
            reward: RewardScheme::Reach,
            ..TrainConfig::default()
        };
        let r = train_q(&env, &[], &cfg, 5).unwrap();
        let last = r.snapshots.last().unwrap();
        assert!(
            last.metrics.reach_rate() > 0.9,
            "greedy policy should reach the target, got {}",
            last.metrics.reach_rate()
        );
        assert!(last.metrics.mean_steps_to_target <= 6.0);
    }
}

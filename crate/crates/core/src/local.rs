//! Projection of the global shield onto a single agent: a Mealy machine over
//! that agent's observations whose states are belief sets of global states.

use crate::env::EnvironmentInstance;
use crate::global::{GlobalMealy, GlobalStateKind, MealyOutput};
use crate::set::{ActionSet, StateSet, ALL_ACTIONS};
use std::collections::HashMap;

/// One local transition: on observation `obs` move to `target` and emit
/// `output` (an action set, or `None` for shield failure).
#[derive(Clone, Debug)]
pub struct LTrans {
    pub obs: usize,
    pub target: usize,
    pub output: Option<ActionSet>,
}

/// A per-agent local shield. States are beliefs over the global Mealy's
/// states; the input alphabet is the agent's observation alphabet.
pub struct LocalMealy {
    pub agent: usize,
    /// Sorted global-state index sets; belief display only.
    pub beliefs: Vec<Vec<usize>>,
    pub names: Vec<String>,
    pub initial: usize,
    /// Per state, transitions sorted by observation id; observations absent
    /// from a state's list are impossible given its belief.
    pub transitions: Vec<Vec<LTrans>>,
    pub num_obs: usize,
    pub env_fingerprint: u64,
}

impl LocalMealy {
    /// Advance on an observation. Inconsistent observations (unreachable
    /// under the belief) conservatively fail.
    pub fn local_step(&self, state: usize, obs: usize) -> (usize, Option<ActionSet>) {
        match self.transitions[state].binary_search_by_key(&obs, |t| t.obs) {
            Ok(i) => {
                let t = &self.transitions[state][i];
                (t.target, t.output)
            }
            Err(_) => (state, None),
        }
    }

    pub fn num_edges(&self) -> usize {
        self.transitions.iter().map(|t| t.len()).sum()
    }
}

/// Which environment states a global state admits for transition purposes.
/// Unlike output computation, the `fail` global state admits every state.
fn admitted(gm: &GlobalMealy, g: usize, num_states: usize) -> StateSet {
    gm.possible_states(g, num_states)
}

/// Project the global shield onto agent `agent` (0-based).
pub fn project_local(
    gm: &GlobalMealy,
    env: &EnvironmentInstance,
    agent: usize,
) -> LocalMealy {
    let ns = env.num_states;
    let num_obs = env.observations[agent].len();
    let fail_global: Option<usize> = gm
        .states
        .iter()
        .position(|k| matches!(k, GlobalStateKind::Fail));

    let mut beliefs: Vec<Vec<usize>> = Vec::new();
    let mut index_of: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut transitions: Vec<Vec<LTrans>> = Vec::new();
    let mut intern = |b: Vec<usize>,
                      beliefs: &mut Vec<Vec<usize>>,
                      transitions: &mut Vec<Vec<LTrans>>|
     -> (usize, bool) {
        if let Some(&i) = index_of.get(&b) {
            (i, false)
        } else {
            beliefs.push(b.clone());
            transitions.push(Vec::new());
            index_of.insert(b, beliefs.len() - 1);
            (beliefs.len() - 1, true)
        }
    };

    let (initial, _) = intern(vec![gm.initial], &mut beliefs, &mut transitions);
    let mut work = vec![initial];
    while let Some(b_idx) = work.pop() {
        let belief = beliefs[b_idx].clone();
        let mut edges: Vec<LTrans> = Vec::new();
        for obs in 0..num_obs {
            let obs_states = &env.obs_states[agent][obs];
            // Successor global states under environment states compatible
            // with the observation, plus a conservative `fail` member when
            // some compatible state lies outside a member's admitted set
            // (the shield cannot rule out having already failed there).
            let mut succ: Vec<usize> = Vec::new();
            let mut any = false;
            let mut out: Option<ActionSet> = None; // None = no contribution yet
            let mut saw_bot = false;
            for &g in &belief {
                let admit = admitted(gm, g, ns);
                let mut compat = admit.clone();
                compat.intersect_with(obs_states);
                if compat.is_empty() {
                    // This member is impossible under the observation; if
                    // the observation is compatible with *some* state at
                    // all, the run may still have failed out of this member.
                    if !obs_states.is_empty() && !matches!(gm.states[g], GlobalStateKind::Fail) {
                        if let Some(f) = fail_global {
                            if !succ.contains(&f) {
                                succ.push(f);
                            }
                        }
                    }
                    continue;
                }
                any = true;
                let strict_fail = matches!(gm.states[g], GlobalStateKind::Fail);
                let partial = {
                    let mut outside = obs_states.clone();
                    outside.subtract(&admit);
                    !outside.is_empty()
                };
                if partial && !strict_fail {
                    if let Some(f) = fail_global {
                        if !succ.contains(&f) {
                            succ.push(f);
                        }
                    }
                }
                for s in compat.iter() {
                    let (g2, o) = gm.step(g, s);
                    if !succ.contains(&g2) {
                        succ.push(g2);
                    }
                    match o {
                        MealyOutput::Bot => {
                            if strict_fail {
                                // fail contributes every action, not bot
                                out = Some(out.unwrap_or(ALL_ACTIONS));
                            } else {
                                saw_bot = true;
                            }
                        }
                        MealyOutput::Product(us) => {
                            let u = us[agent];
                            out = Some(out.map_or(u, |x| x & u));
                        }
                    }
                }
            }
            if !any {
                // Observation impossible under this belief: no edge; the
                // runtime treats it as failure.
                continue;
            }
            succ.sort_unstable();
            let output = if saw_bot {
                None
            } else {
                match out {
                    Some(u) if u != 0 => Some(u),
                    _ => None,
                }
            };
            let (target, fresh) = intern(succ, &mut beliefs, &mut transitions);
            if fresh {
                work.push(target);
            }
            edges.push(LTrans {
                obs,
                target,
                output,
            });
        }
        edges.sort_by_key(|t| t.obs);
        transitions[b_idx] = edges;
    }

    let names: Vec<String> = beliefs
        .iter()
        .map(|b| {
            let parts: Vec<&str> = b.iter().map(|&g| gm.names[g].as_str()).collect();
            format!("{{{}}}", parts.join(", "))
        })
        .collect();

    LocalMealy {
        agent,
        beliefs,
        names,
        initial,
        transitions,
        num_obs,
        env_fingerprint: env.fingerprint,
    }
}

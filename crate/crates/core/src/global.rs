//! Global shield Mealy machine synthesis: reachable-belief exploration over
//! the process automaton, joint-action feasibility, and the deterministic
//! decomposition into per-agent action sets.

use crate::env::EnvironmentInstance;
use crate::procauto::{AutomatonState, ProcessAutomaton, FAIL_SINK, IDLE_SINK, START};
use crate::set::{action_set_len, ActionSet, BitSet, StateSet, NUM_ACTIONS};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("global Mealy exploration exceeded {0} states")]
    TooManyStates(usize),
}

const GLOBAL_STATE_CAP: usize = 500_000;

/// A Mealy output: either shield failure or a product of nonempty per-agent
/// action sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MealyOutput {
    Bot,
    Product(Vec<ActionSet>),
}

impl MealyOutput {
    pub fn is_bot(&self) -> bool {
        matches!(self, MealyOutput::Bot)
    }

    pub fn product_size(&self) -> usize {
        match self {
            MealyOutput::Bot => 0,
            MealyOutput::Product(us) => us.iter().map(|&u| action_set_len(u)).product(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GlobalStateKind {
    Fail,
    Idle { hold: StateSet },
    Live { belief: StateSet, auto_state: usize },
}

#[derive(Clone, Debug)]
pub struct GTrans {
    pub label: usize, // index into GlobalMealy::labels
    pub target: usize,
    pub output: MealyOutput,
}

/// The synthesized global shield. Input alphabet is `S`; per-state transition
/// labels partition `S`.
pub struct GlobalMealy {
    pub states: Vec<GlobalStateKind>,
    pub names: Vec<String>,
    pub initial: usize,
    pub transitions: Vec<Vec<GTrans>>,
    pub labels: Vec<StateSet>,
    pub env_fingerprint: u64,
    pub options: SynthOptions,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdlePolicy {
    /// After successful termination the shield confines the system to the
    /// last consumed shield set.
    Hold,
    /// After successful termination the shield is unconstrained.
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecMode {
    Exhaustive,
    Greedy,
}

#[derive(Clone, Copy, Debug)]
pub struct SynthOptions {
    pub refine_belief: bool,
    pub idle_policy: IdlePolicy,
    pub dec: DecMode,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            refine_belief: true,
            idle_policy: IdlePolicy::Hold,
            dec: DecMode::Exhaustive,
        }
    }
}

/// Joint actions guaranteed to land in `targets` from every state of
/// `sources`.
pub fn allowed_joint(
    env: &EnvironmentInstance,
    sources: &StateSet,
    targets: &StateSet,
) -> BitSet {
    let mut acc: Option<BitSet> = None;
    for s in sources.iter() {
        let into = env.joint_into(s, targets);
        match &mut acc {
            None => acc = Some(into),
            Some(a) => a.intersect_with(&into),
        }
    }
    acc.unwrap_or_else(|| BitSet::empty(env.num_joint_actions))
}

/// Per-agent projections of a joint-action set.
fn projections(n: usize, joint: &BitSet) -> Vec<ActionSet> {
    let mut proj = vec![0u8; n];
    for a in joint.iter() {
        let mut x = a;
        for i in (0..n).rev() {
            proj[i] |= 1 << (x % NUM_ACTIONS);
            x /= NUM_ACTIONS;
        }
    }
    proj
}

fn product_subset_of(n: usize, us: &[ActionSet], joint: &BitSet) -> bool {
    fn rec(n: usize, us: &[ActionSet], joint: &BitSet, i: usize, acc: usize) -> bool {
        if i == n {
            return joint.contains(acc);
        }
        for a in 0..NUM_ACTIONS {
            if us[i] >> a & 1 == 1 && !rec(n, us, joint, i + 1, acc * NUM_ACTIONS + a) {
                return false;
            }
        }
        true
    }
    rec(n, us, joint, 0, 0)
}

/// Candidate comparison: larger product first, then lexicographically larger
/// cardinality vector, then lexicographically smaller per-agent action lists.
fn better(cand: &[ActionSet], best: &[ActionSet]) -> bool {
    let size = |us: &[ActionSet]| -> usize { us.iter().map(|&u| action_set_len(u)).product() };
    let (cs, bs) = (size(cand), size(best));
    if cs != bs {
        return cs > bs;
    }
    let cv: Vec<usize> = cand.iter().map(|&u| action_set_len(u)).collect();
    let bv: Vec<usize> = best.iter().map(|&u| action_set_len(u)).collect();
    if cv != bv {
        return cv > bv;
    }
    // Smaller action lists win; masks compare like sorted index lists when
    // compared bit-by-bit from the lowest action.
    for (c, b) in cand.iter().zip(best.iter()) {
        if c != b {
            let lists = |m: ActionSet| -> Vec<usize> {
                (0..NUM_ACTIONS).filter(|&a| m >> a & 1 == 1).collect()
            };
            return lists(*c) < lists(*b);
        }
    }
    false
}

/// Deterministic decomposition of a joint-action set into a
/// maximum-cardinality product of per-agent sets contained in it.
pub fn decompose(env: &EnvironmentInstance, joint: &BitSet, mode: DecMode) -> MealyOutput {
    if joint.is_empty() {
        return MealyOutput::Bot;
    }
    let n = env.num_agents();
    match mode {
        DecMode::Exhaustive => decompose_exhaustive(n, joint),
        DecMode::Greedy => decompose_greedy(n, joint),
    }
}

fn decompose_exhaustive(n: usize, joint: &BitSet) -> MealyOutput {
    // Recursively choose agent i's set, intersecting the slices it selects;
    // the last agent takes the whole remaining intersection.
    fn slices(n: usize, i: usize, set: &BitSet) -> Vec<BitSet> {
        // For the suffix set over agents i..n, the slice of action a is the
        // suffix set over agents i+1..n compatible with a.
        let tail = NUM_ACTIONS.pow((n - i - 1) as u32);
        let mut out = vec![BitSet::empty(tail); NUM_ACTIONS];
        for x in set.iter() {
            out[x / tail].insert(x % tail);
        }
        out
    }
    fn rec(n: usize, i: usize, set: &BitSet, prefix: &mut Vec<ActionSet>, best: &mut Option<Vec<ActionSet>>) {
        if i == n - 1 {
            let mut mask: ActionSet = 0;
            for a in set.iter() {
                mask |= 1 << a;
            }
            if mask == 0 {
                return;
            }
            prefix.push(mask);
            if best.as_ref().map_or(true, |b| better(prefix, b)) {
                *best = Some(prefix.clone());
            }
            prefix.pop();
            return;
        }
        let sl = slices(n, i, set);
        let avail: Vec<usize> = (0..NUM_ACTIONS).filter(|&a| !sl[a].is_empty()).collect();
        let k = avail.len();
        for choice in 1u32..(1 << k) {
            let mut mask: ActionSet = 0;
            let mut inter: Option<BitSet> = None;
            for (bit, &a) in avail.iter().enumerate() {
                if choice >> bit & 1 == 1 {
                    mask |= 1 << a;
                    match &mut inter {
                        None => inter = Some(sl[a].clone()),
                        Some(x) => x.intersect_with(&sl[a]),
                    }
                }
            }
            let inter = inter.unwrap();
            if inter.is_empty() {
                continue;
            }
            prefix.push(mask);
            rec(n, i + 1, &inter, prefix, best);
            prefix.pop();
        }
    }
    if n == 1 {
        let mut mask: ActionSet = 0;
        for a in joint.iter() {
            mask |= 1 << a;
        }
        return MealyOutput::Product(vec![mask]);
    }
    let mut best = None;
    rec(n, 0, joint, &mut Vec::new(), &mut best);
    match best {
        Some(us) => MealyOutput::Product(us),
        None => MealyOutput::Bot,
    }
}

fn decompose_greedy(n: usize, joint: &BitSet) -> MealyOutput {
    let seed = joint.first().expect("nonempty");
    let mut us: Vec<ActionSet> = Vec::with_capacity(n);
    let mut x = seed;
    for _ in 0..n {
        us.push(1u8 << (x % NUM_ACTIONS));
        x /= NUM_ACTIONS;
    }
    us.reverse();
    let proj = projections(n, joint);
    // Grow coordinate-wise while the product stays inside the joint set.
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            for a in 0..NUM_ACTIONS {
                if us[i] >> a & 1 == 1 || proj[i] >> a & 1 == 0 {
                    continue;
                }
                let mut cand = us.clone();
                cand[i] |= 1 << a;
                if product_subset_of(n, &cand, joint) {
                    us = cand;
                    changed = true;
                }
            }
        }
    }
    MealyOutput::Product(us)
}

/// States reachable from `sources` under any joint action of the product.
fn post_under_product(
    env: &EnvironmentInstance,
    sources: &StateSet,
    us: &[ActionSet],
) -> StateSet {
    let mut out = BitSet::empty(env.num_states);
    let joint: Vec<usize> = enumerate_product(us);
    for s in sources.iter() {
        for &a in &joint {
            out.insert(env.apply_joint(s, a));
        }
    }
    out
}

/// All joint-action indices of a product of per-agent masks.
pub fn enumerate_product(us: &[ActionSet]) -> Vec<usize> {
    let mut acc = vec![0usize];
    for &u in us {
        let mut next = Vec::with_capacity(acc.len() * action_set_len(u));
        for base in acc {
            for a in 0..NUM_ACTIONS {
                if u >> a & 1 == 1 {
                    next.push(base * NUM_ACTIONS + a);
                }
            }
        }
        acc = next;
    }
    acc
}

/// Forward exploration of the global shield from `(S0, start)`.
pub fn synthesize_global(
    auto: &ProcessAutomaton,
    env: &EnvironmentInstance,
    options: SynthOptions,
) -> Result<GlobalMealy, SynthError> {
    let ns = env.num_states;
    let full = BitSet::full(ns);
    let mut states: Vec<GlobalStateKind> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut transitions: Vec<Vec<GTrans>> = Vec::new();
    let mut labels: Vec<StateSet> = Vec::new();
    let mut label_ids: HashMap<StateSet, usize> = HashMap::new();
    let mut index_of: HashMap<GlobalStateKind, usize> = HashMap::new();

    let intern_label = |labels: &mut Vec<StateSet>,
                            label_ids: &mut HashMap<StateSet, usize>,
                            set: &StateSet|
     -> usize {
        if let Some(&i) = label_ids.get(set) {
            i
        } else {
            labels.push(set.clone());
            label_ids.insert(set.clone(), labels.len() - 1);
            labels.len() - 1
        }
    };

    let name_of = |kind: &GlobalStateKind, env: &EnvironmentInstance, auto: &ProcessAutomaton| {
        match kind {
            GlobalStateKind::Fail => "fail".to_string(),
            GlobalStateKind::Idle { hold } => format!("idle[{}]", hold.count()),
            GlobalStateKind::Live { belief, auto_state } => {
                let _ = env;
                format!(
                    "(|{}|,{})",
                    belief.count(),
                    auto.states[*auto_state].display()
                )
            }
        }
    };

    let mut work: Vec<usize> = Vec::new();
    macro_rules! intern_state {
        ($kind:expr) => {{
            let kind = $kind;
            if let Some(&i) = index_of.get(&kind) {
                i
            } else {
                if states.len() >= GLOBAL_STATE_CAP {
                    return Err(SynthError::TooManyStates(GLOBAL_STATE_CAP));
                }
                let name = name_of(&kind, env, auto);
                states.push(kind.clone());
                names.push(name);
                transitions.push(Vec::new());
                index_of.insert(kind, states.len() - 1);
                work.push(states.len() - 1);
                states.len() - 1
            }
        }};
    }

    let initial_kind = GlobalStateKind::Live {
        belief: env.initial_set.clone(),
        auto_state: START,
    };
    let initial = intern_state!(initial_kind);
    let mut head = 0usize;
    while head < work.len() {
        let g = work[head];
        head += 1;
        let kind = states[g].clone();
        let mut edges: Vec<GTrans> = Vec::new();
        match kind {
            GlobalStateKind::Fail => {
                let l = intern_label(&mut labels, &mut label_ids, &full);
                edges.push(GTrans {
                    label: l,
                    target: g,
                    output: MealyOutput::Bot,
                });
            }
            GlobalStateKind::Idle { ref hold } => {
                let l = intern_label(&mut labels, &mut label_ids, &full);
                let loop_allowed = allowed_joint(env, hold, hold);
                edges.push(GTrans {
                    label: l,
                    target: g,
                    output: decompose(env, &loop_allowed, options.dec),
                });
            }
            GlobalStateKind::Live {
                ref belief,
                auto_state,
            } => {
                let shield_of_src: Option<&StateSet> = match &auto.states[auto_state] {
                    AutomatonState::Head { shield, .. } => Some(&shield.set),
                    _ => None,
                };
                let auto_edges = auto.transitions[auto_state].clone();
                for (label_set, q_next) in auto_edges {
                    let lid = intern_label(&mut labels, &mut label_ids, &label_set);
                    let mut inter = belief.clone();
                    inter.intersect_with(&label_set);
                    macro_rules! push_fail {
                        () => {{
                            let fail_idx = intern_state!(GlobalStateKind::Fail);
                            edges.push(GTrans {
                                label: lid,
                                target: fail_idx,
                                output: MealyOutput::Bot,
                            });
                        }};
                    }
                    if q_next == FAIL_SINK || inter.is_empty() {
                        push_fail!();
                        continue;
                    }
                    if q_next == IDLE_SINK {
                        let hold = match options.idle_policy {
                            IdlePolicy::Hold => {
                                let mut h = label_set.clone();
                                if let Some(sh) = shield_of_src {
                                    h.intersect_with(sh);
                                }
                                h
                            }
                            IdlePolicy::All => full.clone(),
                        };
                        let allowed = allowed_joint(env, &inter, &hold);
                        if allowed.is_empty() {
                            push_fail!();
                            continue;
                        }
                        let output = decompose(env, &allowed, options.dec);
                        let target = intern_state!(GlobalStateKind::Idle { hold });
                        edges.push(GTrans {
                            label: lid,
                            target,
                            output,
                        });
                        continue;
                    }
                    // Live head target.
                    let next_shield = match &auto.states[q_next] {
                        AutomatonState::Head { shield, .. } => shield.set.clone(),
                        _ => unreachable!("non-sink targets are heads"),
                    };
                    let allowed = allowed_joint(env, &inter, &next_shield);
                    if allowed.is_empty() {
                        push_fail!();
                        continue;
                    }
                    let output = decompose(env, &allowed, options.dec);
                    let belief_next = if options.refine_belief {
                        let us = match &output {
                            MealyOutput::Product(us) => us.clone(),
                            MealyOutput::Bot => unreachable!(),
                        };
                        let mut b = post_under_product(env, &inter, &us);
                        b.intersect_with(&next_shield);
                        b
                    } else {
                        next_shield
                    };
                    let target = intern_state!(GlobalStateKind::Live {
                        belief: belief_next,
                        auto_state: q_next,
                    });
                    edges.push(GTrans {
                        label: lid,
                        target,
                        output,
                    });
                }
            }
        }
        transitions[g] = edges;
    }

    Ok(GlobalMealy {
        states,
        names,
        initial,
        transitions,
        labels,
        env_fingerprint: env.fingerprint,
        options,
    })
}

impl GlobalMealy {
    /// Transition index taken from `state` on input `s`.
    pub fn route(&self, state: usize, s: usize) -> usize {
        for (i, t) in self.transitions[state].iter().enumerate() {
            if self.labels[t.label].contains(s) {
                return i;
            }
        }
        unreachable!("global Mealy labels partition S")
    }

    pub fn step(&self, state: usize, s: usize) -> (usize, &MealyOutput) {
        let t = &self.transitions[state][self.route(state, s)];
        (t.target, &t.output)
    }

    /// The set of underlying environment states a global state considers
    /// possible (fail is compatible with everything).
    pub fn possible_states(&self, state: usize, num_states: usize) -> StateSet {
        match &self.states[state] {
            GlobalStateKind::Fail => BitSet::full(num_states),
            GlobalStateKind::Idle { hold } => hold.clone(),
            GlobalStateKind::Live { belief, .. } => belief.clone(),
        }
    }

    pub fn num_edges(&self) -> usize {
        self.transitions.iter().map(|t| t.len()).sum()
    }
}

// Shared between multiple test binaries; not every binary uses every helper.
#![allow(dead_code)]

//! Shared fixtures: the small-environment corpus, pipeline helpers, and
//! independent brute-force oracles used to cross-check the library.

use shield_core::dsl::parse_spec;
use shield_core::env::{Action, EnvironmentInstance};
use shield_core::global::{
    synthesize_global, DecMode, GlobalMealy, MealyOutput, SynthOptions,
};
use shield_core::local::{project_local, LocalMealy};
use shield_core::procauto::{compile_automaton, compile_spec, ProcessAutomaton};
use shield_core::set::{action_set_len, ActionSet, BitSet, StateSet, NUM_ACTIONS};

pub const BLIND_ENV: &str = r#"{"width":3,"height":3,"obstacles":[[0,0],[2,0],[0,2],[2,2]],"agents":[{"start":[1,2],"target":[1,0]},{"start":[0,1],"target":[2,1]}],"radius":0}"#;

pub const BLIND_SHIELD: &str = "\
let g   = { ((1,2),(0,1)) };\n\
let Sh1 = { ((1,1),(0,1)) };\n\
let Sh2 = { ((1,0),(1,1)) };\n\
let Sh3 = { ((1,0),(2,1)) };\n\
process P = (Sh1 . Sh2 . Sh3 . idle ||[g] fail);\n";

/// Corpus of environments with at most 100 global states.
pub fn small_envs() -> Vec<(&'static str, EnvironmentInstance)> {
    let jsons: Vec<(&str, &str)> = vec![
        ("blind3x3", BLIND_ENV),
        (
            "corridor1x8",
            r#"{"width":8,"height":1,"obstacles":[],"agents":[{"start":[0,0],"target":[7,0]},{"start":[7,0],"target":[0,0]}],"radius":0}"#,
        ),
        (
            "open2x3",
            r#"{"width":3,"height":2,"obstacles":[],"agents":[{"start":[0,0],"target":[2,1]},{"start":[2,1],"target":[0,0]}],"radius":0}"#,
        ),
        (
            "open3x3_r1",
            r#"{"width":3,"height":3,"obstacles":[[1,1]],"agents":[{"start":[0,0],"target":[2,2]},{"start":[2,2],"target":[0,0]}],"radius":1}"#,
        ),
        (
            "blind3x3_r1",
            r#"{"width":3,"height":3,"obstacles":[[0,0],[2,0],[0,2],[2,2]],"agents":[{"start":[1,2],"target":[1,0]},{"start":[0,1],"target":[2,1]}],"radius":1}"#,
        ),
        (
            "lone5x1",
            r#"{"width":5,"height":1,"obstacles":[],"agents":[{"start":[0,0],"target":[4,0]}],"radius":0}"#,
        ),
        (
            "tight2x2_r1",
            r#"{"width":2,"height":2,"obstacles":[],"agents":[{"start":[0,0],"target":[1,1]},{"start":[1,1],"target":[0,0]}],"radius":1}"#,
        ),
    ];
    jsons
        .into_iter()
        .map(|(name, j)| {
            let env = EnvironmentInstance::from_json(j).unwrap();
            assert!(env.num_states <= 100, "{name} exceeds corpus bound");
            (name, env)
        })
        .collect()
}

/// Shield documents to pair with an environment: generated templates plus,
/// for the blind instance, the handwritten path shield and extra handwritten
/// exercises of recursion and guarded choice.
pub fn docs_for(name: &str, env: &EnvironmentInstance) -> Vec<(String, String)> {
    let mut docs = vec![
        ("p1".to_string(), shield_core::templates::gen_p1(env)),
        ("p2".to_string(), shield_core::templates::gen_p2(env)),
        ("idle".to_string(), "process P = idle;".to_string()),
        (
            "two_step".to_string(),
            "process P = SAFE . SAFE . idle;".to_string(),
        ),
    ];
    if name == "blind3x3" {
        docs.push(("blind".to_string(), BLIND_SHIELD.to_string()));
        docs.push((
            "guarded".to_string(),
            "let g = { ((1,2),(0,1)) };\nprocess P = mu X . (SAFE . X ||[g] SAFE . idle);"
                .to_string(),
        ));
    }
    docs
}

pub struct Built {
    pub auto: ProcessAutomaton,
    pub bindings: Vec<(String, StateSet)>,
    pub global: GlobalMealy,
    pub locals: Vec<LocalMealy>,
}

pub fn build(env: &EnvironmentInstance, doc: &str, options: SynthOptions) -> Built {
    let spec = parse_spec(doc).unwrap();
    let compiled = compile_spec(&spec, env).unwrap();
    let auto = compile_automaton(&compiled, env).unwrap();
    let global = synthesize_global(&auto, env, options).unwrap();
    let locals = (0..env.num_agents())
        .map(|i| project_local(&global, env, i))
        .collect();
    Built {
        auto,
        bindings: compiled.bindings,
        global,
        locals,
    }
}

/// Independent `allowed_joint` oracle: walks each agent's cell by hand
/// instead of using the environment's joint-action tables.
pub fn allowed_joint_oracle(
    env: &EnvironmentInstance,
    sources: &StateSet,
    targets: &StateSet,
) -> BitSet {
    let n = env.num_agents();
    let mut out = BitSet::empty(env.num_joint_actions);
    'joint: for a in 0..env.num_joint_actions {
        let mut digits = Vec::with_capacity(n);
        let mut x = a;
        for _ in 0..n {
            digits.push(x % NUM_ACTIONS);
            x /= NUM_ACTIONS;
        }
        digits.reverse();
        for s in sources.iter() {
            let cells = env.cells_of(s);
            let mut next = Vec::with_capacity(n);
            for (i, &(c, r)) in cells.iter().enumerate() {
                let (dc, dr) = Action::from_index(digits[i]).delta();
                let cand = (c + dc, r + dr);
                next.push(if env.is_free(cand.0, cand.1) { cand } else { (c, r) });
            }
            let s2 = env.state_of_cells(&next).unwrap();
            if !targets.contains(s2) {
                continue 'joint;
            }
        }
        out.insert(a);
    }
    out
}

fn product_in(us: &[ActionSet], joint: &BitSet) -> bool {
    let mut stack = vec![(0usize, 0usize)];
    while let Some((i, acc)) = stack.pop() {
        if i == us.len() {
            if !joint.contains(acc) {
                return false;
            }
            continue;
        }
        for a in 0..NUM_ACTIONS {
            if us[i] >> a & 1 == 1 {
                stack.push((i + 1, acc * NUM_ACTIONS + a));
            }
        }
    }
    true
}

/// Brute-force decomposition oracle: enumerates every product of nonempty
/// per-agent subsets and applies the documented tie-break order.
pub fn decompose_oracle(n: usize, joint: &BitSet) -> MealyOutput {
    if joint.is_empty() {
        return MealyOutput::Bot;
    }
    let mut best: Option<Vec<ActionSet>> = None;
    let mut cand = vec![1u8; n];
    loop {
        if product_in(&cand, joint) {
            let replace = match &best {
                None => true,
                Some(b) => {
                    let size = |us: &[ActionSet]| -> usize {
                        us.iter().map(|&u| action_set_len(u)).product()
                    };
                    let card = |us: &[ActionSet]| -> Vec<usize> {
                        us.iter().map(|&u| action_set_len(u)).collect()
                    };
                    let lists = |us: &[ActionSet]| -> Vec<Vec<usize>> {
                        us.iter()
                            .map(|&u| (0..NUM_ACTIONS).filter(|&a| u >> a & 1 == 1).collect())
                            .collect()
                    };
                    (size(&cand), card(&cand), std::cmp::Reverse(lists(&cand)))
                        > (size(b), card(b), std::cmp::Reverse(lists(b)))
                }
            };
            if replace {
                best = Some(cand.clone());
            }
        }
        // advance the odometer over nonempty masks 1..=31 per agent
        let mut i = n;
        loop {
            if i == 0 {
                return match best {
                    Some(us) => MealyOutput::Product(us),
                    None => MealyOutput::Bot,
                };
            }
            i -= 1;
            if cand[i] < 31 {
                cand[i] += 1;
                break;
            }
            cand[i] = 1;
        }
    }
}

/// Exhaustive co-simulation over reachable (state, global, locals)
/// configurations; calls `check` on every configuration before expansion.
pub fn cosimulate<F>(env: &EnvironmentInstance, b: &Built, mut check: F) -> usize
where
    F: FnMut(usize, usize, &[usize]),
{
    use std::collections::HashSet;
    let n = env.num_agents();
    let s0 = env.initial_state();
    let q0: Vec<usize> = b.locals.iter().map(|l| l.initial).collect();
    let mut seen: HashSet<(usize, usize, Vec<usize>)> = HashSet::new();
    let mut stack = vec![(s0, b.global.initial, q0)];
    seen.insert((s0, b.global.initial, stack[0].2.clone()));
    let mut visited = 0usize;
    while let Some((s, g, qs)) = stack.pop() {
        visited += 1;
        check(s, g, &qs);
        let (g2, gout) = b.global.step(g, s);
        if gout.is_bot() {
            continue;
        }
        let mut outs: Vec<ActionSet> = Vec::with_capacity(n);
        let mut q2: Vec<usize> = Vec::with_capacity(n);
        let mut failed = false;
        for i in 0..n {
            let o = env.obs_id(s, i) as usize;
            let (qn, u) = b.locals[i].local_step(qs[i], o);
            q2.push(qn);
            match u {
                Some(u) => outs.push(u),
                None => {
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            continue;
        }
        for joint in shield_core::global::enumerate_product(&outs) {
            let s2 = env.apply_joint(s, joint);
            let cfg = (s2, g2, q2.clone());
            if seen.insert(cfg.clone()) {
                stack.push((cfg.0, cfg.1, cfg.2));
            }
        }
    }
    visited
}

pub fn default_options() -> SynthOptions {
    SynthOptions {
        refine_belief: true,
        idle_policy: shield_core::global::IdlePolicy::Hold,
        dec: DecMode::Exhaustive,
    }
}

//! Compilation of well-formed shield processes into deterministic process
//! automata over the global state alphabet.

use crate::dsl::ast::{ProcessTerm, ShieldSpec, StateSetExpr};
use crate::dsl::check::{check_wellformed, subterm_count};
use crate::dsl::eval::{eval_bindings, eval_set};
use crate::dsl::print::print_setexpr;
use crate::env::EnvironmentInstance;
use crate::error::DslError;
use crate::set::{BitSet, StateSet};
use std::collections::HashMap;
use std::rc::Rc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("specification is not well-formed: {0:?}")]
    NotWellFormed(Vec<DslError>),
    #[error("internal error: resolution exceeded the unfolding bound")]
    UnfoldingBound,
}

/// An evaluated state set together with the display name it was written as.
#[derive(Clone)]
pub struct LabeledSet {
    pub set: StateSet,
    pub name: String,
}

/// A process term with all set expressions evaluated to bitsets.
pub enum CTerm {
    Idle,
    Fail,
    Mu(String, Rc<CTerm>),
    Var(String),
    Prefix(LabeledSet, Rc<CTerm>),
    Guarded(Rc<CTerm>, LabeledSet, Rc<CTerm>),
}

/// A compiled spec: evaluated bindings plus the lowered root term.
pub struct CompiledSpec {
    pub bindings: Vec<(String, StateSet)>,
    pub root: Rc<CTerm>,
    pub unfold_bound: usize,
    pub num_states: usize,
}

fn display_name(expr: &StateSetExpr) -> String {
    print_setexpr(expr)
}

fn lower(
    term: &ProcessTerm,
    env: &EnvironmentInstance,
    resolved: &HashMap<String, StateSet>,
) -> Result<Rc<CTerm>, DslError> {
    Ok(Rc::new(match term {
        ProcessTerm::Idle => CTerm::Idle,
        ProcessTerm::Fail => CTerm::Fail,
        ProcessTerm::Var(v) => CTerm::Var(v.clone()),
        ProcessTerm::Mu(v, body) => CTerm::Mu(v.clone(), lower(body, env, resolved)?),
        ProcessTerm::Prefix(sh, cont) => CTerm::Prefix(
            LabeledSet {
                set: eval_set(sh, env, resolved)?,
                name: display_name(sh),
            },
            lower(cont, env, resolved)?,
        ),
        ProcessTerm::GuardedChoice(l, g, r) => CTerm::Guarded(
            lower(l, env, resolved)?,
            LabeledSet {
                set: eval_set(g, env, resolved)?,
                name: display_name(g),
            },
            lower(r, env, resolved)?,
        ),
    }))
}

/// Validates and lowers a spec against a concrete environment.
pub fn compile_spec(
    spec: &ShieldSpec,
    env: &EnvironmentInstance,
) -> Result<CompiledSpec, CompileError> {
    let report = check_wellformed(spec);
    if !report.is_ok() {
        return Err(CompileError::NotWellFormed(report.violations));
    }
    let bindings = eval_bindings(spec, env)?;
    let resolved: HashMap<String, StateSet> = bindings.iter().cloned().collect();
    let root = lower(&spec.root, env, &resolved)?;
    Ok(CompiledSpec {
        bindings,
        root,
        unfold_bound: subterm_count(&spec.root) + 2,
        num_states: env.num_states,
    })
}

/// Capture-respecting substitution of `var` by `repl`.
fn subst(term: &Rc<CTerm>, var: &str, repl: &Rc<CTerm>) -> Rc<CTerm> {
    match &**term {
        CTerm::Idle | CTerm::Fail => term.clone(),
        CTerm::Var(v) => {
            if v == var {
                repl.clone()
            } else {
                term.clone()
            }
        }
        CTerm::Mu(v, body) => {
            if v == var {
                term.clone() // shadowed
            } else {
                Rc::new(CTerm::Mu(v.clone(), subst(body, var, repl)))
            }
        }
        CTerm::Prefix(sh, cont) => Rc::new(CTerm::Prefix(sh.clone(), subst(cont, var, repl))),
        CTerm::Guarded(l, g, r) => Rc::new(CTerm::Guarded(
            subst(l, var, repl),
            g.clone(),
            subst(r, var, repl),
        )),
    }
}

/// Canonical printed form with alpha-renaming of binders to X0, X1, ...
pub fn canonical_display(term: &CTerm) -> String {
    fn go(t: &CTerm, map: &mut Vec<(String, String)>, counter: &mut usize, out: &mut String) {
        match t {
            CTerm::Idle => out.push_str("idle"),
            CTerm::Fail => out.push_str("fail"),
            CTerm::Var(v) => {
                let canon = map
                    .iter()
                    .rev()
                    .find(|(orig, _)| orig == v)
                    .map(|(_, c)| c.clone())
                    .unwrap_or_else(|| v.clone());
                out.push_str(&canon);
            }
            CTerm::Mu(v, body) => {
                let canon = format!("X{}", *counter);
                *counter += 1;
                out.push_str(&format!("mu {canon} . "));
                map.push((v.clone(), canon));
                go(body, map, counter, out);
                map.pop();
            }
            CTerm::Prefix(sh, cont) => {
                out.push_str(&sh.name);
                out.push('.');
                go(cont, map, counter, out);
            }
            CTerm::Guarded(l, g, r) => {
                out.push('(');
                go(l, map, counter, out);
                out.push_str(&format!(" ||[{}] ", g.name));
                go(r, map, counter, out);
                out.push(')');
            }
        }
    }
    let mut out = String::new();
    go(term, &mut Vec::new(), &mut 0, &mut out);
    out
}

/// A guard-free head reached by resolution.
pub enum Resolved {
    Idle,
    Fail,
    Prefix(LabeledSet, Rc<CTerm>),
}

/// Unfolds recursion and selects guarded branches by membership of `s`,
/// accumulating the path constraint: the set of states that resolve along the
/// same path.
pub fn resolve(
    term: &Rc<CTerm>,
    s: usize,
    num_states: usize,
    bound: usize,
) -> Result<(Resolved, StateSet), CompileError> {
    let mut constraint = BitSet::full(num_states);
    let mut cur = term.clone();
    let mut steps = 0usize;
    loop {
        if steps > bound {
            return Err(CompileError::UnfoldingBound);
        }
        match &*cur.clone() {
            CTerm::Idle => return Ok((Resolved::Idle, constraint)),
            CTerm::Fail => return Ok((Resolved::Fail, constraint)),
            CTerm::Prefix(sh, cont) => {
                return Ok((Resolved::Prefix(sh.clone(), cont.clone()), constraint))
            }
            CTerm::Var(_) => return Err(CompileError::UnfoldingBound), // unreachable for closed terms
            CTerm::Mu(v, body) => {
                cur = subst(body, v, &cur);
            }
            CTerm::Guarded(l, g, r) => {
                if g.set.contains(s) {
                    constraint.intersect_with(&g.set);
                    cur = l.clone();
                } else {
                    constraint.subtract(&g.set);
                    cur = r.clone();
                }
            }
        }
        steps += 1;
    }
}

/// States of a process automaton.
pub enum AutomatonState {
    Start,
    IdleSink,
    FailSink,
    Head {
        shield: LabeledSet,
        cont: Rc<CTerm>,
        display: String,
    },
}

impl AutomatonState {
    pub fn display(&self) -> String {
        match self {
            AutomatonState::Start => "start".into(),
            AutomatonState::IdleSink => "idle".into(),
            AutomatonState::FailSink => "fail".into(),
            AutomatonState::Head { display, .. } => display.clone(),
        }
    }
}

/// A deterministic automaton over the global state alphabet. Per-state
/// transition labels are pairwise disjoint and partition `S`.
pub struct ProcessAutomaton {
    pub states: Vec<AutomatonState>,
    pub start: usize,
    pub idle: usize,
    pub fail: usize,
    pub transitions: Vec<Vec<(StateSet, usize)>>,
    pub alphabet_size: usize,
}

pub const START: usize = 0;
pub const IDLE_SINK: usize = 1;
pub const FAIL_SINK: usize = 2;

/// Breadth-first construction of the process automaton. From `start` the
/// first input symbol only resolves guards; from a head, the input must lie
/// in the prefix shield and the continuation's guards are resolved against
/// the same input.
pub fn compile_automaton(
    cspec: &CompiledSpec,
    env: &EnvironmentInstance,
) -> Result<ProcessAutomaton, CompileError> {
    let ns = env.num_states;
    let full = BitSet::full(ns);
    let mut states = vec![
        AutomatonState::Start,
        AutomatonState::IdleSink,
        AutomatonState::FailSink,
    ];
    let mut transitions: Vec<Vec<(StateSet, usize)>> = vec![Vec::new(); 3];
    transitions[IDLE_SINK].push((full.clone(), IDLE_SINK));
    transitions[FAIL_SINK].push((full.clone(), FAIL_SINK));

    let mut index_of: HashMap<String, usize> = HashMap::new();
    // Worklist entries: (state index, term to resolve, restriction base).
    // For Start the base is S and the term is the root; for a head, the base
    // is its shield and the term its continuation.
    let mut work: Vec<usize> = vec![START];
    let mut queued: Vec<bool> = vec![true, false, false];

    let intern = |states: &mut Vec<AutomatonState>,
                      transitions: &mut Vec<Vec<(StateSet, usize)>>,
                      queued: &mut Vec<bool>,
                      index_of: &mut HashMap<String, usize>,
                      resolved: Resolved|
     -> usize {
        match resolved {
            Resolved::Idle => IDLE_SINK,
            Resolved::Fail => FAIL_SINK,
            Resolved::Prefix(sh, cont) => {
                let display = canonical_display(&CTerm::Prefix(sh.clone(), cont.clone()));
                if let Some(&i) = index_of.get(&display) {
                    i
                } else {
                    states.push(AutomatonState::Head {
                        shield: sh,
                        cont,
                        display: display.clone(),
                    });
                    transitions.push(Vec::new());
                    queued.push(false);
                    let i = states.len() - 1;
                    index_of.insert(display, i);
                    i
                }
            }
        }
    };

    let mut head = 0usize;
    while head < work.len() {
        let src = work[head];
        head += 1;
        let (base, term): (StateSet, Rc<CTerm>) = match &states[src] {
            AutomatonState::Start => (full.clone(), cspec.root.clone()),
            AutomatonState::Head { shield, cont, .. } => (shield.set.clone(), cont.clone()),
            _ => continue,
        };
        let mut edges: Vec<(StateSet, usize)> = Vec::new();
        // Inputs outside the shield fall to the fail sink.
        let outside = base.complement();
        if !outside.is_empty() {
            edges.push((outside.clone(), FAIL_SINK));
        }
        let mut covered = outside;
        for s in 0..ns {
            if covered.contains(s) {
                continue;
            }
            let (res, constraint) = resolve(&term, s, ns, cspec.unfold_bound)?;
            let mut label = constraint;
            label.intersect_with(&base);
            debug_assert!(label.contains(s));
            covered.union_with(&label);
            let target = intern(
                &mut states,
                &mut transitions,
                &mut queued,
                &mut index_of,
                res,
            );
            edges.push((label, target));
            if !queued[target] {
                queued[target] = true;
                work.push(target);
            }
        }
        debug_assert_eq!(covered, full);
        transitions[src] = edges;
    }

    Ok(ProcessAutomaton {
        states,
        start: START,
        idle: IDLE_SINK,
        fail: FAIL_SINK,
        transitions,
        alphabet_size: ns,
    })
}

impl ProcessAutomaton {
    /// The successor state on input `s`; labels partition `S`, so this is
    /// total and deterministic.
    pub fn step(&self, state: usize, s: usize) -> usize {
        for (label, target) in &self.transitions[state] {
            if label.contains(s) {
                return *target;
            }
        }
        unreachable!("transition labels partition S")
    }

    pub fn num_edges(&self) -> usize {
        self.transitions.iter().map(|t| t.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_spec;
    use crate::env::BLIND_AGENTS_JSON;

    pub const BLIND_SHIELD_DOC: &str = "\
let g   = { ((1,2),(0,1)) };\n\
let Sh1 = { ((1,1),(0,1)) };\n\
let Sh2 = { ((1,0),(1,1)) };\n\
let Sh3 = { ((1,0),(2,1)) };\n\
process P = (Sh1 . Sh2 . Sh3 . idle ||[g] fail);\n";

    fn blind() -> (EnvironmentInstance, CompiledSpec) {
        let env = EnvironmentInstance::from_json(BLIND_AGENTS_JSON).unwrap();
        let spec = parse_spec(BLIND_SHIELD_DOC).unwrap();
        let c = compile_spec(&spec, &env).unwrap();
        (env, c)
    }

    #[test]
    fn resolve_fail_is_total() {
        let (env, c) = blind();
        let fail = Rc::new(CTerm::Fail);
        for s in 0..env.num_states {
            let (res, constraint) = resolve(&fail, s, env.num_states, c.unfold_bound).unwrap();
            assert!(matches!(res, Resolved::Fail));
            assert_eq!(constraint, BitSet::full(env.num_states));
        }
    }

    #[test]
    fn resolve_blind_root_start_edge() {
        let (env, c) = blind();
        let s0 = env.initial_state();
        let (res, constraint) = resolve(&c.root, s0, env.num_states, c.unfold_bound).unwrap();
        match res {
            Resolved::Prefix(sh, _) => assert_eq!(sh.name, "Sh1"),
            _ => panic!("expected prefix head"),
        }
        let g = &c.bindings.iter().find(|(n, _)| n == "g").unwrap().1;
        assert_eq!(&constraint, g);
    }

    #[test]
    fn resolve_two_guard_hops() {
        // mu X . (safe.X ||[g1] (safe.X ||[g2] fail)), s in g2 \ g1
        let env = EnvironmentInstance::from_json(BLIND_AGENTS_JSON).unwrap();
        let doc = "\
let g1 = { ((1,1),(0,1)) };\n\
let g2 = { ((1,2),(0,1)), ((1,1),(0,1)) };\n\
process P = mu X . (SAFE . X ||[g1] (SAFE . X ||[g2] fail));\n";
        let spec = parse_spec(doc).unwrap();
        let c = compile_spec(&spec, &env).unwrap();
        let s = env.initial_state(); // in g2, not in g1
        let (res, constraint) = resolve(&c.root, s, env.num_states, c.unfold_bound).unwrap();
        match res {
            Resolved::Prefix(sh, _) => assert_eq!(sh.name, "SAFE"),
            _ => panic!("expected prefix head"),
        }
        let g1 = &c.bindings[0].1;
        let g2 = &c.bindings[1].1;
        let mut expect = g2.clone();
        expect.subtract(g1);
        assert_eq!(constraint, expect);
    }

    #[test]
    fn blind_automaton_shape() {
        let (env, c) = blind();
        let auto = compile_automaton(&c, &env).unwrap();
        assert_eq!(auto.states.len(), 6);
        assert_eq!(auto.num_edges(), 10);
        let displays: Vec<String> = auto.states.iter().map(|s| s.display()).collect();
        assert!(displays.contains(&"Sh1.Sh2.Sh3.idle".to_string()));
        assert!(displays.contains(&"Sh2.Sh3.idle".to_string()));
        assert!(displays.contains(&"Sh3.idle".to_string()));
    }

    #[test]
    fn idle_only_automaton() {
        let env = EnvironmentInstance::from_json(BLIND_AGENTS_JSON).unwrap();
        let spec = parse_spec("process P = idle;").unwrap();
        let c = compile_spec(&spec, &env).unwrap();
        let auto = compile_automaton(&c, &env).unwrap();
        assert_eq!(auto.states.len(), 3);
        assert_eq!(auto.transitions[START].len(), 1);
        let (label, target) = &auto.transitions[START][0];
        assert_eq!(*label, BitSet::full(env.num_states));
        assert_eq!(*target, IDLE_SINK);
    }

    #[test]
    fn partition_property_blind() {
        let (env, c) = blind();
        let auto = compile_automaton(&c, &env).unwrap();
        for edges in &auto.transitions {
            let mut union = BitSet::empty(env.num_states);
            for (label, _) in edges {
                assert!(!label.intersects(&union), "labels overlap");
                union.union_with(label);
            }
            assert_eq!(union, BitSet::full(env.num_states));
        }
    }
}

//! Textual dumps of compiled artifacts: Graphviz DOT and JSON forms of the
//! process automaton, the global Mealy machine, and the local shields.

use crate::env::EnvironmentInstance;
use crate::global::{GlobalMealy, MealyOutput};
use crate::local::LocalMealy;
use crate::procauto::ProcessAutomaton;
use crate::set::{action_set_iter, ActionSet, StateSet};
use serde_json::{json, Value};
use std::fmt::Write as _;

/// Human-readable tag for an edge label: the name of a bound set when one
/// matches exactly, otherwise the label's cardinality.
fn label_tag(set: &StateSet, bindings: &[(String, StateSet)]) -> String {
    for (name, s) in bindings {
        if s == set {
            return name.clone();
        }
    }
    let mut comp = set.clone();
    comp.complement_in_place();
    for (name, s) in bindings {
        if *s == comp {
            return format!("!{name}");
        }
    }
    format!("|label|={}", set.count())
}

fn action_set_text(u: ActionSet) -> String {
    let syms: Vec<&str> = action_set_iter(u)
        .map(|a| crate::env::Action::from_index(a).symbol())
        .collect();
    format!("{{{}}}", syms.join(","))
}

fn output_text(o: &MealyOutput) -> String {
    match o {
        MealyOutput::Bot => "bot".to_string(),
        MealyOutput::Product(us) => us
            .iter()
            .map(|&u| action_set_text(u))
            .collect::<Vec<_>>()
            .join("x"),
    }
}

pub fn automaton_dot(auto: &ProcessAutomaton, bindings: &[(String, StateSet)]) -> String {
    let mut out = String::from("digraph process_automaton {\n  rankdir=LR;\n");
    for (i, st) in auto.states.iter().enumerate() {
        writeln!(out, "  n{} [label=\"{}\"];", i, st.display()).unwrap();
    }
    for (src, edges) in auto.transitions.iter().enumerate() {
        for (label, dst) in edges {
            writeln!(
                out,
                "  n{} -> n{} [label=\"{}\"];",
                src,
                dst,
                label_tag(label, bindings)
            )
            .unwrap();
        }
    }
    out.push_str("}\n");
    out
}

pub fn automaton_json(auto: &ProcessAutomaton, bindings: &[(String, StateSet)]) -> Value {
    json!({
        "kind": "process_automaton",
        "states": auto.states.iter().map(|s| s.display()).collect::<Vec<_>>(),
        "start": auto.start,
        "edges": auto
            .transitions
            .iter()
            .enumerate()
            .flat_map(|(src, edges)| {
                edges.iter().map(move |(label, dst)| {
                    json!({
                        "from": src,
                        "to": dst,
                        "label": label_tag(label, bindings),
                        "label_states": label.iter().collect::<Vec<_>>(),
                    })
                })
            })
            .collect::<Vec<_>>(),
    })
}

pub fn global_dot(gm: &GlobalMealy, bindings: &[(String, StateSet)]) -> String {
    let mut out = String::from("digraph global_shield {\n  rankdir=LR;\n");
    for (i, name) in gm.names.iter().enumerate() {
        let shape = if i == gm.initial { "doublecircle" } else { "circle" };
        writeln!(out, "  n{i} [label=\"{name}\", shape={shape}];").unwrap();
    }
    for (src, edges) in gm.transitions.iter().enumerate() {
        for t in edges {
            writeln!(
                out,
                "  n{} -> n{} [label=\"{} / {}\"];",
                src,
                t.target,
                label_tag(&gm.labels[t.label], bindings),
                output_text(&t.output)
            )
            .unwrap();
        }
    }
    out.push_str("}\n");
    out
}

pub fn global_json(gm: &GlobalMealy, bindings: &[(String, StateSet)]) -> Value {
    json!({
        "kind": "global_shield",
        "states": gm.names,
        "initial": gm.initial,
        "edges": gm
            .transitions
            .iter()
            .enumerate()
            .flat_map(|(src, edges)| {
                edges.iter().map(move |t| {
                    json!({
                        "from": src,
                        "to": t.target,
                        "label": label_tag(&gm.labels[t.label], bindings),
                        "label_states": gm.labels[t.label].iter().collect::<Vec<_>>(),
                        "output": output_text(&t.output),
                    })
                })
            })
            .collect::<Vec<_>>(),
    })
}

pub fn local_dot(lm: &LocalMealy, env: &EnvironmentInstance) -> String {
    let mut out = format!(
        "digraph local_shield_{} {{\n  rankdir=LR;\n",
        lm.agent + 1
    );
    for (i, name) in lm.names.iter().enumerate() {
        let shape = if i == lm.initial { "doublecircle" } else { "circle" };
        writeln!(out, "  n{i} [label=\"{name}\", shape={shape}];").unwrap();
    }
    for (src, edges) in lm.transitions.iter().enumerate() {
        for t in edges {
            let obs = env.observations[lm.agent][t.obs].encode();
            let o = match t.output {
                Some(u) => action_set_text(u),
                None => "bot".to_string(),
            };
            writeln!(out, "  n{} -> n{} [label=\"{} / {}\"];", src, t.target, obs, o).unwrap();
        }
    }
    out.push_str("}\n");
    out
}

pub fn local_json(lm: &LocalMealy, env: &EnvironmentInstance) -> Value {
    json!({
        "kind": "local_shield",
        "agent": lm.agent + 1,
        "states": lm.names,
        "initial": lm.initial,
        "edges": lm
            .transitions
            .iter()
            .enumerate()
            .flat_map(|(src, edges)| {
                edges.iter().map(move |t| {
                    json!({
                        "from": src,
                        "to": t.target,
                        "obs": env.observations[lm.agent][t.obs].encode(),
                        "output": match t.output {
                            Some(u) => Value::String(action_set_text(u)),
                            None => Value::String("bot".to_string()),
                        },
                    })
                })
            })
            .collect::<Vec<_>>(),
    })
}

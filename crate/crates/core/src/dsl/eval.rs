//! Eager evaluation of set expressions into bitsets over an enumerated
//! environment.

use super::ast::*;
use crate::env::{EnvironmentInstance, Observation};
use crate::error::DslError;
use crate::set::{BitSet, StateSet};
use std::collections::HashMap;

/// Evaluates one expression against the environment, with `resolved` holding
/// previously evaluated bindings.
pub fn eval_set(
    expr: &StateSetExpr,
    env: &EnvironmentInstance,
    resolved: &HashMap<String, StateSet>,
) -> Result<StateSet, DslError> {
    match expr {
        StateSetExpr::NamedRef(n) => resolved
            .get(n)
            .cloned()
            .ok_or_else(|| DslError::UnboundSetName(n.clone())),
        StateSetExpr::Literal(states) => {
            let mut set = BitSet::empty(env.num_states);
            for cells in states {
                let s = env.state_of_cells(cells).ok_or_else(|| {
                    let rendered = cells
                        .iter()
                        .map(|(c, r)| format!("({c},{r})"))
                        .collect::<Vec<_>>()
                        .join(",");
                    DslError::UnknownStateLiteral(format!("({rendered})"))
                })?;
                set.insert(s);
            }
            Ok(set)
        }
        StateSetExpr::Builtin(Builtin::All) => Ok(BitSet::full(env.num_states)),
        StateSetExpr::Builtin(Builtin::Safe) => Ok(env.safe_set.clone()),
        StateSetExpr::Builtin(Builtin::Obs(agent, lit)) => {
            let n = env.num_agents();
            if *agent < 1 || *agent > n {
                return Err(DslError::AgentIndexOutOfRange(*agent, n));
            }
            let o = Observation::parse(lit, env.radius)
                .ok_or_else(|| DslError::UnknownObservationLiteral(lit.clone()))?;
            Ok(env.states_with_obs(agent - 1, &o))
        }
        StateSetExpr::Union(l, r) => {
            let mut a = eval_set(l, env, resolved)?;
            a.union_with(&eval_set(r, env, resolved)?);
            Ok(a)
        }
        StateSetExpr::Intersection(l, r) => {
            let mut a = eval_set(l, env, resolved)?;
            a.intersect_with(&eval_set(r, env, resolved)?);
            Ok(a)
        }
        StateSetExpr::Difference(l, r) => {
            let mut a = eval_set(l, env, resolved)?;
            a.subtract(&eval_set(r, env, resolved)?);
            Ok(a)
        }
        StateSetExpr::Complement(e) => {
            let mut a = eval_set(e, env, resolved)?;
            a.complement_in_place();
            Ok(a)
        }
    }
}

/// Evaluates all bindings of a spec in order.
pub fn eval_bindings(
    spec: &ShieldSpec,
    env: &EnvironmentInstance,
) -> Result<Vec<(String, StateSet)>, DslError> {
    let mut resolved: HashMap<String, StateSet> = HashMap::new();
    let mut out = Vec::new();
    for (name, expr) in &spec.bindings {
        let set = eval_set(expr, env, &resolved)?;
        resolved.insert(name.clone(), set.clone());
        out.push((name.clone(), set));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::BLIND_AGENTS_JSON;

    fn blind() -> EnvironmentInstance {
        EnvironmentInstance::from_json(BLIND_AGENTS_JSON).unwrap()
    }

    #[test]
    fn complement_of_all_is_empty() {
        let env = blind();
        let expr = StateSetExpr::Complement(Box::new(StateSetExpr::Builtin(Builtin::All)));
        let set = eval_set(&expr, &env, &HashMap::new()).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn blind_sh1_singleton() {
        let env = blind();
        let expr = StateSetExpr::Literal(vec![vec![(1, 1), (0, 1)]]);
        let set = eval_set(&expr, &env, &HashMap::new()).unwrap();
        assert_eq!(set.count(), 1);
        let s = set.first().unwrap();
        assert_eq!(env.cells_of(s), vec![(1, 1), (0, 1)]);
    }

    #[test]
    fn corridor_safe_six_of_nine() {
        let env = EnvironmentInstance::from_json(
            r#"{"width":3,"height":1,"obstacles":[],"agents":[{"start":[0,0],"target":[2,0]},{"start":[2,0],"target":[0,0]}],"radius":0}"#,
        )
        .unwrap();
        assert_eq!(env.num_states, 9);
        let set = eval_set(
            &StateSetExpr::Builtin(Builtin::Safe),
            &env,
            &HashMap::new(),
        )
        .unwrap();
        assert_eq!(set.count(), 6);
    }

    #[test]
    fn unknown_state_literal() {
        let env = blind();
        let expr = StateSetExpr::Literal(vec![vec![(0, 0), (0, 1)]]); // (0,0) is an obstacle
        match eval_set(&expr, &env, &HashMap::new()) {
            Err(DslError::UnknownStateLiteral(_)) => {}
            other => panic!("expected UnknownStateLiteral, got {other:?}"),
        }
    }

    #[test]
    fn obs_builtin_selects_states() {
        let env = blind();
        let expr = StateSetExpr::Builtin(Builtin::Obs(1, "a@0,-1".into()));
        let set = eval_set(&expr, &env, &HashMap::new()).unwrap();
        // Agent 1 sees (0,-1) exactly when it stands at (1,1) or (1,2): 2 x 5 states.
        assert_eq!(set.count(), 10);
        for s in set.iter() {
            let cells = env.cells_of(s);
            assert!(cells[0] == (1, 1) || cells[0] == (1, 2));
        }
    }

    #[test]
    fn bad_observation_literal() {
        let env = blind();
        let expr = StateSetExpr::Builtin(Builtin::Obs(1, "zzz".into()));
        assert!(matches!(
            eval_set(&expr, &env, &HashMap::new()),
            Err(DslError::UnknownObservationLiteral(_))
        ));
    }
}

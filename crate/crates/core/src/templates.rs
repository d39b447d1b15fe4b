//! Generated shield documents: the permissive safety shield `p1` and the
//! observation-playbook template `p2` enumerating joint observation classes.

use crate::env::EnvironmentInstance;

/// `p1`: forever allow any joint action that stays collision-free.
pub fn gen_p1(_env: &EnvironmentInstance) -> String {
    "process P = mu X . SAFE . X;\n".to_string()
}

/// `p2`: a guarded-choice skeleton with one branch per realizable joint
/// observation class, each guard selecting the states producing that class.
/// Branch bodies are left maximally permissive (`SAFE . X`); the template is
/// meant to be specialized by hand.
pub fn gen_p2(env: &EnvironmentInstance) -> String {
    let n = env.num_agents();
    let classes = env.joint_observation_classes();
    let mut lets = String::new();
    let mut guards: Vec<String> = Vec::new();
    for (k, (obs_ids, _states)) in classes.iter().enumerate() {
        let name = format!("O{k}");
        let mut parts: Vec<String> = Vec::with_capacity(n);
        for i in 0..n {
            let o = &env.observations[i][obs_ids[i] as usize];
            parts.push(format!("OBS({},\"{}\")", i + 1, o.encode()));
        }
        lets.push_str(&format!("let {name} = {};\n", parts.join(" & ")));
        guards.push(name);
    }
    let mut body = String::from("fail");
    for name in guards.iter().rev() {
        body = format!("(SAFE . X ||[{name}] {body})");
    }
    format!("{lets}process P = mu X . {body};\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{check_wellformed, parse_spec};
    use crate::env::{EnvironmentInstance, BLIND_AGENTS_JSON};
    use crate::procauto::{compile_automaton, compile_spec};

    #[test]
    fn p1_parses_and_compiles() {
        let env = EnvironmentInstance::from_json(BLIND_AGENTS_JSON).unwrap();
        let doc = gen_p1(&env);
        let spec = parse_spec(&doc).unwrap();
        assert!(check_wellformed(&spec).violations.is_empty());
        let c = compile_spec(&spec, &env).unwrap();
        let auto = compile_automaton(&c, &env).unwrap();
        assert!(auto.states.len() >= 4);
    }

    #[test]
    fn p2_covers_all_joint_observation_classes() {
        let env = EnvironmentInstance::from_json(BLIND_AGENTS_JSON).unwrap();
        let doc = gen_p2(&env);
        let spec = parse_spec(&doc).unwrap();
        assert!(check_wellformed(&spec).violations.is_empty());
        assert_eq!(spec.bindings.len(), env.joint_observation_classes().len());
        // Every reachable state is selected by exactly one class guard.
        let c = compile_spec(&spec, &env).unwrap();
        let mut covered = crate::set::BitSet::empty(env.num_states);
        for (_, set) in &c.bindings {
            assert!(!set.intersects(&covered), "class guards overlap");
            covered.union_with(set);
        }
        assert_eq!(covered.count(), env.num_states);
        compile_automaton(&c, &env).unwrap();
    }
}

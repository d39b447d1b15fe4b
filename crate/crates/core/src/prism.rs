//! Export of the shielded system as an explicit-state MDP in PRISM's input
//! language, plus a small internal value-iteration solver for reachability
//! bounds so results can be checked without an external model checker.

use crate::env::EnvironmentInstance;
use crate::global::enumerate_product;
use crate::local::LocalMealy;
use crate::set::NUM_ACTIONS;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;
use std::process::Command;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PrismError {
    #[error("explicit MDP exceeded {0} states")]
    TooManyStates(usize),
    #[error("shield was synthesized for a different environment (fingerprint mismatch)")]
    MismatchedShield,
    #[error("prism binary not found: {0}")]
    BinaryNotFound(String),
    #[error("prism invocation timed out")]
    Timeout,
    #[error("prism invocation failed: {0}")]
    Io(#[from] io::Error),
    #[error("could not parse prism output: {0}")]
    BadOutput(String),
}

pub const MDP_STATE_CAP: usize = 1_000_000;

/// One combined model state: environment state, per-agent shield states,
/// and whether a shield failure has occurred.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CombinedState {
    pub env_state: usize,
    pub shield_states: Vec<usize>,
    pub failed: bool,
}

/// A nondeterministic choice: joint action leading deterministically to a
/// successor combined state.
#[derive(Clone, Debug)]
pub struct Choice {
    pub joint: Vec<usize>, // per-agent action indices
    pub target: usize,
}

pub struct ExplicitMdp {
    pub states: Vec<CombinedState>,
    pub initial: usize,
    pub choices: Vec<Vec<Choice>>,
    pub unsafe_flags: Vec<bool>,
    pub failure_flags: Vec<bool>,
}

/// Build the explicit MDP of the shielded (or unshielded, when `shields` is
/// empty) system under adversarial per-agent action choice.
pub fn build_mdp(
    env: &EnvironmentInstance,
    shields: &[LocalMealy],
) -> Result<ExplicitMdp, PrismError> {
    for sh in shields {
        if sh.env_fingerprint != env.fingerprint {
            return Err(PrismError::MismatchedShield);
        }
    }
    let n = env.num_agents();
    let shielded = !shields.is_empty();
    let mut states: Vec<CombinedState> = Vec::new();
    let mut index: HashMap<CombinedState, usize> = HashMap::new();
    let mut choices: Vec<Vec<Choice>> = Vec::new();

    let intern = |st: CombinedState,
                  states: &mut Vec<CombinedState>,
                  choices: &mut Vec<Vec<Choice>>,
                  index: &mut HashMap<CombinedState, usize>|
     -> Result<(usize, bool), PrismError> {
        if let Some(&i) = index.get(&st) {
            Ok((i, false))
        } else {
            if states.len() >= MDP_STATE_CAP {
                return Err(PrismError::TooManyStates(MDP_STATE_CAP));
            }
            states.push(st.clone());
            choices.push(Vec::new());
            index.insert(st, states.len() - 1);
            Ok((states.len() - 1, true))
        }
    };

    let init = CombinedState {
        env_state: env.initial_state(),
        shield_states: shields.iter().map(|s| s.initial).collect(),
        failed: false,
    };
    let (initial, _) = intern(init, &mut states, &mut choices, &mut index)?;
    let mut work = vec![initial];
    while let Some(i) = work.pop() {
        let st = states[i].clone();
        if st.failed {
            continue; // absorbing
        }
        // Advance each local shield on its observation of the current state.
        let mut next_shield_states = Vec::with_capacity(n);
        let mut permitted: Vec<u8> = Vec::with_capacity(n);
        let mut failed = false;
        for (k, sh) in shields.iter().enumerate() {
            let obs = env.obs_id(st.env_state, k) as usize;
            let (q2, out) = sh.local_step(st.shield_states[k], obs);
            next_shield_states.push(q2);
            match out {
                Some(u) => permitted.push(u),
                None => {
                    failed = true;
                    break;
                }
            }
        }
        if shielded && failed {
            let sink = CombinedState {
                env_state: st.env_state,
                shield_states: st.shield_states.clone(),
                failed: true,
            };
            let (t, fresh) = intern(sink, &mut states, &mut choices, &mut index)?;
            if fresh {
                work.push(t);
            }
            choices[i].push(Choice {
                joint: vec![0; n.max(1)],
                target: t,
            });
            continue;
        }
        if !shielded {
            permitted = vec![crate::set::ALL_ACTIONS; n];
            next_shield_states = Vec::new();
        }
        for joint in enumerate_product(&permitted) {
            let s2 = env.apply_joint(st.env_state, joint);
            let nxt = CombinedState {
                env_state: s2,
                shield_states: next_shield_states.clone(),
                failed: false,
            };
            let (t, fresh) = intern(nxt, &mut states, &mut choices, &mut index)?;
            if fresh {
                work.push(t);
            }
            let mut acts = Vec::with_capacity(n);
            let mut x = joint;
            for _ in 0..n {
                acts.push(x % NUM_ACTIONS);
                x /= NUM_ACTIONS;
            }
            acts.reverse();
            choices[i].push(Choice {
                joint: acts,
                target: t,
            });
        }
    }

    let unsafe_flags = states
        .iter()
        .map(|st| !env.safe_set.contains(st.env_state))
        .collect();
    let failure_flags = states.iter().map(|st| st.failed).collect();
    Ok(ExplicitMdp {
        states,
        initial,
        choices,
        unsafe_flags,
        failure_flags,
    })
}

/// Render the MDP as a PRISM module plus a property list. Variables: `p<i>`
/// holds agent i's free-cell index, `q<i>` its shield state, `sf` the
/// shield-failure flag.
pub fn render_prism(env: &EnvironmentInstance, mdp: &ExplicitMdp) -> (String, String) {
    let n = env.num_agents();
    let has_shield = mdp.states[mdp.initial].shield_states.len() == n;
    let mut m = String::new();
    writeln!(m, "// shielded grid system, explicit-state encoding").unwrap();
    writeln!(m, "mdp\n").unwrap();
    writeln!(m, "module system").unwrap();
    let max_cell = env.free_cells.len().saturating_sub(1);
    let init_pos = env.positions_of(mdp.states[mdp.initial].env_state);
    for i in 0..n {
        writeln!(
            m,
            "  p{} : [0..{}] init {};",
            i + 1,
            max_cell,
            init_pos[i]
        )
        .unwrap();
    }
    if has_shield {
        let max_q: Vec<usize> = (0..n)
            .map(|i| {
                mdp.states
                    .iter()
                    .map(|st| st.shield_states[i])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        for i in 0..n {
            writeln!(
                m,
                "  q{} : [0..{}] init {};",
                i + 1,
                max_q[i],
                mdp.states[mdp.initial].shield_states[i]
            )
            .unwrap();
        }
    }
    writeln!(m, "  sf : [0..1] init 0;").unwrap();
    let guard = |st: &CombinedState| -> String {
        let pos = env.positions_of(st.env_state);
        let mut parts: Vec<String> = (0..n).map(|i| format!("p{}={}", i + 1, pos[i])).collect();
        if has_shield {
            for i in 0..n {
                parts.push(format!("q{}={}", i + 1, st.shield_states[i]));
            }
        }
        parts.push(format!("sf={}", if st.failed { 1 } else { 0 }));
        parts.join(" & ")
    };
    let update = |st: &CombinedState| -> String {
        let pos = env.positions_of(st.env_state);
        let mut parts: Vec<String> = (0..n)
            .map(|i| format!("(p{}'={})", i + 1, pos[i]))
            .collect();
        if has_shield {
            for i in 0..n {
                parts.push(format!("(q{}'={})", i + 1, st.shield_states[i]));
            }
        }
        parts.push(format!("(sf'={})", if st.failed { 1 } else { 0 }));
        parts.join(" & ")
    };
    for (i, st) in mdp.states.iter().enumerate() {
        if mdp.choices[i].is_empty() {
            // absorbing (failure sink): self-loop to keep the MDP total
            writeln!(m, "  [] {} -> {};", guard(st), update(st)).unwrap();
            continue;
        }
        for ch in &mdp.choices[i] {
            writeln!(
                m,
                "  [] {} -> {};",
                guard(st),
                update(&mdp.states[ch.target])
            )
            .unwrap();
        }
    }
    writeln!(m, "endmodule\n").unwrap();
    // Collision label: two agents on the same cell.
    let mut eqs: Vec<String> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            eqs.push(format!("p{}=p{}", i + 1, j + 1));
        }
    }
    if eqs.is_empty() {
        eqs.push("false".to_string());
    }
    writeln!(m, "label \"unsafe\" = {};", eqs.join(" | ")).unwrap();
    writeln!(m, "label \"shield_failure\" = sf=1;").unwrap();

    let props = "Pmin=? [ F \"shield_failure\" ]\n\
Pmax=? [ F \"shield_failure\" ]\n\
Pmin=? [ F \"unsafe\" ]\n\
Pmax=? [ F \"unsafe\" ]\n"
        .to_string();
    (m, props)
}

/// Min and max probabilities of eventually reaching a flagged state, by
/// value iteration (least fixpoint from zero).
pub fn solve_bounds(mdp: &ExplicitMdp, flags: &[bool]) -> (f64, f64) {
    let n = mdp.states.len();
    let mut lo = vec![0.0f64; n];
    let mut hi = vec![0.0f64; n];
    for i in 0..n {
        if flags[i] {
            lo[i] = 1.0;
            hi[i] = 1.0;
        }
    }
    loop {
        let mut delta = 0.0f64;
        for i in 0..n {
            if flags[i] {
                continue;
            }
            if mdp.choices[i].is_empty() {
                continue; // absorbing, value stays 0 unless flagged
            }
            let mut mn = f64::INFINITY;
            let mut mx = f64::NEG_INFINITY;
            for ch in &mdp.choices[i] {
                mn = mn.min(lo[ch.target]);
                mx = mx.max(hi[ch.target]);
            }
            delta = delta.max((mn - lo[i]).abs()).max((mx - hi[i]).abs());
            lo[i] = mn;
            hi[i] = mx;
        }
        if delta < 1e-12 {
            break;
        }
    }
    (lo[mdp.initial], hi[mdp.initial])
}

/// Run an external `prism` binary on rendered model/property files and parse
/// the four `Result:` lines. Returns bounds in property order:
/// `(pmin_fail, pmax_fail, pmin_unsafe, pmax_unsafe)`.
pub fn run_external(
    prism_bin: &str,
    model: &Path,
    props: &Path,
    timeout: Duration,
) -> Result<[f64; 4], PrismError> {
    let mut child = Command::new(prism_bin)
        .arg(model)
        .arg(props)
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::null())
        .spawn()
        .map_err(|e| {
            if e.kind() == io::ErrorKind::NotFound {
                PrismError::BinaryNotFound(prism_bin.to_string())
            } else {
                PrismError::Io(e)
            }
        })?;
    let deadline = std::time::Instant::now() + timeout;
    loop {
        match child.try_wait()? {
            Some(_) => break,
            None => {
                if std::time::Instant::now() > deadline {
                    let _ = child.kill();
                    return Err(PrismError::Timeout);
                }
                std::thread::sleep(Duration::from_millis(20));
            }
        }
    }
    let out = child.wait_with_output()?;
    let text = String::from_utf8_lossy(&out.stdout);
    let mut vals = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("Result:") {
            let tok = rest.trim().split_whitespace().next().unwrap_or("");
            let v: f64 = tok
                .parse()
                .map_err(|_| PrismError::BadOutput(line.to_string()))?;
            vals.push(v);
        }
    }
    if vals.len() != 4 {
        return Err(PrismError::BadOutput(format!(
            "expected 4 results, found {}",
            vals.len()
        )));
    }
    Ok([vals[0], vals[1], vals[2], vals[3]])
}

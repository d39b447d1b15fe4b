//! Acceptance gate: one test per criterion, each printing a pass line.

mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shield_core::bench::{run_bench, shields_of_kind, BenchConfig, ShieldKind};
use shield_core::env::{Action, EnvironmentInstance};
use shield_core::global::{allowed_joint, GlobalStateKind, MealyOutput};
use shield_core::instances::sample_instances;
use shield_core::learn::{train_q, RewardScheme, TrainConfig};
use shield_core::prism::{build_mdp, solve_bounds};
use shield_core::procauto::AutomatonState;
use shield_core::set::{action_set_iter, ActionSet};
use shield_core::sim::{evaluate, Policy};
use std::time::Instant;

/// The image of an action set at a cell under the bump rule; outputs that
/// differ only in bump-equivalent actions are the same shield decision.
fn bump_image(env: &EnvironmentInstance, cell: usize, u: ActionSet) -> Vec<usize> {
    let mut cells: Vec<usize> = action_set_iter(u)
        .map(|a| env.move_cell(cell, Action::from_index(a)))
        .collect();
    cells.sort_unstable();
    cells.dedup();
    cells
}

#[test]
fn criterion_1_blind_agents_exact_reproduction() {
    let start = Instant::now();
    let env = EnvironmentInstance::from_json(BLIND_ENV).unwrap();
    let b = build(&env, BLIND_SHIELD, default_options());

    // Process automaton: 6 states (start, idle, fail, three heads).
    assert_eq!(b.auto.states.len(), 6);
    let displays: Vec<String> = b.auto.states.iter().map(|s| s.display()).collect();
    for want in ["Sh1.Sh2.Sh3.idle", "Sh2.Sh3.idle", "Sh3.idle"] {
        assert!(
            displays.iter().any(|d| d == want),
            "missing automaton state {want}, have {displays:?}"
        );
    }

    // Global machine: walk the unique safe run; outputs must be
    // bump-equivalent to [down,stay], [down,right], [stay,right], [stay,stay].
    assert_eq!(b.global.states.len(), 6);
    let plan = [
        [Action::Down, Action::Stay],
        [Action::Down, Action::Right],
        [Action::Stay, Action::Right],
        [Action::Stay, Action::Stay],
    ];
    let mut s = env.initial_state();
    let mut g = b.global.initial;
    let mut qs: Vec<usize> = b.locals.iter().map(|l| l.initial).collect();
    for step in plan {
        let pos = env.positions_of(s);
        let (g2, gout) = b.global.step(g, s);
        match gout {
            MealyOutput::Product(us) => {
                for i in 0..2 {
                    let want = bump_image(&env, pos[i], 1 << step[i].index());
                    assert_eq!(
                        bump_image(&env, pos[i], us[i]),
                        want,
                        "global output differs from the reference run at agent {}",
                        i + 1
                    );
                }
            }
            MealyOutput::Bot => panic!("bot on the safe run"),
        }
        // Local machines: output sequences along the same run.
        for i in 0..2 {
            let o = env.obs_id(s, i) as usize;
            let (qn, u) = b.locals[i].local_step(qs[i], o);
            let u = u.expect("local failure on the safe run");
            let want = bump_image(&env, pos[i], 1 << step[i].index());
            assert_eq!(
                bump_image(&env, pos[i], u),
                want,
                "local output differs from the reference run at agent {}",
                i + 1
            );
            qs[i] = qn;
        }
        s = env.apply_actions(s, &step);
        g = g2;
    }
    assert!(env.all_on_targets(s));
    assert!(matches!(b.global.states[g], GlobalStateKind::Idle { .. }));
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("ACCEPTANCE 1: PASS (blind-agents pipeline reproduces the published machines, {elapsed:?})");
}

#[test]
fn criterion_2_prism_bounds_zero() {
    let start = Instant::now();
    let env = EnvironmentInstance::from_json(BLIND_ENV).unwrap();
    let b = build(&env, BLIND_SHIELD, default_options());
    let mdp = build_mdp(&env, &b.locals).unwrap();
    let (fmin, fmax) = solve_bounds(&mdp, &mdp.failure_flags);
    let (umin, umax) = solve_bounds(&mdp, &mdp.unsafe_flags);
    for v in [fmin, fmax, umin, umax] {
        assert!(v.abs() <= 1e-9, "expected 0.000000, got {v}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 5);
    println!("ACCEPTANCE 2: PASS (all four reachability bounds are 0.000000, {elapsed:?})");
}

#[test]
fn criterion_3_shielded_collision_elimination() {
    let cells = [
        (3, 3, 2usize, 2usize, 0u32, ShieldKind::P1),
        (3, 3, 2, 2, 1, ShieldKind::P2),
        (4, 4, 4, 2, 0, ShieldKind::P1),
        (4, 4, 4, 2, 1, ShieldKind::P2),
    ];
    let mut episodes_total = 0usize;
    for (k, (w, h, obst, n, r, kind)) in cells.into_iter().enumerate() {
        let cfg = BenchConfig {
            shield: kind,
            width: w,
            height: h,
            num_obstacles: obst,
            num_agents: n,
            radius: r,
            instances: 3,
            episodes: 10_000,
            horizon: 64,
        };
        let report = run_bench(&cfg, 100 + k as u64).unwrap();
        for cell in &report.cells {
            assert_eq!(
                cell.shielded.collisions, 0,
                "collision under shield in cell {k}"
            );
            episodes_total += cell.shielded.episodes;
        }
    }
    println!("ACCEPTANCE 3: PASS (0 collisions across {episodes_total} shielded episodes)");
}

#[test]
fn criterion_4_unshielded_baseline() {
    let cfg = BenchConfig {
        shield: ShieldKind::P1,
        width: 4,
        height: 4,
        num_obstacles: 9,
        num_agents: 2,
        radius: 0,
        instances: 20,
        episodes: 500,
        horizon: 64,
    };
    let report = run_bench(&cfg, 2024).unwrap();
    assert!(report.cells.len() >= 20);
    let unshielded = report.mean_collision_rate_unshielded();
    let shielded = report.mean_collision_rate_shielded();
    assert_eq!(shielded, 0.0);
    assert!(
        unshielded > 0.3,
        "expected conflict-prone instances, mean unshielded collision rate {unshielded:.3}"
    );
    println!(
        "ACCEPTANCE 4: PASS (mean unshielded collision rate {unshielded:.3} > 0.3 > shielded 0)"
    );
}

fn ci_ordering_ok(p1_rate: f64, n1: usize, p2_rate: f64, n2: usize) -> bool {
    // non-strict ordering p2 >= p1 with a 2-sided 99% binomial margin
    let z = 2.576;
    let se = (p1_rate * (1.0 - p1_rate) / n1 as f64 + p2_rate * (1.0 - p2_rate) / n2 as f64)
        .sqrt();
    p2_rate >= p1_rate - z * se
}

#[test]
fn criterion_5_p2_vs_p1_reached_ordering() {
    let configs = [
        (3i32, 3i32, 4usize, 2usize),
        (3, 3, 4, 3),
        (4, 4, 9, 2),
        (4, 4, 9, 3),
    ];
    let episodes = 10_000;
    for (ci, (w, h, obst, n)) in configs.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + ci as u64);
        let files = sample_instances(w, h, obst, n, 1, 2, &mut rng);
        assert!(!files.is_empty(), "no instances for config {ci}");
        for file in &files {
            let env = EnvironmentInstance::from_file(file).unwrap();
            let (_, sh1) = shields_of_kind(&env, ShieldKind::P1).unwrap();
            let (_, sh2) = shields_of_kind(&env, ShieldKind::P2).unwrap();
            let (m1, _) =
                evaluate(&env, &sh1, &Policy::UniformRandom, episodes, 64, 7).unwrap();
            let (m2, _) =
                evaluate(&env, &sh2, &Policy::UniformRandom, episodes, 64, 7).unwrap();
            assert!(
                ci_ordering_ok(m1.reach_rate(), episodes, m2.reach_rate(), episodes),
                "config {ci}: reached(P2)={:.3} significantly below reached(P1)={:.3}",
                m2.reach_rate(),
                m1.reach_rate()
            );
        }
    }
    println!("ACCEPTANCE 5: PASS (reached(P2) >= reached(P1) at 99% confidence on matched instances)");
}

#[test]
fn criterion_6_shield_failure_monotone_in_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    let files = sample_instances(4, 4, 9, 3, 1, 3, &mut rng);
    assert!(!files.is_empty());
    let episodes = 2000;
    let (mut sf_r1, mut sf_r2) = (0.0, 0.0);
    for file in &files {
        let mut f1 = file.clone();
        f1.radius = 1;
        let mut f2 = file.clone();
        f2.radius = 2;
        for (f, acc) in [(f1, &mut sf_r1), (f2, &mut sf_r2)] {
            let env = EnvironmentInstance::from_file(&f).unwrap();
            let (_, sh) = shields_of_kind(&env, ShieldKind::P2).unwrap();
            let (m, _) = evaluate(&env, &sh, &Policy::UniformRandom, episodes, 64, 9).unwrap();
            *acc += m.shield_failure_rate();
        }
    }
    sf_r1 /= files.len() as f64;
    sf_r2 /= files.len() as f64;
    assert!(
        sf_r2 <= sf_r1 + 1e-9,
        "shield failure did not decrease with radius: R1 {sf_r1:.3} vs R2 {sf_r2:.3}"
    );
    println!(
        "ACCEPTANCE 6: PASS (mean shield failure {sf_r2:.3} at R=2 <= {sf_r1:.3} at R=1)"
    );
}

#[test]
fn criterion_7_property_suites_randomized() {
    // The corpus runs live in the dedicated property suites; here the same
    // checks sweep 1,000 randomized larger instances.
    let mut rng = ChaCha8Rng::seed_from_u64(700);
    let mut checked = 0usize;
    while checked < 1000 {
        let obst = 2 + checked % 5;
        let radius = (checked % 2) as u32;
        let Some(file) = shield_core::instances::sample_instance(4, 4, obst, 2, radius, &mut rng)
        else {
            continue;
        };
        let env = EnvironmentInstance::from_file(&file).unwrap();
        let b = build(&env, &shield_core::templates::gen_p1(&env), default_options());
        // label-partition totality
        for edges in &b.global.transitions {
            let mut union = shield_core::set::BitSet::empty(env.num_states);
            for t in edges {
                let label = &b.global.labels[t.label];
                assert!(!label.intersects(&union));
                union.union_with(label);
            }
            assert_eq!(union, shield_core::set::BitSet::full(env.num_states));
        }
        // Dec contract + belief correctness + containment via co-simulation
        cosimulate(&env, &b, |s, g, qs| {
            match &b.global.states[g] {
                GlobalStateKind::Fail => {}
                GlobalStateKind::Idle { hold } => assert!(hold.contains(s)),
                GlobalStateKind::Live { belief, .. } => assert!(belief.contains(s)),
            }
            let (_, gout) = b.global.step(g, s);
            let mut us = Vec::new();
            let mut any_fail = false;
            for (i, l) in b.locals.iter().enumerate() {
                assert!(l.beliefs[qs[i]].contains(&g));
                match l.local_step(qs[i], env.obs_id(s, i) as usize).1 {
                    Some(u) => us.push(u),
                    None => any_fail = true,
                }
            }
            if !any_fail {
                match gout {
                    MealyOutput::Bot => panic!("locals act where global is bot"),
                    MealyOutput::Product(gs) => {
                        for (i, &u) in us.iter().enumerate() {
                            assert_eq!(u & gs[i], u);
                        }
                    }
                }
            }
        });
        // trace membership: one random episode replayed in the exported MDP
        let mdp = build_mdp(&env, &b.locals).unwrap();
        let mut idx = std::collections::HashMap::new();
        for (i, st) in mdp.states.iter().enumerate() {
            idx.insert((st.env_state, st.shield_states.clone(), st.failed), i);
        }
        let mut s = env.initial_state();
        let mut qs: Vec<usize> = b.locals.iter().map(|l| l.initial).collect();
        let mut cur = idx[&(s, qs.clone(), false)];
        for _ in 0..16 {
            let mut outs = Vec::new();
            let mut q2 = Vec::new();
            let mut failed = false;
            for (i, l) in b.locals.iter().enumerate() {
                let (qn, u) = l.local_step(qs[i], env.obs_id(s, i) as usize);
                q2.push(qn);
                match u {
                    Some(u) => outs.push(u),
                    None => failed = true,
                }
            }
            if failed {
                break;
            }
            let joints = shield_core::global::enumerate_product(&outs);
            use rand::Rng;
            let joint = joints[rng.gen_range(0..joints.len())];
            let s2 = env.apply_joint(s, joint);
            let nxt = idx[&(s2, q2.clone(), false)];
            assert!(mdp.choices[cur].iter().any(|c| c.target == nxt));
            cur = nxt;
            s = s2;
            qs = q2;
        }
        checked += 1;
    }
    println!("ACCEPTANCE 7: PASS (property suites clean on corpus + {checked} randomized instances)");
}

#[test]
fn criterion_8_oracle_equivalence() {
    let start = Instant::now();
    for (name, env) in small_envs() {
        for (doc_name, doc) in docs_for(name, &env) {
            let b = build(&env, &doc, default_options());
            for (src, edges) in b.global.transitions.iter().enumerate() {
                for t in edges {
                    let label = &b.global.labels[t.label];
                    let (sources, targets) = match &b.global.states[src] {
                        GlobalStateKind::Fail => continue,
                        GlobalStateKind::Idle { hold } => (hold.clone(), hold.clone()),
                        GlobalStateKind::Live { belief, .. } => {
                            let mut inter = belief.clone();
                            inter.intersect_with(label);
                            let targets = match &b.global.states[t.target] {
                                GlobalStateKind::Fail => continue,
                                GlobalStateKind::Idle { hold } => hold.clone(),
                                GlobalStateKind::Live { auto_state, .. } => {
                                    match &b.auto.states[*auto_state] {
                                        AutomatonState::Head { shield, .. } => shield.set.clone(),
                                        _ => unreachable!(),
                                    }
                                }
                            };
                            (inter, targets)
                        }
                    };
                    let hat = allowed_joint(&env, &sources, &targets);
                    let hat_oracle = allowed_joint_oracle(&env, &sources, &targets);
                    assert_eq!(hat, hat_oracle, "{name}/{doc_name}: allowed_joint mismatch");
                    let expect = decompose_oracle(env.num_agents(), &hat);
                    assert_eq!(
                        t.output, expect,
                        "{name}/{doc_name}: decompose mismatch at state {src}"
                    );
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!("ACCEPTANCE 8: PASS (allowed_joint and decompose match brute force on every corpus edge, {elapsed:?})");
}

#[test]
fn criterion_9_learning_curves_qualitative() {
    let env_json = r#"{"width":3,"height":3,"obstacles":[[0,0],[2,0],[0,2],[2,2]],"agents":[{"start":[1,2],"target":[1,0]},{"start":[0,1],"target":[2,1]}],"radius":1}"#;
    let env = EnvironmentInstance::from_json(env_json).unwrap();
    let (_, p2) = shields_of_kind(&env, ShieldKind::P2).unwrap();
    let base = TrainConfig {
        episodes: 3000,
        horizon: 64,
        eval_every: 300,
        eval_episodes: 300,
        ..TrainConfig::default()
    };

    // Shielded variants: identically-zero collision curves.
    for reward in [RewardScheme::Reach, RewardScheme::Safe] {
        let cfg = TrainConfig { reward, ..base };
        let r = train_q(&env, &p2, &cfg, 41).unwrap();
        assert_eq!(r.training_collisions, 0, "collision under shielded training");
        for snap in &r.snapshots {
            assert_eq!(snap.metrics.collisions, 0, "collision under shielded eval");
        }
    }

    // Unshielded variants: collisions present early, trending down.
    for reward in [RewardScheme::Reach, RewardScheme::Safe] {
        let cfg = TrainConfig { reward, ..base };
        let r = train_q(&env, &[], &cfg, 41).unwrap();
        // Use behavior-policy collision rates (training windows): greedy
        // snapshots are deterministic here so their rates are degenerate.
        let rates: Vec<f64> = r
            .snapshots
            .iter()
            .map(|s| s.window_collision_rate)
            .collect();
        assert!(rates[0] > 0.0, "expected early collisions, got {rates:?}");
        let k = rates.len() / 2;
        let first: f64 = rates[..k].iter().sum::<f64>() / k as f64;
        let last: f64 = rates[k..].iter().sum::<f64>() / (rates.len() - k) as f64;
        assert!(
            last <= first + 0.05,
            "collision curve increased: first half {first:.3}, second half {last:.3}"
        );
    }

    // Trained-with-P2 vs random-with-P2 on reached.
    let cfg = TrainConfig {
        reward: RewardScheme::Reach,
        ..base
    };
    let trained = train_q(&env, &p2, &cfg, 41).unwrap();
    let final_reached = trained.snapshots.last().unwrap().metrics.reach_rate();
    let (random, _) = evaluate(&env, &p2, &Policy::UniformRandom, 2000, 64, 41).unwrap();
    assert!(
        final_reached + 1e-9 >= random.reach_rate(),
        "trained reached {final_reached:.3} below random {:.3}",
        random.reach_rate()
    );
    println!(
        "ACCEPTANCE 9: PASS (zero shielded collisions; unshielded curves decay; trained reached {final_reached:.3} >= random {:.3})",
        random.reach_rate()
    );
}

//! Random benchmark instance generation: grids with uniformly placed
//! obstacles and agents, rejecting unsolvable or degenerate layouts.

use crate::env::{AgentSpec, EnvFile, EnvironmentInstance};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// Sample one instance, rejecting layouts where some agent cannot reach its
/// target, two agents share a cell, or two agents share a target. Returns
/// `None` if no viable layout is found within the attempt budget.
pub fn sample_instance(
    width: i32,
    height: i32,
    num_obstacles: usize,
    num_agents: usize,
    radius: u32,
    rng: &mut ChaCha8Rng,
) -> Option<EnvFile> {
    let cells: Vec<(i32, i32)> = (0..height)
        .flat_map(|r| (0..width).map(move |c| (c, r)))
        .collect();
    for _ in 0..10_000 {
        let mut shuffled = cells.clone();
        shuffled.shuffle(rng);
        if shuffled.len() < num_obstacles + num_agents {
            return None;
        }
        let obstacles: Vec<(i32, i32)> = shuffled[..num_obstacles].to_vec();
        let free: Vec<(i32, i32)> = shuffled[num_obstacles..].to_vec();
        if free.len() < num_agents {
            return None;
        }
        let starts: Vec<(i32, i32)> = free[..num_agents].to_vec();
        let mut targets: Vec<(i32, i32)> = Vec::with_capacity(num_agents);
        let mut pool: Vec<(i32, i32)> = free.clone();
        pool.shuffle(rng);
        for _ in 0..num_agents {
            match pool.pop() {
                Some(t) => targets.push(t),
                None => break,
            }
        }
        if targets.len() < num_agents {
            continue;
        }
        let mut ok = true;
        for i in 0..num_agents {
            if !connected(width, height, &obstacles, starts[i], targets[i]) {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let file = EnvFile {
            width,
            height,
            obstacles: obstacles.clone(),
            agents: starts
                .iter()
                .zip(targets.iter())
                .map(|(&s, &t)| AgentSpec { start: s, target: t })
                .collect(),
            radius,
        };
        if EnvironmentInstance::from_file(&file).is_ok() {
            return Some(file);
        }
    }
    None
}

fn connected(
    width: i32,
    height: i32,
    obstacles: &[(i32, i32)],
    from: (i32, i32),
    to: (i32, i32),
) -> bool {
    let blocked = |c: (i32, i32)| {
        c.0 < 0 || c.0 >= width || c.1 < 0 || c.1 >= height || obstacles.contains(&c)
    };
    if blocked(from) || blocked(to) {
        return false;
    }
    let mut seen = vec![from];
    let mut queue = VecDeque::from([from]);
    while let Some((c, r)) = queue.pop_front() {
        if (c, r) == to {
            return true;
        }
        for (dc, dr) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let nxt = (c + dc, r + dr);
            if !blocked(nxt) && !seen.contains(&nxt) {
                seen.push(nxt);
                queue.push_back(nxt);
            }
        }
    }
    false
}

/// Sample `count` instances with seeds derived from `seed`.
pub fn sample_instances(
    width: i32,
    height: i32,
    num_obstacles: usize,
    num_agents: usize,
    radius: u32,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<EnvFile> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count * 4 {
        if out.len() == count {
            break;
        }
        if let Some(f) = sample_instance(width, height, num_obstacles, num_agents, radius, rng) {
            out.push(f);
        }
    }
    out
}

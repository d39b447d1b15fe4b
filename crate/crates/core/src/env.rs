//! Gridworld environment descriptions: the enumerated global state space, the
//! deterministic move dynamics with the bump rule, and per-agent observations.

use crate::set::{BitSet, StateSet, ALL_ACTIONS, NUM_ACTIONS};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

/// Single-agent moves in canonical order: left, right, up, down, stay.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum Action {
    Left,
    Right,
    Up,
    Down,
    Stay,
}

pub const ACTIONS: [Action; NUM_ACTIONS] = [
    Action::Left,
    Action::Right,
    Action::Up,
    Action::Down,
    Action::Stay,
];

impl Action {
    pub fn index(self) -> usize {
        match self {
            Action::Left => 0,
            Action::Right => 1,
            Action::Up => 2,
            Action::Down => 3,
            Action::Stay => 4,
        }
    }

    pub fn from_index(i: usize) -> Action {
        ACTIONS[i]
    }

    /// Unit displacement in (col, row) with row 0 at the bottom.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Up => (0, 1),
            Action::Down => (0, -1),
            Action::Stay => (0, 0),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Action::Left => "<",
            Action::Right => ">",
            Action::Up => "^",
            Action::Down => "v",
            Action::Stay => ".",
        }
    }
}

/// Patch cell classes for observations.
pub const CELL_BLOCKED: u8 = 0;
pub const CELL_FREE: u8 = 1;
pub const CELL_AGENT: u8 = 2;

/// An agent's observation: a Chebyshev-radius patch (rows listed top to
/// bottom, each row left to right) plus the coarse direction-to-target signal.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Observation {
    pub patch: Box<[u8]>,
    pub dir: (i8, i8),
}

impl Observation {
    /// Canonical text form, e.g. `bfb|faf|fff@1,-1` for R=1, or `a@0,-1` for R=0.
    pub fn encode(&self) -> String {
        let side = (self.patch.len() as f64).sqrt().round() as usize;
        let mut out = String::new();
        for r in 0..side {
            if r > 0 {
                out.push('|');
            }
            for c in 0..side {
                out.push(match self.patch[r * side + c] {
                    CELL_BLOCKED => 'b',
                    CELL_FREE => 'f',
                    _ => 'a',
                });
            }
        }
        out.push('@');
        out.push_str(&format!("{},{}", self.dir.0, self.dir.1));
        out
    }

    /// Parses the canonical text form, checking the patch side against `radius`.
    pub fn parse(text: &str, radius: u32) -> Option<Observation> {
        let (patch_part, dir_part) = text.split_once('@')?;
        let side = (2 * radius + 1) as usize;
        let rows: Vec<&str> = patch_part.split('|').collect();
        if rows.len() != side {
            return None;
        }
        let mut patch = Vec::with_capacity(side * side);
        for row in rows {
            if row.len() != side {
                return None;
            }
            for ch in row.chars() {
                patch.push(match ch {
                    'b' => CELL_BLOCKED,
                    'f' => CELL_FREE,
                    'a' => CELL_AGENT,
                    _ => return None,
                });
            }
        }
        let (dx, dy) = dir_part.split_once(',')?;
        let dx: i8 = dx.parse().ok()?;
        let dy: i8 = dy.parse().ok()?;
        if !(-1..=1).contains(&dx) || !(-1..=1).contains(&dy) {
            return None;
        }
        Some(Observation {
            patch: patch.into_boxed_slice(),
            dir: (dx, dy),
        })
    }
}

impl fmt::Debug for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Obs({})", self.encode())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AgentSpec {
    pub start: (i32, i32),
    pub target: (i32, i32),
}

/// On-disk environment document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvFile {
    pub width: i32,
    pub height: i32,
    #[serde(default)]
    pub obstacles: Vec<(i32, i32)>,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub radius: u32,
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("grid dimensions must be positive")]
    BadDimensions,
    #[error("agent {0} start {1:?} is not a free cell")]
    StartNotFree(usize, (i32, i32)),
    #[error("agent {0} target {1:?} is not a free cell")]
    TargetNotFree(usize, (i32, i32)),
    #[error("agent starts are not pairwise distinct")]
    DuplicateStarts,
    #[error("no agents declared")]
    NoAgents,
    #[error("state space too large: {0} states")]
    TooLarge(usize),
}

const STATE_SPACE_CAP: usize = 2_000_000;

/// A fully enumerated environment instance. Immutable after construction.
pub struct EnvironmentInstance {
    pub width: i32,
    pub height: i32,
    pub radius: u32,
    pub agents: Vec<AgentSpec>,
    obstacle_grid: Vec<bool>,
    /// Free cells in canonical (row, col) order; state tuples index into this.
    pub free_cells: Vec<(i32, i32)>,
    cell_index: HashMap<(i32, i32), usize>,
    pub num_states: usize,
    pub num_joint_actions: usize,
    pub safe_set: StateSet,
    pub initial_set: StateSet,
    /// obs_of[i][s] is the observation id of agent i in state s.
    obs_of: Vec<Vec<u32>>,
    /// observations[i] lists agent i's realizable observations in sorted order.
    pub observations: Vec<Vec<Observation>>,
    /// obs_states[i][o] is the set of states where agent i observes o.
    pub obs_states: Vec<Vec<StateSet>>,
    pub fingerprint: u64,
}

impl EnvironmentInstance {
    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let file: EnvFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn from_file(file: &EnvFile) -> Result<Self, EnvError> {
        if file.width <= 0 || file.height <= 0 {
            return Err(EnvError::BadDimensions);
        }
        if file.agents.is_empty() {
            return Err(EnvError::NoAgents);
        }
        let w = file.width;
        let h = file.height;
        let mut obstacle_grid = vec![false; (w * h) as usize];
        for &(c, r) in &file.obstacles {
            if c >= 0 && c < w && r >= 0 && r < h {
                obstacle_grid[(r * w + c) as usize] = true;
            }
        }
        // Canonical free-cell order: by (row, col).
        let mut free_cells = Vec::new();
        for r in 0..h {
            for c in 0..w {
                if !obstacle_grid[(r * w + c) as usize] {
                    free_cells.push((c, r));
                }
            }
        }
        let cell_index: HashMap<(i32, i32), usize> =
            free_cells.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let n = file.agents.len();
        for (i, a) in file.agents.iter().enumerate() {
            if !cell_index.contains_key(&a.start) {
                return Err(EnvError::StartNotFree(i, a.start));
            }
            if !cell_index.contains_key(&a.target) {
                return Err(EnvError::TargetNotFree(i, a.target));
            }
        }
        {
            let mut starts: Vec<_> = file.agents.iter().map(|a| a.start).collect();
            starts.sort_unstable();
            starts.dedup();
            if starts.len() != n {
                return Err(EnvError::DuplicateStarts);
            }
        }
        let nf = free_cells.len();
        let num_states = nf.checked_pow(n as u32).ok_or(EnvError::TooLarge(usize::MAX))?;
        if num_states > STATE_SPACE_CAP {
            return Err(EnvError::TooLarge(num_states));
        }
        let num_joint_actions = NUM_ACTIONS.pow(n as u32);

        let mut env = EnvironmentInstance {
            width: w,
            height: h,
            radius: file.radius,
            agents: file.agents.clone(),
            obstacle_grid,
            free_cells,
            cell_index,
            num_states,
            num_joint_actions,
            safe_set: BitSet::empty(num_states),
            initial_set: BitSet::empty(num_states),
            obs_of: Vec::new(),
            observations: Vec::new(),
            obs_states: Vec::new(),
            fingerprint: 0,
        };

        let mut safe = BitSet::empty(num_states);
        for s in 0..num_states {
            let pos = env.positions_of(s);
            let mut sorted = pos.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() == n {
                safe.insert(s);
            }
        }
        env.safe_set = safe;

        let start_cells: Vec<usize> = env
            .agents
            .iter()
            .map(|a| env.cell_index[&a.start])
            .collect();
        let s0 = env.state_of(&start_cells);
        env.initial_set = BitSet::singleton(num_states, s0);

        // Per-agent observation tables.
        for i in 0..n {
            let mut obs_map: HashMap<Observation, u32> = HashMap::new();
            let mut obs_list: Vec<Observation> = Vec::new();
            let mut ids = vec![0u32; num_states];
            for s in 0..num_states {
                let o = env.compute_observation(s, i);
                let id = *obs_map.entry(o.clone()).or_insert_with(|| {
                    obs_list.push(o);
                    (obs_list.len() - 1) as u32
                });
                ids[s] = id;
            }
            // Re-sort observations for a canonical alphabet order.
            let mut order: Vec<usize> = (0..obs_list.len()).collect();
            order.sort_by(|&a, &b| obs_list[a].cmp(&obs_list[b]));
            let mut rank = vec![0u32; obs_list.len()];
            for (new_id, &old_id) in order.iter().enumerate() {
                rank[old_id] = new_id as u32;
            }
            let sorted_list: Vec<Observation> =
                order.iter().map(|&o| obs_list[o].clone()).collect();
            for id in ids.iter_mut() {
                *id = rank[*id as usize];
            }
            let mut sets = vec![BitSet::empty(num_states); sorted_list.len()];
            for (s, &id) in ids.iter().enumerate() {
                sets[id as usize].insert(s);
            }
            env.obs_of.push(ids);
            env.observations.push(sorted_list);
            env.obs_states.push(sets);
        }

        env.fingerprint = fingerprint_of(file);
        Ok(env)
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn is_free(&self, c: i32, r: i32) -> bool {
        c >= 0
            && c < self.width
            && r >= 0
            && r < self.height
            && !self.obstacle_grid[(r * self.width + c) as usize]
    }

    /// Decodes a state index into per-agent free-cell indices.
    pub fn positions_of(&self, mut s: usize) -> Vec<usize> {
        let n = self.num_agents();
        let nf = self.free_cells.len();
        let mut pos = vec![0usize; n];
        for i in (0..n).rev() {
            pos[i] = s % nf;
            s /= nf;
        }
        pos
    }

    /// Encodes per-agent free-cell indices into a state index (agent 0 most
    /// significant).
    pub fn state_of(&self, positions: &[usize]) -> usize {
        let nf = self.free_cells.len();
        positions.iter().fold(0usize, |acc, &p| acc * nf + p)
    }

    pub fn cells_of(&self, s: usize) -> Vec<(i32, i32)> {
        self.positions_of(s)
            .into_iter()
            .map(|p| self.free_cells[p])
            .collect()
    }

    /// State index of an explicit tuple of cells, if all are free.
    pub fn state_of_cells(&self, cells: &[(i32, i32)]) -> Option<usize> {
        if cells.len() != self.num_agents() {
            return None;
        }
        let mut pos = Vec::with_capacity(cells.len());
        for c in cells {
            pos.push(*self.cell_index.get(c)?);
        }
        Some(self.state_of(&pos))
    }

    pub fn initial_state(&self) -> usize {
        self.initial_set.first().expect("initial set is a singleton")
    }

    /// Moves one agent from a free-cell index under an action, applying the
    /// bump rule.
    pub fn move_cell(&self, cell_idx: usize, a: Action) -> usize {
        let (c, r) = self.free_cells[cell_idx];
        let (dc, dr) = a.delta();
        let (nc, nr) = (c + dc, r + dr);
        if self.is_free(nc, nr) {
            self.cell_index[&(nc, nr)]
        } else {
            cell_idx
        }
    }

    /// Decodes a joint-action index into per-agent actions (agent 0 most
    /// significant).
    pub fn joint_actions_of(&self, mut a: usize) -> Vec<Action> {
        let n = self.num_agents();
        let mut acts = vec![Action::Stay; n];
        for i in (0..n).rev() {
            acts[i] = Action::from_index(a % NUM_ACTIONS);
            a /= NUM_ACTIONS;
        }
        acts
    }

    pub fn joint_index(&self, actions: &[Action]) -> usize {
        actions
            .iter()
            .fold(0usize, |acc, a| acc * NUM_ACTIONS + a.index())
    }

    /// Applies a joint action: every agent moves simultaneously under the bump
    /// rule; collisions are permitted in the result.
    pub fn apply_joint(&self, s: usize, joint: usize) -> usize {
        let mut pos = self.positions_of(s);
        let acts = self.joint_actions_of(joint);
        for (p, a) in pos.iter_mut().zip(acts) {
            *p = self.move_cell(*p, a);
        }
        self.state_of(&pos)
    }

    pub fn apply_actions(&self, s: usize, actions: &[Action]) -> usize {
        self.apply_joint(s, self.joint_index(actions))
    }

    /// The transition description: all joint actions mapping `s` to `s_next`.
    /// May be non-singleton because of the bump rule.
    pub fn sas(&self, s: usize, s_next: usize) -> Vec<usize> {
        (0..self.num_joint_actions)
            .filter(|&a| self.apply_joint(s, a) == s_next)
            .collect()
    }

    /// The set of joint actions moving `s` into `targets`.
    pub fn joint_into(&self, s: usize, targets: &StateSet) -> BitSet {
        let mut set = BitSet::empty(self.num_joint_actions);
        for a in 0..self.num_joint_actions {
            if targets.contains(self.apply_joint(s, a)) {
                set.insert(a);
            }
        }
        set
    }

    fn compute_observation(&self, s: usize, agent: usize) -> Observation {
        let pos = self.positions_of(s);
        let cells: Vec<(i32, i32)> = pos.iter().map(|&p| self.free_cells[p]).collect();
        let (c0, r0) = cells[agent];
        let rad = self.radius as i32;
        let side = (2 * rad + 1) as usize;
        let mut patch = Vec::with_capacity(side * side);
        for dr in (-rad..=rad).rev() {
            for dc in -rad..=rad {
                let (c, r) = (c0 + dc, r0 + dr);
                let class = if !self.is_free(c, r) {
                    CELL_BLOCKED
                } else if cells.contains(&(c, r)) {
                    CELL_AGENT
                } else {
                    CELL_FREE
                };
                patch.push(class);
            }
        }
        let (tc, tr) = self.agents[agent].target;
        let dir = ((tc - c0).signum() as i8, (tr - r0).signum() as i8);
        Observation {
            patch: patch.into_boxed_slice(),
            dir,
        }
    }

    /// The (deterministic) observation of agent `agent` in state `s`, as an id
    /// into `observations[agent]`.
    pub fn obs_id(&self, s: usize, agent: usize) -> u32 {
        self.obs_of[agent][s]
    }

    pub fn observe(&self, s: usize, agent: usize) -> &Observation {
        &self.observations[agent][self.obs_of[agent][s] as usize]
    }

    /// States where agent `agent` observes exactly `o`, or the empty set if
    /// `o` is not realizable.
    pub fn states_with_obs(&self, agent: usize, o: &Observation) -> StateSet {
        match self.observations[agent].binary_search_by(|x| x.cmp(o)) {
            Ok(id) => self.obs_states[agent][id].clone(),
            Err(_) => BitSet::empty(self.num_states),
        }
    }

    /// Realizable joint observations in canonical order, each with the set of
    /// states producing it.
    pub fn joint_observation_classes(&self) -> Vec<(Vec<u32>, StateSet)> {
        let n = self.num_agents();
        let mut classes: HashMap<Vec<u32>, StateSet> = HashMap::new();
        for s in 0..self.num_states {
            let key: Vec<u32> = (0..n).map(|i| self.obs_of[i][s]).collect();
            classes
                .entry(key)
                .or_insert_with(|| BitSet::empty(self.num_states))
                .insert(s);
        }
        let mut out: Vec<(Vec<u32>, StateSet)> = classes.into_iter().collect();
        out.sort_by(|a, b| {
            let ka: Vec<&Observation> = a
                .0
                .iter()
                .enumerate()
                .map(|(i, &o)| &self.observations[i][o as usize])
                .collect();
            let kb: Vec<&Observation> = b
                .0
                .iter()
                .enumerate()
                .map(|(i, &o)| &self.observations[i][o as usize])
                .collect();
            ka.cmp(&kb)
        });
        out
    }

    pub fn all_on_targets(&self, s: usize) -> bool {
        let cells = self.cells_of(s);
        cells
            .iter()
            .zip(self.agents.iter())
            .all(|(c, a)| *c == a.target)
    }

    /// Mask of all five actions; convenience for unshielded choice.
    pub fn all_actions(&self) -> u8 {
        ALL_ACTIONS
    }
}

fn fingerprint_of(file: &EnvFile) -> u64 {
    // FNV-1a over a canonical rendering; stable across runs and builds.
    let mut canon = format!("{}x{};r{};", file.width, file.height, file.radius);
    let mut obs = file.obstacles.clone();
    obs.sort_unstable();
    for (c, r) in obs {
        canon.push_str(&format!("o{c},{r};"));
    }
    for a in &file.agents {
        canon.push_str(&format!(
            "a{},{},{},{};",
            a.start.0, a.start.1, a.target.0, a.target.1
        ));
    }
    let mut h: u64 = 0xcbf29ce484222325;
    for b in canon.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// The Blind Agents instance used throughout the docs and tests.
pub const BLIND_AGENTS_JSON: &str = r#"{"width":3,"height":3,"obstacles":[[0,0],[2,0],[0,2],[2,2]],"agents":[{"start":[1,2],"target":[1,0]},{"start":[0,1],"target":[2,1]}],"radius":0}"#;

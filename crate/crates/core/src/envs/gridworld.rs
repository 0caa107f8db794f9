use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::reduction::{Decoder, Encoder, FiniteMap};
use crate::taskcore::{is_admissible, EvalMode, Policy, ProbRow, TabularModel, TaskSpec};

/// Cardinal action directions, indexed N, E, S, W. Screen coordinates:
/// x grows east, y grows south, so "north" decreases y.
pub const DIRS: [(i32, i32); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum GoalDir {
    N,
    E,
    S,
    W,
}

impl GoalDir {
    pub const ALL: [GoalDir; 4] = [GoalDir::N, GoalDir::E, GoalDir::S, GoalDir::W];

    pub fn index(self) -> usize {
        match self {
            GoalDir::N => 0,
            GoalDir::E => 1,
            GoalDir::S => 2,
            GoalDir::W => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GoalDir::N => "N",
            GoalDir::E => "E",
            GoalDir::S => "S",
            GoalDir::W => "W",
        }
    }

    /// Goal cell on the ±n border (screen coordinates, north = -y).
    pub fn goal_cell(self, n: i32) -> (i32, i32) {
        match self {
            GoalDir::N => (0, -n),
            GoalDir::E => (n, 0),
            GoalDir::S => (0, n),
            GoalDir::W => (-n, 0),
        }
    }
}

/// One quarter-turn on map locations, applied k times: (x, y) -> (y, -x).
pub fn rotate_point(k: usize, p: (i32, i32)) -> (i32, i32) {
    let mut q = p;
    for _ in 0..(k % 4) {
        q = (q.1, -q.0);
    }
    q
}

/// Which goal direction a task's goal cell becomes under `rotate_point(k, _)`.
fn rotate_goal(k: usize, g: GoalDir) -> GoalDir {
    // One turn maps N -> W -> S -> E -> N, i.e. index i -> (i + 3) mod 4.
    GoalDir::ALL[(g.index() + 3 * (k % 4)) % 4]
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GridWorldParams {
    /// Half-width: the world is the integer lattice on [-n, n]^2.
    pub n: i32,
    /// Obstacle count.
    pub m: usize,
    pub goal_dir: GoalDir,
    /// Move distance per action; the discretization fixes d = 1.
    pub step_d: i32,
    /// Cap on the number of sampled layouts when full enumeration is too
    /// large.
    pub max_layouts: usize,
}

impl GridWorldParams {
    pub fn new(n: i32, m: usize, goal_dir: GoalDir) -> Self {
        GridWorldParams { n, m, goal_dir, step_d: 1, max_layouts: 64 }
    }
}

type Cell = (i32, i32);
type Layout = Vec<Cell>; // sorted obstacle cells

/// The four goal-direction navigation tasks over a shared observation
/// universe: every observation is a full map (obstacles, goal, robot), and
/// the universe spans all four goals so rotation encoders are total.
#[derive(Debug, Clone)]
pub struct GridWorldFamily {
    pub n: i32,
    pub m: usize,
    pub layout_seed: u64,
    cells: Vec<Cell>,
    /// Layout pool per goal index; pools are rotations of one reference pool
    /// so the rotation encoders biject the universe onto itself.
    layouts: [Vec<Layout>; 4],
    obs_list: Vec<(u8, Layout, Cell)>,
    obs_index: BTreeMap<(u8, Layout, Cell), usize>,
}

fn in_bounds(n: i32, c: Cell) -> bool {
    c.0.abs() <= n && c.1.abs() <= n
}

/// Every free cell can reach the goal (flood fill over free cells).
fn layout_allows_paths(n: i32, goal: Cell, obstacles: &[Cell]) -> bool {
    let blocked: BTreeSet<Cell> = obstacles.iter().copied().collect();
    if blocked.contains(&goal) {
        return false;
    }
    let total_free = ((2 * n + 1) * (2 * n + 1)) as usize - blocked.len();
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(goal);
    queue.push_back(goal);
    while let Some(c) = queue.pop_front() {
        for d in DIRS {
            let next = (c.0 + d.0, c.1 + d.1);
            if in_bounds(n, next) && !blocked.contains(&next) && seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    seen.len() == total_free
}

fn combinations(pool: &[Cell], m: usize) -> Vec<Layout> {
    fn rec(pool: &[Cell], m: usize, start: usize, cur: &mut Layout, out: &mut Vec<Layout>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..pool.len() {
            cur.push(pool[i]);
            rec(pool, m, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(pool, m, 0, &mut Vec::new(), &mut out);
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k {
        acc *= (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

const FULL_ENUMERATION_LIMIT: f64 = 4096.0;
const LAYOUT_RETRY_FACTOR: usize = 50;

impl GridWorldFamily {
    pub fn build(n: i32, m: usize, layout_seed: u64, max_layouts: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::Config("gridworld needs n >= 1".into()));
        }
        let cell_count = ((2 * n + 1) * (2 * n + 1)) as usize;
        if m + 2 > cell_count {
            return Err(Error::Config(format!(
                "{m} obstacles leave no room on {cell_count} cells"
            )));
        }
        let mut cells: Vec<Cell> = Vec::with_capacity(cell_count);
        for x in -n..=n {
            for y in -n..=n {
                cells.push((x, y));
            }
        }

        // Reference pool for goal N, either exhaustive or seeded sampling
        // with a retry cap; other goals' pools are its rotations.
        let goal_n = GoalDir::N.goal_cell(n);
        let candidates: Vec<Cell> = cells.iter().copied().filter(|&c| c != goal_n).collect();
        let mut reference: Vec<Layout>;
        if binomial(candidates.len(), m) <= FULL_ENUMERATION_LIMIT {
            reference = combinations(&candidates, m)
                .into_iter()
                .filter(|l| layout_allows_paths(n, goal_n, l))
                .collect();
            if reference.is_empty() {
                return Err(Error::Config("no layout admits a path to the goal".into()));
            }
        } else {
            let mut rng = ChaCha12Rng::seed_from_u64(layout_seed);
            let mut seen = BTreeSet::new();
            reference = Vec::new();
            let mut attempts = 0;
            while reference.len() < max_layouts && attempts < LAYOUT_RETRY_FACTOR * max_layouts {
                attempts += 1;
                let mut picked = BTreeSet::new();
                while picked.len() < m {
                    picked.insert(candidates[rng.gen_range(0..candidates.len())]);
                }
                let layout: Layout = picked.into_iter().collect();
                if layout_allows_paths(n, goal_n, &layout) && seen.insert(layout.clone()) {
                    reference.push(layout);
                }
            }
            if reference.len() < max_layouts {
                return Err(Error::Config(format!(
                    "layout generation exhausted retries: {} of {max_layouts} found",
                    reference.len()
                )));
            }
            reference.sort();
        }

        let rotate_layout = |k: usize, l: &Layout| -> Layout {
            let mut out: Layout = l.iter().map(|&c| rotate_point(k, c)).collect();
            out.sort();
            out
        };
        // rotate_goal(k, N) tells which goal's pool rot_k(reference) serves.
        let mut layouts: [Vec<Layout>; 4] = [vec![], vec![], vec![], vec![]];
        for k in 0..4 {
            let target = rotate_goal(k, GoalDir::N).index();
            let mut pool: Vec<Layout> = reference.iter().map(|l| rotate_layout(k, l)).collect();
            pool.sort();
            layouts[target] = pool;
        }

        let mut obs_list = Vec::new();
        let mut obs_index = BTreeMap::new();
        for gi in 0..4u8 {
            for layout in &layouts[gi as usize] {
                let blocked: BTreeSet<Cell> = layout.iter().copied().collect();
                for &robot in cells.iter().filter(|c| !blocked.contains(c)) {
                    let key = (gi, layout.clone(), robot);
                    obs_index.insert(key.clone(), obs_list.len());
                    obs_list.push(key);
                }
            }
        }

        Ok(GridWorldFamily { n, m, layout_seed, cells, layouts, obs_list, obs_index })
    }

    pub fn observation_count(&self) -> usize {
        self.obs_list.len()
    }

    pub fn layout_pool(&self, goal: GoalDir) -> &[Layout] {
        &self.layouts[goal.index()]
    }

    fn states_for(&self, goal: GoalDir) -> Vec<(usize, Cell)> {
        let mut states = Vec::new();
        for (li, layout) in self.layouts[goal.index()].iter().enumerate() {
            let blocked: BTreeSet<Cell> = layout.iter().copied().collect();
            for &robot in self.cells.iter().filter(|c| !blocked.contains(c)) {
                states.push((li, robot));
            }
        }
        states
    }

    /// The navigation task for one goal direction: reward 1 on reaching the
    /// goal, full-map observations, random start and layout under p0.
    pub fn task(&self, goal: GoalDir) -> Result<TaskSpec> {
        let gi = goal.index();
        let goal_cell = goal.goal_cell(self.n);
        let states = self.states_for(goal);
        let state_index: BTreeMap<(usize, Cell), usize> =
            states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let n_states = states.len();
        let n_obs = self.observation_count();

        let mut transition = Vec::with_capacity(n_states);
        let mut sensor = Vec::with_capacity(n_states);
        let mut reward = Vec::with_capacity(n_states);
        let mut terminal = Vec::with_capacity(n_states);
        for &(li, robot) in &states {
            let layout = &self.layouts[gi][li];
            let blocked: BTreeSet<Cell> = layout.iter().copied().collect();
            let at_goal = robot == goal_cell;
            terminal.push(at_goal);
            sensor.push(vec![(self.obs_index[&(gi as u8, layout.clone(), robot)], 1.0)]);
            let mut t_row: Vec<ProbRow> = Vec::with_capacity(4);
            let mut r_row = Vec::with_capacity(4);
            for d in DIRS {
                let target = (robot.0 + d.0, robot.1 + d.1);
                let next = if in_bounds(self.n, target) && !blocked.contains(&target) {
                    target
                } else {
                    robot // blocked moves stay in place
                };
                t_row.push(vec![(state_index[&(li, next)], 1.0)]);
                r_row.push(if !at_goal && next == goal_cell { 1.0 } else { 0.0 });
            }
            transition.push(t_row);
            reward.push(r_row);
        }

        let n_layouts = self.layouts[gi].len();
        let mut init: ProbRow = Vec::new();
        for (li, layout) in self.layouts[gi].iter().enumerate() {
            let blocked: BTreeSet<Cell> = layout.iter().copied().collect();
            let starts: Vec<Cell> = self
                .cells
                .iter()
                .copied()
                .filter(|c| !blocked.contains(c) && *c != goal_cell)
                .collect();
            let p = 1.0 / (n_layouts as f64 * starts.len() as f64);
            for s in starts {
                init.push((state_index[&(li, s)], p));
            }
        }

        let model = TabularModel { transition, sensor, reward, init, terminal };
        let horizon = ((2 * self.n + 1) * (2 * self.n + 1)) as usize;
        TaskSpec::tabular(
            format!("gridworld-n{}-m{}-{}", self.n, self.m, goal.label()),
            n_states,
            4,
            n_obs,
            model,
            1.0,
            horizon,
        )
    }

    /// Observation rotation: every location in the map list (obstacles,
    /// goal, robot) is rotated by 90° k times, which is a bijection of the
    /// shared universe.
    pub fn rotation_encoder(&self, k: usize) -> Result<Encoder> {
        let mut table = Vec::with_capacity(self.obs_list.len());
        for (gi, layout, robot) in &self.obs_list {
            let goal = rotate_goal(k, GoalDir::ALL[*gi as usize]);
            let mut rotated: Layout = layout.iter().map(|&c| rotate_point(k, c)).collect();
            rotated.sort();
            let robot2 = rotate_point(k, *robot);
            let key = (goal.index() as u8, rotated, robot2);
            let idx = *self
                .obs_index
                .get(&key)
                .ok_or_else(|| Error::Config("rotated observation missing from universe".into()))?;
            table.push(idx);
        }
        let map = FiniteMap::named(
            table,
            self.obs_list.len(),
            "rot90_obs",
            json!({ "n": self.n, "m": self.m, "k": k, "layout_seed": self.layout_seed }),
        )?;
        Ok(Encoder::finite(map))
    }

    /// All four rotations, k = 0..3 (identity at k = 0).
    pub fn rotation_encoder_space(&self) -> Result<crate::reduction::EncoderSpace> {
        let encoders: Result<Vec<Encoder>> = (0..4).map(|k| self.rotation_encoder(k)).collect();
        crate::reduction::FunctionSpace::explicit(encoders?)
    }

    /// The encoder index k with rot_k mapping observations of `from` onto
    /// observations of `to`; its matching decoder is `rotation_decoder(k)`.
    pub fn rotation_between(from: GoalDir, to: GoalDir) -> usize {
        (4 + from.index() - to.index()) % 4
    }

    /// Generate >= `count` policies exactly admissible on the goal task:
    /// all 24 action-preference tie-break variants of the shortest-path
    /// optimum, then seeded random optimal-action choices. Entries for other
    /// goals' observations are unconstrained filler.
    pub fn admissible_family(&self, goal: GoalDir, count: usize, seed: u64) -> Result<Vec<Policy>> {
        let gi = goal.index();
        let goal_cell = goal.goal_cell(self.n);
        let n_obs = self.observation_count();

        // Optimal action sets per on-goal observation, from BFS distances.
        let mut optimal: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for layout in &self.layouts[gi] {
            let blocked: BTreeSet<Cell> = layout.iter().copied().collect();
            let mut dist: BTreeMap<Cell, usize> = BTreeMap::new();
            let mut queue = VecDeque::new();
            dist.insert(goal_cell, 0);
            queue.push_back(goal_cell);
            while let Some(c) = queue.pop_front() {
                let d = dist[&c];
                for dir in DIRS {
                    let next = (c.0 + dir.0, c.1 + dir.1);
                    if in_bounds(self.n, next)
                        && !blocked.contains(&next)
                        && !dist.contains_key(&next)
                    {
                        dist.insert(next, d + 1);
                        queue.push_back(next);
                    }
                }
            }
            for (&cell, &d) in &dist {
                if cell == goal_cell {
                    continue;
                }
                let obs = self.obs_index[&(gi as u8, layout.clone(), cell)];
                let mut actions = Vec::new();
                for (a, dir) in DIRS.iter().enumerate() {
                    let next = (cell.0 + dir.0, cell.1 + dir.1);
                    if in_bounds(self.n, next)
                        && !blocked.contains(&next)
                        && dist.get(&next) == Some(&(d - 1))
                    {
                        actions.push(a);
                    }
                }
                debug_assert!(!actions.is_empty());
                optimal.insert(obs, actions);
            }
        }

        let perms = permutations4();
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut variant = 0usize;
        while out.len() < count && variant < 24 + 8 * count {
            let mut table = vec![0usize; n_obs];
            if variant < perms.len() {
                let pref = &perms[variant];
                for (obs, slot) in table.iter_mut().enumerate() {
                    *slot = match optimal.get(&obs) {
                        Some(actions) => *pref
                            .iter()
                            .find(|a| actions.contains(a))
                            .expect("optimal set nonempty"),
                        None => (obs + variant) % 4,
                    };
                }
            } else {
                let mut rng = ChaCha12Rng::seed_from_u64(seed ^ (variant as u64).wrapping_mul(0x9e3779b97f4a7c15));
                for (obs, slot) in table.iter_mut().enumerate() {
                    *slot = match optimal.get(&obs) {
                        Some(actions) => actions[rng.gen_range(0..actions.len())],
                        None => rng.gen_range(0..4),
                    };
                }
            }
            variant += 1;
            if seen.insert(table.clone()) {
                out.push(Policy::tabular(table, 4)?);
            }
        }
        if out.len() < count {
            return Err(Error::Config(format!(
                "could only generate {} distinct admissible policies of {count}",
                out.len()
            )));
        }
        let task = self.task(goal)?;
        for (i, p) in out.iter().enumerate() {
            if !is_admissible(&task, p, EvalMode::Exact)? {
                return Err(Error::Config(format!(
                    "generated policy {i} is not exactly admissible (internal bug)"
                )));
            }
        }
        Ok(out)
    }
}

/// Action rotation: (d, i) -> (d, i + k mod 4).
pub fn rotation_decoder(k: usize) -> Decoder {
    let table: Vec<usize> = (0..4).map(|i| (i + k) % 4).collect();
    let map = FiniteMap::named(table, 4, "rot_action_mod4", json!({ "k": k }))
        .expect("static table is valid");
    Decoder::finite(map)
}

/// All four action rotations (identity at k = 0).
pub fn rotation_decoder_space() -> crate::reduction::DecoderSpace {
    crate::reduction::FunctionSpace::explicit((0..4).map(rotation_decoder).collect())
        .expect("rotations are distinct")
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            if b == a {
                continue;
            }
            for c in 0..4 {
                if c == a || c == b {
                    continue;
                }
                let d = 6 - a - b - c;
                out.push([a, b, c, d]);
            }
        }
    }
    out
}

/// Build one gridworld task (the family member for `params.goal_dir`).
pub fn make_gridworld(params: &GridWorldParams, layout_seed: u64) -> Result<TaskSpec> {
    if params.step_d != 1 {
        return Err(Error::Config("the lattice discretization fixes step_d = 1".into()));
    }
    GridWorldFamily::build(params.n, params.m, layout_seed, params.max_layouts)?
        .task(params.goal_dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::compose;
    use crate::taskcore::exact_return;

    #[test]
    fn rotation_formulas_match_the_definitions() {
        assert_eq!(rotate_point(1, (3, 5)), (5, -3));
        assert_eq!(rotate_point(0, (3, 5)), (3, 5));
        assert_eq!(rotate_point(4, (3, 5)), (3, 5));
        // Decoder k=1 maps North (0) to East (1).
        let dec = rotation_decoder(1);
        match &dec.map {
            crate::reduction::MapFn::Finite(m) => assert_eq!(m.table, vec![1, 2, 3, 0]),
            _ => panic!(),
        }
    }

    #[test]
    fn k0_maps_are_identity() {
        let family = GridWorldFamily::build(2, 0, 0, 64).unwrap();
        let enc = family.rotation_encoder(0).unwrap();
        match &enc.map {
            crate::reduction::MapFn::Finite(m) => assert!(m.is_identity()),
            _ => panic!(),
        }
        match &rotation_decoder(0).map {
            crate::reduction::MapFn::Finite(m) => assert!(m.is_identity()),
            _ => panic!(),
        }
    }

    #[test]
    fn obstacle_free_world_counts() {
        let family = GridWorldFamily::build(2, 0, 0, 64).unwrap();
        assert_eq!(family.layout_pool(GoalDir::N).len(), 1);
        // 4 goals x 1 layout x 25 cells.
        assert_eq!(family.observation_count(), 100);
    }

    #[test]
    fn every_generated_layout_admits_paths() {
        let family = GridWorldFamily::build(2, 1, 0, 64).unwrap();
        for goal in GoalDir::ALL {
            let pool = family.layout_pool(goal);
            assert_eq!(pool.len(), 24, "one layout per non-goal cell");
            for layout in pool {
                assert!(layout_allows_paths(2, goal.goal_cell(2), layout));
            }
        }
    }

    #[test]
    fn same_seed_same_support() {
        let a = GridWorldFamily::build(2, 1, 9, 64).unwrap();
        let b = GridWorldFamily::build(2, 1, 9, 64).unwrap();
        assert_eq!(a.layouts, b.layouts);
        assert_eq!(a.obs_list, b.obs_list);
    }

    #[test]
    fn dp_optimal_policy_is_exactly_admissible() {
        let family = GridWorldFamily::build(2, 0, 0, 64).unwrap();
        let task = family.task(GoalDir::N).unwrap();
        let policies = family.admissible_family(GoalDir::N, 1, 0).unwrap();
        let r = exact_return(&task, &policies[0]).unwrap();
        assert!((r - 1.0).abs() <= 1e-12, "got {r}");
    }

    #[test]
    fn rotated_composition_solves_the_east_task() {
        // The canonical witness: h = rotation_encoder(1), g = rotation_decoder(1)
        // turns every admissible north policy into an admissible east policy.
        let family = GridWorldFamily::build(2, 1, 0, 64).unwrap();
        assert_eq!(GridWorldFamily::rotation_between(GoalDir::E, GoalDir::N), 1);
        let task_e = family.task(GoalDir::E).unwrap();
        let north_family = family.admissible_family(GoalDir::N, 6, 3).unwrap();
        let h = family.rotation_encoder(1).unwrap();
        for pi in &north_family {
            let composed = compose(rotation_decoder(1), pi.clone(), h.clone()).unwrap();
            let r = exact_return(&task_e, &composed).unwrap();
            assert!((r - 1.0).abs() <= 1e-10, "composed return {r}");
        }
    }

    #[test]
    fn admissible_family_has_distinct_members() {
        let family = GridWorldFamily::build(2, 0, 0, 64).unwrap();
        let policies = family.admissible_family(GoalDir::E, 30, 7).unwrap();
        assert_eq!(policies.len(), 30);
        let tables: BTreeSet<Vec<usize>> = policies
            .iter()
            .map(|p| match p {
                Policy::Tabular { table, .. } => table.clone(),
                _ => panic!(),
            })
            .collect();
        assert_eq!(tables.len(), 30);
    }
}

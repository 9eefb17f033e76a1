//! Monte Carlo tree search over steering sequences with vector rewards.
//!
//! The tree is grown by the classic four phases — selection, expansion,
//! rollout, backpropagation — over the discrete steering set of a
//! [`Workspace`]. Each node stores a running sum of a reward vector with one
//! component per objective; planning runs in one of two modes decided by
//! [`SearchConfig::objective_count`]:
//!
//! * **scalar (1 objective)** — selection descends through the child with the
//!   highest UCB value `mean + C·sqrt(2·ln N_p / N_j)`, ties broken by lowest
//!   child index.
//! * **vector (2 objectives)** — each child gets a Pareto-UCB vector,
//!   `mean_k + C·sqrt((4·ln N_p + ln D_r) / (2·N_j))` per component, and
//!   selection draws uniformly from the Pareto front of those vectors. With a
//!   single objective the exploration radical collapses to the scalar one
//!   exactly (`ln 1 = 0`), so vector selection over scalars degenerates to
//!   UCB up to tie-breaking.
//!
//! Rewards come from [`RewardMaps`]: one grid layer per objective, co-registered
//! with the workspace, read by nearest-cell lookup. A simulation's return is
//! the expanded node's own cell reward plus an un-discounted "moving forward"
//! rollout (zero-steering steps that stop at the first inadmissible position);
//! that sum — not a per-step average — is what backpropagation adds along the
//! path, so a node's mean reward is the mean simulated return through it.
//!
//! The recommended plan is the root-to-leaf walk through maximal visit counts
//! (ties broken by lowest action index), which is deliberately independent of
//! the reward magnitudes accumulated on the way.

use ndarray::Array2;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::world::{GridGeometry, RobotState, Workspace};

/// Maximum number of reward objectives a search can carry.
pub const MAX_OBJECTIVES: usize = 2;

/// Fixed-width reward vector; components at index ≥ `objective_count` stay 0.
pub type RewardVec = [f64; MAX_OBJECTIVES];

/// Failures constructing or running a search.
#[derive(Debug, Error)]
pub enum SearchError {
    /// A [`SearchConfig`] or [`RewardMaps`] constructor argument is out of range.
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    /// The reward maps handed to `search` do not match the configuration or
    /// the workspace they are supposed to be registered with.
    #[error("reward maps incompatible with search: {0}")]
    MapMismatch(String),
}

/// Tunables for one tree search.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    exploration_c: f64,
    iterations: usize,
    rollout_steps: usize,
    objective_count: usize,
}

impl SearchConfig {
    /// Validate and build a configuration.
    ///
    /// `exploration_c` must be finite and positive, `iterations` at least 1,
    /// and `objective_count` 1 (scalar selection) or 2 (Pareto selection).
    pub fn new(
        exploration_c: f64,
        iterations: usize,
        rollout_steps: usize,
        objective_count: usize,
    ) -> Result<Self, SearchError> {
        if !exploration_c.is_finite() || exploration_c <= 0.0 {
            return Err(SearchError::InvalidConfig(format!(
                "exploration constant must be finite and positive, got {exploration_c}"
            )));
        }
        if iterations == 0 {
            return Err(SearchError::InvalidConfig(
                "iteration budget must be at least 1".into(),
            ));
        }
        if objective_count == 0 || objective_count > MAX_OBJECTIVES {
            return Err(SearchError::InvalidConfig(format!(
                "objective count must be 1 or {MAX_OBJECTIVES}, got {objective_count}"
            )));
        }
        Ok(Self {
            exploration_c,
            iterations,
            rollout_steps,
            objective_count,
        })
    }

    pub fn exploration_c(&self) -> f64 {
        self.exploration_c
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn rollout_steps(&self) -> usize {
        self.rollout_steps
    }

    pub fn objective_count(&self) -> usize {
        self.objective_count
    }
}

/// One reward grid per objective, co-registered on a single geometry.
///
/// Rewards are read by nearest-cell lookup: the value of the cell containing
/// the query position. Positions outside the extent read as zero.
#[derive(Clone, Debug)]
pub struct RewardMaps {
    geometry: GridGeometry,
    layers: Vec<Array2<f64>>,
}

impl RewardMaps {
    /// Build reward maps from 1 or 2 layers shaped `(geometry.rows, geometry.cols)`.
    pub fn new(geometry: GridGeometry, layers: Vec<Array2<f64>>) -> Result<Self, SearchError> {
        if layers.is_empty() || layers.len() > MAX_OBJECTIVES {
            return Err(SearchError::InvalidConfig(format!(
                "reward maps need 1 to {MAX_OBJECTIVES} layers, got {}",
                layers.len()
            )));
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.dim() != (geometry.rows, geometry.cols) {
                return Err(SearchError::InvalidConfig(format!(
                    "layer {k} is {:?}, geometry is {}x{}",
                    layer.dim(),
                    geometry.rows,
                    geometry.cols
                )));
            }
            if layer.iter().any(|v| !v.is_finite()) {
                return Err(SearchError::InvalidConfig(format!(
                    "layer {k} contains a non-finite value"
                )));
            }
        }
        Ok(Self { geometry, layers })
    }

    pub fn objective_count(&self) -> usize {
        self.layers.len()
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn layer(&self, k: usize) -> &Array2<f64> {
        &self.layers[k]
    }

    /// Reward vector of the cell containing `p`; zeros outside the extent.
    pub fn reward_at(&self, p: [f64; 2]) -> RewardVec {
        let mut out = [0.0; MAX_OBJECTIVES];
        if let Ok((i, j)) = self.geometry.world_to_cell(p) {
            for (k, layer) in self.layers.iter().enumerate() {
                out[k] = layer[(i, j)];
            }
        }
        out
    }
}

/// Exploration bonus of the scalar UCB rule: `C·sqrt(2·ln N_p / N_j)`.
pub fn ucb_exploration(c: f64, parent_visits: f64, visits: f64) -> f64 {
    c * ((2.0 * parent_visits.ln()) / visits).sqrt()
}

/// Exploration bonus of the Pareto-UCB rule:
/// `C·sqrt((4·ln N_p + ln D_r) / (2·N_j))`, identical for every component.
///
/// With `d_r = 1` the radicand is `4·ln N_p / (2·N_j)`; scaling numerator and
/// denominator by two is exact in binary floating point, so the bonus equals
/// [`ucb_exploration`] bit for bit.
pub fn pucb_exploration(c: f64, parent_visits: f64, visits: f64, d_r: usize) -> f64 {
    c * ((4.0 * parent_visits.ln() + (d_r as f64).ln()) / (2.0 * visits)).sqrt()
}

/// One tree node, linked into a [`SearchTree`] arena by index.
#[derive(Clone, Debug)]
pub struct SearchNode {
    /// Vehicle pose this node represents.
    pub pose: RobotState,
    /// Steering index that led here from the parent; `None` for the root.
    pub incoming_action: Option<usize>,
    /// Arena index of the parent; `None` for the root.
    pub parent: Option<usize>,
    /// Number of simulations backpropagated through this node.
    pub visit_count: u64,
    /// Componentwise sum of returns backpropagated through this node.
    pub reward_sum: RewardVec,
    /// Arena indices of expanded children.
    pub children: Vec<usize>,
    /// Feasible steering indices not yet expanded, disjoint from `children`.
    pub untried_actions: Vec<usize>,
    /// No action keeps the vehicle inside the workspace from this pose.
    pub terminal: bool,
    /// Simulations whose selection/expansion walk ended at this node.
    pub sims_ended_here: u64,
}

impl SearchNode {
    fn new(pose: RobotState, incoming_action: Option<usize>, parent: Option<usize>, ws: &Workspace) -> Self {
        let untried_actions = ws.feasible_actions(pose);
        let terminal = untried_actions.is_empty();
        Self {
            pose,
            incoming_action,
            parent,
            visit_count: 0,
            reward_sum: [0.0; MAX_OBJECTIVES],
            children: Vec::new(),
            untried_actions,
            terminal,
            sims_ended_here: 0,
        }
    }

    /// Mean reward per objective; caller must ensure `visit_count > 0`.
    pub fn mean_reward(&self) -> RewardVec {
        debug_assert!(self.visit_count > 0, "mean of an unvisited node");
        let n = self.visit_count as f64;
        [self.reward_sum[0] / n, self.reward_sum[1] / n]
    }
}

/// UCB value of a visited node seen from a parent with `parent_visits` visits.
pub fn ucb_value(node: &SearchNode, parent_visits: u64, c: f64) -> f64 {
    debug_assert!(node.visit_count > 0 && parent_visits > 0);
    node.mean_reward()[0] + ucb_exploration(c, parent_visits as f64, node.visit_count as f64)
}

/// Pareto-UCB vector of a visited node: mean vector plus a shared bonus.
pub fn pucb_vector(node: &SearchNode, parent_visits: u64, c: f64, d_r: usize) -> RewardVec {
    debug_assert!(node.visit_count > 0 && parent_visits > 0);
    let bonus = pucb_exploration(c, parent_visits as f64, node.visit_count as f64, d_r);
    let mean = node.mean_reward();
    let mut out = [0.0; MAX_OBJECTIVES];
    for k in 0..d_r.min(MAX_OBJECTIVES) {
        out[k] = mean[k] + bonus;
    }
    out
}

/// Indices of the vectors not weakly dominated by any other vector, ascending.
///
/// `u` weakly dominates `v` when `u ≥ v` in every component and `u > v` in at
/// least one; equal-valued duplicates therefore never eliminate each other and
/// are all retained. All vectors must share one length and be finite.
pub fn pareto_front<V: AsRef<[f64]>>(vectors: &[V]) -> Vec<usize> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let d = vectors[0].as_ref().len();
    assert!(d > 0, "pareto front of zero-dimensional vectors");
    for v in vectors {
        let v = v.as_ref();
        assert_eq!(v.len(), d, "mixed vector lengths in pareto front");
        assert!(v.iter().all(|x| x.is_finite()), "non-finite vector in pareto front");
    }
    let mut front = if d == 2 {
        front_2d(vectors)
    } else {
        front_pairwise(vectors, d)
    };
    front.sort_unstable();
    front
}

/// Plane sweep: walk groups of equal first component in descending order; a
/// vector survives iff it attains its group's maximum second component and
/// that maximum strictly exceeds every earlier (higher-first-component) one.
fn front_2d<V: AsRef<[f64]>>(vectors: &[V]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        let (a, b) = (vectors[a].as_ref(), vectors[b].as_ref());
        b[0].total_cmp(&a[0]).then(b[1].total_cmp(&a[1]))
    });
    let mut front = Vec::new();
    let mut best_second = f64::NEG_INFINITY;
    let mut g = 0;
    while g < order.len() {
        let first = vectors[order[g]].as_ref()[0];
        let mut end = g;
        while end < order.len() && vectors[order[end]].as_ref()[0] == first {
            end += 1;
        }
        // Group is sorted by descending second component, so its max is at `g`.
        let group_max = vectors[order[g]].as_ref()[1];
        if group_max > best_second {
            front.extend(
                order[g..end]
                    .iter()
                    .copied()
                    .filter(|&i| vectors[i].as_ref()[1] == group_max),
            );
            best_second = group_max;
        }
        g = end;
    }
    front
}

fn front_pairwise<V: AsRef<[f64]>>(vectors: &[V], d: usize) -> Vec<usize> {
    let dominates = |u: &[f64], v: &[f64]| {
        (0..d).all(|k| u[k] >= v[k]) && (0..d).any(|k| u[k] > v[k])
    };
    (0..vectors.len())
        .filter(|&i| {
            !vectors
                .iter()
                .any(|u| dominates(u.as_ref(), vectors[i].as_ref()))
        })
        .collect()
}

/// How selection ranks fully expanded children.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionMode {
    /// Argmax of scalar UCB, ties broken by lowest child index.
    Scalar,
    /// Uniform draw from the Pareto front of the children's Pareto-UCB vectors.
    Pareto,
}

/// Independent randomness for the two stochastic phases of a search.
#[derive(Debug)]
pub struct SearchRngs<R> {
    /// Drives the uniform draw from the Pareto front during selection.
    pub select: R,
    /// Drives the uniform choice among untried actions during expansion.
    pub expand: R,
}

/// Grown search tree: an arena of nodes with the root at index 0.
#[derive(Clone, Debug)]
pub struct SearchTree {
    nodes: Vec<SearchNode>,
    objective_count: usize,
}

impl SearchTree {
    fn with_root(root_pose: RobotState, ws: &Workspace, objective_count: usize) -> Self {
        Self {
            nodes: vec![SearchNode::new(root_pose, None, None, ws)],
            objective_count,
        }
    }

    pub fn nodes(&self) -> &[SearchNode] {
        &self.nodes
    }

    pub fn root(&self) -> &SearchNode {
        &self.nodes[0]
    }

    pub fn objective_count(&self) -> usize {
        self.objective_count
    }

    /// Root-to-leaf action sequence following maximal visit counts, ties
    /// broken by lowest action index.
    pub fn principal_actions(&self) -> Vec<usize> {
        let mut actions = Vec::new();
        let mut at = 0;
        while !self.nodes[at].children.is_empty() {
            let best = self.nodes[at]
                .children
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    self.nodes[b]
                        .visit_count
                        .cmp(&self.nodes[a].visit_count)
                        .then(self.nodes[a].incoming_action.cmp(&self.nodes[b].incoming_action))
                })
                .expect("non-empty children");
            actions.push(
                self.nodes[best]
                    .incoming_action
                    .expect("non-root node has an incoming action"),
            );
            at = best;
        }
        actions
    }

    /// Serialize the tree for offline inspection: one record per node with
    /// pose, linkage, visit count, and mean reward (`null` when unvisited).
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct DumpNode {
            x1: f64,
            x2: f64,
            heading: f64,
            parent: Option<usize>,
            incoming_action: Option<usize>,
            visits: u64,
            mean_reward: Option<Vec<f64>>,
            terminal: bool,
        }
        #[derive(Serialize)]
        struct Dump {
            objective_count: usize,
            nodes: Vec<DumpNode>,
        }
        let dump = Dump {
            objective_count: self.objective_count,
            nodes: self
                .nodes
                .iter()
                .map(|n| DumpNode {
                    x1: n.pose.x1,
                    x2: n.pose.x2,
                    heading: n.pose.heading,
                    parent: n.parent,
                    incoming_action: n.incoming_action,
                    visits: n.visit_count,
                    mean_reward: (n.visit_count > 0)
                        .then(|| n.mean_reward()[..self.objective_count].to_vec()),
                    terminal: n.terminal,
                })
                .collect(),
        };
        serde_json::to_string(&dump).expect("tree serialization cannot fail")
    }
}

/// Result of one search: the recommended actions and whether the root itself
/// had no feasible action (in which case `actions` is empty).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchOutcome {
    pub actions: Vec<usize>,
    pub terminal_root: bool,
}

/// Pick a child of `at` (fully expanded, every child visited) by `mode`.
///
/// Returns the chosen child's arena index. Scalar mode takes the UCB argmax
/// with ties to the lowest child index; Pareto mode draws uniformly from the
/// Pareto front of the children's Pareto-UCB vectors.
pub fn select_child<R: Rng>(
    tree: &SearchTree,
    at: usize,
    mode: SelectionMode,
    c: f64,
    rng: &mut R,
) -> usize {
    let node = &tree.nodes[at];
    debug_assert!(node.untried_actions.is_empty() && !node.children.is_empty());
    match mode {
        SelectionMode::Scalar => {
            let mut best = node.children[0];
            let mut best_value = ucb_value(&tree.nodes[best], node.visit_count, c);
            for &child in &node.children[1..] {
                let value = ucb_value(&tree.nodes[child], node.visit_count, c);
                if value > best_value {
                    best = child;
                    best_value = value;
                }
            }
            best
        }
        SelectionMode::Pareto => {
            let d_r = tree.objective_count;
            let vectors: Vec<RewardVec> = node
                .children
                .iter()
                .map(|&ch| pucb_vector(&tree.nodes[ch], node.visit_count, c, d_r))
                .collect();
            let trimmed: Vec<&[f64]> = vectors.iter().map(|v| &v[..d_r]).collect();
            let front = pareto_front(&trimmed);
            node.children[front[rng.random_range(0..front.len())]]
        }
    }
}

/// Expand `at` by one uniformly drawn untried action; returns the new child's
/// arena index. The child is terminal if no action is feasible from its pose.
fn expand<R: Rng>(tree: &mut SearchTree, at: usize, ws: &Workspace, rng: &mut R) -> usize {
    let action = {
        let untried = &mut tree.nodes[at].untried_actions;
        debug_assert!(!untried.is_empty());
        untried.swap_remove(rng.random_range(0..untried.len()))
    };
    let pose = ws.step(tree.nodes[at].pose, action);
    let child = SearchNode::new(pose, Some(action), Some(at), ws);
    let idx = tree.nodes.len();
    tree.nodes.push(child);
    tree.nodes[at].children.push(idx);
    idx
}

/// Accumulated reward of up to `steps` zero-steering moves from `pose`.
///
/// Each step lands in a grid cell and adds that cell's reward vector; the
/// first inadmissible landing (outside the extent or occupied) contributes
/// nothing and ends the rollout.
pub fn rollout(ws: &Workspace, maps: &RewardMaps, pose: RobotState, steps: usize) -> RewardVec {
    let straight = ws.motion.action_count() / 2;
    let mut pose = pose;
    let mut total = [0.0; MAX_OBJECTIVES];
    for _ in 0..steps {
        pose = ws.step(pose, straight);
        if !ws.position_admissible(pose.position()) {
            break;
        }
        let r = maps.reward_at(pose.position());
        total[0] += r[0];
        total[1] += r[1];
    }
    total
}

/// Add `reward` and one visit to every node from `at` up to the root, and
/// record that the simulation walk ended at `at`.
fn backpropagate(tree: &mut SearchTree, at: usize, reward: RewardVec) {
    tree.nodes[at].sims_ended_here += 1;
    let mut cursor = Some(at);
    while let Some(i) = cursor {
        let node = &mut tree.nodes[i];
        node.visit_count += 1;
        node.reward_sum[0] += reward[0];
        node.reward_sum[1] += reward[1];
        cursor = node.parent;
    }
}

/// Run a full search and return only the outcome; see [`search_with_tree`].
pub fn search<R: Rng>(
    ws: &Workspace,
    root_pose: RobotState,
    maps: &RewardMaps,
    config: &SearchConfig,
    rngs: &mut SearchRngs<R>,
) -> Result<SearchOutcome, SearchError> {
    search_with_tree(ws, root_pose, maps, config, rngs).map(|(outcome, _)| outcome)
}

/// Run `config.iterations` select→expand→rollout→backpropagate cycles from
/// `root_pose` and return the outcome plus the grown tree.
///
/// Selection is scalar UCB for one objective and Pareto-UCB for two. Each
/// cycle backpropagates the simulated node's own cell reward plus its rollout
/// return. The outcome's action sequence follows maximal visit counts from
/// the root (ties to the lowest action index) and is empty only when the root
/// has no feasible action, which the `terminal_root` flag reports.
pub fn search_with_tree<R: Rng>(
    ws: &Workspace,
    root_pose: RobotState,
    maps: &RewardMaps,
    config: &SearchConfig,
    rngs: &mut SearchRngs<R>,
) -> Result<(SearchOutcome, SearchTree), SearchError> {
    if maps.objective_count() != config.objective_count {
        return Err(SearchError::MapMismatch(format!(
            "configured for {} objectives but maps carry {}",
            config.objective_count,
            maps.objective_count()
        )));
    }
    if maps.geometry.extent != ws.extent {
        return Err(SearchError::MapMismatch(
            "reward map extent differs from workspace extent".into(),
        ));
    }
    let mode = if config.objective_count == 1 {
        SelectionMode::Scalar
    } else {
        SelectionMode::Pareto
    };
    let mut tree = SearchTree::with_root(root_pose, ws, config.objective_count);
    for _ in 0..config.iterations {
        // Selection: descend through fully expanded nodes.
        let mut at = 0;
        while !tree.nodes[at].terminal
            && tree.nodes[at].untried_actions.is_empty()
            && !tree.nodes[at].children.is_empty()
        {
            at = select_child(&tree, at, mode, config.exploration_c, &mut rngs.select);
        }
        // Expansion: grow one child where an untried action remains.
        if !tree.nodes[at].untried_actions.is_empty() {
            at = expand(&mut tree, at, ws, &mut rngs.expand);
        }
        // Simulation: the node's own cell plus a moving-forward rollout.
        let immediate = maps.reward_at(tree.nodes[at].pose.position());
        let rolled = rollout(ws, maps, tree.nodes[at].pose, config.rollout_steps);
        let reward = [immediate[0] + rolled[0], immediate[1] + rolled[1]];
        backpropagate(&mut tree, at, reward);
    }
    let outcome = SearchOutcome {
        actions: tree.principal_actions(),
        terminal_root: tree.root().terminal,
    };
    Ok((outcome, tree))
}

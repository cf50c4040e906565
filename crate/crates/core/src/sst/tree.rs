use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::road::{in_goal, GoalRegion};
use crate::vehicle::{TimedState, Trajectory, VehicleState};

use super::index::BucketIndex;
use super::metric::StateMetric;
use super::SamplingBounds;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub state: TimedState,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Motion cost accumulated from the root.
    pub cost: f64,
    /// Weighted state cost of this node, cached for child edges.
    pub state_cost: f64,
    pub active: bool,
    pub in_goal: bool,
    removed: bool,
}

impl TreeNode {
    pub fn is_removed(&self) -> bool {
        self.removed
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub state: VehicleState,
    pub representative: NodeId,
}

/// Outcome of offering a new node to the witness set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insertion {
    Added(NodeId),
    /// Dominated by the representative of the witness it fell next to.
    Rejected {
        representative: NodeId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TreeStats {
    pub nodes: usize,
    pub active_nodes: usize,
    pub witnesses: usize,
    pub goal_nodes: usize,
}

#[derive(Debug, Clone)]
pub struct PlannerTree {
    nodes: Vec<TreeNode>,
    witnesses: Vec<Witness>,
    active: BucketIndex,
    witness_index: BucketIndex,
    best_goal: Option<NodeId>,
    metric: StateMetric,
    near: f64,
    prune: f64,
    step: f64,
    live: usize,
    goal_count: usize,
    scratch: Vec<(f64, usize)>,
}

impl PlannerTree {
    /// `cell` is the bucket edge in metric units.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        root: TimedState,
        root_state_cost: f64,
        root_in_goal: bool,
        metric: StateMetric,
        bounds: &SamplingBounds,
        near: f64,
        prune: f64,
        cell: f64,
        step: f64,
    ) -> Self {
        let (lo, hi) = metric.plane_bounds(bounds);
        let mut tree = Self {
            nodes: Vec::new(),
            witnesses: Vec::new(),
            active: BucketIndex::new(lo, hi, cell),
            witness_index: BucketIndex::new(lo, hi, cell),
            best_goal: None,
            metric,
            near,
            prune,
            step,
            live: 0,
            goal_count: 0,
            scratch: Vec::new(),
        };
        let id = tree.push(TreeNode {
            state: root,
            parent: None,
            children: Vec::new(),
            cost: 0.0,
            state_cost: root_state_cost,
            active: true,
            in_goal: root_in_goal,
            removed: false,
        });
        tree.add_witness(root.state, id);
        tree
    }

    fn push(&mut self, node: TreeNode) -> NodeId {
        let id = self.nodes.len();
        let plane = self.metric.plane(&node.state.state);
        if node.in_goal {
            self.goal_count += 1;
            if self
                .best_goal
                .is_none_or(|b| node.cost < self.nodes[b].cost)
            {
                self.best_goal = Some(id);
            }
        }
        if let Some(p) = node.parent {
            self.nodes[p].children.push(id);
        }
        self.nodes.push(node);
        self.active.insert(plane, id);
        self.live += 1;
        id
    }

    fn add_witness(&mut self, state: VehicleState, representative: NodeId) {
        let id = self.witnesses.len();
        self.witness_index.insert(self.metric.plane(&state), id);
        self.witnesses.push(Witness {
            state,
            representative,
        });
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    /// All nodes ever created, including removed ones; see [`TreeNode::is_removed`].
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn witnesses(&self) -> &[Witness] {
        &self.witnesses
    }

    pub fn metric(&self) -> &StateMetric {
        &self.metric
    }

    pub fn near_distance(&self) -> f64 {
        self.near
    }

    pub fn prune_distance(&self) -> f64 {
        self.prune
    }

    pub fn best_goal(&self) -> Option<NodeId> {
        self.best_goal
    }

    pub fn best_cost(&self) -> Option<f64> {
        self.best_goal.map(|id| self.nodes[id].cost)
    }

    pub fn active_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.active)
            .map(|(i, _)| i)
    }

    pub fn stats(&self) -> TreeStats {
        TreeStats {
            nodes: self.live,
            active_nodes: self.active.len(),
            witnesses: self.witnesses.len(),
            goal_nodes: self.goal_count,
        }
    }

    /// Lowest-cost active node within the near radius of `x`, else the nearest active node.
    pub fn select_node(&mut self, x: &VehicleState) -> Result<NodeId, PlanError> {
        let nodes = &self.nodes;
        self.active.within(
            x,
            self.near,
            &self.metric,
            |i| nodes[i].state.state,
            &mut self.scratch,
        );
        let best_near = self
            .scratch
            .iter()
            .map(|&(_, id)| id)
            .min_by(|&a, &b| nodes[a].cost.total_cmp(&nodes[b].cost).then(a.cmp(&b)));
        if let Some(id) = best_near {
            return Ok(id);
        }
        self.active
            .nearest(x, &self.metric, |i| nodes[i].state.state)
            .map(|(_, id)| id)
            .ok_or(PlanError::EmptyTree)
    }

    /// Nearest witness to `s` as (distance, witness index).
    pub fn nearest_witness(&self, s: &VehicleState) -> Option<(f64, usize)> {
        let witnesses = &self.witnesses;
        self.witness_index
            .nearest(s, &self.metric, |i| witnesses[i].state)
    }

    /// Witness-gated insertion of a child of `parent` with precomputed costs.
    pub fn insert(
        &mut self,
        parent: NodeId,
        state: TimedState,
        state_cost: f64,
        cost: f64,
        in_goal: bool,
    ) -> Insertion {
        let node = TreeNode {
            state,
            parent: Some(parent),
            children: Vec::new(),
            cost,
            state_cost,
            active: true,
            in_goal,
            removed: false,
        };
        match self.nearest_witness(&state.state) {
            Some((d, w)) if d <= self.prune => {
                let rep = self.witnesses[w].representative;
                if cost < self.nodes[rep].cost {
                    let id = self.push(node);
                    self.witnesses[w].representative = id;
                    self.deactivate(rep);
                    Insertion::Added(id)
                } else {
                    Insertion::Rejected {
                        representative: rep,
                    }
                }
            }
            _ => {
                let id = self.push(node);
                self.add_witness(state.state, id);
                Insertion::Added(id)
            }
        }
    }

    fn deactivate(&mut self, id: NodeId) {
        if !self.nodes[id].active {
            return;
        }
        self.nodes[id].active = false;
        let plane = self.metric.plane(&self.nodes[id].state.state);
        self.active.remove(plane, id);
        self.remove_dead_leaves(id);
    }

    /// Deletes inactive leaves upward; goal nodes and the root are kept.
    fn remove_dead_leaves(&mut self, mut id: NodeId) {
        loop {
            let n = &self.nodes[id];
            if n.active || n.in_goal || n.removed || !n.children.is_empty() {
                return;
            }
            let Some(parent) = n.parent else {
                return;
            };
            self.nodes[id].removed = true;
            self.live -= 1;
            let siblings = &mut self.nodes[parent].children;
            if let Some(pos) = siblings.iter().position(|&c| c == id) {
                siblings.remove(pos);
            }
            id = parent;
        }
    }

    /// Root-to-node sample chain.
    pub fn chain(&self, id: NodeId) -> Vec<TimedState> {
        let mut out = Vec::new();
        let mut cur = Some(id);
        while let Some(i) = cur {
            out.push(self.nodes[i].state);
            cur = self.nodes[i].parent;
        }
        out.reverse();
        out
    }

    pub fn trajectory_to(&self, id: NodeId) -> Trajectory {
        Trajectory::new(self.chain(id), self.step)
    }
}

/// Trajectory to the cheapest surviving node inside `goal`.
pub fn extract_best_trajectory(
    tree: &PlannerTree,
    goal: &GoalRegion,
) -> Result<Trajectory, PlanError> {
    tree.nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| !n.removed && in_goal(goal, &n.state.state))
        .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost).then(a.0.cmp(&b.0)))
        .map(|(id, _)| tree.trajectory_to(id))
        .ok_or(PlanError::NoGoalNode)
}

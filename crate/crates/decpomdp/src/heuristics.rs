//! Admissible Q-value heuristics: Q_MDP, Q_POMDP and Q_BG, stored per stage
//! either as a tree of reachable joint beliefs or as sets of alpha-vectors,
//! with a hybrid mode that picks the smaller representation stage by stage.
//!
//! All three heuristics represent the expected immediate reward exactly at
//! the last stage, which is what completeness of the search requires.

use crate::cbg::{CbgType, CollabBayesGame, QSource};
use crate::cbg_solver::create_solver;
use crate::model::{DecPomdpModel, JointBelief};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeuristicKind {
    QMdp,
    QPomdp,
    QBg,
}

impl std::fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HeuristicKind::QMdp => "qmdp",
            HeuristicKind::QPomdp => "qpomdp",
            HeuristicKind::QBg => "qbg",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QRepr {
    Tree,
    Vector,
    Hybrid,
}

impl std::fmt::Display for QRepr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QRepr::Tree => "tree",
            QRepr::Vector => "vector",
            QRepr::Hybrid => "hybrid",
        })
    }
}

/// Resource caps for heuristic computation. Exceeding a cap is a hard error,
/// never a silent truncation.
#[derive(Debug, Clone, Copy)]
pub struct HeuristicConfig {
    pub max_tree_nodes: usize,
    pub max_vectors: usize,
    /// Above this many 1-step policy tuples, the Q_BG inner maximization is
    /// handed to the branch-and-bound CBG solver instead of enumeration.
    pub qbg_enum_threshold: usize,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig { max_tree_nodes: 5_000_000, max_vectors: 200_000, qbg_enum_threshold: 1_000_000 }
    }
}

#[derive(Debug, Error)]
pub enum HeuristicError {
    #[error("belief tree exceeded the node cap of {cap} at stage {stage}")]
    TreeCapExceeded { cap: usize, stage: usize },
    #[error("vector backup exceeded the vector cap of {cap} at stage {stage}")]
    VectorCapExceeded { cap: usize, stage: usize },
    #[error("{kind} does not support the {repr} representation")]
    UnsupportedRepr { kind: HeuristicKind, repr: QRepr },
}

/// One node of the reachable joint-belief tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeNode {
    pub belief: Vec<f64>,
    /// child node id at the next stage per (ja * |O| + jo); -1 = impossible
    pub children: Vec<i32>,
    /// observation likelihood per (ja * |O| + jo)
    pub like: Vec<f64>,
    /// per-joint-action Q values; empty when this stage is not tree-backed
    pub q: Vec<f64>,
}

/// Per-stage lists of reachable joint beliefs, memoized so that beliefs equal
/// within 1e-12 share a node (Q values are functions of the belief, so this
/// only compresses the tree).
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct BeliefTree {
    pub stages: Vec<Vec<TreeNode>>,
}

const MEMO_SCALE: f64 = 1e12;

fn belief_key(b: &[f64]) -> Vec<i64> {
    b.iter().map(|&p| (p * MEMO_SCALE).round() as i64).collect()
}

impl BeliefTree {
    /// Builds stages 0..=depth of reachable beliefs; nodes at `depth` are not
    /// expanded. Errors when the total node count exceeds the cap.
    pub fn build(model: &DecPomdpModel, depth: usize, cap: usize) -> Result<BeliefTree, HeuristicError> {
        let na = model.num_joint_actions();
        let no = model.num_joint_obs();
        let mut stages: Vec<Vec<TreeNode>> = Vec::with_capacity(depth + 1);
        stages.push(vec![TreeNode {
            belief: model.initial_belief.as_slice().to_vec(),
            children: Vec::new(),
            like: Vec::new(),
            q: Vec::new(),
        }]);
        let mut total = 1usize;
        for t in 0..depth {
            let mut memo: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
            let mut next: Vec<TreeNode> = Vec::new();
            let current_len = stages[t].len();
            for idx in 0..current_len {
                let belief = JointBelief(stages[t][idx].belief.clone());
                let mut children = vec![-1i32; na * no];
                let mut like = vec![0.0; na * no];
                for ja in 0..na {
                    for jo in 0..no {
                        if let Some((post, l)) = model.belief_update(&belief, ja, jo) {
                            let key = belief_key(&post.0);
                            let id = *memo.entry(key).or_insert_with(|| {
                                next.push(TreeNode {
                                    belief: post.0.clone(),
                                    children: Vec::new(),
                                    like: Vec::new(),
                                    q: Vec::new(),
                                });
                                next.len() - 1
                            });
                            children[ja * no + jo] = id as i32;
                            like[ja * no + jo] = l;
                        }
                    }
                }
                stages[t][idx].children = children;
                stages[t][idx].like = like;
            }
            total += next.len();
            if total > cap {
                return Err(HeuristicError::TreeCapExceeded { cap, stage: t + 1 });
            }
            stages.push(next);
        }
        Ok(BeliefTree { stages })
    }

    pub fn node_count(&self) -> usize {
        self.stages.iter().map(Vec::len).sum()
    }
}

/// A staged admissible Q-value store. Stages below `vector_from` are backed
/// by the belief tree (values stored per reachable joint AOH node); stages at
/// or above it are sets of alpha-vectors per joint action, queried by maximum
/// inner product.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QHeuristic {
    pub kind: HeuristicKind,
    pub horizon: usize,
    /// first stage represented as vectors; 0 = all-vector, horizon = all-tree
    pub vector_from: usize,
    /// vector_stages[t - vector_from][a] = set of |S|-dimensional vectors
    pub vector_stages: Vec<Vec<Vec<Vec<f64>>>>,
    pub tree: Option<BeliefTree>,
}

impl QHeuristic {
    /// Number of stored real parameters: per tree stage, nodes x |A|; per
    /// vector stage, vectors x |S|.
    pub fn stored_params(&self) -> usize {
        let mut total = 0;
        if let Some(tree) = &self.tree {
            for t in 0..self.vector_from.min(tree.stages.len()) {
                for node in &tree.stages[t] {
                    total += node.q.len();
                }
            }
        }
        for stage in &self.vector_stages {
            for per_action in stage {
                for v in per_action {
                    total += v.len();
                }
            }
        }
        total
    }

    /// Q value for the joint belief `b` at `stage`. For tree-backed stages
    /// this is only defined when the belief corresponds to a reachable node,
    /// so vector stages answer directly and tree stages return `None`.
    pub fn q_for_belief(&self, b: &[f64], stage: usize, a: usize) -> Option<f64> {
        if stage >= self.vector_from {
            let sets = &self.vector_stages[stage - self.vector_from];
            return Some(max_inner_product(&sets[a], b));
        }
        None
    }

    /// Q value for the joint AOH given by `path` (joint action/observation
    /// index pairs from the root). `None` when the path is unreachable.
    pub fn q_value(&self, model: &DecPomdpModel, path: &[(usize, usize)], a: usize) -> Option<f64> {
        let stage = path.len();
        debug_assert!(stage < self.horizon);
        if stage < self.vector_from {
            let tree = self.tree.as_ref().expect("tree-backed stage has a tree");
            let no = model.num_joint_obs();
            let mut node = 0usize;
            for (t, &(ja, jo)) in path.iter().enumerate() {
                let id = tree.stages[t][node].children[ja * no + jo];
                if id < 0 {
                    return None;
                }
                node = id as usize;
            }
            Some(tree.stages[stage][node].q[a])
        } else {
            // walk the belief along the path
            let mut b = model.initial_belief.clone();
            for &(ja, jo) in path {
                match model.belief_update(&b, ja, jo) {
                    Some((post, _)) => b = post,
                    None => return None,
                }
            }
            self.q_for_belief(b.as_slice(), stage, a)
        }
    }
}

impl QSource for QHeuristic {
    fn q_for_path(&self, model: &DecPomdpModel, path: &[(usize, usize)], a: usize) -> Option<f64> {
        self.q_value(model, path, a)
    }
}

fn max_inner_product(set: &[Vec<f64>], b: &[f64]) -> f64 {
    set.iter()
        .map(|v| v.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Computes the requested heuristic. Q_MDP is inherently vector-shaped (one
/// vector per action and stage) and ignores `repr`; Q_BG ships tree-only.
pub fn compute(
    model: &DecPomdpModel,
    kind: HeuristicKind,
    repr: QRepr,
    config: &HeuristicConfig,
) -> Result<QHeuristic, HeuristicError> {
    match kind {
        HeuristicKind::QMdp => Ok(compute_qmdp(model)),
        HeuristicKind::QPomdp => compute_qpomdp(model, repr, config),
        HeuristicKind::QBg => match repr {
            QRepr::Tree => compute_qbg(model, config),
            other => Err(HeuristicError::UnsupportedRepr { kind, repr: other }),
        },
    }
}

/// Backward dynamic programming over the underlying MDP. Queries take the
/// belief inner product with the per-stage Q(s, a) values.
pub fn compute_qmdp(model: &DecPomdpModel) -> QHeuristic {
    let h = model.horizon;
    let ns = model.num_states();
    let na = model.num_joint_actions();
    // q[s][a] per stage, built backwards
    let mut stages: Vec<Vec<Vec<Vec<f64>>>> = vec![Vec::new(); h];
    let mut next_value: Vec<f64> = vec![0.0; ns];
    for t in (0..h).rev() {
        let mut per_action: Vec<Vec<Vec<f64>>> = Vec::with_capacity(na);
        let mut q = vec![0.0; ns * na];
        for s in 0..ns {
            for a in 0..na {
                let mut v = model.reward(s, a);
                if t + 1 < h {
                    for s2 in 0..ns {
                        v += model.trans(s, a, s2) * next_value[s2];
                    }
                }
                q[s * na + a] = v;
            }
        }
        for a in 0..na {
            per_action.push(vec![(0..ns).map(|s| q[s * na + a]).collect()]);
        }
        stages[t] = per_action;
        next_value = (0..ns)
            .map(|s| (0..na).map(|a| q[s * na + a]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
    }
    QHeuristic { kind: HeuristicKind::QMdp, horizon: h, vector_from: 0, vector_stages: stages, tree: None }
}

/// Q_POMDP: the underlying-POMDP value function, computed over the reachable
/// belief tree, by exact alpha-vector backups with pruning, or as the
/// size-minimal hybrid of the two.
pub fn compute_qpomdp(
    model: &DecPomdpModel,
    repr: QRepr,
    config: &HeuristicConfig,
) -> Result<QHeuristic, HeuristicError> {
    match repr {
        QRepr::Tree => {
            let mut tree = BeliefTree::build(model, model.horizon - 1, config.max_tree_nodes)?;
            backup_pomdp_tree(model, &mut tree, model.horizon, model.horizon);
            Ok(QHeuristic {
                kind: HeuristicKind::QPomdp,
                horizon: model.horizon,
                vector_from: model.horizon,
                vector_stages: Vec::new(),
                tree: Some(tree),
            })
        }
        QRepr::Vector => {
            let h = model.horizon;
            let mut stages: Vec<Vec<Vec<Vec<f64>>>> = vec![Vec::new(); h];
            stages[h - 1] = reward_vectors(model);
            for t in (0..h.saturating_sub(1)).rev() {
                stages[t] = vector_backup(model, &stages[t + 1], config, t)?;
            }
            Ok(QHeuristic {
                kind: HeuristicKind::QPomdp,
                horizon: h,
                vector_from: 0,
                vector_stages: stages,
                tree: None,
            })
        }
        QRepr::Hybrid => compute_hybrid(model, config),
    }
}

/// The immediate-reward vectors {R(., a)} of the last stage.
fn reward_vectors(model: &DecPomdpModel) -> Vec<Vec<Vec<f64>>> {
    let ns = model.num_states();
    (0..model.num_joint_actions())
        .map(|a| vec![(0..ns).map(|s| model.reward(s, a)).collect()])
        .collect()
}

/// Tree backups for stages `0..upto` (exclusive), assuming stages >= `upto`
/// are already available either in the tree (q filled) or as `vectors` for
/// exactly stage `upto` when `upto < horizon`.
fn backup_pomdp_tree(model: &DecPomdpModel, tree: &mut BeliefTree, upto: usize, horizon: usize) {
    let na = model.num_joint_actions();
    let no = model.num_joint_obs();
    for t in (0..upto).rev() {
        for idx in 0..tree.stages[t].len() {
            let mut q = vec![0.0; na];
            for (ja, qv) in q.iter_mut().enumerate() {
                let belief = JointBelief(tree.stages[t][idx].belief.clone());
                let mut v = model.expected_reward(&belief, ja);
                if t + 1 < horizon {
                    for jo in 0..no {
                        let like = tree.stages[t][idx].like[ja * no + jo];
                        if like == 0.0 {
                            continue;
                        }
                        let child = tree.stages[t][idx].children[ja * no + jo] as usize;
                        let best = (0..na)
                            .map(|a2| tree.stages[t + 1][child].q[a2])
                            .fold(f64::NEG_INFINITY, f64::max);
                        v += like * best;
                    }
                }
                *qv = v;
            }
            tree.stages[t][idx].q = q;
        }
    }
}

/// One exact alpha-vector backup with incremental pruning:
/// Q_a^t = prune({ R_a + Σ_o g_{a,o,α_o} }) with
/// g_{a,o,α}(s) = Σ_s' T(s'|s,a) O(o|a,s') α(s').
fn vector_backup(
    model: &DecPomdpModel,
    next: &[Vec<Vec<f64>>],
    config: &HeuristicConfig,
    stage: usize,
) -> Result<Vec<Vec<Vec<f64>>>, HeuristicError> {
    let ns = model.num_states();
    let na = model.num_joint_actions();
    let no = model.num_joint_obs();
    // union of next-stage sets represents V^{t+1} = max_a Q^{t+1}(., a)
    let union: Vec<Vec<f64>> = next.iter().flatten().cloned().collect();
    let union = prune_vectors(&union);

    let mut out = Vec::with_capacity(na);
    for a in 0..na {
        let r_a: Vec<f64> = (0..ns).map(|s| model.reward(s, a)).collect();
        let mut acc: Vec<Vec<f64>> = vec![r_a];
        for o in 0..no {
            let projected: Vec<Vec<f64>> = union
                .iter()
                .map(|alpha| {
                    (0..ns)
                        .map(|s| {
                            (0..ns)
                                .map(|s2| model.trans(s, a, s2) * model.obs(a, s2, o) * alpha[s2])
                                .sum()
                        })
                        .collect()
                })
                .collect();
            let mut summed = Vec::with_capacity(acc.len() * projected.len());
            for base in &acc {
                for g in &projected {
                    summed.push(base.iter().zip(g).map(|(x, y)| x + y).collect::<Vec<f64>>());
                }
            }
            acc = prune_vectors(&summed);
            if acc.len() > config.max_vectors {
                return Err(HeuristicError::VectorCapExceeded { cap: config.max_vectors, stage });
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Hybrid representation with minimum size: the last stage starts as the
/// |A| immediate-reward vectors; walking backwards, vector backups continue
/// while their pruned size stays below the tree size for that stage, then the
/// representation switches permanently to tree backups. A vector-cap abort
/// also switches to tree from that stage.
fn compute_hybrid(model: &DecPomdpModel, config: &HeuristicConfig) -> Result<QHeuristic, HeuristicError> {
    let h = model.horizon;
    let na = model.num_joint_actions();
    let ns = model.num_states();
    let mut tree = BeliefTree::build(model, h - 1, config.max_tree_nodes)?;

    let mut stages: Vec<Option<Vec<Vec<Vec<f64>>>>> = vec![None; h];
    stages[h - 1] = Some(reward_vectors(model));
    let mut z = na * ns;
    let mut vector_from = h - 1;
    if h >= 2 {
        for t in (0..=h - 2).rev() {
            let y = tree.stages[t].len() * na;
            let mut switch_to_tree = true;
            if z < y {
                match vector_backup(model, stages[t + 1].as_ref().unwrap(), config, t) {
                    Ok(sets) => {
                        let z2: usize = sets.iter().map(|s| s.len()).sum::<usize>() * ns;
                        if z2 < y {
                            stages[t] = Some(sets);
                            z = z2;
                            vector_from = t;
                            switch_to_tree = false;
                        }
                    }
                    Err(HeuristicError::VectorCapExceeded { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            if switch_to_tree {
                break;
            }
        }
    }

    // tree phase for stages 0..vector_from, bootstrapped from the vector
    // representation at `vector_from`
    let vector_sets: Vec<Vec<Vec<Vec<f64>>>> =
        stages.into_iter().skip(vector_from).map(|s| s.expect("vector stage computed")).collect();
    if vector_from > 0 {
        let no = model.num_joint_obs();
        for t in (0..vector_from).rev() {
            for idx in 0..tree.stages[t].len() {
                let mut q = vec![0.0; na];
                for (ja, qv) in q.iter_mut().enumerate() {
                    let belief = JointBelief(tree.stages[t][idx].belief.clone());
                    let mut v = model.expected_reward(&belief, ja);
                    for jo in 0..no {
                        let like = tree.stages[t][idx].like[ja * no + jo];
                        if like == 0.0 {
                            continue;
                        }
                        let child = tree.stages[t][idx].children[ja * no + jo] as usize;
                        let child_belief = &tree.stages[t + 1][child].belief;
                        let best = if t + 1 < vector_from {
                            (0..na)
                                .map(|a2| tree.stages[t + 1][child].q[a2])
                                .fold(f64::NEG_INFINITY, f64::max)
                        } else {
                            (0..na)
                                .map(|a2| max_inner_product(&vector_sets[0][a2], child_belief))
                                .fold(f64::NEG_INFINITY, f64::max)
                        };
                        v += like * best;
                    }
                    *qv = v;
                }
                tree.stages[t][idx].q = q;
            }
        }
    }

    // stages >= vector_from need no tree nodes for queries
    let tree = if vector_from > 0 {
        let mut tr = tree;
        tr.stages.truncate(vector_from);
        for node in tr.stages.last_mut().into_iter().flatten() {
            node.children = Vec::new();
            node.like = Vec::new();
        }
        Some(tr)
    } else {
        None
    };

    Ok(QHeuristic {
        kind: HeuristicKind::QPomdp,
        horizon: h,
        vector_from,
        vector_stages: vector_sets,
        tree,
    })
}

/// Q_BG over the joint-AOH tree: per node and action, the immediate reward
/// plus the best 1-step-delayed-communication response, maximized over
/// tuples of individual observation -> action maps. Large tuple spaces are
/// handed to the branch-and-bound CBG solver.
pub fn compute_qbg(model: &DecPomdpModel, config: &HeuristicConfig) -> Result<QHeuristic, HeuristicError> {
    let h = model.horizon;
    let na = model.num_joint_actions();
    let no = model.num_joint_obs();
    let mut tree = BeliefTree::build(model, h - 1, config.max_tree_nodes)?;

    let tuple_count: usize = (0..model.num_agents)
        .map(|i| model.actions[i].len().pow(model.observations[i].len() as u32))
        .try_fold(1usize, |acc, k| acc.checked_mul(k))
        .unwrap_or(usize::MAX);

    for t in (0..h).rev() {
        for idx in 0..tree.stages[t].len() {
            let belief = JointBelief(tree.stages[t][idx].belief.clone());
            let mut q = vec![0.0; na];
            for (ja, qv) in q.iter_mut().enumerate() {
                let mut v = model.expected_reward(&belief, ja);
                if t + 1 < h {
                    let likes = &tree.stages[t][idx].like[ja * no..(ja + 1) * no];
                    let children = &tree.stages[t][idx].children[ja * no..(ja + 1) * no];
                    let child_q: Vec<Option<&[f64]>> = (0..no)
                        .map(|jo| {
                            if likes[jo] > 0.0 {
                                Some(tree.stages[t + 1][children[jo] as usize].q.as_slice())
                            } else {
                                None
                            }
                        })
                        .collect();
                    v += if tuple_count <= config.qbg_enum_threshold {
                        best_one_step_response_enum(model, likes, &child_q)
                    } else {
                        best_one_step_response_solver(model, likes, &child_q)
                    };
                }
                *qv = v;
            }
            tree.stages[t][idx].q = q;
        }
    }

    Ok(QHeuristic {
        kind: HeuristicKind::QBg,
        horizon: h,
        vector_from: h,
        vector_stages: Vec::new(),
        tree: Some(tree),
    })
}

/// max over β = (β_i : O_i -> A_i) of Σ_o Pr(o) Q(child_o, β(o)), by direct
/// enumeration of all tuples.
fn best_one_step_response_enum(
    model: &DecPomdpModel,
    likes: &[f64],
    child_q: &[Option<&[f64]>],
) -> f64 {
    let obs_ix = model.obs_ix();
    let action_ix = model.action_ix();
    let no = obs_ix.len();
    // digits: per (agent, individual obs) -> action
    let slot_sizes: Vec<(usize, usize)> = (0..model.num_agents)
        .map(|i| (model.observations[i].len(), model.actions[i].len()))
        .collect();
    let total_slots: usize = slot_sizes.iter().map(|&(o, _)| o).sum();
    let mut digits = vec![0usize; total_slots];
    let radix: Vec<usize> = slot_sizes
        .iter()
        .flat_map(|&(o, a)| std::iter::repeat(a).take(o))
        .collect();
    // slot offset per agent
    let mut offsets = Vec::with_capacity(model.num_agents);
    let mut acc = 0;
    for &(o, _) in &slot_sizes {
        offsets.push(acc);
        acc += o;
    }

    let mut best = f64::NEG_INFINITY;
    loop {
        let mut v = 0.0;
        for jo in 0..no {
            let like = likes[jo];
            if like == 0.0 {
                continue;
            }
            let parts = obs_ix.decode(jo);
            let ja_parts: Vec<usize> = parts
                .iter()
                .enumerate()
                .map(|(agent, &o)| digits[offsets[agent] + o])
                .collect();
            let ja = action_ix.encode(&ja_parts);
            v += like * child_q[jo].expect("positive-likelihood child exists")[ja];
        }
        if v > best {
            best = v;
        }
        // odometer
        let mut i = digits.len();
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < radix[i] {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Same maximization via the incremental CBG solver on the induced one-step
/// game (types = individual observations, payoffs = child Q values).
fn best_one_step_response_solver(
    model: &DecPomdpModel,
    likes: &[f64],
    child_q: &[Option<&[f64]>],
) -> f64 {
    let na = model.num_joint_actions();
    let no = model.num_joint_obs();
    let types: Vec<Vec<CbgType>> = (0..model.num_agents)
        .map(|i| {
            (0..model.observations[i].len())
                .map(|_| CbgType { representative: Vec::new(), members: vec![Vec::new()] })
                .collect()
        })
        .collect();
    let mut payoffs = vec![f64::INFINITY; no * na];
    for (jo, cq) in child_q.iter().enumerate() {
        if let Some(cq) = cq {
            payoffs[jo * na..(jo + 1) * na].copy_from_slice(cq);
        }
    }
    let game = CollabBayesGame {
        stage: 0,
        num_agents: model.num_agents,
        num_joint_actions: na,
        types,
        probs: likes.to_vec(),
        beliefs: vec![Vec::new(); no],
        payoffs,
    };
    let sizes: Vec<usize> = model.actions.iter().map(Vec::len).collect();
    let mut solver = create_solver(Arc::new(game), &sizes);
    solver
        .next_solution(f64::NEG_INFINITY, f64::INFINITY)
        .expect("one-step game has a best response")
        .1
}

/// Parsimonious alpha-vector set with the same upper surface: exact
/// duplicates collapse, pointwise-dominated vectors drop, then Lark's
/// filtering keeps exactly the vectors that win somewhere on the simplex
/// (1e-9 feasibility tolerance; ties broken lexicographically by contents).
pub fn prune_vectors(set: &[Vec<f64>]) -> Vec<Vec<f64>> {
    const TOL: f64 = 1e-9;
    if set.is_empty() {
        return Vec::new();
    }
    let ns = set[0].len();
    // sort descending lexicographically; dedupe exact duplicates
    let mut cands: Vec<Vec<f64>> = set.to_vec();
    cands.sort_by(|a, b| lex_cmp(b, a));
    cands.dedup();
    // drop pointwise-dominated vectors
    let mut keep = vec![true; cands.len()];
    for i in 0..cands.len() {
        if !keep[i] {
            continue;
        }
        for j in 0..cands.len() {
            if i == j || !keep[j] {
                continue;
            }
            let dominated = cands[i].iter().zip(&cands[j]).all(|(x, y)| x <= y);
            if dominated {
                keep[i] = false;
                break;
            }
        }
    }
    let mut frontier: Vec<Vec<f64>> = cands
        .into_iter()
        .zip(keep)
        .filter_map(|(v, k)| if k { Some(v) } else { None })
        .collect();
    if frontier.len() <= 1 {
        return frontier;
    }

    // Lark's filtering: seed with the corner winners, then add witnesses.
    let mut result: Vec<Vec<f64>> = Vec::new();
    for s in 0..ns {
        let best = frontier
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a[s].total_cmp(&b[s]).then_with(|| lex_cmp(a, b)))
            .map(|(i, _)| i)
            .expect("frontier non-empty");
        let v = frontier.swap_remove(best);
        if !result.contains(&v) {
            result.push(v);
        }
        if frontier.is_empty() {
            frontier.sort_by(|a, b| lex_cmp(b, a));
            return result;
        }
    }
    frontier.sort_by(|a, b| lex_cmp(b, a));

    while let Some(candidate) = frontier.first().cloned() {
        match dominating_witness(&candidate, &result, TOL) {
            None => {
                frontier.remove(0);
            }
            Some(witness) => {
                // the frontier vector maximal at the witness joins the result
                let best = frontier
                    .iter()
                    .enumerate()
                    .max_by(|(_, a), (_, b)| {
                        dot(a, &witness).total_cmp(&dot(b, &witness)).then_with(|| lex_cmp(a, b))
                    })
                    .map(|(i, _)| i)
                    .expect("frontier non-empty");
                let v = frontier.remove(best);
                result.push(v);
            }
        }
    }
    result
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            ord => return ord,
        }
    }
    std::cmp::Ordering::Equal
}

/// Finds a belief where `v` strictly exceeds everything in `others` by more
/// than `tol` (the LP maximizes that margin). `None` if no such belief.
fn dominating_witness(v: &[f64], others: &[Vec<f64>], tol: f64) -> Option<Vec<f64>> {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    if others.is_empty() {
        return Some(uniform_belief(v.len()));
    }
    let ns = v.len();
    let mut pb = Problem::new(OptimizationDirection::Maximize);
    let d = pb.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let bs: Vec<_> = (0..ns).map(|_| pb.add_var(0.0, (0.0, 1.0))).collect();
    pb.add_constraint(bs.iter().map(|&var| (var, 1.0)), ComparisonOp::Eq, 1.0);
    for alpha in others {
        let mut terms: Vec<_> =
            bs.iter().enumerate().map(|(s, &var)| (var, v[s] - alpha[s])).collect();
        terms.push((d, -1.0));
        pb.add_constraint(terms, ComparisonOp::Ge, 0.0);
    }
    match pb.solve() {
        Ok(sol) if sol.objective() > tol => {
            Some(bs.iter().map(|&var| sol[var].max(0.0)).collect())
        }
        _ => None,
    }
}

fn uniform_belief(ns: usize) -> Vec<f64> {
    vec![1.0 / ns as f64; ns]
}

/// Cache file name for a computed heuristic, keyed by problem digest, kind,
/// representation and horizon so heuristic cost is amortized over runs.
pub fn cache_file_name(model: &DecPomdpModel, kind: HeuristicKind, repr: QRepr) -> String {
    format!("{}-{}-{}-h{}.json", model.digest(), kind, repr, model.horizon)
}

pub fn save_to_cache(
    dir: &Path,
    model: &DecPomdpModel,
    repr: QRepr,
    heuristic: &QHeuristic,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(cache_file_name(model, heuristic.kind, repr));
    let json = serde_json::to_string(heuristic).expect("heuristic serializes");
    std::fs::write(path, json)
}

pub fn load_from_cache(
    dir: &Path,
    model: &DecPomdpModel,
    kind: HeuristicKind,
    repr: QRepr,
) -> Option<QHeuristic> {
    let path = dir.join(cache_file_name(model, kind, repr));
    let data = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&data).ok()
}

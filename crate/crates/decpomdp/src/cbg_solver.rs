//! Incremental k-best solver for collaborative Bayesian games: branch and
//! bound over consistency-constrained joint-action vectors, delivering joint
//! CBG policies one at a time in non-increasing value order. The search tree
//! is retained across calls; nodes are never pruned for falling below the
//! incumbent, since they may carry a later-requested k-th best solution.

use crate::cbg::{CollabBayesGame, JointCbgPolicy};
use crate::joint::JointIndexer;
use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::sync::Arc;
use thiserror::Error;

const UNASSIGNED: u16 = u16::MAX;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("brute-force enumeration cap exceeded: {count} joint CBG policies > cap {cap}")]
    BruteForceCap { count: String, cap: u64 },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolverStats {
    pub nodes_expanded: usize,
    pub max_frontier: usize,
    pub solutions_returned: usize,
}

/// A partially specified joint-action vector: joint types `order[..depth]`
/// have been assigned joint actions consistent with the per-agent
/// commitments.
struct BnbNode {
    depth: usize,
    /// commitments[agent][type] = action or UNASSIGNED
    commitments: Vec<Vec<u16>>,
    /// canonical-order bound: Σ over positive joint types (ascending index)
    /// of Pr(θ) · max consistent u(θ, ·). IEEE addition is monotone, so this
    /// dominates the canonical value of every consistent completion exactly;
    /// for a fully committed node it *equals* the policy value bit-for-bit.
    bound: f64,
    /// flattened canonically-smallest completion (UNASSIGNED -> action 0)
    min_completion: Vec<u16>,
}

impl BnbNode {
    fn min_completion_of(commitments: &[Vec<u16>]) -> Vec<u16> {
        commitments
            .iter()
            .flat_map(|per_type| per_type.iter().map(|&a| if a == UNASSIGNED { 0 } else { a }))
            .collect()
    }
}

struct FrontierEntry {
    node: BnbNode,
}

impl PartialEq for FrontierEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for FrontierEntry {}
impl PartialOrd for FrontierEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for FrontierEntry {
    /// Max-heap: larger bound first; among equal bounds the canonically
    /// smallest completion first, so tie plateaus are explored in canonical
    /// order and can be cut off early.
    fn cmp(&self, other: &Self) -> Ordering {
        self.node
            .bound
            .total_cmp(&other.node.bound)
            .then_with(|| other.node.min_completion.cmp(&self.node.min_completion))
    }
}

struct PendingSolution {
    value: f64,
    digits: Vec<u16>,
    beta: JointCbgPolicy,
}

impl PartialEq for PendingSolution {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for PendingSolution {}
impl PartialOrd for PendingSolution {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for PendingSolution {
    /// BTreeSet order with the best solution first: higher value, then
    /// canonically smaller policy.
    fn cmp(&self, other: &Self) -> Ordering {
        other.value.total_cmp(&self.value).then_with(|| self.digits.cmp(&other.digits))
    }
}

/// Incremental BnB solver bound to one CBG. Stateful and single-threaded;
/// distinct solvers are independent.
pub struct IncrementalCbgSolver {
    game: Arc<CollabBayesGame>,
    action_ix: JointIndexer,
    /// positive-probability joint types, descending probability, ties by
    /// ascending joint-type index
    order: Vec<usize>,
    type_ix: JointIndexer,
    frontier: BinaryHeap<FrontierEntry>,
    pending: BTreeSet<PendingSolution>,
    stats: SolverStats,
}

/// Builds a solver for `game`. Requires at least one positive-probability
/// joint type. The root bound is Σ_θ Pr(θ) max_a u(θ, a).
pub fn create_solver(game: Arc<CollabBayesGame>, action_sizes: &[usize]) -> IncrementalCbgSolver {
    let mut order: Vec<usize> = (0..game.probs.len()).filter(|&t| game.probs[t] > 0.0).collect();
    assert!(!order.is_empty(), "CBG has no positive-probability joint type");
    order.sort_by(|&a, &b| game.probs[b].total_cmp(&game.probs[a]).then_with(|| a.cmp(&b)));
    let type_ix = game.type_ix();
    let action_ix = JointIndexer::new(action_sizes);
    let commitments: Vec<Vec<u16>> =
        game.types.iter().map(|tys| vec![UNASSIGNED; tys.len()]).collect();
    let mut solver = IncrementalCbgSolver {
        game,
        action_ix,
        order,
        type_ix,
        frontier: BinaryHeap::new(),
        pending: BTreeSet::new(),
        stats: SolverStats::default(),
    };
    let bound = solver.full_bound(&commitments);
    let min_completion = BnbNode::min_completion_of(&commitments);
    solver.frontier.push(FrontierEntry {
        node: BnbNode { depth: 0, commitments, bound, min_completion },
    });
    solver.stats.max_frontier = 1;
    solver
}

impl IncrementalCbgSolver {
    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    /// Tightest available bound on the best not-yet-returned solution.
    pub fn root_bound(&self) -> f64 {
        let fb = self.frontier.peek().map(|e| e.node.bound);
        let pb = self.pending.first().map(|p| p.value);
        match (fb, pb) {
            (Some(a), Some(b)) => a.max(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => f64::NEG_INFINITY,
        }
    }

    /// Upper bound for the commitments: for every positive-probability joint
    /// type, the best payoff among joint actions consistent with the
    /// commitments, summed in canonical joint-type order. Fully committed
    /// types contribute their exact payoff, so a complete node's bound is its
    /// canonical policy value.
    fn full_bound(&self, commitments: &[Vec<u16>]) -> f64 {
        let game = &self.game;
        let na = game.num_joint_actions;
        let mut total = 0.0;
        for theta in 0..game.probs.len() {
            let p = game.probs[theta];
            if p <= 0.0 {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for ja in 0..na {
                if !self.consistent(commitments, theta, ja) {
                    continue;
                }
                let u = game.payoffs[theta * na + ja];
                if u > best {
                    best = u;
                }
            }
            total += p * best;
        }
        total
    }

    fn consistent(&self, commitments: &[Vec<u16>], theta: usize, ja: usize) -> bool {
        for agent in 0..self.game.num_agents {
            let ty = self.type_ix.component(theta, agent);
            let committed = commitments[agent][ty];
            if committed != UNASSIGNED && committed as usize != self.action_ix.component(ja, agent)
            {
                return false;
            }
        }
        true
    }

    fn beta_of(&self, commitments: &[Vec<u16>]) -> JointCbgPolicy {
        JointCbgPolicy {
            assignments: commitments
                .iter()
                .map(|per_type| {
                    per_type.iter().map(|&a| if a == UNASSIGNED { 0 } else { a as usize }).collect()
                })
                .collect(),
        }
    }

    /// Returns the highest-value not-yet-returned policy with value >= `lb`,
    /// or `None` when no such policy remains. Consecutive returned values are
    /// non-increasing for a non-decreasing `lb` schedule. When a policy with
    /// value >= `ub` is found the search stops immediately and returns it.
    /// Equal-valued solutions are delivered in canonical policy order.
    pub fn next_solution(&mut self, lb: f64, ub: f64) -> Option<(JointCbgPolicy, f64)> {
        loop {
            let frontier_top: Option<(f64, Vec<u16>)> =
                self.frontier.peek().map(|e| (e.node.bound, e.node.min_completion.clone()));
            if let Some(p) = self.pending.first() {
                let dominated = match &frontier_top {
                    None => true,
                    Some((fb, fd)) => *fb < p.value || (*fb == p.value && fd > &p.digits),
                };
                if (p.value >= ub && p.value >= lb) || dominated {
                    if p.value >= lb {
                        let sol = self.pending.pop_first().expect("pending non-empty");
                        self.stats.solutions_returned += 1;
                        return Some((sol.beta, sol.value));
                    }
                    // best remaining candidate is below lb: nothing to return
                    // now; frontier and pending are retained for later calls
                    return None;
                }
            } else if frontier_top.as_ref().is_none_or(|(fb, _)| *fb < lb) {
                return None;
            }

            let entry = self.frontier.pop().expect("frontier non-empty here");
            let node = entry.node;
            self.stats.nodes_expanded += 1;

            let theta = self.order[node.depth];
            let na = self.game.num_joint_actions;
            for ja in 0..na {
                if !self.consistent(&node.commitments, theta, ja) {
                    continue;
                }
                let mut commitments = node.commitments.clone();
                for agent in 0..self.game.num_agents {
                    let ty = self.type_ix.component(theta, agent);
                    commitments[agent][ty] = self.action_ix.component(ja, agent) as u16;
                }
                let bound = self.full_bound(&commitments);
                let min_completion = BnbNode::min_completion_of(&commitments);
                if node.depth + 1 == self.order.len() {
                    // complete: the bound is the exact canonical policy value
                    let beta = self.beta_of(&commitments);
                    self.pending.insert(PendingSolution {
                        value: bound,
                        digits: min_completion,
                        beta,
                    });
                } else {
                    self.frontier.push(FrontierEntry {
                        node: BnbNode {
                            depth: node.depth + 1,
                            commitments,
                            bound,
                            min_completion,
                        },
                    });
                }
            }
            self.stats.max_frontier = self.stats.max_frontier.max(self.frontier.len());
        }
    }
}

/// Exact argmax over all joint CBG policies by enumeration, with the
/// canonical tie-break (first in enumeration order wins).
pub fn brute_force_best(
    game: &CollabBayesGame,
    action_sizes: &[usize],
    cap: u64,
) -> Result<(JointCbgPolicy, f64), SolverError> {
    let count = game
        .types
        .iter()
        .enumerate()
        .map(|(agent, tys)| num_bigint::BigUint::from(action_sizes[agent]).pow(tys.len() as u32))
        .product::<num_bigint::BigUint>();
    if count > num_bigint::BigUint::from(cap) {
        return Err(SolverError::BruteForceCap { count: count.to_string(), cap });
    }
    let action_ix = JointIndexer::new(action_sizes);
    let type_ix = game.type_ix();
    let mut best: Option<(JointCbgPolicy, f64)> = None;
    let mut iter = PolicyDigits::new(game, action_sizes);
    while let Some(beta) = iter.next_policy() {
        let mut v = 0.0;
        for theta in 0..game.probs.len() {
            let p = game.probs[theta];
            if p <= 0.0 {
                continue;
            }
            let parts: Vec<usize> = (0..game.num_agents)
                .map(|i| beta.assignments[i][type_ix.component(theta, i)])
                .collect();
            let ja = action_ix.encode(&parts);
            v += p * game.payoffs[theta * game.num_joint_actions + ja];
        }
        match &best {
            Some((_, bv)) if v <= *bv => {}
            _ => best = Some((beta, v)),
        }
    }
    Ok(best.expect("at least one policy exists"))
}

/// Canonical-order policy enumeration without borrowing the game.
struct PolicyDigits {
    action_counts: Vec<usize>,
    digits: Vec<Vec<usize>>,
    done: bool,
}

impl PolicyDigits {
    fn new(game: &CollabBayesGame, action_sizes: &[usize]) -> Self {
        PolicyDigits {
            action_counts: action_sizes.to_vec(),
            digits: game.types.iter().map(|t| vec![0usize; t.len()]).collect(),
            done: false,
        }
    }

    fn next_policy(&mut self) -> Option<JointCbgPolicy> {
        if self.done {
            return None;
        }
        let out = JointCbgPolicy { assignments: self.digits.clone() };
        let mut agent = self.digits.len();
        'outer: loop {
            if agent == 0 {
                self.done = true;
                break;
            }
            agent -= 1;
            let mut ty = self.digits[agent].len();
            while ty > 0 {
                ty -= 1;
                self.digits[agent][ty] += 1;
                if self.digits[agent][ty] < self.action_counts[agent] {
                    break 'outer;
                }
                self.digits[agent][ty] = 0;
            }
        }
        Some(out)
    }
}

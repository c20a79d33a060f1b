//! Collaborative Bayesian games for one stage of a Dec-POMDP: construction
//! from scratch, bootstrapped extension from the previous stage's game, and
//! lossless clustering of probabilistically equivalent types.

use crate::joint::JointIndexer;
use crate::model::{DecPomdpModel, JointBelief};
use crate::policy::{propagate_distribution, PastJointPolicy, StateHistoryDistribution};
use num_bigint::BigUint;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Supplier of heuristic Q-values keyed by joint action-observation history.
///
/// `path` lists joint (action, observation) index pairs from the root;
/// `None` means the history is unreachable (some step has zero likelihood).
pub trait QSource {
    fn q_for_path(&self, model: &DecPomdpModel, path: &[(usize, usize)], a: usize) -> Option<f64>;
}

/// One type of one agent: a set of merged action-observation histories.
/// Each member is the per-stage (action, observation) index sequence of one
/// individual AOH; the representative is the lexicographically smallest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CbgType {
    pub representative: Vec<(u16, u16)>,
    pub members: Vec<Vec<(u16, u16)>>,
}

impl CbgType {
    fn single(member: Vec<(u16, u16)>) -> Self {
        CbgType { representative: member.clone(), members: vec![member] }
    }
}

/// How merged payoff cells are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergePayoff {
    /// Minimum of the merged cells; valid for upper-bound heuristics.
    #[default]
    LowestUpperBound,
    /// Probability-weighted average of the merged cells.
    WeightedAverage,
}

/// A collaborative Bayesian game for stage `stage`.
///
/// Joint types are indexed mixed-radix over the per-agent type lists (agent 0
/// most significant). Cells with zero probability are "unreachable": their
/// belief is empty and their payoff is `f64::INFINITY`; such cells never
/// contribute to values or bounds.
#[derive(Debug, Clone)]
pub struct CollabBayesGame {
    pub stage: usize,
    pub num_agents: usize,
    pub num_joint_actions: usize,
    pub types: Vec<Vec<CbgType>>,
    /// Pr(θ), indexed by joint type.
    pub probs: Vec<f64>,
    /// Pr(s | θ) per joint type; empty for unreachable cells.
    pub beliefs: Vec<Vec<f64>>,
    /// u(θ, a) = payoffs[θ * |A| + a]; `INFINITY` for unreachable cells.
    pub payoffs: Vec<f64>,
}

/// A joint CBG policy: per agent, a total map type index -> action index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JointCbgPolicy {
    pub assignments: Vec<Vec<usize>>,
}

impl JointCbgPolicy {
    /// Lexicographic comparison over the flattened per-agent tables; this is
    /// the canonical enumeration order.
    pub fn canonical_cmp(&self, other: &JointCbgPolicy) -> std::cmp::Ordering {
        for (a, b) in self.assignments.iter().zip(&other.assignments) {
            match a.cmp(b) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        std::cmp::Ordering::Equal
    }
}

/// Statistics from one clustering call.
#[derive(Debug, Clone, Default)]
pub struct ClusterStats {
    pub merges: usize,
    pub pruned_zero_prob: usize,
    /// Number of full pairwise passes until no change occurred.
    pub fixpoint_iterations: usize,
}

impl CollabBayesGame {
    pub fn type_ix(&self) -> JointIndexer {
        JointIndexer::new(&self.types.iter().map(Vec::len).collect::<Vec<_>>())
    }

    pub fn num_joint_types(&self) -> usize {
        self.types.iter().map(Vec::len).product()
    }

    pub fn type_counts(&self) -> Vec<usize> {
        self.types.iter().map(Vec::len).collect()
    }

    /// Number of joint CBG policies, Π_i |A_i|^{|Θ_i|}.
    pub fn num_policies(&self, model: &DecPomdpModel) -> BigUint {
        let mut total = BigUint::from(1u32);
        for (agent, tys) in self.types.iter().enumerate() {
            let na = BigUint::from(model.actions[agent].len());
            total *= na.pow(tys.len() as u32);
        }
        total
    }

    /// Joint action index chosen by `beta` for joint type `theta`.
    pub fn joint_action(&self, model: &DecPomdpModel, beta: &JointCbgPolicy, theta: usize) -> usize {
        let tix = self.type_ix();
        let parts: Vec<usize> = (0..self.num_agents)
            .map(|i| beta.assignments[i][tix.component(theta, i)])
            .collect();
        model.action_ix().encode(&parts)
    }

    /// Expected payoff of a joint CBG policy: Σ_θ Pr(θ) u(θ, β(θ)).
    pub fn policy_value(&self, model: &DecPomdpModel, beta: &JointCbgPolicy) -> f64 {
        let tix = self.type_ix();
        let mut v = 0.0;
        for theta in 0..self.probs.len() {
            let p = self.probs[theta];
            if p <= 0.0 {
                continue;
            }
            let parts: Vec<usize> = (0..self.num_agents)
                .map(|i| beta.assignments[i][tix.component(theta, i)])
                .collect();
            let ja = model.action_ix().encode(&parts);
            v += p * self.payoffs[theta * self.num_joint_actions + ja];
        }
        v
    }

    /// Deterministic stream of all joint CBG policies in canonical order
    /// (lexicographic over the flattened per-agent type -> action tables,
    /// last entry varying fastest).
    pub fn enumerate_policies(&self, model: &DecPomdpModel) -> PolicyIter {
        PolicyIter {
            num_agents: self.num_agents,
            action_counts: (0..self.num_agents).map(|i| model.actions[i].len()).collect(),
            digits: self.types.iter().map(|t| vec![0usize; t.len()]).collect(),
            done: self.types.iter().any(|t| t.is_empty()),
        }
    }

    /// The CBG for the empty past joint policy: one empty-history type per
    /// agent, a single joint type with probability 1 and belief b0, payoffs
    /// from the heuristic at the root.
    pub fn initial(model: &DecPomdpModel, q: &impl QSource) -> Self {
        let na = model.num_joint_actions();
        let types: Vec<Vec<CbgType>> =
            (0..model.num_agents).map(|_| vec![CbgType::single(Vec::new())]).collect();
        let payoffs: Vec<f64> = (0..na)
            .map(|a| q.q_for_path(model, &[], a).expect("root history is reachable"))
            .collect();
        CollabBayesGame {
            stage: 0,
            num_agents: model.num_agents,
            num_joint_actions: na,
            types,
            probs: vec![1.0],
            beliefs: vec![model.initial_belief.as_slice().to_vec()],
            payoffs,
        }
    }

    /// Bootstrapped extension: per-agent type sets become
    /// {(θ_i, β_i(θ_i), o_i)}, probabilities multiply in the observation
    /// likelihood, beliefs advance by Bayes' rule, and payoffs take the
    /// lowest upper bound over the represented histories. Zero-probability
    /// extensions are kept until clustering prunes them.
    pub fn extend(
        &self,
        model: &DecPomdpModel,
        beta: &JointCbgPolicy,
        q: &impl QSource,
    ) -> CollabBayesGame {
        let na = model.num_joint_actions();
        let obs_ix = model.obs_ix();
        let no = obs_ix.len();
        let old_tix = self.type_ix();

        // New per-agent type lists, ordered (parent type, observation).
        let mut types: Vec<Vec<CbgType>> = Vec::with_capacity(self.num_agents);
        for agent in 0..self.num_agents {
            let n_obs = model.observations[agent].len();
            let mut list = Vec::with_capacity(self.types[agent].len() * n_obs);
            for (ti, ty) in self.types[agent].iter().enumerate() {
                let act = beta.assignments[agent][ti] as u16;
                for o in 0..n_obs {
                    let members: Vec<Vec<(u16, u16)>> = ty
                        .members
                        .iter()
                        .map(|m| {
                            let mut m2 = m.clone();
                            m2.push((act, o as u16));
                            m2
                        })
                        .collect();
                    let representative =
                        members.iter().min().expect("non-empty member list").clone();
                    list.push(CbgType { representative, members });
                }
            }
            types.push(list);
        }

        let new_tix = JointIndexer::new(&types.iter().map(Vec::len).collect::<Vec<_>>());
        let n_new = new_tix.len();
        let mut probs = vec![0.0; n_new];
        let mut beliefs = vec![Vec::new(); n_new];
        let mut payoffs = vec![f64::INFINITY; n_new * na];

        let obs_counts: Vec<usize> =
            (0..self.num_agents).map(|i| model.observations[i].len()).collect();

        for parent in 0..self.probs.len() {
            let p_parent = self.probs[parent];
            let parent_parts = old_tix.decode(parent);
            let ja_parts: Vec<usize> = (0..self.num_agents)
                .map(|i| beta.assignments[i][parent_parts[i]])
                .collect();
            let ja = model.action_ix().encode(&ja_parts);
            if p_parent <= 0.0 {
                continue; // children stay unreachable
            }
            let parent_belief = JointBelief(self.beliefs[parent].clone());
            for jo in 0..no {
                let obs_parts = obs_ix.decode(jo);
                let child_parts: Vec<usize> = (0..self.num_agents)
                    .map(|i| parent_parts[i] * obs_counts[i] + obs_parts[i])
                    .collect();
                let child = new_tix.encode(&child_parts);
                match model.belief_update(&parent_belief, ja, jo) {
                    Some((posterior, like)) => {
                        probs[child] = like * p_parent;
                        beliefs[child] = posterior.0;
                        for a in 0..na {
                            payoffs[child * na + a] =
                                min_member_q(model, &types, &new_tix, child, a, q);
                        }
                    }
                    None => {
                        probs[child] = 0.0;
                    }
                }
            }
        }

        CollabBayesGame {
            stage: self.stage + 1,
            num_agents: self.num_agents,
            num_joint_actions: na,
            types,
            probs,
            beliefs,
            payoffs,
        }
    }

    /// Builds the CBG for a past joint policy from scratch: one type per
    /// reachable individual AOH, joint-type probabilities from the state-
    /// history recursion, payoffs straight from the heuristic. Used by plain
    /// GMAA* and as a cross-check oracle for [`CollabBayesGame::extend`].
    pub fn from_scratch(
        model: &DecPomdpModel,
        policy: &PastJointPolicy,
        q: &impl QSource,
    ) -> CollabBayesGame {
        let t = policy.depth();
        if t == 0 {
            return CollabBayesGame::initial(model, q);
        }
        let mut dist = StateHistoryDistribution::initial(model);
        for rule in &policy.stages {
            dist = propagate_distribution(model, &dist, rule);
        }
        let na = model.num_joint_actions();

        // per-agent reachable observation histories, ascending
        let mut per_agent_ohs: Vec<Vec<u32>> = vec![Vec::new(); model.num_agents];
        for e in &dist.entries {
            for (agent, &oh) in e.ohs.iter().enumerate() {
                if !per_agent_ohs[agent].contains(&oh) {
                    per_agent_ohs[agent].push(oh);
                }
            }
        }
        for list in &mut per_agent_ohs {
            list.sort_unstable();
        }

        // individual AOH for (agent, oh): observation digits plus the actions
        // the policy takes along the prefix
        let aoh_of = |agent: usize, oh: u32| -> Vec<(u16, u16)> {
            let no = model.observations[agent].len() as u32;
            let mut obs = Vec::with_capacity(t);
            let mut rest = oh;
            for k in (0..t).rev() {
                let digit = (rest / no.pow(k as u32)) % no;
                rest %= no.pow(k as u32);
                obs.push(digit as u16);
            }
            let mut aoh = Vec::with_capacity(t);
            let mut prefix: usize = 0;
            for (stage, &o) in obs.iter().enumerate() {
                let a = policy.action(stage, agent, prefix);
                aoh.push((a as u16, o));
                prefix = prefix * no as usize + o as usize;
            }
            aoh
        };

        let types: Vec<Vec<CbgType>> = per_agent_ohs
            .iter()
            .enumerate()
            .map(|(agent, ohs)| {
                ohs.iter().map(|&oh| CbgType::single(aoh_of(agent, oh))).collect()
            })
            .collect();
        let tix = JointIndexer::new(&types.iter().map(Vec::len).collect::<Vec<_>>());
        let n = tix.len();
        let ns = model.num_states();
        let mut probs = vec![0.0; n];
        let mut state_mass = vec![0.0; n * ns];
        for e in &dist.entries {
            let parts: Vec<usize> = e
                .ohs
                .iter()
                .enumerate()
                .map(|(agent, oh)| {
                    per_agent_ohs[agent].binary_search(oh).expect("oh is in the reachable set")
                })
                .collect();
            let theta = tix.encode(&parts);
            probs[theta] += e.prob;
            state_mass[theta * ns + e.state] += e.prob;
        }
        let mut beliefs = vec![Vec::new(); n];
        let mut payoffs = vec![f64::INFINITY; n * na];
        for theta in 0..n {
            if probs[theta] <= 0.0 {
                probs[theta] = 0.0;
                continue;
            }
            beliefs[theta] =
                (0..ns).map(|s| state_mass[theta * ns + s] / probs[theta]).collect();
            for a in 0..na {
                payoffs[theta * na + a] = min_member_q(model, &types, &tix, theta, a, q);
            }
        }

        CollabBayesGame {
            stage: t,
            num_agents: model.num_agents,
            num_joint_actions: na,
            types,
            probs,
            beliefs,
            payoffs,
        }
    }

    /// Probabilistic equivalence of two same-agent types: for every profile
    /// of the other agents' types the conditional probabilities agree within
    /// `tol` and, where both cells carry mass, the conditioned joint beliefs
    /// agree entrywise within `tol`.
    pub fn probabilistically_equivalent(&self, agent: usize, ta: usize, tb: usize, tol: f64) -> bool {
        let tix = self.type_ix();
        let pa = self.type_marginal(agent, ta);
        let pb = self.type_marginal(agent, tb);
        if pa <= 0.0 || pb <= 0.0 {
            return false;
        }
        for theta in 0..tix.len() {
            if tix.component(theta, agent) != 0 {
                continue; // visit each profile of the other agents once
            }
            let mut parts = tix.decode(theta);
            parts[agent] = ta;
            let ja = tix.encode(&parts);
            parts[agent] = tb;
            let jb = tix.encode(&parts);
            let ca = self.probs[ja] / pa;
            let cb = self.probs[jb] / pb;
            if (ca - cb).abs() > tol {
                return false;
            }
            if self.probs[ja] > 0.0 && self.probs[jb] > 0.0 {
                let (ba, bb) = (&self.beliefs[ja], &self.beliefs[jb]);
                for s in 0..ba.len() {
                    if (ba[s] - bb[s]).abs() > tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn type_marginal(&self, agent: usize, ty: usize) -> f64 {
        let tix = self.type_ix();
        self.probs
            .iter()
            .enumerate()
            .filter(|&(theta, _)| tix.component(theta, agent) == ty)
            .map(|(_, &p)| p)
            .sum()
    }

    /// Lossless clustering: prunes zero-probability types, then repeatedly
    /// merges probabilistically equivalent same-agent pairs (earlier index
    /// absorbs later) until a full pass makes no change.
    pub fn cluster(mut self, tol: f64, merge: MergePayoff) -> (CollabBayesGame, ClusterStats) {
        let mut stats = ClusterStats::default();
        loop {
            stats.fixpoint_iterations += 1;
            let mut changed = false;
            for agent in 0..self.num_agents {
                // prune exact-zero-probability types
                loop {
                    let dead = (0..self.types[agent].len())
                        .find(|&ty| self.type_marginal(agent, ty) == 0.0);
                    match dead {
                        Some(ty) if self.types[agent].len() > 1 => {
                            self = self.rebuild(agent, ty, None, MergePayoff::LowestUpperBound);
                            stats.pruned_zero_prob += 1;
                            changed = true;
                        }
                        _ => break,
                    }
                }
                // pairwise merges, earlier index absorbs later
                let mut a = 0;
                while a < self.types[agent].len() {
                    let mut b = a + 1;
                    while b < self.types[agent].len() {
                        if self.probabilistically_equivalent(agent, a, b, tol) {
                            self = self.rebuild(agent, b, Some(a), merge);
                            stats.merges += 1;
                            changed = true;
                        } else {
                            b += 1;
                        }
                    }
                    a += 1;
                }
            }
            if !changed {
                break;
            }
        }
        (self, stats)
    }

    /// Drops type `removed` of `agent`; if `into` is given, folds the removed
    /// type's cells into it first (probabilities add, payoffs merge).
    fn rebuild(
        self,
        agent: usize,
        removed: usize,
        into: Option<usize>,
        merge: MergePayoff,
    ) -> CollabBayesGame {
        let old_tix = self.type_ix();
        let na = self.num_joint_actions;
        let mut types = self.types.clone();
        let removed_ty = types[agent].remove(removed);
        let into_new = into.map(|i| if i > removed { i - 1 } else { i });
        if let Some(tgt) = into_new {
            let tgt = &mut types[agent][tgt];
            tgt.members.extend(removed_ty.members);
            if let Some(min) = tgt.members.iter().min() {
                tgt.representative = min.clone();
            }
        }
        let new_tix = JointIndexer::new(&types.iter().map(Vec::len).collect::<Vec<_>>());
        let mut probs = vec![0.0; new_tix.len()];
        let mut beliefs: Vec<Vec<f64>> = vec![Vec::new(); new_tix.len()];
        let mut payoffs = vec![f64::INFINITY; new_tix.len() * na];

        for theta in 0..old_tix.len() {
            let comp = old_tix.component(theta, agent);
            let new_comp = if comp == removed {
                match into_new {
                    Some(t) => t,
                    None => continue, // dropped entirely
                }
            } else if comp > removed {
                comp - 1
            } else {
                comp
            };
            let mut parts = old_tix.decode(theta);
            parts[agent] = new_comp;
            let new_theta = new_tix.encode(&parts);

            let p_old = self.probs[theta];
            let p_acc = probs[new_theta];
            if beliefs[new_theta].is_empty() && p_old > 0.0 {
                // merged cells agree within the clustering tolerance when
                // both carry mass; keep whichever is populated
                beliefs[new_theta] = self.beliefs[theta].clone();
            }
            for a in 0..na {
                let v_old = self.payoffs[theta * na + a];
                let slot = &mut payoffs[new_theta * na + a];
                *slot = match merge {
                    MergePayoff::LowestUpperBound => slot.min(v_old),
                    MergePayoff::WeightedAverage => {
                        if slot.is_infinite() {
                            v_old
                        } else if v_old.is_infinite() {
                            *slot
                        } else {
                            let w = p_acc + p_old;
                            if w > 0.0 { (*slot * p_acc + v_old * p_old) / w } else { slot.min(v_old) }
                        }
                    }
                };
            }
            probs[new_theta] = p_acc + p_old;
        }

        CollabBayesGame {
            stage: self.stage,
            num_agents: self.num_agents,
            num_joint_actions: na,
            types,
            probs,
            beliefs,
            payoffs,
        }
    }

    /// Debug dump of the joint-type table as CSV:
    /// `types..., prob, belief..., payoffs...`.
    pub fn dump_csv(&self) -> String {
        let tix = self.type_ix();
        let ns = self.beliefs.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = String::new();
        out.push_str(&(0..self.num_agents).map(|i| format!("type{i}")).collect::<Vec<_>>().join(","));
        out.push_str(",prob");
        for s in 0..ns {
            out.push_str(&format!(",b{s}"));
        }
        for a in 0..self.num_joint_actions {
            out.push_str(&format!(",u{a}"));
        }
        out.push('\n');
        for theta in 0..self.probs.len() {
            let parts = tix.decode(theta);
            out.push_str(&parts.iter().map(ToString::to_string).collect::<Vec<_>>().join(","));
            out.push_str(&format!(",{}", self.probs[theta]));
            for s in 0..ns {
                let b = self.beliefs[theta].get(s).copied().unwrap_or(f64::NAN);
                out.push_str(&format!(",{b}"));
            }
            for a in 0..self.num_joint_actions {
                out.push_str(&format!(",{}", self.payoffs[theta * self.num_joint_actions + a]));
            }
            out.push('\n');
        }
        out
    }

    /// Random CBG for solver testing: normalized joint-type probabilities,
    /// uniform random payoffs, placeholder beliefs and members.
    pub fn random(seed: u64, type_counts: &[usize], num_joint_actions: usize) -> CollabBayesGame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tix = JointIndexer::new(type_counts);
        let n = tix.len();
        let mut probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= sum;
        }
        let payoffs: Vec<f64> =
            (0..n * num_joint_actions).map(|_| rng.gen_range(-10.0..10.0)).collect();
        CollabBayesGame {
            stage: 0,
            num_agents: type_counts.len(),
            num_joint_actions,
            types: type_counts
                .iter()
                .map(|&k| (0..k).map(|_| CbgType::single(Vec::new())).collect())
                .collect(),
            probs,
            beliefs: vec![Vec::new(); n],
            payoffs,
        }
    }
}

/// Minimum heuristic value over all joint member AOHs (cross product of the
/// per-agent member lists) of joint type `theta`; unreachable members are
/// skipped, and a fully unreachable cell yields `INFINITY`.
fn min_member_q(
    model: &DecPomdpModel,
    types: &[Vec<CbgType>],
    tix: &JointIndexer,
    theta: usize,
    a: usize,
    q: &impl QSource,
) -> f64 {
    let parts = tix.decode(theta);
    let member_lists: Vec<&Vec<Vec<(u16, u16)>>> =
        parts.iter().enumerate().map(|(agent, &ty)| &types[agent][ty].members).collect();
    let stage = member_lists[0].first().map_or(0, Vec::len);
    let counts: Vec<usize> = member_lists.iter().map(|m| m.len()).collect();
    let action_sizes: Vec<usize> = model.actions.iter().map(Vec::len).collect();
    let obs_sizes: Vec<usize> = model.observations.iter().map(Vec::len).collect();

    let mut best = f64::INFINITY;
    let mut pick = vec![0usize; counts.len()];
    let mut path = vec![(0usize, 0usize); stage];
    loop {
        for (t, slot) in path.iter_mut().enumerate() {
            let mut ja = 0usize;
            let mut jo = 0usize;
            for (agent, &m) in pick.iter().enumerate() {
                let (ai, oi) = member_lists[agent][m][t];
                ja = ja * action_sizes[agent] + ai as usize;
                jo = jo * obs_sizes[agent] + oi as usize;
            }
            *slot = (ja, jo);
        }
        if let Some(v) = q.q_for_path(model, &path, a) {
            if v < best {
                best = v;
            }
        }
        // odometer over member picks
        let mut i = pick.len();
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            pick[i] += 1;
            if pick[i] < counts[i] {
                break;
            }
            pick[i] = 0;
        }
    }
}

/// Iterator over all joint CBG policies in canonical order.
pub struct PolicyIter {
    num_agents: usize,
    action_counts: Vec<usize>,
    digits: Vec<Vec<usize>>,
    done: bool,
}

impl Iterator for PolicyIter {
    type Item = JointCbgPolicy;

    fn next(&mut self) -> Option<JointCbgPolicy> {
        if self.done {
            return None;
        }
        let out = JointCbgPolicy { assignments: self.digits.clone() };
        // odometer over (agent, type), last entry fastest
        let mut agent = self.num_agents;
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
